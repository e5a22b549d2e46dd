//! Throwaway calibration driver used during development. Not part of the
//! shipped interface.

use std::f64::consts::PI;
use std::time::Instant;

use isorotor::chassis;
use isorotor::manifold::{direction_from_phase, PhaseVector};
use isorotor::optimizer::{
    global_exhaust, local_minimize, tangent_gradient_max_norm, uniform_sphere_sample,
    SolverConfig,
};
use isorotor::symmetry::{chassis_symmetries, quotient_offset_distance, quotient_table_distance};
use isorotor::topology::{
    branch_sweep, classify, decoherent_sweep, fit_semi_ellipses, match_branches,
    star_polygon_predict, sweep_variation, verify_tangent_collapse, ClassifyConfig,
};
use isorotor::wrench::{build_grasp, metrics, sensitivity_sweep, DirectionSet, Objective};

fn fmt_offsets(offsets: &[f64]) -> String {
    offsets
        .iter()
        .map(|o| format!("{:.4}", o / PI))
        .collect::<Vec<_>>()
        .join(" ")
}

fn run_polygon(n: usize, samples: usize, seed: u64) {
    let t0 = Instant::now();
    let ch = chassis::builtin(&format!("CRPol{n}")).unwrap();
    let cfg = SolverConfig {
        gradient_tolerance: std::env::var("PILOT_TOL")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(SolverConfig::default().gradient_tolerance),
        max_iterations: std::env::var("PILOT_ITERS")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(SolverConfig::default().max_iterations),
        polish: std::env::var("PILOT_POLISH").map_or(true, |s| s != "0"),
        ..SolverConfig::default()
    };
    let prune: f64 = std::env::var("PILOT_PRUNE")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(1e-6);
    let set = global_exhaust(&ch, samples, prune, seed, &cfg).unwrap();
    println!(
        "CRPol{n}: {} solutions (of {samples}), converged {}, J_min {:.9}, elapsed {:.1?}",
        set.solutions.len(),
        set.converged_count,
        set.j_min,
        t0.elapsed()
    );
    let mut ccfg = ClassifyConfig::default();
    if let Some(e) = std::env::var("PILOT_EPS").ok().and_then(|s| s.parse().ok()) {
        ccfg.cluster.eps_deg = e;
    }
    let analysis = classify(&ch, &set, &ccfg).unwrap();
    println!(
        "  class {}, unique {}, residual {:.2e}, fraction {:?}",
        analysis.class,
        analysis.unique_configs,
        analysis.max_tangency_residual,
        analysis.leading_variance_fraction
    );
    if let Some(model) = &analysis.model {
        println!("  K = {}", model.k());
        for (i, b) in model.branches.iter().enumerate() {
            println!(
                "  branch {i}: members {:3}  spread {:7.3}  fiterr {:6.3}  chi {:?}\n    offsets/pi {}\n    rational   {}",
                b.member_rows.len(),
                b.spread_deg,
                b.max_fit_error_deg,
                b.chirality.iter().map(|&c| c as i32).collect::<Vec<_>>(),
                fmt_offsets(&b.offsets),
                b.rational_offsets
                    .iter()
                    .map(|(r, d)| format!("{r}/{d}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            );
        }
        let predicted = star_polygon_predict(n);
        for tol in [1.0, 2.0] {
            match match_branches(model, &predicted, tol, &ch) {
                Ok(report) => println!(
                    "  match tol {tol}: complete {}, max err {:?}, pairs {:?}",
                    report.complete(),
                    report.max_error_deg(),
                    report
                        .pairs
                        .iter()
                        .map(|p| (p.extracted_index, p.q, p.error_deg))
                        .collect::<Vec<_>>()
                ),
                Err(e) => println!("  match tol {tol}: error {e}"),
            }
        }
    }
    match fit_semi_ellipses(&set, &ch) {
        Ok(report) => {
            let worst = verify_tangent_collapse(&report, &ch, 1.0);
            println!("  ellipse verify at 1 deg: {worst:?}");
            let residuals: Vec<f64> = report.rotors.iter().map(|r| r.rms_residual).collect();
            println!("  ellipse rms residuals: {residuals:?}");
        }
        Err(e) => println!("  ellipse fit error: {e}"),
    }
}

fn run_platonic(id: &str, samples: usize, seed: u64, reference: &[Vec<f64>]) {
    let t0 = Instant::now();
    let ch = chassis::builtin(id).unwrap();
    let cfg = SolverConfig::default();
    let set = global_exhaust(&ch, samples, 1e-6, seed, &cfg).unwrap();
    println!(
        "{id}: {} solutions, converged {}, J_min {:.9}, elapsed {:.1?}",
        set.solutions.len(),
        set.converged_count,
        set.j_min,
        t0.elapsed()
    );
    let analysis = classify(&ch, &set, &ClassifyConfig::default()).unwrap();
    println!(
        "  class {}, unique {}, residual {:.2e}, fraction {:?}",
        analysis.class,
        analysis.unique_configs,
        analysis.max_tangency_residual,
        analysis.leading_variance_fraction
    );
    let ops = chassis_symmetries(&ch).unwrap();
    println!("  rotation ops: {}", ops.len());
    if let Some(model) = &analysis.model {
        println!("  raw K = {}", model.k());
        for (i, b) in model.branches.iter().enumerate() {
            let dref = quotient_offset_distance(&ops, &b.offsets, &reference[0]).to_degrees();
            println!(
                "  branch {i}: members {:3} spread {:7.3} ref-dist {:8.3} deg  offsets/pi {}",
                b.member_rows.len(),
                b.spread_deg,
                dref,
                fmt_offsets(&b.offsets)
            );
        }
        for (i, b) in model.branches.iter().enumerate() {
            println!("  branch {i} chirality: {:?}", b.chirality);
        }
        let ours: Vec<Vec<f64>> = model.branches.iter().map(|b| b.offsets.clone()).collect();
        let table_d = quotient_table_distance(&ops, &ours, reference).to_degrees();
        println!("  table quotient distance: {table_d:.4} deg");
        // Cross matrix: single-row quotient distance mine x paper.
        for (i, row) in ours.iter().enumerate() {
            let ds: Vec<String> = reference
                .iter()
                .map(|r| format!("{:7.3}", quotient_offset_distance(&ops, row, r).to_degrees()))
                .collect();
            println!("  row {i} vs paper rows: {}", ds.join(" "));
        }
        // Per-row op consistency: for each assignment and per-row op choice,
        // residuals ref - op(ours) must agree across rows up to scalar shifts.
        if ours.len() == reference.len() && ours.len() <= 4 {
            let k = ours.len();
            let mut assignments: Vec<Vec<usize>> = Vec::new();
            fn perms(pool: Vec<usize>, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
                if pool.is_empty() {
                    out.push(acc.clone());
                    return;
                }
                for (i, &v) in pool.iter().enumerate() {
                    let mut rest = pool.clone();
                    rest.remove(i);
                    acc.push(v);
                    perms(rest, acc, out);
                    acc.pop();
                }
            }
            perms((0..k).collect(), &mut Vec::new(), &mut assignments);
            let mut best = f64::INFINITY;
            for assign in &assignments {
                // residual candidates per row j: for each op, ref[assign[j]] - op(ours[j])
                let res: Vec<Vec<Vec<f64>>> = (0..k)
                    .map(|j| {
                        ops.iter()
                            .map(|op| {
                                let t = op.apply(&ours[j]);
                                reference[assign[j]]
                                    .iter()
                                    .zip(&t)
                                    .map(|(&r, &o)| isorotor::manifold::wrap_phase(r - o))
                                    .collect::<Vec<f64>>()
                            })
                            .collect()
                    })
                    .collect();
                // pick op for row 0, then greedily best-match ops for other rows
                for r0 in &res[0] {
                    let mut worst = 0.0f64;
                    for rj in res.iter().skip(1) {
                        let d = rj
                            .iter()
                            .map(|c| isorotor::symmetry::align_offsets_mod_global(c, r0))
                            .fold(f64::INFINITY, f64::min);
                        worst = worst.max(d);
                    }
                    best = best.min(worst);
                }
            }
            println!(
                "  per-row-op table distance (shared frame residual): {:.4} deg",
                best.to_degrees()
            );
        }
        // Pairwise quotient distances between extracted branches.
        for i in 0..model.k() {
            for j in (i + 1)..model.k() {
                let d = quotient_offset_distance(
                    &ops,
                    &model.branches[i].offsets,
                    &model.branches[j].offsets,
                )
                .to_degrees();
                println!("  quotient dist {i}-{j}: {d:.3} deg");
            }
        }
        // Singular values at a branch point of branch 0.
        let b = &model.branches[0];
        let theta: Vec<f64> = b
            .offsets
            .iter()
            .zip(&b.chirality)
            .map(|(&d, &c)| isorotor::manifold::wrap_phase(c as f64 * 0.3 + d))
            .collect();
        let dirs = direction_from_phase(&ch, &PhaseVector::new(theta).unwrap()).unwrap();
        let a = build_grasp(&ch, &dirs, ch.circumradius()).unwrap();
        let rep = metrics(&a, 1e-9);
        println!(
            "  sigma at branch pt: {:?} kappa {:?}",
            rep.singular_values, rep.condition_number
        );
    }
}

fn run_type_i() {
    for id in ["CTriPr6", "CQRPol7"] {
        let ch = chassis::builtin(id).unwrap();
        let set = global_exhaust(&ch, 200, 1e-6, 7, &SolverConfig::default()).unwrap();
        let analysis = classify(&ch, &set, &ClassifyConfig::default()).unwrap();
        println!(
            "{id}: class {}, unique {}, residual {:.2e}, fraction {:?}, J_min {:.6}",
            analysis.class,
            analysis.unique_configs,
            analysis.max_tangency_residual,
            analysis.leading_variance_fraction,
            set.j_min
        );
    }
}

fn run_sensitivity() {
    let ch = chassis::builtin("CRPol6").unwrap();
    let set = global_exhaust(&ch, 40, 1e-6, 3, &SolverConfig::default()).unwrap();
    let dirs = &set.solutions[0].directions;
    let ratios: Vec<f64> = (0..25).map(|k| 10f64.powf(-1.0 + 2.0 * k as f64 / 24.0)).collect();
    let t0 = Instant::now();
    let points = sensitivity_sweep(&ch, dirs, &ratios).unwrap();
    println!("sensitivity elapsed {:.2?}", t0.elapsed());
    for p in &points {
        println!(
            "  ratio {:8.4} kappa {:?} sigma_min {:.6}",
            p.ratio, p.kappa, p.sigma_min
        );
    }
    let min_idx = points
        .iter()
        .enumerate()
        .min_by(|a, b| {
            a.1.kappa.total_cmp(&b.1.kappa)
        })
        .unwrap()
        .0;
    println!("  kappa min at index {min_idx} (ratio {:.4})", points[min_idx].ratio);
}

fn run_sweeps() {
    for n in 6..=10 {
        let ch = chassis::builtin(&format!("CRPol{n}")).unwrap();
        let predicted = star_polygon_predict(n);
        for b in &predicted.branches {
            let chir = vec![1i8; n];
            let pts = branch_sweep(&ch, &b.offsets, &chir, 64).unwrap();
            let (sv, jv) = sweep_variation(&pts);
            let kmax = pts
                .iter()
                .map(|p| p.report.condition_number)
                .fold(0.0f64, f64::max);
            println!("CRPol{n} q={}: sigma var {sv:.3e}, J var {jv:.3e}, kappa max {kmax:.6}", b.q);
            let dec = decoherent_sweep(&ch, 64, 11).unwrap();
            let worst_gap = pts
                .iter()
                .zip(&dec)
                .map(|(a, c)| {
                    c.report.condition_number - a.report.condition_number
                })
                .fold(f64::INFINITY, f64::min);
            println!("  decoherent kappa gap min {worst_gap:.6}");
        }
    }
}

fn run_ablation() {
    let ch = chassis::builtin("CRPol10").unwrap();
    for objective in [Objective::LogVolume, Objective::ConditionNumber] {
        let cfg = SolverConfig {
            objective,
            ..SolverConfig::default()
        };
        let t0 = Instant::now();
        let set = global_exhaust(&ch, 50, 1e12, 17, &cfg).unwrap();
        let report = fit_semi_ellipses(&set, &ch).unwrap();
        let mean = isorotor::topology::mean_orthogonal_distance(&set, &ch, &report).unwrap();
        println!(
            "{objective:?}: {} solutions, mean dist {mean:.6e}, elapsed {:.1?}",
            set.solutions.len(),
            t0.elapsed()
        );
    }
}

fn run_oct_probe() {
    // What do the singular values look like along the all-zero-offset family
    // and the alternating family, in our frames?
    let ch = chassis::builtin("COct6").unwrap();
    for (name, offsets) in [
        ("zeros", vec![0.0; 6]),
        ("paper-order", vec![0.0, 0.0, 0.0, PI / 2.0, PI / 2.0, PI / 2.0]),
        ("alt", vec![0.0, PI / 2.0, 0.0, PI / 2.0, 0.0, PI / 2.0]),
    ] {
        let chir = vec![1i8; 6];
        let pts = branch_sweep(&ch, &offsets, &chir, 16).unwrap();
        let (sv, jv) = sweep_variation(&pts);
        let k0 = pts[0].report.condition_number;
        let j0 = pts[0].report.log_volume;
        println!("{name}: sigma var {sv:.3e} J var {jv:.3e} kappa(0) {k0:?} J(0) {j0:.6}");
    }
}

fn probe_polygon_branches(n: usize) {
    let ch = chassis::builtin(&format!("CRPol{n}")).unwrap();
    let predicted = star_polygon_predict(n);
    for b in &predicted.branches {
        let chir = vec![1i8; n];
        let pts = branch_sweep(&ch, &b.offsets, &chir, 8).unwrap();
        let (sv, jv) = sweep_variation(&pts);
        println!(
            "CRPol{n} q={}: J(0) {:.9} kappa(0) {:.6} sigma var {sv:.2e} J var {jv:.2e} sigma {:?}",
            b.q,
            pts[0].report.log_volume,
            pts[0].report.condition_number,
            pts[0].report.singular_values
        );
    }
}

fn probe_convergence(n: usize, samples: usize) {
    use isorotor::optimizer::{local_minimize, tangent_gradient_max_norm, uniform_sphere_sample};
    use rand::SeedableRng;
    let ch = chassis::builtin(&format!("CRPol{n}")).unwrap();
    for iters in [2000usize, 8000, 20000] {
        let cfg = SolverConfig {
            max_iterations: iters,
            ..SolverConfig::default()
        };
        let mut ok = 0;
        let mut iter_hist = Vec::new();
        let mut worst_grad = 0.0f64;
        for s in 0..samples {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
            rng.set_stream(s as u64 + 1);
            let dirs: Vec<_> = (0..n).map(|_| uniform_sphere_sample(&mut rng)).collect();
            let initial = DirectionSet::new(dirs).unwrap();
            let res = local_minimize(&ch, &initial, &cfg).unwrap();
            if res.converged {
                ok += 1;
                iter_hist.push(res.iterations);
            } else {
                let g = tangent_gradient_max_norm(&ch, &res.directions, &cfg).unwrap();
                worst_grad = worst_grad.max(g);
                if iters == 20000 {
                    let (theta, resid) =
                        isorotor::manifold::phase_from_direction(&ch, &res.directions).unwrap();
                    let offs: Vec<String> = theta
                        .values()
                        .iter()
                        .map(|&t| {
                            format!(
                                "{:.3}",
                                isorotor::manifold::wrap_phase(t - theta.values()[0]) / PI
                            )
                        })
                        .collect();
                    println!(
                        "  stuck s={s}: cost-jmin {:+.3e}, resid {:.1e}, grad {g:.1e}, offs/pi {}",
                        res.cost - (-2.772588722239781),
                        resid,
                        offs.join(" ")
                    );
                }
            }
        }
        iter_hist.sort_unstable();
        let med = iter_hist.get(iter_hist.len() / 2).copied().unwrap_or(0);
        let p90 = iter_hist
            .get((iter_hist.len() * 9) / 10)
            .copied()
            .unwrap_or(0);
        println!(
            "CRPol{n} cap {iters}: converged {ok}/{samples} (median iters {med}, p90 {p90}), worst stuck grad {worst_grad:.2e}"
        );
    }
}

fn probe_failures(n: usize, samples: usize) {
    use rand::SeedableRng;
    let ch = chassis::make_regular_polygon(n).unwrap();
    let cfg = SolverConfig::default();
    let runs: Vec<(bool, f64, usize, f64)> = (0..samples)
        .map(|index| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
            rng.set_stream(index as u64 + 1);
            let dirs: Vec<_> = (0..n).map(|_| uniform_sphere_sample(&mut rng)).collect();
            let initial = DirectionSet::new(dirs).unwrap();
            let res = local_minimize(&ch, &initial, &cfg).unwrap();
            let gmax = tangent_gradient_max_norm(&ch, &res.directions, &cfg).unwrap();
            (res.converged, gmax, res.iterations, res.cost)
        })
        .collect();
    let j_min = runs.iter().map(|r| r.3).fold(f64::INFINITY, f64::min);
    let bad: Vec<_> = runs.iter().filter(|r| !r.0).collect();
    println!(
        "CRPol{n}: {} unconverged of {samples}, j_min {j_min:.9}",
        bad.len()
    );
    let mut gs: Vec<f64> = bad.iter().map(|r| r.1).collect();
    gs.sort_by(f64::total_cmp);
    if !gs.is_empty() {
        println!(
            "  stuck gmax: min {:.2e} median {:.2e} max {:.2e}",
            gs[0],
            gs[gs.len() / 2],
            gs[gs.len() - 1]
        );
    }
    for r in bad.iter().take(12) {
        println!(
            "  gmax {:.3e}  iters {:>6}  cost-jmin {:.3e}",
            r.1,
            r.2,
            r.3 - j_min
        );
    }
    let mut conv_excess: Vec<f64> = runs
        .iter()
        .filter(|r| r.0)
        .map(|r| r.3 - j_min)
        .collect();
    conv_excess.sort_by(f64::total_cmp);
    let pct = |p: usize| conv_excess[(conv_excess.len() * p / 100).min(conv_excess.len() - 1)];
    println!(
        "  cost excess: p25 {:.2e} p50 {:.2e} p75 {:.2e} p90 {:.2e} max {:.2e}",
        pct(25),
        pct(50),
        pct(75),
        pct(90),
        pct(99)
    );
    for tol in [1e-10, 1e-9, 1e-8, 1e-7] {
        let kept = conv_excess.iter().filter(|&&e| e <= tol).count();
        print!("  prune {tol:.0e}: keep {kept}");
    }
    println!();
    let mut cg: Vec<f64> = runs.iter().filter(|r| r.0).map(|r| r.1).collect();
    cg.sort_by(f64::total_cmp);
    if !cg.is_empty() {
        println!(
            "  converged gmax: p10 {:.2e} p50 {:.2e} p90 {:.2e} max {:.2e}",
            cg[cg.len() / 10],
            cg[cg.len() / 2],
            cg[(cg.len() * 9) / 10],
            cg[cg.len() - 1]
        );
    }
}

fn probe_valley(n: usize, samples: usize) {
    use nalgebra::{DMatrix, Vector3};
    use rand::SeedableRng;
    let ch = chassis::make_regular_polygon(n).unwrap();
    let cfg = SolverConfig::default();
    // find the stalled sample with the largest final gmax
    let mut worst: Option<(f64, Vec<Vector3<f64>>)> = None;
    for index in 0..samples {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        rng.set_stream(index as u64 + 1);
        let dirs: Vec<_> = (0..n).map(|_| uniform_sphere_sample(&mut rng)).collect();
        let initial = DirectionSet::new(dirs).unwrap();
        let res = local_minimize(&ch, &initial, &cfg).unwrap();
        let gmax = tangent_gradient_max_norm(&ch, &res.directions, &cfg).unwrap();
        if worst.as_ref().map(|w| gmax > w.0).unwrap_or(true) {
            worst = Some((gmax, res.directions.as_slice().to_vec()));
        }
    }
    let (gmax, x) = worst.unwrap();
    println!("worst stalled gmax {gmax:.3e}");
    let l_c = ch.circumradius();
    let basis = |d: &Vector3<f64>| {
        let pick = if d.z.abs() < 0.9 {
            Vector3::z()
        } else {
            Vector3::x()
        };
        let a = pick.cross(d).normalize();
        let b = d.cross(&a);
        (a, b)
    };
    let bases: Vec<_> = x.iter().map(basis).collect();
    let dim = 2 * n;
    let chart_grad = |pt: &[Vector3<f64>]| -> Vec<f64> {
        let g = isorotor::wrench::raw_cost_gradient(&ch, pt, l_c, cfg.epsilon, cfg.objective)
            .unwrap();
        let mut gc = vec![0.0; dim];
        for i in 0..n {
            let gt = g[i] - x[i] * g[i].dot(&x[i]);
            gc[2 * i] = gt.dot(&bases[i].0);
            gc[2 * i + 1] = gt.dot(&bases[i].1);
        }
        gc
    };
    let retract = |p: &[f64]| -> Vec<Vector3<f64>> {
        x.iter()
            .zip(&bases)
            .enumerate()
            .map(|(i, (d, (a, b)))| (d + p[2 * i] * a + p[2 * i + 1] * b).normalize())
            .collect()
    };
    let h_fd = 2.5e-4;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    let mut e = vec![0.0; dim];
    for j in 0..dim {
        e[j] = h_fd;
        let gp = chart_grad(&retract(&e));
        e[j] = -h_fd;
        let gm = chart_grad(&retract(&e));
        e[j] = 0.0;
        for i in 0..dim {
            h[(i, j)] = (gp[i] - gm[i]) / (2.0 * h_fd);
        }
    }
    h = (h.clone() + h.transpose()) * 0.5;
    let eig = h.symmetric_eigen();
    let mut lams: Vec<(f64, usize)> = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .map(|(i, l)| (l, i))
        .collect();
    lams.sort_by(|a, b| a.0.total_cmp(&b.0));
    println!(
        "eigenvalues: {}",
        lams.iter()
            .map(|(l, _)| format!("{l:.2e}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    let g0 = chart_grad(&x);
    let f0 = isorotor::wrench::raw_cost(&ch, &x, l_c, cfg.epsilon, cfg.objective).unwrap();
    // gradient component along each of the five softest directions
    for rank in 0..5.min(dim) {
        let (lam, col) = lams[rank];
        let v: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
        let gproj: f64 = g0.iter().zip(&v).map(|(a, b)| a * b).sum();
        println!("dir {rank}: lam {lam:.3e}  g-component {gproj:.3e}");
        for s in [1e-3, 1e-2, 3e-2, 1e-1] {
            for sign in [1.0f64, -1.0] {
                let p: Vec<f64> = v.iter().map(|&c| sign * s * c).collect();
                let pt = retract(&p);
                let fc =
                    isorotor::wrench::raw_cost(&ch, &pt, l_c, cfg.epsilon, cfg.objective)
                        .unwrap();
                let gc = chart_grad(&pt);
                let gn = gc.iter().map(|a| a * a).sum::<f64>().sqrt();
                print!("   s={:+.0e}: dJ {:+.2e} |g| {:.2e}", sign * s, fc - f0, gn);
            }
            println!();
        }
    }
}

fn probe_spectrum(n: usize, samples: usize, prune: f64, eps_deg: f64) {
    use isorotor::manifold::wrap_phase;
    use isorotor::symmetry::phase_distance;
    use isorotor::topology::{dbscan, unwrap_projective, ClusterParams, PhaseMatrix};
    use nalgebra::DMatrix;
    let ch = chassis::builtin(&format!("CRPol{n}")).unwrap();
    let set = global_exhaust(&ch, samples, prune, 42, &SolverConfig::default()).unwrap();
    println!("{} solutions kept", set.solutions.len());
    let (phases, _) = PhaseMatrix::from_solution_set(&ch, &set).unwrap();
    let m = phases.rows();
    let offsets = phases.offsets();
    let params = ClusterParams {
        eps_deg,
        ..ClusterParams::default()
    };
    let (clusters, noise) = dbscan(&offsets, &params);
    println!(
        "provisional clusters: {:?}, noise {}",
        clusters.iter().map(Vec::len).collect::<Vec<_>>(),
        noise.len()
    );
    let centroids: Vec<Vec<f64>> = clusters
        .iter()
        .map(|members| {
            (0..n)
                .map(|i| {
                    isorotor::topology::branches::circular_mean_pi(
                        members.iter().map(|&r| offsets[r][i]),
                    )
                })
                .collect()
        })
        .collect();
    let cheb = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| phase_distance(x, y))
            .fold(0.0, f64::max)
    };
    let mut deflated = Vec::with_capacity(m);
    let mut core = Vec::new();
    let mut is_core = vec![false; m];
    for members in &clusters {
        for &r in members {
            is_core[r] = true;
        }
    }
    for r in 0..m {
        let nearest = centroids
            .iter()
            .min_by(|a, b| cheb(&offsets[r], a).total_cmp(&cheb(&offsets[r], b)))
            .unwrap();
        let row: Vec<f64> = phases
            .row(r)
            .iter()
            .zip(nearest)
            .map(|(&t, &d)| wrap_phase(t - d))
            .collect();
        if is_core[r] {
            core.push(r);
        }
        deflated.push(row);
    }
    let unwrapped = unwrap_projective(&PhaseMatrix::new(deflated).unwrap());
    let mut mean = vec![0.0; n];
    for &r in &core {
        for (mu, &v) in mean.iter_mut().zip(unwrapped.row(r)) {
            *mu += v;
        }
    }
    for mu in &mut mean {
        *mu /= core.len() as f64;
    }
    let mut cov = DMatrix::<f64>::zeros(n, n);
    for &r in &core {
        for i in 0..n {
            for j in 0..n {
                cov[(i, j)] += (unwrapped.get(r, i) - mean[i]) * (unwrapped.get(r, j) - mean[j]);
            }
        }
    }
    cov /= (core.len().max(2) - 1) as f64;
    let eig = cov.symmetric_eigen();
    let mut lams: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    lams.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = lams.iter().sum();
    println!(
        "eigenvalues: {}",
        lams.iter()
            .map(|l| format!("{l:.3e}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    println!(
        "fraction {:.6}, residual rms/coord {:.3}deg",
        lams[0] / total,
        ((total - lams[0]) / n as f64).sqrt().to_degrees()
    );
    // second PC loading: is the residual structured?
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let w2: Vec<f64> = eig.eigenvectors.column(idx[1]).iter().copied().collect();
    println!(
        "second PC loadings: {}",
        w2.iter()
            .map(|v| format!("{v:+.2}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    // residual RMS per coordinate after removing the leading PC
    let w1: Vec<f64> = eig.eigenvectors.column(idx[0]).iter().copied().collect();
    let mut per_coord = vec![0.0; n];
    for &r in &core {
        let score: f64 = (0..n)
            .map(|i| (unwrapped.get(r, i) - mean[i]) * w1[i])
            .sum();
        for (i, pc) in per_coord.iter_mut().enumerate() {
            let resid = unwrapped.get(r, i) - mean[i] - score * w1[i];
            *pc += resid * resid;
        }
    }
    println!(
        "residual rms by coord (deg): {}",
        per_coord
            .iter()
            .map(|&s| format!("{:.2}", (s / core.len() as f64).sqrt().to_degrees()))
            .collect::<Vec<_>>()
            .join(" ")
    );
}

// Tangency landscape across the library: how far off-torus do endpoint sets
// sit for each regime, to place the II/III-vs-IV boundary with real margin.
fn probe_tangency(samples: usize) {
    use isorotor::manifold::tangency_residual;
    for id in [
        "CTriPr6", "CQRPol7", "CPentBi7", "CTriCup9", "CQRPol8", "CSqAnti8", "CQRPol10",
        "CRPol8", "COct6", "CQCub8", "CCub8",
    ] {
        let ch = match chassis::builtin(id) {
            Ok(c) => c,
            Err(e) => {
                println!("{id}: unavailable ({e})");
                continue;
            }
        };
        let set = global_exhaust(&ch, samples, 1e-2, 42, &SolverConfig::default()).unwrap();
        let mut tmax = 0.0f64;
        let mut tmin = f64::INFINITY;
        for sol in &set.solutions {
            let t = tangency_residual(&ch, &sol.directions).unwrap();
            tmax = tmax.max(t);
            tmin = tmin.min(t);
        }
        println!(
            "{id}: kept {} of {samples}, tangency min {tmin:.3e} max {tmax:.3e}",
            set.solutions.len()
        );
    }
}

// Decompose provisional clusters against the predicted star rows: which rows
// does each cluster touch, how far do members sit from their nearest row, and
// how much cost excess do the far members carry.
fn probe_mega(n: usize, samples: usize, prune: f64, eps_deg: f64) {
    use isorotor::symmetry::phase_distance;
    use isorotor::topology::{dbscan, star_polygon_predict, ClusterParams, PhaseMatrix};
    let ch = chassis::builtin(&format!("CRPol{n}")).unwrap();
    let set = global_exhaust(&ch, samples, prune, 42, &SolverConfig::default()).unwrap();
    println!("{} solutions kept", set.solutions.len());
    let j_min = set
        .solutions
        .iter()
        .map(|s| s.cost)
        .fold(f64::INFINITY, f64::min);
    let (phases, _) = PhaseMatrix::from_solution_set(&ch, &set).unwrap();
    let offsets = phases.offsets();
    let prediction = star_polygon_predict(n);
    let rows: Vec<Vec<f64>> = prediction
        .branches
        .iter()
        .map(|b| {
            let base = b.offsets[0];
            b.offsets
                .iter()
                .map(|&t| isorotor::manifold::wrap_phase(t - base))
                .collect()
        })
        .collect();
    let params = ClusterParams {
        eps_deg,
        ..ClusterParams::default()
    };
    let (clusters, noise) = dbscan(&offsets, &params);
    println!(
        "clusters {:?} noise {}",
        clusters.iter().map(Vec::len).collect::<Vec<_>>(),
        noise.len()
    );
    let cheb = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| phase_distance(x, y))
            .fold(0.0, f64::max)
    };
    for (ci, members) in clusters.iter().enumerate() {
        let mut row_hits = vec![0usize; rows.len()];
        let mut dmax = 0.0f64;
        let mut dsum = 0.0f64;
        let mut far_excess = 0.0f64;
        for &r in members {
            let (best_q, best_d) = rows
                .iter()
                .enumerate()
                .map(|(qi, row)| (qi, cheb(&offsets[r], row)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            row_hits[best_q] += 1;
            dsum += best_d;
            if best_d > dmax {
                dmax = best_d;
                far_excess = set.solutions[r].cost - j_min;
            }
        }
        // same spread formula as branch extraction: RMS geodesic deviation of
        // member offsets from the cluster's circular-mean centroid
        let centroid: Vec<f64> = (0..n)
            .map(|i| {
                isorotor::topology::branches::circular_mean_pi(
                    members.iter().map(|&r| offsets[r][i]),
                )
            })
            .collect();
        let mut ss = 0.0;
        for &r in members {
            for i in 1..n {
                let d = phase_distance(offsets[r][i], centroid[i]);
                ss += d * d;
            }
        }
        let spread = (ss / (members.len() * (n - 1)) as f64).sqrt().to_degrees();
        println!(
            "cluster {ci}: {} members, row hits {:?}, mean dist {:.2}deg, max dist {:.2}deg (excess {:.2e}), spread {:.2}deg",
            members.len(),
            row_hits,
            (dsum / members.len() as f64).to_degrees(),
            dmax.to_degrees(),
            far_excess,
            spread
        );
    }
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let which = args.first().map(String::as_str).unwrap_or("hex");
    match which {
        "hex" => run_polygon(6, 200, 42),
        "hept" => run_polygon(7, 400, 42),
        "octagon" => run_polygon(8, 400, 42),
        "nonagon" => run_polygon(9, 800, 42),
        "decagon" => run_polygon(10, 800, 42),
        "poly11" => run_polygon(
            11,
            args.get(1).and_then(|s| s.parse().ok()).unwrap_or(800),
            42,
        ),
        "oct" => run_platonic(
            "COct6",
            200,
            42,
            &[vec![0.0, 0.0, 0.0, PI / 2.0, PI / 2.0, PI / 2.0]],
        ),
        "cube" => {
            let f = |xs: [f64; 8]| xs.iter().map(|x| x * PI).collect::<Vec<_>>();
            let reference = vec![
                f([0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.5, 0.5]),
                f([
                    0.0,
                    2.0 / 3.0,
                    2.0 / 3.0,
                    0.0,
                    1.0 / 6.0,
                    0.5,
                    0.5,
                    1.0 / 6.0,
                ]),
                f([
                    0.0,
                    5.0 / 6.0,
                    1.0 / 3.0,
                    0.5,
                    1.0 / 3.0,
                    0.5,
                    0.0,
                    5.0 / 6.0,
                ]),
            ];
            run_platonic("CCub8", 400, 42, &reference);
        }
        "typei" => run_type_i(),
        "sens" => run_sensitivity(),
        "sweeps" => run_sweeps(),
        "ablation" => run_ablation(),
        "octprobe" => run_oct_probe(),
        "conv" => probe_convergence(
            args.get(1).and_then(|s| s.parse().ok()).unwrap_or(8),
            args.get(2).and_then(|s| s.parse().ok()).unwrap_or(60),
        ),
        "probe" => probe_polygon_branches(
            args.get(1).and_then(|s| s.parse().ok()).unwrap_or(8),
        ),
        "dfail" => probe_failures(
            args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10),
            args.get(2).and_then(|s| s.parse().ok()).unwrap_or(200),
        ),
        "vorder" => probe_valley(
            args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10),
            args.get(2).and_then(|s| s.parse().ok()).unwrap_or(60),
        ),
        "spectrum" => probe_spectrum(
            args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10),
            args.get(2).and_then(|s| s.parse().ok()).unwrap_or(800),
            args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1e-6),
            args.get(4).and_then(|s| s.parse().ok()).unwrap_or(5.0),
        ),
        "tang" => probe_tangency(args.get(1).and_then(|s| s.parse().ok()).unwrap_or(200)),
        "mega" => probe_mega(
            args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10),
            args.get(2).and_then(|s| s.parse().ok()).unwrap_or(800),
            args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1e-10),
            args.get(4).and_then(|s| s.parse().ok()).unwrap_or(5.0),
        ),
        other => eprintln!("unknown pilot {other}"),
    }
}
