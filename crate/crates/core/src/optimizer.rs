//! Constrained minimization over rotor lines: a projected-gradient local
//! solver on (S²)ᴺ and the seeded multistart exhaustion of the global optima.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chassis::Chassis;
use crate::error::{Error, Result};
use crate::manifold::disc_project;
use crate::wrench::{raw_cost, raw_cost_gradient, DirectionSet, Objective};

const ARMIJO_C1: f64 = 1e-4;
const NONMONOTONE_WINDOW: usize = 8;
const BACKTRACK_LIMIT: usize = 60;
const STEP_MIN: f64 = 1e-14;
const STEP_MAX: f64 = 1e3;

const POLISH_STEPS: usize = 80;
const POLISH_BACKTRACKS: usize = 12;
// Wide differencing stencil: the softest valley directions carry curvatures
// near 1e-10, which a narrower stencil cannot separate from gradient noise.
const POLISH_FD_STEP: f64 = 2.5e-4;
const POLISH_ENTRY: f64 = 1e-4;
const POLISH_TARGET: f64 = 1e-11;
const POLISH_TRUST: f64 = 0.2;
const POLISH_ROUNDS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    pub epsilon: f64,
    pub objective: Objective,
    /// Second-order endpoint refinement. Disable to study how the raw
    /// first-order endpoints scatter across a degenerate valley floor.
    pub polish: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        // Degenerate optima sit in valleys whose transverse curvature decays
        // with N; the gradient there grinds down roughly like 1/k. A 1e-6
        // tolerance with a deep iteration budget converges every chassis in
        // the library; tighten it for stiff low-N runs if wanted.
        SolverConfig {
            max_iterations: 40_000,
            gradient_tolerance: 1e-6,
            step_tolerance: 1e-12,
            epsilon: crate::wrench::DEFAULT_EPSILON,
            objective: Objective::LogVolume,
            polish: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::invalid("max_iterations must be >= 1"));
        }
        for (name, v) in [
            ("gradient_tolerance", self.gradient_tolerance),
            ("step_tolerance", self.step_tolerance),
            ("epsilon", self.epsilon),
        ] {
            if !(v > 0.0) {
                return Err(Error::invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LocalResult {
    pub directions: DirectionSet,
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Solution {
    pub directions: DirectionSet,
    pub cost: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionSet {
    pub chassis_id: String,
    pub chassis_hash: String,
    pub j_min: f64,
    pub prune_tolerance: f64,
    pub rng_seed: u64,
    pub samples_requested: usize,
    pub converged_count: usize,
    pub config: SolverConfig,
    pub solutions: Vec<Solution>,
}

pub fn uniform_sphere_sample<R: Rng>(rng: &mut R) -> Vector3<f64> {
    let p: [f64; 3] = rng.sample(rand_distr::UnitSphere);
    Vector3::new(p[0], p[1], p[2])
}

/// Tangential gradient components (ambient gradient minus its radial part) and
/// the squared total norm.
fn tangent_gradient(
    chassis: &Chassis,
    x: &[Vector3<f64>],
    l_c: f64,
    config: &SolverConfig,
) -> Result<(Vec<Vector3<f64>>, f64)> {
    let mut g = raw_cost_gradient(chassis, x, l_c, config.epsilon, config.objective)?;
    let mut total = 0.0;
    for (gi, d) in g.iter_mut().zip(x) {
        *gi -= d * gi.dot(d);
        total += gi.norm_squared();
    }
    Ok((g, total))
}

/// Largest per-rotor tangential gradient norm; the solver's convergence measure.
pub fn tangent_gradient_max_norm(
    chassis: &Chassis,
    dirs: &DirectionSet,
    config: &SolverConfig,
) -> Result<f64> {
    let (g, _) = tangent_gradient(chassis, dirs.as_slice(), chassis.circumradius(), config)?;
    Ok(g.iter().map(|v| v.norm()).fold(0.0, f64::max))
}

/// Orthonormal basis of the tangent plane at a unit vector.
fn tangent_basis(d: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let pick = if d.z.abs() < 0.9 {
        Vector3::z()
    } else {
        Vector3::x()
    };
    let a = pick.cross(d).normalize();
    let b = d.cross(&a);
    (a, b)
}

fn retract(
    x: &[Vector3<f64>],
    bases: &[(Vector3<f64>, Vector3<f64>)],
    p: &[f64],
) -> Vec<Vector3<f64>> {
    x.iter()
        .zip(bases)
        .enumerate()
        .map(|(i, (d, (a, b)))| (d + p[2 * i] * a + p[2 * i + 1] * b).normalize())
        .collect()
}

/// Tangential gradient (projected at the evaluation point) expressed in the
/// fixed chart bases, plus the largest per-rotor norm. Differencing this over
/// a retraction yields the Riemannian Hessian directly: projecting at the
/// moving point folds the sphere constraint's multiplier term in.
fn chart_gradient(
    chassis: &Chassis,
    x: &[Vector3<f64>],
    l_c: f64,
    config: &SolverConfig,
    bases: &[(Vector3<f64>, Vector3<f64>)],
) -> Result<(Vec<f64>, f64)> {
    let (g, _) = tangent_gradient(chassis, x, l_c, config)?;
    let gmax = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut gc = vec![0.0; 2 * x.len()];
    for (i, (gi, (a, b))) in g.iter().zip(bases).enumerate() {
        gc[2 * i] = gi.dot(a);
        gc[2 * i + 1] = gi.dot(b);
    }
    Ok((gc, gmax))
}

/// Second-order cleanup after first-order descent. The degenerate optimum
/// sets sit in valleys that are quartic transverse to the set, where a
/// gradient method's residual decays like 1/k; a clamped Newton step on the
/// tangent chart contracts it by a constant factor per iteration instead.
/// Eigendirections at or below the curvature floor (the optimum set itself)
/// get no step, so endpoints keep their position along the set. Steps are
/// accepted only when the gradient measure strictly decreases.
fn polish(
    chassis: &Chassis,
    x: &mut Vec<Vector3<f64>>,
    f: &mut f64,
    config: &SolverConfig,
) -> Result<()> {
    let l_c = chassis.circumradius();
    let dim = 2 * x.len();
    let f_cap = *f + 1e-9;
    let target = POLISH_TARGET.min(config.gradient_tolerance * 0.5);
    for _ in 0..POLISH_STEPS {
        let bases: Vec<_> = x.iter().map(tangent_basis).collect();
        let (gc, gmax) = chart_gradient(chassis, x, l_c, config, &bases)?;
        if gmax <= target {
            break;
        }
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        let mut e = vec![0.0; dim];
        for j in 0..dim {
            e[j] = POLISH_FD_STEP;
            let xp = retract(x, &bases, &e);
            e[j] = -POLISH_FD_STEP;
            let xm = retract(x, &bases, &e);
            e[j] = 0.0;
            let (gp, _) = chart_gradient(chassis, &xp, l_c, config, &bases)?;
            let (gm, _) = chart_gradient(chassis, &xm, l_c, config, &bases)?;
            for i in 0..dim {
                h[(i, j)] = (gp[i] - gm[i]) / (2.0 * POLISH_FD_STEP);
            }
        }
        h = (h.clone() + h.transpose()) * 0.5;
        let eig = h.symmetric_eigen();
        let lam_max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        if !(lam_max > 0.0) {
            break;
        }
        let floor = (lam_max * 1e-11).max(2e-10);
        let gv = DVector::from_column_slice(&gc);
        let mut p = DVector::<f64>::zeros(dim);
        for k in 0..dim {
            let lam = eig.eigenvalues[k];
            if lam > floor {
                let v = eig.eigenvectors.column(k);
                p.axpy(-v.dot(&gv) / lam, &v, 1.0);
            }
        }
        let pn = p.norm();
        if !(pn > 0.0) {
            break;
        }
        if pn > POLISH_TRUST {
            p *= POLISH_TRUST / pn;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..POLISH_BACKTRACKS {
            let scaled: Vec<f64> = p.iter().map(|&v| t * v).collect();
            let xn = retract(x, &bases, &scaled);
            let fnew = raw_cost(chassis, &xn, l_c, config.epsilon, config.objective)?;
            let (gn, _) = tangent_gradient(chassis, &xn, l_c, config)?;
            let gmax_new = gn.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if fnew.is_finite() && gmax_new < gmax && fnew <= f_cap {
                *x = xn;
                *f = fnew;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(())
}

enum BbExit {
    GradTol,
    Stall,
    StepTol,
    Budget,
}

/// One Barzilai-Borwein descent phase down to `tol`, mutating the iterate and
/// its cost in place. Each iterate is renormalized onto (S²)ᴺ. The accepted
/// cost can never exceed the running maximum of the reference window, so the
/// final cost is at most the entry cost.
fn bb_descend(
    chassis: &Chassis,
    x: &mut Vec<Vector3<f64>>,
    f: &mut f64,
    tol: f64,
    budget: usize,
    config: &SolverConfig,
) -> Result<(usize, BbExit)> {
    let l_c = chassis.circumradius();
    let (mut g, mut gsq) = tangent_gradient(chassis, x, l_c, config)?;
    let mut window: VecDeque<f64> = VecDeque::from([*f]);
    let mut prev: Option<(Vec<Vector3<f64>>, Vec<Vector3<f64>>)> = None;
    let mut step = (1.0 / (1.0 + gsq.sqrt())).min(1.0);
    let mut iterations = 0;
    let mut exit = BbExit::Budget;

    for it in 0..budget {
        iterations = it + 1;
        let gmax = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if gmax <= tol {
            exit = BbExit::GradTol;
            break;
        }
        if let Some((xp, gp)) = &prev {
            let (mut ss, mut sy) = (0.0, 0.0);
            for i in 0..x.len() {
                let s = x[i] - xp[i];
                let y = g[i] - gp[i];
                ss += s.norm_squared();
                sy += s.dot(&y);
            }
            step = if sy > 1e-300 {
                (ss / sy).clamp(STEP_MIN, STEP_MAX)
            } else {
                STEP_MAX
            };
        }
        let f_ref = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut t = step;
        let mut accepted = None;
        for _ in 0..BACKTRACK_LIMIT {
            let xn: Vec<Vector3<f64>> = x
                .iter()
                .zip(&g)
                .map(|(d, gi)| (d - t * gi).normalize())
                .collect();
            let fnew = raw_cost(chassis, &xn, l_c, config.epsilon, config.objective)?;
            if fnew.is_finite() && fnew <= f_ref - ARMIJO_C1 * t * gsq {
                accepted = Some((xn, fnew));
                break;
            }
            t *= 0.5;
            if t < 1e-17 {
                break;
            }
        }
        let Some((xn, fnew)) = accepted else {
            exit = BbExit::Stall;
            break;
        };
        let step_inf = x
            .iter()
            .zip(&xn)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let old_x = std::mem::replace(x, xn);
        let old_g = std::mem::take(&mut g);
        *f = fnew;
        let (gn, gn_sq) = tangent_gradient(chassis, x, l_c, config)?;
        prev = Some((old_x, old_g));
        g = gn;
        gsq = gn_sq;
        window.push_back(*f);
        if window.len() > NONMONOTONE_WINDOW {
            window.pop_front();
        }
        if step_inf <= config.step_tolerance {
            exit = BbExit::StepTol;
            break;
        }
    }
    Ok((iterations, exit))
}

/// Projected gradient descent with Barzilai-Borwein steps and a non-monotone
/// backtracking line search. The smooth objective alternates descent with a
/// Newton polish so endpoints land tightly on the optimum set. Convergence
/// means every rotor's tangential gradient norm is at or below
/// gradient_tolerance; the final cost is at most the initial cost.
pub fn local_minimize(
    chassis: &Chassis,
    initial: &DirectionSet,
    config: &SolverConfig,
) -> Result<LocalResult> {
    config.validate()?;
    if chassis.n() != initial.n() {
        return Err(Error::invalid(format!(
            "chassis has {} vertices but initial set has {}",
            chassis.n(),
            initial.n()
        )));
    }
    let l_c = chassis.circumradius();
    let mut x: Vec<Vector3<f64>> = initial.iter().map(|d| d.normalize()).collect();
    let mut f = raw_cost(chassis, &x, l_c, config.epsilon, config.objective)?;
    let converged;
    let mut iterations;

    if config.objective == Objective::LogVolume
        && config.polish
        && config.gradient_tolerance <= POLISH_ENTRY
    {
        // First-order phase target: the Newton polish closes the remaining
        // gap far faster than BB's tail, whose gradient decays like 1/k
        // inside the degenerate flat valleys. Coarser tolerance requests skip
        // the polish entirely and take the plain descent branch below.
        let phase_tol = config.gradient_tolerance.max(POLISH_ENTRY);
        let (used, _) =
            bb_descend(chassis, &mut x, &mut f, phase_tol, config.max_iterations, config)?;
        iterations = used;
        polish(chassis, &mut x, &mut f, config)?;
        let (g1, _) = tangent_gradient(chassis, &x, l_c, config)?;
        let mut gmax = g1.iter().map(|v| v.norm()).fold(0.0, f64::max);
        // When polish stalls short of the contract, let first-order descent
        // grind further, then contract the endpoint again.
        for _ in 1..POLISH_ROUNDS {
            let remaining = config.max_iterations.saturating_sub(iterations);
            if gmax <= config.gradient_tolerance || remaining == 0 {
                break;
            }
            let (used2, _) = bb_descend(
                chassis,
                &mut x,
                &mut f,
                config.gradient_tolerance,
                remaining,
                config,
            )?;
            iterations += used2;
            polish(chassis, &mut x, &mut f, config)?;
            let (g2, _) = tangent_gradient(chassis, &x, l_c, config)?;
            gmax = g2.iter().map(|v| v.norm()).fold(0.0, f64::max);
        }
        converged = gmax <= config.gradient_tolerance;
    } else {
        let (used, exit) = bb_descend(
            chassis,
            &mut x,
            &mut f,
            config.gradient_tolerance,
            config.max_iterations,
            config,
        )?;
        iterations = used;
        converged = match exit {
            BbExit::GradTol => true,
            // A line-search stall is the expected terminal state of
            // subgradient descent on the non-smooth condition number;
            // counting it as converged keeps survivors for comparison runs.
            BbExit::Stall | BbExit::StepTol if config.objective != Objective::LogVolume => true,
            _ => {
                let (g, _) = tangent_gradient(chassis, &x, l_c, config)?;
                g.iter().map(|v| v.norm()).fold(0.0, f64::max) <= config.gradient_tolerance
            }
        };
    }
    Ok(LocalResult {
        directions: DirectionSet::new(x)?.canonicalized(),
        cost: f,
        converged,
        iterations,
    })
}

/// Multistart exhaustion: `samples` independent uniform starts, each refined
/// locally, non-converged runs discarded, survivors pruned to within
/// prune_tolerance of the best cost. Sample i draws from stream i+1 of the
/// seeded generator, so the result set is identical however the samples are
/// scheduled across threads.
pub fn global_exhaust(
    chassis: &Chassis,
    samples: usize,
    prune_tolerance: f64,
    seed: u64,
    config: &SolverConfig,
) -> Result<SolutionSet> {
    config.validate()?;
    if samples < 1 {
        return Err(Error::invalid("samples must be >= 1"));
    }
    if !(prune_tolerance >= 0.0) {
        return Err(Error::invalid(format!(
            "prune tolerance must be >= 0, got {prune_tolerance}"
        )));
    }
    let runs: Vec<Option<(DirectionSet, f64)>> = (0..samples)
        .into_par_iter()
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64 + 1);
            let dirs: Vec<Vector3<f64>> = (0..chassis.n())
                .map(|_| uniform_sphere_sample(&mut rng))
                .collect();
            let initial = DirectionSet::new(dirs).ok()?;
            let res = local_minimize(chassis, &initial, config).ok()?;
            (res.converged && res.cost.is_finite()).then_some((res.directions, res.cost))
        })
        .collect();
    let converged: Vec<(DirectionSet, f64)> = runs.into_iter().flatten().collect();
    if converged.is_empty() {
        return Err(Error::EmptyResult(format!(
            "none of the {samples} samples converged on {}",
            chassis.id()
        )));
    }
    let converged_count = converged.len();
    let j_min = converged
        .iter()
        .map(|(_, c)| *c)
        .fold(f64::INFINITY, f64::min);
    let mut solutions: Vec<Solution> = converged
        .into_iter()
        .filter(|(_, cost)| *cost <= j_min + prune_tolerance)
        .map(|(directions, cost)| Solution { directions, cost })
        .collect();
    solutions.sort_by(|a, b| {
        a.cost.total_cmp(&b.cost).then_with(|| {
            let fa = a.directions.iter().flat_map(|d| [d.x, d.y, d.z]);
            let fb = b.directions.iter().flat_map(|d| [d.x, d.y, d.z]);
            for (x, y) in fa.zip(fb) {
                match x.total_cmp(&y) {
                    std::cmp::Ordering::Equal => continue,
                    other => return other,
                }
            }
            std::cmp::Ordering::Equal
        })
    });
    Ok(SolutionSet {
        chassis_id: chassis.id().to_string(),
        chassis_hash: chassis.content_hash(),
        j_min,
        prune_tolerance,
        rng_seed: seed,
        samples_requested: samples,
        converged_count,
        config: config.clone(),
        solutions,
    })
}

impl SolutionSet {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()? + "\n")?;
        Ok(())
    }

    pub fn read_json(path: &std::path::Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Raw direction components per solution and rotor (rotor is 1-based).
    pub fn write_directions_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut out = String::from("solution_index,rotor,dx,dy,dz,cost\n");
        for (s, sol) in self.solutions.iter().enumerate() {
            for (r, d) in sol.directions.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    s,
                    r + 1,
                    d.x,
                    d.y,
                    d.z,
                    sol.cost
                ));
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Equatorial-disc projections per solution and rotor (rotor is 1-based).
    pub fn write_disc_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut out = String::from("solution_index,rotor,x,y\n");
        for (s, sol) in self.solutions.iter().enumerate() {
            for (r, d) in sol.directions.iter().enumerate() {
                let (x, y) = disc_project(&d);
                out.push_str(&format!("{},{},{},{}\n", s, r + 1, x, y));
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}
