//! λ-sweeps along a branch and the control sweeps used to show that phase
//! locking, not mere tangency, is what holds the metrics constant.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::chassis::Chassis;
use crate::error::{Error, Result};
use crate::manifold::{direction_from_phase, wrap_phase, PhaseVector};
use crate::optimizer::uniform_sphere_sample;
use crate::wrench::{build_grasp, metrics, DirectionSet, MetricReport, DEFAULT_EPSILON};

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub lambda: f64,
    pub directions: DirectionSet,
    pub report: MetricReport,
}

fn evaluate(chassis: &Chassis, dirs: DirectionSet, lambda: f64) -> Result<SweepPoint> {
    let a = build_grasp(chassis, &dirs, chassis.circumradius())?;
    Ok(SweepPoint {
        lambda,
        directions: dirs,
        report: metrics(&a, DEFAULT_EPSILON),
    })
}

/// Evaluate θ_i(λ) = χ_i λ + δ_i over `steps` points of [0, π).
pub fn branch_sweep(
    chassis: &Chassis,
    offsets: &[f64],
    chirality: &[i8],
    steps: usize,
) -> Result<Vec<SweepPoint>> {
    if steps < 1 {
        return Err(Error::invalid("sweep needs at least one step"));
    }
    if offsets.len() != chassis.n() || chirality.len() != chassis.n() {
        return Err(Error::invalid(format!(
            "offsets/chirality length must equal N={}",
            chassis.n()
        )));
    }
    (0..steps)
        .map(|j| {
            let lambda = PI * j as f64 / steps as f64;
            let theta = PhaseVector::new(
                offsets
                    .iter()
                    .zip(chirality)
                    .map(|(&d, &chi)| wrap_phase(chi as f64 * lambda + d))
                    .collect(),
            )?;
            evaluate(chassis, direction_from_phase(chassis, &theta)?, lambda)
        })
        .collect()
}

/// Control: stay on the tangent torus and sweep coherently, but from seeded
/// random offsets instead of a locked branch.
pub fn decoherent_sweep(chassis: &Chassis, steps: usize, seed: u64) -> Result<Vec<SweepPoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets: Vec<f64> = (0..chassis.n())
        .map(|_| PI * rng.random::<f64>())
        .collect();
    let chirality = vec![1i8; chassis.n()];
    branch_sweep(chassis, &offsets, &chirality, steps)
}

/// Control: seeded uniform direction sets, unconstrained, one per step.
pub fn random_sweep(chassis: &Chassis, steps: usize, seed: u64) -> Result<Vec<SweepPoint>> {
    if steps < 1 {
        return Err(Error::invalid("sweep needs at least one step"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..steps)
        .map(|j| {
            let lambda = PI * j as f64 / steps as f64;
            let dirs = DirectionSet::new(
                (0..chassis.n()).map(|_| uniform_sphere_sample(&mut rng)).collect(),
            )?;
            evaluate(chassis, dirs, lambda)
        })
        .collect()
}

/// Largest relative variation of each singular value and of the cost across a
/// sweep: (max − min) / max(|mid|, floor).
pub fn sweep_variation(points: &[SweepPoint]) -> (f64, f64) {
    let mut sigma_var = 0.0f64;
    for k in 0..6 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in points {
            lo = lo.min(p.report.singular_values[k]);
            hi = hi.max(p.report.singular_values[k]);
        }
        let scale = hi.abs().max(1e-30);
        sigma_var = sigma_var.max((hi - lo) / scale);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in points {
        lo = lo.min(p.report.log_volume);
        hi = hi.max(p.report.log_volume);
    }
    let cost_var = (hi - lo) / hi.abs().max(1.0);
    (sigma_var, cost_var)
}

/// One labeled series per row group: λ, all direction components, the six
/// singular values, the cost and the condition number.
pub fn write_trajectory_csv(
    chassis: &Chassis,
    series: &[(&str, &[SweepPoint])],
    path: &std::path::Path,
) -> Result<()> {
    let mut header = String::from("series,lambda");
    for i in 1..=chassis.n() {
        header.push_str(&format!(",d{i}x,d{i}y,d{i}z"));
    }
    for k in 1..=6 {
        header.push_str(&format!(",sigma_{k}"));
    }
    header.push_str(",j_vol,kappa\n");
    let mut out = header;
    for (label, points) in series {
        for p in *points {
            out.push_str(&format!("{},{}", label, p.lambda));
            for d in p.directions.iter() {
                out.push_str(&format!(",{},{},{}", d.x, d.y, d.z));
            }
            for s in p.report.singular_values {
                out.push_str(&format!(",{s}"));
            }
            out.push_str(&format!(
                ",{},{}\n",
                p.report.log_volume, p.report.condition_number
            ));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chassis::make_regular_polygon;
    use crate::manifold::tangency_residual;

    #[test]
    fn single_step_sweep_sits_at_origin() {
        let hex = make_regular_polygon(6).unwrap();
        let pts = branch_sweep(&hex, &[0.0; 6], &[1; 6], 1).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].lambda, 0.0);
    }

    #[test]
    fn sweeps_stay_on_torus() {
        let hex = make_regular_polygon(6).unwrap();
        for pts in [
            branch_sweep(&hex, &[0.3; 6], &[1; 6], 16).unwrap(),
            decoherent_sweep(&hex, 16, 9).unwrap(),
        ] {
            for p in pts {
                assert!(tangency_residual(&hex, &p.directions).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn random_sweep_generally_off_torus() {
        let hex = make_regular_polygon(6).unwrap();
        let pts = random_sweep(&hex, 8, 3).unwrap();
        let worst = pts
            .iter()
            .map(|p| tangency_residual(&hex, &p.directions).unwrap())
            .fold(0.0f64, f64::max);
        assert!(worst > 0.1);
    }

    #[test]
    fn variation_of_constant_series_is_zero() {
        let hex = make_regular_polygon(6).unwrap();
        let pts = branch_sweep(&hex, &[0.2; 6], &[1; 6], 1).unwrap();
        let repeated: Vec<SweepPoint> = (0..4).map(|_| pts[0].clone()).collect();
        let (sv, cv) = sweep_variation(&repeated);
        assert_eq!(sv, 0.0);
        assert_eq!(cv, 0.0);
    }
}
