//! Per-rotor reconstruction of the disc-projected solution cloud as a centered
//! (semi-)ellipse with unit semi-major axis.

use serde::Serialize;
use std::f64::consts::PI;

use crate::chassis::Chassis;
use crate::error::{Error, Result};
use crate::manifold::disc_project;
use crate::optimizer::SolutionSet;
use crate::symmetry::phase_distance;

/// Fewest points accepted for a two-parameter fit.
pub const MIN_FIT_POINTS: usize = 8;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RotorEllipseFit {
    /// Azimuth of the fitted semi-major axis (the flip step fixes which of the
    /// two antipodal representatives carries the data's sector).
    pub psi: f64,
    /// Elevation angle arccos(semi-minor); 0 for a rim circle, π/2 for a
    /// degenerate diameter.
    pub eta: f64,
    pub semi_minor: f64,
    pub rms_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EllipseFitReport {
    pub rotors: Vec<RotorEllipseFit>,
}

/// Distance from a point to the ellipse x²/1 + y²/b² = 1 (axis-aligned frame).
fn ellipse_point_distance(px: f64, py: f64, b: f64) -> f64 {
    let (px, py) = (px.abs(), py.abs());
    if b < 1e-12 {
        // Degenerate segment [−1, 1] × {0}.
        let dx = (px - 1.0).max(0.0);
        return (dx * dx + py * py).sqrt();
    }
    // Newton on the stationarity of the squared distance along the curve
    // (cos t, b sin t); closest point has t in [0, π/2] for px, py ≥ 0.
    let mut t = py.atan2(b * px);
    for _ in 0..30 {
        let (s, c) = t.sin_cos();
        let f = s * c * (b * b - 1.0) + px * s - b * py * c;
        let fp = (c * c - s * s) * (b * b - 1.0) + px * c + b * py * s;
        if fp.abs() < 1e-300 {
            break;
        }
        let step = f / fp;
        t = (t - step).clamp(0.0, PI / 2.0);
        if step.abs() < 1e-15 {
            break;
        }
    }
    let candidates = [t, 0.0, PI / 2.0];
    candidates
        .iter()
        .map(|&tc| {
            let (s, c) = tc.sin_cos();
            ((c - px).powi(2) + (b * s - py).powi(2)).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

fn sum_squared_distance(points: &[(f64, f64)], psi: f64, b: f64) -> f64 {
    let b_abs = b.abs();
    let penalty = if b_abs > 1.0 {
        100.0 * (b_abs - 1.0).powi(2) * points.len() as f64
    } else {
        0.0
    };
    let (s, c) = psi.sin_cos();
    points
        .iter()
        .map(|&(x, y)| {
            // Rotate into the ellipse frame: major axis along +x.
            let px = c * x + s * y;
            let py = -s * x + c * y;
            ellipse_point_distance(px, py, b_abs.min(1.0)).powi(2)
        })
        .sum::<f64>()
        + penalty
}

/// Two-parameter Nelder-Mead; the objective is cheap and the simplex is
/// deterministic, so no gradient plumbing is warranted here.
fn nelder_mead<F: Fn(f64, f64) -> f64>(f: F, start: (f64, f64)) -> (f64, f64, f64) {
    let mut simplex = [
        (start.0, start.1),
        (start.0 + 0.2, start.1),
        (start.0, start.1 + 0.25),
    ];
    let mut values = simplex.map(|(a, b)| f(a, b));
    for _ in 0..300 {
        let mut order = [0, 1, 2];
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        let [best, mid, worst] = order;
        if (values[worst] - values[best]).abs() < 1e-16
            && (simplex[worst].0 - simplex[best].0).abs() < 1e-12
            && (simplex[worst].1 - simplex[best].1).abs() < 1e-12
        {
            break;
        }
        let centroid = (
            (simplex[best].0 + simplex[mid].0) / 2.0,
            (simplex[best].1 + simplex[mid].1) / 2.0,
        );
        let reflect = (
            centroid.0 + (centroid.0 - simplex[worst].0),
            centroid.1 + (centroid.1 - simplex[worst].1),
        );
        let fr = f(reflect.0, reflect.1);
        if fr < values[best] {
            let expand = (
                centroid.0 + 2.0 * (centroid.0 - simplex[worst].0),
                centroid.1 + 2.0 * (centroid.1 - simplex[worst].1),
            );
            let fe = f(expand.0, expand.1);
            if fe < fr {
                simplex[worst] = expand;
                values[worst] = fe;
            } else {
                simplex[worst] = reflect;
                values[worst] = fr;
            }
        } else if fr < values[mid] {
            simplex[worst] = reflect;
            values[worst] = fr;
        } else {
            let contract = (
                centroid.0 + 0.5 * (simplex[worst].0 - centroid.0),
                centroid.1 + 0.5 * (simplex[worst].1 - centroid.1),
            );
            let fc = f(contract.0, contract.1);
            if fc < values[worst] {
                simplex[worst] = contract;
                values[worst] = fc;
            } else {
                for i in [mid, worst] {
                    simplex[i] = (
                        simplex[best].0 + 0.5 * (simplex[i].0 - simplex[best].0),
                        simplex[best].1 + 0.5 * (simplex[i].1 - simplex[best].1),
                    );
                    values[i] = f(simplex[i].0, simplex[i].1);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..3 {
        if values[i] < values[best] {
            best = i;
        }
    }
    (simplex[best].0, simplex[best].1, values[best])
}

/// Fit one rotor's disc points. Initialization takes the major-axis direction
/// from the leading second-moment eigenvector about the origin (the curve is
/// centered by construction) and a mid-range semi-minor guess of one half.
pub fn fit_rotor_points(points: &[(f64, f64)]) -> Result<RotorEllipseFit> {
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "ellipse fit needs at least {MIN_FIT_POINTS} points, got {}",
            points.len()
        )));
    }
    let m = points.len() as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    let psi_init = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let objective = |psi: f64, b: f64| sum_squared_distance(points, psi, b);
    let (mut psi, b, cost) = [psi_init, psi_init + PI / 2.0]
        .into_iter()
        .map(|p0| nelder_mead(objective, (p0, 0.5)))
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .expect("two starts");
    let semi_minor = b.abs().clamp(0.0, 1.0);
    // Pick the antipodal representative whose positive sector holds the data.
    let (cx, cy) = points
        .iter()
        .fold((0.0, 0.0), |(cx, cy), &(x, y)| (cx + x, cy + y));
    if (cx / m) * psi.sin() - (cy / m) * psi.cos() <= 0.0 {
        psi += PI;
    }
    psi = psi.rem_euclid(2.0 * PI);
    Ok(RotorEllipseFit {
        psi,
        eta: semi_minor.acos(),
        semi_minor,
        rms_residual: (cost.max(0.0) / m).sqrt(),
    })
}

pub fn fit_semi_ellipses(solutions: &SolutionSet, chassis: &Chassis) -> Result<EllipseFitReport> {
    if solutions.solutions.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "semi-ellipse fitting needs at least {MIN_FIT_POINTS} solutions, got {}",
            solutions.solutions.len()
        )));
    }
    let n = chassis.n();
    if solutions.solutions.iter().any(|s| s.directions.n() != n) {
        return Err(Error::invalid(
            "solution set and chassis disagree on rotor count",
        ));
    }
    let rotors = (0..n)
        .map(|i| {
            let points: Vec<(f64, f64)> = solutions
                .solutions
                .iter()
                .map(|s| disc_project(&s.directions.get(i)))
                .collect();
            fit_rotor_points(&points)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EllipseFitReport { rotors })
}

/// Mean absolute orthogonal distance of every disc projection to its rotor's
/// fitted ellipse. The scatter statistic the objective ablation is judged by.
pub fn mean_orthogonal_distance(
    solutions: &SolutionSet,
    chassis: &Chassis,
    report: &EllipseFitReport,
) -> Result<f64> {
    let n = chassis.n();
    if report.rotors.len() != n {
        return Err(Error::invalid(
            "fit report and chassis disagree on rotor count",
        ));
    }
    if solutions.solutions.is_empty() {
        return Err(Error::InsufficientData("no solutions to measure".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for sol in &solutions.solutions {
        for (i, fit) in report.rotors.iter().enumerate() {
            let (x, y) = disc_project(&sol.directions.get(i));
            let (c, s) = (fit.psi.cos(), fit.psi.sin());
            let local = (c * x + s * y, -s * x + c * y);
            total += ellipse_point_distance(local.0, local.1, fit.semi_minor);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Check the fitted parameters against the ellipse that the vertex's own
/// tangent plane projects to: semi-minor |n_z| and major axis perpendicular to
/// the vertex azimuth. Poles project to the rim circle, where the axis is
/// meaningless and only the elevation is compared.
pub fn verify_tangent_collapse(
    report: &EllipseFitReport,
    chassis: &Chassis,
    tol_deg: f64,
) -> Result<Vec<bool>> {
    if report.rotors.len() != chassis.n() {
        return Err(Error::invalid(
            "fit report and chassis disagree on rotor count",
        ));
    }
    let tol = tol_deg.to_radians();
    Ok(report
        .rotors
        .iter()
        .zip(chassis.vertices())
        .map(|(fit, p)| {
            let n = p / p.norm();
            let eta_expected = n.z.abs().clamp(0.0, 1.0).acos();
            if (fit.eta - eta_expected).abs() > tol {
                return false;
            }
            let horizontal = (n.x * n.x + n.y * n.y).sqrt();
            if horizontal < 1e-9 {
                return true;
            }
            let psi_expected = n.y.atan2(n.x) + PI / 2.0;
            phase_distance(fit.psi, psi_expected) <= tol
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chassis::builtin;
    use crate::manifold::{canonicalize, direction_at, tangent_basis};
    use nalgebra::Vector3;

    fn tangent_circle_points(p: Vector3<f64>, count: usize) -> Vec<(f64, f64)> {
        let basis = tangent_basis(&p).unwrap();
        (0..count)
            .map(|k| {
                let theta = PI * (k as f64 + 0.31) / count as f64;
                let d = canonicalize(direction_at(&basis, theta)).unwrap();
                disc_project(&d)
            })
            .collect()
    }

    #[test]
    fn oblique_vertex_recovers_plane_tilt() {
        let p = Vector3::new(1.0, 1.0, 1.0) / 3.0f64.sqrt();
        let fit = fit_rotor_points(&tangent_circle_points(p, 40)).unwrap();
        let b_expected = 1.0 / 3.0f64.sqrt();
        assert!(
            (fit.semi_minor - b_expected).abs() < 1e-6,
            "b = {}",
            fit.semi_minor
        );
        assert!((fit.eta.to_degrees() - 54.7356).abs() < 1e-3);
        assert!(fit.rms_residual < 1e-6);
    }

    #[test]
    fn equatorial_vertex_degenerates_to_segment() {
        let fit =
            fit_rotor_points(&tangent_circle_points(Vector3::new(1.0, 0.0, 0.0), 40)).unwrap();
        assert!(fit.semi_minor < 1e-6);
        assert!((fit.eta.to_degrees() - 90.0).abs() < 1e-3);
    }

    #[test]
    fn polar_vertex_gives_rim_circle() {
        let fit =
            fit_rotor_points(&tangent_circle_points(Vector3::new(0.0, 0.0, 1.0), 40)).unwrap();
        assert!(fit.semi_minor > 1.0 - 1e-6);
        assert!(fit.eta.to_degrees() < 1e-2);
    }

    #[test]
    fn too_few_points_rejected() {
        let pts = tangent_circle_points(Vector3::new(0.0, 0.0, 1.0), 7);
        assert!(matches!(
            fit_rotor_points(&pts),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn exact_synthetic_data_verifies_on_octahedron() {
        let oct = builtin("COct6").unwrap();
        let rotors = oct
            .vertices()
            .iter()
            .map(|p| fit_rotor_points(&tangent_circle_points(*p, 32)).unwrap())
            .collect();
        let report = EllipseFitReport { rotors };
        let flags = verify_tangent_collapse(&report, &oct, 0.01).unwrap();
        assert!(flags.iter().all(|&ok| ok), "{flags:?}");
    }

    #[test]
    fn uniform_cloud_fails_verification() {
        // A ring of radius 0.6 is no tangent-circle projection of an
        // equatorial or oblique vertex: residual stays large.
        let points: Vec<(f64, f64)> = (0..40)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / 40.0;
                (0.6 * a.cos(), 0.6 * a.sin())
            })
            .collect();
        let fit = fit_rotor_points(&points).unwrap();
        assert!(fit.rms_residual > 0.1);
    }
}
