//! Projective geometry of rotor lines: canonical representatives on the upper
//! hemisphere, the moduli-disc projection, and the tangent-torus phase maps.

use nalgebra::Vector3;
use std::f64::consts::PI;

use crate::chassis::Chassis;
use crate::error::{Error, Result};
use crate::wrench::DirectionSet;

/// Below this value of ‖e_z × n‖ the azimuthal formula is degenerate and the
/// pole fallback basis is used.
pub const POLE_THRESHOLD: f64 = 1e-9;

/// Orthonormal right-handed frame at a vertex: radial normal n, azimuthal
/// tangent u, polar tangent v. The rotor's line at phase θ is cosθ·u + sinθ·v.
#[derive(Clone, Copy, Debug)]
pub struct TangentBasis {
    pub n: Vector3<f64>,
    pub u: Vector3<f64>,
    pub v: Vector3<f64>,
}

/// Per-rotor phases on [0, π); a value of exactly π wraps to 0.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseVector {
    theta: Vec<f64>,
}

/// Map any real angle to the projective phase interval [0, π).
pub fn wrap_phase(t: f64) -> f64 {
    let r = t.rem_euclid(PI);
    if r >= PI { 0.0 } else { r }
}

impl PhaseVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("phase vector must be non-empty"));
        }
        if let Some(bad) = values.iter().find(|t| !t.is_finite()) {
            return Err(Error::invalid(format!("non-finite phase {bad}")));
        }
        Ok(PhaseVector {
            theta: values.into_iter().map(wrap_phase).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.theta
    }

    pub fn get(&self, i: usize) -> f64 {
        self.theta[i]
    }
}

/// Pick the representative of {d, −d} in the closed upper hemisphere, with the
/// z = 0 boundary tie-broken by y then x so the choice is a total order.
pub fn canonicalize(d: Vector3<f64>) -> Result<Vector3<f64>> {
    if d.norm() == 0.0 {
        return Err(Error::invalid("cannot canonicalize the zero vector"));
    }
    let flip = d.z < 0.0
        || (d.z == 0.0 && d.y < 0.0)
        || (d.z == 0.0 && d.y == 0.0 && d.x < 0.0);
    Ok(if flip { -d } else { d })
}

/// Orthographic projection of a canonical direction onto the equatorial disc.
pub fn disc_project(d: &Vector3<f64>) -> (f64, f64) {
    (d.x, d.y)
}

/// Frame at vertex p. Away from the z-axis u points along e_z × n (horizontal);
/// at the poles that cross product vanishes and u falls back to the tangential
/// part of e_x, so the +z pole gets u = e_x, v = e_y.
pub fn tangent_basis(p: &Vector3<f64>) -> Result<TangentBasis> {
    let norm = p.norm();
    if norm == 0.0 {
        return Err(Error::invalid("tangent basis undefined at the origin"));
    }
    let n = p / norm;
    let cross = Vector3::new(0.0, 0.0, 1.0).cross(&n);
    let u = if cross.norm() > POLE_THRESHOLD {
        cross / cross.norm()
    } else {
        let ex = Vector3::new(1.0, 0.0, 0.0);
        let t = ex - n * ex.dot(&n);
        t / t.norm()
    };
    let v = n.cross(&u);
    Ok(TangentBasis { n, u, v })
}

/// The tangent-circle point at phase theta.
pub fn direction_at(basis: &TangentBasis, theta: f64) -> Vector3<f64> {
    basis.u * theta.cos() + basis.v * theta.sin()
}

pub fn direction_from_phase(chassis: &Chassis, theta: &PhaseVector) -> Result<DirectionSet> {
    if chassis.n() != theta.n() {
        return Err(Error::invalid(format!(
            "chassis has {} vertices but phase vector has {}",
            chassis.n(),
            theta.n()
        )));
    }
    let dirs = chassis
        .vertices()
        .iter()
        .zip(theta.values())
        .map(|(p, &t)| Ok(direction_at(&tangent_basis(p)?, t)))
        .collect::<Result<Vec<_>>>()?;
    DirectionSet::new(dirs)
}

/// Project each direction into its vertex's tangent plane and read off the
/// phase. The residual is the largest rejected radial component, which is the
/// distance from the tangent torus this extraction silently discards.
pub fn phase_from_direction(
    chassis: &Chassis,
    dirs: &DirectionSet,
) -> Result<(PhaseVector, f64)> {
    if chassis.n() != dirs.n() {
        return Err(Error::invalid(format!(
            "chassis has {} vertices but direction set has {}",
            chassis.n(),
            dirs.n()
        )));
    }
    let mut theta = Vec::with_capacity(dirs.n());
    let mut residual = 0.0f64;
    for (p, d) in chassis.vertices().iter().zip(dirs.iter()) {
        let basis = tangent_basis(p)?;
        let mut t = d.dot(&basis.v).atan2(d.dot(&basis.u));
        if t < 0.0 {
            t += PI;
        }
        theta.push(t);
        residual = residual.max(d.dot(&basis.n).abs());
    }
    Ok((PhaseVector::new(theta)?, residual))
}

/// max_i |d_i · n_i|: zero exactly on the tangent torus.
pub fn tangency_residual(chassis: &Chassis, dirs: &DirectionSet) -> Result<f64> {
    if chassis.n() != dirs.n() {
        return Err(Error::invalid(format!(
            "chassis has {} vertices but direction set has {}",
            chassis.n(),
            dirs.n()
        )));
    }
    let mut residual = 0.0f64;
    for (p, d) in chassis.vertices().iter().zip(dirs.iter()) {
        residual = residual.max(d.dot(&(p / p.norm())).abs());
    }
    Ok(residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chassis::make_regular_polygon;
    use approx::assert_relative_eq;

    fn grid_directions() -> Vec<Vector3<f64>> {
        let mut out = Vec::new();
        for i in 0..8 {
            for j in 0..8 {
                let az = 2.0 * PI * i as f64 / 8.0 + 0.1;
                let pol = PI * (j as f64 + 0.5) / 8.0;
                out.push(Vector3::new(
                    pol.sin() * az.cos(),
                    pol.sin() * az.sin(),
                    pol.cos(),
                ));
            }
        }
        out
    }

    #[test]
    fn canonicalize_examples() {
        let c = canonicalize(Vector3::new(0.0, 0.0, -1.0)).unwrap();
        assert_eq!(c, Vector3::new(0.0, 0.0, 1.0));
        let c = canonicalize(Vector3::new(0.0, -1.0, 0.0)).unwrap();
        assert_eq!(c, Vector3::new(0.0, 1.0, 0.0));
        let c = canonicalize(Vector3::new(-1.0, 0.0, 0.0)).unwrap();
        assert_eq!(c, Vector3::new(1.0, 0.0, 0.0));
        assert!(canonicalize(Vector3::zeros()).is_err());
    }

    #[test]
    fn canonicalize_idempotent_and_antipodal() {
        for d in grid_directions() {
            let once = canonicalize(d).unwrap();
            let twice = canonicalize(once).unwrap();
            assert_eq!(once, twice);
            assert_eq!(canonicalize(-d).unwrap(), once);
            assert!(once.z >= 0.0);
        }
    }

    #[test]
    fn disc_projection_examples() {
        assert_eq!(disc_project(&Vector3::new(0.0, 0.0, 1.0)), (0.0, 0.0));
        assert_eq!(disc_project(&Vector3::new(1.0, 0.0, 0.0)), (1.0, 0.0));
    }

    #[test]
    fn tangent_basis_equatorial_and_pole() {
        let b = tangent_basis(&Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(b.u, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(b.v, Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-15);

        let b = tangent_basis(&Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert_relative_eq!(b.u, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(b.v, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-15);

        let b = tangent_basis(&Vector3::new(0.0, 0.0, -2.0)).unwrap();
        assert_relative_eq!(b.u, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(b.v, Vector3::new(0.0, -1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn tangent_basis_orthonormal_right_handed() {
        for p in grid_directions() {
            let b = tangent_basis(&(p * 1.7)).unwrap();
            assert!(b.u.dot(&b.v).abs() < 1e-12);
            assert!(b.u.dot(&b.n).abs() < 1e-12);
            assert!(b.v.dot(&b.n).abs() < 1e-12);
            assert_relative_eq!(b.u.cross(&b.v), b.n, epsilon = 1e-12);
            if b.n.xy().norm() > 1e-6 {
                assert!(b.u.z.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hexagon_phase_directions() {
        let hex = make_regular_polygon(6).unwrap();
        let theta = PhaseVector::new(vec![0.0; 6]).unwrap();
        let dirs = direction_from_phase(&hex, &theta).unwrap();
        assert_relative_eq!(dirs.get(0), Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-15);

        let theta = PhaseVector::new(vec![PI / 2.0; 6]).unwrap();
        let dirs = direction_from_phase(&hex, &theta).unwrap();
        assert_relative_eq!(dirs.get(0), Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-15);
        assert!(tangency_residual(&hex, &dirs).unwrap() < 1e-12);
    }

    #[test]
    fn phase_round_trip() {
        let hex = make_regular_polygon(6).unwrap();
        for k in 0..50 {
            let theta = PhaseVector::new(
                (0..6)
                    .map(|i| wrap_phase(0.137 * (k * 6 + i) as f64))
                    .collect(),
            )
            .unwrap();
            let dirs = direction_from_phase(&hex, &theta).unwrap();
            let (back, residual) = phase_from_direction(&hex, &dirs).unwrap();
            assert!(residual < 1e-12);
            for i in 0..6 {
                let diff = (back.get(i) - theta.get(i)).abs();
                let wrapped = diff.min(PI - diff);
                assert!(wrapped < 1e-10, "rotor {i}: {} vs {}", back.get(i), theta.get(i));
            }
        }
    }

    #[test]
    fn phase_ignores_projective_sign() {
        let hex = make_regular_polygon(6).unwrap();
        let theta = PhaseVector::new(vec![0.3, 1.1, 2.2, 0.7, 2.9, 0.05]).unwrap();
        let dirs = direction_from_phase(&hex, &theta).unwrap();
        let flipped = DirectionSet::new(dirs.iter().map(|d| -d).collect()).unwrap();
        let (a, _) = phase_from_direction(&hex, &dirs).unwrap();
        let (b, _) = phase_from_direction(&hex, &flipped).unwrap();
        for i in 0..6 {
            let diff = (a.get(i) - b.get(i)).abs();
            assert!(diff.min(PI - diff) < 1e-12);
        }
    }

    #[test]
    fn radial_contamination_reported() {
        let hex = make_regular_polygon(6).unwrap();
        let theta = PhaseVector::new(vec![0.4; 6]).unwrap();
        let clean = direction_from_phase(&hex, &theta).unwrap();
        let eps = 1e-4;
        let dirty = DirectionSet::new(
            clean
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    let n = hex.vertex(i) / hex.vertex(i).norm();
                    (d + eps * n).normalize()
                })
                .collect(),
        )
        .unwrap();
        let (back, residual) = phase_from_direction(&hex, &dirty).unwrap();
        assert!((residual - eps).abs() < 1e-6);
        for i in 0..6 {
            assert!((back.get(i) - theta.get(i)).abs() < 1e-4);
        }
    }

    #[test]
    fn radial_direction_residual_is_one() {
        let hex = make_regular_polygon(6).unwrap();
        let theta = PhaseVector::new(vec![0.0; 6]).unwrap();
        let mut dirs: Vec<_> = direction_from_phase(&hex, &theta).unwrap().iter().collect();
        dirs[2] = hex.vertex(2) / hex.vertex(2).norm();
        let dirs = DirectionSet::new(dirs).unwrap();
        assert_relative_eq!(tangency_residual(&hex, &dirs).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn wrap_phase_half_open() {
        assert_eq!(wrap_phase(PI), 0.0);
        assert_eq!(wrap_phase(0.0), 0.0);
        assert!(wrap_phase(-1e-18) < PI);
        assert_relative_eq!(wrap_phase(1.5 * PI), 0.5 * PI, epsilon = 1e-12);
        assert_relative_eq!(wrap_phase(-0.25 * PI), 0.75 * PI, epsilon = 1e-12);
    }
}
