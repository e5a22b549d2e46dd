//! Rotational symmetries of a chassis and their action on branch offsets.
//!
//! A rotation g with g·p_i = p_σ(i) carries a solution on the tangent torus to
//! another one: the direction at vertex i lands in the tangent plane at σ(i),
//! where its phase picks up a constant β_i that depends only on how g rotates
//! the local frame. Branch offsets therefore transform by a permutation plus
//! per-vertex constants, and any table of offsets is only comparable modulo
//! that action (plus one global phase from the free branch parameter).

use nalgebra::{Matrix3, Vector3};
use std::f64::consts::PI;

use crate::chassis::Chassis;
use crate::error::Result;
use crate::manifold::{tangent_basis, wrap_phase};

const VERTEX_MATCH_TOL: f64 = 1e-9;

/// One symmetry: vertex i maps to `permutation[i]` and its phase gains
/// `frame_offsets[i]`. Improper elements reverse in-plane orientation, so the
/// phase is negated first; rotor lines and their singular values are blind to
/// the handedness flip.
#[derive(Clone, Debug)]
pub struct SymmetryOp {
    pub rotation: Matrix3<f64>,
    pub permutation: Vec<usize>,
    pub frame_offsets: Vec<f64>,
    pub orientation: f64,
}

impl SymmetryOp {
    pub fn identity(n: usize) -> Self {
        SymmetryOp {
            rotation: Matrix3::identity(),
            permutation: (0..n).collect(),
            frame_offsets: vec![0.0; n],
            orientation: 1.0,
        }
    }

    /// Transform a branch offset vector into the relabeled frame.
    pub fn apply(&self, offsets: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; offsets.len()];
        for (i, (&o, &b)) in offsets.iter().zip(&self.frame_offsets).enumerate() {
            out[self.permutation[i]] = wrap_phase(self.orientation * o + b);
        }
        out
    }
}

/// Geodesic distance on the projective phase circle [0, π).
pub fn phase_distance(a: f64, b: f64) -> f64 {
    let d = (wrap_phase(a) - wrap_phase(b)).abs();
    d.min(PI - d)
}

fn permutation_matrices() -> Vec<Matrix3<f64>> {
    let perms: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut out = Vec::with_capacity(48);
    for p in perms {
        for sx in [1.0, -1.0] {
            for sy in [1.0, -1.0] {
                for sz in [1.0, -1.0] {
                    let mut m = Matrix3::zeros();
                    let signs = [sx, sy, sz];
                    for (k, &row) in p.iter().enumerate() {
                        m[(row, k)] = signs[k];
                    }
                    out.push(m);
                }
            }
        }
    }
    out
}

fn vertex_permutation(chassis: &Chassis, rotation: &Matrix3<f64>) -> Option<Vec<usize>> {
    let mut perm = Vec::with_capacity(chassis.n());
    let mut used = vec![false; chassis.n()];
    for p in chassis.vertices() {
        let image: Vector3<f64> = rotation * p;
        let mut found = None;
        for (j, q) in chassis.vertices().iter().enumerate() {
            if !used[j] && (image - q).norm() < VERTEX_MATCH_TOL {
                found = Some(j);
                break;
            }
        }
        let j = found?;
        used[j] = true;
        perm.push(j);
    }
    Some(perm)
}

fn frame_offsets(chassis: &Chassis, rotation: &Matrix3<f64>, perm: &[usize]) -> Result<Vec<f64>> {
    chassis
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let src = tangent_basis(p)?;
            let dst = tangent_basis(&chassis.vertex(perm[i]))?;
            let ru: Vector3<f64> = rotation * src.u;
            Ok(ru.dot(&dst.v).atan2(ru.dot(&dst.u)))
        })
        .collect()
}

/// All proper rotations among the 24 signed coordinate permutations that map
/// the vertex set onto itself. Covers the cubic/octahedral solids exactly and
/// yields a useful subgroup for anything axis-aligned; the identity is always
/// present.
pub fn chassis_rotations(chassis: &Chassis) -> Result<Vec<SymmetryOp>> {
    chassis_symmetries_filtered(chassis, true)
}

/// The full signed-permutation symmetry group acting on rotor lines, proper
/// and improper elements alike. A reflection maps an optimal line set to an
/// optimal line set (the grasp rows only flip sign), so offset tables are
/// comparable modulo all of it.
pub fn chassis_symmetries(chassis: &Chassis) -> Result<Vec<SymmetryOp>> {
    chassis_symmetries_filtered(chassis, false)
}

fn chassis_symmetries_filtered(chassis: &Chassis, proper_only: bool) -> Result<Vec<SymmetryOp>> {
    let mut ops = Vec::new();
    for m in permutation_matrices() {
        let det = m.determinant();
        if proper_only && (det - 1.0).abs() > 1e-12 {
            continue;
        }
        if let Some(perm) = vertex_permutation(chassis, &m) {
            let offsets = frame_offsets(chassis, &m, &perm)?;
            ops.push(SymmetryOp {
                rotation: m,
                permutation: perm,
                frame_offsets: offsets,
                orientation: det.signum(),
            });
        }
    }
    if ops.is_empty() {
        ops.push(SymmetryOp::identity(chassis.n()));
    }
    Ok(ops)
}

/// Smallest max-coordinate geodesic distance between two offset vectors over
/// the choice of one global phase shift.
pub fn align_offsets_mod_global(ours: &[f64], reference: &[f64]) -> f64 {
    debug_assert_eq!(ours.len(), reference.len());
    let mut candidates: Vec<f64> = ours
        .iter()
        .zip(reference)
        .map(|(&a, &b)| b - a)
        .collect();
    // Doubled-angle circular mean of the residuals, a near-minimax center when
    // the residuals cluster.
    let (s, c) = candidates
        .iter()
        .fold((0.0, 0.0), |(s, c), &r| (s + (2.0 * r).sin(), c + (2.0 * r).cos()));
    if s != 0.0 || c != 0.0 {
        candidates.push(0.5 * s.atan2(c));
    }
    candidates
        .iter()
        .map(|&shift| {
            ours.iter()
                .zip(reference)
                .map(|(&a, &b)| phase_distance(a + shift, b))
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Distance between offset vectors modulo the chassis symmetry action and a
/// global phase.
pub fn quotient_offset_distance(ops: &[SymmetryOp], ours: &[f64], reference: &[f64]) -> f64 {
    ops.iter()
        .map(|op| align_offsets_mod_global(&op.apply(ours), reference))
        .fold(f64::INFINITY, f64::min)
}

/// Distance between two whole offset tables modulo vertex relabeling, one
/// global phase per branch, and one shared per-vertex frame constant. The
/// frame constant absorbs the unknowable reference basis at each vertex, and
/// cancels in differences between rows, so tables are compared through their
/// rows' offsets relative to an anchor row. A one-row table therefore always
/// matches; the structure lives in how branches sit relative to each other.
pub fn quotient_table_distance(
    ops: &[SymmetryOp],
    ours: &[Vec<f64>],
    reference: &[Vec<f64>],
) -> f64 {
    if ours.len() != reference.len() {
        return f64::INFINITY;
    }
    let k = ours.len();
    if k == 0 {
        return 0.0;
    }
    let n = ours[0].len();
    let row_diff = |a: &[f64], b: &[f64]| -> Vec<f64> {
        a.iter().zip(b).map(|(&x, &y)| wrap_phase(x - y)).collect()
    };
    let mut assignments: Vec<Vec<usize>> = Vec::new();
    permute((0..k).collect(), &mut Vec::new(), &mut assignments);
    let mut best = f64::INFINITY;
    for op in ops {
        let transformed: Vec<Vec<f64>> = ours.iter().map(|row| op.apply(row)).collect();
        for assign in &assignments {
            let mut worst = 0.0f64;
            for j in 1..k {
                let d_ours = row_diff(&transformed[j], &transformed[0]);
                let d_ref = row_diff(&reference[assign[j]], &reference[assign[0]]);
                worst = worst.max(align_offsets_mod_global(&d_ours, &d_ref));
                if worst >= best {
                    break;
                }
            }
            best = best.min(worst);
            if best == 0.0 && n > 0 {
                return 0.0;
            }
        }
    }
    best
}

fn permute(pool: Vec<usize>, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if pool.is_empty() {
        out.push(acc.clone());
        return;
    }
    for (i, &v) in pool.iter().enumerate() {
        let mut rest = pool.clone();
        rest.remove(i);
        acc.push(v);
        permute(rest, acc, out);
        acc.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chassis::{builtin, make_regular_polygon};

    #[test]
    fn octahedral_solids_have_24_rotations() {
        for id in ["COct6", "CCub8", "CCubOct12"] {
            let ops = chassis_rotations(&builtin(id).unwrap()).unwrap();
            assert_eq!(ops.len(), 24, "{id}");
        }
    }

    #[test]
    fn rotations_preserve_tangent_planes() {
        let oct = builtin("COct6").unwrap();
        for op in chassis_rotations(&oct).unwrap() {
            for (i, p) in oct.vertices().iter().enumerate() {
                let basis = tangent_basis(p).unwrap();
                let target = tangent_basis(&oct.vertex(op.permutation[i])).unwrap();
                let ru: Vector3<f64> = op.rotation * basis.u;
                assert!(ru.dot(&target.n).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn polygon_contains_half_turn() {
        let hex = make_regular_polygon(6).unwrap();
        let ops = chassis_rotations(&hex).unwrap();
        // diag(−1,−1,1) rotates the hexagon by π: vertex i → i+3.
        assert!(ops.iter().any(|op| op.permutation == vec![3, 4, 5, 0, 1, 2]));
    }

    #[test]
    fn phase_distance_wraps() {
        assert!((phase_distance(0.0, PI - 1e-3) - 1e-3).abs() < 1e-12);
        assert!((phase_distance(0.2, 0.5) - 0.3).abs() < 1e-12);
        assert_eq!(phase_distance(0.4, 0.4), 0.0);
    }

    #[test]
    fn global_alignment_removes_constant() {
        let a = vec![0.1, 0.7, 1.3, 2.2, 2.9, 0.4];
        let shifted: Vec<f64> = a.iter().map(|x| wrap_phase(x + 1.234)).collect();
        assert!(align_offsets_mod_global(&a, &shifted) < 1e-12);
        let other = vec![0.1, 0.7, 1.3, 2.2, 2.9, 1.9];
        assert!(align_offsets_mod_global(&a, &other) > 0.5);
    }

    #[test]
    fn quotient_matches_transformed_offsets() {
        let oct = builtin("COct6").unwrap();
        let ops = chassis_rotations(&oct).unwrap();
        let base = vec![0.0, 0.3, 0.6, 0.9, 1.2, 1.5];
        let moved: Vec<f64> = ops[7].apply(&base).iter().map(|x| wrap_phase(x + 0.77)).collect();
        assert!(quotient_offset_distance(&ops, &base, &moved) < 1e-12);
    }
}
