//! Grasp-matrix construction and the scalar quality metrics (log-volume cost,
//! condition number, minimum singular value) with analytic gradients.

use nalgebra::{Matrix6xX, Vector3};
use serde::{Deserialize, Serialize};

use crate::chassis::Chassis;
use crate::error::{Error, Result};
use crate::manifold::canonicalize;

/// Barrier width in the log-volume cost.
pub const DEFAULT_EPSILON: f64 = 1e-9;
/// Unit-norm tolerance for admissible direction sets.
pub const UNIT_TOLERANCE: f64 = 1e-9;
/// Below this σ_min the condition number is reported as +∞.
pub const SIGMA_FLOOR: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    LogVolume,
    ConditionNumber,
}

/// N rotor thrust lines as unit vectors. Each d_i names an ℝP² element, so d_i
/// and −d_i are the same physical configuration; `canonicalized` picks the
/// upper-hemisphere representative.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionSet {
    dirs: Vec<Vector3<f64>>,
}

impl DirectionSet {
    pub fn new(dirs: Vec<Vector3<f64>>) -> Result<Self> {
        if dirs.is_empty() {
            return Err(Error::invalid("direction set must be non-empty"));
        }
        for (i, d) in dirs.iter().enumerate() {
            if !d.iter().all(|c| c.is_finite()) {
                return Err(Error::invalid(format!(
                    "direction {i} has non-finite coordinates"
                )));
            }
            if (d.norm() - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::invalid(format!(
                    "direction {i} has norm {} (must be unit)",
                    d.norm()
                )));
            }
        }
        Ok(DirectionSet { dirs })
    }

    pub fn n(&self) -> usize {
        self.dirs.len()
    }

    pub fn get(&self, i: usize) -> Vector3<f64> {
        self.dirs[i]
    }

    pub fn as_slice(&self) -> &[Vector3<f64>] {
        &self.dirs
    }

    pub fn iter(&self) -> impl Iterator<Item = Vector3<f64>> + '_ {
        self.dirs.iter().copied()
    }

    pub fn canonicalized(&self) -> DirectionSet {
        DirectionSet {
            dirs: self
                .dirs
                .iter()
                .map(|d| canonicalize(*d).expect("unit vectors canonicalize"))
                .collect(),
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.dirs
            .iter()
            .all(|d| canonicalize(*d).expect("unit vectors canonicalize") == *d)
    }
}

impl Serialize for DirectionSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<[f64; 3]> = self.dirs.iter().map(|d| [d.x, d.y, d.z]).collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DirectionSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<[f64; 3]> = Vec::deserialize(deserializer)?;
        DirectionSet::new(
            rows.into_iter()
                .map(|[x, y, z]| Vector3::new(x, y, z))
                .collect(),
        )
        .map_err(serde::de::Error::custom)
    }
}

/// 6×N wrench map: column i is (d_i ; (p_i × d_i)/L_c). Forces are already
/// dimensionless; dividing the moment rows by the characteristic length puts
/// both blocks on the same scale.
#[derive(Clone, Debug)]
pub struct GraspMatrix {
    entries: Matrix6xX<f64>,
    characteristic_length: f64,
}

impl GraspMatrix {
    pub fn entries(&self) -> &Matrix6xX<f64> {
        &self.entries
    }

    pub fn characteristic_length(&self) -> f64 {
        self.characteristic_length
    }

    #[cfg(test)]
    pub(crate) fn from_raw(entries: Matrix6xX<f64>, characteristic_length: f64) -> Self {
        GraspMatrix {
            entries,
            characteristic_length,
        }
    }
}

fn serialize_maybe_infinite<S: serde::Serializer>(
    v: &f64,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        serializer.serialize_some(v)
    } else {
        serializer.serialize_none()
    }
}

fn deserialize_maybe_infinite<'de, D: serde::Deserializer<'de>>(
    deserializer: D,
) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(deserializer)?.unwrap_or(f64::INFINITY))
}

/// Spectrum summary of one grasp matrix. condition_number is +∞ (JSON null)
/// when σ_min is below the floor.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricReport {
    pub singular_values: [f64; 6],
    pub log_volume: f64,
    #[serde(
        serialize_with = "serialize_maybe_infinite",
        deserialize_with = "deserialize_maybe_infinite"
    )]
    pub condition_number: f64,
    pub min_singular: f64,
}

pub fn build_grasp(chassis: &Chassis, dirs: &DirectionSet, l_c: f64) -> Result<GraspMatrix> {
    if chassis.n() != dirs.n() {
        return Err(Error::invalid(format!(
            "chassis has {} vertices but direction set has {}",
            chassis.n(),
            dirs.n()
        )));
    }
    if !(l_c > 0.0) {
        return Err(Error::invalid(format!(
            "characteristic length must be positive, got {l_c}"
        )));
    }
    Ok(GraspMatrix {
        entries: grasp_entries(chassis, dirs.as_slice(), l_c),
        characteristic_length: l_c,
    })
}

fn grasp_entries(chassis: &Chassis, dirs: &[Vector3<f64>], l_c: f64) -> Matrix6xX<f64> {
    let mut m = Matrix6xX::zeros(dirs.len());
    for (i, (p, d)) in chassis.vertices().iter().zip(dirs).enumerate() {
        let moment = p.cross(d) / l_c;
        let mut col = m.column_mut(i);
        col[0] = d.x;
        col[1] = d.y;
        col[2] = d.z;
        col[3] = moment.x;
        col[4] = moment.y;
        col[5] = moment.z;
    }
    m
}

struct SortedSvd {
    u: nalgebra::OMatrix<f64, nalgebra::U6, nalgebra::Dyn>,
    v_t: nalgebra::OMatrix<f64, nalgebra::Dyn, nalgebra::Dyn>,
    sigma: Vec<f64>,
}

fn sorted_svd(m: &Matrix6xX<f64>) -> SortedSvd {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let s = svd.singular_values;
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let mut su = nalgebra::OMatrix::<f64, nalgebra::U6, nalgebra::Dyn>::zeros(idx.len());
    let mut sv_t =
        nalgebra::OMatrix::<f64, nalgebra::Dyn, nalgebra::Dyn>::zeros(idx.len(), v_t.ncols());
    let mut sigma = Vec::with_capacity(idx.len());
    for (k, &j) in idx.iter().enumerate() {
        su.column_mut(k).copy_from(&u.column(j));
        sv_t.row_mut(k).copy_from(&v_t.row(j));
        sigma.push(s[j]);
    }
    SortedSvd {
        u: su,
        v_t: sv_t,
        sigma,
    }
}

/// Six singular values, descending, padding with zeros when N < 6.
fn six_sigma(m: &Matrix6xX<f64>) -> [f64; 6] {
    let svd = m.clone().svd(false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s.resize(6, 0.0);
    [s[0], s[1], s[2], s[3], s[4], s[5]]
}

pub fn metrics(a: &GraspMatrix, epsilon: f64) -> MetricReport {
    let singular_values = six_sigma(a.entries());
    let log_volume = -singular_values
        .iter()
        .map(|s| (s + epsilon).ln())
        .sum::<f64>();
    let min_singular = singular_values[5];
    let condition_number = if min_singular > SIGMA_FLOOR {
        singular_values[0] / min_singular
    } else {
        f64::INFINITY
    };
    MetricReport {
        singular_values,
        log_volume,
        condition_number,
        min_singular,
    }
}

/// Cost of a raw (not necessarily unit) coordinate vector. The optimization
/// problem constrains to unit norm; this unconstrained extension exists so
/// gradients can be checked by finite differences in the ambient space.
pub fn raw_cost(
    chassis: &Chassis,
    dirs: &[Vector3<f64>],
    l_c: f64,
    epsilon: f64,
    objective: Objective,
) -> Result<f64> {
    if chassis.n() != dirs.len() {
        return Err(Error::invalid(format!(
            "chassis has {} vertices but got {} directions",
            chassis.n(),
            dirs.len()
        )));
    }
    if !(l_c > 0.0) {
        return Err(Error::invalid("characteristic length must be positive"));
    }
    let m = grasp_entries(chassis, dirs, l_c);
    let sigma = six_sigma(&m);
    Ok(match objective {
        Objective::LogVolume => -sigma.iter().map(|s| (s + epsilon).ln()).sum::<f64>(),
        Objective::ConditionNumber => {
            if sigma[5] > SIGMA_FLOOR {
                sigma[0] / sigma[5]
            } else {
                f64::INFINITY
            }
        }
    })
}

/// ∂(objective)/∂d_i in ambient coordinates. For the log-volume cost this is
/// the exact smooth gradient; for the condition number it is a subgradient
/// (the objective is non-smooth at repeated extremes, and that instability is
/// part of what the ablation demonstrates).
pub fn raw_cost_gradient(
    chassis: &Chassis,
    dirs: &[Vector3<f64>],
    l_c: f64,
    epsilon: f64,
    objective: Objective,
) -> Result<Vec<Vector3<f64>>> {
    if chassis.n() != dirs.len() {
        return Err(Error::invalid(format!(
            "chassis has {} vertices but got {} directions",
            chassis.n(),
            dirs.len()
        )));
    }
    if !(l_c > 0.0) {
        return Err(Error::invalid("characteristic length must be positive"));
    }
    let m = grasp_entries(chassis, dirs, l_c);
    let svd = sorted_svd(&m);
    let k_count = svd.sigma.len();
    // dJ/dA = Σ_k w_k u_k v_kᵀ with w_k the derivative of the objective in σ_k.
    let mut weights = vec![0.0; k_count];
    match objective {
        Objective::LogVolume => {
            for (w, s) in weights.iter_mut().zip(&svd.sigma) {
                *w = -1.0 / (s + epsilon);
            }
        }
        Objective::ConditionNumber => {
            let s_max = svd.sigma[0];
            let s_min = svd.sigma[k_count - 1].max(SIGMA_FLOOR);
            weights[0] = 1.0 / s_min;
            weights[k_count - 1] += -s_max / (s_min * s_min);
        }
    }
    let mut dj_da = Matrix6xX::zeros(dirs.len());
    for k in 0..k_count {
        let u_k = svd.u.column(k);
        let v_k = svd.v_t.row(k);
        for c in 0..dirs.len() {
            for r in 0..6 {
                dj_da[(r, c)] += weights[k] * u_k[r] * v_k[c];
            }
        }
    }
    let grad = chassis
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let col = dj_da.column(i);
            let g_force = Vector3::new(col[0], col[1], col[2]);
            let g_moment = Vector3::new(col[3], col[4], col[5]);
            // Column i depends on d_i through (d_i ; [p]ₓ d_i / L_c) and [p]ₓᵀ = −[p]ₓ.
            g_force - p.cross(&g_moment) / l_c
        })
        .collect();
    Ok(grad)
}

/// Gradient of the log-volume cost at an admissible configuration.
pub fn cost_gradient(
    chassis: &Chassis,
    dirs: &DirectionSet,
    l_c: f64,
    epsilon: f64,
) -> Result<Vec<Vector3<f64>>> {
    raw_cost_gradient(chassis, dirs.as_slice(), l_c, epsilon, Objective::LogVolume)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SensitivityPoint {
    pub ratio: f64,
    pub kappa: f64,
    pub sigma_min: f64,
}

/// Metrics of the same configuration as the force/moment balance point L_c
/// sweeps over ratio·R_geom.
pub fn sensitivity_sweep(
    chassis: &Chassis,
    dirs: &DirectionSet,
    ratios: &[f64],
) -> Result<Vec<SensitivityPoint>> {
    if ratios.is_empty() {
        return Err(Error::invalid("sensitivity sweep needs at least one ratio"));
    }
    ratios
        .iter()
        .map(|&r| {
            if !(r > 0.0) {
                return Err(Error::invalid(format!("ratio must be positive, got {r}")));
            }
            let a = build_grasp(chassis, dirs, r * chassis.circumradius())?;
            let report = metrics(&a, DEFAULT_EPSILON);
            Ok(SensitivityPoint {
                ratio: r,
                kappa: report.condition_number,
                sigma_min: report.min_singular,
            })
        })
        .collect()
}

pub fn write_sensitivity_csv(points: &[SensitivityPoint], path: &std::path::Path) -> Result<()> {
    let mut out = String::from("ratio,kappa,sigma_min\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.ratio, p.kappa, p.sigma_min));
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chassis::{builtin, make_regular_polygon};
    use crate::manifold::{direction_from_phase, wrap_phase, PhaseVector};
    use approx::assert_relative_eq;
    use nalgebra::{Matrix3, Matrix6xX};

    fn pseudo_dirs(n: usize, salt: u64) -> DirectionSet {
        // Deterministic scatter, no RNG needed: low-discrepancy angles.
        let dirs = (0..n)
            .map(|i| {
                let a = 2.399963 * (i as u64 + salt) as f64;
                let z = -1.0 + 2.0 * (((i as u64 + salt) as f64 * 0.618034).fract());
                let r = (1.0 - z * z).sqrt();
                Vector3::new(r * a.cos(), r * a.sin(), z)
            })
            .collect();
        DirectionSet::new(dirs).unwrap()
    }

    #[test]
    fn grasp_column_by_hand() {
        let hex = make_regular_polygon(6).unwrap();
        let mut dirs: Vec<Vector3<f64>> = (0..6).map(|_| Vector3::new(0.0, 0.0, 1.0)).collect();
        dirs[0] = Vector3::new(0.0, 0.0, 1.0);
        let dirs = DirectionSet::new(dirs).unwrap();
        let a = build_grasp(&hex, &dirs, 1.0).unwrap();
        let col = a.entries().column(0);
        // p=(1,0,0), d=(0,0,1): moment p×d = (0,−1,0).
        assert_relative_eq!(col[0], 0.0);
        assert_relative_eq!(col[1], 0.0);
        assert_relative_eq!(col[2], 1.0);
        assert_relative_eq!(col[3], 0.0);
        assert_relative_eq!(col[4], -1.0);
        assert_relative_eq!(col[5], 0.0);
    }

    #[test]
    fn parallel_direction_zero_moment() {
        let hex = make_regular_polygon(6).unwrap();
        let mut dirs: Vec<Vector3<f64>> = (0..6).map(|_| Vector3::new(0.0, 0.0, 1.0)).collect();
        dirs[0] = Vector3::new(1.0, 0.0, 0.0);
        let dirs = DirectionSet::new(dirs).unwrap();
        let a = build_grasp(&hex, &dirs, 1.0).unwrap();
        let col = a.entries().column(0);
        assert_eq!((col[3], col[4], col[5]), (0.0, 0.0, 0.0));
    }

    #[test]
    fn dyadic_similarity_scaling_bit_identical() {
        let hex = make_regular_polygon(6).unwrap();
        let scaled_vertices = hex.vertices().iter().map(|p| p * 4.0).collect();
        let scaled = crate::chassis::Chassis::new(
            "scaled",
            crate::chassis::ChassisFamily::RegularPolygon,
            scaled_vertices,
        )
        .unwrap();
        let dirs = pseudo_dirs(6, 3);
        let a = build_grasp(&hex, &dirs, 1.0).unwrap();
        let b = build_grasp(&scaled, &dirs, 4.0).unwrap();
        assert_eq!(a.entries(), b.entries());
    }

    #[test]
    fn klein_quadric_every_column() {
        let cube = builtin("CCub8").unwrap();
        let dirs = pseudo_dirs(8, 11);
        let a = build_grasp(&cube, &dirs, 0.7).unwrap();
        for i in 0..8 {
            let col = a.entries().column(i);
            let d = Vector3::new(col[0], col[1], col[2]);
            let m = Vector3::new(col[3], col[4], col[5]);
            assert!(d.dot(&m).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_spectrum_metrics() {
        let mut m = Matrix6xX::zeros(6);
        for i in 0..6 {
            m[(i, i)] = 1.0;
        }
        let report = metrics(&GraspMatrix::from_raw(m, 1.0), DEFAULT_EPSILON);
        assert_relative_eq!(report.log_volume, -6.0 * (1.0 + 1e-9f64).ln(), epsilon = 1e-15);
        assert_relative_eq!(report.condition_number, 1.0, epsilon = 1e-12);
        assert_relative_eq!(report.min_singular, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rank_deficiency_hits_barrier() {
        let mut m = Matrix6xX::zeros(6);
        for i in 0..5 {
            m[(i, i)] = 1.0;
        }
        let report = metrics(&GraspMatrix::from_raw(m, 1.0), DEFAULT_EPSILON);
        // σ_6 = 0 contributes −ln(1e-9) ≈ 20.72 to the cost.
        assert!((report.log_volume - (-(1.0f64 + 1e-9).ln() * 5.0 - 1e-9f64.ln())).abs() < 1e-9);
        assert!(report.condition_number.is_infinite());
    }

    #[test]
    fn sign_flip_leaves_spectrum() {
        let hex = make_regular_polygon(6).unwrap();
        let dirs = pseudo_dirs(6, 5);
        let mut flipped: Vec<_> = dirs.iter().collect();
        flipped[3] = -flipped[3];
        let flipped = DirectionSet::new(flipped).unwrap();
        let a = metrics(&build_grasp(&hex, &dirs, 1.0).unwrap(), DEFAULT_EPSILON);
        let b = metrics(&build_grasp(&hex, &flipped, 1.0).unwrap(), DEFAULT_EPSILON);
        for k in 0..6 {
            assert_relative_eq!(a.singular_values[k], b.singular_values[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn common_rotation_leaves_spectrum() {
        let oct = builtin("COct6").unwrap();
        let dirs = pseudo_dirs(6, 7);
        let axis = Vector3::new(1.0, 2.0, 3.0).normalize();
        let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), 0.7);
        let r: Matrix3<f64> = *rot.matrix();
        let rot_vertices = oct.vertices().iter().map(|p| r * p).collect();
        let rot_chassis = crate::chassis::Chassis::new(
            "rot",
            crate::chassis::ChassisFamily::Platonic,
            rot_vertices,
        )
        .unwrap();
        let rot_dirs = DirectionSet::new(dirs.iter().map(|d| r * d).collect()).unwrap();
        let a = metrics(&build_grasp(&oct, &dirs, 1.0).unwrap(), DEFAULT_EPSILON);
        let b = metrics(&build_grasp(&rot_chassis, &rot_dirs, 1.0).unwrap(), DEFAULT_EPSILON);
        for k in 0..6 {
            assert_relative_eq!(a.singular_values[k], b.singular_values[k], epsilon = 1e-10);
        }
    }

    #[test]
    fn degenerate_configuration_costs_more() {
        let hex = make_regular_polygon(6).unwrap();
        let same = DirectionSet::new(vec![Vector3::new(0.0, 0.0, 1.0); 6]).unwrap();
        let spread = direction_from_phase(
            &hex,
            &PhaseVector::new((0..6).map(|i| wrap_phase(0.5 * i as f64)).collect()).unwrap(),
        )
        .unwrap();
        let j_same = raw_cost(&hex, same.as_slice(), 1.0, DEFAULT_EPSILON, Objective::LogVolume)
            .unwrap();
        let j_spread =
            raw_cost(&hex, spread.as_slice(), 1.0, DEFAULT_EPSILON, Objective::LogVolume).unwrap();
        assert!(j_same > j_spread + 10.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let hex = make_regular_polygon(6).unwrap();
        let dirs = pseudo_dirs(6, 13);
        let raw: Vec<_> = dirs.iter().collect();
        let grad =
            raw_cost_gradient(&hex, &raw, 1.0, DEFAULT_EPSILON, Objective::LogVolume).unwrap();
        let h = 1e-6;
        for i in 0..6 {
            for c in 0..3 {
                let mut plus = raw.clone();
                let mut minus = raw.clone();
                plus[i][c] += h;
                minus[i][c] -= h;
                let fp =
                    raw_cost(&hex, &plus, 1.0, DEFAULT_EPSILON, Objective::LogVolume).unwrap();
                let fm =
                    raw_cost(&hex, &minus, 1.0, DEFAULT_EPSILON, Objective::LogVolume).unwrap();
                let fd = (fp - fm) / (2.0 * h);
                let an = grad[i][c];
                assert!(
                    (fd - an).abs() <= 1e-5 * (1.0 + an.abs()),
                    "rotor {i} coord {c}: fd {fd} vs analytic {an}"
                );
            }
        }
    }

    #[test]
    fn condition_gradient_descends() {
        // Not smooth everywhere, but at a generic point the subgradient must
        // point uphill: a small step against it lowers κ.
        let hex = make_regular_polygon(6).unwrap();
        let raw: Vec<_> = pseudo_dirs(6, 17).iter().collect();
        let k0 = raw_cost(&hex, &raw, 1.0, DEFAULT_EPSILON, Objective::ConditionNumber).unwrap();
        let grad =
            raw_cost_gradient(&hex, &raw, 1.0, DEFAULT_EPSILON, Objective::ConditionNumber)
                .unwrap();
        let stepped: Vec<_> = raw
            .iter()
            .zip(&grad)
            .map(|(d, g)| (d - 1e-6 * g).normalize())
            .collect();
        let k1 =
            raw_cost(&hex, &stepped, 1.0, DEFAULT_EPSILON, Objective::ConditionNumber).unwrap();
        assert!(k1 < k0);
    }

    #[test]
    fn sensitivity_single_ratio_consistent() {
        let hex = make_regular_polygon(6).unwrap();
        let dirs = pseudo_dirs(6, 19);
        let sweep = sensitivity_sweep(&hex, &dirs, &[1.0]).unwrap();
        let direct = metrics(
            &build_grasp(&hex, &dirs, hex.circumradius()).unwrap(),
            DEFAULT_EPSILON,
        );
        assert_relative_eq!(sweep[0].kappa, direct.condition_number, epsilon = 1e-14);
        assert_relative_eq!(sweep[0].sigma_min, direct.min_singular, epsilon = 1e-14);
        assert!(sensitivity_sweep(&hex, &dirs, &[]).is_err());
    }

    #[test]
    fn metric_report_json_handles_infinity() {
        let report = MetricReport {
            singular_values: [1.0, 1.0, 1.0, 1.0, 1.0, 0.0],
            log_volume: 20.0,
            condition_number: f64::INFINITY,
            min_singular: 0.0,
        };
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"condition_number\":null"));
        let back: MetricReport = serde_json::from_str(&json).unwrap();
        assert!(back.condition_number.is_infinite());
    }

    #[test]
    fn direction_set_rejects_non_unit() {
        assert!(DirectionSet::new(vec![Vector3::new(0.5, 0.0, 0.0); 6]).is_err());
        assert!(DirectionSet::new(vec![]).is_err());
    }
}
