//! Branch structure extraction: projective unwrapping, the 1D-manifold gate,
//! density clustering in offset space, and per-branch affine models.

use nalgebra::DMatrix;
use serde::Serialize;
use std::f64::consts::PI;

use crate::chassis::Chassis;
use crate::error::{Error, Result};
use crate::manifold::{phase_from_direction, wrap_phase};
use crate::optimizer::SolutionSet;
use crate::symmetry::phase_distance;

/// Leading-variance fraction required to call the solution cloud a 1D manifold.
pub const ONE_D_VARIANCE_THRESHOLD: f64 = 0.999;
/// Spread above which a branch is rejected as unresolved.
pub const SPREAD_REJECT_DEG: f64 = 30.0;
/// Rational-fit stays with denominator N unless the error exceeds this.
const RATIONAL_FALLBACK_DEG: f64 = 1.0;

/// Row-per-solution, column-per-rotor phase samples in [0, π).
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseMatrix {
    data: Vec<Vec<f64>>,
}

impl PhaseMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::invalid("phase matrix must be non-empty"));
        }
        let cols = rows[0].len();
        for r in &rows {
            if r.len() != cols {
                return Err(Error::invalid("phase matrix rows have unequal lengths"));
            }
            if r.iter().any(|t| !t.is_finite()) {
                return Err(Error::invalid("phase matrix has non-finite entries"));
            }
        }
        Ok(PhaseMatrix {
            data: rows
                .into_iter()
                .map(|r| r.into_iter().map(wrap_phase).collect())
                .collect(),
        })
    }

    pub fn from_solution_set(chassis: &Chassis, set: &SolutionSet) -> Result<(Self, f64)> {
        let mut rows = Vec::with_capacity(set.solutions.len());
        let mut max_residual = 0.0f64;
        for sol in &set.solutions {
            let (theta, residual) = phase_from_direction(chassis, &sol.directions)?;
            max_residual = max_residual.max(residual);
            rows.push(theta.values().to_vec());
        }
        Ok((PhaseMatrix::new(rows)?, max_residual))
    }

    pub fn rows(&self) -> usize {
        self.data.len()
    }

    pub fn cols(&self) -> usize {
        self.data[0].len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r][c]
    }

    /// Offset vector of each row against its rotor-1 phase, wrapped to [0, π).
    pub fn offsets(&self) -> Vec<Vec<f64>> {
        self.data
            .iter()
            .map(|row| row.iter().map(|&t| wrap_phase(t - row[0])).collect())
            .collect()
    }
}

/// Lift phases to the covering space: rows are visited in rotor-1 order and
/// every column entry is shifted by the multiple of π closest to its
/// predecessor, so each unwrapped value differs from the original by kπ.
pub fn unwrap_projective(phases: &PhaseMatrix) -> PhaseMatrix {
    let mut order: Vec<usize> = (0..phases.rows()).collect();
    order.sort_by(|&a, &b| phases.get(a, 0).total_cmp(&phases.get(b, 0)).then(a.cmp(&b)));
    let mut out = phases.data.clone();
    for col in 0..phases.cols() {
        let mut prev = out[order[0]][col];
        for &r in order.iter().skip(1) {
            let raw = phases.get(r, col);
            let val = raw + ((prev - raw) / PI).round() * PI;
            out[r][col] = val;
            prev = val;
        }
    }
    PhaseMatrix { data: out }
}

#[derive(Clone, Copy, Debug)]
pub struct ClusterParams {
    pub eps_deg: f64,
    pub min_pts: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            eps_deg: 5.0,
            min_pts: 5,
        }
    }
}

fn chebyshev_phase_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| phase_distance(x, y))
        .fold(0.0, f64::max)
}

/// Plain DBSCAN over offset vectors with the coordinate-wise geodesic metric.
/// Deterministic: points are visited and expanded in index order.
pub fn dbscan(points: &[Vec<f64>], params: &ClusterParams) -> (Vec<Vec<usize>>, Vec<usize>) {
    const UNVISITED: i64 = -2;
    const NOISE: i64 = -1;
    let eps = params.eps_deg.to_radians();
    let m = points.len();
    let neighbors = |p: usize| -> Vec<usize> {
        (0..m)
            .filter(|&q| chebyshev_phase_distance(&points[p], &points[q]) <= eps)
            .collect()
    };
    let mut label = vec![UNVISITED; m];
    let mut cluster = 0i64;
    for p in 0..m {
        if label[p] != UNVISITED {
            continue;
        }
        let seed = neighbors(p);
        if seed.len() < params.min_pts {
            label[p] = NOISE;
            continue;
        }
        label[p] = cluster;
        let mut queue: std::collections::VecDeque<usize> = seed.into();
        while let Some(q) = queue.pop_front() {
            if label[q] == NOISE {
                label[q] = cluster;
            }
            if label[q] != UNVISITED {
                continue;
            }
            label[q] = cluster;
            let next = neighbors(q);
            if next.len() >= params.min_pts {
                queue.extend(next);
            }
        }
        cluster += 1;
    }
    let mut clusters = vec![Vec::new(); cluster as usize];
    let mut noise = Vec::new();
    for (i, &l) in label.iter().enumerate() {
        if l >= 0 {
            clusters[l as usize].push(i);
        } else {
            noise.push(i);
        }
    }
    (clusters, noise)
}

/// Mean of angles with period π (offsets live on the projective circle).
pub fn circular_mean_pi(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (s, c, count) = values
        .clone()
        .fold((0.0, 0.0, 0usize), |(s, c, k), v| {
            (s + (2.0 * v).sin(), c + (2.0 * v).cos(), k + 1)
        });
    if (s * s + c * c).sqrt() < 1e-9 * count.max(1) as f64 {
        // Antipodal cancellation; fall back to the first value.
        return values.clone().next().unwrap_or(0.0);
    }
    wrap_phase(0.5 * s.atan2(c))
}

#[derive(Clone, Debug)]
pub struct ManifoldCheck {
    pub is_1d: bool,
    pub leading_variance_fraction: f64,
    pub lambda: Vec<f64>,
}

fn pca_leading(rows: &[Vec<f64>], members: &[usize]) -> (f64, Vec<f64>, Vec<f64>) {
    let n = rows[0].len();
    let m = members.len();
    let mut mean = vec![0.0; n];
    for &r in members {
        for (mu, &v) in mean.iter_mut().zip(&rows[r]) {
            *mu += v;
        }
    }
    for mu in &mut mean {
        *mu /= m as f64;
    }
    let mut cov = DMatrix::<f64>::zeros(n, n);
    for &r in members {
        for i in 0..n {
            for j in 0..n {
                cov[(i, j)] += (rows[r][i] - mean[i]) * (rows[r][j] - mean[j]);
            }
        }
    }
    cov /= (m.max(2) - 1) as f64;
    let eig = cov.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().sum();
    let leading = eig.eigenvalues[idx[0]];
    let fraction = if total > 1e-30 { leading / total } else { 1.0 };
    let mut w: Vec<f64> = eig.eigenvectors.column(idx[0]).iter().copied().collect();
    // Sign convention: rotor 1's loading positive, so its slope along the
    // recovered parameter is +1 and chirality is a statement about rotors 2..N.
    let pivot = (0..n).max_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs())).unwrap();
    let flip = if w[0].abs() > 1e-12 { w[0] } else { w[pivot] };
    if flip < 0.0 {
        for x in &mut w {
            *x = -*x;
        }
    }
    (fraction, w, mean)
}

/// Deflation granularity for the dimensionality gate. Finer than the branch
/// clustering on purpose: degenerate optima carry a near-flat transverse
/// continuum around each branch, and deflating it clump by clump keeps the
/// gate about the parameter direction rather than about that texture. A
/// diffuse set (no dense clumps, or one clump for the whole cloud) is
/// untouched: subtracting a shared centroid never changes the covariance.
const DEFLATION_EPS_DEG: f64 = 1.5;

/// PCA-based dimensionality gate. Offsets are clustered first and each row is
/// deflated by its cluster's centroid offsets, so parallel branches share one
/// direction of variation; rows DBSCAN calls noise are deflated by the nearest
/// centroid and projected, but do not enter the variance budget.
pub fn check_1d_manifold(phases: &PhaseMatrix) -> Result<ManifoldCheck> {
    check_1d_manifold_with(phases, &ClusterParams::default())
}

pub fn check_1d_manifold_with(
    phases: &PhaseMatrix,
    params: &ClusterParams,
) -> Result<ManifoldCheck> {
    let m = phases.rows();
    let n = phases.cols();
    if m < n {
        return Err(Error::InsufficientData(format!(
            "PCA needs at least as many solutions ({m}) as rotors ({n})"
        )));
    }
    let offsets = phases.offsets();
    let deflation = ClusterParams {
        eps_deg: params.eps_deg.min(DEFLATION_EPS_DEG),
        min_pts: params.min_pts,
    };
    let (clusters, _) = dbscan(&offsets, &deflation);
    let centroids: Vec<Vec<f64>> = clusters
        .iter()
        .map(|members| {
            (0..n)
                .map(|i| circular_mean_pi(members.iter().map(|&r| offsets[r][i])))
                .collect()
        })
        .collect();
    let mut deflated = Vec::with_capacity(m);
    let mut core_rows: Vec<usize> = Vec::new();
    let mut is_core = vec![false; m];
    for (k, members) in clusters.iter().enumerate() {
        for &r in members {
            is_core[r] = true;
            let _ = k;
        }
    }
    for r in 0..m {
        let row: Vec<f64> = if centroids.is_empty() {
            phases.row(r).to_vec()
        } else {
            let nearest = centroids
                .iter()
                .min_by(|a, b| {
                    chebyshev_phase_distance(&offsets[r], a)
                        .total_cmp(&chebyshev_phase_distance(&offsets[r], b))
                })
                .unwrap();
            phases
                .row(r)
                .iter()
                .zip(nearest)
                .map(|(&t, &d)| wrap_phase(t - d))
                .collect()
        };
        if is_core[r] || centroids.is_empty() {
            core_rows.push(r);
        }
        deflated.push(row);
    }
    let unwrapped = unwrap_projective(&PhaseMatrix { data: deflated });
    let (fraction, w, mean) = pca_leading(&unwrapped.data, &core_rows);
    let lambda: Vec<f64> = (0..m)
        .map(|r| {
            unwrapped
                .row(r)
                .iter()
                .zip(&w)
                .zip(&mean)
                .map(|((&x, &wi), &mu)| (x - mu) * wi)
                .sum()
        })
        .collect();
    Ok(ManifoldCheck {
        is_1d: fraction >= ONE_D_VARIANCE_THRESHOLD,
        leading_variance_fraction: fraction,
        lambda,
    })
}

/// Nearest fraction of π: numerators over N first, any denominator 2..12 as a
/// fallback once the N-family misses by more than the threshold.
pub fn rational_fit(delta: f64, n: usize) -> (usize, usize, f64) {
    assert!(n >= 3, "rational_fit needs N >= 3");
    let x = wrap_phase(delta) / PI;
    let circ = |a: f64, b: f64| {
        let d = (a - b).abs();
        d.min(1.0 - d) * 180.0
    };
    let mut best = (0usize, n, circ(x, 0.0));
    for r in 0..n {
        let err = circ(x, r as f64 / n as f64);
        if err < best.2 {
            best = (r, n, err);
        }
    }
    if best.2 <= RATIONAL_FALLBACK_DEG {
        return best;
    }
    for den in 2..=12usize {
        for num in 0..den {
            let err = circ(x, num as f64 / den as f64);
            if err + 1e-12 < best.2 {
                best = (num, den, err);
            }
        }
    }
    best
}

#[derive(Clone, Debug, Serialize)]
pub struct Branch {
    pub q_match: Option<usize>,
    pub chirality: Vec<i8>,
    /// Offsets in radians, rotor 1 pinned to 0 by the branch's free parameter.
    pub offsets: Vec<f64>,
    pub spread_deg: f64,
    pub max_fit_error_deg: f64,
    pub rational_offsets: Vec<(usize, usize)>,
    pub rejected: bool,
    /// Row indices of the solutions this branch was extracted from.
    pub member_rows: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct BranchModel {
    pub n: usize,
    pub branches: Vec<Branch>,
}

impl BranchModel {
    pub fn k(&self) -> usize {
        self.branches.len()
    }

    pub fn to_json_string(&self) -> Result<String> {
        #[derive(Serialize)]
        struct BranchWire<'a> {
            q_match: Option<usize>,
            chirality: &'a [i8],
            offsets_over_pi: Vec<f64>,
            spread_deg: f64,
            max_fit_error_deg: f64,
            rational_offsets: &'a [(usize, usize)],
            rejected: bool,
        }
        #[derive(Serialize)]
        struct ModelWire<'a> {
            #[serde(rename = "N")]
            n: usize,
            #[serde(rename = "K")]
            k: usize,
            branches: Vec<BranchWire<'a>>,
        }
        let wire = ModelWire {
            n: self.n,
            k: self.k(),
            branches: self
                .branches
                .iter()
                .map(|b| BranchWire {
                    q_match: b.q_match,
                    chirality: &b.chirality,
                    offsets_over_pi: b.offsets.iter().map(|&d| d / PI).collect(),
                    spread_deg: b.spread_deg,
                    max_fit_error_deg: b.max_fit_error_deg,
                    rational_offsets: &b.rational_offsets,
                    rejected: b.rejected,
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&wire)?)
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()? + "\n")?;
        Ok(())
    }

    /// Pairwise phase scatter for plotting: θ_1 against every other rotor,
    /// tagged with the branch index (−1 for rows no branch claimed).
    pub fn write_scatter_csv(&self, phases: &PhaseMatrix, path: &std::path::Path) -> Result<()> {
        let mut branch_of = vec![-1i64; phases.rows()];
        for (k, b) in self.branches.iter().enumerate() {
            for &r in &b.member_rows {
                branch_of[r] = k as i64;
            }
        }
        let mut out = String::from("solution_index,theta_1,theta_i,rotor_i,branch\n");
        for r in 0..phases.rows() {
            for i in 1..phases.cols() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r,
                    phases.get(r, 0),
                    phases.get(r, i),
                    i + 1,
                    branch_of[r]
                ));
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Per-cluster affine model: unwrap members along the recovered parameter,
/// regress each rotor's phase on it, and summarize chirality (slope sign),
/// offset (intercept, rotor 1 pinned to zero), and offset-space spread.
pub fn cluster_branches(phases: &PhaseMatrix, lambda: &[f64]) -> Result<BranchModel> {
    cluster_branches_with(phases, lambda, &ClusterParams::default())
}

pub fn cluster_branches_with(
    phases: &PhaseMatrix,
    lambda: &[f64],
    params: &ClusterParams,
) -> Result<BranchModel> {
    let m = phases.rows();
    let n = phases.cols();
    if lambda.len() != m {
        return Err(Error::invalid(format!(
            "lambda has {} entries for {} solutions",
            lambda.len(),
            m
        )));
    }
    let offsets = phases.offsets();
    let (clusters, _) = dbscan(&offsets, params);
    if clusters.is_empty() {
        return Err(Error::NoClusters(format!(
            "no offset cluster reached {} members at eps {}°",
            params.min_pts, params.eps_deg
        )));
    }
    let mut branches = Vec::with_capacity(clusters.len());
    for members in &clusters {
        let mut order = members.clone();
        order.sort_by(|&a, &b| lambda[a].total_cmp(&lambda[b]).then(a.cmp(&b)));
        // Unwrap each rotor's phases along the branch parameter.
        let mut theta = vec![vec![0.0; order.len()]; n];
        for (col, t) in theta.iter_mut().enumerate() {
            let mut prev = phases.get(order[0], col);
            t[0] = prev;
            for (w, &r) in order.iter().enumerate().skip(1) {
                let raw = phases.get(r, col);
                let val = raw + ((prev - raw) / PI).round() * PI;
                t[w] = val;
                prev = val;
            }
        }
        let lam: Vec<f64> = order.iter().map(|&r| lambda[r]).collect();
        let lam_mean = lam.iter().sum::<f64>() / lam.len() as f64;
        let lam_var: f64 = lam.iter().map(|l| (l - lam_mean).powi(2)).sum();
        let mut slopes = vec![0.0; n];
        let mut intercepts = vec![0.0; n];
        for i in 0..n {
            let t_mean = theta[i].iter().sum::<f64>() / lam.len() as f64;
            if lam_var > 1e-18 {
                let cov: f64 = theta[i]
                    .iter()
                    .zip(&lam)
                    .map(|(&t, &l)| (t - t_mean) * (l - lam_mean))
                    .sum();
                slopes[i] = cov / lam_var;
                intercepts[i] = t_mean - slopes[i] * lam_mean;
            } else {
                slopes[i] = 0.0;
                intercepts[i] = t_mean;
            }
        }
        // Orient the branch parameter so rotor 1 advances with it.
        if slopes[0] < 0.0 {
            for s in &mut slopes {
                *s = -*s;
            }
        }
        let chirality: Vec<i8> = slopes.iter().map(|&s| if s < 0.0 { -1 } else { 1 }).collect();
        let offsets_row: Vec<f64> = (0..n)
            .map(|i| wrap_phase(intercepts[i] - chirality[i] as f64 * intercepts[0]))
            .collect();
        let centroid: Vec<f64> = (0..n)
            .map(|i| circular_mean_pi(members.iter().map(|&r| offsets[r][i])))
            .collect();
        let mut spread_sq = 0.0;
        for &r in members {
            for i in 1..n {
                spread_sq += phase_distance(offsets[r][i], centroid[i]).powi(2);
            }
        }
        spread_sq /= (members.len() * (n - 1)) as f64;
        let spread_deg = spread_sq.sqrt().to_degrees();
        let rational: Vec<(usize, usize, f64)> =
            offsets_row.iter().map(|&d| rational_fit(d, n)).collect();
        let max_fit_error_deg = rational.iter().map(|r| r.2).fold(0.0, f64::max);
        branches.push(Branch {
            q_match: None,
            chirality,
            offsets: offsets_row,
            spread_deg,
            max_fit_error_deg,
            rational_offsets: rational.into_iter().map(|(a, b, _)| (a, b)).collect(),
            rejected: spread_deg > SPREAD_REJECT_DEG,
            member_rows: members.clone(),
        });
    }
    branches.sort_by(|a, b| a.offsets[1].total_cmp(&b.offsets[1]));
    Ok(BranchModel { n, branches })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_branches(
        n: usize,
        deltas: &[Vec<f64>],
        chis: &[Vec<i8>],
        per_branch: usize,
        noise_deg: f64,
    ) -> PhaseMatrix {
        // Deterministic pseudo-noise from a hash-like recurrence.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut rows = Vec::new();
        for (delta, chi) in deltas.iter().zip(chis) {
            for s in 0..per_branch {
                let lambda = PI * s as f64 / per_branch as f64;
                rows.push(
                    (0..n)
                        .map(|i| {
                            let noise = 2.0 * noise_deg.to_radians() * next();
                            wrap_phase(chi[i] as f64 * lambda + delta[i] + noise)
                        })
                        .collect(),
                );
            }
        }
        PhaseMatrix::new(rows).unwrap()
    }

    #[test]
    fn unwrap_fixes_single_discontinuity() {
        let phases = PhaseMatrix::new(vec![
            vec![0.10, 0.95 * PI],
            vec![0.11, 0.02 * PI],
        ])
        .unwrap();
        let unwrapped = unwrap_projective(&phases);
        assert!((unwrapped.get(1, 1) - 1.02 * PI).abs() < 1e-12);
        assert_eq!(unwrapped.get(0, 1), 0.95 * PI);
    }

    #[test]
    fn unwrap_leaves_linear_data_and_sections_back() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|k| {
                let l = 0.15 * k as f64;
                vec![wrap_phase(l), wrap_phase(l + 0.3), wrap_phase(l + 1.1)]
            })
            .collect();
        let phases = PhaseMatrix::new(rows).unwrap();
        let unwrapped = unwrap_projective(&phases);
        for r in 0..phases.rows() {
            for c in 0..phases.cols() {
                let back = wrap_phase(unwrapped.get(r, c));
                assert!((back - phases.get(r, c)).abs() < 1e-9);
                // Differences preserved modulo π.
                let d = unwrapped.get(r, c) - phases.get(r, c);
                assert!((d / PI - (d / PI).round()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn locked_data_is_rank_one() {
        let deltas = vec![vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5]];
        let chis = vec![vec![1i8; 6]];
        let phases = synthetic_branches(6, &deltas, &chis, 60, 0.0);
        let check = check_1d_manifold(&phases).unwrap();
        assert!(check.is_1d);
        assert!(check.leading_variance_fraction > 0.999999);
    }

    #[test]
    fn parallel_branches_still_one_dimensional() {
        let deltas = vec![
            vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5],
            vec![0.0, 1.2, 2.4, 0.6, 1.8, 3.0],
        ];
        let chis = vec![vec![1i8; 6], vec![1i8; 6]];
        let phases = synthetic_branches(6, &deltas, &chis, 40, 0.0);
        let check = check_1d_manifold(&phases).unwrap();
        assert!(check.is_1d, "fraction {}", check.leading_variance_fraction);
    }

    #[test]
    fn isotropic_cloud_is_not_one_dimensional() {
        let mut state = 123456789u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..6).map(|_| PI * next()).collect())
            .collect();
        let phases = PhaseMatrix::new(rows).unwrap();
        let check = check_1d_manifold(&phases).unwrap();
        assert!(!check.is_1d);
        assert!(check.leading_variance_fraction < 0.6);
    }

    #[test]
    fn recovers_synthetic_construction() {
        // Two heptagon-style homochiral branches. Offsets relative to rotor 1
        // are only constant along a branch when every rotor shares the branch
        // chirality, which is the regime the extractor is built for.
        let deltas: Vec<Vec<f64>> = [3.0, 4.0]
            .iter()
            .map(|q| (0..7).map(|v| wrap_phase(v as f64 * q * PI / 7.0)).collect())
            .collect();
        let chis = vec![vec![1i8; 7], vec![1i8; 7]];
        let phases = synthetic_branches(7, &deltas, &chis, 50, 0.5);
        let check = check_1d_manifold(&phases).unwrap();
        let model = cluster_branches(&phases, &check.lambda).unwrap();
        assert_eq!(model.k(), 2);
        for branch in &model.branches {
            let target = deltas
                .iter()
                .zip(&chis)
                .find(|(d, _)| phase_distance(d[1], branch.offsets[1]) < 0.05)
                .expect("branch matches a construction row");
            for i in 0..7 {
                assert!(
                    phase_distance(branch.offsets[i], target.0[i]).to_degrees() < 0.2,
                    "rotor {i}: {} vs {}",
                    branch.offsets[i],
                    target.0[i]
                );
                assert_eq!(branch.chirality[i], target.1[i]);
            }
            assert!(branch.spread_deg < 1.0);
            assert!(!branch.rejected);
        }
    }

    #[test]
    fn noiseless_single_branch_recovered_exactly() {
        let deltas = vec![vec![0.0, 1.1, 2.2, 0.4, 1.6, 2.8]];
        let chis = vec![vec![1i8; 6]];
        let phases = synthetic_branches(6, &deltas, &chis, 40, 0.0);
        let check = check_1d_manifold(&phases).unwrap();
        let model = cluster_branches(&phases, &check.lambda).unwrap();
        assert_eq!(model.k(), 1);
        let b = &model.branches[0];
        for i in 0..6 {
            assert!(phase_distance(b.offsets[i], deltas[0][i]) < 1e-9);
            assert_eq!(b.chirality[i], 1);
        }
        assert!(b.spread_deg < 1e-7);
    }

    #[test]
    fn rational_fit_examples() {
        let (num, den, err) = rational_fit(3.0 * PI / 7.0, 7);
        assert_eq!((num, den), (3, 7));
        assert!(err < 1e-9);

        let (num, den, err) = rational_fit(0.4290 * PI, 7);
        assert_eq!((num, den), (3, 7));
        assert!((err - 0.077).abs() < 0.01, "err {err}");

        let (num, den, _) = rational_fit(5.0 * PI / 6.0, 8);
        assert_eq!((num, den), (5, 6));

        // Near-π wraps to the 0 side.
        let (num, den, err) = rational_fit(0.999 * PI, 8);
        assert_eq!((num, den), (0, 8));
        assert!(err < 0.2);
    }

    #[test]
    fn dbscan_finds_two_blobs_and_noise() {
        let mut points: Vec<Vec<f64>> = Vec::new();
        for k in 0..20 {
            let e = 1e-3 * k as f64;
            points.push(vec![0.0, 0.3 + e, 0.6 - e]);
        }
        for k in 0..20 {
            let e = 1e-3 * k as f64;
            points.push(vec![0.0, 1.3 + e, 1.6 - e]);
        }
        points.push(vec![0.0, 2.5, 0.1]);
        let (clusters, noise) = dbscan(&points, &ClusterParams::default());
        assert_eq!(clusters.len(), 2);
        assert_eq!(noise, vec![40]);
    }

    #[test]
    fn insufficient_rows_rejected() {
        let phases = PhaseMatrix::new(vec![vec![0.1; 6]; 4]).unwrap();
        assert!(matches!(
            check_1d_manifold(&phases),
            Err(Error::InsufficientData(_))
        ));
    }
}
