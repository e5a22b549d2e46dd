//! Closed-form branch predictor for regular polygons and the matcher that
//! compares extracted branches against it.

use serde::Serialize;
use std::f64::consts::PI;

use crate::chassis::{Chassis, ChassisFamily};
use crate::error::{Error, Result};
use crate::manifold::wrap_phase;
use crate::symmetry::{chassis_symmetries, quotient_offset_distance, SymmetryOp};
use crate::topology::branches::{Branch, BranchModel};

/// One predicted branch: connecting every q-th vertex of the N-gon yields the
/// offset law δ_v = (v−1)·q·π/N mod π.
#[derive(Clone, Debug, Serialize)]
pub struct StarBranch {
    pub q: usize,
    pub offsets: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StarPrediction {
    pub n: usize,
    pub branches: Vec<StarBranch>,
}

/// Admissible star densities are 2 < q < N−2, giving N−5 branches for N ≥ 6
/// and none below that.
pub fn star_polygon_predict(n: usize) -> StarPrediction {
    let branches = (3..n.saturating_sub(2))
        .map(|q| StarBranch {
            q,
            offsets: (0..n)
                .map(|v| wrap_phase(v as f64 * q as f64 * PI / n as f64))
                .collect(),
        })
        .collect();
    StarPrediction { n, branches }
}

impl StarPrediction {
    pub fn k(&self) -> usize {
        self.branches.len()
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut out = String::from("N,q,vertex,offset_over_pi\n");
        for b in &self.branches {
            for (v, &d) in b.offsets.iter().enumerate() {
                out.push_str(&format!("{},{},{},{}\n", self.n, b.q, v + 1, d / PI));
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

impl BranchModel {
    /// A noiseless model carrying exactly the predicted branches; handy as the
    /// reference side of matcher tests and CLI output.
    pub fn from_prediction(prediction: &StarPrediction) -> BranchModel {
        BranchModel {
            n: prediction.n,
            branches: prediction
                .branches
                .iter()
                .map(|b| Branch {
                    q_match: Some(b.q),
                    chirality: vec![1; prediction.n],
                    offsets: b.offsets.clone(),
                    spread_deg: 0.0,
                    max_fit_error_deg: 0.0,
                    rational_offsets: b
                        .offsets
                        .iter()
                        .map(|&d| {
                            let r = (d / PI * prediction.n as f64).round() as usize;
                            (r % prediction.n, prediction.n)
                        })
                        .collect(),
                    rejected: false,
                    member_rows: Vec::new(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchMatch {
    pub extracted_index: usize,
    pub q: usize,
    pub error_deg: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MatchReport {
    pub pairs: Vec<BranchMatch>,
    pub unmatched_extracted: Vec<usize>,
    pub unmatched_predicted: Vec<usize>,
}

impl MatchReport {
    pub fn complete(&self) -> bool {
        self.unmatched_extracted.is_empty() && self.unmatched_predicted.is_empty()
    }

    pub fn max_error_deg(&self) -> f64 {
        self.pairs.iter().map(|p| p.error_deg).fold(0.0, f64::max)
    }

    pub fn assign(&self, model: &mut BranchModel) {
        for pair in &self.pairs {
            model.branches[pair.extracted_index].q_match = Some(pair.q);
        }
    }
}

/// Pair extracted branches with predicted ones. Offset vectors are compared
/// modulo one global phase (the free branch origin); Platonic chassis are
/// additionally quotiented by their rotation group, which absorbs the unstated
/// vertex labeling and per-vertex frame constants behind published tables.
pub fn match_branches(
    extracted: &BranchModel,
    predicted: &StarPrediction,
    tol_deg: f64,
    chassis: &Chassis,
) -> Result<MatchReport> {
    if extracted.n != predicted.n || chassis.n() != extracted.n {
        return Err(Error::invalid(format!(
            "branch model (N={}), prediction (N={}) and chassis (N={}) must agree",
            extracted.n,
            predicted.n,
            chassis.n()
        )));
    }
    let ops: Vec<SymmetryOp> = match chassis.family() {
        ChassisFamily::Platonic => chassis_symmetries(chassis)?,
        _ => vec![SymmetryOp::identity(chassis.n())],
    };
    let mut edges: Vec<(f64, usize, usize)> = Vec::new();
    for (e, branch) in extracted.branches.iter().enumerate() {
        for (p, pred) in predicted.branches.iter().enumerate() {
            let dist = quotient_offset_distance(&ops, &branch.offsets, &pred.offsets);
            edges.push((dist.to_degrees(), e, p));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_e = vec![false; extracted.branches.len()];
    let mut used_p = vec![false; predicted.branches.len()];
    let mut pairs = Vec::new();
    for (dist, e, p) in edges {
        if dist > tol_deg || used_e[e] || used_p[p] {
            continue;
        }
        used_e[e] = true;
        used_p[p] = true;
        pairs.push(BranchMatch {
            extracted_index: e,
            q: predicted.branches[p].q,
            error_deg: dist,
        });
    }
    pairs.sort_by_key(|p| p.extracted_index);
    Ok(MatchReport {
        pairs,
        unmatched_extracted: (0..used_e.len()).filter(|&i| !used_e[i]).collect(),
        unmatched_predicted: (0..used_p.len())
            .filter(|&i| !used_p[i])
            .map(|i| predicted.branches[i].q)
            .collect(),
    })
}
