//! Regime classification of a solution set: discrete point sets (I–III) by
//! cluster count and tangency, torus continua (IV) by the 1D gate and branch
//! spreads.

use serde::Serialize;
use std::fmt;

use crate::chassis::Chassis;
use crate::error::{Error, Result};
use crate::manifold::tangency_residual;
use crate::optimizer::SolutionSet;
use crate::topology::branches::{
    check_1d_manifold_with, cluster_branches_with, BranchModel, ClusterParams, PhaseMatrix,
};

#[derive(Clone, Copy, Debug)]
pub struct ClassifyConfig {
    /// At most this many unique configurations is a discrete Type I set.
    pub type_i_max_configs: usize,
    /// Up to this many off-torus configurations is Type II, beyond is III.
    pub type_ii_max_configs: usize,
    /// Tangency residual separating torus-bound sets from the rest.
    pub tangency_threshold: f64,
    /// Two solutions closer than this (max per-rotor line angle) are the same
    /// configuration.
    pub duplicate_tol_deg: f64,
    pub cluster: ClusterParams,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            type_i_max_configs: 10,
            type_ii_max_configs: 50,
            // Genuinely off-torus regimes measure 3.5e-2 and beyond across
            // the library, while torus-collapse endpoints stay near 1e-2
            // even under deliberately coarse first-order solves. The
            // boundary splits those bands.
            tangency_threshold: 2e-2,
            duplicate_tol_deg: 1.0,
            cluster: ClusterParams::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SolutionClass {
    TypeI,
    TypeII,
    TypeIII,
    TypeIvA,
    TypeIvB(usize),
    TypeIvC,
}

impl fmt::Display for SolutionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolutionClass::TypeI => write!(f, "Type I"),
            SolutionClass::TypeII => write!(f, "Type II"),
            SolutionClass::TypeIII => write!(f, "Type III"),
            SolutionClass::TypeIvA => write!(f, "Type IV-A"),
            SolutionClass::TypeIvB(k) => write!(f, "Type IV-B, K={k}"),
            SolutionClass::TypeIvC => write!(f, "Type IV-C (rejected: spread > 30°)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Analysis {
    pub class: SolutionClass,
    pub unique_configs: usize,
    pub max_tangency_residual: f64,
    pub leading_variance_fraction: Option<f64>,
    pub model: Option<BranchModel>,
    pub lambda: Option<Vec<f64>>,
    pub phases: PhaseMatrix,
    /// The N−5 count the scaling law would predict, reported alongside
    /// rejections instead of forcing a K.
    pub conjectured_k: usize,
}

/// Count distinct configurations: greedy leaders under the max per-rotor
/// line-angle metric (sign-blind, so canonical and raw sets agree).
pub fn count_unique_configurations(set: &SolutionSet, tol_deg: f64) -> usize {
    let tol = tol_deg.to_radians();
    let mut leaders: Vec<&crate::optimizer::Solution> = Vec::new();
    'next: for sol in &set.solutions {
        for leader in &leaders {
            let dist = sol
                .directions
                .iter()
                .zip(leader.directions.iter())
                .map(|(a, b)| a.dot(&b).abs().clamp(0.0, 1.0).acos())
                .fold(0.0, f64::max);
            if dist < tol {
                continue 'next;
            }
        }
        leaders.push(sol);
    }
    leaders.len()
}

pub fn classify(chassis: &Chassis, set: &SolutionSet, cfg: &ClassifyConfig) -> Result<Analysis> {
    if set.solutions.is_empty() {
        return Err(Error::EmptyResult("no solutions to classify".into()));
    }
    let mut max_tangency = 0.0f64;
    for sol in &set.solutions {
        max_tangency = max_tangency.max(tangency_residual(chassis, &sol.directions)?);
    }
    let unique = count_unique_configurations(set, cfg.duplicate_tol_deg);
    let (phases, _) = PhaseMatrix::from_solution_set(chassis, set)?;
    let conjectured_k = chassis.n().saturating_sub(5);

    if unique <= cfg.type_i_max_configs {
        return Ok(Analysis {
            class: SolutionClass::TypeI,
            unique_configs: unique,
            max_tangency_residual: max_tangency,
            leading_variance_fraction: None,
            model: None,
            lambda: None,
            phases,
            conjectured_k,
        });
    }
    if max_tangency > cfg.tangency_threshold {
        let class = if unique <= cfg.type_ii_max_configs {
            SolutionClass::TypeII
        } else {
            SolutionClass::TypeIII
        };
        return Ok(Analysis {
            class,
            unique_configs: unique,
            max_tangency_residual: max_tangency,
            leading_variance_fraction: None,
            model: None,
            lambda: None,
            phases,
            conjectured_k,
        });
    }

    let check = check_1d_manifold_with(&phases, &cfg.cluster)?;
    match cluster_branches_with(&phases, &check.lambda, &cfg.cluster) {
        Ok(model) => {
            // A spread rejection outranks the dimensionality verdict: a band
            // too smeared for branch extraction is reported as such even
            // when the variance gate also failed on it.
            let class = if model.branches.iter().any(|b| b.rejected) {
                SolutionClass::TypeIvC
            } else if !check.is_1d {
                SolutionClass::TypeIvA
            } else {
                SolutionClass::TypeIvB(model.k())
            };
            let model = if class == SolutionClass::TypeIvA {
                None
            } else {
                Some(model)
            };
            Ok(Analysis {
                class,
                unique_configs: unique,
                max_tangency_residual: max_tangency,
                leading_variance_fraction: Some(check.leading_variance_fraction),
                model,
                lambda: Some(check.lambda),
                phases,
                conjectured_k,
            })
        }
        Err(Error::NoClusters(_)) => Ok(Analysis {
            class: SolutionClass::TypeIvA,
            unique_configs: unique,
            max_tangency_residual: max_tangency,
            leading_variance_fraction: Some(check.leading_variance_fraction),
            model: None,
            lambda: Some(check.lambda),
            phases,
            conjectured_k,
        }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_labels_render_like_report_lines() {
        assert_eq!(SolutionClass::TypeI.to_string(), "Type I");
        assert_eq!(SolutionClass::TypeIvB(2).to_string(), "Type IV-B, K=2");
        assert_eq!(
            SolutionClass::TypeIvC.to_string(),
            "Type IV-C (rejected: spread > 30°)"
        );
    }
}
