//! Analysis of optimized solution sets: manifold reconstruction, branch
//! extraction, the closed-form polygon predictor, and regime classification.

pub mod branches;
pub mod classify;
pub mod ellipse;
pub mod star;
pub mod sweep;

pub use branches::{
    check_1d_manifold, cluster_branches, dbscan, rational_fit, unwrap_projective, Branch,
    BranchModel, ClusterParams, ManifoldCheck, PhaseMatrix,
};
pub use classify::{classify, count_unique_configurations, Analysis, ClassifyConfig, SolutionClass};
pub use ellipse::{
    fit_rotor_points, fit_semi_ellipses, mean_orthogonal_distance, verify_tangent_collapse,
    EllipseFitReport, RotorEllipseFit,
};
pub use star::{match_branches, star_polygon_predict, BranchMatch, MatchReport, StarPrediction};
pub use sweep::{
    branch_sweep, decoherent_sweep, random_sweep, sweep_variation, write_trajectory_csv,
    SweepPoint,
};
