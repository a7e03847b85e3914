//! Active-set identification for composite minimization `min_x h(c(x))`.
//!
//! The crate decomposes subdifferential graphs of structured outer functions
//! into closed pieces with distance oracles, solves prox-linear subproblems,
//! and decides from approximate critical sequences which pieces are actively
//! sufficient at a solution. The core is `no_std` (with `alloc`); IO, the
//! problem-file format, and the command line live in the companion crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod fmath;

pub mod demos;
pub mod expr;
pub mod graph;
pub mod identify;
pub mod linalg;
pub mod map;
pub mod outer;
pub mod polytope;
pub mod problem;
pub mod prox;
pub mod qp;
pub mod rng;
pub mod spectral;

pub use expr::{parse_expression, DualNumber, Expression};
pub use graph::{GraphDecomposition, GraphPiece, Interval, PieceSet};
pub use identify::{
    certify_piece, certify_sufficient_index, check_transversality, manifold_reveal,
    multiplier_set_vertices, nlp_index_set, q_delta, reveal, IdentificationReport,
    IterateRecord, PieceCertificate, RevealParams, SufficientIndexVerdict,
};
pub use map::{jacobian_fd_check, ExprMap, SmoothMap};
pub use outer::{HorizonCone, NlpData, OuterFunction, OuterKind};
pub use problem::{criticality_residual, CompositeProblem, CriticalityResidual, MultiplierVector};
pub use prox::{run_prox_sequence, solve_prox_subproblem, MuSchedule, ProxRun, ProxStep, Schedule};
pub use qp::{lp_feasibility_bounded, min_norm_stationarity, solve_qp, QpProblem, QpSolution};
pub use rng::Rng;
pub use spectral::{SpectralPoint, SpectralProjection};
