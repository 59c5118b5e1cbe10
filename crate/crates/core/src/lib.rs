//! Hermite spectral Galerkin solvers for linear and mean-field (McKean-Vlasov)
//! Fokker-Planck equations driven by white or colored noise, with Monte Carlo
//! particle simulation and bifurcation analysis of the self-consistency map.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod asymptotics;
pub mod basis;
pub mod bifurcation;
pub mod config;
pub mod error;
pub mod hermite;
pub mod io;
pub mod mc;
pub mod operators;
pub mod poly;
pub mod quad;
pub mod run;
pub mod solver;
pub mod sparse;

pub use basis::{hermite_transform, project_separable, HermiteBasis, SpectralField};
pub use error::{Error, Result};
pub use hermite::{eval_hermite, gauss_hermite_rule, GaussRule, IndexSet, IndexShape};
pub use operators::{ColoredModel, NoiseModel, ProblemSpec};
pub use poly::{DiffOp, MultiPoly, Poly1};
pub use sparse::{BandedLu, OperatorMatrix};
