//! Central limit objects: initial fluctuation covariances, empirical
//! fluctuation fields, quadratic-variation checks and the Galerkin
//! approximation of the limiting linear stochastic system.

pub mod field;
pub mod galerkin;
pub mod initial;
pub mod linear;

pub use field::{empirical_fluctuation, qv_check, FluctuationField};
pub use galerkin::{Component, GalerkinPath, GalerkinState};
pub use initial::{
    initial_covariances, initial_covariances_of, initial_pairings, mc_initial_clt, CovarianceReport, McCltReport,
    TestFunctions, MIN_QUADRATURE_GRID,
};
pub use linear::{LinearFrame, LinearizedSystem, Operators};
