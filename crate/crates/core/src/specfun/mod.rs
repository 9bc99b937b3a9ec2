//! Log-domain special functions and quadrature.

pub mod gamma;
pub mod grid;
pub mod hypergeometric;
pub mod logvalue;
pub mod quadrature;

pub use gamma::{log_beta, log_binomial, log_gamma};
pub use grid::{GridSampler, GRID_POINTS};
pub use hypergeometric::{
    appell_f1, appell_f1_with, gauss_2f1, gauss_2f1_with, kummer_m, HypergeometricEval,
    IntegralMethod, UnitArg,
};
pub use logvalue::{log_sigmoid, log_sum_exp, softplus, LogValue};
pub use quadrature::{integrate_log, laplace_log, Abscissa, LogIntegral, QuadratureSpec};
