//! Simulation and estimation for locally stationary time series.

pub mod curve;
pub mod empirical;
pub mod error;
pub mod io;
pub mod likelihood;
pub mod local;
pub mod mc;
pub mod model;
pub mod numeric;
pub mod optim;
pub mod spectral;
pub mod taper;

pub use curve::{logistic_transition_curve, ParameterCurve};
pub use error::{Error, Result};
pub use model::{Family, InnovationSpec, Realization, TvModelSpec};
pub use taper::{Kernel, Taper};
