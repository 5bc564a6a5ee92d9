pub mod basis;
pub mod cross;
pub mod debias;
pub mod dirt;
pub mod error;
pub mod ftt;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod quadrature;
pub mod reference;
pub mod sirt;
pub mod targets;
pub mod tensor;

pub use basis::{make_basis, pdf_to_cdf, Basis1D, Cdf1D, Family};
pub use error::{Error, Result};
pub use ftt::Ftt;
pub use tensor::Tensor3;
pub use cross::{maxvol, tt_cross, CrossOptions, CrossOutput};
pub use reference::Reference;
pub use sirt::{build_sirt, Sirt, Tail};
pub use targets::{temper, LogParts, TargetDensity, TargetSpec};
pub use dirt::{build_dirt, make_schedule, BridgingSchedule, Dirt, DirtOptions, LayerReport, PriorExponentRule, RatioMode, ScheduleMode};
pub use debias::{iact, irt_is, irt_mcmc, mse_diagnostic, ChainResult, Diagnostics, IsResult};
pub use oracle::{divergences, quad_integral, Divergences, QuadChange, QuadGrid};
