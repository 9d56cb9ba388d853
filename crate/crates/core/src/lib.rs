//! Conformal vector fields on semi-Riemannian space forms and the Ricci
//! almost soliton structures their tangential parts induce on immersed
//! hypersurfaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`semiriem`]: signatures, ambient spaces and the inner product of a
//!   semi-Euclidean container space.
//! * [`jets`]: truncated third-order Taylor arithmetic used to differentiate
//!   charts and every quantity built from them.
//! * [`hypersurface`]: frames, fundamental forms, curvature and the
//!   differential operators on an immersed hypersurface.
//! * [`conformal`]: conformal fields of the ambient space and their split
//!   into tangential part and angle function.
//! * [`soliton`]: soliton residuals, the four structural identities, the
//!   concircular fit and Tashiro-type classification.
//! * [`catalog`]: built-in geometries with declared constants.
//! * [`scenario`]: JSON scenarios and reports consumed by the CLI.

pub mod catalog;
pub mod conformal;
pub mod error;
pub mod hypersurface;
pub mod jets;
mod linalg;
pub mod scenario;
pub mod semiriem;
pub mod soliton;

pub use error::{Error, Result};
