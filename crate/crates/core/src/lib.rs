//! Static verification and seeded execution of differentially private
//! analysis plans.
//!
//! A plan is a DAG from one data source through clipping, aggregation, Laplace
//! noise and post-processing to releases. [`verifier::verify`] checks it for
//! five classes of privacy mistakes; [`executor::execute`] runs it over a
//! CSV dataset with reproducible noise.

pub mod budget;
pub mod exact;
pub mod executor;
pub mod par;
pub mod plan;
pub mod sensitivity;
pub mod statics;
pub mod verifier;

pub use par::Strategy;
