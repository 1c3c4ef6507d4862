//! Numerical laboratory for partially hyperbolic Anosov maps of T³.

pub mod cli;
pub mod conjugacy;
pub mod error;
pub mod families;
pub mod foliation;
pub mod leaf_entropy;
pub mod linalg;
pub mod measures;
pub mod splitting;
pub mod torus;

pub use error::{LabError, Result};
pub use linalg::{IntMatrix3, Mat3, Vec3};
pub use torus::{
    spectrum, torus_distance, verify_cone_condition, AnosovMap, BundleTag, ConeCertificate,
    ConeRequest, Dynamics, FourierMode, PerturbationField, Spectrum, TimeDirection, TorusPoint,
    REFERENCE_MATRIX,
};
