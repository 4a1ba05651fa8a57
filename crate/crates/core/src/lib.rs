//! Numerical laboratory for automorphism groups and quasi-invariant states
//! on finite-dimensional matrix algebras.

pub mod algebra;
pub mod flow;
pub mod gns;
pub mod group;
pub mod linalg;
pub mod quasi;
pub mod random;
pub mod report;
pub mod scenario;
pub mod tracial;
pub mod verdict;
