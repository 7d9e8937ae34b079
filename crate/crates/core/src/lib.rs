//! Exact finite-truncation Hilbert-space models of the operator algebras
//! attached to affine iterated function systems: orbit bases, sparse
//! matrix representations, graded structure, structural condition
//! checks, and a masa/Cartan verdict engine, all over rational
//! (complex-rational) arithmetic.

pub mod basis;
pub mod cantor;
pub mod chains;
pub mod conditions;
pub mod config;
pub mod graded;
pub mod ifs;
pub mod linalg;
pub mod matrix;
pub mod poly;
pub mod region;
pub mod report;
pub mod scalar;
pub mod suites;
pub mod verdict;
pub mod word;
