pub mod analysis;
pub mod assembly;
pub mod autodiff;
pub mod derham;
pub mod error;
pub mod geometry;
pub mod io;
pub mod operators;
pub mod par;
pub mod quadrature;
pub mod sparse;
pub mod solver;
pub mod splines;
pub mod verification;
