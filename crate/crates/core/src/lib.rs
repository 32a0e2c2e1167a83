//! Lie point symmetry analysis and exact-solution verification for the
//! Shigesada–Kawasaki–Teramoto cross-diffusion system.

pub mod catalog;
pub mod expr;
pub mod invariance;
pub mod jet;
pub mod simulator;
pub mod solutions;

pub use expr::{parse, Expr, Symbol};
