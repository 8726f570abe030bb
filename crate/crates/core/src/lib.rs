//! Field-layout optimization for serialized algebraic datatypes.
//!
//! Programs in a small first-order language ([`lang`]) are analyzed per
//! function ([`cfg`], [`dataflow`], [`attrs`], [`access`]) to find how each
//! traversal touches the fields of each constructor. [`solver`] turns the
//! resulting field-access graphs into a field order per constructor,
//! [`rewrite`] applies it to the program, and [`runtime`] measures the effect
//! on a byte-level model of dense packed buffers.

pub mod lang;
pub mod cfg;
pub mod dataflow;
pub mod attrs;
pub mod access;
pub mod solver;
pub mod runtime;
pub mod rewrite;
pub mod gen;
pub mod pipeline;
pub mod bench;
