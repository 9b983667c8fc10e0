//! A PLONKish circuit compiler: circuits, witnesses, constraints and passes.

pub mod builder;
pub mod circuit;
pub mod constraints;
pub mod field;
pub mod gadgets;
pub mod json;
pub mod optimizer;
pub mod poly;
pub mod tabulation;
pub mod verify;
pub mod witness;
