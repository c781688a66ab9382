//! Finite-window laboratory for expansion problems over countable groups.
//!
//! Structures live on finite subsets of ℤ, ℤᵈ or a free group. Everything
//! that would need the whole group is computed on a window, and values near
//! the window boundary are reported as undetermined instead of guessed.

pub mod groups;
pub mod patterns;
pub mod local_rules;
pub mod expansions;
pub mod walks;
pub mod ire_lp;
pub mod gallery;
pub mod harness;
