//! Explicit structures from the non-existence arguments: the dyadic order
//! on `F₀`-classes, random pair colourings, and adversaries for local rules.

pub mod adversary;
pub mod dyadic;
pub mod ramsey;
