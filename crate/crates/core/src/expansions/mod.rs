//! Constructive expansion algorithms: greedy bijections, equivariant
//! colourings, spanning forests along an exhaustion, linearizations of
//! partial orders and directed trees, and the ℤ-line selector.

pub mod bijection;
pub mod colouring;
pub mod forest;
pub mod linearize;
pub mod tree;
pub mod zline;

/// How a finite input relates to the structure on the whole group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// The input is a window into an infinite structure: nothing is known
    /// outside it, and values that depend on the outside are undetermined.
    #[default]
    Window,
    /// The input is the whole structure: everything outside is absent.
    Closed,
}

/// Kleene three-valued truth: `None` is unknown.
pub(crate) type Tri = Option<bool>;

pub(crate) fn tri_and(a: Tri, b: Tri) -> Tri {
    match (a, b) {
        (Some(false), _) | (_, Some(false)) => Some(false),
        (Some(true), Some(true)) => Some(true),
        _ => None,
    }
}

pub(crate) fn tri_or(a: Tri, b: Tri) -> Tri {
    match (a, b) {
        (Some(true), _) | (_, Some(true)) => Some(true),
        (Some(false), Some(false)) => Some(false),
        _ => None,
    }
}

pub(crate) fn tri_not(a: Tri) -> Tri {
    a.map(|v| !v)
}
