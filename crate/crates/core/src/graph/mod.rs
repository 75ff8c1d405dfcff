//! Graph providers: finite explicit graphs, cycles, integer lattices and lazy
//! user-defined graphs, all behind one neighbor-oracle trait.
//!
//! Vertices carry integer labels (lattice coordinates are packed into the
//! label). Edges are unoriented and canonicalized to `(min, max)` label
//! order. Every provider declares a degree bound and answers neighbor
//! queries in ascending label order, which keeps sampling reproducible.

mod cycles;
mod providers;

pub use cycles::{nu, odd_cycles, CycleSet, NuValue};
pub use providers::{
    parse_graph_spec, registered_graph_specs, CycleGraph, ExplicitGraph, GridLattice, LazyGraph,
    LineLattice,
};

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Integer vertex label, stable for the lifetime of a provider.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct VertexId(pub i64);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Unoriented edge as a `(min, max)` pair of vertex labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId {
    pub lo: VertexId,
    pub hi: VertexId,
}

impl EdgeId {
    /// Canonicalize an endpoint pair without an adjacency check. Panics on
    /// self-loops; use [`canonical_edge`] for checked construction.
    pub fn new(u: VertexId, v: VertexId) -> Self {
        assert_ne!(u, v, "self-loop edge");
        if u < v {
            Self { lo: u, hi: v }
        } else {
            Self { lo: v, hi: u }
        }
    }

    pub fn endpoints(&self) -> (VertexId, VertexId) {
        (self.lo, self.hi)
    }

    /// The endpoint different from `v`; `None` if `v` is not an endpoint.
    pub fn other(&self, v: VertexId) -> Option<VertexId> {
        if v == self.lo {
            Some(self.hi)
        } else if v == self.hi {
            Some(self.lo)
        } else {
            None
        }
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{},{}}}", self.lo, self.hi)
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("self-loop: vertex {0} paired with itself")]
    SelfLoop(VertexId),
    #[error("vertices {0} and {1} are not adjacent")]
    NotAdjacent(VertexId, VertexId),
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("operation not supported for provider {0}")]
    UnsupportedProvider(String),
    #[error("invalid graph spec {spec:?}: {reason}")]
    BadSpec { spec: String, reason: String },
    #[error("degree bound violated at vertex {vertex}: {found} neighbors > bound {bound}")]
    DegreeBoundViolated {
        vertex: VertexId,
        found: usize,
        bound: usize,
    },
    #[error("lattice coordinate out of the packable range at vertex {0}")]
    CoordinateOverflow(VertexId),
    #[error("io error reading graph: {0}")]
    Io(#[from] std::io::Error),
}

/// Neighbor oracle for a bounded-degree graph.
///
/// Implementations must answer deterministically, in strictly ascending
/// label order, with symmetric adjacency and at most `degree_bound()`
/// entries per vertex.
pub trait GraphProvider: Send + Sync {
    /// Spec string the provider answers to (e.g. `"cycle:5"`).
    fn spec_string(&self) -> String;

    fn degree_bound(&self) -> usize;

    /// Append the neighbors of `v` to `out` in ascending label order.
    fn neighbors_into(&self, v: VertexId, out: &mut Vec<VertexId>) -> Result<(), GraphError>;

    fn contains(&self, v: VertexId) -> bool;

    /// Total vertex count; `None` for infinite providers.
    fn vertex_count(&self) -> Option<usize> {
        None
    }

    /// All vertices in ascending order, for finite explicit providers only.
    fn vertices(&self) -> Option<Vec<VertexId>> {
        None
    }

    /// `Some(len)` when the provider is the cycle on `Z/len`.
    fn cycle_len(&self) -> Option<usize> {
        None
    }

    /// Adjacency lists when the provider is finite and explicit.
    fn as_explicit(&self) -> Option<&ExplicitGraph> {
        None
    }

    /// True only for providers that are bipartite by construction
    /// (integer lattices); grants an analytic odd-cycle answer.
    fn known_bipartite(&self) -> bool {
        false
    }

    fn neighbors(&self, v: VertexId) -> Result<Vec<VertexId>, GraphError> {
        let mut out = Vec::new();
        self.neighbors_into(v, &mut out)?;
        Ok(out)
    }
}

/// Shared handle to a provider.
pub type GraphHandle = Arc<dyn GraphProvider>;

/// Canonical unoriented edge between two adjacent vertices of `g`.
pub fn canonical_edge(
    g: &dyn GraphProvider,
    u: VertexId,
    v: VertexId,
) -> Result<EdgeId, GraphError> {
    if u == v {
        return Err(GraphError::SelfLoop(u));
    }
    let mut scratch = Vec::new();
    g.neighbors_into(u, &mut scratch)?;
    if !scratch.contains(&v) {
        return Err(GraphError::NotAdjacent(u, v));
    }
    Ok(EdgeId::new(u, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> GraphHandle {
        parse_graph_spec("triangle").unwrap()
    }

    #[test]
    fn canonical_edge_orders_endpoints() {
        let g = triangle();
        let e = canonical_edge(&*g, VertexId(2), VertexId(1)).unwrap();
        assert_eq!(e, EdgeId::new(VertexId(1), VertexId(2)));
        let e2 = canonical_edge(&*g, VertexId(1), VertexId(2)).unwrap();
        assert_eq!(e, e2);
    }

    #[test]
    fn canonical_edge_rejects_self_loop() {
        let g = triangle();
        assert!(matches!(
            canonical_edge(&*g, VertexId(2), VertexId(2)),
            Err(GraphError::SelfLoop(_))
        ));
    }

    #[test]
    fn canonical_edge_rejects_non_adjacent() {
        let g = parse_graph_spec("square").unwrap();
        assert!(matches!(
            canonical_edge(&*g, VertexId(0), VertexId(2)),
            Err(GraphError::NotAdjacent(_, _))
        ));
    }

    #[test]
    fn edge_other_endpoint() {
        let e = EdgeId::new(VertexId(3), VertexId(1));
        assert_eq!(e.other(VertexId(1)), Some(VertexId(3)));
        assert_eq!(e.other(VertexId(3)), Some(VertexId(1)));
        assert_eq!(e.other(VertexId(7)), None);
    }
}
