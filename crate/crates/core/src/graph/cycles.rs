//! Odd-cycle enumeration on small explicit graphs and the odd-cycle
//! statistic `nu` (sqrt(2) times the longest odd cycle length).

use serde::{Deserialize, Serialize};

use super::{ExplicitGraph, GraphError, GraphProvider, VertexId};

/// Finding the longest cycle is NP-hard, so exhaustive search is only
/// attempted on explicit graphs up to this many vertices.
pub const EXHAUSTIVE_VERTEX_LIMIT: usize = 16;

/// Cap on DFS path extensions during enumeration; beyond it the result is
/// reported as truncated rather than wrong.
const ENUMERATION_BUDGET: u64 = 20_000_000;

/// Simple odd cycles found by enumeration, each reported once up to
/// rotation and reflection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CycleSet {
    /// Vertex tuples; each starts at its smallest vertex, second < last.
    pub cycles: Vec<Vec<VertexId>>,
    /// Maximum cycle length examined.
    pub search_bound: usize,
    /// True when the search stopped early (length cap below the vertex
    /// count, or work budget exhausted).
    pub truncated: bool,
}

impl CycleSet {
    pub fn longest(&self) -> Option<usize> {
        self.cycles.iter().map(Vec::len).max()
    }
}

/// Odd-cycle statistic: sqrt(2) times the longest odd cycle length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum NuValue {
    /// No odd cycle exists (bipartite graphs, trees, lattices).
    Zero,
    /// Longest odd cycle known exactly.
    Finite(f64),
    /// Search was truncated; the true value is at least this.
    LowerBound(f64),
}

impl NuValue {
    pub fn numeric(&self) -> f64 {
        match *self {
            NuValue::Zero => 0.0,
            NuValue::Finite(v) | NuValue::LowerBound(v) => v,
        }
    }
}

/// All simple odd cycles of length <= `max_len`, once up to rotation and
/// reflection. Explicit finite providers only.
pub fn odd_cycles(g: &dyn GraphProvider, max_len: usize) -> Result<CycleSet, GraphError> {
    let explicit = g
        .as_explicit()
        .ok_or_else(|| GraphError::UnsupportedProvider(g.spec_string()))?;
    if max_len < 3 {
        return Err(GraphError::BadSpec {
            spec: g.spec_string(),
            reason: "cycle search bound must be at least 3".into(),
        });
    }
    Ok(enumerate_odd_cycles(explicit, max_len))
}

fn enumerate_odd_cycles(g: &ExplicitGraph, max_len: usize) -> CycleSet {
    let verts: Vec<i64> = g.adjacency().keys().copied().collect();
    let n = verts.len();
    let bound = max_len.min(n);
    let mut cycles = Vec::new();
    let mut budget = ENUMERATION_BUDGET;
    let mut exhausted = false;

    // Each cycle is found exactly once: rooted at its smallest vertex, with
    // the second vertex smaller than the last (fixes the direction).
    for &root in &verts {
        let mut path = vec![root];
        let mut on_path = std::collections::BTreeSet::new();
        on_path.insert(root);
        dfs(
            g,
            root,
            bound,
            &mut path,
            &mut on_path,
            &mut cycles,
            &mut budget,
            &mut exhausted,
        );
        if exhausted {
            break;
        }
    }
    cycles.sort();
    CycleSet {
        cycles,
        search_bound: bound,
        truncated: exhausted || bound < n,
    }
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    g: &ExplicitGraph,
    root: i64,
    bound: usize,
    path: &mut Vec<i64>,
    on_path: &mut std::collections::BTreeSet<i64>,
    cycles: &mut Vec<Vec<VertexId>>,
    budget: &mut u64,
    exhausted: &mut bool,
) {
    if *exhausted {
        return;
    }
    let last = *path.last().unwrap();
    for &next in &g.adjacency()[&last] {
        if *budget == 0 {
            *exhausted = true;
            return;
        }
        *budget -= 1;
        if next == root {
            // Closing edge: need length >= 3, odd, and canonical direction.
            if path.len() >= 3 && path.len() % 2 == 1 && path[1] < *path.last().unwrap() {
                cycles.push(path.iter().map(|&v| VertexId(v)).collect());
            }
            continue;
        }
        if next < root || on_path.contains(&next) || path.len() >= bound {
            continue;
        }
        path.push(next);
        on_path.insert(next);
        dfs(g, root, bound, path, on_path, cycles, budget, exhausted);
        on_path.remove(&next);
        path.pop();
    }
}

/// Two-coloring check; bipartite graphs have no odd cycles at any length.
fn is_bipartite(g: &ExplicitGraph) -> bool {
    let mut color: std::collections::BTreeMap<i64, bool> = std::collections::BTreeMap::new();
    for &start in g.adjacency().keys() {
        if color.contains_key(&start) {
            continue;
        }
        color.insert(start, false);
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            let cu = color[&u];
            for &v in &g.adjacency()[&u] {
                match color.get(&v) {
                    Some(&cv) if cv == cu => return false,
                    Some(_) => {}
                    None => {
                        color.insert(v, !cu);
                        queue.push_back(v);
                    }
                }
            }
        }
    }
    true
}

/// Odd-cycle statistic for a provider.
///
/// Cycle and lattice providers answer analytically. Explicit graphs are
/// two-colored first (bipartite certifies `Zero` regardless of search
/// bounds); non-bipartite graphs are enumerated, exhaustively when the
/// graph has at most [`EXHAUSTIVE_VERTEX_LIMIT`] vertices and `max_len`
/// covers the vertex count, otherwise a lower bound is reported.
pub fn nu(g: &dyn GraphProvider, max_len: usize) -> Result<NuValue, GraphError> {
    const SQRT2: f64 = std::f64::consts::SQRT_2;
    if let Some(len) = g.cycle_len() {
        return Ok(if len % 2 == 1 {
            NuValue::Finite(SQRT2 * len as f64)
        } else {
            NuValue::Zero
        });
    }
    if g.known_bipartite() {
        return Ok(NuValue::Zero);
    }
    let explicit = g
        .as_explicit()
        .ok_or_else(|| GraphError::UnsupportedProvider(g.spec_string()))?;
    if is_bipartite(explicit) {
        return Ok(NuValue::Zero);
    }
    let n = explicit.vertex_count().unwrap_or(0);
    let set = enumerate_odd_cycles(explicit, max_len);
    let longest = set.longest();
    let exhaustive = !set.truncated && n <= EXHAUSTIVE_VERTEX_LIMIT;
    match (longest, exhaustive) {
        (Some(len), true) => Ok(NuValue::Finite(SQRT2 * len as f64)),
        (Some(len), false) => Ok(NuValue::LowerBound(SQRT2 * len.max(3) as f64)),
        // Non-bipartite guarantees some odd cycle of length >= 3 even when
        // the truncated search missed it.
        (None, _) => Ok(NuValue::LowerBound(SQRT2 * 3.0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_graph_spec;

    #[test]
    fn triangle_has_one_odd_cycle() {
        let g = parse_graph_spec("triangle").unwrap();
        let set = odd_cycles(&*g, 5).unwrap();
        assert_eq!(set.cycles, vec![vec![VertexId(0), VertexId(1), VertexId(2)]]);
        assert!(!set.truncated);
    }

    #[test]
    fn square_has_no_odd_cycles() {
        let g = parse_graph_spec("square").unwrap();
        let set = odd_cycles(&*g, 5).unwrap();
        assert!(set.cycles.is_empty());
    }

    // Independent count: subsets of K4 vertices of size 3 each span one
    // triangle (C(4,3) = 4); a 4-vertex odd cycle is impossible, so the
    // exhaustive answer is exactly the four triangles.
    #[test]
    fn k4_has_four_triangles_and_nothing_longer() {
        let g = parse_graph_spec("k4").unwrap();
        let set = odd_cycles(&*g, 5).unwrap();
        assert_eq!(set.cycles.len(), 4);
        assert!(set.cycles.iter().all(|c| c.len() == 3));
        let expected: Vec<Vec<VertexId>> = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]]
            .iter()
            .map(|c| c.iter().map(|&v| VertexId(v)).collect())
            .collect();
        assert_eq!(set.cycles, expected);
    }

    #[test]
    fn five_cycle_found_once() {
        let g = parse_graph_spec("cycle:5").unwrap();
        // Cycle providers don't enumerate; build the same graph explicitly.
        let e = crate::graph::ExplicitGraph::from_edges(
            "c5",
            &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)],
        )
        .unwrap();
        assert_eq!(odd_cycles(&e, 7).unwrap().cycles.len(), 1);
        assert!(matches!(nu(&*g, 7), Ok(NuValue::Finite(v)) if (v - 5.0 * std::f64::consts::SQRT_2).abs() < 1e-12));
    }

    #[test]
    fn odd_cycles_unsupported_on_lattice() {
        let g = parse_graph_spec("z").unwrap();
        assert!(matches!(
            odd_cycles(&*g, 5),
            Err(GraphError::UnsupportedProvider(_))
        ));
    }

    #[test]
    fn nu_values_for_presets() {
        let sqrt2 = std::f64::consts::SQRT_2;
        let tri = nu(&*parse_graph_spec("triangle").unwrap(), 5).unwrap();
        assert!(matches!(tri, NuValue::Finite(v) if (v - 3.0 * sqrt2).abs() < 1e-12));
        let k4 = nu(&*parse_graph_spec("k4").unwrap(), 5).unwrap();
        assert!(matches!(k4, NuValue::Finite(v) if (v - 3.0 * sqrt2).abs() < 1e-12));
        assert_eq!(nu(&*parse_graph_spec("z").unwrap(), 5).unwrap(), NuValue::Zero);
        assert_eq!(nu(&*parse_graph_spec("z2").unwrap(), 5).unwrap(), NuValue::Zero);
        assert_eq!(
            nu(&*parse_graph_spec("square").unwrap(), 5).unwrap(),
            NuValue::Zero
        );
    }

    #[test]
    fn nu_cycle_parity() {
        for len in 3..12 {
            let g = parse_graph_spec(&format!("cycle:{len}")).unwrap();
            let v = nu(&*g, len + 2).unwrap();
            if len % 2 == 1 {
                let expected = std::f64::consts::SQRT_2 * len as f64;
                assert!(matches!(v, NuValue::Finite(x) if (x - expected).abs() < 1e-12));
            } else {
                assert_eq!(v, NuValue::Zero);
            }
        }
    }

    #[test]
    fn truncated_search_reports_lower_bound() {
        // Petersen graph: 10 vertices, non-bipartite, odd girth 5.
        let edges = [
            (0, 1), (1, 2), (2, 3), (3, 4), (4, 0),
            (5, 7), (7, 9), (9, 6), (6, 8), (8, 5),
            (0, 5), (1, 6), (2, 7), (3, 8), (4, 9),
        ];
        let g = ExplicitGraph::from_edges("petersen", &edges).unwrap();
        let v = nu(&g, 5).unwrap();
        // max_len 5 < 10 vertices: truncated, so only a lower bound.
        assert!(matches!(v, NuValue::LowerBound(x) if x >= 5.0 * std::f64::consts::SQRT_2 - 1e-12));
    }
}
