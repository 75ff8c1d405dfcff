//! Concrete graph providers and the name registry that turns spec strings
//! into provider instances.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Arc;

use super::{GraphError, GraphHandle, GraphProvider, VertexId};

/// Finite graph held as sorted adjacency lists.
#[derive(Debug, Clone)]
pub struct ExplicitGraph {
    name: String,
    adj: BTreeMap<i64, Vec<i64>>,
    degree_bound: usize,
}

impl ExplicitGraph {
    /// Build from an undirected edge list. Duplicate edges collapse;
    /// self-loops are rejected.
    pub fn from_edges(
        name: impl Into<String>,
        edges: &[(i64, i64)],
    ) -> Result<Self, GraphError> {
        let mut adj: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
        for &(u, v) in edges {
            if u == v {
                return Err(GraphError::SelfLoop(VertexId(u)));
            }
            adj.entry(u).or_default().push(v);
            adj.entry(v).or_default().push(u);
        }
        for list in adj.values_mut() {
            list.sort_unstable();
            list.dedup();
        }
        let degree_bound = adj.values().map(Vec::len).max().unwrap_or(0);
        Ok(Self {
            name: name.into(),
            adj,
            degree_bound,
        })
    }

    /// Load from a text edge list: one `u v` pair per line, `#` comments and
    /// blank lines skipped.
    pub fn from_edge_list_file(path: &Path) -> Result<Self, GraphError> {
        let file = std::fs::File::open(path)?;
        let mut edges = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let mut it = body.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<i64, GraphError> {
                tok.and_then(|t| t.parse().ok())
                    .ok_or_else(|| GraphError::BadSpec {
                        spec: format!("file:{}", path.display()),
                        reason: format!("line {}: expected \"u v\"", lineno + 1),
                    })
            };
            let u = parse(it.next())?;
            let v = parse(it.next())?;
            if it.next().is_some() {
                return Err(GraphError::BadSpec {
                    spec: format!("file:{}", path.display()),
                    reason: format!("line {}: trailing tokens", lineno + 1),
                });
            }
            edges.push((u, v));
        }
        Self::from_edges(format!("file:{}", path.display()), &edges)
    }

    pub fn edge_pairs(&self) -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        for (&u, list) in &self.adj {
            for &v in list {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn adjacency(&self) -> &BTreeMap<i64, Vec<i64>> {
        &self.adj
    }
}

impl GraphProvider for ExplicitGraph {
    fn spec_string(&self) -> String {
        self.name.clone()
    }

    fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    fn neighbors_into(&self, v: VertexId, out: &mut Vec<VertexId>) -> Result<(), GraphError> {
        let list = self
            .adj
            .get(&v.0)
            .ok_or(GraphError::UnknownVertex(v))?;
        out.extend(list.iter().map(|&u| VertexId(u)));
        Ok(())
    }

    fn contains(&self, v: VertexId) -> bool {
        self.adj.contains_key(&v.0)
    }

    fn vertex_count(&self) -> Option<usize> {
        Some(self.adj.len())
    }

    fn vertices(&self) -> Option<Vec<VertexId>> {
        Some(self.adj.keys().map(|&u| VertexId(u)).collect())
    }

    fn as_explicit(&self) -> Option<&ExplicitGraph> {
        Some(self)
    }
}

/// Cycle on `Z/len` with vertices `0..len`.
#[derive(Debug, Clone)]
pub struct CycleGraph {
    len: usize,
}

impl CycleGraph {
    pub fn new(len: usize) -> Result<Self, GraphError> {
        if len < 3 {
            return Err(GraphError::BadSpec {
                spec: format!("cycle:{len}"),
                reason: "cycle length must be at least 3".into(),
            });
        }
        Ok(Self { len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    /// Successor in the cyclic order.
    pub fn succ(&self, v: VertexId) -> VertexId {
        VertexId((v.0 + 1).rem_euclid(self.len as i64))
    }

    /// Predecessor in the cyclic order.
    pub fn pred(&self, v: VertexId) -> VertexId {
        VertexId((v.0 - 1).rem_euclid(self.len as i64))
    }
}

impl GraphProvider for CycleGraph {
    fn spec_string(&self) -> String {
        format!("cycle:{}", self.len)
    }

    fn degree_bound(&self) -> usize {
        2
    }

    fn neighbors_into(&self, v: VertexId, out: &mut Vec<VertexId>) -> Result<(), GraphError> {
        if !self.contains(v) {
            return Err(GraphError::UnknownVertex(v));
        }
        let a = self.pred(v);
        let b = self.succ(v);
        if a.0 < b.0 {
            out.push(a);
            out.push(b);
        } else {
            out.push(b);
            out.push(a);
        }
        Ok(())
    }

    fn contains(&self, v: VertexId) -> bool {
        v.0 >= 0 && (v.0 as usize) < self.len
    }

    fn vertex_count(&self) -> Option<usize> {
        Some(self.len)
    }

    fn vertices(&self) -> Option<Vec<VertexId>> {
        Some((0..self.len as i64).map(VertexId).collect())
    }

    fn cycle_len(&self) -> Option<usize> {
        Some(self.len)
    }
}

/// One-dimensional integer lattice; the label is the coordinate.
#[derive(Debug, Clone, Default)]
pub struct LineLattice;

impl GraphProvider for LineLattice {
    fn spec_string(&self) -> String {
        "z".into()
    }

    fn degree_bound(&self) -> usize {
        2
    }

    fn neighbors_into(&self, v: VertexId, out: &mut Vec<VertexId>) -> Result<(), GraphError> {
        if v.0 == i64::MIN || v.0 == i64::MAX {
            return Err(GraphError::CoordinateOverflow(v));
        }
        out.push(VertexId(v.0 - 1));
        out.push(VertexId(v.0 + 1));
        Ok(())
    }

    fn contains(&self, _v: VertexId) -> bool {
        true
    }

    fn known_bipartite(&self) -> bool {
        true
    }
}

/// `d`-dimensional integer lattice with coordinates packed 16 bits each into
/// the vertex label. Supports `2 <= d <= 4` and |coordinate| <= 32767, far
/// beyond what a desk-scale walk reaches.
#[derive(Debug, Clone)]
pub struct GridLattice {
    dim: usize,
}

impl GridLattice {
    pub fn new(dim: usize) -> Result<Self, GraphError> {
        if !(2..=4).contains(&dim) {
            return Err(GraphError::BadSpec {
                spec: format!("z{dim}"),
                reason: "grid lattice supports dimensions 2 through 4".into(),
            });
        }
        Ok(Self { dim })
    }

    pub fn encode(&self, coords: &[i32]) -> Result<VertexId, GraphError> {
        assert_eq!(coords.len(), self.dim);
        let mut id: i64 = 0;
        for (i, &c) in coords.iter().enumerate() {
            if !(-32768..=32767).contains(&c) {
                return Err(GraphError::CoordinateOverflow(VertexId(c as i64)));
            }
            id |= ((c as u16) as i64) << (16 * i);
        }
        Ok(VertexId(id))
    }

    pub fn decode(&self, v: VertexId) -> Vec<i32> {
        (0..self.dim)
            .map(|i| ((v.0 >> (16 * i)) as u16) as i16 as i32)
            .collect()
    }
}

impl GraphProvider for GridLattice {
    fn spec_string(&self) -> String {
        format!("z{}", self.dim)
    }

    fn degree_bound(&self) -> usize {
        2 * self.dim
    }

    fn neighbors_into(&self, v: VertexId, out: &mut Vec<VertexId>) -> Result<(), GraphError> {
        if !self.contains(v) {
            return Err(GraphError::UnknownVertex(v));
        }
        let coords = self.decode(v);
        let start = out.len();
        for i in 0..self.dim {
            for step in [-1i32, 1] {
                let mut c = coords.clone();
                c[i] += step;
                out.push(self.encode(&c)?);
            }
        }
        out[start..].sort_unstable();
        Ok(())
    }

    fn contains(&self, v: VertexId) -> bool {
        // Bits above the packed coordinates must be zero.
        let used = 16 * self.dim;
        if used >= 64 {
            return true;
        }
        (v.0 as u64) >> used == 0
    }

    fn known_bipartite(&self) -> bool {
        true
    }
}

/// Infinite graph defined by a user neighbor rule with a declared degree
/// bound. The bound and the ordering contract are checked on every query.
pub struct LazyGraph {
    name: String,
    degree_bound: usize,
    rule: Arc<dyn Fn(VertexId) -> Vec<VertexId> + Send + Sync>,
}

impl LazyGraph {
    pub fn new(
        name: impl Into<String>,
        degree_bound: usize,
        rule: Arc<dyn Fn(VertexId) -> Vec<VertexId> + Send + Sync>,
    ) -> Self {
        Self {
            name: name.into(),
            degree_bound,
            rule,
        }
    }
}

impl GraphProvider for LazyGraph {
    fn spec_string(&self) -> String {
        self.name.clone()
    }

    fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    fn neighbors_into(&self, v: VertexId, out: &mut Vec<VertexId>) -> Result<(), GraphError> {
        let list = (self.rule)(v);
        if list.len() > self.degree_bound {
            return Err(GraphError::DegreeBoundViolated {
                vertex: v,
                found: list.len(),
                bound: self.degree_bound,
            });
        }
        for w in windows_ok(&list) {
            if !w {
                return Err(GraphError::BadSpec {
                    spec: self.name.clone(),
                    reason: format!("neighbor rule at {v} not strictly ascending"),
                });
            }
        }
        if list.contains(&v) {
            return Err(GraphError::SelfLoop(v));
        }
        out.extend_from_slice(&list);
        Ok(())
    }

    fn contains(&self, _v: VertexId) -> bool {
        true
    }
}

fn windows_ok(list: &[VertexId]) -> impl Iterator<Item = bool> + '_ {
    list.windows(2).map(|w| w[0] < w[1])
}

fn preset_triangle() -> Result<ExplicitGraph, GraphError> {
    ExplicitGraph::from_edges("triangle", &[(0, 1), (1, 2), (0, 2)])
}

fn preset_square() -> Result<ExplicitGraph, GraphError> {
    ExplicitGraph::from_edges("square", &[(0, 1), (1, 2), (2, 3), (0, 3)])
}

fn preset_k4() -> Result<ExplicitGraph, GraphError> {
    ExplicitGraph::from_edges("k4", &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
}

/// Names understood by [`parse_graph_spec`], with a short description each.
pub fn registered_graph_specs() -> Vec<(&'static str, &'static str)> {
    vec![
        ("cycle:<len>", "cycle on Z/len, len >= 3"),
        ("z", "one-dimensional integer lattice"),
        ("z2", "two-dimensional integer lattice"),
        ("z3", "three-dimensional integer lattice"),
        ("triangle", "explicit 3-cycle on vertices 0,1,2"),
        ("square", "explicit 4-cycle on vertices 0..4"),
        ("k4", "complete graph on 4 vertices"),
        ("file:<path>", "edge-list file, one \"u v\" pair per line"),
    ]
}

/// Resolve a graph spec string to a provider.
pub fn parse_graph_spec(spec: &str) -> Result<GraphHandle, GraphError> {
    let spec = spec.trim();
    let bad = |reason: &str| GraphError::BadSpec {
        spec: spec.to_string(),
        reason: reason.to_string(),
    };
    match spec {
        "z" => return Ok(Arc::new(LineLattice)),
        "z2" => return Ok(Arc::new(GridLattice::new(2)?)),
        "z3" => return Ok(Arc::new(GridLattice::new(3)?)),
        "z4" => return Ok(Arc::new(GridLattice::new(4)?)),
        "triangle" => return Ok(Arc::new(preset_triangle()?)),
        "square" => return Ok(Arc::new(preset_square()?)),
        "k4" => return Ok(Arc::new(preset_k4()?)),
        _ => {}
    }
    if let Some(rest) = spec.strip_prefix("cycle:") {
        let len: usize = rest.parse().map_err(|_| bad("cycle length must be an integer"))?;
        return Ok(Arc::new(CycleGraph::new(len)?));
    }
    if let Some(path) = spec.strip_prefix("file:") {
        return Ok(Arc::new(ExplicitGraph::from_edge_list_file(Path::new(path))?));
    }
    Err(bad("unknown graph spec"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_neighbors_ascending() {
        let g = CycleGraph::new(5).unwrap();
        assert_eq!(
            g.neighbors(VertexId(0)).unwrap(),
            vec![VertexId(1), VertexId(4)]
        );
        assert_eq!(
            g.neighbors(VertexId(2)).unwrap(),
            vec![VertexId(1), VertexId(3)]
        );
    }

    #[test]
    fn cycle_too_short_rejected() {
        assert!(CycleGraph::new(0).is_err());
        assert!(CycleGraph::new(2).is_err());
        assert!(CycleGraph::new(3).is_ok());
    }

    #[test]
    fn line_lattice_neighbors() {
        let g = LineLattice;
        assert_eq!(
            g.neighbors(VertexId(0)).unwrap(),
            vec![VertexId(-1), VertexId(1)]
        );
    }

    #[test]
    fn triangle_neighbors() {
        let g = preset_triangle().unwrap();
        assert_eq!(
            g.neighbors(VertexId(2)).unwrap(),
            vec![VertexId(0), VertexId(1)]
        );
    }

    #[test]
    fn explicit_unknown_vertex() {
        let g = preset_triangle().unwrap();
        assert!(matches!(
            g.neighbors(VertexId(9)),
            Err(GraphError::UnknownVertex(_))
        ));
    }

    #[test]
    fn grid_roundtrip_and_neighbors() {
        let g = GridLattice::new(2).unwrap();
        let origin = g.encode(&[0, 0]).unwrap();
        let n = g.neighbors(origin).unwrap();
        assert_eq!(n.len(), 4);
        let mut decoded: Vec<Vec<i32>> = n.iter().map(|&v| g.decode(v)).collect();
        decoded.sort();
        assert_eq!(
            decoded,
            vec![vec![-1, 0], vec![0, -1], vec![0, 1], vec![1, 0]]
        );
        let v = g.encode(&[-5, 17]).unwrap();
        assert_eq!(g.decode(v), vec![-5, 17]);
    }

    #[test]
    fn adjacency_symmetry_on_presets() {
        for spec in ["triangle", "square", "k4", "cycle:7"] {
            let g = parse_graph_spec(spec).unwrap();
            for v in g.vertices().unwrap() {
                for u in g.neighbors(v).unwrap() {
                    assert!(
                        g.neighbors(u).unwrap().contains(&v),
                        "{spec}: asymmetry {v} -> {u}"
                    );
                }
                assert!(g.neighbors(v).unwrap().len() <= g.degree_bound());
            }
        }
    }

    #[test]
    fn lazy_degree_bound_enforced() {
        let rule = Arc::new(|v: VertexId| vec![VertexId(v.0 + 1), VertexId(v.0 + 2)]);
        let g = LazyGraph::new("lazy-test", 1, rule);
        assert!(matches!(
            g.neighbors(VertexId(0)),
            Err(GraphError::DegreeBoundViolated { .. })
        ));
    }

    #[test]
    fn edge_list_file_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.txt");
        std::fs::write(&path, "# a triangle\n0 1\n1 2 # closing\n0 2\n\n").unwrap();
        let g = ExplicitGraph::from_edge_list_file(&path).unwrap();
        assert_eq!(g.vertex_count(), Some(3));
        assert_eq!(g.edge_pairs(), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn bad_specs_rejected() {
        assert!(parse_graph_spec("cycle:0").is_err());
        assert!(parse_graph_spec("cycle:x").is_err());
        assert!(parse_graph_spec("nope").is_err());
    }
}
