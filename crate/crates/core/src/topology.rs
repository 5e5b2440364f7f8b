//! Camera-network activity topology.
//!
//! Nodes are cameras with non-overlapping fields of view. A directed edge
//! `a -> b` exists when an object can leave `a` and reach `b` without being
//! seen by any other camera; every undirected link carries one set of
//! [`EdgeParams`] per direction. On top of the graph this module provides
//! q-order neighbourhoods, simple-path enumeration, path mixture weights and
//! border-matrix chaining for higher-order spatio-temporal models.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatiotemporal::TravelTimeModel;

/// Tolerance for row sums of stochastic matrices.
pub const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CameraId(pub usize);

impl fmt::Display for CameraId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index of one frame border of a camera's field of view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Border(pub usize);

/// Dense row-stochastic matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct StochasticMatrix {
    rows: Vec<Vec<f64>>,
}

impl StochasticMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::DimensionMismatch("matrix has no rows".into()));
        }
        let ncols = rows[0].len();
        if ncols == 0 {
            return Err(Error::DimensionMismatch("matrix has no columns".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::DimensionMismatch(format!("row {i} has {} columns, expected {ncols}", row.len())));
            }
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::Config(format!("row {i} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Config(format!("row {i} sums to {sum}, expected 1")));
            }
        }
        Ok(Self { rows })
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Self { rows }
    }

    /// Every row uniform over `ncols` columns.
    pub fn uniform(nrows: usize, ncols: usize) -> Self {
        Self { rows: vec![vec![1.0 / ncols as f64; ncols]; nrows] }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.rows[r]
    }

    pub fn get(&self, r: usize, c: usize) -> Option<f64> {
        self.rows.get(r).and_then(|row| row.get(c)).copied()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn transpose_rows(&self) -> Vec<Vec<f64>> {
        (0..self.ncols()).map(|c| self.rows.iter().map(|r| r[c]).collect()).collect()
    }

    pub fn matmul(&self, rhs: &StochasticMatrix) -> Result<StochasticMatrix> {
        if self.ncols() != rhs.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.nrows(),
                self.ncols(),
                rhs.nrows(),
                rhs.ncols()
            )));
        }
        let rows = self
            .rows
            .iter()
            .map(|lrow| (0..rhs.ncols()).map(|c| lrow.iter().zip(&rhs.rows).map(|(a, r)| a * r[c]).sum()).collect())
            .collect();
        Ok(StochasticMatrix { rows })
    }

    pub fn max_row_sum_error(&self) -> f64 {
        self.rows.iter().map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }
}

impl TryFrom<TopologySpec> for Topology {
    type Error = Error;
    fn try_from(spec: TopologySpec) -> Result<Self> {
        Self::from_spec(spec)
    }
}

impl From<Topology> for TopologySpec {
    fn from(t: Topology) -> Self {
        t.to_spec()
    }
}

impl TryFrom<Vec<Vec<f64>>> for StochasticMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<StochasticMatrix> for Vec<Vec<f64>> {
    fn from(m: StochasticMatrix) -> Self {
        m.rows
    }
}

/// Parameters of one directed edge `from -> to`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeParams {
    /// Minimum admissible travel time.
    pub min_travel: f64,
    pub mean_travel: f64,
    pub travel_var: f64,
    /// Probability that an object leaving `from` heads along this edge.
    pub transition_prob: f64,
    /// `p(entry border at to | exit border at from)`, shape `borders(from) x borders(to)`.
    pub border_matrix: StochasticMatrix,
}

impl EdgeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.travel_var > 0.0 && self.travel_var.is_finite()) {
            return Err(Error::Config(format!("travel_var must be > 0, got {}", self.travel_var)));
        }
        if !(self.min_travel >= 0.0 && self.min_travel.is_finite()) {
            return Err(Error::Config(format!("min_travel must be >= 0, got {}", self.min_travel)));
        }
        if !(self.mean_travel >= self.min_travel) {
            return Err(Error::Config(format!(
                "mean_travel {} below min_travel {}",
                self.mean_travel, self.min_travel
            )));
        }
        if !(0.0..=1.0).contains(&self.transition_prob) {
            return Err(Error::Config(format!("transition_prob must lie in [0,1], got {}", self.transition_prob)));
        }
        Ok(())
    }

    pub fn travel_model(&self) -> TravelTimeModel {
        TravelTimeModel { min_travel: self.min_travel, mean_travel: self.mean_travel, travel_var: self.travel_var }
    }
}

/// Appearance distortion at one camera site: a per-channel brightness gain
/// plus additive noise on the observed histogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteCondition {
    /// One gain per channel; an empty list means unit gain on every channel.
    #[serde(default)]
    pub gains: Vec<f64>,
    /// Whole-bin brightness offset per channel, applied after the gain.
    #[serde(default)]
    pub offsets: Vec<i32>,
    #[serde(default)]
    pub noise: f64,
}

impl Default for SiteCondition {
    fn default() -> Self {
        Self { gains: Vec::new(), offsets: Vec::new(), noise: 0.0 }
    }
}

impl SiteCondition {
    pub fn gain(&self, channel: usize) -> f64 {
        self.gains.get(channel).copied().unwrap_or(1.0)
    }

    pub fn offset(&self, channel: usize) -> i32 {
        self.offsets.get(channel).copied().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraParams {
    pub borders: usize,
    /// `p(exit border | entry border)` within this camera's field of view.
    pub traversal: StochasticMatrix,
    #[serde(default)]
    pub condition: SiteCondition,
}

impl CameraParams {
    /// Camera whose objects leave through a uniformly chosen border.
    pub fn uniform(borders: usize) -> Self {
        Self { borders, traversal: StochasticMatrix::uniform(borders, borders), condition: SiteCondition::default() }
    }
}

/// Simple path from `nodes[0]` to `nodes[last]`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path {
    pub nodes: Vec<CameraId>,
}

impl Path {
    /// Number of intermediate cameras.
    pub fn order(&self) -> usize {
        self.nodes.len().saturating_sub(2)
    }

    pub fn src(&self) -> CameraId {
        self.nodes[0]
    }

    pub fn dst(&self) -> CameraId {
        *self.nodes.last().expect("path has at least two nodes")
    }

    pub fn edges(&self) -> impl Iterator<Item = (CameraId, CameraId)> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.nodes.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join("-"))
    }
}

/// One directed edge in serialized form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: CameraId,
    pub to: CameraId,
    #[serde(flatten)]
    pub params: EdgeParams,
}

/// Serialized topology: cameras indexed by position plus directed edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub cameras: Vec<CameraParams>,
    pub edges: Vec<EdgeSpec>,
}

/// Immutable camera graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TopologySpec", into = "TopologySpec")]
pub struct Topology {
    cameras: Vec<CameraParams>,
    edges: BTreeMap<(CameraId, CameraId), EdgeParams>,
    adjacency: Vec<BTreeSet<CameraId>>,
}

impl Topology {
    /// Builds and validates a topology from directed edges. Every link must be
    /// declared in both directions.
    pub fn new(
        cameras: Vec<CameraParams>,
        directed_edges: impl IntoIterator<Item = (CameraId, CameraId, EdgeParams)>,
    ) -> Result<Self> {
        if cameras.is_empty() {
            return Err(Error::Config("topology needs at least one camera".into()));
        }
        for (i, cam) in cameras.iter().enumerate() {
            if cam.borders == 0 {
                return Err(Error::Config(format!("camera {i} declares no borders")));
            }
            if cam.traversal.nrows() != cam.borders || cam.traversal.ncols() != cam.borders {
                return Err(Error::DimensionMismatch(format!(
                    "camera {i}: traversal matrix is {}x{}, expected {}x{}",
                    cam.traversal.nrows(),
                    cam.traversal.ncols(),
                    cam.borders,
                    cam.borders
                )));
            }
        }
        let n = cameras.len();
        let mut edges = BTreeMap::new();
        let mut adjacency = vec![BTreeSet::new(); n];
        for (a, b, params) in directed_edges {
            if a.0 >= n {
                return Err(Error::UnknownCamera(a));
            }
            if b.0 >= n {
                return Err(Error::UnknownCamera(b));
            }
            if a == b {
                return Err(Error::Config(format!("self-edge on camera {a}")));
            }
            params.validate().map_err(|e| Error::Config(format!("edge {a}->{b}: {e}")))?;
            let m = &params.border_matrix;
            if m.nrows() != cameras[a.0].borders || m.ncols() != cameras[b.0].borders {
                return Err(Error::DimensionMismatch(format!(
                    "edge {a}->{b}: border matrix is {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    cameras[a.0].borders,
                    cameras[b.0].borders
                )));
            }
            if edges.insert((a, b), params).is_some() {
                return Err(Error::Config(format!("duplicate edge {a}->{b}")));
            }
            adjacency[a.0].insert(b);
            adjacency[b.0].insert(a);
        }
        for &(a, b) in edges.keys() {
            if !edges.contains_key(&(b, a)) {
                return Err(Error::Config(format!("edge {a}->{b} has no reverse direction {b}->{a}")));
            }
        }
        for (i, _) in cameras.iter().enumerate() {
            let out: f64 = edges
                .range((CameraId(i), CameraId(0))..=(CameraId(i), CameraId(usize::MAX)))
                .map(|(_, p)| p.transition_prob)
                .sum();
            if out > 1.0 + ROW_SUM_TOL {
                return Err(Error::InconsistentTopology(format!(
                    "outgoing transition probabilities of camera {i} sum to {out} > 1"
                )));
            }
        }
        let topo = Self { cameras, edges, adjacency };
        if !topo.is_connected() {
            log::warn!("camera topology is not connected");
        }
        Ok(topo)
    }

    pub fn from_spec(spec: TopologySpec) -> Result<Self> {
        Self::new(spec.cameras, spec.edges.into_iter().map(|e| (e.from, e.to, e.params)))
    }

    pub fn to_spec(&self) -> TopologySpec {
        TopologySpec {
            cameras: self.cameras.clone(),
            edges: self.edges().map(|(from, to, p)| EdgeSpec { from, to, params: p.clone() }).collect(),
        }
    }

    pub fn num_cameras(&self) -> usize {
        self.cameras.len()
    }

    pub fn camera_ids(&self) -> impl Iterator<Item = CameraId> {
        (0..self.cameras.len()).map(CameraId)
    }

    pub fn camera(&self, id: CameraId) -> Result<&CameraParams> {
        self.cameras.get(id.0).ok_or(Error::UnknownCamera(id))
    }

    pub fn cameras(&self) -> &[CameraParams] {
        &self.cameras
    }

    pub fn edge(&self, from: CameraId, to: CameraId) -> Option<&EdgeParams> {
        self.edges.get(&(from, to))
    }

    pub fn edges(&self) -> impl Iterator<Item = (CameraId, CameraId, &EdgeParams)> {
        self.edges.iter().map(|(&(a, b), p)| (a, b, p))
    }

    /// Returns a copy with the parameters of `from -> to` replaced.
    pub fn with_edge(&self, from: CameraId, to: CameraId, params: EdgeParams) -> Result<Self> {
        if !self.edges.contains_key(&(from, to)) {
            return Err(Error::Config(format!("no edge {from}->{to} to replace")));
        }
        let mut edges: Vec<_> = self.edges().map(|(a, b, p)| (a, b, p.clone())).collect();
        for e in edges.iter_mut() {
            if e.0 == from && e.1 == to {
                e.2 = params.clone();
            }
        }
        Self::new(self.cameras.clone(), edges)
    }

    pub fn adjacent(&self, u: CameraId) -> Result<&BTreeSet<CameraId>> {
        self.adjacency.get(u.0).ok_or(Error::UnknownCamera(u))
    }

    pub fn is_connected(&self) -> bool {
        let reach = self.bfs_depths(CameraId(0), usize::MAX);
        reach.len() == self.cameras.len()
    }

    fn bfs_depths(&self, start: CameraId, max_hops: usize) -> BTreeMap<CameraId, usize> {
        let mut seen = BTreeMap::new();
        seen.insert(start, 0usize);
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            let d = seen[&v];
            if d == max_hops {
                continue;
            }
            for &w in &self.adjacency[v.0] {
                if let std::collections::btree_map::Entry::Vacant(e) = seen.entry(w) {
                    e.insert(d + 1);
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    /// Cameras reachable from `u` through at most `q` intermediate cameras,
    /// excluding `u` itself. `q = 0` gives the adjacency set.
    pub fn neighbors(&self, u: CameraId, q: usize) -> Result<BTreeSet<CameraId>> {
        if u.0 >= self.cameras.len() {
            return Err(Error::UnknownCamera(u));
        }
        let mut set: BTreeSet<CameraId> = self.bfs_depths(u, q.saturating_add(1)).into_keys().collect();
        set.remove(&u);
        Ok(set)
    }

    /// All simple paths `src -> dst` with at most `q` intermediate cameras,
    /// ordered by length then lexicographically by camera id.
    pub fn enumerate_paths(&self, src: CameraId, dst: CameraId, q: usize) -> Vec<Path> {
        let n = self.cameras.len();
        if src == dst || src.0 >= n || dst.0 >= n {
            return Vec::new();
        }
        let max_edges = q.saturating_add(1);
        let mut out = Vec::new();
        let mut stack = vec![src];
        let mut on_path = vec![false; n];
        on_path[src.0] = true;
        self.dfs_paths(dst, max_edges, &mut stack, &mut on_path, &mut out);
        out.sort_by(|a, b| a.nodes.len().cmp(&b.nodes.len()).then_with(|| a.nodes.cmp(&b.nodes)));
        out
    }

    fn dfs_paths(
        &self,
        dst: CameraId,
        max_edges: usize,
        stack: &mut Vec<CameraId>,
        on_path: &mut [bool],
        out: &mut Vec<Path>,
    ) {
        let last = *stack.last().expect("non-empty stack");
        if stack.len() > max_edges {
            return;
        }
        for (&(a, b), _) in self.edges.range((last, CameraId(0))..=(last, CameraId(usize::MAX))) {
            debug_assert_eq!(a, last);
            if on_path[b.0] {
                continue;
            }
            if b == dst {
                let mut nodes = stack.clone();
                nodes.push(b);
                out.push(Path { nodes });
                continue;
            }
            on_path[b.0] = true;
            stack.push(b);
            self.dfs_paths(dst, max_edges, stack, on_path, out);
            stack.pop();
            on_path[b.0] = false;
        }
    }

    /// Mixture weights: product of transition probabilities along each path,
    /// normalized over the given path set.
    pub fn path_weights(&self, paths: &[Path]) -> Result<Vec<f64>> {
        if paths.is_empty() {
            return Ok(Vec::new());
        }
        let (src, dst) = (paths[0].src(), paths[0].dst());
        let mut raw = Vec::with_capacity(paths.len());
        for p in paths {
            if p.src() != src || p.dst() != dst {
                return Err(Error::Config(format!("path {p} does not share endpoints {src}->{dst}")));
            }
            let mut prod = 1.0;
            for (a, b) in p.edges() {
                let e = self.edge(a, b).ok_or_else(|| Error::Config(format!("path {p} uses missing edge {a}->{b}")))?;
                prod *= e.transition_prob;
            }
            raw.push(prod);
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(Error::InconsistentTopology(format!(
                "every path {src}->{dst} has zero transition probability"
            )));
        }
        Ok(raw.into_iter().map(|w| w / total).collect())
    }

    /// Border factor of a path: the edge border matrices chained through the
    /// traversal matrix of every intermediate camera.
    pub fn chain_border_matrix(&self, path: &Path) -> Result<StochasticMatrix> {
        if path.nodes.len() < 2 {
            return Err(Error::Config("path needs at least two cameras".into()));
        }
        let mut acc: Option<StochasticMatrix> = None;
        for (i, (a, b)) in path.edges().enumerate() {
            let edge =
                self.edge(a, b).ok_or_else(|| Error::Config(format!("path {path} uses missing edge {a}->{b}")))?;
            acc = Some(match acc {
                None => edge.border_matrix.clone(),
                Some(m) => {
                    let through = &self.camera(path.nodes[i])?.traversal;
                    m.matmul(through)?.matmul(&edge.border_matrix)?
                }
            });
        }
        Ok(acc.expect("at least one edge"))
    }

    /// Travel-time model of a path: Δ, δ and R summed over its edges.
    pub fn path_travel_model(&self, path: &Path) -> Result<TravelTimeModel> {
        let mut m = TravelTimeModel { min_travel: 0.0, mean_travel: 0.0, travel_var: 0.0 };
        for (a, b) in path.edges() {
            let e = self.edge(a, b).ok_or_else(|| Error::Config(format!("path {path} uses missing edge {a}->{b}")))?;
            m.min_travel += e.min_travel;
            m.mean_travel += e.mean_travel;
            m.travel_var += e.travel_var;
        }
        Ok(m)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn edge(prob: f64, borders_from: usize, borders_to: usize) -> EdgeParams {
        EdgeParams {
            min_travel: 1.0,
            mean_travel: 10.0,
            travel_var: 4.0,
            transition_prob: prob,
            border_matrix: StochasticMatrix::uniform(borders_from, borders_to),
        }
    }

    /// Undirected graph with uniform single-border cameras.
    pub(crate) fn graph(n: usize, links: &[(usize, usize, f64)]) -> Topology {
        let cams = vec![CameraParams::uniform(1); n];
        let mut edges = Vec::new();
        for &(a, b, p) in links {
            edges.push((CameraId(a), CameraId(b), edge(p, 1, 1)));
            edges.push((CameraId(b), CameraId(a), edge(p, 1, 1)));
        }
        Topology::new(cams, edges).unwrap()
    }

    fn ids(v: &[usize]) -> BTreeSet<CameraId> {
        v.iter().map(|&i| CameraId(i)).collect()
    }

    fn path(v: &[usize]) -> Path {
        Path { nodes: v.iter().map(|&i| CameraId(i)).collect() }
    }

    #[test]
    fn neighbors_on_path_graph() {
        let t = graph(3, &[(0, 1, 0.5), (1, 2, 0.5)]);
        assert_eq!(t.neighbors(CameraId(1), 0).unwrap(), ids(&[0, 2]));
        assert_eq!(t.neighbors(CameraId(0), 1).unwrap(), ids(&[1, 2]));
        assert_eq!(t.neighbors(CameraId(0), 0).unwrap(), ids(&[1]));
    }

    #[test]
    fn single_node_has_no_neighbors() {
        let t = graph(1, &[]);
        assert!(t.neighbors(CameraId(0), 0).unwrap().is_empty());
        assert!(matches!(t.neighbors(CameraId(3), 0), Err(Error::UnknownCamera(_))));
    }

    #[test]
    fn triangle_paths() {
        let t = graph(3, &[(0, 1, 0.3), (1, 2, 0.3), (0, 2, 0.3)]);
        assert_eq!(t.enumerate_paths(CameraId(0), CameraId(2), 0), vec![path(&[0, 2])]);
        assert_eq!(t.enumerate_paths(CameraId(0), CameraId(2), 1), vec![path(&[0, 2]), path(&[0, 1, 2])]);
    }

    #[test]
    fn disconnected_pair_has_no_paths() {
        let t = graph(4, &[(0, 1, 0.5), (2, 3, 0.5)]);
        assert!(t.enumerate_paths(CameraId(0), CameraId(3), 2).is_empty());
        assert!(!t.is_connected());
    }

    #[test]
    fn weights_normalize_products() {
        let t = graph(3, &[(0, 1, 0.5), (1, 2, 0.2), (0, 2, 0.3)]);
        let paths = t.enumerate_paths(CameraId(0), CameraId(2), 1);
        // products 0.3 and 0.5 * 0.2 = 0.1
        let w = t.path_weights(&paths).unwrap();
        assert!((w[0] - 0.75).abs() < 1e-15);
        assert!((w[1] - 0.25).abs() < 1e-15);
        assert_eq!(t.path_weights(&paths[..1]).unwrap(), vec![1.0]);
    }

    #[test]
    fn zero_transition_annihilates_path() {
        let t = graph(3, &[(0, 1, 0.0), (1, 2, 0.5), (0, 2, 0.3)]);
        let paths = t.enumerate_paths(CameraId(0), CameraId(2), 1);
        let w = t.path_weights(&paths).unwrap();
        assert_eq!(w, vec![1.0, 0.0]);
        let t0 = graph(2, &[(0, 1, 0.0)]);
        let p = t0.enumerate_paths(CameraId(0), CameraId(1), 0);
        assert!(matches!(t0.path_weights(&p), Err(Error::InconsistentTopology(_))));
    }

    fn two_border_chain(traversal: Vec<Vec<f64>>) -> Topology {
        let cam = |t: Vec<Vec<f64>>| CameraParams {
            borders: 2,
            traversal: StochasticMatrix::new(t).unwrap(),
            condition: SiteCondition::default(),
        };
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let cams = vec![cam(id.clone()), cam(traversal), cam(id.clone())];
        let e = |m: Vec<Vec<f64>>| EdgeParams {
            min_travel: 0.0,
            mean_travel: 5.0,
            travel_var: 1.0,
            transition_prob: 0.5,
            border_matrix: StochasticMatrix::new(m).unwrap(),
        };
        let edges = vec![
            (CameraId(0), CameraId(1), e(id.clone())),
            (CameraId(1), CameraId(0), e(id.clone())),
            (CameraId(1), CameraId(2), e(id.clone())),
            (CameraId(2), CameraId(1), e(id.clone())),
        ];
        Topology::new(cams, edges).unwrap()
    }

    #[test]
    fn chain_border_matrix_cases() {
        let t = two_border_chain(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let direct = t.chain_border_matrix(&path(&[0, 1])).unwrap();
        assert_eq!(&direct, &t.edge(CameraId(0), CameraId(1)).unwrap().border_matrix);
        let chained = t.chain_border_matrix(&path(&[0, 1, 2])).unwrap();
        assert_eq!(chained.rows(), &[vec![0.0, 1.0], vec![1.0, 0.0]]);

        let ident = two_border_chain(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let chained = ident.chain_border_matrix(&path(&[0, 1, 2])).unwrap();
        assert_eq!(chained, StochasticMatrix::identity(2));
    }

    #[test]
    fn path_travel_model_sums_edges() {
        let t = graph(3, &[(0, 1, 0.5), (1, 2, 0.5)]);
        let m = t.path_travel_model(&path(&[0, 1, 2])).unwrap();
        assert_eq!((m.min_travel, m.mean_travel, m.travel_var), (2.0, 20.0, 8.0));
    }

    #[test]
    fn spec_round_trip() {
        let t = graph(3, &[(0, 1, 0.5), (1, 2, 0.25)]);
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(serde_json::from_str::<Topology>(&json).unwrap(), t);
        let text = toml::to_string(&t.to_spec()).unwrap();
        assert_eq!(Topology::from_spec(toml::from_str(&text).unwrap()).unwrap(), t);
    }

    #[test]
    fn rejects_bad_configs() {
        let cams = vec![CameraParams::uniform(1); 2];
        let self_edge = Topology::new(cams.clone(), vec![(CameraId(0), CameraId(0), edge(0.5, 1, 1))]);
        assert!(matches!(self_edge, Err(Error::Config(_))));
        let one_way = Topology::new(cams.clone(), vec![(CameraId(0), CameraId(1), edge(0.5, 1, 1))]);
        assert!(one_way.is_err());
        let bad_dims = Topology::new(
            cams.clone(),
            vec![(CameraId(0), CameraId(1), edge(0.5, 2, 1)), (CameraId(1), CameraId(0), edge(0.5, 1, 1))],
        );
        assert!(matches!(bad_dims, Err(Error::DimensionMismatch(_))));
        let mut bad_var = edge(0.5, 1, 1);
        bad_var.travel_var = 0.0;
        assert!(bad_var.validate().is_err());
        assert!(StochasticMatrix::new(vec![vec![0.5, 0.4]]).is_err());
        let unknown = Topology::new(cams, vec![(CameraId(0), CameraId(5), edge(0.5, 1, 1))]);
        assert!(matches!(unknown, Err(Error::UnknownCamera(CameraId(5)))));
    }
}
