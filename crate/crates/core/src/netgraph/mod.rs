//! Directed influence graphs over coordinate node sets.
//!
//! Node indices are 1-based in every public signature. An edge `(i, j)`
//! means node `i` influences node `j`, i.e. the state matrix has a nonzero
//! entry in row `j`, column `i`.

mod flow;
pub(crate) mod laplacian;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use laplacian::{laplacian_from_adjacency, Laplacian};

/// Sorted set of 1-based node indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeSet(BTreeSet<usize>);

impl NodeSet {
    pub fn new() -> Self {
        Self(BTreeSet::new())
    }

    /// All nodes `1..=n`.
    pub fn full(n: usize) -> Self {
        (1..=n).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.0.contains(&node)
    }

    pub fn insert(&mut self, node: usize) -> bool {
        self.0.insert(node)
    }

    pub fn remove(&mut self, node: usize) -> bool {
        self.0.remove(&node)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn union(&self, other: &NodeSet) -> NodeSet {
        self.0.union(&other.0).copied().collect()
    }

    pub fn intersection(&self, other: &NodeSet) -> NodeSet {
        self.0.intersection(&other.0).copied().collect()
    }

    pub fn difference(&self, other: &NodeSet) -> NodeSet {
        self.0.difference(&other.0).copied().collect()
    }

    pub fn is_subset(&self, other: &NodeSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn is_disjoint(&self, other: &NodeSet) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn max(&self) -> Option<usize> {
        self.0.iter().next_back().copied()
    }
}

impl FromIterator<usize> for NodeSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl<const N: usize> From<[usize; N]> for NodeSet {
    fn from(nodes: [usize; N]) -> Self {
        nodes.into_iter().collect()
    }
}

impl From<Vec<usize>> for NodeSet {
    fn from(nodes: Vec<usize>) -> Self {
        nodes.into_iter().collect()
    }
}

impl<'a> IntoIterator for &'a NodeSet {
    type Item = usize;
    type IntoIter = std::iter::Copied<std::collections::btree_set::Iter<'a, usize>>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter().copied()
    }
}

impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, v) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

/// Result of [`InfluenceGraph::min_actuator_placement`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    /// Minimum-cardinality admissible vertex cut between disturbances and targets.
    pub actuators: NodeSet,
    /// Maximal controlled invariant node set outside the targets for `actuators`.
    pub core: NodeSet,
}

/// Weighted digraph of state-to-state influence.
#[derive(Clone, Debug, PartialEq)]
pub struct InfluenceGraph {
    n: usize,
    /// 0-based heads with weights, sorted by head.
    out: Vec<Vec<(usize, f64)>>,
    /// 0-based tails, sorted.
    inc: Vec<Vec<usize>>,
    labels: Vec<String>,
    admissible: Vec<bool>,
}

impl InfluenceGraph {
    /// Graph on `n` nodes without edges, every node admissible and labelled by its index.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            out: vec![Vec::new(); n],
            inc: vec![Vec::new(); n],
            labels: (1..=n).map(|i| i.to_string()).collect(),
            admissible: vec![true; n],
        }
    }

    /// Builds the influence graph of a square matrix: edge `(i, j)` for every
    /// off-diagonal nonzero `a[(j-1, i-1)]`.
    pub fn from_matrix(a: &DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension {
                expected: "square matrix".into(),
                got: format!("{}x{}", a.nrows(), a.ncols()),
            });
        }
        let n = a.nrows();
        let mut g = Self::new(n);
        for tail in 0..n {
            for head in 0..n {
                let w = a[(head, tail)];
                if tail != head && w != 0.0 {
                    g.push_edge(tail, head, w);
                }
            }
        }
        Ok(g)
    }

    /// Builds a graph from 1-based `(tail, head, weight)` triples.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut g = Self::new(n);
        for &(tail, head, w) in edges {
            g.add_edge(tail, head, w)?;
        }
        Ok(g)
    }

    /// Adds or overwrites edge `tail -> head`. Self-loops and zero weights are ignored.
    pub fn add_edge(&mut self, tail: usize, head: usize, weight: f64) -> Result<()> {
        self.check_node(tail)?;
        self.check_node(head)?;
        if tail != head && weight != 0.0 {
            self.push_edge(tail - 1, head - 1, weight);
        }
        Ok(())
    }

    fn push_edge(&mut self, tail: usize, head: usize, weight: f64) {
        let outs = &mut self.out[tail];
        match outs.binary_search_by_key(&head, |&(h, _)| h) {
            Ok(pos) => outs[pos].1 = weight,
            Err(pos) => {
                outs.insert(pos, (head, weight));
                let ins = &mut self.inc[head];
                let p = ins.binary_search(&tail).unwrap_or_else(|p| p);
                ins.insert(p, tail);
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    /// 1-based `(tail, head, weight)` triples in ascending order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(t, hs)| hs.iter().map(move |&(h, w)| (t + 1, h + 1, w)))
            .collect()
    }

    pub fn has_edge(&self, tail: usize, head: usize) -> bool {
        tail >= 1
            && tail <= self.n
            && self.out[tail - 1]
                .binary_search_by_key(&(head.wrapping_sub(1)), |&(h, _)| h)
                .is_ok()
    }

    pub fn successors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.out[node - 1].iter().map(|&(h, _)| h + 1)
    }

    pub fn predecessors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.inc[node - 1].iter().map(|&t| t + 1)
    }

    pub fn label(&self, node: usize) -> &str {
        &self.labels[node - 1]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn set_labels(&mut self, labels: Vec<String>) -> Result<()> {
        if labels.len() != self.n {
            return Err(Error::Dimension {
                expected: format!("{} labels", self.n),
                got: labels.len().to_string(),
            });
        }
        self.labels = labels;
        Ok(())
    }

    pub fn is_admissible(&self, node: usize) -> bool {
        self.admissible[node - 1]
    }

    pub fn admissible(&self) -> NodeSet {
        (1..=self.n).filter(|&v| self.admissible[v - 1]).collect()
    }

    /// Replaces the admissible-actuator flags: exactly the members of `set` become admissible.
    pub fn set_admissible(&mut self, set: &NodeSet) -> Result<()> {
        let mask = self.mask(set)?;
        self.admissible = mask;
        Ok(())
    }

    fn check_node(&self, node: usize) -> Result<()> {
        if node == 0 || node > self.n {
            Err(Error::NodeOutOfRange { node, n: self.n })
        } else {
            Ok(())
        }
    }

    fn mask(&self, set: &NodeSet) -> Result<Vec<bool>> {
        let mut m = vec![false; self.n];
        for v in set {
            self.check_node(v)?;
            m[v - 1] = true;
        }
        Ok(m)
    }

    fn set_of(mask: &[bool]) -> NodeSet {
        mask.iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i + 1)
            .collect()
    }

    /// Exterior nodes that receive an edge from `w`.
    pub fn out_boundary(&self, w: &NodeSet) -> Result<NodeSet> {
        let inside = self.mask(w)?;
        let mut res = vec![false; self.n];
        for v in w {
            for &(h, _) in &self.out[v - 1] {
                if !inside[h] {
                    res[h] = true;
                }
            }
        }
        Ok(Self::set_of(&res))
    }

    /// Interior nodes of `w` with an edge leaving `w`.
    pub fn in_boundary(&self, w: &NodeSet) -> Result<NodeSet> {
        let inside = self.mask(w)?;
        Ok(w.iter()
            .filter(|&v| self.out[v - 1].iter().any(|&(h, _)| !inside[h]))
            .collect())
    }

    fn bfs(&self, seeds: &[bool], forward: bool) -> Vec<bool> {
        let mut seen = seeds.to_vec();
        let mut queue: VecDeque<usize> = (0..self.n).filter(|&v| seen[v]).collect();
        while let Some(v) = queue.pop_front() {
            let next: Box<dyn Iterator<Item = usize>> = if forward {
                Box::new(self.out[v].iter().map(|&(h, _)| h))
            } else {
                Box::new(self.inc[v].iter().copied())
            };
            for u in next {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen
    }

    /// Nodes reachable from `s` along edge direction, including `s`.
    pub fn forward_reach(&self, s: &NodeSet) -> Result<NodeSet> {
        let seeds = self.mask(s)?;
        Ok(Self::set_of(&self.bfs(&seeds, true)))
    }

    /// Nodes that can reach `s`, including `s`.
    pub fn backward_reach(&self, s: &NodeSet) -> Result<NodeSet> {
        let seeds = self.mask(s)?;
        Ok(Self::set_of(&self.bfs(&seeds, false)))
    }

    /// Every node lying on some walk from `d` to `t`: `forward_reach(d) ∩ backward_reach(t)`.
    ///
    /// This contains the union of all simple `d`-to-`t` paths and may be larger.
    pub fn paths_union(&self, d: &NodeSet, t: &NodeSet) -> Result<NodeSet> {
        let overlap = d.intersection(t);
        if !overlap.is_empty() {
            return Err(Error::Overlap(overlap.to_vec()));
        }
        Ok(self
            .forward_reach(d)?
            .intersection(&self.backward_reach(t)?))
    }

    /// Every edge leaving `z` lands in `z ∪ b`.
    pub fn is_controlled_invariant(&self, z: &NodeSet, b: &NodeSet) -> Result<bool> {
        let inz = self.mask(z)?;
        let inb = self.mask(b)?;
        Ok(z.iter()
            .all(|v| self.out[v - 1].iter().all(|&(h, _)| inz[h] || inb[h])))
    }

    /// Every edge whose tail is in `s ∖ c` stays in `s`.
    pub fn is_conditioned_invariant(&self, s: &NodeSet, c: &NodeSet) -> Result<bool> {
        let ins = self.mask(s)?;
        let inc = self.mask(c)?;
        Ok(s.iter()
            .filter(|&v| !inc[v - 1])
            .all(|v| self.out[v - 1].iter().all(|&(h, _)| ins[h])))
    }

    /// Largest subset of `z0` that is controlled invariant for inputs `b`.
    ///
    /// Fixed point: nodes with an out-edge whose head lies outside `Z ∪ b`
    /// are deleted until no deletion applies.
    pub fn max_controlled_invariant(&self, z0: &NodeSet, b: &NodeSet) -> Result<NodeSet> {
        let mut inz = self.mask(z0)?;
        let inb = self.mask(b)?;
        loop {
            let doomed: Vec<usize> = (0..self.n)
                .filter(|&v| inz[v] && self.out[v].iter().any(|&(h, _)| !inz[h] && !inb[h]))
                .collect();
            if doomed.is_empty() {
                break;
            }
            for v in doomed {
                inz[v] = false;
            }
        }
        Ok(Self::set_of(&inz))
    }

    /// Smallest superset of `s0` that is conditioned invariant for sensors `c`.
    pub fn min_conditioned_invariant(&self, s0: &NodeSet, c: &NodeSet) -> Result<NodeSet> {
        let mut ins = self.mask(s0)?;
        let inc = self.mask(c)?;
        let mut queue: VecDeque<usize> = (0..self.n).filter(|&v| ins[v]).collect();
        while let Some(v) = queue.pop_front() {
            if inc[v] {
                continue;
            }
            for &(h, _) in &self.out[v] {
                if !ins[h] {
                    ins[h] = true;
                    queue.push_back(h);
                }
            }
        }
        Ok(Self::set_of(&ins))
    }

    /// Minimum admissible actuator set separating `d` from `t`.
    ///
    /// Solved as a unit-capacity vertex cut by maximum flow on the split graph.
    /// Among minimum cuts the one closest to the targets is returned, so the
    /// returned core is as large as possible.
    pub fn min_actuator_placement(&self, d: &NodeSet, t: &NodeSet) -> Result<Placement> {
        let ind = self.mask(d)?;
        let int = self.mask(t)?;
        let overlap = d.intersection(t);
        if !overlap.is_empty() {
            return Err(Error::Overlap(overlap.to_vec()));
        }
        let cuttable: Vec<bool> = (0..self.n)
            .map(|v| self.admissible[v] && !ind[v] && !int[v])
            .collect();

        if let Some(path) = self.uncuttable_path(&ind, &int, &cuttable) {
            return Err(Error::Infeasible { path });
        }

        let cut = flow::sink_side_vertex_cut(self.n, &self.out, &ind, &int, &cuttable);
        let actuators = Self::set_of(&cut);
        let outside_targets = NodeSet::full(self.n).difference(t);
        let core = self.max_controlled_invariant(&outside_targets, &actuators)?;

        if !d.is_subset(&core) || self.out_boundary(&core)? != actuators {
            return Err(Error::Precondition(format!(
                "vertex cut {actuators} is not the out-boundary of its core {core}"
            )));
        }
        Ok(Placement { actuators, core })
    }

    /// A `d`-to-`t` path through non-cuttable nodes only, if one exists.
    fn uncuttable_path(&self, ind: &[bool], int: &[bool], cuttable: &[bool]) -> Option<Vec<usize>> {
        let mut parent: Vec<Option<usize>> = vec![None; self.n];
        let mut seen = ind.to_vec();
        let mut queue: VecDeque<usize> = (0..self.n).filter(|&v| ind[v]).collect();
        while let Some(v) = queue.pop_front() {
            for &(h, _) in &self.out[v] {
                if seen[h] || cuttable[h] {
                    continue;
                }
                seen[h] = true;
                parent[h] = Some(v);
                if int[h] {
                    let mut path = vec![h + 1];
                    let mut cur = h;
                    while let Some(p) = parent[cur] {
                        path.push(p + 1);
                        cur = p;
                    }
                    path.reverse();
                    return Some(path);
                }
                queue.push_back(h);
            }
        }
        None
    }

    /// Graphical output-feedback decoupling condition: after removing every
    /// sensor-to-actuator edge `(c, b)`, no target is reachable from `d`.
    pub fn ddpof_structural_check(
        &self,
        d: &NodeSet,
        t: &NodeSet,
        b: &NodeSet,
        c: &NodeSet,
    ) -> Result<bool> {
        let ind = self.mask(d)?;
        let int = self.mask(t)?;
        let inb = self.mask(b)?;
        let inc = self.mask(c)?;
        let mut seen = ind.clone();
        let mut queue: VecDeque<usize> = (0..self.n).filter(|&v| ind[v]).collect();
        while let Some(v) = queue.pop_front() {
            for &(h, _) in &self.out[v] {
                if inc[v] && inb[h] {
                    continue;
                }
                if !seen[h] {
                    seen[h] = true;
                    queue.push_back(h);
                }
            }
        }
        Ok(!(0..self.n).any(|v| seen[v] && int[v]))
    }

    pub fn to_json_file(&self) -> GraphFile {
        GraphFile {
            n: self.n,
            edges: self.edges(),
            admissible: self.admissible().to_vec(),
            labels: self
                .labels
                .iter()
                .enumerate()
                .map(|(i, l)| ((i + 1).to_string(), l.clone()))
                .collect(),
        }
    }

    pub fn from_json_file(file: &GraphFile) -> Result<Self> {
        let mut g = Self::from_edges(file.n, &file.edges)?;
        g.set_admissible(&file.admissible.iter().copied().collect())?;
        for (key, label) in &file.labels {
            let node: usize = key.parse().map_err(|_| {
                Error::Precondition(format!("label key {key:?} is not a node index"))
            })?;
            g.check_node(node)?;
            g.labels[node - 1] = label.clone();
        }
        Ok(g)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_json_file())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_json_file(&serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk graph layout. Node indices are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub admissible: Vec<usize>,
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
}
