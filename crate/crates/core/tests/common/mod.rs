//! Independent oracles and random-instance generators shared by the
//! integration and acceptance tests. Everything here works on plain
//! adjacency lists and brute force, not on the library algorithms.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use netdecouple::oscillator::{DescriptorSystem, OscillatorNetwork};
use netdecouple::{InfluenceGraph, NodeSet};
use rand::Rng;

/// Random digraph with `n` nodes; each ordered pair is an edge with probability `p`.
pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> InfluenceGraph {
    let mut g = InfluenceGraph::new(n);
    for t in 1..=n {
        for h in 1..=n {
            if t != h && rng.random_bool(p) {
                g.add_edge(t, h, rng.random_range(0.5..2.0)).unwrap();
            }
        }
    }
    g
}

pub fn random_subset(rng: &mut impl Rng, pool: &[usize], max: usize) -> NodeSet {
    let k = rng.random_range(1..=max.min(pool.len()).max(1));
    let mut items = pool.to_vec();
    for i in 0..items.len() {
        let j = rng.random_range(i..items.len());
        items.swap(i, j);
    }
    items.into_iter().take(k).collect()
}

/// Adjacency as a boolean matrix, `adj[t][h]` for 0-based nodes.
pub fn adjacency(g: &InfluenceGraph) -> Vec<Vec<bool>> {
    let n = g.node_count();
    let mut adj = vec![vec![false; n]; n];
    for (t, h, _) in g.edges() {
        adj[t - 1][h - 1] = true;
    }
    adj
}

fn to_mask(set: &NodeSet, n: usize) -> u32 {
    set.iter().fold(0, |m, v| {
        assert!(v >= 1 && v <= n);
        m | 1 << (v - 1)
    })
}

fn from_mask(mask: u32, n: usize) -> NodeSet {
    (0..n)
        .filter(|i| mask >> i & 1 == 1)
        .map(|i| i + 1)
        .collect()
}

/// Every edge leaving `z` lands in `b`.
fn controlled(adj: &[Vec<bool>], z: u32, b: u32) -> bool {
    let n = adj.len();
    (0..n).all(|t| {
        z >> t & 1 == 0 || (0..n).all(|h| !adj[t][h] || z >> h & 1 == 1 || b >> h & 1 == 1)
    })
}

/// Every edge leaving `s` starts in `c`.
fn conditioned(adj: &[Vec<bool>], s: u32, c: u32) -> bool {
    let n = adj.len();
    (0..n).all(|t| {
        s >> t & 1 == 0 || c >> t & 1 == 1 || (0..n).all(|h| !adj[t][h] || s >> h & 1 == 1)
    })
}

fn submasks(mask: u32) -> impl Iterator<Item = u32> {
    let mut sub = Some(mask);
    std::iter::from_fn(move || {
        let cur = sub?;
        sub = if cur == 0 {
            None
        } else {
            Some((cur - 1) & mask)
        };
        Some(cur)
    })
}

/// Largest controlled-invariant subset of `z0`, by scanning the whole lattice.
/// Panics if the maximum is not unique.
pub fn lattice_max_controlled(g: &InfluenceGraph, z0: &NodeSet, b: &NodeSet) -> NodeSet {
    let n = g.node_count();
    let adj = adjacency(g);
    let bm = to_mask(b, n);
    let mut best: Option<u32> = None;
    let mut union = 0u32;
    for z in submasks(to_mask(z0, n)) {
        if controlled(&adj, z, bm) {
            union |= z;
            if best.is_none_or(|x| z.count_ones() > x.count_ones()) {
                best = Some(z);
            }
        }
    }
    let best = best.unwrap_or(0);
    assert_eq!(
        best, union,
        "maximum controlled-invariant set is not unique"
    );
    from_mask(best, n)
}

/// Smallest conditioned-invariant superset of `s0`, by scanning the lattice.
pub fn lattice_min_conditioned(g: &InfluenceGraph, s0: &NodeSet, c: &NodeSet) -> NodeSet {
    let n = g.node_count();
    let adj = adjacency(g);
    let (base, cm) = (to_mask(s0, n), to_mask(c, n));
    let full = (1u32 << n) - 1;
    let mut best: Option<u32> = None;
    let mut inter = full;
    for extra in submasks(full & !base) {
        let s = base | extra;
        if conditioned(&adj, s, cm) {
            inter &= s;
            if best.is_none_or(|x| s.count_ones() < x.count_ones()) {
                best = Some(s);
            }
        }
    }
    let best = best.expect("the full set is always conditioned invariant");
    assert_eq!(
        best, inter,
        "minimum conditioned-invariant set is not unique"
    );
    from_mask(best, n)
}

/// Whether `d` reaches `t` once the nodes of `removed` are deleted.
pub fn reaches_avoiding(adj: &[Vec<bool>], d: u32, t: u32, removed: u32) -> bool {
    let n = adj.len();
    let mut seen = d & !removed;
    let mut stack: Vec<usize> = (0..n).filter(|&v| seen >> v & 1 == 1).collect();
    while let Some(v) = stack.pop() {
        if t >> v & 1 == 1 {
            return true;
        }
        for h in 0..n {
            if adj[v][h] && seen >> h & 1 == 0 && removed >> h & 1 == 0 {
                seen |= 1 << h;
                stack.push(h);
            }
        }
    }
    false
}

/// Smallest number of admissible non-terminal nodes whose removal separates
/// `d` from `t`, or `None` if no such set exists.
pub fn brute_force_cut_size(g: &InfluenceGraph, d: &NodeSet, t: &NodeSet) -> Option<usize> {
    let n = g.node_count();
    let adj = adjacency(g);
    let (dm, tm) = (to_mask(d, n), to_mask(t, n));
    let cuttable = to_mask(&g.admissible(), n) & !dm & !tm;
    let mut best: Option<usize> = None;
    for b in submasks(cuttable) {
        let size = b.count_ones() as usize;
        if best.is_some_and(|x| size >= x) {
            continue;
        }
        if !reaches_avoiding(&adj, dm, tm, b) {
            best = Some(size);
        }
    }
    best
}

/// Descriptor system with the sparsity of `g`, random weights, stable diagonal
/// and random positive `E`.
pub fn random_system(rng: &mut impl Rng, g: &InfluenceGraph) -> DescriptorSystem {
    let n = g.node_count();
    let mut a = DMatrix::zeros(n, n);
    for (t, h, _) in g.edges() {
        let w: f64 = rng.random_range(0.2..2.0);
        a[(h - 1, t - 1)] = if rng.random_bool(0.5) { w } else { -w };
    }
    for i in 0..n {
        a[(i, i)] = -rng.random_range(1.0..5.0);
    }
    let e = DVector::from_fn(n, |_, _| rng.random_range(0.1..3.0));
    let b_full = DMatrix::from_fn(n, n, |i, j| {
        if i == j && g.is_admissible(i + 1) {
            1.0
        } else {
            0.0
        }
    });
    DescriptorSystem::from_parts(e, a, b_full).unwrap()
}

/// Connected random oscillator network with mixed orders, small injections.
pub fn random_network(rng: &mut impl Rng, n: usize) -> OscillatorNetwork {
    let mut coupling = DMatrix::zeros(n, n);
    // spanning path plus random chords
    for i in 1..n {
        let j = rng.random_range(0..i);
        let w = rng.random_range(1.0..5.0);
        coupling[(i, j)] = w;
        coupling[(j, i)] = w;
    }
    for i in 0..n {
        for j in i + 1..n {
            if coupling[(i, j)] == 0.0 && rng.random_bool(0.3) {
                let w = rng.random_range(1.0..5.0);
                coupling[(i, j)] = w;
                coupling[(j, i)] = w;
            }
        }
    }
    let second_order: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
    let inertia = second_order
        .iter()
        .map(|_| rng.random_range(0.1..2.0))
        .collect();
    let damping = (0..n).map(|_| rng.random_range(0.2..3.0)).collect();
    let natural_freq = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
    OscillatorNetwork::new(coupling, second_order, inertia, damping, natural_freq).unwrap()
}

/// Central-difference Jacobian of `f` at `x0`.
pub fn jacobian_fd(
    f: impl Fn(&DVector<f64>) -> DVector<f64>,
    x0: &DVector<f64>,
    h: f64,
) -> DMatrix<f64> {
    let n = x0.len();
    let m = f(x0).len();
    let mut jac = DMatrix::zeros(m, n);
    for j in 0..n {
        let mut xp = x0.clone();
        let mut xm = x0.clone();
        xp[j] += h;
        xm[j] -= h;
        jac.set_column(j, &((f(&xp) - f(&xm)) / (2.0 * h)));
    }
    jac
}
