//! Unit-capacity vertex cuts via Edmonds-Karp on the node-split graph.

use std::collections::VecDeque;

const INF: i64 = i64::MAX / 4;

struct Network {
    head: Vec<usize>,
    cap: Vec<i64>,
    adj: Vec<Vec<usize>>,
}

impl Network {
    fn new(nodes: usize) -> Self {
        Self {
            head: Vec::new(),
            cap: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    /// Arc `2k` is forward, `2k + 1` its residual twin.
    fn add_arc(&mut self, from: usize, to: usize, cap: i64) {
        self.adj[from].push(self.head.len());
        self.head.push(to);
        self.cap.push(cap);
        self.adj[to].push(self.head.len());
        self.head.push(from);
        self.cap.push(0);
    }

    fn augment(&mut self, source: usize, sink: usize) -> i64 {
        let mut pred: Vec<Option<usize>> = vec![None; self.adj.len()];
        let mut seen = vec![false; self.adj.len()];
        seen[source] = true;
        let mut queue = VecDeque::from([source]);
        'bfs: while let Some(v) = queue.pop_front() {
            for &a in &self.adj[v] {
                let u = self.head[a];
                if !seen[u] && self.cap[a] > 0 {
                    seen[u] = true;
                    pred[u] = Some(a);
                    if u == sink {
                        break 'bfs;
                    }
                    queue.push_back(u);
                }
            }
        }
        if !seen[sink] {
            return 0;
        }
        let mut bottleneck = INF;
        let mut v = sink;
        while let Some(a) = pred[v] {
            bottleneck = bottleneck.min(self.cap[a]);
            v = self.head[a ^ 1];
        }
        let mut v = sink;
        while let Some(a) = pred[v] {
            self.cap[a] -= bottleneck;
            self.cap[a ^ 1] += bottleneck;
            v = self.head[a ^ 1];
        }
        bottleneck
    }

    fn max_flow(&mut self, source: usize, sink: usize) -> i64 {
        let mut total = 0;
        loop {
            let f = self.augment(source, sink);
            if f == 0 {
                return total;
            }
            total += f;
        }
    }

    /// Nodes with a residual path to `sink`.
    fn coreach(&self, sink: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[sink] = true;
        let mut queue = VecDeque::from([sink]);
        while let Some(y) = queue.pop_front() {
            for &a in &self.adj[y] {
                // twin of `a` runs head[a] -> y
                let x = self.head[a];
                if !seen[x] && self.cap[a ^ 1] > 0 {
                    seen[x] = true;
                    queue.push_back(x);
                }
            }
        }
        seen
    }
}

/// Minimum vertex cut between `sources` and `sinks` restricted to `cuttable`
/// nodes, choosing the minimum cut nearest the sinks. Node `v` is split into
/// `2v` (in) and `2v + 1` (out). The caller guarantees that a finite cut exists.
pub(super) fn sink_side_vertex_cut(
    n: usize,
    out: &[Vec<(usize, f64)>],
    sources: &[bool],
    sinks: &[bool],
    cuttable: &[bool],
) -> Vec<bool> {
    let source = 2 * n;
    let sink = 2 * n + 1;
    let mut net = Network::new(2 * n + 2);
    for v in 0..n {
        net.add_arc(2 * v, 2 * v + 1, if cuttable[v] { 1 } else { INF });
    }
    for v in 0..n {
        if sources[v] {
            net.add_arc(source, 2 * v, INF);
        }
    }
    for (tail, heads) in out.iter().enumerate() {
        for &(head, _) in heads {
            net.add_arc(2 * tail + 1, 2 * head, INF);
        }
    }
    for v in 0..n {
        if sinks[v] {
            net.add_arc(2 * v + 1, sink, INF);
        }
    }
    let flow = net.max_flow(source, sink);
    debug_assert!(flow < INF);
    let near_sink = net.coreach(sink);
    (0..n)
        .map(|v| cuttable[v] && !near_sink[2 * v] && near_sink[2 * v + 1])
        .collect()
}
