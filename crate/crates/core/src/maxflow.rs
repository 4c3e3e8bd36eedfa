//! Exact max-flow / min-cut on integer capacities (Dinic's algorithm).

use std::collections::VecDeque;

#[derive(Clone, Debug)]
struct Edge {
    to: usize,
    cap: i64,
}

/// Directed flow network with integer capacities.
///
/// Edges are stored in pairs so `e ^ 1` is the reverse residual edge.
#[derive(Clone, Debug, Default)]
pub struct FlowGraph {
    adj: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

impl FlowGraph {
    pub fn new(nodes: usize) -> Self {
        Self { adj: vec![Vec::new(); nodes], edges: Vec::new(), level: vec![0; nodes], iter: vec![0; nodes] }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    /// Add a directed edge. Negative capacities are rejected by panicking.
    pub fn add_edge(&mut self, from: usize, to: usize, cap: i64) {
        assert!(cap >= 0, "negative capacity {cap}");
        if cap == 0 || from == to {
            return;
        }
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0 });
    }

    fn bfs(&mut self, s: usize) {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let Edge { to, cap } = self.edges[e];
                if cap > 0 && self.level[to] < 0 {
                    self.level[to] = self.level[u] + 1;
                    queue.push_back(to);
                }
            }
        }
    }

    /// Maximum flow from `s` to `t`. Consumes residual capacity, so call once.
    pub fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        assert!(s != t, "source equals sink");
        let mut flow = 0;
        loop {
            self.bfs(s);
            if self.level[t] < 0 {
                return flow;
            }
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.augment(s, t);
                if f == 0 {
                    break;
                }
                flow += f;
            }
        }
    }

    // Explicit path stack so long augmenting paths cannot overflow the call stack.
    fn augment(&mut self, s: usize, t: usize) -> i64 {
        let mut path: Vec<usize> = Vec::new();
        let mut u = s;
        loop {
            if u == t {
                let bottleneck = path.iter().map(|&e| self.edges[e].cap).min().unwrap_or(0);
                for &e in &path {
                    self.edges[e].cap -= bottleneck;
                    self.edges[e ^ 1].cap += bottleneck;
                }
                return bottleneck;
            }
            let mut advanced = false;
            while self.iter[u] < self.adj[u].len() {
                let e = self.adj[u][self.iter[u]];
                let Edge { to, cap } = self.edges[e];
                if cap > 0 && self.level[to] == self.level[u] + 1 {
                    path.push(e);
                    u = to;
                    advanced = true;
                    break;
                }
                self.iter[u] += 1;
            }
            if !advanced {
                // dead end: retreat and skip the edge that led here
                let Some(e) = path.pop() else {
                    return 0;
                };
                u = self.edges[e ^ 1].to;
                self.iter[u] += 1;
            }
        }
    }

    /// Nodes reachable from `s` in the residual graph, valid after `max_flow`.
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &e in &self.adj[u] {
                let Edge { to, cap } = self.edges[e];
                if cap > 0 && !seen[to] {
                    seen[to] = true;
                    stack.push(to);
                }
            }
        }
        seen
    }
}

/// Max-flow value and the source side of a minimum cut.
pub fn min_cut(mut graph: FlowGraph, s: usize, t: usize) -> (i64, Vec<bool>) {
    let value = graph.max_flow(s, t);
    (value, graph.source_side(s))
}
