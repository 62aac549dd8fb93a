//! Exact s-t max-flow / min-cut on sparse graphs.
//!
//! Augmenting paths are found with two search trees grown from the source
//! and the sink that are reused between augmentations (the
//! Boykov-Kolmogorov scheme), which suits the shallow grid graphs built by
//! the expansion moves.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Graph description: terminal capacities per node plus directed
/// neighbour edges, each with a reverse capacity.
#[derive(Debug, Clone, Default)]
pub struct FlowNetwork {
    source_cap: Vec<f64>,
    sink_cap: Vec<f64>,
    edges: Vec<(u32, u32, f64, f64)>,
}

/// Max-flow value and the residual-reachability cut.
#[derive(Debug, Clone, PartialEq)]
pub struct MinCut {
    pub flow: f64,
    /// `true` for nodes reachable from the source in the final residual graph.
    pub source_side: Vec<bool>,
}

impl FlowNetwork {
    pub fn new(num_nodes: usize) -> Self {
        FlowNetwork {
            source_cap: vec![0.0; num_nodes],
            sink_cap: vec![0.0; num_nodes],
            edges: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.source_cap.len()
    }

    pub fn add_node(&mut self) -> usize {
        self.source_cap.push(0.0);
        self.sink_cap.push(0.0);
        self.source_cap.len() - 1
    }

    /// Adds to the source->node and node->sink capacities.
    pub fn add_terminal(&mut self, node: usize, source: f64, sink: f64) {
        self.source_cap[node] += source;
        self.sink_cap[node] += sink;
    }

    /// Adds edge `from -> to` with capacity `cap` and `to -> from` with `rev_cap`.
    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64, rev_cap: f64) {
        self.edges.push((from as u32, to as u32, cap, rev_cap));
    }

    pub fn terminal(&self, node: usize) -> (f64, f64) {
        (self.source_cap[node], self.sink_cap[node])
    }

    pub fn edges(&self) -> &[(u32, u32, f64, f64)] {
        &self.edges
    }

    fn validate(&self) -> Result<()> {
        let bad = |c: f64| !(c.is_finite() && c >= 0.0);
        if let Some(c) = self
            .source_cap
            .iter()
            .chain(&self.sink_cap)
            .copied()
            .chain(self.edges.iter().flat_map(|e| [e.2, e.3]))
            .find(|c| bad(*c))
        {
            return Err(Error::BadCapacity(c));
        }
        let n = self.num_nodes() as u32;
        if let Some(e) = self.edges.iter().find(|e| e.0 >= n || e.1 >= n) {
            return Err(Error::InvalidParameter(format!(
                "edge ({}, {}) references a missing node",
                e.0, e.1
            )));
        }
        Ok(())
    }

    /// Capacity of the cut separating `source_side` nodes from the rest.
    pub fn cut_capacity(&self, source_side: &[bool]) -> f64 {
        let mut total = 0.0;
        for (i, &s) in source_side.iter().enumerate() {
            total += if s { self.sink_cap[i] } else { self.source_cap[i] };
        }
        for &(u, v, c, rc) in &self.edges {
            let (su, sv) = (source_side[u as usize], source_side[v as usize]);
            if su && !sv {
                total += c;
            } else if sv && !su {
                total += rc;
            }
        }
        total
    }
}

const NONE: u32 = u32::MAX;
const TERMINAL: u32 = u32::MAX - 1;
const ORPHAN: u32 = u32::MAX - 2;

struct Solver {
    // arcs in CSR order; arc `a` runs from its owner node to `head[a]`
    first: Vec<u32>,
    head: Vec<u32>,
    sister: Vec<u32>,
    r_cap: Vec<f64>,
    // residual terminal capacity: > 0 from source, < 0 to sink
    tr_cap: Vec<f64>,
    parent: Vec<u32>,
    is_sink: Vec<bool>,
    ts: Vec<u64>,
    dist: Vec<u32>,
    in_queue: Vec<bool>,
    active: VecDeque<u32>,
    orphans: VecDeque<u32>,
    time: u64,
    flow: f64,
}

impl Solver {
    fn build(net: &FlowNetwork) -> Self {
        let n = net.num_nodes();
        let mut degree = vec![0u32; n + 1];
        for &(u, v, _, _) in &net.edges {
            degree[u as usize + 1] += 1;
            degree[v as usize + 1] += 1;
        }
        for i in 0..n {
            degree[i + 1] += degree[i];
        }
        let first = degree.clone();
        let m = first[n] as usize;
        let mut fill = first.clone();
        let mut head = vec![0u32; m];
        let mut sister = vec![0u32; m];
        let mut r_cap = vec![0.0; m];
        for &(u, v, c, rc) in &net.edges {
            let a = fill[u as usize];
            fill[u as usize] += 1;
            let b = fill[v as usize];
            fill[v as usize] += 1;
            head[a as usize] = v;
            head[b as usize] = u;
            sister[a as usize] = b;
            sister[b as usize] = a;
            r_cap[a as usize] = c;
            r_cap[b as usize] = rc;
        }

        let mut s = Solver {
            first,
            head,
            sister,
            r_cap,
            tr_cap: vec![0.0; n],
            parent: vec![NONE; n],
            is_sink: vec![false; n],
            ts: vec![0; n],
            dist: vec![0; n],
            in_queue: vec![false; n],
            active: VecDeque::new(),
            orphans: VecDeque::new(),
            time: 0,
            flow: 0.0,
        };
        for i in 0..n {
            let (src, snk) = (net.source_cap[i], net.sink_cap[i]);
            s.flow += src.min(snk);
            let t = src - snk;
            s.tr_cap[i] = t;
            if t != 0.0 {
                s.is_sink[i] = t < 0.0;
                s.parent[i] = TERMINAL;
                s.dist[i] = 1;
                s.set_active(i as u32);
            }
        }
        s
    }

    #[inline]
    fn arcs(&self, i: u32) -> std::ops::Range<usize> {
        self.first[i as usize] as usize..self.first[i as usize + 1] as usize
    }

    #[inline]
    fn set_active(&mut self, i: u32) {
        if !self.in_queue[i as usize] {
            self.in_queue[i as usize] = true;
            self.active.push_back(i);
        }
    }

    fn next_active(&mut self) -> Option<u32> {
        while let Some(i) = self.active.pop_front() {
            self.in_queue[i as usize] = false;
            if self.parent[i as usize] != NONE {
                return Some(i);
            }
        }
        None
    }

    /// Grows the tree of `i`; returns an arc from the source tree into the
    /// sink tree when the trees touch.
    fn grow(&mut self, i: u32) -> Option<usize> {
        let iu = i as usize;
        if !self.is_sink[iu] {
            for a in self.arcs(i) {
                if self.r_cap[a] <= 0.0 {
                    continue;
                }
                let j = self.head[a] as usize;
                if self.parent[j] == NONE {
                    self.is_sink[j] = false;
                    self.parent[j] = self.sister[a];
                    self.ts[j] = self.ts[iu];
                    self.dist[j] = self.dist[iu] + 1;
                    self.set_active(j as u32);
                } else if self.is_sink[j] {
                    return Some(a);
                } else if self.ts[j] <= self.ts[iu] && self.dist[j] > self.dist[iu] {
                    self.parent[j] = self.sister[a];
                    self.ts[j] = self.ts[iu];
                    self.dist[j] = self.dist[iu] + 1;
                }
            }
        } else {
            for a in self.arcs(i) {
                let back = self.sister[a] as usize;
                if self.r_cap[back] <= 0.0 {
                    continue;
                }
                let j = self.head[a] as usize;
                if self.parent[j] == NONE {
                    self.is_sink[j] = true;
                    self.parent[j] = back as u32;
                    self.ts[j] = self.ts[iu];
                    self.dist[j] = self.dist[iu] + 1;
                    self.set_active(j as u32);
                } else if !self.is_sink[j] {
                    return Some(back);
                } else if self.ts[j] <= self.ts[iu] && self.dist[j] > self.dist[iu] {
                    self.parent[j] = back as u32;
                    self.ts[j] = self.ts[iu];
                    self.dist[j] = self.dist[iu] + 1;
                }
            }
        }
        None
    }

    fn augment(&mut self, middle: usize) {
        let mut bottleneck = self.r_cap[middle];
        // source side: walk from the tail of `middle` up to the source
        let mut i = self.head[self.sister[middle] as usize] as usize;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                bottleneck = bottleneck.min(self.tr_cap[i]);
                break;
            }
            bottleneck = bottleneck.min(self.r_cap[self.sister[a as usize] as usize]);
            i = self.head[a as usize] as usize;
        }
        let mut i = self.head[middle] as usize;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                bottleneck = bottleneck.min(-self.tr_cap[i]);
                break;
            }
            bottleneck = bottleneck.min(self.r_cap[a as usize]);
            i = self.head[a as usize] as usize;
        }

        self.r_cap[self.sister[middle] as usize] += bottleneck;
        self.r_cap[middle] -= bottleneck;

        let mut i = self.head[self.sister[middle] as usize] as usize;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                self.tr_cap[i] -= bottleneck;
                if self.tr_cap[i] <= 0.0 {
                    self.make_orphan(i);
                }
                break;
            }
            let a = a as usize;
            let down = self.sister[a] as usize;
            self.r_cap[a] += bottleneck;
            self.r_cap[down] -= bottleneck;
            if self.r_cap[down] <= 0.0 {
                self.make_orphan(i);
            }
            i = self.head[a] as usize;
        }
        let mut i = self.head[middle] as usize;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                self.tr_cap[i] += bottleneck;
                if self.tr_cap[i] >= 0.0 {
                    self.make_orphan(i);
                }
                break;
            }
            let a = a as usize;
            self.r_cap[self.sister[a] as usize] += bottleneck;
            self.r_cap[a] -= bottleneck;
            if self.r_cap[a] <= 0.0 {
                self.make_orphan(i);
            }
            i = self.head[a] as usize;
        }
        self.flow += bottleneck;
    }

    fn make_orphan(&mut self, i: usize) {
        self.parent[i] = ORPHAN;
        self.orphans.push_front(i as u32);
    }

    /// Distance of `j` to its tree root through valid parents, or `None`
    /// when the chain ends in an orphan. Marks visited nodes with the
    /// current time.
    fn origin_distance(&mut self, start: usize) -> Option<u32> {
        let mut j = start;
        let mut d = 0u32;
        loop {
            if self.ts[j] == self.time {
                d += self.dist[j];
                break;
            }
            let a = self.parent[j];
            d += 1;
            if a == TERMINAL {
                self.ts[j] = self.time;
                self.dist[j] = 1;
                break;
            }
            if a == ORPHAN {
                return None;
            }
            j = self.head[a as usize] as usize;
        }
        // cache distances along the path
        let mut j = start;
        let mut dd = d;
        while self.ts[j] != self.time {
            self.ts[j] = self.time;
            self.dist[j] = dd;
            dd -= 1;
            j = self.head[self.parent[j] as usize] as usize;
        }
        Some(d)
    }

    fn adopt(&mut self, i: usize) {
        let sink_tree = self.is_sink[i];
        let mut best: Option<(u32, u32)> = None;
        for a0 in self.arcs(i as u32) {
            // residual capacity from the candidate parent towards i (source
            // tree) or from i towards it (sink tree)
            let cap = if sink_tree {
                self.r_cap[a0]
            } else {
                self.r_cap[self.sister[a0] as usize]
            };
            if cap <= 0.0 {
                continue;
            }
            let j = self.head[a0] as usize;
            if self.is_sink[j] != sink_tree || self.parent[j] == NONE {
                continue;
            }
            if let Some(d) = self.origin_distance(j) {
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((a0 as u32, d));
                }
            }
        }
        if let Some((a, d)) = best {
            self.parent[i] = a;
            self.ts[i] = self.time;
            self.dist[i] = d + 1;
            return;
        }
        self.parent[i] = NONE;
        for a0 in self.arcs(i as u32) {
            let j = self.head[a0] as usize;
            if self.is_sink[j] != sink_tree {
                continue;
            }
            let pj = self.parent[j];
            if pj == NONE {
                continue;
            }
            let cap = if sink_tree {
                self.r_cap[a0]
            } else {
                self.r_cap[self.sister[a0] as usize]
            };
            if cap > 0.0 {
                self.set_active(j as u32);
            }
            if pj != TERMINAL && pj != ORPHAN && self.head[pj as usize] as usize == i {
                self.parent[j] = ORPHAN;
                self.orphans.push_back(j as u32);
            }
        }
    }

    fn run(&mut self) {
        let mut current: Option<u32> = None;
        loop {
            let i = match current.take().filter(|&c| self.parent[c as usize] != NONE) {
                Some(c) => c,
                None => match self.next_active() {
                    Some(c) => c,
                    None => break,
                },
            };
            let found = self.grow(i);
            self.time += 1;
            if let Some(a) = found {
                current = Some(i);
                self.augment(a);
                while let Some(o) = self.orphans.pop_front() {
                    self.adopt(o as usize);
                }
            }
        }
    }

    fn source_reachable(&self) -> Vec<bool> {
        let n = self.tr_cap.len();
        let mut seen = vec![false; n];
        let mut queue: VecDeque<u32> = VecDeque::new();
        for (i, &t) in self.tr_cap.iter().enumerate() {
            if t > 0.0 {
                seen[i] = true;
                queue.push_back(i as u32);
            }
        }
        while let Some(i) = queue.pop_front() {
            for a in self.arcs(i) {
                let j = self.head[a] as usize;
                if !seen[j] && self.r_cap[a] > 0.0 {
                    seen[j] = true;
                    queue.push_back(j as u32);
                }
            }
        }
        seen
    }
}

/// Computes the maximum flow and the minimum cut whose source side is the
/// set of nodes reachable from the source in the residual graph.
pub fn max_flow(net: &FlowNetwork) -> Result<MinCut> {
    net.validate()?;
    let mut solver = Solver::build(net);
    solver.run();
    Ok(MinCut {
        flow: solver.flow,
        source_side: solver.source_reachable(),
    })
}
