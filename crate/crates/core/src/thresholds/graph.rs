//! Compact undirected graphs and vertex-connectivity tests.

use std::collections::VecDeque;

/// Undirected simple graph in CSR form with sorted neighbour lists.
#[derive(Clone, Debug)]
pub struct Graph {
    offsets: Vec<usize>,
    adj: Vec<u32>,
}

impl Graph {
    /// Builds from undirected edges; self-loops and repeats are dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut deg = vec![0usize; n + 1];
        let edges: Vec<(u32, u32)> = edges.into_iter().filter(|(u, v)| u != v).collect();
        for &(u, v) in &edges {
            deg[u as usize + 1] += 1;
            deg[v as usize + 1] += 1;
        }
        for i in 0..n {
            deg[i + 1] += deg[i];
        }
        let mut fill = deg.clone();
        let mut adj = vec![0u32; deg[n]];
        for &(u, v) in &edges {
            adj[fill[u as usize]] = v;
            fill[u as usize] += 1;
            adj[fill[v as usize]] = u;
            fill[v as usize] += 1;
        }
        // Sort and dedup each list, compacting in place.
        let mut offsets = vec![0usize; n + 1];
        let mut write = 0;
        for v in 0..n {
            let (s, e) = (deg[v], deg[v + 1]);
            adj[s..e].sort_unstable();
            let mut last = None;
            for idx in s..e {
                let w = adj[idx];
                if last != Some(w) {
                    adj[write] = w;
                    write += 1;
                    last = Some(w);
                }
            }
            offsets[v + 1] = write;
        }
        adj.truncate(write);
        Graph { offsets, adj }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn neighbours(&self, v: usize) -> &[u32] {
        &self.adj[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn min_degree(&self) -> usize {
        (0..self.len()).map(|v| self.degree(v)).min().unwrap_or(0)
    }

    pub fn is_adjacent(&self, u: usize, v: usize) -> bool {
        self.neighbours(u).binary_search(&(v as u32)).is_ok()
    }

    pub fn is_complete(&self) -> bool {
        let n = self.len();
        n == 0 || self.min_degree() == n - 1
    }

    pub fn is_connected(&self) -> bool {
        let n = self.len();
        if n <= 1 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in self.neighbours(v) {
                let w = w as usize;
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == n
    }

    /// Connected with no articulation point (iterative Hopcroft–Tarjan).
    pub fn is_biconnected(&self) -> bool {
        let n = self.len();
        if n < 3 {
            return false;
        }
        const UNSEEN: usize = usize::MAX;
        let mut disc = vec![UNSEEN; n];
        let mut low = vec![0usize; n];
        let mut parent = vec![UNSEEN; n];
        let mut next_edge = vec![0usize; n];
        let mut time = 0;
        let mut root_children = 0;
        let mut stack = vec![0usize];
        disc[0] = time;
        low[0] = time;
        time += 1;
        while let Some(&v) = stack.last() {
            let nbrs = self.neighbours(v);
            if next_edge[v] < nbrs.len() {
                let w = nbrs[next_edge[v]] as usize;
                next_edge[v] += 1;
                if disc[w] == UNSEEN {
                    parent[w] = v;
                    disc[w] = time;
                    low[w] = time;
                    time += 1;
                    if v == 0 {
                        root_children += 1;
                    }
                    stack.push(w);
                } else if w != parent[v] {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                let p = parent[v];
                if p != UNSEEN {
                    low[p] = low[p].min(low[v]);
                    if p != 0 && low[v] >= disc[p] {
                        return false;
                    }
                }
            }
        }
        time == n && root_children == 1
    }

    /// True iff the vertex connectivity is at least `k` (complete graphs
    /// `K_n` count as `(n-1)`-connected).
    pub fn is_k_connected(&self, k: usize) -> bool {
        let n = self.len();
        if k == 0 {
            return true;
        }
        if n < k + 1 {
            return false;
        }
        if self.min_degree() < k {
            return false;
        }
        match k {
            1 => self.is_connected(),
            2 => self.is_biconnected(),
            _ => self.vertex_connectivity_at_least(k),
        }
    }

    /// Flow-based check: fix a minimum-degree vertex `v`; every minimum
    /// separator either misses `v` (then it separates `v` from some
    /// non-neighbour) or contains it (then it separates two non-adjacent
    /// neighbours of `v`).
    pub fn vertex_connectivity_at_least(&self, k: usize) -> bool {
        let n = self.len();
        if n < k + 1 {
            return false;
        }
        if self.is_complete() {
            return n > k;
        }
        if self.min_degree() < k {
            return false;
        }
        let v = (0..n).min_by_key(|&v| self.degree(v)).unwrap_or(0);
        let mut flow = FlowNetwork::new(self);
        for w in 0..n {
            if w != v && !self.is_adjacent(v, w) && flow.disjoint_paths(v, w, k) < k {
                return false;
            }
        }
        let nb = self.neighbours(v);
        for (i, &x) in nb.iter().enumerate() {
            for &y in &nb[i + 1..] {
                let (x, y) = (x as usize, y as usize);
                if !self.is_adjacent(x, y) && flow.disjoint_paths(x, y, k) < k {
                    return false;
                }
            }
        }
        true
    }

    /// Number of internally vertex-disjoint paths between non-adjacent
    /// `s` and `t`, capped at `cap`.
    pub fn local_connectivity(&self, s: usize, t: usize, cap: usize) -> usize {
        FlowNetwork::new(self).disjoint_paths(s, t, cap)
    }
}

/// Unit-capacity vertex-split network: vertex `v` becomes `2v -> 2v+1`.
struct FlowNetwork {
    offsets: Vec<usize>,
    to: Vec<u32>,
    rev: Vec<u32>,
    cap: Vec<u8>,
    base: Vec<u8>,
    pred: Vec<u32>,
    queue: VecDeque<usize>,
}

impl FlowNetwork {
    fn new(g: &Graph) -> Self {
        let n = g.len();
        let nodes = 2 * n;
        // Each split node carries its half of the in->out pair plus one arc
        // (forward or reverse) per incident edge.
        let mut out_deg = vec![0usize; nodes + 1];
        for v in 0..n {
            out_deg[2 * v + 1] = 1 + g.degree(v);
            out_deg[2 * v + 2] = 1 + g.degree(v);
        }
        for i in 0..nodes {
            out_deg[i + 1] += out_deg[i];
        }
        let m = out_deg[nodes];
        let mut fill = out_deg.clone();
        let mut to = vec![0u32; m];
        let mut rev = vec![0u32; m];
        let mut cap = vec![0u8; m];
        let mut add = |a: usize, b: usize, c: u8, fill: &mut Vec<usize>| {
            let ia = fill[a];
            fill[a] += 1;
            let ib = fill[b];
            fill[b] += 1;
            to[ia] = b as u32;
            rev[ia] = ib as u32;
            cap[ia] = c;
            to[ib] = a as u32;
            rev[ib] = ia as u32;
            cap[ib] = 0;
        };
        for v in 0..n {
            add(2 * v, 2 * v + 1, 1, &mut fill);
            for &w in g.neighbours(v) {
                add(2 * v + 1, 2 * w as usize, 1, &mut fill);
            }
        }
        FlowNetwork {
            offsets: out_deg,
            to,
            rev,
            base: cap.clone(),
            cap,
            pred: vec![u32::MAX; nodes],
            queue: VecDeque::new(),
        }
    }

    fn disjoint_paths(&mut self, s: usize, t: usize, limit: usize) -> usize {
        self.cap.copy_from_slice(&self.base);
        let source = 2 * s + 1;
        let sink = 2 * t;
        let mut flow = 0;
        while flow < limit && self.augment(source, sink) {
            flow += 1;
        }
        flow
    }

    /// One BFS augmenting path; `pred` stores the arc used to reach a node.
    fn augment(&mut self, source: usize, sink: usize) -> bool {
        self.pred.fill(u32::MAX);
        self.queue.clear();
        self.queue.push_back(source);
        let mut found = false;
        'bfs: while let Some(a) = self.queue.pop_front() {
            for e in self.offsets[a]..self.offsets[a + 1] {
                if self.cap[e] == 0 {
                    continue;
                }
                let b = self.to[e] as usize;
                if b == source || self.pred[b] != u32::MAX {
                    continue;
                }
                self.pred[b] = e as u32;
                if b == sink {
                    found = true;
                    break 'bfs;
                }
                self.queue.push_back(b);
            }
        }
        if !found {
            return false;
        }
        let mut node = sink;
        while node != source {
            let e = self.pred[node] as usize;
            self.cap[e] -= 1;
            self.cap[self.rev[e] as usize] += 1;
            node = self.to[self.rev[e] as usize] as usize;
        }
        true
    }
}
