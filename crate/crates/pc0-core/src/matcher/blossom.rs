//! Maximum-weight matching in general graphs by the primal-dual blossom
//! method (Edmonds), following the O(n^3) formulation of Galil's survey as
//! popularized by van Rantwijk's reference implementation.
//!
//! Vertices are 0..n-1; nontrivial blossoms occupy ids n..2n-1. Edge
//! endpoints are numbered 2k and 2k+1 for edge k, so `p ^ 1` is the opposite
//! end of the edge containing endpoint p. Vertex dual variables are stored
//! premultiplied by two, which keeps all arithmetic integral when the input
//! weights are even.

const NONE: usize = usize::MAX;

const LBL_FREE: u8 = 0;
const LBL_S: u8 = 1;
const LBL_T: u8 = 2;
const LBL_CRUMB: u8 = 5; // breadcrumb marker used while scanning for blossoms

pub struct Solver {
    n: usize,
    edges: Vec<(usize, usize, i64)>,
    max_cardinality: bool,
    endpoint: Vec<usize>,   // endpoint[p]: vertex at endpoint p
    adj_start: Vec<usize>,  // CSR offsets into adj, len n+1
    adj: Vec<usize>,        // incident endpoint indices (remote end), len 2e
    dual: Vec<i64>,         // len 2n
    label: Vec<u8>,         // len 2n
    label_end: Vec<usize>,  // len 2n
    in_blossom: Vec<usize>, // len n
    blossom_parent: Vec<usize>,
    blossom_children: Vec<Vec<usize>>,
    blossom_base: Vec<usize>,
    blossom_endps: Vec<Vec<usize>>,
    best_edge: Vec<usize>,
    blossom_best_edges: Vec<Vec<usize>>,
    unused_blossoms: Vec<usize>,
    mate: Vec<usize>, // mate[v]: remote endpoint of v's matched edge, or NONE
    queue: Vec<usize>,
    allow_edge: Vec<bool>,
}

/// Computes a maximum-weight matching; with `max_cardinality` only matchings
/// of maximum cardinality are considered. Returns `mate` with the partner
/// vertex per vertex (NONE encoded as `usize::MAX`).
///
/// All edge weights must be even so the half-integral dual updates stay
/// integral; callers scale by two.
#[cfg(test)]
pub fn max_weight_matching(
    n: usize,
    edges: &[(usize, usize, i64)],
    max_cardinality: bool,
    verify: bool,
) -> Vec<usize> {
    match solve_state(n, edges, max_cardinality) {
        None => vec![NONE; n],
        Some(solver) => {
            if verify {
                solver.verify_optimum();
            }
            solver.mates()
        }
    }
}

/// Like [`max_weight_matching`] but returns the full solver state so callers
/// can extend the dual certificate to edges outside the solved graph.
pub fn solve_state(
    n: usize,
    edges: &[(usize, usize, i64)],
    max_cardinality: bool,
) -> Option<Solver> {
    if n == 0 || edges.is_empty() {
        return None;
    }
    debug_assert!(edges.iter().all(|&(_, _, w)| w % 2 == 0));
    let mut solver = Solver::new(n, edges.to_vec(), max_cardinality);
    solver.run();
    Some(solver)
}

impl Solver {
    fn new(n: usize, edges: Vec<(usize, usize, i64)>, max_cardinality: bool) -> Self {
        let nedge = edges.len();
        let max_weight = edges.iter().map(|e| e.2).max().unwrap().max(0);
        let mut endpoint = Vec::with_capacity(2 * nedge);
        for &(i, j, _) in &edges {
            debug_assert!(i != j && i < n && j < n);
            endpoint.push(i);
            endpoint.push(j);
        }
        let mut degree = vec![0usize; n];
        for &(i, j, _) in &edges {
            degree[i] += 1;
            degree[j] += 1;
        }
        let mut adj_start = vec![0usize; n + 1];
        for v in 0..n {
            adj_start[v + 1] = adj_start[v] + degree[v];
        }
        let mut cursor = adj_start.clone();
        let mut adj = vec![0usize; 2 * nedge];
        for (k, &(i, j, _)) in edges.iter().enumerate() {
            adj[cursor[i]] = 2 * k + 1;
            cursor[i] += 1;
            adj[cursor[j]] = 2 * k;
            cursor[j] += 1;
        }
        let mut dual = vec![max_weight; n];
        dual.extend(std::iter::repeat(0).take(n));
        let mut blossom_base: Vec<usize> = (0..n).collect();
        blossom_base.extend(std::iter::repeat(NONE).take(n));
        Solver {
            n,
            max_cardinality,
            endpoint,
            adj_start,
            adj,
            dual,
            label: vec![LBL_FREE; 2 * n],
            label_end: vec![NONE; 2 * n],
            in_blossom: (0..n).collect(),
            blossom_parent: vec![NONE; 2 * n],
            blossom_children: vec![Vec::new(); 2 * n],
            blossom_base,
            blossom_endps: vec![Vec::new(); 2 * n],
            best_edge: vec![NONE; 2 * n],
            blossom_best_edges: vec![Vec::new(); 2 * n],
            unused_blossoms: (n..2 * n).collect(),
            mate: vec![NONE; n],
            queue: Vec::new(),
            allow_edge: vec![false; nedge],
            edges,
        }
    }

    /// 2 * slack of edge k (valid only outside blossoms).
    #[inline]
    fn slack(&self, k: usize) -> i64 {
        let (i, j, w) = self.edges[k];
        self.dual[i] + self.dual[j] - 2 * w
    }

    fn leaves(&self, b: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![b];
        while let Some(t) = stack.pop() {
            if t < self.n {
                out.push(t);
            } else {
                stack.extend(self.blossom_children[t].iter().copied());
            }
        }
        out
    }

    /// Python-style index (negative wraps) into a blossom's child list.
    #[inline]
    fn child(&self, b: usize, j: isize) -> usize {
        let list = &self.blossom_children[b];
        let idx = if j >= 0 { j as usize } else { (list.len() as isize + j) as usize };
        list[idx]
    }

    #[inline]
    fn endp(&self, b: usize, j: isize) -> usize {
        let list = &self.blossom_endps[b];
        let idx = if j >= 0 { j as usize } else { (list.len() as isize + j) as usize };
        list[idx]
    }

    /// Label the top-level blossom of w as S (t=1) or T (t=2), reached via
    /// remote endpoint p.
    fn assign_label(&mut self, w: usize, t: u8, p: usize) {
        let b = self.in_blossom[w];
        debug_assert!(self.label[w] == LBL_FREE && self.label[b] == LBL_FREE);
        self.label[w] = t;
        self.label[b] = t;
        self.label_end[w] = p;
        self.label_end[b] = p;
        self.best_edge[w] = NONE;
        self.best_edge[b] = NONE;
        if t == LBL_S {
            let leaves = self.leaves(b);
            self.queue.extend(leaves);
        } else {
            // the base vertex is the only one with an external mate
            let base = self.blossom_base[b];
            debug_assert!(self.mate[base] != NONE);
            let mate_ep = self.mate[base];
            self.assign_label(self.endpoint[mate_ep], LBL_S, mate_ep ^ 1);
        }
    }

    /// Trace back from v and w; returns the base of a new blossom, or NONE if
    /// an augmenting path was discovered instead.
    fn scan_blossom(&mut self, v: usize, w: usize) -> usize {
        let mut path = Vec::new();
        let mut base = NONE;
        let mut v = v;
        let mut w = w;
        loop {
            if v != NONE {
                let mut b = self.in_blossom[v];
                if self.label[b] & 4 != 0 {
                    base = self.blossom_base[b];
                    break;
                }
                debug_assert_eq!(self.label[b], LBL_S);
                path.push(b);
                self.label[b] = LBL_CRUMB;
                debug_assert_eq!(self.label_end[b], self.mate[self.blossom_base[b]]);
                if self.label_end[b] == NONE {
                    v = NONE; // base is single; this path ends
                } else {
                    v = self.endpoint[self.label_end[b]];
                    b = self.in_blossom[v];
                    debug_assert_eq!(self.label[b], LBL_T);
                    debug_assert!(self.label_end[b] != NONE);
                    v = self.endpoint[self.label_end[b]];
                }
            }
            if w != NONE {
                std::mem::swap(&mut v, &mut w);
            } else if v == NONE {
                break;
            }
        }
        for b in path {
            self.label[b] = LBL_S;
        }
        base
    }

    /// Shrink the cycle through edge k and `base` into a new S-blossom.
    fn add_blossom(&mut self, base: usize, k: usize) {
        let (mut v, mut w, _) = self.edges[k];
        let bb = self.in_blossom[base];
        let mut bv = self.in_blossom[v];
        let mut bw = self.in_blossom[w];
        let b = self.unused_blossoms.pop().expect("blossom id available");
        self.blossom_base[b] = base;
        self.blossom_parent[b] = NONE;
        self.blossom_parent[bb] = b;

        let mut children = Vec::new();
        let mut endps = Vec::new();
        while bv != bb {
            self.blossom_parent[bv] = b;
            children.push(bv);
            endps.push(self.label_end[bv]);
            debug_assert!(
                self.label[bv] == LBL_T
                    || (self.label[bv] == LBL_S
                        && self.label_end[bv] == self.mate[self.blossom_base[bv]])
            );
            debug_assert!(self.label_end[bv] != NONE);
            v = self.endpoint[self.label_end[bv]];
            bv = self.in_blossom[v];
        }
        children.push(bb);
        children.reverse();
        endps.reverse();
        endps.push(2 * k);
        while bw != bb {
            self.blossom_parent[bw] = b;
            children.push(bw);
            endps.push(self.label_end[bw] ^ 1);
            debug_assert!(
                self.label[bw] == LBL_T
                    || (self.label[bw] == LBL_S
                        && self.label_end[bw] == self.mate[self.blossom_base[bw]])
            );
            debug_assert!(self.label_end[bw] != NONE);
            w = self.endpoint[self.label_end[bw]];
            bw = self.in_blossom[w];
        }
        self.blossom_children[b] = children;
        self.blossom_endps[b] = endps;

        debug_assert_eq!(self.label[bb], LBL_S);
        self.label[b] = LBL_S;
        self.label_end[b] = self.label_end[bb];
        self.dual[b] = 0;

        for leaf in self.leaves(b) {
            if self.label[self.in_blossom[leaf]] == LBL_T {
                // T-vertex becomes S by joining an S-blossom
                self.queue.push(leaf);
            }
            self.in_blossom[leaf] = b;
        }

        // merge least-slack edge lists of the children
        let mut best_edge_to = vec![NONE; 2 * self.n];
        for bv in self.blossom_children[b].clone() {
            let candidate_edges: Vec<usize> = if self.blossom_best_edges[bv].is_empty() {
                self.leaves(bv)
                    .iter()
                    .flat_map(|&leaf| {
                        self.adj[self.adj_start[leaf]..self.adj_start[leaf + 1]]
                            .iter()
                            .map(|&p| p / 2)
                    })
                    .collect()
            } else {
                self.blossom_best_edges[bv].clone()
            };
            for k in candidate_edges {
                let (mut i, mut j, _) = self.edges[k];
                if self.in_blossom[j] == b {
                    std::mem::swap(&mut i, &mut j);
                }
                let bj = self.in_blossom[j];
                if bj != b
                    && self.label[bj] == LBL_S
                    && (best_edge_to[bj] == NONE || self.slack(k) < self.slack(best_edge_to[bj]))
                {
                    best_edge_to[bj] = k;
                }
            }
            self.blossom_best_edges[bv] = Vec::new();
            self.best_edge[bv] = NONE;
        }
        let merged: Vec<usize> = best_edge_to.into_iter().filter(|&k| k != NONE).collect();
        self.best_edge[b] = NONE;
        for &k in &merged {
            if self.best_edge[b] == NONE || self.slack(k) < self.slack(self.best_edge[b]) {
                self.best_edge[b] = k;
            }
        }
        self.blossom_best_edges[b] = merged;
    }

    /// Expand the top-level blossom b, promoting its children. During a stage
    /// (endstage=false) the children of a T-blossom must be relabeled.
    fn expand_blossom(&mut self, b: usize, endstage: bool) {
        for s in self.blossom_children[b].clone() {
            self.blossom_parent[s] = NONE;
            if s < self.n {
                self.in_blossom[s] = s;
            } else if endstage && self.dual[s] == 0 {
                self.expand_blossom(s, endstage);
            } else {
                for leaf in self.leaves(s) {
                    self.in_blossom[leaf] = s;
                }
            }
        }
        if !endstage && self.label[b] == LBL_T {
            // relabel along the blossom cycle from the entry child to the base
            debug_assert!(self.label_end[b] != NONE);
            let entry_child = self.in_blossom[self.endpoint[self.label_end[b] ^ 1]];
            let mut j = self.blossom_children[b]
                .iter()
                .position(|&c| c == entry_child)
                .expect("entry child present") as isize;
            let len = self.blossom_children[b].len() as isize;
            let (jstep, endptrick): (isize, usize) = if j & 1 != 0 {
                j -= len;
                (1, 0)
            } else {
                (-1, 1)
            };
            let mut p = self.label_end[b];
            while j != 0 {
                self.label[self.endpoint[p ^ 1]] = LBL_FREE;
                let q = self.endp(b, j - endptrick as isize) ^ endptrick;
                self.label[self.endpoint[q ^ 1]] = LBL_FREE;
                let ep = self.endpoint[p ^ 1];
                self.assign_label(ep, LBL_T, p);
                self.allow_edge[q / 2] = true;
                j += jstep;
                p = self.endp(b, j - endptrick as isize) ^ endptrick;
                self.allow_edge[p / 2] = true;
                j += jstep;
            }
            // relabel the base child without stepping through to its mate
            let bv = self.child(b, j);
            self.label[self.endpoint[p ^ 1]] = LBL_T;
            self.label[bv] = LBL_T;
            self.label_end[self.endpoint[p ^ 1]] = p;
            self.label_end[bv] = p;
            self.best_edge[bv] = NONE;
            j += jstep;
            while self.child(b, j) != entry_child {
                let bv = self.child(b, j);
                if self.label[bv] == LBL_S {
                    j += jstep;
                    continue;
                }
                let mut reached = NONE;
                for leaf in self.leaves(bv) {
                    reached = leaf;
                    if self.label[leaf] != LBL_FREE {
                        break;
                    }
                }
                if reached != NONE && self.label[reached] != LBL_FREE {
                    debug_assert_eq!(self.label[reached], LBL_T);
                    debug_assert_eq!(self.in_blossom[reached], bv);
                    self.label[reached] = LBL_FREE;
                    self.label[self.endpoint[self.mate[self.blossom_base[bv]]]] = LBL_FREE;
                    let le = self.label_end[reached];
                    self.assign_label(reached, LBL_T, le);
                }
                j += jstep;
            }
        }
        self.label[b] = LBL_FREE;
        self.label_end[b] = NONE;
        self.blossom_children[b] = Vec::new();
        self.blossom_endps[b] = Vec::new();
        self.blossom_base[b] = NONE;
        self.blossom_best_edges[b] = Vec::new();
        self.best_edge[b] = NONE;
        self.unused_blossoms.push(b);
    }

    /// Swap matched/unmatched edges along the path inside blossom b from
    /// vertex v down to the base, then rotate the child list so v's
    /// sub-blossom becomes the new base.
    fn augment_blossom(&mut self, b: usize, v: usize) {
        let mut t = v;
        while self.blossom_parent[t] != b {
            t = self.blossom_parent[t];
        }
        if t >= self.n {
            self.augment_blossom(t, v);
        }
        let i = self.blossom_children[b]
            .iter()
            .position(|&c| c == t)
            .expect("child present");
        let mut j = i as isize;
        let len = self.blossom_children[b].len() as isize;
        let (jstep, endptrick): (isize, usize) = if i & 1 != 0 {
            j -= len;
            (1, 0)
        } else {
            (-1, 1)
        };
        while j != 0 {
            j += jstep;
            let t = self.child(b, j);
            let p = self.endp(b, j - endptrick as isize) ^ endptrick;
            if t >= self.n {
                let ep = self.endpoint[p];
                self.augment_blossom(t, ep);
            }
            j += jstep;
            let t = self.child(b, j);
            if t >= self.n {
                let ep = self.endpoint[p ^ 1];
                self.augment_blossom(t, ep);
            }
            self.mate[self.endpoint[p]] = p ^ 1;
            self.mate[self.endpoint[p ^ 1]] = p;
        }
        self.blossom_children[b].rotate_left(i);
        self.blossom_endps[b].rotate_left(i);
        self.blossom_base[b] = self.blossom_base[self.blossom_children[b][0]];
        debug_assert_eq!(self.blossom_base[b], v);
    }

    /// Augment the matching along the alternating tree paths meeting at edge k.
    fn augment_matching(&mut self, k: usize) {
        let (v, w, _) = self.edges[k];
        for (mut s, mut p) in [(v, 2 * k + 1), (w, 2 * k)] {
            loop {
                let bs = self.in_blossom[s];
                debug_assert_eq!(self.label[bs], LBL_S);
                debug_assert_eq!(self.label_end[bs], self.mate[self.blossom_base[bs]]);
                if bs >= self.n {
                    self.augment_blossom(bs, s);
                }
                self.mate[s] = p;
                if self.label_end[bs] == NONE {
                    break; // reached a single vertex
                }
                let t = self.endpoint[self.label_end[bs]];
                let bt = self.in_blossom[t];
                debug_assert_eq!(self.label[bt], LBL_T);
                debug_assert!(self.label_end[bt] != NONE);
                s = self.endpoint[self.label_end[bt]];
                let j = self.endpoint[self.label_end[bt] ^ 1];
                debug_assert_eq!(self.blossom_base[bt], t);
                if bt >= self.n {
                    self.augment_blossom(bt, j);
                }
                self.mate[j] = self.label_end[bt];
                p = self.label_end[bt] ^ 1;
            }
        }
    }

    fn run(&mut self) {
        for _stage in 0..self.n {
            self.label.fill(LBL_FREE);
            self.best_edge.fill(NONE);
            for be in &mut self.blossom_best_edges[self.n..] {
                be.clear();
            }
            self.allow_edge.fill(false);
            self.queue.clear();
            for v in 0..self.n {
                if self.mate[v] == NONE && self.label[self.in_blossom[v]] == LBL_FREE {
                    self.assign_label(v, LBL_S, NONE);
                }
            }
            let mut augmented = false;
            loop {
                while let Some(v) = self.queue.pop() {
                    debug_assert_eq!(self.label[self.in_blossom[v]], LBL_S);
                    let mut kslack = 0i64;
                    for pi in self.adj_start[v]..self.adj_start[v + 1] {
                        let p = self.adj[pi];
                        let k = p / 2;
                        let w = self.endpoint[p];
                        if self.in_blossom[v] == self.in_blossom[w] {
                            continue; // internal to a blossom
                        }
                        if !self.allow_edge[k] {
                            kslack = self.slack(k);
                            if kslack <= 0 {
                                self.allow_edge[k] = true;
                            }
                        }
                        if self.allow_edge[k] {
                            let bw = self.in_blossom[w];
                            if self.label[bw] == LBL_FREE {
                                self.assign_label(w, LBL_T, p ^ 1);
                            } else if self.label[bw] == LBL_S {
                                let base = self.scan_blossom(v, w);
                                if base != NONE {
                                    self.add_blossom(base, k);
                                } else {
                                    self.augment_matching(k);
                                    augmented = true;
                                    break;
                                }
                            } else if self.label[w] == LBL_FREE {
                                debug_assert_eq!(self.label[bw], LBL_T);
                                self.label[w] = LBL_T;
                                self.label_end[w] = p ^ 1;
                            }
                        } else if self.label[self.in_blossom[w]] == LBL_S {
                            let b = self.in_blossom[v];
                            if self.best_edge[b] == NONE
                                || kslack < self.slack(self.best_edge[b])
                            {
                                self.best_edge[b] = k;
                            }
                        } else if self.label[w] == LBL_FREE
                            && (self.best_edge[w] == NONE
                                || kslack < self.slack(self.best_edge[w]))
                        {
                            self.best_edge[w] = k;
                        }
                    }
                    if augmented {
                        break;
                    }
                }
                if augmented {
                    break;
                }

                // no augmenting path under the current duals: compute the
                // largest safe dual change
                let mut delta_type = 0u8;
                let mut delta = 0i64;
                let mut delta_edge = NONE;
                let mut delta_blossom = NONE;
                if !self.max_cardinality {
                    delta_type = 1;
                    delta = self.dual[..self.n].iter().copied().min().unwrap().max(0);
                }
                for v in 0..self.n {
                    if self.label[self.in_blossom[v]] == LBL_FREE && self.best_edge[v] != NONE {
                        let d = self.slack(self.best_edge[v]);
                        if delta_type == 0 || d < delta {
                            delta = d;
                            delta_type = 2;
                            delta_edge = self.best_edge[v];
                        }
                    }
                }
                for b in 0..2 * self.n {
                    if self.blossom_parent[b] == NONE
                        && self.label[b] == LBL_S
                        && self.best_edge[b] != NONE
                    {
                        let d = self.slack(self.best_edge[b]) / 2;
                        if delta_type == 0 || d < delta {
                            delta = d;
                            delta_type = 3;
                            delta_edge = self.best_edge[b];
                        }
                    }
                }
                for b in self.n..2 * self.n {
                    if self.blossom_base[b] != NONE
                        && self.blossom_parent[b] == NONE
                        && self.label[b] == LBL_T
                        && (delta_type == 0 || self.dual[b] < delta)
                    {
                        delta = self.dual[b];
                        delta_type = 4;
                        delta_blossom = b;
                    }
                }
                if delta_type == 0 {
                    // optimum reached under max-cardinality; final cleanup step
                    debug_assert!(self.max_cardinality);
                    delta_type = 1;
                    delta = self.dual[..self.n].iter().copied().min().unwrap().max(0);
                }

                for v in 0..self.n {
                    match self.label[self.in_blossom[v]] {
                        LBL_FREE => {}
                        LBL_S => self.dual[v] -= delta,
                        _ => self.dual[v] += delta,
                    }
                }
                for b in self.n..2 * self.n {
                    if self.blossom_base[b] != NONE && self.blossom_parent[b] == NONE {
                        match self.label[b] {
                            LBL_FREE => {}
                            LBL_S => self.dual[b] += delta,
                            _ => self.dual[b] -= delta,
                        }
                    }
                }

                match delta_type {
                    1 => break, // optimum reached
                    2 => {
                        self.allow_edge[delta_edge] = true;
                        let (mut i, j, _) = self.edges[delta_edge];
                        if self.label[self.in_blossom[i]] == LBL_FREE {
                            i = j;
                        }
                        debug_assert_eq!(self.label[self.in_blossom[i]], LBL_S);
                        self.queue.push(i);
                    }
                    3 => {
                        self.allow_edge[delta_edge] = true;
                        let (i, _, _) = self.edges[delta_edge];
                        debug_assert_eq!(self.label[self.in_blossom[i]], LBL_S);
                        self.queue.push(i);
                    }
                    _ => {
                        self.expand_blossom(delta_blossom, false);
                    }
                }
            }
            if !augmented {
                break;
            }
            for b in self.n..2 * self.n {
                if self.blossom_parent[b] == NONE
                    && self.blossom_base[b] != NONE
                    && self.label[b] == LBL_S
                    && self.dual[b] == 0
                {
                    self.expand_blossom(b, true);
                }
            }
        }
    }

    /// Partner vertex per vertex (NONE when unmatched).
    pub fn mates(&self) -> Vec<usize> {
        self.mate
            .iter()
            .map(|&p| if p == NONE { NONE } else { self.endpoint[p] })
            .collect()
    }

    /// Per-vertex chains of enclosing nontrivial blossoms, outermost first.
    pub fn ancestor_chains(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|v| {
                let mut chain = Vec::new();
                let mut b = v;
                while self.blossom_parent[b] != NONE {
                    b = self.blossom_parent[b];
                    chain.push(b);
                }
                chain.reverse();
                chain
            })
            .collect()
    }

    /// 2 * slack of a (possibly excluded) edge (i, j) of weight w under the
    /// final duals, including the duals of blossoms containing both ends.
    /// Nonnegative slack on every edge of the complete graph extends the
    /// optimality certificate from the solved subgraph to the whole graph.
    pub fn edge_slack(&self, chains: &[Vec<usize>], i: usize, j: usize, w: i64) -> i64 {
        let mut s = self.dual[i] + self.dual[j] - 2 * w;
        for (bi, bj) in chains[i].iter().zip(chains[j].iter()) {
            if bi != bj {
                break;
            }
            s += 2 * self.dual[*bi];
        }
        s
    }

    /// Check the complementary-slackness certificate of optimality.
    #[cfg(test)]
    fn verify_optimum(&self) {
        let dual_offset = if self.max_cardinality {
            // vertex duals may go negative; shift by a common constant
            (-self.dual[..self.n].iter().copied().min().unwrap()).max(0)
        } else {
            0
        };
        assert!(self.dual[..self.n].iter().all(|&d| d + dual_offset >= 0));
        assert!(self.dual[self.n..].iter().all(|&d| d >= 0));
        for k in 0..self.edges.len() {
            let (i, j, w) = self.edges[k];
            let mut s = self.dual[i] + self.dual[j] - 2 * w;
            let mut iblossoms = vec![i];
            let mut jblossoms = vec![j];
            while self.blossom_parent[*iblossoms.last().unwrap()] != NONE {
                iblossoms.push(self.blossom_parent[*iblossoms.last().unwrap()]);
            }
            while self.blossom_parent[*jblossoms.last().unwrap()] != NONE {
                jblossoms.push(self.blossom_parent[*jblossoms.last().unwrap()]);
            }
            iblossoms.reverse();
            jblossoms.reverse();
            for (&bi, &bj) in iblossoms.iter().zip(jblossoms.iter()) {
                if bi != bj {
                    break;
                }
                s += 2 * self.dual[bi];
            }
            assert!(s >= 0, "edge {k} has negative slack {s}");
            let i_matched = self.mate[i] != NONE && self.mate[i] / 2 == k;
            let j_matched = self.mate[j] != NONE && self.mate[j] / 2 == k;
            if i_matched || j_matched {
                assert!(i_matched && j_matched);
                assert_eq!(s, 0, "matched edge {k} has nonzero slack");
            }
        }
        for v in 0..self.n {
            assert!(self.mate[v] != NONE || self.dual[v] + dual_offset == 0);
        }
        for b in self.n..2 * self.n {
            if self.blossom_base[b] != NONE && self.dual[b] > 0 {
                assert!(self.blossom_endps[b].len() % 2 == 1);
                for (ix, &p) in self.blossom_endps[b].iter().enumerate() {
                    if ix % 2 == 1 {
                        assert_eq!(self.mate[self.endpoint[p]], p ^ 1);
                        assert_eq!(self.mate[self.endpoint[p ^ 1]], p);
                    }
                }
            }
        }
    }
}
