//! Uncapacitated min-cost flow by the primal network simplex method.
//!
//! The spanning tree hangs from an artificial root joined to every node by a
//! big-M arc. Potentials follow the convention that the reduced cost
//! `cost + pi[source] - pi[target]` vanishes on tree arcs. The leaving arc is
//! chosen by the strongly feasible rule, which prevents cycling on degenerate
//! pivots.

use crate::error::{HarnessError, Result};

const NONE: usize = usize::MAX;

/// Directed arcs with non-negative costs and unbounded capacity.
#[derive(Debug, Clone, Default)]
pub struct FlowNetwork {
    nodes: usize,
    source: Vec<usize>,
    target: Vec<usize>,
    cost: Vec<f64>,
}

/// Optimal flow together with dual potentials `y` satisfying
/// `y[u] - y[v] <= cost` on every arc `u -> v`, tight on arcs that carry flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    pub flow: Vec<f64>,
    pub potential: Vec<f64>,
    pub cost: f64,
    pub pivots: usize,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        Self { nodes, ..Self::default() }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn arcs(&self) -> usize {
        self.source.len()
    }

    pub fn arc(&self, e: usize) -> (usize, usize, f64) {
        (self.source[e], self.target[e], self.cost[e])
    }

    pub fn add_arc(&mut self, u: usize, v: usize, cost: f64) -> usize {
        assert!(u < self.nodes && v < self.nodes, "arc endpoint out of range");
        assert!(cost.is_finite() && cost >= 0.0, "arc cost must be finite and non-negative");
        self.source.push(u);
        self.target.push(v);
        self.cost.push(cost);
        self.source.len() - 1
    }

    /// Two opposite arcs of equal cost.
    pub fn add_edge(&mut self, u: usize, v: usize, cost: f64) {
        self.add_arc(u, v, cost);
        self.add_arc(v, u, cost);
    }

    /// Minimizes `sum cost * flow` subject to `out(v) - in(v) = supply[v]`.
    /// Supplies must sum to zero and the arcs must connect every node carrying
    /// supply; violations surface as errors.
    pub fn solve(&self, supply: &[f64]) -> Result<FlowSolution> {
        if supply.len() != self.nodes {
            return Err(HarnessError::Runtime(format!("supply has {} entries for {} nodes", supply.len(), self.nodes)));
        }
        let scale: f64 = supply.iter().map(|b| b.abs()).sum::<f64>().max(1e-300);
        if supply.iter().any(|b| !b.is_finite()) || supply.iter().sum::<f64>().abs() > 1e-9 * scale.max(1.0) {
            return Err(HarnessError::Runtime("supplies must be finite and sum to zero".into()));
        }
        Simplex::new(self, supply).run()
    }
}

struct Simplex {
    n: usize,
    m: usize,
    source: Vec<usize>,
    target: Vec<usize>,
    cost: Vec<f64>,
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    /// `pred` arc points from the node to its parent.
    up: Vec<bool>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    children: Vec<Vec<usize>>,
    child_pos: Vec<usize>,
    eps: f64,
    scale: f64,
}

impl Simplex {
    fn new(net: &FlowNetwork, supply: &[f64]) -> Self {
        let n = net.nodes;
        let m = net.arcs();
        let root = n;
        let max_cost = net.cost.iter().copied().fold(0.0, f64::max);
        // Exceeds the cost of any simple path, so artificial arcs never pay off.
        let big = 1.0 + (n as f64 + 1.0) * max_cost.max(1e-3);
        let total = m + n;
        let mut s = Self {
            n,
            m,
            source: Vec::with_capacity(total),
            target: Vec::with_capacity(total),
            cost: Vec::with_capacity(total),
            flow: vec![0.0; total],
            in_tree: vec![false; total],
            parent: vec![NONE; n + 1],
            pred: vec![NONE; n + 1],
            up: vec![false; n + 1],
            depth: vec![0; n + 1],
            pi: vec![0.0; n + 1],
            children: vec![Vec::new(); n + 1],
            child_pos: vec![0; n + 1],
            eps: 1e-12 * big,
            scale: supply.iter().map(|b| b.abs()).sum::<f64>(),
        };
        s.source.extend_from_slice(&net.source);
        s.target.extend_from_slice(&net.target);
        s.cost.extend_from_slice(&net.cost);
        for (v, &b) in supply.iter().enumerate() {
            let e = m + v;
            // Zero-flow artificial arcs point away from the root (strong feasibility).
            if b > 0.0 {
                s.source.push(v);
                s.target.push(root);
                s.up[v] = true;
                s.pi[v] = -big;
                s.flow[e] = b;
            } else {
                s.source.push(root);
                s.target.push(v);
                s.pi[v] = big;
                s.flow[e] = -b;
            }
            s.cost.push(big);
            s.in_tree[e] = true;
            s.parent[v] = root;
            s.pred[v] = e;
            s.depth[v] = 1;
            s.add_child(root, v);
        }
        s
    }

    fn add_child(&mut self, p: usize, v: usize) {
        self.child_pos[v] = self.children[p].len();
        self.children[p].push(v);
    }

    fn remove_child(&mut self, p: usize, v: usize) {
        let i = self.child_pos[v];
        debug_assert_eq!(self.children[p][i], v);
        self.children[p].swap_remove(i);
        if let Some(&moved) = self.children[p].get(i) {
            self.child_pos[moved] = i;
        }
    }

    fn reduced_cost(&self, e: usize) -> f64 {
        self.cost[e] + self.pi[self.source[e]] - self.pi[self.target[e]]
    }

    /// Block search: the most negative reduced cost within the first block
    /// that contains any candidate.
    fn entering(&self, next: &mut usize, block: usize) -> Option<usize> {
        let total = self.source.len();
        let mut best = -self.eps;
        let mut found = None;
        let mut count = block;
        for k in 0..total {
            let e = (*next + k) % total;
            if !self.in_tree[e] {
                let rc = self.reduced_cost(e);
                if rc < best {
                    best = rc;
                    found = Some(e);
                }
            }
            count -= 1;
            if count == 0 {
                if found.is_some() {
                    *next = (e + 1) % total;
                    return found;
                }
                count = block;
            }
        }
        found
    }

    fn join(&self, mut a: usize, mut b: usize) -> usize {
        while a != b {
            if self.depth[a] >= self.depth[b] {
                a = self.parent[a];
            } else {
                b = self.parent[b];
            }
        }
        a
    }

    fn pivot(&mut self, e_in: usize) -> Result<()> {
        let (first, second) = (self.source[e_in], self.target[e_in]);
        let join = self.join(first, second);
        // Flow is pushed first -> second; it runs down the first side and up the second.
        let mut delta = f64::INFINITY;
        let mut u_out = NONE;
        let mut on_first = false;
        let mut u = first;
        while u != join {
            if self.up[u] {
                let d = self.flow[self.pred[u]].max(0.0);
                if d < delta {
                    delta = d;
                    u_out = u;
                    on_first = true;
                }
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != join {
            if !self.up[u] {
                let d = self.flow[self.pred[u]].max(0.0);
                if d <= delta {
                    delta = d;
                    u_out = u;
                    on_first = false;
                }
            }
            u = self.parent[u];
        }
        if u_out == NONE {
            return Err(HarnessError::Runtime("negative-cost cycle: the flow problem is unbounded".into()));
        }
        if delta > 0.0 {
            self.flow[e_in] += delta;
            let mut u = first;
            while u != join {
                self.flow[self.pred[u]] += if self.up[u] { -delta } else { delta };
                u = self.parent[u];
            }
            let mut u = second;
            while u != join {
                self.flow[self.pred[u]] += if self.up[u] { delta } else { -delta };
                u = self.parent[u];
            }
        }
        let leaving = self.pred[u_out];
        self.flow[leaving] = 0.0;
        self.in_tree[leaving] = false;
        self.in_tree[e_in] = true;
        let (u_in, v_in) = if on_first { (first, second) } else { (second, first) };
        self.rehang(u_in, v_in, u_out, e_in);
        Ok(())
    }

    /// Reverses the stem `u_in .. u_out` and hangs `u_in` below `v_in` by `e_in`.
    fn rehang(&mut self, u_in: usize, v_in: usize, u_out: usize, e_in: usize) {
        let mut stem = vec![u_in];
        while *stem.last().expect("stem is non-empty") != u_out {
            let last = *stem.last().expect("stem is non-empty");
            stem.push(self.parent[last]);
        }
        let old_pred: Vec<usize> = stem.iter().map(|&w| self.pred[w]).collect();
        let old_up: Vec<bool> = stem.iter().map(|&w| self.up[w]).collect();
        self.remove_child(self.parent[u_out], u_out);
        for j in (1..stem.len()).rev() {
            let (w, child) = (stem[j], stem[j - 1]);
            self.remove_child(w, child);
            self.parent[w] = child;
            self.pred[w] = old_pred[j - 1];
            self.up[w] = !old_up[j - 1];
            self.add_child(child, w);
        }
        self.parent[u_in] = v_in;
        self.pred[u_in] = e_in;
        self.up[u_in] = self.source[e_in] == u_in;
        self.add_child(v_in, u_in);
        self.refresh_subtree(u_in);
    }

    fn refresh_subtree(&mut self, top: usize) {
        let mut stack = vec![top];
        while let Some(w) = stack.pop() {
            let p = self.parent[w];
            let c = self.cost[self.pred[w]];
            self.depth[w] = self.depth[p] + 1;
            self.pi[w] = if self.up[w] { self.pi[p] - c } else { self.pi[p] + c };
            stack.extend_from_slice(&self.children[w]);
        }
    }

    fn run(mut self) -> Result<FlowSolution> {
        let total = self.source.len();
        let block = ((total as f64).sqrt() as usize).max(10);
        let cap = 100 * total + 1000;
        let mut next = 0;
        let mut pivots = 0;
        while let Some(e) = self.entering(&mut next, block) {
            self.pivot(e)?;
            pivots += 1;
            if pivots > cap {
                return Err(HarnessError::Runtime(format!("network simplex exceeded {cap} pivots")));
            }
        }
        let stranded: f64 = self.flow[self.m..].iter().sum();
        if stranded > 1e-9 * self.scale.max(1e-300) {
            return Err(HarnessError::Runtime(format!(
                "flow problem infeasible: {stranded:e} units left on artificial arcs"
            )));
        }
        let flow: Vec<f64> = self.flow[..self.m].to_vec();
        let cost = flow.iter().zip(&self.cost).map(|(f, c)| f * c).sum();
        let potential = self.pi[..self.n].iter().map(|p| -p).collect();
        Ok(FlowSolution { flow, potential, cost, pivots })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_arc() {
        let mut net = FlowNetwork::new(2);
        net.add_arc(0, 1, 2.5);
        let sol = net.solve(&[1.5, -1.5]).unwrap();
        assert_eq!(sol.flow, vec![1.5]);
        assert!((sol.cost - 3.75).abs() < 1e-12);
        assert!((sol.potential[0] - sol.potential[1] - 2.5).abs() < 1e-9);
    }

    #[test]
    fn picks_the_cheaper_route() {
        let mut net = FlowNetwork::new(3);
        net.add_edge(0, 1, 5.0);
        net.add_edge(0, 2, 1.0);
        net.add_edge(2, 1, 1.0);
        let sol = net.solve(&[1.0, -1.0, 0.0]).unwrap();
        assert!((sol.cost - 2.0).abs() < 1e-12);
    }

    #[test]
    fn disconnected_supply_is_reported() {
        let mut net = FlowNetwork::new(3);
        net.add_edge(0, 1, 1.0);
        assert!(net.solve(&[1.0, 0.0, -1.0]).is_err());
        assert!(net.solve(&[1.0, 0.0, 0.0]).is_err());
    }
}
