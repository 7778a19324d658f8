//! Graph views of a single pool's process: reachability, depth-first back
//! edges, dominators and natural loops.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use super::Pool;

/// Index-based adjacency for one pool. Flows with an endpoint outside the
/// pool are left out.
pub struct PoolGraph<'a> {
    pub pool: &'a Pool,
    index: BTreeMap<&'a str, usize>,
    /// `(flow index, target node)` per node.
    succ: Vec<Vec<(usize, usize)>>,
    /// `(flow index, source node)` per node.
    pred: Vec<Vec<(usize, usize)>>,
}

impl<'a> PoolGraph<'a> {
    pub fn new(pool: &'a Pool) -> Self {
        let index: BTreeMap<&str, usize> = pool
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect();
        let n = pool.nodes.len();
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        for (fi, f) in pool.sequence_flows.iter().enumerate() {
            if let (Some(&s), Some(&t)) =
                (index.get(f.source.as_str()), index.get(f.target.as_str()))
            {
                succ[s].push((fi, t));
                pred[t].push((fi, s));
            }
        }
        PoolGraph {
            pool,
            index,
            succ,
            pred,
        }
    }

    pub fn len(&self) -> usize {
        self.pool.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pool.nodes.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn successors(&self, node: usize) -> &[(usize, usize)] {
        &self.succ[node]
    }

    pub fn predecessors(&self, node: usize) -> &[(usize, usize)] {
        &self.pred[node]
    }

    pub fn starts(&self) -> Vec<usize> {
        self.pool
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.kind.is_start())
            .map(|(i, _)| i)
            .collect()
    }

    fn sweep(&self, seeds: &[usize], forward: bool) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack: Vec<usize> = seeds.to_vec();
        for &s in seeds {
            seen[s] = true;
        }
        while let Some(v) = stack.pop() {
            let next = if forward {
                &self.succ[v]
            } else {
                &self.pred[v]
            };
            for &(_, w) in next {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Nodes reachable from a start event.
    pub fn reachable(&self) -> Vec<bool> {
        self.sweep(&self.starts(), true)
    }

    /// Nodes from which an end event is reachable.
    pub fn coreachable(&self) -> Vec<bool> {
        let ends: Vec<usize> = self
            .pool
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.kind.is_end())
            .map(|(i, _)| i)
            .collect();
        self.sweep(&ends, false)
    }

    /// Marks flows that close a cycle in a depth-first search rooted at the
    /// start events (in declaration order), then at any unvisited node.
    pub fn back_edges(&self) -> Vec<bool> {
        #[derive(Clone, Copy, PartialEq)]
        enum Color {
            White,
            Grey,
            Black,
        }
        let mut color = vec![Color::White; self.len()];
        let mut back = vec![false; self.pool.sequence_flows.len()];
        let roots = self.starts().into_iter().chain(0..self.len());
        for root in roots {
            if color[root] != Color::White {
                continue;
            }
            let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
            color[root] = Color::Grey;
            while let Some(&mut (v, ref mut next)) = stack.last_mut() {
                if let Some(&(fi, w)) = self.succ[v].get(*next) {
                    *next += 1;
                    match color[w] {
                        Color::White => {
                            color[w] = Color::Grey;
                            stack.push((w, 0));
                        }
                        Color::Grey => back[fi] = true,
                        Color::Black => {}
                    }
                } else {
                    color[v] = Color::Black;
                    stack.pop();
                }
            }
        }
        back
    }

    /// Immediate dominators with respect to a virtual entry that precedes
    /// every start event. `None` for start events and unreachable nodes.
    pub fn immediate_dominators(&self) -> Vec<Option<usize>> {
        let n = self.len();
        let entry = n; // virtual
        let starts = self.starts();

        // reverse postorder from the virtual entry
        let mut order = Vec::with_capacity(n + 1);
        let mut seen = vec![false; n + 1];
        let mut stack: Vec<(usize, usize)> = vec![(entry, 0)];
        seen[entry] = true;
        let succ_of = |v: usize| -> Vec<usize> {
            if v == entry {
                starts.clone()
            } else {
                self.succ[v].iter().map(|&(_, w)| w).collect()
            }
        };
        while let Some(&mut (v, ref mut i)) = stack.last_mut() {
            let s = succ_of(v);
            if let Some(&w) = s.get(*i) {
                *i += 1;
                if !seen[w] {
                    seen[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
                stack.pop();
            }
        }
        order.reverse();
        let mut rpo = vec![usize::MAX; n + 1];
        for (i, &v) in order.iter().enumerate() {
            rpo[v] = i;
        }

        let mut idom: Vec<Option<usize>> = vec![None; n + 1];
        idom[entry] = Some(entry);
        let preds_of = |v: usize| -> Vec<usize> {
            let mut p: Vec<usize> = self.pred[v].iter().map(|&(_, u)| u).collect();
            if starts.contains(&v) {
                p.push(entry);
            }
            p
        };
        let intersect = |idom: &[Option<usize>], mut a: usize, mut b: usize| -> usize {
            while a != b {
                while rpo[a] > rpo[b] {
                    a = idom[a].expect("processed");
                }
                while rpo[b] > rpo[a] {
                    b = idom[b].expect("processed");
                }
            }
            a
        };
        let mut changed = true;
        while changed {
            changed = false;
            for &v in order.iter().skip(1) {
                let mut new_idom: Option<usize> = None;
                for p in preds_of(v) {
                    if idom[p].is_none() {
                        continue;
                    }
                    new_idom = Some(match new_idom {
                        None => p,
                        Some(cur) => intersect(&idom, p, cur),
                    });
                }
                if new_idom.is_some() && idom[v] != new_idom {
                    idom[v] = new_idom;
                    changed = true;
                }
            }
        }
        idom.truncate(n);
        idom.into_iter()
            .map(|d| d.filter(|&d| d != entry))
            .collect()
    }

    /// Whether every path from a start event to `b` passes `a`.
    pub fn dominates(&self, idom: &[Option<usize>], a: usize, b: usize) -> bool {
        let mut cur = Some(b);
        while let Some(v) = cur {
            if v == a {
                return true;
            }
            cur = idom[v];
        }
        false
    }

    /// Nodes of the natural loop closed by back edge `flow`: its target and
    /// every node that reaches its source without passing the target.
    pub fn natural_loop(&self, flow: usize) -> BTreeSet<usize> {
        let f = &self.pool.sequence_flows[flow];
        let (Some(src), Some(head)) = (self.index_of(&f.source), self.index_of(&f.target)) else {
            return BTreeSet::new();
        };
        let mut body = BTreeSet::new();
        body.insert(head);
        let mut stack = vec![src];
        while let Some(v) = stack.pop() {
            if body.insert(v) {
                for &(_, u) in &self.pred[v] {
                    stack.push(u);
                }
            }
        }
        body
    }
}
