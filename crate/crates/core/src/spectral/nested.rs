//! Nested-dissection ordering and the assembly tree of a multifrontal
//! factorization.
//!
//! The graph is split recursively by level-set separators of a breadth-first
//! search from a pseudo-peripheral vertex. Variables are numbered in
//! postorder, so every front owns a contiguous range and eliminates it
//! before its parent.

use std::ops::Range;

use crate::discretize::SparseHermitian;

/// Subgraphs at most this large are not dissected further.
pub const LEAF_SIZE: usize = 64;

/// One node of the assembly tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Front {
    /// Variables eliminated here, in the new numbering.
    pub vars: Range<usize>,
    /// Later variables coupled to `vars` after fill, ascending.
    pub boundary: Vec<usize>,
    pub children: Vec<usize>,
}

impl Front {
    pub fn size(&self) -> usize {
        self.vars.len() + self.boundary.len()
    }
}

/// Symmetric permutation plus assembly tree, independent of the shift.
#[derive(Clone, Debug)]
pub struct Analysis {
    /// `perm[new] = old`.
    pub perm: Vec<usize>,
    /// `inverse[old] = new`.
    pub inverse: Vec<usize>,
    /// Fronts in postorder: children precede parents.
    pub fronts: Vec<Front>,
}

impl Analysis {
    pub fn new(h: &SparseHermitian) -> Analysis {
        let n = h.dim();
        let mut d = Dissector {
            h,
            mark: vec![0; n],
            stamp: 0,
            perm: Vec::with_capacity(n),
            fronts: Vec::new(),
        };
        let all: Vec<usize> = (0..n).collect();
        if n > 0 {
            d.dissect(all);
        }
        let perm = d.perm;
        let mut fronts = d.fronts;
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        symbolic(h, &perm, &inverse, &mut fronts);
        Analysis { perm, inverse, fronts }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Stored entries of the factor (lower triangle including `D`).
    pub fn factor_entries(&self) -> usize {
        self.fronts
            .iter()
            .map(|f| {
                let s = f.vars.len();
                s * (s + 1) / 2 + s * f.boundary.len()
            })
            .sum()
    }

    pub fn max_front(&self) -> usize {
        self.fronts.iter().map(Front::size).max().unwrap_or(0)
    }
}

struct Dissector<'a> {
    h: &'a SparseHermitian,
    mark: Vec<u32>,
    stamp: u32,
    perm: Vec<usize>,
    fronts: Vec<Front>,
}

impl Dissector<'_> {
    fn next_stamp(&mut self, nodes: &[usize]) -> u32 {
        self.stamp += 1;
        for &v in nodes {
            self.mark[v] = self.stamp;
        }
        self.stamp
    }

    fn push_front(&mut self, vars: Vec<usize>, children: Vec<usize>) -> usize {
        let start = self.perm.len();
        self.perm.extend(vars);
        self.fronts.push(Front {
            vars: start..self.perm.len(),
            boundary: Vec::new(),
            children,
        });
        self.fronts.len() - 1
    }

    /// Breadth-first levels of the marked set reachable from `start`.
    fn levels(&mut self, start: usize, inside: u32) -> Vec<Vec<usize>> {
        let visited = self.next_stamp(&[start]);
        let mut levels = vec![vec![start]];
        loop {
            let mut next = Vec::new();
            for &v in levels.last().unwrap() {
                for u in self.h.neighbours(v) {
                    if self.mark[u] == inside {
                        self.mark[u] = visited;
                        next.push(u);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            levels.push(next);
        }
        // Restore membership for the next search.
        for level in &levels {
            for &v in level {
                self.mark[v] = inside;
            }
        }
        levels
    }

    /// Connected components of the set marked `inside`.
    fn components(&mut self, nodes: &[usize], inside: u32) -> Vec<Vec<usize>> {
        self.stamp += 1;
        let seen = self.stamp;
        let mut out = Vec::new();
        for &root in nodes {
            if self.mark[root] != inside {
                continue;
            }
            self.mark[root] = seen;
            let mut comp = vec![root];
            let mut head = 0;
            while head < comp.len() {
                let v = comp[head];
                head += 1;
                for u in self.h.neighbours(v) {
                    if self.mark[u] == inside {
                        self.mark[u] = seen;
                        comp.push(u);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    fn dissect(&mut self, nodes: Vec<usize>) -> usize {
        if nodes.len() <= LEAF_SIZE {
            return self.push_front(nodes, Vec::new());
        }
        let inside = self.next_stamp(&nodes);
        let levels = self.levels(nodes[0], inside);
        let reached: usize = levels.iter().map(Vec::len).sum();
        if reached < nodes.len() {
            // Disconnected: one child per component under an empty front.
            // Small components share leaves; large ones are dissected alone.
            let mut parts: Vec<Vec<usize>> = Vec::new();
            let mut batch: Vec<usize> = Vec::new();
            for comp in self.components(&nodes, inside) {
                if comp.len() > LEAF_SIZE {
                    parts.push(comp);
                } else {
                    if batch.len() + comp.len() > LEAF_SIZE {
                        parts.push(std::mem::take(&mut batch));
                    }
                    batch.extend(comp);
                }
            }
            if !batch.is_empty() {
                parts.push(batch);
            }
            let children = parts.into_iter().map(|c| self.dissect(c)).collect();
            return self.push_front(Vec::new(), children);
        }

        // Pseudo-peripheral start: move to a far vertex while depth grows.
        let mut levels = levels;
        loop {
            let far = *levels
                .last()
                .unwrap()
                .iter()
                .min_by_key(|&&v| (self.h.neighbours(v).count(), v))
                .unwrap();
            let candidate = self.levels(far, inside);
            if candidate.len() > levels.len() {
                levels = candidate;
            } else {
                break;
            }
        }
        if levels.len() < 3 {
            return self.push_front(nodes, Vec::new());
        }

        let total = nodes.len();
        let sizes: Vec<usize> = levels.iter().map(Vec::len).collect();
        let mut below = vec![0; sizes.len()];
        for k in 1..sizes.len() {
            below[k] = below[k - 1] + sizes[k - 1];
        }
        let split = |k: usize| (below[k], total - below[k] - sizes[k]);
        let balanced = (1..sizes.len() - 1).filter(|&k| {
            let (lo, hi) = split(k);
            4 * lo.min(hi) >= total
        });
        let median = (1..sizes.len() - 1)
            .min_by_key(|&k| {
                let (lo, hi) = split(k);
                lo.abs_diff(hi)
            })
            .unwrap();
        let k = balanced
            .min_by_key(|&k| {
                let (lo, hi) = split(k);
                (sizes[k], lo.abs_diff(hi))
            })
            .unwrap_or(median);

        let separator = std::mem::take(&mut levels[k]);
        let first: Vec<usize> = levels[..k].concat();
        let second: Vec<usize> = levels[k + 1..].concat();
        let mut children = Vec::with_capacity(2);
        for part in [first, second] {
            if !part.is_empty() {
                children.push(self.dissect(part));
            }
        }
        self.push_front(separator, children)
    }
}

/// Fills in each front's boundary: its own couplings to later variables
/// plus the children's boundaries past its range.
fn symbolic(h: &SparseHermitian, perm: &[usize], inverse: &[usize], fronts: &mut [Front]) {
    for t in 0..fronts.len() {
        let vars = fronts[t].vars.clone();
        let mut boundary = Vec::new();
        for v in vars.clone() {
            for u in h.neighbours(perm[v]) {
                let u = inverse[u];
                if u >= vars.end {
                    boundary.push(u);
                }
            }
        }
        for &c in &fronts[t].children {
            boundary.extend(fronts[c].boundary.iter().copied().filter(|&u| u >= vars.end));
        }
        boundary.sort_unstable();
        boundary.dedup();
        fronts[t].boundary = boundary;
    }
}
