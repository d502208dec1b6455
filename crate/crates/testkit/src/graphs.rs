//! Small control flow graph shapes and brute-force definitions of
//! post-dominance and control dependence based on path enumeration.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Node 0 is the entry and the last node is the exit. Every other node has
/// either one unlabelled successor or a `true` and a `false` successor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, Option<bool>)>,
}

impl RawGraph {
    pub fn exit(&self) -> usize {
        self.n - 1
    }

    fn succ(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|e| e.0 == v)
            .map(|e| e.1)
            .collect()
    }

    /// All simple paths from `from` to `to` (inclusive of both ends).
    pub fn simple_paths(&self, from: usize, to: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut path = vec![from];
        let mut on = vec![false; self.n];
        on[from] = true;
        self.dfs(to, &mut path, &mut on, &mut out);
        out
    }

    fn dfs(&self, to: usize, path: &mut Vec<usize>, on: &mut [bool], out: &mut Vec<Vec<usize>>) {
        let v = *path.last().unwrap();
        if v == to {
            out.push(path.clone());
            return;
        }
        let mut seen = BTreeSet::new();
        for s in self.succ(v) {
            if on[s] || !seen.insert(s) {
                continue;
            }
            on[s] = true;
            path.push(s);
            self.dfs(to, path, on, out);
            path.pop();
            on[s] = false;
        }
    }

    pub fn every_node_reaches_exit(&self) -> bool {
        (0..self.n).all(|v| !self.simple_paths(v, self.exit()).is_empty())
    }
}

/// Every graph shape with `n` nodes (no successor pair restrictions beyond
/// the exit having none).
pub fn exhaustive(n: usize) -> Vec<RawGraph> {
    let choices: Vec<Vec<(usize, usize, Option<bool>)>> = {
        let mut c = Vec::new();
        for t in 0..n {
            c.push(vec![(0, t, None)]);
        }
        for t in 0..n {
            for f in 0..n {
                c.push(vec![(0, t, Some(true)), (0, f, Some(false))]);
            }
        }
        c
    };
    let inner = n - 1;
    let total = choices.len().pow(inner as u32);
    let mut out = Vec::with_capacity(total);
    for mut code in 0..total {
        let mut edges = Vec::new();
        for v in 0..inner {
            let pick = &choices[code % choices.len()];
            code /= choices.len();
            edges.extend(pick.iter().map(|&(_, to, l)| (v, to, l)));
        }
        out.push(RawGraph { n, edges });
    }
    out
}

pub fn random(seed: u64, count: usize, sizes: std::ops::RangeInclusive<usize>) -> Vec<RawGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(sizes.clone());
            let mut edges = Vec::new();
            for v in 0..n - 1 {
                // lean forward so that most graphs reach the exit
                let pick = |rng: &mut ChaCha8Rng| {
                    if rng.gen_bool(0.7) {
                        rng.gen_range(v + 1..n)
                    } else {
                        rng.gen_range(0..n)
                    }
                };
                if rng.gen_bool(0.5) {
                    let t = pick(&mut rng);
                    let f = pick(&mut rng);
                    edges.push((v, t, Some(true)));
                    edges.push((v, f, Some(false)));
                } else {
                    let t = pick(&mut rng);
                    edges.push((v, t, None));
                }
            }
            RawGraph { n, edges }
        })
        .collect()
}

/// `pdom[v]` = nodes lying on every path from `v` to the exit.
pub fn brute_post_dominators(g: &RawGraph) -> Vec<BTreeSet<usize>> {
    (0..g.n)
        .map(|v| {
            let paths = g.simple_paths(v, g.exit());
            (0..g.n)
                .filter(|p| paths.iter().all(|path| path.contains(p)))
                .collect()
        })
        .collect()
}

/// Immediate post-dominator: the strict post-dominator that every other
/// strict post-dominator also post-dominates.
pub fn brute_immediate(pdom: &[BTreeSet<usize>], v: usize) -> Option<usize> {
    let strict: Vec<usize> = pdom[v].iter().copied().filter(|&p| p != v).collect();
    strict
        .iter()
        .copied()
        .find(|&p| strict.iter().all(|&q| pdom[p].contains(&q)))
}

/// `deps[y]` = branch outcomes `(x, o)` such that some path leaving `x` along
/// its `o` edge reaches `y` with `y` post-dominating every node after `x`,
/// while `y` does not strictly post-dominate `x`.
pub fn brute_control_dependence(g: &RawGraph) -> Vec<BTreeSet<(usize, bool)>> {
    let pdom = brute_post_dominators(g);
    let mut deps = vec![BTreeSet::new(); g.n];
    for &(x, b, label) in &g.edges {
        let Some(o) = label else { continue };
        for (y, dy) in deps.iter_mut().enumerate() {
            if y != x && pdom[x].contains(&y) {
                continue;
            }
            let witness = g
                .simple_paths(b, y)
                .iter()
                .any(|path| path.iter().all(|&w| pdom[w].contains(&y)));
            if witness {
                dy.insert((x, o));
            }
        }
    }
    deps
}
