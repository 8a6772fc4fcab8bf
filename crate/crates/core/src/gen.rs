//! Deterministic graph generators for tests and experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::Graph;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn undirected(n: usize, edges: Vec<(usize, usize)>) -> Graph {
    Graph::from_edges(n, edges, false).expect("generated edges are valid")
}

/// Erdős–Rényi G(n, p), undirected.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Graph {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for x in 0..n {
        for y in x + 1..n {
            if r.gen_bool(p) {
                edges.push((x, y));
            }
        }
    }
    undirected(n, edges)
}

/// Directed G(n, p) without self-loops.
pub fn erdos_renyi_directed(n: usize, p: f64, seed: u64) -> Graph {
    let mut r = rng(seed);
    let mut arcs = Vec::new();
    for x in 0..n {
        for y in 0..n {
            if x != y && r.gen_bool(p) {
                arcs.push((x, y));
            }
        }
    }
    Graph::from_arcs(n, arcs, false).expect("generated arcs are valid")
}

/// Barabási–Albert preferential attachment with `k` edges per new node.
pub fn barabasi_albert(n: usize, k: usize, seed: u64) -> Graph {
    let mut r = rng(seed);
    let k = k.max(1);
    let mut edges = Vec::new();
    // endpoints of all edges so far, sampled uniformly = degree-proportional
    let mut ends: Vec<usize> = Vec::new();
    let core = (k + 1).min(n);
    for x in 0..core {
        for y in x + 1..core {
            edges.push((x, y));
            ends.extend([x, y]);
        }
    }
    for x in core..n {
        let mut targets = Vec::with_capacity(k);
        while targets.len() < k.min(x) {
            let t = if ends.is_empty() {
                r.gen_range(0..x)
            } else {
                ends[r.gen_range(0..ends.len())]
            };
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for t in targets {
            edges.push((x, t));
            ends.extend([x, t]);
        }
    }
    undirected(n, edges)
}

/// Watts–Strogatz ring lattice with `k` neighbours per side, each edge
/// rewired with probability `beta`.
pub fn watts_strogatz(n: usize, k: usize, beta: f64, seed: u64) -> Graph {
    let mut r = rng(seed);
    let mut edges = std::collections::BTreeSet::new();
    for x in 0..n {
        for d in 1..=k {
            let y = (x + d) % n;
            if x != y {
                edges.insert((x.min(y), x.max(y)));
            }
        }
    }
    let original: Vec<_> = edges.iter().copied().collect();
    for (x, y) in original {
        if r.gen_bool(beta) {
            for _ in 0..16 {
                let z = r.gen_range(0..n);
                let e = (x.min(z), x.max(z));
                if z != x && !edges.contains(&e) {
                    edges.remove(&(x, y));
                    edges.insert(e);
                    break;
                }
            }
        }
    }
    undirected(n, edges.into_iter().collect())
}

/// Uniform random recursive tree: node `i` attaches to a random earlier node.
pub fn random_tree(n: usize, seed: u64) -> Graph {
    let mut r = rng(seed);
    let edges = (1..n).map(|i| (i, r.gen_range(0..i))).collect();
    undirected(n, edges)
}

/// A random spanning tree plus G(n, p) edges: always connected.
pub fn random_connected(n: usize, p: f64, seed: u64) -> Graph {
    let mut r = rng(seed);
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (i, r.gen_range(0..i))).collect();
    for x in 0..n {
        for y in x + 1..n {
            if r.gen_bool(p) {
                edges.push((x, y));
            }
        }
    }
    undirected(n, edges)
}

pub fn path(n: usize) -> Graph {
    undirected(n, (1..n).map(|i| (i - 1, i)).collect())
}

pub fn cycle(n: usize) -> Graph {
    undirected(
        n,
        (0..n)
            .map(|i| (i, (i + 1) % n))
            .filter(|(a, b)| a != b)
            .collect(),
    )
}

pub fn directed_cycle(n: usize) -> Graph {
    Graph::from_arcs(n, (0..n).map(|i| (i, (i + 1) % n)), n == 1).expect("valid cycle")
}

/// Star with centre 0 and `leaves` leaves.
pub fn star(leaves: usize) -> Graph {
    undirected(leaves + 1, (1..=leaves).map(|i| (0, i)).collect())
}

pub fn complete(n: usize) -> Graph {
    undirected(
        n,
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect(),
    )
}

/// `rows × cols` grid, row-major ids.
pub fn grid(rows: usize, cols: usize) -> Graph {
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let x = r * cols + c;
            if c + 1 < cols {
                edges.push((x, x + 1));
            }
            if r + 1 < rows {
                edges.push((x, x + cols));
            }
        }
    }
    undirected(rows * cols, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        assert_eq!(cycle(1000).num_arcs(), 2000);
        assert_eq!(path(5).num_arcs(), 8);
        assert_eq!(star(3).num_arcs(), 6);
        assert_eq!(complete(4).num_arcs(), 12);
        assert_eq!(grid(3, 4).num_arcs(), 2 * (3 * 3 + 2 * 4));
        assert_eq!(random_tree(50, 1).num_arcs(), 98);
        assert_eq!(directed_cycle(4).num_arcs(), 4);
        let ws = watts_strogatz(100, 3, 0.1, 2);
        assert!(ws.is_symmetric());
        assert_eq!(ws.num_arcs(), 600);
        let ba = barabasi_albert(200, 3, 4);
        assert!(ba.is_symmetric() && !ba.has_self_loops());
    }

    #[test]
    fn deterministic() {
        assert_eq!(erdos_renyi(100, 0.05, 7), erdos_renyi(100, 0.05, 7));
        assert_ne!(erdos_renyi(100, 0.05, 7), erdos_renyi(100, 0.05, 8));
    }
}
