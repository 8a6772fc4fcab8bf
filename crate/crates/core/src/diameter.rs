//! Exact diameters of undirected graphs (double sweep + iFUB), parallel
//! breadth-first visits and connected components.

use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anf::NeighbourhoodRun;
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Distance of nodes not reached by a visit.
pub const UNREACHED: u32 = u32::MAX;

/// Frontier segment handled by one task.
const SEGMENT: usize = 256;

/// Level-synchronous parallel visit from `source`. Each level's frontier is
/// split into segments expanded independently; nodes are claimed by an
/// atomic compare-and-swap on their distance.
pub fn bfs(g: &Graph, source: usize, allow_asymmetric: bool) -> Result<Vec<u32>> {
    if !g.is_symmetric() && !allow_asymmetric {
        return Err(Error::NotSymmetric);
    }
    if source >= g.num_nodes() {
        return Err(Error::InvalidArgument(format!(
            "source {source} out of range for {} nodes",
            g.num_nodes()
        )));
    }
    Ok(bfs_segmented(g, source, SEGMENT))
}

pub(crate) fn bfs_segmented(g: &Graph, source: usize, segment: usize) -> Vec<u32> {
    let dist: Vec<AtomicU32> = (0..g.num_nodes())
        .map(|_| AtomicU32::new(UNREACHED))
        .collect();
    dist[source].store(0, Ordering::Relaxed);
    let mut frontier = vec![source];
    let mut d = 0u32;
    while !frontier.is_empty() {
        let next_d = d + 1;
        let expand = |seg: &[usize]| {
            let mut out = Vec::new();
            for &x in seg {
                for &y in g.successors(x) {
                    if dist[y].load(Ordering::Relaxed) == UNREACHED
                        && dist[y]
                            .compare_exchange(
                                UNREACHED,
                                next_d,
                                Ordering::Relaxed,
                                Ordering::Relaxed,
                            )
                            .is_ok()
                    {
                        out.push(y);
                    }
                }
            }
            out
        };
        frontier = if frontier.len() <= segment {
            expand(&frontier)
        } else {
            frontier.par_chunks(segment).flat_map_iter(expand).collect()
        };
        d = next_d;
    }
    dist.into_iter().map(AtomicU32::into_inner).collect()
}

/// Sequential visit reusing caller buffers; returns the eccentricity of
/// `s` and leaves distances in `dist`.
fn eccentricity_into(g: &Graph, s: usize, dist: &mut [u32], queue: &mut Vec<usize>) -> u32 {
    for &x in queue.iter() {
        dist[x] = UNREACHED;
    }
    queue.clear();
    queue.push(s);
    dist[s] = 0;
    let mut head = 0;
    let mut ecc = 0;
    while head < queue.len() {
        let x = queue[head];
        head += 1;
        let d = dist[x];
        ecc = d;
        for &y in g.successors(x) {
            if dist[y] == UNREACHED {
                dist[y] = d + 1;
                queue.push(y);
            }
        }
    }
    ecc
}

/// Eccentricity of `s` within its component.
pub fn eccentricity(g: &Graph, s: usize) -> u32 {
    let mut dist = vec![UNREACHED; g.num_nodes()];
    eccentricity_into(g, s, &mut dist, &mut Vec::new())
}

/// Farthest reached node, smallest id among ties.
fn farthest(dist: &[u32]) -> (usize, u32) {
    dist.iter()
        .enumerate()
        .filter(|(_, &d)| d != UNREACHED)
        .fold(
            (0, 0),
            |best, (x, &d)| if d > best.1 { (x, d) } else { best },
        )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoubleSweep {
    /// `d(y, z)`.
    pub lower: u32,
    pub y: usize,
    pub z: usize,
    /// Node `⌊d(y, z) / 2⌋` hops from `y` on a shortest `y`–`z` path.
    pub c: usize,
    /// Eccentricity of `c`.
    pub h: u32,
    /// Distances from `c`.
    #[serde(skip)]
    pub dist_c: Vec<u32>,
}

pub fn double_sweep(g: &Graph, start: usize) -> Result<DoubleSweep> {
    if g.num_nodes() == 0 {
        return Err(Error::EmptyGraph);
    }
    let from_start = bfs(g, start, false)?;
    let (y, _) = farthest(&from_start);
    let from_y = bfs(g, y, false)?;
    let (z, lower) = farthest(&from_y);

    let mut c = z;
    while from_y[c] > lower / 2 {
        let want = from_y[c] - 1;
        c = *g
            .successors(c)
            .iter()
            .find(|&&p| from_y[p] == want)
            .expect("a shortest path predecessor exists");
    }
    let dist_c = bfs(g, c, false)?;
    let (_, h) = farthest(&dist_c);
    Ok(DoubleSweep {
        lower,
        y,
        z,
        c,
        h,
        dist_c,
    })
}

/// Outcome of a diameter computation on one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiameterResult {
    pub lower: u32,
    pub upper: u32,
    pub exact: bool,
    pub bfs_count: usize,
    pub component_size: usize,
    pub wall_time_s: Option<f64>,
    /// `(lower, upper)` after initialisation and after every fringe level.
    #[serde(skip)]
    pub bounds: Vec<(u32, u32)>,
}

/// Node of maximum degree, smallest id among ties.
pub fn max_degree_node(g: &Graph) -> Option<usize> {
    (0..g.num_nodes()).rev().max_by_key(|&x| g.outdegree(x))
}

/// Exact diameter of the component containing `start` (default: a node of
/// maximum degree).
pub fn ifub(g: &Graph, start: Option<usize>) -> Result<DiameterResult> {
    if !g.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let start = match start {
        Some(s) => s,
        None => max_degree_node(g).ok_or(Error::EmptyGraph)?,
    };
    let began = Instant::now();
    let ds = double_sweep(g, start)?;
    let bfs_count = AtomicUsize::new(3);

    let mut levels: Vec<Vec<usize>> = vec![Vec::new(); ds.h as usize + 1];
    for (x, &d) in ds.dist_c.iter().enumerate() {
        if d != UNREACHED {
            levels[d as usize].push(x);
        }
    }
    let component_size = levels.iter().map(Vec::len).sum();

    let mut lower = ds.lower.max(ds.h);
    let mut upper = 2 * ds.h;
    let mut bounds = vec![(lower, upper)];
    let mut i = ds.h;
    while lower < upper {
        // pairs inside levels < i are within 2(i − 1); an eccentricity at
        // level i cannot exceed max(lower, 2i), so lower >= 2i ends the level
        let level_cap = 2 * i;
        let shared = AtomicU32::new(lower);
        levels[i as usize].par_iter().for_each_init(
            || (vec![UNREACHED; g.num_nodes()], Vec::new()),
            |(dist, queue), &x| {
                if shared.load(Ordering::Relaxed) >= level_cap {
                    return;
                }
                bfs_count.fetch_add(1, Ordering::Relaxed);
                let e = eccentricity_into(g, x, dist, queue);
                shared.fetch_max(e, Ordering::Relaxed);
            },
        );
        lower = shared.into_inner();
        let next = 2 * (i - 1);
        upper = if lower >= next { lower } else { next };
        bounds.push((lower, upper));
        i -= 1;
    }

    Ok(DiameterResult {
        lower,
        upper,
        exact: lower == upper,
        bfs_count: bfs_count.into_inner(),
        component_size,
        wall_time_s: Some(began.elapsed().as_secs_f64()),
        bounds,
    })
}

/// Largest finite distance over all pairs, by one visit per node.
pub fn brute_force_diameter(g: &Graph) -> u32 {
    (0..g.num_nodes())
        .into_par_iter()
        .map_init(
            || (vec![UNREACHED; g.num_nodes()], Vec::new()),
            |(dist, queue), x| eccentricity_into(g, x, dist, queue),
        )
        .max()
        .unwrap_or(0)
}

/// Component label of every node; labels are numbered by smallest member.
pub fn components(g: &Graph) -> Result<Vec<usize>> {
    if !g.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let n = g.num_nodes();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut queue = Vec::new();
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = next;
        queue.clear();
        queue.push(s);
        while let Some(x) = queue.pop() {
            for &y in g.successors(x) {
                if label[y] == usize::MAX {
                    label[y] = next;
                    queue.push(y);
                }
            }
        }
        next += 1;
    }
    Ok(label)
}

#[derive(Debug, Clone)]
pub struct GiantComponent {
    /// Original ids of the component, increasing; position = new id.
    pub nodes: Vec<usize>,
    pub graph: Graph,
}

/// Largest connected component; ties go to the one with the smallest node.
pub fn giant_component(g: &Graph) -> Result<GiantComponent> {
    if g.num_nodes() == 0 {
        return Err(Error::EmptyGraph);
    }
    let label = components(g)?;
    let count = label.iter().max().map_or(0, |&l| l + 1);
    let mut sizes = vec![0usize; count];
    for &l in &label {
        sizes[l] += 1;
    }
    // labels grow with the smallest member, so the first maximum wins ties
    let best = (0..count).rev().max_by_key(|&l| sizes[l]).unwrap();
    let nodes: Vec<usize> = (0..g.num_nodes()).filter(|&x| label[x] == best).collect();
    let graph = g.induced(&nodes);
    Ok(GiantComponent { nodes, graph })
}

/// Iterations of a stabilised run: a lower bound on the diameter.
pub fn run_length_lower_bound(run: &NeighbourhoodRun) -> Result<usize> {
    if run.truncated {
        return Err(Error::TruncatedRun);
    }
    Ok(run.iterations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;

    #[test]
    fn bfs_path_and_unreached() {
        let g = gen::path(4);
        assert_eq!(bfs(&g, 0, false).unwrap(), vec![0, 1, 2, 3]);
        let g = Graph::from_edges(3, [(0, 1)], false).unwrap();
        assert_eq!(bfs(&g, 0, false).unwrap()[2], UNREACHED);
        let d = Graph::from_arcs(2, [(0, 1)], false).unwrap();
        assert!(matches!(bfs(&d, 0, false), Err(Error::NotSymmetric)));
        assert_eq!(bfs(&d, 0, true).unwrap(), vec![0, 1]);
    }

    #[test]
    fn segmentation_does_not_change_distances() {
        let g = gen::erdos_renyi(500, 0.02, 3);
        let whole = bfs_segmented(&g, 0, usize::MAX);
        for seg in [1, 3, 16, 256] {
            assert_eq!(bfs_segmented(&g, 0, seg), whole);
        }
    }

    #[test]
    fn double_sweep_cases() {
        let g = gen::cycle(6);
        assert_eq!(double_sweep(&g, 0).unwrap().lower, 3);
        let one = Graph::empty(1);
        let ds = double_sweep(&one, 0).unwrap();
        assert_eq!((ds.lower, ds.c, ds.h), (0, 0, 0));
        assert!(double_sweep(&Graph::empty(0), 0).is_err());
        let p = gen::path(7);
        let ds = double_sweep(&p, 2).unwrap();
        assert_eq!(ds.lower, 6);
        assert_eq!(ds.c, 3);
        assert_eq!(ds.h, 3);
    }

    #[test]
    fn ifub_path_and_soundness() {
        let r = ifub(&gen::path(5), None).unwrap();
        assert_eq!((r.lower, r.upper, r.exact), (4, 4, true));
        let g = gen::random_connected(120, 0.02, 9);
        let r = ifub(&g, None).unwrap();
        let truth = brute_force_diameter(&g);
        assert_eq!(r.lower, truth);
        for w in r.bounds.windows(2) {
            assert!(w[1].0 >= w[0].0 && w[1].1 <= w[0].1);
        }
        for &(lb, ub) in &r.bounds {
            assert!(lb <= truth && truth <= ub);
        }
        assert!(r.bfs_count <= g.num_nodes() + 2);
        assert!(ifub(&Graph::from_arcs(2, [(0, 1)], false).unwrap(), None).is_err());
    }

    #[test]
    fn ifub_searches_only_the_start_component() {
        let mut edges: Vec<_> = (1..6).map(|i| (i - 1, i)).collect();
        edges.extend([(6, 7), (7, 8)]);
        let g = Graph::from_edges(9, edges, false).unwrap();
        let r = ifub(&g, Some(7)).unwrap();
        assert_eq!((r.lower, r.component_size), (2, 3));
        assert_eq!(ifub(&g, Some(0)).unwrap().lower, 5);
    }

    #[test]
    fn giant_component_tie_rule() {
        // triangle {0, 1, 2}, isolated 3, triangle {4, 5, 6}
        let g =
            Graph::from_edges(7, [(0, 1), (1, 2), (0, 2), (4, 5), (5, 6), (4, 6)], false).unwrap();
        let gc = giant_component(&g).unwrap();
        assert_eq!(gc.nodes, vec![0, 1, 2]);
        assert_eq!(gc.graph.num_arcs(), 6);
        let labels = components(&g).unwrap();
        assert_eq!(labels, vec![0, 0, 0, 1, 2, 2, 2]);
        let c = gen::cycle(10);
        assert_eq!(giant_component(&c).unwrap().graph, c);
        assert!(giant_component(&Graph::empty(0)).is_err());
    }

    #[test]
    fn run_length_bound() {
        let g = gen::path(6);
        let e = crate::anf::run_exact(&g, 100, "").unwrap();
        assert_eq!(run_length_lower_bound(&e).unwrap(), 5);
        let mut t = e.clone();
        t.truncated = true;
        assert!(matches!(
            run_length_lower_bound(&t),
            Err(Error::TruncatedRun)
        ));
        let single = crate::anf::run_exact(&Graph::empty(1), 100, "").unwrap();
        assert_eq!(run_length_lower_bound(&single).unwrap(), 0);
    }

    #[test]
    fn max_degree_prefers_smallest_id() {
        let g = Graph::from_edges(4, [(0, 1), (2, 3), (1, 2)], false).unwrap();
        assert_eq!(max_degree_node(&g), Some(1));
    }
}
