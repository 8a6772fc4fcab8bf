//! Approximate neighbourhood functions by HyperLogLog counter diffusion.
//!
//! Counter `i` starts as the sketch of `{i}`; at iteration `t` it becomes
//! the union of its own counter and those of its successors at `t − 1`, so
//! it sketches the ball of radius `t` around `i`. The sum of all estimates
//! is `N̂(t)`. Both counter buffers live in memory and are swapped at the
//! end of every iteration.
//!
//! Estimates are cached per node and summed in fixed blocks, in node
//! order, so plain and systolic runs produce bit-identical values
//! regardless of the thread count.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::hll::{self, CounterArray};

/// Nodes per parallel work unit; also the summation block.
const BLOCK: usize = 1024;

/// Default node limit of [`run_exact`].
pub const EXACT_NODE_LIMIT: usize = 1_000_000;

/// The sequence `N̂(0), …, N̂(T)` of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighbourhoodRun {
    pub graph_id: String,
    /// Exact number of nodes.
    pub n: usize,
    /// Registers per counter; 0 for exact runs.
    pub m_registers: usize,
    pub seed: u64,
    /// Raw per-iteration values.
    pub values: Vec<f64>,
    /// Running maximum of `values`.
    pub monotone_values: Vec<f64>,
    /// Last iteration that modified a counter.
    pub iterations: usize,
    /// Only recorded when timing is requested, so run files stay replayable.
    pub wall_time_s: Option<f64>,
    #[serde(default)]
    pub exact: bool,
    /// The run hit `max_iters` before stabilising.
    #[serde(default)]
    pub truncated: bool,
}

impl NeighbourhoodRun {
    fn new(
        graph_id: &str,
        n: usize,
        m_registers: usize,
        seed: u64,
        values: Vec<f64>,
        exact: bool,
        truncated: bool,
    ) -> Self {
        let monotone_values = monotonize(&values);
        Self {
            graph_id: graph_id.to_string(),
            n,
            m_registers,
            seed,
            iterations: values.len() - 1,
            values,
            monotone_values,
            wall_time_s: None,
            exact,
            truncated,
        }
    }
}

/// Running maximum.
pub fn monotonize(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .scan(f64::NEG_INFINITY, |max, &v| {
            *max = max.max(v);
            Some(*max)
        })
        .collect()
}

/// Per-iteration work counters, indexed by iteration `t ≥ 1`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunTrace {
    /// Nodes whose union was recomputed at `t`.
    pub recomputed: Vec<usize>,
    /// Nodes whose counter changed at `t`.
    pub changed: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct AnfOptions {
    pub registers: usize,
    pub seed: u64,
    pub max_iters: Option<usize>,
    /// Upper bound on the bytes of the two counter buffers.
    pub budget_bytes: Option<u64>,
    pub graph_id: String,
}

impl Default for AnfOptions {
    fn default() -> Self {
        Self {
            registers: 64,
            seed: 0,
            max_iters: None,
            budget_bytes: None,
            graph_id: String::new(),
        }
    }
}

/// Counter memory of a run: two buffers of `n` counters.
pub fn counter_bytes(n: usize, registers: usize) -> u64 {
    2 * hll::array_bytes(n, registers)
}

/// Plain iteration: every counter is recomputed at every step.
pub fn run(g: &Graph, opts: &AnfOptions) -> Result<NeighbourhoodRun> {
    Ok(run_traced(g, None, opts)?.0)
}

/// Systolic iteration: a counter is recomputed only if a successor changed
/// at the previous step. `pred` must be the transpose of `g`.
pub fn run_systolic(g: &Graph, pred: &Graph, opts: &AnfOptions) -> Result<NeighbourhoodRun> {
    Ok(run_traced(g, Some(pred), opts)?.0)
}

pub fn run_traced(
    g: &Graph,
    pred: Option<&Graph>,
    opts: &AnfOptions,
) -> Result<(NeighbourhoodRun, RunTrace)> {
    let n = g.num_nodes();
    if let Some(p) = pred {
        if p.num_nodes() != n || p.num_arcs() != g.num_arcs() {
            return Err(Error::InvalidArgument(format!(
                "predecessor graph has {} nodes and {} arcs, graph has {} and {}",
                p.num_nodes(),
                p.num_arcs(),
                n,
                g.num_arcs()
            )));
        }
    }
    let needed = counter_bytes(n, opts.registers);
    if let Some(budget) = opts.budget_bytes {
        if needed > budget {
            return Err(Error::Budget { needed, budget });
        }
    }
    let start = Instant::now();

    let mut old = CounterArray::new(n, opts.registers, opts.seed)?;
    for i in 0..n {
        old.add(i, i as u64);
    }
    let mut new = old.clone();
    let m = old.registers();
    let stride = old.stride();

    let mut estimates: Vec<f64> = (0..n).map(|i| old.estimate(i)).collect();
    let mut values = vec![block_sum(&estimates)];
    let mut changed = vec![true; n];
    let mut dirty = vec![true; n];
    let mut trace = RunTrace::default();
    let mut truncated = false;

    loop {
        if opts.max_iters.is_some_and(|max| values.len() > max) {
            truncated = true;
            break;
        }
        let systolic = pred.is_some();
        let old_words = old.words();
        let prev_changed = &changed;
        let dirty_ref = &dirty;
        let mut next_changed = vec![false; n];

        let recomputed: usize = new
            .words_mut()
            .par_chunks_mut(stride * BLOCK)
            .zip(next_changed.par_chunks_mut(BLOCK))
            .zip(estimates.par_chunks_mut(BLOCK))
            .enumerate()
            .map(|(b, ((dst, flags), est))| {
                let mut recomputed = 0;
                for (k, counter) in dst.chunks_mut(stride).enumerate() {
                    let x = b * BLOCK + k;
                    counter.copy_from_slice(&old_words[x * stride..(x + 1) * stride]);
                    if systolic && !dirty_ref[x] {
                        continue;
                    }
                    recomputed += 1;
                    let mut modified = false;
                    for &y in g.successors(x) {
                        // unchanged successors are already contained in the counter
                        if systolic && !prev_changed[y] {
                            continue;
                        }
                        modified |=
                            hll::union_words(counter, &old_words[y * stride..(y + 1) * stride]);
                    }
                    flags[k] = modified;
                    if modified || !systolic {
                        est[k] = hll::estimate_words(counter, m);
                    }
                }
                recomputed
            })
            .sum();

        let num_changed = next_changed.iter().filter(|&&c| c).count();
        trace.recomputed.push(recomputed);
        trace.changed.push(num_changed);
        if num_changed == 0 {
            break;
        }
        values.push(block_sum(&estimates));
        std::mem::swap(&mut old, &mut new);
        changed = next_changed;

        if let Some(p) = pred {
            let flags: Vec<AtomicBool> = (0..n).map(|_| AtomicBool::new(false)).collect();
            (0..n)
                .into_par_iter()
                .filter(|&y| changed[y])
                .for_each(|y| {
                    for &x in p.successors(y) {
                        flags[x].store(true, Ordering::Relaxed);
                    }
                });
            dirty = flags.into_iter().map(AtomicBool::into_inner).collect();
        }
    }

    let mut result = NeighbourhoodRun::new(
        &opts.graph_id,
        n,
        opts.registers,
        opts.seed,
        values,
        false,
        truncated,
    );
    result.wall_time_s = Some(start.elapsed().as_secs_f64());
    Ok((result, trace))
}

fn block_sum(values: &[f64]) -> f64 {
    let partial: Vec<f64> = values
        .par_chunks(BLOCK)
        .map(|c| c.iter().sum::<f64>())
        .collect();
    partial.iter().sum()
}

/// Exact neighbourhood function by one breadth-first visit per node.
pub fn run_exact(g: &Graph, max_nodes: usize, graph_id: &str) -> Result<NeighbourhoodRun> {
    let n = g.num_nodes();
    if n > max_nodes {
        return Err(Error::TooLarge(format!(
            "exact mode needs {n} visits, limit is {max_nodes} nodes"
        )));
    }
    let start = Instant::now();
    let per_level = (0..n)
        .into_par_iter()
        .fold(
            || (Vec::<u64>::new(), vec![u32::MAX; n], Vec::new()),
            |(mut acc, mut dist, mut queue), s| {
                let levels = bfs_levels(g, s, &mut dist, &mut queue);
                if acc.len() < levels.len() {
                    acc.resize(levels.len(), 0);
                }
                for (a, l) in acc.iter_mut().zip(&levels) {
                    *a += l;
                }
                (acc, dist, queue)
            },
        )
        .map(|(acc, _, _)| acc)
        .reduce(Vec::new, |mut a, b| {
            if a.len() < b.len() {
                a.resize(b.len(), 0);
            }
            for (x, y) in a.iter_mut().zip(&b) {
                *x += y;
            }
            a
        });
    let mut values = Vec::with_capacity(per_level.len().max(1));
    let mut total = 0u64;
    for c in per_level {
        total += c;
        values.push(total as f64);
    }
    if values.is_empty() {
        values.push(0.0);
    }
    let mut result = NeighbourhoodRun::new(graph_id, n, 0, 0, values, true, false);
    result.wall_time_s = Some(start.elapsed().as_secs_f64());
    Ok(result)
}

/// Number of nodes at each distance from `s`; `dist` must be all
/// `u32::MAX` on entry and is restored before returning.
fn bfs_levels(g: &Graph, s: usize, dist: &mut [u32], queue: &mut Vec<usize>) -> Vec<u64> {
    queue.clear();
    queue.push(s);
    dist[s] = 0;
    let mut levels = Vec::new();
    let mut head = 0;
    while head < queue.len() {
        let x = queue[head];
        head += 1;
        let d = dist[x] as usize;
        if levels.len() <= d {
            levels.push(0);
        }
        levels[d] += 1;
        for &y in g.successors(x) {
            if dist[y] == u32::MAX {
                dist[y] = d as u32 + 1;
                queue.push(y);
            }
        }
    }
    for &x in queue.iter() {
        dist[x] = u32::MAX;
    }
    levels
}

/// Runs over the same graph with distinct seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RunSet {
    runs: Vec<NeighbourhoodRun>,
}

impl RunSet {
    pub fn new(runs: Vec<NeighbourhoodRun>) -> Result<Self> {
        let first = runs
            .first()
            .ok_or_else(|| Error::InvalidArgument("a run set needs at least one run".into()))?;
        for r in &runs {
            if r.values.is_empty() || r.monotone_values.len() != r.values.len() {
                return Err(Error::InvalidArgument(format!(
                    "run with seed {} has no values",
                    r.seed
                )));
            }
            if r.m_registers != first.m_registers || r.graph_id != first.graph_id || r.n != first.n
            {
                return Err(Error::InvalidArgument(
                    "runs disagree on graph or register count".into(),
                ));
            }
        }
        Ok(Self { runs })
    }

    pub fn runs(&self) -> &[NeighbourhoodRun] {
        &self.runs
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn num_nodes(&self) -> usize {
        self.runs[0].n
    }

    /// Length of the longest run.
    pub fn horizon(&self) -> usize {
        self.runs.iter().map(|r| r.values.len()).max().unwrap_or(0)
    }

    /// Monotone curves right-padded with their final value to the horizon.
    pub fn aligned(&self) -> Vec<Vec<f64>> {
        let h = self.horizon();
        self.runs
            .iter()
            .map(|r| pad(&r.monotone_values, h))
            .collect()
    }

    /// Per-`t` mean of the aligned curves of the selected runs.
    pub fn mean_curve(&self, include: impl Fn(usize) -> bool) -> Vec<f64> {
        let aligned = self.aligned();
        let chosen: Vec<&Vec<f64>> = aligned
            .iter()
            .enumerate()
            .filter(|(i, _)| include(*i))
            .map(|(_, c)| c)
            .collect();
        let k = chosen.len() as f64;
        (0..self.horizon())
            .map(|t| chosen.iter().map(|c| c[t]).sum::<f64>() / k)
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let runs: Vec<NeighbourhoodRun> = serde_json::from_str(s)?;
        Self::new(runs)
    }
}

/// Right-pads `values` with its last element up to `len`.
pub fn pad(values: &[f64], len: usize) -> Vec<f64> {
    let mut v = values.to_vec();
    let last = *values.last().expect("nonempty");
    v.resize(len.max(values.len()), last);
    v
}

/// SplitMix64 expansion of a master seed into per-run seeds.
pub fn derive_seeds(master: u64, count: usize) -> Vec<u64> {
    let mut state = master;
    (0..count)
        .map(|_| {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^ (z >> 31)
        })
        .collect()
}

/// Runs `count` estimates with seeds derived from `master_seed`.
pub fn run_many(
    g: &Graph,
    pred: Option<&Graph>,
    opts: &AnfOptions,
    master_seed: u64,
    count: usize,
) -> Result<RunSet> {
    let runs = derive_seeds(master_seed, count)
        .into_iter()
        .map(|seed| {
            let o = AnfOptions {
                seed,
                ..opts.clone()
            };
            Ok(run_traced(g, pred, &o)?.0)
        })
        .collect::<Result<Vec<_>>>()?;
    RunSet::new(runs)
}

/// Relative error of an estimated run against the exact one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEvolution {
    /// `r(t) = N̂(t) / N(t) − 1`.
    pub relative: Vec<f64>,
    /// `Δr(t) = r(t) − r(t − 1)` for `t ≥ 1`.
    pub variation: Vec<f64>,
}

impl ErrorEvolution {
    /// Tab-separated `t  r(t)  Δr(t)` rows with a header line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("t\trelative_error\tvariation\n");
        for (t, r) in self.relative.iter().enumerate() {
            let d = if t == 0 {
                String::new()
            } else {
                format!("{:e}", self.variation[t - 1])
            };
            out.push_str(&format!("{t}\t{r:e}\t{d}\n"));
        }
        out
    }
}

/// Compares raw estimated values with exact ones; the shorter sequence is
/// padded with its final value.
pub fn error_evolution(
    estimate: &NeighbourhoodRun,
    exact: &NeighbourhoodRun,
) -> Result<ErrorEvolution> {
    if estimate.n != exact.n {
        return Err(Error::InvalidArgument(format!(
            "runs are over graphs of {} and {} nodes",
            estimate.n, exact.n
        )));
    }
    let len = estimate.values.len().max(exact.values.len());
    let est = pad(&estimate.values, len);
    let truth = pad(&exact.values, len);
    let relative: Vec<f64> = est
        .iter()
        .zip(&truth)
        .map(|(e, t)| if *t == 0.0 { 0.0 } else { e / t - 1.0 })
        .collect();
    let variation = relative.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(ErrorEvolution {
        relative,
        variation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;

    fn opts(registers: usize, seed: u64) -> AnfOptions {
        AnfOptions {
            registers,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn single_node() {
        let g = Graph::empty(1);
        let r = run(&g, &opts(64, 3)).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.values.len(), 1);
        assert!((r.values[0] - 1.0).abs() < 0.01);
        let e = run_exact(&g, EXACT_NODE_LIMIT, "").unwrap();
        assert_eq!(e.values, vec![1.0]);
        assert_eq!(e.iterations, 0);
    }

    #[test]
    fn exact_small_graphs() {
        let p = Graph::from_arcs(3, [(0, 1), (1, 2)], false).unwrap();
        let e = run_exact(&p, EXACT_NODE_LIMIT, "p").unwrap();
        assert_eq!(e.values, vec![3.0, 5.0, 6.0]);
        assert_eq!(e.iterations, 2);
        assert_eq!(
            run_exact(&gen::complete(4), 10, "").unwrap().values,
            vec![4.0, 16.0]
        );
        assert_eq!(
            run_exact(&gen::cycle(5), 10, "").unwrap().values,
            vec![5.0, 15.0, 25.0]
        );
        assert!(matches!(
            run_exact(&gen::cycle(5), 4, ""),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn directed_path_estimate_stabilises_at_two() {
        let p = Graph::from_arcs(3, [(0, 1), (1, 2)], false).unwrap();
        let r = run(&p, &opts(64, 11)).unwrap();
        assert!(r.iterations <= 2);
        assert!(!r.truncated);
    }

    #[test]
    fn systolic_matches_plain() {
        for seed in 0..5 {
            let g = gen::erdos_renyi_directed(200, 0.02, seed);
            let t = g.transpose();
            let a = run(&g, &opts(32, seed)).unwrap();
            let b = run_systolic(&g, &t, &opts(32, seed)).unwrap();
            assert_eq!(a.values, b.values);
            assert_eq!(a.iterations, b.iterations);
        }
    }

    #[test]
    fn out_star_stops_recomputing_after_first_step() {
        let g = Graph::from_arcs(11, (1..11).map(|i| (0, i)), false).unwrap();
        let (r, trace) = run_traced(&g, Some(&g.transpose()), &opts(64, 1)).unwrap();
        assert_eq!(trace.recomputed, vec![11, 0]);
        assert_eq!(trace.changed, vec![1, 0]);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn two_cliques_dirty_set_empties_at_step_two() {
        let mut edges = Vec::new();
        for base in [0, 5] {
            for i in 0..5 {
                for j in i + 1..5 {
                    edges.push((base + i, base + j));
                }
            }
        }
        let g = Graph::from_edges(10, edges, false).unwrap();
        let (r, trace) = run_traced(&g, Some(&g), &opts(64, 2)).unwrap();
        assert_eq!(trace.changed.len(), 2);
        assert_eq!(trace.changed[1], 0);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn deterministic_and_budgeted() {
        let g = gen::erdos_renyi(300, 0.02, 5);
        let a = run(&g, &opts(64, 9)).unwrap();
        let b = run(&g, &opts(64, 9)).unwrap();
        assert_eq!(a.values, b.values);
        let tight = AnfOptions {
            budget_bytes: Some(1000),
            ..opts(64, 9)
        };
        match run(&g, &tight) {
            Err(Error::Budget { needed, .. }) => assert_eq!(needed, 2 * 300 * 6 * 8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn max_iters_truncates() {
        let g = gen::path(50);
        let o = AnfOptions {
            max_iters: Some(3),
            ..opts(16, 0)
        };
        let r = run(&g, &o).unwrap();
        assert!(r.truncated);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn predecessor_shape_checked() {
        let g = gen::path(4);
        assert!(run_systolic(&g, &gen::path(5), &opts(16, 0)).is_err());
    }

    #[test]
    fn error_evolution_of_exact_is_zero() {
        let g = gen::cycle(9);
        let e = run_exact(&g, 100, "").unwrap();
        let ev = error_evolution(&e, &e).unwrap();
        assert!(ev.relative.iter().all(|&r| r == 0.0));
        assert!(ev.variation.iter().all(|&r| r == 0.0));
        let est = run(&g, &opts(64, 1)).unwrap();
        let ev = error_evolution(&est, &e).unwrap();
        assert!((ev.relative[0] - (est.values[0] / 9.0 - 1.0)).abs() < 1e-15);
        assert!(ev.to_tsv().starts_with("t\t"));
    }

    #[test]
    fn runset_alignment_and_json() {
        let mut a = NeighbourhoodRun::new("g", 2, 16, 1, vec![2.0, 4.0], false, false);
        a.wall_time_s = None;
        let b = NeighbourhoodRun::new("g", 2, 16, 2, vec![2.0, 3.0, 4.5], false, false);
        let rs = RunSet::new(vec![a, b]).unwrap();
        assert_eq!(rs.aligned()[0], vec![2.0, 4.0, 4.0]);
        assert_eq!(rs.mean_curve(|_| true), vec![2.0, 3.5, 4.25]);
        let back = RunSet::from_json(&rs.to_json().unwrap()).unwrap();
        assert_eq!(back, rs);
        assert!(RunSet::new(vec![]).is_err());
        let other = NeighbourhoodRun::new("h", 2, 16, 2, vec![2.0], false, false);
        assert!(RunSet::new(vec![rs.runs()[0].clone(), other]).is_err());
    }

    #[test]
    fn seeds_are_distinct_and_replayable() {
        let s = derive_seeds(42, 10);
        assert_eq!(s, derive_seeds(42, 10));
        let mut d = s.clone();
        d.sort_unstable();
        d.dedup();
        assert_eq!(d.len(), 10);
    }

    #[test]
    fn monotone_values_are_running_max() {
        assert_eq!(monotonize(&[1.0, 3.0, 2.0, 5.0]), vec![1.0, 3.0, 3.0, 5.0]);
    }
}
