//! In-memory adjacency graphs, edge-list ingestion and structural statistics.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};
use std::num::IntErrorKind;
use std::path::Path;

use crate::error::{Error, Result};

/// A graph with sorted, duplicate-free successor lists in CSR layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    successors: Vec<usize>,
    symmetric: bool,
}

impl Graph {
    /// The graph with `n` nodes and no arcs.
    pub fn empty(n: usize) -> Self {
        Self {
            offsets: vec![0; n + 1],
            successors: Vec::new(),
            symmetric: true,
        }
    }

    /// Builds a graph from arbitrary arcs on `n` nodes. Duplicates are
    /// collapsed; self-loops are an error unless `allow_self_loops`.
    pub fn from_arcs(
        n: usize,
        arcs: impl IntoIterator<Item = (usize, usize)>,
        allow_self_loops: bool,
    ) -> Result<Self> {
        let mut lists = vec![Vec::new(); n];
        for (x, y) in arcs {
            if x >= n || y >= n {
                return Err(Error::InvalidGraph(format!(
                    "arc ({x}, {y}) out of range for {n} nodes"
                )));
            }
            if x == y && !allow_self_loops {
                return Err(Error::InvalidGraph(format!("self-loop on node {x}")));
            }
            lists[x].push(y);
        }
        for l in &mut lists {
            l.sort_unstable();
            l.dedup();
        }
        Self::from_lists(lists)
    }

    /// Builds an undirected graph: every edge is stored as two arcs.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        allow_self_loops: bool,
    ) -> Result<Self> {
        let arcs: Vec<_> = edges
            .into_iter()
            .flat_map(|(x, y)| [(x, y), (y, x)])
            .collect();
        Self::from_arcs(n, arcs, allow_self_loops)
    }

    /// Builds a graph from per-node successor lists, which must already be
    /// strictly increasing and in range.
    pub fn from_lists(lists: Vec<Vec<usize>>) -> Result<Self> {
        let n = lists.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut successors = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        offsets.push(0);
        for (x, l) in lists.into_iter().enumerate() {
            if l.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidGraph(format!(
                    "successor list of node {x} is not strictly increasing"
                )));
            }
            if let Some(&last) = l.last() {
                if last >= n {
                    return Err(Error::InvalidGraph(format!(
                        "successor {last} of node {x} out of range for {n} nodes"
                    )));
                }
            }
            successors.extend(l);
            offsets.push(successors.len());
        }
        let mut g = Self {
            offsets,
            successors,
            symmetric: false,
        };
        g.symmetric = g.check_symmetric();
        Ok(g)
    }

    fn check_symmetric(&self) -> bool {
        (0..self.num_nodes()).all(|x| {
            self.successors(x)
                .iter()
                .all(|&y| self.successors(y).binary_search(&x).is_ok())
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_arcs(&self) -> usize {
        self.successors.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    #[inline]
    pub fn successors(&self, x: usize) -> &[usize] {
        &self.successors[self.offsets[x]..self.offsets[x + 1]]
    }

    #[inline]
    pub fn outdegree(&self, x: usize) -> usize {
        self.offsets[x + 1] - self.offsets[x]
    }

    pub fn has_self_loops(&self) -> bool {
        (0..self.num_nodes()).any(|x| self.successors(x).binary_search(&x).is_ok())
    }

    /// Iterates over all arcs in node order.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes()).flat_map(move |x| self.successors(x).iter().map(move |&y| (x, y)))
    }

    pub fn to_lists(&self) -> Vec<Vec<usize>> {
        (0..self.num_nodes())
            .map(|x| self.successors(x).to_vec())
            .collect()
    }

    pub fn transpose(&self) -> Graph {
        if self.symmetric {
            return self.clone();
        }
        let n = self.num_nodes();
        let mut indeg = vec![0usize; n + 1];
        for &y in &self.successors {
            indeg[y + 1] += 1;
        }
        for i in 0..n {
            indeg[i + 1] += indeg[i];
        }
        let offsets = indeg.clone();
        let mut cursor = indeg;
        let mut successors = vec![0; self.successors.len()];
        // scanning sources in increasing order keeps every new list sorted
        for (x, y) in self.arcs() {
            successors[cursor[y]] = x;
            cursor[y] += 1;
        }
        Graph {
            offsets,
            successors,
            symmetric: false,
        }
    }

    /// Union of the graph and its transpose.
    pub fn symmetrize(&self) -> Graph {
        if self.symmetric {
            return self.clone();
        }
        let t = self.transpose();
        let lists = (0..self.num_nodes())
            .map(|x| {
                let mut l: Vec<usize> = self
                    .successors(x)
                    .iter()
                    .chain(t.successors(x))
                    .copied()
                    .collect();
                l.sort_unstable();
                l.dedup();
                l
            })
            .collect();
        let mut g = Self::from_lists(lists).expect("union of valid lists is valid");
        g.symmetric = true;
        g
    }

    /// Relabels node `i` as `p[i]`.
    pub fn permute(&self, p: &Permutation) -> Result<Graph> {
        if p.len() != self.num_nodes() {
            return Err(Error::NotPermutation(format!(
                "permutation has length {}, graph has {} nodes",
                p.len(),
                self.num_nodes()
            )));
        }
        let mut lists = vec![Vec::new(); self.num_nodes()];
        for x in 0..self.num_nodes() {
            let mut l: Vec<usize> = self.successors(x).iter().map(|&y| p.get(y)).collect();
            l.sort_unstable();
            lists[p.get(x)] = l;
        }
        let mut g = Self::from_lists(lists)?;
        g.symmetric = self.symmetric;
        Ok(g)
    }

    /// Subgraph induced by `nodes` (sorted, distinct), relabelled by position.
    pub fn induced(&self, nodes: &[usize]) -> Graph {
        let mut new_id = vec![usize::MAX; self.num_nodes()];
        for (i, &x) in nodes.iter().enumerate() {
            new_id[x] = i;
        }
        let lists = nodes
            .iter()
            .map(|&x| {
                self.successors(x)
                    .iter()
                    .filter(|&&y| new_id[y] != usize::MAX)
                    .map(|&y| new_id[y])
                    .collect()
            })
            .collect();
        Self::from_lists(lists).expect("induced subgraph of a valid graph is valid")
    }

    pub fn avg_degree(&self) -> Result<f64> {
        if self.num_nodes() == 0 {
            return Err(Error::EmptyGraph);
        }
        Ok(self.num_arcs() as f64 / self.num_nodes() as f64)
    }

    /// Fraction of present edges among all possible ones: `2e / (n(n − 1))`
    /// with `e = arcs / 2` on symmetric graphs, `arcs / (n(n − 1))` otherwise.
    pub fn density(&self) -> Result<f64> {
        let n = self.num_nodes() as f64;
        if self.num_nodes() < 2 {
            return Err(Error::Degenerate(
                "density is undefined for fewer than two nodes".into(),
            ));
        }
        Ok(self.num_arcs() as f64 / (n * (n - 1.0)))
    }

    /// Histogram of `⌊log₂ gap⌋` over all arcs. The first gap of node `x` is
    /// `|s₀ − x| + 1`; later gaps are differences of consecutive successors.
    pub fn gap_histogram(&self) -> Vec<u64> {
        let mut bins = Vec::new();
        let mut bump = |gap: usize| {
            let b = gap.ilog2() as usize;
            if bins.len() <= b {
                bins.resize(b + 1, 0);
            }
            bins[b] += 1;
        };
        for x in 0..self.num_nodes() {
            let succ = self.successors(x);
            if let Some(&first) = succ.first() {
                bump(first.abs_diff(x) + 1);
                for w in succ.windows(2) {
                    bump(w[1] - w[0]);
                }
            }
        }
        bins
    }
}

/// `log₂ C(n², m)`: the bits needed to identify one graph among all those
/// with `n` nodes and `m` arcs.
pub fn info_lower_bound(n: u64, m: u64) -> Result<f64> {
    let pairs = n as f64 * n as f64;
    if (m as f64) > pairs || (n as u128 * n as u128) < m as u128 {
        return Err(Error::InvalidArgument(format!(
            "{m} arcs exceed the {n}² possible pairs"
        )));
    }
    let small = (m as f64).min(pairs - m as f64);
    if small == 0.0 {
        return Ok(0.0);
    }
    use statrs::function::gamma::ln_gamma;
    let ln = ln_gamma(pairs + 1.0) - ln_gamma(small + 1.0) - ln_gamma(pairs - small + 1.0);
    Ok((ln / std::f64::consts::LN_2).max(0.0))
}

/// A bijection on `[0, n)`; `map[i]` is the new id of old node `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for (i, &v) in map.iter().enumerate() {
            if v >= n {
                return Err(Error::NotPermutation(format!(
                    "entry {i} maps to {v}, outside [0, {n})"
                )));
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::NotPermutation(format!("value {v} appears twice")));
            }
        }
        Ok(Self { map })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &v) in self.map.iter().enumerate() {
            inv[v] = i;
        }
        Self { map: inv }
    }

    /// Reads either a binary file of little-endian `u64`s or an ASCII file
    /// with one id per line; binary is assumed whenever a byte is not ASCII
    /// digit, whitespace or `#`-comment text.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let ascii = bytes
            .iter()
            .all(|b| b.is_ascii_graphic() || b.is_ascii_whitespace());
        if ascii && !bytes.is_empty() {
            let text = String::from_utf8_lossy(&bytes);
            let mut map = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap().trim();
                if line.is_empty() {
                    continue;
                }
                map.push(parse_id(line, path, i + 1)?);
            }
            Self::new(map)
        } else {
            if bytes.len() % 8 != 0 {
                return Err(Error::NotPermutation(format!(
                    "binary permutation file has {} bytes, not a multiple of 8",
                    bytes.len()
                )));
            }
            let map = bytes
                .chunks_exact(8)
                .map(|c| {
                    let v = u64::from_le_bytes(c.try_into().unwrap());
                    usize::try_from(v).map_err(|_| {
                        Error::NotPermutation(format!("entry {v} overflows the index type"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Self::new(map)
        }
    }

    pub fn to_binary(&self) -> Vec<u8> {
        self.map
            .iter()
            .flat_map(|&v| (v as u64).to_le_bytes())
            .collect()
    }
}

/// A graph loaded from an edge list, together with the original id of
/// every compacted node.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: Graph,
    pub original_ids: Vec<u64>,
}

/// Options for [`load_edge_list`].
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub symmetrize: bool,
    pub allow_self_loops: bool,
}

fn parse_id(tok: &str, path: &Path, line: usize) -> Result<usize> {
    tok.parse::<usize>().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: match e.kind() {
            IntErrorKind::PosOverflow => format!("id {tok} overflows the index type"),
            _ => format!("invalid node id {tok:?}"),
        },
    })
}

/// Reads whitespace-separated `u v` pairs, one per line, with `#` comments.
/// Ids are compacted to `[0, n)` in order of first appearance.
pub fn load_edge_list(path: &Path, opts: LoadOptions) -> Result<LoadedGraph> {
    let file = std::fs::File::open(path)?;
    read_edge_list(file, path, opts)
}

pub fn read_edge_list(input: impl Read, path: &Path, opts: LoadOptions) -> Result<LoadedGraph> {
    let mut ids: HashMap<usize, usize> = HashMap::new();
    let mut original_ids = Vec::new();
    let mut arcs = Vec::new();
    let mut compact = |raw: usize| {
        *ids.entry(raw).or_insert_with(|| {
            original_ids.push(raw as u64);
            original_ids.len() - 1
        })
    };
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap().trim();
        if body.is_empty() {
            continue;
        }
        let mut toks = body.split_whitespace();
        let (Some(u), Some(v), None) = (toks.next(), toks.next(), toks.next()) else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("expected two node ids, found {body:?}"),
            });
        };
        let u = parse_id(u, path, i + 1)?;
        let v = parse_id(v, path, i + 1)?;
        if u == v && !opts.allow_self_loops {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("self-loop on node {u}"),
            });
        }
        let (u, v) = (compact(u), compact(v));
        arcs.push((u, v));
    }
    let n = original_ids.len();
    let graph = if opts.symmetrize {
        let mut g = Graph::from_edges(n, arcs, opts.allow_self_loops)?;
        g.symmetric = true;
        g
    } else {
        Graph::from_arcs(n, arcs, opts.allow_self_loops)?
    };
    Ok(LoadedGraph {
        graph,
        original_ids,
    })
}

/// Writes the arcs as an ASCII edge list. Symmetric graphs are written
/// with one line per undirected edge.
pub fn write_edge_list(g: &Graph, mut out: impl std::io::Write) -> Result<()> {
    for (x, y) in g.arcs() {
        if !g.is_symmetric() || x <= y {
            writeln!(out, "{x}\t{y}")?;
        }
    }
    Ok(())
}
