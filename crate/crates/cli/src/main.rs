use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hb_core::anf::{self, RunSet};
use hb_core::bv::{self, CodecConfig, CompressedGraph};
use hb_core::codes::Code;
use hb_core::diameter;
use hb_core::graph::{self, Graph, LoadOptions, Permutation};
use hb_core::manifest::{unique_path, ExperimentManifest};
use hb_core::stats::{DistanceDistribution, DistanceStats};

#[derive(Parser)]
#[command(
    name = "hb",
    version,
    about = "Compressed graphs, HyperANF and distance statistics"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "HB_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress an edge list into an HBG1 graph file.
    Import(ImportArgs),
    /// Renumber the nodes of a graph file.
    Permute(PermuteArgs),
    /// Reverse every arc of a graph file.
    Transpose(TransposeArgs),
    /// Estimate the neighbourhood function.
    Anf(AnfArgs),
    /// Distance statistics of a run file.
    Stats(StatsArgs),
    /// Exact diameter by iFUB.
    Diameter(DiameterArgs),
    /// Histogram of successor gaps.
    Gaps(GapsArgs),
    /// Information-theoretic lower bound for a graph.
    Bound(BoundArgs),
    /// Write a graph file as an edge list.
    ExportEdges(ExportArgs),
}

#[derive(Args)]
struct CodecArgs {
    /// Reference window; 0 disables copying.
    #[arg(long, default_value_t = 7)]
    window: usize,
    /// Minimum interval length; 0 disables intervals.
    #[arg(long, default_value_t = 4)]
    min_interval: usize,
    /// Residual code: gamma, delta or zetaK.
    #[arg(long, default_value = "zeta3")]
    code: Code,
}

impl CodecArgs {
    fn config(&self) -> CodecConfig {
        CodecConfig {
            window: self.window,
            min_interval: self.min_interval,
            residual_code: self.code,
        }
    }
}

#[derive(Args)]
struct ImportArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Add the reverse of every arc.
    #[arg(long)]
    symmetrize: bool,
    #[arg(long)]
    allow_self_loops: bool,
    #[command(flatten)]
    codec: CodecArgs,
}

#[derive(Args)]
struct PermuteArgs {
    graph: PathBuf,
    /// Binary (u64 LE) or one-id-per-line permutation.
    permutation: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct TransposeArgs {
    graph: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct AnfArgs {
    /// Graph file; not needed with --manifest.
    graph: Option<PathBuf>,
    /// Run file to write; a manifest is written next to it.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(short = 'm', long, default_value_t = 64)]
    registers: usize,
    #[arg(short = 'r', long, default_value_t = 1)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Recompute only counters whose successors changed.
    #[arg(long)]
    systolic: bool,
    /// Exact neighbourhood function by BFS from every node.
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    budget_bytes: Option<u64>,
    /// Record wall times in the run file.
    #[arg(long)]
    timing: bool,
    /// Replay an experiment manifest instead of reading the options above.
    #[arg(long, conflicts_with = "graph")]
    manifest: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SelfPairs {
    Include,
    Exclude,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Tsv,
    Json,
}

#[derive(Args)]
struct StatsArgs {
    runs: PathBuf,
    #[arg(long, value_enum, default_value_t = SelfPairs::Both)]
    self_pairs: SelfPairs,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    format: Format,
    /// Also write PREFIX.stats.tsv, PREFIX.stats.json and PREFIX.pmf.tsv.
    #[arg(long)]
    out_prefix: Option<PathBuf>,
    /// Exact run file; writes the relative error of the first run against it.
    #[arg(long, requires = "out_prefix")]
    evolution: Option<PathBuf>,
}

#[derive(Args)]
struct DiameterArgs {
    #[arg(short, long)]
    graph: PathBuf,
    /// Start node of the double sweep (default: maximum degree).
    #[arg(long)]
    start: Option<usize>,
    /// Restrict to the largest connected component first.
    #[arg(long)]
    giant_only: bool,
    /// Also compute the diameter by one BFS per node.
    #[arg(long)]
    brute_force: bool,
}

#[derive(Args)]
struct GapsArgs {
    graph: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    format: Format,
}

#[derive(Args)]
struct BoundArgs {
    /// Graph file whose size is compared with the bound.
    graph: Option<PathBuf>,
    #[arg(long, requires = "arcs", conflicts_with = "graph")]
    nodes: Option<u64>,
    #[arg(long, requires = "nodes")]
    arcs: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    format: Format,
}

#[derive(Args)]
struct ExportArgs {
    graph: PathBuf,
    /// Default: standard output.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Translate ids back through the .ids file written by import.
    #[arg(long)]
    original_ids: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hb: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Import(a) => import(a),
        Command::Permute(a) => permute(a),
        Command::Transpose(a) => transpose(a),
        Command::Anf(a) => anf_cmd(a),
        Command::Stats(a) => stats(a),
        Command::Diameter(a) => diameter_cmd(a),
        Command::Gaps(a) => gaps(a),
        Command::Bound(a) => bound(a),
        Command::ExportEdges(a) => export(a),
    }
}

fn load_graph(path: &Path) -> Result<(CompressedGraph, Graph)> {
    let cg = CompressedGraph::load(path).with_context(|| format!("reading {}", path.display()))?;
    let g = cg
        .decode()
        .with_context(|| format!("decoding {}", path.display()))?;
    Ok((cg, g))
}

fn save(g: &Graph, cfg: CodecConfig, path: &Path) -> Result<bv::EncodeStats> {
    let (cg, stats) = bv::encode(g, cfg)?;
    cg.save(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(stats)
}

fn ratio(bits: u64, n: usize, m: usize) -> Result<f64> {
    let lb = graph::info_lower_bound(n as u64, m as u64)?;
    Ok(if lb > 0.0 { bits as f64 / lb } else { f64::NAN })
}

fn import(a: ImportArgs) -> Result<()> {
    let cfg = a.codec.config();
    cfg.validate()?;
    let opts = LoadOptions {
        symmetrize: a.symmetrize,
        allow_self_loops: a.allow_self_loops,
    };
    let loaded = graph::load_edge_list(&a.input, opts)?;
    let g = &loaded.graph;
    let stats = save(g, cfg, &a.output)?;

    let ids_path = a.output.with_extension("ids");
    let mut ids = BufWriter::new(File::create(&ids_path)?);
    for id in &loaded.original_ids {
        writeln!(ids, "{id}")?;
    }
    ids.flush()?;

    println!("n\t{}", g.num_nodes());
    println!("arcs\t{}", g.num_arcs());
    println!("symmetric\t{}", g.is_symmetric());
    println!("bits\t{}", stats.bits);
    println!("bits_per_arc\t{:.4}", stats.bits_per_arc());
    println!("copy_fraction\t{:.4}", stats.copy_fraction());
    println!(
        "ratio\t{:.4}",
        ratio(stats.bits, g.num_nodes(), g.num_arcs())?
    );
    Ok(())
}

fn permute(a: PermuteArgs) -> Result<()> {
    let (cg, g) = load_graph(&a.graph)?;
    let p = Permutation::load(&a.permutation)?;
    save(&g.permute(&p)?, *cg.config(), &a.output)?;
    Ok(())
}

fn transpose(a: TransposeArgs) -> Result<()> {
    let (cg, g) = load_graph(&a.graph)?;
    save(&g.transpose(), *cg.config(), &a.output)?;
    Ok(())
}

fn anf_cmd(a: AnfArgs) -> Result<()> {
    let manifest = match &a.manifest {
        Some(p) => {
            ExperimentManifest::load(p).with_context(|| format!("reading {}", p.display()))?
        }
        None => {
            let Some(graph) = &a.graph else {
                bail!("a graph file or --manifest is required");
            };
            if a.runs == 0 {
                bail!("--runs must be positive");
            }
            let mut m = ExperimentManifest::for_graph(graph, a.registers, a.runs, a.seed)?;
            m.systolic = a.systolic;
            m.exact = a.exact;
            m.max_iters = a.max_iters;
            m.budget_bytes = a.budget_bytes;
            m.record_timing = a.timing;
            m
        }
    };

    // time every run for the log, then drop the times unless asked to keep them
    let timed = ExperimentManifest {
        record_timing: true,
        ..manifest.clone()
    };
    let rs = timed.execute()?;
    for (i, r) in rs.runs().iter().enumerate() {
        eprintln!(
            "run {i}: seed {:#018x}, {} iterations{}, {:.3} s",
            r.seed,
            r.iterations,
            if r.truncated { " (truncated)" } else { "" },
            r.wall_time_s.unwrap_or(0.0)
        );
    }
    let rs = if manifest.record_timing {
        rs
    } else {
        RunSet::new(
            rs.runs()
                .iter()
                .cloned()
                .map(|mut r| {
                    r.wall_time_s = None;
                    r
                })
                .collect(),
        )?
    };

    std::fs::write(&a.output, rs.to_json()? + "\n")
        .with_context(|| format!("writing {}", a.output.display()))?;
    let mut mpath = a.output.clone().into_os_string();
    mpath.push(".manifest.json");
    let mpath = unique_path(Path::new(&mpath));
    std::fs::write(&mpath, manifest.to_json()?)?;
    eprintln!("manifest: {}", mpath.display());
    Ok(())
}

fn read_runs(path: &Path) -> Result<RunSet> {
    let s = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    RunSet::from_json(&s).with_context(|| format!("parsing {}", path.display()))
}

fn stats(a: StatsArgs) -> Result<()> {
    let rs = read_runs(&a.runs)?;
    let conventions: &[bool] = match a.self_pairs {
        SelfPairs::Include => &[true],
        SelfPairs::Exclude => &[false],
        SelfPairs::Both => &[true, false],
    };
    let rows = conventions
        .iter()
        .map(|&inc| DistanceStats::compute(&rs, inc))
        .collect::<hb_core::Result<Vec<_>>>()?;

    let mut tsv = String::from(DistanceStats::TSV_HEADER);
    tsv.push('\n');
    for r in &rows {
        tsv.push_str(&r.tsv_row());
        tsv.push('\n');
    }
    let json = serde_json::to_string_pretty(&rows)? + "\n";
    match a.format {
        Format::Tsv => print!("{tsv}"),
        Format::Json => print!("{json}"),
    }

    if let Some(prefix) = &a.out_prefix {
        let with = |ext: &str| {
            let mut s = prefix.clone().into_os_string();
            s.push(ext);
            PathBuf::from(s)
        };
        std::fs::write(with(".stats.tsv"), &tsv)?;
        std::fs::write(with(".stats.json"), &json)?;
        let graph_id = &rs.runs()[0].graph_id;
        let mut pmf = String::new();
        for &inc in conventions {
            let d =
                DistanceDistribution::from_curve(&rs.mean_curve(|_| true), rs.num_nodes(), inc)?;
            let body = d.to_tsv(graph_id);
            let mut lines = body.lines();
            let header = lines.next().unwrap_or_default();
            if pmf.is_empty() {
                pmf.push_str(&format!("self_pairs\t{header}\n"));
            }
            for l in lines {
                pmf.push_str(&format!("{inc}\t{l}\n"));
            }
        }
        std::fs::write(with(".pmf.tsv"), pmf)?;

        if let Some(exact_path) = &a.evolution {
            let exact = read_runs(exact_path)?;
            let ev = anf::error_evolution(&rs.runs()[0], &exact.runs()[0])?;
            std::fs::write(with(".evolution.tsv"), ev.to_tsv())?;
        }
    }
    Ok(())
}

fn diameter_cmd(a: DiameterArgs) -> Result<()> {
    let (_, g) = load_graph(&a.graph)?;
    let (g, start) = if a.giant_only {
        let gc = diameter::giant_component(&g)?;
        let start =
            match a.start {
                Some(s) => Some(gc.nodes.binary_search(&s).map_err(|_| {
                    anyhow::anyhow!("start node {s} is not in the giant component")
                })?),
                None => None,
            };
        (gc.graph, start)
    } else {
        (g, a.start)
    };
    if let Some(s) = start {
        if s >= g.num_nodes() {
            bail!("start node {s} out of range for {} nodes", g.num_nodes());
        }
    }
    let res = diameter::ifub(&g, start)?;
    let mut out = serde_json::to_value(&res)?;
    if a.brute_force {
        out["brute_force"] = diameter::brute_force_diameter(&g).into();
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn gaps(a: GapsArgs) -> Result<()> {
    let (_, g) = load_graph(&a.graph)?;
    let h = g.gap_histogram();
    let total: u64 = h.iter().sum();
    match a.format {
        Format::Tsv => {
            println!("bin\tlow\thigh\tcount");
            for (k, c) in h.iter().enumerate() {
                println!("{k}\t{}\t{}\t{c}", 1u128 << k, (1u128 << (k + 1)) - 1);
            }
            println!("total\t\t\t{total}");
        }
        Format::Json => {
            let v = serde_json::json!({ "bins": h, "total": total });
            println!("{}", serde_json::to_string_pretty(&v)?);
        }
    }
    Ok(())
}

fn bound(a: BoundArgs) -> Result<()> {
    let (n, m, bits) = match (&a.graph, a.nodes, a.arcs) {
        (Some(p), _, _) => {
            let cg =
                CompressedGraph::load(p).with_context(|| format!("reading {}", p.display()))?;
            (
                cg.num_nodes() as u64,
                cg.num_arcs() as u64,
                Some(cg.stream_bits()),
            )
        }
        (None, Some(n), Some(m)) => (n, m, None),
        _ => bail!("give a graph file or both --nodes and --arcs"),
    };
    let lb = graph::info_lower_bound(n, m)?;
    let per_arc = if m > 0 { lb / m as f64 } else { 0.0 };
    let ratio = bits.map(|b| b as f64 / lb);
    match a.format {
        Format::Tsv => {
            println!("n\t{n}");
            println!("arcs\t{m}");
            println!("bound_bits\t{lb:.4}");
            println!("bound_bits_per_arc\t{per_arc:.4}");
            if let (Some(b), Some(r)) = (bits, ratio) {
                println!("bits\t{b}");
                println!("ratio\t{r:.4}");
            }
        }
        Format::Json => {
            let v = serde_json::json!({
                "n": n,
                "arcs": m,
                "bound_bits": lb,
                "bound_bits_per_arc": per_arc,
                "bits": bits,
                "ratio": ratio,
            });
            println!("{}", serde_json::to_string_pretty(&v)?);
        }
    }
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    let (_, g) = load_graph(&a.graph)?;
    let out: Box<dyn Write> = match &a.output {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut out = BufWriter::new(out);
    match &a.original_ids {
        None => graph::write_edge_list(&g, &mut out)?,
        Some(p) => {
            let ids = std::fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))?
                .lines()
                .map(|l| l.trim().parse::<u64>())
                .collect::<Result<Vec<_>, _>>()
                .with_context(|| format!("parsing {}", p.display()))?;
            if ids.len() != g.num_nodes() {
                bail!(
                    "{} has {} ids for {} nodes",
                    p.display(),
                    ids.len(),
                    g.num_nodes()
                );
            }
            let mut buf = Vec::new();
            graph::write_edge_list(&g, &mut buf)?;
            for line in String::from_utf8(buf)?.lines() {
                let mut it = line.split_whitespace().map(|t| t.parse::<usize>());
                match (it.next(), it.next()) {
                    (Some(Ok(x)), Some(Ok(y))) => writeln!(out, "{}\t{}", ids[x], ids[y])?,
                    _ => writeln!(out, "{line}")?,
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}
