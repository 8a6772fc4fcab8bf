//! Replayable experiment manifests for neighbourhood-function runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::anf::{self, AnfOptions, RunSet};
use crate::bv::{CodecConfig, CompressedGraph};
use crate::error::Result;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything needed to reproduce a run file byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub tool_version: String,
    pub graph_path: PathBuf,
    pub graph_id: String,
    /// Codec of the graph file, as read from its header.
    pub codec: CodecConfig,
    pub registers: usize,
    pub runs: usize,
    pub master_seed: u64,
    pub systolic: bool,
    pub exact: bool,
    pub max_iters: Option<usize>,
    pub budget_bytes: Option<u64>,
    /// Whether wall times are written into run files (which then differ
    /// between replays).
    pub record_timing: bool,
}

impl ExperimentManifest {
    pub fn for_graph(
        graph_path: &Path,
        registers: usize,
        runs: usize,
        master_seed: u64,
    ) -> Result<Self> {
        let cg = CompressedGraph::load(graph_path)?;
        let graph_id = graph_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Self {
            tool_version: TOOL_VERSION.to_string(),
            graph_path: graph_path.to_path_buf(),
            graph_id,
            codec: *cg.config(),
            registers,
            runs,
            master_seed,
            systolic: false,
            exact: false,
            max_iters: None,
            budget_bytes: None,
            record_timing: false,
        })
    }

    /// Runs the experiment.
    pub fn execute(&self) -> Result<RunSet> {
        let cg = CompressedGraph::load(&self.graph_path)?;
        let g = cg.decode()?;
        let mut rs = if self.exact {
            RunSet::new(vec![anf::run_exact(
                &g,
                anf::EXACT_NODE_LIMIT,
                &self.graph_id,
            )?])?
        } else {
            let opts = AnfOptions {
                registers: self.registers,
                seed: self.master_seed,
                max_iters: self.max_iters,
                budget_bytes: self.budget_bytes,
                graph_id: self.graph_id.clone(),
            };
            let pred = self.systolic.then(|| g.transpose());
            anf::run_many(&g, pred.as_ref(), &opts, self.master_seed, self.runs)?
        };
        if !self.record_timing {
            rs = RunSet::new(
                rs.runs()
                    .iter()
                    .cloned()
                    .map(|mut r| {
                        r.wall_time_s = None;
                        r
                    })
                    .collect(),
            )?;
        }
        Ok(rs)
    }

    /// Runs the experiment and returns the serialised run file.
    pub fn run_file(&self) -> Result<Vec<u8>> {
        let mut s = self.execute()?.to_json()?;
        s.push('\n');
        Ok(s.into_bytes())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// `path` itself if free, otherwise the first free `path.1`, `path.2`, ….
pub fn unique_path(path: &Path) -> PathBuf {
    if !path.exists() {
        return path.to_path_buf();
    }
    (1..)
        .map(|i| {
            let mut s = path.as_os_str().to_owned();
            s.push(format!(".{i}"));
            PathBuf::from(s)
        })
        .find(|p| !p.exists())
        .expect("some suffix is free")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unique_path_suffixes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        assert_eq!(unique_path(&p), p);
        std::fs::write(&p, "x").unwrap();
        let q = unique_path(&p);
        assert_eq!(q, dir.path().join("m.json.1"));
        std::fs::write(&q, "x").unwrap();
        assert_eq!(unique_path(&p), dir.path().join("m.json.2"));
    }

    #[test]
    fn replay_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("er.hbg");
        let g = crate::gen::erdos_renyi(200, 0.03, 1);
        crate::bv::encode(&g, CodecConfig::default())
            .unwrap()
            .0
            .save(&path)
            .unwrap();
        let mut m = ExperimentManifest::for_graph(&path, 32, 3, 77).unwrap();
        m.systolic = true;
        let mpath = dir.path().join("run.manifest.json");
        std::fs::write(&mpath, m.to_json().unwrap()).unwrap();
        let replayed = ExperimentManifest::load(&mpath).unwrap();
        assert_eq!(replayed, m);
        assert_eq!(m.run_file().unwrap(), replayed.run_file().unwrap());
    }
}
