//! Experiment configuration: either assembled from command-line flags or
//! loaded from a JSON file. Parsing is strict; unknown keys are errors.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;

use hidekit::algorithms::AlgorithmSpec;
use hidekit::graph::{gen_family, GraphFamilySpec, PortLabeledGraph};
use hidekit::infotheory::Dist;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    pub algorithm: AlgorithmSpec,
    #[serde(default)]
    pub prior: Option<PriorSpec>,
    #[serde(default)]
    pub starts: Option<Vec<usize>>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub output: Option<OutputSpec>,
}

fn default_trials() -> u64 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum GraphSource {
    File(GraphFile),
    Inline(GraphFamilySpec),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub path: PathBuf,
}

impl GraphSource {
    pub fn load(&self) -> Result<PortLabeledGraph, CliError> {
        match self {
            GraphSource::File(f) => load_graph_file(&f.path),
            GraphSource::Inline(spec) => {
                gen_family(spec).map_err(|e| CliError::validation(e.to_string()))
            }
        }
    }
}

pub fn load_graph_file(path: &PathBuf) -> Result<PortLabeledGraph, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    PortLabeledGraph::from_json(&text).map_err(|e| CliError::validation(e.to_string()))
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum PriorSpec {
    Named(String),
    Map(BTreeMap<String, f64>),
}

impl PriorSpec {
    /// Resolves to a distribution over start vertices of `g`.
    pub fn resolve(&self, g: &PortLabeledGraph) -> Result<Dist<usize>, CliError> {
        match self {
            PriorSpec::Named(name) => parse_named_prior(name, g),
            PriorSpec::Map(map) => {
                let mut probs = BTreeMap::new();
                for (k, &p) in map {
                    let v: usize = k
                        .parse()
                        .map_err(|_| CliError::validation(format!("prior: bad vertex key {k:?}")))?;
                    check_vertex(g, v)?;
                    probs.insert(v, p);
                }
                Dist::new(probs).map_err(|e| CliError::validation(format!("prior: {e}")))
            }
        }
    }
}

/// Named priors: "uniform" or "two_point:u,v". A string starting with '{'
/// is treated as an inline JSON map.
pub fn parse_prior(s: &str, g: &PortLabeledGraph) -> Result<Dist<usize>, CliError> {
    if s.trim_start().starts_with('{') {
        let map: BTreeMap<String, f64> = serde_json::from_str(s)
            .map_err(|e| CliError::validation(format!("prior: {e}")))?;
        return PriorSpec::Map(map).resolve(g);
    }
    parse_named_prior(s, g)
}

fn parse_named_prior(name: &str, g: &PortLabeledGraph) -> Result<Dist<usize>, CliError> {
    if name == "uniform" {
        return Dist::uniform(g.vertices().collect::<Vec<_>>())
            .map_err(|e| CliError::validation(format!("prior: {e}")));
    }
    if let Some(rest) = name.strip_prefix("two_point:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 2 {
            return Err(CliError::validation(format!(
                "prior: expected two_point:u,v, got {name:?}"
            )));
        }
        let u: usize = parts[0]
            .trim()
            .parse()
            .map_err(|_| CliError::validation(format!("prior: bad vertex {:?}", parts[0])))?;
        let v: usize = parts[1]
            .trim()
            .parse()
            .map_err(|_| CliError::validation(format!("prior: bad vertex {:?}", parts[1])))?;
        check_vertex(g, u)?;
        check_vertex(g, v)?;
        return Dist::two_point(u, v).map_err(|e| CliError::validation(format!("prior: {e}")));
    }
    Err(CliError::validation(format!(
        "prior: unknown name {name:?} (expected \"uniform\", \"two_point:u,v\" or a JSON map)"
    )))
}

fn check_vertex(g: &PortLabeledGraph, v: usize) -> Result<(), CliError> {
    if !g.contains_vertex(v) {
        return Err(CliError::validation(format!(
            "prior: vertex {v} outside 1..={}",
            g.n()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Exact,
    Mc,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Jsonl,
    Csv,
}

pub fn load_config(path: &PathBuf) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::validation(format!("config: {e}")))
}
