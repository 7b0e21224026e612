//! Training-free encoder selection: score each candidate vision encoder
//! against one language model's text embeddings, rank, pick the best, and
//! correlate scores with externally measured performance.

mod stats;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use stats::{average_ranks, pearson, r_squared, spearman};

use crate::baselines::{cca_score, mutual_nn_score, rsa_score, Direction, MetricKind, MetricScore};
use crate::baselines::{DEFAULT_CCA_COMPONENTS, DEFAULT_NEIGHBORS};
use crate::embed_io::{check_paired, read_embeddings, sample_indices, EmbeddingSet, Modality};
use crate::error::{Error, Result};
use crate::exec;
use crate::gw::{solve_gw, GwConfig, GwSolveResult, PenaltyKind};
use crate::mmspace::{median_scale_match, pairwise_distances};
use crate::report::{num, num_opt};

/// One candidate in a pool manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderEntry {
    pub name: String,
    pub embedding_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none", serialize_with = "num_opt")]
    pub external_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_params: Option<u64>,
}

/// Reads a JSON pool manifest. Relative embedding paths are resolved
/// against the manifest's directory.
pub fn load_pool(path: impl AsRef<Path>) -> Result<Vec<EncoderEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pool: Vec<EncoderEntry> = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or(Path::new(""));
    for entry in &mut pool {
        if entry.embedding_path.is_relative() {
            entry.embedding_path = base.join(&entry.embedding_path);
        }
    }
    check_unique_names(&pool)?;
    Ok(pool)
}

fn check_unique_names(pool: &[EncoderEntry]) -> Result<()> {
    let mut seen = HashSet::new();
    for e in pool {
        if !seen.insert(e.name.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate encoder name `{}`", e.name)));
        }
    }
    Ok(())
}

/// Knobs shared by every metric when scoring a pair or a pool.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreOptions {
    pub gw: GwConfig,
    /// Number of sampled pairs; `None` keeps every row.
    pub pairs: Option<usize>,
    pub neighbors: usize,
    pub components: usize,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self {
            gw: GwConfig::default(),
            pairs: None,
            neighbors: DEFAULT_NEIGHBORS,
            components: DEFAULT_CCA_COMPONENTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GwPairResult {
    /// Factor applied to the vision distances.
    pub scale: f64,
    pub solve: GwSolveResult,
}

/// GW score of one paired sample: angular distances on both sides, vision
/// rescaled to the text median, then Frank-Wolfe.
pub fn gw_pair(vision: &EmbeddingSet, text: &EmbeddingSet, config: &GwConfig) -> Result<GwPairResult> {
    check_paired(vision, text)?;
    config.validate()?;
    let dv = pairwise_distances(vision)?;
    let dt = pairwise_distances(text)?;
    let matched = median_scale_match(&dv, &dt)?;
    Ok(GwPairResult {
        scale: matched.scale,
        solve: solve_gw(&matched.scaled, &dt, config)?,
    })
}

/// Scores one already-paired vision/text sample with a similarity metric.
pub fn score_pair(
    vision: &EmbeddingSet,
    text: &EmbeddingSet,
    metric: MetricKind,
    options: &ScoreOptions,
) -> Result<MetricScore> {
    match metric {
        MetricKind::Gw => Ok(MetricScore::new(metric, gw_pair(vision, text, &options.gw)?.solve.value)),
        MetricKind::Rsa => rsa_score(vision, text),
        MetricKind::Cca => cca_score(vision, text, options.components),
        MetricKind::MutualNn => mutual_nn_score(vision, text, options.neighbors),
        MetricKind::AccuracyExternal => Err(Error::Parameter(
            "accuracy_external comes from the pool manifest, not from embeddings".into(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub encoder: String,
    #[serde(serialize_with = "num")]
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub max_iters: usize,
    #[serde(serialize_with = "num")]
    pub tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
    pub penalty: PenaltyKind,
    pub pairs: usize,
    pub neighbors: usize,
    pub components: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub llm_name: String,
    pub metric: MetricKind,
    pub direction: Direction,
    pub rows: Vec<RankRow>,
    /// Encoders left out because the metric has no value for them.
    pub excluded: Vec<String>,
    pub selected: String,
    pub config: ConfigEcho,
}

impl RankingReport {
    pub fn scores(&self) -> Vec<(String, f64)> {
        self.rows.iter().map(|r| (r.encoder.clone(), r.score)).collect()
    }
}

/// Orders scores best-first for `direction`; equal scores go by name.
pub fn rank_scores(scores: &[(String, f64)], direction: Direction) -> Vec<RankRow> {
    let mut sorted: Vec<&(String, f64)> = scores.iter().collect();
    sorted.sort_by(|a, b| {
        let by_score = match direction {
            Direction::LowerBetter => a.1.total_cmp(&b.1),
            Direction::HigherBetter => b.1.total_cmp(&a.1),
        };
        by_score.then_with(|| a.0.cmp(&b.0))
    });
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, (name, score))| RankRow {
            encoder: name.clone(),
            score: *score,
            rank: i + 1,
        })
        .collect()
}

/// Scores every encoder of `pool` against `text` and ranks them.
///
/// All embedding files are loaded and checked against the text ids before
/// any metric runs. The same sampled rows are used for every encoder.
pub fn score_pool(
    pool: &[EncoderEntry],
    text: &EmbeddingSet,
    metric: MetricKind,
    options: &ScoreOptions,
    llm_name: &str,
) -> Result<RankingReport> {
    options.gw.validate()?;
    check_unique_names(pool)?;
    if pool.is_empty() {
        return Err(Error::InvalidInput("empty encoder pool".into()));
    }
    let pairs = options.pairs.unwrap_or(text.len());
    let indices = sample_indices(text.len(), pairs, options.gw.seed)?;

    let mut scores = Vec::new();
    let mut excluded = Vec::new();
    if metric == MetricKind::AccuracyExternal {
        for e in pool {
            match e.external_accuracy {
                Some(acc) if acc.is_finite() => scores.push((e.name.clone(), acc)),
                _ => excluded.push(e.name.clone()),
            }
        }
    } else {
        let text_sample = text.select(&indices)?;
        let loaded = exec::map_indexed(pool.len(), |i| load_member(&pool[i], text, &indices));
        let samples = loaded.into_iter().collect::<Result<Vec<_>>>()?;
        let results = exec::map_indexed(samples.len(), |i| {
            score_pair(&samples[i], &text_sample, metric, options).map_err(|e| Error::Pool {
                encoder: pool[i].name.clone(),
                source: Box::new(e),
            })
        });
        for (entry, score) in pool.iter().zip(results) {
            scores.push((entry.name.clone(), score?.value));
        }
    }
    if scores.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no encoder in the pool has a `{}` score",
            metric.name()
        )));
    }
    let rows = rank_scores(&scores, metric.direction());
    let selected = rows[0].encoder.clone();
    Ok(RankingReport {
        llm_name: llm_name.to_owned(),
        metric,
        direction: metric.direction(),
        rows,
        excluded,
        selected,
        config: ConfigEcho {
            max_iters: options.gw.max_iters,
            tolerance: options.gw.tolerance,
            restarts: options.gw.restarts,
            seed: options.gw.seed,
            penalty: options.gw.penalty,
            pairs,
            neighbors: options.neighbors,
            components: options.components,
        },
    })
}

fn load_member(entry: &EncoderEntry, text: &EmbeddingSet, indices: &[usize]) -> Result<EmbeddingSet> {
    let wrap = |e: Error| Error::Pool {
        encoder: entry.name.clone(),
        source: Box::new(e),
    };
    let set = read_embeddings(&entry.embedding_path)
        .map_err(wrap)?
        .with_modality(Modality::Vision);
    check_paired(&set, text).map_err(wrap)?;
    set.select(indices).map_err(wrap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationStats {
    #[serde(serialize_with = "num")]
    pub pearson_abs: f64,
    #[serde(serialize_with = "num")]
    pub spearman_abs: f64,
    #[serde(serialize_with = "num")]
    pub r_squared: f64,
}

/// `|r|`, `|rho|` and `R^2` between per-encoder scores and performance,
/// matched by encoder name. Both lists must name the same encoders.
pub fn correlate_with_performance(
    scores: &[(String, f64)],
    performance: &[(String, f64)],
) -> Result<CorrelationStats> {
    let perf: BTreeMap<&str, f64> = performance.iter().map(|(n, v)| (n.as_str(), *v)).collect();
    if perf.len() != performance.len() {
        return Err(Error::Alignment("duplicate encoder in performance list".into()));
    }
    let names: HashSet<&str> = scores.iter().map(|(n, _)| n.as_str()).collect();
    if names.len() != scores.len() {
        return Err(Error::Alignment("duplicate encoder in score list".into()));
    }
    let missing_perf: Vec<&str> = scores
        .iter()
        .map(|(n, _)| n.as_str())
        .filter(|n| !perf.contains_key(n))
        .collect();
    let missing_scores: Vec<&str> = perf.keys().copied().filter(|n| !names.contains(n)).collect();
    if !missing_perf.is_empty() || !missing_scores.is_empty() {
        return Err(Error::Alignment(format!(
            "no performance for {missing_perf:?}; no score for {missing_scores:?}"
        )));
    }
    let x: Vec<f64> = scores.iter().map(|(_, v)| *v).collect();
    let y: Vec<f64> = scores.iter().map(|(n, _)| perf[n.as_str()]).collect();
    Ok(CorrelationStats {
        pearson_abs: pearson(&x, &y)?.abs(),
        spearman_abs: spearman(&x, &y)?.abs(),
        r_squared: r_squared(&x, &y)?,
    })
}

/// Performance file: either `{"name": value, ...}` or
/// `[{"name": ..., "performance": ...}, ...]`.
pub fn load_performance(path: impl AsRef<Path>) -> Result<Vec<(String, f64)>> {
    #[derive(Deserialize)]
    struct Item {
        name: String,
        performance: f64,
    }
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Perf {
        Map(BTreeMap<String, f64>),
        List(Vec<Item>),
    }
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(match serde_json::from_str::<Perf>(&text)? {
        Perf::Map(m) => m.into_iter().collect(),
        Perf::List(items) => items.into_iter().map(|i| (i.name, i.performance)).collect(),
    })
}

pub fn load_report(path: impl AsRef<Path>) -> Result<RankingReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
