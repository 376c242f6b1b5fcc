use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::history::HistoryGap;
use super::recovery::Recovery;
use super::slices::SliceRow;
use super::stats::{paired_t_test, PairedTTest};
use crate::error::{Error, Result};
use crate::glm::compensated_sum;
use crate::inference::{AnimalLogLikelihood, HeldoutLogLikelihood};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Holdout,
    Animals,
    Future,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_trial: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_sha256: Option<String>,
    /// Model name to SHA-256 of its model file.
    #[serde(default)]
    pub model_sha256: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_config: Option<serde_json::Value>,
}

/// Held-out log-likelihoods of one model. Per-animal values are means over
/// seeds; `total` sums those over animals. `per_seed_totals` sums animals
/// within each seed, and their mean equals `total` up to rounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub name: String,
    pub per_animal: Vec<AnimalLogLikelihood>,
    pub total: f64,
    pub trials: usize,
    pub per_trial: f64,
    pub per_seed_totals: Vec<f64>,
    pub mean_of_seed_totals: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub model_a: String,
    pub model_b: String,
    #[serde(flatten)]
    pub test: PairedTTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsePoint {
    pub pool_size: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub recovery: Recovery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedSlices {
    pub model: String,
    pub rows: Vec<SliceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedHistoryGap {
    pub model: String,
    pub gap: HistoryGap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub protocol: Protocol,
    pub metadata: ReportMetadata,
    /// Set when there was nothing to evaluate (for example a zero horizon).
    pub degenerate: bool,
    pub models: Vec<ModelScores>,
    pub pairwise: Vec<PairwiseTest>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rmse_vs_pool_size: Vec<RmsePoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub slices: Vec<NamedSlices>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history_gaps: Vec<NamedHistoryGap>,
}

impl EvalReport {
    pub fn empty(protocol: Protocol, metadata: ReportMetadata) -> Self {
        EvalReport {
            format_version: REPORT_FORMAT_VERSION,
            protocol,
            metadata,
            degenerate: true,
            models: Vec::new(),
            pairwise: Vec::new(),
            rmse_vs_pool_size: Vec::new(),
            slices: Vec::new(),
            history_gaps: Vec::new(),
        }
    }

    pub fn model(&self, name: &str) -> Option<&ModelScores> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn test(&self, a: &str, b: &str) -> Option<&PairwiseTest> {
        self.pairwise.iter().find(|p| p.model_a == a && p.model_b == b)
    }

    /// Fixed-width summary for terminals.
    pub fn summary_table(&self) -> String {
        let mut out = format!("{:<24} {:>16} {:>10} {:>12}\n", "model", "total LL", "trials", "LL/trial");
        for m in &self.models {
            out += &format!("{:<24} {:>16.4} {:>10} {:>12.6}\n", m.name, m.total, m.trials, m.per_trial);
        }
        for p in &self.pairwise {
            out += &format!(
                "{} - {}: mean diff {:.4}, t = {:.4}, df = {}, p = {:.4}{}\n",
                p.model_a,
                p.model_b,
                p.test.mean_difference,
                p.test.t,
                p.test.df,
                p.test.p_value,
                if p.test.degenerate { " (degenerate)" } else { "" }
            );
        }
        if self.degenerate {
            out += "degenerate: nothing evaluated\n";
        }
        out
    }
}

/// Mean that returns the common value unchanged when all inputs agree.
fn mean_exact<I: Iterator<Item = f64>>(values: I) -> f64 {
    let v: Vec<f64> = values.collect();
    if v.iter().all(|&x| x == v[0]) {
        return v[0];
    }
    compensated_sum(v.iter().copied()) / v.len() as f64
}

/// Builds model scores and all pairwise tests from per-seed held-out results.
/// Every result must cover the same animals in the same order.
pub fn assemble(
    protocol: Protocol,
    metadata: ReportMetadata,
    results: Vec<(String, Vec<HeldoutLogLikelihood>)>,
) -> Result<EvalReport> {
    let reference: Option<Vec<String>> = results
        .first()
        .and_then(|(_, seeds)| seeds.first())
        .map(|h| h.per_animal.iter().map(|a| a.animal_id.clone()).collect());
    let mut models = Vec::with_capacity(results.len());
    for (name, seeds) in results {
        if seeds.is_empty() {
            return Err(Error::InvalidData(format!("model {name} has no results")));
        }
        let ids = reference.as_ref().expect("nonempty results");
        for h in &seeds {
            if h.per_animal.len() != ids.len() || h.per_animal.iter().zip(ids).any(|(a, id)| &a.animal_id != id) {
                return Err(Error::InvalidData(format!("model {name} was scored on different animals")));
            }
        }
        let per_animal: Vec<AnimalLogLikelihood> = (0..ids.len())
            .map(|i| AnimalLogLikelihood {
                animal_id: ids[i].clone(),
                total: mean_exact(seeds.iter().map(|h| h.per_animal[i].total)),
                trials: seeds[0].per_animal[i].trials,
            })
            .collect();
        // Identical seeds (or a single one) keep the trial-level compensated total.
        let total = if seeds.iter().all(|h| h == &seeds[0]) {
            seeds[0].total
        } else {
            compensated_sum(per_animal.iter().map(|a| a.total))
        };
        let trials: usize = per_animal.iter().map(|a| a.trials).sum();
        let per_seed_totals: Vec<f64> = seeds.iter().map(|h| h.total).collect();
        models.push(ModelScores {
            name,
            total,
            trials,
            per_trial: if trials == 0 { 0.0 } else { total / trials as f64 },
            mean_of_seed_totals: mean_exact(per_seed_totals.iter().copied()),
            per_seed_totals,
            per_animal,
        });
    }
    let mut pairwise = Vec::new();
    for i in 0..models.len() {
        for j in i + 1..models.len() {
            let a: Vec<f64> = models[i].per_animal.iter().map(|x| x.total).collect();
            let b: Vec<f64> = models[j].per_animal.iter().map(|x| x.total).collect();
            pairwise.push(PairwiseTest {
                model_a: models[i].name.clone(),
                model_b: models[j].name.clone(),
                test: paired_t_test(&a, &b)?,
            });
        }
    }
    let degenerate = models.is_empty() || models.iter().all(|m| m.trials == 0);
    Ok(EvalReport {
        format_version: REPORT_FORMAT_VERSION,
        protocol,
        metadata,
        degenerate,
        models,
        pairwise,
        rmse_vs_pool_size: Vec::new(),
        slices: Vec::new(),
        history_gaps: Vec::new(),
    })
}
