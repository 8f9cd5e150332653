//! Evaluation harness: ranking utility, explanation quality, and
//! demographic-parity fairness.

use std::collections::{HashMap, HashSet};
use std::collections::BTreeMap;
use std::path::Path as FsPath;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kg::{EntityIdx, InteractionLog, KnowledgeGraph};
use crate::props::EtdContext;
use crate::rerank::ExplainedList;
use crate::stats::kruskal_wallis;
use crate::tsv;

/// Normalized discounted cumulative gain at `k` with binary relevance and a
/// base-2 logarithm decay. The ideal ranking places `min(k, |test|)` hits at
/// the top. Returns 0 when the test set is empty.
pub fn ndcg_at_k(recommended: &[EntityIdx], test_items: &HashSet<EntityIdx>, k: usize) -> f64 {
    debug_assert!(k >= 1);
    debug_assert!({
        let unique: HashSet<_> = recommended.iter().collect();
        unique.len() == recommended.len()
    });
    if test_items.is_empty() {
        return 0.0;
    }
    let discount = |position: usize| 1.0 / ((position + 1) as f64).log2();
    let dcg: f64 = recommended
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, product)| test_items.contains(product))
        .map(|(i, _)| discount(i + 1))
        .sum();
    let ideal_hits = k.min(test_items.len());
    let idcg: f64 = (1..=ideal_hits).map(discount).sum();
    dcg / idcg
}

/// Per-list explanation quality values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ListMetrics {
    pub lir: f64,
    pub sep: f64,
    pub etd: f64,
}

impl ListMetrics {
    /// The aggregate explanation quality: the plain sum of the three scores.
    pub fn eq(&self) -> f64 {
        self.lir + self.sep + self.etd
    }
}

/// Mean recency and popularity over the list's selected paths, and the
/// diversity of their types. The diversity denominator uses the list's own
/// length, which equals the configured `k` except for truncated lists.
pub fn list_explanation_metrics(list: &ExplainedList, ctx: &EtdContext) -> ListMetrics {
    assert!(!list.entries.is_empty(), "list_explanation_metrics requires a nonempty list");
    let n = list.entries.len() as f64;
    let lir = list.entries.iter().map(|e| e.lir).sum::<f64>() / n;
    let sep = list.entries.iter().map(|e| e.sep).sum::<f64>() / n;
    let unique: HashSet<_> = list.entries.iter().map(|e| e.path_type()).collect();
    let denominator = list.entries.len().min(ctx.num_types());
    let etd = unique.len() as f64 / denominator as f64;
    ListMetrics { lir, sep, etd }
}

/// Binary sensitive-attribute grouping of users.
///
/// Exactly two labels are supported; they are ordered lexicographically and
/// every delta is `mean(first label) - mean(second label)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    pub attribute: String,
    labels: [String; 2],
    map: HashMap<EntityIdx, bool>,
}

impl GroupSpec {
    /// Load a `users.tsv` file (`user_id <TAB> group_label`).
    pub fn load(path: &FsPath, graph: &KnowledgeGraph, attribute: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for rec in tsv::read_records(path, 2)? {
            let user = graph.entity(&rec.fields[0]).ok_or_else(|| {
                tsv::ingest_error(path, rec.line_no, format!("unknown user '{}'", rec.fields[0]))
            })?;
            if !graph.is_user(user) {
                return Err(tsv::ingest_error(
                    path,
                    rec.line_no,
                    format!("entity '{}' is not a user", rec.fields[0]),
                ));
            }
            map.insert(user, rec.fields[1].clone());
        }
        Self::from_labels(attribute, map)
    }

    /// Build from explicit per-user labels.
    pub fn from_labels(attribute: &str, labeled: HashMap<EntityIdx, String>) -> Result<Self> {
        let mut labels: Vec<&String> = labeled.values().collect();
        labels.sort();
        labels.dedup();
        if labels.len() != 2 {
            return Err(Error::Data(format!(
                "attribute '{attribute}' must have exactly two labels, found {}: {:?}",
                labels.len(),
                labels
            )));
        }
        let first = labels[0].clone();
        let second = labels[1].clone();
        let map = labeled
            .into_iter()
            .map(|(user, label)| (user, label == second))
            .collect();
        Ok(GroupSpec {
            attribute: attribute.to_string(),
            labels: [first, second],
            map,
        })
    }

    pub fn labels(&self) -> (&str, &str) {
        (&self.labels[0], &self.labels[1])
    }

    pub fn label_of(&self, user: EntityIdx) -> Option<&str> {
        self.map
            .get(&user)
            .map(|&second| self.labels[usize::from(second)].as_str())
    }

    /// 0 for the first (lexicographically smaller) label, 1 for the second.
    pub fn group_index(&self, user: EntityIdx) -> Option<usize> {
        self.map.get(&user).map(|&second| usize::from(second))
    }

    /// Partition per-user values into the two groups, dropping unlabeled
    /// users and counting them.
    pub fn split_values(&self, values: &[(EntityIdx, f64)]) -> (Vec<f64>, Vec<f64>, usize) {
        let mut first = Vec::new();
        let mut second = Vec::new();
        let mut unlabeled = 0;
        for &(user, value) in values {
            match self.group_index(user) {
                Some(0) => first.push(value),
                Some(_) => second.push(value),
                None => unlabeled += 1,
            }
        }
        (first, second, unlabeled)
    }
}

/// Demographic-parity delta: mean over the first group minus mean over the
/// second, sign preserved. Errors when a group has no evaluated users.
pub fn group_delta(values: &[(EntityIdx, f64)], groups: &GroupSpec) -> Result<f64> {
    let (first, second, _) = groups.split_values(values);
    if first.is_empty() || second.is_empty() {
        let (l1, l2) = groups.labels();
        let empty = if first.is_empty() { l1 } else { l2 };
        return Err(Error::Data(format!(
            "group '{empty}' of attribute '{}' has no evaluated users",
            groups.attribute
        )));
    }
    Ok(mean(&first) - mean(&second))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Run provenance carried inside every report. Contains no wall-clock data
/// so that identical runs serialize identically.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunMetadata {
    pub config: BTreeMap<String, String>,
    pub dataset_hashes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MetricMeans {
    pub ndcg: f64,
    pub lir: f64,
    pub sep: f64,
    pub etd: f64,
    pub eq: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ReportCounts {
    /// Users contributing to every aggregate.
    pub evaluated_users: usize,
    /// Users skipped for having no test interactions.
    pub skipped_no_test_items: usize,
    /// Users skipped for having an empty re-ranked list.
    pub skipped_empty_list: usize,
    /// Evaluated users missing a group label; they still count in the
    /// global means but not in the fairness aggregates.
    pub unlabeled_users: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub label: String,
    pub users: usize,
    pub means: MetricMeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaEntry {
    /// Mean of the first group minus mean of the second.
    pub value: f64,
    pub h: f64,
    pub p: f64,
    /// True when p < 0.05.
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessSection {
    pub attribute: String,
    pub groups: Vec<GroupSummary>,
    /// Keyed by metric name: ndcg, lir, sep, etd.
    pub deltas: BTreeMap<String, DeltaEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserRecord {
    pub user: String,
    pub group: Option<String>,
    pub ndcg: f64,
    pub lir: f64,
    pub sep: f64,
    pub etd: f64,
    pub eq: f64,
}

/// The full evaluation result. JSON serialization carries the aggregates;
/// the per-user records go to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub metadata: RunMetadata,
    pub counts: ReportCounts,
    pub global: MetricMeans,
    pub fairness: Option<FairnessSection>,
    #[serde(skip)]
    pub per_user: Vec<UserRecord>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        let mut json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Internal(format!("report serialization failed: {e}")))?;
        json.push('\n');
        Ok(json)
    }

    /// Flat per-user records: `user,group,ndcg,lir,sep,etd,eq`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("user,group,ndcg,lir,sep,etd,eq\n");
        for record in &self.per_user {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                record.user,
                record.group.as_deref().unwrap_or(""),
                tsv::fmt_value(record.ndcg),
                tsv::fmt_value(record.lir),
                tsv::fmt_value(record.sep),
                tsv::fmt_value(record.etd),
                tsv::fmt_value(record.eq),
            ));
        }
        out
    }
}

/// Assemble the evaluation report for a set of per-user lists.
///
/// Users without test interactions or with empty lists are excluded and
/// counted. Fairness aggregates are produced when a grouping is given;
/// evaluated users without a label stay in the global means.
pub fn build_report(
    lists: &[ExplainedList],
    test: &InteractionLog,
    groups: Option<&GroupSpec>,
    ctx: &EtdContext,
    k: usize,
    metadata: RunMetadata,
    graph: &KnowledgeGraph,
) -> Result<EvaluationReport> {
    let mut counts = ReportCounts::default();
    let mut evaluated: Vec<(EntityIdx, MetricMeans)> = Vec::new();
    for list in lists {
        if list.entries.is_empty() {
            counts.skipped_empty_list += 1;
            continue;
        }
        let test_items = test.product_set(list.user);
        if test_items.is_empty() {
            counts.skipped_no_test_items += 1;
            continue;
        }
        let ndcg = ndcg_at_k(&list.products(), &test_items, k);
        let metrics = list_explanation_metrics(list, ctx);
        evaluated.push((
            list.user,
            MetricMeans {
                ndcg,
                lir: metrics.lir,
                sep: metrics.sep,
                etd: metrics.etd,
                eq: metrics.eq(),
            },
        ));
    }
    if evaluated.is_empty() {
        return Err(Error::Data(
            "no evaluable users: every user lacks test interactions or a re-ranked list"
                .to_string(),
        ));
    }
    counts.evaluated_users = evaluated.len();
    evaluated.sort_by(|a, b| graph.entity_id(a.0).cmp(graph.entity_id(b.0)));

    let global = MetricMeans {
        ndcg: mean(&evaluated.iter().map(|(_, m)| m.ndcg).collect::<Vec<_>>()),
        lir: mean(&evaluated.iter().map(|(_, m)| m.lir).collect::<Vec<_>>()),
        sep: mean(&evaluated.iter().map(|(_, m)| m.sep).collect::<Vec<_>>()),
        etd: mean(&evaluated.iter().map(|(_, m)| m.etd).collect::<Vec<_>>()),
        eq: mean(&evaluated.iter().map(|(_, m)| m.eq).collect::<Vec<_>>()),
    };

    let fairness = match groups {
        None => None,
        Some(spec) => {
            type MetricGetter = fn(&MetricMeans) -> f64;
            let metric = |f: MetricGetter| -> Vec<(EntityIdx, f64)> {
                evaluated.iter().map(|&(u, ref m)| (u, f(m))).collect()
            };
            let named: [(&str, MetricGetter); 4] = [
                ("ndcg", |m| m.ndcg),
                ("lir", |m| m.lir),
                ("sep", |m| m.sep),
                ("etd", |m| m.etd),
            ];
            let mut deltas = BTreeMap::new();
            for (name, f) in named {
                let values = metric(f);
                let value = group_delta(&values, spec)?;
                let (g1, g2, _) = spec.split_values(&values);
                let (h, p) = kruskal_wallis(&g1, &g2)?;
                deltas.insert(
                    name.to_string(),
                    DeltaEntry {
                        value,
                        h,
                        p,
                        significant: p < 0.05,
                    },
                );
            }
            counts.unlabeled_users = evaluated
                .iter()
                .filter(|(u, _)| spec.label_of(*u).is_none())
                .count();
            let summarize = |index: usize| -> GroupSummary {
                let members: Vec<&MetricMeans> = evaluated
                    .iter()
                    .filter(|(u, _)| spec.group_index(*u) == Some(index))
                    .map(|(_, m)| m)
                    .collect();
                let pick = |f: fn(&MetricMeans) -> f64| {
                    mean(&members.iter().map(|m| f(m)).collect::<Vec<_>>())
                };
                GroupSummary {
                    label: [spec.labels().0, spec.labels().1][index].to_string(),
                    users: members.len(),
                    means: MetricMeans {
                        ndcg: pick(|m| m.ndcg),
                        lir: pick(|m| m.lir),
                        sep: pick(|m| m.sep),
                        etd: pick(|m| m.etd),
                        eq: pick(|m| m.eq),
                    },
                }
            };
            Some(FairnessSection {
                attribute: spec.attribute.clone(),
                groups: vec![summarize(0), summarize(1)],
                deltas,
            })
        }
    };

    let per_user = evaluated
        .iter()
        .map(|&(user, ref m)| UserRecord {
            user: graph.entity_id(user).to_string(),
            group: groups.and_then(|s| s.label_of(user)).map(str::to_string),
            ndcg: m.ndcg,
            lir: m.lir,
            sep: m.sep,
            etd: m.etd,
            eq: m.eq,
        })
        .collect();

    Ok(EvaluationReport {
        metadata,
        counts,
        global,
        fairness,
        per_user,
    })
}
