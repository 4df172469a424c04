//! Structural differences between cascade groups (dynamic clusters or
//! topics): Kruskal-Wallis tests per metric, pairwise linear-classifier
//! distinguishability and joint metric histograms.

mod joint;
mod kruskal;
mod logistic;

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

pub use joint::{
    boundary_curves, joint_histogram, pearson, write_boundaries, write_joint, Axis, Boundary,
    BoundaryCurve, JointConfig, JointHistogram,
};
pub use kruskal::{
    kruskal_wallis, kruskal_wallis_unchecked, midranks, KruskalWallis, MIN_GROUP_SIZE,
};
pub use logistic::{cross_validated_accuracy, fit_logistic, stratified_folds, LogisticModel};

use crate::error::{Error, Result};
use crate::io::MetricRow;
use crate::metrics::{Metric, MetricVector};
use crate::{parallel, seed};

/// Metric rows with a group label each.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupedTable {
    /// Sorted distinct labels; `rows[i].1` indexes into this.
    pub labels: Vec<String>,
    pub rows: Vec<(String, usize, MetricVector)>,
    /// Rows without a label.
    pub unlabeled: usize,
}

impl GroupedTable {
    pub fn new(rows: &[MetricRow], labels: &BTreeMap<String, String>) -> Result<Self> {
        let names: Vec<String> = {
            let mut v: Vec<String> = labels.values().cloned().collect();
            v.sort();
            v.dedup();
            v
        };
        let index: BTreeMap<&str, usize> = names
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        let mut unlabeled = 0;
        for r in rows {
            if !seen.insert(r.cascade_id.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate cascade_id {}",
                    r.cascade_id
                )));
            }
            match labels.get(&r.cascade_id) {
                Some(l) => out.push((r.cascade_id.clone(), index[l.as_str()], r.metrics)),
                None => unlabeled += 1,
            }
        }
        Ok(Self {
            labels: names,
            rows: out,
            unlabeled,
        })
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.labels.len()];
        for r in &self.rows {
            s[r.1] += 1;
        }
        s
    }

    fn values_by_group(&self, metric: Metric) -> Vec<Vec<f64>> {
        let mut g = vec![Vec::new(); self.labels.len()];
        for (_, l, m) in &self.rows {
            g[*l].push(metric.value(m));
        }
        g
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KwRow {
    pub metric: Metric,
    pub group_source: String,
    pub result: Option<KruskalWallis>,
    /// Groups left out for having fewer than five rows.
    pub small_groups: usize,
}

/// One test per structural metric over every group with at least five rows.
pub fn kruskal_by_metric(table: &GroupedTable, group_source: &str) -> Vec<KwRow> {
    Metric::STRUCTURAL
        .iter()
        .map(|&metric| {
            let groups = table.values_by_group(metric);
            let usable: Vec<&[f64]> = groups
                .iter()
                .filter(|g| g.len() >= MIN_GROUP_SIZE)
                .map(Vec::as_slice)
                .collect();
            let small_groups = groups.iter().filter(|g| !g.is_empty()).count() - usable.len();
            KwRow {
                metric,
                group_source: group_source.to_owned(),
                result: kruskal_wallis(&usable).ok(),
                small_groups,
            }
        })
        .collect()
}

/// `metric<TAB>group_source<TAB>H<TAB>p`; `NA` where the test was not run.
pub fn write_kw<W: Write>(w: &mut W, rows: &[KwRow]) -> Result<()> {
    writeln!(w, "metric\tgroup_source\tH\tp")?;
    for r in rows {
        match &r.result {
            Some(k) => writeln!(w, "{}\t{}\t{}\t{:e}", r.metric, r.group_source, k.h, k.p)?,
            None => writeln!(w, "{}\t{}\tNA\tNA", r.metric, r.group_source)?,
        }
    }
    Ok(())
}

pub const LOG_EPSILON: f64 = 1e-6;

/// Feature names, in [`log_features`] order.
pub const FEATURE_NAMES: [&str; 12] = [
    "ln_mass",
    "ln_length_plus_1",
    "ln_breadth",
    "ln_trend",
    "ln_fluctuation",
    "ln_branch_deviation",
    "ln_converge_deviation",
    "reciprocity",
    "self_loop_ratio",
    "ln_avg_activity",
    "ln_reciprocal_edge_count_plus_1",
    "ln_self_loop_count_plus_1",
];

/// Classifier features: heavy-tailed metrics on a log scale, the two
/// ratios linear.
pub fn log_features(m: &MetricVector) -> [f64; 12] {
    let lg = |v: f64| (v + LOG_EPSILON).ln();
    [
        (m.mass as f64).ln(),
        (m.length as f64 + 1.0).ln(),
        (m.breadth as f64).ln(),
        lg(m.trend),
        lg(m.fluctuation),
        lg(m.branch_deviation),
        lg(m.converge_deviation),
        m.reciprocity,
        m.self_loop_ratio,
        lg(m.avg_activity),
        (m.reciprocal_edge_count as f64 + 1.0).ln(),
        (m.self_loop_count as f64 + 1.0).ln(),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistinguishConfig {
    pub seed: u64,
    pub folds: usize,
    pub lambdas: Vec<f64>,
    pub min_group: usize,
}

impl Default for DistinguishConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            folds: 5,
            lambdas: vec![1e-3, 1e-2, 1e-1, 1.0, 10.0],
            min_group: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    /// Best mean held-out accuracy over the regularization grid.
    pub accuracy: Option<f64>,
    /// Rows per group after balancing.
    pub per_group: usize,
    pub dropped_features: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistinguishabilityMatrix {
    pub labels: Vec<String>,
    /// `cells[i][j]` for `i != j`; diagonal is `None`.
    pub cells: Vec<Vec<Option<PairResult>>>,
    pub insufficient: Vec<String>,
    pub warnings: Vec<String>,
}

impl DistinguishabilityMatrix {
    pub fn accuracy(&self, i: usize, j: usize) -> Option<f64> {
        self.cells[i][j].as_ref().and_then(|c| c.accuracy)
    }

    /// Mean accuracy over the evaluated off-diagonal pairs.
    pub fn mean_accuracy(&self) -> Option<f64> {
        let v: Vec<f64> = (0..self.labels.len())
            .flat_map(|i| (i + 1..self.labels.len()).map(move |j| (i, j)))
            .filter_map(|(i, j)| self.accuracy(i, j))
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Best cross-validated accuracy of a logistic classifier separating two
/// equally sized feature sets.
pub fn distinguish_pair(
    a: &[[f64; 12]],
    b: &[[f64; 12]],
    cfg: &DistinguishConfig,
    pair_seed: u64,
) -> Result<PairResult> {
    let n = a.len().min(b.len());
    let mut rng = seed::rng(pair_seed, "balance", 0);
    let pick = |rows: &[[f64; 12]], rng: &mut _| -> Vec<[f64; 12]> {
        if rows.len() == n {
            rows.to_vec()
        } else {
            let mut idx = sample(rng, rows.len(), n).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| rows[i]).collect()
        }
    };
    let sa = pick(a, &mut rng);
    let sb = pick(b, &mut rng);
    let all: Vec<&[f64; 12]> = sa.iter().chain(&sb).collect();
    let keep: Vec<usize> = (0..12)
        .filter(|&j| all.iter().any(|r| r[j] != all[0][j]))
        .collect();
    let dropped_features = (0..12)
        .filter(|j| !keep.contains(j))
        .map(|j| FEATURE_NAMES[j].to_owned())
        .collect();
    if keep.is_empty() {
        return Ok(PairResult {
            accuracy: Some(0.5),
            per_group: n,
            dropped_features,
        });
    }
    let x: Vec<Vec<f64>> = all
        .iter()
        .map(|r| keep.iter().map(|&j| r[j]).collect())
        .collect();
    let y: Vec<bool> = (0..2 * n).map(|i| i >= n).collect();
    let fold = stratified_folds(&y, cfg.folds, &mut seed::rng(pair_seed, "folds", 0));
    let mut best = f64::NEG_INFINITY;
    for &lambda in &cfg.lambdas {
        best = best.max(cross_validated_accuracy(&x, &y, &fold, cfg.folds, lambda)?);
    }
    Ok(PairResult {
        accuracy: Some(best),
        per_group: n,
        dropped_features,
    })
}

/// Symmetric matrix of pairwise distinguishability between all groups.
pub fn pairwise_distinguishability(
    table: &GroupedTable,
    cfg: &DistinguishConfig,
) -> Result<DistinguishabilityMatrix> {
    if cfg.folds < 2 {
        return Err(Error::InvalidParameter("need at least 2 folds".into()));
    }
    if cfg.lambdas.is_empty() {
        return Err(Error::InvalidParameter("empty regularization grid".into()));
    }
    let g = table.labels.len();
    let mut features: Vec<Vec<[f64; 12]>> = vec![Vec::new(); g];
    for (_, l, m) in &table.rows {
        features[*l].push(log_features(m));
    }
    let insufficient: Vec<String> = (0..g)
        .filter(|&i| features[i].len() < cfg.min_group)
        .map(|i| table.labels[i].clone())
        .collect();
    let pairs: Vec<(usize, usize)> = (0..g)
        .flat_map(|i| (i + 1..g).map(move |j| (i, j)))
        .collect();
    let results = parallel::map(&pairs, |&(i, j)| -> Result<PairResult> {
        if features[i].len() < cfg.min_group || features[j].len() < cfg.min_group {
            return Ok(PairResult {
                accuracy: None,
                per_group: features[i].len().min(features[j].len()),
                dropped_features: Vec::new(),
            });
        }
        let pair_seed = seed::derive(cfg.seed, "distinguish", (i * g + j) as u64);
        distinguish_pair(&features[i], &features[j], cfg, pair_seed)
    });
    let mut cells = vec![vec![None; g]; g];
    let mut warnings = Vec::new();
    for (&(i, j), r) in pairs.iter().zip(results) {
        let r = r?;
        if !r.dropped_features.is_empty() {
            warnings.push(format!(
                "{} vs {}: dropped zero-variance features {}",
                table.labels[i],
                table.labels[j],
                r.dropped_features.join(",")
            ));
        }
        cells[j][i] = Some(r.clone());
        cells[i][j] = Some(r);
    }
    Ok(DistinguishabilityMatrix {
        labels: table.labels.clone(),
        cells,
        insufficient,
        warnings,
    })
}

/// Square matrix TSV: `-` on the diagonal, `NA` for insufficient pairs.
pub fn write_distinguishability<W: Write>(w: &mut W, m: &DistinguishabilityMatrix) -> Result<()> {
    write!(w, "group")?;
    for l in &m.labels {
        write!(w, "\t{l}")?;
    }
    writeln!(w)?;
    for (i, l) in m.labels.iter().enumerate() {
        write!(w, "{l}")?;
        for j in 0..m.labels.len() {
            match (i == j, m.accuracy(i, j)) {
                (true, _) => write!(w, "\t-")?,
                (false, Some(a)) => write!(w, "\t{a}")?,
                (false, None) => write!(w, "\tNA")?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Long-form pairs: `group_a<TAB>group_b<TAB>accuracy<TAB>per_group`.
pub fn write_distinguishability_pairs<W: Write>(
    w: &mut W,
    m: &DistinguishabilityMatrix,
) -> Result<()> {
    writeln!(w, "group_a\tgroup_b\taccuracy\tper_group")?;
    for i in 0..m.labels.len() {
        for j in i + 1..m.labels.len() {
            let Some(c) = &m.cells[i][j] else { continue };
            let acc = c
                .accuracy
                .map_or_else(|| "NA".to_owned(), |a| a.to_string());
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                m.labels[i], m.labels[j], acc, c.per_group
            )?;
        }
    }
    Ok(())
}
