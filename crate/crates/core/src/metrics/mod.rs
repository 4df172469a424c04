//! Structural metrics of a single cascade.
//!
//! The metric vector groups four families:
//!
//! - size: mass `N` (unique users), length `L` (largest depth) and breadth
//!   `B` (largest node count at one depth);
//! - silhouette: trend (mean pairwise shortest distance on the undirected
//!   view, i.e. the Wiener index) and fluctuation (coefficient of variation
//!   of the breadth-by-depth histogram);
//! - direction: branch and converge deviation (coefficient of variation of
//!   out- and in-degrees), reciprocity, self-loop ratio;
//! - activity: retweets per unique user.
//!
//! Every coefficient of variation here uses the sample standard deviation
//! (`n - 1` denominator).

mod direction;
mod wiener;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cascade::{compute_depths, CascadeGraph, DepthAssignment};
use crate::error::Error;
use crate::parallel;
use crate::seed;

pub use direction::{
    branch_deviation, converge_deviation, direction_flags, in_degrees, out_degrees,
    reciprocal_edge_count, reciprocity, self_loop_count, self_loop_ratio, DirectionFlags,
};
pub use wiener::{wiener_exact, wiener_sampled, wiener_trend, Trend};

/// Sample coefficient of variation. Zero for fewer than two values or a
/// zero mean.
pub fn coefficient_of_variation(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if mean == 0.0 {
        return 0.0;
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1) as f64).sqrt() / mean
}

/// Breadth histogram along the depth axis, `B(0) = 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Silhouette {
    pub breadth_by_depth: Vec<u64>,
}

impl Silhouette {
    pub fn from_depths(d: &DepthAssignment) -> Self {
        Self {
            breadth_by_depth: d.breadth_by_depth(),
        }
    }

    pub fn length(&self) -> usize {
        self.breadth_by_depth.len() - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fluctuation {
    pub value: f64,
    pub degenerate: bool,
}

pub fn silhouette_fluctuation(s: &Silhouette) -> Fluctuation {
    if s.length() == 0 {
        return Fluctuation {
            value: 0.0,
            degenerate: true,
        };
    }
    let values: Vec<f64> = s.breadth_by_depth.iter().map(|&b| b as f64).collect();
    Fluctuation {
        value: coefficient_of_variation(&values),
        degenerate: false,
    }
}

/// `(mass, length, breadth)`.
pub fn size_metrics(c: &CascadeGraph, d: &DepthAssignment) -> (u64, u64, u64) {
    let breadth = d.breadth_by_depth().into_iter().max().unwrap_or(1);
    (c.node_count() as u64, u64::from(d.length()), breadth)
}

/// Retweets per unique user; with `include_original_post` the original post
/// is counted as well.
pub fn average_activity(c: &CascadeGraph, include_original_post: bool) -> f64 {
    let posts = if include_original_post {
        c.post_count()
    } else {
        c.retweet_count()
    };
    posts as f64 / c.node_count() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    /// Largest component size for which the trend is computed exactly.
    pub exact_threshold: usize,
    /// BFS sources used above `exact_threshold`.
    pub sample_sources: usize,
    pub seed: u64,
    pub include_original_post: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            exact_threshold: 10_000,
            sample_sources: 1_000,
            seed: 0,
            include_original_post: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub mass: u64,
    pub length: u64,
    pub breadth: u64,
    pub trend: f64,
    pub fluctuation: f64,
    pub branch_deviation: f64,
    pub converge_deviation: f64,
    pub reciprocity: f64,
    pub self_loop_ratio: f64,
    pub avg_activity: f64,
    pub reciprocal_edge_count: u64,
    pub self_loop_count: u64,
    pub post_count: u64,
    pub flags: DirectionFlags,
}

pub fn metric_vector(c: &CascadeGraph, cfg: &MetricConfig) -> MetricVector {
    let depths = compute_depths(c);
    let (mass, length, breadth) = size_metrics(c, &depths);
    let trend_seed = seed::derive(cfg.seed, "wiener", seed::fnv1a(c.cascade_id().as_bytes()));
    let trend = wiener_trend(c, cfg.exact_threshold, cfg.sample_sources, trend_seed);
    let silhouette = Silhouette::from_depths(&depths);
    MetricVector {
        mass,
        length,
        breadth,
        trend: trend.value,
        fluctuation: silhouette_fluctuation(&silhouette).value,
        branch_deviation: branch_deviation(c),
        converge_deviation: converge_deviation(c),
        reciprocity: reciprocity(c),
        self_loop_ratio: self_loop_ratio(c),
        avg_activity: average_activity(c, cfg.include_original_post),
        reciprocal_edge_count: reciprocal_edge_count(c),
        self_loop_count: self_loop_count(c),
        post_count: c.post_count(),
        flags: direction_flags(c),
    }
}

/// Metric vectors for a whole corpus, in input order.
pub fn corpus_metrics(cascades: &[CascadeGraph], cfg: &MetricConfig) -> Vec<MetricVector> {
    parallel::map(cascades, |c| metric_vector(c, cfg))
}

/// One numeric column of the metric table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mass,
    Length,
    Breadth,
    Trend,
    Fluctuation,
    BranchDeviation,
    ConvergeDeviation,
    Reciprocity,
    SelfLoopRatio,
    AvgActivity,
    ReciprocalEdgeCount,
    SelfLoopCount,
    PostCount,
}

impl Metric {
    /// Table column order.
    pub const ALL: [Metric; 13] = [
        Metric::Mass,
        Metric::Length,
        Metric::Breadth,
        Metric::Trend,
        Metric::Fluctuation,
        Metric::BranchDeviation,
        Metric::ConvergeDeviation,
        Metric::Reciprocity,
        Metric::SelfLoopRatio,
        Metric::AvgActivity,
        Metric::ReciprocalEdgeCount,
        Metric::SelfLoopCount,
        Metric::PostCount,
    ];

    /// The twelve structural metrics (post count is bookkeeping).
    pub const STRUCTURAL: [Metric; 12] = [
        Metric::Mass,
        Metric::Length,
        Metric::Breadth,
        Metric::Trend,
        Metric::Fluctuation,
        Metric::BranchDeviation,
        Metric::ConvergeDeviation,
        Metric::Reciprocity,
        Metric::SelfLoopRatio,
        Metric::AvgActivity,
        Metric::ReciprocalEdgeCount,
        Metric::SelfLoopCount,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Mass => "mass",
            Metric::Length => "length",
            Metric::Breadth => "breadth",
            Metric::Trend => "trend",
            Metric::Fluctuation => "fluctuation",
            Metric::BranchDeviation => "branch_deviation",
            Metric::ConvergeDeviation => "converge_deviation",
            Metric::Reciprocity => "reciprocity",
            Metric::SelfLoopRatio => "self_loop_ratio",
            Metric::AvgActivity => "avg_activity",
            Metric::ReciprocalEdgeCount => "reciprocal_edge_count",
            Metric::SelfLoopCount => "self_loop_count",
            Metric::PostCount => "post_count",
        }
    }

    pub fn value(self, m: &MetricVector) -> f64 {
        match self {
            Metric::Mass => m.mass as f64,
            Metric::Length => m.length as f64,
            Metric::Breadth => m.breadth as f64,
            Metric::Trend => m.trend,
            Metric::Fluctuation => m.fluctuation,
            Metric::BranchDeviation => m.branch_deviation,
            Metric::ConvergeDeviation => m.converge_deviation,
            Metric::Reciprocity => m.reciprocity,
            Metric::SelfLoopRatio => m.self_loop_ratio,
            Metric::AvgActivity => m.avg_activity,
            Metric::ReciprocalEdgeCount => m.reciprocal_edge_count as f64,
            Metric::SelfLoopCount => m.self_loop_count as f64,
            Metric::PostCount => m.post_count as f64,
        }
    }

    /// Bounded ratios, plotted and classified on a linear scale.
    pub fn is_ratio(self) -> bool {
        matches!(self, Metric::Reciprocity | Metric::SelfLoopRatio)
    }

    pub fn is_integer(self) -> bool {
        matches!(
            self,
            Metric::Mass
                | Metric::Length
                | Metric::Breadth
                | Metric::ReciprocalEdgeCount
                | Metric::SelfLoopCount
                | Metric::PostCount
        )
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .or(match key.as_str() {
                "n" => Some(Metric::Mass),
                "branch" => Some(Metric::BranchDeviation),
                "converge" => Some(Metric::ConvergeDeviation),
                "wiener" => Some(Metric::Trend),
                _ => None,
            })
            .ok_or_else(|| Error::UnknownMetric(s.to_owned()))
    }
}

/// Corpus counts for every direction-flag combination (all eight keys are
/// always present).
pub fn venn_tally<'a, I>(flags: I) -> BTreeMap<String, u64>
where
    I: IntoIterator<Item = &'a DirectionFlags>,
{
    let mut tally: BTreeMap<String, u64> = DirectionFlags::all_combinations()
        .iter()
        .map(|f| (f.combination_key(), 0))
        .collect();
    for f in flags {
        *tally.entry(f.combination_key()).or_insert(0) += 1;
    }
    tally
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{build_cascades, Edge, RetweetEvent};

    fn graph(edges: &[(&str, &str)]) -> CascadeGraph {
        let root = edges.first().map_or("r", |e| e.0);
        let mut events = vec![RetweetEvent::original("1", "root", root, 0)];
        for (i, (s, t)) in edges.iter().enumerate() {
            events.push(RetweetEvent::retweet(
                "1",
                &format!("p{i}"),
                t,
                s,
                i as i64 + 1,
            ));
        }
        build_cascades(events).cascades.remove(0)
    }

    fn star(n: usize) -> CascadeGraph {
        let leaves: Vec<String> = (1..n).map(|i| format!("l{i}")).collect();
        let edges: Vec<(&str, &str)> = leaves.iter().map(|l| ("r", l.as_str())).collect();
        graph(&edges)
    }

    #[test]
    fn cv_matches_hand_computation() {
        // [1, 0]: mean 0.5, sample sd sqrt(0.5)
        let cv = coefficient_of_variation(&[1.0, 0.0]);
        assert!((cv - 0.5f64.sqrt() / 0.5).abs() < 1e-15);
        assert_eq!(coefficient_of_variation(&[3.0, 3.0, 3.0]), 0.0);
        assert_eq!(coefficient_of_variation(&[2.0]), 0.0);
        assert_eq!(coefficient_of_variation(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn size_of_star_and_chain() {
        let s = star(10);
        assert_eq!(size_metrics(&s, &compute_depths(&s)), (10, 1, 9));
        let c = graph(&[("a", "b"), ("b", "c"), ("c", "d"), ("d", "e")]);
        assert_eq!(size_metrics(&c, &compute_depths(&c)), (5, 4, 1));
    }

    #[test]
    fn fluctuation_examples() {
        let s = Silhouette {
            breadth_by_depth: vec![1, 3],
        };
        let f = silhouette_fluctuation(&s);
        assert!((f.value - 2f64.sqrt() * 0.5).abs() < 1e-12);
        let chain = Silhouette {
            breadth_by_depth: vec![1, 1, 1, 1],
        };
        assert_eq!(silhouette_fluctuation(&chain).value, 0.0);
        let swc = Silhouette {
            breadth_by_depth: vec![1, 7, 1, 1],
        };
        assert!((silhouette_fluctuation(&swc).value - 1.2).abs() < 1e-12);
        let single = Silhouette {
            breadth_by_depth: vec![1],
        };
        let f = silhouette_fluctuation(&single);
        assert!(f.degenerate);
        assert_eq!(f.value, 0.0);
    }

    #[test]
    fn average_activity_examples() {
        let c = graph(&[("a", "b"), ("a", "b")]);
        assert_eq!(average_activity(&c, false), 1.0);
        assert_eq!(average_activity(&c, true), 1.5);
        let s = star(8);
        assert!((average_activity(&s, false) - 7.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn heavy_repeat_activity() {
        // 1,535 users making 252,878 retweets
        let n = 1_535u32;
        let users: Vec<String> = (0..n).map(|i| format!("u{i}")).collect();
        let mut edges: Vec<Edge> = (1..n)
            .map(|t| Edge {
                source: 0,
                target: t,
                weight: 164,
            })
            .collect();
        let assigned: u32 = edges.iter().map(|e| e.weight).sum();
        edges[0].weight += 252_878 - assigned;
        let c = CascadeGraph::new("big", users, vec![0; n as usize], edges).unwrap();
        let v = average_activity(&c, false);
        assert!((v - 252_878.0 / 1_535.0).abs() < 1e-12);
        assert_eq!(v.round(), 165.0);
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert_eq!("branch".parse::<Metric>().unwrap(), Metric::BranchDeviation);
        assert!("bogus".parse::<Metric>().is_err());
    }

    #[test]
    fn metric_vector_is_deterministic() {
        let c = graph(&[("a", "b"), ("b", "a"), ("a", "c"), ("c", "c"), ("b", "d")]);
        let cfg = MetricConfig::default();
        let m1 = metric_vector(&c, &cfg);
        let m2 = metric_vector(&c, &cfg);
        assert_eq!(format!("{m1:?}"), format!("{m2:?}"));
        assert_eq!(m1.mass, 4);
        assert!(m1.flags.has_reciprocal && m1.flags.has_self_loop);
    }

    #[test]
    fn venn_has_all_keys() {
        let tree = DirectionFlags::default();
        let t = venn_tally([&tree, &tree]);
        assert_eq!(t.len(), 8);
        assert_eq!(t["none"], 2);
        assert_eq!(t["converge+reciprocal+self_loop"], 0);
    }
}
