//! Growth-curve normalization and K-Means clustering of cascade dynamics.
//!
//! A growth series is stretched over the unit interval (relative position
//! within the lifetime), rebinned onto a fixed grid without losing mass and
//! divided by its maximum (shape). Series are then clustered with Lloyd's
//! algorithm under Euclidean distance.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::{growth_series, CascadeGraph, GrowthSeries};
use crate::error::{Error, Result};
use crate::{parallel, seed};

pub const DEFAULT_GRID_SIZE: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedSeries {
    pub cascade_id: String,
    pub values: Vec<f64>,
}

/// Spreads `counts` uniformly over `[0, 1]` and integrates them onto
/// `grid_size` equal cells. Total mass is preserved.
pub fn rebin(counts: &[f64], grid_size: usize) -> Vec<f64> {
    let m = counts.len();
    if m == grid_size {
        return counts.to_vec();
    }
    // in units of 1/(m * grid): bucket j spans [j*grid, (j+1)*grid),
    // cell g spans [g*m, (g+1)*m)
    let (m64, g64) = (m as u64, grid_size as u64);
    let mut out = vec![0.0; grid_size];
    let (mut j, mut g) = (0usize, 0usize);
    while j < m && g < grid_size {
        let (j0, j1) = (j as u64 * g64, (j as u64 + 1) * g64);
        let (g0, g1) = (g as u64 * m64, (g as u64 + 1) * m64);
        let overlap = j1.min(g1) - j0.max(g0);
        out[g] += counts[j] * overlap as f64 / g64 as f64;
        if j1 <= g1 {
            j += 1;
        }
        if g1 <= j1 {
            g += 1;
        }
    }
    out
}

/// Divides by the maximum. All-zero input is returned unchanged.
pub fn max_scale(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        values.iter().map(|v| v / max).collect()
    } else {
        values.to_vec()
    }
}

/// Rebin then max-scale arbitrary non-negative values.
pub fn normalize_values(values: &[f64], grid_size: usize) -> Result<Vec<f64>> {
    if grid_size == 0 {
        return Err(Error::InvalidParameter("grid_size must be positive".into()));
    }
    if values.is_empty() {
        return Err(Error::DegenerateSeries("empty series".into()));
    }
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidParameter(
            "series values must be finite and non-negative".into(),
        ));
    }
    if !values.iter().any(|&v| v > 0.0) {
        return Err(Error::DegenerateSeries("all-zero series".into()));
    }
    Ok(max_scale(&rebin(values, grid_size)))
}

pub fn normalize(series: &GrowthSeries, grid_size: usize) -> Result<NormalizedSeries> {
    if series.degenerate || series.lifetime <= 0 {
        return Err(Error::DegenerateSeries(format!(
            "cascade {}: zero lifetime",
            series.cascade_id
        )));
    }
    let counts: Vec<f64> = series.counts.iter().map(|&c| c as f64).collect();
    let values = normalize_values(&counts, grid_size).map_err(|e| match e {
        Error::DegenerateSeries(m) => {
            Error::DegenerateSeries(format!("cascade {}: {m}", series.cascade_id))
        }
        other => other,
    })?;
    Ok(NormalizedSeries {
        cascade_id: series.cascade_id.clone(),
        values,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesConfig {
    pub time_unit: i64,
    pub grid_size: usize,
    /// Cascades below this mass are skipped.
    pub min_mass: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            time_unit: 60,
            grid_size: DEFAULT_GRID_SIZE,
            min_mass: 100,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SeriesSet {
    pub series: Vec<NormalizedSeries>,
    /// `(cascade_id, reason)` of cascades left out.
    pub skipped: Vec<(String, String)>,
}

/// Normalized growth curves of every cascade passing the mass filter.
pub fn corpus_series(cascades: &[CascadeGraph], cfg: &SeriesConfig) -> Result<SeriesSet> {
    if cfg.time_unit <= 0 {
        return Err(Error::InvalidParameter("time_unit must be positive".into()));
    }
    let results = parallel::map(cascades, |c| {
        if c.node_count() < cfg.min_mass {
            return Err(format!("mass {} below {}", c.node_count(), cfg.min_mass));
        }
        growth_series(c, cfg.time_unit)
            .and_then(|s| normalize(&s, cfg.grid_size))
            .map_err(|e| e.to_string())
    });
    let mut set = SeriesSet::default();
    for (c, r) in cascades.iter().zip(results) {
        match r {
            Ok(s) => set.series.push(s),
            Err(reason) => set.skipped.push((c.cascade_id().to_owned(), reason)),
        }
    }
    Ok(set)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub n_init: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 9,
            seed: 0,
            max_iter: 300,
            n_init: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub seed: u64,
    pub centroids: Vec<Vec<f64>>,
    /// Cluster of `ids[i]`.
    pub assignments: Vec<usize>,
    pub ids: Vec<String>,
    pub inertia: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Inertia after every assignment step, one trace per restart.
    pub inertia_traces: Vec<Vec<f64>>,
}

impl ClusterModel {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &a in &self.assignments {
            s[a] += 1;
        }
        s
    }

    pub fn assignment_map(&self) -> BTreeMap<&str, usize> {
        self.ids
            .iter()
            .map(String::as_str)
            .zip(self.assignments.iter().copied())
            .collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn plus_plus(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            d2.iter()
                .position(|&d| {
                    acc += d;
                    acc > target
                })
                .unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].to_vec();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

struct Run {
    centroids: Vec<Vec<f64>>,
    assignments: Vec<usize>,
    inertia: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn lloyd(points: &[&[f64]], k: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> Run {
    let dim = points[0].len();
    let mut centroids = plus_plus(points, k, rng);
    let mut assignments: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    loop {
        let nearest_all = parallel::map(points, |p| nearest(p, &centroids));
        let mut next: Vec<usize> = nearest_all.iter().map(|r| r.0).collect();
        let mut dists: Vec<f64> = nearest_all.iter().map(|r| r.1).collect();

        // an empty cluster takes over the point farthest from its centroid
        let mut sizes = vec![0usize; k];
        for &a in &next {
            sizes[a] += 1;
        }
        for empty in 0..k {
            if sizes[empty] > 0 {
                continue;
            }
            let far = (0..points.len())
                .filter(|&i| sizes[next[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
            if let Some(i) = far {
                sizes[next[i]] -= 1;
                next[i] = empty;
                sizes[empty] = 1;
                dists[i] = 0.0;
                centroids[empty] = points[i].to_vec();
            }
        }
        trace.push(dists.iter().sum());

        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
        if iterations == max_iter {
            break;
        }
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        for (p, &a) in points.iter().zip(&assignments) {
            for (s, v) in sums[a].iter_mut().zip(p.iter()) {
                *s += v;
            }
        }
        for (c, (s, &size)) in centroids.iter_mut().zip(sums.iter().zip(&sizes)) {
            if size > 0 {
                *c = s.iter().map(|v| v / size as f64).collect();
            }
        }
    }
    Run {
        centroids,
        inertia: *trace.last().unwrap(),
        assignments,
        iterations,
        converged,
        trace,
    }
}

/// K-Means with k-means++ seeding and `n_init` seeded restarts; the run with
/// the lowest inertia is kept. Points are processed in a canonical order
/// (lexicographic by value) and clusters are numbered by first appearance
/// in that order, so the result does not depend on input order.
pub fn kmeans(series: &[NormalizedSeries], cfg: &KMeansConfig) -> Result<ClusterModel> {
    let n = series.len();
    if cfg.k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if cfg.k > n {
        return Err(Error::InvalidParameter(format!(
            "k = {} exceeds the number of series ({n})",
            cfg.k
        )));
    }
    if cfg.n_init == 0 {
        return Err(Error::InvalidParameter("n_init must be at least 1".into()));
    }
    let dim = series[0].values.len();
    if dim == 0 || series.iter().any(|s| s.values.len() != dim) {
        return Err(Error::InvalidParameter(
            "series must be non-empty and of equal length".into(),
        ));
    }
    if series
        .iter()
        .flat_map(|s| &s.values)
        .any(|v| !v.is_finite())
    {
        return Err(Error::InvalidParameter("non-finite series value".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&series[a].values, &series[b].values);
        x.iter()
            .zip(y)
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let points: Vec<&[f64]> = order.iter().map(|&i| series[i].values.as_slice()).collect();

    let runs: Vec<Run> = (0..cfg.n_init)
        .map(|r| {
            lloyd(
                &points,
                cfg.k,
                cfg.max_iter,
                &mut seed::rng(cfg.seed, "kmeans", r as u64),
            )
        })
        .collect();
    let traces: Vec<Vec<f64>> = runs.iter().map(|r| r.trace.clone()).collect();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.inertia < a.inertia { b } else { a })
        .unwrap();

    let mut relabel = vec![usize::MAX; cfg.k];
    let mut next = 0;
    for &a in &best.assignments {
        if relabel[a] == usize::MAX {
            relabel[a] = next;
            next += 1;
        }
    }
    for r in relabel.iter_mut().filter(|r| **r == usize::MAX) {
        *r = next;
        next += 1;
    }
    let mut centroids = vec![Vec::new(); cfg.k];
    for (old, c) in best.centroids.into_iter().enumerate() {
        centroids[relabel[old]] = c;
    }
    let mut assignments = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignments[i] = relabel[best.assignments[pos]];
    }
    Ok(ClusterModel {
        k: cfg.k,
        seed: cfg.seed,
        centroids,
        assignments,
        ids: series.iter().map(|s| s.cascade_id.clone()).collect(),
        inertia: best.inertia,
        iterations: best.iterations,
        converged: best.converged,
        inertia_traces: traces,
    })
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidParameter("labelings differ in length".into()));
    }
    let n = a.len();
    let comb2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| comb2(c)).sum();
    let sa: f64 = rows.values().map(|&c| comb2(c)).sum();
    let sb: f64 = cols.values().map(|&c| comb2(c)).sum();
    let total = comb2(n as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sa * sb / total;
    let max = (sa + sb) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub k: usize,
    pub seed: u64,
    pub inertia: f64,
    pub centroids: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
}

impl From<&ClusterModel> for ClusterReport {
    fn from(m: &ClusterModel) -> Self {
        Self {
            k: m.k,
            seed: m.seed,
            inertia: m.inertia,
            centroids: m.centroids.clone(),
            sizes: m.sizes(),
        }
    }
}

/// `cascade_id<TAB>cluster`, with a header.
pub fn write_assignments<W: Write>(w: &mut W, m: &ClusterModel) -> Result<()> {
    writeln!(w, "cascade_id\tcluster")?;
    for (id, a) in m.ids.iter().zip(&m.assignments) {
        writeln!(w, "{id}\t{a}")?;
    }
    Ok(())
}
