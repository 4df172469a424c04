use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricVector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointConfig {
    pub bins_per_decade: u32,
    /// Bin count of linear (ratio) axes.
    pub linear_bins: usize,
}

impl Default for JointConfig {
    fn default() -> Self {
        Self {
            bins_per_decade: 10,
            linear_bins: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub metric: Metric,
    pub log: bool,
    pub edges: Vec<f64>,
}

impl Axis {
    fn build(metric: Metric, values: &[f64], cfg: &JointConfig) -> Result<Self> {
        let log = !metric.is_ratio();
        let usable = values.iter().copied().filter(|&v| !log || v > 0.0);
        let (lo, hi) = usable.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
        if !lo.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "no usable values for {metric}"
            )));
        }
        let edges = if log {
            let bpd = f64::from(cfg.bins_per_decade.max(1));
            let mut e = vec![lo];
            let mut i = 0;
            loop {
                i += 1;
                let x = lo * 10f64.powf(f64::from(i) / bpd);
                e.push(x);
                if x > hi {
                    break;
                }
            }
            e
        } else if hi > lo {
            let n = cfg.linear_bins.max(1);
            let w = (hi - lo) / n as f64;
            let mut e: Vec<f64> = (0..=n).map(|i| lo + w * i as f64).collect();
            // the maximum belongs to the last bin
            *e.last_mut().unwrap() = hi + w * 1e-9;
            e
        } else {
            vec![lo - 0.5, lo + 0.5]
        };
        Ok(Self { metric, log, edges })
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges
            .windows(2)
            .map(|w| {
                if self.log {
                    (w[0] * w[1]).sqrt()
                } else {
                    (w[0] + w[1]) / 2.0
                }
            })
            .collect()
    }

    fn locate(&self, v: f64) -> Option<usize> {
        if (self.log && v <= 0.0) || v < self.edges[0] || v.is_nan() {
            return None;
        }
        let k = self.edges.partition_point(|&e| e <= v);
        Some((k.max(1) - 1).min(self.bins() - 1))
    }
}

/// 2-D histogram of two metrics; log axes except for bounded ratios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointHistogram {
    pub x: Axis,
    pub y: Axis,
    /// `counts[i][j]`: x bin `i`, y bin `j`.
    pub counts: Vec<Vec<u64>>,
    pub used: usize,
    /// Rows with a non-positive value on a log axis.
    pub skipped: usize,
}

impl JointHistogram {
    /// Count over `(used * width_x * width_y)`.
    pub fn density(&self, i: usize, j: usize) -> f64 {
        let wx = self.x.edges[i + 1] - self.x.edges[i];
        let wy = self.y.edges[j + 1] - self.y.edges[j];
        self.counts[i][j] as f64 / (self.used as f64 * wx * wy)
    }
}

pub fn joint_histogram(
    rows: &[MetricVector],
    mx: Metric,
    my: Metric,
    cfg: &JointConfig,
) -> Result<JointHistogram> {
    let xs: Vec<f64> = rows.iter().map(|m| mx.value(m)).collect();
    let ys: Vec<f64> = rows.iter().map(|m| my.value(m)).collect();
    let x = Axis::build(mx, &xs, cfg)?;
    let y = Axis::build(my, &ys, cfg)?;
    let mut counts = vec![vec![0u64; y.bins()]; x.bins()];
    let (mut used, mut skipped) = (0, 0);
    for (&a, &b) in xs.iter().zip(&ys) {
        match (x.locate(a), y.locate(b)) {
            (Some(i), Some(j)) => {
                counts[i][j] += 1;
                used += 1;
            }
            _ => skipped += 1,
        }
    }
    if used == 0 {
        return Err(Error::InvalidParameter("no rows inside both axes".into()));
    }
    Ok(JointHistogram {
        x,
        y,
        counts,
        used,
        skipped,
    })
}

/// `x_center<TAB>y_center<TAB>density` for every cell.
pub fn write_joint<W: Write>(w: &mut W, h: &JointHistogram) -> Result<()> {
    writeln!(w, "x_center\ty_center\tdensity")?;
    let (cx, cy) = (h.x.centers(), h.y.centers());
    for (i, x) in cx.iter().enumerate() {
        for (j, y) in cy.iter().enumerate() {
            writeln!(w, "{x}\t{y}\t{}", h.density(i, j))?;
        }
    }
    Ok(())
}

/// Analytic curves of canonical shapes as functions of mass.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Star trend `2 - 2/N`, the lowest trend at a given mass.
    Floor,
    /// Chain trend `(N + 1)/3`, the highest trend at a given mass.
    Ceiling,
    /// Star fluctuation `sqrt(2)(1 - 2/N)`.
    StarFluctuation,
    /// Star branch deviation `sqrt(N)`.
    StarBranch,
}

impl Boundary {
    pub fn name(self) -> &'static str {
        match self {
            Boundary::Floor => "floor",
            Boundary::Ceiling => "ceiling",
            Boundary::StarFluctuation => "star_fluctuation",
            Boundary::StarBranch => "star_branch",
        }
    }

    pub fn eval(self, n: f64) -> f64 {
        match self {
            Boundary::Floor => 2.0 - 2.0 / n,
            Boundary::Ceiling => (n + 1.0) / 3.0,
            Boundary::StarFluctuation => 2f64.sqrt() * (1.0 - 2.0 / n),
            Boundary::StarBranch => n.sqrt(),
        }
    }

    /// Curves drawn on a `(mx, my)` plot.
    pub fn for_axes(mx: Metric, my: Metric) -> Vec<Boundary> {
        match (mx, my) {
            (Metric::Mass, Metric::Trend) => vec![Boundary::Floor, Boundary::Ceiling],
            (Metric::Mass, Metric::Fluctuation) => vec![Boundary::StarFluctuation],
            (Metric::Mass, Metric::BranchDeviation) => vec![Boundary::StarBranch],
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub boundary: Boundary,
    pub points: Vec<(f64, f64)>,
}

/// Boundary curves for the axes of `h`, evaluated at integer masses across
/// the x range (at most ~200 geometrically spaced masses).
pub fn boundary_curves(h: &JointHistogram) -> Vec<BoundaryCurve> {
    let lo = h.x.edges[0].ceil().max(2.0);
    let hi = h.x.edges[h.x.bins()].floor();
    let mut masses: Vec<f64> = Vec::new();
    if hi >= lo {
        for k in 0..=200 {
            let m = (lo * (hi / lo).powf(f64::from(k) / 200.0))
                .round()
                .clamp(lo, hi);
            if masses.last() != Some(&m) {
                masses.push(m);
            }
        }
    }
    Boundary::for_axes(h.x.metric, h.y.metric)
        .into_iter()
        .map(|b| BoundaryCurve {
            boundary: b,
            points: masses.iter().map(|&n| (n, b.eval(n))).collect(),
        })
        .collect()
}

/// `curve<TAB>x<TAB>y`.
pub fn write_boundaries<W: Write>(w: &mut W, curves: &[BoundaryCurve]) -> Result<()> {
    writeln!(w, "curve\tx\ty")?;
    for c in curves {
        for (x, y) in &c.points {
            writeln!(w, "{}\t{x}\t{y}", c.boundary.name())?;
        }
    }
    Ok(())
}

/// Pearson correlation; 0 when either side is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}
