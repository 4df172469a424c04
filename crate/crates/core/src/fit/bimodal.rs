//! The bimodal law `f(x) = c1 (x + x0)^-alpha + c2 exp(-lambda x^beta)`:
//! a shifted power law mixed with a stretched exponential.

use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt_weighted, Bounds, LmConfig, Model};
use super::pdf::BinnedPdf;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BimodalParams {
    pub c1: f64,
    pub x0: f64,
    pub alpha: f64,
    pub c2: f64,
    pub lambda: f64,
    pub beta: f64,
}

impl BimodalParams {
    /// Reference parameters fitted to the heavy-tailed metrics of a large
    /// microblog corpus, by metric name.
    pub fn preset(name: &str) -> Option<Self> {
        let p = |c1, x0, alpha, c2, lambda, beta| BimodalParams {
            c1,
            x0,
            alpha,
            c2,
            lambda,
            beta,
        };
        Some(match name {
            "mass" | "breadth" => p(2.10, 2.29e-6, 1.99, 1.46e-3, 0.06, 0.63),
            "length" => p(5.0, 1.70e-7, 4.60, 0.11, 0.50, 1.05),
            "trend" => p(21.0, 0.10, 6.43, 0.20, 0.80, 1.15),
            "reciprocal_edge_count" => p(0.30, 0.01, 2.64, 2.4e-4, 0.28, 0.59),
            "self_loop_count" => p(3.5e-2, 0.01, 2.47, 0.0, 0.0, 1.0),
            "avg_activity" => p(0.79, 0.50, 3.46, 0.0, 0.0, 1.0),
            _ => return None,
        })
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![
            self.c1,
            self.x0,
            self.alpha,
            self.c2,
            self.lambda,
            self.beta,
        ]
    }

    pub fn from_slice(p: &[f64]) -> Self {
        Self {
            c1: p[0],
            x0: p[1],
            alpha: p[2],
            c2: p[3],
            lambda: p[4],
            beta: p[5],
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        BimodalModel.value(x, &self.to_vec())
    }
}

/// Parameter order: `[c1, x0, alpha, c2, lambda, beta]`.
#[derive(Clone, Copy, Debug, Default)]
pub struct BimodalModel;

impl Model for BimodalModel {
    fn param_count(&self) -> usize {
        6
    }

    fn value(&self, x: f64, p: &[f64]) -> f64 {
        p[0] * (x + p[1]).powf(-p[2]) + p[3] * (-p[4] * x.powf(p[5])).exp()
    }

    fn gradient(&self, x: f64, p: &[f64], g: &mut [f64]) {
        let (c1, x0, alpha, c2, lambda, beta) = (p[0], p[1], p[2], p[3], p[4], p[5]);
        let s = x + x0;
        let pw = s.powf(-alpha);
        let xb = x.powf(beta);
        let e = (-lambda * xb).exp();
        g[0] = pw;
        g[1] = -alpha * c1 * pw / s;
        g[2] = -c1 * pw * s.ln();
        g[3] = e;
        g[4] = -c2 * xb * e;
        g[5] = -c2 * lambda * xb * x.ln() * e;
    }
}

/// `alpha in (0, 10]`, `beta in (0, 3]`, `x0 in (0, 10]`, `c1, c2, lambda >= 0`.
pub fn bimodal_bounds() -> Bounds {
    Bounds {
        lower: vec![0.0, 1e-12, 1e-9, 0.0, 0.0, 1e-3],
        upper: vec![f64::INFINITY, 10.0, 10.0, f64::INFINITY, f64::INFINITY, 3.0],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BimodalFit {
    pub c1: f64,
    pub x0: f64,
    pub alpha: f64,
    pub c2: f64,
    pub lambda: f64,
    pub beta: f64,
    /// Weighted residual sum of squares at the optimum.
    pub residual_sse: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The stretched-exponential term was pinned off.
    pub c2_fixed: bool,
}

impl BimodalFit {
    pub fn params(&self) -> BimodalParams {
        BimodalParams {
            c1: self.c1,
            x0: self.x0,
            alpha: self.alpha,
            c2: self.c2,
            lambda: self.lambda,
            beta: self.beta,
        }
    }
}

/// Residual weights of the binned fit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Plain sum of squared residuals.
    Uniform,
    /// Inverse Poisson variance of each bin density, `count / density^2`.
    #[default]
    Poisson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub lm: LmConfig,
    pub weighting: Weighting,
    pub min_occupied_bins: usize,
    pub alpha_starts: Vec<f64>,
    pub beta_starts: Vec<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lm: LmConfig::default(),
            weighting: Weighting::default(),
            min_occupied_bins: 8,
            alpha_starts: vec![1.5, 2.0, 3.0, 4.5],
            beta_starts: vec![0.6, 1.0],
        }
    }
}

/// Least-squares fit of the bimodal law to the occupied bins of `pdf`,
/// keeping the lowest-cost result over a grid of starting exponents.
pub fn fit_bimodal(pdf: &BinnedPdf, fix_c2_zero: bool) -> Result<BimodalFit> {
    fit_bimodal_with(pdf, fix_c2_zero, &FitConfig::default())
}

pub fn fit_bimodal_with(pdf: &BinnedPdf, fix_c2_zero: bool, cfg: &FitConfig) -> Result<BimodalFit> {
    let (x, y) = pdf.occupied();
    match cfg.weighting {
        Weighting::Uniform => fit_bimodal_weighted(&x, &y, None, fix_c2_zero, cfg),
        Weighting::Poisson => {
            let w: Vec<f64> = pdf
                .counts
                .iter()
                .filter(|&&c| c > 0)
                .zip(&y)
                .map(|(&c, &d)| c as f64 / (d * d))
                .collect();
            fit_bimodal_weighted(&x, &y, Some(&w), fix_c2_zero, cfg)
        }
    }
}

/// Unweighted fit on raw `(x, y)` points.
pub fn fit_bimodal_points(
    x: &[f64],
    y: &[f64],
    fix_c2_zero: bool,
    cfg: &FitConfig,
) -> Result<BimodalFit> {
    fit_bimodal_weighted(x, y, None, fix_c2_zero, cfg)
}

/// Fit on raw points with optional per-point residual weights.
pub fn fit_bimodal_weighted(
    x: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    fix_c2_zero: bool,
    cfg: &FitConfig,
) -> Result<BimodalFit> {
    if x.len() < cfg.min_occupied_bins {
        return Err(Error::InsufficientSupport {
            occupied: x.len(),
            required: cfg.min_occupied_bins,
        });
    }
    let bounds = bimodal_bounds();
    let lm_cfg = LmConfig {
        fixed: fix_c2_zero.then(|| vec![false, false, false, true, true, true]),
        ..cfg.lm.clone()
    };
    let (x_first, y_first) = (x[0], y[0]);
    let mid = x.len() / 2;
    let (x_mid, y_mid) = (x[mid], y[mid]);
    let x0 = 0.01;
    let beta_starts: &[f64] = if fix_c2_zero {
        &[1.0]
    } else {
        &cfg.beta_starts
    };

    let mut best: Option<BimodalFit> = None;
    for &alpha in &cfg.alpha_starts {
        for &beta in beta_starts {
            let c1 = y_first * (x_first + x0).powf(alpha);
            let (c2, lambda) = if fix_c2_zero {
                (0.0, 0.0)
            } else {
                let lambda = x_mid.powf(-beta);
                (y_mid * std::f64::consts::E, lambda)
            };
            let mut init = vec![c1, x0, alpha, c2, lambda, beta];
            bounds.clamp(&mut init);
            let r = levenberg_marquardt_weighted(
                &BimodalModel,
                x,
                y,
                weights,
                &init,
                &bounds,
                &lm_cfg,
            )?;
            let p = BimodalParams::from_slice(&r.params);
            let fit = BimodalFit {
                c1: p.c1,
                x0: p.x0,
                alpha: p.alpha,
                c2: p.c2,
                lambda: p.lambda,
                beta: p.beta,
                residual_sse: r.sse,
                iterations: r.iterations,
                converged: r.converged,
                c2_fixed: fix_c2_zero,
            };
            if best.is_none_or(|b| fit.residual_sse < b.residual_sse) {
                best = Some(fit);
            }
        }
    }
    Ok(best.expect("at least one start"))
}
