//! Box-constrained Levenberg-Marquardt for scalar curve fits.
//!
//! Minimizes `sum_i (model(x_i; p) - y_i)^2`. Each iteration solves
//! `(J^T J + mu * diag(J^T J)) delta = -J^T r`, clamps `p + delta` into the
//! bound box and accepts the step only if the residual sum of squares drops.
//! `mu` shrinks after an accepted step and grows after a rejected one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_spd;

/// A parametric family `y = f(x; p)` with analytic partial derivatives.
pub trait Model {
    fn param_count(&self) -> usize;

    fn value(&self, x: f64, params: &[f64]) -> f64;

    /// Writes `df/dp_j` into `grad[j]`.
    fn gradient(&self, x: f64, params: &[f64], grad: &mut [f64]);
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn clamp(&self, p: &mut [f64]) {
        for ((v, lo), hi) in p.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .all(|((v, lo), hi)| v >= lo && v <= hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub max_iter: usize,
    /// Stop when the relative SSE improvement or the relative step falls
    /// below this.
    pub tol: f64,
    pub initial_damping: f64,
    /// Parameters held at their initial value; `None` frees all of them.
    pub fixed: Option<Vec<bool>>,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-12,
            initial_damping: 1e-3,
            fixed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmReport {
    pub params: Vec<f64>,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
    /// SSE at the start and after every accepted step.
    pub sse_trace: Vec<f64>,
}

pub fn sse<M: Model>(model: &M, x: &[f64], y: &[f64], params: &[f64]) -> f64 {
    weighted_sse(model, x, y, None, params)
}

/// `sum_i w_i (f(x_i) - y_i)^2`; unit weights when `weights` is `None`.
pub fn weighted_sse<M: Model>(
    model: &M,
    x: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    params: &[f64],
) -> f64 {
    x.iter()
        .zip(y)
        .enumerate()
        .map(|(i, (&xi, &yi))| {
            let r = model.value(xi, params) - yi;
            weights.map_or(1.0, |w| w[i]) * r * r
        })
        .sum()
}

/// Central-difference gradient with per-parameter step
/// `rel_step * max(|p_j|, rel_step)`.
pub fn numeric_gradient<M: Model>(model: &M, x: f64, params: &[f64], rel_step: f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..params.len())
        .map(|j| {
            let h = rel_step * params[j].abs().max(rel_step);
            p[j] = params[j] + h;
            let up = model.value(x, &p);
            p[j] = params[j] - h;
            let down = model.value(x, &p);
            p[j] = params[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

const MAX_DAMPING: f64 = 1e30;

pub fn levenberg_marquardt<M: Model>(
    model: &M,
    x: &[f64],
    y: &[f64],
    init: &[f64],
    bounds: &Bounds,
    cfg: &LmConfig,
) -> Result<LmReport> {
    levenberg_marquardt_weighted(model, x, y, None, init, bounds, cfg)
}

/// Weighted variant: minimizes `sum_i w_i (f(x_i; p) - y_i)^2` with
/// non-negative `weights`.
pub fn levenberg_marquardt_weighted<M: Model>(
    model: &M,
    x: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    init: &[f64],
    bounds: &Bounds,
    cfg: &LmConfig,
) -> Result<LmReport> {
    if let Some(w) = weights {
        if w.len() != x.len() || w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(
                "weights must be finite, non-negative and match x".into(),
            ));
        }
    }
    let np = model.param_count();
    if init.len() != np || bounds.lower.len() != np || bounds.upper.len() != np {
        return Err(Error::InvalidParameter(format!(
            "expected {np} parameters and bounds"
        )));
    }
    if x.len() != y.len() {
        return Err(Error::InvalidParameter("x and y lengths differ".into()));
    }
    if x.iter().chain(y).chain(init).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite input".into()));
    }
    if !bounds.contains(init) {
        return Err(Error::InvalidParameter(
            "initial parameters outside bounds".into(),
        ));
    }
    let free: Vec<usize> = match &cfg.fixed {
        Some(f) if f.len() == np => (0..np).filter(|&j| !f[j]).collect(),
        Some(_) => return Err(Error::InvalidParameter("fixed mask length".into())),
        None => (0..np).collect(),
    };
    let nf = free.len();

    let mut p = init.to_vec();
    let mut cost = weighted_sse(model, x, y, weights, &p);
    let mut trace = vec![cost];
    if nf == 0 || cost == 0.0 {
        return Ok(LmReport {
            params: p,
            sse: cost,
            iterations: 0,
            converged: true,
            sse_trace: trace,
        });
    }

    let mut mu = cfg.initial_damping;
    let mut grad = vec![0.0; np];
    let mut jtj = vec![0.0; nf * nf];
    let mut jtr = vec![0.0; nf];
    let mut converged = false;
    let mut iterations = 0;

    'outer: while iterations < cfg.max_iter {
        iterations += 1;
        jtj.iter_mut().for_each(|v| *v = 0.0);
        jtr.iter_mut().for_each(|v| *v = 0.0);
        for (i, (&xi, &yi)) in x.iter().zip(y).enumerate() {
            let wi = weights.map_or(1.0, |w| w[i]);
            let r = model.value(xi, &p) - yi;
            model.gradient(xi, &p, &mut grad);
            for (a, &ja) in free.iter().enumerate() {
                let ga = wi * grad[ja];
                jtr[a] += ga * r;
                for (b, &jb) in free.iter().enumerate().take(a + 1) {
                    jtj[a * nf + b] += ga * grad[jb];
                }
            }
        }
        for a in 0..nf {
            for b in 0..a {
                jtj[b * nf + a] = jtj[a * nf + b];
            }
        }
        if jtr.iter().all(|g| *g == 0.0) {
            converged = true;
            break;
        }

        loop {
            let mut a = jtj.clone();
            for d in 0..nf {
                let diag = jtj[d * nf + d].max(1e-300);
                a[d * nf + d] += mu * diag;
            }
            let rhs: Vec<f64> = jtr.iter().map(|g| -g).collect();
            let Some(delta) = solve_spd(&a, &rhs) else {
                mu *= 10.0;
                if mu > MAX_DAMPING {
                    converged = true;
                    break 'outer;
                }
                continue;
            };
            let mut trial = p.clone();
            for (k, &j) in free.iter().enumerate() {
                trial[j] += delta[k];
            }
            bounds.clamp(&mut trial);
            let trial_cost = weighted_sse(model, x, y, weights, &trial);
            if trial_cost < cost {
                let step: f64 = free
                    .iter()
                    .map(|&j| (trial[j] - p[j]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let scale: f64 = free.iter().map(|&j| p[j] * p[j]).sum::<f64>().sqrt();
                let improvement = (cost - trial_cost) / cost;
                p = trial;
                cost = trial_cost;
                trace.push(cost);
                mu = (mu / 3.0).max(1e-15);
                if improvement < cfg.tol || step < cfg.tol * (scale + cfg.tol) || cost == 0.0 {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            mu *= 4.0;
            if mu > MAX_DAMPING {
                // no descent direction left inside the box
                converged = true;
                break 'outer;
            }
        }
    }

    Ok(LmReport {
        params: p,
        sse: cost,
        iterations,
        converged,
        sse_trace: trace,
    })
}
