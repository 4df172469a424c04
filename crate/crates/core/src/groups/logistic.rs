//! L2-regularized logistic regression fitted by Newton (IRLS) iterations,
//! with stratified k-fold cross-validation.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::solve_spd;

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Per-feature standardization learned from the training set.
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub iterations: usize,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

// log(1 + exp(z)) without overflow
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LogisticModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.bias
            + x.iter()
                .zip(&self.weights)
                .zip(self.mean.iter().zip(&self.scale))
                .map(|((v, w), (m, s))| w * (v - m) / s)
                .sum::<f64>()
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.decision(x) > 0.0
    }
}

const MAX_NEWTON: usize = 100;

/// Minimizes `mean(logloss) + lambda/2 * |w|^2` (bias unpenalized) on
/// standardized features.
pub fn fit_logistic(x: &[Vec<f64>], y: &[bool], lambda: f64) -> Result<LogisticModel> {
    let n = x.len();
    if n == 0 || n != y.len() {
        return Err(Error::InvalidParameter(
            "empty or mismatched training set".into(),
        ));
    }
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::InvalidParameter(
            "lambda must be non-negative".into(),
        ));
    }
    let d = x[0].len();
    let nf = n as f64;
    let mut mean = vec![0.0; d];
    for row in x {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / nf;
        }
    }
    let mut scale = vec![0.0; d];
    for row in x {
        for ((s, v), m) in scale.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m) / nf;
        }
    }
    for s in &mut scale {
        *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
    }
    let z: Vec<Vec<f64>> = x
        .iter()
        .map(|row| {
            let mut r: Vec<f64> = row
                .iter()
                .zip(mean.iter().zip(&scale))
                .map(|(v, (m, s))| (v - m) / s)
                .collect();
            r.push(1.0);
            r
        })
        .collect();

    let p = d + 1;
    let loss = |beta: &[f64]| -> f64 {
        let data: f64 = z
            .iter()
            .zip(y)
            .map(|(r, &t)| {
                let s: f64 = r.iter().zip(beta).map(|(a, b)| a * b).sum();
                softplus(s) - if t { s } else { 0.0 }
            })
            .sum::<f64>()
            / nf;
        data + 0.5 * lambda * beta[..d].iter().map(|b| b * b).sum::<f64>()
    };
    let mut beta = vec![0.0; p];
    let mut current = loss(&beta);
    let mut iterations = 0;
    while iterations < MAX_NEWTON {
        iterations += 1;
        let mut grad = vec![0.0; p];
        let mut hess = vec![0.0; p * p];
        for (r, &t) in z.iter().zip(y) {
            let s: f64 = r.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let mu = sigmoid(s);
            let resid = mu - if t { 1.0 } else { 0.0 };
            let w = mu * (1.0 - mu);
            for a in 0..p {
                grad[a] += resid * r[a] / nf;
                for b in 0..=a {
                    hess[a * p + b] += w * r[a] * r[b] / nf;
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                hess[b * p + a] = hess[a * p + b];
            }
        }
        for a in 0..d {
            grad[a] += lambda * beta[a];
            hess[a * p + a] += lambda;
        }
        // tiny ridge keeps the solve defined on separable or collinear data
        for a in 0..p {
            hess[a * p + a] += 1e-10;
        }
        let Some(step) = solve_spd(&hess, &grad) else {
            break;
        };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b - t * s).collect();
            let l = loss(&trial);
            if l <= current {
                let gain = current - l;
                beta = trial;
                current = l;
                improved = gain > 1e-14 * current.max(1e-300);
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(LogisticModel {
        bias: beta[d],
        weights: beta[..d].to_vec(),
        mean,
        scale,
        iterations,
    })
}

/// Assigns each item to one of `folds` folds, keeping class proportions:
/// each class is shuffled and dealt round-robin.
pub fn stratified_folds(y: &[bool], folds: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut fold = vec![0; y.len()];
    let mut next = 0;
    for class in [false, true] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(rng);
        for i in idx {
            fold[i] = next % folds;
            next += 1;
        }
    }
    fold
}

/// Mean held-out accuracy over the folds in `fold`.
pub fn cross_validated_accuracy(
    x: &[Vec<f64>],
    y: &[bool],
    fold: &[usize],
    folds: usize,
    lambda: f64,
) -> Result<f64> {
    let mut total = 0.0;
    let mut used = 0;
    for f in 0..folds {
        let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for i in 0..x.len() {
            if fold[i] == f {
                vx.push(x[i].clone());
                vy.push(y[i]);
            } else {
                tx.push(x[i].clone());
                ty.push(y[i]);
            }
        }
        if vx.is_empty() || tx.is_empty() {
            continue;
        }
        let m = fit_logistic(&tx, &ty, lambda)?;
        let correct = vx
            .iter()
            .zip(&vy)
            .filter(|(v, &t)| m.predict(v) == t)
            .count();
        total += correct as f64 / vx.len() as f64;
        used += 1;
    }
    if used == 0 {
        return Err(Error::TooFewSamples {
            required: folds,
            got: x.len(),
        });
    }
    Ok(total / used as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn separable_data_is_classified() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![f64::from(i), 1.0]).collect();
        let y: Vec<bool> = (0..40).map(|i| i >= 20).collect();
        let m = fit_logistic(&x, &y, 1e-3).unwrap();
        assert!(x.iter().zip(&y).all(|(v, &t)| m.predict(v) == t));
    }

    #[test]
    fn gradient_vanishes_at_the_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let y: Vec<bool> = x
            .iter()
            .map(|v| v[0] + 0.5 * v[1] + 0.3 * (rng.random::<f64>() - 0.5) > 0.8)
            .collect();
        let lambda = 0.1;
        let m = fit_logistic(&x, &y, lambda).unwrap();
        // gradient in standardized coordinates
        let n = x.len() as f64;
        let mut g = vec![0.0; 3];
        for (v, &t) in x.iter().zip(&y) {
            let r = sigmoid(m.decision(v)) - if t { 1.0 } else { 0.0 };
            for j in 0..2 {
                g[j] += r * (v[j] - m.mean[j]) / m.scale[j] / n;
            }
            g[2] += r / n;
        }
        for (gj, w) in g.iter_mut().zip(&m.weights) {
            *gj += lambda * w;
        }
        assert!(g.iter().all(|v| v.abs() < 1e-9), "{g:?}");
    }

    #[test]
    fn folds_are_stratified() {
        let y: Vec<bool> = (0..100).map(|i| i % 4 == 0).collect();
        let f = stratified_folds(&y, 5, &mut ChaCha8Rng::seed_from_u64(1));
        for k in 0..5 {
            let pos = (0..100).filter(|&i| f[i] == k && y[i]).count();
            let all = (0..100).filter(|&i| f[i] == k).count();
            assert_eq!((pos, all), (5, 20));
        }
    }
}
