use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_PDF_SAMPLES: usize = 100;

/// Empirical density on logarithmically spaced bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinnedPdf {
    /// `densities.len() + 1` strictly increasing edges.
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
    pub counts: Vec<u64>,
    pub sample_count: usize,
    /// Integer binning: widths count the integers a bin holds.
    pub integer: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub bins_per_decade: u32,
    /// Treat samples as integers: bin edges are integers and each bin's
    /// width is the number of integers it covers.
    pub integer: bool,
}

impl Default for Binning {
    fn default() -> Self {
        Self {
            bins_per_decade: 10,
            integer: false,
        }
    }
}

impl BinnedPdf {
    pub fn widths(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Geometric bin centers. For integer bins, the geometric mean of the
    /// first and last integer inside the bin.
    pub fn centers(&self) -> Vec<f64> {
        self.edges
            .windows(2)
            .map(|w| {
                if self.integer {
                    (w[0] * (w[1] - 1.0)).sqrt()
                } else {
                    (w[0] * w[1]).sqrt()
                }
            })
            .collect()
    }

    /// `(center, density)` of bins holding at least one sample.
    pub fn occupied(&self) -> (Vec<f64>, Vec<f64>) {
        self.centers()
            .into_iter()
            .zip(&self.densities)
            .zip(&self.counts)
            .filter(|(_, &c)| c > 0)
            .map(|((x, &y), _)| (x, y))
            .unzip()
    }

    pub fn occupied_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// `sum(density * width)`, 1 up to rounding.
    pub fn total_mass(&self) -> f64 {
        self.densities
            .iter()
            .zip(self.widths())
            .map(|(d, w)| d * w)
            .sum()
    }
}

pub fn log_binned_pdf(samples: &[f64], bins_per_decade: u32) -> Result<BinnedPdf> {
    log_binned_pdf_with(
        samples,
        Binning {
            bins_per_decade,
            integer: false,
        },
    )
}

/// Bins run from the smallest sample upward at `bins_per_decade` per factor
/// of ten until the largest sample is covered. Empty bins are kept.
pub fn log_binned_pdf_with(samples: &[f64], binning: Binning) -> Result<BinnedPdf> {
    if samples.len() < MIN_PDF_SAMPLES {
        return Err(Error::TooFewSamples {
            required: MIN_PDF_SAMPLES,
            got: samples.len(),
        });
    }
    if binning.bins_per_decade == 0 {
        return Err(Error::InvalidParameter(
            "bins_per_decade must be positive".into(),
        ));
    }
    if let Some((index, &value)) = samples
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v > 0.0))
    {
        return Err(Error::NonPositiveSample { index, value });
    }
    if binning.integer {
        if let Some((index, &value)) = samples.iter().enumerate().find(|(_, v)| v.fract() != 0.0) {
            return Err(Error::InvalidParameter(format!(
                "integer binning got non-integer sample {value} at index {index}"
            )));
        }
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(0.0, f64::max);
    let bpd = f64::from(binning.bins_per_decade);
    let edge = |i: usize| lo * 10f64.powf(i as f64 / bpd);

    let mut edges = vec![lo];
    let mut i = 0;
    loop {
        i += 1;
        let mut e = edge(i);
        if binning.integer {
            e = e.ceil();
            if e <= *edges.last().unwrap() {
                continue;
            }
        }
        edges.push(e);
        if e > hi {
            break;
        }
    }

    let nb = edges.len() - 1;
    let mut counts = vec![0u64; nb];
    for &x in samples {
        // bins are [e_i, e_{i+1}); the last edge exceeds the maximum
        let k = match edges.binary_search_by(|e| e.total_cmp(&x)) {
            Ok(k) => k,
            Err(k) => k - 1,
        };
        counts[k.min(nb - 1)] += 1;
    }
    let n = samples.len() as f64;
    let densities = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, w)| c as f64 / (n * (w[1] - w[0])))
        .collect();
    Ok(BinnedPdf {
        edges,
        densities,
        counts,
        sample_count: samples.len(),
        integer: binning.integer,
    })
}
