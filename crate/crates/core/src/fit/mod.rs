//! Log-binned densities and least-squares fits of the bimodal law.

mod bimodal;
mod lm;
mod pdf;

pub use bimodal::{
    bimodal_bounds, fit_bimodal, fit_bimodal_points, fit_bimodal_weighted, fit_bimodal_with,
    BimodalFit, BimodalModel, BimodalParams, FitConfig, Weighting,
};
pub use lm::{
    levenberg_marquardt, levenberg_marquardt_weighted, numeric_gradient, sse, weighted_sse, Bounds,
    LmConfig, LmReport, Model,
};
pub use pdf::{log_binned_pdf, log_binned_pdf_with, BinnedPdf, Binning, MIN_PDF_SAMPLES};
