//! WebAssembly bindings for the browser demo. Each export takes plain
//! arguments and returns a JSON string; the `*_json` functions hold the
//! logic and run natively too.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use cascade_structure::dynamics::{
    adjusted_rand_index, corpus_series, kmeans, KMeansConfig, SeriesConfig,
};
use cascade_structure::fit::{fit_bimodal, log_binned_pdf, BimodalParams, MIN_PDF_SAMPLES};
use cascade_structure::metrics::Silhouette;
use cascade_structure::synth::{
    generate_corpus, BimodalSampler, CorpusSpec, GeneratorSpec, MassSpec, Profile, Shape, Timing,
};
use cascade_structure::{
    build_cascades, compute_depths, metric_vector, MetricConfig, RetweetEvent,
};

pub const MAX_DEMO_EDGES: usize = 20_000;
pub const MAX_DEMO_SAMPLES: usize = 2_000_000;
pub const MAX_DEMO_SERIES: usize = 2_000;

/// Metrics and drawing data of a cascade given as `source actor` lines. The
/// first line's source posted the original.
pub fn cascade_metrics_json(edges: &str) -> Result<Value, String> {
    let pairs: Vec<(&str, &str)> = edges
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .enumerate()
        .map(|(i, l)| {
            let mut f = l.split_whitespace();
            match (f.next(), f.next(), f.next()) {
                (Some(s), Some(a), None) => Ok((s, a)),
                _ => Err(format!("line {}: expected 'source actor'", i + 1)),
            }
        })
        .collect::<Result<_, _>>()?;
    let Some(&(root, _)) = pairs.first() else {
        return Err("no edges".into());
    };
    if pairs.len() > MAX_DEMO_EDGES {
        return Err(format!("at most {MAX_DEMO_EDGES} edges"));
    }
    let mut events = vec![RetweetEvent::original("demo", "p0", root, 0)];
    for (k, &(s, a)) in pairs.iter().enumerate() {
        events.push(RetweetEvent::retweet(
            "demo",
            &format!("p{}", k + 1),
            a,
            s,
            k as i64 + 1,
        ));
    }
    let report = build_cascades(events);
    let c = report
        .cascades
        .first()
        .ok_or_else(|| "cascade rejected".to_owned())?;
    let depths = compute_depths(c);
    let m = metric_vector(c, &MetricConfig::default());
    let nodes: Vec<Value> = c
        .users()
        .iter()
        .zip(depths.depths())
        .map(|(u, d)| json!({ "id": u, "depth": d }))
        .collect();
    let edges: Vec<[u32; 3]> = c
        .edges()
        .iter()
        .map(|e| [e.source, e.target, e.weight])
        .collect();
    Ok(json!({
        "metrics": m,
        "silhouette": Silhouette::from_depths(&depths).breadth_by_depth,
        "nodes": nodes,
        "edges": edges,
        "warnings": report.rejects.iter().map(|r| r.reason.clone()).collect::<Vec<_>>(),
    }))
}

/// Samples a reference law, log-bins the draws and fits the bimodal law.
pub fn fit_law_json(
    preset: &str,
    samples: usize,
    seed: u64,
    fix_c2_zero: bool,
) -> Result<Value, String> {
    let law = BimodalParams::preset(preset).ok_or_else(|| format!("unknown preset '{preset}'"))?;
    if !(MIN_PDF_SAMPLES..=MAX_DEMO_SAMPLES).contains(&samples) {
        return Err(format!(
            "samples must be in {MIN_PDF_SAMPLES}..={MAX_DEMO_SAMPLES}"
        ));
    }
    let sampler = BimodalSampler::new(law, 1.0).map_err(|e| e.to_string())?;
    let draws = sampler.sample_n(samples, seed);
    let pdf = log_binned_pdf(&draws, 10).map_err(|e| e.to_string())?;
    let fit = fit_bimodal(&pdf, fix_c2_zero).map_err(|e| e.to_string())?;
    let fitted = fit.params();
    let (x, y) = pdf.occupied();
    let mass = sampler.total_mass();
    let curve: Vec<[f64; 3]> = x
        .iter()
        .map(|&v| [v, fitted.density(v), law.density(v) / mass])
        .collect();
    Ok(json!({
        "truth": law,
        "fit": fitted,
        "sse": fit.residual_sse,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "points": x.iter().zip(&y).map(|(a, b)| [*a, *b]).collect::<Vec<_>>(),
        "curve": curve,
    }))
}

/// Clusters growth curves of three synthetic timing families.
pub fn cluster_profiles_json(per_family: usize, k: usize, seed: u64) -> Result<Value, String> {
    if !(1..=MAX_DEMO_SERIES).contains(&per_family) {
        return Err(format!("per-family count must be in 1..={MAX_DEMO_SERIES}"));
    }
    let mut series = Vec::new();
    let mut labels = Vec::new();
    for (family, profile) in Profile::ALL.into_iter().enumerate() {
        let spec = CorpusSpec::single(
            GeneratorSpec {
                shape: Shape::Star,
                n: MassSpec::Range { min: 100, max: 300 },
                timing: Timing::Profile {
                    profile,
                    lifetime: 86_400.0,
                },
            },
            per_family,
            seed.wrapping_add(family as u64),
        );
        let corpus = generate_corpus(&spec).map_err(|e| e.to_string())?;
        let cascades = build_cascades(corpus.events).cascades;
        let set = corpus_series(&cascades, &SeriesConfig::default()).map_err(|e| e.to_string())?;
        for mut s in set.series {
            s.cascade_id = format!("{family}-{}", s.cascade_id);
            series.push(s);
            labels.push(family);
        }
    }
    let model = kmeans(
        &series,
        &KMeansConfig {
            k,
            seed,
            n_init: 5,
            ..KMeansConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let by_id = model.assignment_map();
    let predicted: Vec<usize> = series
        .iter()
        .map(|s| by_id[s.cascade_id.as_str()])
        .collect();
    let ari = adjusted_rand_index(&labels, &predicted).map_err(|e| e.to_string())?;
    let mut confusion = vec![vec![0usize; k]; 3];
    for (&l, &a) in labels.iter().zip(&predicted) {
        confusion[l][a] += 1;
    }
    Ok(json!({
        "families": Profile::ALL,
        "centroids": model.centroids,
        "sizes": model.sizes(),
        "inertia": model.inertia,
        "ari": ari,
        "confusion": confusion,
    }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn cascade_metrics(edges: &str) -> Result<String, JsError> {
    to_js(cascade_metrics_json(edges))
}

#[wasm_bindgen]
pub fn fit_law(
    preset: &str,
    samples: usize,
    seed: u32,
    fix_c2_zero: bool,
) -> Result<String, JsError> {
    to_js(fit_law_json(preset, samples, u64::from(seed), fix_c2_zero))
}

#[wasm_bindgen]
pub fn cluster_profiles(per_family: usize, k: usize, seed: u32) -> Result<String, JsError> {
    to_js(cluster_profiles_json(per_family, k, u64::from(seed)))
}
