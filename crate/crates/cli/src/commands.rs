//! Subcommand bodies. Each reads its inputs, writes staged outputs and
//! reports knobs and a summary for the manifest.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::json;

use cascade_structure::dynamics::{
    corpus_series, kmeans, write_assignments, ClusterReport, KMeansConfig, SeriesConfig,
};
use cascade_structure::fit::{fit_bimodal_with, log_binned_pdf_with, Binning, FitConfig};
use cascade_structure::groups::{
    boundary_curves, joint_histogram, kruskal_by_metric, pairwise_distinguishability,
    write_boundaries, write_distinguishability, write_distinguishability_pairs, write_joint,
    write_kw, DistinguishConfig, GroupedTable, JointConfig,
};
use cascade_structure::io::{
    read_events, read_labels, read_metrics, write_events, write_json, write_metrics, write_pdf,
    write_rejects, write_truth, write_venn, FitReport, MetricRow,
};
use cascade_structure::metrics::{corpus_metrics, venn_tally};
use cascade_structure::store::{read_store, StoreWriter, DATA_FILE, INDEX_FILE};
use cascade_structure::synth::{generate_corpus, CorpusSpec};
use cascade_structure::{CascadeGraph, MetricConfig};

use crate::failure::{Failure, ResultExt};
use crate::output::{input_digests, OutputDir};
use crate::{
    BuildArgs, DistArgs, DynamicsArgs, JointArgs, MetricsArgs, Outcome, StatsArgs, SynthArgs,
};

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(|f| BufReader::with_capacity(1 << 20, f))
        .with_context(|| format!("{}: cannot open", path.display()))
        .input()
}

fn in_file<T>(path: &Path, r: cascade_structure::Result<T>) -> Result<T, Failure> {
    r.with_context(|| path.display().to_string()).input()
}

fn knobs<T: serde::Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).expect("arguments serialize")
}

fn store_files(dir: &Path) -> [PathBuf; 2] {
    [dir.join(DATA_FILE), dir.join(INDEX_FILE)]
}

fn load_store(path: &Path) -> Result<Vec<CascadeGraph>, Failure> {
    in_file(path, read_store(path))
}

fn load_metrics(path: &Path) -> Result<Vec<MetricRow>, Failure> {
    let rows = in_file(path, read_metrics(open(path)?))?;
    if rows.is_empty() {
        return Err(Failure::input(anyhow::anyhow!(
            "{}: metric table has no rows",
            path.display()
        )));
    }
    Ok(rows)
}

pub fn build(a: &BuildArgs, seed: Option<u64>, out: &OutputDir) -> Result<Outcome, Failure> {
    let inputs = input_digests(std::slice::from_ref(&a.events))?;
    let report = in_file(&a.events, read_events(open(&a.events)?))?;
    let mut store = StoreWriter::create(out.staging()).output()?;
    for c in &report.cascades {
        store.append(c).output()?;
    }
    let count = store.finish().output()?;
    out.write("rejects.tsv", |w| write_rejects(w, &report.rejects))?;
    eprintln!(
        "build: {count} cascades, {} events accepted, {} rejected",
        report.accepted_events, report.rejected_events
    );
    Ok(Outcome {
        seed: seed.unwrap_or(0),
        knobs: knobs(a),
        inputs,
        summary: json!({
            "cascades": count,
            "accepted_events": report.accepted_events,
            "rejected_events": report.rejected_events,
            "reject_lines": report.rejects.len(),
        }),
    })
}

pub fn metrics(a: &MetricsArgs, seed: Option<u64>, out: &OutputDir) -> Result<Outcome, Failure> {
    let seed = seed.unwrap_or(0);
    let inputs = input_digests(&store_files(&a.store))?;
    let cascades = load_store(&a.store)?;
    let cfg = MetricConfig {
        exact_threshold: a.exact_threshold,
        sample_sources: a.sample_sources,
        seed,
        include_original_post: a.include_original_post,
    };
    let vectors = corpus_metrics(&cascades, &cfg);
    let tally = venn_tally(vectors.iter().map(|m| &m.flags));
    let rows: Vec<MetricRow> = cascades
        .iter()
        .zip(vectors)
        .map(|(c, metrics)| MetricRow {
            cascade_id: c.cascade_id().to_owned(),
            metrics,
        })
        .collect();
    out.write("metrics.tsv", |w| write_metrics(w, &rows))?;
    out.write("venn.json", |w| write_venn(w, &tally))?;
    eprintln!("metrics: {} cascades", rows.len());
    Ok(Outcome {
        seed,
        knobs: knobs(a),
        inputs,
        summary: json!({ "cascades": rows.len() }),
    })
}

pub fn dist(a: &DistArgs, seed: Option<u64>, out: &OutputDir) -> Result<Outcome, Failure> {
    let inputs = input_digests(std::slice::from_ref(&a.metrics))?;
    let rows = load_metrics(&a.metrics)?;
    let all: Vec<f64> = rows.iter().map(|r| a.metric.value(&r.metrics)).collect();
    let samples: Vec<f64> = all.iter().copied().filter(|&v| v > 0.0).collect();
    let binning = Binning {
        bins_per_decade: a.bins_per_decade,
        integer: a.metric.is_integer(),
    };
    let pdf = log_binned_pdf_with(&samples, binning)
        .with_context(|| format!("{}: {}", a.metrics.display(), a.metric))
        .input()?;
    let cfg = FitConfig {
        weighting: a.weighting.into(),
        ..FitConfig::default()
    };
    let fit = fit_bimodal_with(&pdf, a.fix_c2_zero, &cfg)
        .with_context(|| format!("fitting {}", a.metric))
        .input()?;
    let report = FitReport::new(a.metric.name(), &fit);
    out.write("pdf.tsv", |w| write_pdf(w, &pdf))?;
    out.write("fit.json", |w| write_json(w, &report))?;
    eprintln!(
        "dist: {} alpha = {:.4} over {} samples",
        a.metric,
        report.params.alpha,
        samples.len()
    );
    Ok(Outcome {
        seed: seed.unwrap_or(0),
        knobs: knobs(a),
        inputs,
        summary: json!({
            "samples": samples.len(),
            "skipped_non_positive": all.len() - samples.len(),
            "occupied_bins": pdf.occupied_bins(),
        }),
    })
}

pub fn dynamics(a: &DynamicsArgs, seed: Option<u64>, out: &OutputDir) -> Result<Outcome, Failure> {
    let seed = seed.unwrap_or(0);
    let inputs = input_digests(&store_files(&a.store))?;
    let cascades = load_store(&a.store)?;
    let set = corpus_series(
        &cascades,
        &SeriesConfig {
            time_unit: a.time_unit,
            grid_size: a.grid_size,
            min_mass: a.min_mass,
        },
    )
    .input()?;
    let model = kmeans(
        &set.series,
        &KMeansConfig {
            k: a.k,
            seed,
            max_iter: a.max_iter,
            n_init: a.n_init,
        },
    )
    .with_context(|| {
        format!(
            "clustering {} series ({} cascades skipped)",
            set.series.len(),
            set.skipped.len()
        )
    })
    .input()?;
    out.write("clusters.json", |w| {
        write_json(w, &ClusterReport::from(&model))
    })?;
    out.write("assignments.tsv", |w| write_assignments(w, &model))?;
    eprintln!(
        "dynamics: {} series in {} clusters, inertia {:.6}",
        set.series.len(),
        a.k,
        model.inertia
    );
    Ok(Outcome {
        seed,
        knobs: knobs(a),
        inputs,
        summary: json!({
            "series": set.series.len(),
            "skipped": set.skipped.len(),
            "iterations": model.iterations,
            "converged": model.converged,
        }),
    })
}

pub fn stats(a: &StatsArgs, seed: Option<u64>, out: &OutputDir) -> Result<Outcome, Failure> {
    let seed = seed.unwrap_or(0);
    let mut inputs = input_digests(std::slice::from_ref(&a.metrics))?;
    inputs.extend(input_digests(std::slice::from_ref(&a.labels))?);
    let rows = load_metrics(&a.metrics)?;
    let labels = in_file(&a.labels, read_labels(open(&a.labels)?))?;
    let table = GroupedTable::new(&rows, &labels).input()?;
    if table.labels.len() < 2 {
        return Err(Failure::input(anyhow::anyhow!(
            "{}: need at least 2 labelled groups, found {}",
            a.labels.display(),
            table.labels.len()
        )));
    }
    let kw = kruskal_by_metric(&table, &a.group_source);
    let cfg = DistinguishConfig {
        seed,
        folds: a.folds,
        min_group: a.min_group,
        ..DistinguishConfig::default()
    };
    let matrix = pairwise_distinguishability(&table, &cfg).input()?;
    out.write("kw.tsv", |w| write_kw(w, &kw))?;
    out.write("disting.tsv", |w| write_distinguishability(w, &matrix))?;
    out.write("disting_pairs.tsv", |w| {
        write_distinguishability_pairs(w, &matrix)
    })?;
    for warning in &matrix.warnings {
        eprintln!("warning: {warning}");
    }
    eprintln!(
        "stats: {} groups, {} labelled rows",
        table.labels.len(),
        table.rows.len()
    );
    Ok(Outcome {
        seed,
        knobs: knobs(a),
        inputs,
        summary: json!({
            "groups": table.labels,
            "group_sizes": table.group_sizes(),
            "unlabeled": table.unlabeled,
            "insufficient": matrix.insufficient,
            "warnings": matrix.warnings,
        }),
    })
}

pub fn joint(a: &JointArgs, seed: Option<u64>, out: &OutputDir) -> Result<Outcome, Failure> {
    let inputs = input_digests(std::slice::from_ref(&a.metrics))?;
    let rows = load_metrics(&a.metrics)?;
    let vectors: Vec<_> = rows.iter().map(|r| r.metrics).collect();
    let cfg = JointConfig {
        bins_per_decade: a.bins_per_decade,
        linear_bins: a.linear_bins,
    };
    let h = joint_histogram(&vectors, a.x, a.y, &cfg)
        .with_context(|| format!("{}: {} vs {}", a.metrics.display(), a.x, a.y))
        .input()?;
    let curves = boundary_curves(&h);
    out.write("joint.tsv", |w| write_joint(w, &h))?;
    out.write("boundaries.tsv", |w| write_boundaries(w, &curves))?;
    eprintln!("joint: {} rows used, {} skipped", h.used, h.skipped);
    Ok(Outcome {
        seed: seed.unwrap_or(0),
        knobs: knobs(a),
        inputs,
        summary: json!({
            "used": h.used,
            "skipped": h.skipped,
            "boundaries": curves.iter().map(|c| c.boundary.name()).collect::<Vec<_>>(),
        }),
    })
}

pub fn synth(a: &SynthArgs, seed: Option<u64>, out: &OutputDir) -> Result<Outcome, Failure> {
    let inputs = input_digests(std::slice::from_ref(&a.spec))?;
    let mut spec: CorpusSpec = serde_json::from_reader(open(&a.spec)?)
        .with_context(|| a.spec.display().to_string())
        .input()?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let corpus = generate_corpus(&spec)
        .with_context(|| a.spec.display().to_string())
        .input()?;
    out.write("events.tsv", |w| write_events(w, &corpus.events))?;
    out.write("truth.tsv", |w| write_truth(w, &corpus.truth))?;
    eprintln!(
        "synth: {} cascades, {} events",
        corpus.truth.len(),
        corpus.events.len()
    );
    Ok(Outcome {
        seed: spec.seed,
        knobs: json!({ "spec": a.spec, "corpus": spec }),
        inputs,
        summary: json!({
            "cascades": corpus.truth.len(),
            "events": corpus.events.len(),
        }),
    })
}
