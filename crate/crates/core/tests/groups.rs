use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use cascade_structure::groups::{
    distinguish_pair, kruskal_by_metric, kruskal_wallis, kruskal_wallis_unchecked, log_features,
    pairwise_distinguishability, DistinguishConfig, GroupedTable,
};
use cascade_structure::io::MetricRow;
use cascade_structure::synth::{
    generate_corpus, CorpusComponent, CorpusSpec, GeneratorSpec, MassSpec, Shape,
};
use cascade_structure::{build_cascades, metric_vector, MetricConfig};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-300)
}

#[test]
fn kruskal_matches_scipy_reference_values() {
    let a = [2.9, 3.0, 2.5, 2.6, 3.2, 3.0];
    let b = [3.8, 2.7, 4.0, 2.4, 3.0];
    let c = [2.8, 3.4, 3.7, 2.2, 2.0, 3.0, 4.1];
    let r = kruskal_wallis(&[&a, &b, &c]).unwrap();
    assert!(close(r.h, 0.39505437211380384, 1e-12), "{}", r.h);
    assert!(close(r.p, 0.8207578271554268, 1e-10), "{}", r.p);
    assert_eq!(r.df, 2);

    let a = [1.0, 1.0, 2.0, 2.0, 2.0, 3.0, 5.0, 5.0];
    let b = [4.0, 4.0, 4.0, 6.0, 7.0, 7.0, 7.0, 8.0];
    let r = kruskal_wallis(&[&a, &b]).unwrap();
    assert!(close(r.h, 7.612612612612618, 1e-12), "{}", r.h);
    assert!(close(r.p, 0.005796144481671508, 1e-10), "{}", r.p);
}

#[test]
fn kruskal_matches_hand_ranked_statistic() {
    // ranks 1..9 without ties: H = 12/(N(N+1)) sum R^2/n - 3(N+1)
    let r =
        kruskal_wallis_unchecked(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], &[7.0, 8.0, 9.0]]).unwrap();
    let hand = 12.0 / 90.0 * (36.0 + 225.0 + 576.0) / 3.0 - 30.0;
    assert!((r.h - hand).abs() < 1e-12);
    assert!((r.p - (-hand / 2.0).exp()).abs() < 1e-12);
}

#[test]
fn shifted_groups_are_rejected_strongly() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let a: Vec<f64> = (0..100).map(|_| normal.sample(&mut rng)).collect();
    let b: Vec<f64> = (0..100).map(|_| normal.sample(&mut rng) + 5.0).collect();
    let r = kruskal_wallis(&[&a, &b]).unwrap();
    assert!(r.p < 1e-10, "p = {}", r.p);
}

fn corpus_rows(
    components: Vec<(Shape, &str)>,
    cascades: usize,
    seed: u64,
) -> (Vec<MetricRow>, BTreeMap<String, String>) {
    let spec = CorpusSpec {
        cascades,
        seed,
        components: components
            .into_iter()
            .map(|(shape, label)| CorpusComponent {
                weight: 1.0,
                label: Some(label.to_owned()),
                spec: GeneratorSpec {
                    shape,
                    n: MassSpec::Range { min: 5, max: 200 },
                    timing: Default::default(),
                },
            })
            .collect(),
    };
    let corpus = generate_corpus(&spec).unwrap();
    let cfg = MetricConfig::default();
    let rows = build_cascades(corpus.events)
        .cascades
        .iter()
        .map(|c| MetricRow {
            cascade_id: c.cascade_id().to_owned(),
            metrics: metric_vector(c, &cfg),
        })
        .collect();
    let labels = corpus
        .truth
        .into_iter()
        .map(|t| (t.cascade_id, t.label))
        .collect();
    (rows, labels)
}

#[test]
fn star_and_chain_are_distinguishable() {
    let (rows, labels) = corpus_rows(vec![(Shape::Star, "star"), (Shape::Chain, "chain")], 400, 2);
    let table = GroupedTable::new(&rows, &labels).unwrap();
    let m = pairwise_distinguishability(&table, &DistinguishConfig::default()).unwrap();
    assert!(m.accuracy(0, 1).unwrap() > 0.95);
    let kw = kruskal_by_metric(&table, "shape");
    let trend = kw
        .iter()
        .find(|r| r.metric == cascade_structure::Metric::Trend)
        .unwrap();
    assert!(trend.result.as_ref().unwrap().p < 1e-10);
}

#[test]
fn shuffled_labels_are_not_distinguishable() {
    let (rows, _) = corpus_rows(
        vec![(
            Shape::BranchingProcess {
                offspring_mean: 1.2,
                p_rep: 0.1,
                p_conv: 0.1,
                p_rec: 0.05,
                p_loop: 0.05,
            },
            "bp",
        )],
        1200,
        5,
    );
    let feats: Vec<[f64; 12]> = rows.iter().map(|r| log_features(&r.metrics)).collect();
    let (a, b) = feats.split_at(600);
    let r = distinguish_pair(a, b, &DistinguishConfig::default(), 9).unwrap();
    let acc = r.accuracy.unwrap();
    assert!((0.45..=0.55).contains(&acc), "accuracy {acc}");
}
