//! Synthetic cascades with known ground truth.
//!
//! Canonical silhouettes have closed-form metrics:
//!
//! | shape | silhouette | trend | fluctuation | branch |
//! |---|---|---|---|---|
//! | star | `1 x (N-1)` | `2 - 2/N` | `sqrt(2)(1 - 2/N)` | `sqrt(N)` |
//! | chain | `1^N` | `(N+1)/3` | `0` | |
//! | star with chain | `1 x (N-K-1) x 1^K` | | `sqrt(2+K)(1 - (2+K)/N)` | |
//! | double star | `1 x (N/2-1) x N/2` | | | `~ sqrt(N/2)` |
//!
//! The branching process grows a Galton-Watson tree with Poisson offspring
//! and then injects repeat, converge, reciprocal and self-loop retweets at
//! the requested rates.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::cascade::RetweetEvent;
use crate::error::{Error, Result};
use crate::fit::BimodalParams;
use crate::parallel;
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Star,
    Chain,
    StarWithChain {
        k: usize,
    },
    DoubleStar,
    BranchingProcess {
        offspring_mean: f64,
        #[serde(default)]
        p_rep: f64,
        #[serde(default)]
        p_conv: f64,
        #[serde(default)]
        p_rec: f64,
        #[serde(default)]
        p_loop: f64,
    },
}

impl Shape {
    pub fn name(&self) -> &'static str {
        match self {
            Shape::Star => "star",
            Shape::Chain => "chain",
            Shape::StarWithChain { .. } => "star_with_chain",
            Shape::DoubleStar => "double_star",
            Shape::BranchingProcess { .. } => "branching_process",
        }
    }
}

/// Target mass: a fixed value, a uniform integer range, or the integer part
/// of draws from a bimodal law truncated to `[min, max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MassSpec {
    Fixed(usize),
    Law {
        law: BimodalParams,
        min: usize,
        max: usize,
    },
    Range {
        min: usize,
        max: usize,
    },
}

/// Time-series shape of a synthetic growth curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Most users join right after the post.
    EarlySpike,
    /// Most users join near the end of the lifetime.
    LateSpike,
    /// Users join at a steady rate.
    Persist,
}

impl Profile {
    pub const ALL: [Profile; 3] = [Profile::EarlySpike, Profile::LateSpike, Profile::Persist];

    /// Relative join time in `[0, 1]`.
    fn draw(self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random();
        match self {
            Profile::EarlySpike => u.powi(4),
            Profile::LateSpike => 1.0 - u.powi(4),
            Profile::Persist => u,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Timing {
    /// Every retweet happens an exponential waiting time after its parent.
    Cascade { scale: f64 },
    /// Join times drawn i.i.d. from a profile over `[0, lifetime]` seconds,
    /// handed out in breadth-first order so parents precede children.
    Profile { profile: Profile, lifetime: f64 },
}

impl Default for Timing {
    fn default() -> Self {
        Timing::Cascade { scale: 60.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub shape: Shape,
    pub n: MassSpec,
    #[serde(default)]
    pub timing: Timing,
}

impl GeneratorSpec {
    pub fn new(shape: Shape, n: usize) -> Self {
        Self {
            shape,
            n: MassSpec::Fixed(n),
            timing: Timing::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if let Shape::BranchingProcess {
            offspring_mean,
            p_rep,
            p_conv,
            p_rec,
            p_loop,
        } = self.shape
        {
            for (name, p) in [
                ("p_rep", p_rep),
                ("p_conv", p_conv),
                ("p_rec", p_rec),
                ("p_loop", p_loop),
            ] {
                if !(0.0..=1.0).contains(&p) {
                    return bad(format!("{name} must lie in [0, 1], got {p}"));
                }
            }
            if !(offspring_mean.is_finite() && offspring_mean > 0.0) {
                return bad(format!(
                    "offspring_mean must be positive, got {offspring_mean}"
                ));
            }
        }
        match &self.n {
            MassSpec::Fixed(0) => return bad("mass must be at least 1".into()),
            MassSpec::Range { min, max } | MassSpec::Law { min, max, .. }
                if *min == 0 || min > max =>
            {
                return bad(format!("invalid mass range [{min}, {max}]"));
            }
            MassSpec::Law { law, min, .. } => {
                BimodalSampler::new(*law, *min as f64)?;
            }
            _ => {}
        }
        match self.timing {
            Timing::Cascade { scale } if scale.is_nan() || scale <= 0.0 => {
                return bad(format!("time scale must be positive, got {scale}"))
            }
            Timing::Profile { lifetime, .. } if lifetime.is_nan() || lifetime <= 0.0 => {
                return bad(format!("lifetime must be positive, got {lifetime}"))
            }
            _ => {}
        }
        let min_mass = match &self.n {
            MassSpec::Fixed(n) => *n,
            MassSpec::Range { min, .. } | MassSpec::Law { min, .. } => *min,
        };
        match self.shape {
            Shape::StarWithChain { k } if k + 1 >= min_mass => bad(format!(
                "star_with_chain needs K < N - 1, got K={k}, N={min_mass}"
            )),
            Shape::DoubleStar if min_mass < 4 => {
                bad(format!("double_star needs N >= 4, got {min_mass}"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationCounts {
    pub repeats: u64,
    pub converges: u64,
    pub reciprocals: u64,
    pub loops: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub cascade_id: String,
    pub shape: String,
    pub mass: usize,
    pub closed_form_trend: Option<f64>,
    pub closed_form_fluct: Option<f64>,
    pub closed_form_branch: Option<f64>,
    /// The branch value is an approximation (double star).
    pub branch_approximate: bool,
    pub label: String,
    pub mutations: MutationCounts,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedCascade {
    pub events: Vec<RetweetEvent>,
    pub truth: GroundTruth,
}

/// Closed-form `(trend, fluctuation, branch)` where one exists.
pub fn closed_forms(shape: &Shape, n: usize) -> (Option<f64>, Option<f64>, Option<f64>) {
    let nf = n as f64;
    if n < 2 {
        return (None, None, None);
    }
    match shape {
        Shape::Star | Shape::StarWithChain { k: 0 } => (
            Some(2.0 - 2.0 / nf),
            Some(2f64.sqrt() * (1.0 - 2.0 / nf)),
            Some(nf.sqrt()),
        ),
        Shape::Chain => (Some((nf + 1.0) / 3.0), Some(0.0), None),
        Shape::StarWithChain { k } => {
            let m = (2 + k) as f64;
            (None, Some(m.sqrt() * (1.0 - m / nf)), None)
        }
        Shape::DoubleStar => (None, None, Some((nf / 2.0).sqrt())),
        Shape::BranchingProcess { .. } => (None, None, None),
    }
}

/// Parent index of every non-root node; node 0 is the root.
fn topology(shape: &Shape, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Option<usize>>> {
    let mut parent = vec![None; n];
    match *shape {
        Shape::Star => (1..n).for_each(|v| parent[v] = Some(0)),
        Shape::Chain => (1..n).for_each(|v| parent[v] = Some(v - 1)),
        Shape::StarWithChain { k } => {
            if k + 1 >= n {
                return Err(Error::InvalidParameter(format!(
                    "star_with_chain needs K < N - 1, got K={k}, N={n}"
                )));
            }
            let leaves = n - k - 1;
            (1..=leaves).for_each(|v| parent[v] = Some(0));
            // chain hangs off the first leaf
            for (i, v) in (leaves + 1..n).enumerate() {
                parent[v] = Some(if i == 0 { 1 } else { v - 1 });
            }
        }
        Shape::DoubleStar => {
            if n < 4 {
                return Err(Error::InvalidParameter(format!(
                    "double_star needs N >= 4, got {n}"
                )));
            }
            let first = n / 2 - 1;
            (1..=first).for_each(|v| parent[v] = Some(0));
            (first + 1..n).for_each(|v| parent[v] = Some(1));
        }
        Shape::BranchingProcess { offspring_mean, .. } => {
            let poisson =
                Poisson::new(offspring_mean).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            let mut len = 1;
            let mut next = 0;
            while next < len && len < n {
                let kids = poisson.sample(rng) as usize;
                for _ in 0..kids.min(n - len) {
                    parent[len] = Some(next);
                    len += 1;
                }
                next += 1;
            }
            parent.truncate(len);
        }
    }
    Ok(parent)
}

fn draw_mass(spec: &MassSpec, rng: &mut ChaCha8Rng) -> Result<usize> {
    Ok(match spec {
        MassSpec::Fixed(n) => *n,
        MassSpec::Range { min, max } => rng.random_range(*min..=*max),
        MassSpec::Law { law, min, max } => {
            let sampler = BimodalSampler::new(*law, *min as f64)?;
            loop {
                let x = sampler.sample(rng).floor();
                if x <= *max as f64 {
                    break (x as usize).max(*min);
                }
            }
        }
    })
}

/// One cascade with id `cascade_id`, drawn from `rng`.
pub fn generate_with(
    spec: &GeneratorSpec,
    cascade_id: &str,
    label: &str,
    rng: &mut ChaCha8Rng,
) -> Result<GeneratedCascade> {
    spec.validate()?;
    let target = draw_mass(&spec.n, rng)?;
    let parent = topology(&spec.shape, target, rng)?;
    let n = parent.len();

    // join times; parents always precede children
    let mut times = vec![0.0f64; n];
    let waiting_scale = match spec.timing {
        Timing::Cascade { scale } => {
            let exp = Exp::new(1.0 / scale).expect("positive scale");
            for v in 1..n {
                let p = parent[v].expect("non-root has a parent");
                times[v] = times[p] + exp.sample(rng);
            }
            scale
        }
        Timing::Profile { profile, lifetime } => {
            let mut draws: Vec<f64> = (1..n).map(|_| profile.draw(rng) * lifetime).collect();
            draws.sort_by(f64::total_cmp);
            // nodes are created in breadth-first order for every shape
            for (v, t) in (1..n).zip(draws) {
                times[v] = t;
            }
            lifetime / 100.0
        }
    };
    let wait = Exp::new(1.0 / waiting_scale).expect("positive scale");

    let user = |v: usize| format!("u{v}");
    let mut events = Vec::with_capacity(n + n / 4);
    let mut push = |actor: usize, source: Option<usize>, t: f64| {
        let k = events.len();
        events.push(RetweetEvent {
            cascade_id: cascade_id.to_owned(),
            post_id: format!("{cascade_id}-{k}"),
            actor: user(actor),
            source: source.map(user),
            timestamp: t.floor() as i64,
        });
    };
    push(0, None, 0.0);
    for v in 1..n {
        push(v, parent[v], times[v]);
    }

    let mut mutations = MutationCounts::default();
    if let Shape::BranchingProcess {
        p_rep,
        p_conv,
        p_rec,
        p_loop,
        ..
    } = spec.shape
    {
        for v in 0..n {
            let tv = times[v];
            if rng.random_bool(p_loop) {
                push(v, Some(v), tv + wait.sample(rng));
                mutations.loops += 1;
            }
            let Some(p) = parent[v] else { continue };
            if rng.random_bool(p_rep) {
                push(v, Some(p), tv + wait.sample(rng));
                mutations.repeats += 1;
            }
            if rng.random_bool(p_rec) {
                push(p, Some(v), tv + wait.sample(rng));
                mutations.reciprocals += 1;
            }
            // any earlier node other than the parent; none of them can
            // already be linked to v
            if v >= 2 && rng.random_bool(p_conv) {
                let mut y = rng.random_range(0..v - 1);
                if y >= p {
                    y += 1;
                }
                push(v, Some(y), tv + wait.sample(rng));
                mutations.converges += 1;
            }
        }
    }

    let (trend, fluct, branch) = closed_forms(&spec.shape, n);
    Ok(GeneratedCascade {
        events,
        truth: GroundTruth {
            cascade_id: cascade_id.to_owned(),
            shape: spec.shape.name().to_owned(),
            mass: n,
            closed_form_trend: trend,
            closed_form_fluct: fluct,
            closed_form_branch: branch,
            branch_approximate: matches!(spec.shape, Shape::DoubleStar),
            label: label.to_owned(),
            mutations,
        },
    })
}

pub fn generate(spec: &GeneratorSpec, seed: u64) -> Result<GeneratedCascade> {
    let mut rng = seed::rng(seed, "cascade", 0);
    generate_with(spec, "0", spec.shape.name(), &mut rng)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusComponent {
    pub weight: f64,
    /// Group label written to the ground-truth sidecar; defaults to the shape.
    #[serde(default)]
    pub label: Option<String>,
    pub spec: GeneratorSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub cascades: usize,
    #[serde(default)]
    pub seed: u64,
    pub components: Vec<CorpusComponent>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    pub events: Vec<RetweetEvent>,
    pub truth: Vec<GroundTruth>,
}

impl CorpusSpec {
    pub fn single(spec: GeneratorSpec, cascades: usize, seed: u64) -> Self {
        Self {
            cascades,
            seed,
            components: vec![CorpusComponent {
                weight: 1.0,
                label: None,
                spec,
            }],
        }
    }
}

/// Cascade `i` gets id `i` and its own stream derived from `(seed, i)`, so
/// output is identical with or without parallelism.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Corpus> {
    if spec.components.is_empty() {
        return Err(Error::InvalidParameter("corpus has no components".into()));
    }
    let total: f64 = spec.components.iter().map(|c| c.weight).sum();
    if spec
        .components
        .iter()
        .any(|c| c.weight.is_nan() || c.weight < 0.0)
        || total.is_nan()
        || total <= 0.0
    {
        return Err(Error::InvalidParameter(
            "component weights must be non-negative with a positive sum".into(),
        ));
    }
    for c in &spec.components {
        c.spec.validate()?;
    }
    let cumulative: Vec<f64> = spec
        .components
        .iter()
        .scan(0.0, |acc, c| {
            *acc += c.weight / total;
            Some(*acc)
        })
        .collect();
    let generated = parallel::map_range(spec.cascades, |i| {
        let mut rng = seed::rng(spec.seed, "corpus", i as u64);
        let u: f64 = rng.random();
        let pick = cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(spec.components.len() - 1);
        let component = &spec.components[pick];
        let label = component
            .label
            .clone()
            .unwrap_or_else(|| component.spec.shape.name().to_owned());
        generate_with(&component.spec, &i.to_string(), &label, &mut rng)
    });
    let mut corpus = Corpus::default();
    for g in generated {
        let g = g?;
        corpus.events.extend(g.events);
        corpus.truth.push(g.truth);
    }
    Ok(corpus)
}

/// Exact sampler for the bimodal law restricted to `[x_min, inf)`, drawing
/// from its two components in proportion to their mass.
#[derive(Clone, Debug)]
pub struct BimodalSampler {
    law: BimodalParams,
    x_min: f64,
    power_weight: f64,
    stretched_weight: f64,
    gamma: Option<Gamma<f64>>,
    u_min: f64,
}

impl BimodalSampler {
    pub fn new(law: BimodalParams, x_min: f64) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_owned()));
        if x_min.is_nan() || x_min <= 0.0 {
            return bad("x_min must be positive");
        }
        if law.c1 < 0.0 || law.c2 < 0.0 {
            return bad("mixture coefficients must be non-negative");
        }
        if law.c1 > 0.0 && (law.alpha.is_nan() || law.alpha <= 1.0) {
            return bad("power-law term needs alpha > 1 to normalize");
        }
        if law.c2 > 0.0 && !(law.lambda > 0.0 && law.beta > 0.0) {
            return bad("stretched-exponential term needs lambda, beta > 0");
        }
        if law.x0 + x_min <= 0.0 {
            return bad("x_min + x0 must be positive");
        }
        let power_weight = if law.c1 > 0.0 {
            law.c1 * (x_min + law.x0).powf(1.0 - law.alpha) / (law.alpha - 1.0)
        } else {
            0.0
        };
        let (stretched_weight, gamma, u_min) = if law.c2 > 0.0 {
            // substitute u = lambda x^beta: the tail mass is an upper
            // incomplete gamma integral
            let shape = 1.0 / law.beta;
            let u_min = law.lambda * x_min.powf(law.beta);
            let upper = statrs::function::gamma::gamma_ur(shape, u_min)
                * statrs::function::gamma::gamma(shape);
            let w = law.c2 * law.lambda.powf(-shape) / law.beta * upper;
            let g = Gamma::new(shape, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            (w, Some(g), u_min)
        } else {
            (0.0, None, 0.0)
        };
        let total_weight = power_weight + stretched_weight;
        if total_weight.is_nan() || total_weight <= 0.0 {
            return bad("law has no mass above x_min");
        }
        Ok(Self {
            law,
            x_min,
            power_weight,
            stretched_weight,
            gamma,
            u_min,
        })
    }

    /// Normalization constant of the law on `[x_min, inf)`.
    pub fn total_mass(&self) -> f64 {
        self.power_weight + self.stretched_weight
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let pick: f64 = rng.random::<f64>() * self.total_mass();
        if pick < self.power_weight {
            let u: f64 = 1.0 - rng.random::<f64>();
            let shifted = self.x_min + self.law.x0;
            shifted * u.powf(-1.0 / (self.law.alpha - 1.0)) - self.law.x0
        } else {
            let g = self.gamma.as_ref().expect("stretched term present");
            loop {
                let u = g.sample(rng);
                if u >= self.u_min {
                    return (u / self.law.lambda)
                        .powf(1.0 / self.law.beta)
                        .max(self.x_min);
                }
            }
        }
    }

    pub fn sample_n(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = seed::rng(seed, "bimodal-sampler", 0);
        (0..n).map(|_| self.sample(&mut rng)).collect()
    }
}

/// Random recursive tree on `n` nodes: node `v` attaches to a uniformly
/// chosen earlier node. Returned as `(parent, child)` pairs.
pub fn random_tree_edges(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    (1..n).map(|v| (rng.random_range(0..v), v)).collect()
}

/// Events for a cascade whose topology is given by `(source, actor)` pairs
/// over users `u0..`, rooted at `u0`.
pub fn events_from_edges(cascade_id: &str, edges: &[(usize, usize)]) -> Vec<RetweetEvent> {
    let mut events = vec![RetweetEvent::original(
        cascade_id,
        &format!("{cascade_id}-r"),
        "u0",
        0,
    )];
    events.extend(edges.iter().enumerate().map(|(k, &(s, t))| {
        RetweetEvent::retweet(
            cascade_id,
            &format!("{cascade_id}-{k}"),
            &format!("u{t}"),
            &format!("u{s}"),
            k as i64 + 1,
        )
    }));
    events
}
