//! Cascade graph model and reconstruction from retweet event streams.
//!
//! An edge `(u, v)` means user `v` retweeted a post of user `u`. Repeated
//! retweets along the same pair accumulate into the edge weight. Node 0 of
//! every [`CascadeGraph`] is the original poster; the remaining nodes are
//! ordered by user identifier so that reconstruction does not depend on event
//! order.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetweetEvent {
    pub cascade_id: String,
    pub post_id: String,
    pub actor: String,
    /// The retweeted user; `None` for the original post.
    pub source: Option<String>,
    pub timestamp: i64,
}

impl RetweetEvent {
    pub fn original(cascade_id: &str, post_id: &str, actor: &str, timestamp: i64) -> Self {
        Self {
            cascade_id: cascade_id.to_owned(),
            post_id: post_id.to_owned(),
            actor: actor.to_owned(),
            source: None,
            timestamp,
        }
    }

    pub fn retweet(
        cascade_id: &str,
        post_id: &str,
        actor: &str,
        source: &str,
        timestamp: i64,
    ) -> Self {
        Self {
            cascade_id: cascade_id.to_owned(),
            post_id: post_id.to_owned(),
            actor: actor.to_owned(),
            source: Some(source.to_owned()),
            timestamp,
        }
    }

    pub fn is_original(&self) -> bool {
        self.source.is_none()
    }
}

/// Directed edge `source -> target` with multiplicity `weight >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub source: u32,
    pub target: u32,
    pub weight: u32,
}

impl Edge {
    pub fn is_loop(&self) -> bool {
        self.source == self.target
    }
}

/// Compressed adjacency lists.
#[derive(Clone, Debug)]
pub struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Adjacency {
    fn from_pairs(n: usize, pairs: &mut [(u32, u32)]) -> Self {
        pairs.sort_unstable();
        let mut offsets = vec![0usize; n + 1];
        for &(s, _) in pairs.iter() {
            offsets[s as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets = pairs.iter().map(|&(_, t)| t).collect();
        Self { offsets, targets }
    }

    pub fn neighbors(&self, node: usize) -> &[u32] {
        &self.targets[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// One reconstructed cascade. Immutable once built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CascadeGraph {
    cascade_id: String,
    users: Vec<String>,
    event_times: Vec<i64>,
    edges: Vec<Edge>,
    post_count: u64,
}

impl CascadeGraph {
    /// Assembles a graph from parts. Node 0 is the root. Edges may arrive in
    /// any order but each ordered pair must appear once.
    pub fn new(
        cascade_id: impl Into<String>,
        users: Vec<String>,
        event_times: Vec<i64>,
        mut edges: Vec<Edge>,
    ) -> Result<Self> {
        let cascade_id = cascade_id.into();
        let invalid = |message: String| Error::InvalidCascade {
            cascade_id: cascade_id.clone(),
            message,
        };
        if users.is_empty() {
            return Err(invalid("cascade has no root".into()));
        }
        if users.len() != event_times.len() {
            return Err(invalid(format!(
                "{} users but {} event times",
                users.len(),
                event_times.len()
            )));
        }
        if users.len() > u32::MAX as usize {
            return Err(invalid("too many users".into()));
        }
        let mut seen = HashSet::with_capacity(users.len());
        for u in &users {
            if !seen.insert(u.as_str()) {
                return Err(invalid(format!("duplicate user '{u}'")));
            }
        }
        let n = users.len() as u32;
        edges.sort_unstable();
        let mut retweets = 0u64;
        for (i, e) in edges.iter().enumerate() {
            if e.source >= n || e.target >= n {
                return Err(invalid(format!(
                    "edge ({}, {}) references a missing node",
                    e.source, e.target
                )));
            }
            if e.weight == 0 {
                return Err(invalid("edge weight must be at least 1".into()));
            }
            if i > 0 && edges[i - 1].source == e.source && edges[i - 1].target == e.target {
                return Err(invalid(format!(
                    "edge ({}, {}) listed twice",
                    e.source, e.target
                )));
            }
            retweets += u64::from(e.weight);
        }
        Ok(Self {
            cascade_id,
            users,
            event_times,
            edges,
            post_count: 1 + retweets,
        })
    }

    pub fn cascade_id(&self) -> &str {
        &self.cascade_id
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn node_count(&self) -> usize {
        self.users.len()
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn event_times(&self) -> &[i64] {
        &self.event_times
    }

    pub fn root_time(&self) -> i64 {
        self.event_times[0]
    }

    /// Distinct ordered pairs, sorted by `(source, target)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Original post plus every retweet.
    pub fn post_count(&self) -> u64 {
        self.post_count
    }

    pub fn retweet_count(&self) -> u64 {
        self.post_count - 1
    }

    pub fn has_edge(&self, source: u32, target: u32) -> bool {
        self.edges
            .binary_search_by(|e| (e.source, e.target).cmp(&(source, target)))
            .is_ok()
    }

    /// Directed out-neighbours, self-loops removed.
    pub fn out_adjacency(&self) -> Adjacency {
        let mut pairs: Vec<(u32, u32)> = self
            .edges
            .iter()
            .filter(|e| !e.is_loop())
            .map(|e| (e.source, e.target))
            .collect();
        Adjacency::from_pairs(self.node_count(), &mut pairs)
    }

    /// Simple undirected view: no loops, no multi-edges.
    pub fn undirected_adjacency(&self) -> Adjacency {
        let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(self.edges.len() * 2);
        for e in self.edges.iter().filter(|e| !e.is_loop()) {
            pairs.push((e.source, e.target));
            pairs.push((e.target, e.source));
        }
        pairs.sort_unstable();
        pairs.dedup();
        Adjacency::from_pairs(self.node_count(), &mut pairs)
    }
}

/// Why an input line did not make it into a cascade as-is.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectKind {
    /// Only this event was dropped.
    Event,
    /// The whole cascade was dropped.
    Cascade,
    /// Nothing dropped; the input looked suspicious.
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line: u64,
    pub kind: RejectKind,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct BuildReport {
    pub cascades: Vec<CascadeGraph>,
    pub rejects: Vec<Reject>,
    pub accepted_events: u64,
    pub rejected_events: u64,
}

#[derive(Default)]
struct PartialCascade {
    first_line: u64,
    roots: Vec<(u64, u32, i64)>,
    node_ids: HashMap<String, u32>,
    names: Vec<String>,
    actor_time: Vec<Option<i64>>,
    // earliest (time, line) at which a node was referenced only as a source
    source_ref: Vec<Option<(i64, u64)>>,
    edges: HashMap<(u32, u32), u32>,
    post_ids: HashSet<String>,
    events: u64,
}

impl PartialCascade {
    fn intern(&mut self, user: &str) -> u32 {
        if let Some(&id) = self.node_ids.get(user) {
            return id;
        }
        let id = self.names.len() as u32;
        self.node_ids.insert(user.to_owned(), id);
        self.names.push(user.to_owned());
        self.actor_time.push(None);
        self.source_ref.push(None);
        id
    }

    fn finish(self, cascade_id: String, report: &mut BuildReport) {
        match self.roots.len() {
            0 => {
                report.rejects.push(Reject {
                    line: self.first_line,
                    kind: RejectKind::Cascade,
                    reason: format!("cascade {cascade_id}: no root event"),
                });
                report.rejected_events += self.events;
                return;
            }
            1 => {}
            _ => {
                for &(line, _, _) in &self.roots {
                    report.rejects.push(Reject {
                        line,
                        kind: RejectKind::Cascade,
                        reason: format!("cascade {cascade_id}: multiple root events"),
                    });
                }
                report.rejected_events += self.events;
                return;
            }
        }
        let (_, root, root_time) = self.roots[0];
        let n = self.names.len();

        // root first, then by user id
        let mut order: Vec<u32> = (0..n as u32).filter(|&i| i != root).collect();
        order.sort_unstable_by(|&a, &b| self.names[a as usize].cmp(&self.names[b as usize]));
        order.insert(0, root);
        let mut remap = vec![0u32; n];
        for (new, &old) in order.iter().enumerate() {
            remap[old as usize] = new as u32;
        }

        let mut users = Vec::with_capacity(n);
        let mut times = Vec::with_capacity(n);
        let mut dangling = Vec::new();
        for &old in &order {
            let old = old as usize;
            let t = if old == root as usize {
                root_time
            } else if let Some(t) = self.actor_time[old] {
                t
            } else {
                let (t, line) = self.source_ref[old].expect("interned node was referenced");
                dangling.push((line, self.names[old].clone()));
                t
            };
            users.push(self.names[old].clone());
            times.push(t);
        }
        dangling.sort();
        for (line, user) in dangling {
            report.rejects.push(Reject {
                line,
                kind: RejectKind::Warning,
                reason: format!(
                    "cascade {cascade_id}: source user {user} never posts; kept as dangling parent"
                ),
            });
        }

        let edges = self
            .edges
            .into_iter()
            .map(|((s, t), w)| Edge {
                source: remap[s as usize],
                target: remap[t as usize],
                weight: w,
            })
            .collect();
        let graph = CascadeGraph::new(cascade_id, users, times, edges)
            .expect("builder maintains graph invariants");
        report.accepted_events += self.events;
        report.cascades.push(graph);
    }
}

/// Streaming reconstruction keyed on `cascade_id`. Events from different
/// cascades may interleave; cascades are finalized by [`CascadeBuilder::finish`].
#[derive(Default)]
pub struct CascadeBuilder {
    open: HashMap<String, PartialCascade>,
    report: BuildReport,
}

impl CascadeBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds one event read from input line `line` (1-based).
    pub fn push(&mut self, line: u64, event: RetweetEvent) {
        let cascade = self
            .open
            .entry(event.cascade_id.clone())
            .or_insert_with(|| PartialCascade {
                first_line: line,
                ..Default::default()
            });
        if cascade.post_ids.contains(&event.post_id) {
            self.report.rejects.push(Reject {
                line,
                kind: RejectKind::Event,
                reason: format!(
                    "cascade {}: duplicate post_id {}",
                    event.cascade_id, event.post_id
                ),
            });
            self.report.rejected_events += 1;
            return;
        }
        cascade.post_ids.insert(event.post_id);
        cascade.events += 1;

        let actor = cascade.intern(&event.actor);
        let t = event.timestamp;
        let slot = &mut cascade.actor_time[actor as usize];
        *slot = Some(slot.map_or(t, |old| old.min(t)));

        match event.source {
            None => cascade.roots.push((line, actor, t)),
            Some(source) => {
                let src = cascade.intern(&source);
                let r = &mut cascade.source_ref[src as usize];
                match r {
                    Some((old, _)) if *old <= t => {}
                    _ => *r = Some((t, line)),
                }
                *cascade.edges.entry((src, actor)).or_insert(0) += 1;
            }
        }
    }

    pub fn open_cascades(&self) -> usize {
        self.open.len()
    }

    /// Finalizes every cascade, ordered by [`cascade_id_order`].
    pub fn finish(mut self) -> BuildReport {
        let mut pending: Vec<(String, PartialCascade)> = self.open.drain().collect();
        pending.sort_by(|a, b| cascade_id_order(&a.0, &b.0));
        for (id, partial) in pending {
            partial.finish(id, &mut self.report);
        }
        self.report.rejects.sort_by_key(|r| r.line);
        self.report
    }
}

/// Builds every cascade in an in-memory event sequence; line numbers are
/// 1-based positions in the slice.
pub fn build_cascades<I>(events: I) -> BuildReport
where
    I: IntoIterator<Item = RetweetEvent>,
{
    let mut builder = CascadeBuilder::new();
    for (i, e) in events.into_iter().enumerate() {
        builder.push(i as u64 + 1, e);
    }
    builder.finish()
}

/// Numeric ids compare numerically, everything else lexicographically;
/// numeric ids sort before non-numeric ones.
pub fn cascade_id_order(a: &str, b: &str) -> std::cmp::Ordering {
    let numeric = |s: &str| !s.is_empty() && s.bytes().all(|c| c.is_ascii_digit());
    match (numeric(a), numeric(b)) {
        (true, true) => {
            let (ta, tb) = (a.trim_start_matches('0'), b.trim_start_matches('0'));
            ta.len()
                .cmp(&tb.len())
                .then_with(|| ta.cmp(tb))
                .then_with(|| a.cmp(b))
        }
        (true, false) => std::cmp::Ordering::Less,
        (false, true) => std::cmp::Ordering::Greater,
        (false, false) => a.cmp(b),
    }
}

/// Breadth-first depth of every node from the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepthAssignment {
    depths: Vec<Option<u32>>,
    length: u32,
}

impl DepthAssignment {
    /// `None` marks a node with no directed path from the root.
    pub fn depth(&self, node: usize) -> Option<u32> {
        self.depths[node]
    }

    pub fn depths(&self) -> &[Option<u32>] {
        &self.depths
    }

    /// Largest finite depth.
    pub fn length(&self) -> u32 {
        self.length
    }

    pub fn reachable_count(&self) -> usize {
        self.depths.iter().filter(|d| d.is_some()).count()
    }

    /// Node count at each depth `0..=length`.
    pub fn breadth_by_depth(&self) -> Vec<u64> {
        let mut b = vec![0u64; self.length as usize + 1];
        for d in self.depths.iter().flatten() {
            b[*d as usize] += 1;
        }
        b
    }
}

pub fn compute_depths(c: &CascadeGraph) -> DepthAssignment {
    let adj = c.out_adjacency();
    let mut depths = vec![None; c.node_count()];
    let mut queue = VecDeque::new();
    depths[c.root()] = Some(0u32);
    queue.push_back(c.root());
    let mut length = 0;
    while let Some(u) = queue.pop_front() {
        let du = depths[u].expect("queued nodes have a depth");
        length = length.max(du);
        for &v in adj.neighbors(u) {
            let v = v as usize;
            if depths[v].is_none() {
                depths[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    DepthAssignment { depths, length }
}

/// New-user counts per time bucket, measured from the original post.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthSeries {
    pub cascade_id: String,
    pub counts: Vec<u64>,
    /// Seconds between the original post and the last newly infected user.
    pub lifetime: i64,
    pub time_unit: i64,
    /// Set when every user joined at the same instant.
    pub degenerate: bool,
}

impl GrowthSeries {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Buckets each node's infection time into `[k * time_unit, (k+1) * time_unit)`
/// relative to the root post. Infection times before the root post count
/// in bucket 0.
pub fn growth_series(c: &CascadeGraph, time_unit: i64) -> Result<GrowthSeries> {
    if time_unit <= 0 {
        return Err(Error::InvalidParameter(format!(
            "time unit must be positive, got {time_unit}"
        )));
    }
    let t0 = c.root_time();
    let rel: Vec<i64> = c.event_times().iter().map(|&t| (t - t0).max(0)).collect();
    let lifetime = rel.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0u64; (lifetime / time_unit) as usize + 1];
    for r in rel {
        counts[(r / time_unit) as usize] += 1;
    }
    Ok(GrowthSeries {
        cascade_id: c.cascade_id().to_owned(),
        counts,
        lifetime,
        time_unit,
        degenerate: lifetime == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(actor: &str, source: Option<&str>, t: i64, post: &str) -> RetweetEvent {
        RetweetEvent {
            cascade_id: "1".into(),
            post_id: post.into(),
            actor: actor.into(),
            source: source.map(str::to_owned),
            timestamp: t,
        }
    }

    #[test]
    fn singleton_cascade() {
        let r = build_cascades([ev("a", None, 0, "p0")]);
        assert!(r.rejects.is_empty());
        let c = &r.cascades[0];
        assert_eq!(c.node_count(), 1);
        assert!(c.edges().is_empty());
        assert_eq!(c.post_count(), 1);
    }

    #[test]
    fn repeated_retweets_accumulate_weight() {
        let r = build_cascades([
            ev("a", None, 0, "p0"),
            ev("b", Some("a"), 1, "p1"),
            ev("b", Some("a"), 2, "p2"),
        ]);
        let c = &r.cascades[0];
        assert_eq!(c.node_count(), 2);
        assert_eq!(
            c.edges(),
            &[Edge {
                source: 0,
                target: 1,
                weight: 2
            }]
        );
        assert_eq!(c.post_count(), 3);
        assert_eq!(c.event_times(), &[0, 1]);
    }

    #[test]
    fn duplicate_post_id_rejects_only_the_event() {
        let r = build_cascades([
            ev("a", None, 0, "p0"),
            ev("b", Some("a"), 1, "p1"),
            ev("c", Some("a"), 2, "p1"),
        ]);
        assert_eq!(r.cascades[0].node_count(), 2);
        assert_eq!(r.rejects.len(), 1);
        assert_eq!(r.rejects[0].line, 3);
        assert_eq!(r.rejects[0].kind, RejectKind::Event);
        assert_eq!(r.rejected_events, 1);
    }

    #[test]
    fn multiple_roots_reject_the_cascade() {
        let r = build_cascades([
            ev("a", None, 0, "p0"),
            ev("b", None, 1, "p1"),
            ev("c", Some("a"), 2, "p2"),
        ]);
        assert!(r.cascades.is_empty());
        assert_eq!(r.rejects.len(), 2);
        assert!(r.rejects.iter().all(|x| x.kind == RejectKind::Cascade));
        assert_eq!(r.rejected_events, 3);
    }

    #[test]
    fn missing_root_rejects_the_cascade() {
        let r = build_cascades([ev("b", Some("a"), 1, "p1")]);
        assert!(r.cascades.is_empty());
        assert_eq!(r.rejects[0].reason, "cascade 1: no root event");
    }

    #[test]
    fn dangling_parent_is_kept_with_warning() {
        let r = build_cascades([
            ev("a", None, 0, "p0"),
            ev("b", Some("a"), 5, "p1"),
            ev("c", Some("x"), 9, "p2"),
        ]);
        let c = &r.cascades[0];
        assert_eq!(c.users(), &["a", "b", "c", "x"]);
        assert_eq!(c.event_times()[3], 9);
        assert_eq!(r.rejects.len(), 1);
        assert_eq!(r.rejects[0].kind, RejectKind::Warning);
        assert_eq!(r.rejects[0].line, 3);
        let d = compute_depths(c);
        assert_eq!(d.depth(3), None);
        assert_eq!(d.depth(2), None);
    }

    #[test]
    fn infection_time_is_earliest_participation() {
        let r = build_cascades([
            ev("c", Some("b"), 40, "p3"),
            ev("b", Some("a"), 30, "p2"),
            ev("a", None, 10, "p0"),
            ev("b", Some("a"), 20, "p1"),
        ]);
        assert_eq!(r.cascades[0].event_times(), &[10, 20, 40]);
    }

    #[test]
    fn root_time_is_the_original_post() {
        // root retweets itself before its own post; still anchored to the post
        let r = build_cascades([ev("a", Some("a"), 3, "p1"), ev("a", None, 7, "p0")]);
        assert_eq!(r.cascades[0].root_time(), 7);
    }

    #[test]
    fn depths_of_star_chain_and_converge() {
        let mut events = vec![ev("r", None, 0, "p0")];
        for i in 0..9 {
            events.push(ev(&format!("l{i}"), Some("r"), 1, &format!("s{i}")));
        }
        let c = &build_cascades(events).cascades[0];
        let d = compute_depths(c);
        assert_eq!(d.length(), 1);
        assert_eq!(d.breadth_by_depth(), vec![1, 9]);

        let chain: Vec<_> = ["a", "b", "c", "d", "e"]
            .windows(2)
            .enumerate()
            .map(|(i, w)| ev(w[1], Some(w[0]), i as i64 + 1, &format!("c{i}")))
            .chain([ev("a", None, 0, "c-root")])
            .collect();
        let c = &build_cascades(chain).cascades[0];
        let d = compute_depths(c);
        assert_eq!(d.length(), 4);
        assert_eq!(d.depths(), &[Some(0), Some(1), Some(2), Some(3), Some(4)]);

        // x at depth 1 also retweets y at depth 3
        let c = &build_cascades([
            ev("r", None, 0, "0"),
            ev("x", Some("r"), 1, "1"),
            ev("p", Some("r"), 1, "2"),
            ev("q", Some("p"), 2, "3"),
            ev("y", Some("q"), 3, "4"),
            ev("x", Some("y"), 4, "5"),
        ])
        .cascades[0];
        let d = compute_depths(c);
        let x = c.users().iter().position(|u| u == "x").unwrap();
        assert_eq!(d.depth(x), Some(1));
    }

    #[test]
    fn self_loops_do_not_affect_depth() {
        let c = &build_cascades([
            ev("r", None, 0, "0"),
            ev("r", Some("r"), 1, "1"),
            ev("a", Some("r"), 2, "2"),
            ev("a", Some("a"), 3, "3"),
        ])
        .cascades[0];
        let d = compute_depths(c);
        assert_eq!(d.depths(), &[Some(0), Some(1)]);
    }

    #[test]
    fn growth_series_buckets() {
        let c = &build_cascades([
            ev("r", None, 0, "0"),
            ev("a", Some("r"), 10, "1"),
            ev("b", Some("r"), 70, "2"),
            ev("c", Some("r"), 130, "3"),
        ])
        .cascades[0];
        let g = growth_series(c, 60).unwrap();
        assert_eq!(g.counts, vec![2, 1, 1]);
        assert_eq!(g.lifetime, 130);
        assert!(!g.degenerate);

        let c = &build_cascades([ev("r", None, 5, "0")]).cascades[0];
        let g = growth_series(c, 60).unwrap();
        assert_eq!(g.counts, vec![1]);
        assert_eq!(g.lifetime, 0);
        assert!(g.degenerate);

        assert!(growth_series(c, 0).is_err());
    }

    #[test]
    fn cascade_ids_sort_numerically() {
        let mut ids = vec!["10", "9", "b", "a", "011"];
        ids.sort_by(|a, b| cascade_id_order(a, b));
        assert_eq!(ids, vec!["9", "10", "011", "a", "b"]);
    }

    #[test]
    fn graph_constructor_validates() {
        let users = vec!["a".to_string(), "b".to_string()];
        let bad_weight = vec![Edge {
            source: 0,
            target: 1,
            weight: 0,
        }];
        assert!(CascadeGraph::new("x", users.clone(), vec![0, 1], bad_weight).is_err());
        let out_of_range = vec![Edge {
            source: 0,
            target: 2,
            weight: 1,
        }];
        assert!(CascadeGraph::new("x", users.clone(), vec![0, 1], out_of_range).is_err());
        assert!(CascadeGraph::new("x", vec![], vec![], vec![]).is_err());
        assert!(CascadeGraph::new("x", vec!["a".into(), "a".into()], vec![0, 0], vec![]).is_err());
    }
}
