//! Silhouette trend: mean shortest-path distance over node pairs of the
//! simple undirected view of a cascade.
//!
//! Pairs are restricted to the undirected component holding the root, which
//! is the whole cascade unless the input referenced parents that never
//! connect back to the original post.

use std::collections::VecDeque;

use rand::seq::index;

use crate::cascade::{Adjacency, CascadeGraph};
use crate::{parallel, seed};

const SOURCES_PER_TASK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Trend {
    pub value: f64,
    /// Estimated from sampled BFS sources rather than all pairs.
    pub sampled: bool,
    /// Fewer than two nodes; `value` is 0.
    pub degenerate: bool,
}

struct Bfs {
    dist: Vec<u32>,
    queue: VecDeque<u32>,
}

impl Bfs {
    fn new(n: usize) -> Self {
        Self {
            dist: vec![u32::MAX; n],
            queue: VecDeque::with_capacity(n),
        }
    }

    /// Sum of distances from `source` to every node it reaches, and the
    /// list of visited nodes (for resetting).
    fn run(&mut self, adj: &Adjacency, source: u32, visited: &mut Vec<u32>) -> u64 {
        visited.clear();
        self.dist[source as usize] = 0;
        self.queue.push_back(source);
        visited.push(source);
        let mut total = 0u64;
        while let Some(u) = self.queue.pop_front() {
            let du = self.dist[u as usize];
            total += u64::from(du);
            for &v in adj.neighbors(u as usize) {
                if self.dist[v as usize] == u32::MAX {
                    self.dist[v as usize] = du + 1;
                    self.queue.push_back(v);
                    visited.push(v);
                }
            }
        }
        total
    }

    fn reset(&mut self, visited: &[u32]) {
        for &v in visited {
            self.dist[v as usize] = u32::MAX;
        }
    }
}

fn root_component(adj: &Adjacency, root: usize) -> Vec<u32> {
    let mut bfs = Bfs::new(adj.node_count());
    let mut visited = Vec::new();
    bfs.run(adj, root as u32, &mut visited);
    visited.sort_unstable();
    visited
}

/// Exact all-pairs mean distance over the root component.
pub fn wiener_exact(c: &CascadeGraph) -> Trend {
    let adj = c.undirected_adjacency();
    let component = root_component(&adj, c.root());
    mean_distance(&adj, &component, &component)
}

/// Mean distance from `sample_sources` uniformly chosen sources (without
/// replacement) to every other component node.
pub fn wiener_sampled(c: &CascadeGraph, sample_sources: usize, seed: u64) -> Trend {
    let adj = c.undirected_adjacency();
    let component = root_component(&adj, c.root());
    let k = sample_sources.clamp(1, component.len().max(1));
    let mut rng = seed::rng(seed, "wiener-sources", 0);
    let mut sources: Vec<u32> = index::sample(&mut rng, component.len(), k)
        .into_iter()
        .map(|i| component[i])
        .collect();
    sources.sort_unstable();
    let mut t = mean_distance(&adj, &component, &sources);
    t.sampled = !t.degenerate;
    t
}

fn mean_distance(adj: &Adjacency, component: &[u32], sources: &[u32]) -> Trend {
    let n = component.len();
    if n < 2 {
        return Trend {
            value: 0.0,
            sampled: false,
            degenerate: true,
        };
    }
    // integer sums per chunk, so the total is independent of scheduling
    let chunks: Vec<&[u32]> = sources.chunks(SOURCES_PER_TASK).collect();
    let total: u64 = parallel::map(&chunks, |chunk| {
        let mut bfs = Bfs::new(adj.node_count());
        let mut visited = Vec::with_capacity(n);
        let mut sum = 0u64;
        for &s in *chunk {
            sum += bfs.run(adj, s, &mut visited);
            bfs.reset(&visited);
        }
        sum
    })
    .into_iter()
    .sum();
    let pairs = sources.len() as f64 * (n - 1) as f64;
    Trend {
        value: total as f64 / pairs,
        sampled: false,
        degenerate: false,
    }
}

/// Exact when the root component has at most `exact_threshold` nodes,
/// sampled otherwise.
pub fn wiener_trend(
    c: &CascadeGraph,
    exact_threshold: usize,
    sample_sources: usize,
    seed: u64,
) -> Trend {
    // component size never exceeds node count, so small cascades skip the
    // component pass entirely
    if c.node_count() <= exact_threshold {
        return wiener_exact(c);
    }
    let adj = c.undirected_adjacency();
    let component = root_component(&adj, c.root());
    if component.len() <= exact_threshold {
        mean_distance(&adj, &component, &component)
    } else {
        wiener_sampled(c, sample_sources, seed)
    }
}
