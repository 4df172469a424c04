use serde::{Deserialize, Serialize};

use super::coefficient_of_variation;
use crate::cascade::CascadeGraph;

/// Distinct out-neighbours per node, self-loops and multiplicity ignored.
pub fn out_degrees(c: &CascadeGraph) -> Vec<u64> {
    let mut k = vec![0u64; c.node_count()];
    for e in c.edges().iter().filter(|e| !e.is_loop()) {
        k[e.source as usize] += 1;
    }
    k
}

/// Distinct in-neighbours per node, self-loops and multiplicity ignored.
pub fn in_degrees(c: &CascadeGraph) -> Vec<u64> {
    let mut k = vec![0u64; c.node_count()];
    for e in c.edges().iter().filter(|e| !e.is_loop()) {
        k[e.target as usize] += 1;
    }
    k
}

fn degree_cv(degrees: Vec<u64>) -> f64 {
    let values: Vec<f64> = degrees.into_iter().map(|d| d as f64).collect();
    coefficient_of_variation(&values)
}

pub fn branch_deviation(c: &CascadeGraph) -> f64 {
    degree_cv(out_degrees(c))
}

pub fn converge_deviation(c: &CascadeGraph) -> f64 {
    degree_cv(in_degrees(c))
}

/// Ordered pairs `(u, v)`, `u != v`, whose reverse pair also exists.
pub fn reciprocal_edge_count(c: &CascadeGraph) -> u64 {
    c.edges()
        .iter()
        .filter(|e| !e.is_loop() && c.has_edge(e.target, e.source))
        .count() as u64
}

/// Reciprocal pairs over distinct ordered pairs (self-loops included in the
/// denominator).
pub fn reciprocity(c: &CascadeGraph) -> f64 {
    if c.edges().is_empty() {
        return 0.0;
    }
    reciprocal_edge_count(c) as f64 / c.edges().len() as f64
}

/// Nodes carrying a self-loop.
pub fn self_loop_count(c: &CascadeGraph) -> u64 {
    c.edges().iter().filter(|e| e.is_loop()).count() as u64
}

pub fn self_loop_ratio(c: &CascadeGraph) -> f64 {
    self_loop_count(c) as f64 / c.node_count() as f64
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DirectionFlags {
    pub has_converge: bool,
    pub has_reciprocal: bool,
    pub has_self_loop: bool,
}

impl DirectionFlags {
    pub fn any(&self) -> bool {
        self.has_converge || self.has_reciprocal || self.has_self_loop
    }

    /// `"none"`, or the set flags joined by `+` in the order
    /// converge, reciprocal, self_loop.
    pub fn combination_key(&self) -> String {
        let mut parts = Vec::with_capacity(3);
        if self.has_converge {
            parts.push("converge");
        }
        if self.has_reciprocal {
            parts.push("reciprocal");
        }
        if self.has_self_loop {
            parts.push("self_loop");
        }
        if parts.is_empty() {
            "none".to_owned()
        } else {
            parts.join("+")
        }
    }

    pub fn all_combinations() -> [DirectionFlags; 8] {
        std::array::from_fn(|i| DirectionFlags {
            has_converge: i & 1 != 0,
            has_reciprocal: i & 2 != 0,
            has_self_loop: i & 4 != 0,
        })
    }
}

pub fn direction_flags(c: &CascadeGraph) -> DirectionFlags {
    DirectionFlags {
        has_converge: in_degrees(c).iter().any(|&k| k >= 2),
        has_reciprocal: reciprocal_edge_count(c) >= 1,
        has_self_loop: self_loop_count(c) >= 1,
    }
}
