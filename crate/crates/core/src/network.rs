//! Communication topology, round-robin slot schedule and packet loss.
//!
//! Only one agent transmits per step. The transmitter at global step `k` is
//! `slot_order[k mod n]`; its message reaches every neighbour in the union
//! graph unless the loss model drops it on that particular link.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric 0/1 adjacency with unit diagonal over a connected graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    adjacency: Vec<bool>,
}

impl Topology {
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::InvalidSize { n });
        }
        let mut adjacency = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidTopology(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, &a) in row.iter().enumerate() {
                match a {
                    0 => adjacency.push(false),
                    1 => adjacency.push(true),
                    other => {
                        return Err(Error::InvalidTopology(format!(
                            "entry ({i},{j}) is {other}, expected 0 or 1"
                        )))
                    }
                }
            }
        }
        let topology = Self { n, adjacency };
        topology.check()?;
        Ok(topology)
    }

    /// Builds from undirected edges; self-loops are implied.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize { n });
        }
        let mut adjacency = vec![false; n * n];
        for i in 0..n {
            adjacency[i * n + i] = true;
        }
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidTopology(format!(
                    "edge ({a},{b}) references an agent outside 0..{n}"
                )));
            }
            adjacency[a * n + b] = true;
            adjacency[b * n + a] = true;
        }
        let topology = Self { n, adjacency };
        topology.check()?;
        Ok(topology)
    }

    fn check(&self) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            if !self.linked(i, i) {
                return Err(Error::InvalidTopology(format!(
                    "diagonal entry ({i},{i}) must be 1"
                )));
            }
            for j in (i + 1)..n {
                if self.linked(i, j) != self.linked(j, i) {
                    return Err(Error::InvalidTopology(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for (j, seen_j) in seen.iter_mut().enumerate() {
                if !*seen_j && self.linked(i, j) {
                    *seen_j = true;
                    queue.push_back(j);
                }
            }
        }
        if let Some(lost) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidTopology(format!(
                "graph is not connected (agent {lost} unreachable from agent 0)"
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `a_ij`: agent `i` hears agent `j`.
    #[inline]
    pub fn linked(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.linked(i, j) as u8).collect())
            .collect()
    }

    /// Undirected edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.linked(i, j) {
                    edges.push((i, j));
                }
            }
        }
        edges
    }

    /// Whitespace-separated 0/1 matrix, one row per line.
    pub fn to_matrix_text(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(u8::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Edge-list text: an `n <count>` line followed by one `i j` line per edge.
    pub fn to_edge_list_text(&self) -> String {
        let mut out = format!("n {}\n", self.n);
        for (i, j) in self.edges() {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    pub fn parse_matrix_text(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in content_lines(text) {
            let row = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<u8>().map_err(|_| {
                        Error::InvalidTopology(format!("line {lineno}: `{t}` is not 0 or 1"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    pub fn parse_edge_list_text(text: &str) -> Result<Self> {
        let mut lines = content_lines(text);
        let (lineno, header) = lines
            .next()
            .ok_or_else(|| Error::InvalidTopology("edge list is empty".into()))?;
        let n = header
            .strip_prefix('n')
            .and_then(|rest| rest.trim().parse::<usize>().ok())
            .ok_or_else(|| {
                Error::InvalidTopology(format!("line {lineno}: expected `n <agent count>`"))
            })?;
        let mut edges = Vec::new();
        for (lineno, line) in lines {
            let ids: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::InvalidTopology(format!("line {lineno}: bad agent index")))?;
            match ids.as_slice() {
                [a, b] => edges.push((*a, *b)),
                _ => {
                    return Err(Error::InvalidTopology(format!(
                        "line {lineno}: expected two agent indices"
                    )))
                }
            }
        }
        Self::from_edges(n, &edges)
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// All-ones adjacency.
pub fn build_complete(n: usize) -> Result<Topology> {
    if n < 2 {
        return Err(Error::InvalidSize { n });
    }
    Ok(Topology {
        n,
        adjacency: vec![true; n * n],
    })
}

/// Tridiagonal adjacency: each agent hears itself and its chain neighbours.
pub fn build_chain(n: usize) -> Result<Topology> {
    if n < 2 {
        return Err(Error::InvalidSize { n });
    }
    let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
    Topology::from_edges(n, &edges)
}

/// Row sums of the adjacency, i.e. neighbour counts including self.
pub fn neighbor_counts(topology: &Topology) -> Vec<usize> {
    (0..topology.n)
        .map(|i| (0..topology.n).filter(|&j| topology.linked(i, j)).count())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    slot_order: Vec<usize>,
}

impl Schedule {
    /// Ascending agent order.
    pub fn round_robin(n: usize) -> Self {
        Self {
            slot_order: (0..n).collect(),
        }
    }

    pub fn with_order(slot_order: Vec<usize>) -> Result<Self> {
        let n = slot_order.len();
        let mut seen = vec![false; n];
        for &a in &slot_order {
            if a >= n || std::mem::replace(&mut seen[a], true) {
                return Err(Error::InvalidSchedule(format!(
                    "{slot_order:?} is not a permutation of 0..{n}"
                )));
            }
        }
        Ok(Self { slot_order })
    }

    pub fn n(&self) -> usize {
        self.slot_order.len()
    }

    pub fn cycle_length(&self) -> usize {
        self.slot_order.len()
    }

    pub fn slot_order(&self) -> &[usize] {
        &self.slot_order
    }

    #[inline]
    pub fn transmitter(&self, k: usize) -> usize {
        self.slot_order[k % self.slot_order.len()]
    }
}

/// Independent per-link message loss.
///
/// Each step draws from its own ChaCha stream keyed by `(seed, k)`, so the
/// drop pattern at step `k` does not depend on which steps were queried
/// before it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossModel {
    pub drop_probability: f64,
    #[serde(default)]
    pub seed: u64,
}

impl LossModel {
    pub fn new(drop_probability: f64, seed: u64) -> Result<Self> {
        let model = Self {
            drop_probability,
            seed,
        };
        model.check()?;
        Ok(model)
    }

    pub fn lossless() -> Self {
        Self {
            drop_probability: 0.0,
            seed: 0,
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return Err(Error::InvalidParameter {
                name: "drop_probability",
                value: self.drop_probability.to_string(),
                reason: "must lie in [0, 1]",
            });
        }
        Ok(())
    }

    fn step_rng(&self, k: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k as u64);
        rng
    }
}

/// Receivers of the message sent in step `k`, ascending.
///
/// The transmitter is included iff `self_update` is set, and is never
/// subject to loss: an agent cannot lose its own state. Every other
/// neighbour is dropped independently.
pub fn deliveries(
    topology: &Topology,
    schedule: &Schedule,
    loss: &LossModel,
    k: usize,
    self_update: bool,
) -> Vec<usize> {
    let mut out = Vec::with_capacity(topology.n);
    deliveries_into(topology, schedule, loss, k, self_update, &mut out);
    out
}

pub(crate) fn deliveries_into(
    topology: &Topology,
    schedule: &Schedule,
    loss: &LossModel,
    k: usize,
    self_update: bool,
    out: &mut Vec<usize>,
) {
    out.clear();
    let j = schedule.transmitter(k);
    let p = loss.drop_probability;
    let mut rng = (p > 0.0 && p < 1.0).then(|| loss.step_rng(k));
    for i in 0..topology.n {
        if !topology.linked(i, j) {
            continue;
        }
        if i == j {
            if self_update {
                out.push(i);
            }
            continue;
        }
        let dropped = match rng.as_mut() {
            Some(rng) => rng.random::<f64>() < p,
            None => p >= 1.0,
        };
        if !dropped {
            out.push(i);
        }
    }
}
