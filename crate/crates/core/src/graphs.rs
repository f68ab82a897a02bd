//! Unweighted graphs, test-case generation, and the exhaustive edge-overlap
//! oracle.
//!
//! Edge slots are the positions that are compared between two graphs: every
//! ordered pair `(i, j)` (self-edges included) for directed graphs and every
//! unordered pair `i < j` for undirected graphs.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::permutations::{factorial, kth_permutation, Permutation};
use crate::rng;

/// Default limit on `V` for the `V!` brute-force sweep.
pub const DEFAULT_BRUTE_FORCE_CAP: usize = 10;

/// Permutation indices handled per parallel work unit.
const BRUTE_FORCE_CHUNK: u64 = 5040;

/// Dense adjacency bit-matrix over `V` vertices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    vertices: usize,
    directed: bool,
    adjacency: Vec<bool>,
}

impl Graph {
    pub fn empty(vertices: usize, directed: bool) -> Self {
        Graph {
            vertices,
            directed,
            adjacency: vec![false; vertices * vertices],
        }
    }

    pub fn from_edges(vertices: usize, directed: bool, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Graph::empty(vertices, directed);
        for &(i, j) in edges {
            if i >= vertices || j >= vertices {
                return Err(Error::InvalidArgument(format!(
                    "edge ({i}, {j}) out of range for {vertices} vertices"
                )));
            }
            if !directed && i == j {
                return Err(Error::InvalidArgument(format!(
                    "undirected graphs cannot hold self-edge ({i}, {i})"
                )));
            }
            g.set(i, j, true);
        }
        Ok(g)
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.vertices + j]
    }

    /// Sets `(i, j)`, mirroring to `(j, i)` for undirected graphs.
    pub fn set(&mut self, i: usize, j: usize, present: bool) {
        let n = self.vertices;
        self.adjacency[i * n + j] = present;
        if !self.directed {
            self.adjacency[j * n + i] = present;
        }
    }

    /// Number of slots compared by [`edge_difference`].
    pub fn slot_count(&self) -> usize {
        slot_count(self.vertices, self.directed)
    }

    pub fn edge_count(&self) -> usize {
        self.slots().filter(|&(i, j)| self.has_edge(i, j)).count()
    }

    /// Iterates the admissible edge slots in row-major order.
    pub fn slots(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.vertices;
        let directed = self.directed;
        (0..n).flat_map(move |i| {
            let start = if directed { 0 } else { i + 1 };
            (start..n).map(move |j| (i, j))
        })
    }

    /// Adds isolated vertices until the graph has `vertices` vertices.
    pub fn padded(&self, vertices: usize) -> Graph {
        if vertices <= self.vertices {
            return self.clone();
        }
        let mut g = Graph::empty(vertices, self.directed);
        for i in 0..self.vertices {
            for j in 0..self.vertices {
                g.adjacency[i * vertices + j] = self.has_edge(i, j);
            }
        }
        g
    }

    /// Relabels vertex `i` as `perm(i)`.
    pub fn relabeled(&self, perm: &Permutation) -> Result<Graph> {
        if perm.len() != self.vertices {
            return Err(Error::DimensionMismatch {
                expected: self.vertices,
                actual: perm.len(),
            });
        }
        let mut g = Graph::empty(self.vertices, self.directed);
        for i in 0..self.vertices {
            for j in 0..self.vertices {
                if self.has_edge(i, j) {
                    g.adjacency[perm.apply(i) * self.vertices + perm.apply(j)] = true;
                }
            }
        }
        Ok(g)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Graph> {
        fs::read_to_string(path)?.parse()
    }

    fn check_comparable(&self, other: &Graph) -> Result<()> {
        if self.directed != other.directed {
            return Err(Error::DirectednessMismatch);
        }
        if self.vertices != other.vertices {
            return Err(Error::DimensionMismatch {
                expected: self.vertices,
                actual: other.vertices,
            });
        }
        Ok(())
    }
}

pub fn slot_count(vertices: usize, directed: bool) -> usize {
    if directed {
        vertices * vertices
    } else {
        vertices * vertices.saturating_sub(1) / 2
    }
}

/// Text format: a header line `V directed|undirected` followed by `V` rows
/// of `V` characters `0`/`1`, optionally separated by spaces.
impl FromStr for Graph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or(Error::GraphParse {
            line: 1,
            message: "missing header".into(),
        })?;
        let mut parts = header.split_whitespace();
        let bad_header = || Error::GraphParse {
            line: hline,
            message: format!("expected 'V directed|undirected', got '{header}'"),
        };
        let vertices: usize = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(bad_header)?;
        let directed = match parts.next() {
            Some("directed") => true,
            Some("undirected") => false,
            _ => return Err(bad_header()),
        };
        if parts.next().is_some() {
            return Err(bad_header());
        }

        let mut g = Graph::empty(vertices, directed);
        for i in 0..vertices {
            let (line, row) = lines.next().ok_or(Error::GraphParse {
                line: hline + i + 1,
                message: format!("expected {vertices} adjacency rows, found {i}"),
            })?;
            let row: String = row.split_whitespace().collect();
            if row.len() != vertices {
                return Err(Error::GraphParse {
                    line,
                    message: format!("row has {} entries, expected {vertices}", row.len()),
                });
            }
            for (j, c) in row.chars().enumerate() {
                g.adjacency[i * vertices + j] = match c {
                    '0' => false,
                    '1' => true,
                    other => {
                        return Err(Error::GraphParse {
                            line,
                            message: format!("unexpected character '{other}'"),
                        })
                    }
                };
            }
        }
        if let Some((line, _)) = lines.next() {
            return Err(Error::GraphParse {
                line,
                message: "trailing content after adjacency rows".into(),
            });
        }
        if !directed {
            for i in 0..vertices {
                if g.has_edge(i, i) {
                    return Err(Error::GraphParse {
                        line: hline + i + 1,
                        message: "undirected graph has a self-edge".into(),
                    });
                }
                for j in 0..i {
                    if g.has_edge(i, j) != g.has_edge(j, i) {
                        return Err(Error::GraphParse {
                            line: hline + i + 1,
                            message: format!("undirected adjacency not symmetric at ({i}, {j})"),
                        });
                    }
                }
            }
        }
        Ok(g)
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = if self.directed { "directed" } else { "undirected" };
        writeln!(f, "{} {kind}", self.vertices)?;
        for i in 0..self.vertices {
            for j in 0..self.vertices {
                f.write_str(if self.has_edge(i, j) { "1" } else { "0" })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Erdős–Rényi graph: each admissible slot is an edge with probability 1/2.
pub fn erdos_renyi(vertices: usize, directed: bool, seed: u64) -> Graph {
    erdos_renyi_with(vertices, directed, &mut rng::seeded(seed))
}

pub fn erdos_renyi_with(vertices: usize, directed: bool, rng: &mut impl rand::Rng) -> Graph {
    let mut g = Graph::empty(vertices, directed);
    let slots: Vec<_> = g.slots().collect();
    for (i, j) in slots {
        if rng.random::<bool>() {
            g.set(i, j, true);
        }
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deformation {
    Isomorphism,
    VerticalFlip,
    AddEdges,
    RemoveEdges,
    AddRemove,
}

impl Deformation {
    pub const ALL: [Deformation; 5] = [
        Deformation::Isomorphism,
        Deformation::VerticalFlip,
        Deformation::AddEdges,
        Deformation::RemoveEdges,
        Deformation::AddRemove,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Deformation::Isomorphism => "isomorphism",
            Deformation::VerticalFlip => "vertical_flip",
            Deformation::AddEdges => "add_edges",
            Deformation::RemoveEdges => "remove_edges",
            Deformation::AddRemove => "add_remove",
        }
    }
}

impl FromStr for Deformation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Deformation::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown deformation '{s}'")))
    }
}

/// Derives a test-case partner for `g`.
///
/// Edge additions and removals touch `V` slots each, or every available slot
/// when fewer than `V` exist.
pub fn deform(g: &Graph, kind: Deformation, seed: u64) -> Graph {
    deform_with(g, kind, &mut rng::seeded(seed))
}

pub fn deform_with(g: &Graph, kind: Deformation, rng: &mut impl rand::Rng) -> Graph {
    let v = g.vertices;
    match kind {
        Deformation::Isomorphism => g.clone(),
        Deformation::VerticalFlip => {
            let mut out = Graph::empty(v, g.directed);
            for i in 0..v {
                for j in 0..v {
                    out.adjacency[i * v + j] = g.has_edge(v - 1 - i, v - 1 - j);
                }
            }
            out
        }
        Deformation::AddEdges => {
            let mut out = g.clone();
            toggle_random(&mut out, g, false, v, rng);
            out
        }
        Deformation::RemoveEdges => {
            let mut out = g.clone();
            toggle_random(&mut out, g, true, v, rng);
            out
        }
        Deformation::AddRemove => {
            let mut out = g.clone();
            // both pools are read from `g`, so they are disjoint
            toggle_random(&mut out, g, false, v, rng);
            toggle_random(&mut out, g, true, v, rng);
            out
        }
    }
}

/// Flips up to `amount` uniformly chosen slots of `source` whose state is
/// `present`, writing into `out`.
fn toggle_random(
    out: &mut Graph,
    source: &Graph,
    present: bool,
    amount: usize,
    rng: &mut impl rand::Rng,
) {
    let pool: Vec<_> = source
        .slots()
        .filter(|&(i, j)| source.has_edge(i, j) == present)
        .collect();
    let amount = amount.min(pool.len());
    for idx in index::sample(rng, pool.len(), amount) {
        let (i, j) = pool[idx];
        out.set(i, j, !present);
    }
}

/// Counts slots `(i, j)` where `g1(i, j) != g2(perm(i), perm(j))`.
pub fn edge_difference(g1: &Graph, g2: &Graph, perm: &Permutation) -> Result<usize> {
    g1.check_comparable(g2)?;
    if perm.len() != g1.vertices {
        return Err(Error::DimensionMismatch {
            expected: g1.vertices,
            actual: perm.len(),
        });
    }
    Ok(difference_unchecked(g1, g2, perm.as_slice()))
}

#[inline]
pub(crate) fn difference_unchecked(g1: &Graph, g2: &Graph, perm: &[usize]) -> usize {
    let n = g1.vertices;
    let a = &g1.adjacency;
    let b = &g2.adjacency;
    let mut count = 0;
    for i in 0..n {
        let row_a = &a[i * n..(i + 1) * n];
        let row_b = &b[perm[i] * n..(perm[i] + 1) * n];
        let start = if g1.directed { 0 } else { i + 1 };
        for j in start..n {
            count += (row_a[j] != row_b[perm[j]]) as usize;
        }
    }
    count
}

/// Result of the exhaustive search: best relabeling of `g2` onto `g1` and
/// the number of mismatched slots under it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BestAlignment {
    pub permutation: Permutation,
    pub index: u64,
    pub difference: usize,
    pub slots: usize,
}

impl BestAlignment {
    pub fn similarity(&self) -> f64 {
        if self.slots == 0 {
            1.0
        } else {
            1.0 - self.difference as f64 / self.slots as f64
        }
    }
}

pub fn brute_force_best(g1: &Graph, g2: &Graph) -> Result<BestAlignment> {
    brute_force_best_capped(g1, g2, DEFAULT_BRUTE_FORCE_CAP)
}

/// Minimises [`edge_difference`] over all `V!` permutations. Unequal graphs
/// are padded with isolated vertices first; ties go to the lowest
/// lexicographic index.
pub fn brute_force_best_capped(g1: &Graph, g2: &Graph, cap: usize) -> Result<BestAlignment> {
    if g1.directed != g2.directed {
        return Err(Error::DirectednessMismatch);
    }
    let v = g1.vertices.max(g2.vertices);
    if v > cap {
        return Err(Error::BruteForceCap { vertices: v, cap });
    }
    let (g1, g2) = (g1.padded(v), g2.padded(v));
    let total = factorial(v)?;
    let chunks = total.div_ceil(BRUTE_FORCE_CHUNK);
    let (difference, index) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * BRUTE_FORCE_CHUNK;
            let end = (start + BRUTE_FORCE_CHUNK).min(total);
            let mut perm = kth_permutation(v, start).expect("start < V!");
            let mut best = (usize::MAX, start);
            for k in start..end {
                let d = difference_unchecked(&g1, &g2, perm.as_slice());
                if d < best.0 {
                    best = (d, k);
                }
                perm.advance();
            }
            best
        })
        .min()
        .unwrap_or((0, 0));
    Ok(BestAlignment {
        permutation: kth_permutation(v, index)?,
        index,
        difference,
        slots: g1.slot_count(),
    })
}

/// `1 - d_min / N_slots`; symmetric and equal to 1 for identical graphs.
pub fn similarity(g1: &Graph, g2: &Graph) -> Result<f64> {
    Ok(brute_force_best(g1, g2)?.similarity())
}
