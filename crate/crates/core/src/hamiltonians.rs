//! The diagonal problem operator and the hypercube mixer.

use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{difference_unchecked, Graph, DEFAULT_BRUTE_FORCE_CAP};
use crate::permutations::{factorial, kth_permutation, qubit_count};

pub const DEFAULT_MAX_QUBITS: u32 = 24;

const CACHE_MAGIC: &[u8; 4] = b"QCD1";
const DIAGONAL_CHUNK: u64 = 4096;
const MIXER_BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildLimits {
    pub brute_force_cap: usize,
    pub max_qubits: u32,
}

impl Default for BuildLimits {
    fn default() -> Self {
        BuildLimits {
            brute_force_cap: DEFAULT_BRUTE_FORCE_CAP,
            max_qubits: DEFAULT_MAX_QUBITS,
        }
    }
}

/// How edge differences become diagonal entries.
///
/// `EdgeDifference` stores `d` for feasible strings and 0 for the tail, and is
/// minimised. `AlternatePenalty` stores `-d` and pads the tail with
/// `-N_slots`, and is maximised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    #[default]
    #[serde(alias = "edge")]
    EdgeDifference,
    #[serde(alias = "alternate")]
    AlternatePenalty,
}

impl CostMode {
    pub fn name(self) -> &'static str {
        match self {
            CostMode::EdgeDifference => "edge",
            CostMode::AlternatePenalty => "alternate",
        }
    }

    /// Factor turning a stored cost into a quantity to minimise.
    pub fn minimization_sign(self) -> f64 {
        match self {
            CostMode::EdgeDifference => 1.0,
            CostMode::AlternatePenalty => -1.0,
        }
    }

    fn to_byte(self) -> u8 {
        match self {
            CostMode::EdgeDifference => 0,
            CostMode::AlternatePenalty => 1,
        }
    }

    fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(CostMode::EdgeDifference),
            1 => Ok(CostMode::AlternatePenalty),
            other => Err(Error::CostCache(format!("unknown mode byte {other}"))),
        }
    }
}

impl FromStr for CostMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge" | "edge_difference" => Ok(CostMode::EdgeDifference),
            "alternate" | "alternate_penalty" => Ok(CostMode::AlternatePenalty),
            other => Err(Error::InvalidArgument(format!("unknown cost mode '{other}'"))),
        }
    }
}

/// Diagonal of the problem operator: one cost per basis state.
#[derive(Debug, Clone, PartialEq)]
pub struct CostDiagonal {
    values: Vec<f64>,
    qubits: u32,
    mode: CostMode,
}

impl CostDiagonal {
    pub fn new(values: Vec<f64>, mode: CostMode) -> Result<Self> {
        let len = values.len();
        if !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "diagonal length {len} is not a power of two"
            )));
        }
        Ok(CostDiagonal {
            values,
            qubits: len.trailing_zeros(),
            mode,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn qubits(&self) -> u32 {
        self.qubits
    }

    pub fn mode(&self) -> CostMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Writes the `QCD1` cache: magic, `q` as little-endian u32, mode byte,
    /// then `2^q` little-endian f64 values.
    pub fn write_cache(&self, mut w: impl Write) -> Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&self.qubits.to_le_bytes())?;
        w.write_all(&[self.mode.to_byte()])?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_cache(mut r: impl Read) -> Result<Self> {
        let mut header = [0u8; 9];
        r.read_exact(&mut header)?;
        if &header[..4] != CACHE_MAGIC {
            return Err(Error::CostCache("bad magic".into()));
        }
        let qubits = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if qubits > DEFAULT_MAX_QUBITS {
            return Err(Error::QubitCap {
                qubits,
                max: DEFAULT_MAX_QUBITS,
            });
        }
        let mode = CostMode::from_byte(header[8])?;
        let mut bytes = vec![0u8; 8usize << qubits];
        r.read_exact(&mut bytes)?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(CostDiagonal {
            values,
            qubits,
            mode,
        })
    }
}

pub fn build_cost_diagonal(g1: &Graph, g2: &Graph, mode: CostMode) -> Result<CostDiagonal> {
    build_cost_diagonal_with(g1, g2, mode, &BuildLimits::default())
}

/// Evaluates the edge-difference cost of every encoded permutation of the
/// larger graph's vertex set.
pub fn build_cost_diagonal_with(
    g1: &Graph,
    g2: &Graph,
    mode: CostMode,
    limits: &BuildLimits,
) -> Result<CostDiagonal> {
    if g1.is_directed() != g2.is_directed() {
        return Err(Error::DirectednessMismatch);
    }
    let v = g1.vertices().max(g2.vertices());
    if v > limits.brute_force_cap {
        return Err(Error::BruteForceCap {
            vertices: v,
            cap: limits.brute_force_cap,
        });
    }
    if v == 0 {
        return Err(Error::InvalidArgument("graphs have no vertices".into()));
    }
    let qubits = qubit_count(v)?.max(1);
    if qubits > limits.max_qubits {
        return Err(Error::QubitCap {
            qubits,
            max: limits.max_qubits,
        });
    }
    let (g1, g2) = (g1.padded(v), g2.padded(v));
    let feasible = factorial(v)?;
    let slots = g1.slot_count() as f64;
    let tail = match mode {
        CostMode::EdgeDifference => 0.0,
        CostMode::AlternatePenalty => -slots,
    };
    let sign = mode.minimization_sign();

    let mut values = vec![tail; 1usize << qubits];
    values[..feasible as usize]
        .par_chunks_mut(DIAGONAL_CHUNK as usize)
        .enumerate()
        .for_each(|(c, chunk)| {
            let mut perm = kth_permutation(v, c as u64 * DIAGONAL_CHUNK).expect("index < V!");
            for slot in chunk.iter_mut() {
                *slot = sign * difference_unchecked(&g1, &g2, perm.as_slice()) as f64;
                perm.advance();
            }
        });
    Ok(CostDiagonal {
        values,
        qubits,
        mode,
    })
}

/// Decides which basis states the mixer may connect.
pub trait FeasibilityMask: Sync {
    fn allows(&self, index: usize) -> bool;
}

impl<F: Fn(usize) -> bool + Sync> FeasibilityMask for F {
    fn allows(&self, index: usize) -> bool {
        self(index)
    }
}

/// Admits exactly the indices that encode a permutation (`index < limit`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeasibleIndices {
    pub limit: u64,
}

impl FeasibilityMask for FeasibleIndices {
    fn allows(&self, index: usize) -> bool {
        (index as u64) < self.limit
    }
}

/// Sum of single-qubit bit flips as a compressed-sparse-column 0/1 matrix.
///
/// The matrix is symmetric, so each column's entries are also that row's
/// entries; the kernels rely on this to run the product as a gather.
#[derive(Debug, Clone, PartialEq)]
pub struct MixerMatrix {
    qubits: u32,
    column_pointers: Vec<usize>,
    row_indices: Vec<u32>,
    values: Vec<f64>,
}

impl MixerMatrix {
    pub fn qubits(&self) -> u32 {
        self.qubits
    }

    pub fn dimension(&self) -> usize {
        1usize << self.qubits
    }

    pub fn nnz(&self) -> usize {
        self.row_indices.len()
    }

    pub fn column_pointers(&self) -> &[usize] {
        &self.column_pointers
    }

    pub fn row_indices(&self) -> &[u32] {
        &self.row_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row indices and values of column `c`.
    #[inline]
    pub fn column(&self, c: usize) -> (&[u32], &[f64]) {
        let range = self.column_pointers[c]..self.column_pointers[c + 1];
        (&self.row_indices[range.clone()], &self.values[range])
    }

    /// Row-major dense copy, for verification at small sizes.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dimension();
        let mut dense = vec![0.0; n * n];
        for c in 0..n {
            let (rows, vals) = self.column(c);
            for (&r, &v) in rows.iter().zip(vals) {
                dense[r as usize * n + c] = v;
            }
        }
        dense
    }
}

pub fn build_mixer(qubits: u32, mask: Option<&dyn FeasibilityMask>) -> Result<MixerMatrix> {
    build_mixer_with(qubits, mask, &BuildLimits::default())
}

/// Hypercube adjacency on `2^q` bit-strings: `(r, c)` is set iff `r` and `c`
/// differ in exactly one bit and, when masked, both are allowed.
pub fn build_mixer_with(
    qubits: u32,
    mask: Option<&dyn FeasibilityMask>,
    limits: &BuildLimits,
) -> Result<MixerMatrix> {
    if qubits == 0 {
        return Err(Error::InvalidArgument("mixer needs at least one qubit".into()));
    }
    if qubits > limits.max_qubits || qubits > 32 {
        return Err(Error::QubitCap {
            qubits,
            max: limits.max_qubits.min(32),
        });
    }
    let n = 1usize << qubits;
    let blocks: Vec<(Vec<u32>, Vec<usize>)> = (0..n.div_ceil(MIXER_BLOCK))
        .into_par_iter()
        .map(|b| {
            let cols = b * MIXER_BLOCK..((b + 1) * MIXER_BLOCK).min(n);
            let mut rows = Vec::with_capacity(cols.len() * qubits as usize);
            let mut counts = Vec::with_capacity(cols.len());
            for c in cols {
                let before = rows.len();
                if mask.is_none_or(|m| m.allows(c)) {
                    // ascending row order: flipping a set bit lowers the index
                    for j in (0..qubits).rev() {
                        let r = c ^ (1 << j);
                        if r < c && mask.is_none_or(|m| m.allows(r)) {
                            rows.push(r as u32);
                        }
                    }
                    for j in 0..qubits {
                        let r = c ^ (1 << j);
                        if r > c && mask.is_none_or(|m| m.allows(r)) {
                            rows.push(r as u32);
                        }
                    }
                }
                counts.push(rows.len() - before);
            }
            (rows, counts)
        })
        .collect();

    let nnz = blocks.iter().map(|(rows, _)| rows.len()).sum();
    let mut column_pointers = Vec::with_capacity(n + 1);
    let mut row_indices = Vec::with_capacity(nnz);
    column_pointers.push(0);
    for (rows, counts) in blocks {
        for count in counts {
            column_pointers.push(column_pointers.last().unwrap() + count);
        }
        row_indices.extend_from_slice(&rows);
    }
    Ok(MixerMatrix {
        qubits,
        column_pointers,
        row_indices,
        values: vec![1.0; nnz],
    })
}

/// Spectral bounds `(-q, q)`: exact for the full hypercube, an over-estimate
/// once masking removes entries.
pub fn eigen_bounds(m: &MixerMatrix) -> (f64, f64) {
    let q = m.qubits as f64;
    (-q, q)
}
