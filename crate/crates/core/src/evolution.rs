//! State vectors and the two propagators of a QAOA layer: the diagonal phase
//! `e^{-iγC}` and the mixer action `e^{-iβB}ψ` by Chebyshev expansion.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hamiltonians::{eigen_bounds, CostDiagonal, MixerMatrix};

pub mod dense;

/// Chebyshev truncation threshold on `|2 J_n|`.
pub const CHEBYSHEV_EPSILON: f64 = 1e-18;

/// Extra terms allowed beyond `ceil(|α|)` before giving up.
pub const CHEBYSHEV_TERM_MARGIN: usize = 1000;

pub(crate) const KERNEL_CHUNK: usize = 1 << 12;

/// Amplitudes over the `2^q` computational basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Equal superposition `1/sqrt(2^q)` over every basis state.
    pub fn uniform(qubits: u32) -> Self {
        let n = 1usize << qubits;
        let a = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
        StateVector {
            amplitudes: vec![a; n],
        }
    }

    pub fn basis(qubits: u32, index: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1usize << qubits];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        StateVector { amplitudes }
    }

    /// Wraps raw amplitudes; the length must be a power of two. No
    /// normalisation is applied.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        if !amplitudes.len().is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "state length {} is not a power of two",
                amplitudes.len()
            )));
        }
        Ok(StateVector { amplitudes })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn qubits(&self) -> u32 {
        self.amplitudes.len().trailing_zeros()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.amplitudes.iter().map(|a| a.norm_sqr())
    }
}

/// `ψ_x ← e^{-iγ c_x} ψ_x` for every basis state `x`.
pub fn apply_phase(diag: &CostDiagonal, gamma: f64, psi: &mut StateVector) -> Result<()> {
    if diag.len() != psi.len() {
        return Err(Error::DimensionMismatch {
            expected: diag.len(),
            actual: psi.len(),
        });
    }
    if !gamma.is_finite() {
        return Err(Error::NonFinite("gamma"));
    }
    if gamma == 0.0 {
        return Ok(());
    }
    psi.amplitudes
        .par_chunks_mut(KERNEL_CHUNK)
        .zip(diag.values().par_chunks(KERNEL_CHUNK))
        .for_each(|(amps, costs)| {
            for (a, &c) in amps.iter_mut().zip(costs) {
                let (s, co) = (gamma * c).sin_cos();
                *a *= Complex64::new(co, -s);
            }
        });
    Ok(())
}

/// Bessel function of the first kind `J_n(x)`.
pub fn bessel_j(n: usize, x: f64) -> f64 {
    bessel_j_sequence(n, x)[n]
}

/// `J_0(x), …, J_nmax(x)` from one normalised downward (Miller) recurrence.
///
/// The recurrence `J_{k-1} = (2k/x) J_k - J_{k+1}` is started well above
/// `max(nmax, |x|)` and scaled by `J_0 + 2 Σ J_{2k} = 1`. Negative arguments
/// use `J_n(-x) = (-1)^n J_n(x)`.
pub fn bessel_j_sequence(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    let ax = x.abs();
    if ax == 0.0 {
        out[0] = 1.0;
        return out;
    }
    const RESCALE_ABOVE: f64 = 1e250;
    const RESCALE_BY: f64 = 1e-250;

    let m = nmax.max(ax.ceil() as usize);
    let margin = ((160.0 * m as f64).sqrt().ceil() as usize).max(30);
    let start = (m + margin + 1) & !1;

    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-30; // J_k, arbitrary seed
    let mut even_sum = 0.0;
    for k in (1..=start).rev() {
        if k <= nmax {
            out[k] = cur;
        }
        if k % 2 == 0 {
            even_sum += cur;
        }
        let prev = 2.0 * k as f64 / ax * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > RESCALE_ABOVE {
            cur *= RESCALE_BY;
            next *= RESCALE_BY;
            even_sum *= RESCALE_BY;
            for v in out.iter_mut() {
                *v *= RESCALE_BY;
            }
        }
    }
    out[0] = cur;
    let norm = cur + 2.0 * even_sum;
    for v in out.iter_mut() {
        *v /= norm;
    }
    if x < 0.0 {
        for v in out.iter_mut().skip(1).step_by(2) {
            *v = -*v;
        }
    }
    out
}

/// Reusable buffers for [`expm_action_with`]; sized lazily on first use.
#[derive(Debug, Default, Clone)]
pub struct ChebyshevWorkspace {
    prev: Vec<Complex64>,
    cur: Vec<Complex64>,
}

impl ChebyshevWorkspace {
    pub fn new() -> Self {
        Self::default()
    }
}

/// `ψ ← e^{-iβB} ψ`. Returns the number of series terms summed.
pub fn expm_action(m: &MixerMatrix, beta: f64, psi: &mut StateVector) -> Result<usize> {
    expm_action_with(m, beta, psi, &mut ChebyshevWorkspace::new())
}

/// Chebyshev expansion of the mixer exponential applied to `ψ`.
///
/// With the spectrum `[λ_min, λ_max]` mapped to `[-1, 1]` by
/// `B̃ = (B - c)/h`, `c = (λ_max + λ_min)/2`, `h = (λ_max - λ_min)/2`:
///
/// `e^{-iβB} = e^{-iβc} Σ_n (2 - δ_{n0}) (-i)^n J_n(βh) T_n(B̃)`
///
/// `T_n(B̃)ψ` follows the three-term recurrence on vectors. The sum stops at
/// the first `n > |βh|` with `|2 J_n(βh)| <= ε`.
pub fn expm_action_with(
    m: &MixerMatrix,
    beta: f64,
    psi: &mut StateVector,
    ws: &mut ChebyshevWorkspace,
) -> Result<usize> {
    let n = m.dimension();
    if psi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: psi.len(),
        });
    }
    if !beta.is_finite() {
        return Err(Error::NonFinite("beta"));
    }
    if beta == 0.0 {
        return Ok(0);
    }

    let (lo, hi) = eigen_bounds(m);
    let center = 0.5 * (hi + lo);
    let half = 0.5 * (hi - lo);
    let alpha = beta * half;
    let limit = alpha.abs().ceil() as usize + CHEBYSHEV_TERM_MARGIN;
    let bessel = bessel_j_sequence(limit, alpha);
    let terms = (0..=limit)
        .find(|&k| k as f64 > alpha.abs() && (2.0 * bessel[k]).abs() <= CHEBYSHEV_EPSILON)
        .ok_or(Error::NoConvergence { limit })?;

    let phase = if center == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::from_polar(1.0, -beta * center)
    };
    let coeff = |k: usize| {
        let scale = if k == 0 { 1.0 } else { 2.0 } * bessel[k];
        // (-i)^k
        let rot = match k % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, -1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, 1.0),
        };
        phase * rot * scale
    };

    ws.prev.clear();
    ws.prev.extend_from_slice(&psi.amplitudes);
    ws.cur.resize(n, Complex64::new(0.0, 0.0));

    let inv_half = 1.0 / half;
    // T_1 ψ = B̃ ψ
    {
        let prev = &ws.prev;
        ws.cur
            .par_chunks_mut(KERNEL_CHUNK)
            .enumerate()
            .for_each(|(chunk, out)| {
                let base = chunk * KERNEL_CHUNK;
                for (off, o) in out.iter_mut().enumerate() {
                    let r = base + off;
                    *o = (gather(m, r, prev) - prev[r] * center) * inv_half;
                }
            });
    }
    let (c0, c1) = (coeff(0), coeff(1));
    psi.amplitudes
        .par_chunks_mut(KERNEL_CHUNK)
        .zip(ws.prev.par_chunks(KERNEL_CHUNK))
        .zip(ws.cur.par_chunks(KERNEL_CHUNK))
        .for_each(|((out, t0), t1)| {
            for ((o, &a), &b) in out.iter_mut().zip(t0).zip(t1) {
                *o = c0 * a + c1 * b;
            }
        });

    for k in 2..terms {
        let ck = coeff(k);
        let cur = &ws.cur;
        // T_k = 2 B̃ T_{k-1} - T_{k-2}, written over T_{k-2}
        ws.prev
            .par_chunks_mut(KERNEL_CHUNK)
            .zip(psi.amplitudes.par_chunks_mut(KERNEL_CHUNK))
            .enumerate()
            .for_each(|(chunk, (prev, out))| {
                let base = chunk * KERNEL_CHUNK;
                for (off, (p, o)) in prev.iter_mut().zip(out.iter_mut()).enumerate() {
                    let r = base + off;
                    let t = (gather(m, r, cur) - cur[r] * center) * (2.0 * inv_half) - *p;
                    *p = t;
                    *o += ck * t;
                }
            });
        std::mem::swap(&mut ws.prev, &mut ws.cur);
    }
    Ok(terms)
}

/// `(B x)_r`, reading column `r` as row `r` since `B` is symmetric.
#[inline]
fn gather(m: &MixerMatrix, r: usize, x: &[Complex64]) -> Complex64 {
    let (rows, vals) = m.column(r);
    let mut acc = Complex64::new(0.0, 0.0);
    for (&i, &v) in rows.iter().zip(vals) {
        acc += x[i as usize] * v;
    }
    acc
}
