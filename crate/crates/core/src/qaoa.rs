//! QAOA layers, the NPO variant, measurement and per-trial metrics.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{apply_phase, expm_action_with, ChebyshevWorkspace, StateVector, KERNEL_CHUNK};
use crate::graphs::BestAlignment;
use crate::hamiltonians::{CostDiagonal, MixerMatrix};

/// Layer ordering. `Npo` starts each layer with the mixer and ends with one
/// extra mixer step, and expects a feasibility-masked mixer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Standard,
    Npo,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Standard => "standard",
            Variant::Npo => "npo",
        }
    }

    /// Length of the flat parameter vector at depth `p`.
    pub fn parameter_count(self, p: usize) -> usize {
        match self {
            Variant::Standard => 2 * p,
            Variant::Npo => 2 * p + 1,
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Variant::Standard),
            "npo" => Ok(Variant::Npo),
            other => Err(Error::InvalidArgument(format!("unknown variant '{other}'"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Angles `γ_1..γ_p`, `β_1..β_p` and, for the NPO variant, a trailing `β_{p+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct QaoaParams {
    gammas: Vec<f64>,
    betas: Vec<f64>,
    extra_beta: Option<f64>,
}

impl QaoaParams {
    pub fn new(gammas: Vec<f64>, betas: Vec<f64>, extra_beta: Option<f64>) -> Result<Self> {
        if gammas.is_empty() {
            return Err(Error::InvalidArgument("depth p must be at least 1".into()));
        }
        if gammas.len() != betas.len() {
            return Err(Error::InvalidArgument(format!(
                "{} gammas but {} betas",
                gammas.len(),
                betas.len()
            )));
        }
        if gammas.iter().chain(&betas).chain(&extra_beta).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("qaoa parameter"));
        }
        Ok(QaoaParams {
            gammas,
            betas,
            extra_beta,
        })
    }

    pub fn zeros(p: usize, variant: Variant) -> Result<Self> {
        let extra = (variant == Variant::Npo).then_some(0.0);
        Self::new(vec![0.0; p], vec![0.0; p], extra)
    }

    /// Reads `[γ_1..γ_p, β_1..β_p]` (plus `β_{p+1}` for NPO).
    pub fn from_flat(x: &[f64], p: usize, variant: Variant) -> Result<Self> {
        let expected = variant.parameter_count(p);
        if x.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: x.len(),
            });
        }
        let extra = (variant == Variant::Npo).then(|| x[2 * p]);
        Self::new(x[..p].to_vec(), x[p..2 * p].to_vec(), extra)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut x = self.gammas.clone();
        x.extend_from_slice(&self.betas);
        x.extend(self.extra_beta);
        x
    }

    pub fn depth(&self) -> usize {
        self.gammas.len()
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn extra_beta(&self) -> Option<f64> {
        self.extra_beta
    }
}

pub fn initial_state(qubits: u32) -> Result<StateVector> {
    if qubits == 0 {
        return Err(Error::InvalidArgument("initial state needs at least one qubit".into()));
    }
    Ok(StateVector::uniform(qubits))
}

/// Owns the Chebyshev buffers and tallies evaluations and kernel time across
/// repeated evolutions on one problem.
pub struct Simulator<'a> {
    diag: &'a CostDiagonal,
    mixer: &'a MixerMatrix,
    variant: Variant,
    workspace: ChebyshevWorkspace,
    evaluations: usize,
    phase_time: Duration,
    mixer_time: Duration,
}

impl<'a> Simulator<'a> {
    pub fn new(diag: &'a CostDiagonal, mixer: &'a MixerMatrix, variant: Variant) -> Result<Self> {
        if diag.len() != mixer.dimension() {
            return Err(Error::DimensionMismatch {
                expected: mixer.dimension(),
                actual: diag.len(),
            });
        }
        Ok(Simulator {
            diag,
            mixer,
            variant,
            workspace: ChebyshevWorkspace::new(),
            evaluations: 0,
            phase_time: Duration::ZERO,
            mixer_time: Duration::ZERO,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn diagonal(&self) -> &CostDiagonal {
        self.diag
    }

    pub fn evolve(&mut self, params: &QaoaParams) -> Result<StateVector> {
        self.evaluations += 1;
        let mut psi = initial_state(self.diag.qubits())?;
        match self.variant {
            Variant::Standard => {
                for (&g, &b) in params.gammas.iter().zip(&params.betas) {
                    self.phase(g, &mut psi)?;
                    self.mix(b, &mut psi)?;
                }
            }
            Variant::Npo => {
                let extra = params
                    .extra_beta
                    .ok_or_else(|| Error::InvalidArgument("NPO variant needs extra_beta".into()))?;
                for (&g, &b) in params.gammas.iter().zip(&params.betas) {
                    self.mix(b, &mut psi)?;
                    self.phase(g, &mut psi)?;
                }
                self.mix(extra, &mut psi)?;
            }
        }
        Ok(psi)
    }

    /// `F(params)` for the evolved state.
    pub fn expectation(&mut self, params: &QaoaParams) -> Result<f64> {
        let psi = self.evolve(params)?;
        expectation(&psi, self.diag)
    }

    fn phase(&mut self, gamma: f64, psi: &mut StateVector) -> Result<()> {
        let t = Instant::now();
        apply_phase(self.diag, gamma, psi)?;
        self.phase_time += t.elapsed();
        Ok(())
    }

    fn mix(&mut self, beta: f64, psi: &mut StateVector) -> Result<()> {
        let t = Instant::now();
        expm_action_with(self.mixer, beta, psi, &mut self.workspace)?;
        self.mixer_time += t.elapsed();
        Ok(())
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn phase_time(&self) -> Duration {
        self.phase_time
    }

    pub fn mixer_time(&self) -> Duration {
        self.mixer_time
    }
}

/// Phase then mixer for each layer `1..=p`, from the uniform state.
pub fn evolve(params: &QaoaParams, diag: &CostDiagonal, m: &MixerMatrix) -> Result<StateVector> {
    Simulator::new(diag, m, Variant::Standard)?.evolve(params)
}

/// Mixer then phase for each layer, then a final mixer with `extra_beta`.
pub fn evolve_npo(params: &QaoaParams, diag: &CostDiagonal, m: &MixerMatrix) -> Result<StateVector> {
    Simulator::new(diag, m, Variant::Npo)?.evolve(params)
}

/// `Σ_x |ψ_x|² c_x`, summed in fixed chunks so the result does not depend on
/// the thread count.
pub fn expectation(psi: &StateVector, diag: &CostDiagonal) -> Result<f64> {
    if psi.len() != diag.len() {
        return Err(Error::DimensionMismatch {
            expected: diag.len(),
            actual: psi.len(),
        });
    }
    let partials: Vec<f64> = psi
        .amplitudes()
        .par_chunks(KERNEL_CHUNK)
        .zip(diag.values().par_chunks(KERNEL_CHUNK))
        .map(|(amps, costs)| amps.iter().zip(costs).map(|(a, c)| a.norm_sqr() * c).sum())
        .collect();
    Ok(partials.iter().sum())
}

/// `n` basis-state indices drawn from `|ψ|²` by inverse CDF.
pub fn sample(psi: &StateVector, n: usize, seed: u64) -> Vec<usize> {
    sample_with(psi, n, &mut crate::rng::seeded(seed))
}

pub fn sample_with(psi: &StateVector, n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(psi.len());
    let mut acc = 0.0;
    for p in psi.probabilities() {
        acc += p;
        cdf.push(acc);
    }
    let last = cdf.len() - 1;
    (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(last)
        })
        .collect()
}

/// Total probability per distinct cost, sorted by cost.
pub fn cost_distribution(psi: &StateVector, diag: &CostDiagonal) -> Result<Vec<(f64, f64)>> {
    if psi.len() != diag.len() {
        return Err(Error::DimensionMismatch {
            expected: diag.len(),
            actual: psi.len(),
        });
    }
    let mut pairs: Vec<(f64, f64)> = diag.values().iter().copied().zip(psi.probabilities()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (c, p) in pairs {
        match out.last_mut() {
            Some((last, total)) if *last == c => *total += p,
            _ => out.push((c, p)),
        }
    }
    Ok(out)
}

/// Everything a finished trial contributes to its metrics.
#[derive(Debug, Clone, Copy)]
pub struct TrialOutcome<'a> {
    pub evaluations: usize,
    /// `F` at the starting parameters, in the diagonal's own sign.
    pub initial_expectation: f64,
    /// `F` at the returned parameters, in the diagonal's own sign.
    pub final_expectation: f64,
    pub samples: &'a [usize],
    /// Number of feasible indices (`V!`).
    pub feasible: u64,
}

/// Per-trial figures of merit, all oriented so that lower cost is better.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub evaluations: usize,
    /// Best feasible sampled cost minus the optimum.
    pub sample_error: f64,
    /// `|F - d_min| / N_slots`.
    pub expectation_error: f64,
    /// `F - F_uniform`; negative when QAOA beats uniform random choice.
    pub classical_comparison: f64,
    /// `F_initial - F_final`.
    pub expectation_improvement: f64,
    pub infeasible_sample_fraction: f64,
}

/// Alternate-penalty costs are negated first so one set of definitions
/// covers both modes. With no feasible sample, `sample_error` takes the
/// worst possible value `N_slots - d_min`.
pub fn compute_metrics(
    outcome: &TrialOutcome<'_>,
    diag: &CostDiagonal,
    optimum: Option<&BestAlignment>,
) -> Result<Metrics> {
    let optimum = optimum.ok_or_else(|| {
        Error::InvalidArgument("metrics need the brute-force optimum".into())
    })?;
    if outcome.evaluations == 0 {
        return Err(Error::InvalidArgument("a trial must evaluate at least once".into()));
    }
    if outcome.samples.is_empty() {
        return Err(Error::InvalidArgument("metrics need at least one sample".into()));
    }
    let sign = diag.mode().minimization_sign();
    let d_min = optimum.difference as f64;
    let slots = optimum.slots.max(1) as f64;
    let values = diag.values();

    let mut infeasible = 0usize;
    let mut best: Option<f64> = None;
    for &s in outcome.samples {
        if s >= values.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                actual: s,
            });
        }
        if s as u64 >= outcome.feasible {
            infeasible += 1;
            continue;
        }
        let c = sign * values[s];
        best = Some(best.map_or(c, |b: f64| b.min(c)));
    }
    let best = best.unwrap_or(optimum.slots as f64);

    let uniform = expectation(&StateVector::uniform(diag.qubits()), diag)?;
    let f_final = sign * outcome.final_expectation;
    Ok(Metrics {
        evaluations: outcome.evaluations,
        sample_error: best - d_min,
        expectation_error: (f_final - d_min).abs() / slots,
        classical_comparison: sign * (outcome.final_expectation - uniform),
        expectation_improvement: sign * (outcome.initial_expectation - outcome.final_expectation),
        infeasible_sample_fraction: infeasible as f64 / outcome.samples.len() as f64,
    })
}
