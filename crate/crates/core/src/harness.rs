//! Experiment configuration, trial orchestration and CSV output, plus the
//! analytic state-partition and distribution-cost models.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::StateVector;
use crate::graphs::{brute_force_best_capped, deform_with, erdos_renyi_with, Deformation, DEFAULT_BRUTE_FORCE_CAP};
use crate::hamiltonians::{build_cost_diagonal_with, build_mixer_with, BuildLimits, CostMode, FeasibleIndices, DEFAULT_MAX_QUBITS};
use crate::optimize::{minimize, Method, OptimizerBudget, SearchBox, Tolerances, DEFAULT_BUDGET_SCALING, DEFAULT_F_TOL, DEFAULT_X_TOL};
use crate::permutations::{factorial, qubit_count};
use crate::qaoa::{compute_metrics, sample_with, Metrics, QaoaParams, Simulator, TrialOutcome, Variant};
use crate::rng;

/// Offset separating per-row random streams from per-instance streams.
const RUN_STREAM_OFFSET: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    pub size: usize,
    pub directed: bool,
    /// Cycled through by instance index.
    pub deformations: Vec<Deformation>,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            size: 4,
            directed: true,
            deformations: Deformation::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QaoaConfig {
    pub mode: CostMode,
    pub depths: Vec<usize>,
    pub variant: Variant,
    /// Final measurement count; `V²` when absent.
    pub samples: Option<usize>,
}

impl Default for QaoaConfig {
    fn default() -> Self {
        QaoaConfig {
            mode: CostMode::EdgeDifference,
            depths: vec![1],
            variant: Variant::Standard,
            samples: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub methods: Vec<String>,
    pub scaling: usize,
    /// Replaces `scaling × p × V` when set.
    pub max_evaluations: Option<usize>,
    pub x_tol: f64,
    pub f_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            methods: vec!["nelder_mead".into()],
            scaling: DEFAULT_BUDGET_SCALING,
            max_evaluations: None,
            x_tol: DEFAULT_X_TOL,
            f_tol: DEFAULT_F_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Problem instances; each is run at every depth with every method.
    pub trials: usize,
    pub output: PathBuf,
    /// Worker threads; all cores when absent.
    pub threads: Option<usize>,
    /// When false every timing column is written as 0 so that whole files
    /// replay byte for byte.
    pub record_timings: bool,
    pub brute_force_cap: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            trials: 10,
            output: PathBuf::from("results.csv"),
            threads: None,
            record_timings: true,
            brute_force_cap: DEFAULT_BRUTE_FORCE_CAP,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphConfig,
    pub qaoa: QaoaConfig,
    pub optimizer: OptimizerConfig,
    pub run: RunConfig,
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        text.parse()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        self.optimizer.methods.iter().map(|m| m.parse()).collect()
    }

    pub fn sample_count(&self) -> usize {
        self.qaoa.samples.unwrap_or(self.graph.size * self.graph.size)
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.graph.size;
        if v < 2 {
            return Err(Error::Config(format!("graph.size must be at least 2, got {v}")));
        }
        if v > self.run.brute_force_cap {
            return Err(Error::Config(format!(
                "graph.size {v} exceeds the brute-force cap {}",
                self.run.brute_force_cap
            )));
        }
        let q = qubit_count(v)?;
        if q > DEFAULT_MAX_QUBITS {
            return Err(Error::QubitCap {
                qubits: q,
                max: DEFAULT_MAX_QUBITS,
            });
        }
        if self.graph.deformations.is_empty() {
            return Err(Error::Config("graph.deformations is empty".into()));
        }
        if self.qaoa.depths.is_empty() || self.qaoa.depths.contains(&0) {
            return Err(Error::Config("qaoa.depths must list depths of at least 1".into()));
        }
        if self.qaoa.samples == Some(0) {
            return Err(Error::Config("qaoa.samples must be at least 1".into()));
        }
        if self.optimizer.methods.is_empty() {
            return Err(Error::Config("optimizer.methods is empty".into()));
        }
        self.methods()?;
        if self.optimizer.scaling == 0 && self.optimizer.max_evaluations.is_none() {
            return Err(Error::Config("optimizer.scaling must be positive".into()));
        }
        if self.optimizer.max_evaluations == Some(0) {
            return Err(Error::Config("optimizer.max_evaluations must be positive".into()));
        }
        if !(self.optimizer.x_tol > 0.0 && self.optimizer.f_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.run.trials == 0 {
            return Err(Error::Config("run.trials must be at least 1".into()));
        }
        if self.run.threads == Some(0) {
            return Err(Error::Config("run.threads must be at least 1".into()));
        }
        Ok(())
    }

    fn budget(&self, p: usize) -> OptimizerBudget {
        OptimizerBudget {
            max_override: self.optimizer.max_evaluations,
            ..OptimizerBudget::new(self.optimizer.scaling, p, self.graph.size)
        }
    }
}

/// Seconds spent in each phase of a trial.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub build_cost: f64,
    pub build_mixer: f64,
    pub oracle: f64,
    pub phase: f64,
    pub mixer: f64,
    pub evolve_per_evaluation: f64,
    pub total: f64,
}

/// One row of the results file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub instance: usize,
    pub graph_size: usize,
    pub directed: bool,
    pub deformation: Deformation,
    pub mode: CostMode,
    pub variant: Variant,
    pub p: usize,
    pub method: String,
    pub budget_scaling: usize,
    pub max_evaluations: usize,
    pub samples: usize,
    pub x_tol: f64,
    pub f_tol: f64,
    pub master_seed: u64,
    pub instance_stream: u64,
    pub run_stream: u64,
    pub outcome: std::result::Result<TrialResult, String>,
    pub timings: Timings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub qubits: u32,
    pub feasible: u64,
    pub slots: usize,
    pub optimal_difference: usize,
    pub metrics: Metrics,
    pub initial_expectation: f64,
    pub final_expectation: f64,
    pub best_parameters: Vec<f64>,
    pub termination: String,
}

/// Column names, in order. The metric headers carry the figure-of-merit
/// names used in the analysis scripts.
pub const CSV_HEADER: [&str; 38] = [
    "trial",
    "instance",
    "graph_size",
    "directed",
    "deformation",
    "mode",
    "variant",
    "p",
    "method",
    "budget_scaling",
    "max_evaluations",
    "samples",
    "x_tol",
    "f_tol",
    "master_seed",
    "instance_stream",
    "run_stream",
    "qubits",
    "feasible",
    "slots",
    "optimal_difference",
    "Number of Evaluations",
    "Sample Error",
    "Expectation Error",
    "Classical Comparison",
    "Expectation Improvement",
    "Infeasible Sample Fraction",
    "initial_expectation",
    "final_expectation",
    "best_parameters",
    "termination_reason",
    "time_build_cost_s",
    "time_build_mixer_s",
    "time_oracle_s",
    "time_phase_s",
    "time_mixer_s",
    "time_evolve_per_eval_s",
    "time_total_s",
];

/// Extra trailing column holding a per-trial error message.
pub const CSV_ERROR_COLUMN: &str = "error";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

impl TrialRecord {
    pub fn to_row(&self) -> Vec<String> {
        let mut row = vec![
            self.trial.to_string(),
            self.instance.to_string(),
            self.graph_size.to_string(),
            self.directed.to_string(),
            self.deformation.name().to_string(),
            self.mode.name().to_string(),
            self.variant.name().to_string(),
            self.p.to_string(),
            self.method.clone(),
            self.budget_scaling.to_string(),
            self.max_evaluations.to_string(),
            self.samples.to_string(),
            format_real(self.x_tol),
            format_real(self.f_tol),
            self.master_seed.to_string(),
            self.instance_stream.to_string(),
            self.run_stream.to_string(),
        ];
        match &self.outcome {
            Ok(r) => {
                let m = &r.metrics;
                row.extend([
                    r.qubits.to_string(),
                    r.feasible.to_string(),
                    r.slots.to_string(),
                    r.optimal_difference.to_string(),
                    m.evaluations.to_string(),
                    format_real(m.sample_error),
                    format_real(m.expectation_error),
                    format_real(m.classical_comparison),
                    format_real(m.expectation_improvement),
                    format_real(m.infeasible_sample_fraction),
                    format_real(r.initial_expectation),
                    format_real(r.final_expectation),
                    r.best_parameters.iter().map(|x| format_real(*x)).collect::<Vec<_>>().join(";"),
                    r.termination.clone(),
                ]);
            }
            Err(_) => row.extend(std::iter::repeat_n(String::new(), 14)),
        }
        let t = &self.timings;
        row.extend(
            [t.build_cost, t.build_mixer, t.oracle, t.phase, t.mixer, t.evolve_per_evaluation, t.total]
                .map(format_real),
        );
        row.push(self.outcome.as_ref().err().cloned().unwrap_or_default());
        row
    }
}

pub fn write_csv(records: &[TrialRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = CSV_HEADER.to_vec();
    header.push(CSV_ERROR_COLUMN);
    w.write_record(&header)?;
    for r in records {
        w.write_record(r.to_row())?;
    }
    w.flush()?;
    Ok(())
}

/// One planned row before it runs.
#[derive(Debug, Clone, Copy)]
struct TrialSpec {
    trial: usize,
    instance: usize,
    p: usize,
    method: Method,
}

/// Runs every (depth, method, instance) combination. Instance `i` draws its
/// graphs from stream `i` of the master seed, so all depths and methods see
/// the same problems; row `t` draws its start point, random-search seed and
/// samples from stream `2^32 + t`. Rows come back in trial order whatever
/// the thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let methods = cfg.methods()?;
    let mut specs = Vec::new();
    for &p in &cfg.qaoa.depths {
        for &method in &methods {
            for instance in 0..cfg.run.trials {
                specs.push(TrialSpec {
                    trial: specs.len(),
                    instance,
                    p,
                    method,
                });
            }
        }
    }
    let run = || specs.par_iter().map(|s| run_trial(cfg, s)).collect::<Vec<_>>();
    match cfg.run.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))
            .map(|pool| pool.install(run)),
        None => Ok(run()),
    }
}

/// Runs the experiment and writes the CSV to `path`.
pub fn run_to_path(cfg: &ExperimentConfig, path: impl AsRef<Path>) -> Result<Vec<TrialRecord>> {
    let records = run_experiment(cfg)?;
    let file = std::fs::File::create(path)?;
    write_csv(&records, std::io::BufWriter::new(file))?;
    Ok(records)
}

fn run_trial(cfg: &ExperimentConfig, spec: &TrialSpec) -> TrialRecord {
    let start = Instant::now();
    let v = cfg.graph.size;
    let instance_stream = spec.instance as u64;
    let run_stream = RUN_STREAM_OFFSET + spec.trial as u64;
    let deformation = cfg.graph.deformations[spec.instance % cfg.graph.deformations.len()];
    let mut timings = Timings::default();
    let outcome = solve_trial(cfg, spec, deformation, instance_stream, run_stream, &mut timings)
        .map_err(|e| e.to_string());
    if cfg.run.record_timings {
        timings.total = start.elapsed().as_secs_f64();
    } else {
        timings = Timings::default();
    }
    TrialRecord {
        trial: spec.trial,
        instance: spec.instance,
        graph_size: v,
        directed: cfg.graph.directed,
        deformation,
        mode: cfg.qaoa.mode,
        variant: cfg.qaoa.variant,
        p: spec.p,
        method: spec.method.name().to_string(),
        budget_scaling: cfg.optimizer.scaling,
        max_evaluations: cfg.budget(spec.p).max_evaluations(),
        samples: cfg.sample_count(),
        x_tol: cfg.optimizer.x_tol,
        f_tol: cfg.optimizer.f_tol,
        master_seed: cfg.run.seed,
        instance_stream,
        run_stream,
        outcome,
        timings,
    }
}

fn seconds(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn solve_trial(
    cfg: &ExperimentConfig,
    spec: &TrialSpec,
    deformation: Deformation,
    instance_stream: u64,
    run_stream: u64,
    timings: &mut Timings,
) -> Result<TrialResult> {
    let v = cfg.graph.size;
    let limits = BuildLimits {
        brute_force_cap: cfg.run.brute_force_cap,
        max_qubits: DEFAULT_MAX_QUBITS,
    };

    let mut problem_rng = rng::stream(cfg.run.seed, instance_stream);
    let g1 = erdos_renyi_with(v, cfg.graph.directed, &mut problem_rng);
    let g2 = deform_with(&g1, deformation, &mut problem_rng);

    let t = Instant::now();
    let diag = build_cost_diagonal_with(&g1, &g2, cfg.qaoa.mode, &limits)?;
    timings.build_cost = seconds(t);

    let feasible = factorial(v)?;
    let t = Instant::now();
    let mixer = match cfg.qaoa.variant {
        Variant::Standard => build_mixer_with(diag.qubits(), None, &limits)?,
        Variant::Npo => build_mixer_with(diag.qubits(), Some(&FeasibleIndices { limit: feasible }), &limits)?,
    };
    timings.build_mixer = seconds(t);

    let t = Instant::now();
    let optimum = brute_force_best_capped(&g1, &g2, cfg.run.brute_force_cap)?;
    timings.oracle = seconds(t);

    let variant = cfg.qaoa.variant;
    let dim = variant.parameter_count(spec.p);
    let bx = SearchBox::angles(dim)?;
    let mut run_rng = rng::stream(cfg.run.seed, run_stream);
    let x0: Vec<f64> = (0..dim)
        .map(|i| bx.lower()[i] + run_rng.random::<f64>() * bx.width(i))
        .collect();
    let method = match spec.method {
        Method::Random { .. } => Method::Random { seed: run_rng.random() },
        m => m,
    };
    let tol = Tolerances {
        x_tol: cfg.optimizer.x_tol,
        f_tol: cfg.optimizer.f_tol,
    };
    let sign = cfg.qaoa.mode.minimization_sign();

    let mut sim = Simulator::new(&diag, &mixer, variant)?;
    let mut first: Option<f64> = None;
    let mut best: Option<(f64, StateVector)> = None;
    let minimum = minimize(
        |x| {
            let params = QaoaParams::from_flat(x, spec.p, variant)?;
            let psi = sim.evolve(&params)?;
            let f = crate::qaoa::expectation(&psi, &diag)?;
            first.get_or_insert(f);
            let objective = sign * f;
            if best.as_ref().is_none_or(|(b, _)| objective < *b) {
                best = Some((objective, psi));
            }
            Ok(objective)
        },
        &x0,
        &bx,
        &cfg.budget(spec.p),
        method,
        tol,
    )?;
    let evaluations = sim.evaluations();
    timings.phase = sim.phase_time().as_secs_f64();
    timings.mixer = sim.mixer_time().as_secs_f64();
    timings.evolve_per_evaluation = (sim.phase_time() + sim.mixer_time()).as_secs_f64() / evaluations as f64;
    drop(sim);

    let (best_objective, psi) = best.expect("x0 is always evaluated");
    let final_expectation = sign * best_objective;
    let samples = sample_with(&psi, cfg.sample_count(), &mut run_rng);
    let outcome = TrialOutcome {
        evaluations,
        initial_expectation: first.expect("x0 is always evaluated"),
        final_expectation,
        samples: &samples,
        feasible,
    };
    let metrics = compute_metrics(&outcome, &diag, Some(&optimum))?;
    Ok(TrialResult {
        qubits: diag.qubits(),
        feasible,
        slots: optimum.slots,
        optimal_difference: optimum.difference,
        metrics,
        initial_expectation: outcome.initial_expectation,
        final_expectation,
        best_parameters: minimum.x,
        termination: minimum.termination.name().to_string(),
    })
}

/// Splits `2^q` amplitudes over `P` workers: `P - 1` blocks of `⌊2^q/P⌋` and
/// a last block that also takes the remainder. Returns `(offset, length)`.
pub fn state_partition(qubits: u32, processors: usize) -> Result<Vec<(usize, usize)>> {
    if qubits >= usize::BITS {
        return Err(Error::InvalidArgument(format!("{qubits} qubits overflow the index type")));
    }
    let n = 1usize << qubits;
    if processors == 0 || processors > n {
        return Err(Error::InvalidArgument(format!(
            "processor count must be in 1..={n}, got {processors}"
        )));
    }
    let block = n / processors;
    let mut parts: Vec<(usize, usize)> = (0..processors).map(|i| (i * block, block)).collect();
    parts.last_mut().expect("at least one processor").1 += n % processors;
    Ok(parts)
}

/// Data layouts for a distributed mixer product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Column,
    Row,
    Checkerboard,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Column, Scheme::Row, Scheme::Checkerboard];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Column => "column",
            Scheme::Row => "row",
            Scheme::Checkerboard => "checkerboard",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scheme '{s}'")))
    }
}

/// Inputs of the communication cost model. `n` is the state dimension `2^q`,
/// `alpha` the time per scalar operation, `latency` the per-message start-up
/// time and `buffer` the transfer rate term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionPlan {
    pub scheme: Scheme,
    pub n: f64,
    pub processors: usize,
    pub alpha: f64,
    pub latency: f64,
    pub buffer: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionCost {
    pub compute: f64,
    pub communication: f64,
}

impl DistributionCost {
    pub fn total(&self) -> f64 {
        self.compute + self.communication
    }
}

/// Modelled time of one distributed product, logarithms base 2:
///
/// - column: `α n ⌈n/P⌉ + (P - 1)(λ + 32/(P β))`
/// - row: `α n ⌈n/P⌉ + λ ⌈log P⌉ + 32 n/β`
/// - checkerboard: `α n²/P² + λ · 32 n log(P²) / (√(P²) β)`
pub fn distribution_cost(plan: &DistributionPlan) -> Result<DistributionCost> {
    let DistributionPlan {
        scheme,
        n,
        processors,
        alpha,
        latency,
        buffer,
    } = *plan;
    if processors == 0 {
        return Err(Error::InvalidArgument("processor count must be at least 1".into()));
    }
    if !(n > 0.0 && alpha > 0.0 && latency > 0.0 && buffer > 0.0) {
        return Err(Error::InvalidArgument("plan constants must be positive".into()));
    }
    let p = processors as f64;
    Ok(match scheme {
        Scheme::Column => DistributionCost {
            compute: alpha * n * (n / p).ceil(),
            communication: (p - 1.0) * (latency + 32.0 / (p * buffer)),
        },
        Scheme::Row => DistributionCost {
            compute: alpha * n * (n / p).ceil(),
            communication: latency * p.log2().ceil() + 32.0 * n / buffer,
        },
        Scheme::Checkerboard => DistributionCost {
            compute: alpha * n * n / (p * p),
            communication: latency * 32.0 * n * (p * p).log2() / ((p * p).sqrt() * buffer),
        },
    })
}
