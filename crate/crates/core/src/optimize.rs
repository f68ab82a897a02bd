//! Derivative-free minimisation over a box: Nelder–Mead, DIRECT and an
//! adaptive random search.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BUDGET_SCALING: usize = 200;
pub const DEFAULT_X_TOL: f64 = 1e-4;
pub const DEFAULT_F_TOL: f64 = 1e-6;

/// Nelder–Mead coefficients: reflection, expansion, contraction, shrink.
const NM_REFLECT: f64 = 1.0;
const NM_EXPAND: f64 = 2.0;
const NM_CONTRACT: f64 = 0.5;
const NM_SHRINK: f64 = 0.5;
/// Initial simplex edge as a fraction of each box side.
const NM_INITIAL_STEP: f64 = 0.1;

/// Jones' ε in the potentially-optimal test.
const DIRECT_EPSILON: f64 = 1e-4;

/// Radius decay of the random search after an unsuccessful draw.
const RANDOM_CONTRACTION: f64 = 0.95;

/// Objective seen by the step functions. `Ok(None)` means the evaluation
/// budget is spent and the caller should stop.
pub type Probe<'a> = dyn FnMut(&[f64]) -> Result<Option<f64>> + 'a;

/// Axis-aligned bounds, `lower < upper` in every coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SearchBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidBox("box has no dimensions".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::InvalidBox(format!(
                "{} lower bounds but {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::InvalidBox(format!("coordinate {i}: [{l}, {u}] is empty or unbounded")));
            }
        }
        Ok(SearchBox { lower, upper })
    }

    /// `[0, 2π)` in each of `dim` coordinates.
    pub fn angles(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![TAU; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| v >= l && v <= u)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, t)| self.lower[i] + t * self.width(i))
            .collect()
    }
}

/// Evaluation cap `S × p × V`, unless overridden.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OptimizerBudget {
    pub scaling: usize,
    pub depth: usize,
    pub graph_size: usize,
    pub max_override: Option<usize>,
}

impl OptimizerBudget {
    pub fn new(scaling: usize, depth: usize, graph_size: usize) -> Self {
        OptimizerBudget {
            scaling,
            depth,
            graph_size,
            max_override: None,
        }
    }

    pub fn fixed(max_evaluations: usize) -> Self {
        OptimizerBudget {
            scaling: 0,
            depth: 0,
            graph_size: 0,
            max_override: Some(max_evaluations),
        }
    }

    pub fn max_evaluations(&self) -> usize {
        self.max_override
            .unwrap_or(self.scaling * self.depth * self.graph_size)
            .max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub x_tol: f64,
    pub f_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            x_tol: DEFAULT_X_TOL,
            f_tol: DEFAULT_F_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    NelderMead,
    Direct,
    Random { seed: u64 },
}

/// Recognised names without an implementation.
const PLANNED_METHODS: [&str; 6] = ["bobyqa", "cobyla", "praxis", "subplex", "mlsl", "isres"];

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::NelderMead => "nelder_mead",
            Method::Direct => "direct",
            Method::Random { .. } => "random",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        match key.as_str() {
            "nelder_mead" | "neldermead" | "nm" => Ok(Method::NelderMead),
            "direct" => Ok(Method::Direct),
            "random" => Ok(Method::Random { seed: 0 }),
            k if PLANNED_METHODS.contains(&k) => Err(Error::UnsupportedMethod(k.to_string())),
            _ => Err(Error::InvalidArgument(format!("unknown optimizer '{s}'"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Budget,
    XTol,
    FTol,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::Budget => "budget",
            Termination::XTol => "x_tol",
            Termination::FTol => "f_tol",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    pub termination: Termination,
}

/// Counts calls, enforces the cap and remembers the best point seen.
struct Evaluator<F> {
    objective: F,
    max: usize,
    count: usize,
    best_x: Vec<f64>,
    best_f: f64,
}

impl<F: FnMut(&[f64]) -> Result<f64>> Evaluator<F> {
    fn probe(&mut self, x: &[f64]) -> Result<Option<f64>> {
        if self.count >= self.max {
            return Ok(None);
        }
        self.count += 1;
        let v = (self.objective)(x)?;
        if !v.is_finite() {
            return Err(Error::NonFinite("objective value"));
        }
        if v < self.best_f {
            self.best_f = v;
            self.best_x = x.to_vec();
        }
        Ok(Some(v))
    }
}

/// Minimises `objective` over `bx` from `x0`. `x0` is always evaluated first,
/// so the result is never worse than the starting point, and `evaluations`
/// is the exact number of objective calls.
pub fn minimize<F>(
    objective: F,
    x0: &[f64],
    bx: &SearchBox,
    budget: &OptimizerBudget,
    method: Method,
    tol: Tolerances,
) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if x0.len() != bx.dim() {
        return Err(Error::DimensionMismatch {
            expected: bx.dim(),
            actual: x0.len(),
        });
    }
    if !bx.contains(x0) {
        return Err(Error::InvalidBox(format!("start point {x0:?} lies outside the box")));
    }
    let mut ev = Evaluator {
        objective,
        max: budget.max_evaluations(),
        count: 0,
        best_x: x0.to_vec(),
        best_f: f64::INFINITY,
    };
    let f0 = ev.probe(x0)?.expect("budget is at least one evaluation");
    let termination = {
        let mut probe = |x: &[f64]| ev.probe(x);
        match method {
            Method::NelderMead => nelder_mead(x0, f0, bx, tol, &mut probe)?,
            Method::Direct => direct(bx, tol, &mut probe)?,
            Method::Random { seed } => random_search(x0, f0, bx, tol, seed, &mut probe)?,
        }
    };
    Ok(Minimum {
        x: ev.best_x,
        f: ev.best_f,
        evaluations: ev.count,
        termination,
    })
}

/// `n + 1` points with their objective values.
#[derive(Debug, Clone, PartialEq)]
pub struct Simplex {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NelderMeadMove {
    Reflect,
    Expand,
    ContractOutside,
    ContractInside,
    Shrink,
}

impl Simplex {
    /// `x0` plus one step of `step · width` along each axis, reversed when
    /// the point would leave the box. A negative `step` prefers the downward
    /// direction. Returns `None` if the budget runs out while evaluating.
    pub fn axis(x0: &[f64], f0: f64, step: f64, bx: &SearchBox, probe: &mut Probe<'_>) -> Result<Option<Self>> {
        let mut points = vec![x0.to_vec()];
        let mut values = vec![f0];
        for i in 0..x0.len() {
            let h = step * bx.width(i);
            let mut x = x0.to_vec();
            let ahead = x0[i] + h;
            x[i] = if ahead >= bx.lower()[i] && ahead <= bx.upper()[i] { ahead } else { x0[i] - h };
            bx.clamp(&mut x);
            let Some(v) = probe(&x)? else {
                return Ok(None);
            };
            points.push(x);
            values.push(v);
        }
        Ok(Some(Simplex { points, values }))
    }

    /// Orders vertices by value; ties keep their current order.
    pub fn sort(&mut self) {
        let mut order: Vec<usize> = (0..self.points.len()).collect();
        order.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        self.points = order.iter().map(|&i| self.points[i].clone()).collect();
        self.values = order.iter().map(|&i| self.values[i]).collect();
    }

    /// Largest distance from the first vertex.
    pub fn diameter(&self) -> f64 {
        let best = &self.points[0];
        self.points[1..]
            .iter()
            .map(|p| distance(p, best))
            .fold(0.0, f64::max)
    }

    pub fn spread(&self) -> f64 {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    /// True when the edge vectors from the first vertex are numerically
    /// linearly dependent.
    pub fn is_degenerate(&self) -> bool {
        let scale = self.diameter();
        if scale == 0.0 {
            return true;
        }
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for p in &self.points[1..] {
            let mut v: Vec<f64> = p.iter().zip(&self.points[0]).map(|(a, b)| (a - b) / scale).collect();
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-10 {
                return true;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
        false
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `c + t (p - c)`, clamped to the box.
fn along(c: &[f64], p: &[f64], t: f64, bx: &SearchBox) -> Vec<f64> {
    let mut x: Vec<f64> = c.iter().zip(p).map(|(ci, pi)| ci + t * (pi - ci)).collect();
    bx.clamp(&mut x);
    x
}

/// One reflection / expansion / contraction / shrink on a sorted simplex.
/// The simplex is left sorted. `Ok(None)` if the budget ran out mid-step.
pub fn nelder_mead_step(s: &mut Simplex, bx: &SearchBox, probe: &mut Probe<'_>) -> Result<Option<NelderMeadMove>> {
    let n = s.points.len() - 1;
    let centroid: Vec<f64> = (0..bx.dim())
        .map(|j| s.points[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
        .collect();
    let (fb, fsw, fw) = (s.values[0], s.values[n - 1], s.values[n]);
    let worst = s.points[n].clone();

    let xr = along(&centroid, &worst, -NM_REFLECT, bx);
    let Some(fr) = probe(&xr)? else { return Ok(None) };

    let mv = if fr < fb {
        let xe = along(&centroid, &worst, -NM_EXPAND, bx);
        let Some(fe) = probe(&xe)? else { return Ok(None) };
        if fe < fr {
            s.points[n] = xe;
            s.values[n] = fe;
            NelderMeadMove::Expand
        } else {
            s.points[n] = xr;
            s.values[n] = fr;
            NelderMeadMove::Reflect
        }
    } else if fr < fsw {
        s.points[n] = xr;
        s.values[n] = fr;
        NelderMeadMove::Reflect
    } else {
        let (xc, outside) = if fr < fw {
            (along(&centroid, &xr, NM_CONTRACT, bx), true)
        } else {
            (along(&centroid, &worst, NM_CONTRACT, bx), false)
        };
        let Some(fc) = probe(&xc)? else { return Ok(None) };
        let accept = if outside { fc <= fr } else { fc < fw };
        if accept {
            s.points[n] = xc;
            s.values[n] = fc;
            if outside {
                NelderMeadMove::ContractOutside
            } else {
                NelderMeadMove::ContractInside
            }
        } else {
            let best = s.points[0].clone();
            for i in 1..=n {
                let x = along(&best, &s.points[i], NM_SHRINK, bx);
                let Some(v) = probe(&x)? else { return Ok(None) };
                s.points[i] = x;
                s.values[i] = v;
            }
            NelderMeadMove::Shrink
        }
    };
    s.sort();
    Ok(Some(mv))
}

/// Stops on `x_tol` once the simplex fits in a ball of that radius around
/// its best vertex, and on `f_tol` once the vertex values have stayed within
/// `f_tol` of each other for `n + 1` consecutive iterations. A simplex that
/// collapses onto a face of the box is rebuilt as an axis simplex around its
/// best vertex.
fn nelder_mead(x0: &[f64], f0: f64, bx: &SearchBox, tol: Tolerances, probe: &mut Probe<'_>) -> Result<Termination> {
    let Some(mut s) = Simplex::axis(x0, f0, NM_INITIAL_STEP, bx, probe)? else {
        return Ok(Termination::Budget);
    };
    s.sort();
    let n = bx.dim();
    let mut flat = 0usize;
    let mut reseeds = 0u32;
    let (mut reseed_step, mut reseed_best) = (NM_INITIAL_STEP, f0);
    loop {
        if s.spread() <= tol.f_tol {
            flat += 1;
            if flat > n {
                return Ok(Termination::FTol);
            }
        } else {
            flat = 0;
        }
        let diameter = s.diameter();
        if diameter <= tol.x_tol {
            return Ok(Termination::XTol);
        }
        if s.is_degenerate() {
            // full-size restart while the restarts keep paying off, halved
            // otherwise; alternate direction so a face-bound simplex can move
            // both ways
            let (best, fbest) = (s.points[0].clone(), s.values[0]);
            reseed_step = if fbest < reseed_best { NM_INITIAL_STEP } else { 0.5 * reseed_step };
            reseed_best = fbest;
            reseeds += 1;
            let sign = if reseeds % 2 == 1 { -1.0 } else { 1.0 };
            let step = sign * reseed_step;
            match Simplex::axis(&best, fbest, step, bx, probe)? {
                Some(fresh) => {
                    s = fresh;
                    s.sort();
                }
                None => return Ok(Termination::Budget),
            }
            continue;
        }
        if nelder_mead_step(&mut s, bx, probe)?.is_none() {
            return Ok(Termination::Budget);
        }
    }
}

/// A DIRECT cell in unit-cube coordinates. Side `i` has length `3^-levels[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rectangle {
    pub id: usize,
    pub center: Vec<f64>,
    pub levels: Vec<u32>,
    pub value: f64,
}

impl Rectangle {
    /// Half the diagonal, computed from sorted levels so equal shapes give
    /// bit-identical sizes.
    pub fn size(&self) -> f64 {
        let mut levels = self.levels.clone();
        levels.sort_unstable();
        0.5 * levels
            .iter()
            .map(|&l| 3f64.powi(-2 * l as i32))
            .sum::<f64>()
            .sqrt()
    }

    pub fn side(&self, i: usize) -> f64 {
        3f64.powi(-(self.levels[i] as i32))
    }

    pub fn unit_volume(&self) -> f64 {
        (0..self.levels.len()).map(|i| self.side(i)).product()
    }
}

/// Partition of the box into evaluated rectangles.
#[derive(Debug, Clone)]
pub struct DirectState {
    bx: SearchBox,
    rects: Vec<Rectangle>,
    f_min: f64,
    f_max: f64,
    best: usize,
}

impl DirectState {
    /// Evaluates the centre of the box.
    pub fn new(bx: &SearchBox, probe: &mut Probe<'_>) -> Result<Option<Self>> {
        let center = vec![0.5; bx.dim()];
        let Some(v) = probe(&bx.from_unit(&center))? else {
            return Ok(None);
        };
        Ok(Some(DirectState {
            bx: bx.clone(),
            rects: vec![Rectangle {
                id: 0,
                center,
                levels: vec![0; bx.dim()],
                value: v,
            }],
            f_min: v,
            f_max: v,
            best: 0,
        }))
    }

    pub fn rectangles(&self) -> &[Rectangle] {
        &self.rects
    }

    /// Sum of cell volumes in the box's own units.
    pub fn total_volume(&self) -> f64 {
        self.rects.iter().map(Rectangle::unit_volume).sum::<f64>() * self.bx.volume()
    }

    pub fn best(&self) -> &Rectangle {
        &self.rects[self.best]
    }

    /// Range of all sampled values.
    pub fn value_range(&self) -> f64 {
        self.f_max - self.f_min
    }

    /// True once every coordinate has been split at least once.
    pub fn all_axes_divided(&self) -> bool {
        (0..self.bx.dim()).all(|i| self.rects.iter().any(|r| r.levels[i] > 0))
    }

    /// Ids of the potentially optimal rectangles: for each distinct size the
    /// lowest-valued cell (lowest id on ties), kept if some rate constant
    /// `K > 0` puts it on the lower-right convex hull and
    /// `f - K·size <= f_min - ε|f_min|`.
    pub fn potentially_optimal(&self) -> Vec<usize> {
        let mut reps: Vec<(f64, f64, usize)> = Vec::new();
        let mut sized: Vec<(f64, f64, usize)> = self.rects.iter().map(|r| (r.size(), r.value, r.id)).collect();
        sized.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
        for r in sized {
            if reps.last().is_none_or(|last| last.0 != r.0) {
                reps.push(r);
            }
        }
        let f_min = self.f_min;
        let threshold = f_min - DIRECT_EPSILON * f_min.abs();
        let mut chosen = Vec::new();
        for (j, &(dj, fj, id)) in reps.iter().enumerate() {
            let k_low = reps[..j]
                .iter()
                .map(|&(di, fi, _)| (fj - fi) / (dj - di))
                .fold(0.0, f64::max);
            let k_high = reps[j + 1..]
                .iter()
                .map(|&(di, fi, _)| (fi - fj) / (di - dj))
                .fold(f64::INFINITY, f64::min);
            if k_high <= 0.0 || k_low > k_high {
                continue;
            }
            if k_high.is_infinite() || fj - k_high * dj <= threshold {
                chosen.push(id);
            }
        }
        chosen
    }

    /// Trisects every potentially optimal rectangle along its longest side
    /// (lowest index on ties). Returns the number of rectangles divided, or
    /// `None` if the budget ran out.
    pub fn step(&mut self, probe: &mut Probe<'_>) -> Result<Option<usize>> {
        let chosen = self.potentially_optimal();
        for &id in &chosen {
            let parent = self.rects[id].clone();
            let axis = (0..parent.levels.len())
                .min_by_key(|&i| (parent.levels[i], i))
                .expect("box has at least one dimension");
            let delta = parent.side(axis) / 3.0;
            let mut levels = parent.levels.clone();
            levels[axis] += 1;
            for sign in [-1.0, 1.0] {
                let mut center = parent.center.clone();
                center[axis] += sign * delta;
                let Some(v) = probe(&self.bx.from_unit(&center))? else {
                    return Ok(None);
                };
                let child = Rectangle {
                    id: self.rects.len(),
                    center,
                    levels: levels.clone(),
                    value: v,
                };
                self.f_max = self.f_max.max(v);
                if v < self.f_min {
                    self.f_min = v;
                    self.best = child.id;
                }
                self.rects.push(child);
            }
            self.rects[id].levels = levels;
        }
        Ok(Some(chosen.len()))
    }
}

/// Stops on `f_tol` once every coordinate has been split and all sampled
/// values have stayed within `f_tol` of each other for `n + 1` consecutive
/// iterations, and on `x_tol` when the best cell has all sides below `x_tol`.
fn direct(bx: &SearchBox, tol: Tolerances, probe: &mut Probe<'_>) -> Result<Termination> {
    let Some(mut state) = DirectState::new(bx, probe)? else {
        return Ok(Termination::Budget);
    };
    let mut flat = 0usize;
    loop {
        if state.step(probe)?.is_none() {
            return Ok(Termination::Budget);
        }
        if state.value_range() <= tol.f_tol && state.all_axes_divided() {
            flat += 1;
            if flat > bx.dim() {
                return Ok(Termination::FTol);
            }
        }
        let best = state.best();
        if (0..bx.dim()).all(|i| best.side(i) * bx.width(i) < tol.x_tol) {
            return Ok(Termination::XTol);
        }
    }
}

/// Draws uniformly from a window around the incumbent, intersected with the
/// box. The window starts as the whole box, shrinks after each failed draw
/// and is reset to the whole box once it falls below `x_tol`. Runs until the
/// budget is spent.
fn random_search(
    x0: &[f64],
    f0: f64,
    bx: &SearchBox,
    tol: Tolerances,
    seed: u64,
    probe: &mut Probe<'_>,
) -> Result<Termination> {
    let mut rng = crate::rng::seeded(seed);
    let (mut best, mut fbest) = (x0.to_vec(), f0);
    let mut radius = 1.0f64;
    loop {
        let x: Vec<f64> = (0..bx.dim())
            .map(|i| {
                let w = radius * bx.width(i);
                let lo = (best[i] - w).max(bx.lower()[i]);
                let hi = (best[i] + w).min(bx.upper()[i]);
                lo + rng.random::<f64>() * (hi - lo)
            })
            .collect();
        let Some(v) = probe(&x)? else {
            return Ok(Termination::Budget);
        };
        if v < fbest {
            best = x;
            fbest = v;
        } else {
            radius *= RANDOM_CONTRACTION;
            let widest = (0..bx.dim()).map(|i| bx.width(i)).fold(0.0, f64::max);
            if radius * widest < tol.x_tol {
                radius = 1.0;
            }
        }
    }
}
