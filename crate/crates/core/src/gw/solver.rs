//! Conditional-gradient (Frank-Wolfe) minimisation of the GW discrepancy
//! over the uniform transport polytope.
//!
//! Each iteration linearises the objective at the current plan, moves
//! towards the permutation vertex minimising that linearisation, and picks
//! the step by exact line search. The objective is a quadratic form, so it
//! is an exact parabola along the segment and three values pin it down.

use serde::{Deserialize, Serialize};

use super::objective::{check_shapes, gw_gradient, gw_objective, vertex_objective, PenaltyKind};
use crate::error::{Error, Result};
use crate::exec;
use crate::linear_ot::{coupling_from_permutation, product_coupling, solve_linear_ot, Coupling, Permutation};
use crate::mmspace::DistanceMatrix;
use crate::rng::{partial_shuffle, SplitMix64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GwConfig {
    pub max_iters: usize,
    /// Stop once an iteration lowers the objective by less than this
    /// fraction of its current value.
    pub tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
    pub penalty: PenaltyKind,
}

impl Default for GwConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            tolerance: 1e-9,
            restarts: 1,
            seed: 42,
            penalty: PenaltyKind::AbsL1,
        }
    }
}

impl GwConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::Parameter("max_iters must be >= 1".into()));
        }
        if self.restarts < 1 {
            return Err(Error::Parameter("restarts must be >= 1".into()));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Parameter("tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub objective: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GwSolveResult {
    /// Lowest discrepancy found across all restarts.
    pub value: f64,
    pub coupling: Coupling,
    /// Trace of the winning restart; entry 0 is the starting plan.
    pub trace: Vec<TraceEntry>,
    pub iterations_run: usize,
    pub converged: bool,
    pub restart_index: usize,
}

/// Minimiser over `[0, 1]` of the parabola through `(0, e0)`, `(1/2, e_half)`,
/// `(1, e1)`, together with its value there.
pub(crate) fn fit_step(e0: f64, e_half: f64, e1: f64) -> (f64, f64) {
    let curvature = 2.0 * (e1 - 2.0 * e_half + e0);
    let slope = e1 - e0 - curvature;
    let eval = |eta: f64| e0 + eta * (slope + eta * curvature);
    let fitted = if curvature > 0.0 {
        (-slope / (2.0 * curvature)).clamp(0.0, 1.0)
    } else if e1 < e0 {
        1.0
    } else {
        0.0
    };
    let mut best = (0.0, e0);
    for (eta, value) in [(fitted, eval(fitted)), (1.0, e1), (0.5, e_half)] {
        if value < best.1 {
            best = (eta, value);
        }
    }
    best
}

/// Exact line search from `pi` towards `vertex`.
///
/// Evaluates the discrepancy at steps 0, 1/2 and 1, fits the parabola,
/// and returns the best step in `[0, 1]` with the discrepancy there. The
/// returned objective never exceeds the one at `pi`; a zero direction
/// returns step 0.
pub fn line_search_step(
    pi: &Coupling,
    vertex: &Coupling,
    a: &DistanceMatrix,
    b: &DistanceMatrix,
    penalty: PenaltyKind,
) -> Result<(f64, f64)> {
    check_shapes(vertex, a, b)?;
    let e0 = gw_objective(pi, a, b, penalty)?;
    let e_half = gw_objective(&pi.interpolate(vertex, 0.5), a, b, penalty)?;
    let e1 = gw_objective(vertex, a, b, penalty)?;
    let (eta, _) = fit_step(e0, e_half, e1);
    if eta == 0.0 {
        return Ok((0.0, e0));
    }
    let value = gw_objective(&pi.interpolate(vertex, eta), a, b, penalty)?;
    if value < e0 {
        Ok((eta, value))
    } else {
        Ok((0.0, e0))
    }
}

/// Starting plans for `config.restarts` runs: the product coupling, then
/// permutation vertices drawn from `config.seed`.
pub fn initial_couplings(n: usize, config: &GwConfig) -> Result<Vec<Coupling>> {
    let mut starts = Vec::with_capacity(config.restarts);
    starts.push(product_coupling(n)?);
    for r in 1..config.restarts {
        let mut rng = SplitMix64::derive(config.seed, r as u64);
        let map = partial_shuffle(n, n, &mut rng);
        starts.push(coupling_from_permutation(&Permutation::new(map)?));
    }
    Ok(starts)
}

/// Frank-Wolfe from `config.restarts` starts; see [`initial_couplings`].
pub fn solve_gw(a: &DistanceMatrix, b: &DistanceMatrix, config: &GwConfig) -> Result<GwSolveResult> {
    config.validate()?;
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "spaces have {} and {} points",
            a.len(),
            b.len()
        )));
    }
    let starts = initial_couplings(a.len(), config)?;
    solve_gw_from(a, b, config, &starts)
}

/// Frank-Wolfe from each of `starts`, keeping the lowest final objective.
/// Ties go to the earlier start. `config.restarts` is ignored.
pub fn solve_gw_from(
    a: &DistanceMatrix,
    b: &DistanceMatrix,
    config: &GwConfig,
    starts: &[Coupling],
) -> Result<GwSolveResult> {
    config.validate()?;
    if starts.is_empty() {
        return Err(Error::Parameter("at least one starting coupling is required".into()));
    }
    for s in starts {
        check_shapes(s, a, b)?;
    }
    let runs = exec::map_indexed(starts.len(), |r| run_frank_wolfe(a, b, config, &starts[r], r));
    let mut best: Option<GwSolveResult> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.value < b.value) {
            best = Some(run);
        }
    }
    Ok(best.expect("starts is nonempty"))
}

fn run_frank_wolfe(
    a: &DistanceMatrix,
    b: &DistanceMatrix,
    config: &GwConfig,
    start: &Coupling,
    restart_index: usize,
) -> Result<GwSolveResult> {
    let penalty = config.penalty;
    let mut pi = start.clone();
    let mut objective = gw_objective(&pi, a, b, penalty)?;
    let mut trace = vec![TraceEntry {
        iteration: 0,
        objective,
        step: 0.0,
    }];
    let mut converged = objective == 0.0;
    let mut iterations_run = 0;

    while !converged && iterations_run < config.max_iters {
        iterations_run += 1;
        let grad = gw_gradient(&pi, a, b, penalty)?;
        let (perm, _) = solve_linear_ot(grad.view())?;
        let vertex = coupling_from_permutation(&perm);

        // E is a symmetric quadratic form E(x) = B(x, x) with <grad, y> =
        // 2 B(pi, y), so E at the midpoint is (E(pi) + E(vertex) + <grad, vertex>) / 4.
        let e1 = vertex_objective(perm.as_slice(), a.values(), b.values(), penalty);
        let cross = vertex.dot(grad.view());
        let e_half = 0.25 * (objective + e1 + cross);
        let (eta, next) = fit_step(objective, e_half, e1);
        let next = next.max(0.0);

        if eta == 0.0 || next >= objective {
            trace.push(TraceEntry {
                iteration: iterations_run,
                objective,
                step: 0.0,
            });
            converged = true;
            break;
        }
        pi = pi.interpolate(&vertex, eta);
        let decrease = (objective - next) / objective;
        objective = next;
        trace.push(TraceEntry {
            iteration: iterations_run,
            objective,
            step: eta,
        });
        if objective == 0.0 || decrease < config.tolerance {
            converged = true;
        }
    }

    // The trace carries the line-search values; report the plan's own
    // discrepancy so the value and the coupling agree exactly.
    let value = gw_objective(&pi, a, b, penalty)?;
    Ok(GwSolveResult {
        value,
        coupling: pi,
        trace,
        iterations_run,
        converged,
        restart_index,
    })
}
