//! Cutting-plane bounding of one branch-and-bound node.
//!
//! The basic relaxation is solved first with an empty pool. Then rounds of
//! ADMM alternate with purging inactive cuts and separating new ones:
//! triangles every round, pentagonal cuts once the worst triangle violation
//! is small, heptagonal cuts once the worst pentagonal violation is small.
//! Each round is warm-started from the previous one. The loop stops when the
//! node can be pruned, progress stalls, the linear forecast says the gap
//! will not close, or the round budget runs out.

use nalgebra::DMatrix;

use crate::admm::{admm_solve, AdmmParams, AdmmResult, AdmmState};
use crate::bnb::should_prune;
use crate::cuts::{hypermetric_scan, purge_inactive, triangle_scan, AnnealSchedule, CutPool};
use crate::error::Result;
use crate::instance::{objective_matrix, Subproblem};
use crate::linalg::SymMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundingParams {
    pub admm: AdmmParams,
    pub max_rounds: usize,
    /// Smallest absolute bound decrease per round worth continuing for.
    pub min_progress: f64,
    pub pent_initial: usize,
    pub hept_initial: usize,
    /// Added to both hypermetric budgets after every round that does not
    /// prune the node.
    pub hyp_growth: usize,
    /// Triangle cuts separated per round, as a multiple of `n`.
    pub triangles_per_vertex: usize,
    pub pent_threshold: f64,
    pub hept_threshold: f64,
    pub anneal: AnnealSchedule,
    /// Stop early on a pessimistic linear forecast (never at the root).
    pub forecast: bool,
    pub gap_tol: f64,
    pub seed: u64,
}

impl Default for BoundingParams {
    fn default() -> Self {
        BoundingParams {
            admm: AdmmParams::default(),
            max_rounds: 25,
            min_progress: 1e-2,
            pent_initial: 200,
            hept_initial: 100,
            hyp_growth: 200,
            triangles_per_vertex: 10,
            pent_threshold: 0.2,
            hept_threshold: 0.4,
            anneal: AnnealSchedule::default(),
            forecast: true,
            gap_tol: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    Forecast,
    RoundLimit,
}

/// Empty-pool bound of a node. `bound` includes the subproblem offset.
#[derive(Debug, Clone)]
pub struct BasicBound {
    pub bound: f64,
    pub result: Option<AdmmResult>,
}

impl BasicBound {
    pub fn x(&self) -> SymMatrix {
        self.result
            .as_ref()
            .map_or_else(|| SymMatrix::identity(1), |r| r.state.x.clone())
    }

    pub fn factor(&self) -> DMatrix<f64> {
        self.result
            .as_ref()
            .map_or_else(|| DMatrix::from_element(1, 1, 1.0), |r| r.factor.clone())
    }

    pub fn iterations(&self) -> usize {
        self.result.as_ref().map_or(0, |r| r.iterations)
    }
}

#[derive(Debug, Clone)]
pub struct BoundReport {
    /// Best safe bound over all rounds, offset included.
    pub upper_bound: f64,
    pub basic_bound: f64,
    /// Primal matrix of the last solve.
    pub x: SymMatrix,
    pub factor: DMatrix<f64>,
    pub pool: CutPool,
    pub state: Option<AdmmState>,
    pub rounds: usize,
    pub stopped_by: StopReason,
    /// Best bound after the basic solve and after every round.
    pub history: Vec<f64>,
    pub iterations_per_round: Vec<usize>,
    pub admm_iterations: usize,
    /// Cuts separated, indexed by order 3, 5, 7.
    pub separated: [usize; 3],
}

/// Solves the basic relaxation of `sub`. A fully fixed node has a single
/// vertex and its bound is the offset.
pub fn solve_basic(sub: &Subproblem, params: &BoundingParams) -> Result<BasicBound> {
    if sub.reduced().n() < 2 {
        return Ok(BasicBound {
            bound: sub.offset(),
            result: None,
        });
    }
    let l = objective_matrix(sub.reduced())?;
    let result = admm_solve(&l, &CutPool::new(), None, &params.admm)?;
    Ok(BasicBound {
        bound: result.safe_bound + sub.offset(),
        result: Some(result),
    })
}

pub fn bound_node(
    sub: &Subproblem,
    lb: f64,
    params: &BoundingParams,
    warm: Option<AdmmState>,
) -> Result<BoundReport> {
    let basic = match warm {
        Some(state) if sub.reduced().n() >= 2 && state.n() == sub.reduced().n() => {
            let l = objective_matrix(sub.reduced())?;
            let warm = AdmmState {
                s: vec![],
                t: vec![],
                u: vec![],
                ..state
            };
            let result = admm_solve(&l, &CutPool::new(), Some(warm), &params.admm)?;
            BasicBound {
                bound: result.safe_bound + sub.offset(),
                result: Some(result),
            }
        }
        _ => solve_basic(sub, params)?,
    };
    strengthen(sub, lb, params, basic)
}

/// Runs the cutting-plane rounds on top of an already computed basic bound.
pub fn strengthen(
    sub: &Subproblem,
    lb: f64,
    params: &BoundingParams,
    basic: BasicBound,
) -> Result<BoundReport> {
    let integer = sub.reduced().integer_weights();
    let prunable = |ub: f64| should_prune(ub, lb, integer, params.gap_tol);
    let mut report = BoundReport {
        upper_bound: basic.bound,
        basic_bound: basic.bound,
        x: basic.x(),
        factor: basic.factor(),
        pool: CutPool::new(),
        state: None,
        rounds: 0,
        stopped_by: StopReason::Converged,
        history: vec![basic.bound],
        iterations_per_round: Vec::new(),
        admm_iterations: basic.iterations(),
        separated: [0; 3],
    };
    let Some(basic_result) = basic.result else {
        return Ok(report);
    };
    if prunable(report.upper_bound) {
        return Ok(report);
    }
    let l = objective_matrix(sub.reduced())?;
    let n = l.n();
    let mut state = basic_result.state;
    let mut pool = CutPool::new();
    let mut budgets = (params.pent_initial, params.hept_initial);

    let mut next_pool = separate(
        &report.x,
        pool.clone(),
        n,
        params,
        budgets,
        0,
        &mut report.separated,
    );
    loop {
        if next_pool.is_empty() || (report.rounds > 0 && next_pool == pool) {
            report.stopped_by = StopReason::Converged;
            break;
        }
        if report.rounds >= params.max_rounds {
            report.stopped_by = StopReason::RoundLimit;
            break;
        }
        let warm = remap_warm_start(&state, &pool, &next_pool);
        let res = admm_solve(&l, &next_pool, Some(warm), &params.admm)?;
        report.rounds += 1;
        report.admm_iterations += res.iterations;
        report.iterations_per_round.push(res.iterations);
        report.upper_bound = report.upper_bound.min(res.safe_bound + sub.offset());
        report.history.push(report.upper_bound);
        report.x = res.state.x.clone();
        report.factor = res.factor;
        state = res.state;
        pool = next_pool;

        if prunable(report.upper_bound) {
            report.stopped_by = StopReason::Converged;
            break;
        }
        let h = &report.history;
        if h[h.len() - 2] - h[h.len() - 1] < params.min_progress {
            report.stopped_by = StopReason::Converged;
            break;
        }
        if params.forecast
            && forecast_stop(
                &report.history,
                lb,
                params.max_rounds.saturating_sub(report.rounds),
            )
        {
            report.stopped_by = StopReason::Forecast;
            break;
        }
        budgets.0 += params.hyp_growth;
        budgets.1 += params.hyp_growth;
        let kept = purge_inactive(&pool, &state.s, &state.u)?;
        next_pool = separate(
            &report.x,
            kept,
            n,
            params,
            budgets,
            report.rounds as u64,
            &mut report.separated,
        );
    }
    report.pool = pool;
    report.state = Some(state);
    Ok(report)
}

/// Adds newly violated cuts to `pool`, escalating from triangles to
/// pentagonal and heptagonal cuts as the lower-order violations shrink.
fn separate(
    x: &SymMatrix,
    mut pool: CutPool,
    n: usize,
    params: &BoundingParams,
    (pent_budget, hept_budget): (usize, usize),
    round: u64,
    separated: &mut [usize; 3],
) -> CutPool {
    let tri = triangle_scan(x, params.triangles_per_vertex * n);
    separated[0] += tri.cuts.iter().filter(|&c| pool.push(c.clone())).count();
    if tri.max_violation < params.pent_threshold && n >= 5 {
        let seed = params.seed ^ round.wrapping_mul(0xA24B_AED4_963E_E407);
        let pent = hypermetric_scan(x, 5, pent_budget, seed, &params.anneal);
        separated[1] += pent.cuts.iter().filter(|&c| pool.push(c.clone())).count();
        if pent.max_violation < params.hept_threshold && n >= 7 {
            let hept = hypermetric_scan(x, 7, hept_budget, seed.rotate_left(17), &params.anneal);
            separated[2] += hept.cuts.iter().filter(|&c| pool.push(c.clone())).count();
        }
    }
    pool
}

/// Extrapolates the average decrease over the last few rounds; true when
/// the bound cannot reach pruning range within `rounds_left` rounds.
pub fn forecast_stop(bound_history: &[f64], lb: f64, rounds_left: usize) -> bool {
    let len = bound_history.len();
    if len < 2 {
        return false;
    }
    let window = (len - 1).min(3);
    let current = bound_history[len - 1];
    let avg_decrease = (bound_history[len - 1 - window] - current) / window as f64;
    current - rounds_left as f64 * avg_decrease > lb + 1.0
}

/// Carries `X`, `Z`, `y`, `rho` over and keeps `(s_i, u_i)` for cuts that
/// survive into `new_pool`; new cuts start at zero and `t` restarts at `u`.
pub fn remap_warm_start(old: &AdmmState, old_pool: &CutPool, new_pool: &CutPool) -> AdmmState {
    let mut s = vec![0.0; new_pool.len()];
    let mut u = vec![0.0; new_pool.len()];
    for (i, cut) in new_pool.cuts().iter().enumerate() {
        if let Some(j) = old_pool.position(cut) {
            s[i] = old.s[j];
            u[i] = old.u[j];
        }
    }
    AdmmState {
        x: old.x.clone(),
        y: old.y.clone(),
        z: old.z.clone(),
        rho: old.rho,
        t: u.clone(),
        s,
        u,
    }
}
