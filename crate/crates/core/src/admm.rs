//! ADMM for the dual of the hypermetric-strengthened Max-Cut SDP
//!
//! ```text
//! max <L, X>  s.t.  diag(X) = e,  B(X) + s = e,  X psd,  s >= 0
//! min e'y + e't  s.t.  L - Diag(y) - B'(t) + Z = 0,  u - t = 0,  Z psd,  u >= 0
//! ```
//!
//! One iteration minimizes the augmented Lagrangian over `y`, `t`, `Z`, `u`
//! in turn, then updates the multipliers `X`, `s`. Every step has a closed
//! form: `y` from a diagonal, `t` from a cached Cholesky solve with
//! `BB' + I`, and `Z`, `u`, `X`, `s` from one spectral split of
//! `M = L - Diag(y) - B'(t) + X/rho` and the sign split of `v = t - s/rho`.
//! Cone membership of `X`, `Z`, `s`, `u` and complementarity hold after each
//! iteration by construction.

use nalgebra::DMatrix;

use crate::cuts::{adjoint_b_unchecked, apply_b_unchecked, CutPool, GramSolver};
use crate::error::{Error, Result};
use crate::instance::ObjectiveMatrix;
use crate::linalg::{eig_sym, spectral_zero_tol, split_from, SymMatrix};

/// All primal and dual iterates plus the penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub x: SymMatrix,
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    pub t: Vec<f64>,
    pub z: SymMatrix,
    pub u: Vec<f64>,
    pub rho: f64,
}

impl AdmmState {
    /// Cold start: every variable zero.
    pub fn zero(n: usize, m: usize, rho: f64) -> Self {
        AdmmState {
            x: SymMatrix::zeros(n),
            s: vec![0.0; m],
            y: vec![0.0; n],
            t: vec![0.0; m],
            z: SymMatrix::zeros(n),
            u: vec![0.0; m],
            rho,
        }
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }

    pub fn m(&self) -> usize {
        self.s.len()
    }

    fn check(&self, n: usize, m: usize) -> Result<()> {
        for (expected, got) in [
            (n, self.x.n()),
            (n, self.z.n()),
            (n, self.y.len()),
            (m, self.s.len()),
            (m, self.t.len()),
            (m, self.u.len()),
        ] {
            if expected != got {
                return Err(Error::Dimension { expected, got });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmParams {
    pub rho0: f64,
    pub eps: f64,
    pub max_iter: usize,
    /// Threshold on `log10` of the residual ratio.
    pub mu: f64,
    /// Multiplicative penalty step.
    pub tau: f64,
    pub rho_min: f64,
    pub rho_max: f64,
}

impl Default for AdmmParams {
    fn default() -> Self {
        AdmmParams {
            rho0: 1.6,
            eps: 1e-5,
            max_iter: 20_000,
            mu: 0.5,
            tau: 1.001,
            rho_min: 1e-4,
            rho_max: 1e4,
        }
    }
}

/// Output of one full iteration besides the new state.
#[derive(Debug, Clone)]
pub(crate) struct StepInfo {
    /// `F` with `X = F F^T`, from the spectral split of `M`.
    pub factor: DMatrix<f64>,
}

pub fn admm_iterate(
    state: &AdmmState,
    l: &ObjectiveMatrix,
    pool: &CutPool,
    gram: &GramSolver,
) -> Result<AdmmState> {
    let mut next = state.clone();
    step(&mut next, l, pool, gram)?;
    Ok(next)
}

pub(crate) fn step(
    st: &mut AdmmState,
    l: &ObjectiveMatrix,
    pool: &CutPool,
    gram: &GramSolver,
) -> Result<StepInfo> {
    let n = l.n();
    let rho = st.rho;
    let inv_rho = 1.0 / rho;

    // W = L + Z + X/rho; diag(B'(t)) = 0, so y depends on W alone.
    let mut w = l.matrix().clone();
    w += &st.z;
    w.axpy(inv_rho, &st.x);
    st.y = w.diag().iter().map(|d| d - inv_rho).collect();

    if !pool.is_empty() {
        // B(Diag(y)) = 0, so B(W - Diag(y)) = B(W).
        let bw = apply_b_unchecked(pool, &w);
        let rhs: Vec<f64> = bw
            .iter()
            .zip(&st.u)
            .zip(&st.s)
            .map(|((b, u), s)| b + u + (s - 1.0) * inv_rho)
            .collect();
        st.t = gram.solve(&rhs)?;
    }
    let v: Vec<f64> =
        st.t.iter()
            .zip(&st.s)
            .map(|(t, s)| t - s * inv_rho)
            .collect();

    // M = W - Z - Diag(y) - B'(t) = L - Diag(y) - B'(t) + X/rho
    let mut m = w;
    m.axpy(-1.0, &st.z);
    m.add_diag(&st.y, -1.0);
    if !pool.is_empty() {
        m.axpy(-1.0, &adjoint_b_unchecked(pool, &st.t, n));
    }

    let decomp = eig_sym(&m)?;
    let tol = spectral_zero_tol(&m);
    let (m_plus, m_minus) = split_from(&decomp, tol);
    st.z = &m_minus * -1.0;
    st.x = &m_plus * rho;
    st.u = v.iter().map(|&vi| vi.max(0.0)).collect();
    st.s = v.iter().map(|&vi| -rho * vi.min(0.0)).collect();

    Ok(StepInfo {
        factor: decomp.positive_factor(rho, tol),
    })
}

/// Scaled primal and dual infeasibility.
pub fn residuals(state: &AdmmState, l: &ObjectiveMatrix, pool: &CutPool) -> (f64, f64) {
    let n = l.n();
    let diag_err = norm2(state.x.diag().iter().map(|d| d - 1.0));
    let bx = apply_b_unchecked(pool, &state.x);
    let ineq_err = norm2(bx.iter().map(|b| (b - 1.0).max(0.0)));
    let r_p = (diag_err + ineq_err) / (1.0 + (n as f64).sqrt());

    let mut dual = l.matrix().clone();
    dual.add_diag(&state.y, -1.0);
    if !pool.is_empty() {
        dual.axpy(-1.0, &adjoint_b_unchecked(pool, &state.t, n));
    }
    dual += &state.z;
    let ut = norm2(state.u.iter().zip(&state.t).map(|(u, t)| u - t));
    let r_d = (dual.norm_fro() + ut) / (1.0 + l.matrix().norm_fro());
    (r_p, r_d)
}

fn norm2(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// Penalty adaptation keeping both residuals at the same order of
/// magnitude.
pub fn update_rho(rho: f64, r_p: f64, r_d: f64) -> f64 {
    update_rho_with(rho, r_p, r_d, &AdmmParams::default())
}

pub fn update_rho_with(rho: f64, r_p: f64, r_d: f64, p: &AdmmParams) -> f64 {
    if r_p < 1e-15 || r_d < 1e-15 {
        return rho;
    }
    let next = if (r_d / r_p).log10() > p.mu {
        rho * p.tau
    } else if (r_p / r_d).log10() > p.mu {
        rho / p.tau
    } else {
        rho
    };
    next.clamp(p.rho_min, p.rho_max)
}

/// A dual objective value made provably valid by an eigenvalue shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafeBound {
    /// Shifted value plus a rounding guard of a few ulps.
    pub value: f64,
    /// `e'y + e'u`.
    pub raw: f64,
    /// Smallest eigenvalue of `Diag(y) + B'(u) - L`.
    pub lambda_min: f64,
}

/// With `t <- u`, `Z_hat = Diag(y) + B'(u) - L` satisfies the dual equation
/// exactly; if it is not psd, shifting `y` by `-lambda_min e` makes it so at
/// a cost of `-n lambda_min` in the objective.
pub fn safe_bound(state: &AdmmState, l: &ObjectiveMatrix, pool: &CutPool) -> Result<SafeBound> {
    let n = l.n();
    state.check(n, pool.len())?;
    if state.u.iter().any(|&u| u < 0.0) {
        return Err(Error::Degenerate("safe bound needs u >= 0".into()));
    }
    let mut z_hat = adjoint_b_unchecked(pool, &state.u, n);
    z_hat.add_diag(&state.y, 1.0);
    z_hat.axpy(-1.0, l.matrix());
    let lambda_min = z_hat.min_eigenvalue()?;
    let raw = state.y.iter().sum::<f64>() + state.u.iter().sum::<f64>();
    let value = if lambda_min >= 0.0 {
        raw
    } else {
        raw - n as f64 * lambda_min
    };
    // Floating-point slack: backward error of the eigensolver (a few ulps of
    // ||Z_hat|| per eigenvalue, n of them) plus the summation of e'y + e'u.
    let magnitude = state.y.iter().chain(&state.u).map(|v| v.abs()).sum::<f64>();
    let value = value + 4.0 * f64::EPSILON * (n as f64 * z_hat.norm_fro() + magnitude);
    Ok(SafeBound {
        value,
        raw,
        lambda_min,
    })
}

#[derive(Debug, Clone)]
pub struct AdmmResult {
    pub state: AdmmState,
    pub safe_bound: f64,
    pub raw_dual_value: f64,
    pub lambda_min: f64,
    /// `<L, X>` at the final iterate.
    pub primal_value: f64,
    pub r_p: f64,
    pub r_d: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `F` with `X = F F^T`, columns `sqrt(rho lambda) s` of the last `M`.
    pub factor: DMatrix<f64>,
}

/// Runs ADMM to `max(r_P, r_D) < eps` or `max_iter`, then post-processes
/// the dual into a safe bound. A non-converged run still returns a valid
/// bound.
pub fn admm_solve(
    l: &ObjectiveMatrix,
    pool: &CutPool,
    warm: Option<AdmmState>,
    params: &AdmmParams,
) -> Result<AdmmResult> {
    if !(params.rho0 > 0.0) || !(params.eps > 0.0) {
        return Err(Error::Degenerate("rho0 and eps must be positive".into()));
    }
    let n = l.n();
    let m = pool.len();
    if let Some(cut) = pool
        .cuts()
        .iter()
        .find(|c| c.support().iter().any(|&i| i >= n))
    {
        return Err(Error::IndexOutOfRange {
            index: *cut.support().last().unwrap(),
            n,
        });
    }
    let mut state = match warm {
        Some(w) => {
            w.check(n, m)?;
            w
        }
        None => AdmmState::zero(n, m, params.rho0),
    };
    let gram = GramSolver::new(pool)?;

    let mut factor = None;
    let (mut r_p, mut r_d) = (f64::INFINITY, f64::INFINITY);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iter {
        let info = step(&mut state, l, pool, &gram)?;
        factor = Some(info.factor);
        iterations += 1;
        (r_p, r_d) = residuals(&state, l, pool);
        if r_p.max(r_d) < params.eps {
            converged = true;
            break;
        }
        state.rho = update_rho_with(state.rho, r_p, r_d, params);
    }
    let factor = match factor {
        Some(f) => f,
        None => {
            let d = eig_sym(&state.x)?;
            d.positive_factor(1.0, spectral_zero_tol(&state.x))
        }
    };
    let bound = safe_bound(&state, l, pool)?;
    Ok(AdmmResult {
        primal_value: l.matrix().inner(&state.x),
        safe_bound: bound.value,
        raw_dual_value: bound.raw,
        lambda_min: bound.lambda_min,
        state,
        r_p,
        r_d,
        iterations,
        converged,
        factor,
    })
}
