//! Hypermetric cutting planes `<bb^T, X> >= 1` with `b` in `{-1, 0, 1}^n`
//! and 3, 5 or 7 nonzero entries (triangle, pentagonal, heptagonal).
//!
//! Expanding `<bb^T, X> >= 1` with `diag(X) = e` gives
//! `-sum_{p<q} b_p b_q X_pq <= (k - 1) / 2`; every row is scaled by
//! `2 / (k - 1)` so the pool reads `B(X) <= e`. The operator only touches
//! off-diagonal entries, which makes `B(Diag(y)) = 0` and
//! `diag(B^T(t)) = 0` hold exactly.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{factorize_spd, solve, SparseFactorization, SparseSym, SymMatrix};

/// Violations at or below this are not worth adding.
pub const VIOLATION_TOL: f64 = 1e-4;
pub const ACTIVE_SLACK_TOL: f64 = 1e-5;
pub const ACTIVE_DUAL_TOL: f64 = 1e-5;

/// A hypermetric inequality in canonical form: support sorted ascending and
/// the first sign `+1` (`bb^T` does not see a global sign flip).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HypermetricCut {
    support: Vec<usize>,
    signs: Vec<i8>,
}

impl HypermetricCut {
    pub fn new(support: &[usize], signs: &[i8]) -> Result<Self> {
        let k = support.len();
        if !matches!(k, 3 | 5 | 7) || signs.len() != k {
            return Err(Error::Degenerate(format!("hypermetric cut of order {k}")));
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Degenerate("cut signs must be +1 or -1".into()));
        }
        let mut pairs: Vec<(usize, i8)> =
            support.iter().copied().zip(signs.iter().copied()).collect();
        pairs.sort_unstable();
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Degenerate(
                "cut support has repeated vertices".into(),
            ));
        }
        let flip = pairs[0].1;
        Ok(HypermetricCut {
            support: pairs.iter().map(|p| p.0).collect(),
            signs: pairs.iter().map(|p| p.1 * flip).collect(),
        })
    }

    pub fn triangle(i: usize, j: usize, k: usize, signs: [i8; 3]) -> Self {
        Self::new(&[i, j, k], &signs).expect("valid triangle")
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn order(&self) -> usize {
        self.support.len()
    }

    pub fn scale(&self) -> f64 {
        2.0 / (self.order() as f64 - 1.0)
    }

    /// `(p, q, coefficient)` for every support pair `p < q`; the row of `B`
    /// is `sum coefficient * X_pq`.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let scale = self.scale();
        let k = self.order();
        (0..k).flat_map(move |a| {
            (a + 1..k).map(move |b| {
                let c = -scale * f64::from(self.signs[a] * self.signs[b]);
                (self.support[a], self.support[b], c)
            })
        })
    }

    pub fn evaluate(&self, x: &SymMatrix) -> f64 {
        self.terms().map(|(p, q, c)| c * x.get(p, q)).sum()
    }

    pub fn violation(&self, x: &SymMatrix) -> f64 {
        self.evaluate(x) - 1.0
    }

    fn max_index(&self) -> usize {
        *self.support.last().expect("non-empty support")
    }
}

/// An ordered, duplicate-free list of cuts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CutPool {
    cuts: Vec<HypermetricCut>,
    index: HashMap<HypermetricCut, usize>,
}

impl CutPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a cut unless an identical one is present.
    pub fn push(&mut self, cut: HypermetricCut) -> bool {
        if self.index.contains_key(&cut) {
            return false;
        }
        self.index.insert(cut.clone(), self.cuts.len());
        self.cuts.push(cut);
        true
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn cuts(&self) -> &[HypermetricCut] {
        &self.cuts
    }

    pub fn position(&self, cut: &HypermetricCut) -> Option<usize> {
        self.index.get(cut).copied()
    }

    pub fn count_by_order(&self, k: usize) -> usize {
        self.cuts.iter().filter(|c| c.order() == k).count()
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        match self.cuts.iter().map(HypermetricCut::max_index).max() {
            Some(idx) if idx >= n => Err(Error::IndexOutOfRange { index: idx, n }),
            _ => Ok(()),
        }
    }
}

impl FromIterator<HypermetricCut> for CutPool {
    fn from_iter<I: IntoIterator<Item = HypermetricCut>>(iter: I) -> Self {
        let mut pool = CutPool::new();
        for c in iter {
            pool.push(c);
        }
        pool
    }
}

pub fn apply_b(pool: &CutPool, x: &SymMatrix) -> Result<Vec<f64>> {
    pool.check_dim(x.n())?;
    Ok(apply_b_unchecked(pool, x))
}

pub(crate) fn apply_b_unchecked(pool: &CutPool, x: &SymMatrix) -> Vec<f64> {
    pool.cuts.iter().map(|c| c.evaluate(x)).collect()
}

/// `B^T(t) = sum t_i A_i`, with half of each coefficient on both mirror
/// positions.
pub fn adjoint_b(pool: &CutPool, t: &[f64], n: usize) -> Result<SymMatrix> {
    if t.len() != pool.len() {
        return Err(Error::Dimension {
            expected: pool.len(),
            got: t.len(),
        });
    }
    pool.check_dim(n)?;
    Ok(adjoint_b_unchecked(pool, t, n))
}

pub(crate) fn adjoint_b_unchecked(pool: &CutPool, t: &[f64], n: usize) -> SymMatrix {
    let mut m = SymMatrix::zeros(n);
    for (cut, &ti) in pool.cuts.iter().zip(t) {
        if ti == 0.0 {
            continue;
        }
        for (p, q, c) in cut.terms() {
            m.add(p, q, 0.5 * c * ti);
        }
    }
    m
}

/// `BB^T + I` with entries `<A_i, A_j> + [i = j]`.
pub fn assemble_gram(pool: &CutPool) -> SparseSym {
    let m = pool.len();
    let mut by_pair: HashMap<(usize, usize), Vec<(usize, f64)>> = HashMap::new();
    for (i, cut) in pool.cuts.iter().enumerate() {
        for (p, q, c) in cut.terms() {
            by_pair.entry((p, q)).or_default().push((i, c));
        }
    }
    let mut acc: HashMap<(usize, usize), f64> = HashMap::new();
    for members in by_pair.values() {
        for (a, &(i, ci)) in members.iter().enumerate() {
            for &(j, cj) in &members[..=a] {
                // Both mirror positions carry c/2: 2 * (ci/2) * (cj/2).
                let key = if i >= j { (i, j) } else { (j, i) };
                *acc.entry(key).or_default() += 0.5 * ci * cj;
            }
        }
    }
    let mut trip: Vec<(usize, usize, f64)> = acc.into_iter().map(|((i, j), v)| (i, j, v)).collect();
    trip.extend((0..m).map(|i| (i, i, 1.0)));
    trip.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    SparseSym::from_triplets(m, trip)
}

/// Solves `(BB^T + I) t = r` with a factorization computed once per pool.
///
/// `B` has one column per vertex pair a cut touches, so once a pool holds
/// more cuts than touched pairs the Woodbury form
/// `(I + BB^T)^{-1} = I - B (I + B^T B)^{-1} B^T` factors the smaller
/// matrix instead. Large hypermetric pools on dense graphs overlap so much
/// that the `m x m` factor fills in completely; the pair-side one stays at
/// most `n(n-1)/2` wide.
#[derive(Debug, Clone)]
pub enum GramSolver {
    Cuts(SparseFactorization),
    Pairs {
        /// Row `i` of `B` as `(pair column, entry)`.
        rows: Vec<Vec<(usize, f64)>>,
        factor: SparseFactorization,
    },
}

impl GramSolver {
    pub fn new(pool: &CutPool) -> Result<Self> {
        let mut column: HashMap<(usize, usize), usize> = HashMap::new();
        // entries are c / sqrt(2) so that BB^T matches `assemble_gram`
        let rows: Vec<Vec<(usize, f64)>> = pool
            .cuts
            .iter()
            .map(|cut| {
                cut.terms()
                    .map(|(p, q, c)| {
                        let next = column.len();
                        (
                            *column.entry((p, q)).or_insert(next),
                            c * std::f64::consts::FRAC_1_SQRT_2,
                        )
                    })
                    .collect()
            })
            .collect();
        let q = column.len();
        if q >= pool.len() {
            return Ok(GramSolver::Cuts(factorize_spd(&assemble_gram(pool))?));
        }
        let mut acc: HashMap<(usize, usize), f64> = HashMap::new();
        for row in &rows {
            for (a, &(i, bi)) in row.iter().enumerate() {
                for &(j, bj) in &row[..=a] {
                    let key = if i >= j { (i, j) } else { (j, i) };
                    *acc.entry(key).or_default() += bi * bj;
                }
            }
        }
        let mut trip: Vec<(usize, usize, f64)> =
            acc.into_iter().map(|((i, j), v)| (i, j, v)).collect();
        trip.extend((0..q).map(|i| (i, i, 1.0)));
        trip.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let factor = factorize_spd(&SparseSym::from_triplets(q, trip))?;
        Ok(GramSolver::Pairs { rows, factor })
    }

    /// Size of the system actually factored.
    pub fn factored_dim(&self) -> usize {
        match self {
            GramSolver::Cuts(f) | GramSolver::Pairs { factor: f, .. } => f.n(),
        }
    }

    pub fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        match self {
            GramSolver::Cuts(f) => solve(f, r),
            GramSolver::Pairs { rows, factor } => {
                if r.len() != rows.len() {
                    return Err(Error::Dimension {
                        expected: rows.len(),
                        got: r.len(),
                    });
                }
                let mut bt_r = vec![0.0; factor.n()];
                for (row, &ri) in rows.iter().zip(r) {
                    for &(j, b) in row {
                        bt_r[j] += b * ri;
                    }
                }
                let w = solve(factor, &bt_r)?;
                Ok(rows
                    .iter()
                    .zip(r)
                    .map(|(row, &ri)| ri - row.iter().map(|&(j, b)| b * w[j]).sum::<f64>())
                    .collect())
            }
        }
    }
}

/// Result of a separation scan: violated cuts, most violated first, and the
/// largest violation seen over the whole scan (violated or not).
#[derive(Debug, Clone, Default)]
pub struct Separation {
    pub cuts: Vec<HypermetricCut>,
    pub max_violation: f64,
}

const TRIANGLE_SIGNS: [[i8; 3]; 4] = [[1, 1, 1], [1, 1, -1], [1, -1, 1], [1, -1, -1]];

/// Scans all `4 * C(n, 3)` triangle inequalities.
pub fn triangle_scan(x: &SymMatrix, limit: usize) -> Separation {
    let n = x.n();
    let mut found: Vec<(f64, HypermetricCut)> = Vec::new();
    let mut max_violation = f64::NEG_INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let xij = x.get(i, j);
            for k in j + 1..n {
                let (xik, xjk) = (x.get(i, k), x.get(j, k));
                let values = [
                    -xij - xik - xjk,
                    -xij + xik + xjk,
                    xij - xik + xjk,
                    xij + xik - xjk,
                ];
                for (v, signs) in values.iter().zip(TRIANGLE_SIGNS) {
                    let viol = v - 1.0;
                    max_violation = max_violation.max(viol);
                    if viol > VIOLATION_TOL {
                        found.push((viol, HypermetricCut::triangle(i, j, k, signs)));
                    }
                }
            }
        }
    }
    found.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    found.truncate(limit);
    Separation {
        cuts: found.into_iter().map(|(_, c)| c).collect(),
        max_violation: if n < 3 { 0.0 } else { max_violation },
    }
}

pub fn separate_triangles(x: &SymMatrix, limit: usize) -> Vec<HypermetricCut> {
    triangle_scan(x, limit).cuts
}

/// Annealing schedule for hypermetric separation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    pub t_start: f64,
    pub t_end: f64,
    pub cooling: f64,
    /// Give up after this many consecutive restarts that yield nothing new.
    pub stale_restarts: usize,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule {
            t_start: 1.0,
            t_end: 1e-3,
            cooling: 0.95,
            stale_restarts: 20,
        }
    }
}

/// Simulated annealing over placements of `k` nonzero `±1` entries of `b`,
/// maximizing the violation. One restart per requested cut, each with its
/// own seed.
pub fn hypermetric_scan(
    x: &SymMatrix,
    k: usize,
    count: usize,
    seed: u64,
    schedule: &AnnealSchedule,
) -> Separation {
    let n = x.n();
    assert!(
        matches!(k, 5 | 7),
        "hypermetric separation handles k = 5 or 7"
    );
    if n < k || count == 0 {
        return Separation::default();
    }
    let scale = 2.0 / (k as f64 - 1.0);
    let moves_per_temp = n * k;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut max_violation = f64::NEG_INFINITY;
    let mut stale = 0;

    for attempt in 0..count {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed ^ (attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut support = rand::seq::index::sample(&mut rng, n, k).into_vec();
        let mut signs: Vec<f64> = (0..k)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let mut in_support = vec![false; n];
        for &v in &support {
            in_support[v] = true;
        }
        // sum_{p<q} b_p b_q X_pq
        let mut sum = 0.0;
        for a in 0..k {
            for b in a + 1..k {
                sum += signs[a] * signs[b] * x.get(support[a], support[b]);
            }
        }
        let mut best_sum = sum;
        let mut best = (support.clone(), signs.clone());

        let mut temp = schedule.t_start;
        while temp > schedule.t_end {
            for _ in 0..moves_per_temp {
                let p = rng.random_range(0..k);
                let relocate = n > k && rng.random_bool(0.5);
                let (delta_sum, target) = if relocate {
                    let mut c = rng.random_range(0..n - k);
                    // c-th vertex outside the support
                    let mut v = 0;
                    loop {
                        if !in_support[v] {
                            if c == 0 {
                                break;
                            }
                            c -= 1;
                        }
                        v += 1;
                    }
                    let a = support[p];
                    let d: f64 = (0..k)
                        .filter(|&q| q != p)
                        .map(|q| signs[q] * (x.get(v, support[q]) - x.get(a, support[q])))
                        .sum();
                    (signs[p] * d, Some(v))
                } else {
                    let d: f64 = (0..k)
                        .filter(|&q| q != p)
                        .map(|q| signs[q] * x.get(support[p], support[q]))
                        .sum();
                    (-2.0 * signs[p] * d, None)
                };
                // violation = -scale * sum - 1
                let delta_viol = -scale * delta_sum;
                if delta_viol >= 0.0 || rng.random::<f64>() < (delta_viol / temp).exp() {
                    match target {
                        Some(v) => {
                            in_support[support[p]] = false;
                            in_support[v] = true;
                            support[p] = v;
                        }
                        None => signs[p] = -signs[p],
                    }
                    sum += delta_sum;
                    if sum < best_sum {
                        best_sum = sum;
                        best = (support.clone(), signs.clone());
                    }
                }
            }
            temp *= schedule.cooling;
        }

        let signs_i8: Vec<i8> = best.1.iter().map(|&s| s as i8).collect();
        let cut = HypermetricCut::new(&best.0, &signs_i8).expect("annealing keeps a valid support");
        // Recompute from scratch; the running sum accumulates rounding.
        let viol = cut.violation(x);
        max_violation = max_violation.max(viol);
        if viol > VIOLATION_TOL && seen.insert(cut.clone()) {
            out.push((viol, cut));
            stale = 0;
        } else {
            stale += 1;
            if stale >= schedule.stale_restarts {
                break;
            }
        }
    }
    out.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    Separation {
        cuts: out.into_iter().map(|(_, c)| c).collect(),
        max_violation,
    }
}

pub fn separate_hypermetric(
    x: &SymMatrix,
    k: usize,
    count: usize,
    seed: u64,
) -> Vec<HypermetricCut> {
    hypermetric_scan(x, k, count, seed, &AnnealSchedule::default()).cuts
}

/// Keeps cut `i` iff it is tight (`s_i <= ACTIVE_SLACK_TOL`) or carries dual
/// weight (`u_i >= ACTIVE_DUAL_TOL`).
pub fn purge_inactive(pool: &CutPool, s: &[f64], u: &[f64]) -> Result<CutPool> {
    purge_inactive_with(pool, s, u, ACTIVE_SLACK_TOL, ACTIVE_DUAL_TOL)
}

pub fn purge_inactive_with(
    pool: &CutPool,
    s: &[f64],
    u: &[f64],
    slack_tol: f64,
    dual_tol: f64,
) -> Result<CutPool> {
    for v in [s, u] {
        if v.len() != pool.len() {
            return Err(Error::Dimension {
                expected: pool.len(),
                got: v.len(),
            });
        }
    }
    Ok(pool
        .cuts
        .iter()
        .zip(s.iter().zip(u))
        .filter(|(_, (&si, &ui))| si <= slack_tol || ui >= dual_tol)
        .map(|(c, _)| c.clone())
        .collect())
}
