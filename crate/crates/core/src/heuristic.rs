//! Feasible cuts from the relaxation: Goemans-Williamson hyperplane rounding
//! of the primal factor, polished by single-vertex flips.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::instance::{Graph, Subproblem};

/// A side assignment over the original vertices and its cut weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutSolution {
    pub assignment: Vec<u8>,
    pub value: f64,
}

impl CutSolution {
    pub fn new(g: &Graph, assignment: Vec<u8>) -> Self {
        let value = g.cut_value(&assignment);
        CutSolution { assignment, value }
    }

    /// Everything on side 0; value 0.
    pub fn trivial(g: &Graph) -> Self {
        CutSolution {
            assignment: vec![0; g.n()],
            value: 0.0,
        }
    }

    pub fn is_consistent(&self, g: &Graph) -> bool {
        let v = g.cut_value(&self.assignment);
        if g.integer_weights() {
            v == self.value
        } else {
            (v - self.value).abs() <= 1e-9 * (1.0 + v.abs())
        }
    }

    /// 1-based vertex list of the side not containing the last vertex.
    pub fn side_one(&self) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == 1)
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// Rounds with hyperplane `r`: one side is `{i : v_i' r >= 0}`, where `v_i`
/// is row `i` of `factor` (`X = F F'`).
///
/// The last lifted coordinate is the constant `+1` of `[x; 1]`, which sits
/// opposite the representative vertex, so the representative takes the
/// other side from it.
pub fn gw_round(factor: &DMatrix<f64>, r: &[f64], sub: &Subproblem, g: &Graph) -> CutSolution {
    assert_eq!(
        factor.ncols(),
        r.len(),
        "hyperplane dimension must match factor rank"
    );
    let mut reduced_side: Vec<u8> = (0..factor.nrows())
        .map(|i| {
            let dot: f64 = factor.row(i).iter().zip(r).map(|(a, b)| a * b).sum();
            u8::from(dot >= 0.0)
        })
        .collect();
    if let Some(last) = reduced_side.last_mut() {
        *last ^= 1;
    }
    CutSolution::new(g, sub.lift(&reduced_side))
}

/// Gain of moving `i` to the other side.
fn flip_gain(adj: &[Vec<f64>], side: &[u8], i: usize) -> f64 {
    adj[i]
        .iter()
        .zip(side)
        .map(|(&w, &s)| if s == side[i] { w } else { -w })
        .sum()
}

/// Applies the best improving single-vertex flip until none is left.
pub fn local_search_1flip(cut: &CutSolution, g: &Graph) -> CutSolution {
    let adj = g.adjacency();
    let tol = 1e-12 * g.edges().iter().map(|e| e.w.abs()).sum::<f64>().max(1.0);
    let mut side = cut.assignment.clone();
    loop {
        let best = (0..g.n())
            .map(|i| (flip_gain(&adj, &side, i), i))
            .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
        match best {
            Some((gain, i)) if gain > tol => side[i] ^= 1,
            _ => break,
        }
    }
    CutSolution::new(g, side)
}

/// True when no single flip increases the cut by more than round-off.
pub fn is_one_flip_optimal(cut: &CutSolution, g: &Graph) -> bool {
    let adj = g.adjacency();
    let tol = 1e-12 * g.edges().iter().map(|e| e.w.abs()).sum::<f64>().max(1.0);
    (0..g.n()).all(|i| flip_gain(&adj, &cut.assignment, i) <= tol)
}

/// Uniform direction on the sphere of dimension `dim`.
pub fn random_hyperplane(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let r: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 || dim == 0 {
            return r
                .into_iter()
                .map(|x| x / norm.max(f64::MIN_POSITIVE))
                .collect();
        }
    }
}

/// Best of `g.n()` rounded-and-polished cuts.
pub fn generate_cuts(factor: &DMatrix<f64>, sub: &Subproblem, g: &Graph, seed: u64) -> CutSolution {
    generate_cuts_with_trials(factor, sub, g, seed, g.n())
}

pub fn generate_cuts_with_trials(
    factor: &DMatrix<f64>,
    sub: &Subproblem,
    g: &Graph,
    seed: u64,
    trials: usize,
) -> CutSolution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<CutSolution> = None;
    for _ in 0..trials.max(1) {
        let r = random_hyperplane(&mut rng, factor.ncols());
        let cut = local_search_1flip(&gw_round(factor, &r, sub, g), g);
        if best.as_ref().is_none_or(|b| cut.value > b.value) {
            best = Some(cut);
        }
    }
    best.expect("at least one trial")
}
