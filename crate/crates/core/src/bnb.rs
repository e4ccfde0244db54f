//! Serial best-bound-first branch and bound.
//!
//! Every node gets the basic bound first. The root then always runs the full
//! cutting-plane loop, and the gap it closes there (`diff`) decides for every
//! later node whether cutting planes are worth trying or whether to branch
//! right away on the basic relaxation.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::admm::AdmmParams;
use crate::bounding::{solve_basic, strengthen, BoundingParams};
use crate::error::{Error, Result};
use crate::heuristic::{generate_cuts, CutSolution};
use crate::instance::{reduce_subproblem, Graph, Subproblem};
use crate::linalg::SymMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branching {
    /// Vertex whose relaxed side is closest to 1/2.
    #[default]
    MostFractional,
    /// Vertex whose relaxed side is closest to 0 or 1.
    LeastFractional,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub rho0: f64,
    pub eps: f64,
    pub max_iter: usize,
    pub branching: Branching,
    pub max_rounds: usize,
    pub root_max_rounds: usize,
    pub min_progress: f64,
    /// Pentagonal and heptagonal budgets at first escalation.
    pub hyp_initial: (usize, usize),
    pub seed: u64,
    pub gap_tol: f64,
    pub workers: usize,
    pub node_limit: Option<u64>,
    pub time_limit: Option<Duration>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho0: 1.6,
            eps: 1e-5,
            max_iter: AdmmParams::default().max_iter,
            branching: Branching::MostFractional,
            max_rounds: 25,
            root_max_rounds: 50,
            min_progress: 1e-2,
            hyp_initial: (200, 100),
            seed: 0,
            gap_tol: 1e-4,
            workers: 1,
            node_limit: None,
            time_limit: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return Err(Error::Config(format!(
                "rho0 must be positive, got {}",
                self.rho0
            )));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if !(self.gap_tol >= 0.0) {
            return Err(Error::Config("gap_tol must be non-negative".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("at least one worker is required".into()));
        }
        Ok(())
    }

    pub fn bounding_params(&self, root: bool, seed: u64) -> BoundingParams {
        BoundingParams {
            admm: AdmmParams {
                rho0: self.rho0,
                eps: self.eps,
                max_iter: self.max_iter,
                ..AdmmParams::default()
            },
            max_rounds: if root {
                self.root_max_rounds
            } else {
                self.max_rounds
            },
            min_progress: self.min_progress,
            pent_initial: self.hyp_initial.0,
            hept_initial: self.hyp_initial.1,
            forecast: !root,
            gap_tol: self.gap_tol,
            seed,
            ..BoundingParams::default()
        }
    }
}

/// A queued subproblem together with the best bound known for it.
#[derive(Debug, Clone)]
pub struct BBNode {
    pub sub: Subproblem,
    pub upper_bound: f64,
    pub depth: usize,
    pub id: u64,
}

impl PartialEq for BBNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for BBNode {}

impl PartialOrd for BBNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Greater means higher priority: larger bound, then smaller id.
impl Ord for BBNode {
    fn cmp(&self, other: &Self) -> Ordering {
        self.upper_bound
            .total_cmp(&other.upper_bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub nodes_created: u64,
    pub nodes_pruned: u64,
    pub nodes_branched: u64,
    pub leaves: u64,
    /// Nodes left unexplored when a budget ran out.
    pub nodes_open: u64,
    pub admm_iterations: u64,
    pub cutting_rounds: u64,
    /// Cuts separated, indexed by order 3, 5, 7.
    pub cuts_separated: [u64; 3],
}

impl SolveStats {
    pub fn merge(&mut self, other: &SolveStats) {
        self.nodes_created += other.nodes_created;
        self.nodes_pruned += other.nodes_pruned;
        self.nodes_branched += other.nodes_branched;
        self.leaves += other.leaves;
        self.nodes_open += other.nodes_open;
        self.admm_iterations += other.admm_iterations;
        self.cutting_rounds += other.cutting_rounds;
        for k in 0..3 {
            self.cuts_separated[k] += other.cuts_separated[k];
        }
    }

    /// Every created node was pruned, branched, solved as a leaf or left open.
    pub fn balanced(&self) -> bool {
        self.nodes_created
            == self.nodes_pruned + self.nodes_branched + self.leaves + self.nodes_open
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub best_cut: CutSolution,
    pub optimum: f64,
    pub nodes_evaluated: u64,
    pub wall_time: Duration,
    /// True iff the queue was exhausted.
    pub proof: bool,
    /// Largest bound over unexplored nodes, or the optimum with a proof.
    pub upper_bound: f64,
    pub stats: SolveStats,
}

/// Picks the reduced index to branch on from the last column of `X`
/// (without its final entry). Ties go to the smallest index.
pub fn branch_variable(x_last_column: &[f64], rule: Branching) -> Result<usize> {
    let dist = |x: f64| ((x + 1.0) / 2.0 - 0.5).abs();
    let mut best: Option<(f64, usize)> = None;
    for (i, &x) in x_last_column.iter().enumerate() {
        let d = dist(x);
        let better = match (best, rule) {
            (None, _) => true,
            (Some((b, _)), Branching::MostFractional) => d < b,
            (Some((b, _)), Branching::LeastFractional) => d > b,
        };
        if better {
            best = Some((d, i));
        }
    }
    best.map(|(_, i)| i)
        .ok_or_else(|| Error::Degenerate("no free vertex to branch on".into()))
}

pub fn should_prune(ub: f64, lb: f64, integer_weights: bool, gap_tol: f64) -> bool {
    if integer_weights {
        ub < lb + 1.0
    } else {
        ub < lb + gap_tol
    }
}

/// True when the basic bound is close enough to `lb` that cutting planes
/// may prune the node.
pub fn diff_gate(basic_bound: f64, lb: f64, diff: f64) -> bool {
    basic_bound <= lb + diff + 1.0
}

/// Seed for the randomized parts of one node, derived from its fixings so
/// that it does not depend on traversal order.
pub(crate) fn node_seed(seed: u64, fixed: &BTreeMap<usize, u8>) -> u64 {
    let mut h = seed ^ 0x243F_6A88_85A3_08D3;
    for (&v, &val) in fixed {
        h = splitmix(h ^ ((v as u64) << 1 | u64::from(val)));
    }
    splitmix(h)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub enum NodeOutcome {
    Pruned,
    /// Every vertex is fixed; the node is a single cut.
    Leaf,
    Branched([BBNode; 2]),
}

/// Result of one node step, shared by the serial and parallel drivers.
#[derive(Debug, Clone)]
pub struct NodeEval {
    pub outcome: NodeOutcome,
    /// Best cut found at this node, if the heuristic ran.
    pub candidate: Option<CutSolution>,
    pub basic_bound: f64,
    pub upper_bound: f64,
    pub stats: SolveStats,
}

/// Bounds, rounds and branches one node. `diff` is `None` at the root,
/// which always runs the full cutting-plane loop. `next_id` numbers the
/// children.
pub fn evaluate_node(
    node: &BBNode,
    g: &Graph,
    cfg: &SolverConfig,
    lb: f64,
    diff: Option<f64>,
    next_id: &mut u64,
) -> Result<NodeEval> {
    let sub = &node.sub;
    let mut stats = SolveStats::default();
    let integer = g.integer_weights();
    if sub.reduced().n() < 2 {
        let cut = CutSolution::new(g, sub.lift(&vec![0; sub.reduced().n()]));
        stats.leaves = 1;
        return Ok(NodeEval {
            outcome: NodeOutcome::Leaf,
            basic_bound: cut.value,
            upper_bound: cut.value,
            candidate: Some(cut),
            stats,
        });
    }

    let seed = node_seed(cfg.seed, sub.fixed());
    let params = cfg.bounding_params(diff.is_none(), seed);
    let mut lb = lb;
    let mut candidate: Option<CutSolution> = None;

    let basic = solve_basic(sub, &params)?;
    stats.admm_iterations += basic.iterations() as u64;
    offer(
        generate_cuts(&basic.factor(), sub, g, seed),
        &mut lb,
        &mut candidate,
    );
    let basic_bound = basic.bound;
    let mut ub = basic_bound.min(node.upper_bound);

    let x: SymMatrix = if should_prune(ub, lb, integer, cfg.gap_tol) {
        stats.nodes_pruned = 1;
        return Ok(NodeEval {
            outcome: NodeOutcome::Pruned,
            candidate,
            basic_bound,
            upper_bound: ub,
            stats,
        });
    } else if diff.is_none_or(|d| diff_gate(basic_bound, lb, d)) {
        let report = strengthen(sub, lb, &params, basic)?;
        // includes the basic solve
        stats.admm_iterations = report.admm_iterations as u64;
        stats.cutting_rounds = report.rounds as u64;
        for k in 0..3 {
            stats.cuts_separated[k] = report.separated[k] as u64;
        }
        if report.rounds > 0 {
            offer(
                generate_cuts(&report.factor, sub, g, seed.rotate_left(1)),
                &mut lb,
                &mut candidate,
            );
        }
        ub = ub.min(report.upper_bound);
        report.x
    } else {
        basic.x()
    };

    if should_prune(ub, lb, integer, cfg.gap_tol) {
        stats.nodes_pruned = 1;
        return Ok(NodeEval {
            outcome: NodeOutcome::Pruned,
            candidate,
            basic_bound,
            upper_bound: ub,
            stats,
        });
    }

    let k = x.n() - 1;
    let column: Vec<f64> = (0..k).map(|i| x.get(i, k)).collect();
    let vertex = sub.free_vertices()[branch_variable(&column, cfg.branching)?];
    let child = |value: u8, id: u64| -> Result<BBNode> {
        Ok(BBNode {
            sub: reduce_subproblem(sub, vertex, value)?,
            upper_bound: ub,
            depth: node.depth + 1,
            id,
        })
    };
    let children = [child(0, *next_id)?, child(1, *next_id + 1)?];
    *next_id += 2;
    stats.nodes_branched = 1;
    stats.nodes_created = 2;
    Ok(NodeEval {
        outcome: NodeOutcome::Branched(children),
        candidate,
        basic_bound,
        upper_bound: ub,
        stats,
    })
}

fn offer(cut: CutSolution, lb: &mut f64, candidate: &mut Option<CutSolution>) {
    *lb = lb.max(cut.value);
    if candidate.as_ref().is_none_or(|c| cut.value > c.value) {
        *candidate = Some(cut);
    }
}

pub fn solve_serial(g: &Graph, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    let start = Instant::now();
    let mut best = CutSolution::trivial(g);
    let mut stats = SolveStats {
        nodes_created: 1,
        ..SolveStats::default()
    };
    if g.n() < 2 {
        stats.leaves = 1;
        return Ok(Solution {
            optimum: best.value,
            best_cut: best,
            nodes_evaluated: 1,
            wall_time: start.elapsed(),
            proof: true,
            upper_bound: 0.0,
            stats,
        });
    }

    let mut queue = BinaryHeap::new();
    queue.push(BBNode {
        sub: Subproblem::root(g),
        upper_bound: f64::INFINITY,
        depth: 0,
        id: 0,
    });
    let mut next_id = 1;
    let mut diff: Option<f64> = None;
    let mut evaluated = 0u64;
    let mut proof = true;

    while let Some(node) = queue.pop() {
        let over_nodes = cfg.node_limit.is_some_and(|lim| evaluated >= lim);
        let over_time = cfg.time_limit.is_some_and(|lim| start.elapsed() >= lim);
        if over_nodes || over_time {
            queue.push(node);
            proof = false;
            break;
        }
        evaluated += 1;
        if should_prune(
            node.upper_bound,
            best.value,
            g.integer_weights(),
            cfg.gap_tol,
        ) {
            stats.nodes_pruned += 1;
            continue;
        }
        let eval = evaluate_node(&node, g, cfg, best.value, diff, &mut next_id)?;
        if diff.is_none() {
            diff = Some((eval.basic_bound - eval.upper_bound).max(0.0));
        }
        if let Some(c) = eval.candidate {
            if c.value > best.value {
                best = c;
            }
        }
        stats.merge(&eval.stats);
        if let NodeOutcome::Branched(children) = eval.outcome {
            queue.extend(children);
        }
    }

    stats.nodes_open = queue.len() as u64;
    let upper_bound = queue
        .iter()
        .map(|n| n.upper_bound)
        .fold(best.value, f64::max);
    Ok(Solution {
        optimum: best.value,
        best_cut: best,
        nodes_evaluated: evaluated,
        wall_time: start.elapsed(),
        proof,
        upper_bound,
        stats,
    })
}
