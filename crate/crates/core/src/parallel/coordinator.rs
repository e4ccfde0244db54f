use std::time::Instant;

use crate::bnb::{evaluate_node, BBNode, NodeOutcome, Solution, SolveStats, SolverConfig};
use crate::error::{Error, Result};
use crate::heuristic::CutSolution;
use crate::instance::{Graph, Subproblem};

use super::wire::{Message, NodeRecord};
use super::worker::WorkerReport;
use super::{Dest, Outbox};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkerStatus {
    Idle,
    Busy,
}

/// The load coordinator as an event-driven state machine. It evaluates the
/// root itself, then only tracks worker status, brokers transfers and
/// merges incumbents.
#[derive(Debug)]
pub struct Coordinator {
    graph: Graph,
    status: Vec<WorkerStatus>,
    /// Transfers each worker must have received before an idle report
    /// from it can be trusted.
    expected: Vec<u64>,
    best: CutSolution,
    incumbent_history: Vec<f64>,
    stats: SolveStats,
    root_evaluated: bool,
    open_bound: Option<f64>,
    terminated: bool,
    start: Instant,
}

impl Coordinator {
    /// Broadcasts the instance, evaluates the root, broadcasts `diff` and
    /// the incumbent, and hands the root's children out round-robin.
    pub fn start(g: &Graph, cfg: &SolverConfig) -> Result<(Self, Outbox)> {
        cfg.validate()?;
        let workers = cfg.workers;
        let mut c = Coordinator {
            graph: g.clone(),
            status: vec![WorkerStatus::Idle; workers],
            expected: vec![0; workers],
            best: CutSolution::trivial(g),
            incumbent_history: vec![0.0],
            stats: SolveStats {
                nodes_created: 1,
                ..SolveStats::default()
            },
            root_evaluated: false,
            open_bound: None,
            terminated: false,
            start: Instant::now(),
        };
        let mut out: Outbox = (0..workers)
            .map(|r| (Dest::Worker(r), Message::BroadcastInstance(g.clone())))
            .collect();

        let mut children = Vec::new();
        let mut diff = 0.0;
        if g.n() < 2 {
            c.stats.leaves = 1;
            c.root_evaluated = true;
        } else if cfg.node_limit == Some(0) {
            c.stats.nodes_open = 1;
            c.open_bound = Some(f64::INFINITY);
        } else {
            let root = BBNode {
                sub: Subproblem::root(g),
                upper_bound: f64::INFINITY,
                depth: 0,
                id: 0,
            };
            let eval = evaluate_node(&root, g, cfg, c.best.value, None, &mut 1)?;
            c.root_evaluated = true;
            diff = (eval.basic_bound - eval.upper_bound).max(0.0);
            c.stats.merge(&eval.stats);
            if let Some(cut) = eval.candidate {
                c.merge_incumbent(cut);
            }
            if let NodeOutcome::Branched(ch) = eval.outcome {
                children.extend(ch);
            }
        }
        for r in 0..workers {
            out.push((Dest::Worker(r), Message::BroadcastDiff(diff)));
            out.push((Dest::Worker(r), Message::NewIncumbent(c.best.clone())));
        }
        for (k, child) in children.iter().enumerate() {
            let r = k % workers;
            c.status[r] = WorkerStatus::Busy;
            c.expected[r] += 1;
            out.push((
                Dest::Worker(r),
                Message::SubproblemTransfer {
                    node: NodeRecord::of(child),
                    incumbent: None,
                },
            ));
        }
        out.extend(c.maybe_terminate());
        Ok((c, out))
    }

    fn merge_incumbent(&mut self, cut: CutSolution) -> bool {
        if cut.value > self.best.value {
            self.best = cut;
            self.incumbent_history.push(self.best.value);
            true
        } else {
            false
        }
    }

    fn maybe_terminate(&mut self) -> Outbox {
        if self.terminated || self.status.iter().any(|&s| s == WorkerStatus::Busy) {
            return Outbox::new();
        }
        self.terminated = true;
        (0..self.status.len())
            .map(|r| (Dest::Worker(r), Message::Terminate))
            .collect()
    }

    fn check_rank(&self, rank: usize) -> Result<()> {
        if rank < self.status.len() {
            Ok(())
        } else {
            Err(Error::Protocol(format!("unknown worker rank {rank}")))
        }
    }

    pub fn handle(&mut self, msg: Message) -> Result<Outbox> {
        if self.terminated {
            return Err(Error::Protocol(format!(
                "coordinator got message kind {} after termination",
                msg.kind()
            )));
        }
        let mut out = Outbox::new();
        match msg {
            Message::WorkerIdle { rank, received } => {
                self.check_rank(rank)?;
                if received > self.expected[rank] {
                    return Err(Error::Protocol(format!(
                        "worker {rank} received more transfers than assigned"
                    )));
                }
                // otherwise a transfer is still in flight towards it
                if received == self.expected[rank] {
                    self.status[rank] = WorkerStatus::Idle;
                }
                out.extend(self.maybe_terminate());
            }
            Message::NewIncumbent(cut) => {
                if cut.assignment.len() != self.graph.n() || !cut.is_consistent(&self.graph) {
                    return Err(Error::Protocol(
                        "incumbent does not match the instance".into(),
                    ));
                }
                if self.merge_incumbent(cut) {
                    for r in 0..self.status.len() {
                        out.push((Dest::Worker(r), Message::NewIncumbent(self.best.clone())));
                    }
                }
            }
            Message::RequestWorkers { rank, count } => {
                self.check_rank(rank)?;
                let ranks: Vec<usize> = (0..self.status.len())
                    .filter(|&r| r != rank && self.status[r] == WorkerStatus::Idle)
                    .take(count)
                    .collect();
                for &r in &ranks {
                    self.status[r] = WorkerStatus::Busy;
                    self.expected[r] += 1;
                }
                out.push((Dest::Worker(rank), Message::AssignWorkers(ranks)));
            }
            other => {
                return Err(Error::Protocol(format!(
                    "coordinator cannot handle message kind {}",
                    other.kind()
                )))
            }
        }
        Ok(out)
    }

    pub fn is_finished(&self) -> bool {
        self.terminated
    }

    pub fn status(&self) -> &[WorkerStatus] {
        &self.status
    }

    pub fn incumbent(&self) -> &CutSolution {
        &self.best
    }

    /// Incumbent values in the order they were adopted.
    pub fn incumbent_history(&self) -> &[f64] {
        &self.incumbent_history
    }

    /// Combines the coordinator's view with the workers' final reports.
    pub fn finish(mut self, reports: &[WorkerReport]) -> Result<Solution> {
        if !self.terminated {
            return Err(Error::Protocol("finish before termination".into()));
        }
        let mut evaluated = u64::from(self.root_evaluated);
        let mut open_bound = self.open_bound;
        for rep in reports {
            evaluated += rep.nodes_evaluated;
            self.stats.merge(&rep.stats);
            if let Some(cut) = rep.best.clone() {
                self.merge_incumbent(cut);
            }
            if let Some(b) = rep.open_bound {
                open_bound = Some(open_bound.map_or(b, |o| o.max(b)));
            }
        }
        let proof = open_bound.is_none();
        Ok(Solution {
            optimum: self.best.value,
            upper_bound: open_bound.map_or(self.best.value, |b| b.max(self.best.value)),
            best_cut: self.best,
            nodes_evaluated: evaluated,
            wall_time: self.start.elapsed(),
            proof,
            stats: self.stats,
        })
    }
}
