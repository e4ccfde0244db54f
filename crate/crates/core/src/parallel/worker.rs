use std::collections::BinaryHeap;
use std::time::Instant;

use crate::bnb::{evaluate_node, should_prune, BBNode, NodeOutcome, SolveStats, SolverConfig};
use crate::error::{Error, Result};
use crate::heuristic::CutSolution;
use crate::instance::Graph;

use super::wire::{Message, NodeRecord};
use super::{Dest, Outbox};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkerState {
    /// Local queue empty; waiting for a transfer or termination.
    Idle,
    Working,
    /// Sent `RequestWorkers`, waiting for the coordinator's answer.
    AwaitingAssign,
    Terminated,
}

/// What a worker hands back once it has terminated.
#[derive(Debug, Clone)]
pub struct WorkerReport {
    pub rank: usize,
    pub nodes_evaluated: u64,
    pub stats: SolveStats,
    pub best: Option<CutSolution>,
    /// Largest bound among nodes dropped when a budget ran out.
    pub open_bound: Option<f64>,
    pub terminates_received: usize,
}

/// One worker as an event-driven state machine: feed it messages with
/// [`Worker::handle`], and call [`Worker::step`] to evaluate one node
/// whenever [`Worker::has_work`] is true.
#[derive(Debug)]
pub struct Worker {
    rank: usize,
    cfg: SolverConfig,
    graph: Option<Graph>,
    diff: Option<f64>,
    lb: f64,
    best: Option<CutSolution>,
    queue: BinaryHeap<BBNode>,
    /// Transfers from peers can overtake the coordinator's broadcast of the
    /// instance; they wait here until it arrives.
    pending: Vec<NodeRecord>,
    state: WorkerState,
    received: u64,
    next_id: u64,
    evaluated: u64,
    stats: SolveStats,
    open_bound: Option<f64>,
    terminates: usize,
    start: Instant,
}

impl Worker {
    pub fn new(rank: usize, cfg: SolverConfig) -> Self {
        Worker {
            rank,
            cfg,
            graph: None,
            diff: None,
            // the empty cut is always feasible
            lb: 0.0,
            best: None,
            queue: BinaryHeap::new(),
            pending: Vec::new(),
            state: WorkerState::Idle,
            received: 0,
            next_id: (rank as u64 + 1) << 40,
            evaluated: 0,
            stats: SolveStats::default(),
            open_bound: None,
            terminates: 0,
            start: Instant::now(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn state(&self) -> WorkerState {
        self.state
    }

    pub fn lower_bound(&self) -> f64 {
        self.lb
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    /// True when [`Worker::step`] can run: there are nodes, and the
    /// instance and `diff` have arrived.
    pub fn has_work(&self) -> bool {
        self.state == WorkerState::Working && self.graph.is_some() && self.diff.is_some()
    }

    pub fn is_terminated(&self) -> bool {
        self.state == WorkerState::Terminated
    }

    fn adopt(&mut self, cut: CutSolution) -> bool {
        if cut.value > self.lb || self.best.is_none() {
            self.lb = self.lb.max(cut.value);
            self.best = Some(cut);
            return true;
        }
        false
    }

    pub fn handle(&mut self, msg: Message) -> Result<Outbox> {
        if self.state == WorkerState::Terminated {
            return Err(Error::Protocol(format!(
                "worker {} got a message after termination",
                self.rank
            )));
        }
        let mut out = Outbox::new();
        match msg {
            Message::BroadcastInstance(g) => {
                for node in std::mem::take(&mut self.pending) {
                    let node = node.rebuild(&g, self.next_id)?;
                    self.next_id += 1;
                    self.queue.push(node);
                }
                self.graph = Some(g);
            }
            Message::BroadcastDiff(d) => self.diff = Some(d),
            Message::NewIncumbent(cut) => {
                self.adopt(cut);
            }
            Message::SubproblemTransfer { node, incumbent } => {
                match &self.graph {
                    Some(g) => {
                        let node = node.rebuild(g, self.next_id)?;
                        self.next_id += 1;
                        self.queue.push(node);
                    }
                    None => self.pending.push(node),
                }
                self.received += 1;
                if let Some(cut) = incumbent {
                    self.adopt(cut);
                }
                if self.state == WorkerState::Idle {
                    self.state = WorkerState::Working;
                }
            }
            Message::AssignWorkers(ranks) => {
                if self.state != WorkerState::AwaitingAssign {
                    return Err(Error::Protocol(format!(
                        "worker {} got an unrequested assignment",
                        self.rank
                    )));
                }
                if ranks.len() >= self.queue.len() {
                    return Err(Error::Protocol(format!(
                        "assigned {} workers with {} queued nodes",
                        ranks.len(),
                        self.queue.len()
                    )));
                }
                for r in ranks {
                    let node = self.queue.pop().expect("checked above");
                    let transfer = Message::SubproblemTransfer {
                        node: NodeRecord::of(&node),
                        incumbent: self.best.clone(),
                    };
                    out.push((Dest::Worker(r), transfer));
                }
                self.state = WorkerState::Working;
            }
            Message::Terminate => {
                self.terminates += 1;
                self.state = WorkerState::Terminated;
            }
            other => {
                return Err(Error::Protocol(format!(
                    "worker {} cannot handle message kind {}",
                    self.rank,
                    other.kind()
                )))
            }
        }
        Ok(out)
    }

    fn over_budget(&self) -> bool {
        self.cfg.node_limit.is_some_and(|lim| self.evaluated >= lim)
            || self
                .cfg
                .time_limit
                .is_some_and(|lim| self.start.elapsed() >= lim)
    }

    /// Evaluates the best local node and reports what follows from it.
    pub fn step(&mut self) -> Result<Outbox> {
        if self.state != WorkerState::Working {
            return Err(Error::Protocol(format!(
                "worker {} stepped while {:?}",
                self.rank, self.state
            )));
        }
        let (Some(g), Some(diff)) = (self.graph.as_ref(), self.diff) else {
            return Err(Error::Protocol("node work before instance and diff".into()));
        };
        let mut out = Outbox::new();
        let mut branched = false;
        if self.over_budget() {
            self.stats.nodes_open += self.queue.len() as u64;
            let dropped = self
                .queue
                .drain()
                .map(|n| n.upper_bound)
                .fold(f64::NEG_INFINITY, f64::max);
            self.open_bound = Some(self.open_bound.map_or(dropped, |b| b.max(dropped)));
        } else if let Some(node) = self.queue.pop() {
            self.evaluated += 1;
            if should_prune(
                node.upper_bound,
                self.lb,
                g.integer_weights(),
                self.cfg.gap_tol,
            ) {
                self.stats.nodes_pruned += 1;
            } else {
                let eval =
                    evaluate_node(&node, g, &self.cfg, self.lb, Some(diff), &mut self.next_id)?;
                self.stats.merge(&eval.stats);
                if let Some(cut) = eval.candidate {
                    if cut.value > self.lb && self.adopt(cut.clone()) {
                        out.push((Dest::Coordinator, Message::NewIncumbent(cut)));
                    }
                }
                if let NodeOutcome::Branched(children) = eval.outcome {
                    self.queue.extend(children);
                    branched = true;
                }
            }
        }

        if self.queue.is_empty() {
            self.state = WorkerState::Idle;
            out.push((
                Dest::Coordinator,
                Message::WorkerIdle {
                    rank: self.rank,
                    received: self.received,
                },
            ));
        } else if branched && self.queue.len() >= 2 {
            self.state = WorkerState::AwaitingAssign;
            out.push((
                Dest::Coordinator,
                Message::RequestWorkers {
                    rank: self.rank,
                    count: self.queue.len() - 1,
                },
            ));
        }
        Ok(out)
    }

    pub fn report(&self) -> WorkerReport {
        WorkerReport {
            rank: self.rank,
            nodes_evaluated: self.evaluated,
            stats: self.stats.clone(),
            best: self.best.clone(),
            open_bound: self.open_bound,
            terminates_received: self.terminates,
        }
    }
}
