//! Coordinator–worker branch and bound.
//!
//! One coordinator evaluates the root and then only brokers work: it tracks
//! which workers are idle, answers requests for helpers, and keeps the
//! global incumbent. Each worker runs the serial node step on its own
//! priority queue and, after branching, asks for idle workers to hand nodes
//! to. The run ends when every worker is idle with no transfer in flight.
//!
//! Both sides are plain state machines ([`Coordinator`], [`Worker`]) that
//! consume [`Message`]s and return the messages to send. [`solve_parallel`]
//! runs them on threads with channels carrying encoded frames;
//! [`harness`] runs them on one thread under a seeded random schedule.

mod coordinator;
pub mod harness;
pub mod wire;
mod worker;

use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender, TryRecvError};
use std::thread;
use std::time::Duration;

use crate::bnb::{Solution, SolverConfig};
use crate::error::{Error, Result};
use crate::instance::Graph;

pub use coordinator::{Coordinator, WorkerStatus};
pub use wire::{decode_message, decode_node, encode_message, encode_node, Message, NodeRecord};
pub use worker::{Worker, WorkerReport, WorkerState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dest {
    Coordinator,
    Worker(usize),
}

/// Messages produced by one state-machine transition, in send order.
pub type Outbox = Vec<(Dest, Message)>;

struct Links {
    coordinator: Sender<Vec<u8>>,
    workers: Vec<Sender<Vec<u8>>>,
}

impl Links {
    fn send(&self, out: Outbox) -> Result<()> {
        for (dest, msg) in out {
            let tx = match dest {
                Dest::Coordinator => &self.coordinator,
                Dest::Worker(r) => self
                    .workers
                    .get(r)
                    .ok_or_else(|| Error::Protocol(format!("no worker {r}")))?,
            };
            tx.send(encode_message(&msg))
                .map_err(|_| Error::Protocol(format!("channel to {dest:?} closed")))?;
        }
        Ok(())
    }
}

fn run_worker(mut worker: Worker, rx: Receiver<Vec<u8>>, links: Links) -> Result<WorkerReport> {
    while !worker.is_terminated() {
        let frame = if worker.has_work() {
            match rx.try_recv() {
                Ok(f) => Some(f),
                Err(TryRecvError::Empty) => None,
                Err(TryRecvError::Disconnected) => {
                    return Err(Error::Protocol("coordinator vanished".into()))
                }
            }
        } else {
            Some(
                rx.recv()
                    .map_err(|_| Error::Protocol("coordinator vanished".into()))?,
            )
        };
        let out = match frame {
            Some(f) => worker.handle(decode_message(&f)?)?,
            None => worker.step()?,
        };
        links.send(out)?;
    }
    Ok(worker.report())
}

/// Solves `g` with `cfg.workers` worker threads plus the calling thread as
/// coordinator. A node budget applies to each worker separately.
pub fn solve_parallel(g: &Graph, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    let w = cfg.workers;
    let (coord_tx, coord_rx) = mpsc::channel();
    let (worker_txs, worker_rxs): (Vec<_>, Vec<_>) = (0..w).map(|_| mpsc::channel()).unzip();

    thread::scope(|scope| {
        let handles: Vec<_> = worker_rxs
            .into_iter()
            .enumerate()
            .map(|(rank, rx)| {
                let links = Links {
                    coordinator: coord_tx.clone(),
                    workers: worker_txs.clone(),
                };
                let worker = Worker::new(rank, cfg.clone());
                scope.spawn(move || run_worker(worker, rx, links))
            })
            .collect();
        let links = Links {
            coordinator: coord_tx.clone(),
            workers: worker_txs.clone(),
        };
        drop(coord_tx);

        let abort = |links: &Links, err: Error| {
            // unblock everyone; errors here just mean a worker already left
            for tx in &links.workers {
                let _ = tx.send(encode_message(&Message::Terminate));
            }
            Err(err)
        };

        let mut coordinator =
            match Coordinator::start(g, cfg).and_then(|(c, out)| links.send(out).map(|_| c)) {
                Ok(c) => c,
                Err(e) => return abort(&links, e),
            };
        while !coordinator.is_finished() {
            let step = match coord_rx.recv_timeout(Duration::from_millis(20)) {
                Ok(frame) => decode_message(&frame)
                    .and_then(|m| coordinator.handle(m))
                    .and_then(|out| links.send(out)),
                Err(RecvTimeoutError::Timeout) if handles.iter().any(|h| h.is_finished()) => Err(
                    Error::Protocol("a worker stopped before termination".into()),
                ),
                Err(RecvTimeoutError::Timeout) => Ok(()),
                Err(RecvTimeoutError::Disconnected) => {
                    Err(Error::Protocol("all workers vanished".into()))
                }
            };
            if let Err(e) = step {
                return abort(&links, e);
            }
        }
        let mut reports = Vec::with_capacity(w);
        for h in handles {
            let rep = h
                .join()
                .map_err(|_| Error::Protocol("worker panicked".into()))??;
            reports.push(rep);
        }
        coordinator.finish(&reports)
    })
}
