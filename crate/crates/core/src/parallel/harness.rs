//! Single-threaded runner that delivers messages in a seeded random order.
//!
//! Every ordered pair of endpoints is a FIFO channel, as with real message
//! passing; the scheduler picks uniformly among the non-empty channels and
//! the workers that can take a step. Frames go through the wire encoding.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bnb::{Solution, SolverConfig};
use crate::error::{Error, Result};
use crate::instance::Graph;

use super::{
    decode_message, encode_message, Coordinator, Dest, Message, Outbox, Worker, WorkerReport,
};

#[derive(Debug, Clone)]
pub struct ScriptedRun {
    pub solution: Solution,
    pub reports: Vec<WorkerReport>,
    /// `Terminate` messages delivered to each worker.
    pub terminates: Vec<usize>,
    pub messages_delivered: usize,
    pub incumbent_history: Vec<f64>,
}

type Channels = BTreeMap<(Dest, Dest), VecDeque<Vec<u8>>>;

fn post(channels: &mut Channels, from: Dest, out: Outbox) {
    for (to, msg) in out {
        channels
            .entry((from, to))
            .or_default()
            .push_back(encode_message(&msg));
    }
}

enum Action {
    Deliver(Dest, Dest),
    Step(usize),
}

pub fn run_scripted(g: &Graph, cfg: &SolverConfig, schedule_seed: u64) -> Result<ScriptedRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(schedule_seed);
    let mut workers: Vec<Worker> = (0..cfg.workers)
        .map(|r| Worker::new(r, cfg.clone()))
        .collect();
    let mut channels = Channels::new();
    let (mut coordinator, out) = Coordinator::start(g, cfg)?;
    post(&mut channels, Dest::Coordinator, out);
    let mut terminates = vec![0; cfg.workers];
    let mut delivered = 0;

    loop {
        let mut actions: Vec<Action> = channels
            .iter()
            .filter(|(_, q)| !q.is_empty())
            .map(|(&(from, to), _)| Action::Deliver(from, to))
            .collect();
        actions.extend(
            workers
                .iter()
                .filter(|w| w.has_work())
                .map(|w| Action::Step(w.rank())),
        );
        if actions.is_empty() {
            break;
        }
        let (from, out) = match actions.swap_remove(rng.random_range(0..actions.len())) {
            Action::Step(r) => (Dest::Worker(r), workers[r].step()?),
            Action::Deliver(from, to) => {
                let frame = channels
                    .get_mut(&(from, to))
                    .and_then(VecDeque::pop_front)
                    .expect("non-empty");
                let msg = decode_message(&frame)?;
                delivered += 1;
                match to {
                    Dest::Coordinator => (to, coordinator.handle(msg)?),
                    Dest::Worker(r) => {
                        if msg == Message::Terminate {
                            terminates[r] += 1;
                        }
                        (to, workers[r].handle(msg)?)
                    }
                }
            }
        };
        post(&mut channels, from, out);
    }

    if !coordinator.is_finished() {
        return Err(Error::Protocol(
            "deadlock: nothing to deliver and no work left".into(),
        ));
    }
    if let Some(w) = workers.iter().find(|w| !w.is_terminated()) {
        return Err(Error::Protocol(format!(
            "worker {} never terminated",
            w.rank()
        )));
    }
    let reports: Vec<WorkerReport> = workers.iter().map(Worker::report).collect();
    let incumbent_history = coordinator.incumbent_history().to_vec();
    Ok(ScriptedRun {
        solution: coordinator.finish(&reports)?,
        reports,
        terminates,
        messages_delivered: delivered,
        incumbent_history,
    })
}
