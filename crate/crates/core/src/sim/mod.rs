//! In-process message-passing runtime.
//!
//! Rank programs are async functions over a [`Comm`]. In deterministic mode a
//! single-threaded executor polls ranks in ascending order, each running until
//! it blocks; a full round with no state change and no finished rank is a
//! deadlock. Time is a per-rank logical clock driven by [`CostModel`]. In
//! concurrent mode every rank gets its own thread and time is wall-clock.
//!
//! Only byte counts travel; payload contents are never simulated.

mod comm;
mod error;
pub mod trace;

pub use comm::{Comm, Completion, Request};
pub use error::{BlockedCall, SimError};
pub use trace::TraceRecord;

use crate::model::{ExecMode, MessageEvent, RankId, RegionCommStats, RegionSummary};
use crate::profiler::{self, RegionTracker};
use comm::{lock, Shared};
use std::future::Future;
use std::panic::AssertUnwindSafe;
use std::pin::Pin;
use std::sync::Arc;
use std::task::{Context, Poll, Waker};

/// Logical-time costs used by the deterministic scheduler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostModel {
    pub latency_ns: u64,
    pub send_overhead_ns: u64,
    pub bytes_per_ns: u64,
    pub ns_per_cell: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            latency_ns: 1_000,
            send_overhead_ns: 100,
            bytes_per_ns: 10,
            ns_per_cell: 2,
        }
    }
}

impl CostModel {
    pub fn transfer_ns(&self, bytes: u64) -> u64 {
        self.latency_ns + bytes / self.bytes_per_ns.max(1)
    }

    /// Tree-shaped latency for a collective over `nranks`.
    pub fn collective_ns(&self, nranks: usize, bytes: u64) -> u64 {
        let depth = usize::BITS - nranks.saturating_sub(1).leading_zeros();
        u64::from(depth) * self.transfer_ns(bytes)
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub nranks: usize,
    pub mode: ExecMode,
    pub trace: bool,
    pub allow_self: bool,
    pub cost: CostModel,
}

impl SimConfig {
    pub fn new(nranks: usize) -> Self {
        SimConfig {
            nranks,
            mode: ExecMode::Deterministic,
            trace: false,
            allow_self: false,
            cost: CostModel::default(),
        }
    }

    pub fn with_trace(mut self, trace: bool) -> Self {
        self.trace = trace;
        self
    }

    pub fn with_mode(mut self, mode: ExecMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn allow_self_messages(mut self, allow: bool) -> Self {
        self.allow_self = allow;
        self
    }
}

/// Everything a finished run leaves behind.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub nranks: usize,
    pub mode: ExecMode,
    /// Per-rank region records, ranks ascending, regions in first-begin order.
    pub stats: Vec<RegionCommStats>,
    /// Merged trace (rank ascending, then sequence) when tracing was enabled.
    pub trace: Option<Vec<TraceRecord>>,
    pub rank_clock_ns: Vec<u64>,
    pub elapsed_ns: u64,
}

impl RunOutcome {
    pub fn summaries(&self) -> Vec<RegionSummary> {
        profiler::summarize(&self.stats)
    }

    pub fn elapsed_sec(&self) -> f64 {
        profiler::ns_to_sec(self.elapsed_ns)
    }

    pub fn events(&self) -> impl Iterator<Item = &MessageEvent> {
        self.trace.iter().flatten().filter_map(|r| match r {
            TraceRecord::Event { event, .. } => Some(event),
            _ => None,
        })
    }

    pub fn rank_stats(&self, rank: RankId) -> impl Iterator<Item = &RegionCommStats> {
        self.stats.iter().filter(move |s| s.rank == rank)
    }
}

/// Runs `program` once per rank and collects the profiler output.
pub fn spawn<F, Fut>(config: &SimConfig, program: F) -> Result<RunOutcome, SimError>
where
    F: Fn(Comm) -> Fut + Sync,
    Fut: Future<Output = Result<(), SimError>>,
{
    assert!(config.nranks >= 1, "a run needs at least one rank");
    let shared = Arc::new(Shared::new(
        config.nranks,
        config.mode,
        config.cost,
        config.allow_self,
    ));
    let comms: Vec<Comm> = (0..config.nranks)
        .map(|r| Comm::new(RankId::from(r), Arc::clone(&shared), config.trace))
        .collect();

    match config.mode {
        ExecMode::Deterministic => run_cooperative(&shared, &comms, &program)?,
        ExecMode::Concurrent => run_threaded(&shared, &comms, &program)?,
    }
    let wall_ns = shared.start.elapsed().as_nanos() as u64;

    let mut trackers = Vec::with_capacity(comms.len());
    let mut trace = config.trace.then(Vec::new);
    let mut clocks = Vec::with_capacity(comms.len());
    for c in &comms {
        let mut local = lock(&c.local);
        trackers.push(std::mem::replace(
            &mut local.tracker,
            RegionTracker::new(c.rank()),
        ));
        if let (Some(all), Some(mine)) = (&mut trace, local.trace.take()) {
            all.extend(mine);
        }
        clocks.push(local.clock_ns);
    }
    let stats = profiler::finalize(trackers)?;
    let elapsed_ns = match config.mode {
        ExecMode::Deterministic => clocks.iter().copied().max().unwrap_or(0),
        ExecMode::Concurrent => wall_ns,
    };
    Ok(RunOutcome {
        nranks: config.nranks,
        mode: config.mode,
        stats,
        trace,
        rank_clock_ns: clocks,
        elapsed_ns,
    })
}

fn run_cooperative<F, Fut>(shared: &Shared, comms: &[Comm], program: &F) -> Result<(), SimError>
where
    F: Fn(Comm) -> Fut,
    Fut: Future<Output = Result<(), SimError>>,
{
    let mut tasks: Vec<Option<Pin<Box<Fut>>>> = comms
        .iter()
        .map(|c| Some(Box::pin(program(c.clone()))))
        .collect();
    let mut cx = Context::from_waker(Waker::noop());
    let mut remaining = tasks.len();
    while remaining > 0 {
        let before = lock(&shared.world).progress;
        let mut finished_any = false;
        for (r, slot) in tasks.iter_mut().enumerate() {
            let Some(task) = slot else { continue };
            match task.as_mut().poll(&mut cx) {
                Poll::Ready(Ok(())) => {
                    *slot = None;
                    remaining -= 1;
                    finished_any = true;
                    lock(&shared.world).finished[r] = true;
                }
                Poll::Ready(Err(e)) => return Err(e),
                Poll::Pending => {}
            }
        }
        if remaining > 0 && !finished_any {
            let world = lock(&shared.world);
            if world.progress == before {
                return Err(SimError::Deadlock {
                    blocked: world.blocked_calls(),
                });
            }
        }
    }
    Ok(())
}

fn run_threaded<F, Fut>(shared: &Arc<Shared>, comms: &[Comm], program: &F) -> Result<(), SimError>
where
    F: Fn(Comm) -> Fut + Sync,
    Fut: Future<Output = Result<(), SimError>>,
{
    let results: Vec<Result<(), SimError>> = std::thread::scope(|s| {
        let handles: Vec<_> = comms
            .iter()
            .enumerate()
            .map(|(r, c)| {
                let comm = c.clone();
                let shared = Arc::clone(shared);
                std::thread::Builder::new()
                    .name(format!("rank-{r}"))
                    .stack_size(1 << 20)
                    .spawn_scoped(s, move || {
                        let out = std::panic::catch_unwind(AssertUnwindSafe(|| {
                            futures::executor::block_on(program(comm))
                        }))
                        .unwrap_or(Err(SimError::Panicked { rank: RankId::from(r) }));
                        let mut world = lock(&shared.world);
                        world.finished[r] = true;
                        if out.is_err() {
                            world.abort();
                        } else if world.stalled() {
                            let blocked = world.blocked_calls();
                            world.deadlock = Some(blocked);
                            world.abort();
                        }
                        out
                    })
                    .expect("spawn rank thread")
            })
            .collect();
        handles
            .into_iter()
            .enumerate()
            .map(|(r, h)| {
                h.join()
                    .unwrap_or(Err(SimError::Panicked { rank: RankId::from(r) }))
            })
            .collect()
    });
    if let Some(blocked) = lock(&shared.world).deadlock.clone() {
        return Err(SimError::Deadlock { blocked });
    }
    let mut first_abort = None;
    for r in results {
        match r {
            Ok(()) => {}
            Err(e @ SimError::Aborted { .. }) => {
                first_abort.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    first_abort.map_or(Ok(()), Err)
}
