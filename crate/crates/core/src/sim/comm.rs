use super::error::{BlockedCall, SimError};
use super::trace::TraceRecord;
use super::CostModel;
use crate::model::{EventKind, ExecMode, Labels, MessageEvent, Peer, RankId};
use crate::profiler::RegionTracker;
use std::collections::{HashMap, VecDeque};
use std::future::Future;
use std::marker::PhantomData;
use std::panic::Location;
use std::pin::Pin;
use std::sync::{Arc, Mutex, MutexGuard};
use std::task::{Context, Poll, Waker};
use std::time::Instant;

pub(crate) fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

#[derive(Debug)]
struct Envelope {
    bytes: u64,
    arrival_ns: u64,
    /// Set for blocking sends; the sender waits for this id to be acknowledged.
    rendezvous: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CollOp {
    Barrier,
    Bcast,
    Reduce,
    Allreduce,
}

impl CollOp {
    fn name(self) -> &'static str {
        match self {
            CollOp::Barrier => "barrier",
            CollOp::Bcast => "bcast",
            CollOp::Reduce => "reduce",
            CollOp::Allreduce => "allreduce",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct CollCall {
    op: CollOp,
    root: Option<u32>,
    bytes: u64,
}

impl CollCall {
    fn describe(&self) -> String {
        match self.root {
            Some(root) => format!("{}(root={}, bytes={})", self.op.name(), root, self.bytes),
            None => format!("{}(bytes={})", self.op.name(), self.bytes),
        }
    }
}

#[derive(Debug)]
struct CollSlot {
    call: CollCall,
    arrived: usize,
    departed: usize,
    latest_arrival_ns: u64,
}

/// State shared by all ranks: in-flight messages and collective rendezvous.
pub(crate) struct World {
    nranks: usize,
    mailboxes: HashMap<(u32, u32, u32), VecDeque<Envelope>>,
    acks: HashMap<u64, u64>,
    next_msg: u64,
    collectives: HashMap<u64, CollSlot>,
    pub(crate) progress: u64,
    pub(crate) blocked: Vec<Option<BlockedCall>>,
    wakers: Vec<Option<Waker>>,
    pub(crate) finished: Vec<bool>,
    pub(crate) aborted: bool,
    pub(crate) deadlock: Option<Vec<BlockedCall>>,
}

impl World {
    fn new(nranks: usize) -> Self {
        World {
            nranks,
            mailboxes: HashMap::new(),
            acks: HashMap::new(),
            next_msg: 0,
            collectives: HashMap::new(),
            progress: 0,
            blocked: vec![None; nranks],
            wakers: vec![None; nranks],
            finished: vec![false; nranks],
            aborted: false,
            deadlock: None,
        }
    }

    /// Records a mutation that may unblock `rank`.
    fn touch_rank(&mut self, rank: usize) {
        self.progress += 1;
        self.blocked[rank] = None;
        if let Some(w) = self.wakers[rank].take() {
            w.wake();
        }
    }

    fn touch_all(&mut self) {
        for r in 0..self.nranks {
            self.touch_rank(r);
        }
    }

    /// True when every unfinished rank is parked and at least one is unfinished.
    pub(crate) fn stalled(&self) -> bool {
        let mut any = false;
        for r in 0..self.nranks {
            if !self.finished[r] {
                if self.blocked[r].is_none() {
                    return false;
                }
                any = true;
            }
        }
        any
    }

    pub(crate) fn blocked_calls(&self) -> Vec<BlockedCall> {
        (0..self.nranks)
            .filter(|&r| !self.finished[r])
            .filter_map(|r| self.blocked[r].clone())
            .collect()
    }

    pub(crate) fn abort(&mut self) {
        self.aborted = true;
        for w in self.wakers.iter_mut().filter_map(Option::take) {
            w.wake();
        }
    }
}

pub(crate) struct Shared {
    pub(crate) world: Mutex<World>,
    pub(crate) mode: ExecMode,
    pub(crate) cost: CostModel,
    pub(crate) allow_self: bool,
    pub(crate) start: Instant,
    pub(crate) nranks: usize,
}

impl Shared {
    pub(crate) fn new(nranks: usize, mode: ExecMode, cost: CostModel, allow_self: bool) -> Self {
        Shared {
            world: Mutex::new(World::new(nranks)),
            mode,
            cost,
            allow_self,
            start: Instant::now(),
            nranks,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ReqKind {
    Isend,
    Irecv,
    Recv,
    PersistentSend,
    PersistentRecv,
}

impl ReqKind {
    fn is_send(self) -> bool {
        matches!(self, ReqKind::Isend | ReqKind::PersistentSend)
    }

    fn is_persistent(self) -> bool {
        matches!(self, ReqKind::PersistentSend | ReqKind::PersistentRecv)
    }

    fn recv_op(self) -> &'static str {
        match self {
            ReqKind::Recv => "recv",
            ReqKind::PersistentRecv => "persistent_recv",
            _ => "irecv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ReqState {
    Inactive,
    Active,
    /// Non-persistent request that has been waited; any further wait fails.
    Done,
}

#[derive(Debug, Clone, Copy)]
struct Matched {
    bytes: u64,
    arrival_ns: u64,
}

#[derive(Debug)]
struct ReqSlot {
    kind: ReqKind,
    peer: u32,
    tag: u32,
    /// Declared size for sends, capacity for receives.
    bytes: u64,
    state: ReqState,
    matched: Option<Matched>,
}

/// Handle to a point-to-point request owned by the issuing rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Request(usize);

impl Request {
    pub fn id(self) -> usize {
        self.0
    }
}

/// Result of a completed request, reported in argument order by `wait_all`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Completion {
    pub peer: RankId,
    pub tag: u32,
    pub bytes: u64,
}

pub(crate) struct RankLocal {
    rank: RankId,
    pub(crate) tracker: RegionTracker,
    pub(crate) trace: Option<Vec<TraceRecord>>,
    seq: u64,
    pub(crate) clock_ns: u64,
    requests: Vec<ReqSlot>,
    posted: HashMap<(u32, u32), VecDeque<usize>>,
    coll_seq: u64,
}

impl RankLocal {
    pub(crate) fn new(rank: RankId, trace: bool) -> Self {
        RankLocal {
            rank,
            tracker: RegionTracker::new(rank),
            trace: trace.then(Vec::new),
            seq: 0,
            clock_ns: 0,
            requests: Vec::new(),
            posted: HashMap::new(),
            coll_seq: 0,
        }
    }

    fn next_seq(&mut self) -> u64 {
        let s = self.seq;
        self.seq += 1;
        s
    }

    fn emit(&mut self, kind: EventKind, src: RankId, dst: Peer, bytes: u64, op: &str) {
        let event = MessageEvent {
            seq: self.next_seq(),
            kind,
            src,
            dst,
            bytes,
            region: self.tracker.current_path(),
            op: op.to_string(),
        };
        self.tracker.on_event(&event);
        if let Some(trace) = &mut self.trace {
            trace.push(TraceRecord::Event {
                rank: self.rank,
                event,
            });
        }
    }

    fn slot(&self, req: Request) -> Result<&ReqSlot, SimError> {
        self.requests.get(req.0).ok_or(SimError::UnknownRequest {
            rank: self.rank,
            request: req.0,
        })
    }

    /// Pairs posted receives on `(src, tag)` with queued messages, oldest first.
    fn match_key(&mut self, world: &mut World, src: u32, tag: u32) {
        let me = self.rank.0;
        let Some(queue) = self.posted.get_mut(&(src, tag)) else {
            return;
        };
        let Some(mailbox) = world.mailboxes.get_mut(&(src, me, tag)) else {
            return;
        };
        let mut acked = Vec::new();
        let mut matched = 0u64;
        while !queue.is_empty() && !mailbox.is_empty() {
            matched += 1;
            let env = mailbox.pop_front().expect("non-empty");
            let req = queue.pop_front().expect("non-empty");
            if let Some(id) = env.rendezvous {
                acked.push((id, self.clock_ns.max(env.arrival_ns)));
            }
            self.requests[req].matched = Some(Matched {
                bytes: env.bytes,
                arrival_ns: env.arrival_ns,
            });
        }
        world.progress += matched;
        for (id, at) in acked {
            world.acks.insert(id, at);
            world.touch_rank(src as usize);
        }
    }

    fn is_ready(&mut self, world: &mut World, req: usize) -> bool {
        let slot = &self.requests[req];
        if slot.kind.is_send() || slot.matched.is_some() {
            return true;
        }
        let (src, tag) = (slot.peer, slot.tag);
        self.match_key(world, src, tag);
        self.requests[req].matched.is_some()
    }

    /// Completes a ready request: bookkeeping, clock, and the receive event.
    fn complete(&mut self, req: usize, deterministic: bool) -> Result<Completion, SimError> {
        let rank = self.rank;
        let slot = &mut self.requests[req];
        slot.state = if slot.kind.is_persistent() {
            ReqState::Inactive
        } else {
            ReqState::Done
        };
        let peer = RankId(slot.peer);
        let tag = slot.tag;
        if slot.kind.is_send() {
            return Ok(Completion {
                peer,
                tag,
                bytes: slot.bytes,
            });
        }
        let m = slot.matched.take().expect("ready receive is matched");
        if m.bytes > slot.bytes {
            return Err(SimError::Truncation {
                rank,
                src: peer,
                tag,
                capacity: slot.bytes,
                actual: m.bytes,
            });
        }
        let op = slot.kind.recv_op();
        if deterministic {
            self.clock_ns = self.clock_ns.max(m.arrival_ns);
        }
        self.emit(EventKind::Recv, peer, Peer::Rank(rank), m.bytes, op);
        Ok(Completion {
            peer,
            tag,
            bytes: m.bytes,
        })
    }

    fn check_waitable(&self, req: Request) -> Result<(), SimError> {
        match self.slot(req)?.state {
            ReqState::Active => Ok(()),
            ReqState::Inactive => Err(SimError::WaitInactive {
                rank: self.rank,
                request: req.0,
            }),
            ReqState::Done => Err(SimError::AlreadyCompleted {
                rank: self.rank,
                request: req.0,
            }),
        }
    }
}

/// A rank's view of the simulated communicator.
///
/// Cloning yields another handle to the same rank. Non-blocking calls
/// (`isend`, `irecv`, `start_all`, region markers) are plain methods; calls
/// that can block return futures that park the rank until they can finish.
#[derive(Clone)]
pub struct Comm {
    rank: RankId,
    shared: Arc<Shared>,
    pub(crate) local: Arc<Mutex<RankLocal>>,
}

struct Blocking<'a, T, F> {
    comm: &'a Comm,
    call: String,
    location: &'static Location<'static>,
    step: F,
    _out: PhantomData<fn() -> T>,
}

impl<T, F> Future for Blocking<'_, T, F>
where
    F: FnMut(&mut RankLocal, &mut World) -> Poll<Result<T, SimError>> + Unpin,
{
    type Output = Result<T, SimError>;

    fn poll(self: Pin<&mut Self>, cx: &mut Context<'_>) -> Poll<Self::Output> {
        let this = self.get_mut();
        let me = this.comm.rank;
        let mut local = lock(&this.comm.local);
        let mut world = lock(&this.comm.shared.world);
        if world.aborted {
            return Poll::Ready(Err(SimError::Aborted { rank: me }));
        }
        match (this.step)(&mut local, &mut world) {
            Poll::Ready(out) => {
                world.blocked[me.index()] = None;
                Poll::Ready(out)
            }
            Poll::Pending => {
                world.blocked[me.index()] = Some(BlockedCall {
                    rank: me,
                    call: this.call.clone(),
                    location: this.location,
                });
                if this.comm.shared.mode == ExecMode::Concurrent {
                    world.wakers[me.index()] = Some(cx.waker().clone());
                    if world.stalled() {
                        let blocked = world.blocked_calls();
                        world.deadlock = Some(blocked.clone());
                        world.abort();
                        return Poll::Ready(Err(SimError::Deadlock { blocked }));
                    }
                }
                Poll::Pending
            }
        }
    }
}

impl Comm {
    pub(crate) fn new(rank: RankId, shared: Arc<Shared>, trace: bool) -> Self {
        Comm {
            rank,
            shared,
            local: Arc::new(Mutex::new(RankLocal::new(rank, trace))),
        }
    }

    pub fn rank(&self) -> RankId {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.shared.nranks
    }

    pub fn mode(&self) -> ExecMode {
        self.shared.mode
    }

    fn deterministic(&self) -> bool {
        self.shared.mode == ExecMode::Deterministic
    }

    fn now(&self, local: &RankLocal) -> u64 {
        if self.deterministic() {
            local.clock_ns
        } else {
            self.shared.start.elapsed().as_nanos() as u64
        }
    }

    /// Current rank time in nanoseconds (logical in deterministic mode).
    pub fn now_ns(&self) -> u64 {
        let local = lock(&self.local);
        self.now(&local)
    }

    /// Advances the logical clock by modelled compute time. No-op under wall-clock timing.
    pub fn charge_compute(&self, cells: u64) {
        if self.deterministic() {
            let mut local = lock(&self.local);
            local.clock_ns += cells * self.shared.cost.ns_per_cell;
        }
    }

    pub fn comm_region_begin(&self, name: &str, labels: Labels) -> Result<(), SimError> {
        let mut local = lock(&self.local);
        let now = self.now(&local);
        local.tracker.begin(name, labels.clone(), now)?;
        let seq = local.next_seq();
        let rank = self.rank;
        if let Some(trace) = &mut local.trace {
            trace.push(TraceRecord::Begin {
                rank,
                seq,
                name: name.to_string(),
                labels,
                t_ns: now,
            });
        }
        Ok(())
    }

    pub fn comm_region_end(&self, name: &str) -> Result<(), SimError> {
        let mut local = lock(&self.local);
        let now = self.now(&local);
        local.tracker.end(name, now)?;
        let seq = local.next_seq();
        let rank = self.rank;
        if let Some(trace) = &mut local.trace {
            trace.push(TraceRecord::End {
                rank,
                seq,
                name: name.to_string(),
                t_ns: now,
            });
        }
        Ok(())
    }

    fn check_peer(&self, peer: usize) -> Result<u32, SimError> {
        if peer >= self.shared.nranks {
            return Err(SimError::InvalidRank {
                rank: self.rank,
                peer,
                nranks: self.shared.nranks,
            });
        }
        if peer == self.rank.index() && !self.shared.allow_self {
            return Err(SimError::SelfMessage { rank: self.rank });
        }
        Ok(peer as u32)
    }

    /// Queues a message for `dst` and records the send at initiation.
    #[allow(clippy::too_many_arguments)]
    fn post(
        &self,
        local: &mut RankLocal,
        world: &mut World,
        dst: u32,
        tag: u32,
        bytes: u64,
        rendezvous: Option<u64>,
        op: &str,
    ) {
        let cost = &self.shared.cost;
        let arrival_ns = local.clock_ns + cost.transfer_ns(bytes);
        world
            .mailboxes
            .entry((self.rank.0, dst, tag))
            .or_default()
            .push_back(Envelope {
                bytes,
                arrival_ns,
                rendezvous,
            });
        world.touch_rank(dst as usize);
        local.emit(EventKind::Send, self.rank, Peer::Rank(RankId(dst)), bytes, op);
        if self.deterministic() {
            local.clock_ns += cost.send_overhead_ns;
        }
    }

    fn push_request(&self, local: &mut RankLocal, kind: ReqKind, peer: u32, tag: u32, bytes: u64) -> Request {
        let state = if kind.is_persistent() {
            ReqState::Inactive
        } else {
            ReqState::Active
        };
        local.requests.push(ReqSlot {
            kind,
            peer,
            tag,
            bytes,
            state,
            matched: None,
        });
        let id = local.requests.len() - 1;
        if state == ReqState::Active && !kind.is_send() {
            local.posted.entry((peer, tag)).or_default().push_back(id);
        }
        Request(id)
    }

    /// Eager non-blocking send; the message is buffered immediately.
    pub fn isend(&self, dst: usize, tag: u32, bytes: u64) -> Result<Request, SimError> {
        let dst = self.check_peer(dst)?;
        let mut local = lock(&self.local);
        let mut world = lock(&self.shared.world);
        let req = self.push_request(&mut local, ReqKind::Isend, dst, tag, bytes);
        self.post(&mut local, &mut world, dst, tag, bytes, None, "isend");
        Ok(req)
    }

    pub fn irecv(&self, src: usize, tag: u32, max_bytes: u64) -> Result<Request, SimError> {
        let src = self.check_peer(src)?;
        let mut local = lock(&self.local);
        Ok(self.push_request(&mut local, ReqKind::Irecv, src, tag, max_bytes))
    }

    pub fn send_init(&self, dst: usize, tag: u32, bytes: u64) -> Result<Request, SimError> {
        let dst = self.check_peer(dst)?;
        let mut local = lock(&self.local);
        Ok(self.push_request(&mut local, ReqKind::PersistentSend, dst, tag, bytes))
    }

    pub fn recv_init(&self, src: usize, tag: u32, max_bytes: u64) -> Result<Request, SimError> {
        let src = self.check_peer(src)?;
        let mut local = lock(&self.local);
        Ok(self.push_request(&mut local, ReqKind::PersistentRecv, src, tag, max_bytes))
    }

    /// Activates a set of inactive persistent requests.
    ///
    /// Each started send is recorded as its own send event; started receives
    /// are accounted when they complete.
    pub fn start_all(&self, reqs: &[Request]) -> Result<(), SimError> {
        let mut local = lock(&self.local);
        for &req in reqs {
            let slot = local.slot(req)?;
            if !slot.kind.is_persistent() {
                return Err(SimError::NotPersistent {
                    rank: self.rank,
                    request: req.0,
                });
            }
            if slot.state != ReqState::Inactive {
                return Err(SimError::StartActive {
                    rank: self.rank,
                    request: req.0,
                });
            }
        }
        let mut world = lock(&self.shared.world);
        for &req in reqs {
            let slot = &mut local.requests[req.0];
            if slot.state != ReqState::Inactive {
                // same request listed twice
                return Err(SimError::StartActive {
                    rank: self.rank,
                    request: req.0,
                });
            }
            slot.state = ReqState::Active;
            let (kind, peer, tag, bytes) = (slot.kind, slot.peer, slot.tag, slot.bytes);
            if kind.is_send() {
                self.post(&mut local, &mut world, peer, tag, bytes, None, "start");
            } else {
                local.posted.entry((peer, tag)).or_default().push_back(req.0);
            }
        }
        Ok(())
    }

    pub fn start(&self, req: Request) -> Result<(), SimError> {
        self.start_all(&[req])
    }

    #[track_caller]
    pub fn wait(&self, req: Request) -> impl Future<Output = Result<Completion, SimError>> + '_ {
        let location = Location::caller();
        let deterministic = self.deterministic();
        let mut checked = false;
        Blocking {
            comm: self,
            call: format!("wait(request={})", req.0),
            location,
            step: move |local: &mut RankLocal, world: &mut World| {
                if !checked {
                    local.check_waitable(req)?;
                    checked = true;
                }
                if local.is_ready(world, req.0) {
                    Poll::Ready(local.complete(req.0, deterministic))
                } else {
                    Poll::Pending
                }
            },
            _out: PhantomData,
        }
    }

    /// Waits for every request; completions come back in argument order.
    #[track_caller]
    pub fn wait_all<'a>(
        &'a self,
        reqs: &[Request],
    ) -> impl Future<Output = Result<Vec<Completion>, SimError>> + 'a {
        let location = Location::caller();
        let deterministic = self.deterministic();
        let reqs = reqs.to_vec();
        let mut checked = false;
        Blocking {
            comm: self,
            call: format!("wait_all({} requests)", reqs.len()),
            location,
            step: move |local: &mut RankLocal, world: &mut World| {
                if !checked {
                    for &r in &reqs {
                        local.check_waitable(r)?;
                    }
                    checked = true;
                }
                let mut all = true;
                for &r in &reqs {
                    all &= local.is_ready(world, r.0);
                }
                if !all {
                    return Poll::Pending;
                }
                let out: Result<Vec<_>, _> = reqs
                    .iter()
                    .map(|r| local.complete(r.0, deterministic))
                    .collect();
                Poll::Ready(out)
            },
            _out: PhantomData,
        }
    }

    /// Blocking receive; returns the size of the matched message.
    #[track_caller]
    pub fn recv(&self, src: usize, tag: u32, max_bytes: u64) -> impl Future<Output = Result<u64, SimError>> + '_ {
        let location = Location::caller();
        let deterministic = self.deterministic();
        let mut req: Option<Result<Request, SimError>> = Some(self.check_peer(src).map(|src| {
            let mut local = lock(&self.local);
            self.push_request(&mut local, ReqKind::Recv, src, tag, max_bytes)
        }));
        let mut posted = None;
        Blocking {
            comm: self,
            call: format!("recv(src={src}, tag={tag})"),
            location,
            step: move |local: &mut RankLocal, world: &mut World| {
                let r = match posted {
                    Some(r) => r,
                    None => {
                        let r: Request = req.take().expect("first poll")?;
                        posted = Some(r);
                        r
                    }
                };
                if local.is_ready(world, r.0) {
                    Poll::Ready(local.complete(r.0, deterministic).map(|c| c.bytes))
                } else {
                    Poll::Pending
                }
            },
            _out: PhantomData,
        }
    }

    /// Blocking send with rendezvous semantics: returns once the receiver matched it.
    #[track_caller]
    pub fn send(&self, dst: usize, tag: u32, bytes: u64) -> impl Future<Output = Result<(), SimError>> + '_ {
        let location = Location::caller();
        let deterministic = self.deterministic();
        let mut pending: Option<Result<u32, SimError>> = Some(self.check_peer(dst));
        let mut msg_id = None;
        Blocking {
            comm: self,
            call: format!("send(dst={dst}, tag={tag}, bytes={bytes})"),
            location,
            step: move |local: &mut RankLocal, world: &mut World| {
                let id = match msg_id {
                    Some(id) => id,
                    None => {
                        let dst = pending.take().expect("first poll")?;
                        let id = world.next_msg;
                        world.next_msg += 1;
                        self.post(local, world, dst, tag, bytes, Some(id), "send");
                        msg_id = Some(id);
                        id
                    }
                };
                match world.acks.remove(&id) {
                    Some(at) => {
                        if deterministic {
                            local.clock_ns = local.clock_ns.max(at);
                        }
                        Poll::Ready(Ok(()))
                    }
                    None => Poll::Pending,
                }
            },
            _out: PhantomData,
        }
    }

    #[track_caller]
    fn collective(&self, op: CollOp, root: Option<usize>, bytes: u64) -> impl Future<Output = Result<(), SimError>> + '_ {
        let location = Location::caller();
        let deterministic = self.deterministic();
        let nranks = self.shared.nranks;
        let me = self.rank;
        let root_check = match root {
            Some(r) if r >= nranks => Err(SimError::InvalidRank {
                rank: me,
                peer: r,
                nranks,
            }),
            _ => Ok(()),
        };
        let call = CollCall {
            op,
            root: root.map(|r| r as u32),
            bytes,
        };
        let mut root_check = Some(root_check);
        let mut index: Option<u64> = None;
        let cost = self.shared.cost;
        Blocking {
            comm: self,
            call: call.describe(),
            location,
            step: move |local: &mut RankLocal, world: &mut World| {
                let idx = match index {
                    Some(i) => i,
                    None => {
                        root_check.take().expect("first poll")?;
                        let idx = local.coll_seq;
                        let slot = world.collectives.entry(idx).or_insert(CollSlot {
                            call,
                            arrived: 0,
                            departed: 0,
                            latest_arrival_ns: 0,
                        });
                        if slot.call != call {
                            return Poll::Ready(Err(SimError::CollectiveMismatch {
                                rank: me,
                                index: idx,
                                expected: slot.call.describe(),
                                found: call.describe(),
                            }));
                        }
                        slot.arrived += 1;
                        slot.latest_arrival_ns = slot.latest_arrival_ns.max(local.clock_ns);
                        let complete = slot.arrived == nranks;
                        if complete {
                            world.touch_all();
                        } else {
                            world.progress += 1;
                        }
                        index = Some(idx);
                        idx
                    }
                };
                let slot = world.collectives.get_mut(&idx).expect("slot lives until all depart");
                if slot.arrived < nranks {
                    return Poll::Pending;
                }
                slot.departed += 1;
                let done_at = slot.latest_arrival_ns + cost.collective_ns(nranks, bytes);
                if slot.departed == nranks {
                    world.collectives.remove(&idx);
                }
                world.progress += 1;
                local.coll_seq += 1;
                if deterministic {
                    local.clock_ns = done_at;
                }
                let dst = match call.root {
                    Some(r) => Peer::Rank(RankId(r)),
                    None => Peer::All,
                };
                local.emit(EventKind::Collective, me, dst, bytes, op.name());
                Poll::Ready(Ok(()))
            },
            _out: PhantomData,
        }
    }

    #[track_caller]
    pub fn barrier(&self) -> impl Future<Output = Result<(), SimError>> + '_ {
        self.collective(CollOp::Barrier, None, 0)
    }

    #[track_caller]
    pub fn bcast(&self, root: usize, bytes: u64) -> impl Future<Output = Result<(), SimError>> + '_ {
        self.collective(CollOp::Bcast, Some(root), bytes)
    }

    #[track_caller]
    pub fn reduce(&self, root: usize, bytes: u64) -> impl Future<Output = Result<(), SimError>> + '_ {
        self.collective(CollOp::Reduce, Some(root), bytes)
    }

    #[track_caller]
    pub fn allreduce(&self, bytes: u64) -> impl Future<Output = Result<(), SimError>> + '_ {
        self.collective(CollOp::Allreduce, None, bytes)
    }
}
