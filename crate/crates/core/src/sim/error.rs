use crate::model::RankId;
use crate::profiler::ProfilerError;
use std::fmt;
use std::panic::Location;
use thiserror::Error;

/// Where a rank was parked when the run stopped making progress.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockedCall {
    pub rank: RankId,
    pub call: String,
    pub location: &'static Location<'static>,
}

impl fmt::Display for BlockedCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rank {} blocked in {} at {}", self.rank, self.call, self.location)
    }
}

fn list_blocked(blocked: &[BlockedCall]) -> String {
    blocked
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("rank {rank}: peer {peer} is not a valid rank (nranks = {nranks})")]
    InvalidRank { rank: RankId, peer: usize, nranks: usize },
    #[error("rank {rank}: self-messaging is disabled")]
    SelfMessage { rank: RankId },
    #[error("rank {rank}: message of {actual} bytes from rank {src} tag {tag} truncated by {capacity}-byte receive")]
    Truncation {
        rank: RankId,
        src: RankId,
        tag: u32,
        capacity: u64,
        actual: u64,
    },
    #[error("rank {rank}: wait on inactive request {request}")]
    WaitInactive { rank: RankId, request: usize },
    #[error("rank {rank}: request {request} was already completed and waited")]
    AlreadyCompleted { rank: RankId, request: usize },
    #[error("rank {rank}: start of request {request}, which is already active")]
    StartActive { rank: RankId, request: usize },
    #[error("rank {rank}: request {request} is not persistent and cannot be started")]
    NotPersistent { rank: RankId, request: usize },
    #[error("rank {rank}: unknown request {request}")]
    UnknownRequest { rank: RankId, request: usize },
    #[error("rank {rank}: collective #{index} mismatch: first caller issued {expected}, this rank issued {found}")]
    CollectiveMismatch {
        rank: RankId,
        index: u64,
        expected: String,
        found: String,
    },
    #[error("deadlock: {}", list_blocked(.blocked))]
    Deadlock { blocked: Vec<BlockedCall> },
    #[error("instrumentation error: {0}")]
    Instrumentation(#[from] ProfilerError),
    #[error("rank {rank}: {message}")]
    Config { rank: RankId, message: String },
    #[error("rank {rank} panicked")]
    Panicked { rank: RankId },
    #[error("rank {rank} aborted because another rank failed")]
    Aborted { rank: RankId },
}
