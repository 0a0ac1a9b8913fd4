use thiserror::Error;

use crate::model::UserId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("tasks[{position}].id: expected {position}, found {id} (task ids must run 0..m-1)")]
    TaskIdOutOfSequence { position: usize, id: u32 },

    #[error("tasks[{position}].value: {value} is negative")]
    NegativeTaskValue { position: usize, value: i64 },

    #[error("users[{position}].id: expected {expected}, found {id} (user ids must run 1..n)")]
    UserIdOutOfSequence {
        position: usize,
        expected: u32,
        id: u32,
    },

    #[error("users[{position}].tasks: task list is empty")]
    EmptyTaskSet { position: usize },

    #[error("users[{position}].tasks: unknown task id {task}")]
    UnknownTask { position: usize, task: u32 },

    #[error("users[{position}].tasks: task {task} listed twice")]
    DuplicateTask { position: usize, task: u32 },

    #[error("users[{position}].bid: {bid} is not positive")]
    NonPositiveBid { position: usize, bid: i64 },

    #[error("unknown user id {0}")]
    UnknownUser(UserId),

    #[error("{op}: {detail}")]
    Precondition { op: &'static str, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn precondition(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Precondition {
            op,
            detail: detail.into(),
        }
    }
}
