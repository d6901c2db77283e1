use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::Dataset;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what}: expected {expected} entries, found {found}")]
    Arity {
        what: &'static str,
        expected: String,
        found: usize,
    },
    #[error("empty text in {0}")]
    EmptyText(&'static str),
    #[error("gold index {index} out of range for {choices} choices")]
    GoldOutOfRange { index: usize, choices: usize },
    #[error("duplicate false statements: {0:?}")]
    DuplicateStatements(Vec<String>),
    #[error("keyword collision: {0:?} is assigned to more than one dataset")]
    KeywordCollision(String),
    #[error("invalid keyword {0:?}")]
    InvalidKeyword(String),
    #[error("label {label} outside the label slice of {dataset}")]
    LabelOutOfSlice { dataset: Dataset, label: usize },
    #[error("{0} has no classification label slice")]
    NoLabelSlice(Dataset),
    #[error("token id {id} out of range for vocabulary of size {size}")]
    TokenOutOfRange { id: u32, size: usize },
    #[error("sequence length {len} exceeds maximum {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("loss mask has no supervised positions")]
    NoSupervisedPositions,
    #[error("non-finite loss in batch {batch}")]
    NonFiniteLoss { batch: u64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("ComVE generation data is excluded or missing; nothing to train")]
    MissingComve,
    #[error("model was built for a different vocabulary")]
    VocabMismatch,
    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("item {index}: {error}")]
    AtItem {
        index: usize,
        error: alloc::boxed::Box<Error>,
    },
    #[error("classifier training needs both positive and negative examples")]
    SingleClass,
}
