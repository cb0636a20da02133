use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("output {output} needs adder depth {depth} but its budget is {budget}")]
    BudgetInfeasible { output: usize, depth: u32, budget: u32 },
    #[error("input {index} value {value} lies outside its interval {interval}")]
    Domain { index: usize, value: String, interval: String },
    #[error("input space has {size} vectors, more than the limit of {limit}")]
    SpaceTooLarge { size: String, limit: u64 },
    #[error("invalid solution: {0}")]
    InvalidSolution(String),
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
}
