//! Minimal dense recurrent building blocks with explicit backward passes.

pub mod attention;
pub mod gradcheck;
pub mod linear;
pub mod lstm;
pub mod ops;
pub mod optim;
pub mod param;

pub use attention::{AdditiveAttention, AttentionMemory, MemoryGrad};
pub use linear::Linear;
pub use lstm::{BiLstm, LstmCell};
pub use ops::Mat;
pub use optim::{Optimizer, Rule};
pub use param::{Param, Parameterized};
