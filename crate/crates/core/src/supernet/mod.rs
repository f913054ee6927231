//! A small weight-sharing supernet.
//!
//! A cell is a DAG whose node `i` sums, over incoming edges `(i, j)` with
//! `j < i`, a mixture `Σ_o θ_{e,o} o(x_j)` of candidate operations. Every
//! operation instance on every edge owns its parameters, and all of them are
//! flattened into one shared weight vector. Node 0 is the input and the last
//! node is the prediction.

mod data;
mod forward;
mod objective;
mod oracle;
mod search;
mod space;
mod variance;

pub use data::{planted_task, Dataset, PlantedTask};
pub use forward::{forward_discrete, forward_mixture, init_weights, loss_and_grads, LossGrads};
pub use objective::SupernetObjective;
pub use oracle::{enumerate_oracle, train_discrete, OracleEntry, TrainConfig, ORACLE_LIMIT};
pub use search::{baseline_softmax_search, gaea_search, Alternation, Level, SearchConfig, SearchOutcome};
pub use space::{discretize, DiscreteArchitecture, Edge, OpKind, SearchSpace};
pub use variance::{gradient_variances, mixture_gradient, score_gradient, VarianceComparison};
