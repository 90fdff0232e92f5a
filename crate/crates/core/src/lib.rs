//! Join-order optimization as annealing-solvable models.
//!
//! A [`JoinGraph`](joingraph::JoinGraph) carries relation row estimates and
//! predicate selectivities. It can be encoded as a permutation model or as a
//! one-hot QUBO, solved with simulated annealing or with the exact subset DP
//! oracles, and the resulting order rendered as a `pg_hint_plan` `Leading`
//! hint.
//!
//! All numeric types are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

pub mod costmodel;
pub mod encoders;
pub mod hints;
pub mod joingraph;
pub mod scalar;
pub mod solvers;
pub mod testing;

pub use scalar::Scalar;

pub type JoinGraphF64 = joingraph::JoinGraph<f64>;
pub type JoinGraphF32 = joingraph::JoinGraph<f32>;
pub type QuboF64 = encoders::Qubo<f64>;
pub type QuboF32 = encoders::Qubo<f32>;
pub type SolutionF64 = solvers::Solution<f64>;
pub type SolutionF32 = solvers::Solution<f32>;
pub type PermutationModelF64<'g> = encoders::PermutationModel<'g, f64>;
pub type PermutationModelF32<'g> = encoders::PermutationModel<'g, f32>;
