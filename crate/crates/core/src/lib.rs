//! Separable approximations of quantum states from a neural-network
//! parametrised decomposition.
//!
//! A small multilayer perceptron maps a one-hot index `k = 1..K` to a
//! mixture weight and one pure state per block of a separability partition.
//! Summing the weighted products gives a state that is separable by
//! construction; training it against a target density matrix under the
//! trace or Hilbert-Schmidt distance yields a certified upper bound on the
//! distance of the target to the chosen separable set.
//!
//! Modules:
//! - [`linalg`]: Hermitian matrix algebra, Jacobi eigensolver, distances.
//! - [`states`]: target families and closed-form reference values.
//! - [`model`]: separability structures and the decomposition network.
//! - [`optim`]: loss gradients, backpropagation, Adadelta training and the
//!   plain gradient-descent baseline.
//! - [`certify`]: PPT diagnostics, the two-qubit ansatz, the alternating
//!   projection PPT oracle, separability-ball certificates and threshold fits.

pub mod certify;
pub mod error;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod states;

pub use error::{Error, Result};
