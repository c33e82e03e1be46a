//! Exact diagonalization of kinetically constrained spin-1/2 chains.
//!
//! A site flips when the number of excited sites among its four nearest and
//! next-nearest neighbours is allowed by the model's constraint rule. The
//! crate builds constrained bases, symmetry sectors and sparse Hamiltonians,
//! decomposes them into Krylov fragments and computes spectral statistics,
//! eigenstate observables and quench dynamics.
//!
//! ```
//! use kcm::{ModelSpec, SectorSpec};
//! use kcm::fragmentation::scaling_table;
//!
//! let model = ModelSpec::level(1).unwrap();
//! let table = scaling_table(&model, SectorSpec::symmetric(), [10]).unwrap();
//! assert_eq!(table.records[0].count, 30);
//! ```

pub mod basis;
pub mod dynamics;
pub mod error;
pub mod fragmentation;
pub mod models;
pub mod observables;
pub mod pipeline;
pub mod spectral;
pub mod symmetry;

pub use basis::{Basis, BasisState, ConstraintRule};
pub use error::{Error, Result};
pub use models::{Hamiltonian, ModelSpec, SparseOperator};
pub use symmetry::{SectorBasis, SectorSpec};
