//! Hamiltonian systems with space-dependent balanced loss and gain.
//!
//! A system of `N = 2m` particles is described by `m` gain/loss pairs. Each
//! pair carries a gain profile `(F_{2i-1}, F_{2i})`, and all particles share a
//! potential `V`. The crate provides
//!
//! * the matrix representation and its structural checks ([`rep`]),
//! * equations of motion in particle, light-cone and hyperbolic-polar
//!   coordinates with an error-controlled integrator ([`dynamics`], [`ode`]),
//! * a catalog of concrete models ([`models`]),
//! * conserved charges, Poisson brackets and gauge checks ([`invariants`]),
//! * exact elliptic solution families with residual oracles ([`closed_forms`],
//!   [`elliptic`]),
//! * the quasi-exactly solvable sextic quantum problem ([`qes`]),
//! * the command-line front end ([`cli`]).

pub mod cli;
pub mod closed_forms;
pub mod config;
pub mod dynamics;
pub mod elliptic;
pub mod error;
pub mod invariants;
pub mod models;
pub mod ode;
pub mod poly;
pub mod qes;
pub mod quad;
pub mod rep;

pub use error::{Error, Result};
