//! Pseudo-spectral Hall-MHD on the periodic box, with Littlewood-Paley
//! decompositions, paraproducts, commutators and the energy/uniqueness
//! diagnostics built on them.

pub mod diagnostics;
pub mod error;
pub mod io;
pub mod lp;
pub mod paraproduct;
pub mod solver;
pub mod spectral;
pub mod uniqueness;
pub mod verify;

pub use error::{Error, Result};

#[cfg(test)]
#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;
pub use spectral::{Grid, PhysicalParams, SpectralField};
