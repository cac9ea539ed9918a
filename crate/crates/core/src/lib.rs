//! Spectral-element solver for the linear radiation and diffraction problem
//! of floating offshore structures.
//!
//! The solver discretizes the Laplace problem on hybrid prism/tet meshes with
//! high-order continuous Galerkin elements, steps the linearized free-surface
//! equations in time with ERK4 under pseudo-impulsive body forcing, and maps
//! the recorded responses to frequency-dependent added mass, radiation
//! damping, and wave excitation forces via Fourier transforms.
//!
//! Module layout:
//! - [`mesh`]: hybrid mesh ingestion (MSH 4.1), validation, and geometry queries
//! - [`refelem`]: reference tetrahedra/prisms, bases, quadrature, differentiation
//! - [`assembly`]: global sparse operators and Dirichlet bookkeeping
//! - [`linalg`]: CSR storage and preconditioned conjugate-gradient solves
//! - [`waves`]: dispersion, incident waves, pseudo-impulses, damping profiles
//! - [`symmetry`]: symmetry-plane flags, incident-phase decomposition, force routing
//! - [`sim`]: method-of-lines time stepping and the infinite-frequency problem
//! - [`post`]: FD4 differentiation, spectra, hydrodynamic coefficients
//! - [`verify`]: manufactured-solution harness and convergence studies

pub mod assembly;
pub mod linalg;
pub mod mesh;
pub mod post;
pub mod refelem;
pub mod sim;
pub mod symmetry;
pub mod verify;
pub mod waves;
