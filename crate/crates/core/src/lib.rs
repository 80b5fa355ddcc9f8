//! Simulation and verification of a rate-independent damage–plasticity model.
//!
//! The state is a displacement field u, a scalar damage field χ ∈ [0, 1]
//! that may only decrease in time, and a symmetric plastic strain D
//! confined to a subspace S and a convex set K. Trajectories are built by
//! time-incremental minimization of energy plus dissipation and are then
//! checked against global stability and the energy balance.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod constitutive;
pub mod energetics;
pub mod fem;
pub mod loading;
pub mod mesh;
pub mod oracle;
pub mod output;
pub mod scenario;
pub mod solver;
pub mod sparse;
pub mod tensor;

pub use constitutive::{Material, MaterialParams, W1Variant};
pub use fem::{EnergyBreakdown, FemError, GradientBlocks, Model, StateFields};
pub use mesh::{build_mesh, Facet, Mesh};
pub use tensor::{ConvexSetK, SubspaceS, SymTensor2, Tensor4};
