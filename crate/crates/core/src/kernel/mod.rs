//! Kernel-equation solvers for the three plant families.

pub mod coupled;
pub mod hyperbolic;
pub mod parabolic;

pub use coupled::{
    coupled_kernel_bound, solve_kernels_2x2, transform_2x2, CoupledBoundSet,
    CoupledKernelSolution, CoupledPlantSpec,
};
pub use hyperbolic::{
    hyperbolic_kernel_bound, solve_kernel_pide, HyperbolicKernelSolution, HyperbolicPlantSpec,
};
pub use parabolic::{
    parabolic_kernel_bound, solve_kernel_rd, ParabolicBc, ParabolicGain, ParabolicKernelSolution,
    ParabolicPlantSpec,
};
