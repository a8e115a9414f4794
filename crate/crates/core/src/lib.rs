//! Discrete conformal structures on closed triangulated surfaces.
//!
//! The crate covers the weighted Euclidean and hyperbolic structures where
//! each vertex carries ε ∈ {0, 1}, each edge a weight η, and edge lengths are
//! determined by per-vertex conformal factors. On top of the metric layer it
//! provides curvature Jacobians and energies, the combinatorial Ricci and
//! Calabi flows (including the constant extension of angles that lets the
//! Ricci flow run through degenerate triangles), and a Newton solver for
//! prescribed curvature.
//!
//! ```
//! use dcflow::prelude::*;
//!
//! let surface = generate(SurfaceKind::Tetrahedron).unwrap();
//! let weights = WeightConfig::uniform(&surface, 1, 1.0).unwrap();
//! let state = ConformalState::new(Geometry::Euclidean, &weights, vec![0.0; 4]).unwrap();
//! let report = curvature(&surface, &weights, &state, false).unwrap();
//! assert!((report.curvature[0] - std::f64::consts::PI).abs() < 1e-12);
//! ```

pub mod calculus;
pub mod error;
pub mod exec;
pub mod flows;
pub mod geometry;
mod quadrature;
pub mod solve;
pub mod surface;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::calculus::{
        curvature_jacobian, surface_energies, triangle_energy, triangle_jacobian,
        CurvatureJacobian, EnergyValue, TriangleJacobian,
    };
    pub use crate::error::{Error, Result};
    pub use crate::exec::Exec;
    pub use crate::flows::{
        check_target, run_flow, FlowKind, FlowSpec, FlowTrace, Integrator, Termination, TraceRow,
    };
    pub use crate::geometry::{
        curvature, gauss_bonnet_residual, ConformalState, DegeneracyClass, Geometry,
        MetricReport,
    };
    pub use crate::solve::{solve_prescribed, SolveOptions, SolveReport};
    pub use crate::surface::{
        generate, validate_weights, SurfaceKind, TriangulatedSurface, WeightConfig,
    };
}
