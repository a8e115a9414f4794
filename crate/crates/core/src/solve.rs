//! Prescribed-curvature solver.
//!
//! Minimizes the extended potential H̃, whose gradient is K̃ - K̄, by damped
//! Newton steps with the curvature Jacobian as Hessian. Where some face is
//! degenerate the Hessian does not exist and plain gradient steps are taken
//! instead. In Euclidean geometry H̃ is invariant along 𝟙, so every step is
//! kept in the hyperplane Σu = Σu(guess).

use nalgebra::{DMatrix, DVector};

use crate::calculus::{assemble_jacobian, potential_increment_with};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::flows::{check_target, FlowKind, FlowSpec};
use crate::geometry::{self, ConformalState, Geometry};
use crate::surface::{TriangulatedSurface, WeightConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub armijo: f64,
    pub max_halvings: usize,
    pub exec: Exec,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 200,
            armijo: 1e-4,
            max_halvings: 40,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveMethod {
    Newton,
    GradientDescent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub state: ConformalState,
    /// max|K - K̄| at the solution.
    pub residual: f64,
    pub iterations: usize,
    pub newton_steps: usize,
    pub gradient_steps: usize,
    /// Smallest eigenvalue of the Jacobian at the solution, restricted to 𝟙^⊥
    /// in Euclidean geometry. Positive means the solution is a strict local
    /// (hence global) minimizer.
    pub certificate: f64,
    /// Kind of the last step taken (Newton when no step was needed).
    pub method: SolveMethod,
    /// Change of H̃ on each accepted step.
    pub energy_steps: Vec<f64>,
}

pub fn solve_prescribed(
    surface: &TriangulatedSurface,
    weights: &WeightConfig,
    geometry: Geometry,
    target: &[f64],
    guess: &ConformalState,
) -> Result<SolveReport> {
    solve_prescribed_with(surface, weights, geometry, target, guess, &SolveOptions::default())
}

pub fn solve_prescribed_with(
    surface: &TriangulatedSurface,
    weights: &WeightConfig,
    geometry: Geometry,
    target: &[f64],
    guess: &ConformalState,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let spec = FlowSpec::new(FlowKind::ExtendedModifiedRicci, geometry).with_target(target.to_vec());
    let check = check_target(&spec, surface);
    if !check.passed() {
        return Err(Error::TargetInadmissible(check.violations.join("; ")));
    }
    if guess.geometry() != geometry {
        return Err(Error::BadHypothesis(format!(
            "solver is {geometry:?} but the guess is {:?}",
            guess.geometry()
        )));
    }
    let n = surface.vertex_count();
    let euclidean = geometry == Geometry::Euclidean;
    let exec = opts.exec;
    let sum0: f64 = guess.u().iter().sum();
    let mut u = guess.u().to_vec();
    let mut newton_steps = 0;
    let mut gradient_steps = 0;
    let mut method = SolveMethod::Newton;
    let mut energy_steps = Vec::new();

    let recenter = |v: &mut Vec<f64>| {
        if euclidean {
            let drift = (v.iter().sum::<f64>() - sum0) / n as f64;
            v.iter_mut().for_each(|x| *x -= drift);
        }
    };
    let project = |v: &mut Vec<f64>| {
        if euclidean {
            let mean = v.iter().sum::<f64>() / n as f64;
            v.iter_mut().for_each(|x| *x -= mean);
        }
    };

    for iteration in 0..=opts.max_iterations {
        let report = geometry::evaluate(exec, surface, weights, geometry, &u, true)?;
        let mut grad: Vec<f64> = report.curvature.iter().zip(target).map(|(k, kb)| k - kb).collect();
        let residual = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        let degenerate = report.degenerate_faces().next().is_some();
        if residual < opts.tol {
            if degenerate {
                return Err(Error::NoInteriorSolution);
            }
            let jac = assemble_jacobian(exec, surface, weights, geometry, &u)?;
            return Ok(SolveReport {
                state: ConformalState::new(geometry, weights, u)?,
                residual,
                iterations: iteration,
                newton_steps,
                gradient_steps,
                certificate: jac.min_restricted_eigenvalue(geometry),
                method,
                energy_steps,
            });
        }
        if iteration == opts.max_iterations {
            break;
        }
        project(&mut grad);

        let newton = if degenerate {
            None
        } else {
            newton_direction(exec, surface, weights, geometry, &u, &grad)
        };
        let (mut dir, kind) = match newton {
            Some(d) => (d, SolveMethod::Newton),
            None => (grad.iter().map(|g| -g).collect::<Vec<_>>(), SolveMethod::GradientDescent),
        };
        project(&mut dir);
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        if !(slope < 0.0) {
            // Not a descent direction: the Hessian solve lost accuracy.
            dir = grad.iter().map(|g| -g).collect();
        }
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let mut cand: Vec<f64> = u.iter().zip(&dir).map(|(x, d)| x + alpha * d).collect();
            recenter(&mut cand);
            if ConformalState::new(geometry, weights, cand.clone()).is_ok() {
                if let Ok(inc) =
                    potential_increment_with(exec, surface, weights, geometry, target, &u, &cand)
                {
                    let step_norm: f64 = cand.iter().zip(&u).map(|(a, b)| (a - b).abs()).sum();
                    let slack = 1e-14 * step_norm * (1.0 + report.curvature.iter().fold(0.0_f64, |m, k| m.max(k.abs())));
                    if inc <= opts.armijo * alpha * slope + slack {
                        accepted = Some((cand, inc));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        let Some((next, inc)) = accepted else {
            return Err(if degenerate {
                Error::NoInteriorSolution
            } else {
                Error::StepFailure {
                    halvings: opts.max_halvings,
                }
            });
        };
        u = next;
        energy_steps.push(inc);
        method = kind;
        match kind {
            SolveMethod::Newton => newton_steps += 1,
            SolveMethod::GradientDescent => gradient_steps += 1,
        }
    }

    // Heuristic: a budget exhausted while faces are still degenerate points
    // at a minimizer outside the admissible space.
    let report = geometry::evaluate(exec, surface, weights, geometry, &u, true)?;
    if report.degenerate_faces().next().is_some() {
        Err(Error::NoInteriorSolution)
    } else {
        Err(Error::MaxIterations(opts.max_iterations))
    }
}

/// Solves Λx = -g; in Euclidean geometry on 𝟙^⊥ via (Λ + 𝟙𝟙ᵀ/N)x = -Pg.
fn newton_direction(
    exec: Exec,
    surface: &TriangulatedSurface,
    weights: &WeightConfig,
    geometry: Geometry,
    u: &[f64],
    grad: &[f64],
) -> Option<Vec<f64>> {
    let jac = assemble_jacobian(exec, surface, weights, geometry, u).ok()?;
    let n = jac.dim();
    let mut m: DMatrix<f64> = jac.to_dense();
    m = (&m + m.transpose()) * 0.5;
    if geometry == Geometry::Euclidean {
        m += DMatrix::from_element(n, n, 1.0 / n as f64);
    }
    let rhs = DVector::from_iterator(n, grad.iter().map(|g| -g));
    let x = m.cholesky()?.solve(&rhs);
    x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{generate, SurfaceKind};
    use std::f64::consts::PI;

    #[test]
    fn equilibrium_needs_no_steps() {
        let s = generate(SurfaceKind::Tetrahedron).unwrap();
        let w = WeightConfig::uniform(&s, 1, 1.0).unwrap();
        let g = ConformalState::new(Geometry::Euclidean, &w, vec![0.0; 4]).unwrap();
        let r = solve_prescribed(&s, &w, Geometry::Euclidean, &[PI; 4], &g).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.state.u(), &[0.0; 4]);
        assert!(r.certificate > 0.0);
    }

    #[test]
    fn torus_recovers_flat_metric() {
        let s = generate(SurfaceKind::TorusGrid { n: 3, m: 3 }).unwrap();
        let w = WeightConfig::uniform(&s, 0, 1.0).unwrap();
        let mut u: Vec<f64> = (0..9).map(|i| 0.3 * ((i * 5 % 9) as f64 - 4.0) / 4.0).collect();
        let mean = u.iter().sum::<f64>() / 9.0;
        u.iter_mut().for_each(|x| *x -= mean);
        let g = ConformalState::new(Geometry::Euclidean, &w, u).unwrap();
        let r = solve_prescribed(&s, &w, Geometry::Euclidean, &[0.0; 9], &g).unwrap();
        assert!(r.residual < 1e-10);
        assert!(r.state.u().iter().all(|x| x.abs() < 1e-9));
        assert!(r.energy_steps.iter().all(|&e| e < 0.0));
    }

    #[test]
    fn degenerate_guess_uses_gradient_steps() {
        let s = generate(SurfaceKind::TorusGrid { n: 3, m: 3 }).unwrap();
        let w = WeightConfig::uniform(&s, 0, 1.0).unwrap();
        let mut u = vec![0.0; 9];
        u[0] = -3.0;
        let g = ConformalState::new(Geometry::Euclidean, &w, u).unwrap();
        let r = solve_prescribed(&s, &w, Geometry::Euclidean, &[0.0; 9], &g).unwrap();
        assert!(r.gradient_steps > 0);
        assert_eq!(r.method, SolveMethod::Newton);
        let c = -3.0 / 9.0;
        assert!(r.state.u().iter().all(|x| (x - c).abs() < 1e-9));
    }

    #[test]
    fn hyperbolic_genus_two_is_rigid() {
        let s = generate(SurfaceKind::Genus2).unwrap();
        let w = WeightConfig::uniform(&s, 0, 1.0).unwrap();
        let a = ConformalState::new(Geometry::Hyperbolic, &w, vec![0.0; 15]).unwrap();
        let b = ConformalState::new(
            Geometry::Hyperbolic,
            &w,
            (0..15).map(|i| 0.2 * (i as f64).sin()).collect(),
        )
        .unwrap();
        let ra = solve_prescribed(&s, &w, Geometry::Hyperbolic, &[0.0; 15], &a).unwrap();
        let rb = solve_prescribed(&s, &w, Geometry::Hyperbolic, &[0.0; 15], &b).unwrap();
        assert!(ra.residual < 1e-10 && rb.residual < 1e-10);
        for (x, y) in ra.state.u().iter().zip(rb.state.u()) {
            assert!((x - y).abs() < 1e-8);
        }
        assert!(ra.certificate > 0.0);
    }

    #[test]
    fn inadmissible_target_is_rejected() {
        let s = generate(SurfaceKind::Tetrahedron).unwrap();
        let w = WeightConfig::uniform(&s, 1, 1.0).unwrap();
        let g = ConformalState::new(Geometry::Euclidean, &w, vec![0.0; 4]).unwrap();
        assert!(matches!(
            solve_prescribed(&s, &w, Geometry::Euclidean, &[0.0; 4], &g),
            Err(Error::TargetInadmissible(_))
        ));
    }

    #[test]
    fn unreachable_target_has_no_interior_solution() {
        // A degree-3 vertex has curvature at least 2π - 3π.
        let s = generate(SurfaceKind::Tetrahedron).unwrap();
        let w = WeightConfig::uniform(&s, 0, 1.0).unwrap();
        let g = ConformalState::new(Geometry::Euclidean, &w, vec![0.0; 4]).unwrap();
        let rest = (5.0 * PI + 0.5) / 3.0;
        let target = [-PI - 0.5, rest, rest, rest];
        let r = solve_prescribed(&s, &w, Geometry::Euclidean, &target, &g);
        assert!(
            matches!(r, Err(Error::NoInteriorSolution) | Err(Error::MaxIterations(_))),
            "{r:?}"
        );
    }
}
