//! Ricci and Calabi flows in both background geometries.
//!
//! Every flow is `du/dt = v(u)` with
//!
//! | kind                    | v                 | curvature |
//! |-------------------------|-------------------|-----------|
//! | Ricci                   | -K                | strict    |
//! | NormalizedRicci         | K_av - K          | strict    |
//! | ModifiedRicci           | K̄ - K             | strict    |
//! | ExtendedModifiedRicci   | K̄ - K̃             | extended  |
//! | Calabi, ModifiedCalabi  | -Λ(K - K̄)         | strict    |
//!
//! where K_av = 2πχ/N. Plain Calabi uses K̄ = K_av in Euclidean geometry
//! (which leaves the velocity unchanged since Λ𝟙 = 0) and K̄ = 0 in hyperbolic
//! geometry.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use crate::calculus::{assemble_jacobian, calabi_energy, potential_increment_with, surface_energies_with};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{self, ConformalState, Geometry, MetricReport};
use crate::surface::{TriangulatedSurface, WeightConfig};

/// Triangle-inequality slack below which a Calabi flow is stopped.
pub const CALABI_MIN_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowKind {
    Ricci,
    NormalizedRicci,
    ModifiedRicci,
    ExtendedModifiedRicci,
    Calabi,
    ModifiedCalabi,
}

impl FlowKind {
    pub const ALL: [FlowKind; 6] = [
        FlowKind::Ricci,
        FlowKind::NormalizedRicci,
        FlowKind::ModifiedRicci,
        FlowKind::ExtendedModifiedRicci,
        FlowKind::Calabi,
        FlowKind::ModifiedCalabi,
    ];

    pub fn is_calabi(self) -> bool {
        matches!(self, FlowKind::Calabi | FlowKind::ModifiedCalabi)
    }

    pub fn is_extended(self) -> bool {
        self == FlowKind::ExtendedModifiedRicci
    }

    /// Kinds driven toward a prescribed curvature.
    pub fn is_modified(self) -> bool {
        matches!(
            self,
            FlowKind::ModifiedRicci | FlowKind::ExtendedModifiedRicci | FlowKind::ModifiedCalabi
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            FlowKind::Ricci => "ricci",
            FlowKind::NormalizedRicci => "normalized-ricci",
            FlowKind::ModifiedRicci => "modified-ricci",
            FlowKind::ExtendedModifiedRicci => "extended-ricci",
            FlowKind::Calabi => "calabi",
            FlowKind::ModifiedCalabi => "modified-calabi",
        }
    }
}

impl fmt::Display for FlowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FlowKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let k = s.to_ascii_lowercase().replace('_', "-");
        if k == "extended-modified-ricci" {
            return Ok(FlowKind::ExtendedModifiedRicci);
        }
        FlowKind::ALL
            .into_iter()
            .find(|kind| kind.name() == k)
            .ok_or_else(|| format!("unknown flow kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Integrator {
    #[default]
    Euler,
    Rk4,
}

impl FromStr for Integrator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "euler" => Ok(Integrator::Euler),
            "rk4" => Ok(Integrator::Rk4),
            _ => Err(format!("unknown integrator `{s}`")),
        }
    }
}

/// Configuration of one flow run. `target = None` selects the default K̄ of
/// the kind.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    pub kind: FlowKind,
    pub geometry: Geometry,
    pub target: Option<Vec<f64>>,
    pub integrator: Integrator,
    pub dt: f64,
    /// Convergence threshold on max|K̃ - K̄|.
    pub tol: f64,
    pub max_time: f64,
    /// A trace row is recorded every `stride` steps (and at the end).
    pub stride: usize,
    /// Shift the initial state along 𝟙 so that Σu(0) equals this value.
    /// Euclidean geometry only.
    pub normalize_sum: Option<f64>,
    /// Track H̃ along the run.
    pub track_energy: bool,
    /// Step halvings allowed for strict kinds before giving up.
    pub max_halvings: usize,
    pub exec: Exec,
}

impl FlowSpec {
    pub fn new(kind: FlowKind, geometry: Geometry) -> Self {
        Self {
            kind,
            geometry,
            target: None,
            integrator: Integrator::Euler,
            dt: 1e-2,
            tol: 1e-10,
            max_time: 100.0,
            stride: 10,
            normalize_sum: None,
            track_energy: true,
            max_halvings: 20,
            exec: Exec::default(),
        }
    }

    pub fn with_target(mut self, target: Vec<f64>) -> Self {
        self.target = Some(target);
        self
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_time(mut self, max_time: f64) -> Self {
        self.max_time = max_time;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_normalize_sum(mut self, sum: f64) -> Self {
        self.normalize_sum = Some(sum);
        self
    }

    pub fn with_track_energy(mut self, on: bool) -> Self {
        self.track_energy = on;
        self
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    /// Whether the continuous flow keeps Σu constant.
    fn conserves_sum(&self) -> bool {
        self.geometry == Geometry::Euclidean && self.kind != FlowKind::Ricci
    }
}

/// Outcome of [`check_target`]: the effective K̄ and any violated constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetReport {
    pub target: Vec<f64>,
    pub sum: f64,
    /// 2πχ(M).
    pub required: f64,
    pub violations: Vec<String>,
}

impl TargetReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn check_target(spec: &FlowSpec, surface: &TriangulatedSurface) -> TargetReport {
    let n = surface.vertex_count();
    let required = TAU * surface.euler_characteristic() as f64;
    let average = required / n as f64;
    let mut violations = Vec::new();
    let euclidean = spec.geometry == Geometry::Euclidean;

    let default = match spec.kind {
        FlowKind::Ricci => 0.0,
        FlowKind::NormalizedRicci | FlowKind::Calabi if euclidean => average,
        FlowKind::NormalizedRicci => {
            violations.push("normalized Ricci flow is only defined in Euclidean geometry".into());
            average
        }
        FlowKind::Calabi => 0.0,
        _ if euclidean => average,
        _ => 0.0,
    };
    let target = match &spec.target {
        None => vec![default; n],
        Some(t) if t.len() != n => {
            violations.push(format!("target has {} entries, surface has {n} vertices", t.len()));
            vec![default; n]
        }
        Some(t) => {
            if !spec.kind.is_modified() && t.iter().any(|&k| k != default) {
                violations.push(format!(
                    "{} flow has the fixed target {default}; prescribe curvature with a modified kind",
                    spec.kind
                ));
            }
            t.clone()
        }
    };
    for (i, &k) in target.iter().enumerate() {
        if !k.is_finite() || k >= TAU {
            violations.push(format!("target at vertex {i} is {k}, must be finite and below 2π"));
        }
    }
    let sum: f64 = target.iter().sum();
    if spec.kind.is_modified() || spec.kind == FlowKind::NormalizedRicci {
        if euclidean {
            let scale = 1.0 + target.iter().map(|k| k.abs()).sum::<f64>();
            if (sum - required).abs() > 1e-9 * scale {
                violations.push(format!("target sums to {sum}, needs 2πχ = {required}"));
            }
        } else if !(sum > required) {
            violations.push(format!("target sums to {sum}, needs more than 2πχ = {required}"));
        }
    }
    TargetReport {
        target,
        sum,
        required,
        violations,
    }
}

/// Velocity at a state, with the data it was computed from.
struct Eval {
    velocity: Vec<f64>,
    report: MetricReport,
    residual: f64,
}

struct Field<'a> {
    spec: &'a FlowSpec,
    surface: &'a TriangulatedSurface,
    weights: &'a WeightConfig,
    target: Vec<f64>,
}

impl<'a> Field<'a> {
    fn new(
        spec: &'a FlowSpec,
        surface: &'a TriangulatedSurface,
        weights: &'a WeightConfig,
    ) -> Result<Self> {
        if weights.epsilon().len() != surface.vertex_count() {
            return Err(Error::DimensionMismatch {
                expected: surface.vertex_count(),
                got: weights.epsilon().len(),
            });
        }
        if !(spec.dt > 0.0 && spec.dt.is_finite()) || !(spec.tol > 0.0) || spec.stride == 0 {
            return Err(Error::BadHypothesis(
                "dt and tol must be positive and stride nonzero".into(),
            ));
        }
        let report = check_target(spec, surface);
        if !report.passed() {
            return Err(Error::TargetInadmissible(report.violations.join("; ")));
        }
        Ok(Self {
            spec,
            surface,
            weights,
            target: report.target,
        })
    }

    fn check_anomaly(&self, u: &[f64]) -> Result<()> {
        if self.spec.geometry == Geometry::Hyperbolic {
            for (i, (&ui, &e)) in u.iter().zip(self.weights.epsilon()).enumerate() {
                if e == 1 && !(ui < 0.0) {
                    return Err(Error::Anomaly {
                        vertex: i,
                        value: ui,
                    });
                }
            }
        }
        Ok(())
    }

    fn eval(&self, u: &[f64]) -> Result<Eval> {
        self.check_anomaly(u)?;
        let spec = self.spec;
        let report = geometry::evaluate(
            spec.exec,
            self.surface,
            self.weights,
            spec.geometry,
            u,
            spec.kind.is_extended(),
        )?;
        let diff: Vec<f64> = report
            .curvature
            .iter()
            .zip(&self.target)
            .map(|(k, kb)| k - kb)
            .collect();
        let residual = diff.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        let velocity = if spec.kind.is_calabi() {
            let jac = assemble_jacobian(spec.exec, self.surface, self.weights, spec.geometry, u)?;
            jac.apply_laplacian(&diff)
        } else {
            diff.into_iter().map(|d| -d).collect()
        };
        Ok(Eval {
            velocity,
            report,
            residual,
        })
    }

    fn velocity(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.eval(u).map(|e| e.velocity)
    }

    /// One integrator step from `u` with known velocity `v0`, no safeguards.
    fn raw_step(&self, u: &[f64], v0: &[f64], dt: f64) -> Result<Vec<f64>> {
        let axpy = |a: f64, x: &[f64]| -> Vec<f64> {
            u.iter().zip(x).map(|(ui, xi)| ui + a * xi).collect()
        };
        match self.spec.integrator {
            Integrator::Euler => Ok(axpy(dt, v0)),
            Integrator::Rk4 => {
                let k2 = self.velocity(&axpy(0.5 * dt, v0))?;
                let k3 = self.velocity(&axpy(0.5 * dt, &k2))?;
                let k4 = self.velocity(&axpy(dt, &k3))?;
                Ok((0..u.len())
                    .map(|i| u[i] + dt / 6.0 * (v0[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                    .collect())
            }
        }
    }

    /// A step with halving for strict kinds and Σu compensation. Returns the
    /// new coordinates, their evaluation and the step record.
    fn step(&self, u: &[f64], ev: &Eval, dt: f64, sum0: f64) -> Result<(Vec<f64>, Eval, StepOutcome)> {
        let strict = !self.spec.kind.is_extended();
        let mut h = dt;
        let mut halvings = 0;
        loop {
            let attempt = self.raw_step(u, &ev.velocity, h).and_then(|mut next| {
                let correction = if self.spec.conserves_sum() {
                    let drift = (next.iter().sum::<f64>() - sum0) / next.len() as f64;
                    next.iter_mut().for_each(|x| *x -= drift);
                    drift
                } else {
                    0.0
                };
                let e = self.eval(&next)?;
                Ok((next, e, correction))
            });
            match attempt {
                Ok((next, e, correction)) => {
                    return Ok((
                        next,
                        e,
                        StepOutcome {
                            dt: h,
                            halvings,
                            sum_correction: correction,
                        },
                    ))
                }
                Err(Error::DegenerateFace { .. }) if strict => {
                    if halvings == self.spec.max_halvings {
                        return Err(Error::StepFailure { halvings });
                    }
                    halvings += 1;
                    h *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Record of an accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Step size actually taken.
    pub dt: f64,
    pub halvings: usize,
    /// Mean drift removed to keep Σu fixed (zero when not applicable).
    pub sum_correction: f64,
}

/// The flow velocity at `state`.
pub fn vector_field(
    spec: &FlowSpec,
    surface: &TriangulatedSurface,
    weights: &WeightConfig,
    state: &ConformalState,
) -> Result<Vec<f64>> {
    check_geometry(spec, state)?;
    Field::new(spec, surface, weights)?.velocity(state.u())
}

/// One step of size `dt` (halved as needed for strict kinds).
pub fn step(
    spec: &FlowSpec,
    surface: &TriangulatedSurface,
    weights: &WeightConfig,
    state: &ConformalState,
    dt: f64,
) -> Result<(ConformalState, StepOutcome)> {
    check_geometry(spec, state)?;
    let field = Field::new(spec, surface, weights)?;
    let ev = field.eval(state.u())?;
    let sum0 = state.u().iter().sum();
    let (next, _, outcome) = field.step(state.u(), &ev, dt, sum0)?;
    Ok((ConformalState::new(spec.geometry, weights, next)?, outcome))
}

fn check_geometry(spec: &FlowSpec, state: &ConformalState) -> Result<()> {
    if spec.geometry != state.geometry() {
        return Err(Error::BadHypothesis(format!(
            "flow is {:?} but the state is {:?}",
            spec.geometry,
            state.geometry()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    Converged,
    MaxTime,
    Degenerated,
    Diverged,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::MaxTime => "max-time",
            Termination::Degenerated => "degenerated",
            Termination::Diverged => "diverged",
        })
    }
}

/// One sampled state of a flow.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub t: f64,
    pub u: Vec<f64>,
    /// K, or K̃ for the extended kind.
    pub curvature: Vec<f64>,
    /// max|K̃ - K̄|.
    pub residual: f64,
    pub sum_u: f64,
    /// H̃ relative to the base state; NaN when energy tracking is off.
    pub energy: f64,
    pub calabi: f64,
    /// Mean drift removed on the step that produced this row.
    pub sum_correction: f64,
}

/// Consumer of trace rows as they are produced.
pub trait TraceSink {
    fn push(&mut self, row: &TraceRow);
}

impl TraceSink for Vec<TraceRow> {
    fn push(&mut self, row: &TraceRow) {
        Vec::push(self, row.clone());
    }
}

/// Discards rows.
pub struct NullSink;

impl TraceSink for NullSink {
    fn push(&mut self, _: &TraceRow) {}
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    /// Empty when the rows went to an external sink.
    pub rows: Vec<TraceRow>,
    pub termination: Termination,
    /// The error behind a non-converged, non-timeout termination.
    pub error: Option<Error>,
    pub final_state: ConformalState,
    pub final_residual: f64,
    pub t: f64,
    pub steps: usize,
    /// Shift applied along 𝟙 to the initial state.
    pub initial_shift: f64,
    /// max |Σu(t) - Σu(0)| over the run (after compensation).
    pub max_sum_drift: f64,
    /// Largest single-step change of H̃ (NaN without energy tracking).
    pub max_energy_increment: f64,
    /// Total halvings performed by strict kinds.
    pub halvings: usize,
    pub target: Vec<f64>,
}

pub fn run_flow(
    spec: &FlowSpec,
    surface: &TriangulatedSurface,
    weights: &WeightConfig,
    initial: &ConformalState,
) -> Result<FlowTrace> {
    let mut rows = Vec::new();
    let mut trace = run_flow_with_sink(spec, surface, weights, initial, &mut rows)?;
    trace.rows = rows;
    Ok(trace)
}

fn termination_for(e: &Error) -> Termination {
    match e {
        Error::DegenerateFace { .. } | Error::DegenerateTriangle | Error::StepFailure { .. } => {
            Termination::Degenerated
        }
        _ => Termination::Diverged,
    }
}

/// Runs a flow, streaming rows to `sink`. Configuration errors are returned
/// as `Err`; failures during integration end the run with a termination
/// reason instead.
pub fn run_flow_with_sink(
    spec: &FlowSpec,
    surface: &TriangulatedSurface,
    weights: &WeightConfig,
    initial: &ConformalState,
    sink: &mut dyn TraceSink,
) -> Result<FlowTrace> {
    check_geometry(spec, initial)?;
    let field = Field::new(spec, surface, weights)?;
    let n = surface.vertex_count();
    let mut u = initial.u().to_vec();
    let mut initial_shift = 0.0;
    if let Some(s) = spec.normalize_sum {
        if spec.geometry != Geometry::Euclidean {
            return Err(Error::BadHypothesis(
                "sum normalization applies to Euclidean flows only".into(),
            ));
        }
        initial_shift = (s - u.iter().sum::<f64>()) / n as f64;
        u.iter_mut().for_each(|x| *x += initial_shift);
    }
    let sum0: f64 = u.iter().sum();

    let mut trace = FlowTrace {
        rows: Vec::new(),
        termination: Termination::MaxTime,
        error: None,
        final_state: ConformalState::new(spec.geometry, weights, u.clone())?,
        final_residual: f64::NAN,
        t: 0.0,
        steps: 0,
        initial_shift,
        max_sum_drift: 0.0,
        max_energy_increment: if spec.track_energy { f64::NEG_INFINITY } else { f64::NAN },
        halvings: 0,
        target: field.target.clone(),
    };

    let mut ev = match field.eval(&u) {
        Ok(ev) => ev,
        Err(e) => {
            trace.termination = termination_for(&e);
            trace.error = Some(e);
            return Ok(trace);
        }
    };
    let mut energy = if spec.track_energy {
        let base = ConformalState::base(spec.geometry, weights);
        surface_energies_with(
            spec.exec,
            surface,
            weights,
            &trace.final_state,
            &field.target,
            &base,
            true,
        )?
        .potential
    } else {
        f64::NAN
    };

    let mut t = 0.0;
    let mut steps = 0;
    let mut last_correction = 0.0;
    let mut emitted_at = None;
    let emit = |sink: &mut dyn TraceSink, steps: usize, t: f64, u: &[f64], ev: &Eval, energy: f64, corr: f64| {
        sink.push(&TraceRow {
            step: steps,
            t,
            u: u.to_vec(),
            curvature: ev.report.curvature.clone(),
            residual: ev.residual,
            sum_u: u.iter().sum(),
            energy,
            calabi: calabi_energy(&ev.report.curvature, &field.target),
            sum_correction: corr,
        });
    };

    loop {
        if steps % spec.stride == 0 {
            emit(sink, steps, t, &u, &ev, energy, last_correction);
            emitted_at = Some(steps);
        }
        if ev.residual < spec.tol {
            trace.termination = Termination::Converged;
            break;
        }
        let remaining = spec.max_time - t;
        if remaining <= 1e-12 * spec.dt {
            trace.termination = Termination::MaxTime;
            break;
        }
        if spec.kind.is_calabi() && ev.report.min_slack(surface) < CALABI_MIN_SLACK {
            trace.termination = Termination::Degenerated;
            break;
        }
        let h = spec.dt.min(remaining);
        let (next, next_ev, outcome) = match field.step(&u, &ev, h, sum0) {
            Ok(r) => r,
            Err(e) => {
                trace.termination = termination_for(&e);
                trace.error = Some(e);
                break;
            }
        };
        if spec.track_energy {
            match potential_increment_with(
                spec.exec,
                surface,
                weights,
                spec.geometry,
                &field.target,
                &u,
                &next,
            ) {
                Ok(inc) => {
                    energy += inc;
                    trace.max_energy_increment = trace.max_energy_increment.max(inc);
                }
                Err(e) => {
                    trace.termination = termination_for(&e);
                    trace.error = Some(e);
                    break;
                }
            }
        }
        if next.iter().any(|x| !x.is_finite()) {
            trace.termination = Termination::Diverged;
            break;
        }
        u = next;
        ev = next_ev;
        t = if outcome.dt == remaining { spec.max_time } else { t + outcome.dt };
        steps += 1;
        trace.halvings += outcome.halvings;
        last_correction = outcome.sum_correction;
        if spec.conserves_sum() {
            trace.max_sum_drift = trace.max_sum_drift.max((u.iter().sum::<f64>() - sum0).abs());
        }
    }
    if emitted_at != Some(steps) {
        emit(sink, steps, t, &u, &ev, energy, last_correction);
    }
    trace.final_residual = ev.residual;
    trace.final_state = ConformalState::new(spec.geometry, weights, u)?;
    trace.t = t;
    trace.steps = steps;
    Ok(trace)
}
