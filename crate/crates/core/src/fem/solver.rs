use serde::{Deserialize, Serialize};

use crate::curve::StressStrainCurve;
use crate::error::{Error, Result};
use crate::fem::assembly::{
    assemble, constrained_dofs, element_average_stress, MixedField, StepContext,
    HALF_BANDWIDTH,
};
use crate::fem::band::BandMatrix;
use crate::fem::mesh::Mesh1D;
use crate::material::{SgpParams, DEFAULT_RATE_FLOOR};

/// Displacement-controlled compression at constant strain rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadProgram {
    /// Applied strain rate (1/s); negative in compression.
    pub strain_rate: f64,
    /// Time increment (s).
    pub dt: f64,
    /// Applied strain at the end of the program; same sign as the rate.
    pub final_strain: f64,
}

impl Default for LoadProgram {
    fn default() -> Self {
        Self {
            strain_rate: -1.0,
            dt: 5.0e-5,
            final_strain: -0.008,
        }
    }
}

impl LoadProgram {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.final_strain == 0.0 || !self.final_strain.is_finite() {
            return Err(Error::InvalidConfig("final_strain must be non-zero".into()));
        }
        if self.strain_rate == 0.0 || self.strain_rate.signum() != self.final_strain.signum() {
            return Err(Error::InvalidConfig(
                "strain_rate must be non-zero with the sign of final_strain".into(),
            ));
        }
        Ok(())
    }

    /// Number of time steps needed to reach the final strain.
    pub fn n_steps(&self) -> usize {
        (self.final_strain / (self.strain_rate * self.dt)).round().max(1.0) as usize
    }

    pub fn applied_strain(&self, time: f64) -> f64 {
        self.strain_rate * time
    }
}

/// Newton and load-control settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Convergence threshold relative to the initial residual of a step.
    pub tol: f64,
    /// Absolute residual floor.
    pub abs_tol: f64,
    pub max_iter: usize,
    /// Small-rate floor inside the effective flow rate (1/s).
    pub rate_floor: f64,
    /// Maximum number of bisections of a load increment.
    pub max_substep_depth: u32,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            abs_tol: 1e-12,
            max_iter: 25,
            rate_floor: DEFAULT_RATE_FLOOR,
            max_substep_depth: 10,
        }
    }
}

/// One accepted time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Signed applied strain u†/L.
    pub applied_strain: f64,
    /// Signed element-averaged stress in the loaded end element (GPa).
    pub stress: f64,
    /// Nodal plastic strain at the vertices.
    pub eps_p: Vec<f64>,
    pub newton_iterations: usize,
    pub substeps: usize,
    /// Residual ∞-norm of the last accepted Newton solve of the step.
    pub residual: f64,
    /// Threshold that residual had to meet.
    pub threshold: f64,
}

/// History of an accepted solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    pub length: f64,
    pub nodes: Vec<f64>,
    pub records: Vec<StepRecord>,
}

/// Plastic strain over the normalised coordinate y/L.
#[derive(Debug, Clone, PartialEq)]
pub struct PlasticProfile {
    pub applied_strain: f64,
    pub y_over_l: Vec<f64>,
    pub eps_p: Vec<f64>,
}

impl PlasticProfile {
    /// Largest |εᵖ(y) − εᵖ(L − y)| over mirrored node pairs.
    pub fn asymmetry(&self) -> f64 {
        let n = self.eps_p.len();
        (0..n / 2 + 1)
            .map(|i| (self.eps_p[i] - self.eps_p[n - 1 - i]).abs())
            .fold(0.0, f64::max)
    }

    /// Distance (in units of y/L) from the y = 0 wall to the first point where
    /// |εᵖ| reaches `fraction` of its mid-span value.
    pub fn boundary_layer_width(&self, fraction: f64) -> Option<f64> {
        let mid = interpolate(&self.y_over_l, &self.eps_p, 0.5).abs();
        if mid == 0.0 {
            return None;
        }
        let target = fraction * mid;
        for i in 1..self.eps_p.len() {
            let (a, b) = (self.eps_p[i - 1].abs(), self.eps_p[i].abs());
            if a < target && b >= target {
                let t = (target - a) / (b - a);
                return Some(self.y_over_l[i - 1] + t * (self.y_over_l[i] - self.y_over_l[i - 1]));
            }
        }
        None
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["y_over_l", "eps_p"])?;
        for (y, e) in self.y_over_l.iter().zip(&self.eps_p) {
            w.write_record([format!("{y:.11e}"), format!("{e:.11e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
    let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    ys[k - 1] + t * (ys[k] - ys[k - 1])
}

impl SolveTrace {
    /// εᵖ profile at the accepted step whose applied strain magnitude is
    /// nearest to `at_strain` (a magnitude).
    pub fn plastic_profile(&self, at_strain: f64) -> Result<PlasticProfile> {
        let max = self
            .records
            .last()
            .map(|r| r.applied_strain.abs())
            .unwrap_or(0.0);
        let step = if self.records.len() > 1 {
            (self.records[1].applied_strain - self.records[0].applied_strain).abs()
        } else {
            max
        };
        if !(at_strain >= 0.0 && at_strain <= max + 0.5 * step) {
            return Err(Error::OutOfRange {
                requested: at_strain,
                max,
            });
        }
        let rec = self
            .records
            .iter()
            .min_by(|a, b| {
                (a.applied_strain.abs() - at_strain)
                    .abs()
                    .total_cmp(&(b.applied_strain.abs() - at_strain).abs())
            })
            .ok_or(Error::OutOfRange {
                requested: at_strain,
                max,
            })?;
        Ok(PlasticProfile {
            applied_strain: rec.applied_strain,
            y_over_l: self.nodes.iter().map(|y| y / self.length).collect(),
            eps_p: rec.eps_p.clone(),
        })
    }
}

/// Convergence summary of a Newton solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual: f64,
    /// Convergence threshold the residual was held to.
    pub threshold: f64,
}

/// Scratch storage reused across Newton iterations.
struct Workspace {
    residual: Vec<f64>,
    rhs: Vec<f64>,
    tangent: BandMatrix,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            residual: vec![0.0; n],
            rhs: vec![0.0; n],
            tangent: BandMatrix::zeros(n, HALF_BANDWIDTH),
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for x in v {
        if x.is_nan() {
            return f64::NAN;
        }
        m = m.max(x.abs());
    }
    m
}

/// Newton iteration for one load increment, in global (interleaved) layout.
///
/// The convergence reference is the residual at the previous converged state
/// with the new boundary data, so the stopping rule does not depend on the
/// starting point. Iteration starts from `guess` when given, otherwise from
/// that state.
fn newton_global(
    x: &mut [f64],
    x_prev: &[f64],
    guess: Option<&[f64]>,
    ctx: &StepContext<'_>,
    opts: &SolverOptions,
    ws: &mut Workspace,
) -> Result<NewtonReport> {
    let bc = constrained_dofs(ctx.mesh.n_elements());
    let set_bcs = |x: &mut [f64]| {
        x[bc[0]] = 0.0;
        x[bc[1]] = 0.0;
        x[bc[2]] = ctx.u_dagger;
        x[bc[3]] = 0.0;
    };
    x.copy_from_slice(x_prev);
    set_bcs(x);
    let r0 = if let Some(g) = guess {
        assemble(x, x_prev, ctx, &mut ws.residual, None);
        x.copy_from_slice(g);
        set_bcs(x);
        inf_norm(&ws.residual)
    } else {
        f64::NAN
    };
    let mut threshold = (opts.tol * r0).max(opts.abs_tol);

    let mut iter = 0;
    loop {
        assemble(x, x_prev, ctx, &mut ws.residual, Some(&mut ws.tangent));
        let r = inf_norm(&ws.residual);
        if !r.is_finite() {
            return Err(Error::NonConvergence {
                iterations: iter,
                residual: r,
            });
        }
        if iter == 0 && guess.is_none() {
            threshold = (opts.tol * r).max(opts.abs_tol);
        }
        if r <= threshold {
            return Ok(NewtonReport {
                iterations: iter,
                residual: r,
                threshold,
            });
        }
        if iter >= opts.max_iter {
            return Err(Error::NonConvergence {
                iterations: iter,
                residual: r,
            });
        }
        for (b, r) in ws.rhs.iter_mut().zip(&ws.residual) {
            *b = -r;
        }
        // constrained rows are unit rows; move their columns to the rhs
        for &d in &bc {
            let delta = ws.rhs[d];
            let lo = d.saturating_sub(HALF_BANDWIDTH);
            let hi = (d + HALF_BANDWIDTH).min(x.len() - 1);
            for i in lo..=hi {
                if i != d {
                    ws.rhs[i] -= ws.tangent.get(i, d) * delta;
                }
            }
            ws.tangent.set_identity_row_col(d);
        }
        if !ws.tangent.solve_in_place(&mut ws.rhs) {
            return Err(Error::NonConvergence {
                iterations: iter,
                residual: r,
            });
        }
        for (xi, dx) in x.iter_mut().zip(&ws.rhs) {
            *xi += dx;
        }
        iter += 1;
    }
}

/// Solves one load increment starting from the previous converged state.
pub fn newton_step_solve(
    prev: &MixedField,
    u_dagger: f64,
    dt: f64,
    params: &SgpParams,
    mesh: &Mesh1D,
    opts: &SolverOptions,
) -> Result<(MixedField, NewtonReport)> {
    if !prev.is_consistent_with(mesh) {
        return Err(Error::InvalidConfig("field does not match the mesh".into()));
    }
    let ctx = StepContext {
        mesh,
        params,
        dt,
        u_dagger,
        rate_floor: opts.rate_floor,
    };
    let x_prev = prev.to_global();
    let mut x = x_prev.clone();
    let mut ws = Workspace::new(x.len());
    let report = newton_global(&mut x, &x_prev, None, &ctx, opts, &mut ws)?;
    Ok((MixedField::from_global(&x), report))
}

/// Assembles the residual of the weak form for the given fields.
pub fn assemble_residual(
    fields: &MixedField,
    prev: &MixedField,
    u_dagger: f64,
    dt: f64,
    params: &SgpParams,
    mesh: &Mesh1D,
    rate_floor: f64,
) -> Vec<f64> {
    let ctx = StepContext {
        mesh,
        params,
        dt,
        u_dagger,
        rate_floor,
    };
    let x = fields.to_global();
    let mut r = vec![0.0; x.len()];
    assemble(&x, &prev.to_global(), &ctx, &mut r, None);
    r
}

/// Dense copy of the consistent tangent, in global layout.
pub fn assemble_tangent(
    fields: &MixedField,
    prev: &MixedField,
    u_dagger: f64,
    dt: f64,
    params: &SgpParams,
    mesh: &Mesh1D,
    rate_floor: f64,
) -> Vec<Vec<f64>> {
    let ctx = StepContext {
        mesh,
        params,
        dt,
        u_dagger,
        rate_floor,
    };
    let x = fields.to_global();
    let mut r = vec![0.0; x.len()];
    let mut k = BandMatrix::zeros(x.len(), HALF_BANDWIDTH);
    assemble(&x, &prev.to_global(), &ctx, &mut r, Some(&mut k));
    k.to_dense()
}

/// Runs the compression program and returns the (|strain|, |stress|) curve,
/// starting at the unloaded state, together with the step trace.
pub fn run_compression(
    params: &SgpParams,
    mesh: &Mesh1D,
    program: &LoadProgram,
    opts: &SolverOptions,
) -> Result<(StressStrainCurve, SolveTrace)> {
    params.validate()?;
    program.validate()?;

    let n_steps = program.n_steps();
    let length = mesh.length();
    let last_el = mesh.n_elements() - 1;
    let n = mesh.n_dofs();
    let mut ws = Workspace::new(n);
    let mut x_prev = vec![0.0; n];
    let mut x = vec![0.0; n];
    // rate of the last accepted increment, used to predict the next state
    let mut rate: Option<Vec<f64>> = None;
    let mut guess = vec![0.0; n];

    let mut strain = Vec::with_capacity(n_steps + 1);
    let mut stress = Vec::with_capacity(n_steps + 1);
    strain.push(0.0);
    stress.push(0.0);
    let mut records = Vec::with_capacity(n_steps);

    let max_depth = opts.max_substep_depth.min(30);
    let units: u64 = 1 << max_depth;

    for step in 1..=n_steps {
        let t_start = (step - 1) as f64 * program.dt;
        let mut pos: u64 = 0;
        let mut depth: u32 = 0;
        let mut successes = 0;
        let mut substeps = 0;
        let mut iterations = 0;
        let mut residual = 0.0;
        let mut threshold = 0.0;

        while pos < units {
            let size = units >> depth;
            let next = pos + size;
            let dt_sub = program.dt * size as f64 / units as f64;
            let t_next = t_start + program.dt * next as f64 / units as f64;
            let ctx = StepContext {
                mesh,
                params,
                dt: dt_sub,
                u_dagger: program.applied_strain(t_next) * length,
                rate_floor: opts.rate_floor,
            };
            let mut outcome = Err(Error::NonConvergence {
                iterations: 0,
                residual: f64::NAN,
            });
            if let Some(v) = &rate {
                for ((g, xp), r) in guess.iter_mut().zip(&x_prev).zip(v) {
                    *g = xp + r * dt_sub;
                }
                outcome = newton_global(&mut x, &x_prev, Some(&guess), &ctx, opts, &mut ws);
            }
            if outcome.is_err() {
                // fall back to the previous converged state
                outcome = newton_global(&mut x, &x_prev, None, &ctx, opts, &mut ws);
            }
            match outcome {
                Ok(rep) => {
                    iterations += rep.iterations;
                    residual = rep.residual;
                    threshold = rep.threshold;
                    substeps += 1;
                    pos = next;
                    let v = rate.get_or_insert_with(|| vec![0.0; n]);
                    for ((vi, xi), xp) in v.iter_mut().zip(&x).zip(&x_prev) {
                        *vi = (xi - xp) / dt_sub;
                    }
                    x_prev.copy_from_slice(&x);
                    successes += 1;
                    if successes >= 2 && depth > 0 && pos.is_multiple_of(units >> (depth - 1)) {
                        depth -= 1;
                        successes = 0;
                    }
                }
                Err(Error::NonConvergence { residual: r, .. }) => {
                    successes = 0;
                    depth += 1;
                    if depth > max_depth {
                        return Err(Error::SolverFailure {
                            strain: program.applied_strain(t_next),
                            reason: format!(
                                "load increment bisected {max_depth} times without convergence (residual {r:e})"
                            ),
                        });
                    }
                }
                Err(e) => return Err(e),
            }
        }

        let applied = program.applied_strain(step as f64 * program.dt);
        let t = element_average_stress(&x_prev, mesh, params, last_el);
        strain.push(applied.abs());
        stress.push(t.abs());
        records.push(StepRecord {
            applied_strain: applied,
            stress: t,
            eps_p: MixedField::from_global(&x_prev).eps_p,
            newton_iterations: iterations,
            substeps,
            residual,
            threshold,
        });
    }

    let trace = SolveTrace {
        length,
        nodes: mesh.nodes().to_vec(),
        records,
    };
    Ok((StressStrainCurve { strain, stress }, trace))
}

/// Accepted-state invariants, used by tests and diagnostics.
pub fn boundary_conditions_hold(field: &MixedField, u_dagger: f64) -> bool {
    field.u[0] == 0.0
        && *field.u.last().unwrap() == u_dagger
        && field.eps_p[0] == 0.0
        && *field.eps_p.last().unwrap() == 0.0
}
