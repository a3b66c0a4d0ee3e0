//! Five-stage fourth-order low-storage Runge-Kutta (Carpenter-Kennedy).

use crate::error::{Error, Result};
use crate::ldg::{FieldVector, LdgContext};

pub const LSRK_A: [f64; 5] = [
    0.0,
    -567301805773.0 / 1357537059087.0,
    -2404267990393.0 / 2016746695238.0,
    -3550918686646.0 / 2091501179385.0,
    -1275806237668.0 / 842570457699.0,
];

pub const LSRK_B: [f64; 5] = [
    1432997174477.0 / 9575080441755.0,
    5161836677717.0 / 13612068292357.0,
    1720146321549.0 / 2090206949498.0,
    3134564353537.0 / 4481467310338.0,
    2277821191437.0 / 14882151754819.0,
];

pub const LSRK_C: [f64; 5] = [
    0.0,
    1432997174477.0 / 9575080441755.0,
    2526269341429.0 / 6820363962896.0,
    2006345519317.0 / 3224310063776.0,
    2802321613138.0 / 2924317926251.0,
];

/// Default CFL factor for `dt = cfl * h_min^2 / N^4`.
pub const DEFAULT_CFL: f64 = 0.25;

/// `dt * rho` used by [`StepSize::Auto`]. The stability region of the scheme
/// contains the disc sector of radius 3.2 within 60 degrees of the negative
/// real axis.
pub const AUTO_STABILITY: f64 = 2.8;

/// Power iterations used to estimate the spectral radius.
pub const POWER_ITERATIONS: usize = 40;

/// One step in place. `res` is the second storage register and is
/// overwritten.
pub fn lsrk_step_in_place<F>(mut rhs: F, u: &mut [f64], res: &mut [f64], t: f64, dt: f64) -> Result<()>
where
    F: FnMut(&[f64], f64) -> Result<Vec<f64>>,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimeSpec(format!("dt must be positive, got {dt}")));
    }
    res.iter_mut().for_each(|r| *r = 0.0);
    for stage in 0..5 {
        let k = rhs(u, t + LSRK_C[stage] * dt)?;
        if k.len() != u.len() {
            return Err(Error::DimensionMismatch {
                expected: u.len(),
                got: k.len(),
            });
        }
        for ((r, x), kv) in res.iter_mut().zip(u.iter_mut()).zip(&k) {
            *r = LSRK_A[stage] * *r + dt * kv;
            *x += LSRK_B[stage] * *r;
        }
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Unstable { t: t + dt, dt });
    }
    Ok(())
}

/// One step of `du/dt = rhs(u, t)` from `t` to `t + dt`.
pub fn lsrk_step<F>(mut rhs: F, u: &FieldVector, t: f64, dt: f64) -> Result<FieldVector>
where
    F: FnMut(&FieldVector, f64) -> Result<FieldVector>,
{
    let np = u.np();
    let mut state = u.values().to_vec();
    let mut res = vec![0.0; state.len()];
    lsrk_step_in_place(
        |v, t| {
            let f = FieldVector::from_values(v.to_vec(), np)?;
            Ok(rhs(&f, t)?.into_values())
        },
        &mut state,
        &mut res,
        t,
        dt,
    )?;
    FieldVector::from_values(state, np)
}

/// How the step size is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Fixed(f64),
    /// `dt = cfl * h_min^2 / N^4`
    Cfl(f64),
    /// `dt = AUTO_STABILITY / rho`, with `rho` the estimated spectral radius
    /// of the semidiscrete operator.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSpec {
    pub t_final: f64,
    pub step: StepSize,
}

impl TimeSpec {
    pub fn new(t_final: f64, step: StepSize) -> Result<Self> {
        let spec = TimeSpec { t_final, step };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidTimeSpec(format!("t_final must be >= 0, got {}", self.t_final)));
        }
        let v = match self.step {
            StepSize::Fixed(v) | StepSize::Cfl(v) => v,
            StepSize::Auto => return Ok(()),
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidTimeSpec(format!("dt and cfl must be positive, got {v}")));
        }
        Ok(())
    }

    /// Nominal step size for `ctx`.
    pub fn dt(&self, ctx: &LdgContext) -> Result<f64> {
        Ok(match self.step {
            StepSize::Fixed(dt) => dt,
            StepSize::Cfl(cfl) => cfl * ctx.mesh.h_min().powi(2) / (ctx.reference.degree as f64).powi(4),
            StepSize::Auto => AUTO_STABILITY / estimate_spectral_radius(ctx, POWER_ITERATIONS)?,
        })
    }
}

/// Power-iteration estimate of the largest eigenvalue modulus of the
/// semidiscrete operator, in the discrete L2 norm. Deterministic.
pub fn estimate_spectral_radius(ctx: &LdgContext, iterations: usize) -> Result<f64> {
    let mut u = ctx.zeros();
    for (i, v) in u.values_mut().iter_mut().enumerate() {
        *v = ((i * 7919 + 13) % 1009) as f64 / 1009.0 - 0.5;
    }
    let mut rho = 0.0;
    for _ in 0..iterations.max(1) {
        let nu = ctx.l2_norm(&u);
        if nu == 0.0 {
            break;
        }
        let v = ctx.apply_operator(&u)?;
        let nv = ctx.l2_norm(&v);
        rho = nv / nu;
        if nv == 0.0 {
            break;
        }
        u = v;
        u.scale(1.0 / nv);
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidTimeSpec(format!("cannot derive a step size from spectral radius {rho}")));
    }
    Ok(rho)
}

/// Progress report after each step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub l2: f64,
}

/// Result of [`integrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub state: Vec<f64>,
    pub steps: usize,
    pub t: f64,
}

/// Step `u0` from `t0` to `t_final` with step `dt`, truncating the last step
/// to land on `t_final`. `on_step(step, t, dt, state)` runs after every step.
pub fn integrate<F, P>(mut rhs: F, u0: &[f64], t0: f64, t_final: f64, dt: f64, mut on_step: P) -> Result<Trajectory>
where
    F: FnMut(&[f64], f64) -> Result<Vec<f64>>,
    P: FnMut(usize, f64, f64, &[f64]),
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimeSpec(format!("dt must be positive, got {dt}")));
    }
    let mut u = u0.to_vec();
    let mut res = vec![0.0; u.len()];
    // step times are t0 + s dt rather than a running sum, so round-off
    // neither drifts nor leaves a sliver step
    let span = t_final - t0;
    let steps = if span > 0.0 { (span / dt - 1e-10).ceil().max(1.0) as usize } else { 0 };
    let mut t = t0;
    for s in 0..steps {
        let start = t0 + s as f64 * dt;
        let end = if s + 1 == steps { t_final } else { t0 + (s + 1) as f64 * dt };
        let h = end - start;
        lsrk_step_in_place(&mut rhs, &mut u, &mut res, start, h)?;
        t = end;
        on_step(s + 1, t, h, &u);
    }
    Ok(Trajectory { state: u, steps, t })
}

/// Time-dependent source term for [`advance`].
pub enum Source<'a> {
    None,
    /// Interpolated at the nodes at every stage.
    Pointwise(&'a (dyn Fn(f64, f64, f64) -> f64 + Sync)),
    /// `f(x, y, t) = time(t) * nodal(x, y)`, with the nodal interpolant given.
    Separable {
        nodal: &'a FieldVector,
        time: &'a (dyn Fn(f64) -> f64 + Sync),
    },
}

/// Right-hand side of the semidiscrete system with the given source.
pub fn semidiscrete_rhs(ctx: &LdgContext, u: &FieldVector, t: f64, source: &Source) -> Result<FieldVector> {
    let mut rhs = ctx.apply_operator(u)?;
    match source {
        Source::None => {}
        Source::Pointwise(f) => rhs.axpy(1.0, &ctx.interpolate(|x, y| f(x, y, t))),
        Source::Separable { nodal, time } => rhs.axpy(time(t), nodal),
    }
    Ok(rhs)
}

/// Advance `u0` from `t = 0` to `spec.t_final`. `progress` receives every
/// step with the discrete L2 norm of the state. Returns the final state and
/// the number of steps taken.
pub fn advance(
    ctx: &LdgContext,
    u0: &FieldVector,
    spec: &TimeSpec,
    source: &Source,
    mut progress: impl FnMut(&StepInfo),
) -> Result<(FieldVector, usize)> {
    spec.validate()?;
    let np = ctx.np();
    if u0.len() != ctx.len() {
        return Err(Error::DimensionMismatch {
            expected: ctx.len(),
            got: u0.len(),
        });
    }
    if spec.t_final == 0.0 {
        return Ok((u0.clone(), 0));
    }
    let dt = spec.dt(ctx)?;
    let traj = integrate(
        |v, t| {
            let u = FieldVector::from_values(v.to_vec(), np)?;
            Ok(semidiscrete_rhs(ctx, &u, t, source)?.into_values())
        },
        u0.values(),
        0.0,
        spec.t_final,
        dt,
        |step, t, dt, state| {
            // the norm is cheap next to an operator evaluation
            let u = FieldVector::from_values(state.to_vec(), np).expect("state shape");
            progress(&StepInfo {
                step,
                t,
                dt,
                l2: ctx.l2_norm(&u),
            })
        },
    )?;
    Ok((FieldVector::from_values(traj.state, np)?, traj.steps))
}
