//! Manufactured test cases, error measurement and mesh sweeps.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ldg::{Coefficients, FieldVector, LdgContext};
use crate::mesh::{Axis, Mesh, Side};
use crate::quadrature::{
    rl_integral_shifted_power, rl_integral_shifted_power_right, shift_to_left_powers, shift_to_right_powers,
};
use crate::reference::ReferenceElement;
use crate::time::{advance, Source, StepSize, TimeSpec};

/// The manufactured problems on `(-1, 1)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Example {
    /// Left-sided operators in x and y.
    One,
    /// Left- and right-sided operators in x and y.
    Two,
}

impl Example {
    pub fn number(self) -> u8 {
        match self {
            Example::One => 1,
            Example::Two => 2,
        }
    }

    pub fn default_coefficients(self) -> Coefficients {
        match self {
            Example::One => Coefficients::one_sided(1.0, 1.0),
            Example::Two => Coefficients::two_sided(1.0, 1.0, 1.0, 1.0),
        }
    }
}

impl TryFrom<u8> for Example {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Example::One),
            2 => Ok(Example::Two),
            _ => Err(format!("unknown example {v} (expected 1 or 2)")),
        }
    }
}

impl From<Example> for u8 {
    fn from(e: Example) -> u8 {
        e.number()
    }
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// `e^{-t} (x^2-1)^3 (y^2-1)^3`, shared by both examples.
pub fn exact_solution(x: f64, y: f64, t: f64) -> f64 {
    (-t).exp() * (x * x - 1.0).powi(3) * (y * y - 1.0).powi(3)
}

/// Second derivative of `(x^2-1)^3`: `30x^4 - 36x^2 + 6`.
const SECOND_DERIVATIVE: [f64; 5] = [6.0, 0.0, -36.0, 0.0, 30.0];

/// One-dimensional fractional integral of `30x^4 - 36x^2 + 6` on `(-1, 1)`,
/// from the left or the right, with coefficients in shifted powers.
#[derive(Debug, Clone)]
struct ShiftedIntegral {
    order: f64,
    side: Side,
    coeffs: Vec<f64>,
}

impl ShiftedIntegral {
    fn new(order: f64, side: Side) -> Self {
        let coeffs = match side {
            Side::Left => shift_to_left_powers(&SECOND_DERIVATIVE, -1.0),
            Side::Right => shift_to_right_powers(&SECOND_DERIVATIVE, 1.0),
        };
        ShiftedIntegral { order, side, coeffs }
    }

    fn eval(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(p, &c)| {
                let p = p as u32;
                c * match self.side {
                    Side::Left => rl_integral_shifted_power(p, self.order, -1.0, x),
                    Side::Right => rl_integral_shifted_power_right(p, self.order, 1.0, x),
                }
            })
            .sum()
    }
}

/// The forcing of a manufactured case with its shifted-power tables
/// precomputed. `f(x, y, t) = e^{-t} f(x, y, 0)`.
#[derive(Debug, Clone)]
pub struct ManufacturedForcing {
    coefficients: Coefficients,
    x_left: ShiftedIntegral,
    x_right: ShiftedIntegral,
    y_left: ShiftedIntegral,
    y_right: ShiftedIntegral,
}

impl ManufacturedForcing {
    pub fn new(alpha: f64, beta: f64, coefficients: Coefficients) -> Self {
        ManufacturedForcing {
            coefficients,
            x_left: ShiftedIntegral::new(2.0 - alpha, Side::Left),
            x_right: ShiftedIntegral::new(2.0 - alpha, Side::Right),
            y_left: ShiftedIntegral::new(2.0 - beta, Side::Left),
            y_right: ShiftedIntegral::new(2.0 - beta, Side::Right),
        }
    }

    pub fn for_case(cfg: &CaseConfig) -> Self {
        Self::new(cfg.alpha, cfg.beta, cfg.coefficients)
    }

    /// Time-independent factor `f(x, y, 0)`.
    pub fn spatial(&self, x: f64, y: f64) -> f64 {
        let c = &self.coefficients;
        let ux = (x * x - 1.0).powi(3);
        let uy = (y * y - 1.0).powi(3);
        let mut gx = 0.0;
        if c.d_plus != 0.0 {
            gx += c.d_plus * self.x_left.eval(x);
        }
        if c.d_minus != 0.0 {
            gx += c.d_minus * self.x_right.eval(x);
        }
        let mut gy = 0.0;
        if c.e_plus != 0.0 {
            gy += c.e_plus * self.y_left.eval(y);
        }
        if c.e_minus != 0.0 {
            gy += c.e_minus * self.y_right.eval(y);
        }
        -(ux * uy + uy * gx + ux * gy)
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        (-t).exp() * self.spatial(x, y)
    }
}

/// Forcing of `cfg` at `(x, y, t)`. Builds the coefficient tables on every
/// call; use [`ManufacturedForcing`] in loops.
pub fn forcing(cfg: &CaseConfig, x: f64, y: f64, t: f64) -> f64 {
    ManufacturedForcing::for_case(cfg).eval(x, y, t)
}

/// `sqrt(sum_k J_k sum_q w_q (u_h(x_q) - exact(x_q, t))^2)` with the volume
/// cubature of `reference`.
pub fn l2_error(
    mesh: &Mesh,
    reference: &ReferenceElement,
    u_h: &FieldVector,
    t: f64,
    exact: impl Fn(f64, f64, f64) -> f64,
) -> Result<f64> {
    let np = reference.np;
    if u_h.len() != mesh.num_elements() * np {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_elements() * np,
            got: u_h.len(),
        });
    }
    let cub = &reference.cubature;
    let phi = &reference.cubature_basis;
    let mut sum = 0.0;
    for k in 0..mesh.num_elements() {
        let uk = u_h.element(k);
        let mut local = 0.0;
        for (q, (&pt, &w)) in cub.points.iter().zip(&cub.weights).enumerate() {
            let uh: f64 = (0..np).map(|i| phi[(i, q)] * uk[i]).sum();
            let [x, y] = mesh.to_physical(k, pt);
            let e = uh - exact(x, y, t);
            local += w * e * e;
        }
        sum += mesh.geometry[k].jacobian * local;
    }
    Ok(sum.sqrt())
}

/// One manufactured-solution run.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseConfig {
    pub example: Example,
    pub alpha: f64,
    pub beta: f64,
    pub coefficients: Coefficients,
    pub degree: usize,
    /// Mesh prefixes (`<prefix>.node`, `<prefix>.ele`).
    pub meshes: Vec<PathBuf>,
    pub t_final: f64,
    pub step: StepSize,
    pub verbose: bool,
}

impl CaseConfig {
    pub fn new(example: Example, degree: usize, alpha: f64, beta: f64) -> Self {
        CaseConfig {
            example,
            alpha,
            beta,
            coefficients: example.default_coefficients(),
            degree,
            meshes: Vec::new(),
            t_final: 1.0,
            step: StepSize::Auto,
            verbose: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 1.0 && v <= 2.0) {
                return Err(Error::InvalidConfig(format!("{name} = {v} outside (1, 2]")));
            }
        }
        let c = self.coefficients;
        if [c.d_plus, c.d_minus, c.e_plus, c.e_minus]
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::InvalidConfig(format!(
                "diffusion coefficients must be finite and non-negative, got {c:?}"
            )));
        }
        if self.example == Example::One && (c.d_minus != 0.0 || c.e_minus != 0.0) {
            return Err(Error::InvalidConfig(
                "example 1 is left-sided; right-sided coefficients need example 2".into(),
            ));
        }
        if self.degree == 0 || self.degree > crate::reference::MAX_DEGREE {
            return Err(Error::UnsupportedDegree(self.degree));
        }
        TimeSpec::new(self.t_final, self.step)?;
        Ok(())
    }

    pub fn time_spec(&self) -> Result<TimeSpec> {
        TimeSpec::new(self.t_final, self.step)
    }
}

/// Outcome of one solve. `order` is filled in by [`run_convergence`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub example: Example,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub h_max: f64,
    pub l2_error: f64,
    pub order: Option<f64>,
    pub seconds: f64,
}

/// A solved case, kept for inspection.
#[derive(Debug, Clone)]
pub struct Solution {
    pub context: LdgContext,
    pub state: FieldVector,
    pub steps: usize,
    pub l2_error: f64,
}

/// Assemble and solve `cfg` on `mesh`.
pub fn solve(cfg: &CaseConfig, mesh: Arc<Mesh>) -> Result<Solution> {
    cfg.validate()?;
    let reference = Arc::new(ReferenceElement::new(cfg.degree)?);
    let context = LdgContext::new(mesh, Arc::clone(&reference), cfg.alpha, cfg.beta, cfg.coefficients)?;
    solve_with(cfg, context)
}

/// Solve `cfg` with an already built context.
pub fn solve_with(cfg: &CaseConfig, context: LdgContext) -> Result<Solution> {
    let spec = cfg.time_spec()?;
    let forcing = ManufacturedForcing::for_case(cfg);
    let nodal = context.interpolate(|x, y| forcing.spatial(x, y));
    let decay = |t: f64| (-t).exp();
    let source = Source::Separable {
        nodal: &nodal,
        time: &decay,
    };
    let u0 = context.interpolate(|x, y| exact_solution(x, y, 0.0));
    let verbose = cfg.verbose;
    let (state, steps) = advance(&context, &u0, &spec, &source, |info| {
        if verbose {
            eprintln!("step {} t={} l2={}", info.step, info.t, info.l2);
        }
    })?;
    let err = l2_error(&context.mesh, &context.reference, &state, cfg.t_final, exact_solution)?;
    Ok(Solution {
        context,
        state,
        steps,
        l2_error: err,
    })
}

/// Solve `cfg` on one mesh file and time it.
pub fn run_case(cfg: &CaseConfig, mesh_prefix: &Path) -> Result<RunResult> {
    let mesh = Arc::new(Mesh::load(mesh_prefix)?);
    run_on_mesh(cfg, mesh)
}

fn run_on_mesh(cfg: &CaseConfig, mesh: Arc<Mesh>) -> Result<RunResult> {
    let start = Instant::now();
    let k = mesh.num_elements();
    let h_max = mesh.h_max();
    let sol = solve(cfg, mesh)?;
    Ok(RunResult {
        example: cfg.example,
        k,
        n: cfg.degree,
        alpha: cfg.alpha,
        beta: cfg.beta,
        h_max,
        l2_error: sol.l2_error,
        order: None,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// `log(e0/e1) / log(h0/h1)`; `None` when the mesh size did not change.
pub fn observed_order(h0: f64, e0: f64, h1: f64, e1: f64) -> Option<f64> {
    let ratio = (h0 / h1).ln();
    (ratio.abs() > 1e-12 && e0 > 0.0 && e1 > 0.0).then(|| (e0 / e1).ln() / ratio)
}

/// Fill in observed orders between consecutive entries.
pub fn fill_orders(results: &mut [RunResult]) {
    for i in 1..results.len() {
        let (a, b) = (&results[i - 1], &results[i]);
        results[i].order = observed_order(a.h_max, a.l2_error, b.h_max, b.l2_error);
    }
}

/// Solve `cfg` on each of its meshes in order. Mesh sizes must not increase.
pub fn run_convergence(cfg: &CaseConfig) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    if cfg.meshes.is_empty() {
        return Err(Error::InvalidConfig("no meshes given".into()));
    }
    let meshes = cfg
        .meshes
        .iter()
        .map(|p| Mesh::load(p).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    for w in meshes.windows(2) {
        let (prev, next) = (w[0].h_max(), w[1].h_max());
        if next > prev * (1.0 + 1e-12) {
            return Err(Error::NonMonotoneSweep { prev, next });
        }
    }
    let mut results = meshes
        .into_iter()
        .map(|m| run_on_mesh(cfg, m))
        .collect::<Result<Vec<_>>>()?;
    fill_orders(&mut results);
    Ok(results)
}

pub fn write_csv(results: &[RunResult], w: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    for r in results {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv(r: impl std::io::Read) -> Result<Vec<RunResult>> {
    let mut reader = csv::Reader::from_reader(r);
    let rows = reader.deserialize().collect::<std::result::Result<Vec<RunResult>, _>>()?;
    Ok(rows)
}

pub fn write_json(results: &[RunResult], w: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(w, results)?;
    Ok(())
}

/// Write every assembled fractional matrix of `ctx` in coordinate form,
/// each preceded by a `# <side> <axis> alpha=<order>` header.
pub fn write_matrix_dump(ctx: &LdgContext, mut w: impl Write) -> Result<()> {
    for axis in [Axis::X, Axis::Y] {
        for side in [Side::Left, Side::Right] {
            if let Some(m) = ctx.matrices.get(axis, side) {
                let side_name = match side {
                    Side::Left => "left",
                    Side::Right => "right",
                };
                let axis_name = match axis {
                    Axis::X => "x",
                    Axis::Y => "y",
                };
                writeln!(w, "# {side_name} {axis_name} alpha={}", m.alpha)?;
                m.write_coo(&mut w)?;
            }
        }
    }
    Ok(())
}
