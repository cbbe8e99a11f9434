//! Pseudospectral simulation on the periodic box `[0, 2 pi)^n`, `n = 1, 2`.
//!
//! Fields are advanced by integrating-factor RK4: each Fourier mode carries
//! its exact linear propagator and the nonlinearity is evaluated pointwise on
//! the physical grid (optionally on a 3/2-padded grid).

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fit::{fit_power_law, trailing_decade, RateFit};
use crate::io::write_json;
use crate::ode::{prop23_bounds, BoundReport, CoupledOdeSpec};
use crate::system::{check_odi, FunctionalSeries, OdiForm, OdiReport, SystemParams};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Fields in physical space on an `modes^n` grid with nodes `2 pi j / modes`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub n: usize,
    pub modes: usize,
    pub t: f64,
    /// Row-major; for `n = 2` the index is `j0 * modes + j1`.
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
}

impl FieldState {
    pub fn new(n: usize, modes: usize, t: f64, u: Vec<Complex64>, v: Vec<Complex64>) -> Result<Self> {
        check_grid(n, modes)?;
        let len = modes.pow(n as u32);
        if u.len() != len || v.len() != len {
            return Err(invalid(format!("field arrays must hold {len} points")));
        }
        if u.iter().chain(&v).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(invalid("field entries must be finite"));
        }
        Ok(Self { n, modes, t, u, v })
    }

    pub fn from_fn(n: usize, modes: usize, f: impl Fn(&[f64]) -> (Complex64, Complex64)) -> Result<Self> {
        check_grid(n, modes)?;
        let (u, v) = (0..modes.pow(n as u32)).map(|i| f(&node(n, modes, i))).unzip();
        Self::new(n, modes, 0.0, u, v)
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Coordinates of grid point `i`.
    pub fn node(&self, i: usize) -> Vec<f64> {
        node(self.n, self.modes, i)
    }

    pub fn cell_volume(&self) -> f64 {
        (2.0 * PI / self.modes as f64).powi(self.n as i32)
    }

    pub fn sup_norm(&self) -> f64 {
        self.u.iter().chain(&self.v).map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Writes `<stem>.bin` (little-endian f64, `u` then `v`, interleaved re/im)
    /// and a `<stem>.json` sidecar describing the layout.
    pub fn write_snapshot(&self, dir: &Path, stem: &str) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.len() * 32);
        for z in self.u.iter().chain(&self.v) {
            bytes.extend_from_slice(&z.re.to_le_bytes());
            bytes.extend_from_slice(&z.im.to_le_bytes());
        }
        std::fs::File::create(dir.join(format!("{stem}.bin")))?.write_all(&bytes)?;
        let sidecar = serde_json::json!({
            "t": self.t,
            "shape": vec![self.modes; self.n],
            "layout": "row-major",
            "dtype": "f64-le",
            "fields": ["u", "v"],
            "complex": "interleaved re, im",
            "domain": vec![[0.0, 2.0 * PI]; self.n],
        });
        write_json(&dir.join(format!("{stem}.json")), &sidecar)
    }
}

fn check_grid(n: usize, modes: usize) -> Result<()> {
    if !(n == 1 || n == 2) {
        return Err(invalid(format!("torus runs support n = 1, 2, got {n}")));
    }
    if modes < 4 || modes % 2 != 0 {
        return Err(invalid("modes per axis must be even and at least 4"));
    }
    Ok(())
}

fn node(n: usize, modes: usize, i: usize) -> Vec<f64> {
    let h = 2.0 * PI / modes as f64;
    if n == 1 {
        vec![h * i as f64]
    } else {
        vec![h * (i / modes) as f64, h * (i % modes) as f64]
    }
}

/// Signed wavenumber of FFT index `i` on `m` points.
fn wavenumber(i: usize, m: usize) -> i64 {
    if i < m / 2 {
        i as i64
    } else {
        i as i64 - m as i64
    }
}

fn index_of(k: i64, m: usize) -> usize {
    k.rem_euclid(m as i64) as usize
}

/// FFT plans for one grid size.
struct Transform {
    n: usize,
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Transform {
    fn new(planner: &mut FftPlanner<f64>, n: usize, m: usize) -> Self {
        Self { n, m, forward: planner.plan_fft_forward(m), inverse: planner.plan_fft_inverse(m) }
    }

    fn apply(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        plan.process(data);
        if self.n == 2 {
            transpose(data, self.m);
            plan.process(data);
            transpose(data, self.m);
        }
    }

    /// Physical values to normalised coefficients `c_k` with `f(x) = sum c_k e^{ikx}`.
    fn to_coeffs(&self, data: &mut [Complex64]) {
        self.apply(&self.forward, data);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    fn to_physical(&self, data: &mut [Complex64]) {
        self.apply(&self.inverse, data);
    }
}

fn transpose(data: &mut [Complex64], m: usize) {
    for i in 0..m {
        for j in i + 1..m {
            data.swap(i * m + j, j * m + i);
        }
    }
}

/// Reusable integrator for a fixed grid and parameter set.
pub struct TorusSolver {
    params: SystemParams,
    n: usize,
    modes: usize,
    grid: Transform,
    padded: Option<Transform>,
    ksq: Vec<f64>,
}

impl TorusSolver {
    pub fn new(params: SystemParams, modes: usize, padded: bool) -> Result<Self> {
        params.validate_for_simulation()?;
        let n = params.n;
        check_grid(n, modes)?;
        let mut planner = FftPlanner::new();
        let grid = Transform::new(&mut planner, n, modes);
        let padded = padded.then(|| Transform::new(&mut planner, n, modes * 3 / 2));
        let ksq = (0..modes.pow(n as u32))
            .map(|i| {
                let ks = if n == 1 { vec![i] } else { vec![i / modes, i % modes] };
                ks.iter().map(|&k| (wavenumber(k, modes) as f64).powi(2)).sum()
            })
            .collect();
        Ok(Self { params, n, modes, grid, padded, ksq })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    fn check_state(&self, state: &FieldState) -> Result<()> {
        if state.n != self.n || state.modes != self.modes {
            return Err(invalid("state grid does not match the solver"));
        }
        Ok(())
    }

    /// Pointwise nonlinearity `(b1 |v|^p, b2 |u|^q)`.
    fn pointwise(&self, u: &[Complex64], v: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let SystemParams { p, q, beta1, beta2, .. } = self.params;
        (
            v.iter().map(|z| beta1 * z.norm().powf(p)).collect(),
            u.iter().map(|z| beta2 * z.norm().powf(q)).collect(),
        )
    }

    /// Nonlinearity in coefficient space.
    fn nonlinear(&self, cu: &[Complex64], cv: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        match &self.padded {
            None => {
                let (mut u, mut v) = (cu.to_vec(), cv.to_vec());
                self.grid.to_physical(&mut u);
                self.grid.to_physical(&mut v);
                let (mut a, mut b) = self.pointwise(&u, &v);
                self.grid.to_coeffs(&mut a);
                self.grid.to_coeffs(&mut b);
                (a, b)
            }
            Some(pad) => {
                let (mut u, mut v) = (self.pad(cu, pad.m), self.pad(cv, pad.m));
                pad.to_physical(&mut u);
                pad.to_physical(&mut v);
                let (mut a, mut b) = self.pointwise(&u, &v);
                pad.to_coeffs(&mut a);
                pad.to_coeffs(&mut b);
                (self.truncate(&a, pad.m), self.truncate(&b, pad.m))
            }
        }
    }

    fn map_index(&self, i: usize, m: usize) -> usize {
        let n = self.modes;
        if self.n == 1 {
            index_of(wavenumber(i, n), m)
        } else {
            index_of(wavenumber(i / n, n), m) * m + index_of(wavenumber(i % n, n), m)
        }
    }

    fn pad(&self, c: &[Complex64], m: usize) -> Vec<Complex64> {
        let mut out = vec![ZERO; m.pow(self.n as u32)];
        for (i, z) in c.iter().enumerate() {
            out[self.map_index(i, m)] = *z;
        }
        out
    }

    fn truncate(&self, c: &[Complex64], m: usize) -> Vec<Complex64> {
        (0..self.modes.pow(self.n as u32)).map(|i| c[self.map_index(i, m)]).collect()
    }

    /// One integrating-factor RK4 step of size `dt`.
    pub fn step(&self, state: &FieldState, dt: f64) -> Result<FieldState> {
        self.check_state(state)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("time step must be positive"));
        }
        let (mut cu, mut cv) = (state.u.clone(), state.v.clone());
        self.grid.to_coeffs(&mut cu);
        self.grid.to_coeffs(&mut cv);
        let half = |alpha: Complex64| -> Vec<Complex64> {
            self.ksq.iter().map(|k2| (alpha * k2 * (0.5 * dt)).exp()).collect()
        };
        let (eu, ev) = (half(self.params.alpha1), half(self.params.alpha2));

        // RK4 stages; E is the half-step propagator, E^2 the full step
        let stage = |c: &[Complex64], e: &[Complex64], k: &[Complex64], w: f64| -> Vec<Complex64> {
            c.iter().zip(e).zip(k).map(|((c, e), k)| e * (c + w * k)).collect()
        };
        let (a_u, a_v) = self.nonlinear(&cu, &cv);
        let (u1, v1) = (stage(&cu, &eu, &a_u, 0.5 * dt), stage(&cv, &ev, &a_v, 0.5 * dt));
        let (b_u, b_v) = self.nonlinear(&u1, &v1);
        let mid = |c: &[Complex64], e: &[Complex64], k: &[Complex64]| -> Vec<Complex64> {
            c.iter().zip(e).zip(k).map(|((c, e), k)| e * c + 0.5 * dt * k).collect()
        };
        let (u2, v2) = (mid(&cu, &eu, &b_u), mid(&cv, &ev, &b_v));
        let (c_u, c_v) = self.nonlinear(&u2, &v2);
        let full = |c: &[Complex64], e: &[Complex64], k: &[Complex64]| -> Vec<Complex64> {
            c.iter().zip(e).zip(k).map(|((c, e), k)| e * (e * c + dt * k)).collect()
        };
        let (u3, v3) = (full(&cu, &eu, &c_u), full(&cv, &ev, &c_v));
        let (d_u, d_v) = self.nonlinear(&u3, &v3);
        let combine = |c: &[Complex64], e: &[Complex64], a: &[Complex64], b: &[Complex64], cc: &[Complex64], d: &[Complex64]| {
            (0..c.len())
                .map(|i| {
                    let e2 = e[i] * e[i];
                    e2 * c[i] + dt / 6.0 * (e2 * a[i] + 2.0 * e[i] * (b[i] + cc[i]) + d[i])
                })
                .collect::<Vec<_>>()
        };
        let mut nu = combine(&cu, &eu, &a_u, &b_u, &c_u, &d_u);
        let mut nv = combine(&cv, &ev, &a_v, &b_v, &c_v, &d_v);
        self.grid.to_physical(&mut nu);
        self.grid.to_physical(&mut nv);
        let t = state.t + dt;
        if nu.iter().chain(&nv).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Overflow { t: state.t });
        }
        Ok(FieldState { n: self.n, modes: self.modes, t, u: nu, v: nv })
    }

    /// Physical values of `-a Laplace f` for a field given in physical space.
    fn linear_term(&self, field: &[Complex64], alpha: Complex64) -> Vec<Complex64> {
        let mut c = field.to_vec();
        self.grid.to_coeffs(&mut c);
        c.iter_mut().zip(&self.ksq).for_each(|(z, k2)| *z *= alpha * k2);
        self.grid.to_physical(&mut c);
        c
    }

    /// `(U, V, dU/dt, dV/dt)` with derivatives from quadrature of the full right-hand side.
    pub fn functionals_with_rates(&self, state: &FieldState) -> (f64, f64, f64, f64) {
        let (u, v) = functionals(state, &self.params);
        let p = &self.params;
        let (nu, nv) = self.pointwise(&state.u, &state.v);
        let lu = self.linear_term(&state.u, p.alpha1);
        let lv = self.linear_term(&state.v, p.alpha2);
        let h = state.cell_volume();
        let integral = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| x + y).sum::<Complex64>() * h;
        let du = (p.beta1.conj() * integral(&lu, &nu)).re;
        let dv = (p.beta2.conj() * integral(&lv, &nv)).re;
        (u, v, du, dv)
    }

    /// `max(|int -a1 Laplace u|, |int -a2 Laplace v|) / max(1, int |u| + |v|)`;
    /// the diffusion term leaves the mean untouched so this should sit at rounding level.
    pub fn zero_mode_laplacian(&self, state: &FieldState) -> f64 {
        let h = state.cell_volume();
        let lu: Complex64 = self.linear_term(&state.u, self.params.alpha1).iter().sum::<Complex64>() * h;
        let lv: Complex64 = self.linear_term(&state.v, self.params.alpha2).iter().sum::<Complex64>() * h;
        let mass: f64 = state.u.iter().chain(&state.v).map(|z| z.norm()).sum::<f64>() * h;
        lu.norm().max(lv.norm()) / mass.max(1.0)
    }

    /// Largest nonlinear growth rate `max(|N_u|_inf / |u|_inf, |N_v|_inf / |v|_inf)`.
    pub fn growth_rate(&self, state: &FieldState) -> f64 {
        let sup = |f: &[Complex64]| f.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let (nu, nv) = self.pointwise(&state.u, &state.v);
        let ratio = |num: f64, den: f64| if num == 0.0 { 0.0 } else { num / den.max(f64::MIN_POSITIVE) };
        ratio(sup(&nu), sup(&state.u)).max(ratio(sup(&nv), sup(&state.v)))
    }
}

/// One step with a freshly planned solver on an unpadded grid.
pub fn torus_step(state: &FieldState, params: &SystemParams, dt: f64) -> Result<FieldState> {
    if state.n != params.n {
        return Err(invalid("state dimension does not match params"));
    }
    TorusSolver::new(*params, state.modes, false)?.step(state, dt)
}

/// `U = Re(conj(b1) (2 pi)^n mean(u))` and the analogue for `V`.
pub fn functionals(state: &FieldState, params: &SystemParams) -> (f64, f64) {
    let vol = (2.0 * PI).powi(state.n as i32);
    let mean = |f: &[Complex64]| f.iter().sum::<Complex64>() / f.len() as f64;
    (
        (params.beta1.conj() * mean(&state.u) * vol).re,
        (params.beta2.conj() * mean(&state.v) * vol).re,
    )
}

/// `(C_p, C_q)` for the reduction to the undamped coupled ODE.
pub fn ode_constants(params: &SystemParams) -> (f64, f64) {
    let SystemParams { n, p, q, beta1, beta2, .. } = *params;
    let vol = 2.0 * PI;
    let (b1, b2) = (beta1.norm(), beta2.norm());
    let c_p = b1 * b1 * b2.powf(-p) * vol.powf(-(n as f64) * (p - 1.0)) / (p + 1.0);
    let c_q = b2 * b2 * b1.powf(-q) * vol.powf(-(n as f64) * (q - 1.0)) / (q + 1.0);
    (c_p, c_q)
}

/// Checks `dU/dt >= (p+1) C_p V^p` and `dV/dt >= (q+1) C_q U^q` at every node
/// with `U, V >= 0`, with tolerance `1e-8 (1 + |dU/dt|)`.
pub fn check_torus_odi(series: &FunctionalSeries, params: &SystemParams) -> OdiReport {
    let (c_p, c_q) = ode_constants(params);
    let form = OdiForm {
        damp_u: 0.0,
        damp_v: 0.0,
        coef_u: (params.p + 1.0) * c_p,
        exp_u: params.p,
        coef_v: (params.q + 1.0) * c_q,
        exp_v: params.q,
        rel_tol: 1e-8,
        outside_verified_regime: params.outside_verified_regime(),
    };
    check_odi(series, form)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorusBounds {
    pub c_p: f64,
    pub c_q: f64,
    /// Lifespan bound and lower-bound curve of the reduced ODE; the
    /// hypothesis is `C_q U0^(q+1) >= C_p V0^(p+1)` with `U0, V0 > 0`.
    pub report: BoundReport,
    /// The ordering with the `2 pi` powers attached the other way round.
    /// Coincides with the hypothesis above when `p = q`.
    pub swapped_ordering: bool,
}

pub fn torus_bounds(params: &SystemParams, u0: f64, v0: f64) -> Result<TorusBounds> {
    params.validate()?;
    if !(u0.is_finite() && v0.is_finite()) {
        return Err(invalid("initial functionals must be finite"));
    }
    let (c_p, c_q) = ode_constants(params);
    let SystemParams { n, p, q, beta1, beta2, .. } = *params;
    let vol = 2.0 * PI;
    let nf = n as f64;
    let swapped_ordering = u0 > 0.0
        && v0 > 0.0
        && beta2.norm().powf(2.0 + p) / (q + 1.0) * vol.powf(-nf * (p - 1.0)) * u0.powf(q + 1.0)
            >= beta1.norm().powf(2.0 + q) / (p + 1.0) * vol.powf(-nf * (q - 1.0)) * v0.powf(p + 1.0);
    let report = if u0 > 0.0 && v0 > 0.0 {
        let spec = CoupledOdeSpec { p, q, c_p, c_q, omega: 0.0, f0: u0, g0: v0 };
        prop23_bounds(&spec)?
    } else {
        BoundReport {
            hypothesis_satisfied: false,
            lifespan_bound: None,
            lower_bound: None,
            outside_verified_regime: p < 1.0 || q < 1.0,
        }
    };
    Ok(TorusBounds { c_p, c_q, report, swapped_ordering })
}

/// `mean + sum amp cos(k . x)` for one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub mean: Complex64,
    #[serde(default)]
    pub modes: Vec<CosineMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineMode {
    pub k: Vec<i64>,
    pub amp: Complex64,
}

impl FieldSpec {
    pub fn constant(c: f64) -> Self {
        Self { mean: Complex64::new(c, 0.0), modes: Vec::new() }
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.mean
            + self
                .modes
                .iter()
                .map(|m| m.amp * m.k.iter().zip(x).map(|(k, x)| *k as f64 * x).sum::<f64>().cos())
                .sum::<Complex64>()
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.modes.iter().any(|m| m.k.len() != n) {
            return Err(invalid("cosine mode wavevector length must equal the dimension"));
        }
        Ok(())
    }
}

fn default_cfl() -> f64 {
    0.01
}
fn default_dt_max() -> f64 {
    1e-2
}
fn default_threshold() -> f64 {
    1e6
}
fn default_max_steps() -> usize {
    2_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusRunConfig {
    pub params: SystemParams,
    /// Modes per axis; 256 for `n = 1` and 128 for `n = 2` when absent.
    #[serde(default)]
    pub modes: Option<usize>,
    pub u0: FieldSpec,
    pub v0: FieldSpec,
    #[serde(default)]
    pub padded: bool,
    /// `dt = cfl / growth_rate`, capped by `dt_max`.
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    pub t_max: f64,
    /// The run stops once `max(|u|, |v|)` reaches this.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

impl TorusRunConfig {
    pub fn modes(&self) -> usize {
        self.modes.unwrap_or(if self.params.n == 1 { 256 } else { 128 })
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate_for_simulation()?;
        check_grid(self.params.n, self.modes())?;
        self.u0.validate(self.params.n)?;
        self.v0.validate(self.params.n)?;
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return Err(invalid("cfl must lie in (0, 0.5]"));
        }
        if !(self.dt_max > 0.0 && self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(invalid("dt_max and t_max must be positive"));
        }
        if !(self.threshold > 0.0) || self.max_steps == 0 {
            return Err(invalid("threshold and max_steps must be positive"));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> Result<FieldState> {
        FieldState::from_fn(self.params.n, self.modes(), |x| (self.u0.eval(x), self.v0.eval(x)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    ThresholdReached,
    TimeLimit,
    StepLimit,
    /// A step produced non-finite values; the final state is the last finite one.
    Overflow,
}

#[derive(Debug, Clone)]
pub struct TorusRun {
    pub series: FunctionalSeries,
    pub final_state: FieldState,
    pub status: RunStatus,
    pub steps: usize,
    pub max_zero_mode_laplacian: f64,
}

impl TorusRun {
    /// `t + gamma U / U'` at the last node, with `gamma = (p+1)/(pq-1)`.
    pub fn blowup_estimate(&self, params: &SystemParams) -> Option<f64> {
        if self.status != RunStatus::ThresholdReached {
            return None;
        }
        let i = self.series.len().checked_sub(1)?;
        let (u, du) = (self.series.u[i], self.series.du[i]);
        let gamma = params.rate_exponents().0;
        (u > 0.0 && du > 0.0).then(|| self.series.times[i] + gamma * u / du)
    }
}

pub fn run_torus(config: &TorusRunConfig) -> Result<TorusRun> {
    config.validate()?;
    let solver = TorusSolver::new(config.params, config.modes(), config.padded)?;
    let mut state = config.initial_state()?;
    let mut series = FunctionalSeries::default();
    let mut max_zero = 0.0f64;
    let record = |s: &FieldState, series: &mut FunctionalSeries, max_zero: &mut f64| {
        let (u, v, du, dv) = solver.functionals_with_rates(s);
        series.push(s.t, u, v, du, dv);
        *max_zero = max_zero.max(solver.zero_mode_laplacian(s));
    };
    record(&state, &mut series, &mut max_zero);
    let mut steps = 0;
    let status = loop {
        if state.sup_norm() >= config.threshold {
            break RunStatus::ThresholdReached;
        }
        if state.t >= config.t_max {
            break RunStatus::TimeLimit;
        }
        if steps >= config.max_steps {
            break RunStatus::StepLimit;
        }
        let rate = solver.growth_rate(&state);
        let dt = (config.cfl / rate).min(config.dt_max).min(config.t_max - state.t);
        match solver.step(&state, dt) {
            Ok(next) => state = next,
            Err(Error::Overflow { .. }) => break RunStatus::Overflow,
            Err(e) => return Err(e),
        }
        steps += 1;
        record(&state, &mut series, &mut max_zero);
    };
    Ok(TorusRun { series, final_state: state, status, steps, max_zero_mode_laplacian: max_zero })
}

#[derive(Debug, Clone)]
pub struct TorusReport {
    pub bounds: TorusBounds,
    pub odi: OdiReport,
    pub fit_u: Option<RateFit>,
    pub fit_v: Option<RateFit>,
    pub blowup_estimate: Option<f64>,
    pub status: RunStatus,
    pub steps: usize,
    pub max_zero_mode_laplacian: f64,
}

impl TorusReport {
    pub fn new(run: &TorusRun, params: &SystemParams) -> Result<Self> {
        let s = &run.series;
        let bounds = torus_bounds(params, s.u[0], s.v[0])?;
        let fit = |ys: &[f64]| {
            let last = *ys.last()?;
            let window = trailing_decade(&s.times, ys, last)?;
            fit_power_law(&s.times, ys, window).ok()
        };
        Ok(Self {
            bounds,
            odi: check_torus_odi(s, params),
            fit_u: fit(&s.u),
            fit_v: fit(&s.v),
            blowup_estimate: run.blowup_estimate(params),
            status: run.status,
            steps: run.steps,
            max_zero_mode_laplacian: run.max_zero_mode_laplacian,
        })
    }

    pub fn to_json(&self, params: &SystemParams) -> serde_json::Value {
        let (gu, gv) = params.rate_exponents();
        serde_json::json!({
            "status": self.status,
            "steps": self.steps,
            "blowup_time_estimate": self.blowup_estimate,
            "max_zero_mode_laplacian": self.max_zero_mode_laplacian,
            "bounds": {
                "c_p": self.bounds.c_p,
                "c_q": self.bounds.c_q,
                "swapped_ordering": self.bounds.swapped_ordering,
                "ode": self.bounds.report.to_json(50),
            },
            "odi": self.odi,
            "fit_u": self.fit_u,
            "fit_v": self.fit_v,
            "target_exponents": { "u": gu, "v": gv },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_mode_heat_decay() {
        let mut params = SystemParams::heat(1, 2.0, 2.0);
        params.beta1 = c(1e-14, 0.0);
        params.beta2 = c(1e-14, 0.0);
        let solver = TorusSolver::new(params, 16, false).unwrap();
        let mut s = FieldState::from_fn(1, 16, |x| (Complex64::from_polar(1.0, x[0]), ZERO)).unwrap();
        for _ in 0..50 {
            s = solver.step(&s, 0.02).unwrap();
        }
        let mut coeffs = s.u.clone();
        solver.grid.to_coeffs(&mut coeffs);
        assert!((coeffs[1].norm() - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn zero_data_stays_zero() {
        let params = SystemParams::heat(2, 3.0, 2.0);
        let s = FieldState::from_fn(2, 8, |_| (ZERO, ZERO)).unwrap();
        let next = torus_step(&s, &params, 0.1).unwrap();
        assert!(next.u.iter().chain(&next.v).all(|z| *z == ZERO));
    }

    #[test]
    fn functionals_examples() {
        let mut params = SystemParams::heat(1, 2.0, 2.0);
        params.beta1 = c(0.0, 1.0);
        let s = FieldState::from_fn(1, 8, |_| (c(0.5, 0.3), c(1.0, 0.0))).unwrap();
        let (u, _) = functionals(&s, &params);
        assert!((u - (c(0.0, -1.0) * c(0.5, 0.3)).re * 2.0 * PI).abs() < 1e-14);
        let s = FieldState::from_fn(1, 8, |x| (Complex64::from_polar(1.0, x[0]), ZERO)).unwrap();
        assert!(functionals(&s, &params).0.abs() < 1e-15);
    }

    #[test]
    fn padding_preserves_band_limited_products() {
        // |v|^2 of a single complex mode is constant, so padding changes nothing
        let params = SystemParams::heat(1, 2.0, 2.0);
        let plain = TorusSolver::new(params, 16, false).unwrap();
        let padded = TorusSolver::new(params, 16, true).unwrap();
        let s = FieldState::from_fn(1, 16, |x| (c(1.0, 0.0), Complex64::from_polar(0.5, 2.0 * x[0]))).unwrap();
        let a = plain.step(&s, 0.01).unwrap();
        let b = padded.step(&s, 0.01).unwrap();
        for (x, y) in a.u.iter().zip(&b.u) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn constant_bound_example() {
        let params = SystemParams::heat(1, 2.0, 2.0);
        let b = torus_bounds(&params, 2.0 * PI, 2.0 * PI).unwrap();
        assert!(b.report.hypothesis_satisfied && b.swapped_ordering);
        assert!((b.c_p - 1.0 / (6.0 * PI)).abs() < 1e-16);
        assert!((b.report.lifespan_bound.unwrap() - 2f64.powf(4.0 / 3.0)).abs() < 1e-12);
        let neg = torus_bounds(&params, -1.0, 1.0).unwrap();
        assert!(!neg.report.hypothesis_satisfied);
    }

    #[test]
    fn rejects_invalid_configs() {
        let params = SystemParams::heat(1, 2.0, 2.0);
        assert!(TorusSolver::new(params, 7, false).is_err());
        assert!(TorusSolver::new(SystemParams { n: 3, ..params }, 8, false).is_err());
        assert!(TorusSolver::new(SystemParams { alpha1: c(1.0, 0.0), ..params }, 8, false).is_err());
        assert!(FieldState::new(1, 8, 0.0, vec![ZERO; 7], vec![ZERO; 8]).is_err());
        assert!(FieldState::new(1, 8, 0.0, vec![c(f64::NAN, 0.0); 8], vec![ZERO; 8]).is_err());
    }
}
