//! Heat-type system `u_t = |a1| Laplace u + b1 |v|^p`, `v_t = |a2| Laplace v + b2 |u|^q`
//! on a Dirichlet box `[-L, L]^n` (`n = 1, 2`), with functionals weighted by
//! `phi(x / R)` and the radius thresholds and constants of the weighted
//! damped inequality.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fit::{fit_power_law, trailing_decade, RateFit};
use crate::ode::{cor24_bounds, cor24_thresholds, BoundReport, CoupledOdeSpec};
use crate::system::{check_odi, FunctionalSeries, OdiForm, OdiReport, SystemParams};
use crate::testfn::TestFunctionData;
use crate::torus::RunStatus;

/// Radius thresholds and constants for a weight radius `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdConstants {
    /// Eigenvalue convention used (`lambda_eff` unless stated otherwise).
    pub lambda: f64,
    /// `max(|a1|, |a2|) lambda`.
    pub lambda_tilde: f64,
    /// `(p+1) lambda_tilde R^-2`.
    pub omega: f64,
    /// Radius beyond which the damping part of the blow-up condition holds.
    pub r1: f64,
    /// `r1` by the closed-form display, which omits the factor `|phi|^(1/(2(p+1)/(pq-1)-n))`.
    pub r1_display: f64,
    /// Zero when `p = q` (the ordering condition is then radius independent).
    pub r2: f64,
    pub r0: f64,
    pub p_equals_q: bool,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// `C3 min{...} lambda^... |phi|^... U0^...`, `None` if the minimum is not attained.
    pub t1: Option<f64>,
    /// Minimiser of `-x^2 log(1 - x^-theta)` over `x >= r0 / r1`.
    pub t1_minimiser: Option<f64>,
    pub radius: f64,
    pub above_r0: bool,
}

fn check_weighted_params(params: &SystemParams) -> Result<()> {
    params.validate()?;
    if params.q < 1.0 {
        return Err(invalid("weighted bounds need p >= q >= 1"));
    }
    let a = params.rate_exponents().0;
    if !(a > params.n as f64 / 2.0) {
        return Err(invalid("weighted bounds need (p+1)/(pq-1) > n/2"));
    }
    Ok(())
}

pub fn evaluate_thresholds(
    params: &SystemParams,
    tf: &TestFunctionData,
    u0: f64,
    v0: f64,
    radius: f64,
) -> Result<ThresholdConstants> {
    evaluate_thresholds_with_lambda(params, tf, u0, v0, radius, tf.lambda_eff())
}

pub fn evaluate_thresholds_with_lambda(
    params: &SystemParams,
    tf: &TestFunctionData,
    u0: f64,
    v0: f64,
    radius: f64,
    lambda: f64,
) -> Result<ThresholdConstants> {
    check_weighted_params(params)?;
    if tf.dimension != params.n {
        return Err(invalid("test function dimension does not match params"));
    }
    if !(u0 > 0.0 && v0 > 0.0 && radius > 0.0 && lambda > 0.0) {
        return Err(invalid("U0, V0, R and lambda must be positive"));
    }
    let SystemParams { n, p, q, alpha1, alpha2, beta1, beta2 } = *params;
    let nf = n as f64;
    let d = p * q - 1.0;
    let a = (p + 1.0) / d;
    let k = 2.0 * a - nf;
    let (b1, b2) = (beta1.norm(), beta2.norm());
    let amax = alpha1.norm().max(alpha2.norm());
    let lt = amax * lambda;
    let phi = tf.l1_norm;
    let omega = (p + 1.0) * lt / (radius * radius);
    let two = 2f64;

    let mu1 = two.powf((p + 1.0) / (q + 1.0) * p * q / d)
        * ((p + 1.0) / (q + 1.0)).powf(1.0 / d)
        * lt.powf(a)
        * b1.powf(1.0 - 1.0 / d)
        * b2.powf(-p / d)
        * phi;
    let r1 = (mu1 / u0).powf(1.0 / k);
    let big = 2.0 * (p + 1.0) - nf * d;
    let r1_display = two.powf(p * q / (q + 1.0) / (2.0 - nf * d / (p + 1.0)))
        * ((p + 1.0) / (q + 1.0)).powf(1.0 / d / k)
        * lt.powf(1.0 / (2.0 - nf * d / (p + 1.0)))
        * b1.powf((p * q - 2.0) / big)
        * b2.powf(-p / big)
        * u0.powf(-1.0 / k);
    let p_equals_q = p == q;
    let r2 = if p_equals_q {
        0.0
    } else {
        let e = nf * (p - q);
        ((q + 1.0) / (p + 1.0)).powf(1.0 / e)
            * b1.powf((q + 2.0) / e)
            * b2.powf(-(2.0 + p) / e)
            * phi.powf(-1.0 / nf)
            * v0.powf((p + 1.0) / e)
            * u0.powf(-(q + 1.0) / e)
    };
    let r0 = r1.max(r2);
    let pq1 = (p + 1.0) * (q + 1.0);
    let c1 = ((q + 1.0) / (p + 1.0)).powf(d / pq1)
        * (b1.powf(2.0 + q) / b2.powf(2.0 + p)).powf(d / pq1)
        * phi.powf(-d * (p - q) / pq1);
    let c2 = two.powf(-p * q / (q + 1.0))
        * ((q + 1.0) / (p + 1.0)).powf(q / (q + 1.0))
        * b1.powf(q / (q + 1.0))
        * b2.powf((2.0 - p * q) / (q + 1.0))
        * phi.powf(-d / (q + 1.0));
    let s = 1.0 - nf / 2.0 * d / (p + 1.0);
    let c3 = two.powf(p * q / (q + 1.0) / s)
        * (q + 1.0)
        / d
        * ((p + 1.0) / (q + 1.0)).powf(1.0 / (p + 1.0) / s)
        * amax.powf(nf / 2.0 / (a - nf / 2.0))
        * b1.powf(-2.0 * (2.0 - p * q) / big)
        * b2.powf(-2.0 * p / big);
    let theta = 2.0 - nf * d / (p + 1.0);
    let minimum = minimise_log_factor(theta, r0 / r1);
    let t1 = minimum.map(|(_, m)| {
        let e = 1.0 / (a - nf / 2.0);
        c3 * m * lambda.powf(nf / 2.0 * e) * phi.powf(e) * u0.powf(-e)
    });
    Ok(ThresholdConstants {
        lambda,
        lambda_tilde: lt,
        omega,
        r1,
        r1_display,
        r2,
        r0,
        p_equals_q,
        c1,
        c2,
        c3,
        t1,
        t1_minimiser: minimum.map(|(x, _)| x),
        radius,
        above_r0: radius > r0,
    })
}

/// `-x^2 log(1 - x^-theta)`.
pub fn log_factor(x: f64, theta: f64) -> f64 {
    -x * x * (-x.powf(-theta)).ln_1p()
}

/// Minimum of [`log_factor`] over `x >= lower` (`lower >= 1`, `0 < theta < 2`),
/// as `(argmin, min)`.
pub fn minimise_log_factor(theta: f64, lower: f64) -> Option<(f64, f64)> {
    if !(theta > 0.0 && theta < 2.0 && lower >= 1.0 && lower.is_finite()) {
        return None;
    }
    let f = |s: f64| log_factor(s.exp(), theta);
    // the factor is infinite at x = 1 and grows like x^(2 - theta); walk right in log x until it rises
    let start = lower.ln().max(1e-12);
    let (mut prev, mut cur, mut step) = (start, start, 0.05);
    for _ in 0..200 {
        let next = cur + step;
        if f(next) > f(cur) {
            let x = golden(&f, prev, next);
            let (x, v) = if f(start) <= f(x) { (start, f(start)) } else { (x, f(x)) };
            return Some((x.exp(), v));
        }
        prev = cur;
        cur = next;
        step *= 1.5;
    }
    None
}

fn golden(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > 1e-13 * (1.0 + a.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Damped coupled ODE obtained from the weighted functionals at radius `R`.
pub fn weighted_ode_spec(params: &SystemParams, tf: &TestFunctionData, radius: f64, lambda: f64, u0: f64, v0: f64) -> CoupledOdeSpec {
    let SystemParams { n, p, q, alpha1, alpha2, beta1, beta2 } = *params;
    let nf = n as f64;
    let (b1, b2) = (beta1.norm(), beta2.norm());
    let phi = tf.l1_norm;
    let lt = alpha1.norm().max(alpha2.norm()) * lambda;
    CoupledOdeSpec {
        p,
        q,
        c_p: phi.powf(1.0 - p) / (p + 1.0) * b1 * b1 * b2.powf(-p) * radius.powf(-nf * (p - 1.0)),
        c_q: phi.powf(1.0 - q) / (q + 1.0) * b2 * b2 * b1.powf(-q) * radius.powf(-nf * (q - 1.0)),
        omega: (p + 1.0) * lt / (radius * radius),
        f0: u0,
        g0: v0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prop41Bounds {
    pub thresholds: ThresholdConstants,
    /// Same quantities with the eigenvalue of `psi` in place of `lambda_eff`.
    pub thresholds_lambda_psi: ThresholdConstants,
    pub spec: CoupledOdeSpec,
    /// Damped ODE bounds; `hypothesis_satisfied` also requires `R > R0`.
    pub report: BoundReport,
}

pub fn prop41_bounds(params: &SystemParams, tf: &TestFunctionData, u0: f64, v0: f64, radius: f64) -> Result<Prop41Bounds> {
    let thresholds = evaluate_thresholds(params, tf, u0, v0, radius)?;
    let thresholds_lambda_psi = evaluate_thresholds_with_lambda(params, tf, u0, v0, radius, tf.lambda)?;
    let spec = weighted_ode_spec(params, tf, radius, tf.lambda_eff(), u0, v0);
    let mut report = cor24_bounds(&spec)?;
    if !thresholds.above_r0 && report.hypothesis_satisfied {
        report.hypothesis_satisfied = false;
        report.lifespan_bound = None;
        report.lower_bound = None;
    }
    Ok(Prop41Bounds { thresholds, thresholds_lambda_psi, spec, report })
}

/// `U0` strictly above both blow-up thresholds of the instantiated damped ODE.
pub fn damped_condition_holds(spec: &CoupledOdeSpec) -> bool {
    let [a, b] = cor24_thresholds(spec);
    a.max(b) < spec.f0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// `phi(x / radius)`
    Phi { radius: f64 },
    /// `exp(-|x|^2 / (2 width^2))`
    Gaussian { width: f64 },
}

/// `u0 = epsilon a shape(x)`, `v0 = epsilon b shape(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataFamily {
    pub epsilon: f64,
    pub shape: Shape,
    pub a: Complex64,
    pub b: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Strang splitting: Crank-Nicolson (Peaceman-Rachford in 2D) diffusion around a pointwise RK4 reaction step.
    #[default]
    Imex,
    /// Classical RK4 on the full right-hand side, `dt <= h^2 / (2 n max|a|)`.
    Explicit,
}

fn default_cfl() -> f64 {
    0.01
}
fn default_dt_max() -> f64 {
    1e-2
}
fn default_threshold() -> f64 {
    1e5
}
fn default_max_steps() -> usize {
    2_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EuclidRunSpec {
    pub params: SystemParams,
    /// Weight radius `R`.
    pub radius: f64,
    pub box_half_width: f64,
    pub h: f64,
    pub data: DataFamily,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    pub t_max: f64,
    /// The run stops once `max(U, V)` reaches this.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn is_multiple(x: f64, h: f64) -> bool {
    let r = x / h;
    (r - r.round()).abs() < 1e-9 * r.max(1.0)
}

impl EuclidRunSpec {
    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        p.validate()?;
        if !(p.n == 1 || p.n == 2) {
            return Err(invalid("Euclidean runs support n = 1, 2"));
        }
        for alpha in [p.alpha1, p.alpha2] {
            if !(alpha.im == 0.0 && alpha.re < 0.0) {
                return Err(invalid("Euclidean runs need real negative alpha"));
            }
        }
        check_weighted_params(p)?;
        if !(self.radius > 0.0 && self.h > 0.0 && self.box_half_width.is_finite()) {
            return Err(invalid("radius and h must be positive"));
        }
        if self.box_half_width < 2.0 * self.radius {
            return Err(invalid("box half-width must be at least 2R"));
        }
        if self.h > self.radius / 64.0 {
            return Err(invalid("grid spacing must satisfy h <= R/64"));
        }
        if !is_multiple(self.radius, self.h) || !is_multiple(self.box_half_width, self.h) {
            return Err(invalid("R and the box half-width must be integer multiples of h"));
        }
        let ok_shape = match self.data.shape {
            Shape::Phi { radius } => radius > 0.0,
            Shape::Gaussian { width } => width > 0.0,
        };
        if !(ok_shape && self.data.epsilon.is_finite()) {
            return Err(invalid("invalid initial data family"));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.5 && self.dt_max > 0.0 && self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(invalid("cfl must lie in (0, 0.5]; dt_max and t_max must be positive"));
        }
        if !(self.threshold > 0.0) || self.max_steps == 0 {
            return Err(invalid("threshold and max_steps must be positive"));
        }
        Ok(())
    }

    /// Interior nodes per axis.
    pub fn nodes_per_axis(&self) -> usize {
        (2.0 * self.box_half_width / self.h).round() as usize - 1
    }

    /// `conj(b1) u0` and `conj(b2) v0` real and positive on the support.
    pub fn data_positive(&self) -> bool {
        let DataFamily { epsilon, a, b, .. } = self.data;
        let pa = self.params.beta1.conj() * a * epsilon;
        let pb = self.params.beta2.conj() * b * epsilon;
        let real_pos = |z: Complex64| z.re > 0.0 && z.im.abs() <= 1e-12 * z.re;
        real_pos(pa) && real_pos(pb)
    }
}

/// Interior values on the box; row-major for `n = 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclidState {
    pub n: usize,
    pub nodes: usize,
    pub h: f64,
    pub half_width: f64,
    pub t: f64,
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
}

impl EuclidState {
    pub fn coords(&self, i: usize) -> Vec<f64> {
        coords(self.n, self.nodes, self.h, self.half_width, i)
    }
}

fn coords(n: usize, nodes: usize, h: f64, half_width: f64, i: usize) -> Vec<f64> {
    let x = |j: usize| -half_width + (j + 1) as f64 * h;
    if n == 1 {
        vec![x(i)]
    } else {
        vec![x(i / nodes), x(i % nodes)]
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub struct EuclidSolver {
    spec: EuclidRunSpec,
    tf: TestFunctionData,
    n: usize,
    nodes: usize,
    /// `phi(x / R) h^n` at every node.
    weights: Vec<f64>,
}

impl EuclidSolver {
    pub fn new(spec: &EuclidRunSpec, tf: &TestFunctionData) -> Result<Self> {
        spec.validate()?;
        if tf.dimension != spec.params.n {
            return Err(invalid("test function dimension does not match params"));
        }
        let n = spec.params.n;
        let nodes = spec.nodes_per_axis();
        let cell = spec.h.powi(n as i32);
        let weights = (0..nodes.pow(n as u32))
            .map(|i| tf.phi(norm(&coords(n, nodes, spec.h, spec.box_half_width, i)) / spec.radius) * cell)
            .collect();
        Ok(Self { spec: spec.clone(), tf: tf.clone(), n, nodes, weights })
    }

    pub fn spec(&self) -> &EuclidRunSpec {
        &self.spec
    }

    pub fn initial_state(&self) -> EuclidState {
        let DataFamily { epsilon, shape, a, b } = self.spec.data;
        let profile = |x: &[f64]| match shape {
            Shape::Phi { radius } => self.tf.phi(norm(x) / radius),
            Shape::Gaussian { width } => (-norm(x).powi(2) / (2.0 * width * width)).exp(),
        };
        let (u, v) = (0..self.weights.len())
            .map(|i| {
                let s = epsilon * profile(&self.coords(i));
                (a * s, b * s)
            })
            .unzip();
        EuclidState { n: self.n, nodes: self.nodes, h: self.spec.h, half_width: self.spec.box_half_width, t: 0.0, u, v }
    }

    pub fn coords(&self, i: usize) -> Vec<f64> {
        coords(self.n, self.nodes, self.spec.h, self.spec.box_half_width, i)
    }

    fn check_state(&self, s: &EuclidState) -> Result<()> {
        if s.n != self.n || s.nodes != self.nodes || s.u.len() != self.weights.len() || s.v.len() != self.weights.len() {
            return Err(invalid("state grid does not match the solver"));
        }
        Ok(())
    }

    /// Centred second differences with zero Dirichlet data.
    pub fn laplacian(&self, f: &[Complex64]) -> Vec<Complex64> {
        let m = self.nodes;
        let inv_h2 = 1.0 / (self.spec.h * self.spec.h);
        let zero = Complex64::new(0.0, 0.0);
        let at = |i: isize, j: isize| -> Complex64 {
            if i < 0 || j < 0 || i >= m as isize || j >= m as isize {
                zero
            } else {
                f[i as usize * m + j as usize]
            }
        };
        if self.n == 1 {
            (0..m)
                .map(|i| {
                    let left = if i > 0 { f[i - 1] } else { zero };
                    let right = if i + 1 < m { f[i + 1] } else { zero };
                    (left - 2.0 * f[i] + right) * inv_h2
                })
                .collect()
        } else {
            (0..m * m)
                .map(|k| {
                    let (i, j) = ((k / m) as isize, (k % m) as isize);
                    (at(i - 1, j) + at(i + 1, j) + at(i, j - 1) + at(i, j + 1) - 4.0 * f[k]) * inv_h2
                })
                .collect()
        }
    }

    fn diffusivities(&self) -> (f64, f64) {
        (self.spec.params.alpha1.norm(), self.spec.params.alpha2.norm())
    }

    fn reaction(&self, u: Complex64, v: Complex64) -> (Complex64, Complex64) {
        let SystemParams { p, q, beta1, beta2, .. } = self.spec.params;
        (beta1 * v.norm().powf(p), beta2 * u.norm().powf(q))
    }

    fn rhs(&self, u: &[Complex64], v: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let (d1, d2) = self.diffusivities();
        let (lu, lv) = (self.laplacian(u), self.laplacian(v));
        (0..u.len())
            .map(|i| {
                let (nu, nv) = self.reaction(u[i], v[i]);
                (d1 * lu[i] + nu, d2 * lv[i] + nv)
            })
            .unzip()
    }

    /// Largest explicit step allowed by the diffusion stability limit.
    pub fn explicit_limit(&self) -> f64 {
        let (d1, d2) = self.diffusivities();
        self.spec.h.powi(2) / (2.0 * self.n as f64 * d1.max(d2))
    }

    pub fn step(&self, state: &EuclidState, dt: f64) -> Result<EuclidState> {
        self.check_state(state)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("time step must be positive"));
        }
        let (u, v) = match self.spec.scheme {
            Scheme::Explicit => {
                if dt > self.explicit_limit() * (1.0 + 1e-12) {
                    return Err(invalid("time step exceeds the explicit stability limit"));
                }
                self.rk4(state, dt)
            }
            Scheme::Imex => {
                let (d1, d2) = self.diffusivities();
                let (mut u, mut v) = (state.u.clone(), state.v.clone());
                self.diffuse(&mut u, d1, 0.5 * dt);
                self.diffuse(&mut v, d2, 0.5 * dt);
                for i in 0..u.len() {
                    let (a, b) = self.react_rk4(u[i], v[i], dt);
                    u[i] = a;
                    v[i] = b;
                }
                self.diffuse(&mut u, d1, 0.5 * dt);
                self.diffuse(&mut v, d2, 0.5 * dt);
                (u, v)
            }
        };
        if u.iter().chain(&v).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Overflow { t: state.t });
        }
        Ok(EuclidState { u, v, t: state.t + dt, ..state.clone() })
    }

    fn rk4(&self, s: &EuclidState, dt: f64) -> (Vec<Complex64>, Vec<Complex64>) {
        let axpy = |x: &[Complex64], k: &[Complex64], w: f64| -> Vec<Complex64> {
            x.iter().zip(k).map(|(x, k)| x + w * k).collect()
        };
        let (k1u, k1v) = self.rhs(&s.u, &s.v);
        let (k2u, k2v) = self.rhs(&axpy(&s.u, &k1u, 0.5 * dt), &axpy(&s.v, &k1v, 0.5 * dt));
        let (k3u, k3v) = self.rhs(&axpy(&s.u, &k2u, 0.5 * dt), &axpy(&s.v, &k2v, 0.5 * dt));
        let (k4u, k4v) = self.rhs(&axpy(&s.u, &k3u, dt), &axpy(&s.v, &k3v, dt));
        let combine = |x: &[Complex64], a: &[Complex64], b: &[Complex64], c: &[Complex64], d: &[Complex64]| {
            (0..x.len()).map(|i| x[i] + dt / 6.0 * (a[i] + 2.0 * (b[i] + c[i]) + d[i])).collect::<Vec<_>>()
        };
        (combine(&s.u, &k1u, &k2u, &k3u, &k4u), combine(&s.v, &k1v, &k2v, &k3v, &k4v))
    }

    fn react_rk4(&self, u: Complex64, v: Complex64, dt: f64) -> (Complex64, Complex64) {
        let (a1, a2) = self.reaction(u, v);
        let (b1, b2) = self.reaction(u + 0.5 * dt * a1, v + 0.5 * dt * a2);
        let (c1, c2) = self.reaction(u + 0.5 * dt * b1, v + 0.5 * dt * b2);
        let (d1, d2) = self.reaction(u + dt * c1, v + dt * c2);
        (u + dt / 6.0 * (a1 + 2.0 * (b1 + c1) + d1), v + dt / 6.0 * (a2 + 2.0 * (b2 + c2) + d2))
    }

    /// Diffusion over `tau`: Crank-Nicolson in 1D, Peaceman-Rachford in 2D.
    fn diffuse(&self, f: &mut [Complex64], diffusivity: f64, tau: f64) {
        let c = diffusivity * tau / (2.0 * self.spec.h * self.spec.h);
        let m = self.nodes;
        let solver = Tridiagonal::new(m, c);
        if self.n == 1 {
            let rhs = explicit_1d(f, c);
            f.copy_from_slice(&rhs);
            solver.solve(f);
        } else {
            // implicit in x (rows index i), explicit in y
            let mut tmp = vec![Complex64::new(0.0, 0.0); m * m];
            for i in 0..m {
                let row = explicit_1d(&f[i * m..(i + 1) * m], c);
                tmp[i * m..(i + 1) * m].copy_from_slice(&row);
            }
            solve_columns(&solver, &mut tmp, m);
            // implicit in y, explicit in x
            let mut out = vec![Complex64::new(0.0, 0.0); m * m];
            for j in 0..m {
                let col: Vec<Complex64> = (0..m).map(|i| tmp[i * m + j]).collect();
                let e = explicit_1d(&col, c);
                for i in 0..m {
                    out[i * m + j] = e[i];
                }
            }
            for i in 0..m {
                solver.solve(&mut out[i * m..(i + 1) * m]);
            }
            f.copy_from_slice(&out);
        }
    }

    /// `(U, V)`: `Re(conj(b) sum f phi(x/R) h^n)`.
    pub fn functionals(&self, s: &EuclidState) -> (f64, f64) {
        let p = &self.spec.params;
        let dot = |f: &[Complex64]| f.iter().zip(&self.weights).map(|(z, w)| z * w).sum::<Complex64>();
        ((p.beta1.conj() * dot(&s.u)).re, (p.beta2.conj() * dot(&s.v)).re)
    }

    /// `(U, V, U', V')` with derivatives from the discrete right-hand side.
    pub fn functionals_with_rates(&self, s: &EuclidState) -> (f64, f64, f64, f64) {
        let (u, v) = self.functionals(s);
        let (du, dv) = self.rhs(&s.u, &s.v);
        let (du, dv) = self.functionals(&EuclidState { u: du, v: dv, ..s.clone() });
        (u, v, du, dv)
    }

    /// Diffusive part of `U'`, `|a1| Re(conj(b1) sum (Laplace_h u) phi(x/R) h^n)`.
    pub fn diffusive_rate(&self, s: &EuclidState) -> f64 {
        let p = &self.spec.params;
        let lu = self.laplacian(&s.u);
        let dot: Complex64 = lu.iter().zip(&self.weights).map(|(z, w)| z * w).sum();
        p.alpha1.norm() * (p.beta1.conj() * dot).re
    }

    pub fn growth_rate(&self, s: &EuclidState) -> f64 {
        let sup = |f: &[Complex64]| f.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let (su, sv) = (sup(&s.u), sup(&s.v));
        let SystemParams { p, q, beta1, beta2, .. } = self.spec.params;
        let ratio = |num: f64, den: f64| if num == 0.0 { 0.0 } else { num / den.max(f64::MIN_POSITIVE) };
        ratio(beta1.norm() * sv.powf(p), su).max(ratio(beta2.norm() * su.powf(q), sv))
    }
}

fn explicit_1d(f: &[Complex64], c: f64) -> Vec<Complex64> {
    let m = f.len();
    let zero = Complex64::new(0.0, 0.0);
    (0..m)
        .map(|i| {
            let left = if i > 0 { f[i - 1] } else { zero };
            let right = if i + 1 < m { f[i + 1] } else { zero };
            f[i] + c * (left - 2.0 * f[i] + right)
        })
        .collect()
}

fn solve_columns(solver: &Tridiagonal, data: &mut [Complex64], m: usize) {
    let mut col = vec![Complex64::new(0.0, 0.0); m];
    for j in 0..m {
        for i in 0..m {
            col[i] = data[i * m + j];
        }
        solver.solve(&mut col);
        for i in 0..m {
            data[i * m + j] = col[i];
        }
    }
}

/// Thomas factorisation of `tridiag(-c, 1 + 2c, -c)`.
struct Tridiagonal {
    c: f64,
    /// Modified super-diagonal.
    upper: Vec<f64>,
    /// Reciprocal pivots.
    inv_pivot: Vec<f64>,
}

impl Tridiagonal {
    fn new(m: usize, c: f64) -> Self {
        let mut upper = vec![0.0; m];
        let mut inv_pivot = vec![0.0; m];
        let diag = 1.0 + 2.0 * c;
        let mut prev = 0.0;
        for i in 0..m {
            let pivot = diag + c * prev;
            inv_pivot[i] = 1.0 / pivot;
            upper[i] = -c / pivot;
            prev = upper[i];
        }
        Self { c, upper, inv_pivot }
    }

    fn solve(&self, x: &mut [Complex64]) {
        let m = x.len();
        let mut prev = Complex64::new(0.0, 0.0);
        for i in 0..m {
            x[i] = (x[i] + self.c * prev) * self.inv_pivot[i];
            prev = x[i];
        }
        for i in (0..m.saturating_sub(1)).rev() {
            let next = x[i + 1];
            x[i] -= self.upper[i] * next;
        }
    }
}

/// One step with a freshly built solver.
pub fn euclid_step(state: &EuclidState, spec: &EuclidRunSpec, tf: &TestFunctionData, dt: f64) -> Result<EuclidState> {
    EuclidSolver::new(spec, tf)?.step(state, dt)
}

/// `U' + |a1| lambda_eff R^-2 U >= R^(-n(p-1)) |phi|^(1-p) |b1|^2 |b2|^-p V^p`
/// and the `V` analogue, tolerance `1e-6 (1 + |U'|)`.
pub fn check_euclid_odi(series: &FunctionalSeries, params: &SystemParams, tf: &TestFunctionData, radius: f64) -> OdiReport {
    let SystemParams { n, p, q, alpha1, alpha2, beta1, beta2 } = *params;
    let nf = n as f64;
    let (b1, b2) = (beta1.norm(), beta2.norm());
    let phi = tf.l1_norm;
    let r2 = radius * radius;
    let form = OdiForm {
        damp_u: alpha1.norm() * tf.lambda_eff() / r2,
        damp_v: alpha2.norm() * tf.lambda_eff() / r2,
        coef_u: radius.powf(-nf * (p - 1.0)) * phi.powf(1.0 - p) * b1 * b1 * b2.powf(-p),
        exp_u: p,
        coef_v: radius.powf(-nf * (q - 1.0)) * phi.powf(1.0 - q) * b2 * b2 * b1.powf(-q),
        exp_v: q,
        rel_tol: 1e-6,
        outside_verified_regime: params.outside_verified_regime(),
    };
    check_odi(series, form)
}

#[derive(Debug, Clone)]
pub struct EuclidRun {
    pub series: FunctionalSeries,
    pub final_state: EuclidState,
    pub status: RunStatus,
    pub steps: usize,
}

impl EuclidRun {
    /// Escape time of `U`: `t + gamma U / U'` at the last node with `gamma = (p+1)/(pq-1)`.
    pub fn escape_time(&self, params: &SystemParams) -> Option<f64> {
        if self.status != RunStatus::ThresholdReached {
            return None;
        }
        let i = self.series.len().checked_sub(1)?;
        let (u, du) = (self.series.u[i], self.series.du[i]);
        let gamma = params.rate_exponents().0;
        (u > 0.0 && du > 0.0).then(|| self.series.times[i] + gamma * u / du)
    }
}

pub fn run_euclid(spec: &EuclidRunSpec, tf: &TestFunctionData) -> Result<EuclidRun> {
    let solver = EuclidSolver::new(spec, tf)?;
    let mut state = solver.initial_state();
    let mut series = FunctionalSeries::default();
    let record = |s: &EuclidState, series: &mut FunctionalSeries| {
        let (u, v, du, dv) = solver.functionals_with_rates(s);
        series.push(s.t, u, v, du, dv);
        (u, v)
    };
    let mut uv = record(&state, &mut series);
    let mut steps = 0;
    let status = loop {
        if uv.0.max(uv.1) >= spec.threshold {
            break RunStatus::ThresholdReached;
        }
        if state.t >= spec.t_max {
            break RunStatus::TimeLimit;
        }
        if steps >= spec.max_steps {
            break RunStatus::StepLimit;
        }
        let mut dt = (spec.cfl / solver.growth_rate(&state)).min(spec.dt_max).min(spec.t_max - state.t);
        if spec.scheme == Scheme::Explicit {
            dt = dt.min(solver.explicit_limit());
        }
        match solver.step(&state, dt) {
            Ok(next) => state = next,
            Err(Error::Overflow { .. }) => break RunStatus::Overflow,
            Err(e) => return Err(e),
        }
        steps += 1;
        uv = record(&state, &mut series);
    };
    Ok(EuclidRun { series, final_state: state, status, steps })
}

#[derive(Debug, Clone)]
pub struct EuclidReport {
    pub bounds: Prop41Bounds,
    pub odi: OdiReport,
    pub fit_u: Option<RateFit>,
    pub fit_v: Option<RateFit>,
    pub escape_time: Option<f64>,
    pub status: RunStatus,
    pub steps: usize,
    pub data_positive: bool,
}

impl EuclidReport {
    pub fn new(run: &EuclidRun, spec: &EuclidRunSpec, tf: &TestFunctionData) -> Result<Self> {
        let s = &run.series;
        let bounds = prop41_bounds(&spec.params, tf, s.u[0], s.v[0], spec.radius)?;
        let fit = |ys: &[f64]| {
            let last = *ys.last()?;
            let window = trailing_decade(&s.times, ys, last.min(spec.threshold))?;
            fit_power_law(&s.times, ys, window).ok()
        };
        Ok(Self {
            bounds,
            odi: check_euclid_odi(s, &spec.params, tf, spec.radius),
            fit_u: fit(&s.u),
            fit_v: fit(&s.v),
            escape_time: run.escape_time(&spec.params),
            status: run.status,
            steps: run.steps,
            data_positive: spec.data_positive(),
        })
    }

    pub fn to_json(&self, params: &SystemParams) -> serde_json::Value {
        let (gu, gv) = params.rate_exponents();
        serde_json::json!({
            "status": self.status,
            "steps": self.steps,
            "escape_time": self.escape_time,
            "data_positive": self.data_positive,
            "bounds": self.bounds.report.to_json(50),
            "odi": self.odi,
            "fit_u": self.fit_u,
            "fit_v": self.fit_v,
            "target_exponents": { "u": gu, "v": gv },
        })
    }
}

/// Closed-form heat kernel evolution of a Gaussian of width `w` under `f_t = D Laplace f` in `R^n`.
pub fn gaussian_heat(x: &[f64], width: f64, diffusivity: f64, t: f64, n: usize) -> f64 {
    let s2 = width * width + 2.0 * diffusivity * t;
    (width * width / s2).powf(n as f64 / 2.0) * (-norm(x).powi(2) / (2.0 * s2)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfn::build_test_function;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn spec_1d(p: f64, q: f64) -> EuclidRunSpec {
        EuclidRunSpec {
            params: SystemParams::heat(1, p, q),
            radius: 1.0,
            box_half_width: 4.0,
            h: 1.0 / 64.0,
            data: DataFamily { epsilon: 1.0, shape: Shape::Phi { radius: 1.0 }, a: c(1.0), b: c(1.0) },
            scheme: Scheme::Imex,
            cfl: 0.01,
            dt_max: 1e-3,
            t_max: 1.0,
            threshold: 1e5,
            max_steps: 1000,
        }
    }

    #[test]
    fn tridiagonal_solve() {
        let m = 7;
        let cc = 0.37;
        let t = Tridiagonal::new(m, cc);
        let x: Vec<Complex64> = (0..m).map(|i| Complex64::new(i as f64, 1.0 - i as f64)).collect();
        // b = A x
        let mut b: Vec<Complex64> = (0..m)
            .map(|i| {
                let l = if i > 0 { x[i - 1] } else { c(0.0) };
                let r = if i + 1 < m { x[i + 1] } else { c(0.0) };
                (1.0 + 2.0 * cc) * x[i] - cc * (l + r)
            })
            .collect();
        t.solve(&mut b);
        for (a, b) in x.iter().zip(&b) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn constant_data_functional_equals_norm() {
        let tf = build_test_function(1).unwrap();
        let solver = EuclidSolver::new(&spec_1d(2.0, 2.0), &tf).unwrap();
        let mut s = solver.initial_state();
        s.u.iter_mut().for_each(|z| *z = c(1.0));
        let (u, _) = solver.functionals(&s);
        assert!((u - 1.0).abs() < 1e-9, "{u}");
    }

    #[test]
    fn outside_support_gives_zero() {
        let tf = build_test_function(1).unwrap();
        let solver = EuclidSolver::new(&spec_1d(2.0, 2.0), &tf).unwrap();
        let mut s = solver.initial_state();
        for i in 0..s.u.len() {
            let x = solver.coords(i)[0];
            s.u[i] = if x.abs() > 1.5 { c(3.0) } else { c(0.0) };
        }
        assert_eq!(solver.functionals(&s).0, 0.0);
    }

    #[test]
    fn symmetric_data_stays_symmetric() {
        let tf = build_test_function(1).unwrap();
        let solver = EuclidSolver::new(&spec_1d(2.0, 2.0), &tf).unwrap();
        let mut s = solver.initial_state();
        for _ in 0..50 {
            s = solver.step(&s, 1e-3).unwrap();
        }
        for (a, b) in s.u.iter().zip(&s.v) {
            assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let tf = build_test_function(2).unwrap();
        let mut spec = spec_1d(2.0, 1.5);
        spec.params.n = 2;
        spec.h = 1.0 / 64.0;
        spec.box_half_width = 2.0;
        spec.data.epsilon = 0.0;
        let solver = EuclidSolver::new(&spec, &tf).unwrap();
        let s = solver.step(&solver.initial_state(), 1e-3).unwrap();
        assert!(s.u.iter().chain(&s.v).all(|z| z.norm() == 0.0));
    }

    #[test]
    fn validation() {
        let tf = build_test_function(1).unwrap();
        let ok = spec_1d(2.0, 1.5);
        assert!(EuclidSolver::new(&ok, &tf).is_ok());
        let mut bad = ok.clone();
        bad.params.alpha1 = Complex64::new(-1.0, 0.5);
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.box_half_width = 1.5;
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.h = 1.0 / 32.0;
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.params.q = 0.9;
        bad.params.p = 3.0;
        assert!(bad.validate().is_err());
        // (p+1)/(pq-1) = 4/8 = n/2 is critical
        let mut bad = ok.clone();
        bad.params.p = 3.0;
        bad.params.q = 3.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn log_factor_minimum() {
        let theta = 1.0;
        let (x, m) = minimise_log_factor(theta, 1.0).unwrap();
        // stationarity of -x^2 log(1 - x^-1)
        let g = |x: f64| log_factor(x, theta);
        assert!(g(x * (1.0 + 1e-4)) >= m && g(x * (1.0 - 1e-4)) >= m);
        let (xb, mb) = minimise_log_factor(theta, 2.0 * x).unwrap();
        assert!((xb / (2.0 * x) - 1.0).abs() < 1e-14);
        assert!(mb > m);
        assert!(minimise_log_factor(2.5, 1.0).is_none());
    }
}
