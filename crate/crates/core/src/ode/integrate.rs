use super::{CoupledOdeSpec, SingleOdeSpec, Trajectory, TrajectoryStatus};
use crate::error::{invalid, Error, Result};

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Difference between the 5th- and embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const PI_BETA: f64 = 0.04;
const STEP_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy)]
pub struct IntegratorOptions {
    pub rtol: f64,
    /// Absolute tolerance; defaults to `rtol * min(f0, g0)`.
    pub atol: Option<f64>,
    pub max_steps: usize,
}

impl IntegratorOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: None, max_steps: 2_000_000 }
    }
}

struct Stepper<'a, const N: usize> {
    rhs: &'a dyn Fn(f64, &[f64; N]) -> [f64; N],
}

impl<const N: usize> Stepper<'_, N> {
    /// One DP5 step from `(t, y)` with first stage `k1`. Returns the new state,
    /// its derivative (FSAL) and the per-component error estimate.
    fn step(&self, t: f64, y: &[f64; N], k1: &[f64; N], h: f64) -> ([f64; N], [f64; N], [f64; N]) {
        let mut k = [[0.0; N]; 7];
        k[0] = *k1;
        for s in 1..7 {
            let mut ys = *y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    for i in 0..N {
                        ys[i] += h * a * kj[i];
                    }
                }
            }
            if s == 6 {
                // Stage 7 is evaluated at the 5th-order solution.
                let f = (self.rhs)(t + h, &ys);
                k[6] = f;
                let mut err = [0.0; N];
                for i in 0..N {
                    err[i] = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
                }
                return (ys, f, err);
            }
            k[s] = (self.rhs)(t + C[s] * h, &ys);
        }
        unreachable!()
    }
}

fn err_norm<const N: usize>(err: &[f64; N], y: &[f64; N], y_new: &[f64; N], rtol: f64, atol: f64) -> f64 {
    let sum: f64 = (0..N)
        .map(|i| {
            let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (sum / N as f64).sqrt()
}

fn all_finite<const N: usize>(v: &[f64; N]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn initial_step<const N: usize>(
    stepper: &Stepper<'_, N>,
    y0: &[f64; N],
    f0: &[f64; N],
    rtol: f64,
    atol: f64,
) -> f64 {
    let sc: Vec<f64> = y0.iter().map(|y| atol + rtol * y.abs()).collect();
    let d0 = (y0.iter().zip(&sc).map(|(y, s)| (y / s).powi(2)).sum::<f64>() / N as f64).sqrt();
    let d1 = (f0.iter().zip(&sc).map(|(f, s)| (f / s).powi(2)).sum::<f64>() / N as f64).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let mut y1 = *y0;
    for i in 0..N {
        y1[i] += h0 * f0[i];
    }
    let f1 = (stepper.rhs)(h0, &y1);
    if !all_finite(&f1) {
        return h0 * 1e-3;
    }
    let d2 = ((0..N).map(|i| ((f1[i] - f0[i]) / sc[i]).powi(2)).sum::<f64>() / N as f64).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    (100.0 * h0).min(h1)
}

/// Integrates the (damped) coupled system with adaptive Dormand-Prince 5(4)
/// and PI step control until `t_end`, until `max(f, g)` reaches
/// `blowup_threshold`, or until the step size collapses below
/// `1e-14` times the current time scale.
///
/// The threshold crossing is located by shrinking the final step, so the
/// last node satisfies `threshold <= max(f, g) <= threshold * (1 + 1e-9)`.
pub fn integrate_coupled(spec: &CoupledOdeSpec, t_end: f64, tol: f64, blowup_threshold: f64) -> Result<Trajectory> {
    if !(tol > 0.0 && tol <= 1e-3) {
        return Err(invalid(format!("tolerance must lie in (0, 1e-3], got {tol}")));
    }
    integrate_with(spec, t_end, IntegratorOptions::with_tol(tol), blowup_threshold)
}

pub fn integrate_with(
    spec: &CoupledOdeSpec,
    t_end: f64,
    opts: IntegratorOptions,
    blowup_threshold: f64,
) -> Result<Trajectory> {
    spec.validate()?;
    if !(t_end > 0.0) {
        return Err(invalid("t_end must be positive"));
    }
    if !(blowup_threshold > spec.f0.max(spec.g0)) {
        return Err(invalid("blow-up threshold must exceed max(f0, g0)"));
    }
    let rtol = opts.rtol;
    let atol = opts.atol.unwrap_or(rtol * spec.f0.min(spec.g0));
    let rhs = |_t: f64, y: &[f64; 2]| spec.rhs(*y);
    let stepper = Stepper { rhs: &rhs };

    let mut t = 0.0;
    let mut y = [spec.f0, spec.g0];
    let mut dy = spec.rhs(y);
    let mut times = vec![t];
    let mut values = vec![y];

    let mut h = initial_step(&stepper, &y, &dy, rtol, atol).min(t_end);
    let time_scale = h;
    let mut fac_old: f64 = 1e-4;
    let mut rejected_last = false;

    let status = loop {
        if times.len() > opts.max_steps {
            return Err(Error::Integration { t, last: y, reason: "step budget exhausted".into() });
        }
        if t >= t_end {
            break TrajectoryStatus::Completed;
        }
        let floor = STEP_FLOOR * t.abs().max(time_scale);
        if h < floor {
            break TrajectoryStatus::StepSizeCollapse;
        }
        let h_try = h.min(t_end - t);
        let (y_new, dy_new, err) = stepper.step(t, &y, &dy, h_try);
        if !all_finite(&y_new) || !all_finite(&dy_new) || !all_finite(&err) {
            h = h_try * FAC_MIN * 0.5;
            rejected_last = true;
            continue;
        }
        let e = err_norm(&err, &y, &y_new, rtol, atol);
        let fac11 = e.powf(0.2 - PI_BETA * 0.75);
        if e <= 1.0 {
            let fac = (fac11 / fac_old.powf(PI_BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_next = h_try / fac;
            if rejected_last {
                h_next = h_next.min(h_try);
            }
            fac_old = e.max(1e-4);
            rejected_last = false;

            if y_new[0].max(y_new[1]) >= blowup_threshold {
                let (tc, yc) = locate_crossing(&stepper, t, &y, &dy, h_try, y_new, blowup_threshold);
                times.push(tc);
                values.push(yc);
                break TrajectoryStatus::BlowUpThresholdReached { threshold: blowup_threshold };
            }
            if y_new.iter().any(|v| *v < 0.0) {
                return Err(Error::Integration { t, last: y, reason: "state left the non-negative cone".into() });
            }
            t = if h_try == t_end - t { t_end } else { t + h_try };
            y = y_new;
            dy = dy_new;
            times.push(t);
            values.push(y);
            h = h_next;
        } else {
            h = h_try / (1.0 / FAC_MIN).min(fac11 / SAFETY);
            rejected_last = true;
        }
    };
    Trajectory::new(times, values, status)
}

/// Bisects the step length so the crossing node sits just above the threshold.
fn locate_crossing(
    stepper: &Stepper<'_, 2>,
    t: f64,
    y: &[f64; 2],
    dy: &[f64; 2],
    h: f64,
    y_full: [f64; 2],
    threshold: f64,
) -> (f64, [f64; 2]) {
    let peak = |v: &[f64; 2]| v[0].max(v[1]);
    let (mut lo, mut hi) = (0.0, h);
    let mut best = (h, y_full);
    for _ in 0..200 {
        if peak(&best.1) <= threshold * (1.0 + 1e-9) || hi - lo <= f64::EPSILON * t.abs().max(h) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (ym, _, _) = stepper.step(t, y, dy, mid);
        if all_finite(&ym) && peak(&ym) >= threshold {
            hi = mid;
            best = (mid, ym);
        } else {
            lo = mid;
        }
    }
    (t + best.0, best.1)
}

/// Final time plus the closed-form remaining time of the single ODE
/// `g' = mu g^rho`, `rho = q(p+1)/(q+1)`, with `mu` fitted from the derivative
/// at the final node.
///
/// Also applies after a step-size collapse: for large exponents the tail
/// beyond the last node is shorter than the spacing of doubles near `t`.
/// `None` if the run just hit `t_end`.
pub fn tail_corrected_lifespan(traj: &Trajectory, spec: &CoupledOdeSpec) -> Option<f64> {
    if traj.status() == TrajectoryStatus::Completed {
        return None;
    }
    let [f, g] = traj.final_value();
    let dg = spec.rhs([f, g])[1];
    let rho = spec.q * (spec.p + 1.0) / (spec.q + 1.0);
    let local = SingleOdeSpec { rho, mu: dg / g.powf(rho), f0: g };
    local.validate().ok()?;
    Some(traj.final_time() + local.blowup_time())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::SingleOdeSpec;

    fn symmetric() -> CoupledOdeSpec {
        CoupledOdeSpec { p: 2.0, q: 2.0, c_p: 1.0, c_q: 1.0, omega: 0.0, f0: 1.0, g0: 1.0 }
    }

    #[test]
    fn symmetric_case_blows_up_at_one_third() {
        let traj = integrate_coupled(&symmetric(), 10.0, 1e-10, 1e6).unwrap();
        assert_eq!(traj.status(), TrajectoryStatus::BlowUpThresholdReached { threshold: 1e6 });
        assert!((traj.final_time() - 1.0 / 3.0).abs() < 1e-4);
        let t_star = tail_corrected_lifespan(&traj, &symmetric()).unwrap();
        assert!((t_star - 1.0 / 3.0).abs() < 1e-8, "tail corrected {t_star}");
        let [f, g] = traj.final_value();
        assert!(f.max(g) >= 1e6 && f.max(g) <= 1e6 * (1.0 + 1e-9));
    }

    #[test]
    fn cubic_single_ode_matches_closed_form() {
        // f' = 2 f^3 as the symmetric reduction p = q = 3, (p+1) C = 2.
        let spec = CoupledOdeSpec { p: 3.0, q: 3.0, c_p: 0.5, c_q: 0.5, omega: 0.0, f0: 1.0, g0: 1.0 };
        let traj = integrate_coupled(&spec, 0.1875, 1e-12, 1e6).unwrap();
        assert_eq!(traj.status(), TrajectoryStatus::Completed);
        assert_eq!(traj.final_time(), 0.1875);
        let exact = SingleOdeSpec::new(3.0, 2.0, 1.0).unwrap().solution(0.1875).unwrap();
        assert!((traj.final_value()[0] - exact).abs() < 1e-9);
        assert!((exact - 2.0).abs() < 1e-14);
    }

    #[test]
    fn vanishing_nonlinearity_stays_put() {
        let spec = CoupledOdeSpec { c_p: 1e-12, c_q: 1e-12, ..symmetric() };
        let traj = integrate_coupled(&spec, 1.0, 1e-10, 1e6).unwrap();
        assert_eq!(traj.status(), TrajectoryStatus::Completed);
        for v in traj.values() {
            assert!((v[0] - 1.0).abs() < 1e-9 && (v[1] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn preconditions_rejected() {
        let s = symmetric();
        assert!(integrate_coupled(&s, 1.0, 0.0, 1e6).is_err());
        assert!(integrate_coupled(&s, 1.0, 1e-2, 1e6).is_err());
        assert!(integrate_coupled(&s, 1.0, 1e-8, 0.5).is_err());
        assert!(integrate_coupled(&s, 0.0, 1e-8, 1e6).is_err());
    }

    #[test]
    fn step_collapse_reported_without_threshold() {
        let traj = integrate_coupled(&symmetric(), 10.0, 1e-8, f64::MAX).unwrap();
        assert_eq!(traj.status(), TrajectoryStatus::StepSizeCollapse);
        assert!(traj.final_time() < 1.0 / 3.0 + 1e-6);
    }
}
