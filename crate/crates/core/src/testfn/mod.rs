//! Radial weight `phi = psi^2`, where `psi` is the first Dirichlet
//! eigenfunction of `-Laplace` on the unit ball, normalised to `psi(0) = 1`.
//!
//! `phi` vanishes together with its gradient on the unit sphere and obeys
//! `-Laplace phi = 2 lambda phi - 2 |grad psi|^2 <= 2 lambda phi`, so the
//! effective constant is `lambda_eff = 2 lambda`.

pub mod bessel;

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{invalid, Result};
use crate::io::write_csv_rows;
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Profile {
    /// `cos(pi r / 2)`
    Cosine,
    /// `J0(j r)` with `j` the first zero of `J0`
    Bessel { zero: f64 },
    /// `sin(pi r) / (pi r)`
    Sinc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctionData {
    pub dimension: usize,
    /// Dirichlet eigenvalue of `psi` on the unit ball.
    pub lambda: f64,
    /// `integral of phi over B(1)`.
    pub l1_norm: f64,
    profile: Profile,
}

pub fn build_test_function(n: usize) -> Result<TestFunctionData> {
    let (profile, lambda) = match n {
        1 => (Profile::Cosine, PI * PI / 4.0),
        2 => {
            let zero = bessel::j0_first_zero();
            (Profile::Bessel { zero }, zero * zero)
        }
        3 => (Profile::Sinc, PI * PI),
        _ => return Err(invalid(format!("test function supports dimensions 1..=3, got {n}"))),
    };
    let mut tf = TestFunctionData { dimension: n, lambda, l1_norm: 0.0, profile };
    tf.l1_norm = tf.radial_integral(|r| tf.phi(r));
    Ok(tf)
}

impl TestFunctionData {
    /// Constant in `-Laplace phi <= lambda_eff phi`.
    pub fn lambda_eff(&self) -> f64 {
        2.0 * self.lambda
    }

    /// Surface measure of the unit sphere in the radial integral (`2` for `n = 1`).
    fn sphere_area(&self) -> f64 {
        match self.dimension {
            1 => 2.0,
            2 => 2.0 * PI,
            _ => 4.0 * PI,
        }
    }

    /// `integral over B(1) of f(|x|)`.
    pub fn radial_integral(&self, f: impl Fn(f64) -> f64) -> f64 {
        let k = self.dimension as i32 - 1;
        self.sphere_area() * quad::integrate(|r| f(r) * r.powi(k), 0.0, 1.0, 8)
    }

    pub fn psi(&self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        match self.profile {
            Profile::Cosine => (0.5 * PI * r).cos(),
            Profile::Bessel { zero } => bessel::j0(zero * r),
            Profile::Sinc => sinc_derivs(PI * r)[0],
        }
    }

    pub fn dpsi(&self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        match self.profile {
            Profile::Cosine => -0.5 * PI * (0.5 * PI * r).sin(),
            Profile::Bessel { zero } => -zero * bessel::j1(zero * r),
            Profile::Sinc => PI * sinc_derivs(PI * r)[1],
        }
    }

    pub fn d2psi(&self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        match self.profile {
            Profile::Cosine => -0.25 * PI * PI * (0.5 * PI * r).cos(),
            // J1' = J0 - J1/x
            Profile::Bessel { zero } => {
                let x = zero * r;
                -zero * zero * (bessel::j0(x) - bessel::j1_over_x(x))
            }
            Profile::Sinc => PI * PI * sinc_derivs(PI * r)[2],
        }
    }

    /// Radial Laplacian of `psi`.
    pub fn lap_psi(&self, r: f64) -> f64 {
        let k = (self.dimension - 1) as f64;
        if r == 0.0 {
            (1.0 + k) * self.d2psi(0.0)
        } else {
            self.d2psi(r) + k / r * self.dpsi(r)
        }
    }

    pub fn phi(&self, r: f64) -> f64 {
        self.psi(r).powi(2)
    }

    pub fn dphi(&self, r: f64) -> f64 {
        2.0 * self.psi(r) * self.dpsi(r)
    }

    pub fn d2phi(&self, r: f64) -> f64 {
        2.0 * self.dpsi(r).powi(2) + 2.0 * self.psi(r) * self.d2psi(r)
    }

    /// Radial Laplacian of `phi`; zero outside the unit ball.
    pub fn lap_phi(&self, r: f64) -> f64 {
        let k = (self.dimension - 1) as f64;
        if r >= 1.0 {
            0.0
        } else if r == 0.0 {
            (1.0 + k) * self.d2phi(0.0)
        } else {
            self.d2phi(r) + k / r * self.dphi(r)
        }
    }

    /// `phi(x / R)` at a point of `R^n`; zero outside `B(R)`.
    pub fn phi_scaled(&self, x: &[f64], radius: f64) -> f64 {
        self.phi(norm(x) / radius)
    }

    /// `Laplace[phi(. / R)](x) = R^-2 (Laplace phi)(x / R)`.
    pub fn lap_phi_scaled(&self, x: &[f64], radius: f64) -> f64 {
        self.lap_phi(norm(x) / radius) / (radius * radius)
    }

    /// `max_r (-Laplace phi - 2 lambda phi)` over `resolution + 1` equispaced radii in `[0, 1]`.
    pub fn verify_phi_inequality(&self, resolution: usize) -> Result<f64> {
        if resolution < 64 {
            return Err(invalid("grid resolution must be at least 64"));
        }
        Ok(self
            .radii(resolution)
            .map(|r| -self.lap_phi(r) - self.lambda_eff() * self.phi(r))
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// `max_r |-Laplace psi - lambda psi|`.
    pub fn eigen_residual(&self, resolution: usize) -> f64 {
        self.radii(resolution)
            .map(|r| (-self.lap_psi(r) - self.lambda * self.psi(r)).abs())
            .fold(0.0, f64::max)
    }

    fn radii(&self, resolution: usize) -> impl Iterator<Item = f64> {
        (0..=resolution).map(move |i| i as f64 / resolution as f64)
    }

    /// Radial profile as CSV `r,phi,lap_phi`.
    pub fn write_profile_csv<W: Write>(&self, w: W, resolution: usize) -> Result<()> {
        let rows = self.radii(resolution).map(|r| vec![r, self.phi(r), self.lap_phi(r)]);
        write_csv_rows(w, &["r", "phi", "lap_phi"], rows)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `[sinc, sinc', sinc'']` with `sinc(x) = sin x / x`.
fn sinc_derivs(x: f64) -> [f64; 3] {
    if x.abs() < 0.5 {
        // Taylor series sum (-1)^k x^(2k) / (2k+1)!
        let mut out = [0.0; 3];
        let mut coeff = 1.0;
        for k in 0..12 {
            let e = 2 * k;
            out[0] += coeff * x.powi(e);
            if e >= 1 {
                out[1] += coeff * e as f64 * x.powi(e - 1);
            }
            if e >= 2 {
                out[2] += coeff * (e * (e - 1)) as f64 * x.powi(e - 2);
            }
            coeff *= -1.0 / (((e + 2) * (e + 3)) as f64);
        }
        out
    } else {
        let (s, c) = x.sin_cos();
        [s / x, (x * c - s) / (x * x), -s / x - 2.0 * c / (x * x) + 2.0 * s / (x * x * x)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_closed_forms() {
        let tf = build_test_function(1).unwrap();
        assert!((tf.lambda - PI * PI / 4.0).abs() < 1e-15);
        assert!((tf.lambda - 2.4674).abs() < 1e-4);
        assert!((tf.l1_norm - 1.0).abs() < 1e-10);
        assert!((tf.psi(0.3) - (0.15 * PI).cos()).abs() < 1e-15);
    }

    #[test]
    fn disk_norm_matches_bessel_identity() {
        // integral_0^1 J0(j r)^2 r dr = J1(j)^2 / 2, J1(j01) tabulated
        let tf = build_test_function(2).unwrap();
        let j1_at_zero = 0.519_147_497_289_466_9;
        assert!((tf.lambda - 2.404_825_557_695_773f64.powi(2)).abs() < 1e-11);
        assert!((tf.l1_norm / (PI * j1_at_zero * j1_at_zero) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ball_norm() {
        // 4 pi integral_0^1 sin^2(pi r)/pi^2 dr = 2 / pi
        let tf = build_test_function(3).unwrap();
        assert!((tf.l1_norm / (2.0 / PI) - 1.0).abs() < 1e-10);
        assert!((tf.lambda - PI * PI).abs() < 1e-15);
    }

    #[test]
    fn boundary_behaviour() {
        for n in 1..=3 {
            let tf = build_test_function(n).unwrap();
            assert!(tf.phi(1.0).abs() < 1e-15);
            assert!(tf.dphi(1.0 - 1e-12).abs() < 1e-10);
            assert!(tf.phi(1.0 - 1e-12) < 1e-20);
            assert_eq!(tf.phi_scaled(&vec![2.0; n], 1.0), 0.0);
            assert!((tf.phi(0.0) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn inequality_and_eigen_residual() {
        for n in 1..=3 {
            let tf = build_test_function(n).unwrap();
            let v = tf.verify_phi_inequality(4096).unwrap();
            assert!(v <= 1e-10, "n={n} violation {v}");
            assert!(tf.eigen_residual(4096) <= 1e-8, "n={n}");
        }
        let tf = build_test_function(1).unwrap();
        assert!(tf.verify_phi_inequality(63).is_err());
    }

    #[test]
    fn unsupported_dimension() {
        assert!(build_test_function(0).is_err());
        assert!(build_test_function(4).is_err());
    }

    #[test]
    fn sinc_series_matches_closed_form_at_switch() {
        let a = sinc_derivs(0.4999999);
        let b = sinc_derivs(0.5000001);
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-6);
        }
    }
}
