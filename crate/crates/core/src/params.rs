use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial dimension and the associated energy-critical exponent.
///
/// `p = (n + 2) / (n - 2)` throughout; `n = 6` gives `p = 2` and is the
/// configuration all quantitative defaults are tuned for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionParams {
    pub n: u32,
    pub p: f64,
}

impl DimensionParams {
    pub fn new(n: u32) -> Result<Self> {
        if !(3..=7).contains(&n) {
            return Err(Error::InvalidDimension(n));
        }
        let nf = n as f64;
        Ok(Self {
            n,
            p: (nf + 2.0) / (nf - 2.0),
        })
    }

    /// The reference configuration used by the quantitative test batteries.
    pub fn reference() -> Self {
        Self::new(6).expect("n = 6 is always valid")
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    /// `n (n - 2)`, the squared core scale of the ground state.
    pub fn core_scale_sq(&self) -> f64 {
        self.nf() * (self.nf() - 2.0)
    }

    /// Scaling exponent `(n - 2) / 2` of the critical rescaling
    /// `u -> lambda^{-(n-2)/2} u(. / lambda)`.
    pub fn scaling_power(&self) -> f64 {
        (self.nf() - 2.0) / 2.0
    }

    /// `f(u) = |u|^{p-1} u`.
    pub fn nonlinearity(&self, u: f64) -> f64 {
        if self.n == 6 {
            u * u.abs()
        } else {
            u.abs().powf(self.p - 1.0) * u
        }
    }

    /// `f'(u) = p |u|^{p-1}`.
    pub fn nonlinearity_prime(&self, u: f64) -> f64 {
        if self.n == 6 {
            2.0 * u.abs()
        } else {
            self.p * u.abs().powf(self.p - 1.0)
        }
    }

    /// `|u|^{p+1}`, the density of the potential part of the energy.
    pub fn abs_power_p1(&self, u: f64) -> f64 {
        if self.n == 6 {
            let a = u.abs();
            a * a * a
        } else {
            u.abs().powf(self.p + 1.0)
        }
    }

    /// Surface measure of the unit sphere in `R^n`: `2 pi^{n/2} / Gamma(n/2)`.
    pub fn sphere_area(&self) -> f64 {
        let nf = self.nf();
        2.0 * std::f64::consts::PI.powf(nf / 2.0) / gamma_half_integer(self.n)
    }

    /// Volume of the unit ball in `R^n`.
    pub fn ball_volume(&self) -> f64 {
        self.sphere_area() / self.nf()
    }
}

/// Gamma(n/2) for integer n >= 1, exact for the dimensions we support.
fn gamma_half_integer(n: u32) -> f64 {
    // Gamma(1/2) = sqrt(pi), Gamma(1) = 1, Gamma(x+1) = x Gamma(x).
    let mut x = if n % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut k = if n % 2 == 0 { 2 } else { 1 };
    while k + 2 <= n {
        x *= k as f64 / 2.0;
        k += 2;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_exponent_values() {
        assert_eq!(DimensionParams::new(6).unwrap().p, 2.0);
        assert_eq!(DimensionParams::new(3).unwrap().p, 5.0);
        assert_eq!(DimensionParams::new(4).unwrap().p, 3.0);
        let p5 = DimensionParams::new(5).unwrap().p;
        assert!((p5 - 7.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_unsupported_dimension() {
        assert!(DimensionParams::new(2).is_err());
        assert!(DimensionParams::new(8).is_err());
    }

    #[test]
    fn ball_volumes_match_closed_forms() {
        let v6 = DimensionParams::new(6).unwrap().ball_volume();
        let pi = std::f64::consts::PI;
        assert!((v6 - pi.powi(3) / 6.0).abs() < 1e-14 * v6);
        let v3 = DimensionParams::new(3).unwrap().ball_volume();
        assert!((v3 - 4.0 * pi / 3.0).abs() < 1e-14 * v3);
        let v4 = DimensionParams::new(4).unwrap().ball_volume();
        assert!((v4 - pi * pi / 2.0).abs() < 1e-14 * v4);
        let v5 = DimensionParams::new(5).unwrap().ball_volume();
        assert!((v5 - 8.0 * pi * pi / 15.0).abs() < 1e-14 * v5);
    }
}
