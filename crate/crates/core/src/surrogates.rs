//! Concave lower bounds used by the successive convex approximation steps.
//!
//! A channel row `b` holds the entries of `q_bar^H`, so that the composite
//! amplitude under an augmented vector `v` is `s(v) = sum_n b_n v_n` and the
//! quadratic form `w^H Q v` equals `conj(s(w)) s(v)`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// `sum_n b_n v_n`.
pub fn amplitude(b: &[Complex64], v: &[Complex64]) -> Complex64 {
    b.iter().zip(v).map(|(bn, vn)| bn * vn).sum()
}

/// `Re(sum_n c_n v_n)`, linear in the real and imaginary parts of `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealLinear {
    pub coeffs: Vec<Complex64>,
}

impl RealLinear {
    pub fn eval(&self, v: &[Complex64]) -> f64 {
        amplitude(&self.coeffs, v).re
    }

    /// Coefficients on `(Re v_n, Im v_n)`.
    pub fn real_coeffs(&self, n: usize) -> (f64, f64) {
        let c = self.coeffs[n];
        (c.re, -c.im)
    }
}

fn check_t0(t0: f64) -> Result<()> {
    if t0 > 0.0 && t0.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("expansion duration {t0} must be positive")))
    }
}

/// Lower bound of `tau0 |s(v)|^4` expanded at `(w, t0)`:
/// `linear(v) - beta / sqrt(tau0) + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuarticSurrogate {
    pub linear: RealLinear,
    pub beta: f64,
    pub constant: f64,
}

impl QuarticSurrogate {
    pub fn new(b: &[Complex64], w: &[Complex64], t0: f64) -> Result<Self> {
        check_t0(t0)?;
        let sw = amplitude(b, w);
        let a = sw.norm_sqr();
        let scale = 4.0 * t0 * a * sw.conj();
        Ok(Self {
            linear: RealLinear {
                coeffs: b.iter().map(|bn| scale * bn).collect(),
            },
            beta: 2.0 * a * a * t0.powf(1.5),
            constant: -a * a * t0,
        })
    }

    pub fn eval(&self, v: &[Complex64], tau0: f64) -> f64 {
        self.linear.eval(v) - self.beta / tau0.sqrt() + self.constant
    }
}

/// Lower bound of `tau0 |s(v)|^2` expanded at `(w, t0)`:
/// `linear(v) - beta / tau0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DlEnergySurrogate {
    pub linear: RealLinear,
    pub beta: f64,
}

impl DlEnergySurrogate {
    pub fn new(b: &[Complex64], w: &[Complex64], t0: f64) -> Result<Self> {
        check_t0(t0)?;
        let sw = amplitude(b, w);
        let scale = 2.0 * t0 * sw.conj();
        Ok(Self {
            linear: RealLinear {
                coeffs: b.iter().map(|bn| scale * bn).collect(),
            },
            beta: t0 * t0 * sw.norm_sqr(),
        })
    }

    pub fn eval(&self, v: &[Complex64], tau0: f64) -> f64 {
        self.linear.eval(v) - self.beta / tau0
    }
}

/// Lower bound of `|s(v)|^2` expanded at `w`: `2 Re(conj(s(w)) s(v)) - |s(w)|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedGain {
    pub linear: RealLinear,
    pub constant: f64,
}

impl LinearizedGain {
    pub fn new(b: &[Complex64], w: &[Complex64]) -> Self {
        let sw = amplitude(b, w);
        let scale = 2.0 * sw.conj();
        Self {
            linear: RealLinear {
                coeffs: b.iter().map(|bn| scale * bn).collect(),
            },
            constant: -sw.norm_sqr(),
        }
    }

    pub fn eval(&self, v: &[Complex64]) -> f64 {
        self.linear.eval(v) + self.constant
    }
}

/// Lower bound of `exp(x + y)` expanded at `(x_hat, y_hat)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpProductSurrogate {
    pub x_hat: f64,
    pub y_hat: f64,
}

impl ExpProductSurrogate {
    pub fn new(x_hat: f64, y_hat: f64) -> Self {
        Self { x_hat, y_hat }
    }

    /// `(slope, constant)` of the affine bound `slope (x + y) + constant`.
    pub fn affine(&self) -> (f64, f64) {
        let e = (self.x_hat + self.y_hat).exp();
        (e, e * (1.0 - self.x_hat - self.y_hat))
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (slope, c) = self.affine();
        slope * (x + y) + c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::from_polar(radius * rng.random::<f64>().sqrt(), rng.random::<f64>() * std::f64::consts::TAU))
            .collect()
    }

    #[test]
    fn tight_at_expansion_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let b = random_vec(&mut rng, 6, 2.0);
            let w = random_vec(&mut rng, 6, 1.0);
            let t0 = rng.random::<f64>() + 0.01;
            let a = amplitude(&b, &w).norm_sqr();
            let q = QuarticSurrogate::new(&b, &w, t0).unwrap();
            assert!((q.eval(&w, t0) - t0 * a * a).abs() <= 1e-9 * (1.0 + t0 * a * a));
            let d = DlEnergySurrogate::new(&b, &w, t0).unwrap();
            assert!((d.eval(&w, t0) - t0 * a).abs() <= 1e-9 * (1.0 + t0 * a));
            assert!((LinearizedGain::new(&b, &w).eval(&w) - a).abs() <= 1e-9 * (1.0 + a));
        }
        let e = ExpProductSurrogate::new(0.3, -1.2);
        assert!((e.eval(0.3, -1.2) - (-0.9f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn bounds_hold_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = random_vec(&mut rng, 5, 1.5);
        let w = random_vec(&mut rng, 5, 1.0);
        let q = QuarticSurrogate::new(&b, &w, 0.4).unwrap();
        let d = DlEnergySurrogate::new(&b, &w, 0.4).unwrap();
        let l = LinearizedGain::new(&b, &w);
        for _ in 0..1000 {
            let v = random_vec(&mut rng, 5, 1.0);
            let tau0 = rng.random::<f64>() * 2.0 + 1e-6;
            let a = amplitude(&b, &v).norm_sqr();
            assert!(q.eval(&v, tau0) <= tau0 * a * a + 1e-12);
            assert!(d.eval(&v, tau0) <= tau0 * a + 1e-12);
            assert!(l.eval(&v) <= a + 1e-12);
            let (x, y, xh, yh) = (
                rng.random::<f64>() * 6.0 - 3.0,
                rng.random::<f64>() * 6.0 - 3.0,
                rng.random::<f64>() * 6.0 - 3.0,
                rng.random::<f64>() * 6.0 - 3.0,
            );
            assert!(ExpProductSurrogate::new(xh, yh).eval(x, y) <= (x + y).exp() + 1e-12);
        }
    }

    #[test]
    fn exp_product_example() {
        let e = ExpProductSurrogate::new(0.0, 0.0);
        assert_eq!(e.eval(1.0, 0.0), 2.0);
    }

    #[test]
    fn zero_channel_gives_zero() {
        let b = vec![Complex64::new(0.0, 0.0); 3];
        let w = vec![Complex64::new(1.0, 0.0); 3];
        let q = QuarticSurrogate::new(&b, &w, 0.5).unwrap();
        let d = DlEnergySurrogate::new(&b, &w, 0.5).unwrap();
        let v = vec![Complex64::new(0.0, 1.0); 3];
        assert_eq!(q.eval(&v, 0.3), 0.0);
        assert_eq!(d.eval(&v, 0.3), 0.0);
    }

    #[test]
    fn rejects_nonpositive_duration() {
        let b = vec![Complex64::new(1.0, 0.0)];
        assert!(QuarticSurrogate::new(&b, &b, 0.0).is_err());
        assert!(DlEnergySurrogate::new(&b, &b, -1.0).is_err());
    }

    #[test]
    fn real_coefficients_match_complex_form() {
        let c = RealLinear {
            coeffs: vec![Complex64::new(0.3, -0.7)],
        };
        let v = [Complex64::new(-0.2, 0.9)];
        let (cr, ci) = c.real_coeffs(0);
        assert!((c.eval(&v) - (cr * v[0].re + ci * v[0].im)).abs() < 1e-15);
    }
}
