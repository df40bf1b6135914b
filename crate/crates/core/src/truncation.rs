//! The truncation family: `T_k`, its remainder `G_k`, the primitive `J_k`
//! and a C² regularization of `T_k`.

use crate::error::{Error, Result};
use crate::scalar::Real;

fn check_level<T: Real>(k: T) -> Result<()> {
    if k > T::zero() && k.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidLevel(k.as_f64()))
    }
}

/// `T_k(s) = min(|s|, k) sign(s)`.
pub fn trunc<T: Real>(k: T, s: T) -> Result<T> {
    check_level(k)?;
    Ok(clamp_level(k, s))
}

/// `G_k(s) = s - T_k(s)`.
pub fn gk<T: Real>(k: T, s: T) -> Result<T> {
    check_level(k)?;
    Ok(s - clamp_level(k, s))
}

/// `J_k(s) = ∫_0^s T_k`.
pub fn jk<T: Real>(k: T, s: T) -> Result<T> {
    check_level(k)?;
    Ok(primitive(k, s))
}

/// Smooth truncation `T_k^ε` and its derivative.
pub fn smooth_trunc<T: Real>(k: T, eps: T, s: T) -> Result<(T, T)> {
    TruncationFamily::new(k)?.with_eps(eps).map(|f| f.smooth(s))
}

#[inline]
pub(crate) fn clamp_level<T: Real>(k: T, s: T) -> T {
    s.max(-k).min(k)
}

#[inline]
pub(crate) fn primitive<T: Real>(k: T, s: T) -> T {
    let a = s.abs();
    if a <= k {
        T::lit(0.5) * s * s
    } else {
        k * a - T::lit(0.5) * k * k
    }
}

/// The same family over exact ordered number types such as
/// `num_rational::Rational64`, where `G_k(s) + T_k(s) = s` holds without
/// rounding.
pub mod exact {
    use num_traits::{Signed, ToPrimitive};

    use crate::error::{Error, Result};

    fn check<T: Signed + PartialOrd + ToPrimitive>(k: &T) -> Result<()> {
        if *k > T::zero() {
            Ok(())
        } else {
            Err(Error::InvalidLevel(k.to_f64().unwrap_or(f64::NAN)))
        }
    }

    pub fn trunc<T: Signed + PartialOrd + ToPrimitive + Clone>(k: &T, s: &T) -> Result<T> {
        check(k)?;
        Ok(if *s > *k {
            k.clone()
        } else if *s < -k.clone() {
            -k.clone()
        } else {
            s.clone()
        })
    }

    pub fn gk<T: Signed + PartialOrd + ToPrimitive + Clone>(k: &T, s: &T) -> Result<T> {
        Ok(s.clone() - trunc(k, s)?)
    }

    pub fn jk<T: Signed + PartialOrd + ToPrimitive + Clone>(k: &T, s: &T) -> Result<T> {
        check(k)?;
        let two = T::one() + T::one();
        let a = s.abs();
        Ok(if a <= *k {
            s.clone() * s.clone() / two
        } else {
            k.clone() * a - k.clone() * k.clone() / two
        })
    }
}

/// A truncation level `k` with an optional smoothing width `eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationFamily<T> {
    k: T,
    eps: Option<T>,
}

impl<T: Real> TruncationFamily<T> {
    pub fn new(k: T) -> Result<Self> {
        check_level(k)?;
        Ok(Self { k, eps: None })
    }

    pub fn with_eps(self, eps: T) -> Result<Self> {
        if !(eps > T::zero() && eps < self.k) {
            return Err(Error::InvalidWidth {
                k: self.k.as_f64(),
                eps: eps.as_f64(),
            });
        }
        Ok(Self {
            eps: Some(eps),
            ..self
        })
    }

    pub fn level(&self) -> T {
        self.k
    }

    pub fn eps(&self) -> Option<T> {
        self.eps
    }

    #[inline]
    pub fn trunc(&self, s: T) -> T {
        clamp_level(self.k, s)
    }

    #[inline]
    pub fn gk(&self, s: T) -> T {
        s - clamp_level(self.k, s)
    }

    #[inline]
    pub fn jk(&self, s: T) -> T {
        primitive(self.k, s)
    }

    /// Value and derivative of the C² truncation. Identity on
    /// `|s| <= k - eps`, flat beyond `|s| >= k`, and on the transition band
    /// the Hermite blend matching value, slope and curvature at both ends.
    /// With slope 1 → 0 and zero curvature at both ends the degree-five
    /// term of that blend vanishes, leaving the smoothstep slope
    /// `1 - 3x² + 2x³` and a plateau at `k - eps/2`.
    ///
    /// Without a width (`eps == None`) this is plain `T_k` with its
    /// one-sided derivative.
    pub fn smooth(&self, s: T) -> (T, T) {
        let k = self.k;
        let Some(eps) = self.eps else {
            return if s.abs() < k {
                (s, T::one())
            } else {
                (clamp_level(k, s), T::zero())
            };
        };
        let a = s.abs();
        let sign = if s < T::zero() { -T::one() } else { T::one() };
        let start = k - eps;
        if a <= start {
            return (s, T::one());
        }
        if a >= k {
            return (sign * (k - T::lit(0.5) * eps), T::zero());
        }
        let x = (a - start) / eps;
        let x2 = x * x;
        let x3 = x2 * x;
        let slope = T::one() - T::lit(3.0) * x2 + T::lit(2.0) * x3;
        let value = start + eps * (x - x3 + T::lit(0.5) * x3 * x);
        (sign * value, slope)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trunc_examples() {
        assert_eq!(trunc(2.0, 3.0).unwrap(), 2.0);
        assert_eq!(trunc(2.0, -0.5).unwrap(), -0.5);
        assert_eq!(trunc(2.0, -3.0).unwrap(), -2.0);
        assert!(matches!(trunc(0.0, 1.0), Err(Error::InvalidLevel(_))));
        assert!(matches!(trunc(-1.0, 1.0), Err(Error::InvalidLevel(_))));
    }

    #[test]
    fn gk_examples() {
        assert_eq!(gk(2.0, 3.0).unwrap(), 1.0);
        assert_eq!(gk(2.0, 1.0).unwrap(), 0.0);
        assert_eq!(gk(2.0, -3.0).unwrap(), -1.0);
        assert!(gk(0.0_f64, 1.0).is_err());
    }

    #[test]
    fn jk_examples() {
        assert_eq!(jk(2.0, 1.0).unwrap(), 0.5);
        assert_eq!(jk(2.0, 3.0).unwrap(), 4.0);
        assert_eq!(jk(2.0, -3.0).unwrap(), 4.0);
        assert!(jk(-2.0_f64, 1.0).is_err());
    }

    #[test]
    fn smooth_examples() {
        assert_eq!(smooth_trunc(2.0, 0.5, 1.0).unwrap(), (1.0, 1.0));
        assert_eq!(smooth_trunc(2.0, 0.5, -1.0).unwrap(), (-1.0, 1.0));
        let (v, d) = smooth_trunc(2.0, 0.5, 5.0).unwrap();
        assert!(v <= 2.0);
        assert_eq!(d, 0.0);
        let (_, d) = smooth_trunc(2.0f64, 0.5, 1.75).unwrap();
        assert!(d > 0.0 && d < 1.0);
        let step = 1e-6;
        let fd = (smooth_trunc(2.0f64, 0.5, 1.75 + step).unwrap().0
            - smooth_trunc(2.0, 0.5, 1.75 - step).unwrap().0)
            / (2.0 * step);
        assert!((fd - d).abs() < 1e-6, "fd {fd} vs {d}");
        assert!(matches!(
            smooth_trunc(2.0, 2.0, 1.0),
            Err(Error::InvalidWidth { .. })
        ));
        assert!(smooth_trunc(2.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn smooth_is_c2_at_band_edges() {
        let fam = TruncationFamily::new(2.0f64)
            .unwrap()
            .with_eps(0.5)
            .unwrap();
        let h = 1e-5;
        for edge in [1.5, 2.0] {
            let (_, dl) = fam.smooth(edge - h);
            let (_, dr) = fam.smooth(edge + h);
            assert!((dl - dr).abs() < 1e-8, "slope jump at {edge}");
            // curvature: one-sided differences of the slope
            let cl = (fam.smooth(edge - h).1 - fam.smooth(edge - 2.0 * h).1) / h;
            let cr = (fam.smooth(edge + 2.0 * h).1 - fam.smooth(edge + h).1) / h;
            assert!(cl.abs() < 1e-3 && cr.abs() < 1e-3);
        }
    }

    #[test]
    fn jk_over_k_tends_to_abs() {
        for s in [-3.0, -0.2, 0.7, 5.0_f64] {
            let errs: Vec<f64> = [1.0, 1e-2, 1e-4]
                .iter()
                .map(|&k| ((jk(k, s).unwrap() / k) - s.abs()).abs() / s.abs())
                .collect();
            assert!(errs.windows(2).all(|w| w[1] <= w[0]), "{errs:?}");
        }
    }

    #[test]
    fn works_in_f32() {
        assert_eq!(trunc(2.0_f32, 3.0).unwrap(), 2.0);
        assert_eq!(jk(2.0_f32, 3.0).unwrap(), 4.0);
    }

    proptest! {
        #[test]
        fn trunc_is_one_lipschitz(k in 1e-3..10.0_f64, s in -50.0..50.0_f64, t in -50.0..50.0_f64) {
            let d = (trunc(k, s).unwrap() - trunc(k, t).unwrap()).abs();
            prop_assert!(d <= (s - t).abs());
            prop_assert!(trunc(k, s).unwrap().abs() <= k);
        }

        #[test]
        fn gk_plus_trunc_is_identity(k in 1e-3..10.0_f64, s in -50.0..50.0_f64) {
            // one rounding in s - T_k(s)
            let back = gk(k, s).unwrap() + trunc(k, s).unwrap();
            prop_assert!((back - s).abs() <= f64::EPSILON * s.abs());
        }

        #[test]
        fn gk_plus_trunc_is_exact_over_rationals(
            kn in 1i64..1000, kd in 1i64..100, sn in -100_000i64..100_000, sd in 1i64..1000
        ) {
            use num_rational::Rational64;
            use num_traits::Signed;
            let (k, s) = (Rational64::new(kn, kd), Rational64::new(sn, sd));
            prop_assert_eq!(exact::gk(&k, &s).unwrap() + exact::trunc(&k, &s).unwrap(), s);
            let j = exact::jk(&k, &s).unwrap();
            prop_assert!(j <= k * s.abs());
            prop_assert_eq!(j, exact::jk(&k, &-s).unwrap());
        }

        #[test]
        fn jk_bounds(k in 1e-3..10.0_f64, s in -50.0..50.0_f64) {
            let j = jk(k, s).unwrap();
            prop_assert!(j >= 0.0);
            prop_assert!(j <= k * s.abs() + 1e-12);
            prop_assert_eq!(j, jk(k, -s).unwrap());
        }

        #[test]
        fn smooth_derivative_matches_finite_difference(
            k in 0.5..5.0_f64, frac in 0.05..0.95_f64, s in -8.0..8.0_f64
        ) {
            let fam = TruncationFamily::new(k).unwrap().with_eps(frac * k).unwrap();
            let step = 1e-6;
            let (v, d) = fam.smooth(s);
            let fd = (fam.smooth(s + step).0 - fam.smooth(s - step).0) / (2.0 * step);
            prop_assert!((fd - d).abs() <= 1e-6);
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert!(v.abs() <= k);
            prop_assert_eq!(fam.smooth(-s).0, -v);
        }
    }
}
