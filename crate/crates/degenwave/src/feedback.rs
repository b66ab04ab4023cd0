//! Monotone boundary feedback laws and their growth envelopes.
//!
//! A law is an odd nondecreasing rho with rho(0) = 0, pinched between a
//! strictly increasing envelope g near the origin and linear growth away from
//! it. The concrete families below all take rho = g on [-1, 1] continued
//! linearly with unit slope beyond.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FeedbackKind<T> {
    /// rho(s) = c s
    Linear { c: T },
    /// g(s) = s^p near 0, p > 1
    Polynomial { p: T },
    /// g(s) = s^p ln^q(1/s) near 0, p > 1, q > 0
    PolyLog { p: T, q: T },
    /// g(s) = exp(-1/s^2) near 0
    ExpInvSquare,
    /// g(s) = exp(-ln^p(1/s)) near 0, p > 1
    ExpLogPower { p: T },
}

/// A monotone feedback with its sector constants.
#[derive(Clone, Debug)]
pub struct FeedbackLaw<T> {
    pub kind: FeedbackKind<T>,
    /// lower sector constant: c1 g(|s|) <= |rho(s)| for |s| <= 1, c1 |s| <= |rho| beyond
    pub c1: T,
    /// upper sector constant: |rho(s)| <= c2 g^{-1}(|s|) for |s| <= 1, <= c2 |s| beyond
    pub c2: T,
}

impl<T: Real> FeedbackLaw<T> {
    pub fn new(kind: FeedbackKind<T>) -> Result<Self> {
        match kind {
            FeedbackKind::Linear { c } => {
                if !(c > T::zero()) {
                    return Err(Error::Config(format!("linear feedback needs c > 0, got {c}")));
                }
            }
            FeedbackKind::Polynomial { p } => {
                if !(p > T::one()) {
                    return Err(Error::Config(format!("polynomial feedback needs p > 1, got {p}")));
                }
            }
            FeedbackKind::PolyLog { p, q } => {
                if !(p > T::one() && q > T::zero()) {
                    return Err(Error::Config(format!(
                        "polylog feedback needs p > 1, q > 0, got ({p}, {q})"
                    )));
                }
            }
            FeedbackKind::ExpInvSquare => {}
            FeedbackKind::ExpLogPower { p } => {
                if !(p > T::one()) {
                    return Err(Error::Config(format!(
                        "exp-log-power feedback needs p > 1, got {p}"
                    )));
                }
            }
        }
        let mut law = FeedbackLaw { kind, c1: T::one(), c2: T::one() };
        law.check_monotone()?;
        law.compute_sector_constants();
        Ok(law)
    }

    /// Endpoint of the region where the near-origin formula for g is used.
    /// The polylog formula s^p ln^q(1/s) stops increasing at s = e^{-q/p};
    /// beyond half that point g continues linearly (the envelope is a local
    /// statement, any increasing extension serves).
    fn formula_cap(&self) -> T {
        match self.kind {
            FeedbackKind::PolyLog { p, q } => T::lit(0.5) * (-(q / p)).exp(),
            _ => T::one(),
        }
    }

    /// Growth envelope g on [0, 1], extended oddly.
    pub fn g(&self, s: T) -> T {
        let a = s.abs().min(T::one());
        let cap = self.formula_cap();
        let v = if a > cap {
            self.g_formula(cap) + self.g_prime_formula(cap) * (a - cap)
        } else {
            self.g_formula(a)
        };
        if s < T::zero() {
            -v
        } else {
            v
        }
    }

    fn g_formula(&self, a: T) -> T {
        match self.kind {
            FeedbackKind::Linear { c } => c * a,
            FeedbackKind::Polynomial { p } => a.powf(p),
            FeedbackKind::PolyLog { p, q } => {
                if a == T::zero() {
                    T::zero()
                } else {
                    a.powf(p) * a.recip().ln().powf(q)
                }
            }
            FeedbackKind::ExpInvSquare => {
                if a == T::zero() {
                    T::zero()
                } else {
                    (-(a * a).recip()).exp()
                }
            }
            FeedbackKind::ExpLogPower { p } => {
                if a == T::zero() {
                    T::zero()
                } else {
                    (-(a.recip().ln()).powf(p)).exp()
                }
            }
        }
    }

    fn g_prime_formula(&self, a: T) -> T {
        match self.kind {
            FeedbackKind::Linear { c } => c,
            FeedbackKind::Polynomial { p } => p * a.powf(p - T::one()),
            FeedbackKind::PolyLog { p, q } => {
                let l = a.recip().ln();
                a.powf(p - T::one()) * l.powf(q - T::one()) * (p * l - q)
            }
            FeedbackKind::ExpInvSquare => {
                (-(a * a).recip()).exp() * T::lit(2.0) / (a * a * a)
            }
            FeedbackKind::ExpLogPower { p } => {
                let l = a.recip().ln();
                if l <= T::zero() {
                    T::zero()
                } else {
                    (-l.powf(p)).exp() * p * l.powf(p - T::one()) / a
                }
            }
        }
    }

    /// dg/ds on (0, 1).
    pub fn g_prime(&self, s: T) -> T {
        let a = s.abs();
        debug_assert!(a > T::zero() && a < T::one());
        let cap = self.formula_cap();
        if a > cap {
            self.g_prime_formula(cap)
        } else {
            self.g_prime_formula(a)
        }
    }

    /// Inverse of g on [0, g(1)], extended linearly past g(1) so the upper
    /// sector check has an envelope on all of [0, 1].
    pub fn g_inv(&self, y: T) -> T {
        let ya = y.abs();
        let g1 = self.g(T::one()).abs();
        let v = if ya >= g1 {
            T::one() + (ya - g1)
        } else {
            let mut lo = T::zero();
            let mut hi = T::one();
            for _ in 0..200 {
                let mid = (lo + hi).half();
                if self.g(mid) < ya {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < T::lit(1e-15) {
                    break;
                }
            }
            (lo + hi).half()
        };
        if y < T::zero() {
            -v
        } else {
            v
        }
    }

    /// The feedback itself: g inside [-1, 1], unit-slope linear outside
    /// (so the sector bounds at infinity hold with the constants below).
    pub fn rho(&self, s: T) -> T {
        match self.kind {
            FeedbackKind::Linear { c } => c * s,
            _ => {
                let a = s.abs();
                let v = if a <= T::one() {
                    self.g(a)
                } else {
                    self.g(T::one()) + (a - T::one())
                };
                if s < T::zero() {
                    -v
                } else {
                    v
                }
            }
        }
    }

    /// d rho / ds, used by the Newton boundary solve (safeguarded by
    /// bisection where the derivative is kinked).
    pub fn rho_prime(&self, s: T) -> T {
        match self.kind {
            FeedbackKind::Linear { c } => c,
            _ => {
                let a = s.abs();
                if a >= T::one() {
                    T::one()
                } else if a == T::zero() {
                    T::zero()
                } else {
                    self.g_prime(a)
                }
            }
        }
    }

    fn check_monotone(&self) -> Result<()> {
        let mut prev = self.rho(T::lit(-3.0));
        let mut s = -3.0f64;
        while s <= 3.0 {
            let cur = self.rho(T::lit(s));
            if cur < prev - T::lit(1e-14) {
                return Err(Error::Config(format!("feedback not nondecreasing near s = {s}")));
            }
            prev = cur;
            s += 0.01;
        }
        if self.rho(T::zero()) != T::zero() {
            return Err(Error::Config("feedback must vanish at 0".into()));
        }
        Ok(())
    }

    /// Sector constants measured on a log probe grid (fields of the law).
    fn compute_sector_constants(&mut self) {
        let mut c1 = T::infinity();
        let mut c2 = T::zero();
        for k in 1..=400 {
            // |s| in (0, 1]
            let s = T::lit((-12.0 * (1.0 - k as f64 / 400.0)).exp());
            let r = self.rho(s).abs();
            let g = self.g(s).abs();
            let gi = self.g_inv(s).abs();
            if g > T::zero() {
                c1 = c1.min(r / g);
            }
            if gi > T::zero() {
                c2 = c2.max(r / gi);
            }
        }
        for k in 0..=400 {
            // |s| in [1, 20]
            let s = T::lit(1.0 + 19.0 * k as f64 / 400.0);
            let r = self.rho(s).abs();
            c1 = c1.min(r / s);
            c2 = c2.max(r / s);
        }
        self.c1 = c1;
        self.c2 = c2;
    }
}
