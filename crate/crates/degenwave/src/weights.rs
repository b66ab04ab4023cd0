//! Degenerate diffusion coefficients a(x) on [0, 1] and the closed-form
//! constants attached to them.
//!
//! A weight vanishes at x = 0 (except the classical constant case theta = 0),
//! is positive on (0, 1], and its degeneracy is measured by
//! `mu_a = sup x |a'(x)| / a(x)`. Admissible weights have `mu_a < 2`; the
//! failure experiments construct steeper powers through
//! [`Weight::pure_power_nonadmissible`].

use crate::error::{Error, Result};
use crate::quadrature;
use crate::scalar::Real;

/// Degeneracy regime, set by `mu_a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// `mu_a` in [0, 1): Dirichlet condition at x = 0.
    Weak,
    /// `mu_a` in [1, 2): weighted Neumann condition at x = 0.
    Strong,
}

/// Monotone cubic interpolant (Fritsch-Carlson) for tabulated weights.
#[derive(Clone, Debug)]
pub struct MonotoneCubic<T> {
    xs: Vec<T>,
    ys: Vec<T>,
    ds: Vec<T>, // endpoint derivatives per knot
}

impl<T: Real> MonotoneCubic<T> {
    pub fn new(xs: Vec<T>, ys: Vec<T>) -> Result<Self> {
        if xs.len() < 3 || xs.len() != ys.len() {
            return Err(Error::InvalidWeight("table needs >= 3 rows".into()));
        }
        for w in xs.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidWeight("table x must be strictly increasing".into()));
            }
        }
        let n = xs.len();
        let mut slopes = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            slopes.push((ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]));
        }
        let mut ds = vec![T::zero(); n];
        ds[0] = slopes[0];
        ds[n - 1] = slopes[n - 2];
        for i in 1..n - 1 {
            if slopes[i - 1] * slopes[i] <= T::zero() {
                ds[i] = T::zero();
            } else {
                // weighted harmonic mean keeps monotonicity
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let w1 = T::lit(2.0) * h1 + h0;
                let w2 = h1 + T::lit(2.0) * h0;
                ds[i] = (w1 + w2) / (w1 / slopes[i - 1] + w2 / slopes[i]);
            }
        }
        Ok(MonotoneCubic { xs, ys, ds })
    }

    fn segment(&self, x: T) -> usize {
        let n = self.xs.len();
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.xs[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    pub fn eval(&self, x: T) -> T {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (y0, y1, d0, d1) = (self.ys[i], self.ys[i + 1], self.ds[i], self.ds[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = T::lit(2.0) * t3 - T::lit(3.0) * t2 + T::one();
        let h10 = t3 - T::lit(2.0) * t2 + t;
        let h01 = -T::lit(2.0) * t3 + T::lit(3.0) * t2;
        let h11 = t3 - t2;
        h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
    }

    pub fn eval_deriv(&self, x: T) -> T {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (y0, y1, d0, d1) = (self.ys[i], self.ys[i + 1], self.ds[i], self.ds[i + 1]);
        let t2 = t * t;
        let dh00 = (T::lit(6.0) * t2 - T::lit(6.0) * t) / h;
        let dh10 = T::lit(3.0) * t2 - T::lit(4.0) * t + T::one();
        let dh01 = (-T::lit(6.0) * t2 + T::lit(6.0) * t) / h;
        let dh11 = T::lit(3.0) * t2 - T::lit(2.0) * t;
        dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1
    }
}

/// The analytic form of a weight.
#[derive(Clone, Debug)]
pub enum WeightKind<T> {
    /// a(x) = x^theta
    PurePower { theta: T },
    /// a(x) = x^theta (1 + sin^2(alpha ln x))
    OscillatoryPower { theta: T, alpha: T },
    /// samples (x, a, a') interpolated monotonically; a' optionally tabulated
    Tabulated {
        a: MonotoneCubic<T>,
        a_prime: MonotoneCubic<T>,
    },
}

/// An admissible (or deliberately non-admissible) diffusion coefficient.
#[derive(Clone, Debug)]
pub struct Weight<T> {
    pub kind: WeightKind<T>,
    pub mu_a: T,
    pub a_at_1: T,
    pub regime: Regime,
    admissible: bool,
}

const PROBE_COUNT: usize = 100_000;
const PROBE_LN_MIN: f64 = -36.0; // ~ 2^{-52}

fn probe_grid<T: Real>() -> impl Iterator<Item = T> {
    // geometric ladder clustered at 0, x = exp(ln_min * (1 - j/(N-1)))
    (0..PROBE_COUNT).map(|j| {
        let f = 1.0 - j as f64 / (PROBE_COUNT - 1) as f64;
        T::lit((PROBE_LN_MIN * f).exp())
    })
}

impl<T: Real> Weight<T> {
    /// a(x) = x^theta with theta in [0, 2).
    pub fn pure_power(theta: T) -> Result<Self> {
        if !(theta >= T::zero() && theta < T::lit(2.0)) {
            return Err(Error::InvalidWeight(format!(
                "pure power needs theta in [0,2), got {theta}"
            )));
        }
        Ok(Self::power_unchecked(theta, true))
    }

    /// a(x) = x^theta with theta >= 2, for the non-observability experiments.
    pub fn pure_power_nonadmissible(theta: T) -> Result<Self> {
        if !(theta >= T::lit(2.0)) || !theta.is_finite() {
            return Err(Error::InvalidWeight(format!(
                "nonadmissible constructor needs theta >= 2, got {theta}"
            )));
        }
        Ok(Self::power_unchecked(theta, false))
    }

    fn power_unchecked(theta: T, admissible: bool) -> Self {
        // x a'/a = theta identically, so mu_a = theta
        let regime = if theta < T::one() { Regime::Weak } else { Regime::Strong };
        Weight {
            kind: WeightKind::PurePower { theta },
            mu_a: theta,
            a_at_1: T::one(),
            regime,
            admissible,
        }
    }

    /// a(x) = x^theta (1 + sin^2(alpha ln x)), theta > 0, theta + 2 alpha < 2.
    pub fn oscillatory_power(theta: T, alpha: T) -> Result<Self> {
        if !(theta > T::zero() && alpha > T::zero() && theta + T::lit(2.0) * alpha < T::lit(2.0)) {
            return Err(Error::InvalidWeight(format!(
                "oscillatory power needs theta > 0, alpha > 0, theta + 2 alpha < 2; got ({theta}, {alpha})"
            )));
        }
        let mut w = Weight {
            kind: WeightKind::OscillatoryPower { theta, alpha },
            mu_a: T::zero(),
            a_at_1: T::one(), // sin(ln 1) = 0
            regime: Regime::Weak,
            admissible: true,
        };
        let mu = w.maximize_degeneracy_ratio();
        if mu >= theta + T::lit(2.0) * alpha {
            return Err(Error::InvalidWeight(format!(
                "degeneracy measure {mu} exceeds the bound theta + 2 alpha"
            )));
        }
        w.mu_a = mu;
        w.regime = if mu < T::one() { Regime::Weak } else { Regime::Strong };
        w.validate_probes()?;
        Ok(w)
    }

    /// Tabulated weight from rows (x, a, optional a'); the first row must be
    /// (0, 0, _) and x must increase strictly from 0 to 1.
    pub fn tabulated(rows: &[(T, T, Option<T>)]) -> Result<Self> {
        if rows.len() < 4 {
            return Err(Error::InvalidWeight("need at least 4 table rows".into()));
        }
        if rows[0].0 != T::zero() || rows[0].1 != T::zero() {
            return Err(Error::InvalidWeight("first table row must be (0, 0, _)".into()));
        }
        let last = rows.len() - 1;
        if rows[last].0 != T::one() {
            return Err(Error::InvalidWeight("last table row must have x = 1".into()));
        }
        let xs: Vec<T> = rows.iter().map(|r| r.0).collect();
        let ys: Vec<T> = rows.iter().map(|r| r.1).collect();
        let have_all_derivs = rows.iter().all(|r| r.2.is_some());
        let dv: Vec<T> = if have_all_derivs {
            rows.iter().map(|r| r.2.unwrap()).collect()
        } else {
            // centered differences on the table, one-sided at the ends
            let n = rows.len();
            let mut d = vec![T::zero(); n];
            d[0] = (ys[1] - ys[0]) / (xs[1] - xs[0]);
            d[n - 1] = (ys[n - 1] - ys[n - 2]) / (xs[n - 1] - xs[n - 2]);
            for i in 1..n - 1 {
                d[i] = (ys[i + 1] - ys[i - 1]) / (xs[i + 1] - xs[i - 1]);
            }
            d
        };
        let a = MonotoneCubic::new(xs.clone(), ys.clone())?;
        let a_prime = MonotoneCubic::new(xs, dv)?;
        let a1 = ys[last];
        if a1 <= T::zero() {
            return Err(Error::InvalidWeight("a(1) must be positive".into()));
        }
        let mut w = Weight {
            kind: WeightKind::Tabulated { a, a_prime },
            mu_a: T::zero(),
            a_at_1: a1,
            regime: Regime::Weak,
            admissible: true,
        };
        let mu = w.maximize_degeneracy_ratio();
        if mu >= T::lit(2.0) {
            return Err(Error::InvalidWeight(format!(
                "tabulated weight has mu_a = {mu} >= 2"
            )));
        }
        w.mu_a = mu;
        w.regime = if mu < T::one() { Regime::Weak } else { Regime::Strong };
        w.validate_probes()?;
        Ok(w)
    }

    pub fn is_admissible(&self) -> bool {
        self.admissible
    }

    /// Pointwise value a(x), x in [0, 1].
    pub fn eval_a(&self, x: T) -> T {
        assert!(
            x >= T::zero() && x <= T::one(),
            "weight evaluated outside [0,1]: {x}"
        );
        match &self.kind {
            WeightKind::PurePower { theta } => {
                if *theta == T::zero() {
                    T::one()
                } else if x == T::zero() {
                    T::zero()
                } else {
                    x.powf(*theta)
                }
            }
            WeightKind::OscillatoryPower { theta, alpha } => {
                if x == T::zero() {
                    T::zero()
                } else {
                    let s = (*alpha * x.ln()).sin();
                    x.powf(*theta) * (T::one() + s * s)
                }
            }
            WeightKind::Tabulated { a, .. } => a.eval(x),
        }
    }

    /// Pointwise derivative a'(x), x in (0, 1]; the x = 0 value is the
    /// one-sided limit where it exists (0 for theta > 1).
    pub fn eval_a_prime(&self, x: T) -> T {
        assert!(
            x >= T::zero() && x <= T::one(),
            "weight derivative evaluated outside [0,1]: {x}"
        );
        match &self.kind {
            WeightKind::PurePower { theta } => {
                let th = *theta;
                if th == T::zero() {
                    T::zero()
                } else if x == T::zero() {
                    if th > T::one() {
                        T::zero()
                    } else if th == T::one() {
                        T::one()
                    } else {
                        T::infinity()
                    }
                } else {
                    th * x.powf(th - T::one())
                }
            }
            WeightKind::OscillatoryPower { theta, alpha } => {
                if x == T::zero() {
                    return if *theta > T::one() { T::zero() } else { T::infinity() };
                }
                let l = x.ln();
                let s = (*alpha * l).sin();
                let c = (*alpha * l).cos();
                x.powf(*theta - T::one())
                    * (*theta * (T::one() + s * s) + T::lit(2.0) * *alpha * s * c)
            }
            WeightKind::Tabulated { a_prime, .. } => a_prime.eval(x),
        }
    }

    fn degeneracy_ratio(&self, x: T) -> T {
        x * self.eval_a_prime(x).abs() / self.eval_a(x)
    }

    /// sup of x |a'| / a over the probe ladder, refined by golden section.
    fn maximize_degeneracy_ratio(&self) -> T {
        let mut best_x = T::one();
        let mut best = T::zero();
        let mut prev = T::zero();
        let mut prev2 = T::zero();
        for x in probe_grid::<T>() {
            let r = self.degeneracy_ratio(x);
            if r > best {
                best = r;
                best_x = x;
            }
            prev2 = prev;
            prev = x;
        }
        let _ = (prev, prev2);
        // golden-section refine in a bracket of neighbouring probes
        let lo = (best_x * T::lit((PROBE_LN_MIN / (PROBE_COUNT - 1) as f64).exp())).max(T::lit(1e-16));
        let hi = (best_x / T::lit((PROBE_LN_MIN / (PROBE_COUNT - 1) as f64).exp())).min(T::one());
        let phi = T::lit(0.618_033_988_749_894_9);
        let mut a = lo;
        let mut b = hi;
        let mut x1 = b - phi * (b - a);
        let mut x2 = a + phi * (b - a);
        let mut f1 = self.degeneracy_ratio(x1);
        let mut f2 = self.degeneracy_ratio(x2);
        for _ in 0..200 {
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (b - a);
                f2 = self.degeneracy_ratio(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - phi * (b - a);
                f1 = self.degeneracy_ratio(x1);
            }
            if (b - a) < T::lit(1e-14) * b {
                break;
            }
        }
        best.max(f1).max(f2)
    }

    /// Positivity, degeneracy at 0, and the lower bound a(x) >= a(1) x^{mu_a}.
    fn validate_probes(&self) -> Result<()> {
        let tol = T::lit(1e-12);
        for x in probe_grid::<T>() {
            let a = self.eval_a(x);
            if !(a > T::zero()) {
                return Err(Error::InvalidWeight(format!("a({x}) = {a} is not positive")));
            }
            let bound = self.a_at_1 * x.powf(self.mu_a);
            if a < bound * (T::one() - tol) {
                return Err(Error::InvalidWeight(format!(
                    "a(x) >= a(1) x^mu violated at x = {x}: {a} < {bound}"
                )));
            }
        }
        Ok(())
    }

    /// Integral of 1/a over [0, x]; finite only in the weak regime.
    pub fn integral_reciprocal(&self, x: T) -> Result<T> {
        if self.regime != Regime::Weak {
            return Err(Error::Domain("1/a is not integrable in the strong regime".into()));
        }
        match &self.kind {
            WeightKind::PurePower { theta } => {
                let th = *theta;
                Ok(x.powf(T::one() - th) / (T::one() - th))
            }
            _ => {
                // geometric panels absorb the integrable singularity at 0
                let mut total = T::zero();
                let mut hi = x;
                for _ in 0..80 {
                    let lo = hi.half();
                    total += quadrature::integrate(|s| self.eval_a(s).recip(), lo, hi, 16, 1);
                    hi = lo;
                    if hi < T::lit(1e-18) {
                        break;
                    }
                }
                Ok(total)
            }
        }
    }
}

/// Every closed-form constant the theory attaches to a weight. `beta`-dependent
/// constants are `None` when `beta = 0`.
#[derive(Clone, Debug)]
pub struct WeightConstants<T> {
    /// Poincare constant (1/a(1)) min{4, 1/(2-mu)}
    pub c_a: T,
    /// weak-space Poincare constant (1/a(1)) min{4, 2/(2-mu)}
    pub c_a_prime: T,
    /// coercivity constant min{1/C'_a, beta a(1)/2}
    pub alpha_a: Option<T>,
    /// norm-equivalence constant max{2 beta a(1), 1 + 2 beta/(2-mu)}
    pub gamma_a: T,
    /// observability time 4/((2-mu) min{1,a(1)}) + 2 mu sqrt(C_a)
    pub t_a: T,
    pub eta_1: T,
    pub eta_2: T,
    pub c_a_doubleprime: Option<T>,
    /// stabilization constant of the exponential decay envelope
    pub m_a_beta: Option<T>,
}

/// Evaluate all constants for weight `w` and boundary parameter `beta >= 0`.
pub fn compute_constants<T: Real>(w: &Weight<T>, beta: T) -> Result<WeightConstants<T>> {
    if !w.is_admissible() {
        return Err(Error::InvalidWeight("constants require an admissible weight".into()));
    }
    if beta < T::zero() {
        return Err(Error::Domain(format!("beta must be >= 0, got {beta}")));
    }
    let mu = w.mu_a;
    let a1 = w.a_at_1;
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let c_a = four.min((two - mu).recip()) / a1;
    let c_a_prime = four.min(two / (two - mu)) / a1;
    let gamma_a = (two * beta * a1).max(T::one() + two * beta / (two - mu));
    let t_a = four / ((two - mu) * T::one().min(a1)) + two * mu * c_a.sqrt();
    let eta_1 = T::one() + T::lit(1.5) * a1;
    let eta_2 = beta * (T::one() + beta - mu) + (two * beta - mu / two).powi(2).half();
    let (alpha_a, c_a_doubleprime, m_a_beta) = if beta > T::zero() {
        let alpha = c_a_prime.recip().min(beta * a1 / two);
        let cpp = two
            * (T::one() + mu / four)
                .max(a1.recip() + (mu / four) * c_a_prime)
                .max(mu / (two * beta * a1));
        let m = two / (two - mu)
            * (two * cpp
                + eta_1 / a1
                + eta_2 * eta_2 * (T::one() + beta.powi(3).recip()) / (two - mu)
                    * (T::one() + (beta * alpha).recip())
                + two * eta_2 / (beta * alpha.sqrt()));
        (Some(alpha), Some(cpp), Some(m))
    } else {
        (None, None, None)
    };
    Ok(WeightConstants {
        c_a,
        c_a_prime,
        alpha_a,
        gamma_a,
        t_a,
        eta_1,
        eta_2,
        c_a_doubleprime,
        m_a_beta,
    })
}
