//! Optimal-weight convexity machinery: from a feedback growth envelope g,
//! build H(x) = sqrt(x) g(sqrt(x)), its convex conjugate, L, Lambda_H and
//! psi_0, predict energy-decay envelopes, and fit simulated energy traces
//! against the predicted rates.

use crate::dynamics::EnergyTrace;
use crate::error::{Error, Result};
use crate::feedback::{FeedbackKind, FeedbackLaw};
use crate::quadrature::adaptive_simpson;
use crate::scalar::Real;

/// Decay model: linear feedbacks fall in the exponential regime and carry no
/// convexity machinery.
#[derive(Clone, Debug)]
pub enum DecayModel<T> {
    /// linear case marker ("exponential regime"): H is not strictly convex
    Linear { c: T },
    Convex(ConvexDecayModel<T>),
}

/// The convex machinery for a strictly convex H on [0, r0^2].
#[derive(Clone, Debug)]
pub struct ConvexDecayModel<T> {
    law: FeedbackLaw<T>,
    pub r0: T,
    /// log-spaced sample grid on (0, r0^2] used by the conjugate
    xs: Vec<T>,
    hs: Vec<T>,
    /// sup of Lambda_H over the grid
    pub lambda_sup: T,
    /// limsup_{x->0} Lambda_H(x) < 1 enables the simplified decay route
    pub simplified_route: bool,
}

const CONJUGATE_GRID: usize = 2000;

/// Build the decay model, halving r0 until H is strictly convex (down to
/// r0 = 1e-4, after which the law is rejected).
pub fn build_decay_model<T: Real>(law: &FeedbackLaw<T>, r0: T) -> Result<DecayModel<T>> {
    if let FeedbackKind::Linear { c } = law.kind {
        return Ok(DecayModel::Linear { c });
    }
    if !(r0 > T::zero() && r0 <= T::one()) {
        return Err(Error::Config("r0 must lie in (0, 1]".into()));
    }
    let mut r = r0;
    while r >= T::lit(1e-4) {
        let model = ConvexDecayModel::assemble(law.clone(), r);
        if model.is_strictly_convex() {
            let mut m = model;
            m.finish();
            return Ok(DecayModel::Convex(m));
        }
        r = r.half();
    }
    Err(Error::Config(
        "H(x) = sqrt(x) g(sqrt(x)) is not strictly convex down to r0 = 1e-4".into(),
    ))
}

impl<T: Real> ConvexDecayModel<T> {
    fn assemble(law: FeedbackLaw<T>, r0: T) -> Self {
        let r02 = r0 * r0;
        let lo = (r02.ln() + T::lit(-23.0)).exp(); // r0^2 * 1e-10
        let n = CONJUGATE_GRID;
        let xs: Vec<T> = (0..n)
            .map(|i| {
                let f = T::of_usize(i) / T::of_usize(n - 1);
                (lo.ln() + (r02.ln() - lo.ln()) * f).exp()
            })
            .collect();
        let mut m = ConvexDecayModel {
            law,
            r0,
            xs,
            hs: Vec::new(),
            lambda_sup: T::zero(),
            simplified_route: false,
        };
        m.hs = m.xs.iter().map(|&x| m.h(x)).collect();
        m
    }

    fn is_strictly_convex(&self) -> bool {
        // secant slopes must increase strictly along the grid
        let mut prev_slope: Option<T> = None;
        for i in 1..self.xs.len() {
            let s = (self.hs[i] - self.hs[i - 1]) / (self.xs[i] - self.xs[i - 1]);
            if let Some(p) = prev_slope {
                if s <= p {
                    return false;
                }
            }
            prev_slope = Some(s);
        }
        true
    }

    fn finish(&mut self) {
        let mut sup = T::zero();
        let mut near0 = T::zero();
        for (i, &x) in self.xs.iter().enumerate() {
            let l = self.lambda_h(x);
            sup = sup.max(l);
            if i < 20 {
                near0 = near0.max(l);
            }
        }
        self.lambda_sup = sup;
        self.simplified_route = near0 < T::lit(0.999);
    }

    pub fn r0_sq(&self) -> T {
        self.r0 * self.r0
    }

    /// H(x) = sqrt(x) g(sqrt(x)) on [0, r0^2].
    pub fn h(&self, x: T) -> T {
        if x == T::zero() {
            return T::zero();
        }
        let s = x.sqrt();
        s * self.law.g(s)
    }

    /// H'(x) = (g(s) + s g'(s)) / (2 s), s = sqrt(x).
    pub fn h_prime(&self, x: T) -> T {
        debug_assert!(x > T::zero());
        let s = x.sqrt();
        (self.law.g(s) + s * self.law.g_prime(s)) / (T::lit(2.0) * s)
    }

    /// Inverse of H' on [0, r0^2] by bisection (H' is increasing there).
    pub fn h_prime_inv(&self, y: T) -> T {
        let r02 = self.r0_sq();
        if y >= self.h_prime(r02) {
            return r02;
        }
        let mut lo = T::lit(1e-300);
        let mut hi = r02;
        for _ in 0..200 {
            let mid = (lo.ln() + hi.ln()).half().exp();
            if self.h_prime(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= T::lit(1e-15) * hi {
                break;
            }
        }
        (lo + hi).half()
    }

    /// Convex conjugate of the extension of H by +infinity outside [0, r0^2]:
    /// grid argmax of x y - H(x) plus golden-section refinement, with the
    /// boundary x = r0^2 handled explicitly (the sup sits there whenever
    /// y >= H'(r0^2)).
    pub fn hstar(&self, y: T) -> T {
        if y <= T::zero() {
            return T::zero();
        }
        let r02 = self.r0_sq();
        let boundary = r02 * y - self.h(r02);
        if y >= self.h_prime(r02) {
            return boundary;
        }
        let mut best_i = 0usize;
        let mut best = T::zero(); // x = 0 gives 0
        for (i, (&x, &hx)) in self.xs.iter().zip(&self.hs).enumerate() {
            let v = x * y - hx;
            if v > best {
                best = v;
                best_i = i;
            }
        }
        let lo = if best_i == 0 { T::zero() } else { self.xs[best_i - 1] };
        let hi = if best_i + 1 < self.xs.len() { self.xs[best_i + 1] } else { r02 };
        let phi = T::lit(0.618_033_988_749_894_9);
        let f = |x: T| x * y - self.h(x);
        let (mut a, mut b) = (lo, hi);
        let mut x1 = b - phi * (b - a);
        let mut x2 = a + phi * (b - a);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..120 {
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (b - a);
                f2 = f(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - phi * (b - a);
                f1 = f(x1);
            }
            if b - a <= T::lit(1e-14) * (T::one() + b) {
                break;
            }
        }
        best.max(f1).max(f2).max(boundary)
    }

    /// L(y) = Hstar(y)/y with L(0) = 0; continuous increasing onto [0, r0^2).
    pub fn l(&self, y: T) -> T {
        if y <= T::zero() {
            T::zero()
        } else {
            self.hstar(y) / y
        }
    }

    /// Monotone inverse of L by bisection with an expanding bracket.
    pub fn l_inv(&self, target: T) -> Result<T> {
        let r02 = self.r0_sq();
        if target < T::zero() || target >= r02 {
            return Err(Error::Domain(format!(
                "L^{{-1}} defined on [0, r0^2) = [0, {r02}), got {target}"
            )));
        }
        if target == T::zero() {
            return Ok(T::zero());
        }
        let mut hi = self.h_prime(r02);
        let mut guard = 0;
        while self.l(hi) < target {
            hi *= T::lit(4.0);
            guard += 1;
            if guard > 600 {
                return Err(Error::Numerical("L^{-1} bracket expansion failed".into()));
            }
        }
        let mut lo = T::zero();
        for _ in 0..200 {
            let mid = (lo + hi).half();
            if self.l(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= T::lit(1e-14) * hi.max(T::one()) {
                break;
            }
        }
        Ok((lo + hi).half())
    }

    /// Lambda_H(x) = H(x) / (x H'(x)), valued in [0, 1] on (0, r0^2].
    pub fn lambda_h(&self, x: T) -> T {
        debug_assert!(x > T::zero());
        self.h(x) / (x * self.h_prime(x))
    }

    /// psi_0(x) = 1/H'(r0^2) + int_{1/x}^{H'(r0^2)} dy / (y^2 (1 - Lambda_H((H')^{-1}(y))))
    /// evaluated through the substitution u = 1/y, valid for x >= 1/H'(r0^2).
    pub fn psi0(&self, x: T) -> Result<T> {
        let hp = self.h_prime(self.r0_sq());
        let lo = hp.recip();
        if x < lo * (T::one() - T::lit(1e-12)) {
            return Err(Error::Domain("psi0 defined for x >= 1/H'(r0^2)".into()));
        }
        if x <= lo {
            return Ok(lo);
        }
        let f = |u: T| {
            let xi = self.h_prime_inv(u.recip());
            (T::one() - self.lambda_h(xi)).recip()
        };
        let integral = adaptive_simpson(&f, lo, x, T::lit(1e-10) * (x - lo).max(T::one()));
        Ok(lo + integral)
    }

    /// Inverse of psi0 by bisection with an expanding bracket.
    pub fn psi0_inv(&self, tau: T) -> Result<T> {
        let hp = self.h_prime(self.r0_sq());
        let lo0 = hp.recip();
        if tau < lo0 {
            return Err(Error::Domain("psi0^{-1} defined for tau >= 1/H'(r0^2)".into()));
        }
        let mut hi = lo0 * T::lit(2.0);
        let mut guard = 0;
        while self.psi0(hi)? < tau {
            hi *= T::lit(2.0);
            guard += 1;
            if guard > 500 {
                return Err(Error::Numerical("psi0 bracket expansion failed".into()));
            }
        }
        let mut lo = lo0;
        for _ in 0..100 {
            let mid = (lo + hi).half();
            if self.psi0(mid)? < tau {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= T::lit(1e-12) * hi {
                break;
            }
        }
        Ok((lo + hi).half())
    }

    /// Decay envelope 2 gamma L(1/psi0^{-1}(t/m)) for t >= m/H'(r0^2);
    /// `None` below the validity threshold.
    pub fn envelope(&self, t: T, gamma: T, m: T) -> Result<Option<T>> {
        let hp = self.h_prime(self.r0_sq());
        if t < m / hp {
            return Ok(None);
        }
        let x = self.psi0_inv(t / m)?;
        Ok(Some(T::lit(2.0) * gamma * self.l(x.recip())))
    }

    /// Simplified envelope 2 gamma (H')^{-1}(kappa m / t) for the
    /// limsup Lambda_H < 1 route.
    pub fn simplified_envelope(&self, t: T, gamma: T, m: T, kappa: T) -> Option<T> {
        let hp = self.h_prime(self.r0_sq());
        let arg = kappa * m / t;
        if arg > hp {
            return None;
        }
        Some(T::lit(2.0) * gamma * self.h_prime_inv(arg))
    }

    /// Structural lower bound on gamma: E(0) / (2 L(H'(r0^2))).
    pub fn gamma_floor(&self, e0: T) -> T {
        e0 / (T::lit(2.0) * self.l(self.h_prime(self.r0_sq())))
    }
}

/// Evaluate the envelope on a time grid (entries below the validity
/// threshold stay `None`).
pub fn predict_envelope<T: Real>(
    model: &ConvexDecayModel<T>,
    gamma: T,
    m: T,
    times: &[T],
) -> Result<Vec<Option<T>>> {
    times.iter().map(|&t| model.envelope(t, gamma, m)).collect()
}

// ---------------------------------------------------------------------------
// Trace fitting
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitFamily {
    /// ln E against t
    Exponential,
    /// ln E against ln t over the final time-decade
    PowerLaw,
}

#[derive(Clone, Debug)]
pub struct DecayFit<T> {
    pub family: FitFamily,
    /// decay rate (exponential) or log-log slope (power law)
    pub value: T,
    pub r_squared: T,
    pub window: (T, T),
}

/// Least-squares fit of the decay law over the asymptotic window.
pub fn fit_decay_rate<T: Real>(
    trace: &EnergyTrace<T>,
    family: FitFamily,
    window: Option<(T, T)>,
) -> Result<DecayFit<T>> {
    let e0 = trace.initial_energy();
    if !(e0 > T::zero()) {
        return Err(Error::Config("cannot fit a zero-energy trace".into()));
    }
    let t_end = trace.final_time();
    let drop = e0 / trace.energy.last().copied().unwrap().max(T::lit(1e-300));
    if drop < T::lit(1e3) {
        return Err(Error::Config(format!(
            "trace too short: energy dropped only {drop:.2}x, need >= 1000x"
        )));
    }
    let (w_lo, w_hi) = window.unwrap_or(match family {
        FitFamily::Exponential => (T::zero(), t_end),
        FitFamily::PowerLaw => (t_end / T::lit(10.0), t_end),
    });
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &e) in trace.times.iter().zip(&trace.energy) {
        if t < w_lo || t > w_hi || e <= T::lit(1e-13) * e0 {
            continue;
        }
        match family {
            FitFamily::Exponential => {
                xs.push(t);
                ys.push(e.ln());
            }
            FitFamily::PowerLaw => {
                if t > T::zero() {
                    xs.push(t.ln());
                    ys.push(e.ln());
                }
            }
        }
    }
    if xs.len() < 16 {
        return Err(Error::Config("fit window holds too few samples".into()));
    }
    let n = T::of_usize(xs.len());
    let mx = xs.iter().copied().fold(T::zero(), |a, b| a + b) / n;
    let my = ys.iter().copied().fold(T::zero(), |a, b| a + b) / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    let mut syy = T::zero();
    for (&x, &y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy > T::zero() { sxy * sxy / (sxx * syy) } else { T::one() };
    let value = match family {
        FitFamily::Exponential => -slope,
        FitFamily::PowerLaw => slope,
    };
    Ok(DecayFit { family, value, r_squared: r2, window: (w_lo, w_hi) })
}

// ---------------------------------------------------------------------------
// Integral inequality and envelope calibration
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct IntegralReport<T> {
    /// smallest M such that int_S^T L^{-1}(E/2 gamma) E dt <= M E(S) over the
    /// sampled S
    pub m_empirical: T,
    /// the sampled (S, int/E(S)) pairs
    pub samples: Vec<(T, T)>,
}

/// Evaluate the weighted integral inequality along a damped trace.
pub fn verify_integral_inequality<T: Real>(
    trace: &EnergyTrace<T>,
    model: &ConvexDecayModel<T>,
    gamma: T,
) -> Result<IntegralReport<T>> {
    let e0 = trace.initial_energy();
    if gamma < model.gamma_floor(e0) {
        return Err(Error::Config(
            "gamma must be at least E(0) / (2 L(H'(r0^2)))".into(),
        ));
    }
    let n = trace.times.len();
    // running weight values w(t) = L^{-1}(E(t)/(2 gamma))
    let mut w = Vec::with_capacity(n);
    for &e in &trace.energy {
        w.push(model.l_inv(e / (T::lit(2.0) * gamma))?);
    }
    // cumulative integral of w E from the right
    let dt = trace.times[1] - trace.times[0];
    let mut tail = vec![T::zero(); n];
    for k in (0..n - 1).rev() {
        let f0 = w[k] * trace.energy[k];
        let f1 = w[k + 1] * trace.energy[k + 1];
        tail[k] = tail[k + 1] + (f0 + f1).half() * dt;
    }
    let mut m_emp = T::zero();
    let mut samples = Vec::new();
    let stride = (n / 40).max(1);
    for k in (0..n).step_by(stride) {
        let es = trace.energy[k];
        if es <= T::lit(1e-10) * e0 {
            break;
        }
        let q = tail[k] / es;
        samples.push((trace.times[k], q));
        m_emp = m_emp.max(q);
    }
    Ok(IntegralReport { m_empirical: m_emp, samples })
}

#[derive(Clone, Debug)]
pub struct CalibratedEnvelope<T> {
    pub gamma: T,
    pub m: T,
    /// true if the calibrated envelope dominates the trace on its validity range
    pub dominates: bool,
}

/// Calibrate (gamma, M): gamma sits just above its structural floor, M starts
/// from the empirical integral-inequality constant and grows (geometrically)
/// until the envelope dominates the trace.
pub fn calibrate_envelope<T: Real>(
    trace: &EnergyTrace<T>,
    model: &ConvexDecayModel<T>,
) -> Result<CalibratedEnvelope<T>> {
    let e0 = trace.initial_energy();
    let gamma = model.gamma_floor(e0) * (T::one() + T::lit(1e-6));
    let report = verify_integral_inequality(trace, model, gamma)?;
    let mut m = report.m_empirical.max(T::lit(1e-12));
    for _ in 0..200 {
        if envelope_dominates(trace, model, gamma, m)? {
            return Ok(CalibratedEnvelope { gamma, m, dominates: true });
        }
        m *= T::lit(1.1);
    }
    Ok(CalibratedEnvelope { gamma, m, dominates: false })
}

fn envelope_dominates<T: Real>(
    trace: &EnergyTrace<T>,
    model: &ConvexDecayModel<T>,
    gamma: T,
    m: T,
) -> Result<bool> {
    let hp = model.h_prime(model.r0_sq());
    let t_min = m / hp;
    let stride = (trace.times.len() / 400).max(1);
    for k in (0..trace.times.len()).step_by(stride) {
        let t = trace.times[k];
        if t < t_min {
            continue;
        }
        if let Some(env) = model.envelope(t, gamma, m)? {
            if trace.energy[k] > env * (T::one() + T::lit(1e-9)) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
