//! Small quadrature kit: Gauss-Legendre rules and adaptive Simpson.

use crate::scalar::Real;

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1],
/// computed by Newton iteration on the Legendre polynomial.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1);
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = T::of_usize(n);
    for i in 0..(n + 1) / 2 {
        // Chebyshev-like initial guess
        let guess =
            (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut x = T::lit(guess);
        let mut pp = T::zero();
        for _ in 0..100 {
            // evaluate P_n and P_n' by the three-term recurrence
            let mut p0 = T::one();
            let mut p1 = x;
            for k in 2..=n {
                let kf = T::of_usize(k);
                let p2 = ((T::lit(2.0) * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { p1 } else { p1 };
            pp = nf * (x * p1 - p0) / (x * x - T::one());
            let dx = p / pp;
            x -= dx;
            if dx.abs() <= T::epsilon() * (T::one() + x.abs()) {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = T::lit(2.0) / ((T::one() - x * x) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Integrate `f` over [a, b] with an n-point Gauss rule split into `panels`.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, n: usize, panels: usize) -> T {
    let (xs, ws) = gauss_legendre::<T>(n);
    let mut total = T::zero();
    let width = (b - a) / T::of_usize(panels);
    for p in 0..panels {
        let lo = a + width * T::of_usize(p);
        let mid = lo + width.half();
        let half = width.half();
        let mut s = T::zero();
        for (&x, &w) in xs.iter().zip(&ws) {
            s += w * f(mid + half * x);
        }
        total += s * half;
    }
    total
}

/// Adaptive Simpson quadrature to the given absolute tolerance.
pub fn adaptive_simpson<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, tol: T) -> T {
    fn simpson<T: Real, F: Fn(T) -> T>(f: &F, a: T, fa: T, b: T, fb: T) -> (T, T, T) {
        let m = (a + b).half();
        let fm = f(m);
        let s = (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb);
        (m, fm, s)
    }
    fn rec<T: Real, F: Fn(T) -> T>(
        f: &F,
        a: T,
        fa: T,
        b: T,
        fb: T,
        s: T,
        m: T,
        fm: T,
        tol: T,
        depth: usize,
    ) -> T {
        let (ml, fml, sl) = simpson(f, a, fa, m, fm);
        let (mr, fmr, sr) = simpson(f, m, fm, b, fb);
        let err = sl + sr - s;
        if depth == 0 || err.abs() <= T::lit(15.0) * tol {
            sl + sr + err / T::lit(15.0)
        } else {
            rec(f, a, fa, m, fm, sl, ml, fml, tol.half(), depth - 1)
                + rec(f, m, fm, b, fb, sr, mr, fmr, tol.half(), depth - 1)
        }
    }
    if a == b {
        return T::zero();
    }
    let fa = f(a);
    let fb = f(b);
    let (m, fm, s) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, s, m, fm, tol, 48)
}

/// Trapezoid rule over uniformly sampled values with spacing `dt`.
pub fn trapezoid<T: Real>(values: &[T], dt: T) -> T {
    if values.len() < 2 {
        return T::zero();
    }
    let mut s = (values[0] + values[values.len() - 1]).half();
    for v in &values[1..values.len() - 1] {
        s += *v;
    }
    s * dt
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_polynomials_exactly() {
        // 8-point rule is exact through degree 15
        let v: f64 = integrate(|x: f64| x.powi(14), -1.0, 1.0, 8, 1);
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_smooth_function() {
        let v: f64 = integrate(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 16, 2);
        assert!((v - 2.0).abs() < 1e-13);
    }

    #[test]
    fn simpson_adaptive_sqrt_singularity_split() {
        // integrable but steep near 0
        let f = |x: f64| x.sqrt();
        let v = adaptive_simpson(&f, 0.0, 1.0, 1e-12);
        assert!((v - 2.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn trapezoid_linear_exact() {
        let vals: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        assert!((trapezoid(&vals, 0.1) - 5.0).abs() < 1e-14);
    }
}
