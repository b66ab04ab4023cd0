//! First eigenpair of the degenerate Sturm-Liouville problem
//! -(x^theta y')' = lambda y on (0,1), weighted Neumann at 0, Dirichlet at 1,
//! for theta in [1, 2), and the separated eigen-solution used to certify
//! upper bounds on the observability constant.

use crate::bessel::{bessel_j, bessel_j_prime, first_bessel_zero, ln_gamma, BesselOrder};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// First eigenpair of the power-weight problem.
#[derive(Clone, Debug)]
pub struct EigenPair<T> {
    pub theta: T,
    /// nu = (theta - 1)/(2 - theta)
    pub nu: T,
    /// kappa = (2 - theta)/2
    pub kappa: T,
    /// first zero of J_nu
    pub j_nu: T,
    /// lambda = kappa^2 j_nu^2
    pub lambda: T,
    /// L^2-normalization constant sqrt(2 kappa)/|J'_nu(j_nu)|
    pub norm_const: T,
}

impl<T: Real> EigenPair<T> {
    /// y_theta(x) = C x^{(1-theta)/2} J_nu(j_nu x^kappa); the x -> 0 limit is
    /// finite because the two singular factors cancel exactly.
    pub fn eval(&self, x: T) -> T {
        assert!(x >= T::zero() && x <= T::one());
        if x == T::zero() {
            // C (j/2)^nu / Gamma(nu+1)
            let log_lim = self.nu * (self.j_nu.half()).ln() - ln_gamma(self.nu + T::one());
            return self.norm_const * log_lim.exp();
        }
        let arg = self.j_nu * x.powf(self.kappa);
        self.norm_const
            * x.powf((T::one() - self.theta).half())
            * bessel_j(BesselOrder::new(self.nu).unwrap(), arg)
    }

    pub fn sample(&self, xs: &[T]) -> Vec<T> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }

    /// L^2(0,1) norm of the eigenfunction by quadrature, using the
    /// substitution s = x^kappa that removes the singular factor:
    /// int y^2 dx = (2 / J'^2) int_0^1 s J_nu(j s)^2 ds.
    pub fn l2_norm_quadrature(&self) -> T {
        let nu = BesselOrder::new(self.nu).unwrap();
        let jp = bessel_j_prime(nu, self.j_nu).abs();
        let j = self.j_nu;
        let integral = crate::quadrature::integrate(
            |s: T| {
                let b = bessel_j(nu, j * s);
                s * b * b
            },
            T::zero(),
            T::one(),
            32,
            8,
        );
        (T::lit(2.0) / (jp * jp) * integral).sqrt()
    }
}

/// Compute the first eigenpair for theta in [1, 2).
pub fn first_eigenpair<T: Real>(theta: T) -> Result<EigenPair<T>> {
    if !(theta >= T::one() && theta < T::lit(2.0)) {
        return Err(Error::Domain(format!(
            "first eigenpair defined for theta in [1,2), got {theta}"
        )));
    }
    let two = T::lit(2.0);
    let nu = (theta - T::one()) / (two - theta);
    let kappa = (two - theta).half();
    let order = BesselOrder::new(nu)?;
    let j_nu = first_bessel_zero(order)?;
    let lambda = kappa * kappa * j_nu * j_nu;
    let jp = bessel_j_prime(order, j_nu).abs();
    let norm_const = (two * kappa).sqrt() / jp;
    Ok(EigenPair { theta, nu, kappa, j_nu, lambda, norm_const })
}

/// The separated solution u(t,x) = sin(sqrt(lambda) t) y(x) of the
/// conservative problem, i.e. initial data (0, sqrt(lambda) y), together with
/// the closed forms of its boundary-trace quotient.
#[derive(Clone, Debug)]
pub struct EigenSolution<T> {
    pub pair: EigenPair<T>,
    pub u0: Vec<T>,
    pub u1: Vec<T>,
}

pub fn eigen_solution<T: Real>(theta: T, xs: &[T]) -> Result<EigenSolution<T>> {
    let pair = first_eigenpair(theta)?;
    let y = pair.sample(xs);
    let s = pair.lambda.sqrt();
    let u1 = y.iter().map(|&yi| s * yi).collect();
    Ok(EigenSolution { pair, u0: vec![T::zero(); xs.len()], u1 })
}

impl<T: Real> EigenSolution<T> {
    /// Closed form of int_0^T u_x(t,1)^2 dt / E(0) for the phase-zero
    /// solution sin(sqrt(lambda) t) y(x):
    /// 2 T kappa (1 - sin(2 sqrt(lambda) T)/(2 sqrt(lambda) T)).
    pub fn closed_form_quotient(&self, t_final: T) -> T {
        let om = self.pair.lambda.sqrt();
        let z = T::lit(2.0) * om * t_final;
        T::lit(2.0) * t_final * self.pair.kappa * (T::one() - z.sin() / z)
    }

    /// Sharpened closed form over the phase family sin(sqrt(lambda) t + phi):
    /// minimizing the quotient over phi gives
    /// 2 kappa (T - |sin(sqrt(lambda) T)| / sqrt(lambda)),
    /// which is strictly below (2 - theta) T whenever sin != 0. This is the
    /// certified upper bound used in the blow-up sweep.
    pub fn optimized_quotient(&self, t_final: T) -> T {
        let om = self.pair.lambda.sqrt();
        T::lit(2.0) * self.pair.kappa * (t_final - (om * t_final).sin().abs() / om)
    }

    /// Initial phase realizing [`Self::optimized_quotient`]: the quotient of
    /// u = sin(om t + phi) y equals 2 kappa (T - cos(om T + 2 phi) sin(om T)/om)
    /// maximized ... minimized when cos(om T + 2 phi) = sign(sin(om T)).
    pub fn optimal_phase(&self, t_final: T) -> T {
        let om = self.pair.lambda.sqrt();
        let target = if (om * t_final).sin() >= T::zero() {
            T::zero()
        } else {
            T::lit(std::f64::consts::PI)
        };
        // cos(om T + 2 phi) = cos(target)
        (target - om * t_final).half()
    }

    /// Initial data (u, u_t)(0) for the phase-shifted solution.
    pub fn phased_initial_data(&self, phi: T) -> (Vec<T>, Vec<T>) {
        let om = self.pair.lambda.sqrt();
        let y: Vec<T> = self.u1.iter().map(|&v| v / om).collect();
        let u0 = y.iter().map(|&yi| phi.sin() * yi).collect();
        let u1 = y.iter().map(|&yi| om * phi.cos() * yi).collect();
        (u0, u1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{apply_operator, Grid};
    use crate::weights::Weight;
    use approx::assert_relative_eq;

    #[test]
    fn eigenvalue_theta_one() {
        // nu = 0, kappa = 1/2, lambda = j_0^2 / 4 (j_0 from the zero finder,
        // itself pinned against the independent oracle in the bessel tests)
        let p = first_eigenpair(1.0f64).unwrap();
        assert_eq!(p.nu, 0.0);
        assert_eq!(p.kappa, 0.5);
        assert_relative_eq!(p.lambda, 2.404825557695773f64.powi(2) / 4.0, max_relative = 1e-12);
        assert!((p.lambda - 1.4458).abs() < 1e-4);
    }

    #[test]
    fn eigenvalue_theta_three_halves() {
        // nu = 1, kappa = 1/4, lambda = j_1^2/16
        let p = first_eigenpair(1.5f64).unwrap();
        assert_eq!(p.nu, 1.0);
        assert_eq!(p.kappa, 0.25);
        assert_relative_eq!(p.lambda, 3.8317059702075125f64.powi(2) / 16.0, max_relative = 1e-12);
    }

    #[test]
    fn domain_is_enforced() {
        assert!(first_eigenpair(0.9f64).is_err());
        assert!(first_eigenpair(2.0f64).is_err());
    }

    #[test]
    fn eigenfunction_vanishes_at_right_end() {
        for &theta in &[1.0f64, 1.5, 1.8, 1.95] {
            let p = first_eigenpair(theta).unwrap();
            assert!(p.eval(1.0).abs() < 1e-10, "theta={theta}: y(1)={}", p.eval(1.0));
        }
    }

    #[test]
    fn eigenfunction_is_normalized() {
        for &theta in &[1.0f64, 1.5, 1.9] {
            let p = first_eigenpair(theta).unwrap();
            let norm = p.l2_norm_quadrature();
            assert!((norm - 1.0).abs() < 1e-6, "theta={theta}: |y| = {norm}");
        }
    }

    #[test]
    fn eigenfunction_finite_at_origin() {
        let p = first_eigenpair(1.5f64).unwrap();
        let v0 = p.eval(0.0);
        assert!(v0.is_finite());
        // continuity: the limit matches tiny arguments (the leading series
        // correction scales like x^{2 kappa} = sqrt(x) here)
        assert_relative_eq!(p.eval(1e-14), v0, max_relative = 1e-6);
    }

    #[test]
    fn discrete_residual_second_order_on_truncated_domain() {
        // residual of -(x^theta y')' - lambda y on [delta, 1], flux form with
        // exact coefficient samples; order >= 1.8 in the grid spacing
        let theta = 1.5f64;
        let p = first_eigenpair(theta).unwrap();
        // the asymptotic order shows once h << delta
        let delta = 1e-3;
        let mut norms = Vec::new();
        let grids = [3200usize, 6400, 12800];
        for &m in &grids {
            let h = (1.0 - delta) / m as f64;
            let xs: Vec<f64> = (0..=m).map(|i| delta + i as f64 * h).collect();
            let y: Vec<f64> = xs.iter().map(|&x| p.eval(x)).collect();
            let mut ss = 0.0;
            for i in 1..m {
                let am = (0.5 * (xs[i - 1] + xs[i])).powf(theta);
                let ap = (0.5 * (xs[i] + xs[i + 1])).powf(theta);
                let lap = (ap * (y[i + 1] - y[i]) - am * (y[i] - y[i - 1])) / (h * h);
                let r = -lap - p.lambda * y[i];
                ss += r * r * h;
            }
            norms.push(ss.sqrt() / p.lambda);
        }
        let slope1 = (norms[0] / norms[1]).log2();
        let slope2 = (norms[1] / norms[2]).log2();
        assert!(
            slope1 > 1.8 && slope2 > 1.8,
            "slopes {slope1:.2}, {slope2:.2}, norms {norms:?}"
        );
    }

    #[test]
    fn operator_matches_eigen_equation_on_unit_grid() {
        // Au ~ -lambda u at interior nodes, O(h^2) in the weighted L2 norm
        let theta = 1.0f64;
        let p = first_eigenpair(theta).unwrap();
        let w = Weight::pure_power(theta).unwrap();
        let mut errs = Vec::new();
        for &n in &[200usize, 400] {
            let g = Grid::new(&w, n).unwrap();
            let y = p.sample(&g.nodes);
            let ay = apply_operator(&g, &y).unwrap();
            let mut ss = 0.0;
            // skip the first interior node where the singular coordinate
            // factor dominates the truncation error
            for i in 2..n {
                let r = ay[i] + p.lambda * y[i];
                ss += r * r * g.h;
            }
            errs.push(ss.sqrt() / p.lambda);
        }
        assert!(errs[1] < errs[0] / 2.0, "errs {errs:?}");
        assert!(errs[1] < 0.05);
    }

    #[test]
    fn closed_form_quotient_values() {
        // ratio -> (2 - theta) T as T -> infinity (sinc -> 0), and the
        // optimized variant is strictly below (2 - theta) T
        let xs: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        for &theta in &[1.0f64, 1.5] {
            let sol = eigen_solution(theta, &xs).unwrap();
            let big_t = 1e6;
            let cf = sol.closed_form_quotient(big_t);
            assert_relative_eq!(cf, (2.0 - theta) * big_t, max_relative = 1e-5);
            for &t in &[1.0, 2.5, 10.0] {
                assert!(sol.optimized_quotient(t) < (2.0 - theta) * t);
            }
        }
    }

    #[test]
    fn phased_data_has_energy_lambda_over_two_shape() {
        let xs: Vec<f64> = (0..=400).map(|i| i as f64 / 400.0).collect();
        let sol = eigen_solution(1.5f64, &xs).unwrap();
        let (u0, u1) = sol.phased_initial_data(0.0);
        assert!(u0.iter().all(|&x| x == 0.0));
        assert_relative_eq!(u1[200], sol.u1[200], max_relative = 1e-14);
    }
}
