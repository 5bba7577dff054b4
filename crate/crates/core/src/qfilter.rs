//! Q-filter specification, the fast polynomial governing the inner loop,
//! and the constructive coefficient design that keeps it Hurwitz over a
//! known high-frequency-gain interval.

use serde::{Deserialize, Serialize};

use crate::error::{DobError, Result};
use crate::poly::{is_hurwitz, Polynomial, RationalFunction};

/// Bisection bracket cap for the gain sweep; when `s rho(s) + k` is still
/// Hurwitz here the supremum is reported as capped.
pub const K_CAP: f64 = 1e6;
pub const DEFAULT_SAFETY: f64 = 0.9;
/// Margin below which a grid verification flags a boundary warning.
pub const TOL_BOUNDARY_MARGIN: f64 = 1e-3;

/// Low-pass filter pair parameters: unity dc gain, bandwidth ~ 1/tau.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QFilterSpec {
    pub tau: f64,
    pub mu: usize,
    /// a_0 .. a_(mu-1), denominator coefficients at tau = 1.
    pub a: Vec<f64>,
    /// c_0 .. c_(mu-1), numerator coefficients at tau = 1.
    pub c: Vec<f64>,
}

impl QFilterSpec {
    pub fn new(tau: f64, mu: usize, a: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(DobError::Precondition(format!("tau must be positive, got {tau}")));
        }
        if mu == 0 || a.len() != mu || c.len() != mu {
            return Err(DobError::Shape(format!(
                "expected mu >= 1 coefficient vectors of length mu = {mu}, got a: {}, c: {}",
                a.len(),
                c.len()
            )));
        }
        if (c[0] - a[0]).abs() > 1e-12 * a[0].abs().max(1.0) {
            return Err(DobError::Precondition(
                "c0 must equal a0 for unity dc gain".into(),
            ));
        }
        let spec = QFilterSpec { tau, mu, a, c };
        let den1 = spec.den_poly(1.0)?;
        if !is_hurwitz(&den1)?.stable {
            return Err(DobError::Precondition(
                "Q-filter denominator is not Hurwitz".into(),
            ));
        }
        Ok(spec)
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        QFilterSpec::new(tau, self.mu, self.a.clone(), self.c.clone())
    }

    /// Relative degree of the filter: mu minus the numerator degree.
    pub fn filter_relative_degree(&self) -> usize {
        let num_deg = self
            .c
            .iter()
            .rposition(|x| *x != 0.0)
            .unwrap_or(0);
        self.mu - num_deg
    }

    /// Check the structural constraints against a plant of relative
    /// degree `nu`.
    pub fn validate_for_plant(&self, nu: usize) -> Result<()> {
        if self.mu < nu {
            return Err(DobError::Precondition(format!(
                "Q-filter order mu = {} below plant relative degree nu = {nu}",
                self.mu
            )));
        }
        if self.filter_relative_degree() < nu {
            return Err(DobError::Precondition(format!(
                "Q-filter relative degree {} below nu = {nu}; the top {} numerator \
                 coefficients must vanish",
                self.filter_relative_degree(),
                nu.saturating_sub(1)
            )));
        }
        Ok(())
    }

    /// `(tau s)^mu + a_(mu-1) (tau s)^(mu-1) + ... + a_0`
    pub fn den_poly(&self, tau: f64) -> Result<Polynomial> {
        let mut base = self.a.clone();
        base.push(1.0);
        Polynomial::new(base).compose_scaled(tau)
    }

    /// `c_(mu-1) (tau s)^(mu-1) + ... + c_0`
    pub fn num_poly(&self, tau: f64) -> Result<Polynomial> {
        Polynomial::new(self.c.clone()).compose_scaled(tau)
    }

    /// The filter transfer function at this spec's tau.
    pub fn tf(&self) -> Result<RationalFunction> {
        RationalFunction::new(self.num_poly(self.tau)?, self.den_poly(self.tau)?)
    }

    /// Monic fast polynomial: coefficient i is `a_i + gamma c_i` with
    /// `gamma = (g - g_n)/g_n`.
    pub fn pf_polynomial(&self, g: f64, g_n: f64) -> Result<Polynomial> {
        if g_n == 0.0 {
            return Err(DobError::Precondition("nominal gain g_n must be nonzero".into()));
        }
        let gamma = (g - g_n) / g_n;
        let mut coeffs: Vec<f64> = self
            .a
            .iter()
            .zip(&self.c)
            .map(|(a, c)| a + gamma * c)
            .collect();
        coeffs.push(1.0);
        Ok(Polynomial::new(coeffs))
    }
}

/// Known bounds on the uncertain high-frequency gain, plus its nominal
/// value. Zero must not lie in the interval and all signs must agree.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GainInterval {
    pub g_min: f64,
    pub g_max: f64,
    pub g_n: f64,
}

impl GainInterval {
    pub fn new(g_min: f64, g_max: f64, g_n: f64) -> Result<Self> {
        if g_min > g_max {
            return Err(DobError::Precondition(format!(
                "empty gain interval [{g_min}, {g_max}]"
            )));
        }
        if g_min.signum() != g_max.signum()
            || g_min == 0.0
            || g_max == 0.0
            || g_n.signum() != g_min.signum()
        {
            return Err(DobError::Precondition(
                "gain interval must exclude zero and share the sign of g_n".into(),
            ));
        }
        Ok(GainInterval { g_min, g_max, g_n })
    }

    /// `max { g/g_n : g in [g_min, g_max] }` (positive by construction).
    pub fn max_ratio(&self) -> f64 {
        (self.g_min / self.g_n).max(self.g_max / self.g_n)
    }
}

/// Output of the coefficient design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignResult {
    /// a_0 .. a_(nu-1)
    pub a: Vec<f64>,
    /// Safety-scaled gain bound actually used.
    pub kbar: f64,
    /// Bisection-found supremum of admissible k (before the safety factor).
    pub k_sup: f64,
    /// True when the supremum ran into `K_CAP`.
    pub capped: bool,
}

impl DesignResult {
    /// The designed special-case spec: mu = nu, c = (a0, 0, ..., 0).
    pub fn spec(&self, tau: f64) -> Result<QFilterSpec> {
        let mut c = vec![0.0; self.a.len()];
        c[0] = self.a[0];
        QFilterSpec::new(tau, self.a.len(), self.a.clone(), c)
    }
}

/// Constructive design for the special case mu = nu, c = (a0, 0, ..., 0):
/// given Hurwitz `rho(s) = s^(nu-1) + a_(nu-1) s^(nu-2) + ... + a_1`, find
/// the largest k with `s rho(s) + k'` Hurwitz for all 0 < k' <= k, then set
/// `a_0 = safety * k / max(g/g_n)`.
pub fn design_coefficients(
    nu: usize,
    rho: &Polynomial,
    gains: &GainInterval,
    safety: f64,
) -> Result<DesignResult> {
    if nu == 0 {
        return Err(DobError::Precondition("relative degree must be >= 1".into()));
    }
    if !(0.0 < safety && safety < 1.0) {
        return Err(DobError::Precondition(format!(
            "safety factor must lie in (0, 1), got {safety}"
        )));
    }
    if rho.degree() != nu - 1 || (rho.leading() - 1.0).abs() > 1e-12 {
        return Err(DobError::Precondition(format!(
            "rho must be monic of degree nu - 1 = {}",
            nu - 1
        )));
    }
    if rho.degree() >= 1 && !is_hurwitz(rho)?.stable {
        return Err(DobError::Precondition("rho is not Hurwitz".into()));
    }

    // s * rho(s) + k
    let srho = {
        let mut c = vec![0.0];
        c.extend_from_slice(rho.coeffs());
        Polynomial::new(c)
    };
    let stable_at = |k: f64| -> Result<bool> {
        let p = &srho + &Polynomial::constant(k);
        Ok(is_hurwitz(&p)?.stable)
    };

    let tol = 1e-9;
    if !stable_at(tol)? {
        return Err(DobError::DesignInfeasible(
            "s rho(s) + k unstable already at k -> 0".into(),
        ));
    }
    // Grow until instability or the cap.
    let mut lo = tol;
    let mut hi = 1.0_f64.min(K_CAP);
    let mut capped = false;
    loop {
        if !stable_at(hi)? {
            break;
        }
        lo = hi;
        if hi >= K_CAP {
            capped = true;
            break;
        }
        hi = (hi * 4.0).min(K_CAP);
    }
    let k_sup = if capped {
        K_CAP
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if stable_at(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-9 * hi.max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    };

    let kbar = safety * k_sup;
    let a0 = kbar / gains.max_ratio();
    let mut a = vec![a0];
    for i in 0..nu - 1 {
        a.push(rho.coeff(i));
    }
    let result = DesignResult {
        a,
        kbar,
        k_sup,
        capped,
    };

    // Defensive grid verification; the root-locus argument says this
    // cannot fail for Hurwitz rho.
    let spec = result.spec(1.0)?;
    let check = verify_condition_c(&spec, gains, 101)?;
    if !check.ok {
        return Err(DobError::DesignInfeasible(format!(
            "designed a0 = {a0} fails the gain-grid verification (worst margin {})",
            check.worst_margin
        )));
    }
    Ok(result)
}

/// Grid verification of condition (C).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionCReport {
    pub ok: bool,
    /// Minimum stability margin of p_f over the grid.
    pub worst_margin: f64,
    /// Gain value achieving the worst margin.
    pub worst_g: f64,
    /// First violating gain, when any.
    pub violating_g: Option<f64>,
    /// Margin fell below `TOL_BOUNDARY_MARGIN` at an endpoint.
    pub boundary_warning: bool,
}

/// Evaluate `is_hurwitz(p_f(.; g))` over a uniform gain grid including both
/// endpoints. The p_f coefficients are affine in g, so a dense grid with a
/// margin report is adequate.
pub fn verify_condition_c(
    spec: &QFilterSpec,
    gains: &GainInterval,
    grid_points: usize,
) -> Result<ConditionCReport> {
    if grid_points < 2 {
        return Err(DobError::Precondition("grid needs at least 2 points".into()));
    }
    let mut worst_margin = f64::INFINITY;
    let mut worst_g = gains.g_min;
    let mut violating = None;
    let mut ok = true;
    let mut endpoint_margins = [f64::INFINITY; 2];
    for i in 0..grid_points {
        let frac = i as f64 / (grid_points - 1) as f64;
        let g = gains.g_min + frac * (gains.g_max - gains.g_min);
        let pf = spec.pf_polynomial(g, gains.g_n)?;
        let rep = is_hurwitz(&pf)?;
        if rep.margin < worst_margin {
            worst_margin = rep.margin;
            worst_g = g;
        }
        if !rep.stable {
            ok = false;
            if violating.is_none() {
                violating = Some(g);
            }
        }
        if i == 0 {
            endpoint_margins[0] = rep.margin;
        }
        if i == grid_points - 1 {
            endpoint_margins[1] = rep.margin;
        }
    }
    Ok(ConditionCReport {
        ok,
        worst_margin,
        worst_g,
        violating_g: violating,
        boundary_warning: endpoint_margins.iter().any(|m| *m < TOL_BOUNDARY_MARGIN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn second_order(tau: f64, a0: f64, a1: f64) -> QFilterSpec {
        QFilterSpec::new(tau, 2, vec![a0, a1], vec![a0, 0.0]).unwrap()
    }

    #[test]
    fn qab_form() {
        // mu = 2: (a0/tau^2) / (s^2 + (a1/tau) s + a0/tau^2)
        let tau = 0.1;
        let spec = second_order(tau, 2.0, 3.0);
        let tf = spec.tf().unwrap();
        let lead = tf.den().leading();
        assert_relative_eq!(tf.den().coeff(1) / lead, 3.0 / tau, epsilon = 1e-10);
        assert_relative_eq!(tf.den().coeff(0) / lead, 2.0 / (tau * tau), epsilon = 1e-10);
        assert_relative_eq!(tf.num().coeff(0) / lead, 2.0 / (tau * tau), epsilon = 1e-10);
        assert_relative_eq!(tf.dc_gain(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn first_order_unit() {
        let spec = QFilterSpec::new(1.0, 1, vec![1.0], vec![1.0]).unwrap();
        let tf = spec.tf().unwrap();
        assert_relative_eq!(tf.num().coeff(0), 1.0);
        assert_eq!(tf.den().coeffs(), &[1.0, 1.0]);
    }

    #[test]
    fn pf_special_case() {
        // mu = 2, c = (a0, 0): p_f = s^2 + a1 s + (g/g_n) a0
        let spec = second_order(1.0, 2.0, 3.0);
        let pf = spec.pf_polynomial(5.0, 2.5).unwrap();
        assert_eq!(pf.coeffs(), &[4.0, 3.0, 1.0]);
        // g = g_n reduces to the tau = 1 denominator
        let pf0 = spec.pf_polynomial(2.5, 2.5).unwrap();
        assert_eq!(pf0.coeffs(), spec.den_poly(1.0).unwrap().coeffs());
    }

    #[test]
    fn pf_derived_cubic() {
        let spec = QFilterSpec::new(1.0, 2, vec![1.0, 2.0], vec![1.0, 0.0]).unwrap();
        let pf = spec.pf_polynomial(3.0, 1.0).unwrap();
        assert_eq!(pf.coeffs(), &[3.0, 2.0, 1.0]);
        assert!(is_hurwitz(&pf).unwrap().stable);
    }

    #[test]
    fn design_nu2_caps() {
        // s rho + k = s^2 + 2s + k is Hurwitz for every k > 0.
        let gains = GainInterval::new(1.0, 3.0, 1.0).unwrap();
        let rho = Polynomial::new(vec![2.0, 1.0]);
        let res = design_coefficients(2, &rho, &gains, 0.9).unwrap();
        assert!(res.capped);
        assert_relative_eq!(res.kbar, 0.9 * K_CAP, epsilon = 1e-6);
        assert_relative_eq!(res.a[0], 0.9 * K_CAP / 3.0, max_relative = 1e-9);
        assert_relative_eq!(res.a[1], 2.0);
    }

    #[test]
    fn design_nu3_routh_bound() {
        // rho = s^2 + 2s + 2: s rho + k Hurwitz iff 0 < k < 4.
        let gains = GainInterval::new(0.5, 3.0, 1.0).unwrap();
        let rho = Polynomial::new(vec![2.0, 2.0, 1.0]);
        let res = design_coefficients(3, &rho, &gains, 0.9).unwrap();
        assert!(!res.capped);
        assert_relative_eq!(res.k_sup, 4.0, epsilon = 1e-6);
        assert_relative_eq!(res.kbar, 3.6, epsilon = 1e-6);
        assert_relative_eq!(res.a[0], 1.2, epsilon = 1e-6);
    }

    #[test]
    fn design_rejects_unstable_rho() {
        let gains = GainInterval::new(1.0, 2.0, 1.0).unwrap();
        let rho = Polynomial::new(vec![-1.0, 0.0, 1.0]); // s^2 - 1
        assert!(design_coefficients(3, &rho, &gains, 0.9).is_err());
    }

    #[test]
    fn condition_c_second_order_always_holds() {
        let spec = second_order(1.0, 0.5, 2.0);
        let gains = GainInterval::new(0.2, 5.0, 1.0).unwrap();
        let rep = verify_condition_c(&spec, &gains, 101).unwrap();
        assert!(rep.ok);
    }

    #[test]
    fn condition_c_cubic_violation_reported() {
        // p_f = s^3 + 2 s^2 + 2 s + (g/g_n) a0; Routh bound (g/g_n) a0 < 4.
        let spec = QFilterSpec::new(1.0, 3, vec![2.0, 2.0, 2.0], vec![2.0, 0.0, 0.0]).unwrap();
        let gains = GainInterval::new(0.5, 3.0, 1.0).unwrap();
        let rep = verify_condition_c(&spec, &gains, 101).unwrap();
        assert!(!rep.ok);
        let bad = rep.violating_g.unwrap();
        assert!(bad * 2.0 >= 4.0);
    }

    #[test]
    fn condition_c_degenerate_interval() {
        let spec = second_order(1.0, 1.0, 2.0);
        let gains = GainInterval::new(1.0, 1.0, 1.0).unwrap();
        let rep = verify_condition_c(&spec, &gains, 2).unwrap();
        assert!(rep.ok);
    }

    #[test]
    fn designed_spec_passes_dense_grid() {
        let gains = GainInterval::new(0.2, 5.0, 1.0).unwrap();
        let rho = Polynomial::new(vec![2.0, 2.0, 1.0]);
        let res = design_coefficients(3, &rho, &gains, 0.9).unwrap();
        let spec = res.spec(1.0).unwrap();
        let rep = verify_condition_c(&spec, &gains, 1001).unwrap();
        assert!(rep.ok);
    }

    proptest! {
        #[test]
        fn poles_scale_inverse_tau(a0 in 0.5f64..4.0, a1 in 0.5f64..4.0,
                                   tau in prop::sample::select(vec![1.0, 0.1, 0.01])) {
            let base = second_order(1.0, a0, a1);
            let unit_roots = base.den_poly(1.0).unwrap().roots().unwrap();
            let scaled_roots = base.den_poly(tau).unwrap().roots().unwrap();
            for (u, s) in unit_roots.iter().zip(&scaled_roots) {
                prop_assert!((u / tau - s).norm() < 1e-8 / tau);
            }
        }

        #[test]
        fn dc_gain_exactly_one(a0 in 0.5f64..4.0, a1 in 0.5f64..4.0, tau in 0.01f64..1.0) {
            let spec = second_order(tau, a0, a1);
            let tf = spec.tf().unwrap();
            prop_assert!((tf.eval(Complex64::new(0.0, 0.0)).re - 1.0).abs() < 1e-12);
        }
    }
}
