//! Closed-loop characteristic polynomial, two-time-scale root grouping
//! against the slow/fast limit polynomials, and the robust-stability
//! verdict.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DobError, Result};
use crate::poly::{is_hurwitz, Polynomial, RationalFunction};
use crate::qfilter::QFilterSpec;

/// Limit roots with real part inside this band make the verdict
/// indeterminate.
pub const TOL_BOUNDARY: f64 = 1e-6;

/// The five loop transfer functions, with the Q-filters kept as specs so
/// the bandwidth can be swept.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoopFactors {
    pub plant: RationalFunction,
    pub nominal: RationalFunction,
    pub controller: RationalFunction,
    pub qa: QFilterSpec,
    pub qb: QFilterSpec,
}

impl LoopFactors {
    pub fn new(
        plant: RationalFunction,
        nominal: RationalFunction,
        controller: RationalFunction,
        qa: QFilterSpec,
        qb: QFilterSpec,
    ) -> Result<Self> {
        if !plant.is_strictly_proper() || !nominal.is_strictly_proper() {
            return Err(DobError::Shape(
                "P and P_n must be strictly proper".into(),
            ));
        }
        if !controller.is_proper() {
            return Err(DobError::Shape("C must be proper".into()));
        }
        let nn = nominal.num();
        if nn.degree() >= 1 && !is_hurwitz(nn)?.stable {
            return Err(DobError::Precondition(
                "P_n must be minimum phase (unstable cancellation in P_n^{-1} Q_B)".into(),
            ));
        }
        Ok(LoopFactors {
            plant,
            nominal,
            controller,
            qa,
            qb,
        })
    }

    /// `N (N_n N_c D_b + D_n D_c N_b) D_a + N_n D D_c D_b (D_a - N_a)`
    /// with the Q-filter polynomials composed at the given bandwidth.
    pub fn characteristic_polynomial(&self, tau: f64) -> Result<Polynomial> {
        if !(tau > 0.0) {
            return Err(DobError::Precondition(format!("tau must be positive, got {tau}")));
        }
        let n = self.plant.num();
        let d = self.plant.den();
        let nn = self.nominal.num();
        let dn = self.nominal.den();
        let nc = self.controller.num();
        let dc = self.controller.den();
        let na = self.qa.num_poly(tau)?;
        let da = self.qa.den_poly(tau)?;
        let nb = self.qb.num_poly(tau)?;
        let db = self.qb.den_poly(tau)?;

        let term1 = &(n * &(&(&(nn * nc) * &db) + &(&(dn * dc) * &nb))) * &da;
        let term2 = &(&(&(nn * d) * dc) * &db) * &(&da - &na);
        Ok(&term1 + &term2)
    }

    /// High-frequency gain mismatch `gamma = lim P P_n^{-1} - 1`,
    /// well-defined only when P and P_n share the same relative degree.
    pub fn gamma(&self) -> Result<f64> {
        if self.plant.relative_degree() != self.nominal.relative_degree() {
            return Err(DobError::UnmodelledDynamics(format!(
                "relative degree mismatch: P has {}, P_n has {}",
                self.plant.relative_degree(),
                self.nominal.relative_degree()
            )));
        }
        let g = self.plant.num().leading() / self.plant.den().leading();
        let g_n = self.nominal.num().leading() / self.nominal.den().leading();
        Ok(g / g_n - 1.0)
    }

    /// Slow and fast limit polynomials:
    /// A1 = N (D_n D_c + N_n N_c), A2 = D_b^1 (D_a^1 + gamma N_a^1),
    /// where the superscript 1 sets tau = 1.
    pub fn limit_groups(&self) -> Result<LimitGroups> {
        let gamma = self.gamma()?;
        let a1 = self.plant.num()
            * &(&(self.nominal.den() * self.controller.den())
                + &(self.nominal.num() * self.controller.num()));
        let da1 = self.qa.den_poly(1.0)?;
        let na1 = self.qa.num_poly(1.0)?;
        let db1 = self.qb.den_poly(1.0)?;
        let a2 = &db1 * &(&da1 + &na1.scale(gamma));
        Ok(LimitGroups { a1, a2, gamma })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitGroups {
    pub a1: Polynomial,
    pub a2: Polynomial,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    RobustlyStableForSmallTau,
    UnstableLimit,
    IndeterminateBoundary,
}

/// A condition verdict together with its stability margin.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub holds: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub tau: f64,
    pub delta: Polynomial,
    pub delta_roots: Vec<Complex64>,
    pub slow_group: Vec<Complex64>,
    /// Fast roots multiplied by tau.
    pub fast_group_scaled: Vec<Complex64>,
    pub a1_roots: Vec<Complex64>,
    pub a2_roots: Vec<Complex64>,
    /// Max distance of the slow group to its A1 targets.
    pub slow_distance: f64,
    /// Max distance of the scaled fast group to its A2 targets.
    pub fast_distance: f64,
    pub cond_a: ConditionVerdict,
    pub cond_b: ConditionVerdict,
    pub cond_c: ConditionVerdict,
    pub verdict: Verdict,
    /// Whether Delta itself is Hurwitz at this tau.
    pub delta_hurwitz: bool,
}

/// Hurwitz check that treats degree-0 polynomials as trivially stable.
fn hurwitz_or_trivial(p: &Polynomial) -> Result<ConditionVerdict> {
    if p.is_zero() {
        return Ok(ConditionVerdict {
            holds: false,
            margin: f64::NEG_INFINITY,
        });
    }
    if p.degree() == 0 {
        return Ok(ConditionVerdict {
            holds: true,
            margin: f64::INFINITY,
        });
    }
    let rep = is_hurwitz(p)?;
    Ok(ConditionVerdict {
        holds: rep.stable,
        margin: rep.margin,
    })
}

/// Greedy nearest-neighbor assignment of `targets.len()` points to the
/// targets; returns the matched point indices and the max matched distance.
fn greedy_match(points: &[Complex64], targets: &[Complex64]) -> (Vec<usize>, f64) {
    let k = targets.len().min(points.len());
    let mut used_p = vec![false; points.len()];
    let mut used_t = vec![false; targets.len()];
    let mut picked = Vec::with_capacity(k);
    let mut max_dist: f64 = 0.0;
    for _ in 0..k {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            if used_p[i] {
                continue;
            }
            for (j, t) in targets.iter().enumerate() {
                if used_t[j] {
                    continue;
                }
                let d = (p - t).norm();
                if d < best.2 {
                    best = (i, j, d);
                }
            }
        }
        used_p[best.0] = true;
        used_t[best.1] = true;
        picked.push(best.0);
        max_dist = max_dist.max(best.2);
    }
    (picked, max_dist)
}

/// Root-group the characteristic polynomial over a descending tau sweep.
pub fn root_grouping(factors: &LoopFactors, taus: &[f64]) -> Result<Vec<StabilityReport>> {
    if taus.is_empty() || taus.iter().any(|t| *t <= 0.0) {
        return Err(DobError::Precondition(
            "tau sweep must be nonempty and positive".into(),
        ));
    }
    if taus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(DobError::Precondition("tau sweep must be descending".into()));
    }
    let limits = factors.limit_groups()?;
    let a1_roots = if limits.a1.degree() >= 1 {
        limits.a1.roots()?
    } else {
        vec![]
    };
    let a2_roots = if limits.a2.degree() >= 1 {
        limits.a2.roots()?
    } else {
        vec![]
    };
    let cond_a = hurwitz_or_trivial(factors.plant.num())?;
    let cond_b = hurwitz_or_trivial(
        &(&(factors.nominal.den() * factors.controller.den())
            + &(factors.nominal.num() * factors.controller.num())),
    )?;
    let da1 = factors.qa.den_poly(1.0)?;
    let na1 = factors.qa.num_poly(1.0)?;
    let cond_c = hurwitz_or_trivial(&(&da1 + &na1.scale(limits.gamma)))?;

    let boundary = a1_roots
        .iter()
        .chain(a2_roots.iter())
        .any(|r| r.re.abs() < TOL_BOUNDARY);
    let a1_ok = a1_roots.iter().all(|r| r.re < 0.0);
    let a2_ok = a2_roots.iter().all(|r| r.re < 0.0);
    let verdict = if boundary {
        Verdict::IndeterminateBoundary
    } else if a1_ok && a2_ok {
        Verdict::RobustlyStableForSmallTau
    } else {
        Verdict::UnstableLimit
    };

    let mut out = Vec::with_capacity(taus.len());
    for &tau in taus {
        let delta = factors.characteristic_polynomial(tau)?;
        let delta_roots = delta.roots()?;
        let (slow_idx, slow_distance) = greedy_match(&delta_roots, &a1_roots);
        let mut fast_scaled: Vec<Complex64> = delta_roots
            .iter()
            .enumerate()
            .filter(|(i, _)| !slow_idx.contains(i))
            .map(|(_, r)| r * tau)
            .collect();
        let (_, fast_distance) = greedy_match(&fast_scaled, &a2_roots);
        fast_scaled.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        let slow_group: Vec<Complex64> = slow_idx.iter().map(|i| delta_roots[*i]).collect();
        let delta_hurwitz = delta_roots.iter().all(|r| r.re < 0.0);
        out.push(StabilityReport {
            tau,
            delta,
            delta_roots: delta_roots.clone(),
            slow_group,
            fast_group_scaled: fast_scaled,
            a1_roots: a1_roots.clone(),
            a2_roots: a2_roots.clone(),
            slow_distance,
            fast_distance,
            cond_a,
            cond_b,
            cond_c,
            verdict,
            delta_hurwitz,
        });
    }
    Ok(out)
}
