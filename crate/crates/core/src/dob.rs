//! State-space realization of the DOB controller: the Q_A block, the
//! inverse-nominal-times-Q_B block with its embedded high-gain observer,
//! the control law, and the saturation-protected variant.
//!
//! The block structure is written out in the paper only for the nu = 2,
//! mu = 2 case; this generalizes by the same cascade recipe (the z_n
//! dynamics driven by the filtered output estimate, u_hat from the top-row
//! derivative expression). The transfer-function fidelity invariant, not
//! the construction, is the contract.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DobError, Result};
use crate::lti::{NominalModel, SisoRealization, StateSpacePlant};
use crate::qfilter::QFilterSpec;

/// Assembled DOB controller. Immutable description; per-simulation state
/// lives with the simulation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DobRealization {
    pub nu: usize,
    pub mu: usize,
    /// Zero-dynamics dimension of the nominal model.
    pub m: usize,
    pub tau: f64,
    pub g_n: f64,
    /// Q-filter coefficients a_0..a_(mu-1) at tau = 1 (kept for the
    /// diagnostic coordinate transforms).
    pub a: Vec<f64>,
    /// mu x mu companion matrix of the Q-filter denominator at bandwidth 1/tau.
    pub a_q: DMatrix<f64>,
    /// Input vector (a_0 / tau^mu) e_mu.
    pub b_q: DVector<f64>,
    /// Output row of the Q_A block; also extracts the filtered signal v
    /// from the Q_B state.
    pub m_row: RowDVector<f64>,
    /// nu x mu rows m_row A_q^j: maps the Q_B state to the estimate of
    /// (v, v', ..., v^(nu-1)).
    pub theta: DMatrix<f64>,
    pub s_n: DMatrix<f64>,
    pub g_mat_n: DMatrix<f64>,
    pub phi_n: RowDVector<f64>,
    pub psi_n: RowDVector<f64>,
    /// u_hat = un_row_zn z_n + un_row_q q + un_feed y
    pub un_row_zn: RowDVector<f64>,
    pub un_row_q: RowDVector<f64>,
    pub un_feed: f64,
    /// Symmetric clamp applied to u before the plant and the Q_A input;
    /// `None` disables saturation.
    pub sat_level: Option<f64>,
}

/// Observer-coordinate view of the controller state (nu = 2, mu = 2 only).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticCoordinates {
    /// High-gain-observer coordinates tracking (y, y').
    pub qbar: [f64; 2],
    /// Fast coordinates; settle to zero / the scaled input term.
    pub ptilde: [f64; 2],
}

/// Assemble the controller from the nominal model and a Q-filter spec.
pub fn realize(
    nominal: &NominalModel,
    spec: &QFilterSpec,
    sat_level: Option<f64>,
) -> Result<DobRealization> {
    let nu = nominal.model.nu;
    let m = nominal.model.m;
    let mu = spec.mu;
    let tau = spec.tau;
    spec.validate_for_plant(nu)?;
    if let Some(level) = sat_level {
        if !(level > 0.0) {
            return Err(DobError::Precondition(format!(
                "saturation level must be positive, got {level}"
            )));
        }
    }
    if !nominal.model.is_minimum_phase()? {
        return Err(DobError::Realization(
            "nominal model not minimum phase: P_n^{-1} Q_B would hide an \
             unstable cancellation"
            .into(),
        ));
    }

    // Companion of the Q-filter denominator at bandwidth 1/tau:
    // s^mu + (a_(mu-1)/tau) s^(mu-1) + ... + a_0/tau^mu.
    let mut a_q = DMatrix::<f64>::zeros(mu, mu);
    for i in 0..mu - 1 {
        a_q[(i, i + 1)] = 1.0;
    }
    for j in 0..mu {
        a_q[(mu - 1, j)] = -spec.a[j] / tau.powi((mu - j) as i32);
    }
    let mut b_q = DVector::<f64>::zeros(mu);
    b_q[mu - 1] = spec.a[0] / tau.powi(mu as i32);
    // Numerator factored as (a0/tau^mu) * (1 + (c1/c0) tau s + ...).
    let mut m_row = RowDVector::<f64>::zeros(mu);
    for j in 0..mu {
        m_row[j] = spec.c[j] / spec.c[0] * tau.powi(j as i32);
    }

    let mut theta = DMatrix::<f64>::zeros(nu, mu);
    let mut row = m_row.clone();
    for j in 0..nu {
        theta.set_row(j, &row);
        row *= &a_q;
    }
    // `row` is now m_row * A_q^nu.
    let g_n = nominal.g_n();
    let phi_n = nominal.model.phi.clone();
    let psi_n = nominal.model.psi.clone();
    let un_row_q = ((&row - &(&phi_n * &theta)) / g_n).row(0).into_owned();
    let un_row_zn = (-&psi_n / g_n).row(0).into_owned();
    let mut prev = m_row.clone();
    for _ in 0..nu - 1 {
        prev *= &a_q;
    }
    // m_row A_q^(nu-1) b_q: first nonzero Markov parameter of Q_B.
    let un_feed = (&prev * &b_q)[(0, 0)] / g_n;

    Ok(DobRealization {
        nu,
        mu,
        m,
        tau,
        g_n,
        a: spec.a.clone(),
        a_q,
        b_q,
        m_row,
        theta,
        s_n: nominal.model.s.clone(),
        g_mat_n: nominal.model.g_mat.clone(),
        phi_n,
        psi_n,
        un_row_zn,
        un_row_q,
        un_feed,
        sat_level,
    })
}

impl DobRealization {
    /// Output of the Q_A block.
    pub fn y_p(&self, p: &DVector<f64>) -> f64 {
        (&self.m_row * p)[(0, 0)]
    }

    /// Output of the P_n^{-1} Q_B block.
    pub fn u_hat(&self, zn: &DVector<f64>, q: &DVector<f64>, y: f64) -> f64 {
        let zpart = if self.m > 0 {
            (&self.un_row_zn * zn)[(0, 0)]
        } else {
            0.0
        };
        zpart + (&self.un_row_q * q)[(0, 0)] + self.un_feed * y
    }

    /// Control law `u = ubar + y_p - u_hat`, returning `(u, u_applied,
    /// sat_active)`. When a saturation level is set, `u_applied` is the
    /// clamped signal that enters both the plant and the Q_A feedback path.
    pub fn control_output(
        &self,
        p: &DVector<f64>,
        zn: &DVector<f64>,
        q: &DVector<f64>,
        ubar: f64,
        y: f64,
    ) -> (f64, f64, bool) {
        let u = ubar + self.y_p(p) - self.u_hat(zn, q, y);
        match self.sat_level {
            Some(level) => {
                let clamped = u.clamp(-level, level);
                (u, clamped, clamped != u)
            }
            None => (u, u, false),
        }
    }

    pub fn qa_deriv(&self, p: &DVector<f64>, u_applied: f64) -> DVector<f64> {
        &self.a_q * p + &self.b_q * u_applied
    }

    pub fn q_deriv(&self, q: &DVector<f64>, y: f64) -> DVector<f64> {
        &self.a_q * q + &self.b_q * y
    }

    pub fn zn_deriv(&self, zn: &DVector<f64>, q: &DVector<f64>) -> DVector<f64> {
        if self.m == 0 {
            return DVector::zeros(0);
        }
        &self.s_n * zn + &self.g_mat_n * (&self.theta * q)
    }

    /// Frequency response of the realized Q_A block at `s`.
    pub fn qa_response(&self, s: Complex64) -> Result<Complex64> {
        freq_response(&self.a_q, &self.b_q, &self.m_row, 0.0, s)
    }

    /// Frequency response of the realized y -> u_hat block at `s`.
    pub fn inv_block_response(&self, s: Complex64) -> Result<Complex64> {
        let n = self.m + self.mu;
        let mut a = DMatrix::<f64>::zeros(n, n);
        let coupling = &self.g_mat_n * &self.theta;
        for i in 0..self.m {
            for j in 0..self.m {
                a[(i, j)] = self.s_n[(i, j)];
            }
            for j in 0..self.mu {
                a[(i, self.m + j)] = coupling[(i, j)];
            }
        }
        for i in 0..self.mu {
            for j in 0..self.mu {
                a[(self.m + i, self.m + j)] = self.a_q[(i, j)];
            }
        }
        let mut b = DVector::<f64>::zeros(n);
        for i in 0..self.mu {
            b[self.m + i] = self.b_q[i];
        }
        let mut c = RowDVector::<f64>::zeros(n);
        for j in 0..self.m {
            c[j] = self.un_row_zn[j];
        }
        for j in 0..self.mu {
            c[self.m + j] = self.un_row_q[j];
        }
        freq_response(&a, &b, &c, self.un_feed, s)
    }

    /// Observer / fast coordinates of the paper's diagnostic transforms,
    /// stated for the nu = 2, mu = 2 configuration.
    pub fn diagnostic_coordinates(
        &self,
        p: &DVector<f64>,
        q: &DVector<f64>,
        y: f64,
        ydot: f64,
    ) -> Result<DiagnosticCoordinates> {
        if self.nu != 2 || self.mu != 2 {
            return Err(DobError::DiagnosticUnavailable(format!(
                "observer-coordinate transform is defined for nu = 2, mu = 2 \
                 (got nu = {}, mu = {})",
                self.nu, self.mu
            )));
        }
        let tau = self.tau;
        let (a0, a1) = (self.a[0], self.a[1]);
        let a0t = a0 / (tau * tau);
        let a1t = a1 / tau;
        let qbar1 = q[0] + (a1 / a0) * tau * q[1];
        let qdot1 = q[1];
        let qdot2 = -a0t * q[0] - a1t * q[1] + a0t * y;
        let qddot2 = -a0t * qdot1 - a1t * qdot2 + a0t * ydot;
        Ok(DiagnosticCoordinates {
            qbar: [qbar1, q[1]],
            ptilde: [p[0] - qdot2 / self.g_n, p[1] - qddot2 / self.g_n],
        })
    }
}

/// `c (sI - A)^{-1} b + d` by complex LU solve.
pub fn freq_response(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &RowDVector<f64>,
    d: f64,
    s: Complex64,
) -> Result<Complex64> {
    let n = a.nrows();
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = Complex64::new(-a[(i, j)], 0.0);
        }
        m[(i, i)] += s;
    }
    let rhs = DVector::<Complex64>::from_iterator(n, b.iter().map(|x| Complex64::new(*x, 0.0)));
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| DobError::NumericRange(format!("sI - A singular at s = {s}")))?;
    let mut acc = Complex64::new(d, 0.0);
    for i in 0..n {
        acc += Complex64::new(c[i], 0.0) * sol[i];
    }
    Ok(acc)
}

/// Linear closed-loop state matrix for r = 0, d = 0, saturation ignored.
/// State order: [plant x (n), outer controller (n_c), p (mu), z_n (m), q (mu)].
pub fn assemble_closed_loop(
    plant: &StateSpacePlant,
    dob: &DobRealization,
    ctrl: &SisoRealization,
) -> DMatrix<f64> {
    let n = plant.n();
    let nc = ctrl.order();
    let (mu, m) = (dob.mu, dob.m);
    let total = n + nc + mu + m + mu;
    let (ox, oc, op, oz, oq) = (0, n, n + nc, n + nc + mu, n + nc + mu + m);

    // u as a row over the full state:
    // u = c_c xc - (d_c + un_feed) c x + m_row p - un_row_zn z_n - un_row_q q
    let mut u_row = RowDVector::<f64>::zeros(total);
    for j in 0..n {
        u_row[ox + j] = -(ctrl.d + dob.un_feed) * plant.c[j];
    }
    for j in 0..nc {
        u_row[oc + j] = ctrl.c[j];
    }
    for j in 0..mu {
        u_row[op + j] = dob.m_row[j];
        u_row[oq + j] = -dob.un_row_q[j];
    }
    for j in 0..m {
        u_row[oz + j] = -dob.un_row_zn[j];
    }

    let mut acl = DMatrix::<f64>::zeros(total, total);
    // Block diagonal: plant, controller, Q_A, z_n, q.
    for i in 0..n {
        for j in 0..n {
            acl[(ox + i, ox + j)] = plant.a[(i, j)];
        }
    }
    for i in 0..nc {
        for j in 0..nc {
            acl[(oc + i, oc + j)] = ctrl.a[(i, j)];
        }
        // xc driven by -y
        for j in 0..n {
            acl[(oc + i, ox + j)] = -ctrl.b[i] * plant.c[j];
        }
    }
    for i in 0..mu {
        for j in 0..mu {
            acl[(op + i, op + j)] = dob.a_q[(i, j)];
            acl[(oq + i, oq + j)] = dob.a_q[(i, j)];
        }
        // q driven by y
        for j in 0..n {
            acl[(oq + i, ox + j)] = dob.b_q[i] * plant.c[j];
        }
    }
    let coupling = &dob.g_mat_n * &dob.theta;
    for i in 0..m {
        for j in 0..m {
            acl[(oz + i, oz + j)] = dob.s_n[(i, j)];
        }
        for j in 0..mu {
            acl[(oz + i, oq + j)] = coupling[(i, j)];
        }
    }
    // u enters the plant and the Q_A block.
    for i in 0..n {
        for j in 0..total {
            acl[(ox + i, j)] += plant.b[i] * u_row[j];
        }
    }
    for i in 0..mu {
        for j in 0..total {
            acl[(op + i, j)] += dob.b_q[i] * u_row[j];
        }
    }
    acl
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::NominalModel;
    use crate::poly::{Polynomial, RationalFunction};
    use approx::assert_relative_eq;

    fn nominal() -> NominalModel {
        // (s + 2) / (s^3 + 3 s^2 + 2 s + 1)
        NominalModel::from_tf(
            &RationalFunction::new(
                Polynomial::new(vec![2.0, 1.0]),
                Polynomial::new(vec![1.0, 2.0, 3.0, 1.0]),
            )
            .unwrap(),
        )
        .unwrap()
    }

    fn spec(tau: f64) -> QFilterSpec {
        QFilterSpec::new(tau, 2, vec![1.0, 2.0], vec![1.0, 0.0]).unwrap()
    }

    #[test]
    fn reproduces_paper_matrices() {
        // nu = 2, mu = 2 block matrices of the inverse-block realization.
        let tau = 0.1;
        let r = realize(&nominal(), &spec(tau), None).unwrap();
        let a0t = 1.0 / (tau * tau);
        let a1t = 2.0 / tau;
        // Q_A block
        assert_relative_eq!(r.a_q[(0, 1)], 1.0);
        assert_relative_eq!(r.a_q[(1, 0)], -a0t);
        assert_relative_eq!(r.a_q[(1, 1)], -a1t);
        assert_relative_eq!(r.b_q[1], a0t);
        assert_relative_eq!(r.m_row[0], 1.0);
        assert_relative_eq!(r.m_row[1], 0.0);
        // z_n row: [S_n, G_n1, G_n2]
        assert_relative_eq!(r.s_n[(0, 0)], -2.0, epsilon = 1e-12);
        let coupling = &r.g_mat_n * &r.theta;
        assert_relative_eq!(coupling[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(coupling[(0, 1)], 0.0, epsilon = 1e-12);
        // u_hat output row: [-psi_n/g_n, -(phi_n1 + a0/tau^2)/g_n, -(phi_n2 + a1/tau)/g_n] + feedthrough
        let (phi1, phi2, psi, g_n) = (0.0, -1.0, -1.0, 1.0);
        assert_relative_eq!(r.un_row_zn[0], -psi / g_n, epsilon = 1e-12);
        assert_relative_eq!(r.un_row_q[0], -(phi1 + a0t) / g_n, epsilon = 1e-9);
        assert_relative_eq!(r.un_row_q[1], -(phi2 + a1t) / g_n, epsilon = 1e-9);
        assert_relative_eq!(r.un_feed, a0t / g_n, epsilon = 1e-9);
    }

    #[test]
    fn qa_block_first_order() {
        // tau = 1, mu = 1: u -> y_p is a0/(s + a0)
        let nom = NominalModel::from_tf(
            &RationalFunction::new(Polynomial::one(), Polynomial::new(vec![1.0, 1.0])).unwrap(),
        )
        .unwrap();
        let s = QFilterSpec::new(1.0, 1, vec![3.0], vec![3.0]).unwrap();
        let r = realize(&nom, &s, None).unwrap();
        let resp = r.qa_response(Complex64::new(0.0, 2.0)).unwrap();
        let expect = Complex64::new(3.0, 0.0) / Complex64::new(3.0, 2.0);
        assert!((resp - expect).norm() < 1e-12);
    }

    #[test]
    fn realized_blocks_match_transfer_functions() {
        let tau = 0.05;
        let nom = nominal();
        let qf = spec(tau);
        let r = realize(&nom, &qf, None).unwrap();
        let qa = qf.tf().unwrap();
        let inv_qb = nom.p_n.inv().unwrap().mul(&qf.tf().unwrap()).unwrap();
        for k in 0..50 {
            let w = 1e-2 / tau * (1e4f64).powf(k as f64 / 49.0);
            let s = Complex64::new(0.0, w);
            let got_a = r.qa_response(s).unwrap();
            let want_a = qa.eval(s);
            assert!(
                (got_a - want_a).norm() <= 1e-8 * want_a.norm().max(1.0),
                "Q_A mismatch at w = {w}"
            );
            let got_b = r.inv_block_response(s).unwrap();
            let want_b = inv_qb.eval(s);
            assert!(
                (got_b - want_b).norm() <= 1e-8 * want_b.norm().max(1.0),
                "P_n^-1 Q_B mismatch at w = {w}: {got_b} vs {want_b}"
            );
        }
    }

    #[test]
    fn u_hat_matches_simple_form() {
        // Matrix form vs (1/g_n)(qdot2 - f_n(q, z_n)).
        let tau = 0.2;
        let r = realize(&nominal(), &spec(tau), None).unwrap();
        let cases = [
            (0.3, -0.7, 0.2, 1.1),
            (1.0, 0.0, 0.0, 0.0),
            (-2.0, 0.5, 1.5, -0.3),
        ];
        for (q1, q2, zn, y) in cases {
            let q = DVector::from_vec(vec![q1, q2]);
            let znv = DVector::from_vec(vec![zn]);
            let matrix_form = r.u_hat(&znv, &q, y);
            let a0t = r.a[0] / (tau * tau);
            let a1t = r.a[1] / tau;
            let qdot2 = -a0t * q1 - a1t * q2 + a0t * y;
            let f_n = (&r.phi_n * &q)[(0, 0)] + (&r.psi_n * &znv)[(0, 0)];
            let simple = (qdot2 - f_n) / r.g_n;
            assert_relative_eq!(matrix_form, simple, epsilon = 1e-10);
        }
    }

    #[test]
    fn control_law_cases() {
        let r = realize(&nominal(), &spec(0.1), Some(2.0)).unwrap();
        let zero_p = DVector::zeros(2);
        let zero_q = DVector::zeros(2);
        let zero_zn = DVector::zeros(1);
        // zero state, ubar = 1 -> u = 1
        let (u, ua, active) = r.control_output(&zero_p, &zero_zn, &zero_q, 1.0, 0.0);
        assert_relative_eq!(u, 1.0);
        assert_relative_eq!(ua, 1.0);
        assert!(!active);
        // computed u beyond the level is clamped
        let (u, ua, active) = r.control_output(&zero_p, &zero_zn, &zero_q, 4.0, 0.0);
        assert_relative_eq!(u, 4.0);
        assert_relative_eq!(ua, 2.0);
        assert!(active);
    }

    #[test]
    fn estimation_exact_means_dob_silent() {
        // If y_p equals u_hat the DOB contributes nothing.
        let r = realize(&nominal(), &spec(0.1), None).unwrap();
        let q = DVector::from_vec(vec![0.4, -0.2]);
        let zn = DVector::from_vec(vec![0.6]);
        let y = 0.9;
        let uhat = r.u_hat(&zn, &q, y);
        // m_row = [1, 0]: pick p with p1 = uhat.
        let p = DVector::from_vec(vec![uhat, 0.0]);
        let (u, _, _) = r.control_output(&p, &zn, &q, 0.7, y);
        assert_relative_eq!(u, 0.7, epsilon = 1e-12);
    }

    #[test]
    fn fast_dynamics_eigenstructure() {
        // Eigenvalues of the p-tilde system matrix are 1/tau times the
        // roots of p_f(s) with the true plant g.
        let tau = 0.05;
        let qf = spec(tau);
        let (g, g_n) = (2.4, 1.0);
        let pt = DMatrix::from_row_slice(
            2,
            2,
            &[
                0.0,
                1.0,
                -(g / g_n) * qf.a[0] / (tau * tau),
                -qf.a[1] / tau,
            ],
        );
        let eig = pt.complex_eigenvalues();
        let pf_roots = qf.pf_polynomial(g, g_n).unwrap().roots().unwrap();
        let mut got: Vec<Complex64> = eig.iter().map(|e| e * tau).collect();
        got.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        let mut want = pf_roots.clone();
        want.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        for (g_, w) in got.iter().zip(&want) {
            assert!((g_ - w).norm() < 1e-8);
        }
    }

    #[test]
    fn diagnostics_need_nu2_mu2() {
        let nom = NominalModel::from_tf(
            &RationalFunction::new(Polynomial::one(), Polynomial::new(vec![1.0, 1.0])).unwrap(),
        )
        .unwrap();
        let s = QFilterSpec::new(0.1, 1, vec![1.0], vec![1.0]).unwrap();
        let r = realize(&nom, &s, None).unwrap();
        let p = DVector::zeros(1);
        let q = DVector::zeros(1);
        assert!(matches!(
            r.diagnostic_coordinates(&p, &q, 0.0, 0.0),
            Err(DobError::DiagnosticUnavailable(_))
        ));
    }

    #[test]
    fn rejects_non_minimum_phase_nominal() {
        let bad = RationalFunction::new(
            Polynomial::new(vec![-1.0, 1.0]),
            Polynomial::new(vec![1.0, 2.0, 3.0, 1.0]),
        )
        .unwrap();
        // NominalModel itself refuses; construct the error through realize
        // by checking the constructor here.
        assert!(NominalModel::from_tf(&bad).is_err());
    }
}
