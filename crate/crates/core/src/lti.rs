//! Plant modeling: transfer function <-> state space, relative degree,
//! minimality, and the conversion to normal form with zero-dynamics
//! extraction.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DobError, Result};
use crate::poly::{is_hurwitz, Polynomial, RationalFunction};

/// Singular values below this (relative to the largest) count as zero in
/// rank and minimality checks.
pub const TOL_RANK: f64 = 1e-9;
/// Markov parameters below this (relative to ||c|| ||A||^(i-1) ||b||) count
/// as structurally zero when locating the relative degree.
pub const TOL_MARKOV: f64 = 1e-9;
/// Condition-number limit for the normal-form transformation matrix.
pub const MAX_COND_T: f64 = 1e12;

/// Minimal SISO realization `(A, b, c)` with a disturbance input map `E`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateSpacePlant {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
    /// n x q disturbance input map.
    pub e: DMatrix<f64>,
}

/// Characteristic polynomial (ascending, monic) and the adjugate expansion
/// `adj(sI - A) = sum M_k s^(n-1-k)` via the Faddeev-LeVerrier recursion.
fn faddeev_leverrier(a: &DMatrix<f64>) -> (Polynomial, Vec<DMatrix<f64>>) {
    let n = a.nrows();
    let mut char_desc = vec![1.0]; // coefficient of s^n
    let mut adj = Vec::with_capacity(n);
    let mut m = DMatrix::<f64>::identity(n, n);
    for k in 1..=n {
        adj.push(m.clone());
        let am = a * &m;
        let d = -am.trace() / k as f64;
        char_desc.push(d);
        m = am + DMatrix::<f64>::identity(n, n) * d;
    }
    char_desc.reverse();
    (Polynomial::new(char_desc), adj)
}

impl StateSpacePlant {
    /// Checks shapes and minimality (controllability + observability to
    /// rank tolerance).
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: RowDVector<f64>,
        e: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c.ncols() != n || e.nrows() != n {
            return Err(DobError::Shape(format!(
                "inconsistent dimensions: A {}x{}, b {}, c {}, E {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                c.ncols(),
                e.nrows(),
                e.ncols()
            )));
        }
        let plant = StateSpacePlant { a, b, c, e };
        if !plant.is_minimal() {
            return Err(DobError::IllPosedPlant(
                "(A, b, c) is not a minimal realization".into(),
            ));
        }
        Ok(plant)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn dist_dim(&self) -> usize {
        self.e.ncols()
    }

    fn rank(m: &DMatrix<f64>) -> usize {
        let sv = m.clone().singular_values();
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        if smax == 0.0 {
            return 0;
        }
        sv.iter().filter(|s| **s > TOL_RANK * smax).count()
    }

    pub fn is_minimal(&self) -> bool {
        let n = self.n();
        let mut ctrb = DMatrix::<f64>::zeros(n, n);
        let mut obsv = DMatrix::<f64>::zeros(n, n);
        let mut v = self.b.clone();
        let mut w = self.c.clone();
        for i in 0..n {
            ctrb.set_column(i, &v);
            obsv.set_row(i, &w);
            v = &self.a * v;
            w = w * &self.a;
        }
        Self::rank(&ctrb) == n && Self::rank(&obsv) == n
    }

    /// Controllable canonical realization of a strictly proper, coprime
    /// transfer function. The disturbance map defaults to the input
    /// channel (`E = b`), matching an input disturbance.
    pub fn from_tf(p: &RationalFunction) -> Result<Self> {
        if !p.is_strictly_proper() || p.num().is_zero() {
            return Err(DobError::Shape(
                "plant transfer function must be nonzero and strictly proper".into(),
            ));
        }
        let dlead = p.den().leading();
        let den = p.den().monic();
        let num = p.num().scale(1.0 / dlead);
        let n = den.degree();
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            a[(i, i + 1)] = 1.0;
        }
        for j in 0..n {
            a[(n - 1, j)] = -den.coeff(j);
        }
        let mut b = DVector::<f64>::zeros(n);
        b[n - 1] = 1.0;
        let mut c = RowDVector::<f64>::zeros(n);
        for j in 0..n {
            c[j] = num.coeff(j);
        }
        let e = DMatrix::from_column_slice(n, 1, b.as_slice());
        StateSpacePlant::new(a, b, c, e)
    }

    /// `c (sI - A)^{-1} b` by Faddeev-LeVerrier.
    pub fn transfer_function(&self) -> Result<RationalFunction> {
        let (den, adj) = faddeev_leverrier(&self.a);
        let n = self.n();
        let mut num_desc = Vec::with_capacity(n);
        for m in &adj {
            num_desc.push((&self.c * m * &self.b)[(0, 0)]);
        }
        num_desc.reverse();
        RationalFunction::new(Polynomial::new(num_desc), den)
    }

    /// Smallest `i` with `|c A^(i-1) b|` above the Markov tolerance.
    pub fn relative_degree(&self) -> Result<usize> {
        let n = self.n();
        let a_norm = self.a.norm();
        let cb_scale = self.c.norm() * self.b.norm();
        let mut row = self.c.clone();
        for i in 1..=n {
            let markov = (&row * &self.b)[(0, 0)];
            let scale = cb_scale * a_norm.powi(i as i32 - 1);
            if markov.abs() > TOL_MARKOV * scale.max(f64::MIN_POSITIVE) {
                return Ok(i);
            }
            row *= &self.a;
        }
        Err(DobError::IllPosedPlant(
            "no finite relative degree: all Markov parameters vanish".into(),
        ))
    }

    /// Numerator roots, each verified by a rank drop of the Rosenbrock
    /// system matrix `[sI - A, -b; c, 0]`. Independent of the normal-form
    /// path, so it serves as the oracle for `eigenvalues(S)`.
    pub fn zeros_by_rosenbrock(&self) -> Result<Vec<Complex64>> {
        let tf = self.transfer_function()?;
        if tf.num().degree() == 0 {
            return Ok(vec![]);
        }
        let candidates = tf.num().roots()?;
        let n = self.n();
        let mut out = Vec::new();
        for lambda in candidates {
            let mut r = DMatrix::<Complex64>::zeros(n + 1, n + 1);
            for i in 0..n {
                for j in 0..n {
                    r[(i, j)] = Complex64::new(-self.a[(i, j)], 0.0);
                }
                r[(i, i)] += lambda;
                r[(i, n)] = Complex64::new(-self.b[i], 0.0);
                r[(n, i)] = Complex64::new(self.c[i], 0.0);
            }
            let sv = r.singular_values();
            let smax = sv.iter().cloned().fold(0.0, f64::max);
            let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
            if smin <= 1e-6 * smax.max(1.0) {
                out.push(lambda);
            }
        }
        Ok(out)
    }

    pub fn is_minimum_phase(&self) -> Result<bool> {
        let tf = self.transfer_function()?;
        if tf.num().degree() == 0 {
            return Ok(true);
        }
        Ok(tf.num().roots()?.iter().all(|r| r.re < 0.0))
    }

    /// Appendix conversion to normal form. `T` stacks `c A^(i-1)` over a
    /// completion `Phi` with `Phi b = 0`, built from an orthonormal basis of
    /// the left nullspace of `b`.
    pub fn to_normal_form(&self) -> Result<NormalForm> {
        let n = self.n();
        let nu = self.relative_degree()?;
        let m = n - nu;
        let q = self.dist_dim();

        // Observability rows c A^(i-1), i = 1..nu.
        let mut obs = DMatrix::<f64>::zeros(nu, n);
        let mut row = self.c.clone();
        for i in 0..nu {
            obs.set_row(i, &row);
            row *= &self.a;
        }
        // `row` is now c A^nu.
        let c_a_nu = row;

        let phi_mat = if m == 0 {
            DMatrix::<f64>::zeros(0, n)
        } else {
            // Householder reflector sending b to a multiple of e1; its
            // remaining columns are an orthonormal basis of the left
            // nullspace of b.
            let bnorm = self.b.norm();
            if bnorm == 0.0 {
                return Err(DobError::IllPosedPlant("b = 0".into()));
            }
            let mut v = self.b.clone();
            v[0] += self.b[0].signum() * bnorm;
            let vn = v.norm();
            let h = DMatrix::<f64>::identity(n, n) - (&v * v.transpose()) * (2.0 / (vn * vn));
            let nb = h.columns(1, n - 1).into_owned(); // n x (n-1)

            // The first nu-1 observability rows lie in b-perp; express them
            // in the nb coordinates and complete to a basis of R^(n-1).
            let mut basis: Vec<DVector<f64>> = Vec::new();
            for i in 0..nu.saturating_sub(1) {
                let coords = (obs.row(i) * &nb).transpose();
                let mut r = coords;
                for u in &basis {
                    let p = u.dot(&r);
                    r -= u * p;
                }
                let norm = r.norm();
                if norm > 1e-12 {
                    basis.push(r / norm);
                }
            }
            let fixed = basis.len();
            let mut completion: Vec<DVector<f64>> = Vec::new();
            while completion.len() < m {
                // Greedy pick: unit coordinate vector with the largest
                // residual after orthogonalization.
                let mut best: Option<(DVector<f64>, f64)> = None;
                for j in 0..n - 1 {
                    let mut r = DVector::<f64>::zeros(n - 1);
                    r[j] = 1.0;
                    for u in basis.iter().chain(completion.iter()) {
                        let p = u.dot(&r);
                        r -= u * p;
                    }
                    let norm = r.norm();
                    if best.as_ref().map(|(_, b)| norm > *b).unwrap_or(true) {
                        best = Some((r.clone() / norm.max(1e-300), norm));
                    }
                }
                let (vec, norm) = best.unwrap();
                if norm < 1e-9 {
                    return Err(DobError::Conversion(format!(
                        "cannot complete Phi: residual basis rank deficient \
                         (fixed {fixed}, found {})",
                        completion.len()
                    )));
                }
                completion.push(vec);
            }
            let mut x = DMatrix::<f64>::zeros(m, n - 1);
            for (i, u) in completion.iter().enumerate() {
                x.set_row(i, &u.transpose());
            }
            x * nb.transpose()
        };

        let mut t = DMatrix::<f64>::zeros(n, n);
        for i in 0..nu {
            t.set_row(i, &obs.row(i));
        }
        for i in 0..m {
            t.set_row(nu + i, &phi_mat.row(i));
        }
        let sv = t.clone().singular_values();
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        let cond = smax / smin.max(f64::MIN_POSITIVE);
        if cond > MAX_COND_T {
            return Err(DobError::Conversion(format!(
                "transformation matrix numerically singular (cond {cond:.3e})"
            )));
        }
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| DobError::Conversion("T not invertible".into()))?;
        let t_a = t_inv.columns(0, nu).into_owned();
        let t_b = t_inv.columns(nu, m).into_owned();

        let g = {
            let mut r = self.c.clone();
            for _ in 0..nu - 1 {
                r *= &self.a;
            }
            (r * &self.b)[(0, 0)]
        };
        let phi = (&c_a_nu * &t_a).row(0).into_owned();
        let psi = (&c_a_nu * &t_b).row(0).into_owned();
        let s = &phi_mat * &self.a * &t_b;
        let g_mat = &phi_mat * &self.a * &t_a;

        // Disturbance lift: block lower-triangular stack of c A^k E.
        let mut ebar = DMatrix::<f64>::zeros(nu, q * nu.saturating_sub(1));
        if nu >= 2 {
            let mut cae: Vec<RowDVector<f64>> = Vec::with_capacity(nu - 1);
            let mut r = self.c.clone();
            for _ in 0..nu - 1 {
                cae.push((&r * &self.e).row(0).into_owned());
                r *= &self.a;
            }
            for i in 1..nu {
                for j in 0..i {
                    // block (i, j) = c A^(i-1-j) E
                    let blk = &cae[i - 1 - j];
                    for col in 0..q {
                        ebar[(i, j * q + col)] = blk[(0, col)];
                    }
                }
            }
        }

        Ok(NormalForm {
            model: NormalFormModel {
                nu,
                m,
                phi,
                psi,
                g,
                s,
                g_mat,
            },
            t,
            t_inv,
            phi_completion: phi_mat,
            ebar,
            cond_t: cond,
        })
    }
}

/// Structural normal-form data shared by the plant, the nominal model, and
/// the simulator: integrator chain of length `nu` plus zero dynamics of
/// dimension `m`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalFormModel {
    pub nu: usize,
    pub m: usize,
    /// 1 x nu
    pub phi: RowDVector<f64>,
    /// 1 x m
    pub psi: RowDVector<f64>,
    /// High-frequency gain, equals the leading numerator coefficient.
    pub g: f64,
    /// m x m zero-dynamics matrix; its eigenvalues are the plant zeros.
    pub s: DMatrix<f64>,
    /// m x nu coupling from the chain into the zero dynamics.
    pub g_mat: DMatrix<f64>,
}

impl NormalFormModel {
    pub fn f(&self, x: &DVector<f64>, z: &DVector<f64>) -> f64 {
        (&self.phi * x)[(0, 0)] + if self.m > 0 { (&self.psi * z)[(0, 0)] } else { 0.0 }
    }

    pub fn zdot(&self, x: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        if self.m == 0 {
            return DVector::zeros(0);
        }
        &self.s * z + &self.g_mat * x
    }

    /// Characteristic polynomial of `S` (ascending, monic).
    pub fn s_char_poly(&self) -> Polynomial {
        faddeev_leverrier(&self.s).0
    }

    /// Reconstruct the transfer function of the disturbance-free normal
    /// form. This is the similarity-invariance oracle.
    pub fn transfer_function(&self) -> Result<RationalFunction> {
        let n = self.nu + self.m;
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..self.nu - 1 {
            a[(i, i + 1)] = 1.0;
        }
        for j in 0..self.nu {
            a[(self.nu - 1, j)] = self.phi[j];
        }
        for j in 0..self.m {
            a[(self.nu - 1, self.nu + j)] = self.psi[j];
        }
        for i in 0..self.m {
            for j in 0..self.nu {
                a[(self.nu + i, j)] = self.g_mat[(i, j)];
            }
            for j in 0..self.m {
                a[(self.nu + i, self.nu + j)] = self.s[(i, j)];
            }
        }
        let mut b = DVector::<f64>::zeros(n);
        b[self.nu - 1] = self.g;
        let mut c = RowDVector::<f64>::zeros(n);
        c[0] = 1.0;
        let (den, adj) = faddeev_leverrier(&a);
        let mut num_desc = Vec::with_capacity(n);
        for mk in &adj {
            num_desc.push((&c * mk * &b)[(0, 0)]);
        }
        num_desc.reverse();
        RationalFunction::new(Polynomial::new(num_desc), den)
    }

    pub fn is_minimum_phase(&self) -> Result<bool> {
        if self.m == 0 {
            return Ok(true);
        }
        Ok(is_hurwitz(&self.s_char_poly())?.stable)
    }
}

/// Full result of the Appendix conversion, including the transformation and
/// disturbance-lift matrices.
#[derive(Debug, Clone)]
pub struct NormalForm {
    pub model: NormalFormModel,
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
    /// The completion rows Phi (m x n), with Phi b = 0.
    pub phi_completion: DMatrix<f64>,
    /// nu x (q * (nu - 1)) block matrix stacking c A^k E.
    pub ebar: DMatrix<f64>,
    pub cond_t: f64,
}

/// Normal-form realization in the coordinates where `G x = G' x_1`
/// (zero dynamics driven by the output only). Used for the nominal model
/// and for plants entered as transfer functions.
pub fn canonical_normal_form(p: &RationalFunction) -> Result<NormalFormModel> {
    if !p.is_strictly_proper() || p.num().is_zero() {
        return Err(DobError::Shape(
            "normal form needs a nonzero strictly proper transfer function".into(),
        ));
    }
    let dlead = p.den().leading();
    let den = p.den().monic();
    let num = p.num().scale(1.0 / dlead);
    let n = den.degree();
    let m = num.degree();
    let nu = n - m;
    let g = num.leading();
    let nbar = num.monic();

    // Companion realization of the zero dynamics, driven by x1.
    let mut s = DMatrix::<f64>::zeros(m, m);
    for i in 0..m.saturating_sub(1) {
        s[(i, i + 1)] = 1.0;
    }
    for j in 0..m {
        s[(m - 1, j)] = -nbar.coeff(j);
    }
    let mut g_mat = DMatrix::<f64>::zeros(m, nu);
    if m > 0 {
        g_mat[(m - 1, 0)] = 1.0;
    }

    // Match the denominator: nbar * (s^nu - phi(s)) - psi(s) = den, so
    // nbar * s^nu - den = nbar * phi(s) + psi(s).
    let lhs = &(&nbar * &Polynomial::monomial(1.0, nu)) - &den;
    let (quot, rem) = lhs.div_rem(&nbar)?;
    let mut phi = RowDVector::<f64>::zeros(nu);
    for i in 0..nu {
        phi[i] = quot.coeff(i);
    }
    let mut psi = RowDVector::<f64>::zeros(m);
    for i in 0..m {
        psi[i] = rem.coeff(i);
    }
    Ok(NormalFormModel {
        nu,
        m,
        phi,
        psi,
        g,
        s,
        g_mat,
    })
}

/// Nominal plant model in canonical normal-form coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NominalModel {
    pub model: NormalFormModel,
    pub p_n: RationalFunction,
}

impl NominalModel {
    /// Requires a strictly proper, minimum-phase nominal transfer function
    /// (otherwise `P_n^{-1} Q_B` hides an unstable cancellation).
    pub fn from_tf(p_n: &RationalFunction) -> Result<Self> {
        let model = canonical_normal_form(p_n)?;
        if !model.is_minimum_phase()? {
            return Err(DobError::Precondition(
                "nominal model is not minimum phase".into(),
            ));
        }
        Ok(NominalModel {
            model,
            p_n: p_n.clone(),
        })
    }

    pub fn g_n(&self) -> f64 {
        self.model.g
    }
}

/// Controllable canonical realization of a proper (possibly biproper)
/// SISO transfer function, used for the outer-loop controller.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SisoRealization {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
    pub d: f64,
}

impl SisoRealization {
    pub fn from_rational(p: &RationalFunction) -> Result<Self> {
        if !p.is_proper() {
            return Err(DobError::Shape(
                "controller transfer function must be proper".into(),
            ));
        }
        let dlead = p.den().leading();
        let den = p.den().monic();
        let num = p.num().scale(1.0 / dlead);
        let n = den.degree();
        let d = if num.degree() == n && !num.is_zero() {
            num.leading()
        } else {
            0.0
        };
        // Strictly proper remainder num - d * den.
        let rem = &num - &den.scale(d);
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            a[(i, i + 1)] = 1.0;
        }
        for j in 0..n {
            a[(n - 1, j)] = -den.coeff(j);
        }
        let mut b = DVector::<f64>::zeros(n);
        if n > 0 {
            b[n - 1] = 1.0;
        }
        let mut c = RowDVector::<f64>::zeros(n);
        for j in 0..n {
            c[j] = rem.coeff(j);
        }
        Ok(SisoRealization { a, b, c, d })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn output(&self, state: &DVector<f64>, input: f64) -> f64 {
        let xs = if self.order() > 0 {
            (&self.c * state)[(0, 0)]
        } else {
            0.0
        };
        xs + self.d * input
    }

    pub fn deriv(&self, state: &DVector<f64>, input: f64) -> DVector<f64> {
        if self.order() == 0 {
            return DVector::zeros(0);
        }
        &self.a * state + &self.b * input
    }
}
