//! Closed-loop time-domain simulation: the uncertain plant under the DOB
//! and the outer controller, integrated alongside the nominal closed loop
//! from matched initial conditions, plus the recovery metrics, the peaking
//! probe, the perturbed-plant scenario sampler, and the tau sweep runner.

pub mod signal;
pub mod solver;

pub use signal::DisturbanceSignal;
pub use solver::{integrate, IntegrationResult, SolverOptions, DIVERGENCE_THRESHOLD};

use std::io;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dob::DobRealization;
use crate::error::{DobError, Result};
use crate::lti::{canonical_normal_form, NominalModel, NormalFormModel, SisoRealization, StateSpacePlant};
use crate::poly::{Polynomial, RationalFunction};
use crate::qfilter::QFilterSpec;

/// Default horizon in seconds.
pub const DEFAULT_HORIZON: f64 = 10.0;
/// Uniform output samples per trace, independent of internal step count.
pub const DEFAULT_SAMPLES: usize = 2000;

/// Plant in normal-form coordinates together with the lift that maps a
/// scalar exogenous signal into the matched disturbance d and the
/// zero-dynamics disturbance d_z. The lift is exact because the signal
/// exposes closed-form derivatives.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiftedPlant {
    pub model: NormalFormModel,
    /// Weights of d^(j-1) in d, j = 1..nu (the c A^(nu-j) E / g chain).
    d_weights: Vec<f64>,
    /// Weights of d^(k) in d from the state-shift term, k = 0..nu-2.
    d_bar_row: Vec<f64>,
    /// Phi E contribution to d_z.
    dz_e: DVector<f64>,
    /// m x (nu-1) weights of the derivative stack in d_z.
    dz_bar: DMatrix<f64>,
}

impl LiftedPlant {
    /// Input-disturbance plant (E = b): d equals the signal itself and d_z
    /// vanishes.
    pub fn matched(model: NormalFormModel) -> Self {
        let m = model.m;
        let nu = model.nu;
        let mut d_weights = vec![0.0; nu];
        d_weights[0] = 1.0;
        LiftedPlant {
            d_weights,
            d_bar_row: vec![0.0; nu.saturating_sub(1)],
            dz_e: DVector::zeros(m),
            dz_bar: DMatrix::zeros(m, nu.saturating_sub(1)),
            model,
        }
    }

    pub fn from_tf(p: &RationalFunction) -> Result<Self> {
        Ok(Self::matched(canonical_normal_form(p)?))
    }

    /// Full lift for a state-space plant with a scalar disturbance channel.
    pub fn from_state_space(p: &StateSpacePlant) -> Result<Self> {
        if p.dist_dim() != 1 {
            return Err(DobError::Shape(format!(
                "disturbance lift needs a scalar channel, E has {} columns",
                p.dist_dim()
            )));
        }
        let nf = p.to_normal_form()?;
        let model = nf.model.clone();
        let nu = model.nu;
        let n = p.n();
        let g = model.g;

        // c A^nu and c A^(nu-j) E.
        let mut pow_rows = Vec::with_capacity(nu + 1);
        let mut row = p.c.clone();
        for _ in 0..=nu {
            pow_rows.push(row.clone());
            row *= &p.a;
        }
        let mut d_weights = Vec::with_capacity(nu);
        for j in 1..=nu {
            d_weights.push((&pow_rows[nu - j] * &p.e)[(0, 0)] / g);
        }
        let t_a = nf.t_inv.columns(0, nu).into_owned();
        let ca_nu_ta = &pow_rows[nu] * &t_a; // 1 x nu
        let mut d_bar_row = vec![0.0; nu.saturating_sub(1)];
        let shift = &ca_nu_ta * &nf.ebar; // 1 x (nu-1)
        for (k, w) in d_bar_row.iter_mut().enumerate() {
            *w = -shift[(0, k)] / g;
        }
        let phi_a_ta = &nf.phi_completion * &p.a * &t_a; // m x nu
        let dz_e = (&nf.phi_completion * &p.e).column(0).into_owned();
        let dz_bar = -(&phi_a_ta * &nf.ebar);
        let _ = n;
        Ok(LiftedPlant {
            model,
            d_weights,
            d_bar_row,
            dz_e,
            dz_bar,
        })
    }

    /// Matched disturbance d(t) for the given exogenous signal.
    pub fn d(&self, sig: &DisturbanceSignal, t: f64) -> f64 {
        if sig.is_zero() {
            return 0.0;
        }
        let mut acc = 0.0;
        for (j, w) in self.d_weights.iter().enumerate() {
            if *w != 0.0 {
                acc += w * sig.derivative(t, j);
            }
        }
        for (k, w) in self.d_bar_row.iter().enumerate() {
            if *w != 0.0 {
                acc += w * sig.derivative(t, k);
            }
        }
        acc
    }

    /// Zero-dynamics disturbance d_z(t).
    pub fn d_z(&self, sig: &DisturbanceSignal, t: f64) -> DVector<f64> {
        let m = self.model.m;
        if m == 0 || sig.is_zero() {
            return DVector::zeros(m);
        }
        let mut out = &self.dz_e * sig.value(t);
        for k in 0..self.dz_bar.ncols() {
            let dk = sig.derivative(t, k);
            if dk != 0.0 {
                for i in 0..m {
                    out[i] += self.dz_bar[(i, k)] * dk;
                }
            }
        }
        out
    }
}

/// Plant initial conditions in normal-form coordinates, plus the observer
/// filter state q. Empty vectors mean zeros; controller and Q_A states
/// always start at zero.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct InitialState {
    #[serde(default)]
    pub x: Vec<f64>,
    #[serde(default)]
    pub z: Vec<f64>,
    #[serde(default)]
    pub q: Vec<f64>,
    #[serde(default)]
    pub zn: Vec<f64>,
}

fn fill(dst: &mut DVector<f64>, src: &[f64], name: &str) -> Result<()> {
    if src.is_empty() {
        return Ok(());
    }
    if src.len() != dst.len() {
        return Err(DobError::Shape(format!(
            "initial {name} has length {}, expected {}",
            src.len(),
            dst.len()
        )));
    }
    for (d, s) in dst.iter_mut().zip(src) {
        *d = *s;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimOptions {
    pub horizon: f64,
    pub samples: usize,
    pub solver: SolverOptions,
    /// Run with u = ubar (DOB bypassed) for paired comparisons.
    #[serde(default)]
    pub disable_inner_loop: bool,
    /// Metrics settling time; defaults to 20 tau. Sweeps comparing several
    /// bandwidths should fix one value for all runs.
    #[serde(default)]
    pub t_settle: Option<f64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            horizon: DEFAULT_HORIZON,
            samples: DEFAULT_SAMPLES,
            solver: SolverOptions::default_rk45(),
            disable_inner_loop: false,
            t_settle: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub y_nominal: Vec<f64>,
    pub u: Vec<f64>,
    pub u_desired: Vec<f64>,
    pub u_sat_active: Vec<bool>,
    pub x: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub zn: Vec<Vec<f64>>,
    pub solver: String,
    pub steps: usize,
    pub diverged: bool,
}

impl SimulationTrace {
    /// Fixed column order for golden-file regression: t, y, y_nominal, u,
    /// u_desired, u_sat_active, x1.., z1.., p1.., q1.., zn1..
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = ["t", "y", "y_nominal", "u", "u_desired", "u_sat_active"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let widths = [
            ("x", self.x.first().map_or(0, Vec::len)),
            ("z", self.z.first().map_or(0, Vec::len)),
            ("p", self.p.first().map_or(0, Vec::len)),
            ("q", self.q.first().map_or(0, Vec::len)),
            ("zn", self.zn.first().map_or(0, Vec::len)),
        ];
        for (name, width) in widths {
            for i in 1..=width {
                header.push(format!("{name}{i}"));
            }
        }
        let to_io = |e: csv::Error| DobError::Solver(format!("csv write failed: {e}"));
        wtr.write_record(&header).map_err(to_io)?;
        for i in 0..self.t.len() {
            let mut rec: Vec<String> = vec![
                self.t[i].to_string(),
                self.y[i].to_string(),
                self.y_nominal[i].to_string(),
                self.u[i].to_string(),
                self.u_desired[i].to_string(),
                if self.u_sat_active[i] { "1" } else { "0" }.to_string(),
            ];
            for block in [&self.x, &self.z, &self.p, &self.q, &self.zn] {
                for v in &block[i] {
                    rec.push(v.to_string());
                }
            }
            wtr.write_record(&rec).map_err(to_io)?;
        }
        wtr.flush()
            .map_err(|e| DobError::Solver(format!("csv flush failed: {e}")))?;
        Ok(())
    }
}

/// The five blocks of Fig. 1: uncertain plant, DOB, outer controller, and
/// the two exogenous signals.
#[derive(Debug, Clone)]
pub struct ClosedLoopSim {
    pub plant: LiftedPlant,
    pub dob: DobRealization,
    pub controller: SisoRealization,
    pub reference: DisturbanceSignal,
    pub disturbance: DisturbanceSignal,
}

impl ClosedLoopSim {
    pub fn new(
        plant: LiftedPlant,
        dob: DobRealization,
        controller: SisoRealization,
        reference: DisturbanceSignal,
        disturbance: DisturbanceSignal,
    ) -> Result<Self> {
        if plant.model.nu != dob.nu {
            return Err(DobError::UnmodelledDynamics(format!(
                "plant relative degree {} does not match the nominal model's {}",
                plant.model.nu, dob.nu
            )));
        }
        if plant.model.g * dob.g_n <= 0.0 {
            return Err(DobError::Precondition(
                "high-frequency gain sign differs between plant and nominal model".into(),
            ));
        }
        Ok(ClosedLoopSim {
            plant,
            dob,
            controller,
            reference,
            disturbance,
        })
    }

    /// Integrate the real and nominal loops simultaneously. The nominal
    /// loop starts from (x(0), z_n(0)) with a fresh outer controller.
    pub fn simulate(&self, ic: &InitialState, opts: &SimOptions) -> Result<SimulationTrace> {
        if !(opts.horizon > 0.0) || opts.samples < 2 {
            return Err(DobError::Precondition(
                "horizon must be positive and samples >= 2".into(),
            ));
        }
        let nu = self.plant.model.nu;
        let m = self.plant.model.m;
        let mu = self.dob.mu;
        let mn = self.dob.m;
        let nc = self.controller.order();

        // Packing: [x, z, p, zn, q, xc | xN, znN, xcN].
        let (ox, oz, op, ozn, oq, oc) = (0, nu, nu + m, nu + m + mu, nu + m + mu + mn, nu + m + mu + mn + mu);
        let real_dim = oc + nc;
        let (onx, onzn, onc) = (real_dim, real_dim + nu, real_dim + nu + mn);
        let total = onc + nc;

        let mut x0 = DVector::<f64>::zeros(total);
        {
            let mut xs = DVector::<f64>::zeros(nu);
            let mut zs = DVector::<f64>::zeros(m);
            let mut qs = DVector::<f64>::zeros(mu);
            let mut zns = DVector::<f64>::zeros(mn);
            fill(&mut xs, &ic.x, "x")?;
            fill(&mut zs, &ic.z, "z")?;
            fill(&mut qs, &ic.q, "q")?;
            fill(&mut zns, &ic.zn, "zn")?;
            for i in 0..nu {
                x0[ox + i] = xs[i];
                x0[onx + i] = xs[i];
            }
            for i in 0..m {
                x0[oz + i] = zs[i];
            }
            for i in 0..mu {
                x0[oq + i] = qs[i];
            }
            for i in 0..mn {
                x0[ozn + i] = zns[i];
                x0[onzn + i] = zns[i];
            }
        }

        // RK4 stiffness guard: the fast dynamics live at 1/tau.
        let solver = match opts.solver {
            SolverOptions::Rk4 { h } => SolverOptions::Rk4 {
                h: h.min(self.dob.tau / 20.0),
            },
            s => s,
        };

        let grid: Vec<f64> = (0..opts.samples)
            .map(|i| opts.horizon * i as f64 / (opts.samples - 1) as f64)
            .collect();

        let seg =
            |s: &DVector<f64>, o: usize, len: usize| -> DVector<f64> { s.rows(o, len).into_owned() };
        let model = &self.plant.model;
        let dob = &self.dob;
        let ctrl = &self.controller;
        let deriv = |t: f64, s: &DVector<f64>| -> DVector<f64> {
            let mut ds = DVector::<f64>::zeros(total);
            let r = self.reference.value(t);
            let d = self.plant.d(&self.disturbance, t);
            let dz = self.plant.d_z(&self.disturbance, t);

            // Real loop.
            let x = seg(s, ox, nu);
            let z = seg(s, oz, m);
            let p = seg(s, op, mu);
            let zn = seg(s, ozn, mn);
            let q = seg(s, oq, mu);
            let xc = seg(s, oc, nc);
            let y = x[0];
            let e = r - y;
            let ubar = ctrl.output(&xc, e);
            let u_applied = if opts.disable_inner_loop {
                ubar
            } else {
                dob.control_output(&p, &zn, &q, ubar, y).1
            };
            for i in 0..nu - 1 {
                ds[ox + i] = x[i + 1];
            }
            ds[ox + nu - 1] = model.f(&x, &z) + model.g * (u_applied + d);
            let zd = model.zdot(&x, &z);
            for i in 0..m {
                ds[oz + i] = zd[i] + dz[i];
            }
            let pd = dob.qa_deriv(&p, u_applied);
            let qd = dob.q_deriv(&q, y);
            for i in 0..mu {
                ds[op + i] = pd[i];
                ds[oq + i] = qd[i];
            }
            let znd = dob.zn_deriv(&zn, &q);
            for i in 0..mn {
                ds[ozn + i] = znd[i];
            }
            let xcd = ctrl.deriv(&xc, e);
            for i in 0..nc {
                ds[oc + i] = xcd[i];
            }

            // Nominal loop.
            let xn = seg(s, onx, nu);
            let znn = seg(s, onzn, mn);
            let xcn = seg(s, onc, nc);
            let en = r - xn[0];
            let ubarn = ctrl.output(&xcn, en);
            for i in 0..nu - 1 {
                ds[onx + i] = xn[i + 1];
            }
            let fnn = (&dob.phi_n * &xn)[(0, 0)]
                + if mn > 0 { (&dob.psi_n * &znn)[(0, 0)] } else { 0.0 };
            ds[onx + nu - 1] = fnn + dob.g_n * ubarn;
            if mn > 0 {
                let znnd = &dob.s_n * &znn + &dob.g_mat_n * &xn;
                for i in 0..mn {
                    ds[onzn + i] = znnd[i];
                }
            }
            let xcnd = ctrl.deriv(&xcn, en);
            for i in 0..nc {
                ds[onc + i] = xcnd[i];
            }
            ds
        };

        let result = integrate(&deriv, &x0, &grid, &solver)?;
        let k = result.states.len();
        let mut trace = SimulationTrace {
            t: grid[..k].to_vec(),
            y: Vec::with_capacity(k),
            y_nominal: Vec::with_capacity(k),
            u: Vec::with_capacity(k),
            u_desired: Vec::with_capacity(k),
            u_sat_active: Vec::with_capacity(k),
            x: Vec::with_capacity(k),
            z: Vec::with_capacity(k),
            p: Vec::with_capacity(k),
            q: Vec::with_capacity(k),
            zn: Vec::with_capacity(k),
            solver: solver.name().to_string(),
            steps: result.steps,
            diverged: result.diverged,
        };
        for (i, s) in result.states.iter().enumerate() {
            let t = grid[i];
            let x = seg(s, ox, nu);
            let z = seg(s, oz, m);
            let p = seg(s, op, mu);
            let zn = seg(s, ozn, mn);
            let q = seg(s, oq, mu);
            let xc = seg(s, oc, nc);
            let y = x[0];
            let r = self.reference.value(t);
            let ubar = ctrl.output(&xc, r - y);
            let (u, _ua, sat) = if opts.disable_inner_loop {
                (ubar, ubar, false)
            } else {
                dob.control_output(&p, &zn, &q, ubar, y)
            };
            let d = self.plant.d(&self.disturbance, t);
            let fx = model.f(&x, &z);
            let fnx = (&dob.phi_n * &x)[(0, 0)]
                + if mn > 0 { (&dob.psi_n * &zn)[(0, 0)] } else { 0.0 };
            let u_desired = -d + (fnx - fx) / model.g + dob.g_n / model.g * ubar;
            trace.y.push(y);
            trace.y_nominal.push(s[onx]);
            trace.u.push(u);
            trace.u_desired.push(u_desired);
            trace.u_sat_active.push(sat);
            trace.x.push(x.iter().cloned().collect());
            trace.z.push(z.iter().cloned().collect());
            trace.p.push(p.iter().cloned().collect());
            trace.q.push(q.iter().cloned().collect());
            trace.zn.push(zn.iter().cloned().collect());
        }
        Ok(trace)
    }
}

pub fn simulate_closed_loop(
    sim: &ClosedLoopSim,
    ic: &InitialState,
    opts: &SimOptions,
) -> Result<SimulationTrace> {
    sim.simulate(ic, opts)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    /// sup over the whole horizon of |y - y_nominal|.
    pub sup_dev: f64,
    /// Same restricted to t >= T_settle.
    pub sup_dev_post: f64,
    /// sup over t >= T_settle of |u - u_desired|.
    pub u_tracking: f64,
    /// Mean |y - y_nominal| over the final 10% of the horizon.
    pub steady_state_err: f64,
    pub diverged: bool,
}

pub fn recovery_metrics(trace: &SimulationTrace, t_settle: f64) -> Result<RecoveryMetrics> {
    if trace.diverged {
        return Ok(RecoveryMetrics {
            sup_dev: f64::INFINITY,
            sup_dev_post: f64::INFINITY,
            u_tracking: f64::INFINITY,
            steady_state_err: f64::INFINITY,
            diverged: true,
        });
    }
    let horizon = *trace.t.last().ok_or_else(|| {
        DobError::Precondition("empty trace".into())
    })?;
    if !(t_settle < horizon) {
        return Err(DobError::Precondition(format!(
            "T_settle = {t_settle} must lie inside the horizon {horizon}"
        )));
    }
    let mut sup_dev: f64 = 0.0;
    let mut sup_dev_post: f64 = 0.0;
    let mut u_tracking: f64 = 0.0;
    let mut tail_acc = 0.0;
    let mut tail_n = 0usize;
    let tail_start = horizon * 0.9;
    for i in 0..trace.t.len() {
        let dev = (trace.y[i] - trace.y_nominal[i]).abs();
        sup_dev = sup_dev.max(dev);
        if trace.t[i] >= t_settle {
            sup_dev_post = sup_dev_post.max(dev);
            u_tracking = u_tracking.max((trace.u[i] - trace.u_desired[i]).abs());
        }
        if trace.t[i] >= tail_start {
            tail_acc += dev;
            tail_n += 1;
        }
    }
    Ok(RecoveryMetrics {
        sup_dev,
        sup_dev_post,
        u_tracking,
        steady_state_err: tail_acc / tail_n.max(1) as f64,
        diverged: false,
    })
}

/// Paired saturated / unsaturated comparison for one tau.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeakingReport {
    pub tau: f64,
    pub t_settle: f64,
    /// max |u| over [0, T_settle], unsaturated controller.
    pub peak_unsat: f64,
    /// max of the applied (clamped) |u| over [0, T_settle], saturated run.
    pub peak_sat: f64,
    pub sup_dev_unsat: f64,
    pub sup_dev_sat: f64,
    /// Saturation seen at any sample after T_settle.
    pub sat_active_after_settle: bool,
    pub diverged_unsat: bool,
    pub diverged_sat: bool,
}

/// Everything needed to rebuild the loop at a new tau.
#[derive(Debug, Clone)]
pub struct LoopSetup {
    pub plant: LiftedPlant,
    pub nominal: NominalModel,
    pub qspec: QFilterSpec,
    pub controller: SisoRealization,
    pub reference: DisturbanceSignal,
    pub disturbance: DisturbanceSignal,
    pub sat_level: Option<f64>,
}

impl LoopSetup {
    fn sim_at(&self, tau: f64, sat_level: Option<f64>) -> Result<ClosedLoopSim> {
        let spec = self.qspec.with_tau(tau)?;
        let dob = crate::dob::realize(&self.nominal, &spec, sat_level)?;
        ClosedLoopSim::new(
            self.plant.clone(),
            dob,
            self.controller.clone(),
            self.reference.clone(),
            self.disturbance.clone(),
        )
    }
}

/// Compare unsaturated and saturated runs under an observer initial-state
/// mismatch across a tau sweep.
pub fn peaking_probe(
    setup: &LoopSetup,
    ic: &InitialState,
    taus: &[f64],
    opts: &SimOptions,
) -> Result<Vec<PeakingReport>> {
    let sat_level = setup.sat_level.ok_or_else(|| {
        DobError::Precondition("peaking probe needs a saturation level".into())
    })?;
    let mut out = Vec::with_capacity(taus.len());
    for &tau in taus {
        let t_settle = (20.0 * tau).min(opts.horizon / 2.0);
        let unsat = setup.sim_at(tau, None)?.simulate(ic, opts)?;
        let sat = setup.sim_at(tau, Some(sat_level))?.simulate(ic, opts)?;
        let peak = |tr: &SimulationTrace, clamp: Option<f64>| -> f64 {
            tr.t.iter()
                .zip(&tr.u)
                .filter(|(t, _)| **t <= t_settle)
                .map(|(_, u)| match clamp {
                    Some(l) => u.clamp(-l, l).abs(),
                    None => u.abs(),
                })
                .fold(0.0, f64::max)
        };
        let dev = |tr: &SimulationTrace| -> f64 {
            if tr.diverged {
                return f64::INFINITY;
            }
            tr.y.iter()
                .zip(&tr.y_nominal)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let sat_after = sat
            .t
            .iter()
            .zip(&sat.u_sat_active)
            .any(|(t, a)| *t > t_settle && *a);
        out.push(PeakingReport {
            tau,
            t_settle,
            peak_unsat: peak(&unsat, None),
            peak_sat: peak(&sat, Some(sat_level)),
            sup_dev_unsat: dev(&unsat),
            sup_dev_sat: dev(&sat),
            sat_active_after_settle: sat_after,
            diverged_unsat: unsat.diverged,
            diverged_sat: sat.diverged,
        });
    }
    Ok(out)
}

/// Uncertain plant family: every coefficient of the base transfer function
/// perturbed by an independent uniform relative factor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFamily {
    pub base: RationalFunction,
    /// Relative half-width, e.g. 0.5 for +/-50%.
    pub rel_spread: f64,
}

impl ScenarioFamily {
    pub fn new(base: RationalFunction, rel_spread: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rel_spread) {
            return Err(DobError::Precondition(format!(
                "relative spread must be in [0, 1), got {rel_spread}"
            )));
        }
        Ok(ScenarioFamily { base, rel_spread })
    }

    /// One perturbed plant. Degrees are preserved because the spread is
    /// below 1 (leading coefficients cannot cross zero).
    pub fn sample<R: Rng>(&self, rng: &mut R) -> RationalFunction {
        let perturb = |p: &Polynomial, rng: &mut R| -> Polynomial {
            let coeffs: Vec<f64> = (0..=p.degree())
                .map(|i| p.coeff(i) * (1.0 + self.rel_spread * rng.gen_range(-1.0..1.0)))
                .collect();
            Polynomial::new(coeffs)
        };
        let num = perturb(self.base.num(), rng);
        let den = perturb(self.base.den(), rng);
        // Spread < 1 keeps leading coefficients nonzero, so this cannot fail.
        RationalFunction::new(num, den).expect("perturbed plant degenerate")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub tau: f64,
    pub t_settle: f64,
    pub trace: SimulationTrace,
    pub metrics: RecoveryMetrics,
}

/// Run the loop at every tau concurrently; results come back sorted as
/// given.
pub fn sweep_taus(
    setup: &LoopSetup,
    ic: &InitialState,
    taus: &[f64],
    opts: &SimOptions,
) -> Result<Vec<SweepPoint>> {
    if taus.is_empty() || taus.iter().any(|t| *t <= 0.0) {
        return Err(DobError::Precondition(
            "tau sweep must be nonempty and positive".into(),
        ));
    }
    let results: Vec<Result<SweepPoint>> = std::thread::scope(|scope| {
        let handles: Vec<_> = taus
            .iter()
            .map(|&tau| {
                scope.spawn(move || -> Result<SweepPoint> {
                    let t_settle = opts
                        .t_settle
                        .unwrap_or(20.0 * tau)
                        .min(opts.horizon / 2.0);
                    let sim = setup.sim_at(tau, setup.sat_level)?;
                    let trace = sim.simulate(ic, opts)?;
                    let metrics = recovery_metrics(&trace, t_settle)?;
                    Ok(SweepPoint {
                        tau,
                        t_settle,
                        trace,
                        metrics,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    results.into_iter().collect()
}
