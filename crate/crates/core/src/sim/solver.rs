//! Fixed-step RK4 and adaptive Dormand-Prince RK45 integration over a
//! prescribed output grid. Samples land exactly on the grid points (the
//! adaptive stepper clips its step to the next output time), and any state
//! exceeding the divergence threshold truncates the output.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{DobError, Result};

/// Any |state component| beyond this truncates the integration.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum SolverOptions {
    Rk4 { h: f64 },
    Rk45 { rtol: f64, atol: f64 },
}

impl SolverOptions {
    pub fn default_rk45() -> Self {
        SolverOptions::Rk45 {
            rtol: 1e-8,
            atol: 1e-10,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SolverOptions::Rk4 { .. } => "rk4",
            SolverOptions::Rk45 { .. } => "rk45",
        }
    }
}

pub struct IntegrationResult {
    /// One state per grid point; shorter than the grid iff diverged.
    pub states: Vec<DVector<f64>>,
    pub diverged: bool,
    pub steps: usize,
}

fn is_finite_bounded(x: &DVector<f64>) -> bool {
    x.iter().all(|v| v.is_finite() && v.abs() <= DIVERGENCE_THRESHOLD)
}

/// Integrate `xdot = f(t, x)` from `x0` at `grid[0]`, recording the state at
/// every grid point.
pub fn integrate<F>(
    f: &F,
    x0: &DVector<f64>,
    grid: &[f64],
    opts: &SolverOptions,
) -> Result<IntegrationResult>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    if grid.len() < 2 {
        return Err(DobError::Precondition(
            "output grid needs at least two points".into(),
        ));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DobError::Precondition(
            "output grid must be strictly increasing".into(),
        ));
    }
    match opts {
        SolverOptions::Rk4 { h } => rk4(f, x0, grid, *h),
        SolverOptions::Rk45 { rtol, atol } => rk45(f, x0, grid, *rtol, *atol),
    }
}

fn rk4_step<F>(f: &F, t: f64, x: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * h, &(x + &k1 * (0.5 * h)));
    let k3 = f(t + 0.5 * h, &(x + &k2 * (0.5 * h)));
    let k4 = f(t + h, &(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

fn rk4<F>(f: &F, x0: &DVector<f64>, grid: &[f64], h: f64) -> Result<IntegrationResult>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    if !(h > 0.0) {
        return Err(DobError::Precondition(format!(
            "RK4 step must be positive, got {h}"
        )));
    }
    let mut states = Vec::with_capacity(grid.len());
    states.push(x0.clone());
    let mut x = x0.clone();
    let mut steps = 0usize;
    for w in grid.windows(2) {
        let span = w[1] - w[0];
        let nsub = (span / h).ceil().max(1.0) as usize;
        let hs = span / nsub as f64;
        let mut t = w[0];
        for _ in 0..nsub {
            x = rk4_step(f, t, &x, hs);
            t += hs;
            steps += 1;
            if !is_finite_bounded(&x) {
                return Ok(IntegrationResult {
                    states,
                    diverged: true,
                    steps,
                });
            }
        }
        states.push(x.clone());
    }
    Ok(IntegrationResult {
        states,
        diverged: false,
        steps,
    })
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn rk45<F>(
    f: &F,
    x0: &DVector<f64>,
    grid: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<IntegrationResult>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    if !(rtol > 0.0) || !(atol > 0.0) {
        return Err(DobError::Precondition(
            "RK45 tolerances must be positive".into(),
        ));
    }
    let dim = x0.len();
    let horizon = grid[grid.len() - 1] - grid[0];
    let h_min = horizon * 1e-14;
    let mut states = Vec::with_capacity(grid.len());
    states.push(x0.clone());
    let mut x = x0.clone();
    let mut t = grid[0];
    let mut h = (grid[1] - grid[0]).min(horizon / 100.0);
    let mut steps = 0usize;

    for w in grid.windows(2) {
        let t_end = w[1];
        while t < t_end {
            let h_try = h.min(t_end - t);
            let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
            k.push(f(t, &x));
            for i in 0..6 {
                let mut xs = x.clone();
                for (j, kj) in k.iter().enumerate() {
                    let aij = A[i][j];
                    if aij != 0.0 {
                        xs += kj * (aij * h_try);
                    }
                }
                k.push(f(t + C[i] * h_try, &xs));
            }
            let mut x5 = x.clone();
            let mut x4 = x.clone();
            for (j, kj) in k.iter().enumerate() {
                if B5[j] != 0.0 {
                    x5 += kj * (B5[j] * h_try);
                }
                if B4[j] != 0.0 {
                    x4 += kj * (B4[j] * h_try);
                }
            }
            // Weighted RMS error against the mixed tolerance.
            let mut acc = 0.0;
            for i in 0..dim {
                let sc = atol + rtol * x5[i].abs().max(x[i].abs());
                let e = (x5[i] - x4[i]) / sc;
                acc += e * e;
            }
            let err = (acc / dim as f64).sqrt();
            steps += 1;
            if err <= 1.0 || !err.is_finite() {
                if !err.is_finite() {
                    // A non-finite error estimate means the state blew up
                    // inside the step; treat as divergence.
                    return Ok(IntegrationResult {
                        states,
                        diverged: true,
                        steps,
                    });
                }
                t += h_try;
                x = x5;
                if !is_finite_bounded(&x) {
                    return Ok(IntegrationResult {
                        states,
                        diverged: true,
                        steps,
                    });
                }
            }
            let factor = if err > 0.0 {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            } else {
                5.0
            };
            h = (h_try * factor).max(h_min);
            if h_try <= h_min && err > 1.0 {
                return Err(DobError::Solver(format!(
                    "step size underflow at t = {t:.6e} (h = {h_try:.3e})"
                )));
            }
        }
        states.push(x.clone());
    }
    Ok(IntegrationResult {
        states,
        diverged: false,
        steps,
    })
}
