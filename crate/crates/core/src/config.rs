//! Experiment configuration: the JSON schema consumed by the command-line
//! front end, plus resolution into the typed objects of the library.
//! Validation failures carry the offending field path.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DobError, Result};
use crate::lti::{NominalModel, SisoRealization, StateSpacePlant};
use crate::poly::{Polynomial, RationalFunction};
use crate::qfilter::{design_coefficients, DesignResult, GainInterval, QFilterSpec, DEFAULT_SAFETY};
use crate::sim::{
    DisturbanceSignal, InitialState, LiftedPlant, ScenarioFamily, SimOptions, SolverOptions,
    DEFAULT_HORIZON, DEFAULT_SAMPLES,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TfSpec {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

impl TfSpec {
    pub fn to_rational(&self, field: &str) -> Result<RationalFunction> {
        if self.num.is_empty() || self.den.is_empty() {
            return Err(DobError::config(field, "num and den must be nonempty"));
        }
        RationalFunction::new(
            Polynomial::new(self.num.clone()),
            Polynomial::new(self.den.clone()),
        )
        .map_err(|e| DobError::config(field, e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsSpec {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// Disturbance input map columns; defaults to the input channel b.
    #[serde(default)]
    pub e: Option<Vec<Vec<f64>>>,
}

impl SsSpec {
    pub fn to_plant(&self, field: &str) -> Result<StateSpacePlant> {
        let n = self.a.len();
        if n == 0 || self.a.iter().any(|r| r.len() != n) {
            return Err(DobError::config(format!("{field}.a"), "A must be square"));
        }
        if self.b.len() != n || self.c.len() != n {
            return Err(DobError::config(field, "b and c must have length n"));
        }
        let a = DMatrix::from_fn(n, n, |i, j| self.a[i][j]);
        let b = DVector::from_vec(self.b.clone());
        let c = RowDVector::from_vec(self.c.clone());
        let e = match &self.e {
            None => DMatrix::from_column_slice(n, 1, b.as_slice()),
            Some(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != rows[0].len()) {
                    return Err(DobError::config(
                        format!("{field}.e"),
                        "E must have n equal-length rows",
                    ));
                }
                DMatrix::from_fn(n, rows[0].len(), |i, j| rows[i][j])
            }
        };
        StateSpacePlant::new(a, b, c, e)
    }
}

/// Exactly one of `tf` or `ss`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    #[serde(default)]
    pub tf: Option<TfSpec>,
    #[serde(default)]
    pub ss: Option<SsSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignRequest {
    pub tau: f64,
    /// Absolute plant gain interval containing the true g.
    pub g_min: f64,
    pub g_max: f64,
    /// Ascending coefficients of the monic Hurwitz rho(s), degree nu - 1;
    /// defaults to (s + 1)^(nu - 1).
    #[serde(default)]
    pub rho: Option<Vec<f64>>,
    #[serde(default)]
    pub safety: Option<f64>,
}

/// Either a fully specified filter {tau, mu, a, c} or a design request.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QFilterConfig {
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub mu: Option<usize>,
    #[serde(default)]
    pub a: Option<Vec<f64>>,
    #[serde(default)]
    pub c: Option<Vec<f64>>,
    #[serde(default)]
    pub design: Option<DesignRequest>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub plant: Option<PlantSpec>,
    #[serde(default)]
    pub nominal: Option<TfSpec>,
    #[serde(default)]
    pub qfilter: Option<QFilterConfig>,
    /// Outer controller C as a transfer function.
    #[serde(default)]
    pub controller: Option<TfSpec>,
    #[serde(default)]
    pub disturbance: Option<DisturbanceSignal>,
    #[serde(default)]
    pub reference: Option<DisturbanceSignal>,
    #[serde(default)]
    pub taus: Vec<f64>,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub solver: Option<SolverOptions>,
    #[serde(default)]
    pub sat_level: Option<f64>,
    #[serde(default)]
    pub initial: Option<InitialState>,
    #[serde(default)]
    pub t_settle: Option<f64>,
    /// Uniform relative perturbation applied to the plant coefficients
    /// (tf plants only); sampled with the seed for reproducible sweeps.
    #[serde(default)]
    pub plant_spread: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| DobError::config(path.display().to_string(), e.to_string()))?;
        serde_json::from_str(&text)
            .map_err(|e| DobError::config(path.display().to_string(), e.to_string()))
    }

    fn plant_spec(&self) -> Result<&PlantSpec> {
        let p = self
            .plant
            .as_ref()
            .ok_or_else(|| DobError::config("plant", "missing"))?;
        match (&p.tf, &p.ss) {
            (Some(_), Some(_)) => Err(DobError::config("plant", "give either tf or ss, not both")),
            (None, None) => Err(DobError::config("plant", "needs a tf or ss block")),
            _ => Ok(p),
        }
    }

    /// The plant transfer function, with the coefficient perturbation
    /// applied when a spread is configured.
    pub fn plant_rational(&self, seed_override: Option<u64>) -> Result<RationalFunction> {
        let spec = self.plant_spec()?;
        let base = match (&spec.tf, &spec.ss) {
            (Some(tf), _) => tf.to_rational("plant.tf")?,
            (_, Some(ss)) => ss.to_plant("plant.ss")?.transfer_function()?,
            _ => unreachable!(),
        };
        match self.plant_spread {
            None => Ok(base),
            Some(spread) => {
                if spec.tf.is_none() {
                    return Err(DobError::config(
                        "plant_spread",
                        "coefficient perturbation needs a tf plant",
                    ));
                }
                let family = ScenarioFamily::new(base, spread)
                    .map_err(|e| DobError::config("plant_spread", e.to_string()))?;
                let seed = seed_override.or(self.seed).unwrap_or(0);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(family.sample(&mut rng))
            }
        }
    }

    pub fn plant_lifted(&self, seed_override: Option<u64>) -> Result<LiftedPlant> {
        let spec = self.plant_spec()?;
        if spec.ss.is_some() && self.plant_spread.is_none() {
            return LiftedPlant::from_state_space(&spec.ss.as_ref().unwrap().to_plant("plant.ss")?);
        }
        LiftedPlant::from_tf(&self.plant_rational(seed_override)?)
    }

    pub fn nominal_rational(&self) -> Result<RationalFunction> {
        self.nominal
            .as_ref()
            .ok_or_else(|| DobError::config("nominal", "missing"))?
            .to_rational("nominal")
    }

    pub fn nominal_model(&self) -> Result<NominalModel> {
        NominalModel::from_tf(&self.nominal_rational()?)
    }

    pub fn controller_rational(&self) -> Result<RationalFunction> {
        self.controller
            .as_ref()
            .ok_or_else(|| DobError::config("controller", "missing"))?
            .to_rational("controller")
    }

    pub fn controller_realization(&self) -> Result<SisoRealization> {
        SisoRealization::from_rational(&self.controller_rational()?)
    }

    fn qfilter_config(&self) -> Result<&QFilterConfig> {
        self.qfilter
            .as_ref()
            .ok_or_else(|| DobError::config("qfilter", "missing"))
    }

    pub fn design_request(&self) -> Result<&DesignRequest> {
        self.qfilter_config()?
            .design
            .as_ref()
            .ok_or_else(|| DobError::config("qfilter.design", "missing"))
    }

    /// Run the coefficient design for the nominal model's relative degree.
    pub fn run_design(&self, nominal: &NominalModel) -> Result<(DesignResult, GainInterval)> {
        let req = self.design_request()?;
        let nu = nominal.model.nu;
        let rho = match &req.rho {
            Some(coeffs) => Polynomial::new(coeffs.clone()),
            None => {
                // (s + 1)^(nu - 1)
                let mut p = Polynomial::one();
                for _ in 0..nu - 1 {
                    p = &p * &Polynomial::new(vec![1.0, 1.0]);
                }
                p
            }
        };
        let gains = GainInterval::new(req.g_min, req.g_max, nominal.g_n())?;
        let safety = req.safety.unwrap_or(DEFAULT_SAFETY);
        let result = design_coefficients(nu, &rho, &gains, safety)?;
        Ok((result, gains))
    }

    /// The Q-filter spec, designing coefficients first when requested.
    pub fn qfilter_spec(&self, nominal: &NominalModel) -> Result<QFilterSpec> {
        let qc = self.qfilter_config()?;
        if let Some(_req) = &qc.design {
            if qc.a.is_some() || qc.c.is_some() || qc.mu.is_some() {
                return Err(DobError::config(
                    "qfilter",
                    "give either a design request or explicit coefficients, not both",
                ));
            }
            let (result, _) = self.run_design(nominal)?;
            return result.spec(self.design_request()?.tau);
        }
        let tau = qc
            .tau
            .ok_or_else(|| DobError::config("qfilter.tau", "missing"))?;
        let mu = qc
            .mu
            .ok_or_else(|| DobError::config("qfilter.mu", "missing"))?;
        let a = qc
            .a
            .clone()
            .ok_or_else(|| DobError::config("qfilter.a", "missing"))?;
        let c = qc
            .c
            .clone()
            .ok_or_else(|| DobError::config("qfilter.c", "missing"))?;
        QFilterSpec::new(tau, mu, a, c)
    }

    /// Descending, deduplicated tau sweep, with an optional CLI override.
    pub fn tau_list(&self, override_taus: &[f64]) -> Result<Vec<f64>> {
        let mut taus = if !override_taus.is_empty() {
            override_taus.to_vec()
        } else {
            self.taus.clone()
        };
        if taus.is_empty() {
            if let Some(qc) = &self.qfilter {
                if let Some(tau) = qc.tau.or(qc.design.as_ref().map(|d| d.tau)) {
                    taus.push(tau);
                }
            }
        }
        if taus.is_empty() {
            return Err(DobError::config("taus", "no tau values given"));
        }
        if taus.iter().any(|t| !(*t > 0.0)) {
            return Err(DobError::config("taus", "tau values must be positive"));
        }
        taus.sort_by(|a, b| b.partial_cmp(a).unwrap());
        taus.dedup();
        Ok(taus)
    }

    pub fn sim_options(&self, solver_override: Option<SolverOptions>) -> SimOptions {
        SimOptions {
            horizon: self.horizon.unwrap_or(DEFAULT_HORIZON),
            samples: self.samples.unwrap_or(DEFAULT_SAMPLES),
            solver: solver_override
                .or(self.solver)
                .unwrap_or_else(SolverOptions::default_rk45),
            disable_inner_loop: false,
            t_settle: self.t_settle,
        }
    }

    pub fn reference_signal(&self) -> DisturbanceSignal {
        self.reference.clone().unwrap_or(DisturbanceSignal::Zero)
    }

    pub fn disturbance_signal(&self) -> DisturbanceSignal {
        self.disturbance.clone().unwrap_or(DisturbanceSignal::Zero)
    }

    pub fn initial_state(&self) -> InitialState {
        self.initial.clone().unwrap_or_default()
    }
}
