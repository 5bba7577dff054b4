//! Closed-form exogenous signals (references and disturbances) with
//! analytic derivatives of every order. The disturbance lift needs the
//! first nu-1 derivatives exactly; numeric differentiation would corrupt
//! them.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DisturbanceSignal {
    Zero,
    Constant {
        level: f64,
    },
    /// amplitude * sin(omega t + phase)
    Sinusoid {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// coeffs[0] + coeffs[1] t + coeffs[2] t^2 + ...
    PolynomialInT {
        coeffs: Vec<f64>,
    },
    Sum {
        terms: Vec<DisturbanceSignal>,
    },
}

impl DisturbanceSignal {
    pub fn value(&self, t: f64) -> f64 {
        self.derivative(t, 0)
    }

    /// `order`-th time derivative at `t`, exact for every kind.
    pub fn derivative(&self, t: f64, order: usize) -> f64 {
        match self {
            DisturbanceSignal::Zero => 0.0,
            DisturbanceSignal::Constant { level } => {
                if order == 0 {
                    *level
                } else {
                    0.0
                }
            }
            DisturbanceSignal::Sinusoid {
                amplitude,
                omega,
                phase,
            } => {
                // d^k/dt^k sin(wt + p) = w^k sin(wt + p + k pi/2)
                amplitude
                    * omega.powi(order as i32)
                    * (omega * t + phase + order as f64 * std::f64::consts::FRAC_PI_2).sin()
            }
            DisturbanceSignal::PolynomialInT { coeffs } => {
                let mut acc = 0.0;
                for (i, c) in coeffs.iter().enumerate() {
                    if i < order {
                        continue;
                    }
                    // falling factorial i (i-1) ... (i-order+1)
                    let mut w = *c;
                    for k in 0..order {
                        w *= (i - k) as f64;
                    }
                    acc += w * t.powi((i - order) as i32);
                }
                acc
            }
            DisturbanceSignal::Sum { terms } => {
                terms.iter().map(|s| s.derivative(t, order)).sum()
            }
        }
    }

    /// Structurally zero (used to skip disturbance-lift work entirely).
    pub fn is_zero(&self) -> bool {
        match self {
            DisturbanceSignal::Zero => true,
            DisturbanceSignal::Constant { level } => *level == 0.0,
            DisturbanceSignal::Sinusoid { amplitude, .. } => *amplitude == 0.0,
            DisturbanceSignal::PolynomialInT { coeffs } => coeffs.iter().all(|c| *c == 0.0),
            DisturbanceSignal::Sum { terms } => terms.iter().all(|s| s.is_zero()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sinusoid_derivatives() {
        let s = DisturbanceSignal::Sinusoid {
            amplitude: 2.0,
            omega: 3.0,
            phase: 0.4,
        };
        let t = 0.7;
        assert_relative_eq!(s.value(t), 2.0 * (3.0 * t + 0.4).sin(), epsilon = 1e-14);
        assert_relative_eq!(
            s.derivative(t, 1),
            6.0 * (3.0 * t + 0.4).cos(),
            epsilon = 1e-13
        );
        assert_relative_eq!(
            s.derivative(t, 2),
            -18.0 * (3.0 * t + 0.4).sin(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn polynomial_derivatives() {
        // 1 + 2t + 3t^2: p' = 2 + 6t, p'' = 6, p''' = 0
        let s = DisturbanceSignal::PolynomialInT {
            coeffs: vec![1.0, 2.0, 3.0],
        };
        assert_relative_eq!(s.value(2.0), 17.0);
        assert_relative_eq!(s.derivative(2.0, 1), 14.0);
        assert_relative_eq!(s.derivative(2.0, 2), 6.0);
        assert_relative_eq!(s.derivative(2.0, 3), 0.0);
    }

    #[test]
    fn sum_and_zero() {
        let s = DisturbanceSignal::Sum {
            terms: vec![
                DisturbanceSignal::Constant { level: 1.5 },
                DisturbanceSignal::Sinusoid {
                    amplitude: 0.5,
                    omega: 1.0,
                    phase: 0.0,
                },
            ],
        };
        assert_relative_eq!(s.value(0.0), 1.5);
        assert_relative_eq!(s.derivative(0.0, 1), 0.5);
        assert!(!s.is_zero());
        assert!(DisturbanceSignal::Zero.is_zero());
        assert!(DisturbanceSignal::Constant { level: 0.0 }.is_zero());
    }

    #[test]
    fn serde_round_trip() {
        let s = DisturbanceSignal::Sum {
            terms: vec![
                DisturbanceSignal::Constant { level: 1.0 },
                DisturbanceSignal::PolynomialInT {
                    coeffs: vec![0.0, 1.0],
                },
            ],
        };
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"kind\":\"sum\""));
        assert!(json.contains("polynomial-in-t"));
        let back: DisturbanceSignal = serde_json::from_str(&json).unwrap();
        assert_relative_eq!(back.value(2.0), 3.0);
    }
}
