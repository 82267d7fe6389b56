use serde::Serialize;

use crate::error::{Error, Result};

/// Integrand `g` of `∫ g dX`: a fixed function of time, or `φ(X_t)` along the
/// sampled path.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Integrand {
    Constant { value: f64 },
    Identity,
    SinPi,
    Parabola,
    Power { tau: f64 },
    Cos2Pi,
    /// `φ(X_t)` for a smooth `φ`, as regular as the path itself.
    OfPath { phi: Phi },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phi {
    Sin,
    Cos,
    Identity,
    Tanh,
}

impl Phi {
    fn apply(self, x: f64) -> f64 {
        match self {
            Phi::Sin => x.sin(),
            Phi::Cos => x.cos(),
            Phi::Identity => x,
            Phi::Tanh => x.tanh(),
        }
    }
}

impl Integrand {
    /// Parses names such as `1`, `0`, `t`, `sin_pi`, `t(1-t)`, `t^0.5`,
    /// `cos_2pi`, `const:2.5`, `sin(X)`, `cos(X)`, `X`, `tanh(X)`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("unknown integrand `{s}`"));
        Ok(match s {
            "1" | "one" => Integrand::Constant { value: 1.0 },
            "0" | "zero" => Integrand::Constant { value: 0.0 },
            "t" => Integrand::Identity,
            "sin_pi" | "sin(pi t)" => Integrand::SinPi,
            "t(1-t)" | "parabola" => Integrand::Parabola,
            "cos_2pi" | "cos(2 pi t)" => Integrand::Cos2Pi,
            "sin(X)" => Integrand::OfPath { phi: Phi::Sin },
            "cos(X)" => Integrand::OfPath { phi: Phi::Cos },
            "X" => Integrand::OfPath { phi: Phi::Identity },
            "tanh(X)" => Integrand::OfPath { phi: Phi::Tanh },
            _ => {
                if let Some(v) = s.strip_prefix("const:") {
                    Integrand::Constant {
                        value: v.trim().parse().map_err(|_| bad())?,
                    }
                } else if let Some(v) = s.strip_prefix("t^") {
                    let tau: f64 = v.trim().parse().map_err(|_| bad())?;
                    if !(tau > 0.0 && tau <= 1.0) {
                        return Err(Error::Parse(format!("power integrand needs 0 < tau <= 1, got {tau}")));
                    }
                    Integrand::Power { tau }
                } else {
                    return Err(bad());
                }
            }
        })
    }

    pub fn label(&self) -> String {
        match self {
            Integrand::Constant { value } if *value == 1.0 => "1".into(),
            Integrand::Constant { value } if *value == 0.0 => "0".into(),
            Integrand::Constant { value } => format!("const:{value}"),
            Integrand::Identity => "t".into(),
            Integrand::SinPi => "sin_pi".into(),
            Integrand::Parabola => "t(1-t)".into(),
            Integrand::Power { tau } => format!("t^{tau}"),
            Integrand::Cos2Pi => "cos_2pi".into(),
            Integrand::OfPath { phi } => match phi {
                Phi::Sin => "sin(X)".into(),
                Phi::Cos => "cos(X)".into(),
                Phi::Identity => "X".into(),
                Phi::Tanh => "tanh(X)".into(),
            },
        }
    }

    pub fn is_deterministic(&self) -> bool {
        !matches!(self, Integrand::OfPath { .. })
    }

    /// Hölder exponent; path integrands inherit the path exponent `rho`.
    pub fn tau(&self, rho: f64) -> f64 {
        match self {
            Integrand::Power { tau } => *tau,
            Integrand::OfPath { .. } => rho,
            _ => 1.0,
        }
    }

    /// Values on `grid`; `path` is required for path integrands.
    pub fn values(&self, grid: &[f64], path: Option<&[f64]>) -> Result<Vec<f64>> {
        let f = |t: f64| -> f64 {
            match self {
                Integrand::Constant { value } => *value,
                Integrand::Identity => t,
                Integrand::SinPi => (std::f64::consts::PI * t).sin(),
                Integrand::Parabola => t * (1.0 - t),
                Integrand::Power { tau } => t.powf(*tau),
                Integrand::Cos2Pi => (2.0 * std::f64::consts::PI * t).cos(),
                Integrand::OfPath { .. } => f64::NAN,
            }
        };
        match self {
            Integrand::OfPath { phi } => {
                let x = path.ok_or_else(|| {
                    Error::InvalidArgument(format!("integrand {} needs a sampled path", self.label()))
                })?;
                if x.len() != grid.len() {
                    return Err(Error::DimensionMismatch {
                        expected: grid.len(),
                        got: x.len(),
                    });
                }
                Ok(x.iter().map(|&v| phi.apply(v)).collect())
            }
            _ => Ok(grid.iter().map(|&t| f(t)).collect()),
        }
    }

    /// The ten integrands used by the path suites: six deterministic ones and
    /// four functions of the path.
    pub fn standard_set() -> Vec<Integrand> {
        vec![
            Integrand::Constant { value: 1.0 },
            Integrand::Identity,
            Integrand::SinPi,
            Integrand::Parabola,
            Integrand::Power { tau: 0.5 },
            Integrand::Cos2Pi,
            Integrand::OfPath { phi: Phi::Sin },
            Integrand::OfPath { phi: Phi::Cos },
            Integrand::OfPath { phi: Phi::Identity },
            Integrand::OfPath { phi: Phi::Tanh },
        ]
    }
}

/// `max |v_j − v_i| / (t_j − t_i)^tau` over grid pairs.
pub fn holder_seminorm(values: &[f64], grid: &[f64], tau: f64) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            best = best.max((values[j] - values[i]).abs() / (grid[j] - grid[i]).powf(tau));
        }
    }
    best
}

/// Vector-valued version of [`holder_seminorm`].
pub fn holder_seminorm_vec(values: &[nalgebra::DVector<f64>], grid: &[f64], tau: f64) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            let d = (&values[j] - &values[i]).norm();
            best = best.max(d / (grid[j] - grid[i]).powf(tau));
        }
    }
    best
}

pub fn sup_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for g in Integrand::standard_set() {
            assert_eq!(Integrand::parse(&g.label()).unwrap(), g);
        }
        assert_eq!(Integrand::parse("const:2.5").unwrap(), Integrand::Constant { value: 2.5 });
        assert!(Integrand::parse("t^2").is_err());
        assert!(Integrand::parse("exp").is_err());
    }

    #[test]
    fn seminorms() {
        let grid = [0.0, 0.25, 1.0];
        assert_eq!(holder_seminorm(&[0.0, 0.5, 2.0], &grid, 1.0), 2.0);
        assert!((holder_seminorm(&[0.0, 0.5, 1.0], &grid, 0.5) - 1.0).abs() < 1e-15);
        assert_eq!(sup_abs(&[-3.0, 2.0]), 3.0);
    }

    #[test]
    fn path_integrand_needs_path() {
        let g = Integrand::OfPath { phi: Phi::Sin };
        assert!(g.values(&[0.0, 1.0], None).is_err());
        assert_eq!(g.values(&[0.0, 1.0], Some(&[0.0, 0.0])).unwrap(), vec![0.0, 0.0]);
        assert_eq!(g.tau(0.7), 0.7);
    }
}
