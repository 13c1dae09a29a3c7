use serde::{Deserialize, Serialize};

use crate::ad::Real;
use crate::error::{validation, Error, Result};

/// Action-at-a-distance potential as a function of the squared relative
/// distance `s = ρ²`.
#[derive(Clone, Debug, PartialEq)]
pub enum Potential {
    /// `Σ_k a_k s^k`; an empty coefficient list is the free case.
    Polynomial(Vec<f64>),
    /// `ω² s`.
    Oscillator { omega: f64 },
    /// `−K/√s`.
    Coulomb { strength: f64 },
}

impl Potential {
    pub fn free() -> Self {
        Potential::Polynomial(Vec::new())
    }

    pub fn eval<T: Real>(&self, s: T) -> T {
        match self {
            Potential::Polynomial(coeffs) => coeffs
                .iter()
                .rev()
                .fold(T::zero(), |acc, &a| acc * s + T::from_f64(a)),
            Potential::Oscillator { omega } => s.scale(omega * omega),
            Potential::Coulomb { strength } => -T::from_f64(*strength) / s.sqrt(),
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        self.eval(s)
    }

    /// `dV/ds`.
    pub fn derivative(&self, s: f64) -> f64 {
        match self {
            Potential::Polynomial(coeffs) => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &a)| acc * s + k as f64 * a),
            Potential::Oscillator { omega } => omega * omega,
            Potential::Coulomb { strength } => 0.5 * strength / (s * s.sqrt()),
        }
    }

    /// True when `V` is identically zero.
    pub fn is_free(&self) -> bool {
        match self {
            Potential::Polynomial(c) => c.iter().all(|&a| a == 0.0),
            Potential::Oscillator { omega } => *omega == 0.0,
            Potential::Coulomb { strength } => *strength == 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    Coulomb,
    Oscillator,
    CustomPolynomial,
}

/// Config-file form of a [`Potential`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    #[serde(default)]
    pub coefficients: Vec<f64>,
}

impl TryFrom<&PotentialSpec> for Potential {
    type Error = Error;

    fn try_from(spec: &PotentialSpec) -> Result<Potential> {
        if spec.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(validation("potential coefficients must be finite"));
        }
        let single = |name: &str| match spec.coefficients.as_slice() {
            [v] => Ok(*v),
            _ => Err(validation(format!(
                "{name} potential takes exactly one coefficient"
            ))),
        };
        Ok(match spec.kind {
            PotentialKind::Coulomb => Potential::Coulomb {
                strength: single("coulomb")?,
            },
            PotentialKind::Oscillator => Potential::Oscillator {
                omega: single("oscillator")?,
            },
            PotentialKind::CustomPolynomial => Potential::Polynomial(spec.coefficients.clone()),
        })
    }
}
