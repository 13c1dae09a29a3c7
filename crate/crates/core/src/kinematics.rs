//! Wigner tetrad, rest-frame embedding and the three relativistic collective
//! variables (Fokker-Pryce center of inertia, canonical center of mass,
//! Møller center of energy), plus the Møller world-tube scan.
//!
//! Signature is (+,−,−,−) throughout; every inner product goes through
//! [`FourVector::dot`].

use std::ops::{Add, Mul, Neg, Sub};
use std::path::Path;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure_finite, validation, Result};

pub type Vec3 = Vector3<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FourVector {
    pub t: f64,
    pub x: [f64; 3],
}

impl FourVector {
    pub fn new(t: f64, x: Vec3) -> Self {
        Self { t, x: x.into() }
    }

    pub fn spatial(&self) -> Vec3 {
        Vec3::from(self.x)
    }

    /// Minkowski product with signature (+,−,−,−).
    pub fn dot(&self, other: &FourVector) -> f64 {
        self.t * other.t - self.spatial().dot(&other.spatial())
    }

    pub fn square(&self) -> f64 {
        self.dot(self)
    }
}

impl Add for FourVector {
    type Output = FourVector;
    fn add(self, rhs: FourVector) -> FourVector {
        FourVector::new(self.t + rhs.t, self.spatial() + rhs.spatial())
    }
}

impl Sub for FourVector {
    type Output = FourVector;
    fn sub(self, rhs: FourVector) -> FourVector {
        FourVector::new(self.t - rhs.t, self.spatial() - rhs.spatial())
    }
}

impl Neg for FourVector {
    type Output = FourVector;
    fn neg(self) -> FourVector {
        FourVector::new(-self.t, -self.spatial())
    }
}

impl Mul<f64> for FourVector {
    type Output = FourVector;
    fn mul(self, k: f64) -> FourVector {
        FourVector::new(self.t * k, self.spatial() * k)
    }
}

/// Frozen Jacobi data `(z, h)` of the external center of mass together with
/// the Casimirs `Mc` and rest spin `S`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollectiveState {
    /// Jacobi position datum, `Mc` times the Newton-Wigner position at τ = 0.
    pub z: Vec3,
    /// `P/Mc`, dimensionless.
    pub h: Vec3,
    pub mc: f64,
    pub spin: Vec3,
    pub c: f64,
}

impl CollectiveState {
    pub fn new(z: Vec3, h: Vec3, mc: f64, spin: Vec3, c: f64) -> Result<Self> {
        ensure_finite("collective state", &[z.x, z.y, z.z, h.x, h.y, h.z])?;
        ensure_finite("collective state", &[spin.x, spin.y, spin.z])?;
        if !(mc.is_finite() && mc > 0.0) {
            return Err(validation(format!("Mc must be positive, got {mc}")));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(validation(format!("c must be positive, got {c}")));
        }
        Ok(Self { z, h, mc, spin, c })
    }

    /// `√(1 + h²)`.
    pub fn gamma(&self) -> f64 {
        (1.0 + self.h.norm_squared()).sqrt()
    }

    pub fn h_mu(&self) -> FourVector {
        FourVector::new(self.gamma(), self.h)
    }
}

/// The Wigner boost columns `ε^μ_r(h)` together with `h^μ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tetrad {
    pub h_mu: FourVector,
    pub eps_r: [FourVector; 3],
}

impl Tetrad {
    /// `ε^μ_r(h) σ^r`.
    pub fn apply(&self, sigma: &Vec3) -> FourVector {
        self.eps_r[0] * sigma.x + self.eps_r[1] * sigma.y + self.eps_r[2] * sigma.z
    }

    /// Largest deviation from `h·h = 1`, `h·ε_r = 0`, `ε_r·ε_s = −δ_rs`.
    pub fn orthonormality_residual(&self) -> f64 {
        let mut worst = (self.h_mu.square() - 1.0).abs();
        for r in 0..3 {
            worst = worst.max(self.h_mu.dot(&self.eps_r[r]).abs());
            for s in 0..3 {
                let delta = if r == s { 1.0 } else { 0.0 };
                worst = worst.max((self.eps_r[r].dot(&self.eps_r[s]) + delta).abs());
            }
        }
        worst
    }
}

pub fn wigner_tetrad(h: &Vec3) -> Result<Tetrad> {
    ensure_finite("h", h.as_slice())?;
    Ok(tetrad_unchecked(h))
}

fn tetrad_unchecked(h: &Vec3) -> Tetrad {
    let gamma = (1.0 + h.norm_squared()).sqrt();
    let k = 1.0 / (1.0 + gamma);
    let column = |r: usize| {
        let mut spatial = *h * (h[r] * k);
        spatial[r] += 1.0;
        FourVector::new(h[r], spatial)
    };
    Tetrad {
        h_mu: FourVector::new(gamma, *h),
        eps_r: [column(0), column(1), column(2)],
    }
}

/// Rest-frame embedding `z_W(τ, σ) = Y(τ) + ε_r(h) σ^r`.
pub fn embed(cs: &CollectiveState, tau: f64, sigma: &Vec3) -> Result<FourVector> {
    ensure_finite("embedding point", &[tau, sigma.x, sigma.y, sigma.z])?;
    Ok(fokker_pryce(cs, tau) + tetrad_unchecked(&cs.h).apply(sigma))
}

/// Fokker-Pryce center of inertia `Y^μ(τ)`.
pub fn fokker_pryce(cs: &CollectiveState, tau: f64) -> FourVector {
    let gamma = cs.gamma();
    let lapse = tau + cs.h.dot(&cs.z) / cs.mc;
    let spatial =
        cs.z / cs.mc + cs.h * lapse + cs.spin.cross(&cs.h) / (cs.mc * (1.0 + gamma));
    FourVector::new(gamma * lapse, spatial)
}

/// Canonical (Newton-Wigner) center of mass `x̃^μ(τ)`.
pub fn canonical_cm(cs: &CollectiveState, tau: f64) -> FourVector {
    fokker_pryce(cs, tau) + FourVector::new(0.0, canonical_offset(cs))
}

/// Møller center of energy `R^μ(τ) = Y^μ + (0; −S×h/(Mc γ))`.
pub fn moller_center(cs: &CollectiveState, tau: f64) -> FourVector {
    fokker_pryce(cs, tau) + FourVector::new(0.0, moller_offset(cs))
}

fn canonical_offset(cs: &CollectiveState) -> Vec3 {
    -cs.spin.cross(&cs.h) / (cs.mc * (1.0 + cs.gamma()))
}

fn moller_offset(cs: &CollectiveState) -> Vec3 {
    -cs.spin.cross(&cs.h) / (cs.mc * cs.gamma())
}

/// Invariant radius `|S|/Mc` of the non-covariance world-tube.
pub fn moller_radius(mc: f64, spin: &Vec3) -> Result<f64> {
    if !(mc.is_finite() && mc > 0.0) {
        return Err(validation(format!("Mc must be positive, got {mc}")));
    }
    ensure_finite("S", spin.as_slice())?;
    Ok(spin.norm() / mc)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TubeSample {
    pub hx: f64,
    pub hy: f64,
    pub hz: f64,
    pub offset_xtilde: f64,
    #[serde(rename = "offset_R")]
    pub offset_r: f64,
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TubeReport {
    pub rho: f64,
    pub samples: Vec<TubeSample>,
    pub sup_xtilde: f64,
    pub sup_r: f64,
    /// Largest violation of `x̃ = Y + λ (R − Y)` with `λ ∈ [0, 1]`.
    pub betweenness_residual: f64,
}

impl TubeReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_csv_atomic(path, &self.samples)
    }
}

/// Offsets of `x̃` and `R` from `Y` for every boost `h` in the scan, with the
/// (τ-independent) Møller radius built from the Casimirs of `cs`.
pub fn tube_scan(cs: &CollectiveState, h_samples: &[Vec3]) -> Result<TubeReport> {
    if h_samples.is_empty() {
        return Err(validation("tube_scan needs at least one h sample"));
    }
    for h in h_samples {
        ensure_finite("h sample", h.as_slice())?;
    }
    let rho = moller_radius(cs.mc, &cs.spin)?;
    let rows: Vec<(TubeSample, f64)> = h_samples
        .par_iter()
        .map(|h| {
            let boosted = CollectiveState { h: *h, ..*cs };
            let y = fokker_pryce(&boosted, 0.0);
            let xt = canonical_cm(&boosted, 0.0) - y;
            let r = moller_center(&boosted, 0.0) - y;
            let sample = TubeSample {
                hx: h.x,
                hy: h.y,
                hz: h.z,
                offset_xtilde: xt.spatial().norm(),
                offset_r: r.spatial().norm(),
                rho,
            };
            (sample, betweenness(&xt.spatial(), &r.spatial()))
        })
        .collect();
    let samples: Vec<TubeSample> = rows.iter().map(|(s, _)| *s).collect();
    let fold = |f: fn(&TubeSample) -> f64| samples.iter().map(f).fold(0.0, f64::max);
    Ok(TubeReport {
        rho,
        sup_xtilde: fold(|s| s.offset_xtilde),
        sup_r: fold(|s| s.offset_r),
        betweenness_residual: rows.iter().map(|(_, b)| *b).fold(0.0, f64::max),
        samples,
    })
}

// Distance of `a` from the segment [0, b].
fn betweenness(a: &Vec3, b: &Vec3) -> f64 {
    let bb = b.norm_squared();
    if bb == 0.0 {
        return a.norm();
    }
    let lambda = (a.dot(b) / bb).clamp(0.0, 1.0);
    (a - b * lambda).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(z: Vec3, h: Vec3, mc: f64, spin: Vec3) -> CollectiveState {
        CollectiveState::new(z, h, mc, spin, 1.0).unwrap()
    }

    #[test]
    fn identity_tetrad_at_rest() {
        let t = wigner_tetrad(&Vec3::zeros()).unwrap();
        for r in 0..3 {
            assert_eq!(t.eps_r[r].t, 0.0);
            let mut e = [0.0; 3];
            e[r] = 1.0;
            assert_eq!(t.eps_r[r].x, e);
        }
    }

    #[test]
    fn boosted_tetrad_column() {
        let t = wigner_tetrad(&Vec3::new(0.6, 0.0, 0.0)).unwrap();
        let e1 = t.eps_r[0];
        // 1 + 0.36/(1 + √1.36)
        let expected = 1.0 + 0.36 / (1.0 + 1.36_f64.sqrt());
        assert!((e1.t - 0.6).abs() < 1e-15);
        assert!((e1.x[0] - expected).abs() < 1e-15);
        assert!((e1.x[0] - 1.16619).abs() < 1e-5);
        assert!((e1.square() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite_h() {
        assert!(wigner_tetrad(&Vec3::new(f64::NAN, 0.0, 0.0)).is_err());
        assert!(wigner_tetrad(&Vec3::new(0.0, f64::INFINITY, 0.0)).is_err());
    }

    #[test]
    fn embedding_examples() {
        let cs = state(Vec3::new(0.3, -0.2, 0.1), Vec3::zeros(), 2.0, Vec3::zeros());
        let y = fokker_pryce(&cs, 0.7);
        assert_eq!(embed(&cs, 0.7, &Vec3::zeros()).unwrap(), y);
        let shifted = embed(&cs, 0.7, &Vec3::new(1.0, 0.0, 0.0)).unwrap() - y;
        assert!((shifted - FourVector::new(0.0, Vec3::new(1.0, 0.0, 0.0))).square().abs() < 1e-30);

        let boosted = state(Vec3::zeros(), Vec3::new(0.6, 0.0, 0.0), 1.0, Vec3::zeros());
        let d = embed(&boosted, 0.0, &Vec3::new(1.0, 0.0, 0.0)).unwrap()
            - fokker_pryce(&boosted, 0.0);
        assert!((d.t - 0.6).abs() < 1e-15);
        assert!((d.x[0] - 1.16619).abs() < 1e-5);
    }

    #[test]
    fn fokker_pryce_examples() {
        let cs = state(Vec3::new(0.4, 1.0, -2.0), Vec3::zeros(), 2.0, Vec3::new(0.0, 0.0, 1.0));
        let y = fokker_pryce(&cs, 1.5);
        assert_eq!(y.t, 1.5);
        assert_eq!(y.x, [0.2, 0.5, -1.0]);

        let cs = state(Vec3::zeros(), Vec3::new(0.6, 0.0, 0.0), 1.0, Vec3::zeros());
        let y = fokker_pryce(&cs, 1.0);
        assert!((y.t - 1.36_f64.sqrt()).abs() < 1e-15);
        assert!((y.x[0] - 0.6).abs() < 1e-15);
        assert_eq!((y.x[1], y.x[2]), (0.0, 0.0));

        let cs = state(Vec3::new(1.0, 0.0, 0.0), Vec3::zeros(), 2.0, Vec3::zeros());
        let y = fokker_pryce(&cs, 0.0);
        assert_eq!((y.t, y.x), (0.0, [0.5, 0.0, 0.0]));
    }

    #[test]
    fn centers_coincide_at_rest_and_for_parallel_spin() {
        let rest = state(Vec3::new(0.1, 0.2, 0.3), Vec3::zeros(), 1.3, Vec3::new(0.3, -0.5, 0.9));
        assert_eq!(canonical_cm(&rest, 0.4), fokker_pryce(&rest, 0.4));
        assert_eq!(moller_center(&rest, 0.4), fokker_pryce(&rest, 0.4));

        let par = state(Vec3::zeros(), Vec3::new(0.0, 0.0, 2.0), 1.0, Vec3::new(0.0, 0.0, 3.0));
        assert_eq!(canonical_cm(&par, 0.0), fokker_pryce(&par, 0.0));
    }

    #[test]
    fn canonical_and_moller_offsets() {
        let cs = state(Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), 1.0, Vec3::new(0.0, 0.0, 1.0));
        let y = fokker_pryce(&cs, 0.0);
        let xt = (canonical_cm(&cs, 0.0) - y).spatial().norm();
        let r = (moller_center(&cs, 0.0) - y).spatial().norm();
        assert!((xt - 1.0 / (1.0 + 2.0_f64.sqrt())).abs() < 1e-15);
        assert!((xt - 0.41421).abs() < 1e-5);
        assert!((r - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(r > xt);
    }

    #[test]
    fn moller_offset_approaches_radius() {
        let spin = Vec3::new(0.0, 0.0, 1.0);
        let mut last = 0.0;
        for t in [1.0, 10.0, 1e2, 1e3, 1e5] {
            let cs = state(Vec3::zeros(), Vec3::new(t, 0.0, 0.0), 1.0, spin);
            let off = moller_offset(&cs).norm();
            assert!(off > last && off < 1.0);
            last = off;
        }
        assert!(1.0 - last < 1e-9);
    }

    #[test]
    fn radius_examples() {
        assert_eq!(moller_radius(1.0, &Vec3::zeros()).unwrap(), 0.0);
        assert_eq!(moller_radius(2.0, &Vec3::new(0.0, 1.0, 0.0)).unwrap(), 0.5);
        assert!(moller_radius(0.0, &Vec3::zeros()).is_err());
        assert!(moller_radius(-1.0, &Vec3::zeros()).is_err());
    }

    #[test]
    fn tube_scan_examples() {
        let cs = state(Vec3::zeros(), Vec3::zeros(), 1.0, Vec3::new(0.0, 0.0, 1.0));
        assert!(tube_scan(&cs, &[]).is_err());

        let parallel: Vec<Vec3> = (1..5).map(|k| Vec3::new(0.0, 0.0, k as f64)).collect();
        let report = tube_scan(&cs, &parallel).unwrap();
        assert!(report.samples.iter().all(|s| s.offset_xtilde == 0.0 && s.offset_r == 0.0));

        let hs: Vec<Vec3> = [1.0, 10.0, 100.0].iter().map(|&t| Vec3::new(t, 0.0, 0.0)).collect();
        let report = tube_scan(&cs, &hs).unwrap();
        for (s, t) in report.samples.iter().zip([1.0_f64, 10.0, 100.0]) {
            let expected = t / (1.0 + (1.0 + t * t).sqrt());
            assert!((s.offset_xtilde - expected).abs() < 1e-14);
            assert!(s.offset_xtilde <= s.offset_r && s.offset_r <= s.rho);
        }
        assert!(report.betweenness_residual < 1e-15);
    }
}
