//! Positive-energy one-particle wave packets, `i∂_τ g = √(m²c² − ∂²) g`,
//! and the straight classical trajectory carried by their mean position.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dynamics::fit_line;
use crate::error::{ensure_finite, validation, Result};

/// Momentum-space amplitudes on `k_j = (j − N)Δk`, `j = 0..2N`.
#[derive(Clone, Debug, PartialEq)]
pub struct WavePacket {
    pub amplitudes: Vec<Complex64>,
    pub dk: f64,
    pub mass: f64,
    pub c: f64,
}

/// Gaussian packet `a_k ∝ exp(−(k − k̄)²/4w² − ikσ₀)` on a box of length `L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianPacket {
    pub k_mean: f64,
    pub k_width: f64,
    #[serde(default)]
    pub center: f64,
    pub mass: f64,
    pub c: f64,
    pub length: f64,
}

impl WavePacket {
    /// Normalizes `amplitudes` to `Σ|a|²Δk = 1`; the count must be odd.
    pub fn new(amplitudes: Vec<Complex64>, dk: f64, mass: f64, c: f64) -> Result<Self> {
        if amplitudes.len().is_multiple_of(2) {
            return Err(validation("k-grid must have an odd number of modes"));
        }
        for (name, v) in [("dk", dk), ("mass", mass), ("c", c)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(validation(format!("{name} must be positive")));
            }
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * dk;
        if !(norm.is_finite() && norm > 0.0) {
            return Err(validation("wave packet has zero or non-finite norm"));
        }
        let scale = norm.sqrt().recip();
        let amplitudes = amplitudes.into_iter().map(|a| a * scale).collect();
        Ok(Self { amplitudes, dk, mass, c })
    }

    pub fn gaussian(g: &GaussianPacket) -> Result<Self> {
        ensure_finite("packet parameters", &[g.k_mean, g.k_width, g.center, g.length])?;
        if !(g.k_width > 0.0 && g.length > 0.0) {
            return Err(validation("packet width and box length must be positive"));
        }
        if g.center.abs() >= 0.25 * g.length {
            return Err(validation("packet center must lie well inside the box"));
        }
        let dk = 2.0 * PI / g.length;
        let half = ((g.k_mean.abs() + 10.0 * g.k_width) / dk).ceil() as usize;
        let amplitudes = (0..2 * half + 1)
            .map(|j| {
                let k = (j as f64 - half as f64) * dk;
                let envelope = (-(k - g.k_mean).powi(2) / (4.0 * g.k_width * g.k_width)).exp();
                Complex64::from_polar(envelope, -k * g.center)
            })
            .collect();
        Self::new(amplitudes, dk, g.mass, g.c)
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn box_length(&self) -> f64 {
        2.0 * PI / self.dk
    }

    pub fn k(&self, j: usize) -> f64 {
        (j as f64 - (self.len() / 2) as f64) * self.dk
    }

    /// `ω_k = √(k² + m²c²)`.
    pub fn omega(&self, k: f64) -> f64 {
        k.hypot(self.mass * self.c)
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.dk
    }

    /// Position-space probability density on `4n` points of the box,
    /// `σ ∈ [−L/2, L/2)`, from a zero-padded inverse DFT.
    pub fn position_density(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let len = 4 * n;
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        buf[..n].copy_from_slice(&self.amplitudes);
        FftPlanner::new().plan_fft_inverse(len).process(&mut buf);
        let l = self.box_length();
        let dsigma = l / len as f64;
        let mut pts: Vec<(f64, f64)> = buf
            .iter()
            .enumerate()
            .map(|(j, g)| {
                let s = j as f64 * dsigma;
                (if s >= 0.5 * l { s - l } else { s }, g.norm_sqr())
            })
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pts.iter().map(|p| p.1).sum::<f64>() * dsigma;
        pts.into_iter().map(|(s, d)| (s, d / total)).unzip()
    }

    fn k_average(&self, f: impl Fn(f64) -> f64) -> f64 {
        let sum: f64 = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(j, a)| a.norm_sqr() * f(self.k(j)))
            .sum();
        sum * self.dk / self.norm()
    }
}

/// Multiplies each mode by `exp(−iω_k τ)`.
pub fn propagate_free(p: &WavePacket, tau: f64) -> WavePacket {
    let amplitudes = p
        .amplitudes
        .iter()
        .enumerate()
        .map(|(j, a)| a * Complex64::from_polar(1.0, -p.omega(p.k(j)) * tau))
        .collect();
    WavePacket { amplitudes, ..*p }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Expectations {
    pub sigma: f64,
    pub pi: f64,
    /// `⟨π/√(m²c² + π²)⟩`.
    pub velocity: f64,
}

pub fn expectations(p: &WavePacket) -> Expectations {
    let (sigma, density) = p.position_density();
    let ds = p.box_length() / sigma.len() as f64;
    Expectations {
        sigma: sigma.iter().zip(&density).map(|(s, d)| s * d).sum::<f64>() * ds,
        pi: p.k_average(|k| k),
        velocity: p.k_average(|k| k / p.omega(k)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Multipoles {
    pub monopole: f64,
    pub dipole: f64,
    pub quadrupole: f64,
    pub reference: f64,
}

/// Moments of the position density about `sigma0`.
pub fn multipoles_about(p: &WavePacket, sigma0: f64) -> Multipoles {
    let (sigma, density) = p.position_density();
    let ds = p.box_length() / sigma.len() as f64;
    let moment = |k: i32| -> f64 {
        sigma
            .iter()
            .zip(&density)
            .map(|(s, d)| (s - sigma0).powi(k) * d)
            .sum::<f64>()
            * ds
    };
    Multipoles { monopole: moment(0), dipole: moment(1), quadrupole: moment(2), reference: sigma0 }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EhrenfestRow {
    pub tau: f64,
    pub sigma_mean: f64,
    pub pi_mean: f64,
    pub velocity_mean: f64,
    pub dipole: f64,
    pub quadrupole: f64,
    pub ehrenfest_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmergentTrajectory {
    pub rows: Vec<EhrenfestRow>,
    /// `σ_cl(τ) ≈ intercept + slope·τ`, least squares.
    pub intercept: f64,
    pub slope: f64,
    /// `max |d⟨σ⟩/dτ − ⟨π/ω⟩|`, derivative by Richardson-extrapolated central differences.
    pub ehrenfest_residual: f64,
    /// Largest second difference of `σ_cl`, `|σ_{i+1} − 2σ_i + σ_{i−1}|` on a
    /// uniform grid (the divided difference times `h₁h₂` otherwise).
    pub second_difference: f64,
    /// `max |σ_cl − line|`.
    pub line_dipole: f64,
    pub max_momentum_drift: f64,
    pub max_norm_drift: f64,
}

impl EmergentTrajectory {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_csv_atomic(path, &self.rows)
    }
}

/// Mean position along `tau_grid` with the Ehrenfest and straight-line checks.
/// `fd_step` is the Richardson stencil step for `d⟨σ⟩/dτ`.
pub fn emergent_trajectory(p0: &WavePacket, tau_grid: &[f64], fd_step: f64) -> Result<EmergentTrajectory> {
    if tau_grid.len() < 3 {
        return Err(validation("tau grid needs at least 3 points"));
    }
    ensure_finite("tau grid", tau_grid)?;
    if tau_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(validation("tau grid must be strictly increasing"));
    }
    if !(fd_step.is_finite() && fd_step > 0.0) {
        return Err(validation("finite-difference step must be positive"));
    }
    let norm0 = p0.norm();
    let pi0 = expectations(p0).pi;
    let sigma_at = |tau: f64| expectations(&propagate_free(p0, tau)).sigma;

    let samples: Vec<(Expectations, f64, f64, f64)> = tau_grid
        .par_iter()
        .map(|&tau| {
            let p = propagate_free(p0, tau);
            let e = expectations(&p);
            let h = fd_step;
            let d1 = (sigma_at(tau + h) - sigma_at(tau - h)) / (2.0 * h);
            let d2 = (sigma_at(tau + 2.0 * h) - sigma_at(tau - 2.0 * h)) / (4.0 * h);
            let derivative = (4.0 * d1 - d2) / 3.0;
            let q = multipoles_about(&p, e.sigma).quadrupole;
            (e, (derivative - e.velocity).abs(), q, (p.norm() - norm0).abs())
        })
        .collect();

    let pts: Vec<(f64, f64)> = tau_grid.iter().zip(&samples).map(|(&t, s)| (t, s.0.sigma)).collect();
    let (intercept, slope) = fit_line(&pts);
    let rows: Vec<EhrenfestRow> = tau_grid
        .iter()
        .zip(&samples)
        .map(|(&tau, (e, res, q, _))| {
            let dipole = e.sigma - (intercept + slope * tau);
            EhrenfestRow {
                tau,
                sigma_mean: e.sigma,
                pi_mean: e.pi,
                velocity_mean: e.velocity,
                dipole,
                quadrupole: q + dipole * dipole,
                ehrenfest_residual: *res,
            }
        })
        .collect();
    let second_difference = pts
        .windows(3)
        .map(|w| {
            let (h1, h2) = (w[1].0 - w[0].0, w[2].0 - w[1].0);
            (2.0 * ((w[2].1 - w[1].1) * h1 - (w[1].1 - w[0].1) * h2) / (h1 + h2)).abs()
        })
        .fold(0.0, f64::max);
    Ok(EmergentTrajectory {
        intercept,
        slope,
        ehrenfest_residual: rows.iter().map(|r| r.ehrenfest_residual).fold(0.0, f64::max),
        second_difference,
        line_dipole: rows.iter().map(|r| r.dipole.abs()).fold(0.0, f64::max),
        max_momentum_drift: rows.iter().map(|r| (r.pi_mean - pi0).abs()).fold(0.0, f64::max),
        max_norm_drift: samples.iter().map(|s| s.3).fold(0.0, f64::max),
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VelocityGapRow {
    pub c: f64,
    /// `c⟨π/ω⟩`.
    pub velocity: f64,
    /// `⟨k⟩/m`.
    pub newtonian: f64,
    /// `|c⟨π/ω⟩ − ⟨k⟩/m|`.
    pub gap: f64,
}

/// The emergent velocity of a fixed momentum profile against its Newtonian
/// value as `c` grows, with the fitted decay exponent of the gap.
pub fn nonrel_velocity_gap(profile: &GaussianPacket, c_list: &[f64]) -> Result<(Vec<VelocityGapRow>, f64)> {
    if c_list.len() < 2 {
        return Err(validation("need at least two values of c"));
    }
    let mut rows = Vec::with_capacity(c_list.len());
    for &c in c_list {
        let p = WavePacket::gaussian(&GaussianPacket { c, ..*profile })?;
        let m = p.mass;
        let mc = m * c;
        // c k/ω − k/m = −k³/(m ω (ω + mc))
        let gap = p.k_average(|k| {
            let w = p.omega(k);
            -k * k * k / (m * w * (w + mc))
        });
        let newtonian = p.k_average(|k| k) / m;
        rows.push(VelocityGapRow { c, velocity: newtonian + gap, newtonian, gap: gap.abs() });
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.c.ln(), r.gap.ln())).collect();
    Ok((rows, -fit_line(&pts).1))
}
