//! Reduced density matrices of two-particle states on one-dimensional grids.
//!
//! Non-relativistic states live on a periodic box of length `L`: the
//! relative coordinate is taken as the minimum image of `x_e − x_p` and the
//! total momentum is quantized as `p = 2πk/L`, so partial traces are finite
//! and exactly translation covariant on the grid. After the rest-frame
//! conditions only the relative factor survives; tracing out a single
//! particle is refused with [`Error::RelativisticNonSeparability`].

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure_finite, validation, Error, Result};
use crate::kinematics::Vec3;

const EIGEN_CUTOFF: f64 = 1e-12;

/// `n` points `x_j = j·L/n` on a circle of length `L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PeriodicGrid {
    pub n: usize,
    pub length: f64,
}

impl PeriodicGrid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 4 {
            return Err(validation("periodic grid needs at least 4 points"));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(validation(format!("box length must be positive, got {length}")));
        }
        Ok(Self { n, length })
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.point(j)).collect()
    }

    /// Signed minimum-image offset for the index difference `d`.
    pub fn offset(&self, d: isize) -> f64 {
        let n = self.n as isize;
        let mut s = d.rem_euclid(n);
        if s >= (n + 1) / 2 {
            s -= n;
        }
        s as f64 * self.spacing()
    }

    /// Minimum-image offsets, ascending.
    pub fn relative_points(&self) -> Vec<f64> {
        let n = self.n as isize;
        let lo = -(n / 2);
        (lo..lo + n).map(|s| self.offset(s)).collect()
    }

    /// Minimum image of a continuous offset, in `[−L/2, L/2)`.
    pub fn wrap(&self, r: f64) -> f64 {
        r - self.length * (r / self.length + 0.5).floor()
    }

    /// `2πk/L`.
    pub fn momentum(&self, k: i64) -> f64 {
        2.0 * std::f64::consts::PI * k as f64 / self.length
    }
}

type Profile = Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>;

/// `ψ(x_e, x_p)` sampled on the grid square, row index electron.
#[derive(Clone)]
pub struct TwoParticleWavefunction {
    pub grid: PeriodicGrid,
    pub m_e: f64,
    pub m_p: f64,
    /// Total momentum (zero for states without a plane-wave factor).
    pub p: f64,
    amplitudes: Vec<Complex64>,
    profile: Profile,
}

impl fmt::Debug for TwoParticleWavefunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TwoParticleWavefunction")
            .field("grid", &self.grid)
            .field("m_e", &self.m_e)
            .field("m_p", &self.m_p)
            .field("p", &self.p)
            .finish_non_exhaustive()
    }
}

impl TwoParticleWavefunction {
    /// Samples an arbitrary `ψ(x_e, x_p)` on the grid square.
    pub fn from_fn<F>(grid: PeriodicGrid, m_e: f64, m_p: f64, p: f64, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> Complex64 + Send + Sync + 'static,
    {
        for (name, m) in [("m_e", m_e), ("m_p", m_p)] {
            if !(m.is_finite() && m > 0.0) {
                return Err(validation(format!("{name} must be positive")));
            }
        }
        ensure_finite("total momentum", &[p])?;
        let n = grid.n;
        let mut amplitudes = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                amplitudes.push(f(grid.point(i), grid.point(j)));
            }
        }
        if amplitudes.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(validation("wavefunction is not finite on the grid"));
        }
        Ok(Self { grid, m_e, m_p, p, amplitudes, profile: Arc::new(f) })
    }

    pub fn total_mass(&self) -> f64 {
        self.m_e + self.m_p
    }

    pub fn amplitude(&self, i: usize, j: usize) -> Complex64 {
        self.amplitudes[i * self.grid.n + j]
    }

    /// Continuous `ψ(x_e, x_p)`.
    pub fn eval(&self, x_e: f64, x_p: f64) -> Complex64 {
        (self.profile)(x_e, x_p)
    }

    /// `∫|ψ|² dx_e dx_p` by the periodic trapezoid rule.
    pub fn norm_squared(&self) -> f64 {
        let dx = self.grid.spacing();
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * dx * dx
    }
}

/// `ψ(x_e, x_p) = φ_int(x_e − x_p) exp(i p (m_e x_e + m_p x_p)/M)`, with
/// the relative coordinate taken as the minimum image on the box.
pub fn hydrogen_state<F>(phi_int: F, p: f64, m_e: f64, m_p: f64, grid: PeriodicGrid) -> Result<TwoParticleWavefunction>
where
    F: Fn(f64) -> Complex64 + Send + Sync + 'static,
{
    let quanta = p * grid.length / (2.0 * std::f64::consts::PI);
    if !((quanta - quanta.round()).abs() < 1e-9) {
        return Err(validation(format!(
            "total momentum {p} is not a multiple of 2π/L on a box of length {}",
            grid.length
        )));
    }
    let rel_norm: f64 = grid
        .relative_points()
        .iter()
        .map(|&r| phi_int(r).norm_sqr())
        .sum::<f64>()
        * grid.spacing();
    if !(rel_norm.is_finite() && rel_norm > 0.0) {
        return Err(validation("relative wavefunction is not square-integrable on the grid"));
    }
    let total = m_e + m_p;
    let g = grid;
    TwoParticleWavefunction::from_fn(grid, m_e, m_p, p, move |xe, xp| {
        phi_int(g.wrap(xe - xp)) * Complex64::from_polar(1.0, p * (m_e * xe + m_p * xp) / total)
    })
}

/// Kernel `ρ(x, x′)` on a set of points with quadrature weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedDensityMatrix {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    kernel: Vec<Complex64>,
    pub normalized: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelRow {
    pub x: f64,
    pub x_prime: f64,
    #[serde(rename = "Re")]
    pub re: f64,
    #[serde(rename = "Im")]
    pub im: f64,
}

impl ReducedDensityMatrix {
    pub fn from_kernel(points: Vec<f64>, weights: Vec<f64>, kernel: Vec<Complex64>) -> Result<Self> {
        let n = points.len();
        if weights.len() != n || kernel.len() != n * n {
            return Err(validation("kernel, points and weights have inconsistent sizes"));
        }
        Ok(Self { points, weights, kernel, normalized: false })
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.kernel[i * self.dim() + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.weights[i] * self.at(i, i).re).sum()
    }

    pub fn normalize(mut self) -> Result<Self> {
        let t = self.trace();
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Numerical(format!("cannot normalize a kernel with trace {t}")));
        }
        self.kernel.iter_mut().for_each(|k| *k /= t);
        self.normalized = true;
        Ok(self)
    }

    /// `max |ρ(x, x′) − ρ*(x′, x)|`.
    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.at(i, j) - self.at(j, i).conj()).norm());
            }
        }
        worst
    }

    /// `W^{1/2} ρ W^{1/2}`, Hermitian-symmetrized.
    pub fn weighted_matrix(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let sw: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        let m = DMatrix::from_fn(n, n, |i, j| self.at(i, j) * (sw[i] * sw[j]));
        (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let scale = self.kernel.iter().map(|k| k.norm()).fold(1.0, f64::max);
        let herm = self.hermiticity_residual();
        if herm > 1e-12 * scale {
            return Err(validation(format!("kernel is not Hermitian (residual {herm:e})")));
        }
        let eig = SymmetricEigen::new(self.weighted_matrix());
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| b.total_cmp(a));
        Ok(vals)
    }

    /// `tr ρ²` with quadrature weights.
    pub fn purity(&self) -> f64 {
        let n = self.dim();
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                sum += self.weights[i] * self.weights[j] * (self.at(i, j) * self.at(j, i)).re;
            }
        }
        sum
    }

    /// `max_{x,x′} | |ρ(x, x′)| − |ρ(x − x′, 0)| |` on a periodic grid:
    /// zero when the modulus depends on the separation only.
    pub fn translation_residual(&self) -> f64 {
        self.covariance_residual(0.0, false)
    }

    /// Residual of `ρ(x, x′) = e^{iq(x − x′)} g(x − x′)` for the given
    /// wavenumber `q` (`q = m_e p / M` for the electron).
    pub fn structure_residual(&self, q: f64) -> f64 {
        self.covariance_residual(q, true)
    }

    fn covariance_residual(&self, q: f64, with_phase: bool) -> f64 {
        let n = self.dim();
        let x0 = self.points[0];
        let strip = |i: usize, j: usize| {
            let v = self.at(i, j);
            if with_phase {
                v * Complex64::from_polar(1.0, -q * (self.points[i] - self.points[j]))
            } else {
                Complex64::new(v.norm(), 0.0)
            }
        };
        let reference: Vec<Complex64> = (0..n)
            .map(|d| {
                let v = self.at(d, 0);
                if with_phase {
                    v * Complex64::from_polar(1.0, -q * (self.points[d] - x0))
                } else {
                    Complex64::new(v.norm(), 0.0)
                }
            })
            .collect();
        (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| (strip(i, j) - reference[(i + n - j) % n]).norm())
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// `max |ρ(x, x) − mean|` over the diagonal.
    pub fn diagonal_flatness(&self) -> f64 {
        let n = self.dim();
        let mean = (0..n).map(|i| self.at(i, i).re).sum::<f64>() / n as f64;
        (0..n)
            .map(|i| (self.at(i, i) - mean).norm())
            .fold(0.0, f64::max)
    }

    pub fn rows(&self) -> Vec<KernelRow> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let v = self.at(i, j);
                out.push(KernelRow { x: self.points[i], x_prime: self.points[j], re: v.re, im: v.im });
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_csv_atomic(path, &self.rows())
    }
}

/// `−Σ λ ln λ` over eigenvalues `λ > 1e-12` of the weighted kernel.
pub fn entanglement_entropy(rho: &ReducedDensityMatrix) -> Result<f64> {
    Ok(rho
        .eigenvalues()?
        .into_iter()
        .filter(|&l| l > EIGEN_CUTOFF)
        .map(|l| -l * l.ln())
        .sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Particle {
    Electron,
    Proton,
}

/// `ρ_el(x, x′) = ∫dx_p ψ(x, x_p) ψ*(x′, x_p)` (or the proton analogue),
/// normalized to unit trace.
pub fn trace_out_particle(psi: &TwoParticleWavefunction, keep: Particle) -> Result<ReducedDensityMatrix> {
    let n = psi.grid.n;
    let dx = psi.grid.spacing();
    let amp = |kept: usize, traced: usize| match keep {
        Particle::Electron => psi.amplitude(kept, traced),
        Particle::Proton => psi.amplitude(traced, kept),
    };
    let kernel: Vec<Complex64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|a| {
            (0..n).map(move |b| (0..n).map(|t| amp(a, t) * amp(b, t).conj()).sum::<Complex64>() * dx)
        })
        .collect();
    ReducedDensityMatrix::from_kernel(psi.grid.points(), vec![dx; n], kernel)?.normalize()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PresentationTag {
    /// particle ⊗ particle: `(x_e, x_p)`.
    A,
    /// center of mass ⊗ relative: `(x, r)`.
    B,
    /// frozen Jacobi datum ⊗ relative: `(z, r)`.
    C,
}

impl FromStr for PresentationTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Self::A),
            "B" | "b" => Ok(Self::B),
            "C" | "c" => Ok(Self::C),
            other => Err(validation(format!("unknown presentation tag `{other}`"))),
        }
    }
}

/// Linear point transformation `(x_e, x_p) → (a, b)` of one presentation.
///
/// * A: `a = x_e`, `b = x_p`
/// * B: `a = (m_e x_e + m_p x_p)/M`, `b = x_e − x_p`
/// * C: `a = (m_e x_e + m_p x_p)/M − p t/M` (the center of mass carried back
///   to `t = 0` along its free motion), `b = x_e − x_p`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PresentationMap {
    pub tag: PresentationTag,
    matrix: [[f64; 2]; 2],
    shift: f64,
}

impl PresentationMap {
    pub fn new(tag: PresentationTag, m_e: f64, m_p: f64, p: f64, time: f64) -> Result<Self> {
        let total = m_e + m_p;
        let (matrix, shift) = match tag {
            PresentationTag::A => ([[1.0, 0.0], [0.0, 1.0]], 0.0),
            PresentationTag::B => ([[m_e / total, m_p / total], [1.0, -1.0]], 0.0),
            PresentationTag::C => ([[m_e / total, m_p / total], [1.0, -1.0]], -p * time / total),
        };
        let map = Self { tag, matrix, shift };
        let det = map.jacobian();
        if !((det.abs() - 1.0).abs() < 1e-14) {
            return Err(validation(format!("presentation {tag:?} is not unitary (|J| = {det})")));
        }
        Ok(map)
    }

    pub fn jacobian(&self) -> f64 {
        let m = self.matrix;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn forward(&self, x_e: f64, x_p: f64) -> (f64, f64) {
        let m = self.matrix;
        (m[0][0] * x_e + m[0][1] * x_p + self.shift, m[1][0] * x_e + m[1][1] * x_p)
    }

    pub fn inverse(&self, a: f64, b: f64) -> (f64, f64) {
        let m = self.matrix;
        let det = self.jacobian();
        let a = a - self.shift;
        ((m[1][1] * a - m[0][1] * b) / det, (-m[1][0] * a + m[0][0] * b) / det)
    }
}

/// Presentation map for `psi` at freezing time zero.
pub fn presentation_map(psi: &TwoParticleWavefunction, tag: PresentationTag) -> Result<PresentationMap> {
    PresentationMap::new(tag, psi.m_e, psi.m_p, psi.p, 0.0)
}

/// Traces out the first factor of a presentation: `ρ(b, b′) = ∫da ψ(a, b) ψ*(a, b′)`,
/// with `a` on the box grid and `b` on the minimum-image offsets.
pub fn trace_out_first(psi: &TwoParticleWavefunction, map: &PresentationMap) -> Result<ReducedDensityMatrix> {
    let grid = psi.grid;
    let dx = grid.spacing();
    let outer = grid.points();
    let inner = grid.relative_points();
    let n = inner.len();
    // columns: sampled ψ along a for each kept b
    let columns: Vec<Vec<Complex64>> = inner
        .par_iter()
        .map(|&b| {
            outer
                .iter()
                .map(|&a| {
                    let (xe, xp) = map.inverse(a, b);
                    psi.eval(xe, xp)
                })
                .collect()
        })
        .collect();
    let kernel: Vec<Complex64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let columns = &columns;
            (0..n).map(move |j| {
                columns[i].iter().zip(&columns[j]).map(|(u, v)| u * v.conj()).sum::<Complex64>() * dx
            })
        })
        .collect();
    ReducedDensityMatrix::from_kernel(inner, vec![dx; n], kernel)?.normalize()
}

/// `ρ_rel(r, r′)`: the center of mass traced out in presentation B.
pub fn trace_out_com(psi: &TwoParticleWavefunction) -> Result<ReducedDensityMatrix> {
    trace_out_first(psi, &presentation_map(psi, PresentationTag::B)?)
}

/// Relative wavefunction `φ(ρ)` of a rest-frame state with fixed `h = k`.
#[derive(Clone, Debug, PartialEq)]
pub struct RelativisticState {
    pub k: Vec3,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub phi: Vec<Complex64>,
}

impl RelativisticState {
    pub fn new(k: Vec3, points: Vec<f64>, weights: Vec<f64>, phi: Vec<Complex64>) -> Result<Self> {
        if points.len() != phi.len() || weights.len() != phi.len() || phi.is_empty() {
            return Err(validation("relative wavefunction and grid sizes differ"));
        }
        ensure_finite("boost k", k.as_slice())?;
        Ok(Self { k, points, weights, phi })
    }

    /// Samples `φ` on the minimum-image offsets of a periodic grid.
    pub fn on_grid<F: Fn(f64) -> Complex64>(k: Vec3, grid: &PeriodicGrid, phi: F) -> Result<Self> {
        let points = grid.relative_points();
        let values = points.iter().map(|&r| phi(r)).collect();
        Self::new(k, points, vec![grid.spacing(); grid.n], values)
    }
}

/// `ρ_rel(ρ, ρ′) = φ(ρ) φ*(ρ′)`, normalized.
pub fn relativistic_reduced(state: &RelativisticState) -> Result<ReducedDensityMatrix> {
    let kernel = state
        .phi
        .iter()
        .flat_map(|a| state.phi.iter().map(move |b| a * b.conj()))
        .collect();
    ReducedDensityMatrix::from_kernel(state.points.clone(), state.weights.clone(), kernel)?.normalize()
}

/// Single-particle subsystems do not exist once the rest-frame conditions
/// hold: this always fails for `which ∈ {1, 2}`.
pub fn trace_out_relativistic_particle(_state: &RelativisticState, which: u8) -> Result<ReducedDensityMatrix> {
    match which {
        1 | 2 => Err(Error::RelativisticNonSeparability { particle: which }),
        other => Err(validation(format!("particle index must be 1 or 2, got {other}"))),
    }
}
