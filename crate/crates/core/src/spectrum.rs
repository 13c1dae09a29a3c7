//! Stationary states of the invariant mass: the reduced radial problem for
//! `H = π² + V(ρ²)` (quantized as `−∇² + V`, ħ = 1) and the map from its
//! eigenvalues to the mass levels `ε_n = √(m₁²c² + h_n) + √(m₂²c² + h_n)`.

use std::path::Path;

use serde::Serialize;

use crate::algebra::TwoBody;
use crate::error::{validation, Error, Result};
use crate::kinematics::{FourVector, Vec3};
use crate::potential::Potential;

/// Uniform grid on `(0, r_max)` with Dirichlet ends; interior nodes at
/// `r_j = j·spacing`, `j = 1..=n_points`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RadialGrid {
    pub r_max: f64,
    pub n_points: usize,
    #[serde(skip)]
    pub spacing: f64,
}

impl RadialGrid {
    pub fn new(r_max: f64, n_points: usize) -> Result<Self> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(validation(format!("r_max must be positive, got {r_max}")));
        }
        if n_points < 16 {
            return Err(validation(format!("radial grid needs at least 16 points, got {n_points}")));
        }
        Ok(Self {
            r_max,
            n_points,
            spacing: r_max / (n_points + 1) as f64,
        })
    }

    /// Same box, half the spacing.
    pub fn refined(&self) -> Self {
        Self::new(self.r_max, 2 * (self.n_points + 1) - 1).expect("refining a valid grid")
    }

    pub fn node(&self, j: usize) -> f64 {
        (j + 1) as f64 * self.spacing
    }
}

/// Lowest `count` eigenvalues of `−u″ + [l(l+1)/r² + V(r²)] u` on `grid`,
/// ascending.
pub fn solve_reduced_hamiltonian(
    potential: &Potential,
    l: u32,
    grid: &RadialGrid,
    count: usize,
) -> Result<Vec<f64>> {
    let inv_h2 = 1.0 / (grid.spacing * grid.spacing);
    let centrifugal = f64::from(l) * f64::from(l + 1);
    let mut diag = Vec::with_capacity(grid.n_points);
    for j in 0..grid.n_points {
        let r = grid.node(j);
        let v = potential.value(r * r);
        if !v.is_finite() {
            return Err(validation(format!("potential is not finite at r = {r}")));
        }
        diag.push(2.0 * inv_h2 + centrifugal / (r * r) + v);
    }
    let mut off = vec![-inv_h2; grid.n_points];
    tridiagonal_eigenvalues(&mut diag, &mut off)?;
    diag.sort_by(f64::total_cmp);
    diag.truncate(count);
    Ok(diag)
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
/// `diag` is overwritten by the eigenvalues (unsorted); `off[i]` couples
/// `i` and `i + 1`, `off[n−1]` is ignored.
pub fn tridiagonal_eigenvalues(diag: &mut [f64], off: &mut [f64]) -> Result<()> {
    const MAX_SWEEPS: usize = 60;
    let n = diag.len();
    if off.len() != n {
        return Err(validation("off-diagonal length must match the diagonal"));
    }
    if n == 0 {
        return Ok(());
    }
    off[n - 1] = 0.0;
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return Err(Error::Numerical(format!(
                    "tridiagonal QL did not converge for eigenvalue {l}"
                )));
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MassLevel {
    /// Radial index, starting at 1.
    pub n: usize,
    pub l: u32,
    /// `2l + 1`: the magnetic label never enters the radial solve.
    pub multiplicity: u32,
    pub h: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MassSpectrum {
    pub levels: Vec<MassLevel>,
}

/// Maps eigenvalues `h_n` of the reduced Hamiltonian to mass levels.
pub fn mass_spectrum(h_list: &[f64], l: u32, m1: f64, m2: f64, c: f64) -> Result<MassSpectrum> {
    let model = TwoBody::new(Potential::free(), m1, m2, c)?;
    let levels = h_list
        .iter()
        .enumerate()
        .map(|(k, &h)| {
            let (a, b) = model.checked_radicands(h).map_err(|e| match e {
                Error::Domain { radicand, .. } => Error::Domain {
                    what: format!("level {} lies below the mass gap", k + 1),
                    radicand,
                },
                other => other,
            })?;
            Ok(MassLevel {
                n: k + 1,
                l,
                multiplicity: 2 * l + 1,
                h,
                epsilon: a.sqrt() + b.sqrt(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MassSpectrum { levels })
}

/// `P^μ_n = (ε_n √(1 + k²); ε_n k) / c`.
pub fn external_momentum(epsilon: f64, k: &Vec3, c: f64) -> FourVector {
    FourVector::new(epsilon * (1.0 + k.norm_squared()).sqrt() / c, k * (epsilon / c))
}

/// Observed convergence order from three successive halvings.
pub fn richardson_order(coarse: f64, medium: f64, fine: f64) -> f64 {
    ((coarse - medium) / (medium - fine)).abs().log2()
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumLevelJson {
    pub n: usize,
    pub h: f64,
    pub epsilon: f64,
}

/// On-disk form: `{l, levels: [{n, h, epsilon}], grid: {r_max, n_points}}`.
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumJson {
    pub l: u32,
    pub levels: Vec<SpectrumLevelJson>,
    pub grid: RadialGrid,
}

impl SpectrumJson {
    pub fn new(spectrum: &MassSpectrum, l: u32, grid: &RadialGrid) -> Self {
        Self {
            l,
            levels: spectrum
                .levels
                .iter()
                .map(|lv| SpectrumLevelJson { n: lv.n, h: lv.h, epsilon: lv.epsilon })
                .collect(),
            grid: *grid,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io::write_json_atomic(path, self)
    }
}
