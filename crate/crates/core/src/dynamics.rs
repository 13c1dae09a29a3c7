//! Relative motion generated by the invariant mass `Mc(ρ, π)`, particle
//! world-line reconstruction, and the non-relativistic limit.

use std::path::Path;

use nalgebra::{SMatrix, SVector};
use serde::Serialize;

use crate::ad::{gradient, hessian, PhaseFunction, Real};
use crate::algebra::TwoBody;
use crate::error::{ensure_finite, validation, Error, Result};
use crate::kinematics::{fokker_pryce, wigner_tetrad, CollectiveState, FourVector, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelativeState {
    pub rho: Vec3,
    pub pi: Vec3,
    pub tau: f64,
}

impl RelativeState {
    pub fn new(rho: Vec3, pi: Vec3, tau: f64) -> Result<Self> {
        ensure_finite("relative state", &[rho.x, rho.y, rho.z, pi.x, pi.y, pi.z, tau])?;
        Ok(Self { rho, pi, tau })
    }

    /// `H = π² + V(ρ²)`.
    pub fn energy(&self, model: &TwoBody) -> f64 {
        self.pi.norm_squared() + model.potential.value(self.rho.norm_squared())
    }

    pub fn spin(&self) -> Vec3 {
        self.rho.cross(&self.pi)
    }

    fn flat(&self) -> [f64; 6] {
        [self.rho.x, self.rho.y, self.rho.z, self.pi.x, self.pi.y, self.pi.z]
    }

    fn from_flat(y: &[f64; 6], tau: f64) -> Self {
        Self {
            rho: Vec3::new(y[0], y[1], y[2]),
            pi: Vec3::new(y[3], y[4], y[5]),
            tau,
        }
    }
}

/// `Mc = √(m₁²c² + H) + √(m₂²c² + H)`.
pub fn invariant_mass(s: &RelativeState, model: &TwoBody) -> Result<f64> {
    let (a, b) = model.checked_radicands(s.energy(model))?;
    Ok(a.sqrt() + b.sqrt())
}

/// `Mc` as a function on the relative phase space `(ρ, π)`.
#[derive(Clone, Copy, Debug)]
pub struct InvariantMassFn<'a>(pub &'a TwoBody);

impl PhaseFunction for InvariantMassFn<'_> {
    fn eval<T: Real>(&self, x: &[T]) -> T {
        let rho = [x[0], x[1], x[2]];
        let pi = [x[3], x[4], x[5]];
        self.0.mass_from_energy(self.0.relative_energy(&rho, &pi))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveConfig {
    pub step: f64,
    pub steps: usize,
    /// Absolute tolerance on the Newton update.
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            step: 1e-3,
            steps: 1000,
            newton_tol: 1e-12,
            max_newton: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub tau: f64,
    pub rho_x: f64,
    pub rho_y: f64,
    pub rho_z: f64,
    pub pi_x: f64,
    pub pi_y: f64,
    pub pi_z: f64,
    #[serde(rename = "Mc")]
    pub mc: f64,
    #[serde(rename = "Sx")]
    pub sx: f64,
    #[serde(rename = "Sy")]
    pub sy: f64,
    #[serde(rename = "Sz")]
    pub sz: f64,
}

/// Samples of the relative motion with the conserved quantities logged at
/// every sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<RelativeState>,
    pub step: f64,
    pub mc: Vec<f64>,
    pub spin: Vec<Vec3>,
}

impl Trajectory {
    pub fn last(&self) -> &RelativeState {
        self.states.last().expect("trajectory always holds the initial state")
    }

    /// `max |Mc(τ) − Mc(0)| / Mc(0)`.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.mc[0];
        self.mc.iter().map(|m| (m - m0).abs() / m0).fold(0.0, f64::max)
    }

    /// Largest drift of each component of `S`, relative to `max(|S(0)|, 1)`.
    pub fn spin_drift(&self) -> [f64; 3] {
        let s0 = self.spin[0];
        let scale = s0.norm().max(1.0);
        let mut out = [0.0_f64; 3];
        for s in &self.spin {
            for (k, slot) in out.iter_mut().enumerate() {
                *slot = slot.max((s[k] - s0[k]).abs() / scale);
            }
        }
        out
    }

    pub fn rows(&self) -> Vec<TrajectoryRow> {
        self.states
            .iter()
            .zip(&self.mc)
            .zip(&self.spin)
            .map(|((s, &mc), sp)| TrajectoryRow {
                tau: s.tau,
                rho_x: s.rho.x,
                rho_y: s.rho.y,
                rho_z: s.rho.z,
                pi_x: s.pi.x,
                pi_y: s.pi.y,
                pi_z: s.pi.z,
                mc,
                sx: sp.x,
                sy: sp.y,
                sz: sp.z,
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_csv_atomic(path, &self.rows())
    }
}

fn radicand_guard(model: &TwoBody, s: &RelativeState, step: usize) -> Result<()> {
    let (r1, r2) = model.rest_terms();
    let h = s.energy(model);
    if !(h >= -0.99 * r1.min(r2)) {
        return Err(Error::Domain {
            what: format!("H fell below the radicand guard at step {step}"),
            radicand: h + r1.min(r2),
        });
    }
    Ok(())
}

fn vector_field(mass: &InvariantMassFn<'_>, y: &[f64; 6]) -> SVector<f64, 6> {
    let g = gradient(mass, y);
    SVector::<f64, 6>::new(g[3], g[4], g[5], -g[0], -g[1], -g[2])
}

fn field_jacobian(mass: &InvariantMassFn<'_>, y: &[f64; 6]) -> SMatrix<f64, 6, 6> {
    let h = hessian(mass, y);
    // rows 0..3: ∂²Mc/∂π∂(·); rows 3..6: −∂²Mc/∂ρ∂(·)
    SMatrix::<f64, 6, 6>::from_fn(|i, j| if i < 3 { h[(i + 3) * 6 + j] } else { -h[(i - 3) * 6 + j] })
}

fn midpoint_step(
    mass: &InvariantMassFn<'_>,
    y0: &SVector<f64, 6>,
    cfg: &EvolveConfig,
    index: usize,
) -> Result<SVector<f64, 6>> {
    let h = cfg.step;
    let mid = |y1: &SVector<f64, 6>| -> [f64; 6] { ((y0 + y1) * 0.5).into() };
    let mut y1 = y0 + vector_field(mass, &(*y0).into()) * h;
    for _ in 0..cfg.max_newton {
        let m = mid(&y1);
        let residual = y1 - y0 - vector_field(mass, &m) * h;
        let jac = SMatrix::<f64, 6, 6>::identity() - field_jacobian(mass, &m) * (0.5 * h);
        let delta = jac.lu().solve(&residual).ok_or_else(|| {
            Error::Numerical(format!("singular Newton matrix at step {index}"))
        })?;
        if !delta.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite Newton update at step {index}"
            )));
        }
        y1 -= delta;
        if delta.amax() <= cfg.newton_tol {
            return Ok(y1);
        }
    }
    Err(Error::Numerical(format!(
        "implicit midpoint Newton iteration did not converge at step {index}"
    )))
}

/// Implicit-midpoint integration of `dρ/dτ = ∂Mc/∂π`, `dπ/dτ = −∂Mc/∂ρ`.
pub fn evolve(s0: &RelativeState, model: &TwoBody, cfg: &EvolveConfig) -> Result<Trajectory> {
    if !(cfg.step.is_finite() && cfg.step > 0.0) {
        return Err(validation("step must be positive"));
    }
    if !(cfg.newton_tol > 0.0) || cfg.max_newton == 0 {
        return Err(validation("Newton tolerance and iteration cap must be positive"));
    }
    let mass = InvariantMassFn(model);
    radicand_guard(model, s0, 0)?;
    let mut states = Vec::with_capacity(cfg.steps + 1);
    let mut mc = Vec::with_capacity(cfg.steps + 1);
    let mut spin = Vec::with_capacity(cfg.steps + 1);
    states.push(*s0);
    mc.push(invariant_mass(s0, model)?);
    spin.push(s0.spin());
    let mut y = SVector::<f64, 6>::from(s0.flat());
    for n in 1..=cfg.steps {
        y = midpoint_step(&mass, &y, cfg, n)?;
        let s = RelativeState::from_flat(&y.into(), s0.tau + n as f64 * cfg.step);
        radicand_guard(model, &s, n)?;
        mc.push(invariant_mass(&s, model)?);
        spin.push(s.spin());
        states.push(s);
    }
    Ok(Trajectory {
        states,
        step: cfg.step,
        mc,
        spin,
    })
}

/// Integrates forward, flips `π`, integrates the same number of steps and
/// flips back. Returns the largest coordinate deviation from `s0`.
pub fn time_reversal_error(s0: &RelativeState, model: &TwoBody, cfg: &EvolveConfig) -> Result<f64> {
    let forward = evolve(s0, model, cfg)?;
    let end = forward.last();
    let flipped = RelativeState { pi: -end.pi, ..*end };
    let back = evolve(&flipped, model, cfg)?;
    let fin = back.last();
    Ok((fin.rho - s0.rho).amax().max((-fin.pi - s0.pi).amax()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WorldLineRow {
    pub tau: f64,
    pub x1_t: f64,
    pub x1_x: f64,
    pub x1_y: f64,
    pub x1_z: f64,
    pub x2_t: f64,
    pub x2_x: f64,
    pub x2_y: f64,
    pub x2_z: f64,
    pub p1_t: f64,
    pub p1_x: f64,
    pub p1_y: f64,
    pub p1_z: f64,
    pub p2_t: f64,
    pub p2_x: f64,
    pub p2_y: f64,
    pub p2_z: f64,
}

/// Reconstructed world-lines and 4-momenta of both particles, plus the
/// mass-shell targets `m_i²c² + V(ρ²)` at each sample.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldLinePair {
    pub tau: Vec<f64>,
    pub x1: Vec<FourVector>,
    pub x2: Vec<FourVector>,
    pub p1: Vec<FourVector>,
    pub p2: Vec<FourVector>,
    shell: Vec<(f64, f64)>,
}

impl WorldLinePair {
    /// `max_i,τ | |p_i·p_i| − (m_i²c² + V) |`.
    pub fn mass_shell_residual(&self) -> f64 {
        self.p1
            .iter()
            .zip(&self.p2)
            .zip(&self.shell)
            .map(|((p1, p2), (t1, t2))| {
                (p1.square().abs() - t1).abs().max((p2.square().abs() - t2).abs())
            })
            .fold(0.0, f64::max)
    }

    /// `(x₁ − x₂)²` at every sample.
    pub fn separation_squares(&self) -> Vec<f64> {
        self.x1.iter().zip(&self.x2).map(|(a, b)| (*a - *b).square()).collect()
    }

    pub fn rows(&self) -> Vec<WorldLineRow> {
        (0..self.tau.len())
            .map(|k| {
                let (x1, x2, p1, p2) = (self.x1[k], self.x2[k], self.p1[k], self.p2[k]);
                WorldLineRow {
                    tau: self.tau[k],
                    x1_t: x1.t,
                    x1_x: x1.x[0],
                    x1_y: x1.x[1],
                    x1_z: x1.x[2],
                    x2_t: x2.t,
                    x2_x: x2.x[0],
                    x2_y: x2.x[1],
                    x2_z: x2.x[2],
                    p1_t: p1.t,
                    p1_x: p1.x[0],
                    p1_y: p1.x[1],
                    p1_z: p1.x[2],
                    p2_t: p2.t,
                    p2_x: p2.x[0],
                    p2_y: p2.x[1],
                    p2_z: p2.x[2],
                }
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_csv_atomic(path, &self.rows())
    }
}

/// World-lines `x₁ = Y + ε_r (√(m₂²c²+H)/Mc) ρ^r`,
/// `x₂ = Y − ε_r (√(m₁²c²+H)/Mc) ρ^r` and 4-momenta
/// `p_i = h^μ √(m_i²c² + κ_i² + V) − ε_r κ_i^r` with `κ₁ = −κ₂ = π`.
pub fn worldlines(traj: &Trajectory, cs: &CollectiveState, model: &TwoBody) -> Result<WorldLinePair> {
    let tetrad = wigner_tetrad(&cs.h)?;
    let (r1, r2) = model.rest_terms();
    let n = traj.states.len();
    let mut wl = WorldLinePair {
        tau: Vec::with_capacity(n),
        x1: Vec::with_capacity(n),
        x2: Vec::with_capacity(n),
        p1: Vec::with_capacity(n),
        p2: Vec::with_capacity(n),
        shell: Vec::with_capacity(n),
    };
    for s in &traj.states {
        let (a1, a2) = model.checked_radicands(s.energy(model))?;
        let (w1, w2) = (a1.sqrt(), a2.sqrt());
        let mc = w1 + w2;
        let y = fokker_pryce(cs, s.tau);
        let along = tetrad.apply(&s.rho);
        let boost_pi = tetrad.apply(&s.pi);
        let v = model.potential.value(s.rho.norm_squared());
        wl.tau.push(s.tau);
        wl.x1.push(y + along * (w2 / mc));
        wl.x2.push(y - along * (w1 / mc));
        wl.p1.push(tetrad.h_mu * w1 - boost_pi);
        wl.p2.push(tetrad.h_mu * w2 + boost_pi);
        wl.shell.push((r1 + v, r2 + v));
    }
    Ok(wl)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EqualTimeReport {
    pub max_time_gap: f64,
    pub gaps: Vec<f64>,
}

/// `|x₁⁰ − x₂⁰|` at every sample; it equals `|h·ρ|`, so it vanishes in the
/// `h = 0` frame only (or when `h ⊥ ρ`).
pub fn equal_time_check(wl: &WorldLinePair) -> EqualTimeReport {
    let gaps: Vec<f64> = wl.x1.iter().zip(&wl.x2).map(|(a, b)| (a.t - b.t).abs()).collect();
    EqualTimeReport {
        max_time_gap: gaps.iter().copied().fold(0.0, f64::max),
        gaps,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NonRelRow {
    pub c: f64,
    /// `c (Mc − (m₁ + m₂) c)`.
    pub e_excess: f64,
    /// `H / 2μ`.
    pub newtonian: f64,
    /// `|e_excess − newtonian|`.
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonRelTable {
    pub rows: Vec<NonRelRow>,
    /// Least-squares decay exponent of the deviation in `1/c`; `None` when
    /// any deviation vanishes.
    pub exponent: Option<f64>,
}

/// Compares the excess rest energy with the Newtonian relative energy
/// `H/2μ` for each light speed in `c_list`, at fixed `H`.
///
/// Both quantities are formed without cancellation:
/// `√(m²c² + H) − mc = H/(√(m²c² + H) + mc)`.
pub fn nonrel_limit_check(
    potential: &crate::potential::Potential,
    s0: &RelativeState,
    m1: f64,
    m2: f64,
    c_list: &[f64],
) -> Result<NonRelTable> {
    if c_list.is_empty() {
        return Err(validation("c_list is empty"));
    }
    let mut rows = Vec::with_capacity(c_list.len());
    for &c in c_list {
        let model = TwoBody::new(potential.clone(), m1, m2, c)?;
        let h = s0.energy(&model);
        let (a1, a2) = model.checked_radicands(h)?;
        let mut excess = 0.0;
        let mut deviation = 0.0;
        for (m, a) in [(m1, a1), (m2, a2)] {
            let denom = a.sqrt() + m * c;
            excess += c * h / denom;
            deviation -= h * h / (2.0 * m * denom * denom);
        }
        rows.push(NonRelRow {
            c,
            e_excess: excess,
            newtonian: h / (2.0 * model.reduced_mass()),
            deviation: deviation.abs(),
        });
    }
    let exponent = if rows.len() >= 2 && rows.iter().all(|r| r.deviation > 0.0) {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.c.ln(), r.deviation.ln())).collect();
        Some(-least_squares_slope(&pts))
    } else {
        None
    };
    Ok(NonRelTable { rows, exponent })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    fit_line(pts).1
}

/// Least-squares `(intercept, slope)`.
pub(crate) fn fit_line(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}
