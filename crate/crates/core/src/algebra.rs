//! Poisson-bracket engine and the two Poincaré realizations.
//!
//! The external realization lives on `(z, h)` plus a relative pair `(ρ, π)`
//! that carries the Casimirs: `S = ρ × π` and `Mc` is the invariant mass
//! of the relative motion. The internal realization lives on the
//! un-physical particle variables `(η₁, κ₁), (η₂, κ₂)`.
//!
//! Bracket relations checked (with `P⁰ ↔ Mc`, `J ↔ S` internally):
//!
//! ```text
//! {J_i, J_j} =  ε_ijk J_k     {J_i, K_j} =  ε_ijk K_k    {J_i, P_j} = ε_ijk P_k
//! {K_i, K_j} = −ε_ijk J_k     {K_i, P_j} = −δ_ij P⁰      {K_i, P⁰}  = −P_i
//! {J_i, P⁰}  = 0              {P_i, P_j} = 0             {P_i, P⁰}  = 0
//! ```

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use crate::ad::{central_gradient, gradient, PhaseFunction, Real};
use crate::error::{ensure_finite, validation, Error, Result};
use crate::kinematics::{CollectiveState, FourVector, Vec3};
use crate::potential::Potential;

/// Two particles with masses `m1`, `m2`, light speed `c` and a potential
/// inside the square roots.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoBody {
    pub potential: Potential,
    pub m1: f64,
    pub m2: f64,
    pub c: f64,
}

impl TwoBody {
    pub fn new(potential: Potential, m1: f64, m2: f64, c: f64) -> Result<Self> {
        for (name, v) in [("m1", m1), ("m2", m2), ("c", c)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(validation(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { potential, m1, m2, c })
    }

    pub fn total_mass(&self) -> f64 {
        self.m1 + self.m2
    }

    pub fn reduced_mass(&self) -> f64 {
        self.m1 * self.m2 / self.total_mass()
    }

    /// `m_i² c²` for particle 1 and 2.
    pub fn rest_terms(&self) -> (f64, f64) {
        let c2 = self.c * self.c;
        (self.m1 * self.m1 * c2, self.m2 * self.m2 * c2)
    }

    /// `H = π² + V(ρ²)` in any scalar.
    pub fn relative_energy<T: Real>(&self, rho: &[T; 3], pi: &[T; 3]) -> T {
        dot(pi, pi) + self.potential.eval(dot(rho, rho))
    }

    /// `√(m₁²c² + H) + √(m₂²c² + H)`.
    pub fn mass_from_energy<T: Real>(&self, h: T) -> T {
        let (r1, r2) = self.rest_terms();
        (T::from_f64(r1) + h).sqrt() + (T::from_f64(r2) + h).sqrt()
    }

    /// Radicands `m_i²c² + H`, failing with a domain error on the first
    /// negative one.
    pub fn checked_radicands(&self, h: f64) -> Result<(f64, f64)> {
        let (r1, r2) = self.rest_terms();
        let (a, b) = (r1 + h, r2 + h);
        for (i, rad) in [(1, a), (2, b)] {
            if !(rad >= 0.0) {
                return Err(Error::Domain {
                    what: format!("m{i}²c² + H is negative for particle {i}"),
                    radicand: rad,
                });
            }
        }
        Ok((a, b))
    }
}

pub(crate) fn dot<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross<T: Real>(a: &[T; 3], b: &[T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn lin<T: Real>(a: &[T; 3], ka: T, b: &[T; 3], kb: T) -> [T; 3] {
    [a[0] * ka + b[0] * kb, a[1] * ka + b[1] * kb, a[2] * ka + b[2] * kb]
}

fn triple<T: Copy>(x: &[T], at: usize) -> [T; 3] {
    [x[at], x[at + 1], x[at + 2]]
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::from(a)
}

/// Canonical-pair layouts. Each pair is a 3-vector coordinate followed by
/// its conjugate 3-vector momentum in the flat coordinate list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// `(z, h), (ρ, π)`.
    External,
    /// `(η₁, κ₁), (η₂, κ₂)`.
    Internal,
    /// `(ρ, π)`.
    Relative,
}

impl Layout {
    pub fn pairs(self) -> usize {
        match self {
            Layout::External | Layout::Internal => 2,
            Layout::Relative => 1,
        }
    }

    pub fn dim(self) -> usize {
        6 * self.pairs()
    }
}

impl FromStr for Layout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "external" => Ok(Layout::External),
            "internal" => Ok(Layout::Internal),
            "relative" => Ok(Layout::Relative),
            other => Err(validation(format!("unknown layout tag `{other}`"))),
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layout::External => "external",
            Layout::Internal => "internal",
            Layout::Relative => "relative",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpacePoint {
    layout: Layout,
    coords: Vec<f64>,
}

impl PhaseSpacePoint {
    pub fn new(layout: Layout, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != layout.dim() {
            return Err(validation(format!(
                "{layout} layout needs {} coordinates, got {}",
                layout.dim(),
                coords.len()
            )));
        }
        ensure_finite("phase-space point", &coords)?;
        Ok(Self { layout, coords })
    }

    fn from_pairs(layout: Layout, pairs: &[(Vec3, Vec3)]) -> Result<Self> {
        let coords = pairs
            .iter()
            .flat_map(|(q, p)| q.iter().chain(p.iter()).copied().collect::<Vec<_>>())
            .collect();
        Self::new(layout, coords)
    }

    pub fn external(z: Vec3, h: Vec3, rho: Vec3, pi: Vec3) -> Result<Self> {
        Self::from_pairs(Layout::External, &[(z, h), (rho, pi)])
    }

    pub fn internal(eta1: Vec3, kappa1: Vec3, eta2: Vec3, kappa2: Vec3) -> Result<Self> {
        Self::from_pairs(Layout::Internal, &[(eta1, kappa1), (eta2, kappa2)])
    }

    pub fn relative(rho: Vec3, pi: Vec3) -> Result<Self> {
        Self::from_pairs(Layout::Relative, &[(rho, pi)])
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Coordinate and momentum of canonical pair `k`.
    pub fn pair(&self, k: usize) -> (Vec3, Vec3) {
        (
            v3(triple(&self.coords, 6 * k)),
            v3(triple(&self.coords, 6 * k + 3)),
        )
    }
}

/// Generator values shared by both realizations: `scalar` is `P⁰` (external)
/// or `Mc` (internal), `momentum` is `P` or `𝒫`, `angular` is `J` or `S`,
/// `boost` is `K` or `𝒦`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Generators<T> {
    scalar: T,
    momentum: [T; 3],
    angular: [T; 3],
    boost: [T; 3],
}

fn external_from_phase<T: Real>(model: &TwoBody, x: &[T]) -> Generators<T> {
    let (z, h) = (triple(x, 0), triple(x, 3));
    let (rho, pi) = (triple(x, 6), triple(x, 9));
    let mc = model.mass_from_energy(model.relative_energy(&rho, &pi));
    let spin = cross(&rho, &pi);
    external_from_collective(z, h, mc, spin)
}

fn external_from_collective<T: Real>(z: [T; 3], h: [T; 3], mc: T, spin: [T; 3]) -> Generators<T> {
    let gamma = (T::one() + dot(&h, &h)).sqrt();
    let zh = cross(&z, &h);
    let sh = cross(&spin, &h);
    let wigner = T::one() / (T::one() + gamma);
    Generators {
        scalar: mc * gamma,
        momentum: lin(&h, mc, &h, T::zero()),
        angular: lin(&zh, T::one(), &spin, T::one()),
        boost: lin(&z, -gamma, &sh, wigner),
    }
}

fn internal_from_phase<T: Real>(model: &TwoBody, x: &[T]) -> Generators<T> {
    let (eta1, kappa1) = (triple(x, 0), triple(x, 3));
    let (eta2, kappa2) = (triple(x, 6), triple(x, 9));
    let d = lin(&eta1, T::one(), &eta2, -T::one());
    let v = model.potential.eval(dot(&d, &d));
    let (r1, r2) = model.rest_terms();
    let w1 = (T::from_f64(r1) + dot(&kappa1, &kappa1) + v).sqrt();
    let w2 = (T::from_f64(r2) + dot(&kappa2, &kappa2) + v).sqrt();
    let s1 = cross(&eta1, &kappa1);
    let s2 = cross(&eta2, &kappa2);
    Generators {
        scalar: w1 + w2,
        momentum: lin(&kappa1, T::one(), &kappa2, T::one()),
        angular: lin(&s1, T::one(), &s2, T::one()),
        boost: lin(&eta1, -w1, &eta2, -w2),
    }
}

/// External generators `P^μ`, `J` (axial form of `J^ij`) and `K^i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorSet {
    pub p: FourVector,
    pub j: Vec3,
    pub k: Vec3,
}

impl GeneratorSet {
    /// Pauli-Lubanski vector `W = (J·P; P⁰ J − P × K)`.
    pub fn pauli_lubanski(&self) -> FourVector {
        let p = self.p.spatial();
        FourVector::new(self.j.dot(&p), self.j * self.p.t - p.cross(&self.k))
    }
}

pub fn external_generators(cs: &CollectiveState) -> GeneratorSet {
    let g = external_from_collective(cs.z.into(), cs.h.into(), cs.mc, cs.spin.into());
    GeneratorSet {
        p: FourVector::new(g.scalar, v3(g.momentum)),
        j: v3(g.angular),
        k: v3(g.boost),
    }
}

/// Internal generators `Mc`, `𝒫`, `S`, `𝒦`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InternalGeneratorSet {
    pub mc: f64,
    pub p_int: Vec3,
    pub spin: Vec3,
    pub k_int: Vec3,
}

fn require_layout(pt: &PhaseSpacePoint, layout: Layout) -> Result<()> {
    if pt.layout != layout {
        return Err(validation(format!(
            "expected a point in the {layout} layout, got {}",
            pt.layout
        )));
    }
    Ok(())
}

pub fn internal_generators(pt: &PhaseSpacePoint, model: &TwoBody) -> Result<InternalGeneratorSet> {
    require_layout(pt, Layout::Internal)?;
    let (eta1, kappa1) = pt.pair(0);
    let (eta2, kappa2) = pt.pair(1);
    let v = model.potential.value((eta1 - eta2).norm_squared());
    let (r1, r2) = model.rest_terms();
    for (i, rad) in [(1, r1 + kappa1.norm_squared() + v), (2, r2 + kappa2.norm_squared() + v)] {
        if !(rad >= 0.0) {
            return Err(Error::Domain {
                what: format!("m{i}²c² + κ{i}² + V is negative for particle {i}"),
                radicand: rad,
            });
        }
    }
    let g = internal_from_phase(model, pt.coords());
    Ok(InternalGeneratorSet {
        mc: g.scalar,
        p_int: v3(g.momentum),
        spin: v3(g.angular),
        k_int: v3(g.boost),
    })
}

/// `(|𝒫|, |𝒦|)`: distance from the rest-frame constraint surface.
pub fn restframe_residuals(pt: &PhaseSpacePoint, model: &TwoBody) -> Result<(f64, f64)> {
    let g = internal_generators(pt, model)?;
    Ok((g.p_int.norm(), g.k_int.norm()))
}

/// Physical relative variables `ρ = η₁ − η₂`, `π = (m₂κ₁ − m₁κ₂)/M`.
pub fn to_relative(eta1: &Vec3, eta2: &Vec3, kappa1: &Vec3, kappa2: &Vec3, m1: f64, m2: f64) -> (Vec3, Vec3) {
    let total = m1 + m2;
    (eta1 - eta2, kappa1 * (m2 / total) - kappa2 * (m1 / total))
}

/// Internal center of mass `η` fixed by `𝒦 ≈ 0`.
pub fn internal_cm(rho: &Vec3, pi: &Vec3, model: &TwoBody) -> Result<Vec3> {
    let h = pi.norm_squared() + model.potential.value(rho.norm_squared());
    let (a1, a2) = model.checked_radicands(h)?;
    let (w1, w2) = (a1.sqrt(), a2.sqrt());
    let coeff = (model.m1 * w2 - model.m2 * w1) / (model.total_mass() * (w1 + w2));
    Ok(rho * coeff)
}

/// Gauge-fixed internal point on the constraint surface: `κ₁ = −κ₂ = π` and
/// `η₁ = η + m₂ρ/M`, `η₂ = η − m₁ρ/M` with `η` from [`internal_cm`].
pub fn from_relative(rho: &Vec3, pi: &Vec3, model: &TwoBody) -> Result<PhaseSpacePoint> {
    let eta = internal_cm(rho, pi, model)?;
    let total = model.total_mass();
    PhaseSpacePoint::internal(
        eta + rho * (model.m2 / total),
        *pi,
        eta - rho * (model.m1 / total),
        -pi,
    )
}

/// A single generator component as a phase-space function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    /// `P⁰` or `Mc`.
    Scalar,
    /// `P_i` or `𝒫_i`.
    Momentum(usize),
    /// `J_i` or `S_i`.
    Angular(usize),
    /// `K_i` or `𝒦_i`.
    Boost(usize),
}

#[derive(Clone, Debug)]
pub struct GeneratorFn<'a> {
    pub layout: Layout,
    pub model: &'a TwoBody,
    pub component: Component,
}

impl PhaseFunction for GeneratorFn<'_> {
    fn eval<T: Real>(&self, x: &[T]) -> T {
        let g = match self.layout {
            Layout::Internal => internal_from_phase(self.model, x),
            _ => external_from_phase(self.model, x),
        };
        match self.component {
            Component::Scalar => g.scalar,
            Component::Momentum(i) => g.momentum[i],
            Component::Angular(i) => g.angular[i],
            Component::Boost(i) => g.boost[i],
        }
    }
}

/// The `i`-th flat coordinate.
#[derive(Clone, Copy, Debug)]
pub struct Coordinate(pub usize);

impl PhaseFunction for Coordinate {
    fn eval<T: Real>(&self, x: &[T]) -> T {
        x[self.0]
    }
}

/// Component of `ρ` or `π` as a function of the internal particle variables.
#[derive(Clone, Copy, Debug)]
pub enum RelativeFn {
    Rho(usize),
    Pi { index: usize, m1: f64, m2: f64 },
}

impl PhaseFunction for RelativeFn {
    fn eval<T: Real>(&self, x: &[T]) -> T {
        match *self {
            RelativeFn::Rho(i) => x[i] - x[6 + i],
            RelativeFn::Pi { index, m1, m2 } => {
                let total = m1 + m2;
                x[3 + index].scale(m2 / total) - x[9 + index].scale(m1 / total)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BracketMethod {
    /// Dual numbers, falling back to central differences when a derivative
    /// comes out non-finite.
    #[default]
    Auto,
    Dual,
    CentralDifference,
}

fn checked_gradient<F: PhaseFunction + ?Sized>(
    f: &F,
    x: &[f64],
    method: BracketMethod,
) -> Result<Vec<f64>> {
    let all_finite = |g: &[f64]| g.iter().all(|v| v.is_finite());
    let g = match method {
        BracketMethod::CentralDifference => central_gradient(f, x),
        BracketMethod::Dual => gradient(f, x),
        BracketMethod::Auto => {
            let g = gradient(f, x);
            if all_finite(&g) {
                g
            } else {
                central_gradient(f, x)
            }
        }
    };
    if all_finite(&g) {
        Ok(g)
    } else {
        Err(Error::Numerical(
            "phase-space function failed to evaluate near the point".into(),
        ))
    }
}

fn bracket_of_gradients(gf: &[f64], gg: &[f64]) -> f64 {
    let mut sum = 0.0;
    for pair in 0..gf.len() / 6 {
        for i in 0..3 {
            let (q, p) = (6 * pair + i, 6 * pair + 3 + i);
            sum += gf[q] * gg[p] - gf[p] * gg[q];
        }
    }
    sum
}

/// `{f, g} = Σ (∂f/∂q ∂g/∂p − ∂f/∂p ∂g/∂q)` at `pt`.
pub fn poisson_bracket<F, G>(f: &F, g: &G, pt: &PhaseSpacePoint) -> Result<f64>
where
    F: PhaseFunction + ?Sized,
    G: PhaseFunction + ?Sized,
{
    poisson_bracket_with(f, g, pt, BracketMethod::Auto)
}

pub fn poisson_bracket_with<F, G>(f: &F, g: &G, pt: &PhaseSpacePoint, method: BracketMethod) -> Result<f64>
where
    F: PhaseFunction + ?Sized,
    G: PhaseFunction + ?Sized,
{
    let gf = checked_gradient(f, pt.coords(), method)?;
    let gg = checked_gradient(g, pt.coords(), method)?;
    Ok(bracket_of_gradients(&gf, &gg))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosureEntry {
    pub relation: String,
    pub max_residual: f64,
    pub worst_point: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosureReport {
    pub layout: Layout,
    pub entries: Vec<ClosureEntry>,
}

impl ClosureReport {
    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.max_residual).fold(0.0, f64::max)
    }
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    ((i as i64 - j as i64) * (j as i64 - k as i64) * (k as i64 - i as i64)) as f64 / 2.0
}

const RELATIONS: [&str; 9] = [
    "{J_i,J_j} = e_ijk J_k",
    "{J_i,K_j} = e_ijk K_k",
    "{J_i,P_j} = e_ijk P_k",
    "{K_i,K_j} = -e_ijk J_k",
    "{K_i,P_j} = -d_ij P0",
    "{K_i,P0} = -P_i",
    "{J_i,P0} = 0",
    "{P_i,P_j} = 0",
    "{P_i,P0} = 0",
];

const INTERNAL_RELATIONS: [&str; 9] = [
    "{S_i,S_j} = e_ijk S_k",
    "{S_i,K_j} = e_ijk K_k",
    "{S_i,P_j} = e_ijk P_k",
    "{K_i,K_j} = -e_ijk S_k",
    "{K_i,P_j} = -d_ij Mc",
    "{K_i,Mc} = -P_i",
    "{S_i,Mc} = 0",
    "{P_i,P_j} = 0",
    "{P_i,Mc} = 0",
];

// Residual of each relation at one point, from generator gradients.
fn closure_residuals(model: &TwoBody, pt: &PhaseSpacePoint, method: BracketMethod) -> Result<[f64; 9]> {
    let layout = pt.layout;
    let x = pt.coords();
    let grad = |component| {
        checked_gradient(&GeneratorFn { layout, model, component }, x, method)
    };
    let values = match layout {
        Layout::Internal => internal_from_phase(model, x),
        _ => external_from_phase(model, x),
    };
    let scalar = grad(Component::Scalar)?;
    let mut mom = Vec::with_capacity(3);
    let mut ang = Vec::with_capacity(3);
    let mut boost = Vec::with_capacity(3);
    for i in 0..3 {
        mom.push(grad(Component::Momentum(i))?);
        ang.push(grad(Component::Angular(i))?);
        boost.push(grad(Component::Boost(i))?);
    }
    let br = bracket_of_gradients;
    let mut res = [0.0_f64; 9];
    let mut bump = |slot: usize, r: f64| res[slot] = res[slot].max(r.abs());
    for i in 0..3 {
        for j in 0..3 {
            let rot = |v: &[f64; 3]| (0..3).map(|k| levi_civita(i, j, k) * v[k]).sum::<f64>();
            let delta = if i == j { 1.0 } else { 0.0 };
            bump(0, br(&ang[i], &ang[j]) - rot(&values.angular));
            bump(1, br(&ang[i], &boost[j]) - rot(&values.boost));
            bump(2, br(&ang[i], &mom[j]) - rot(&values.momentum));
            bump(3, br(&boost[i], &boost[j]) + rot(&values.angular));
            bump(4, br(&boost[i], &mom[j]) + delta * values.scalar);
            bump(7, br(&mom[i], &mom[j]));
        }
        bump(5, br(&boost[i], &scalar) + values.momentum[i]);
        bump(6, br(&ang[i], &scalar));
        bump(8, br(&mom[i], &scalar));
    }
    Ok(res)
}

/// Evaluates every bracket relation at each point and reports the largest
/// residual per relation. All points must share the layout (external or
/// internal).
pub fn verify_poincare_algebra(
    model: &TwoBody,
    points: &[PhaseSpacePoint],
    method: BracketMethod,
) -> Result<ClosureReport> {
    let first = points
        .first()
        .ok_or_else(|| validation("closure check needs at least one point"))?;
    let layout = first.layout;
    if layout == Layout::Relative {
        return Err(validation("the relative layout carries no Poincaré realization"));
    }
    let names = if layout == Layout::Internal { INTERNAL_RELATIONS } else { RELATIONS };
    let mut entries: Vec<ClosureEntry> = names
        .iter()
        .map(|n| ClosureEntry {
            relation: n.to_string(),
            max_residual: 0.0,
            worst_point: first.coords.clone(),
        })
        .collect();
    for pt in points {
        require_layout(pt, layout)?;
        let res = closure_residuals(model, pt, method)?;
        for (entry, r) in entries.iter_mut().zip(res) {
            if r > entry.max_residual {
                entry.max_residual = r;
                entry.worst_point = pt.coords.clone();
            }
        }
    }
    Ok(ClosureReport { layout, entries })
}

/// Residuals of the elementary canonical brackets: `{q_i, p_j} = δ_ij`
/// for the layout's own pairs, or `{ρ_i, π_j} = δ_ij` (and `{ρ,ρ}`,
/// `{π,π}` vanishing) through the internal variables.
pub fn canonicity_residual(pt: &PhaseSpacePoint, model: &TwoBody) -> Result<f64> {
    let mut worst = 0.0_f64;
    if pt.layout == Layout::Internal {
        let rho = |i| RelativeFn::Rho(i);
        let pi = |i| RelativeFn::Pi { index: i, m1: model.m1, m2: model.m2 };
        for i in 0..3 {
            for j in 0..3 {
                let delta = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((poisson_bracket(&rho(i), &pi(j), pt)? - delta).abs());
                worst = worst.max(poisson_bracket(&rho(i), &rho(j), pt)?.abs());
                worst = worst.max(poisson_bracket(&pi(i), &pi(j), pt)?.abs());
            }
        }
    }
    let dim = pt.layout.dim();
    for a in 0..dim {
        for b in 0..dim {
            let expected = match (a % 6 < 3, b % 6 < 3) {
                (true, false) if b == a + 3 => 1.0,
                (false, true) if a == b + 3 => -1.0,
                _ => 0.0,
            };
            worst = worst.max((poisson_bracket(&Coordinate(a), &Coordinate(b), pt)? - expected).abs());
        }
    }
    Ok(worst)
}

/// Random points in `layout`, coordinates uniform in `[−1, 1]`. With
/// `on_constraint_surface` internal points are gauge-fixed through
/// [`from_relative`]. Points with a negative radicand are redrawn.
pub fn sample_points<R: Rng>(
    layout: Layout,
    model: &TwoBody,
    count: usize,
    on_constraint_surface: bool,
    rng: &mut R,
) -> Vec<PhaseSpacePoint> {
    let draw = |rng: &mut R| Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let (a, b, c, d) = (draw(rng), draw(rng), draw(rng), draw(rng));
        let pt = match layout {
            Layout::External => PhaseSpacePoint::external(a, b, c, d),
            Layout::Relative => PhaseSpacePoint::relative(a, b),
            Layout::Internal if on_constraint_surface => from_relative(&a, &b, model),
            Layout::Internal => PhaseSpacePoint::internal(a, b, c, d),
        };
        let Ok(pt) = pt else { continue };
        let ok = match layout {
            Layout::Internal => internal_generators(&pt, model).is_ok(),
            Layout::External | Layout::Relative => {
                let (rho, pi) = pt.pair(pt.layout.pairs() - 1);
                let h = pi.norm_squared() + model.potential.value(rho.norm_squared());
                model.checked_radicands(h).is_ok()
            }
        };
        if ok {
            out.push(pt);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn free() -> TwoBody {
        TwoBody::new(Potential::free(), 1.0, 1.0, 1.0).unwrap()
    }

    fn oscillator() -> TwoBody {
        TwoBody::new(Potential::Oscillator { omega: 1.0 }, 1.0, 2.0, 1.0).unwrap()
    }

    #[test]
    fn external_generator_examples() {
        let cs = CollectiveState::new(Vec3::zeros(), Vec3::zeros(), 2.0, Vec3::new(0.0, 0.0, 1.0), 1.0).unwrap();
        let g = external_generators(&cs);
        assert_eq!(g.p, FourVector::new(2.0, Vec3::zeros()));
        assert_eq!(g.j, Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(g.k, Vec3::zeros());

        let cs = CollectiveState::new(Vec3::new(1.0, 0.0, 0.0), Vec3::zeros(), 1.0, Vec3::zeros(), 1.0).unwrap();
        assert_eq!(external_generators(&cs).k, Vec3::new(-1.0, 0.0, 0.0));
    }

    #[test]
    fn casimirs_hold_for_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let mut v = || Vec3::from_fn(|_, _| rng.random_range(-3.0..3.0));
            let (z, h, s) = (v(), v(), v());
            let mc = 0.5 + h.norm();
            let cs = CollectiveState::new(z, h, mc, s, 1.0).unwrap();
            let g = external_generators(&cs);
            assert!((g.p.square() - mc * mc).abs() < 1e-12 * mc * mc * (1.0 + h.norm_squared()));
            let w2 = g.pauli_lubanski().square();
            let scale = (mc * s.norm()).powi(2) * (1.0 + h.norm_squared());
            assert!((w2 + mc * mc * s.norm_squared()).abs() < 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn internal_generator_examples() {
        let model = free();
        let (e1, e2) = (Vec3::new(0.2, -0.1, 0.4), Vec3::new(-0.3, 0.5, 0.0));
        let g = internal_generators(&PhaseSpacePoint::internal(e1, Vec3::zeros(), e2, Vec3::zeros()).unwrap(), &model).unwrap();
        assert_eq!(g.mc, 2.0);
        assert_eq!(g.p_int, Vec3::zeros());
        assert_eq!(g.spin, Vec3::zeros());
        assert!((g.k_int + (e1 + e2)).norm() < 1e-15);

        let k = Vec3::new(1.5_f64.sqrt(), 0.0, 0.0);
        let g = internal_generators(&PhaseSpacePoint::internal(e1, k, e2, -k).unwrap(), &model).unwrap();
        assert!((g.mc - 2.0 * 2.5_f64.sqrt()).abs() < 1e-14);

        let (k1, k2) = (Vec3::new(0.3, 0.1, -0.2), Vec3::new(-0.7, 0.4, 0.9));
        let g = internal_generators(&PhaseSpacePoint::internal(e1, k1, e1, k2).unwrap(), &model).unwrap();
        assert!((g.spin - e1.cross(&(k1 + k2))).norm() < 1e-15);
    }

    #[test]
    fn negative_radicand_names_the_particle() {
        let model = TwoBody::new(Potential::Polynomial(vec![-10.0]), 1.0, 5.0, 1.0).unwrap();
        let pt = PhaseSpacePoint::internal(Vec3::zeros(), Vec3::zeros(), Vec3::zeros(), Vec3::zeros()).unwrap();
        match internal_generators(&pt, &model) {
            Err(Error::Domain { what, .. }) => assert!(what.contains("particle 1")),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn elementary_brackets() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for layout in [Layout::External, Layout::Internal, Layout::Relative] {
            for pt in sample_points(layout, &oscillator(), 5, false, &mut rng) {
                assert!(canonicity_residual(&pt, &oscillator()).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn boost_momentum_bracket_equals_minus_energy() {
        let model = oscillator();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pt = &sample_points(Layout::External, &model, 1, false, &mut rng)[0];
        let k1 = GeneratorFn { layout: Layout::External, model: &model, component: Component::Boost(0) };
        let p1 = GeneratorFn { component: Component::Momentum(0), ..k1.clone() };
        let p0 = GeneratorFn { component: Component::Scalar, ..k1.clone() };
        let dual = poisson_bracket_with(&k1, &p1, pt, BracketMethod::Dual).unwrap();
        let fd = poisson_bracket_with(&k1, &p1, pt, BracketMethod::CentralDifference).unwrap();
        let energy = p0.eval(pt.coords());
        assert!((dual + energy).abs() < 1e-12);
        assert!((fd + energy).abs() < 1e-8);
    }

    #[test]
    fn closure_external_and_free_internal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = oscillator();
        let pts = sample_points(Layout::External, &model, 10, false, &mut rng);
        let rep = verify_poincare_algebra(&model, &pts, BracketMethod::Dual).unwrap();
        assert!(rep.max_residual() < 1e-10, "{rep:?}");

        let model = free();
        let pts = sample_points(Layout::Internal, &model, 10, false, &mut rng);
        let rep = verify_poincare_algebra(&model, &pts, BracketMethod::Dual).unwrap();
        assert!(rep.max_residual() < 1e-10, "{rep:?}");
    }

    #[test]
    fn interacting_internal_algebra_closes_only_weakly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = oscillator();
        let on = sample_points(Layout::Internal, &model, 10, true, &mut rng);
        assert!(verify_poincare_algebra(&model, &on, BracketMethod::Auto).unwrap().max_residual() < 1e-10);
        let off = sample_points(Layout::Internal, &model, 10, false, &mut rng);
        let rep = verify_poincare_algebra(&model, &off, BracketMethod::Auto).unwrap();
        assert!(rep.max_residual() > 1e-6);
        let strong = rep.entries.iter().find(|e| e.relation.starts_with("{K_i,P_j}")).unwrap();
        assert!(strong.max_residual < 1e-10);
    }

    #[test]
    fn conserved_under_internal_hamiltonian() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = TwoBody::new(Potential::Polynomial(vec![0.2, 0.5, 0.3]), 1.0, 1.5, 2.0).unwrap();
        let mc = GeneratorFn { layout: Layout::Internal, model: &model, component: Component::Scalar };
        for pt in sample_points(Layout::Internal, &model, 5, false, &mut rng) {
            for i in 0..3 {
                let p = GeneratorFn { component: Component::Momentum(i), ..mc.clone() };
                let s = GeneratorFn { component: Component::Angular(i), ..mc.clone() };
                assert!(poisson_bracket(&mc, &p, &pt).unwrap().abs() < 1e-12);
                assert!(poisson_bracket(&mc, &s, &pt).unwrap().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn restframe_residual_examples() {
        let model = oscillator();
        let (rho, pi) = (Vec3::new(0.4, -0.3, 0.2), Vec3::new(0.1, 0.6, -0.5));
        let pt = from_relative(&rho, &pi, &model).unwrap();
        let (p, k) = restframe_residuals(&pt, &model).unwrap();
        assert!(p < 1e-12 && k < 1e-12, "{p} {k}");

        let k1 = Vec3::new(0.3, -0.4, 0.0);
        let pt = PhaseSpacePoint::internal(rho, k1, -rho, k1).unwrap();
        assert!((restframe_residuals(&pt, &model).unwrap().0 - 2.0 * k1.norm()).abs() < 1e-15);

        let equal = TwoBody::new(Potential::Oscillator { omega: 0.7 }, 1.3, 1.3, 1.0).unwrap();
        let pt = PhaseSpacePoint::internal(rho, k1, -rho, -k1).unwrap();
        assert!(restframe_residuals(&pt, &equal).unwrap().1 < 1e-15);
    }

    #[test]
    fn relative_variable_examples() {
        let e = Vec3::new(0.3, 0.2, 0.1);
        let k = Vec3::new(1.0, -2.0, 0.5);
        let (rho, pi) = to_relative(&e, &e, &k, &-k, 1.0, 1.0);
        assert_eq!(rho, Vec3::zeros());
        assert_eq!(pi, k);
    }

    #[test]
    fn internal_cm_examples() {
        let rho = Vec3::new(1.0, 0.0, 0.0);
        let equal = TwoBody::new(Potential::Oscillator { omega: 1.0 }, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(internal_cm(&rho, &Vec3::new(0.2, 0.3, 0.0), &equal).unwrap(), Vec3::zeros());

        let unequal = TwoBody::new(Potential::free(), 2.0, 1.0, 1.0).unwrap();
        assert_eq!(internal_cm(&Vec3::zeros(), &Vec3::new(1.0, 0.0, 0.0), &unequal).unwrap(), Vec3::zeros());
        assert!(internal_cm(&rho, &Vec3::zeros(), &unequal).unwrap().norm() < 1e-16);
        let eta = internal_cm(&rho, &Vec3::new(3.0_f64.sqrt(), 0.0, 0.0), &unequal).unwrap();
        let expected = (4.0 - 7.0_f64.sqrt()) / (3.0 * (7.0_f64.sqrt() + 2.0));
        assert!((eta.x - expected).abs() < 1e-15);
        assert!((eta.x - 0.09717).abs() < 1e-5);

        let deep = TwoBody::new(Potential::Polynomial(vec![-5.0]), 2.0, 1.0, 1.0).unwrap();
        assert!(matches!(internal_cm(&rho, &Vec3::zeros(), &deep), Err(Error::Domain { .. })));
    }

    #[test]
    fn layout_tags() {
        assert_eq!("external".parse::<Layout>().unwrap(), Layout::External);
        assert!("bogus".parse::<Layout>().is_err());
        assert!(PhaseSpacePoint::new(Layout::Relative, vec![0.0; 5]).is_err());
    }
}
