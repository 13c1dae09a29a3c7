//! Experiment drivers behind the `restframe` binary.
//!
//! Each subcommand reads a strict JSON config, runs one module suite,
//! writes CSV/JSON artifacts atomically and returns a [`RunReport`].

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::algebra::{canonicity_residual, sample_points, verify_poincare_algebra, BracketMethod, Layout, TwoBody};
use crate::dynamics::{equal_time_check, evolve, time_reversal_error, worldlines, EvolveConfig, RelativeState};
use crate::ehrenfest::{emergent_trajectory, expectations, nonrel_velocity_gap, GaussianPacket, WavePacket};
use crate::entanglement::{
    entanglement_entropy, hydrogen_state, presentation_map, trace_out_first, trace_out_particle,
    trace_out_relativistic_particle, relativistic_reduced, Particle, PeriodicGrid, PresentationMap,
    PresentationTag, RelativisticState,
};
use crate::error::{validation, Error, Result};
use crate::kinematics::{tube_scan, CollectiveState, Vec3};
use crate::potential::{Potential, PotentialKind, PotentialSpec};
use crate::spectrum::{mass_spectrum, richardson_order, solve_reduced_hamiltonian, RadialGrid, SpectrumJson};

pub const OUT_ENV: &str = "RESTFRAME_OUT";

#[derive(Debug, Parser)]
#[command(name = "restframe", version, about = "Rest-frame two-body experiments")]
pub struct Args {
    #[command(subcommand)]
    pub experiment: Experiment,
    /// JSON config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for randomized sampling.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Output directory (overrides the config and RESTFRAME_OUT).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    /// Møller world-tube scan.
    Tube,
    /// Poincaré bracket closure and canonicity.
    Algebra,
    /// Relative orbit, conservation laws and world-lines.
    Orbit,
    /// Invariant-mass spectrum.
    Spectrum,
    /// Reduced density matrices of a two-particle state.
    Entangle,
    /// Wave-packet Ehrenfest trajectory.
    Ehrenfest,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Tube => "tube",
            Experiment::Algebra => "algebra",
            Experiment::Orbit => "orbit",
            Experiment::Spectrum => "spectrum",
            Experiment::Entangle => "entangle",
            Experiment::Ehrenfest => "ehrenfest",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value ≤ threshold`.
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, pass: value <= threshold }
    }

    /// Passes when `value > threshold`.
    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, pass: value > threshold }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub experiment: Experiment,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl RunReport {
    fn new(experiment: Experiment, seed: u64, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self { experiment, seed, checks, pass }
    }

    /// 0 when every check passes, 3 otherwise.
    pub fn exit_code(&self) -> u8 {
        if self.pass {
            0
        } else {
            3
        }
    }
}

/// 1 for invalid input, 2 for numerical failures.
pub fn error_exit_code(err: &Error) -> u8 {
    match err {
        Error::Validation(_) | Error::Json(_) => 1,
        _ => 2,
    }
}

/// Settings shared by every driver.
#[derive(Clone, Debug, PartialEq)]
pub struct RunContext {
    pub seed: u64,
    pub out_dir: PathBuf,
}

fn tolerances(values: &[(&str, f64)]) -> Result<()> {
    for (name, v) in values {
        if !(v.is_finite() && *v > 0.0) {
            return Err(validation(format!("tolerance `{name}` must be positive, got {v}")));
        }
    }
    Ok(())
}

fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::from(a)
}

fn oscillator() -> PotentialSpec {
    PotentialSpec { kind: PotentialKind::Oscillator, coefficients: vec![1.0] }
}

fn coulomb() -> PotentialSpec {
    PotentialSpec { kind: PotentialKind::Coulomb, coefficients: vec![1.0] }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TubeConfig {
    pub mc: f64,
    pub spin: [f64; 3],
    pub c: f64,
    /// Scan `h = (t, 0, 0)` for `t = 0` and log-spaced `t ∈ [t_min, t_max]`.
    pub t_min: f64,
    pub t_max: f64,
    pub samples: usize,
    pub sup_tolerance: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for TubeConfig {
    fn default() -> Self {
        Self {
            mc: 1.0,
            spin: [0.0, 0.0, 1.0],
            c: 1.0,
            t_min: 1e-3,
            t_max: 1e4,
            samples: 2001,
            sup_tolerance: 1e-4,
            output_dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgebraConfig {
    pub layout: String,
    pub points: usize,
    pub potential: PotentialSpec,
    pub m1: f64,
    pub m2: f64,
    pub c: f64,
    /// `dual`, `central-difference` or `auto`.
    pub method: String,
    /// Defaults to 1e-8 (external) or 1e-6 (internal).
    pub tolerance: Option<f64>,
    pub canonicity_tolerance: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for AlgebraConfig {
    fn default() -> Self {
        Self {
            layout: "external".into(),
            points: 50,
            potential: oscillator(),
            m1: 1.0,
            m2: 1.0,
            c: 1.0,
            method: "dual".into(),
            tolerance: None,
            canonicity_tolerance: 1e-10,
            output_dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitConfig {
    pub potential: PotentialSpec,
    pub m1: f64,
    pub m2: f64,
    pub c: f64,
    pub rho: [f64; 3],
    pub pi: [f64; 3],
    /// Collective boost `h` and position `z` for the world-lines.
    pub h: [f64; 3],
    pub z: [f64; 3],
    pub step: f64,
    pub steps: usize,
    pub drift_tolerance: f64,
    pub reversal_tolerance: f64,
    pub shell_tolerance: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self {
            potential: oscillator(),
            m1: 1.0,
            m2: 1.0,
            c: 1.0,
            rho: [1.0, 0.0, 0.0],
            pi: [0.0, 0.8, 0.1],
            h: [0.0; 3],
            z: [0.0; 3],
            step: 1e-3,
            steps: 10_000,
            drift_tolerance: 1e-9,
            reversal_tolerance: 1e-9,
            shell_tolerance: 1e-10,
            output_dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub potential: PotentialSpec,
    pub l: u32,
    pub m1: f64,
    pub m2: f64,
    pub c: f64,
    pub r_max: f64,
    pub n_points: usize,
    pub levels: usize,
    /// Reference eigenvalues `h_n`; closed forms are used for Coulomb and
    /// the oscillator when absent.
    pub expected: Option<Vec<f64>>,
    pub tolerance: f64,
    /// Grid size of the coarsest of the three Richardson solves (0 disables).
    pub richardson_points: usize,
    pub order_tolerance: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            potential: coulomb(),
            l: 0,
            m1: 1.0,
            m2: 1.0,
            c: 1.0,
            r_max: 200.0,
            n_points: 4000,
            levels: 3,
            expected: None,
            tolerance: 1e-3,
            richardson_points: 999,
            order_tolerance: 0.1,
            output_dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntangleConfig {
    pub n: usize,
    pub length: f64,
    pub m_e: f64,
    pub m_p: f64,
    /// Total momentum `2πk/L`.
    pub momentum_quanta: i64,
    /// `φ(r) ∝ exp(−|r|/a)`.
    pub bohr_radius: f64,
    /// Freezing time of the Jacobi datum in presentation C.
    pub freeze_time: f64,
    /// `h` of the relativistic rest-frame state.
    pub k: [f64; 3],
    pub tolerance: f64,
    pub entropy_tolerance: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for EntangleConfig {
    fn default() -> Self {
        Self {
            n: 128,
            length: 40.0,
            m_e: 1.0,
            m_p: 1836.15267343,
            momentum_quanta: 3,
            bohr_radius: 1.0,
            freeze_time: 1.0,
            k: [0.3, 0.0, 0.0],
            tolerance: 1e-10,
            entropy_tolerance: 1e-8,
            output_dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EhrenfestConfig {
    pub packet: GaussianPacket,
    pub tau_max: f64,
    pub tau_steps: usize,
    pub fd_step: f64,
    /// Momentum width and box length of the narrow-packet velocity check.
    pub narrow_width: f64,
    pub narrow_length: f64,
    pub c_list: Vec<f64>,
    pub norm_tolerance: f64,
    pub ehrenfest_tolerance: f64,
    pub second_difference_tolerance: f64,
    pub velocity_tolerance: f64,
    pub exponent_tolerance: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for EhrenfestConfig {
    fn default() -> Self {
        Self {
            packet: GaussianPacket { k_mean: 1.0, k_width: 0.25, center: 0.0, mass: 1.0, c: 1.0, length: 400.0 },
            tau_max: 10.0,
            tau_steps: 100,
            fd_step: 1e-3,
            narrow_width: 0.01,
            narrow_length: 8000.0,
            c_list: vec![10.0, 100.0, 1000.0, 10000.0],
            norm_tolerance: 1e-14,
            ehrenfest_tolerance: 1e-6,
            second_difference_tolerance: 1e-8,
            velocity_tolerance: 1e-3,
            exponent_tolerance: 0.1,
            output_dir: None,
        }
    }
}

/// Parses `text` as the config of `experiment`. An `experiment` key, when
/// present, must name the same experiment; any other unknown key is rejected.
pub fn parse_config<T: DeserializeOwned>(text: &str, experiment: Experiment) -> Result<T> {
    let mut value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| validation(format!("config is not valid JSON: {e}")))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| validation("config must be a JSON object"))?;
    if let Some(tag) = obj.remove("experiment") {
        if tag.as_str() != Some(experiment.name()) {
            return Err(validation(format!("config is for experiment {tag}, not `{experiment}`")));
        }
    }
    serde_json::from_value(value).map_err(|e| validation(format!("invalid {experiment} config: {e}")))
}

/// `--out`, then the config's `output_dir`, then `$RESTFRAME_OUT`, then `out`.
pub fn resolve_out_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.or(config)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn load<T: DeserializeOwned>(args: &Args) -> Result<T> {
    let path = args
        .config
        .as_ref()
        .ok_or_else(|| validation("--config <path> is required"))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| validation(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text, args.experiment)
}

fn context(args: &Args, output_dir: Option<&Path>) -> Result<RunContext> {
    let out_dir = resolve_out_dir(args.out.as_deref(), output_dir);
    std::fs::create_dir_all(&out_dir)?;
    Ok(RunContext { seed: args.seed, out_dir })
}

/// Runs the subcommand in `args` and writes `<experiment>_report.json`.
pub fn run(args: &Args) -> Result<RunReport> {
    let (report, ctx) = match args.experiment {
        Experiment::Tube => {
            let cfg: TubeConfig = load(args)?;
            let ctx = context(args, cfg.output_dir.as_deref())?;
            (run_tube(&cfg, &ctx)?, ctx)
        }
        Experiment::Algebra => {
            let cfg: AlgebraConfig = load(args)?;
            let ctx = context(args, cfg.output_dir.as_deref())?;
            (run_algebra(&cfg, &ctx)?, ctx)
        }
        Experiment::Orbit => {
            let cfg: OrbitConfig = load(args)?;
            let ctx = context(args, cfg.output_dir.as_deref())?;
            (run_orbit(&cfg, &ctx)?, ctx)
        }
        Experiment::Spectrum => {
            let cfg: SpectrumConfig = load(args)?;
            let ctx = context(args, cfg.output_dir.as_deref())?;
            (run_spectrum(&cfg, &ctx)?, ctx)
        }
        Experiment::Entangle => {
            let cfg: EntangleConfig = load(args)?;
            let ctx = context(args, cfg.output_dir.as_deref())?;
            (run_entangle(&cfg, &ctx)?, ctx)
        }
        Experiment::Ehrenfest => {
            let cfg: EhrenfestConfig = load(args)?;
            let ctx = context(args, cfg.output_dir.as_deref())?;
            (run_ehrenfest(&cfg, &ctx)?, ctx)
        }
    };
    let path = ctx.out_dir.join(format!("{}_report.json", report.experiment));
    crate::io::write_json_atomic(&path, &report)?;
    Ok(report)
}

pub fn run_tube(cfg: &TubeConfig, ctx: &RunContext) -> Result<RunReport> {
    tolerances(&[("sup_tolerance", cfg.sup_tolerance)])?;
    if cfg.samples < 2 || !(cfg.t_min > 0.0 && cfg.t_max > cfg.t_min) {
        return Err(validation("tube scan needs samples ≥ 2 and 0 < t_min < t_max"));
    }
    let cs = CollectiveState::new(Vec3::zeros(), Vec3::zeros(), cfg.mc, vec3(cfg.spin), cfg.c)?;
    let ratio = (cfg.t_max / cfg.t_min).ln() / (cfg.samples - 2).max(1) as f64;
    let mut hs = vec![Vec3::zeros()];
    hs.extend((0..cfg.samples - 1).map(|i| Vec3::new(cfg.t_min * (ratio * i as f64).exp(), 0.0, 0.0)));
    let report = tube_scan(&cs, &hs)?;
    report.write_csv(&ctx.out_dir.join("tube.csv"))?;

    let rho = report.rho;
    let bound = report.sup_xtilde.max(report.sup_r) - rho;
    let mut checks = vec![
        Check::at_most("max_offset_minus_radius", bound, 1e-12 * rho.max(1.0)),
        Check::at_most("sup_offset_gap", (report.sup_r - rho).abs(), cfg.sup_tolerance),
        Check::at_most("betweenness_residual", report.betweenness_residual, 1e-12),
    ];
    if rho > 0.0 {
        let margin = report
            .samples
            .iter()
            .filter(|s| s.hx != 0.0 || s.hy != 0.0 || s.hz != 0.0)
            .map(|s| s.offset_xtilde.min(s.offset_r - s.offset_xtilde))
            .fold(f64::INFINITY, f64::min);
        checks.push(Check::above("strict_betweenness_margin", margin, 0.0));
    }
    Ok(RunReport::new(Experiment::Tube, ctx.seed, checks))
}

fn bracket_method(tag: &str) -> Result<BracketMethod> {
    match tag {
        "auto" => Ok(BracketMethod::Auto),
        "dual" => Ok(BracketMethod::Dual),
        "central-difference" => Ok(BracketMethod::CentralDifference),
        other => Err(validation(format!("unknown bracket method `{other}`"))),
    }
}

pub fn run_algebra(cfg: &AlgebraConfig, ctx: &RunContext) -> Result<RunReport> {
    let layout: Layout = cfg.layout.parse()?;
    let method = bracket_method(&cfg.method)?;
    let tolerance = cfg.tolerance.unwrap_or(match layout {
        Layout::Internal => 1e-6,
        _ => 1e-8,
    });
    tolerances(&[("tolerance", tolerance), ("canonicity_tolerance", cfg.canonicity_tolerance)])?;
    if cfg.points == 0 {
        return Err(validation("points must be positive"));
    }
    let model = TwoBody::new(Potential::try_from(&cfg.potential)?, cfg.m1, cfg.m2, cfg.c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let points = sample_points(layout, &model, cfg.points, true, &mut rng);
    let mut checks = Vec::new();
    if layout != Layout::Relative {
        let closure = verify_poincare_algebra(&model, &points, method)?;
        crate::io::write_json_atomic(&ctx.out_dir.join("algebra.json"), &closure)?;
        checks.push(Check::at_most("closure_residual", closure.max_residual(), tolerance));
    }
    let mut canon = 0.0_f64;
    for pt in &points {
        canon = canon.max(canonicity_residual(pt, &model)?);
    }
    checks.push(Check::at_most("canonicity_residual", canon, cfg.canonicity_tolerance));
    Ok(RunReport::new(Experiment::Algebra, ctx.seed, checks))
}

pub fn run_orbit(cfg: &OrbitConfig, ctx: &RunContext) -> Result<RunReport> {
    tolerances(&[
        ("drift_tolerance", cfg.drift_tolerance),
        ("reversal_tolerance", cfg.reversal_tolerance),
        ("shell_tolerance", cfg.shell_tolerance),
    ])?;
    let model = TwoBody::new(Potential::try_from(&cfg.potential)?, cfg.m1, cfg.m2, cfg.c)?;
    let s0 = RelativeState::new(vec3(cfg.rho), vec3(cfg.pi), 0.0)?;
    let evolve_cfg = EvolveConfig { step: cfg.step, steps: cfg.steps, ..EvolveConfig::default() };
    let traj = evolve(&s0, &model, &evolve_cfg)?;
    let mc = *traj.mc.first().expect("trajectory has an initial sample");
    let cs = CollectiveState::new(vec3(cfg.z), vec3(cfg.h), mc, traj.states[0].spin(), cfg.c)?;
    let wl = worldlines(&traj, &cs, &model)?;
    traj.write_csv(&ctx.out_dir.join("orbit.csv"))?;
    wl.write_csv(&ctx.out_dir.join("worldlines.csv"))?;

    let spin = traj.spin_drift();
    let mut checks = vec![
        Check::at_most("mass_drift", traj.mass_drift(), cfg.drift_tolerance),
        Check::at_most("spin_drift_x", spin[0], cfg.drift_tolerance),
        Check::at_most("spin_drift_y", spin[1], cfg.drift_tolerance),
        Check::at_most("spin_drift_z", spin[2], cfg.drift_tolerance),
        Check::at_most("time_reversal_error", time_reversal_error(&s0, &model, &evolve_cfg)?, cfg.reversal_tolerance),
        Check::at_most("mass_shell_residual", wl.mass_shell_residual(), cfg.shell_tolerance),
    ];
    if cfg.h == [0.0; 3] {
        checks.push(Check::at_most("equal_time_gap", equal_time_check(&wl).max_time_gap, 1e-12));
    }
    Ok(RunReport::new(Experiment::Orbit, ctx.seed, checks))
}

/// Closed-form `h_n` for Coulomb (`−K²/4n²`, `l = 0`) and the oscillator
/// (`ω(4n_r + 2l + 3)`).
fn spectrum_oracle(potential: &Potential, l: u32, count: usize) -> Option<Vec<f64>> {
    match potential {
        Potential::Coulomb { strength } if l == 0 => {
            Some((1..=count).map(|n| -strength * strength / (4.0 * (n * n) as f64)).collect())
        }
        Potential::Oscillator { omega } => {
            Some((0..count).map(|nr| omega.abs() * (4 * nr + 2 * l as usize + 3) as f64).collect())
        }
        _ => None,
    }
}

pub fn run_spectrum(cfg: &SpectrumConfig, ctx: &RunContext) -> Result<RunReport> {
    tolerances(&[("tolerance", cfg.tolerance), ("order_tolerance", cfg.order_tolerance)])?;
    if cfg.levels == 0 {
        return Err(validation("levels must be positive"));
    }
    let potential = Potential::try_from(&cfg.potential)?;
    let grid = RadialGrid::new(cfg.r_max, cfg.n_points)?;
    let h = solve_reduced_hamiltonian(&potential, cfg.l, &grid, cfg.levels)?;
    let spectrum = mass_spectrum(&h, cfg.l, cfg.m1, cfg.m2, cfg.c)?;
    SpectrumJson::new(&spectrum, cfg.l, &grid).write(&ctx.out_dir.join("spectrum.json"))?;

    let mut checks = Vec::new();
    let expected = cfg.expected.clone().or_else(|| spectrum_oracle(&potential, cfg.l, cfg.levels));
    if let Some(expected) = expected {
        for (k, (got, want)) in h.iter().zip(&expected).enumerate() {
            let rel = (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
            checks.push(Check::at_most(&format!("level_{}_relative_error", k + 1), rel, cfg.tolerance));
        }
    }
    if cfg.richardson_points > 0 {
        let coarse = RadialGrid::new(cfg.r_max, cfg.richardson_points)?;
        let medium = coarse.refined();
        let fine = medium.refined();
        let first = |g: &RadialGrid| solve_reduced_hamiltonian(&potential, cfg.l, g, 1).map(|v| v[0]);
        let order = richardson_order(first(&coarse)?, first(&medium)?, first(&fine)?);
        checks.push(Check::at_most("richardson_order_deviation", (order - 2.0).abs(), cfg.order_tolerance));
    }
    Ok(RunReport::new(Experiment::Spectrum, ctx.seed, checks))
}

#[derive(Clone, Copy, Debug, Serialize)]
struct EntangleSummary {
    purity: f64,
    entropy: f64,
    #[serde(rename = "eq2_residual")]
    structure_residual: f64,
}

pub fn run_entangle(cfg: &EntangleConfig, ctx: &RunContext) -> Result<RunReport> {
    tolerances(&[
        ("tolerance", cfg.tolerance),
        ("entropy_tolerance", cfg.entropy_tolerance),
        ("bohr_radius", cfg.bohr_radius),
    ])?;
    let grid = PeriodicGrid::new(cfg.n, cfg.length)?;
    let a = cfg.bohr_radius;
    let phi = move |r: f64| Complex64::new((-r.abs() / a).exp(), 0.0);
    let p = grid.momentum(cfg.momentum_quanta);
    let psi = hydrogen_state(phi, p, cfg.m_e, cfg.m_p, grid)?;
    let q = cfg.m_e * p / psi.total_mass();

    let rho_e = trace_out_particle(&psi, Particle::Electron)?;
    let rho_p = trace_out_particle(&psi, Particle::Proton)?;
    let s_e = entanglement_entropy(&rho_e)?;
    let s_p = entanglement_entropy(&rho_p)?;
    let structure = rho_e.structure_residual(q);
    rho_e.write_csv(&ctx.out_dir.join("kernel.csv"))?;
    let summary = EntangleSummary { purity: rho_e.purity(), entropy: s_e, structure_residual: structure };
    crate::io::write_json_atomic(&ctx.out_dir.join("entangle.json"), &summary)?;

    let rel_b = trace_out_first(&psi, &presentation_map(&psi, PresentationTag::B)?)?;
    let map_c = PresentationMap::new(PresentationTag::C, cfg.m_e, cfg.m_p, p, cfg.freeze_time)?;
    let rel_c = trace_out_first(&psi, &map_c)?;
    let s_b = entanglement_entropy(&rel_b)?;
    let s_c = entanglement_entropy(&rel_c)?;

    let state = RelativisticState::on_grid(vec3(cfg.k), &grid, phi)?;
    let rel = relativistic_reduced(&state)?;
    let refused = [1u8, 2]
        .iter()
        .filter(|&&w| matches!(trace_out_relativistic_particle(&state, w), Err(Error::RelativisticNonSeparability { .. })))
        .count();

    let checks = vec![
        Check::at_most("kernel_structure_residual", structure, cfg.tolerance),
        Check::at_most("translation_residual", rho_e.translation_residual(), cfg.tolerance),
        Check::at_most("diagonal_flatness", rho_e.diagonal_flatness(), cfg.tolerance),
        Check::at_most("schmidt_entropy_gap", (s_e - s_p).abs(), cfg.entropy_tolerance),
        Check::at_most("presentation_entropy_gap", (s_b - s_c).abs(), cfg.entropy_tolerance),
        Check::at_most("relative_factor_impurity", (1.0 - rel.purity()).abs(), cfg.tolerance),
        Check::at_most("particle_traces_not_refused", (2 - refused) as f64, 0.0),
    ];
    Ok(RunReport::new(Experiment::Entangle, ctx.seed, checks))
}

pub fn run_ehrenfest(cfg: &EhrenfestConfig, ctx: &RunContext) -> Result<RunReport> {
    tolerances(&[
        ("norm_tolerance", cfg.norm_tolerance),
        ("ehrenfest_tolerance", cfg.ehrenfest_tolerance),
        ("second_difference_tolerance", cfg.second_difference_tolerance),
        ("velocity_tolerance", cfg.velocity_tolerance),
        ("exponent_tolerance", cfg.exponent_tolerance),
    ])?;
    if cfg.tau_steps < 2 || !(cfg.tau_max > 0.0) {
        return Err(validation("tau grid needs tau_max > 0 and at least 2 steps"));
    }
    let packet = WavePacket::gaussian(&cfg.packet)?;
    let taus: Vec<f64> = (0..=cfg.tau_steps)
        .map(|i| cfg.tau_max * i as f64 / cfg.tau_steps as f64)
        .collect();
    let traj = emergent_trajectory(&packet, &taus, cfg.fd_step)?;
    traj.write_csv(&ctx.out_dir.join("ehrenfest.csv"))?;

    let g = &cfg.packet;
    let narrow = WavePacket::gaussian(&GaussianPacket { k_width: cfg.narrow_width, length: cfg.narrow_length, ..*g })?;
    let target = g.k_mean / g.k_mean.hypot(g.mass * g.c);
    let velocity_gap = (expectations(&narrow).velocity - target).abs();
    let (_, exponent) = nonrel_velocity_gap(g, &cfg.c_list)?;

    let checks = vec![
        Check::at_most("norm_drift", traj.max_norm_drift, cfg.norm_tolerance),
        Check::at_most("momentum_drift", traj.max_momentum_drift, 1e-13),
        Check::at_most("ehrenfest_residual", traj.ehrenfest_residual, cfg.ehrenfest_tolerance),
        Check::at_most("second_difference", traj.second_difference, cfg.second_difference_tolerance),
        Check::at_most("line_dipole", traj.line_dipole, 1e-10),
        Check::at_most("narrow_velocity_gap", velocity_gap, cfg.velocity_tolerance),
        Check::at_most("nonrel_exponent_deviation", (exponent - 2.0).abs(), cfg.exponent_tolerance),
    ];
    Ok(RunReport::new(Experiment::Ehrenfest, ctx.seed, checks))
}
