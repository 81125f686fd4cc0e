//! Scenario definitions and sweep drivers: a plant, a controller family, a
//! wiring preset, and a noise grid, optimized point by point with warm
//! starts and reduced into machine-readable sweep rows.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::controllers::{
    coherent_cavity_controller, heterodyne_amplifier, homodyne_dynamic_controller,
    lqg_optimal_classical, opo_controller, trivial_controller, two_mode_squeezer, MeasKind,
    MeasurementSpec, OpoParams,
};
use crate::error::{QlinError, Result};
use crate::model::{cavity_plant, optomech_plant, CavityParams, LinearModel, NoiseSpec, OptomechParams};
use crate::network::close_loop;
use crate::optimize::{
    multi_start, OptimizationResult, OptimizeOptions, ParamSpace, ParamSpec, PENALTY_BASE,
    PENALTY_INVALID,
};
use crate::steady::{max_real_eigenvalue, steady_covariance, STABILITY_MARGIN};

use nalgebra::DMatrix;

/// The controller families of the cavity and optomechanical studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Trivial,
    HeterodyneAmplifier,
    HomodyneDynamic,
    LqgOptimal,
    CoherentCavity,
    TwoModeSqueezer,
    Opo,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Trivial => "trivial",
            Family::HeterodyneAmplifier => "heterodyne_amplifier",
            Family::HomodyneDynamic => "homodyne_dynamic",
            Family::LqgOptimal => "lqg_optimal",
            Family::CoherentCavity => "coherent_cavity",
            Family::TwoModeSqueezer => "two_mode_squeezer",
            Family::Opo => "opo",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "trivial" => Ok(Family::Trivial),
            "heterodyne_amplifier" => Ok(Family::HeterodyneAmplifier),
            "homodyne_dynamic" => Ok(Family::HomodyneDynamic),
            "lqg_optimal" => Ok(Family::LqgOptimal),
            "coherent_cavity" => Ok(Family::CoherentCavity),
            "two_mode_squeezer" => Ok(Family::TwoModeSqueezer),
            "opo" => Ok(Family::Opo),
            other => Err(QlinError::InvalidParameter(format!(
                "unknown controller family {other:?}"
            ))),
        }
    }

    /// Measurement-based families, as opposed to coherent (all-optical) ones.
    pub fn is_classical(&self) -> bool {
        matches!(
            self,
            Family::HeterodyneAmplifier | Family::HomodyneDynamic | Family::LqgOptimal
        )
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Plant selection; the swept thermal occupancy and (for the optomechanical
/// plant) the jointly optimized coupling are supplied per point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantSpec {
    Cavity { k1: f64, k2: f64, k3: f64, delta: f64 },
    Optomech { omega: f64, q: f64 },
}

impl PlantSpec {
    pub fn has_coupling_parameter(&self) -> bool {
        matches!(self, PlantSpec::Optomech { .. })
    }

    fn mode_frequency(&self) -> f64 {
        match self {
            PlantSpec::Cavity { delta, .. } => delta.abs(),
            PlantSpec::Optomech { omega, .. } => *omega,
        }
    }
}

/// Loop topology: which plant ports the controller sits between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WiringPreset {
    /// Cavity study: mirror-1 output through the controller into mirror 2.
    CavityLoop,
    /// Optomechanical study: probe readout through the controller into the
    /// feedback port.
    OptomechLoop,
}

impl WiringPreset {
    fn plant_ports(&self) -> (&'static str, &'static str) {
        match self {
            WiringPreset::CavityLoop => ("m1", "m2"),
            WiringPreset::OptomechLoop => ("probe", "fb"),
        }
    }

    fn matches_plant(&self, plant: &PlantSpec) -> bool {
        matches!(
            (self, plant),
            (WiringPreset::CavityLoop, PlantSpec::Cavity { .. })
                | (WiringPreset::OptomechLoop, PlantSpec::Optomech { .. })
        )
    }
}

/// The OPO feeds the plant from its transmission port in the cavity loop
/// (pinned by the two-mode-squeezer equivalence) and from its reflection
/// port in the optomechanical loop (pinned by coherent-cavity containment).
pub fn opo_feedback_output(preset: WiringPreset) -> &'static str {
    match preset {
        WiringPreset::CavityLoop => "out2",
        WiringPreset::OptomechLoop => "out1",
    }
}

/// Leak-port floor for the OPO's second mirror, below the generic rate
/// bounds so the reflection limit closes onto the plain cavity family.
pub const OPO_LEAK_FLOOR: f64 = 1e-9;

/// A full sweep definition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub plant: PlantSpec,
    pub family: Family,
    pub wiring: WiringPreset,
    /// Thermal occupancies to sweep, ascending.
    pub kn_sweep: Vec<f64>,
    pub optimizer: OptimizeOptions,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !self.wiring.matches_plant(&self.plant) {
            return Err(QlinError::InvalidParameter(
                "wiring preset does not match the plant's channel layout".into(),
            ));
        }
        if self.kn_sweep.is_empty() {
            return Err(QlinError::InvalidParameter("empty noise sweep".into()));
        }
        if self.kn_sweep.iter().any(|&k| !(k > 0.0)) {
            return Err(QlinError::InvalidParameter(
                "sweep occupancies must be positive".into(),
            ));
        }
        if self.kn_sweep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(QlinError::InvalidParameter(
                "sweep occupancies must be strictly ascending".into(),
            ));
        }
        self.optimizer.validate()?;
        if let PlantSpec::Cavity { k1, k2, k3, .. } = self.plant {
            if !(k1 > 0.0 && k2 > 0.0 && k3 > 0.0) {
                return Err(QlinError::InvalidParameter(
                    "cavity decay rates must be positive".into(),
                ));
            }
        }
        if let PlantSpec::Optomech { omega, q } = self.plant {
            if !(omega > 0.0 && q > 0.0) {
                return Err(QlinError::InvalidParameter(
                    "mechanical frequency and quality factor must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn point(&self, k_n: f64) -> ScenarioPoint {
        ScenarioPoint {
            plant: self.plant,
            family: self.family,
            wiring: self.wiring,
            k_n,
            penalty_weight: self.optimizer.penalty_weight,
            rate_lo: self.optimizer.rate_lo,
            rate_hi: self.optimizer.rate_hi,
        }
    }
}

/// One (plant, family, k_n) optimization problem.
#[derive(Debug, Clone, Copy)]
pub struct ScenarioPoint {
    pub plant: PlantSpec,
    pub family: Family,
    pub wiring: WiringPreset,
    pub k_n: f64,
    pub penalty_weight: f64,
    pub rate_lo: f64,
    pub rate_hi: f64,
}

impl ScenarioPoint {
    fn build_plant(&self, coupling: f64) -> Result<LinearModel> {
        match self.plant {
            PlantSpec::Cavity { k1, k2, k3, delta } => cavity_plant(&CavityParams {
                k1,
                k2,
                k3,
                k_n: self.k_n,
                delta,
            }),
            PlantSpec::Optomech { omega, q } => {
                optomech_plant(&OptomechParams::symmetric(omega, q, coupling, self.k_n))
            }
        }
    }

    /// Optimizer coordinates for this family (plus the coupling on the
    /// optomechanical plant, which the study varies jointly).
    pub fn param_space(&self) -> ParamSpace {
        let tau = std::f64::consts::TAU;
        let mut specs = match self.family {
            Family::Trivial => vec![ParamSpec::periodic("theta", 0.0, tau)],
            Family::HeterodyneAmplifier => vec![ParamSpec::linear("gain", 0.0, 10.0)],
            Family::TwoModeSqueezer => vec![ParamSpec::linear("eta", 0.0, 10.0)],
            Family::CoherentCavity => vec![
                ParamSpec::log10("kappa", self.rate_lo, self.rate_hi),
                ParamSpec::linear("delta", -1e3, 1e3),
                ParamSpec::periodic("phase", 0.0, tau),
            ],
            Family::Opo => vec![
                ParamSpec::log10("kappa1", self.rate_lo, self.rate_hi),
                ParamSpec::log10("kappa2", OPO_LEAK_FLOOR.min(self.rate_lo), self.rate_hi),
                ParamSpec::linear("delta", -1e3, 1e3),
                ParamSpec::linear("pump_ratio", 0.0, 0.9999),
                ParamSpec::periodic("pump_angle", 0.0, tau),
                ParamSpec::linear("r_in", -10.0, 10.0),
                ParamSpec::periodic("phi_in", 0.0, tau),
                ParamSpec::linear("r_out", -10.0, 10.0),
                ParamSpec::periodic("phi_out", 0.0, tau),
            ],
            Family::HomodyneDynamic => vec![
                ParamSpec::symlog("a11", -1e4, 1e4),
                ParamSpec::symlog("a12", -1e4, 1e4),
                ParamSpec::symlog("a21", -1e4, 1e4),
                ParamSpec::symlog("a22", -1e4, 1e4),
                ParamSpec::symlog("b1", -1e4, 1e4),
                ParamSpec::symlog("b2", -1e4, 1e4),
                ParamSpec::symlog("c1", -1e4, 1e4),
                ParamSpec::symlog("c2", -1e4, 1e4),
            ],
            Family::LqgOptimal => vec![],
        };
        if self.plant.has_coupling_parameter() {
            specs.push(ParamSpec::linear("coupling", 0.0, 1e2));
        }
        ParamSpace { specs }
    }

    fn split_coupling<'a>(&self, params: &'a [f64]) -> (&'a [f64], f64) {
        if self.plant.has_coupling_parameter() {
            let (head, tail) = params.split_at(params.len() - 1);
            (head, tail[0])
        } else {
            (params, 0.0)
        }
    }

    /// Assemble the closed loop at a parameter point.
    pub fn closed_loop(&self, params: &[f64]) -> Result<LinearModel> {
        let (ctrl_params, coupling) = self.split_coupling(params);
        let plant = self.build_plant(coupling)?;
        let (plant_out, plant_in) = self.wiring.plant_ports();

        if self.family == Family::LqgOptimal {
            let (controller, _) = self.lqg_cheap_control(&plant)?;
            let (cin, cout) = ("meas", "out");
            return close_loop(&plant, &controller, plant_out, cin, cout, plant_in);
        }

        let (controller, cin, cout): (LinearModel, &str, &str) = match self.family {
            Family::Trivial => (trivial_controller(ctrl_params[0]), "io", "io"),
            Family::HeterodyneAmplifier => {
                (heterodyne_amplifier(ctrl_params[0].max(0.0))?, "in", "out")
            }
            Family::TwoModeSqueezer => (two_mode_squeezer(ctrl_params[0])?, "in1", "out1"),
            Family::CoherentCavity => (
                coherent_cavity_controller(ctrl_params[0], ctrl_params[1], ctrl_params[2])?,
                "io",
                "io",
            ),
            Family::Opo => {
                let kappa1 = ctrl_params[0];
                let kappa2 = ctrl_params[1];
                let p = OpoParams {
                    kappa1,
                    kappa2,
                    delta: ctrl_params[2],
                    pump_amp: ctrl_params[3] * (kappa1 + kappa2) / 2.0,
                    pump_angle: ctrl_params[4],
                    r_in: ctrl_params[5],
                    phi_in: ctrl_params[6],
                    r_out: ctrl_params[7],
                    phi_out: ctrl_params[8],
                };
                let out = opo_feedback_output(self.wiring);
                let squeezer_port = if out == "out1" { 0 } else { 1 };
                (opo_controller(&p, squeezer_port)?, "in1", out)
            }
            Family::HomodyneDynamic => {
                let a_k = DMatrix::from_row_slice(
                    2,
                    2,
                    &[ctrl_params[0], ctrl_params[1], ctrl_params[2], ctrl_params[3]],
                );
                let b_k = DMatrix::from_row_slice(2, 1, &[ctrl_params[4], ctrl_params[5]]);
                let c_k = DMatrix::from_row_slice(1, 2, &[ctrl_params[6], ctrl_params[7]]);
                (homodyne_dynamic_controller(&a_k, &b_k, &c_k)?, "meas", "out")
            }
            Family::LqgOptimal => unreachable!("handled above"),
        };
        close_loop(&plant, &controller, plant_out, cin, cout, plant_in)
    }

    /// Riccati synthesis driven into the cheap-control limit: the control
    /// weight is decreased decade by decade until the closed-loop excitation
    /// changes by less than 0.1%.
    fn lqg_cheap_control(&self, plant: &LinearModel) -> Result<(LinearModel, f64)> {
        let meas = MeasurementSpec {
            output_channel: 0,
            kind: match self.wiring {
                WiringPreset::CavityLoop => MeasKind::Heterodyne,
                WiringPreset::OptomechLoop => MeasKind::HomodyneX,
            },
        };
        let (plant_out, plant_in) = self.wiring.plant_ports();
        let act_channel = plant.input_index(plant_in)?;
        let mut eps = 1e-2;
        let mut prev: Option<(f64, LinearModel, f64)> = None;
        for _ in 0..9 {
            let syn = lqg_optimal_classical(plant, meas, act_channel, 0, eps)?;
            let closed = close_loop(plant, &syn.controller, plant_out, "meas", "out", plant_in)?;
            let n = steady_covariance(&closed, &NoiseSpec::from_model(&closed))?.excitation(0)?;
            if let Some((n_prev, _, _)) = &prev {
                if (n - n_prev).abs() <= 1e-3 * n_prev.abs().max(1e-12) {
                    let ctrl = syn.controller;
                    return Ok((ctrl, eps));
                }
            }
            prev = Some((n, syn.controller.clone(), eps));
            eps /= 10.0;
        }
        let (_, ctrl, eps) = prev.expect("at least one synthesis ran");
        Ok((ctrl, eps))
    }

    /// Steady-state excitation of the plant mode, or a stability penalty.
    ///
    /// Unstable loops return `PENALTY_BASE + weight * max Re eigenvalue`, a
    /// landscape that decreases toward stability; unbuildable points return
    /// `PENALTY_INVALID`.
    pub fn objective(&self, params: &[f64]) -> f64 {
        let closed = match self.closed_loop(params) {
            Ok(c) => c,
            Err(_) => return PENALTY_INVALID,
        };
        let max_re = max_real_eigenvalue(closed.a());
        if !(max_re < -STABILITY_MARGIN) {
            return PENALTY_BASE + self.penalty_weight * max_re;
        }
        match steady_covariance(&closed, &NoiseSpec::from_model(&closed)) {
            Ok(cov) => cov.excitation(0).unwrap_or(PENALTY_INVALID),
            Err(_) => PENALTY_INVALID,
        }
    }

    /// Excitation of the bare plant with no controller attached (and zero
    /// coupling on the optomechanical plant).
    pub fn n_nocontrol(&self) -> Result<f64> {
        let plant = self.build_plant(0.0)?;
        steady_covariance(&plant, &NoiseSpec::from_model(&plant))?.excitation(0)
    }

    /// Do-nothing member of the family: guarantees the optimized loop never
    /// loses to leaving the plant alone.
    pub fn neutral_start(&self) -> Vec<f64> {
        let mut p = match self.family {
            Family::Trivial => vec![0.0],
            Family::HeterodyneAmplifier => vec![0.0],
            Family::TwoModeSqueezer => vec![0.0],
            Family::CoherentCavity => match self.wiring {
                WiringPreset::CavityLoop => {
                    vec![self.rate_hi, 0.0, std::f64::consts::PI]
                }
                WiringPreset::OptomechLoop => vec![1.0, 0.0, 0.0],
            },
            Family::Opo => vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            Family::HomodyneDynamic => vec![-1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0],
            Family::LqgOptimal => vec![],
        };
        if self.plant.has_coupling_parameter() {
            p.push(0.0);
        }
        p
    }

    /// Domain-informed extra starts (resonant controllers, squeezer
    /// equivalents) appended after the neutral and warm starts.
    pub fn physics_starts(&self) -> Vec<Vec<f64>> {
        let omega = self.plant.mode_frequency();
        let with_couplings = |ctrl: Vec<f64>, couplings: &[f64]| -> Vec<Vec<f64>> {
            if self.plant.has_coupling_parameter() {
                couplings
                    .iter()
                    .map(|&k| {
                        let mut v = ctrl.clone();
                        v.push(k);
                        v
                    })
                    .collect()
            } else {
                vec![ctrl]
            }
        };
        match self.family {
            Family::CoherentCavity => {
                let kappa = (omega / 2.0).clamp(self.rate_lo * 10.0, self.rate_hi);
                let mut starts = with_couplings(vec![kappa, omega, 0.0], &[0.5, 5.0]);
                starts.extend(with_couplings(vec![kappa * 4.0, omega, 0.0], &[2.0]));
                starts
            }
            Family::Opo => match self.wiring {
                WiringPreset::CavityLoop => [0.5, 1.0, 2.0]
                    .iter()
                    .map(|&eta| embed_two_mode_squeezer(eta, self.rate_hi))
                    .collect(),
                WiringPreset::OptomechLoop => {
                    let kappa = (omega / 2.0).clamp(self.rate_lo * 10.0, self.rate_hi);
                    let mut starts =
                        with_couplings(embed_coherent_cavity(kappa, omega, 0.0), &[0.5, 5.0]);
                    starts.extend(with_couplings(
                        embed_coherent_cavity(kappa * 4.0, omega, 0.0),
                        &[2.0],
                    ));
                    starts
                }
            },
            Family::LqgOptimal | Family::HomodyneDynamic => {
                if self.plant.has_coupling_parameter() {
                    let base = self.neutral_start();
                    let ctrl = base[..base.len() - 1].to_vec();
                    with_couplings(ctrl, &[0.3, 1.0, 3.0, 10.0])
                } else {
                    vec![]
                }
            }
            _ => vec![],
        }
    }
}

/// OPO parameter vector equivalent to a two-mode squeezer of strength `eta`
/// in the broadband limit at total rate `kappa` (transmission wiring):
/// matched ports, pump ratio tanh(eta), output squeezed by e^{-eta} and
/// phase-flipped.
pub fn embed_two_mode_squeezer(eta: f64, kappa: f64) -> Vec<f64> {
    vec![
        kappa / 2.0,
        kappa / 2.0,
        0.0,
        eta.tanh(),
        0.0,
        0.0,
        0.0,
        -eta,
        std::f64::consts::PI,
    ]
}

/// OPO parameter vector reproducing the plain coherent-cavity controller
/// (reflection wiring): pump off, vanishing leak through the second port,
/// input phase carried by the input element.
pub fn embed_coherent_cavity(kappa: f64, delta: f64, phase: f64) -> Vec<f64> {
    vec![
        kappa,
        OPO_LEAK_FLOOR,
        delta,
        0.0,
        0.0,
        0.0,
        phase,
        0.0,
        0.0,
    ]
}

/// One optimized sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k_n: f64,
    pub family: Family,
    pub n_opt: f64,
    pub n_nocontrol: f64,
    pub ratio: f64,
    /// Best parameters in optimizer units, named.
    pub params: Vec<(String, f64)>,
    pub converged: bool,
    /// Measured wall time; reported on stderr and zeroed in emitted files to
    /// keep artifacts reproducible.
    pub wall_ms: u64,
}

/// Result of sweeping one family over the noise grid.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub family: Family,
    pub rows: Vec<SweepRow>,
}

/// Spec-level entry point: optimize one family at one sweep point.
pub fn multi_start_optimize(
    scenario: &Scenario,
    k_n: f64,
    extra_starts: &[Vec<f64>],
) -> Result<OptimizationResult> {
    scenario.validate()?;
    let point = scenario.point(k_n);
    optimize_point(&point, &scenario.optimizer, extra_starts)
}

fn optimize_point(
    point: &ScenarioPoint,
    opts: &OptimizeOptions,
    extra_starts: &[Vec<f64>],
) -> Result<OptimizationResult> {
    let space = point.param_space();
    let mut starts: Vec<Vec<f64>> = vec![point.neutral_start()];
    starts.extend(extra_starts.iter().cloned());
    starts.extend(point.physics_starts());
    starts.retain(|s| s.len() == space.dim());
    let objective = |params: &[f64]| point.objective(params);
    let result = multi_start(&space, objective, opts, &starts)?;
    if result.best_value >= PENALTY_BASE {
        return Err(QlinError::OptimizationFailure(format!(
            "no stable controller found for {} at k_n = {}",
            point.family, point.k_n
        )));
    }
    Ok(result)
}

/// Sweep one family over the scenario's noise grid, warm-starting each point
/// from the previous optimum plus fresh seeded starts.
pub fn run_scenario(scenario: &Scenario) -> Result<SweepResult> {
    run_scenario_with_embeds(scenario, &|_| vec![])
}

/// Like [`run_scenario`], with caller-provided extra starts per sweep point
/// (used by family comparisons to seed nesting families with the optima of
/// the families they contain).
pub fn run_scenario_with_embeds(
    scenario: &Scenario,
    embeds: &dyn Fn(f64) -> Vec<Vec<f64>>,
) -> Result<SweepResult> {
    scenario.validate()?;
    let mut rows = Vec::with_capacity(scenario.kn_sweep.len());
    let mut warm: Option<Vec<f64>> = None;
    for &k_n in &scenario.kn_sweep {
        let begin = Instant::now();
        let point = scenario.point(k_n);
        let mut extra: Vec<Vec<f64>> = Vec::new();
        if let Some(w) = &warm {
            extra.push(w.clone());
        }
        extra.extend(embeds(k_n));
        let result = optimize_point(&point, &scenario.optimizer, &extra).map_err(|e| {
            QlinError::OptimizationFailure(format!("at k_n = {k_n}: {e}"))
        })?;
        let n_nocontrol = point.n_nocontrol()?;
        let space = point.param_space();
        let params = space
            .specs
            .iter()
            .map(|s| s.name.clone())
            .zip(result.best_params.iter().cloned())
            .collect();
        warm = Some(result.best_params.clone());
        rows.push(SweepRow {
            k_n,
            family: scenario.family,
            n_opt: result.best_value,
            n_nocontrol,
            ratio: result.best_value / n_nocontrol,
            params,
            converged: result.traces[result.best_start].converged,
            wall_ms: begin.elapsed().as_millis() as u64,
        });
    }
    Ok(SweepResult {
        family: scenario.family,
        rows,
    })
}

/// Side-by-side family comparison on a shared noise grid.
#[derive(Debug, Clone)]
pub struct CompareResult {
    pub kn_grid: Vec<f64>,
    pub sweeps: Vec<SweepResult>,
    /// Best classical ratio minus best coherent ratio per grid point
    /// (positive means coherent feedback wins); NaN when either side is
    /// absent from the comparison.
    pub advantage: Vec<f64>,
}

impl CompareResult {
    pub fn ratio(&self, family: Family, idx: usize) -> Option<f64> {
        self.sweeps
            .iter()
            .find(|s| s.family == family)
            .map(|s| s.rows[idx].ratio)
    }
}

/// Run each family over the shared grid.
///
/// Families run in the listed order, except that the OPO always runs after
/// the families it structurally contains so their per-point optima can seed
/// it.
pub fn compare_families(base: &Scenario, families: &[Family]) -> Result<CompareResult> {
    if families.len() < 2 {
        return Err(QlinError::InvalidParameter(
            "compare needs at least two controller families".into(),
        ));
    }
    let mut order: Vec<Family> = families.to_vec();
    order.sort_by_key(|f| matches!(f, Family::Opo));

    let mut sweeps: Vec<SweepResult> = Vec::with_capacity(order.len());
    for &family in &order {
        let scenario = Scenario {
            family,
            ..base.clone()
        };
        let sweep = if family == Family::Opo {
            let tms_best: Vec<Option<f64>> = sweeps
                .iter()
                .find(|s| s.family == Family::TwoModeSqueezer)
                .map(|s| {
                    s.rows
                        .iter()
                        .map(|r| r.params.first().map(|(_, v)| *v))
                        .collect()
                })
                .unwrap_or_default();
            let cavity_best: Vec<Option<Vec<f64>>> = sweeps
                .iter()
                .find(|s| s.family == Family::CoherentCavity)
                .map(|s| {
                    s.rows
                        .iter()
                        .map(|r| Some(r.params.iter().map(|(_, v)| *v).collect()))
                        .collect()
                })
                .unwrap_or_default();
            let grid = base.kn_sweep.clone();
            let rate_hi = base.optimizer.rate_hi;
            let wiring = base.wiring;
            let embeds = move |k_n: f64| -> Vec<Vec<f64>> {
                let idx = grid.iter().position(|&g| g == k_n);
                let mut out = Vec::new();
                if let Some(i) = idx {
                    match wiring {
                        WiringPreset::CavityLoop => {
                            if let Some(Some(eta)) = tms_best.get(i) {
                                out.push(embed_two_mode_squeezer(*eta, rate_hi));
                            }
                        }
                        WiringPreset::OptomechLoop => {
                            if let Some(Some(cav)) = cavity_best.get(i) {
                                // cav = [kappa, delta, phase, coupling]
                                if cav.len() == 4 {
                                    let mut v =
                                        embed_coherent_cavity(cav[0], cav[1], cav[2]);
                                    v.push(cav[3]);
                                    out.push(v);
                                }
                            }
                        }
                    }
                }
                out
            };
            run_scenario_with_embeds(&scenario, &embeds)?
        } else {
            run_scenario(&scenario)?
        };
        sweeps.push(sweep);
    }

    let advantage = (0..base.kn_sweep.len())
        .map(|i| {
            let best = |classical: bool| {
                sweeps
                    .iter()
                    .filter(|s| s.family.is_classical() == classical)
                    .map(|s| s.rows[i].ratio)
                    .fold(f64::INFINITY, f64::min)
            };
            let (cl, co) = (best(true), best(false));
            if cl.is_finite() && co.is_finite() {
                cl - co
            } else {
                f64::NAN
            }
        })
        .collect();

    Ok(CompareResult {
        kn_grid: base.kn_sweep.clone(),
        sweeps,
        advantage,
    })
}

/// Logarithmic grid over [lo, hi], the sweep default.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            10f64.powf(lo.log10() + t * (hi.log10() - lo.log10()))
        })
        .collect()
}
