//! Quadrature state-space models of linear open quantum systems.
//!
//! A model is the Ito system
//!
//! ```text
//!   dx(t) = [A x(t) + a] dt + B dw(t)
//!   dw~(t) = [C x(t) + c] dt + D dw(t)
//! ```
//!
//! over Hermitian quadratures x = a + a†, p = -i(a - a†), so [x, p] = 2i and a
//! vacuum input channel has unit covariance density per quadrature. Each mode
//! and each channel occupies one adjacent (x, p) index pair.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{QlinError, Result};

/// Statistics of a single bosonic input channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChannelKind {
    /// Vacuum field: quadrature covariance density I.
    Vacuum,
    /// Thermal field with mean occupancy `k_n`: covariance density (2 k_n + 1) I.
    Thermal { occupancy: f64 },
    /// Classical wire carrying a noiseless signal; only valid on classical
    /// controller models.
    ClassicalSignal,
}

impl ChannelKind {
    /// 2x2 quadrature covariance block for this channel kind.
    pub fn covariance_block(&self) -> DMatrix<f64> {
        match self {
            ChannelKind::Vacuum => DMatrix::identity(2, 2),
            ChannelKind::Thermal { occupancy } => {
                DMatrix::identity(2, 2) * (2.0 * occupancy + 1.0)
            }
            ChannelKind::ClassicalSignal => DMatrix::zeros(2, 2),
        }
    }

    pub fn is_quantum(&self) -> bool {
        !matches!(self, ChannelKind::ClassicalSignal)
    }
}

/// A named input or output channel (one quadrature pair).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelLabel {
    pub name: String,
    pub kind: ChannelKind,
}

impl ChannelLabel {
    pub fn vacuum(name: &str) -> Self {
        ChannelLabel {
            name: name.to_string(),
            kind: ChannelKind::Vacuum,
        }
    }

    pub fn thermal(name: &str, occupancy: f64) -> Self {
        ChannelLabel {
            name: name.to_string(),
            kind: ChannelKind::Thermal { occupancy },
        }
    }
}

/// Whether a mode is a quantum oscillator or a classical controller state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeKind {
    Quantum,
    Classical,
}

/// One internal mode: the (x, p) pair starting at state index `x_index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub name: String,
    pub x_index: usize,
    pub kind: ModeKind,
}

/// Quadrature state-space model of a linear open (possibly hybrid
/// quantum/classical) system.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    state_offset: DVector<f64>,
    output_offset: DVector<f64>,
    inputs: Vec<ChannelLabel>,
    outputs: Vec<ChannelLabel>,
    modes: Vec<Mode>,
}

impl LinearModel {
    /// Build a model with zero offsets, checking all dimension bookkeeping.
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        inputs: Vec<ChannelLabel>,
        outputs: Vec<ChannelLabel>,
        modes: Vec<Mode>,
    ) -> Result<Self> {
        let n = a.nrows();
        let state_offset = DVector::zeros(n);
        let output_offset = DVector::zeros(c.nrows());
        Self::with_offsets(a, b, c, d, state_offset, output_offset, inputs, outputs, modes)
    }

    /// Build a model including the affine offsets of the state and output
    /// equations (zero in every scenario treated here, but part of the form).
    #[allow(clippy::too_many_arguments)]
    pub fn with_offsets(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        state_offset: DVector<f64>,
        output_offset: DVector<f64>,
        inputs: Vec<ChannelLabel>,
        outputs: Vec<ChannelLabel>,
        modes: Vec<Mode>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(QlinError::DimensionMismatch(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n || c.ncols() != n {
            return Err(QlinError::DimensionMismatch(
                "B rows and C columns must match the state dimension".into(),
            ));
        }
        if b.ncols() != 2 * inputs.len() {
            return Err(QlinError::DimensionMismatch(format!(
                "B has {} columns but {} input channels require {}",
                b.ncols(),
                inputs.len(),
                2 * inputs.len()
            )));
        }
        if c.nrows() != 2 * outputs.len() {
            return Err(QlinError::DimensionMismatch(format!(
                "C has {} rows but {} output channels require {}",
                c.nrows(),
                outputs.len(),
                2 * outputs.len()
            )));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(QlinError::DimensionMismatch(
                "D must be (2 x outputs) x (2 x inputs)".into(),
            ));
        }
        if state_offset.len() != n || output_offset.len() != c.nrows() {
            return Err(QlinError::DimensionMismatch(
                "offset vectors must match state/output dimensions".into(),
            ));
        }
        let mut covered = vec![false; n];
        for m in &modes {
            if m.x_index + 1 >= n {
                return Err(QlinError::DimensionMismatch(format!(
                    "mode {} at x index {} exceeds state dimension {}",
                    m.name, m.x_index, n
                )));
            }
            if covered[m.x_index] || covered[m.x_index + 1] {
                return Err(QlinError::DimensionMismatch(format!(
                    "mode {} overlaps another mode's quadrature pair",
                    m.name
                )));
            }
            covered[m.x_index] = true;
            covered[m.x_index + 1] = true;
        }
        if covered.iter().any(|&c| !c) {
            return Err(QlinError::DimensionMismatch(
                "every state index must belong to an (x, p) mode pair".into(),
            ));
        }
        for ch in &inputs {
            if matches!(ch.kind, ChannelKind::Thermal { occupancy } if occupancy < 0.0) {
                return Err(QlinError::InvalidParameter(format!(
                    "thermal occupancy of {} must be >= 0",
                    ch.name
                )));
            }
        }
        let classical_modes = modes.iter().any(|m| m.kind == ModeKind::Classical);
        if !classical_modes {
            let has_classical_channel = inputs
                .iter()
                .chain(outputs.iter())
                .any(|c| !c.kind.is_quantum());
            if has_classical_channel {
                return Err(QlinError::InvalidParameter(
                    "classical-signal channels may only attach to classical controller models"
                        .into(),
                ));
            }
        }
        Ok(LinearModel {
            a,
            b,
            c,
            d,
            state_offset,
            output_offset,
            inputs,
            outputs,
            modes,
        })
    }

    /// The empty system: no states, no channels. Identity of concatenation.
    pub fn empty() -> Self {
        LinearModel {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, 0),
            c: DMatrix::zeros(0, 0),
            d: DMatrix::zeros(0, 0),
            state_offset: DVector::zeros(0),
            output_offset: DVector::zeros(0),
            inputs: vec![],
            outputs: vec![],
            modes: vec![],
        }
    }

    /// A static model (no internal state) defined by its scattering matrix D.
    pub fn static_model(
        d: DMatrix<f64>,
        inputs: Vec<ChannelLabel>,
        outputs: Vec<ChannelLabel>,
    ) -> Result<Self> {
        let n_in = 2 * inputs.len();
        let n_out = 2 * outputs.len();
        LinearModel::new(
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, n_in),
            DMatrix::zeros(n_out, 0),
            d,
            inputs,
            outputs,
            vec![],
        )
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
    pub fn state_offset(&self) -> &DVector<f64> {
        &self.state_offset
    }
    pub fn output_offset(&self) -> &DVector<f64> {
        &self.output_offset
    }
    pub fn inputs(&self) -> &[ChannelLabel] {
        &self.inputs
    }
    pub fn outputs(&self) -> &[ChannelLabel] {
        &self.outputs
    }
    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }
    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }
    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn input_index(&self, name: &str) -> Result<usize> {
        self.inputs
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| QlinError::UnknownChannel(name.to_string()))
    }

    pub fn output_index(&self, name: &str) -> Result<usize> {
        self.outputs
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| QlinError::UnknownChannel(name.to_string()))
    }

    pub fn has_classical_modes(&self) -> bool {
        self.modes.iter().any(|m| m.kind == ModeKind::Classical)
    }

    /// Prefix every channel and mode name, e.g. to avoid collisions before
    /// concatenation.
    pub fn with_name_prefix(&self, prefix: &str) -> Self {
        let mut m = self.clone();
        for c in m.inputs.iter_mut().chain(m.outputs.iter_mut()) {
            c.name = format!("{prefix}{}", c.name);
        }
        for md in m.modes.iter_mut() {
            md.name = format!("{prefix}{}", md.name);
        }
        m
    }
}

/// Input noise covariance density F for the Lyapunov equation
/// `A sigma + sigma A' + B F B' = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    f: DMatrix<f64>,
}

impl NoiseSpec {
    /// Build F from an explicit symmetric PSD matrix.
    pub fn new(f: DMatrix<f64>) -> Result<Self> {
        if f.nrows() != f.ncols() {
            return Err(QlinError::DimensionMismatch("F must be square".into()));
        }
        let sym_err = (&f - f.transpose()).abs().max();
        if f.nrows() > 0 && sym_err > 1e-12 * f.abs().max().max(1.0) {
            return Err(QlinError::InvalidParameter(
                "F must be symmetric".into(),
            ));
        }
        // PSD check via symmetric eigenvalues; cheap at these sizes.
        if f.nrows() > 0 {
            let min_eig = f
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            if min_eig < -1e-10 * f.abs().max().max(1.0) {
                return Err(QlinError::InvalidParameter(format!(
                    "F must be positive semidefinite (min eigenvalue {min_eig:.3e})"
                )));
            }
        }
        Ok(NoiseSpec { f })
    }

    /// Standard F implied by a model's input channel kinds: I per vacuum
    /// channel, (2 k_n + 1) I per thermal channel, 0 for classical wires.
    pub fn from_model(model: &LinearModel) -> Self {
        let m = model.n_inputs();
        let mut f = DMatrix::zeros(2 * m, 2 * m);
        for (i, ch) in model.inputs().iter().enumerate() {
            f.view_mut((2 * i, 2 * i), (2, 2))
                .copy_from(&ch.kind.covariance_block());
        }
        NoiseSpec { f }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.f
    }
}

/// Parameters of the three-mirror noisy optical cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    /// Mirror decay rates (1/time).
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    /// Thermal occupancy of the mirror-3 input.
    pub k_n: f64,
    /// Detuning of the cavity resonance from the rotating frame (rad/time).
    pub delta: f64,
}

impl CavityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k2 > 0.0 && self.k3 > 0.0) {
            return Err(QlinError::InvalidParameter(
                "cavity decay rates k1, k2, k3 must be positive".into(),
            ));
        }
        if self.k_n < 0.0 {
            return Err(QlinError::InvalidParameter(
                "thermal occupancy k_n must be >= 0".into(),
            ));
        }
        if !self.k1.is_finite() || !self.k2.is_finite() || !self.k3.is_finite() {
            return Err(QlinError::InvalidParameter(
                "cavity decay rates must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn total_decay(&self) -> f64 {
        self.k1 + self.k2 + self.k3
    }
}

/// Parameters of the adiabatically eliminated optomechanical oscillator.
///
/// The readout coupling is `K1` and the feedback coupling `K2`; the symmetric
/// design choice K2 = -K1 is the default (`symmetric`), matching two cavity
/// modes driven with comparable power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptomechParams {
    /// Mechanical frequency (rad/time).
    pub omega: f64,
    /// Mechanical quality factor.
    pub q: f64,
    /// Readout coupling (1/sqrt(time) per quadrature unit).
    pub coupling1: f64,
    /// Feedback coupling.
    pub coupling2: f64,
    /// Thermal occupancy of the mechanical bath.
    pub k_n: f64,
}

impl OptomechParams {
    pub fn symmetric(omega: f64, q: f64, coupling: f64, k_n: f64) -> Self {
        OptomechParams {
            omega,
            q,
            coupling1: coupling,
            coupling2: -coupling,
            k_n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(QlinError::InvalidParameter(
                "mechanical frequency must be positive".into(),
            ));
        }
        if !(self.q > 0.0) || !self.q.is_finite() {
            return Err(QlinError::InvalidParameter(
                "mechanical quality factor must be positive".into(),
            ));
        }
        if self.k_n < 0.0 {
            return Err(QlinError::InvalidParameter(
                "thermal occupancy k_n must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Mechanical damping rate gamma = Omega / Q.
    pub fn gamma(&self) -> f64 {
        self.omega / self.q
    }
}

/// Helper: write a 2x2 block into a matrix at channel position (i, j).
pub(crate) fn set_block(m: &mut DMatrix<f64>, row: usize, col: usize, block: &DMatrix<f64>) {
    m.view_mut((row, col), (block.nrows(), block.ncols()))
        .copy_from(block);
}

/// 2x2 rotation by theta acting on an (x, p) pair.
pub fn rotation2(theta: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
}

/// Three-mirror cavity with detuning; mirror 3 carries the thermal noise.
///
/// dx = (-k/2 x + Delta p) dt - sum_i sqrt(k_i) dw_i,x   (and likewise for p),
/// with k = k1 + k2 + k3, outputs w~_i = w_i + sqrt(k_i) (x, p) dt.
pub fn cavity_plant(p: &CavityParams) -> Result<LinearModel> {
    p.validate()?;
    let k = p.total_decay();
    let a = DMatrix::from_row_slice(2, 2, &[-k / 2.0, p.delta, -p.delta, -k / 2.0]);
    let rates = [p.k1, p.k2, p.k3];
    let mut b = DMatrix::zeros(2, 6);
    let mut c = DMatrix::zeros(6, 2);
    for (i, ki) in rates.iter().enumerate() {
        let s = ki.sqrt();
        set_block(&mut b, 0, 2 * i, &(DMatrix::identity(2, 2) * -s));
        set_block(&mut c, 2 * i, 0, &(DMatrix::identity(2, 2) * s));
    }
    let d = DMatrix::identity(6, 6);
    let inputs = vec![
        ChannelLabel::vacuum("m1"),
        ChannelLabel::vacuum("m2"),
        ChannelLabel::thermal("m3", p.k_n),
    ];
    let outputs = vec![
        ChannelLabel::vacuum("m1"),
        ChannelLabel::vacuum("m2"),
        ChannelLabel::thermal("m3", p.k_n),
    ];
    let modes = vec![Mode {
        name: "cavity".into(),
        x_index: 0,
        kind: ModeKind::Quantum,
    }];
    LinearModel::new(a, b, c, d, inputs, outputs, modes)
}

/// Optomechanical oscillator with two optical coupling ports and a thermal
/// mechanical bath.
///
/// The optical couplings are Hermitian (L_i = K_i x_m): the p quadrature of
/// each optical input pushes the momentum, and x_m is imprinted on each
/// optical output's x quadrature. The bath port is an ordinary damping channel
/// with gamma = Omega/Q and explicit thermal noise, which is the
/// self-consistent completion of the schematic input-output relations.
pub fn optomech_plant(p: &OptomechParams) -> Result<LinearModel> {
    p.validate()?;
    let gamma = p.gamma();
    let sg = gamma.sqrt();
    let a = DMatrix::from_row_slice(
        2,
        2,
        &[-gamma / 2.0, p.omega, -p.omega, -gamma / 2.0],
    );
    let mut b = DMatrix::zeros(2, 6);
    let mut c = DMatrix::zeros(6, 2);
    // probe port (K1) and feedback port (K2)
    for (i, ki) in [p.coupling1, p.coupling2].iter().enumerate() {
        set_block(
            &mut b,
            0,
            2 * i,
            &DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -2.0 * ki]),
        );
        set_block(
            &mut c,
            2 * i,
            0,
            &DMatrix::from_row_slice(2, 2, &[2.0 * ki, 0.0, 0.0, 0.0]),
        );
    }
    // mechanical bath port
    set_block(&mut b, 0, 4, &(DMatrix::identity(2, 2) * -sg));
    set_block(&mut c, 4, 0, &(DMatrix::identity(2, 2) * sg));
    let d = DMatrix::identity(6, 6);
    let inputs = vec![
        ChannelLabel::vacuum("probe"),
        ChannelLabel::vacuum("fb"),
        ChannelLabel::thermal("bath", p.k_n),
    ];
    let outputs = vec![
        ChannelLabel::vacuum("probe"),
        ChannelLabel::vacuum("fb"),
        ChannelLabel::thermal("bath", p.k_n),
    ];
    let modes = vec![Mode {
        name: "mirror".into(),
        x_index: 0,
        kind: ModeKind::Quantum,
    }];
    LinearModel::new(a, b, c, d, inputs, outputs, modes)
}

/// Block-diagonal commutation matrix: [[0, 2], [-2, 0]] per mode, from the
/// convention [x, p] = 2i.
pub fn commutation_matrix(modes: usize) -> DMatrix<f64> {
    let mut theta = DMatrix::zeros(2 * modes, 2 * modes);
    for i in 0..modes {
        theta[(2 * i, 2 * i + 1)] = 2.0;
        theta[(2 * i + 1, 2 * i)] = -2.0;
    }
    theta
}

/// Max-norm residual of the physical-realizability conditions
///
/// ```text
///   A Theta + Theta A' + B Theta_w B' = 0
///   D Theta_w D' = Theta_w'
///   B Theta_w D' + Theta C' = 0
/// ```
///
/// Zero (to rounding) iff the model preserves canonical commutators, i.e.
/// corresponds to an actual open quantum system.
pub fn realizability_residual(model: &LinearModel) -> Result<f64> {
    if model.has_classical_modes() {
        return Err(QlinError::NotApplicable(
            "realizability is undefined for models with classical modes".into(),
        ));
    }
    if model
        .inputs()
        .iter()
        .chain(model.outputs().iter())
        .any(|c| !c.kind.is_quantum())
    {
        return Err(QlinError::NotApplicable(
            "realizability is undefined for models with classical-signal channels".into(),
        ));
    }
    let theta = commutation_matrix(model.n_states() / 2);
    let theta_w = commutation_matrix(model.n_inputs());
    let theta_w_out = commutation_matrix(model.n_outputs());

    let max_abs = |m: &DMatrix<f64>| -> f64 {
        if m.is_empty() {
            0.0
        } else {
            m.abs().max()
        }
    };

    let drift = model.a() * &theta + &theta * model.a().transpose()
        + model.b() * &theta_w * model.b().transpose();
    let scatter = model.d() * &theta_w * model.d().transpose() - theta_w_out;
    let coupling = model.b() * &theta_w * model.d().transpose() + &theta * model.c().transpose();

    Ok(max_abs(&drift).max(max_abs(&scatter)).max(max_abs(&coupling)))
}
