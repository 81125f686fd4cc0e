//! Builders for the controller families: a static feedthrough phase shifter,
//! the heterodyne measure-amplify-displace controller, a one-classical-mode
//! homodyne controller, the Riccati-optimal measurement-based controller, a
//! coherent cavity, a two-mode squeezer, and the OPO with squeezed I/O.
//!
//! Classical controllers are built inside the same quadrature ABCD framework
//! with explicit auxiliary vacuum channels: one fresh vacuum per measurement
//! (beamsplitter or homodyne detector) and one per displacement actuation
//! (the modulated carrier). This makes the classical/coherent comparison a
//! like-for-like Lyapunov computation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{QlinError, Result};
use crate::model::{rotation2, set_block, ChannelLabel, LinearModel, Mode, ModeKind, NoiseSpec};
use crate::steady::solve_care;

/// Single-mode squeezer matrix: squeeze by e^r along the axis at angle phi.
pub fn squeezer2(r: f64, phi: f64) -> DMatrix<f64> {
    let d = DMatrix::from_row_slice(2, 2, &[r.exp(), 0.0, 0.0, (-r).exp()]);
    rotation2(phi) * d * rotation2(-phi)
}

/// Static feedthrough controller: a phase shifter on one channel.
pub fn trivial_controller(theta: f64) -> LinearModel {
    LinearModel::static_model(
        rotation2(theta),
        vec![ChannelLabel::vacuum("io")],
        vec![ChannelLabel::vacuum("io")],
    )
    .expect("static rotation is always well formed")
}

/// Heterodyne amplifier: split the signal on a beamsplitter (adding the
/// measurement vacuum with conjugate signs), amplify by `gain`, and add the
/// result to a fresh carrier:
///
/// ```text
///   w~_x = gain (w_x + v_x) + u_x
///   w~_p = gain (w_p - v_p) + u_p
/// ```
pub fn heterodyne_amplifier(gain: f64) -> Result<LinearModel> {
    if gain < 0.0 || !gain.is_finite() {
        return Err(QlinError::InvalidParameter(
            "heterodyne gain must be a nonnegative finite number".into(),
        ));
    }
    let mut d = DMatrix::zeros(2, 6);
    set_block(&mut d, 0, 0, &(DMatrix::identity(2, 2) * gain));
    set_block(
        &mut d,
        0,
        2,
        &DMatrix::from_row_slice(2, 2, &[gain, 0.0, 0.0, -gain]),
    );
    set_block(&mut d, 0, 4, &DMatrix::identity(2, 2));
    LinearModel::static_model(
        d,
        vec![
            ChannelLabel::vacuum("in"),
            ChannelLabel::vacuum("bs"),
            ChannelLabel::vacuum("carrier"),
        ],
        vec![ChannelLabel::vacuum("out")],
    )
}

/// Shared assembly for measurement-based controllers with classical state.
///
/// `gain_l` maps the measured signal(s) into the controller state, `gain_k`
/// maps the state into the displacement of the carrier. `heterodyne` selects
/// whether both quadratures are measured (beamsplitter vacuum, conjugate
/// signs) or only x (homodyne detector vacuum).
fn classical_controller_model(
    a_k: DMatrix<f64>,
    gain_l: DMatrix<f64>,
    gain_k: DMatrix<f64>,
    heterodyne: bool,
) -> Result<LinearModel> {
    let n = a_k.nrows();
    let mut b = DMatrix::zeros(n, 6);
    if heterodyne {
        // y = (meas_x + bs_x, meas_p - bs_p)
        set_block(&mut b, 0, 0, &gain_l);
        let mut conj = gain_l.clone();
        conj.column_mut(1).neg_mut();
        set_block(&mut b, 0, 2, &conj);
    } else {
        // y = meas_x + hom_x
        let l0 = gain_l.column(0).into_owned();
        b.view_mut((0, 0), (n, 1)).copy_from(&l0);
        b.view_mut((0, 2), (n, 1)).copy_from(&l0);
    }
    let mut c = DMatrix::zeros(2, n);
    c.view_mut((0, 0), (2, n)).copy_from(&gain_k);
    let mut d = DMatrix::zeros(2, 6);
    set_block(&mut d, 0, 4, &DMatrix::identity(2, 2));

    let meas_vac = if heterodyne { "bs" } else { "hom" };
    let modes = (0..n / 2)
        .map(|i| Mode {
            name: format!("k{i}"),
            x_index: 2 * i,
            kind: ModeKind::Classical,
        })
        .collect();
    LinearModel::new(
        a_k,
        b,
        c,
        d,
        vec![
            ChannelLabel::vacuum("meas"),
            ChannelLabel::vacuum(meas_vac),
            ChannelLabel::vacuum("carrier"),
        ],
        vec![ChannelLabel::vacuum("out")],
        modes,
    )
}

/// One-classical-mode homodyne controller: measures the x quadrature of the
/// incoming channel (plus the detector vacuum), integrates
/// `dx_k = A_k x_k dt + B_k dy`, and displaces a fresh carrier's p quadrature
/// by `C_k x_k dt`.
pub fn homodyne_dynamic_controller(
    a_k: &DMatrix<f64>,
    b_k: &DMatrix<f64>,
    c_k: &DMatrix<f64>,
) -> Result<LinearModel> {
    if a_k.nrows() != 2 || a_k.ncols() != 2 || b_k.nrows() != 2 || b_k.ncols() != 1
        || c_k.nrows() != 1 || c_k.ncols() != 2
    {
        return Err(QlinError::DimensionMismatch(
            "homodyne controller takes A_k 2x2, B_k 2x1, C_k 1x2 (one classical mode)".into(),
        ));
    }
    let mut gain_l = DMatrix::zeros(2, 2);
    gain_l.column_mut(0).copy_from(&b_k.column(0));
    // actuation displaces p only
    let mut gain_k = DMatrix::zeros(2, 2);
    gain_k.view_mut((1, 0), (1, 2)).copy_from(c_k);
    classical_controller_model(a_k.clone(), gain_l, gain_k, false)
}

/// Which quadrature(s) of a plant output a classical controller measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasKind {
    /// Homodyne on x: one detector vacuum, no conjugate penalty.
    HomodyneX,
    /// Heterodyne on both quadratures: beamsplitter vacuum with conjugate signs.
    Heterodyne,
}

/// Measurement configuration for LQG synthesis.
#[derive(Debug, Clone, Copy)]
pub struct MeasurementSpec {
    pub output_channel: usize,
    pub kind: MeasKind,
}

/// Synthesized LQG controller plus its gains, for diagnostics and tests.
#[derive(Debug, Clone)]
pub struct LqgSynthesis {
    pub controller: LinearModel,
    pub a_k: DMatrix<f64>,
    pub filter_gain: DMatrix<f64>,
    pub control_gain: DMatrix<f64>,
    pub filter_covariance: DMatrix<f64>,
    pub control_riccati: DMatrix<f64>,
}

/// Kalman-Bucy + LQR synthesis of the optimal measurement-based controller
/// for `plant`, measuring `meas` and displacing the quadratures of input
/// channel `act_channel`, with control weight `eps` on the drive power.
///
/// The measurement noise is fixed by physics: the plant output's own vacuum
/// content plus the one fresh detector/beamsplitter vacuum. Process and
/// measurement noise correlations (the measured field also drives the plant)
/// are handled with the generalized filter Riccati equation.
pub fn lqg_optimal_classical(
    plant: &LinearModel,
    meas: MeasurementSpec,
    act_channel: usize,
    target_mode: usize,
    eps: f64,
) -> Result<LqgSynthesis> {
    if eps <= 0.0 || !eps.is_finite() {
        return Err(QlinError::InvalidParameter(
            "control weight eps must be positive".into(),
        ));
    }
    let n = plant.n_states();
    if meas.output_channel >= plant.n_outputs() {
        return Err(QlinError::InvalidParameter(format!(
            "plant has no output channel {}",
            meas.output_channel
        )));
    }
    if act_channel >= plant.n_inputs() {
        return Err(QlinError::InvalidParameter(format!(
            "plant has no input channel {act_channel}"
        )));
    }
    let mode = plant
        .modes()
        .get(target_mode)
        .ok_or_else(|| QlinError::InvalidParameter(format!("plant has no mode {target_mode}")))?;

    let a = plant.a().clone();
    let f = NoiseSpec::from_model(plant);
    let w = plant.b() * f.matrix() * plant.b().transpose();

    // Measured rows of the output equation.
    let rows: Vec<usize> = match meas.kind {
        MeasKind::HomodyneX => vec![2 * meas.output_channel],
        MeasKind::Heterodyne => vec![2 * meas.output_channel, 2 * meas.output_channel + 1],
    };
    let ny = rows.len();
    let mut c_y = DMatrix::zeros(ny, n);
    let mut d_y = DMatrix::zeros(ny, plant.d().ncols());
    for (r, &row) in rows.iter().enumerate() {
        c_y.view_mut((r, 0), (1, n))
            .copy_from(&plant.c().view((row, 0), (1, n)).into_owned());
        d_y.view_mut((r, 0), (1, plant.d().ncols()))
            .copy_from(&plant.d().view((row, 0), (1, plant.d().ncols())).into_owned());
    }
    // V = field noise reaching the detector + one fresh vacuum per measured row.
    let v = &d_y * f.matrix() * d_y.transpose() + DMatrix::identity(ny, ny);
    // Cross-correlation of process and measurement noise.
    let n_cross = plant.b() * f.matrix() * d_y.transpose();

    let v_lu = v.clone().lu();
    let v_inv_cy = v_lu
        .solve(&c_y)
        .ok_or_else(|| QlinError::SynthesisFailure("measurement noise is singular".into()))?;
    let a_bar = &a - &n_cross * &v_inv_cy;
    let v_inv_nt = v_lu
        .solve(&n_cross.transpose())
        .ok_or_else(|| QlinError::SynthesisFailure("measurement noise is singular".into()))?;
    let w_bar = &w - &n_cross * &v_inv_nt;

    let sigma = solve_care(&a_bar.transpose(), &c_y.transpose(), &w_bar, &v)
        .map_err(|e| QlinError::SynthesisFailure(format!("filter Riccati: {e}")))?;
    let filter_gain = v_lu
        .solve(&(&c_y * &sigma + n_cross.transpose()))
        .ok_or_else(|| QlinError::SynthesisFailure("measurement noise is singular".into()))?
        .transpose();

    // LQR on the target mode's quadrature variance with weight eps.
    let b_u = plant
        .b()
        .view((0, 2 * act_channel), (n, 2))
        .into_owned();
    let mut q_c = DMatrix::zeros(n, n);
    q_c[(mode.x_index, mode.x_index)] = 1.0;
    q_c[(mode.x_index + 1, mode.x_index + 1)] = 1.0;
    let r_c = DMatrix::identity(2, 2) * eps;
    let x = solve_care(&a, &b_u, &q_c, &r_c)
        .map_err(|e| QlinError::SynthesisFailure(format!("control Riccati: {e}")))?;
    let control_gain = (b_u.transpose() * &x) / eps;

    let a_k = &a - &b_u * &control_gain - &filter_gain * &c_y;
    let gain_k = -&control_gain;
    // Map the filter gain onto the measured quadratures of the incoming field.
    let mut gain_l = DMatrix::zeros(n, 2);
    match meas.kind {
        MeasKind::HomodyneX => gain_l.column_mut(0).copy_from(&filter_gain.column(0)),
        MeasKind::Heterodyne => gain_l.copy_from(&filter_gain),
    }
    let controller = classical_controller_model(
        a_k.clone(),
        gain_l,
        gain_k,
        matches!(meas.kind, MeasKind::Heterodyne),
    )?;
    Ok(LqgSynthesis {
        controller,
        a_k,
        filter_gain,
        control_gain,
        filter_covariance: sigma,
        control_riccati: x,
    })
}

/// One-port coherent cavity controller with detuning and an input phase.
pub fn coherent_cavity_controller(kappa: f64, delta: f64, phase: f64) -> Result<LinearModel> {
    if kappa <= 0.0 || !kappa.is_finite() {
        return Err(QlinError::InvalidParameter(
            "cavity controller decay rate must be positive".into(),
        ));
    }
    let a = DMatrix::from_row_slice(2, 2, &[-kappa / 2.0, delta, -delta, -kappa / 2.0]);
    let rot = rotation2(phase);
    let b = &rot * -kappa.sqrt();
    let c = DMatrix::identity(2, 2) * kappa.sqrt();
    let d = rot;
    LinearModel::new(
        a,
        b,
        c,
        d,
        vec![ChannelLabel::vacuum("io")],
        vec![ChannelLabel::vacuum("io")],
        vec![Mode {
            name: "ctrl".into(),
            x_index: 0,
            kind: ModeKind::Quantum,
        }],
    )
}

/// Static two-mode squeezer (Bogoliubov transformation): signal gains cosh,
/// idler admixture sinh with conjugated p quadrature. Output 1 carries the
/// amplified signal and feeds the plant.
pub fn two_mode_squeezer(eta: f64) -> Result<LinearModel> {
    if !eta.is_finite() {
        return Err(QlinError::InvalidParameter(
            "squeezing parameter must be finite".into(),
        ));
    }
    let ch = eta.cosh();
    let sh = eta.sinh();
    let conj = DMatrix::from_row_slice(2, 2, &[sh, 0.0, 0.0, -sh]);
    let mut d = DMatrix::zeros(4, 4);
    set_block(&mut d, 0, 0, &(DMatrix::identity(2, 2) * ch));
    set_block(&mut d, 0, 2, &conj);
    set_block(&mut d, 2, 0, &conj);
    set_block(&mut d, 2, 2, &(DMatrix::identity(2, 2) * ch));
    LinearModel::static_model(
        d,
        vec![ChannelLabel::vacuum("in1"), ChannelLabel::vacuum("in2")],
        vec![ChannelLabel::vacuum("out1"), ChannelLabel::vacuum("out2")],
    )
}

/// Parameters of the OPO controller: a detuned cavity with degenerate
/// parametric gain behind two ports, with static single-mode squeezers on the
/// signal input and the designated feedback output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpoParams {
    pub kappa1: f64,
    pub kappa2: f64,
    pub delta: f64,
    /// Parametric pump amplitude (1/time); the OPO destabilizes at
    /// pump_amp >= (kappa1 + kappa2)/2, which is flagged by the stability
    /// check rather than rejected here.
    pub pump_amp: f64,
    pub pump_angle: f64,
    pub r_in: f64,
    pub phi_in: f64,
    pub r_out: f64,
    pub phi_out: f64,
}

impl OpoParams {
    pub fn validate(&self) -> Result<()> {
        if self.kappa1 <= 0.0 || self.kappa2 <= 0.0 {
            return Err(QlinError::InvalidParameter(
                "OPO port rates must be positive".into(),
            ));
        }
        if !self.pump_amp.is_finite() || self.pump_amp < 0.0 {
            return Err(QlinError::InvalidParameter(
                "OPO pump amplitude must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Build the OPO model. `out_squeezer_port` selects which output carries the
/// static output squeezer (0 or 1); the input squeezer always sits on port 1
/// where the signal enters.
pub fn opo_controller(p: &OpoParams, out_squeezer_port: usize) -> Result<LinearModel> {
    p.validate()?;
    if out_squeezer_port > 1 {
        return Err(QlinError::InvalidParameter(
            "OPO output port index must be 0 or 1".into(),
        ));
    }
    let kappa = p.kappa1 + p.kappa2;
    let (ct, st) = (p.pump_angle.cos(), p.pump_angle.sin());
    let a = DMatrix::from_row_slice(
        2,
        2,
        &[
            -kappa / 2.0 + p.pump_amp * ct,
            p.delta + p.pump_amp * st,
            -p.delta + p.pump_amp * st,
            -kappa / 2.0 - p.pump_amp * ct,
        ],
    );
    let s_in = squeezer2(p.r_in, p.phi_in);
    let s_out = squeezer2(p.r_out, p.phi_out);

    let mut b = DMatrix::zeros(2, 4);
    set_block(&mut b, 0, 0, &(-p.kappa1.sqrt() * &s_in));
    set_block(&mut b, 0, 2, &(DMatrix::identity(2, 2) * -p.kappa2.sqrt()));
    let mut c = DMatrix::zeros(4, 2);
    set_block(&mut c, 0, 0, &(DMatrix::identity(2, 2) * p.kappa1.sqrt()));
    set_block(&mut c, 2, 0, &(DMatrix::identity(2, 2) * p.kappa2.sqrt()));
    let mut d = DMatrix::zeros(4, 4);
    set_block(&mut d, 0, 0, &s_in);
    set_block(&mut d, 2, 2, &DMatrix::identity(2, 2));
    // output squeezer on the designated port
    let r0 = 2 * out_squeezer_port;
    let c_rows = (&s_out * c.view((r0, 0), (2, 2))).into_owned();
    set_block(&mut c, r0, 0, &c_rows);
    let d_rows = (&s_out * d.view((r0, 0), (2, 4))).into_owned();
    d.view_mut((r0, 0), (2, 4)).copy_from(&d_rows);

    LinearModel::new(
        a,
        b,
        c,
        d,
        vec![ChannelLabel::vacuum("in1"), ChannelLabel::vacuum("in2")],
        vec![ChannelLabel::vacuum("out1"), ChannelLabel::vacuum("out2")],
        vec![Mode {
            name: "opo".into(),
            x_index: 0,
            kind: ModeKind::Quantum,
        }],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        cavity_plant, optomech_plant, realizability_residual, CavityParams, OptomechParams,
    };
    use crate::network::close_loop;
    use crate::steady::{steady_covariance, transfer_function};
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn unit_cavity(k_n: f64) -> LinearModel {
        cavity_plant(&CavityParams {
            k1: 1.0,
            k2: 1.0,
            k3: 1.0,
            k_n,
            delta: 0.0,
        })
        .unwrap()
    }

    fn cavity_loop_excitation(ctrl: &LinearModel, in_name: &str, out_name: &str, k_n: f64) -> f64 {
        let plant = unit_cavity(k_n);
        let closed = close_loop(&plant, ctrl, "m1", in_name, out_name, "m2").unwrap();
        steady_covariance(&closed, &NoiseSpec::from_model(&closed))
            .unwrap()
            .excitation(0)
            .unwrap()
    }

    // Closed form for the heterodyne-amplifier loop at gain sinh(eta).
    fn heterodyne_closed_form(k1: f64, k2: f64, k3: f64, k_n: f64, eta: f64) -> f64 {
        (k2 * eta.sinh().powi(2) + k3 * k_n) / (k1 + k2 + k3 + 2.0 * (k1 * k2).sqrt() * eta.sinh())
    }

    // Closed form for the two-mode-squeezer loop.
    fn squeezer_closed_form(k1: f64, k2: f64, k3: f64, k_n: f64, eta: f64) -> f64 {
        (k2 * eta.sinh().powi(2) + k3 * k_n) / (k1 + k2 + k3 + 2.0 * (k1 * k2).sqrt() * eta.cosh())
    }

    #[test]
    fn trivial_identity_gives_constructive_interference() {
        let n = cavity_loop_excitation(&trivial_controller(0.0), "io", "io", 1.0);
        assert_abs_diff_eq!(n, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn trivial_pi_gives_destructive_interference() {
        // sign flip: k_eff = k - 2 sqrt(k1 k2), worse than no control
        let n = cavity_loop_excitation(&trivial_controller(std::f64::consts::PI), "io", "io", 1.0);
        assert_abs_diff_eq!(n, 1.0, epsilon = 1e-10);
        assert!(n > 1.0 / 3.0);
    }

    #[test]
    fn trivial_is_realizable() {
        for theta in [0.0, 0.7, 2.4, 5.9] {
            let r = realizability_residual(&trivial_controller(theta)).unwrap();
            assert!(r <= 1e-12);
        }
    }

    #[test]
    fn heterodyne_matches_closed_form() {
        for eta in [0.25, 0.5, 1.0, 2.0] {
            let ctrl = heterodyne_amplifier(eta.sinh()).unwrap();
            let n = cavity_loop_excitation(&ctrl, "in", "out", 1.0);
            assert_abs_diff_eq!(
                n,
                heterodyne_closed_form(1.0, 1.0, 1.0, 1.0, eta),
                epsilon = 1e-12
            );
        }
        // frozen spot value at eta = 1: (sinh^2 1 + 1)/(3 + 2 sinh 1)
        let n = cavity_loop_excitation(&heterodyne_amplifier(1.0f64.sinh()).unwrap(), "in", "out", 1.0);
        assert_abs_diff_eq!(n, 0.44503188623046, epsilon = 1e-9);
    }

    #[test]
    fn heterodyne_zero_gain_is_no_control() {
        let n = cavity_loop_excitation(&heterodyne_amplifier(0.0).unwrap(), "in", "out", 1.0);
        assert_abs_diff_eq!(n, 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn heterodyne_rejects_negative_gain() {
        assert!(heterodyne_amplifier(-0.5).is_err());
    }

    #[test]
    fn heterodyne_adds_one_vacuum_per_measurement_and_actuation() {
        let ctrl = heterodyne_amplifier(1.0).unwrap();
        let aux: Vec<_> = ctrl.inputs().iter().skip(1).map(|c| c.name.clone()).collect();
        assert_eq!(aux, vec!["bs".to_string(), "carrier".to_string()]);
    }

    #[test]
    fn squeezer_matches_closed_form_and_beats_heterodyne() {
        for eta in [0.25, 0.5, 1.0, 2.0] {
            let ctrl = two_mode_squeezer(eta).unwrap();
            let n = cavity_loop_excitation(&ctrl, "in1", "out1", 1.0);
            let expected = squeezer_closed_form(1.0, 1.0, 1.0, 1.0, eta);
            assert_abs_diff_eq!(n, expected, epsilon = 1e-12);
            assert!(expected < heterodyne_closed_form(1.0, 1.0, 1.0, 1.0, eta));
        }
        let n = cavity_loop_excitation(&two_mode_squeezer(1.0).unwrap(), "in1", "out1", 1.0);
        assert_abs_diff_eq!(n, 0.39123040582447, epsilon = 1e-9);
    }

    #[test]
    fn squeezer_identity_and_symplecticity() {
        let id = two_mode_squeezer(0.0).unwrap();
        assert!((id.d() - DMatrix::identity(4, 4)).abs().max() <= 1e-15);
        for eta in [0.3, 1.0, 2.5] {
            let g = two_mode_squeezer(eta).unwrap();
            assert!(realizability_residual(&g).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn coherent_cavity_is_realizable_with_phase() {
        for (kappa, delta, phase) in [(1.0, 0.0, 0.0), (3.0, 2.0, 1.1), (50.0, -7.0, 4.0)] {
            let g = coherent_cavity_controller(kappa, delta, phase).unwrap();
            assert!(realizability_residual(&g).unwrap() <= 1e-11);
        }
        assert!(coherent_cavity_controller(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn coherent_cavity_large_kappa_is_transparent() {
        // |T| -> 1 for kappa >> |s|: the controller passes the field through
        // (with a pi phase at resonance).
        let g = coherent_cavity_controller(1e6, 0.0, 0.0).unwrap();
        let t = transfer_function(&g, Complex64::new(0.0, 1.0)).unwrap();
        let gain = (t[(0, 0)].norm_sqr() + t[(1, 0)].norm_sqr()).sqrt();
        assert_abs_diff_eq!(gain, 1.0, epsilon = 1e-5);
        let t0 = transfer_function(&g, Complex64::new(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(t0[(0, 0)].re, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn opo_is_realizable() {
        let p = OpoParams {
            kappa1: 2.0,
            kappa2: 0.5,
            delta: 3.0,
            pump_amp: 0.9,
            pump_angle: 0.7,
            r_in: 0.4,
            phi_in: 1.2,
            r_out: 0.8,
            phi_out: 2.5,
        };
        for port in [0, 1] {
            let g = opo_controller(&p, port).unwrap();
            assert!(realizability_residual(&g).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn opo_with_gains_off_reduces_to_coherent_cavity() {
        // kappa2 -> 0, no pump, no squeezers: port-1 reflection is the plain
        // cavity controller response.
        let p = OpoParams {
            kappa1: 2.0,
            kappa2: 1e-12,
            delta: 1.5,
            pump_amp: 0.0,
            pump_angle: 0.0,
            r_in: 0.0,
            phi_in: 0.0,
            r_out: 0.0,
            phi_out: 0.0,
        };
        let opo = opo_controller(&p, 0).unwrap();
        let cav = coherent_cavity_controller(2.0, 1.5, 0.0).unwrap();
        for w in [0.0, 0.3, 2.0, 10.0] {
            let s = Complex64::new(0.0, w);
            let t_opo = transfer_function(&opo, s).unwrap();
            let t_cav = transfer_function(&cav, s).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert_abs_diff_eq!(
                        t_opo[(i, j)].re,
                        t_cav[(i, j)].re,
                        epsilon = 1e-6
                    );
                    assert_abs_diff_eq!(
                        t_opo[(i, j)].im,
                        t_cav[(i, j)].im,
                        epsilon = 1e-6
                    );
                }
            }
        }
    }

    #[test]
    fn opo_unstable_pump_is_flagged_not_rejected() {
        let p = OpoParams {
            kappa1: 1.0,
            kappa2: 1.0,
            delta: 0.0,
            pump_amp: 1.5, // >= kappa/2 = 1
            pump_angle: 0.0,
            r_in: 0.0,
            phi_in: 0.0,
            r_out: 0.0,
            phi_out: 0.0,
        };
        let g = opo_controller(&p, 0).unwrap();
        assert!(!crate::steady::is_hurwitz(g.a()));
    }

    #[test]
    fn homodyne_zero_actuation_leaves_plant_thermal() {
        let plant = optomech_plant(&OptomechParams::symmetric(100.0, 1e4, 1.0, 10.0)).unwrap();
        let a_k = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        let b_k = DMatrix::from_row_slice(2, 1, &[0.5, 0.5]);
        let c_k = DMatrix::zeros(1, 2);
        let ctrl = homodyne_dynamic_controller(&a_k, &b_k, &c_k).unwrap();
        let closed = close_loop(&plant, &ctrl, "probe", "meas", "out", "fb").unwrap();
        let n = steady_covariance(&closed, &NoiseSpec::from_model(&closed))
            .unwrap()
            .excitation(0)
            .unwrap();
        assert_abs_diff_eq!(n, 10.0, epsilon = 1e-9);
    }

    #[test]
    fn homodyne_dimension_check() {
        let bad = homodyne_dynamic_controller(
            &DMatrix::zeros(3, 3),
            &DMatrix::zeros(3, 1),
            &DMatrix::zeros(1, 3),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn homodyne_static_gain_limit_matches_reduced_proportional_controller() {
        // A_k = -lambda I with lambda far above every loop rate reduces to a
        // static y -> u gain G = C_k (-A_k)^-1 B_k (adiabatic elimination).
        let plant = optomech_plant(&OptomechParams::symmetric(10.0, 100.0, 1.0, 5.0)).unwrap();
        let lambda = 1e6;
        let a_k = DMatrix::from_row_slice(2, 2, &[-lambda, 0.0, 0.0, -lambda]);
        let b_k = DMatrix::from_row_slice(2, 1, &[lambda, 0.0]);
        let c_k = DMatrix::from_row_slice(1, 2, &[0.4, 0.0]);
        let ctrl = homodyne_dynamic_controller(&a_k, &b_k, &c_k).unwrap();
        let closed = close_loop(&plant, &ctrl, "probe", "meas", "out", "fb").unwrap();
        let n_dyn = steady_covariance(&closed, &NoiseSpec::from_model(&closed))
            .unwrap()
            .excitation(0)
            .unwrap();

        // Hand-reduced model: u = g*y with g = 0.4, y = 2 K x_m + probe_x + hom_x.
        // The momentum picks up -2K2 (carrier_p + u) = 2 (carrier_p + u).
        let g = 0.4;
        let k = 1.0;
        let gamma = 10.0 / 100.0;
        let a_red = DMatrix::from_row_slice(
            2,
            2,
            &[
                -gamma / 2.0,
                10.0,
                -10.0 + 2.0 * k * g * 2.0 * k,
                -gamma / 2.0,
            ],
        );
        // noise columns: probe (x drives via g, p via -2K), hom (x via g),
        // carrier (p), bath (-sqrt(gamma) I)
        let mut b_red = DMatrix::zeros(2, 8);
        b_red[(1, 0)] = 2.0 * k * g; // probe_x through the static controller
        b_red[(1, 1)] = -2.0 * k; // probe_p back-action
        b_red[(1, 2)] = 2.0 * k * g; // homodyne vacuum
        b_red[(1, 5)] = 2.0 * k; // carrier_p (K2 = -K)
        b_red[(0, 6)] = -gamma.sqrt();
        b_red[(1, 7)] = -gamma.sqrt();
        let mut f = DMatrix::identity(8, 8);
        f[(6, 6)] = 11.0; // thermal bath 2*5+1
        f[(7, 7)] = 11.0;
        let q = &b_red * &f * b_red.transpose();
        let sigma = crate::steady::solve_lyapunov(&a_red, &q).unwrap();
        let n_static = (sigma[(0, 0)] + sigma[(1, 1)] - 2.0) / 4.0;

        assert_abs_diff_eq!(n_dyn, n_static, epsilon = 1e-3 * n_static.abs().max(1.0));
    }

    #[test]
    fn lqg_zero_coupling_is_inert() {
        let plant = optomech_plant(&OptomechParams::symmetric(100.0, 1e4, 0.0, 10.0)).unwrap();
        let syn = lqg_optimal_classical(
            &plant,
            MeasurementSpec {
                output_channel: 0,
                kind: MeasKind::HomodyneX,
            },
            1,
            0,
            1e-4,
        )
        .unwrap();
        assert!(syn.filter_gain.abs().max() < 1e-9);
        assert!(syn.control_gain.abs().max() < 1e-9);
        let closed = close_loop(&plant, &syn.controller, "probe", "meas", "out", "fb").unwrap();
        let n = steady_covariance(&closed, &NoiseSpec::from_model(&closed))
            .unwrap()
            .excitation(0)
            .unwrap();
        assert_abs_diff_eq!(n, 10.0, epsilon = 1e-8);
    }

    #[test]
    fn lqg_cools_the_hot_oscillator() {
        let plant = optomech_plant(&OptomechParams::symmetric(100.0, 1e4, 2.0, 100.0)).unwrap();
        let syn = lqg_optimal_classical(
            &plant,
            MeasurementSpec {
                output_channel: 0,
                kind: MeasKind::HomodyneX,
            },
            1,
            0,
            1e-6,
        )
        .unwrap();
        let closed = close_loop(&plant, &syn.controller, "probe", "meas", "out", "fb").unwrap();
        let n = steady_covariance(&closed, &NoiseSpec::from_model(&closed))
            .unwrap()
            .excitation(0)
            .unwrap();
        assert!(n < 50.0, "expected substantial cooling, got n = {n}");
        assert!(n > 0.0);
    }

    #[test]
    fn classical_controllers_use_one_vacuum_per_measurement_and_actuation() {
        let plant = optomech_plant(&OptomechParams::symmetric(100.0, 1e4, 1.0, 1.0)).unwrap();
        let syn = lqg_optimal_classical(
            &plant,
            MeasurementSpec {
                output_channel: 0,
                kind: MeasKind::HomodyneX,
            },
            1,
            0,
            1e-4,
        )
        .unwrap();
        let aux: Vec<_> = syn
            .controller
            .inputs()
            .iter()
            .skip(1)
            .map(|c| c.name.clone())
            .collect();
        assert_eq!(aux, vec!["hom".to_string(), "carrier".to_string()]);
        assert!(syn.controller.has_classical_modes());
        assert!(realizability_residual(&syn.controller).is_err());
    }
}
