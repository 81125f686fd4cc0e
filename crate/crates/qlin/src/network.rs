//! Composition algebra for wiring plants and controllers into closed loops:
//! concatenation (direct sum), series connection, and feedback reduction of
//! connected channels via the linear-fractional transform.

use nalgebra::{DMatrix, DVector};

use crate::error::{QlinError, Result};
use crate::model::{set_block, ChannelLabel, LinearModel};
use crate::steady::WELL_POSEDNESS_RCOND;

/// A set of output-to-input connections, referenced by channel name.
///
/// Connected channels are eliminated from the reduced model; the remaining
/// channels keep their original order unless an explicit order is given.
#[derive(Debug, Clone, Default)]
pub struct Wiring {
    pub connections: Vec<(String, String)>,
    pub input_order: Option<Vec<String>>,
    pub output_order: Option<Vec<String>>,
}

impl Wiring {
    pub fn new() -> Self {
        Wiring::default()
    }

    pub fn connect(mut self, source_output: &str, target_input: &str) -> Self {
        self.connections
            .push((source_output.to_string(), target_input.to_string()));
        self
    }
}

/// Direct sum of two models: block-diagonal states and concatenated channel
/// lists. Channel names must be disjoint.
pub fn concatenate(g1: &LinearModel, g2: &LinearModel) -> Result<LinearModel> {
    let mut collisions = Vec::new();
    for c1 in g1.inputs() {
        if g2.inputs().iter().any(|c2| c2.name == c1.name) {
            collisions.push(c1.name.clone());
        }
    }
    for c1 in g1.outputs() {
        if g2.outputs().iter().any(|c2| c2.name == c1.name) {
            collisions.push(c1.name.clone());
        }
    }
    if !collisions.is_empty() {
        collisions.dedup();
        return Err(QlinError::RelabelRequired(collisions));
    }

    let n1 = g1.n_states();
    let n2 = g2.n_states();
    let (bi1, bi2) = (g1.b().ncols(), g2.b().ncols());
    let (co1, co2) = (g1.c().nrows(), g2.c().nrows());

    let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
    set_block(&mut a, 0, 0, g1.a());
    set_block(&mut a, n1, n1, g2.a());

    let mut b = DMatrix::zeros(n1 + n2, bi1 + bi2);
    set_block(&mut b, 0, 0, g1.b());
    set_block(&mut b, n1, bi1, g2.b());

    let mut c = DMatrix::zeros(co1 + co2, n1 + n2);
    set_block(&mut c, 0, 0, g1.c());
    set_block(&mut c, co1, n1, g2.c());

    let mut d = DMatrix::zeros(co1 + co2, bi1 + bi2);
    set_block(&mut d, 0, 0, g1.d());
    set_block(&mut d, co1, bi1, g2.d());

    let mut state_offset = DVector::zeros(n1 + n2);
    state_offset.rows_mut(0, n1).copy_from(g1.state_offset());
    state_offset.rows_mut(n1, n2).copy_from(g2.state_offset());
    let mut output_offset = DVector::zeros(co1 + co2);
    output_offset.rows_mut(0, co1).copy_from(g1.output_offset());
    output_offset.rows_mut(co1, co2).copy_from(g2.output_offset());

    let inputs: Vec<ChannelLabel> = g1.inputs().iter().chain(g2.inputs()).cloned().collect();
    let outputs: Vec<ChannelLabel> = g1.outputs().iter().chain(g2.outputs()).cloned().collect();

    let mut modes = g1.modes().to_vec();
    modes.extend(g2.modes().iter().map(|m| {
        let mut m = m.clone();
        m.x_index += n1;
        m
    }));

    LinearModel::with_offsets(a, b, c, d, state_offset, output_offset, inputs, outputs, modes)
}

/// Select the 2-wide quadrature column block of each listed channel.
fn gather_cols(m: &DMatrix<f64>, channels: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), 2 * channels.len());
    for (k, &ch) in channels.iter().enumerate() {
        out.view_mut((0, 2 * k), (m.nrows(), 2))
            .copy_from(&m.view((0, 2 * ch), (m.nrows(), 2)).into_owned());
    }
    out
}

fn gather_rows(m: &DMatrix<f64>, channels: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(2 * channels.len(), m.ncols());
    for (k, &ch) in channels.iter().enumerate() {
        out.view_mut((2 * k, 0), (2, m.ncols()))
            .copy_from(&m.view((2 * ch, 0), (2, m.ncols())).into_owned());
    }
    out
}

fn gather_vec(v: &DVector<f64>, channels: &[usize]) -> DVector<f64> {
    let mut out = DVector::zeros(2 * channels.len());
    for (k, &ch) in channels.iter().enumerate() {
        out.rows_mut(2 * k, 2).copy_from(&v.rows(2 * ch, 2).into_owned());
    }
    out
}

/// Close the listed output -> input connections of `g` and eliminate them.
///
/// With inputs split into external (E) and connected (T) and outputs into
/// kept (O) and sourced (S), the loop constraint `w_T = w~_S` is solved and
/// substituted, reducing the model by the standard linear-fractional
/// transform. Errors if `(I - D_ST)` is numerically singular.
pub fn feedback_interconnect(g: &LinearModel, wiring: &Wiring) -> Result<LinearModel> {
    if wiring.connections.is_empty() && wiring.input_order.is_none() && wiring.output_order.is_none()
    {
        return Ok(g.clone());
    }

    let mut source_idx = Vec::with_capacity(wiring.connections.len());
    let mut target_idx = Vec::with_capacity(wiring.connections.len());
    for (src, tgt) in &wiring.connections {
        source_idx.push(g.output_index(src)?);
        target_idx.push(g.input_index(tgt)?);
    }
    {
        let mut seen_s = source_idx.clone();
        seen_s.sort_unstable();
        seen_s.dedup();
        let mut seen_t = target_idx.clone();
        seen_t.sort_unstable();
        seen_t.dedup();
        if seen_s.len() != source_idx.len() || seen_t.len() != target_idx.len() {
            return Err(QlinError::InvalidWiring(
                "a channel appears in more than one connection".into(),
            ));
        }
    }

    let ext_inputs: Vec<usize> = (0..g.n_inputs())
        .filter(|i| !target_idx.contains(i))
        .collect();
    let kept_outputs: Vec<usize> = (0..g.n_outputs())
        .filter(|o| !source_idx.contains(o))
        .collect();

    // Loop blocks
    let b_t = gather_cols(g.b(), &target_idx);
    let b_e = gather_cols(g.b(), &ext_inputs);
    let c_s = gather_rows(g.c(), &source_idx);
    let c_o = gather_rows(g.c(), &kept_outputs);
    let d_se = gather_cols(&gather_rows(g.d(), &source_idx), &ext_inputs);
    let d_st = gather_cols(&gather_rows(g.d(), &source_idx), &target_idx);
    let d_oe = gather_cols(&gather_rows(g.d(), &kept_outputs), &ext_inputs);
    let d_ot = gather_cols(&gather_rows(g.d(), &kept_outputs), &target_idx);
    let c_off_s = gather_vec(g.output_offset(), &source_idx);
    let c_off_o = gather_vec(g.output_offset(), &kept_outputs);

    let nl = d_st.nrows();
    let loop_mat = DMatrix::identity(nl, nl) - &d_st;
    // Well-posedness: reciprocal condition estimate via SVD extremes.
    let svd = loop_mat.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let rcond = if smax > 0.0 { smin / smax } else { 0.0 };
    if !rcond.is_finite() || rcond < WELL_POSEDNESS_RCOND {
        return Err(QlinError::AlgebraicLoop { rcond });
    }
    let lu = loop_mat.lu();
    let solve = |rhs: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        lu.solve(rhs).ok_or(QlinError::AlgebraicLoop { rcond })
    };

    // w_T = (I - D_ST)^-1 (C_S x + c_S + D_SE w_E)
    let k_x = solve(&c_s)?;
    let k_e = solve(&d_se)?;
    let k_0 = lu
        .solve(&c_off_s)
        .ok_or(QlinError::AlgebraicLoop { rcond })?;

    let a_new = g.a() + &b_t * &k_x;
    let b_new = &b_e + &b_t * &k_e;
    let c_new = &c_o + &d_ot * &k_x;
    let d_new = &d_oe + &d_ot * &k_e;
    let a_off_new = g.state_offset() + &b_t * &k_0;
    let c_off_new = &c_off_o + &d_ot * &k_0;

    let mut inputs: Vec<ChannelLabel> = ext_inputs
        .iter()
        .map(|&i| g.inputs()[i].clone())
        .collect();
    let mut outputs: Vec<ChannelLabel> = kept_outputs
        .iter()
        .map(|&o| g.outputs()[o].clone())
        .collect();

    // Optional explicit channel reordering of the remaining ports.
    let mut b_new = b_new;
    let mut d_new = d_new;
    let mut c_new = c_new;
    let mut c_off_new = c_off_new;
    if let Some(order) = &wiring.input_order {
        if order.len() != inputs.len() {
            return Err(QlinError::InvalidWiring(format!(
                "input order lists {} channels, model keeps {}",
                order.len(),
                inputs.len()
            )));
        }
        let mut perm = Vec::with_capacity(order.len());
        for name in order {
            let i = inputs
                .iter()
                .position(|c| &c.name == name)
                .ok_or_else(|| QlinError::UnknownChannel(name.clone()))?;
            if perm.contains(&i) {
                return Err(QlinError::InvalidWiring(format!(
                    "input {name} listed twice in channel order"
                )));
            }
            perm.push(i);
        }
        b_new = gather_cols(&b_new, &perm);
        d_new = gather_cols(&d_new, &perm);
        inputs = perm.iter().map(|&i| inputs[i].clone()).collect();
    }
    if let Some(order) = &wiring.output_order {
        if order.len() != outputs.len() {
            return Err(QlinError::InvalidWiring(format!(
                "output order lists {} channels, model keeps {}",
                order.len(),
                outputs.len()
            )));
        }
        let mut perm = Vec::with_capacity(order.len());
        for name in order {
            let i = outputs
                .iter()
                .position(|c| &c.name == name)
                .ok_or_else(|| QlinError::UnknownChannel(name.clone()))?;
            if perm.contains(&i) {
                return Err(QlinError::InvalidWiring(format!(
                    "output {name} listed twice in channel order"
                )));
            }
            perm.push(i);
        }
        c_new = gather_rows(&c_new, &perm);
        d_new = gather_rows(&d_new, &perm);
        c_off_new = gather_vec(&c_off_new, &perm);
        outputs = perm.iter().map(|&i| outputs[i].clone()).collect();
    }

    LinearModel::with_offsets(
        a_new,
        b_new,
        c_new,
        d_new,
        a_off_new,
        c_off_new,
        inputs,
        outputs,
        g.modes().to_vec(),
    )
}

/// Close the standard control loop: one plant output feeds the controller,
/// one controller output feeds back into the plant. Channel names are
/// prefixed `p.` / `c.` in the reduced model.
pub fn close_loop(
    plant: &LinearModel,
    controller: &LinearModel,
    plant_out: &str,
    controller_in: &str,
    controller_out: &str,
    plant_in: &str,
) -> Result<LinearModel> {
    let p = plant.with_name_prefix("p.");
    let c = controller.with_name_prefix("c.");
    let joined = concatenate(&p, &c)?;
    let wiring = Wiring::new()
        .connect(&format!("p.{plant_out}"), &format!("c.{controller_in}"))
        .connect(&format!("c.{controller_out}"), &format!("p.{plant_in}"));
    feedback_interconnect(&joined, &wiring)
}

/// Cascade: all outputs of `g1` feed the inputs of `g2` in order.
/// Equivalent to concatenating and closing the full wiring.
pub fn series(g1: &LinearModel, g2: &LinearModel) -> Result<LinearModel> {
    if g1.n_outputs() != g2.n_inputs() {
        return Err(QlinError::InvalidWiring(format!(
            "series: {} outputs cannot feed {} inputs",
            g1.n_outputs(),
            g2.n_inputs()
        )));
    }
    let joined = concatenate(g1, g2)?;
    let mut wiring = Wiring::new();
    for (o, i) in g1.outputs().iter().zip(g2.inputs()) {
        wiring = wiring.connect(&o.name, &i.name);
    }
    feedback_interconnect(&joined, &wiring)
}
