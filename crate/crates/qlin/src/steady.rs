//! Stability tests, Lyapunov and Riccati solvers, steady-state covariances,
//! transfer functions, and per-channel noise budgets.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{QlinError, Result};
use crate::model::{LinearModel, ModeKind, NoiseSpec};

/// Eigenvalue real parts must fall below this margin for a drift matrix to
/// count as Hurwitz; separates marginal loops from numerically noisy stable
/// ones.
pub const STABILITY_MARGIN: f64 = 1e-12;

/// Reciprocal-condition threshold below which a feedback loop is treated as
/// algebraic (ill-posed).
pub const WELL_POSEDNESS_RCOND: f64 = 1e-12;

pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    if a.is_empty() {
        return vec![];
    }
    a.clone().complex_eigenvalues().iter().cloned().collect()
}

pub fn max_real_eigenvalue(a: &DMatrix<f64>) -> f64 {
    eigenvalues(a)
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// True iff every eigenvalue real part is below -`STABILITY_MARGIN`.
/// An empty (static) system is vacuously stable.
pub fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    if a.is_empty() {
        return true;
    }
    max_real_eigenvalue(a) < -STABILITY_MARGIN
}

fn check_hurwitz(a: &DMatrix<f64>) -> Result<()> {
    if a.is_empty() || is_hurwitz(a) {
        Ok(())
    } else {
        Err(QlinError::NoSteadyState {
            max_re: max_real_eigenvalue(a),
            eigenvalues: eigenvalues(a),
        })
    }
}

/// Solve `A X + X A' + Q = 0` for symmetric X by Kronecker vectorization.
///
/// All systems here have n <= 8, where the dense n^2 x n^2 solve is
/// negligible. One step of iterative refinement keeps the residual at
/// rounding level even for stiff closed loops.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || q.nrows() != n || q.ncols() != n {
        return Err(QlinError::DimensionMismatch(
            "Lyapunov: A and Q must be square and of equal size".into(),
        ));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    check_hurwitz(a)?;

    let eye = DMatrix::<f64>::identity(n, n);
    let m = eye.kronecker(a) + a.kronecker(&eye);
    let lu = m.clone().lu();
    let vec_q = DVector::from_iterator(n * n, q.iter().cloned());
    let mut vec_x = lu
        .solve(&(-&vec_q))
        .ok_or_else(|| QlinError::NoSteadyState {
            max_re: max_real_eigenvalue(a),
            eigenvalues: eigenvalues(a),
        })?;

    let q_scale = q.abs().max().max(1e-300);
    for _ in 0..3 {
        let resid = &m * &vec_x + &vec_q;
        if resid.abs().max() <= 1e-13 * q_scale {
            break;
        }
        if let Some(corr) = lu.solve(&resid) {
            vec_x -= corr;
        } else {
            break;
        }
    }

    let mut x = DMatrix::from_iterator(n, n, vec_x.iter().cloned());
    x = (&x + x.transpose()) * 0.5;

    let resid = (a * &x + &x * a.transpose() + q).abs().max();
    if resid > 1e-10 * q_scale {
        return Err(QlinError::NoSteadyState {
            max_re: max_real_eigenvalue(a),
            eigenvalues: eigenvalues(a),
        });
    }
    Ok(x)
}

/// Steady-state symmetrized covariance and per-mode excitation numbers.
#[derive(Debug, Clone)]
pub struct CovarianceResult {
    pub sigma: DMatrix<f64>,
    /// Excitation number (sigma_xx + sigma_pp - 2) / 4 for each quantum mode,
    /// `None` for classical controller states.
    pub excitations: Vec<Option<f64>>,
}

impl CovarianceResult {
    /// Excitation of mode `i`; errors if it is classical.
    pub fn excitation(&self, i: usize) -> Result<f64> {
        self.excitations
            .get(i)
            .copied()
            .flatten()
            .ok_or_else(|| QlinError::NotApplicable(format!("mode {i} is not a quantum mode")))
    }
}

/// Solve the steady-state Lyapunov equation `A sigma + sigma A' + B F B' = 0`
/// for a model and its input noise.
pub fn steady_covariance(model: &LinearModel, noise: &NoiseSpec) -> Result<CovarianceResult> {
    if noise.matrix().nrows() != model.b().ncols() {
        return Err(QlinError::DimensionMismatch(
            "noise covariance must match the model's input dimension".into(),
        ));
    }
    let q = model.b() * noise.matrix() * model.b().transpose();
    let sigma = solve_lyapunov(model.a(), &q)?;

    if sigma.nrows() > 0 {
        let scale = sigma.abs().max().max(1.0);
        let min_eig = sigma
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-9 * scale {
            return Err(QlinError::IndefiniteCovariance(min_eig));
        }
    }

    let excitations = model
        .modes()
        .iter()
        .map(|m| match m.kind {
            ModeKind::Quantum => {
                let i = m.x_index;
                Some((sigma[(i, i)] + sigma[(i + 1, i + 1)] - 2.0) / 4.0)
            }
            ModeKind::Classical => None,
        })
        .collect();
    Ok(CovarianceResult { sigma, excitations })
}

/// Transfer function `C (sI - A)^-1 B + D` at complex frequency s.
pub fn transfer_function(model: &LinearModel, s: Complex64) -> Result<DMatrix<Complex64>> {
    let n = model.n_states();
    let to_c = |m: &DMatrix<f64>| m.map(|v| Complex64::new(v, 0.0));
    let d_c = to_c(model.d());
    if n == 0 {
        return Ok(d_c);
    }
    let a_c = to_c(model.a());
    let mut si_a = -a_c;
    for i in 0..n {
        si_a[(i, i)] += s;
    }
    let lu = si_a.lu();
    let solved = lu
        .solve(&to_c(model.b()))
        .ok_or(QlinError::Resonance(s))?;
    // Guard against a nearly singular resolvent that the LU still "solved".
    if lu.determinant().norm() < 1e-300 {
        return Err(QlinError::Resonance(s));
    }
    Ok(to_c(model.c()) * solved + d_c)
}

/// Noise-to-state transfer `(sI - A)^-1 B`: response of each state variable
/// to the input channels. Used to verify noise-cancellation mechanisms.
pub fn input_to_state_transfer(model: &LinearModel, s: Complex64) -> Result<DMatrix<Complex64>> {
    let n = model.n_states();
    if n == 0 {
        return Ok(DMatrix::zeros(0, model.b().ncols()));
    }
    let to_c = |m: &DMatrix<f64>| m.map(|v| Complex64::new(v, 0.0));
    let a_c = to_c(model.a());
    let mut si_a = -a_c;
    for i in 0..n {
        si_a[(i, i)] += s;
    }
    si_a.lu().solve(&to_c(model.b())).ok_or(QlinError::Resonance(s))
}

/// Per-channel share of one mode's steady-state quadrature variance.
#[derive(Debug, Clone)]
pub struct ChannelContribution {
    pub channel: String,
    /// (sigma_xx + sigma_pp)/4 from this channel's noise alone. Shares are
    /// nonnegative and sum to excitation + 1/2 (the 1/2 is the mode's
    /// zero-point variance, carried by whichever channels couple to it).
    pub share: f64,
    /// Share in excess of the same channel at vacuum level; nonzero only for
    /// thermal inputs.
    pub thermal_excess: f64,
}

/// Additive decomposition of a mode's steady-state excitation over input
/// channels, exploiting linearity of the Lyapunov equation in the noise.
#[derive(Debug, Clone)]
pub struct NoiseBudget {
    pub mode_index: usize,
    /// Total excitation of the mode under the full noise model.
    pub total: f64,
    pub contributions: Vec<ChannelContribution>,
}

impl NoiseBudget {
    pub fn share(&self, channel: &str) -> Option<f64> {
        self.contributions
            .iter()
            .find(|c| c.channel == channel)
            .map(|c| c.share)
    }

    /// Linearity check: sum of shares minus the zero-point half quantum
    /// equals the total excitation.
    pub fn sum_of_shares(&self) -> f64 {
        self.contributions.iter().map(|c| c.share).sum()
    }
}

/// Solve the Lyapunov equation once per input channel with only that
/// channel's noise block active and report each channel's share of the mode's
/// excitation.
pub fn noise_budget(model: &LinearModel, noise: &NoiseSpec, mode: usize) -> Result<NoiseBudget> {
    let m = model
        .modes()
        .get(mode)
        .ok_or_else(|| QlinError::InvalidParameter(format!("no mode {mode}")))?;
    if m.kind != ModeKind::Quantum {
        return Err(QlinError::NotApplicable(
            "noise budgets are defined for quantum modes".into(),
        ));
    }
    let total = steady_covariance(model, noise)?.excitation(mode)?;
    let ix = m.x_index;

    let mut contributions = Vec::with_capacity(model.n_inputs());
    for (i, ch) in model.inputs().iter().enumerate() {
        let dim = model.b().ncols();
        let mut f_single = DMatrix::zeros(dim, dim);
        f_single
            .view_mut((2 * i, 2 * i), (2, 2))
            .copy_from(&noise.matrix().view((2 * i, 2 * i), (2, 2)).into_owned());
        let q = model.b() * &f_single * model.b().transpose();
        let sigma = solve_lyapunov(model.a(), &q)?;
        let share = (sigma[(ix, ix)] + sigma[(ix + 1, ix + 1)]) / 4.0;

        let mut f_vac = DMatrix::zeros(dim, dim);
        f_vac
            .view_mut((2 * i, 2 * i), (2, 2))
            .copy_from(&ch.kind.covariance_block().map(|_| 0.0));
        // vacuum reference block: identity for quantum channels, zero for wires
        if ch.kind.is_quantum() {
            f_vac[(2 * i, 2 * i)] = 1.0;
            f_vac[(2 * i + 1, 2 * i + 1)] = 1.0;
        }
        let qv = model.b() * &f_vac * model.b().transpose();
        let sigma_v = solve_lyapunov(model.a(), &qv)?;
        let vac_share = (sigma_v[(ix, ix)] + sigma_v[(ix + 1, ix + 1)]) / 4.0;

        contributions.push(ChannelContribution {
            channel: ch.name.clone(),
            share,
            thermal_excess: share - vac_share,
        });
    }
    Ok(NoiseBudget {
        mode_index: mode,
        total,
        contributions,
    })
}

/// Stabilizing solution of the continuous algebraic Riccati equation
///
/// ```text
///   A' X + X A - X B R^-1 B' X + Q = 0
/// ```
///
/// computed from the stable invariant subspace of the 2n x 2n Hamiltonian via
/// the matrix sign function, then polished by Newton (Kleinman) steps. The
/// residual is driven below 1e-9 relative to the equation's term scale.
pub fn solve_care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || q.nrows() != n || q.ncols() != n {
        return Err(QlinError::DimensionMismatch(
            "CARE: A, Q must be n x n and B must have n rows".into(),
        ));
    }
    let m = b.ncols();
    if r.nrows() != m || r.ncols() != m {
        return Err(QlinError::DimensionMismatch(
            "CARE: R must match the number of B columns".into(),
        ));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let r_lu = r.clone().lu();
    let r_inv_bt = r_lu
        .solve(&b.transpose())
        .ok_or_else(|| QlinError::RiccatiFailure("R is singular".into()))?;
    let g = b * &r_inv_bt; // B R^-1 B'

    // Hamiltonian [[A, -G], [-Q, -A']]
    let nn = 2 * n;
    let mut h = DMatrix::zeros(nn, nn);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    // Matrix sign iteration with determinant scaling.
    let mut z = h.clone();
    let mut converged = false;
    for _ in 0..120 {
        let lu = z.clone().lu();
        let det: f64 = lu.determinant();
        if !det.is_finite() || det == 0.0 {
            return Err(QlinError::RiccatiFailure(
                "Hamiltonian sign iteration hit a singular iterate (eigenvalues on the imaginary axis?)"
                    .into(),
            ));
        }
        let mu = det.abs().powf(-1.0 / nn as f64);
        let z_inv = lu
            .try_inverse()
            .ok_or_else(|| QlinError::RiccatiFailure("sign iteration: inversion failed".into()))?;
        let z_next = (&z * mu + z_inv / mu) * 0.5;
        let diff = (&z_next - &z).abs().max();
        let scale = z.abs().max().max(1.0);
        z = z_next;
        if diff <= 1e-14 * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(QlinError::RiccatiFailure(
            "matrix sign iteration did not converge; no stabilizing solution".into(),
        ));
    }

    // (S + I) [I; X] = 0: stack the two block equations and least-squares
    // solve for X.
    let s11 = z.view((0, 0), (n, n)).into_owned();
    let s12 = z.view((0, n), (n, n)).into_owned();
    let s21 = z.view((n, 0), (n, n)).into_owned();
    let s22 = z.view((n, n), (n, n)).into_owned();

    let mut lhs = DMatrix::zeros(nn, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&s12);
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(s22 + DMatrix::identity(n, n)));
    let mut rhs = DMatrix::zeros(nn, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(s11 + DMatrix::identity(n, n))));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-s21));

    let svd = lhs.svd(true, true);
    let mut x = svd
        .solve(&rhs, 1e-13)
        .map_err(|e| QlinError::RiccatiFailure(format!("subspace solve failed: {e}")))?;
    x = (&x + x.transpose()) * 0.5;

    let care_residual = |x: &DMatrix<f64>| -> (f64, f64) {
        let xgx = x * &g * x;
        let res = a.transpose() * x + x * a - &xgx + q;
        let scale = q
            .abs()
            .max()
            .max(xgx.abs().max())
            .max((a.transpose() * x).abs().max())
            .max(1.0);
        (res.abs().max(), scale)
    };

    // Kleinman refinement: with X_k stabilizing, solve
    //   (A - G X_k)' X_{k+1} + X_{k+1} (A - G X_k) = -Q - X_k G X_k
    for _ in 0..25 {
        let (res, scale) = care_residual(&x);
        if res <= 1e-12 * scale {
            break;
        }
        let a_cl = a - &g * &x;
        if !is_hurwitz(&a_cl) {
            break;
        }
        let rhs_n = q + &x * &g * &x;
        match solve_lyapunov(&a_cl.transpose(), &rhs_n) {
            Ok(xn) => {
                let delta = (&xn - &x).abs().max();
                x = xn;
                if delta <= 1e-15 * x.abs().max().max(1.0) {
                    break;
                }
            }
            Err(_) => break,
        }
    }

    let (res, scale) = care_residual(&x);
    if res > 1e-9 * scale {
        return Err(QlinError::RiccatiFailure(format!(
            "residual {res:.3e} exceeds tolerance (scale {scale:.3e})"
        )));
    }
    let a_cl = a - &g * &x;
    if !a_cl.is_empty() && max_real_eigenvalue(&a_cl) > STABILITY_MARGIN {
        return Err(QlinError::RiccatiFailure(
            "solution is not stabilizing".into(),
        ));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{cavity_plant, CavityParams};
    use approx::assert_abs_diff_eq;
    use rand::RngCore;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        lo + u * (hi - lo)
    }

    #[test]
    fn hurwitz_basics() {
        assert!(is_hurwitz(&DMatrix::from_row_slice(1, 1, &[-1.0])));
        // pure oscillator: eigenvalues +-i
        assert!(!is_hurwitz(&DMatrix::from_row_slice(
            2,
            2,
            &[0.0, 1.0, -1.0, 0.0]
        )));
        let p = CavityParams {
            k1: 0.3,
            k2: 1.2,
            k3: 2.0,
            k_n: 0.0,
            delta: 11.0,
        };
        assert!(is_hurwitz(cavity_plant(&p).unwrap().a()));
    }

    #[test]
    fn lyapunov_scalar_balance() {
        let a = DMatrix::from_row_slice(1, 1, &[-0.5]);
        let q = DMatrix::from_row_slice(1, 1, &[1.0]);
        let x = solve_lyapunov(&a, &q).unwrap();
        assert_abs_diff_eq!(x[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn lyapunov_diagonal() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let q = DMatrix::identity(2, 2);
        let x = solve_lyapunov(&a, &q).unwrap();
        assert_abs_diff_eq!(x[(0, 0)], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(x[(1, 1)], 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(x[(0, 1)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn lyapunov_random_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let n = 6;
            let mut a = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] = uniform(&mut rng, -1.0, 1.0);
                }
                a[(i, i)] -= 4.0; // diagonally dominant => Hurwitz
            }
            let mut w = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    w[(i, j)] = uniform(&mut rng, -1.0, 1.0);
                }
            }
            let q = &w * w.transpose();
            let x = solve_lyapunov(&a, &q).unwrap();
            let resid = (&a * &x + &x * a.transpose() + &q).abs().max();
            assert!(resid <= 1e-10 * q.abs().max(), "residual {resid}");
        }
    }

    #[test]
    fn lyapunov_rejects_unstable() {
        let a = DMatrix::from_row_slice(1, 1, &[0.5]);
        let q = DMatrix::identity(1, 1);
        assert!(matches!(
            solve_lyapunov(&a, &q),
            Err(QlinError::NoSteadyState { .. })
        ));
    }

    #[test]
    fn care_scalar() {
        // -X^2 + 1 = 0, stabilizing root X = 1 (closed loop A - X = -1).
        let a = DMatrix::from_row_slice(1, 1, &[0.0]);
        let b = DMatrix::from_row_slice(1, 1, &[1.0]);
        let q = DMatrix::identity(1, 1);
        let r = DMatrix::identity(1, 1);
        let x = solve_care(&a, &b, &q, &r).unwrap();
        assert_abs_diff_eq!(x[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn care_zero_cost_gives_zero() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.0, -2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let q = DMatrix::zeros(2, 2);
        let r = DMatrix::identity(1, 1);
        let x = solve_care(&a, &b, &q, &r).unwrap();
        assert!(x.abs().max() < 1e-12);
    }

    #[test]
    fn care_random_stabilizing() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..100 {
            let n = 2 + (trial % 5); // up to 6 states
            let m = 1 + (trial % 2);
            let mut a = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] = uniform(&mut rng, -1.0, 1.0);
                }
            }
            let mut b = DMatrix::zeros(n, m);
            for i in 0..n {
                for j in 0..m {
                    b[(i, j)] = uniform(&mut rng, -1.0, 1.0);
                }
            }
            let mut w = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    w[(i, j)] = uniform(&mut rng, -1.0, 1.0);
                }
            }
            let q = &w * w.transpose() + DMatrix::identity(n, n) * 1e-3;
            let r = DMatrix::identity(m, m);
            let x = solve_care(&a, &b, &q, &r).unwrap();
            let g = &b * b.transpose();
            let a_cl = &a - &g * &x;
            assert!(is_hurwitz(&a_cl), "closed loop must be Hurwitz");
            let res = (a.transpose() * &x + &x * &a - &x * &g * &x + &q).abs().max();
            let scale = q.abs().max().max((&x * &g * &x).abs().max()).max(1.0);
            assert!(res <= 1e-9 * scale, "CARE residual {res}");
        }
    }

    #[test]
    fn transfer_function_limits() {
        // one-port cavity: T(0) = -1 (resonant pi reflection), T(inf) -> D.
        let k = 1.0;
        let a = DMatrix::from_row_slice(2, 2, &[-k / 2.0, 0.0, 0.0, -k / 2.0]);
        let b = DMatrix::identity(2, 2) * -k.sqrt();
        let c = DMatrix::identity(2, 2) * k.sqrt();
        let d = DMatrix::identity(2, 2);
        let g = LinearModel::new(
            a,
            b,
            c,
            d,
            vec![crate::model::ChannelLabel::vacuum("in")],
            vec![crate::model::ChannelLabel::vacuum("out")],
            vec![crate::model::Mode {
                name: "a".into(),
                x_index: 0,
                kind: ModeKind::Quantum,
            }],
        )
        .unwrap();
        let t0 = transfer_function(&g, Complex64::new(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(t0[(0, 0)].re, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t0[(1, 1)].re, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t0[(0, 1)].norm(), 0.0, epsilon = 1e-12);
        let tinf = transfer_function(&g, Complex64::new(1e9, 0.0)).unwrap();
        assert_abs_diff_eq!(tinf[(0, 0)].re, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn transfer_function_resonance_errors() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let g = LinearModel::new(
            a,
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            vec![crate::model::ChannelLabel::vacuum("in")],
            vec![crate::model::ChannelLabel::vacuum("out")],
            vec![crate::model::Mode {
                name: "a".into(),
                x_index: 0,
                kind: ModeKind::Quantum,
            }],
        )
        .unwrap();
        assert!(matches!(
            transfer_function(&g, Complex64::new(0.0, 1.0)),
            Err(QlinError::Resonance(_))
        ));
    }

    #[test]
    fn steady_covariance_uncontrolled_cavity() {
        // Hand-solved: sigma = (1 + 2 k3 kn / k) I, excitation k3 kn / k.
        let p = CavityParams {
            k1: 1.0,
            k2: 1.0,
            k3: 1.0,
            k_n: 1.0,
            delta: 0.0,
        };
        let g = cavity_plant(&p).unwrap();
        let cov = steady_covariance(&g, &NoiseSpec::from_model(&g)).unwrap();
        assert_abs_diff_eq!(cov.sigma[(0, 0)], 5.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cov.sigma[(1, 1)], 5.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cov.excitation(0).unwrap(), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn budget_uncontrolled_cavity() {
        let p = CavityParams {
            k1: 1.0,
            k2: 1.0,
            k3: 1.0,
            k_n: 1.0,
            delta: 0.0,
        };
        let g = cavity_plant(&p).unwrap();
        let budget = noise_budget(&g, &NoiseSpec::from_model(&g), 0).unwrap();
        // shares sum to excitation + zero-point half quantum
        assert_abs_diff_eq!(
            budget.sum_of_shares(),
            budget.total + 0.5,
            epsilon = 1e-12
        );
        // vacuum mirrors carry only floor: zero thermal excess
        assert_abs_diff_eq!(budget.contributions[0].thermal_excess, 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(budget.contributions[1].thermal_excess, 0.0, epsilon = 1e-13);
        // the thermal mirror contributes the whole excitation
        assert_abs_diff_eq!(
            budget.contributions[2].thermal_excess,
            budget.total,
            epsilon = 1e-12
        );
        for c in &budget.contributions {
            assert!(c.share >= -1e-12);
        }
    }
}
