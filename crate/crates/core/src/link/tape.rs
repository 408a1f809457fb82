//! The closed-form FER expressed on the autodiff tape, differentiable in the
//! precoder.

use super::{EqualizerKind, LinkError, DENOM_FLOOR, SINR_CAP, SQRT_FLOOR};
use crate::autodiff::{CVar, Var};
use crate::linalg::CMatrix;
use crate::modem::Constellation;

/// FER of one frame as a scalar on the precoder's tape.
pub fn analytic_fer_tape<'t>(
    h_true: &CMatrix,
    h_est: &CMatrix,
    precoder: CVar<'t>,
    noise_var: f64,
    kind: EqualizerKind,
    constellation: &Constellation,
) -> Result<Var<'t>, LinkError> {
    let tape = precoder.re.tape();
    let (mn, k) = precoder.shape();
    if h_true.shape() != (mn, mn) || h_est.shape() != (mn, mn) {
        return Err(LinkError::Shape(format!(
            "channels {:?}/{:?} do not fit a {mn}x{k} precoder",
            h_true.shape(),
            h_est.shape()
        )));
    }
    let hh = CVar::constant(tape, h_est);
    let h = CVar::constant(tape, h_true);

    let a = hh.matmul(&precoder)?;
    let ah = a.adjoint()?;
    let gram = ah.matmul(&a)?.add_real_identity(kind.varsigma() * noise_var)?;
    let e = gram.inverse()?.matmul(&ah)?;
    let g = e.matmul(&h.matmul(&precoder)?)?;

    let g2 = g.abs2()?;
    let signal = g2.diag()?;
    let interference = g2.sum_rows()?.sub(signal)?;
    let noise = e.abs2()?.sum_rows()?.scale(noise_var)?;
    let denom = interference.add(noise)?.clamp(DENOM_FLOOR, f64::INFINITY)?;
    let sinr = signal.mul(denom.recip()?)?.clamp(f64::NEG_INFINITY, SINR_CAP)?;

    let arg = sinr
        .scale(constellation.ser_beta())?
        .clamp(SQRT_FLOOR, f64::INFINITY)?
        .sqrt()?;
    let ser = arg.erfc()?.scale(constellation.ser_alpha())?;
    let survive = ser.neg()?.add_scalar(1.0)?.prod()?;
    Ok(survive.neg()?.add_scalar(1.0)?)
}

/// Mean FER over a batch, each frame with its own precoder.
pub fn batch_mean_fer_tape<'t>(
    frames: &[(&CMatrix, &CMatrix)],
    precoders: &[CVar<'t>],
    noise_var: f64,
    kind: EqualizerKind,
    constellation: &Constellation,
) -> Result<Var<'t>, LinkError> {
    if frames.is_empty() || frames.len() != precoders.len() {
        return Err(LinkError::Shape(format!(
            "{} frames for {} precoders",
            frames.len(),
            precoders.len()
        )));
    }
    let mut total: Option<Var<'t>> = None;
    for ((h, hh), p) in frames.iter().zip(precoders) {
        let f = analytic_fer_tape(h, hh, *p, noise_var, kind, constellation)?;
        total = Some(match total {
            Some(t) => t.add(f)?,
            None => f,
        });
    }
    Ok(total.unwrap().scale(1.0 / frames.len() as f64)?)
}
