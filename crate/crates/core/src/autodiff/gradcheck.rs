//! Central finite-difference gradient checking, used by the test suites.

use rand::seq::index::sample;

use super::{Result, Tape, Tensor, Var};
use crate::rng::stream;

#[derive(Debug, Clone, Copy)]
pub struct Options {
    /// Step is `h_rel · max(|x|, 1)`.
    pub h_rel: f64,
    pub rel_tol: f64,
    pub abs_floor: f64,
    /// Check only this many randomly chosen coordinates (across all inputs).
    pub sample: Option<(usize, u64)>,
}

impl Default for Options {
    fn default() -> Self {
        Self { h_rel: 1e-4, rel_tol: 1e-4, abs_floor: 1e-7, sample: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub input: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub checked: usize,
    /// Largest `|a − n| / max(|a|, |n|)` among coordinates above the floor.
    pub max_rel_error: f64,
    pub failures: Vec<Mismatch>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.failures.is_empty()
    }
}

/// Compares the tape gradient of the scalar `f(inputs)` against central
/// differences.
pub fn check<F>(inputs: &[Tensor], f: F, opts: Options) -> Result<Report>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let vars: Vec<Var<'_>> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let root = f(&tape, &vars)?;
    let grads = tape.backward(root)?;
    let analytic: Vec<Vec<f64>> = vars.iter().map(|v| grads.wrt(*v).data().to_vec()).collect();

    let coords: Vec<(usize, usize)> = inputs
        .iter()
        .enumerate()
        .flat_map(|(i, t)| (0..t.len()).map(move |j| (i, j)))
        .collect();
    let chosen: Vec<(usize, usize)> = match opts.sample {
        Some((n, seed)) if n < coords.len() => {
            let mut rng = stream(seed, 0x6772_6164);
            let mut idx = sample(&mut rng, coords.len(), n).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|k| coords[k]).collect()
        }
        _ => coords,
    };

    let eval = |inputs: &[Tensor]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
        Ok(f(&tape, &vars)?.item())
    };

    let mut report = Report::default();
    let mut work = inputs.to_vec();
    for (i, j) in chosen {
        let x = inputs[i].data()[j];
        let h = opts.h_rel * x.abs().max(1.0);
        work[i].data_mut()[j] = x + h;
        let up = eval(&work)?;
        work[i].data_mut()[j] = x - h;
        let down = eval(&work)?;
        work[i].data_mut()[j] = x;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i][j];
        let diff = (a - numeric).abs();
        let scale = a.abs().max(numeric.abs());
        report.checked += 1;
        if diff > opts.abs_floor {
            report.max_rel_error = report.max_rel_error.max(diff / scale);
        }
        if diff > opts.abs_floor && diff > opts.rel_tol * scale {
            report.failures.push(Mismatch { input: i, index: j, analytic: a, numeric });
        }
    }
    Ok(report)
}
