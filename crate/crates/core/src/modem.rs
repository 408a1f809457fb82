//! OTFS modulation and Gray-coded QAM.
//!
//! Delay-Doppler grids are `M×N` (delay × Doppler) and are vectorized
//! column-major, so the delay index runs fastest. With rectangular pulses
//! the ISFFT followed by the Heisenberg transform reduces to
//! `s = (F_N^H ⊗ I_M) x`, and the receiver inverts it with `F_N ⊗ I_M`.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::PathState;
use crate::linalg::{dft_matrix, CMatrix};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModemError {
    #[error("unsupported modulation order {0}; expected 4, 16 or 64")]
    UnsupportedOrder(usize),
}

/// `X_TF = F_M · X_DD · F_N^H` on an `M×N` grid.
pub fn isfft(x_dd: &CMatrix) -> CMatrix {
    let (m, n) = x_dd.shape();
    &(&dft_matrix(m) * x_dd) * &dft_matrix(n).adjoint()
}

/// `X_DD = F_M^H · X_TF · F_N`.
pub fn sfft(x_tf: &CMatrix) -> CMatrix {
    let (m, n) = x_tf.shape();
    &(&dft_matrix(m).adjoint() * x_tf) * &dft_matrix(n)
}

/// Heisenberg transform with a rectangular pulse: an `M`-point IDFT of every
/// time slot, read out slot by slot.
pub fn heisenberg(x_tf: &CMatrix) -> Vec<Complex64> {
    let (m, _) = x_tf.shape();
    column_major(&(&dft_matrix(m).adjoint() * x_tf))
}

/// Inverse of [`heisenberg`].
pub fn wigner(r: &[Complex64], m: usize, n: usize) -> CMatrix {
    &dft_matrix(m) * &from_column_major(r, m, n)
}

pub fn column_major(grid: &CMatrix) -> Vec<Complex64> {
    let (m, n) = grid.shape();
    (0..n).flat_map(|j| (0..m).map(move |i| grid[(i, j)])).collect()
}

pub fn from_column_major(v: &[Complex64], m: usize, n: usize) -> CMatrix {
    assert_eq!(v.len(), m * n);
    CMatrix::from_fn(m, n, |i, j| v[j * m + i])
}

/// Applies `F_N^H ⊗ I_M` (`inverse = true`) or `F_N ⊗ I_M` to a vectorized
/// grid without forming the Kronecker product.
fn doppler_dft(x: &[Complex64], m: usize, n: usize, inverse: bool) -> Vec<Complex64> {
    assert_eq!(x.len(), m * n, "vector length must be M*N");
    let sign = if inverse { 1.0 } else { -1.0 };
    let norm = 1.0 / (n as f64).sqrt();
    let twiddle: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(norm, sign * 2.0 * PI * k as f64 / n as f64))
        .collect();
    let mut y = vec![Complex64::new(0.0, 0.0); m * n];
    for a in 0..n {
        for b in 0..n {
            let w = twiddle[(a * b) % n];
            for l in 0..m {
                y[a * m + l] += w * x[b * m + l];
            }
        }
    }
    y
}

/// Transmit-side map from DD symbols to time samples.
pub fn dd_to_time(x: &[Complex64], m: usize, n: usize) -> Vec<Complex64> {
    doppler_dft(x, m, n, true)
}

/// Receive-side map from time samples to DD observations.
pub fn time_to_dd(r: &[Complex64], m: usize, n: usize) -> Vec<Complex64> {
    doppler_dft(r, m, n, false)
}

/// Passes time samples through the multipath channel sample by sample:
/// `r[i] = Σ_p h_p · e^{j2πk̃_p(i-l_p)/MN} · s[(i-l_p) mod MN]`.
pub fn apply_channel(s: &[Complex64], paths: &[PathState]) -> Vec<Complex64> {
    let mn = s.len();
    let mut r = vec![Complex64::new(0.0, 0.0); mn];
    for p in paths {
        for (i, ri) in r.iter_mut().enumerate() {
            let src = (i + mn - p.delay % mn) % mn;
            let phase = 2.0 * PI * p.doppler * (i as f64 - p.delay as f64) / mn as f64;
            *ri += p.gain * Complex64::from_polar(1.0, phase) * s[src];
        }
    }
    r
}

/// Square Gray-coded QAM with unit average energy.
///
/// Symbol index `s` carries `log2(order)` bits, most significant first. The
/// first half of the bits selects the in-phase level and the second half the
/// quadrature level. On each axis, Gray label `g` maps to amplitude
/// `L - 1 - 2·gray⁻¹(g)`, so the all-zero label sits at `(1 + j)/√2·scale`
/// in the first quadrant.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    levels: usize,
    bits_per_axis: u32,
    scale: f64,
    points: Vec<Complex64>,
}

fn gray(a: usize) -> usize {
    a ^ (a >> 1)
}

fn gray_inverse(mut g: usize) -> usize {
    let mut a = g;
    while g > 0 {
        g >>= 1;
        a ^= g;
    }
    a
}

impl Constellation {
    pub fn new(order: usize) -> Result<Self, ModemError> {
        if !matches!(order, 4 | 16 | 64) {
            return Err(ModemError::UnsupportedOrder(order));
        }
        let levels = (order as f64).sqrt().round() as usize;
        let bits_per_axis = levels.trailing_zeros();
        let scale = 1.0 / (2.0 * (levels * levels - 1) as f64 / 3.0).sqrt();
        let amp = |g: usize| (levels as f64 - 1.0 - 2.0 * gray_inverse(g) as f64) * scale;
        let points = (0..order)
            .map(|s| Complex64::new(amp(s >> bits_per_axis), amp(s & (levels - 1))))
            .collect();
        Ok(Self { order, levels, bits_per_axis, scale, points })
    }

    pub fn qpsk() -> Self {
        Self::new(4).unwrap()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> u32 {
        2 * self.bits_per_axis
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn map(&self, symbol: usize) -> Complex64 {
        self.points[symbol]
    }

    /// Index of the nearest constellation point.
    pub fn demap(&self, y: Complex64) -> usize {
        let axis = |v: f64| {
            let a = ((self.levels as f64 - 1.0 - v / self.scale) / 2.0).round();
            gray(a.clamp(0.0, self.levels as f64 - 1.0) as usize)
        };
        (axis(y.re) << self.bits_per_axis) | axis(y.im)
    }

    /// Multiplier of the erfc term in the SER approximation.
    pub fn ser_alpha(&self) -> f64 {
        let m = self.order as f64;
        (2.0 - 2.0 / m.sqrt()) / m.log2()
    }

    /// SINR scaling inside the erfc term of the SER approximation.
    pub fn ser_beta(&self) -> f64 {
        let m = self.order as f64;
        3.0 / (2.0 * m.sqrt() - 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian, stream};

    fn random_vec(len: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = stream(seed, 0);
        (0..len).map(|_| complex_gaussian(&mut rng, 1.0)).collect()
    }

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn isfft_sfft_round_trip() {
        let x = from_column_major(&random_vec(32, 1), 8, 4);
        assert!(sfft(&isfft(&x)).max_abs_diff(&x) < 1e-12);
    }

    #[test]
    fn grid_pipeline_matches_kronecker_shortcut() {
        let (m, n) = (8, 4);
        let x = random_vec(m * n, 2);
        let s_grid = heisenberg(&isfft(&from_column_major(&x, m, n)));
        let s_kron = dft_matrix(n).adjoint().kron(&CMatrix::identity(m)).mul_vec(&x);
        assert!(max_diff(&s_grid, &s_kron) < 1e-12);
        assert!(max_diff(&dd_to_time(&x, m, n), &s_kron) < 1e-12);
        let back = column_major(&sfft(&wigner(&s_grid, m, n)));
        assert!(max_diff(&back, &x) < 1e-12);
    }

    #[test]
    fn transforms_preserve_energy() {
        let x = random_vec(24, 3);
        let e: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let s = dd_to_time(&x, 6, 4);
        assert!((s.iter().map(|z| z.norm_sqr()).sum::<f64>() - e).abs() < 1e-12);
        assert!(max_diff(&time_to_dd(&s, 6, 4), &x) < 1e-12);
    }

    #[test]
    fn static_unit_path_is_transparent() {
        let x = random_vec(32, 4);
        let p = [PathState { delay: 0, doppler: 0.0, gain: Complex64::new(1.0, 0.0) }];
        assert_eq!(apply_channel(&x, &p), x);
    }

    #[test]
    fn qpsk_labels() {
        let c = Constellation::qpsk();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let want = [
            Complex64::new(h, h),
            Complex64::new(h, -h),
            Complex64::new(-h, h),
            Complex64::new(-h, -h),
        ];
        assert!(max_diff(c.points(), &want) < 1e-15);
    }

    #[test]
    fn unit_energy_and_gray_neighbours() {
        for order in [4, 16, 64] {
            let c = Constellation::new(order).unwrap();
            let e: f64 = c.points().iter().map(|z| z.norm_sqr()).sum::<f64>() / order as f64;
            assert!((e - 1.0).abs() < 1e-12, "order {order}: {e}");
            let dmin = 2.0 * c.scale;
            for (i, a) in c.points().iter().enumerate() {
                for (j, b) in c.points().iter().enumerate() {
                    if ((a - b).norm() - dmin).abs() < 1e-9 {
                        assert_eq!((i ^ j).count_ones(), 1, "order {order}: {i} vs {j}");
                    }
                }
            }
        }
    }

    #[test]
    fn demap_inverts_map_and_handles_outliers() {
        for order in [4, 16, 64] {
            let c = Constellation::new(order).unwrap();
            for s in 0..order {
                assert_eq!(c.demap(c.map(s)), s);
                assert_eq!(c.demap(c.map(s) * 1.02 + Complex64::new(0.01, -0.01)), s);
            }
            let far = Complex64::new(100.0, -100.0);
            let nearest = (0..order)
                .min_by(|&a, &b| (c.map(a) - far).norm().total_cmp(&(c.map(b) - far).norm()))
                .unwrap();
            assert_eq!(c.demap(far), nearest);
        }
    }

    #[test]
    fn rejects_unsupported_orders() {
        assert_eq!(Constellation::new(8), Err(ModemError::UnsupportedOrder(8)));
    }

    #[test]
    fn ser_constants() {
        let q = Constellation::qpsk();
        assert!((q.ser_alpha() - 0.5).abs() < 1e-15);
        assert!((q.ser_beta() - 1.5).abs() < 1e-15);
        let c16 = Constellation::new(16).unwrap();
        assert!((c16.ser_alpha() - 0.375).abs() < 1e-15);
        assert!((c16.ser_beta() - 0.5).abs() < 1e-15);
    }
}
