//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each exported function returns a flat `Float64Array`; the page knows the
//! layout. The plain Rust versions are kept separate so they can be tested
//! natively.

use otfs_core::channel::{build_dd_channel, generate_trajectory, init_paths, ChannelConfig};
use otfs_core::link::{analytic_fer, noise_variance, EqualizerKind, Precoder};
use otfs_core::modem::Constellation;
use otfs_core::rng::{complex_gaussian, stream};
use wasm_bindgen::prelude::*;

fn demo_channel(m: usize, n: usize, paths: usize, l_max: usize, k_max: f64) -> Result<ChannelConfig, String> {
    let cfg = ChannelConfig { m, n, paths, l_max, k_max, ..ChannelConfig::default() };
    cfg.validate().map_err(|e| e.to_string())?;
    if m * n > 256 {
        return Err(format!("grid {m}x{n} is too large for the demo (max 256 cells)"));
    }
    Ok(cfg)
}

/// `|H_DD|` of one random channel, row-major `MN×MN`.
pub fn heatmap(m: usize, n: usize, paths: usize, l_max: usize, k_max: f64, seed: u64) -> Result<Vec<f64>, String> {
    let cfg = demo_channel(m, n, paths, l_max, k_max)?;
    let p = init_paths(&cfg, &mut stream(seed, 0));
    Ok(build_dd_channel(&p, m, n).data().iter().map(|z| z.norm()).collect())
}

/// Mean analytic FER with the identity precoder, for ZF then MMSE, at each SNR.
/// Output is `[zf_0, …, zf_s, mmse_0, …, mmse_s]`.
pub fn fer_curves(m: usize, n: usize, nmse: f64, snr_db: &[f64], channels: usize, seed: u64) -> Result<Vec<f64>, String> {
    let cfg = ChannelConfig { nmse, ..demo_channel(m, n, 4, 5.min(m.saturating_sub(1)), 2.0f64.min(n as f64 / 2.0))? };
    cfg.validate().map_err(|e| e.to_string())?;
    let mn = cfg.mn();
    let c = Constellation::qpsk();
    let p = Precoder::identity(mn, mn, mn as f64).map_err(|e| e.to_string())?;
    let frames: Vec<_> = (0..channels.max(1))
        .map(|i| generate_trajectory(&cfg, 1, &mut stream(seed, i as u64)).frames.remove(0))
        .collect();
    let mut out = Vec::with_capacity(2 * snr_db.len());
    for kind in [EqualizerKind::Zf, EqualizerKind::Mmse] {
        for &snr in snr_db {
            let s2 = noise_variance(snr, mn as f64, mn);
            let mut total = 0.0;
            for f in &frames {
                total += analytic_fer(&f.h_true, &f.h_est, p.matrix(), s2, kind, &c).map_err(|e| e.to_string())?.fer;
            }
            out.push(total / frames.len() as f64);
        }
    }
    Ok(out)
}

/// Ideal points followed by `count` noisy received samples, as `re, im` pairs.
pub fn scatter(order: usize, snr_db: f64, count: usize, seed: u64) -> Result<Vec<f64>, String> {
    let c = Constellation::new(order).map_err(|e| e.to_string())?;
    let s2 = noise_variance(snr_db, 1.0, 1);
    let mut rng = stream(seed, 0);
    let mut out: Vec<f64> = c.points().iter().flat_map(|z| [z.re, z.im]).collect();
    for i in 0..count {
        let z = c.map(i % order) + complex_gaussian(&mut rng, s2);
        out.extend([z.re, z.im]);
    }
    Ok(out)
}

#[wasm_bindgen(js_name = ddHeatmap)]
pub fn dd_heatmap(m: usize, n: usize, paths: usize, l_max: usize, k_max: f64, seed: u32) -> Result<Vec<f64>, JsValue> {
    heatmap(m, n, paths, l_max, k_max, seed.into()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = ferCurves)]
pub fn fer_curves_js(m: usize, n: usize, nmse: f64, snr_db: Vec<f64>, channels: usize, seed: u32) -> Result<Vec<f64>, JsValue> {
    fer_curves(m, n, nmse, &snr_db, channels, seed.into()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = constellationScatter)]
pub fn constellation_scatter(order: usize, snr_db: f64, count: usize, seed: u32) -> Result<Vec<f64>, JsValue> {
    scatter(order, snr_db, count, seed.into()).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_has_one_entry_per_matrix_cell() {
        let h = heatmap(4, 2, 2, 2, 1.0, 7).unwrap();
        assert_eq!(h.len(), 64);
        assert!(h.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!(heatmap(32, 32, 2, 2, 1.0, 7).is_err());
    }

    #[test]
    fn curves_fall_with_snr_at_low_snr() {
        let f = fer_curves(4, 2, 0.0, &[0.0, 10.0, 20.0], 5, 1).unwrap();
        assert_eq!(f.len(), 6);
        assert!(f[0] > f[2] && f[3] > f[5]);
        assert!(f.iter().zip(&f[3..]).all(|(zf, mmse)| mmse <= &(zf + 1e-12)));
    }

    #[test]
    fn scatter_layout() {
        let s = scatter(16, 30.0, 10, 2).unwrap();
        assert_eq!(s.len(), 2 * (16 + 10));
        assert!(scatter(8, 10.0, 1, 0).is_err());
    }
}
