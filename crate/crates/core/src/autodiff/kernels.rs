//! Raw loops behind the tape operations. Everything is row-major.

/// `C[m,n] = A[m,k] · B[k,n]`
pub(crate) fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let brow = &b[p * n..(p + 1) * n];
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
    c
}

/// `C[m,k] = A[m,n] · B[k,n]ᵀ`
pub(crate) fn matmul_nt(a: &[f64], b: &[f64], m: usize, n: usize, k: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * k];
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            c[i * k + p] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    c
}

/// `C[k,n] = A[m,k]ᵀ · B[m,n]`
pub(crate) fn matmul_tn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; k * n];
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let crow = &mut c[p * n..(p + 1) * n];
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
    c
}

pub(crate) fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            t[j * rows + i] = a[i * cols + j];
        }
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeometry {
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn out_h(&self) -> usize {
        self.h + 2 * self.padding + 1 - self.kh
    }

    pub fn out_w(&self) -> usize {
        self.w + 2 * self.padding + 1 - self.kw
    }

    /// Output positions `o` with `o + k - padding` inside `[0, len)`.
    fn valid(&self, k: usize, len: usize, out_len: usize) -> std::ops::Range<usize> {
        let lo = self.padding.saturating_sub(k);
        let hi = (len + self.padding).saturating_sub(k).min(out_len);
        lo..hi.max(lo)
    }
}

pub(crate) fn conv2d(x: &[f64], w: &[f64], b: &[f64], g: ConvGeometry) -> Vec<f64> {
    let (oh, ow) = (g.out_h(), g.out_w());
    let mut out = vec![0.0; g.c_out * oh * ow];
    for co in 0..g.c_out {
        out[co * oh * ow..(co + 1) * oh * ow].fill(b[co]);
        for ci in 0..g.c_in {
            for ki in 0..g.kh {
                for kj in 0..g.kw {
                    let wv = w[((co * g.c_in + ci) * g.kh + ki) * g.kw + kj];
                    let cols = g.valid(kj, g.w, ow);
                    for r in g.valid(ki, g.h, oh) {
                        let ih = r + ki - g.padding;
                        let orow = &mut out[(co * oh + r) * ow..(co * oh + r + 1) * ow];
                        let xrow = &x[(ci * g.h + ih) * g.w..(ci * g.h + ih + 1) * g.w];
                        for c in cols.clone() {
                            orow[c] += wv * xrow[c + kj - g.padding];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Returns `(dx, dw, db)`; `dx` is skipped when `need_dx` is false.
pub(crate) fn conv2d_backward(
    x: &[f64],
    w: &[f64],
    dout: &[f64],
    g: ConvGeometry,
    need_dx: bool,
) -> (Option<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let mut dx = need_dx.then(|| vec![0.0; x.len()]);
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; g.c_out];
    for co in 0..g.c_out {
        db[co] = dout[co * oh * ow..(co + 1) * oh * ow].iter().sum();
        for ci in 0..g.c_in {
            for ki in 0..g.kh {
                for kj in 0..g.kw {
                    let widx = ((co * g.c_in + ci) * g.kh + ki) * g.kw + kj;
                    let wv = w[widx];
                    let cols = g.valid(kj, g.w, ow);
                    let mut acc = 0.0;
                    for r in g.valid(ki, g.h, oh) {
                        let ih = r + ki - g.padding;
                        let drow = &dout[(co * oh + r) * ow..(co * oh + r + 1) * ow];
                        let xoff = (ci * g.h + ih) * g.w;
                        for c in cols.clone() {
                            let iw = c + kj - g.padding;
                            acc += drow[c] * x[xoff + iw];
                            if let Some(dx) = dx.as_mut() {
                                dx[xoff + iw] += wv * drow[c];
                            }
                        }
                    }
                    dw[widx] = acc;
                }
            }
        }
    }
    (dx, dw, db)
}

/// Max pooling with window = stride = `size`; trailing rows/cols that do not
/// fill a window are dropped. Returns values and flat argmax indices into `x`.
pub(crate) fn max_pool2d(x: &[f64], c: usize, h: usize, w: usize, size: usize) -> (Vec<f64>, Vec<usize>) {
    let (oh, ow) = (h / size, w / size);
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut arg = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for r in 0..oh {
            for col in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = usize::MAX;
                for i in 0..size {
                    for j in 0..size {
                        let idx = (ch * h + r * size + i) * w + col * size + j;
                        if x[idx] > best || best_idx == usize::MAX {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                out.push(best);
                arg.push(best_idx);
            }
        }
    }
    (out, arg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_variants_agree() {
        let a: Vec<f64> = (0..6).map(|v| v as f64 - 2.5).collect(); // 2x3
        let b: Vec<f64> = (0..12).map(|v| (v as f64).sin()).collect(); // 3x4
        let c = matmul(&a, &b, 2, 3, 4);
        let bt = transpose(&b, 3, 4);
        assert_eq!(matmul_nt(&a, &bt, 2, 3, 4), c);
        let at = transpose(&a, 2, 3);
        let c2 = matmul_tn(&at, &b, 3, 2, 4);
        for (x, y) in c.iter().zip(&c2) {
            assert!((x - y).abs() < 1e-15);
        }
    }
}
