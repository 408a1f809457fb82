use super::{AdError, Result, Tape, Tensor, Var};
use crate::linalg::CMatrix;

/// Complex matrix on the tape, carried as a real/imaginary pair.
#[derive(Debug, Clone, Copy)]
pub struct CVar<'t> {
    pub re: Var<'t>,
    pub im: Var<'t>,
}

impl<'t> CVar<'t> {
    pub fn from_parts(re: Var<'t>, im: Var<'t>) -> Result<Self> {
        let (rs, is) = (re.shape(), im.shape());
        if rs != is || rs.len() != 2 {
            return Err(AdError::Shape {
                op: "complex",
                detail: format!("real part {rs:?}, imaginary part {is:?}"),
            });
        }
        Ok(Self { re, im })
    }

    pub fn constant(tape: &'t Tape, m: &CMatrix) -> Self {
        let (r, c) = m.shape();
        Self {
            re: tape.constant(Tensor::from_raw(vec![r, c], m.real_part())),
            im: tape.constant(Tensor::from_raw(vec![r, c], m.imag_part())),
        }
    }

    pub fn leaf(tape: &'t Tape, m: &CMatrix) -> Self {
        let (r, c) = m.shape();
        Self {
            re: tape.leaf(Tensor::from_raw(vec![r, c], m.real_part())),
            im: tape.leaf(Tensor::from_raw(vec![r, c], m.imag_part())),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        let s = self.re.shape();
        (s[0], s[1])
    }

    pub fn value(&self) -> CMatrix {
        let (r, c) = self.shape();
        let re = self.re.value();
        let im = self.im.value();
        CMatrix::from_parts(r, c, re.data(), im.data())
    }

    /// `(a.re·b.re − a.im·b.im) + j(a.re·b.im + a.im·b.re)`
    pub fn matmul(&self, other: &CVar<'t>) -> Result<Self> {
        let re = self.re.matmul(other.re)?.sub(self.im.matmul(other.im)?)?;
        let im = self.re.matmul(other.im)?.add(self.im.matmul(other.re)?)?;
        Ok(Self { re, im })
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Result<Self> {
        Ok(Self {
            re: self.re.transpose()?,
            im: self.im.transpose()?.neg()?,
        })
    }

    pub fn add(&self, other: &CVar<'t>) -> Result<Self> {
        Ok(Self {
            re: self.re.add(other.re)?,
            im: self.im.add(other.im)?,
        })
    }

    /// `self + c·I` for real `c`.
    pub fn add_real_identity(&self, c: f64) -> Result<Self> {
        let (r, cols) = self.shape();
        if r != cols {
            return Err(AdError::Shape {
                op: "add_real_identity",
                detail: format!("{r}x{cols} is not square"),
            });
        }
        if c == 0.0 {
            return Ok(*self);
        }
        let mut eye = Tensor::identity(r);
        eye.data_mut().iter_mut().for_each(|v| *v *= c);
        let eye = self.re.tape().constant(eye);
        Ok(Self { re: self.re.add(eye)?, im: self.im })
    }

    /// Matrix inverse; the backward pass applies `d(A⁻¹) = −A⁻¹·dA·A⁻¹`.
    pub fn inverse(&self) -> Result<Self> {
        let (n, _) = self.shape();
        let stacked = Var::complex_inverse(self.re, self.im)?;
        Ok(Self {
            re: stacked.slice(0, [n, n])?,
            im: stacked.slice(n * n, [n, n])?,
        })
    }

    /// Elementwise squared magnitude.
    pub fn abs2(&self) -> Result<Var<'t>> {
        self.re.mul(self.re)?.add(self.im.mul(self.im)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian, stream};
    use num_complex::Complex64;

    fn random(r: usize, c: usize, seed: u64) -> CMatrix {
        let mut rng = stream(seed, 0);
        CMatrix::from_fn(r, c, |_, _| complex_gaussian(&mut rng, 1.0))
    }

    #[test]
    fn identity_times_b_is_b() {
        let tape = Tape::new();
        let b = random(3, 3, 1);
        let i = CVar::constant(&tape, &CMatrix::identity(3));
        let out = i.matmul(&CVar::constant(&tape, &b)).unwrap().value();
        assert!(out.max_abs_diff(&b) < 1e-15);
    }

    #[test]
    fn j_identity_squared_is_minus_identity() {
        let tape = Tape::new();
        let ji = CVar::constant(&tape, &CMatrix::identity(4).scale(Complex64::new(0.0, 1.0)));
        let out = ji.matmul(&ji).unwrap().value();
        assert!(out.max_abs_diff(&CMatrix::identity(4).scale((-1.0).into())) < 1e-15);
    }

    #[test]
    fn matmul_matches_scalar_complex_arithmetic() {
        let tape = Tape::new();
        let (a, b) = (random(4, 4, 2), random(4, 4, 3));
        let out = CVar::constant(&tape, &a).matmul(&CVar::constant(&tape, &b)).unwrap().value();
        for i in 0..4 {
            for j in 0..4 {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..4 {
                    s += a[(i, k)] * b[(k, j)];
                }
                assert!((out[(i, j)] - s).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn inverse_on_tape() {
        let tape = Tape::new();
        let a = CMatrix::identity(4).scale(2.0.into());
        let inv = CVar::constant(&tape, &a).inverse().unwrap().value();
        assert!(inv.max_abs_diff(&CMatrix::identity(4).scale(0.5.into())) < 1e-15);
        let d = CMatrix::diag(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]);
        let inv = CVar::constant(&tape, &d).inverse().unwrap().value();
        let want = CMatrix::diag(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0)]);
        assert!(inv.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn singular_inverse_is_reported() {
        let tape = Tape::new();
        let err = CVar::constant(&tape, &CMatrix::zeros(3, 3)).inverse().unwrap_err();
        assert!(matches!(err, AdError::Singular { pivot: 0, .. }), "{err:?}");
    }
}
