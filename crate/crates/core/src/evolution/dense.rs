//! Dense complex matrices and a scaling-and-squaring exponential.
//!
//! This is the reference path the sparse kernels are checked against. It is
//! `O(n^3)` and capped at `n = 1024`.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAX_DENSE_DIMENSION: usize = 1 << 10;

/// Number of Taylor terms after scaling (degree 20).
const TAYLOR_DEGREE: usize = 20;

/// Row-major complex matrix with split real and imaginary planes.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            re: vec![0.0; n * n],
            im: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.re[i * n + i] = 1.0;
        }
        m
    }

    /// Builds `scale · A` from a real row-major matrix `A`.
    pub fn from_real_scaled(n: usize, data: &[f64], scale: Complex64) -> Self {
        assert_eq!(data.len(), n * n);
        DenseMatrix {
            n,
            re: data.iter().map(|v| v * scale.re).collect(),
            im: data.iter().map(|v| v * scale.im).collect(),
        }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let z = f(i, j);
                m.re[i * n + j] = z.re;
                m.im[i * n + j] = z.im;
            }
        }
        m
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.re[i * self.n + j], self.im[i * self.n + j])
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        DenseMatrix {
            n: self.n,
            re: self
                .re
                .iter()
                .zip(&self.im)
                .map(|(r, i)| r * s.re - i * s.im)
                .collect(),
            im: self
                .re
                .iter()
                .zip(&self.im)
                .map(|(r, i)| r * s.im + i * s.re)
                .collect(),
        }
    }

    pub fn conj_transpose(&self) -> Self {
        let n = self.n;
        DenseMatrix::from_fn(n, |i, j| self.get(j, i).conj())
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.re
            .iter()
            .zip(&self.im)
            .zip(other.re.iter().zip(&other.im))
            .map(|((a, b), (c, d))| Complex64::new(a - c, b - d).norm())
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| self.get(i, j) * x[j])
                    .fold(Complex64::new(0.0, 0.0), |a, b| a + b)
            })
            .collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = DenseMatrix::zeros(n);
        let (a_re, a_im) = (!is_zero(&self.re), !is_zero(&self.im));
        let (b_re, b_im) = (!is_zero(&other.re), !is_zero(&other.im));
        // (A + iA')(B + iB') = AB - A'B' + i(AB' + A'B); zero planes skipped
        if a_re && b_re {
            gemm_acc(n, &self.re, &other.re, &mut out.re, 1.0);
        }
        if a_im && b_im {
            gemm_acc(n, &self.im, &other.im, &mut out.re, -1.0);
        }
        if a_re && b_im {
            gemm_acc(n, &self.re, &other.im, &mut out.im, 1.0);
        }
        if a_im && b_re {
            gemm_acc(n, &self.im, &other.re, &mut out.im, 1.0);
        }
        out
    }
}

fn is_zero(plane: &[f64]) -> bool {
    plane.iter().all(|&v| v == 0.0)
}

/// `c += sign · a b` for square row-major matrices.
fn gemm_acc(n: usize, a: &[f64], b: &[f64], c: &mut [f64], sign: f64) {
    for i in 0..n {
        let c_row = &mut c[i * n..(i + 1) * n];
        for k in 0..n {
            let aik = sign * a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let b_row = &b[k * n..(k + 1) * n];
            for (cv, bv) in c_row.iter_mut().zip(b_row) {
                *cv += aik * bv;
            }
        }
    }
}

/// `e^A` by scaling and squaring: `A/2^s` with `2^s` the smallest power of
/// two bringing the one-norm to at most 1, a degree-20 Taylor polynomial,
/// then `s` squarings.
pub fn dense_expm(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.n;
    if n > MAX_DENSE_DIMENSION {
        return Err(Error::InvalidArgument(format!(
            "dense exponential limited to dimension {MAX_DENSE_DIMENSION}, got {n}"
        )));
    }
    let norm = a.norm_one();
    let mut squarings = 0u32;
    while norm / f64::from(1u32 << squarings.min(31)) > 1.0 {
        squarings += 1;
    }
    let scaled = a.scaled(Complex64::new(1.0 / f64::from(1u32 << squarings), 0.0));

    // Horner: I + S(I + S/2(… (I + S/20)))
    let mut taylor = scaled.scaled(Complex64::new(1.0 / TAYLOR_DEGREE as f64, 0.0));
    add_identity(&mut taylor);
    for k in (1..TAYLOR_DEGREE).rev() {
        taylor = scaled
            .matmul(&taylor)
            .scaled(Complex64::new(1.0 / k as f64, 0.0));
        add_identity(&mut taylor);
    }
    for _ in 0..squarings {
        taylor = taylor.matmul(&taylor);
    }
    Ok(taylor)
}

fn add_identity(m: &mut DenseMatrix) {
    for i in 0..m.n {
        m.re[i * m.n + i] += 1.0;
    }
}
