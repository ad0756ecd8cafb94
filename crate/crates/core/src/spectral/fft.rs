//! Real-to-complex transforms on the periodic grid.
//!
//! Physical arrays are stored `[z][y][x]` with `x` fastest. Spectral arrays keep
//! the non-negative half of the `x` wavenumbers: `[z][y][kx]`, `kx = 0..=N/2`.
//! The forward transform is normalized by `1/N^n`, so a coefficient is the
//! amplitude of `exp(i k·x)`.

use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct FftPlan {
    n: usize,
    nz: usize,
    half: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl FftPlan {
    pub(crate) fn new(n: usize, nz: usize) -> Self {
        let mut real = RealFftPlanner::<f64>::new();
        let mut cplx = FftPlanner::<f64>::new();
        Self {
            n,
            nz,
            half: n / 2 + 1,
            r2c: real.plan_fft_forward(n),
            c2r: real.plan_fft_inverse(n),
            fwd: cplx.plan_fft_forward(n),
            inv: cplx.plan_fft_inverse(n),
        }
    }

    pub(crate) fn physical_len(&self) -> usize {
        self.nz * self.n * self.n
    }

    pub(crate) fn spectral_len(&self) -> usize {
        self.nz * self.n * self.half
    }

    pub(crate) fn forward(&self, phys: &[f64], spec: &mut [Complex64]) {
        debug_assert_eq!(phys.len(), self.physical_len());
        debug_assert_eq!(spec.len(), self.spectral_len());
        let (n, half) = (self.n, self.half);
        let mut line = self.r2c.make_input_vec();
        let mut scratch = self.r2c.make_scratch_vec();
        for (row_in, row_out) in phys.chunks_exact(n).zip(spec.chunks_exact_mut(half)) {
            line.copy_from_slice(row_in);
            self.r2c
                .process_with_scratch(&mut line, row_out, &mut scratch)
                .expect("r2c length mismatch");
        }
        self.transform_yz(spec, &self.fwd);
        let scale = 1.0 / (self.physical_len() as f64);
        spec.iter_mut().for_each(|c| *c *= scale);
    }

    /// Inverse transform. `spec` is consumed as workspace.
    pub(crate) fn inverse(&self, spec: &mut [Complex64], phys: &mut [f64]) {
        debug_assert_eq!(phys.len(), self.physical_len());
        debug_assert_eq!(spec.len(), self.spectral_len());
        let (n, half) = (self.n, self.half);
        self.transform_yz(spec, &self.inv);
        let mut scratch = self.c2r.make_scratch_vec();
        for (row_in, row_out) in spec.chunks_exact_mut(half).zip(phys.chunks_exact_mut(n)) {
            // The kx = 0 and Nyquist entries of a Hermitian spectrum are real up to
            // roundoff; realfft flags any nonzero imaginary part but still ignores it.
            row_in[0].im = 0.0;
            row_in[half - 1].im = 0.0;
            let _ = self.c2r.process_with_scratch(row_in, row_out, &mut scratch);
        }
    }

    fn transform_yz(&self, spec: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let (n, half, nz) = (self.n, self.half, self.nz);
        const COLS: usize = 32;
        let mut buf = vec![Complex64::default(); (n * half).max(COLS * nz)];
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        for plane in spec.chunks_exact_mut(n * half) {
            transpose(plane, &mut buf[..n * half], n, half);
            fft.process_with_scratch(&mut buf[..n * half], &mut scratch);
            transpose(&buf[..n * half], plane, half, n);
        }
        if nz > 1 {
            // Columns along z, gathered a block at a time to stay in cache.
            let inner = n * half;
            for c0 in (0..inner).step_by(COLS) {
                let w = COLS.min(inner - c0);
                let block = &mut buf[..w * nz];
                for z in 0..nz {
                    let row = &spec[z * inner + c0..z * inner + c0 + w];
                    for (c, v) in row.iter().enumerate() {
                        block[c * nz + z] = *v;
                    }
                }
                fft.process_with_scratch(block, &mut scratch);
                for z in 0..nz {
                    let row = &mut spec[z * inner + c0..z * inner + c0 + w];
                    for (c, v) in row.iter_mut().enumerate() {
                        *v = block[c * nz + z];
                    }
                }
            }
        }
    }
}

/// `dst[c][r] = src[r][c]` for a `rows x cols` row-major `src`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const BLOCK: usize = 16;
    for rb in (0..rows).step_by(BLOCK) {
        for cb in (0..cols).step_by(BLOCK) {
            for r in rb..(rb + BLOCK).min(rows) {
                for c in cb..(cb + BLOCK).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}
