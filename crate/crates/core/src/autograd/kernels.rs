//! Raw loops behind the heavier tape ops. Summation order is fixed so that
//! every result is reproducible bit for bit.

use crate::tensor::Scalar;

/// Dot product with eight independent accumulators, combined in a fixed
/// order.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (x, y) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for l in 0..8 {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for i in chunks * 8..a.len() {
        tail = tail + a[i] * b[i];
    }
    let s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    s + tail
}

#[inline]
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

/// `out[m, n] = a[m, k] · b[k, n]`
pub fn matmul<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av != T::zero() {
                axpy(av, &b[p * n..(p + 1) * n], row);
            }
        }
    }
    out
}

pub fn transpose<T: Scalar>(a: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); a.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}

/// Geometry of a stride-1 1-D convolution.
#[derive(Clone, Copy, Debug)]
pub struct ConvDims {
    pub in_ch: usize,
    pub out_ch: usize,
    pub width: usize,
    pub len: usize,
    pub pad_left: usize,
    pub out_len: usize,
}

impl ConvDims {
    /// Output positions `t` for which input index `t + k - pad_left` is in
    /// range.
    #[inline]
    fn span(&self, k: usize) -> (usize, usize) {
        let lo = self.pad_left.saturating_sub(k);
        let hi = (self.len + self.pad_left)
            .saturating_sub(k)
            .min(self.out_len);
        (lo, hi.max(lo))
    }
}

/// Cross-correlation: `y[o, t] = b[o] + Σ_c Σ_k w[o, c, k] · x[c, t + k - pad_left]`.
pub fn conv1d<T: Scalar>(x: &[T], w: &[T], bias: Option<&[T]>, d: ConvDims) -> Vec<T> {
    let mut y = vec![T::zero(); d.out_ch * d.out_len];
    for o in 0..d.out_ch {
        let row = &mut y[o * d.out_len..(o + 1) * d.out_len];
        if let Some(b) = bias {
            row.iter_mut().for_each(|v| *v = b[o]);
        }
        for c in 0..d.in_ch {
            let xr = &x[c * d.len..(c + 1) * d.len];
            for k in 0..d.width {
                let wv = w[(o * d.in_ch + c) * d.width + k];
                let (lo, hi) = d.span(k);
                if lo < hi {
                    let off = lo + k - d.pad_left;
                    axpy(wv, &xr[off..off + hi - lo], &mut row[lo..hi]);
                }
            }
        }
    }
    y
}

pub fn conv1d_grad_input<T: Scalar>(g: &[T], w: &[T], d: ConvDims) -> Vec<T> {
    let mut gx = vec![T::zero(); d.in_ch * d.len];
    for o in 0..d.out_ch {
        let gr = &g[o * d.out_len..(o + 1) * d.out_len];
        for c in 0..d.in_ch {
            let xr = &mut gx[c * d.len..(c + 1) * d.len];
            for k in 0..d.width {
                let wv = w[(o * d.in_ch + c) * d.width + k];
                let (lo, hi) = d.span(k);
                if lo < hi {
                    let off = lo + k - d.pad_left;
                    axpy(wv, &gr[lo..hi], &mut xr[off..off + hi - lo]);
                }
            }
        }
    }
    gx
}

pub fn conv1d_grad_weight<T: Scalar>(g: &[T], x: &[T], d: ConvDims) -> Vec<T> {
    let mut gw = vec![T::zero(); d.out_ch * d.in_ch * d.width];
    for o in 0..d.out_ch {
        let gr = &g[o * d.out_len..(o + 1) * d.out_len];
        for c in 0..d.in_ch {
            let xr = &x[c * d.len..(c + 1) * d.len];
            for k in 0..d.width {
                let (lo, hi) = d.span(k);
                if lo < hi {
                    let off = lo + k - d.pad_left;
                    gw[(o * d.in_ch + c) * d.width + k] = dot(&gr[lo..hi], &xr[off..off + hi - lo]);
                }
            }
        }
    }
    gw
}
