//! Row-major kernels. A weight of shape `[rows, cols]` maps a `rows`-vector to a `cols`-vector.

/// `out += x · W`
#[inline]
pub fn vec_mat_acc(x: &[f64], w: &[f64], cols: usize, out: &mut [f64]) {
    debug_assert_eq!(w.len(), x.len() * cols);
    debug_assert_eq!(out.len(), cols);
    for (xi, row) in x.iter().zip(w.chunks_exact(cols)) {
        if *xi == 0.0 {
            continue;
        }
        for (o, wij) in out.iter_mut().zip(row) {
            *o += xi * wij;
        }
    }
}

/// `dx += W · dy`
#[inline]
pub fn mat_vec_acc(w: &[f64], cols: usize, dy: &[f64], dx: &mut [f64]) {
    debug_assert_eq!(w.len(), dx.len() * cols);
    for (d, row) in dx.iter_mut().zip(w.chunks_exact(cols)) {
        *d += row.iter().zip(dy).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `dW += x ⊗ dy`
#[inline]
pub fn outer_acc(x: &[f64], dy: &[f64], dw: &mut [f64]) {
    let cols = dy.len();
    debug_assert_eq!(dw.len(), x.len() * cols);
    for (xi, row) in x.iter().zip(dw.chunks_exact_mut(cols)) {
        if *xi == 0.0 {
            continue;
        }
        for (g, d) in row.iter_mut().zip(dy) {
            *g += xi * d;
        }
    }
}

#[inline]
pub fn add_assign(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
