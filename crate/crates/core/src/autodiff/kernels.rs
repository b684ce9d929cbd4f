//! Slice-level numeric kernels shared by the tape and the tape-free
//! inference path, so both produce bit-identical forward values.

/// `out[m×n] = a[m×k] · b[k×n]`. Zero entries of `a` are skipped, which
/// makes one-hot observation inputs cheap.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `out[m×k] += g[m×n] · bᵀ` where `b` is `k×n`.
pub fn matmul_grad_lhs(g: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    // Row updates against bᵀ vectorize; per-row dot products would not.
    let mut bt = vec![0.0; n * k];
    for p in 0..k {
        for j in 0..n {
            bt[j * k + p] = b[p * n + j];
        }
    }
    for i in 0..m {
        let orow = &mut out[i * k..(i + 1) * k];
        for j in 0..n {
            let gv = g[i * n + j];
            if gv == 0.0 {
                continue;
            }
            for (o, &bv) in orow.iter_mut().zip(&bt[j * k..(j + 1) * k]) {
                *o += gv * bv;
            }
        }
    }
}

/// `out[k×n] += aᵀ · g` where `a` is `m×k` and `g` is `m×n`.
pub fn matmul_grad_rhs(a: &[f64], g: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &gv) in orow.iter_mut().zip(grow) {
                *o += av * gv;
            }
        }
    }
}

/// Adds `bias` to every row of `x` in place.
pub fn add_row_bias(x: &mut [f64], bias: &[f64]) {
    for row in x.chunks_mut(bias.len()) {
        for (v, b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

/// Softmax over each contiguous row of width `n`, with max subtraction.
pub fn softmax_rows(x: &[f64], n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    for row in x.chunks(n) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = out.len();
        let mut total = 0.0;
        for &v in row {
            let e = (v - max).exp();
            total += e;
            out.push(e);
        }
        for v in &mut out[start..] {
            *v /= total;
        }
    }
    out
}
