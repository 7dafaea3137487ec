//! Dense f64 kernels: convolution via im2col, linear layers, GRU cell.

use super::arch::{ConvSlots, GruSlots, LinearSlots};

pub(crate) fn conv_out_side(side: usize, c: &ConvSlots) -> usize {
    (side + 2 * c.padding - c.kernel) / c.stride + 1
}

/// `[C*K*K][O*O]` patch matrix of a `[C][S][S]` input.
fn im2col(input: &[f64], side: usize, c: &ConvSlots, out_side: usize) -> Vec<f64> {
    let k = c.kernel;
    let oo = out_side * out_side;
    let mut cols = vec![0.0; c.in_ch * k * k * oo];
    for ic in 0..c.in_ch {
        let plane = &input[ic * side * side..(ic + 1) * side * side];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut cols[((ic * k + ky) * k + kx) * oo..][..oo];
                for oy in 0..out_side {
                    let iy = (oy * c.stride + ky) as isize - c.padding as isize;
                    if iy < 0 || iy >= side as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * side..][..side];
                    for ox in 0..out_side {
                        let ix = (ox * c.stride + kx) as isize - c.padding as isize;
                        if ix >= 0 && ix < side as isize {
                            row[oy * out_side + ox] = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im(cols: &[f64], side: usize, c: &ConvSlots, out_side: usize) -> Vec<f64> {
    let k = c.kernel;
    let oo = out_side * out_side;
    let mut out = vec![0.0; c.in_ch * side * side];
    for ic in 0..c.in_ch {
        let plane = &mut out[ic * side * side..(ic + 1) * side * side];
        for ky in 0..k {
            for kx in 0..k {
                let row = &cols[((ic * k + ky) * k + kx) * oo..][..oo];
                for oy in 0..out_side {
                    let iy = (oy * c.stride + ky) as isize - c.padding as isize;
                    if iy < 0 || iy >= side as isize {
                        continue;
                    }
                    for ox in 0..out_side {
                        let ix = (ox * c.stride + kx) as isize - c.padding as isize;
                        if ix >= 0 && ix < side as isize {
                            plane[iy as usize * side + ix as usize] += row[oy * out_side + ox];
                        }
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn conv_forward(params: &[f64], c: &ConvSlots, input: &[f64], side: usize) -> Vec<f64> {
    let os = conv_out_side(side, c);
    let oo = os * os;
    let ckk = c.in_ch * c.kernel * c.kernel;
    let cols = im2col(input, side, c, os);
    let w = &params[c.weight.range()];
    let mut out = vec![0.0; c.out_ch * oo];
    for oc in 0..c.out_ch {
        let dst = &mut out[oc * oo..(oc + 1) * oo];
        if let Some(b) = c.bias {
            dst.fill(params[b.offset + oc]);
        }
        let wrow = &w[oc * ckk..(oc + 1) * ckk];
        for (kk, &wv) in wrow.iter().enumerate() {
            if wv == 0.0 {
                continue;
            }
            let src = &cols[kk * oo..(kk + 1) * oo];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += wv * s;
            }
        }
    }
    out
}

/// Accumulates weight/bias gradients into `grads`; returns the input gradient.
pub(crate) fn conv_backward(
    params: &[f64],
    c: &ConvSlots,
    input: &[f64],
    side: usize,
    d_out: &[f64],
    grads: &mut [f64],
) -> Vec<f64> {
    let os = conv_out_side(side, c);
    let oo = os * os;
    let ckk = c.in_ch * c.kernel * c.kernel;
    let cols = im2col(input, side, c, os);
    let w = &params[c.weight.range()];
    let mut d_cols = vec![0.0; ckk * oo];
    for oc in 0..c.out_ch {
        let g = &d_out[oc * oo..(oc + 1) * oo];
        if let Some(b) = c.bias {
            grads[b.offset + oc] += g.iter().sum::<f64>();
        }
        let gw = &mut grads[c.weight.offset + oc * ckk..][..ckk];
        for kk in 0..ckk {
            let src = &cols[kk * oo..(kk + 1) * oo];
            gw[kk] += src.iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
            let wv = w[oc * ckk + kk];
            if wv != 0.0 {
                for (d, gv) in d_cols[kk * oo..(kk + 1) * oo].iter_mut().zip(g) {
                    *d += wv * gv;
                }
            }
        }
    }
    col2im(&d_cols, side, c, os)
}

pub(crate) fn linear_forward(params: &[f64], l: &LinearSlots, x: &[f64]) -> Vec<f64> {
    let w = &params[l.weight.range()];
    let b = &params[l.bias.range()];
    (0..l.outputs)
        .map(|o| {
            b[o] + w[o * l.inputs..(o + 1) * l.inputs]
                .iter()
                .zip(x)
                .map(|(a, v)| a * v)
                .sum::<f64>()
        })
        .collect()
}

pub(crate) fn linear_backward(params: &[f64], l: &LinearSlots, x: &[f64], dy: &[f64], grads: &mut [f64]) -> Vec<f64> {
    let w = &params[l.weight.range()];
    let mut dx = vec![0.0; l.inputs];
    for (o, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        grads[l.bias.offset + o] += g;
        let gw = &mut grads[l.weight.offset + o * l.inputs..][..l.inputs];
        for (gwi, xi) in gw.iter_mut().zip(x) {
            *gwi += g * xi;
        }
        for (dxi, wi) in dx.iter_mut().zip(&w[o * l.inputs..(o + 1) * l.inputs]) {
            *dxi += g * wi;
        }
    }
    dx
}

/// Product of a `[rows][cols]` block with a vector.
fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        out[r] += w[r * cols..(r + 1) * cols]
            .iter()
            .zip(x)
            .map(|(a, b)| a * b)
            .sum::<f64>();
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct GruCache {
    pub x: Vec<f64>,
    pub h: Vec<f64>,
    pub r: Vec<f64>,
    pub z: Vec<f64>,
    pub n: Vec<f64>,
    /// W_hn h + b_hn
    pub hn: Vec<f64>,
}

pub(crate) fn gru_forward(params: &[f64], g: &GruSlots, x: &[f64], h: &[f64]) -> (Vec<f64>, GruCache) {
    let hs = g.hidden;
    let mut gi = params[g.b_ih.range()].to_vec();
    let mut gh = params[g.b_hh.range()].to_vec();
    matvec(&params[g.w_ih.range()], 3 * hs, g.inputs, x, &mut gi);
    matvec(&params[g.w_hh.range()], 3 * hs, hs, h, &mut gh);
    let mut r = vec![0.0; hs];
    let mut z = vec![0.0; hs];
    let mut n = vec![0.0; hs];
    let mut out = vec![0.0; hs];
    for j in 0..hs {
        r[j] = sigmoid(gi[j] + gh[j]);
        z[j] = sigmoid(gi[hs + j] + gh[hs + j]);
        n[j] = (gi[2 * hs + j] + r[j] * gh[2 * hs + j]).tanh();
        out[j] = (1.0 - z[j]) * n[j] + z[j] * h[j];
    }
    let hn = gh[2 * hs..].to_vec();
    (
        out,
        GruCache {
            x: x.to_vec(),
            h: h.to_vec(),
            r,
            z,
            n,
            hn,
        },
    )
}

/// Returns (dx, dh_prev).
pub(crate) fn gru_backward(
    params: &[f64],
    g: &GruSlots,
    cache: &GruCache,
    dh_out: &[f64],
    grads: &mut [f64],
) -> (Vec<f64>, Vec<f64>) {
    let hs = g.hidden;
    let mut d_gi = vec![0.0; 3 * hs];
    let mut d_gh = vec![0.0; 3 * hs];
    let mut dh = vec![0.0; hs];
    for j in 0..hs {
        let (r, z, n) = (cache.r[j], cache.z[j], cache.n[j]);
        let d = dh_out[j];
        let dn = d * (1.0 - z);
        let dz = d * (cache.h[j] - n);
        dh[j] = d * z;
        let da_n = dn * (1.0 - n * n);
        let dr = da_n * cache.hn[j];
        let da_r = dr * r * (1.0 - r);
        let da_z = dz * z * (1.0 - z);
        d_gi[j] = da_r;
        d_gi[hs + j] = da_z;
        d_gi[2 * hs + j] = da_n;
        d_gh[j] = da_r;
        d_gh[hs + j] = da_z;
        d_gh[2 * hs + j] = da_n * r;
    }
    for (k, v) in d_gi.iter().enumerate() {
        grads[g.b_ih.offset + k] += v;
    }
    for (k, v) in d_gh.iter().enumerate() {
        grads[g.b_hh.offset + k] += v;
    }
    let w_ih = &params[g.w_ih.range()];
    let w_hh = &params[g.w_hh.range()];
    let mut dx = vec![0.0; g.inputs];
    for row in 0..3 * hs {
        let gv = d_gi[row];
        if gv != 0.0 {
            let gw = &mut grads[g.w_ih.offset + row * g.inputs..][..g.inputs];
            for (a, xv) in gw.iter_mut().zip(&cache.x) {
                *a += gv * xv;
            }
            for (a, wv) in dx.iter_mut().zip(&w_ih[row * g.inputs..(row + 1) * g.inputs]) {
                *a += gv * wv;
            }
        }
        let hv = d_gh[row];
        if hv != 0.0 {
            let gw = &mut grads[g.w_hh.offset + row * hs..][..hs];
            for (a, prev) in gw.iter_mut().zip(&cache.h) {
                *a += hv * prev;
            }
            for (a, wv) in dh.iter_mut().zip(&w_hh[row * hs..(row + 1) * hs]) {
                *a += hv * wv;
            }
        }
    }
    (dx, dh)
}

pub(crate) fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Zero the gradient where the pre-activation was not positive.
pub(crate) fn relu_backward(pre: &[f64], grad: &mut [f64]) {
    for (g, &p) in grad.iter_mut().zip(pre) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
}
