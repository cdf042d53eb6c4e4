//! Fully connected tanh networks over a flat parameter slice.
//!
//! Layer `l` maps `widths[l]` inputs to `widths[l + 1]` outputs with weights
//! stored row-major (`out x in`) followed by the bias vector. Hidden layers
//! use `tanh`; the output layer is linear.

use rand::Rng;

pub(crate) fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Glorot-uniform weights, zero biases, except for a scalar input layer.
///
/// Glorot scaling leaves a one-input layer almost linear on `[0, 1]`, so
/// every unit would start as the same ramp. Such units instead get
/// `tanh(w (x - c))` with slope `|w|` in `[1, 6]` and center `c` spread over
/// `[0, 1]`.
pub(crate) fn init<R: Rng>(widths: &[usize], params: &mut [f64], rng: &mut R) {
    if widths.len() > 2 && widths[0] == 1 {
        let units = widths[1];
        for o in 0..units {
            let slope = rng.random_range(1.0..6.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
            let center: f64 = rng.random();
            params[o] = slope;
            params[units + o] = -slope * center;
        }
        let rest = param_count(&widths[..2]);
        init(&widths[1..], &mut params[rest..], rng);
        return;
    }
    let mut offset = 0;
    for w in widths.windows(2) {
        let (n_in, n_out) = (w[0], w[1]);
        let limit = (6.0 / (n_in + n_out) as f64).sqrt();
        for p in &mut params[offset..offset + n_in * n_out] {
            *p = rng.random_range(-limit..limit);
        }
        offset += n_in * n_out;
        params[offset..offset + n_out].fill(0.0);
        offset += n_out;
    }
}

/// Activations of every layer for one batch; `acts[0]` is the input.
#[derive(Debug, Default, Clone)]
pub(crate) struct Trace {
    pub acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map_or(&[], Vec::as_slice)
    }
}

pub(crate) fn forward(widths: &[usize], params: &[f64], input: &[f64], batch: usize, trace: &mut Trace) {
    let layers = widths.len() - 1;
    trace.acts.resize_with(widths.len(), Vec::new);
    trace.acts[0].clear();
    trace.acts[0].extend_from_slice(input);
    let mut offset = 0;
    for l in 0..layers {
        let (n_in, n_out) = (widths[l], widths[l + 1]);
        let weights = &params[offset..offset + n_in * n_out];
        let bias = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
        offset += n_in * n_out + n_out;
        let (before, after) = trace.acts.split_at_mut(l + 1);
        let x = &before[l];
        let out = &mut after[0];
        out.clear();
        out.resize(batch * n_out, 0.0);
        let hidden = l + 1 < layers;
        for b in 0..batch {
            let xb = &x[b * n_in..(b + 1) * n_in];
            let ob = &mut out[b * n_out..(b + 1) * n_out];
            for (o, slot) in ob.iter_mut().enumerate() {
                let row = &weights[o * n_in..(o + 1) * n_in];
                let mut z = bias[o];
                for (w, v) in row.iter().zip(xb) {
                    z += w * v;
                }
                *slot = if hidden { z.tanh() } else { z };
            }
        }
    }
}

/// Accumulates `d loss / d params` into `grad` given `d loss / d output`.
pub(crate) fn backward(
    widths: &[usize],
    params: &[f64],
    trace: &Trace,
    out_delta: &[f64],
    batch: usize,
    grad: &mut [f64],
) {
    let layers = widths.len() - 1;
    let mut offsets = Vec::with_capacity(layers);
    let mut offset = 0;
    for w in widths.windows(2) {
        offsets.push(offset);
        offset += w[0] * w[1] + w[1];
    }
    let mut delta = out_delta.to_vec();
    let mut prev = Vec::new();
    for l in (0..layers).rev() {
        let (n_in, n_out) = (widths[l], widths[l + 1]);
        let off = offsets[l];
        let x = &trace.acts[l];
        {
            let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for b in 0..batch {
                let xb = &x[b * n_in..(b + 1) * n_in];
                for o in 0..n_out {
                    let d = delta[b * n_out + o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for (g, v) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(xb) {
                        *g += d * v;
                    }
                }
            }
        }
        if l == 0 {
            break;
        }
        let weights = &params[off..off + n_in * n_out];
        prev.clear();
        prev.resize(batch * n_in, 0.0);
        for b in 0..batch {
            let pb = &mut prev[b * n_in..(b + 1) * n_in];
            for o in 0..n_out {
                let d = delta[b * n_out + o];
                if d == 0.0 {
                    continue;
                }
                for (p, w) in pb.iter_mut().zip(&weights[o * n_in..(o + 1) * n_in]) {
                    *p += d * w;
                }
            }
            // x is tanh output of the previous layer.
            for (p, a) in pb.iter_mut().zip(&x[b * n_in..(b + 1) * n_in]) {
                *p *= 1.0 - a * a;
            }
        }
        std::mem::swap(&mut delta, &mut prev);
    }
}
