//! Naive reference implementations compared against the fast paths.

use rand::Rng;
use sincfuse::autograd::{Padding, Tape};
use sincfuse::nn::{BiLstm, LstmDirection};
use sincfuse::Tensor;

use super::{random_tensor, rng};

/// Triple loop over output channel, position and kernel tap, with
/// explicit zero padding. No kernel flip.
pub fn naive_conv1d(
    x: &Tensor<f64>,
    w: &Tensor<f64>,
    b: &[f64],
    padding: Padding,
) -> Vec<Vec<f64>> {
    let (in_ch, len) = (x.shape()[0], x.shape()[1]);
    let (out_ch, width) = (w.shape()[0], w.shape()[2]);
    let pad_left = match padding {
        Padding::Valid => 0,
        Padding::Same => (width - 1) / 2,
    };
    let out_len = match padding {
        Padding::Valid => len + 1 - width,
        Padding::Same => len,
    };
    let xv = |c: usize, i: isize| -> f64 {
        if i < 0 || i >= len as isize {
            0.0
        } else {
            x.data()[c * len + i as usize]
        }
    };
    let mut y = vec![vec![0.0; out_len]; out_ch];
    for o in 0..out_ch {
        for t in 0..out_len {
            let mut acc = b[o];
            for c in 0..in_ch {
                for k in 0..width {
                    let i = t as isize + k as isize - pad_left as isize;
                    acc += w.data()[(o * in_ch + c) * width + k] * xv(c, i);
                }
            }
            y[o][t] = acc;
        }
    }
    y
}

/// Max absolute difference between the taped convolution and the oracle
/// over `instances` random shapes.
pub fn conv_equivalence(instances: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for n in 0..instances {
        let in_ch = r.gen_range(1..=4);
        let out_ch = r.gen_range(1..=4);
        let width = r.gen_range(1..=7);
        let len = r.gen_range(width..=width + 20);
        let padding = if n % 2 == 0 {
            Padding::Valid
        } else {
            Padding::Same
        };
        let x = random_tensor(&[in_ch, len], &mut r);
        let w = random_tensor(&[out_ch, in_ch, width], &mut r);
        let b = random_tensor(&[out_ch], &mut r);
        let tape = Tape::new();
        let y = tape
            .constant(x.clone())
            .conv1d(
                tape.constant(w.clone()),
                Some(tape.constant(b.clone())),
                padding,
            )
            .unwrap()
            .value();
        let expect = naive_conv1d(&x, &w, b.data(), padding);
        let out_len = expect[0].len();
        assert_eq!(y.shape(), &[out_ch, out_len]);
        for (o, row) in expect.iter().enumerate() {
            for (t, &e) in row.iter().enumerate() {
                worst = worst.max((y.data()[o * out_len + t] - e).abs());
            }
        }
    }
    worst
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Scalar step-by-step LSTM for one direction; returns `h[t][j]` indexed by
/// original time.
pub fn naive_lstm(dir: &LstmDirection<f64>, x: &[Vec<f64>], reverse: bool) -> Vec<Vec<f64>> {
    let w_ih = dir.w_ih.value().data();
    let w_hh = dir.w_hh.value().data();
    let bias = dir.bias.value().data();
    let d = x[0].len();
    let h_n = dir.hidden();
    let mut h = vec![0.0; h_n];
    let mut c = vec![0.0; h_n];
    let mut out = vec![vec![0.0; h_n]; x.len()];
    let steps: Vec<usize> = if reverse {
        (0..x.len()).rev().collect()
    } else {
        (0..x.len()).collect()
    };
    for t in steps {
        let mut gate = vec![0.0; 4 * h_n];
        for (r, g) in gate.iter_mut().enumerate() {
            let mut acc = bias[r];
            for k in 0..d {
                acc += w_ih[r * d + k] * x[t][k];
            }
            for k in 0..h_n {
                acc += w_hh[r * h_n + k] * h[k];
            }
            *g = acc;
        }
        let mut next_h = vec![0.0; h_n];
        for j in 0..h_n {
            let i = sigmoid(gate[j]);
            let f = sigmoid(gate[h_n + j]);
            let g = gate[2 * h_n + j].tanh();
            let o = sigmoid(gate[3 * h_n + j]);
            c[j] = f * c[j] + i * g;
            next_h[j] = o * c[j].tanh();
        }
        h = next_h;
        out[t] = h.clone();
    }
    out
}

/// Max absolute difference between the BiLSTM and the scalar oracle for
/// every `T <= 4`, `H <= 3`.
pub fn lstm_equivalence(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for steps in 1..=4 {
        for hidden in 1..=3 {
            for input in [1, 2, 3] {
                let net = BiLstm::<f64>::new("l", input, hidden, &mut r);
                let x: Vec<Vec<f64>> = (0..steps)
                    .map(|_| (0..input).map(|_| r.gen_range(-2.0..2.0)).collect())
                    .collect();
                let flat: Vec<f64> = x.iter().flatten().copied().collect();
                let tape = Tape::new();
                let y = net
                    .forward(
                        &tape,
                        tape.constant(Tensor::new(vec![steps, input], flat).unwrap()),
                    )
                    .unwrap()
                    .value();
                let fwd = naive_lstm(&net.forward_dir, &x, false);
                let bwd = naive_lstm(&net.backward_dir, &x, true);
                for t in 0..steps {
                    for j in 0..hidden {
                        worst = worst.max((y.data()[t * 2 * hidden + j] - fwd[t][j]).abs());
                        worst =
                            worst.max((y.data()[t * 2 * hidden + hidden + j] - bwd[t][j]).abs());
                    }
                }
            }
        }
    }
    worst
}
