//! Learnable sinc band-pass filterbank.
//!
//! Each filter is the difference of two windowed ideal low-pass kernels
//! with learnable cutoffs `f1 < f2`:
//!
//! ```text
//! g[n] = (2·f2'·sinc(2π·f2'·n) - 2·f1'·sinc(2π·f1'·n)) · w[n],   f' = f / fs
//! ```
//!
//! for integer offsets `n` in `[-(L-1)/2, (L-1)/2]`, with `w` a Hamming
//! window. Cutoffs are kept in Hz and only normalised by the sample rate
//! while building kernels:
//!
//! ```text
//! f1 = min(f_min + |theta_low|, fs/2 - max(b_min, 1))
//! f2 = min(f1 + b_min + |theta_band|, fs/2)
//! ```
//!
//! so `0 < f1 < f2 <= fs/2` for any parameter values.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::autograd::{Backward, Module, Padding, Param, Tape, Var};
use crate::error::{invalid, Result};
use crate::tensor::{Scalar, Tensor};

/// Lowest band edge used by mel initialisation, in Hz.
pub const MEL_LOW_HZ: f64 = 30.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SincConfig {
    pub filters: usize,
    /// Kernel length in samples; must be odd.
    pub length: usize,
    pub sample_rate: f64,
    pub f_min: f64,
    pub b_min: f64,
}

impl Default for SincConfig {
    fn default() -> Self {
        Self {
            filters: 80,
            length: 251,
            sample_rate: 16_000.0,
            f_min: 50.0,
            b_min: 50.0,
        }
    }
}

impl SincConfig {
    pub fn validate(&self) -> Result<()> {
        if self.length.is_multiple_of(2) {
            return Err(invalid!(
                "sinc filter length must be odd, got {}",
                self.length
            ));
        }
        if self.sample_rate <= 0.0 {
            return Err(invalid!(
                "sample rate must be positive, got {}",
                self.sample_rate
            ));
        }
        if self.filters < 1 {
            return Err(invalid!("sinc layer needs at least one filter"));
        }
        if self.f_min <= 0.0 || self.b_min < 0.0 {
            return Err(invalid!(
                "sinc floors must satisfy f_min > 0, b_min >= 0 (got {}, {})",
                self.f_min,
                self.b_min
            ));
        }
        Ok(())
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Symmetric Hamming window `0.54 - 0.46·cos(2πm/(L-1))`, mirrored so that
/// `w[m] == w[L-1-m]` exactly.
pub fn hamming(length: usize) -> Vec<f64> {
    if length == 1 {
        return vec![1.0];
    }
    let mut w = vec![0.0; length];
    for m in 0..length.div_ceil(2) {
        let v = 0.54 - 0.46 * (2.0 * PI * m as f64 / (length - 1) as f64).cos();
        w[m] = v;
        w[length - 1 - m] = v;
    }
    w
}

/// Band edges equally spaced on the mel scale between [`MEL_LOW_HZ`] and
/// `fs/2 - (f_min + b_min)`, one more edge than filters.
pub fn mel_band_edges(filters: usize, config: &SincConfig) -> Result<Vec<f64>> {
    if filters < 1 {
        return Err(invalid!("mel initialisation needs at least one filter"));
    }
    let high = config.sample_rate / 2.0 - (config.f_min + config.b_min);
    if high <= MEL_LOW_HZ {
        return Err(invalid!(
            "sample rate {} too low for mel initialisation",
            config.sample_rate
        ));
    }
    let (lo, hi) = (hz_to_mel(MEL_LOW_HZ), hz_to_mel(high));
    Ok((0..=filters)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / filters as f64))
        .collect())
}

/// Parameters whose effective cutoffs reproduce the mel band edges.
///
/// Where an edge is below the `f_min`/`b_min` floors the parameter is set to
/// zero, which yields the nearest admissible band.
pub fn init_mel(config: &SincConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let edges = mel_band_edges(config.filters, config)?;
    let mut low = Vec::with_capacity(config.filters);
    let mut band = Vec::with_capacity(config.filters);
    for w in edges.windows(2) {
        let f1 = w[0].max(config.f_min);
        low.push(f1 - config.f_min);
        band.push((w[1] - f1 - config.b_min).max(0.0));
    }
    Ok((low, band))
}

#[derive(Clone, Debug)]
pub struct SincLayer<T: Scalar> {
    pub theta_low: Param<T>,
    pub theta_band: Param<T>,
    config: SincConfig,
    window: Vec<f64>,
}

impl<T: Scalar> SincLayer<T> {
    /// Mel-initialised layer.
    pub fn new(name: &str, config: SincConfig) -> Result<Self> {
        config.validate()?;
        let (low, band) = init_mel(&config)?;
        Self::from_params(name, config, &low, &band)
    }

    pub fn from_params(name: &str, config: SincConfig, low: &[f64], band: &[f64]) -> Result<Self> {
        config.validate()?;
        if low.len() != config.filters || band.len() != config.filters {
            return Err(invalid!(
                "sinc parameters have {} / {} entries, expected {}",
                low.len(),
                band.len(),
                config.filters
            ));
        }
        Ok(Self {
            theta_low: Param::new(
                format!("{name}.theta_low"),
                Tensor::from_f64(vec![low.len()], low)?,
            ),
            theta_band: Param::new(
                format!("{name}.theta_band"),
                Tensor::from_f64(vec![band.len()], band)?,
            ),
            window: hamming(config.length),
            config,
        })
    }

    pub fn config(&self) -> &SincConfig {
        &self.config
    }

    pub fn filters(&self) -> usize {
        self.config.filters
    }

    pub fn length(&self) -> usize {
        self.config.length
    }

    /// Effective `(f1, f2)` in Hz for every filter.
    pub fn cutoffs(&self) -> Vec<(f64, f64)> {
        let c = &self.config;
        self.theta_low
            .value()
            .data()
            .iter()
            .zip(self.theta_band.value().data())
            .map(|(&l, &b)| effective_cutoffs(l.as_f64(), b.as_f64(), c).0)
            .collect()
    }

    /// Kernels `[F, L]`, differentiable with respect to both parameter
    /// vectors.
    pub fn build_filters<'t>(&self, tape: &'t Tape<T>) -> Var<'t, T> {
        let low = tape.param(&self.theta_low);
        let band = tape.param(&self.theta_band);
        let (kernels, rule) = self.kernels_and_rule();
        tape.custom(&[low, band], kernels, Box::new(rule))
    }

    /// Kernel values without a tape.
    pub fn kernels(&self) -> Tensor<T> {
        self.kernels_and_rule().0
    }

    fn kernels_and_rule(&self) -> (Tensor<T>, SincRule) {
        let c = &self.config;
        let (f, l) = (c.filters, c.length);
        let half = (l - 1) / 2;
        let mut data = vec![T::zero(); f * l];
        let mut rule = SincRule {
            bands: Vec::with_capacity(f),
            window: self.window.clone(),
            sample_rate: c.sample_rate,
        };
        let lows = self.theta_low.value().data();
        let bands = self.theta_band.value().data();
        for i in 0..f {
            let ((f1, f2), clamps) = effective_cutoffs(lows[i].as_f64(), bands[i].as_f64(), c);
            let row = &mut data[i * l..(i + 1) * l];
            for n in 0..=half {
                let v = (low_pass(f2, n, c.sample_rate) - low_pass(f1, n, c.sample_rate))
                    * self.window[half + n];
                row[half + n] = T::lit(v);
                row[half - n] = T::lit(v);
            }
            rule.bands.push(BandSave {
                f1,
                f2,
                sign_low: sign(lows[i].as_f64()),
                sign_band: sign(bands[i].as_f64()),
                clamps,
            });
        }
        (Tensor::new(vec![f, l], data).unwrap(), rule)
    }

    /// Valid-mode filtering of a waveform chunk `[T] -> [F, T - L + 1]`.
    ///
    /// Like every convolution here this is a cross-correlation; the kernels
    /// are palindromic so the distinction does not change the output.
    pub fn forward<'t>(&self, tape: &'t Tape<T>, x: Var<'t, T>) -> Result<Var<'t, T>> {
        let len = x.value().len();
        if len < self.length() {
            return Err(invalid!(
                "chunk of {len} samples is shorter than the sinc kernel ({})",
                self.length()
            ));
        }
        let kernels = self
            .build_filters(tape)
            .reshape(vec![self.filters(), 1, self.length()])?;
        x.reshape(vec![1, len])?
            .conv1d(kernels, None, Padding::Valid)
    }

    /// Magnitude response of every kernel at `points` frequencies evenly
    /// spaced over `[0, fs/2]`.
    pub fn magnitude_response(&self, points: usize) -> Vec<Vec<f64>> {
        let kernels = self.kernels();
        let l = self.length();
        let fs = self.config.sample_rate;
        let freqs: Vec<f64> = (0..points)
            .map(|k| k as f64 * fs / 2.0 / (points.max(2) - 1) as f64)
            .collect();
        kernels
            .data()
            .chunks(l)
            .map(|k| {
                let taps: Vec<f64> = k.iter().map(|v| v.as_f64()).collect();
                freqs.iter().map(|&f| dft_magnitude(&taps, f, fs)).collect()
            })
            .collect()
    }
}

/// `|Σ x[i]·e^{-j2π f i / fs}|`
pub fn dft_magnitude(x: &[f64], freq: f64, sample_rate: f64) -> f64 {
    let w = 2.0 * PI * freq / sample_rate;
    let (mut re, mut im) = (0.0, 0.0);
    for (i, &v) in x.iter().enumerate() {
        re += v * (w * i as f64).cos();
        im -= v * (w * i as f64).sin();
    }
    re.hypot(im)
}

impl<T: Scalar> Module<T> for SincLayer<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        f(&self.theta_low);
        f(&self.theta_band);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.theta_low);
        f(&mut self.theta_band);
    }
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Which cutoffs sit on their upper bound (and so carry no gradient).
#[derive(Clone, Copy)]
struct Clamps {
    low: bool,
    high: bool,
}

fn effective_cutoffs(low: f64, band: f64, c: &SincConfig) -> ((f64, f64), Clamps) {
    let nyquist = c.sample_rate / 2.0;
    let f1_max = nyquist - c.b_min.max(1.0);
    let raw1 = c.f_min + low.abs();
    let f1 = raw1.min(f1_max);
    let raw2 = f1 + c.b_min + band.abs();
    let f2 = raw2.min(nyquist);
    (
        (f1, f2),
        Clamps {
            low: raw1 > f1_max,
            high: raw2 > nyquist,
        },
    )
}

/// `2f'·sinc(2πf'n)` with `f' = f/fs`, i.e. `sin(2πf'n)/(πn)` and `2f'` at
/// `n = 0`.
fn low_pass(f: f64, n: usize, fs: f64) -> f64 {
    let fn_ = f / fs;
    if n == 0 {
        2.0 * fn_
    } else {
        let n = n as f64;
        (2.0 * PI * fn_ * n).sin() / (PI * n)
    }
}

/// `d/df [2f'·sinc(2πf'n)] = 2·cos(2πf'n)/fs`
fn low_pass_slope(f: f64, n: usize, fs: f64) -> f64 {
    2.0 * (2.0 * PI * f / fs * n as f64).cos() / fs
}

struct BandSave {
    f1: f64,
    f2: f64,
    sign_low: f64,
    sign_band: f64,
    clamps: Clamps,
}

struct SincRule {
    bands: Vec<BandSave>,
    window: Vec<f64>,
    sample_rate: f64,
}

impl<T: Scalar> Backward<T> for SincRule {
    fn backward(
        &self,
        grad: &Tensor<T>,
        _inputs: &[&Tensor<T>],
        _output: &Tensor<T>,
    ) -> Vec<Option<Tensor<T>>> {
        let l = self.window.len();
        let half = (l - 1) / 2;
        let fs = self.sample_rate;
        let mut g_low = Vec::with_capacity(self.bands.len());
        let mut g_band = Vec::with_capacity(self.bands.len());
        for (row, b) in grad.data().chunks(l).zip(&self.bands) {
            let (mut d1, mut d2) = (0.0, 0.0);
            for (i, &g) in row.iter().enumerate() {
                let n = i.abs_diff(half);
                let gw = g.as_f64() * self.window[i];
                d1 += gw * low_pass_slope(b.f1, n, fs);
                d2 += gw * low_pass_slope(b.f2, n, fs);
            }
            // dK/df2 = +slope(f2), dK/df1 = -slope(f1); f2 follows f1 unless
            // pinned at Nyquist.
            let d2 = if b.clamps.high { 0.0 } else { d2 };
            let d_low = if b.clamps.low { 0.0 } else { d2 - d1 };
            g_low.push(T::lit(d_low * b.sign_low));
            g_band.push(T::lit(d2 * b.sign_band));
        }
        vec![
            Some(Tensor::from_vec(g_low)),
            Some(Tensor::from_vec(g_band)),
        ]
    }
}
