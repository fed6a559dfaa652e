//! Second-order-section IIR filters and zero-phase (forward-backward) application.

use std::f64::consts::PI;

use num_complex::Complex64;

/// One biquad, normalized so that `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Steady-state DF2T state for a constant input of 1.
    fn step_state(&self) -> (f64, [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let gain = (b0 + b1 + b2) / (1.0 + a1 + a2);
        let z2 = b2 - a2 * gain;
        let z1 = b1 - a1 * gain + z2;
        (gain, [z1, z2])
    }

    fn response(&self, z_inv: Complex64) -> Complex64 {
        let num = self.b[0] + self.b[1] * z_inv + self.b[2] * z_inv * z_inv;
        let den = 1.0 + self.a[0] * z_inv + self.a[1] * z_inv * z_inv;
        num / den
    }
}

/// Cascade of biquads.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

impl Sos {
    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64, sample_rate_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / sample_rate_hz;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        self.response(freq_hz, sample_rate_hz).norm()
    }

    /// In-place causal filtering, state initialised to the steady state of a
    /// constant signal equal to `x[0]`.
    pub fn filter_in_place(&self, x: &mut [f64]) {
        let Some(&x0) = x.first() else { return };
        let mut level = x0;
        for s in &self.sections {
            let (gain, [mut z1, mut z2]) = s.step_state();
            z1 *= level;
            z2 *= level;
            level *= gain;
            let [b0, b1, b2] = s.b;
            let [a1, a2] = s.a;
            for v in x.iter_mut() {
                let input = *v;
                let y = b0 * input + z1;
                z1 = b1 * input - a1 * y + z2;
                z2 = b2 * input - a2 * y;
                *v = y;
            }
        }
    }

    /// Forward-backward filtering with odd reflection padding of `pad` samples
    /// on each side (clamped to `len − 1`). The net phase response is zero and
    /// the magnitude response is squared.
    pub fn filtfilt(&self, x: &[f64], pad: usize) -> Vec<f64> {
        self.filtfilt_with(x, pad, EdgeMode::Reflect)
    }

    /// Forward-backward filtering with the given edge extension.
    pub fn filtfilt_with(&self, x: &[f64], pad: usize, mode: EdgeMode) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let (mut buf, left) = match mode {
            EdgeMode::Reflect => extend_reflect(x, pad),
            EdgeMode::Predict { order } => extend_predict(x, pad, order),
        };
        self.filter_in_place(&mut buf);
        buf.reverse();
        self.filter_in_place(&mut buf);
        buf.reverse();
        buf.drain(..left);
        buf.truncate(n);
        buf
    }
}

/// How a finite segment is extended before zero-phase filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeMode {
    /// Odd reflection about the end samples; linear in the input.
    Reflect,
    /// Burg autoregressive extrapolation of the given order. Continues
    /// narrowband content (line noise) coherently, so notch transients stay
    /// outside the segment. Not linear in the input.
    Predict { order: usize },
}

/// Odd reflection padding, `pad` clamped to `len − 1`. Returns the buffer
/// and the number of samples prepended.
pub fn extend_reflect(x: &[f64], pad: usize) -> (Vec<f64>, usize) {
    let n = x.len();
    let pad = pad.min(n.saturating_sub(1));
    let mut buf = Vec::with_capacity(n + 2 * pad);
    let first = x[0];
    let last = x[n - 1];
    buf.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
    buf.extend_from_slice(x);
    buf.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));
    (buf, pad)
}

/// Autoregressive coefficients `a[0] = 1, a[1..=order]` by Burg's method.
/// The resulting predictor is always stable.
pub fn burg(x: &[f64], order: usize) -> Vec<f64> {
    let n = x.len();
    let mut a = vec![1.0];
    let mut f = x.to_vec();
    let mut b = x.to_vec();
    for m in 0..order.min(n.saturating_sub(1)) {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in m + 1..n {
            num += f[i] * b[i - 1];
            den += f[i] * f[i] + b[i - 1] * b[i - 1];
        }
        let k = if den > 0.0 { -2.0 * num / den } else { 0.0 };
        for i in (m + 1..n).rev() {
            let fi = f[i];
            f[i] = fi + k * b[i - 1];
            b[i] = b[i - 1] + k * fi;
        }
        let prev = a.clone();
        a.push(0.0);
        for j in 1..=m + 1 {
            a[j] = prev.get(j).copied().unwrap_or(0.0) + k * prev[m + 1 - j];
        }
    }
    a
}

fn predict_forward(x: &[f64], a: &[f64], count: usize) -> Vec<f64> {
    let p = a.len() - 1;
    let mut hist: Vec<f64> = x.to_vec();
    for _ in 0..count {
        let t = hist.len();
        let v: f64 = (1..=p).map(|j| -a[j] * hist[t - j]).sum();
        hist.push(v);
    }
    hist.split_off(x.len())
}

/// Autoregressive extrapolation by `pad` samples on both sides. Falls back to
/// reflection when the segment is too short to fit the model.
pub fn extend_predict(x: &[f64], pad: usize, order: usize) -> (Vec<f64>, usize) {
    let n = x.len();
    if order == 0 || n < 2 * order + 2 {
        return extend_reflect(x, pad);
    }
    let a = burg(x, order);
    let right = predict_forward(x, &a, pad);
    let reversed: Vec<f64> = x.iter().rev().copied().collect();
    let left = predict_forward(&reversed, &a, pad);
    let mut buf = Vec::with_capacity(n + 2 * pad);
    buf.extend(left.iter().rev());
    buf.extend_from_slice(x);
    buf.extend(right);
    (buf, pad)
}

/// Second-order notch at `freq_hz` whose −3 dB bandwidth is exactly
/// `freq_hz / q` (bandwidth pre-warped through the bilinear map).
pub fn design_notch(freq_hz: f64, q: f64, sample_rate_hz: f64) -> Sos {
    let w0 = 2.0 * PI * freq_hz / sample_rate_hz;
    let bw = w0 / q;
    let gain = 1.0 / (1.0 + (bw / 2.0).tan());
    let cos = w0.cos();
    Sos {
        sections: vec![Biquad {
            b: [gain, -2.0 * gain * cos, gain],
            a: [-2.0 * gain * cos, 2.0 * gain - 1.0],
        }],
    }
}

/// Butterworth band-pass from an `order`-pole analog low-pass prototype,
/// giving `order` biquads (total order `2·order`). Bilinear transform with
/// pre-warped edges; unit gain at the geometric centre frequency.
pub fn design_butterworth_bandpass(order: usize, low_hz: f64, high_hz: f64, sample_rate_hz: f64) -> Sos {
    assert!(order >= 1);
    let fs2 = 2.0 * sample_rate_hz;
    let warp = |f: f64| fs2 * (PI * f / sample_rate_hz).tan();
    let (wl, wh) = (warp(low_hz), warp(high_hz));
    let bw = wh - wl;
    let w0_sq = wl * wh;

    let mut poles: Vec<Complex64> = Vec::with_capacity(2 * order);
    for k in 1..=order {
        let theta = PI * (2 * k + order - 1) as f64 / (2 * order) as f64;
        let p = Complex64::from_polar(1.0, theta);
        let half = p * bw / 2.0;
        let disc = (half * half - w0_sq).sqrt();
        for s in [half + disc, half - disc] {
            poles.push((fs2 + s) / (fs2 - s));
        }
    }

    // pair conjugates; leftover real poles pair with each other
    let mut complex: Vec<Complex64> = poles.iter().copied().filter(|z| z.im > 1e-12).collect();
    complex.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    let mut reals: Vec<f64> = poles.iter().filter(|z| z.im.abs() <= 1e-12).map(|z| z.re).collect();
    reals.sort_by(f64::total_cmp);

    let mut sections: Vec<Biquad> = complex
        .iter()
        .map(|z| Biquad {
            b: [1.0, 0.0, -1.0],
            a: [-2.0 * z.re, z.norm_sqr()],
        })
        .collect();
    for pair in reals.chunks(2) {
        let (r1, r2) = (pair[0], pair.get(1).copied().unwrap_or(0.0));
        sections.push(Biquad {
            b: [1.0, 0.0, -1.0],
            a: [-(r1 + r2), r1 * r2],
        });
    }

    let mut sos = Sos { sections };
    let centre = (wl * wh).sqrt();
    let centre_hz = sample_rate_hz / PI * (centre / fs2).atan();
    let g = sos.magnitude(centre_hz, sample_rate_hz);
    for v in sos.sections[0].b.iter_mut() {
        *v /= g;
    }
    sos
}
