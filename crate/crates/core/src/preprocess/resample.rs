//! Rational-ratio sample-rate conversion: upsample by `p`, Kaiser-windowed
//! sinc anti-aliasing filter, downsample by `q`, computed in polyphase form.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest numerator or denominator accepted for the reduced ratio.
pub const MAX_RATIO_TERM: u64 = 4096;

/// Filter half-length in units of the slower of the two rates.
const HALF_LENGTH: usize = 10;
const KAISER_BETA: f64 = 5.0;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Reduced fraction `p/q` equal to `to / from`.
pub fn rational_ratio(from_rate_hz: f64, to_rate_hz: f64) -> Result<(u64, u64)> {
    if !(from_rate_hz > 0.0 && to_rate_hz > 0.0) || !from_rate_hz.is_finite() || !to_rate_hz.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sample rates must be positive, got {from_rate_hz} -> {to_rate_hz}"
        )));
    }
    let ratio = to_rate_hz / from_rate_hz;
    if from_rate_hz.fract() == 0.0 && to_rate_hz.fract() == 0.0 && from_rate_hz < 1e15 && to_rate_hz < 1e15 {
        let (a, b) = (to_rate_hz as u64, from_rate_hz as u64);
        let g = gcd(a, b);
        let (p, q) = (a / g, b / g);
        if p > MAX_RATIO_TERM || q > MAX_RATIO_TERM {
            return Err(Error::UnsupportedRatio { p, q, bound: MAX_RATIO_TERM });
        }
        return Ok((p, q));
    }
    // continued-fraction convergents for non-integer rates
    let (mut h0, mut h1, mut k0, mut k1) = (0u64, 1u64, 1u64, 0u64);
    let mut x = ratio;
    loop {
        let a = x.floor();
        if a > 1e12 {
            break;
        }
        let a = a as u64;
        let h2 = a.saturating_mul(h1).saturating_add(h0);
        let k2 = a.saturating_mul(k1).saturating_add(k0);
        if h2 > MAX_RATIO_TERM || k2 > MAX_RATIO_TERM {
            return Err(Error::UnsupportedRatio { p: h2, q: k2, bound: MAX_RATIO_TERM });
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if ((h1 as f64 / k1 as f64) - ratio).abs() <= 1e-12 * ratio {
            return Ok((h1, k1));
        }
        let frac = x - a as f64;
        if frac == 0.0 {
            break;
        }
        x = 1.0 / frac;
    }
    Ok((h1, k1))
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let y = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= y / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Anti-aliasing prototype at the upsampled rate, gain `p` in the passband.
fn design_kernel(p: u64, q: u64) -> Vec<f64> {
    let m = p.max(q) as usize;
    let len = 2 * HALF_LENGTH * m + 1;
    let centre = (len - 1) as f64 / 2.0;
    let cutoff = 0.5 / m as f64; // cycles per upsampled sample
    let norm = bessel_i0(KAISER_BETA);
    (0..len)
        .map(|i| {
            let t = i as f64 - centre;
            let sinc = if t == 0.0 {
                1.0
            } else {
                let a = PI * 2.0 * cutoff * t;
                a.sin() / a
            };
            let r = t / centre;
            let w = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / norm;
            p as f64 * 2.0 * cutoff * sinc * w
        })
        .collect()
}

/// Resamples a single channel by the reduced ratio `p/q`.
fn resample_row(x: &[f64], p: usize, q: usize, h: &[f64]) -> Vec<f64> {
    let n = x.len();
    let out_len = (n * p).div_ceil(q);
    let delay = (h.len() - 1) / 2;
    let mut y = vec![0.0; out_len];
    for (m, out) in y.iter_mut().enumerate() {
        // upsampled index u = m·q + delay; contributions from x[k] at h[u − k·p]
        let u = m * q + delay;
        let k_max = (u / p).min(n.saturating_sub(1));
        let k_min = (u + 1).saturating_sub(h.len()).div_ceil(p);
        let mut acc = 0.0;
        let mut k = k_min;
        while k <= k_max {
            acc += x[k] * h[u - k * p];
            k += 1;
        }
        *out = acc;
    }
    y
}

/// Extends `x` by `pad` samples per side with odd reflection about the end
/// samples, which keeps value and slope continuous. Reflection indices past
/// the far end are clamped.
fn odd_reflect(x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    let last = n - 1;
    let mut out = Vec::with_capacity(n + 2 * pad);
    out.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i.min(last)]));
    out.extend_from_slice(x);
    out.extend((1..=pad).map(|i| 2.0 * x[last] - x[last - i.min(last)]));
    out
}

/// Converts every channel of `signal` from `from_rate_hz` to `to_rate_hz`.
/// Output length is `ceil(samples · p / q)`. Equal rates return an exact copy.
/// Rows are extended by odd reflection so the ends do not ring.
pub fn resample(signal: &DMatrix<f64>, from_rate_hz: f64, to_rate_hz: f64) -> Result<DMatrix<f64>> {
    let (p, q) = rational_ratio(from_rate_hz, to_rate_hz)?;
    if p == q {
        return Ok(signal.clone());
    }
    let (p, q) = (p as usize, q as usize);
    let h = design_kernel(p as u64, q as u64);
    let n = signal.ncols();
    let out_len = (n * p).div_ceil(q);
    let mut out = DMatrix::zeros(signal.nrows(), out_len);
    if n == 0 {
        return Ok(out);
    }
    // a whole number of q-blocks covering the kernel's reach in input samples
    let reach = (HALF_LENGTH * p.max(q)).div_ceil(p);
    let pad = reach.div_ceil(q) * q;
    let skip = pad * p / q;
    let mut row = vec![0.0; n];
    for c in 0..signal.nrows() {
        for (dst, src) in row.iter_mut().zip(signal.row(c).iter()) {
            *dst = *src;
        }
        let y = resample_row(&odd_reflect(&row, pad), p, q, &h);
        for (j, v) in y.into_iter().skip(skip).take(out_len).enumerate() {
            out[(c, j)] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduced_ratios() {
        assert_eq!(rational_ratio(500.0, 256.0).unwrap(), (64, 125));
        assert_eq!(rational_ratio(2048.0, 256.0).unwrap(), (1, 8));
        assert_eq!(rational_ratio(256.0, 256.0).unwrap(), (1, 1));
        assert_eq!(rational_ratio(44100.0, 48000.0).unwrap(), (160, 147));
        assert_eq!(rational_ratio(250.5, 501.0).unwrap(), (2, 1));
    }

    #[test]
    fn unsupported_ratio() {
        assert!(matches!(rational_ratio(10007.0, 256.0), Err(Error::UnsupportedRatio { .. })));
        assert!(matches!(rational_ratio(PI * 100.0, 256.0), Err(Error::UnsupportedRatio { .. })));
        assert!(matches!(rational_ratio(0.0, 256.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn identity_is_bit_exact() {
        let x = DMatrix::from_fn(3, 100, |i, j| ((i * 31 + j * 17) % 13) as f64 * 0.37 - 1.1);
        let y = resample(&x, 256.0, 256.0).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn output_length() {
        let x = DMatrix::zeros(2, 1001);
        assert_eq!(resample(&x, 500.0, 256.0).unwrap().ncols(), (1001 * 64usize).div_ceil(125));
        assert_eq!(resample(&x, 2048.0, 256.0).unwrap().ncols(), 126);
    }

    #[test]
    fn kernel_dc_gain_per_phase_is_unity() {
        let (p, q) = (64u64, 125u64);
        let h = design_kernel(p, q);
        for phase in 0..p as usize {
            let s: f64 = h.iter().skip(phase).step_by(p as usize).sum();
            assert!((s - 1.0).abs() < 5e-3, "phase {phase}: {s}");
        }
    }

    #[test]
    fn alias_band_is_rejected() {
        // 200 Hz at 2048 Hz is above the 128 Hz output Nyquist
        let n = 4096;
        let x = DMatrix::from_fn(1, n, |_, j| (2.0 * PI * 200.0 * j as f64 / 2048.0).sin());
        let y = resample(&x, 2048.0, 256.0).unwrap();
        let mid = y.columns(64, y.ncols() - 128);
        let rms = (mid.iter().map(|v| v * v).sum::<f64>() / mid.len() as f64).sqrt();
        assert!(rms < 0.01, "{rms}");
    }
}
