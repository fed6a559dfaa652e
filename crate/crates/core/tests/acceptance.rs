//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use lst_ssvep::config::RunConfig;
use lst_ssvep::domain::{Dataset, DomainId};
use lst_ssvep::eval::{
    run_leave_one_subject_out, wilcoxon_signed_rank, DevicePair, EvalReport,
};
use lst_ssvep::io::{decode_dataset, decode_model, encode_dataset, encode_model};
use lst_ssvep::lst::{fit_transform, Scheme};
use lst_ssvep::preprocess::{notch_filter, preprocess_recording, resample, PreprocessConfig, Recording};
use lst_ssvep::synth::{generate_device, generate_subject_dataset, SynthConfig};
use lst_ssvep::trca::{filter_bank_weights, fit_model, fit_trca_filter, DEFAULT_ALPHA_EXPONENT, DEFAULT_ALPHA_OFFSET};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

// ---------------------------------------------------------------- eigen oracle

fn s_and_q(trials: &[DMatrix<f64>]) -> (DMatrix<f64>, DMatrix<f64>) {
    let centered: Vec<DMatrix<f64>> = trials
        .iter()
        .map(|x| {
            let mut y = x.clone();
            for mut row in y.row_iter_mut() {
                let m = row.mean();
                row.add_scalar_mut(-m);
            }
            y
        })
        .collect();
    let nc = trials[0].nrows();
    let (mut s, mut q) = (DMatrix::zeros(nc, nc), DMatrix::zeros(nc, nc));
    for (i, a) in centered.iter().enumerate() {
        for (j, b) in centered.iter().enumerate() {
            if i == j {
                q += a * a.transpose();
            } else {
                s += a * b.transpose();
            }
        }
    }
    (s, q)
}

fn rayleigh(s: &DMatrix<f64>, q: &DMatrix<f64>, u: &DVector<f64>) -> f64 {
    (u.transpose() * s * u)[(0, 0)] / (u.transpose() * q * u)[(0, 0)]
}

/// Grid or random-direction sweep, then local refinement from the best point.
/// The quotient has no local maxima besides the global one, so the refined
/// value is the sphere maximum.
fn sweep_maximum(s: &DMatrix<f64>, q: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let nc = s.nrows();
    let f = |u: &DVector<f64>| rayleigh(s, q, u);
    if nc == 2 {
        let g = |t: f64| f(&DVector::from_vec(vec![t.cos(), t.sin()]));
        let steps = (PI / 1e-3).ceil() as usize;
        let (mut best_t, mut best) = (0.0, f64::NEG_INFINITY);
        for i in 0..steps {
            let t = i as f64 * 1e-3;
            let v = g(t);
            if v > best {
                best = v;
                best_t = t;
            }
        }
        // golden-section search inside the winning grid cell
        let (mut a, mut b) = (best_t - 1e-3, best_t + 1e-3);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..80 {
            let (c, d) = (b - r * (b - a), a + r * (b - a));
            if g(c) > g(d) {
                b = d;
            } else {
                a = c;
            }
        }
        return (best, g((a + b) / 2.0).max(best));
    }
    let mut best_u = DVector::zeros(nc);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..5000 {
        let u = DVector::from_fn(nc, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize();
        let v = f(&u);
        if v > best {
            best = v;
            best_u = u;
        }
    }
    let raw = best;
    let mut step = 0.1;
    while step > 1e-12 {
        let mut moved = false;
        for i in 0..nc {
            for sign in [1.0, -1.0] {
                let mut u = best_u.clone();
                u[i] += sign * step;
                let u = u.normalize();
                let v = f(&u);
                if v > best {
                    best = v;
                    best_u = u;
                    moved = true;
                }
            }
        }
        if !moved {
            step /= 2.0;
        }
    }
    (raw, best)
}

fn eigen_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xe16e);
    let mut worst_refined: f64 = 0.0;
    let mut worst_raw_2ch: f64 = 0.0;
    let mut above_sweep = true;
    for i in 0..200 {
        let nc = [2, 3, 4][i % 3];
        let nt = [2, 3, 5][(i / 3) % 3];
        let shared = gaussian(&mut rng, 1, 64);
        let mix = gaussian(&mut rng, nc, 1);
        let trials: Vec<DMatrix<f64>> = (0..nt).map(|_| &mix * &shared + gaussian(&mut rng, nc, 64)).collect();
        let refs: Vec<&DMatrix<f64>> = trials.iter().collect();
        let fitted = match fit_trca_filter(&refs) {
            Ok(d) => d,
            Err(e) => return outcome(false, format!("instance {i}: {e}")),
        };
        let (s, q) = s_and_q(&trials);
        let value = rayleigh(&s, &q, &fitted.leading_vector);
        let (raw, refined) = sweep_maximum(&s, &q, &mut rng);
        let rel = (value - refined).abs() / refined.abs();
        worst_refined = worst_refined.max(rel);
        if nc == 2 {
            worst_raw_2ch = worst_raw_2ch.max((value - raw).abs() / raw.abs());
        }
        above_sweep &= value >= raw - 1e-12 * raw.abs();
    }
    outcome(
        worst_refined <= 1e-6 && above_sweep,
        format!(
            "200 instances, max rel. gap to refined sweep {worst_refined:.2e} (2-channel raw grid {worst_raw_2ch:.2e}), fitted >= every sweep point: {above_sweep}"
        ),
    )
}

// ---------------------------------------------------------------- LST recovery

fn lst_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1157);
    let (mut clean_worst, mut noisy_worst): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let nc = rng.gen_range(3..=8);
        let nc_src = rng.gen_range(3..=9);
        let a = gaussian(&mut rng, nc, nc_src);
        let source = gaussian(&mut rng, nc_src, 384);
        let clean = &a * &source;
        let p = fit_transform(&clean, &source).expect("fit").p;
        clean_worst = clean_worst.max((&p - &a).norm() / a.norm());
        let sigma = 0.01 * rms(clean.as_slice());
        let noisy = clean.map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal));
        let p = fit_transform(&noisy, &source).expect("fit").p;
        noisy_worst = noisy_worst.max((&p - &a).norm() / a.norm());
    }
    outcome(
        clean_worst <= 1e-6 && noisy_worst <= 0.05,
        format!("100 pairs, worst relative error {clean_worst:.2e} noiseless, {noisy_worst:.2e} at 1% noise"),
    )
}

// ---------------------------------------------------------------- alpha

fn alpha_values() -> Outcome {
    let expected = [1.25, 0.6705, 0.5034, 0.4268, 0.3837];
    let got = filter_bank_weights(5, DEFAULT_ALPHA_EXPONENT, DEFAULT_ALPHA_OFFSET);
    let rounded: Vec<f64> = got.iter().map(|v| (v * 1e4).round() / 1e4).collect();
    let mismatched: Vec<String> = rounded
        .iter()
        .zip(&expected)
        .enumerate()
        .filter(|(_, (r, e))| (*r - *e).abs() > 1e-9)
        .map(|(k, (r, e))| format!("k={} gives {r:.4} ({:.6}) vs {e:.4}", k + 1, got[k]))
        .collect();
    if mismatched.is_empty() {
        outcome(true, format!("{rounded:?}"))
    } else {
        outcome(false, format!("k^-1.25 + 0.25 gives {rounded:?}; {}", mismatched.join("; ")))
    }
}

// ---------------------------------------------------------------- benchmarks

fn seeded(seed: u64) -> RunConfig {
    RunConfig {
        seed: Some(seed),
        ..RunConfig::default()
    }
    .resolved()
}

/// Mean accuracy over subjects for one group of a report.
fn group_mean(rep: &EvalReport, scheme: Scheme, calib: usize, n_sources: Option<usize>) -> f64 {
    let e: Vec<_> = rep
        .summary()
        .into_iter()
        .filter(|s| s.scheme == scheme && s.calib_count == calib && n_sources.map_or(true, |m| s.n_source_subjects == m))
        .collect();
    assert_eq!(e.len(), 1, "one summary group per key");
    e[0].mean_accuracy
}

/// Per-subject accuracy averaged over repeats, in subject order.
fn per_subject(rep: &EvalReport, scheme: Scheme, calib: usize) -> Vec<f64> {
    let mut subjects: Vec<&str> = rep.rows.iter().map(|r| r.target_subject.as_str()).collect();
    subjects.dedup();
    subjects.sort();
    subjects.dedup();
    subjects
        .iter()
        .map(|s| {
            let v: Vec<f64> = rep
                .rows
                .iter()
                .filter(|r| r.target_subject == *s && r.scheme == scheme && r.calib_count == calib)
                .map(|r| r.accuracy)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        })
        .collect()
}

const SEEDS: std::ops::RangeInclusive<u64> = 1..=10;

struct Benchmark {
    reports: Vec<EvalReport>,
    elapsed: Duration,
}

fn default_benchmark() -> Benchmark {
    let t = Instant::now();
    let reports = SEEDS
        .map(|seed| {
            let cfg = seeded(seed);
            let data = generate_device(0, &cfg.synth).expect("synth");
            run_leave_one_subject_out(&data, &cfg.eval, &cfg.eval_options()).expect("evaluate")
        })
        .collect();
    Benchmark {
        reports,
        elapsed: t.elapsed(),
    }
}

fn seed_mean(b: &Benchmark, scheme: Scheme, calib: usize) -> f64 {
    b.reports.iter().map(|r| group_mean(r, scheme, calib, None)).sum::<f64>() / b.reports.len() as f64
}

fn scheme_ordering(b: &Benchmark) -> Outcome {
    let counts = RunConfig::default().eval.calib_trial_counts;
    let base2 = seed_mean(b, Scheme::Baseline, 2);
    let lst2 = seed_mean(b, Scheme::Lst, 2);
    let in_band = (0.60..=0.90).contains(&base2);
    let margin = lst2 - base2 >= 0.03;
    let mut dominance = true;
    let mut table = Vec::new();
    for &c in &counts {
        let (n, l) = (seed_mean(b, Scheme::Naive, c), seed_mean(b, Scheme::Lst, c));
        dominance &= l >= n;
        table.push(format!("c={c}: B {:.3} N {n:.3} L {l:.3}", seed_mean(b, Scheme::Baseline, c)));
    }
    let (mut a, mut z) = (Vec::new(), Vec::new());
    for r in &b.reports {
        a.extend(per_subject(r, Scheme::Lst, 2));
        z.extend(per_subject(r, Scheme::Baseline, 2));
    }
    let p = wilcoxon_signed_rank(&a, &z).map(|w| w.p_value).unwrap_or(1.0);
    let fast = b.elapsed < Duration::from_secs(300);
    outcome(
        in_band && margin && dominance && p < 0.05 && fast,
        format!(
            "{}; LST-BASELINE at 2 = {:+.3}; Wilcoxon p = {p:.2e} over {} (seed, subject) pairs; {:.0} s",
            table.join(", "),
            lst2 - base2,
            a.len(),
            b.elapsed.as_secs_f64()
        ),
    )
}

fn silhouette_improvement(b: &Benchmark) -> Outcome {
    let per_seed: Vec<f64> = b
        .reports
        .iter()
        .map(|r| {
            let d: Vec<f64> = r
                .rows
                .iter()
                .filter(|x| x.scheme == Scheme::Lst && x.calib_count == 2)
                .map(|x| x.silhouette_after.unwrap() - x.silhouette_before.unwrap())
                .collect();
            d.iter().sum::<f64>() / d.len() as f64
        })
        .collect();
    let mean = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
    let positive = per_seed.iter().filter(|d| **d > 0.0).count();
    outcome(
        mean > 0.0 && positive == per_seed.len(),
        format!("mean after-before {mean:+.4}; positive on {positive}/{} seeds", per_seed.len()),
    )
}

fn cross_device() -> Outcome {
    let mut base = vec![0.0; 3];
    let mut lst = vec![0.0; 3];
    let counts = RunConfig::default().eval.calib_trial_counts;
    for seed in SEEDS {
        let mut cfg = seeded(seed);
        cfg.eval.n_repeats = 3;
        cfg.eval.cross_device_pairs = vec![DevicePair {
            target_device: "Q30".into(),
            source_device: "ActiveTwo".into(),
        }];
        let mut data = generate_device(0, &cfg.synth).expect("synth");
        data.extend(generate_device(1, &cfg.synth).expect("synth"));
        let rep = match run_leave_one_subject_out(&data, &cfg.eval, &cfg.eval_options()) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("seed {seed}: {e}")),
        };
        if rep.rows.iter().any(|r| r.scheme == Scheme::Naive) {
            return outcome(false, "NAIVE rows present in a cross-device run");
        }
        for (i, &c) in counts.iter().enumerate() {
            base[i] += group_mean(&rep, Scheme::Baseline, c, None) / 10.0;
            lst[i] += group_mean(&rep, Scheme::Lst, c, None) / 10.0;
        }
    }
    let ok = base.iter().zip(&lst).all(|(b, l)| *l >= b - 0.01);
    let table: Vec<String> = counts
        .iter()
        .zip(base.iter().zip(&lst))
        .map(|(c, (b, l))| format!("c={c}: B {b:.3} L {l:.3}"))
        .collect();
    outcome(ok, format!("Q30 <- ActiveTwo, 10 seeds x 3 repeats: {}", table.join(", ")))
}

fn supplementary_sweep() -> Outcome {
    let ms = [1usize, 3, 5];
    let mut lst = [0.0; 3];
    let mut naive = [0.0; 3];
    for seed in SEEDS {
        let mut cfg = seeded(seed);
        cfg.synth.n_subjects = 6;
        cfg.synth.n_trials_per_stimulus = 8;
        cfg.eval.supplementary_subject_counts = Some(ms.to_vec());
        cfg.eval.supplementary_calib_trials = 5;
        cfg.eval.test_trials_per_stimulus = 3;
        cfg.eval.n_repeats = 3;
        let data = generate_device(0, &cfg.synth).expect("synth");
        let rep = match run_leave_one_subject_out(&data, &cfg.eval, &cfg.eval_options()) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("seed {seed}: {e}")),
        };
        for (i, &m) in ms.iter().enumerate() {
            lst[i] += group_mean(&rep, Scheme::Lst, 5, Some(m)) / 10.0;
            naive[i] += group_mean(&rep, Scheme::Naive, 5, Some(m)) / 10.0;
        }
    }
    let lst_ok = lst.windows(2).all(|w| w[1] >= w[0] - 0.01);
    // NAIVE gains nothing beyond the same tolerance band
    let naive_gain = naive[2] - naive[0];
    let naive_ok = naive_gain <= 0.01;
    outcome(
        lst_ok && naive_ok,
        format!(
            "m=1,3,5: LST {:.3} {:.3} {:.3}, NAIVE {:.3} {:.3} {:.3} (NAIVE gain {naive_gain:+.3})",
            lst[0], lst[1], lst[2], naive[0], naive[1], naive[2]
        ),
    )
}

// ---------------------------------------------------------------- DSP

fn sine(freq: f64, fs: f64, n: usize, phase: f64) -> DMatrix<f64> {
    DMatrix::from_fn(1, n, |_, j| (2.0 * PI * freq * j as f64 / fs + phase).sin())
}

fn dsp_suite() -> Outcome {
    let cfg = PreprocessConfig::default();
    let mut worst_line = f64::NEG_INFINITY;
    let mut worst_keep: f64 = 0.0;
    for k in 0..8 {
        let phase = k as f64 * PI / 4.0;
        let x = sine(60.0, 256.0, 384, phase);
        let y = notch_filter(&x, &cfg).expect("notch");
        worst_line = worst_line.max(20.0 * (rms(y.as_slice()) / rms(x.as_slice())).log10());
        let x = sine(12.0, 256.0, 384, phase);
        let y = notch_filter(&x, &cfg).expect("notch");
        worst_keep = worst_keep.max((rms(y.as_slice()) / rms(x.as_slice()) - 1.0).abs());
    }

    // 256 -> 2048 -> 256 on a band-limited multi-tone signal
    let n = 256 * 4;
    let x = DMatrix::from_fn(1, n, |_, j| {
        let t = j as f64 / 256.0;
        [(9.0, 0.3), (18.0, 1.1), (27.0, 2.0), (40.0, 0.7)]
            .iter()
            .map(|(f, p)| (2.0 * PI * f * t + p).sin())
            .sum::<f64>()
    });
    let up = resample(&x, 256.0, 2048.0).expect("resample");
    let back = resample(&up, 2048.0, 256.0).expect("resample");
    let err: Vec<f64> = (0..n).map(|j| back[(0, j)] - x[(0, j)]).collect();
    let round_trip = rms(&err) / rms(x.as_slice());

    let mut lengths = Vec::new();
    let stimuli = lst_ssvep::domain::standard_stimulus_table()[..3].to_vec();
    for rate in [500.0, 2048.0] {
        for latency in [0.15, 0.17] {
            let samples = (10.0 * rate) as usize;
            let labels: Vec<String> = ["Fz", "Oz", "O1", "O2"].iter().map(|s| s.to_string()).collect();
            let data = DMatrix::from_fn(4, samples, |c, j| (2.0 * PI * (9.0 + c as f64) * j as f64 / rate).sin());
            let events = (0..9).map(|i| (0.3 + 0.97 * i as f64 + 0.0013 * i as f64, i % 3 + 1, i / 3)).collect();
            let rec = Recording {
                data,
                channel_labels: labels,
                sample_rate_hz: rate,
                events,
            };
            let c = PreprocessConfig {
                epoch_start_seconds: latency,
                ..PreprocessConfig::default()
            };
            match preprocess_recording(&rec, DomainId::new("S01", "1", "dev"), "dev", stimuli.clone(), &c) {
                Ok(ds) => lengths.extend(ds.epochs.iter().map(|e| e.n_samples())),
                Err(e) => return outcome(false, format!("{rate} Hz, L={latency}: {e}")),
            }
        }
    }
    let all_384 = !lengths.is_empty() && lengths.iter().all(|&l| l == 384);
    outcome(
        worst_line <= -20.0 && worst_keep <= 0.02 && round_trip <= 0.02 && all_384,
        format!(
            "60 Hz at {worst_line:.1} dB, 12 Hz RMS change {:.2}%, round trip {:.3}% RMS, {} epochs all 384 samples: {all_384}",
            100.0 * worst_keep,
            100.0 * round_trip,
            lengths.len()
        ),
    )
}

// ---------------------------------------------------------------- Wilcoxon

fn enumerated(d: &[f64]) -> f64 {
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let rank: Vec<f64> = abs
        .iter()
        .map(|a| {
            let below = abs.iter().filter(|b| *b < a).count() as f64;
            let tied = abs.iter().filter(|b| *b == a).count() as f64;
            below + (tied + 1.0) / 2.0
        })
        .collect();
    let total: f64 = rank.iter().sum();
    let w_plus: f64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| rank[i]).sum();
    let w = w_plus.min(total - w_plus);
    let hits = (0u32..1 << n)
        .filter(|m| (0..n).filter(|i| m >> i & 1 == 1).map(|i| rank[i]).sum::<f64>() <= w + 1e-9)
        .count();
    (2.0 * hits as f64 / (1u64 << n) as f64).min(1.0)
}

fn wilcoxon_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3117);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for n in 5..=10 {
        for trial in 0..200 {
            // half the cases draw from a coarse grid so ties and zeros occur
            let a: Vec<f64> = (0..n)
                .map(|_| if trial % 2 == 0 { rng.gen_range(-4i32..=4) as f64 / 8.0 } else { rng.gen_range(-1.0..1.0) })
                .collect();
            let b = vec![0.0; n];
            let d: Vec<f64> = a.iter().copied().filter(|v| *v != 0.0).collect();
            if d.is_empty() {
                continue;
            }
            let got = match wilcoxon_signed_rank(&a, &b) {
                Ok(r) => r,
                Err(e) => return outcome(false, format!("n={n}: {e}")),
            };
            worst = worst.max((got.p_value - enumerated(&d)).abs());
            cases += 1;
        }
    }
    outcome(worst <= 1e-12, format!("{cases} cases with n in 5..=10, max |dp| = {worst:.1e}"))
}

// ---------------------------------------------------------------- reproducibility

fn evaluate_twice() -> Result<bool, String> {
    let bin = env!("CARGO_BIN_EXE_lst-ssvep");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"seed": 17, "synth": {"nSubjects": 3}, "eval": {"nRepeats": 2}}"#).map_err(|e| e.to_string())?;
    let data = dir.path().join("data");
    let run = |args: &[&std::ffi::OsStr]| -> Result<(), String> {
        let out = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        if out.status.success() {
            Ok(())
        } else {
            Err(String::from_utf8_lossy(&out.stderr).into_owned())
        }
    };
    run(&["synth".as_ref(), "--config".as_ref(), cfg.as_os_str(), "--out".as_ref(), data.as_os_str()])?;
    let mut reports = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("run{i}"));
        run(&[
            "evaluate".as_ref(),
            "--data-dir".as_ref(),
            data.as_os_str(),
            "--config".as_ref(),
            cfg.as_os_str(),
            "--out".as_ref(),
            out.as_os_str(),
        ])?;
        reports.push(std::fs::read(out.join("report.csv")).map_err(|e| e.to_string())?);
    }
    Ok(reports[0] == reports[1] && !reports[0].is_empty())
}

fn io_lossless() -> Result<bool, String> {
    let cfg = SynthConfig::default();
    let ds: Dataset = generate_subject_dataset(1, 1, &cfg).map_err(|e| e.to_string())?;
    let bytes = encode_dataset(&ds).map_err(|e| e.to_string())?;
    let back = decode_dataset(&bytes).map_err(|e| e.to_string())?;
    let values_ok = ds
        .sorted_epochs()
        .iter()
        .zip(back.sorted_epochs())
        .all(|(a, b)| a.data.iter().zip(b.data.iter()).all(|(x, y)| (*x as f32) as f64 == *y));
    let bytes_ok = encode_dataset(&back).map_err(|e| e.to_string())? == bytes;
    let meta_ok = back.domain == ds.domain && back.montage == ds.montage && back.stimuli == ds.stimuli;

    let model = fit_model(&ds, &cfg_bank(), 0.25).map_err(|e| e.to_string())?;
    let restored = decode_model(&encode_model(&model).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let model_ok = restored.stimuli == model.stimuli
        && restored.filters == model.filters
        && restored.templates == model.templates
        && restored.broadband_templates == model.broadband_templates
        && restored.bank_spec == model.bank_spec
        && restored.alpha() == model.alpha()
        && restored.regularized_cells == model.regularized_cells;
    Ok(values_ok && bytes_ok && meta_ok && model_ok)
}

fn cfg_bank() -> lst_ssvep::preprocess::FilterBankSpec {
    RunConfig::default().filterbank
}

fn reproducibility() -> Outcome {
    match (evaluate_twice(), io_lossless()) {
        (Ok(csv), Ok(io)) => outcome(
            csv && io,
            format!("evaluate CSVs byte-identical: {csv}; dataset and model containers lossless: {io}"),
        ),
        (Err(e), _) | (_, Err(e)) => outcome(false, e.replace('\n', " ")),
    }
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!("{tag} {name}: {} [{:.1} s]", o.detail, t.elapsed().as_secs_f64());
    };
    report("trca-eigen-oracle", &mut || {
        let t = Instant::now();
        let mut o = eigen_oracle();
        o.pass &= t.elapsed() < Duration::from_secs(30);
        o
    });
    report("lst-exact-recovery", &mut || {
        let t = Instant::now();
        let mut o = lst_recovery();
        o.pass &= t.elapsed() < Duration::from_secs(10);
        o
    });
    report("alpha-weights", &mut alpha_values);
    let bench = default_benchmark();
    report("scheme-ordering", &mut || scheme_ordering(&bench));
    report("cross-device", &mut cross_device);
    report("silhouette-improvement", &mut || silhouette_improvement(&bench));
    report("supplementary-sweep", &mut supplementary_sweep);
    report("dsp-suite", &mut dsp_suite);
    report("wilcoxon-exactness", &mut wilcoxon_exactness);
    report("reproducibility", &mut reproducibility);
    println!("{} of 10 criteria failed", failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
