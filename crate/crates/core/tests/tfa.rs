use std::f64::consts::PI;

use gearfuse::tfa::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap()
}

fn column(g: &TfGrid, t: usize) -> Vec<f64> {
    (0..g.rows()).map(|r| g.get(r, t)).collect()
}

/// Direct O(L^2) DFT of one windowed slice, divided by the window norm.
fn naive_frame(x: &[f64], start: usize, w: &[f64]) -> Vec<Complex64> {
    let l = w.len();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    (0..=l / 2)
        .map(|k| {
            (0..l)
                .map(|n| {
                    let phase = -2.0 * PI * (k * n) as f64 / l as f64;
                    Complex64::from_polar(x[start + n] * w[n], phase)
                })
                .sum::<Complex64>()
                / norm
        })
        .collect()
}

#[test]
fn stft_matches_direct_dft() {
    let x = noise(300, 1);
    for (kind, len) in [(WindowKind::Gaussian, 37), (WindowKind::Hanning, 64), (WindowKind::Rectangular, 20)] {
        let w = make_window(kind, len).unwrap();
        let f = stft(&x, &w, 7).unwrap();
        assert_eq!(f.frames.len(), (300 - len) / 7 + 1);
        for (t, frame) in f.frames.iter().enumerate() {
            let expected = naive_frame(&x, t * 7, w.coeffs());
            assert_eq!(frame.len(), len / 2 + 1);
            for (a, b) in frame.iter().zip(&expected) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }
}

#[test]
fn stft_frame_count_example() {
    let w = make_window(WindowKind::Gaussian, 64).unwrap();
    let g = spectrogram(&stft(&noise(1536, 2), &w, 16).unwrap()).unwrap();
    assert_eq!((g.rows(), g.cols()), (33, 93));
}

#[test]
fn parseval_on_rectangular_tiling() {
    for len in [16, 31, 64] {
        let x = noise(len * 12, len as u64);
        let w = make_window(WindowKind::Rectangular, len).unwrap();
        let f = stft(&x, &w, len).unwrap();
        let mut energy = 0.0;
        for frame in &f.frames {
            for (k, c) in frame.iter().enumerate() {
                let mirrored = k == 0 || (len % 2 == 0 && k == len / 2);
                energy += if mirrored { 1.0 } else { 2.0 } * c.norm_sqr();
            }
        }
        let direct: f64 = x.iter().map(|v| v * v).sum();
        assert!((energy - direct).abs() / direct < 1e-9, "L={len}");
    }
}

#[test]
fn gaussian_time_bandwidth_near_bound() {
    let bound = 1.0 / (4.0 * PI);
    for len in [16, 32, 64, 100, 127] {
        let g = make_window(WindowKind::Gaussian, len).unwrap().time_bandwidth_product();
        assert!((g - bound).abs() / bound < 0.05, "L={len}: {g}");
        assert!(g >= bound * (1.0 - 1e-9), "uncertainty bound violated at L={len}");
        let r = make_window(WindowKind::Rectangular, len).unwrap().time_bandwidth_product();
        let h = make_window(WindowKind::Hanning, len).unwrap().time_bandwidth_product();
        assert!(g < r && g < h, "L={len}: gauss {g} rect {r} hann {h}");
    }
}

/// Largest spectrogram value more than `guard` bins from the peak, relative
/// to the peak. Sampled at DFT bins a rectangular window's leakage decays
/// monotonically, so a fixed guard band stands in for "outside the main lobe".
fn max_sidelobe(col: &[f64], guard: usize) -> f64 {
    let p = argmax(col);
    col.iter()
        .enumerate()
        .filter(|(i, _)| i.abs_diff(p) > guard)
        .map(|(_, v)| *v)
        .fold(0.0, f64::max)
        / col[p]
}

#[test]
fn gaussian_leaks_less_than_rectangular() {
    let len = 64;
    let x: Vec<f64> = (0..1024).map(|i| (2.0 * PI * 10.37 / len as f64 * i as f64).sin()).collect();
    let side = |kind| {
        let g = spectrogram(&stft(&x, &make_window(kind, len).unwrap(), 16).unwrap()).unwrap();
        (0..g.cols()).map(|t| max_sidelobe(&column(&g, t), 4)).fold(0.0, f64::max)
    };
    let gauss = side(WindowKind::Gaussian);
    let rect = side(WindowKind::Rectangular);
    assert!(gauss < rect, "gauss {gauss} rect {rect}");
}

#[test]
fn zero_signal_grids() {
    let w = make_window(WindowKind::Gaussian, 32).unwrap();
    assert!(spectrogram(&stft(&[0.0; 256], &w, 16).unwrap()).unwrap().values().iter().all(|&v| v == 0.0));
    assert!(wvd(&[0.0; 64]).unwrap().values().iter().all(|&v| v == 0.0));
}

#[test]
fn wvd_tone_peaks_at_its_frequency() {
    let n = 256;
    for f0 in [0.05, 0.13, 0.3, 0.41] {
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * f0 * i as f64 + 0.3).cos()).collect();
        let g = wvd(&x).unwrap();
        assert_eq!((g.rows(), g.cols()), (n, n));
        let nearest = (f0 / g.freq_step).round() as usize;
        // interior: the middle half, where the lag range is at least n/4
        for t in n / 4..3 * n / 4 {
            assert_eq!(argmax(&column(&g, t)), nearest, "f0 {f0} column {t}");
        }
    }
}

#[test]
fn wvd_two_tone_cross_term_at_mid_frequency() {
    let n = 256;
    let (f1, f2) = (0.1, 0.3);
    let x: Vec<f64> = (0..n)
        .map(|i| (2.0 * PI * f1 * i as f64).cos() + (2.0 * PI * f2 * i as f64).cos())
        .collect();
    let g = wvd(&x).unwrap();
    let bin = |f: f64| (f / g.freq_step).round() as usize;
    let mid = bin((f1 + f2) / 2.0);
    let quiet = bin(0.45);
    let row_mean = |r: usize| (64..192).map(|t| g.get(r, t)).sum::<f64>() / 128.0;
    assert!(row_mean(mid) > 0.5 * row_mean(bin(f1)));
    assert!(row_mean(mid) > 100.0 * row_mean(quiet));
}

#[test]
fn wvd_time_marginal() {
    let x = noise(128, 5);
    let z = analytic_signal(&x);
    let plane = wvd_signed(&x).unwrap();
    for t in 0..plane.cols {
        let marginal: f64 = (0..plane.bins).map(|k| plane.values[k * plane.cols + t]).sum::<f64>() / plane.bins as f64;
        assert!((marginal - z[t].norm_sqr()).abs() < 1e-9);
    }
    // For a tone the analytic envelope is flat at the squared amplitude.
    let a = 1.7;
    let tone: Vec<f64> = (0..512).map(|i| a * (2.0 * PI * 0.0625 * i as f64).cos()).collect();
    let plane = wvd_signed(&tone).unwrap();
    for t in 32..480 {
        let marginal: f64 = (0..plane.bins).map(|k| plane.values[k * plane.cols + t]).sum::<f64>() / plane.bins as f64;
        assert!((marginal - a * a).abs() / (a * a) < 0.05, "t={t} {marginal}");
    }
}

#[test]
fn uniform_schedule_equals_plain_stft() {
    let n = 1000;
    let x = noise(n, 7);
    for len in [16, 33, 64, 127] {
        let hop = 16;
        let g = astft(&x, &WindowSchedule::uniform(len).unwrap(), hop).unwrap();
        // Frame k is centred on sample k*hop of the 16-section padded signal.
        let (_, padded) = astft_layout(n);
        let mut ext = vec![0.0; len / 2];
        ext.extend_from_slice(&x);
        ext.resize(len / 2 + padded + len, 0.0);
        let plain = spectrogram(&stft(&ext, &make_window(WindowKind::Gaussian, len).unwrap(), hop).unwrap()).unwrap();
        assert_eq!(g.rows(), plain.rows());
        assert!(plain.cols() >= g.cols());
        for r in 0..g.rows() {
            for t in 0..g.cols() {
                assert!((g.get(r, t) - plain.get(r, t)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn chirp_energy_matches_plain_stft() {
    let n = 1536;
    let x: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64;
            (2.0 * PI * (0.02 * t + 0.35 * t * t / (2.0 * n as f64))).sin()
        })
        .collect();
    let mut lengths = [0; 16];
    for (i, l) in lengths.iter_mut().enumerate() {
        *l = 16 + i * 7;
    }
    let schedule = WindowSchedule::new(lengths).unwrap();
    let adaptive = astft(&x, &schedule, 16).unwrap().energy();
    let plain = astft(&x, &WindowSchedule::uniform(schedule.max_len()).unwrap(), 16).unwrap().energy();
    assert!((adaptive - plain).abs() / plain < 0.05, "adaptive {adaptive} plain {plain}");
}

#[test]
fn astft_uses_max_bin_count_and_rejects_bad_schedule() {
    let mut l = [20; 16];
    l[9] = 90;
    let g = astft(&noise(1536, 3), &WindowSchedule::new(l).unwrap(), 16).unwrap();
    assert_eq!(g.rows(), 46);
    assert_eq!(g.cols(), 96);
    l[2] = 15;
    assert!(WindowSchedule::new(l).is_err());
}

#[test]
fn csv_round_trip_and_pgm() {
    let dir = tempfile::tempdir().unwrap();
    let g = astft(&noise(256, 4), &WindowSchedule::uniform(32).unwrap(), 16).unwrap();
    let path = dir.path().join("g.csv");
    write_grid_csv(&path, &g).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("rows,cols,time_step,freq_step\n17,16,16,0.03125\n"));
    assert_eq!(read_grid_csv(&path).unwrap(), g);
    let pgm = dir.path().join("g.pgm");
    write_grid_pgm(&pgm, &g).unwrap();
    let bytes = std::fs::read(&pgm).unwrap();
    assert!(bytes.starts_with(b"P5\n16 17\n255\n"));
    assert_eq!(bytes.len(), b"P5\n16 17\n255\n".len() + 16 * 17);
}

#[test]
fn rescale_box_averages_when_shrinking() {
    let v: Vec<f64> = (0..24).map(|i| i as f64).collect();
    let g = TfGrid::new(4, 6, v, 1.0, 0.25).unwrap();
    let r = rescale_grid(&g, 2, 3).unwrap();
    // each output cell is the mean of a 2x2 block
    assert_eq!(r.values(), &[3.5, 5.5, 7.5, 15.5, 17.5, 19.5]);
    assert_eq!(r.freq_step, 0.5);
    // a one-bin line is kept, not skipped
    let mut line = vec![0.0; 96 * 4];
    for c in 0..4 {
        line[37 * 4 + c] = 1.0;
    }
    let thin = TfGrid::new(96, 4, line, 1.0, 1.0).unwrap();
    let small = rescale_grid(&thin, 8, 4).unwrap();
    assert!((small.sum() - thin.sum() / 12.0).abs() < 1e-12);
    assert_eq!(rescale_grid(&g, 4, 6).unwrap(), g);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stft_is_linear(
        x in prop::collection::vec(-5.0f64..5.0, 200),
        y in prop::collection::vec(-5.0f64..5.0, 200),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        len in 16usize..100,
    ) {
        let w = make_window(WindowKind::Gaussian, len).unwrap();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let fm = stft(&mix, &w, 9).unwrap();
        let fx = stft(&x, &w, 9).unwrap();
        let fy = stft(&y, &w, 9).unwrap();
        for t in 0..fm.frames.len() {
            for k in 0..fm.bins() {
                let d = fm.frames[t][k] - (fx.frames[t][k] * a + fy.frames[t][k] * b);
                prop_assert!(d.norm() < 1e-12 * (1.0 + fm.frames[t][k].norm()) * 100.0);
            }
        }
    }

    #[test]
    fn window_invariants(len in 2usize..300, kind in prop_oneof![Just(WindowKind::Gaussian), Just(WindowKind::Hanning), Just(WindowKind::Rectangular)]) {
        let w = make_window(kind, len).unwrap();
        prop_assert_eq!(w.len(), len);
        for i in 0..len {
            prop_assert!(w.coeffs()[i] >= 0.0);
            prop_assert!((w.coeffs()[i] - w.coeffs()[len - 1 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn resample_nonnegative_and_bounded(
        rows in 1usize..12, cols in 1usize..12, tr in 1usize..40, tc in 1usize..40, seed in 0u64..1000,
    ) {
        let v: Vec<f64> = noise(rows * cols, seed).iter().map(|x| x.abs()).collect();
        let g = TfGrid::new(rows, cols, v, 1.0, 1.0).unwrap();
        let r = resample_grid(&g, tr, tc).unwrap();
        let (lo, hi) = g.min_max();
        prop_assert_eq!((r.rows(), r.cols()), (tr, tc));
        for &x in r.values() {
            prop_assert!(x >= 0.0 && x >= lo - 1e-12 && x <= hi + 1e-12);
        }
    }

    #[test]
    fn schedule_bounds_hold(lengths in prop::array::uniform16(0usize..200)) {
        let ok = lengths.iter().all(|l| (16..=127).contains(l));
        prop_assert_eq!(WindowSchedule::new(lengths).is_ok(), ok);
    }
}
