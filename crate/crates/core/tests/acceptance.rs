//! Acceptance suite: one PASS/FAIL line per criterion on stderr, then a
//! single assertion that all of them passed.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use gearfuse::dtcwt::{self, DtcwtCoeffs};
use gearfuse::fusion::{
    build_model, preprocess, train, FeatureSet, ModelConfig, PreprocessConfig, TrainConfig, Variant,
};
use gearfuse::nn::{
    conv2d, deconv2d, grad_check, BatchNorm2d, CenterCrop, Conv2d, ConvSpec, ConvTranspose2d, GlobalAvgPool, Layer,
    MaxPool2d, Param, Relu, ResidualBlock, Sequential, Tensor4,
};
use gearfuse::pso::{self, SwarmConfig};
use gearfuse::signal::{build_dataset, DatasetSpec, FaultKind};
use gearfuse::tfa::{self, make_window, WindowKind, WindowSchedule, MAX_WINDOW, MIN_WINDOW};
use rand::Rng;
use rand_distr::StandardNormal;

mod common;
use common::{naive_conv, randn, rng, scatter_deconv, small_ints};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Criteria selected by `GEARFUSE_ACCEPTANCE` (comma list, e.g. `1,2,9`);
/// all of them when unset.
fn selected(n: usize) -> bool {
    match std::env::var("GEARFUSE_ACCEPTANCE") {
        Ok(list) => list.split(',').any(|s| s.trim().parse() == Ok(n)),
        Err(_) => true,
    }
}

/// Runs one criterion, prints its line (bypassing test output capture) and
/// returns whether it passed.
fn criterion(n: usize, name: &str, limit_s: Option<f64>, f: impl FnOnce() -> Outcome) -> bool {
    if !selected(n) {
        let _ = writeln!(std::io::stderr(), "acceptance criterion {n} ({name}): SKIP (not selected)");
        return true;
    }
    let t = Instant::now();
    let mut out = f();
    let secs = t.elapsed().as_secs_f64();
    if let (Ok(detail), Some(limit)) = (&out, limit_s) {
        if secs > limit {
            out = Err(format!("{detail}; took {secs:.1}s, limit {limit:.0}s"));
        }
    }
    let line = match &out {
        Ok(d) => format!("acceptance criterion {n} ({name}): PASS [{secs:.1}s] {d}\n"),
        Err(d) => format!("acceptance criterion {n} ({name}): FAIL [{secs:.1}s] {d}\n"),
    };
    let _ = std::io::stderr().write_all(line.as_bytes());
    out.is_ok()
}

// 1 -------------------------------------------------------------------------

fn formula_oracles() -> Outcome {
    let mut r = rng(1);
    let mut cases = 0;
    for k in [1usize, 3, 5, 7] {
        for d in [1usize, 2, 4] {
            for s in [1usize, 2] {
                for h in 8..=64 {
                    let e = k + (k - 1) * (d - 1);
                    let spec = ConvSpec::new(1, 1, k).dilation(d).stride(s);
                    let x = Tensor4::new([1, 1, h, h], small_ints(h * h, &mut r)).unwrap();
                    let w = small_ints(k * k, &mut r);
                    if e > h {
                        ensure(conv2d(&x, &w, None, &spec).is_err(), || format!("k={k} r={d} h={h} accepted"))?;
                        continue;
                    }
                    let got = conv2d(&x, &w, None, &spec).map_err(|e| e.to_string())?;
                    let size = ((h - e) as f64 / s as f64 + 1.0).ceil() as usize;
                    ensure(got.dims() == [1, 1, size, size], || format!("size k={k} r={d} s={s} h={h}"))?;
                    ensure(got == naive_conv(&x, &w, &spec), || format!("values k={k} r={d} s={s} h={h}"))?;
                    cases += 1;
                }
            }
        }
    }
    for spec in [
        ConvSpec::new(3, 4, 3).stride(2).dilation(2).padding(1),
        ConvSpec::new(2, 5, 5).padding(2),
        ConvSpec::new(2, 3, 3).kernel_hw(3, 1).stride(2),
    ] {
        let x = Tensor4::new([2, spec.in_channels, 11, 13], small_ints(2 * spec.in_channels * 143, &mut r)).unwrap();
        let w = small_ints(spec.weight_len(), &mut r);
        ensure(conv2d(&x, &w, None, &spec).unwrap() == naive_conv(&x, &w, &spec), || format!("{spec:?}"))?;
        cases += 1;
    }
    for (h, s, k, p, size) in [(32usize, 2usize, 4usize, 0usize, 66usize), (7, 2, 3, 0, 15), (5, 3, 4, 1, 14), (6, 1, 3, 0, 8)] {
        let spec = ConvSpec::new(2, 3, k).stride(s).padding(p).transposed();
        let x = Tensor4::new([2, 2, h, h], small_ints(4 * h * h, &mut r)).unwrap();
        let w = small_ints(spec.weight_len(), &mut r);
        let y = deconv2d(&x, &w, None, &spec).map_err(|e| e.to_string())?;
        ensure((y.h(), y.w()) == (size, size), || format!("deconv size {h} -> {}", y.h()))?;
        ensure(y == scatter_deconv(&x, &w, &spec), || format!("deconv values {spec:?}"))?;
        cases += 1;
    }
    let x = Tensor4::zeros([1, 1, 64, 64]);
    let dil = conv2d(&x, &[0.0; 9], None, &ConvSpec::new(1, 1, 3).dilation(2)).unwrap();
    let strided = conv2d(&x, &[0.0; 9], None, &ConvSpec::new(1, 1, 3).stride(2)).unwrap();
    ensure(dil.h() == 60 && strided.h() == 32, || "64x64 examples".into())?;
    Ok(format!("{cases} exact oracle cases"))
}

// 2 -------------------------------------------------------------------------

fn adjoint_identity() -> Outcome {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    let mut draws = 0;
    while draws < 50 {
        let k = r.gen_range(1..=5);
        let s = r.gen_range(1..=3);
        let p = r.gen_range(0..=(k - 1) / 2);
        let (ci, co) = (r.gen_range(1..=3), r.gen_range(1..=3));
        let (oh, ow) = (r.gen_range(2..=8), r.gen_range(2..=8));
        let (h, w) = ((oh - 1) * s + k - 2 * p, (ow - 1) * s + k - 2 * p);
        if h == 0 || w == 0 {
            continue;
        }
        let n = r.gen_range(1..=2);
        let conv = ConvSpec::new(ci, co, k).stride(s).padding(p);
        let tconv = ConvSpec::new(co, ci, k).stride(s).padding(p).transposed();
        let weights: Vec<f64> = (0..conv.weight_len()).map(|_| r.sample(StandardNormal)).collect();
        let x = randn([n, ci, h, w], &mut r);
        let y = randn([n, co, oh, ow], &mut r);
        let lhs = y.dot(&conv2d(&x, &weights, None, &conv).map_err(|e| e.to_string())?);
        let rhs = deconv2d(&y, &weights, None, &tconv).map_err(|e| e.to_string())?.dot(&x);
        let err = (lhs - rhs).abs() / lhs.abs().max(1.0);
        worst = worst.max(err);
        ensure(err <= 1e-10, || format!("{lhs} vs {rhs} for {conv:?}"))?;
        draws += 1;
    }
    Ok(format!("50 draws, max scaled error {worst:.2e}"))
}

// 3 -------------------------------------------------------------------------

fn gradient_checks() -> Outcome {
    let mut r = rng(3);
    let mut worst: (f64, String) = (0.0, String::new());
    let mut run = |name: &str, layer: &mut dyn Layer, x: &Tensor4, coords: usize, seed: u64| -> Result<(), String> {
        let rep = grad_check(layer, x, 1e-6, coords, &mut rng(seed)).map_err(|e| e.to_string())?;
        if rep.max_rel() > worst.0 {
            worst = (rep.max_rel(), name.to_string());
        }
        ensure(rep.max_rel() <= 1e-4, || format!("{name}: {rep:?}"))
    };
    for (i, spec) in [
        ConvSpec::new(2, 3, 3),
        ConvSpec::new(2, 3, 3).stride(2).padding(1),
        ConvSpec::new(2, 2, 3).dilation(2).stride(2).padding(1),
        ConvSpec::new(1, 2, 3).kernel_hw(1, 7).padding_hw(0, 3).stride(4),
    ]
    .into_iter()
    .enumerate()
    {
        let mut layer = Conv2d::new(spec, true, &mut r).unwrap();
        let x = randn([2, spec.in_channels, 7, 9], &mut r);
        run(&format!("conv {spec:?}"), &mut layer, &x, 200, 30 + i as u64)?;
    }
    let mut deconv = ConvTranspose2d::new(ConvSpec::new(2, 3, 4).stride(2).transposed(), true, &mut r).unwrap();
    run("deconv", &mut deconv, &randn([2, 2, 4, 5], &mut r), 200, 40)?;
    let mut bn = BatchNorm2d::new(3);
    bn.gamma = Param::new(vec![0.5, 1.5, -0.7]);
    bn.beta = Param::new(vec![0.1, -0.2, 0.3]);
    run("batchnorm", &mut bn, &randn([3, 3, 4, 4], &mut r), 200, 41)?;
    let away = Tensor4::from_fn([2, 2, 5, 5], |_| {
        let v: f64 = r.sample(StandardNormal);
        if v.abs() < 1e-3 {
            0.5
        } else {
            v
        }
    });
    run("relu", &mut Relu::new(), &away, 200, 42)?;
    let x = randn([2, 2, 6, 8], &mut r);
    run("maxpool", &mut MaxPool2d::new(2, 2).unwrap(), &x, 200, 43)?;
    run("maxpool 1x4", &mut MaxPool2d::new_hw((1, 4), (1, 4)).unwrap(), &x, 200, 44)?;
    run("crop", &mut CenterCrop::new(4, 5), &x, 200, 45)?;
    run("gap", &mut GlobalAvgPool::new(), &x, 200, 46)?;
    let mut block = ResidualBlock::new(2, 4, 2, 2, &mut r).unwrap();
    run("residual", &mut block, &randn([2, 2, 8, 8], &mut r), 200, 47)?;
    let mut stack = Sequential::new()
        .push(Conv2d::new(ConvSpec::new(1, 4, 3).padding(1), false, &mut r).unwrap())
        .push(BatchNorm2d::new(4))
        .push(Relu::new())
        .push(MaxPool2d::new(2, 2).unwrap())
        .push(GlobalAvgPool::new());
    run("stack", &mut stack, &randn([3, 1, 8, 8], &mut r), 200, 48)?;

    let small = ModelConfig {
        class_count: 3,
        astft_size: 8,
        dtcwt_size: 32,
        fusion_size: 16,
        segment_length: 64,
        branch_channels: 3,
        fused_channels: 4,
        widths: [4, 4, 6],
        ..ModelConfig::default()
    };
    for (i, variant) in Variant::ALL.into_iter().enumerate() {
        let cfg = ModelConfig { variant, seed: i as u64, ..small.clone() };
        let mut model = build_model(&cfg).unwrap();
        let x = Tensor4::from_fn([3, 1, 1, cfg.input_len()], |_| r.gen_range(-1.0..1.0));
        run(&format!("model {variant} (small)"), &mut model, &x, 60, 50 + i as u64)?;
    }
    let cfg = ModelConfig::default();
    let mut model = build_model(&cfg).unwrap();
    let x = Tensor4::from_fn([2, 1, 1, cfg.input_len()], |_| r.gen::<f64>());
    run("fusion model (full size)", &mut model, &x, 40, 60)?;
    Ok(format!("max relative error {:.2e} ({})", worst.0, worst.1))
}

// 4 -------------------------------------------------------------------------

fn dtcwt_variation(stream: &[f64], n: usize, energy: impl Fn(&DtcwtCoeffs) -> Vec<f64>) -> f64 {
    let per_shift: Vec<Vec<f64>> =
        (0..8).map(|s| energy(&dtcwt::forward(&stream[8 - s..8 - s + n], 4).unwrap())).collect();
    (0..per_shift[0].len())
        .map(|l| {
            let v: Vec<f64> = per_shift.iter().map(|e| e[l]).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
            (hi - lo) / mean
        })
        .fold(0.0, f64::max)
}

fn dtcwt_criterion() -> Outcome {
    let mut r = rng(4);
    let mut worst: f64 = 0.0;
    for (n, levels) in [(1536, 4), (1024, 5), (512, 3), (1000, 4), (777, 2)] {
        for _ in 0..4 {
            let x: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
            let y = dtcwt::inverse(&dtcwt::forward(&x, levels).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            let num: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
            let den: f64 = x.iter().map(|a| a * a).sum();
            let rel = (num / den).sqrt();
            worst = worst.max(rel);
            ensure(rel <= 1e-8, || format!("reconstruction {rel:e} at n={n} levels={levels}"))?;
        }
    }
    let tree_a = |c: &DtcwtCoeffs| -> Vec<f64> { c.details.iter().map(|d| d.iter().map(|v| v.re * v.re).sum()).collect() };
    let mut ratio_max: f64 = 0.0;
    for trial in 0..20 {
        let n = 512;
        let mut x = vec![0.0; n + 8];
        match trial % 3 {
            0 => {
                for _ in 0..4 {
                    let i = r.gen_range(16..n - 16);
                    x[i] += r.gen_range(-1.0..1.0);
                }
            }
            1 => {
                let start = r.gen_range(n / 4..n / 2);
                let f = r.gen_range(0.02..0.3);
                for (i, v) in x.iter_mut().enumerate().skip(start).take(64) {
                    *v = (2.0 * PI * f * i as f64).sin() * (-((i - start) as f64) / 16.0).exp();
                }
            }
            _ => x[16..n - 8].iter_mut().for_each(|v| *v = r.gen_range(-1.0..1.0)),
        }
        let complex = dtcwt_variation(&x, n, dtcwt::level_energies);
        let real = dtcwt_variation(&x, n, tree_a);
        ratio_max = ratio_max.max(complex / real);
        ensure(complex < real, || format!("trial {trial}: dtcwt {complex} vs real DWT {real}"))?;
    }
    Ok(format!("reconstruction max {worst:.1e}; shift variation ratio max {ratio_max:.3}"))
}

// 5 -------------------------------------------------------------------------

fn window_physics() -> Outcome {
    let bound = 1.0 / (4.0 * PI);
    let mut worst: f64 = 0.0;
    for len in [16, 32, 64, 100, 127] {
        let g = make_window(WindowKind::Gaussian, len).unwrap().time_bandwidth_product();
        let rect = make_window(WindowKind::Rectangular, len).unwrap().time_bandwidth_product();
        let hann = make_window(WindowKind::Hanning, len).unwrap().time_bandwidth_product();
        worst = worst.max((g - bound).abs() / bound);
        ensure((g - bound).abs() / bound <= 0.05, || format!("L={len}: {g} vs {bound}"))?;
        ensure(g < rect && g < hann, || format!("L={len}: gauss {g} rect {rect} hann {hann}"))?;
    }
    let len = 64;
    let x: Vec<f64> = (0..1024).map(|i| (2.0 * PI * 10.37 / len as f64 * i as f64).sin()).collect();
    let side = |kind| {
        let g = tfa::spectrogram(&tfa::stft(&x, &make_window(kind, len).unwrap(), 16).unwrap()).unwrap();
        (0..g.cols())
            .map(|t| {
                let col: Vec<f64> = (0..g.rows()).map(|r| g.get(r, t)).collect();
                let p = (0..col.len()).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
                col.iter().enumerate().filter(|(i, _)| i.abs_diff(p) > 4).map(|(_, v)| *v).fold(0.0, f64::max) / col[p]
            })
            .fold(0.0, f64::max)
    };
    let (gauss, rect) = (side(WindowKind::Gaussian), side(WindowKind::Rectangular));
    ensure(gauss < rect, || format!("sidelobes gauss {gauss} rect {rect}"))?;
    Ok(format!("TBP deviation max {:.2}%; sidelobe gauss {gauss:.2e} < rect {rect:.2e}", 100.0 * worst))
}

// 6 -------------------------------------------------------------------------

fn pso_criterion() -> Outcome {
    let x: Vec<f64> = (0..1536).map(|i| (2.0 * PI * 0.1 * i as f64 + 0.4).sin()).collect();
    let cfg = SwarmConfig::default();
    let aim = pso::aim_grid(&x, cfg.aim_rows, cfg.aim_cols).map_err(|e| e.to_string())?;
    let optimum = (MIN_WINDOW..=MAX_WINDOW)
        .map(|l| pso::fitness(&WindowSchedule::uniform(l).unwrap(), &x, &aim, cfg.hop).unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    let violations = AtomicUsize::new(0);
    let mut worst_ratio = f64::INFINITY;
    for seed in 0..10 {
        let run_cfg = SwarmConfig { seed, ..cfg.clone() };
        let r = pso::optimize_with(&run_cfg, |s| {
            if s.lengths().iter().any(|l| !(MIN_WINDOW..=MAX_WINDOW).contains(l)) {
                violations.fetch_add(1, Ordering::Relaxed);
            }
            pso::fitness(s, &x, &aim, cfg.hop)
        })
        .map_err(|e| e.to_string())?;
        ensure(r.best_fitness >= optimum - 0.02 * optimum.abs(), || format!("seed {seed}: {} vs {optimum}", r.best_fitness))?;
        ensure(r.fitness_trace.windows(2).all(|w| w[1] >= w[0]), || format!("seed {seed}: trace not monotone"))?;
        // fitness <= 0, so "98% of the optimum" reads best >= optimum * 1.02
        worst_ratio = worst_ratio.min(optimum / r.best_fitness);
        let same = pso::pso_optimize(&x, &run_cfg).map_err(|e| e.to_string())?;
        ensure(same == r, || format!("seed {seed}: pso_optimize differs from the traced run"))?;
    }
    ensure(violations.load(Ordering::Relaxed) == 0, || "schedule outside [16, 127] evaluated".into())?;
    Ok(format!("uniform optimum {optimum:.5}; worst seed reaches {:.2}%", 100.0 * worst_ratio))
}

// 7 -------------------------------------------------------------------------

fn end_to_end() -> Outcome {
    let data = build_dataset(1000, &FaultKind::CASE_ONE, &DatasetSpec::default(), 7).map_err(|e| e.to_string())?;
    ensure(data.segment_length() == 1536, || "segment length".into())?;
    ensure((data.train.len(), data.validation.len(), data.test.len()) == (3000, 1000, 1000), || "6:2:2 split".into())?;
    let features = preprocess(&data, &PreprocessConfig::default()).map_err(|e| e.to_string())?;
    drop(data);
    let mut model = build_model(&ModelConfig { seed: 7, ..ModelConfig::default() }).map_err(|e| e.to_string())?;
    let tc = TrainConfig { batch_size: 32, epochs: E2E_EPOCHS, learning_rate: 1e-4, seed: 7, keep_best: true };
    let m = train(&mut model, &features, &tc).map_err(|e| e.to_string())?;
    let detail = format!("test accuracy {:.4} (best epoch {} of {E2E_EPOCHS})", m.test.accuracy, m.best_epoch);
    ensure(m.test.accuracy >= 0.95, || detail.clone())?;
    Ok(detail)
}

const E2E_EPOCHS: usize = 12;

// 8 -------------------------------------------------------------------------

/// Hard-set ablation size: per-class samples, epochs and learning rate
/// shared by every variant.
const ABLATION_PER_CLASS: usize = 400;
const ABLATION_EPOCHS: usize = 25;
const ABLATION_LR: f64 = 1e-4;

fn ablation_trend() -> Outcome {
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for seed in [1u64, 2, 3] {
        let spec = DatasetSpec { snr_db: 0.0, ..DatasetSpec::default() };
        let data = build_dataset(ABLATION_PER_CLASS, &FaultKind::CASE_ONE, &spec, seed).map_err(|e| e.to_string())?;
        let features: FeatureSet = preprocess(&data, &PreprocessConfig::default()).map_err(|e| e.to_string())?;
        let mut acc = Vec::new();
        for variant in Variant::ALL {
            let mut model = build_model(&ModelConfig { variant, seed, ..ModelConfig::default() }).map_err(|e| e.to_string())?;
            let tc = TrainConfig { epochs: ABLATION_EPOCHS, learning_rate: ABLATION_LR, seed, ..TrainConfig::default() };
            acc.push(train(&mut model, &features, &tc).map_err(|e| e.to_string())?.test.accuracy);
        }
        let [fusion, astft, dtcwt_acc, raw_v, raw_h] = acc[..] else { unreachable!() };
        lines.push(format!(
            "seed {seed}: fusion {fusion:.3} astft {astft:.3} dtcwt {dtcwt_acc:.3} raw_v {raw_v:.3} raw_h {raw_h:.3}"
        ));
        let singles_min = astft.min(dtcwt_acc);
        if !(fusion >= astft && fusion >= dtcwt_acc && singles_min >= raw_v && singles_min >= raw_h) {
            failures.push(seed);
        }
    }
    let detail = lines.join("; ");
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("ordering broken for seeds {failures:?}: {detail}"))
    }
}

// 9 -------------------------------------------------------------------------

const TINY: &str = "\
seed = 9
per_class = 10
segment_length = 512
pso.swarm_size = 6
pso.max_iterations = 3
pso.repeats = 2
grid.dtcwt = 64
grid.fusion = 32
model.widths = 4,4,8
train.batch_size = 8
train.epochs = 2
train.learning_rate = 0.001
";

fn run_all_commands(dir: &Path, threads: &str) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    fs::write(dir.join("run.cfg"), TINY).map_err(|e| e.to_string())?;
    for args in [
        &["synth"][..],
        &["preprocess"],
        &["train"],
        &["eval"],
        &["ablate", "--set", "out_dir=ablate"],
        &["export-tf", "--sample", "7"],
        &["pso-trace", "--sample", "3"],
    ] {
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--config", "run.cfg"]);
        if !args.contains(&"--set") {
            full.extend(["--out", "out"]);
        } else {
            full.extend(["--set", "cache_path=out/features.gfc"]);
        }
        let out = Command::new(env!("CARGO_BIN_EXE_gearfuse"))
            .args(&full)
            .current_dir(dir)
            .env("GEARFUSE_THREADS", threads)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || format!("{full:?}: {}", String::from_utf8_lossy(&out.stderr)))?;
    }
    Ok(())
}

/// Every output file with timing columns removed.
fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for sub in ["out", "ablate"] {
        let mut entries: Vec<_> = fs::read_dir(dir.join(sub)).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            let name = format!("{sub}/{}", p.file_name().unwrap().to_string_lossy());
            if name.ends_with("timing.txt") {
                continue;
            }
            let mut bytes = fs::read(&p).unwrap();
            if name.ends_with("ablation.csv") {
                let text = String::from_utf8(bytes).unwrap();
                let kept: Vec<String> = text.lines().map(|l| l.rsplit_once(',').map_or(l, |(a, _)| a).to_string()).collect();
                bytes = kept.join("\n").into_bytes();
            }
            files.push((name, bytes));
        }
    }
    files
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    run_all_commands(&a, "1")?;
    run_all_commands(&b, "3")?;
    let (fa, fb) = (outputs(&a), outputs(&b));
    let names: Vec<&String> = fa.iter().map(|(n, _)| n).collect();
    ensure(names == fb.iter().map(|(n, _)| n).collect::<Vec<_>>(), || "different file sets".into())?;
    for ((name, x), (_, y)) in fa.iter().zip(&fb) {
        ensure(x == y, || format!("{name} differs between reruns"))?;
    }
    Ok(format!("{} output files byte-identical across reruns (1 vs 3 threads)", fa.len()))
}

#[test]
fn acceptance() {
    let results = [
        criterion(1, "formula oracles", Some(30.0), formula_oracles),
        criterion(2, "adjoint identity", None, adjoint_identity),
        criterion(3, "gradient checks", Some(60.0), gradient_checks),
        criterion(4, "dtcwt reconstruction and shift invariance", None, dtcwt_criterion),
        criterion(5, "window physics", None, window_physics),
        criterion(6, "pso on a single tone", Some(120.0), pso_criterion),
        criterion(7, "end-to-end surrogate, 5 x 1000", Some(20.0 * 60.0), end_to_end),
        criterion(8, "hard-set ablation ordering, 3 seeds", None, ablation_trend),
        criterion(9, "determinism", None, determinism),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "acceptance criteria failed: {failed:?}");
}
