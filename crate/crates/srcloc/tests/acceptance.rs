//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;
use srcloc::commands;
use srcloc::config::RunConfig;
use srcloc::engine::Parallel;
use srcloc::fixtures::{simulate_sequence, RealLikeSpec};
use srcloc_core::dsp::{default_pairs, gcc_phat_with, srp_localize, GccOptions, HeightMode, SearchGrid, SrpOptions, TdoaLookup};
use srcloc_core::geometry::{build_idiap_geometry, ArrayGeometry, IdiapConfig, Position, SourceBox};
use srcloc_core::metrics::{motp, relative_improvement, FrameRecord, MotpMode, TrackReport};
use srcloc_core::nn::gradcheck::check;
use srcloc_core::nn::{AdamConfig, ConvBlock, Network, NetworkSpec};
use srcloc_core::realdata::{extract_real_windows, RealWindowSet};
use srcloc_core::rng::substream;
use srcloc_core::signal::{
    fractional_delay, generate_epoch, sample_source_position, AnechoicClip, DelayMode, EpochPlan, EpochSpec, NoiseSpec,
    Synthesizer,
};
use srcloc_core::speech;
use srcloc_core::train::{self, evaluate_loss, no_hook, PretrainInputs, Topology, TrainConfig, Trainer};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn geometry() -> ArrayGeometry {
    build_idiap_geometry(&IdiapConfig::four_mic()).unwrap()
}

fn corpus(seed: u64, count: usize, min: usize, max: usize) -> Vec<AnechoicClip> {
    speech::corpus(seed, count, min, max, 16_000.0)
        .into_iter()
        .enumerate()
        .map(|(i, samples)| AnechoicClip {
            samples,
            sample_rate: 16_000.0,
            source_id: format!("clip{i}"),
        })
        .collect()
}

fn uniform_inputs(spec: &NetworkSpec, n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<[f64; 3]>) {
    let mut rng = substream(seed, 0xAC, 0);
    let xs = (0..n)
        .map(|_| (0..spec.input_channels * spec.input_len).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let qs = (0..n).map(|_| [rng.random_range(0.0..3.6), rng.random_range(0.0..8.2), rng.random_range(0.9..1.5)]).collect();
    (xs, qs)
}

fn gradients() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut run = |spec: NetworkSpec, per_tensor: Option<usize>, seed: u64| -> Result<(), String> {
        let net = Network::<f64>::init(spec.clone(), seed).map_err(|e| e.to_string())?;
        let (xs, qs) = uniform_inputs(&spec, 2, seed);
        let r = check(&net, &xs, &qs, 1e-5, per_tensor, 1e-7, seed).map_err(|e| e.to_string())?;
        worst = worst.max(r.max_rel_error);
        checked += r.checked;
        Ok(())
    };
    // full reference topology scaled to 64 samples; only two pools fit
    let mut full = NetworkSpec::reference_topology(4, 1280).map_err(|e| e.to_string())?;
    full.input_len = 64;
    for b in full.blocks.iter_mut().skip(2) {
        b.pool = false;
    }
    run(full, Some(25), 1)?;
    // each layer type on its own
    for (k, pool) in [false, true].into_iter().enumerate() {
        let spec = NetworkSpec {
            input_channels: 4,
            input_len: 64,
            blocks: vec![ConvBlock::new(6, 7, pool)],
            hidden: 12,
            output: 3,
            dropout: 0.5,
        };
        run(spec, None, 2 + k as u64)?;
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(
        worst < 1e-4 && secs < 60.0,
        format!("max relative error {worst:.2e} over {checked} parameters in {secs:.1} s"),
    )
}

fn fractional_delays() -> Outcome {
    let mut rng = substream(2, 0xAC, 0);
    let x: Vec<f64> = (0..1280).map(|_| rng.random_range(-1.0..1.0)).collect();
    let energy = |v: &[f64]| v.iter().map(|s| s * s).sum::<f64>();
    let opts = GccOptions {
        max_lag: Some(50),
        upsample: 8,
    };
    let y = fractional_delay(&x, 3.70, 1.0).map_err(|e| e.to_string())?;
    let lag = gcc_phat_with(&y, &x, 16_000.0, opts).map_err(|e| e.to_string())?.refined_peak().0;
    let e_rel = (energy(&y) - energy(&x)).abs() / energy(&x);
    let mut integer_ok = true;
    for d in [0usize, 1, 3, 17, 40] {
        let y = fractional_delay(&x, d as f64, 1.0).map_err(|e| e.to_string())?;
        let cf = gcc_phat_with(&y, &x, 16_000.0, opts).map_err(|e| e.to_string())?;
        let shifted = (0..x.len()).all(|i| (y[i] - x[(i + x.len() - d) % x.len()]).abs() < 1e-9);
        // the correlation maximum sits exactly on the integer lag; the
        // parabolic refinement may move it by rounding only
        integer_ok &= cf.argmax().0 == d as f64 && (cf.refined_peak().0 - d as f64).abs() < 1e-9 && shifted;
    }
    ensure(
        (lag - 3.70).abs() <= 0.05 && e_rel < 1e-9 && integer_ok,
        format!("3.70 -> {lag:.4}, integer delays exact: {integer_ok}, energy error {e_rel:.1e}"),
    )
}

fn srp_oracle() -> Outcome {
    let geom = geometry();
    let bounds = SourceBox::idiap();
    let grid = SearchGrid::new(&geom, bounds, 0.05, HeightMode::Search, default_pairs(&geom)).map_err(|e| e.to_string())?;
    let synth = Synthesizer::new(geom.clone(), NoiseSpec::clean(), bounds, 2560, DelayMode::Circular).map_err(|e| e.to_string())?;
    let clip = &corpus(3, 1, 8000, 8000)[0];
    let opts = SrpOptions {
        lookup: TdoaLookup::BandLimited,
        interpolate: false,
    };
    let mut hits = 0;
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let mut rng = substream(3, 0xAC, k);
        // sources sit on grid nodes so the true position is a candidate
        let q = grid.position(grid.nearest_cell(sample_source_position(&bounds, &mut rng)));
        let ex = synth.synthesize(clip, 1000, q, &mut rng).map_err(|e| e.to_string())?;
        let est = srp_localize(&ex.window, &grid, opts).map_err(|e| e.to_string())?;
        let err = (est.position - q).norm();
        worst = worst.max(err);
        if err <= grid.half_diagonal() {
            hits += 1;
        }
    }
    ensure(
        hits == 20,
        format!("{hits}/20 within {:.4} m, worst error {worst:.4} m", grid.half_diagonal()),
    )
}

fn overfit() -> Outcome {
    let t = Instant::now();
    let geom = geometry();
    let synth = Synthesizer::new(geom, NoiseSpec::default(), SourceBox::idiap(), 1280, DelayMode::Circular).map_err(|e| e.to_string())?;
    let clips = corpus(1, 10, 16_000, 32_000);
    let spec = EpochSpec {
        clips: 5,
        windows_per_clip: 10,
        validation_fraction: 0.0,
        min_rms: 1e-4,
    };
    let (examples, _, _) = generate_epoch(&synth, &clips, spec, 7, 0).map_err(|e| e.to_string())?;
    let blocks = vec![
        ConvBlock::new(8, 7, true),
        ConvBlock::new(8, 7, true),
        ConvBlock::new(12, 5, true),
        ConvBlock::new(12, 5, true),
        ConvBlock::new(12, 3, false),
    ];
    let nspec = NetworkSpec {
        input_channels: 4,
        input_len: 1280,
        blocks,
        hidden: 500,
        output: 3,
        dropout: 0.0,
    };
    let net = Network::<f64>::init(nspec, 3).map_err(|e| e.to_string())?;
    let adam = AdamConfig {
        learning_rate: 1e-2,
        ..AdamConfig::default()
    };
    let mut trainer = Trainer::new(net, adam, 5);
    let mut loss = f64::INFINITY;
    let mut epoch = 0;
    while trainer.steps() < 2000 {
        trainer.epoch(&Parallel, &examples, 50, epoch, None).map_err(|e| e.to_string())?;
        epoch += 1;
        if trainer.steps() % 50 == 0 {
            loss = evaluate_loss(&Parallel, &trainer.network, &examples).map_err(|e| e.to_string())?;
            if loss < 1e-3 {
                break;
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(
        loss < 1e-3 && secs < 600.0,
        format!("loss {loss:.2e} m² after {} steps in {secs:.0} s", trainer.steps()),
    )
}

fn metric_arithmetic() -> Outcome {
    let d = relative_improvement(1.020, 0.795).map_err(|e| e.to_string())?;
    let q = Position::new(0.0, 0.0, 0.0);
    let frames = vec![
        FrameRecord {
            t_ms: 40,
            estimate: Position::new(0.3, 0.0, 0.0),
            truth: q,
        },
        FrameRecord {
            t_ms: 80,
            estimate: Position::new(0.0, 0.5, 0.0),
            truth: q,
        },
    ];
    let report = TrackReport::new("s", "m", 80, frames).map_err(|e| e.to_string())?;
    let m = motp(&report, MotpMode::Euclidean).map_err(|e| e.to_string())?;
    ensure(
        (d - 22.0588).abs() < 1e-3 && format!("{d:.1}") == "22.1" && (m - 0.4).abs() < 1e-12,
        format!("delta_r(1.020, 0.795) = {d:.2}%, two-frame MOTP {m} m"),
    )
}

/// Asymptotic Kolmogorov distribution tail with the usual small-sample correction.
fn ks_p_value(d: f64, n: usize) -> f64 {
    let s = (n as f64).sqrt();
    let lambda = (s + 0.12 + 0.11 / s) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        p += if k % 2 == 1 { term } else { -term };
    }
    (2.0 * p).clamp(0.0, 1.0)
}

fn contamination() -> Outcome {
    let synth = Synthesizer::new(geometry(), NoiseSpec::default(), SourceBox::idiap(), 1280, DelayMode::Circular).map_err(|e| e.to_string())?;
    let clips = corpus(6, 25, 16_000, 32_000);
    let spec = EpochSpec {
        clips: 25,
        windows_per_clip: 40,
        validation_fraction: 0.0,
        min_rms: 1e-4,
    };
    let plan = EpochPlan::new(&synth, &clips, spec, 6, 0).map_err(|e| e.to_string())?;
    let mut freqs = Vec::new();
    let mut snr = Vec::new();
    for &i in plan.train_indices() {
        let c = plan.example(i).map_err(|e| e.to_string())?.meta.contamination;
        freqs.push(c.tone_freq);
        snr.push(c.realized_snr_db);
    }
    freqs.sort_by(f64::total_cmp);
    let n = freqs.len();
    let d = freqs
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let cdf = ((f - 20.0) / 10.0).clamp(0.0, 1.0);
            (cdf - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - cdf).abs())
        })
        .fold(0.0, f64::max);
    let p = ks_p_value(d, n);
    let mean = snr.iter().sum::<f64>() / snr.len() as f64;
    let target = match NoiseSpec::default().noise {
        srcloc_core::signal::NoiseLevel::SnrDb(s) => s,
        srcloc_core::signal::NoiseLevel::Fixed(_) => return Err("default noise is not SNR based".into()),
    };
    ensure(
        n == 1000 && p > 0.01 && (mean - target).abs() <= 0.5,
        format!("{n} windows, KS D={d:.4} p={p:.3}, mean SNR {mean:.3} dB (target {target} dB)"),
    )
}

const TINY: &str = r#"
seed = 21
window_ms = 16
deterministic = true
[corpus]
synthetic_clips = 4
synthetic_min_s = 0.5
synthetic_max_s = 1.0
[simulate]
examples = 40
windows_per_clip = 10
[train]
epochs = 3
batch_size = 10
clips_per_epoch = 4
windows_per_clip = 10
validation_fraction = 0.25
finetune_epochs = 2
hidden = 16
dropout = 0.25
blocks = [
  { filters = 4, kernel = 7, pool = true },
  { filters = 4, kernel = 5, pool = true },
  { filters = 4, kernel = 3, pool = false },
]
[srp]
resolution_m = 0.25
"#;

fn tiny(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::from_toml(TINY, Path::new("tiny.toml")).unwrap();
    cfg.out = out.to_path_buf();
    cfg
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    for run in ["a", "b"] {
        let sim = commands::simulate(&tiny(&dir.path().join(run).join("sim"))).map_err(|e| e.to_string())?;
        let tr = commands::train(&tiny(&dir.path().join(run).join("train")), Some(&sim.dataset)).map_err(|e| e.to_string())?;
        let pre = commands::train(&tiny(&dir.path().join(run).join("pre")), None).map_err(|e| e.to_string())?;
        let read = |p: &Path| std::fs::read(p).map_err(|e| e.to_string());
        bytes.push((read(&sim.dataset)?, read(&tr.checkpoint)?, read(&pre.checkpoint)?));
    }
    let (a, b) = (&bytes[0], &bytes[1]);
    ensure(
        a == b,
        format!(
            "dataset {} B, checkpoints {} B and {} B identical across runs: {}",
            a.0.len(),
            a.1.len(),
            a.2.len(),
            a == b
        ),
    )
}

fn real_like(ids: &[&str], seed: u64, geom: &ArrayGeometry, spec: &RealLikeSpec, window_len: usize) -> Result<RealWindowSet, String> {
    let mut set = RealWindowSet::default();
    for (k, id) in ids.iter().enumerate() {
        let s = simulate_sequence(id, geom, spec, seed + k as u64).map_err(|e| e.to_string())?;
        let (w, _) = extract_real_windows(id, &s.channels, 16_000.0, &s.track, window_len, geom.mic_count()).map_err(|e| e.to_string())?;
        set.extend(w);
    }
    Ok(set)
}

fn motp_of(net: &Network<f32>, set: &RealWindowSet) -> Result<f64, String> {
    let frames = set
        .windows
        .iter()
        .map(|w| {
            Ok(FrameRecord {
                t_ms: w.t_ms,
                estimate: net.predict(&w.window).map_err(|e| e.to_string())?,
                truth: w.target,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let r = TrackReport::new("test", "cnn", 32, frames).map_err(|e| e.to_string())?;
    motp(&r, MotpMode::Euclidean).map_err(|e| e.to_string())
}

/// Direction of the fine-tuning effect on simulated stand-ins, plus the
/// reproduction mode running end to end on them.
fn adaptation() -> Outcome {
    let geom = geometry();
    let config = TrainConfig {
        window_ms: 32,
        epochs: 8,
        batch_size: 20,
        epoch: EpochSpec {
            clips: 20,
            windows_per_clip: 10,
            validation_fraction: 0.1,
            min_rms: 1e-4,
        },
        adam: AdamConfig {
            learning_rate: 1e-3,
            ..AdamConfig::default()
        },
        seed: 8,
        finetune_epochs: 20,
        topology: Topology {
            blocks: vec![ConvBlock::new(8, 7, true), ConvBlock::new(8, 5, true), ConvBlock::new(8, 3, false)],
            hidden: 64,
            dropout: 0.0,
        },
        ..TrainConfig::default()
    };
    let n = config.window_samples().map_err(|e| e.to_string())?;
    let synth = Synthesizer::new(geom.clone(), NoiseSpec::default(), SourceBox::idiap(), n, DelayMode::Circular).map_err(|e| e.to_string())?;
    let clips = corpus(8, 20, 16_000, 32_000);
    let base = train::pretrain::<f32, _>(&Parallel, &config, &PretrainInputs { synth: &synth, corpus: &clips }, &mut no_hook())
        .map_err(|e| e.to_string())?;
    let parent = train::checkpoint_of(&base, &config, None);

    let region = SourceBox::new(Position::new(1.0, 5.5, 1.1), Position::new(2.6, 6.5, 1.3)).map_err(|e| e.to_string())?;
    let spec = RealLikeSpec::mismatched(region);
    let tune = real_like(&["seq15", "seq11"], 100, &geom, &spec, n)?;
    let test = real_like(&["seq01"], 200, &geom, &spec, n)?;
    let tuned = train::finetune(&Parallel, &parent, &tune, &["seq01".to_string()], &config, &mut no_hook()).map_err(|e| e.to_string())?;
    let before = motp_of(&base.network, &test)?;
    let after = motp_of(&tuned.network().map_err(|e| e.to_string())?, &test)?;

    // reproduction mode on stand-ins for all five sequences
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = tiny(&dir.path().join("reproduce"));
    let seqs = dir.path().join("seqs");
    let mut short = spec.clone();
    short.duration_s = 1.0;
    for (k, id) in ["seq01", "seq02", "seq03", "seq11", "seq15"].iter().enumerate() {
        simulate_sequence(id, &geom, &short, 300 + k as u64)
            .and_then(|s| s.write(&seqs, 16_000))
            .map_err(|e| e.to_string())?;
    }
    commands::reproduce(&cfg, &seqs, &[16]).map_err(|e| e.to_string())?;
    let tables = [3, 4, 5, 6, 8].iter().all(|t| cfg.out.join(format!("table{t}.txt")).exists());

    ensure(
        after < before && tables,
        format!(
            "stand-in test MOTP {before:.3} m unadapted -> {after:.3} m fine-tuned; reproduction tables written: {tables}; \
             published numbers need the recorded corpora and are not reproduced"
        ),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("gradient correctness", gradients),
        ("fractional delay fidelity", fractional_delays),
        ("SRP-PHAT oracle", srp_oracle),
        ("overfit 50 examples", overfit),
        ("metric arithmetic", metric_arithmetic),
        ("contamination statistics", contamination),
        ("determinism", determinism),
        ("fine-tuning direction and reproduction mode", adaptation),
    ];
    let mut failed = 0;
    let mut total = Duration::ZERO;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        total += t.elapsed();
        match r {
            Ok(d) => println!("criterion {} PASS {name}: {d}", k + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {d}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed in {:.0} s", criteria.len() - failed, criteria.len(), total.as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
