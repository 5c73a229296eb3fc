//! The work behind each subcommand. Every command writes the resolved
//! configuration and a manifest of its inputs next to its outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use srcloc_core::geometry::{ArrayGeometry, Position};
use srcloc_core::metrics::{restrict_to_common_frames, AverageMode, FrameRecord, MotpMode, ResultMatrix, TrackReport};
use srcloc_core::nn::{Adam, Checkpoint, Lineage, Network};
use srcloc_core::realdata::RealWindowSet;
use srcloc_core::rng::{child_seed, domain};
use srcloc_core::signal::{EpochPlan, LabeledExample, Synthesizer};
use srcloc_core::train::{self, checkpoint_of, EpochRecord, GradientEngine, PretrainInputs, TrainConfig, Trainer};
use srcloc_core::dsp::srp_localize;

use crate::annotations::{convert_annotations, format_ground_truth, AnnotationMapping, ConversionReport};
use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::{InputsManifest, RunConfig};
use crate::dataset::Dataset;
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::manifest::{load_corpus, Sequence, SequenceManifest};
use crate::report::{
    read_track_dir, render_table, track_file_name, with_reference_columns, write_matrix_csv, write_srp_csv,
    write_track_csv, SrpFrame,
};

/// Creates the output directory and records the resolved config.
pub fn prepare_out(cfg: &RunConfig) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    cfg.write_resolved(&cfg.out)?;
    Ok(cfg.out.clone())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn synthesizer(cfg: &RunConfig) -> Result<Synthesizer> {
    let geom = cfg.geometry.geometry()?;
    Ok(Synthesizer::new(
        geom,
        cfg.simulate.noise_spec(),
        cfg.geometry.source_box()?,
        cfg.train_config()?.window_samples()?,
        cfg.simulate.delay_mode(),
    )?)
}

/// Fixed-width histogram over `[lo, hi)`; values outside are counted apart.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> (Vec<usize>, usize) {
    let mut h = vec![0; bins];
    let mut outside = 0;
    for &v in values {
        if v >= lo && v <= hi {
            let k = (((v - lo) / (hi - lo)) * bins as f64) as usize;
            h[k.min(bins - 1)] += 1;
        } else {
            outside += 1;
        }
    }
    (h, outside)
}

fn render_histogram(title: &str, values: &[f64], lo: f64, hi: f64, bins: usize, unit: &str) -> String {
    let (h, outside) = histogram(values, lo, hi, bins);
    let mut s = format!("{title}\n");
    let w = (hi - lo) / bins as f64;
    for (k, c) in h.iter().enumerate() {
        let a = lo + w * k as f64;
        let _ = writeln!(s, "  [{a:7.2}, {:7.2}) {unit}  {c}", a + w);
    }
    let _ = writeln!(s, "  outside range: {outside}");
    s
}

pub struct SimulateOutcome {
    pub dataset: PathBuf,
    pub records: usize,
    pub examples: Vec<LabeledExample>,
}

/// Generates the configured number of semi-synthetic examples into an ASLD
/// cache, with a contamination report.
pub fn simulate(cfg: &RunConfig) -> Result<SimulateOutcome> {
    let out = prepare_out(cfg)?;
    let engine = Engine::new(cfg.deterministic);
    let synth = synthesizer(cfg)?;
    let fs = cfg.geometry.sample_rate_hz()?;
    let (corpus, files) = load_corpus(&cfg.corpus, fs, child_seed(cfg.seed, domain::SPEECH, 0))?;
    let mut inputs = InputsManifest::default();
    for (k, f) in files.iter().enumerate() {
        inputs.add(&format!("corpus[{k}]"), f)?;
    }
    let plan = EpochPlan::new(&synth, &corpus, cfg.simulate.epoch_spec()?, cfg.seed, 0)?;
    let idx = plan.train_indices();
    let examples = engine
        .map(idx.len(), |k| plan.example(idx[k]))
        .into_iter()
        .collect::<srcloc_core::Result<Vec<_>>>()?;
    let dataset = Dataset::from_examples(&examples)?;
    let path = out.join("dataset.asld");
    dataset.save(&path)?;

    let tones: Vec<f64> = examples.iter().map(|e| e.meta.contamination.tone_freq).collect();
    let snrs: Vec<f64> = examples
        .iter()
        .map(|e| e.meta.contamination.realized_snr_db)
        .filter(|v| v.is_finite())
        .collect();
    let mut csv = String::from("index,tone_freq_hz,realized_snr_db,x,y,z\n");
    for (k, e) in examples.iter().enumerate() {
        let c = &e.meta.contamination;
        let _ = writeln!(
            csv,
            "{k},{},{},{},{},{}",
            c.tone_freq, c.realized_snr_db, e.target.x, e.target.y, e.target.z
        );
    }
    write_text(&out.join("contamination.csv"), &csv)?;
    let spec = cfg.simulate.noise_spec();
    let mean_snr = snrs.iter().sum::<f64>() / snrs.len().max(1) as f64;
    let mut stats = format!(
        "records: {}\nchannels: {}\nwindow samples: {}\nsample rate: {} Hz\nmean realized SNR: {mean_snr:.3} dB\n",
        dataset.records(),
        dataset.channels,
        dataset.len,
        fs
    );
    if plan.with_replacement() {
        stats.push_str("note: corpus smaller than clips per epoch; clips were reused\n");
    }
    let (slo, shi) = snrs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if slo.is_finite() {
        stats.push_str(&render_histogram(
            "realized SNR",
            &snrs,
            slo.floor(),
            shi.floor() + 1.0,
            ((shi.floor() + 1.0 - slo.floor()) as usize).max(1),
            "dB",
        ));
    }
    stats.push_str(&render_histogram("tone frequency", &tones, spec.tone_freq.0, spec.tone_freq.1, 10, "Hz"));
    write_text(&out.join("simulate_stats.txt"), &stats)?;
    inputs.write(&out)?;
    Ok(SimulateOutcome {
        dataset: path,
        records: dataset.records(),
        examples,
    })
}

fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,steps,train_loss,validation_loss\n");
    for r in history {
        let v = r.validation_loss.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{v}", r.epoch + 1, r.steps, r.train_loss);
    }
    s
}

/// Saves periodic checkpoints according to `train.checkpoint_every`.
struct Cadence<'a> {
    every: usize,
    out: &'a Path,
    config: &'a TrainConfig,
    parent: Option<[u8; 32]>,
}

impl Cadence<'_> {
    fn hook(&self) -> impl FnMut(&EpochRecord, &Network<f32>, &Adam<f32>) -> srcloc_core::Result<()> + '_ {
        move |rec, net, adam| {
            let e = rec.epoch + 1;
            if self.every > 0 && e % self.every == 0 {
                let ck = Checkpoint::from_network(
                    net,
                    Some(adam),
                    Lineage {
                        seed: self.config.seed,
                        config_hash: self.config.hash(),
                        parent: self.parent,
                    },
                );
                let p = self.out.join(format!("checkpoint_e{e}.aslc"));
                save_checkpoint(&p, &ck).map_err(|e| srcloc_core::Error::InvalidConfig(e.to_string()))?;
            }
            Ok(())
        }
    }
}

pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub history: Vec<EpochRecord>,
}

fn finish_training(out: &Path, ck: &Checkpoint, history: &[EpochRecord]) -> Result<TrainOutcome> {
    let path = out.join("checkpoint.aslc");
    save_checkpoint(&path, ck)?;
    write_text(&out.join("loss_history.csv"), &history_csv(history))?;
    Ok(TrainOutcome {
        checkpoint: path,
        history: history.to_vec(),
    })
}

/// Pretraining. With `dataset`, trains for `train.epochs` passes over the
/// cached examples; otherwise every epoch is drawn fresh from the corpus.
pub fn train(cfg: &RunConfig, dataset: Option<&Path>) -> Result<TrainOutcome> {
    let out = prepare_out(cfg)?;
    let engine = Engine::new(cfg.deterministic);
    let mut tc = cfg.train_config()?;
    let mut inputs = InputsManifest::default();
    let cadence_cfg = tc.clone();
    let cadence = Cadence {
        every: cfg.train.checkpoint_every,
        out: &out,
        config: &cadence_cfg,
        parent: None,
    };
    let trainer: Trainer<f32> = match dataset {
        Some(path) => {
            inputs.add("dataset", path)?;
            let data = Dataset::load(path)?;
            let geom = cfg.geometry.geometry()?;
            if data.channels != geom.mic_count() || data.len != tc.window_samples()? {
                return Err(Error::Config(format!(
                    "dataset holds {}x{} windows, config expects {}x{}",
                    data.channels,
                    data.len,
                    geom.mic_count(),
                    tc.window_samples()?
                )));
            }
            if data.records() == 0 {
                return Err(Error::format(path, "dataset has no records"));
            }
            tc.batch_size = tc.batch_size.min(data.records());
            let net = Network::init(tc.network_spec(data.channels)?, child_seed(tc.seed, domain::INIT, 0))?;
            let mut trainer = Trainer::new(net, tc.adam, tc.seed);
            let mut hook = cadence.hook();
            for epoch in 0..tc.epochs {
                let rec = trainer.epoch(&engine, &data, tc.batch_size, epoch, None)?;
                hook(&rec, &trainer.network, &trainer.optimizer)?;
            }
            trainer
        }
        None => {
            let synth = synthesizer(cfg)?;
            let fs = cfg.geometry.sample_rate_hz()?;
            let (corpus, files) = load_corpus(&cfg.corpus, fs, child_seed(cfg.seed, domain::SPEECH, 0))?;
            for (k, f) in files.iter().enumerate() {
                inputs.add(&format!("corpus[{k}]"), f)?;
            }
            let mut hook = cadence.hook();
            train::pretrain(
                &engine,
                &tc,
                &PretrainInputs {
                    synth: &synth,
                    corpus: &corpus,
                },
                &mut hook,
            )?
        }
    };
    inputs.write(&out)?;
    finish_training(&out, &checkpoint_of(&trainer, &tc, None), &trainer.history)
}

/// Reads sequences and cuts their windows at the configured length.
pub fn load_sequences(cfg: &RunConfig, manifests: &[PathBuf], inputs: &mut InputsManifest) -> Result<(Vec<Sequence>, RealWindowSet)> {
    let geom = cfg.geometry.geometry()?;
    let n = cfg.train_config()?.window_samples()?;
    let mut seqs = Vec::new();
    let mut all = RealWindowSet::default();
    for m in manifests {
        inputs.add(&format!("manifest:{}", m.display()), m)?;
        let seq = SequenceManifest::load(m)?.read(&cfg.geometry)?;
        for f in &seq.files {
            inputs.add(&format!("{}:{}", seq.id, f.display()), f)?;
        }
        if !seq.outside_room.is_empty() {
            eprintln!(
                "warning: {} has {} annotated positions outside the room (first at {} ms)",
                seq.id,
                seq.outside_room.len(),
                seq.outside_room[0]
            );
        }
        let (w, _) = seq.windows(n, &geom)?;
        all.extend(w);
        seqs.push(seq);
    }
    Ok((seqs, all))
}

/// Continues training a checkpoint on recorded windows.
pub fn finetune(cfg: &RunConfig, checkpoint: &Path, tune: &[PathBuf], test_sequences: &[String]) -> Result<TrainOutcome> {
    let out = prepare_out(cfg)?;
    let engine = Engine::new(cfg.deterministic);
    let tc = cfg.train_config()?;
    let mut inputs = InputsManifest::default();
    inputs.add("checkpoint", checkpoint)?;
    let parent = load_checkpoint(checkpoint)?;
    let (_, windows) = load_sequences(cfg, tune, &mut inputs)?;
    let cadence = Cadence {
        every: cfg.train.checkpoint_every,
        out: &out,
        config: &tc,
        parent: Some(parent.hash()),
    };
    let mut history = Vec::new();
    let mut hook = cadence.hook();
    let mut record = |r: &EpochRecord, n: &Network<f32>, a: &Adam<f32>| {
        history.push(*r);
        hook(r, n, a)
    };
    let ck = train::finetune(&engine, &parent, &windows, test_sequences, &tc, &mut record)?;
    inputs.write(&out)?;
    finish_training(&out, &ck, &history)
}

/// Trains a fresh network on recorded windows only.
pub fn train_scratch(cfg: &RunConfig, tune: &[PathBuf], test_sequences: &[String]) -> Result<TrainOutcome> {
    let out = prepare_out(cfg)?;
    let engine = Engine::new(cfg.deterministic);
    let tc = cfg.train_config()?;
    let mut inputs = InputsManifest::default();
    let (_, windows) = load_sequences(cfg, tune, &mut inputs)?;
    let cadence = Cadence {
        every: cfg.train.checkpoint_every,
        out: &out,
        config: &tc,
        parent: None,
    };
    let mut hook = cadence.hook();
    let trainer = train::train_from_scratch::<f32, _>(&engine, &windows, test_sequences, &tc, &mut hook)?;
    inputs.write(&out)?;
    finish_training(&out, &checkpoint_of(&trainer, &tc, None), &trainer.history)
}

/// Checks that a checkpoint was trained for the configured window length.
pub fn check_window(ck: &Checkpoint, cfg: &RunConfig) -> Result<()> {
    let n = cfg.train_config()?.window_samples()?;
    if ck.spec.input_len != n {
        let ms = ck.spec.input_len as f64 * 1000.0 / cfg.geometry.sample_rate;
        return Err(Error::Config(format!(
            "checkpoint expects {} samples ({ms} ms windows) but --window-ms {} gives {n}",
            ck.spec.input_len, cfg.window_ms
        )));
    }
    Ok(())
}

fn cnn_reports(engine: &Engine, net: &Network<f32>, seqs: &[Sequence], windows: &RealWindowSet, method: &str, window_ms: u32) -> Result<Vec<TrackReport>> {
    let preds = engine
        .map(windows.len(), |k| net.predict(&windows.windows[k].window))
        .into_iter()
        .collect::<srcloc_core::Result<Vec<Position>>>()?;
    let mut reports = Vec::new();
    for s in seqs {
        let frames: Vec<FrameRecord> = windows
            .windows
            .iter()
            .zip(&preds)
            .filter(|(w, _)| w.sequence == s.id)
            .map(|(w, &p)| FrameRecord {
                t_ms: w.t_ms,
                estimate: p,
                truth: w.target,
            })
            .collect();
        reports.push(TrackReport::new(&s.id, method, window_ms, frames)?);
    }
    Ok(reports)
}

fn write_reports(out: &Path, reports: &[TrackReport]) -> Result<()> {
    let dir = out.join("reports");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for r in reports {
        write_track_csv(&dir.join(track_file_name(r)), r)?;
    }
    Ok(())
}

/// Runs a checkpoint on every speaking frame of the given sequences.
pub fn eval_cnn(cfg: &RunConfig, checkpoint: &Path, sequences: &[PathBuf], method: &str) -> Result<Vec<TrackReport>> {
    let ck = load_checkpoint(checkpoint)?;
    check_window(&ck, cfg)?;
    let out = prepare_out(cfg)?;
    let mut inputs = InputsManifest::default();
    inputs.add("checkpoint", checkpoint)?;
    let (seqs, windows) = load_sequences(cfg, sequences, &mut inputs)?;
    let net: Network<f32> = ck.network()?;
    let reports = cnn_reports(&Engine::new(cfg.deterministic), &net, &seqs, &windows, method, cfg.window_ms)?;
    write_reports(&out, &reports)?;
    inputs.write(&out)?;
    Ok(reports)
}

fn srp_reports(cfg: &RunConfig, geom: &ArrayGeometry, seqs: &[Sequence], windows: &RealWindowSet, out: &Path) -> Result<Vec<TrackReport>> {
    let grid = cfg.srp.grid(geom, cfg.geometry.source_box()?)?;
    let opts = cfg.srp.options();
    let engine = Engine::new(cfg.deterministic);
    let est = engine.map(windows.len(), |k| srp_localize(&windows.windows[k].window, &grid, opts));
    let mut reports = Vec::new();
    for s in seqs {
        let mut frames = Vec::new();
        let mut series = Vec::new();
        for (w, e) in windows.windows.iter().zip(&est) {
            if w.sequence != s.id {
                continue;
            }
            match e {
                Ok(e) => {
                    frames.push(FrameRecord {
                        t_ms: w.t_ms,
                        estimate: e.position,
                        truth: w.target,
                    });
                    series.push(SrpFrame {
                        frame_ms: w.t_ms,
                        x: e.position.x,
                        y: e.position.y,
                        z: e.position.z,
                        power: e.power,
                    });
                }
                // no estimate: the frame is left out for every method
                Err(srcloc_core::Error::ZeroEnergy(_)) => {}
                Err(e) => return Err(e.clone().into()),
            }
        }
        write_srp_csv(&out.join(format!("srp_{}_{}ms.csv", s.id, cfg.window_ms)), &series)?;
        reports.push(TrackReport::new(&s.id, "SRP", cfg.window_ms, frames)?);
    }
    Ok(reports)
}

/// SRP-PHAT baseline on every speaking frame of the given sequences.
pub fn eval_srp(cfg: &RunConfig, sequences: &[PathBuf]) -> Result<Vec<TrackReport>> {
    let out = prepare_out(cfg)?;
    let geom = cfg.geometry.geometry()?;
    let mut inputs = InputsManifest::default();
    let (seqs, windows) = load_sequences(cfg, sequences, &mut inputs)?;
    let reports = srp_reports(cfg, &geom, &seqs, &windows, &out)?;
    write_reports(&out, &reports)?;
    inputs.write(&out)?;
    Ok(reports)
}

/// Options of the `report` command.
#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub reference: Option<String>,
    pub mode: MotpMode,
    pub average: AverageMode,
    /// Published table whose SRP and GMBF columns are shown alongside.
    pub published_table: Option<u32>,
    /// Drop frames missing from any method of the same sequence and window.
    pub common_frames: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            reference: Some("SRP".into()),
            mode: MotpMode::Euclidean,
            average: AverageMode::Pooled,
            published_table: None,
            common_frames: true,
        }
    }
}

/// Builds the result matrix of a set of track reports.
pub fn build_matrix(mut reports: Vec<TrackReport>, opts: &ReportOptions) -> Result<ResultMatrix> {
    if opts.common_frames {
        let mut groups: BTreeMap<(String, u32), Vec<usize>> = BTreeMap::new();
        for (i, r) in reports.iter().enumerate() {
            groups.entry((r.sequence.clone(), r.window_ms)).or_default().push(i);
        }
        for idx in groups.values() {
            let mut g: Vec<TrackReport> = idx.iter().map(|&i| reports[i].clone()).collect();
            restrict_to_common_frames(&mut g);
            for (&i, r) in idx.iter().zip(g) {
                reports[i] = r;
            }
        }
    }
    let reference = opts
        .reference
        .as_deref()
        .filter(|r| reports.iter().any(|x| x.method == *r));
    let m = ResultMatrix::from_reports(&reports, reference, opts.mode, opts.average)?;
    match opts.published_table {
        Some(t) => with_reference_columns(&m, t, &["SRP", "GMBF"]),
        None => Ok(m),
    }
}

/// Reads track reports from `dirs`, writes `matrix.csv` and `table.txt`.
pub fn report(dirs: &[PathBuf], out: &Path, opts: &ReportOptions) -> Result<(ResultMatrix, String)> {
    let mut reports = Vec::new();
    for d in dirs {
        reports.extend(read_track_dir(d)?);
    }
    if reports.is_empty() {
        return Err(Error::missing(dirs.first().map_or(Path::new("."), |d| d.as_path()), "no track reports found"));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let m = build_matrix(reports, opts)?;
    let table = render_table(&m);
    write_matrix_csv(&out.join("matrix.csv"), &m)?;
    write_text(&out.join("table.txt"), &table)?;
    Ok((m, table))
}

/// Normalizes a raw annotation file.
pub fn convert(input: &Path, mapping: Option<&Path>, output: &Path) -> Result<ConversionReport> {
    let raw = std::fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    let mapping = match mapping {
        Some(p) => AnnotationMapping::load(p)?,
        None => AnnotationMapping::identity(),
    };
    let (track, rep) = convert_annotations(&raw, input, &mapping)?;
    write_text(output, &format_ground_truth(&track))?;
    let mut report_path = output.as_os_str().to_owned();
    report_path.push(".report.txt");
    write_text(Path::new(&report_path), &rep.render())?;
    Ok(rep)
}

/// Sequences the full experiment matrix expects in the sequence directory.
pub const STATIC_SEQUENCES: [&str; 3] = ["seq01", "seq02", "seq03"];
pub const MOVING_SEQUENCES: [&str; 2] = ["seq15", "seq11"];

fn select(m: &ResultMatrix, methods: &[&str]) -> ResultMatrix {
    let mut s = m.clone();
    s.methods.retain(|x| methods.contains(&x.as_str()));
    s.cells.retain(|c| methods.contains(&c.method.as_str()));
    s
}

/// The complete experiment matrix: SRP baseline, the pretrained CNN, and
/// the fine-tuning and from-scratch variants, for every window length in
/// `windows_ms`. Expects `<dir>/<id>.toml` for seq01-03, seq11 and seq15
/// and the anechoic corpus configured in `cfg`.
pub fn reproduce(cfg: &RunConfig, dir: &Path, windows_ms: &[u32]) -> Result<ResultMatrix> {
    let root = prepare_out(cfg)?;
    let manifest = |id: &str| dir.join(format!("{id}.toml"));
    for id in STATIC_SEQUENCES.iter().chain(&MOVING_SEQUENCES) {
        if !manifest(id).exists() {
            return Err(Error::missing(&manifest(id), "sequence manifest required by the experiment matrix"));
        }
    }
    let statics: Vec<PathBuf> = STATIC_SEQUENCES.iter().map(|s| manifest(s)).collect();
    let mut reports = Vec::new();
    for &ms in windows_ms {
        let mut c = cfg.clone();
        c.window_ms = ms;
        c.out = root.join(format!("{ms}ms"));
        c.validate()?;
        let step = |name: &str| {
            let mut s = c.clone();
            s.out = c.out.join(name);
            s
        };
        let srp = eval_srp(&step("srp"), &statics)?;
        reports.extend(srp);
        let base = train(&step("pretrain"), None)?.checkpoint;
        reports.extend(eval_cnn(&step("eval_cnn"), &base, &statics, "CNN")?);
        let tests: Vec<String> = STATIC_SEQUENCES.iter().map(|s| s.to_string()).collect();

        let f15 = finetune(&step("f15"), &base, &[manifest("seq15")], &tests)?.checkpoint;
        reports.extend(eval_cnn(&step("eval_f15"), &f15, &statics, "CNNf15")?);
        let t15 = train_scratch(&step("t15"), &[manifest("seq15")], &tests)?.checkpoint;
        reports.extend(eval_cnn(&step("eval_t15"), &t15, &statics, "CNNt15")?);
        let moving = [manifest("seq15"), manifest("seq11")];
        let f1511 = finetune(&step("f15+11"), &base, &moving, &tests)?.checkpoint;
        reports.extend(eval_cnn(&step("eval_f15+11"), &f1511, &statics, "CNNf15+11")?);
        for test in STATIC_SEQUENCES {
            let mut tune = moving.to_vec();
            tune.extend(STATIC_SEQUENCES.iter().filter(|s| **s != test).map(|s| manifest(s)));
            let name = format!("f15+11+st_{test}");
            let ck = finetune(&step(&name), &base, &tune, &[test.to_string()])?.checkpoint;
            reports.extend(eval_cnn(&step(&format!("eval_{name}")), &ck, &[manifest(test)], "CNNf15+11+st")?);
        }
    }
    let opts = ReportOptions::default();
    let m = build_matrix(reports, &opts)?;
    write_matrix_csv(&root.join("matrix.csv"), &m)?;
    let tables: [(u32, &[&str]); 5] = [
        (3, &["SRP", "CNN"]),
        (4, &["SRP", "CNNf15"]),
        (5, &["SRP", "CNNt15", "CNNf15"]),
        (6, &["SRP", "CNNf15+11"]),
        (8, &["SRP", "CNNf15+11+st"]),
    ];
    let mut all = String::new();
    for (t, methods) in tables {
        let sub = with_reference_columns(&select(&m, methods), t, &["SRP", "GMBF"])?;
        let text = render_table(&sub);
        write_text(&root.join(format!("table{t}.txt")), &text)?;
        let _ = writeln!(all, "Table {t}\n{text}");
    }
    write_text(&root.join("tables.txt"), &all)?;
    Ok(m)
}
