//! Training schedules: semi-synthetic pretraining, fine-tuning on recorded
//! windows and training from scratch.
//!
//! Gradients are summed over fixed chunks of [`CHUNK`] examples in index
//! order and the chunk sums are added in chunk order, so any
//! [`GradientEngine`] that preserves the order of its map produces the same
//! bits as the sequential one.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::geometry::Position;
use crate::hash::Hasher;
use crate::nn::{Adam, AdamConfig, Checkpoint, ConvBlock, Gradients, Lineage, Mode, Network, NetworkSpec, Real};
use crate::realdata::RealWindowSet;
use crate::rng::{child_seed, domain, substream};
use crate::signal::{AnechoicClip, EpochPlan, EpochSpec, LabeledExample, Synthesizer};
use crate::{Error, Result};

/// Examples per gradient partial sum.
pub const CHUNK: usize = 10;

/// Network layout beyond the input shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub blocks: Vec<ConvBlock>,
    pub hidden: usize,
    pub dropout: f64,
}

impl Default for Topology {
    fn default() -> Self {
        Topology {
            blocks: crate::nn::REFERENCE_BLOCKS.to_vec(),
            hidden: crate::nn::REFERENCE_HIDDEN,
            dropout: crate::nn::REFERENCE_DROPOUT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub window_ms: u32,
    pub sample_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub epoch: EpochSpec,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Passes over the recorded windows when fine-tuning or training from scratch.
    pub finetune_epochs: usize,
    pub topology: Topology,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            window_ms: 80,
            sample_rate: crate::geometry::SAMPLE_RATE,
            epochs: 200,
            batch_size: 100,
            epoch: EpochSpec::default(),
            adam: AdamConfig::default(),
            seed: 0,
            finetune_epochs: 50,
            topology: Topology::default(),
        }
    }
}

impl TrainConfig {
    /// Samples per window; the product `fs · ms / 1000` must be an integer.
    pub fn window_samples(&self) -> Result<usize> {
        window_samples(self.window_ms, self.sample_rate)
    }

    pub fn network_spec(&self, channels: usize) -> Result<NetworkSpec> {
        let spec = NetworkSpec {
            input_channels: channels,
            input_len: self.window_samples()?,
            blocks: self.topology.blocks.clone(),
            hidden: self.topology.hidden,
            output: 3,
            dropout: self.topology.dropout,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.window_samples()?;
        self.epoch.validate()?;
        self.adam.validate()?;
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if self.epochs > 0 && self.batch_size > self.epoch.train_count() {
            return Err(Error::InvalidConfig(format!(
                "batch size {} exceeds {} training examples per epoch",
                self.batch_size,
                self.epoch.train_count()
            )));
        }
        Ok(())
    }

    /// Content hash recorded in checkpoint lineage.
    pub fn hash(&self) -> u64 {
        let mut h = Hasher::new();
        h.bytes(b"srcloc-train-v1")
            .u64(self.window_ms as u64)
            .f64(self.sample_rate)
            .u64(self.epochs as u64)
            .u64(self.batch_size as u64)
            .u64(self.epoch.clips as u64)
            .u64(self.epoch.windows_per_clip as u64)
            .f64(self.epoch.validation_fraction)
            .f64(self.epoch.min_rms)
            .f64(self.adam.learning_rate)
            .f64(self.adam.beta1)
            .f64(self.adam.beta2)
            .f64(self.adam.epsilon)
            .u64(self.seed)
            .u64(self.finetune_epochs as u64)
            .u64(self.topology.blocks.len() as u64);
        for b in &self.topology.blocks {
            h.u64(b.filters as u64).u64(b.kernel as u64).u64(b.pool as u64);
        }
        h.u64(self.topology.hidden as u64).f64(self.topology.dropout);
        h.finish_u64()
    }
}

pub fn window_samples(window_ms: u32, sample_rate: f64) -> Result<usize> {
    let n = sample_rate * window_ms as f64 / 1000.0;
    if window_ms == 0 || !n.is_finite() || n != libm::round(n) {
        return Err(Error::InvalidConfig(format!(
            "{window_ms} ms at {sample_rate} Hz is not a whole number of samples"
        )));
    }
    Ok(n as usize)
}

/// Random-access labeled examples: flat channel-major input plus target.
pub trait ExampleSet: Sync {
    fn len(&self) -> usize;
    fn get(&self, index: usize) -> Result<(Vec<f64>, Position)>;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ExampleSet for [LabeledExample] {
    fn len(&self) -> usize {
        <[LabeledExample]>::len(self)
    }
    fn get(&self, index: usize) -> Result<(Vec<f64>, Position)> {
        let ex = &self[index];
        Ok((ex.window.as_flat().to_vec(), ex.target))
    }
}

impl ExampleSet for Vec<LabeledExample> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }
    fn get(&self, index: usize) -> Result<(Vec<f64>, Position)> {
        ExampleSet::get(self.as_slice(), index)
    }
}

impl ExampleSet for RealWindowSet {
    fn len(&self) -> usize {
        self.windows.len()
    }
    fn get(&self, index: usize) -> Result<(Vec<f64>, Position)> {
        let w = &self.windows[index];
        Ok((w.window.as_flat().to_vec(), w.target))
    }
}

/// The training indices of one epoch plan, generated on demand.
struct PlanTrainSet<'a, 'b>(&'b EpochPlan<'a>);

impl ExampleSet for PlanTrainSet<'_, '_> {
    fn len(&self) -> usize {
        self.0.train_indices().len()
    }
    fn get(&self, index: usize) -> Result<(Vec<f64>, Position)> {
        let ex = self.0.example(self.0.train_indices()[index])?;
        Ok((ex.window.into_flat(), ex.target))
    }
}

/// Ordered map over `0..n`. Implementations may run items concurrently but
/// must return results in index order.
pub trait GradientEngine: Sync {
    fn map<R: Send, F: Fn(usize) -> R + Sync>(&self, n: usize, f: F) -> Vec<R>;
}

/// Single-threaded engine.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl GradientEngine for Sequential {
    fn map<R: Send, F: Fn(usize) -> R + Sync>(&self, n: usize, f: F) -> Vec<R> {
        (0..n).map(f).collect()
    }
}

fn to_input<T: Real>(x: &[f64]) -> Vec<T> {
    x.iter().map(|&v| T::lit(v)).collect()
}

fn target_vec<T: Real>(p: Position) -> [T; 3] {
    [T::lit(p.x), T::lit(p.y), T::lit(p.z)]
}

/// Summed squared error and gradient of `(1/scale_den) Σ ‖s − q‖²` over
/// the examples `indices` of `data`, in order.
pub fn chunk_gradient<T: Real, D: ExampleSet + ?Sized>(
    net: &Network<T>,
    data: &D,
    indices: &[usize],
    batch_len: usize,
    dropout_seed: Option<u64>,
    first_position: usize,
) -> Result<(f64, Gradients<T>)> {
    let mut grads = Gradients::zeros_like(net);
    let mut loss = 0.0;
    let scale = T::lit(2.0 / batch_len as f64);
    for (k, &i) in indices.iter().enumerate() {
        let (x, q) = data.get(i)?;
        let cache = match dropout_seed {
            Some(seed) => {
                let mut rng = substream(seed, domain::DROPOUT, (first_position + k) as u64);
                net.forward_cached(&to_input::<T>(&x), Mode::Train, Some(&mut rng))?
            }
            None => net.forward_cached(&to_input::<T>(&x), Mode::Inference, None)?,
        };
        let q = target_vec::<T>(q);
        let d: Vec<T> = cache.output.iter().zip(&q).map(|(&s, &t)| s - t).collect();
        loss += d.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>();
        let d_out: Vec<T> = d.iter().map(|&v| v * scale).collect();
        net.backward(&cache, &d_out, &mut grads)?;
    }
    Ok((loss, grads))
}

/// Mean loss and gradient of one batch, reduced in fixed chunk order.
pub fn batch_gradient<T: Real, D: ExampleSet + ?Sized, E: GradientEngine>(
    engine: &E,
    net: &Network<T>,
    data: &D,
    batch: &[usize],
    dropout_seed: Option<u64>,
) -> Result<(f64, Gradients<T>)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let chunks: Vec<&[usize]> = batch.chunks(CHUNK).collect();
    let parts = engine.map(chunks.len(), |c| {
        chunk_gradient(net, data, chunks[c], batch.len(), dropout_seed, c * CHUNK)
    });
    let mut total = Gradients::zeros_like(net);
    let mut loss = 0.0;
    for p in parts {
        let (l, g) = p?;
        loss += l;
        total.add(&g);
    }
    Ok((loss / batch.len() as f64, total))
}

/// Mean squared error over a whole set, dropout disabled.
pub fn evaluate_loss<T: Real, D: ExampleSet + ?Sized, E: GradientEngine>(
    engine: &E,
    net: &Network<T>,
    data: &D,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n_chunks = data.len().div_ceil(CHUNK);
    let parts = engine.map(n_chunks, |c| -> Result<f64> {
        let mut sum = 0.0;
        for i in c * CHUNK..((c + 1) * CHUNK).min(data.len()) {
            let (x, q) = data.get(i)?;
            let y = net.forward(&to_input::<T>(&x))?;
            let d = Position::new(y[0].as_f64(), y[1].as_f64(), y[2].as_f64()) - q;
            sum += d.norm_squared();
        }
        Ok(sum)
    });
    let mut total = 0.0;
    for p in parts {
        total += p?;
    }
    Ok(total / data.len() as f64)
}

/// Loss summary of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the batch losses seen during the epoch (dropout active).
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
    /// Optimizer steps taken so far.
    pub steps: u64,
}

/// A network and optimizer under training.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub network: Network<T>,
    pub optimizer: Adam<T>,
    pub history: Vec<EpochRecord>,
    seed: u64,
}

impl<T: Real> Trainer<T> {
    pub fn new(network: Network<T>, adam: AdamConfig, seed: u64) -> Self {
        let optimizer = Adam::new(adam, network.params());
        Trainer {
            network,
            optimizer,
            history: Vec::new(),
            seed,
        }
    }

    pub fn steps(&self) -> u64 {
        self.optimizer.step
    }

    /// One optimizer step on `batch`. Dropout masks come from the step
    /// number and each example's position in the batch.
    pub fn step<D: ExampleSet + ?Sized, E: GradientEngine>(&mut self, engine: &E, data: &D, batch: &[usize]) -> Result<f64> {
        let step = self.optimizer.step;
        let seed = child_seed(self.seed, domain::DROPOUT, step);
        let (loss, grads) = batch_gradient(engine, &self.network, data, batch, Some(seed)).map_err(|e| match e {
            Error::NonFinite(_) => Error::Diverged { step },
            e => e,
        })?;
        if !loss.is_finite() || !grads.is_finite() {
            return Err(Error::Diverged { step });
        }
        self.optimizer.update(self.network.params_mut(), &grads)?;
        Ok(loss)
    }

    /// One pass over `data` in a seeded shuffled order.
    pub fn epoch<D: ExampleSet + ?Sized, E: GradientEngine>(
        &mut self,
        engine: &E,
        data: &D,
        batch_size: usize,
        epoch: usize,
        validation: Option<&dyn ExampleSet>,
    ) -> Result<EpochRecord> {
        if data.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut rng = substream(self.seed, domain::SHUFFLE, epoch as u64);
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(batch_size.max(1)) {
            sum += self.step(engine, data, batch)?;
            batches += 1;
        }
        let validation_loss = match validation {
            Some(v) => Some(evaluate_loss(engine, &self.network, v)?),
            None => None,
        };
        let rec = EpochRecord {
            epoch,
            train_loss: sum / batches as f64,
            validation_loss,
            steps: self.optimizer.step,
        };
        self.history.push(rec);
        Ok(rec)
    }
}

/// Per-epoch callback, e.g. for checkpoint cadence or logging.
pub type EpochHook<'h, T> = dyn FnMut(&EpochRecord, &Network<T>, &Adam<T>) -> Result<()> + 'h;

/// Everything a pretraining run needs besides the config.
pub struct PretrainInputs<'a> {
    pub synth: &'a Synthesizer,
    pub corpus: &'a [AnechoicClip],
}

/// Semi-synthetic pretraining: every epoch draws a fresh plan of
/// `config.epoch` examples; validation uses one fixed held-out set per run.
pub fn pretrain<T: Real, E: GradientEngine>(
    engine: &E,
    config: &TrainConfig,
    inputs: &PretrainInputs<'_>,
    hook: &mut EpochHook<'_, T>,
) -> Result<Trainer<T>> {
    config.validate()?;
    let m = inputs.synth.geometry().mic_count();
    if inputs.synth.window_len() != config.window_samples()? {
        return Err(Error::InvalidConfig(format!(
            "synthesizer produces {} samples, config wants {}",
            inputs.synth.window_len(),
            config.window_samples()?
        )));
    }
    let spec = config.network_spec(m)?;
    let net = Network::init(spec, child_seed(config.seed, domain::INIT, 0))?;
    let mut trainer = Trainer::new(net, config.adam, config.seed);
    if config.epochs == 0 {
        return Ok(trainer);
    }
    let val_plan = EpochPlan::new(inputs.synth, inputs.corpus, config.epoch, config.seed, u64::MAX)?;
    let val_examples = engine
        .map(val_plan.validation_indices().len(), |k| val_plan.example(val_plan.validation_indices()[k]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let validation = (!val_examples.is_empty()).then_some(val_examples);
    for epoch in 0..config.epochs {
        let plan = EpochPlan::new(inputs.synth, inputs.corpus, config.epoch, config.seed, epoch as u64)?;
        let data = PlanTrainSet(&plan);
        let rec = trainer.epoch(
            engine,
            &data,
            config.batch_size,
            epoch,
            validation.as_ref().map(|v| v as &dyn ExampleSet),
        )?;
        hook(&rec, &trainer.network, &trainer.optimizer)?;
    }
    Ok(trainer)
}

/// Fails if any fine-tuning sequence is also a test sequence.
pub fn check_leak(tune: &[String], test: &[String]) -> Result<()> {
    let mut shared: Vec<&str> = tune.iter().filter(|s| test.contains(s)).map(|s| s.as_str()).collect();
    shared.sort_unstable();
    shared.dedup();
    if shared.is_empty() {
        Ok(())
    } else {
        Err(Error::Leak(shared.join(", ")))
    }
}

fn train_on_windows<T: Real, E: GradientEngine>(
    engine: &E,
    config: &TrainConfig,
    mut trainer: Trainer<T>,
    windows: &RealWindowSet,
    hook: &mut EpochHook<'_, T>,
) -> Result<Trainer<T>> {
    if windows.windows.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let spec = trainer.network.spec();
    for w in &windows.windows {
        if w.window.channels() != spec.input_channels || w.window.len() != spec.input_len {
            return Err(Error::ShapeMismatch {
                op: "fine-tuning",
                detail: format!(
                    "window {}x{} from {} does not fit network input {}x{}",
                    w.window.channels(),
                    w.window.len(),
                    w.sequence,
                    spec.input_channels,
                    spec.input_len
                ),
            });
        }
    }
    let batch = config.batch_size.min(windows.windows.len());
    for epoch in 0..config.finetune_epochs {
        let rec = trainer.epoch(engine, windows, batch, epoch, None)?;
        hook(&rec, &trainer.network, &trainer.optimizer)?;
    }
    Ok(trainer)
}

/// Continues training `parent` on recorded windows with a fresh optimizer.
///
/// `test_sequences` are the sequences the result will be evaluated on; any
/// overlap with the windows' sequences is an error.
pub fn finetune<E: GradientEngine>(
    engine: &E,
    parent: &Checkpoint,
    windows: &RealWindowSet,
    test_sequences: &[String],
    config: &TrainConfig,
    hook: &mut EpochHook<'_, f32>,
) -> Result<Checkpoint> {
    check_leak(&windows.sequences(), test_sequences)?;
    if windows.windows.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let expected = config.network_spec(parent.spec.input_channels)?;
    parent.check_topology(&expected)?;
    if config.finetune_epochs == 0 {
        return Ok(parent.clone());
    }
    let net: Network<f32> = parent.network()?;
    let seed = child_seed(config.seed, domain::SHUFFLE, 0xF1);
    let trainer = Trainer::new(net, config.adam, seed);
    let trainer = train_on_windows(engine, config, trainer, windows, hook)?;
    Ok(Checkpoint::from_network(
        &trainer.network,
        Some(&trainer.optimizer),
        Lineage {
            seed: config.seed,
            config_hash: config.hash(),
            parent: Some(parent.hash()),
        },
    ))
}

/// Fine-tuning from a random initialization.
pub fn train_from_scratch<T: Real, E: GradientEngine>(
    engine: &E,
    windows: &RealWindowSet,
    test_sequences: &[String],
    config: &TrainConfig,
    hook: &mut EpochHook<'_, T>,
) -> Result<Trainer<T>> {
    check_leak(&windows.sequences(), test_sequences)?;
    let m = windows
        .windows
        .first()
        .map(|w| w.window.channels())
        .ok_or(Error::EmptyBatch)?;
    let spec = config.network_spec(m)?;
    let net = Network::init(spec, child_seed(config.seed, domain::INIT, 0))?;
    let trainer = Trainer::new(net, config.adam, config.seed);
    train_on_windows(engine, config, trainer, windows, hook)
}

/// Snapshot of a trainer with lineage.
pub fn checkpoint_of<T: Real>(trainer: &Trainer<T>, config: &TrainConfig, parent: Option<[u8; 32]>) -> Checkpoint {
    Checkpoint::from_network(
        &trainer.network,
        Some(&trainer.optimizer),
        Lineage {
            seed: config.seed,
            config_hash: config.hash(),
            parent,
        },
    )
}

/// Hook that does nothing.
pub fn no_hook<T>() -> impl FnMut(&EpochRecord, &Network<T>, &Adam<T>) -> Result<()> {
    |_, _, _| Ok(())
}
