//! GCC-PHAT time-delay estimation and the SRP-PHAT grid-search localizer.
//!
//! Lag convention: a positive lag means the first signal lags the second,
//! i.e. `R[τ] = Σ_n x_i[n + τ]·x_j[n]`. For microphone signals this makes
//! the correlation peak of pair `(i, j)` sit at `N_s_i − N_s_j`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::fft::FftPlan;
use crate::geometry::{sample_delay, ArrayGeometry, Position, SourceBox};
use crate::signal::MultichannelWindow;
use crate::{Error, Result};

/// Relative floor applied to cross-spectrum magnitudes before whitening.
pub const PHAT_FLOOR: f64 = 1e-12;

/// A cross-correlation sampled at lags `j / upsample` for
/// `j ∈ [−max_lag·upsample, max_lag·upsample]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationFunction {
    values: Vec<f64>,
    max_lag: usize,
    upsample: usize,
    sample_rate: f64,
    // whitened cross-spectrum, bins 0..=N/2, for band-limited evaluation
    spectrum: Vec<Complex64>,
    len: usize,
}

impl CorrelationFunction {
    /// Values ordered from the most negative lag to the most positive.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest lag represented, in samples.
    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    /// Samples per unit lag.
    pub fn upsample(&self) -> usize {
        self.upsample
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Lag (in samples) of entry `index`.
    pub fn lag_of(&self, index: usize) -> f64 {
        (index as f64 - (self.max_lag * self.upsample) as f64) / self.upsample as f64
    }

    /// Value at an exactly representable lag.
    pub fn at_integer_lag(&self, lag: i64) -> Option<f64> {
        let idx = lag * self.upsample as i64 + (self.max_lag * self.upsample) as i64;
        usize::try_from(idx).ok().and_then(|i| self.values.get(i).copied())
    }

    /// Linear interpolation between stored lags; zero outside the range.
    pub fn value_at(&self, lag: f64) -> f64 {
        let pos = lag * self.upsample as f64 + (self.max_lag * self.upsample) as f64;
        if pos.is_nan() || pos < 0.0 || pos > (self.values.len() - 1) as f64 {
            return 0.0;
        }
        let i = libm::floor(pos) as usize;
        if i + 1 >= self.values.len() {
            return self.values[self.values.len() - 1];
        }
        let frac = pos - i as f64;
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }

    /// Exact evaluation of the band-limited correlation at a fractional lag.
    pub fn band_limited_at(&self, lag: f64) -> f64 {
        let n = self.len;
        let step = crate::fft::unit_phasor(lag, n as f64);
        let mut rot = step;
        let mut acc = self.spectrum[0].re;
        let half = if n.is_multiple_of(2) { n / 2 } else { n / 2 + 1 };
        for k in 1..half {
            acc += 2.0 * (self.spectrum[k] * rot).re;
            rot *= step;
        }
        if n.is_multiple_of(2) {
            acc += self.spectrum[n / 2].re * libm::cos(PI * lag);
        }
        acc / n as f64
    }

    /// Stored lag with the largest value.
    pub fn argmax(&self) -> (f64, f64) {
        let (i, v) = self.argmax_index();
        (self.lag_of(i), v)
    }

    fn argmax_index(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
    }

    /// Peak lag refined by a parabola through the maximum and its neighbors.
    pub fn refined_peak(&self) -> (f64, f64) {
        let (i, v) = self.argmax_index();
        if i == 0 || i + 1 >= self.values.len() {
            return (self.lag_of(i), v);
        }
        let (ym, y0, yp) = (self.values[i - 1], v, self.values[i + 1]);
        let (offset, peak) = parabolic_vertex(ym, y0, yp);
        (self.lag_of(i) + offset / self.upsample as f64, peak)
    }
}

/// Vertex of the parabola through `(-1, ym)`, `(0, y0)`, `(1, yp)`.
pub fn parabolic_vertex(ym: f64, y0: f64, yp: f64) -> (f64, f64) {
    let denom = ym - 2.0 * y0 + yp;
    if denom.abs() < f64::MIN_POSITIVE || !denom.is_finite() {
        return (0.0, y0);
    }
    let offset = (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5);
    (offset, y0 - 0.25 * (ym - yp) * offset)
}

/// Options for [`gcc_phat_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GccOptions {
    /// Largest lag kept, samples; `None` keeps every lag up to `(N−1)/2`.
    pub max_lag: Option<usize>,
    /// Lag-domain oversampling through zero-padding of the cross-spectrum.
    pub upsample: usize,
}

impl Default for GccOptions {
    fn default() -> Self {
        GccOptions {
            max_lag: None,
            upsample: 1,
        }
    }
}

/// GCC-PHAT of two equal-length signals at integer lags.
pub fn gcc_phat(xi: &[f64], xj: &[f64], sample_rate: f64) -> Result<CorrelationFunction> {
    gcc_phat_with(xi, xj, sample_rate, GccOptions::default())
}

/// Forward transforms reused across the pairs of one window.
pub struct Spectra {
    plan: FftPlan,
    upsampled: Option<FftPlan>,
    bins: Vec<Vec<Complex64>>,
}

impl Spectra {
    pub fn new(channels: &[&[f64]], upsample: usize) -> Result<Self> {
        let n = channels.first().map_or(0, |c| c.len());
        if n < 2 {
            return Err(Error::TooShort { needed: 2, got: n });
        }
        let plan = FftPlan::new(n);
        let mut bins = Vec::with_capacity(channels.len());
        for c in channels {
            if c.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: c.len(),
                });
            }
            bins.push(plan.forward_real(c));
        }
        let upsampled = (upsample > 1).then(|| FftPlan::new(n * upsample));
        Ok(Spectra { plan, upsampled, bins })
    }

    /// Whitened correlation between channels `i` and `j`.
    pub fn gcc(&self, i: usize, j: usize, sample_rate: f64, opts: GccOptions) -> Result<CorrelationFunction> {
        let n = self.plan.len();
        let u = opts.upsample.max(1);
        let (xi, xj) = (&self.bins[i], &self.bins[j]);
        let zero_i = xi.iter().all(|c| c.norm_sqr() == 0.0);
        let zero_j = xj.iter().all(|c| c.norm_sqr() == 0.0);
        if zero_i || zero_j {
            return Err(Error::ZeroEnergy("gcc_phat"));
        }
        let mut cross: Vec<Complex64> = xi.iter().zip(xj).map(|(a, b)| a * b.conj()).collect();
        let peak = cross.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let floor = PHAT_FLOOR * peak;
        for c in cross.iter_mut() {
            *c /= c.norm().max(floor);
        }
        let spectrum = cross[..=n / 2].to_vec();

        let total = n * u;
        let mut padded = if u == 1 {
            cross
        } else {
            let mut p = vec![Complex64::new(0.0, 0.0); total];
            let half = n.div_ceil(2);
            p[..half].copy_from_slice(&cross[..half]);
            for k in half..n {
                p[total - (n - k)] = cross[k];
            }
            if n.is_multiple_of(2) {
                // split the Nyquist bin across both ends
                let nyq = cross[n / 2] * 0.5;
                p[n / 2] = nyq;
                p[total - n / 2] = nyq;
            }
            p
        };
        match &self.upsampled {
            Some(plan) if u > 1 => {
                if plan.len() != total {
                    FftPlan::new(total).inverse(&mut padded)
                } else {
                    plan.inverse(&mut padded)
                }
            }
            _ if u > 1 => FftPlan::new(total).inverse(&mut padded),
            _ => self.plan.inverse(&mut padded),
        }

        let max_lag = opts.max_lag.unwrap_or((n - 1) / 2).min((n - 1) / 2);
        let reach = max_lag * u;
        let mut values = Vec::with_capacity(2 * reach + 1);
        for j in 0..=2 * reach {
            let lag = j as isize - reach as isize;
            let idx = lag.rem_euclid(total as isize) as usize;
            values.push(padded[idx].re * u as f64);
        }
        Ok(CorrelationFunction {
            values,
            max_lag,
            upsample: u,
            sample_rate,
            spectrum,
            len: n,
        })
    }
}

/// GCC-PHAT with explicit lag range and oversampling.
pub fn gcc_phat_with(xi: &[f64], xj: &[f64], sample_rate: f64, opts: GccOptions) -> Result<CorrelationFunction> {
    if xi.len() != xj.len() {
        return Err(Error::LengthMismatch {
            expected: xi.len(),
            got: xj.len(),
        });
    }
    Spectra::new(&[xi, xj], opts.upsample)?.gcc(0, 1, sample_rate, opts)
}

/// Every unordered microphone pair.
pub fn all_pairs(mics: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..mics {
        for j in i + 1..mics {
            pairs.push((i, j));
        }
    }
    pairs
}

/// The two intra-pair combinations (1,5) and (11,15) of the IDIAP subset,
/// or every pair when those microphones are not all present.
pub fn default_pairs(geom: &ArrayGeometry) -> Vec<(usize, usize)> {
    let find = |l| geom.index_of_label(l);
    match (find(1), find(5), find(11), find(15)) {
        (Some(a), Some(b), Some(c), Some(d)) => vec![(a, b), (c, d)],
        _ => all_pairs(geom.mic_count()),
    }
}

/// How the height axis is handled by the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeightMode {
    Search,
    /// Single plane at this height.
    Fixed(f64),
    /// Single plane at the middle of the box.
    MidBox,
}

/// How a fractional TDOA is looked up in a correlation function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TdoaLookup {
    /// Linear interpolation of the (optionally oversampled) correlation.
    Linear { upsample: usize },
    /// Direct evaluation of the band-limited correlation at the exact lag.
    BandLimited,
}

impl Default for TdoaLookup {
    fn default() -> Self {
        TdoaLookup::Linear { upsample: 8 }
    }
}

/// Candidate source positions with precomputed steering delays.
#[derive(Debug, Clone)]
pub struct SearchGrid {
    bounds: SourceBox,
    resolution: [f64; 3],
    dims: [usize; 3],
    origin: Position,
    pairs: Vec<(usize, usize)>,
    // per cell, per pair: N_s_i − N_s_j
    steering: Vec<f64>,
    max_abs_tdoa: f64,
}

impl SearchGrid {
    /// Lays out nodes `lo + k·res` along each axis inside `bounds`.
    pub fn new(
        geom: &ArrayGeometry,
        bounds: SourceBox,
        resolution: f64,
        height: HeightMode,
        pairs: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::InvalidConfig(format!("grid resolution {resolution} must be positive")));
        }
        if pairs.is_empty() {
            return Err(Error::InvalidConfig("no microphone pairs".into()));
        }
        for &(i, j) in &pairs {
            geom.mic(i)?;
            geom.mic(j)?;
        }
        let (lo, hi) = (bounds.lo(), bounds.hi());
        let count = |a: f64, b: f64| libm::floor((b - a) / resolution + 1e-9) as usize + 1;
        let (z0, nz) = match height {
            HeightMode::Search => (lo.z, count(lo.z, hi.z)),
            HeightMode::Fixed(z) => {
                if !(lo.z..=hi.z).contains(&z) {
                    return Err(Error::OutsideBox(format!("grid height {z}")));
                }
                (z, 1)
            }
            HeightMode::MidBox => ((lo.z + hi.z) / 2.0, 1),
        };
        let dims = [count(lo.x, hi.x), count(lo.y, hi.y), nz];
        let origin = Position::new(lo.x, lo.y, z0);
        let mut grid = SearchGrid {
            bounds,
            resolution: [resolution; 3],
            dims,
            origin,
            steering: Vec::with_capacity(dims[0] * dims[1] * dims[2] * pairs.len()),
            pairs,
            max_abs_tdoa: 0.0,
        };
        for cell in 0..grid.len() {
            let p = grid.position(cell);
            for &(i, j) in &grid.pairs {
                let tau = sample_delay(p, i, geom)? - sample_delay(p, j, geom)?;
                grid.max_abs_tdoa = grid.max_abs_tdoa.max(tau.abs());
                grid.steering.push(tau);
            }
        }
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn resolution(&self) -> f64 {
        self.resolution[0]
    }

    pub fn bounds(&self) -> &SourceBox {
        &self.bounds
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Half the diagonal of one cell (in the searched dimensions).
    pub fn half_diagonal(&self) -> f64 {
        let searched = if self.dims[2] > 1 { 3.0 } else { 2.0 };
        0.5 * self.resolution[0] * libm::sqrt(searched)
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iz * self.dims[1] + iy) * self.dims[0] + ix
    }

    pub fn coords(&self, cell: usize) -> [usize; 3] {
        let ix = cell % self.dims[0];
        let iy = (cell / self.dims[0]) % self.dims[1];
        let iz = cell / (self.dims[0] * self.dims[1]);
        [ix, iy, iz]
    }

    /// Center of grid cell `cell`.
    pub fn position(&self, cell: usize) -> Position {
        let [ix, iy, iz] = self.coords(cell);
        self.origin
            + Position::new(
                ix as f64 * self.resolution[0],
                iy as f64 * self.resolution[1],
                iz as f64 * self.resolution[2],
            )
    }

    /// Cell whose center is closest to `p`.
    pub fn nearest_cell(&self, p: Position) -> usize {
        let snap = |v: f64, o: f64, r: f64, n: usize| -> usize {
            let k = libm::round((v - o) / r);
            (k.max(0.0) as usize).min(n - 1)
        };
        let ix = snap(p.x, self.origin.x, self.resolution[0], self.dims[0]);
        let iy = snap(p.y, self.origin.y, self.resolution[1], self.dims[1]);
        let iz = snap(p.z, self.origin.z, self.resolution[2], self.dims[2]);
        self.index(ix, iy, iz)
    }

    /// Steering TDOAs of `cell`, one per pair.
    pub fn steering(&self, cell: usize) -> &[f64] {
        let np = self.pairs.len();
        &self.steering[cell * np..(cell + 1) * np]
    }

    pub fn max_abs_tdoa(&self) -> f64 {
        self.max_abs_tdoa
    }
}

/// Pairwise correlations of one window, ready for grid evaluation.
#[derive(Debug, Clone)]
pub struct PairCorrelations {
    functions: Vec<CorrelationFunction>,
    lookup: TdoaLookup,
}

impl PairCorrelations {
    pub fn compute(window: &MultichannelWindow, grid: &SearchGrid, lookup: TdoaLookup) -> Result<Self> {
        let upsample = match lookup {
            TdoaLookup::Linear { upsample } => upsample.max(1),
            TdoaLookup::BandLimited => 1,
        };
        let max_lag = libm::ceil(grid.max_abs_tdoa()) as usize + 2;
        let channels: Vec<&[f64]> = (0..window.channels()).map(|c| window.channel(c)).collect();
        for &(i, j) in grid.pairs() {
            if i >= channels.len() || j >= channels.len() {
                return Err(Error::ShapeMismatch {
                    op: "srp_phat_map",
                    detail: format!("pair ({i}, {j}) on a {}-channel window", channels.len()),
                });
            }
        }
        let spectra = Spectra::new(&channels, upsample)?;
        let opts = GccOptions {
            max_lag: Some(max_lag),
            upsample,
        };
        let functions = grid
            .pairs()
            .iter()
            .map(|&(i, j)| spectra.gcc(i, j, window.sample_rate(), opts))
            .collect::<Result<Vec<_>>>()?;
        Ok(PairCorrelations { functions, lookup })
    }

    pub fn functions(&self) -> &[CorrelationFunction] {
        &self.functions
    }

    /// Steered response power of a single cell.
    pub fn power(&self, grid: &SearchGrid, cell: usize) -> f64 {
        let taus = grid.steering(cell);
        match self.lookup {
            TdoaLookup::Linear { .. } => self.functions.iter().zip(taus).map(|(f, &t)| f.value_at(t)).sum(),
            TdoaLookup::BandLimited => self.functions.iter().zip(taus).map(|(f, &t)| f.band_limited_at(t)).sum(),
        }
    }

    /// Fills `out[k]` with the power of cell `start + k`.
    pub fn power_range(&self, grid: &SearchGrid, start: usize, out: &mut [f64]) {
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = self.power(grid, start + k);
        }
    }
}

/// SRP-PHAT power for every grid cell.
pub fn srp_phat_map(window: &MultichannelWindow, grid: &SearchGrid, lookup: TdoaLookup) -> Result<Vec<f64>> {
    let corr = PairCorrelations::compute(window, grid, lookup)?;
    let mut out = vec![0.0; grid.len()];
    corr.power_range(grid, 0, &mut out);
    Ok(out)
}

/// Options for [`srp_localize`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SrpOptions {
    pub lookup: TdoaLookup,
    /// Refine the argmax with a per-axis parabola over its neighbors.
    pub interpolate: bool,
}

/// Location estimate with its steered power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrpEstimate {
    pub position: Position,
    pub power: f64,
    pub cell: usize,
}

/// Best cell of an already evaluated map.
pub fn localize_from_map(map: &[f64], grid: &SearchGrid, interpolate: bool) -> SrpEstimate {
    let (cell, power) = map
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    let mut position = grid.position(cell);
    if interpolate {
        let c = grid.coords(cell);
        let mut offset = [0.0; 3];
        for (axis, off) in offset.iter_mut().enumerate() {
            if c[axis] == 0 || c[axis] + 1 >= grid.dims[axis] {
                continue;
            }
            let mut lo = c;
            let mut hi = c;
            lo[axis] -= 1;
            hi[axis] += 1;
            let ym = map[grid.index(lo[0], lo[1], lo[2])];
            let yp = map[grid.index(hi[0], hi[1], hi[2])];
            *off = parabolic_vertex(ym, power, yp).0 * grid.resolution[axis];
        }
        position = position + Position::from_array(offset);
    }
    SrpEstimate { position, power, cell }
}

/// SRP-PHAT position estimate for one window.
pub fn srp_localize(window: &MultichannelWindow, grid: &SearchGrid, opts: SrpOptions) -> Result<SrpEstimate> {
    let map = srp_phat_map(window, grid, opts.lookup)?;
    Ok(localize_from_map(&map, grid, opts.interpolate))
}
