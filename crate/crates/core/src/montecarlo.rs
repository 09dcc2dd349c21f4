//! Monte-Carlo evaluation of the exact received SNR
//! `γ = γ0 |Σ_m h_{m,1}ᴴ Φ_m h_{m,2} + h_d|²` under correlated Rayleigh fading.
//!
//! Every trial draws from its own ChaCha8 stream: the key is derived from the
//! run seed and the stream number is the trial index. A trial's channels do
//! not depend on which worker evaluates it, so estimates are bit-identical for
//! any thread count.
//!
//! Channels are drawn as `h = √β · L z` with `z` standard complex Gaussian in
//! the reduced dimension `r = rank(L)`. [`SnrKernel`] exploits this and
//! evaluates `h_{m,1}ᴴ Φ_m h_{m,2} = z_1ᴴ (√β_m L_1ᵀ Φ_m L_2) z_2` without
//! forming the `N`-dimensional vectors; [`sample_channels`] followed by
//! [`instantaneous_snr`] is the reference path and consumes the same random
//! numbers in the same order.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::dequiv::PhaseConfig;
use crate::error::{Error, Result};
use crate::model::SystemModel;
use crate::scenario::LinkGains;
use crate::spatialcorr::{sampling_factor, CorrelationMatrix, CorrelationSet, SamplingFactor};

/// Recorded in output metadata.
pub const RNG_IDENTITY: &str =
    "ChaCha8 (rand_chacha 0.9), key = seed_from_u64(seed), stream = trial index";

/// Trials per work unit. Fixed so reductions are independent of threading.
const CHUNK: u64 = 2048;

/// Fresh generator for one trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// `CN(0, 1)`: two independent real normals, each scaled by `1/√2`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Sampling factors for both links of every IRS. Matrices shared through an
/// `Arc` are factored once.
#[derive(Clone, Debug)]
pub struct FactorSet {
    per_irs: Vec<(Arc<SamplingFactor>, Arc<SamplingFactor>)>,
}

impl FactorSet {
    pub fn for_correlations(correlations: &CorrelationSet) -> Result<Self> {
        let mut cache: HashMap<*const CorrelationMatrix, Arc<SamplingFactor>> = HashMap::new();
        let mut factor = |r: &Arc<CorrelationMatrix>| -> Result<Arc<SamplingFactor>> {
            let key = Arc::as_ptr(r);
            if let Some(f) = cache.get(&key) {
                return Ok(Arc::clone(f));
            }
            let f = Arc::new(sampling_factor(r)?);
            cache.insert(key, Arc::clone(&f));
            Ok(f)
        };
        let per_irs = correlations
            .iter()
            .map(|c| Ok((factor(&c.link1)?, factor(&c.link2)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { per_irs })
    }

    pub fn irs_count(&self) -> usize {
        self.per_irs.len()
    }

    pub fn irs(&self, m: usize) -> (&SamplingFactor, &SamplingFactor) {
        let (a, b) = &self.per_irs[m];
        (a, b)
    }
}

/// One realization of every channel in the system.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelDraw {
    pub link1: Vec<Vec<Complex64>>,
    pub link2: Vec<Vec<Complex64>>,
    pub direct: Complex64,
}

/// Draws `h_{m,1}`, `h_{m,2}` for every IRS (in IRS order, link 1 first) and
/// then `h_d`.
pub fn sample_channels<R: Rng + ?Sized>(
    gains: &LinkGains,
    factors: &FactorSet,
    rng: &mut R,
) -> Result<ChannelDraw> {
    if gains.irs_count() != factors.irs_count() {
        return Err(Error::DimensionMismatch {
            context: "sampling factors",
            expected: gains.irs_count(),
            actual: factors.irs_count(),
        });
    }
    let mut link1 = Vec::with_capacity(gains.irs_count());
    let mut link2 = Vec::with_capacity(gains.irs_count());
    for (g, (l1, l2)) in gains.per_irs.iter().zip(&factors.per_irs) {
        link1.push(correlated_vector(l1, g.link1, rng));
        link2.push(correlated_vector(l2, g.link2, rng));
    }
    let direct = complex_normal(rng) * gains.direct.sqrt();
    Ok(ChannelDraw {
        link1,
        link2,
        direct,
    })
}

fn correlated_vector<R: Rng + ?Sized>(
    factor: &SamplingFactor,
    beta: f64,
    rng: &mut R,
) -> Vec<Complex64> {
    let l = factor.matrix();
    let z: Vec<Complex64> = (0..factor.rank()).map(|_| complex_normal(rng)).collect();
    let scale = beta.sqrt();
    (0..factor.order())
        .map(|row| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (col, zc) in z.iter().enumerate() {
                acc += zc * l[(row, col)];
            }
            acc * scale
        })
        .collect()
}

fn check_draw(draw: &ChannelDraw, phases: &PhaseConfig) -> Result<()> {
    if draw.link1.len() != phases.irs_count() || draw.link2.len() != phases.irs_count() {
        return Err(Error::DimensionMismatch {
            context: "channel draw IRS count",
            expected: phases.irs_count(),
            actual: draw.link1.len().min(draw.link2.len()),
        });
    }
    for (h1, h2) in draw.link1.iter().zip(&draw.link2) {
        for len in [h1.len(), h2.len()] {
            if len != phases.element_count() {
                return Err(Error::DimensionMismatch {
                    context: "channel vector length",
                    expected: phases.element_count(),
                    actual: len,
                });
            }
        }
    }
    Ok(())
}

/// `γ0 |Σ_m h_{m,1}ᴴ Φ_m h_{m,2} + h_d|²`, summed surface by surface.
pub fn instantaneous_snr(draw: &ChannelDraw, phases: &PhaseConfig, gamma0: f64) -> Result<f64> {
    check_draw(draw, phases)?;
    let mut sum = draw.direct;
    for ((h1, h2), s) in draw.link1.iter().zip(&draw.link2).zip(phases.iter()) {
        sum += h1
            .iter()
            .zip(h2)
            .zip(s)
            .map(|((a, b), phi)| a.conj() * phi * b)
            .sum::<Complex64>();
    }
    Ok(gamma0 * sum.norm_sqr())
}

/// Same SNR summed element by element across surfaces:
/// `γ0 |Σ_n g_{n,1}ᴴ Ψ_n g_{n,2} + h_d|²`.
pub fn instantaneous_snr_by_element(
    draw: &ChannelDraw,
    phases: &PhaseConfig,
    gamma0: f64,
) -> Result<f64> {
    check_draw(draw, phases)?;
    let mut sum = draw.direct;
    for n in 0..phases.element_count() {
        let g1: Vec<Complex64> = draw.link1.iter().map(|h| h[n]).collect();
        let g2: Vec<Complex64> = draw.link2.iter().map(|h| h[n]).collect();
        let psi = phases.element_group(n);
        sum += g1
            .iter()
            .zip(&g2)
            .zip(&psi)
            .map(|((a, b), phi)| a.conj() * phi * b)
            .sum::<Complex64>();
    }
    Ok(gamma0 * sum.norm_sqr())
}

/// Floating-point scale of the SNR sum, `γ0 (Σ |terms| + |h_d|)²`. Rounding in
/// either summation order is bounded relative to this.
pub fn snr_magnitude_scale(draw: &ChannelDraw, gamma0: f64) -> f64 {
    let mut total = draw.direct.norm();
    for (h1, h2) in draw.link1.iter().zip(&draw.link2) {
        total += h1.iter().zip(h2).map(|(a, b)| a.norm() * b.norm()).sum::<f64>();
    }
    gamma0 * total * total
}

/// Reduced-rank evaluator for a fixed phase configuration.
#[derive(Clone, Debug)]
pub struct SnrKernel {
    blocks: Vec<KernelBlock>,
    direct_scale: f64,
    gamma0: f64,
}

/// Per IRS: `√β_m L_1ᵀ Φ_m L_2`.
#[derive(Clone, Debug)]
enum KernelBlock {
    /// Row-major `r1 × r2`.
    Dense { r1: usize, r2: usize, k: Vec<Complex64> },
    /// Square and diagonal, as for uncorrelated panels.
    Diagonal(Vec<Complex64>),
}

/// Cascaded sums `X_m = h_{m,1}ᴴ Φ_m h_{m,2}` and `h_d` of one trial.
#[derive(Clone, Debug)]
pub struct TrialTerms {
    pub cascaded: Vec<Complex64>,
    pub direct: Complex64,
}

impl SnrKernel {
    pub fn new(
        gains: &LinkGains,
        factors: &FactorSet,
        phases: &PhaseConfig,
        gamma0: f64,
    ) -> Result<Self> {
        if gains.irs_count() != phases.irs_count() || factors.irs_count() != phases.irs_count() {
            return Err(Error::DimensionMismatch {
                context: "SNR kernel IRS count",
                expected: phases.irs_count(),
                actual: gains.irs_count().min(factors.irs_count()),
            });
        }
        let mut blocks = Vec::with_capacity(phases.irs_count());
        for ((g, (l1, l2)), s) in gains.per_irs.iter().zip(&factors.per_irs).zip(phases.iter()) {
            if l1.order() != s.len() || l2.order() != s.len() {
                return Err(Error::DimensionMismatch {
                    context: "SNR kernel element count",
                    expected: s.len(),
                    actual: l1.order(),
                });
            }
            let (a, b) = (l1.matrix(), l2.matrix());
            let (r1, r2) = (l1.rank(), l2.rank());
            let scale = (g.link1 * g.link2).sqrt();
            let mut k = vec![Complex64::new(0.0, 0.0); r1 * r2];
            for i in 0..r1 {
                for j in 0..r2 {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (n, phi) in s.iter().enumerate() {
                        acc += phi * (a[(n, i)] * b[(n, j)]);
                    }
                    k[i * r2 + j] = acc * scale;
                }
            }
            let is_diagonal = r1 == r2
                && (0..r1).all(|i| (0..r2).all(|j| i == j || k[i * r2 + j] == Complex64::new(0.0, 0.0)));
            blocks.push(if is_diagonal {
                KernelBlock::Diagonal((0..r1).map(|i| k[i * r2 + i]).collect())
            } else {
                KernelBlock::Dense { r1, r2, k }
            });
        }
        Ok(Self {
            blocks,
            direct_scale: gains.direct.sqrt(),
            gamma0,
        })
    }

    /// Draws one trial, consuming random numbers exactly as
    /// [`sample_channels`] does.
    pub fn trial_terms<R: Rng + ?Sized>(&self, rng: &mut R) -> TrialTerms {
        let mut cascaded = Vec::with_capacity(self.blocks.len());
        let mut z1 = Vec::new();
        let mut z2 = Vec::new();
        for block in &self.blocks {
            let x = match block {
                KernelBlock::Dense { r1, r2, k } => {
                    z1.clear();
                    z2.clear();
                    z1.extend((0..*r1).map(|_| complex_normal(rng)));
                    z2.extend((0..*r2).map(|_| complex_normal(rng)));
                    let mut x = Complex64::new(0.0, 0.0);
                    for (i, zi) in z1.iter().enumerate() {
                        let row = &k[i * r2..(i + 1) * r2];
                        let inner: Complex64 = row.iter().zip(&z2).map(|(kij, zj)| kij * zj).sum();
                        x += zi.conj() * inner;
                    }
                    x
                }
                KernelBlock::Diagonal(d) => {
                    z1.clear();
                    z2.clear();
                    z1.extend((0..d.len()).map(|_| complex_normal(rng)));
                    z2.extend((0..d.len()).map(|_| complex_normal(rng)));
                    z1.iter().zip(d).zip(&z2).map(|((a, di), b)| a.conj() * di * b).sum()
                }
            };
            cascaded.push(x);
        }
        let direct = complex_normal(rng) * self.direct_scale;
        TrialTerms { cascaded, direct }
    }

    pub fn snr(&self, terms: &TrialTerms) -> f64 {
        let sum: Complex64 = terms.cascaded.iter().sum::<Complex64>() + terms.direct;
        self.gamma0 * sum.norm_sqr()
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CiMethod {
    /// `p̂ ± 1.96 √(p̂(1−p̂)/n)`, clamped to `[0, 1]`.
    #[default]
    Normal,
    /// Exact binomial interval; preferable for small trial counts.
    ClopperPearson,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub coverage_hat: f64,
    pub successes: u64,
    pub trials: u64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

const Z_95: f64 = 1.959_963_984_540_054;

impl McEstimate {
    pub fn from_counts(successes: u64, trials: u64, seed: u64, method: CiMethod) -> Self {
        let p = successes as f64 / trials as f64;
        let (lo, hi) = match method {
            CiMethod::Normal => {
                let half = Z_95 * (p * (1.0 - p) / trials as f64).sqrt();
                (p - half, p + half)
            }
            CiMethod::ClopperPearson => clopper_pearson(successes, trials),
        };
        Self {
            coverage_hat: p,
            successes,
            trials,
            ci_low: lo.clamp(0.0, p),
            ci_high: hi.clamp(p, 1.0),
            seed,
        }
    }
}

fn clopper_pearson(k: u64, n: u64) -> (f64, f64) {
    let alpha = 0.05;
    let (kf, nf) = (k as f64, n as f64);
    let lo = if k == 0 {
        0.0
    } else {
        Beta::new(kf, nf - kf + 1.0)
            .map(|b| b.inverse_cdf(alpha / 2.0))
            .unwrap_or(0.0)
    };
    let hi = if k == n {
        1.0
    } else {
        Beta::new(kf + 1.0, nf - kf)
            .map(|b| b.inverse_cdf(1.0 - alpha / 2.0))
            .unwrap_or(1.0)
    };
    (lo, hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    pub ci: CiMethod,
}

impl McConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            ci: CiMethod::default(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trial count must be at least 1".into()));
        }
        Ok(())
    }
}

fn chunks(trials: u64) -> impl IndexedParallelIterator<Item = std::ops::Range<u64>> {
    let count = usize::try_from(trials.div_ceil(CHUNK)).expect("chunk count fits in usize");
    (0..count).into_par_iter().map(move |c| {
        let c = c as u64;
        c * CHUNK..((c + 1) * CHUNK).min(trials)
    })
}

/// Per-trial SNR samples, in trial order.
pub fn snr_samples(kernel: &SnrKernel, cfg: &McConfig) -> Result<Vec<f64>> {
    cfg.check()?;
    let per_chunk: Vec<Vec<f64>> = chunks(cfg.trials)
        .map(|range| {
            range
                .map(|t| {
                    let mut rng = trial_rng(cfg.seed, t);
                    kernel.snr(&kernel.trial_terms(&mut rng))
                })
                .collect()
        })
        .collect();
    Ok(per_chunk.into_iter().flatten().collect())
}

/// Coverage estimates at several thresholds from one set of draws.
/// A trial counts as covered at `T` when `γ > T`.
pub fn estimate_coverage_grid(
    kernel: &SnrKernel,
    thresholds: &[f64],
    cfg: &McConfig,
) -> Result<Vec<McEstimate>> {
    cfg.check()?;
    if thresholds.iter().any(|t| t.is_nan()) {
        return Err(Error::InvalidArgument("threshold is NaN".into()));
    }
    let mut order: Vec<usize> = (0..thresholds.len()).collect();
    order.sort_by(|&a, &b| thresholds[a].total_cmp(&thresholds[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| thresholds[i]).collect();

    // hist[k] = number of trials exceeding exactly the k smallest thresholds
    let hist = chunks(cfg.trials)
        .map(|range| {
            let mut h = vec![0u64; sorted.len() + 1];
            for t in range {
                let mut rng = trial_rng(cfg.seed, t);
                let snr = kernel.snr(&kernel.trial_terms(&mut rng));
                h[sorted.partition_point(|&x| x < snr)] += 1;
            }
            h
        })
        .reduce(
            || vec![0u64; sorted.len() + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    let mut out = vec![McEstimate::from_counts(0, cfg.trials, cfg.seed, cfg.ci); thresholds.len()];
    let mut above = 0u64;
    for k in (0..sorted.len()).rev() {
        above += hist[k + 1];
        out[order[k]] = McEstimate::from_counts(above, cfg.trials, cfg.seed, cfg.ci);
    }
    Ok(out)
}

pub fn estimate_coverage(
    model: &SystemModel,
    phases: &PhaseConfig,
    t_threshold: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    let factors = FactorSet::for_correlations(&model.correlations)?;
    let kernel = SnrKernel::new(&model.gains, &factors, phases, model.gamma0)?;
    Ok(estimate_coverage_grid(&kernel, &[t_threshold], cfg)?[0])
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
    pub seed: u64,
}

impl MomentEstimate {
    pub fn z_score(&self, reference: f64) -> f64 {
        (self.mean - reference) / self.std_error
    }
}

fn mean_of<F>(kernel: &SnrKernel, cfg: &McConfig, stat: F) -> Result<MomentEstimate>
where
    F: Fn(&SnrKernel, &TrialTerms) -> f64 + Sync,
{
    cfg.check()?;
    let partials: Vec<(f64, f64)> = chunks(cfg.trials)
        .map(|range| {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for t in range {
                let mut rng = trial_rng(cfg.seed, t);
                let v = stat(kernel, &kernel.trial_terms(&mut rng));
                sum += v;
                sum_sq += v * v;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = partials
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let n = cfg.trials as f64;
    let mean = sum / n;
    let var = if cfg.trials > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(MomentEstimate {
        mean,
        std_error: (var / n).sqrt(),
        trials: cfg.trials,
        seed: cfg.seed,
    })
}

/// Sample mean of `Σ_m |h_{m,1}ᴴ Φ_m h_{m,2}|²`.
pub fn second_moment(
    model: &SystemModel,
    phases: &PhaseConfig,
    cfg: &McConfig,
) -> Result<MomentEstimate> {
    let factors = FactorSet::for_correlations(&model.correlations)?;
    let kernel = SnrKernel::new(&model.gains, &factors, phases, model.gamma0)?;
    second_moment_with(&kernel, cfg)
}

pub fn second_moment_with(kernel: &SnrKernel, cfg: &McConfig) -> Result<MomentEstimate> {
    mean_of(kernel, cfg, |_, terms| {
        terms.cascaded.iter().map(|x| x.norm_sqr()).sum()
    })
}

/// Sample mean of the received SNR.
pub fn mean_snr_estimate(kernel: &SnrKernel, cfg: &McConfig) -> Result<MomentEstimate> {
    mean_of(kernel, cfg, |k, terms| k.snr(terms))
}
