use std::sync::Arc;

use irscov::optimizer::{angle_derivative, CoverageProblem};
use irscov::scenario::{IrsGains, LinkGains, PanelGeometry};
use irscov::spatialcorr::{build_correlation_with, IrsCorrelation, Normalization};
use irscov::{CorrelationOptions, CorrelationSet, PhaseConfig, Regime, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradcheckReport {
    pub regime: Regime,
    pub instances: usize,
    /// Largest `|analytic − numeric| / max|analytic|` over all instances.
    pub worst_relative_error: f64,
}

struct Instance {
    gains: LinkGains,
    correlations: CorrelationSet,
    angles: Vec<Vec<f64>>,
}

/// Up to 4 surfaces of 2 to 8 elements; each hop gets its own sinc
/// correlation at a random spacing and unit diagonal, and the direct gain is
/// matched to the attainable aggregate.
fn instance(rng: &mut ChaCha8Rng) -> Result<Instance> {
    let m = rng.random_range(1..=4);
    let (n_h, n_v) = (rng.random_range(2..=4), rng.random_range(1..=2));
    let opts = CorrelationOptions {
        correlated: true,
        normalization: Normalization::Unit,
    };
    let hop = |rng: &mut ChaCha8Rng| -> Result<_> {
        let d = rng.random_range(0.1..0.9);
        Ok(Arc::new(build_correlation_with(&PanelGeometry::new(n_h, n_v, d, d)?, 1.0, &opts)?))
    };
    let per_irs = (0..m)
        .map(|_| Ok(IrsCorrelation { link1: hop(rng)?, link2: hop(rng)? }))
        .collect::<Result<Vec<_>>>()?;
    let per_irs_gains: Vec<IrsGains> = (0..m)
        .map(|_| IrsGains {
            link1: rng.random_range(0.2..1.5),
            link2: rng.random_range(0.2..1.5),
        })
        .collect();
    let n = n_h * n_v;
    let bound: f64 = per_irs_gains.iter().map(|g| g.cascaded()).sum::<f64>() * (n * n) as f64;
    let angles = (0..m)
        .map(|_| (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect())
        .collect();
    Ok(Instance {
        gains: LinkGains {
            per_irs: per_irs_gains,
            direct: bound * rng.random_range(0.1..0.5),
        },
        correlations: CorrelationSet::new(per_irs)?,
        angles,
    })
}

fn instance_error(inst: &Instance, regime: Regime, step: f64) -> Result<f64> {
    let phases = PhaseConfig::from_angles(&inst.angles)?;
    let b = irscov::dequiv::aggregate(regime, &inst.gains, &inst.correlations, &phases)?;
    let t = b + inst.gains.direct;
    let problem = CoverageProblem::new(&inst.gains, &inst.correlations, 1.0, t, regime)?;
    let pc = problem.coverage(&phases)?;
    let mut worst: f64 = 0.0;
    for m in 0..inst.angles.len() {
        let analytic = angle_derivative(phases.irs(m), &problem.gradient(&phases, pc, m)?);
        let scale = analytic.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
        for (n, a) in analytic.iter().enumerate() {
            let mut plus = inst.angles.clone();
            let mut minus = inst.angles.clone();
            plus[m][n] += step;
            minus[m][n] -= step;
            let fp = problem.coverage(&PhaseConfig::from_angles(&plus)?)?;
            let fm = problem.coverage(&PhaseConfig::from_angles(&minus)?)?;
            worst = worst.max((a - (fp - fm) / (2.0 * step)).abs() / scale);
        }
    }
    Ok(worst)
}

/// Analytic coverage gradients against central differences in the phase
/// angles, on `instances` random problems per regime.
pub fn gradient_check(seed: u64, instances: usize, step: f64) -> Result<Vec<GradcheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let problems = (0..instances).map(|_| instance(&mut rng)).collect::<Result<Vec<_>>>()?;
    [Regime::FiniteMLargeN, Regime::LargeMFiniteN]
        .into_iter()
        .map(|regime| {
            let mut worst: f64 = 0.0;
            for p in &problems {
                worst = worst.max(instance_error(p, regime, step)?);
            }
            Ok(GradcheckReport {
                regime,
                instances,
                worst_relative_error: worst,
            })
        })
        .collect()
}
