#![allow(dead_code)]

use std::sync::Arc;

use irscov::scenario::{IrsGains, LinkGains, PanelGeometry};
use irscov::spatialcorr::{
    build_correlation_with, CorrelationMatrix, CorrelationOptions, CorrelationSet, IrsCorrelation,
    Normalization,
};
use rand::Rng;

/// Unit-diagonal sinc correlation of a `side × side` panel with spacing
/// `spacing` wavelengths.
pub fn unit_sinc(side: usize, spacing: f64) -> Arc<CorrelationMatrix> {
    let panel = PanelGeometry::new(side, side, spacing, spacing).unwrap();
    let opts = CorrelationOptions {
        correlated: true,
        normalization: Normalization::Unit,
    };
    Arc::new(build_correlation_with(&panel, 1.0, &opts).unwrap())
}

/// A small synthetic problem with O(1) gains and distinct correlation on
/// the two hops of every surface, so that the aggregate is comparable to
/// the direct-link gain.
pub struct Synthetic {
    pub gains: LinkGains,
    pub correlations: CorrelationSet,
}

pub fn synthetic<R: Rng>(rng: &mut R, irs_count: usize, side: usize) -> Synthetic {
    let per_irs = (0..irs_count)
        .map(|_| IrsCorrelation {
            link1: unit_sinc(side, rng.random_range(0.1..0.9)),
            link2: unit_sinc(side, rng.random_range(0.1..0.9)),
        })
        .collect();
    let gains = LinkGains {
        per_irs: (0..irs_count)
            .map(|_| IrsGains {
                link1: rng.random_range(0.2..1.5),
                link2: rng.random_range(0.2..1.5),
            })
            .collect(),
        direct: rng.random_range(0.5..2.0),
    };
    Synthetic {
        gains,
        correlations: CorrelationSet::new(per_irs).unwrap(),
    }
}
