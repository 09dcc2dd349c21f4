use crate::dequiv::{self, DeResult, PhaseConfig, Regime};
use crate::error::{Error, Result};
use crate::scenario::{cascaded_gains, transmit_snr, LinkGains, Scenario};
use crate::spatialcorr::{CorrelationOptions, CorrelationSet};

/// A scenario together with everything derived from it: link gains,
/// transmit SNR and per-IRS correlation matrices.
#[derive(Clone, Debug)]
pub struct SystemModel {
    pub scenario: Scenario,
    pub options: CorrelationOptions,
    pub gains: LinkGains,
    pub gamma0: f64,
    pub correlations: CorrelationSet,
}

impl SystemModel {
    pub fn new(scenario: Scenario, options: CorrelationOptions) -> Result<Self> {
        scenario.validate()?;
        let correlations = CorrelationSet::for_scenario(&scenario, &options)?;
        Self::with_correlations(scenario, options, correlations)
    }

    /// Uses explicitly supplied correlation matrices (e.g. asymmetric links).
    pub fn with_correlations(
        scenario: Scenario,
        options: CorrelationOptions,
        correlations: CorrelationSet,
    ) -> Result<Self> {
        scenario.validate()?;
        let gains = cascaded_gains(&scenario)?;
        if correlations.irs_count() != scenario.irs_count() {
            return Err(Error::DimensionMismatch {
                context: "correlation set IRS count",
                expected: scenario.irs_count(),
                actual: correlations.irs_count(),
            });
        }
        let gamma0 = transmit_snr(&scenario.radio);
        Ok(Self {
            scenario,
            options,
            gains,
            gamma0,
            correlations,
        })
    }

    pub fn irs_count(&self) -> usize {
        self.correlations.irs_count()
    }

    pub fn element_count(&self) -> usize {
        self.correlations.order()
    }

    pub fn beta_d(&self) -> f64 {
        self.gains.direct
    }

    pub fn initial_phases(&self) -> PhaseConfig {
        PhaseConfig::initial(self.irs_count(), self.element_count())
    }

    pub fn aggregate(&self, regime: Regime, phases: &PhaseConfig) -> Result<f64> {
        dequiv::aggregate(regime, &self.gains, &self.correlations, phases)
    }

    /// Closed-form coverage at linear threshold `t_threshold`.
    pub fn closed_form(
        &self,
        regime: Regime,
        phases: &PhaseConfig,
        t_threshold: f64,
    ) -> Result<DeResult> {
        let b = self.aggregate(regime, phases)?;
        dequiv::evaluate(regime, b, t_threshold, self.gamma0, self.beta_d())
    }
}
