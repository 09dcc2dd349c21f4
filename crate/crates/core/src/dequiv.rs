//! Deterministic-equivalent SNR aggregate and closed-form coverage.
//!
//! Two regroupings of one quadratic form are provided:
//!
//! * finite-M / large-N: `B_M = Σ_m β_m tr(R_{m,1} Φ_m R_{m,2} Φ_mᴴ)`
//! * large-M / finite-N: `B_N = Σ_n Σ_p tr(Q_{np,1} Ψ_n Q_{np,2} Ψ_pᴴ)`
//!
//! Both are implemented unnormalized. In that form the aggregate equals
//! `E|Σ_m h_{m,1}ᴴ Φ_m h_{m,2}|²` exactly, for any `N` and `M`, which is what
//! the Monte-Carlo second-moment tests check.
//!
//! Coverage given the aggregate `B` is
//! `P_c = exp(-(T/γ0 − B)/β_d)` for `B < T/γ0`, and `1` otherwise.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::LinkGains;
use crate::spatialcorr::{build_q, CorrelationMatrix, CorrelationSet, Link};

/// Allowed deviation of `|φ|` from one.
pub const UNIT_MODULUS_TOLERANCE: f64 = 1e-12;

/// Allowed imaginary residue of a trace, relative to its absolute scale.
pub const IMAGINARY_RESIDUE_TOLERANCE: f64 = 1e-10;

/// Unit-modulus reflection coefficients, one vector of length `N` per IRS.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseConfig {
    per_irs: Vec<Vec<Complex64>>,
}

impl PhaseConfig {
    pub fn new(per_irs: Vec<Vec<Complex64>>) -> Result<Self> {
        let Some(first) = per_irs.first() else {
            return Err(Error::InvalidArgument("phase configuration has no IRS".into()));
        };
        let n = first.len();
        if n == 0 {
            return Err(Error::InvalidArgument("phase vectors are empty".into()));
        }
        for (m, v) in per_irs.iter().enumerate() {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "phase vector length",
                    expected: n,
                    actual: v.len(),
                });
            }
            if let Some(bad) = v
                .iter()
                .position(|z| !z.is_finite() || (z.norm() - 1.0).abs() > UNIT_MODULUS_TOLERANCE)
            {
                return Err(Error::InvalidArgument(format!(
                    "phase ({m}, {bad}) has modulus {}",
                    v[bad].norm()
                )));
            }
        }
        Ok(Self { per_irs })
    }

    /// Every element set to `exp(j·angle)`.
    pub fn uniform(irs_count: usize, elements: usize, angle: f64) -> Self {
        Self {
            per_irs: vec![vec![Complex64::from_polar(1.0, angle); elements]; irs_count],
        }
    }

    /// Starting point of the phase optimizer: `exp(jπ/2)` everywhere.
    pub fn initial(irs_count: usize, elements: usize) -> Self {
        Self::uniform(irs_count, elements, FRAC_PI_2)
    }

    pub fn from_angles(angles: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            angles
                .iter()
                .map(|row| row.iter().map(|&t| Complex64::from_polar(1.0, t)).collect())
                .collect(),
        )
    }

    pub fn random<R: Rng + ?Sized>(irs_count: usize, elements: usize, rng: &mut R) -> Self {
        let per_irs = (0..irs_count)
            .map(|_| {
                (0..elements)
                    .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
                    .collect()
            })
            .collect();
        Self { per_irs }
    }

    pub fn irs_count(&self) -> usize {
        self.per_irs.len()
    }

    pub fn element_count(&self) -> usize {
        self.per_irs[0].len()
    }

    /// Diagonal of `Φ_m`.
    pub fn irs(&self, m: usize) -> &[Complex64] {
        &self.per_irs[m]
    }

    /// Diagonal of `Ψ_n`: element `n` (0-based) of every IRS.
    pub fn element_group(&self, n: usize) -> Vec<Complex64> {
        self.per_irs.iter().map(|v| v[n]).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Complex64]> {
        self.per_irs.iter().map(Vec::as_slice)
    }

    pub fn angles(&self) -> Vec<Vec<f64>> {
        self.per_irs
            .iter()
            .map(|v| v.iter().map(|z| z.arg()).collect())
            .collect()
    }

    pub fn max_modulus_violation(&self) -> f64 {
        self.per_irs
            .iter()
            .flatten()
            .map(|z| (z.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Multiplies every coefficient by `exp(j·alpha)`.
    pub fn rotated(&self, alpha: f64) -> Self {
        let r = Complex64::from_polar(1.0, alpha);
        Self {
            per_irs: self
                .per_irs
                .iter()
                .map(|v| v.iter().map(|z| z * r).collect())
                .collect(),
        }
    }

    /// Replaces the vector of IRS `m`; the caller guarantees unit modulus.
    pub(crate) fn set_irs(&mut self, m: usize, phases: Vec<Complex64>) {
        debug_assert_eq!(phases.len(), self.element_count());
        self.per_irs[m] = phases;
    }
}

/// On-disk phase configuration: angles in radians, one row per IRS.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseFile {
    pub schema_version: u32,
    pub phases_rad: Vec<Vec<f64>>,
}

impl PhaseFile {
    pub const SCHEMA_VERSION: u32 = 1;

    pub fn from_config(phases: &PhaseConfig) -> Self {
        Self {
            schema_version: Self::SCHEMA_VERSION,
            phases_rad: phases.angles(),
        }
    }

    pub fn to_config(&self) -> Result<PhaseConfig> {
        if self.schema_version != Self::SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported phase file version {}", self.schema_version),
            ));
        }
        PhaseConfig::from_angles(&self.phases_rad)
    }
}

/// Which deterministic equivalent is in use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// Few large surfaces, `B_M`.
    #[serde(rename = "m-finite")]
    FiniteMLargeN,
    /// Many small surfaces, `B_N`.
    #[serde(rename = "m-large")]
    LargeMFiniteN,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::FiniteMLargeN => "m-finite",
            Regime::LargeMFiniteN => "m-large",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m-finite" => Ok(Regime::FiniteMLargeN),
            "m-large" => Ok(Regime::LargeMFiniteN),
            other => Err(Error::InvalidArgument(format!(
                "unknown regime `{other}` (expected m-finite or m-large)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeResult {
    pub b: f64,
    pub coverage: f64,
    pub regime: Regime,
    pub threshold_ratio: f64,
}

fn check_shapes(
    gains: &LinkGains,
    correlations: &CorrelationSet,
    phases: &PhaseConfig,
) -> Result<()> {
    let m = correlations.irs_count();
    for (context, actual) in [
        ("IRS count of link gains", gains.irs_count()),
        ("IRS count of phase configuration", phases.irs_count()),
    ] {
        if actual != m {
            return Err(Error::DimensionMismatch {
                context,
                expected: m,
                actual,
            });
        }
    }
    if phases.element_count() != correlations.order() {
        return Err(Error::DimensionMismatch {
            context: "phase vector length",
            expected: correlations.order(),
            actual: phases.element_count(),
        });
    }
    Ok(())
}

fn real_part_checked(value: Complex64, scale: f64) -> Result<f64> {
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(Error::numeric("non-finite aggregate"));
    }
    if value.im.abs() > IMAGINARY_RESIDUE_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::numeric(format!(
            "imaginary residue {:e} exceeds tolerance for scale {:e}",
            value.im, scale
        )));
    }
    Ok(value.re)
}

/// `tr(R1 diag(s) R2 diag(s)ᴴ) = Σ_n s_n* Σ_p r1[n,p] r2[p,n] s_p`, together
/// with `Σ |r1[n,p] r2[p,n]|` as the magnitude scale.
pub(crate) fn irs_trace(
    r1: &CorrelationMatrix,
    r2: &CorrelationMatrix,
    s: &[Complex64],
) -> (Complex64, f64) {
    let n = s.len();
    let (a, b) = (r1.entries(), r2.entries());
    let mut total = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for row in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for col in 0..n {
            let w = a[(row, col)] * b[(col, row)];
            acc += s[col] * w;
            scale += w.abs();
        }
        total += s[row].conj() * acc;
    }
    (total, scale)
}

/// Finite-M aggregate `B_M`.
pub fn aggregate_bm(
    gains: &LinkGains,
    correlations: &CorrelationSet,
    phases: &PhaseConfig,
) -> Result<f64> {
    check_shapes(gains, correlations, phases)?;
    let mut total = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for ((g, c), s) in gains.per_irs.iter().zip(correlations.iter()).zip(phases.iter()) {
        let (t, sc) = irs_trace(&c.link1, &c.link2, s);
        total += t * g.cascaded();
        scale += sc * g.cascaded();
    }
    real_part_checked(total, scale)
}

/// Large-M aggregate `B_N`, using that every `Q_{np,k}` is diagonal: the
/// trace for a pair `(n, p)` is `Σ_m β_m r1_m[n,p] r2_m[n,p] φ_{mn} φ_{mp}*`.
pub fn aggregate_bn(
    gains: &LinkGains,
    correlations: &CorrelationSet,
    phases: &PhaseConfig,
) -> Result<f64> {
    check_shapes(gains, correlations, phases)?;
    let n = correlations.order();
    let mut total = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for ((g, c), s) in gains.per_irs.iter().zip(correlations.iter()).zip(phases.iter()) {
        let (a, b) = (c.link1.entries(), c.link2.entries());
        let beta = g.cascaded();
        for e in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for p in 0..n {
                let w = a[(e, p)] * b[(e, p)];
                acc += s[p].conj() * w;
                scale += beta * w.abs();
            }
            total += s[e] * acc * beta;
        }
    }
    real_part_checked(total, scale)
}

/// `B_N` evaluated term by term from materialized `Q_{np,k}` diagonals and
/// `Ψ_n`. `O(N² M)` allocations; meant for small instances and tests.
pub fn aggregate_bn_literal(
    gains: &LinkGains,
    correlations: &CorrelationSet,
    phases: &PhaseConfig,
) -> Result<f64> {
    check_shapes(gains, correlations, phases)?;
    let n = correlations.order();
    let psi: Vec<Vec<Complex64>> = (0..n).map(|e| phases.element_group(e)).collect();
    let mut total = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for e in 1..=n {
        for p in 1..=n {
            let q1 = build_q(e, p, Link::First, gains, correlations)?;
            let q2 = build_q(e, p, Link::Second, gains, correlations)?;
            // tr(Q1 Ψ_n Q2 Ψ_pᴴ) with all four factors diagonal
            for m in 0..q1.0.len() {
                let w = q1.0[m] * q2.0[m];
                total += psi[e - 1][m] * psi[p - 1][m].conj() * w;
                scale += w.abs();
            }
        }
    }
    real_part_checked(total, scale)
}

pub fn aggregate(
    regime: Regime,
    gains: &LinkGains,
    correlations: &CorrelationSet,
    phases: &PhaseConfig,
) -> Result<f64> {
    match regime {
        Regime::FiniteMLargeN => aggregate_bm(gains, correlations, phases),
        Regime::LargeMFiniteN => aggregate_bn(gains, correlations, phases),
    }
}

/// Closed-form coverage for aggregate `b` and linear threshold `t_threshold`.
pub fn coverage_closed_form(b: f64, t_threshold: f64, gamma0: f64, beta_d: f64) -> Result<f64> {
    if !(gamma0.is_finite() && gamma0 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "transmit SNR must be positive, got {gamma0}"
        )));
    }
    if !(beta_d.is_finite() && beta_d > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "direct-link gain must be positive, got {beta_d}"
        )));
    }
    if !(t_threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be non-negative, got {t_threshold}"
        )));
    }
    if !b.is_finite() {
        return Err(Error::numeric("non-finite aggregate"));
    }
    let ratio = t_threshold / gamma0;
    if b >= ratio {
        Ok(1.0)
    } else {
        Ok((-(ratio - b) / beta_d).exp())
    }
}

pub fn evaluate(
    regime: Regime,
    b: f64,
    t_threshold: f64,
    gamma0: f64,
    beta_d: f64,
) -> Result<DeResult> {
    Ok(DeResult {
        b,
        coverage: coverage_closed_form(b, t_threshold, gamma0, beta_d)?,
        regime,
        threshold_ratio: t_threshold / gamma0,
    })
}

/// Mean received SNR `γ0 (B + β_d)`.
pub fn mean_snr(b: f64, beta_d: f64, gamma0: f64) -> f64 {
    gamma0 * (b + beta_d)
}

/// Largest linear threshold at which coverage is still exactly one.
pub fn knee_threshold(b: f64, gamma0: f64) -> f64 {
    gamma0 * b
}

/// Largest linear threshold with coverage at least `level` (in `(0, 1]`).
pub fn threshold_at_coverage(b: f64, gamma0: f64, beta_d: f64, level: f64) -> Result<f64> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "coverage level must be in (0, 1], got {level}"
        )));
    }
    Ok(gamma0 * (b - beta_d * level.ln()))
}
