//! Network geometry, panel geometry and radio parameters, and the link-budget
//! quantities derived from them (path-loss gains and transmit SNR).
//!
//! All geometry is planar: positions are `(x, y)` in meters and distances are
//! Euclidean. Panel orientation is not modeled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Rectangular grid of `n_h × n_v` elements, each `d_h × d_v` meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelGeometry {
    pub n_h: usize,
    pub n_v: usize,
    pub d_h: f64,
    pub d_v: f64,
}

impl PanelGeometry {
    pub fn new(n_h: usize, n_v: usize, d_h: f64, d_v: f64) -> Result<Self> {
        let panel = Self { n_h, n_v, d_h, d_v };
        panel.validate()?;
        Ok(panel)
    }

    /// Square `side × side` panel with element edge `wavelength / divisor`.
    pub fn square(side: usize, wavelength: f64, divisor: f64) -> Result<Self> {
        let d = wavelength / divisor;
        Self::new(side, side, d, d)
    }

    pub fn element_count(&self) -> usize {
        self.n_h * self.n_v
    }

    pub fn element_area(&self) -> f64 {
        self.d_h * self.d_v
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_h == 0 {
            return Err(Error::config("panel.n_h", "must be at least 1"));
        }
        if self.n_v == 0 {
            return Err(Error::config("panel.n_v", "must be at least 1"));
        }
        if !(self.d_h.is_finite() && self.d_h > 0.0) {
            return Err(Error::config("panel.d_h", "must be a positive length"));
        }
        if !(self.d_v.is_finite() && self.d_v > 0.0) {
            return Err(Error::config("panel.d_v", "must be a positive length"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub tx_power_dbm: f64,
    pub noise_floor_dbm: f64,
    pub noise_figure_db: f64,
    /// When false, `noise_floor_dbm` is taken to already include the receiver
    /// noise figure.
    #[serde(default = "default_true")]
    pub include_noise_figure: bool,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub gain_tx_dbi: f64,
    pub gain_rx_dbi: f64,
}

fn default_true() -> bool {
    true
}

impl RadioConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Effective noise power N0 in dBm.
    pub fn effective_noise_dbm(&self) -> f64 {
        if self.include_noise_figure {
            self.noise_floor_dbm + self.noise_figure_db
        } else {
            self.noise_floor_dbm
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("radio.tx_power_dbm", self.tx_power_dbm),
            ("radio.noise_floor_dbm", self.noise_floor_dbm),
            ("radio.noise_figure_db", self.noise_figure_db),
            ("radio.gain_tx_dbi", self.gain_tx_dbi),
            ("radio.gain_rx_dbi", self.gain_rx_dbi),
        ];
        for (path, value) in checks {
            if !value.is_finite() {
                return Err(Error::config(path, "must be finite"));
            }
        }
        if !(self.carrier_hz.is_finite() && self.carrier_hz > 0.0) {
            return Err(Error::config("radio.carrier_hz", "must be positive"));
        }
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return Err(Error::config("radio.bandwidth_hz", "must be positive"));
        }
        Ok(())
    }
}

/// How the distance term enters the log-distance formula.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathLossConvention {
    /// `G_t + G_r + 10 ν log10(d) + intercept`: gain grows with distance.
    AsWritten,
    /// `G_t + G_r − 10 ν log10(d) + intercept`: gain decays with distance.
    #[default]
    Attenuation,
}

impl PathLossConvention {
    pub fn as_str(&self) -> &'static str {
        match self {
            PathLossConvention::AsWritten => "as-written",
            PathLossConvention::Attenuation => "attenuation",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub exponent_link1: f64,
    pub exponent_link2: f64,
    pub exponent_direct: f64,
    pub intercept_db: f64,
    #[serde(default)]
    pub sign_convention: PathLossConvention,
}

impl PathLossModel {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("path_loss.exponent_link1", self.exponent_link1),
            ("path_loss.exponent_link2", self.exponent_link2),
            ("path_loss.exponent_direct", self.exponent_direct),
        ];
        for (path, value) in checks {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(path, "path-loss exponent must be positive"));
            }
        }
        if !self.intercept_db.is_finite() {
            return Err(Error::config("path_loss.intercept_db", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub tx: Position,
    pub rx: Position,
    pub irs_positions: Vec<Position>,
    pub panel: PanelGeometry,
    pub radio: RadioConfig,
    pub path_loss: PathLossModel,
}

/// Reference deployment: 60 m link, 3 GHz, `λ/32` elements.
pub mod reference {
    use super::*;

    pub const TX: Position = Position::new(0.0, 0.0);
    pub const RX: Position = Position::new(60.0, 0.0);
    pub const ELEMENT_DIVISOR: f64 = 32.0;

    pub fn radio() -> RadioConfig {
        RadioConfig {
            tx_power_dbm: 10.0,
            noise_floor_dbm: -94.0,
            noise_figure_db: 10.0,
            include_noise_figure: true,
            carrier_hz: 3.0e9,
            bandwidth_hz: 10.0e6,
            gain_tx_dbi: 3.2,
            gain_rx_dbi: 1.3,
        }
    }

    pub fn path_loss() -> PathLossModel {
        PathLossModel {
            exponent_link1: 2.0,
            exponent_link2: 2.0,
            exponent_direct: 3.5,
            intercept_db: -27.5,
            sign_convention: PathLossConvention::Attenuation,
        }
    }
}

impl Scenario {
    /// The reference deployment with `irs_count` evenly spaced surfaces of
    /// `side × side` elements.
    pub fn reference(irs_count: usize, side: usize) -> Result<Self> {
        let radio = reference::radio();
        let panel = PanelGeometry::square(side, radio.wavelength(), reference::ELEMENT_DIVISOR)?;
        let irs_positions = place_irs_uniform(irs_count, reference::TX, reference::RX)?;
        let scenario = Self {
            tx: reference::TX,
            rx: reference::RX,
            irs_positions,
            panel,
            radio,
            path_loss: reference::path_loss(),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn irs_count(&self) -> usize {
        self.irs_positions.len()
    }

    pub fn element_count(&self) -> usize {
        self.panel.element_count()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.tx.is_finite() {
            return Err(Error::config("tx", "coordinates must be finite"));
        }
        if !self.rx.is_finite() {
            return Err(Error::config("rx", "coordinates must be finite"));
        }
        if self.tx == self.rx {
            return Err(Error::config("rx", "receiver coincides with transmitter"));
        }
        if self.irs_positions.is_empty() {
            return Err(Error::config("irs", "at least one IRS is required"));
        }
        for (i, p) in self.irs_positions.iter().enumerate() {
            let path = format!("irs.positions[{i}]");
            if !p.is_finite() {
                return Err(Error::config(path, "coordinates must be finite"));
            }
            if *p == self.tx || *p == self.rx {
                return Err(Error::config(path, "IRS coincides with an endpoint"));
            }
            if self.irs_positions[..i].contains(p) {
                return Err(Error::config(path, "duplicate IRS position"));
            }
        }
        self.panel.validate()?;
        self.radio.validate()?;
        self.path_loss.validate()?;
        Ok(())
    }
}

/// `m_count` points on the open segment `tx → rx` at fractions `k/(m_count+1)`.
pub fn place_irs_uniform(m_count: usize, tx: Position, rx: Position) -> Result<Vec<Position>> {
    check_segment(m_count, tx, rx)?;
    let denom = (m_count + 1) as f64;
    Ok((1..=m_count)
        .map(|k| lerp(tx, rx, k as f64 / denom))
        .collect())
}

/// Seeded alternative to [`place_irs_uniform`]: independent uniform fractions
/// along the segment, sorted from `tx` to `rx`.
pub fn place_irs_random(
    m_count: usize,
    tx: Position,
    rx: Position,
    seed: u64,
) -> Result<Vec<Position>> {
    check_segment(m_count, tx, rx)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fractions: Vec<f64> = Vec::with_capacity(m_count);
    while fractions.len() < m_count {
        let f: f64 = rng.random();
        // open interval, no duplicates
        if f > 0.0 && !fractions.contains(&f) {
            fractions.push(f);
        }
    }
    fractions.sort_by(f64::total_cmp);
    Ok(fractions.into_iter().map(|f| lerp(tx, rx, f)).collect())
}

fn check_segment(m_count: usize, tx: Position, rx: Position) -> Result<()> {
    if m_count == 0 {
        return Err(Error::InvalidArgument("IRS count must be at least 1".into()));
    }
    if tx == rx {
        return Err(Error::InvalidArgument(
            "transmitter and receiver coincide".into(),
        ));
    }
    Ok(())
}

fn lerp(a: Position, b: Position, t: f64) -> Position {
    Position::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t)
}

/// Linear large-scale gain β for a link of `distance` meters.
pub fn path_loss_linear(
    distance: f64,
    exponent: f64,
    radio: &RadioConfig,
    model: &PathLossModel,
) -> Result<f64> {
    if !(distance.is_finite() && distance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "path-loss distance must be positive, got {distance}"
        )));
    }
    let distance_term = 10.0 * exponent * distance.log10();
    let gains = radio.gain_tx_dbi + radio.gain_rx_dbi + model.intercept_db;
    let db = match model.sign_convention {
        PathLossConvention::Attenuation => gains - distance_term,
        PathLossConvention::AsWritten => gains + distance_term,
    };
    Ok(db_to_linear(db))
}

/// Average transmit SNR γ0 = P / N0.
pub fn transmit_snr(radio: &RadioConfig) -> f64 {
    db_to_linear(transmit_snr_db(radio))
}

pub fn transmit_snr_db(radio: &RadioConfig) -> f64 {
    radio.tx_power_dbm - radio.effective_noise_dbm()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IrsGains {
    /// TX → IRS.
    pub link1: f64,
    /// IRS → RX.
    pub link2: f64,
}

impl IrsGains {
    pub fn cascaded(&self) -> f64 {
        self.link1 * self.link2
    }
}

/// Per-IRS link gains plus the direct-link gain β_d.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkGains {
    pub per_irs: Vec<IrsGains>,
    pub direct: f64,
}

impl LinkGains {
    pub fn irs_count(&self) -> usize {
        self.per_irs.len()
    }

    pub fn cascaded(&self) -> Vec<f64> {
        self.per_irs.iter().map(IrsGains::cascaded).collect()
    }
}

pub fn cascaded_gains(scenario: &Scenario) -> Result<LinkGains> {
    let radio = &scenario.radio;
    let model = &scenario.path_loss;
    let per_irs = scenario
        .irs_positions
        .iter()
        .enumerate()
        .map(|(i, irs)| {
            let d1 = scenario.tx.distance(irs);
            let d2 = irs.distance(&scenario.rx);
            if d1 == 0.0 || d2 == 0.0 {
                return Err(Error::config(
                    format!("irs.positions[{i}]"),
                    "IRS coincides with an endpoint",
                ));
            }
            Ok(IrsGains {
                link1: path_loss_linear(d1, model.exponent_link1, radio, model)?,
                link2: path_loss_linear(d2, model.exponent_link2, radio, model)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let direct = path_loss_linear(
        scenario.tx.distance(&scenario.rx),
        model.exponent_direct,
        radio,
        model,
    )?;
    Ok(LinkGains { per_irs, direct })
}
