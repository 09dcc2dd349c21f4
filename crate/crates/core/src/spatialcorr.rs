//! Spatial correlation of a rectangular IRS under isotropic scattering.
//!
//! Entry `(n, p)` of the correlation matrix is
//! `d_H d_V · sinc(2‖u_n − u_p‖/λ)` with the *normalized* sinc,
//! `sinc(x) = sin(πx)/(πx)`. Using the unnormalized convention changes every
//! number downstream, so this is the one convention to double-check when
//! comparing against other tools.
//!
//! At sub-half-wavelength spacing the kernel matrix is numerically
//! indefinite (eigenvalues of order `-1e-18`). [`build_correlation`] clamps
//! negative eigenvalues to zero and restores the exact diagonal, and
//! [`sampling_factor`] then drops eigenpairs below `1e-12·λ_max`.

use std::io::{self, Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{LinkGains, PanelGeometry, Scenario};

/// Relative eigenvalue cut used by [`sampling_factor`].
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementPosition(pub [f64; 3]);

/// Element location on the panel plane, `index` is 1-based and row-major.
pub fn element_position(index: usize, panel: &PanelGeometry) -> Result<ElementPosition> {
    let n = panel.element_count();
    if index == 0 || index > n {
        return Err(Error::IndexOutOfRange { index, max: n });
    }
    let k = index - 1;
    Ok(ElementPosition([
        0.0,
        (k % panel.n_h) as f64 * panel.d_h,
        (k / panel.n_h) as f64 * panel.d_v,
    ]))
}

impl ElementPosition {
    pub fn distance(&self, other: &ElementPosition) -> f64 {
        let [a0, a1, a2] = self.0;
        let [b0, b1, b2] = other.0;
        ((a0 - b0).powi(2) + (a1 - b1).powi(2) + (a2 - b2).powi(2)).sqrt()
    }
}

pub fn sinc_normalized(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Scale of the correlation diagonal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Diagonal equal to the element area `d_H d_V`.
    #[default]
    ElementArea,
    /// Unit diagonal.
    Unit,
}

impl Normalization {
    pub fn diagonal(&self, panel: &PanelGeometry) -> f64 {
        match self {
            Normalization::ElementArea => panel.element_area(),
            Normalization::Unit => 1.0,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Normalization::ElementArea => "element-area",
            Normalization::Unit => "unit",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationOptions {
    #[serde(default = "default_true")]
    pub correlated: bool,
    #[serde(default)]
    pub normalization: Normalization,
}

fn default_true() -> bool {
    true
}

impl Default for CorrelationOptions {
    fn default() -> Self {
        Self {
            correlated: true,
            normalization: Normalization::ElementArea,
        }
    }
}

impl CorrelationOptions {
    pub fn uncorrelated() -> Self {
        Self {
            correlated: false,
            ..Self::default()
        }
    }
}

/// Real symmetric PSD correlation matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    entries: DMatrix<f64>,
    repaired: bool,
}

impl CorrelationMatrix {
    /// Wraps an explicit matrix after symmetry and finiteness checks. No
    /// repair is applied.
    pub fn from_entries(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch {
                context: "correlation matrix",
                expected: entries.nrows(),
                actual: entries.ncols(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                message: "non-finite correlation entry".into(),
                order: Some(entries.nrows()),
            });
        }
        let n = entries.nrows();
        for i in 0..n {
            for j in 0..i {
                if entries[(i, j)] != entries[(j, i)] {
                    return Err(Error::InvalidArgument(format!(
                        "correlation matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self {
            entries,
            repaired: false,
        })
    }

    pub fn scaled_identity(order: usize, scale: f64) -> Self {
        Self {
            entries: DMatrix::from_diagonal_element(order, order, scale),
            repaired: false,
        }
    }

    pub fn order(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    #[inline]
    pub fn get(&self, n: usize, p: usize) -> f64 {
        self.entries[(n, p)]
    }

    /// True when at least one negative eigenvalue was clamped.
    pub fn repaired(&self) -> bool {
        self.repaired
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let eig = symmetric_eigen(&self.entries)?;
        let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(values)
    }
}

fn symmetric_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let order = m.nrows();
    SymmetricEigen::try_new(m.clone(), f64::EPSILON, 1000 * order.max(1)).ok_or(Error::Numeric {
        message: "symmetric eigendecomposition did not converge".into(),
        order: Some(order),
    })
}

/// Sinc-kernel correlation with the element-area diagonal, PSD-repaired.
pub fn build_correlation(panel: &PanelGeometry, wavelength: f64) -> Result<CorrelationMatrix> {
    build_correlation_with(panel, wavelength, &CorrelationOptions::default())
}

pub fn build_correlation_with(
    panel: &PanelGeometry,
    wavelength: f64,
    options: &CorrelationOptions,
) -> Result<CorrelationMatrix> {
    panel.validate()?;
    if !(wavelength.is_finite() && wavelength > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "wavelength must be positive, got {wavelength}"
        )));
    }
    let n = panel.element_count();
    let diag = options.normalization.diagonal(panel);
    if !options.correlated {
        return Ok(CorrelationMatrix::scaled_identity(n, diag));
    }

    let positions = (1..=n)
        .map(|i| element_position(i, panel))
        .collect::<Result<Vec<_>>>()?;
    let mut entries = DMatrix::from_diagonal_element(n, n, diag);
    for i in 0..n {
        for j in 0..i {
            let d = positions[i].distance(&positions[j]);
            let r = diag * sinc_normalized(2.0 * d / wavelength);
            entries[(i, j)] = r;
            entries[(j, i)] = r;
        }
    }
    repair_psd(entries, diag)
}

/// Clamps negative eigenvalues at zero, then restores exact symmetry and the
/// constant diagonal.
fn repair_psd(entries: DMatrix<f64>, diag: f64) -> Result<CorrelationMatrix> {
    let n = entries.nrows();
    let eig = symmetric_eigen(&entries)?;
    if eig.eigenvalues.iter().all(|&v| v >= 0.0) {
        return Ok(CorrelationMatrix {
            entries,
            repaired: false,
        });
    }
    let clamped = eig.eigenvalues.map(|v| v.max(0.0));
    let u = &eig.eigenvectors;
    let mut rebuilt = u * DMatrix::from_diagonal(&clamped) * u.transpose();
    for i in 0..n {
        rebuilt[(i, i)] = diag;
        for j in 0..i {
            let avg = 0.5 * (rebuilt[(i, j)] + rebuilt[(j, i)]);
            rebuilt[(i, j)] = avg;
            rebuilt[(j, i)] = avg;
        }
    }
    Ok(CorrelationMatrix {
        entries: rebuilt,
        repaired: true,
    })
}

/// `N × r` factor `L` with `L Lᵀ ≈ R`.
#[derive(Clone, Debug)]
pub struct SamplingFactor {
    factor: DMatrix<f64>,
}

impl SamplingFactor {
    pub fn order(&self) -> usize {
        self.factor.nrows()
    }

    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.factor * self.factor.transpose()
    }
}

/// Diagonal matrices get `diag(√r_nn)` directly, so uncorrelated panels keep
/// an identity layout; everything else goes through the eigendecomposition.
pub fn sampling_factor(r: &CorrelationMatrix) -> Result<SamplingFactor> {
    let n = r.order();
    let entries = r.entries();
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || entries[(i, j)] == 0.0));
    if diagonal && (0..n).all(|i| entries[(i, i)] > 0.0) {
        let factor = DMatrix::from_diagonal(&entries.diagonal().map(f64::sqrt));
        return Ok(SamplingFactor { factor });
    }
    let eig = symmetric_eigen(r.entries())?;
    let lambda_max = eig.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
    if !(lambda_max.is_finite() && lambda_max > 0.0) {
        return Err(Error::Numeric {
            message: "correlation matrix has no positive eigenvalue".into(),
            order: Some(n),
        });
    }
    let cut = RANK_TOLERANCE * lambda_max;
    let mut kept: Vec<(f64, usize)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > cut)
        .map(|(i, &v)| (v, i))
        .collect();
    // descending eigenvalue order keeps the factor layout reproducible
    kept.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut factor = DMatrix::zeros(n, kept.len());
    for (col, &(value, idx)) in kept.iter().enumerate() {
        let s = value.sqrt();
        for row in 0..n {
            factor[(row, col)] = eig.eigenvectors[(row, idx)] * s;
        }
    }
    Ok(SamplingFactor { factor })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Link {
    /// TX → IRS.
    First,
    /// IRS → RX.
    Second,
}

/// Correlation matrices of the two links of one IRS.
#[derive(Clone, Debug)]
pub struct IrsCorrelation {
    pub link1: Arc<CorrelationMatrix>,
    pub link2: Arc<CorrelationMatrix>,
}

impl IrsCorrelation {
    pub fn link(&self, link: Link) -> &CorrelationMatrix {
        match link {
            Link::First => &self.link1,
            Link::Second => &self.link2,
        }
    }
}

/// Per-IRS correlation pairs, all of a common order `N`.
#[derive(Clone, Debug)]
pub struct CorrelationSet {
    per_irs: Vec<IrsCorrelation>,
}

impl CorrelationSet {
    pub fn new(per_irs: Vec<IrsCorrelation>) -> Result<Self> {
        let Some(first) = per_irs.first() else {
            return Err(Error::InvalidArgument("empty correlation set".into()));
        };
        let n = first.link1.order();
        for pair in &per_irs {
            for m in [&pair.link1, &pair.link2] {
                if m.order() != n {
                    return Err(Error::DimensionMismatch {
                        context: "correlation set",
                        expected: n,
                        actual: m.order(),
                    });
                }
            }
        }
        Ok(Self { per_irs })
    }

    /// Every IRS and both links share one matrix built from the scenario's
    /// panel.
    pub fn for_scenario(scenario: &Scenario, options: &CorrelationOptions) -> Result<Self> {
        let r = Arc::new(build_correlation_with(
            &scenario.panel,
            scenario.radio.wavelength(),
            options,
        )?);
        Ok(Self::shared(r, scenario.irs_count()))
    }

    pub fn shared(r: Arc<CorrelationMatrix>, irs_count: usize) -> Self {
        let pair = IrsCorrelation {
            link1: Arc::clone(&r),
            link2: r,
        };
        Self {
            per_irs: vec![pair; irs_count],
        }
    }

    pub fn irs_count(&self) -> usize {
        self.per_irs.len()
    }

    pub fn order(&self) -> usize {
        self.per_irs[0].link1.order()
    }

    pub fn irs(&self, m: usize) -> &IrsCorrelation {
        &self.per_irs[m]
    }

    pub fn iter(&self) -> impl Iterator<Item = &IrsCorrelation> {
        self.per_irs.iter()
    }
}

/// Diagonal of the `M × M` cross-element matrix: entry `m` is
/// `β_{m,link} · r^{link}_{np,m}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossElementDiag(pub Vec<f64>);

/// Cross-element matrix for the (1-based) element pair `(n, p)`.
pub fn build_q(
    n: usize,
    p: usize,
    link: Link,
    gains: &LinkGains,
    correlations: &CorrelationSet,
) -> Result<CrossElementDiag> {
    let order = correlations.order();
    for idx in [n, p] {
        if idx == 0 || idx > order {
            return Err(Error::IndexOutOfRange {
                index: idx,
                max: order,
            });
        }
    }
    if gains.irs_count() != correlations.irs_count() {
        return Err(Error::DimensionMismatch {
            context: "build_q IRS count",
            expected: correlations.irs_count(),
            actual: gains.irs_count(),
        });
    }
    Ok(CrossElementDiag(
        gains
            .per_irs
            .iter()
            .zip(correlations.iter())
            .map(|(g, c)| {
                let beta = match link {
                    Link::First => g.link1,
                    Link::Second => g.link2,
                };
                beta * c.link(link).get(n - 1, p - 1)
            })
            .collect(),
    ))
}

/// Binary dump: `u64` order, then `order²` `f64` entries, row-major, all
/// little-endian.
pub fn write_matrix_dump<W: Write>(m: &DMatrix<f64>, mut out: W) -> io::Result<()> {
    let n = m.nrows();
    out.write_all(&(n as u64).to_le_bytes())?;
    for i in 0..n {
        for j in 0..m.ncols() {
            out.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    out.flush()
}

pub fn read_matrix_dump<R: Read>(mut input: R) -> io::Result<DMatrix<f64>> {
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let n = usize::try_from(u64::from_le_bytes(word))
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "order overflows usize"))?;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            input.read_exact(&mut word)?;
            m[(i, j)] = f64::from_le_bytes(word);
        }
    }
    Ok(m)
}

pub fn dump_matrix_to_file(m: &DMatrix<f64>, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_matrix_dump(m, io::BufWriter::new(file))?;
    Ok(())
}

/// `index,eigenvalue` CSV of the spectrum, largest first.
pub fn write_spectrum_csv<W: Write>(r: &CorrelationMatrix, mut out: W) -> Result<()> {
    writeln!(out, "index,eigenvalue")?;
    for (i, v) in r.eigenvalues()?.iter().enumerate() {
        writeln!(out, "{},{:e}", i + 1, v)?;
    }
    Ok(())
}
