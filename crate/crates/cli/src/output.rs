use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use irscov::config::SCHEMA_VERSION;
use irscov::montecarlo::RNG_IDENTITY;
use irscov::scenario::PathLossConvention;
use irscov::spatialcorr::CorrelationOptions;

use crate::sweep::ThresholdAxis;

/// Commit the binary was built from, or `unknown` outside a checkout.
pub const BUILD_ID: &str = env!("IRSCOV_BUILD_ID");

/// `# key: value` lines written ahead of the CSV header.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new(correlation: &CorrelationOptions, path_loss: PathLossConvention, axis: ThresholdAxis) -> Self {
        let mut m = Self::default();
        m.push("schema_version", SCHEMA_VERSION.to_string());
        m.push("build", format!("{} {}", env!("CARGO_PKG_VERSION"), BUILD_ID));
        m.push("sinc", "sin(pi x)/(pi x), x = 2 distance / wavelength");
        m.push(
            "correlation",
            if correlation.correlated {
                format!("sinc, {}", correlation.normalization.as_str())
            } else {
                format!("uncorrelated, {}", correlation.normalization.as_str())
            },
        );
        m.push("path_loss", path_loss.as_str());
        m.push("rng", RNG_IDENTITY);
        m.push("threshold_axis", axis.as_str());
        m
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.push((key.into(), value.into()));
    }

    pub fn write<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for (k, v) in &self.entries {
            writeln!(out, "# {k}: {v}")?;
        }
        Ok(())
    }
}

/// Metadata block followed by an RFC 4180 table.
pub fn write_csv<W: Write>(
    mut out: W,
    meta: &Metadata,
    header: &[&str],
    records: impl IntoIterator<Item = Vec<String>>,
) -> io::Result<()> {
    meta.write(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in records {
        w.write_record(&r)?;
    }
    w.flush()
}

/// Whitespace-separated columns for gnuplot. Blocks are separated by two
/// blank lines so that `index` selects a curve; missing values are `NaN`.
pub fn write_dat<W: Write>(
    mut out: W,
    meta: &Metadata,
    header: &[&str],
    blocks: impl IntoIterator<Item = Vec<Vec<String>>>,
) -> io::Result<()> {
    meta.write(&mut out)?;
    writeln!(out, "# {}", header.join(" "))?;
    for (i, block) in blocks.into_iter().enumerate() {
        if i > 0 {
            writeln!(out)?;
            writeln!(out)?;
        }
        for row in block {
            let cells: Vec<String> = row
                .into_iter()
                .map(|c| {
                    if c.is_empty() {
                        "NaN".to_string()
                    } else if c.contains(char::is_whitespace) {
                        format!("\"{c}\"")
                    } else {
                        c
                    }
                })
                .collect();
            writeln!(out, "{}", cells.join(" "))?;
        }
    }
    out.flush()
}

/// `path` with its extension replaced by `.dat`.
pub fn dat_path(path: &Path) -> PathBuf {
    path.with_extension("dat")
}

/// Buffered file writer, or stdout when `path` is `None`.
pub fn open_output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}
