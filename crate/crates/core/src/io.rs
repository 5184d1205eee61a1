//! CSV formats for time signals and spectral data bundles.
//!
//! A signal file has a header `t,<node>,<node>,...` and one row per sample.
//! A bundle directory holds `bundle.toml` (kind and grouping tolerance),
//! `channels.csv` (`axis,node,weight`), `index.csv` (one row per group) and
//! one headerless matrix file per group.

use crate::error::{Error, Result};
use crate::forward::{ChannelRole, TimeGrid, TimeSignal};
use crate::recover::{BoundarySpectralData, SpectralData, SpectralGroup};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

pub fn write_signal<W: Write>(signal: &TimeSignal, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(signal.channels.iter().map(|c| c.to_string()));
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for n in 0..signal.grid.len() {
        row.clear();
        row.push(signal.grid.time(n).to_string());
        row.extend(signal.values.row(n).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a signal written by [`write_signal`]; the step is taken from the
/// first two rows and every later time must sit on the same uniform grid.
pub fn read_signal<R: Read>(input: R, role: ChannelRole) -> Result<TimeSignal> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.get(0) != Some("t") {
        return Err(Error::InvalidInput("signal header must start with `t`".into()));
    }
    let channels = header
        .iter()
        .skip(1)
        .map(|h| {
            h.parse::<usize>()
                .map_err(|_| Error::InvalidInput(format!("bad channel label `{h}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut times = Vec::new();
    let mut data = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let nums = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidInput(format!("row {}: {e}", line + 2)))?;
        if nums.len() != channels.len() + 1 {
            return Err(Error::InvalidInput(format!(
                "row {} has {} fields, expected {}",
                line + 2,
                nums.len(),
                channels.len() + 1
            )));
        }
        times.push(nums[0]);
        data.extend_from_slice(&nums[1..]);
    }
    if times.len() < 2 {
        return Err(Error::InvalidInput("signal needs at least 2 samples".into()));
    }
    let dt = times[1] - times[0];
    let grid = TimeGrid::new(dt, times.len())?;
    for (n, &t) in times.iter().enumerate() {
        if (t - grid.time(n)).abs() > 1e-9 * dt.max(t.abs()) {
            return Err(Error::InvalidInput(format!(
                "row {}: time {t} is off the uniform grid",
                n + 2
            )));
        }
    }
    let values = DMatrix::from_row_slice(times.len(), channels.len(), &data);
    TimeSignal::new(grid, values, channels, role)
}

pub fn save_signal(signal: &TimeSignal, path: &Path) -> Result<()> {
    write_signal(signal, fs::File::create(path)?)
}

pub fn load_signal(path: &Path, role: ChannelRole) -> Result<TimeSignal> {
    read_signal(fs::File::open(path)?, role)
}

pub fn write_matrix<W: Write>(m: &DMatrix<f64>, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix<R: Read>(input: R) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut rows = 0;
    let mut cols = None;
    let mut data = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if *cols.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::InvalidInput(format!("matrix row {} is ragged", rows + 1)));
        }
        for f in rec.iter() {
            data.push(
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("matrix row {}: {e}", rows + 1)))?,
            );
        }
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, cols.unwrap_or(0), &data))
}

/// Hex SHA-256 digest of a file.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BundleKind {
    Source,
    Boundary,
}

#[derive(Serialize, Deserialize)]
struct BundleMeta {
    kind: BundleKind,
    lambda_rtol: f64,
}

#[derive(Serialize, Deserialize)]
struct IndexRow {
    group: usize,
    lambda: f64,
    multiplicity: usize,
    residual: f64,
    flagged: bool,
    file: String,
}

#[derive(Serialize, Deserialize)]
struct ChannelRow {
    axis: String,
    node: usize,
    weight: Option<f64>,
}

/// Either kind of spectral data as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum Bundle {
    Source(SpectralData),
    Boundary(BoundarySpectralData),
}

impl Bundle {
    pub fn kind(&self) -> BundleKind {
        match self {
            Bundle::Source(_) => BundleKind::Source,
            Bundle::Boundary(_) => BundleKind::Boundary,
        }
    }

    pub fn groups(&self) -> &[SpectralGroup] {
        match self {
            Bundle::Source(d) => &d.groups,
            Bundle::Boundary(d) => &d.groups,
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let (kind, lambda_rtol, channels) = match self {
            Bundle::Source(d) => (
                BundleKind::Source,
                d.lambda_rtol,
                d.channels
                    .iter()
                    .zip(&d.weights)
                    .map(|(&node, &w)| ChannelRow {
                        axis: "w".into(),
                        node,
                        weight: Some(w),
                    })
                    .collect::<Vec<_>>(),
            ),
            Bundle::Boundary(d) => (
                BundleKind::Boundary,
                d.lambda_rtol,
                d.rows
                    .iter()
                    .map(|&node| ChannelRow {
                        axis: "out".into(),
                        node,
                        weight: None,
                    })
                    .chain(d.cols.iter().map(|&node| ChannelRow {
                        axis: "in".into(),
                        node,
                        weight: None,
                    }))
                    .collect(),
            ),
        };
        let meta = toml::to_string(&BundleMeta { kind, lambda_rtol })
            .map_err(|e| Error::Config(e.to_string()))?;
        fs::write(dir.join("bundle.toml"), meta)?;

        let mut w = csv::Writer::from_path(dir.join("channels.csv"))?;
        for row in channels {
            w.serialize(row)?;
        }
        w.flush()?;

        let mut index = csv::Writer::from_path(dir.join("index.csv"))?;
        for (k, g) in self.groups().iter().enumerate() {
            let file = format!("group_{k:03}.csv");
            write_matrix(&g.matrix, fs::File::create(dir.join(&file))?)?;
            index.serialize(IndexRow {
                group: k,
                lambda: g.lambda,
                multiplicity: g.multiplicity,
                residual: g.residual,
                flagged: g.flagged,
                file,
            })?;
        }
        index.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("bundle.toml");
        if !meta_path.exists() {
            return Err(Error::InvalidInput(format!(
                "{} is not a spectral data bundle",
                dir.display()
            )));
        }
        let meta: BundleMeta = toml::from_str(&fs::read_to_string(&meta_path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", meta_path.display())))?;

        let mut w_nodes = Vec::new();
        let mut weights = Vec::new();
        let mut rows = Vec::new();
        let mut cols = Vec::new();
        for rec in csv::Reader::from_path(dir.join("channels.csv"))?.deserialize() {
            let row: ChannelRow = rec?;
            match row.axis.as_str() {
                "w" => {
                    w_nodes.push(row.node);
                    weights.push(row.weight.ok_or_else(|| {
                        Error::InvalidInput(format!("W channel {} has no weight", row.node))
                    })?);
                }
                "out" => rows.push(row.node),
                "in" => cols.push(row.node),
                other => {
                    return Err(Error::InvalidInput(format!("unknown channel axis `{other}`")))
                }
            }
        }
        let (nr, nc) = match meta.kind {
            BundleKind::Source => (w_nodes.len(), w_nodes.len()),
            BundleKind::Boundary => (rows.len(), cols.len()),
        };

        let mut groups = Vec::new();
        for rec in csv::Reader::from_path(dir.join("index.csv"))?.deserialize() {
            let row: IndexRow = rec?;
            if row.file.contains(['/', '\\']) {
                return Err(Error::InvalidInput(format!("bad group file `{}`", row.file)));
            }
            let matrix = read_matrix(fs::File::open(dir.join(&row.file))?)?;
            if matrix.shape() != (nr, nc) {
                return Err(Error::ChannelMismatch(format!(
                    "{} is {}×{}, channels give {nr}×{nc}",
                    row.file,
                    matrix.nrows(),
                    matrix.ncols()
                )));
            }
            groups.push(SpectralGroup {
                lambda: row.lambda,
                multiplicity: row.multiplicity,
                matrix,
                residual: row.residual,
                flagged: row.flagged,
            });
        }
        Ok(match meta.kind {
            BundleKind::Source => Bundle::Source(SpectralData {
                channels: w_nodes,
                weights,
                groups,
                lambda_rtol: meta.lambda_rtol,
            }),
            BundleKind::Boundary => Bundle::Boundary(BoundarySpectralData {
                rows,
                cols,
                groups,
                lambda_rtol: meta.lambda_rtol,
            }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(l: f64, r: usize, c: usize) -> SpectralGroup {
        SpectralGroup {
            lambda: l,
            multiplicity: 2,
            matrix: DMatrix::from_fn(r, c, |i, j| (l * (i as f64 + 0.1) / (j as f64 + 3.0)).sin()),
            residual: 1e-9 * l,
            flagged: l > 5.0,
        }
    }

    #[test]
    fn signal_round_trip_is_exact() {
        let grid = TimeGrid::new(0.01, 50).unwrap();
        let values = DMatrix::from_fn(50, 3, |n, c| (n as f64 * 0.37 + c as f64).cos() / 3.0);
        let s = TimeSignal::new(grid, values, vec![4, 9, 2], ChannelRole::Interior).unwrap();
        let mut buf = Vec::new();
        write_signal(&s, &mut buf).unwrap();
        let back = read_signal(buf.as_slice(), ChannelRole::Interior).unwrap();
        assert_eq!(back.values, s.values);
        assert_eq!(back.channels, s.channels);
        assert_eq!(back.grid.len(), 50);
        assert!((back.grid.dt() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn ragged_signal_is_rejected() {
        let text = "t,0,1\n0,1,2\n0.1,3\n";
        assert!(read_signal(text.as_bytes(), ChannelRole::Interior).is_err());
    }

    #[test]
    fn bundles_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let src = Bundle::Source(SpectralData {
            channels: vec![3, 4, 5],
            weights: vec![0.5, 0.25, 0.5],
            groups: vec![group(1.0, 3, 3), group(9.5, 3, 3)],
            lambda_rtol: 1e-8,
        });
        src.save(&dir.path().join("a")).unwrap();
        assert_eq!(Bundle::load(&dir.path().join("a")).unwrap(), src);

        let bnd = Bundle::Boundary(BoundarySpectralData {
            rows: vec![0, 7],
            cols: vec![7],
            groups: vec![group(2.0, 2, 1)],
            lambda_rtol: 1e-8,
        });
        bnd.save(&dir.path().join("b")).unwrap();
        assert_eq!(Bundle::load(&dir.path().join("b")).unwrap(), bnd);
    }
}
