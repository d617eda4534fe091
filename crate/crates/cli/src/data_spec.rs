use std::path::PathBuf;
use std::str::FromStr;

use busemann_core::data_io::{load_csv, load_idx, synthetic_blobs, BlobsSpec, Dataset};

use crate::CliError;

/// Dataset address given on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    /// `csv:PATH:labelcol`
    Csv { path: PathBuf, label_column: usize },
    /// `idx:IMAGES:LABELS`
    Idx { images: PathBuf, labels: PathBuf },
    /// `blobs:C,I,per_class,scale,sigma,seed`
    Blobs(BlobsSpec),
}

impl FromStr for DataSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, rest) = s.split_once(':').ok_or_else(|| format!("{s:?}: expected KIND:ARGS"))?;
        match kind {
            "csv" => {
                let (path, col) = rest.rsplit_once(':').ok_or_else(|| format!("{s:?}: expected csv:PATH:labelcol"))?;
                let label_column = col.parse().map_err(|_| format!("{s:?}: label column {col:?} is not an index"))?;
                if path.is_empty() {
                    return Err(format!("{s:?}: empty path"));
                }
                Ok(DataSpec::Csv { path: path.into(), label_column })
            }
            "idx" => {
                let (images, labels) =
                    rest.split_once(':').ok_or_else(|| format!("{s:?}: expected idx:IMAGES:LABELS"))?;
                Ok(DataSpec::Idx { images: images.into(), labels: labels.into() })
            }
            "blobs" => {
                let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
                let [c, i, n, scale, sigma, seed] = parts[..] else {
                    return Err(format!("{s:?}: expected blobs:C,I,per_class,scale,sigma,seed"));
                };
                let int = |v: &str| v.parse::<usize>().map_err(|_| format!("{s:?}: {v:?} is not a count"));
                let real = |v: &str| v.parse::<f64>().map_err(|_| format!("{s:?}: {v:?} is not a number"));
                Ok(DataSpec::Blobs(BlobsSpec {
                    classes: int(c)?,
                    input_dim: int(i)?,
                    per_class: int(n)?,
                    center_scale: real(scale)?,
                    noise_sigma: real(sigma)?,
                    seed: seed.parse().map_err(|_| format!("{s:?}: seed {seed:?} is not an integer"))?,
                }))
            }
            other => Err(format!("unknown data kind {other:?} (expected csv, idx or blobs)")),
        }
    }
}

impl DataSpec {
    pub fn load(&self) -> Result<Dataset, CliError> {
        match self {
            DataSpec::Csv { path, label_column } => Ok(load_csv(path, *label_column)?),
            DataSpec::Idx { images, labels } => Ok(load_idx(images, labels)?),
            DataSpec::Blobs(spec) => {
                let (data, report) = synthetic_blobs(spec)?;
                log::info!(
                    "blobs: min center distance {:.4}, mean {:.4}",
                    report.min_center_distance,
                    report.mean_center_distance
                );
                Ok(data)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_kinds() {
        assert_eq!(
            "csv:/tmp/a:b.csv:3".parse::<DataSpec>().unwrap(),
            DataSpec::Csv { path: "/tmp/a:b.csv".into(), label_column: 3 }
        );
        assert_eq!(
            "idx:img:lab".parse::<DataSpec>().unwrap(),
            DataSpec::Idx { images: "img".into(), labels: "lab".into() }
        );
        let DataSpec::Blobs(b) = "blobs:10,20,500,5,1,0".parse::<DataSpec>().unwrap() else { panic!() };
        assert_eq!(
            (b.classes, b.input_dim, b.per_class, b.center_scale, b.noise_sigma, b.seed),
            (10, 20, 500, 5.0, 1.0, 0)
        );
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["csv:file", "csv:file:x", "blobs:1,2,3", "idx:only", "tsv:a:1", "nothing"] {
            assert!(bad.parse::<DataSpec>().is_err(), "{bad}");
        }
    }
}
