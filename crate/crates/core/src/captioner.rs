//! Image-to-sentence captioning.
//!
//! [`Captioner`] is the seam the pipeline depends on. [`HistogramIndex`] is a
//! small retrieval captioner: it describes a query image with the first
//! caption of the most similar training image, where similarity is a
//! distance between per-channel color histograms. [`ProcessCaptioner`]
//! forwards requests to an external program over stdio.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::str::FromStr;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CaptionedImage;
use crate::image::ImageBuffer;
use crate::textprep::{clean, CleanConfig};

pub const INDEX_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_BINS: usize = 4;

#[derive(Debug, Error)]
pub enum CaptionError {
    #[error("bins must divide 256, got {0}")]
    BadBins(usize),
    #[error("image has zero area")]
    EmptyImage,
    #[error("cannot build an index from an empty corpus")]
    EmptyCorpus,
    #[error("corpus item {item}: caption {caption} is empty after cleaning")]
    EmptyCaption { item: usize, caption: usize },
    #[error("index file: {0}")]
    Format(String),
    #[error("external captioner: {0}")]
    External(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub trait Captioner: Send + Sync {
    /// Stable identifier, e.g. `knn-hist/v1`.
    fn id(&self) -> String;

    fn caption(&self, image: &ImageBuffer) -> Result<String, CaptionError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    L2,
    Chi2,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::L2 => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::Chi2 => {
                0.5 * a
                    .iter()
                    .zip(b)
                    .filter(|(x, y)| *x + *y > 0.0)
                    .map(|(x, y)| (x - y) * (x - y) / (x + y))
                    .sum::<f64>()
            }
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::L2 => "l2",
            Metric::Chi2 => "chi2",
        })
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(Metric::L2),
            "chi2" => Ok(Metric::Chi2),
            other => Err(format!("unknown metric {other:?} (expected l2 or chi2)")),
        }
    }
}

/// Concatenated R, G, B histograms with `bins` equal-width buckets each,
/// every channel normalized by pixel count.
pub fn featurize(img: &ImageBuffer, bins: usize) -> Result<Vec<f64>, CaptionError> {
    if bins == 0 || bins > 256 || 256 % bins != 0 {
        return Err(CaptionError::BadBins(bins));
    }
    let n = img.pixel_count();
    if n == 0 {
        return Err(CaptionError::EmptyImage);
    }
    let width = 256 / bins;
    let mut counts = vec![0u64; 3 * bins];
    for px in img.rgb() {
        for (c, &v) in px.iter().enumerate() {
            counts[c * bins + v as usize / width] += 1;
        }
    }
    Ok(counts.into_iter().map(|k| k as f64 / n as f64).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub features: Vec<f64>,
    /// Captions after caption-preset cleaning.
    pub captions: [String; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramIndex {
    pub format_version: u32,
    pub bins: usize,
    pub metric: Metric,
    pub entries: Vec<IndexEntry>,
}

/// Result of a nearest-neighbor lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub entry: usize,
    pub distance: f64,
}

impl HistogramIndex {
    pub fn build(
        corpus: &[CaptionedImage],
        bins: usize,
        metric: Metric,
    ) -> Result<Self, CaptionError> {
        if corpus.is_empty() {
            return Err(CaptionError::EmptyCorpus);
        }
        let entries = corpus
            .iter()
            .enumerate()
            .map(|(item, ci)| {
                let mut captions: [String; 5] = Default::default();
                for (k, (dst, src)) in captions.iter_mut().zip(ci.captions()).enumerate() {
                    *dst = clean(src, &CleanConfig::CAPTION);
                    if dst.is_empty() {
                        return Err(CaptionError::EmptyCaption { item, caption: k });
                    }
                }
                Ok(IndexEntry {
                    features: featurize(&ci.image, bins)?,
                    captions,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            format_version: INDEX_FORMAT_VERSION,
            bins,
            metric,
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Closest entry; ties go to the earliest inserted.
    pub fn nearest(&self, img: &ImageBuffer) -> Result<Neighbor, CaptionError> {
        let q = featurize(img, self.bins)?;
        let mut best = Neighbor {
            entry: 0,
            distance: f64::INFINITY,
        };
        for (i, e) in self.entries.iter().enumerate() {
            let d = self.metric.distance(&q, &e.features);
            if d < best.distance {
                best = Neighbor {
                    entry: i,
                    distance: d,
                };
            }
        }
        Ok(best)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("index serializes") + "\n"
    }

    pub fn from_json(s: &str) -> Result<Self, CaptionError> {
        let index: Self =
            serde_json::from_str(s).map_err(|e| CaptionError::Format(e.to_string()))?;
        if index.format_version != INDEX_FORMAT_VERSION {
            return Err(CaptionError::Format(format!(
                "unsupported format_version {}",
                index.format_version
            )));
        }
        if index.entries.is_empty() {
            return Err(CaptionError::EmptyCorpus);
        }
        if 256 % index.bins.max(1) != 0 || index.bins == 0 {
            return Err(CaptionError::BadBins(index.bins));
        }
        if index
            .entries
            .iter()
            .any(|e| e.features.len() != 3 * index.bins)
        {
            return Err(CaptionError::Format(
                "feature length does not match bins".into(),
            ));
        }
        Ok(index)
    }

    pub fn save(&self, path: &Path) -> Result<(), CaptionError> {
        fs::write(path, self.to_json()).map_err(|source| CaptionError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CaptionError> {
        let s = fs::read_to_string(path).map_err(|source| CaptionError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&s)
    }
}

impl Captioner for HistogramIndex {
    fn id(&self) -> String {
        format!(
            "knn-hist/v{INDEX_FORMAT_VERSION}/{}x{}",
            self.bins, self.metric
        )
    }

    fn caption(&self, image: &ImageBuffer) -> Result<String, CaptionError> {
        let n = self.nearest(image)?;
        Ok(self.entries[n.entry].captions[0].clone())
    }
}

/// Talks to a long-running external captioner. Each request is one line
/// holding an image path; each response is one caption line. Images are
/// handed over as temporary PPM files.
pub struct ProcessCaptioner {
    name: String,
    io: Mutex<ProcessIo>,
}

struct ProcessIo {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl ProcessCaptioner {
    pub fn spawn(program: &str, args: &[String]) -> Result<Self, CaptionError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| CaptionError::External(format!("cannot start {program}: {e}")))?;
        let stdin = child.stdin.take().expect("stdin piped");
        let stdout = BufReader::new(child.stdout.take().expect("stdout piped"));
        Ok(Self {
            name: program.to_string(),
            io: Mutex::new(ProcessIo {
                child,
                stdin,
                stdout,
            }),
        })
    }
}

impl Captioner for ProcessCaptioner {
    fn id(&self) -> String {
        format!("process/{}", self.name)
    }

    fn caption(&self, image: &ImageBuffer) -> Result<String, CaptionError> {
        let ext = |e: std::io::Error| CaptionError::External(e.to_string());
        let tmp = tempfile::Builder::new()
            .suffix(".ppm")
            .tempfile()
            .map_err(ext)?;
        fs::write(tmp.path(), image.to_ppm()).map_err(ext)?;
        let mut io = self.io.lock().unwrap_or_else(|p| p.into_inner());
        writeln!(io.stdin, "{}", tmp.path().display()).map_err(ext)?;
        io.stdin.flush().map_err(ext)?;
        let mut line = String::new();
        if io.stdout.read_line(&mut line).map_err(ext)? == 0 {
            return Err(CaptionError::External("captioner closed its output".into()));
        }
        Ok(line.trim_end_matches(['\n', '\r']).to_string())
    }
}

impl Drop for ProcessCaptioner {
    fn drop(&mut self) {
        if let Ok(io) = self.io.get_mut() {
            let _ = io.child.kill();
            let _ = io.child.wait();
        }
    }
}
