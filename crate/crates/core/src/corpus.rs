//! Datasets: labeled post text, captioned images, category combinations
//! and seeded train/test splitting.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{ImageBuffer, ImageError};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}:{line}: {reason}")]
    Record {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("{path}: expected exactly 5 captions, found {found}")]
    CaptionCount { path: String, found: usize },
    #[error("{path}: captions must be pairwise distinct")]
    DuplicateCaption { path: String },
    #[error("image {path}: {source}")]
    Image {
        path: String,
        #[source]
        source: ImageError,
    },
    #[error("empty category selection")]
    EmptySelection,
    #[error("corpus has no images for selector {0}")]
    MissingCategory(Selector),
    #[error("split needs at least 2 items, got {0}")]
    TooSmall(usize),
    #[error("test fraction {0} outside (0, 1)")]
    BadFraction(f64),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Binary label. 1 marks concerning content, 0 benign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Benign = 0,
    Concerning = 1,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Benign, Label::Concerning];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_int(v: i64) -> Option<Self> {
        match v {
            0 => Some(Label::Benign),
            1 => Some(Label::Concerning),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Benign => "benign",
            Label::Concerning => "concerning",
        })
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*self as u8)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Label::from_int(v)
            .ok_or_else(|| serde::de::Error::custom(format!("label must be 0 or 1, got {v}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledText {
    pub text: String,
    pub label: Label,
    #[serde(default)]
    pub source: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    SchoolShooting,
    MassShooting,
    NonThreatening,
}

impl Category {
    pub fn label(self) -> Label {
        match self {
            Category::NonThreatening => Label::Benign,
            _ => Label::Concerning,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::SchoolShooting => "school_shooting",
            Category::MassShooting => "mass_shooting",
            Category::NonThreatening => "non_threatening",
        })
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "school_shooting" => Ok(Category::SchoolShooting),
            "mass_shooting" => Ok(Category::MassShooting),
            "non_threatening" => Ok(Category::NonThreatening),
            other => Err(format!("unknown category {other:?}")),
        }
    }
}

/// An image with its five reference captions.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptionedImage {
    pub image: ImageBuffer,
    captions: [String; 5],
    pub category: Category,
    pub augmented: bool,
}

impl CaptionedImage {
    /// Fails when captions repeat. Augmented items may legitimately
    /// collapse two paraphrases into one string, so use
    /// [`CaptionedImage::new_unchecked_distinct`] for those.
    pub fn new(
        image: ImageBuffer,
        captions: [String; 5],
        category: Category,
        augmented: bool,
    ) -> Result<Self, CorpusError> {
        let distinct: BTreeSet<&str> = captions.iter().map(String::as_str).collect();
        if distinct.len() != 5 {
            return Err(CorpusError::DuplicateCaption {
                path: "<memory>".into(),
            });
        }
        Ok(Self::new_unchecked_distinct(
            image, captions, category, augmented,
        ))
    }

    pub fn new_unchecked_distinct(
        image: ImageBuffer,
        captions: [String; 5],
        category: Category,
        augmented: bool,
    ) -> Self {
        Self {
            image,
            captions,
            category,
            augmented,
        }
    }

    pub fn captions(&self) -> &[String; 5] {
        &self.captions
    }

    pub fn selector(&self) -> Selector {
        Selector {
            category: self.category,
            augmented: self.augmented,
        }
    }
}

/// Picks one slice of the image corpus: a category, either unedited or augmented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Selector {
    pub category: Category,
    pub augmented: bool,
}

impl Selector {
    pub const fn unedited(category: Category) -> Self {
        Self {
            category,
            augmented: false,
        }
    }

    pub const fn augmented(category: Category) -> Self {
        Self {
            category,
            augmented: true,
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.augmented {
            write!(f, "augmented {}", self.category)
        } else {
            write!(f, "{}", self.category)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetCombination {
    pub name: String,
    pub selectors: BTreeSet<Selector>,
    pub images: usize,
    pub captions: usize,
    /// Corpus indices of the member images, in corpus order.
    pub members: Vec<usize>,
}

/// The seven category mixes used to compare captioner training sets.
pub fn standard_combinations() -> Vec<(&'static str, Vec<Selector>)> {
    use Category::*;
    let nt = Selector::unedited(NonThreatening);
    vec![
        ("unedited_mass", vec![Selector::unedited(MassShooting), nt]),
        (
            "unedited_school",
            vec![Selector::unedited(SchoolShooting), nt],
        ),
        (
            "unedited_school_mass",
            vec![
                Selector::unedited(SchoolShooting),
                Selector::unedited(MassShooting),
                nt,
            ],
        ),
        (
            "augmented_mass",
            vec![Selector::augmented(MassShooting), nt],
        ),
        (
            "augmented_school",
            vec![Selector::augmented(SchoolShooting), nt],
        ),
        (
            "augmented_school_mass",
            vec![
                Selector::augmented(SchoolShooting),
                Selector::augmented(MassShooting),
                nt,
            ],
        ),
        (
            "all",
            vec![
                Selector::unedited(SchoolShooting),
                Selector::unedited(MassShooting),
                Selector::augmented(SchoolShooting),
                Selector::augmented(MassShooting),
                nt,
            ],
        ),
    ]
}

pub fn combine(
    name: &str,
    selectors: &[Selector],
    corpus: &[CaptionedImage],
) -> Result<DatasetCombination, CorpusError> {
    if selectors.is_empty() {
        return Err(CorpusError::EmptySelection);
    }
    let wanted: BTreeSet<Selector> = selectors.iter().copied().collect();
    let present: BTreeSet<Selector> = corpus.iter().map(CaptionedImage::selector).collect();
    if let Some(missing) = wanted.iter().find(|s| !present.contains(s)) {
        return Err(CorpusError::MissingCategory(*missing));
    }
    let members: Vec<usize> = corpus
        .iter()
        .enumerate()
        .filter(|(_, item)| wanted.contains(&item.selector()))
        .map(|(i, _)| i)
        .collect();
    let images = members.len();
    Ok(DatasetCombination {
        name: name.to_string(),
        selectors: wanted,
        images,
        captions: images * 5,
        members,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(test_fraction: f64, seed: u64) -> Result<Self, CorpusError> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(CorpusError::BadFraction(test_fraction));
        }
        Ok(Self {
            test_fraction,
            seed,
        })
    }

    /// Test-set size: `n * test_fraction` rounded half away from zero.
    pub fn test_count(&self, n: usize) -> usize {
        (n as f64 * self.test_fraction).round() as usize
    }
}

/// Shuffles with a seeded ChaCha8 stream, then cuts the first
/// `n - test_count` items as train and the rest as test.
pub fn split<T: Clone>(items: &[T], spec: SplitSpec) -> Result<(Vec<T>, Vec<T>), CorpusError> {
    let (train, test) = split_indices(items.len(), spec)?;
    Ok((
        train.iter().map(|&i| items[i].clone()).collect(),
        test.iter().map(|&i| items[i].clone()).collect(),
    ))
}

pub fn split_indices(n: usize, spec: SplitSpec) -> Result<(Vec<usize>, Vec<usize>), CorpusError> {
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(CorpusError::BadFraction(spec.test_fraction));
    }
    if n < 2 {
        return Err(CorpusError::TooSmall(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    let test = order.split_off(n - spec.test_count(n));
    Ok((order, test))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextFormat {
    Csv,
    Jsonl,
}

impl TextFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(TextFormat::Csv),
            "jsonl" | "ndjson" => Some(TextFormat::Jsonl),
            _ => None,
        }
    }
}

impl FromStr for TextFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(TextFormat::Csv),
            "jsonl" => Ok(TextFormat::Jsonl),
            other => Err(format!("unknown text format {other:?}")),
        }
    }
}

pub fn load_text_corpus(path: &Path, format: TextFormat) -> Result<Vec<LabeledText>, CorpusError> {
    let content = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let source = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    match format {
        TextFormat::Csv => parse_csv_corpus(&content, &path.display().to_string(), &source),
        TextFormat::Jsonl => parse_jsonl_corpus(&content, &path.display().to_string(), &source),
    }
}

#[derive(Deserialize)]
struct TextRecord {
    label: serde_json::Value,
    text: String,
    #[serde(default)]
    source: Option<String>,
}

pub fn parse_jsonl_corpus(
    content: &str,
    path: &str,
    source: &str,
) -> Result<Vec<LabeledText>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| CorpusError::Record {
            path: path.to_string(),
            line: i + 1,
            reason,
        };
        let rec: TextRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        let label = rec
            .label
            .as_i64()
            .and_then(Label::from_int)
            .ok_or_else(|| err(format!("unknown label value {}", rec.label)))?;
        if rec.text.is_empty() {
            return Err(err("empty text".into()));
        }
        out.push(LabeledText {
            text: rec.text,
            label,
            source: rec.source.unwrap_or_else(|| source.to_string()),
        });
    }
    Ok(out)
}

/// CSV with a `label,text` header (column order is taken from the header).
/// Quoted fields follow RFC 4180: `""` escapes a quote and quoted fields may
/// span lines.
pub fn parse_csv_corpus(
    content: &str,
    path: &str,
    source: &str,
) -> Result<Vec<LabeledText>, CorpusError> {
    let records = parse_csv_records(content).map_err(|(line, reason)| CorpusError::Record {
        path: path.to_string(),
        line,
        reason,
    })?;
    let mut iter = records.into_iter();
    let Some((_, header)) = iter.next() else {
        return Ok(Vec::new());
    };
    let col = |name: &str| header.iter().position(|h| h.trim() == name);
    let (label_col, text_col) = match (col("label"), col("text")) {
        (Some(l), Some(t)) => (l, t),
        _ => {
            return Err(CorpusError::Record {
                path: path.to_string(),
                line: 1,
                reason: "header must name `label` and `text` columns".into(),
            })
        }
    };
    let mut out = Vec::new();
    for (line, fields) in iter {
        let err = |reason: String| CorpusError::Record {
            path: path.to_string(),
            line,
            reason,
        };
        if fields.len() != header.len() {
            return Err(err(format!(
                "expected {} fields, found {}",
                header.len(),
                fields.len()
            )));
        }
        let raw = fields[label_col].trim();
        let label = raw
            .parse::<i64>()
            .ok()
            .and_then(Label::from_int)
            .ok_or_else(|| err(format!("unknown label value {raw:?}")))?;
        let text = fields[text_col].clone();
        if text.is_empty() {
            return Err(err("empty text".into()));
        }
        out.push(LabeledText {
            text,
            label,
            source: source.to_string(),
        });
    }
    Ok(out)
}

type CsvRecord = (usize, Vec<String>);

/// Returns records tagged with the line number they start on. Blank lines
/// are skipped.
fn parse_csv_records(content: &str) -> Result<Vec<CsvRecord>, (usize, String)> {
    let mut records = Vec::new();
    let mut chars = content.chars().peekable();
    let mut line = 1;
    loop {
        while chars.peek() == Some(&'\n') || chars.peek() == Some(&'\r') {
            if chars.next() == Some('\n') {
                line += 1;
            }
        }
        if chars.peek().is_none() {
            break;
        }
        let start = line;
        let mut fields = Vec::new();
        let mut field = String::new();
        let mut quoted = false;
        let mut at_field_start = true;
        loop {
            let Some(c) = chars.next() else {
                if quoted {
                    return Err((start, "unterminated quoted field".into()));
                }
                fields.push(std::mem::take(&mut field));
                break;
            };
            if quoted {
                match c {
                    '"' if chars.peek() == Some(&'"') => {
                        chars.next();
                        field.push('"');
                    }
                    '"' => {
                        quoted = false;
                        match chars.peek() {
                            None | Some(',') | Some('\n') | Some('\r') => {}
                            Some(other) => {
                                return Err((
                                    line,
                                    format!("unexpected {other:?} after closing quote"),
                                ))
                            }
                        }
                    }
                    '\n' => {
                        line += 1;
                        field.push(c);
                    }
                    _ => field.push(c),
                }
                continue;
            }
            match c {
                '"' if at_field_start => {
                    quoted = true;
                    at_field_start = false;
                }
                ',' => {
                    fields.push(std::mem::take(&mut field));
                    at_field_start = true;
                }
                '\r' if chars.peek() == Some(&'\n') => {}
                '\n' => {
                    line += 1;
                    fields.push(std::mem::take(&mut field));
                    break;
                }
                _ => {
                    field.push(c);
                    at_field_start = false;
                }
            }
        }
        records.push((start, fields));
    }
    Ok(records)
}

/// One line of an image corpus `manifest.jsonl`. Paths are relative to the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub captions: PathBuf,
    pub category: Category,
    #[serde(default)]
    pub augmented: bool,
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";

pub fn load_image_corpus(dir: &Path) -> Result<Vec<CaptionedImage>, CorpusError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let content = fs::read_to_string(&manifest_path).map_err(|source| CorpusError::Io {
        path: manifest_path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(line).map_err(|e| CorpusError::Record {
            path: manifest_path.display().to_string(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(load_manifest_entry(dir, &entry)?);
    }
    Ok(out)
}

fn load_manifest_entry(dir: &Path, entry: &ManifestEntry) -> Result<CaptionedImage, CorpusError> {
    let image_path = dir.join(&entry.image);
    let image = ImageBuffer::load(&image_path).map_err(|source| CorpusError::Image {
        path: image_path.display().to_string(),
        source,
    })?;
    let caption_path = dir.join(&entry.captions);
    let captions = read_caption_file(&caption_path)?;
    if entry.augmented {
        Ok(CaptionedImage::new_unchecked_distinct(
            image,
            captions,
            entry.category,
            true,
        ))
    } else {
        CaptionedImage::new(image, captions, entry.category, false).map_err(|_| {
            CorpusError::DuplicateCaption {
                path: caption_path.display().to_string(),
            }
        })
    }
}

/// Reads a sidecar with exactly five non-empty caption lines. A single
/// trailing newline is allowed.
pub fn read_caption_file(path: &Path) -> Result<[String; 5], CorpusError> {
    let content = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let lines: Vec<String> = content
        .lines()
        .map(|l| l.trim_end_matches('\r').to_string())
        .collect();
    let found = lines.len();
    if found != 5 || lines.iter().any(|l| l.trim().is_empty()) {
        return Err(CorpusError::CaptionCount {
            path: path.display().to_string(),
            found: lines.iter().filter(|l| !l.trim().is_empty()).count(),
        });
    }
    Ok(lines.try_into().expect("length checked"))
}

/// Writes `corpus` as a PPM + sidecar + manifest tree under `dir`.
pub fn write_image_corpus(dir: &Path, corpus: &[CaptionedImage]) -> Result<(), CorpusError> {
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| CorpusError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut manifest = String::new();
    for (i, item) in corpus.iter().enumerate() {
        let stem = format!(
            "{}{}_{i:05}",
            item.category,
            if item.augmented { "_aug" } else { "" }
        );
        let image = PathBuf::from(format!("{stem}.ppm"));
        let captions = PathBuf::from(format!("{stem}.txt"));
        let image_path = dir.join(&image);
        item.image
            .save_ppm(&image_path)
            .map_err(|source| CorpusError::Image {
                path: image_path.display().to_string(),
                source,
            })?;
        let caption_path = dir.join(&captions);
        fs::write(&caption_path, item.captions().join("\n") + "\n")
            .map_err(io_err(&caption_path))?;
        let entry = ManifestEntry {
            image,
            captions,
            category: item.category,
            augmented: item.augmented,
        };
        manifest.push_str(&serde_json::to_string(&entry).expect("manifest entry serializes"));
        manifest.push('\n');
    }
    let manifest_path = dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, manifest).map_err(io_err(&manifest_path))
}
