//! Image augmentation operators and back-translation of captions.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CaptionedImage, Category};
use crate::image::ImageBuffer;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("crop {w}x{h}+{x}+{y} does not fit inside {width}x{height} image")]
    CropOutOfBounds {
        x: u32,
        y: u32,
        w: u32,
        h: u32,
        width: u32,
        height: u32,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("translator {translator} cannot translate {from} -> {to}")]
    UnsupportedPair {
        translator: String,
        from: String,
        to: String,
    },
    #[error("dictionary {path}:{line}: {reason}")]
    Dictionary {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("recipe: {0}")]
    Recipe(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One pixel-level transform. Serialized with a `kind` tag, e.g.
/// `{ kind = "brightness", delta = 40 }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AugmentOp {
    FlipH,
    FlipV,
    /// Clockwise quarter turns, 1..=3.
    Rotate90 {
        quarter_turns: u8,
    },
    Crop {
        x: u32,
        y: u32,
        width: u32,
        height: u32,
    },
    Brightness {
        delta: i16,
    },
    Contrast {
        factor: f64,
    },
    ChannelShift {
        deltas: [i16; 3],
    },
}

impl AugmentOp {
    pub fn validate(&self) -> Result<(), AugmentError> {
        match *self {
            AugmentOp::Rotate90 { quarter_turns } if !(1..=3).contains(&quarter_turns) => {
                Err(AugmentError::InvalidParameter(format!(
                    "quarter_turns {quarter_turns} not in 1..=3"
                )))
            }
            AugmentOp::Brightness { delta } if !(-255..=255).contains(&delta) => {
                Err(AugmentError::InvalidParameter(format!(
                    "brightness delta {delta} not in -255..=255"
                )))
            }
            AugmentOp::ChannelShift { deltas }
                if deltas.iter().any(|d| !(-255..=255).contains(d)) =>
            {
                Err(AugmentError::InvalidParameter(format!(
                    "channel deltas {deltas:?} not in -255..=255"
                )))
            }
            AugmentOp::Contrast { factor } if !(factor.is_finite() && factor >= 0.0) => {
                Err(AugmentError::InvalidParameter(format!(
                    "contrast factor {factor} must be finite and >= 0"
                )))
            }
            AugmentOp::Crop { width, height, .. } if width == 0 || height == 0 => Err(
                AugmentError::InvalidParameter("crop rect must have positive area".into()),
            ),
            _ => Ok(()),
        }
    }
}

pub fn apply(op: &AugmentOp, img: &ImageBuffer) -> Result<ImageBuffer, AugmentError> {
    op.validate()?;
    let (w, h) = (img.width(), img.height());
    let out = match *op {
        AugmentOp::FlipH => ImageBuffer::from_fn(w, h, |x, y| img.get(w - 1 - x, y)),
        AugmentOp::FlipV => ImageBuffer::from_fn(w, h, |x, y| img.get(x, h - 1 - y)),
        AugmentOp::Rotate90 { quarter_turns } => rotate(img, quarter_turns),
        AugmentOp::Crop {
            x,
            y,
            width,
            height,
        } => {
            let fits = x.checked_add(width).is_some_and(|r| r <= w)
                && y.checked_add(height).is_some_and(|b| b <= h);
            if !fits {
                return Err(AugmentError::CropOutOfBounds {
                    x,
                    y,
                    w: width,
                    h: height,
                    width: w,
                    height: h,
                });
            }
            ImageBuffer::from_fn(width, height, |cx, cy| img.get(x + cx, y + cy))
        }
        AugmentOp::Brightness { delta } => map_channels(img, |_, p| shift(p, delta)),
        AugmentOp::Contrast { factor } => map_channels(img, |_, p| {
            ((f64::from(p) - 128.0) * factor + 128.0)
                .round()
                .clamp(0.0, 255.0) as u8
        }),
        AugmentOp::ChannelShift { deltas } => map_channels(img, |c, p| shift(p, deltas[c])),
    };
    Ok(out)
}

/// Applies `ops` left to right.
pub fn apply_all(ops: &[AugmentOp], img: &ImageBuffer) -> Result<ImageBuffer, AugmentError> {
    let mut cur = img.clone();
    for op in ops {
        cur = apply(op, &cur)?;
    }
    Ok(cur)
}

fn shift(p: u8, delta: i16) -> u8 {
    (i16::from(p) + delta).clamp(0, 255) as u8
}

fn map_channels(img: &ImageBuffer, f: impl Fn(usize, u8) -> u8) -> ImageBuffer {
    let pixels = img
        .pixels()
        .iter()
        .enumerate()
        .map(|(i, &p)| f(i % 3, p))
        .collect();
    ImageBuffer::new(img.width(), img.height(), pixels).expect("same dimensions")
}

fn rotate(img: &ImageBuffer, quarter_turns: u8) -> ImageBuffer {
    let (w, h) = (img.width(), img.height());
    match quarter_turns % 4 {
        // destination (x, y) reads from the source pixel that lands there
        1 => ImageBuffer::from_fn(h, w, |x, y| img.get(y, h - 1 - x)),
        2 => ImageBuffer::from_fn(w, h, |x, y| img.get(w - 1 - x, h - 1 - y)),
        3 => ImageBuffer::from_fn(h, w, |x, y| img.get(w - 1 - y, x)),
        _ => img.clone(),
    }
}

/// Text translation between language tags such as `en` and `fr`.
///
/// Implementations must be deterministic and callable from several threads.
pub trait Translator: Send + Sync {
    fn name(&self) -> &str;

    fn supports(&self, from: &str, to: &str) -> bool;

    fn translate(&self, text: &str, from: &str, to: &str) -> Result<String, AugmentError>;
}

/// Returns its input for every language pair.
#[derive(Debug, Default, Clone, Copy)]
pub struct IdentityTranslator;

impl Translator for IdentityTranslator {
    fn name(&self) -> &str {
        "identity"
    }

    fn supports(&self, _from: &str, _to: &str) -> bool {
        true
    }

    fn translate(&self, text: &str, _from: &str, _to: &str) -> Result<String, AugmentError> {
        Ok(text.to_string())
    }
}

const PSEUDO_FR_FORWARD: &str = include_str!("../data/pseudo_fr.tsv");
const PSEUDO_FR_REVERSE: &str = include_str!("../data/pseudo_fr_reverse.tsv");

/// Word-for-word translator backed by two lookup tables. Unknown words pass
/// through unchanged, so round trips only alter words listed in the tables.
#[derive(Debug, Clone)]
pub struct DictionaryTranslator {
    source: String,
    pivot: String,
    forward: HashMap<String, String>,
    reverse: HashMap<String, String>,
}

impl DictionaryTranslator {
    pub fn new(
        source: &str,
        pivot: &str,
        forward: HashMap<String, String>,
        reverse: HashMap<String, String>,
    ) -> Self {
        Self {
            source: source.to_string(),
            pivot: pivot.to_string(),
            forward,
            reverse,
        }
    }

    /// The bundled English/pseudo-French tables.
    pub fn pseudo_french() -> Self {
        Self::new(
            "en",
            "fr",
            parse_tsv(PSEUDO_FR_FORWARD, "pseudo_fr.tsv").expect("bundled table parses"),
            parse_tsv(PSEUDO_FR_REVERSE, "pseudo_fr_reverse.tsv").expect("bundled table parses"),
        )
    }

    pub fn load(
        source: &str,
        pivot: &str,
        forward: &Path,
        reverse: &Path,
    ) -> Result<Self, AugmentError> {
        let read = |p: &Path| {
            fs::read_to_string(p).map_err(|source| AugmentError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        Ok(Self::new(
            source,
            pivot,
            parse_tsv(&read(forward)?, &forward.display().to_string())?,
            parse_tsv(&read(reverse)?, &reverse.display().to_string())?,
        ))
    }

    fn table(&self, from: &str, to: &str) -> Option<&HashMap<String, String>> {
        if from == self.source && to == self.pivot {
            Some(&self.forward)
        } else if from == self.pivot && to == self.source {
            Some(&self.reverse)
        } else {
            None
        }
    }
}

/// `word <tab> translation` lines; `#` starts a comment line.
pub fn parse_tsv(content: &str, path: &str) -> Result<HashMap<String, String>, AugmentError> {
    let mut map = HashMap::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: &str| AugmentError::Dictionary {
            path: path.to_string(),
            line: i + 1,
            reason: reason.to_string(),
        };
        let (k, v) = line.split_once('\t').ok_or_else(|| err("missing tab"))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(err("empty entry"));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(err("duplicate entry"));
        }
    }
    Ok(map)
}

impl Translator for DictionaryTranslator {
    fn name(&self) -> &str {
        "dictionary"
    }

    fn supports(&self, from: &str, to: &str) -> bool {
        self.table(from, to).is_some()
    }

    fn translate(&self, text: &str, from: &str, to: &str) -> Result<String, AugmentError> {
        let table = self
            .table(from, to)
            .ok_or_else(|| AugmentError::UnsupportedPair {
                translator: self.name().to_string(),
                from: from.to_string(),
                to: to.to_string(),
            })?;
        let words: Vec<&str> = text
            .split_whitespace()
            .map(|w| {
                table
                    .get(w)
                    .or_else(|| table.get(&w.to_lowercase()))
                    .map_or(w, String::as_str)
            })
            .collect();
        Ok(words.join(" "))
    }
}

pub const SOURCE_LANG: &str = "en";

/// English -> `pivot` -> English, trimmed.
pub fn back_translate(
    text: &str,
    translator: &dyn Translator,
    pivot: &str,
) -> Result<String, AugmentError> {
    for (from, to) in [(SOURCE_LANG, pivot), (pivot, SOURCE_LANG)] {
        if !translator.supports(from, to) {
            return Err(AugmentError::UnsupportedPair {
                translator: translator.name().to_string(),
                from: from.to_string(),
                to: to.to_string(),
            });
        }
    }
    let there = translator.translate(text, SOURCE_LANG, pivot)?;
    let back = translator.translate(&there, pivot, SOURCE_LANG)?;
    Ok(back.trim().to_string())
}

/// Produces the augmented twin of `item`: transformed image, back-translated
/// captions, same category.
pub fn augment_captioned(
    item: &CaptionedImage,
    ops: &[AugmentOp],
    translator: &dyn Translator,
    pivot: &str,
) -> Result<CaptionedImage, AugmentError> {
    let image = apply_all(ops, &item.image)?;
    let mut captions: [String; 5] = Default::default();
    for (dst, src) in captions.iter_mut().zip(item.captions()) {
        *dst = back_translate(src, translator, pivot)?;
    }
    Ok(CaptionedImage::new_unchecked_distinct(
        image,
        captions,
        item.category,
        true,
    ))
}

/// Which ops to draw for each category, plus the seed that drives the draw.
///
/// ```toml
/// seed = 7
/// pivot = "fr"
///
/// [[category]]
/// category = "school_shooting"
/// ops_per_image = 2
/// ops = [{ kind = "flip_h" }, { kind = "brightness", delta = 30 }]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentRecipe {
    pub seed: u64,
    #[serde(default = "default_pivot")]
    pub pivot: String,
    #[serde(rename = "category", default)]
    pub categories: Vec<CategoryRecipe>,
}

fn default_pivot() -> String {
    "fr".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryRecipe {
    pub category: Category,
    pub ops_per_image: usize,
    pub ops: Vec<AugmentOp>,
}

impl AugmentRecipe {
    pub fn parse(content: &str) -> Result<Self, AugmentError> {
        let recipe: Self =
            toml::from_str(content).map_err(|e| AugmentError::Recipe(e.to_string()))?;
        for c in &recipe.categories {
            if c.ops_per_image > c.ops.len() {
                return Err(AugmentError::Recipe(format!(
                    "{}: ops_per_image {} exceeds {} listed ops",
                    c.category,
                    c.ops_per_image,
                    c.ops.len()
                )));
            }
            for op in &c.ops {
                op.validate()?;
            }
        }
        Ok(recipe)
    }

    pub fn load(path: &Path) -> Result<Self, AugmentError> {
        let content = fs::read_to_string(path).map_err(|source| AugmentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&content)
    }

    /// Augments every unedited item whose category has a recipe. Op choice
    /// per image is a seeded draw without replacement, kept in listed order.
    /// Crops that do not fit an image are skipped for that image.
    pub fn run(
        &self,
        corpus: &[CaptionedImage],
        translator: &dyn Translator,
    ) -> Result<Vec<CaptionedImage>, AugmentError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::new();
        for item in corpus.iter().filter(|i| !i.augmented) {
            let Some(recipe) = self.categories.iter().find(|c| c.category == item.category) else {
                continue;
            };
            let mut picked: Vec<usize> =
                rand::seq::index::sample(&mut rng, recipe.ops.len(), recipe.ops_per_image)
                    .into_vec();
            picked.sort_unstable();
            let ops: Vec<AugmentOp> = picked.into_iter().map(|i| recipe.ops[i].clone()).collect();
            let ops = fit_ops(&ops, &item.image);
            out.push(augment_captioned(item, &ops, translator, &self.pivot)?);
        }
        Ok(out)
    }
}

/// Drops crops that would fall outside the image at their point in the chain.
fn fit_ops(ops: &[AugmentOp], img: &ImageBuffer) -> Vec<AugmentOp> {
    let (mut w, mut h) = (img.width(), img.height());
    let mut kept = Vec::with_capacity(ops.len());
    for op in ops {
        match *op {
            AugmentOp::Crop {
                x,
                y,
                width,
                height,
            } => {
                if x + width > w || y + height > h {
                    continue;
                }
                (w, h) = (width, height);
            }
            AugmentOp::Rotate90 { quarter_turns } if quarter_turns % 2 == 1 => (w, h) = (h, w),
            _ => {}
        }
        kept.push(op.clone());
    }
    kept
}
