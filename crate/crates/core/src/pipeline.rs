//! Post screening: caption the image (if any), fuse the caption with the
//! post text, classify the fused text.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::captioner::{CaptionError, Captioner};
use crate::corpus::Label;
use crate::image::{ImageBuffer, ImageError};
use crate::metrics::{self, EvalReport, MetricsError};
use crate::nbayes::{label_for, NbModel, TextClassifier};
use crate::textprep::{clean_with, tokenize, CleanConfig, Stopwords};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("post {id}: has an image but no captioner is configured")]
    NoCaptioner { id: String },
    #[error("post {id}: {source}")]
    Caption {
        id: String,
        #[source]
        source: CaptionError,
    },
    #[error("post {id}: neither text nor image")]
    EmptyPost { id: String },
    #[error("{path}:{line}: {reason}")]
    Record {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("post {id}: image {path}: {source}")]
    Image {
        id: String,
        path: String,
        #[source]
        source: ImageError,
    },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Post {
    pub id: String,
    pub text: String,
    pub image: Option<ImageBuffer>,
    pub gold_label: Option<Label>,
}

impl Post {
    pub fn text(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            image: None,
            gold_label: None,
        }
    }

    pub fn with_image(mut self, image: ImageBuffer) -> Self {
        self.image = Some(image);
        self
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.gold_label = Some(label);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: String,
    pub label: Label,
    pub score: f64,
    /// Raw post text as received.
    pub text: String,
    /// Caption as returned by the captioner, before cleaning.
    pub generated_caption: Option<String>,
    pub fused_text: String,
    /// No known tokens survived fusion; the label comes from class priors.
    #[serde(default)]
    pub priors_only: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<Label>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaptionerKind {
    #[default]
    Knn,
    Process,
}

/// Run configuration, read from a TOML file. Unknown keys are rejected.
///
/// ```toml
/// version = 1
/// model = "model.json"
/// captioner = "knn"
/// index = "index.json"
/// threshold = 0.5
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    #[serde(default = "default_classifier")]
    pub classifier: String,
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub captioner: CaptionerKind,
    #[serde(default)]
    pub index: Option<PathBuf>,
    /// Program plus arguments for `captioner = "process"`.
    #[serde(default)]
    pub captioner_command: Vec<String>,
    #[serde(default = "default_text_clean")]
    pub text_clean: CleanConfig,
    #[serde(default = "default_caption_clean")]
    pub caption_clean: CleanConfig,
    /// Overrides the classifier's own threshold when set.
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stopwords: Option<PathBuf>,
}

fn default_classifier() -> String {
    "nb".to_string()
}

fn default_text_clean() -> CleanConfig {
    CleanConfig::POST
}

fn default_caption_clean() -> CleanConfig {
    CleanConfig::CAPTION
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            classifier: default_classifier(),
            model: None,
            captioner: CaptionerKind::default(),
            index: None,
            captioner_command: Vec::new(),
            text_clean: CleanConfig::POST,
            caption_clean: CleanConfig::CAPTION,
            threshold: None,
            seed: 0,
            stopwords: None,
        }
    }
}

impl PipelineConfig {
    pub fn parse(content: &str) -> Result<Self, PipelineError> {
        let cfg: Self =
            toml::from_str(content).map_err(|e| PipelineError::Config(e.to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(PipelineError::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        if cfg.classifier != "nb" {
            return Err(PipelineError::Config(format!(
                "unknown classifier {:?} (only \"nb\" ships)",
                cfg.classifier
            )));
        }
        if let Some(t) = cfg.threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(PipelineError::Config(format!(
                    "threshold {t} outside [0, 1]"
                )));
            }
        }
        if cfg.captioner == CaptionerKind::Process && cfg.captioner_command.is_empty() {
            return Err(PipelineError::Config(
                "captioner = \"process\" needs captioner_command".into(),
            ));
        }
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let content = fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::parse(&content)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.model, &mut cfg.index, &mut cfg.stopwords]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        for (p, name) in [
            (&cfg.model, "model"),
            (&cfg.index, "index"),
            (&cfg.stopwords, "stopwords"),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(PipelineError::Config(format!(
                        "{name} file {} does not exist",
                        p.display()
                    )));
                }
            }
        }
        Ok(cfg)
    }
}

/// Everything `classify_post` needs besides the post.
pub struct Screener<'a> {
    pub classifier: &'a dyn TextClassifier,
    pub captioner: Option<&'a dyn Captioner>,
    pub text_clean: CleanConfig,
    pub caption_clean: CleanConfig,
    pub stopwords: &'a Stopwords,
    pub threshold: f64,
}

impl<'a> Screener<'a> {
    pub fn new(classifier: &'a dyn TextClassifier, captioner: Option<&'a dyn Captioner>) -> Self {
        Self {
            classifier,
            captioner,
            text_clean: CleanConfig::POST,
            caption_clean: CleanConfig::CAPTION,
            stopwords: Stopwords::english(),
            threshold: classifier.threshold(),
        }
    }

    pub fn configure(mut self, config: &PipelineConfig) -> Self {
        self.text_clean = config.text_clean;
        self.caption_clean = config.caption_clean;
        if let Some(t) = config.threshold {
            self.threshold = t;
        }
        self
    }

    pub fn stopwords(mut self, stopwords: &'a Stopwords) -> Self {
        self.stopwords = stopwords;
        self
    }

    /// Cleaned text, then cleaned caption, joined by one space. Empty parts
    /// are skipped.
    pub fn fuse(&self, text: &str, caption: Option<&str>) -> String {
        let mut fused = clean_with(text, &self.text_clean, self.stopwords);
        if let Some(c) = caption {
            let c = clean_with(c, &self.caption_clean, self.stopwords);
            if !c.is_empty() {
                if !fused.is_empty() {
                    fused.push(' ');
                }
                fused.push_str(&c);
            }
        }
        fused
    }

    pub fn classify_post(&self, post: &Post) -> Result<Verdict, PipelineError> {
        if post.text.is_empty() && post.image.is_none() {
            return Err(PipelineError::EmptyPost {
                id: post.id.clone(),
            });
        }
        let generated_caption = match &post.image {
            None => None,
            Some(img) => {
                let captioner = self.captioner.ok_or_else(|| PipelineError::NoCaptioner {
                    id: post.id.clone(),
                })?;
                Some(
                    captioner
                        .caption(img)
                        .map_err(|source| PipelineError::Caption {
                            id: post.id.clone(),
                            source,
                        })?,
                )
            }
        };
        let fused_text = self.fuse(&post.text, generated_caption.as_deref());
        let tokens = tokenize(&fused_text);
        let priors_only = tokens.is_empty();
        let prediction = if priors_only {
            self.classifier.predict_prior()
        } else {
            self.classifier.predict(&tokens)
        };
        Ok(Verdict {
            id: post.id.clone(),
            label: label_for(prediction.score, self.threshold),
            score: prediction.score,
            text: post.text.clone(),
            generated_caption,
            fused_text,
            priors_only,
            gold_label: post.gold_label,
        })
    }

    /// Classifies in parallel; output order matches input order.
    pub fn batch_classify(&self, posts: &[Post]) -> Result<Vec<Verdict>, PipelineError> {
        posts.par_iter().map(|p| self.classify_post(p)).collect()
    }
}

/// Convenience wrapper around [`Screener`] for a trained NB model.
pub fn classify_post(
    post: &Post,
    captioner: Option<&dyn Captioner>,
    classifier: &NbModel,
    config: &PipelineConfig,
) -> Result<Verdict, PipelineError> {
    Screener::new(classifier, captioner)
        .configure(config)
        .classify_post(post)
}

/// One line of a posts JSONL file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostRecord {
    pub id: serde_json::Value,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub image: Option<PathBuf>,
    #[serde(default)]
    pub label: Option<Label>,
}

fn id_string(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Reads posts JSONL; image paths resolve against the file's directory.
pub fn load_posts(path: &Path) -> Result<Vec<Post>, PipelineError> {
    let content = fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut posts = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: PostRecord = serde_json::from_str(line).map_err(|e| PipelineError::Record {
            path: path.display().to_string(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        let id = id_string(&rec.id);
        let image = match &rec.image {
            None => None,
            Some(p) => {
                let full = if p.is_relative() {
                    base.join(p)
                } else {
                    p.clone()
                };
                Some(
                    ImageBuffer::load(&full).map_err(|source| PipelineError::Image {
                        id: id.clone(),
                        path: full.display().to_string(),
                        source,
                    })?,
                )
            }
        };
        if rec.text.is_empty() && image.is_none() {
            return Err(PipelineError::Record {
                path: path.display().to_string(),
                line: i + 1,
                reason: "post has neither text nor image".into(),
            });
        }
        posts.push(Post {
            id,
            text: rec.text,
            image,
            gold_label: rec.label,
        });
    }
    Ok(posts)
}

pub fn verdicts_to_jsonl(verdicts: &[Verdict]) -> String {
    let mut s = String::new();
    for v in verdicts {
        s.push_str(&serde_json::to_string(v).expect("verdict serializes"));
        s.push('\n');
    }
    s
}

pub fn parse_verdicts(content: &str, path: &str) -> Result<Vec<Verdict>, PipelineError> {
    content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| PipelineError::Record {
                path: path.to_string(),
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Evaluates the verdicts that carry a gold label. ROC is attached when
/// both classes are present.
pub fn evaluate_verdicts(verdicts: &[Verdict]) -> Result<EvalReport, PipelineError> {
    let labeled: Vec<&Verdict> = verdicts.iter().filter(|v| v.gold_label.is_some()).collect();
    let gold: Vec<Label> = labeled.iter().filter_map(|v| v.gold_label).collect();
    let predicted: Vec<Label> = labeled.iter().map(|v| v.label).collect();
    let scores: Vec<f64> = labeled.iter().map(|v| v.score).collect();
    let report = metrics::evaluate(&gold, &predicted)?;
    Ok(match metrics::roc(&gold, &scores) {
        Ok(roc) => report.with_roc(roc),
        Err(MetricsError::SingleClass) => report,
        Err(e) => return Err(e.into()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::captioner::CaptionError;
    use crate::nbayes::{NbConfig, Variant};
    use crate::textprep::prepare;

    struct FixedCaptioner(&'static str);

    impl Captioner for FixedCaptioner {
        fn id(&self) -> String {
            "fixed".into()
        }

        fn caption(&self, _image: &ImageBuffer) -> Result<String, CaptionError> {
            Ok(self.0.to_string())
        }
    }

    fn model() -> NbModel {
        let docs: Vec<(Vec<String>, Label)> = [
            ("I am going to shoot up the school", Label::Concerning),
            ("custom weapon with magazines", Label::Concerning),
            ("bring the gun tomorrow they will pay", Label::Concerning),
            ("I had a lovely time today", Label::Benign),
            ("a dog runs on the beach", Label::Benign),
            ("love my new media room design", Label::Benign),
        ]
        .iter()
        .map(|(t, l)| (prepare(t, &CleanConfig::POST), *l))
        .collect();
        NbModel::train(&docs, NbConfig::new(Variant::Complement)).unwrap()
    }

    #[test]
    fn text_only_posts() {
        let m = model();
        let s = Screener::new(&m, None);
        let v = s
            .classify_post(&Post::text("a", "I had a lovely time today"))
            .unwrap();
        assert_eq!(v.label, Label::Benign);
        assert_eq!(v.generated_caption, None);
        let v = s
            .classify_post(&Post::text("b", "I am going to shoot up the school"))
            .unwrap();
        assert_eq!(v.label, Label::Concerning);
        assert!(v.score > 0.5);
    }

    #[test]
    fn caption_is_fused_after_text() {
        let m = model();
        let cap = FixedCaptioner("Custom weapon with magazines.");
        let s = Screener::new(&m, Some(&cap));
        let post =
            Post::text("p", "Good morning everyone!").with_image(ImageBuffer::filled(2, 2, [0; 3]));
        let v = s.classify_post(&post).unwrap();
        assert_eq!(
            v.generated_caption.as_deref(),
            Some("Custom weapon with magazines.")
        );
        assert_eq!(
            v.fused_text,
            "good morning everyone custom weapon with magazines"
        );
        assert!(v.fused_text.ends_with(&clean_with(
            v.generated_caption.as_deref().unwrap(),
            &CleanConfig::CAPTION,
            Stopwords::english()
        )));
        assert_eq!(v.label, Label::Concerning);
    }

    #[test]
    fn missing_captioner_is_an_error() {
        let m = model();
        let s = Screener::new(&m, None);
        let post = Post::text("p", "hi").with_image(ImageBuffer::filled(1, 1, [0; 3]));
        assert!(matches!(
            s.classify_post(&post),
            Err(PipelineError::NoCaptioner { .. })
        ));
    }

    #[test]
    fn empty_fusion_is_flagged() {
        let m = model();
        let s = Screener::new(&m, None);
        let v = s.classify_post(&Post::text("p", "the and of !!!")).unwrap();
        assert!(v.priors_only);
        assert_eq!(v.fused_text, "");
        assert!(matches!(
            s.classify_post(&Post::text("e", "")),
            Err(PipelineError::EmptyPost { .. })
        ));
    }

    #[test]
    fn dropping_the_image_equals_text_only() {
        let m = model();
        let cap = FixedCaptioner("a gun");
        let s = Screener::new(&m, Some(&cap));
        let with = Post::text("p", "see you soon").with_image(ImageBuffer::filled(1, 1, [0; 3]));
        let mut without = with.clone();
        without.image = None;
        let text_only = Screener::new(&m, None).classify_post(&without).unwrap();
        assert_eq!(s.classify_post(&without).unwrap(), text_only);
        assert_ne!(
            s.classify_post(&with).unwrap().fused_text,
            text_only.fused_text
        );
    }

    #[test]
    fn threshold_override() {
        let m = model();
        let cfg = PipelineConfig {
            threshold: Some(1.0),
            ..PipelineConfig::default()
        };
        let v = classify_post(
            &Post::text("b", "I am going to shoot up the school"),
            None,
            &m,
            &cfg,
        )
        .unwrap();
        assert_eq!(v.label, Label::Benign);
    }

    #[test]
    fn batch_keeps_order_and_tags_errors() {
        let m = model();
        let s = Screener::new(&m, None);
        assert!(s.batch_classify(&[]).unwrap().is_empty());
        let posts: Vec<Post> = (0..50)
            .map(|i| Post::text(format!("p{i}"), "lovely day"))
            .collect();
        let out = s.batch_classify(&posts).unwrap();
        assert!(out.iter().zip(&posts).all(|(v, p)| v.id == p.id));
        let mut bad = posts.clone();
        bad[7].image = Some(ImageBuffer::filled(1, 1, [0; 3]));
        let err = s.batch_classify(&bad).unwrap_err();
        assert!(err.to_string().contains("p7"), "{err}");
    }

    #[test]
    fn config_is_fail_closed() {
        assert!(PipelineConfig::parse("version = 1\n").is_ok());
        assert!(PipelineConfig::parse("version = 2\n").is_err());
        assert!(PipelineConfig::parse("version = 1\nfoo = 3\n").is_err());
        assert!(PipelineConfig::parse("").is_err());
        assert!(PipelineConfig::parse("version = 1\nthreshold = 1.5\n").is_err());
        assert!(PipelineConfig::parse("version = 1\nclassifier = \"bert\"\n").is_err());
        assert!(PipelineConfig::parse("version = 1\ncaptioner = \"process\"\n").is_err());
        let cfg = PipelineConfig::parse(
            "version = 1\nthreshold = 0.7\n[text_clean]\nlowercase = true\nstrip_digits = false\nstrip_special = true\ncollapse_spaces = true\nstrip_mentions = true\nstrip_hashmarks = true\nstrip_links = true\nstrip_stopwords = false\n",
        )
        .unwrap();
        assert_eq!(cfg.threshold, Some(0.7));
        assert!(!cfg.text_clean.strip_stopwords);
    }

    #[test]
    fn config_paths_must_exist() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        fs::write(&p, "version = 1\nmodel = \"nope.json\"\n").unwrap();
        assert!(matches!(
            PipelineConfig::load(&p),
            Err(PipelineError::Config(_))
        ));
        fs::write(dir.path().join("nope.json"), "{}").unwrap();
        let cfg = PipelineConfig::load(&p).unwrap();
        assert_eq!(cfg.model.unwrap(), dir.path().join("nope.json"));
    }

    #[test]
    fn posts_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        ImageBuffer::filled(2, 2, [5, 5, 5])
            .save_ppm(&dir.path().join("i.ppm"))
            .unwrap();
        let p = dir.path().join("posts.jsonl");
        fs::write(
            &p,
            "{\"id\":1,\"text\":\"hello\",\"label\":0}\n{\"id\":\"x\",\"text\":\"\",\"image\":\"i.ppm\"}\n",
        )
        .unwrap();
        let posts = load_posts(&p).unwrap();
        assert_eq!(posts[0].id, "1");
        assert_eq!(posts[0].gold_label, Some(Label::Benign));
        assert_eq!(posts[1].image.as_ref().unwrap().width(), 2);

        fs::write(&p, "{\"id\":1}\n").unwrap();
        assert!(load_posts(&p).is_err());
        fs::write(&p, "{\"id\":1,\"text\":\"a\",\"image\":\"missing.ppm\"}\n").unwrap();
        assert!(matches!(load_posts(&p), Err(PipelineError::Image { .. })));
    }

    #[test]
    fn verdict_jsonl_round_trip() {
        let m = model();
        let s = Screener::new(&m, None);
        let v = vec![s
            .classify_post(&Post::text("a", "lovely").with_label(Label::Benign))
            .unwrap()];
        let text = verdicts_to_jsonl(&v);
        assert_eq!(parse_verdicts(&text, "v").unwrap(), v);
    }
}
