//! Screening of social-media posts for concerning content.
//!
//! A post's text is cleaned and, when it carries an image, fused with a
//! generated caption before a Naive Bayes classifier scores it.

pub mod augment;
pub mod bleu;
pub mod captioner;
pub mod cli;
pub mod corpus;
pub mod image;
pub mod metrics;
pub mod nbayes;
pub mod pipeline;
pub mod textprep;

pub use corpus::{CaptionedImage, Category, Label, LabeledText};
pub use image::ImageBuffer;
pub use nbayes::{NbConfig, NbModel, Prediction, TextClassifier, Variant};
pub use pipeline::{PipelineConfig, Post, Screener, Verdict};
