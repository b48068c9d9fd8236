//! Text cleaning, tokenization and vocabulary construction shared by post
//! text and image captions.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("cannot build a vocabulary from zero documents")]
    NoDocuments,
    #[error("vocabulary is empty after applying min_df={0}")]
    EmptyVocabulary(usize),
    #[error("stopword file {path}: {source}")]
    Stopwords {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Which cleaning rules run. Rules always run in this order when enabled:
/// links, @mentions, `#` marks, lowercase, digits, special characters,
/// stopwords, whitespace collapse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CleanConfig {
    pub lowercase: bool,
    pub strip_digits: bool,
    pub strip_special: bool,
    pub collapse_spaces: bool,
    pub strip_mentions: bool,
    pub strip_hashmarks: bool,
    pub strip_links: bool,
    pub strip_stopwords: bool,
}

impl CleanConfig {
    /// Caption cleaning: lowercase, digits, special characters, spaces.
    pub const CAPTION: CleanConfig = CleanConfig {
        lowercase: true,
        strip_digits: true,
        strip_special: true,
        collapse_spaces: true,
        strip_mentions: false,
        strip_hashmarks: false,
        strip_links: false,
        strip_stopwords: false,
    };

    /// Post cleaning: every rule on.
    pub const POST: CleanConfig = CleanConfig {
        lowercase: true,
        strip_digits: true,
        strip_special: true,
        collapse_spaces: true,
        strip_mentions: true,
        strip_hashmarks: true,
        strip_links: true,
        strip_stopwords: true,
    };

    pub const NONE: CleanConfig = CleanConfig {
        lowercase: false,
        strip_digits: false,
        strip_special: false,
        collapse_spaces: false,
        strip_mentions: false,
        strip_hashmarks: false,
        strip_links: false,
        strip_stopwords: false,
    };
}

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

/// Exact-match stopword set, one token per line on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords {
    words: HashSet<String>,
}

impl Stopwords {
    pub fn parse(content: &str) -> Self {
        Self {
            words: content
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_string)
                .collect(),
        }
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            words: words.into_iter().map(Into::into).collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        fs::read_to_string(path)
            .map(|c| Self::parse(&c))
            .map_err(|source| TextError::Stopwords {
                path: path.display().to_string(),
                source,
            })
    }

    /// The bundled English list (`data/stopwords_en.txt`).
    pub fn english() -> &'static Stopwords {
        static LIST: OnceLock<Stopwords> = OnceLock::new();
        LIST.get_or_init(|| Stopwords::parse(DEFAULT_STOPWORDS))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Cleans with the bundled English stopword list.
pub fn clean(text: &str, config: &CleanConfig) -> String {
    clean_with(text, config, Stopwords::english())
}

pub fn clean_with(text: &str, config: &CleanConfig, stopwords: &Stopwords) -> String {
    // Token-level removals. A token is tested as it will look once the
    // character-level rules run, so `#@joe` or `1http://x` cannot surface a
    // mention or link on a second pass.
    let mut s = if config.strip_links || config.strip_mentions {
        map_tokens(text, |tok| {
            let probe = probe_form(tok, config);
            let drop = (config.strip_links && is_link(&probe))
                || (config.strip_mentions && probe.starts_with('@'));
            (!drop).then(|| tok.to_string())
        })
    } else {
        text.to_string()
    };
    if config.strip_hashmarks {
        s.retain(|c| c != '#');
    }
    if config.lowercase {
        s = s.to_lowercase();
    }
    if config.strip_digits {
        s.retain(|c| !c.is_ascii_digit());
    }
    if config.strip_special {
        s.retain(|c| c.is_ascii_alphanumeric() || c.is_whitespace());
    }
    if config.strip_stopwords {
        s = map_tokens(&s, |tok| {
            (!stopwords.contains(tok)).then(|| tok.to_string())
        });
    }
    if config.collapse_spaces {
        s = s.split_whitespace().collect::<Vec<_>>().join(" ");
    }
    s
}

fn probe_form(tok: &str, config: &CleanConfig) -> String {
    tok.chars()
        .filter(|&c| !(config.strip_hashmarks && c == '#'))
        .filter(|c| !(config.strip_digits && c.is_ascii_digit()))
        .collect()
}

fn is_link(tok: &str) -> bool {
    ["http://", "https://", "www."].iter().any(|p| {
        tok.get(..p.len())
            .is_some_and(|head| head.eq_ignore_ascii_case(p))
    })
}

/// Rewrites each whitespace-delimited token, keeping the whitespace between
/// tokens untouched. `None` deletes the token.
fn map_tokens(text: &str, mut f: impl FnMut(&str) -> Option<String>) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while !rest.is_empty() {
        let ws_end = rest
            .char_indices()
            .find(|(_, c)| !c.is_whitespace())
            .map_or(rest.len(), |(i, _)| i);
        out.push_str(&rest[..ws_end]);
        rest = &rest[ws_end..];
        let tok_end = rest
            .char_indices()
            .find(|(_, c)| c.is_whitespace())
            .map_or(rest.len(), |(i, _)| i);
        if tok_end > 0 {
            if let Some(t) = f(&rest[..tok_end]) {
                out.push_str(&t);
            }
        }
        rest = &rest[tok_end..];
    }
    out
}

/// Splits cleaned text into tokens, dropping empties.
pub fn tokenize(cleaned: &str) -> Vec<String> {
    cleaned.split_whitespace().map(str::to_string).collect()
}

/// `tokenize(clean(text, config))` with the bundled stopwords.
pub fn prepare(text: &str, config: &CleanConfig) -> Vec<String> {
    tokenize(&clean(text, config))
}

/// Token index with per-token document frequency. Indices follow
/// lexicographic token order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    doc_freq: Vec<u64>,
    total_tokens: u64,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    pub fn build<D, T>(docs: &[D], min_df: usize) -> Result<Self, TextError>
    where
        D: AsRef<[T]>,
        T: AsRef<str>,
    {
        if docs.is_empty() {
            return Err(TextError::NoDocuments);
        }
        let mut df: BTreeMap<&str, u64> = BTreeMap::new();
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for doc in docs {
            let unique: BTreeSet<&str> = doc.as_ref().iter().map(AsRef::as_ref).collect();
            for t in unique {
                *df.entry(t).or_default() += 1;
            }
            for t in doc.as_ref() {
                *counts.entry(t.as_ref()).or_default() += 1;
            }
        }
        let kept: Vec<(&str, u64)> = df
            .into_iter()
            .filter(|&(t, d)| d >= min_df as u64 && !t.is_empty())
            .collect();
        if kept.is_empty() {
            return Err(TextError::EmptyVocabulary(min_df));
        }
        let total_tokens = kept.iter().map(|(t, _)| counts[t]).sum();
        Ok(Self::from_parts(
            kept.iter().map(|(t, _)| t.to_string()).collect(),
            kept.iter().map(|&(_, d)| d).collect(),
            total_tokens,
        ))
    }

    fn from_parts(tokens: Vec<String>, doc_freq: Vec<u64>, total_tokens: u64) -> Self {
        let mut v = Self {
            tokens,
            doc_freq,
            total_tokens,
            index: BTreeMap::new(),
        };
        v.reindex();
        v
    }

    /// Rebuilds the lookup table; needed after deserialization.
    pub(crate) fn reindex(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    /// Checks that tokens are strictly increasing and the tables line up.
    pub(crate) fn validate(&self) -> Result<(), String> {
        if self.tokens.len() != self.doc_freq.len() {
            return Err("vocabulary token and document-frequency tables differ in length".into());
        }
        if self.tokens.windows(2).any(|w| w[0] >= w[1]) {
            return Err("vocabulary tokens are not strictly sorted".into());
        }
        if self.tokens.is_empty() {
            return Err("vocabulary is empty".into());
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn doc_freq(&self, index: usize) -> u64 {
        self.doc_freq[index]
    }

    /// Occurrences of kept tokens across all documents.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }
}
