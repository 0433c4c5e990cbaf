use std::collections::HashMap;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use super::EncoderError;

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const OOV: usize = 3;

const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Token ids padded to a fixed length, with a 1/0 mask over real tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<usize>,
    pub attention_mask: Vec<u8>,
}

impl TokenSequence {
    /// Number of real (unpadded) tokens, BOS and EOS included.
    pub fn real_len(&self) -> usize {
        self.attention_mask.iter().filter(|&&m| m == 1).count()
    }
}

/// Splits text into lowercase alphanumeric words. Whitespace and
/// punctuation only separate words; they never become tokens.
pub fn split_words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Word-level vocabulary. Ids 0..4 are PAD, BOS, EOS and OOV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::from_tokens(RESERVED.iter().map(|s| s.to_string()).collect()).expect("reserved tokens")
    }
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, EncoderError> {
        if tokens.len() < RESERVED.len() || tokens[..4] != RESERVED {
            return Err(EncoderError::Vocabulary(format!(
                "first four entries must be {RESERVED:?}"
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.contains(char::is_whitespace) {
                return Err(EncoderError::Vocabulary(format!(
                    "invalid token {t:?} at line {}",
                    i + 1
                )));
            }
            if index.insert(t.clone(), i).is_some() {
                return Err(EncoderError::Vocabulary(format!("duplicate token {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    /// Most frequent words of `texts`, ties broken alphabetically, capped so
    /// the vocabulary (reserved ids included) holds at most `cap` entries.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, cap: usize) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for text in texts {
            for w in split_words(text) {
                *counts.entry(w).or_default() += 1;
            }
        }
        let mut words: Vec<(String, usize)> = counts.into_iter().collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(
            words
                .into_iter()
                .take(cap.saturating_sub(RESERVED.len()))
                .map(|(w, _)| w),
        );
        Self::from_tokens(tokens).expect("built vocabulary is well formed")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(OOV)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// BOS, word ids, EOS; truncated then padded to `max_tokens`.
    pub fn tokenize(&self, text: &str, max_tokens: usize) -> TokenSequence {
        assert!(max_tokens >= 2, "max_tokens must leave room for BOS and EOS");
        let mut ids = Vec::with_capacity(max_tokens);
        ids.push(BOS);
        ids.extend(split_words(text).iter().take(max_tokens - 2).map(|w| self.id(w)));
        ids.push(EOS);
        let real = ids.len();
        ids.resize(max_tokens, PAD);
        let mut attention_mask = vec![1u8; real];
        attention_mask.resize(max_tokens, 0);
        TokenSequence { ids, attention_mask }
    }

    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        for t in &self.tokens {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self, EncoderError> {
        let tokens = r
            .lines()
            .collect::<io::Result<Vec<_>>>()
            .map_err(|e| EncoderError::Vocabulary(e.to_string()))?;
        Self::from_tokens(tokens)
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        fs::write(path, buf)
    }

    pub fn load(path: &Path) -> Result<Self, EncoderError> {
        let f = fs::File::open(path).map_err(|e| EncoderError::Vocabulary(format!("{}: {e}", path.display())))?;
        Self::read_from(io::BufReader::new(f))
    }
}
