//! Annotated post corpora: JSONL loading with strict validation, seeded
//! splits and image preprocessing.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoders::{EncoderConfig, ImageInput};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("line {line}: {detail}")]
    Validation { line: usize, detail: String },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("cannot decode image {path}: {detail}")]
    Decode { path: String, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Human,
    Ai,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostType {
    News,
    Social,
    Phishing,
}

/// One post with annotations averaged over its annotators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedPost {
    pub id: String,
    pub text: String,
    pub image_path: Option<String>,
    pub origin_text: Origin,
    pub origin_visual: Origin,
    #[serde(rename = "type")]
    pub post_type: PostType,
    pub ai_likelihood: f64,
    pub belief: f64,
    pub dissemination: f64,
}

impl AnnotatedPost {
    pub fn targets(&self) -> [f64; 3] {
        [self.ai_likelihood, self.belief, self.dissemination]
    }
}

/// Posts in file order plus the directory image paths are relative to.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub root: PathBuf,
    pub posts: Vec<AnnotatedPost>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn image_path(&self, post: &AnnotatedPost) -> Option<PathBuf> {
        post.image_path.as_ref().map(|p| self.root.join(p))
    }

    /// Posts that carry both text and an image.
    pub fn multimodal_only(&self) -> Corpus {
        Corpus {
            root: self.root.clone(),
            posts: self
                .posts
                .iter()
                .filter(|p| p.image_path.is_some() && !p.text.trim().is_empty())
                .cloned()
                .collect(),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus {
            root: self.root.clone(),
            posts: indices.iter().map(|&i| self.posts[i].clone()).collect(),
        }
    }
}

/// Loads a JSONL corpus. Relative image paths resolve against the file's
/// directory and must exist.
pub fn load_corpus(path: &Path) -> Result<Corpus, DatasetError> {
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_corpus(BufReader::new(file), &root, true)
}

/// Parses JSONL records. Blank lines are skipped; line numbers are 1-based.
pub fn parse_corpus(r: impl BufRead, root: &Path, check_images: bool) -> Result<Corpus, DatasetError> {
    let mut posts = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| DatasetError::Parse {
            line: line_no,
            detail: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let post: AnnotatedPost = serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
            line: line_no,
            detail: e.to_string(),
        })?;
        let invalid = |detail: String| DatasetError::Validation { line: line_no, detail };
        if post.id.is_empty() {
            return Err(invalid("empty id".into()));
        }
        for (name, v) in [
            ("ai_likelihood", post.ai_likelihood),
            ("belief", post.belief),
            ("dissemination", post.dissemination),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        if !seen.insert(post.id.clone()) {
            return Err(invalid(format!("duplicate id {:?}", post.id)));
        }
        if check_images {
            if let Some(p) = &post.image_path {
                if !root.join(p).is_file() {
                    return Err(invalid(format!("image {p:?} not found under {}", root.display())));
                }
            }
        }
        posts.push(post);
    }
    Ok(Corpus {
        root: root.to_path_buf(),
        posts,
    })
}

pub fn write_corpus(posts: &[AnnotatedPost], mut w: impl Write) -> io::Result<()> {
    for p in posts {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_corpus(posts: &[AnnotatedPost], path: &Path) -> Result<(), DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = io::BufWriter::new(file);
    write_corpus(posts, &mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub train_fraction: f64,
    pub folds: Option<usize>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            train_fraction: 0.8,
            folds: None,
        }
    }
}

/// Indices into the corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Partition {
    TrainTest { train: Vec<usize>, test: Vec<usize> },
    Folds(Vec<Vec<usize>>),
}

/// Seeded split. The shuffle starts from the posts sorted by id, so the
/// result does not depend on file order.
pub fn split(corpus: &Corpus, spec: &SplitSpec) -> Result<Partition, DatasetError> {
    let n = corpus.len();
    if n == 0 {
        return Err(DatasetError::Parameter("cannot split an empty corpus".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| corpus.posts[a].id.cmp(&corpus.posts[b].id));
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));

    match spec.folds {
        Some(k) => {
            if k < 2 || k > n {
                return Err(DatasetError::Parameter(format!(
                    "{k} folds over {n} posts (need 2 ≤ folds ≤ posts)"
                )));
            }
            let mut folds = Vec::with_capacity(k);
            let mut rest = &order[..];
            for i in 0..k {
                let size = n / k + usize::from(i < n % k);
                let (head, tail) = rest.split_at(size);
                folds.push(head.to_vec());
                rest = tail;
            }
            Ok(Partition::Folds(folds))
        }
        None => {
            let f = spec.train_fraction;
            if !(f > 0.0 && f < 1.0) {
                return Err(DatasetError::Parameter(format!("train_fraction {f} outside (0, 1)")));
            }
            let cut = ((n as f64 * f).round() as usize).min(n);
            let (train, test) = order.split_at(cut);
            Ok(Partition::TrainTest {
                train: train.to_vec(),
                test: test.to_vec(),
            })
        }
    }
}

/// Reads and decodes a PNG or JPEG file; see [`decode_image`].
pub fn preprocess_image(path: &Path, cfg: &EncoderConfig) -> Result<ImageInput, DatasetError> {
    let bytes = std::fs::read(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_image(&bytes, cfg).map_err(|e| match e {
        DatasetError::Decode { detail, .. } => DatasetError::Decode {
            path: path.display().to_string(),
            detail,
        },
        other => other,
    })
}

/// Decodes PNG or JPEG bytes, resizes bilinearly to the encoder's size and
/// normalizes each channel.
pub fn decode_image(bytes: &[u8], cfg: &EncoderConfig) -> Result<ImageInput, DatasetError> {
    let decode = |detail: String| DatasetError::Decode {
        path: "<memory>".into(),
        detail,
    };
    let img = image::load_from_memory(bytes)
        .map_err(|e| decode(e.to_string()))?
        .to_rgb8();
    let (w, h) = img.dimensions();
    ImageInput::from_rgb8(w as usize, h as usize, img.as_raw(), cfg).map_err(|e| decode(e.to_string()))
}
