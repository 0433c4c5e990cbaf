use std::fs;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};
use tlens_agent::{run_agent, AgentConfig, AgentTrace, ChatBackend, ImageRef, LlmBackend, Post, ScriptedBackend};
use tlens_core::dataset::{load_corpus, preprocess_image};
use tlens_core::encoders::Vocabulary;
use tlens_core::eval::{evaluate, write_loss_csv};
use tlens_core::model::{HrModel, HrModelConfig};
use tlens_core::train::{train, LossPoint, TrainConfig, TrainingSet};
use tlens_mcp::{serve_sse, serve_stdio, McpClient, McpServer, SseConfig, SseTransport, StdioTransport};

use crate::args::{AgentArgs, EvalArgs, Global, ScoreArgs, ServeArgs, TrainArgs, Transport};

/// Training loss curve written next to the weights.
pub const LOSS_FILE: &str = "loss.csv";

/// Bad invocation that clap cannot see, such as a global flag a subcommand needs.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn model_dir(g: &Global) -> Result<&Path> {
    g.weights
        .as_deref()
        .ok_or_else(|| UsageError("--weights <model directory> is required for this command".into()).into())
}

pub fn load_model(g: &Global) -> Result<HrModel> {
    let dir = model_dir(g)?;
    HrModel::load(dir).with_context(|| format!("loading model from {}", dir.display()))
}

fn model_config(g: &Global) -> Result<HrModelConfig> {
    let cfg = match &g.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => HrModelConfig::desk(),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn train_cmd(g: &Global, a: &TrainArgs) -> Result<Value> {
    let mut corpus = load_corpus(&a.corpus)?;
    if a.multimodal_only {
        corpus = corpus.multimodal_only();
    }
    if corpus.is_empty() {
        bail!("{} has no usable posts", a.corpus.display());
    }
    let cfg = model_config(g)?;
    let vocab = Vocabulary::build(corpus.posts.iter().map(|p| p.text.as_str()), cfg.encoder.vocab_size);
    let mut model = HrModel::new(cfg, vocab, g.seed)?;
    let set = TrainingSet::from_corpus(&model, &corpus)?;
    let tc = TrainConfig {
        lr: a.lr,
        epochs: a.epochs,
        batch_size: a.batch_size,
        seed: g.seed,
        shuffle: !a.no_shuffle,
    };
    log::info!("training on {} posts for {} epochs", set.len(), tc.epochs);
    let curve = train(&mut model, &set, &tc)?;
    model.save(&a.out)?;
    let loss_path = a.out.join(LOSS_FILE);
    write_loss_csv(&curve, fs::File::create(&loss_path)?)
        .with_context(|| format!("writing {}", loss_path.display()))?;
    Ok(json!({
        "out": a.out,
        "items": set.len(),
        "epochs": tc.epochs,
        "final_loss": curve.last().map(|p| p.loss),
    }))
}

fn read_loss_curve(path: &Path) -> Result<Vec<LossPoint>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut curve = Vec::new();
    for row in reader.records() {
        let row = row?;
        curve.push(LossPoint {
            epoch: row[0].parse()?,
            loss: row[1].parse()?,
        });
    }
    Ok(curve)
}

pub fn eval_cmd(g: &Global, a: &EvalArgs) -> Result<Value> {
    let model = load_model(g)?;
    let corpus = load_corpus(&a.corpus)?;
    let set = TrainingSet::from_corpus(&model, &corpus)?;
    let loss_path = model_dir(g)?.join(LOSS_FILE);
    let curve = if loss_path.exists() {
        read_loss_curve(&loss_path)?
    } else {
        Vec::new()
    };
    if let Some(out) = &a.loss_csv {
        write_loss_csv(&curve, fs::File::create(out)?)?;
    }
    Ok(serde_json::to_value(evaluate(&model, &set, curve)?)?)
}

pub fn score_cmd(g: &Global, a: &ScoreArgs) -> Result<Value> {
    let model = load_model(g)?;
    let image = match &a.image {
        Some(p) => Some(preprocess_image(p, &model.config().encoder)?),
        None => None,
    };
    Ok(serde_json::to_value(model.predict(&a.text, image.as_ref())?)?)
}

pub fn serve_cmd(g: &Global, a: &ServeArgs) -> Result<()> {
    let server = McpServer::new(Arc::new(load_model(g)?));
    match a.transport {
        Transport::Stdio => {
            let stdin = io::stdin().lock();
            serve_stdio(&server, BufReader::new(stdin), io::stdout().lock(), a.max_line_bytes)?;
        }
        Transport::Sse => {
            let config = SseConfig {
                session_timeout: Duration::from_secs(a.session_timeout),
                max_body_bytes: a.max_line_bytes,
                ..SseConfig::default()
            };
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(&a.bind)
                    .await
                    .with_context(|| format!("binding {}", a.bind))?;
                log::warn!("HR-MCP SSE server on http://{}/sse", listener.local_addr()?);
                let shutdown = async {
                    let _ = tokio::signal::ctrl_c().await;
                };
                serve_sse(server, listener, config, shutdown).await?;
                anyhow::Ok(())
            })?;
        }
    }
    Ok(())
}

fn image_ref(a: &AgentArgs) -> Result<Option<ImageRef>> {
    let Some(path) = &a.image else { return Ok(None) };
    if a.inline_image {
        use base64::Engine;
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        return Ok(Some(ImageRef::B64(
            base64::engine::general_purpose::STANDARD.encode(bytes),
        )));
    }
    let abs: PathBuf = fs::canonicalize(path).with_context(|| format!("resolving {}", path.display()))?;
    Ok(Some(ImageRef::Path(abs.display().to_string())))
}

pub fn agent_cmd(g: &Global, a: &AgentArgs) -> Result<AgentTrace> {
    let mut backend: Box<dyn LlmBackend> = match &a.mock {
        Some(path) => Box::new(ScriptedBackend::from_file(path)?),
        None => Box::new(ChatBackend::from_env()?),
    };
    let mut client = match &a.mcp_url {
        Some(url) => McpClient::connect(SseTransport::connect(url, Duration::from_secs(60))?)?,
        None => McpClient::connect(StdioTransport::in_process(McpServer::new(Arc::new(load_model(g)?)))?)?,
    };
    let post = Post {
        text: a.text.clone(),
        image: image_ref(a)?,
    };
    let config = AgentConfig {
        max_steps: a.max_steps,
        ..AgentConfig::default()
    };
    Ok(run_agent(&a.query, &post, backend.as_mut(), &mut client, &config))
}
