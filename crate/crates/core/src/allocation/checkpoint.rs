//! Model checkpoints: a versioned text header followed by a flat array of
//! little-endian `f64` parameters.
//!
//! Header lines are `key: value`, terminated by a line `---`. The first line
//! is always `sgin-checkpoint v1` and the second `kind: <qnetwork|predictor>`.
//!
//! Q-network field order: `widths`, `activations`, `params`; the payload is
//! the online network's parameters in layer order (weights row-major, then
//! biases).
//!
//! Predictor field order: `window`, `context`, `residual_lags`, `inputs`,
//! `lstm_layers`, `arma_order`, `seed`, `epochs`, `folds`, `learning_rate`,
//! `cv_mse`, `params`; the payload is the LSTM parameters followed by the AR
//! then MA coefficients.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::arma::ArmaModel;
use super::lstm::Lstm;
use super::nn::{Activation, LayerShape, Mlp};
use super::predictor::{PredictorModel, TrainingMeta};
use crate::{Error, Result};

const MAGIC: &str = "sgin-checkpoint v1";

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn write_checkpoint(w: &mut impl Write, kind: &str, fields: &[(&str, String)], params: &[f64]) -> Result<()> {
    let mut header = format!("{MAGIC}\nkind: {kind}\n");
    for (k, v) in fields {
        header.push_str(&format!("{k}: {v}\n"));
    }
    header.push_str(&format!("params: {}\n---\n", params.len()));
    w.write_all(header.as_bytes())?;
    let mut buf = Vec::with_capacity(8 * params.len());
    for p in params {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

struct Parsed {
    kind: String,
    fields: HashMap<String, String>,
    params: Vec<f64>,
}

impl Parsed {
    fn get(&self, key: &str) -> Result<&str> {
        self.fields
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Checkpoint(format!("missing field `{key}`")))
    }

    fn number<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .parse()
            .map_err(|_| Error::Checkpoint(format!("field `{key}` is not a number")))
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>> {
        self.get(key)?
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| Error::Checkpoint(format!("bad entry `{s}` in `{key}`"))))
            .collect()
    }
}

fn read_checkpoint(r: &mut impl Read) -> Result<Parsed> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let marker = b"\n---\n";
    let split = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| Error::Checkpoint("header terminator not found".into()))?;
    let header = std::str::from_utf8(&bytes[..split]).map_err(|_| Error::Checkpoint("header is not UTF-8".into()))?;
    let payload = &bytes[split + marker.len()..];
    let mut lines = header.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::Checkpoint(format!("expected `{MAGIC}` header")));
    }
    let mut fields = HashMap::new();
    for line in lines {
        let (k, v) = line
            .split_once(": ")
            .ok_or_else(|| Error::Checkpoint(format!("malformed header line `{line}`")))?;
        fields.insert(k.to_string(), v.to_string());
    }
    let kind = fields
        .remove("kind")
        .ok_or_else(|| Error::Checkpoint("missing field `kind`".into()))?;
    let mut parsed = Parsed {
        kind,
        fields,
        params: Vec::new(),
    };
    let n: usize = parsed.number("params")?;
    if payload.len() != 8 * n {
        return Err(Error::Checkpoint(format!(
            "payload holds {} bytes, header announces {n} parameters",
            payload.len()
        )));
    }
    parsed.params = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(parsed)
}

/// Writes a Q-network (online weights).
pub fn write_mlp(w: &mut impl Write, net: &Mlp) -> Result<()> {
    let acts: Vec<&str> = net.layers.iter().map(|l| l.activation.label()).collect();
    write_checkpoint(
        w,
        "qnetwork",
        &[("widths", join(&net.widths())), ("activations", acts.join(" "))],
        &net.params,
    )
}

/// Reads a network written by [`write_mlp`].
pub fn read_mlp(r: &mut impl Read) -> Result<Mlp> {
    let p = read_checkpoint(r)?;
    if p.kind != "qnetwork" {
        return Err(Error::Checkpoint(format!("expected kind qnetwork, got {}", p.kind)));
    }
    let widths: Vec<usize> = p.list("widths")?;
    let acts: Vec<Activation> = p
        .get("activations")?
        .split_whitespace()
        .map(|s| Activation::from_label(s).ok_or_else(|| Error::Checkpoint(format!("unknown activation `{s}`"))))
        .collect::<Result<_>>()?;
    if widths.len() < 2 || acts.len() != widths.len() - 1 {
        return Err(Error::Checkpoint("widths and activations disagree".into()));
    }
    let mut layers = Vec::with_capacity(acts.len());
    let mut offset = 0;
    for (i, &activation) in acts.iter().enumerate() {
        let shape = LayerShape {
            inputs: widths[i],
            outputs: widths[i + 1],
            activation,
            offset,
        };
        offset += (shape.inputs + 1) * shape.outputs;
        layers.push(shape);
    }
    if offset != p.params.len() {
        return Err(Error::Checkpoint(format!("layers need {offset} parameters, file has {}", p.params.len())));
    }
    Ok(Mlp { layers, params: p.params })
}

/// Writes a trained predictor.
pub fn write_predictor(w: &mut impl Write, model: &PredictorModel) -> Result<()> {
    let (p, q) = model.arma.order();
    let mut params = model.lstm.params.clone();
    params.extend(&model.arma.phi);
    params.extend(&model.arma.theta);
    write_checkpoint(
        w,
        "predictor",
        &[
            ("window", model.window.to_string()),
            ("context", model.context.to_string()),
            ("residual_lags", model.residual_lags.to_string()),
            ("inputs", model.lstm.inputs.to_string()),
            ("lstm_layers", join(&model.lstm.hidden)),
            ("arma_order", format!("{p} {q}")),
            ("seed", model.meta.seed.to_string()),
            ("epochs", model.meta.epochs.to_string()),
            ("folds", model.meta.folds.to_string()),
            ("learning_rate", format!("{:e}", model.meta.learning_rate)),
            ("cv_mse", format!("{:e}", model.meta.cv_mse)),
        ],
        &params,
    )
}

/// Reads a predictor written by [`write_predictor`].
pub fn read_predictor(r: &mut impl Read) -> Result<PredictorModel> {
    let f = read_checkpoint(r)?;
    if f.kind != "predictor" {
        return Err(Error::Checkpoint(format!("expected kind predictor, got {}", f.kind)));
    }
    let hidden: Vec<usize> = f.list("lstm_layers")?;
    let order: Vec<usize> = f.list("arma_order")?;
    if hidden.is_empty() || hidden.contains(&0) || order.len() != 2 {
        return Err(Error::Checkpoint("bad lstm_layers or arma_order".into()));
    }
    let mut lstm = Lstm {
        inputs: f.number("inputs")?,
        hidden,
        params: Vec::new(),
    };
    let n = lstm.param_count();
    let (p, q) = (order[0], order[1]);
    if f.params.len() != n + p + q {
        return Err(Error::Checkpoint(format!("model needs {} parameters, file has {}", n + p + q, f.params.len())));
    }
    lstm.params = f.params[..n].to_vec();
    Ok(PredictorModel {
        window: f.number("window")?,
        context: f.number("context")?,
        residual_lags: f.number("residual_lags")?,
        lstm,
        arma: ArmaModel {
            phi: f.params[n..n + p].to_vec(),
            theta: f.params[n + p..].to_vec(),
        },
        meta: TrainingMeta {
            seed: f.number("seed")?,
            epochs: f.number("epochs")?,
            folds: f.number("folds")?,
            learning_rate: f.number("learning_rate")?,
            cv_mse: f.number("cv_mse")?,
        },
    })
}

pub fn save_mlp(path: &Path, net: &Mlp) -> Result<()> {
    write_mlp(&mut std::io::BufWriter::new(std::fs::File::create(path)?), net)
}

pub fn load_mlp(path: &Path) -> Result<Mlp> {
    read_mlp(&mut std::fs::File::open(path)?)
}

pub fn save_predictor(path: &Path, model: &PredictorModel) -> Result<()> {
    write_predictor(&mut std::io::BufWriter::new(std::fs::File::create(path)?), model)
}

pub fn load_predictor(path: &Path) -> Result<PredictorModel> {
    read_predictor(&mut std::fs::File::open(path)?)
}
