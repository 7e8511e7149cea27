use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::TrainConfig;
use crate::nn::{Activation, NnError};
use crate::{Mlp, Real};

const MAGIC: &str = "scope-lab-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config_hash: String,
    pub params: Mlp,
}

/// First 16 hex digits of the SHA-256 of the config's canonical form.
pub fn config_hash(config: &TrainConfig) -> String {
    let digest = Sha256::digest(config.canonical().as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_checkpoint<W: Write>(mut out: W, params: &Mlp, config: &TrainConfig) -> Result<(), CheckpointError> {
    let hidden: Vec<String> = params.hidden_sizes().iter().map(|h| h.to_string()).collect();
    let flat = params.to_flat();
    writeln!(out, "{MAGIC} {VERSION}")?;
    writeln!(out, "config_hash {}", config_hash(config))?;
    writeln!(out, "activation {}", params.activation.name())?;
    writeln!(out, "input_dim {}", params.input_dim())?;
    writeln!(out, "hidden {}", hidden.join(","))?;
    writeln!(out, "outputs {}", params.num_outputs())?;
    writeln!(out, "params {}", flat.len())?;
    for v in flat {
        // `{:?}` round-trips f64 exactly.
        writeln!(out, "{v:?}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<Checkpoint, CheckpointError> {
    let fmt = |m: String| CheckpointError::Format(m);
    let mut lines = BufReader::new(input).lines();
    let mut field = |key: &str| -> Result<String, CheckpointError> {
        let line = lines.next().ok_or_else(|| fmt(format!("missing `{key}`")))??;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' ').or(rest.is_empty().then_some("")))
            .map(str::to_owned)
            .ok_or_else(|| fmt(format!("expected `{key}`, got `{line}`")))
    };
    let version = field(MAGIC)?;
    if version.trim() != VERSION.to_string() {
        return Err(fmt(format!("unsupported version `{version}`")));
    }
    let config_hash = field("config_hash")?;
    let act = field("activation")?;
    let activation = Activation::parse(&act).ok_or_else(|| fmt(format!("unknown activation `{act}`")))?;
    let count = |s: String| s.trim().parse::<usize>().map_err(|_| fmt(format!("bad count `{s}`")));
    let input_dim = count(field("input_dim")?)?;
    let hidden_line = field("hidden")?;
    let hidden = if hidden_line.trim().is_empty() {
        Vec::new()
    } else {
        hidden_line.split(',').map(|h| count(h.to_owned())).collect::<Result<Vec<_>, _>>()?
    };
    let outputs = count(field("outputs")?)?;
    let n = count(field("params")?)?;
    let mut flat = Vec::with_capacity(n);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        flat.push(line.trim().parse::<Real>().map_err(|_| fmt(format!("bad value `{line}`")))?);
    }
    if flat.len() != n {
        return Err(fmt(format!("expected {n} values, found {}", flat.len())));
    }
    let mut params = Mlp::zeros(input_dim, &hidden, outputs, activation);
    params.load_flat(&flat)?;
    Ok(Checkpoint { config_hash, params })
}

pub fn save_checkpoint(path: &Path, params: &Mlp, config: &TrainConfig) -> Result<(), CheckpointError> {
    write_checkpoint(BufWriter::new(File::create(path)?), params, config)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    read_checkpoint(File::open(path)?)
}
