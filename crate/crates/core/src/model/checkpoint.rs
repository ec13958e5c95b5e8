//! Versioned plain-text checkpoints. Parameters are stored as the hex bit
//! patterns of their `f64` values, so a reload reproduces the model exactly.

use std::fmt::Write as _;
use std::path::Path;

use super::network::DecompositionModel;
use super::structure::SeparabilityStructure;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

const MAGIC: &str = "sepnn-checkpoint";

pub fn format_checkpoint(model: &DecompositionModel) -> String {
    let s = model.structure();
    let mut out = format!("{MAGIC} {CHECKPOINT_VERSION}\n");
    let dims: Vec<String> = s.dims().iter().map(|d| d.to_string()).collect();
    let _ = writeln!(out, "structure {}", s.descriptor());
    let _ = writeln!(out, "dims {}", dims.join(" "));
    let _ = writeln!(out, "k {}", model.k());
    let _ = writeln!(out, "width {}", model.width());
    let _ = writeln!(out, "seed {}", model.seed());
    let _ = writeln!(out, "params {}", model.params().len());
    for chunk in model.params().chunks(8) {
        let line: Vec<String> = chunk.iter().map(|x| format!("{:016x}", x.to_bits())).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_checkpoint(text: &str) -> Result<DecompositionModel> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let mut next = |key: &str| -> Result<String> {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("checkpoint ended before {key:?}")))?;
        line.strip_prefix(key)
            .map(|rest| rest.trim().to_string())
            .ok_or_else(|| Error::Parse(format!("expected {key:?}, found {line:?}")))
    };
    let version = next(MAGIC)?;
    if version != CHECKPOINT_VERSION.to_string() {
        return Err(Error::Unsupported(format!("checkpoint version {version}")));
    }
    let descriptor = next("structure")?;
    let dims = next("dims")?
        .split_whitespace()
        .map(|w| w.parse::<usize>().map_err(|_| Error::Parse(format!("bad dimension {w:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let num = |s: String, what: &str| -> Result<u64> {
        s.parse().map_err(|_| Error::Parse(format!("bad {what} {s:?}")))
    };
    let k = num(next("k")?, "K")? as usize;
    let width = num(next("width")?, "width")? as usize;
    let seed = num(next("seed")?, "seed")?;
    let count = num(next("params")?, "parameter count")? as usize;
    let mut params = Vec::with_capacity(count);
    for line in lines {
        for word in line.split_whitespace() {
            let bits = u64::from_str_radix(word, 16).map_err(|_| Error::Parse(format!("bad parameter {word:?}")))?;
            params.push(f64::from_bits(bits));
        }
    }
    if params.len() != count {
        return Err(Error::Parse(format!("expected {count} parameters, found {}", params.len())));
    }
    let structure = SeparabilityStructure::parse(&descriptor, dims)?;
    DecompositionModel::from_parts(structure, k, width, seed, params)
}

pub fn save_checkpoint(model: &DecompositionModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_checkpoint(model))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<DecompositionModel> {
    parse_checkpoint(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        for d in ["full", "bisep", "cut:13|2"] {
            let s = SeparabilityStructure::parse(d, vec![2, 3, 2]).unwrap();
            let m = DecompositionModel::with_width(s, 5, 7, 42).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("model.ckpt");
            save_checkpoint(&m, &path).unwrap();
            let back = load_checkpoint(&path).unwrap();
            assert_eq!(back, m);
            let a = m.assemble().unwrap().state.into_matrix();
            let b = back.assemble().unwrap().state.into_matrix();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rejects_corruption() {
        let s = SeparabilityStructure::full_sep(vec![2, 2]).unwrap();
        let text = format_checkpoint(&DecompositionModel::with_width(s, 2, 3, 1).unwrap());
        assert!(matches!(
            parse_checkpoint(&text.replace("sepnn-checkpoint 1", "sepnn-checkpoint 9")),
            Err(Error::Unsupported(_))
        ));
        let truncated: String = text.lines().take(9).collect::<Vec<_>>().join("\n");
        assert!(parse_checkpoint(&truncated).is_err());
        assert!(parse_checkpoint(&text.replace("k 2", "k 3")).is_err());
        assert!(parse_checkpoint("").is_err());
    }
}
