//! CSV artifacts: a `#` comment block carrying the full configuration,
//! one header line, then data rows.

use std::fmt::Display;
use std::io::{self, Write};

use sepnn::optim::TrainConfig;
use sepnn::states::PRNG_NAME;

pub type Meta = Vec<(String, String)>;

pub fn meta(pairs: &[(&str, &dyn Display)]) -> Meta {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

/// Every training setting, so a row can be replayed from its seed.
pub fn train_meta(config: &TrainConfig) -> Meta {
    let a = &config.adadelta;
    let k = config.k.map_or("product-of-dims".to_string(), |k| k.to_string());
    meta(&[
        ("tool", &concat!("sepnn ", env!("CARGO_PKG_VERSION"))),
        ("prng", &PRNG_NAME),
        ("loss", &config.loss),
        ("k", &k),
        ("width", &config.width),
        ("max_epochs", &config.max_epochs),
        ("batches_per_epoch", &config.batches_per_epoch),
        ("separable_tol", &config.separable_tol),
        ("converge_tol", &config.converge_tol),
        ("patience", &config.patience),
        ("adadelta_decay", &a.decay),
        ("adadelta_eps", &a.eps),
        ("adadelta_lr", &a.lr),
        ("seed", &config.seed),
        ("restarts", &config.restarts),
    ])
}

pub fn write_header(w: &mut impl Write, meta: &Meta, columns: &[&str]) -> io::Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}: {v}")?;
    }
    writeln!(w, "{}", columns.join(","))
}

pub fn write_row(w: &mut impl Write, fields: &[String]) -> io::Result<()> {
    writeln!(w, "{}", fields.join(","))
}

/// Shortest round-trip representation; empty for `None`.
pub fn opt<T: Display>(x: Option<T>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

/// Parses the `# key: value` block of an artifact.
pub fn read_meta(text: &str) -> Meta {
    text.lines()
        .map_while(|l| l.strip_prefix("# "))
        .filter_map(|l| l.split_once(": "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trip() {
        let m = train_meta(&TrainConfig::default());
        let mut buf = Vec::new();
        write_header(&mut buf, &m, &["q", "distance"]).unwrap();
        write_row(&mut buf, &["0.5".into(), opt(Some(0.25))]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(read_meta(&text), m);
        assert!(text.ends_with("q,distance\n0.5,0.25\n"));
    }
}
