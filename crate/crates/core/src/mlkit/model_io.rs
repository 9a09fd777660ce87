//! Versioned text persistence for trained models (`.qnn` files).
//!
//! The format is line-oriented and self-describing:
//!
//! ```text
//! qnn 1
//! scheme binary50|multiclass|none
//! classes <c>
//! features <d>
//! feature <name> <mean> <std>      (d lines)
//! hidden <h>
//! w1                               (d lines of h values)
//! ...
//! b1                               (1 line of h values)
//! w2                               (h lines of c values)
//! ...
//! b2                               (1 line of c values)
//! end
//! ```
//!
//! Floats are written in Rust's shortest round-tripping decimal form, so
//! a load reproduces the saved weights bit for bit.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{ClassScheme, MlError, Result, TrainedModel};

const FORMAT_VERSION: u32 = 1;

pub fn save_model<W: Write>(mut writer: W, model: &TrainedModel) -> Result<()> {
    let d = model.input_dim();
    let h = model.hidden_dim();
    let c = model.n_classes();
    writeln!(writer, "qnn {FORMAT_VERSION}")?;
    match model.scheme {
        Some(s) => writeln!(writer, "scheme {s}")?,
        None => writeln!(writer, "scheme none")?,
    }
    writeln!(writer, "classes {c}")?;
    writeln!(writer, "features {d}")?;
    for (name, &(mean, std)) in model.feature_names.iter().zip(&model.norm) {
        writeln!(writer, "feature {name} {mean} {std}")?;
    }
    writeln!(writer, "hidden {h}")?;
    writeln!(writer, "w1")?;
    for row in model.w1.rows() {
        writeln!(writer, "{}", join_floats(row.iter()))?;
    }
    writeln!(writer, "b1")?;
    writeln!(writer, "{}", join_floats(model.b1.iter()))?;
    writeln!(writer, "w2")?;
    for row in model.w2.rows() {
        writeln!(writer, "{}", join_floats(row.iter()))?;
    }
    writeln!(writer, "b2")?;
    writeln!(writer, "{}", join_floats(model.b2.iter()))?;
    writeln!(writer, "end")?;
    Ok(())
}

pub fn save_model_path(path: &Path, model: &TrainedModel) -> Result<()> {
    let mut bytes = Vec::new();
    save_model(&mut bytes, model)?;
    crate::util::atomic_write(path, &bytes)?;
    Ok(())
}

fn join_floats<'a, I: Iterator<Item = &'a f64>>(values: I) -> String {
    values
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

struct Lines<R> {
    reader: R,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        let mut line = String::new();
        self.number += 1;
        let n = self.reader.read_line(&mut line)?;
        if n == 0 {
            return Err(MlError::ModelFormat(format!(
                "unexpected end of file at line {}",
                self.number
            )));
        }
        Ok(line.trim_end().to_string())
    }

    fn expect_tag(&mut self, tag: &str) -> Result<()> {
        let line = self.next_line()?;
        if line != tag {
            return Err(MlError::ModelFormat(format!(
                "line {}: expected '{tag}', found '{line}'",
                self.number
            )));
        }
        Ok(())
    }

    fn tagged_value(&mut self, tag: &str) -> Result<String> {
        let line = self.next_line()?;
        match line.strip_prefix(tag).and_then(|r| r.strip_prefix(' ')) {
            Some(rest) if !rest.is_empty() => Ok(rest.to_string()),
            _ => Err(MlError::ModelFormat(format!(
                "line {}: expected '{tag} <value>', found '{line}'",
                self.number
            ))),
        }
    }

    fn float_row(&mut self, expected_len: usize) -> Result<Vec<f64>> {
        let line = self.next_line()?;
        let values: std::result::Result<Vec<f64>, _> =
            line.split_whitespace().map(str::parse::<f64>).collect();
        let values = values.map_err(|e| {
            MlError::ModelFormat(format!("line {}: bad float: {e}", self.number))
        })?;
        if values.len() != expected_len {
            return Err(MlError::ModelFormat(format!(
                "line {}: expected {expected_len} values, found {}",
                self.number,
                values.len()
            )));
        }
        Ok(values)
    }
}

fn parse_count(text: &str, what: &str) -> Result<usize> {
    let n: usize = text
        .parse()
        .map_err(|_| MlError::ModelFormat(format!("bad {what} count '{text}'")))?;
    if n == 0 {
        return Err(MlError::ModelFormat(format!("{what} count must be positive")));
    }
    Ok(n)
}

pub fn load_model<R: Read>(reader: R) -> Result<TrainedModel> {
    let mut lines = Lines {
        reader: BufReader::new(reader),
        number: 0,
    };
    let header = lines.next_line()?;
    match header.strip_prefix("qnn ") {
        Some(v) if v.parse::<u32>() == Ok(FORMAT_VERSION) => {}
        Some(v) => {
            return Err(MlError::ModelFormat(format!(
                "unsupported format version '{v}' (this build reads {FORMAT_VERSION})"
            )))
        }
        None => return Err(MlError::ModelFormat("not a qnn model file".into())),
    }
    let scheme = match lines.tagged_value("scheme")?.as_str() {
        "none" => None,
        other => Some(other.parse::<ClassScheme>().map_err(|_| {
            MlError::ModelFormat(format!("unknown scheme '{other}'"))
        })?),
    };
    let c = parse_count(&lines.tagged_value("classes")?, "class")?;
    let d = parse_count(&lines.tagged_value("features")?, "feature")?;
    let mut feature_names = Vec::with_capacity(d);
    let mut norm = Vec::with_capacity(d);
    for _ in 0..d {
        let entry = lines.tagged_value("feature")?;
        let parts: Vec<&str> = entry.split_whitespace().collect();
        let [name, mean, std] = parts.as_slice() else {
            return Err(MlError::ModelFormat(format!(
                "line {}: expected 'feature <name> <mean> <std>'",
                lines.number
            )));
        };
        let mean: f64 = mean
            .parse()
            .map_err(|_| MlError::ModelFormat(format!("bad mean '{mean}'")))?;
        let std: f64 = std
            .parse()
            .map_err(|_| MlError::ModelFormat(format!("bad std '{std}'")))?;
        feature_names.push(name.to_string());
        norm.push((mean, std));
    }
    let h = parse_count(&lines.tagged_value("hidden")?, "hidden")?;

    lines.expect_tag("w1")?;
    let mut w1 = Array2::zeros((d, h));
    for r in 0..d {
        let row = lines.float_row(h)?;
        for (col, v) in row.into_iter().enumerate() {
            w1[[r, col]] = v;
        }
    }
    lines.expect_tag("b1")?;
    let b1 = Array1::from_vec(lines.float_row(h)?);
    lines.expect_tag("w2")?;
    let mut w2 = Array2::zeros((h, c));
    for r in 0..h {
        let row = lines.float_row(c)?;
        for (col, v) in row.into_iter().enumerate() {
            w2[[r, col]] = v;
        }
    }
    lines.expect_tag("b2")?;
    let b2 = Array1::from_vec(lines.float_row(c)?);
    lines.expect_tag("end")?;

    Ok(TrainedModel {
        w1,
        b1,
        w2,
        b2,
        norm,
        feature_names,
        scheme,
    })
}

pub fn load_model_path(path: &Path) -> Result<TrainedModel> {
    let file = fs::File::open(path)?;
    load_model(file)
}
