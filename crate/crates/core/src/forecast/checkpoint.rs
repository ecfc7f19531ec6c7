//! Text checkpoint: a shape header, a normalization line, then one CSV row per
//! named tensor (`name,rows,cols,v0,v1,...`). Floats use Rust's shortest
//! round-trip formatting so save/load is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::model::{Activation, ForecastModel, ModelShape, Normalizer};

const MAGIC: &str = "#evcs-forecast v1";

pub fn to_string(model: &ForecastModel) -> String {
    let s = model.shape();
    let fc: Vec<String> = s.fc_widths.iter().map(usize::to_string).collect();
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(
        out,
        "#shape gru_layers={} hidden={} fc={} activation={}",
        s.gru_layers,
        s.hidden,
        fc.join(";"),
        s.activation.as_str()
    )
    .unwrap();
    writeln!(out, "#norm mean={} std={}", model.norm.mean, model.norm.std).unwrap();
    for t in model.tensors() {
        write!(out, "{},{},{}", t.name, t.rows, t.cols).unwrap();
        for v in &model.params()[t.offset..t.offset + t.len()] {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn header_fields<'a>(line: Option<&'a str>, prefix: &str) -> Result<Vec<(&'a str, &'a str)>> {
    let line = line.ok_or_else(|| Error::config(format!("checkpoint missing `{prefix}` line")))?;
    let rest = line
        .strip_prefix(prefix)
        .ok_or_else(|| Error::config(format!("expected `{prefix}` line, got `{line}`")))?;
    rest.split_whitespace()
        .map(|kv| kv.split_once('=').ok_or_else(|| Error::config(format!("bad header field `{kv}`"))))
        .collect()
}

fn field<'a>(fields: &[(&str, &'a str)], key: &str) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::config(format!("checkpoint header missing `{key}`")))
}

fn num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::config(format!("bad number `{s}` in checkpoint")))
}

pub fn from_str(text: &str) -> Result<ForecastModel> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(MAGIC) {
        return Err(Error::config("not a forecast checkpoint"));
    }
    let shape = header_fields(lines.next(), "#shape")?;
    let fc = field(&shape, "fc")?;
    let shape = ModelShape {
        gru_layers: num(field(&shape, "gru_layers")?)?,
        hidden: num(field(&shape, "hidden")?)?,
        fc_widths: if fc.is_empty() {
            Vec::new()
        } else {
            fc.split(';').map(num).collect::<Result<_>>()?
        },
        activation: Activation::parse(field(&shape, "activation")?)?,
    };
    let norm = header_fields(lines.next(), "#norm")?;
    let norm = Normalizer {
        mean: num(field(&norm, "mean")?)?,
        std: num(field(&norm, "std")?)?,
    };
    let mut model = ForecastModel::zeros(shape)?;
    model.norm = norm;
    let expected = model.tensors().len();
    let mut seen = 0;
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let mut parts = line.split(',');
        let name = parts.next().unwrap_or_default();
        let rows: usize = num(parts.next().unwrap_or_default())?;
        let cols: usize = num(parts.next().unwrap_or_default())?;
        let values: Vec<f64> = parts.map(num).collect::<Result<_>>()?;
        let (t, slot) = model
            .tensor_mut(name)
            .ok_or_else(|| Error::config(format!("unknown tensor `{name}`")))?;
        if t.rows != rows || t.cols != cols || values.len() != slot.len() {
            return Err(Error::config(format!("tensor `{name}` has the wrong shape")));
        }
        slot.copy_from_slice(&values);
        seen += 1;
    }
    if seen != expected {
        return Err(Error::config(format!("checkpoint has {seen} tensors, expected {expected}")));
    }
    Ok(model)
}

pub fn save(model: &ForecastModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_string(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ForecastModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text)
}
