//! Flat text model files.
//!
//! ```text
//! dsieve-model 1
//! key=value            (one per line)
//! [grid]               one line of m values
//! [mean]               one line of m values
//! [scales]             one line of K values
//! [beta]               bcp lines of p values (row-major)
//! [sigma]              p lines of p values
//! ```
//!
//! Every real number is a hexadecimal float so a reload is bit-exact.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use nalgebra::DMatrix;

use super::hexfloat::{decode, encode};
use super::{FittedModel, SieveConfig};
use crate::basis::{build_basis, BasisSpec, Grid};
use crate::error::{Error, Result};
use crate::fdata::{CpvMode, ScoreDecomposition};
use crate::tvvar::{DesignLayout, SieveVarFit, TimeBasis};

const MAGIC: &str = "dsieve-model 1";

const KEYS: [&str; 22] = [
    "n",
    "m",
    "K",
    "p",
    "b",
    "c",
    "kept",
    "spatial_family",
    "wavelet_order",
    "wavelet_form",
    "cascade_depth",
    "coarse_level",
    "time_family",
    "cpv_threshold",
    "cpv_mode",
    "zero_tol",
    "b_max",
    "c_max",
    "condition_number",
    "normal_residual",
    "log_lik",
    "aic",
];

fn io_err(e: std::io::Error) -> Error {
    Error::Parse(e.to_string())
}

fn join_hex(values: impl Iterator<Item = f64>) -> String {
    values.map(encode).collect::<Vec<_>>().join(" ")
}

fn opt_hex(v: Option<f64>) -> String {
    v.map(encode).unwrap_or_else(|| "none".into())
}

pub fn write_model<W: Write>(mut w: W, model: &FittedModel) -> Result<()> {
    let cfg = &model.config;
    let spec = model.dec.basis.spec();
    let layout = &model.fit.layout;
    let kept = model
        .dec
        .kept
        .iter()
        .map(|k| k.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let cpv_mode = match cfg.cpv_mode {
        CpvMode::BasisOrder => "basis",
        CpvMode::Eigen => "eigen",
    };
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    let header: [(&str, String); 22] = [
        ("n", model.n.to_string()),
        ("m", model.mean.len().to_string()),
        ("K", spec.count.to_string()),
        ("p", model.dec.p.to_string()),
        ("b", layout.b.to_string()),
        ("c", layout.c.to_string()),
        ("kept", kept),
        ("spatial_family", spec.family.name().into()),
        ("wavelet_order", spec.wavelet_order.to_string()),
        ("wavelet_form", spec.wavelet_form.name().into()),
        ("cascade_depth", spec.cascade_depth.to_string()),
        ("coarse_level", spec.coarse_level.to_string()),
        ("time_family", model.fit.time_basis.family.name().into()),
        ("cpv_threshold", encode(cfg.cpv_threshold)),
        ("cpv_mode", cpv_mode.into()),
        ("zero_tol", encode(cfg.zero_tol)),
        ("b_max", cfg.b_max.to_string()),
        ("c_max", cfg.c_max.to_string()),
        ("condition_number", encode(model.fit.condition_number)),
        ("normal_residual", encode(model.fit.normal_residual)),
        ("log_lik", opt_hex(model.fit.log_lik)),
        ("aic", opt_hex(model.fit.aic)),
    ];
    for (k, v) in header {
        out.push_str(&format!("{k}={v}\n"));
    }
    out.push_str("[grid]\n");
    out.push_str(&join_hex(model.grid().points().iter().copied()));
    out.push_str("\n[mean]\n");
    out.push_str(&join_hex(model.mean.iter().copied()));
    out.push_str("\n[scales]\n");
    out.push_str(&join_hex(model.dec.scales.iter().copied()));
    out.push_str("\n[beta]\n");
    for row in model.fit.beta_hat.row_iter() {
        out.push_str(&join_hex(row.iter().copied()));
        out.push('\n');
    }
    out.push_str("[sigma]\n");
    for row in model.fit.sigma_hat.row_iter() {
        out.push_str(&join_hex(row.iter().copied()));
        out.push('\n');
    }
    w.write_all(out.as_bytes()).map_err(io_err)?;
    w.flush().map_err(io_err)
}

fn parse_usize(map: &BTreeMap<String, String>, key: &str) -> Result<usize> {
    let v = field(map, key)?;
    v.parse()
        .map_err(|_| Error::Parse(format!("model key '{key}': expected an integer, got '{v}'")))
}

fn field<'a>(map: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    map.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::Parse(format!("model file is missing key '{key}'")))
}

fn parse_opt_hex(s: &str) -> Result<Option<f64>> {
    if s == "none" {
        Ok(None)
    } else {
        decode(s).map(Some)
    }
}

fn parse_row(line: &str) -> Result<Vec<f64>> {
    line.split_whitespace().map(decode).collect()
}

fn block(sections: &BTreeMap<String, Vec<String>>, name: &str) -> Result<Vec<Vec<f64>>> {
    sections
        .get(name)
        .ok_or_else(|| Error::Parse(format!("model file is missing section [{name}]")))?
        .iter()
        .map(|l| parse_row(l))
        .collect()
}

fn matrix(rows: Vec<Vec<f64>>, nrows: usize, ncols: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse(format!(
            "section [{name}] should be {nrows}×{ncols}"
        )));
    }
    Ok(DMatrix::from_row_iterator(
        nrows,
        ncols,
        rows.into_iter().flatten(),
    ))
}

fn single_row(rows: Vec<Vec<f64>>, len: usize, name: &str) -> Result<Vec<f64>> {
    matrix(rows, 1, len, name).map(|m| m.iter().copied().collect())
}

pub fn read_model<R: BufRead>(reader: R) -> Result<FittedModel> {
    let mut lines = reader.lines();
    let first = lines
        .next()
        .transpose()
        .map_err(io_err)?
        .ok_or_else(|| Error::Parse("empty model file".into()))?;
    if first.trim() != MAGIC {
        return Err(Error::Parse(format!("not a model file (header '{first}')")));
    }
    let mut map = BTreeMap::new();
    let mut sections: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for line in lines {
        let line = line.map_err(io_err)?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some(name.to_string());
            sections.entry(name.to_string()).or_default();
            continue;
        }
        match &current {
            Some(name) => sections.get_mut(name).expect("section exists").push(line.to_string()),
            None => {
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("expected key=value, got '{line}'")))?;
                let k = k.trim();
                if !KEYS.contains(&k) {
                    return Err(Error::Parse(format!("unknown model key '{k}'")));
                }
                map.insert(k.to_string(), v.trim().to_string());
            }
        }
    }

    let n = parse_usize(&map, "n")?;
    let m = parse_usize(&map, "m")?;
    let count = parse_usize(&map, "K")?;
    let p_cpv = parse_usize(&map, "p")?;
    let b = parse_usize(&map, "b")?;
    let c = parse_usize(&map, "c")?;
    let kept: Vec<usize> = field(&map, "kept")?
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad kept index '{s}'")))
        })
        .collect::<Result<_>>()?;
    let p = kept.len();
    if kept.iter().any(|&k| k >= p_cpv) || p_cpv > count {
        return Err(Error::Parse("kept indices inconsistent with p and K".into()));
    }
    let spatial = BasisSpec {
        family: field(&map, "spatial_family")?.parse()?,
        count,
        wavelet_order: parse_usize(&map, "wavelet_order")?,
        wavelet_form: field(&map, "wavelet_form")?.parse()?,
        cascade_depth: parse_usize(&map, "cascade_depth")? as u32,
        coarse_level: parse_usize(&map, "coarse_level")? as u32,
    };
    let cpv_mode = match field(&map, "cpv_mode")? {
        "basis" => CpvMode::BasisOrder,
        "eigen" => CpvMode::Eigen,
        other => return Err(Error::Parse(format!("unknown cpv_mode '{other}'"))),
    };
    let config = SieveConfig {
        spatial,
        cpv_threshold: decode(field(&map, "cpv_threshold")?)?,
        cpv_mode,
        zero_tol: decode(field(&map, "zero_tol")?)?,
        time_family: field(&map, "time_family")?.parse()?,
        b_max: parse_usize(&map, "b_max")?,
        c_max: parse_usize(&map, "c_max")?,
        execution: Default::default(),
    };

    let points = single_row(block(&sections, "grid")?, m, "grid")?;
    let grid = Grid::from_points(points)?;
    let basis = Arc::new(build_basis(spatial, &grid)?);
    let mean = single_row(block(&sections, "mean")?, m, "mean")?;
    let scales = single_row(block(&sections, "scales")?, count, "scales")?;
    let layout = DesignLayout::new(b, c, p, n)?;
    let beta_hat = matrix(block(&sections, "beta")?, layout.columns(), p, "beta")?;
    let sigma_hat = matrix(block(&sections, "sigma")?, p, p, "sigma")?;

    let dropped = (0..p_cpv).filter(|k| !kept.contains(k)).collect();
    let dec = ScoreDecomposition {
        raw_scores: DMatrix::zeros(0, count),
        scales,
        scaled_scores: DMatrix::zeros(0, p),
        p: p_cpv,
        kept,
        dropped,
        basis,
    };
    let fit = SieveVarFit {
        layout,
        time_basis: TimeBasis::new(config.time_family, c),
        beta_hat,
        residuals: DMatrix::zeros(0, p),
        sigma_hat,
        condition_number: decode(field(&map, "condition_number")?)?,
        normal_residual: decode(field(&map, "normal_residual")?)?,
        log_lik: parse_opt_hex(field(&map, "log_lik")?)?,
        aic: parse_opt_hex(field(&map, "aic")?)?,
    };
    Ok(FittedModel {
        n,
        mean,
        dec,
        fit,
        table: Vec::new(),
        config,
    })
}
