//! `key = value` bench configuration files. Blank lines and `#` comments are
//! ignored; unknown keys are rejected. Keys are the long flag names with `_`
//! in place of `-`.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::commands::CliError;
use crate::BenchArgs;

const KEYS: [&str; 23] = [
    "case",
    "a",
    "n",
    "reps",
    "seed",
    "methods",
    "eval_points",
    "dim_k",
    "a1_band",
    "mse_true",
    "basis",
    "k",
    "wavelet_order",
    "wavelet_form",
    "coarse_level",
    "cpv",
    "cpv_mode",
    "b_max",
    "c_max",
    "time_basis",
    "out",
    "reps_out",
    "sequential",
];

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::usage(format!("config line {}: expected key = value, got '{line}'", idx + 1))
        })?;
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::usage(format!(
                "config line {}: unknown key '{key}' (known keys: {})",
                idx + 1,
                KEYS.join(", ")
            )));
        }
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(CliError::usage(format!("config line {}: duplicate key '{key}'", idx + 1)));
        }
    }
    Ok(map)
}

fn value<T>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, CliError>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    map.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|e| CliError::usage(format!("config key '{key}': {e}")))
        })
        .transpose()
}

fn fill<T>(slot: &mut Option<T>, map: &BTreeMap<String, String>, key: &str) -> Result<(), CliError>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    if slot.is_none() {
        *slot = value(map, key)?;
    }
    Ok(())
}

/// Fills every unset field of `args` from the config file at `path`.
pub fn merge_config(args: &mut BenchArgs, path: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let map = parse_config(&text)?;
    fill(&mut args.case, &map, "case")?;
    fill(&mut args.a, &map, "a")?;
    fill(&mut args.n, &map, "n")?;
    fill(&mut args.reps, &map, "reps")?;
    fill(&mut args.seed, &map, "seed")?;
    fill(&mut args.methods, &map, "methods")?;
    fill(&mut args.eval_points, &map, "eval_points")?;
    fill(&mut args.dim_k, &map, "dim_k")?;
    fill(&mut args.a1_band, &map, "a1_band")?;
    fill(&mut args.mse_true, &map, "mse_true")?;
    fill(&mut args.out, &map, "out")?;
    fill(&mut args.reps_out, &map, "reps_out")?;
    let s = &mut args.sieve;
    fill(&mut s.basis, &map, "basis")?;
    fill(&mut s.k, &map, "k")?;
    fill(&mut s.wavelet_order, &map, "wavelet_order")?;
    fill(&mut s.wavelet_form, &map, "wavelet_form")?;
    fill(&mut s.coarse_level, &map, "coarse_level")?;
    fill(&mut s.cpv, &map, "cpv")?;
    fill(&mut s.cpv_mode, &map, "cpv_mode")?;
    fill(&mut s.b_max, &map, "b_max")?;
    fill(&mut s.c_max, &map, "c_max")?;
    fill(&mut s.time_basis, &map, "time_basis")?;
    if !args.sequential {
        if let Some(v) = value::<bool>(&map, "sequential")? {
            args.sequential = v;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_dashes() {
        let map = parse_config("# setting\ncase = tvtar\nb-max=4 # inline\n\n").unwrap();
        assert_eq!(map["case"], "tvtar");
        assert_eq!(map["b_max"], "4");
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(parse_config("colour = red\n").is_err());
        assert!(parse_config("n = 1\nn = 2\n").is_err());
        assert!(parse_config("just words\n").is_err());
    }
}
