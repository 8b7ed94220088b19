//! Aggregation of per-run JSON reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

/// Expands directories into their `.json` files, sorted by name.
fn collect(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut inside: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("reading {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json"))
                .collect();
            inside.sort();
            files.extend(inside);
        } else if p.exists() {
            files.push(p.clone());
        } else {
            bail!("{} does not exist", p.display());
        }
    }
    Ok(files)
}

fn bounds_of(path: &Path) -> Result<Vec<(String, bool)>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc: Value = serde_json::from_str(&text)
        .with_context(|| format!("parse error in {}", path.display()))?;
    let Some(bounds) = doc.get("bounds").and_then(Value::as_array) else {
        bail!("parse error in {}: no 'bounds' array", path.display());
    };
    let mut out = Vec::new();
    for b in bounds {
        let name = b.get("bound_name").and_then(Value::as_str);
        let applicable = b.get("applicable").and_then(Value::as_bool);
        let satisfied = b.get("satisfied").and_then(Value::as_array);
        let (Some(name), Some(applicable), Some(satisfied)) = (name, applicable, satisfied) else {
            bail!("parse error in {}: malformed bound report", path.display());
        };
        if applicable {
            out.push((name.to_string(), satisfied.iter().all(|s| s.as_bool() == Some(true))));
        }
    }
    Ok(out)
}

/// `{"runs": n, "bounds": {name: {"pass": p, "fail": f}}}` over every
/// applicable bound report.
pub fn aggregate(paths: &[PathBuf]) -> Result<Value> {
    if paths.is_empty() {
        bail!("report needs at least one path");
    }
    let files = collect(paths)?;
    if files.is_empty() {
        bail!("no JSON reports found");
    }
    let mut counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for f in &files {
        for (name, pass) in bounds_of(f)? {
            let entry = counts.entry(name).or_default();
            if pass {
                entry.0 += 1;
            } else {
                entry.1 += 1;
            }
        }
    }
    let bounds: serde_json::Map<String, Value> = counts
        .into_iter()
        .map(|(k, (p, f))| (k, json!({"pass": p, "fail": f})))
        .collect();
    Ok(json!({"runs": files.len(), "bounds": bounds}))
}
