use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;

use crate::manifest::Manifest;
use crate::train::{Metrics, METRICS_FILE};
use crate::{usage, CliResult};

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directories written by `gil train`.
    #[arg(long, num_args = 1.., required = true)]
    runs: Vec<PathBuf>,
    /// Output CSV; one row per (model, rewiring) with mean and standard
    /// deviation of the test error across runs.
    #[arg(long)]
    out: PathBuf,
}

fn name<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(str::to_owned))
        .unwrap_or_default()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

pub fn run(a: ReportArgs) -> CliResult<()> {
    let mut manifest = Manifest::new("report", None);
    let mut groups: BTreeMap<(String, String), Vec<Metrics>> = BTreeMap::new();
    for dir in &a.runs {
        let path = dir.join(METRICS_FILE);
        if !path.is_file() {
            return Err(usage(format!("{} has no {METRICS_FILE}", dir.display())));
        }
        manifest.input(&path)?;
        let m: Metrics = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
        groups.entry((name(&m.arch), name(&m.rewire))).or_default().push(m);
    }
    let mut out = String::from("model,rewire,runs,test_mae_mean,test_mae_std,final_k_mean\n");
    for ((model, rewire), runs) in &groups {
        let maes: Vec<f64> = runs.iter().filter_map(|m| m.test_mae).collect();
        let (mean, std) = if maes.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            mean_std(&maes)
        };
        let ks: Vec<f64> = runs.iter().filter_map(|m| m.final_k.map(|k| k as f64)).collect();
        let k = if ks.is_empty() {
            String::new()
        } else {
            format!("{}", mean_std(&ks).0)
        };
        out.push_str(&format!("{model},{rewire},{},{mean},{std},{k}\n", runs.len()));
    }
    std::fs::write(&a.out, &out)?;
    manifest.output(&a.out)?;
    let mut mpath = a.out.clone().into_os_string();
    mpath.push(".manifest.json");
    manifest.write(&PathBuf::from(mpath))?;
    print!("{out}");
    Ok(())
}
