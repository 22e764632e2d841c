use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use craniotk_core::atlas::CaseMap;
use craniotk_core::metrics::{aggregate, dice, hausdorff, CaseRow, HdPercentile};
use serde_json::json;

use super::{input_path, load_manifest, Context};
use crate::io::{read_volume, CaseEntry};
use crate::report::write_report;
use crate::{log, Error, Result};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Manifest(s) whose `defect` paths are predictions; repeatable.
    #[arg(long, required = true)]
    pub pred_manifest: Vec<PathBuf>,
    /// Manifest(s) whose `defect` paths are ground truth; repeatable.
    #[arg(long, required = true)]
    pub gt_manifest: Vec<PathBuf>,
    /// 100 for the maximum, 95 for the 95th percentile.
    #[arg(long)]
    pub hd_percentile: Option<u8>,
    /// JSON report path.
    #[arg(long)]
    pub out_report: PathBuf,
    /// CSV path (default: the report path with a `.csv` extension).
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
}

/// Cases with a `defect` path from several manifests, keyed by id.
fn collect(paths: &[PathBuf]) -> Result<BTreeMap<String, (CaseEntry, PathBuf)>> {
    let mut out = BTreeMap::new();
    for p in paths {
        let (m, base) = load_manifest(p)?;
        for case in m.cases {
            let Some(defect) = &case.paths.defect else { continue };
            let file = input_path(&base, defect);
            let id = case.case_id.clone();
            if out.insert(id.clone(), (case, file)).is_some() {
                return Err(Error::Format(format!("case `{id}` appears in more than one manifest")));
            }
        }
    }
    Ok(out)
}

pub(super) fn run(args: EvaluateArgs, ctx: &Context) -> Result<()> {
    let mut s = ctx.settings();
    let pct = s.get("hd_percentile", args.hd_percentile, 100u8)?;
    let percentile =
        HdPercentile::from_value(pct).map_err(|_| Error::Usage("--hd-percentile must be 100 or 95".into()))?;
    let pool = ctx.pool(&mut s)?;
    log::header("evaluate", &s);

    let gt = collect(&args.gt_manifest)?;
    let pred = collect(&args.pred_manifest)?;
    if let Some(id) = gt.keys().find(|id| !pred.contains_key(*id)) {
        return Err(Error::Format(format!("no prediction for case `{id}`")));
    }
    let gt: Vec<_> = gt.into_values().collect();
    let rows = pool.map(gt.len(), |i| -> Result<CaseRow> {
        let (case, gt_path) = &gt[i];
        let truth = read_volume(gt_path)?;
        let p = read_volume(&pred[&case.case_id].1)?;
        let d = dice(&p, &truth)?;
        let hd = if p.is_empty() || truth.is_empty() { None } else { Some(hausdorff(&p, &truth, percentile)?) };
        Ok(CaseRow { case_id: case.case_id.clone(), subset: case.subset.report_subset(), dice: d, hd_mm: hd })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let report = aggregate(rows, percentile);
    let csv = args.out_csv.clone().unwrap_or_else(|| args.out_report.with_extension("csv"));
    write_report(&report, &args.out_report, &csv)?;
    print!("{}", report.table());
    log::done("evaluate", json!({ "cases": report.rows.len() }));
    Ok(())
}
