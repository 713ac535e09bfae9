use std::io::Write as _;
use std::path::PathBuf;

use clap::Args;

use voxdiff::metrics::{report, Hd95Convention, MetricsConfig, MetricsReport};

use crate::util::{self, CliError, CliResult};

#[derive(Args)]
pub struct MetricsArgs {
    /// Predicted volume.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth volume.
    #[arg(long)]
    gt: PathBuf,
    /// Evaluation mask volume (nonzero = evaluate) for intensity metrics.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Predicted structure mask for Dice/HD95/NSD.
    #[arg(long)]
    pred_mask: Option<PathBuf>,
    /// Reference structure mask for Dice/HD95/NSD.
    #[arg(long)]
    gt_mask: Option<PathBuf>,
    /// Dynamic range override for PSNR/SSIM.
    #[arg(long)]
    data_range: Option<f64>,
    /// Surface tolerance for NSD, millimeters.
    #[arg(long, default_value_t = 1.0)]
    nsd_tol: f64,
    /// HD95 convention: pooled or max.
    #[arg(long, default_value = "pooled")]
    hd95_convention: String,
    /// Append one CSV row here (header written if the file is new).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the report JSON here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

const CSV_HEADER: &str = "pred,gt,mae_hu,mse,rmse,psnr_db,ssim,ms_ssim,dice,hd95_mm,nsd";

fn csv_cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

fn append_csv(path: &PathBuf, pred: &str, gt: &str, rep: &MetricsReport) -> CliResult<()> {
    let new_file = !path.exists();
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut text = String::new();
    if new_file {
        text.push_str(CSV_HEADER);
        text.push('\n');
    }
    text.push_str(&format!(
        "{pred},{gt},{},{},{},{},{},{},{},{},{}\n",
        csv_cell(rep.mae_hu),
        csv_cell(rep.mse),
        csv_cell(rep.rmse),
        csv_cell(rep.psnr_db),
        csv_cell(rep.ssim),
        csv_cell(rep.ms_ssim),
        csv_cell(rep.dice),
        csv_cell(rep.hd95_mm),
        csv_cell(rep.nsd),
    ));
    file.write_all(text.as_bytes())
        .map_err(|e| CliError::Data(format!("cannot append {}: {e}", path.display())))
}

pub fn run(args: MetricsArgs) -> CliResult<()> {
    let pred = util::read_volume(&args.pred)?;
    let gt = util::read_volume(&args.gt)?;
    let eval_mask = args.mask.as_deref().map(util::read_mask).transpose()?;
    let pred_mask = args.pred_mask.as_deref().map(util::read_mask).transpose()?;
    let gt_mask = args.gt_mask.as_deref().map(util::read_mask).transpose()?;

    let config = MetricsConfig {
        data_range: args.data_range,
        nsd_tolerance_mm: args.nsd_tol,
        hd95_convention: match args.hd95_convention.as_str() {
            "pooled" => Hd95Convention::PooledSymmetric,
            "max" => Hd95Convention::MaxOfDirected,
            other => {
                return Err(CliError::Usage(format!(
                    "--hd95-convention must be pooled or max, got {other:?}"
                )))
            }
        },
        ..MetricsConfig::default()
    };

    let rep = report(
        &pred,
        &gt,
        eval_mask.as_ref(),
        pred_mask.as_ref(),
        gt_mask.as_ref(),
        &config,
    )?;

    if let Some(csv) = &args.csv {
        append_csv(
            csv,
            &args.pred.display().to_string(),
            &args.gt.display().to_string(),
            &rep,
        )?;
    }
    util::emit_json(&rep, &args.output)
}
