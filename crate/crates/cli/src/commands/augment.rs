use std::path::PathBuf;

use clap::Args;

use voxdiff::augment::{AugmentConfig, Augmenter};
use voxdiff::rng;

use crate::util::{self, CliResult};

#[derive(Args)]
pub struct AugmentArgs {
    /// Input volume.
    #[arg(long)]
    input: PathBuf,
    /// Output volume path.
    #[arg(long)]
    output: PathBuf,
    /// AugmentConfig JSON; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

pub fn run(args: AugmentArgs) -> CliResult<()> {
    let mut cfg: AugmentConfig = util::load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let seed = cfg.seed;
    let v = util::read_volume(&args.input)?;
    let augmenter = Augmenter::new(cfg)?;
    let out = augmenter.apply_random(&v, &mut rng::master(seed))?;
    util::write_volume(&out, &args.output)
}
