use std::path::PathBuf;

use clap::Args;
use phml_core::geometry::{format_xyz, generate_structure, synthetic_target, ParamVector, SyntheticSpec};
use phml_core::pipeline::PipelineConfig;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::{append_run_log, write_atomic, write_json};
use crate::manifest::{Item, Manifest, Seeds, MANIFEST_FORMAT};
use crate::RunRecord;

#[derive(Debug, Args, Serialize)]
pub struct GenDataArgs {
    /// Number of structures, drawn without replacement from the parameter vocabulary
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Inner radius of the void shell scored as the synthetic target
    #[arg(long, default_value_t = SyntheticSpec::default().probe_radius)]
    pub probe_radius: f64,
}

pub fn run(args: &GenDataArgs) -> CliResult<()> {
    let mut vocab = ParamVector::vocabulary();
    if args.count == 0 || args.count > vocab.len() {
        return Err(CliError::Usage(format!(
            "--count must be between 1 and {} (the number of distinct parameter vectors)",
            vocab.len()
        )));
    }
    if !(args.probe_radius > 0.0) {
        return Err(CliError::Usage("--probe-radius must be > 0".into()));
    }
    vocab.shuffle(&mut ChaCha8Rng::seed_from_u64(args.seed));
    vocab.truncate(args.count);
    let synthetic = SyntheticSpec {
        probe_radius: args.probe_radius,
        ..SyntheticSpec::default()
    };
    let width = args.count.to_string().len().max(4);

    let items: Vec<(Item, String)> = vocab
        .par_iter()
        .enumerate()
        .map(|(k, params)| {
            let cloud = generate_structure(params, &synthetic)?;
            let target = synthetic_target(&cloud, &synthetic.grid, synthetic.probe_radius)?;
            let id = format!("s{k:0width$}");
            let item = Item {
                cloud: format!("clouds/{id}.xyz"),
                id,
                params: params.clone(),
                target,
                prediction: None,
            };
            Ok((item, format_xyz(&cloud)))
        })
        .collect::<Result<_, phml_core::Error>>()?;

    for (item, xyz) in &items {
        write_atomic(&args.out_dir.join(&item.cloud), xyz.as_bytes())?;
    }
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        dataset_id: format!("synthetic-{}-{}", args.seed, args.count),
        seeds: Seeds { data: args.seed },
        grid: synthetic.grid,
        synthetic,
        pipeline: PipelineConfig::default(),
        items: items.into_iter().map(|(i, _)| i).collect(),
    };
    write_json(&args.out_dir.join("manifest.json"), &manifest)?;
    append_run_log(&args.out_dir, &RunRecord::new("gen-data", args))?;
    println!("wrote {} structures to {}", args.count, args.out_dir.display());
    Ok(())
}
