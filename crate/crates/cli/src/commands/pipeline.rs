use std::path::PathBuf;

use clap::{Args, ValueEnum};
use phml_core::forest::{self, Forest, TrainConfig, MODEL_FORMAT};
use phml_core::persistence::{diagram_from_records, diagram_records, DiagramRecord};
use phml_core::pipeline::{featurize_diagrams, persistence_pairs};
use phml_core::vectorize::grid_to_csv;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::{append_run_log, read_json, read_text, table_from_csv, table_to_csv, write_atomic, write_json};
use crate::manifest::Dataset;
use crate::RunRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ph,
    Vectorize,
    Train,
    Predict,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Importance {
    Impurity,
    Permutation,
}

#[derive(Debug, Args, Serialize)]
pub struct PipelineArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum)]
    pub stage: Stage,
    /// Highest simplex dimension of the Rips complex (2 or 3) [manifest: 3]
    #[arg(long)]
    pub max_dim: Option<usize>,
    /// Rips scale cutoff [manifest: 35.8]
    #[arg(long)]
    pub max_radius: Option<f64>,
    /// Histogram bins per axis, both dimensions [manifest: 54]
    #[arg(long)]
    pub bins: Option<usize>,
    /// Gaussian blur sigma in axis units, both dimensions; 0 disables [manifest: 0.15]
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub h1_birth_max: Option<f64>,
    #[arg(long)]
    pub h1_pers_max: Option<f64>,
    #[arg(long)]
    pub h2_birth_max: Option<f64>,
    #[arg(long)]
    pub h2_pers_max: Option<f64>,
    #[arg(long, default_value_t = 500)]
    pub trees: usize,
    /// Share of items used for training; the rest is the holdout set
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Seed of the train/holdout split and of the forest
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Importance::Impurity)]
    pub importance: Importance,
    /// Shuffles per feature for permutation importance
    #[arg(long, default_value_t = 5)]
    pub permutation_repeats: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DiagramFile {
    pub id: String,
    pub max_dim: usize,
    pub max_radius: f64,
    pub pairs: Vec<DiagramRecord>,
}

#[derive(Debug, Serialize)]
struct Metrics {
    model_format: &'static str,
    trees: usize,
    seed: u64,
    train_size: usize,
    holdout_size: usize,
    train_r2: Option<f64>,
    holdout_r2: Option<f64>,
    importance: Importance,
    holdout_ids: Vec<String>,
}

pub fn run(args: &PipelineArgs) -> CliResult<()> {
    let mut data = Dataset::load(&args.manifest)?;
    let stages: &[Stage] = match args.stage {
        Stage::All => &[Stage::Ph, Stage::Vectorize, Stage::Train, Stage::Predict],
        ref s => std::slice::from_ref(s),
    };
    for stage in stages {
        match stage {
            Stage::Ph => ph(&mut data, args)?,
            Stage::Vectorize => vectorize(&mut data, args)?,
            Stage::Train => train(&data, args)?,
            Stage::Predict => predict(&mut data)?,
            Stage::All => unreachable!(),
        }
    }
    append_run_log(&data.dir, &RunRecord::new("pipeline", args))
}

fn ph(data: &mut Dataset, args: &PipelineArgs) -> CliResult<()> {
    let config = &mut data.manifest.pipeline;
    if let Some(d) = args.max_dim {
        config.max_dim = d;
    }
    if let Some(r) = args.max_radius {
        config.max_radius = r;
    }
    let config = *config;
    let files: Vec<DiagramFile> = data
        .manifest
        .items
        .par_iter()
        .map(|item| {
            let cloud = data.load_cloud(item)?;
            let pairs = persistence_pairs(&cloud, &config)?;
            Ok(DiagramFile {
                id: item.id.clone(),
                max_dim: config.max_dim,
                max_radius: config.max_radius,
                pairs: diagram_records(&pairs),
            })
        })
        .collect::<CliResult<_>>()?;
    for f in &files {
        write_json(&data.diagram_path(&f.id), f)?;
    }
    data.save()?;
    println!("ph: {} diagrams", files.len());
    Ok(())
}

pub fn load_diagram(data: &Dataset, id: &str) -> CliResult<DiagramFile> {
    read_json(&data.diagram_path(id), " (run `phml pipeline --stage ph`)")
}

pub fn feature_header(bins: usize) -> Vec<String> {
    let mut header = vec!["id".to_string()];
    for dim in 1..=2 {
        for b in 0..bins {
            for p in 0..bins {
                header.push(format!("h{dim}_{b}_{p}"));
            }
        }
    }
    header
}

fn vectorize(data: &mut Dataset, args: &PipelineArgs) -> CliResult<()> {
    let config = &mut data.manifest.pipeline;
    for spec in [&mut config.h1, &mut config.h2] {
        if let Some(b) = args.bins {
            spec.bins = b;
        }
        if let Some(s) = args.sigma {
            spec.blur_sigma = s;
        }
    }
    let overrides = [
        (&mut config.h1.birth_max, args.h1_birth_max),
        (&mut config.h1.persistence_max, args.h1_pers_max),
        (&mut config.h2.birth_max, args.h2_birth_max),
        (&mut config.h2.persistence_max, args.h2_pers_max),
    ];
    for (slot, value) in overrides {
        if let Some(v) = value {
            *slot = v;
        }
    }
    let config = *config;
    config.h1.validate()?;
    config.h2.validate()?;

    let rows: Vec<(String, String, Vec<f64>)> = data
        .manifest
        .items
        .par_iter()
        .map(|item| {
            let file = load_diagram(data, &item.id)?;
            let d1 = diagram_from_records(&file.pairs, 1)?;
            let d2 = diagram_from_records(&file.pairs, 2)?;
            let (l1, l2, v) = featurize_diagrams(&d1, &d2, &config)?;
            Ok((
                grid_to_csv(&l1.image.values, config.h1.bins),
                grid_to_csv(&l2.image.values, config.h2.bins),
                v.0,
            ))
        })
        .collect::<CliResult<_>>()?;
    let ids: Vec<String> = data.manifest.items.iter().map(|i| i.id.clone()).collect();
    let mut features = Vec::with_capacity(rows.len());
    for (id, (h1, h2, v)) in ids.iter().zip(rows) {
        write_atomic(&data.landscape_path(id, 1), h1.as_bytes())?;
        write_atomic(&data.landscape_path(id, 2), h2.as_bytes())?;
        features.push(v);
    }
    let csv = table_to_csv(&feature_header(config.h1.bins), &ids, &features);
    write_atomic(&data.features_path(), csv.as_bytes())?;
    data.save()?;
    println!("vectorize: {} x {} features", ids.len(), features.first().map_or(0, Vec::len));
    Ok(())
}

/// Feature rows in manifest item order.
pub fn load_features(data: &Dataset) -> CliResult<Vec<Vec<f64>>> {
    let path = data.features_path();
    let table = table_from_csv(&read_text(&path, " (run `phml pipeline --stage vectorize`)")?, &path)?;
    let ids: Vec<&str> = data.manifest.items.iter().map(|i| i.id.as_str()).collect();
    if table.ids != ids {
        return Err(CliError::Data(format!(
            "{} does not list the manifest items in order (rerun the vectorize stage)",
            path.display()
        )));
    }
    Ok(table.rows)
}

pub fn load_model(data: &Dataset) -> CliResult<Forest> {
    let path = data.model_path();
    let text = read_text(&path, " (run `phml pipeline --stage train`)")?;
    Forest::from_json(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Training and holdout indices: a seeded shuffle split, each part sorted.
fn split(n: usize, fraction: f64, seed: u64) -> CliResult<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CliError::Usage("--train-fraction must lie in (0, 1]".into()));
    }
    let n_train = (fraction * n as f64).round() as usize;
    if n_train < 2 {
        return Err(CliError::Data(format!("{n_train} training items; need at least 2")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = order[..n_train].to_vec();
    let mut holdout = order[n_train..].to_vec();
    train.sort_unstable();
    holdout.sort_unstable();
    Ok((train, holdout))
}

fn r2_or_none(predictions: &[f64], targets: &[f64]) -> Option<f64> {
    forest::r2(predictions, targets).ok()
}

fn train(data: &Dataset, args: &PipelineArgs) -> CliResult<()> {
    if args.trees == 0 {
        return Err(CliError::Usage("--trees must be >= 1".into()));
    }
    let x = load_features(data)?;
    let y: Vec<f64> = data.manifest.items.iter().map(|i| i.target).collect();
    let (train_idx, holdout_idx) = split(x.len(), args.train_fraction, args.seed)?;
    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) {
        (idx.iter().map(|&i| x[i].clone()).collect(), idx.iter().map(|&i| y[i]).collect())
    };
    let (xt, yt) = pick(&train_idx);
    let (xh, yh) = pick(&holdout_idx);
    let config = TrainConfig {
        n_trees: args.trees,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let model = forest::train(&xt, &yt, &config)?;
    let train_r2 = r2_or_none(&forest::predict_all(&model, &xt)?, &yt);
    let holdout_r2 = if xh.is_empty() {
        None
    } else {
        r2_or_none(&forest::predict_all(&model, &xh)?, &yh)
    };

    let importance = match args.importance {
        Importance::Impurity => forest::impurity_importance(&model),
        Importance::Permutation => {
            let (xi, yi) = if xh.len() >= 2 { (&xh, &yh) } else { (&xt, &yt) };
            forest::permutation_importance(&model, xi, yi, args.permutation_repeats, args.seed)?
        }
    };
    let header = feature_header(data.manifest.pipeline.h1.bins);
    let mut csv = String::from("feature,importance\n");
    for (name, v) in header[1..].iter().zip(&importance) {
        csv.push_str(&format!("{name},{v}\n"));
    }

    write_atomic(&data.model_path(), model.to_json()?.as_bytes())?;
    write_atomic(&data.importance_path(), csv.as_bytes())?;
    let metrics = Metrics {
        model_format: MODEL_FORMAT,
        trees: args.trees,
        seed: args.seed,
        train_size: train_idx.len(),
        holdout_size: holdout_idx.len(),
        train_r2,
        holdout_r2,
        importance: args.importance,
        holdout_ids: holdout_idx.iter().map(|&i| data.manifest.items[i].id.clone()).collect(),
    };
    write_json(&data.metrics_path(), &metrics)?;
    match holdout_r2 {
        Some(r) => println!("train: {} trees, holdout R2 {r:.4} on {} items", args.trees, holdout_idx.len()),
        None => println!("train: {} trees, no holdout R2", args.trees),
    }
    Ok(())
}

fn predict(data: &mut Dataset) -> CliResult<()> {
    let model = load_model(data)?;
    let x = load_features(data)?;
    let predictions = forest::predict_all(&model, &x)?;
    let mut csv = String::from("id,target,prediction\n");
    for (item, p) in data.manifest.items.iter_mut().zip(&predictions) {
        item.prediction = Some(*p);
        csv.push_str(&format!("{},{},{p}\n", item.id, item.target));
    }
    write_atomic(&data.predictions_path(), csv.as_bytes())?;
    data.save()?;
    println!("predict: {} items", predictions.len());
    Ok(())
}
