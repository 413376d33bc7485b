use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use phml_core::explain::{
    grid_based_explanation, higher_order, influential_cycles, param_attribution, pixel_attribution,
    PixelAttributionMap, DEFAULT_PIXEL_QUANTILE,
};
use phml_core::geometry::{format_xyz, pairwise_distances, perturb, ParamVector};
use phml_core::persistence::{build_rips, diagram_from_records, reduce, representative_cycle};
use phml_core::pipeline::ModelScorer;
use phml_core::vectorize::{grid_to_csv, pixel_of};
use phml_core::xai::{SimilaritySpec, DEFAULT_RATIO, DEFAULT_STEPS};
use serde::Serialize;

use crate::commands::pipeline::{load_diagram, load_features, load_model};
use crate::error::{CliError, CliResult};
use crate::io::{append_run_log, write_atomic, write_json};
use crate::manifest::Dataset;
use crate::RunRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// IGCS over landscape pixels, plus the diagram pairs behind the top pixels
    Pixels,
    /// Exact Cohort Shapley over the four generator parameters
    Params,
    /// Grid-based explanation against a perturbation cohort of the target
    Grid,
    /// Pixel attributions decomposed by generator parameter
    Higher,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Pixels => "pixels",
            Mode::Params => "params",
            Mode::Grid => "grid",
            Mode::Higher => "higher",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    Prediction,
    Target,
}

#[derive(Debug, Args, Serialize)]
pub struct ExplainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Item id of the explained structure
    #[arg(long)]
    pub target: String,
    /// Midpoint-rule steps of IGCS
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,
    /// Similarity threshold as a fraction of each feature's range
    #[arg(long, default_value_t = DEFAULT_RATIO)]
    pub ratio: f64,
    /// Displacement of every point in the grid-mode cohort
    #[arg(long, default_value_t = 1.0)]
    pub perturb_length: f64,
    /// Number of perturbed copies in the grid-mode cohort
    #[arg(long, default_value_t = 100)]
    pub cohort_size: usize,
    /// Higher mode decomposes the pixels above this |attribution| quantile
    #[arg(long, default_value_t = DEFAULT_PIXEL_QUANTILE)]
    pub pixel_quantile: f64,
    /// Pixels per homology dimension reported as influential (pixels mode)
    #[arg(long, default_value_t = 5)]
    pub top_k: usize,
    /// Output explained in params mode
    #[arg(long, value_enum, default_value_t = Output::Prediction)]
    pub output: Output,
    /// Seed of the grid-mode perturbations
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory [default: <manifest dir>/explain/<mode>-<target>]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

pub fn run(args: &ExplainArgs) -> CliResult<()> {
    if args.steps == 0 {
        return Err(CliError::Usage("--steps must be >= 1".into()));
    }
    if !(args.ratio > 0.0 && args.ratio <= 1.0) {
        return Err(CliError::Usage("--ratio must lie in (0, 1]".into()));
    }
    let data = Dataset::load(&args.manifest)?;
    let target = data.item_index(&args.target)?;
    let out = args
        .out_dir
        .clone()
        .unwrap_or_else(|| data.explain_dir(args.mode.name(), &args.target));
    match args.mode {
        Mode::Pixels => pixels(&data, target, args, &out)?,
        Mode::Params => params(&data, target, args, &out)?,
        Mode::Grid => grid(&data, target, args, &out)?,
        Mode::Higher => higher(&data, target, args, &out)?,
    }
    append_run_log(&data.dir, &RunRecord::new("explain", args))?;
    println!("explain {}: wrote {}", args.mode.name(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct MapSummary<'a> {
    target: &'a str,
    mode: &'static str,
    steps: usize,
    ratio: f64,
    bins: usize,
    baseline: f64,
    total: f64,
    sum: f64,
    completeness_gap: f64,
}

fn write_map(map: &PixelAttributionMap, out: &Path, prefix: &str) -> CliResult<()> {
    write_atomic(&out.join(format!("{prefix}h1.csv")), grid_to_csv(&map.h1, map.bins).as_bytes())?;
    write_atomic(&out.join(format!("{prefix}h2.csv")), grid_to_csv(&map.h2, map.bins).as_bytes())
}

fn summary<'a>(map: &PixelAttributionMap, args: &'a ExplainArgs) -> MapSummary<'a> {
    MapSummary {
        target: &args.target,
        mode: args.mode.name(),
        steps: args.steps,
        ratio: args.ratio,
        bins: map.bins,
        baseline: map.baseline,
        total: map.total,
        sum: map.sum(),
        completeness_gap: (map.sum() - (map.total - map.baseline)).abs(),
    }
}

#[derive(Serialize)]
struct MatchedPair {
    birth: f64,
    death: f64,
    /// Point indices of the pair's representative cycle.
    cycle_vertices: Vec<usize>,
}

#[derive(Serialize)]
struct InfluentialEntry {
    dimension: usize,
    birth_bin: usize,
    persistence_bin: usize,
    value: f64,
    pairs: Vec<MatchedPair>,
}

fn pixels(data: &Dataset, target: usize, args: &ExplainArgs, out: &Path) -> CliResult<()> {
    let x = load_features(data)?;
    let y = data.predictions()?;
    let spec = SimilaritySpec::continuous(x[0].len(), args.ratio);
    let map = pixel_attribution(&x, &y, target, &spec, args.steps)?;
    write_map(&map, out, "")?;
    write_json(&out.join("attribution.json"), &summary(&map, args))?;

    let item = &data.manifest.items[target];
    let config = data.manifest.pipeline;
    let file = load_diagram(data, &item.id)?;
    let cloud = data.load_cloud(item)?;
    let filtration = build_rips(&pairwise_distances(&cloud), file.max_dim, file.max_radius)?;
    let pairs = reduce(&filtration);
    let mut entries = Vec::new();
    for hspec in [config.h1, config.h2] {
        let dg = diagram_from_records(&file.pairs, hspec.dimension)?;
        for pixel in influential_cycles(&map, &dg, &hspec, args.top_k)? {
            let matched = pixel
                .pairs
                .iter()
                .map(|p| {
                    let full = pairs
                        .iter()
                        .find(|q| q.dimension == p.dimension && q.birth == p.birth && q.death == p.death)
                        .ok_or_else(|| {
                            CliError::Data(format!("diagram of {} is stale (rerun the ph stage)", item.id))
                        })?;
                    Ok(MatchedPair {
                        birth: p.birth,
                        death: p.death,
                        cycle_vertices: representative_cycle(&filtration, full)?.vertex_set,
                    })
                })
                .collect::<CliResult<_>>()?;
            entries.push(InfluentialEntry {
                dimension: pixel.dimension,
                birth_bin: pixel.birth_bin,
                persistence_bin: pixel.persistence_bin,
                value: pixel.value,
                pairs: matched,
            });
        }
    }
    write_json(&out.join("influential.json"), &entries)
}

fn params(data: &Dataset, target: usize, args: &ExplainArgs, out: &Path) -> CliResult<()> {
    let params: Vec<ParamVector> = data.manifest.items.iter().map(|i| i.params.clone()).collect();
    let y = match args.output {
        Output::Prediction => data.predictions()?,
        Output::Target => data.manifest.items.iter().map(|i| i.target).collect(),
    };
    let a = param_attribution(&params, &y, target)?;
    #[derive(Serialize)]
    struct ParamsFile<'a> {
        target: &'a str,
        output: Output,
        #[serde(flatten)]
        attribution: phml_core::xai::Attribution,
    }
    write_json(
        &out.join("params.json"),
        &ParamsFile {
            target: &args.target,
            output: args.output,
            attribution: a,
        },
    )
}

fn grid(data: &Dataset, target: usize, args: &ExplainArgs, out: &Path) -> CliResult<()> {
    if args.cohort_size == 0 {
        return Err(CliError::Usage("--cohort-size must be >= 1".into()));
    }
    if !(args.perturb_length > 0.0) {
        return Err(CliError::Usage("--perturb-length must be > 0".into()));
    }
    let model = load_model(data)?;
    let item = &data.manifest.items[target];
    let cloud = data.load_cloud(item)?;
    let cohort = (0..args.cohort_size as u64)
        .map(|k| perturb(&cloud, args.perturb_length, args.seed.wrapping_add(k)))
        .collect::<Result<Vec<_>, _>>()?;
    let scorer = ModelScorer {
        forest: &model,
        config: data.manifest.pipeline,
    };
    let g = grid_based_explanation(&cloud, &cohort, &scorer, &data.manifest.grid, args.steps, args.ratio)?;
    for (k, c) in cohort.iter().enumerate() {
        write_atomic(&out.join("cohort").join(format!("{k:04}.xyz")), format_xyz(c).as_bytes())?;
    }
    let mut csv = String::from("index,label,x,y,z,value\n");
    for p in &g.points {
        let [x, y, z] = cloud.points[p.index];
        csv.push_str(&format!("{},{},{x},{y},{z},{}\n", p.index, cloud.label(p.index), p.value));
    }
    write_atomic(&out.join("points.csv"), csv.as_bytes())?;
    write_json(&out.join("grid.json"), &g)
}

fn higher(data: &Dataset, target: usize, args: &ExplainArgs, out: &Path) -> CliResult<()> {
    let x = load_features(data)?;
    let y = data.predictions()?;
    let params: Vec<ParamVector> = data.manifest.items.iter().map(|i| i.params.clone()).collect();
    let spec = SimilaritySpec::continuous(x[0].len(), args.ratio);
    let h = higher_order(&params, &x, &y, target, None, args.pixel_quantile, &spec, args.steps)?;
    write_map(&h.first_order, out, "first_order_")?;
    let bins = h.first_order.bins;
    for (name, m) in h.param_names.iter().zip(&h.maps) {
        let map = PixelAttributionMap::from_flat(m, 0.0, 0.0)?;
        write_map(&map, out, &format!("{name}_"))?;
    }
    #[derive(Serialize)]
    struct Pixel {
        dimension: usize,
        birth_bin: usize,
        persistence_bin: usize,
        first_order: f64,
        baseline: f64,
        total: f64,
        values: Vec<f64>,
    }
    #[derive(Serialize)]
    struct HigherFile<'a> {
        target: &'a str,
        steps: usize,
        ratio: f64,
        pixel_quantile: f64,
        param_names: &'a [String],
        computed: Vec<Pixel>,
    }
    let first = h.first_order.flat();
    let computed = h
        .computed
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let (dimension, birth_bin, persistence_bin) = pixel_of(p, bins);
            Pixel {
                dimension,
                birth_bin,
                persistence_bin,
                first_order: first[p],
                baseline: h.baselines[k],
                total: h.totals[k],
                values: h.pixel_values(p),
            }
        })
        .collect();
    write_json(
        &out.join("higher.json"),
        &HigherFile {
            target: &args.target,
            steps: args.steps,
            ratio: args.ratio,
            pixel_quantile: args.pixel_quantile,
            param_names: &h.param_names,
            computed,
        },
    )
}
