use std::path::PathBuf;

use clap::{Args, ValueEnum};
use phml_core::vectorize::grid_from_csv;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::{read_text, write_atomic, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Palette {
    /// Blue below zero, gray at zero, red above; written as PPM (P6)
    Diverging,
    /// Black at the minimum to white at the maximum; written as PGM (P5)
    Sequential,
}

#[derive(Debug, Args, Serialize)]
pub struct RenderArgs {
    /// Square CSV grid: a landscape or an attribution map, birth-major
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Palette::Diverging)]
    pub palette: Palette,
}

#[derive(Debug, Serialize)]
struct Sidecar {
    palette: Palette,
    width: usize,
    height: usize,
    min: f64,
    max: f64,
    /// Value mapped to full intensity: max |value| for the diverging
    /// palette, the maximum for the sequential one.
    scale: f64,
}

const GRAY: [f64; 3] = [128.0; 3];
const BLUE: [f64; 3] = [0.0, 0.0, 255.0];
const RED: [f64; 3] = [255.0, 0.0, 0.0];

fn mix(from: [f64; 3], to: [f64; 3], t: f64) -> [u8; 3] {
    let c = |k: usize| (from[k] + t * (to[k] - from[k])).round().clamp(0.0, 255.0) as u8;
    [c(0), c(1), c(2)]
}

/// Image row `r` shows persistence bin `r`; column `c` shows birth bin `c`.
fn pixel_order(bins: usize) -> impl Iterator<Item = usize> {
    (0..bins).flat_map(move |r| (0..bins).map(move |c| c * bins + r))
}

pub fn run(args: &RenderArgs) -> CliResult<()> {
    let text = read_text(&args.input, "")?;
    let (values, bins) = grid_from_csv(&text).map_err(|e| CliError::Data(format!("{}: {e}", args.input.display())))?;
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mut bytes = Vec::new();
    let scale = match args.palette {
        Palette::Diverging => {
            let m = min.abs().max(max.abs());
            bytes.extend_from_slice(format!("P6\n{bins} {bins}\n255\n").as_bytes());
            for k in pixel_order(bins) {
                let t = if m > 0.0 { values[k] / m } else { 0.0 };
                let rgb = if t < 0.0 { mix(GRAY, BLUE, -t) } else { mix(GRAY, RED, t) };
                bytes.extend_from_slice(&rgb);
            }
            m
        }
        Palette::Sequential => {
            bytes.extend_from_slice(format!("P5\n{bins} {bins}\n255\n").as_bytes());
            let span = max - min;
            for k in pixel_order(bins) {
                let t = if span > 0.0 { (values[k] - min) / span } else { 0.0 };
                bytes.push((255.0 * t).round() as u8);
            }
            max
        }
    };
    write_atomic(&args.out, &bytes)?;
    let mut sidecar = args.out.clone().into_os_string();
    sidecar.push(".json");
    write_json(
        &PathBuf::from(sidecar),
        &Sidecar {
            palette: args.palette,
            width: bins,
            height: bins,
            min,
            max,
            scale,
        },
    )?;
    println!("render: {bins}x{bins} image at {}", args.out.display());
    Ok(())
}
