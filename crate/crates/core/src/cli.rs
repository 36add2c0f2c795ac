//! Command-line front end: `decompose`, `evaluate`, `generate` and `bench`.
//!
//! Every command reports through the writers handed to [`run`], so the whole
//! surface can be driven in-process. Exit codes: 0 on success, 2 for usage
//! and input errors, 3 when an internal invariant breaks.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::clustering::{
    nnsc_decompose_with_threads, nnsc_single_run, slic_baseline, NnscParams, PatchNorm,
};
use crate::datasets::{generate_composite, two_texture_config, CompositeConfig, Layout, TextureSpec};
use crate::error::{Error, Result};
use crate::image::{LabImage, LabelMap};
use crate::io::{self, Manifest};
use crate::metrics::asa;
use crate::state::GridConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "nnsc", version, about = "Texture-aware superpixels via patch-based nearest-neighbor clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decompose an image into superpixels.
    Decompose(DecomposeArgs),
    /// Score a label map against a ground-truth segmentation (ASA).
    Evaluate(EvaluateArgs),
    /// Generate a synthetic texture composite with its ground truth.
    Generate(GenerateArgs),
    /// Compare cost-evaluation counters and wall-clock of NNSC and SLIC.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Nnsc,
    Slic,
}

impl Method {
    fn as_str(self) -> &'static str {
        match self {
            Method::Nnsc => "nnsc",
            Method::Slic => "slic",
        }
    }
}

#[derive(Debug, Args)]
struct DecomposeArgs {
    /// Input image (8-bit gray or RGB).
    #[arg(long = "in", value_name = "PATH")]
    input: Option<PathBuf>,
    /// Output label map (.png: 16-bit, .csv: text).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    k: usize,
    #[arg(long, value_enum, default_value_t = Method::Nnsc)]
    method: Method,
    #[arg(long, default_value_t = 7)]
    patch_side: usize,
    #[arg(long, default_value_t = 3)]
    sigma: usize,
    /// Iterations per estimation (default 8 for nnsc, 10 for slic).
    #[arg(long)]
    iters: Option<usize>,
    /// Number of aggregated NNSC estimations.
    #[arg(long, default_value_t = 4)]
    estimations: usize,
    /// SLIC compactness.
    #[arg(long, default_value_t = 10)]
    m: u32,
    /// NNSC base regularity.
    #[arg(long, default_value_t = 10.0)]
    m0: f64,
    #[arg(long)]
    adaptive_m: bool,
    #[arg(long, default_value_t = 10.0)]
    sigma_ref: f64,
    /// Patch dissimilarity: msd (mean squared) or l2 (norm over n).
    #[arg(long, default_value = "msd")]
    patch_norm: PatchNorm,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for the estimations (does not change results).
    #[arg(long)]
    threads: Option<usize>,
    /// Write the image with superpixel boundaries highlighted.
    #[arg(long, value_name = "PATH")]
    overlay: Option<PathBuf>,
    /// Write a key=value manifest of the run.
    #[arg(long, value_name = "PATH")]
    manifest: Option<PathBuf>,
    /// Re-run the decomposition recorded in a manifest. Output paths given on
    /// the command line take precedence over the recorded ones.
    #[arg(long, value_name = "PATH")]
    replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Label map to score.
    #[arg(long, value_name = "PATH")]
    labels: PathBuf,
    /// Ground-truth label map.
    #[arg(long, value_name = "PATH")]
    gt: PathBuf,
    /// Manifest to create or update with the score.
    #[arg(long, value_name = "PATH")]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value = "2x2")]
    layout: Layout,
    /// Texture spec `kind:frequency:orientation:mean:amplitude:noise_seed`,
    /// once per tile. Without specs, two random textures alternate over the
    /// tiles.
    #[arg(long = "spec", value_name = "SPEC")]
    specs: Vec<TextureSpec>,
    /// Shift every tile to the mean level of the first spec.
    #[arg(long)]
    equal_mean: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 256)]
    height: usize,
    /// Maximal displacement of the tile cuts (default: a quarter tile).
    #[arg(long)]
    jitter: Option<usize>,
    /// Output image (8-bit gray PNG).
    #[arg(long, value_name = "PATH", default_value = "composite.png")]
    out: PathBuf,
    /// Ground-truth output (default: `<out stem>_gt.png`).
    #[arg(long, value_name = "PATH")]
    gt: Option<PathBuf>,
    /// Manifest output (default: `<out stem>_manifest.txt`).
    #[arg(long, value_name = "PATH")]
    manifest: Option<PathBuf>,
    /// Regenerate the composite recorded in a manifest.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["specs", "layout", "equal_mean", "seed", "width", "height", "jitter"])]
    from_manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Square image sides to benchmark, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [64usize, 128, 192, 256])]
    sizes: Vec<usize>,
    /// Grid step; K is chosen per size so the step stays fixed.
    #[arg(long, default_value_t = 16)]
    step: usize,
    #[arg(long, default_value_t = 8)]
    iters: usize,
    #[arg(long, default_value_t = 10)]
    m: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Decompose(a) => decompose(a, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::Generate(a) => generate(a, out),
        Command::Bench(a) => bench(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Invariant(_) => EXIT_INVARIANT,
        _ => EXIT_INPUT,
    }
}

fn emit(out: &mut dyn Write, line: std::fmt::Arguments<'_>) -> Result<()> {
    writeln!(out, "{line}").map_err(|source| Error::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

/// A fully resolved decomposition request.
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposeJob {
    pub input: PathBuf,
    pub out: PathBuf,
    pub overlay: Option<PathBuf>,
    pub method: Method,
    pub params: NnscParams,
    /// SLIC compactness.
    pub slic_m: u32,
    pub threads: usize,
}

impl DecomposeJob {
    pub fn to_manifest(&self) -> Manifest {
        let p = &self.params;
        let mut m = Manifest::new();
        m.set("command", "decompose")
            .set("input", self.input.display())
            .set("output", self.out.display());
        if let Some(o) = &self.overlay {
            m.set("overlay", o.display());
        }
        m.set("method", self.method.as_str())
            .set("k", p.k)
            .set("patch_side", p.patch_side)
            .set("sigma", p.sigma)
            .set("iterations", p.iterations)
            .set("estimations", p.estimations)
            .set("m", self.slic_m)
            .set("m0", p.m0)
            .set("adaptive_m", p.adaptive_m)
            .set("sigma_ref", p.sigma_ref)
            .set("patch_norm", p.patch_norm)
            .set("seed", p.seed)
            .set("threads", self.threads);
        m
    }

    pub fn from_manifest(m: &Manifest) -> Result<Self> {
        let method = match m.parse::<String>("method")?.as_str() {
            "nnsc" => Method::Nnsc,
            "slic" => Method::Slic,
            other => return Err(Error::input(format!("unknown method '{other}'"))),
        };
        Ok(DecomposeJob {
            input: m.parse("input")?,
            out: m.parse("output")?,
            overlay: m.get("overlay").map(PathBuf::from),
            method,
            params: NnscParams {
                k: m.parse("k")?,
                patch_side: m.parse("patch_side")?,
                sigma: m.parse("sigma")?,
                iterations: m.parse("iterations")?,
                estimations: m.parse("estimations")?,
                m0: m.parse("m0")?,
                adaptive_m: m.parse("adaptive_m")?,
                sigma_ref: m.parse("sigma_ref")?,
                patch_norm: m.parse("patch_norm")?,
                seed: m.parse("seed")?,
            },
            slic_m: m.parse("m")?,
            threads: m.parse("threads")?,
        })
    }
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn resolve_decompose(a: DecomposeArgs) -> Result<(DecomposeJob, Option<PathBuf>)> {
    if let Some(path) = &a.replay {
        let mut job = DecomposeJob::from_manifest(&Manifest::read(path)?)?;
        if let Some(out) = a.out {
            job.out = out;
        }
        if a.overlay.is_some() {
            job.overlay = a.overlay;
        }
        if let Some(t) = a.threads {
            job.threads = t;
        }
        return Ok((job, a.manifest));
    }
    let input = a
        .input
        .ok_or_else(|| Error::input("--in is required (or --replay a manifest)"))?;
    let out = a
        .out
        .ok_or_else(|| Error::input("--out is required (or --replay a manifest)"))?;
    let iterations = a.iters.unwrap_or(match a.method {
        Method::Nnsc => 8,
        Method::Slic => 10,
    });
    let job = DecomposeJob {
        input,
        out,
        overlay: a.overlay,
        method: a.method,
        params: NnscParams {
            k: a.k,
            patch_side: a.patch_side,
            sigma: a.sigma,
            iterations,
            estimations: a.estimations,
            m0: a.m0,
            adaptive_m: a.adaptive_m,
            sigma_ref: a.sigma_ref,
            patch_norm: a.patch_norm,
            seed: a.seed,
        },
        slic_m: a.m,
        threads: a.threads.unwrap_or_else(default_threads),
    };
    Ok((job, a.manifest))
}

fn decompose(a: DecomposeArgs, out: &mut dyn Write) -> Result<()> {
    let (job, manifest_path) = resolve_decompose(a)?;
    let raster = io::load_rgb(&job.input)?;
    let image = LabImage::open(&job.input)?;
    let p = &job.params;

    let start = Instant::now();
    let (labels, grid, evaluations, per_iteration) = match job.method {
        Method::Nnsc => {
            let d = nnsc_decompose_with_threads(&image, p, job.threads)?;
            let per_iter: Vec<u64> = (0..p.iterations)
                .map(|i| d.runs.iter().map(|r| r.iteration_evaluations[i]).sum())
                .collect();
            let total = d.total_evaluations();
            (d.labels, d.grid, total, per_iter)
        }
        Method::Slic => {
            let s = slic_baseline(&image, p.k, f64::from(job.slic_m), p.iterations)?;
            let total = s.iteration_evaluations.iter().sum();
            (s.labels, s.grid, total, s.iteration_evaluations)
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    check_output(&labels, &grid)?;

    io::save_label_map(&labels, &job.out)?;
    if let Some(path) = &job.overlay {
        io::save_rgb(&io::boundary_overlay(&raster, &labels)?, path)?;
    }
    let count = labels.num_labels();
    emit(out, format_args!("superpixels\t{count}"))?;
    emit(out, format_args!("grid_step\t{}", grid.step))?;
    emit(out, format_args!("seconds\t{seconds:.3}"))?;
    emit(out, format_args!("evaluations\t{evaluations}"))?;
    let per_iter = join(&per_iteration);
    emit(out, format_args!("evaluations_per_iteration\t{per_iter}"))?;

    if let Some(path) = manifest_path {
        let mut m = job.to_manifest();
        m.set("superpixels", count)
            .set("grid_step", grid.step)
            .set("evaluations", evaluations)
            .set("evaluations_per_iteration", per_iter)
            .set("seconds", format!("{seconds:.3}"));
        m.write(path)?;
    }
    Ok(())
}

/// Final label maps are dense and non-empty; anything else is a bug.
fn check_output(labels: &LabelMap, grid: &GridConfig) -> Result<()> {
    let n = labels.num_labels();
    if n == 0 || n > grid.initial_count() || labels.distinct_labels() != n {
        return Err(Error::invariant(format!(
            "decomposition has {} labels over ids 0..{n} (grid had {})",
            labels.distinct_labels(),
            grid.initial_count()
        )));
    }
    Ok(())
}

fn join(values: &[u64]) -> String {
    values
        .iter()
        .map(u64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn evaluate(a: EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let map = io::load_label_map(&a.labels)?;
    let gt = io::load_ground_truth(&a.gt)?;
    let score = asa(&map, &gt)?;
    emit(out, format_args!("{score:.6}"))?;
    if let Some(path) = a.manifest {
        let mut m = if path.exists() {
            Manifest::read(&path)?
        } else {
            Manifest::new()
        };
        m.set("evaluated_labels", a.labels.display())
            .set("ground_truth", a.gt.display())
            .set("gt_regions", gt.region_count())
            .set("asa", format!("{score:.6}"));
        m.write(path)?;
    }
    Ok(())
}

/// Manifest entries describing a composite; enough to regenerate it.
pub fn composite_manifest(config: &CompositeConfig) -> Manifest {
    let mut m = Manifest::new();
    m.set("command", "generate")
        .set("layout", config.layout)
        .set("width", config.width)
        .set("height", config.height)
        .set("seed", config.seed)
        .set("equal_mean", config.equal_mean)
        .set("jitter", config.jitter)
        .set("spec_count", config.specs.len());
    for (i, s) in config.specs.iter().enumerate() {
        m.set(&format!("spec.{i}"), s);
    }
    m
}

pub fn composite_from_manifest(m: &Manifest) -> Result<CompositeConfig> {
    let count: usize = m.parse("spec_count")?;
    let specs = (0..count)
        .map(|i| m.parse(&format!("spec.{i}")))
        .collect::<Result<Vec<TextureSpec>>>()?;
    Ok(CompositeConfig {
        width: m.parse("width")?,
        height: m.parse("height")?,
        layout: m.parse("layout")?,
        specs,
        seed: m.parse("seed")?,
        equal_mean: m.parse("equal_mean")?,
        jitter: m.parse("jitter")?,
    })
}

fn generate(a: GenerateArgs, out: &mut dyn Write) -> Result<()> {
    let config = match &a.from_manifest {
        Some(path) => composite_from_manifest(&Manifest::read(path)?)?,
        None if a.specs.is_empty() => {
            let mut c = two_texture_config(a.seed, a.width, a.height, a.layout);
            c.equal_mean = a.equal_mean;
            if let Some(j) = a.jitter {
                c.jitter = j;
            }
            c
        }
        None => {
            let (cols, rows) = a.layout.tiles();
            CompositeConfig {
                width: a.width,
                height: a.height,
                layout: a.layout,
                specs: a.specs.clone(),
                seed: a.seed,
                equal_mean: a.equal_mean,
                jitter: a
                    .jitter
                    .unwrap_or((a.width / cols).min(a.height / rows) / 4),
            }
        }
    };
    let composite = generate_composite(&config)?;
    let gt_path = a.gt.unwrap_or_else(|| io::sibling(&a.out, "_gt.png"));
    let manifest_path = a
        .manifest
        .unwrap_or_else(|| io::sibling(&a.out, "_manifest.txt"));

    io::save_gray(&composite.image, &a.out)?;
    io::save_ground_truth(&composite.ground_truth, &gt_path)?;
    let mut m = composite_manifest(&config);
    m.set("image", a.out.display()).set("ground_truth", gt_path.display());
    m.write(&manifest_path)?;

    emit(out, format_args!("image\t{}", a.out.display()))?;
    emit(out, format_args!("ground_truth\t{}", gt_path.display()))?;
    emit(out, format_args!("manifest\t{}", manifest_path.display()))?;
    emit(out, format_args!("regions\t{}", composite.ground_truth.region_count()))?;
    Ok(())
}

/// One benchmark row per size and method.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub pixels: usize,
    pub method: Method,
    pub step: usize,
    pub evaluations: u64,
    pub max_iteration_evaluations: u64,
    pub seconds: f64,
}

/// Counts cost evaluations of one NNSC estimation and of the SLIC baseline on
/// square two-texture composites of each side in `sizes`, at a fixed grid
/// step.
pub fn bench_rows(sizes: &[usize], step: usize, iterations: usize, slic_m: f64, seed: u64) -> Result<Vec<BenchRow>> {
    if step == 0 {
        return Err(Error::input("--step must be positive"));
    }
    let mut rows = Vec::new();
    for &side in sizes {
        let config = two_texture_config(seed, side, side, Layout::Grid2x2);
        let image = LabImage::from_gray8(&generate_composite(&config)?.image);
        let k = ((side * side) / (step * step)).max(1);
        let params = NnscParams {
            k,
            iterations,
            estimations: 1,
            seed,
            ..NnscParams::default()
        };
        let start = Instant::now();
        let run = nnsc_single_run(&image, &params, seed)?;
        rows.push(BenchRow {
            pixels: side * side,
            method: Method::Nnsc,
            step: run.grid.step,
            evaluations: run.total_evaluations(),
            max_iteration_evaluations: run.iteration_evaluations.iter().copied().max().unwrap_or(0),
            seconds: start.elapsed().as_secs_f64(),
        });
        let start = Instant::now();
        let slic = slic_baseline(&image, k, slic_m, iterations)?;
        rows.push(BenchRow {
            pixels: side * side,
            method: Method::Slic,
            step: slic.grid.step,
            evaluations: slic.iteration_evaluations.iter().sum(),
            max_iteration_evaluations: slic.iteration_evaluations.iter().copied().max().unwrap_or(0),
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(rows)
}

/// Per-iteration NNSC evaluation bound `|I| (2 + ceil(log2 s) + 1)`.
pub fn nnsc_iteration_bound(pixels: usize, step: usize) -> u64 {
    let ceil_log2 = step.max(1).next_power_of_two().trailing_zeros() as u64;
    pixels as u64 * (3 + ceil_log2)
}

fn bench(a: BenchArgs, out: &mut dyn Write) -> Result<()> {
    let rows = bench_rows(&a.sizes, a.step, a.iters, f64::from(a.m), a.seed)?;
    emit(
        out,
        format_args!("pixels\tmethod\tstep\tevaluations\tseconds\tmax_per_iteration\tbound_per_iteration\tslic_to_nnsc"),
    )?;
    for pair in rows.chunks(2) {
        let ratio = pair[1].evaluations as f64 / pair[0].evaluations as f64;
        for r in pair {
            let bound = match r.method {
                Method::Nnsc => nnsc_iteration_bound(r.pixels, r.step).to_string(),
                Method::Slic => format!("{}-{}", 3 * r.pixels, 5 * r.pixels),
            };
            emit(
                out,
                format_args!(
                    "{}\t{}\t{}\t{}\t{:.4}\t{}\t{}\t{:.3}",
                    r.pixels,
                    r.method.as_str(),
                    r.step,
                    r.evaluations,
                    r.seconds,
                    r.max_iteration_evaluations,
                    bound,
                    ratio
                ),
            )?;
        }
    }
    Ok(())
}
