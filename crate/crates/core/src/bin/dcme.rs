//! Command-line front end for the displacement-encoding toolkit.
//!
//! `synth` makes seeded scenes, `annotate` builds encoder class grids,
//! `encode`/`decode` convert between label maps and vector fields, `eval`
//! scores detections (standard, oracle and round-trip protocols), and
//! `loss-eval` reports the clipped regression loss between two fields.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use dcme::codec::{decode, encode, magnitude_map, DecodeParams, Detection};
use dcme::error::{Error, Result};
use dcme::eval::{
    classification_accuracy_set, evaluate_set, halfres_detections, oracle_detections,
    with_oracle_classes, ApThresholds, EvalImage,
};
use dcme::grid::{build_class_grid, class_of_instance, ClassPriority};
use dcme::io;
use dcme::synth::{generate, SceneSpec, ShapeKind};
use dcme::types::{ClassGrid, ClassId, Dims, GridSpec, InstanceLabelMap};
use dcme::viz;

#[derive(Parser)]
#[command(name = "dcme", version, about = "Instance segmentation as annotation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic instance label map.
    Synth(SynthArgs),
    /// Build the encoder class grid annotation for label maps.
    Annotate(AnnotateArgs),
    /// Encode a label map into a displacement vector field.
    Encode(EncodeArgs),
    /// Decode a vector field into detections, optionally classifying them.
    Decode(DecodeArgs),
    /// Score detections against ground truth.
    Eval(EvalArgs),
    /// Report the clipped regression loss between two field batches.
    LossEval(LossEvalArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output label map file.
    #[arg(long)]
    out: PathBuf,
    /// Image size as ROWSxCOLS.
    #[arg(long, default_value = "128x128")]
    dims: String,
    #[arg(long, default_value_t = 5)]
    instances: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Comma-separated class ids or names to draw from.
    #[arg(long, default_value = "1")]
    classes: String,
    /// Comma-separated shape kinds: rectangle, ellipse, l-shape.
    #[arg(long, default_value = "rectangle,ellipse,l-shape")]
    shapes: String,
    /// Minimum pairwise center-of-mass distance in pixels.
    #[arg(long, default_value_t = 0.0)]
    min_separation: f64,
    /// Inclusive shape extent range as MIN:MAX.
    #[arg(long, default_value = "4:16")]
    extent_range: String,
    /// Reject shapes smaller than this many pixels.
    #[arg(long, default_value_t = 1)]
    min_area: usize,
    /// Keep every center-of-mass block single-instance at this grid level.
    #[arg(long)]
    cm_exclusive_grid_n: Option<u32>,
    /// Snap instances to even-aligned 2x2 blocks.
    #[arg(long, default_value_t = false)]
    align_even: bool,
}

#[derive(Args)]
struct AnnotateArgs {
    /// Input label map file or directory of maps.
    #[arg(long = "map")]
    map: PathBuf,
    /// Output class grid file (or directory when the input is a directory).
    #[arg(long)]
    out: PathBuf,
    /// Stride-2 operation count; the grid size is 2^n.
    #[arg(long = "grid-n", default_value_t = 4)]
    grid_n: u32,
    /// Explicit priority as comma-separated class ids or names, highest
    /// first. Derived from the input set when absent.
    #[arg(long)]
    priority: Option<String>,
    /// File holding the priority list (whitespace-separated ids or names).
    #[arg(long, conflicts_with = "priority")]
    priority_file: Option<PathBuf>,
    /// Optional class-map render of the (first) grid.
    #[arg(long)]
    render: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = RenderFormat::Text)]
    format: RenderFormat,
}

#[derive(Args)]
struct EncodeArgs {
    /// Input label map file.
    #[arg(long = "map")]
    map: PathBuf,
    /// Output vector field file.
    #[arg(long)]
    out: PathBuf,
    /// Optional magnitude-map render.
    #[arg(long)]
    magnitude: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = RenderFormat::Text)]
    format: RenderFormat,
}

#[derive(Args)]
struct DecodeArgs {
    /// Input vector field file.
    #[arg(long)]
    field: PathBuf,
    /// Output detections file.
    #[arg(long)]
    out: PathBuf,
    /// Class grid used to classify detections; absent means background.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    min_votes: u32,
    #[arg(long, default_value_t = 2.0)]
    merge_radius: f64,
    #[arg(long = "assign-tol", default_value_t = 2.0)]
    assign_tol: f64,
    #[arg(long, default_value_t = 0.5)]
    fg_threshold: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalMode {
    Standard,
    InstanceOracle,
    ClassOracle,
    Roundtrip,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth label map file or directory.
    #[arg(long)]
    gt: PathBuf,
    /// Detections file or directory (standard and class-oracle modes).
    #[arg(long)]
    detections: Option<PathBuf>,
    /// Class grid file or directory (instance-oracle mode).
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EvalMode::Standard)]
    mode: EvalMode,
    /// Report output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Classification accuracy table output (instance-oracle mode).
    #[arg(long)]
    accuracy_out: Option<PathBuf>,
    /// Comma-separated IoU thresholds.
    #[arg(long)]
    thresholds: Option<String>,
}

#[derive(Args)]
struct LossEvalArgs {
    /// Target field file or directory (the batch of labels).
    #[arg(long)]
    target: PathBuf,
    /// Prediction field file or directory.
    #[arg(long)]
    prediction: PathBuf,
    /// Clip amplitude A.
    #[arg(long, default_value_t = 4.0)]
    amplitude: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RenderFormat {
    Text,
    Png,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Annotate(args) => cmd_annotate(args),
        Command::Encode(args) => cmd_encode(args),
        Command::Decode(args) => cmd_decode(args),
        Command::Eval(args) => cmd_eval(args),
        Command::LossEval(args) => cmd_loss_eval(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

// ---------------------------------------------------------------------------
// Argument parsing helpers
// ---------------------------------------------------------------------------

fn parse_dims(s: &str) -> Result<Dims> {
    let (rows, cols) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::validation(format!("dims '{s}' must look like 512x1024")))?;
    let rows = rows
        .parse()
        .map_err(|_| Error::validation(format!("invalid row count '{rows}'")))?;
    let cols = cols
        .parse()
        .map_err(|_| Error::validation(format!("invalid column count '{cols}'")))?;
    Dims::new(rows, cols)
}

fn parse_class_list(s: &str) -> Result<Vec<ClassId>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<u32>().map(ClassId).or_else(|_| {
                io::class_from_name(t)
                    .ok_or_else(|| Error::validation(format!("unknown class '{t}'")))
            })
        })
        .collect()
}

fn parse_thresholds(s: Option<&str>) -> Result<ApThresholds> {
    match s {
        None => Ok(ApThresholds::default()),
        Some(s) => {
            let values: Result<Vec<f64>> = s
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse()
                        .map_err(|_| Error::validation(format!("invalid threshold '{t}'")))
                })
                .collect();
            ApThresholds::new(values?)
        }
    }
}

/// Expand a path into an ordered list of input files: a file stays as-is, a
/// directory yields its regular files sorted by name.
fn input_files(path: &Path) -> Result<Vec<PathBuf>> {
    let meta = std::fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|entry| entry.ok())
        .map(|entry| entry.path())
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::validation(format!(
            "directory {} holds no input files",
            path.display()
        )));
    }
    Ok(files)
}

/// For each primary input, find the companion file under `companion_root`
/// with the same file stem (or the root itself when both are single files).
fn pair_by_stem(primary: &[PathBuf], companion_root: &Path) -> Result<Vec<PathBuf>> {
    let meta = std::fs::metadata(companion_root).map_err(|e| Error::io(companion_root, e))?;
    if meta.is_file() {
        if primary.len() == 1 {
            return Ok(vec![companion_root.to_path_buf()]);
        }
        return Err(Error::validation(format!(
            "{} is a single file but there are {} inputs to pair with",
            companion_root.display(),
            primary.len()
        )));
    }
    let companions = input_files(companion_root)?;
    let stem = |p: &Path| {
        p.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    let by_stem: std::collections::BTreeMap<String, PathBuf> =
        companions.iter().map(|p| (stem(p), p.clone())).collect();
    primary
        .iter()
        .map(|p| {
            by_stem.get(&stem(p)).cloned().ok_or_else(|| {
                Error::validation(format!(
                    "no companion file named '{}' under {}",
                    stem(p),
                    companion_root.display()
                ))
            })
        })
        .collect()
}

fn read_map_any(path: &Path) -> Result<InstanceLabelMap> {
    #[cfg(feature = "png")]
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
    {
        return viz::read_instance_id_png(path);
    }
    io::read_label_map(path)
}

/// Run `work` over the inputs, several files in flight at once, keeping
/// output order. Each file is handled by exactly one worker.
fn for_each_file<T, F>(inputs: Vec<PathBuf>, work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Path) -> Result<T> + Sync,
{
    let n = inputs.len();
    let threads = std::thread::available_parallelism()
        .map(|v| v.get())
        .unwrap_or(1)
        .min(n)
        .max(1);
    if threads == 1 {
        return inputs.iter().map(|p| work(p)).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<Result<T>>>> =
        (0..n).map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = work(&inputs[i]);
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .unwrap()
                .expect("worker filled every slot")
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let dims = parse_dims(&args.dims)?;
    let shapes: Result<Vec<ShapeKind>> = args
        .shapes
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect();
    let (lo, hi) = args
        .extent_range
        .split_once(':')
        .ok_or_else(|| Error::validation("extent range must look like MIN:MAX"))?;
    let extent_range = (
        lo.parse()
            .map_err(|_| Error::validation(format!("invalid extent '{lo}'")))?,
        hi.parse()
            .map_err(|_| Error::validation(format!("invalid extent '{hi}'")))?,
    );
    let cm_exclusive_grid = match args.cm_exclusive_grid_n {
        Some(n) => Some(GridSpec::new(n)?),
        None => None,
    };
    let spec = SceneSpec {
        dims,
        n_instances: args.instances,
        shapes: shapes?,
        classes: parse_class_list(&args.classes)?,
        min_cm_separation: args.min_separation,
        seed: args.seed,
        extent_range,
        min_area: args.min_area,
        cm_exclusive_grid,
        align_even: args.align_even,
    };
    let map = generate(&spec)?;
    io::write_label_map(&args.out, &map)
}

fn cmd_annotate(args: AnnotateArgs) -> Result<()> {
    let inputs = input_files(&args.map)?;
    let many = inputs.len() > 1;
    let gs = GridSpec::new(args.grid_n)?;
    let maps = for_each_file(inputs.clone(), read_map_any)?;

    let priority = if let Some(list) = &args.priority {
        ClassPriority::new(parse_class_list(list)?)?
    } else if let Some(pfile) = &args.priority_file {
        let text = std::fs::read_to_string(pfile).map_err(|e| Error::io(pfile, e))?;
        let joined = text.split_whitespace().collect::<Vec<_>>().join(",");
        ClassPriority::new(parse_class_list(&joined)?)?
    } else {
        ClassPriority::derive(&maps, &[])?
    };

    let grids: Vec<ClassGrid> = maps
        .iter()
        .map(|m| build_class_grid(m, gs, &priority))
        .collect::<Result<_>>()?;

    if many {
        std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
        for (input, grid) in inputs.iter().zip(&grids) {
            let name = input.file_stem().unwrap_or_default().to_string_lossy();
            io::write_class_grid(&args.out.join(format!("{name}.cg")), grid)?;
        }
    } else {
        io::write_class_grid(&args.out, &grids[0])?;
    }

    if let Some(render) = &args.render {
        let (indices, palette) = viz::class_grid_indices(&grids[0], maps[0].dims());
        write_color_render(render, args.format, maps[0].dims(), &indices, &palette)?;
    }
    Ok(())
}

fn cmd_encode(args: EncodeArgs) -> Result<()> {
    let map = read_map_any(&args.map)?;
    let field = encode(&map);
    io::write_vector_field(&args.out, &field)?;
    if let Some(render) = &args.magnitude {
        let bytes = viz::magnitude_to_bytes(&magnitude_map(&field));
        write_gray_render(render, args.format, map.dims(), &bytes)?;
    }
    Ok(())
}

fn write_gray_render(path: &Path, format: RenderFormat, dims: Dims, bytes: &[u8]) -> Result<()> {
    match format {
        RenderFormat::Text => viz::write_pgm(path, dims, bytes),
        #[cfg(feature = "png")]
        RenderFormat::Png => viz::write_gray_png(path, dims, bytes),
        #[cfg(not(feature = "png"))]
        RenderFormat::Png => Err(Error::validation(
            "this build has no PNG support; use --format text",
        )),
    }
}

fn write_color_render(
    path: &Path,
    format: RenderFormat,
    dims: Dims,
    indices: &[u8],
    palette: &[[u8; 3]],
) -> Result<()> {
    match format {
        RenderFormat::Text => viz::write_ppm(path, dims, indices, palette),
        #[cfg(feature = "png")]
        RenderFormat::Png => viz::write_indexed_png(path, dims, indices, palette),
        #[cfg(not(feature = "png"))]
        RenderFormat::Png => Err(Error::validation(
            "this build has no PNG support; use --format text",
        )),
    }
}

fn cmd_decode(args: DecodeArgs) -> Result<()> {
    let field = io::read_vector_field(&args.field)?;
    let params = DecodeParams {
        min_votes: args.min_votes,
        merge_radius: args.merge_radius,
        assign_tolerance: args.assign_tol,
        fg_threshold: args.fg_threshold,
    };
    let mut detections = decode(&field, &params)?;
    if let Some(grid_path) = &args.grid {
        let grid = io::read_class_grid(grid_path)?;
        let expected = grid.grid().block_dims(field.dims());
        if expected != grid.block_dims() {
            return Err(Error::validation(format!(
                "grid {} does not cover the {}x{} field",
                grid_path.display(),
                field.dims().rows,
                field.dims().cols
            )));
        }
        for det in &mut detections {
            let cm = det.center.to_pixel(field.dims());
            det.class = class_of_instance(cm, &grid)?;
        }
    }
    io::write_detections(&args.out, &detections, field.dims())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let thresholds = parse_thresholds(args.thresholds.as_deref())?;
    let gt_files = input_files(&args.gt)?;

    let report = match args.mode {
        EvalMode::Standard | EvalMode::ClassOracle => {
            let det_root = args
                .detections
                .as_ref()
                .ok_or_else(|| Error::validation("this mode needs --detections"))?;
            let det_files = pair_by_stem(&gt_files, det_root)?;
            let maps = for_each_file(gt_files, read_map_any)?;
            let dets: Vec<Vec<Detection>> = det_files
                .iter()
                .zip(&maps)
                .map(|(d, gt)| io::read_detections(d, gt.dims()))
                .collect::<Result<_>>()?;
            let dets: Vec<Vec<Detection>> = if args.mode == EvalMode::ClassOracle {
                dets.iter()
                    .zip(&maps)
                    .map(|(d, gt)| with_oracle_classes(d, gt))
                    .collect()
            } else {
                dets
            };
            let images: Vec<EvalImage> = maps
                .iter()
                .zip(&dets)
                .map(|(gt, d)| EvalImage { detections: d, gt })
                .collect();
            evaluate_set(&images, &thresholds)?
        }
        EvalMode::InstanceOracle => {
            let grid_root = args
                .grid
                .as_ref()
                .ok_or_else(|| Error::validation("instance-oracle mode needs --grid"))?;
            let grid_files = pair_by_stem(&gt_files, grid_root)?;
            let maps = for_each_file(gt_files, read_map_any)?;
            let grids = for_each_file(grid_files, io::read_class_grid)?;
            let dets: Vec<Vec<Detection>> = maps
                .iter()
                .zip(&grids)
                .map(|(gt, grid)| oracle_detections(gt, grid))
                .collect::<Result<_>>()?;
            let images: Vec<EvalImage> = maps
                .iter()
                .zip(&dets)
                .map(|(gt, d)| EvalImage { detections: d, gt })
                .collect();
            if let Some(acc_out) = &args.accuracy_out {
                let pairs: Vec<(&InstanceLabelMap, &ClassGrid)> =
                    maps.iter().zip(grids.iter()).collect();
                let acc = classification_accuracy_set(&pairs)?;
                io::write_report(acc_out, &io::ReportFile::Accuracy(acc))?;
            }
            evaluate_set(&images, &thresholds)?
        }
        EvalMode::Roundtrip => {
            let maps = for_each_file(gt_files, read_map_any)?;
            let dets: Vec<Vec<Detection>> = maps.iter().map(halfres_detections).collect();
            let images: Vec<EvalImage> = maps
                .iter()
                .zip(&dets)
                .map(|(gt, d)| EvalImage { detections: d, gt })
                .collect();
            evaluate_set(&images, &thresholds)?
        }
    };

    match &args.out {
        Some(path) => io::write_report(path, &io::ReportFile::Eval(report)),
        None => {
            print!("{}", io::format_eval_report(&report));
            Ok(())
        }
    }
}

fn cmd_loss_eval(args: LossEvalArgs) -> Result<()> {
    let target_files = input_files(&args.target)?;
    let pred_files = pair_by_stem(&target_files, &args.prediction)?;
    let targets = for_each_file(target_files, io::read_vector_field)?;
    let preds = for_each_file(pred_files, io::read_vector_field)?;
    let cfg = dcme::loss::LossConfig::new(args.amplitude)?;
    let result = dcme::loss::decoder_loss(&targets, &preds, &cfg)?;
    let max_abs = result
        .gradient
        .iter()
        .fold(0.0f64, |acc, g| acc.max(g.abs()));
    let mean_abs =
        result.gradient.iter().map(|g| g.abs()).sum::<f64>() / result.gradient.len() as f64;
    println!("images {}", targets.len());
    println!("samples {}", result.gradient.len());
    println!("reported_loss {}", result.reported_loss);
    println!("max_abs_gradient {max_abs}");
    println!("mean_abs_gradient {mean_abs}");
    Ok(())
}
