//! `onmf` command-line tool. Every command reads files, writes files
//! atomically, and exits with 0 (ok), 1 (io), 2 (parse / bad argument),
//! 3 (insufficient data) or 4 (shape / format mismatch).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use onmf::imaging::{self, ClassLabelMap, PatchGrid, PatchTraining, DEFAULT_PATCH_LAMBDA};
use onmf::io::render::{self, Layout};
use onmf::io::{persist, png, table, write_atomic};
use onmf::timeseries::{self, HankelSpec, SeriesEnsemble, Snapshot, TemporalConfig};
use onmf::video::{self, SpatialMode, DEFAULT_DETECT_ITERS};
use onmf::{Error, NonnegMatrix, OnlineDictionaryState, Result};

#[derive(Parser, Debug)]
#[command(name = "onmf", version, about = "Online nonnegative matrix factorization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Learn a joint temporal dictionary from a series CSV.
    TsLearn(TsLearn),
    /// Fill missing entries of a series CSV, with a stored or freshly learned dictionary.
    TsInpaint(TsInpaint),
    /// Train a color patch dictionary on random patches of PNG images.
    ImgTrain(ImgTrain),
    /// Code every patch of an image against a dictionary and average back.
    ImgCompress(ImgCompress),
    /// Restore color to a grayscale image from class-conditional dictionaries.
    ImgRestore(ImgRestore),
    /// Learn spatial atoms from a directory of frames.
    VideoDict(VideoDict),
    /// Locate the frame boundary with the largest change.
    VideoChangepoint(VideoChangepoint),
    /// Render a stored dictionary as a grid of tiles.
    Render(RenderArgs),
}

#[derive(Args, Debug)]
struct SeriesInput {
    /// Series CSV: `time,series_1,...,series_m`.
    input: PathBuf,
    /// Value marking a missing entry (empty cells are always missing).
    #[arg(long, default_value_t = table::DEFAULT_SENTINEL, allow_negative_numbers = true)]
    sentinel: f64,
    /// Constant added to every value; defaults to max(0, -min observed).
    #[arg(long)]
    offset: Option<f64>,
    /// Directory receiving the outputs.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct TemporalArgs {
    /// Window length.
    #[arg(long, default_value_t = 6)]
    k: usize,
    /// Buffer length.
    #[arg(long = "N", default_value_t = 50)]
    n: usize,
    /// Number of atoms.
    #[arg(long, default_value_t = 16)]
    r: usize,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ticks between online steps.
    #[arg(long, default_value_t = 1)]
    stride: usize,
}

#[derive(Args, Debug)]
struct TsLearn {
    #[command(flatten)]
    io: SeriesInput,
    #[command(flatten)]
    temporal: TemporalArgs,
}

#[derive(Args, Debug)]
struct TsInpaint {
    #[command(flatten)]
    io: SeriesInput,
    #[command(flatten)]
    temporal: TemporalArgs,
    /// Stored dictionary; its row count must be a multiple of the series count.
    /// When given, no learning happens and its lambda is used unless
    /// `--code-lambda` is set.
    #[arg(long)]
    dict: Option<PathBuf>,
    #[arg(long)]
    code_lambda: Option<f64>,
}

#[derive(Args, Debug)]
struct ImgTrain {
    /// Training PNGs.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 20)]
    p: usize,
    #[arg(long, default_value_t = 100)]
    r: usize,
    #[arg(long, default_value_t = 30)]
    batches: usize,
    #[arg(long, default_value_t = 1000)]
    batch_size: usize,
    #[arg(long, default_value_t = DEFAULT_PATCH_LAMBDA)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dictionary file to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write a grid of the first atoms to this PNG.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, default_value_t = 25)]
    grid_atoms: usize,
}

#[derive(Args, Debug)]
struct ImgCompress {
    input: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    #[arg(long, default_value_t = 20)]
    p: usize,
    #[arg(long, default_value_t = 15)]
    overlap: usize,
    /// Coding penalty; defaults to the dictionary's own.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ImgRestore {
    /// Grayscale (or color, converted) PNG.
    input: PathBuf,
    /// `CLASS=PATH`, once per class.
    #[arg(long = "dict", required = true, value_parser = parse_class_dict)]
    dicts: Vec<(u32, PathBuf)>,
    /// `row,col,class` per grid anchor; optional with a single dictionary.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    p: usize,
    #[arg(long, default_value_t = 9)]
    overlap: usize,
    #[arg(long, default_value_t = DEFAULT_PATCH_LAMBDA)]
    lambda: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Mode {
    Offline,
    Online,
}

#[derive(Args, Debug)]
struct VideoDict {
    /// Directory of same-size PNG frames, read in file-name order.
    #[arg(long)]
    frames: PathBuf,
    #[arg(long, default_value_t = 4)]
    r: usize,
    #[arg(long, value_enum, default_value_t = Mode::Online)]
    mode: Mode,
    /// Multiplicative-update iterations (offline mode).
    #[arg(long, default_value_t = 500)]
    iters: usize,
    /// Coding penalty (online mode).
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Frame counts after which the online dictionary is saved.
    #[arg(long, value_delimiter = ',')]
    snapshots: Vec<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct VideoChangepoint {
    #[arg(long)]
    frames: PathBuf,
    #[arg(long, default_value_t = 5)]
    r: usize,
    #[arg(long, default_value_t = DEFAULT_DETECT_ITERS)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report CSV (`boundary,score`).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long)]
    dict: PathBuf,
    /// `patch`, `frame` or `temporal`.
    #[arg(long)]
    layout: String,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    /// Number of stacked series (temporal layout).
    #[arg(long)]
    series: Option<usize>,
    #[arg(long)]
    max_atoms: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_class_dict(s: &str) -> std::result::Result<(u32, PathBuf), String> {
    let (class, path) = s.split_once('=').ok_or("expected CLASS=PATH")?;
    let class = class.trim().parse().map_err(|_| format!("`{class}` is not a class number"))?;
    Ok((class, PathBuf::from(path)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::TsLearn(args) => ts_learn(&args),
        Command::TsInpaint(args) => ts_inpaint(&args),
        Command::ImgTrain(args) => img_train(&args),
        Command::ImgCompress(args) => img_compress(&args),
        Command::ImgRestore(args) => img_restore(&args),
        Command::VideoDict(args) => video_dict(&args),
        Command::VideoChangepoint(args) => video_changepoint(&args),
        Command::Render(args) => render_dict(&args),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn load_series(io: &SeriesInput) -> Result<(table::SeriesTable, SeriesEnsemble)> {
    let t = table::read_series_csv(BufReader::new(File::open(&io.input)?), io.sentinel)?;
    let mut ens = t.to_ensemble()?;
    if let Some(offset) = io.offset {
        ens = ens.with_offset(offset)?;
    }
    Ok((t, ens))
}

fn learn(ens: &SeriesEnsemble, args: &TemporalArgs) -> Result<timeseries::TemporalFit> {
    let spec = HankelSpec::new(args.k, args.n, args.r)?;
    let mut config = TemporalConfig::new(spec, args.lambda, args.seed);
    config.stride = args.stride;
    let fit = timeseries::online_temporal_fit(ens, &config)?;
    eprintln!(
        "learned {}x{} dictionary over {} steps",
        fit.state.dim(),
        fit.state.atoms(),
        fit.state.samples_seen()
    );
    Ok(fit)
}

/// Writes the reconstruction and fill-in CSVs in caller units.
fn emit_series(
    out_dir: &Path,
    t: &table::SeriesTable,
    ens: &SeriesEnsemble,
    snapshots: &[Snapshot],
    spec: &HankelSpec,
    lambda: f64,
) -> Result<()> {
    let offset = ens.offset();
    let recon = timeseries::rolling_reconstruct(ens, snapshots, spec, lambda)?;
    let recon: Vec<Vec<Option<f64>>> =
        recon.values.iter().map(|s| s.iter().map(|v| v.map(|v| v - offset)).collect()).collect();
    write_atomic(&out_dir.join("reconstruction.csv"), table::write_series_csv(&t.times, &t.names, &recon)?.as_bytes())?;

    let filled = timeseries::inpaint_ensemble(ens, snapshots, spec, lambda)?;
    let fill: Vec<Vec<Option<f64>>> =
        filled.values.rows().into_iter().map(|row| row.iter().map(|&v| Some(v - offset)).collect()).collect();
    write_atomic(&out_dir.join("fillin.csv"), table::write_series_csv(&t.times, &t.names, &fill)?.as_bytes())?;
    let count = filled.filled.iter().filter(|&&f| f).count();
    eprintln!("filled {count} missing entries");
    Ok(())
}

fn metadata(ens: &SeriesEnsemble, spec: &HankelSpec, lambda: f64, seed: u64, stride: usize, state: &OnlineDictionaryState) -> String {
    table::format_metadata(&[
        ("offset", ens.offset().to_string()),
        ("series", ens.series_count().to_string()),
        ("length", ens.len().to_string()),
        ("k", spec.k.to_string()),
        ("N", spec.n.to_string()),
        ("r", spec.r.to_string()),
        ("lambda", lambda.to_string()),
        ("seed", seed.to_string()),
        ("stride", stride.to_string()),
        ("d", state.dim().to_string()),
        ("steps", state.samples_seen().to_string()),
    ])
}

fn ts_learn(args: &TsLearn) -> Result<()> {
    let (t, ens) = load_series(&args.io)?;
    let fit = learn(&ens, &args.temporal)?;
    let spec = HankelSpec::new(args.temporal.k, args.temporal.n, args.temporal.r)?;
    create_dir(&args.io.out_dir)?;
    persist::save_state(&args.io.out_dir.join("dictionary.onmf"), &fit.state)?;
    emit_series(&args.io.out_dir, &t, &ens, &fit.snapshots, &spec, args.temporal.lambda)?;
    let meta = metadata(&ens, &spec, args.temporal.lambda, args.temporal.seed, args.temporal.stride, &fit.state);
    write_atomic(&args.io.out_dir.join("metadata.txt"), meta.as_bytes())
}

fn ts_inpaint(args: &TsInpaint) -> Result<()> {
    let (t, ens) = load_series(&args.io)?;
    create_dir(&args.io.out_dir)?;
    let Some(dict) = &args.dict else {
        let fit = learn(&ens, &args.temporal)?;
        let spec = HankelSpec::new(args.temporal.k, args.temporal.n, args.temporal.r)?;
        let lambda = args.code_lambda.unwrap_or(args.temporal.lambda);
        persist::save_state(&args.io.out_dir.join("dictionary.onmf"), &fit.state)?;
        emit_series(&args.io.out_dir, &t, &ens, &fit.snapshots, &spec, lambda)?;
        let meta = metadata(&ens, &spec, lambda, args.temporal.seed, args.temporal.stride, &fit.state);
        return write_atomic(&args.io.out_dir.join("metadata.txt"), meta.as_bytes());
    };
    let state = persist::load_state(dict)?;
    let m = ens.series_count();
    if state.dim() % m != 0 {
        return Err(Error::Format(format!("dictionary has {} rows, not a multiple of {m} series", state.dim())));
    }
    let k = state.dim() / m;
    let spec = HankelSpec::new(k, k, state.atoms())?;
    let lambda = args.code_lambda.unwrap_or(state.lambda());
    let snapshots = [Snapshot { t: 0, w: state.dictionary().clone() }];
    emit_series(&args.io.out_dir, &t, &ens, &snapshots, &spec, lambda)?;
    let meta = metadata(&ens, &spec, lambda, args.temporal.seed, args.temporal.stride, &state);
    write_atomic(&args.io.out_dir.join("metadata.txt"), meta.as_bytes())
}

fn img_train(args: &ImgTrain) -> Result<()> {
    let images = args.inputs.iter().map(|p| png::read_color_png(p)).collect::<Result<Vec<_>>>()?;
    let cfg = PatchTraining {
        p: args.p,
        r: args.r,
        batches: args.batches,
        batch_size: args.batch_size,
        lambda: args.lambda,
        seed: args.seed,
    };
    let state = imaging::train_patch_dictionary(&images, &cfg)?;
    eprintln!("trained {}x{} patch dictionary on {} batches", state.dim(), state.atoms(), state.samples_seen());
    persist::save_state(&args.out, &state)?;
    if let Some(grid) = &args.grid {
        let img = render::render_dictionary_grid(state.dictionary(), Layout::Patch { p: args.p }, Some(args.grid_atoms))?;
        png::write_color_png(grid, &img)?;
    }
    Ok(())
}

fn img_compress(args: &ImgCompress) -> Result<()> {
    let image = png::read_color_png(&args.input)?;
    let state = persist::load_state(&args.dict)?;
    let lambda = args.lambda.unwrap_or(state.lambda());
    let out = imaging::compress_image(&image, state.dictionary(), args.p, args.overlap, lambda)?;
    eprintln!("PSNR {:.2} dB", imaging::psnr(&image, &out)?);
    png::write_color_png(&args.out, &out)
}

fn img_restore(args: &ImgRestore) -> Result<()> {
    let gray = png::read_gray_png(&args.input)?;
    let mut dicts: BTreeMap<u32, NonnegMatrix> = BTreeMap::new();
    for (class, path) in &args.dicts {
        if dicts.insert(*class, persist::load_state(path)?.dictionary().clone()).is_some() {
            return Err(Error::InvalidArgument(format!("class {class} given twice")));
        }
    }
    let labels = match &args.labels {
        Some(path) => {
            let mut labels = ClassLabelMap::new();
            for (anchor, class) in table::read_labels_csv(BufReader::new(File::open(path)?))? {
                labels.insert(anchor, class);
            }
            labels
        }
        None if dicts.len() == 1 => {
            let grid = PatchGrid::with_overlap(gray.height(), gray.width(), args.p, args.overlap)?;
            ClassLabelMap::uniform(&grid, *dicts.keys().next().expect("one dictionary"))
        }
        None => return Err(Error::InvalidArgument("--labels is required with more than one dictionary".into())),
    };
    let out = imaging::restore_color(&gray, &labels, &dicts, args.p, args.overlap, args.lambda)?;
    png::write_color_png(&args.out, &out)
}

fn write_atoms(dir: &Path, prefix: &str, w: &NonnegMatrix, height: usize, width: usize) -> Result<()> {
    for (j, col) in w.columns().into_iter().enumerate() {
        png::write_gray_png(&dir.join(format!("{prefix}atom_{j}.png")), &render::frame_atom_image(col, height, width)?)?;
    }
    let grid = render::render_dictionary_grid(w, Layout::Frame { height, width }, None)?;
    png::write_color_png(&dir.join(format!("{prefix}grid.png")), &grid)
}

fn video_dict(args: &VideoDict) -> Result<()> {
    let stack = png::read_frame_dir(&args.frames)?;
    let mode = match args.mode {
        Mode::Offline => {
            if !args.snapshots.is_empty() {
                eprintln!("note: --snapshots only applies to online mode");
            }
            SpatialMode::Offline { iters: args.iters, seed: args.seed }
        }
        Mode::Online => SpatialMode::Online { lambda: args.lambda, seed: args.seed },
    };
    let dict = video::learn_spatial_dictionary(&stack, args.r, mode, &args.snapshots)?;
    create_dir(&args.out_dir)?;
    let (h, w) = (stack.height(), stack.width());
    write_atoms(&args.out_dir, "", &dict.w, h, w)?;
    for (frames, snapshot) in &dict.snapshots {
        write_atoms(&args.out_dir, &format!("snapshot_{frames}_"), snapshot, h, w)?;
    }
    eprintln!("{} atoms from {} frames, {} snapshots", dict.atoms.len(), stack.len(), dict.snapshots.len());
    Ok(())
}

fn video_changepoint(args: &VideoChangepoint) -> Result<()> {
    let stack = png::read_frame_dir(&args.frames)?;
    let report = video::detect_changepoint(&stack, args.r, args.iters, args.seed)?;
    let mut csv = String::from("boundary,score\n");
    for (t, s) in report.scores.iter().enumerate() {
        csv.push_str(&format!("{t},{s}\n"));
    }
    write_atomic(&args.out, csv.as_bytes())?;
    println!(
        "changepoint={} score={} significant={}",
        report.changepoint, report.scores[report.changepoint], report.significant
    );
    Ok(())
}

fn render_dict(args: &RenderArgs) -> Result<()> {
    let layout = Layout::parse(&args.layout, args.p, args.height, args.width, args.series)?;
    let state = persist::load_state(&args.dict)?;
    let img = render::render_dictionary_grid(state.dictionary(), layout, args.max_atoms)?;
    png::write_color_png(&args.out, &img)
}
