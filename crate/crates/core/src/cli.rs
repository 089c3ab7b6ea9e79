//! Command-line front end. Every command maps its failure family to a
//! fixed exit code so batch runs can be scripted.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::blocks::read_ground_truth;
use crate::config::{Config, ProviderKind};
use crate::dataset::manifest::{manifest_stats, to_pretty_json};
use crate::dataset::{apply_synonyms, build_entry, evaluate, synthetic_records, write_dataset, LabeledPointCloud, Manifest, RecordFile, RecordKind, Track};
use crate::pipeline::{comment_pipeline, render_view, PipelineError, PipelineOptions};
use crate::program::{Program, ProgramError};
use crate::render::{encode_depth_8bit, mask_to_png};
use crate::scad::json::dump_ast;
use crate::scad::{parse, pretty_print, SourceFile};
use crate::vision::{ProviderError, SynonymMap};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_GEOMETRY: i32 = 3;
pub const EXIT_PIPELINE: i32 = 4;
pub const EXIT_PROVIDER: i32 = 5;
pub const EXIT_MISMATCH: i32 = 6;
pub const EXIT_RECORDS: i32 = 7;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        CliError { code, message: message.into() }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::new(EXIT_IO, format!("{}: {e}", path.display()))
}

impl From<ProgramError> for CliError {
    fn from(e: ProgramError) -> Self {
        CliError::new(EXIT_PARSE, e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let code = match &e {
            PipelineError::Program(_) => EXIT_PARSE,
            PipelineError::Geometry(_) | PipelineError::Render(_) => EXIT_GEOMETRY,
            PipelineError::Provider { source: ProviderError::Misconfigured(_), .. } => EXIT_PROVIDER,
            _ => EXIT_PIPELINE,
        };
        CliError::new(code, e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "cadtalker", version, about = "Label the parts of CSG programs with comments")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse a program; prints it back normalized, or its AST.
    Parse {
        file: PathBuf,
        #[arg(long)]
        dump_ast: bool,
        /// Dump the tree after loop and module expansion.
        #[arg(long)]
        expanded: bool,
    },
    /// Print the code-block forest as JSON.
    Blocks { file: PathBuf },
    /// Write depth maps, closed depth maps, per-block masks and camera parameters.
    Render {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        render: RenderFlags,
    },
    /// Label every block and write `<name>.commented.scad` and `<name>.report.json`.
    Comment(CommentArgs),
    /// Compare predicted comments against ground-truth comments.
    Eval {
        pred: PathBuf,
        gt: PathBuf,
        /// JSON map file, or `provider` to ask the configured provider.
        #[arg(long)]
        synonyms: Option<String>,
    },
    /// Build dataset tracks or summarize a built one.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Serve the review API over a dataset directory.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Default)]
pub struct RenderFlags {
    #[arg(long)]
    pub closing: Option<usize>,
    #[arg(long)]
    pub views: Option<usize>,
    #[arg(long)]
    pub resolution: Option<u32>,
    #[arg(long)]
    pub elevation: Option<f64>,
}

#[derive(Args, Debug)]
pub struct CommentArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub category: String,
    /// Comma-separated part names; overrides the suggested list.
    #[arg(long, value_delimiter = ',')]
    pub labels: Option<Vec<String>>,
    #[arg(long)]
    pub provider: Option<ProviderKind>,
    #[arg(long)]
    pub url: Option<String>,
    /// Oracle seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; defaults to the input's directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Leave wall-clock timings out of the report so reruns are byte-identical.
    #[arg(long)]
    pub no_timings: bool,
    #[command(flatten)]
    pub render: RenderFlags,
}

#[derive(Subcommand, Debug)]
pub enum DatasetCommand {
    /// Translate primitive records (or generated shapes) into a track.
    Build {
        /// Record JSON files; a sibling `<stem>.cloud.json` or `<stem>.ply`
        /// supplies labels for records without `gt_labels`.
        inputs: Vec<PathBuf>,
        #[arg(long)]
        track: Track,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        category: Option<String>,
        /// Generate shapes of this category instead of reading records.
        #[arg(long)]
        synthetic: Option<String>,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print statistics for a built dataset.
    Stats {
        dir: PathBuf,
        /// Tab-separated rows instead of JSON.
        #[arg(long)]
        table: bool,
    },
}

/// What a command produced: stdout text plus files written.
#[derive(Debug, Default)]
pub struct Output {
    pub stdout: String,
    pub files: Vec<PathBuf>,
}

fn read_source(path: &Path) -> Result<SourceFile, CliError> {
    SourceFile::read(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>, out: &mut Output) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))?;
    out.files.push(path.to_path_buf());
    Ok(())
}

fn apply_render_flags(cfg: &mut Config, f: &RenderFlags) {
    if let Some(c) = f.closing {
        cfg.render.closing_iterations = c;
    }
    if let Some(v) = f.views {
        cfg.render.views = v;
    }
    if let Some(r) = f.resolution {
        cfg.render.resolution = r;
    }
    if let Some(e) = f.elevation {
        cfg.render.elevation_deg = e;
    }
}

pub fn cmd_parse(file: &Path, dump: bool, expanded: bool) -> Result<Output, CliError> {
    let source = read_source(file)?;
    let text = if expanded {
        let p = Program::load(source)?;
        if dump { to_pretty_json(&dump_ast(&p.tree)) } else { pretty_print(&p.tree).text }
    } else {
        let tree = parse(&source).map_err(ProgramError::from)?;
        if dump { to_pretty_json(&dump_ast(&tree)) } else { pretty_print(&tree).text }
    };
    Ok(Output { stdout: text, files: vec![] })
}

pub fn cmd_blocks(file: &Path) -> Result<Output, CliError> {
    let p = Program::load(read_source(file)?)?;
    Ok(Output { stdout: to_pretty_json(&p.blocks.to_json()), files: vec![] })
}

pub fn cmd_render(file: &Path, out_dir: &Path, cfg: &Config) -> Result<Output, CliError> {
    let p = Program::load(read_source(file)?)?;
    let geo = |e: String| CliError::new(EXIT_GEOMETRY, e);
    let shape = p.shape().map_err(|e| geo(e.to_string()))?;
    let ring = cfg.render.ring_spec().ring(&shape.root_bounds()).map_err(|e| geo(e.to_string()))?;
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let mut out = Output::default();
    for (v, cam) in ring.cameras.iter().enumerate() {
        let view = render_view(&shape, &p.blocks, cam, cfg.render.closing_iterations);
        let raw = encode_depth_8bit(&view.depth).to_png().map_err(|e| geo(e.to_string()))?;
        write(&out_dir.join(format!("depth_{v}.png")), raw, &mut out)?;
        write(&out_dir.join(format!("closed_{v}.png")), &view.closed_png, &mut out)?;
        for (b, m) in &view.masks {
            let png = mask_to_png(m).map_err(|e| geo(e.to_string()))?;
            write(&out_dir.join(format!("mask_{v}_{b}.png")), png, &mut out)?;
        }
    }
    write(&out_dir.join("views.json"), to_pretty_json(&ring), &mut out)?;
    for w in &shape.warnings {
        log::warn!("{w}");
    }
    out.stdout = format!("wrote {} files to {}\n", out.files.len(), out_dir.display());
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "program".into())
}

pub fn cmd_comment(args: &CommentArgs, cfg: &Config) -> Result<Output, CliError> {
    let mut cfg = cfg.clone();
    apply_render_flags(&mut cfg, &args.render);
    if let Some(k) = args.provider {
        cfg.provider.kind = k;
    }
    if let Some(u) = &args.url {
        cfg.provider.url = Some(u.clone());
    }
    if let Some(s) = args.seed {
        cfg.provider.oracle.seed = s;
    }
    let provider = cfg.provider.build().map_err(|e| CliError::new(EXIT_PROVIDER, e.to_string()))?;
    let source = read_source(&args.file)?;
    let opts = PipelineOptions {
        category: args.category.clone(),
        labels: args.labels.clone(),
        render: cfg.render.clone(),
        vote: cfg.vote.clone(),
        timings: !args.no_timings,
    };
    let (commented, report) = comment_pipeline(&source, provider.as_ref(), &opts)?;
    let dir = match &args.out_dir {
        Some(d) => d.clone(),
        None => args.file.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let name = stem(&args.file);
    let mut out = Output::default();
    let scad = dir.join(format!("{name}.commented.scad"));
    write(&scad, &commented.text, &mut out)?;
    let mut json = report.to_json();
    json["config"] = cfg.snapshot();
    write(&dir.join(format!("{name}.report.json")), to_pretty_json(&json), &mut out)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    out.stdout = format!("{}\n", scad.display());
    Ok(out)
}

pub fn cmd_eval(pred: &Path, gt: &Path, synonyms: Option<&str>, cfg: &Config) -> Result<Output, CliError> {
    let p = Program::load(read_source(pred)?)?;
    let g = Program::load(read_source(gt)?)?;
    if !p.blocks.same_structure(&g.blocks) {
        return Err(CliError::new(
            EXIT_MISMATCH,
            format!("BlockSetMismatch: {} has {} blocks, {} has {}", pred.display(), p.blocks.len(), gt.display(), g.blocks.len()),
        ));
    }
    let bad = |e: crate::blocks::BlockError| CliError::new(EXIT_PARSE, e.to_string());
    let mut pa = read_ground_truth(&p.source, &p.blocks).map_err(bad)?;
    let ga = read_ground_truth(&g.source, &g.blocks).map_err(bad)?;
    if let Some(spec) = synonyms {
        let map: SynonymMap = if spec == "provider" {
            let provider = cfg.provider.build().map_err(|e| CliError::new(EXIT_PROVIDER, e.to_string()))?;
            let uniq = |a: &crate::blocks::BlockAssignment| -> Vec<String> {
                a.labeled().flat_map(|(_, l)| l.iter().cloned()).collect::<BTreeSet<_>>().into_iter().collect()
            };
            provider.map_synonyms(&uniq(&pa), &uniq(&ga)).map_err(|e| CliError::new(EXIT_PIPELINE, e.to_string()))?
        } else {
            let path = Path::new(spec);
            let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            serde_json::from_str(&text).map_err(|e| CliError::new(EXIT_IO, format!("{spec}: {e}")))?
        };
        pa = apply_synonyms(&pa, &map);
    }
    let report = evaluate(&pa, &ga).map_err(|e| CliError::new(EXIT_MISMATCH, e.to_string()))?;
    Ok(Output { stdout: to_pretty_json(&report), files: vec![] })
}

fn records_err(e: impl std::fmt::Display) -> CliError {
    CliError::new(EXIT_RECORDS, e.to_string())
}

fn sibling_cloud(input: &Path) -> Result<Option<LabeledPointCloud>, CliError> {
    let base = input.with_extension("");
    let json = base.with_extension("cloud.json");
    if json.exists() {
        let text = std::fs::read_to_string(&json).map_err(|e| io_err(&json, e))?;
        return LabeledPointCloud::from_json(&text).map(Some).map_err(records_err);
    }
    let ply = base.with_extension("ply");
    if ply.exists() {
        let text = std::fs::read_to_string(&ply).map_err(|e| io_err(&ply, e))?;
        return LabeledPointCloud::from_ply(&text).map(Some).map_err(records_err);
    }
    Ok(None)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_dataset_build(
    inputs: &[PathBuf],
    track: Track,
    out_dir: &Path,
    category: Option<&str>,
    synthetic: Option<&str>,
    count: usize,
    seed: u64,
) -> Result<Output, CliError> {
    let mut entries = Vec::new();
    let kind = match track {
        Track::EllipL | Track::EllipH => RecordKind::Ellipsoid,
        _ => RecordKind::Cuboid,
    };
    if let Some(cat) = synthetic {
        for k in 0..count {
            let recs = synthetic_records(cat, kind, seed.wrapping_add(k as u64)).map_err(records_err)?;
            let (e, w) = build_entry(&format!("{cat}_{k:04}"), track, cat, &recs, None).map_err(records_err)?;
            w.iter().for_each(|w| log::warn!("{w}"));
            entries.push(e);
        }
    }
    for input in inputs {
        let text = std::fs::read_to_string(input).map_err(|e| io_err(input, e))?;
        let file: RecordFile = serde_json::from_str(&text).map_err(|e| records_err(format!("{}: {e}", input.display())))?;
        let cat = category
            .map(str::to_string)
            .or(file.category.clone())
            .ok_or_else(|| records_err(format!("{}: no category (use --category)", input.display())))?;
        let cloud = sibling_cloud(input)?;
        let (e, w) = build_entry(&stem(input), track, &cat, &file.records, cloud.as_ref())
            .map_err(|e| records_err(format!("{}: {e}", input.display())))?;
        w.iter().for_each(|w| log::warn!("{}: {w}", input.display()));
        entries.push(e);
    }
    let (manifest, stats) = write_dataset(out_dir, &entries).map_err(records_err)?;
    Ok(Output {
        stdout: stats.table(),
        files: manifest.entries.iter().map(|e| out_dir.join(&e.path)).collect(),
    })
}

pub fn cmd_dataset_stats(dir: &Path, table: bool) -> Result<Output, CliError> {
    let m = Manifest::read(dir).map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
    let s = manifest_stats(&m);
    Ok(Output { stdout: if table { s.table() } else { to_pretty_json(&s) }, files: vec![] })
}

/// Runs a parsed command line and returns its output.
pub fn execute(cli: &Cli) -> Result<Output, CliError> {
    let cfg = Config::load(cli.config.as_deref()).map_err(|e| CliError::new(EXIT_PROVIDER, e.to_string()))?;
    match &cli.command {
        Command::Parse { file, dump_ast, expanded } => cmd_parse(file, *dump_ast, *expanded),
        Command::Blocks { file } => cmd_blocks(file),
        Command::Render { file, out, render } => {
            let mut cfg = cfg;
            apply_render_flags(&mut cfg, render);
            cmd_render(file, out, &cfg)
        }
        Command::Comment(args) => cmd_comment(args, &cfg),
        Command::Eval { pred, gt, synonyms } => cmd_eval(pred, gt, synonyms.as_deref(), &cfg),
        Command::Dataset(DatasetCommand::Build { inputs, track, out, category, synthetic, count, seed }) => {
            cmd_dataset_build(inputs, *track, out, category.as_deref(), synthetic.as_deref(), *count, *seed)
        }
        Command::Dataset(DatasetCommand::Stats { dir, table }) => cmd_dataset_stats(dir, *table),
        Command::Serve { port, data_dir, static_dir } => {
            let mut svc = cfg.service.clone();
            if let Some(p) = port {
                svc.port = *p;
            }
            if let Some(d) = data_dir {
                svc.data_dir = d.clone();
            }
            if let Some(s) = static_dir {
                svc.static_dir = Some(s.clone());
            }
            crate::service::serve_blocking(&svc, &cfg.render).map_err(|e| CliError::new(EXIT_IO, e))?;
            Ok(Output::default())
        }
    }
}

/// Parses `args`, runs the command, prints results, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_IO } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(out) => {
            print!("{}", out.stdout);
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{}", e.message.lines().next().unwrap_or_default());
            e.code
        }
    }
}
