//! Command-line driver behind the `hcocluster` binary.
//!
//! Every command writes into a staging directory next to the requested
//! output and renames it into place on success, so a failed run leaves
//! nothing behind.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bundle::{read_bundle, write_bundle};
use crate::config::RunConfig;
use crate::constraints::BandWeighting;
use crate::error::{Error, Result};
use crate::hierarchy::{build_bpt, Hierarchy};
use crate::metrics::{
    boundary_pixels, boundary_pr, consistency_curve_labels, sequence_curve, ConsistencyCurve, PixelSet,
    DEFAULT_BOUNDARY_TOLERANCE,
};
use crate::pipeline::{
    cocluster, multiresolution, video_segment, Frame, Level, LevelOutcome, Schedule, SolutionBundle,
};
use crate::raster::{load_image, load_label_map, load_raw_labels, raw_label_csv, save_image, LabelMap};
use crate::render::{boundary_overlay, color_fill};
use crate::synth::{fixture_set, write_sequence};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "hcocluster", version, about = "Multiresolution co-clustering of region hierarchies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a binary partition tree per frame.
    Hierarchy,
    /// Jointly co-cluster all frames at one resolution level.
    Cocluster {
        /// Active boundary fraction; defaults to the first schedule level.
        #[arg(long)]
        t: Option<f64>,
    },
    /// Co-cluster all frames at every schedule level.
    Multires,
    /// Forward-only co-clustering of a frame sequence.
    Video,
    /// Score a solution bundle against object label maps.
    Eval {
        /// Boundary matching tolerance in pixels.
        #[arg(long, default_value_t = DEFAULT_BOUNDARY_TOLERANCE)]
        tolerance: f64,
    },
    /// Draw boundary overlays and color fills for a solution bundle.
    Render,
    /// Write the synthetic fixture sequences.
    Synth,
}

/// Flags that override fields of the configuration file.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    /// Replace an existing output directory.
    #[arg(long, global = true)]
    pub force: bool,
    #[arg(long, global = true, num_args = 1..)]
    pub frames: Vec<PathBuf>,
    #[arg(long, global = true, num_args = 1..)]
    pub leaves: Vec<PathBuf>,
    #[arg(long, global = true, num_args = 1..)]
    pub hierarchies: Vec<PathBuf>,
    #[arg(long = "ground-truth", global = true, num_args = 1..)]
    pub ground_truth: Vec<PathBuf>,
    #[arg(long, global = true)]
    pub bundle: Option<PathBuf>,
    #[arg(long, global = true)]
    pub levels: Option<usize>,
    #[arg(long = "t-max", global = true)]
    pub t_max: Option<f64>,
    #[arg(long = "t-min", global = true)]
    pub t_min: Option<f64>,
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true)]
    pub window: Option<f64>,
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    /// Band weighting: `length` or `count`.
    #[arg(long, global = true)]
    pub weighting: Option<String>,
    /// Largest presolved problem solved in exact arithmetic.
    #[arg(long = "exact-limit", global = true)]
    pub exact_limit: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

/// A failure with its exit code and the stage it happened in.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub command: &'static str,
    pub operation: &'static str,
    pub cause: String,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "error: command={} operation={} cause={}",
            self.command, self.operation, self.cause
        )
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Stage {
    Config,
    Input,
    Run,
    Output,
}

impl Stage {
    fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Input => "read-input",
            Stage::Run => "run",
            Stage::Output => "write-output",
        }
    }
}

fn exit_code(stage: Stage, e: &Error) -> i32 {
    match (stage, e) {
        (_, Error::Internal(_)) => EXIT_INTERNAL,
        (_, Error::Infeasible(_)) => EXIT_INFEASIBLE,
        (Stage::Config, _) => EXIT_CONFIG,
        (Stage::Input, _) => EXIT_INPUT,
        (Stage::Run, Error::Invalid(_)) => EXIT_CONFIG,
        (Stage::Run, _) => EXIT_INPUT,
        (Stage::Output, _) => EXIT_INTERNAL,
    }
}

struct Ctx {
    command: &'static str,
}

impl Ctx {
    fn at<T>(&self, stage: Stage, r: Result<T>) -> std::result::Result<T, Failure> {
        r.map_err(|e| Failure {
            code: exit_code(stage, &e),
            command: self.command,
            operation: stage.name(),
            cause: e.to_string(),
        })
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(summary) => {
            print!("{summary}");
            EXIT_OK
        }
        Err(f) => {
            eprintln!("{f}");
            f.code
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Hierarchy => "hierarchy",
        Command::Cocluster { .. } => "cocluster",
        Command::Multires => "multires",
        Command::Video => "video",
        Command::Eval { .. } => "eval",
        Command::Render => "render",
        Command::Synth => "synth",
    }
}

/// Runs one command and returns a human-readable summary.
pub fn run(cli: &Cli) -> std::result::Result<String, Failure> {
    let ctx = Ctx {
        command: command_name(&cli.command),
    };
    let config = ctx.at(Stage::Config, effective_config(&cli.overrides))?;
    let output = ctx.at(
        Stage::Config,
        config
            .output
            .clone()
            .ok_or_else(|| Error::invalid("no output directory (use --output or the config file)")),
    )?;
    ctx.at(Stage::Config, check_output(&output, cli.overrides.force))?;
    let staging = ctx.at(Stage::Output, stage_dir(&output))?;
    let result = execute(&ctx, &cli.command, &config, &staging);
    match result {
        Ok(summary) => {
            ctx.at(Stage::Output, publish(&staging, &output))?;
            Ok(summary)
        }
        Err(f) => {
            let _ = std::fs::remove_dir_all(&staging);
            Err(f)
        }
    }
}

fn effective_config(o: &Overrides) -> Result<RunConfig> {
    let mut c = match &o.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let set = |dst: &mut Vec<PathBuf>, src: &Vec<PathBuf>| {
        if !src.is_empty() {
            *dst = src.clone();
        }
    };
    set(&mut c.frames, &o.frames);
    set(&mut c.leaves, &o.leaves);
    set(&mut c.hierarchies, &o.hierarchies);
    set(&mut c.ground_truth, &o.ground_truth);
    if o.bundle.is_some() {
        c.bundle = o.bundle.clone();
    }
    if o.output.is_some() {
        c.output = o.output.clone();
    }
    if let Some(v) = o.levels {
        c.schedule.levels = v;
    }
    if let Some(v) = o.t_max {
        c.schedule.t_max = v;
    }
    if let Some(v) = o.t_min {
        c.schedule.t_min = v;
    }
    if let Some(v) = o.beta {
        c.schedule.beta = v;
    }
    if let Some(v) = o.window {
        c.pipeline.descriptors.window = v;
    }
    if let Some(v) = o.mu {
        c.pipeline.descriptors.mu = v;
    }
    if let Some(w) = &o.weighting {
        c.pipeline.weighting = match w.as_str() {
            "length" => BandWeighting::Length,
            "count" => BandWeighting::Count,
            other => return Err(Error::invalid(format!("unknown weighting `{other}`"))),
        };
    }
    if let Some(v) = o.exact_limit {
        c.pipeline.solver.exact_limit = v;
    }
    if let Some(v) = o.seed {
        c.seed = v;
    }
    c.validate()?;
    Ok(c)
}

fn check_output(output: &Path, force: bool) -> Result<()> {
    if output.exists() {
        let empty = output.is_dir()
            && std::fs::read_dir(output)
                .map_err(|e| Error::io(output, e))?
                .next()
                .is_none();
        if !empty && !force {
            return Err(Error::invalid(format!(
                "{} exists; pass --force to replace it",
                output.display()
            )));
        }
    }
    Ok(())
}

fn stage_dir(output: &Path) -> Result<PathBuf> {
    let name = output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let staging = output.with_file_name(format!(".{name}.partial-{}", std::process::id()));
    if staging.exists() {
        std::fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    std::fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    Ok(staging)
}

fn publish(staging: &Path, output: &Path) -> Result<()> {
    if output.exists() {
        if output.is_dir() {
            std::fs::remove_dir_all(output).map_err(|e| Error::io(output, e))?;
        } else {
            std::fs::remove_file(output).map_err(|e| Error::io(output, e))?;
        }
    }
    std::fs::rename(staging, output).map_err(|e| Error::io(output, e))
}

fn load_frames(config: &RunConfig) -> Result<Vec<Frame>> {
    if config.frames.is_empty() {
        return Err(Error::invalid("no input frames"));
    }
    config
        .frames
        .iter()
        .enumerate()
        .map(|(f, path)| {
            let image = load_image(path)?;
            let leaves = match config.leaves.get(f) {
                Some(p) => load_label_map(p)?,
                None => {
                    let o = config.over_segmentation;
                    LabelMap::over_segment(&image, o.levels, o.block)?
                }
            };
            let hierarchy = match config.hierarchies.get(f) {
                Some(p) => Hierarchy::load(p)?,
                None => build_bpt(&image, &leaves)?,
            };
            Frame::new(image, leaves, hierarchy)
        })
        .collect()
}

fn require_bundle(config: &RunConfig) -> Result<SolutionBundle> {
    let dir = config
        .bundle
        .as_ref()
        .ok_or_else(|| Error::invalid("no solution bundle (use --bundle or the config file)"))?;
    read_bundle(dir)
}

fn execute(ctx: &Ctx, command: &Command, config: &RunConfig, out: &Path) -> std::result::Result<String, Failure> {
    match command {
        Command::Hierarchy => {
            let frames = ctx.at(Stage::Input, load_frames(config))?;
            for (f, frame) in frames.iter().enumerate() {
                ctx.at(Stage::Output, frame.hierarchy.save(out.join(format!("hierarchy_{f:03}.json"))))?;
                let path = out.join(format!("leaves_{f:03}.csv"));
                let text = raw_label_csv(frame.leaves.width(), frame.leaves.labels());
                ctx.at(Stage::Output, std::fs::write(&path, text).map_err(|e| Error::io(&path, e)))?;
            }
            Ok(format!("wrote {} hierarchies\n", frames.len()))
        }
        Command::Cocluster { t } => {
            let frames = ctx.at(Stage::Input, load_frames(config))?;
            let level = Level {
                t: t.unwrap_or(config.schedule.t_max),
                beta: config.schedule.beta,
            };
            let schedule = ctx.at(Stage::Config, Schedule::new(vec![level]))?;
            let outcome = ctx.at(Stage::Run, cocluster(&frames, level, &config.pipeline))?;
            if let LevelOutcome::Infeasible { reason, .. } = &outcome {
                return ctx.at(Stage::Run, Err(Error::Infeasible(reason.clone())));
            }
            let bundle = SolutionBundle::from_levels(&frames, &schedule, &[outcome]);
            ctx.at(Stage::Output, write_bundle(&bundle, out))?;
            Ok(summarize(&bundle))
        }
        Command::Multires | Command::Video => {
            let frames = ctx.at(Stage::Input, load_frames(config))?;
            let schedule = ctx.at(Stage::Config, config.schedule.build())?;
            let bundle = if matches!(command, Command::Video) {
                ctx.at(Stage::Run, video_segment(&frames, &schedule, &config.pipeline))?
            } else {
                let levels = ctx.at(Stage::Run, multiresolution(&frames, &schedule, &config.pipeline))?;
                SolutionBundle::from_levels(&frames, &schedule, &levels)
            };
            if bundle.labels.iter().all(|levels| levels.iter().all(Option::is_none)) {
                return ctx.at(Stage::Run, Err(Error::Infeasible("every level is infeasible".into())));
            }
            ctx.at(Stage::Output, write_bundle(&bundle, out))?;
            Ok(summarize(&bundle))
        }
        Command::Eval { tolerance } => {
            let bundle = ctx.at(Stage::Input, require_bundle(config))?;
            let gt = ctx.at(Stage::Input, load_ground_truth(config, &bundle))?;
            let report = ctx.at(Stage::Run, evaluate(&bundle, &gt, *tolerance))?;
            for (name, text) in &report.files {
                let path = out.join(name);
                ctx.at(Stage::Output, std::fs::write(&path, text).map_err(|e| Error::io(&path, e)))?;
            }
            Ok(report.summary)
        }
        Command::Render => {
            let bundle = ctx.at(Stage::Input, require_bundle(config))?;
            if config.frames.len() != bundle.frame_count() {
                return ctx.at(
                    Stage::Input,
                    Err(Error::Dimension(format!(
                        "{} frames for a {}-frame bundle",
                        config.frames.len(),
                        bundle.frame_count()
                    ))),
                );
            }
            let mut count = 0;
            for (f, path) in config.frames.iter().enumerate() {
                let image = ctx.at(Stage::Input, load_image(path))?;
                let dir = out.join(format!("frame_{f:03}"));
                ctx.at(Stage::Output, std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e)))?;
                for r in 0..bundle.schedule.len() {
                    let Some(labels) = bundle.pixel_labels(f, r) else { continue };
                    let overlay = ctx.at(Stage::Input, boundary_overlay(&image, &labels))?;
                    let fill = ctx.at(Stage::Input, color_fill(image.width(), image.height(), &labels))?;
                    ctx.at(Stage::Output, save_image(&overlay, dir.join(format!("level_{r:02}_overlay.png"))))?;
                    ctx.at(Stage::Output, save_image(&fill, dir.join(format!("level_{r:02}_fill.png"))))?;
                    count += 1;
                }
            }
            Ok(format!("rendered {count} labelings\n"))
        }
        Command::Synth => {
            let sequences = ctx.at(Stage::Run, fixture_set(config.seed))?;
            for seq in &sequences {
                ctx.at(Stage::Output, write_sequence(seq, config.seed, &out.join(seq.name)))?;
            }
            let names: Vec<&str> = sequences.iter().map(|s| s.name).collect();
            Ok(format!("wrote fixtures: {}\n", names.join(", ")))
        }
    }
}

fn summarize(bundle: &SolutionBundle) -> String {
    let mut s = String::new();
    for (r, level) in bundle.schedule.levels().iter().enumerate() {
        let solved = (0..bundle.frame_count()).filter(|&f| bundle.labels[f][r].is_some()).count();
        let _ = writeln!(s, "level {r:02} t={:.4}: {solved}/{} frames solved", level.t, bundle.frame_count());
    }
    s
}

/// Object label maps per frame, checked against the bundle grids.
fn load_ground_truth(config: &RunConfig, bundle: &SolutionBundle) -> Result<Vec<Vec<u32>>> {
    if config.ground_truth.len() != bundle.frame_count() {
        return Err(Error::Dimension(format!(
            "{} ground-truth maps for a {}-frame bundle",
            config.ground_truth.len(),
            bundle.frame_count()
        )));
    }
    config
        .ground_truth
        .iter()
        .zip(&bundle.leaves)
        .map(|(path, leaves)| {
            let (w, h, labels) = load_raw_labels(path)?;
            if !leaves.same_grid(w, h) {
                return Err(Error::Dimension(format!("{} is {w}x{h}", path.display())));
            }
            Ok(labels)
        })
        .collect()
}

/// Metric files by name plus a printed summary.
pub struct EvalReport {
    pub files: Vec<(String, String)>,
    pub summary: String,
}

/// Per object: frame curves (upper envelope over levels), the sequence curve
/// and boundary precision/recall for every solved labeling.
pub fn evaluate(bundle: &SolutionBundle, gt: &[Vec<u32>], tolerance: f64) -> Result<EvalReport> {
    let n = bundle.frame_count();
    let (w, h) = (bundle.leaves[0].width(), bundle.leaves[0].height());
    let objects: std::collections::BTreeSet<u32> = gt.iter().flatten().copied().filter(|&l| l != 0).collect();
    let mut files = Vec::new();
    let mut summary = String::new();
    let mut pr = String::from("frame,level,precision,recall\n");
    for f in 0..n {
        let truth = boundary_pixels(w, h, &gt[f])?;
        for r in 0..bundle.schedule.len() {
            if let Some(labels) = bundle.pixel_labels(f, r) {
                let p = boundary_pr(&boundary_pixels(w, h, &labels)?, &truth, tolerance)?;
                let _ = writeln!(pr, "{f},{r},{},{}", p.precision, p.recall);
            }
        }
    }
    files.push(("boundary_pr.csv".to_string(), pr));
    for &k in &objects {
        let masks: Vec<PixelSet> = gt
            .iter()
            .map(|g| PixelSet::new(w, h, g.iter().map(|&l| l == k).collect()))
            .collect::<Result<_>>()?;
        for f in 0..n {
            let mut curves = Vec::new();
            for r in 0..bundle.schedule.len() {
                if let Some(labels) = bundle.pixel_labels(f, r) {
                    curves.push(consistency_curve_labels(w, h, &labels, &masks[f])?);
                }
            }
            let env = ConsistencyCurve::upper_envelope(&curves);
            let _ = writeln!(
                summary,
                "object {k} frame {f}: max consistency {:.4}",
                env.max_consistency()
            );
            files.push((format!("consistency_object{k}_frame{f:03}.csv"), env.to_csv()));
        }
        let mut curves = Vec::new();
        for r in 0..bundle.schedule.len() {
            let frames: Option<Vec<(usize, usize, Vec<u32>)>> =
                (0..n).map(|f| bundle.pixel_labels(f, r).map(|l| (w, h, l))).collect();
            if let Some(frames) = frames {
                curves.push(sequence_curve(&frames, &masks)?);
            }
        }
        let env = ConsistencyCurve::upper_envelope(&curves);
        let _ = writeln!(summary, "object {k} sequence: max consistency {:.4}", env.max_consistency());
        files.push((format!("sequence_object{k}.csv"), env.to_csv()));
    }
    Ok(EvalReport { files, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_stage() {
        assert_eq!(exit_code(Stage::Config, &Error::invalid("x")), EXIT_CONFIG);
        assert_eq!(exit_code(Stage::Input, &Error::format("a", "b")), EXIT_INPUT);
        assert_eq!(exit_code(Stage::Run, &Error::Infeasible("x".into())), EXIT_INFEASIBLE);
        assert_eq!(exit_code(Stage::Input, &Error::Internal("x".into())), EXIT_INTERNAL);
    }

    #[test]
    fn unknown_flag_is_a_config_error() {
        assert_eq!(run_from(["hcocluster", "synth", "--no-such-flag"]), EXIT_CONFIG);
    }

    #[test]
    fn overrides_apply() {
        let o = Overrides {
            levels: Some(4),
            mu: Some(0.3),
            weighting: Some("count".into()),
            ..Overrides::default()
        };
        let c = effective_config(&o).unwrap();
        assert_eq!(c.schedule.levels, 4);
        assert_eq!(c.pipeline.descriptors.mu, 0.3);
        assert_eq!(c.pipeline.weighting, BandWeighting::Count);
        let bad = Overrides {
            weighting: Some("area".into()),
            ..Overrides::default()
        };
        assert!(effective_config(&bad).is_err());
    }
}
