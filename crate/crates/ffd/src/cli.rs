//! Command-line interface. Every command is deterministic given its flags and
//! `--seed`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use ffd_core::ffd::{deform, ControlLattice, DEFAULT_DOMAIN_PADDING};
use ffd_core::geometry::{normalize_for_eval, resample, sample_surface, voxelize, DEFAULT_VOXEL_PADDING};
use ffd_core::metrics::{chamfer_fast_terms, emd_exact};
use ffd_core::retrieval::{
    knn_retrieve, shape_descriptor, train_encoder, triplet_margin_violations, DescriptorConfig, EmbeddingBatch,
    EncoderParams, TrainConfig, DEFAULT_EMBEDDING_DIM, DEFAULT_K, DEFAULT_MARGIN,
};
use ffd_core::fit::LossKind;

use crate::config::{read_settings, FitSettings};
use crate::db;
use crate::error::{CliError, CliResult};
use crate::formats::{
    format_encoder, format_voxels, is_cloud_path, read_cloud, read_encoder, read_field, read_mesh, read_text,
    write_cloud, write_text,
};
use crate::numfmt::{fmt9, join9};
use crate::pipeline::{run_fit, run_manifest, write_fit_outputs, PipelineManifest, Selection, DEFAULT_FIT_POINTS};

/// Surface samples per mesh before voxelization.
pub const DEFAULT_DENSIFY: usize = 16384;

#[derive(Debug, Parser)]
#[command(name = "ffd", version, about = "Free-form deformation fitting and template retrieval for point clouds")]
pub struct Cli {
    /// Seed for every random choice; 0 when omitted.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppress informational output on stdout.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricKind {
    Cd,
    Emd,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample points uniformly by area from an OBJ mesh.
    Sample {
        mesh: PathBuf,
        #[arg(short, long)]
        n: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Draw a fixed number of points from a cloud (with replacement when growing).
    Resample {
        cloud: PathBuf,
        #[arg(short, long)]
        n: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Center on x and z, put the lowest point at y = 0 and scale into the unit ball.
    Normalize {
        cloud: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Also write the transform as `scale tx ty tz`.
        #[arg(long)]
        transform: Option<PathBuf>,
    },
    /// Occupancy grid of a cloud, or of a densely sampled OBJ mesh.
    Voxelize {
        input: PathBuf,
        #[arg(short, long)]
        resolution: usize,
        #[arg(short, long)]
        out: PathBuf,
        /// Relative padding of the bounding cube.
        #[arg(long, default_value_t = DEFAULT_VOXEL_PADDING)]
        padding: f64,
        /// Surface samples drawn when the input is a mesh.
        #[arg(long, default_value_t = DEFAULT_DENSIFY)]
        densify: usize,
    },
    /// Chamfer (`cd_sum cd_avg`) or Earth Mover's (`emd_cost`) distance.
    Metric {
        kind: MetricKind,
        a: PathBuf,
        b: PathBuf,
        /// Resample both clouds to this many points first.
        #[arg(long)]
        resample: Option<usize>,
        /// Write the EMD assignment as `i j` lines.
        #[arg(long)]
        assignment: Option<PathBuf>,
    },
    /// Apply a deformation field to a cloud.
    Deform {
        cloud: PathBuf,
        #[arg(long)]
        field: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Cloud whose bounding box defines the lattice, normally the template the
        /// field was fitted on; the input cloud itself when omitted.
        #[arg(long)]
        domain_from: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_DOMAIN_PADDING)]
        padding: f64,
    },
    /// Fit a lattice deformation of the template onto the target.
    Fit {
        template: PathBuf,
        target: PathBuf,
        /// Output directory for deformed.xyz, field.txt and trace.csv.
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        loss: Option<String>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        lambda_smooth: Option<f64>,
        #[arg(long)]
        lambda_l1: Option<f64>,
    },
    /// Build a template database directory from point-cloud files.
    DbBuild {
        #[arg(required = true)]
        clouds: Vec<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        /// Trained encoder; a seeded random one when omitted.
        #[arg(long)]
        encoder: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_EMBEDDING_DIM)]
        dim: usize,
        #[arg(long, default_value_t = 64)]
        bins: usize,
        #[arg(long, default_value_t = 4096)]
        pairs: usize,
    },
    /// Print the K nearest templates as `rank id distance`.
    DbQuery {
        db: PathBuf,
        query: PathBuf,
        #[arg(short, long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long)]
        encoder: Option<PathBuf>,
    },
    /// Train the descriptor encoder from a list of `label cloud-path` lines.
    EmbedTrain {
        list: PathBuf,
        /// Output encoder file.
        #[arg(short, long)]
        out: PathBuf,
        /// Use this database's descriptor settings and store the encoder in it.
        #[arg(long)]
        db: Option<PathBuf>,
        /// Starting encoder; seeded random when omitted.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        #[arg(long, default_value_t = DEFAULT_MARGIN)]
        margin: f64,
        #[arg(long, default_value_t = DEFAULT_EMBEDDING_DIM)]
        dim: usize,
        /// Independent resamplings per shape; these form the positive pairs.
        #[arg(long, default_value_t = 4)]
        resamplings: usize,
        #[arg(long, default_value_t = DEFAULT_FIT_POINTS)]
        points: usize,
    },
    /// Retrieve templates for a query cloud, fit one, and write a report.
    Reconstruct {
        /// `key=value` manifest; flags override its entries.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long)]
        query: Option<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        k: Option<usize>,
        #[arg(long)]
        points: Option<usize>,
        /// Use the nearest template instead of a seeded choice among the top K.
        #[arg(long, conflicts_with = "try_all")]
        best: bool,
        /// Fit every candidate in parallel and keep the lowest final Chamfer distance.
        #[arg(long)]
        try_all: bool,
    },
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    match run(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn say(cli: &Cli, out: &mut dyn Write, line: &str) -> CliResult<()> {
    if !cli.quiet {
        writeln!(out, "{line}").map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
    }
    Ok(())
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Sample { mesh, n, out: path } => {
            let pc = sample_surface(&read_mesh(mesh)?, *n, seed)?;
            write_cloud(path, &pc)
        }
        Command::Resample { cloud, n, out: path } => write_cloud(path, &resample(&read_cloud(cloud)?, *n, seed)?),
        Command::Normalize { cloud, out: path, transform } => {
            let (pc, t) = normalize_for_eval(&read_cloud(cloud)?)?;
            write_cloud(path, &pc)?;
            if let Some(tp) = transform {
                let line = join9([t.scale, t.translation.x, t.translation.y, t.translation.z]);
                write_text(tp, &(line + "\n"))?;
            }
            Ok(())
        }
        Command::Voxelize { input, resolution, out: path, padding, densify } => {
            let pc = if is_cloud_path(input) {
                read_cloud(input)?
            } else {
                sample_surface(&read_mesh(input)?, *densify, seed)?
            };
            let extent = pc.bounds().padded(*padding);
            write_text(path, &format_voxels(&voxelize(&pc, *resolution, extent)?))
        }
        Command::Metric { kind, a, b, resample: n, assignment } => {
            let (mut pa, mut pb) = (read_cloud(a)?, read_cloud(b)?);
            if let Some(n) = n {
                pa = resample(&pa, *n, seed)?;
                pb = resample(&pb, *n, seed.wrapping_add(1))?;
            }
            match kind {
                MetricKind::Cd => {
                    let v = chamfer_fast_terms(&pa, &pb);
                    writeln!(out, "{}", join9([v.sum(), v.mean_per_direction()]))
                        .map_err(|e| CliError::io(Path::new("<stdout>"), e))
                }
                MetricKind::Emd => {
                    if pa.len() != pb.len() {
                        return Err(CliError::SizeMismatch(format!(
                            "emd needs equal point counts, got {} and {}; pass --resample N",
                            pa.len(),
                            pb.len()
                        )));
                    }
                    let asg = emd_exact(&pa, &pb)?;
                    if let Some(path) = assignment {
                        let text: String = asg.mapping().iter().enumerate().map(|(i, j)| format!("{i} {j}\n")).collect();
                        write_text(path, &text)?;
                    }
                    writeln!(out, "{}", fmt9(asg.cost())).map_err(|e| CliError::io(Path::new("<stdout>"), e))
                }
            }
        }
        Command::Deform { cloud, field, out: path, domain_from, padding } => {
            let pc = read_cloud(cloud)?;
            let domain_cloud = match domain_from {
                Some(p) => read_cloud(p)?,
                None => pc.clone(),
            };
            let header = read_text(field)?;
            let degrees = crate::formats::parse_field(field, &header)?.degrees();
            let lattice = ControlLattice::around(&domain_cloud, degrees, *padding)?;
            let f = read_field(field, &lattice)?;
            write_cloud(path, &deform(&lattice, &f, &pc)?)
        }
        Command::Fit { template, target, out: dir, config, loss, iterations, lambda_smooth, lambda_l1 } => {
            let mut settings = match config {
                Some(p) => read_settings(p)?,
                None => FitSettings::default(),
            };
            if let Some(s) = cli.seed {
                settings.fit.seed = s;
            }
            if let Some(l) = loss {
                settings.fit.loss =
                    LossKind::from_name(l).ok_or_else(|| CliError::Usage(format!("unknown loss `{l}`")))?;
            }
            if let Some(i) = iterations {
                settings.fit.iterations = *i;
            }
            if let Some(v) = lambda_smooth {
                settings.fit.regularizer_weights.lambda_smooth = *v;
            }
            if let Some(v) = lambda_l1 {
                settings.fit.regularizer_weights.lambda_l1 = *v;
            }
            let (tp, tg) = (read_cloud(template)?, read_cloud(target)?);
            let run = run_fit(&tp, &tg, &settings)?;
            write_fit_outputs(dir, &run.deformed, &run)?;
            say(
                cli,
                out,
                &format!(
                    "initial_cd {} final_cd {}",
                    fmt9(run.initial.mean_per_direction()),
                    fmt9(run.fitted.mean_per_direction())
                ),
            )
        }
        Command::DbBuild { clouds, out: dir, encoder, dim, bins, pairs } => {
            let descriptor = DescriptorConfig { bins: *bins, pairs: *pairs, seed };
            let params = match encoder {
                Some(p) => read_encoder(p)?,
                None => EncoderParams::random(*dim, descriptor.len(), seed)?,
            };
            let loaded = db::build(dir, clouds, &params, &descriptor)?;
            say(cli, out, &format!("{} templates", loaded.db.len()))
        }
        Command::DbQuery { db: dir, query, k, encoder } => {
            let params = encoder.as_deref().map(read_encoder).transpose()?;
            let loaded = db::load(dir, params)?;
            if loaded.db.is_empty() {
                return Err(CliError::EmptyDatabase);
            }
            let descriptor = db::descriptor_of(&read_cloud(query)?, &loaded.descriptor)?;
            for (rank, n) in knn_retrieve(&descriptor, &loaded.db, &loaded.params, *k)?.iter().enumerate() {
                writeln!(out, "{} {} {}", rank + 1, n.id, fmt9(n.distance))
                    .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
            }
            Ok(())
        }
        Command::EmbedTrain { list, out: path, db: db_dir, init, epochs, lr, margin, dim, resamplings, points } => {
            let descriptor = match db_dir {
                Some(d) => db::load(d, None)?.descriptor,
                None => DescriptorConfig { seed, ..DescriptorConfig::default() },
            };
            let (descriptors, labels) = training_set(list, &descriptor, *resamplings, *points, seed)?;
            let params = match init {
                Some(p) => read_encoder(p)?,
                None => EncoderParams::random(*dim, descriptor.len(), seed)?,
            };
            let cfg = TrainConfig { margin: *margin, epochs: *epochs, lr: *lr, seed, ..TrainConfig::default() };
            let outcome = train_encoder(&descriptors, &labels, &params, &cfg)?;
            write_text(path, &format_encoder(&outcome.params))?;
            if let Some(d) = db_dir {
                db::store_encoder(d, &outcome.params)?;
            }
            let embedded = descriptors.iter().map(|d| outcome.params.embed(d)).collect::<Result<Vec<_>, _>>()?;
            let violations = triplet_margin_violations(&EmbeddingBatch::new(embedded, labels)?, *margin).0;
            let first = outcome.epoch_losses.first().copied().unwrap_or(0.0);
            let last = outcome.epoch_losses.last().copied().unwrap_or(0.0);
            say(cli, out, &format!("loss {} -> {} violations {violations}", fmt9(first), fmt9(last)))
        }
        Command::Reconstruct { manifest, db: db_dir, query, out: dir, config, k, points, best, try_all } => {
            let mut m = match manifest {
                Some(p) => PipelineManifest::read(p)?,
                None => PipelineManifest::new(PathBuf::new(), PathBuf::new(), PathBuf::new()),
            };
            if let Some(v) = db_dir {
                m.db = v.clone();
            }
            if let Some(v) = query {
                m.query = v.clone();
            }
            if let Some(v) = dir {
                m.out = v.clone();
            }
            if let Some(v) = config {
                m.config = Some(v.clone());
            }
            if let Some(v) = k {
                m.k = *v;
            }
            if let Some(v) = points {
                m.points = *v;
            }
            if let Some(s) = cli.seed {
                m.seed = s;
            }
            if *best {
                m.selection = Selection::Best;
            } else if *try_all {
                m.selection = Selection::TryAll;
            }
            let rec = run_manifest(&m)?;
            if !cli.quiet {
                write!(out, "{}", rec.report()).map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
            }
            Ok(())
        }
    }
}

/// Descriptors of `resamplings` independent resamplings of every listed shape.
/// Relative paths in the list resolve against its directory.
fn training_set(
    list: &Path,
    descriptor: &DescriptorConfig,
    resamplings: usize,
    points: usize,
    seed: u64,
) -> CliResult<(Vec<Vec<f64>>, Vec<u64>)> {
    if resamplings < 2 {
        return Err(CliError::Usage("resamplings must be at least 2 to form positive pairs".into()));
    }
    let base = list.parent().unwrap_or(Path::new(""));
    let text = read_text(list)?;
    let mut descriptors = Vec::new();
    let mut labels = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let t: Vec<&str> = raw.split_whitespace().collect();
        if t.is_empty() || t[0].starts_with('#') {
            continue;
        }
        if t.len() != 2 {
            return Err(CliError::parse(list, i + 1, "expected `label cloud-path`"));
        }
        let label: u64 = t[0].parse().map_err(|_| CliError::parse(list, i + 1, "label must be an integer"))?;
        let (normalized, _) = normalize_for_eval(&read_cloud(&base.join(t[1]))?)?;
        for r in 0..resamplings as u64 {
            let sample_seed = seed.wrapping_add(1 + r).wrapping_add((i as u64) << 32);
            let pc = resample(&normalized, points, sample_seed)?;
            let cfg = DescriptorConfig { seed: descriptor.seed.wrapping_add(r), ..*descriptor };
            descriptors.push(shape_descriptor(&pc, &cfg)?);
            labels.push(label);
        }
    }
    Ok((descriptors, labels))
}
