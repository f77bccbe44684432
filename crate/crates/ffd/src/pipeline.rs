//! Fitting runs and the retrieve-then-deform reconstruction.

use std::path::{Path, PathBuf};
use std::thread;

use ffd_core::ffd::{deform, ControlLattice, DeformationField};
use ffd_core::fit::{fit_deformation, FitTrace};
use ffd_core::geometry::{normalize_for_eval, resample, seeded_rng, PointCloud};
use ffd_core::metrics::{chamfer_fast_terms, ChamferValue};
use ffd_core::retrieval::{knn_retrieve, Neighbor, DEFAULT_K};
use rand::Rng;

use crate::config::{read_settings, FitSettings};
use crate::db::{self, LoadedDatabase};
use crate::error::{CliError, CliResult};
use crate::formats::{format_field, format_trace, read_cloud, read_text, write_cloud, write_text};
use crate::numfmt::fmt9;

/// Points per cloud during reconstruction fits.
pub const DEFAULT_FIT_POINTS: usize = 1024;

/// One template fitted to one target.
#[derive(Debug, Clone)]
pub struct FitRun {
    pub lattice: ControlLattice,
    pub field: DeformationField,
    pub trace: FitTrace,
    pub best_iteration: usize,
    pub deformed: PointCloud,
    pub initial: ChamferValue,
    pub fitted: ChamferValue,
}

pub fn run_fit(template: &PointCloud, target: &PointCloud, settings: &FitSettings) -> CliResult<FitRun> {
    settings.validate().map_err(CliError::Usage)?;
    let lattice = ControlLattice::around(template, settings.degrees(), settings.padding)?;
    let outcome = fit_deformation(template, target, &lattice, &settings.fit)?;
    let deformed = deform(&lattice, &outcome.field, template)?;
    Ok(FitRun {
        initial: chamfer_fast_terms(template, target),
        fitted: chamfer_fast_terms(&deformed, target),
        lattice,
        field: outcome.field,
        trace: outcome.trace,
        best_iteration: outcome.best_iteration,
        deformed,
    })
}

/// Writes `deformed.xyz`, `field.txt` and `trace.csv` into `dir`.
pub fn write_fit_outputs(dir: &Path, deformed: &PointCloud, run: &FitRun) -> CliResult<()> {
    write_cloud(&dir.join("deformed.xyz"), deformed)?;
    write_text(&dir.join("field.txt"), &format_field(&run.field))?;
    write_text(&dir.join("trace.csv"), &format_trace(&run.trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    /// Uniformly among the top K, by seed.
    Random,
    /// Rank 1.
    Best,
    /// Fit every candidate and keep the lowest final Chamfer distance.
    TryAll,
}

impl Selection {
    pub fn name(self) -> &'static str {
        match self {
            Selection::Random => "random",
            Selection::Best => "best",
            Selection::TryAll => "try-all",
        }
    }

    pub fn from_name(s: &str) -> Option<Selection> {
        match s {
            "random" => Some(Selection::Random),
            "best" => Some(Selection::Best),
            "try-all" | "try_all" => Some(Selection::TryAll),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineManifest {
    pub db: PathBuf,
    pub query: PathBuf,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
    pub k: usize,
    pub seed: u64,
    pub points: usize,
    pub selection: Selection,
}

impl PipelineManifest {
    pub fn new(db: PathBuf, query: PathBuf, out: PathBuf) -> Self {
        PipelineManifest {
            db,
            query,
            out,
            config: None,
            k: DEFAULT_K,
            seed: 0,
            points: DEFAULT_FIT_POINTS,
            selection: Selection::Random,
        }
    }

    /// `key=value` lines with keys `db`, `query`, `out`, `config`, `k`, `seed`,
    /// `points` and `selection`. Relative paths resolve against the manifest's
    /// directory.
    pub fn parse(path: &Path, text: &str) -> CliResult<Self> {
        let base = path.parent().unwrap_or(Path::new(""));
        let mut m = PipelineManifest::new(PathBuf::new(), PathBuf::new(), PathBuf::new());
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| CliError::parse(path, i + 1, "expected `key=value`"))?;
            let (k, v) = (k.trim(), v.trim());
            let bad = || CliError::parse(path, i + 1, format!("invalid value `{v}` for {k}"));
            match k {
                "db" => m.db = base.join(v),
                "query" => m.query = base.join(v),
                "out" => m.out = base.join(v),
                "config" => m.config = Some(base.join(v)),
                "k" => m.k = v.parse().map_err(|_| bad())?,
                "seed" => m.seed = v.parse().map_err(|_| bad())?,
                "points" => m.points = v.parse().map_err(|_| bad())?,
                "selection" => m.selection = Selection::from_name(v).ok_or_else(bad)?,
                other => return Err(CliError::ConfigKey { path: path.to_path_buf(), key: other.to_string() }),
            }
        }
        Ok(m)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        Self::parse(path, &read_text(path)?)
    }

    pub fn validate(&self) -> CliResult<()> {
        for (name, p) in [("db", &self.db), ("query", &self.query), ("out", &self.out)] {
            if p.as_os_str().is_empty() {
                return Err(CliError::Usage(format!("manifest is missing `{name}`")));
            }
        }
        for p in [Some(&self.db), Some(&self.query), self.config.as_ref()].into_iter().flatten() {
            if !p.exists() {
                return Err(CliError::NotFound(p.clone()));
            }
        }
        if self.k == 0 {
            return Err(CliError::Usage("k must be positive".into()));
        }
        if self.points == 0 {
            return Err(CliError::Usage("points must be positive".into()));
        }
        std::fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub neighbors: Vec<Neighbor>,
    /// Index into `neighbors` of the template used.
    pub chosen: usize,
    pub run: FitRun,
    /// The deformed template in the query's original frame.
    pub deformed: PointCloud,
    pub selection: Selection,
}

impl Reconstruction {
    pub fn template_id(&self) -> &str {
        &self.neighbors[self.chosen].id
    }

    /// Brace-delimited `"key": value` report.
    pub fn report(&self) -> String {
        let candidates: Vec<String> = self.neighbors.iter().map(|n| format!("\"{}\"", n.id)).collect();
        let r = &self.run;
        format!(
            "{{\n  \"template\": \"{}\",\n  \"rank\": {},\n  \"selection\": \"{}\",\n  \"candidates\": [{}],\n  \
             \"embedding_distance\": {},\n  \"initial_cd\": {},\n  \"final_cd\": {},\n  \"initial_cd_sum\": {},\n  \
             \"final_cd_sum\": {},\n  \"iterations\": {},\n  \"best_iteration\": {}\n}}\n",
            self.template_id(),
            self.chosen + 1,
            self.selection.name(),
            candidates.join(", "),
            fmt9(self.neighbors[self.chosen].distance),
            fmt9(r.initial.mean_per_direction()),
            fmt9(r.fitted.mean_per_direction()),
            fmt9(r.initial.sum()),
            fmt9(r.fitted.sum()),
            r.trace.len(),
            r.best_iteration,
        )
    }
}

/// Retrieves up to K templates for the query, picks one (or fits all), and
/// deforms it onto the query. Fitting happens in the query's normalized frame
/// with both clouds resampled to `points` using the same seed.
pub fn reconstruct(
    manifest: &PipelineManifest,
    database: &LoadedDatabase,
    settings: &FitSettings,
) -> CliResult<Reconstruction> {
    if database.db.is_empty() {
        return Err(CliError::EmptyDatabase);
    }
    let query = read_cloud(&manifest.query)?;
    let (query_normalized, transform) = normalize_for_eval(&query)?;
    let descriptor = db::descriptor_of(&query, &database.descriptor)?;
    let k = manifest.k.min(database.db.len());
    let neighbors = knn_retrieve(&descriptor, &database.db, &database.params, k)?;
    let target = resample(&query_normalized, manifest.points, manifest.seed)?;
    let fit_one = |index: usize| -> CliResult<FitRun> {
        let template = resample(&database.cloud(&neighbors[index].id)?, manifest.points, manifest.seed)?;
        run_fit(&template, &target, settings)
    };
    let (chosen, run) = match manifest.selection {
        Selection::Best => (0, fit_one(0)?),
        Selection::Random => {
            let i = seeded_rng(manifest.seed).random_range(0..neighbors.len());
            (i, fit_one(i)?)
        }
        Selection::TryAll => {
            let runs: Vec<CliResult<FitRun>> = thread::scope(|scope| {
                let handles: Vec<_> = (0..neighbors.len()).map(|i| scope.spawn(move || fit_one(i))).collect();
                handles.into_iter().map(|h| h.join().expect("fit thread panicked")).collect()
            });
            let mut best: Option<(usize, FitRun)> = None;
            for (i, run) in runs.into_iter().enumerate() {
                let run = run?;
                let better = match &best {
                    None => true,
                    Some((j, b)) => {
                        let (a, c) = (run.fitted.sum(), b.fitted.sum());
                        a < c || (a == c && neighbors[i].id < neighbors[*j].id)
                    }
                };
                if better {
                    best = Some((i, run));
                }
            }
            best.expect("at least one candidate")
        }
    };
    let deformed = transform.invert(&run.deformed);
    Ok(Reconstruction { neighbors, chosen, run, deformed, selection: manifest.selection })
}

/// Loads everything a manifest names, reconstructs, and writes the outputs and
/// `report.txt` into the output directory.
pub fn run_manifest(manifest: &PipelineManifest) -> CliResult<Reconstruction> {
    manifest.validate()?;
    let mut settings = match &manifest.config {
        Some(p) => read_settings(p)?,
        None => FitSettings::default(),
    };
    if manifest.config.is_none() {
        settings.fit.seed = manifest.seed;
    }
    let database = db::load(&manifest.db, None)?;
    let rec = reconstruct(manifest, &database, &settings)?;
    write_fit_outputs(&manifest.out, &rec.deformed, &rec.run)?;
    write_text(&manifest.out.join("report.txt"), &rec.report())?;
    Ok(rec)
}
