//! Template database persisted as a directory:
//!
//! * `index.txt`: one `id descriptor-file cloud-file` line per shape, paths
//!   relative to the directory;
//! * `descriptors/<id>.txt`: whitespace-separated descriptor values;
//! * `clouds/<id>.xyz`: the normalized template cloud;
//! * `encoder.txt`: the encoder the embeddings are computed with;
//! * `descriptor.txt`: `bins=`, `pairs=` and `seed=` of the descriptor.

use std::path::{Path, PathBuf};

use ffd_core::geometry::{normalize_for_eval, PointCloud};
use ffd_core::retrieval::{shape_descriptor, DescriptorConfig, EncoderParams, TemplateDatabase};

use crate::error::{CliError, CliResult};
use crate::formats::{
    format_encoder, format_xyz, parse_vector, read_cloud, read_encoder, read_text, write_text,
};
use crate::numfmt::join9;

pub const INDEX_FILE: &str = "index.txt";
pub const ENCODER_FILE: &str = "encoder.txt";
pub const DESCRIPTOR_CONFIG_FILE: &str = "descriptor.txt";

/// A database with the encoder and descriptor settings it was built with.
#[derive(Debug, Clone)]
pub struct LoadedDatabase {
    pub dir: PathBuf,
    pub db: TemplateDatabase,
    pub params: EncoderParams,
    pub descriptor: DescriptorConfig,
}

impl LoadedDatabase {
    /// The stored normalized cloud of entry `id`.
    pub fn cloud(&self, id: &str) -> CliResult<PointCloud> {
        let entry = self.db.get(id).ok_or_else(|| CliError::Usage(format!("unknown template id `{id}`")))?;
        read_cloud(&self.dir.join(&entry.cloud_ref))
    }
}

/// Descriptor of a cloud after evaluation normalization.
pub fn descriptor_of(pc: &PointCloud, config: &DescriptorConfig) -> CliResult<Vec<f64>> {
    let (normalized, _) = normalize_for_eval(pc)?;
    Ok(shape_descriptor(&normalized, config)?)
}

pub fn shape_id(path: &Path) -> CliResult<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .filter(|s| !s.is_empty() && !s.contains(char::is_whitespace))
        .map(str::to_string)
        .ok_or_else(|| CliError::Usage(format!("cannot derive a shape id from {}", path.display())))
}

/// Builds the directory from point-cloud files; ids are the file stems.
pub fn build(
    dir: &Path,
    clouds: &[PathBuf],
    params: &EncoderParams,
    descriptor: &DescriptorConfig,
) -> CliResult<LoadedDatabase> {
    if params.input_dim() != descriptor.len() {
        return Err(CliError::SizeMismatch(format!(
            "encoder input dimension {} does not match descriptor length {}",
            params.input_dim(),
            descriptor.len()
        )));
    }
    let mut items = Vec::with_capacity(clouds.len());
    let mut index = String::new();
    for path in clouds {
        let id = shape_id(path)?;
        if items.iter().any(|(other, _, _): &(String, Vec<f64>, String)| *other == id) {
            return Err(CliError::Usage(format!("duplicate shape id `{id}`")));
        }
        let (normalized, _) = normalize_for_eval(&read_cloud(path)?)?;
        let values = shape_descriptor(&normalized, descriptor)?;
        let descriptor_ref = format!("descriptors/{id}.txt");
        let cloud_ref = format!("clouds/{id}.xyz");
        write_text(&dir.join(&descriptor_ref), &(join9(values.iter().copied()) + "\n"))?;
        write_text(&dir.join(&cloud_ref), &format_xyz(&normalized))?;
        index.push_str(&format!("{id} {descriptor_ref} {cloud_ref}\n"));
        items.push((id, values, cloud_ref));
    }
    write_text(&dir.join(INDEX_FILE), &index)?;
    write_text(&dir.join(ENCODER_FILE), &format_encoder(params))?;
    write_text(
        &dir.join(DESCRIPTOR_CONFIG_FILE),
        &format!("bins={}\npairs={}\nseed={}\n", descriptor.bins, descriptor.pairs, descriptor.seed),
    )?;
    let db = TemplateDatabase::build(items, params)?;
    Ok(LoadedDatabase { dir: dir.to_path_buf(), db, params: params.clone(), descriptor: *descriptor })
}

fn parse_descriptor_config(path: &Path, text: &str) -> CliResult<DescriptorConfig> {
    let mut c = DescriptorConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| CliError::parse(path, i + 1, "expected `key=value`"))?;
        let bad = || CliError::parse(path, i + 1, format!("invalid value `{v}`"));
        match k.trim() {
            "bins" => c.bins = v.trim().parse().map_err(|_| bad())?,
            "pairs" => c.pairs = v.trim().parse().map_err(|_| bad())?,
            "seed" => c.seed = v.trim().parse().map_err(|_| bad())?,
            other => return Err(CliError::ConfigKey { path: path.to_path_buf(), key: other.to_string() }),
        }
    }
    Ok(c)
}

/// Loads a database directory, embedding every entry with `params` when given
/// and with the stored encoder otherwise.
pub fn load(dir: &Path, params: Option<EncoderParams>) -> CliResult<LoadedDatabase> {
    let index_path = dir.join(INDEX_FILE);
    let index = read_text(&index_path)?;
    let params = match params {
        Some(p) => p,
        None => read_encoder(&dir.join(ENCODER_FILE))?,
    };
    let config_path = dir.join(DESCRIPTOR_CONFIG_FILE);
    let descriptor = parse_descriptor_config(&config_path, &read_text(&config_path)?)?;
    let mut items = Vec::new();
    for (i, raw) in index.lines().enumerate() {
        let t: Vec<&str> = raw.split_whitespace().collect();
        if t.is_empty() {
            continue;
        }
        if t.len() != 3 {
            return Err(CliError::parse(&index_path, i + 1, "expected `id descriptor-file cloud-file`"));
        }
        let descriptor_path = dir.join(t[1]);
        let values = parse_vector(&descriptor_path, &read_text(&descriptor_path)?)?;
        items.push((t[0].to_string(), values, t[2].to_string()));
    }
    let db = TemplateDatabase::build(items, &params)?;
    Ok(LoadedDatabase { dir: dir.to_path_buf(), db, params, descriptor })
}

/// Replaces the stored encoder.
pub fn store_encoder(dir: &Path, params: &EncoderParams) -> CliResult<()> {
    write_text(&dir.join(ENCODER_FILE), &format_encoder(params))
}
