//! Template retrieval: a global shape descriptor, a linear embedding trained
//! with the smoothed lifted-structured loss, and exact K-nearest-neighbor
//! lookup in embedding space.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use alloc::{format, string::ToString};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::fit::AdamParams;
use crate::geometry::{seeded_rng, PointCloud};
use crate::{math, Error, Result};

/// Default number of retrieved templates.
pub const DEFAULT_K: usize = 5;
/// Default embedding dimension.
pub const DEFAULT_EMBEDDING_DIM: usize = 32;
/// Default margin between intra- and inter-class distances.
pub const DEFAULT_MARGIN: f64 = 1.0;
/// Number of moment features appended to the distance histogram.
pub const MOMENT_COUNT: usize = 8;
/// Upper end of the distance histogram; normalized clouds fit in the unit ball.
pub const D2_MAX_DISTANCE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DescriptorConfig {
    pub bins: usize,
    pub pairs: usize,
    pub seed: u64,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        DescriptorConfig { bins: 64, pairs: 4096, seed: 0 }
    }
}

impl DescriptorConfig {
    pub fn len(&self) -> usize {
        self.bins + MOMENT_COUNT
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// D2 histogram of `pairs` random point-pair distances over `[0, 2]`, as
/// fractions, followed by the six centered second moments (xx, yy, zz, xy, xz,
/// yz), the mean of `x² + z²` and the covariance trace.
pub fn shape_descriptor(pc: &PointCloud, config: &DescriptorConfig) -> Result<Vec<f64>> {
    if config.bins < 2 {
        return Err(Error::InvalidArgument("descriptor bins must be ≥ 2".into()));
    }
    if config.pairs == 0 {
        return Err(Error::InvalidArgument("descriptor pairs must be positive".into()));
    }
    let points = pc.points();
    let n = points.len();
    if n < 2 || points.iter().all(|&p| p == points[0]) {
        return Err(Error::DegenerateCloud);
    }
    let mut rng = seeded_rng(config.seed);
    let mut histogram = vec![0.0; config.bins];
    let unit = 1.0 / config.pairs as f64;
    for _ in 0..config.pairs {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let d = points[i].distance(points[j]);
        let bin = math::floor(d / D2_MAX_DISTANCE * config.bins as f64) as usize;
        histogram[bin.min(config.bins - 1)] += unit;
    }

    let c = pc.centroid();
    let mut m = [0.0; 6];
    let mut radial = 0.0;
    for &p in points {
        let q = p - c;
        m[0] += q.x * q.x;
        m[1] += q.y * q.y;
        m[2] += q.z * q.z;
        m[3] += q.x * q.y;
        m[4] += q.x * q.z;
        m[5] += q.y * q.z;
        radial += p.x * p.x + p.z * p.z;
    }
    let inv = 1.0 / n as f64;
    for v in m.iter_mut() {
        *v *= inv;
    }
    histogram.extend_from_slice(&m);
    histogram.push(radial * inv);
    histogram.push(m[0] + m[1] + m[2]);
    Ok(histogram)
}

/// Labelled feature vectors; the unit of the lifted loss.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch {
    features: Vec<Vec<f64>>,
    labels: Vec<u64>,
}

impl EmbeddingBatch {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<u64>) -> Result<Self> {
        if features.len() < 2 {
            return Err(Error::DegenerateBatch("a batch needs at least two items".into()));
        }
        if labels.len() != features.len() {
            return Err(Error::SizeMismatch { what: "batch labels", expected: features.len(), found: labels.len() });
        }
        let dim = features[0].len();
        if dim == 0 {
            return Err(Error::DegenerateBatch("features must be nonempty".into()));
        }
        for f in &features {
            if f.len() != dim {
                return Err(Error::SizeMismatch { what: "feature dimension", expected: dim, found: f.len() });
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("batch feature"));
            }
        }
        Ok(EmbeddingBatch { features, labels })
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    math::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Symmetric B×B matrix of Euclidean distances with a zero diagonal.
pub fn pairwise_distances(batch: &EmbeddingBatch) -> Vec<Vec<f64>> {
    let b = batch.len();
    let mut d = vec![vec![0.0; b]; b];
    for i in 0..b {
        for j in i + 1..b {
            let v = euclidean(&batch.features[i], &batch.features[j]);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// Unordered same-label pairs `(i, j)`, `i < j`.
pub fn positive_pairs(batch: &EmbeddingBatch) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..batch.len() {
        for j in i + 1..batch.len() {
            if batch.labels[i] == batch.labels[j] {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Smoothed lifted-structured loss
/// `J = 1/(2|P|) Σ_{(i,j)∈P} [log(Σ_{k∈N_i} e^{Δ−d_ik} + Σ_{l∈N_j} e^{Δ−d_jl}) + d_ij]₊²`
/// and its gradient with respect to every feature vector.
///
/// The hinge contributes no gradient at exactly zero, and neither does a
/// distance between coincident features.
pub fn lifted_loss(batch: &EmbeddingBatch, margin: f64) -> Result<(f64, Vec<Vec<f64>>)> {
    if !margin.is_finite() {
        return Err(Error::NonFinite("margin"));
    }
    let positives = positive_pairs(batch);
    if positives.is_empty() {
        return Err(Error::DegenerateBatch("batch has no positive pair".into()));
    }
    let b = batch.len();
    let dist = pairwise_distances(batch);
    // dJ/dd for every ordered entry; folded onto features at the end.
    let mut dist_grad = vec![vec![0.0; b]; b];
    let scale = 1.0 / (2.0 * positives.len() as f64);
    let mut total = 0.0;
    let mut terms: Vec<(usize, usize, f64)> = Vec::new();
    for &(i, j) in &positives {
        terms.clear();
        for anchor in [i, j] {
            for k in 0..b {
                if batch.labels[k] != batch.labels[anchor] {
                    terms.push((anchor, k, margin - dist[anchor][k]));
                }
            }
        }
        if terms.is_empty() {
            return Err(Error::DegenerateBatch(format!("positive pair ({i}, {j}) has no negatives")));
        }
        let peak = terms.iter().map(|t| t.2).fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = terms.iter().map(|t| math::exp(t.2 - peak)).sum();
        let inner = peak + math::ln(sum) + dist[i][j];
        if inner <= 0.0 {
            continue;
        }
        total += inner * inner;
        let coeff = 2.0 * scale * inner;
        dist_grad[i][j] += coeff;
        for &(a, k, t) in &terms {
            dist_grad[a][k] -= coeff * math::exp(t - peak) / sum;
        }
    }
    let mut grad = vec![vec![0.0; batch.dim()]; b];
    for a in 0..b {
        for c in 0..b {
            let g = dist_grad[a][c];
            if g == 0.0 || dist[a][c] == 0.0 {
                continue;
            }
            let w = g / dist[a][c];
            for (axis, (&fa, &fc)) in batch.features[a].iter().zip(&batch.features[c]).enumerate() {
                let diff = (fa - fc) * w;
                grad[a][axis] += diff;
                grad[c][axis] -= diff;
            }
        }
    }
    Ok((total * scale, grad))
}

/// Ordered triples `(i, j, k)` with `i ≠ j` sharing a label, `k` of another
/// label, that break `d_ij + Δ < d_ik`.
pub fn triplet_margin_violations(batch: &EmbeddingBatch, margin: f64) -> (usize, Vec<(usize, usize, usize)>) {
    let dist = pairwise_distances(batch);
    let b = batch.len();
    let mut out = Vec::new();
    for i in 0..b {
        for j in 0..b {
            if i == j || batch.labels[i] != batch.labels[j] {
                continue;
            }
            for k in 0..b {
                if batch.labels[k] != batch.labels[i] && !(dist[i][j] + margin < dist[i][k]) {
                    out.push((i, j, k));
                }
            }
        }
    }
    (out.len(), out)
}

/// Linear encoder `x ↦ W x + b` with `W` stored row-major, D×D_in.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    output_dim: usize,
    input_dim: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl EncoderParams {
    pub fn new(output_dim: usize, input_dim: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if output_dim < 2 || input_dim == 0 {
            return Err(Error::InvalidArgument("encoder needs D ≥ 2 and a nonempty input".into()));
        }
        if weight.len() != output_dim * input_dim {
            return Err(Error::SizeMismatch {
                what: "encoder weight",
                expected: output_dim * input_dim,
                found: weight.len(),
            });
        }
        if bias.len() != output_dim {
            return Err(Error::SizeMismatch { what: "encoder bias", expected: output_dim, found: bias.len() });
        }
        if weight.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("encoder parameter"));
        }
        Ok(EncoderParams { output_dim, input_dim, weight, bias })
    }

    /// Gaussian weights with standard deviation `1/√D_in`, zero bias.
    pub fn random(output_dim: usize, input_dim: usize, seed: u64) -> Result<Self> {
        let std_dev = 1.0 / math::sqrt(input_dim.max(1) as f64);
        let normal = Normal::new(0.0, std_dev).expect("positive std dev");
        let mut rng = seeded_rng(seed);
        let weight = (0..output_dim * input_dim).map(|_| normal.sample(&mut rng)).collect();
        EncoderParams::new(output_dim, input_dim, weight, vec![0.0; output_dim])
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn embed(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim {
            return Err(Error::SizeMismatch { what: "encoder input", expected: self.input_dim, found: input.len() });
        }
        Ok(self
            .weight
            .chunks_exact(self.input_dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect())
    }

    /// FNV-1a over the dimensions and the bit patterns of every parameter;
    /// identifies the parameter set embeddings were computed with.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let words = [self.output_dim as u64, self.input_dim as u64]
            .into_iter()
            .chain(self.weight.iter().chain(&self.bias).map(|v| v.to_bits()));
        for w in words {
            for byte in w.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

/// Update rule for encoder training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EncoderOptimizer {
    GradientDescent,
    Adam(AdamParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub margin: f64,
    pub epochs: usize,
    pub lr: f64,
    pub optimizer: EncoderOptimizer,
    /// Items per gradient step; the whole set when zero or larger than it.
    pub batch_size: usize,
    /// Take steps in per-feature standardized input coordinates. The encoder
    /// still acts on raw descriptors; only the update direction changes.
    pub standardize: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            margin: DEFAULT_MARGIN,
            epochs: 200,
            lr: 0.01,
            optimizer: EncoderOptimizer::Adam(AdamParams::default()),
            batch_size: 0,
            standardize: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: EncoderParams,
    /// Mean batch loss per epoch, measured before each step.
    pub epoch_losses: Vec<f64>,
}

/// Embeds every descriptor with `params`.
pub fn embed_all(params: &EncoderParams, descriptors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    descriptors.iter().map(|d| params.embed(d)).collect()
}

/// Per-feature mean and standard deviation; constant features get scale 1.
fn feature_statistics(descriptors: &[Vec<f64>], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = descriptors.len() as f64;
    let mut mean = vec![0.0; dim];
    for d in descriptors {
        for (m, &x) in mean.iter_mut().zip(d) {
            *m += x / n;
        }
    }
    let mut scale = vec![0.0; dim];
    for d in descriptors {
        for ((s, &x), &m) in scale.iter_mut().zip(d).zip(&mean) {
            *s += (x - m) * (x - m) / n;
        }
    }
    for s in scale.iter_mut() {
        *s = math::sqrt(*s);
        if !(*s > 1e-12) {
            *s = 1.0;
        }
    }
    (mean, scale)
}

/// Adam moments over a flat parameter vector.
struct Moments {
    first: Vec<f64>,
    second: Vec<f64>,
    steps: i32,
}

impl Moments {
    fn step(&mut self, grad: &[f64], lr: f64, p: &AdamParams) -> Vec<f64> {
        self.steps += 1;
        let bias1 = 1.0 - libm::pow(p.beta1, self.steps as f64);
        let bias2 = 1.0 - libm::pow(p.beta2, self.steps as f64);
        grad.iter()
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
            .map(|(&g, (m, v))| {
                *m = p.beta1 * *m + (1.0 - p.beta1) * g;
                *v = p.beta2 * *v + (1.0 - p.beta2) * g * g;
                -lr * (*m / bias1) / (math::sqrt(*v / bias2) + p.epsilon)
            })
            .collect()
    }
}

/// Trains the linear encoder on the lifted loss. Each epoch visits the items in
/// a seeded order, split into batches of `batch_size`.
///
/// With `standardize`, gradients are taken with respect to the parameters of
/// the equivalent encoder over `s = (x − μ)/σ`, and a step `(ΔW_s, Δb_s)` there
/// is applied to the raw parameters as `ΔW = ΔW_s diag(1/σ)`,
/// `Δb = Δb_s − ΔW_s (μ/σ)`.
pub fn train_encoder(
    descriptors: &[Vec<f64>],
    labels: &[u64],
    params: &EncoderParams,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    if descriptors.len() != labels.len() {
        return Err(Error::SizeMismatch { what: "training labels", expected: descriptors.len(), found: labels.len() });
    }
    if !(config.lr > 0.0) || !config.lr.is_finite() {
        return Err(Error::InvalidArgument("learning rate must be positive".into()));
    }
    let mut distinct = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::DegenerateBatch("training needs at least two classes".into()));
    }
    let n = descriptors.len();
    let d_in = params.input_dim;
    let d_out = params.output_dim;
    if let Some(bad) = descriptors.iter().find(|d| d.len() != d_in) {
        return Err(Error::SizeMismatch { what: "encoder input", expected: d_in, found: bad.len() });
    }
    let (mean, scale) = if config.standardize {
        feature_statistics(descriptors, d_in)
    } else {
        (vec![0.0; d_in], vec![1.0; d_in])
    };
    let standardized: Vec<Vec<f64>> = descriptors
        .iter()
        .map(|x| x.iter().zip(&mean).zip(&scale).map(|((&v, &m), &sd)| (v - m) / sd).collect())
        .collect();
    let batch_size = if config.batch_size == 0 { n } else { config.batch_size.min(n) };
    let mut params = params.clone();
    let mut rng = seeded_rng(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let len = d_out * (d_in + 1);
    let mut moments = Moments { first: vec![0.0; len], second: vec![0.0; len], steps: 0 };
    // Weights row-major, then bias.
    let mut grad = vec![0.0; len];
    for _ in 0..config.epochs {
        if batch_size < n {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(batch_size) {
            let features = chunk.iter().map(|&i| params.embed(&descriptors[i])).collect::<Result<Vec<_>>>()?;
            let batch = EmbeddingBatch::new(features, chunk.iter().map(|&i| labels[i]).collect())?;
            let (loss, feature_grad) = lifted_loss(&batch, config.margin)?;
            loss_sum += loss;
            batches += 1;
            grad.iter_mut().for_each(|g| *g = 0.0);
            for (g, &item) in feature_grad.iter().zip(chunk) {
                let s = &standardized[item];
                for (r, &gr) in g.iter().enumerate() {
                    for (w, &sv) in grad[r * d_in..(r + 1) * d_in].iter_mut().zip(s) {
                        *w += gr * sv;
                    }
                    grad[d_out * d_in + r] += gr;
                }
            }
            let step = match config.optimizer {
                EncoderOptimizer::GradientDescent => grad.iter().map(|g| -config.lr * g).collect(),
                EncoderOptimizer::Adam(p) => moments.step(&grad, config.lr, &p),
            };
            for r in 0..d_out {
                let mut shift = 0.0;
                for c in 0..d_in {
                    let dw = step[r * d_in + c];
                    params.weight[r * d_in + c] += dw / scale[c];
                    shift += dw * mean[c] / scale[c];
                }
                params.bias[r] += step[d_out * d_in + r] - shift;
            }
        }
        if !loss_sum.is_finite() {
            return Err(Error::NonFinite("encoder loss"));
        }
        epoch_losses.push(loss_sum / batches as f64);
    }
    Ok(TrainOutcome { params, epoch_losses })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatabaseEntry {
    pub id: String,
    pub descriptor: Vec<f64>,
    pub embedding: Vec<f64>,
    /// Location of the entry's point cloud, opaque to this crate.
    pub cloud_ref: String,
}

/// Shapes with descriptors and their embeddings under one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateDatabase {
    entries: Vec<DatabaseEntry>,
    params_version: u64,
}

impl TemplateDatabase {
    /// `items` are `(id, descriptor, cloud_ref)`; embeddings are computed with `params`.
    pub fn build(items: Vec<(String, Vec<f64>, String)>, params: &EncoderParams) -> Result<Self> {
        let mut entries = Vec::with_capacity(items.len());
        for (id, descriptor, cloud_ref) in items {
            if entries.iter().any(|e: &DatabaseEntry| e.id == id) {
                return Err(Error::InvalidArgument(format!("duplicate shape id {id}")));
            }
            let embedding = params.embed(&descriptor)?;
            entries.push(DatabaseEntry { id, descriptor, embedding, cloud_ref });
        }
        Ok(TemplateDatabase { entries, params_version: params.fingerprint() })
    }

    pub fn entries(&self) -> &[DatabaseEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn params_version(&self) -> u64 {
        self.params_version
    }

    pub fn get(&self, id: &str) -> Option<&DatabaseEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Recomputes every embedding under new parameters.
    pub fn reembed(&mut self, params: &EncoderParams) -> Result<()> {
        for e in &mut self.entries {
            e.embedding = params.embed(&e.descriptor)?;
        }
        self.params_version = params.fingerprint();
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub id: String,
    pub distance: f64,
}

/// The `k` entries nearest to the embedded query, by ascending distance and
/// then by id.
pub fn knn_retrieve(
    query_descriptor: &[f64],
    db: &TemplateDatabase,
    params: &EncoderParams,
    k: usize,
) -> Result<Vec<Neighbor>> {
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    if k == 0 || k > db.len() {
        return Err(Error::InvalidArgument(format!("K must lie in 1..={}, got {k}", db.len())));
    }
    if db.params_version != params.fingerprint() {
        return Err(Error::StaleEmbeddings);
    }
    let q = params.embed(query_descriptor)?;
    let mut ranked: Vec<Neighbor> = db
        .entries
        .iter()
        .map(|e| Neighbor { id: e.id.to_string(), distance: euclidean(&q, &e.embedding) })
        .collect();
    ranked.sort_by(|a, b| a.distance.total_cmp(&b.distance).then_with(|| a.id.cmp(&b.id)));
    ranked.truncate(k);
    Ok(ranked)
}
