//! Template-to-target fitting: Adam on the control-point offsets of a lattice,
//! minimizing a point-set distance between the deformed template and the target
//! plus the deformation regularizers.
//!
//! The data term is the distance itself: the Chamfer sum of squared
//! nearest-neighbor distances, or the EMD sum of matched distances.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::ffd::{backprop_offsets, compute_weights, ControlLattice, DeformationField, WeightTensor};
use crate::geometry::PointCloud;
use crate::metrics::{emd_exact, fixed_correspondence_terms, Assignment, ChamferTarget};
use crate::regularizers::{lattice_smoothness, offset_l1_points, RegularizerWeights};
use crate::{math, Error, Result, Vec3};

/// Largest cloud for which [`LossKind::EmdExact`] re-solves the assignment every step.
pub const EMD_EXACT_MAX_POINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Chamfer distance.
    Chamfer,
    /// EMD under the assignment solved once on the undeformed template.
    EmdFixed,
    /// EMD with the assignment re-solved at every step.
    EmdExact,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Chamfer => "chamfer",
            LossKind::EmdFixed => "emd_fixed",
            LossKind::EmdExact => "emd_exact",
        }
    }

    pub fn from_name(name: &str) -> Option<LossKind> {
        match name {
            "chamfer" | "cd" => Some(LossKind::Chamfer),
            "emd_fixed" | "emd" => Some(LossKind::EmdFixed),
            "emd_exact" => Some(LossKind::EmdExact),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams { beta1: 0.95, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub loss: LossKind,
    pub iterations: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    /// Iteration at which the rate switches from `lr_initial` to `lr_final`.
    pub lr_drop_iteration: usize,
    pub adam: AdamParams,
    pub regularizer_weights: RegularizerWeights,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            loss: LossKind::Chamfer,
            iterations: 2000,
            lr_initial: 5e-4,
            lr_final: 5e-5,
            lr_drop_iteration: 1500,
            adam: AdamParams::default(),
            regularizer_weights: RegularizerWeights::default(),
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if self.iterations == 0 {
            return bad("iterations must be positive");
        }
        if !(self.lr_initial > 0.0) || !(self.lr_final > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.lr_final > self.lr_initial {
            return bad("lr_final must not exceed lr_initial");
        }
        if !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.adam.epsilon > 0.0) {
            return bad("adam epsilon must be positive");
        }
        RegularizerWeights::new(self.regularizer_weights.lambda_smooth, self.regularizer_weights.lambda_l1)?;
        Ok(())
    }

    pub fn lr_at(&self, iteration: usize) -> f64 {
        if iteration < self.lr_drop_iteration {
            self.lr_initial
        } else {
            self.lr_final
        }
    }
}

/// Adam moment estimates for a field of 3D offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first_moment: Vec<Vec3>,
    second_moment: Vec<Vec3>,
    step_count: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState { first_moment: vec![Vec3::ZERO; len], second_moment: vec![Vec3::ZERO; len], step_count: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[Vec3] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[Vec3] {
        &self.second_moment
    }

    /// One bias-corrected Adam update; returns the offset delta to add.
    pub fn step(&mut self, gradients: &[Vec3], lr: f64, params: &AdamParams) -> Result<Vec<Vec3>> {
        if gradients.len() != self.first_moment.len() {
            return Err(Error::SizeMismatch {
                what: "adam gradients",
                expected: self.first_moment.len(),
                found: gradients.len(),
            });
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - libm::pow(params.beta1, t as f64);
        let bias2 = 1.0 - libm::pow(params.beta2, t as f64);
        let mut delta = vec![Vec3::ZERO; gradients.len()];
        for (c, &g) in gradients.iter().enumerate() {
            let m = &mut self.first_moment[c];
            let v = &mut self.second_moment[c];
            for axis in 0..3 {
                m[axis] = params.beta1 * m[axis] + (1.0 - params.beta1) * g[axis];
                v[axis] = params.beta2 * v[axis] + (1.0 - params.beta2) * g[axis] * g[axis];
                let m_hat = m[axis] / bias1;
                let v_hat = v[axis] / bias2;
                delta[c][axis] = -lr * m_hat / (math::sqrt(v_hat) + params.epsilon);
            }
        }
        Ok(delta)
    }
}

/// Value and gradient of the fitting objective at one field.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub data: f64,
    pub reg_l1: f64,
    pub reg_smooth: f64,
    /// Gradient of `total` with respect to every control-point offset.
    pub gradient: Vec<Vec3>,
}

impl LossBreakdown {
    pub fn gradient_norm(&self) -> f64 {
        math::sqrt(self.gradient.iter().map(|g| g.norm_squared()).sum())
    }
}

/// The fitting objective with everything that does not depend on the field
/// precomputed: template weights, the target's spatial index, and the frozen
/// assignment for [`LossKind::EmdFixed`].
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    template: &'a PointCloud,
    target: &'a PointCloud,
    lattice: ControlLattice,
    weights: WeightTensor,
    chamfer_target: Option<ChamferTarget>,
    assignment: Option<Vec<usize>>,
    regularizer_weights: RegularizerWeights,
    kind: LossKind,
}

impl<'a> Objective<'a> {
    /// For [`LossKind::EmdFixed`] the assignment is `frozen_assignment` when
    /// given, otherwise the exact assignment between the undeformed template and
    /// the target.
    pub fn new(
        template: &'a PointCloud,
        target: &'a PointCloud,
        lattice: &ControlLattice,
        regularizer_weights: RegularizerWeights,
        kind: LossKind,
        frozen_assignment: Option<&Assignment>,
    ) -> Result<Self> {
        let chamfer_target = match kind {
            LossKind::Chamfer => Some(ChamferTarget::new(target)),
            _ => None,
        };
        let assignment = match kind {
            LossKind::Chamfer => None,
            LossKind::EmdFixed => {
                let a = match frozen_assignment {
                    Some(a) => Assignment::new(a.mapping().to_vec(), template, target)?,
                    None => emd_exact(template, target)?,
                };
                Some(a.mapping().to_vec())
            }
            LossKind::EmdExact => {
                if template.len() != target.len() {
                    return Err(Error::SizeMismatch {
                        what: "earth mover's distance",
                        expected: template.len(),
                        found: target.len(),
                    });
                }
                if template.len() > EMD_EXACT_MAX_POINTS {
                    return Err(Error::TooLarge { n: template.len(), max: EMD_EXACT_MAX_POINTS });
                }
                None
            }
        };
        Ok(Objective {
            template,
            target,
            lattice: *lattice,
            weights: compute_weights(lattice, template),
            chamfer_target,
            assignment,
            regularizer_weights,
            kind,
        })
    }

    pub fn lattice(&self) -> &ControlLattice {
        &self.lattice
    }

    pub fn weights(&self) -> &WeightTensor {
        &self.weights
    }

    pub fn deformed_points(&self, field: &DeformationField) -> Result<Vec<Vec3>> {
        field.check(&self.lattice)?;
        let disp = self.weights.displacements(field)?;
        Ok(self.template.points().iter().zip(disp).map(|(&p, d)| p + d).collect())
    }

    pub fn evaluate(&self, field: &DeformationField) -> Result<LossBreakdown> {
        let deformed = self.deformed_points(field)?;
        let (data, mut point_grad) = match self.kind {
            LossKind::Chamfer => {
                let target = self.chamfer_target.as_ref().expect("chamfer index");
                let (value, grad) = target.eval_with_grad(&deformed)?;
                (value.sum(), grad)
            }
            LossKind::EmdFixed => {
                let mapping = self.assignment.as_ref().expect("frozen assignment");
                fixed_correspondence_terms(&deformed, self.target.points(), mapping)
            }
            LossKind::EmdExact => {
                let deformed_cloud = PointCloud::new(deformed.clone())?;
                let a = emd_exact(&deformed_cloud, self.target)?;
                fixed_correspondence_terms(&deformed, self.target.points(), a.mapping())
            }
        };
        let rw = self.regularizer_weights;
        let mut reg_l1 = 0.0;
        if rw.lambda_l1 > 0.0 {
            let (v, g) = offset_l1_points(self.template.points(), &deformed)?;
            reg_l1 = v;
            for (pg, lg) in point_grad.iter_mut().zip(g) {
                *pg += lg * rw.lambda_l1;
            }
        }
        let mut gradient = backprop_offsets(&self.weights, &point_grad)?;
        let mut reg_smooth = 0.0;
        if rw.lambda_smooth > 0.0 {
            let (v, g) = lattice_smoothness(field, &self.lattice)?;
            reg_smooth = v;
            for (og, sg) in gradient.iter_mut().zip(g) {
                *og += sg * rw.lambda_smooth;
            }
        }
        Ok(LossBreakdown {
            total: data + rw.lambda_l1 * reg_l1 + rw.lambda_smooth * reg_smooth,
            data,
            reg_l1,
            reg_smooth,
            gradient,
        })
    }
}

/// `data(deform(template, field), target) + λ_l1 · L1 + λ_smooth · smoothness`
/// and its gradient with respect to the offsets.
pub fn total_loss(
    template: &PointCloud,
    field: &DeformationField,
    target: &PointCloud,
    lattice: &ControlLattice,
    weights: &RegularizerWeights,
    kind: LossKind,
    frozen_assignment: Option<&Assignment>,
) -> Result<LossBreakdown> {
    if kind == LossKind::EmdFixed && frozen_assignment.is_none() {
        return Err(Error::InvalidAssignment("emd_fixed needs a frozen assignment".into()));
    }
    Objective::new(template, target, lattice, *weights, kind, frozen_assignment)?.evaluate(field)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub total: f64,
    pub data: f64,
    pub reg_l1: f64,
    pub reg_smooth: f64,
    pub grad_norm: f64,
}

/// One record per optimizer iteration, evaluated before that iteration's update.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitTrace {
    records: Vec<IterationRecord>,
}

impl FitTrace {
    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, r: IterationRecord) {
        self.records.push(r);
    }

    /// Running minimum of the total loss.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.records
            .iter()
            .map(|r| {
                best = best.min(r.total);
                best
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    /// The evaluated field with the lowest total loss.
    pub field: DeformationField,
    /// The field after the last update.
    pub last_field: DeformationField,
    pub best_iteration: usize,
    pub best: LossBreakdown,
    pub trace: FitTrace,
}

/// A failed fit, with the trace recorded up to the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct FitFailure {
    pub error: Error,
    pub trace: FitTrace,
}

impl fmt::Display for FitFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} recorded iterations)", self.error, self.trace.len())?;
        if let Some(last) = self.trace.records().last() {
            write!(f, "; last total {} data {} grad_norm {}", last.total, last.data, last.grad_norm)?;
        }
        Ok(())
    }
}

impl core::error::Error for FitFailure {}

impl From<Error> for FitFailure {
    fn from(error: Error) -> Self {
        FitFailure { error, trace: FitTrace::default() }
    }
}

/// Optimizes the offsets of `lattice` starting from the zero field.
///
/// Each iteration evaluates the objective, records it, and applies one Adam
/// step at the scheduled learning rate. The returned field is the evaluated
/// one with the lowest total loss, so the fit never ends worse than the
/// identity deformation.
pub fn fit_deformation(
    template: &PointCloud,
    target: &PointCloud,
    lattice: &ControlLattice,
    config: &FitConfig,
) -> core::result::Result<FitOutcome, FitFailure> {
    config.validate()?;
    let objective = Objective::new(template, target, lattice, config.regularizer_weights, config.loss, None)?;
    fit_with_objective(&objective, config)
}

pub fn fit_with_objective(
    objective: &Objective<'_>,
    config: &FitConfig,
) -> core::result::Result<FitOutcome, FitFailure> {
    config.validate()?;
    let lattice = objective.lattice;
    let mut field = DeformationField::zeros(&lattice);
    let mut adam = AdamState::new(field.len());
    let mut trace = FitTrace::default();
    let mut best: Option<(usize, DeformationField, LossBreakdown)> = None;
    for iteration in 0..config.iterations {
        let loss = match objective.evaluate(&field) {
            Ok(l) => l,
            Err(error) => return Err(FitFailure { error, trace }),
        };
        let grad_norm = loss.gradient_norm();
        trace.push(IterationRecord {
            iteration,
            total: loss.total,
            data: loss.data,
            reg_l1: loss.reg_l1,
            reg_smooth: loss.reg_smooth,
            grad_norm,
        });
        if !loss.total.is_finite() || !grad_norm.is_finite() {
            return Err(FitFailure { error: Error::NonFiniteLoss { iteration }, trace });
        }
        let delta = adam
            .step(&loss.gradient, config.lr_at(iteration), &config.adam)
            .map_err(|error| FitFailure { error, trace: trace.clone() })?;
        let improved = best.as_ref().is_none_or(|(_, _, b)| loss.total < b.total);
        if improved {
            best = Some((iteration, field.clone(), loss));
        }
        for (o, d) in field.offsets_mut().iter_mut().zip(delta) {
            *o += d;
        }
    }
    let (best_iteration, best_field, best_loss) = best.expect("at least one iteration");
    Ok(FitOutcome { field: best_field, last_field: field, best_iteration, best: best_loss, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ffd::deform;
    use crate::geometry::{sample_surface, seeded_rng};
    use crate::metrics::chamfer_terms;
    use crate::synth::{ellipsoid, random_smooth_field};
    use crate::Aabb;
    use rand::Rng;

    fn template(n: usize, seed: u64) -> PointCloud {
        sample_surface(&ellipsoid(Vec3::new(0.8, 0.5, 0.6), 12, 16), n, seed).unwrap()
    }

    #[test]
    fn config_validation() {
        let mut c = FitConfig::default();
        assert!(c.validate().is_ok());
        c.lr_final = 1e-3;
        assert!(c.validate().is_err());
        let c = FitConfig { iterations: 0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = FitConfig { adam: AdamParams { beta1: 1.0, ..Default::default() }, ..Default::default() };
        assert!(c.validate().is_err());
        let c = FitConfig::default();
        assert_eq!(c.lr_at(0), 5e-4);
        assert_eq!(c.lr_at(1499), 5e-4);
        assert_eq!(c.lr_at(1500), 5e-5);
    }

    #[test]
    fn adam_zero_gradient_gives_zero_delta() {
        let mut s = AdamState::new(4);
        let d = s.step(&[Vec3::ZERO; 4], 1e-3, &AdamParams::default()).unwrap();
        assert!(d.iter().all(|v| *v == Vec3::ZERO));
        assert_eq!(s.step_count(), 1);
        assert!(s.step(&[Vec3::ZERO; 3], 1e-3, &AdamParams::default()).is_err());
    }

    #[test]
    fn adam_constant_gradient_steps_at_learning_rate() {
        // With constant g, m̂ = g and v̂ = g² exactly, so |delta| = lr·|g|/(|g|+ε).
        let mut s = AdamState::new(1);
        let g = Vec3::new(0.3, -2.0, 5e-3);
        let lr = 1e-3;
        let params = AdamParams::default();
        let mut last = Vec::new();
        for _ in 0..500 {
            last = s.step(&[g], lr, &params).unwrap();
        }
        for axis in 0..3 {
            let expect = -lr * g[axis] / (g[axis].abs() + params.epsilon);
            assert!((last[0][axis] - expect).abs() < 1e-12, "axis {axis}");
            assert!((last[0][axis].abs() - lr).abs() < 1e-8);
        }
        assert!(s.second_moment()[0].x >= 0.0);
    }

    #[test]
    fn total_loss_is_zero_at_the_optimum() {
        let t = template(64, 1);
        let lat = ControlLattice::default_for(&t).unwrap();
        let w = RegularizerWeights::new(0.05, 0.3).unwrap();
        let l = total_loss(&t, &DeformationField::zeros(&lat), &t, &lat, &w, LossKind::Chamfer, None).unwrap();
        assert_eq!(l.total, 0.0);
        assert!(l.gradient.iter().all(|g| *g == Vec3::ZERO));
        let id = Assignment::identity(64, &t, &t).unwrap();
        let l = total_loss(&t, &DeformationField::zeros(&lat), &t, &lat, &w, LossKind::EmdFixed, Some(&id)).unwrap();
        assert_eq!(l.total, 0.0);
        assert!(l.gradient.iter().all(|g| *g == Vec3::ZERO));
        assert!(total_loss(&t, &DeformationField::zeros(&lat), &t, &lat, &w, LossKind::EmdFixed, None).is_err());
    }

    #[test]
    fn total_loss_matches_finite_differences() {
        let h = 1e-6;
        let mut checked = 0;
        for trial in 0..30u64 {
            let dom = Aabb::new(Vec3::splat(-1.0), Vec3::splat(1.0));
            let lat = ControlLattice::new([1, 1, 1], dom).unwrap();
            let mut rng = seeded_rng(trial);
            let mut pts = |n: usize| -> PointCloud {
                PointCloud::new(
                    (0..n)
                        .map(|_| Vec3::new(rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9)))
                        .collect(),
                )
                .unwrap()
            };
            let tpl = pts(10);
            let tgt = pts(10);
            let field = random_smooth_field(&lat, 0.2, &mut seeded_rng(100 + trial));
            let w = RegularizerWeights::new(0.05, 0.02).unwrap();
            for kind in [LossKind::Chamfer, LossKind::EmdFixed] {
                let frozen = emd_exact(&tpl, &tgt).unwrap();
                let a = Some(&frozen);
                let f = |fl: &DeformationField| total_loss(&tpl, fl, &tgt, &lat, &w, kind, a).unwrap().total;
                let analytic = total_loss(&tpl, &field, &tgt, &lat, &w, kind, a).unwrap().gradient;
                for c in 0..lat.control_count() {
                    for axis in 0..3 {
                        let mut p = field.clone();
                        p.offsets_mut()[c][axis] += h;
                        let mut m = field.clone();
                        m.offsets_mut()[c][axis] -= h;
                        let numeric = (f(&p) - f(&m)) / (2.0 * h);
                        let an = analytic[c][axis];
                        let rel = (an - numeric).abs() / an.abs().max(numeric.abs()).max(1e-3);
                        assert!(rel < 1e-5, "{kind:?} trial {trial}: {an} vs {numeric}");
                        checked += 1;
                    }
                }
            }
        }
        assert_eq!(checked, 30 * 2 * 24);
    }

    #[test]
    fn fitting_identical_clouds_stays_put() {
        let t = template(256, 2);
        let lat = ControlLattice::default_for(&t).unwrap();
        let config = FitConfig {
            iterations: 200,
            regularizer_weights: RegularizerWeights::new(0.05, 0.1).unwrap(),
            ..Default::default()
        };
        let out = fit_deformation(&t, &t, &lat, &config).unwrap();
        assert_eq!(out.trace.len(), 200);
        assert_eq!(out.trace.records()[0].total, 0.0);
        assert!(out.field.max_abs() <= 1e-3);
        let deformed = deform(&lat, &out.field, &t).unwrap();
        assert!(chamfer_terms(&deformed, &t).sum() <= 0.0);
    }

    #[test]
    fn fits_are_bitwise_reproducible_and_monotone_in_best_loss() {
        let t = template(200, 3);
        let target = t.translated(Vec3::new(0.05, -0.02, 0.0));
        let lat = ControlLattice::default_for(&t).unwrap();
        let config = FitConfig { iterations: 150, ..Default::default() };
        let a = fit_deformation(&t, &target, &lat, &config).unwrap();
        let b = fit_deformation(&t, &target, &lat, &config).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.field, b.field);
        let best = a.trace.best_so_far();
        assert!(best.windows(2).all(|w| w[1] <= w[0]));
        assert!(a.best.total <= a.trace.records()[0].total);
    }

    #[test]
    fn non_finite_input_aborts_with_trace() {
        let t = template(32, 4);
        let lat = ControlLattice::default_for(&t).unwrap();
        let huge = t.map(|p| p * 1e200).unwrap();
        let err = fit_deformation(&t, &huge, &lat, &FitConfig { iterations: 5, ..Default::default() }).unwrap_err();
        assert_eq!(err.error, Error::NonFiniteLoss { iteration: 0 });
        assert_eq!(err.trace.len(), 1);
    }

    #[test]
    fn emd_exact_mode_limits_size() {
        let t = template(300, 5);
        let lat = ControlLattice::default_for(&t).unwrap();
        let config = FitConfig { loss: LossKind::EmdExact, iterations: 1, ..Default::default() };
        let err = fit_deformation(&t, &t, &lat, &config).unwrap_err();
        assert_eq!(err.error, Error::TooLarge { n: 300, max: EMD_EXACT_MAX_POINTS });
    }
}
