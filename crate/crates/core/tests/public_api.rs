use ffd_core::ffd::{deform, deform_via_control_points, DeformationField};
use ffd_core::fit::{fit_deformation, total_loss, FitConfig, LossKind};
use ffd_core::geometry::{normalize_for_eval, resample, sample_surface, seeded_rng};
use ffd_core::metrics::{chamfer_fast, emd_exact, emd_fixed_correspondence};
use ffd_core::regularizers::RegularizerWeights;
use ffd_core::retrieval::{
    knn_retrieve, shape_descriptor, train_encoder, DescriptorConfig, EncoderParams, TemplateDatabase, TrainConfig,
};
use ffd_core::synth::{benchmark_pair, random_smooth_field, BenchmarkSpec, Primitive};

#[test]
fn both_deformation_paths_agree() {
    let pair = benchmark_pair(&BenchmarkSpec { points: 300, ..Default::default() }, 1, 0).unwrap();
    let field = random_smooth_field(&pair.lattice, 0.2, &mut seeded_rng(2));
    let a = deform(&pair.lattice, &field, &pair.template).unwrap();
    let b = deform_via_control_points(&pair.lattice, &field, &pair.template).unwrap();
    for (p, q) in a.points().iter().zip(b.points()) {
        assert!((*p - *q).max_abs() < 1e-12);
    }
}

#[test]
fn short_fit_reduces_chamfer() {
    let pair = benchmark_pair(&BenchmarkSpec { points: 300, ..Default::default() }, 3, 0).unwrap();
    let config = FitConfig { iterations: 300, ..FitConfig::default() };
    let out = fit_deformation(&pair.template, &pair.target, &pair.lattice, &config).unwrap();
    let deformed = deform(&pair.lattice, &out.field, &pair.template).unwrap();
    assert!(chamfer_fast(&deformed, &pair.target) < chamfer_fast(&pair.template, &pair.target));
    assert_eq!(out.trace.len(), 300);
}

#[test]
fn emd_fixed_loss_matches_the_metric_at_zero_field() {
    let pair = benchmark_pair(&BenchmarkSpec { points: 40, ..Default::default() }, 4, 0).unwrap();
    let assignment = emd_exact(&pair.template, &pair.target).unwrap();
    let zero = DeformationField::zeros(&pair.lattice);
    let none = RegularizerWeights::new(0.0, 0.0).unwrap();
    let loss =
        total_loss(&pair.template, &zero, &pair.target, &pair.lattice, &none, LossKind::EmdFixed, Some(&assignment))
            .unwrap();
    let (cost, _) = emd_fixed_correspondence(&pair.template, &pair.target, &assignment).unwrap();
    assert!((loss.data - cost).abs() <= 1e-12 * cost.max(1.0));
    assert!((cost - assignment.cost()).abs() <= 1e-9);
}

#[test]
fn retrieval_returns_a_resampling_of_the_query_shape() {
    let cfg = DescriptorConfig::default();
    let mut rng = seeded_rng(6);
    let meshes: Vec<_> = Primitive::ALL.iter().map(|p| p.random_mesh(&mut rng)).collect();
    let describe = |mesh_index: usize, seed: u64| {
        let pc = sample_surface(&meshes[mesh_index], 800, seed).unwrap();
        let (pc, _) = normalize_for_eval(&resample(&pc, 600, seed).unwrap()).unwrap();
        shape_descriptor(&pc, &DescriptorConfig { seed, ..cfg }).unwrap()
    };
    let mut descriptors = Vec::new();
    let mut labels = Vec::new();
    for m in 0..meshes.len() {
        for r in 0..4 {
            descriptors.push(describe(m, 10 * m as u64 + r));
            labels.push(m as u64);
        }
    }
    let init = EncoderParams::random(16, cfg.len(), 0).unwrap();
    let trained = train_encoder(&descriptors, &labels, &init, &TrainConfig { epochs: 100, ..Default::default() })
        .unwrap()
        .params;
    let items = descriptors.iter().enumerate().map(|(i, d)| (format!("{}-{i}", labels[i]), d.clone(), String::new()));
    let db = TemplateDatabase::build(items.collect(), &trained).unwrap();
    for m in 0..meshes.len() {
        let top = &knn_retrieve(&describe(m, 999 + m as u64), &db, &trained, 1).unwrap()[0];
        assert!(top.id.starts_with(&format!("{m}-")), "query {m} retrieved {}", top.id);
    }
}
