use imann::baseline::{dnn_forward, train_dnn, DnnSpec, TrainConfig};
use imann::benchmarks::{formulation, registry};
use imann::cmaes::{optimize, CmaConfig};
use imann::harness::{grid_dataset, run_attempt, ExperimentConfig, Method, Status};
use imann::hybrid::{objective_for, HybridPredictor};
use imann::network::{NetworkSpec, WeightVector};
use imann::quadrature::error_integral;

#[test]
fn every_formulation_trains_briefly() {
    for f in registry() {
        let mut c = ExperimentConfig::new(f.id, Method::Imann).unwrap();
        c.cma.max_evaluations = 200;
        c.quad_points = 12;
        let size = if f.dimension() == 1 { 5 } else { 9 };
        let data = grid_dataset(&f, size).unwrap();
        let a = run_attempt(&c, &data, 0, 0).unwrap();
        assert_ne!(a.record.status, Status::Failed, "{}", f.id);
        assert!(a.record.error_integral.is_finite());
        assert!(a.record.evals <= 200);
    }
}

#[test]
fn optimized_weights_reproduce_reported_fitness() {
    let f = formulation("f3").unwrap();
    let data = grid_dataset(&f, 9).unwrap();
    let spec = NetworkSpec::new(1, vec![5, 5], f.subfunction_count).unwrap();
    let objective = objective_for(&spec, &f, &data).unwrap();
    let mut cfg = CmaConfig::new(spec.dimensionality(), 5);
    cfg.max_evaluations = 2000;
    let result = optimize(&objective, &cfg).unwrap();

    let w = WeightVector::new(&spec, result.best_vector.clone()).unwrap();
    let p = HybridPredictor::new(spec, w, f.clone()).unwrap();
    assert_eq!(p.fitness(&data), result.best_fitness);
    let r = error_integral(
        |x| p.predict(x).unwrap(),
        |x| f.evaluate_target(x).unwrap(),
        f.domain(),
        80,
    )
    .unwrap();
    assert!(r.is_finite() && r > 0.0);
}

#[test]
fn dnn_interpolates_a_few_points() {
    let f = formulation("f1").unwrap();
    let data = grid_dataset(&f, 3).unwrap();
    let spec = DnnSpec::new(vec![1, 8, 1]).unwrap();
    let cfg = TrainConfig {
        learning_rate: 1e-2,
        max_epochs: 20_000,
        ..TrainConfig::default()
    };
    let r = train_dnn(&spec, data.points(), &cfg).unwrap();
    for (x, y) in data.points() {
        let p = dnn_forward(&spec, &r.weights, x).unwrap();
        assert!((p - y).abs() < 0.5 + 1e-3 * y.abs(), "{x:?}: {p} vs {y}");
    }
}
