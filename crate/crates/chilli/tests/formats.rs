use std::path::Path;

use chilli::io::{
    self, comparison_to_csv, dataset_to_csv, parse_schema, perturbations_to_csv,
    read_comparison_csv, read_dataset, read_perturbations, read_sweep_csv, sweep_to_csv,
};
use chilli_core::bench;
use chilli_core::evaluation::{compare_explainers, sigma_sweep, ComparisonRun};
use chilli_core::schema::{DeclKind, FeatureDecl};
use chilli_core::{
    ExplainerConfig, FeatureKind, Instance, KnnRegressor, Method, PerturbationSet, ProximityConfig,
};
use proptest::prelude::*;

fn p() -> &'static Path {
    Path::new("test.csv")
}

fn decls(json: &str) -> Vec<FeatureDecl> {
    parse_schema(json).unwrap()
}

#[test]
fn schema_examples() {
    let d = decls(r#"[{"name":"hour","kind":"cyclic","period":24}]"#);
    assert_eq!(d[0].kind, DeclKind::Cyclic { period: 24.0 });
    let d = decls(r#"[{"name":"age","kind":"continuous","min":0,"max":120}]"#);
    assert_eq!(
        d[0].kind,
        DeclKind::Continuous {
            min: Some(0.0),
            max: Some(120.0)
        }
    );

    for bad in [
        r#"[{"name":"age","kind":"continuous","min":5,"max":5}]"#,
        r#"[{"name":"age","kind":"continuous","period":5}]"#,
        r#"[{"name":"h","kind":"cyclic"}]"#,
        r#"[{"name":"h","kind":"cyclic","period":0}]"#,
        r#"[{"name":"c","kind":"categorical","categories":["a"]}]"#,
        r#"[{"name":"c","kind":"categorical","categories":["a","a"]}]"#,
        r#"[{"name":"a","kind":"cyclic","period":1},{"name":"a","kind":"cyclic","period":2}]"#,
        r#"[{"name":"a","kind":"ordinal"}]"#,
        r#"[{"name":"a","kind":"cyclic","period":1,"unit":"h"}]"#,
        r#"{"name":"a"}"#,
        "[]",
    ] {
        assert!(parse_schema(bad).is_err(), "{bad}");
    }
}

#[test]
fn dataset_examples() {
    let d = decls(r#"[{"name":"v","kind":"continuous"}]"#);
    let ds = read_dataset("v,y\n1,0\n2,0\n3,0\n".as_bytes(), p(), &d, "y").unwrap();
    assert_eq!(ds.stats()[0].mean(), Some(2.0));
    assert_eq!(ds.stats()[0].std(), Some(1.0));
    // Bounds default to the data range.
    assert_eq!(
        ds.schema()[0].kind,
        FeatureKind::Continuous { min: 1.0, max: 3.0 }
    );

    let colour = decls(r#"[{"name":"c","kind":"categorical","categories":["red","green"]}]"#);
    let ok = read_dataset("y,c\n1,red\n2,green\n".as_bytes(), p(), &colour, "y").unwrap();
    assert_eq!(ok.instances()[1], Instance::new(vec![1.0]));
    assert_eq!(ok.targets(), &[1.0, 2.0]);

    let err = |csv: &str, d: &[FeatureDecl]| read_dataset(csv.as_bytes(), p(), d, "y").unwrap_err();
    assert!(err("c,y\nblue,1\nred,2\n", &colour)
        .to_string()
        .contains("blue"));
    assert!(err("v,y\n1,0\n", &d)
        .to_string()
        .contains("fewer than 2 rows"));
    assert!(err("v\n1\n2\n", &d)
        .to_string()
        .contains("missing column `y`"));
    assert!(err("v,y\n1,0\nx,1\n", &d)
        .to_string()
        .contains("not a number"));
    assert!(err("v,y\n1,0\n,1\n", &d)
        .to_string()
        .contains("missing value"));
    let ragged = err("v,y\n1,0\n2\n", &d).to_string();
    assert!(ragged.contains("line: 3"), "{ragged}");
}

#[test]
fn dataset_csv_round_trips() {
    for b in chilli_core::bench::Benchmark::ALL {
        let ds = b.generate(50, 3).unwrap();
        let schema_json = io::schema_to_json(ds.schema());
        let d = parse_schema(&schema_json).unwrap();
        let csv = dataset_to_csv(&ds, "y").unwrap();
        assert_eq!(read_dataset(&csv[..], p(), &d, "y").unwrap(), ds);
    }
}

fn sample_set(n: usize) -> (PerturbationSet, Vec<chilli_core::FeatureSchema>) {
    let ds = bench::sinusoid(30, 1).unwrap();
    let schema = ds.schema().to_vec();
    let z: Vec<Instance> = ds.instances()[..n].to_vec();
    let set = PerturbationSet {
        origin: ds.instances()[0].clone(),
        predictions: (0..n).map(|i| i as f64 / 7.0).collect(),
        weights: (0..n).map(|i| (-(i as f64)).exp()).collect(),
        perturbations: z,
        method: Method::Chilli,
        seed: 1,
        proximity: ProximityConfig::contextual(0.1).unwrap(),
    };
    (set, schema)
}

#[test]
fn perturbation_csv_round_trips() {
    let (set, schema) = sample_set(20);
    let csv = perturbations_to_csv(&set, &schema).unwrap();
    let text = String::from_utf8(csv.clone()).unwrap();
    assert!(text.starts_with("phase,v2,prediction,weight\n"));
    let rows = read_perturbations(&csv[..], p(), &schema).unwrap();
    assert_eq!(rows.perturbations, set.perturbations);
    assert_eq!(rows.predictions, set.predictions);
    assert_eq!(rows.weights, set.weights);

    let (empty, schema) = sample_set(0);
    let csv = perturbations_to_csv(&empty, &schema).unwrap();
    assert_eq!(
        String::from_utf8(csv).unwrap(),
        "phase,v2,prediction,weight\n"
    );
}

#[test]
fn categorical_perturbations_use_labels() {
    let d = decls(
        r#"[{"name":"c","kind":"categorical","categories":["a","b"]},{"name":"v","kind":"continuous","min":0,"max":1}]"#,
    );
    let schema: Vec<_> = d.iter().map(|x| x.resolve(&[]).unwrap()).collect();
    let set = PerturbationSet {
        origin: Instance::new(vec![1.0, 0.5]),
        perturbations: vec![Instance::new(vec![1.0, 0.25])],
        predictions: vec![2.0],
        weights: vec![1.0],
        method: Method::Lime,
        seed: 0,
        proximity: ProximityConfig::euclidean(1.0).unwrap(),
    };
    let csv = perturbations_to_csv(&set, &schema).unwrap();
    assert_eq!(
        String::from_utf8(csv).unwrap(),
        "c,v,prediction,weight\nb,0.25,2.0,1.0\n"
    );
}

fn small_comparison() -> ComparisonRun {
    let ds = bench::sinusoid(120, 2).unwrap();
    let model = KnnRegressor::train(&ds, 4).unwrap();
    let config = ExplainerConfig {
        num_perturbations: 150,
        seed: 9,
        ..ExplainerConfig::default()
    };
    compare_explainers(&ds, &model, 3, &config).unwrap()
}

#[test]
fn comparison_round_trips() {
    let run = small_comparison();
    let json = io::to_json(&run);
    let back: ComparisonRun = io::from_json(&json, p()).unwrap();
    assert_eq!(back, run);

    let csv = comparison_to_csv(&run).unwrap();
    let rows = read_comparison_csv(&csv[..], p()).unwrap();
    assert_eq!(rows.len(), run.instances.len());
    for (a, b) in rows.iter().zip(&run.instances) {
        assert_eq!(a.instance_id, b.instance_id);
        assert_eq!(a.lime_error.to_bits(), b.lime_error.to_bits());
        assert_eq!(a.chilli_error.to_bits(), b.chilli_error.to_bits());
        assert_eq!(a.chilli_out_of_bounds, b.chilli_out_of_bounds);
    }

    let spread = io::SpreadDoc::from_run(&run).unwrap();
    assert_eq!(spread.lime.len(), 2);
    assert!(io::to_json(&spread).contains("linear interpolation"));
}

#[test]
fn sweep_csv_has_two_rows_per_sigma() {
    let ds = bench::sinusoid(100, 2).unwrap();
    let model = KnnRegressor::train(&ds, 4).unwrap();
    let config = ExplainerConfig {
        num_perturbations: 100,
        ..ExplainerConfig::default()
    };
    let sigmas = [0.05, 0.1, 0.2, 0.5, 1.0];
    let rows = sigma_sweep(&ds, &model, &ds.instances()[0], &sigmas, &config).unwrap();
    let csv = sweep_to_csv(&rows).unwrap();
    assert_eq!(String::from_utf8(csv.clone()).unwrap().lines().count(), 11);
    assert_eq!(read_sweep_csv(&csv[..], p()).unwrap(), rows);
}

proptest! {
    #[test]
    fn perturbation_values_round_trip(values in proptest::collection::vec((-1e6..1e6f64, -1e3..1e3f64), 0..40)) {
        let (mut set, schema) = sample_set(0);
        for (a, b) in &values {
            set.perturbations.push(Instance::new(vec![*a, *b]));
            set.predictions.push(a * b);
            set.weights.push(b.abs() + f64::MIN_POSITIVE);
        }
        let csv = perturbations_to_csv(&set, &schema).unwrap();
        let rows = read_perturbations(&csv[..], p(), &schema).unwrap();
        prop_assert_eq!(rows.perturbations, set.perturbations);
        prop_assert_eq!(rows.predictions, set.predictions);
        prop_assert_eq!(rows.weights, set.weights);
    }
}
