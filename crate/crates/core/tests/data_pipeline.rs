use std::collections::HashSet;
use std::io::Write;

use ndarray::{array, Array2, Axis};
use symloss::corruption::{corrupt, mixed_count};
use symloss::dataio::*;
use symloss::{Error, NoiseSpec};

fn parse_err(r: symloss::Result<Dataset>) -> ParseError {
    match r {
        Err(Error::Parse(p)) => p,
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn libsvm_examples() {
    let text = "# two rows\n+1 1:0.5 3:2\n\n-1 2:-1 # trailing\n";
    let ds = parse_libsvm(text.as_bytes()).unwrap();
    assert_eq!(ds.patterns, array![[0.5, 0.0, 2.0], [0.0, -1.0, 0.0]]);
    assert_eq!(ds.labels, [1, -1]);
    // {0, 1} labels map to {-1, +1}
    let ds = parse_libsvm("0 1:1\n1 1:2\n0 1:3\n".as_bytes()).unwrap();
    assert_eq!(ds.labels, [-1, 1, -1]);
    assert_eq!(ds.class_counts(), (1, 2));
}

#[test]
fn libsvm_errors() {
    assert_eq!(
        parse_err(parse_libsvm("+1 2:1 1:3\n".as_bytes())),
        ParseError::NonIncreasingIndex { line: 1, index: 1, previous: 2 }
    );
    assert_eq!(
        parse_err(parse_libsvm("+1 1:1\n-1 x:2\n".as_bytes())),
        ParseError::MalformedToken { line: 2, token: "x:2".into() }
    );
    assert!(matches!(parse_err(parse_libsvm("+1 0:1\n".as_bytes())), ParseError::MalformedToken { .. }));
    assert!(matches!(
        parse_err(parse_libsvm("1 1:1\n2 1:1\n3 1:1\n".as_bytes())),
        ParseError::TooManyLabels { line: 3, .. }
    ));
    assert!(matches!(parse_err(parse_libsvm("+1 1:nan\n".as_bytes())), ParseError::NonFinite { .. }));
    assert_eq!(parse_err(parse_libsvm("# nothing\n\n".as_bytes())), ParseError::Empty);
}

#[test]
fn csv_examples_and_header_sniffing() {
    let ds = parse_csv("f1,label,f2\n1.5,1,2\n-3,-1,4\n".as_bytes(), 1).unwrap();
    assert_eq!(ds.patterns, array![[1.5, 2.0], [-3.0, 4.0]]);
    assert_eq!(ds.labels, [1, -1]);
    let ds = parse_csv("1,1.5\n0,-3\n".as_bytes(), 0).unwrap();
    assert_eq!(ds.patterns, array![[1.5], [-3.0]]);
    assert_eq!(ds.labels, [1, -1]);
}

#[test]
fn csv_errors() {
    assert_eq!(
        parse_err(parse_csv("1,2,3\n4,5\n".as_bytes(), 0)),
        ParseError::Ragged { row: 2, expected: 3, found: 2 }
    );
    assert!(matches!(
        parse_err(parse_csv("1,2\n3,abc\n".as_bytes(), 0)),
        ParseError::NonNumeric { row: 2, column: 2, .. }
    ));
    assert_eq!(parse_err(parse_csv("1,2\n".as_bytes(), 5)), ParseError::LabelColumn { column: 5, width: 2 });
    assert_eq!(parse_err(parse_csv("".as_bytes(), 0)), ParseError::Empty);
}

#[test]
fn libsvm_round_trip_through_a_file() {
    let ds = gen_gaussians(3, 20, 15, 2.0, 7).unwrap();
    let mut file = tempfile::NamedTempFile::new().unwrap();
    file.write_all(ds.to_libsvm().as_bytes()).unwrap();
    let source: DataSource = format!("libsvm:{}", file.path().display()).parse().unwrap();
    let back = source.load(0, 0, 0).unwrap();
    assert_eq!(back.patterns, ds.patterns);
    assert_eq!(back.labels, ds.labels);

    let missing: DataSource = "libsvm:/nonexistent/symloss.txt".parse().unwrap();
    assert!(matches!(missing.load(0, 0, 0).unwrap_err().root(), Error::Io(_)));
}

#[test]
fn data_source_strings() {
    for s in ["libsvm:a/b.txt", "csv:data.csv:3", "gauss:2:4"] {
        assert_eq!(s.parse::<DataSource>().unwrap().to_string(), s);
    }
    assert_eq!(
        "csv:c:\\x.csv:0".parse::<DataSource>().unwrap(),
        DataSource::Csv { path: "c:\\x.csv".into(), label_column: 0 }
    );
    for s in ["gauss:2", "csv:x.csv", "parquet:x", "libsvm:", "nothing"] {
        assert!(s.parse::<DataSource>().is_err(), "{s}");
    }
}

#[test]
fn gaussian_bayes_accuracy() {
    // the Bayes rule is sign(Σx); each class is right with probability Φ(sep/2)
    let phi2 = 0.977_249_868_051_820_8;
    let n = 100_000;
    let ds = gen_gaussians(2, n, n, 4.0, 11).unwrap();
    let correct = ds
        .patterns
        .rows()
        .into_iter()
        .zip(&ds.labels)
        .filter(|(x, &y)| x.sum() * y as f64 > 0.0)
        .count();
    let acc = correct as f64 / (2 * n) as f64;
    assert!((acc - phi2).abs() <= 2e-3, "{acc}");
}

#[test]
fn gaussian_means_converge_and_draws_repeat() {
    let n = 20_000;
    let ds = gen_gaussians(4, n, n, 4.0, 3).unwrap();
    let mu = 2.0 / 2.0;
    let pos = ds.patterns.slice(ndarray::s![..n, ..]).mean_axis(Axis(0)).unwrap();
    let neg = ds.patterns.slice(ndarray::s![n.., ..]).mean_axis(Axis(0)).unwrap();
    let err = pos.iter().map(|m| (m - mu).powi(2)).sum::<f64>().sqrt();
    assert!(err <= 5.0 / (n as f64).sqrt(), "{err}");
    let err = neg.iter().map(|m| (m + mu).powi(2)).sum::<f64>().sqrt();
    assert!(err <= 5.0 / (n as f64).sqrt(), "{err}");
    assert_eq!(gen_gaussians(2, 5, 5, 1.0, 9).unwrap(), gen_gaussians(2, 5, 5, 1.0, 9).unwrap());
    assert_ne!(gen_gaussians(2, 5, 5, 1.0, 9).unwrap(), gen_gaussians(2, 5, 5, 1.0, 10).unwrap());
    assert!(gen_gaussians(0, 5, 5, 1.0, 0).is_err());
    assert!(gen_gaussians(2, 5, 5, -1.0, 0).is_err());
}

#[test]
fn balanced_split() {
    let ds = gen_gaussians(2, 1000, 1000, 4.0, 0).unwrap();
    let (pool, test) = split_counts(&ds, 250, 250, 1).unwrap();
    assert_eq!(test.class_counts(), (250, 250));
    assert_eq!(pool.positives.nrows(), 750);
    assert_eq!(pool.negatives.nrows(), 750);
    let (_, test) = split(&ds, 0.25, true, 1).unwrap();
    assert_eq!(test.class_counts(), (250, 250));
    let err = split_counts(&ds, 1001, 10, 1).unwrap_err();
    assert!(matches!(&err, Error::Budget(m) if m.contains("positive")), "{err}");
    assert!(split(&ds, 1.0, true, 1).is_err());
}

#[test]
fn standardizer_zscores_the_union() {
    let a = array![[1.0, 5.0], [3.0, 5.0]];
    let b = array![[5.0, 5.0]];
    let s = Standardizer::fit(&[a.view(), b.view()]);
    assert_eq!(s.mean, array![3.0, 5.0]);
    assert_eq!(s.scale[1], 1.0);
    let z = s.apply(&a);
    assert!((z[[0, 0]] + 3f64.sqrt() / 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(z[[0, 1]], 0.0);
}

fn labeled_pool(n_pos: usize, n_neg: usize) -> LabeledPool {
    // row values encode the origin: positives are ≥ 0, negatives < 0
    LabeledPool::new(
        Array2::from_shape_fn((n_pos, 1), |(i, _)| i as f64),
        Array2::from_shape_fn((n_neg, 1), |(i, _)| -(i as f64) - 1.0),
    )
    .unwrap()
}

#[test]
fn corruption_counts_and_disjointness() {
    let pool = labeled_pool(600, 600);
    let noise = NoiseSpec::new(0.7, 0.4).unwrap();
    let s = corrupt(&pool, noise, 500, 500, 5).unwrap();
    assert_eq!(s.cp.column(0).iter().filter(|&&v| v >= 0.0).count(), 350);
    assert_eq!(s.cp_positive_count(), 350);
    assert_eq!(s.cn.column(0).iter().filter(|&&v| v >= 0.0).count(), 200);
    assert_eq!(s.cn_positive_count(), 200);
    let rows: HashSet<u64> = s.cp.iter().chain(s.cn.iter()).map(|v| v.to_bits()).collect();
    assert_eq!(rows.len(), 1000);
    assert_eq!(mixed_count(0.65, 500), 325);

    let clean = corrupt(&pool, NoiseSpec::clean(), 100, 100, 5).unwrap();
    assert!(clean.cp.iter().all(|&v| v >= 0.0));
    assert!(clean.cn.iter().all(|&v| v < 0.0));

    assert_eq!(corrupt(&pool, noise, 500, 500, 5).unwrap(), s);
    assert_ne!(corrupt(&pool, noise, 500, 500, 6).unwrap(), s);
}

#[test]
fn corruption_budget_names_the_short_class() {
    let pool = labeled_pool(300, 1000);
    let noise = NoiseSpec::new(0.7, 0.4).unwrap();
    let err = corrupt(&pool, noise, 500, 500, 0).unwrap_err();
    assert!(matches!(&err, Error::Budget(m) if m.contains("positive")), "{err}");
    let pool = labeled_pool(1000, 300);
    let err = corrupt(&pool, noise, 500, 500, 0).unwrap_err();
    assert!(matches!(&err, Error::Budget(m) if m.contains("negative")), "{err}");
    assert!(corrupt(&pool, noise, 0, 10, 0).is_err());
}
