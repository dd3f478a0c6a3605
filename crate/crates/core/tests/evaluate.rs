use std::path::Path;

use petromap::evaluate::{
    binarize, build_samples, confusion, evaluate_maps, kappa, pearson_r, rmse, split,
    ConfusionMatrix, MetricsReport,
};
use petromap::geoprocess::classify_threshold;
use petromap::raster::{Grid, GridHeader};
use petromap::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Textbook kappa from the 2×2 table of counts.
fn kappa_oracle(t: [[f64; 2]; 2]) -> f64 {
    let n: f64 = t.iter().flatten().sum();
    let po = (t[0][0] + t[1][1]) / n;
    let row = |i: usize| t[i][0] + t[i][1];
    let col = |j: usize| t[0][j] + t[1][j];
    let pe = (row(0) * col(0) + row(1) * col(1)) / (n * n);
    (po - pe) / (1.0 - pe)
}

/// Pearson R via the two-pass covariance definition in a single explicit loop.
fn r_oracle(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0);
    let sa = (a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let sb = (b.iter().map(|y| (y - mb).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    cov / (sa * sb)
}

fn row_grid(vals: Vec<f64>) -> Grid {
    Grid::new(GridHeader::new(vals.len(), 1, 0.0, 0.0, 1.0).unwrap(), vals).unwrap()
}

#[test]
fn metrics_match_oracles_on_random_fixtures() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for case in 0..100 {
        let n = rng.gen_range(5..200);
        let truth: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_bool(0.4) as u8)).collect();
        let pred: Vec<f64> = truth
            .iter()
            .map(|t| (t * 0.6 + rng.gen_range(0.0..0.5)).clamp(0.0, 1.0))
            .collect();
        if truth.iter().all(|&t| t == truth[0]) {
            continue;
        }
        let r = pearson_r(&pred, &truth).unwrap();
        assert!((r - r_oracle(&pred, &truth)).abs() < 1e-12, "case {case}");
        let want_rmse =
            (pred.iter().zip(&truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n as f64).sqrt();
        assert!((rmse(&pred, &truth).unwrap() - want_rmse).abs() < 1e-12);

        let mut t = [[0.0; 2]; 2];
        for (p, o) in pred.iter().zip(&truth) {
            t[usize::from(*p < 0.5)][usize::from(*o == 0.0)] += 1.0;
        }
        let cm = confusion(&binarize(&row_grid(pred.clone()), 0.5).unwrap(), &row_grid(truth.clone())).unwrap();
        assert_eq!(
            [cm.tp, cm.fp, cm.fn_, cm.tn],
            [t[0][0], t[0][1], t[1][0], t[1][1]].map(|v| v as u64)
        );
        match kappa(&cm) {
            Ok(k) => assert!((k - kappa_oracle(t)).abs() < 1e-12),
            Err(Error::UndefinedMetric(_)) => assert!(kappa_oracle(t).is_nan()),
            Err(e) => panic!("{e}"),
        }
        let rep = evaluate_maps(&row_grid(pred), &row_grid(truth), 0.5, 1).unwrap();
        assert_eq!(rep.confusion, cm);
    }
}

#[test]
fn kappa_hand_examples() {
    let k = |tp, fp, fn_, tn| kappa(&ConfusionMatrix::new(tp, fp, fn_, tn)).unwrap();
    assert_eq!(k(50, 0, 0, 50), 1.0);
    assert_eq!(k(25, 25, 25, 25), 0.0);
    assert!((k(45, 5, 5, 45) - 0.8).abs() < 1e-12);
    assert!(matches!(kappa(&ConfusionMatrix::default()), Err(Error::UndefinedMetric(_))));
    assert!(matches!(
        kappa(&ConfusionMatrix::new(10, 0, 0, 0)),
        Err(Error::UndefinedMetric(_))
    ));
}

#[test]
fn r_and_rmse_edge_cases() {
    assert!((pearson_r(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
    assert!((pearson_r(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
    assert!(matches!(pearson_r(&[1.0, 1.0], &[0.0, 1.0]), Err(Error::UndefinedMetric(_))));
    assert_eq!(rmse(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
    assert_eq!(rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 12.5f64.sqrt());
    assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(Error::Dimension(_))));
}

#[test]
fn confusion_skips_nodata_and_rejects_non_binary() {
    let pred = row_grid(vec![1.0, -9999.0, 0.0, 1.0]);
    let truth = row_grid(vec![1.0, 1.0, -9999.0, 0.0]);
    assert_eq!(confusion(&pred, &truth).unwrap(), ConfusionMatrix::new(1, 1, 0, 0));
    let bad = row_grid(vec![0.5, 1.0, 0.0, 1.0]);
    assert!(matches!(confusion(&bad, &truth), Err(Error::Input(_))));
}

#[test]
fn split_sizes_and_determinism() {
    let s = split(100, [0.7, 0.15, 0.15], 42).unwrap();
    assert_eq!((s.train_idx.len(), s.test_idx.len(), s.val_idx.len()), (70, 15, 15));
    assert_eq!(s, split(100, [0.7, 0.15, 0.15], 42).unwrap());
    assert_ne!(s.train_idx, split(100, [0.7, 0.15, 0.15], 43).unwrap().train_idx);
    assert!(split(2, [0.7, 0.15, 0.15], 0).is_err());
    assert!(matches!(split(10, [0.7, 0.2, 0.2], 0), Err(Error::Config(_))));
}

#[test]
fn binarize_is_threshold_classification() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let g = Grid::from_fn(GridHeader::new(9, 7, 0.0, 0.0, 1.0).unwrap(), |_, _| {
        (!rng.gen_bool(0.1)).then(|| rng.gen_range(0.0..1.0))
    })
    .unwrap();
    for t in [0.0, 0.25, 0.5, 0.99] {
        assert_eq!(binarize(&g, t).unwrap(), classify_threshold(&g, t).unwrap());
    }
}

#[test]
fn samples_keep_only_fully_valid_cells() {
    let h = GridHeader::new(3, 2, 0.0, 0.0, 1.0).unwrap();
    let a = Grid::new(h, vec![0.1, 0.2, -9999.0, 0.4, 0.5, 0.6]).unwrap();
    let b = Grid::new(h, vec![1.0, 2.0, 3.0, 4.0, -9999.0, 6.0]).unwrap();
    let t = Grid::new(h, vec![1.0, 0.0, 1.0, 0.0, 1.0, 1.0]).unwrap();
    let s = build_samples(&[&a, &b], &["a".into(), "b".into()], &t).unwrap();
    assert_eq!(s.cell_index, vec![(0, 0), (0, 1), (1, 0), (1, 2)]);
    assert_eq!(s.row(3), &[0.6, 6.0]);
    assert_eq!(s.targets, vec![1.0, 0.0, 0.0, 1.0]);
}

#[test]
fn metrics_report_round_trip() {
    let r = MetricsReport {
        r: 0.1 + 0.2,
        rmse: 1.0 / 3.0,
        kappa: -0.25,
        confusion: ConfusionMatrix::new(1, 2, 3, 4),
        seed: u64::MAX,
        threshold: 0.5,
    };
    assert_eq!(MetricsReport::parse(&r.format(), Path::new("m.txt")).unwrap(), r);
    assert!(MetricsReport::parse("r=1\nrmse\n", Path::new("m.txt")).is_err());
}

proptest! {
    #[test]
    fn split_is_a_partition(m in 3usize..500, seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (a, b) = (a.min(b), a.max(b));
        let s = split(m, [a, b - a, 1.0 - b], seed).unwrap();
        let mut all: Vec<usize> = s.train_idx.iter().chain(&s.test_idx).chain(&s.val_idx).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..m).collect::<Vec<_>>());
    }

    #[test]
    fn kappa_is_at_most_one(tp in 0u64..50, fp in 0u64..50, fn_ in 0u64..50, tn in 0u64..50) {
        if let Ok(k) = kappa(&ConfusionMatrix::new(tp, fp, fn_, tn)) {
            prop_assert!(k <= 1.0 + 1e-12 && k >= -1.0 - 1e-12);
        }
    }
}
