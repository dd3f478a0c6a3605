use petromap::geochem::{
    format_rock_eval_csv, hydrogen_index, production_index, read_rock_eval_csv, summarize_wells,
    well_points, Aggregate, GeochemIndex, RockEvalRecord,
};
use petromap::Error;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rec(id: &str, s1: f64, s2: f64, s3: f64, toc: f64) -> RockEvalRecord {
    RockEvalRecord {
        well_id: id.into(),
        x: 10.0,
        y: 20.0,
        s1,
        s2,
        s3,
        toc,
        tmax: 430.0,
    }
}

#[test]
fn pi_mean_and_max_per_well() {
    // PI = 0.2 and 0.4.
    let recs = [rec("w", 1.0, 4.0, 1.0, 1.0), rec("w", 2.0, 3.0, 1.0, 1.0)];
    let s = summarize_wells(&recs).unwrap();
    let pi = s[0].stat(GeochemIndex::Pi);
    assert!((pi.mean - 0.3).abs() < 1e-15);
    assert_eq!(pi.max, 0.4);
}

#[test]
fn indices_are_aggregated_per_record() {
    // Mean of HI differs from HI of mean S2 / mean TOC.
    let recs = [rec("w", 0.0, 2.0, 0.0, 1.0), rec("w", 0.0, 2.0, 0.0, 4.0)];
    let s = summarize_wells(&recs).unwrap();
    let hi = s[0].value(GeochemIndex::Hi, Aggregate::Mean);
    assert_eq!(hi, 1.25);
    assert_ne!(hi, 2.0 / 2.5);
    assert_eq!(hydrogen_index(&recs[0]).unwrap(), 2.0);
}

#[test]
fn single_record_mean_equals_max() {
    let s = summarize_wells(&[rec("a", 0.3, 2.0, 0.5, 1.7)]).unwrap();
    for i in GeochemIndex::ALL {
        assert_eq!(s[0].stat(i).mean, s[0].stat(i).max, "{}", i.name());
    }
}

#[test]
fn domain_errors() {
    assert!(matches!(production_index(&rec("a", 0.0, 0.0, 1.0, 1.0)), Err(Error::Domain(_))));
    assert!(matches!(hydrogen_index(&rec("a", 0.0, 1.0, 1.0, 0.0)), Err(Error::Domain(_))));
    let mut moved = rec("a", 1.0, 1.0, 1.0, 1.0);
    moved.x += 1.0;
    assert!(summarize_wells(&[rec("a", 1.0, 1.0, 1.0, 1.0), moved]).is_err());
}

fn random_records(rng: &mut ChaCha8Rng, n: usize) -> Vec<RockEvalRecord> {
    (0..n)
        .map(|_| {
            let w = rng.gen_range(0..8);
            RockEvalRecord {
                well_id: format!("W{w}"),
                x: w as f64 * 100.0,
                y: w as f64 * -50.0,
                s1: rng.gen_range(0.0..3.0),
                s2: rng.gen_range(0.01..20.0),
                s3: rng.gen_range(0.0..2.0),
                toc: rng.gen_range(0.1..8.0),
                tmax: rng.gen_range(400.0..470.0),
            }
        })
        .collect()
}

#[test]
fn summaries_ignore_record_order_and_respect_mean_le_max() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for _ in 0..50 {
        let n = rng.gen_range(1..40);
        let mut recs = random_records(&mut rng, n);
        let a = summarize_wells(&recs).unwrap();
        recs.shuffle(&mut rng);
        assert_eq!(a, summarize_wells(&recs).unwrap());
        for s in &a {
            for st in s.stats {
                assert!(st.mean <= st.max);
            }
        }
        let pts = well_points(&a, GeochemIndex::Toc, Aggregate::Max);
        assert_eq!(pts.len(), a.len());
    }
}

#[test]
fn csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wells.csv");
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let recs = random_records(&mut rng, 15);
        std::fs::write(&path, format_rock_eval_csv(&recs)).unwrap();
        assert_eq!(read_rock_eval_csv(&path).unwrap(), recs);
    }
    std::fs::write(&path, "well_id,x,y,S1,S2,S3,TOC,Tmax\nA,0,0,1,1,1,0,430\n").unwrap();
    assert!(read_rock_eval_csv(&path).is_err());
}
