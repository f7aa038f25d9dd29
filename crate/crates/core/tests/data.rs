mod common;

use common::Rng;
use proptest::prelude::*;
use ssfad::io::{load_cube, load_map, load_mask, save_cube, save_map, save_mask};
use ssfad::synth::{generate_scene, GaussianStream, Prng, SceneSpec};
use ssfad::{minmax_normalize, pad_symmetric, DetectionMap, GroundTruthMask, HyperCube};

#[test]
fn cube_round_trip_is_bit_identical() {
    let mut rng = Rng::new(21);
    let cube = HyperCube::from_fn(9, 7, 5, |_, _, _| rng.normal() * 1e3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cube.hdr");
    save_cube(&cube, &path).unwrap();
    let back = load_cube(&path).unwrap();
    assert_eq!((back.height(), back.width(), back.bands()), (9, 7, 5));
    for (a, b) in cube.as_bsq().iter().zip(back.as_bsq()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn mask_round_trip() {
    let mut rng = Rng::new(22);
    let mask = GroundTruthMask::new(6, 11, (0..66).map(|_| rng.uniform() < 0.3).collect()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mask.pgm");
    save_mask(&mask, &path).unwrap();
    assert_eq!(load_mask(&path, Some((6, 11))).unwrap(), mask);
    assert!(load_mask(&path, Some((11, 6))).is_err());
}

#[test]
fn padding_keeps_interior_and_mirrors_edges() {
    let cube = HyperCube::from_fn(5, 4, 2, |r, c, b| (100 * r + 10 * c + b) as f64).unwrap();
    let r = 3;
    let padded = pad_symmetric(&cube, r);
    assert_eq!((padded.height(), padded.width()), (11, 10));
    for row in 0..5 {
        for col in 0..4 {
            for b in 0..2 {
                assert_eq!(padded.value(row + r, col + r, b), cube.value(row, col, b));
            }
        }
    }
    // edge-inclusive mirror: padded index r-1 maps to source row 0
    assert_eq!(padded.value(r - 1, r, 0), cube.value(0, 0, 0));
    assert_eq!(padded.value(0, r, 0), cube.value(2, 0, 0));
    assert_eq!(padded.value(r + 5, r, 1), cube.value(4, 0, 1));
}

#[test]
fn gaussian_stream_moments() {
    let mut g = GaussianStream::new(Prng::new(2024));
    let n = 100_000;
    let xs: Vec<f64> = (0..n).map(|_| g.next_gaussian()).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!(mean.abs() < 0.02, "mean {mean}");
    assert!((var - 1.0).abs() < 0.03, "var {var}");
}

#[test]
fn canonical_scene_is_deterministic() {
    let spec = SceneSpec::canonical();
    let (c1, m1) = generate_scene(&spec).unwrap();
    let (c2, m2) = generate_scene(&spec).unwrap();
    assert_eq!(c1, c2);
    assert_eq!(m1, m2);
    let expected: usize = spec.anomalies.iter().map(|a| a.size * a.size).sum();
    assert_eq!(m1.anomaly_count(), expected);
    let mut other = spec.clone();
    other.seed = 43;
    assert_ne!(generate_scene(&other).unwrap().0, c1);
}

#[test]
fn scene_spec_text_round_trip() {
    let spec = SceneSpec::canonical();
    assert_eq!(SceneSpec::from_kv_text(&spec.to_kv_text()).unwrap(), spec);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn map_round_trip_within_f32(values in prop::collection::vec(-1e6f64..1e6, 12)) {
        let map = DetectionMap::new(3, 4, values).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.hdr");
        save_map(&map, &path).unwrap();
        let back = load_map(&path).unwrap();
        for (a, b) in map.scores().iter().zip(back.scores()) {
            prop_assert_eq!(*b, *a as f32 as f64);
        }
    }

    #[test]
    fn minmax_is_idempotent_and_order_preserving(values in prop::collection::vec(-50.0f64..50.0, 1..40)) {
        let n = values.len();
        let map = DetectionMap::new(1, n, values.clone()).unwrap();
        let once = minmax_normalize(&map);
        let twice = minmax_normalize(&once);
        for (a, b) in once.scores().iter().zip(twice.scores()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        for i in 0..n {
            prop_assert!((0.0..=1.0).contains(&once.scores()[i]));
            for j in 0..n {
                if values[i] < values[j] {
                    prop_assert!(once.scores()[i] <= once.scores()[j]);
                }
            }
        }
    }
}
