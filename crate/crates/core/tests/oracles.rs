mod common;

use common::*;
use rand::Rng;
use tinstitch_core::network::{zoo, WeightStore};
use tinstitch_core::normstats::{channel_stats, symmetric_eigen, whitening_stats};
use tinstitch_core::tensor::{resize_nearest, PadMode};
use tinstitch_core::{Dims, Tensor};

#[test]
fn conv_matches_direct_sum() {
    assert!(conv_sweep(1) <= 1e-5);
}

#[test]
fn maxpool_matches_replicated_edge_oracle() {
    assert!(pool_sweep(2) <= 1e-5);
}

#[test]
fn bilinear_matches_half_pixel_oracle() {
    assert!(resize_sweep(3) <= 1e-5);
}

#[test]
fn pad_matches_mirror_oracle() {
    assert!(pad_sweep(4) <= 1e-5);
}

#[test]
fn nearest_upsample_repeats_blocks() {
    let mut r = rng(5);
    for _ in 0..10 {
        let d = Dims::new(1, r.gen_range(1..=3), r.gen_range(1..=9), r.gen_range(1..=9));
        let f = r.gen_range(1..=4);
        let x = random_tensor(&mut r, d);
        let y = resize_nearest(&x, f).unwrap();
        let want = Tensor::from_fn(d.with_spatial(d.h * f, d.w * f), |n, c, yy, xx| x.get(n, c, yy / f, xx / f));
        assert_eq!(y, want);
    }
}

#[test]
fn weight_container_round_trip_is_byte_exact() {
    assert!(weight_roundtrip(6, 25));
    let g = zoo::reference_graph(8);
    let w = zoo::init_weights(&g, 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ref.urstw");
    w.save(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(bytes, w.to_bytes());
    assert_eq!(WeightStore::load(&path).unwrap(), w);
}

#[test]
fn receptive_field_matches_perturbation_probe() {
    let mut r = rng(7);
    for _ in 0..40 {
        let g = random_scale_preserving_graph(&mut r, 2);
        let w = positive_weights(&g, &mut r);
        assert_eq!(probe_receptive_field(&g, &w, &mut r), g.receptive_field(), "{}", g.to_json());
    }
}

#[test]
fn channel_stats_match_welford() {
    let mut r = rng(10);
    for _ in 0..20 {
        let d = Dims::new(r.gen_range(1..=2), r.gen_range(1..=4), r.gen_range(1..=30), r.gen_range(1..=30));
        let x = random_tensor(&mut r, d).map(|v| 3.0 * v + 7.0);
        let s = channel_stats(&x, 0.0).unwrap();
        for n in 0..d.n {
            for c in 0..d.c {
                let (m, v) = welford(x.plane(n, c));
                let i = n * d.c + c;
                assert!((s.mean()[i] as f64 - m).abs() < 1e-5 * m.abs().max(1.0));
                assert!((s.std()[i] as f64 - v.sqrt()).abs() < 1e-5);
            }
        }
    }
}

#[test]
fn eigen_reconstructs_symmetric_matrices() {
    let mut r = rng(11);
    for _ in 0..20 {
        let n = r.gen_range(1..=6);
        let b: Vec<f64> = (0..n * n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let a: Vec<f64> = (0..n * n).map(|k| (b[k] + b[(k % n) * n + k / n]) / 2.0).collect();
        let (vals, vecs) = symmetric_eigen(&a, n);
        for i in 0..n {
            for j in 0..n {
                // eigenvectors are columns of `vecs`
                let rec: f64 = (0..n).map(|k| vecs[i * n + k] * vals[k] * vecs[j * n + k]).sum();
                assert!((rec - a[i * n + j]).abs() < 1e-9, "{rec} vs {}", a[i * n + j]);
            }
        }
    }
}

#[test]
fn whitening_inverts_covariance() {
    let (_, dev) = tiw_partition(12, 10);
    assert!(dev <= 1e-3, "covariance deviates by {dev}");
    let x = random_tensor(&mut rng(13), Dims::new(1, 3, 1, 1));
    assert!(whitening_stats(&x, 1e-5).is_err());
}

#[test]
fn reflect_mirror_excludes_edge() {
    let x = Tensor::new(Dims::new(1, 1, 1, 3), vec![1.0, 2.0, 3.0]).unwrap();
    let spec = tinstitch_core::tensor::PadSpec { mode: PadMode::Reflect, left: 2, right: 2, top: 0, bottom: 0 };
    assert_eq!(pad_oracle(&x, spec).data(), &[3.0, 2.0, 1.0, 2.0, 3.0, 2.0, 1.0]);
}


#[test]
fn tin_pieces_reassemble_to_in() {
    assert!(tin_partition(14, 30) <= 1e-6);
}

#[test]
fn tiw_pieces_reassemble_to_iw() {
    assert!(tiw_partition(15, 30).0 <= 1e-5);
}
