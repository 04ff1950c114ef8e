use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ricci_forge_core::curvature::curvature_pack;
use ricci_forge_core::solutions::pointwise_metric;
use ricci_forge_core::{Error, SplitDistribution};

/// Diagonal `T` with equal traces over the two blocks.
fn admissible(rng: &mut ChaCha8Rng, p1: usize, p2: usize) -> Vec<f64> {
    let mut t: Vec<f64> = (0..p1 + p2).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let k1: f64 = t[..p1].iter().sum();
    let k2: f64 = t[p1..].iter().sum();
    t[p1] += k1 - k2;
    t
}

#[test]
fn origin_curvature_reproduces_t() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for (p1, p2) in [(2, 2), (2, 3)] {
        for _ in 0..20 {
            let t = admissible(&mut rng, p1, p2);
            let c = rng.gen_range(0.5..3.0);
            let pm = pointwise_metric(&t, p1, p2, c, 0.2).unwrap();
            let pack = curvature_pack(&pm.metric, &SplitDistribution::coordinate(p1, p2), &vec![0.0; p1 + p2]).unwrap();
            let (r1, r2) = (pack.ric1_coordinates(), pack.ric2_coordinates());
            for a in 0..p1 + p2 {
                for b in 0..p1 + p2 {
                    let want = if a == b { t[a] } else { 0.0 };
                    let got = if a < p1 && b < p1 {
                        r1[(a, b)]
                    } else if a >= p1 && b >= p1 {
                        r2[(a, b)]
                    } else {
                        continue;
                    };
                    assert!((got - want).abs() <= 1e-6, "({p1},{p2}) T={t:?} C={c} [{a},{b}] {got} vs {want}");
                }
            }
        }
    }
}

#[test]
fn unequal_traces_and_large_boxes_are_rejected() {
    assert!(matches!(pointwise_metric(&[1.0, 0.0, 0.0, 0.0], 2, 2, 1.0, 0.2), Err(Error::Compatibility(_))));
    assert!(matches!(pointwise_metric(&[2.0, 2.0, 2.0, 2.0], 2, 2, 1.0, 5.0), Err(Error::Definiteness { .. })));
}
