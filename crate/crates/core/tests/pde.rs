use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ricci_forge_core::solutions::*;
use ricci_forge_core::{Error, Expr};

fn family(tag: &str) -> SolutionFamily {
    family_by_tag(tag).unwrap().example_family().unwrap()
}

fn points(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<Vec<f64>> {
    (0..count).map(|_| (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect()).collect()
}

#[test]
fn phi_form_residual_vanishes_where_the_stated_curvature_is_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let t1 = SolutionFamily::Theorem1(Theorem1Params {
        p1: 2,
        p2: 3,
        case: Case::A,
        ambient: Ambient::Euclidean,
        a1: 0.4,
        a2: 0.4,
        b: vec![0.1, -0.2, 0.3, 0.0, 0.2],
        c: 1.0,
    });
    for f in [t1, family("theorem2/a"), family("theorem3/a")] {
        let problem = pde_problem(&f).unwrap();
        let n = problem.dist.dim();
        for x in points(&mut rng, n, 100) {
            let r = pde_residuals(&problem, &x).unwrap();
            assert!(r.direct.abs() <= 1e-8, "{}: {r:?}", problem.label);
        }
    }
}

#[test]
fn square_four_dimensional_split_is_a_configuration_error() {
    let f = SolutionFamily::Theorem1(Theorem1Params {
        p1: 2,
        p2: 2,
        case: Case::A,
        ambient: Ambient::Euclidean,
        a1: 0.5,
        a2: 0.5,
        b: vec![0.0; 4],
        c: 1.0,
    });
    let problem = pde_problem(&f).unwrap();
    assert!(matches!(pde_residuals(&problem, &[0.1, 0.2, 0.3, 0.4]), Err(Error::Configuration(_))));
}

#[test]
fn case_b_and_curved_ambient_have_no_pde_case() {
    let f = family("theorem2/b");
    assert!(matches!(pde_problem(&f), Err(Error::InvalidParameter(_))));
    let f = SolutionFamily::Theorem4ii(Theorem4iiParams {
        p1: 3,
        p2: 3,
        case: Case::A,
        ambient: Ambient::Euclidean,
        p: 3,
        epsilon: -1,
        a: 1.0,
        b: 0.5,
        u: (0..3).map(Expr::coord).collect(),
    });
    assert!(matches!(pde_problem(&f), Err(Error::NotImplemented(_))));
}
