use nalgebra::DMatrix;
use roesser2d::charpoly::C64 as Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roesser2d::charpoly::{char_poly, char_poly_oracle, det_at};
use roesser2d::Roesser2D;

/// `n_h = n_v = 2`, integer entries in `[-3, 3]`, block-diagonal `E`.
fn integer_model(rng: &mut ChaCha8Rng) -> Roesser2D {
    let mut e = DMatrix::zeros(4, 4);
    for (r0, c0) in [(0, 0), (2, 2)] {
        for r in 0..2 {
            for c in 0..2 {
                e[(r0 + r, c0 + c)] = rng.gen_range(-3..=3) as f64;
            }
        }
    }
    let a = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-3..=3) as f64);
    Roesser2D::autonomous(2, 2, e, a).unwrap()
}

#[test]
fn interpolation_matches_exact_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..20 {
        let m = integer_model(&mut rng);
        let fast = char_poly(&m);
        let exact = char_poly_oracle(&m).unwrap();
        assert!(fast.max_abs_diff(&exact) <= 1e-8, "case {case}: {} vs {}", fast.display(), exact.display());
        assert!(fast.total_degree() <= m.rank_e(), "case {case}");
    }
}

#[test]
fn polynomial_evaluates_to_the_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let m = integer_model(&mut rng);
        let p = char_poly(&m);
        let z1 = Complex::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
        let z2 = Complex::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
        let direct = det_at(&m, z1, z2);
        assert!((p.eval(z1, z2) - direct).norm() <= 1e-8 * (1.0 + direct.norm()));
    }
}
