use hodge_dtn::algebra::{Operator, Space};
use hodge_dtn::cylinder::{mode_identities, mode_solve};
use hodge_dtn::dense::{numerical_rank, rank_from_spectrum, RankPolicy};
use hodge_dtn::galerkin::dense_mass;
use hodge_dtn::generators::{generate_data, Generator, MeshData};
use hodge_dtn::io::{parse_matrix, parse_mesh, read_mesh, write_matrix, write_mesh};
use hodge_dtn::report::Pipeline;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Move every vertex by at most `amount` in each coordinate. Small enough
/// amounts keep the mesh valid.
fn jitter(data: &MeshData, seed: u64, amount: f64) -> MeshData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = data.clone();
    for v in &mut out.vertices {
        for x in v.iter_mut() {
            *x += rng.random_range(-amount..amount);
        }
    }
    out
}

fn generator() -> impl Strategy<Value = Generator> {
    prop::sample::select(Generator::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mesh_text_round_trip(seed in any::<u64>(), g in generator()) {
        let data = jitter(&generate_data(g, 1).unwrap(), seed, 1e-3);
        let text = write_mesh(&data);
        prop_assert_eq!(parse_mesh(&text).unwrap(), data);
    }

    #[test]
    fn matrix_text_round_trip(rows in 0usize..6, cols in 0usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1e6..1e6));
        prop_assert_eq!(parse_matrix(&write_matrix(&a)).unwrap(), a);
    }

    #[test]
    fn planted_rank_is_found(rank in 0usize..8, extra in 0usize..6, gap in 1e4f64..1e9, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s: Vec<f64> = (0..rank).map(|_| rng.random_range(1.0..10.0)).collect();
        s.extend((0..extra).map(|_| rng.random_range(0.0..1.0) / gap));
        s.sort_by(|a, b| b.total_cmp(a));
        let (r, g) = rank_from_spectrum(&s, &RankPolicy::default());
        if rank > 0 {
            prop_assert_eq!(r, rank);
        }
        prop_assert!(g >= RankPolicy::default().threshold);
    }

    #[test]
    fn rank_ignores_scale(seed in any::<u64>(), scale in -8i32..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = DMatrix::from_fn(7, 3, |_, _| rng.random_range(-1.0..1.0));
        let v = DMatrix::from_fn(3, 5, |_, _| rng.random_range(-1.0..1.0));
        let a = (&u * &v) * 10f64.powi(scale);
        let r = numerical_rank("a", &a, &RankPolicy::default());
        prop_assert_eq!(r.rank, 3);
        prop_assert!(!r.ambiguous);
    }

    #[test]
    fn composition_requires_matching_spaces(
        a in 0usize..3, b in 0usize..3, c in 0usize..3,
        wa in any::<bool>(), wb in any::<bool>(),
    ) {
        let space = |d, weak| if weak { Space::weak(d) } else { Space::strong(d) };
        let right = Operator::new("r", space(a, false), space(b, wa), DMatrix::identity(2, 2));
        let left = Operator::new("l", space(c, wb), space(a, false), DMatrix::identity(2, 2));
        let ok = b == c && wa == wb;
        let composed = left.after(&right);
        prop_assert_eq!(composed.is_ok(), ok);
        if let Ok(op) = composed {
            prop_assert_eq!(op.input, right.input);
            prop_assert_eq!(op.output, left.output);
        }
        prop_assert_eq!(right.plus(&right).is_ok(), true);
        prop_assert_eq!(right.plus(&left).is_ok(), right.input == left.input && right.output == left.output);
    }

    #[test]
    fn cylinder_identities_hold_for_any_mode(m in 0usize..40, l in 0.05f64..8.0) {
        let block = mode_solve(m, l);
        for id in mode_identities(&block) {
            prop_assert!(id.residual < 1e-10, "{} degree {} m={} L={}: {:e}", id.name, id.degree, m, l, id.residual);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn coboundary_squares_to_zero(g in generator(), seed in any::<u64>()) {
        let c = jitter(&generate_data(g, 1).unwrap(), seed, 1e-3).build().unwrap();
        for k in 0..c.dim() - 1 {
            let dd = c.coboundary(k + 1).compose(c.coboundary(k));
            prop_assert!(dd.iter().flatten().all(|&x| x == 0), "d d ≠ 0 in degree {}", k);
        }
    }

    #[test]
    fn masses_are_symmetric_positive_definite(seed in any::<u64>()) {
        let c = jitter(&generate_data(Generator::Annulus2d, 2).unwrap(), seed, 5e-3).build().unwrap();
        for k in 0..=c.dim() {
            let m = dense_mass(&c, k).unwrap();
            prop_assert!((&m - m.transpose()).amax() <= 1e-14 * m.amax());
            prop_assert!(m.clone().cholesky().is_some(), "mass {} not positive definite", k);
        }
    }

    #[test]
    fn phi_is_positive_semidefinite_and_kills_constants(seed in any::<u64>()) {
        let data = jitter(&generate_data(Generator::Disk2d, 2).unwrap(), seed, 5e-3);
        let p = Pipeline::build(&data, RankPolicy::default()).unwrap();
        let phi = &p.calculus.phi[0];
        let ones = DVector::from_element(phi.ncols(), 1.0);
        prop_assert!((phi * &ones).amax() <= 1e-9 * phi.amax());
        let sym = (phi + phi.transpose()) * 0.5;
        prop_assert!((phi - &sym).amax() <= 1e-9 * phi.amax());
        let low = sym.symmetric_eigenvalues().min();
        prop_assert!(low >= -1e-9 * phi.amax());
    }
}

#[test]
fn mesh_file_round_trip() {
    let data = generate_data(Generator::Shell3d, 1).unwrap();
    let mut file = tempfile::NamedTempFile::new().unwrap();
    std::io::Write::write_all(&mut file, write_mesh(&data).as_bytes()).unwrap();
    assert_eq!(read_mesh(file.path()).unwrap(), data);
}
