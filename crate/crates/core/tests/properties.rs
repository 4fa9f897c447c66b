//! Property tests over randomized structures.

use bdris::admm::assemble_linear_map;
use bdris::channel::{frv, AnglePair};
use bdris::ris::{
    admittance_to_scattering, upper_triangular_pack, upper_triangular_unpack, validate_scattering,
    AdmittanceMatrix, RisArchitecture,
};
use bdris::scalar::{RMat, RVec, Vec2};
use proptest::prelude::*;

fn arch_strategy() -> impl Strategy<Value = RisArchitecture> {
    (1usize..=4, 1usize..=4)
        .prop_map(|(groups, size)| RisArchitecture::new(groups, size).unwrap())
}

fn admittance_strategy() -> impl Strategy<Value = AdmittanceMatrix<f64>> {
    arch_strategy().prop_flat_map(|arch| {
        let len = arch.packed_len();
        proptest::collection::vec(-0.1f64..0.1, len).prop_map(move |vals| {
            upper_triangular_unpack(&RVec::from_vec(vals), arch).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Pack/unpack is an exact bijection, no floating error permitted.
    #[test]
    fn pack_unpack_bijection(b in admittance_strategy()) {
        let x = upper_triangular_pack(&b);
        let back = upper_triangular_unpack(&x, *b.architecture()).unwrap();
        for (orig, got) in b.blocks().iter().zip(back.blocks()) {
            prop_assert_eq!(orig, got);
        }
        let x2 = upper_triangular_pack(&back);
        prop_assert_eq!(x, x2);
    }

    /// The Cayley-type map always lands on the unitary symmetric
    /// block-diagonal manifold.
    #[test]
    fn scattering_constraints_always_hold(b in admittance_strategy()) {
        let arch = *b.architecture();
        let theta = admittance_to_scattering(&b);
        let report = validate_scattering(&theta.to_dense(), &arch);
        prop_assert!(
            report.pass,
            "unitarity {:.2e} symmetry {:.2e} blocks {:.2e}",
            report.unitarity,
            report.symmetry,
            report.block_structure
        );
    }

    /// Field-response entries are unit modulus for any position and angles.
    #[test]
    fn frv_entries_unit_modulus(
        x in -1.0f64..1.0,
        y in -1.0f64..1.0,
        angles in proptest::collection::vec(
            (-1.5f64..1.5, -1.5f64..1.5).prop_map(|(az, el)| AnglePair { azimuth: az, elevation: el }),
            1..6,
        ),
    ) {
        let v = frv(&Vec2::new(x, y), &angles, 0.01);
        for e in v.iter() {
            prop_assert!((e.norm() - 1.0).abs() < 1e-12);
        }
    }

    /// The packed linear map reproduces the matrix residual for arbitrary
    /// data, not just ADMM-generated matrices.
    #[test]
    fn vectorization_identity(
        b in admittance_strategy(),
        seed in 0u64..1000,
    ) {
        use rand::Rng;
        use rand::SeedableRng;
        let arch = *b.architecture();
        let m = arch.total_elements();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m_mat = RMat::<f64>::from_fn(m, 4, |_, _| rng.random::<f64>() - 0.5);
        let gamma = RMat::<f64>::from_fn(m, 4, |_, _| rng.random::<f64>() - 0.5);
        let (a, b_vec) = assemble_linear_map(&m_mat, &gamma, &arch);
        let lhs = (&a * upper_triangular_pack(&b) - &b_vec).norm_squared();
        let rhs = (b.to_dense() * &m_mat - &gamma).norm_squared();
        prop_assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }
}
