//! Property-based invariants of the matrix kernel, states, and negativity.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use negtrans_core::negativity::{negativity, pure_negativity};
use negtrans_core::perturb::{amplitude_variance_ga, fragility_2, variance};
use negtrans_core::qmat::{
    self, dagger, evolve_unitary, herm_eig, kron, partial_trace, partial_transpose,
    symmetrize, BipartiteShape, CMat, Factor,
};
use negtrans_core::states::{purify, split_spectrum, DensityMatrix};

fn cmat_from(reals: &[f64], imags: &[f64], d: usize) -> CMat {
    let mut m = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = C64::new(reals[i * d + j], imags[i * d + j]);
        }
    }
    m
}

fn hermitian_strategy(d: usize) -> impl Strategy<Value = CMat> {
    let n = d * d;
    (
        prop::collection::vec(-1.0f64..1.0, n),
        prop::collection::vec(-1.0f64..1.0, n),
    )
        .prop_map(move |(re, im)| symmetrize(&cmat_from(&re, &im, d)))
}

fn density_strategy(d: usize) -> impl Strategy<Value = DensityMatrix> {
    hermitian_strategy(d).prop_map(move |h| {
        // push a Hermitian matrix to a strictly positive state
        let eig = herm_eig(&h).unwrap();
        let shifted = eig.apply(|e| C64::new(e.abs() + 0.05, 0.0));
        let tr = qmat::trace(&shifted).re;
        DensityMatrix::new(shifted.mapv(|z| z / tr)).unwrap()
    })
}

fn unitary_strategy(d: usize) -> impl Strategy<Value = CMat> {
    hermitian_strategy(d).prop_map(move |h| evolve_unitary(&h, 1.0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kron_partial_trace_adjoint(
        x in hermitian_strategy(3),
        m in hermitian_strategy(9),
    ) {
        // Tr[(X (x) I) M] = Tr[X Tr_2 M]
        let lhs = qmat::trace(&kron(&x, &qmat::identity(3)).dot(&m));
        let t2 = partial_trace(&m, BipartiteShape::new(3, 3), Factor::Second).unwrap();
        let rhs = qmat::trace(&x.dot(&t2));
        prop_assert!((lhs - rhs).norm() <= 1e-10);
    }

    #[test]
    fn partial_transpose_preserves_trace_and_hermiticity(m in hermitian_strategy(6)) {
        let pt = partial_transpose(&m, BipartiteShape::new(2, 3)).unwrap();
        prop_assert!((qmat::trace(&pt) - qmat::trace(&m)).norm() <= 1e-12);
        prop_assert!(qmat::herm_deviation(&pt) <= 1e-12);
    }

    #[test]
    fn unitary_group_law(h in hermitian_strategy(4), t1 in -2.0f64..2.0, t2 in -2.0f64..2.0) {
        let u1 = evolve_unitary(&h, t1).unwrap();
        let u2 = evolve_unitary(&h, t2).unwrap();
        let u12 = evolve_unitary(&h, t1 + t2).unwrap();
        prop_assert!(qmat::max_abs_diff(&u1.dot(&u2), &u12) <= 1e-9);
    }

    #[test]
    fn negativity_local_unitary_invariance(
        rho in density_strategy(4),
        ua in unitary_strategy(2),
        ub in unitary_strategy(2),
    ) {
        let sh = BipartiteShape::new(2, 2);
        let n0 = negativity(&rho, sh).unwrap().value;
        let u = kron(&ua, &ub);
        let rotated = DensityMatrix::new(u.dot(rho.mat()).dot(&dagger(&u))).unwrap();
        let n1 = negativity(&rotated, sh).unwrap().value;
        prop_assert!((n0 - n1).abs() <= 1e-9, "{n0} vs {n1}");
    }

    #[test]
    fn negativity_nonnegative_and_zero_for_products(
        a in density_strategy(2),
        b in density_strategy(3),
    ) {
        let rho = DensityMatrix::new(kron(a.mat(), b.mat())).unwrap();
        let n = negativity(&rho, BipartiteShape::new(2, 3)).unwrap();
        prop_assert!(n.value >= 0.0);
        prop_assert!(n.value == 0.0);
        prop_assert_eq!(n.negative_count, 0);
    }

    #[test]
    fn pure_state_negativity_routes_agree(raw in prop::collection::vec(0.05f64..1.0, 3)) {
        let norm: f64 = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        let coeffs: Vec<f64> = raw.iter().map(|x| x / norm).collect();
        let lam: Vec<f64> = coeffs.iter().map(|a| a * a).collect();
        let rho = DensityMatrix::from_eigenvalues(&lam).unwrap();
        let pair = purify(&rho).unwrap();
        let proj = DensityMatrix::new(pair.projector()).unwrap();
        let n = negativity(&proj, BipartiteShape::new(3, 3)).unwrap().value;
        prop_assert!((n - pure_negativity(&pair.coeffs)).abs() <= 1e-9);
    }

    #[test]
    fn variance_bound_chain(a in hermitian_strategy(3), rho in density_strategy(3)) {
        // G >= (Delta A)^2 >= f_2
        let g = amplitude_variance_ga(&a, &rho).unwrap();
        let v = variance(&a, &rho);
        let f2 = fragility_2(&a, &rho);
        prop_assert!(g >= v - 1e-10, "G {g} < var {v}");
        prop_assert!(v >= f2 - 1e-10, "var {v} < f2 {f2}");
    }

    #[test]
    fn split_projectors_commute_with_state(rho in density_strategy(4)) {
        let s = split_spectrum(&rho, 1e-10).unwrap();
        let lhs = s.proj_nonzero.dot(rho.mat());
        let rhs = rho.mat().dot(&s.proj_nonzero);
        prop_assert!(qmat::max_abs_diff(&lhs, &rhs) <= 1e-10);
        let sum = &s.proj_nonzero + &s.proj_zero;
        prop_assert!(qmat::approx_eq(&sum, &qmat::identity(4), 1e-10));
    }

    #[test]
    fn purification_traces_back(rho in density_strategy(3)) {
        let pair = purify(&rho).unwrap();
        let sum: f64 = pair.coeffs.iter().map(|a| a * a).sum();
        prop_assert!((sum - 1.0).abs() <= 1e-10);
        let resid = negtrans_core::states::purification_roundtrip_residual(&rho, &pair);
        prop_assert!(resid <= 1e-9);
    }
}
