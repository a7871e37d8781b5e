//! Cross-route oracle checks: every closed-form path is validated against an
//! independent computation (partial traces of the full expansion, degenerate
//! eigenvalue perturbation, exact finite differences, or brute-force
//! eigensolves).

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use negtrans_core::dynamics::{
    cut_negativity, evolve_exact, linspace, perturbed_rho_bipartite, perturbed_rho_tri,
    trajectory, Bipartition, Cut, TotalHamiltonian, TripartiteScenario,
};
use negtrans_core::perturb::{
    eig_perturb_degenerate, f_operators, negative_part_sum, negativity_fd2, susceptibility,
    transmissibility, vulnerability, EigPerturbInput,
};
use negtrans_core::qmat::{
    self, dagger, evolve_unitary, herm_eig, partial_trace, partial_transpose,
    symmetrize, BipartiteShape, CMat, Factor,
};
use negtrans_core::states::DensityMatrix;

fn rand_herm(rng: &mut ChaCha8Rng, d: usize) -> CMat {
    let mut m = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    symmetrize(&m)
}

fn rand_density(rng: &mut ChaCha8Rng, d: usize, zero_ranks: usize) -> DensityMatrix {
    let mut lam: Vec<f64> = (0..d - zero_ranks)
        .map(|_| rng.gen_range(0.05..1.0))
        .collect();
    let s: f64 = lam.iter().sum();
    for l in &mut lam {
        *l /= s;
    }
    lam.resize(d, 0.0);
    let basis = evolve_unitary(&rand_herm(rng, d), 1.0).unwrap();
    let mut m = CMat::zeros((d, d));
    for (k, &l) in lam.iter().enumerate() {
        let col = basis.column(k);
        for x in 0..d {
            for y in 0..d {
                m[(x, y)] += C64::new(l, 0.0) * col[x] * col[y].conj();
            }
        }
    }
    DensityMatrix::new(m).unwrap()
}

fn rand_scenario(
    rng: &mut ChaCha8Rng,
    da: usize,
    db: usize,
    zero_ranks_b: usize,
    terms: usize,
    with_free: bool,
) -> TripartiteScenario {
    let rho_a = rand_density(rng, da, 0);
    let rho_b = rand_density(rng, db, zero_ranks_b);
    let pairs: Vec<(CMat, CMat)> = (0..terms)
        .map(|_| (rand_herm(rng, da), rand_herm(rng, db)))
        .collect();
    let (c, d) = if with_free {
        (Some(rand_herm(rng, da)), Some(rand_herm(rng, db)))
    } else {
        (None, None)
    };
    let ham = TotalHamiltonian::new(da, db, pairs, c, d, None).unwrap();
    TripartiteScenario::new(rho_a, rho_b, ham, None).unwrap()
}

fn trace_middle(m: &CMat, d1: usize, d2: usize, d3: usize) -> CMat {
    let dn = d1 * d3;
    let mut out = CMat::zeros((dn, dn));
    for x in 0..d1 {
        for y in 0..d1 {
            for u in 0..d3 {
                for v in 0..d3 {
                    let mut s = C64::new(0.0, 0.0);
                    for k in 0..d2 {
                        s += m[((x * d2 + k) * d3 + u, (y * d2 + k) * d3 + v)];
                    }
                    out[(x * d3 + u, y * d3 + v)] = s;
                }
            }
        }
    }
    out
}

#[test]
fn closed_forms_match_partial_trace_on_random_scenarios() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for case in 0..6 {
        let (da, db) = ([2, 3][case % 2], [3, 2][case % 2]);
        let sc = rand_scenario(&mut rng, da, db, case % db, 2, case % 2 == 0);
        let tri = perturbed_rho_tri(&sc);
        let ab = perturbed_rho_bipartite(&sc, Bipartition::Ab).unwrap();
        let o1 = partial_trace(&tri.order1, BipartiteShape::new(da, da * db), Factor::First).unwrap();
        let o2 = partial_trace(&tri.order2, BipartiteShape::new(da, da * db), Factor::First).unwrap();
        assert!(qmat::max_abs_diff(&ab.order1, &o1) <= 1e-10, "case {case}");
        assert!(qmat::max_abs_diff(&ab.order2, &o2) <= 1e-10, "case {case}");

        let atb = perturbed_rho_bipartite(&sc, Bipartition::AtB).unwrap();
        let o1 = trace_middle(&tri.order1, da, da, db);
        let o2 = trace_middle(&tri.order2, da, da, db);
        assert!(qmat::max_abs_diff(&atb.order1, &o1) <= 1e-10, "case {case}");
        assert!(qmat::max_abs_diff(&atb.order2, &o2) <= 1e-10, "case {case}");

        let ata = perturbed_rho_bipartite(&sc, Bipartition::AtA).unwrap();
        let o1 =
            partial_trace(&tri.order1, BipartiteShape::new(da * da, db), Factor::Second).unwrap();
        let o2 =
            partial_trace(&tri.order2, BipartiteShape::new(da * da, db), Factor::Second).unwrap();
        assert!(qmat::max_abs_diff(&ata.order1, &o1) <= 1e-10, "case {case}");
        assert!(qmat::max_abs_diff(&ata.order2, &o2) <= 1e-10, "case {case}");

        // order-k terms are Hermitian and traceless
        for o in [&ab.order1, &ab.order2, &atb.order1, &atb.order2] {
            assert!(qmat::herm_deviation(o) <= 1e-9);
            assert!(qmat::trace(o).norm() <= 1e-10);
        }
    }
}

#[test]
fn susceptibility_matches_degenerate_perturbation_route() {
    // the second-order operator route and the generic degenerate eigenvalue
    // perturbation of the partial-transpose expansion are two independent
    // derivations of the same coefficient
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for case in 0..5 {
        let sc = rand_scenario(&mut rng, 3, 3, 1 + case % 2, 2, false);
        let s = match susceptibility(&sc) {
            Ok(s) => s,
            Err(e) => panic!("susceptibility failed: {e}"),
        };

        let ab = perturbed_rho_bipartite(&sc, Bipartition::Ab).unwrap();
        let sh = BipartiteShape::new(3, 3);
        let h0 = partial_transpose(&ab.order0, sh).unwrap();
        let h1 = partial_transpose(&ab.order1, sh).unwrap();
        let h2 = partial_transpose(&ab.order2, sh).unwrap();
        let inp = EigPerturbInput::new(h0.clone(), h1, h2).unwrap();

        // projector onto the zero eigenspace of the unperturbed transpose
        let eig0 = herm_eig(&h0).unwrap();
        let mut p = CMat::zeros(h0.raw_dim());
        let mut rank = 0;
        for (k, &e) in eig0.eigenvalues.iter().enumerate() {
            if e.abs() < 1e-10 {
                rank += 1;
                let col = eig0.eigenvectors.column(k);
                for x in 0..h0.nrows() {
                    for y in 0..h0.nrows() {
                        p[(x, y)] += col[x] * col[y].conj();
                    }
                }
            }
        }
        assert!(rank > 0);
        let orders = eig_perturb_degenerate(&inp, &p).unwrap();
        let s_alt: f64 = orders
            .iter()
            .filter(|o| o.e2 < -1e-12)
            .map(|o| -o.e2)
            .sum();
        assert!(
            (s.n2 - s_alt).abs() <= 1e-9,
            "case {case}: operator route {} vs perturbation route {}",
            s.n2,
            s_alt
        );

        // and the f-operator spectrum is exactly what the reduction produced
        let fops = f_operators(&sc).unwrap();
        let f_eigs = herm_eig(&symmetrize(&fops.f_ab)).unwrap().eigenvalues;
        let mut reduction_eigs: Vec<f64> = orders.iter().map(|o| o.e2).collect();
        reduction_eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in f_eigs.iter().zip(reduction_eigs.iter()) {
            assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn ancilla_free_part_never_moves_negativities() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let grid = linspace(0.0, 1.2, 7);
    for case in 0..3 {
        let base = rand_scenario(&mut rng, 2, 3, case % 3, 2, false);
        let e_op = rand_herm(&mut rng, 2);
        let ham_e = TotalHamiltonian::new(
            2,
            3,
            base.ham().interaction().to_vec(),
            None,
            None,
            Some(e_op),
        )
        .unwrap();
        let with_e =
            TripartiteScenario::new(base.rho_a(), base.rho_b().clone(), ham_e, None).unwrap();
        let t0 = trajectory(&base, &grid).unwrap();
        let t1 = trajectory(&with_e, &grid).unwrap();
        for k in 0..grid.len() {
            for (a, b) in [
                (t0.neg_ab[k], t1.neg_ab[k]),
                (t0.neg_atb[k], t1.neg_atb[k]),
                (t0.neg_ata[k], t1.neg_ata[k]),
                (t0.neg_at_ab[k], t1.neg_at_ab[k]),
                (t0.neg_b_ata[k], t1.neg_b_ata[k]),
            ] {
                assert!((a - b).abs() <= 1e-9, "t={}: {a} vs {b}", grid[k]);
            }
        }
    }
}

#[test]
fn evolution_preserves_tripartite_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let sc = rand_scenario(&mut rng, 2, 3, 1, 2, true);
    let e0 = herm_eig(&sc.rho_tri0()).unwrap().eigenvalues;
    for t in [0.4, 1.9] {
        let st = evolve_exact(&sc, t).unwrap();
        let et = herm_eig(st.rho_tri.mat()).unwrap().eigenvalues;
        for (a, b) in e0.iter().zip(et.iter()) {
            assert!((a - b).abs() <= 1e-9, "t={t}: {a} vs {b}");
        }
    }
}

#[test]
fn degenerate_system_state_results_are_basis_covariant() {
    // with a degenerate system spectrum the eigensolver's basis inside the
    // eigenspace is arbitrary; conjugating the Hamiltonian blocks by a
    // unitary that fixes rho_A must leave every reported number unchanged
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let lam = [0.4, 0.4, 0.2];
    let rho_a = DensityMatrix::from_eigenvalues(&lam).unwrap();
    // block unitary acting inside the degenerate subspace
    let mut gen = CMat::zeros((3, 3));
    gen[(0, 1)] = C64::new(0.3, 0.7);
    gen[(1, 0)] = C64::new(0.3, -0.7);
    let u = evolve_unitary(&gen, 1.0).unwrap();
    assert!(qmat::max_abs_diff(
        &u.dot(rho_a.mat()).dot(&dagger(&u)),
        rho_a.mat()
    ) <= 1e-12);

    let rho_b = rand_density(&mut rng, 3, 1);
    let pairs: Vec<(CMat, CMat)> = (0..2)
        .map(|_| (rand_herm(&mut rng, 3), rand_herm(&mut rng, 3)))
        .collect();
    let rotated: Vec<(CMat, CMat)> = pairs
        .iter()
        .map(|(a, b)| (u.dot(a).dot(&dagger(&u)), b.clone()))
        .collect();
    let sc1 = TripartiteScenario::new(
        rho_a.clone(),
        rho_b.clone(),
        TotalHamiltonian::new(3, 3, pairs, None, None, None).unwrap(),
        None,
    )
    .unwrap();
    let sc2 = TripartiteScenario::new(
        rho_a,
        rho_b,
        TotalHamiltonian::new(3, 3, rotated, None, None, None).unwrap(),
        None,
    )
    .unwrap();

    let (s1, s2) = (susceptibility(&sc1).unwrap(), susceptibility(&sc2).unwrap());
    assert!((s1.n2 - s2.n2).abs() <= 1e-9, "{} vs {}", s1.n2, s2.n2);
    let (t1, t2) = (transmissibility(&sc1).unwrap(), transmissibility(&sc2).unwrap());
    assert!((t1.n2 - t2.n2).abs() <= 1e-9);
    let (v1, v2) = (vulnerability(&sc1).unwrap(), vulnerability(&sc2).unwrap());
    assert!((v1.n2 - v2.n2).abs() <= 1e-9);

    let grid = [0.0, 0.3, 0.9];
    let tr1 = trajectory(&sc1, &grid).unwrap();
    let tr2 = trajectory(&sc2, &grid).unwrap();
    for k in 0..grid.len() {
        assert!((tr1.neg_ab[k] - tr2.neg_ab[k]).abs() <= 1e-9);
        assert!((tr1.neg_atb[k] - tr2.neg_atb[k]).abs() <= 1e-9);
        assert!((tr1.neg_ata[k] - tr2.neg_ata[k]).abs() <= 1e-9);
    }
}

#[test]
fn product_term_trace_lower_bound_on_susceptibility() {
    // when Tr[F_A] Tr[F_B] < 0 the product |Tr F_A Tr F_B| bounds S from below
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    let mut checked = 0;
    for _ in 0..12 {
        let sc = rand_scenario(&mut rng, 3, 3, 1, 1, false);
        let fops = f_operators(&sc).unwrap();
        let tr_a = qmat::trace(&fops.f_a_blocks[0][0]);
        let tr_b = qmat::trace(&fops.f_b_blocks[0][0]);
        let prod = (tr_a * tr_b).re;
        if prod < -1e-12 {
            let s = susceptibility(&sc).unwrap().n2;
            assert!(
                s >= 0.5 * prod.abs() - 1e-10,
                "S {s} below bound {}",
                0.5 * prod.abs()
            );
            checked += 1;
        }
    }
    assert!(checked > 0, "no case hit the negative-trace branch");
}

#[test]
fn transmissibility_zero_for_single_term_with_frees() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    for _ in 0..4 {
        let sc = rand_scenario(&mut rng, 3, 3, 1, 1, true);
        let t = transmissibility(&sc).unwrap();
        assert!(t.n2.abs() <= 1e-12, "T = {}", t.n2);
        let fops = f_operators(&sc).unwrap();
        assert!(qmat::fro_norm(&fops.f_atb) <= 1e-12);
    }
}

#[test]
fn second_derivatives_match_exact_negativity_curvature() {
    let mut rng = ChaCha8Rng::seed_from_u64(48);
    let sc = rand_scenario(&mut rng, 3, 3, 1, 2, false);
    let s = susceptibility(&sc).unwrap().n2;
    let fd = negativity_fd2(&sc, Cut::Ab, 1e-2).unwrap();
    assert!((2.0 * s - fd).abs() / fd.abs() <= 1e-3, "2S {} vs {fd}", 2.0 * s);

    let t = transmissibility(&sc).unwrap().n2;
    let fd = negativity_fd2(&sc, Cut::AtB, 1e-2).unwrap();
    if fd.abs() > 1e-8 {
        assert!((2.0 * t - fd).abs() / fd.abs() <= 1e-3, "2T {} vs {fd}", 2.0 * t);
    }

    let v = vulnerability(&sc).unwrap().n2;
    let fd = negativity_fd2(&sc, Cut::AtA, 1e-2).unwrap();
    assert!((2.0 * v - fd).abs() / fd.abs() <= 1e-3, "2V {} vs {fd}", 2.0 * v);
}

#[test]
fn negative_part_sum_empty_operator() {
    assert_eq!(negative_part_sum(&CMat::zeros((0, 0))).unwrap(), 0.0);
}

#[test]
fn maximizing_vulnerability_lands_on_the_analytic_pole() {
    // qubit product term: max V = -(Delta B)^2 G_A / 2 is attained where the
    // amplitude variance is minimal, the |az| = r pole of the Bloch sphere
    use negtrans_core::optimize::{
        extremize, qubit_ga_bloch, Direction, ExtremizeOptions, SpectrumConstrainedFamily,
    };
    use negtrans_core::states::{density_to_bloch, BlochVector};

    let r = 0.6;
    let family = SpectrumConstrainedFamily::new(vec![(1.0 + r) / 2.0, (1.0 - r) / 2.0]).unwrap();
    let sz = ndarray::array![
        [C64::new(1., 0.), C64::new(0., 0.)],
        [C64::new(0., 0.), C64::new(-1., 0.)]
    ];
    let sx = ndarray::array![
        [C64::new(0., 0.), C64::new(1., 0.)],
        [C64::new(1., 0.), C64::new(0., 0.)]
    ];
    let rho_b = DensityMatrix::from_eigenvalues(&[0.7, 0.3]).unwrap();
    let ham = TotalHamiltonian::new(2, 2, vec![(sz.clone(), sx)], None, None, None).unwrap();
    let objective = move |rho: &DensityMatrix| -> negtrans_core::Result<f64> {
        let sc = TripartiteScenario::new(rho.clone(), rho_b.clone(), ham.clone(), None)?;
        vulnerability(&sc).map(|r| r.n2)
    };
    let opts = ExtremizeOptions {
        budget: 2000,
        seed: 9,
        restarts: 5,
        initial: None,
    };
    let out = extremize(objective, &family, Direction::Maximize, &opts).unwrap();
    let best_rho = family.rho(&out.best_theta).unwrap();
    let b = density_to_bloch(&best_rho).unwrap();
    assert!((b.az.abs() - r).abs() <= 1e-3, "az = {}", b.az);
    // best V equals the closed form at the pole: -(Delta B)^2 G_min / 2
    let g_min = qubit_ga_bloch(1.0, -1.0, &BlochVector::new(0.0, 0.0, r)).unwrap();
    let db2 = {
        let sx = ndarray::array![
            [C64::new(0., 0.), C64::new(1., 0.)],
            [C64::new(1., 0.), C64::new(0., 0.)]
        ];
        negtrans_core::perturb::variance(
            &sx,
            &DensityMatrix::from_eigenvalues(&[0.7, 0.3]).unwrap(),
        )
    };
    assert!(
        (out.best_value + 0.5 * db2 * g_min).abs() <= 1e-5,
        "best V {} vs analytic {}",
        out.best_value,
        -0.5 * db2 * g_min
    );
}

#[test]
fn swap_scenario_localization_window() {
    // mixed-bath SWAP qubits: the bath-versus-rest cut gains negativity while
    // both single-system cuts with the bath stay at zero
    let rho_a = DensityMatrix::from_eigenvalues(&[0.8, 0.2]).unwrap();
    let rho_b = DensityMatrix::from_eigenvalues(&[0.6, 0.4]).unwrap();
    let sx = ndarray::array![
        [C64::new(0., 0.), C64::new(1., 0.)],
        [C64::new(1., 0.), C64::new(0., 0.)]
    ];
    let sy = ndarray::array![
        [C64::new(0., 0.), C64::new(0., -1.)],
        [C64::new(0., 1.), C64::new(0., 0.)]
    ];
    let sz = ndarray::array![
        [C64::new(1., 0.), C64::new(0., 0.)],
        [C64::new(0., 0.), C64::new(-1., 0.)]
    ];
    let ham = TotalHamiltonian::new(
        2,
        2,
        vec![(sx.clone(), sx), (sy.clone(), sy), (sz.clone(), sz)],
        None,
        None,
        None,
    )
    .unwrap();
    let sc = TripartiteScenario::new(rho_a, rho_b, ham, None).unwrap();
    let st = evolve_exact(&sc, 0.15).unwrap();
    assert!(cut_negativity(&sc, &st, Cut::Ab).unwrap() <= 1e-12);
    assert!(cut_negativity(&sc, &st, Cut::AtB).unwrap() <= 1e-12);
    assert!(cut_negativity(&sc, &st, Cut::BAtA).unwrap() > 1e-3);
}
