//! Second-order onset machinery: generic eigenvalue perturbation, the
//! second-order operators behind negativity susceptibility, transmissibility
//! and vulnerability, covariance functionals, and the onset coefficient for
//! the one-versus-rest bath cut.

use num_complex::Complex64 as C64;

use crate::dynamics::{
    cut_negativity, Bipartition, Cut, EigenFrame, Propagator, Trajectory, TripartiteScenario,
};
use crate::error::{Error, Result};
use crate::negativity::{pure_negativity, NEG_EIG_TOL};
use crate::qmat::{self, dagger, herm_eig, kron, symmetrize, CMat};
use crate::states::{self, split_spectrum, DensityMatrix, INV_GUARD};

/// Minimum spectral gap for the non-degenerate formulas.
pub const GAP_TOL: f64 = 1e-8;

/// Below this norm the first-order reduction operator counts as zero and the
/// fast degenerate path applies.
pub const LAMBDA1_TOL: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Eigenvalue perturbation
// ---------------------------------------------------------------------------

/// A Hermitian family H(t) = H0 + t H1 + t^2 H2.
#[derive(Debug, Clone)]
pub struct EigPerturbInput {
    pub h0: CMat,
    pub h1: CMat,
    pub h2: CMat,
}

impl EigPerturbInput {
    pub fn new(h0: CMat, h1: CMat, h2: CMat) -> Result<Self> {
        let d = h0.nrows();
        for (m, name) in [(&h0, "H0"), (&h1, "H1"), (&h2, "H2")] {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::Shape(format!("{name} must be {d}x{d}")));
            }
            let dev = qmat::herm_deviation(m);
            if dev > qmat::HERM_TOL {
                return Err(Error::NotHermitian {
                    dev,
                    tol: qmat::HERM_TOL,
                });
            }
        }
        Ok(Self { h0, h1, h2 })
    }

    pub fn at(&self, t: f64) -> CMat {
        &self.h0 + &self.h1.mapv(|z| z * t) + &self.h2.mapv(|z| z * (t * t))
    }
}

/// Eigenvalue expansion E(t) ~ e0 + e1 t + e2 t^2.
#[derive(Debug, Clone, Copy)]
pub struct EigOrders {
    pub e0: f64,
    pub e1: f64,
    pub e2: f64,
}

impl EigOrders {
    pub fn at(&self, t: f64) -> f64 {
        self.e0 + self.e1 * t + self.e2 * t * t
    }
}

/// First and second eigenvalue corrections for a simple spectrum:
/// e1 = <i|H1|i>, e2 = <i|H2|i> + sum_{q != i} |H1_iq|^2 / (e_i - e_q).
pub fn eig_perturb_nondegenerate(inp: &EigPerturbInput) -> Result<Vec<EigOrders>> {
    let eig = herm_eig(&inp.h0)?;
    let e = &eig.eigenvalues;
    let d = e.len();
    for w in e.as_slice().unwrap().windows(2) {
        let gap = w[1] - w[0];
        if gap <= GAP_TOL {
            return Err(Error::SpectrumGap { gap, tol: GAP_TOL });
        }
    }
    let v = &eig.eigenvectors;
    let h1e = dagger(v).dot(&inp.h1).dot(v);
    let h2e = dagger(v).dot(&inp.h2).dot(v);
    let mut out = Vec::with_capacity(d);
    for i in 0..d {
        let e1 = h1e[(i, i)].re;
        let mut e2 = h2e[(i, i)].re;
        for q in 0..d {
            if q != i {
                e2 += h1e[(i, q)].norm_sqr() / (e[i] - e[q]);
            }
        }
        out.push(EigOrders { e0: e[i], e1, e2 });
    }
    Ok(out)
}

fn orthonormal_range(projector: &CMat) -> Result<CMat> {
    let dev = qmat::herm_deviation(projector);
    if dev > 1e-10 {
        return Err(Error::Domain(format!(
            "eigenspace projector not Hermitian (deviation {dev:.3e})"
        )));
    }
    let p2 = projector.dot(projector);
    let idem = qmat::max_abs_diff(&p2, projector);
    if idem > 1e-10 {
        return Err(Error::Domain(format!(
            "eigenspace projector not idempotent (deviation {idem:.3e})"
        )));
    }
    let eig = herm_eig(projector)?;
    let cols: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&k| eig.eigenvalues[k] > 0.5)
        .collect();
    if cols.is_empty() {
        return Err(Error::Domain("eigenspace projector has rank zero".into()));
    }
    let d = projector.nrows();
    let mut q = CMat::zeros((d, cols.len()));
    for (slot, &k) in cols.iter().enumerate() {
        for r in 0..d {
            q[(r, slot)] = eig.eigenvectors[(r, k)];
        }
    }
    Ok(q)
}

/// Second-order corrections inside one degenerate eigenspace of H0.
///
/// With the first-order reduction Lambda1 = P H1 P vanishing on the
/// eigenspace, the corrections are the eigenvalues of
/// [H1 M H1 + H2] restricted there, with M the reduced resolvent over the
/// complementary spectrum. A nonzero Lambda1 triggers the nested reduction:
/// split the eigenspace by the first-order corrections, then restrict the
/// same second-order operator to each nested subspace.
pub fn eig_perturb_degenerate(inp: &EigPerturbInput, projector: &CMat) -> Result<Vec<EigOrders>> {
    let q = orthonormal_range(projector)?;
    let rank = q.ncols();
    let e0 = qmat::trace(&projector.dot(&inp.h0)).re / rank as f64;

    let eig0 = herm_eig(&inp.h0)?;
    let d = inp.h0.nrows();
    // reduced resolvent over eigenvectors outside the degenerate group
    let mut m = CMat::zeros((d, d));
    for u in 0..d {
        let eu = eig0.eigenvalues[u];
        if (eu - e0).abs() > GAP_TOL {
            let col = eig0.eigenvectors.column(u);
            let w = 1.0 / (e0 - eu);
            for x in 0..d {
                for y in 0..d {
                    m[(x, y)] += col[x] * col[y].conj() * w;
                }
            }
        }
    }
    let k = inp.h1.dot(&m).dot(&inp.h1) + &inp.h2;

    let lambda1 = dagger(&q).dot(&inp.h1).dot(&q);
    if qmat::fro_norm(&lambda1) <= LAMBDA1_TOL {
        let lambda2 = dagger(&q).dot(&k).dot(&q);
        let eig2 = herm_eig(&symmetrize(&lambda2))?;
        return Ok(eig2
            .eigenvalues
            .iter()
            .map(|&e2| EigOrders { e0, e1: 0.0, e2 })
            .collect());
    }

    // nested reduction: group eigenvalues of Lambda1 and restrict the
    // second-order operator to each first-order eigenspace
    let eig1 = herm_eig(&symmetrize(&lambda1))?;
    let basis = q.dot(&eig1.eigenvectors); // columns: nested basis in the full space
    let mut out = Vec::with_capacity(rank);
    let mut start = 0;
    while start < rank {
        let mut stop = start + 1;
        while stop < rank && eig1.eigenvalues[stop] - eig1.eigenvalues[stop - 1] <= GAP_TOL {
            stop += 1;
        }
        let e1 = (start..stop).map(|k| eig1.eigenvalues[k]).sum::<f64>() / (stop - start) as f64;
        let g = stop - start;
        let mut qj = CMat::zeros((d, g));
        for (slot, col) in (start..stop).enumerate() {
            for r in 0..d {
                qj[(r, slot)] = basis[(r, col)];
            }
        }
        let lambda2 = dagger(&qj).dot(&k).dot(&qj);
        let eig2 = herm_eig(&symmetrize(&lambda2))?;
        for &e2 in eig2.eigenvalues.iter() {
            out.push(EigOrders { e0, e1, e2 });
        }
        start = stop;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Second-order operators
// ---------------------------------------------------------------------------

/// Sum of negative eigenvalues (in absolute value) of a Hermitian operator,
/// with eigenvalues inside the round-off band treated as zero. The trace-norm
/// form (Tr|F| - Tr F)/2 is cross-checked in debug builds.
pub fn negative_part_sum(f: &CMat) -> Result<f64> {
    if f.nrows() == 0 {
        return Ok(0.0);
    }
    let eig = herm_eig(&symmetrize(f))?;
    let s: f64 = eig
        .eigenvalues
        .iter()
        .filter(|&&e| e < -NEG_EIG_TOL)
        .map(|&e| -e)
        .sum();
    #[cfg(debug_assertions)]
    {
        let abs_sum: f64 = eig.eigenvalues.iter().map(|e| e.abs()).sum();
        let tr: f64 = eig.eigenvalues.iter().sum();
        debug_assert!(
            (s - 0.5 * (abs_sum - tr)).abs() <= 1e-9,
            "negative-part routes disagree"
        );
    }
    Ok(s)
}

/// F_left^{pq} = (L^q rho L^p - rho L^p rho^{-1} L^q rho)^*, with everything
/// expressed in the eigenbasis of the full-rank left state.
fn left_block(lam_l: &[f64], lp: &CMat, lq: &CMat) -> CMat {
    let d = lam_l.len();
    let mut dl = CMat::zeros((d, d));
    let mut dl_inv = CMat::zeros((d, d));
    for i in 0..d {
        dl[(i, i)] = C64::new(lam_l[i], 0.0);
        dl_inv[(i, i)] = C64::new(1.0 / lam_l[i], 0.0);
    }
    let first = lq.dot(&dl).dot(lp);
    let second = dl.dot(lp).dot(&dl_inv).dot(lq).dot(&dl);
    (first - second).mapv(|z| z.conj())
}

/// F_right^{pq} = P_D R^p rho R^q P_D restricted to the zero subspace, with
/// the state summed over its nonzero branch only.
fn right_block(lam_r: &[f64], n_r: usize, rp: &CMat, rq: &CMat) -> CMat {
    let d = lam_r.len();
    let dd = d - n_r;
    let mut out = CMat::zeros((dd, dd));
    for j in 0..dd {
        for l in 0..dd {
            let mut s = C64::new(0.0, 0.0);
            for t in 0..n_r {
                s += rp[(n_r + j, t)] * lam_r[t] * rq[(t, n_r + l)];
            }
            out[(j, l)] = s;
        }
    }
    out
}

/// Restriction of the first-order partial-transpose expansion of a product
/// state to the (left full space) x (right zero subspace): the first-order
/// reduction operator whose spectrum gives the first negativity coefficient.
fn lambda1_product(lam_l: &[f64], l_ops: &[CMat], lam_r: &[f64], n_r: usize, r_ops: &[CMat]) -> CMat {
    let dl = lam_l.len();
    let dr = lam_r.len();
    let dd = dr - n_r;
    let dim = dl * dd;
    let mut out = CMat::zeros((dim, dim));
    let i = C64::i();
    for (lp, rp) in l_ops.iter().zip(r_ops.iter()) {
        for a in 0..dl {
            for b in 0..dl {
                for j in 0..dd {
                    for l in 0..dd
                    {
                        let (jj, ll) = (n_r + j, n_r + l);
                        out[(a * dd + j, b * dd + l)] += i
                            * lp[(b, a)]
                            * rp[(jj, ll)]
                            * (lam_l[b] * lam_r[jj] - lam_l[a] * lam_r[ll]);
                    }
                }
            }
        }
    }
    out
}

fn negative_eigensum(lambda1: &CMat) -> Result<f64> {
    negative_part_sum(lambda1)
}

/// The second-order operators of the onset expansion. `f_ab` and `f_atb` live
/// on the zero-subspace-restricted product space in the eigenbasis frame and
/// are empty when the bath state is full rank.
#[derive(Debug, Clone)]
pub struct FOperators {
    pub f_ab: CMat,
    pub f_atb: CMat,
    pub f_a_blocks: Vec<Vec<CMat>>,
    pub f_b_blocks: Vec<Vec<CMat>>,
    pub f_at_blocks: Vec<Vec<CMat>>,
    /// R_A[i,j] = alpha_i alpha_j in the Schmidt frame.
    pub r_a: CMat,
    /// Rank of the zero subspace of rho_B.
    pub n_zero_b: usize,
}

/// F_at^{pq} in the coordinate frame of the Schmidt bases: the commutator
/// [A^q, A^p] times R_A entrywise.
fn at_block(alpha: &[f64], ap: &CMat, aq: &CMat) -> CMat {
    let comm = aq.dot(ap) - ap.dot(aq);
    let d = alpha.len();
    let mut out = CMat::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            out[(i, j)] = comm[(i, j)] * (alpha[i] * alpha[j]);
        }
    }
    out
}

/// Same block through the conjugated matrix form; kept as the cross-check
/// route for the elementwise-product expression.
pub fn at_block_matrix_form(alpha: &[f64], ap: &CMat, aq: &CMat) -> CMat {
    let comm = ap.dot(aq) - aq.dot(ap);
    let d = alpha.len();
    let mut out = CMat::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            out[(i, j)] = (comm[(j, i)] * (alpha[i] * alpha[j])).conj();
        }
    }
    out
}

/// Assemble every F-operator of a scenario. Requires an invertible system
/// state; when the bath state is full rank the operators are empty and the
/// second-order coefficients for the system-bath and ancilla-bath cuts are
/// not defined (negativity there vanishes for a finite time instead).
pub fn f_operators(sc: &TripartiteScenario) -> Result<FOperators> {
    let frame = EigenFrame::build(sc)?;
    if let Some(&l) = frame.lam_a.iter().find(|&&l| l < INV_GUARD) {
        return Err(Error::Domain(format!(
            "near-singular system state (eigenvalue {l:.3e} < {INV_GUARD:.1e}); \
             second-order formulas unreliable"
        )));
    }
    let np = frame.a_ops.len();
    let da = frame.lam_a.len();
    let n_b = frame.n_b;
    let dd = frame.lam_b.len() - n_b;
    let mut r_a = CMat::zeros((da, da));
    for i in 0..da {
        for j in 0..da {
            r_a[(i, j)] = C64::new(frame.alpha[i] * frame.alpha[j], 0.0);
        }
    }
    let mut f_a_blocks = vec![vec![CMat::zeros((0, 0)); np]; np];
    let mut f_b_blocks = vec![vec![CMat::zeros((0, 0)); np]; np];
    let mut f_at_blocks = vec![vec![CMat::zeros((0, 0)); np]; np];
    let mut f_ab = CMat::zeros((da * dd, da * dd));
    let mut f_atb = CMat::zeros((da * dd, da * dd));
    for p in 0..np {
        for q in 0..np {
            let fa = left_block(&frame.lam_a, &frame.a_ops[p], &frame.a_ops[q]);
            let fb = right_block(&frame.lam_b, n_b, &frame.b_ops[p], &frame.b_ops[q]);
            let fat = at_block(&frame.alpha, &frame.a_ops[p], &frame.a_ops[q]);
            debug_assert!(
                qmat::max_abs_diff(
                    &fat,
                    &at_block_matrix_form(&frame.alpha, &frame.a_ops[p], &frame.a_ops[q])
                ) <= 1e-10,
                "ancilla block routes disagree"
            );
            if dd > 0 {
                f_ab = f_ab + kron(&fa, &fb);
                f_atb = f_atb + kron(&fat, &fb);
            }
            f_a_blocks[p][q] = fa;
            f_b_blocks[p][q] = fb;
            f_at_blocks[p][q] = fat;
        }
    }
    Ok(FOperators {
        f_ab,
        f_atb,
        f_a_blocks,
        f_b_blocks,
        f_at_blocks,
        r_a,
        n_zero_b: dd,
    })
}

/// Which closed-form route produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormulaPath {
    Susceptibility,
    Transmissibility,
    Vulnerability,
}

/// Onset expansion of one cut's negativity: N(t) ~ n0 + n1 t + n2 t^2.
#[derive(Debug, Clone)]
pub struct PerturbationReport {
    pub bipartition: Bipartition,
    pub n0: f64,
    pub n1: f64,
    pub n2: f64,
    pub formula_path: FormulaPath,
    pub f_ops: Option<FOperators>,
}

fn require_zero_subspace(sc: &TripartiteScenario) -> Result<()> {
    let split = sc.split_b()?;
    if split.n_zero() == 0 {
        return Err(Error::Regime(
            "bath state has no zero eigenvalues (finite-time vanishing regime); \
             the second-order onset coefficient is not applicable"
                .into(),
        ));
    }
    Ok(())
}

/// Negativity susceptibility: the second-order onset coefficient for the
/// system-bath cut. Needs a rank-deficient bath state and invertible system
/// state.
pub fn susceptibility(sc: &TripartiteScenario) -> Result<PerturbationReport> {
    require_zero_subspace(sc)?;
    let fops = f_operators(sc)?;
    let frame = EigenFrame::build(sc)?;
    let n2 = negative_part_sum(&fops.f_ab)?;
    let lambda1 = lambda1_product(
        &frame.lam_a,
        &frame.a_ops,
        &frame.lam_b,
        frame.n_b,
        &frame.b_ops,
    );
    let n1 = negative_eigensum(&lambda1)?;
    Ok(PerturbationReport {
        bipartition: Bipartition::Ab,
        n0: 0.0,
        n1,
        n2,
        formula_path: FormulaPath::Susceptibility,
        f_ops: Some(fops),
    })
}

/// Negativity transmissibility: the second-order onset coefficient for the
/// ancilla-bath cut; the rate at which ancilla entanglement reaches the bath.
pub fn transmissibility(sc: &TripartiteScenario) -> Result<PerturbationReport> {
    require_zero_subspace(sc)?;
    let fops = f_operators(sc)?;
    let frame = EigenFrame::build(sc)?;
    let n2 = negative_part_sum(&fops.f_atb)?;
    // first-order restriction for the ancilla-bath cut
    let da = frame.lam_a.len();
    let dr = frame.lam_b.len();
    let dd = dr - frame.n_b;
    let mut lambda1 = CMat::zeros((da * dd, da * dd));
    let i = C64::i();
    for (ap, bp) in frame.a_ops.iter().zip(frame.b_ops.iter()) {
        for x in 0..da {
            for y in 0..da {
                for j in 0..dd {
                    for l in 0..dd {
                        let (jj, ll) = (frame.n_b + j, frame.n_b + l);
                        lambda1[(x * dd + j, y * dd + l)] += i
                            * (frame.alpha[x] * frame.alpha[y])
                            * ap[(x, y)]
                            * bp[(jj, ll)]
                            * (frame.lam_b[jj] - frame.lam_b[ll]);
                    }
                }
            }
        }
    }
    let n1 = negative_eigensum(&lambda1)?;
    Ok(PerturbationReport {
        bipartition: Bipartition::AtB,
        n0: 0.0,
        n1,
        n2,
        formula_path: FormulaPath::Transmissibility,
        f_ops: Some(fops),
    })
}

/// Unsymmetrized covariance Tr[bp rho bq] - Tr[bp rho] Tr[bq rho].
pub fn ucov(bp: &CMat, bq: &CMat, rho: &DensityMatrix) -> C64 {
    let r = rho.mat();
    qmat::trace(&bp.dot(r).dot(bq)) - qmat::trace(&bp.dot(r)) * qmat::trace(&bq.dot(r))
}

/// Symmetrized covariance; real for Hermitian observables.
pub fn cov(bp: &CMat, bq: &CMat, rho: &DensityMatrix) -> f64 {
    let c = 0.5 * (ucov(bp, bq, rho) + ucov(bq, bp, rho));
    debug_assert!(c.im.abs() < 1e-10, "covariance came out complex: {c}");
    c.re
}

/// Variance of an observable.
pub fn variance(a: &CMat, rho: &DensityMatrix) -> f64 {
    let r = rho.mat();
    let m2 = qmat::trace(&a.dot(a).dot(r)).re;
    let m1 = qmat::trace(&a.dot(r)).re;
    m2 - m1 * m1
}

/// Amplitude-based variance G = Tr[sqrt(rho)] Tr[A sqrt(rho) A]
/// - Tr[sqrt(rho) A]^2; bounds the ordinary variance from above.
pub fn amplitude_variance_ga(a: &CMat, rho: &DensityMatrix) -> Result<f64> {
    let s = rho.sqrt()?;
    let g = qmat::trace(&s) * qmat::trace(&a.dot(&s).dot(a)) - {
        let t = qmat::trace(&s.dot(a));
        t * t
    };
    debug_assert!(g.im.abs() < 1e-9, "G came out complex: {g}");
    Ok(g.re)
}

/// 2-fragility -Tr[[A, rho]^2]/2: the proclivity to lose purity at onset.
pub fn fragility_2(a: &CMat, rho: &DensityMatrix) -> f64 {
    let comm = a.dot(rho.mat()) - rho.mat().dot(a);
    -0.5 * qmat::trace(&comm.dot(&comm)).re
}

/// Second time derivative of the n-Renyi entropy at onset when both sides of
/// the cut start pure under a single product term: 4 var_a var_b / (n - 1).
pub fn renyi_second_derivative(var_a: f64, var_b: f64, n: f64) -> Result<f64> {
    if n <= 1.0 {
        return Err(Error::Domain(format!(
            "Renyi order must exceed 1 (got {n}); the denominator vanishes"
        )));
    }
    if var_a < -1e-12 || var_b < -1e-12 {
        return Err(Error::Domain("variances must be non-negative".into()));
    }
    Ok(4.0 * var_a.max(0.0) * var_b.max(0.0) / (n - 1.0))
}

/// Negativity vulnerability: the second-order onset coefficient for the
/// ancilla-system cut. Applies for any bath state; generically negative,
/// quantifying entanglement loss from the initially pure pair.
pub fn vulnerability(sc: &TripartiteScenario) -> Result<PerturbationReport> {
    let rho_a = sc.rho_a();
    let eig = rho_a.eig()?;
    if eig.eigenvalues.iter().any(|&l| l < INV_GUARD) {
        return Err(Error::Domain(format!(
            "near-singular system state (min eigenvalue < {INV_GUARD:.1e}); \
             second-order formulas unreliable"
        )));
    }
    let sqrt_a = rho_a.sqrt()?;
    let tr_sqrt = qmat::trace(&sqrt_a);
    let pairs = sc.ham().absorbed();
    let rho_b = sc.rho_b();
    let mut v = C64::new(0.0, 0.0);
    for (ap, bp) in &pairs {
        for (aq, bq) in &pairs {
            let u = ucov(bp, bq, rho_b);
            let g = tr_sqrt * qmat::trace(&ap.dot(&sqrt_a).dot(aq))
                - qmat::trace(&sqrt_a.dot(ap)) * qmat::trace(&sqrt_a.dot(aq));
            v += u * g;
        }
    }
    v *= -0.5;
    if v.im.abs() > 1e-10 {
        return Err(Error::Domain(format!(
            "vulnerability sum failed to close to a real number (imag {:.3e})",
            v.im
        )));
    }

    // honest first-order coefficient from the diagonal expectations of the
    // first-order partial-transpose expansion in the Schmidt frame
    let frame = EigenFrame::build(sc)?;
    let da = frame.lam_a.len();
    let mut m1 = CMat::zeros((da * da, da * da));
    let i = C64::i();
    for (p, ap) in frame.a_ops.iter().enumerate() {
        let trb = frame.trace_b_rho(p);
        for ia in 0..da {
            for j in 0..da {
                for k in 0..da {
                    for l in 0..da {
                        let mut s = C64::new(0.0, 0.0);
                        if j == k {
                            s += ap[(ia, l)];
                        }
                        if ia == l {
                            s -= ap[(k, j)];
                        }
                        m1[(ia * da + k, j * da + l)] +=
                            i * trb * (frame.alpha[ia] * frame.alpha[j]) * s;
                    }
                }
            }
        }
    }
    let mut n1 = 0.0;
    for u in 0..da {
        for w in (u + 1)..da {
            let a = u * da + w;
            let b = w * da + u;
            let lam1 =
                0.5 * (m1[(a, a)] - m1[(a, b)] - m1[(b, a)] + m1[(b, b)]).re;
            n1 -= lam1;
        }
    }

    Ok(PerturbationReport {
        bipartition: Bipartition::AtA,
        n0: pure_negativity(&sc.schmidt().coeffs),
        n1,
        n2: v.re,
        formula_path: FormulaPath::Vulnerability,
        f_ops: None,
    })
}

// ---------------------------------------------------------------------------
// Finite-difference oracles on the exact evolution
// ---------------------------------------------------------------------------

fn cut_negativity_at(sc: &TripartiteScenario, prop: &Propagator, cut: Cut, t: f64) -> Result<f64> {
    let st = prop.states_at(sc, t)?;
    cut_negativity(sc, &st, cut)
}

/// Richardson-extrapolated first derivative of a cut's negativity at t = 0,
/// from one-sided differences at t0, t0/2, t0/4.
pub fn negativity_fd1(sc: &TripartiteScenario, cut: Cut, t0: f64) -> Result<f64> {
    let prop = Propagator::new(sc)?;
    let n0 = cut_negativity_at(sc, &prop, cut, 0.0)?;
    let f = |t: f64| -> Result<f64> { Ok((cut_negativity_at(sc, &prop, cut, t)? - n0) / t) };
    let f1 = f(t0)?;
    let f2 = f(t0 / 2.0)?;
    let f3 = f(t0 / 4.0)?;
    let r1 = 2.0 * f2 - f1;
    let r2 = 2.0 * f3 - f2;
    Ok((4.0 * r2 - r1) / 3.0)
}

/// Richardson-extrapolated second derivative of a cut's negativity at t = 0.
/// The first derivative is taken as zero, which holds for every cut here.
pub fn negativity_fd2(sc: &TripartiteScenario, cut: Cut, t0: f64) -> Result<f64> {
    let prop = Propagator::new(sc)?;
    let n0 = cut_negativity_at(sc, &prop, cut, 0.0)?;
    let f = |t: f64| -> Result<f64> {
        Ok(2.0 * (cut_negativity_at(sc, &prop, cut, t)? - n0) / (t * t))
    };
    let f1 = f(t0)?;
    let f2 = f(t0 / 2.0)?;
    let f3 = f(t0 / 4.0)?;
    let r1 = 2.0 * f2 - f1;
    let r2 = 2.0 * f3 - f2;
    Ok((4.0 * r2 - r1) / 3.0)
}

// ---------------------------------------------------------------------------
// Delocalization diagnostics
// ---------------------------------------------------------------------------

/// Second-order onset information for the bath-versus-rest cut.
#[derive(Debug, Clone)]
pub enum BathRestOnset {
    /// Full-rank bath state: the role-swapped second-order coefficient.
    Coefficient(f64),
    /// Rank-deficient pure bath under a single product term: the Renyi
    /// second derivative stands in for the negativity coefficient.
    RenyiSecondDerivative { value: f64, order: f64 },
    /// No formula covers this input.
    Undefined(String),
}

/// Negativities of all five cuts over a time grid plus the onset coefficient
/// for the bath-versus-rest cut.
#[derive(Debug, Clone)]
pub struct DelocalizationReport {
    pub trajectory: Trajectory,
    pub bath_rest_onset: BathRestOnset,
}

/// Role-swapped second-order coefficient for the bath-versus-rest cut:
/// the susceptibility construction with the bath as the transposed full-rank
/// side and the pure pair supplying the zero subspace (its projector
/// complement).
pub fn bath_rest_second_order(sc: &TripartiteScenario) -> Result<f64> {
    let da = sc.dim_a();
    let rho_b = sc.rho_b();
    let eig_b = rho_b.eig()?;
    if eig_b.eigenvalues.iter().any(|&l| l < INV_GUARD) {
        return Err(Error::Regime(
            "bath state is not safely invertible; the role-swapped coefficient needs a \
             full-rank bath"
                .into(),
        ));
    }
    // left side: bath state, descending eigenbasis
    let mut order: Vec<usize> = (0..rho_b.dim()).collect();
    order.sort_by(|&x, &y| eig_b.eigenvalues[y].partial_cmp(&eig_b.eigenvalues[x]).unwrap());
    let db = rho_b.dim();
    let mut v_l = CMat::zeros((db, db));
    let mut lam_l = Vec::with_capacity(db);
    for (slot, &idx) in order.iter().enumerate() {
        lam_l.push(eig_b.eigenvalues[idx]);
        for r in 0..db {
            v_l[(r, slot)] = eig_b.eigenvectors[(r, idx)];
        }
    }
    // right side: the pure pair state, zero subspace = projector complement
    let rho_pair = states::trusted_density(sc.schmidt().projector());
    let split_r = split_spectrum(&rho_pair, sc.zero_tol())?;
    let n_r = split_r.n_nonzero;
    let dd = split_r.dim() - n_r;
    if dd == 0 {
        return Err(Error::Regime("pair state has no zero subspace".into()));
    }
    let pairs = sc.ham().absorbed();
    let mut l_ops = Vec::with_capacity(pairs.len());
    let mut r_ops = Vec::with_capacity(pairs.len());
    for (a, b) in &pairs {
        l_ops.push(dagger(&v_l).dot(b).dot(&v_l));
        let big = kron(&qmat::identity(da), a);
        r_ops.push(dagger(&split_r.basis).dot(&big).dot(&split_r.basis));
    }
    let dim = db * dd;
    let mut f = CMat::zeros((dim, dim));
    for p in 0..pairs.len() {
        for q in 0..pairs.len() {
            let fl = left_block(&lam_l, &l_ops[p], &l_ops[q]);
            let fr = right_block(&split_r.eigenvalues, n_r, &r_ops[p], &r_ops[q]);
            f = f + kron(&fl, &fr);
        }
    }
    negative_part_sum(&f)
}

/// Per-time negativities for every cut plus the bath-versus-rest onset
/// coefficient, routed by the rank structure of the bath state.
pub fn delocalization_report(sc: &TripartiteScenario, t_grid: &[f64]) -> Result<DelocalizationReport> {
    let traj = crate::dynamics::trajectory(sc, t_grid)?;
    let split = sc.split_b()?;
    let bath_rest_onset = if split.n_zero() == 0 {
        match bath_rest_second_order(sc) {
            Ok(c) => BathRestOnset::Coefficient(c),
            Err(e) => BathRestOnset::Undefined(e.to_string()),
        }
    } else if split.n_nonzero == 1 && sc.ham().interaction().len() == 1 {
        // pure bath, single product term: both sides of the cut are pure,
        // so the Renyi second derivative is the defined onset quantity
        let (a_op, b_op) = &sc.ham().interaction()[0];
        let var_b = variance(b_op, sc.rho_b());
        let rho_pair = states::trusted_density(sc.schmidt().projector());
        let big_a = kron(&qmat::identity(sc.dim_a()), a_op);
        let var_pair = variance(&big_a, &rho_pair);
        let order = 2.0;
        let value = renyi_second_derivative(var_pair, var_b, order)?;
        BathRestOnset::RenyiSecondDerivative { value, order }
    } else {
        BathRestOnset::Undefined(
            "rank-deficient bath with a multi-term interaction: no closed-form onset \
             coefficient is available for the bath-versus-rest cut"
                .into(),
        )
    };
    Ok(DelocalizationReport {
        trajectory: traj,
        bath_rest_onset,
    })
}
