//! Tripartite scenario: the total Hamiltonian on the ancilla/system/bath
//! product space, exact unitary evolution with reduced states, perturbative
//! density matrices to second order, and time-sampled trajectories.
//!
//! Space ordering is At (x) A (x) B throughout; composite index
//! (x*d_a + k)*d_b + u.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::negativity::negativity;
use crate::qmat::{
    self, dagger, herm_deviation, herm_eig, identity, kron, partial_trace, BipartiteShape, CMat,
    Factor, HermitianEigensystem, HERM_TOL,
};
use crate::states::{
    self, split_spectrum, DensityMatrix, SchmidtPair, SpectrumSplit, ZERO_TOL_DEFAULT,
};

/// Smallest admissible Schmidt coefficient of the purified pair; keeps the
/// system state safely invertible for the second-order formulas.
pub const MIN_ALPHA: f64 = 1e-6;

/// The two-party reduced states of the tripartite system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bipartition {
    /// A ; B
    Ab,
    /// At ; B
    AtB,
    /// At ; A
    AtA,
}

impl Bipartition {
    pub fn label(&self) -> &'static str {
        match self {
            Bipartition::Ab => "A;B",
            Bipartition::AtB => "At;B",
            Bipartition::AtA => "At;A",
        }
    }
}

/// Every cut whose negativity the trajectory reports, including the two
/// one-versus-rest splits of the full tripartite state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cut {
    Ab,
    AtB,
    AtA,
    /// At ; AB
    AtAb,
    /// B ; AtA
    BAtA,
}

/// H_tot = C (x) I + sum_p A^p (x) B^p + I (x) D on A (x) B, plus an optional
/// free part E on the ancilla.
#[derive(Debug, Clone)]
pub struct TotalHamiltonian {
    dim_a: usize,
    dim_b: usize,
    interaction: Vec<(CMat, CMat)>,
    free_c: Option<CMat>,
    free_d: Option<CMat>,
    free_e: Option<CMat>,
}

fn check_block(m: &CMat, dim: usize, name: &str) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::Shape(format!(
            "{name} is {}x{}, expected {dim}x{dim}",
            m.nrows(),
            m.ncols()
        )));
    }
    let dev = herm_deviation(m);
    if dev > HERM_TOL {
        return Err(Error::NotHermitian { dev, tol: HERM_TOL });
    }
    Ok(())
}

impl TotalHamiltonian {
    pub fn new(
        dim_a: usize,
        dim_b: usize,
        interaction: Vec<(CMat, CMat)>,
        free_c: Option<CMat>,
        free_d: Option<CMat>,
        free_e: Option<CMat>,
    ) -> Result<Self> {
        for (i, (a, b)) in interaction.iter().enumerate() {
            check_block(a, dim_a, &format!("interaction A[{i}]"))?;
            check_block(b, dim_b, &format!("interaction B[{i}]"))?;
        }
        if let Some(c) = &free_c {
            check_block(c, dim_a, "free C")?;
        }
        if let Some(d) = &free_d {
            check_block(d, dim_b, "free D")?;
        }
        if let Some(e) = &free_e {
            check_block(e, dim_a, "free E")?;
        }
        Ok(Self {
            dim_a,
            dim_b,
            interaction,
            free_c,
            free_d,
            free_e,
        })
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn interaction(&self) -> &[(CMat, CMat)] {
        &self.interaction
    }

    pub fn free_c(&self) -> Option<&CMat> {
        self.free_c.as_ref()
    }

    pub fn free_d(&self) -> Option<&CMat> {
        self.free_d.as_ref()
    }

    pub fn free_e(&self) -> Option<&CMat> {
        self.free_e.as_ref()
    }

    /// The pair list with the free parts absorbed as (C, I) and (I, D); this
    /// is the form every second-order formula consumes.
    pub fn absorbed(&self) -> Vec<(CMat, CMat)> {
        let mut pairs = Vec::with_capacity(self.interaction.len() + 2);
        if let Some(c) = &self.free_c {
            pairs.push((c.clone(), identity(self.dim_b)));
        }
        pairs.extend(self.interaction.iter().cloned());
        if let Some(d) = &self.free_d {
            pairs.push((identity(self.dim_a), d.clone()));
        }
        pairs
    }

    /// H_tot as a matrix on A (x) B.
    pub fn h_tot(&self) -> CMat {
        let d = self.dim_a * self.dim_b;
        let mut h = CMat::zeros((d, d));
        for (a, b) in self.absorbed() {
            h = h + kron(&a, &b);
        }
        h
    }

    /// H_tri = E (x) I (x) I + I (x) H_tot on At (x) A (x) B.
    pub fn h_tri(&self) -> CMat {
        let mut h = kron(&identity(self.dim_a), &self.h_tot());
        if let Some(e) = &self.free_e {
            h = h + kron(e, &identity(self.dim_a * self.dim_b));
        }
        h
    }
}

/// Initial data of the onset problem: the purified pair, the bath state, and
/// the Hamiltonian. Immutable once built.
#[derive(Debug, Clone)]
pub struct TripartiteScenario {
    schmidt: SchmidtPair,
    rho_b: DensityMatrix,
    ham: TotalHamiltonian,
    zero_tol: f64,
}

impl TripartiteScenario {
    pub fn new(
        rho_a: DensityMatrix,
        rho_b: DensityMatrix,
        ham: TotalHamiltonian,
        zero_tol: Option<f64>,
    ) -> Result<Self> {
        if ham.dim_a() != rho_a.dim() || ham.dim_b() != rho_b.dim() {
            return Err(Error::Shape(format!(
                "Hamiltonian dims ({}, {}) do not match states ({}, {})",
                ham.dim_a(),
                ham.dim_b(),
                rho_a.dim(),
                rho_b.dim()
            )));
        }
        let schmidt = states::purify(&rho_a)?;
        if let Some(&a) = schmidt.coeffs.iter().find(|&&a| a < MIN_ALPHA) {
            return Err(Error::Domain(format!(
                "system state is singular: Schmidt coefficient {a:.3e} < {MIN_ALPHA:.1e}"
            )));
        }
        Ok(Self {
            schmidt,
            rho_b,
            ham,
            zero_tol: zero_tol.unwrap_or(ZERO_TOL_DEFAULT),
        })
    }

    pub fn dim_a(&self) -> usize {
        self.schmidt.dim()
    }

    pub fn dim_b(&self) -> usize {
        self.rho_b.dim()
    }

    pub fn dim_tri(&self) -> usize {
        self.dim_a() * self.dim_a() * self.dim_b()
    }

    pub fn schmidt(&self) -> &SchmidtPair {
        &self.schmidt
    }

    pub fn rho_b(&self) -> &DensityMatrix {
        &self.rho_b
    }

    pub fn ham(&self) -> &TotalHamiltonian {
        &self.ham
    }

    pub fn zero_tol(&self) -> f64 {
        self.zero_tol
    }

    pub fn rho_a(&self) -> DensityMatrix {
        states::trusted_density(self.schmidt.rho_right())
    }

    pub fn rho_at(&self) -> DensityMatrix {
        states::trusted_density(self.schmidt.rho_left())
    }

    /// rho_tri(0) = |omega><omega| (x) rho_B.
    pub fn rho_tri0(&self) -> CMat {
        kron(&self.schmidt.projector(), self.rho_b.mat())
    }

    pub fn split_b(&self) -> Result<SpectrumSplit> {
        split_spectrum(&self.rho_b, self.zero_tol)
    }
}

/// Full tripartite Hamiltonian of a scenario.
pub fn build_total(sc: &TripartiteScenario) -> CMat {
    sc.ham().h_tri()
}

/// Exact states at one time: the tripartite state and its three two-party
/// reductions.
#[derive(Debug, Clone)]
pub struct ExactStates {
    pub rho_tri: DensityMatrix,
    pub rho_ab: DensityMatrix,
    pub rho_atb: DensityMatrix,
    pub rho_ata: DensityMatrix,
}

/// Trace over the middle factor of a three-factor space.
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

fn reduce_all(sc: &TripartiteScenario, rho_tri: CMat) -> Result<ExactStates> {
    let (da, db) = (sc.dim_a(), sc.dim_b());
    let rho_ab = partial_trace(&rho_tri, BipartiteShape::new(da, da * db), Factor::First)?;
    let rho_ata = partial_trace(&rho_tri, BipartiteShape::new(da * da, db), Factor::Second)?;
    let rho_atb = trace_middle(&rho_tri, da, da, db);
    Ok(ExactStates {
        rho_tri: states::trusted_density(rho_tri),
        rho_ab: states::trusted_density(rho_ab),
        rho_atb: states::trusted_density(rho_atb),
        rho_ata: states::trusted_density(rho_ata),
    })
}

/// Reusable exact propagator: one diagonalization, many times.
pub struct Propagator {
    eig: HermitianEigensystem,
    rho0: CMat,
}

impl Propagator {
    pub fn new(sc: &TripartiteScenario) -> Result<Self> {
        Ok(Self {
            eig: herm_eig(&build_total(sc))?,
            rho0: sc.rho_tri0(),
        })
    }

    pub fn state_at(&self, t: f64) -> CMat {
        let u = self.eig.apply(|e| (-C64::i() * e * t).exp());
        u.dot(&self.rho0).dot(&dagger(&u))
    }

    /// Tripartite state at `t` together with its two-party reductions.
    pub fn states_at(&self, sc: &TripartiteScenario, t: f64) -> Result<ExactStates> {
        reduce_all(sc, self.state_at(t))
    }
}

/// rho_tri(t) = U rho_tri U^dag with all two-party reductions.
pub fn evolve_exact(sc: &TripartiteScenario, t: f64) -> Result<ExactStates> {
    let prop = Propagator::new(sc)?;
    reduce_all(sc, prop.state_at(t))
}

/// Which space a perturbative expansion lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateSpace {
    Tri,
    Bip(Bipartition),
}

/// Density matrix expanded to second order in time: rho(t) ~ order0
/// + t * order1 + t^2 * order2.
#[derive(Debug, Clone)]
pub struct PerturbedDensity {
    pub space: StateSpace,
    pub order0: CMat,
    pub order1: CMat,
    pub order2: CMat,
}

/// Second-order expansion of the full tripartite state. The ancilla's free
/// part never enters: the expansion is taken with I (x) H_tot.
pub fn perturbed_rho_tri(sc: &TripartiteScenario) -> PerturbedDensity {
    let h = kron(&identity(sc.dim_a()), &sc.ham().h_tot());
    let rho = sc.rho_tri0();
    let i = C64::i();
    let rh = rho.dot(&h);
    let hr = h.dot(&rho);
    let order1 = (&rh - &hr).mapv(|z| z * i);
    let h2 = h.dot(&h);
    let order2 = h.dot(&rho).dot(&h) - (h2.dot(&rho) + rho.dot(&h2)).mapv(|z| z * 0.5);
    PerturbedDensity {
        space: StateSpace::Tri,
        order0: rho,
        order1,
        order2,
    }
}

/// Eigenbasis data shared by the closed-form expansions and the second-order
/// operators: state spectra plus the Hamiltonian pairs re-expressed in the
/// eigenbases of the two initial states.
pub(crate) struct EigenFrame {
    pub alpha: Vec<f64>,
    pub lam_a: Vec<f64>,
    pub v_a: CMat,
    pub v_at: CMat,
    pub lam_b: Vec<f64>,
    pub v_b: CMat,
    /// Count of nonzero eigenvalues of rho_B (nonzero-first ordering).
    pub n_b: usize,
    /// Absorbed pairs in eigenbases: A ops in the rho_A frame, B ops in the
    /// rho_B frame.
    pub a_ops: Vec<CMat>,
    pub b_ops: Vec<CMat>,
}

impl EigenFrame {
    pub fn build(sc: &TripartiteScenario) -> Result<Self> {
        let split = sc.split_b()?;
        let v_a = sc.schmidt().basis_right.clone();
        let v_at = sc.schmidt().basis_left.clone();
        let alpha = sc.schmidt().coeffs.clone();
        let lam_a: Vec<f64> = alpha.iter().map(|a| a * a).collect();
        let mut a_ops = Vec::new();
        let mut b_ops = Vec::new();
        for (a, b) in sc.ham().absorbed() {
            a_ops.push(dagger(&v_a).dot(&a).dot(&v_a));
            b_ops.push(dagger(&split.basis).dot(&b).dot(&split.basis));
        }
        Ok(Self {
            alpha,
            lam_a,
            v_a,
            v_at,
            lam_b: split.eigenvalues.clone(),
            v_b: split.basis.clone(),
            n_b: split.n_nonzero,
            a_ops,
            b_ops,
        })
    }

    pub fn trace_b_rho(&self, p: usize) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for t in 0..self.lam_b.len() {
            s += self.b_ops[p][(t, t)] * self.lam_b[t];
        }
        s
    }

    pub fn trace_b_rho_b(&self, p: usize, q: usize) -> C64 {
        let db = self.lam_b.len();
        let mut s = C64::new(0.0, 0.0);
        for t in 0..db {
            for u in 0..db {
                s += self.b_ops[p][(u, t)] * self.lam_b[t] * self.b_ops[q][(t, u)];
            }
        }
        s
    }
}

fn rotate(m: &CMat, v_left: &CMat, v_right: &CMat) -> CMat {
    let w = kron(v_left, v_right);
    w.dot(m).dot(&dagger(&w))
}

/// Closed-form second-order expansion of one two-party reduction, evaluated
/// from the index expressions in the eigenbases of the initial states and
/// returned in coordinates. The partial trace of `perturbed_rho_tri` computes
/// the same matrices along an independent route and serves as the oracle.
pub fn perturbed_rho_bipartite(
    sc: &TripartiteScenario,
    which: Bipartition,
) -> Result<PerturbedDensity> {
    let f = EigenFrame::build(sc)?;
    let (da, db) = (sc.dim_a(), sc.dim_b());
    let np = f.a_ops.len();
    let i = C64::i();
    let (order0, order1, order2) = match which {
        Bipartition::Ab => {
            let dim = da * db;
            let mut o1 = CMat::zeros((dim, dim));
            let mut o2 = CMat::zeros((dim, dim));
            for p in 0..np {
                let (a, b) = (&f.a_ops[p], &f.b_ops[p]);
                for k in 0..da {
                    for l in 0..da {
                        for u in 0..db {
                            for v in 0..db {
                                o1[(k * db + u, l * db + v)] += i
                                    * a[(k, l)]
                                    * b[(u, v)]
                                    * (f.lam_a[k] * f.lam_b[u] - f.lam_a[l] * f.lam_b[v]);
                            }
                        }
                    }
                }
            }
            for p in 0..np {
                for q in 0..np {
                    let (ap, bp) = (&f.a_ops[p], &f.b_ops[p]);
                    let (aq, bq) = (&f.a_ops[q], &f.b_ops[q]);
                    for k in 0..da {
                        for l in 0..da {
                            for u in 0..db {
                                for v in 0..db {
                                    let mut s = C64::new(0.0, 0.0);
                                    for m in 0..da {
                                        for t in 0..db {
                                            s += ap[(k, m)]
                                                * aq[(m, l)]
                                                * bp[(u, t)]
                                                * bq[(t, v)]
                                                * (f.lam_a[m] * f.lam_b[t]
                                                    - 0.5 * f.lam_a[k] * f.lam_b[u]
                                                    - 0.5 * f.lam_a[l] * f.lam_b[v]);
                                        }
                                    }
                                    o2[(k * db + u, l * db + v)] += s;
                                }
                            }
                        }
                    }
                }
            }
            let o0 = kron(sc.rho_a().mat(), sc.rho_b().mat());
            (o0, rotate(&o1, &f.v_a, &f.v_b), rotate(&o2, &f.v_a, &f.v_b))
        }
        Bipartition::AtB => {
            let dim = da * db;
            let mut o1 = CMat::zeros((dim, dim));
            let mut o2 = CMat::zeros((dim, dim));
            for p in 0..np {
                let (a, b) = (&f.a_ops[p], &f.b_ops[p]);
                for ia in 0..da {
                    for j in 0..da {
                        for u in 0..db {
                            for v in 0..db {
                                o1[(ia * db + u, j * db + v)] += i
                                    * f.alpha[ia]
                                    * f.alpha[j]
                                    * a[(j, ia)]
                                    * b[(u, v)]
                                    * (f.lam_b[u] - f.lam_b[v]);
                            }
                        }
                    }
                }
            }
            for p in 0..np {
                for q in 0..np {
                    let (ap, bp) = (&f.a_ops[p], &f.b_ops[p]);
                    let (aq, bq) = (&f.a_ops[q], &f.b_ops[q]);
                    for ia in 0..da {
                        for j in 0..da {
                            for u in 0..db {
                                for v in 0..db {
                                    let mut s = C64::new(0.0, 0.0);
                                    for m in 0..da {
                                        for t in 0..db {
                                            s += f.alpha[ia]
                                                * f.alpha[j]
                                                * bp[(u, t)]
                                                * bq[(t, v)]
                                                * (ap[(m, ia)] * aq[(j, m)] * f.lam_b[t]
                                                    - 0.5
                                                        * aq[(m, ia)]
                                                        * ap[(j, m)]
                                                        * (f.lam_b[u] + f.lam_b[v]));
                                        }
                                    }
                                    o2[(ia * db + u, j * db + v)] += s;
                                }
                            }
                        }
                    }
                }
            }
            let o0 = kron(sc.rho_at().mat(), sc.rho_b().mat());
            (o0, rotate(&o1, &f.v_at, &f.v_b), rotate(&o2, &f.v_at, &f.v_b))
        }
        Bipartition::AtA => {
            let dim = da * da;
            let mut o1 = CMat::zeros((dim, dim));
            let mut o2 = CMat::zeros((dim, dim));
            for p in 0..np {
                let a = &f.a_ops[p];
                let trb = f.trace_b_rho(p);
                for ia in 0..da {
                    for j in 0..da {
                        for k in 0..da {
                            for l in 0..da {
                                let mut s = C64::new(0.0, 0.0);
                                if ia == k {
                                    s += a[(j, l)];
                                }
                                if j == l {
                                    s -= a[(k, ia)];
                                }
                                o1[(ia * da + k, j * da + l)] +=
                                    i * trb * f.alpha[ia] * f.alpha[j] * s;
                            }
                        }
                    }
                }
            }
            for p in 0..np {
                for q in 0..np {
                    let (ap, aq) = (&f.a_ops[p], &f.a_ops[q]);
                    let trbb = f.trace_b_rho_b(p, q);
                    for ia in 0..da {
                        for j in 0..da {
                            for k in 0..da {
                                for l in 0..da {
                                    let aa = f.alpha[ia] * f.alpha[j];
                                    let mut s = ap[(k, ia)] * aq[(j, l)] * aa;
                                    let mut corr = C64::new(0.0, 0.0);
                                    if ia == k {
                                        for ff in 0..da {
                                            corr += ap[(ff, l)] * aq[(j, ff)];
                                        }
                                    }
                                    if l == j {
                                        for ff in 0..da {
                                            corr += ap[(ff, ia)] * aq[(k, ff)];
                                        }
                                    }
                                    s -= corr * 0.5 * aa;
                                    o2[(ia * da + k, j * da + l)] += trbb * s;
                                }
                            }
                        }
                    }
                }
            }
            let o0 = sc.schmidt().projector();
            (o0, rotate(&o1, &f.v_at, &f.v_a), rotate(&o2, &f.v_at, &f.v_a))
        }
    };
    Ok(PerturbedDensity {
        space: StateSpace::Bip(which),
        order0,
        order1,
        order2,
    })
}

/// Negativity of one cut of the exact states.
pub fn cut_negativity(sc: &TripartiteScenario, st: &ExactStates, cut: Cut) -> Result<f64> {
    let (da, db) = (sc.dim_a(), sc.dim_b());
    let n = match cut {
        Cut::Ab => negativity(&st.rho_ab, BipartiteShape::new(da, db))?,
        Cut::AtB => negativity(&st.rho_atb, BipartiteShape::new(da, db))?,
        Cut::AtA => negativity(&st.rho_ata, BipartiteShape::new(da, da))?,
        Cut::AtAb => negativity(&st.rho_tri, BipartiteShape::new(da, da * db))?,
        Cut::BAtA => negativity(&st.rho_tri, BipartiteShape::new(da * da, db))?,
    };
    Ok(n.value)
}

/// Time-sampled negativities for all cuts plus reduced-state purities.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub neg_ab: Vec<f64>,
    pub neg_atb: Vec<f64>,
    pub neg_ata: Vec<f64>,
    pub neg_at_ab: Vec<f64>,
    pub neg_b_ata: Vec<f64>,
    pub purity_a: Vec<f64>,
    pub purity_b: Vec<f64>,
    pub purity_ab: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct TrajectoryRow {
    neg_ab: f64,
    neg_atb: f64,
    neg_ata: f64,
    neg_at_ab: f64,
    neg_b_ata: f64,
    purity_a: f64,
    purity_b: f64,
    purity_ab: f64,
}

fn row_at(sc: &TripartiteScenario, prop: &Propagator, t: f64) -> Result<TrajectoryRow> {
    let st = reduce_all(sc, prop.state_at(t))?;
    let (da, db) = (sc.dim_a(), sc.dim_b());
    let rho_a_t = partial_trace(st.rho_ab.mat(), BipartiteShape::new(da, db), Factor::Second)?;
    let rho_b_t = partial_trace(st.rho_ab.mat(), BipartiteShape::new(da, db), Factor::First)?;
    Ok(TrajectoryRow {
        neg_ab: cut_negativity(sc, &st, Cut::Ab)?,
        neg_atb: cut_negativity(sc, &st, Cut::AtB)?,
        neg_ata: cut_negativity(sc, &st, Cut::AtA)?,
        neg_at_ab: cut_negativity(sc, &st, Cut::AtAb)?,
        neg_b_ata: cut_negativity(sc, &st, Cut::BAtA)?,
        purity_a: qmat::trace(&rho_a_t.dot(&rho_a_t)).re,
        purity_b: qmat::trace(&rho_b_t.dot(&rho_b_t)).re,
        purity_ab: st.rho_ab.purity(),
    })
}

/// Evaluate the trajectory over an ascending, nonempty time grid. Per-point
/// work is independent; points run in parallel with order preserved.
pub fn trajectory(sc: &TripartiteScenario, t_grid: &[f64]) -> Result<Trajectory> {
    if t_grid.is_empty() {
        return Err(Error::Domain("time grid is empty".into()));
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("time grid must be ascending".into()));
    }
    let prop = Propagator::new(sc)?;
    let rows: Vec<Result<TrajectoryRow>> = t_grid
        .par_iter()
        .map(|&t| row_at(sc, &prop, t))
        .collect();
    let mut out = Trajectory {
        t: t_grid.to_vec(),
        neg_ab: Vec::with_capacity(t_grid.len()),
        neg_atb: Vec::with_capacity(t_grid.len()),
        neg_ata: Vec::with_capacity(t_grid.len()),
        neg_at_ab: Vec::with_capacity(t_grid.len()),
        neg_b_ata: Vec::with_capacity(t_grid.len()),
        purity_a: Vec::with_capacity(t_grid.len()),
        purity_b: Vec::with_capacity(t_grid.len()),
        purity_ab: Vec::with_capacity(t_grid.len()),
    };
    for row in rows {
        let r = row?;
        out.neg_ab.push(r.neg_ab);
        out.neg_atb.push(r.neg_atb);
        out.neg_ata.push(r.neg_ata);
        out.neg_at_ab.push(r.neg_at_ab);
        out.neg_b_ata.push(r.neg_b_ata);
        out.purity_a.push(r.purity_a);
        out.purity_b.push(r.purity_b);
        out.purity_ab.push(r.purity_ab);
    }
    Ok(out)
}

/// Evenly spaced grid helper for the CLI and tests.
pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![start];
    }
    let step = (stop - start) / (points as f64 - 1.0);
    (0..points).map(|k| start + step * k as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::approx_eq;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sigma_x() -> CMat {
        array![[c(0., 0.), c(1., 0.)], [c(1., 0.), c(0., 0.)]]
    }

    fn sigma_y() -> CMat {
        array![[c(0., 0.), c(0., -1.)], [c(0., 1.), c(0., 0.)]]
    }

    fn sigma_z() -> CMat {
        array![[c(1., 0.), c(0., 0.)], [c(0., 0.), c(-1., 0.)]]
    }

    fn qubit_scenario(pairs: Vec<(CMat, CMat)>, rho_b: DensityMatrix) -> TripartiteScenario {
        let rho_a = DensityMatrix::from_eigenvalues(&[0.8, 0.2]).unwrap();
        let ham = TotalHamiltonian::new(2, 2, pairs, None, None, None).unwrap();
        TripartiteScenario::new(rho_a, rho_b, ham, None).unwrap()
    }

    fn swap_scenario() -> TripartiteScenario {
        let rho_b = DensityMatrix::from_eigenvalues(&[0.6, 0.4]).unwrap();
        qubit_scenario(
            vec![
                (sigma_x(), sigma_x()),
                (sigma_y(), sigma_y()),
                (sigma_z(), sigma_z()),
            ],
            rho_b,
        )
    }

    #[test]
    fn build_total_cases() {
        let rho_b = DensityMatrix::from_eigenvalues(&[1.0, 0.0]).unwrap();
        let sc = qubit_scenario(vec![], rho_b.clone());
        assert!(qmat::fro_norm(&build_total(&sc)) < 1e-15);

        let sc = qubit_scenario(vec![(sigma_x(), sigma_y())], rho_b.clone());
        let expect = kron(&identity(2), &kron(&sigma_x(), &sigma_y()));
        assert!(approx_eq(&build_total(&sc), &expect, 1e-15));

        let rho_a = DensityMatrix::from_eigenvalues(&[0.8, 0.2]).unwrap();
        let ham = TotalHamiltonian::new(2, 2, vec![], None, None, Some(identity(2))).unwrap();
        let sc = TripartiteScenario::new(rho_a, rho_b, ham, None).unwrap();
        assert!(approx_eq(&build_total(&sc), &identity(8), 1e-15));
    }

    #[test]
    fn evolve_exact_t0_is_product() {
        let rho_b = DensityMatrix::from_eigenvalues(&[0.6, 0.4]).unwrap();
        let sc = qubit_scenario(vec![(sigma_x(), sigma_y())], rho_b.clone());
        let st = evolve_exact(&sc, 0.0).unwrap();
        let expect_ab = kron(sc.rho_a().mat(), rho_b.mat());
        assert!(approx_eq(st.rho_ab.mat(), &expect_ab, 1e-12));
        let expect_atb = kron(sc.rho_at().mat(), rho_b.mat());
        assert!(approx_eq(st.rho_atb.mat(), &expect_atb, 1e-12));
    }

    #[test]
    fn zero_hamiltonian_is_static() {
        let rho_b = DensityMatrix::from_eigenvalues(&[0.6, 0.4]).unwrap();
        let sc = qubit_scenario(vec![], rho_b);
        let st0 = evolve_exact(&sc, 0.0).unwrap();
        let st1 = evolve_exact(&sc, 1.7).unwrap();
        assert!(approx_eq(st0.rho_ab.mat(), st1.rho_ab.mat(), 1e-12));
        assert!(approx_eq(st0.rho_ata.mat(), st1.rho_ata.mat(), 1e-12));
    }

    #[test]
    fn swap_transfers_at_quarter_pi() {
        let sc = swap_scenario();
        let st = evolve_exact(&sc, std::f64::consts::FRAC_PI_4).unwrap();
        let n_atb = cut_negativity(&sc, &st, Cut::AtB).unwrap();
        let n_ata = cut_negativity(&sc, &st, Cut::AtA).unwrap();
        assert!((n_atb - 0.4).abs() < 1e-6, "n_atb = {n_atb}");
        assert!(n_ata <= 1e-6, "n_ata = {n_ata}");
    }

    #[test]
    fn perturbed_tri_zero_hamiltonian() {
        let rho_b = DensityMatrix::from_eigenvalues(&[0.6, 0.4]).unwrap();
        let sc = qubit_scenario(vec![], rho_b);
        let p = perturbed_rho_tri(&sc);
        assert!(qmat::fro_norm(&p.order1) < 1e-14);
        assert!(qmat::fro_norm(&p.order2) < 1e-14);
    }

    #[test]
    fn perturbed_tri_commuting_hamiltonian() {
        // a Hamiltonian commuting with the full three-party state freezes the
        // expansion; commuting with rho_A (x) rho_B alone is NOT enough, since
        // the ancilla-system coherences still rotate (only the reduced
        // system-bath expansion is frozen then)
        let rho_b = DensityMatrix::from_eigenvalues(&[0.6, 0.4]).unwrap();
        let sc = qubit_scenario(vec![(identity(2), sigma_z())], rho_b.clone());
        let p = perturbed_rho_tri(&sc);
        assert!(qmat::fro_norm(&p.order1) < 1e-12);
        assert!(qmat::fro_norm(&p.order2) < 1e-12);

        let sc = qubit_scenario(vec![(sigma_z(), sigma_z())], rho_b);
        let p = perturbed_rho_tri(&sc);
        assert!(qmat::fro_norm(&p.order1) > 0.1, "coherences must rotate");
        let ab = perturbed_rho_bipartite(&sc, Bipartition::Ab).unwrap();
        assert!(qmat::fro_norm(&ab.order1) < 1e-12, "reduced first order frozen");
    }

    #[test]
    fn perturbed_tri_orders_hermitian_traceless() {
        let sc = swap_scenario();
        let p = perturbed_rho_tri(&sc);
        assert!(herm_deviation(&p.order1) < 1e-9);
        assert!(herm_deviation(&p.order2) < 1e-9);
        assert!(qmat::trace(&p.order1).norm() < 1e-10);
        assert!(qmat::trace(&p.order2).norm() < 1e-10);
    }

    #[test]
    fn perturbed_tri_matches_exact_to_third_order() {
        let sc = swap_scenario();
        let p = perturbed_rho_tri(&sc);
        let resid = |t: f64| {
            let st = evolve_exact(&sc, t).unwrap();
            let approx = &p.order0 + &p.order1.mapv(|z| z * t) + &p.order2.mapv(|z| z * (t * t));
            qmat::fro_norm(&(st.rho_tri.mat() - &approx))
        };
        let r1 = resid(1e-2);
        let r2 = resid(1e-3);
        let c_fit = r1 / 1e-6;
        assert!(r2 <= c_fit * 1e-9 * 1.5 + 1e-13, "r1={r1:e} r2={r2:e}");
    }

    #[test]
    fn closed_forms_match_partial_trace_oracle() {
        // off-diagonal rho_A exercises the eigenbasis rotation
        let m = array![
            [c(0.55, 0.), c(0.1, 0.15)],
            [c(0.1, -0.15), c(0.45, 0.)]
        ];
        let rho_a = DensityMatrix::new(m).unwrap();
        let rho_b = DensityMatrix::from_eigenvalues(&[1.0, 0.0]).unwrap();
        let ham = TotalHamiltonian::new(
            2,
            2,
            vec![(sigma_x(), sigma_y()), (sigma_z(), sigma_x())],
            Some(sigma_z()),
            Some(sigma_x()),
            None,
        )
        .unwrap();
        let sc = TripartiteScenario::new(rho_a, rho_b, ham, None).unwrap();
        let tri = perturbed_rho_tri(&sc);
        let (da, db) = (2, 2);

        let ab = perturbed_rho_bipartite(&sc, Bipartition::Ab).unwrap();
        let o1 = partial_trace(&tri.order1, BipartiteShape::new(da, da * db), Factor::First).unwrap();
        let o2 = partial_trace(&tri.order2, BipartiteShape::new(da, da * db), Factor::First).unwrap();
        assert!(qmat::max_abs_diff(&ab.order1, &o1) < 1e-10);
        assert!(qmat::max_abs_diff(&ab.order2, &o2) < 1e-10);

        let atb = perturbed_rho_bipartite(&sc, Bipartition::AtB).unwrap();
        let o1 = trace_middle(&tri.order1, da, da, db);
        let o2 = trace_middle(&tri.order2, da, da, db);
        assert!(qmat::max_abs_diff(&atb.order1, &o1) < 1e-10);
        assert!(qmat::max_abs_diff(&atb.order2, &o2) < 1e-10);

        let ata = perturbed_rho_bipartite(&sc, Bipartition::AtA).unwrap();
        let o1 = partial_trace(&tri.order1, BipartiteShape::new(da * da, db), Factor::Second).unwrap();
        let o2 = partial_trace(&tri.order2, BipartiteShape::new(da * da, db), Factor::Second).unwrap();
        assert!(qmat::max_abs_diff(&ata.order1, &o1) < 1e-10);
        assert!(qmat::max_abs_diff(&ata.order2, &o2) < 1e-10);
    }

    #[test]
    fn first_order_ata_vanishes_for_traceless_bath_ops() {
        // Tr[B rho_B] = 0 makes the first-order At;A matrix vanish
        let rho_b = DensityMatrix::from_eigenvalues(&[0.5, 0.5]).unwrap();
        let sc = qubit_scenario(vec![(sigma_x(), sigma_z())], rho_b);
        let ata = perturbed_rho_bipartite(&sc, Bipartition::AtA).unwrap();
        assert!(qmat::fro_norm(&ata.order1) < 1e-12);
    }

    #[test]
    fn trajectory_constant_without_hamiltonian() {
        let rho_b = DensityMatrix::from_eigenvalues(&[0.6, 0.4]).unwrap();
        let sc = qubit_scenario(vec![], rho_b);
        let grid = linspace(0.0, 2.0, 9);
        let tr = trajectory(&sc, &grid).unwrap();
        for k in 0..grid.len() {
            assert!((tr.neg_ata[k] - tr.neg_ata[0]).abs() < 1e-10);
            assert!(tr.neg_ab[k].abs() < 1e-12);
            assert!((tr.purity_ab[k] - tr.purity_ab[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn trajectory_at_ab_cut_is_conserved() {
        let sc = swap_scenario();
        let grid = linspace(0.0, 1.5, 16);
        let tr = trajectory(&sc, &grid).unwrap();
        for k in 0..grid.len() {
            assert!(
                (tr.neg_at_ab[k] - tr.neg_at_ab[0]).abs() < 1e-9,
                "t = {}",
                grid[k]
            );
        }
    }

    #[test]
    fn trajectory_rejects_bad_grid() {
        let rho_b = DensityMatrix::from_eigenvalues(&[0.6, 0.4]).unwrap();
        let sc = qubit_scenario(vec![], rho_b);
        assert!(trajectory(&sc, &[]).is_err());
        assert!(trajectory(&sc, &[0.5, 0.1]).is_err());
    }

    #[test]
    fn scenario_rejects_singular_rho_a() {
        let rho_a = DensityMatrix::from_eigenvalues(&[1.0, 0.0]).unwrap();
        let rho_b = DensityMatrix::from_eigenvalues(&[0.6, 0.4]).unwrap();
        let ham = TotalHamiltonian::new(2, 2, vec![], None, None, None).unwrap();
        let err = TripartiteScenario::new(rho_a, rho_b, ham, None).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }
}
