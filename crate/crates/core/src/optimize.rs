//! Extremization of the second-order onset functionals: the closed-form
//! qubit answer for the amplitude variance on the Bloch sphere, and a seeded
//! derivative-free simplex search over spectrum-preserving state families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::qmat::{evolve_unitary, CMat};
use crate::states::{BlochVector, DensityMatrix};

/// Closed-form amplitude variance for a qubit with A = diag(a1, a2) in its
/// own eigenbasis and the state given by a Bloch vector in that basis:
/// (a1-a2)^2/4 * [sqrt(1-r^2) + 1 - (1 - sqrt(1-r^2)) az^2/r^2],
/// with the r -> 0 limit (a1-a2)^2/2.
pub fn qubit_ga_bloch(a1: f64, a2: f64, b: &BlochVector) -> Result<f64> {
    let r2 = b.ax * b.ax + b.ay * b.ay + b.az * b.az;
    if r2 > 1.0 + 1e-12 {
        return Err(Error::Domain(format!("Bloch radius {} exceeds 1", r2.sqrt())));
    }
    let gap2 = (a1 - a2) * (a1 - a2);
    if r2 < 1e-30 {
        return Ok(gap2 / 2.0);
    }
    let s = (1.0 - r2.min(1.0)).sqrt();
    Ok(gap2 / 4.0 * (s + 1.0 - (1.0 - s) * b.az * b.az / r2))
}

/// States with a frozen spectrum: rho(theta) = U(theta) diag(spectrum)
/// U(theta)^dag, with U the exponential of an anti-Hermitian generator built
/// from d^2 real parameters.
#[derive(Debug, Clone)]
pub struct SpectrumConstrainedFamily {
    spectrum: Vec<f64>,
    dim: usize,
}

impl SpectrumConstrainedFamily {
    pub fn new(spectrum: Vec<f64>) -> Result<Self> {
        let dim = spectrum.len();
        // the spectrum itself must be a probability vector
        DensityMatrix::from_eigenvalues(&spectrum)?;
        Ok(Self { spectrum, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// Number of real parameters: d diagonal phases + d(d-1) off-diagonal.
    pub fn param_count(&self) -> usize {
        self.dim * self.dim
    }

    /// Hermitian generator H(theta); the unitary is exp(-i H).
    fn generator(&self, theta: &[f64]) -> Result<CMat> {
        if theta.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "theta has {} parameters, family needs {}",
                theta.len(),
                self.param_count()
            )));
        }
        let d = self.dim;
        let mut h = CMat::zeros((d, d));
        for i in 0..d {
            h[(i, i)] = C64::new(theta[i], 0.0);
        }
        let mut k = d;
        for i in 0..d {
            for j in (i + 1)..d {
                let re = theta[k];
                let im = theta[k + 1];
                k += 2;
                h[(i, j)] = C64::new(re, -im);
                h[(j, i)] = C64::new(re, im);
            }
        }
        Ok(h)
    }

    /// The family member at `theta`.
    pub fn rho(&self, theta: &[f64]) -> Result<DensityMatrix> {
        let h = self.generator(theta)?;
        let u = evolve_unitary(&h, 1.0)?;
        let d = self.dim;
        let mut m = CMat::zeros((d, d));
        for (j, &s) in self.spectrum.iter().enumerate() {
            let col = u.column(j);
            for x in 0..d {
                for y in 0..d {
                    m[(x, y)] += C64::new(s, 0.0) * col[x] * col[y].conj();
                }
            }
        }
        DensityMatrix::new(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone)]
pub struct ExtremizeOptions {
    /// Total objective evaluations across all restarts.
    pub budget: usize,
    pub seed: u64,
    pub restarts: usize,
    /// Starting point for the first restart; zeros when absent.
    pub initial: Option<Vec<f64>>,
}

impl Default for ExtremizeOptions {
    fn default() -> Self {
        Self {
            budget: 2000,
            seed: 0,
            restarts: 5,
            initial: None,
        }
    }
}

/// Result of an extremization run. `trace` is the best value seen after each
/// evaluation, in deterministic restart-major order; it never worsens.
#[derive(Debug, Clone)]
pub struct ExtremizeOutcome {
    pub best_theta: Vec<f64>,
    pub best_value: f64,
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

struct RestartResult {
    best_theta: Vec<f64>,
    best_g: f64,
    values: Vec<f64>,
}

/// Nelder-Mead on g(theta) with standard coefficients. Only evaluated points
/// enter the budget; the run is deterministic for a fixed start simplex.
fn nelder_mead<G: Fn(&[f64]) -> Result<f64>>(
    g: &G,
    start: &[f64],
    scale: f64,
    budget: usize,
) -> Result<RestartResult> {
    let n = start.len();
    let (alpha, gamma, rho_c, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut values = Vec::with_capacity(budget);
    let mut evals = 0usize;
    let eval = |x: &[f64], values: &mut Vec<f64>| -> Result<f64> {
        let v = g(x).map_err(|e| Error::Probe {
            theta: x.to_vec(),
            source: Box::new(e),
        })?;
        values.push(v);
        Ok(v)
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(start, &mut values)?;
    evals += 1;
    simplex.push((start.to_vec(), v0));
    for i in 0..n {
        if evals >= budget {
            break;
        }
        let mut x = start.to_vec();
        x[i] += scale;
        let v = eval(&x, &mut values)?;
        evals += 1;
        simplex.push((x, v));
    }
    while simplex.len() < n + 1 {
        simplex.push(simplex[0].clone());
    }

    while evals < budget {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let worst = simplex[n].clone();
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&worst.0)
            .map(|(c, w)| c + alpha * (c - w))
            .collect();
        let fr = eval(&reflect, &mut values)?;
        evals += 1;
        if fr < simplex[0].1 {
            if evals >= budget {
                simplex[n] = (reflect, fr);
                break;
            }
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&reflect)
                .map(|(c, r)| c + gamma * (r - c))
                .collect();
            let fe = eval(&expand, &mut values)?;
            evals += 1;
            simplex[n] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflect, fr);
        } else {
            if evals >= budget {
                break;
            }
            let contract: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + rho_c * (w - c))
                .collect();
            let fc = eval(&contract, &mut values)?;
            evals += 1;
            if fc < worst.1 {
                simplex[n] = (contract, fc);
            } else {
                // shrink toward the best vertex
                let best = simplex[0].0.clone();
                for k in 1..=n {
                    if evals >= budget {
                        break;
                    }
                    let x: Vec<f64> = best
                        .iter()
                        .zip(&simplex[k].0)
                        .map(|(b, xk)| b + sigma * (xk - b))
                        .collect();
                    let v = eval(&x, &mut values)?;
                    evals += 1;
                    simplex[k] = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    Ok(RestartResult {
        best_theta: simplex[0].0.clone(),
        best_g: simplex[0].1,
        values,
    })
}

/// Derivative-free extremization of an objective over a spectrum-constrained
/// family. Simplex local search with seeded random restarts; restarts run in
/// parallel and the winner is chosen by (value, restart index) so the result
/// is reproducible bit-for-bit.
pub fn extremize<F>(
    objective: F,
    family: &SpectrumConstrainedFamily,
    direction: Direction,
    opts: &ExtremizeOptions,
) -> Result<ExtremizeOutcome>
where
    F: Fn(&DensityMatrix) -> Result<f64> + Sync,
{
    let n = family.param_count();
    let restarts = opts.restarts.max(1);
    let per_restart = (opts.budget / restarts).max(n + 2);
    let sign = match direction {
        Direction::Minimize => 1.0,
        Direction::Maximize => -1.0,
    };
    let g = |theta: &[f64]| -> Result<f64> {
        let rho = family.rho(theta)?;
        Ok(sign * objective(&rho)?)
    };

    // all randomness from one seeded generator, drawn before dispatch
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = Vec::with_capacity(restarts);
    starts.push(
        opts.initial
            .clone()
            .unwrap_or_else(|| vec![0.0; n]),
    );
    for _ in 1..restarts {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
        starts.push(x);
    }

    let results: Vec<Result<RestartResult>> = starts
        .par_iter()
        .map(|s| nelder_mead(&g, s, 0.3, per_restart))
        .collect();

    let mut best: Option<(usize, RestartResult)> = None;
    let mut trace = Vec::new();
    let mut evaluations = 0;
    for (idx, r) in results.into_iter().enumerate() {
        let r = r?;
        evaluations += r.values.len();
        for v in &r.values {
            let candidate = sign * v;
            let improved = match (direction, trace.last()) {
                (_, None) => true,
                (Direction::Minimize, Some(&b)) => candidate < b,
                (Direction::Maximize, Some(&b)) => candidate > b,
            };
            trace.push(if improved {
                candidate
            } else {
                *trace.last().unwrap()
            });
        }
        let better = match &best {
            None => true,
            Some((_, b)) => r.best_g < b.best_g,
        };
        if better {
            best = Some((idx, r));
        }
    }
    let (_, winner) = best.expect("at least one restart");
    Ok(ExtremizeOutcome {
        best_theta: winner.best_theta,
        best_value: sign * winner.best_g,
        trace,
        evaluations,
    })
}
