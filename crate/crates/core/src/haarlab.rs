//! Haar-random unitaries and fluctuation estimates on tensor powers.
//!
//! Matrix elements of `W^{⊗p}` between product vectors factor into `p`
//! ordinary inner products, so nothing of size `n^p` is ever built. Each trial
//! draws from its own ChaCha stream `(seed, trial)`, which makes estimates
//! independent of scheduling.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::linalg::{ginibre, random_unit_vector, stream_rng, CMat, CVec, C64};

/// An n×n unitary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix(pub CMat);

impl UnitaryMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn determinant(&self) -> C64 {
        self.0.clone().determinant()
    }
}

/// Tensor product `u₁ ⊗ … ⊗ u_p` kept in factored form.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductVector {
    pub factors: Vec<CVec>,
}

impl ProductVector {
    pub fn new(factors: Vec<CVec>) -> Result<Self> {
        if factors.is_empty() {
            return Err(invalid("a product vector needs at least one factor"));
        }
        let n = factors[0].len();
        if factors.iter().any(|f| f.len() != n) {
            return Err(invalid("product-vector factors must share one dimension"));
        }
        Ok(Self { factors })
    }

    /// Product of `p` independent uniformly random unit vectors in `C^n`.
    pub fn random_unit<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Self {
        Self { factors: (0..p).map(|_| random_unit_vector(n, rng)).collect() }
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn dim(&self) -> usize {
        self.factors[0].len()
    }

    pub fn norm(&self) -> f64 {
        self.factors.iter().map(|f| f.norm()).product()
    }

    /// Dense `n^p` vector; only for small oracle checks.
    pub fn materialize(&self) -> CVec {
        let mut out = CVec::from_element(1, C64::new(1.0, 0.0));
        for f in &self.factors {
            let mut next = CVec::zeros(out.len() * f.len());
            for (i, a) in out.iter().enumerate() {
                for (j, b) in f.iter().enumerate() {
                    next[i * f.len() + j] = a * b;
                }
            }
            out = next;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationEstimate {
    pub mean_sq: f64,
    pub std_error: f64,
    pub theoretical_bound: f64,
    pub trials: usize,
    pub seed: u64,
    pub l: usize,
}

impl FluctuationEstimate {
    fn from_samples(samples: &[f64], bound: f64, seed: u64, l: usize) -> Self {
        let t = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / t;
        let var = if samples.len() > 1 {
            samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (t - 1.0)
        } else {
            0.0
        };
        Self {
            mean_sq: mean,
            std_error: (var / t).sqrt(),
            theoretical_bound: bound,
            trials: samples.len(),
            seed,
            l,
        }
    }

    /// `mean_sq / theoretical_bound`.
    pub fn ratio(&self) -> f64 {
        self.mean_sq / self.theoretical_bound
    }
}

/// Haar unitary from a Ginibre matrix: QR, then column phases fixed by `diag R`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    haar_frame(n, n, rng)
}

/// First `k` columns of a Haar unitary, i.e. a Haar-random isometry `C^k → C^n`.
///
/// Gram–Schmidt on `k` Ginibre columns with phases fixed by `diag R` has the
/// same law as the leading `k` columns of a full Haar draw.
pub fn haar_frame<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> CMat {
    let z = ginibre(n, k, rng);
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..k {
        let d = r[(j, j)];
        let norm = d.norm();
        let phase = if norm > 0.0 { d / norm } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Haar unitary determined by `seed` alone.
pub fn sample_haar(n: usize, seed: u64) -> Result<UnitaryMatrix> {
    if n == 0 {
        return Err(invalid("sample_haar needs n ≥ 1"));
    }
    Ok(UnitaryMatrix(haar_unitary(n, &mut stream_rng(seed, 0))))
}

fn check_pair(u: &ProductVector, v: &ProductVector, n: usize) -> Result<()> {
    if u.order() != v.order() {
        return Err(invalid(format!("factor counts differ: {} vs {}", u.order(), v.order())));
    }
    if u.dim() != n || v.dim() != n {
        return Err(invalid(format!("factors must have dimension {n}")));
    }
    Ok(())
}

/// `⟨u, W^{⊗p} v⟩ = ∏ⱼ ⟨uⱼ, W vⱼ⟩`.
pub fn tensor_pairing(u: &ProductVector, v: &ProductVector, w: &UnitaryMatrix) -> Result<C64> {
    check_pair(u, v, w.dim())?;
    Ok(u.factors
        .iter()
        .zip(&v.factors)
        .map(|(uj, vj)| uj.dotc(&(&w.0 * vj)))
        .product())
}

/// `⟨u, π_as v⟩ = det(⟨uᵢ, vⱼ⟩)/n!` for `p = n` factors in `C^n`.
pub fn antisym_pairing(u: &ProductVector, v: &ProductVector) -> Result<C64> {
    let n = u.dim();
    check_pair(u, v, n)?;
    if u.order() != n {
        return Err(invalid(format!(
            "total antisymmetrization needs p = n, got p = {} and n = {n}",
            u.order()
        )));
    }
    let gram = DMatrix::from_fn(n, n, |i, j| u.factors[i].dotc(&v.factors[j]));
    let nfact: f64 = (1..=n).map(|k| k as f64).product();
    Ok(gram.determinant() / nfact)
}

/// How the Haar unitaries of an experiment are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Full n×n Haar matrices.
    FullMatrix,
    /// Haar isometries on the span of the `v` factors only.
    Frame,
}

/// Monte Carlo estimate of `E|(1/L) Σ_α ⟨u, W_α^{⊗p} v⟩|²` for `p < n`.
pub fn prop51_experiment(n: usize, p: usize, l: usize, trials: usize, seed: u64) -> Result<FluctuationEstimate> {
    prop51_experiment_with(n, p, l, trials, seed, Sampling::Frame)
}

pub fn prop51_experiment_with(
    n: usize,
    p: usize,
    l: usize,
    trials: usize,
    seed: u64,
    sampling: Sampling,
) -> Result<FluctuationEstimate> {
    if p == 0 || p >= n {
        return Err(invalid(format!("prop51 needs 1 ≤ p < n, got p = {p}, n = {n}")));
    }
    if l == 0 || trials == 0 {
        return Err(invalid("L and trials must be positive"));
    }
    let samples: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(seed, trial);
            let u = ProductVector::random_unit(n, p, &mut rng);
            let v = ProductVector::random_unit(n, p, &mut rng);
            let mut acc = C64::new(0.0, 0.0);
            match sampling {
                Sampling::FullMatrix => {
                    for _ in 0..l {
                        let w = UnitaryMatrix(haar_unitary(n, &mut rng));
                        acc += tensor_pairing(&u, &v, &w).expect("shapes checked above");
                    }
                }
                Sampling::Frame => {
                    // W v_j = (W E) c_j with E an orthonormal basis of span(v).
                    let vmat = CMat::from_columns(&v.factors);
                    let e = vmat.clone().qr().q();
                    let coeffs = e.adjoint() * &vmat;
                    let k = e.ncols();
                    for _ in 0..l {
                        let frame = haar_frame(n, k, &mut rng);
                        let images = frame * &coeffs;
                        let mut prod = C64::new(1.0, 0.0);
                        for (j, uj) in u.factors.iter().enumerate() {
                            prod *= uj.dotc(&images.column(j));
                        }
                        acc += prod;
                    }
                }
            }
            (acc / l as f64).norm_sqr()
        })
        .collect();
    Ok(FluctuationEstimate::from_samples(&samples, 1.0 / (n as f64 * l as f64), seed, l))
}

/// Determinant term `E|(1/L) Σ det W_α|²` and antisymmetric-subtracted term
/// `E|(1/L) Σ ⟨u, (W_α^{⊗n} − det W_α π_as) v⟩|²`, sharing the same draws.
pub fn prop52_experiment(
    n: usize,
    l: usize,
    trials: usize,
    seed: u64,
) -> Result<(FluctuationEstimate, FluctuationEstimate)> {
    if n < 2 {
        return Err(invalid("prop52 needs n ≥ 2"));
    }
    if l == 0 || trials == 0 {
        return Err(invalid("L and trials must be positive"));
    }
    let samples: Vec<(f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(seed, trial);
            let u = ProductVector::random_unit(n, n, &mut rng);
            let v = ProductVector::random_unit(n, n, &mut rng);
            let as_part = antisym_pairing(&u, &v).expect("p = n by construction");
            let mut det_acc = C64::new(0.0, 0.0);
            let mut sub_acc = C64::new(0.0, 0.0);
            for _ in 0..l {
                let w = UnitaryMatrix(haar_unitary(n, &mut rng));
                let det = w.determinant();
                det_acc += det;
                sub_acc += tensor_pairing(&u, &v, &w).expect("shapes checked above") - det * as_part;
            }
            ((det_acc / l as f64).norm_sqr(), (sub_acc / l as f64).norm_sqr())
        })
        .collect();
    let dets: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let subs: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let lf = l as f64;
    Ok((
        FluctuationEstimate::from_samples(&dets, 1.0 / lf, seed, l),
        FluctuationEstimate::from_samples(&subs, 1.0 / (n as f64 * lf), seed, l),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrrepFluctuations {
    /// Antisymmetric component (dimension 1); bound field holds `1/L`.
    pub antisymmetric: FluctuationEstimate,
    /// Symmetric component (dimension 3); bound field holds `1/(3L)`.
    pub symmetric: FluctuationEstimate,
}

/// Orthonormal bases of `Sym²(C²)` and `Λ²(C²)` inside `C²⊗C²`.
pub fn two_qubit_component_bases() -> (CMat, CMat) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let sym = CMat::from_row_slice(
        4,
        3,
        &[1.0, 0.0, 0.0, 0.0, s, 0.0, 0.0, s, 0.0, 0.0, 0.0, 1.0].map(|x| C64::new(x, 0.0)),
    );
    let anti = CMat::from_row_slice(4, 1, &[0.0, s, -s, 0.0].map(|x| C64::new(x, 0.0)));
    (sym, anti)
}

/// Fluctuations of averaged matrix elements of `W⊗W` on each irreducible
/// component of `C²⊗C²`, averaged over all entries of the component block.
pub fn irrep_fluct_oracle(l: usize, trials: usize, seed: u64) -> Result<IrrepFluctuations> {
    if l == 0 || trials == 0 {
        return Err(invalid("L and trials must be positive"));
    }
    let (sym, anti) = two_qubit_component_bases();
    let samples: Vec<(f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(seed, trial);
            let mut sym_acc = CMat::zeros(3, 3);
            let mut anti_acc = CMat::zeros(1, 1);
            for _ in 0..l {
                let w = haar_unitary(2, &mut rng);
                let ww = w.kronecker(&w);
                sym_acc += sym.adjoint() * &ww * &sym;
                anti_acc += anti.adjoint() * &ww * &anti;
            }
            let lf = l as f64;
            let s = sym_acc.iter().map(|z| (z / lf).norm_sqr()).sum::<f64>() / 9.0;
            let a = (anti_acc[(0, 0)] / lf).norm_sqr();
            (a, s)
        })
        .collect();
    let lf = l as f64;
    let a: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let s: Vec<f64> = samples.iter().map(|s| s.1).collect();
    Ok(IrrepFluctuations {
        antisymmetric: FluctuationEstimate::from_samples(&a, 1.0 / lf, seed, l),
        symmetric: FluctuationEstimate::from_samples(&s, 1.0 / (3.0 * lf), seed, l),
    })
}
