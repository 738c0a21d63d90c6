//! Microscopic-mixing unitaries on finite stand-ins of the one-particle space.
//!
//! The ambient space `C^f` splits as `I₀ ⊕ J₀ ⊕ K₀` with dimensions
//! `n, n, f − 2n`; `N₀ = J₀ ⊕ K₀` is the orthogonal complement of the mixing
//! space `I₀`. In that block basis
//!
//! ```text
//! V = diag(1, U) · [[0, W, 0], [1, 0, 0], [0, 0, 1]] · diag(1, U)†
//! ```
//!
//! with `W ∈ U(n)` and `U` unitary on `N₀`.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::haarlab::haar_unitary;
use crate::linalg::{numerical_rank, unitarity_defect, CMat, C64, ONE};

/// Orthonormal basis of `C^f` adapted to `I₀ ⊕ J₀ ⊕ K₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceSplit {
    pub f: usize,
    pub n: usize,
    /// Columns `0..n` span I₀, `n..2n` span J₀, the rest K₀.
    pub basis: CMat,
}

impl SubspaceSplit {
    pub fn new(basis: CMat, n: usize) -> Result<Self> {
        let f = basis.nrows();
        if basis.ncols() != f {
            return Err(invalid("split basis must be square"));
        }
        if n == 0 || 2 * n > f {
            return Err(invalid(format!("need f ≥ 2n ≥ 2, got f = {f}, n = {n}")));
        }
        if unitarity_defect(&basis) > 1e-12 {
            return Err(invalid("split basis is not orthonormal"));
        }
        Ok(Self { f, n, basis })
    }

    /// Split along the standard basis.
    pub fn standard(f: usize, n: usize) -> Result<Self> {
        Self::new(CMat::identity(f, f), n)
    }

    /// Split along a Haar-random orthonormal basis.
    pub fn random<R: Rng + ?Sized>(f: usize, n: usize, rng: &mut R) -> Result<Self> {
        Self::new(haar_unitary(f, rng), n)
    }

    pub fn i0(&self) -> CMat {
        self.basis.columns(0, self.n).into_owned()
    }

    pub fn j0(&self) -> CMat {
        self.basis.columns(self.n, self.n).into_owned()
    }

    pub fn k0(&self) -> CMat {
        self.basis.columns(2 * self.n, self.f - 2 * self.n).into_owned()
    }

    pub fn n0(&self) -> CMat {
        self.basis.columns(self.n, self.f - self.n).into_owned()
    }

    fn to_ambient(&self, block: &CMat) -> CMat {
        &self.basis * block * self.basis.adjoint()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingOperator {
    pub v: CMat,
    pub w: CMat,
    /// The carrier unitary: on N₀ for [`build_v`], on the full space for [`build_v_general`].
    pub u: CMat,
}

fn check_w(split: &SubspaceSplit, w: &CMat) -> Result<()> {
    if w.shape() != (split.n, split.n) {
        return Err(invalid(format!("W must be {0}×{0}", split.n)));
    }
    Ok(())
}

fn check_u(split: &SubspaceSplit, u: &CMat) -> Result<()> {
    let m = split.f - split.n;
    if u.shape() != (m, m) {
        return Err(invalid(format!("U must act on N₀ and be {m}×{m}")));
    }
    Ok(())
}

/// `diag(1, U)` in split coordinates.
fn lift_u(split: &SubspaceSplit, u: &CMat) -> CMat {
    let mut out = CMat::identity(split.f, split.f);
    out.view_mut((split.n, split.n), (split.f - split.n, split.f - split.n)).copy_from(u);
    out
}

/// The block `[[0, W, 0], [1, 0, 0], [0, 0, 1]]` in split coordinates.
fn swap_block(split: &SubspaceSplit, w: &CMat) -> CMat {
    let (f, n) = (split.f, split.n);
    let mut s = CMat::zeros(f, f);
    s.view_mut((0, n), (n, n)).copy_from(w);
    for i in 0..n {
        s[(n + i, i)] = ONE;
    }
    for i in 2 * n..f {
        s[(i, i)] = ONE;
    }
    s
}

pub fn build_v(split: &SubspaceSplit, w: &CMat, u: &CMat) -> Result<MixingOperator> {
    check_w(split, w)?;
    check_u(split, u)?;
    let lu = lift_u(split, u);
    let block = &lu * swap_block(split, w) * lu.adjoint();
    Ok(MixingOperator { v: split.to_ambient(&block), w: w.clone(), u: u.clone() })
}

/// The same operator written as `π_{N₀} + diag(1,U)·[[0,W,0],[1,−1,0],[0,0,0]]·diag(1,U)†`.
pub fn build_v_projector_form(split: &SubspaceSplit, w: &CMat, u: &CMat) -> Result<MixingOperator> {
    check_w(split, w)?;
    check_u(split, u)?;
    let (f, n) = (split.f, split.n);
    let mut pi_n0 = CMat::zeros(f, f);
    for i in n..f {
        pi_n0[(i, i)] = ONE;
    }
    let mut d = CMat::zeros(f, f);
    d.view_mut((0, n), (n, n)).copy_from(w);
    for i in 0..n {
        d[(n + i, i)] = ONE;
        d[(n + i, n + i)] = -ONE;
    }
    let lu = lift_u(split, u);
    let block = pi_n0 + &lu * d * lu.adjoint();
    Ok(MixingOperator { v: split.to_ambient(&block), w: w.clone(), u: u.clone() })
}

/// `V_a = U_a · S_W · U_a†` with `S_W` the swap block and `U_a` unitary on `C^f`.
pub fn build_v_general(split: &SubspaceSplit, w: &CMat, u_a: &CMat) -> Result<MixingOperator> {
    check_w(split, w)?;
    if u_a.shape() != (split.f, split.f) {
        return Err(invalid(format!("U_a must be {0}×{0}", split.f)));
    }
    let s = split.to_ambient(&swap_block(split, w));
    Ok(MixingOperator { v: u_a * s * u_a.adjoint(), w: w.clone(), u: u_a.clone() })
}

fn current_operator(psi: &CMat, gamma: &CMat) -> Result<CMat> {
    if gamma.nrows() != gamma.ncols() || psi.nrows() != gamma.nrows() {
        return Err(invalid("Ψ must be s×f and γ must be s×s"));
    }
    Ok(psi.adjoint() * gamma * psi)
}

/// `Tr(V_b† Ψ†γΨ V_a) − Tr(Ψ†γΨ)`.
pub fn mixed_current(psi: &CMat, gamma: &CMat, v_a: &CMat, v_b: &CMat) -> Result<C64> {
    let m = current_operator(psi, gamma)?;
    if v_a.shape() != m.shape() || v_b.shape() != m.shape() {
        return Err(invalid("mixing operators must be f×f with f the column count of Ψ"));
    }
    Ok((v_b.adjoint() * &m * v_a).trace() - m.trace())
}

/// Numerical rank of `V_b† M V_a − M` with `M = Ψ†γΨ`.
pub fn current_difference_rank(psi: &CMat, gamma: &CMat, v_a: &CMat, v_b: &CMat) -> Result<usize> {
    let m = current_operator(psi, gamma)?;
    Ok(numerical_rank(&(v_b.adjoint() * &m * v_a - &m), 1e-10))
}

/// Finite point-set model of a mixed fermionic projector.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyProjector {
    /// Column `k` holds `ψ_k` sampled on the points; column 0 is the particle state.
    pub psi: CMat,
    /// Mixing label `a ∈ 1..=L_mix` of every point.
    pub mix_label: Vec<usize>,
    /// Phase label `α` of every point, indexing `phases`.
    pub phase_label: Vec<usize>,
    pub phases: Vec<f64>,
}

impl ToyProjector {
    /// Random states on `points` points, `L_mix` mixing subsystems and the
    /// given phases, with points assigned to subsystems round-robin.
    pub fn random<R: Rng + ?Sized>(
        points: usize,
        n_sea: usize,
        l_mix: usize,
        phases: Vec<f64>,
        rng: &mut R,
    ) -> Result<Self> {
        if l_mix == 0 || l_mix > n_sea {
            return Err(invalid("need 1 ≤ L_mix ≤ N so that every σ_a is defined"));
        }
        if phases.is_empty() {
            return Err(invalid("at least one phase is required"));
        }
        let labels = l_mix * phases.len();
        if points < labels {
            return Err(invalid("every subsystem needs at least one point"));
        }
        let psi = crate::linalg::ginibre(points, n_sea + 1, rng);
        let mix_label = (0..points).map(|x| 1 + x % l_mix).collect();
        let phase_label = (0..points).map(|x| (x / l_mix) % phases.len()).collect();
        Ok(Self { psi, mix_label, phase_label, phases })
    }

    pub fn n_sea(&self) -> usize {
        self.psi.ncols() - 1
    }

    fn sigma(a: usize, k: usize) -> usize {
        if k == 0 {
            a
        } else if k == a {
            0
        } else {
            k
        }
    }

    /// `ψ^{(α)}_{σ_a(k)}(x)` at the point's own labels.
    fn mixed_value(&self, x: usize, k: usize) -> C64 {
        let a = self.mix_label[x];
        let idx = Self::sigma(a, k);
        let mut val = self.psi[(x, idx)];
        if idx == 0 {
            val *= C64::from_polar(1.0, self.phases[self.phase_label[x]]);
        }
        val
    }

    /// `P(x,y) = −Σ_k ψ^{(α)}_{σ_a(k)}(x) conj(ψ^{(β)}_{σ_b(k)}(y))` with the
    /// subsystem labels of x and y.
    pub fn assemble(&self) -> CMat {
        let points = self.psi.nrows();
        let mixed = CMat::from_fn(points, self.n_sea() + 1, |x, k| self.mixed_value(x, k));
        -(&mixed * mixed.adjoint())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankCheck {
    pub rank: usize,
    pub expected: usize,
    pub pass: bool,
}

pub fn rank_preservation(toy: &ToyProjector) -> RankCheck {
    let rank = numerical_rank(&toy.assemble(), 1e-10);
    let expected = toy.n_sea() + 1;
    RankCheck { rank, expected, pass: rank == expected }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::stream_rng;

    #[test]
    fn split_requires_room_for_two_copies_of_the_mixing_space() {
        assert!(SubspaceSplit::standard(3, 2).is_err());
        assert!(SubspaceSplit::standard(4, 0).is_err());
    }

    #[test]
    fn build_v_rejects_wrong_shapes() {
        let split = SubspaceSplit::standard(6, 2).unwrap();
        let w = CMat::identity(3, 3);
        let u = CMat::identity(4, 4);
        assert!(build_v(&split, &w, &u).is_err());
        assert!(build_v(&split, &CMat::identity(2, 2), &CMat::identity(3, 3)).is_err());
    }

    #[test]
    fn toy_requires_defined_permutations() {
        let mut rng = stream_rng(2, 0);
        assert!(ToyProjector::random(10, 3, 4, vec![0.0], &mut rng).is_err());
    }
}
