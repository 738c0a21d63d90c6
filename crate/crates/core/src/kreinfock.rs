//! Finite Fock–Krein spaces: the indefinite sector inner product, the projection
//! to the effective Fock space, and the fermionic operator identities on it.
//!
//! A slot carries a site `x < M`, a spinor index `α < s` and a lower index
//! `b = ±1`; the slot basis index is `(x·s + α)·2 + [b = +1]`. Sector states of
//! `n` slots are tensors of shape `D^n` with `D = 2Ms`, slot 1 most significant.
//!
//! The Fock space realises each of the `n` particle lines as "empty or one
//! slot state", giving `(D+1)^n` configurations. Creation `Ψ†_{[l,c]}(x,α)`
//! places wave-function index `b = −c` on line `l` with amplitude `1/a`, and
//! annihilation `Ψ_{[l,c]}(x,α)` reads wave-function index `b = c`; both carry
//! the Jordan–Wigner sign of the occupied lines before `l`. With the metric
//! `G = ⊗_lines (1 if empty, a·𝔱 if occupied)` creation is the Krein adjoint of
//! annihilation and `{Ψ_{[l,b]}, Ψ†_{[l,b′]}} = 𝔱^b_{b′} δ/a` on the vacuum.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::{complex_normal, kron, max_abs_diff, MaxModulus, spectral_norm, unitary_exp, CMat, CVec, C64, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotSpace {
    pub sites: usize,
    pub spinors: usize,
    /// Lattice cell weight entering every spatial integral.
    pub a: f64,
}

impl SlotSpace {
    pub fn new(sites: usize, spinors: usize, a: f64) -> Result<Self> {
        if sites == 0 || spinors == 0 {
            return Err(invalid("need at least one site and one spinor component"));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(invalid("cell weight must be positive"));
        }
        Ok(Self { sites, spinors, a })
    }

    /// Number of `(x, α)` modes.
    pub fn modes(&self) -> usize {
        self.sites * self.spinors
    }

    /// One-slot dimension `D = 2Ms`.
    pub fn dim(&self) -> usize {
        2 * self.modes()
    }

    pub fn mode(&self, site: usize, spinor: usize) -> usize {
        site * self.spinors + spinor
    }

    /// Slot index of `(mode, b)`.
    pub fn index(&self, mode: usize, b: i8) -> usize {
        2 * mode + usize::from(b > 0)
    }

    /// `γ⁰ = diag(+1 × ⌈s/2⌉, −1 × ⌊s/2⌋)`.
    pub fn gamma0(&self) -> CMat {
        let s = self.spinors;
        CMat::from_diagonal(&CVec::from_fn(s, |i, _| if i < s.div_ceil(2) { ONE } else { -ONE }))
    }
}

fn check_order(n: usize, d: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("sector order must be at least 1"));
    }
    let len = (d as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if len > 1 << 22 {
        return Err(invalid(format!("sector D^n = {d}^{n} too large for dense tensors")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorState {
    pub space: SlotSpace,
    pub n: usize,
    pub time: f64,
    pub data: CVec,
}

impl SectorState {
    pub fn new(space: SlotSpace, n: usize, time: f64, data: CVec) -> Result<Self> {
        check_order(n, space.dim())?;
        if data.len() != space.dim().pow(n as u32) {
            return Err(invalid(format!("sector data must have D^n = {} entries", space.dim().pow(n as u32))));
        }
        Ok(Self { space, n, time, data })
    }

    pub fn zeros(space: SlotSpace, n: usize) -> Result<Self> {
        check_order(n, space.dim())?;
        Ok(Self { space, n, time: 0.0, data: CVec::zeros(space.dim().pow(n as u32)) })
    }

    pub fn random<R: Rng + ?Sized>(space: SlotSpace, n: usize, rng: &mut R) -> Result<Self> {
        let mut s = Self::zeros(space, n)?;
        for z in s.data.iter_mut() {
            *z = complex_normal(rng);
        }
        Ok(s)
    }

    /// `ψ₁ ⊗ ⋯ ⊗ ψₙ` with one `D`-vector per slot.
    pub fn product(space: SlotSpace, factors: &[CVec]) -> Result<Self> {
        let n = factors.len();
        let mut s = Self::zeros(space, n)?;
        if factors.iter().any(|f| f.len() != space.dim()) {
            return Err(invalid("every factor must have D entries"));
        }
        let d = space.dim();
        for (i, z) in s.data.iter_mut().enumerate() {
            let mut rest = i;
            let mut val = ONE;
            for f in factors.iter().rev() {
                val *= f[rest % d];
                rest /= d;
            }
            *z = val;
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.space != other.space || self.n != other.n {
            return Err(invalid("sector states have different shapes"));
        }
        if self.time != other.time {
            return Err(invalid("sector states carry different time tags"));
        }
        Ok(())
    }

    fn with_data(&self, data: CVec) -> Self {
        Self { space: self.space, n: self.n, time: self.time, data }
    }
}

fn digits(mut index: usize, base: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for slot in (0..n).rev() {
        out[slot] = index % base;
        index /= base;
    }
    out
}

fn undigits(ds: &[usize], base: usize) -> usize {
    ds.iter().fold(0, |acc, &d| acc * base + d)
}

/// All permutations of `0..n` with their signs, in lexicographic order.
pub fn signed_permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<(Vec<usize>, f64)>) {
        let n = used.len();
        if prefix.len() == n {
            let mut inv = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if prefix[i] > prefix[j] {
                        inv += 1;
                    }
                }
            }
            out.push((prefix.clone(), if inv % 2 == 0 { 1.0 } else { -1.0 }));
            return;
        }
        for k in 0..n {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                rec(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// The per-slot 𝔱 metric, tensored over the slots and weighted by `a` per slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KreinMetric {
    pub space: SlotSpace,
    pub n: usize,
}

impl KreinMetric {
    /// `𝔱^b_{b′} = 1 − δ^b_{b′}` on the lower index.
    pub fn slot_matrix() -> CMat {
        CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    /// Flip every lower index: the unweighted metric `𝔱^{⊗n}`.
    pub fn apply(&self, state: &SectorState) -> SectorState {
        let d = self.space.dim();
        let data = CVec::from_fn(state.len(), |i, _| {
            let ds: Vec<usize> = digits(i, d, self.n).into_iter().map(|x| x ^ 1).collect();
            state.data[undigits(&ds, d)]
        });
        state.with_data(data)
    }
}

/// `(Ψ|Φ) = a^n Σ conj(Ψ) 𝔱^{⊗n} Φ`.
pub fn krein_inner(psi: &SectorState, phi: &SectorState) -> Result<C64> {
    psi.same_shape(phi)?;
    let flipped = KreinMetric { space: phi.space, n: phi.n }.apply(phi);
    Ok(psi.data.dotc(&flipped.data) * psi.space.a.powi(psi.n as i32))
}

/// `Π`: average over lower indices, then antisymmetrise the slots.
pub fn project_effective(psi: &SectorState) -> SectorState {
    let d = psi.space.dim();
    let n = psi.n;
    // b-averaging: S = ½[[1,1],[1,1]] per slot.
    let mut avg = psi.data.clone();
    for slot in 0..n {
        let stride = d.pow((n - 1 - slot) as u32);
        let mut next = avg.clone();
        for i in 0..avg.len() {
            let digit = (i / stride) % d;
            let j = i - digit * stride + (digit ^ 1) * stride;
            next[i] = (avg[i] + avg[j]) * 0.5;
        }
        avg = next;
    }
    let perms = signed_permutations(n);
    let norm = 1.0 / perms.len() as f64;
    let data = CVec::from_fn(avg.len(), |i, _| {
        let ds = digits(i, d, n);
        let mut acc = ZERO;
        let mut permuted = vec![0; n];
        for (sigma, sign) in &perms {
            for (k, &s) in sigma.iter().enumerate() {
                permuted[k] = ds[s];
            }
            acc += avg[undigits(&permuted, d)] * *sign;
        }
        acc * norm
    });
    psi.with_data(data)
}

/// `2^n a^n Σ_{x,α} conj(Ψ_rec) Φ_rec`, read off the all-`b = +1` components.
pub fn effective_inner(psi: &SectorState, phi: &SectorState) -> Result<C64> {
    psi.same_shape(phi)?;
    for (name, s) in [("first", psi), ("second", phi)] {
        let resid = (&project_effective(s).data - &s.data).max_modulus();
        if resid > 1e-10 * s.data.max_modulus().max(1.0) {
            return Err(invalid(format!("{name} state is not in the effective sector (residual {resid:.3e})")));
        }
    }
    let d = psi.space.dim();
    let n = psi.n;
    let mut acc = ZERO;
    for i in 0..psi.len() {
        if digits(i, d, n).iter().all(|&x| x % 2 == 1) {
            acc += psi.data[i].conj() * phi.data[i];
        }
    }
    Ok(acc * (2.0 * psi.space.a).powi(n as i32))
}

/// Apply one `D×D` operator per slot.
pub fn apply_slot_operators(state: &SectorState, ops: &[CMat]) -> Result<SectorState> {
    let d = state.space.dim();
    if ops.len() != state.n || ops.iter().any(|o| o.shape() != (d, d)) {
        return Err(invalid("need one D×D operator per slot"));
    }
    let mut data = state.data.clone();
    for (slot, op) in ops.iter().enumerate() {
        let stride = d.pow((state.n - 1 - slot) as u32);
        let mut next = CVec::zeros(data.len());
        for i in 0..data.len() {
            let digit = (i / stride) % d;
            let base = i - digit * stride;
            let mut acc = ZERO;
            for k in 0..d {
                acc += op[(digit, k)] * data[base + k * stride];
            }
            next[i] = acc;
        }
        data = next;
    }
    Ok(state.with_data(data))
}

/// Slot generator `h ⊗ 1 + g ⊗ 𝔱` on `C^{Ms} ⊗ C²`.
pub fn slot_generator(h: &CMat, g: &CMat) -> CMat {
    kron(h, &CMat::identity(2, 2)) + kron(g, &KreinMetric::slot_matrix())
}

/// Line-occupation Fock space of `n` particle lines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockSpace {
    pub space: SlotSpace,
    pub n: usize,
}

impl FockSpace {
    pub fn new(space: SlotSpace, n: usize) -> Result<Self> {
        check_order(n, space.dim() + 1)?;
        Ok(Self { space, n })
    }

    fn base(&self) -> usize {
        self.space.dim() + 1
    }

    pub fn len(&self) -> usize {
        self.base().pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn vacuum(&self) -> CVec {
        let mut v = CVec::zeros(self.len());
        v[0] = ONE;
        v
    }

    /// `G v`.
    pub fn metric(&self, v: &CVec) -> CVec {
        let base = self.base();
        CVec::from_fn(self.len(), |i, _| {
            let ds = digits(i, base, self.n);
            let occupied = ds.iter().filter(|&&x| x > 0).count();
            let flipped: Vec<usize> = ds.iter().map(|&x| if x == 0 { 0 } else { ((x - 1) ^ 1) + 1 }).collect();
            v[undigits(&flipped, base)] * self.space.a.powi(occupied as i32)
        })
    }

    /// `⟨u|v⟩ = u† G v`.
    pub fn inner(&self, u: &CVec, v: &CVec) -> C64 {
        u.dotc(&self.metric(v))
    }

    fn jw_sign(ds: &[usize], line: usize) -> f64 {
        if ds[..line].iter().filter(|&&x| x > 0).count() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// `Ψ_{[line,c]}(mode)`, line counted from 0.
    pub fn annihilate(&self, line: usize, c: i8, mode: usize, v: &CVec) -> CVec {
        let base = self.base();
        let target = self.space.index(mode, c) + 1;
        let mut out = CVec::zeros(self.len());
        for i in 0..self.len() {
            if v[i] == ZERO {
                continue;
            }
            let mut ds = digits(i, base, self.n);
            if ds[line] != target {
                continue;
            }
            let sign = Self::jw_sign(&ds, line);
            ds[line] = 0;
            out[undigits(&ds, base)] += v[i] * sign;
        }
        out
    }

    /// `Ψ†_{[line,c]}(mode)`: places lower index `−c` with amplitude `1/a`.
    pub fn create(&self, line: usize, c: i8, mode: usize, v: &CVec) -> CVec {
        let base = self.base();
        let placed = self.space.index(mode, -c) + 1;
        let amp = 1.0 / self.space.a;
        let mut out = CVec::zeros(self.len());
        for i in 0..self.len() {
            if v[i] == ZERO {
                continue;
            }
            let mut ds = digits(i, base, self.n);
            if ds[line] != 0 {
                continue;
            }
            let sign = Self::jw_sign(&ds, line);
            ds[line] = placed;
            out[undigits(&ds, base)] += v[i] * (sign * amp);
        }
        out
    }

    /// `Ψ̂(mode) = ½ Σ_{l,c} Ψ_{[l,c]}(mode)`.
    pub fn averaged_annihilate(&self, mode: usize, v: &CVec) -> CVec {
        let mut out = CVec::zeros(self.len());
        for line in 0..self.n {
            for c in [-1i8, 1] {
                out += self.annihilate(line, c, mode, v);
            }
        }
        out * C64::new(0.5, 0.0)
    }

    /// `½ Σ_{l,c} Ψ†_{[l,c]}(mode)`, the Krein adjoint of [`Self::averaged_annihilate`].
    pub fn averaged_create(&self, mode: usize, v: &CVec) -> CVec {
        let mut out = CVec::zeros(self.len());
        for line in 0..self.n {
            for c in [-1i8, 1] {
                out += self.create(line, c, mode, v);
            }
        }
        out * C64::new(0.5, 0.0)
    }

    /// Place a sector state on the all-occupied configurations.
    pub fn embed(&self, state: &SectorState) -> Result<CVec> {
        if state.space != self.space || state.n != self.n {
            return Err(invalid("sector state does not match the Fock space"));
        }
        let d = self.space.dim();
        let base = self.base();
        let mut v = CVec::zeros(self.len());
        for i in 0..state.len() {
            let ds: Vec<usize> = digits(i, d, self.n).into_iter().map(|x| x + 1).collect();
            v[undigits(&ds, base)] = state.data[i];
        }
        Ok(v)
    }

    /// The all-occupied component of a Fock vector.
    pub fn extract(&self, v: &CVec) -> SectorState {
        let d = self.space.dim();
        let base = self.base();
        let len = d.pow(self.n as u32);
        let data = CVec::from_fn(len, |i, _| {
            let ds: Vec<usize> = digits(i, d, self.n).into_iter().map(|x| x + 1).collect();
            v[undigits(&ds, base)]
        });
        SectorState { space: self.space, n: self.n, time: 0.0, data }
    }

    /// `Π` on the Fock space: the effective projection on the `n`-sector, zero elsewhere.
    pub fn project(&self, v: &CVec) -> CVec {
        let projected = project_effective(&self.extract(v));
        self.embed(&projected).expect("shapes agree by construction")
    }

    /// `Ψ̂†(mode) = ½ Π Σ_{l,c} Ψ†_{[l,c]}(mode)`.
    pub fn projected_create(&self, mode: usize, v: &CVec) -> CVec {
        self.project(&self.averaged_create(mode, v))
    }
}

/// Basis `J_p(e_I)` of the sector `F_p`: one antisymmetric, b-independent
/// wave function `e_I` of the `p` modes in `I`, copied onto every set of `p`
/// occupied lines.
fn chain_basis(fock: &FockSpace, p: usize) -> CMat {
    let modes = fock.space.modes();
    let subsets_modes = subsets(modes, p);
    let line_sets = subsets(fock.n, p);
    let perms = signed_permutations(p);
    let base = fock.base();
    let mut basis = CMat::zeros(fock.len(), subsets_modes.len());
    for (col, set) in subsets_modes.iter().enumerate() {
        for lines in &line_sets {
            for (sigma, sign) in &perms {
                for bits in 0..(1usize << p) {
                    let mut ds = vec![0; fock.n];
                    for (k, &line) in lines.iter().enumerate() {
                        let b = if bits >> k & 1 == 1 { 1 } else { -1 };
                        ds[line] = fock.space.index(set[sigma[k]], b) + 1;
                    }
                    basis[(undigits(&ds, base), col)] += C64::new(*sign, 0.0);
                }
            }
        }
    }
    basis
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::new(), &mut out);
    }
    out
}

/// Normalisation of the rescaled scalar products `⟨·|·⟩_{F_p} = r_p ⟨·|·⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainWeights {
    /// `r_p = C(n, p)`.
    Binomial,
    /// `r_p = n! / ((n − p)! 2^p)`, the weights for which the averaged
    /// operators obey the canonical relations.
    Falling,
}

impl ChainWeights {
    pub fn weight(&self, n: usize, p: usize) -> f64 {
        let falling: f64 = (n - p + 1..=n).map(|k| k as f64).product();
        match self {
            ChainWeights::Binomial => falling / (1..=p).map(|k| k as f64).product::<f64>(),
            ChainWeights::Falling => falling / 2f64.powi(p as i32),
        }
    }
}

/// The sectors `F_0, …, F_n` with their Krein-orthogonal projectors.
pub struct SectorChain {
    pub fock: FockSpace,
    /// Column basis of each `F_p` inside the Fock space.
    pub bases: Vec<CMat>,
    gram_inv: Vec<CMat>,
}

impl SectorChain {
    pub fn new(fock: FockSpace) -> Result<Self> {
        let mut bases = Vec::new();
        let mut gram_inv = Vec::new();
        for p in 0..=fock.n {
            let b = chain_basis(&fock, p);
            // A sector with more particles than modes is empty.
            let gram = if b.ncols() == 0 {
                CMat::zeros(0, 0)
            } else {
                let gb = CMat::from_columns(&(0..b.ncols()).map(|j| fock.metric(&b.column(j).into_owned())).collect::<Vec<_>>());
                b.adjoint() * gb
            };
            let inv = gram
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::Singular(format!("Gram matrix of F_{p} is singular")))?;
            bases.push(b);
            gram_inv.push(inv);
        }
        Ok(Self { fock, bases, gram_inv })
    }

    pub fn dim(&self, p: usize) -> usize {
        self.bases[p].ncols()
    }

    /// Coordinates of the Krein-orthogonal projection onto `F_p`.
    pub fn coordinates(&self, p: usize, v: &CVec) -> CVec {
        let rhs = self.bases[p].adjoint() * self.fock.metric(v);
        &self.gram_inv[p] * rhs
    }

    pub fn project(&self, p: usize, v: &CVec) -> CVec {
        &self.bases[p] * self.coordinates(p, v)
    }

    pub fn vector(&self, p: usize, j: usize) -> CVec {
        self.bases[p].column(j).into_owned()
    }

    /// Rescaled creator `F_{p−1} → F_p`: `(r_{p−1}/r_p)·P_p·(½ΣΨ†)`.
    pub fn rescaled_create(&self, weights: ChainWeights, p: usize, mode: usize, v: &CVec) -> CVec {
        let n = self.fock.n;
        let ratio = weights.weight(n, p - 1) / weights.weight(n, p);
        self.project(p, &self.fock.averaged_create(mode, v)) * C64::new(ratio, 0.0)
    }

    /// Distance of `Ψ̂ F_p` from `F_{p−1}`, relative to the image size.
    pub fn annihilator_leakage(&self, p: usize, mode: usize) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.dim(p) {
            let out = self.fock.averaged_annihilate(mode, &self.vector(p, j));
            let resid = (&out - self.project(p - 1, &out)).max_modulus();
            if out.max_modulus() > 0.0 {
                worst = worst.max(resid / out.max_modulus());
            }
        }
        worst
    }

    /// Matrix of `Ψ̂(mode)` from `F_p` to `F_{p−1}` in chain coordinates.
    pub fn averaged_annihilator(&self, p: usize, mode: usize) -> FieldOperatorMatrix {
        let cols: Vec<CVec> = (0..self.dim(p))
            .map(|j| self.coordinates(p - 1, &self.fock.averaged_annihilate(mode, &self.vector(p, j))))
            .collect();
        let matrix = if cols.is_empty() { CMat::zeros(self.dim(p - 1), 0) } else { CMat::from_columns(&cols) };
        FieldOperatorMatrix { from: p, to: p - 1, mode, label: FieldLabel::Averaged, matrix }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldLabel {
    Line { line: usize, b: i8 },
    Averaged,
}

/// An operator between two sectors, in chain coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldOperatorMatrix {
    pub from: usize,
    pub to: usize,
    pub mode: usize,
    pub label: FieldLabel,
    pub matrix: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarReport {
    pub n: usize,
    pub p: usize,
    pub weights: ChainWeights,
    /// `max |{Ψ̂(x), Ψ̂†(y)} − δ_{xy}/a|` on `F_{p−1}`.
    pub mixed: f64,
    /// `max |{Ψ̂(x), Ψ̂(y)}|` on `F_p`.
    pub annihilators: f64,
    /// `max |{Ψ̂†(x), Ψ̂†(y)}|` on `F_{p−2}`.
    pub creators: f64,
    /// `{Ψ̂(x), Ψ̂†(x)}` on `F_{p−1}` in chain coordinates, for mode 0.
    pub diagonal_block: CMat,
}

impl CarReport {
    pub fn max_deviation(&self) -> f64 {
        self.mixed.max(self.annihilators).max(self.creators)
    }
}

/// Canonical relations of the averaged operators between `F_{p−1}` and `F_p`.
pub fn rescaled_car_check(space: SlotSpace, n: usize, p: usize, weights: ChainWeights) -> Result<CarReport> {
    if !(1 <= p && p <= n && n <= 3) {
        return Err(invalid(format!("need 1 ≤ p ≤ n ≤ 3, got p = {p}, n = {n}")));
    }
    let chain = SectorChain::new(FockSpace::new(space, n)?)?;
    car_on_chain(&chain, p, weights)
}

pub fn car_on_chain(chain: &SectorChain, p: usize, weights: ChainWeights) -> Result<CarReport> {
    let fock = &chain.fock;
    let n = fock.n;
    let modes = fock.space.modes();
    let q = p - 1;
    let delta = 1.0 / fock.space.a;
    let mut mixed = 0.0f64;
    let mut diagonal_block = CMat::zeros(chain.dim(q), chain.dim(q));
    for x in 0..modes {
        for y in 0..modes {
            for j in 0..chain.dim(q) {
                let u = chain.vector(q, j);
                let mut out = fock.averaged_annihilate(x, &chain.rescaled_create(weights, p, y, &u));
                if q >= 1 {
                    let down = fock.averaged_annihilate(x, &u);
                    out += chain.rescaled_create(weights, q, y, &down);
                }
                let expected = if x == y { &u * C64::new(delta, 0.0) } else { CVec::zeros(u.len()) };
                mixed = mixed.max((&out - expected).max_modulus() / u.max_modulus());
                if x == 0 && y == 0 {
                    diagonal_block.set_column(j, &chain.coordinates(q, &out));
                }
            }
        }
    }
    let mut annihilators = 0.0f64;
    if p >= 2 {
        for x in 0..modes {
            for y in 0..modes {
                for j in 0..chain.dim(p) {
                    let u = chain.vector(p, j);
                    let xy = fock.averaged_annihilate(x, &fock.averaged_annihilate(y, &u));
                    let yx = fock.averaged_annihilate(y, &fock.averaged_annihilate(x, &u));
                    annihilators = annihilators.max((xy + yx).max_modulus() / u.max_modulus());
                }
            }
        }
    }
    let mut creators = 0.0f64;
    if p >= 2 {
        for x in 0..modes {
            for y in 0..modes {
                for j in 0..chain.dim(p - 2) {
                    let u = chain.vector(p - 2, j);
                    let xy = chain.rescaled_create(weights, p, x, &chain.rescaled_create(weights, p - 1, y, &u));
                    let yx = chain.rescaled_create(weights, p, y, &chain.rescaled_create(weights, p - 1, x, &u));
                    creators = creators.max((xy + yx).max_modulus() / u.max_modulus());
                }
            }
        }
    }
    Ok(CarReport { n, p, weights, mixed, annihilators, creators, diagonal_block })
}

/// Krein-orthonormal basis of the effective sector `F_n` as Fock vectors.
fn effective_basis(chain: &SectorChain) -> Vec<CVec> {
    let fock = &chain.fock;
    let n = fock.n;
    let mut out: Vec<CVec> = Vec::new();
    for j in 0..chain.dim(n) {
        let mut v = chain.vector(n, j);
        for e in &out {
            let proj = fock.inner(e, &v);
            v -= e * proj;
        }
        let norm = fock.inner(&v, &v).re.sqrt();
        out.push(v / C64::new(norm, 0.0));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    /// Largest `‖Π Ψ†_{[l,b]}(x) Ψ_{[l,b′]}(y) Π − (1/n) Ψ̂†(x) Ψ̂(y) Π‖_max`.
    pub max_deviation: f64,
    /// Largest difference between the left-hand sides for different `(l, b, b′)`.
    pub spread: f64,
    pub cases: usize,
}

/// Sandwich identity for every line, lower-index pair and mode pair.
pub fn lemma_eff_check(space: SlotSpace, n: usize) -> Result<LemmaReport> {
    if n > 3 || space.sites > 2 || space.spinors > 2 {
        return Err(invalid("the sandwich check is limited to n ≤ 3, M ≤ 2, s ≤ 2"));
    }
    let chain = SectorChain::new(FockSpace::new(space, n)?)?;
    let fock = &chain.fock;
    let basis: Vec<CVec> = (0..chain.dim(n)).map(|j| chain.vector(n, j)).collect();
    let modes = space.modes();
    let mut max_deviation = 0.0f64;
    let mut spread = 0.0f64;
    let mut cases = 0;
    for x in 0..modes {
        for y in 0..modes {
            let rhs: Vec<CVec> = basis
                .iter()
                .map(|u| fock.projected_create(x, &fock.averaged_annihilate(y, u)) / C64::new(n as f64, 0.0))
                .collect();
            let mut first: Option<Vec<CVec>> = None;
            for line in 0..n {
                for b in [-1i8, 1] {
                    for bp in [-1i8, 1] {
                        cases += 1;
                        let lhs: Vec<CVec> = basis
                            .iter()
                            .map(|u| fock.project(&fock.create(line, b, x, &fock.annihilate(line, bp, y, u))))
                            .collect();
                        for (l, r) in lhs.iter().zip(&rhs) {
                            max_deviation = max_deviation.max((l - r).max_modulus());
                        }
                        match &first {
                            None => first = Some(lhs),
                            Some(f) => {
                                for (l, r) in lhs.iter().zip(f) {
                                    spread = spread.max((l - r).max_modulus());
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(LemmaReport { max_deviation, spread, cases })
}

/// c-number stand-ins for the bosonic fields: one `s×s` matrix per site and line.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFields {
    /// `in_fields[k][x]` multiplies the incoming-line operator of line `k`.
    pub in_fields: Vec<Vec<CMat>>,
    pub out_fields: Vec<Vec<CMat>>,
}

impl CoefficientFields {
    pub fn zero(space: SlotSpace, n: usize) -> Self {
        let z = vec![vec![CMat::zeros(space.spinors, space.spinors); space.sites]; n];
        Self { in_fields: z.clone(), out_fields: z }
    }

    pub fn random<R: Rng + ?Sized>(space: SlotSpace, n: usize, rng: &mut R) -> Self {
        let mut draw = || {
            (0..n)
                .map(|_| (0..space.sites).map(|_| crate::linalg::ginibre(space.spinors, space.spinors, rng)).collect())
                .collect::<Vec<Vec<CMat>>>()
        };
        let in_fields = draw();
        let out_fields = draw();
        Self { in_fields, out_fields }
    }
}

/// `a Σ_{x,α,β} Ψ†(x,α)·M(x)_{αβ}·Ψ(x,β)` with the given creator and annihilator.
fn bilinear<C, A>(space: &SlotSpace, m: &[CMat], create: C, annihilate: A, v: &CVec) -> CVec
where
    C: Fn(usize, &CVec) -> CVec,
    A: Fn(usize, &CVec) -> CVec,
{
    let mut out = CVec::zeros(v.len());
    for (x, mx) in m.iter().enumerate() {
        for beta in 0..space.spinors {
            let down = annihilate(space.mode(x, beta), v);
            if down.max_modulus() == 0.0 {
                continue;
            }
            for alpha in 0..space.spinors {
                let coeff = mx[(alpha, beta)];
                if coeff == ZERO {
                    continue;
                }
                out += create(space.mode(x, alpha), &down) * (coeff * space.a);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeffReport {
    /// `Π H_int Π` against the two-term effective form.
    pub two_term: f64,
    /// Two-term form against the single combined-field form.
    pub combined: f64,
}

/// `Π H_int Π` against the effective Hamiltonian built from averaged operators.
pub fn effective_hamiltonian_check(
    space: SlotSpace,
    n: usize,
    fields: &CoefficientFields,
    lambda: f64,
) -> Result<HeffReport> {
    if lambda == 0.0 {
        return Err(invalid("coupling λ must be non-zero for the combined field"));
    }
    if fields.in_fields.len() != n || fields.out_fields.len() != n {
        return Err(invalid("need one coefficient field per line"));
    }
    let chain = SectorChain::new(FockSpace::new(space, n)?)?;
    let fock = &chain.fock;
    let g0 = space.gamma0();
    let with_g0 = |fs: &[CMat]| fs.iter().map(|m| &g0 * m).collect::<Vec<_>>();
    let mut two_term = 0.0f64;
    let mut combined = 0.0f64;
    for j in 0..chain.dim(n) {
        let u = chain.vector(n, j);
        let mut lhs = CVec::zeros(u.len());
        for k in 0..n {
            let m_in = with_g0(&fields.in_fields[k]);
            for c in [-1i8, 1] {
                lhs += bilinear(&space, &m_in, |md, v| fock.create(k, c, md, v), |md, v| fock.annihilate(k, -c, md, v), &u);
            }
            let m_out = with_g0(&fields.out_fields[k]);
            lhs += bilinear(&space, &m_out, |md, v| fock.create(k, -1, md, v), |md, v| fock.annihilate(k, -1, md, v), &u)
                * C64::new(lambda, 0.0);
        }
        let lhs = fock.project(&lhs);

        let averaged = |m: &[CMat]| {
            bilinear(&space, m, |md, v| fock.projected_create(md, v), |md, v| fock.averaged_annihilate(md, v), &u)
        };
        let mut rhs = CVec::zeros(u.len());
        for k in 0..n {
            rhs += averaged(&with_g0(&fields.in_fields[k])) * C64::new(2.0 / n as f64, 0.0);
            rhs += averaged(&with_g0(&fields.out_fields[k])) * C64::new(lambda / n as f64, 0.0);
        }
        two_term = two_term.max((&lhs - &rhs).max_modulus());

        let scale = (2.0 * lambda.abs()).sqrt();
        let b_hat: Vec<CMat> = (0..space.sites)
            .map(|x| {
                let mut acc = CMat::zeros(space.spinors, space.spinors);
                for k in 0..n {
                    acc += &fields.in_fields[k][x] * C64::new(2.0, 0.0) + &fields.out_fields[k][x] * C64::new(lambda, 0.0);
                }
                acc * C64::new(1.0 / (scale * n as f64), 0.0)
            })
            .collect();
        let single = averaged(&with_g0(&b_hat)) * C64::new(scale, 0.0);
        combined = combined.max((&single - &rhs).max_modulus());
    }
    Ok(HeffReport { two_term, combined })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    /// `max |⟨0|Ψ_{[1,b₁]}⋯Ψ_{[n,bₙ]}|Ψ⟩ − phase·Ψ|` without the global prefactor.
    pub deviation: f64,
    /// Overall phase relating the expectation value to the wave function.
    pub phase: C64,
    /// The phase once the prefactor `(−1)^{⌊n/2⌋}` is included.
    pub phase_with_prefactor: C64,
}

/// Build `|Ψ⟩` from a product wave function by creators on lines `1…n` and
/// read it back through annihilators.
pub fn wavefunction_recovery(space: SlotSpace, factors: &[CVec]) -> Result<RecoveryReport> {
    let n = factors.len();
    let target = SectorState::product(space, factors)?;
    let fock = FockSpace::new(space, n)?;
    let d = space.dim();
    let mut state = fock.vacuum();
    for line in (0..n).rev() {
        let mut next = CVec::zeros(fock.len());
        for mode in 0..space.modes() {
            for b in [-1i8, 1] {
                let amp = factors[line][space.index(mode, b)];
                if amp != ZERO {
                    next += fock.create(line, -b, mode, &state) * (amp * space.a);
                }
            }
        }
        state = next;
    }
    let mut recovered = CVec::zeros(target.len());
    for (i, r) in recovered.iter_mut().enumerate() {
        let ds = digits(i, d, n);
        let mut v = state.clone();
        for line in (0..n).rev() {
            let (mode, b) = (ds[line] / 2, if ds[line] % 2 == 1 { 1i8 } else { -1 });
            v = fock.annihilate(line, b, mode, &v);
        }
        *r = v[0];
    }
    let pivot = target.data.icamax();
    if target.data[pivot] == ZERO {
        return Err(invalid("wave function vanishes"));
    }
    let phase = recovered[pivot] / target.data[pivot];
    let deviation = (&recovered - &target.data * phase).max_modulus();
    let prefactor = if (n / 2) % 2 == 0 { 1.0 } else { -1.0 };
    Ok(RecoveryReport { deviation, phase, phase_with_prefactor: phase * prefactor })
}

/// One slot-dependent step generator `h_l ⊗ 1 + g_l ⊗ 𝔱` per line.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotDynamics {
    pub h: Vec<CMat>,
    pub g: Vec<CMat>,
}

impl SlotDynamics {
    pub fn random<R: Rng + ?Sized>(space: SlotSpace, n: usize, rng: &mut R) -> Self {
        let m = space.modes();
        let h = (0..n).map(|_| crate::linalg::random_hermitian(m, rng)).collect();
        let g = (0..n).map(|_| crate::linalg::random_hermitian(m, rng) * C64::new(0.5, 0.0)).collect();
        Self { h, g }
    }

    pub fn step(&self, dt: f64) -> Vec<CMat> {
        self.h.iter().zip(&self.g).map(|(h, g)| unitary_exp(&slot_generator(h, g), dt)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedEvolution {
    pub steps: usize,
    /// Matrix of `(Π U(T/N))^N Π` on a Krein-orthonormal basis of `F_n`.
    pub matrix: CMat,
    pub unitarity_defect: f64,
    /// Max-norm distance to the previous entry of the scan.
    pub change: Option<f64>,
}

/// Repeatedly projected evolution for each step count in `steps`.
pub fn projected_evolution_scan(
    space: SlotSpace,
    n: usize,
    dynamics: &SlotDynamics,
    t: f64,
    steps: &[usize],
) -> Result<Vec<ProjectedEvolution>> {
    if dynamics.h.len() != n || dynamics.g.len() != n {
        return Err(invalid("need one generator per line"));
    }
    let chain = SectorChain::new(FockSpace::new(space, n)?)?;
    let fock = &chain.fock;
    let basis = effective_basis(&chain);
    let mut out: Vec<ProjectedEvolution> = Vec::new();
    for &nsteps in steps {
        if nsteps == 0 {
            return Err(invalid("step count must be positive"));
        }
        let ops = dynamics.step(t / nsteps as f64);
        let cols: Vec<CVec> = basis
            .iter()
            .map(|e| {
                let mut s = fock.extract(e);
                for _ in 0..nsteps {
                    s = project_effective(&apply_slot_operators(&s, &ops).expect("shapes agree"));
                }
                let v = fock.embed(&s).expect("shapes agree");
                CVec::from_iterator(basis.len(), basis.iter().map(|f| fock.inner(f, &v)))
            })
            .collect();
        let matrix = CMat::from_columns(&cols);
        let k = matrix.ncols();
        let unitarity_defect = spectral_norm(&(matrix.adjoint() * &matrix - CMat::identity(k, k)));
        let change = out.last().map(|prev| max_abs_diff(&prev.matrix, &matrix));
        out.push(ProjectedEvolution { steps: nsteps, matrix, unitarity_defect, change });
    }
    Ok(out)
}
