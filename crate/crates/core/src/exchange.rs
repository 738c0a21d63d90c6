//! Exchange-process amplitude of a fermion pair coupled to a stochastic
//! massless background on a momentum torus.
//!
//! The time window is a Gaussian of width `Δt`, so `η̂(ω) = √(2π) Δt e^{−ω²Δt²/2}`
//! in magnitude. The background covariance is `ν δ(q²) ε(q⁰)`, which splits into
//! branches `f_±(q) = ∓ν/(4π|q|)`. One summand of the lattice sum is
//!
//! ```text
//! Σ_± f_±(q) η̂(p⁰_out − p⁰ ± |q|) η̂(r⁰_out − r⁰ ∓ |q|)
//! ```
//!
//! with on-shell energies and `p_out = p + q`, `r_out = r − q`. Normalization is
//! only fixed up to a constant; callers compare ratios and exponents.

use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::linalg::{ls_slope, C64, I, ONE, ZERO};

/// Periodic box of side `ℓ`; momenta live on `(2π/ℓ) Z³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusLattice3D {
    pub ell: f64,
}

impl TorusLattice3D {
    pub fn new(ell: f64) -> Result<Self> {
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(invalid("torus side must be positive"));
        }
        Ok(Self { ell })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.ell
    }

    pub fn momentum(&self, n: [i64; 3]) -> [f64; 3] {
        let d = self.spacing();
        [n[0] as f64 * d, n[1] as f64 * d, n[2] as f64 * d]
    }

    /// Largest integer radius `R` with `R·spacing ≤ q_max`.
    fn index_radius(&self, q_max: f64) -> Result<i64> {
        if q_max <= self.spacing() {
            return Err(invalid(format!("cutoff {q_max} must exceed the lattice spacing {}", self.spacing())));
        }
        Ok((q_max / self.spacing()).floor() as i64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub t0: f64,
    pub dt: f64,
}

impl Window {
    pub fn new(t0: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("window width Δt must be positive"));
        }
        Ok(Self { t0, dt })
    }

    /// `η(t) = exp(−(t − t₀)²/(2Δt²))`.
    pub fn eta(&self, t: f64) -> f64 {
        let u = (t - self.t0) / self.dt;
        (-0.5 * u * u).exp()
    }

    /// `|∫ η(t) e^{iωt} dt|`.
    pub fn eta_hat(&self, omega: f64) -> f64 {
        (2.0 * std::f64::consts::PI).sqrt() * self.dt * (-0.5 * (omega * self.dt).powi(2)).exp()
    }

    pub fn eta_hat_at_zero(&self) -> f64 {
        self.eta_hat(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceModel {
    pub nu: f64,
}

impl CovarianceModel {
    /// `f_±(q) = ∓ν/(4π|q|)`, without the metric factor.
    pub fn f(&self, branch: Branch, q: [f64; 3]) -> Result<f64> {
        let qn = norm(q);
        if qn == 0.0 {
            return Err(Error::Singular("covariance is singular at q = 0".into()));
        }
        Ok(-branch.sign() * self.nu / (4.0 * std::f64::consts::PI * qn))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shell {
    Upper,
    Lower,
}

impl Shell {
    pub fn sign(self) -> f64 {
        match self {
            Shell::Upper => 1.0,
            Shell::Lower => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWaveState {
    pub mass: f64,
    pub momentum: [f64; 3],
    pub shell: Shell,
}

impl PlaneWaveState {
    pub fn energy(&self) -> f64 {
        self.shell.sign() * (dot(self.momentum, self.momentum) + self.mass * self.mass).sqrt()
    }

    /// Unit-norm spinor with `H(p)u = p⁰u`, picked by projecting a fixed reference spinor.
    pub fn spinor(&self) -> Vector4<C64> {
        let e = self.energy();
        let h = dirac_hamiltonian(self.momentum, self.mass);
        let proj = (Matrix4::identity() + h.map(|z| z / e)).map(|z| z * 0.5);
        let reference = match self.shell {
            Shell::Upper => Vector4::new(ONE, ZERO, ZERO, ZERO),
            Shell::Lower => Vector4::new(ZERO, ZERO, ONE, ZERO),
        };
        let v = proj * reference;
        let n = v.norm();
        v.map(|z| z / n)
    }
}

/// Shells of `(p, r, p_out, r_out)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kinematics {
    /// `p` upper and `r` lower go to `p_out` lower and `r_out` upper.
    Exchange,
    /// The same with the roles of the two incoming states swapped.
    ExchangeSwapped,
    /// All four states on the upper shell.
    Scattering,
}

impl Kinematics {
    pub fn shells(self) -> [Shell; 4] {
        use Shell::*;
        match self {
            Kinematics::Exchange => [Upper, Lower, Lower, Upper],
            Kinematics::ExchangeSwapped => [Lower, Upper, Upper, Lower],
            Kinematics::Scattering => [Upper, Upper, Upper, Upper],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum VertexFactor {
    /// Scalar vertex, factor 1.
    #[default]
    Scalar,
    /// `Σ_j g_jj (ψ̄_out γ^j ψ_in)_p (ψ̄_out γ^j ψ_in)_r` with plane-wave spinors.
    DiracBilinear,
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn add(a: [f64; 3], b: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

fn pauli(k: usize) -> [[C64; 2]; 2] {
    match k {
        0 => [[ZERO, ONE], [ONE, ZERO]],
        1 => [[ZERO, -I], [I, ZERO]],
        _ => [[ONE, ZERO], [ZERO, -ONE]],
    }
}

/// Dirac-representation `γ^μ`, `μ = 0..4`.
pub fn gamma(mu: usize) -> Matrix4<C64> {
    let mut g = Matrix4::zeros();
    if mu == 0 {
        g[(0, 0)] = ONE;
        g[(1, 1)] = ONE;
        g[(2, 2)] = -ONE;
        g[(3, 3)] = -ONE;
        return g;
    }
    let s = pauli(mu - 1);
    for i in 0..2 {
        for j in 0..2 {
            g[(i, 2 + j)] = s[i][j];
            g[(2 + i, j)] = -s[i][j];
        }
    }
    g
}

/// `H(p) = γ⁰(γ·p + m)`.
pub fn dirac_hamiltonian(p: [f64; 3], m: f64) -> Matrix4<C64> {
    let g0 = gamma(0);
    let mut inner = Matrix4::identity().map(|z: C64| z * m);
    for (k, pk) in p.iter().enumerate() {
        inner += gamma(k + 1).map(|z| z * *pk);
    }
    g0 * inner
}

fn current(out: &PlaneWaveState, inn: &PlaneWaveState) -> [C64; 4] {
    let (uo, ui) = (out.spinor(), inn.spinor());
    let g0 = gamma(0);
    let mut j = [ZERO; 4];
    for (mu, slot) in j.iter_mut().enumerate() {
        *slot = (uo.adjoint() * g0 * gamma(mu) * ui)[(0, 0)];
    }
    j
}

/// Per-branch contributions `f_± η̂ η̂ · vertex` of one lattice momentum.
pub fn branch_amplitudes(
    p: [f64; 3],
    r: [f64; 3],
    q: [f64; 3],
    kin: Kinematics,
    window: &Window,
    m: f64,
    model: &CovarianceModel,
    vertex: VertexFactor,
) -> Result<[C64; 2]> {
    let qn = norm(q);
    if qn == 0.0 {
        return Err(Error::Singular("the zero mode q = 0 is excluded".into()));
    }
    let [sp, sr, spo, sro] = kin.shells();
    let state = |k, shell| PlaneWaveState { mass: m, momentum: k, shell };
    let (ps, rs) = (state(p, sp), state(r, sr));
    let (po, ro) = (state(add(p, q, 1.0), spo), state(add(r, q, -1.0), sro));
    let vertex_value = match vertex {
        VertexFactor::Scalar => ONE,
        VertexFactor::DiracBilinear => {
            let (jp, jr) = (current(&po, &ps), current(&ro, &rs));
            jp[0] * jr[0] - jp[1] * jr[1] - jp[2] * jr[2] - jp[3] * jr[3]
        }
    };
    let d_p = po.energy() - ps.energy();
    let d_r = ro.energy() - rs.energy();
    let mut out = [ZERO; 2];
    for (slot, branch) in out.iter_mut().zip([Branch::Plus, Branch::Minus]) {
        let s = branch.sign();
        let gate = window.eta_hat(d_p + s * qn) * window.eta_hat(d_r - s * qn);
        *slot = vertex_value * (model.f(branch, q)? * gate);
    }
    Ok(out)
}

/// `|Σ_± f_± η̂ η̂ · vertex|` at one lattice momentum `q`.
pub fn exchange_amplitude(
    p: [f64; 3],
    r: [f64; 3],
    q: [f64; 3],
    kin: Kinematics,
    window: &Window,
    m: f64,
    model: &CovarianceModel,
    vertex: VertexFactor,
) -> Result<f64> {
    let [a, b] = branch_amplitudes(p, r, q, kin, window, m, model, vertex)?;
    Ok((a + b).norm())
}

/// `(η̂` arguments of the `+` branch) for the given kinematics.
pub fn gate_arguments(p: [f64; 3], r: [f64; 3], q: [f64; 3], kin: Kinematics, m: f64) -> (f64, f64) {
    let [sp, sr, spo, sro] = kin.shells();
    let e = |k: [f64; 3], s: Shell| PlaneWaveState { mass: m, momentum: k, shell: s }.energy();
    let qn = norm(q);
    (
        e(add(p, q, 1.0), spo) - e(p, sp) + qn,
        e(add(r, q, -1.0), sro) - e(r, sr) - qn,
    )
}

/// `(1/ℓ³) Σ_{0<|q|≤Q} amplitude` by enumeration of every lattice point.
pub fn direct_lattice_sum(
    p: [f64; 3],
    r: [f64; 3],
    kin: Kinematics,
    q_max: f64,
    window: &Window,
    m: f64,
    model: &CovarianceModel,
    lattice: &TorusLattice3D,
    vertex: VertexFactor,
) -> Result<f64> {
    let radius = lattice.index_radius(q_max)?;
    let r2max = (q_max / lattice.spacing()).powi(2);
    // One partial sum per x-slab, combined in slab order.
    let slabs: Vec<Result<f64>> = (-radius..=radius)
        .into_par_iter()
        .map(|x| {
            let mut acc = 0.0;
            for y in -radius..=radius {
                for z in -radius..=radius {
                    let n2 = (x * x + y * y + z * z) as f64;
                    if n2 == 0.0 || n2 > r2max {
                        continue;
                    }
                    let q = lattice.momentum([x, y, z]);
                    acc += exchange_amplitude(p, r, q, kin, window, m, model, vertex)?;
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = 0.0;
    for s in slabs {
        total += s?;
    }
    Ok(total / lattice.ell.powi(3))
}

/// `r₃(N)`: number of `(x, y, z) ∈ Z³` with `x² + y² + z² = N`, for `N ≤ n_max`.
pub fn sum_of_three_squares_counts(n_max: usize) -> Vec<u64> {
    let radius = (n_max as f64).sqrt().floor() as i64;
    let mut r2 = vec![0u64; n_max + 1];
    for x in -radius..=radius {
        for y in -radius..=radius {
            let s = (x * x + y * y) as usize;
            if s <= n_max {
                r2[s] += 1;
            }
        }
    }
    let mut r3 = vec![0u64; n_max + 1];
    for z in -radius..=radius {
        let zz = (z * z) as usize;
        for (m, &c) in r2.iter().enumerate().take(n_max + 1 - zz) {
            r3[m + zz] += c;
        }
    }
    r3
}

/// One row of a cutoff scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub q: f64,
    pub sum: f64,
    /// Log-log slope fitted over this and all smaller cutoffs; `None` on the first row.
    pub running_slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceScan {
    pub rows: Vec<ScanRow>,
    pub slope: f64,
    /// Lattice modes summed at the largest cutoff.
    pub modes: u64,
}

/// Cutoff scan at `p = r = 0` in exchange kinematics with a scalar vertex. The
/// summand depends only on `|q|`, so the sum runs over `|q|²` shells weighted by `r₃`.
pub fn divergence_scan(
    q_values: &[f64],
    window: &Window,
    m: f64,
    model: &CovarianceModel,
    lattice: &TorusLattice3D,
) -> Result<DivergenceScan> {
    if q_values.len() < 3 {
        return Err(invalid("a divergence scan needs at least three cutoffs"));
    }
    if q_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("cutoffs must be strictly increasing"));
    }
    let q_last = *q_values.last().expect("non-empty");
    lattice.index_radius(q_values[0])?;
    let d = lattice.spacing();
    let n_max = ((q_last / d).powi(2)).floor() as usize;
    let counts = sum_of_three_squares_counts(n_max);
    let zero = [0.0; 3];
    let mut shell_terms = vec![0.0; n_max + 1];
    for (nsq, &c) in counts.iter().enumerate().skip(1) {
        if c == 0 {
            continue;
        }
        let q = [(nsq as f64).sqrt() * d, 0.0, 0.0];
        let a = exchange_amplitude(zero, zero, q, Kinematics::Exchange, window, m, model, VertexFactor::Scalar)?;
        shell_terms[nsq] = c as f64 * a;
    }
    let vol = lattice.ell.powi(3);
    let mut rows = Vec::with_capacity(q_values.len());
    let (mut acc, mut next) = (0.0, 1usize);
    for &qv in q_values {
        let limit = ((qv / d).powi(2)).floor() as usize;
        while next <= limit {
            acc += shell_terms[next];
            next += 1;
        }
        rows.push(ScanRow { q: qv, sum: acc / vol, running_slope: None });
    }
    let logs: Vec<(f64, f64)> = rows.iter().map(|r| (r.q.ln(), r.sum.ln())).collect();
    for i in 1..rows.len() {
        let (xs, ys): (Vec<f64>, Vec<f64>) = logs[..=i].iter().copied().unzip();
        rows[i].running_slope = Some(ls_slope(&xs, &ys));
    }
    let slope = rows.last().and_then(|r| r.running_slope).expect("at least three rows");
    let modes = counts.iter().skip(1).sum();
    Ok(DivergenceScan { rows, slope, modes })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComptonRow {
    pub dt_m: f64,
    pub amplitude: f64,
    /// Amplitude divided by `(√(2π) Δt)²`.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComptonScan {
    pub rows: Vec<ComptonRow>,
    /// Normalized amplitude at the smallest `Δt·m` over that at the largest.
    pub ratio: f64,
    /// Exchange over scattering kinematics at `Δt·m` = 1.
    pub off_resonance_ratio: f64,
}

/// Amplitude against `Δt·m` at fixed `p`, `r` and `q`.
///
/// At `p = r = 0` the two branches cancel exactly in scattering kinematics, so
/// the off-resonance comparison is only informative for `p ≠ r`.
pub fn compton_suppression(
    dt_m_values: &[f64],
    p: [f64; 3],
    r: [f64; 3],
    q: [f64; 3],
    m: f64,
    model: &CovarianceModel,
) -> Result<ComptonScan> {
    if dt_m_values.len() < 2 {
        return Err(invalid("need at least two window widths"));
    }
    let (lo, hi) = dt_m_values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if lo > 0.1 + 1e-12 || hi < 10.0 - 1e-12 {
        return Err(invalid("window widths must span Δt·m ∈ [0.1, 10]"));
    }
    let amp = |dt_m: f64, kin| -> Result<f64> {
        let w = Window::new(0.0, dt_m / m)?;
        exchange_amplitude(p, r, q, kin, &w, m, model, VertexFactor::Scalar)
    };
    let mut rows = Vec::with_capacity(dt_m_values.len());
    for &x in dt_m_values {
        let a = amp(x, Kinematics::Exchange)?;
        let norm = (2.0 * std::f64::consts::PI).sqrt() * x / m;
        rows.push(ComptonRow { dt_m: x, amplitude: a, normalized: a / (norm * norm) });
    }
    let at = |target: f64| rows.iter().find(|r| r.dt_m == target).map(|r| r.normalized);
    let ratio = at(lo).expect("present") / at(hi).expect("present");
    let off_resonance_ratio = amp(1.0, Kinematics::Exchange)? / amp(1.0, Kinematics::Scattering)?;
    Ok(ComptonScan { rows, ratio, off_resonance_ratio })
}
