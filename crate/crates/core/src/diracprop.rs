//! Free and first-order perturbed Dirac kernels in 1+1 dimensions on a periodic lattice.
//!
//! Conventions: `γ⁰ = diag(1, −1)`, `γ¹ = [[0, 1], [−1, 0]]`, hence
//! `γ⁰γ¹ = σx`. The equation `(i∂̸ + B − m)φ = 0` becomes
//! `i∂ₜφ = (−iσx∂ₓ + mσz − γ⁰B)φ`; the free Hamiltonian in momentum space is
//! `H(k) = kσx + mσz`. Spatial derivatives are spectral on the torus and all
//! kernels are exact discrete momentum sums over `k_n = 2πn/ℓ`,
//! `n = −N/2 … N/2 − 1`.
//!
//! Matrix layout: row and column index `2·site + spinor`. With
//! `P(τ) = e^{−iHτ}` the kernels are
//!
//! ```text
//! k_m(t,·;t′,·) = P(τ)γ⁰ / (2πa)          p_m = sign(H)·P(τ)γ⁰ / (2πa)
//! s∧ = −2πi·k_m  for τ > 0, else 0       s∨ = +2πi·k_m  for τ < 0, else 0
//! ```
//!
//! with `τ = t − t′`, so `s∨ − s∧ = 2πi·k_m` off the diagonal time and the
//! retarded kernel `s∧` lives in the future cone. Perturbed kernels replace
//! `P` by the first-order truncation of `e^{−i(H − γ⁰B)τ}`.

use std::f64::consts::PI;

use nalgebra::Matrix2;

use crate::error::{invalid, Error, Result};
use crate::linalg::{hermitian_eigen, CMat, CVec, C64, I, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeLattice {
    pub nx: usize,
    pub a: f64,
    pub dt: f64,
}

impl SpaceTimeLattice {
    pub fn new(nx: usize, a: f64, dt: f64) -> Result<Self> {
        if nx < 8 || !nx.is_power_of_two() {
            return Err(invalid(format!("Nx must be a power of two ≥ 8, got {nx}")));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(invalid("lattice spacing must be positive"));
        }
        if !(dt > 0.0 && dt <= a / 2.0) {
            return Err(invalid(format!("time step {dt} violates 0 < dt ≤ a/2 = {}", a / 2.0)));
        }
        Ok(Self { nx, a, dt })
    }

    /// Lattice of period `ell` with `nx` sites.
    pub fn with_period(nx: usize, ell: f64, dt: f64) -> Result<Self> {
        Self::new(nx, ell / nx as f64, dt)
    }

    pub fn ell(&self) -> f64 {
        self.nx as f64 * self.a
    }

    pub fn dim(&self) -> usize {
        2 * self.nx
    }

    pub fn x(&self, site: usize) -> f64 {
        site as f64 * self.a
    }

    pub fn momenta(&self) -> Vec<f64> {
        let n = self.nx as i64;
        (-n / 2..n / 2).map(|j| 2.0 * PI * j as f64 / self.ell()).collect()
    }

    /// Shortest signed periodic displacement `x − y`.
    pub fn displacement(&self, x: f64, y: f64) -> f64 {
        let ell = self.ell();
        let d = (x - y).rem_euclid(ell);
        if d > ell / 2.0 {
            d - ell
        } else {
            d
        }
    }
}

pub fn gamma0() -> Matrix2<C64> {
    Matrix2::new(ONE, ZERO, ZERO, -ONE)
}

pub fn gamma1() -> Matrix2<C64> {
    Matrix2::new(ZERO, ONE, -ONE, ZERO)
}

/// `I_N ⊗ γ⁰`.
pub fn gamma0_block(lattice: &SpaceTimeLattice) -> CMat {
    CMat::from_diagonal(&CVec::from_fn(lattice.dim(), |i, _| if i % 2 == 0 { ONE } else { -ONE }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    /// Entry `2·site + spinor`.
    pub values: CVec,
}

impl SpinorField {
    pub fn new(lattice: &SpaceTimeLattice, values: CVec) -> Result<Self> {
        if values.len() != lattice.dim() {
            return Err(invalid(format!("spinor field needs {} entries", lattice.dim())));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("spinor field has non-finite entries"));
        }
        Ok(Self { values })
    }

    /// Gaussian packet `spinor · e^{ik₀x} · exp(−d²/(2w²))` around `center`.
    pub fn gaussian(lattice: &SpaceTimeLattice, center: f64, width: f64, k0: f64, spinor: [C64; 2]) -> Self {
        let mut values = CVec::zeros(lattice.dim());
        for site in 0..lattice.nx {
            let d = lattice.displacement(lattice.x(site), center);
            let env = (-d * d / (2.0 * width * width)).exp();
            let phase = C64::from_polar(env, k0 * d);
            values[2 * site] = spinor[0] * phase;
            values[2 * site + 1] = spinor[1] * phase;
        }
        Self { values }
    }

    /// Plane wave `e^{ik_j x}·u` with `k_j = 2πj/ℓ`.
    pub fn plane_wave(lattice: &SpaceTimeLattice, j: i64, spinor: [C64; 2]) -> Self {
        let k = 2.0 * PI * j as f64 / lattice.ell();
        let mut values = CVec::zeros(lattice.dim());
        for site in 0..lattice.nx {
            let phase = C64::from_polar(1.0, k * lattice.x(site));
            values[2 * site] = spinor[0] * phase;
            values[2 * site + 1] = spinor[1] * phase;
        }
        Self { values }
    }

    /// `∫ φ†φ dx` as the lattice sum times `a`.
    pub fn probability(&self, lattice: &SpaceTimeLattice) -> f64 {
        self.values.norm_squared() * lattice.a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    Scalar,
    Vector,
}

/// Static external potential: a 2×2 matrix `B(x)` per site.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub coupling: Coupling,
    pub values: Vec<Matrix2<C64>>,
    /// Profile parameters `(name, value)` recorded for reports.
    pub profile: Vec<(String, f64)>,
}

impl Potential {
    pub fn zero(lattice: &SpaceTimeLattice) -> Self {
        Self { coupling: Coupling::Scalar, values: vec![Matrix2::zeros(); lattice.nx], profile: Vec::new() }
    }

    /// `B(x) = Φ(x)·1` with a Gaussian profile.
    pub fn gaussian_scalar(lattice: &SpaceTimeLattice, amplitude: f64, center: f64, width: f64) -> Self {
        let values = (0..lattice.nx)
            .map(|s| {
                let d = lattice.displacement(lattice.x(s), center);
                Matrix2::identity() * C64::new(amplitude * (-d * d / (2.0 * width * width)).exp(), 0.0)
            })
            .collect();
        Self {
            coupling: Coupling::Scalar,
            values,
            profile: vec![("amplitude".into(), amplitude), ("center".into(), center), ("width".into(), width)],
        }
    }

    /// `B(x) = (A₀γ⁰ + A₁γ¹)·g(x)` with a Gaussian profile `g`.
    pub fn gaussian_vector(lattice: &SpaceTimeLattice, a0: f64, a1: f64, center: f64, width: f64) -> Self {
        let shape = gamma0() * C64::new(a0, 0.0) + gamma1() * C64::new(a1, 0.0);
        let values = (0..lattice.nx)
            .map(|s| {
                let d = lattice.displacement(lattice.x(s), center);
                shape * C64::new((-d * d / (2.0 * width * width)).exp(), 0.0)
            })
            .collect();
        Self {
            coupling: Coupling::Vector,
            values,
            profile: vec![("a0".into(), a0), ("a1".into(), a1), ("center".into(), center), ("width".into(), width)],
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= C64::new(factor, 0.0);
        }
        out.profile.push(("scale".into(), factor));
        out
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().flat_map(|m| m.iter()).map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `γ⁰B` as a block-diagonal lattice operator.
    pub fn gamma0_b(&self, lattice: &SpaceTimeLattice) -> Result<CMat> {
        if self.values.len() != lattice.nx {
            return Err(invalid("potential does not match the lattice"));
        }
        let g0 = gamma0();
        let mut out = CMat::zeros(lattice.dim(), lattice.dim());
        for (s, b) in self.values.iter().enumerate() {
            let v = g0 * b;
            if (v - v.adjoint()).iter().any(|z| z.norm() > 1e-12) {
                return Err(invalid(format!("γ⁰B is not Hermitian at site {s}")));
            }
            if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(invalid("potential has non-finite entries"));
            }
            for i in 0..2 {
                for j in 0..2 {
                    out[(2 * s + i, 2 * s + j)] = v[(i, j)];
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Pm,
    Km,
    Advanced,
    Retarded,
    PerturbedAdvanced,
    PerturbedRetarded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// `s∨`, supported for `t < t′`.
    Advanced,
    /// `s∧`, supported for `t > t′`.
    Retarded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub kind: KernelKind,
    pub t: f64,
    pub t_prime: f64,
    pub matrix: CMat,
}

impl KernelMatrix {
    /// `k(x,y)* = γ⁰ k(y,x)† γ⁰` for the full lattice matrix.
    pub fn dirac_adjoint(&self, lattice: &SpaceTimeLattice) -> CMat {
        let g = gamma0_block(lattice);
        &g * self.matrix.adjoint() * &g
    }
}

fn free_block(k: f64, m: f64, tau: f64, with_sign: bool) -> Matrix2<C64> {
    let e = (k * k + m * m).sqrt();
    let h = Matrix2::new(C64::new(m, 0.0), C64::new(k, 0.0), C64::new(k, 0.0), C64::new(-m, 0.0));
    if e == 0.0 {
        // Only reachable for k = m = 0, where sign(H) is set to zero.
        return if with_sign { Matrix2::zeros() } else { Matrix2::identity() };
    }
    let (c, s) = ((e * tau).cos(), (e * tau).sin());
    if with_sign {
        // sign(H) e^{−iHτ} = (H/E) cos(Eτ) − i sin(Eτ)
        h * C64::new(c / e, 0.0) - Matrix2::identity() * C64::new(0.0, s)
    } else {
        Matrix2::identity() * C64::new(c, 0.0) - h * C64::new(0.0, s / e)
    }
}

/// Free propagator `P(τ) = e^{−iHτ}` (or `sign(H)·P(τ)`) by momentum sums.
fn free_propagator(lattice: &SpaceTimeLattice, m: f64, tau: f64, with_sign: bool) -> CMat {
    let n = lattice.nx;
    let momenta = lattice.momenta();
    let blocks: Vec<Matrix2<C64>> = momenta.iter().map(|&k| free_block(k, m, tau, with_sign)).collect();
    // The kernel is circulant: one 2×2 block per displacement d = x − y.
    let mut by_disp = vec![Matrix2::<C64>::zeros(); n];
    for (d, out) in by_disp.iter_mut().enumerate() {
        let xd = d as f64 * lattice.a;
        let mut acc = Matrix2::zeros();
        for (k, b) in momenta.iter().zip(&blocks) {
            acc += b * C64::from_polar(1.0, k * xd);
        }
        *out = acc / C64::new(n as f64, 0.0);
    }
    let mut p = CMat::zeros(2 * n, 2 * n);
    for x in 0..n {
        for y in 0..n {
            let b = &by_disp[(x + n - y) % n];
            for i in 0..2 {
                for j in 0..2 {
                    p[(2 * x + i, 2 * y + j)] = b[(i, j)];
                }
            }
        }
    }
    p
}

/// Free Hamiltonian on the lattice, built by the same momentum sums.
pub fn free_hamiltonian(lattice: &SpaceTimeLattice, m: f64) -> CMat {
    let n = lattice.nx;
    let momenta = lattice.momenta();
    let mut h = CMat::zeros(2 * n, 2 * n);
    for x in 0..n {
        for y in 0..n {
            let xd = (x as f64 - y as f64) * lattice.a;
            let mut acc = Matrix2::<C64>::zeros();
            for &k in &momenta {
                let hk = Matrix2::new(C64::new(m, 0.0), C64::new(k, 0.0), C64::new(k, 0.0), C64::new(-m, 0.0));
                acc += hk * C64::from_polar(1.0, k * xd);
            }
            for i in 0..2 {
                for j in 0..2 {
                    h[(2 * x + i, 2 * y + j)] = acc[(i, j)] / n as f64;
                }
            }
        }
    }
    h
}

fn check_mass(m: f64) -> Result<()> {
    if !(m >= 0.0 && m.is_finite()) {
        return Err(invalid(format!("mass must be non-negative, got {m}")));
    }
    Ok(())
}

pub struct FreeKernels {
    pub p_m: KernelMatrix,
    pub k_m: KernelMatrix,
}

/// `p_m` and `k_m` at time arguments `(t, t′)`.
pub fn free_kernels(m: f64, lattice: &SpaceTimeLattice, t: f64, t_prime: f64) -> Result<FreeKernels> {
    check_mass(m)?;
    let tau = t - t_prime;
    let g = gamma0_block(lattice);
    let norm = C64::new(1.0 / (2.0 * PI * lattice.a), 0.0);
    let k = free_propagator(lattice, m, tau, false) * &g * norm;
    let p = free_propagator(lattice, m, tau, true) * &g * norm;
    Ok(FreeKernels {
        p_m: KernelMatrix { kind: KernelKind::Pm, t, t_prime, matrix: p },
        k_m: KernelMatrix { kind: KernelKind::Km, t, t_prime, matrix: k },
    })
}

fn orient(propagator: CMat, lattice: &SpaceTimeLattice, orientation: Orientation, tau: f64) -> CMat {
    let supported = match orientation {
        Orientation::Retarded => tau > 0.0,
        Orientation::Advanced => tau < 0.0,
    };
    if !supported {
        return CMat::zeros(lattice.dim(), lattice.dim());
    }
    let sign = match orientation {
        Orientation::Retarded => -1.0,
        Orientation::Advanced => 1.0,
    };
    propagator * gamma0_block(lattice) * (I * C64::new(sign / lattice.a, 0.0))
}

pub fn green_functions(
    m: f64,
    lattice: &SpaceTimeLattice,
    orientation: Orientation,
    t: f64,
    t_prime: f64,
) -> Result<KernelMatrix> {
    check_mass(m)?;
    let tau = t - t_prime;
    let kind = match orientation {
        Orientation::Advanced => KernelKind::Advanced,
        Orientation::Retarded => KernelKind::Retarded,
    };
    let matrix = orient(free_propagator(lattice, m, tau, false), lattice, orientation, tau);
    Ok(KernelMatrix { kind, t, t_prime, matrix })
}

/// Spectral data of the free lattice Hamiltonian, reused across propagations.
struct Spectrum {
    energies: Vec<f64>,
    vectors: CMat,
}

impl Spectrum {
    fn of(h: &CMat) -> Self {
        let (energies, vectors) = hermitian_eigen(h);
        Self { energies, vectors }
    }
}

/// `(e^{−iE_kT} − e^{−iE_jT}) / (E_j − E_k)`, continued to `iT·e^{−iE_jT}` on the diagonal.
fn duhamel_weight(ej: f64, ek: f64, t: f64) -> C64 {
    let delta = ej - ek;
    let mean = 0.5 * (ej + ek);
    let x = 0.5 * delta * t;
    let sinc = if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
    C64::from_polar(1.0, -mean * t) * I * C64::new(t * sinc, 0.0)
}

/// First-order term `D(T) = i∫₀ᵀ P(T−s) γ⁰B P(s) ds`, valid for either sign of `T`.
fn first_order_term(spec: &Spectrum, v: &CMat, t: f64) -> CMat {
    let q = &spec.vectors;
    let vq = q.adjoint() * v * q;
    let n = vq.nrows();
    let weighted = CMat::from_fn(n, n, |j, k| vq[(j, k)] * duhamel_weight(spec.energies[j], spec.energies[k], t));
    q * weighted * q.adjoint()
}

/// `e^{−iHτ}` truncated at `order` in `B`.
pub fn truncated_propagator(
    m: f64,
    lattice: &SpaceTimeLattice,
    b: &Potential,
    tau: f64,
    order: usize,
) -> Result<CMat> {
    check_mass(m)?;
    if order > 1 {
        return Err(Error::Unsupported(format!("perturbation order {order} > 1")));
    }
    if order == 0 {
        return Ok(free_propagator(lattice, m, tau, false));
    }
    let spec = Spectrum::of(&free_hamiltonian(lattice, m));
    truncated_with(&spec, &b.gamma0_b(lattice)?, lattice, m, tau, order)
}

fn truncated_with(spec: &Spectrum, v: &CMat, lattice: &SpaceTimeLattice, m: f64, tau: f64, order: usize) -> Result<CMat> {
    let p = free_propagator(lattice, m, tau, false);
    Ok(if order == 0 { p } else { p + first_order_term(spec, v, tau) })
}

/// Truncated causal Green's function: order 0 is the free kernel, order 1 adds `−s·B·s`.
pub fn perturbation_term(
    order: usize,
    m: f64,
    lattice: &SpaceTimeLattice,
    b: &Potential,
    orientation: Orientation,
    t: f64,
    t_prime: f64,
) -> Result<KernelMatrix> {
    let tau = t - t_prime;
    let propagator = truncated_propagator(m, lattice, b, tau, order)?;
    let kind = match orientation {
        Orientation::Advanced => KernelKind::PerturbedAdvanced,
        Orientation::Retarded => KernelKind::PerturbedRetarded,
    };
    Ok(KernelMatrix { kind, t, t_prime, matrix: orient(propagator, lattice, orientation, tau) })
}

/// Implicit-midpoint evolution of `(i∂̸ + B − m)φ = 0` from `t0` to `t`.
///
/// Each Cayley step `(1 + iKdt/2)⁻¹(1 − iKdt/2)` is applied in the eigenbasis
/// of `K = H − γ⁰B`, which is exact arithmetic for the scheme and avoids
/// `|t − t0|/dt` linear solves.
pub fn cauchy_evolve(
    phi0: &SpinorField,
    b: &Potential,
    m: f64,
    lattice: &SpaceTimeLattice,
    t0: f64,
    t: f64,
) -> Result<SpinorField> {
    check_mass(m)?;
    if phi0.values.len() != lattice.dim() {
        return Err(invalid("initial data does not match the lattice"));
    }
    if t == t0 {
        return Ok(phi0.clone());
    }
    let span = t - t0;
    let steps = (span.abs() / lattice.dt).ceil().max(1.0);
    let dt = span / steps;
    let k = free_hamiltonian(lattice, m) - b.gamma0_b(lattice)?;
    let (vals, vecs) = hermitian_eigen(&k);
    let coeffs = vecs.adjoint() * &phi0.values;
    let evolved = CVec::from_fn(coeffs.len(), |j, _| {
        coeffs[j] * C64::from_polar(1.0, -2.0 * steps * (vals[j] * dt / 2.0).atan())
    });
    let values = vecs * evolved;
    let before = phi0.values.norm();
    let after = values.norm();
    if before > 0.0 && ((after - before) / before).abs() > 1e-4 {
        return Err(Error::Instability(format!("norm drift {:.3e} during evolution", (after - before) / before)));
    }
    Ok(SpinorField { values })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlueResidual {
    /// `‖φ(t) − 2π Σ_y k̃(t;t₀)γ⁰φ(t₀)a‖ / ‖φ(t)‖`.
    pub forward: f64,
    /// Reconstruction of `φ(t₀)` from `φ(t)` with `−i·s̃∨(t₀;t)`.
    pub retarded: f64,
}

pub fn glueing_check(
    phi: &SpinorField,
    b: &Potential,
    m: f64,
    lattice: &SpaceTimeLattice,
    t0: f64,
    t: f64,
    order: usize,
) -> Result<GlueResidual> {
    if order > 1 {
        return Err(Error::Unsupported(format!("glueing beyond first order (order {order})")));
    }
    if t <= t0 {
        return Err(invalid("glueing needs t > t₀"));
    }
    let exact = cauchy_evolve(phi, b, m, lattice, t0, t)?;
    let g = gamma0_block(lattice);
    let a = C64::new(lattice.a, 0.0);

    let spec = Spectrum::of(&free_hamiltonian(lattice, m));
    let v = b.gamma0_b(lattice)?;
    let fwd = truncated_with(&spec, &v, lattice, m, t - t0, order)?;
    let k_tilde = &fwd * &g * C64::new(1.0 / (2.0 * PI * lattice.a), 0.0);
    let glued = k_tilde * &g * &phi.values * (a * C64::new(2.0 * PI, 0.0));
    let forward = (&exact.values - glued).norm() / exact.values.norm();

    let s_adv = orient(truncated_with(&spec, &v, lattice, m, t0 - t, order)?, lattice, Orientation::Advanced, t0 - t);
    let back = s_adv * &g * &exact.values * (-I * a);
    let retarded = (&phi.values - back).norm() / phi.values.norm();
    Ok(GlueResidual { forward, retarded })
}

/// Largest kernel entry outside `|x − y| ≤ |τ| + margin`, relative to the largest entry.
pub fn cone_leakage(kernel: &CMat, lattice: &SpaceTimeLattice, tau: f64, margin: f64) -> f64 {
    let n = lattice.nx;
    let (mut inside, mut outside) = (0.0f64, 0.0f64);
    for x in 0..n {
        for y in 0..n {
            let d = lattice.displacement(lattice.x(x), lattice.x(y)).abs();
            let mut peak = 0.0f64;
            for i in 0..2 {
                for j in 0..2 {
                    peak = peak.max(kernel[(2 * x + i, 2 * y + j)].norm());
                }
            }
            if d > tau.abs() + margin + 1e-9 {
                outside = outside.max(peak);
            } else {
                inside = inside.max(peak);
            }
        }
    }
    if inside == 0.0 {
        return if outside == 0.0 { 0.0 } else { f64::INFINITY };
    }
    outside / inside
}

/// Leakage of `kernel·γ⁰·φ` outside the cone of a Gaussian packet centred at `center`.
pub fn packet_cone_leakage(
    kernel: &CMat,
    lattice: &SpaceTimeLattice,
    packet: &SpinorField,
    center: f64,
    tau: f64,
    margin: f64,
) -> f64 {
    let out = kernel * gamma0_block(lattice) * &packet.values;
    let (mut inside, mut outside) = (0.0f64, 0.0f64);
    for site in 0..lattice.nx {
        let d = lattice.displacement(lattice.x(site), center).abs();
        let v = out[2 * site].norm().max(out[2 * site + 1].norm());
        if d > tau.abs() + margin {
            outside = outside.max(v);
        } else {
            inside = inside.max(v);
        }
    }
    if inside == 0.0 {
        return if outside == 0.0 { 0.0 } else { f64::INFINITY };
    }
    outside / inside
}
