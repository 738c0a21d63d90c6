//! Exact symbolic algebra for the indexed fermionic and bosonic field operators:
//! Wick contraction of time-ordered words, commutators of composite boson
//! fields, Dyson-series bookkeeping of lower indices and loop coefficients.
//!
//! Kernels are opaque [`KernelToken`]s. Coefficients are Gaussian rationals
//! times a power of `π`, optionally times the surd `√(2|λ|)`, and are
//! polynomials in the Green's-function parameter `τ`, where
//! `S₀ = τ S₀∧ + (1 − τ) S₀∨`. Nothing in this module uses floating point.
//!
//! Two relations fix all boson algebra: the time-ordered pairing
//! `⟨T In_k(x) Out_l(y)⟩ = i Θ(k > l) S₀(x, y)` and the commutator
//! `[In_k(x), Out_l(y)] = 2i Θ(k > l) (τ S₀∧ − (1 − τ) S₀∨)(x, y)`. The line
//! gate is the strict `k > l`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{invalid, Error, Result};

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn fmt_rat(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// `re + i·im` with rational parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GaussRat {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussRat {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        Self { re, im }
    }

    pub fn zero() -> Self {
        Self::new(BigRational::zero(), BigRational::zero())
    }

    pub fn one() -> Self {
        Self::real(BigRational::one())
    }

    pub fn i() -> Self {
        Self::new(BigRational::zero(), BigRational::one())
    }

    pub fn real(re: BigRational) -> Self {
        Self::new(re, BigRational::zero())
    }

    pub fn int(v: i64) -> Self {
        Self::real(rat(v, 1))
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn scale(&self, q: &BigRational) -> Self {
        Self::new(&self.re * q, &self.im * q)
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::one(), |acc, _| &acc * self)
    }

    /// `self / other`, or `None` for division by zero.
    pub fn checked_div(&self, other: &Self) -> Option<Self> {
        let den = &other.re * &other.re + &other.im * &other.im;
        if den.is_zero() {
            return None;
        }
        let conj = Self::new(other.re.clone(), -other.im.clone());
        Some((self * &conj).scale(&den.recip()))
    }
}

impl std::ops::Add for &GaussRat {
    type Output = GaussRat;
    fn add(self, o: &GaussRat) -> GaussRat {
        GaussRat::new(&self.re + &o.re, &self.im + &o.im)
    }
}

impl std::ops::Sub for &GaussRat {
    type Output = GaussRat;
    fn sub(self, o: &GaussRat) -> GaussRat {
        GaussRat::new(&self.re - &o.re, &self.im - &o.im)
    }
}

impl std::ops::Mul for &GaussRat {
    type Output = GaussRat;
    fn mul(self, o: &GaussRat) -> GaussRat {
        GaussRat::new(&self.re * &o.re - &self.im * &o.im, &self.re * &o.im + &self.im * &o.re)
    }
}

impl std::ops::Neg for &GaussRat {
    type Output = GaussRat;
    fn neg(self) -> GaussRat {
        GaussRat::new(-self.re.clone(), -self.im.clone())
    }
}

impl fmt::Display for GaussRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.re.is_zero(), self.im.is_zero()) {
            (_, true) => write!(f, "{}", fmt_rat(&self.re)),
            (true, false) => write!(f, "{}i", fmt_rat(&self.im)),
            (false, false) => {
                let sign = if self.im.is_negative() { "-" } else { "+" };
                write!(f, "{}{}{}i", fmt_rat(&self.re), sign, fmt_rat(&self.im.abs()))
            }
        }
    }
}

/// Polynomial in `τ` with Gaussian-rational coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TauPoly(Vec<GaussRat>);

impl TauPoly {
    pub fn zero() -> Self {
        Self(Vec::new())
    }

    pub fn constant(c: GaussRat) -> Self {
        Self(vec![c]).trimmed()
    }

    /// `c₀ + c₁ τ`.
    pub fn linear(c0: GaussRat, c1: GaussRat) -> Self {
        Self(vec![c0, c1]).trimmed()
    }

    pub fn coefficients(&self) -> &[GaussRat] {
        &self.0
    }

    fn trimmed(mut self) -> Self {
        while self.0.last().is_some_and(|c| c.is_zero()) {
            self.0.pop();
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn add(&self, o: &Self) -> Self {
        let len = self.0.len().max(o.0.len());
        let z = GaussRat::zero();
        Self((0..len).map(|k| &*self.0.get(k).unwrap_or(&z) + o.0.get(k).unwrap_or(&z)).collect()).trimmed()
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|c| -c).collect())
    }

    pub fn scale(&self, c: &GaussRat) -> Self {
        Self(self.0.iter().map(|x| x * c).collect()).trimmed()
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        let mut out = vec![GaussRat::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] = &out[i + j] + &(a * b);
            }
        }
        Self(out).trimmed()
    }

    pub fn eval(&self, tau: &BigRational) -> GaussRat {
        let mut acc = GaussRat::zero();
        for c in self.0.iter().rev() {
            acc = &acc.scale(tau) + c;
        }
        acc
    }
}

impl fmt::Display for TauPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| match k {
                0 => format!("({c})"),
                1 => format!("({c})τ"),
                _ => format!("({c})τ^{k}"),
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TokenKind {
    Km,
    /// `(s∧(x,y) γ⁰)^α_β`.
    SRet,
    SAdv,
    S0Ret,
    S0Adv,
    S0,
    K0,
    /// `𝔱^b_{b′}`; indices hold `(b, b′)`.
    Tee,
    /// Fermion-loop kernel `L_ℓ` of arity `ℓ + 1`.
    Loop,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KernelToken {
    pub kind: TokenKind,
    pub args: Vec<String>,
    /// Spinor or lower indices, where the kind uses them.
    pub indices: Vec<i64>,
}

impl KernelToken {
    pub fn new(kind: TokenKind, args: &[&str]) -> Self {
        Self { kind, args: args.iter().map(|s| s.to_string()).collect(), indices: Vec::new() }
    }

    pub fn loop_kernel(args: &[&str]) -> Result<Self> {
        if args.len() < 2 {
            return Err(invalid("L_ℓ needs ℓ + 1 ≥ 2 arguments"));
        }
        Ok(Self::new(TokenKind::Loop, args))
    }

    /// Canonical form: two-point boson Green's functions carry sorted
    /// arguments, using `S₀∧(y,x) = S₀∨(x,y)`. Returns the sign picked up.
    fn canonical(mut self) -> (Self, i64) {
        let swappable = matches!(self.kind, TokenKind::S0Ret | TokenKind::S0Adv | TokenKind::K0);
        if swappable && self.args.len() == 2 && self.args[0] > self.args[1] {
            self.args.swap(0, 1);
            return match self.kind {
                TokenKind::S0Ret => (Self { kind: TokenKind::S0Adv, ..self }, 1),
                TokenKind::S0Adv => (Self { kind: TokenKind::S0Ret, ..self }, 1),
                _ => (self, -1),
            };
        }
        (self, 1)
    }
}

impl fmt::Display for KernelToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            TokenKind::Km => "k_m",
            TokenKind::SRet => "s∧γ⁰",
            TokenKind::SAdv => "s∨γ⁰",
            TokenKind::S0Ret => "S₀∧",
            TokenKind::S0Adv => "S₀∨",
            TokenKind::S0 => "S₀",
            TokenKind::K0 => "K₀",
            TokenKind::Tee => "𝔱",
            TokenKind::Loop => "L",
        };
        write!(f, "{name}({})", self.args.join(","))?;
        if !self.indices.is_empty() {
            let idx: Vec<String> = self.indices.iter().map(|i| i.to_string()).collect();
            write!(f, "[{}]", idx.join(","))?;
        }
        Ok(())
    }
}

/// Structure of one term: a sorted token product, a power of π and the surd `√(2|λ|)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermKey {
    pub tokens: Vec<KernelToken>,
    pub pi: u32,
    pub surd: bool,
}

impl TermKey {
    pub fn scalar() -> Self {
        Self { tokens: Vec::new(), pi: 0, surd: false }
    }

    pub fn of(tokens: Vec<KernelToken>) -> Self {
        let mut tokens = tokens;
        tokens.sort();
        Self { tokens, pi: 0, surd: false }
    }
}

/// Exact linear combination of token products.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSum {
    pub terms: BTreeMap<TermKey, TauPoly>,
}

impl TokenSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn single(key: TermKey, coeff: TauPoly) -> Self {
        let mut s = Self::zero();
        s.add_term(key, coeff);
        s
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, key: TermKey, coeff: TauPoly) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.terms.entry(key.clone()).or_insert_with(TauPoly::zero);
        *entry = entry.add(&coeff);
        if entry.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        Self { terms: self.terms.iter().map(|(k, c)| (k.clone(), c.neg())).collect() }
    }

    pub fn scale(&self, c: &GaussRat) -> Self {
        let mut out = Self::zero();
        for (k, p) in &self.terms {
            out.add_term(k.clone(), p.scale(c));
        }
        out
    }

    /// Multiply by an exact scalar; `surd_sq` is `2|λ|`, needed when two surds meet.
    pub fn scale_exact(&self, s: &Scalar, surd_sq: &BigRational) -> Self {
        let mut out = Self::zero();
        for (k, p) in &self.terms {
            let mut key = k.clone();
            key.pi += s.pi;
            let mut c = s.value.clone();
            if k.surd && s.surd {
                c = c.scale(surd_sq);
                key.surd = false;
            } else {
                key.surd = k.surd || s.surd;
            }
            out.add_term(key, p.scale(&c));
        }
        out
    }

    pub fn depends_on_tau(&self) -> bool {
        self.terms.values().any(|p| p.degree().unwrap_or(0) > 0)
    }

    pub fn eval_tau(&self, tau: &BigRational) -> Self {
        let mut out = Self::zero();
        for (k, p) in &self.terms {
            out.add_term(k.clone(), TauPoly::constant(p.eval(tau)));
        }
        out
    }

    pub fn coefficient(&self, key: &TermKey) -> TauPoly {
        self.terms.get(key).cloned().unwrap_or_else(TauPoly::zero)
    }

    /// `c` such that `self = c · other` term by term, if one exists.
    pub fn ratio_to(&self, other: &Self) -> Option<GaussRat> {
        if self.is_zero() && other.is_zero() {
            return Some(GaussRat::one());
        }
        let mut ratio: Option<GaussRat> = None;
        let keys: BTreeSet<&TermKey> = self.terms.keys().chain(other.terms.keys()).collect();
        for key in keys {
            let a = self.coefficient(key);
            let b = other.coefficient(key);
            let len = a.coefficients().len().max(b.coefficients().len());
            let z = GaussRat::zero();
            for d in 0..len {
                let x = a.coefficients().get(d).unwrap_or(&z);
                let y = b.coefficients().get(d).unwrap_or(&z);
                if y.is_zero() {
                    if !x.is_zero() {
                        return None;
                    }
                    continue;
                }
                let r = x.checked_div(y)?;
                match &ratio {
                    None => ratio = Some(r),
                    Some(prev) if *prev != r => return None,
                    _ => {}
                }
            }
        }
        ratio
    }

    /// Rewrite `c·S₀∨(x,y) − c·S₀∧(x,y)` as `2πi·c·K₀(x,y)`.
    pub fn rewrite_k0(&self) -> Self {
        let mut out = self.clone();
        for (key, coeff) in &self.terms {
            if key.tokens.len() != 1 || key.tokens[0].kind != TokenKind::S0Adv {
                continue;
            }
            let mut ret_key = key.clone();
            ret_key.tokens[0].kind = TokenKind::S0Ret;
            if self.coefficient(&ret_key) != coeff.neg() {
                continue;
            }
            out.terms.remove(key);
            out.terms.remove(&ret_key);
            let mut k0 = key.clone();
            k0.tokens[0].kind = TokenKind::K0;
            k0.pi += 1;
            out.add_term(k0, coeff.scale(&GaussRat::new(BigRational::zero(), rat(2, 1))));
        }
        out
    }
}

impl fmt::Display for TokenSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(k, c)| {
                let mut s = format!("[{c}]");
                if k.pi > 0 {
                    s.push_str(&if k.pi == 1 { "·π".to_string() } else { format!("·π^{}", k.pi) });
                }
                if k.surd {
                    s.push_str("·√(2|λ|)");
                }
                for t in &k.tokens {
                    s.push('·');
                    s.push_str(&t.to_string());
                }
                s
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// `value · π^pi · √(2|λ|)^surd`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scalar {
    pub value: GaussRat,
    pub pi: u32,
    pub surd: bool,
}

impl Scalar {
    pub fn rational(q: BigRational) -> Self {
        Self { value: GaussRat::real(q), pi: 0, surd: false }
    }

    pub fn with_surd(q: BigRational) -> Self {
        Self { value: GaussRat::real(q), pi: 0, surd: true }
    }
}

/// Number of lines `n` and coupling `λ ≠ 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Context {
    pub n: usize,
    pub lambda: BigRational,
}

impl Context {
    pub fn new(n: usize, lambda: BigRational) -> Result<Self> {
        if n == 0 {
            return Err(invalid("need n ≥ 1 lines"));
        }
        if lambda.is_zero() {
            return Err(invalid("coupling λ must be non-zero"));
        }
        Ok(Self { n, lambda })
    }

    /// `2|λ|`, the square of the surd.
    pub fn surd_sq(&self) -> BigRational {
        self.lambda.abs() * rat(2, 1)
    }

    pub fn epsilon(&self) -> BigRational {
        if self.lambda.is_positive() {
            BigRational::one()
        } else {
            -BigRational::one()
        }
    }

    fn n_rat(&self) -> BigRational {
        rat(self.n as i64, 1)
    }

    /// `1/(n√(2|λ|)) = √(2|λ|) / (2|λ| n)`.
    fn inv_n_surd(&self) -> BigRational {
        (self.surd_sq() * self.n_rat()).recip()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymbolKind {
    Fermion,
    FermionDag,
    /// Outgoing boson line `Ḇ_{[l]}`.
    BosonOut,
    /// Incoming boson line `B̲_{[k]}`.
    BosonIn,
    /// The combined field `B̂`.
    BosonCombined,
    /// Kernel-attached averaged incoming boson.
    KernelIn,
    /// Kernel-attached averaged outgoing boson.
    KernelOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SlotRef {
    /// Particle line, counted from 1.
    Line(usize),
    Averaged,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OperatorSymbol {
    pub kind: SymbolKind,
    pub slot: SlotRef,
    pub b: Option<i8>,
    pub tag: String,
    pub spinor: Option<usize>,
}

impl OperatorSymbol {
    pub fn fermion(line: usize, b: i8, tag: &str, spinor: usize) -> Self {
        Self { kind: SymbolKind::Fermion, slot: SlotRef::Line(line), b: Some(b), tag: tag.into(), spinor: Some(spinor) }
    }

    pub fn fermion_dag(line: usize, b: i8, tag: &str, spinor: usize) -> Self {
        Self { kind: SymbolKind::FermionDag, slot: SlotRef::Line(line), b: Some(b), tag: tag.into(), spinor: Some(spinor) }
    }

    pub fn boson_in(line: usize, tag: &str) -> Self {
        Self { kind: SymbolKind::BosonIn, slot: SlotRef::Line(line), b: None, tag: tag.into(), spinor: None }
    }

    pub fn boson_out(line: usize, tag: &str) -> Self {
        Self { kind: SymbolKind::BosonOut, slot: SlotRef::Line(line), b: None, tag: tag.into(), spinor: None }
    }

    pub fn combined(tag: &str) -> Self {
        Self { kind: SymbolKind::BosonCombined, slot: SlotRef::Averaged, b: None, tag: tag.into(), spinor: None }
    }

    pub fn validate(&self) -> Result<()> {
        use SymbolKind::*;
        if self.tag.is_empty() {
            return Err(invalid("operator without spacetime tag"));
        }
        match (self.kind, self.slot) {
            (_, SlotRef::Line(0)) => Err(invalid("lines are counted from 1")),
            (Fermion | FermionDag, SlotRef::Line(_)) => match self.b {
                Some(1) | Some(-1) => Ok(()),
                _ => Err(invalid("fermion operators need a lower index b = ±1")),
            },
            (Fermion | FermionDag, SlotRef::Averaged) => Err(invalid("averaged fermions are not Wick-contracted here")),
            (BosonIn | BosonOut, _) if self.b.is_some() => Err(invalid("boson operators carry no lower index")),
            (BosonIn | BosonOut, _) => Ok(()),
            (BosonCombined | KernelIn | KernelOut, SlotRef::Averaged) if self.b.is_none() => Ok(()),
            _ => Err(invalid(format!("{:?} only exists as an averaged operator", self.kind))),
        }
    }

    fn is_fermionic(&self) -> bool {
        matches!(self.kind, SymbolKind::Fermion | SymbolKind::FermionDag)
    }

    fn line(&self) -> usize {
        match self.slot {
            SlotRef::Line(l) => l,
            SlotRef::Averaged => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorWord {
    pub symbols: Vec<OperatorSymbol>,
    pub coefficient: GaussRat,
    pub time_ordered: bool,
}

impl OperatorWord {
    pub fn time_ordered(symbols: Vec<OperatorSymbol>) -> Self {
        Self { symbols, coefficient: GaussRat::one(), time_ordered: true }
    }

    pub fn identity() -> Self {
        Self::time_ordered(Vec::new())
    }

    /// Parses one operator per line as `kind slot b tag [spinor]`, in word order.
    ///
    /// Kinds are `psi`, `psidag`, `bout`, `bin`, `bhat`, `kin`, `kout`; the slot
    /// is a line number or `avg`; `b` is `+1`, `-1` or `-` for none. Blank
    /// lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut symbols = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| invalid(format!("word line {}: {what}: {raw:?}", i + 1));
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() < 4 || f.len() > 5 {
                return Err(bad("expected `kind slot b tag [spinor]`"));
            }
            let kind = match f[0] {
                "psi" => SymbolKind::Fermion,
                "psidag" => SymbolKind::FermionDag,
                "bout" => SymbolKind::BosonOut,
                "bin" => SymbolKind::BosonIn,
                "bhat" => SymbolKind::BosonCombined,
                "kin" => SymbolKind::KernelIn,
                "kout" => SymbolKind::KernelOut,
                _ => return Err(bad("unknown kind")),
            };
            let slot = match f[1] {
                "avg" => SlotRef::Averaged,
                s => SlotRef::Line(s.parse().map_err(|_| bad("slot must be a line number or avg"))?),
            };
            let b = match f[2] {
                "-" => None,
                "+1" | "1" => Some(1),
                "-1" => Some(-1),
                _ => return Err(bad("b must be +1, -1 or -")),
            };
            let spinor = match f.get(4) {
                Some(s) => Some(s.parse().map_err(|_| bad("spinor must be a non-negative integer"))?),
                None if matches!(kind, SymbolKind::Fermion | SymbolKind::FermionDag) => Some(0),
                None => None,
            };
            let sym = OperatorSymbol { kind, slot, b, tag: f[3].to_string(), spinor };
            sym.validate().map_err(|e| bad(&e.to_string()))?;
            symbols.push(sym);
        }
        Ok(Self::time_ordered(symbols))
    }
}

/// Expectation value as a token sum, with the pairings that contribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VevResult {
    pub sum: TokenSum,
    /// Each entry lists `(i, j)` word positions, `i < j`, of one complete contraction.
    pub pairings: Vec<Vec<(usize, usize)>>,
}

/// Value of the contraction of the symbols at positions `i < j`.
fn pair_value(a: &OperatorSymbol, b: &OperatorSymbol) -> Option<(GaussRat, KernelToken, Option<KernelToken>)> {
    use SymbolKind::*;
    match (a.kind, b.kind) {
        (Fermion, FermionDag) | (FermionDag, Fermion) => {
            let (psi, dag, sign) = if a.kind == Fermion { (a, b, 1) } else { (b, a, -1) };
            let (bp, bd) = (psi.b?, dag.b?);
            if psi.line() != dag.line() || bp == bd {
                return None;
            }
            let mut s = KernelToken::new(TokenKind::SRet, &[&psi.tag, &dag.tag]);
            s.indices = vec![psi.spinor.unwrap_or(0) as i64, dag.spinor.unwrap_or(0) as i64];
            let mut t = KernelToken::new(TokenKind::Tee, &[]);
            t.indices = vec![bp as i64, bd as i64];
            Some((GaussRat::i().scale(&rat(sign, 1)), s, Some(t)))
        }
        (BosonIn, BosonOut) | (BosonOut, BosonIn) => {
            let (inn, out) = if a.kind == BosonIn { (a, b) } else { (b, a) };
            if inn.line() > out.line() {
                Some((GaussRat::i(), KernelToken::new(TokenKind::S0, &[&inn.tag, &out.tag]), None))
            } else {
                None
            }
        }
        _ => None,
    }
}

fn contract(
    symbols: &[OperatorSymbol],
    remaining: &[usize],
    acc_coeff: GaussRat,
    acc_tokens: &mut Vec<KernelToken>,
    acc_pairs: &mut Vec<(usize, usize)>,
    out: &mut TokenSum,
    pairings: &mut Vec<Vec<(usize, usize)>>,
) {
    if remaining.is_empty() {
        out.add_term(TermKey::of(acc_tokens.clone()), TauPoly::constant(acc_coeff));
        let mut p = acc_pairs.clone();
        p.sort();
        pairings.push(p);
        return;
    }
    let first = remaining[0];
    let mut fermions_between = 0;
    for idx in 1..remaining.len() {
        let j = remaining[idx];
        if let Some((c, tok, extra)) = pair_value(&symbols[first], &symbols[j]) {
            let sign = if symbols[first].is_fermionic() && fermions_between % 2 == 1 { -1 } else { 1 };
            let coeff = (&acc_coeff * &c).scale(&rat(sign, 1));
            let rest: Vec<usize> = remaining.iter().copied().filter(|&r| r != first && r != j).collect();
            let pushed = 1 + usize::from(extra.is_some());
            acc_tokens.push(tok);
            if let Some(t) = extra {
                acc_tokens.push(t);
            }
            acc_pairs.push((first, j));
            contract(symbols, &rest, coeff, acc_tokens, acc_pairs, out, pairings);
            acc_pairs.pop();
            for _ in 0..pushed {
                acc_tokens.pop();
            }
        }
        if symbols[j].is_fermionic() {
            fermions_between += 1;
        }
    }
}

/// Full Wick contraction of a time-ordered word of line-indexed operators.
pub fn normal_order_vev(word: &OperatorWord) -> Result<VevResult> {
    if !word.time_ordered {
        return Err(invalid("only time-ordered words have a vacuum expectation rule"));
    }
    for s in &word.symbols {
        s.validate()?;
        if s.slot == SlotRef::Averaged {
            return Err(invalid("averaged operators need a line context; use normal_order_vev_in"));
        }
    }
    let mut sum = TokenSum::zero();
    let mut pairings = Vec::new();
    let positions: Vec<usize> = (0..word.symbols.len()).collect();
    if positions.len() % 2 == 0 {
        contract(
            &word.symbols,
            &positions,
            word.coefficient.clone(),
            &mut Vec::new(),
            &mut Vec::new(),
            &mut sum,
            &mut pairings,
        );
    }
    pairings.sort();
    Ok(VevResult { sum, pairings })
}

/// As [`normal_order_vev`], first expanding `B̂` and averaged bosons into lines.
pub fn normal_order_vev_in(word: &OperatorWord, ctx: &Context) -> Result<VevResult> {
    if !word.time_ordered {
        return Err(invalid("only time-ordered words have a vacuum expectation rule"));
    }
    let mut expansions: Vec<(Scalar, Vec<OperatorSymbol>)> =
        vec![(Scalar { value: word.coefficient.clone(), pi: 0, surd: false }, Vec::new())];
    for s in &word.symbols {
        s.validate()?;
        let options: Vec<(Scalar, OperatorSymbol)> = match (s.kind, s.slot) {
            (SymbolKind::BosonCombined, _) => expand_species(Species::Combined, ctx)?
                .into_iter()
                .map(|(c, ls)| (c, ls.symbol(&s.tag)))
                .collect(),
            (SymbolKind::BosonIn, SlotRef::Averaged) => {
                expand_species(Species::InAvg, ctx)?.into_iter().map(|(c, ls)| (c, ls.symbol(&s.tag))).collect()
            }
            (SymbolKind::BosonOut, SlotRef::Averaged) => {
                expand_species(Species::OutAvg, ctx)?.into_iter().map(|(c, ls)| (c, ls.symbol(&s.tag))).collect()
            }
            (SymbolKind::KernelIn | SymbolKind::KernelOut, _) => {
                return Err(invalid("kernel-attached bosons have no vacuum pairing rule"))
            }
            _ => {
                if let SlotRef::Line(l) = s.slot {
                    if l > ctx.n {
                        return Err(invalid(format!("line {l} exceeds n = {}", ctx.n)));
                    }
                }
                vec![(Scalar::rational(BigRational::one()), s.clone())]
            }
        };
        let mut next = Vec::with_capacity(expansions.len() * options.len());
        for (c, syms) in &expansions {
            for (oc, os) in &options {
                let mut v = syms.clone();
                v.push(os.clone());
                next.push((mul_scalar(c, oc, ctx), v));
            }
        }
        expansions = next;
    }
    let mut sum = TokenSum::zero();
    let mut pairings = BTreeSet::new();
    for (c, syms) in expansions {
        let r = normal_order_vev(&OperatorWord::time_ordered(syms))?;
        sum = sum.add(&r.sum.scale_exact(&c, &ctx.surd_sq()));
        pairings.extend(r.pairings);
    }
    Ok(VevResult { sum, pairings: pairings.into_iter().collect() })
}

fn mul_scalar(a: &Scalar, b: &Scalar, ctx: &Context) -> Scalar {
    let mut value = &a.value * &b.value;
    let surd = if a.surd && b.surd {
        value = value.scale(&ctx.surd_sq());
        false
    } else {
        a.surd || b.surd
    };
    Scalar { value, pi: a.pi + b.pi, surd }
}

/// For `p` incoming operators on lines `ks` and `p` outgoing on lines `ls`,
/// every `σ` (as `σ[j]` = incoming partner of outgoing `j`) with a non-zero pairing.
pub fn boson_pairing_permutations(ks: &[usize], ls: &[usize]) -> Result<Vec<Vec<usize>>> {
    if ks.len() != ls.len() {
        return Err(invalid("need equally many incoming and outgoing operators"));
    }
    let p = ks.len();
    let mut symbols: Vec<OperatorSymbol> =
        ks.iter().enumerate().map(|(j, &k)| OperatorSymbol::boson_in(k, &format!("x{}", j + 1))).collect();
    symbols.extend(ls.iter().enumerate().map(|(j, &l)| OperatorSymbol::boson_out(l, &format!("y{}", j + 1))));
    let r = normal_order_vev(&OperatorWord::time_ordered(symbols))?;
    let mut perms: Vec<Vec<usize>> = r
        .pairings
        .iter()
        .map(|pairs| {
            let mut sigma = vec![0; p];
            for &(i, j) in pairs {
                sigma[j - p] = i;
            }
            sigma
        })
        .collect();
    perms.sort();
    Ok(perms)
}

/// Boson species entering commutators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Species {
    In(usize),
    Out(usize),
    /// `√2/(n√|λ|) Σ_k In_k`.
    InAvg,
    /// `√|λ|/(n√2) Σ_k Out_k`.
    OutAvg,
    /// `B̂ = (1/(n√(2|λ|))) Σ_k (2 In_k + λ Out_k)`.
    Combined,
    KernelIn,
    KernelOut,
}

impl Species {
    fn is_kernel(&self) -> bool {
        matches!(self, Species::KernelIn | Species::KernelOut)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LineSpecies {
    In(usize),
    Out(usize),
}

impl LineSpecies {
    fn symbol(&self, tag: &str) -> OperatorSymbol {
        match *self {
            LineSpecies::In(k) => OperatorSymbol::boson_in(k, tag),
            LineSpecies::Out(l) => OperatorSymbol::boson_out(l, tag),
        }
    }
}

fn expand_species(s: Species, ctx: &Context) -> Result<Vec<(Scalar, LineSpecies)>> {
    let check = |l: usize| {
        if l == 0 || l > ctx.n {
            Err(invalid(format!("line {l} outside 1..={}", ctx.n)))
        } else {
            Ok(())
        }
    };
    let lines = 1..=ctx.n;
    Ok(match s {
        Species::In(k) => {
            check(k)?;
            vec![(Scalar::rational(BigRational::one()), LineSpecies::In(k))]
        }
        Species::Out(l) => {
            check(l)?;
            vec![(Scalar::rational(BigRational::one()), LineSpecies::Out(l))]
        }
        Species::InAvg => {
            // √2/(n√|λ|) = 2/(n√(2|λ|)).
            let c = ctx.inv_n_surd() * rat(2, 1);
            lines.map(|k| (Scalar::with_surd(c.clone()), LineSpecies::In(k))).collect()
        }
        Species::OutAvg => {
            // √|λ|/(n√2) = |λ|/(n√(2|λ|)).
            let c = ctx.inv_n_surd() * ctx.lambda.abs();
            lines.map(|k| (Scalar::with_surd(c.clone()), LineSpecies::Out(k))).collect()
        }
        Species::Combined => {
            let base = ctx.inv_n_surd();
            let mut v = Vec::new();
            for k in lines {
                v.push((Scalar::with_surd(&base * rat(2, 1)), LineSpecies::In(k)));
                v.push((Scalar::with_surd(&base * &ctx.lambda), LineSpecies::Out(k)));
            }
            v
        }
        Species::KernelIn | Species::KernelOut => {
            return Err(invalid("kernel-attached species have no line expansion"));
        }
    })
}

fn green_token(kind: TokenKind, x: &str, y: &str) -> (KernelToken, i64) {
    KernelToken::new(kind, &[x, y]).canonical()
}

/// `[A(x), B(y)]` for two line species.
fn line_commutator(a: LineSpecies, x: &str, b: LineSpecies, y: &str) -> TokenSum {
    // [In_k(x), Out_l(y)] = 2iΘ(k>l)(τ S₀∧(x,y) − (1−τ) S₀∨(x,y)), and the
    // reversed pair follows by antisymmetry.
    let (k, l, u, v, sign) = match (a, b) {
        (LineSpecies::In(k), LineSpecies::Out(l)) => (k, l, x, y, 1),
        (LineSpecies::Out(l), LineSpecies::In(k)) => (k, l, y, x, -1),
        _ => return TokenSum::zero(),
    };
    if k <= l {
        return TokenSum::zero();
    }
    let two_i = GaussRat::new(BigRational::zero(), rat(2 * sign, 1));
    let (ret, s_ret) = green_token(TokenKind::S0Ret, u, v);
    let (adv, s_adv) = green_token(TokenKind::S0Adv, u, v);
    let mut out = TokenSum::zero();
    // τ·S₀∧ and −(1−τ)·S₀∨ = (−1 + τ)·S₀∨.
    out.add_term(
        TermKey::of(vec![ret]),
        TauPoly::linear(GaussRat::zero(), GaussRat::one()).scale(&two_i.scale(&rat(s_ret, 1))),
    );
    out.add_term(
        TermKey::of(vec![adv]),
        TauPoly::linear(GaussRat::int(-1), GaussRat::one()).scale(&two_i.scale(&rat(s_adv, 1))),
    );
    out
}

/// Linear combination of species at one spacetime tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearCombination {
    pub terms: Vec<(GaussRat, Species)>,
    pub tag: String,
}

impl LinearCombination {
    pub fn single(species: Species, tag: &str) -> Self {
        Self { terms: vec![(GaussRat::one(), species)], tag: tag.into() }
    }
}

fn species_commutator(a: Species, x: &str, b: Species, y: &str, ctx: &Context) -> Result<TokenSum> {
    if a.is_kernel() && b.is_kernel() {
        return Ok(TokenSum::zero());
    }
    let as_field = |s: Species, other: Species| -> Result<Species> {
        match s {
            Species::KernelIn | Species::KernelOut if other != Species::Combined => Err(invalid(format!(
                "no commutation rule declared between {s:?} and {other:?}"
            ))),
            Species::KernelIn => Ok(Species::InAvg),
            Species::KernelOut => Ok(Species::OutAvg),
            _ => Ok(s),
        }
    };
    let (a, b) = (as_field(a, b)?, as_field(b, a)?);
    let mut out = TokenSum::zero();
    for (ca, la) in expand_species(a, ctx)? {
        for (cb, lb) in expand_species(b, ctx)? {
            let c = mul_scalar(&ca, &cb, ctx);
            out = out.add(&line_commutator(la, x, lb, y).scale_exact(&c, &ctx.surd_sq()));
        }
    }
    Ok(out)
}

/// Bilinear commutator `[A(x), B(y)]`, collected exactly and with the `K₀` rewrite applied.
pub fn commutator(a: &LinearCombination, b: &LinearCombination, ctx: &Context) -> Result<TokenSum> {
    if a.tag.is_empty() || b.tag.is_empty() {
        return Err(invalid("commutator arguments need spacetime tags"));
    }
    let mut out = TokenSum::zero();
    for (ca, sa) in &a.terms {
        for (cb, sb) in &b.terms {
            let t = species_commutator(*sa, &a.tag, *sb, &b.tag, ctx)?;
            out = out.add(&t.scale(&(ca * cb)));
        }
    }
    Ok(out.rewrite_k0())
}

/// The τ-weighted retarded/advanced combination `i(p·S₀∧ + q·S₀∨)` with `p`, `q` linear in τ.
fn green_combination(ret: TauPoly, adv: TauPoly, factor: &GaussRat) -> TokenSum {
    let mut out = TokenSum::zero();
    out.add_term(TermKey::of(vec![KernelToken::new(TokenKind::S0Ret, &["x", "y"])]), ret.scale(factor));
    out.add_term(TermKey::of(vec![KernelToken::new(TokenKind::S0Adv, &["x", "y"])]), adv.scale(factor));
    out
}

/// `τ`, `1 − τ` and friends.
fn tau() -> TauPoly {
    TauPoly::linear(GaussRat::zero(), GaussRat::one())
}

fn one_minus_tau() -> TauPoly {
    TauPoly::linear(GaussRat::one(), GaussRat::int(-1))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommutatorEntry {
    pub name: String,
    pub left: Species,
    pub right: Species,
    /// Value derived from the line relations at this `n`.
    pub derived: TokenSum,
    /// The stated finite-`n` form.
    pub stated: TokenSum,
    /// `c` with `derived = c · stated`, if the two are proportional.
    pub ratio: Option<GaussRat>,
}

impl CommutatorEntry {
    pub fn matches(&self) -> bool {
        self.derived == self.stated
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommutatorTable {
    pub n: usize,
    pub lambda: BigRational,
    pub entries: Vec<CommutatorEntry>,
}

fn stated_forms(ctx: &Context, factor: &BigRational) -> Vec<(String, Species, Species, TokenSum)> {
    let i_f = GaussRat::new(BigRational::zero(), factor.clone());
    let k0 = {
        let mut key = TermKey::of(vec![KernelToken::new(TokenKind::K0, &["x", "y"])]);
        key.pi = 1;
        TokenSum::single(key, TauPoly::constant(GaussRat::real(-(ctx.epsilon() * rat(2, 1) * factor))))
    };
    let cc4 = green_combination(tau(), one_minus_tau().neg(), &i_f);
    let cc5 = green_combination(one_minus_tau(), tau().neg(), &i_f);
    vec![
        ("[B̂(x),B̂(y)]".into(), Species::Combined, Species::Combined, k0),
        ("[Bin(x),B̂(y)]".into(), Species::KernelIn, Species::Combined, cc4),
        ("[Bout(x),B̂(y)]".into(), Species::KernelOut, Species::Combined, cc5),
        ("[Bin(x),Bout(y)]".into(), Species::KernelIn, Species::KernelOut, TokenSum::zero()),
        ("[Bin(x),Bin(y)]".into(), Species::KernelIn, Species::KernelIn, TokenSum::zero()),
        ("[Bout(x),Bout(y)]".into(), Species::KernelOut, Species::KernelOut, TokenSum::zero()),
    ]
}

fn build_table(ctx: &Context, factor: &BigRational, derive: impl Fn(Species, Species) -> Result<TokenSum>) -> Result<Vec<CommutatorEntry>> {
    stated_forms(ctx, factor)
        .into_iter()
        .map(|(name, left, right, stated)| {
            let derived = derive(left, right)?;
            let ratio = derived.ratio_to(&stated);
            Ok(CommutatorEntry { name, left, right, derived, stated, ratio })
        })
        .collect()
}

/// The finite-`n` commutator table, with stated forms carrying `(n−1)/n`.
pub fn effective_commutators(ctx: &Context) -> Result<CommutatorTable> {
    let factor = rat(ctx.n as i64 - 1, ctx.n as i64);
    let entries = build_table(ctx, &factor, |l, r| {
        commutator(&LinearCombination::single(l, "x"), &LinearCombination::single(r, "y"), ctx)
    })?;
    Ok(CommutatorTable { n: ctx.n, lambda: ctx.lambda.clone(), entries })
}

/// `n → ∞` limits. Every coefficient is `A + B/n`; it is fitted exactly from
/// `n = 2, 3` and confirmed at `n = 5`.
pub fn limit_commutators(lambda: &BigRational) -> Result<CommutatorTable> {
    let at = |n: usize| -> Result<BTreeMap<(Species, Species), TokenSum>> {
        let ctx = Context::new(n, lambda.clone())?;
        let mut m = BTreeMap::new();
        for (_, l, r, _) in stated_forms(&ctx, &BigRational::one()) {
            m.insert((l, r), commutator(&LinearCombination::single(l, "x"), &LinearCombination::single(r, "y"), &ctx)?);
        }
        Ok(m)
    };
    let (f2, f3, f5) = (at(2)?, at(3)?, at(5)?);
    let ctx = Context::new(1, lambda.clone())?;
    let entries = build_table(&ctx, &BigRational::one(), |l, r| {
        let (a, b) = (&f2[&(l, r)], &f3[&(l, r)]);
        // f(n) = A + B/n: B = 6(f2 − f3), A = 3f3 − 2f2.
        let bcoef = a.add(&b.neg()).scale(&GaussRat::int(6));
        let acoef = b.scale(&GaussRat::int(3)).add(&a.scale(&GaussRat::int(-2)));
        let predicted = acoef.add(&bcoef.scale(&GaussRat::real(rat(1, 5))));
        if predicted != f5[&(l, r)] {
            return Err(Error::Consistency(format!("{l:?},{r:?} is not of the form A + B/n")));
        }
        Ok(acoef)
    })?;
    Ok(CommutatorTable { n: 0, lambda: lambda.clone(), entries })
}

/// One interaction vertex of the Dyson series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Vertex {
    /// `Ψ†_{[k,b]} γ⁰ B̲_{[k]} Ψ_{[k,−b]}`: keeps the line's lower index.
    Absorption { line: usize, b: i8 },
    /// `λ Ψ†_{[l,−1]} γ⁰ Ḇ_{[l]} Ψ_{[l,−1]}`: moves the line from `b = −1` to `b = +1`.
    Emission { line: usize },
}

impl Vertex {
    /// Lower index read from the line and the one written back.
    fn indices(&self) -> (i8, i8) {
        match *self {
            Vertex::Absorption { b, .. } => (-b, -b),
            Vertex::Emission { .. } => (-1, 1),
        }
    }

    fn line(&self) -> usize {
        match *self {
            Vertex::Absorption { line, .. } | Vertex::Emission { line } => line,
        }
    }

    fn symbols(&self, tag: &str) -> Vec<OperatorSymbol> {
        let mk = |kind: SymbolKind, line: usize, b: Option<i8>, spinor: Option<usize>| OperatorSymbol {
            kind,
            slot: SlotRef::Line(line),
            b,
            tag: tag.into(),
            spinor,
        };
        match *self {
            Vertex::Absorption { line, b } => vec![
                mk(SymbolKind::FermionDag, line, Some(b), Some(0)),
                mk(SymbolKind::BosonIn, line, None, None),
                mk(SymbolKind::Fermion, line, Some(-b), Some(0)),
            ],
            Vertex::Emission { line } => vec![
                mk(SymbolKind::FermionDag, line, Some(-1), Some(0)),
                mk(SymbolKind::BosonOut, line, None, None),
                mk(SymbolKind::Fermion, line, Some(-1), Some(0)),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HamiltonianSpec {
    pub lines: usize,
    pub lambda: BigRational,
    pub absorption: bool,
    pub emission: bool,
    /// Lower index of every line before the interaction, `−1` for no outgoing boson.
    pub initial: Vec<i8>,
}

impl HamiltonianSpec {
    pub fn new(lines: usize, lambda: BigRational) -> Self {
        Self { lines, lambda, absorption: true, emission: true, initial: vec![-1; lines] }
    }

    fn vertices(&self) -> Vec<Vertex> {
        let mut v = Vec::new();
        for line in 1..=self.lines {
            if self.absorption {
                v.push(Vertex::Absorption { line, b: 1 });
                v.push(Vertex::Absorption { line, b: -1 });
            }
            if self.emission {
                v.push(Vertex::Emission { line });
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DysonTerm {
    /// Vertices from the latest time (leftmost) to the earliest.
    pub vertices: Vec<Vertex>,
    pub word: OperatorWord,
    /// `(−i)^order λ^{emissions}`, or zero when a vertex meets the wrong lower index.
    pub coefficient: GaussRat,
    pub final_indices: Vec<i8>,
    /// Lower index written on each line by a creation operator, in application order.
    pub created: Vec<(usize, i8)>,
}

/// Time-ordered exponential to the given order as simplex-ordered words.
pub fn dyson_expand(spec: &HamiltonianSpec, order: usize) -> Result<Vec<DysonTerm>> {
    if order > 2 {
        return Err(Error::Unsupported(format!("Dyson order {order} > 2")));
    }
    if spec.initial.len() != spec.lines || spec.initial.iter().any(|&b| b != 1 && b != -1) {
        return Err(invalid("need one initial lower index ±1 per line"));
    }
    let vertices = spec.vertices();
    let mut sequences: Vec<Vec<Vertex>> = vec![Vec::new()];
    for _ in 0..order {
        sequences = sequences
            .into_iter()
            .flat_map(|s| {
                vertices.iter().map(move |v| {
                    let mut t = s.clone();
                    t.push(*v);
                    t
                })
            })
            .collect();
    }
    let minus_i = GaussRat::new(BigRational::zero(), -BigRational::one());
    let mut out = Vec::new();
    for seq in sequences {
        let mut indices = spec.initial.clone();
        let mut created = Vec::new();
        let mut consistent = true;
        // The rightmost vertex (earliest time) acts first.
        for v in seq.iter().rev() {
            let (read, write) = v.indices();
            let slot = &mut indices[v.line() - 1];
            if *slot != read {
                consistent = false;
            }
            *slot = write;
            created.push((v.line(), write));
        }
        let emissions = seq.iter().filter(|v| matches!(v, Vertex::Emission { .. })).count() as u32;
        let mut coefficient = &minus_i.pow(order as u32) * &GaussRat::real(num_traits::pow(spec.lambda.clone(), emissions as usize));
        if !consistent {
            coefficient = GaussRat::zero();
        }
        let symbols: Vec<OperatorSymbol> =
            seq.iter().enumerate().flat_map(|(j, v)| v.symbols(&format!("t{}", j + 1))).collect();
        let word = OperatorWord { symbols, coefficient: coefficient.clone(), time_ordered: true };
        out.push(DysonTerm { vertices: seq, word, coefficient, final_indices: indices, created });
    }
    Ok(out)
}

/// Loop coefficient `Σ_{p=1}^n ℓ p^ℓ / n^{ℓ+1}` and its limit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopCoefficient {
    pub ell: u32,
    /// `None` is the `n → ∞` limit.
    pub n: Option<u64>,
    pub value: BigRational,
    /// The limit coefficient written in the `n → ∞` statement.
    pub stated_limit: BigRational,
    /// True when this is the limit and it differs from the stated value.
    pub limit_discrepancy: bool,
}

pub fn loop_coefficient(ell: u32, n: Option<u64>) -> Result<LoopCoefficient> {
    if ell == 0 {
        return Err(invalid("loop order ℓ must be at least 1"));
    }
    let value = match n {
        Some(0) => return Err(invalid("n must be positive")),
        Some(n) => {
            let nb = BigInt::from(n);
            let num: BigInt = (1..=n).map(|p| num_traits::pow(BigInt::from(p), ell as usize)).sum::<BigInt>() * BigInt::from(ell);
            BigRational::new(num, num_traits::pow(nb, ell as usize + 1))
        }
        None => BigRational::new(BigInt::from(ell), BigInt::from(ell + 1)),
    };
    let stated_limit = BigRational::one();
    let limit_discrepancy = n.is_none() && value != stated_limit;
    Ok(LoopCoefficient { ell, n, value, stated_limit, limit_discrepancy })
}
