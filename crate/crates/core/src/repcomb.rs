//! Exact combinatorics of U(n) acting on tensor powers of `C^n`.
//!
//! Irreducible components of the p-fold tensor power are labelled by Young
//! diagrams with p boxes and at most n rows. The multiplicity of a component
//! is `p!/∏ hooks`, its dimension `∏ n-entries/∏ hooks`, where the n-entry of
//! cell (i, j) is `n + j − i`. The fluctuation sum collects `p!/∏ n-entries`
//! over all diagrams; every quantity here is an exact big rational.

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use std::fmt;

use crate::error::{invalid, Error, Result};

/// Integer partition `λ₁ ≥ λ₂ ≥ … ≥ λ_r ≥ 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct YoungDiagram {
    rows: Vec<usize>,
}

impl YoungDiagram {
    pub fn new(rows: Vec<usize>) -> Result<Self> {
        if rows.is_empty() {
            return Err(invalid("a Young diagram needs at least one row"));
        }
        if rows.iter().any(|&r| r == 0) {
            return Err(invalid("Young diagram rows must be positive"));
        }
        if rows.windows(2).any(|w| w[0] < w[1]) {
            return Err(invalid(format!("rows {rows:?} are not non-increasing")));
        }
        Ok(Self { rows })
    }

    /// Single column of `k` boxes (the sign representation).
    pub fn column(k: usize) -> Self {
        Self { rows: vec![1; k] }
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn box_count(&self) -> usize {
        self.rows.iter().sum()
    }

    pub fn is_column(&self) -> bool {
        self.rows.iter().all(|&r| r == 1)
    }

    /// Conjugate partition (rows and columns exchanged).
    pub fn transpose(&self) -> Self {
        let cols = (0..self.rows[0])
            .map(|j| self.rows.iter().filter(|&&r| r > j).count())
            .collect();
        Self { rows: cols }
    }
}

impl fmt::Display for YoungDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.rows.iter().map(|r| r.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Per-cell hook lengths, same shape as the diagram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HookTable {
    pub rows: Vec<Vec<u64>>,
}

impl HookTable {
    pub fn product(&self) -> BigUint {
        self.rows.iter().flatten().fold(BigUint::one(), |acc, &h| acc * h)
    }

    pub fn transpose(&self) -> HookTable {
        let width = self.rows[0].len();
        let rows = (0..width)
            .map(|j| self.rows.iter().filter(|r| r.len() > j).map(|r| r[j]).collect())
            .collect();
        HookTable { rows }
    }
}

/// Partitions of `p` with at most `max_rows` parts, in reverse-lexicographic order.
pub fn enumerate_young(p: usize, max_rows: usize) -> Result<Vec<YoungDiagram>> {
    if p == 0 || max_rows == 0 {
        return Err(invalid("enumerate_young needs p ≥ 1 and max_rows ≥ 1"));
    }
    let mut out = Vec::new();
    let mut current = Vec::new();
    partitions_into(p, p, max_rows, &mut current, &mut out);
    Ok(out)
}

fn partitions_into(
    remaining: usize,
    largest: usize,
    rows_left: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<YoungDiagram>,
) {
    if remaining == 0 {
        out.push(YoungDiagram { rows: current.clone() });
        return;
    }
    if rows_left == 0 {
        return;
    }
    for part in (1..=largest.min(remaining)).rev() {
        // The remaining rows can hold at most part·rows_left boxes.
        if part * rows_left < remaining {
            break;
        }
        current.push(part);
        partitions_into(remaining - part, part, rows_left - 1, current, out);
        current.pop();
    }
}

pub fn hook_lengths(lambda: &YoungDiagram) -> HookTable {
    let transposed = lambda.transpose();
    let rows = lambda
        .rows
        .iter()
        .enumerate()
        .map(|(i, &len)| {
            (0..len)
                .map(|j| {
                    let arm = len - j - 1;
                    let leg = transposed.rows[j] - i - 1;
                    (arm + leg + 1) as u64
                })
                .collect()
        })
        .collect();
    HookTable { rows }
}

pub fn factorial(p: usize) -> BigUint {
    (1..=p as u64).fold(BigUint::one(), |acc, k| acc * k)
}

fn exact_quotient(num: BigUint, den: BigUint, what: &str) -> Result<BigUint> {
    let (q, r) = num.div_rem(&den);
    if !r.is_zero() {
        return Err(Error::Consistency(format!("{what}: quotient is not integral")));
    }
    Ok(q)
}

/// Multiplicity of the irreducible component `λ` in the tensor power.
pub fn multiplicity(lambda: &YoungDiagram) -> Result<BigUint> {
    exact_quotient(
        factorial(lambda.box_count()),
        hook_lengths(lambda).product(),
        &format!("multiplicity of {lambda}"),
    )
}

/// Table of `n + j − i` (1-based row i, column j).
pub fn n_entries(lambda: &YoungDiagram, n: usize) -> Result<Vec<Vec<u64>>> {
    if lambda.num_rows() > n {
        return Err(Error::Domain(format!(
            "{lambda} has {} rows, exceeding n = {n}",
            lambda.num_rows()
        )));
    }
    Ok(lambda
        .rows
        .iter()
        .enumerate()
        .map(|(i, &len)| (0..len).map(|j| (n + j - i) as u64).collect())
        .collect())
}

/// The n-entry table rendered with symbolic `n`, e.g. `n+1` or `n-2`.
pub fn n_entries_symbolic(lambda: &YoungDiagram) -> Vec<Vec<String>> {
    lambda
        .rows
        .iter()
        .enumerate()
        .map(|(i, &len)| {
            (0..len)
                .map(|j| {
                    let shift = j as i64 - i as i64;
                    match shift {
                        0 => "n".to_string(),
                        s if s > 0 => format!("n+{s}"),
                        s => format!("n-{}", -s),
                    }
                })
                .collect()
        })
        .collect()
}

fn n_entry_product(lambda: &YoungDiagram, n: usize) -> Result<BigUint> {
    Ok(n_entries(lambda, n)?.iter().flatten().fold(BigUint::one(), |acc, &e| acc * e))
}

/// Dimension of the U(n) irrep with diagram `λ`.
pub fn dim_irrep(lambda: &YoungDiagram, n: usize) -> Result<BigUint> {
    exact_quotient(
        n_entry_product(lambda, n)?,
        hook_lengths(lambda).product(),
        &format!("dimension of {lambda} for n = {n}"),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationReport {
    pub p: usize,
    pub n: usize,
    pub exclude_antisymmetric: bool,
    /// `p!/∏ n-entries` per diagram, in enumeration order.
    pub summands: Vec<(YoungDiagram, BigRational)>,
    pub total: BigRational,
    pub total_excluding_antisymmetric: BigRational,
}

impl FluctuationReport {
    /// The total selected by the exclusion flag.
    pub fn value(&self) -> &BigRational {
        if self.exclude_antisymmetric {
            &self.total_excluding_antisymmetric
        } else {
            &self.total
        }
    }
}

/// Exact sum of `p!/∏ n-entries` over all diagrams with p boxes and ≤ n rows.
///
/// At `p = n` the single-column diagram can be left out; for `p < n` there is
/// no such diagram and the flag has no effect.
pub fn fluct_sum(p: usize, n: usize, exclude_antisymmetric: bool) -> Result<FluctuationReport> {
    if p == 0 || n == 0 {
        return Err(invalid("fluct_sum needs p ≥ 1 and n ≥ 1"));
    }
    if p > n {
        return Err(Error::OutOfScope(format!(
            "p = {p} > n = {n}: exceptional Young diagrams with p > n are not treated"
        )));
    }
    let pf = num_bigint::BigInt::from(factorial(p));
    let mut summands = Vec::new();
    let mut total = BigRational::zero();
    let mut excluded = BigRational::zero();
    for lambda in enumerate_young(p, n)? {
        let den = num_bigint::BigInt::from(n_entry_product(&lambda, n)?);
        let term = BigRational::new(pf.clone(), den);
        total += &term;
        if !(p == n && lambda.is_column()) {
            excluded += &term;
        }
        summands.push((lambda, term));
    }
    Ok(FluctuationReport {
        p,
        n,
        exclude_antisymmetric,
        summands,
        total,
        total_excluding_antisymmetric: excluded,
    })
}

/// Returns `Σ_λ multiplicity(λ)·dim(λ, n)`, failing unless it equals `n^p`.
pub fn schur_weyl_check(p: usize, n: usize) -> Result<BigUint> {
    if p == 0 || p > n {
        return Err(invalid(format!("schur_weyl_check needs 1 ≤ p ≤ n, got p = {p}, n = {n}")));
    }
    let mut sum = BigUint::zero();
    for lambda in enumerate_young(p, n)? {
        sum += multiplicity(&lambda)? * dim_irrep(&lambda, n)?;
    }
    let expected = BigUint::from(n).pow(p as u32);
    if sum != expected {
        return Err(Error::Consistency(format!("Σ n_λ dim = {sum} but n^p = {expected}")));
    }
    Ok(sum)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppendixBound {
    pub p: usize,
    pub n: usize,
    /// `log h(ξ, n)` for ξ = 1..n−1.
    pub log_h: Vec<f64>,
    /// `h(ξ, n)`; may underflow to zero where `log_h` stays finite.
    pub h: Vec<f64>,
    pub log_sum: f64,
    pub sum: f64,
    pub exact: BigRational,
}

/// `log h(ξ, n)` with `h = (n/2+2)^{−ξ} exp(π√(2ξ/3) − ξ + (ξ+½)log(ξ+½))`.
pub fn log_h(xi: usize, n: usize) -> f64 {
    let x = xi as f64;
    let base = n as f64 / 2.0 + 2.0;
    -x * base.ln() + std::f64::consts::PI * (2.0 * x / 3.0).sqrt() - x + (x + 0.5) * (x + 0.5).ln()
}

/// Evaluates the bound function over ξ = 1..n−1 and pairs it with the exact
/// fluctuation sum at (p, n) with the antisymmetric summand removed.
pub fn appendix_bound(p: usize, n: usize) -> Result<AppendixBound> {
    if p < 2 || p > n {
        return Err(invalid(format!("appendix_bound needs 2 ≤ p ≤ n, got p = {p}, n = {n}")));
    }
    let log_h: Vec<f64> = (1..n).map(|xi| log_h(xi, n)).collect();
    let peak = log_h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = peak + log_h.iter().map(|l| (l - peak).exp()).sum::<f64>().ln();
    let h = log_h.iter().map(|l| l.exp()).collect();
    let exact = fluct_sum(p, n, true)?.total_excluding_antisymmetric;
    Ok(AppendixBound { p, n, log_h, h, log_sum, sum: log_sum.exp(), exact })
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    // Scale to keep both parts representable for very large numerators.
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() => a / b,
        _ => {
            let shift = r.denom().bits().max(r.numer().bits()) as i64 - 1000;
            let shift = shift.max(0) as usize;
            let a = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
            let b = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
            a / b
        }
    }
}
