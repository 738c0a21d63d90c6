use std::collections::BTreeSet;

use ansyb_core::wickengine::*;
use ansyb_core::Error;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn ctx(n: usize, lambda: BigRational) -> Context {
    Context::new(n, lambda).unwrap()
}

fn single(s: Species, tag: &str) -> LinearCombination {
    LinearCombination::single(s, tag)
}

fn k0_term(coeff: BigRational) -> TokenSum {
    let mut key = TermKey::of(vec![KernelToken::new(TokenKind::K0, &["x", "y"])]);
    key.pi = 1;
    TokenSum::single(key, TauPoly::constant(GaussRat::real(coeff)))
}

/// All σ ∈ S_p with `ks[σ[j]] > ls[j]` for every j.
fn brute_pairings(ks: &[usize], ls: &[usize]) -> Vec<Vec<usize>> {
    fn rec(ks: &[usize], ls: &[usize], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == ls.len() {
            out.push(cur.clone());
            return;
        }
        let j = cur.len();
        for i in 0..ks.len() {
            if !cur.contains(&i) && ks[i] > ls[j] {
                cur.push(i);
                rec(ks, ls, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(ks, ls, &mut Vec::new(), &mut out);
    out.sort();
    out
}

/// Whether two symbols may be contracted, read off the pairing rules directly.
fn allowed(a: &OperatorSymbol, b: &OperatorSymbol) -> bool {
    use SymbolKind::*;
    let line = |s: &OperatorSymbol| match s.slot {
        SlotRef::Line(l) => l,
        SlotRef::Averaged => 0,
    };
    match (a.kind, b.kind) {
        (Fermion, FermionDag) | (FermionDag, Fermion) => line(a) == line(b) && a.b != b.b,
        (BosonIn, BosonOut) => line(a) > line(b),
        (BosonOut, BosonIn) => line(b) > line(a),
        _ => false,
    }
}

/// Every complete contraction of the word, as sorted `(i, j)` position lists.
fn brute_matchings(symbols: &[OperatorSymbol]) -> BTreeSet<Vec<(usize, usize)>> {
    fn rec(symbols: &[OperatorSymbol], left: Vec<usize>, acc: &mut Vec<(usize, usize)>, out: &mut BTreeSet<Vec<(usize, usize)>>) {
        if left.is_empty() {
            let mut p = acc.clone();
            p.sort();
            out.insert(p);
            return;
        }
        let first = left[0];
        for &j in &left[1..] {
            if allowed(&symbols[first], &symbols[j]) {
                acc.push((first, j));
                let rest = left.iter().copied().filter(|&r| r != first && r != j).collect();
                rec(symbols, rest, acc, out);
                acc.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    rec(symbols, (0..symbols.len()).collect(), &mut Vec::new(), &mut out);
    out
}

#[test]
fn fermion_contraction_gives_the_retarded_token() {
    let w = OperatorWord::time_ordered(vec![
        OperatorSymbol::fermion(1, 1, "x", 0),
        OperatorSymbol::fermion_dag(1, -1, "y", 1),
    ]);
    let r = normal_order_vev(&w).unwrap();
    let mut s = KernelToken::new(TokenKind::SRet, &["x", "y"]);
    s.indices = vec![0, 1];
    let mut t = KernelToken::new(TokenKind::Tee, &[]);
    t.indices = vec![1, -1];
    let expected = TokenSum::single(TermKey::of(vec![s, t]), TauPoly::constant(GaussRat::i()));
    assert_eq!(r.sum, expected);
    assert_eq!(r.pairings, vec![vec![(0, 1)]]);
    // The reversed order picks up the fermionic sign.
    let rev = OperatorWord::time_ordered(vec![w.symbols[1].clone(), w.symbols[0].clone()]);
    assert_eq!(normal_order_vev(&rev).unwrap().sum, expected.neg());
}

#[test]
fn equal_lower_indices_or_different_lines_do_not_contract() {
    for (l1, b1, l2, b2) in [(1, 1, 1, 1), (1, -1, 1, -1), (1, 1, 2, -1)] {
        let w = OperatorWord::time_ordered(vec![
            OperatorSymbol::fermion(l1, b1, "x", 0),
            OperatorSymbol::fermion_dag(l2, b2, "y", 0),
        ]);
        assert!(normal_order_vev(&w).unwrap().sum.is_zero());
    }
}

#[test]
fn crossing_fermion_pairs_change_sign() {
    let nested = OperatorWord::time_ordered(vec![
        OperatorSymbol::fermion(1, 1, "a", 0),
        OperatorSymbol::fermion_dag(1, -1, "b", 0),
        OperatorSymbol::fermion(2, 1, "c", 0),
        OperatorSymbol::fermion_dag(2, -1, "d", 0),
    ]);
    let crossed = OperatorWord::time_ordered(vec![
        OperatorSymbol::fermion(1, 1, "a", 0),
        OperatorSymbol::fermion(2, 1, "c", 0),
        OperatorSymbol::fermion_dag(1, -1, "b", 0),
        OperatorSymbol::fermion_dag(2, -1, "d", 0),
    ]);
    let a = normal_order_vev(&nested).unwrap().sum;
    let b = normal_order_vev(&crossed).unwrap().sum;
    assert_eq!(a.len(), 1);
    assert_eq!(a, b.neg());
    let (_, coeff) = a.terms.iter().next().unwrap();
    assert_eq!(coeff, &TauPoly::constant(GaussRat::int(-1)));
}

#[test]
fn unpaired_boson_kills_the_expectation() {
    let w = OperatorWord::time_ordered(vec![
        OperatorSymbol::boson_in(2, "x"),
        OperatorSymbol::boson_out(1, "y"),
        OperatorSymbol::boson_in(3, "z"),
    ]);
    let r = normal_order_vev(&w).unwrap();
    assert!(r.sum.is_zero() && r.pairings.is_empty());
    let gated = OperatorWord::time_ordered(vec![OperatorSymbol::boson_in(1, "x"), OperatorSymbol::boson_out(1, "y")]);
    assert!(normal_order_vev(&gated).unwrap().sum.is_zero());
}

#[test]
fn boson_pair_value() {
    let w = OperatorWord::time_ordered(vec![OperatorSymbol::boson_out(1, "y"), OperatorSymbol::boson_in(2, "x")]);
    let r = normal_order_vev(&w).unwrap();
    let expected = TokenSum::single(TermKey::of(vec![KernelToken::new(TokenKind::S0, &["x", "y"])]), TauPoly::constant(GaussRat::i()));
    assert_eq!(r.sum, expected);
}

#[test]
fn pairing_permutations_match_brute_force_on_staircase_lines() {
    for p in 1..=6usize {
        let ks: Vec<usize> = (2..=p + 1).collect();
        let ls: Vec<usize> = (1..=p).collect();
        let got = boson_pairing_permutations(&ks, &ls).unwrap();
        assert_eq!(got, brute_pairings(&ks, &ls), "p = {p}");
    }
    // Shifted staircase forces σ(j) ≥ j, so only the identity survives.
    assert_eq!(boson_pairing_permutations(&[2, 3, 4, 5], &[1, 2, 3, 4]).unwrap(), vec![vec![0, 1, 2, 3]]);
    assert_eq!(boson_pairing_permutations(&[2, 3, 4, 5], &[1, 1, 1, 1]).unwrap().len(), 24);
    assert!(boson_pairing_permutations(&[1, 3], &[2, 2]).unwrap().is_empty());
    assert!(boson_pairing_permutations(&[2], &[1, 1]).is_err());
}

#[test]
fn each_pairing_term_carries_i_to_the_p() {
    let ks = [3usize, 3, 2];
    let ls = [1usize, 2, 1];
    let mut symbols: Vec<OperatorSymbol> = ks.iter().enumerate().map(|(j, &k)| OperatorSymbol::boson_in(k, &format!("x{j}"))).collect();
    symbols.extend(ls.iter().enumerate().map(|(j, &l)| OperatorSymbol::boson_out(l, &format!("y{j}"))));
    let r = normal_order_vev(&OperatorWord::time_ordered(symbols)).unwrap();
    assert_eq!(r.sum.len(), brute_pairings(&ks, &ls).len());
    for coeff in r.sum.terms.values() {
        assert_eq!(coeff, &TauPoly::constant(GaussRat::i().pow(3)));
    }
}

#[test]
fn expectation_is_linear_in_the_word_coefficient() {
    let mut w = OperatorWord::time_ordered(vec![
        OperatorSymbol::fermion(1, -1, "x", 0),
        OperatorSymbol::boson_in(2, "u"),
        OperatorSymbol::fermion_dag(1, 1, "y", 0),
        OperatorSymbol::boson_out(1, "v"),
    ]);
    let base = normal_order_vev(&w).unwrap().sum;
    let c = GaussRat::new(q(3, 7), q(-2, 5));
    w.coefficient = c.clone();
    assert_eq!(normal_order_vev(&w).unwrap().sum, base.scale(&c));
    assert!(!base.is_zero());
}

#[test]
fn combined_commutator_vanishes_for_one_line() {
    for lambda in [q(1, 1), q(-3, 4)] {
        let c = ctx(1, lambda);
        assert!(commutator(&single(Species::Combined, "x"), &single(Species::Combined, "y"), &c).unwrap().is_zero());
    }
}

#[test]
fn combined_commutator_against_the_hand_expansion() {
    // B̂ = c Σ(2In + λOut) with c² = 1/(2|λ|n²). Only k > l pairs survive, so
    // [B̂(x),B̂(y)] = c²·4iλ·n(n−1)/2·(S₀∧ − S₀∨)(x,y) = iε(n−1)/n·(S₀∧ − S₀∨),
    // and S₀∨ − S₀∧ = 2πi K₀ turns this into 2πε(n−1)/n·K₀.
    for lambda in [q(3, 4), q(-1, 2), q(5, 1)] {
        for n in 1..=10usize {
            let c = ctx(n, lambda.clone());
            let got = commutator(&single(Species::Combined, "x"), &single(Species::Combined, "y"), &c).unwrap();
            let eps = if lambda > BigRational::zero() { 1 } else { -1 };
            let coeff = q(eps * 2 * (n as i64 - 1), n as i64);
            let hand = if n == 1 { TokenSum::zero() } else { k0_term(coeff.clone()) };
            assert_eq!(got, hand, "n = {n}, λ = {lambda}");
            assert!(!got.depends_on_tau());
            let table = effective_commutators(&c).unwrap();
            let entry = &table.entries[0];
            assert_eq!(entry.derived, got);
            assert_eq!(entry.stated, k0_term(-coeff));
            let expected_ratio = if n == 1 { GaussRat::one() } else { GaussRat::int(-1) };
            assert_eq!(entry.ratio, Some(expected_ratio));
        }
    }
}

#[test]
fn tau_cancels_in_the_combined_commutator() {
    let c = ctx(4, q(2, 3));
    let got = commutator(&single(Species::Combined, "x"), &single(Species::Combined, "y"), &c).unwrap();
    assert_eq!(got.eval_tau(&BigRational::zero()), got.eval_tau(&BigRational::one()));
    assert_eq!(got.eval_tau(&q(1, 3)), got);
    // A single line pair keeps its τ dependence.
    let line = commutator(&single(Species::In(2), "x"), &single(Species::Out(1), "y"), &c).unwrap();
    assert!(line.depends_on_tau());
    assert_ne!(line.eval_tau(&BigRational::zero()), line.eval_tau(&BigRational::one()));
}

#[test]
fn line_commutator_respects_the_strict_gate() {
    let c = ctx(3, q(1, 1));
    assert!(commutator(&single(Species::In(2), "x"), &single(Species::Out(2), "y"), &c).unwrap().is_zero());
    assert!(commutator(&single(Species::In(1), "x"), &single(Species::Out(3), "y"), &c).unwrap().is_zero());
    assert!(commutator(&single(Species::In(3), "x"), &single(Species::In(2), "y"), &c).unwrap().is_zero());
    let v = commutator(&single(Species::In(3), "x"), &single(Species::Out(1), "y"), &c).unwrap();
    let key_ret = TermKey::of(vec![KernelToken::new(TokenKind::S0Ret, &["x", "y"])]);
    let key_adv = TermKey::of(vec![KernelToken::new(TokenKind::S0Adv, &["x", "y"])]);
    assert_eq!(v.coefficient(&key_ret), TauPoly::linear(GaussRat::zero(), GaussRat::new(q(0, 1), q(2, 1))));
    assert_eq!(v.coefficient(&key_adv), TauPoly::linear(GaussRat::new(q(0, 1), q(-2, 1)), GaussRat::new(q(0, 1), q(2, 1))));
    assert!(commutator(&single(Species::In(4), "x"), &single(Species::Out(1), "y"), &c).is_err());
}

#[test]
fn sandwiched_commutator_table_at_three_lines() {
    let c = ctx(3, q(3, 4));
    let table = effective_commutators(&c).unwrap();
    let names: Vec<&str> = table.entries.iter().map(|e| e.name.as_str()).collect();
    assert_eq!(names, ["[B̂(x),B̂(y)]", "[Bin(x),B̂(y)]", "[Bout(x),B̂(y)]", "[Bin(x),Bout(y)]", "[Bin(x),Bin(y)]", "[Bout(x),Bout(y)]"]);
    for e in &table.entries[1..] {
        assert!(e.matches(), "{}: {} vs {}", e.name, e.derived, e.stated);
    }
    // For negative λ the incoming kernel relation carries an extra ε(λ).
    let neg = effective_commutators(&ctx(3, q(-3, 4))).unwrap();
    assert_eq!(neg.entries[1].ratio, Some(GaussRat::int(-1)));
    assert!(neg.entries[2].matches());
}

#[test]
fn limit_table() {
    let table = limit_commutators(&q(1, 2)).unwrap();
    assert_eq!(table.entries[0].derived, k0_term(q(2, 1)));
    assert_eq!(table.entries[0].ratio, Some(GaussRat::int(-1)));
    for e in &table.entries[1..] {
        assert_eq!(e.ratio, Some(GaussRat::one()), "{}", e.name);
    }
}

#[test]
fn averaged_expectation_of_two_combined_fields() {
    // Each ordering of In and Out contributes c²·2λ·i·n(n−1)/2 = iε(n−1)/(2n).
    for (n, lambda) in [(3usize, q(3, 4)), (4, q(-2, 1))] {
        let c = ctx(n, lambda.clone());
        let w = OperatorWord::time_ordered(vec![OperatorSymbol::combined("x"), OperatorSymbol::combined("y")]);
        let r = normal_order_vev_in(&w, &c).unwrap();
        let eps = if lambda > BigRational::zero() { 1 } else { -1 };
        let coeff = GaussRat::new(q(0, 1), q(eps * (n as i64 - 1), 2 * n as i64));
        let mut expected = TokenSum::zero();
        for (a, b) in [("x", "y"), ("y", "x")] {
            expected = expected.add(&TokenSum::single(TermKey::of(vec![KernelToken::new(TokenKind::S0, &[a, b])]), TauPoly::constant(coeff.clone())));
        }
        assert_eq!(r.sum, expected);
    }
    let c = ctx(2, q(1, 1));
    let bad = OperatorWord::time_ordered(vec![OperatorSymbol::boson_in(3, "x"), OperatorSymbol::boson_out(1, "y")]);
    assert!(normal_order_vev_in(&bad, &c).is_err());
    assert!(normal_order_vev(&OperatorWord::time_ordered(vec![OperatorSymbol::combined("x")])).is_err());
}

#[test]
fn dyson_orders_zero_and_one() {
    let spec = HamiltonianSpec::new(1, q(1, 3));
    let zero = dyson_expand(&spec, 0).unwrap();
    assert_eq!(zero.len(), 1);
    assert_eq!(zero[0].word, OperatorWord::identity());
    assert_eq!(zero[0].coefficient, GaussRat::one());
    let first = dyson_expand(&spec, 1).unwrap();
    assert_eq!(first.len(), 3);
    for t in &first {
        match t.vertices[0] {
            Vertex::Emission { line } => {
                assert_eq!(line, 1);
                assert_eq!(t.final_indices, vec![1]);
                assert_eq!(t.created, vec![(1, 1)]);
                assert_eq!(t.coefficient, GaussRat::new(q(0, 1), q(-1, 3)));
            }
            Vertex::Absorption { b: 1, .. } => {
                assert_eq!(t.final_indices, vec![-1]);
                assert_eq!(t.coefficient, GaussRat::new(q(0, 1), q(-1, 1)));
            }
            Vertex::Absorption { .. } => assert!(t.coefficient.is_zero()),
        }
        assert_eq!(t.word.symbols.len(), 3);
    }
}

#[test]
fn a_line_emits_at_most_once() {
    let spec = HamiltonianSpec::new(2, q(2, 1));
    let second = dyson_expand(&spec, 2).unwrap();
    assert_eq!(second.len(), 36);
    let twice = second.iter().find(|t| t.vertices == [Vertex::Emission { line: 1 }, Vertex::Emission { line: 1 }]).unwrap();
    assert!(twice.coefficient.is_zero());
    let both = second.iter().find(|t| t.vertices == [Vertex::Emission { line: 2 }, Vertex::Emission { line: 1 }]).unwrap();
    assert_eq!(both.coefficient, GaussRat::int(-4));
    assert_eq!(both.final_indices, vec![1, 1]);
    assert!(matches!(dyson_expand(&spec, 3), Err(Error::Unsupported(_))));
    let mut bad = HamiltonianSpec::new(2, q(1, 1));
    bad.initial = vec![1];
    assert!(dyson_expand(&bad, 1).is_err());
}

#[test]
fn loop_coefficients() {
    let one = loop_coefficient(1, None).unwrap();
    assert_eq!(one.value, q(1, 2));
    assert!(one.limit_discrepancy);
    assert_eq!(one.stated_limit, BigRational::one());
    assert_eq!(loop_coefficient(2, Some(10)).unwrap().value, q(77, 100));
    let single = loop_coefficient(1, Some(1)).unwrap();
    assert_eq!(single.value, BigRational::one());
    assert!(!single.limit_discrepancy);
    assert_eq!(loop_coefficient(3, None).unwrap().value, q(3, 4));
    assert!(loop_coefficient(0, None).is_err());
    assert!(loop_coefficient(1, Some(0)).is_err());
}

#[test]
fn loop_coefficients_approach_their_limit() {
    for ell in 1..=3u32 {
        let limit = loop_coefficient(ell, None).unwrap().value;
        let gap = |n: u64| (loop_coefficient(ell, Some(n)).unwrap().value - &limit).abs();
        assert!(gap(100) < gap(10));
        assert!(gap(100) < q(ell as i64, 100));
    }
}

#[test]
fn word_parsing() {
    let text = "# two-point function\npsi 1 +1 x 0\n\npsidag 1 -1 y 1  # trailing\n";
    let w = OperatorWord::parse(text).unwrap();
    assert_eq!(w.symbols, vec![OperatorSymbol::fermion(1, 1, "x", 0), OperatorSymbol::fermion_dag(1, -1, "y", 1)]);
    assert!(w.time_ordered);
    let b = OperatorWord::parse("bhat avg - x\nbin 2 - y\nbout 1 - z").unwrap();
    assert_eq!(b.symbols[0], OperatorSymbol::combined("x"));
    assert_eq!(b.symbols[1], OperatorSymbol::boson_in(2, "y"));
    for bad in ["quark 1 +1 x", "psi 0 +1 x", "psi 1 2 x", "bhat 1 - x", "psi 1 +1", "bin 2 +1 x", "psi one +1 x"] {
        assert!(OperatorWord::parse(bad).is_err(), "{bad}");
    }
    assert_eq!(OperatorWord::parse("").unwrap(), OperatorWord::identity());
}

#[test]
fn context_validation() {
    assert!(Context::new(0, q(1, 1)).is_err());
    assert!(Context::new(2, q(0, 1)).is_err());
    assert_eq!(ctx(2, q(-1, 3)).epsilon(), q(-1, 1));
}

fn symbol() -> impl Strategy<Value = OperatorSymbol> {
    (0usize..4, 1usize..4, prop::bool::ANY).prop_map(|(kind, line, plus)| {
        let b = if plus { 1 } else { -1 };
        match kind {
            0 => OperatorSymbol::fermion(line, b, "f", 0),
            1 => OperatorSymbol::fermion_dag(line, b, "g", 0),
            2 => OperatorSymbol::boson_in(line, "u"),
            _ => OperatorSymbol::boson_out(line, "v"),
        }
    })
}

proptest! {
    #[test]
    fn pairing_permutations_match_brute_force(
        pairs in prop::collection::vec((1usize..6, 1usize..6), 1..=6)
    ) {
        let (ks, ls): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        prop_assert_eq!(boson_pairing_permutations(&ks, &ls).unwrap(), brute_pairings(&ks, &ls));
    }

    #[test]
    fn contractions_match_the_pairing_rules(symbols in prop::collection::vec(symbol(), 0..=6)) {
        let r = normal_order_vev(&OperatorWord::time_ordered(symbols.clone())).unwrap();
        let got: BTreeSet<Vec<(usize, usize)>> = r.pairings.iter().cloned().collect();
        prop_assert_eq!(got.len(), r.pairings.len());
        prop_assert_eq!(got, brute_matchings(&symbols));
        if r.pairings.is_empty() {
            prop_assert!(r.sum.is_zero());
        }
    }

    #[test]
    fn commutators_are_antisymmetric(
        n in 1usize..6,
        num in -5i64..6,
        a in 0usize..5,
        b in 0usize..5,
    ) {
        prop_assume!(num != 0);
        let c = ctx(n, q(num, 4));
        let species = |i: usize| match i {
            0 => Species::Combined,
            1 => Species::InAvg,
            2 => Species::OutAvg,
            3 => Species::In(n),
            _ => Species::Out(1),
        };
        let ab = commutator(&single(species(a), "x"), &single(species(b), "y"), &c).unwrap();
        let ba = commutator(&single(species(b), "y"), &single(species(a), "x"), &c).unwrap();
        prop_assert_eq!(ab, ba.neg());
    }
}
