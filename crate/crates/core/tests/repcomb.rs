use ansyb_core::repcomb::*;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use proptest::prelude::*;
use std::collections::HashMap;

fn yd(rows: &[usize]) -> YoungDiagram {
    YoungDiagram::new(rows.to_vec()).unwrap()
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Dimension by the Weyl formula `∏_{i<j≤n} (λᵢ − λⱼ + j − i)/(j − i)`.
fn weyl_dim(rows: &[usize], n: usize) -> BigRational {
    let lam = |i: usize| rows.get(i).copied().unwrap_or(0) as i64;
    let mut acc = BigRational::one();
    for i in 0..n {
        for j in i + 1..n {
            acc *= q(lam(i) - lam(j) + (j - i) as i64, (j - i) as i64);
        }
    }
    acc
}

/// Standard Young tableaux counted by removing one corner box at a time.
fn syt_count(rows: &[usize]) -> BigUint {
    fn rec(rows: Vec<usize>, memo: &mut HashMap<Vec<usize>, BigUint>) -> BigUint {
        if rows.is_empty() {
            return BigUint::one();
        }
        if let Some(v) = memo.get(&rows) {
            return v.clone();
        }
        let mut total = BigUint::zero();
        for i in 0..rows.len() {
            if rows.get(i + 1).map_or(true, |&r| r < rows[i]) {
                let mut smaller = rows.clone();
                smaller[i] -= 1;
                while smaller.last() == Some(&0) {
                    smaller.pop();
                }
                total += rec(smaller, memo);
            }
        }
        memo.insert(rows, total.clone());
        total
    }
    rec(rows.to_vec(), &mut HashMap::new())
}

/// All partitions of `p` into at most `k` parts, by brute force over compositions.
fn brute_partitions(p: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(p: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            if cur.iter().sum::<usize>() == p {
                let mut v: Vec<usize> = cur.iter().copied().filter(|&x| x > 0).collect();
                v.sort_unstable_by(|a, b| b.cmp(a));
                if !out.contains(&v) {
                    out.push(v);
                }
            }
            return;
        }
        for x in 0..=p {
            cur.push(x);
            rec(p, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(p, k.min(p), &mut Vec::new(), &mut out);
    out.sort();
    out
}

#[test]
fn enumerates_partitions_of_four_into_two_rows() {
    let got: Vec<Vec<usize>> = enumerate_young(4, 2).unwrap().iter().map(|l| l.rows().to_vec()).collect();
    assert_eq!(got, vec![vec![4], vec![3, 1], vec![2, 2]]);
}

#[test]
fn enumeration_matches_brute_force() {
    for p in 1..=7 {
        for k in 1..=7 {
            let mut got: Vec<Vec<usize>> = enumerate_young(p, k).unwrap().iter().map(|l| l.rows().to_vec()).collect();
            got.sort();
            assert_eq!(got, brute_partitions(p, k), "p = {p}, max rows = {k}");
        }
    }
}

#[test]
fn hook_tables() {
    assert_eq!(hook_lengths(&yd(&[3, 2, 1, 1])).rows, vec![vec![6, 3, 1], vec![4, 1], vec![2], vec![1]]);
    assert_eq!(hook_lengths(&yd(&[2, 2])).rows, vec![vec![3, 2], vec![2, 1]]);
}

#[test]
fn multiplicity_of_3211_is_35() {
    assert_eq!(multiplicity(&yd(&[3, 2, 1, 1])).unwrap(), BigUint::from(35u32));
    assert_eq!(syt_count(&[3, 2, 1, 1]), BigUint::from(35u32));
}

#[test]
fn n_entry_tables() {
    assert_eq!(n_entries(&yd(&[3, 2, 1, 1]), 4).unwrap(), vec![vec![4, 5, 6], vec![3, 4], vec![2], vec![1]]);
    assert_eq!(n_entries(&yd(&[2, 2]), 3).unwrap(), vec![vec![3, 4], vec![2, 3]]);
}

#[test]
fn symmetric_square_of_c2_has_dimension_three() {
    assert_eq!(dim_irrep(&yd(&[2]), 2).unwrap(), BigUint::from(3u32));
}

#[test]
fn fluct_sum_small_cases() {
    // (2): 2/(2·3); the single column is excluded.
    assert_eq!(fluct_sum(2, 2, true).unwrap().value(), &q(1, 3));
    assert_eq!(fluct_sum(2, 2, false).unwrap().value(), &q(4, 3));
    // (2): 2/(3·4), (1,1): 2/(3·2).
    assert_eq!(fluct_sum(2, 3, false).unwrap().value(), &q(1, 2));
    // (3): 6/(3·4·5), (2,1): 6/(3·4·2).
    assert_eq!(fluct_sum(3, 3, true).unwrap().value(), &q(7, 20));
}

#[test]
fn fluct_sum_of_one_box_is_one_over_n() {
    for n in 1..=12 {
        assert_eq!(fluct_sum(1, n, false).unwrap().value(), &q(1, n as i64));
    }
}

#[test]
fn single_column_summand_is_one() {
    for n in 2..=10 {
        let r = fluct_sum(n, n, false).unwrap();
        let (_, term) = r.summands.iter().find(|(l, _)| l.is_column()).unwrap();
        assert_eq!(term, &BigRational::one(), "n = {n}");
        assert_eq!(&r.total - &r.total_excluding_antisymmetric, BigRational::one());
    }
}

#[test]
fn excluded_fluct_sum_along_p_equals_n() {
    let value = |n: usize| fluct_sum(n, n, true).unwrap().value().clone();
    assert_eq!(value(3), q(7, 20));
    assert_eq!(value(4), q(83, 210));
    assert_eq!(value(8), q(5671, 25740));
    // The sum rises from n = 2 to n = 4 before it starts to fall.
    assert!(value(2) < value(4));
    let tail: Vec<BigRational> = [4usize, 8, 16].iter().map(|&n| value(n)).collect();
    for w in tail.windows(2) {
        assert!(w[1] < w[0], "{} !< {}", w[1], w[0]);
    }
}

#[test]
fn schur_weyl_three_three() {
    assert_eq!(schur_weyl_check(3, 3).unwrap(), BigUint::from(27u32));
}

#[test]
fn schur_weyl_exhaustive_up_to_six() {
    for n in 1..=6 {
        for p in 1..=n {
            let expected = BigUint::from(n).pow(p as u32);
            assert_eq!(schur_weyl_check(p, n).unwrap(), expected);
        }
    }
}

#[test]
fn minimal_dimension_property() {
    for n in 2..=8 {
        for p in 1..n {
            for l in enumerate_young(p, n).unwrap() {
                assert!(dim_irrep(&l, n).unwrap() >= BigUint::from(n), "{l} at n = {n}");
            }
        }
        for l in enumerate_young(n, n).unwrap() {
            let d = dim_irrep(&l, n).unwrap();
            if l.is_column() {
                assert_eq!(d, BigUint::one());
            } else {
                assert!(d >= BigUint::from(n), "{l} at p = n = {n}");
            }
        }
    }
}

#[test]
fn appendix_bound_decreases_in_n() {
    let sums: Vec<f64> = [50usize, 100, 200].iter().map(|&n| appendix_bound(2, n).unwrap().sum).collect();
    assert!(sums[0] > sums[1] && sums[1] > sums[2], "{sums:?}");
}

#[test]
fn appendix_bound_log_sum_is_consistent() {
    let b = appendix_bound(3, 20).unwrap();
    let direct: f64 = b.log_h.iter().map(|l| l.exp()).sum();
    assert!((b.sum - direct).abs() <= 1e-12 * direct);
    assert_eq!(b.exact, fluct_sum(3, 20, true).unwrap().total_excluding_antisymmetric);
}

#[test]
fn rational_to_f64_handles_huge_parts() {
    let big = num_traits::pow(BigInt::from(10), 400);
    let r = BigRational::new(&big * BigInt::from(3), &big * BigInt::from(4));
    assert_eq!(rational_to_f64(&r), 0.75);
    let r = BigRational::new(BigInt::from(1), num_traits::pow(BigInt::from(2), 2000) + BigInt::from(1));
    assert_eq!(rational_to_f64(&r), 0.0);
    assert!((rational_to_f64(&q(1, 3)) - 1.0 / 3.0).abs() < 1e-16);
    assert_eq!(q(7, 20).to_f64(), Some(0.35));
}

fn diagram() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..6, 1..6).prop_map(|mut v| {
        v.sort_unstable_by(|a, b| b.cmp(a));
        v
    })
}

proptest! {
    #[test]
    fn transposed_hooks_are_the_transposed_table(rows in diagram()) {
        let l = yd(&rows);
        prop_assert_eq!(hook_lengths(&l.transpose()), hook_lengths(&l).transpose());
        prop_assert_eq!(l.transpose().transpose(), l);
    }

    #[test]
    fn multiplicity_counts_standard_tableaux(rows in diagram()) {
        prop_assert_eq!(multiplicity(&yd(&rows)).unwrap(), syt_count(&rows));
    }

    #[test]
    fn dimension_matches_weyl_formula(rows in diagram(), extra in 0usize..4) {
        let n = rows.len() + extra;
        let d = BigRational::from_integer(BigInt::from(dim_irrep(&yd(&rows), n).unwrap()));
        prop_assert_eq!(d, weyl_dim(&rows, n));
    }

    #[test]
    fn squared_multiplicities_sum_to_p_factorial(p in 1usize..9) {
        let total: BigUint = enumerate_young(p, p).unwrap().iter().map(|l| {
            let m = multiplicity(l).unwrap();
            &m * &m
        }).sum();
        prop_assert_eq!(total, factorial(p));
    }

    #[test]
    fn summand_is_multiplicity_over_dimension(p in 1usize..6, extra in 0usize..4) {
        let n = p + extra;
        for (l, term) in fluct_sum(p, n, false).unwrap().summands {
            let m = BigInt::from(multiplicity(&l).unwrap());
            let d = BigInt::from(dim_irrep(&l, n).unwrap());
            prop_assert_eq!(term, BigRational::new(m, d));
        }
    }
}
