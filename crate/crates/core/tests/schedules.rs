//! Exhaustive checks of the schedule formulas for `n <= 200`, `k <= 20`
//! against exact rational characterizations.

use cse_core::budget::{max_query_sets, max_query_sets_round_robin, partition_sum};
use cse_core::{schedule_for, Variant};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow};

fn int(x: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

fn pow(base: &BigRational, e: usize) -> BigRational {
    Pow::pow(base, e)
}

/// `p` is the ceiling of `x`: `p - 1 < x <= p`.
fn is_ceiling(p: u64, x: &BigRational) -> bool {
    &int(p) >= x && &(int(p) - BigRational::one()) < x
}

/// `m` is the smallest integer with `base^m >= x`, for `base > 1`.
fn is_ceil_log(m: usize, base: &BigRational, x: &BigRational) -> bool {
    &pow(base, m) >= x && (m == 0 || &pow(base, m - 1) < x)
}

#[test]
fn schedules_match_exact_characterizations() {
    for n in 2..=200_u64 {
        for k in 2..=20_u64.min(n) {
            let (nr, kr) = (int(n), int(k));
            let (nu, ku) = (n as usize, k as usize);

            let s = schedule_for(Variant::Csws, nu, ku).unwrap();
            assert!(is_ceil_log(s.rounds - 1, &kr, &nr), "CSWS R at n={n}, k={k}");
            for (r, &p) in s.partitions.iter().enumerate() {
                assert!(is_ceiling(p, &(nr.clone() / pow(&kr, r + 1))), "CSWS P_{} at n={n}, k={k}", r + 1);
            }

            let s = schedule_for(Variant::Csr, nu, ku).unwrap();
            let shrink = int(k - 1) / kr.clone();
            let m = s.rounds - (ku - 1);
            assert!(&nr * pow(&shrink, m) <= BigRational::one(), "CSR R at n={n}, k={k}");
            assert!(m == 0 || &nr * pow(&shrink, m - 1) > BigRational::one(), "CSR R minimal at n={n}, k={k}");
            for (r, &p) in s.partitions.iter().enumerate() {
                assert!(is_ceiling(p, &(&nr * pow(&shrink, r) / &kr)), "CSR P_{} at n={n}, k={k}", r + 1);
            }

            let s = schedule_for(Variant::Csh, nu, ku).unwrap();
            let two = int(2);
            let a = (0..).find(|&a| is_ceil_log(a, &two, &nr)).unwrap();
            let b = (0..).find(|&b| is_ceil_log(b, &two, &kr)).unwrap();
            assert_eq!(s.rounds, a + b, "CSH R at n={n}, k={k}");
            for (r, &p) in s.partitions.iter().enumerate() {
                assert!(is_ceiling(p, &(nr.clone() / (pow(&two, r) * &kr))), "CSH P_{} at n={n}, k={k}", r + 1);
            }

            for v in Variant::ALL {
                let s = schedule_for(v, nu, ku).unwrap();
                assert!(max_query_sets(v, nu, ku).unwrap() >= partition_sum(&s), "{v} bound at n={n}, k={k}");
            }
        }
    }
}

#[test]
fn query_set_bound_examples() {
    assert_eq!(max_query_sets_round_robin(6, 3), 20);
    assert!(max_query_sets(Variant::Csws, 20, 4).unwrap() >= [5, 2, 1, 1].iter().sum::<u64>());
    assert!(max_query_sets(Variant::Csh, 16, 4).unwrap() >= [4, 2, 1, 1, 1, 1].iter().sum::<u64>());
}

#[test]
fn readme_example_budgets() {
    let s = schedule_for(Variant::Csws, 20, 4).unwrap();
    assert_eq!(s.rounds, 4);
    assert_eq!(s.partitions, vec![5, 2, 1, 1]);
    let expected: Vec<u64> = s.partitions.iter().map(|p| 500 / (p * 4)).collect();
    assert_eq!(s.per_set_budgets(500), expected);
    assert_eq!(expected, vec![25, 62, 125, 125]);
}
