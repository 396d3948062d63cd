//! Survival of two walks through a few steps against brute-force
//! enumeration of every pair of step sequences.

use std::collections::HashSet;

use xisim_core::exec::Mode;
use xisim_core::stats::binomial_sigma;
use xisim_core::survival::{exact_survival, run_survival_experiment, SurvivalParams};

const STEPS: [[i32; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];

fn path(code: u64, n: u32) -> Vec<[i32; 3]> {
    let mut pos = [0, 0, 0];
    let mut c = code;
    (0..n)
        .map(|_| {
            let d = STEPS[(c % 6) as usize];
            c /= 6;
            for i in 0..3 {
                pos[i] += d[i];
            }
            pos
        })
        .collect()
}

/// Pairs of `n`-step walks whose visited sets at times `1..=n` are disjoint,
/// out of `6^(2n)`.
fn brute_force(n: u32) -> (u64, u64) {
    let per = 6u64.pow(n);
    let paths: Vec<HashSet<[i32; 3]>> = (0..per).map(|c| path(c, n).into_iter().collect()).collect();
    let mut disjoint = 0;
    for a in &paths {
        for b in &paths {
            if a.is_disjoint(b) {
                disjoint += 1;
            }
        }
    }
    (disjoint, per * per)
}

#[test]
fn brute_force_small_cases() {
    assert_eq!(brute_force(1), (30, 36));
    let (d2, t2) = brute_force(2);
    assert_eq!(t2, 1296);
    assert!(d2 < 30 * 36);
}

#[test]
fn exact_survival_agrees_with_brute_force() {
    for n in 1..=3 {
        assert_eq!(exact_survival(n).unwrap(), brute_force(n), "n = {n}");
    }
}

#[test]
fn simulated_survival_within_three_sigma_of_enumeration() {
    let pairs = 200_000;
    let params = SurvivalParams::pair(pairs, 3, vec![1, 2, 3]);
    let table = run_survival_experiment(&params, 2024, Mode::Parallel).unwrap();
    for n in 1..=3u32 {
        let (d, t) = brute_force(n);
        let exact = d as f64 / t as f64;
        let est = table.fraction(u64::from(n)).unwrap();
        let sigma = binomial_sigma(exact, pairs);
        assert!(
            (est - exact).abs() <= 3.0 * sigma,
            "n = {n}: simulated {est}, exact {exact}, sigma {sigma}"
        );
    }
}
