//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use dpsoa::hypothesis::{HypothesisClass, Predictor};
use dpsoa::mech::HypList;
use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::Rng;

/// Does `rows` shatter a complete mistake tree of depth `d`?
fn shatters(rows: &[&Vec<bool>], n: usize, d: u32) -> bool {
    if d == 0 {
        return !rows.is_empty();
    }
    if rows.len() < 1 << d {
        return false;
    }
    (0..n).any(|x| {
        let zero: Vec<&Vec<bool>> = rows.iter().copied().filter(|r| !r[x]).collect();
        let one: Vec<&Vec<bool>> = rows.iter().copied().filter(|r| r[x]).collect();
        shatters(&zero, n, d - 1) && shatters(&one, n, d - 1)
    })
}

/// Littlestone dimension by searching for the deepest shattered tree;
/// −1 for the empty class.
pub fn ldim_bruteforce(rows: &[Vec<bool>], n: usize) -> i32 {
    let refs: Vec<&Vec<bool>> = rows.iter().collect();
    if refs.is_empty() {
        return -1;
    }
    let mut d = 0;
    while shatters(&refs, n, d + 1) {
        d += 1;
    }
    d as i32
}

pub fn class_rows(class: &HypothesisClass) -> Vec<Vec<bool>> {
    class.hypotheses().iter().map(|h| h.iter().collect()).collect()
}

/// `m` distinct label vectors on `n` points, drawn without replacement.
pub fn random_rows<R: Rng>(n: usize, m: usize, rng: &mut R) -> Vec<Vec<bool>> {
    let mut all: Vec<usize> = (0..1usize << n).collect();
    all.shuffle(rng);
    all.truncate(m.min(1 << n));
    all.into_iter().map(|v| (0..n).map(|b| (v >> b) & 1 == 1).collect()).collect()
}

pub fn freq_naive(list: &HypList, f: &Predictor) -> (usize, usize) {
    let hits = list.entries().iter().filter(|e| format!("{e}") == format!("{f}")).count();
    (hits, list.len())
}

/// Fixed-point arithmetic with `SCALE` decimal digits.
const SCALE: u32 = 40;

fn one() -> BigInt {
    BigInt::from(10u32).pow(SCALE)
}

fn div(a: &BigInt, b: &BigInt) -> BigInt {
    a * one() / b
}

/// `atanh(1/q)` by its power series.
fn atanh_inv(q: u64) -> BigInt {
    let q = BigInt::from(q);
    let q2 = &q * &q;
    let mut term = one() / &q;
    let mut sum = BigInt::zero();
    let mut k = 0u64;
    while !term.is_zero() {
        sum += &term / BigInt::from(2 * k + 1);
        term /= &q2;
        k += 1;
    }
    sum
}

fn sqrt(a: &BigInt) -> BigInt {
    // Newton on the scaled integer a·10^SCALE.
    let target = a * one();
    let mut x = target.sqrt() + BigInt::one();
    loop {
        let next = (&x + &target / &x) / 2;
        if next >= x {
            return x;
        }
        x = next;
    }
}

fn to_f64(a: &BigInt) -> f64 {
    let s = a.to_string();
    let (int, frac) = if s.len() > SCALE as usize {
        s.split_at(s.len() - SCALE as usize)
    } else {
        ("0", s.as_str())
    };
    format!("{int}.{frac:0>40}").parse().unwrap()
}

/// `ln 10 = 3 ln 2 + ln(5/4)`, with `ln 2 = 2 atanh(1/3)` and
/// `ln(5/4) = 2 atanh(1/9)`.
fn ln10() -> BigInt {
    let ln2 = atanh_inv(3) * 2;
    let ln54 = atanh_inv(9) * 2;
    ln2 * 3 + ln54
}

/// `ε/(2√(2T ln(1/δ)))` for `δ = 10^{−p}`, evaluated in 40-digit fixed point.
pub fn composition_epsilon_oracle(epsilon_num: u64, p: u64, horizon: u64) -> f64 {
    let ln_inv_delta = ln10() * BigInt::from(p);
    let inner = ln_inv_delta * BigInt::from(2 * horizon);
    let denom = sqrt(&inner) * 2;
    to_f64(&div(&(one() * BigInt::from(epsilon_num)), &denom))
}
