//! Independent oracles shared by the integration tests. The oracles do not
//! call into the code paths they check.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use score::network::{Edge, Node, RoadNetwork};

/// Every simple path from `src` to `dst` with its weight summed in path
/// order; returns the cheapest, ties broken by lexicographic node order.
pub fn brute_force_route(
    n_nodes: u64,
    weighted: &[(u64, u64, f64)],
    src: u64,
    dst: u64,
) -> Option<(f64, Vec<u64>)> {
    fn dfs(
        cur: u64,
        dst: u64,
        weighted: &[(u64, u64, f64)],
        path: &mut Vec<u64>,
        acc: f64,
        best: &mut Option<(f64, Vec<u64>)>,
    ) {
        if cur == dst {
            let better = match best {
                None => true,
                Some((w, p)) => acc < *w || (acc == *w && path.as_slice() < p.as_slice()),
            };
            if better {
                *best = Some((acc, path.clone()));
            }
            return;
        }
        for &(a, b, w) in weighted {
            if a == cur && !path.contains(&b) {
                path.push(b);
                dfs(b, dst, weighted, path, acc + w, best);
                path.pop();
            }
        }
    }
    assert!(src >= 1 && src <= n_nodes && dst >= 1 && dst <= n_nodes);
    let mut best = None;
    dfs(src, dst, weighted, &mut vec![src], 0.0, &mut best);
    best
}

/// Network with nodes `1..=n` on a small grid and one edge per entry whose
/// length equals the given weight (so `alpha = 1, beta = 0` reproduces it).
pub fn network_from_weights(n: u64, weighted: &[(u64, u64, f64)]) -> RoadNetwork {
    let nodes = (1..=n)
        .map(|i| Node::new(i, 43.80 + (i % 3) as f64 * 0.01, 18.30 + (i / 3) as f64 * 0.01))
        .collect();
    let edges = weighted.iter().map(|&(a, b, w)| Edge::new(a, b, w)).collect();
    RoadNetwork::new(nodes, edges).unwrap()
}

/// Fixed-point arithmetic with `FRAC_BITS` fractional bits.
pub const FRAC_BITS: u32 = 320;

pub fn fixed_from_f64(x: f64) -> BigInt {
    assert!(x.is_finite());
    if x == 0.0 {
        return BigInt::from(0);
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { -1 } else { 1 };
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let mant = if exp == 0 {
        (bits & 0xf_ffff_ffff_ffff) << 1
    } else {
        (bits & 0xf_ffff_ffff_ffff) | 0x10_0000_0000_0000
    };
    // x = mant * 2^(exp - 1075)
    let e = exp - 1075 + FRAC_BITS as i64;
    let m = BigInt::from(mant) * sign;
    if e >= 0 {
        m << (e as usize)
    } else {
        m >> ((-e) as usize)
    }
}

pub fn fixed_to_f64(v: &BigInt) -> f64 {
    v.to_f64().expect("finite") * 2f64.powi(-(FRAC_BITS as i32))
}

fn one() -> BigInt {
    BigInt::from(1) << FRAC_BITS as usize
}

fn mul(a: &BigInt, b: &BigInt) -> BigInt {
    (a * b) >> FRAC_BITS as usize
}

/// `exp(-x)` for fixed-point `x >= 0`: Taylor series on `x / 2^k < 1/2`
/// followed by `k` squarings.
pub fn exp_neg_fixed(x: &BigInt) -> BigInt {
    let half = one() >> 1usize;
    let mut k = 0usize;
    let mut y = x.clone();
    while y >= half {
        y >>= 1usize;
        k += 1;
    }
    let mut sum = one();
    let mut term = one();
    let mut n = 1u32;
    loop {
        term = -mul(&term, &y) / BigInt::from(n);
        if term == BigInt::from(0) {
            break;
        }
        sum += &term;
        n += 1;
    }
    for _ in 0..k {
        sum = mul(&sum, &sum);
    }
    sum
}

/// High-precision `exp(-(t_curr - t_meas)^2 / denominator)`.
pub fn weight_oracle(t_curr: f64, t_meas: f64, denominator: f64) -> f64 {
    fixed_to_f64(&weight_oracle_fixed(t_curr, t_meas, denominator))
}

fn weight_oracle_fixed(t_curr: f64, t_meas: f64, denominator: f64) -> BigInt {
    let dt = fixed_from_f64(t_curr) - fixed_from_f64(t_meas);
    let x = mul(&dt, &dt) * one() / fixed_from_f64(denominator);
    exp_neg_fixed(&x)
}

/// High-precision `r_on * a + r_off * (1 - a)`.
pub fn fuse_oracle(r_on: f64, r_off: f64, t_curr: f64, t_meas: f64, denominator: f64) -> f64 {
    let a = weight_oracle_fixed(t_curr, t_meas, denominator);
    let r = mul(&fixed_from_f64(r_on), &a) + mul(&fixed_from_f64(r_off), &(one() - &a));
    fixed_to_f64(&r)
}
