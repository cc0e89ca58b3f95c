//! Two-sample Mann-Whitney U test.
//!
//! Conventions: two-tailed, midranks for ties, U reported as the smaller of
//! the two group statistics. Small samples get an exact p from the full
//! permutation distribution; larger ones use the normal approximation with
//! tie correction and a 0.5 continuity correction.

/// Method used for the p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PMethod {
    /// Full enumeration of the rank-sum distribution.
    Exact,
    /// Normal approximation with tie correction and continuity correction.
    NormalApprox,
}

#[derive(Debug, Clone)]
pub struct MannWhitney {
    /// min(U_a, U_b); half-integral when ties straddle the groups.
    pub u: f64,
    /// Two-tailed p-value, capped at 1.
    pub p: f64,
    pub method: PMethod,
    pub n_a: usize,
    pub n_b: usize,
}

impl MannWhitney {
    /// One-line statement of the conventions behind `u` and `p`, for output
    /// metadata.
    pub fn describe(&self) -> String {
        let method = match self.method {
            PMethod::Exact => "exact enumeration",
            PMethod::NormalApprox => "normal approximation, tie-corrected, continuity-corrected",
        };
        format!(
            "mann-whitney two-tailed; midranks for ties; U = min(Ua, Ub); p by {method}; n = ({}, {})",
            self.n_a, self.n_b
        )
    }
}

/// Exact enumeration is used when the smaller group has at most this many
/// observations...
const EXACT_MAX_MIN_N: usize = 8;
/// ...and the pooled sample is small enough for the rank-sum distribution
/// table to stay cheap.
const EXACT_MAX_TOTAL_N: usize = 200;

/// Two-tailed Mann-Whitney U test on two independent samples.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> MannWhitney {
    assert!(!a.is_empty() && !b.is_empty(), "both samples must be non-empty");
    assert!(
        a.iter().chain(b.iter()).all(|x| x.is_finite()),
        "samples must be finite"
    );
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;

    // Midranks of the pooled sample, doubled so they are exact integers.
    let mut pooled: Vec<(f64, usize)> = a
        .iter()
        .chain(b.iter())
        .copied()
        .enumerate()
        .map(|(i, x)| (x, i))
        .collect();
    pooled.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    let mut doubled_rank = vec![0u64; n];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        // Positions i..j share value; midrank = (i+1 + j) / 2 in rank units.
        let doubled = (i + 1 + j) as u64;
        for k in i..j {
            doubled_rank[pooled[k].1] = doubled;
        }
        tie_sizes.push(j - i);
        i = j;
    }

    let doubled_r_a: u64 = (0..na).map(|i| doubled_rank[i]).sum();
    // U_a = R_a - na(na+1)/2, doubled to stay integral.
    let doubled_u_a = doubled_r_a as i64 - (na * (na + 1)) as i64;
    let doubled_u_b = 2 * (na * nb) as i64 - doubled_u_a;
    let doubled_u = doubled_u_a.min(doubled_u_b);
    let u = doubled_u as f64 / 2.0;

    let use_exact = na.min(nb) <= EXACT_MAX_MIN_N && n <= EXACT_MAX_TOTAL_N;
    let p = if use_exact {
        exact_two_tailed_p(&doubled_rank, na, doubled_u)
    } else {
        normal_two_tailed_p(na, nb, &tie_sizes, u)
    };
    MannWhitney {
        u,
        p: p.min(1.0),
        method: if use_exact { PMethod::Exact } else { PMethod::NormalApprox },
        n_a: na,
        n_b: nb,
    }
}

/// P(U' <= u_obs) + P(U' >= na*nb - u_obs) over all ways to assign `na` of
/// the pooled observations to group a; values enter through their doubled
/// midranks. Counting uses a subset-sum table over (subset size, rank sum).
fn exact_two_tailed_p(doubled_rank: &[u64], na: usize, doubled_u_obs: i64) -> f64 {
    let n = doubled_rank.len();
    let nb = n - na;
    let max_sum: usize = doubled_rank.iter().map(|&r| r as usize).sum();
    // counts[k][s]: subsets of size k with doubled rank sum s.
    let mut counts = vec![vec![0u128; max_sum + 1]; na + 1];
    counts[0][0] = 1;
    for &r in doubled_rank {
        let r = r as usize;
        for k in (0..na).rev() {
            let (lower, upper) = counts.split_at_mut(k + 1);
            let src = &lower[k];
            let dst = &mut upper[0];
            for s in 0..=max_sum.saturating_sub(r) {
                if src[s] != 0 {
                    dst[s + r] += src[s];
                }
            }
        }
    }
    let offset = (na * (na + 1)) as i64;
    let hi_cut = 2 * (na * nb) as i64 - doubled_u_obs;
    let mut below = 0u128;
    let mut above = 0u128;
    let mut total = 0u128;
    for (s, &c) in counts[na].iter().enumerate() {
        if c == 0 {
            continue;
        }
        total += c;
        let du = s as i64 - offset;
        if du <= doubled_u_obs {
            below += c;
        }
        if du >= hi_cut {
            above += c;
        }
    }
    (below + above) as f64 / total as f64
}

/// Normal-approximation p with tie correction and 0.5 continuity correction.
fn normal_two_tailed_p(na: usize, nb: usize, tie_sizes: &[usize], u: f64) -> f64 {
    let n = (na + nb) as f64;
    let tie_term: f64 = tie_sizes
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let mean = na as f64 * nb as f64 / 2.0;
    let var = na as f64 * nb as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0; // every observation tied with every other
    }
    // u <= mean by construction; the continuity correction pulls toward it.
    let z = ((mean - u - 0.5).max(0.0)) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2)
}

/// Complementary error function, |error| < 1.2e-7 everywhere.
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807
                            + t * (-1.13520398
                                + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277))))))));
    let ans = t * poly.exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}
