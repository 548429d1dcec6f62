//! Binomial probabilities in log space, accurate for very large `n`.
//!
//! The point mass uses the saddle-point expansion (Stirling remainder plus
//! deviance) so nothing is formed by subtracting huge log-factorials.

use std::f64::consts::PI;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln(n!) - ((n + 1/2) ln n - n + ln sqrt(2 pi))`.
pub fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        debug_assert!(n.fract() == 0.0 && n >= 1.0);
        let mut ln_fact = 0.0;
        let mut i = 2.0;
        while i <= n {
            ln_fact += f64::ln(i);
            i += 1.0;
        }
        return ln_fact - ((n + 0.5) * n.ln() - n + LN_SQRT_2PI);
    }
    let nn = n * n;
    if n > 500.0 {
        return (S0 - S1 / nn) / n;
    }
    if n > 80.0 {
        return (S0 - (S1 - S2 / nn) / nn) / n;
    }
    if n > 35.0 {
        return (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n;
    }
    (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
}

/// Deviance term `x ln(x / np) + np - x`, evaluated without cancellation.
pub fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        return s;
    }
    x * (x / np).ln() + np - x
}

/// `ln P[Z = x]` for `Z ~ Bin(n, p)`, with `q = 1 - p` supplied separately
/// so callers can pass it without rounding.
pub fn ln_dbinom(x: u64, n: u64, p: f64, q: f64) -> f64 {
    if x > n {
        return f64::NEG_INFINITY;
    }
    if p == 0.0 {
        return if x == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if x == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let nf = n as f64;
    if x == 0 {
        return nf * ln_q(p, q);
    }
    if x == n {
        return nf * ln_q(q, p);
    }
    let xf = x as f64;
    let lc = stirlerr(nf) - stirlerr(xf) - stirlerr(nf - xf) - bd0(xf, nf * p) - bd0(nf - xf, nf * q);
    let lf = (2.0 * PI).ln() + xf.ln() + (-xf / nf).ln_1p();
    lc - 0.5 * lf
}

/// `ln q` given `p = 1 - q`, precise for either one small.
fn ln_q(p: f64, q: f64) -> f64 {
    if p < 0.5 {
        (-p).ln_1p()
    } else {
        q.ln()
    }
}

const MAX_TERMS: u64 = 200_000_000;

/// `P[Z >= d]` for `Z ~ Bin(n, p)`, `q = 1 - p`.
///
/// Sums point masses outward from `d` on whichever side of the mode keeps
/// them decreasing, taking the complement when that is the lower tail.
pub fn upper_tail(d: u64, n: u64, p: f64, q: f64) -> f64 {
    if d == 0 {
        return 1.0;
    }
    if d > n {
        return 0.0;
    }
    if d == n {
        return (n as f64 * ln_q(q, p)).exp();
    }
    let mode = ((n as f64 + 1.0) * p).floor() as u64;
    let ln_odds = p.ln() - q.ln();
    if d >= mode {
        tail_sum(d, n, p, q, ln_odds, true).min(1.0)
    } else {
        (1.0 - tail_sum(d - 1, n, p, q, ln_odds, false)).clamp(0.0, 1.0)
    }
}

/// Sum of masses from `start` going up (towards `n`) or down (towards 0).
fn tail_sum(start: u64, n: u64, p: f64, q: f64, ln_odds: f64, up: bool) -> f64 {
    let ln_first = ln_dbinom(start, n, p, q);
    if ln_first == f64::NEG_INFINITY {
        return 0.0;
    }
    let nf = n as f64;
    let mut rel = 1.0;
    let mut acc = 1.0;
    let mut x = start;
    let mut steps = 0;
    loop {
        if up {
            if x == n {
                break;
            }
            // ratio P[x+1] / P[x] = (n - x) / (x + 1) * p / q
            rel *= (((nf - x as f64) / (x as f64 + 1.0)).ln() + ln_odds).exp();
            x += 1;
        } else {
            if x == 0 {
                break;
            }
            // ratio P[x-1] / P[x] = x / (n - x + 1) * q / p
            rel *= ((x as f64 / (nf - x as f64 + 1.0)).ln() - ln_odds).exp();
            x -= 1;
        }
        acc += rel;
        steps += 1;
        if rel < acc * 1e-17 || steps >= MAX_TERMS {
            break;
        }
    }
    (ln_first + acc.ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_dbinom(x: u64, n: u64, p: f64) -> f64 {
        let mut ln_c = 0.0;
        for i in 0..x {
            ln_c += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
        }
        (ln_c + x as f64 * p.ln() + (n - x) as f64 * (1.0 - p).ln()).exp()
    }

    #[test]
    fn stirlerr_continuity() {
        // Table branch and series branch agree at the seam.
        let table = {
            let n: f64 = 16.0;
            let ln_fact: f64 = (2..=16).map(|i| (i as f64).ln()).sum();
            ln_fact - ((n + 0.5) * n.ln() - n + LN_SQRT_2PI)
        };
        assert!((stirlerr(16.0) - table).abs() < 1e-12);
    }

    #[test]
    fn dbinom_matches_direct() {
        for &(n, p) in &[(20u64, 0.3f64), (100, 0.9), (1000, 0.5)] {
            for x in [0, 1, n / 3, n / 2, n - 1, n] {
                let a = ln_dbinom(x, n, p, 1.0 - p).exp();
                let b = exact_dbinom(x, n, p);
                assert!((a - b).abs() <= 1e-12 + 1e-9 * b, "n={n} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn tail_matches_direct() {
        for &(n, p) in &[(20u64, 0.7f64), (200, 0.05), (1000, 0.999)] {
            for d in 0..=n {
                let direct: f64 = (d..=n).map(|x| exact_dbinom(x, n, p)).sum();
                let ours = upper_tail(d, n, p, 1.0 - p);
                assert!((ours - direct).abs() < 1e-10, "n={n} d={d}: {ours} vs {direct}");
            }
        }
    }
}
