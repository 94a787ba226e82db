//! Special functions used by the antenna, fading and outage models.

use std::sync::OnceLock;

const LN_FACTORIAL_TABLE: usize = 512;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACTORIAL_TABLE);
        let mut acc = 0.0f64;
        t.push(0.0);
        for n in 1..LN_FACTORIAL_TABLE {
            acc += (n as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln(n!)`.
pub fn ln_factorial(n: usize) -> f64 {
    if n < LN_FACTORIAL_TABLE {
        ln_factorial_table()[n]
    } else {
        libm::lgamma(n as f64 + 1.0)
    }
}

/// `n!` as a float; exact for `n ≤ 20`, overflows to infinity past 170.
pub fn factorial(n: usize) -> f64 {
    if n <= 20 {
        (1..=n as u64).product::<u64>() as f64
    } else {
        ln_factorial(n).exp()
    }
}

/// Binomial coefficient `C(n, k)` as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    if n <= 60 {
        let k = k.min(n - k);
        let mut c: u128 = 1;
        for i in 0..k {
            c = c * (n - i) as u128 / (i + 1) as u128;
        }
        return c as f64;
    }
    (ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k))
        .exp()
        .round()
}

/// `ln` of the multinomial coefficient `(Σx)! / Π x_i!`.
pub fn ln_multinomial(parts: &[usize]) -> f64 {
    let total: usize = parts.iter().sum();
    ln_factorial(total) - parts.iter().map(|&x| ln_factorial(x)).sum::<f64>()
}

/// Number of weak compositions of `total` into `parts` nonnegative parts.
pub fn composition_count(total: usize, parts: usize) -> u64 {
    if parts == 0 {
        return u64::from(total == 0);
    }
    let c = binomial(total + parts - 1, parts - 1);
    if c > u64::MAX as f64 {
        u64::MAX
    } else {
        c as u64
    }
}

/// Calls `f` once for every weak composition `x_1 + … + x_parts = total`, in
/// lexicographic order.
pub fn for_each_composition<F: FnMut(&[usize])>(total: usize, parts: usize, mut f: F) {
    if parts == 0 {
        if total == 0 {
            f(&[]);
        }
        return;
    }
    let mut buf = vec![0usize; parts];
    fn rec<F: FnMut(&[usize])>(buf: &mut [usize], idx: usize, remaining: usize, f: &mut F) {
        if idx + 1 == buf.len() {
            buf[idx] = remaining;
            f(buf);
            return;
        }
        for v in 0..=remaining {
            buf[idx] = v;
            rec(buf, idx + 1, remaining - v, f);
        }
    }
    rec(&mut buf, 0, total, &mut f);
}

/// Regularized lower incomplete gamma `P(a, y)` for integer `a ≥ 1`, i.e. the
/// probability that a sum of `a` unit exponentials is below `y`.
pub fn gamma_p_int(a: usize, y: f64) -> f64 {
    debug_assert!(a >= 1);
    if y <= 0.0 {
        return 0.0;
    }
    if y < a as f64 {
        // e^{-y} Σ_{k≥a} y^k/k!: no cancellation for small y.
        let mut term = (a as f64 * y.ln() - y - ln_factorial(a)).exp();
        let mut sum = term;
        let mut k = a;
        loop {
            k += 1;
            term *= y / k as f64;
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        sum.min(1.0)
    } else {
        // 1 − e^{-y} Σ_{k<a} y^k/k!
        let mut term = (-y).exp();
        let mut sum = term;
        for k in 1..a {
            term *= y / k as f64;
            sum += term;
        }
        (1.0 - sum).max(0.0)
    }
}

/// Bessel function of the first kind of integer order.
pub fn bessel_j(n: i32, x: f64) -> f64 {
    match n {
        0 => libm::j0(x),
        1 => libm::j1(x),
        _ => libm::jn(n, x),
    }
}

/// `J_1(x) / x`, continuous at zero where it equals 1/2.
pub fn j1_over_x(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        // J_1(x)/x = 1/2 − x²/16 + x⁴/384 − x⁶/18432
        0.5 - x2 / 16.0 + x2 * x2 / 384.0 - x2 * x2 * x2 / 18432.0
    } else {
        libm::j1(x) / x
    }
}

/// `J_3(x) / x³`, continuous at zero where it equals 1/48.
pub fn j3_over_x3(x: f64) -> f64 {
    if x.abs() < 0.1 {
        // Σ_k (−1)^k (x/2)^{2k} / (k! (k+3)!) / 8
        let q = -(x * x) / 4.0;
        let mut term = 1.0 / 6.0;
        let mut sum = term;
        for k in 0..8 {
            let kf = k as f64;
            term *= q / ((kf + 1.0) * (kf + 4.0));
            sum += term;
        }
        sum / 8.0
    } else {
        libm::jn(3, x) / (x * x * x)
    }
}

/// `ln ₁F₁(a; 1; z)` for `a > 0` and `z ≥ 0`, by direct summation of the
/// convergent series `Σ (a)_k z^k / (k!)²` carried in log space.
pub fn ln_hyp1f1_b1(a: f64, z: f64) -> f64 {
    debug_assert!(a > 0.0 && z >= 0.0);
    if z == 0.0 {
        return 0.0;
    }
    let ln_z = z.ln();
    let mut ln_terms = Vec::with_capacity(64);
    let mut ln_t = 0.0f64;
    let mut ln_max = 0.0f64;
    ln_terms.push(0.0);
    let mut k = 0usize;
    loop {
        let kf = k as f64;
        ln_t += (a + kf).ln() + ln_z - 2.0 * (kf + 1.0).ln();
        k += 1;
        ln_terms.push(ln_t);
        if ln_t > ln_max {
            ln_max = ln_t;
        }
        // Term ratio (a+k)z/(k+1)² is below one once past the peak.
        let ratio = (a + k as f64) * z / ((k as f64 + 1.0).powi(2));
        if ratio < 1.0 && ln_t < ln_max - 50.0 {
            break;
        }
        if k > 100_000 {
            break;
        }
    }
    let s: f64 = ln_terms.iter().map(|&l| (l - ln_max).exp()).sum();
    ln_max + s.ln()
}
