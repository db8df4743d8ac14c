//! Hidden-unit counts sufficient (or necessary) for universal approximation.

use crate::error::{Error, Result};

fn check_kn(k: u32, n: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::config("output bits n must be at least 1"));
    }
    if k + n > 62 {
        return Err(Error::Capacity(format!("k + n = {} exceeds 62; use the log2 variant", k + n)));
    }
    Ok(())
}

fn pow2(e: u32) -> Result<u64> {
    1u64.checked_shl(e).ok_or_else(|| Error::Capacity(format!("2^{e} overflows")))
}

/// `|S| + d - 1`: enough hidden units to reach every behavior on `S`.
pub fn bound_embodied(support_card: u64, d: u64) -> Result<u64> {
    if support_card == 0 {
        return Err(Error::config("support cardinality must be at least 1"));
    }
    (support_card - 1).checked_add(d).ok_or_else(|| Error::Capacity("bound overflows".into()))
}

/// `⌈2^k (2^n - 1) / 2⌉`, sufficient for every conditional distribution.
pub fn bound_nonembodied(k: u32, n: u32) -> Result<u64> {
    check_kn(k, n)?;
    let free = pow2(k)?.checked_mul(pow2(n)? - 1).ok_or_else(|| Error::Capacity("bound overflows".into()))?;
    Ok(free.div_ceil(2))
}

/// `⌈2^(k+n) / 2 - 1⌉`, sufficient via joint-distribution approximation.
pub fn bound_joint(k: u32, n: u32) -> Result<u64> {
    check_kn(k, n)?;
    Ok(pow2(k + n - 1)? - 1)
}

/// `⌈(2^k (2^n - 1) - n) / (n + k + 1)⌉`, necessary for every conditional.
pub fn bound_lower(k: u32, n: u32) -> Result<u64> {
    check_kn(k, n)?;
    let free = pow2(k)? * (pow2(n)? - 1);
    Ok((free - n as u64).div_ceil((n + k + 1) as u64))
}

fn log2_one_minus_pow2(e: f64) -> f64 {
    // log2(1 - 2^-e)
    (-(-e * std::f64::consts::LN_2).exp()).ln_1p() / std::f64::consts::LN_2
}

/// `log2` of the unrounded non-embodied bound, valid for any `k, n`.
pub fn bound_nonembodied_log2(k: u32, n: u32) -> f64 {
    k as f64 + n as f64 + log2_one_minus_pow2(n as f64) - 1.0
}

pub fn bound_joint_log2(k: u32, n: u32) -> f64 {
    let e = (k + n) as f64 - 1.0;
    e + log2_one_minus_pow2(e)
}

pub fn bound_lower_log2(k: u32, n: u32) -> f64 {
    let free_log2 = k as f64 + n as f64 + log2_one_minus_pow2(n as f64);
    // subtracting n is negligible once 2^(k+n) dwarfs it
    let numer_log2 = if free_log2 < 60.0 {
        (free_log2.exp2() - n as f64).log2()
    } else {
        free_log2
    };
    numer_log2 - ((n + k + 1) as f64).log2()
}
