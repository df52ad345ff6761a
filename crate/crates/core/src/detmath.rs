//! Exact detection-probability combinatorics.
//!
//! A single validator checking `r` of `k` segments without replacement
//! misses all `f` tampered segments with probability
//! `C(k-f, r) / C(k, r)`; `q` independent validators all miss with that
//! probability to the `q`-th power, and detection is the complement.
//!
//! The float path evaluates the ratio as the product
//! `prod_{i=0..r} (k-f-i)/(k-i)`, which never materializes a factorial and
//! is overflow-free for any desk-scale parameters. A big-rational mode
//! computes the same quantities exactly and backs the oracle comparisons
//! in the test suites.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("audit parameters need k >= 1, got k=0")]
    ZeroSegments,
    #[error("checks per validator must satisfy 1 <= r <= k, got r={r}, k={k}")]
    InvalidChecks { r: u32, k: u32 },
    #[error("tampered count must satisfy f <= k, got f={f}, k={k}")]
    InvalidTampered { f: u32, k: u32 },
    #[error("validator count must be at least 1")]
    ZeroValidators,
    #[error("target probability must lie strictly between 0 and 1, got {0}")]
    TargetOutOfRange(f64),
    #[error("target is unreachable: honest output (f=0) can never be flagged")]
    UnreachableTarget,
}

/// The audit protocol's knobs: `k` segments, `f` of them tampered, `r`
/// checks per validator, `q` validators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditParams {
    pub k: u32,
    pub f: u32,
    pub r: u32,
    pub q: u32,
}

impl AuditParams {
    pub fn new(k: u32, f: u32, r: u32, q: u32) -> Result<Self, ParamError> {
        let params = Self { k, f, r, q };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        validate_kfr(self.k, self.f, self.r)?;
        if self.q == 0 {
            return Err(ParamError::ZeroValidators);
        }
        Ok(())
    }
}

fn validate_kfr(k: u32, f: u32, r: u32) -> Result<(), ParamError> {
    if k == 0 {
        return Err(ParamError::ZeroSegments);
    }
    if r == 0 || r > k {
        return Err(ParamError::InvalidChecks { r, k });
    }
    if f > k {
        return Err(ParamError::InvalidTampered { f, k });
    }
    Ok(())
}

/// Probability that one validator's `r` uniform picks avoid all `f`
/// tampered segments: `C(k-f, r) / C(k, r)`, evaluated in product form.
///
/// `f = 0` gives 1 (an honest output can never be flagged); `r > k - f`
/// gives 0 (the picks cannot fit in the clean pool).
pub fn p_single_fail(k: u32, f: u32, r: u32) -> Result<f64, ParamError> {
    validate_kfr(k, f, r)?;
    if r > k - f {
        return Ok(0.0);
    }
    let mut p = 1.0f64;
    for i in 0..r {
        p *= f64::from(k - f - i) / f64::from(k - i);
    }
    Ok(p)
}

// Binary exponentiation over the full u32 range; `powi` takes an i32 and
// would wrap for enormous validator counts.
fn pow_u32(mut base: f64, mut exp: u32) -> f64 {
    let mut acc = 1.0;
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= base;
        }
        base *= base;
        exp >>= 1;
    }
    acc
}

/// Probability that at least one of `q` independent validators hits a
/// tampered segment: `1 - p_single_fail^q`.
pub fn p_detect(k: u32, f: u32, r: u32, q: u32) -> Result<f64, ParamError> {
    if q == 0 {
        return Err(ParamError::ZeroValidators);
    }
    let single = p_single_fail(k, f, r)?;
    Ok(1.0 - pow_u32(single, q))
}

fn big_binomial(n: u32, r: u32) -> BigInt {
    if r > n {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..u64::from(r) {
        acc = acc * BigInt::from(u64::from(n) - i) / BigInt::from(i + 1);
    }
    acc
}

/// Exact-rational [`p_single_fail`]: the oracle side of the dual route.
pub fn p_single_fail_exact(k: u32, f: u32, r: u32) -> Result<BigRational, ParamError> {
    validate_kfr(k, f, r)?;
    Ok(BigRational::new(big_binomial(k - f, r), big_binomial(k, r)))
}

/// Exact-rational [`p_detect`].
pub fn p_detect_exact(k: u32, f: u32, r: u32, q: u32) -> Result<BigRational, ParamError> {
    if q == 0 {
        return Err(ParamError::ZeroValidators);
    }
    let single = p_single_fail_exact(k, f, r)?;
    let mut power = BigRational::one();
    for _ in 0..q {
        power *= &single;
    }
    Ok(BigRational::one() - power)
}

/// Smallest validator count whose detection probability reaches `target`,
/// found from the log form and then pinned by direct evaluation.
pub fn min_validators(k: u32, f: u32, r: u32, target: f64) -> Result<u32, ParamError> {
    validate_kfr(k, f, r)?;
    if !(target > 0.0 && target < 1.0) {
        return Err(ParamError::TargetOutOfRange(target));
    }
    let single = p_single_fail(k, f, r)?;
    if single >= 1.0 {
        return Err(ParamError::UnreachableTarget);
    }
    if single <= 0.0 {
        return Ok(1);
    }
    let estimate = ((1.0 - target).ln() / single.ln()).ceil();
    let mut q = if estimate.is_finite() && estimate >= 1.0 {
        estimate as u32 // saturates at u32::MAX for absurd targets
    } else {
        1
    };
    while 1.0 - pow_u32(single, q) < target {
        q += 1;
    }
    while q > 1 && 1.0 - pow_u32(single, q - 1) >= target {
        q -= 1;
    }
    Ok(q)
}

/// One point of a detection sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: u32,
    pub f: u32,
    pub r: u32,
    pub q: u32,
    pub p_detect: f64,
}

/// Axis values for a detection sweep; the cartesian product is evaluated.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub k: Vec<u32>,
    pub f: Vec<u32>,
    pub r: Vec<u32>,
    pub q: Vec<u32>,
}

impl SweepGrid {
    /// The grid behind the reference detection figure: k=20, f=2,
    /// r in 1..=4, q in 1..=20.
    pub fn reference() -> Self {
        Self {
            k: vec![20],
            f: vec![2],
            r: (1..=4).collect(),
            q: (1..=20).collect(),
        }
    }
}

/// Evaluates exact `p_detect` over a parameter grid, one row per
/// combination, ordered lexicographically by `(k, f, r, q)`. Invalid
/// combinations surface as errors.
pub fn sweep(grid: &SweepGrid) -> Result<Vec<SweepRow>, ParamError> {
    let mut axes = grid.clone();
    for axis in [&mut axes.k, &mut axes.f, &mut axes.r, &mut axes.q] {
        axis.sort_unstable();
        axis.dedup();
    }
    let mut rows = Vec::new();
    for &k in &axes.k {
        for &f in &axes.f {
            for &r in &axes.r {
                for &q in &axes.q {
                    rows.push(SweepRow {
                        k,
                        f,
                        r,
                        q,
                        p_detect: p_detect(k, f, r, q)?,
                    });
                }
            }
        }
    }
    Ok(rows)
}
