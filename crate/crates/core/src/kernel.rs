//! Extended-precision arithmetic context and the q-series primitives
//! (shifted q-factorials, their infinite extension, and terminating or
//! convergent `r phi r-1` sums) that every other module builds on.
//!
//! All values are [`QReal`]s carried at the working precision of a
//! [`PrecisionContext`]. Nothing here holds state; every function is a pure
//! function of its arguments.

use rug::ops::Pow;
use rug::{Assign, Float};

use crate::error::{Error, Result};

/// Extended-precision real value. Finite unless an operation says otherwise.
pub type QReal = Float;

/// Working precision, acceptance tolerance and a hard cap on the number of
/// terms any series or product may consume.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionContext {
    bits: u32,
    tol: QReal,
    max_terms: usize,
}

impl PrecisionContext {
    pub const DEFAULT_BITS: u32 = 256;
    pub const DEFAULT_TOL_EXP: u32 = 200;
    pub const DEFAULT_MAX_TERMS: usize = 100_000;
    pub const MIN_BITS: u32 = 64;

    /// Context with `tol = 2^-tol_exp`.
    pub fn new(bits: u32, tol_exp: u32, max_terms: usize) -> Result<Self> {
        if bits < Self::MIN_BITS {
            return Err(Error::invalid(format!("bits must be >= {}", Self::MIN_BITS)));
        }
        let tol = Float::with_val(bits, Float::u_exp(1, -(tol_exp as i32)));
        Self::with_tol(bits, tol, max_terms)
    }

    pub fn with_tol(bits: u32, tol: QReal, max_terms: usize) -> Result<Self> {
        if bits < Self::MIN_BITS {
            return Err(Error::invalid(format!("bits must be >= {}", Self::MIN_BITS)));
        }
        if !tol.is_finite() || tol <= 0 {
            return Err(Error::invalid("tol must be > 0"));
        }
        if max_terms == 0 {
            return Err(Error::invalid("max_terms must be >= 1"));
        }
        Ok(Self {
            bits,
            tol: Float::with_val(bits, tol),
            max_terms,
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn tol(&self) -> &QReal {
        &self.tol
    }

    pub fn max_terms(&self) -> usize {
        self.max_terms
    }

    /// Same tolerance and term cap at twice the working precision.
    pub fn doubled(&self) -> Self {
        Self {
            bits: self.bits * 2,
            tol: Float::with_val(self.bits * 2, &self.tol),
            max_terms: self.max_terms,
        }
    }

    /// Bound every series or product truncation must certify:
    /// `min(tol, 2^-bits)`, so that results keep improving with precision
    /// even when `tol` is held fixed.
    pub fn truncation_target(&self) -> QReal {
        let unit = Float::with_val(self.bits, Float::u_exp(1, -(self.bits as i32)));
        unit.min(&self.tol)
    }

    /// Same tolerance and term cap with `extra` more bits.
    pub fn widened(&self, extra: u32) -> Self {
        let bits = self.bits + extra;
        Self { bits, tol: Float::with_val(bits, &self.tol), max_terms: self.max_terms }
    }

    pub fn real<T>(&self, value: T) -> QReal
    where
        Float: Assign<T>,
    {
        Float::with_val(self.bits, value)
    }

    /// Parses a decimal literal at the working precision.
    pub fn parse(&self, literal: &str) -> Result<QReal> {
        let parsed = Float::parse(literal.trim())
            .map_err(|e| Error::invalid(format!("cannot parse decimal `{literal}`: {e}")))?;
        let value = Float::with_val(self.bits, parsed);
        if !value.is_finite() {
            return Err(Error::invalid(format!("`{literal}` is not finite")));
        }
        Ok(value)
    }

    /// Magnitude below which a quantity is treated as an exact zero
    /// (sixteen guard bits above the unit roundoff).
    pub fn rounding_floor(&self) -> QReal {
        Float::with_val(self.bits, Float::u_exp(1, 16 - self.bits as i32))
    }
}

impl Default for PrecisionContext {
    fn default() -> Self {
        Self::new(Self::DEFAULT_BITS, Self::DEFAULT_TOL_EXP, Self::DEFAULT_MAX_TERMS)
            .expect("default context is valid")
    }
}

/// The base `q` of every q-series, restricted to `0 < q < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct QParam(QReal);

impl QParam {
    pub fn new(q: QReal) -> Result<Self> {
        if !(q.is_finite() && q > 0 && q < 1) {
            return Err(Error::invalid("q must satisfy 0<q<1"));
        }
        Ok(Self(q))
    }

    pub fn parse(literal: &str, ctx: &PrecisionContext) -> Result<Self> {
        Self::new(ctx.parse(literal)?)
    }

    pub fn value(&self) -> &QReal {
        &self.0
    }

    /// `q` rounded to the context precision.
    pub fn at(&self, ctx: &PrecisionContext) -> QReal {
        ctx.real(&self.0)
    }

    /// `q^k` for any integer `k`.
    pub fn pow(&self, k: i64, ctx: &PrecisionContext) -> QReal {
        let k = i32::try_from(k).expect("q exponent fits in i32");
        Float::with_val(ctx.bits(), (&self.0).pow(k))
    }

    /// The base `q^2`, still inside `(0, 1)`.
    pub fn squared(&self) -> QParam {
        let prec = self.0.prec();
        QParam(Float::with_val(prec, self.0.clone().square()))
    }
}

/// Shifted q-factorial `(a;q)_n = prod_{k<n} (1 - a q^k)`.
pub fn qpoch(a: &QReal, q: &QParam, n: usize, ctx: &PrecisionContext) -> QReal {
    let q = q.at(ctx);
    let mut aqk = ctx.real(a);
    let mut prod = ctx.real(1);
    for _ in 0..n {
        prod *= 1u32 - Float::with_val(ctx.bits(), &aqk);
        aqk *= &q;
    }
    prod
}

/// An infinite product together with its a-priori relative truncation bound.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedProduct {
    pub value: QReal,
    /// Upper bound on `|omitted tail - 1|`, i.e. the relative error of `value`.
    pub tail_bound: QReal,
    pub factors: usize,
}

/// `(a;q)_inf`, truncated once the omitted factors `prod_{k>=K}(1 - a q^k)`
/// provably differ from 1 by less than `ctx.truncation_target()`.
///
/// With `x = |a| q^K <= 1/2` the omitted log is bounded by `2x/(1-q)` and the
/// relative error of the truncated product by `4x/(1-q)`.
pub fn qpoch_inf_certified(
    a: &QReal,
    q: &QParam,
    ctx: &PrecisionContext,
) -> Result<CertifiedProduct> {
    let qv = q.at(ctx);
    let one_minus_q = Float::with_val(ctx.bits(), 1 - &qv);
    let mut aqk = ctx.real(a);
    let mut prod = ctx.real(1);
    let mut factors = 0usize;
    let target = ctx.truncation_target();
    loop {
        let x = Float::with_val(ctx.bits(), aqk.abs_ref());
        if x <= 0.5 {
            let bound = Float::with_val(ctx.bits(), &x * 4u32) / &one_minus_q;
            if bound < target {
                return Ok(CertifiedProduct {
                    value: prod,
                    tail_bound: bound,
                    factors,
                });
            }
        }
        if factors >= ctx.max_terms() {
            let bound = Float::with_val(ctx.bits(), &x * 4u32) / &one_minus_q;
            return Err(Error::TruncationFailure {
                what: "infinite q-product",
                terms: factors,
                bound: bound.to_string_radix(10, Some(6)),
            });
        }
        prod *= 1u32 - Float::with_val(ctx.bits(), &aqk);
        aqk *= &qv;
        factors += 1;
    }
}

/// `(a;q)_inf` to relative accuracy `ctx.truncation_target()`.
pub fn qpoch_inf(a: &QReal, q: &QParam, ctx: &PrecisionContext) -> Result<QReal> {
    qpoch_inf_certified(a, q, ctx).map(|c| c.value)
}

/// Basic hypergeometric series
/// `sum_n prod_i (a_i;q)_n / prod_j (b_j;q)_n * z^n / (q;q)_n`
/// with `numerator.len() == denominator.len() + 1`.
///
/// With `terminating_at = Some(N)` one numerator parameter must be `q^-N`
/// and exactly `N + 1` terms are summed. Otherwise terms are accumulated
/// until they fall below `ctx.truncation_target() * |partial sum|` with a
/// decaying term ratio.
/// Terms are generated by the forward ratio `t_{n+1}/t_n`, never from
/// freshly recomputed q-factorials.
pub fn basic_hypergeometric(
    numerator: &[QReal],
    denominator: &[QReal],
    q: &QParam,
    z: &QReal,
    ctx: &PrecisionContext,
    terminating_at: Option<usize>,
) -> Result<QReal> {
    if numerator.len() != denominator.len() + 1 {
        return Err(Error::invalid(
            "basic hypergeometric series needs r numerator and r-1 denominator parameters",
        ));
    }
    let bits = ctx.bits();
    let floor = ctx.rounding_floor();

    if let Some(n) = terminating_at {
        let target = q.pow(-(n as i64), ctx);
        let matches = numerator.iter().any(|a| {
            let diff = Float::with_val(bits, a - &target).abs();
            diff <= Float::with_val(bits, target.abs_ref()) * &floor
        });
        if !matches {
            return Err(Error::invalid(format!(
                "terminating_at = {n} requires a numerator parameter equal to q^-{n}"
            )));
        }
    }

    let qv = q.at(ctx);
    let zv = ctx.real(z);
    let mut qk = ctx.real(1); // q^k
    let mut term = ctx.real(1);
    let mut sum = ctx.real(1);
    let limit = terminating_at.unwrap_or(usize::MAX);
    let target = ctx.truncation_target();
    let mut k = 0usize;
    while k < limit {
        if terminating_at.is_none() && k >= ctx.max_terms() {
            return Err(Error::TruncationFailure {
                what: "basic hypergeometric series",
                terms: k,
                bound: term.to_string_radix(10, Some(6)),
            });
        }
        let mut ratio = Float::with_val(bits, &zv);
        for a in numerator {
            ratio *= 1u32 - Float::with_val(bits, a * &qk);
        }
        for (index, b) in denominator.iter().enumerate() {
            let factor = 1u32 - Float::with_val(bits, b * &qk);
            if Float::with_val(bits, factor.abs_ref()) <= floor {
                return Err(Error::PoleError { index, term: k + 1 });
            }
            ratio /= factor;
        }
        qk *= &qv;
        ratio /= 1u32 - Float::with_val(bits, &qk);
        term *= &ratio;
        sum += &term;
        k += 1;

        if terminating_at.is_none() {
            let r = Float::with_val(bits, ratio.abs_ref());
            if r < 1 {
                let threshold = Float::with_val(bits, sum.abs_ref()) * &target * (1 - r);
                if Float::with_val(bits, term.abs_ref()) <= threshold {
                    break;
                }
            }
        }
    }
    Ok(sum)
}
