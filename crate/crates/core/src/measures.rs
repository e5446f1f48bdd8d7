//! Discrete orthogonality measures and Gram-matrix assembly.
//!
//! Four measure families are provided:
//!
//! * `HermiteExtremal(a)`: nodes `x_m = (a^-1 q^-m - a q^m)/2`, `m` in Z,
//!   weights `a^{4m} q^{m(2m-1)} (1 + a^2 q^{2m}) / Z(a)` with
//!   `Z(a) = (-a^2;q)_inf (-q/a^2;q)_inf (q;q)_inf`, for `q <= a < 1`.
//! * `DualUltraBase(s, parity)`: nodes `mu(2k;s)` or `mu(2k+1;s)`, `k >= 0`,
//!   for `0 < s < q^-2`. The factor `(s q;q)_j / (1 - s q)` is evaluated in
//!   its cancelled form `(s q^2;q)_{j-1}`, so `s = q^-1` is covered.
//! * `DualUltraQinvExtremal(a)`: nodes `a^-2 q^-2m + a^2 q^2m`, obtained by
//!   pushing the Hermite measure through `h_2k = c_k D_k^(1/q)`.
//! * `DualUltraQExtremal(a)`: nodes `q (a^-2 q^-2m + a^2 q^2m)`, obtained by
//!   pushing the Hermite measure through `h_{2k+1} = d_k (2 sinh phi) D_k^(q)`.
//!   Its weight carries the factor `(1 + u)(1 - u)^2` with `u = a^2 q^{2m}`,
//!   which is nonnegative for every `m` and vanishes only at the node
//!   `2 sinh phi = 0` (present when `a = q`, `m = -1`); that node is dropped.
//!
//! Infinite sums are truncated to a window `[m_lo, m_hi]` chosen so that a
//! rigorous bound on the omitted tail falls below the context tolerance. The
//! bound dominates each summand by `A^2 * exp(alpha t^2 + beta t + gamma)`
//! with `t = |m|` and `alpha = 2 ln q < 0`, where `A` bounds the absolute
//! coefficient sums of the polynomials. A log-concave envelope has decreasing
//! term ratios, so its tail is at most `E(t0) / (1 - E(t0+1)/E(t0))`.

use rayon::prelude::*;
use rug::Float;

use crate::error::{Error, Result};
use crate::families::{monomial_coefficients, FamilyKind, FamilySpec};
use crate::kernel::{qpoch, qpoch_inf, PrecisionContext, QParam, QReal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn label(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureKind {
    HermiteExtremal { a: QReal },
    DualUltraBase { s: QReal, parity: Parity },
    DualUltraQinvExtremal { a: QReal },
    DualUltraQExtremal { a: QReal },
}

impl MeasureKind {
    pub fn label(&self) -> &'static str {
        match self {
            MeasureKind::HermiteExtremal { .. } => "hermite-extremal",
            MeasureKind::DualUltraBase { .. } => "dual-base",
            MeasureKind::DualUltraQinvExtremal { .. } => "dual-qinv-extremal",
            MeasureKind::DualUltraQExtremal { .. } => "dual-q-extremal",
        }
    }

    pub fn a(&self) -> Option<&QReal> {
        match self {
            MeasureKind::HermiteExtremal { a }
            | MeasureKind::DualUltraQinvExtremal { a }
            | MeasureKind::DualUltraQExtremal { a } => Some(a),
            MeasureKind::DualUltraBase { .. } => None,
        }
    }

    pub fn s(&self) -> Option<&QReal> {
        match self {
            MeasureKind::DualUltraBase { s, .. } => Some(s),
            _ => None,
        }
    }

    pub fn parity(&self) -> Option<Parity> {
        match self {
            MeasureKind::DualUltraBase { parity, .. } => Some(*parity),
            _ => None,
        }
    }
}

/// One support point with positive weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub m: i64,
    pub node: QReal,
    pub weight: QReal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    /// `m` ranges over all integers.
    Integers,
    /// `m` ranges over `0, 1, 2, ...`.
    NonNegative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Positive,
    Negative,
}

/// `log` of a summand bound along one side, in `t = |m|`:
/// weight `<= exp(quad t^2 + lin t + cst)` and
/// `max(1, |node|) <= exp(node_lin t + node_cst)`, both valid for `t >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub quad: QReal,
    pub lin: QReal,
    pub cst: QReal,
    pub node_lin: QReal,
    pub node_cst: QReal,
}

/// A discrete measure: support generator, weight function and normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    kind: MeasureKind,
    q: QParam,
    normalization: QReal,
}

/// `(-a^2;q)_inf (-q/a^2;q)_inf (q;q)_inf`.
pub fn hermite_normalization(a: &QReal, q: &QParam, ctx: &PrecisionContext) -> Result<QReal> {
    let a2 = Float::with_val(ctx.bits(), a.square_ref());
    let neg_a2 = -a2.clone();
    let neg_q_over_a2 = -(q.at(ctx) / a2);
    Ok(qpoch_inf(&neg_a2, q, ctx)? * qpoch_inf(&neg_q_over_a2, q, ctx)? * qpoch_inf(&q.at(ctx), q, ctx)?)
}

fn check_a(a: &QReal, q: &QParam) -> Result<()> {
    if !(a.is_finite() && *a >= *q.value() && *a < 1) {
        return Err(Error::invalid("a must satisfy q<=a<1"));
    }
    Ok(())
}

fn check_s(s: &QReal, q: &QParam, ctx: &PrecisionContext) -> Result<()> {
    if !(s.is_finite() && *s > 0 && *s < q.pow(-2, ctx)) {
        return Err(Error::invalid("s must satisfy 0<s<q^-2"));
    }
    Ok(())
}

impl DiscreteMeasure {
    pub fn hermite_extremal(a: QReal, q: QParam, ctx: &PrecisionContext) -> Result<Self> {
        check_a(&a, &q)?;
        let normalization = hermite_normalization(&a, &q, ctx)?;
        Ok(Self { kind: MeasureKind::HermiteExtremal { a }, q, normalization })
    }

    pub fn dual_ultra_base(s: QReal, parity: Parity, q: QParam, ctx: &PrecisionContext) -> Result<Self> {
        check_s(&s, &q, ctx)?;
        Ok(Self { kind: MeasureKind::DualUltraBase { s, parity }, q, normalization: ctx.real(1) })
    }

    pub fn dual_qinv_extremal(a: QReal, q: QParam, ctx: &PrecisionContext) -> Result<Self> {
        check_a(&a, &q)?;
        let normalization = hermite_normalization(&a, &q, ctx)?;
        Ok(Self { kind: MeasureKind::DualUltraQinvExtremal { a }, q, normalization })
    }

    pub fn dual_q_extremal(a: QReal, q: QParam, ctx: &PrecisionContext) -> Result<Self> {
        check_a(&a, &q)?;
        let normalization = hermite_normalization(&a, &q, ctx)?;
        Ok(Self { kind: MeasureKind::DualUltraQExtremal { a }, q, normalization })
    }

    /// Same support and weights, divided by `normalization` instead.
    pub fn with_normalization(mut self, normalization: QReal) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    pub fn q(&self) -> &QParam {
        &self.q
    }

    pub fn normalization(&self) -> &QReal {
        &self.normalization
    }

    pub fn support(&self) -> Support {
        match self.kind {
            MeasureKind::DualUltraBase { .. } => Support::NonNegative,
            _ => Support::Integers,
        }
    }

    /// The support point at index `m`, or `None` when `m` is not in the
    /// support.
    pub fn atom(&self, m: i64, ctx: &PrecisionContext) -> Result<Option<Atom>> {
        let q = &self.q;
        let bits = ctx.bits();
        let (node, raw) = match &self.kind {
            MeasureKind::HermiteExtremal { a } => hermite_raw(m, a, q, ctx),
            MeasureKind::DualUltraBase { s, parity } => {
                if m < 0 {
                    return Ok(None);
                }
                base_raw(m as usize, s, *parity, q, ctx)
            }
            MeasureKind::DualUltraQinvExtremal { a } => qinv_raw(m, a, q, ctx),
            MeasureKind::DualUltraQExtremal { a } => {
                // a q^m = 1 only for a = q, m = -1: the node where 2 sinh phi = 0.
                let aqm = Float::with_val(bits, a * q.pow(m, ctx));
                if Float::with_val(bits, aqm - 1u32).abs() <= ctx.rounding_floor() {
                    return Ok(None);
                }
                q_raw(m, a, q, ctx)
            }
        };
        let weight = raw / &self.normalization;
        if weight <= 0 {
            return Err(Error::SignViolation { m, weight: weight.to_string_radix(10, Some(8)) });
        }
        Ok(Some(Atom { m, node, weight }))
    }

    /// Summand envelope on one side of the support, or `None` for the empty
    /// negative side of a one-sided support.
    pub fn envelope(&self, side: Side, ctx: &PrecisionContext) -> Result<Option<Envelope>> {
        let q = &self.q;
        let ln_q = q.at(ctx).ln();
        let ln2 = Float::with_val(ctx.bits(), rug::float::Constant::Log2);
        let ln_z = Float::with_val(ctx.bits(), self.normalization.ln_ref());
        let zero = ctx.real(0);
        let quad = Float::with_val(ctx.bits(), &ln_q * 2u32);
        let env = match (&self.kind, side) {
            (MeasureKind::DualUltraBase { .. }, Side::Negative) => return Ok(None),
            (MeasureKind::DualUltraBase { s, parity }, Side::Positive) => {
                // |w_k| <= (1 + s q^c)(-s q^2;q)_inf / (q;q)_inf * q^{2k^2 -+ k}
                // |mu| <= (1 + s q) q^{-x}, x = 2k or 2k + 1
                let sq2 = -(Float::with_val(ctx.bits(), s * q.pow(2, ctx)));
                let c = match parity {
                    Parity::Even => 1u32 + Float::with_val(ctx.bits(), s * q.pow(1, ctx)),
                    Parity::Odd => 1u32 + Float::with_val(ctx.bits(), s * q.pow(3, ctx)),
                };
                let big = c * qpoch_inf(&sq2, q, ctx)? / qpoch_inf(&q.at(ctx), q, ctx)?;
                let lin = match parity {
                    Parity::Even => -ln_q.clone(),
                    Parity::Odd => ln_q.clone(),
                };
                let one_sq: QReal = 1u32 + Float::with_val(ctx.bits(), s * q.value());
                let mut node_cst = one_sq.ln();
                if *parity == Parity::Odd {
                    node_cst -= &ln_q;
                }
                Envelope {
                    quad,
                    lin,
                    cst: big.ln(),
                    node_lin: Float::with_val(ctx.bits(), &ln_q * -2i32),
                    node_cst,
                }
            }
            (MeasureKind::HermiteExtremal { a }, side) => {
                let ln_a = Float::with_val(ctx.bits(), a.ln_ref());
                let four_ln_a = Float::with_val(ctx.bits(), &ln_a * 4u32);
                match side {
                    Side::Positive => Envelope {
                        quad,
                        lin: four_ln_a - &ln_q,
                        cst: ln2 - &ln_z,
                        node_lin: -ln_q,
                        node_cst: -ln_a,
                    },
                    Side::Negative => Envelope {
                        quad,
                        lin: -four_ln_a - &ln_q,
                        cst: ln2 + Float::with_val(ctx.bits(), &ln_a * 2u32) - &ln_z,
                        node_lin: -ln_q,
                        node_cst: zero,
                    },
                }
            }
            (MeasureKind::DualUltraQinvExtremal { a }, side) => {
                let ln_a = Float::with_val(ctx.bits(), a.ln_ref());
                let four_ln_a = Float::with_val(ctx.bits(), &ln_a * 4u32);
                let two_ln_a = Float::with_val(ctx.bits(), &ln_a * 2u32);
                let node_lin = Float::with_val(ctx.bits(), &ln_q * -2i32);
                match side {
                    Side::Positive => Envelope {
                        quad,
                        lin: four_ln_a - &ln_q,
                        cst: ln2.clone() - &ln_z,
                        node_lin,
                        node_cst: ln2 - two_ln_a,
                    },
                    Side::Negative => Envelope {
                        quad,
                        lin: -four_ln_a - &ln_q,
                        cst: ln2.clone() + &two_ln_a - &ln_z,
                        node_lin,
                        node_cst: (ln2 + two_ln_a).max(&zero),
                    },
                }
            }
            (MeasureKind::DualUltraQExtremal { a }, side) => {
                let ln_a = Float::with_val(ctx.bits(), a.ln_ref());
                let four_ln_a = Float::with_val(ctx.bits(), &ln_a * 4u32);
                let two_ln_a = Float::with_val(ctx.bits(), &ln_a * 2u32);
                let three_ln_q = Float::with_val(ctx.bits(), &ln_q * 3u32);
                let node_lin = Float::with_val(ctx.bits(), &ln_q * -2i32);
                match side {
                    Side::Positive => Envelope {
                        quad,
                        lin: four_ln_a - &three_ln_q,
                        cst: ln2.clone() - &two_ln_a - &ln_z,
                        node_lin,
                        node_cst: (ln2 + &ln_q - two_ln_a).max(&zero),
                    },
                    Side::Negative => Envelope {
                        quad,
                        lin: -four_ln_a.clone() - &three_ln_q,
                        cst: ln2.clone() + four_ln_a - &ln_z,
                        node_lin,
                        node_cst: (ln2 + &ln_q + two_ln_a).max(&zero),
                    },
                }
            }
        };
        Ok(Some(env))
    }

    /// Checks that `family` is the polynomial family this measure
    /// orthogonalizes.
    pub fn check_compatible(&self, family: &FamilySpec, ctx: &PrecisionContext) -> Result<()> {
        if family.q() != &self.q && family.q().at(ctx) != self.q.at(ctx) {
            return Err(Error::IncompatiblePair("family and measure use different q".into()));
        }
        let want_s = match &self.kind {
            MeasureKind::HermiteExtremal { .. } => {
                return if family.kind() == FamilyKind::QInvHermite {
                    Ok(())
                } else {
                    Err(Error::IncompatiblePair(format!(
                        "{} needs family h, got {}",
                        self.kind.label(),
                        family.kind().label()
                    )))
                };
            }
            MeasureKind::DualUltraBase { s, .. } => ctx.real(s),
            MeasureKind::DualUltraQinvExtremal { .. } => self.q.pow(-1, ctx),
            MeasureKind::DualUltraQExtremal { .. } => self.q.at(ctx),
        };
        let s = match (family.kind(), family.s()) {
            (FamilyKind::DualDiscreteUltra, Some(s)) => s,
            _ => {
                return Err(Error::IncompatiblePair(format!(
                    "{} needs family D, got {}",
                    self.kind.label(),
                    family.kind().label()
                )))
            }
        };
        let diff = Float::with_val(ctx.bits(), s - &want_s).abs();
        if diff > Float::with_val(ctx.bits(), want_s.abs_ref()) * ctx.rounding_floor() {
            return Err(Error::IncompatiblePair(format!(
                "{} needs D with s = {}",
                self.kind.label(),
                want_s.to_string_radix(10, Some(12))
            )));
        }
        Ok(())
    }

    /// Closed-form value of the `n`-th Gram diagonal entry.
    pub fn expected_diagonal(&self, n: usize, ctx: &PrecisionContext) -> Result<QReal> {
        let q = &self.q;
        let q2 = q.squared();
        let n_i = n as i64;
        let qv = q.at(ctx);
        let value = match &self.kind {
            MeasureKind::HermiteExtremal { a } => {
                let scale = hermite_normalization(a, q, ctx)? / &self.normalization;
                q.pow(-(n_i * (n_i + 1) / 2), ctx) * qpoch(&qv, q, n, ctx) * scale
            }
            MeasureKind::DualUltraBase { s, .. } => {
                let sq3 = Float::with_val(ctx.bits(), s * q.pow(3, ctx));
                let sq2 = Float::with_val(ctx.bits(), s * q.pow(2, ctx));
                let mass = qpoch_inf(&sq3, &q2, ctx)? / qpoch_inf(&qv, &q2, ctx)?;
                mass * qpoch(&q.pow(2, ctx), &q2, n, ctx) * q.pow(-n_i, ctx) / qpoch(&sq2, &q2, n, ctx)
                    / &self.normalization
            }
            MeasureKind::DualUltraQinvExtremal { a } => {
                let scale = hermite_normalization(a, q, ctx)? / &self.normalization;
                let odd = qpoch(&qv, &q2, n, ctx);
                q.pow(-n_i, ctx) * qpoch(&qv, q, 2 * n, ctx) / odd.square() * scale
            }
            MeasureKind::DualUltraQExtremal { a } => {
                let scale = hermite_normalization(a, q, ctx)? / &self.normalization;
                let odd = qpoch(&q.pow(3, ctx), &q2, n, ctx);
                q.pow(-(n_i + 1), ctx) * qpoch(&qv, q, 2 * n + 1, ctx) / odd.square() * scale
            }
        };
        Ok(value)
    }
}

fn hermite_raw(m: i64, a: &QReal, q: &QParam, ctx: &PrecisionContext) -> (QReal, QReal) {
    let bits = ctx.bits();
    let e = Float::with_val(bits, a * q.pow(m, ctx)).recip(); // a^-1 q^-m
    let node = Float::with_val(bits, &e - Float::with_val(bits, e.recip_ref())) / 2u32;
    let a2q2m = Float::with_val(bits, e.recip_ref()).square();
    let a4m = pow_i(a, 4 * m, ctx);
    let weight = a4m * q.pow(m * (2 * m - 1), ctx) * (1u32 + a2q2m);
    (node, weight)
}

fn base_raw(k: usize, s: &QReal, parity: Parity, q: &QParam, ctx: &PrecisionContext) -> (QReal, QReal) {
    let bits = ctx.bits();
    let k_i = k as i64;
    let qv = q.at(ctx);
    let sq2 = Float::with_val(bits, s * q.pow(2, ctx));
    let (x, weight) = match parity {
        Parity::Even => {
            let weight = if k == 0 {
                ctx.real(1)
            } else {
                let head = 1u32 - Float::with_val(bits, s * q.pow(4 * k_i + 1, ctx));
                head * qpoch(&sq2, q, 2 * k - 1, ctx) / qpoch(&qv, q, 2 * k, ctx)
                    * q.pow(k_i * (2 * k_i - 1), ctx)
            };
            (2 * k_i, weight)
        }
        Parity::Odd => {
            let head = 1u32 - Float::with_val(bits, s * q.pow(4 * k_i + 3, ctx));
            let weight = head * qpoch(&sq2, q, 2 * k, ctx) / qpoch(&qv, q, 2 * k + 1, ctx)
                * q.pow(k_i * (2 * k_i + 1), ctx);
            (2 * k_i + 1, weight)
        }
    };
    let node = q.pow(-x, ctx) + Float::with_val(bits, s * q.pow(x + 1, ctx));
    (node, weight)
}

fn qinv_raw(m: i64, a: &QReal, q: &QParam, ctx: &PrecisionContext) -> (QReal, QReal) {
    let bits = ctx.bits();
    let aqm = Float::with_val(bits, a * q.pow(m, ctx));
    let inv = Float::with_val(bits, aqm.recip_ref());
    let node = Float::with_val(bits, inv.square_ref()) + Float::with_val(bits, aqm.square_ref());
    let weight = pow_i(a, 4 * m + 1, ctx) * q.pow(2 * m * m, ctx) * (inv + aqm);
    (node, weight)
}

fn q_raw(m: i64, a: &QReal, q: &QParam, ctx: &PrecisionContext) -> (QReal, QReal) {
    let bits = ctx.bits();
    let aqm = Float::with_val(bits, a * q.pow(m, ctx));
    let inv = Float::with_val(bits, aqm.recip_ref());
    let u = Float::with_val(bits, aqm.square_ref());
    let node = (Float::with_val(bits, inv.square_ref()) + &u) * q.value();
    let two_sinh = inv - aqm;
    let weight = pow_i(a, 4 * m, ctx) * q.pow(m * (2 * m - 1), ctx) * (1u32 + u) * two_sinh.square();
    (node, weight)
}

fn pow_i(a: &QReal, k: i64, ctx: &PrecisionContext) -> QReal {
    use rug::ops::Pow;
    let k = i32::try_from(k).expect("exponent fits in i32");
    Float::with_val(ctx.bits(), a.pow(k))
}

fn unnormalized(measure: &DiscreteMeasure, ctx: &PrecisionContext) -> DiscreteMeasure {
    measure.clone().with_normalization(ctx.real(1))
}

/// `(node, weight)` of the Hermite extremal measure at index `m`.
pub fn hermite_extremal_weight(m: i64, a: &QReal, q: &QParam, ctx: &PrecisionContext) -> Result<(QReal, QReal)> {
    let measure = DiscreteMeasure::hermite_extremal(ctx.real(a), q.clone(), ctx)?;
    let atom = measure.atom(m, ctx)?.expect("two-sided support");
    Ok((atom.node, atom.weight))
}

/// `(node, weight)` of the base measure of `D^(s)` at index `k`; unnormalized,
/// so that the `k = 0` weight is exactly 1.
pub fn dual_ultra_base_weight(
    k: usize,
    s: &QReal,
    parity: Parity,
    q: &QParam,
    ctx: &PrecisionContext,
) -> Result<(QReal, QReal)> {
    check_s(s, q, ctx)?;
    let (node, weight) = base_raw(k, s, parity, q, ctx);
    if weight <= 0 {
        return Err(Error::SignViolation { m: k as i64, weight: weight.to_string_radix(10, Some(8)) });
    }
    Ok((node, weight))
}

/// `(node, weight)` of the extremal measure of `D^(1/q)` at index `m`,
/// normalized by `(-a^2;q)_inf (-q/a^2;q)_inf (q;q)_inf`.
pub fn dual_qinv_extremal_weight(m: i64, a: &QReal, q: &QParam, ctx: &PrecisionContext) -> Result<(QReal, QReal)> {
    let measure = DiscreteMeasure::dual_qinv_extremal(ctx.real(a), q.clone(), ctx)?;
    let atom = measure.atom(m, ctx)?.expect("two-sided support");
    Ok((atom.node, atom.weight))
}

/// `(node, weight)` of the extremal measure of `D^(q)` at index `m`.
/// Fails for the single index outside the support (`a = q`, `m = -1`).
pub fn dual_q_extremal_weight(m: i64, a: &QReal, q: &QParam, ctx: &PrecisionContext) -> Result<(QReal, QReal)> {
    let measure = DiscreteMeasure::dual_q_extremal(ctx.real(a), q.clone(), ctx)?;
    match measure.atom(m, ctx)? {
        Some(atom) => Ok((atom.node, atom.weight)),
        None => Err(Error::invalid(format!("m = {m} is outside the support (zero-weight node)"))),
    }
}

/// The truncation window actually summed and the certified bound on
/// everything outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    pub m_lo: i64,
    pub m_hi: i64,
    pub certified_tail_bound: QReal,
}

/// Result of a Gram-matrix assembly together with its residual diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GramReport {
    pub family: FamilySpec,
    pub measure: DiscreteMeasure,
    pub n_max: usize,
    pub bits: u32,
    pub gram: Vec<Vec<QReal>>,
    pub expected_diag: Vec<QReal>,
    /// `max_{n != n'} |G[n][n']| / sqrt(|G[n][n] G[n'][n']|)`.
    pub off_diag_max: QReal,
    /// `max_n |G[n][n] / expected_diag[n] - 1|`.
    pub diag_rel_err_max: QReal,
    pub truncation: Truncation,
    /// Largest polynomial magnitude met inside the window.
    pub max_abs_value: QReal,
}

impl GramReport {
    pub fn passes(&self, tol: &QReal) -> bool {
        self.off_diag_max < *tol && self.diag_rel_err_max < *tol
    }
}

/// Sum of the summand envelope over `t >= t0`, or `+inf` when the envelope
/// is not yet decreasing at `t0`.
fn envelope_tail(env: &Envelope, degree_sum: u32, log_coeff: &QReal, t0: i64, ctx: &PrecisionContext) -> QReal {
    let bits = ctx.bits();
    let d = degree_sum;
    let lin = Float::with_val(bits, &env.node_lin * d) + &env.lin;
    let cst = Float::with_val(bits, &env.node_cst * d) + &env.cst + Float::with_val(bits, log_coeff * 2u32);
    let t = Float::with_val(bits, t0);
    let log_e = Float::with_val(bits, t.square_ref()) * &env.quad + Float::with_val(bits, &lin * &t) + &cst;
    let log_r = Float::with_val(bits, &env.quad * (2 * t0 + 1)) + &lin;
    if log_r >= 0 {
        return Float::with_val(bits, rug::float::Special::Infinity);
    }
    let ratio = log_r.exp();
    log_e.exp() / (1u32 - ratio)
}

/// `ln max(1, max_n sum_j |c_nj|)` over degrees `0..=n_max`.
fn log_coefficient_bound(family: &FamilySpec, n_max: usize, ctx: &PrecisionContext) -> Result<QReal> {
    let rows = monomial_coefficients(family, n_max, ctx)?;
    let mut best = ctx.real(1);
    for row in rows {
        let mut sum = ctx.real(0);
        for c in row {
            sum += c.abs();
        }
        if sum > best {
            best = sum;
        }
    }
    Ok(best.ln())
}

fn tail_bound_for_window(
    family: &FamilySpec,
    measure: &DiscreteMeasure,
    n_max: usize,
    m_lo: i64,
    m_hi: i64,
    ctx: &PrecisionContext,
) -> Result<QReal> {
    let log_coeff = log_coefficient_bound(family, n_max, ctx)?;
    let d = 2 * n_max as u32;
    let mut total = ctx.real(0);
    if let Some(env) = measure.envelope(Side::Positive, ctx)? {
        total += envelope_tail(&env, d, &log_coeff, (m_hi + 1).max(1), ctx);
    }
    if let Some(env) = measure.envelope(Side::Negative, ctx)? {
        total += envelope_tail(&env, d, &log_coeff, (1 - m_lo).max(1), ctx);
    }
    Ok(total)
}

/// Smallest window, starting from `[-M, M]` with `M = ceil(sqrt(bits))`,
/// whose certified tail bound is below `ctx.truncation_target()`.
pub fn select_window(
    family: &FamilySpec,
    measure: &DiscreteMeasure,
    n_max: usize,
    ctx: &PrecisionContext,
) -> Result<Truncation> {
    let log_coeff = log_coefficient_bound(family, n_max, ctx)?;
    let d = 2 * n_max as u32;
    let start = (ctx.bits() as f64).sqrt().ceil() as i64;
    let half_tol = ctx.truncation_target() / 2u32;

    let extend = |side: Side| -> Result<(i64, QReal)> {
        let env = match measure.envelope(side, ctx)? {
            Some(env) => env,
            None => return Ok((0, ctx.real(0))),
        };
        let mut m = start;
        loop {
            let bound = envelope_tail(&env, d, &log_coeff, m + 1, ctx);
            if bound < half_tol {
                return Ok((m, bound));
            }
            if m as usize >= ctx.max_terms() {
                return Err(Error::TruncationFailure {
                    what: "Gram lattice sum",
                    terms: m as usize,
                    bound: bound.to_string_radix(10, Some(6)),
                });
            }
            m += 1;
        }
    };
    let (hi, pos) = extend(Side::Positive)?;
    let (lo, neg) = match measure.support() {
        Support::Integers => extend(Side::Negative)?,
        Support::NonNegative => (0, ctx.real(0)),
    };
    Ok(Truncation { m_lo: -lo, m_hi: hi, certified_tail_bound: pos + neg })
}

/// Gram matrix `G[n][n'] = sum_m w_m P_n(node_m) P_n'(node_m)` for
/// `n, n' <= n_max`, truncated at a certified window.
pub fn gram_matrix(
    family: &FamilySpec,
    measure: &DiscreteMeasure,
    n_max: usize,
    ctx: &PrecisionContext,
) -> Result<GramReport> {
    measure.check_compatible(family, ctx)?;
    let window = select_window(family, measure, n_max, ctx)?;
    assemble(family, measure, n_max, window, ctx)
}

/// Gram matrix over an explicit window `[m_lo, m_hi]`; the reported tail
/// bound is the certified bound for that window (possibly infinite).
pub fn gram_matrix_in_window(
    family: &FamilySpec,
    measure: &DiscreteMeasure,
    n_max: usize,
    m_lo: i64,
    m_hi: i64,
    ctx: &PrecisionContext,
) -> Result<GramReport> {
    measure.check_compatible(family, ctx)?;
    let m_lo = match measure.support() {
        Support::NonNegative => m_lo.max(0),
        Support::Integers => m_lo,
    };
    let bound = tail_bound_for_window(family, measure, n_max, m_lo, m_hi, ctx)?;
    let window = Truncation { m_lo, m_hi, certified_tail_bound: bound };
    assemble(family, measure, n_max, window, ctx)
}

fn assemble(
    family: &FamilySpec,
    measure: &DiscreteMeasure,
    n_max: usize,
    window: Truncation,
    ctx: &PrecisionContext,
) -> Result<GramReport> {
    let rows: Vec<(QReal, Vec<QReal>)> = (window.m_lo..=window.m_hi)
        .into_par_iter()
        .map(|m| -> Result<Option<(QReal, Vec<QReal>)>> {
            let Some(atom) = measure.atom(m, ctx)? else {
                return Ok(None);
            };
            let values = family.values_upto(n_max, &atom.node, ctx)?;
            Ok(Some((atom.weight, values)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut max_abs_value = ctx.real(0);
    for (_, values) in &rows {
        for v in values {
            let a = Float::with_val(ctx.bits(), v.abs_ref());
            if a > max_abs_value {
                max_abs_value = a;
            }
        }
    }

    let pairs: Vec<(usize, usize)> = (0..=n_max).flat_map(|i| (i..=n_max).map(move |j| (i, j))).collect();
    let sums: Vec<QReal> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mut acc = ctx.real(0);
            for (w, values) in &rows {
                acc += Float::with_val(ctx.bits(), w * &values[i]) * &values[j];
            }
            acc
        })
        .collect();
    let mut gram = vec![vec![ctx.real(0); n_max + 1]; n_max + 1];
    for (&(i, j), v) in pairs.iter().zip(sums) {
        gram[j][i] = v.clone();
        gram[i][j] = v;
    }

    let expected_diag = (0..=n_max)
        .map(|n| measure.expected_diagonal(n, ctx))
        .collect::<Result<Vec<_>>>()?;
    let (off_diag_max, diag_rel_err_max) = residuals(&gram, &expected_diag, ctx);

    Ok(GramReport {
        family: family.clone(),
        measure: measure.clone(),
        n_max,
        bits: ctx.bits(),
        gram,
        expected_diag,
        off_diag_max,
        diag_rel_err_max,
        truncation: window,
        max_abs_value,
    })
}

/// `G[i][j] = sum_r w_r v_r[i] v_r[j]` summed sequentially in row order.
pub fn weighted_gram(rows: &[(QReal, Vec<QReal>)], n_max: usize, ctx: &PrecisionContext) -> Vec<Vec<QReal>> {
    let mut gram = vec![vec![ctx.real(0); n_max + 1]; n_max + 1];
    for i in 0..=n_max {
        for j in i..=n_max {
            let mut acc = ctx.real(0);
            for (w, v) in rows {
                acc += Float::with_val(ctx.bits(), w * &v[i]) * &v[j];
            }
            gram[j][i] = acc.clone();
            gram[i][j] = acc;
        }
    }
    gram
}

/// Off-diagonal entries relative to the geometric mean of their diagonals,
/// and diagonal relative errors against `expected`.
pub fn residuals(gram: &[Vec<QReal>], expected: &[QReal], ctx: &PrecisionContext) -> (QReal, QReal) {
    let bits = ctx.bits();
    let mut off = ctx.real(0);
    for (i, row) in gram.iter().enumerate() {
        for (j, g) in row.iter().enumerate() {
            if i == j {
                continue;
            }
            let scale = Float::with_val(bits, &gram[i][i] * &gram[j][j]).abs().sqrt();
            let r = Float::with_val(bits, g.abs_ref()) / scale;
            if r > off || r.is_nan() {
                off = r;
            }
        }
    }
    let mut diag = ctx.real(0);
    for (i, e) in expected.iter().enumerate() {
        let r = (Float::with_val(bits, &gram[i][i] / e) - 1u32).abs();
        if r > diag || r.is_nan() {
            diag = r;
        }
    }
    (off, diag)
}

/// Evidence for one normalization candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub label: &'static str,
    /// `max_k |G_kk / rest_k - candidate| / candidate` over the unnormalized Gram.
    pub residual: QReal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyAdjudication {
    pub family: &'static str,
    pub off_diag_max: QReal,
    pub candidates: Vec<Candidate>,
    /// Labels of the candidates whose residual is below `ctx.tol()`.
    pub matching: Vec<&'static str>,
}

/// The alternative weight for the `D^(q)` extremal measure,
/// `a^{4m} q^{m(2m-1)} (a^-2 q^-2m - a^2 q^2m)`, evaluated on the same
/// window as the derived weight.
#[derive(Debug, Clone, PartialEq)]
pub struct AlternativeOddWeight {
    pub nonpositive_weights: usize,
    pub off_diag_max: QReal,
    pub off_diag_max_positive_part: QReal,
}

/// Which of the two candidate normalization constants,
/// `(-a^2;q)(-q/a;q)(q;q)` or `(-a^2;q)(-q/a^2;q)(q;q)`, reproduces the Gram
/// diagonals of the two dual extremal families.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationReport {
    pub q: QReal,
    pub a: QReal,
    pub n_max: usize,
    pub qinv: FamilyAdjudication,
    pub q_family: FamilyAdjudication,
    pub alternative_odd_weight: AlternativeOddWeight,
    pub verdict: String,
}

pub const CANDIDATE_A: &str = "(-a^2;q)_inf (-q/a;q)_inf (q;q)_inf";
pub const CANDIDATE_A2: &str = "(-a^2;q)_inf (-q/a^2;q)_inf (q;q)_inf";

pub fn adjudicate_normalization(
    q: &QParam,
    a: &QReal,
    n_max: usize,
    ctx: &PrecisionContext,
) -> Result<NormalizationReport> {
    let bits = ctx.bits();
    let a2 = Float::with_val(bits, a.square_ref());
    let base = qpoch_inf(&(-a2.clone()), q, ctx)? * qpoch_inf(&q.at(ctx), q, ctx)?;
    let cand_a = base.clone() * qpoch_inf(&(-(q.at(ctx) / a)), q, ctx)?;
    let cand_a2 = base * qpoch_inf(&(-(q.at(ctx) / &a2)), q, ctx)?;

    let adjudicate = |family: FamilySpec, measure: DiscreteMeasure, label: &'static str| -> Result<FamilyAdjudication> {
        let unit = unnormalized(&measure, ctx);
        let report = gram_matrix(&family, &unit, n_max, ctx)?;
        // expected_diagonal of the unit measure is derived_constant * rest_k.
        let derived = hermite_normalization(a, q, ctx)?;
        let mut candidates = Vec::new();
        for (label, value) in [(CANDIDATE_A, &cand_a), (CANDIDATE_A2, &cand_a2)] {
            let mut worst = ctx.real(0);
            for k in 0..=n_max {
                let rest = unit.expected_diagonal(k, ctx)? / &derived;
                let implied = Float::with_val(bits, &report.gram[k][k] / &rest);
                let r = (implied / value - 1u32).abs();
                if r > worst {
                    worst = r;
                }
            }
            candidates.push(Candidate { label, residual: worst });
        }
        let matching = candidates
            .iter()
            .filter(|c| c.residual < *ctx.tol())
            .map(|c| c.label)
            .collect();
        Ok(FamilyAdjudication { family: label, off_diag_max: report.off_diag_max, candidates, matching })
    };

    let qinv = adjudicate(
        FamilySpec::dual_q_inv(q.clone(), ctx),
        DiscreteMeasure::dual_qinv_extremal(ctx.real(a), q.clone(), ctx)?,
        "D^(1/q)",
    )?;
    let q_measure = DiscreteMeasure::dual_q_extremal(ctx.real(a), q.clone(), ctx)?;
    let q_spec = FamilySpec::dual_q(q.clone(), ctx);
    let q_family = adjudicate(q_spec.clone(), q_measure.clone(), "D^(q)")?;

    let window = select_window(&q_spec, &q_measure, n_max, ctx)?;
    let mut all = Vec::new();
    let mut positive = Vec::new();
    let mut nonpositive_weights = 0usize;
    for m in window.m_lo..=window.m_hi {
        let aqm = Float::with_val(bits, a * q.pow(m, ctx));
        let inv = Float::with_val(bits, aqm.recip_ref());
        let node = (Float::with_val(bits, inv.square_ref()) + Float::with_val(bits, aqm.square_ref())) * q.value();
        let weight = pow_i(a, 4 * m, ctx) * q.pow(m * (2 * m - 1), ctx) * (inv.square() - aqm.square());
        let values = q_spec.values_upto(n_max, &node, ctx)?;
        if weight <= 0 {
            nonpositive_weights += 1;
        } else {
            positive.push((weight.clone(), values.clone()));
        }
        all.push((weight, values));
    }
    let off = |rows: &[(QReal, Vec<QReal>)]| -> QReal {
        let gram = weighted_gram(rows, n_max, ctx);
        let ones = vec![ctx.real(1); n_max + 1];
        residuals(&gram, &ones, ctx).0
    };
    let alternative_odd_weight = AlternativeOddWeight {
        nonpositive_weights,
        off_diag_max: off(&all),
        off_diag_max_positive_part: off(&positive),
    };

    let verdict = match (qinv.matching.as_slice(), q_family.matching.as_slice()) {
        ([x], [y]) if x == y => format!("{x} matches both derived diagonals"),
        _ => format!(
            "no single candidate constant matches: D^(1/q) {:?}, D^(q) {:?}",
            qinv.matching, q_family.matching
        ),
    };

    Ok(NormalizationReport {
        q: q.at(ctx),
        a: ctx.real(a),
        n_max,
        qinv,
        q_family,
        alternative_odd_weight,
        verdict,
    })
}
