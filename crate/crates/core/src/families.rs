//! Evaluators for the q^-1-Hermite polynomials `h_n(x|q)`, their odd-part
//! quotients `h~_2k(x|q) = h_{2k+1}(x|q)/x`, the discrete q-ultraspherical
//! polynomials `C_n^(s)(x;q)` and their duals `D_n^(s)(mu(x;s)|q)`.
//!
//! `h` and `D` each have two independent evaluation routes: an explicit finite
//! sum and an upward three-term recurrence. The recurrences also produce
//! monomial coefficient tables, which the Gram truncation bounds consume.

use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};
use crate::kernel::{basic_hypergeometric, PrecisionContext, QParam, QReal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    QInvHermite,
    DiscreteUltra,
    DualDiscreteUltra,
    TildeEvenHermite,
}

impl FamilyKind {
    pub fn label(self) -> &'static str {
        match self {
            FamilyKind::QInvHermite => "h",
            FamilyKind::DiscreteUltra => "C",
            FamilyKind::DualDiscreteUltra => "D",
            FamilyKind::TildeEvenHermite => "htilde",
        }
    }
}

/// A polynomial family together with its parameters. `s` is present exactly
/// for the `C` and `D` families and is always positive.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilySpec {
    kind: FamilyKind,
    q: QParam,
    s: Option<QReal>,
}

impl FamilySpec {
    pub fn q_inv_hermite(q: QParam) -> Self {
        Self { kind: FamilyKind::QInvHermite, q, s: None }
    }

    pub fn tilde_even_hermite(q: QParam) -> Self {
        Self { kind: FamilyKind::TildeEvenHermite, q, s: None }
    }

    pub fn discrete_ultra(q: QParam, s: QReal) -> Result<Self> {
        check_positive_s(&s)?;
        Ok(Self { kind: FamilyKind::DiscreteUltra, q, s: Some(s) })
    }

    pub fn dual_discrete_ultra(q: QParam, s: QReal) -> Result<Self> {
        check_positive_s(&s)?;
        Ok(Self { kind: FamilyKind::DualDiscreteUltra, q, s: Some(s) })
    }

    /// `D^(s)` with `s = q^-1`.
    pub fn dual_q_inv(q: QParam, ctx: &PrecisionContext) -> Self {
        let s = q.pow(-1, ctx);
        Self { kind: FamilyKind::DualDiscreteUltra, q, s: Some(s) }
    }

    /// `D^(s)` with `s = q`.
    pub fn dual_q(q: QParam, ctx: &PrecisionContext) -> Self {
        let s = q.at(ctx);
        Self { kind: FamilyKind::DualDiscreteUltra, q, s: Some(s) }
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn q(&self) -> &QParam {
        &self.q
    }

    pub fn s(&self) -> Option<&QReal> {
        self.s.as_ref()
    }

    /// Rejects `s` outside `0 < s < q^-2`, the range of the base
    /// orthogonality of the dual family.
    pub fn require_base_range(&self, ctx: &PrecisionContext) -> Result<()> {
        let s = self.s_or_err()?;
        let bound = self.q.pow(-2, ctx);
        if !(*s > 0 && *s < bound) {
            return Err(Error::invalid("s must satisfy 0<s<q^-2"));
        }
        Ok(())
    }

    /// Evaluates the family at its natural argument: `x` for `h` and `h~`,
    /// the third numerator parameter for `C`, and `mu` for `D`.
    pub fn eval(&self, n: usize, arg: &QReal, ctx: &PrecisionContext) -> Result<QReal> {
        match self.kind {
            FamilyKind::QInvHermite => Ok(eval_h_recurrence(n, arg, &self.q, ctx)),
            FamilyKind::TildeEvenHermite => Ok(eval_h_tilde(n, arg, &self.q, ctx)),
            FamilyKind::DiscreteUltra => eval_c(n, arg, self, ctx),
            FamilyKind::DualDiscreteUltra => eval_d_recurrence(n, arg, self, ctx),
        }
    }

    /// Values of degrees `0..=n_max` at one argument, via the recurrence.
    pub fn values_upto(&self, n_max: usize, arg: &QReal, ctx: &PrecisionContext) -> Result<Vec<QReal>> {
        match self.kind {
            FamilyKind::QInvHermite => Ok(h_recurrence_values(n_max, arg, &self.q, ctx)),
            FamilyKind::DualDiscreteUltra => {
                d_recurrence_values(n_max, arg, self.s_or_err()?, &self.q, ctx).map(|t| t.values)
            }
            _ => (0..=n_max).map(|n| self.eval(n, arg, ctx)).collect(),
        }
    }

    fn s_or_err(&self) -> Result<&QReal> {
        self.s
            .as_ref()
            .ok_or_else(|| Error::invalid("family requires the parameter s"))
    }
}

fn check_positive_s(s: &QReal) -> Result<()> {
    if !(s.is_finite() && *s > 0) {
        return Err(Error::invalid("s must be > 0"));
    }
    Ok(())
}

/// A node `mu(x;s) = q^-x + s q^(x+1)` of the dual family's lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct MuPoint {
    pub x: GridLabel,
    pub s: QReal,
    pub mu: QReal,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridLabel {
    Integer(i64),
    Real(QReal),
}

impl MuPoint {
    pub fn on_grid(x: i64, s: &QReal, q: &QParam, ctx: &PrecisionContext) -> Self {
        let mu = q.pow(-x, ctx) + Float::with_val(ctx.bits(), s * q.pow(x + 1, ctx));
        Self { x: GridLabel::Integer(x), s: ctx.real(s), mu }
    }

    pub fn off_grid(x: &QReal, s: &QReal, q: &QParam, ctx: &PrecisionContext) -> Self {
        let ln_q = q.at(ctx).ln();
        let qx = Float::with_val(ctx.bits(), x * &ln_q).exp();
        let mu = Float::with_val(ctx.bits(), qx.recip_ref()) + Float::with_val(ctx.bits(), s * &qx) * q.at(ctx);
        Self { x: GridLabel::Real(ctx.real(x)), s: ctx.real(s), mu }
    }

    /// `q^-x`, the first numerator parameter of the dual series.
    fn q_pow_neg_x(&self, q: &QParam, ctx: &PrecisionContext) -> QReal {
        match &self.x {
            GridLabel::Integer(x) => q.pow(-x, ctx),
            GridLabel::Real(x) => {
                let ln_q = q.at(ctx).ln();
                Float::with_val(ctx.bits(), -(x * ln_q)).exp()
            }
        }
    }
}

/// Gaussian binomial coefficients `[n k]_q` for `k = 0..=n`.
fn q_binomials(n: usize, q: &QParam, ctx: &PrecisionContext) -> Vec<QReal> {
    let qv = q.at(ctx);
    let mut out = Vec::with_capacity(n + 1);
    let mut c = ctx.real(1);
    out.push(c.clone());
    for k in 0..n {
        let num = 1u32 - Float::with_val(ctx.bits(), (&qv).pow((n - k) as u32));
        let den = 1u32 - Float::with_val(ctx.bits(), (&qv).pow((k + 1) as u32));
        c = c * num / den;
        out.push(c.clone());
    }
    out
}


/// `h_n(sinh phi | q)` from the explicit sum, taking `e^phi` directly so that
/// lattice nodes with `e^phi = a^-1 q^-m` are evaluated without a logarithm.
///
/// The terms reach `q^{-n^2/4}` in size and cancel, so the sum is formed with
/// extra bits covering the largest term and then rounded to the context.
pub fn h_series_exp(n: usize, exp_phi: &QReal, q: &QParam, ctx: &PrecisionContext) -> QReal {
    let wide = ctx.widened(series_guard_bits(n, exp_phi, q));
    let bits = wide.bits();
    let binom = q_binomials(n, q, &wide);
    let e = Float::with_val(bits, exp_phi);
    let e2 = Float::with_val(bits, e.square_ref());
    let e2_inv = Float::with_val(bits, e2.recip_ref());
    // k = 0 term: e^{n phi}
    let mut power = Float::with_val(bits, e.pow(n as u32));
    let mut sum = wide.real(0);
    for (k, b) in binom.iter().enumerate() {
        let k_i = k as i64;
        let n_i = n as i64;
        let mut term = q.pow(k_i * (k_i - n_i), &wide) * b * &power;
        if k % 2 == 1 {
            term = -term;
        }
        sum += term;
        power *= &e2_inv;
    }
    ctx.real(sum)
}

/// `log2` of the largest explicit-sum term, rounded up, plus a margin.
fn series_guard_bits(n: usize, exp_phi: &QReal, q: &QParam) -> u32 {
    let lq = q.value().to_f64().log2();
    let le = exp_phi.to_f64().abs().log2();
    let binom: f64 = (1..=n).map(|j| -(1.0 - q.value().to_f64().powi(j as i32)).log2()).sum();
    let n_f = n as f64;
    let top = (0..=n)
        .map(|k| {
            let k = k as f64;
            k * (k - n_f) * lq + (n_f - 2.0 * k) * le
        })
        .fold(0.0f64, f64::max);
    if !(top + binom).is_finite() {
        return 64;
    }
    (top + binom).ceil() as u32 + 16
}

/// `h_n(x|q)` at `x = sinh(phi)` from the explicit sum.
pub fn eval_h_series(n: usize, phi: &QReal, q: &QParam, ctx: &PrecisionContext) -> QReal {
    let e = Float::with_val(ctx.bits(), phi.exp_ref());
    h_series_exp(n, &e, q, ctx)
}

/// `h_0..=h_{n_max}` at `x` by `h_{n+1} = 2x h_n - q^-n (1 - q^n) h_{n-1}`.
pub fn h_recurrence_values(n_max: usize, x: &QReal, q: &QParam, ctx: &PrecisionContext) -> Vec<QReal> {
    let two_x = Float::with_val(ctx.bits(), x * 2u32);
    let mut out = Vec::with_capacity(n_max + 1);
    let mut prev = ctx.real(0);
    let mut cur = ctx.real(1);
    out.push(cur.clone());
    for n in 0..n_max {
        let c = h_recurrence_coefficient(n, q, ctx);
        let next = Float::with_val(ctx.bits(), &two_x * &cur) - c * &prev;
        prev = cur;
        cur = next;
        out.push(cur.clone());
    }
    out
}

/// `q^-n (1 - q^n)`, the lower coefficient of the `h` recurrence.
pub fn h_recurrence_coefficient(n: usize, q: &QParam, ctx: &PrecisionContext) -> QReal {
    q.pow(-(n as i64), ctx) - 1u32
}

pub fn eval_h_recurrence(n: usize, x: &QReal, q: &QParam, ctx: &PrecisionContext) -> QReal {
    h_recurrence_values(n, x, q, ctx).pop().expect("non-empty")
}

/// `h~_2k(x|q) = h_{2k+1}(x|q) / x`. At `x = 0` the removable singularity is
/// filled with the linear coefficient of the explicit sum,
/// `sum_j (-1)^j q^{j(j-n)} [n j]_q (n - 2j)` with `n = 2k + 1`.
pub fn eval_h_tilde(k: usize, x: &QReal, q: &QParam, ctx: &PrecisionContext) -> QReal {
    let n = 2 * k + 1;
    if x.is_zero() {
        let binom = q_binomials(n, q, ctx);
        let mut sum = ctx.real(0);
        for (j, b) in binom.iter().enumerate() {
            let (j_i, n_i) = (j as i64, n as i64);
            let mut term = q.pow(j_i * (j_i - n_i), ctx) * b * (n_i - 2 * j_i);
            if j % 2 == 1 {
                term = -term;
            }
            sum += term;
        }
        return sum;
    }
    eval_h_recurrence(n, x, q, ctx) / x
}

/// `C_n^(s)(x;q) = 3phi2(q^-n, -s q^{n+1}, x; sqrt(s) q, -sqrt(s) q; q, q)`.
pub fn eval_c(n: usize, x: &QReal, spec: &FamilySpec, ctx: &PrecisionContext) -> Result<QReal> {
    if spec.kind != FamilyKind::DiscreteUltra {
        return Err(Error::invalid("eval_c needs a DiscreteUltra family"));
    }
    let s = spec.s_or_err()?;
    let q = &spec.q;
    let sqrt_s_q = Float::with_val(ctx.bits(), s.sqrt_ref()) * q.at(ctx);
    let numerator = [
        q.pow(-(n as i64), ctx),
        -Float::with_val(ctx.bits(), s * q.pow(n as i64 + 1, ctx)),
        ctx.real(x),
    ];
    let denominator = [sqrt_s_q.clone(), -sqrt_s_q];
    basic_hypergeometric(&numerator, &denominator, q, &q.at(ctx), ctx, Some(n))
}

/// `D_n^(s)(mu(x;s)|q) = 3phi2(q^-x, s q^{x+1}, q^-n; sqrt(s) q, -sqrt(s) q; q, -q^{n+1})`.
///
/// The series has two terminating slots when `x` is a nonnegative integer;
/// the loop runs over the shorter one.
pub fn eval_d_series(n: usize, point: &MuPoint, spec: &FamilySpec, ctx: &PrecisionContext) -> Result<QReal> {
    if spec.kind != FamilyKind::DualDiscreteUltra {
        return Err(Error::invalid("eval_d_series needs a DualDiscreteUltra family"));
    }
    let s = spec.s_or_err()?;
    let q = &spec.q;
    let q_neg_x = point.q_pow_neg_x(q, ctx);
    // s q^{x+1} = s q / q^-x
    let s_q_x1 = Float::with_val(ctx.bits(), s * q.value()) / &q_neg_x;
    let numerator = [q_neg_x, s_q_x1, q.pow(-(n as i64), ctx)];
    let sqrt_s_q = Float::with_val(ctx.bits(), s.sqrt_ref()) * q.at(ctx);
    let denominator = [sqrt_s_q.clone(), -sqrt_s_q];
    let z = -q.pow(n as i64 + 1, ctx);
    let terms = match point.x {
        GridLabel::Integer(x) if x >= 0 => n.min(x as usize),
        _ => n,
    };
    basic_hypergeometric(&numerator, &denominator, q, &z, ctx, Some(terms))
}

/// Values of `D_0..=D_{n_max}` at one `mu` and the largest intermediate
/// magnitude met on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceTrace {
    pub values: Vec<QReal>,
    pub max_abs: QReal,
}

/// Upward form of
/// `mu D_n = -q^{-2n-1}(1 - s q^{2n+2}) D_{n+1} + q^{-2n-1}(1+q) D_n - q^{-2n}(1 - q^{2n}) D_{n-1}`
/// with `D_{-1} = 0`, `D_0 = 1`. Accepts any real `mu`.
pub fn d_recurrence_values(
    n_max: usize,
    mu: &QReal,
    s: &QReal,
    q: &QParam,
    ctx: &PrecisionContext,
) -> Result<RecurrenceTrace> {
    let bits = ctx.bits();
    let one_plus_q = 1 + q.at(ctx);
    let floor = ctx.rounding_floor();
    let mut prev = ctx.real(0);
    let mut cur = ctx.real(1);
    let mut values = Vec::with_capacity(n_max + 1);
    values.push(cur.clone());
    let mut max_abs = ctx.real(1);
    for n in 0..n_max {
        let n_i = n as i64;
        let lead = 1u32 - Float::with_val(bits, s * q.pow(2 * n_i + 2, ctx));
        if Float::with_val(bits, lead.abs_ref()) <= floor {
            return Err(Error::DegenerateCoefficient { n });
        }
        let diag = q.pow(-2 * n_i - 1, ctx) * &one_plus_q;
        let lower = q.pow(-2 * n_i, ctx) - 1u32; // q^-2n (1 - q^2n)
        let mut next = Float::with_val(bits, &diag - mu) * &cur;
        next -= lower * &prev;
        next = next * q.pow(2 * n_i + 1, ctx) / lead;
        prev = cur;
        cur = next;
        let magnitude = Float::with_val(bits, cur.abs_ref());
        if magnitude > max_abs {
            max_abs = magnitude;
        }
        values.push(cur.clone());
    }
    Ok(RecurrenceTrace { values, max_abs })
}

pub fn eval_d_recurrence(n: usize, mu: &QReal, spec: &FamilySpec, ctx: &PrecisionContext) -> Result<QReal> {
    if spec.kind != FamilyKind::DualDiscreteUltra {
        return Err(Error::invalid("eval_d_recurrence needs a DualDiscreteUltra family"));
    }
    let mut trace = d_recurrence_values(n, mu, spec.s_or_err()?, &spec.q, ctx)?;
    Ok(trace.values.pop().expect("non-empty"))
}

/// Monomial coefficients of degrees `0..=n_max`: entry `[n][j]` multiplies
/// `x^j` for `h` (and `h~`, in `x`) and `mu^j` for `D`.
pub fn monomial_coefficients(spec: &FamilySpec, n_max: usize, ctx: &PrecisionContext) -> Result<Vec<Vec<QReal>>> {
    let q = &spec.q;
    let bits = ctx.bits();
    match spec.kind {
        FamilyKind::QInvHermite | FamilyKind::TildeEvenHermite => {
            let top = match spec.kind {
                FamilyKind::QInvHermite => n_max,
                _ => 2 * n_max + 1,
            };
            let mut rows: Vec<Vec<QReal>> = vec![vec![ctx.real(1)]];
            for n in 0..top {
                let c = h_recurrence_coefficient(n, q, ctx);
                let mut next = vec![ctx.real(0); n + 2];
                for (j, a) in rows[n].iter().enumerate() {
                    next[j + 1] += Float::with_val(bits, a * 2u32);
                }
                if n >= 1 {
                    for (j, a) in rows[n - 1].iter().enumerate() {
                        next[j] -= Float::with_val(bits, a * &c);
                    }
                }
                rows.push(next);
            }
            if spec.kind == FamilyKind::QInvHermite {
                return Ok(rows);
            }
            Ok((0..=n_max).map(|k| rows[2 * k + 1][1..].to_vec()).collect())
        }
        FamilyKind::DualDiscreteUltra => {
            let s = spec.s_or_err()?;
            let one_plus_q = 1 + q.at(ctx);
            let mut rows: Vec<Vec<QReal>> = vec![vec![ctx.real(1)]];
            for n in 0..n_max {
                let n_i = n as i64;
                let lead = 1u32 - Float::with_val(bits, s * q.pow(2 * n_i + 2, ctx));
                if Float::with_val(bits, lead.abs_ref()) <= ctx.rounding_floor() {
                    return Err(Error::DegenerateCoefficient { n });
                }
                let scale = q.pow(2 * n_i + 1, ctx) / lead;
                let diag = q.pow(-2 * n_i - 1, ctx) * &one_plus_q;
                let lower = q.pow(-2 * n_i, ctx) - 1u32;
                let mut next = vec![ctx.real(0); n + 2];
                for (j, a) in rows[n].iter().enumerate() {
                    next[j] += Float::with_val(bits, a * &diag);
                    next[j + 1] -= a;
                }
                if n >= 1 {
                    for (j, a) in rows[n - 1].iter().enumerate() {
                        next[j] -= Float::with_val(bits, a * &lower);
                    }
                }
                for c in &mut next {
                    *c *= &scale;
                }
                rows.push(next);
            }
            Ok(rows)
        }
        FamilyKind::DiscreteUltra => Err(Error::invalid(
            "monomial coefficients are only tabulated for h, h~ and D",
        )),
    }
}

/// Evaluates a coefficient row by Horner's rule.
pub fn horner(coefficients: &[QReal], x: &QReal, ctx: &PrecisionContext) -> QReal {
    let mut acc = ctx.real(0);
    for c in coefficients.iter().rev() {
        acc *= x;
        acc += c;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::default()
    }

    fn q(lit: &str) -> QParam {
        QParam::parse(lit, &ctx()).unwrap()
    }

    fn rel_err(a: &QReal, b: &QReal) -> f64 {
        let d = Float::with_val(a.prec(), a - b).abs();
        let scale = Float::with_val(a.prec(), b.abs_ref()).max(&Float::with_val(a.prec(), 1));
        (d / scale).to_f64()
    }

    const TOL: f64 = 1.6e-60; // 2^-200

    #[test]
    fn h_series_small_degrees() {
        let c = ctx();
        let phi = c.real(1.3);
        assert_eq!(eval_h_series(0, &phi, &q("0.5"), &c), 1);
        let h1 = eval_h_series(1, &phi, &q("0.5"), &c);
        let two_sinh = Float::with_val(256, phi.sinh_ref()) * 2u32;
        assert!(rel_err(&h1, &two_sinh) < TOL);
    }

    #[test]
    fn h2_at_origin() {
        // Recurrence oracle: h_2(x) = 4x^2 - q^-1 (1 - q); at x = 0, q = 1/2 this is -1.
        let c = ctx();
        assert_eq!(eval_h_series(2, &c.real(0), &q("0.5"), &c), -1);
        assert_eq!(eval_h_recurrence(2, &c.real(0), &q("0.5"), &c), -1);
    }

    #[test]
    fn h_recurrence_base_and_parity_cases() {
        let c = ctx();
        let x = c.real(0.7);
        assert_eq!(eval_h_recurrence(1, &x, &q("0.3"), &c), Float::with_val(256, &x * 2u32));
        assert_eq!(eval_h_recurrence(3, &c.real(0), &q("0.3"), &c), 0);
    }

    #[test]
    fn h4_series_matches_recurrence_at_one() {
        let c = ctx();
        let one = c.real(1);
        let phi = Float::with_val(256, one.asinh_ref());
        let a = eval_h_series(4, &phi, &q("0.5"), &c);
        let b = eval_h_recurrence(4, &one, &q("0.5"), &c);
        assert!(rel_err(&a, &b) < TOL);
    }

    #[test]
    fn h_tilde_cases() {
        let c = ctx();
        let qq = q("0.5");
        for x in ["0", "0.4", "-2"] {
            assert_eq!(eval_h_tilde(0, &c.parse(x).unwrap(), &qq, &c), 2);
        }
        let one = c.real(1);
        let h3 = eval_h_recurrence(3, &one, &qq, &c);
        assert!(rel_err(&eval_h_tilde(1, &one, &qq, &c), &h3) < TOL);
        // The removable value at zero is the limit of the quotient.
        for k in 0..6 {
            let at_zero = eval_h_tilde(k, &c.real(0), &qq, &c);
            let coeffs = monomial_coefficients(&FamilySpec::q_inv_hermite(qq.clone()), 2 * k + 1, &c).unwrap();
            assert!(rel_err(&at_zero, &coeffs[2 * k + 1][1]) < TOL);
            let x = c.real(1e-30);
            assert!(rel_err(&eval_h_tilde(k, &x, &qq, &c), &at_zero) < 1e-50);
        }
    }

    #[test]
    fn c_trivial_and_two_term() {
        let c = ctx();
        let spec = FamilySpec::discrete_ultra(q("0.5"), c.real(1)).unwrap();
        assert_eq!(eval_c(0, &c.real(0.3), &spec, &c).unwrap(), 1);
        // n = 1, x = 0, q = 1/2, s = 1:
        // 1 + (1 - 2)(1 + 1/4)(1 - 0)(1/2) / ((1 - 1/4)(1 - 1/2)) = 1 - 5/3
        let v = eval_c(1, &c.real(0), &spec, &c).unwrap();
        let expected = c.real(-2) / 3u32;
        assert!(rel_err(&v, &expected) < TOL);
        // x = 1 kills the correction term.
        assert_eq!(eval_c(1, &c.real(1), &spec, &c).unwrap(), 1);
        assert!(eval_c(2, &c.real(0.3), &FamilySpec::q_inv_hermite(q("0.5")), &c).is_err());
    }

    #[test]
    fn d_series_two_term_formula() {
        let c = ctx();
        let qq = q("0.5");
        let s = c.real(0.5);
        let spec = FamilySpec::dual_discrete_ultra(qq.clone(), s.clone()).unwrap();
        let point = MuPoint::on_grid(1, &s, &qq, &c);
        let value = eval_d_series(1, &point, &spec, &c).unwrap();
        // 1 + q (1 - q^-x)(1 - s q^{x+1}) / (1 - s q^2) at x = 1
        let hand = 1 + c.real(0.5) * c.real(1 - 2) * c.real(1.0 - 0.125) / c.real(1.0 - 0.125);
        assert!(rel_err(&value, &hand) < TOL);
        assert_eq!(eval_d_series(0, &point, &spec, &c).unwrap(), 1);
        let d1 = eval_d_recurrence(1, &point.mu, &spec, &c).unwrap();
        assert!(rel_err(&d1, &hand) < TOL);
    }

    #[test]
    fn d_series_off_grid_terminates_in_degree_slot() {
        let c = ctx();
        let qq = q("0.6");
        let s = c.real(1.2);
        let spec = FamilySpec::dual_discrete_ultra(qq.clone(), s.clone()).unwrap();
        let point = MuPoint::off_grid(&c.real(2.37), &s, &qq, &c);
        for n in 0..8 {
            let a = eval_d_series(n, &point, &spec, &c).unwrap();
            let b = eval_d_recurrence(n, &point.mu, &spec, &c).unwrap();
            assert!(rel_err(&a, &b) < 1e-65, "n = {n}");
        }
    }

    #[test]
    fn d_recurrence_first_degree_closed_form() {
        let c = ctx();
        let qq = q("0.3");
        let s = c.real(2.0);
        let spec = FamilySpec::dual_discrete_ultra(qq.clone(), s.clone()).unwrap();
        let mu = c.real(-4.25);
        // D_1 = (q^-1 (1+q) - mu) q / (1 - s q^2)
        let qv = qq.at(&c);
        let expected = (Float::with_val(256, (1 + qv.clone()) / &qv) - &mu) * &qv
            / (1 - Float::with_val(256, &s * qv.clone().square()));
        let got = eval_d_recurrence(1, &mu, &spec, &c).unwrap();
        assert!(rel_err(&got, &expected) < TOL);
    }

    #[test]
    fn degenerate_leading_coefficient() {
        let c = ctx();
        let qq = q("0.5");
        // s = q^-4 kills 1 - s q^{2n+2} at n = 1.
        let spec = FamilySpec::dual_discrete_ultra(qq.clone(), c.real(16)).unwrap();
        let err = eval_d_recurrence(3, &c.real(1), &spec, &c).unwrap_err();
        assert_eq!(err, Error::DegenerateCoefficient { n: 1 });
        assert!(eval_d_recurrence(1, &c.real(1), &spec, &c).is_ok());
    }

    #[test]
    fn family_parameter_validation() {
        let c = ctx();
        assert!(FamilySpec::discrete_ultra(q("0.5"), c.real(0)).is_err());
        assert!(FamilySpec::dual_discrete_ultra(q("0.5"), c.real(-1)).is_err());
        let d = FamilySpec::dual_discrete_ultra(q("0.5"), c.real(4)).unwrap();
        assert!(d.require_base_range(&c).is_err());
        let d = FamilySpec::dual_discrete_ultra(q("0.5"), c.real(3.9)).unwrap();
        assert!(d.require_base_range(&c).is_ok());
    }

    #[test]
    fn coefficient_tables_reproduce_values() {
        let c = ctx();
        let qq = q("0.4");
        let x = c.real(-1.7);
        let h = FamilySpec::q_inv_hermite(qq.clone());
        let rows = monomial_coefficients(&h, 9, &c).unwrap();
        let direct = h_recurrence_values(9, &x, &qq, &c);
        for (row, v) in rows.iter().zip(&direct) {
            assert!(rel_err(&horner(row, &x, &c), v) < 1e-65);
        }
        let d = FamilySpec::dual_q(qq.clone(), &c);
        let rows = monomial_coefficients(&d, 7, &c).unwrap();
        let mu = c.real(3.3);
        for (n, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n + 1);
            let v = eval_d_recurrence(n, &mu, &d, &c).unwrap();
            assert!(rel_err(&horner(row, &mu, &c), &v) < 1e-65);
        }
        let t = FamilySpec::tilde_even_hermite(qq.clone());
        let rows = monomial_coefficients(&t, 3, &c).unwrap();
        for (k, row) in rows.iter().enumerate() {
            assert!(rel_err(&horner(row, &x, &c), &eval_h_tilde(k, &x, &qq, &c)) < 1e-65);
        }
    }
}
