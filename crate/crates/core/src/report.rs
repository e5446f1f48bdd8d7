//! Decimal rendering and the JSON shapes of the reports.
//!
//! Every real is written as a decimal string with `ceil(bits/3)`
//! significant digits and trailing zeros removed, so `1` renders as `"1"`
//! and the output depends only on the value and the precision.

use rug::Float;
use serde::{Deserialize, Serialize};

use crate::identities::IdentityReport;
use crate::kernel::QReal;
use crate::measures::{GramReport, NormalizationReport};

/// Significant decimal digits carried for a `bits`-bit value.
pub fn digits_for_bits(bits: u32) -> usize {
    bits.div_ceil(3) as usize
}

/// `x` with `digits` significant digits, plain notation for exponents in
/// `[-6, 21)` and `d.ddde<exp>` otherwise.
pub fn decimal(x: &QReal, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x.is_sign_negative() { "-inf".into() } else { "inf".into() };
    }
    if x.is_zero() {
        return "0".into();
    }
    let (negative, mantissa, exp) = x.to_sign_string_exp(10, Some(digits.max(1)));
    let mantissa = mantissa.trim_end_matches('0');
    let exp = exp.expect("finite nonzero value has an exponent");
    // value = 0.mantissa * 10^exp = m.antissa * 10^(exp-1)
    let e = exp as i64 - 1;
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    let len = mantissa.len() as i64;
    if (-6..21).contains(&e) {
        if e < 0 {
            out.push_str("0.");
            out.extend(std::iter::repeat_n('0', (-e - 1) as usize));
            out.push_str(mantissa);
        } else if len <= e + 1 {
            out.push_str(mantissa);
            out.extend(std::iter::repeat_n('0', (e + 1 - len) as usize));
        } else {
            let (int, frac) = mantissa.split_at((e + 1) as usize);
            out.push_str(int);
            out.push('.');
            out.push_str(frac);
        }
    } else {
        let (lead, rest) = mantissa.split_at(1);
        out.push_str(lead);
        if !rest.is_empty() {
            out.push('.');
            out.push_str(rest);
        }
        out.push_str(&format!("e{e}"));
    }
    out
}

/// [`decimal`] at the digit count for `x`'s own precision.
pub fn render(x: &QReal) -> String {
    decimal(x, digits_for_bits(x.prec()))
}

/// Short rendering for human-facing summaries (eight significant digits).
pub fn render_short(x: &QReal) -> String {
    decimal(x, 8)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GramReportJson {
    pub family: String,
    pub measure: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub parity: Option<String>,
    pub q: String,
    pub s: Option<String>,
    pub a: Option<String>,
    #[serde(rename = "N")]
    pub n: usize,
    pub bits: u32,
    /// Row-major: `gram[n][n']`.
    pub gram: Vec<Vec<String>>,
    pub expected_diag: Vec<String>,
    pub off_diag_max: String,
    pub diag_rel_err_max: String,
    pub m_window: [i64; 2],
    pub tail_bound: String,
    pub pass: bool,
}

impl GramReportJson {
    pub fn from_report(report: &GramReport, tol: &QReal) -> Self {
        let digits = digits_for_bits(report.bits);
        let d = |x: &QReal| decimal(x, digits);
        let measure = &report.measure;
        let family_s = report.family.s().map(&d);
        Self {
            family: report.family.kind().label().to_string(),
            measure: measure.kind().label().to_string(),
            parity: measure.kind().parity().map(|p| p.label().to_string()),
            q: d(report.family.q().value()),
            s: measure.kind().s().map(&d).or(family_s),
            a: measure.kind().a().map(&d),
            n: report.n_max,
            bits: report.bits,
            gram: report.gram.iter().map(|row| row.iter().map(&d).collect()).collect(),
            expected_diag: report.expected_diag.iter().map(&d).collect(),
            off_diag_max: d(&report.off_diag_max),
            diag_rel_err_max: d(&report.diag_rel_err_max),
            m_window: [report.truncation.m_lo, report.truncation.m_hi],
            tail_bound: d(&report.truncation.certified_tail_bound),
            pass: report.passes(tol),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetailJson {
    pub label: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityReportJson {
    pub id: String,
    pub description: String,
    pub sample_grid: String,
    pub max_residual: String,
    pub pass: bool,
    pub details: Vec<DetailJson>,
    pub notes: Vec<String>,
}

impl From<&IdentityReport> for IdentityReportJson {
    fn from(r: &IdentityReport) -> Self {
        let digits = 12;
        Self {
            id: r.id.as_str().to_string(),
            description: r.id.description().to_string(),
            sample_grid: r.sample_grid.clone(),
            max_residual: decimal(&r.max_residual, digits),
            pass: r.pass,
            details: r
                .details
                .iter()
                .map(|d| DetailJson { label: d.label.clone(), value: decimal(&d.value, digits) })
                .collect(),
            notes: r.notes.clone(),
        }
    }
}

pub fn identity_reports_json(reports: &[IdentityReport]) -> String {
    let rows: Vec<IdentityReportJson> = reports.iter().map(Into::into).collect();
    serde_json::to_string_pretty(&rows).expect("reports serialize")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateJson {
    pub constant: String,
    pub residual: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyAdjudicationJson {
    pub family: String,
    pub off_diag_max: String,
    pub candidates: Vec<CandidateJson>,
    pub matching: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationReportJson {
    pub q: String,
    pub a: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub families: Vec<FamilyAdjudicationJson>,
    pub alternative_odd_weight_nonpositive_nodes: usize,
    pub alternative_odd_weight_off_diag_max: String,
    pub alternative_odd_weight_positive_part_off_diag_max: String,
    pub verdict: String,
}

impl From<&NormalizationReport> for NormalizationReportJson {
    fn from(r: &NormalizationReport) -> Self {
        let d = |x: &QReal| decimal(x, 12);
        let fam = |f: &crate::measures::FamilyAdjudication| FamilyAdjudicationJson {
            family: f.family.to_string(),
            off_diag_max: d(&f.off_diag_max),
            candidates: f
                .candidates
                .iter()
                .map(|c| CandidateJson { constant: c.label.to_string(), residual: d(&c.residual) })
                .collect(),
            matching: f.matching.iter().map(|s| s.to_string()).collect(),
        };
        Self {
            q: render_short(&r.q),
            a: render_short(&r.a),
            n: r.n_max,
            families: vec![fam(&r.qinv), fam(&r.q_family)],
            alternative_odd_weight_nonpositive_nodes: r.alternative_odd_weight.nonpositive_weights,
            alternative_odd_weight_off_diag_max: d(&r.alternative_odd_weight.off_diag_max),
            alternative_odd_weight_positive_part_off_diag_max: d(&r.alternative_odd_weight.off_diag_max_positive_part),
            verdict: r.verdict.clone(),
        }
    }
}

/// Parses a decimal string produced by [`decimal`] back at `bits` precision.
pub fn parse_decimal(text: &str, bits: u32) -> Option<QReal> {
    Float::parse(text).ok().map(|p| Float::with_val(bits, p))
}
