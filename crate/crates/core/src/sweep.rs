//! Parameter sweeps over the extremal family `a in [q, 1)`.
//!
//! Each row carries the Gram residuals of `h` under the extremal measure with
//! that `a` and a fingerprint of its node set. The node set
//! `{sinh(phi) : e^phi in a^-1 q^Z}` only depends on `a` modulo `q^Z`, and
//! `[q, 1)` holds exactly one representative of each class, so distinct `a`
//! in the sweep give distinct node sets.

use rug::Float;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::families::FamilySpec;
use crate::kernel::{PrecisionContext, QParam, QReal};
use crate::measures::{gram_matrix, DiscreteMeasure, GramReport};
use crate::report::decimal;

/// Index band hashed by [`node_fingerprint`].
pub const FINGERPRINT_BAND: i64 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub a: QReal,
    pub report: GramReport,
    pub node_hash: String,
}

/// `steps` equally spaced values from `a_from` to `a_to` inclusive; one step
/// gives `a_from` alone.
pub fn a_grid(q: &QParam, a_from: &QReal, a_to: &QReal, steps: usize, ctx: &PrecisionContext) -> Result<Vec<QReal>> {
    if steps == 0 {
        return Err(Error::invalid("steps must be >= 1"));
    }
    if !(*a_from >= *q.value() && a_from <= a_to && *a_to < 1) {
        return Err(Error::invalid("a range must satisfy q<=a_from<=a_to<1"));
    }
    if steps == 1 {
        return Ok(vec![ctx.real(a_from)]);
    }
    let width = Float::with_val(ctx.bits(), a_to - a_from);
    Ok((0..steps)
        .map(|i| {
            if i + 1 == steps {
                ctx.real(a_to)
            } else {
                Float::with_val(ctx.bits(), &width * i as u32) / (steps as u32 - 1) + a_from
            }
        })
        .collect())
}

/// First 16 hex digits of the SHA-256 of the nodes with `|m| <= 8`, each
/// rendered to 40 significant digits.
pub fn node_fingerprint(measure: &DiscreteMeasure, ctx: &PrecisionContext) -> Result<String> {
    let mut hasher = Sha256::new();
    for m in -FINGERPRINT_BAND..=FINGERPRINT_BAND {
        if let Some(atom) = measure.atom(m, ctx)? {
            hasher.update(decimal(&atom.node, 40).as_bytes());
            hasher.update(b"\n");
        }
    }
    let digest = hasher.finalize();
    Ok(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
}

/// True when no node of `first` with index in `range` coincides, up to the
/// rounding floor, with a node of `second` with index in `range`.
pub fn node_sets_disjoint(
    first: &DiscreteMeasure,
    second: &DiscreteMeasure,
    range: std::ops::RangeInclusive<i64>,
    ctx: &PrecisionContext,
) -> Result<bool> {
    let nodes = |m: &DiscreteMeasure| -> Result<Vec<QReal>> {
        let mut out = Vec::new();
        for i in range.clone() {
            if let Some(atom) = m.atom(i, ctx)? {
                out.push(atom.node);
            }
        }
        out.sort_by(|x, y| x.partial_cmp(y).expect("finite nodes"));
        Ok(out)
    };
    let (xs, ys) = (nodes(first)?, nodes(second)?);
    let floor = ctx.rounding_floor();
    let (mut i, mut j) = (0, 0);
    while i < xs.len() && j < ys.len() {
        let scale = Float::with_val(ctx.bits(), xs[i].abs_ref()).max(&ctx.real(1));
        if Float::with_val(ctx.bits(), &xs[i] - &ys[j]).abs() <= scale * &floor {
            return Ok(false);
        }
        if xs[i] < ys[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    Ok(true)
}

/// Gram residuals and node fingerprints of `h` under each extremal measure
/// in `grid`.
pub fn sweep_hermite_extremal(
    q: &QParam,
    grid: &[QReal],
    n_max: usize,
    ctx: &PrecisionContext,
) -> Result<Vec<SweepRow>> {
    let family = FamilySpec::q_inv_hermite(q.clone());
    grid.iter()
        .map(|a| {
            let measure = DiscreteMeasure::hermite_extremal(a.clone(), q.clone(), ctx)?;
            let report = gram_matrix(&family, &measure, n_max, ctx)?;
            let node_hash = node_fingerprint(&measure, ctx)?;
            Ok(SweepRow { a: a.clone(), report, node_hash })
        })
        .collect()
}
