//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Residual thresholds are `2^-150` at 256 bits throughout. A criterion
//! listed in `KNOWN_FAILURES` is still evaluated and printed as FAIL; the
//! process exits nonzero if any other criterion fails, or if a known failure
//! starts passing.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use qorth::families::{eval_c, eval_d_series, eval_h_recurrence, eval_h_series, FamilySpec, MuPoint};
use qorth::identities::{
    check_a_equals_q_equivalence, check_product_identity, check_proposition_even, check_proposition_odd,
    default_phi_grid, relative_residual,
};
use qorth::kernel::{qpoch, qpoch_inf};
use qorth::measures::{adjudicate_normalization, gram_matrix, gram_matrix_in_window, DiscreteMeasure, Parity, CANDIDATE_A2};
use qorth::report::render_short;
use qorth::sweep::{a_grid, node_sets_disjoint, sweep_hermite_extremal};
use qorth::{PrecisionContext, QParam, QReal};
use rug::Float;

/// The product chain's last stated equality is false (its right side is
/// `4/q^2` times the left); see the README.
const KNOWN_FAILURES: [u32; 1] = [7];

const Q_GRID: [&str; 3] = ["0.3", "0.5", "0.7"];

struct Outcome {
    pass: bool,
    summary: String,
}

fn threshold() -> QReal {
    Float::with_val(256, Float::u_exp(1, -150))
}

fn ctx() -> PrecisionContext {
    PrecisionContext::default()
}

fn q(lit: &str, c: &PrecisionContext) -> QParam {
    QParam::parse(lit, c).unwrap()
}

fn max_into(acc: &mut QReal, r: &QReal) {
    if r.is_nan() || *r > *acc {
        *acc = r.clone();
    }
}

/// `{q, (q+1)/2, 0.95}` clipped to `[q, 1)`.
fn a_values(qq: &QParam, c: &PrecisionContext) -> Vec<QReal> {
    let qv = qq.at(c);
    let mid = (qv.clone() + 1u32) / 2u32;
    let top = c.parse("0.95").unwrap().max(&qv);
    vec![qv, mid, top]
}

fn criterion_1() -> Outcome {
    let c = ctx();
    let mut off = c.real(0);
    let mut diag = c.real(0);
    let mut slowest = Duration::ZERO;
    let mut errors = Vec::new();
    for lit in Q_GRID {
        let qq = q(lit, &c);
        for a in a_values(&qq, &c) {
            let start = Instant::now();
            let measure = DiscreteMeasure::hermite_extremal(a.clone(), qq.clone(), &c).unwrap();
            match gram_matrix(&FamilySpec::q_inv_hermite(qq.clone()), &measure, 8, &c) {
                Ok(r) => {
                    max_into(&mut off, &r.off_diag_max);
                    max_into(&mut diag, &r.diag_rel_err_max);
                }
                Err(e) => errors.push(format!("q={lit} a={}: {e}", render_short(&a))),
            }
            slowest = slowest.max(start.elapsed());
        }
    }
    let t = threshold();
    Outcome {
        pass: errors.is_empty() && off < t && diag < t && slowest < Duration::from_secs(30),
        summary: format!(
            "h under the extremal measures, N=8: off_diag_max={} diag_rel_err_max={} slowest pair {:.2}s {}",
            render_short(&off),
            render_short(&diag),
            slowest.as_secs_f64(),
            errors.join("; ")
        ),
    }
}

fn criterion_2() -> Outcome {
    let c = ctx();
    let mut off = c.real(0);
    let mut diag = c.real(0);
    let mut errors = Vec::new();
    for lit in Q_GRID {
        let qq = q(lit, &c);
        for s in [qq.at(&c), qq.pow(-1, &c), c.real(1)] {
            let family = FamilySpec::dual_discrete_ultra(qq.clone(), s.clone()).unwrap();
            for parity in [Parity::Even, Parity::Odd] {
                let measure = DiscreteMeasure::dual_ultra_base(s.clone(), parity, qq.clone(), &c).unwrap();
                match gram_matrix(&family, &measure, 8, &c) {
                    Ok(r) => {
                        max_into(&mut off, &r.off_diag_max);
                        max_into(&mut diag, &r.diag_rel_err_max);
                    }
                    Err(e) => errors.push(format!("q={lit} s={} {}: {e}", render_short(&s), parity.label())),
                }
            }
        }
    }
    let t = threshold();
    Outcome {
        pass: errors.is_empty() && off < t && diag < t,
        summary: format!(
            "D under the base measures, s in {{q, 1/q, 1}}, both parities, N=8: off_diag_max={} diag_rel_err_max={} {}",
            render_short(&off),
            render_short(&diag),
            errors.join("; ")
        ),
    }
}

fn criterion_3() -> Outcome {
    let c = ctx();
    let grid = default_phi_grid(&c);
    let mut worst = c.real(0);
    for lit in Q_GRID {
        let qq = q(lit, &c);
        max_into(&mut worst, &check_proposition_even(6, &grid, &qq, &c).unwrap().max_residual);
        max_into(&mut worst, &check_proposition_odd(6, &grid, &qq, &c).unwrap().max_residual);
    }
    Outcome {
        pass: worst < threshold(),
        summary: format!("h_2k, h_2k+1 as scaled D_k, k<=6, phi grid of 7 points: max residual={}", render_short(&worst)),
    }
}

fn criterion_4() -> Outcome {
    let c = ctx();
    let mut blocks = c.real(0);
    let mut cross = c.real(0);
    for lit in Q_GRID {
        let r = check_a_equals_q_equivalence(6, &q(lit, &c), &c).unwrap();
        for d in &r.details {
            match d.label.as_str() {
                "even block" | "odd block" => max_into(&mut blocks, &d.value),
                "cross block" => max_into(&mut cross, &d.value),
                _ => {}
            }
        }
    }
    let t = threshold();
    Outcome {
        pass: blocks < t && cross < t,
        summary: format!(
            "h Gram at a=q against half-lattice Grams, N=6: parity blocks={} cross block={}",
            render_short(&blocks),
            render_short(&cross)
        ),
    }
}

fn criterion_5() -> Outcome {
    let c = ctx();
    let t = threshold();
    let mut off = c.real(0);
    let mut matched = c.real(0);
    let mut rejected = Float::with_val(256, rug::float::Special::Infinity);
    let mut definitive = true;
    for lit in Q_GRID {
        let qq = q(lit, &c);
        for a in a_values(&qq, &c) {
            let r = adjudicate_normalization(&qq, &a, 8, &c).unwrap();
            for fam in [&r.qinv, &r.q_family] {
                max_into(&mut off, &fam.off_diag_max);
                definitive &= fam.matching == [CANDIDATE_A2];
                for cand in &fam.candidates {
                    if cand.label == CANDIDATE_A2 {
                        max_into(&mut matched, &cand.residual);
                    } else if cand.residual < rejected {
                        rejected = cand.residual.clone();
                    }
                }
            }
        }
    }
    Outcome {
        pass: off < t && definitive && matched < t && rejected > t,
        summary: format!(
            "dual extremal measures, N=8: off_diag_max={}; normalization {} matches (max residual {}), \
             the (-q/a;q) candidate misses by at least {}",
            render_short(&off),
            CANDIDATE_A2,
            render_short(&matched),
            render_short(&rejected)
        ),
    }
}

fn criterion_6() -> Outcome {
    let c = ctx();
    let t = threshold();
    let mut h_worst = c.real(0);
    for lit in Q_GRID {
        let qq = q(lit, &c);
        for phi in default_phi_grid(&c) {
            let x = Float::with_val(256, phi.sinh_ref());
            for n in 0..=20 {
                let series = eval_h_series(n, &phi, &qq, &c);
                let rec = eval_h_recurrence(n, &x, &qq, &c);
                max_into(&mut h_worst, &relative_residual(&series, &rec, &c));
            }
        }
    }
    let mut d_worst = c.real(0);
    for lit in Q_GRID {
        let qq = q(lit, &c);
        for s in [qq.at(&c), qq.pow(-1, &c), c.real(1)] {
            let spec = FamilySpec::dual_discrete_ultra(qq.clone(), s.clone()).unwrap();
            for x in 0..=12i64 {
                let point = MuPoint::on_grid(x, &s, &qq, &c);
                let rec = spec.values_upto(12, &point.mu, &c).unwrap();
                for (n, r) in rec.iter().enumerate() {
                    let series = eval_d_series(n, &point, &spec, &c).unwrap();
                    max_into(&mut d_worst, &relative_residual(&series, r, &c));
                }
            }
        }
    }

    // Kernel examples at 256 and 512 bits.
    let hi = c.doubled();
    let examples = |k: &PrecisionContext| -> Vec<QReal> {
        let half = q("0.5", k);
        let s1 = FamilySpec::discrete_ultra(half.clone(), k.real(1)).unwrap();
        let a = k.parse("0.3").unwrap();
        let aq = Float::with_val(k.bits(), &a * half.value());
        vec![
            qpoch(&k.real(0.5), &half, 2, k),
            qpoch(&k.real(0), &half, 5, k),
            qpoch_inf(&k.real(0), &half, k).unwrap(),
            qpoch_inf(&half.at(k), &half, k).unwrap(),
            qpoch_inf(&a, &half, k).unwrap() - (1u32 - a.clone()) * qpoch_inf(&aq, &half, k).unwrap(),
            eval_c(1, &k.real(1), &s1, k).unwrap(),
        ]
    };
    let mut doubling = c.real(0);
    for (lo, hi) in examples(&c).iter().zip(examples(&hi)) {
        let diff = Float::with_val(512, &hi - lo).abs();
        max_into(&mut doubling, &c.real(&diff));
    }
    Outcome {
        pass: h_worst < t && d_worst < t && doubling < t,
        summary: format!(
            "series vs recurrence: h (n<=20)={} D (n,x<=12)={}; kernel examples 256 vs 512 bits={}",
            render_short(&h_worst),
            render_short(&d_worst),
            render_short(&doubling)
        ),
    }
}

fn criterion_7() -> Outcome {
    let c = ctx();
    let mut worst = c.real(0);
    let mut links = Vec::new();
    for lit in ["0.5", "0.9"] {
        let r = check_product_identity(&q(lit, &c), &c).unwrap();
        max_into(&mut worst, &r.max_residual);
        let get = |label: &str| r.details.iter().find(|d| d.label == label).map(|d| render_short(&d.value)).unwrap();
        links.push(format!(
            "q={lit}: links {} / {} / {}, right/left of last link {}",
            get("first equality"),
            get("second equality"),
            get("third equality"),
            get("third right side / left side")
        ));
    }
    Outcome {
        pass: worst < threshold(),
        summary: format!("product chain: {}", links.join("; ")),
    }
}

fn criterion_8() -> Outcome {
    let c = ctx();
    let t = threshold();
    let qq = q("0.5", &c);
    let grid = a_grid(&qq, &qq.at(&c), &c.parse("0.95").unwrap(), 10, &c).unwrap();
    let rows = sweep_hermite_extremal(&qq, &grid, 8, &c).unwrap();
    let all_pass = rows.iter().all(|r| r.report.off_diag_max < t && r.report.diag_rel_err_max < t);
    let mut hashes: Vec<&str> = rows.iter().map(|r| r.node_hash.as_str()).collect();
    hashes.sort();
    hashes.dedup();
    let mut disjoint = true;
    for (i, a1) in grid.iter().enumerate() {
        for a2 in &grid[i + 1..] {
            let m1 = DiscreteMeasure::hermite_extremal(a1.clone(), qq.clone(), &c).unwrap();
            let m2 = DiscreteMeasure::hermite_extremal(a2.clone(), qq.clone(), &c).unwrap();
            disjoint &= node_sets_disjoint(&m1, &m2, -30..=30, &c).unwrap();
        }
    }

    let mut honest = true;
    let mut worst_ratio = c.real(0);
    let a = c.parse("0.8").unwrap();
    let pairs = vec![
        (FamilySpec::q_inv_hermite(qq.clone()), DiscreteMeasure::hermite_extremal(a.clone(), qq.clone(), &c).unwrap()),
        (FamilySpec::dual_q_inv(qq.clone(), &c), DiscreteMeasure::dual_qinv_extremal(a.clone(), qq.clone(), &c).unwrap()),
        (FamilySpec::dual_q(qq.clone(), &c), DiscreteMeasure::dual_q_extremal(a.clone(), qq.clone(), &c).unwrap()),
        (
            FamilySpec::dual_discrete_ultra(qq.clone(), c.real(1)).unwrap(),
            DiscreteMeasure::dual_ultra_base(c.real(1), Parity::Even, qq.clone(), &c).unwrap(),
        ),
        (
            FamilySpec::dual_discrete_ultra(qq.clone(), c.real(1)).unwrap(),
            DiscreteMeasure::dual_ultra_base(c.real(1), Parity::Odd, qq.clone(), &c).unwrap(),
        ),
    ];
    for (family, measure) in pairs {
        let r = gram_matrix(&family, &measure, 8, &c).unwrap();
        let tr = &r.truncation;
        let wide = gram_matrix_in_window(&family, &measure, 8, tr.m_lo - 5, tr.m_hi + 5, &c).unwrap();
        for (row, wrow) in r.gram.iter().zip(&wide.gram) {
            for (g, w) in row.iter().zip(wrow) {
                let diff = Float::with_val(256, g - w).abs();
                honest &= diff <= tr.certified_tail_bound;
                let ratio = diff / &tr.certified_tail_bound;
                max_into(&mut worst_ratio, &ratio);
            }
        }
    }
    Outcome {
        pass: all_pass && hashes.len() == rows.len() && disjoint && honest,
        summary: format!(
            "sweep of {} values of a in [q, 0.95] at q=0.5: all Grams pass={all_pass}, distinct node hashes={}, \
             pairwise disjoint node sets={disjoint}; widening by 5 within certified bound={honest} \
             (largest change / bound = {})",
            rows.len(),
            hashes.len(),
            render_short(&worst_ratio)
        ),
    }
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 8] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
    ];
    let mut unexpected = 0;
    for (id, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let known = KNOWN_FAILURES.contains(&id);
        let tag = match (outcome.pass, known) {
            (true, false) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
            (true, true) => "PASS (expected failure)",
        };
        if outcome.pass == known {
            unexpected += 1;
        }
        println!("criterion {id}: {tag} [{:.1}s] {}", start.elapsed().as_secs_f64(), outcome.summary);
    }
    if unexpected > 0 {
        println!("acceptance: {unexpected} unexpected outcome(s)");
        ExitCode::FAILURE
    } else {
        println!("acceptance: all criteria as expected");
        ExitCode::SUCCESS
    }
}
