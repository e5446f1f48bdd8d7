use qorth::families::FamilySpec;
use qorth::measures::{gram_matrix, gram_matrix_in_window, DiscreteMeasure, GramReport, Parity};
use qorth::{PrecisionContext, QParam};

fn ctx() -> PrecisionContext {
    PrecisionContext::default()
}

fn all_pairs(q: &QParam, a: &str, c: &PrecisionContext) -> Vec<(FamilySpec, DiscreteMeasure)> {
    let a = c.parse(a).unwrap();
    let mut out = vec![
        (FamilySpec::q_inv_hermite(q.clone()), DiscreteMeasure::hermite_extremal(a.clone(), q.clone(), c).unwrap()),
        (FamilySpec::dual_q_inv(q.clone(), c), DiscreteMeasure::dual_qinv_extremal(a.clone(), q.clone(), c).unwrap()),
        (FamilySpec::dual_q(q.clone(), c), DiscreteMeasure::dual_q_extremal(a.clone(), q.clone(), c).unwrap()),
    ];
    for s in [c.parse("0.5").unwrap(), q.pow(-1, c), c.real(1)] {
        for parity in [Parity::Even, Parity::Odd] {
            out.push((
                FamilySpec::dual_discrete_ultra(q.clone(), s.clone()).unwrap(),
                DiscreteMeasure::dual_ultra_base(s.clone(), parity, q.clone(), c).unwrap(),
            ));
        }
    }
    out
}

fn describe(r: &GramReport) -> String {
    format!(
        "{} q={} off={:.3e} diag={:.3e} window=[{},{}]",
        r.measure.kind().label(),
        r.measure.q().value().to_f64(),
        r.off_diag_max.to_f64(),
        r.diag_rel_err_max.to_f64(),
        r.truncation.m_lo,
        r.truncation.m_hi
    )
}

#[test]
fn every_pair_is_orthogonal_with_closed_form_norms() {
    let c = ctx();
    for q in ["0.3", "0.5", "0.7"] {
        let q = QParam::parse(q, &c).unwrap();
        for (family, measure) in all_pairs(&q, "0.8", &c) {
            let r = gram_matrix(&family, &measure, 8, &c).unwrap();
            assert!(r.passes(c.tol()), "{}", describe(&r));
            assert!(r.truncation.certified_tail_bound < *c.tol());
        }
    }
}

#[test]
fn extremal_measures_at_a_equals_q() {
    let c = ctx();
    let q = QParam::parse("0.5", &c).unwrap();
    for (family, measure) in all_pairs(&q, "0.5", &c).into_iter().take(3) {
        let r = gram_matrix(&family, &measure, 8, &c).unwrap();
        assert!(r.passes(c.tol()), "{}", describe(&r));
    }
}

#[test]
fn widening_the_window_changes_entries_by_less_than_the_bound() {
    let c = ctx();
    let q = QParam::parse("0.5", &c).unwrap();
    for (family, measure) in all_pairs(&q, "0.75", &c) {
        let r = gram_matrix(&family, &measure, 6, &c).unwrap();
        let t = &r.truncation;
        let wide = gram_matrix_in_window(&family, &measure, 6, t.m_lo - 5, t.m_hi + 5, &c).unwrap();
        for (row, wrow) in r.gram.iter().zip(&wide.gram) {
            for (g, w) in row.iter().zip(wrow) {
                let diff = rug::Float::with_val(c.bits(), g - w).abs();
                assert!(diff <= t.certified_tail_bound, "{}", describe(&r));
            }
        }
    }
}
