use std::fmt::Write as _;

use qorth::families::{eval_c, eval_d_series, eval_h_recurrence, eval_h_series, eval_h_tilde, FamilySpec, MuPoint};
use qorth::identities::{run_suite, IdentityId, SuiteConfig};
use qorth::measures::{gram_matrix, DiscreteMeasure, GramReport, Parity};
use qorth::report::{decimal, digits_for_bits, identity_reports_json, render_short, GramReportJson};
use qorth::sweep::{a_grid, sweep_hermite_extremal};
use qorth::{PrecisionContext, QParam, QReal};
use rug::Float;
use serde_json::json;

use crate::config::{CommandKind, FamilyArg, MeasureArg, OutputFormat, ParityArg, RunConfig, SMode};
use crate::CliError;

/// Runs the configured command, writes its output and returns whether every
/// check passed.
pub fn run(cfg: &RunConfig) -> Result<bool, CliError> {
    let ctx = PrecisionContext::new(cfg.bits, cfg.tol_exp, PrecisionContext::DEFAULT_MAX_TERMS)?;
    let q = QParam::parse(&cfg.q, &ctx)?;
    let (text, pass) = match cfg.command {
        CommandKind::Eval => eval(cfg, &q, &ctx)?,
        CommandKind::Gram => gram(cfg, &q, &ctx)?,
        CommandKind::Verify => verify(cfg, &q, &ctx)?,
        CommandKind::Sweep => sweep(cfg, &q, &ctx)?,
    };
    match &cfg.out_path {
        Some(path) => std::fs::write(path, &text)
            .map_err(|e| CliError::Compute(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(pass)
}

fn number(name: &str, text: &str, ctx: &PrecisionContext) -> Result<QReal, CliError> {
    ctx.parse(text).map_err(|_| CliError::Usage(format!("--{name}: not a decimal number: {text}")))
}

fn resolve_s(cfg: &RunConfig, q: &QParam, ctx: &PrecisionContext) -> Result<QReal, CliError> {
    match (cfg.s_mode, &cfg.s) {
        (SMode::Qinv, _) => Ok(q.pow(-1, ctx)),
        (SMode::Q, _) => Ok(q.at(ctx)),
        (SMode::Value, Some(s)) => number("s", s, ctx),
        (SMode::Value, None) => Err(CliError::Usage("this family needs --s or --s-mode".into())),
    }
}

fn eval(cfg: &RunConfig, q: &QParam, ctx: &PrecisionContext) -> Result<(String, bool), CliError> {
    let family = cfg.family.ok_or_else(|| CliError::Usage("eval needs --family".into()))?;
    let n = cfg.n.ok_or_else(|| CliError::Usage("eval needs --n".into()))?;
    let given: Vec<(&str, &String)> = [("x", &cfg.x), ("phi", &cfg.phi), ("mu", &cfg.mu)]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k, v)))
        .collect();
    let [(arg_name, arg_text)] = given[..] else {
        return Err(CliError::Usage("eval needs exactly one of --x, --phi, --mu".into()));
    };
    let arg = number(arg_name, arg_text, ctx)?;
    let mut s_used = None;
    let value = match (family, arg_name) {
        (FamilyArg::H, "phi") => eval_h_series(n, &arg, q, ctx),
        (FamilyArg::H, "x") => eval_h_recurrence(n, &arg, q, ctx),
        (FamilyArg::HTilde, "phi") => eval_h_tilde(n, &Float::with_val(ctx.bits(), arg.sinh_ref()), q, ctx),
        (FamilyArg::HTilde, "x") => eval_h_tilde(n, &arg, q, ctx),
        (FamilyArg::C, "x") => {
            let s = resolve_s(cfg, q, ctx)?;
            let spec = FamilySpec::discrete_ultra(q.clone(), s.clone())?;
            s_used = Some(s);
            eval_c(n, &arg, &spec, ctx)?
        }
        (FamilyArg::D, "mu" | "x") => {
            let s = resolve_s(cfg, q, ctx)?;
            let spec = FamilySpec::dual_discrete_ultra(q.clone(), s.clone())?;
            spec.require_base_range(ctx)?;
            let v = if arg_name == "mu" {
                spec.eval(n, &arg, ctx)?
            } else {
                let point = if arg.is_integer() && arg.clone().abs() < 1e15 {
                    MuPoint::on_grid(arg.to_f64() as i64, &s, q, ctx)
                } else {
                    MuPoint::off_grid(&arg, &s, q, ctx)
                };
                eval_d_series(n, &point, &spec, ctx)?
            };
            s_used = Some(s);
            v
        }
        (f, a) => {
            let allowed = match f {
                FamilyArg::H | FamilyArg::HTilde => "--x or --phi",
                FamilyArg::C => "--x",
                FamilyArg::D => "--x or --mu",
            };
            return Err(CliError::Usage(format!("--{a} does not apply to this family; use {allowed}")));
        }
    };
    let digits = digits_for_bits(ctx.bits());
    let d = |x: &QReal| decimal(x, digits);
    let label = match family {
        FamilyArg::H => "h",
        FamilyArg::HTilde => "htilde",
        FamilyArg::C => "C",
        FamilyArg::D => "D",
    };
    let text = match cfg.output {
        OutputFormat::Json => {
            let obj = json!({
                "family": label,
                "n": n,
                "q": d(q.value()),
                "s": s_used.as_ref().map(&d),
                "arg": arg_name,
                "arg_value": d(&arg),
                "bits": ctx.bits(),
                "value": d(&value),
            });
            format!("{}\n", serde_json::to_string_pretty(&obj).expect("json"))
        }
        OutputFormat::Csv => format!(
            "family,n,q,s,arg,arg_value,value\n{label},{n},{},{},{arg_name},{},{}\n",
            d(q.value()),
            s_used.as_ref().map(&d).unwrap_or_default(),
            d(&arg),
            d(&value)
        ),
        OutputFormat::Pretty => format!("{}\n", d(&value)),
    };
    Ok((text, true))
}

fn gram_inputs(cfg: &RunConfig, q: &QParam, ctx: &PrecisionContext) -> Result<(FamilySpec, DiscreteMeasure), CliError> {
    let a = || -> Result<QReal, CliError> {
        match &cfg.a {
            Some(a) => number("a", a, ctx),
            None => Ok(q.at(ctx)),
        }
    };
    let measure = match cfg.measure {
        MeasureArg::HermiteExtremal => DiscreteMeasure::hermite_extremal(a()?, q.clone(), ctx)?,
        MeasureArg::DualBase => {
            let parity = match cfg.parity {
                ParityArg::Even => Parity::Even,
                ParityArg::Odd => Parity::Odd,
            };
            let s = resolve_s(cfg, q, ctx)?;
            FamilySpec::dual_discrete_ultra(q.clone(), s.clone())?.require_base_range(ctx)?;
            DiscreteMeasure::dual_ultra_base(s, parity, q.clone(), ctx)?
        }
        MeasureArg::DualQinvExtremal => DiscreteMeasure::dual_qinv_extremal(a()?, q.clone(), ctx)?,
        MeasureArg::DualQExtremal => DiscreteMeasure::dual_q_extremal(a()?, q.clone(), ctx)?,
    };
    let family = match (cfg.family, cfg.measure) {
        (None, MeasureArg::HermiteExtremal) | (Some(FamilyArg::H), _) => FamilySpec::q_inv_hermite(q.clone()),
        (None, MeasureArg::DualBase) => FamilySpec::dual_discrete_ultra(q.clone(), resolve_s(cfg, q, ctx)?)?,
        (None, MeasureArg::DualQinvExtremal) => FamilySpec::dual_q_inv(q.clone(), ctx),
        (None, MeasureArg::DualQExtremal) => FamilySpec::dual_q(q.clone(), ctx),
        (Some(FamilyArg::HTilde), _) => FamilySpec::tilde_even_hermite(q.clone()),
        (Some(FamilyArg::C), _) => FamilySpec::discrete_ultra(q.clone(), resolve_s(cfg, q, ctx)?)?,
        (Some(FamilyArg::D), _) => FamilySpec::dual_discrete_ultra(q.clone(), resolve_s(cfg, q, ctx)?)?,
    };
    Ok((family, measure))
}

fn gram(cfg: &RunConfig, q: &QParam, ctx: &PrecisionContext) -> Result<(String, bool), CliError> {
    let (family, measure) = gram_inputs(cfg, q, ctx)?;
    let report = gram_matrix(&family, &measure, cfg.n_max, ctx)?;
    let json = GramReportJson::from_report(&report, ctx.tol());
    let text = match cfg.output {
        OutputFormat::Json => format!("{}\n", json.to_json()),
        OutputFormat::Csv => {
            let mut out = String::from("n,n_prime,gram,expected\n");
            for (i, row) in json.gram.iter().enumerate() {
                for (j, g) in row.iter().enumerate() {
                    let expected = if i == j { json.expected_diag[i].as_str() } else { "0" };
                    writeln!(out, "{i},{j},{g},{expected}").expect("string write");
                }
            }
            out
        }
        OutputFormat::Pretty => gram_pretty(&report, json.pass),
    };
    Ok((text, json.pass))
}

fn gram_pretty(report: &GramReport, pass: bool) -> String {
    let mut out = String::new();
    let kind = report.measure.kind();
    writeln!(out, "family     {}", report.family.kind().label()).unwrap();
    write!(out, "measure    {}", kind.label()).unwrap();
    if let Some(p) = kind.parity() {
        write!(out, " ({})", p.label()).unwrap();
    }
    out.push('\n');
    writeln!(out, "q          {}", render_short(report.family.q().value())).unwrap();
    if let Some(a) = kind.a() {
        writeln!(out, "a          {}", render_short(a)).unwrap();
    }
    if let Some(s) = kind.s().or(report.family.s()) {
        writeln!(out, "s          {}", render_short(s)).unwrap();
    }
    writeln!(out, "N          {}", report.n_max).unwrap();
    writeln!(out, "window     m in [{}, {}]", report.truncation.m_lo, report.truncation.m_hi).unwrap();
    writeln!(out, "tail bound {}", render_short(&report.truncation.certified_tail_bound)).unwrap();
    writeln!(out, "diagonal   n  computed  expected").unwrap();
    for (n, row) in report.gram.iter().enumerate() {
        writeln!(out, "           {n}  {}  {}", render_short(&row[n]), render_short(&report.expected_diag[n])).unwrap();
    }
    writeln!(out, "off-diagonal max        {}", render_short(&report.off_diag_max)).unwrap();
    writeln!(out, "diagonal rel. error max {}", render_short(&report.diag_rel_err_max)).unwrap();
    writeln!(out, "{}", if pass { "PASS" } else { "FAIL" }).unwrap();
    out
}

fn verify(cfg: &RunConfig, q: &QParam, ctx: &PrecisionContext) -> Result<(String, bool), CliError> {
    if cfg.list {
        let text = match cfg.output {
            OutputFormat::Json => {
                let rows: Vec<_> = IdentityId::ALL
                    .iter()
                    .map(|id| json!({"id": id.as_str(), "description": id.description()}))
                    .collect();
                format!("{}\n", serde_json::to_string_pretty(&rows).expect("json"))
            }
            OutputFormat::Csv => {
                let mut out = String::from("id,description\n");
                for id in IdentityId::ALL {
                    writeln!(out, "{},\"{}\"", id.as_str(), id.description().replace('"', "\"\"")).unwrap();
                }
                out
            }
            OutputFormat::Pretty => {
                let mut out = String::new();
                for id in IdentityId::ALL {
                    writeln!(out, "{:<32} {}", id.as_str(), id.description()).unwrap();
                }
                out
            }
        };
        return Ok((text, true));
    }
    let mut suite = SuiteConfig::new(q.clone(), ctx);
    suite.k_max = cfg.k_max;
    suite.lattice_n = cfg.n_max;
    let reports = run_suite(&suite, ctx);
    let pass = reports.iter().all(|r| r.pass);
    let text = match cfg.output {
        OutputFormat::Json => format!("{}\n", identity_reports_json(&reports)),
        OutputFormat::Csv => {
            let mut out = String::from("id,pass,max_residual,sample_grid\n");
            for r in &reports {
                writeln!(
                    out,
                    "{},{},{},\"{}\"",
                    r.id.as_str(),
                    r.pass,
                    decimal(&r.max_residual, 12),
                    r.sample_grid.replace('"', "\"\"")
                )
                .unwrap();
            }
            out
        }
        OutputFormat::Pretty => {
            let mut out = String::new();
            for r in &reports {
                let verdict = if r.pass { "PASS" } else { "FAIL" };
                writeln!(out, "{verdict}  {:<32} max residual {}  [{}]", r.id.as_str(), render_short(&r.max_residual), r.sample_grid)
                    .unwrap();
                if !r.pass {
                    for d in &r.details {
                        writeln!(out, "        {}: {}", d.label, render_short(&d.value)).unwrap();
                    }
                    for note in &r.notes {
                        writeln!(out, "        note: {note}").unwrap();
                    }
                }
            }
            let failed = reports.iter().filter(|r| !r.pass).count();
            writeln!(out, "{} of {} checks passed", reports.len() - failed, reports.len()).unwrap();
            out
        }
    };
    Ok((text, pass))
}

fn sweep(cfg: &RunConfig, q: &QParam, ctx: &PrecisionContext) -> Result<(String, bool), CliError> {
    let a_from = if cfg.a_from.eq_ignore_ascii_case("q") { q.at(ctx) } else { number("a-from", &cfg.a_from, ctx)? };
    let a_to = number("a-to", &cfg.a_to, ctx)?;
    let grid = a_grid(q, &a_from, &a_to, cfg.steps, ctx)?;
    let rows = sweep_hermite_extremal(q, &grid, cfg.n_max, ctx)?;
    let mut hashes: Vec<&str> = rows.iter().map(|r| r.node_hash.as_str()).collect();
    hashes.sort_unstable();
    hashes.dedup();
    let distinct = hashes.len() == rows.len();
    let pass = distinct && rows.iter().all(|r| r.report.passes(ctx.tol()));
    let digits = digits_for_bits(ctx.bits());
    let text = match cfg.output {
        OutputFormat::Json => {
            let out: Vec<_> = rows
                .iter()
                .map(|r| {
                    json!({
                        "a": decimal(&r.a, digits),
                        "off_diag_max": decimal(&r.report.off_diag_max, 12),
                        "diag_rel_err_max": decimal(&r.report.diag_rel_err_max, 12),
                        "node_hash": r.node_hash,
                        "pass": r.report.passes(ctx.tol()),
                    })
                })
                .collect();
            format!("{}\n", serde_json::to_string_pretty(&out).expect("json"))
        }
        OutputFormat::Csv => {
            let mut out = String::from("a,off_diag_max,diag_rel_err_max,node_hash\n");
            for r in &rows {
                writeln!(
                    out,
                    "{},{},{},{}",
                    decimal(&r.a, digits),
                    decimal(&r.report.off_diag_max, 12),
                    decimal(&r.report.diag_rel_err_max, 12),
                    r.node_hash
                )
                .unwrap();
            }
            out
        }
        OutputFormat::Pretty => {
            let mut out = format!("{:<12} {:<16} {:<16} {}\n", "a", "off_diag_max", "diag_rel_err_max", "node_hash");
            for r in &rows {
                writeln!(
                    out,
                    "{:<12} {:<16} {:<16} {}",
                    render_short(&r.a),
                    render_short(&r.report.off_diag_max),
                    render_short(&r.report.diag_rel_err_max),
                    r.node_hash
                )
                .unwrap();
            }
            writeln!(out, "node sets {}", if distinct { "distinct" } else { "NOT distinct" }).unwrap();
            writeln!(out, "{}", if pass { "PASS" } else { "FAIL" }).unwrap();
            out
        }
    };
    Ok((text, pass))
}
