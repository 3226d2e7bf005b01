use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};
use vaguelie::analysis::{
    check_hypotheses, classify_subjects, ingest_csv_path, label_records, length_cdf, summarize, tabulate_forms,
    validate_records, HypothesisInputs, HypothesisStatus, SolvedProfile, CSV_HEADER,
};
use vaguelie::equilibrium::io::{beliefs_from_json, beliefs_to_json, profile_from_json, profile_to_json, ProfileDoc};
use vaguelie::equilibrium::{
    check_equilibrium, example1_beliefs, expected_earnings, extract_threshold_l, posterior_beliefs,
    seed_profile, solve_anonymous_restricted, solve_anonymous_unrestricted, solve_fixed_point, verify_example2,
    BeliefMap, EquilibriumReport, FixedPoint, Seed, StrategyProfile, TGrid,
};
use vaguelie::simulation::{paired_session, simulate_population, ReportRecord, SimConfig};
use vaguelie::{ovm, Environment, Message, Restriction};

use crate::config::{FileConfig, Format, RunConfig};
use crate::error::CliError;
use crate::Command;

type Res<T = ()> = Result<T, CliError>;

pub fn dispatch(command: Command, run: &RunConfig) -> Res {
    match command {
        Command::Solve => solve(run),
        Command::Simulate => simulate(run),
        Command::Classify => classify(run),
        Command::Verify => verify(run),
        Command::Analyze => analyze(run),
        Command::Hypotheses => hypotheses(run),
    }
}

fn grid(run: &RunConfig) -> Res<TGrid<f64>> {
    Ok(TGrid::midpoint(&run.params.dist, run.t_grid)?)
}

fn payoff(run: &RunConfig, v: f64) -> f64 {
    if run.dollars {
        v / 2.0
    } else {
        v
    }
}

fn unit(run: &RunConfig) -> &'static str {
    if run.dollars {
        "dollars"
    } else {
        "state_units"
    }
}

fn kv_table(pairs: &[(String, String)]) -> String {
    let mut s = String::new();
    for (k, v) in pairs {
        let _ = writeln!(s, "{k}={v}");
    }
    s
}

fn report_pairs(report: &EquilibriumReport) -> Vec<(String, String)> {
    report.key_values().into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Writes to `--output` when given, stdout otherwise. Table output gets a
/// timestamp header unless disabled.
fn emit(run: &RunConfig, format: Format, body: &str, to_file: bool) -> Res {
    let mut text = String::new();
    if format == Format::Table && run.timestamp {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let _ = writeln!(text, "# generated_unix={secs}");
    }
    text.push_str(body);
    match (&run.output, to_file) {
        (Some(path), true) => std::fs::write(path, text)?,
        _ => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn to_json(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn seed_from(run: &RunConfig) -> Res<Seed<f64>> {
    Ok(match &run.seed_profile {
        Some(name) => Seed::from_str(name)?,
        None => Seed::Truthful,
    })
}

/// Closed form for anonymous environments, fixed-point search otherwise.
fn solve_env(run: &RunConfig, env: Environment, seed: Seed<f64>, grid: &TGrid<f64>) -> Res<FixedPoint<f64>> {
    let params = &run.params;
    if env.is_anonymous() {
        let profile = match env.restriction {
            Restriction::Restricted => solve_anonymous_restricted(params, grid)?,
            Restriction::Unrestricted => solve_anonymous_unrestricted(params, grid)?,
        };
        let beliefs = posterior_beliefs(&profile, grid, run.solver.off_path)?;
        let report = check_equilibrium(&profile, &beliefs, params, grid, run.solver.tol)?;
        Ok(FixedPoint { profile, beliefs, report })
    } else {
        Ok(solve_fixed_point(env, params, grid, seed, &run.solver)?)
    }
}

fn read(path: &Path) -> Res<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_profile(path: &Path, grid: &TGrid<f64>) -> Res<StrategyProfile<f64>> {
    Ok(profile_from_json(&read(path)?, grid)?)
}

fn load_records(run: &RunConfig) -> Res<Vec<ReportRecord>> {
    let path = run.input.as_ref().ok_or_else(|| CliError::Usage("--input <records.csv> is required".into()))?;
    let records = ingest_csv_path(path)?;
    validate_records(&records, run.params.states)?;
    Ok(records)
}

fn solve(run: &RunConfig) -> Res {
    let grid = grid(run)?;
    let env = run.env.unwrap_or(Environment::NA_R);
    let seed = seed_from(run)?;
    let seed_name = if env.is_anonymous() { "closed-form" } else { seed.name() };
    let fp = solve_env(run, env, seed, &grid)?;
    let earnings = expected_earnings(&fp.profile, &grid)?;
    let l_star = if env.is_restricted() { extract_threshold_l(&fp.profile)? } else { None };

    if let Some(dir) = &run.output {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("profile.json"), profile_to_json(&fp.profile, &grid))?;
        std::fs::write(dir.join("beliefs.json"), beliefs_to_json(&fp.beliefs))?;
        std::fs::write(dir.join("report.json"), to_json(&fp.report))?;
        std::fs::write(dir.join("config.toml"), FileConfig::from_params(&run.params)?.to_toml())?;
    }

    let format = run.format.unwrap_or(Format::Table);
    let body = match format {
        Format::Table => {
            let mut pairs = vec![
                ("environment".to_string(), env.to_string()),
                ("seed_profile".into(), seed_name.into()),
                ("n".into(), run.params.n().to_string()),
                ("gamma".into(), run.params.gamma.to_string()),
            ];
            pairs.extend(report_pairs(&fp.report));
            pairs.push(("expected_earnings".into(), payoff(run, earnings).to_string()));
            pairs.push(("unit".into(), unit(run).into()));
            if env.is_restricted() {
                pairs.push(("l_star".into(), l_star.map(|l| l.to_string()).unwrap_or_else(|| "none".into())));
            }
            kv_table(&pairs)
        }
        Format::Json => to_json(&json!({
            "environment": env.to_string(),
            "seed_profile": seed_name,
            "report": fp.report,
            "expected_earnings": payoff(run, earnings),
            "unit": unit(run),
            "l_star": l_star,
        })),
        Format::Csv => {
            let doc = ProfileDoc::from_profile(&fp.profile, &grid);
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in doc.sigma {
                w.serialize(row).map_err(|e| CliError::Usage(e.to_string()))?;
            }
            String::from_utf8(w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?).expect("utf8")
        }
    };
    emit(run, format, &body, false)
}

fn simulate(run: &RunConfig) -> Res {
    let grid = grid(run)?;
    let env = run.env.unwrap_or(Environment::A_UR);
    let mut cfg = SimConfig::new(run.agents, run.seed, env)?;
    cfg.stage_order = run.stage_order;
    let output = if run.paired {
        if run.profile.is_some() {
            return Err(CliError::Usage("--paired solves both stages; it cannot take --profile".into()));
        }
        let seed = seed_from(run)?;
        let r = solve_env(run, Environment { restriction: Restriction::Restricted, ..env }, seed.clone(), &grid)?;
        let u = solve_env(run, Environment { restriction: Restriction::Unrestricted, ..env }, seed, &grid)?;
        warn_unconverged(&r.report, "restricted");
        warn_unconverged(&u.report, "unrestricted");
        paired_session(&r.profile, &u.profile, &run.params, &grid, &cfg)?
    } else {
        let profile = match &run.profile {
            Some(path) => load_profile(path, &grid)?,
            None => {
                let fp = solve_env(run, env, seed_from(run)?, &grid)?;
                warn_unconverged(&fp.report, &env.to_string());
                fp.profile
            }
        };
        cfg.environment = profile.environment();
        simulate_population(&profile, &run.params, &grid, &cfg)?
    };
    let format = run.format.unwrap_or(Format::Csv);
    let body = match format {
        Format::Json => to_json(&output.records),
        _ => {
            let mut buf = Vec::new();
            vaguelie::analysis::emit_csv(&output.records, &mut buf)?;
            String::from_utf8(buf).expect("utf8")
        }
    };
    emit(run, format, &body, true)
}

fn warn_unconverged(report: &EquilibriumReport, what: &str) {
    if !report.converged {
        eprintln!(
            "warning: {what} profile did not converge (belief_residual={:e}, incentive_residual={:e})",
            report.belief_residual, report.incentive_residual
        );
    }
}

fn classify(run: &RunConfig) -> Res {
    let records = load_records(run)?;
    let states = run.params.states;
    let labels = label_records(&records, states)?;
    let format = run.format.unwrap_or(Format::Csv);
    let body = match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| CliError::Usage(e.to_string());
            let mut header: Vec<&str> = CSV_HEADER.to_vec();
            header.extend(["kind", "interval"]);
            w.write_record(&header).map_err(io)?;
            for (r, l) in records.iter().zip(&labels) {
                w.write_record([
                    r.subject_id.clone(),
                    r.anonymity.token().to_string(),
                    r.stage.token().to_string(),
                    r.true_state.map(|s| s.to_string()).unwrap_or_default(),
                    r.message.to_string(),
                    r.realized_payoff.map(|s| s.to_string()).unwrap_or_default(),
                    l.kind.as_str().to_string(),
                    l.interval_flag.to_string(),
                ])
                .map_err(io)?;
            }
            String::from_utf8(w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?).expect("utf8")
        }
        Format::Json => {
            let rows: Vec<Value> = records
                .iter()
                .zip(&labels)
                .map(|(r, l)| {
                    let mut v = serde_json::to_value(r).expect("serializable");
                    v["kind"] = json!(l.kind.as_str());
                    v["interval"] = json!(l.interval_flag);
                    v
                })
                .collect();
            to_json(&rows)
        }
        Format::Table => {
            let mut s = String::new();
            for stage in [Restriction::Restricted, Restriction::Unrestricted] {
                let t = tabulate_forms(&records, states, stage)?;
                if t.total == 0 {
                    continue;
                }
                let _ = writeln!(s, "[{}]", stage.token());
                let _ = writeln!(s, "total={}", t.total);
                for (k, c) in &t.kinds {
                    let _ = writeln!(s, "{k}={c}");
                }
                let _ = writeln!(s, "vague={}", t.vague);
                let _ = writeln!(s, "interval={}", t.intervals);
            }
            s
        }
    };
    emit(run, format, &body, true)
}

fn verify(run: &RunConfig) -> Res {
    let grid = grid(run)?;
    let params = &run.params;
    let (name, profile, mut beliefs): (String, StrategyProfile<f64>, Option<BeliefMap<f64>>) = match &run.profile {
        Some(path) => ("profile".into(), load_profile(path, &grid)?, None),
        None => {
            let env = run.env.unwrap_or(Environment::NA_UR);
            let seed = seed_from(run)?;
            let profile = seed_profile(&seed, env, params, &grid, &run.solver)?;
            let beliefs = matches!(seed, Seed::Example1).then(|| example1_beliefs(params));
            (seed.name().to_string(), profile, beliefs)
        }
    };
    if let Some(path) = &run.beliefs {
        beliefs = Some(beliefs_from_json(&read(path)?)?);
    }
    let beliefs = match beliefs {
        Some(b) => b,
        None => posterior_beliefs(&profile, &grid, run.solver.off_path)?,
    };
    let report = check_equilibrium(&profile, &beliefs, params, &grid, run.solver.tol)?;
    let n = params.n();
    let interval_family = !profile.environment().is_restricted()
        && profile.support().iter().all(|m| *m == Message::interval(m.lowest(), n));
    let example2 = if interval_family {
        Some(verify_example2(&profile, &beliefs, params, &grid, run.solver.tol)?)
    } else {
        None
    };

    let format = run.format.unwrap_or(Format::Table);
    let body = match format {
        Format::Json => to_json(&json!({
            "environment": profile.environment().to_string(),
            "seed_profile": name,
            "report": report,
            "example2": example2,
        })),
        _ => {
            let mut pairs = vec![
                ("environment".to_string(), profile.environment().to_string()),
                ("seed_profile".into(), name),
                ("gamma".into(), params.gamma.to_string()),
            ];
            pairs.extend(report_pairs(&report));
            if let Some(e) = &example2 {
                let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "none".into());
                pairs.push(("example2.holds".into(), e.holds.to_string()));
                pairs.push(("example2.truth_teller_margin".into(), opt(e.truth_teller_margin)));
                pairs.push(("example2.liar_margin".into(), opt(e.liar_margin)));
            }
            kv_table(&pairs)
        }
    };
    emit(run, format, &body, true)
}

fn analyze(run: &RunConfig) -> Res {
    let records = load_records(run)?;
    let states = run.params.states;
    let mut summary = summarize(&records)?;
    if run.dollars {
        summary = summary.in_dollars();
    }
    let typology = classify_subjects(&records);
    let cdf = length_cdf(&records);
    let truthful_ur: Vec<&ReportRecord> = records
        .iter()
        .filter(|r| r.stage == Restriction::Unrestricted && r.is_truthful() == Some(true))
        .collect();
    let off_ovm = truthful_ur.iter().filter(|r| r.message != ovm(r.true_state.expect("truthful"), states)).count();

    let format = run.format.unwrap_or(Format::Table);
    let body = match format {
        Format::Csv => {
            let cdf = cdf?;
            let mut s = String::from("length,cumulative_fraction\n");
            for (l, f) in cdf {
                let _ = writeln!(s, "{l},{f}");
            }
            s
        }
        Format::Json => to_json(&json!({
            "summary": summary,
            "unit": unit(run),
            "typology": typology.as_ref().map(|t| t.counts().into_iter().map(|(l, c)| (l.as_str(), c)).collect::<std::collections::BTreeMap<_, _>>()).map_err(|e| e.to_string()),
            "length_cdf": cdf.as_ref().map_err(|e| e.to_string()),
            "truthful_unrestricted": truthful_ur.len(),
            "truthful_off_ovm": off_ovm,
        })),
        Format::Table => {
            let mut s = String::from("[summary]\n");
            for (k, v) in summary.key_values() {
                let _ = writeln!(s, "{k}={v}");
            }
            let _ = writeln!(s, "unit={}", unit(run));
            let _ = writeln!(s, "truthful_unrestricted={}", truthful_ur.len());
            let _ = writeln!(s, "truthful_off_ovm={off_ovm}");
            s.push_str("[typology]\n");
            match &typology {
                Ok(t) => {
                    for (l, c) in t.counts() {
                        let _ = writeln!(s, "{l}={c}");
                    }
                }
                Err(e) => {
                    let _ = writeln!(s, "unavailable={e}");
                }
            }
            s.push_str("[length_cdf]\n");
            match &cdf {
                Ok(cdf) => {
                    for (l, f) in cdf {
                        let _ = writeln!(s, "{l}={f}");
                    }
                }
                Err(e) => {
                    let _ = writeln!(s, "unavailable={e}");
                }
            }
            s
        }
    };
    emit(run, format, &body, true)
}

fn hypotheses(run: &RunConfig) -> Res {
    let grid = grid(run)?;
    let a_r = solve_env(run, Environment::A_R, Seed::Truthful, &grid)?;
    let a_ur = solve_env(run, Environment::A_UR, Seed::Truthful, &grid)?;
    let na_r = solve_env(run, Environment::NA_R, Seed::Truthful, &grid)?;
    let na_ur = solve_env(run, Environment::NA_UR, seed_from(run)?, &grid)?;
    let inputs = HypothesisInputs {
        a_r: &a_r.profile,
        a_ur: &a_ur.profile,
        na_r: SolvedProfile { profile: &na_r.profile, report: &na_r.report },
        na_ur: Some(SolvedProfile { profile: &na_ur.profile, report: &na_ur.report }),
    };
    let report = check_hypotheses(&inputs, &run.params, &grid)?;
    let format = run.format.unwrap_or(Format::Table);
    let body = match format {
        Format::Json => to_json(&report),
        _ => {
            let mut s = String::new();
            for c in &report.checks {
                let status = match &c.status {
                    HypothesisStatus::Checked { satisfied } => format!("satisfied={satisfied}"),
                    HypothesisStatus::NotApplicable { reason } => format!("not_applicable=\"{reason}\""),
                };
                let stats: Vec<String> = c
                    .statistics
                    .iter()
                    .map(|(k, v)| if k.starts_with("earnings") { format!("{k}={}", payoff(run, *v)) } else { format!("{k}={v}") })
                    .collect();
                let _ = writeln!(s, "{} {status} {}", c.id, stats.join(" "));
            }
            s
        }
    };
    emit(run, format, &body, true)
}
