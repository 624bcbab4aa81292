use std::fs;

use pate_bounds::analysis::{analyze_population, compute_bound, Redefinition, StratificationSpec};
use pate_bounds::bounds::StratumRangePolicy;
use pate_bounds::simulation::{run_cell, GridConfig, METRICS};
use pate_bounds::{bootstrap_bounds, precision_gain, BoundSpec, CovariateSpec, Framework, OutcomeRange, StudyData};
use serde_json::json;

use crate::io::{fmt_f64, read_study, sha256_hex, Table};
use crate::{AnalysisArgs, BootstrapArgs, CliError, RangePolicyArg, SimulateArgs};

const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn parse_range(text: &str) -> Result<OutcomeRange, CliError> {
    let bad = || CliError::Usage(format!("--y-range expects LO,HI, got `{text}`"));
    let (lo, hi) = text.split_once(',').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    Ok(OutcomeRange::new(lo, hi)?)
}

fn covariate_spec(args: &AnalysisArgs, p: usize) -> Result<CovariateSpec, CliError> {
    let spec = match &args.covariates {
        None => CovariateSpec::all(p),
        Some(cols) => {
            if let Some(bad) = cols.iter().find(|&&c| c == 0 || c > p) {
                return Err(CliError::Usage(format!(
                    "--covariates: column {bad} is outside 1..={p}"
                )));
            }
            CovariateSpec::linear(cols.iter().map(|c| c - 1).collect())
        }
    };
    Ok(spec.with_squares(args.squares))
}

pub fn parse_redefinition(text: &str, covariates: &CovariateSpec) -> Result<Redefinition, CliError> {
    if text == "pscore-range" {
        return Ok(Redefinition::PscoreRange(covariates.clone()));
    }
    text.strip_prefix("sd:")
        .and_then(|s| s.parse::<f64>().ok())
        .filter(|s| *s > 0.0)
        .map(Redefinition::Sd)
        .ok_or_else(|| CliError::Usage(format!("--redefine expects sd:S (S > 0) or pscore-range, got `{text}`")))
}

struct Prepared {
    data: StudyData,
    input_hash: String,
    stratification: Option<StratificationSpec>,
    redefinitions: Vec<Redefinition>,
}

fn prepare(args: &AnalysisArgs) -> Result<Prepared, CliError> {
    let range = parse_range(&args.y_range)?;
    let bytes = fs::read(&args.input).map_err(|e| CliError::io(args.input.clone(), e))?;
    let data = read_study(&args.input, range)?;
    let covariates = covariate_spec(args, data.covariate_dim())?;
    let stratification = match args.strata {
        Some(0) => return Err(CliError::Usage("--strata must be at least 1".into())),
        Some(k) => Some(StratificationSpec {
            ranges: match args.stratum_ranges {
                RangePolicyArg::Observed => StratumRangePolicy::Observed,
                RangePolicyArg::Declared => StratumRangePolicy::Declared,
            },
            ..StratificationSpec::new(k, covariates.clone())
        }),
        None => None,
    };
    let redefinitions = args
        .redefine
        .iter()
        .map(|r| parse_redefinition(r, &covariates))
        .collect::<Result<_, _>>()?;
    Ok(Prepared {
        data,
        input_hash: sha256_hex(&bytes),
        stratification,
        redefinitions,
    })
}

fn options_json(args: &AnalysisArgs, prepared: &Prepared) -> serde_json::Value {
    json!({
        "y_range": [prepared.data.range().lo(), prepared.data.range().hi()],
        "stratification": prepared.stratification,
        "redefinitions": prepared.redefinitions,
        "input_sha256": prepared.input_hash,
        "covariates": args.covariates,
        "squares": args.squares,
    })
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn base_metadata(table: &mut Table, command: &str, seed: Option<u64>, config: &serde_json::Value) {
    table.meta("pate-bounds", VERSION);
    table.meta("command", command);
    table.meta("seed", seed.map_or("none".to_string(), |s| s.to_string()));
    table.meta("config-sha256", sha256_hex(config.to_string().as_bytes()));
}

/// Population label and its data, starting with the full population.
fn populations(p: &Prepared) -> Result<Vec<(String, StudyData)>, CliError> {
    let mut out = vec![("P".to_string(), p.data.clone())];
    for r in &p.redefinitions {
        out.push((r.label(), r.apply(&p.data)?));
    }
    Ok(out)
}

pub fn bounds(args: &AnalysisArgs) -> Result<Table, CliError> {
    let prepared = prepare(args)?;
    let mut table = Table::new(header(&[
        "population",
        "N",
        "n",
        "p_sel",
        "sate",
        "sate_se",
        "ci_lo",
        "ci_hi",
        "framework",
        "strata",
        "lo",
        "hi",
        "width",
        "gain_vs_worst_case",
    ]));
    base_metadata(&mut table, "bounds", None, &options_json(args, &prepared));
    table.meta("input-sha256", &prepared.input_hash);
    table.meta("sate-se", "unpooled");

    for (label, data) in populations(&prepared)? {
        let a = analyze_population(&data, prepared.stratification.as_ref())?;
        let (se, ci_lo, ci_hi) = a
            .inference
            .map_or((f64::NAN, f64::NAN, f64::NAN), |i| (i.se, i.ci_lo, i.ci_hi));
        for fw in Framework::ALL {
            let Some(b) = a.bound(fw) else { continue };
            let strata = match (&a.stratified, fw.is_stratified()) {
                (Some(s), true) => s.k.to_string(),
                _ => String::new(),
            };
            let gain = precision_gain(&a.worst_case, &b).unwrap_or(f64::NAN);
            table.push(vec![
                label.clone(),
                a.population_size.to_string(),
                a.sample_size.to_string(),
                fmt_f64(a.p_sel),
                fmt_f64(a.sate),
                fmt_f64(se),
                fmt_f64(ci_lo),
                fmt_f64(ci_hi),
                fw.as_str().to_string(),
                strata,
                fmt_f64(b.lo),
                fmt_f64(b.hi),
                fmt_f64(b.width()),
                fmt_f64(gain),
            ]);
        }
    }
    Ok(table)
}

pub fn bootstrap(args: &BootstrapArgs) -> Result<Table, CliError> {
    let prepared = prepare(&args.analysis)?;
    let frameworks: Vec<Framework> = if args.framework.is_empty() {
        Framework::ALL
            .into_iter()
            .filter(|f| !f.is_stratified() || prepared.stratification.is_some())
            .collect()
    } else {
        args.framework
            .iter()
            .map(|f| f.parse::<Framework>().map_err(CliError::from))
            .collect::<Result<_, _>>()?
    };
    if frameworks.iter().any(|f| f.is_stratified()) && prepared.stratification.is_none() {
        return Err(CliError::Usage("stratified frameworks need --strata".into()));
    }
    if args.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }

    let mut table = Table::new(header(&[
        "population", "framework", "lo", "hi", "lb_q05", "ub_q95", "reps", "redraws",
    ]));
    let mut config = options_json(&args.analysis, &prepared);
    config["reps"] = json!(args.reps);
    config["frameworks"] = json!(frameworks);
    base_metadata(&mut table, "bootstrap", Some(args.seed), &config);
    table.meta("input-sha256", &prepared.input_hash);
    table.meta("reps", args.reps);

    let mut redefinitions: Vec<Option<Redefinition>> = vec![None];
    redefinitions.extend(prepared.redefinitions.iter().cloned().map(Some));
    for redefinition in redefinitions {
        let label = redefinition.as_ref().map_or("P".to_string(), |r| r.label());
        for &fw in &frameworks {
            let spec = BoundSpec {
                framework: fw,
                stratification: prepared.stratification.clone(),
                redefinition: redefinition.clone(),
            };
            let point = compute_bound(&prepared.data, &spec)?;
            let boot = bootstrap_bounds(&prepared.data, &spec, args.reps, args.seed)?;
            table.push(vec![
                label.clone(),
                fw.as_str().to_string(),
                fmt_f64(point.lo),
                fmt_f64(point.hi),
                fmt_f64(boot.lb_q05),
                fmt_f64(boot.ub_q95),
                boot.replicates.to_string(),
                boot.redraws.to_string(),
            ]);
        }
    }
    Ok(table)
}

pub fn simulate(args: &SimulateArgs) -> Result<Table, CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| CliError::io(args.config.clone(), e))?;
    let mut grid: GridConfig = serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(seed) = args.seed {
        grid.seed = seed;
    }
    if let Some(reps) = args.reps {
        grid.reps = reps;
    }
    let cells = grid.expand()?;

    let mut names = header(&[
        "study",
        "alignment",
        "delta",
        "rho",
        "covariate_combo",
        "k",
        "N",
        "n",
        "reps",
        "seed",
        "population",
        "status",
        "failed_reps",
        "strat_failed_reps",
        "first_error",
    ]);
    for m in METRICS {
        names.push(m.to_string());
        names.push(format!("{m}_mcse"));
    }
    let mut table = Table::new(names);
    let config = serde_json::to_value(&grid).map_err(|e| CliError::Config(e.to_string()))?;
    base_metadata(&mut table, "simulate", Some(grid.seed), &config);
    table.meta("declared-range", serde_json::to_string(&grid.declared_range).unwrap_or_default());
    table.meta("sate-se", "unpooled");
    table.meta("cells", cells.len());

    for cell in &cells {
        let result = run_cell(cell)?;
        for row in &result.rows {
            let mut out = vec![
                cell.study.number().to_string(),
                cell.alignment.as_str().to_string(),
                fmt_f64(cell.delta),
                fmt_f64(cell.rho),
                cell.covariate_combo.as_str().to_string(),
                cell.k.to_string(),
                cell.population_size.to_string(),
                cell.sample_size.to_string(),
                cell.reps.to_string(),
                cell.seed.to_string(),
                row.population.to_string(),
                row.status.as_str().to_string(),
                row.failed_reps.to_string(),
                row.strat_failed_reps.to_string(),
                row.first_error.clone().unwrap_or_default(),
            ];
            for m in &row.metrics {
                out.push(fmt_f64(m.mean));
                out.push(fmt_f64(m.mcse));
            }
            table.push(out);
        }
    }
    Ok(table)
}
