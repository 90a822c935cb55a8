//! One function per subcommand.

use std::collections::BTreeSet;
use std::fs::File;
use std::path::{Path, PathBuf};

use benchtrend::analysis::{emit_sensitivity_table, fit_factor_regression, influence_stats, verify_composition, SensitivityField};
use benchtrend::gp::{build_residuals, fit_gp, holdout_validate, GpModel};
use benchtrend::hwforecast::{
    default_eras, default_window_start, fit_factor_lines, lines_cross, FeasibleRegion, HwFactor, MachineConfig, QuantileLine,
    DEFAULT_MIN_CACHE_PER_CORE_MB,
};
use benchtrend::ingest::{attach_micros, lineage_series, parse_lineage, parse_records, parse_systems, summarize};
use benchtrend::normalize::{build_chain, chain_normalize, ChainOptions};
use benchtrend::scenario::{predict_individual, scenario_sweep, sweep_to_csv};
use benchtrend::trend::{fit_trend_records, TrendModel};
use benchtrend::{BenchmarkRecord, ConversionChain, MonthIndex, NormalizedRecord, ScoreKind, Suite, DEFAULT_SEED};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{self, pretty, with_seed, Format, Output, Table};
use crate::{Cli, Command, Machine, Window};

const DEFAULT_QUANTILES: [f64; 4] = [0.25, 0.5, 0.75, 0.95];
const Z_975: f64 = 1.959963984540054;

struct Ctx {
    cfg: RunConfig,
    format: Option<Format>,
    out: Output,
}

fn num(x: f64) -> Value {
    Value::from(x)
}

fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, Value::from)
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn require<T: Clone>(v: &Option<T>, flag: &str) -> Result<T, CliError> {
    v.clone().ok_or_else(|| CliError::Usage(format!("{flag} is required")))
}

impl Ctx {
    /// `allowed[0]` is the default.
    fn format(&self, allowed: &[Format]) -> Result<Format, CliError> {
        match self.format {
            None => Ok(allowed[0]),
            Some(f) if allowed.contains(&f) => Ok(f),
            Some(f) => Err(CliError::Usage(format!(
                "--format {} is not supported by this command",
                format!("{f:?}").to_lowercase()
            ))),
        }
    }

    fn seed(&self) -> u64 {
        self.out.seed
    }

    fn systems(&self) -> Result<PathBuf, CliError> {
        require(&self.cfg.systems, "--systems")
    }

    fn records(&self) -> Result<Vec<BenchmarkRecord>, CliError> {
        let micros = self.cfg.micros.as_deref().map(open).transpose()?;
        Ok(parse_records(open(&self.systems()?)?, micros)?)
    }

    fn chain_options(&self, folds: Option<usize>) -> ChainOptions {
        ChainOptions {
            method: self.cfg.method.unwrap_or_default(),
            factors: None,
            folds,
            seed: self.seed(),
        }
    }

    fn target(&self) -> Suite {
        self.cfg.target_suite.unwrap_or(Suite::Spec2017)
    }

    fn normalized(&self) -> Result<(ConversionChain, Vec<NormalizedRecord>), CliError> {
        let records = self.records()?;
        let chain = build_chain(&records, self.target(), &self.chain_options(None))?;
        let norm = chain_normalize(&records, &chain)?;
        Ok((chain, norm))
    }

    fn window(&self, w: &Window) -> Option<(MonthIndex, MonthIndex)> {
        match (w.from, w.to, self.cfg.trend_window) {
            (None, None, cfg) => cfg,
            (from, to, cfg) => Some((
                from.or(cfg.map(|c| c.0)).unwrap_or(MonthIndex::ORIGIN),
                to.or(cfg.map(|c| c.1)).unwrap_or(MonthIndex(u32::MAX)),
            )),
        }
    }

    /// Trend from a file, else fitted on the normalized records.
    fn trend(&self, path: Option<&Path>, norm: &[NormalizedRecord]) -> Result<TrendModel, CliError> {
        match path {
            Some(p) => load_json(p),
            None => Ok(fit_trend_records(norm, self.cfg.trend_window)?),
        }
    }

    fn region(&self, path: Option<&Path>) -> Result<FeasibleRegion, CliError> {
        match path.or(self.cfg.region.as_deref()) {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
                Ok(FeasibleRegion::from_json(&text)?)
            }
            None => Ok(FeasibleRegion::default()),
        }
    }

    /// Render a table in the chosen format and send it to the primary output.
    fn emit_table(&mut self, stem: &str, format: Format, table: &Table, json_value: Option<Value>) -> Result<(), CliError> {
        let body = match format {
            Format::Json => pretty(&with_seed(json_value.unwrap_or_else(|| table.to_json_rows()), "rows", self.seed()))?,
            _ => table.to_csv(self.seed())?,
        };
        self.out.primary(stem, format, &body)
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let c = cli.common;
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.systems = c.systems.or(cfg.systems);
    cfg.micros = c.micros.or(cfg.micros);
    cfg.out = c.out.or(cfg.out);
    cfg.seed = c.seed.or(cfg.seed);
    if let Command::Lineage { lineage: Some(p) } = &cli.command {
        cfg.lineage = Some(p.clone());
    }
    if let Command::Normalize { method, target, .. } = &cli.command {
        cfg.method = method.or(cfg.method);
        cfg.target_suite = target.or(cfg.target_suite);
    }
    cfg.validate()?;
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let out = Output::new(cfg.out.clone(), seed)?;
    let mut ctx = Ctx {
        cfg,
        format: c.format,
        out,
    };
    match cli.command {
        Command::IngestCheck => ingest_check(&mut ctx),
        Command::Summarize { suite, score } => summarize_cmd(&mut ctx, suite, score),
        Command::Normalize { folds, .. } => normalize_cmd(&mut ctx, folds),
        Command::ComposeCheck { tol } => compose_check(&mut ctx, tol),
        Command::Influence { suite } => influence(&mut ctx, suite),
        Command::FactorReg => factor_reg(&mut ctx),
        Command::Lineage { .. } => lineage(&mut ctx),
        Command::FitTrend { window } => fit_trend_cmd(&mut ctx, &window),
        Command::Doubling {
            trend,
            theta,
            start,
            horizon,
        } => doubling(&mut ctx, trend.as_deref(), theta, start, horizon),
        Command::FitQuantiles { taus, window } => fit_quantiles(&mut ctx, taus, &window),
        Command::FeasibleCheck {
            region,
            derive,
            date,
            machine,
        } => feasible_check(&mut ctx, region.as_deref(), derive, date, &machine),
        Command::FitGp { trend } => fit_gp_cmd(&mut ctx, trend.as_deref()),
        Command::GpValidate { trend, split } => gp_validate(&mut ctx, trend.as_deref(), split),
        Command::Predict {
            trend,
            gp,
            date,
            machine,
        } => predict(&mut ctx, &trend, &gp, date, &machine),
        Command::Scenario {
            trend,
            gp,
            lines,
            region,
            from,
            to,
            step,
            qs,
        } => scenario(&mut ctx, &trend, &gp, &lines, region.as_deref(), (from, to, step), qs),
        Command::SensitivityExport { fields } => sensitivity_export(&mut ctx, &fields),
    }
}

fn ingest_check(ctx: &mut Ctx) -> Result<(), CliError> {
    let format = ctx.format(&[Format::Csv, Format::Json])?;
    let mut report = parse_systems(open(&ctx.systems()?)?)?;
    if let Some(m) = &ctx.cfg.micros {
        attach_micros(&mut report.records, open(m)?)?;
    }
    let mut table = Table::new(&["line", "column", "message"]);
    for r in &report.rejected {
        table.push(vec![Value::from(r.line), Value::from(r.column.clone()), Value::from(r.message.clone())]);
    }
    let value = json!({
        "input_rows": report.input_rows,
        "accepted": report.records.len(),
        "rejected": table.to_json_rows(),
    });
    ctx.emit_table("ingest", format, &table, Some(value))?;
    let line = format!(
        "ingest-check: {} rows, {} accepted, {} rejected",
        report.input_rows,
        report.records.len(),
        report.rejected.len()
    );
    ctx.out.summary(&line)?;
    if report.rejected.is_empty() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{} rows rejected", report.rejected.len())))
    }
}

fn summarize_cmd(ctx: &mut Ctx, suite: Option<Suite>, score: ScoreKind) -> Result<(), CliError> {
    let format = ctx.format(&[Format::Csv, Format::Json])?;
    let records = ctx.records()?;
    let suites: Vec<Suite> = match suite {
        Some(s) => vec![s],
        None => Suite::ALL.into_iter().filter(|s| records.iter().any(|r| r.suite == *s)).collect(),
    };
    let mut table = Table::new(&[
        "suite",
        "score",
        "count",
        "max",
        "mean",
        "min",
        "mean_cores",
        "mean_freq_mhz",
        "mean_l3_kb",
        "mean_threads_per_core",
    ]);
    for s in &suites {
        let r = summarize(&records, *s, score)?;
        table.push(vec![
            Value::from(r.suite.year()),
            output::json(r.score),
            Value::from(r.count),
            num(r.max),
            num(r.mean),
            num(r.min),
            opt(r.mean_cores),
            opt(r.mean_freq_mhz),
            opt(r.mean_l3_kb),
            opt(r.mean_threads_per_core),
        ]);
    }
    ctx.emit_table("summary", format, &table, None)?;
    ctx.out.summary(&format!("summarize: {} suites, {} records", suites.len(), records.len()))
}

fn normalize_cmd(ctx: &mut Ctx, folds: usize) -> Result<(), CliError> {
    let format = ctx.format(&[Format::Csv, Format::Json])?;
    let records = ctx.records()?;
    let chain = build_chain(&records, ctx.target(), &ctx.chain_options(Some(folds)))?;
    let norm = chain_normalize(&records, &chain)?;
    let mut table = Table::new(&["record_id", "suite", "date", "score_raw", "score_normalized"]);
    for n in &norm {
        table.push(vec![
            Value::from(n.record.record_id.clone()),
            Value::from(n.record.suite.year()),
            Value::from(n.record.date.to_string()),
            opt(n.record.score_speed),
            num(n.score),
        ]);
    }
    ctx.emit_table("normalized", format, &table, None)?;
    ctx.out.artifact("chain.json", &with_seed(output::json(&chain), "chain", ctx.seed()))?;
    let r2: Vec<String> = chain
        .steps
        .iter()
        .map(|s| {
            let (a, b) = s.conversion.suites();
            match s.r2_cv {
                Some(r) => format!("{a}->{b} r2_cv {r:.3}"),
                None => format!("{a}->{b}"),
            }
        })
        .collect();
    ctx.out.summary(&format!(
        "normalize: {} records onto {} ({:?}; {})",
        norm.len(),
        chain.target,
        ctx.cfg.method.unwrap_or_default(),
        r2.join(", ")
    ))
}

fn compose_check(ctx: &mut Ctx, tol: f64) -> Result<(), CliError> {
    let format = ctx.format(&[Format::Csv, Format::Json])?;
    let records = ctx.records()?;
    let mut table = Table::new(&["record_id", "suite", "residual", "flagged", "note"]);
    let mut flagged = 0;
    for r in records.iter().filter(|r| !r.micros.is_empty()) {
        match verify_composition(r, &r.suite.definition(), tol) {
            Ok(c) => {
                flagged += usize::from(c.flagged);
                table.push(vec![
                    Value::from(c.record_id),
                    Value::from(r.suite.year()),
                    num(c.residual),
                    Value::from(c.flagged),
                    Value::Null,
                ]);
            }
            Err(e) => table.push(vec![
                Value::from(r.record_id.clone()),
                Value::from(r.suite.year()),
                Value::Null,
                Value::Null,
                Value::from(e.to_string()),
            ]),
        }
    }
    let checked = table.rows.len();
    ctx.emit_table("composition", format, &table, None)?;
    ctx.out.summary(&format!("compose-check: {checked} records checked, {flagged} flagged at tol {tol}"))
}

fn influence(ctx: &mut Ctx, suite: Suite) -> Result<(), CliError> {
    let format = ctx.format(&[Format::Csv, Format::Json, Format::Text])?;
    let report = influence_stats(&ctx.records()?, suite)?;
    let mut table = Table::new(&[
        "name",
        "log_variance",
        "log_range",
        "slope",
        "correlation",
        "leverage",
        "overall_to_micro_mean",
        "overall_to_micro_sd",
    ]);
    for m in &report.micros {
        table.push(vec![
            Value::from(m.name.clone()),
            num(m.log_variance),
            num(m.log_range),
            opt(m.slope),
            opt(m.correlation),
            num(m.leverage),
            num(m.overall_to_micro_mean),
            num(m.overall_to_micro_sd),
        ]);
    }
    match format {
        Format::Text => {
            let mut s = format!(
                "{:<14} {:>12} {:>10} {:>8} {:>8} {:>9}\n",
                "Micro", "Log var", "Log range", "Slope", "Corr", "Leverage"
            );
            for m in &report.micros {
                let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
                s.push_str(&format!(
                    "{:<14} {:>12.5} {:>10.4} {:>8} {:>8} {:>9.4}\n",
                    m.name,
                    m.log_variance,
                    m.log_range,
                    f(m.slope),
                    f(m.correlation),
                    m.leverage
                ));
            }
            ctx.out.primary("influence", format, &s)?;
        }
        _ => ctx.emit_table("influence", format, &table, Some(output::json(&report)))?,
    }
    let top = report.micros.first().map_or("-", |m| m.name.as_str());
    let tie = if report.tied { " (tied)" } else { "" };
    ctx.out.summary(&format!(
        "influence: suite {suite}, {} records, most variable {top}{tie}",
        report.n_records
    ))
}

fn factor_reg(ctx: &mut Ctx) -> Result<(), CliError> {
    let format = ctx.format(&[Format::Csv, Format::Json, Format::Text])?;
    let (_, norm) = ctx.normalized()?;
    let fit = fit_factor_regression(&norm)?;
    let mut table = Table::new(&["parameter", "coef", "se", "t", "p", "ci_low", "ci_high"]);
    for r in &fit.rows {
        table.push(vec![
            Value::from(r.parameter.clone()),
            num(r.coef),
            num(r.se),
            num(r.t),
            num(r.p),
            num(r.ci_low),
            num(r.ci_high),
        ]);
    }
    match format {
        Format::Text => ctx.out.primary("factor_regression", format, &fit.to_text())?,
        _ => ctx.emit_table("factor_regression", format, &table, Some(output::json(&fit)))?,
    }
    ctx.out.summary(&format!(
        "factor-reg: n {}, residual variance {:.4}",
        fit.n, fit.residual_variance
    ))
}

fn lineage(ctx: &mut Ctx) -> Result<(), CliError> {
    let format = ctx.format(&[Format::Csv, Format::Json])?;
    let path = require(&ctx.cfg.lineage, "--lineage")?;
    let entries = parse_lineage(open(&path)?)?;
    let (_, norm) = ctx.normalized()?;
    let analysis = lineage_series(
        &entries,
        norm.iter().map(|n| (n.record.processor.as_str(), n.record.date, n.score)),
    )?;
    let mut table = Table::new(&["branch", "genus", "date", "mean_log_score", "n"]);
    for s in &analysis.series {
        for g in &s.generations {
            table.push(vec![
                Value::from(s.genus.clone()),
                Value::from(g.genus.clone()),
                Value::from(g.date.to_string()),
                num(g.mean_log_score),
                Value::from(g.n),
            ]);
        }
    }
    ctx.emit_table("lineage", format, &table, Some(output::json(&analysis)))?;
    let r = analysis.lag1_correlation.map_or("undefined".to_string(), |r| format!("{r:.3}"));
    ctx.out.summary(&format!(
        "lineage: {} branches, {} parent-child pairs, lag-1 correlation {r}",
        analysis.series.len(),
        analysis.pairs.len()
    ))
}

fn fit_trend_cmd(ctx: &mut Ctx, window: &Window) -> Result<(), CliError> {
    let format = ctx.format(&[Format::Json, Format::Csv])?;
    let (_, norm) = ctx.normalized()?;
    let window = ctx.window(window);
    let trend = fit_trend_records(&norm, window)?;
    let artifact = with_seed(output::json(&trend), "trend", ctx.seed());
    if format == Format::Json {
        ctx.out.primary("trend", format, &pretty(&artifact)?)?;
    } else {
        let se = trend.std_errors();
        let mut table = Table::new(&["parameter", "estimate", "se", "ci_low", "ci_high"]);
        for (name, (v, s)) in ["alpha", "beta", "gamma"].iter().zip(trend.theta().iter().zip(se)) {
            table.push(vec![
                Value::from(*name),
                num(*v),
                num(s),
                num(v - Z_975 * s),
                num(v + Z_975 * s),
            ]);
        }
        table.push(vec![Value::from("sigma2"), num(trend.sigma2), Value::Null, Value::Null, Value::Null]);
        ctx.emit_table("trend", format, &table, None)?;
    }
    ctx.out.artifact("trend.json", &artifact)?;
    ctx.out.summary(&format!(
        "fit-trend: alpha {:.4}, beta {:.4}, gamma {:.4}, sigma2 {:.4}",
        trend.alpha, trend.beta, trend.gamma, trend.sigma2
    ))
}

fn doubling(ctx: &mut Ctx, trend: Option<&Path>, theta: Option<Vec<f64>>, start: MonthIndex, horizon: u32) -> Result<(), CliError> {
    let format = ctx.format(&[Format::Csv, Format::Json])?;
    let model: TrendModel = match (trend, theta) {
        (Some(p), _) => load_json(p)?,
        (None, Some(t)) if t.len() == 3 => TrendModel::from_params(t[0], t[1], t[2]),
        (None, Some(_)) => return Err(CliError::Usage("--theta takes alpha,beta,gamma".into())),
        (None, None) => return Err(CliError::Usage("one of --trend or --theta is required".into())),
    };
    let ds = model.doubling_times(start, horizon)?;
    let mut table = Table::new(&["k", "t", "date", "exact_month", "gap"]);
    for d in &ds {
        table.push(vec![
            Value::from(d.k),
            Value::from(d.month.value()),
            Value::from(d.month.to_string()),
            num(d.exact_month),
            Value::from(d.gap),
        ]);
    }
    ctx.emit_table("doubling", format, &table, None)?;
    let gaps: Vec<String> = ds.iter().map(|d| d.gap.to_string()).collect();
    ctx.out.summary(&format!("doubling: from {start}, gaps {}", gaps.join(" ")))
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum LinesFile {
    Wrapped { lines: Vec<QuantileLine> },
    Bare(Vec<QuantileLine>),
}

fn fit_quantiles(ctx: &mut Ctx, taus: Option<Vec<f64>>, window: &Window) -> Result<(), CliError> {
    let format = ctx.format(&[Format::Json, Format::Csv])?;
    let records = ctx.records()?;
    let taus = taus.or(ctx.cfg.quantiles.clone()).unwrap_or(DEFAULT_QUANTILES.to_vec());
    if taus.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(CliError::Usage("--taus must lie in (0, 1)".into()));
    }
    let last = records.iter().map(|r| r.date).max().unwrap_or_default();
    let window = (window.from.unwrap_or_else(default_window_start), window.to.unwrap_or(last));
    let lines = fit_factor_lines(&records, &HwFactor::ALL, &taus, window)?;
    let crossing = lines_cross(&lines);
    if crossing {
        log::warn!("quantile lines cross inside the fit window");
    }
    let artifact = with_seed(json!({ "lines": output::json(&lines) }), "lines", ctx.seed());
    if format == Format::Json {
        ctx.out.primary("lines", format, &pretty(&artifact)?)?;
    } else {
        let mut table = Table::new(&["factor", "tau", "intercept", "slope", "from", "to"]);
        for l in &lines {
            table.push(vec![
                Value::from(l.factor.name()),
                num(l.tau),
                num(l.intercept),
                num(l.slope),
                Value::from(l.window.0.to_string()),
                Value::from(l.window.1.to_string()),
            ]);
        }
        ctx.emit_table("lines", format, &table, None)?;
    }
    ctx.out.artifact("lines.json", &artifact)?;
    let warn = if crossing { ", lines cross" } else { "" };
    ctx.out.summary(&format!(
        "fit-quantiles: {} lines over {}..{}{warn}",
        lines.len(),
        window.0,
        window.1
    ))
}

fn machine_config(m: &Machine) -> Result<MachineConfig, CliError> {
    Ok(MachineConfig {
        cores: require(&m.cores, "--cores")?,
        freq_mhz: require(&m.freq_mhz, "--freq-mhz")?,
        l3_kb: require(&m.l3_kb, "--l3-kb")?,
        threads_per_core: m.threads,
    })
}

fn feasible_check(
    ctx: &mut Ctx,
    region_path: Option<&Path>,
    derive: bool,
    date: Option<MonthIndex>,
    machine: &Machine,
) -> Result<(), CliError> {
    let format = ctx.format(&[Format::Csv, Format::Json])?;
    let region = if derive {
        let region = FeasibleRegion::from_records(&ctx.records()?, &default_eras(), DEFAULT_MIN_CACHE_PER_CORE_MB)?;
        ctx.out.artifact("region.json", &with_seed(output::json(&region), "region", ctx.seed()))?;
        region
    } else {
        ctx.region(region_path)?
    };
    let Some(date) = date else {
        if !derive {
            return Err(CliError::Usage("--date and a configuration are required unless --derive is given".into()));
        }
        if ctx.out.dir.is_none() {
            let body = pretty(&with_seed(output::json(&region), "region", ctx.seed()))?;
            ctx.out.primary("region", Format::Json, &body)?;
        }
        return ctx.out.summary(&format!("feasible-check: derived {} eras", region.eras.len()));
    };
    let config = machine_config(machine)?;
    let feasible = region.is_feasible(&config, date)?;
    let mut table = Table::new(&["date", "cores", "freq_mhz", "l3_kb", "threads", "cache_per_core_mb", "feasible"]);
    table.push(vec![
        Value::from(date.to_string()),
        Value::from(config.cores),
        num(config.freq_mhz),
        num(config.l3_kb),
        num(config.threads_per_core),
        num(config.l3_mb() / f64::from(config.cores)),
        Value::from(feasible),
    ]);
    ctx.emit_table("feasibility", format, &table, None)?;
    let verdict = if feasible { "feasible" } else { "infeasible" };
    ctx.out.summary(&format!(
        "feasible-check: {} cores, {} MHz, {} KB L3 at {date}: {verdict}",
        config.cores, config.freq_mhz, config.l3_kb
    ))
}

fn fit_gp_cmd(ctx: &mut Ctx, trend_path: Option<&Path>) -> Result<(), CliError> {
    let format = ctx.format(&[Format::Json, Format::Csv])?;
    let (_, norm) = ctx.normalized()?;
    let trend = ctx.trend(trend_path, &norm)?;
    let data = build_residuals(&norm, &trend, Suite::Spec2017)?;
    let gp = fit_gp(&data)?;
    let artifact = with_seed(output::json(&gp), "gp", ctx.seed());
    if format == Format::Json {
        ctx.out.primary("gp", format, &pretty(&artifact)?)?;
    } else {
        let mut table = Table::new(&["parameter", "value"]);
        table.push(vec![Value::from("theta"), num(gp.theta)]);
        table.push(vec![Value::from("g"), num(gp.g)]);
        table.push(vec![Value::from("tau2"), num(gp.tau2)]);
        table.push(vec![Value::from("n"), Value::from(gp.n())]);
        table.push(vec![Value::from("log_likelihood"), num(gp.log_likelihood())]);
        ctx.emit_table("gp", format, &table, None)?;
    }
    ctx.out.artifact("gp.json", &artifact)?;
    ctx.out.summary(&format!(
        "fit-gp: n {} ({} dropped), theta {:.4}, g {:.3e}, tau2 {:.4}",
        gp.n(),
        data.dropped,
        gp.theta,
        gp.g,
        gp.tau2
    ))
}

fn gp_validate(ctx: &mut Ctx, trend_path: Option<&Path>, split: f64) -> Result<(), CliError> {
    let format = ctx.format(&[Format::Csv, Format::Json])?;
    let (_, norm) = ctx.normalized()?;
    let trend = ctx.trend(trend_path, &norm)?;
    let report = holdout_validate(&norm, &trend, split)?;
    let mut table = Table::new(&["predicted", "observed"]);
    for (p, o) in &report.pairs {
        table.push(vec![num(*p), num(*o)]);
    }
    ctx.emit_table("holdout", format, &table, Some(output::json(&report)))?;
    ctx.out.summary(&format!(
        "gp-validate: train {}, test {}, rmse {:.4}",
        report.n_train, report.n_test, report.rmse
    ))
}

fn predict(ctx: &mut Ctx, trend: &Path, gp: &Path, date: MonthIndex, machine: &Machine) -> Result<(), CliError> {
    let format = ctx.format(&[Format::Csv, Format::Json])?;
    let trend: TrendModel = load_json(trend)?;
    let gp: GpModel = load_json(gp)?;
    let config = machine_config(machine)?;
    let (mean, var) = predict_individual(&trend, &gp, date, &config);
    let half = Z_975 * var.sqrt();
    let extrapolates = gp.extrapolates(&config.features());
    if extrapolates {
        log::warn!("configuration lies outside the GP training range");
    }
    let mut table = Table::new(&[
        "t",
        "date",
        "cores",
        "freq_mhz",
        "l3_kb",
        "threads",
        "mean_log",
        "var",
        "lo95",
        "hi95",
        "extrapolates",
    ]);
    table.push(vec![
        Value::from(date.value()),
        Value::from(date.to_string()),
        Value::from(config.cores),
        num(config.freq_mhz),
        num(config.l3_kb),
        num(config.threads_per_core),
        num(mean),
        num(var),
        num(mean - half),
        num(mean + half),
        Value::from(extrapolates),
    ]);
    ctx.emit_table("prediction", format, &table, None)?;
    ctx.out.summary(&format!(
        "predict: {date} log score {mean:.4} (95% PI {:.4}..{:.4}), score {:.3}",
        mean - half,
        mean + half,
        mean.exp()
    ))
}

fn scenario(
    ctx: &mut Ctx,
    trend: &Path,
    gp: &Path,
    lines: &Path,
    region: Option<&Path>,
    (from, to, step): (MonthIndex, MonthIndex, u32),
    qs: Option<Vec<f64>>,
) -> Result<(), CliError> {
    let format = ctx.format(&[Format::Csv, Format::Json])?;
    if from > to || step == 0 {
        return Err(CliError::Usage("need --from <= --to and --step > 0".into()));
    }
    let trend: TrendModel = load_json(trend)?;
    let gp: GpModel = load_json(gp)?;
    let lines = match load_json::<LinesFile>(lines)? {
        LinesFile::Wrapped { lines } | LinesFile::Bare(lines) => lines,
    };
    let taus: Vec<f64> = {
        let set: BTreeSet<u64> = lines.iter().map(|l| l.tau.to_bits()).collect();
        let mut v: Vec<f64> = set.into_iter().map(f64::from_bits).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let region = ctx.region(region)?;
    let qs = qs.or(ctx.cfg.quantiles.clone()).unwrap_or(DEFAULT_QUANTILES.to_vec());
    let times: Vec<MonthIndex> = (from.value()..=to.value()).step_by(step as usize).map(MonthIndex).collect();
    let sweep = scenario_sweep(&trend, &gp, &lines, &taus, &region, &times, &qs)?;
    let body = match format {
        Format::Json => pretty(&with_seed(output::json(&sweep), "sweep", ctx.seed()))?,
        _ => format!("# seed: {}\n{}", ctx.seed(), sweep_to_csv(&sweep.bounds)?),
    };
    ctx.out.primary("scenario", format, &body)?;
    ctx.out.summary(&format!(
        "scenario: {} bounds over {} months x {} quantiles, {} failed cells",
        sweep.bounds.len(),
        times.len(),
        qs.len(),
        sweep.errors.len()
    ))?;
    if sweep.bounds.is_empty() {
        let first = sweep.errors.first().map_or(String::new(), |e| e.message.clone());
        return Err(CliError::Data(format!("no scenario cell succeeded: {first}")));
    }
    Ok(())
}

fn sensitivity_export(ctx: &mut Ctx, fields: &[String]) -> Result<(), CliError> {
    let format = ctx.format(&[Format::Csv, Format::Json])?;
    let fields: Vec<SensitivityField> = fields
        .iter()
        .map(|f| f.parse().map_err(|e: benchtrend::Error| CliError::Usage(e.to_string())))
        .collect::<Result<_, _>>()?;
    let (_, norm) = ctx.normalized()?;
    let body = match format {
        Format::Json => {
            let rows: Vec<Value> = norm
                .iter()
                .map(|r| {
                    let obj: serde_json::Map<String, Value> = fields
                        .iter()
                        .map(|f| {
                            let v = match f {
                                SensitivityField::Date => Value::from(r.record.date.to_string()),
                                SensitivityField::Score => num(r.score),
                                SensitivityField::Hw(h) => opt(h.get(&r.record.hw)),
                            };
                            (f.name().to_string(), v)
                        })
                        .collect();
                    Value::Object(obj)
                })
                .collect();
            pretty(&with_seed(Value::Array(rows), "rows", ctx.seed()))?
        }
        _ => format!("# seed: {}\n{}", ctx.seed(), emit_sensitivity_table(&norm, &fields)?),
    };
    ctx.out.primary("sensitivity", format, &body)?;
    ctx.out.summary(&format!("sensitivity-export: {} records, {} fields", norm.len(), fields.len()))
}
