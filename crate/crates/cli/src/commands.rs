use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use lmscreen::data::{load_long_csv, CovariateSelection, CsvSchema, LongitudinalDataset, TimeCoding};
use lmscreen::report::{write_benchmark_csv, BootstrapReport, ScreeningReport};
use lmscreen::screening::{bootstrap_stability, resolve_d, screen_likelihood, DPolicy, ScreeningConfig};
use lmscreen::simbench::{run_benchmark, Example, SimConfig};
use lmscreen::{baselines::gees_statistics, Method};

use crate::options::{split_list, Options};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration.
    Usage(String),
    Core(lmscreen::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_input_error() => 2,
            CliError::Core(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<lmscreen::Error> for CliError {
    fn from(e: lmscreen::Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

fn parse_method(raw: &str) -> CliResult<Method> {
    raw.parse().map_err(CliError::Core)
}

fn parse_coding(raw: Option<&str>) -> CliResult<TimeCoding> {
    match raw.unwrap_or("dummy") {
        "dummy" => Ok(TimeCoding::Dummy),
        "linear" => Ok(TimeCoding::Linear),
        other => usage(format!("--time-coding must be 'dummy' or 'linear', got '{other}'")),
    }
}

fn parse_d(raw: Option<&str>) -> CliResult<DPolicy> {
    raw.unwrap_or("auto").parse().map_err(CliError::Core)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn finish(mut w: BufWriter<File>) -> CliResult<()> {
    w.flush().map_err(|e| CliError::Core(e.into()))
}

fn load(opts: &Options) -> CliResult<LongitudinalDataset> {
    let Some(path) = &opts.input else {
        return usage("--input is required");
    };
    let file = File::open(path).map_err(|e| CliError::Usage(format!("cannot open {}: {e}", path.display())))?;
    let covariates = match opts.covariate_cols.as_deref() {
        None | Some("rest") => CovariateSelection::Rest,
        Some(list) => CovariateSelection::Named(split_list(list)),
    };
    let schema = CsvSchema {
        id: opts.id_col.clone().unwrap_or_else(|| "id".into()),
        time: opts.time_col.clone().unwrap_or_else(|| "time".into()),
        response: opts.response_col.clone().unwrap_or_else(|| "y".into()),
        conditioning: opts.condition_cols.as_deref().map(split_list).unwrap_or_default(),
        covariates,
    };
    Ok(load_long_csv(std::io::BufReader::new(file), &schema)?)
}

fn likelihood_config(opts: &Options, ds: &LongitudinalDataset, method: Method) -> CliResult<ScreeningConfig> {
    let Some(spec) = method.random_effects() else {
        return usage(format!("method '{method}' is not a likelihood method"));
    };
    let mut cfg = ScreeningConfig::new(spec, parse_coding(opts.time_coding.as_deref())?);
    cfg.conditioning = (0..ds.n_conditioning()).collect();
    cfg.d = parse_d(opts.d.as_deref())?;
    Ok(cfg)
}

fn top_names(report: &ScreeningReport, k: usize) -> String {
    report
        .ranked()
        .iter()
        .take(k)
        .map(|r| r.name.as_str())
        .collect::<Vec<_>>()
        .join(",")
}

fn fmt_icc(icc: Option<f64>) -> String {
    icc.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into())
}

pub fn screen(opts: &Options) -> CliResult<()> {
    let ds = load(opts)?;
    let method = parse_method(opts.method.as_deref().unwrap_or("ls-slope"))?;
    let report = if method.random_effects().is_some() {
        let cfg = likelihood_config(opts, &ds, method)?;
        ScreeningReport::from_likelihood(&screen_likelihood(&ds, &cfg)?)
    } else {
        if ds.n_conditioning() > 0 {
            eprintln!("note: {method} does not condition on {:?}", ds.conditioning_names());
        }
        let kind = method.working_correlation().expect("non-likelihood methods are GEES");
        let conditioning: Vec<usize> = (0..ds.n_conditioning()).collect();
        let (d, icc) = resolve_d(&ds, parse_d(opts.d.as_deref())?, &conditioning)?;
        ScreeningReport::from_gees(&gees_statistics(&ds, kind, d)?, icc)
    };
    if let Some(path) = &opts.output_json {
        let mut w = create(path)?;
        report.write_json(&mut w)?;
        w.write_all(b"\n").map_err(|e| CliError::Core(e.into()))?;
        finish(w)?;
    }
    if let Some(path) = &opts.output_csv {
        let mut w = create(path)?;
        report.write_csv(&mut w)?;
        finish(w)?;
    }
    let m = ds
        .balanced_measurements()
        .map(|m| m.to_string())
        .unwrap_or_else(|| format!("{:.2}", ds.mean_measurements()));
    println!(
        "{method}: n={} m={m} p={} icc={} d={} top={}",
        ds.n_subjects(),
        ds.n_covariates(),
        fmt_icc(report.icc),
        report.d,
        top_names(&report, 10)
    );
    Ok(())
}

pub fn bootstrap(opts: &Options) -> CliResult<()> {
    let ds = load(opts)?;
    let method = parse_method(opts.method.as_deref().unwrap_or("ls-slope"))?;
    let cfg = likelihood_config(opts, &ds, method)?;
    let b = opts.bootstrap_b.unwrap_or(100);
    if b < 1 {
        return usage("--bootstrap-B must be at least 1");
    }
    let seed = opts.seed.unwrap_or(1);
    let result = bootstrap_stability(&ds, &cfg, b, seed)?;
    let report = BootstrapReport::new(method.name(), seed, &result);
    if let Some(path) = &opts.output_json {
        let mut w = create(path)?;
        report.write_json(&mut w)?;
        w.write_all(b"\n").map_err(|e| CliError::Core(e.into()))?;
        finish(w)?;
    }
    if let Some(path) = &opts.output_csv {
        let mut w = create(path)?;
        report.write_csv(&mut w)?;
        finish(w)?;
    }
    let ever = result.counts.iter().filter(|&&c| c > 0).count();
    let top: Vec<String> = report
        .variables
        .iter()
        .take(10)
        .map(|r| format!("{}:{}", r.name, r.count))
        .collect();
    println!(
        "{method} bootstrap: B={b} failed={} selected_at_least_once={ever}/{} top={}",
        result.failures.len(),
        ds.n_covariates(),
        top.join(",")
    );
    Ok(())
}

pub fn simulate(opts: &Options) -> CliResult<()> {
    let example = Example::try_from(opts.example.unwrap_or(1))?;
    let mut cfg = SimConfig::new(example, opts.n.unwrap_or(100), opts.p.unwrap_or(1000));
    if let Some(v) = opts.sigma_b {
        cfg.sigma_b = v;
    }
    if let Some(v) = opts.sigma_eps {
        cfg.sigma_eps = v;
    }
    if let Some(v) = opts.omega {
        cfg.omega = v;
    }
    if let Some(v) = opts.replicates {
        cfg.replicates = v;
    }
    if let Some(v) = opts.seed {
        cfg.master_seed = v;
    }
    if let Some(list) = &opts.method {
        cfg.methods = split_list(list)
            .iter()
            .map(|m| parse_method(m))
            .collect::<CliResult<_>>()?;
    }
    cfg.d_policy = parse_d(opts.d.as_deref())?;
    cfg.validate()?;

    let output = run_benchmark(&cfg)?;
    if let Some(path) = &opts.output_json {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &output).map_err(|e| CliError::Core(e.into()))?;
        w.write_all(b"\n").map_err(|e| CliError::Core(e.into()))?;
        finish(w)?;
    }
    if let Some(path) = &opts.output_csv {
        let mut w = create(path)?;
        write_benchmark_csv(&output.report, &mut w)?;
        finish(w)?;
    }
    let cells: Vec<String> = output
        .report
        .summaries
        .iter()
        .map(|s| format!("{} r_M={:.3} r_I={:.3} mms50={}", s.method, s.r_main, s.r_inter, s.mms50))
        .collect();
    println!(
        "example {} n={} p={} replicates={}: {}",
        u8::from(example),
        cfg.n,
        cfg.p,
        cfg.replicates,
        cells.join("; ")
    );
    Ok(())
}
