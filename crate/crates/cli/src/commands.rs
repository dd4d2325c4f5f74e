use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use gmproc::ar::ar_spectrum;
use gmproc::estimators::{hmc_sample, ml_estimate, posterior_mean_projected, HmcConfig};
use gmproc::io::{
    frequency_grid, read_model, read_series, write_draws, write_model, write_report, write_spectrum,
    Diagnostics, EstimationReport, SeriesOptions,
};
use gmproc::likelihood::{ar_loglik, SampledSeries};
use gmproc::simlab::{
    benchmark_likelihood, run_case, run_sweep, subsample_study, write_bench_csv, write_runs_csv,
    write_study_csv, write_summary_csv, write_sweep_csv, BenchSpec, CaseResult, CaseSpec,
    EstimatorKind, HmcBudget, StudySpec, SweepSpec, PAPER_RUNS,
};
use serde::Serialize;

use crate::{
    BenchArgs, CaseArgs, CaseOverrides, Command, EstimateArgs, Format, InputArgs, Prior, SpectrumArgs,
    StudyArgs, SweepArgs,
};

/// Failure with its process exit code: 2 for bad input, 3 for numerical or
/// estimation failures.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }

    fn failure(message: impl Into<String>) -> Self {
        CliError { code: 3, message: message.into() }
    }
}

impl From<gmproc::Error> for CliError {
    fn from(e: gmproc::Error) -> Self {
        if e.is_input_error() {
            CliError::input(e.to_string())
        } else {
            CliError::failure(e.to_string())
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::input(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Estimate(a) => estimate(a),
        Command::Spectrum(a) => spectrum(a),
        Command::SimulateCase(a) => simulate_case(a),
        Command::Sweep(a) => sweep(a),
        Command::Bench(a) => bench(a),
        Command::SubsampleStudy(a) => subsample(a),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn sink(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(mut w: impl Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::input(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn load_series(path: &Path, opts: &InputArgs) -> Result<SampledSeries> {
    let opts = SeriesOptions { t_g: opts.grid, collide: opts.collide.into(), demean: opts.demean() };
    Ok(read_series(open(path)?, &opts)?.0)
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let method = match a.prior {
        None => a.method,
        Some(prior) => {
            let implied = match prior {
                Prior::Reference => EstimatorKind::Pmean,
                Prior::Flat => EstimatorKind::PmeanF,
            };
            if a.method != EstimatorKind::Ml && a.method != implied {
                return Err(CliError::input(format!("--prior conflicts with --method {}", a.method)));
            }
            implied
        }
    };
    let series = load_series(&a.input, &a.input_opts)?;
    let engine = a.fit.engine;
    let ml = ml_estimate(&series, a.order, engine);
    let (model, loglik, diagnostics, draws) = match method.prior() {
        None => {
            let fit = ml?;
            let diagnostics =
                Diagnostics { start_used: Some(fit.start_used.name().to_string()), ..Default::default() };
            (fit.model, fit.loglik, diagnostics, None)
        }
        Some(prior) => {
            let cfg = HmcConfig {
                n_warmup: a.fit.warmup,
                n_samples: a.fit.samples,
                seed: a.seed,
                ..HmcConfig::default()
            };
            let post = hmc_sample(&series, a.order, prior, &cfg, engine, ml.as_ref().ok())?;
            let (model, projected) = posterior_mean_projected(&post)?;
            if projected {
                eprintln!("warning: posterior mean was projected back into the stationary region");
            }
            let loglik = ar_loglik(&model, &series, engine)?;
            let diagnostics = Diagnostics {
                accept_rate: Some(post.accept_rate),
                step_size: Some(post.step_size),
                divergences: Some(post.divergences),
                start_used: None,
            };
            (model, loglik, diagnostics, Some(post))
        }
    };
    fs::create_dir_all(&a.out)
        .map_err(|e| CliError::input(format!("{}: {e}", a.out.display())))?;
    let mut w = create(&a.out.join("model.json"))?;
    write_model(&mut w, &model)?;
    w.flush()?;
    let report = EstimationReport { model, loglik, method: method.name().to_string(), diagnostics };
    let mut w = create(&a.out.join("report.json"))?;
    write_report(&mut w, &report)?;
    w.flush()?;
    if let Some(path) = &a.draws {
        match &draws {
            Some(post) => {
                let mut w = create(path)?;
                write_draws(&mut w, post)?;
                w.flush()?;
            }
            None => eprintln!("warning: --draws ignored for maximum likelihood"),
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SpectrumRow {
    freq: f64,
    psd: f64,
}

fn spectrum(a: SpectrumArgs) -> Result<()> {
    let model = read_model(open(&a.model)?)?;
    let freqs = frequency_grid(a.nfreq);
    let psd = ar_spectrum(&model, &freqs).map_err(|e| CliError::input(e.to_string()))?;
    let mut w = sink(a.out.as_ref())?;
    match a.format {
        Format::Csv => write_spectrum(&mut w, &freqs, &psd)?,
        Format::Json => {
            let rows: Vec<SpectrumRow> =
                freqs.iter().zip(&psd).map(|(&freq, &psd)| SpectrumRow { freq, psd }).collect();
            write_json(&mut w, &rows)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn load_case(name: &str) -> Result<CaseSpec> {
    let path = Path::new(name);
    if path.extension().is_some_and(|e| e == "json") || path.is_file() {
        read_json(path)
    } else {
        Ok(CaseSpec::builtin(name)?)
    }
}

fn apply(spec: &mut CaseSpec, o: &CaseOverrides) {
    if o.full {
        spec.n_runs = PAPER_RUNS;
    }
    if let Some(s) = o.runs {
        spec.n_runs = s;
    }
    if let Some(seed) = o.seed {
        spec.seed = seed;
    }
    if let Some(p) = o.order {
        spec.p_est = p;
    }
    if let Some(e) = &o.estimators {
        spec.estimators = e.clone();
    }
    if let Some(e) = o.engine {
        spec.engine = e;
    }
    if let Some(w) = o.warmup {
        spec.hmc.n_warmup = w;
    }
    if let Some(s) = o.samples {
        spec.hmc.n_samples = s;
    }
}

fn report_failures(results: &[CaseResult]) {
    for res in results {
        for f in &res.failures {
            eprintln!("warning: {} run {} {}: {}", res.name, f.run, f.estimator, f.error);
        }
    }
}

fn simulate_case(a: CaseArgs) -> Result<()> {
    let mut spec = load_case(&a.case)?;
    apply(&mut spec, &a.overrides);
    let result = run_case(&spec)?;
    let results = [result];
    report_failures(&results);
    let mut w = sink(a.out.as_ref())?;
    match a.format {
        Format::Csv => write_runs_csv(&mut w, &results)?,
        Format::Json => write_json(&mut w, &results[0])?,
    }
    w.flush()?;
    if let Some(path) = &a.summary {
        let mut w = create(path)?;
        write_summary_csv(&mut w, &results)?;
        w.flush()?;
    }
    for s in &results[0].summaries {
        eprintln!(
            "{} {}: mean ME {:.4} (se {:.4}) over {} runs, {} failed",
            results[0].name,
            s.estimator,
            s.mean_me,
            s.std_err,
            s.me.len(),
            s.failures
        );
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut spec: SweepSpec = match &a.spec {
        Some(path) => read_json(path)?,
        None => SweepSpec {
            parameter: a.parameter.expect("required by clap"),
            values: a.values.clone().expect("required by clap"),
            base: load_case(&a.case)?,
            hold_n_a: !a.no_hold,
        },
    };
    if a.no_hold {
        spec.hold_n_a = false;
    }
    apply(&mut spec.base, &a.overrides);
    let results = run_sweep(&spec)?;
    report_failures(&results);
    let mut w = sink(a.out.as_ref())?;
    match a.format {
        Format::Csv => write_sweep_csv(&mut w, &spec, &results)?,
        Format::Json => write_json(&mut w, &results)?,
    }
    w.flush()?;
    if let Some(path) = &a.runs_out {
        let mut w = create(path)?;
        write_runs_csv(&mut w, &results)?;
        w.flush()?;
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let spec = match &a.spec {
        Some(path) => read_json(path)?,
        None => BenchSpec {
            n_grid: a.n.clone(),
            t_avg: a.t.clone(),
            state_dim: a.state_dim.clone(),
            engines: a.engines.clone(),
            reps: a.reps,
            seed: a.seed,
            fixed_n_a: a.n_a,
        },
    };
    let rows = benchmark_likelihood(&spec)?;
    let mut w = sink(a.out.as_ref())?;
    match a.format {
        Format::Csv => write_bench_csv(&mut w, &rows)?,
        Format::Json => write_json(&mut w, &rows)?,
    }
    w.flush()?;
    Ok(())
}

fn subsample(a: StudyArgs) -> Result<()> {
    let series = load_series(&a.input, &a.input_opts)?;
    let spec = StudySpec {
        t_values: a.t.clone(),
        reps: a.reps,
        p_est: a.order,
        estimators: a.estimators.clone(),
        seed: a.seed,
        engine: a.fit.engine,
        hmc: HmcBudget { n_warmup: a.fit.warmup, n_samples: a.fit.samples },
    };
    let result = subsample_study(&series, &spec).map_err(|e| match e {
        e if e.is_input_error() => CliError::from(e),
        e => CliError::failure(format!("reference fit failed: {e}")),
    })?;
    if let Some(me) = result.reference_me {
        if me >= 1.0 {
            eprintln!("warning: reference estimates disagree (ME {me:.3} >= 1)");
        }
    }
    for f in &result.failures {
        eprintln!("warning: T={} rep {} {}: {}", f.t_avg, f.rep, f.estimator, f.error);
    }
    let mut w = sink(a.out.as_ref())?;
    match a.format {
        Format::Csv => write_study_csv(&mut w, &result)?,
        Format::Json => write_json(&mut w, &result)?,
    }
    w.flush()?;
    Ok(())
}
