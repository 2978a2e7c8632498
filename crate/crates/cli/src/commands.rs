use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use stochmort::data::{
    crude_rates, panel_to_json, simulate_panel, stationary_initial_state, tables_from_panel, write_panel_csv,
    RawVitalTable, TableKind,
};
use stochmort::diagnostics::{compute_dic, compute_residuals, DicReport};
use stochmort::forecast::{forecast_seeded, project_factors};
use stochmort::gibbs::{run_chain_with_progress, write_chain_csv};
use stochmort::stats::Interval;
use stochmort::{AgeYearWindow, DataPanel, Hyperpriors, ModelSpec, PosteriorChain, SamplerConfig, StaticParams};

use crate::args::{CompareArgs, DiagnoseArgs, FitArgs, ForecastArgs, OutArgs, SimulateArgs, Span};
use crate::run::{load_chain, load_panel, read_json, CliError, CliResult, RunDir, RunManifest};

fn window(ages: Span, years: Span) -> CliResult<AgeYearWindow> {
    Ok(AgeYearWindow::new(ages.0..=ages.1, years.0..=years.1)?)
}

fn out_dir(out: &OutArgs, default_name: String) -> PathBuf {
    out.out.clone().unwrap_or_else(|| out.out_root.join(default_name))
}

fn data_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Core(stochmort::Error::Data(format!("{}: {e}", path.display())))
}

pub fn simulate(a: &SimulateArgs, quiet: bool) -> CliResult<()> {
    let spec = ModelSpec::new(a.model, window(a.ages, a.years)?);
    let params: StaticParams = read_json(&a.params)?;
    params.check_shape(&spec).map_err(|e| data_err(&a.params, e))?;
    let start_seed = a.start_seed.unwrap_or(a.seed.wrapping_add(1));
    let phi0 = stationary_initial_state(&spec, &params, a.kappa0, start_seed)?;
    let truth = simulate_panel(&spec, &params, &phi0, a.seed)?;

    let mut run = RunDir::create(out_dir(&a.out, format!("simulate-{}-seed{}", a.model, a.seed)), "simulate", quiet)?;
    run.note(format!(
        "simulated {} panel, {} ages x {} years, seed {}",
        a.model,
        spec.n_ages(),
        spec.n_years(),
        a.seed
    ));
    run.write_io("panel.csv", |w| write_panel_csv(&truth.panel, w))?;
    run.write_json("panel.json", &panel_to_json(&truth.panel))?;
    let mut doc = truth.to_json()?;
    doc["startSeed"] = start_seed.into();
    doc["kappa0"] = a.kappa0.into();
    run.write_json("truth.json", &doc)?;
    let (deaths, exposures) = tables_from_panel(&truth.panel);
    run.write_io("deaths.txt", |w| deaths.write_text(w, "Synthetic deaths"))?;
    run.write_io("exposures.txt", |w| exposures.write_text(w, "Synthetic exposures (unit)"))?;

    let mut manifest = RunManifest::new("simulate");
    manifest.model = Some(a.model);
    manifest.window = Some(spec.window);
    manifest.seed = Some(a.seed);
    manifest.input(&a.params)?;
    run.finish(manifest)
}

pub fn fit(a: &FitArgs, quiet: bool) -> CliResult<()> {
    let mut manifest = RunManifest::new("fit");
    let panel = match (&a.panel, &a.deaths, &a.exposures) {
        (Some(path), _, _) => {
            manifest.input(path)?;
            let full = load_panel(path)?;
            let w = full.window();
            let ages = a.ages.unwrap_or(Span(w.first_age(), w.last_age()));
            let years = a.years.unwrap_or(Span(w.first_year(), w.last_year()));
            full.restrict(&window(ages, years)?)?
        }
        (None, Some(d), Some(e)) => {
            manifest.input(d)?;
            manifest.input(e)?;
            let deaths = RawVitalTable::read(d, TableKind::Deaths)?;
            let exposures = RawVitalTable::read(e, TableKind::Exposures)?;
            let w = window(a.ages.unwrap_or(Span(65, 95)), a.years.unwrap_or(Span(1970, 2010)))?;
            crude_rates(&deaths, &exposures, a.sex, &w)?
        }
        _ => return Err(CliError::Usage("give --panel, or both --deaths and --exposures".into())),
    };
    if a.chains == 0 {
        return Err(CliError::Usage("--chains must be at least 1".into()));
    }
    let spec = ModelSpec::new(a.model, *panel.window());
    let priors = match &a.priors {
        Some(path) => {
            manifest.input(path)?;
            read_json::<Hyperpriors>(path)?
        }
        None => Hyperpriors::default(),
    };
    let mut config = SamplerConfig::new(a.iters, a.burnin, a.seed);
    config.thin = a.thin;
    config.priors = priors;
    config.cohort_variance_residual = a.gamma_residual.into();
    config.validate()?;

    let dir = out_dir(&a.out, format!("fit-{}-seed{}", a.model, a.seed));
    let mut run = RunDir::create(dir, "fit", quiet)?;
    run.note(format!(
        "fitting {} on {} ages x {} years: {} chain(s), {} iterations, burn-in {}",
        a.model,
        spec.n_ages(),
        spec.n_years(),
        a.chains,
        a.iters,
        a.burnin
    ));

    let start = Instant::now();
    let step = (a.iters / 10).max(1);
    let chains: Vec<PosteriorChain> = (0..a.chains)
        .into_par_iter()
        .map(|k| {
            let mut cfg = config.clone();
            cfg.seed = a.seed.wrapping_add(k as u64);
            let report = k == 0 && !quiet;
            run_chain_with_progress(&spec, &panel, &cfg, |it| {
                if report && it % step == 0 {
                    eprintln!("  chain 1: iteration {it}/{}", cfg.iterations);
                }
            })
        })
        .collect::<Result<_, _>>()?;
    run.note(format!("sampling took {:.1} s", start.elapsed().as_secs_f64()));

    if chains.len() == 1 {
        run.write("chain.csv", |w| write_chain_csv(&chains[0], w))?;
    } else {
        for (k, c) in chains.iter().enumerate() {
            run.write(&format!("chain-{:03}.csv", k + 1), |w| write_chain_csv(c, w))?;
        }
    }
    let mut pooled = chains[0].clone();
    for c in &chains[1..] {
        pooled.draws.extend(c.draws.iter().cloned());
    }
    run.write_io("panel.csv", |w| write_panel_csv(&panel, w))?;
    run.write_io("summary.csv", |w| write_summary(&pooled, w))?;

    manifest.model = Some(a.model);
    manifest.window = Some(spec.window);
    manifest.sampler = Some(config);
    manifest.chains = Some(a.chains);
    manifest.seed = Some(a.seed);
    run.finish(manifest)
}

/// Posterior mean and 95% interval of every static parameter; vector
/// entries are labelled by age, e.g. `alpha[65]`.
type ScalarField = fn(&StaticParams) -> Option<f64>;
type VectorField = fn(&StaticParams) -> Option<&Vec<f64>>;

pub fn write_summary<W: Write>(chain: &PosteriorChain, mut w: W) -> std::io::Result<()> {
    writeln!(w, "parameter,mean,q02.5,q97.5")?;
    let mut row = |name: String, xs: Vec<f64>| -> std::io::Result<()> {
        let iv = Interval::from_sample(&xs, 0.95);
        writeln!(w, "{name},{:?},{:?},{:?}", iv.mean, iv.lower, iv.upper)
    };
    let first = &chain.draws[0].params;
    let scalars: [(&str, ScalarField); 6] = [
        ("theta", |p| Some(p.theta)),
        ("eta", |p| p.eta),
        ("lambda", |p| p.lambda),
        ("sigma2_eps", |p| Some(p.sigma2_eps)),
        ("sigma2_kappa", |p| Some(p.sigma2_kappa)),
        ("sigma2_gamma", |p| p.sigma2_gamma),
    ];
    for (name, get) in scalars {
        if get(first).is_some() {
            row(name.to_string(), chain.trace(|d| get(&d.params).unwrap()))?;
        }
    }
    let vectors: [(&str, VectorField); 3] = [
        ("alpha", |p| Some(&p.alpha)),
        ("beta", |p| Some(&p.beta)),
        ("beta_gamma", |p| p.beta_gamma.as_ref()),
    ];
    for (name, get) in vectors {
        if get(first).is_some() {
            for (i, age) in chain.spec.window.ages().enumerate() {
                row(format!("{name}[{age}]"), chain.trace(|d| get(&d.params).unwrap()[i]))?;
            }
        }
    }
    Ok(())
}

/// Panel a loaded chain was fitted to: `explicit` or `panel.csv` beside
/// the chain, cut to the chain's window.
fn fitted_panel(explicit: Option<&Path>, chain_dir: &Path, chain: &PosteriorChain) -> CliResult<(PathBuf, DataPanel)> {
    let path = explicit.map_or_else(|| chain_dir.join("panel.csv"), Path::to_path_buf);
    let panel = load_panel(&path)?.restrict(&chain.spec.window)?;
    Ok((path, panel))
}

pub fn diagnose(a: &DiagnoseArgs, quiet: bool) -> CliResult<()> {
    let loaded = load_chain(&a.chain)?;
    let chain = &loaded.chain;
    let (panel_path, panel) = fitted_panel(a.panel.as_deref(), &loaded.dir, chain)?;
    let residuals = compute_residuals(&panel, chain)?;
    let dic = compute_dic(&panel, chain)?;

    let mut run = RunDir::create(a.out.clone().unwrap_or_else(|| loaded.dir.clone()), "diagnose", quiet)?;
    run.note(format!(
        "{}: {} draws, DIC {:.2}, pD {:.2}",
        chain.spec.kind,
        chain.len(),
        dic.dic,
        dic.p_d
    ));
    run.write_io("residuals.csv", |w| residuals.write_csv(w))?;
    run.write_json("residuals.json", &residuals.to_json())?;
    run.write_io("residuals_by_cohort.csv", |w| {
        writeln!(w, "cohort,meanAbsResidual")?;
        for (c, v) in residuals.mean_abs_by_cohort() {
            writeln!(w, "{c},{v:?}")?;
        }
        Ok(())
    })?;
    run.write_json("dic.json", &dic)?;

    let mut manifest = RunManifest::new("diagnose");
    manifest.model = Some(chain.spec.kind);
    manifest.window = Some(chain.spec.window);
    for f in &loaded.files {
        manifest.input(f)?;
    }
    manifest.input(&panel_path)?;
    run.finish(manifest)
}

pub fn forecast(a: &ForecastArgs, quiet: bool) -> CliResult<()> {
    let loaded = load_chain(&a.chain)?;
    let chain = &loaded.chain;
    let seed = a.seed.unwrap_or(chain.config.seed);
    let result = forecast_seeded(chain, a.horizon, seed)?;
    let projection = project_factors(&result);

    let mut run = RunDir::create(a.out.clone().unwrap_or_else(|| loaded.dir.clone()), "forecast", quiet)?;
    run.note(format!(
        "{}: {} draws projected {} years ahead (seed {seed})",
        chain.spec.kind,
        chain.len(),
        a.horizon
    ));
    if !a.skip_draws {
        run.write_io("forecast_draws.csv", |w| result.write_draws_csv(w))?;
    }
    run.write_io("forecast_summary.csv", |w| result.write_summary_csv(w, false))?;
    run.write_io("forecast_rates_summary.csv", |w| result.write_summary_csv(w, true))?;
    run.write_io("kappa_projection.csv", |w| projection.write_kappa_csv(w))?;
    if chain.spec.kind.has_cohort() {
        run.write_io("cohort_projection.csv", |w| projection.write_cohort_csv(w))?;
    }

    let mut manifest = RunManifest::new("forecast");
    manifest.model = Some(chain.spec.kind);
    manifest.window = Some(chain.spec.window);
    manifest.seed = Some(seed);
    for f in &loaded.files {
        manifest.input(f)?;
    }
    run.finish(manifest)
}

#[derive(Debug, Serialize)]
struct CompareRow {
    run: PathBuf,
    model: String,
    draws: usize,
    #[serde(flatten)]
    dic: DicReport,
}

pub fn compare(a: &CompareArgs, quiet: bool) -> CliResult<()> {
    let mut rows = Vec::with_capacity(a.chains.len());
    let mut inputs = Vec::new();
    for path in &a.chains {
        let loaded = load_chain(path)?;
        let (panel_path, panel) = fitted_panel(a.panel.as_deref(), &loaded.dir, &loaded.chain)?;
        rows.push(CompareRow {
            run: path.clone(),
            model: loaded.chain.spec.kind.to_string(),
            draws: loaded.chain.len(),
            dic: compute_dic(&panel, &loaded.chain)?,
        });
        inputs.extend(loaded.files);
        inputs.push(panel_path);
    }
    rows.sort_by(|x, y| x.dic.dic.total_cmp(&y.dic.dic));

    println!(
        "{:>4}  {:<18} {:>14} {:>10} {:>14}  run",
        "rank", "model", "DIC", "pD", "meanDeviance"
    );
    for (k, r) in rows.iter().enumerate() {
        println!(
            "{:>4}  {:<18} {:>14.2} {:>10.2} {:>14.2}  {}",
            k + 1,
            r.model,
            r.dic.dic,
            r.dic.p_d,
            r.dic.mean_deviance,
            r.run.display()
        );
    }

    if let Some(out) = &a.out {
        let mut run = RunDir::create(out.clone(), "compare", quiet)?;
        run.write_io("compare.csv", |w| {
            writeln!(w, "rank,model,dic,pD,meanDeviance,devianceAtMean,draws,run")?;
            for (k, r) in rows.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{:?},{:?},{:?},{:?},{},{}",
                    k + 1,
                    r.model,
                    r.dic.dic,
                    r.dic.p_d,
                    r.dic.mean_deviance,
                    r.dic.deviance_at_mean,
                    r.draws,
                    r.run.display()
                )?;
            }
            Ok(())
        })?;
        run.write_json("compare.json", &rows)?;
        let mut manifest = RunManifest::new("compare");
        for f in &inputs {
            manifest.input(f)?;
        }
        run.finish(manifest)?;
    }
    Ok(())
}
