//! Subcommand drivers: measures, estimate, lp, report, simulate.
//!
//! Each driver reads the effective [`RunConfig`], writes its artifacts under
//! `paths.out_dir`, and finishes by writing the run manifest. Stage order is
//! the caller's business; a driver only checks that the files it needs exist.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bvar::{build_design, gibbs_sample, nw_posterior};
use crate::dates::{Date, Quarter};
use crate::dgp::{
    make_sign_separated_impact, simulate_microdata, simulate_outcome, simulate_var_panel,
    AsymmetricOutcomeSpec, DgpSpec, MicrodataParams,
};
use crate::identification::{
    default_focus, extract_shocks, identify, read_shocks_csv, scheme as builtin_scheme,
    write_shocks_csv, IdentError, IdentificationDiagnostics, RestrictionScheme, ShockPanel,
    SCHEME_NAMES,
};
use crate::inequality::{compute_measures, read_microdata, write_measures, write_microdata};
use crate::lp::{lp_irf, lp_irf_signed, read_irf_csv, write_irf_csv, IrfPoint, IrfResult, LpData};
use crate::panel::{PanelDataset, PanelStore, SeriesData};

use super::config::RunConfig;
use super::manifest::{RunManifest, StageTimer};
use super::{plot, PipelineError};

pub const DIAGNOSTICS_NAME: &str = "diagnostics.json";
pub const SHOCKS_NAME: &str = "shocks.csv";

fn ensure_out_dir(config: &RunConfig) -> Result<&Path, PipelineError> {
    std::fs::create_dir_all(&config.paths.out_dir).map_err(|e| {
        PipelineError::Config(format!(
            "cannot create output directory {}: {e}",
            config.paths.out_dir.display()
        ))
    })?;
    Ok(&config.paths.out_dir)
}

fn new_manifest(config: &RunConfig, command: &str) -> RunManifest {
    RunManifest::new(&config.canonical_json(), config.gibbs.seed, command)
}

fn open(path: &Path) -> Result<BufReader<File>, PipelineError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| PipelineError::Data(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, PipelineError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| PipelineError::Data(format!("cannot create {}: {e}", path.display())))
}

/// Resolves `config.scheme` (a built-in name or a path to a scheme JSON
/// file) together with the shocks to extract. Built-in schemes carry a
/// default focus; custom files must configure `focus_shocks`.
fn resolve_scheme(config: &RunConfig) -> Result<(RestrictionScheme, Vec<String>), PipelineError> {
    let name = config.scheme.as_str();
    let builtin = SCHEME_NAMES.contains(&name);
    let scheme = if builtin {
        builtin_scheme(name).map_err(|e| PipelineError::Config(e.to_string()))?
    } else if Path::new(name).exists() {
        let text = std::fs::read_to_string(name)
            .map_err(|e| PipelineError::Config(format!("cannot read scheme file {name}: {e}")))?;
        RestrictionScheme::from_json(&text)
            .map_err(|e| PipelineError::Config(format!("scheme file {name}: {e}")))?
    } else {
        return Err(PipelineError::Config(format!(
            "scheme {name:?} is neither one of {SCHEME_NAMES:?} nor an existing file"
        )));
    };
    let focus = match &config.focus_shocks {
        Some(shocks) if !shocks.is_empty() => shocks.clone(),
        _ if builtin => default_focus(name).map_err(|e| PipelineError::Config(e.to_string()))?,
        _ => {
            return Err(PipelineError::Config(
                "custom scheme files have no default focus; set focus_shocks".to_string(),
            ))
        }
    };
    for shock in &focus {
        scheme.shock_index(shock).map_err(|e| PipelineError::Config(e.to_string()))?;
    }
    Ok((scheme, focus))
}

fn check_scheme_variables(
    scheme: &RestrictionScheme,
    config: &RunConfig,
) -> Result<(), PipelineError> {
    if scheme.variables() != config.var.variables.as_slice() {
        return Err(PipelineError::Config(format!(
            "scheme variables {:?} do not match var.variables {:?}",
            scheme.variables(),
            config.var.variables
        )));
    }
    Ok(())
}

/// Largest quarter span on which every `(country, variable)` series reports.
fn balanced_span(
    store: &PanelStore,
    countries: &[String],
    variables: &[String],
) -> Result<(Quarter, Quarter), PipelineError> {
    let mut span: Option<(Quarter, Quarter)> = None;
    for country in countries {
        for variable in variables {
            let series = store.get(country, variable).ok_or_else(|| {
                PipelineError::Data(format!("no series ({country}, {variable})"))
            })?;
            let SeriesData::Quarterly(obs) = series else {
                return Err(PipelineError::Data(format!(
                    "series ({country}, {variable}) is not quarterly"
                )));
            };
            let (Some(first), Some(last)) = (obs.keys().next(), obs.keys().next_back()) else {
                return Err(PipelineError::Data(format!(
                    "series ({country}, {variable}) is empty"
                )));
            };
            span = Some(match span {
                None => (*first, *last),
                Some((s, e)) => (s.max(*first), e.min(*last)),
            });
        }
    }
    let (start, end) = span.ok_or_else(|| {
        PipelineError::Data("no series selected; nothing to align".to_string())
    })?;
    if start > end {
        return Err(PipelineError::Data(
            "selected series have no overlapping quarters".to_string(),
        ));
    }
    Ok((start, end))
}

/// Balanced macro panel over the configured VAR variables, subsampled.
fn assemble_panel(store: &PanelStore, config: &RunConfig) -> Result<PanelDataset, PipelineError> {
    let excluded = &config.subsample.exclude_countries;
    let countries: Vec<String> = store
        .countries()
        .into_iter()
        .filter(|c| !excluded.contains(c))
        .collect();
    if countries.is_empty() {
        return Err(PipelineError::Data(
            "no countries left after subsample exclusions".to_string(),
        ));
    }
    let (start, mut end) = balanced_span(store, &countries, &config.var.variables)?;
    if let Some(cap) = config.subsample.end {
        if cap < start {
            return Err(PipelineError::Data(format!(
                "subsample end {cap} precedes the balanced span start {start}"
            )));
        }
        end = end.min(cap);
    }
    let country_refs: Vec<&str> = countries.iter().map(|s| s.as_str()).collect();
    let var_refs: Vec<&str> = config.var.variables.iter().map(|s| s.as_str()).collect();
    Ok(store.align_balanced(&country_refs, (start, end), &var_refs)?)
}

fn write_diagnostics(
    dir: &Path,
    diagnostics: &IdentificationDiagnostics,
) -> Result<(), PipelineError> {
    let json = serde_json::to_string_pretty(diagnostics)
        .map_err(|e| PipelineError::Data(format!("cannot serialize diagnostics: {e}")))?;
    std::fs::write(dir.join(DIAGNOSTICS_NAME), json + "\n")?;
    Ok(())
}

/// Computes inequality measures per country-year and carries them to
/// quarterly frequency, one file per configured interpolation method.
pub fn cmd_measures(config: &RunConfig) -> Result<(), PipelineError> {
    let out_dir = ensure_out_dir(config)?;
    let mut manifest = new_manifest(config, "measures");
    let micro_path = config.require_micro_csv()?;

    let timer = StageTimer::start("measures");
    let records = read_microdata(open(micro_path)?)?;
    if config.lp.outcomes.iter().any(|o| o == "skill_premium")
        && records.iter().all(|r| r.skill_level.is_none())
    {
        return Err(PipelineError::Config(
            "skill_premium is a configured outcome but no microdata record has skill_level"
                .to_string(),
        ));
    }

    // per-cell batches so domain errors name the country-year they hit
    let mut cells: BTreeMap<(String, i32), Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        cells.entry((r.country.clone(), r.year)).or_default().push(i);
    }
    let mut rows = Vec::new();
    for ((country, year), indices) in cells {
        let cell: Vec<_> = indices.iter().map(|&i| records[i].clone()).collect();
        let cell_rows = compute_measures(&cell).map_err(|e| {
            PipelineError::Data(format!("measures for ({country}, {year}): {e}"))
        })?;
        rows.extend(cell_rows);
    }
    write_measures(create(&out_dir.join("measures_annual.csv"))?, &rows)?;
    manifest.record_output(out_dir, "measures_annual.csv")?;
    timer.stop(&mut manifest);

    let timer = StageTimer::start("interpolate");
    for (method, method_name) in config.measures.interp.methods() {
        let mut store = PanelStore::new();
        for row in &rows {
            store.insert(&row.country, &row.measure, Date::Annual(row.year), row.value)?;
        }
        for variable in store.variables() {
            store.interpolate_annual(&variable, method, config.measures.anchor_quarter)?;
        }
        let file_name = format!("measures_quarterly_{method_name}.csv");
        store.to_csv_writer(create(&out_dir.join(&file_name))?)?;
        manifest.record_output(out_dir, &file_name)?;
    }
    timer.stop(&mut manifest);

    manifest.write_atomic(out_dir)?;
    Ok(())
}

/// Estimates the pooled VAR, identifies it under the configured scheme, and
/// writes the extracted shock series plus search diagnostics.
pub fn cmd_estimate(config: &RunConfig) -> Result<(), PipelineError> {
    let out_dir = ensure_out_dir(config)?;
    let mut manifest = new_manifest(config, "estimate");
    let macro_path = config.require_macro_csv()?;
    let (scheme, focus) = resolve_scheme(config)?;
    check_scheme_variables(&scheme, config)?;

    let timer = StageTimer::start("load");
    let store = PanelStore::from_csv_reader(open(macro_path)?)?;
    let panel = assemble_panel(&store, config)?;
    timer.stop(&mut manifest);

    let timer = StageTimer::start("gibbs");
    let design = build_design(&panel, &config.var)?;
    let posterior = nw_posterior(&design, &config.prior)?;
    let reduced = gibbs_sample(&design, &posterior, &config.gibbs)?;
    timer.stop(&mut manifest);

    let timer = StageTimer::start("identify");
    let result = match identify(&reduced, &scheme, &config.identify) {
        Ok(result) => result,
        Err(IdentError::IdentificationFailed {
            total_draws,
            total_attempts,
        }) => {
            let diagnostics = IdentificationDiagnostics {
                total_draws,
                accepted_draws: 0,
                discarded_draws: total_draws,
                total_attempts,
                acceptance_rate: 0.0,
                draw_acceptance_rate: 0.0,
            };
            write_diagnostics(out_dir, &diagnostics)?;
            manifest.diagnostics = Some(diagnostics);
            manifest.write_atomic(out_dir)?;
            return Err(PipelineError::Estimation(format!(
                "no rotation satisfied the scheme in {total_attempts} attempts \
                 over {total_draws} draws; see {DIAGNOSTICS_NAME}"
            )));
        }
        Err(e) => return Err(e.into()),
    };
    timer.stop(&mut manifest);

    write_diagnostics(out_dir, &result.diagnostics)?;
    manifest.diagnostics = Some(result.diagnostics.clone());
    manifest.record_output(out_dir, DIAGNOSTICS_NAME)?;

    let timer = StageTimer::start("extract");
    let mut panels: Vec<(String, ShockPanel)> = Vec::new();
    for name in &focus {
        let idx = scheme.shock_index(name).map_err(|e| PipelineError::Config(e.to_string()))?;
        let shocks = extract_shocks(&design, &reduced, &result.draws, idx, config.shock_point)?;
        panels.push((name.clone(), shocks));
    }
    let refs: Vec<(String, &ShockPanel)> =
        panels.iter().map(|(name, panel)| (name.clone(), panel)).collect();
    write_shocks_csv(create(&out_dir.join(SHOCKS_NAME))?, &refs)
        .map_err(|e| PipelineError::Data(format!("cannot write {SHOCKS_NAME}: {e}")))?;
    manifest.record_output(out_dir, SHOCKS_NAME)?;
    timer.stop(&mut manifest);

    manifest.write_atomic(out_dir)?;
    Ok(())
}

/// First store that carries `variable` as a series, measures before macro.
fn store_with<'a>(
    variable: &str,
    measures: Option<&'a PanelStore>,
    macro_store: Option<&'a PanelStore>,
) -> Option<&'a PanelStore> {
    [measures, macro_store].into_iter().flatten().find(|store| {
        store.series().any(|(key, _)| key.variable == variable)
    })
}

fn assemble_lp_data(
    config: &RunConfig,
    outcome: &str,
    shock_name: &str,
    shock: &ShockPanel,
    measures: Option<&PanelStore>,
    macro_store: Option<&PanelStore>,
) -> Result<LpData, PipelineError> {
    let outcome_store = store_with(outcome, measures, macro_store).ok_or_else(|| {
        PipelineError::Config(format!(
            "outcome {outcome:?} is in neither the quarterly measures nor the macro panel"
        ))
    })?;

    let control_names: Vec<String> = match &config.lp.controls {
        Some(names) => names.clone(),
        None => {
            let mut names = config.var.variables.clone();
            let has_deepening = macro_store
                .map_or(false, |s| s.series().any(|(key, _)| key.variable == "fin_deepening"));
            if has_deepening {
                names.push("fin_deepening".to_string());
            }
            names
        }
    };
    let uncertainty_names: Vec<String> = if !config.lp.include_uncertainty {
        Vec::new()
    } else {
        match &config.lp.uncertainty {
            Some(names) => names.clone(),
            None => ["wui", "clifs"]
                .iter()
                .filter(|name| store_with(name, measures, macro_store).is_some())
                .map(|name| name.to_string())
                .collect(),
        }
    };

    let mut countries: Vec<String> = shock
        .countries
        .iter()
        .filter(|c| !config.subsample.exclude_countries.contains(c))
        .cloned()
        .collect();
    countries.sort();
    if countries.is_empty() {
        return Err(PipelineError::Data(
            "no countries left after subsample exclusions".to_string(),
        ));
    }

    // span: shock coverage, capped by the subsample, intersected with every
    // outcome/control series
    let mut start = *shock.quarters.first().ok_or_else(|| {
        PipelineError::Data(format!("shock {shock_name:?} has no quarters"))
    })?;
    let mut end = *shock.quarters.last().expect("nonempty checked above");
    if let Some(cap) = config.subsample.end {
        end = end.min(cap);
    }
    let mut needed: Vec<(String, &PanelStore)> = vec![(outcome.to_string(), outcome_store)];
    for name in control_names.iter().chain(&uncertainty_names) {
        if name == outcome || name == shock_name {
            continue;
        }
        let store = store_with(name, measures, macro_store).ok_or_else(|| {
            PipelineError::Config(format!(
                "control {name:?} is in neither the quarterly measures nor the macro panel"
            ))
        })?;
        needed.push((name.clone(), store));
    }
    for (name, store) in &needed {
        let (s, e) = balanced_span(store, &countries, std::slice::from_ref(name))?;
        start = start.max(s);
        end = end.min(e);
    }
    if start > end {
        return Err(PipelineError::Data(format!(
            "no quarter where {outcome:?}, {shock_name:?}, and the controls all overlap"
        )));
    }
    let quarters = start.through(end);
    let (n, t) = (countries.len(), quarters.len());

    // align_balanced sorts countries, and ours are sorted, so rows line up
    let country_refs: Vec<&str> = countries.iter().map(|s| s.as_str()).collect();
    let grab = |name: &str, store: &PanelStore| -> Result<DMatrix<f64>, PipelineError> {
        let ds = store.align_balanced(&country_refs, (start, end), &[name])?;
        Ok(DMatrix::from_fn(n, t, |i, j| ds.value(i, j, 0)))
    };

    let outcome_matrix = grab(outcome, outcome_store)?;
    let shock_matrix = DMatrix::from_fn(n, t, |i, j| {
        let ci = shock
            .countries
            .iter()
            .position(|c| c == &countries[i])
            .expect("countries filtered from the shock panel");
        let qi = (quarters[j].index() - shock.quarters[0].index()) as usize;
        shock.value(ci, qi)
    });

    // own lags of the outcome and the shock always control
    let mut controls: Vec<(String, DMatrix<f64>)> = vec![
        (outcome.to_string(), outcome_matrix.clone()),
        (shock_name.to_string(), shock_matrix.clone()),
    ];
    let mut uncertainty: Vec<(String, DMatrix<f64>)> = Vec::new();
    for (name, store) in &needed[1..] {
        let matrix = grab(name, store)?;
        if uncertainty_names.contains(name) {
            uncertainty.push((name.clone(), matrix));
        } else {
            controls.push((name.clone(), matrix));
        }
    }

    LpData::new(
        countries,
        quarters,
        outcome.to_string(),
        shock_name.to_string(),
        outcome_matrix,
        shock_matrix,
        controls,
        uncertainty,
    )
    .map_err(|e| PipelineError::Data(format!("lp data for {outcome:?} on {shock_name:?}: {e}")))
}

fn write_irf(
    dir: &Path,
    manifest: &mut RunManifest,
    irf: &IrfResult,
) -> Result<(), PipelineError> {
    let stem = format!("irf_{}_{}", irf.outcome, irf.shock);
    let csv_name = format!("{stem}.csv");
    write_irf_csv(create(&dir.join(&csv_name))?, &[irf])
        .map_err(|e| PipelineError::Data(format!("cannot write {csv_name}: {e}")))?;
    manifest.record_output(dir, &csv_name)?;
    let plot_name = format!("{stem}_plot.csv");
    std::fs::write(dir.join(&plot_name), plot::irf_plot_csv(irf))?;
    manifest.record_output(dir, &plot_name)?;
    let svg_name = format!("{stem}.svg");
    std::fs::write(dir.join(&svg_name), plot::irf_svg(irf))?;
    manifest.record_output(dir, &svg_name)?;
    Ok(())
}

/// Projects every configured outcome on every extracted shock and writes one
/// IRF file (plus plot data and an SVG) per pair, or a positive/negative
/// pair per outcome-shock when the signed variant is on.
pub fn cmd_lp(config: &RunConfig) -> Result<(), PipelineError> {
    let out_dir = ensure_out_dir(config)?;
    let mut manifest = new_manifest(config, "lp");
    if config.lp.outcomes.is_empty() {
        return Err(PipelineError::Config("lp.outcomes is empty".to_string()));
    }

    let timer = StageTimer::start("load");
    let shocks_path = out_dir.join(SHOCKS_NAME);
    if !shocks_path.exists() {
        return Err(PipelineError::Data(format!(
            "{} not found; run estimate first",
            shocks_path.display()
        )));
    }
    let shock_panels = read_shocks_csv(open(&shocks_path)?)
        .map_err(|e| PipelineError::Data(format!("cannot read {SHOCKS_NAME}: {e}")))?;
    if shock_panels.is_empty() {
        return Err(PipelineError::Data(format!("{SHOCKS_NAME} holds no shock series")));
    }

    let measures_path =
        out_dir.join(format!("measures_quarterly_{}.csv", config.measures.interp.primary()));
    let measures_store = if measures_path.exists() {
        Some(PanelStore::from_csv_reader(open(&measures_path)?)?)
    } else {
        None
    };
    let macro_store = match &config.paths.macro_csv {
        Some(path) if path.exists() => Some(PanelStore::from_csv_reader(open(path)?)?),
        _ => None,
    };
    timer.stop(&mut manifest);

    let timer = StageTimer::start("project");
    let spec = config.lp.spec();
    for outcome in &config.lp.outcomes {
        for (shock_name, shock_panel) in &shock_panels {
            let data = assemble_lp_data(
                config,
                outcome,
                shock_name,
                shock_panel,
                measures_store.as_ref(),
                macro_store.as_ref(),
            )?;
            let context = |e: crate::lp::LpError| {
                PipelineError::Estimation(format!("lp {outcome:?} on {shock_name:?}: {e}"))
            };
            if config.lp.signed {
                let signed = lp_irf_signed(&data, &spec).map_err(context)?;
                write_irf(out_dir, &mut manifest, &signed.positive)?;
                write_irf(out_dir, &mut manifest, &signed.negative)?;
            } else {
                let irf = lp_irf(&data, &spec).map_err(context)?;
                write_irf(out_dir, &mut manifest, &irf)?;
            }
        }
    }
    timer.stop(&mut manifest);

    manifest.write_atomic(out_dir)?;
    Ok(())
}

/// Point with the largest absolute response; the earliest horizon wins ties.
pub fn peak_point(irf: &IrfResult) -> Option<&IrfPoint> {
    irf.points
        .iter()
        .reduce(|best, p| if p.beta.abs() > best.beta.abs() { p } else { best })
}

/// Least-squares line through the points, `(slope, intercept)`; `None` when
/// fewer than two points or `x` has no variance.
pub fn ols_trend(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

fn list_irf_files(dir: &Path) -> Result<Vec<String>, PipelineError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if name.starts_with("irf_") && name.ends_with(".csv") && !name.ends_with("_plot.csv") {
            out.push(name);
        }
    }
    out.sort();
    Ok(out)
}

/// Summarizes a finished run: peak response per IRF file, and the pooled
/// stock-price level against the total Gini with a fitted trend line.
pub fn cmd_report(config: &RunConfig) -> Result<(), PipelineError> {
    let out_dir = &config.paths.out_dir;
    let mut manifest = new_manifest(config, "report");
    let timer = StageTimer::start("report");

    let measures_name =
        format!("measures_quarterly_{}.csv", config.measures.interp.primary());
    let mut missing = Vec::new();
    if !out_dir.join(SHOCKS_NAME).exists() {
        missing.push(SHOCKS_NAME.to_string());
    }
    if !out_dir.join(&measures_name).exists() {
        missing.push(measures_name.clone());
    }
    let irf_files = if out_dir.is_dir() { list_irf_files(out_dir)? } else { Vec::new() };
    if irf_files.is_empty() {
        missing.push("irf_<outcome>_<shock>.csv (at least one)".to_string());
    }
    if !missing.is_empty() {
        return Err(PipelineError::Data(format!(
            "run directory {} is missing: {}",
            out_dir.display(),
            missing.join(", ")
        )));
    }

    let mut results: Vec<IrfResult> = Vec::new();
    for file in &irf_files {
        let loaded = read_irf_csv(open(&out_dir.join(file))?)
            .map_err(|e| PipelineError::Data(format!("cannot read {file}: {e}")))?;
        results.extend(loaded);
    }
    let mut report = String::new();
    let _ = writeln!(report, "Peak responses (largest |beta| per outcome-shock pair)");
    let _ = writeln!(
        report,
        "{:<24} {:<28} {:>10} {:>8} {:>5}",
        "outcome", "shock", "peak_beta", "horizon", "sign"
    );
    for irf in &results {
        let peak = peak_point(irf).ok_or_else(|| {
            PipelineError::Data(format!("IRF for {} on {} has no points", irf.outcome, irf.shock))
        })?;
        let _ = writeln!(
            report,
            "{:<24} {:<28} {:>10.4} {:>8} {:>5}",
            irf.outcome,
            irf.shock,
            peak.beta,
            peak.horizon,
            if peak.beta >= 0.0 { "+" } else { "-" }
        );
    }

    // pooled scatter of the stock-price level against the total Gini
    let macro_path = config.require_macro_csv()?;
    let macro_store = PanelStore::from_csv_reader(open(macro_path)?)?;
    let measures_store = PanelStore::from_csv_reader(open(&out_dir.join(&measures_name))?)?;
    let mut scatter: Vec<(String, Quarter, f64, f64)> = Vec::new();
    for (key, data) in macro_store.series() {
        if key.variable != "stock_prices" {
            continue;
        }
        let SeriesData::Quarterly(xs) = data else { continue };
        let Some(SeriesData::Quarterly(ys)) = measures_store.get(&key.country, "gini_total")
        else {
            continue;
        };
        for (q, x) in xs {
            if let Some(y) = ys.get(q) {
                scatter.push((key.country.clone(), *q, *x, *y));
            }
        }
    }
    if scatter.is_empty() {
        return Err(PipelineError::Data(
            "no overlapping coverage between stock_prices and gini_total".to_string(),
        ));
    }
    let xy: Vec<(f64, f64)> = scatter.iter().map(|(_, _, x, y)| (*x, *y)).collect();
    let (slope, intercept) = ols_trend(&xy).ok_or_else(|| {
        PipelineError::Data("scatter trend needs at least two distinct stock-price values".into())
    })?;
    let _ = writeln!(report, "\nTrend of gini_total on stock_prices (pooled OLS)");
    let _ = writeln!(report, "slope = {slope}, intercept = {intercept}, points = {}", xy.len());

    let mut scatter_csv = String::from("country,date,stock_prices,gini_total\n");
    for (country, quarter, x, y) in &scatter {
        let _ = writeln!(scatter_csv, "{country},{quarter},{x},{y}");
    }
    std::fs::write(out_dir.join("scatter.csv"), scatter_csv)?;
    manifest.record_output(out_dir, "scatter.csv")?;
    std::fs::write(
        out_dir.join("trend.csv"),
        format!("slope,intercept,n_points\n{slope},{intercept},{}\n", xy.len()),
    )?;
    manifest.record_output(out_dir, "trend.csv")?;
    std::fs::write(
        out_dir.join("scatter.svg"),
        plot::scatter_svg(
            "gini_total against stock_prices",
            "stock_prices",
            "gini_total",
            &xy,
            slope,
            intercept,
        ),
    )?;
    manifest.record_output(out_dir, "scatter.svg")?;
    std::fs::write(out_dir.join("report.txt"), report)?;
    manifest.record_output(out_dir, "report.txt")?;

    timer.stop(&mut manifest);
    manifest.write_atomic(out_dir)?;
    Ok(())
}

/// Ground truth written beside synthetic data so estimates can be verified.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimTruth {
    pub scheme: String,
    pub shock_names: Vec<String>,
    /// Shock the synthetic outcome loads on.
    pub focus_shock: String,
    /// Panel variable carrying the synthetic outcome.
    pub outcome_variable: String,
    /// True impact matrix, by rows.
    pub impact: Vec<Vec<f64>>,
    /// True lag matrices `B_1..B_p`, each by rows.
    pub lag_matrices: Vec<Vec<Vec<f64>>>,
    pub theta_pos: Vec<f64>,
    pub theta_neg: Vec<f64>,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

// splitmix64 step: spreads cell indices into well-separated RNG seeds
fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed.wrapping_add(salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub const SYNTHETIC_OUTCOME: &str = "y_synthetic";

/// Simulates a panel with known structural shocks, a synthetic outcome with
/// asymmetric loadings on the focus shock, and survey microdata, writing
/// `panel.csv`, `true_shocks.csv`, `microdata.csv`, and `truth.json`.
pub fn cmd_simulate(config: &RunConfig) -> Result<(), PipelineError> {
    let out_dir = ensure_out_dir(config)?;
    let mut manifest = new_manifest(config, "simulate");
    let (scheme, focus) = resolve_scheme(config)?;
    check_scheme_variables(&scheme, config)?;
    let sim = &config.simulate;
    let seed = config.gibbs.seed;

    let timer = StageTimer::start("panel");
    let impact = make_sign_separated_impact(&scheme, seed)?;
    let mut spec = DgpSpec::random_stable(
        sim.countries,
        sim.quarters,
        scheme.k(),
        sim.lags,
        sim.radius,
        impact,
        seed,
    )?;
    spec.variables = config.var.variables.clone();
    let (panel, true_shocks) = simulate_var_panel(&spec);

    let focus_name = focus[0].clone();
    let focus_idx =
        scheme.shock_index(&focus_name).map_err(|e| PipelineError::Config(e.to_string()))?;
    let outcome_spec = AsymmetricOutcomeSpec::new(
        sim.theta_pos.clone(),
        sim.theta_neg.clone(),
        sim.outcome_noise,
        seed,
    )?;
    let (outcome_quarters, outcome) = simulate_outcome(&true_shocks[focus_idx], &outcome_spec)?;

    let mut store = PanelStore::new();
    for (ci, country) in panel.countries().iter().enumerate() {
        for (ki, variable) in panel.variables().iter().enumerate() {
            for (ti, q) in panel.quarters().iter().enumerate() {
                store.insert(country, variable, Date::Quarterly(*q), panel.value(ci, ti, ki))?;
            }
        }
        for (ti, q) in outcome_quarters.iter().enumerate() {
            store.insert(country, SYNTHETIC_OUTCOME, Date::Quarterly(*q), outcome[(ci, ti)])?;
        }
    }
    store.to_csv_writer(create(&out_dir.join("panel.csv"))?)?;
    manifest.record_output(out_dir, "panel.csv")?;

    let named: Vec<(String, &ShockPanel)> =
        scheme.shocks().iter().cloned().zip(true_shocks.iter()).collect();
    write_shocks_csv(create(&out_dir.join("true_shocks.csv"))?, &named)
        .map_err(|e| PipelineError::Data(format!("cannot write true_shocks.csv: {e}")))?;
    manifest.record_output(out_dir, "true_shocks.csv")?;
    timer.stop(&mut manifest);

    let timer = StageTimer::start("microdata");
    let mut records = Vec::new();
    for (ci, country) in panel.countries().iter().enumerate() {
        for (yi, year) in sim.micro_years.iter().enumerate() {
            let params = MicrodataParams {
                households: sim.micro_households,
                country: country.clone(),
                year: *year,
                mu: 10.0,
                sigma: sim.micro_sigma,
                size_weights: vec![0.35, 0.35, 0.2, 0.1],
                fin_participation: 0.5,
                fin_mu: 9.0,
                fin_sigma: 1.0,
                skill_premium_log: 0.4,
                high_skill_share: 0.35,
            };
            let cell = (ci * sim.micro_years.len() + yi) as u64 + 1;
            records.extend(simulate_microdata(&params, mix_seed(seed, cell))?);
        }
    }
    write_microdata(create(&out_dir.join("microdata.csv"))?, &records)?;
    manifest.record_output(out_dir, "microdata.csv")?;
    timer.stop(&mut manifest);

    let truth = SimTruth {
        scheme: config.scheme.clone(),
        shock_names: scheme.shocks().to_vec(),
        focus_shock: focus_name,
        outcome_variable: SYNTHETIC_OUTCOME.to_string(),
        impact: matrix_rows(&spec.impact),
        lag_matrices: spec.lag_mats.iter().map(matrix_rows).collect(),
        theta_pos: sim.theta_pos.clone(),
        theta_neg: sim.theta_neg.clone(),
    };
    let json = serde_json::to_string_pretty(&truth)
        .map_err(|e| PipelineError::Data(format!("cannot serialize truth: {e}")))?;
    std::fs::write(out_dir.join("truth.json"), json + "\n")?;
    manifest.record_output(out_dir, "truth.json")?;

    manifest.write_atomic(out_dir)?;
    Ok(())
}
