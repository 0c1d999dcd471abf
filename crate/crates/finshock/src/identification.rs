//! Structural identification of reduced-form VAR draws.
//!
//! A reduced draw's innovation covariance `Sigma` admits impact matrices
//! `A = chol(Sigma) Q` for any orthogonal `Q`; candidate rotations are drawn
//! Haar-uniformly (QR of a standard normal matrix with the R diagonal
//! normalized positive) and kept when every shock column matches its sign
//! pattern strictly. Schemes that permit it may flip a whole column to
//! satisfy its pattern; schemes that identify paired positive/negative
//! shocks must not, since a flip would relabel the pair.
//!
//! Structural shocks follow by solving `A eps_t = u_t` per draw; the point
//! series is the pointwise median (or mean) across accepted draws,
//! standardized to unit pooled standard deviation.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvar::{reduced_residuals, Design, ReducedDraw};
use crate::dates::Quarter;
use crate::stats::{mean, median, sample_sd};

#[derive(Debug, Error)]
pub enum IdentError {
    #[error("scheme has {variables} variables but {rows} sign rows")]
    ShapeMismatch { variables: usize, rows: usize },
    #[error("scheme row {row} has {cols} entries, expected {shocks}")]
    RowWidth { row: usize, cols: usize, shocks: usize },
    #[error("duplicate {kind} name {name:?}")]
    DuplicateName { kind: &'static str, name: String },
    #[error("shock column {name:?} has no restriction and is not marked residual")]
    UnrestrictedColumn { name: String },
    #[error("unknown scheme {0:?}")]
    UnknownScheme(String),
    #[error("unknown sign token {token:?} (expected \"+\", \"-\", or \".\")")]
    BadSignToken { token: String },
    #[error("no rotation satisfied the scheme for any of {total_draws} draws ({total_attempts} attempts)")]
    IdentificationFailed {
        total_draws: usize,
        total_attempts: usize,
    },
    #[error("shock {0:?} not in scheme")]
    UnknownShock(String),
    #[error("variable {0:?} not in scheme")]
    UnknownVariable(String),
    #[error("covariance draw {draw_id} is not positive definite")]
    BadCovariance { draw_id: usize },
    #[error("all impact matrices were singular; no shocks extracted")]
    AllSingular,
    #[error("structural draw set is empty")]
    NoDraws,
}

/// One cell of a restriction table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Restriction {
    Positive,
    Negative,
    Unrestricted,
}

impl Restriction {
    fn parse(token: &str) -> Result<Self, IdentError> {
        match token {
            "+" => Ok(Restriction::Positive),
            "-" => Ok(Restriction::Negative),
            "." => Ok(Restriction::Unrestricted),
            other => Err(IdentError::BadSignToken {
                token: other.to_string(),
            }),
        }
    }

    fn token(&self) -> &'static str {
        match self {
            Restriction::Positive => "+",
            Restriction::Negative => "-",
            Restriction::Unrestricted => ".",
        }
    }

    fn matches(&self, value: f64) -> bool {
        match self {
            Restriction::Positive => value > 0.0,
            Restriction::Negative => value < 0.0,
            Restriction::Unrestricted => true,
        }
    }

    fn negated(&self) -> Self {
        match self {
            Restriction::Positive => Restriction::Negative,
            Restriction::Negative => Restriction::Positive,
            Restriction::Unrestricted => Restriction::Unrestricted,
        }
    }
}

/// Sign restriction table: rows are variables, columns are shocks.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictionScheme {
    variables: Vec<String>,
    shocks: Vec<String>,
    signs: Vec<Vec<Restriction>>,
    flip_allowed: bool,
}

#[derive(Serialize, Deserialize)]
struct SchemeJson {
    variables: Vec<String>,
    shocks: Vec<String>,
    signs: Vec<Vec<String>>,
    #[serde(default = "default_flip")]
    flip_allowed: bool,
}

fn default_flip() -> bool {
    true
}

impl RestrictionScheme {
    /// Validates and builds a scheme. Every shock column needs at least one
    /// restriction unless its name contains `residual`; duplicated variable
    /// or shock names are rejected, which is also what rules out a
    /// contradictory table built from one column repeated with flipped signs.
    pub fn new(
        variables: Vec<String>,
        shocks: Vec<String>,
        signs: Vec<Vec<Restriction>>,
        flip_allowed: bool,
    ) -> Result<Self, IdentError> {
        if signs.len() != variables.len() {
            return Err(IdentError::ShapeMismatch {
                variables: variables.len(),
                rows: signs.len(),
            });
        }
        for (row, r) in signs.iter().enumerate() {
            if r.len() != shocks.len() {
                return Err(IdentError::RowWidth {
                    row,
                    cols: r.len(),
                    shocks: shocks.len(),
                });
            }
        }
        for (kind, names) in [("variable", &variables), ("shock", &shocks)] {
            let mut seen = std::collections::BTreeSet::new();
            for name in names {
                if !seen.insert(name) {
                    return Err(IdentError::DuplicateName {
                        kind,
                        name: name.clone(),
                    });
                }
            }
        }
        for (j, shock) in shocks.iter().enumerate() {
            let restricted = signs.iter().any(|row| row[j] != Restriction::Unrestricted);
            if !restricted && !shock.to_lowercase().contains("residual") {
                return Err(IdentError::UnrestrictedColumn {
                    name: shock.clone(),
                });
            }
        }
        Ok(RestrictionScheme {
            variables,
            shocks,
            signs,
            flip_allowed,
        })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn shocks(&self) -> &[String] {
        &self.shocks
    }

    pub fn k(&self) -> usize {
        self.variables.len()
    }

    pub fn flip_allowed(&self) -> bool {
        self.flip_allowed
    }

    pub fn sign(&self, variable: usize, shock: usize) -> Restriction {
        self.signs[variable][shock]
    }

    pub fn shock_index(&self, shock: &str) -> Result<usize, IdentError> {
        self.shocks
            .iter()
            .position(|s| s == shock)
            .ok_or_else(|| IdentError::UnknownShock(shock.to_string()))
    }

    /// Returns a copy with one cell set to unrestricted.
    pub fn relaxed(&self, variable: usize, shock: usize) -> RestrictionScheme {
        let mut signs = self.signs.clone();
        signs[variable][shock] = Restriction::Unrestricted;
        RestrictionScheme {
            variables: self.variables.clone(),
            shocks: self.shocks.clone(),
            signs,
            flip_allowed: self.flip_allowed,
        }
    }

    pub fn from_json(json: &str) -> Result<Self, IdentError> {
        let raw: SchemeJson = serde_json::from_str(json)
            .map_err(|e| IdentError::BadSignToken { token: e.to_string() })?;
        let signs = raw
            .signs
            .iter()
            .map(|row| row.iter().map(|t| Restriction::parse(t)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        RestrictionScheme::new(raw.variables, raw.shocks, signs, raw.flip_allowed)
    }

    pub fn to_json(&self) -> String {
        let raw = SchemeJson {
            variables: self.variables.clone(),
            shocks: self.shocks.clone(),
            signs: self
                .signs
                .iter()
                .map(|row| row.iter().map(|r| r.token().to_string()).collect())
                .collect(),
            flip_allowed: self.flip_allowed,
        };
        serde_json::to_string_pretty(&raw).expect("scheme serializes")
    }
}

/// Names of the built-in schemes.
pub const SCHEME_NAMES: [&str; 4] = ["baseline", "credit", "volatility_signed", "demand_focus"];

fn parse_table(
    variables: &[&str],
    shocks: &[&str],
    rows: &[&str],
    flip_allowed: bool,
) -> RestrictionScheme {
    let signs = rows
        .iter()
        .map(|row| {
            row.split_whitespace()
                .map(|t| Restriction::parse(t).expect("built-in table token"))
                .collect()
        })
        .collect();
    RestrictionScheme::new(
        variables.iter().map(|s| s.to_string()).collect(),
        shocks.iter().map(|s| s.to_string()).collect(),
        signs,
        flip_allowed,
    )
    .expect("built-in table is valid")
}

/// Returns a built-in restriction scheme by name.
///
/// `baseline` identifies supply, demand, monetary, investment, and financial
/// shocks on the five-variable system; `credit` appends a credit-to-stock
/// ratio row and a credit shock; `volatility_signed` splits the financial
/// shock into signed halves distinguished by a volatility row and therefore
/// forbids column flips; `demand_focus` reuses the baseline table (the
/// demand column is the one extracted downstream).
pub fn scheme(name: &str) -> Result<RestrictionScheme, IdentError> {
    let base_vars = ["gdp", "prices", "interest_rate", "inv_output", "stock_prices"];
    let base_shocks = ["supply", "demand", "monetary", "investment", "financial"];
    #[rustfmt::skip]
    let base_rows = [
        // supply demand monetary investment financial
        "+ + + + +", // gdp
        "- + + + +", // prices
        ". + - + +", // interest rate
        ". - . + +", // investment over output
        "+ . . - +", // stock prices
    ];
    match name {
        "baseline" | "demand_focus" => Ok(parse_table(&base_vars, &base_shocks, &base_rows, true)),
        "credit" => {
            #[rustfmt::skip]
            let rows = [
                // supply demand monetary investment financial credit
                "+ + + + + +", // gdp
                "- + + + + +", // prices
                ". + - + + +", // interest rate
                ". - . + + +", // investment over output
                "+ . . - + +", // stock prices
                ". . . . - +", // credit over stock prices
            ];
            Ok(parse_table(
                &["gdp", "prices", "interest_rate", "inv_output", "stock_prices", "credit_stock"],
                &["supply", "demand", "monetary", "investment", "financial", "credit"],
                &rows,
                true,
            ))
        }
        "volatility_signed" => {
            #[rustfmt::skip]
            let rows = [
                // supply demand monetary investment fin_pos fin_neg
                "+ + + + + -", // gdp
                "- + + + + -", // prices
                ". + - + + -", // interest rate
                ". - . + + -", // investment over output
                "+ . . - + -", // stock prices
                ". . . . + +", // stock price volatility
            ];
            Ok(parse_table(
                &["gdp", "prices", "interest_rate", "inv_output", "stock_prices", "volatility"],
                &[
                    "supply",
                    "demand",
                    "monetary",
                    "investment",
                    "financial_positive",
                    "financial_negative",
                ],
                &rows,
                false,
            ))
        }
        other => Err(IdentError::UnknownScheme(other.to_string())),
    }
}

/// The shocks a named scheme is built to study.
pub fn default_focus(name: &str) -> Result<Vec<String>, IdentError> {
    match name {
        "baseline" | "credit" => Ok(vec!["financial".to_string()]),
        "demand_focus" => Ok(vec!["demand".to_string()]),
        "volatility_signed" => Ok(vec![
            "financial_positive".to_string(),
            "financial_negative".to_string(),
        ]),
        other => Err(IdentError::UnknownScheme(other.to_string())),
    }
}

/// Haar-uniform orthogonal matrix: QR of an iid standard normal matrix with
/// the R diagonal normalized positive. `k = 1` returns the identity, the
/// lone rotation once the sign convention is fixed.
pub fn draw_rotation<R: Rng>(k: usize, rng: &mut R) -> DMatrix<f64> {
    loop {
        let g = DMatrix::<f64>::from_fn(k, k, |_, _| rng.sample(StandardNormal));
        if k == 1 {
            return DMatrix::identity(1, 1);
        }
        let qr = g.qr();
        let r = qr.r();
        if (0..k).any(|i| r[(i, i)] == 0.0) {
            // degenerate draw: resample
            continue;
        }
        let mut q = qr.q();
        for j in 0..k {
            if r[(j, j)] < 0.0 {
                for i in 0..k {
                    q[(i, j)] = -q[(i, j)];
                }
            }
        }
        return q;
    }
}

/// Per-column flips (if any) under which `a` satisfies the scheme. `None`
/// when some column fails both orientations, or fails directly while flips
/// are forbidden.
fn column_flips(a: &DMatrix<f64>, scheme: &RestrictionScheme) -> Option<Vec<bool>> {
    let k = scheme.k();
    let mut flips = vec![false; k];
    for j in 0..k {
        let direct = (0..k).all(|i| scheme.sign(i, j).matches(a[(i, j)]));
        if direct {
            continue;
        }
        if !scheme.flip_allowed {
            return None;
        }
        let flipped = (0..k).all(|i| scheme.sign(i, j).negated().matches(a[(i, j)]));
        if flipped {
            flips[j] = true;
        } else {
            return None;
        }
    }
    Some(flips)
}

/// Whether the impact matrix satisfies every column's sign pattern, allowing
/// whole-column flips when the scheme permits them.
pub fn satisfies(a: &DMatrix<f64>, scheme: &RestrictionScheme) -> bool {
    column_flips(a, scheme).is_some()
}

/// One accepted structural draw.
#[derive(Debug, Clone)]
pub struct StructuralDraw {
    /// Index of the parent reduced-form draw.
    pub draw_id: usize,
    /// Accepted rotation, flips already applied.
    pub rotation: DMatrix<f64>,
    /// Impact matrix `chol(Sigma) * rotation`; satisfies the scheme directly.
    pub impact: DMatrix<f64>,
    /// Rotation attempts spent on this draw (including the accepted one).
    pub attempts: usize,
}

/// Search diagnostics across all reduced draws.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IdentificationDiagnostics {
    pub total_draws: usize,
    pub accepted_draws: usize,
    pub discarded_draws: usize,
    pub total_attempts: usize,
    /// Accepted rotations over rotation attempts.
    pub acceptance_rate: f64,
    /// Accepted draws over reduced draws.
    pub draw_acceptance_rate: f64,
}

#[derive(Debug, Clone)]
pub struct IdentificationResult {
    pub draws: Vec<StructuralDraw>,
    pub diagnostics: IdentificationDiagnostics,
}

/// Rotation search settings. Each reduced draw searches an independent,
/// seed-derived rotation stream, so results do not depend on thread count.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct IdentifyConfig {
    pub max_attempts: usize,
    pub seed: u64,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        IdentifyConfig {
            max_attempts: 1000,
            seed: 0,
        }
    }
}

/// Searches rotations for every reduced draw and keeps those whose impact
/// matrix satisfies the scheme. Draws exhausting `max_attempts` are
/// discarded; identification fails only if nothing is accepted at all.
pub fn identify(
    reduced: &[ReducedDraw],
    scheme: &RestrictionScheme,
    config: &IdentifyConfig,
) -> Result<IdentificationResult, IdentError> {
    if reduced.is_empty() {
        return Err(IdentError::NoDraws);
    }
    let k = scheme.k();
    let outcomes: Vec<(Option<StructuralDraw>, usize)> = reduced
        .par_iter()
        .enumerate()
        .map(|(draw_id, draw)| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(draw_id as u64 + 1);
            let chol = match draw.sigma.clone().cholesky() {
                Some(c) => c.l(),
                None => {
                    log::warn!("draw {draw_id}: covariance not positive definite, skipped");
                    return (None, 0);
                }
            };
            for attempt in 1..=config.max_attempts {
                let q = draw_rotation(k, &mut rng);
                let mut a = &chol * &q;
                if let Some(flips) = column_flips(&a, scheme) {
                    let mut rotation = q;
                    for (j, flip) in flips.iter().enumerate() {
                        if *flip {
                            for i in 0..k {
                                a[(i, j)] = -a[(i, j)];
                                rotation[(i, j)] = -rotation[(i, j)];
                            }
                        }
                    }
                    return (
                        Some(StructuralDraw {
                            draw_id,
                            rotation,
                            impact: a,
                            attempts: attempt,
                        }),
                        attempt,
                    );
                }
            }
            (None, config.max_attempts)
        })
        .collect();

    let total_attempts: usize = outcomes.iter().map(|(_, n)| n).sum();
    let draws: Vec<StructuralDraw> = outcomes.into_iter().filter_map(|(d, _)| d).collect();
    let diagnostics = IdentificationDiagnostics {
        total_draws: reduced.len(),
        accepted_draws: draws.len(),
        discarded_draws: reduced.len() - draws.len(),
        total_attempts,
        acceptance_rate: draws.len() as f64 / total_attempts.max(1) as f64,
        draw_acceptance_rate: draws.len() as f64 / reduced.len() as f64,
    };
    if draws.is_empty() {
        return Err(IdentError::IdentificationFailed {
            total_draws: diagnostics.total_draws,
            total_attempts: diagnostics.total_attempts,
        });
    }
    Ok(IdentificationResult { draws, diagnostics })
}

/// Recursive (Cholesky) identification under a variable ordering.
///
/// `order[a]` is the original index of the variable placed at position `a`.
/// The returned impact matrix is expressed in the original variable order
/// (rows) with shocks in the permuted order (columns); it is lower
/// triangular after permuting rows back to `order`, so the last-ordered
/// variable's shock moves only that variable on impact.
pub fn cholesky_identify(sigma: &DMatrix<f64>, order: &[usize]) -> Result<DMatrix<f64>, IdentError> {
    let k = sigma.nrows();
    assert_eq!(order.len(), k, "ordering must cover every variable");
    let mut perm = DMatrix::zeros(k, k);
    for (pos, &orig) in order.iter().enumerate() {
        for (pos2, &orig2) in order.iter().enumerate() {
            perm[(pos, pos2)] = sigma[(orig, orig2)];
        }
    }
    let l = perm
        .cholesky()
        .ok_or(IdentError::BadCovariance { draw_id: 0 })?
        .l();
    let mut a = DMatrix::zeros(k, k);
    for (pos, &orig) in order.iter().enumerate() {
        for j in 0..k {
            a[(orig, j)] = l[(pos, j)];
        }
    }
    Ok(a)
}

/// Ordering that keeps the panel's variable order but moves `last` to the
/// final position.
pub fn ordering_with_last(variables: &[String], last: &str) -> Result<Vec<usize>, IdentError> {
    let last_idx = variables
        .iter()
        .position(|v| v == last)
        .ok_or_else(|| IdentError::UnknownVariable(last.to_string()))?;
    let mut order: Vec<usize> = (0..variables.len()).filter(|i| *i != last_idx).collect();
    order.push(last_idx);
    Ok(order)
}

/// Point estimate across accepted draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointEstimate {
    Median,
    Mean,
}

/// One shock's panel of values: `countries x quarters`.
#[derive(Debug, Clone)]
pub struct ShockPanel {
    pub countries: Vec<String>,
    pub quarters: Vec<Quarter>,
    /// Row-major `[country][quarter]`.
    pub values: Vec<f64>,
}

impl ShockPanel {
    pub fn value(&self, country: usize, quarter: usize) -> f64 {
        self.values[country * self.quarters.len() + quarter]
    }

    pub fn series(&self, country: usize) -> &[f64] {
        &self.values[country * self.quarters.len()..(country + 1) * self.quarters.len()]
    }
}

/// Extracts one named shock from the accepted draws.
///
/// Per draw `d`, `eps_t = A_d^{-1} u_t^{(d)}` with `u^{(d)}` the parent
/// draw's reduced-form residuals; the point series is the pointwise median
/// (or mean) across draws, then standardized to zero pooled mean and unit
/// pooled standard deviation. Draws whose impact matrix is singular are
/// skipped with a warning.
pub fn extract_shocks(
    design: &Design,
    reduced: &[ReducedDraw],
    structural: &[StructuralDraw],
    shock: usize,
    point: PointEstimate,
) -> Result<ShockPanel, IdentError> {
    if structural.is_empty() {
        return Err(IdentError::NoDraws);
    }
    let n = design.n_countries();
    let t = design.t_effective();
    let cells = n * t;
    let per_draw: Vec<Option<Vec<f64>>> = structural
        .par_iter()
        .map(|sd| {
            let lu = sd.impact.clone().lu();
            let resid = reduced_residuals(design, &reduced[sd.draw_id].coefficients);
            let k = design.k();
            let mut series = Vec::with_capacity(cells);
            for c in 0..n {
                for time in 0..t {
                    let u = nalgebra::DVector::from_fn(k, |i, _| resid.value(c, time, i));
                    match lu.solve(&u) {
                        Some(eps) => series.push(eps[shock]),
                        None => {
                            log::warn!(
                                "draw {}: singular impact matrix, skipped in extraction",
                                sd.draw_id
                            );
                            return None;
                        }
                    }
                }
            }
            Some(series)
        })
        .collect();
    let kept: Vec<&Vec<f64>> = per_draw.iter().flatten().collect();
    if kept.is_empty() {
        return Err(IdentError::AllSingular);
    }
    let mut values = Vec::with_capacity(cells);
    let mut buffer = Vec::with_capacity(kept.len());
    for cell in 0..cells {
        buffer.clear();
        buffer.extend(kept.iter().map(|s| s[cell]));
        values.push(match point {
            PointEstimate::Median => median(&buffer),
            PointEstimate::Mean => mean(&buffer),
        });
    }
    let m = mean(&values);
    let sd = sample_sd(&values);
    for v in &mut values {
        *v = (*v - m) / sd;
    }
    Ok(ShockPanel {
        countries: design.countries.clone(),
        quarters: design.quarters.clone(),
        values,
    })
}

/// Writes shock panels as `country,date,shock,value` rows, shocks in the
/// given order, countries and dates ascending within each shock.
pub fn write_shocks_csv<W: std::io::Write>(
    writer: W,
    panels: &[(String, &ShockPanel)],
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["country", "date", "shock", "value"])?;
    for (name, panel) in panels {
        for (c, country) in panel.countries.iter().enumerate() {
            for (t, quarter) in panel.quarters.iter().enumerate() {
                w.write_record([
                    country,
                    &quarter.to_string(),
                    name,
                    &panel.value(c, t).to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads shock panels from `country,date,shock,value` rows.
pub fn read_shocks_csv<R: std::io::Read>(
    reader: R,
) -> Result<Vec<(String, ShockPanel)>, Box<dyn std::error::Error>> {
    use std::collections::BTreeMap;
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut cells: BTreeMap<String, BTreeMap<(String, Quarter), f64>> = BTreeMap::new();
    for record in csv_reader.records() {
        let record = record?;
        let country = record.get(0).unwrap_or_default().to_string();
        let quarter: Quarter = record.get(1).unwrap_or_default().parse()?;
        let shock = record.get(2).unwrap_or_default().to_string();
        let value: f64 = record.get(3).unwrap_or_default().parse()?;
        cells.entry(shock).or_default().insert((country, quarter), value);
    }
    let mut out = Vec::new();
    for (shock, map) in cells {
        let mut countries: Vec<String> = map.keys().map(|(c, _)| c.clone()).collect();
        countries.sort();
        countries.dedup();
        let mut quarters: Vec<Quarter> = map.keys().map(|(_, q)| *q).collect();
        quarters.sort();
        quarters.dedup();
        let mut values = Vec::with_capacity(countries.len() * quarters.len());
        for c in &countries {
            for q in &quarters {
                let v = map.get(&(c.clone(), *q)).copied().ok_or_else(|| {
                    format!("shock {shock}: missing cell ({c}, {q})")
                })?;
                values.push(v);
            }
        }
        out.push((
            shock,
            ShockPanel {
                countries,
                quarters,
                values,
            },
        ));
    }
    Ok(out)
}
