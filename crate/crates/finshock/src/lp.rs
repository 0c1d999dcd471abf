//! Panel local projections with Driscoll-Kraay inference.
//!
//! Impulse responses are estimated horizon by horizon: the outcome led `h`
//! periods is regressed on the shock at `t` plus lagged controls, pooled
//! over countries. Country and time effects are absorbed by transformation
//! rather than dummies: outcome and controls are double demeaned
//! (`x + x_bar - x_bar_i - x_bar_t`), the shock is time demeaned only.
//! Standard errors cluster on the date through cross-sectional moment sums
//! with a Bartlett kernel over dates.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dates::Quarter;

/// 68% normal band half-width in standard errors.
pub const Z68: f64 = 0.9945;
/// 90% normal band half-width in standard errors.
pub const Z90: f64 = 1.6449;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("panel {name:?} has {len} values, expected {expected}")]
    LengthMismatch {
        name: String,
        len: usize,
        expected: usize,
    },
    #[error("lag order must be at least 1")]
    ZeroLags,
    #[error("horizon {horizon}: window is empty ({t} periods, {lags} lags, {reach} horizon reach)")]
    EmptyWindow {
        horizon: usize,
        t: usize,
        lags: usize,
        reach: usize,
    },
    #[error("horizon {horizon}: {rows} observations cannot support {cols} regressors")]
    TooFewRows {
        horizon: usize,
        rows: usize,
        cols: usize,
    },
    #[error("regressors collinear: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("{dates} date(s) cannot support HAC inference (need at least 2)")]
    TooFewDates { dates: usize },
    #[error("{dates} dates cannot support {k} regressors under the finite-sample scaling")]
    InsufficientDof { dates: usize, k: usize },
    #[error("shock series has no {sign} values; the sign-split regression is degenerate")]
    DegenerateSign { sign: &'static str },
    #[error("horizon {horizon}: {source}")]
    AtHorizon {
        horizon: usize,
        #[source]
        source: Box<LpError>,
    },
}

/// Bandwidth rule for the Bartlett kernel at horizon `h` with lag order `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum HacRule {
    #[serde(rename = "h_plus_1")]
    #[value(name = "h_plus_1")]
    HPlus1,
    #[serde(rename = "p_plus_1")]
    #[value(name = "p_plus_1")]
    PPlus1,
    #[serde(rename = "p_plus_h_plus_1")]
    #[value(name = "p_plus_h_plus_1")]
    PPlusHPlus1,
}

impl HacRule {
    pub fn bandwidth(&self, h: usize, p: usize) -> usize {
        match self {
            HacRule::HPlus1 => h + 1,
            HacRule::PPlus1 => p + 1,
            HacRule::PPlusHPlus1 => p + h + 1,
        }
    }
}

/// Projection settings shared across horizons.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LpSpec {
    /// Largest horizon; regressions run for `h` in `0..=horizons`.
    pub horizons: usize,
    /// Control lag order; controls enter at lags `1..=lags`, uncertainty
    /// variables at lags `0..=lags`.
    pub lags: usize,
    pub hac_rule: HacRule,
    /// Whether the uncertainty panels enter the regressions at all.
    pub include_uncertainty: bool,
    /// Estimate every horizon on the largest-horizon window instead of the
    /// maximal admissible window per horizon.
    pub fixed_window: bool,
}

impl Default for LpSpec {
    fn default() -> Self {
        LpSpec {
            horizons: 20,
            lags: 4,
            hac_rule: HacRule::HPlus1,
            include_uncertainty: true,
            fixed_window: false,
        }
    }
}

/// Balanced panels feeding the projections. Matrices are countries by
/// periods, all on the same axes.
#[derive(Debug, Clone)]
pub struct LpData {
    pub countries: Vec<String>,
    pub quarters: Vec<Quarter>,
    pub outcome_name: String,
    pub shock_name: String,
    pub outcome: DMatrix<f64>,
    pub shock: DMatrix<f64>,
    /// Named control panels, each entering at lags `1..=p`. Callers decide
    /// the set; lagged outcome and shock panels belong here if wanted.
    pub controls: Vec<(String, DMatrix<f64>)>,
    /// Named uncertainty panels, each entering at lags `0..=p` when the
    /// spec includes them.
    pub uncertainty: Vec<(String, DMatrix<f64>)>,
}

impl LpData {
    pub fn new(
        countries: Vec<String>,
        quarters: Vec<Quarter>,
        outcome_name: String,
        shock_name: String,
        outcome: DMatrix<f64>,
        shock: DMatrix<f64>,
        controls: Vec<(String, DMatrix<f64>)>,
        uncertainty: Vec<(String, DMatrix<f64>)>,
    ) -> Result<Self, LpError> {
        let n = countries.len();
        let t = quarters.len();
        let check = |name: &str, m: &DMatrix<f64>| -> Result<(), LpError> {
            if m.nrows() != n || m.ncols() != t {
                return Err(LpError::LengthMismatch {
                    name: name.to_string(),
                    len: m.nrows() * m.ncols(),
                    expected: n * t,
                });
            }
            Ok(())
        };
        check(&outcome_name, &outcome)?;
        check(&shock_name, &shock)?;
        for (name, m) in controls.iter().chain(uncertainty.iter()) {
            check(name, m)?;
        }
        Ok(LpData {
            countries,
            quarters,
            outcome_name,
            shock_name,
            outcome,
            shock,
            controls,
            uncertainty,
        })
    }

    pub fn n(&self) -> usize {
        self.countries.len()
    }

    pub fn t(&self) -> usize {
        self.quarters.len()
    }
}

/// Removes country means, time means, and adds back the grand mean:
/// `x + x_bar - x_bar_i - x_bar_t` per cell. Output row and column means
/// are zero.
pub fn double_demean(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, t) = (x.nrows(), x.ncols());
    let grand = x.sum() / (n * t) as f64;
    let row_means: Vec<f64> = (0..n).map(|i| x.row(i).sum() / t as f64).collect();
    let col_means: Vec<f64> = (0..t).map(|j| x.column(j).sum() / n as f64).collect();
    DMatrix::from_fn(n, t, |i, j| x[(i, j)] + grand - row_means[i] - col_means[j])
}

/// Removes the cross-sectional mean at each date; country means stay in.
pub fn demean_shock(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, t) = (x.nrows(), x.ncols());
    let col_means: Vec<f64> = (0..t).map(|j| x.column(j).sum() / n as f64).collect();
    DMatrix::from_fn(n, t, |i, j| x[(i, j)] - col_means[j])
}

/// Removes each row's own mean; the single-unit analogue of the within
/// transformation, where cross-sectional demeaning would annihilate the
/// data.
fn demean_rows(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, t) = (x.nrows(), x.ncols());
    let row_means: Vec<f64> = (0..n).map(|i| x.row(i).sum() / t as f64).collect();
    DMatrix::from_fn(n, t, |i, j| x[(i, j)] - row_means[i])
}

/// One horizon's stacked regression.
#[derive(Debug, Clone)]
pub struct LpDesign {
    /// Outcome led `h` periods, transformed, stacked country-major.
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub columns: Vec<String>,
    /// Window date index per row, for date-clustered inference.
    pub dates: Vec<usize>,
    pub n_dates: usize,
    pub horizon: usize,
}

fn window_view(panel: &DMatrix<f64>, start: usize, width: usize, shift: i64) -> DMatrix<f64> {
    DMatrix::from_fn(panel.nrows(), width, |c, s| {
        let t = (start + s) as i64 + shift;
        panel[(c, t as usize)]
    })
}

fn stack(m: &DMatrix<f64>) -> Vec<f64> {
    let (n, w) = (m.nrows(), m.ncols());
    let mut out = Vec::with_capacity(n * w);
    for c in 0..n {
        for s in 0..w {
            out.push(m[(c, s)]);
        }
    }
    out
}

fn build_design_with_shocks(
    data: &LpData,
    spec: &LpSpec,
    h: usize,
    shocks: &[(String, &DMatrix<f64>)],
) -> Result<LpDesign, LpError> {
    let p = spec.lags;
    if p == 0 {
        return Err(LpError::ZeroLags);
    }
    let n = data.n();
    let t = data.t();
    let reach = if spec.fixed_window { spec.horizons } else { h };
    if t < p + reach + 1 {
        return Err(LpError::EmptyWindow {
            horizon: h,
            t,
            lags: p,
            reach,
        });
    }
    let w = t - p - reach;
    // single unit: cross-sectional means would remove everything, so the
    // within transformation degenerates to removing each series' own mean
    let dd: fn(&DMatrix<f64>) -> DMatrix<f64> = if n == 1 { demean_rows } else { double_demean };
    let sd: fn(&DMatrix<f64>) -> DMatrix<f64> = if n == 1 { demean_rows } else { demean_shock };

    let y = stack(&dd(&window_view(&data.outcome, p, w, h as i64)));

    let mut columns: Vec<String> = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for (name, shock) in shocks {
        columns.push(name.clone());
        cols.push(stack(&sd(&window_view(shock, p, w, 0))));
    }
    for (name, panel) in &data.controls {
        for lag in 1..=p {
            columns.push(format!("{name}_lag{lag}"));
            cols.push(stack(&dd(&window_view(panel, p, w, -(lag as i64)))));
        }
    }
    if spec.include_uncertainty {
        for (name, panel) in &data.uncertainty {
            for lag in 0..=p {
                columns.push(format!("{name}_lag{lag}"));
                cols.push(stack(&dd(&window_view(panel, p, w, -(lag as i64)))));
            }
        }
    }

    let rows = n * w;
    if rows < columns.len() {
        return Err(LpError::TooFewRows {
            horizon: h,
            rows,
            cols: columns.len(),
        });
    }
    let x = DMatrix::from_fn(rows, columns.len(), |r, c| cols[c][r]);
    let dates = (0..rows).map(|r| r % w).collect();
    Ok(LpDesign {
        y: DVector::from_vec(y),
        x,
        columns,
        dates,
        n_dates: w,
        horizon: h,
    })
}

/// Builds the stacked regression for one horizon: transformed outcome at
/// `t + h` on the demeaned shock at `t`, double-demeaned controls at lags
/// `1..=p`, and (optionally) uncertainty panels at lags `0..=p`. The window
/// is `t` in `p..T-reach`, pooled over countries.
pub fn build_lp_design(data: &LpData, spec: &LpSpec, h: usize) -> Result<LpDesign, LpError> {
    build_design_with_shocks(data, spec, h, &[(data.shock_name.clone(), &data.shock)])
}

/// Least-squares fit via column-pivoted QR.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub beta: DVector<f64>,
    pub residuals: DVector<f64>,
}

/// Solves the stacked regression. Rank deficiency is an error naming the
/// columns the pivoting pushed past the numerical rank.
pub fn ols(design: &LpDesign) -> Result<OlsFit, LpError> {
    let k = design.x.ncols();
    let qr = design.x.clone().col_piv_qr();
    let r = qr.r();
    let tol = 1e-10 * r[(0, 0)].abs().max(f64::MIN_POSITIVE);
    let rank = (0..k).take_while(|&i| r[(i, i)].abs() > tol).count();
    // recover the pivot order by permuting an index row the same way the
    // factorization permuted the columns
    let mut order = DMatrix::<usize>::from_fn(1, k, |_, j| j);
    qr.p().permute_columns(&mut order);
    if rank < k {
        let columns = (rank..k)
            .map(|j| design.columns[order[(0, j)]].clone())
            .collect();
        return Err(LpError::RankDeficient { columns });
    }
    let qty = qr.q().transpose() * &design.y;
    let gamma = r
        .view((0, 0), (k, k))
        .solve_upper_triangular(&qty.rows(0, k).into_owned())
        .ok_or(LpError::RankDeficient {
            columns: design.columns.clone(),
        })?;
    let mut beta = DVector::zeros(k);
    for j in 0..k {
        beta[order[(0, j)]] = gamma[j];
    }
    let residuals = &design.y - &design.x * &beta;
    Ok(OlsFit { beta, residuals })
}

/// Driscoll-Kraay coefficient covariance with Bartlett bandwidth `m`.
///
/// Moment vectors `h_d = sum_i x_{i,d} e_{i,d}` are summed over the cross
/// section per date, then combined as
/// `S = Gamma_0 + sum_l w_l (Gamma_l + Gamma_l')` with `w_l = 1 - l/(m+1)`,
/// and sandwiched: `V = (X'X)^{-1} S (X'X)^{-1} * T_d/(T_d - k)`. The last
/// factor divides the meat by `T_d - k` instead of `T_d`, the usual
/// degrees-of-freedom correction. `m = 0` is the heteroskedasticity-robust
/// form; a single unit reproduces Newey-West.
pub fn dk_cov(design: &LpDesign, residuals: &DVector<f64>, m: usize) -> Result<DMatrix<f64>, LpError> {
    let k = design.x.ncols();
    let t_d = design.n_dates;
    if t_d < 2 {
        return Err(LpError::TooFewDates { dates: t_d });
    }
    if t_d <= k {
        return Err(LpError::InsufficientDof { dates: t_d, k });
    }
    let mut moments = vec![DVector::<f64>::zeros(k); t_d];
    for row in 0..design.x.nrows() {
        let d = design.dates[row];
        let e = residuals[row];
        for j in 0..k {
            moments[d][j] += design.x[(row, j)] * e;
        }
    }
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for (d, h_d) in moments.iter().enumerate() {
        meat += h_d * h_d.transpose();
        let _ = d;
    }
    let max_lag = m.min(t_d - 1);
    for l in 1..=max_lag {
        let weight = 1.0 - l as f64 / (m as f64 + 1.0);
        let mut gamma = DMatrix::<f64>::zeros(k, k);
        for d in l..t_d {
            gamma += &moments[d] * moments[d - l].transpose();
        }
        meat += weight * (&gamma + gamma.transpose());
    }
    let xtx = design.x.transpose() * &design.x;
    let chol = xtx.cholesky().ok_or(LpError::RankDeficient {
        columns: design.columns.clone(),
    })?;
    let half = chol.solve(&meat);
    let v = chol.solve(&half.transpose());
    let scale = t_d as f64 / (t_d - k) as f64;
    let v = (&v + v.transpose()) * (0.5 * scale);
    Ok(v)
}

/// One horizon of an impulse response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrfPoint {
    pub horizon: usize,
    pub beta: f64,
    pub se: f64,
    pub lo68: f64,
    pub hi68: f64,
    pub lo90: f64,
    pub hi90: f64,
    pub n_obs: usize,
    pub hac_m: usize,
}

impl IrfPoint {
    fn from_estimate(horizon: usize, beta: f64, se: f64, n_obs: usize, hac_m: usize) -> IrfPoint {
        IrfPoint {
            horizon,
            beta,
            se,
            lo68: beta - Z68 * se,
            hi68: beta + Z68 * se,
            lo90: beta - Z90 * se,
            hi90: beta + Z90 * se,
            n_obs,
            hac_m,
        }
    }
}

/// Impulse response of one outcome to one shock across horizons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrfResult {
    pub outcome: String,
    pub shock: String,
    pub points: Vec<IrfPoint>,
}

struct HorizonFit {
    beta: DVector<f64>,
    cov: DMatrix<f64>,
    n_obs: usize,
    hac_m: usize,
}

fn fit_horizon(
    data: &LpData,
    spec: &LpSpec,
    h: usize,
    shocks: &[(String, &DMatrix<f64>)],
) -> Result<HorizonFit, LpError> {
    let wrap = |source: LpError| LpError::AtHorizon {
        horizon: h,
        source: Box::new(source),
    };
    let design = build_design_with_shocks(data, spec, h, shocks).map_err(wrap)?;
    let fit = ols(&design).map_err(wrap)?;
    let m = spec.hac_rule.bandwidth(h, spec.lags);
    let cov = dk_cov(&design, &fit.residuals, m).map_err(wrap)?;
    Ok(HorizonFit {
        beta: fit.beta,
        cov,
        n_obs: design.x.nrows(),
        hac_m: m,
    })
}

/// Estimates the impulse response over `h` in `0..=horizons`. Horizons are
/// independent regressions and run in parallel.
pub fn lp_irf(data: &LpData, spec: &LpSpec) -> Result<IrfResult, LpError> {
    let fits: Result<Vec<HorizonFit>, LpError> = (0..=spec.horizons)
        .into_par_iter()
        .map(|h| fit_horizon(data, spec, h, &[(data.shock_name.clone(), &data.shock)]))
        .collect();
    let points = fits?
        .into_iter()
        .enumerate()
        .map(|(h, f)| IrfPoint::from_estimate(h, f.beta[0], f.cov[(0, 0)].sqrt(), f.n_obs, f.hac_m))
        .collect();
    Ok(IrfResult {
        outcome: data.outcome_name.clone(),
        shock: data.shock_name.clone(),
        points,
    })
}

/// Sign-split impulse responses plus the per-horizon covariance between the
/// two shock coefficients, needed for joint bands on their difference.
#[derive(Debug, Clone)]
pub struct SignedIrf {
    pub positive: IrfResult,
    pub negative: IrfResult,
    pub cov_pn: Vec<f64>,
}

/// Estimates responses to the censored shock halves `max(0, eps)` and
/// `min(0, eps)` in a single regression per horizon. Censoring happens on
/// the raw series; each half is then demeaned like the plain shock.
pub fn lp_irf_signed(data: &LpData, spec: &LpSpec) -> Result<SignedIrf, LpError> {
    let pos = data.shock.map(|v| v.max(0.0));
    let neg = data.shock.map(|v| v.min(0.0));
    if pos.iter().all(|v| *v == 0.0) {
        return Err(LpError::DegenerateSign { sign: "positive" });
    }
    if neg.iter().all(|v| *v == 0.0) {
        return Err(LpError::DegenerateSign { sign: "negative" });
    }
    let pos_name = format!("{}_positive", data.shock_name);
    let neg_name = format!("{}_negative", data.shock_name);
    let fits: Result<Vec<HorizonFit>, LpError> = (0..=spec.horizons)
        .into_par_iter()
        .map(|h| {
            fit_horizon(
                data,
                spec,
                h,
                &[(pos_name.clone(), &pos), (neg_name.clone(), &neg)],
            )
        })
        .collect();
    let fits = fits?;
    let mut positive = Vec::with_capacity(fits.len());
    let mut negative = Vec::with_capacity(fits.len());
    let mut cov_pn = Vec::with_capacity(fits.len());
    for (h, f) in fits.into_iter().enumerate() {
        positive.push(IrfPoint::from_estimate(
            h,
            f.beta[0],
            f.cov[(0, 0)].sqrt(),
            f.n_obs,
            f.hac_m,
        ));
        negative.push(IrfPoint::from_estimate(
            h,
            f.beta[1],
            f.cov[(1, 1)].sqrt(),
            f.n_obs,
            f.hac_m,
        ));
        cov_pn.push(f.cov[(0, 1)]);
    }
    Ok(SignedIrf {
        positive: IrfResult {
            outcome: data.outcome_name.clone(),
            shock: pos_name,
            points: positive,
        },
        negative: IrfResult {
            outcome: data.outcome_name.clone(),
            shock: neg_name,
            points: negative,
        },
        cov_pn,
    })
}

/// Writes IRFs as `outcome,shock,horizon,beta,se,lo68,hi68,lo90,hi90,n_obs,hac_m`.
pub fn write_irf_csv<W: std::io::Write>(
    writer: W,
    results: &[&IrfResult],
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "outcome", "shock", "horizon", "beta", "se", "lo68", "hi68", "lo90", "hi90", "n_obs",
        "hac_m",
    ])?;
    for result in results {
        for p in &result.points {
            w.write_record([
                result.outcome.as_str(),
                result.shock.as_str(),
                &p.horizon.to_string(),
                &p.beta.to_string(),
                &p.se.to_string(),
                &p.lo68.to_string(),
                &p.hi68.to_string(),
                &p.lo90.to_string(),
                &p.hi90.to_string(),
                &p.n_obs.to_string(),
                &p.hac_m.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads IRFs written by [`write_irf_csv`], grouped by `(outcome, shock)` in
/// file order.
pub fn read_irf_csv<R: std::io::Read>(
    reader: R,
) -> Result<Vec<IrfResult>, Box<dyn std::error::Error>> {
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut out: Vec<IrfResult> = Vec::new();
    for record in csv_reader.records() {
        let r = record?;
        let field = |i: usize| r.get(i).unwrap_or_default();
        let outcome = field(0).to_string();
        let shock = field(1).to_string();
        let point = IrfPoint {
            horizon: field(2).parse()?,
            beta: field(3).parse()?,
            se: field(4).parse()?,
            lo68: field(5).parse()?,
            hi68: field(6).parse()?,
            lo90: field(7).parse()?,
            hi90: field(8).parse()?,
            n_obs: field(9).parse()?,
            hac_m: field(10).parse()?,
        };
        match out.last_mut() {
            Some(last) if last.outcome == outcome && last.shock == shock => {
                last.points.push(point)
            }
            _ => out.push(IrfResult {
                outcome,
                shock,
                points: vec![point],
            }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_matrix(n: usize, t: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, t, |_, _| r.sample(StandardNormal))
    }

    fn quarters(t: usize) -> Vec<Quarter> {
        let start = Quarter::new(2000, 1).unwrap();
        let mut q = start;
        let mut out = Vec::with_capacity(t);
        for _ in 0..t {
            out.push(q);
            q = q.next();
        }
        out
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("C{i:02}")).collect()
    }

    #[test]
    fn double_demean_matches_the_closed_form() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 5.0]);
        let d = double_demean(&x);
        assert_eq!(d[(0, 0)], 0.25);
        assert_eq!(d[(0, 1)], -0.25);
        assert_eq!(d[(1, 0)], -0.25);
        assert_eq!(d[(1, 1)], 0.25);
    }

    #[test]
    fn double_demean_absorbs_additive_effects() {
        let a = [0.3, -1.2, 0.5];
        let b = [2.0, -0.7, 0.1, 1.4];
        let x = DMatrix::from_fn(3, 4, |i, j| a[i] + b[j]);
        let d = double_demean(&x);
        assert!(d.abs().max() < 1e-12, "max {}", d.abs().max());
        let c = DMatrix::from_element(3, 4, 7.5);
        assert!(double_demean(&c).abs().max() < 1e-12);
    }

    #[test]
    fn double_demean_is_idempotent_and_centered() {
        let mut r = rng(1);
        let x = random_matrix(5, 9, &mut r);
        let once = double_demean(&x);
        let twice = double_demean(&once);
        assert!((&once - &twice).abs().max() < 1e-12);
        for i in 0..5 {
            assert!(once.row(i).sum().abs() < 1e-12);
        }
        for j in 0..9 {
            assert!(once.column(j).sum().abs() < 1e-12);
        }
    }

    #[test]
    fn shock_demeaning_removes_only_time_means() {
        let mut r = rng(2);
        let x = random_matrix(4, 6, &mut r);
        let s = demean_shock(&x);
        for j in 0..6 {
            assert!(s.column(j).sum().abs() < 1e-12);
        }
        // a country-constant offset survives, unlike under double demeaning
        let offsets = [1.0, -2.0, 0.5, 3.0];
        let shifted = DMatrix::from_fn(4, 6, |i, j| x[(i, j)] + offsets[i]);
        let s_shifted = demean_shock(&shifted);
        assert!((&s_shifted - &s).abs().max() > 0.1);
        // single unit: the cross-sectional mean is the value itself
        let single = random_matrix(1, 6, &mut r);
        assert!(demean_shock(&single).abs().max() == 0.0);
    }

    fn plain_data(n: usize, t: usize, seed: u64) -> LpData {
        let mut r = rng(seed);
        let shock = random_matrix(n, t, &mut r);
        let outcome = random_matrix(n, t, &mut r);
        LpData::new(
            names(n),
            quarters(t),
            "outcome".into(),
            "shock".into(),
            outcome,
            shock,
            vec![],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn window_arithmetic_matches_the_documented_count() {
        let mut data = plain_data(3, 72, 3);
        let mut r = rng(4);
        data.controls.push(("x1".into(), random_matrix(3, 72, &mut r)));
        data.uncertainty.push(("u1".into(), random_matrix(3, 72, &mut r)));
        let spec = LpSpec::default();
        let design = build_lp_design(&data, &spec, 12).unwrap();
        assert_eq!(design.n_dates, 72 - 4 - 12);
        assert_eq!(design.x.nrows(), 3 * 56);
        // shock + control lags 1..4 + uncertainty lags 0..4
        assert_eq!(design.columns.len(), 1 + 4 + 5);
        assert_eq!(design.columns[0], "shock");
        assert!(design.columns.contains(&"x1_lag4".to_string()));
        assert!(design.columns.contains(&"u1_lag0".to_string()));

        let no_unc = LpSpec {
            include_uncertainty: false,
            ..LpSpec::default()
        };
        let design = build_lp_design(&data, &no_unc, 12).unwrap();
        assert_eq!(design.columns.len(), 1 + 4);
        assert!(!design.columns.iter().any(|c| c.starts_with("u1")));

        assert!(matches!(
            build_lp_design(&data, &spec, 68),
            Err(LpError::EmptyWindow { horizon: 68, .. })
        ));
    }

    #[test]
    fn fixed_window_pins_the_sample_across_horizons() {
        let data = plain_data(3, 72, 5);
        let spec = LpSpec {
            horizons: 12,
            fixed_window: true,
            ..LpSpec::default()
        };
        for h in [0usize, 5, 12] {
            let design = build_lp_design(&data, &spec, h).unwrap();
            assert_eq!(design.n_dates, 72 - 4 - 12, "h = {h}");
        }
    }

    #[test]
    fn ols_reproduces_exact_linear_relationships() {
        let data = plain_data(4, 40, 6);
        let spec = LpSpec::default();
        let mut design = build_lp_design(&data, &spec, 0).unwrap();
        let truth = DVector::from_vec(vec![1.5]);
        design.y = &design.x * &truth;
        let fit = ols(&design).unwrap();
        assert_relative_eq!(fit.beta[0], 1.5, epsilon = 1e-10);
        assert!(fit.residuals.abs().max() < 1e-10);
    }

    #[test]
    fn ols_matches_the_normal_equations_oracle() {
        let mut r = rng(7);
        let rows = 120;
        let k = 5;
        let x = DMatrix::from_fn(rows, k, |_, _| r.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(rows, |_, _| r.sample::<f64, _>(StandardNormal));
        let design = LpDesign {
            y: y.clone(),
            x: x.clone(),
            columns: (0..k).map(|i| format!("c{i}")).collect(),
            dates: (0..rows).map(|i| i % 30).collect(),
            n_dates: 30,
            horizon: 0,
        };
        let fit = ols(&design).unwrap();
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * &y;
        let oracle = xtx.cholesky().unwrap().solve(&xty);
        assert!((&fit.beta - &oracle).abs().max() < 1e-9);
        // residual orthogonality
        let cross = x.transpose() * &fit.residuals;
        assert!(cross.abs().max() < 1e-8);
    }

    #[test]
    fn duplicated_regressors_are_reported_by_name() {
        let mut r = rng(8);
        let rows = 40;
        let base = DVector::from_fn(rows, |_, _| r.sample::<f64, _>(StandardNormal));
        let other = DVector::from_fn(rows, |_, _| r.sample::<f64, _>(StandardNormal));
        let mut x = DMatrix::zeros(rows, 3);
        x.set_column(0, &base);
        x.set_column(1, &other);
        x.set_column(2, &base);
        let design = LpDesign {
            y: DVector::zeros(rows),
            x,
            columns: vec!["dup_a".into(), "other".into(), "dup_b".into()],
            dates: (0..rows).map(|i| i % 20).collect(),
            n_dates: 20,
            horizon: 0,
        };
        match ols(&design) {
            Err(LpError::RankDeficient { columns }) => {
                assert_eq!(columns.len(), 1);
                assert!(
                    columns[0].starts_with("dup"),
                    "expected one of the duplicates, got {columns:?}"
                );
            }
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    /// Textbook Newey-West covariance for a single series, with the same
    /// degrees-of-freedom scaling documented on dk_cov.
    fn newey_west(x: &DMatrix<f64>, e: &DVector<f64>, m: usize) -> DMatrix<f64> {
        let (t, k) = (x.nrows(), x.ncols());
        let mut meat = DMatrix::zeros(k, k);
        for s in 0..t {
            let xs = x.row(s).transpose() * e[s];
            meat += &xs * xs.transpose();
        }
        for l in 1..=m.min(t - 1) {
            let w = 1.0 - l as f64 / (m as f64 + 1.0);
            let mut gamma = DMatrix::zeros(k, k);
            for s in l..t {
                let xs = x.row(s).transpose() * e[s];
                let xl = x.row(s - l).transpose() * e[s - l];
                gamma += &xs * xl.transpose();
            }
            meat += w * (&gamma + gamma.transpose());
        }
        let xtx = x.transpose() * x;
        let inv = xtx.clone().try_inverse().unwrap();
        let scale = t as f64 / (t - k) as f64;
        &inv * meat * &inv * scale
    }

    #[test]
    fn single_unit_dk_reduces_to_newey_west() {
        let mut r = rng(9);
        let t = 60;
        let k = 3;
        let x = DMatrix::from_fn(t, k, |_, _| r.sample::<f64, _>(StandardNormal));
        let e = DVector::from_fn(t, |_, _| r.sample::<f64, _>(StandardNormal));
        let design = LpDesign {
            y: DVector::zeros(t),
            x: x.clone(),
            columns: (0..k).map(|i| format!("c{i}")).collect(),
            dates: (0..t).collect(),
            n_dates: t,
            horizon: 0,
        };
        for m in [1usize, 4, 8] {
            let dk = dk_cov(&design, &e, m).unwrap();
            let nw = newey_west(&x, &e, m);
            assert!(
                (&dk - &nw).abs().max() < 1e-10,
                "m = {m}: max deviation {}",
                (&dk - &nw).abs().max()
            );
        }
    }

    #[test]
    fn zero_bandwidth_is_the_heteroskedasticity_robust_form() {
        let mut r = rng(10);
        let n = 4;
        let w = 25;
        let rows = n * w;
        let k = 2;
        let x = DMatrix::from_fn(rows, k, |_, _| r.sample::<f64, _>(StandardNormal));
        let e = DVector::from_fn(rows, |_, _| r.sample::<f64, _>(StandardNormal));
        let dates: Vec<usize> = (0..rows).map(|i| i % w).collect();
        let design = LpDesign {
            y: DVector::zeros(rows),
            x: x.clone(),
            columns: vec!["a".into(), "b".into()],
            dates: dates.clone(),
            n_dates: w,
            horizon: 0,
        };
        let dk = dk_cov(&design, &e, 0).unwrap();
        // oracle: sandwich over per-date cross-sectional moment sums
        let mut meat = DMatrix::zeros(k, k);
        for d in 0..w {
            let mut h = DVector::zeros(k);
            for row in 0..rows {
                if dates[row] == d {
                    h += x.row(row).transpose() * e[row];
                }
            }
            meat += &h * h.transpose();
        }
        let inv = (x.transpose() * &x).try_inverse().unwrap();
        let oracle = &inv * meat * &inv * (w as f64 / (w - k) as f64);
        assert!((&dk - &oracle).abs().max() < 1e-12);
    }

    #[test]
    fn dk_cov_is_symmetric_positive_semidefinite() {
        let mut r = rng(11);
        let data = plain_data(5, 50, 12);
        let spec = LpSpec::default();
        let design = build_lp_design(&data, &spec, 2).unwrap();
        let e = DVector::from_fn(design.x.nrows(), |_, _| r.sample::<f64, _>(StandardNormal));
        let v = dk_cov(&design, &e, 3).unwrap();
        assert!((&v - v.transpose()).abs().max() < 1e-14);
        let eig = v.symmetric_eigen();
        let min = eig.eigenvalues.min();
        let max = eig.eigenvalues.max();
        assert!(min > -1e-12 * max.abs(), "min eigenvalue {min}");
    }

    #[test]
    fn dk_cov_needs_enough_dates() {
        let design = LpDesign {
            y: DVector::zeros(2),
            x: DMatrix::from_element(2, 1, 1.0),
            columns: vec!["a".into()],
            dates: vec![0, 0],
            n_dates: 1,
            horizon: 0,
        };
        assert!(matches!(
            dk_cov(&design, &DVector::zeros(2), 1),
            Err(LpError::TooFewDates { dates: 1 })
        ));
    }

    #[test]
    fn projecting_a_shock_on_itself_recovers_unity_on_impact() {
        let n = 20;
        let t = 120;
        let mut r = rng(13);
        let shock = random_matrix(n, t, &mut r);
        let data = LpData::new(
            names(n),
            quarters(t),
            "outcome".into(),
            "shock".into(),
            shock.clone(),
            shock,
            vec![],
            vec![],
        )
        .unwrap();
        let spec = LpSpec {
            horizons: 4,
            ..LpSpec::default()
        };
        let irf = lp_irf(&data, &spec).unwrap();
        assert!(
            (irf.points[0].beta - 1.0).abs() < 0.08,
            "beta_0 = {}",
            irf.points[0].beta
        );
        for p in &irf.points[1..] {
            assert!(p.beta.abs() < 0.08, "beta_{} = {}", p.horizon, p.beta);
        }
        // band geometry
        for p in &irf.points {
            assert!(p.lo90 <= p.lo68 && p.lo68 <= p.beta);
            assert!(p.beta <= p.hi68 && p.hi68 <= p.hi90);
            assert_relative_eq!(p.hi68 - p.beta, p.beta - p.lo68, epsilon = 1e-12);
            assert_relative_eq!(p.hi68 - p.beta, Z68 * p.se, epsilon = 1e-12);
            assert_relative_eq!(p.hi90 - p.beta, Z90 * p.se, epsilon = 1e-12);
        }
    }

    #[test]
    fn bandwidth_rules_follow_the_documented_schedule() {
        assert_eq!(HacRule::HPlus1.bandwidth(3, 4), 4);
        assert_eq!(HacRule::PPlus1.bandwidth(3, 4), 5);
        assert_eq!(HacRule::PPlusHPlus1.bandwidth(3, 4), 8);
        let data = plain_data(6, 60, 14);
        let spec = LpSpec {
            horizons: 3,
            hac_rule: HacRule::PPlusHPlus1,
            ..LpSpec::default()
        };
        let irf = lp_irf(&data, &spec).unwrap();
        assert_eq!(irf.points[3].hac_m, 8);
        assert_eq!(irf.points[0].hac_m, 5);
    }

    #[test]
    fn hac_rule_changes_standard_errors_but_not_coefficients() {
        let data = plain_data(6, 80, 15);
        let base = LpSpec {
            horizons: 6,
            ..LpSpec::default()
        };
        let wide = LpSpec {
            hac_rule: HacRule::PPlusHPlus1,
            ..base.clone()
        };
        let a = lp_irf(&data, &base).unwrap();
        let b = lp_irf(&data, &wide).unwrap();
        for (pa, pb) in a.points.iter().zip(&b.points) {
            assert_relative_eq!(pa.beta, pb.beta, epsilon = 1e-12);
        }
        assert!(a.points.iter().zip(&b.points).any(|(pa, pb)| pa.se != pb.se));
    }

    #[test]
    fn two_way_effects_do_not_move_coefficients() {
        let n = 5;
        let t = 60;
        let mut r = rng(16);
        let shock = random_matrix(n, t, &mut r);
        let outcome = random_matrix(n, t, &mut r);
        let control = random_matrix(n, t, &mut r);
        let build = |outcome: DMatrix<f64>, shock: DMatrix<f64>, control: DMatrix<f64>| {
            LpData::new(
                names(n),
                quarters(t),
                "outcome".into(),
                "shock".into(),
                outcome,
                shock,
                vec![("ctrl".into(), control)],
                vec![],
            )
            .unwrap()
        };
        let spec = LpSpec {
            horizons: 3,
            ..LpSpec::default()
        };
        let baseline = lp_irf(&build(outcome.clone(), shock.clone(), control.clone()), &spec).unwrap();

        let country: Vec<f64> = (0..n).map(|i| i as f64 - 1.7).collect();
        let time: Vec<f64> = (0..t).map(|j| (j as f64 * 0.3).sin() * 2.0).collect();
        // outcome and controls absorb constants plus both effects; the shock
        // absorbs constants and time effects (it is only time demeaned)
        let outcome2 = DMatrix::from_fn(n, t, |i, j| outcome[(i, j)] + 4.0 + country[i] + time[j]);
        let control2 = DMatrix::from_fn(n, t, |i, j| control[(i, j)] - 2.0 + country[i] + time[j]);
        let shock2 = DMatrix::from_fn(n, t, |i, j| shock[(i, j)] + 1.5 + time[j]);
        let shifted = lp_irf(&build(outcome2, shock2, control2), &spec).unwrap();
        for (pa, pb) in baseline.points.iter().zip(&shifted.points) {
            assert_relative_eq!(pa.beta, pb.beta, epsilon = 1e-8);
            assert_relative_eq!(pa.se, pb.se, epsilon = 1e-8);
        }
    }

    /// Independent single-series local projection: remove each series' mean,
    /// regress the led outcome on the shock and lagged controls, Newey-West
    /// errors. Plain loops throughout.
    fn single_series_lp(
        outcome: &[f64],
        shock: &[f64],
        p: usize,
        h: usize,
        m: usize,
    ) -> (f64, f64) {
        let t = outcome.len();
        let w = t - p - h;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let y_raw: Vec<f64> = (0..w).map(|s| outcome[p + s + h]).collect();
        let s_raw: Vec<f64> = (0..w).map(|s| shock[p + s]).collect();
        let lag_raw: Vec<Vec<f64>> = (1..=p)
            .map(|l| (0..w).map(|s| shock[p + s - l]).collect())
            .collect();
        let y_m = mean(&y_raw);
        let s_m = mean(&s_raw);
        let y: Vec<f64> = y_raw.iter().map(|v| v - y_m).collect();
        let mut cols: Vec<Vec<f64>> = vec![s_raw.iter().map(|v| v - s_m).collect()];
        for lr in &lag_raw {
            let lm = mean(lr);
            cols.push(lr.iter().map(|v| v - lm).collect());
        }
        let k = cols.len();
        let x = DMatrix::from_fn(w, k, |r, c| cols[c][r]);
        let yv = DVector::from_vec(y);
        let xtx = x.transpose() * &x;
        let beta = xtx.clone().try_inverse().unwrap() * (x.transpose() * &yv);
        let e = &yv - &x * &beta;
        let v = newey_west(&x, &e, m);
        (beta[0], v[(0, 0)].sqrt())
    }

    #[test]
    fn single_unit_pipeline_matches_a_textbook_local_projection() {
        let t = 90;
        let mut r = rng(17);
        let shock: Vec<f64> = (0..t).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let outcome: Vec<f64> = (0..t)
            .map(|i| {
                let s0 = shock[i];
                let s1 = if i >= 1 { shock[i - 1] } else { 0.0 };
                0.8 * s0 + 0.3 * s1 + 0.1 * r.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let p = 2;
        let data = LpData::new(
            vec!["ONLY".into()],
            quarters(t),
            "outcome".into(),
            "shock".into(),
            DMatrix::from_fn(1, t, |_, j| outcome[j]),
            DMatrix::from_fn(1, t, |_, j| shock[j]),
            vec![("shock".into(), DMatrix::from_fn(1, t, |_, j| shock[j]))],
            vec![],
        )
        .unwrap();
        let spec = LpSpec {
            horizons: 3,
            lags: p,
            ..LpSpec::default()
        };
        let irf = lp_irf(&data, &spec).unwrap();
        for h in 0..=3usize {
            let m = h + 1;
            let (beta, se) = single_series_lp(&outcome, &shock, p, h, m);
            assert_relative_eq!(irf.points[h].beta, beta, epsilon = 1e-8);
            assert_relative_eq!(irf.points[h].se, se, epsilon = 1e-8);
        }
    }

    fn signed_data(n: usize, t: usize, theta_p: f64, theta_n: f64, seed: u64) -> LpData {
        let mut r = rng(seed);
        let shock = random_matrix(n, t, &mut r);
        let outcome = DMatrix::from_fn(n, t, |i, j| {
            theta_p * shock[(i, j)].max(0.0)
                + theta_n * shock[(i, j)].min(0.0)
                + 0.01 * r.gen::<f64>()
        });
        LpData::new(
            names(n),
            quarters(t),
            "outcome".into(),
            "shock".into(),
            outcome,
            shock,
            vec![],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn symmetric_outcomes_give_matching_signed_responses() {
        let data = signed_data(8, 80, 0.5, 0.5, 18);
        let spec = LpSpec {
            horizons: 2,
            ..LpSpec::default()
        };
        let signed = lp_irf_signed(&data, &spec).unwrap();
        for h in 0..=2usize {
            let p = &signed.positive.points[h];
            let n = &signed.negative.points[h];
            let joint = (p.se.powi(2) + n.se.powi(2) - 2.0 * signed.cov_pn[h]).sqrt();
            assert!(
                (p.beta - n.beta).abs() <= Z90 * joint.max(1e-12),
                "h = {h}: {} vs {} (joint se {joint})",
                p.beta,
                n.beta
            );
        }
        // asymmetric truth separates them
        let data = signed_data(8, 80, 1.0, 0.2, 19);
        let signed = lp_irf_signed(&data, &spec).unwrap();
        let p = &signed.positive.points[0];
        let n = &signed.negative.points[0];
        assert!((p.beta - n.beta).abs() > 0.5);
    }

    #[test]
    fn one_signed_shocks_are_rejected() {
        let mut data = plain_data(3, 40, 20);
        data.shock = data.shock.map(|v| v.abs());
        let spec = LpSpec {
            horizons: 1,
            ..LpSpec::default()
        };
        assert!(matches!(
            lp_irf_signed(&data, &spec),
            Err(LpError::DegenerateSign { sign: "negative" })
        ));
    }

    #[test]
    fn flipping_the_shock_swaps_the_signed_responses() {
        let data = signed_data(6, 70, 0.9, 0.3, 21);
        let mut flipped = data.clone();
        flipped.shock = -&data.shock;
        let spec = LpSpec {
            horizons: 2,
            ..LpSpec::default()
        };
        let a = lp_irf_signed(&data, &spec).unwrap();
        let b = lp_irf_signed(&flipped, &spec).unwrap();
        for h in 0..=2usize {
            assert_relative_eq!(
                b.positive.points[h].beta,
                -a.negative.points[h].beta,
                epsilon = 1e-10
            );
            assert_relative_eq!(
                b.negative.points[h].beta,
                -a.positive.points[h].beta,
                epsilon = 1e-10
            );
            assert_relative_eq!(b.positive.points[h].se, a.negative.points[h].se, epsilon = 1e-10);
            assert_relative_eq!(b.cov_pn[h], a.cov_pn[h], epsilon = 1e-10);
        }
    }

    #[test]
    fn errors_carry_the_failing_horizon() {
        let data = plain_data(2, 12, 22);
        let spec = LpSpec {
            horizons: 10,
            ..LpSpec::default()
        };
        match lp_irf(&data, &spec) {
            Err(LpError::AtHorizon { horizon, .. }) => assert!(horizon >= 7, "horizon {horizon}"),
            other => panic!("expected horizon error, got {other:?}"),
        }
    }

    #[test]
    fn irf_csv_round_trips() {
        let data = plain_data(4, 50, 23);
        let spec = LpSpec {
            horizons: 3,
            ..LpSpec::default()
        };
        let irf = lp_irf(&data, &spec).unwrap();
        let mut buffer = Vec::new();
        write_irf_csv(&mut buffer, &[&irf]).unwrap();
        let text = String::from_utf8(buffer.clone()).unwrap();
        assert!(text.starts_with("outcome,shock,horizon,beta,se,lo68,hi68,lo90,hi90,n_obs,hac_m"));
        let back = read_irf_csv(buffer.as_slice()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0], irf);
    }

    #[test]
    fn spec_deserializes_with_defaults() {
        let spec: LpSpec = serde_json::from_str("{}").unwrap();
        assert_eq!(spec.horizons, 20);
        assert_eq!(spec.lags, 4);
        assert_eq!(spec.hac_rule, HacRule::HPlus1);
        assert!(spec.include_uncertainty);
        assert!(!spec.fixed_window);
        let spec: LpSpec =
            serde_json::from_str(r#"{"hac_rule":"p_plus_h_plus_1","horizons":8}"#).unwrap();
        assert_eq!(spec.hac_rule, HacRule::PPlusHPlus1);
        assert_eq!(spec.horizons, 8);
    }
}
