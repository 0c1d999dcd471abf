//! Pooled Bayesian VAR with country intercepts and a Normal-Wishart prior.
//!
//! Countries share all lag coefficients; only the intercept (a country dummy
//! block) is country-specific. Stacking every country's rows gives
//!
//! ```text
//!     Y = X B + E,        E rows iid N(0, Sigma)
//! ```
//!
//! with `X = [y_{t-1}, ..., y_{t-p}, country dummies]`. The prior is the
//! natural conjugate pair
//!
//! ```text
//!     Sigma       ~ IW(S0, alpha0)
//!     vec(B)|Sigma ~ N(vec(B0), Sigma (x) Phi0)
//! ```
//!
//! with diagonal `Phi0` shrinking lag coefficients toward a univariate AR
//! process, scaled by per-variable AR(p) residual variances. The Gibbs
//! sampler alternates the two conditional conjugate draws; all solves go
//! through Cholesky factors and no matrix is ever inverted explicitly.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dates::Quarter;
use crate::panel::PanelDataset;

#[derive(Debug, Error)]
pub enum BvarError {
    #[error("variable {0} not in panel")]
    MissingVariable(String),
    #[error("panel has {t} quarters but the design needs more than {lags} (lags)")]
    TooShort { t: usize, lags: usize },
    #[error("lag order must be at least 1")]
    ZeroLags,
    #[error("no variables specified")]
    NoVariables,
    #[error("variable {variable} has (near-)zero AR residual variance; cannot scale the prior")]
    DegenerateVariable { variable: String },
    #[error("{context}: matrix not positive definite")]
    NotPositiveDefinite { context: &'static str },
    #[error("conditional scale stayed non positive definite after {retries} retries")]
    GibbsFailed { retries: usize },
    #[error("burn-in {burn_in} must be smaller than iterations {iterations}")]
    BadGibbsConfig { iterations: usize, burn_in: usize },
}

/// Which variables enter the VAR, in equation order, and with how many lags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarSpec {
    pub variables: Vec<String>,
    pub lags: usize,
}

/// Normal-Wishart prior hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NwPrior {
    /// Prior mean of each variable's own first lag.
    pub ar_coefficient: f64,
    /// Overall tightness of the lag coefficient prior.
    pub overall_tightness: f64,
    /// Exponent of the per-lag variance decay.
    pub lag_decay: f64,
    /// Relative looseness on the country dummy block.
    pub exogenous_tightness: f64,
    /// Inverse-Wishart degrees of freedom are `K + dof_shift`.
    pub dof_shift: f64,
}

impl Default for NwPrior {
    fn default() -> Self {
        NwPrior {
            ar_coefficient: 0.8,
            overall_tightness: 0.1,
            lag_decay: 1.0,
            exogenous_tightness: 100.0,
            dof_shift: 2.0,
        }
    }
}

impl NwPrior {
    /// Flat prior on the coefficients: the posterior mean becomes pooled OLS.
    /// The inverse-Wishart part stays proper so Sigma draws remain defined.
    pub fn diffuse() -> Self {
        NwPrior {
            ar_coefficient: 0.0,
            overall_tightness: f64::INFINITY,
            lag_decay: 1.0,
            exogenous_tightness: 1.0,
            dof_shift: 2.0,
        }
    }
}

/// Stacked regression arrays for the pooled VAR.
#[derive(Debug, Clone)]
pub struct Design {
    /// Outcomes, `N (T - p)` rows by `K` columns, country-major.
    pub y: DMatrix<f64>,
    /// Regressors: `K p` lag columns (lag 1 variables first) then `N`
    /// country dummies.
    pub x: DMatrix<f64>,
    pub variables: Vec<String>,
    pub countries: Vec<String>,
    pub lags: usize,
    /// Quarters covered by each country's residual rows.
    pub quarters: Vec<Quarter>,
}

impl Design {
    pub fn k(&self) -> usize {
        self.variables.len()
    }

    pub fn n_countries(&self) -> usize {
        self.countries.len()
    }

    /// Residual rows per country.
    pub fn t_effective(&self) -> usize {
        self.quarters.len()
    }
}

/// Builds the pooled design from a balanced panel.
///
/// Row order is country-major (all of country 0's quarters, then country 1's)
/// with quarters ascending; the first `lags` quarters of the panel provide
/// initial conditions only.
pub fn build_design(panel: &PanelDataset, spec: &VarSpec) -> Result<Design, BvarError> {
    if spec.lags == 0 {
        return Err(BvarError::ZeroLags);
    }
    if spec.variables.is_empty() {
        return Err(BvarError::NoVariables);
    }
    let t = panel.n_quarters();
    let p = spec.lags;
    if t <= p {
        return Err(BvarError::TooShort { t, lags: p });
    }
    let k = spec.variables.len();
    let n = panel.n_countries();
    let var_idx: Vec<usize> = spec
        .variables
        .iter()
        .map(|v| {
            panel.variable_index(v).ok_or_else(|| BvarError::MissingVariable(v.clone()))
        })
        .collect::<Result<_, _>>()?;
    let rows = n * (t - p);
    let width = k * p + n;
    let mut y = DMatrix::zeros(rows, k);
    let mut x = DMatrix::zeros(rows, width);
    let mut row = 0;
    for country in 0..n {
        for time in p..t {
            for (j, &v) in var_idx.iter().enumerate() {
                y[(row, j)] = panel.value(country, time, v);
            }
            for lag in 1..=p {
                for (j, &v) in var_idx.iter().enumerate() {
                    x[(row, (lag - 1) * k + j)] = panel.value(country, time - lag, v);
                }
            }
            x[(row, k * p + country)] = 1.0;
            row += 1;
        }
    }
    Ok(Design {
        y,
        x,
        variables: spec.variables.clone(),
        countries: panel.countries().to_vec(),
        lags: p,
        quarters: panel.quarters()[p..].to_vec(),
    })
}

/// Posterior of the Normal-Wishart model, plus the prior pieces the Gibbs
/// conditionals need.
#[derive(Debug, Clone)]
pub struct NwPosterior {
    /// Posterior mean of the coefficient matrix, `M x K`.
    pub b_mean: DMatrix<f64>,
    /// Lower Cholesky factor of the posterior row precision `Phi0^-1 + X'X`.
    pub precision_chol: DMatrix<f64>,
    /// Posterior inverse-Wishart scale.
    pub s_bar: DMatrix<f64>,
    /// Posterior inverse-Wishart degrees of freedom.
    pub alpha_bar: f64,
    /// Prior mean of the coefficient matrix.
    pub b0: DMatrix<f64>,
    /// Diagonal of the prior row precision (zeros under a diffuse prior).
    pub phi0_inv: DVector<f64>,
    /// Prior inverse-Wishart scale.
    pub s0: DMatrix<f64>,
    /// Prior inverse-Wishart degrees of freedom.
    pub alpha0: f64,
    pub n_obs: usize,
}

/// Per-variable residual variance of a pooled univariate AR(p) with country
/// intercepts, used to scale the prior. Variance is SSE over residual
/// degrees of freedom.
fn ar_residual_variances(design: &Design) -> Result<Vec<f64>, BvarError> {
    let k = design.k();
    let p = design.lags;
    let n = design.n_countries();
    let rows = design.y.nrows();
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let mut x = DMatrix::zeros(rows, p + n);
        for r in 0..rows {
            for lag in 1..=p {
                x[(r, lag - 1)] = design.x[(r, (lag - 1) * k + j)];
            }
            for c in 0..n {
                x[(r, p + c)] = design.x[(r, k * p + c)];
            }
        }
        let yj = design.y.column(j).into_owned();
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * &yj;
        let chol = xtx
            .cholesky()
            .ok_or(BvarError::NotPositiveDefinite { context: "AR scale regression" })?;
        let beta = chol.solve(&xty);
        let resid = &yj - &x * beta;
        let dof = rows.saturating_sub(p + n).max(1);
        let variance = resid.norm_squared() / dof as f64;
        if variance < 1e-12 {
            return Err(BvarError::DegenerateVariable {
                variable: design.variables[j].clone(),
            });
        }
        out.push(variance);
    }
    Ok(out)
}

/// Conjugate Normal-Wishart update.
///
/// The prior row variance of the coefficient on variable `j` at lag `l` is
/// `(tightness / l^decay)^2 / sigma_j^2`; dummy columns get
/// `(tightness * exogenous)^2`. An infinite tightness zeroes the prior
/// precision, making the posterior mean exactly pooled OLS. With zero
/// observations the posterior equals the prior.
pub fn nw_posterior(design: &Design, prior: &NwPrior) -> Result<NwPosterior, BvarError> {
    let k = design.k();
    let p = design.lags;
    let n = design.n_countries();
    let width = k * p + n;
    let n_obs = design.y.nrows();
    let diffuse = !prior.overall_tightness.is_finite();

    // with no data there is nothing to scale by; unit variances leave the
    // prior-equals-posterior identity intact
    let sigma_sq = if diffuse || n_obs == 0 {
        vec![1.0; k]
    } else {
        ar_residual_variances(design)?
    };

    let mut phi0_inv = DVector::zeros(width);
    if !diffuse {
        for lag in 1..=p {
            let lag_scale = prior.overall_tightness / (lag as f64).powf(prior.lag_decay);
            for j in 0..k {
                phi0_inv[(lag - 1) * k + j] = sigma_sq[j] / (lag_scale * lag_scale);
            }
        }
        let exo = prior.overall_tightness * prior.exogenous_tightness;
        for c in 0..n {
            phi0_inv[k * p + c] = 1.0 / (exo * exo);
        }
    }

    let mut b0 = DMatrix::zeros(width, k);
    for j in 0..k {
        b0[(j, j)] = prior.ar_coefficient;
    }

    let alpha0 = k as f64 + prior.dof_shift;
    // E[Sigma] under the prior equals diag(sigma_sq) when dof_shift > 1.
    let mut s0 = DMatrix::zeros(k, k);
    let s0_scale = (prior.dof_shift - 1.0).max(f64::EPSILON);
    for j in 0..k {
        s0[(j, j)] = s0_scale * sigma_sq[j];
    }

    let xtx = design.x.transpose() * &design.x;
    let xty = design.x.transpose() * &design.y;
    let mut precision = xtx;
    for i in 0..width {
        precision[(i, i)] += phi0_inv[i];
    }
    let precision_chol = precision
        .clone()
        .cholesky()
        .ok_or(BvarError::NotPositiveDefinite { context: "posterior precision" })?;

    // Phi0^-1 B0 + X'Y, solved against the posterior precision.
    let mut rhs = xty;
    for i in 0..width {
        if phi0_inv[i] != 0.0 {
            for j in 0..k {
                rhs[(i, j)] += phi0_inv[i] * b0[(i, j)];
            }
        }
    }
    let b_mean = precision_chol.solve(&rhs);

    // S_bar = S0 + Y'Y + B0' Phi0^-1 B0 - B_bar' (Phi0^-1 B0 + X'Y)
    let mut s_bar = s0.clone() + design.y.transpose() * &design.y;
    for i in 0..width {
        if phi0_inv[i] != 0.0 {
            for a in 0..k {
                for b in 0..k {
                    s_bar[(a, b)] += b0[(i, a)] * phi0_inv[i] * b0[(i, b)];
                }
            }
        }
    }
    s_bar -= b_mean.transpose() * &rhs;
    // the update is symmetric in exact arithmetic; restore it after roundoff
    s_bar = (&s_bar + s_bar.transpose()) * 0.5;

    Ok(NwPosterior {
        b_mean,
        precision_chol: precision_chol.l(),
        s_bar,
        alpha_bar: alpha0 + n_obs as f64,
        b0,
        phi0_inv,
        s0,
        alpha0,
        n_obs,
    })
}

/// Gibbs chain settings. `seed` fixes the whole draw sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GibbsConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            iterations: 2000,
            burn_in: 1000,
            seed: 0,
        }
    }
}

/// One post-burn-in state of the reduced-form chain.
#[derive(Debug, Clone)]
pub struct ReducedDraw {
    /// Coefficient matrix, `(K p + N) x K`.
    pub coefficients: DMatrix<f64>,
    /// Innovation covariance, `K x K`, symmetric positive definite.
    pub sigma: DMatrix<f64>,
}

fn standard_normal_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Draws Sigma ~ IW(scale, dof) through the Bartlett decomposition; only
/// triangular solves touch the factors.
fn inverse_wishart<R: Rng>(
    scale_chol: &DMatrix<f64>,
    dof: f64,
    k: usize,
    rng: &mut R,
) -> DMatrix<f64> {
    let mut bartlett = DMatrix::zeros(k, k);
    for i in 0..k {
        let chi = ChiSquared::new(dof - i as f64).expect("dof exceeds dimension");
        bartlett[(i, i)] = chi.sample(rng).max(f64::MIN_POSITIVE).sqrt();
        for j in 0..i {
            bartlett[(i, j)] = rng.sample(StandardNormal);
        }
    }
    // Sigma = (C A^-T)(C A^-T)' for C = chol(scale), A the Bartlett factor:
    // solve A F' = C' by forward substitution, then Sigma = F F'.
    let ft = bartlett
        .solve_lower_triangular(&scale_chol.transpose())
        .expect("Bartlett factor has positive diagonal");
    let f = ft.transpose();
    let mut sigma = &f * f.transpose();
    sigma = (&sigma + sigma.transpose()) * 0.5;
    sigma
}

/// Runs the two-block Gibbs sampler and returns the post-burn-in draws in
/// order. The chain is deterministic in `config.seed`.
pub fn gibbs_sample(
    design: &Design,
    posterior: &NwPosterior,
    config: &GibbsConfig,
) -> Result<Vec<ReducedDraw>, BvarError> {
    if config.burn_in >= config.iterations {
        return Err(BvarError::BadGibbsConfig {
            iterations: config.iterations,
            burn_in: config.burn_in,
        });
    }
    let k = design.k();
    let width = posterior.b_mean.nrows();
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    // rows of B with proper prior precision add to the conditional IW dof
    let proper_rows = posterior.phi0_inv.iter().filter(|v| **v > 0.0).count();
    let cond_dof = posterior.alpha0 + posterior.n_obs as f64 + proper_rows as f64;

    let mut b = posterior.b_mean.clone();
    let mut draws = Vec::with_capacity(config.iterations - config.burn_in);
    const MAX_RETRIES: usize = 5;
    for iteration in 0..config.iterations {
        // Sigma | B: IW(S0 + E'E + (B - B0)' Phi0^-1 (B - B0), cond_dof)
        let mut sigma = None;
        for _ in 0..=MAX_RETRIES {
            let resid = &design.y - &design.x * &b;
            let mut cond_scale = posterior.s0.clone() + resid.transpose() * &resid;
            let dev = &b - &posterior.b0;
            for i in 0..width {
                if posterior.phi0_inv[i] != 0.0 {
                    for a in 0..k {
                        for bb in 0..k {
                            cond_scale[(a, bb)] +=
                                dev[(i, a)] * posterior.phi0_inv[i] * dev[(i, bb)];
                        }
                    }
                }
            }
            cond_scale = (&cond_scale + cond_scale.transpose()) * 0.5;
            match cond_scale.cholesky() {
                Some(chol) => {
                    sigma = Some(inverse_wishart(&chol.l(), cond_dof, k, &mut rng));
                    break;
                }
                None => {
                    // resample the coefficient block and try again
                    b = draw_b(posterior, &posterior.s_bar, &mut rng)
                        .unwrap_or_else(|| posterior.b_mean.clone());
                }
            }
        }
        let sigma = sigma.ok_or(BvarError::GibbsFailed { retries: MAX_RETRIES })?;

        // B | Sigma: matric normal around the posterior mean
        b = match draw_b_given_sigma(posterior, &sigma, &mut rng) {
            Some(draw) => draw,
            None => return Err(BvarError::NotPositiveDefinite { context: "sigma draw" }),
        };

        if iteration >= config.burn_in {
            draws.push(ReducedDraw {
                coefficients: b.clone(),
                sigma: sigma.clone(),
            });
        }
    }
    Ok(draws)
}

fn draw_b_given_sigma<R: Rng>(
    posterior: &NwPosterior,
    sigma: &DMatrix<f64>,
    rng: &mut R,
) -> Option<DMatrix<f64>> {
    let width = posterior.b_mean.nrows();
    let k = posterior.b_mean.ncols();
    let sigma_chol = sigma.clone().cholesky()?.l();
    let z = standard_normal_matrix(width, k, rng);
    // row covariance is the inverse posterior precision: with L L' = precision,
    // L^-T z has covariance (L L')^-1, reached by one upper-triangular solve
    let w = posterior
        .precision_chol
        .transpose()
        .solve_upper_triangular(&z)
        .expect("posterior precision factor is non-singular");
    Some(&posterior.b_mean + w * sigma_chol.transpose())
}

fn draw_b<R: Rng>(
    posterior: &NwPosterior,
    sigma_scale: &DMatrix<f64>,
    rng: &mut R,
) -> Option<DMatrix<f64>> {
    let k = posterior.b_mean.ncols();
    let sigma = sigma_scale / (posterior.alpha_bar - k as f64 - 1.0).max(1.0);
    draw_b_given_sigma(posterior, &sigma, rng)
}

/// Reduced-form residual panel: `countries x quarters x K`.
#[derive(Debug, Clone)]
pub struct ResidualPanel {
    pub countries: Vec<String>,
    pub quarters: Vec<Quarter>,
    pub k: usize,
    /// Row-major `[country][quarter][variable]`.
    pub values: Vec<f64>,
}

impl ResidualPanel {
    pub fn value(&self, country: usize, quarter: usize, variable: usize) -> f64 {
        self.values[(country * self.quarters.len() + quarter) * self.k + variable]
    }
}

/// Residuals `E = Y - X B` reshaped to the country panel layout.
pub fn reduced_residuals(design: &Design, coefficients: &DMatrix<f64>) -> ResidualPanel {
    let resid = &design.y - &design.x * coefficients;
    let t = design.t_effective();
    let k = design.k();
    let n = design.n_countries();
    let mut values = Vec::with_capacity(n * t * k);
    for c in 0..n {
        for time in 0..t {
            for j in 0..k {
                values.push(resid[(c * t + time, j)]);
            }
        }
    }
    ResidualPanel {
        countries: design.countries.clone(),
        quarters: design.quarters.clone(),
        k,
        values,
    }
}

/// Extracts the VAR lag matrices `A_1..A_p` (in `y_t = sum_l A_l y_{t-l}`
/// orientation) from a stacked coefficient matrix.
pub fn lag_matrices(coefficients: &DMatrix<f64>, k: usize, lags: usize) -> Vec<DMatrix<f64>> {
    (0..lags)
        .map(|l| coefficients.rows(l * k, k).transpose())
        .collect()
}

/// Reduced-form moving-average matrices Psi_0..Psi_H via the companion
/// recursion Psi_h = sum_{l<=min(h,p)} A_l Psi_{h-l}, Psi_0 = I.
///
/// Logs a warning when the companion matrix is explosive; the IRFs are still
/// returned.
pub fn companion_irf(lag_mats: &[DMatrix<f64>], horizons: usize) -> Vec<DMatrix<f64>> {
    let k = lag_mats.first().map_or(0, |m| m.nrows());
    let radius = companion_spectral_radius(lag_mats);
    if radius >= 1.0 {
        log::warn!("companion spectral radius {radius:.3} >= 1; impulse responses diverge");
    }
    let mut out: Vec<DMatrix<f64>> = Vec::with_capacity(horizons + 1);
    out.push(DMatrix::identity(k, k));
    for h in 1..=horizons {
        let mut psi = DMatrix::zeros(k, k);
        for (l, a) in lag_mats.iter().enumerate() {
            if l + 1 > h {
                break;
            }
            psi += a * &out[h - l - 1];
        }
        out.push(psi);
    }
    out
}

/// Spectral radius of the companion matrix of `A_1..A_p`.
pub fn companion_spectral_radius(lag_mats: &[DMatrix<f64>]) -> f64 {
    let p = lag_mats.len();
    if p == 0 {
        return 0.0;
    }
    let k = lag_mats[0].nrows();
    let dim = k * p;
    let mut companion = DMatrix::zeros(dim, dim);
    for (l, a) in lag_mats.iter().enumerate() {
        companion.view_mut((0, l * k), (k, k)).copy_from(a);
    }
    for i in k..dim {
        companion[(i, i - k)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .map(|e| e.norm())
        .fold(0.0, f64::max)
}

/// Writes posterior draws as `draw_id,matrix,row,col,value` with `matrix` in
/// `{coefficients, sigma}`.
pub fn write_draws_csv<W: std::io::Write>(
    writer: W,
    draws: &[ReducedDraw],
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["draw_id", "matrix", "row", "col", "value"])?;
    for (id, draw) in draws.iter().enumerate() {
        for (name, m) in [("coefficients", &draw.coefficients), ("sigma", &draw.sigma)] {
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    w.write_record([
                        id.to_string(),
                        name.to_string(),
                        r.to_string(),
                        c.to_string(),
                        m[(r, c)].to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
