//! Synthetic data generators with known ground truth.
//!
//! Every estimator in the crate gets an oracle here: panel VARs with a known
//! impact matrix, outcome processes with known asymmetric loadings, and
//! lognormal income populations whose Gini has a closed form. Generators are
//! deterministic under a seed, with independent substreams per country or
//! household.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::bvar::companion_spectral_radius;
use crate::dates::Quarter;
use crate::identification::{satisfies, RestrictionScheme, ShockPanel};
use crate::inequality::MicroRecord;
use crate::panel::PanelDataset;

/// Periods simulated and discarded before the kept sample; at the enforced
/// spectral radius cap the initial condition decays below f64 noise well
/// within this span.
const BURN_IN: usize = 200;

/// Spectral radius ceiling for generated systems.
pub const RADIUS_CAP: f64 = 0.9;

#[derive(Debug, Error)]
pub enum DgpError {
    #[error("companion spectral radius {radius} is not below 1")]
    Explosive { radius: f64 },
    #[error("impact matrix is singular")]
    SingularImpact,
    #[error("{name} must have {expected} entries, got {got}")]
    BadLength {
        name: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("lag matrix {index} is {rows}x{cols}, expected {k}x{k}")]
    BadLagShape {
        index: usize,
        rows: usize,
        cols: usize,
        k: usize,
    },
    #[error("no impact matrix found after {attempts} attempts")]
    SearchFailed { attempts: usize },
    #[error("{0}")]
    BadParams(String),
}

/// A fully specified panel VAR ground truth.
#[derive(Debug, Clone)]
pub struct DgpSpec {
    pub countries: Vec<String>,
    pub variables: Vec<String>,
    /// Kept sample length per country, after burn-in.
    pub t: usize,
    /// Lag matrices `B_1..B_p` in `y_t = mu_c + sum_l B_l y_{t-l} + A eps_t`.
    pub lag_mats: Vec<DMatrix<f64>>,
    /// True impact matrix `A`.
    pub impact: DMatrix<f64>,
    /// Country intercepts, one row per country.
    pub intercepts: DMatrix<f64>,
    pub start: Quarter,
    pub seed: u64,
}

impl DgpSpec {
    /// Validates shapes, stationarity, and impact invertibility.
    pub fn new(
        countries: Vec<String>,
        variables: Vec<String>,
        t: usize,
        lag_mats: Vec<DMatrix<f64>>,
        impact: DMatrix<f64>,
        intercepts: DMatrix<f64>,
        start: Quarter,
        seed: u64,
    ) -> Result<Self, DgpError> {
        let k = variables.len();
        let n = countries.len();
        for (index, m) in lag_mats.iter().enumerate() {
            if m.nrows() != k || m.ncols() != k {
                return Err(DgpError::BadLagShape {
                    index,
                    rows: m.nrows(),
                    cols: m.ncols(),
                    k,
                });
            }
        }
        if impact.nrows() != k || impact.ncols() != k {
            return Err(DgpError::BadLagShape {
                index: usize::MAX,
                rows: impact.nrows(),
                cols: impact.ncols(),
                k,
            });
        }
        if intercepts.nrows() != n || intercepts.ncols() != k {
            return Err(DgpError::BadLength {
                name: "intercepts",
                expected: n * k,
                got: intercepts.nrows() * intercepts.ncols(),
            });
        }
        if !lag_mats.is_empty() {
            let radius = companion_spectral_radius(&lag_mats);
            if radius >= 1.0 {
                return Err(DgpError::Explosive { radius });
            }
        }
        if impact.clone().lu().determinant().abs() < 1e-12 {
            return Err(DgpError::SingularImpact);
        }
        Ok(DgpSpec {
            countries,
            variables,
            t,
            lag_mats,
            impact,
            intercepts,
            start,
            seed,
        })
    }

    /// Random stationary system: lag matrices are drawn with iid normal
    /// entries and rescaled so the companion spectral radius equals
    /// `radius` exactly (scaling `B_l` by `c^l` scales every companion
    /// eigenvalue by `c`).
    pub fn random_stable(
        n: usize,
        t: usize,
        k: usize,
        p: usize,
        radius: f64,
        impact: DMatrix<f64>,
        seed: u64,
    ) -> Result<Self, DgpError> {
        if !(0.0..RADIUS_CAP + 1e-12).contains(&radius) {
            return Err(DgpError::BadParams(format!(
                "radius {radius} outside [0, {RADIUS_CAP}]"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX); // system draw; countries use streams 0..n
        let scale = 0.5 / (k as f64 * p as f64).sqrt();
        let mut lag_mats: Vec<DMatrix<f64>> = (0..p)
            .map(|_| DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal) * scale))
            .collect();
        let r0 = companion_spectral_radius(&lag_mats);
        if r0 > 0.0 {
            let c = radius / r0;
            for (l, m) in lag_mats.iter_mut().enumerate() {
                *m *= c.powi(l as i32 + 1);
            }
        }
        DgpSpec::new(
            default_countries(n),
            default_variables(k),
            t,
            lag_mats,
            impact,
            DMatrix::zeros(n, k),
            Quarter::new(2006, 1).expect("valid quarter"),
            seed,
        )
    }

    pub fn k(&self) -> usize {
        self.variables.len()
    }

    pub fn n(&self) -> usize {
        self.countries.len()
    }
}

pub fn default_countries(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("C{i:02}")).collect()
}

pub fn default_variables(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("v{i}")).collect()
}

/// Simulates the panel and returns it with the true structural shocks, one
/// panel per shock, on the same country and quarter axes.
pub fn simulate_var_panel(spec: &DgpSpec) -> (PanelDataset, Vec<ShockPanel>) {
    let k = spec.k();
    let n = spec.n();
    let p = spec.lag_mats.len();
    let quarters = {
        let mut q = spec.start;
        let mut out = Vec::with_capacity(spec.t);
        for _ in 0..spec.t {
            out.push(q);
            q = q.next();
        }
        out
    };
    let mut values = vec![0.0; n * spec.t * k];
    let mut shock_values = vec![vec![0.0; n * spec.t]; k];
    for c in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(c as u64);
        let total = BURN_IN + spec.t;
        let mut history: Vec<Vec<f64>> = Vec::with_capacity(total);
        for t in 0..total {
            let eps: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
            let mut y: Vec<f64> = (0..k)
                .map(|i| {
                    spec.intercepts[(c, i)]
                        + (0..k).map(|j| spec.impact[(i, j)] * eps[j]).sum::<f64>()
                })
                .collect();
            for (l, b) in spec.lag_mats.iter().enumerate() {
                if t > l {
                    let past = &history[t - 1 - l];
                    for i in 0..k {
                        for j in 0..k {
                            y[i] += b[(i, j)] * past[j];
                        }
                    }
                }
            }
            if t >= BURN_IN {
                let kept = t - BURN_IN;
                for i in 0..k {
                    values[(c * spec.t + kept) * k + i] = y[i];
                    shock_values[i][c * spec.t + kept] = eps[i];
                }
            }
            history.push(y);
        }
        let _ = p;
    }
    let panel = PanelDataset::from_parts(
        spec.countries.clone(),
        quarters.clone(),
        spec.variables.clone(),
        values,
    );
    let shocks = shock_values
        .into_iter()
        .map(|values| ShockPanel {
            countries: spec.countries.clone(),
            quarters: quarters.clone(),
            values,
        })
        .collect();
    (panel, shocks)
}

/// Margin enforced on restricted cells of generated impact matrices.
pub const IMPACT_MARGIN: f64 = 0.2;

/// Builds an impact matrix strictly satisfying the scheme: restricted cells
/// get the required sign with magnitude at least [`IMPACT_MARGIN`],
/// unrestricted cells stay small so the target is cleanly identified, and
/// candidates are redrawn until the determinant is bounded away from zero.
pub fn make_sign_separated_impact(
    scheme: &RestrictionScheme,
    seed: u64,
) -> Result<DMatrix<f64>, DgpError> {
    use crate::identification::Restriction;
    let k = scheme.k();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const MAX_ATTEMPTS: usize = 500;
    for _ in 0..MAX_ATTEMPTS {
        let a = DMatrix::from_fn(k, k, |i, j| match scheme.sign(i, j) {
            Restriction::Positive => IMPACT_MARGIN + rng.gen::<f64>() * 0.8,
            Restriction::Negative => -(IMPACT_MARGIN + rng.gen::<f64>() * 0.8),
            Restriction::Unrestricted => rng.sample::<f64, _>(StandardNormal) * 0.1,
        });
        if a.clone().lu().determinant().abs() > 1e-6 && satisfies(&a, scheme) {
            return Ok(a);
        }
    }
    Err(DgpError::SearchFailed {
        attempts: MAX_ATTEMPTS,
    })
}

/// Loadings for an outcome responding asymmetrically to shock signs.
#[derive(Debug, Clone)]
pub struct AsymmetricOutcomeSpec {
    /// Response to `max(0, eps_{t-h})` at each horizon `h`.
    pub theta_pos: Vec<f64>,
    /// Response to `min(0, eps_{t-h})` at each horizon `h`.
    pub theta_neg: Vec<f64>,
    pub noise_scale: f64,
    pub seed: u64,
}

impl AsymmetricOutcomeSpec {
    pub fn new(
        theta_pos: Vec<f64>,
        theta_neg: Vec<f64>,
        noise_scale: f64,
        seed: u64,
    ) -> Result<Self, DgpError> {
        if theta_pos.len() != theta_neg.len() {
            return Err(DgpError::BadLength {
                name: "theta_neg",
                expected: theta_pos.len(),
                got: theta_neg.len(),
            });
        }
        if theta_pos.is_empty() {
            return Err(DgpError::BadParams("loadings must cover horizon 0".into()));
        }
        let finite = theta_pos
            .iter()
            .chain(&theta_neg)
            .chain(std::iter::once(&noise_scale))
            .all(|v| v.is_finite());
        if !finite {
            return Err(DgpError::BadParams("loadings must be finite".into()));
        }
        Ok(AsymmetricOutcomeSpec {
            theta_pos,
            theta_neg,
            noise_scale,
            seed,
        })
    }

    /// Largest horizon with a loading.
    pub fn max_horizon(&self) -> usize {
        self.theta_pos.len() - 1
    }
}

/// Simulates `y_{i,t} = sum_h theta_pos_h max(0, eps_{i,t-h}) +
/// theta_neg_h min(0, eps_{i,t-h}) + noise`. The first `max_horizon`
/// periods of the shock panel are consumed as lead-in, so the outcome
/// starts `max_horizon` quarters after the shock panel does and the axes
/// returned are the outcome's.
pub fn simulate_outcome(
    shocks: &ShockPanel,
    spec: &AsymmetricOutcomeSpec,
) -> Result<(Vec<Quarter>, DMatrix<f64>), DgpError> {
    let h_max = spec.max_horizon();
    let t = shocks.quarters.len();
    if t <= h_max {
        return Err(DgpError::BadParams(format!(
            "shock panel has {t} periods, loadings need more than {h_max}"
        )));
    }
    let n = shocks.countries.len();
    let t_out = t - h_max;
    let mut out = DMatrix::zeros(n, t_out);
    for c in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(c as u64);
        for s in 0..t_out {
            let t_shock = s + h_max;
            let mut y = spec.noise_scale * rng.sample::<f64, _>(StandardNormal);
            for (h, (tp, tn)) in spec.theta_pos.iter().zip(&spec.theta_neg).enumerate() {
                let eps = shocks.value(c, t_shock - h);
                y += tp * eps.max(0.0) + tn * eps.min(0.0);
            }
            out[(c, s)] = y;
        }
    }
    Ok((shocks.quarters[h_max..].to_vec(), out))
}

/// Lognormal income population parameters.
#[derive(Debug, Clone)]
pub struct MicrodataParams {
    pub households: usize,
    pub country: String,
    pub year: i32,
    /// Log-scale location and spread of labor income per worker.
    pub mu: f64,
    pub sigma: f64,
    /// Probability weights for household sizes `1..=len`.
    pub size_weights: Vec<f64>,
    /// Financial-income participation probability at the top of the income
    /// rank; actual probability is this times the household's income rank
    /// in `(0, 1)`.
    pub fin_participation: f64,
    pub fin_mu: f64,
    pub fin_sigma: f64,
    /// Log premium added to `mu` for high-skill workers; the population log
    /// skill premium equals this by construction.
    pub skill_premium_log: f64,
    pub high_skill_share: f64,
}

impl MicrodataParams {
    pub fn validate(&self) -> Result<(), DgpError> {
        if self.households == 0 {
            return Err(DgpError::BadParams("need at least one household".into()));
        }
        if self.sigma < 0.0 || self.fin_sigma < 0.0 {
            return Err(DgpError::BadParams("sigma must be nonnegative".into()));
        }
        if self.size_weights.is_empty() || self.size_weights.iter().any(|w| *w < 0.0) {
            return Err(DgpError::BadParams("size weights must be nonnegative".into()));
        }
        if self.size_weights.iter().sum::<f64>() <= 0.0 {
            return Err(DgpError::BadParams("size weights must not all be zero".into()));
        }
        if !(0.0..=1.0).contains(&self.fin_participation)
            || !(0.0..=1.0).contains(&self.high_skill_share)
        {
            return Err(DgpError::BadParams("probabilities must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// All households single-adult: equivalised income is then exactly the
    /// worker's lognormal draw, so the closed-form lognormal Gini applies.
    pub fn single_adult(households: usize, mu: f64, sigma: f64, seed_year: i32) -> Self {
        MicrodataParams {
            households,
            country: "SY".to_string(),
            year: seed_year,
            mu,
            sigma,
            size_weights: vec![1.0],
            fin_participation: 0.5,
            fin_mu: mu - 1.0,
            fin_sigma: sigma,
            skill_premium_log: 0.4,
            high_skill_share: 0.3,
        }
    }
}

fn sample_categorical(weights: &[f64], total: f64, u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w / total;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Draws a synthetic survey: household sizes from the weight vector, one
/// lognormal labor income per working-age member (skill premium as a log
/// shift), and sparse lognormal financial income for the first member with
/// participation probability proportional to the household's position in
/// the labor-income rank.
pub fn simulate_microdata(params: &MicrodataParams, seed: u64) -> Result<Vec<MicroRecord>, DgpError> {
    params.validate()?;
    let size_total: f64 = params.size_weights.iter().sum();
    let normal = StandardNormal;
    struct Draft {
        ages: Vec<u32>,
        skills: Vec<Option<u8>>,
        labor: Vec<Option<f64>>,
        hours: Vec<Option<f64>>,
        total_labor: f64,
    }
    let mut drafts = Vec::with_capacity(params.households);
    for hh in 0..params.households {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(hh as u64);
        let size = sample_categorical(&params.size_weights, size_total, rng.gen::<f64>()) + 1;
        let mut ages = Vec::with_capacity(size);
        let mut skills = Vec::with_capacity(size);
        let mut labor = Vec::with_capacity(size);
        let mut hours = Vec::with_capacity(size);
        let mut total_labor = 0.0;
        for member in 0..size {
            // first member is always a working-age adult; later members mix
            // adults and children
            let age: u32 = if member == 0 {
                rng.gen_range(25..=59)
            } else {
                rng.gen_range(0..=59)
            };
            ages.push(age);
            if (15..=64).contains(&age) {
                let high = rng.gen::<f64>() < params.high_skill_share;
                let skill = if high {
                    3 + rng.gen_range(0..=1u8)
                } else {
                    1 + rng.gen_range(0..=1u8)
                };
                let shift = if high { params.skill_premium_log } else { 0.0 };
                let z: f64 = normal.sample(&mut rng);
                let income = (params.mu + shift + params.sigma * z).exp();
                total_labor += income;
                skills.push(Some(skill));
                labor.push(Some(income));
                hours.push(Some(30.0 + rng.gen::<f64>() * 15.0));
            } else {
                skills.push(None);
                labor.push(None);
                hours.push(None);
            }
        }
        drafts.push(Draft {
            ages,
            skills,
            labor,
            hours,
            total_labor,
        });
    }

    // income rank over households, then one participation draw each from a
    // stream disjoint from the household streams
    let mut order: Vec<usize> = (0..params.households).collect();
    order.sort_by(|a, b| {
        drafts[*a]
            .total_labor
            .total_cmp(&drafts[*b].total_labor)
            .then(a.cmp(b))
    });
    let mut rank_pct = vec![0.0; params.households];
    for (pos, hh) in order.iter().enumerate() {
        rank_pct[*hh] = (pos as f64 + 0.5) / params.households as f64;
    }
    let mut fin_rng = ChaCha8Rng::seed_from_u64(seed);
    fin_rng.set_stream(u64::MAX);

    let mut records = Vec::new();
    for (hh, draft) in drafts.iter().enumerate() {
        let participates = fin_rng.gen::<f64>() < params.fin_participation * rank_pct[hh];
        let fin_income = if participates {
            let z: f64 = normal.sample(&mut fin_rng);
            Some((params.fin_mu + params.fin_sigma * z).exp())
        } else {
            // keep the draw count per household fixed so participation
            // changes do not shift later households' randomness
            let _: f64 = normal.sample(&mut fin_rng);
            None
        };
        for member in 0..draft.ages.len() {
            records.push(MicroRecord {
                household_id: format!("H{hh:06}"),
                person_id: format!("P{member}"),
                country: params.country.clone(),
                year: params.year,
                weight: 1.0,
                age: draft.ages[member],
                skill_level: draft.skills[member],
                income_labor: draft.labor[member],
                income_financial: if member == 0 { fin_income } else { None },
                hours_per_week: draft.hours[member],
            });
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identification::scheme;
    use crate::inequality::{component_gini, equivalise_records, gini, InequalityError};
    use crate::panel::PanelStore;
    use approx::assert_relative_eq;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn identity_spec(n: usize, t: usize, k: usize, seed: u64) -> DgpSpec {
        DgpSpec::new(
            default_countries(n),
            default_variables(k),
            t,
            vec![],
            DMatrix::identity(k, k),
            DMatrix::zeros(n, k),
            Quarter::new(2006, 1).unwrap(),
            seed,
        )
        .unwrap()
    }

    #[test]
    fn without_dynamics_the_panel_is_the_shocks() {
        let spec = identity_spec(3, 40, 2, 1);
        let (panel, shocks) = simulate_var_panel(&spec);
        for c in 0..3 {
            for t in 0..40 {
                for k in 0..2 {
                    assert_eq!(panel.value(c, t, k), shocks[k].value(c, t));
                }
            }
        }
    }

    #[test]
    fn same_seed_reproduces_the_panel() {
        let impact = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, -0.2, 0.8]);
        let spec = DgpSpec::random_stable(4, 30, 2, 2, 0.6, impact.clone(), 7).unwrap();
        let (a, sa) = simulate_var_panel(&spec);
        let (b, sb) = simulate_var_panel(&spec);
        assert_eq!(a.values(), b.values());
        assert_eq!(sa[0].values, sb[0].values);
        let other = DgpSpec::random_stable(4, 30, 2, 2, 0.6, impact, 8).unwrap();
        let (c, _) = simulate_var_panel(&other);
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn sample_covariance_matches_the_impact_gram() {
        let impact = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 0.8]);
        let spec = DgpSpec::new(
            default_countries(2),
            default_variables(2),
            20_000,
            vec![],
            impact.clone(),
            DMatrix::zeros(2, 2),
            Quarter::new(2006, 1).unwrap(),
            3,
        )
        .unwrap();
        let (panel, _) = simulate_var_panel(&spec);
        let gram = &impact * impact.transpose();
        let t = 20_000;
        for a in 0..2 {
            for b in 0..2 {
                let mut cov = 0.0;
                for s in 0..t {
                    cov += panel.value(0, s, a) * panel.value(0, s, b);
                }
                cov /= t as f64;
                assert!(
                    (cov - gram[(a, b)]).abs() < 0.05,
                    "cov[{a},{b}] = {cov}, expected {}",
                    gram[(a, b)]
                );
            }
        }
    }

    #[test]
    fn explosive_systems_are_rejected() {
        let lag = DMatrix::from_row_slice(1, 1, &[1.05]);
        let err = DgpSpec::new(
            default_countries(1),
            default_variables(1),
            10,
            vec![lag],
            DMatrix::identity(1, 1),
            DMatrix::zeros(1, 1),
            Quarter::new(2006, 1).unwrap(),
            0,
        )
        .unwrap_err();
        assert!(matches!(err, DgpError::Explosive { .. }));
        assert!(DgpSpec::random_stable(1, 10, 1, 1, 1.2, DMatrix::identity(1, 1), 0).is_err());
    }

    #[test]
    fn random_stable_hits_the_requested_radius() {
        let spec = DgpSpec::random_stable(2, 10, 3, 2, 0.8, DMatrix::identity(3, 3), 11).unwrap();
        let radius = companion_spectral_radius(&spec.lag_mats);
        assert_relative_eq!(radius, 0.8, epsilon = 1e-10);
    }

    #[test]
    fn singular_impact_is_rejected() {
        let impact = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let err = DgpSpec::new(
            default_countries(1),
            default_variables(2),
            10,
            vec![],
            impact,
            DMatrix::zeros(1, 2),
            Quarter::new(2006, 1).unwrap(),
            0,
        )
        .unwrap_err();
        assert!(matches!(err, DgpError::SingularImpact));
    }

    #[test]
    fn simulated_panels_survive_the_balanced_alignment_round_trip() {
        let spec = identity_spec(3, 24, 2, 5);
        let (panel, _) = simulate_var_panel(&spec);
        let mut buffer = Vec::new();
        panel.to_csv_writer(&mut buffer).unwrap();
        let store = PanelStore::from_csv_reader(buffer.as_slice()).unwrap();
        let country_refs: Vec<&str> = spec.countries.iter().map(|s| s.as_str()).collect();
        let variable_refs: Vec<&str> = spec.variables.iter().map(|s| s.as_str()).collect();
        let aligned = store
            .align_balanced(
                &country_refs,
                (spec.start, *panel.quarters().last().unwrap()),
                &variable_refs,
            )
            .unwrap();
        assert_eq!(aligned.values(), panel.values());
    }

    #[test]
    fn generated_impacts_satisfy_their_scheme_with_margin() {
        for name in ["baseline", "credit", "volatility_signed"] {
            let s = scheme(name).unwrap();
            let a = make_sign_separated_impact(&s, 42).unwrap();
            assert!(satisfies(&a, &s), "{name}");
            use crate::identification::Restriction;
            for i in 0..s.k() {
                for j in 0..s.k() {
                    if s.sign(i, j) != Restriction::Unrestricted {
                        assert!(
                            a[(i, j)].abs() >= IMPACT_MARGIN,
                            "{name} cell ({i},{j}) margin {}",
                            a[(i, j)].abs()
                        );
                    }
                }
            }
            assert!(a.clone().lu().determinant().abs() > 1e-6, "{name}");
        }
    }

    #[test]
    fn outcome_with_unit_impact_loading_reproduces_the_shock() {
        let spec = identity_spec(2, 30, 1, 9);
        let (_, shocks) = simulate_var_panel(&spec);
        let outcome_spec = AsymmetricOutcomeSpec::new(vec![1.0], vec![1.0], 0.0, 0).unwrap();
        let (quarters, outcome) = simulate_outcome(&shocks[0], &outcome_spec).unwrap();
        assert_eq!(quarters.len(), 30);
        for c in 0..2 {
            for t in 0..30 {
                assert_eq!(outcome[(c, t)], shocks[0].value(c, t));
            }
        }
    }

    #[test]
    fn outcome_lead_in_consumes_max_horizon_periods() {
        let spec = identity_spec(1, 20, 1, 10);
        let (_, shocks) = simulate_var_panel(&spec);
        let outcome_spec =
            AsymmetricOutcomeSpec::new(vec![1.0, 0.5, 0.25], vec![0.0, 0.0, 0.0], 0.0, 0).unwrap();
        let (quarters, outcome) = simulate_outcome(&shocks[0], &outcome_spec).unwrap();
        assert_eq!(quarters.len(), 18);
        assert_eq!(quarters[0], shocks[0].quarters[2]);
        // spot-check the convolution at the first outcome period
        let expected = shocks[0].value(0, 2).max(0.0)
            + 0.5 * shocks[0].value(0, 1).max(0.0)
            + 0.25 * shocks[0].value(0, 0).max(0.0);
        assert_relative_eq!(outcome[(0, 0)], expected, epsilon = 1e-14);
        // mismatched loading lengths are rejected
        assert!(AsymmetricOutcomeSpec::new(vec![1.0], vec![1.0, 0.0], 0.0, 0).is_err());
    }

    #[test]
    fn degenerate_sigma_gives_zero_gini() {
        let params = MicrodataParams {
            skill_premium_log: 0.0,
            ..MicrodataParams::single_adult(500, 1.0, 0.0, 2020)
        };
        let records = simulate_microdata(&params, 1).unwrap();
        let persons = equivalise_records(&records).unwrap();
        let values: Vec<f64> = persons.iter().map(|p| p.labor).collect();
        let weights: Vec<f64> = persons.iter().map(|p| p.weight).collect();
        assert_eq!(gini(&values, &weights).unwrap(), 0.0);
    }

    #[test]
    fn lognormal_gini_matches_the_closed_form() {
        let sigma = 0.8;
        let params = MicrodataParams {
            skill_premium_log: 0.0,
            ..MicrodataParams::single_adult(100_000, 0.5, sigma, 2020)
        };
        let records = simulate_microdata(&params, 2).unwrap();
        let persons = equivalise_records(&records).unwrap();
        let values: Vec<f64> = persons.iter().map(|p| p.total).collect();
        let weights: Vec<f64> = persons.iter().map(|p| p.weight).collect();
        let g = gini(&values, &weights).unwrap();
        let normal = Normal::new(0.0, 1.0).unwrap();
        let expected = 100.0 * (2.0 * normal.cdf(sigma / std::f64::consts::SQRT_2) - 1.0);
        assert!(
            (g - expected).abs() < 1.0,
            "gini {g}, closed form {expected}"
        );
    }

    #[test]
    fn zero_participation_leaves_the_financial_component_undefined() {
        let params = MicrodataParams {
            fin_participation: 0.0,
            ..MicrodataParams::single_adult(200, 1.0, 0.5, 2020)
        };
        let records = simulate_microdata(&params, 3).unwrap();
        let persons = equivalise_records(&records).unwrap();
        let values: Vec<f64> = persons.iter().map(|p| p.financial).collect();
        let weights: Vec<f64> = persons.iter().map(|p| p.weight).collect();
        assert!(matches!(
            component_gini(&values, &weights),
            Err(InequalityError::UndefinedGini { .. })
        ));
    }

    #[test]
    fn participation_rises_with_income_rank() {
        let params = MicrodataParams {
            fin_participation: 0.9,
            ..MicrodataParams::single_adult(20_000, 1.0, 0.7, 2020)
        };
        let records = simulate_microdata(&params, 4).unwrap();
        // heads only; compare participation in the bottom and top halves
        let mut heads: Vec<&MicroRecord> = records.iter().filter(|r| r.person_id == "P0").collect();
        heads.sort_by(|a, b| {
            a.income_labor
                .unwrap_or(0.0)
                .total_cmp(&b.income_labor.unwrap_or(0.0))
        });
        let half = heads.len() / 2;
        let participation = |slice: &[&MicroRecord]| {
            slice.iter().filter(|r| r.income_financial.is_some()).count() as f64
                / slice.len() as f64
        };
        let bottom = participation(&heads[..half]);
        let top = participation(&heads[half..]);
        assert!(
            top > bottom + 0.2,
            "top participation {top}, bottom {bottom}"
        );
    }

    #[test]
    fn household_sizes_follow_the_weights() {
        let params = MicrodataParams {
            size_weights: vec![0.5, 0.0, 0.5],
            ..MicrodataParams::single_adult(4000, 1.0, 0.5, 2020)
        };
        let records = simulate_microdata(&params, 5).unwrap();
        let mut sizes = std::collections::BTreeMap::<&str, usize>::new();
        for r in &records {
            *sizes.entry(r.household_id.as_str()).or_default() += 1;
        }
        let ones = sizes.values().filter(|s| **s == 1).count() as f64;
        let threes = sizes.values().filter(|s| **s == 3).count() as f64;
        assert_eq!(sizes.len(), 4000);
        assert!(sizes.values().all(|s| *s == 1 || *s == 3));
        assert!((ones / 4000.0 - 0.5).abs() < 0.05);
        assert!((threes / 4000.0 - 0.5).abs() < 0.05);
    }

    #[test]
    fn microdata_generation_is_deterministic() {
        let params = MicrodataParams::single_adult(300, 1.0, 0.6, 2020);
        let a = simulate_microdata(&params, 6).unwrap();
        let b = simulate_microdata(&params, 6).unwrap();
        assert_eq!(a.len(), b.len());
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.income_labor, rb.income_labor);
            assert_eq!(ra.income_financial, rb.income_financial);
        }
        let c = simulate_microdata(&params, 7).unwrap();
        assert!(a.iter().zip(&c).any(|(ra, rc)| ra.income_labor != rc.income_labor));
    }
}
