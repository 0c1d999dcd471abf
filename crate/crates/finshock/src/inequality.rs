//! Weighted inequality measures over survey microdata.
//!
//! Persons arrive as flat records (one row per person, grouped into
//! households by id). Household income is equivalised with the modified OECD
//! scale and assigned to every member, and all distributional statistics are
//! survey-weighted: Gini coefficients (reported in percent), percentiles,
//! within-quintile Ginis, a positive-subsample component Gini, a skill
//! premium, and the share of financial income by overall-income percentile.
//!
//! The Gini is the pairwise mean difference form
//!
//! ```text
//!             sum_i sum_j w_i w_j |x_i - x_j|
//!     G = 100 -------------------------------
//!                  2 (sum_i w_i)^2 mu_w
//! ```
//!
//! computed in O(n log n) from the sorted cumulative form; the quadratic
//! definition serves as the test oracle.

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One person-row of the microdata file. Empty CSV fields become `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroRecord {
    pub household_id: String,
    pub person_id: String,
    pub country: String,
    pub year: i32,
    pub weight: f64,
    pub age: u32,
    pub skill_level: Option<u8>,
    pub income_labor: Option<f64>,
    pub income_financial: Option<f64>,
    pub hours_per_week: Option<f64>,
}

#[derive(Debug, Error)]
pub enum InequalityError {
    #[error("empty input")]
    EmptyInput,
    #[error("values and weights differ in length ({values} vs {weights})")]
    LengthMismatch { values: usize, weights: usize },
    #[error("non-finite value at position {index}")]
    NonFiniteValue { index: usize },
    #[error("weight at position {index} is {weight}, expected > 0")]
    BadWeight { index: usize, weight: f64 },
    #[error("negative value {value} at position {index}; Gini requires non-negative inputs")]
    NegativeValue { index: usize, value: f64 },
    #[error("percentile {p} outside (0, 100)")]
    BadPercentile { p: f64 },
    #[error("Gini undefined: {reason}")]
    UndefinedGini { reason: String },
    #[error("skill premium undefined: no {group} participants")]
    NoParticipants { group: &'static str },
    #[error("household {household_id} has no members")]
    EmptyHousehold { household_id: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {line}: invalid {field} {content:?}")]
    ParseRow {
        line: u64,
        field: &'static str,
        content: String,
    },
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

fn validate(values: &[f64], weights: &[f64]) -> Result<(), InequalityError> {
    if values.is_empty() {
        return Err(InequalityError::EmptyInput);
    }
    if values.len() != weights.len() {
        return Err(InequalityError::LengthMismatch {
            values: values.len(),
            weights: weights.len(),
        });
    }
    for (index, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(InequalityError::NonFiniteValue { index });
        }
    }
    for (index, w) in weights.iter().enumerate() {
        if !w.is_finite() || *w <= 0.0 {
            return Err(InequalityError::BadWeight { index, weight: *w });
        }
    }
    Ok(())
}

/// Weighted Gini coefficient in percent, for non-negative values.
///
/// Equal inputs (including all-zero) give exactly 0. Equivalent to the
/// pairwise mean-difference definition but computed from one sorted pass.
pub fn gini(values: &[f64], weights: &[f64]) -> Result<f64, InequalityError> {
    validate(values, weights)?;
    for (index, v) in values.iter().enumerate() {
        if *v < 0.0 {
            return Err(InequalityError::NegativeValue { index, value: *v });
        }
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    // a constant distribution has Gini 0 by definition; the pairwise sum
    // below only cancels to zero in exact arithmetic
    if values[order[0]] == values[order[values.len() - 1]] {
        return Ok(0.0);
    }
    let w_total: f64 = order.iter().map(|&i| weights[i]).sum();
    let wx_total: f64 = order.iter().map(|&i| weights[i] * values[i]).sum();
    // sum_{i,j} w_i w_j |x_i - x_j| = 2 sum_i w_i x_i (2 C_i - w_i - W)
    // with C_i the cumulative weight through i in ascending value order.
    let mut cumulative = 0.0;
    let mut pair_sum = 0.0;
    for &i in &order {
        cumulative += weights[i];
        pair_sum += weights[i] * values[i] * (2.0 * cumulative - weights[i] - w_total);
    }
    pair_sum *= 2.0;
    if pair_sum == 0.0 {
        return Ok(0.0);
    }
    if wx_total <= 0.0 {
        return Err(InequalityError::UndefinedGini {
            reason: format!("weighted mean {} is not positive", wx_total / w_total),
        });
    }
    Ok(100.0 * pair_sum / (2.0 * w_total * wx_total))
}

/// Smallest value whose weighted CDF weakly exceeds `p/100`.
///
/// The CDF is the left-continuous step function of the weighted sample, so
/// for `n` equally weighted points this is the `ceil(n p / 100)`-th order
/// statistic.
pub fn weighted_percentile(values: &[f64], weights: &[f64], p: f64) -> Result<f64, InequalityError> {
    validate(values, weights)?;
    if !(0.0 < p && p < 100.0) {
        return Err(InequalityError::BadPercentile { p });
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let w_total: f64 = weights.iter().sum();
    let mut cumulative = 0.0;
    for &i in &order {
        cumulative += weights[i];
        // cumulative/W >= p/100, kept division-free so exact ties stay exact
        if cumulative * 100.0 >= p * w_total {
            return Ok(values[i]);
        }
    }
    Ok(values[*order.last().expect("non-empty")])
}

/// Within-quintile Gini coefficients.
///
/// Quintile cut points are the weighted 20/40/60/80 percentiles; a person
/// exactly at a cut point belongs to the lower quintile, so quintile `q`
/// covers `(c_{q-1}, c_q]`.
pub fn quintile_gini(values: &[f64], weights: &[f64]) -> Result<[f64; 5], InequalityError> {
    validate(values, weights)?;
    let cuts = [
        weighted_percentile(values, weights, 20.0)?,
        weighted_percentile(values, weights, 40.0)?,
        weighted_percentile(values, weights, 60.0)?,
        weighted_percentile(values, weights, 80.0)?,
    ];
    let mut out = [0.0; 5];
    for q in 0..5 {
        let mut vs = Vec::new();
        let mut ws = Vec::new();
        for (v, w) in values.iter().zip(weights) {
            let above_lower = q == 0 || *v > cuts[q - 1];
            let within_upper = q == 4 || *v <= cuts[q];
            if above_lower && within_upper {
                vs.push(*v);
                ws.push(*w);
            }
        }
        if vs.is_empty() {
            return Err(InequalityError::UndefinedGini {
                reason: format!("quintile {} is empty", q + 1),
            });
        }
        out[q] = gini(&vs, &ws)?;
    }
    Ok(out)
}

/// Gini of the strictly positive subsample (the intensive margin).
///
/// Zeros and negatives are dropped before computing; an input with no
/// positive value has no defined component Gini.
pub fn component_gini(values: &[f64], weights: &[f64]) -> Result<f64, InequalityError> {
    validate(values, weights)?;
    let mut vs = Vec::new();
    let mut ws = Vec::new();
    for (v, w) in values.iter().zip(weights) {
        if *v > 0.0 {
            vs.push(*v);
            ws.push(*w);
        }
    }
    if vs.is_empty() {
        return Err(InequalityError::UndefinedGini {
            reason: "no strictly positive values".to_string(),
        });
    }
    gini(&vs, &ws)
}

/// Modified OECD equivalence factor for a household with the given member
/// ages: 1.0 for the first member (oldest first), 0.5 for each further member
/// aged 14 or over, 0.3 for each child under 14.
pub fn equivalence_factor(ages: &[u32]) -> Result<f64, InequalityError> {
    if ages.is_empty() {
        return Err(InequalityError::EmptyHousehold {
            household_id: String::new(),
        });
    }
    let mut sorted = ages.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let mut factor = 1.0;
    for age in &sorted[1..] {
        factor += if *age >= 14 { 0.5 } else { 0.3 };
    }
    Ok(factor)
}

/// Equivalised per-person value: household total divided by the equivalence
/// factor, assigned identically to every member.
pub fn equivalise(household_total: f64, ages: &[u32]) -> Result<f64, InequalityError> {
    Ok(household_total / equivalence_factor(ages)?)
}

/// Share of total financial income held by each overall-income percentile
/// bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareCurve {
    /// Shares for buckets 1..=99; bucket `b` covers persons strictly above
    /// the `(b-1)`-th and weakly below the `b`-th weighted percentile of
    /// overall income.
    pub shares: Vec<f64>,
    /// Share of the top bucket (above the 99th percentile), reported
    /// separately and excluded from the 99-point curve.
    pub top_share: f64,
}

/// Financial income share by overall-income percentile bucket.
///
/// `overall` ranks persons, `financial` is summed within buckets, and shares
/// are fractions of the grand financial total, so all 100 bucket shares
/// (curve plus top) sum to 1.
pub fn income_share_curve(
    overall: &[f64],
    financial: &[f64],
    weights: &[f64],
) -> Result<ShareCurve, InequalityError> {
    validate(overall, weights)?;
    if financial.len() != overall.len() {
        return Err(InequalityError::LengthMismatch {
            values: financial.len(),
            weights: overall.len(),
        });
    }
    let mut cuts = Vec::with_capacity(99);
    for p in 1..=99 {
        cuts.push(weighted_percentile(overall, weights, f64::from(p))?);
    }
    let mut bucket_sums = [0.0f64; 100];
    for ((x, fin), w) in overall.iter().zip(financial).zip(weights) {
        // number of cut points strictly below x = zero-based bucket index
        let bucket = cuts.partition_point(|c| c < x);
        bucket_sums[bucket] += fin * w;
    }
    let grand_total: f64 = bucket_sums.iter().sum();
    if grand_total == 0.0 {
        return Err(InequalityError::UndefinedGini {
            reason: "total financial income is zero".to_string(),
        });
    }
    let shares: Vec<f64> = bucket_sums[..99].iter().map(|s| s / grand_total).collect();
    Ok(ShareCurve {
        shares,
        top_share: bucket_sums[99] / grand_total,
    })
}

/// Skill premium: weighted mean labor income of high-skill workers (levels 3
/// and 4) over low-skill workers (levels 1 and 2), among persons of working
/// age 15..=64 with positive labor income. Returned as a log ratio by
/// default, or as the plain ratio when `log_ratio` is false.
pub fn skill_premium(records: &[MicroRecord], log_ratio: bool) -> Result<f64, InequalityError> {
    let mut sums = [(0.0f64, 0.0f64); 2];
    for r in records {
        if !(15..=64).contains(&r.age) {
            continue;
        }
        let (Some(skill), Some(income)) = (r.skill_level, r.income_labor) else {
            continue;
        };
        if income <= 0.0 {
            continue;
        }
        let group = match skill {
            1 | 2 => 0,
            3 | 4 => 1,
            _ => continue,
        };
        sums[group].0 += r.weight * income;
        sums[group].1 += r.weight;
    }
    if sums[0].1 == 0.0 {
        return Err(InequalityError::NoParticipants { group: "low-skill" });
    }
    if sums[1].1 == 0.0 {
        return Err(InequalityError::NoParticipants { group: "high-skill" });
    }
    let ratio = (sums[1].0 / sums[1].1) / (sums[0].0 / sums[0].1);
    Ok(if log_ratio { ratio.ln() } else { ratio })
}

/// A person with equivalised household income components attached.
#[derive(Debug, Clone)]
pub struct EquivalisedPerson {
    pub weight: f64,
    pub total: f64,
    pub labor: f64,
    pub financial: f64,
}

/// Groups records into households and assigns each member its equivalised
/// total, labor, and financial income. Absent income fields count as zero in
/// the household sums. Output order follows the input record order.
pub fn equivalise_records(records: &[MicroRecord]) -> Result<Vec<EquivalisedPerson>, InequalityError> {
    let mut households: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        households.entry(&r.household_id).or_default().push(i);
    }
    let mut per_person = vec![
        EquivalisedPerson {
            weight: 0.0,
            total: 0.0,
            labor: 0.0,
            financial: 0.0
        };
        records.len()
    ];
    for members in households.values() {
        let ages: Vec<u32> = members.iter().map(|&i| records[i].age).collect();
        let labor: f64 = members.iter().map(|&i| records[i].income_labor.unwrap_or(0.0)).sum();
        let financial: f64 =
            members.iter().map(|&i| records[i].income_financial.unwrap_or(0.0)).sum();
        let factor = equivalence_factor(&ages)?;
        for &i in members {
            per_person[i] = EquivalisedPerson {
                weight: records[i].weight,
                total: (labor + financial) / factor,
                labor: labor / factor,
                financial: financial / factor,
            };
        }
    }
    Ok(per_person)
}

/// One measure value for one country-year cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureRow {
    pub country: String,
    pub year: i32,
    pub measure: String,
    pub value: f64,
}

/// Standard per-country-year measure set over equivalised incomes.
///
/// Emits `gini_total`, `gini_labor`, `gini_financial` (intensive margin),
/// `gini_q1`..`gini_q5`, `p90`, `p95`, and `skill_premium` for every
/// (country, year) cell, sorted by country, year, then measure name. Persons
/// with negative equivalised total income are excluded from the
/// distributional measures; the exclusion count is logged. Measures whose
/// subsample is degenerate for a cell (for example no financial income at
/// all) are skipped rather than failing the whole batch.
pub fn compute_measures(records: &[MicroRecord]) -> Result<Vec<MeasureRow>, InequalityError> {
    let mut cells: BTreeMap<(String, i32), Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        cells.entry((r.country.clone(), r.year)).or_default().push(i);
    }
    let mut rows = Vec::new();
    for ((country, year), indices) in cells {
        let cell_records: Vec<MicroRecord> = indices.iter().map(|&i| records[i].clone()).collect();
        let persons = equivalise_records(&cell_records)?;
        let kept: Vec<&EquivalisedPerson> = persons.iter().filter(|p| p.total >= 0.0).collect();
        let dropped = persons.len() - kept.len();
        if dropped > 0 {
            log::warn!(
                "({country}, {year}): excluded {dropped} persons with negative equivalised total income"
            );
        }
        if kept.is_empty() {
            return Err(InequalityError::EmptyInput);
        }
        let totals: Vec<f64> = kept.iter().map(|p| p.total).collect();
        let labor: Vec<f64> = kept.iter().map(|p| p.labor).collect();
        let financial: Vec<f64> = kept.iter().map(|p| p.financial).collect();
        let weights: Vec<f64> = kept.iter().map(|p| p.weight).collect();

        let mut push = |measure: &str, value: f64| {
            rows.push(MeasureRow {
                country: country.clone(),
                year,
                measure: measure.to_string(),
                value,
            })
        };
        push("gini_total", gini(&totals, &weights)?);
        if let Ok(g) = component_gini(&labor, &weights) {
            push("gini_labor", g);
        }
        if let Ok(g) = component_gini(&financial, &weights) {
            push("gini_financial", g);
        }
        let quintiles = quintile_gini(&totals, &weights)?;
        for (q, g) in quintiles.iter().enumerate() {
            push(&format!("gini_q{}", q + 1), *g);
        }
        push("p90", weighted_percentile(&totals, &weights, 90.0)?);
        push("p95", weighted_percentile(&totals, &weights, 95.0)?);
        if let Ok(premium) = skill_premium(&cell_records, true) {
            push("skill_premium", premium);
        }
        rows.sort_by(|a, b| {
            (&a.country, a.year, &a.measure).cmp(&(&b.country, b.year, &b.measure))
        });
    }
    Ok(rows)
}

/// Reads person records from CSV with header
/// `household_id,person_id,country,year,weight,age,skill_level,income_labor,income_financial,hours_per_week`.
/// Empty optional fields become `None`; malformed fields are reported with
/// their line number.
pub fn read_microdata<R: io::Read>(reader: R) -> Result<Vec<MicroRecord>, InequalityError> {
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut out = Vec::new();
    for record in csv_reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let get = |idx: usize, name: &'static str| -> Result<&str, InequalityError> {
            record.get(idx).ok_or(InequalityError::ParseRow {
                line,
                field: name,
                content: String::new(),
            })
        };
        fn parse<T: std::str::FromStr>(
            raw: &str,
            line: u64,
            field: &'static str,
        ) -> Result<T, InequalityError> {
            raw.parse().map_err(|_| InequalityError::ParseRow {
                line,
                field,
                content: raw.to_string(),
            })
        }
        fn parse_opt<T: std::str::FromStr>(
            raw: &str,
            line: u64,
            field: &'static str,
        ) -> Result<Option<T>, InequalityError> {
            if raw.is_empty() {
                Ok(None)
            } else {
                parse(raw, line, field).map(Some)
            }
        }
        out.push(MicroRecord {
            household_id: get(0, "household_id")?.to_string(),
            person_id: get(1, "person_id")?.to_string(),
            country: get(2, "country")?.to_string(),
            year: parse(get(3, "year")?, line, "year")?,
            weight: parse(get(4, "weight")?, line, "weight")?,
            age: parse(get(5, "age")?, line, "age")?,
            skill_level: parse_opt(get(6, "skill_level")?, line, "skill_level")?,
            income_labor: parse_opt(get(7, "income_labor")?, line, "income_labor")?,
            income_financial: parse_opt(get(8, "income_financial")?, line, "income_financial")?,
            hours_per_week: parse_opt(get(9, "hours_per_week")?, line, "hours_per_week")?,
        });
    }
    Ok(out)
}

/// Writes person records with the standard microdata header.
pub fn write_microdata<W: io::Write>(
    writer: W,
    records: &[MicroRecord],
) -> Result<(), InequalityError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "household_id",
        "person_id",
        "country",
        "year",
        "weight",
        "age",
        "skill_level",
        "income_labor",
        "income_financial",
        "hours_per_week",
    ])?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in records {
        w.write_record([
            r.household_id.clone(),
            r.person_id.clone(),
            r.country.clone(),
            r.year.to_string(),
            r.weight.to_string(),
            r.age.to_string(),
            opt(r.skill_level.map(|v| v.to_string())),
            opt(r.income_labor.map(|v| v.to_string())),
            opt(r.income_financial.map(|v| v.to_string())),
            opt(r.hours_per_week.map(|v| v.to_string())),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes measure rows as `country,year,measure,value`.
pub fn write_measures<W: io::Write>(writer: W, rows: &[MeasureRow]) -> Result<(), InequalityError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["country", "year", "measure", "value"])?;
    for r in rows {
        w.write_record([
            r.country.clone(),
            r.year.to_string(),
            r.measure.clone(),
            r.value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    /// Quadratic-time Gini straight from the pairwise definition.
    fn gini_pairwise_oracle(values: &[f64], weights: &[f64]) -> f64 {
        let w_total: f64 = weights.iter().sum();
        let wx_total: f64 = values.iter().zip(weights).map(|(x, w)| x * w).sum();
        let mut acc = 0.0;
        for (xi, wi) in values.iter().zip(weights) {
            for (xj, wj) in values.iter().zip(weights) {
                acc += wi * wj * (xi - xj).abs();
            }
        }
        100.0 * acc / (2.0 * w_total * wx_total)
    }

    /// Linear scan over the step CDF, one candidate at a time.
    fn percentile_scan_oracle(values: &[f64], weights: &[f64], p: f64) -> f64 {
        let w_total: f64 = weights.iter().sum();
        let mut candidates = values.to_vec();
        candidates.sort_by(f64::total_cmp);
        for c in &candidates {
            let cdf: f64 = values
                .iter()
                .zip(weights)
                .filter(|(v, _)| **v <= *c)
                .map(|(_, w)| w)
                .sum();
            if cdf * 100.0 >= p * w_total {
                return *c;
            }
        }
        *candidates.last().unwrap()
    }

    #[test]
    fn gini_matches_worked_examples() {
        assert_relative_eq!(gini(&[0.0, 10.0], &[1.0, 1.0]).unwrap(), 50.0);
        let v: Vec<f64> = (1..=5).map(f64::from).collect();
        let w = vec![1.0; 5];
        assert_relative_eq!(gini(&v, &w).unwrap(), 80.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn gini_agrees_with_pairwise_oracle_on_random_samples() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(1..=300);
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1e4)).collect();
            let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..10.0)).collect();
            let fast = gini(&values, &weights).unwrap();
            let slow = gini_pairwise_oracle(&values, &weights);
            assert!((fast - slow).abs() < 1e-10, "fast {fast} vs oracle {slow}");
        }
    }

    #[test]
    fn gini_handles_degenerate_inputs() {
        assert_eq!(gini(&[5.0, 5.0, 5.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(gini(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(gini(&[], &[]), Err(InequalityError::EmptyInput)));
        assert!(matches!(
            gini(&[1.0, -2.0], &[1.0, 1.0]),
            Err(InequalityError::NegativeValue { index: 1, .. })
        ));
        assert!(matches!(
            gini(&[1.0], &[0.0]),
            Err(InequalityError::BadWeight { index: 0, .. })
        ));
    }

    proptest! {
        // Scale invariance: measuring incomes in cents instead of euros
        // cannot change the Gini.
        #[test]
        fn gini_is_scale_invariant(
            values in proptest::collection::vec(0.0f64..1e5, 2..60),
            weights in proptest::collection::vec(0.1f64..5.0, 60),
            scale in 0.01f64..100.0,
        ) {
            let weights = &weights[..values.len()];
            let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
            let a = gini(&values, weights).unwrap();
            let b = gini(&scaled, weights).unwrap();
            prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }

        // Replication invariance: duplicating the whole sample leaves the
        // Gini unchanged, as does doubling every weight.
        #[test]
        fn gini_is_replication_invariant(
            values in proptest::collection::vec(0.0f64..1e4, 1..40),
            weights in proptest::collection::vec(0.1f64..5.0, 40),
        ) {
            let weights = &weights[..values.len()];
            let base = gini(&values, weights).unwrap();
            let mut rep_v = values.clone();
            rep_v.extend_from_slice(&values);
            let mut rep_w = weights.to_vec();
            rep_w.extend_from_slice(weights);
            let replicated = gini(&rep_v, &rep_w).unwrap();
            prop_assert!((base - replicated).abs() < 1e-9, "{base} vs {replicated}");
            let doubled: Vec<f64> = weights.iter().map(|w| w * 2.0).collect();
            let reweighted = gini(&values, &doubled).unwrap();
            prop_assert!((base - reweighted).abs() < 1e-9, "{base} vs {reweighted}");
        }

        #[test]
        fn gini_lies_in_unit_interval_times_100(
            values in proptest::collection::vec(0.0f64..1e4, 1..60),
            weights in proptest::collection::vec(0.1f64..5.0, 60),
        ) {
            let g = gini(&values, &weights[..values.len()]).unwrap();
            prop_assert!((0.0..=100.0).contains(&g), "{g}");
        }

        #[test]
        fn percentile_matches_scan_oracle(
            values in proptest::collection::vec(-1e3f64..1e3, 1..80),
            weights in proptest::collection::vec(0.1f64..5.0, 80),
            p in 1.0f64..99.0,
        ) {
            let weights = &weights[..values.len()];
            let fast = weighted_percentile(&values, weights, p).unwrap();
            let slow = percentile_scan_oracle(&values, weights, p);
            prop_assert_eq!(fast, slow);
        }
    }

    #[test]
    fn percentile_matches_order_statistic_for_unit_weights() {
        let values: Vec<f64> = (1..=10).map(f64::from).collect();
        let weights = vec![1.0; 10];
        assert_eq!(weighted_percentile(&values, &weights, 90.0).unwrap(), 9.0);
        assert_eq!(weighted_percentile(&values, &weights, 91.0).unwrap(), 10.0);
        assert_eq!(weighted_percentile(&values, &weights, 10.0).unwrap(), 1.0);
        assert_eq!(weighted_percentile(&values, &weights, 50.0).unwrap(), 5.0);
    }

    #[test]
    fn percentile_rejects_out_of_range_p() {
        assert!(matches!(
            weighted_percentile(&[1.0], &[1.0], 0.0),
            Err(InequalityError::BadPercentile { .. })
        ));
        assert!(matches!(
            weighted_percentile(&[1.0], &[1.0], 100.0),
            Err(InequalityError::BadPercentile { .. })
        ));
    }

    #[test]
    fn first_quintile_of_1_to_100_is_gini_of_1_to_20() {
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        let weights = vec![1.0; 100];
        let quintiles = quintile_gini(&values, &weights).unwrap();
        let first_twenty: Vec<f64> = (1..=20).map(f64::from).collect();
        let expected = gini(&first_twenty, &vec![1.0; 20]).unwrap();
        assert_relative_eq!(quintiles[0], expected, epsilon = 1e-12);
    }

    #[test]
    fn cut_point_ties_go_to_the_lower_quintile() {
        // With five equal-weight points the 20th percentile is exactly the
        // smallest value, which must stay in quintile 1.
        let values = [1.0, 2.0, 3.0, 4.0, 5.0];
        let weights = [1.0; 5];
        let quintiles = quintile_gini(&values, &weights).unwrap();
        assert_eq!(quintiles, [0.0; 5]);
    }

    #[test]
    fn component_gini_drops_zeros_and_requires_positives() {
        let g = component_gini(&[0.0, 0.0, 5.0, 10.0], &[1.0; 4]).unwrap();
        let direct = gini(&[5.0, 10.0], &[1.0, 1.0]).unwrap();
        assert_relative_eq!(g, direct);
        assert!(matches!(
            component_gini(&[0.0, 0.0], &[1.0, 1.0]),
            Err(InequalityError::UndefinedGini { .. })
        ));
    }

    #[test]
    fn equivalence_factor_matches_scale_definition() {
        assert_eq!(equivalence_factor(&[40]).unwrap(), 1.0);
        assert_eq!(equivalence_factor(&[40, 38]).unwrap(), 1.5);
        assert_eq!(equivalence_factor(&[40, 38, 15, 10]).unwrap(), 2.3);
        // A lone child is the first member, not an additional child.
        assert_eq!(equivalence_factor(&[10]).unwrap(), 1.0);
        assert!(matches!(
            equivalence_factor(&[]),
            Err(InequalityError::EmptyHousehold { .. })
        ));
    }

    #[test]
    fn equivalise_splits_the_household_total() {
        // Two adults earning 600 and 900: each member carries 1500 / 1.5.
        let value = equivalise(600.0 + 900.0, &[40, 38]).unwrap();
        assert_eq!(value, 1000.0);
        assert_eq!(value * 1.5, 1500.0);
    }

    proptest! {
        // Conservation: per-person value times the factor reproduces the
        // household total up to the half-ulp limit of one f64 division.
        #[test]
        fn equivalisation_conserves_household_totals(
            total in 0.0f64..1e7,
            n_adults in 1usize..5,
            n_children in 0usize..4,
        ) {
            let mut ages = vec![30u32; n_adults];
            ages.extend(std::iter::repeat(9u32).take(n_children));
            let factor = equivalence_factor(&ages).unwrap();
            let value = equivalise(total, &ages).unwrap();
            let back = value * factor;
            prop_assert!((back - total).abs() <= total.abs() * f64::EPSILON, "{back} vs {total}");
        }
    }

    #[test]
    fn share_curve_is_flat_for_uniform_financial_income() {
        let n = 10_000;
        let overall: Vec<f64> = (0..n).map(|i| f64::from(i)).collect();
        let financial = vec![1.0; n as usize];
        let weights = vec![1.0; n as usize];
        let curve = income_share_curve(&overall, &financial, &weights).unwrap();
        assert_eq!(curve.shares.len(), 99);
        for share in &curve.shares {
            assert_relative_eq!(*share, 0.01, epsilon = 1e-6);
        }
        assert_relative_eq!(curve.top_share, 0.01, epsilon = 1e-6);
        let total: f64 = curve.shares.iter().sum::<f64>() + curve.top_share;
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn share_curve_concentrates_mass_in_the_right_bucket() {
        // All financial income sits with one person just below the top cut.
        let n = 1000;
        let overall: Vec<f64> = (0..n).map(f64::from).collect();
        let mut financial = vec![0.0; n as usize];
        financial[985] = 42.0;
        let weights = vec![1.0; n as usize];
        let curve = income_share_curve(&overall, &financial, &weights).unwrap();
        assert_eq!(curve.shares[98], 1.0);
        assert_eq!(curve.top_share, 0.0);
        assert_eq!(curve.shares[..98].iter().copied().sum::<f64>(), 0.0);
    }

    fn worker(id: &str, age: u32, skill: u8, income: f64, weight: f64) -> MicroRecord {
        MicroRecord {
            household_id: id.to_string(),
            person_id: format!("{id}-1"),
            country: "AT".to_string(),
            year: 2020,
            weight,
            age,
            skill_level: Some(skill),
            income_labor: Some(income),
            income_financial: None,
            hours_per_week: Some(38.0),
        }
    }

    #[test]
    fn skill_premium_is_the_log_ratio_of_group_means() {
        let records = vec![
            worker("a", 30, 1, 1000.0, 1.0),
            worker("b", 40, 2, 2000.0, 1.0),
            worker("c", 35, 3, 3000.0, 1.0),
            worker("d", 50, 4, 3000.0, 1.0),
        ];
        let log_premium = skill_premium(&records, true).unwrap();
        assert_relative_eq!(log_premium, (3000.0f64 / 1500.0).ln());
        let plain = skill_premium(&records, false).unwrap();
        assert_relative_eq!(plain, 2.0);
    }

    #[test]
    fn skill_premium_excludes_outside_working_age() {
        let records = vec![
            worker("a", 30, 1, 1000.0, 1.0),
            worker("b", 70, 1, 9000.0, 1.0), // outside 15..=64
            worker("c", 35, 3, 2000.0, 1.0),
        ];
        assert_relative_eq!(skill_premium(&records, false).unwrap(), 2.0);
        let only_old = vec![worker("a", 70, 1, 1000.0, 1.0), worker("c", 35, 3, 2000.0, 1.0)];
        assert!(matches!(
            skill_premium(&only_old, false),
            Err(InequalityError::NoParticipants { group: "low-skill" })
        ));
    }

    #[test]
    fn microdata_csv_round_trips_with_absent_fields() {
        let csv = "household_id,person_id,country,year,weight,age,skill_level,income_labor,income_financial,hours_per_week\n\
                   h1,p1,AT,2020,1.5,40,3,30000,150.5,38\n\
                   h1,p2,AT,2020,1.5,10,,,,\n";
        let records = read_microdata(csv.as_bytes()).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[1].skill_level, None);
        assert_eq!(records[1].income_labor, None);
        let mut buffer = Vec::new();
        write_microdata(&mut buffer, &records).unwrap();
        let reloaded = read_microdata(buffer.as_slice()).unwrap();
        assert_eq!(records, reloaded);
    }

    #[test]
    fn microdata_parse_error_names_the_row() {
        let csv = "household_id,person_id,country,year,weight,age,skill_level,income_labor,income_financial,hours_per_week\n\
                   h1,p1,AT,2020,1.5,40,3,30000,,38\n\
                   h2,p1,AT,20x0,1.0,30,2,10000,,40\n";
        let err = read_microdata(csv.as_bytes()).unwrap_err();
        assert!(
            matches!(err, InequalityError::ParseRow { line: 3, field: "year", .. }),
            "{err}"
        );
    }

    #[test]
    fn compute_measures_emits_the_standard_set() {
        let mut records = Vec::new();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for h in 0..200 {
            let income = 20_000.0 * (1.0 + rng.gen::<f64>());
            records.push(MicroRecord {
                household_id: format!("h{h}"),
                person_id: format!("h{h}-1"),
                country: "AT".to_string(),
                year: 2020,
                weight: rng.gen_range(0.5..2.0),
                age: rng.gen_range(20..60),
                skill_level: Some(rng.gen_range(1..=4)),
                income_labor: Some(income),
                income_financial: if h % 3 == 0 { Some(income * 0.1) } else { None },
                hours_per_week: Some(40.0),
            });
        }
        let rows = compute_measures(&records).unwrap();
        let names: Vec<&str> = rows.iter().map(|r| r.measure.as_str()).collect();
        for expected in [
            "gini_total",
            "gini_labor",
            "gini_financial",
            "gini_q1",
            "gini_q5",
            "p90",
            "p95",
            "skill_premium",
        ] {
            assert!(names.contains(&expected), "missing {expected}");
        }
        assert!(rows.windows(2).all(|w| w[0].measure <= w[1].measure));
    }
}
