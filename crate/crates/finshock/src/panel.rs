//! Storage and alignment for mixed-frequency country panels.
//!
//! Series enter as long-format CSV rows `country,date,variable,value` at
//! annual, quarterly, or monthly frequency. Annual series are carried to
//! quarterly by anchored linear interpolation or by flat assignment, monthly
//! series by within-quarter averaging. [`PanelStore::align_balanced`] then
//! produces the dense country-by-quarter-by-variable array the estimation
//! stages consume, refusing to proceed while any cell is missing.

use std::collections::BTreeMap;
use std::io;

use thiserror::Error;

use crate::dates::{Date, Frequency, Month, Quarter};

/// Identifies one series inside a [`PanelStore`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SeriesKey {
    pub country: String,
    pub variable: String,
}

/// Observations of a single series, keyed by date at the series' frequency.
#[derive(Debug, Clone, PartialEq)]
pub enum SeriesData {
    Annual(BTreeMap<i32, f64>),
    Quarterly(BTreeMap<Quarter, f64>),
    Monthly(BTreeMap<Month, f64>),
}

impl SeriesData {
    pub fn frequency(&self) -> Frequency {
        match self {
            SeriesData::Annual(_) => Frequency::Annual,
            SeriesData::Quarterly(_) => Frequency::Quarterly,
            SeriesData::Monthly(_) => Frequency::Monthly,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SeriesData::Annual(m) => m.len(),
            SeriesData::Quarterly(m) => m.len(),
            SeriesData::Monthly(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Method used to carry an annual series to quarterly frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpMethod {
    /// Annual values anchor one quarter per year; intermediate quarters lie on
    /// the straight line between consecutive anchors, quarters outside the
    /// anchor range hold the nearest annual value.
    Linear,
    /// Every quarter of a year carries that year's value.
    Flat,
}

/// Pointwise transformation of a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// `100 * ln(x)`; requires strictly positive values.
    LogTimes100,
    Identity,
}

/// One missing cell of a would-be balanced panel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gap {
    pub country: String,
    pub quarter: Quarter,
    pub variable: String,
}

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {line}: invalid {field} {content:?}")]
    ParseRow {
        line: u64,
        field: &'static str,
        content: String,
    },
    #[error("row {line}: non-finite value {value}")]
    NonFiniteValue { line: u64, value: f64 },
    #[error("duplicate observation for ({country}, {variable}) at {date}")]
    DuplicateObservation {
        country: String,
        variable: String,
        date: String,
    },
    #[error("variable {variable} is {existing} but received a {new} observation")]
    FrequencyConflict {
        variable: String,
        existing: Frequency,
        new: Frequency,
    },
    #[error("no series ({country}, {variable})")]
    MissingSeries { country: String, variable: String },
    #[error("operation requires a {required} series, but ({country}, {variable}) is {actual}")]
    WrongFrequency {
        country: String,
        variable: String,
        required: Frequency,
        actual: Frequency,
    },
    #[error("linear interpolation of ({country}, {variable}) needs at least 2 annual observations, found {found}")]
    TooFewAnchors {
        country: String,
        variable: String,
        found: usize,
    },
    #[error("({country}, {variable}): quarter {quarter} is missing months {missing:?}")]
    IncompleteQuarter {
        country: String,
        variable: String,
        quarter: Quarter,
        missing: Vec<String>,
    },
    #[error("({country}, {variable}) at {date}: log of non-positive value {value}")]
    LogDomain {
        country: String,
        variable: String,
        date: String,
        value: f64,
    },
    #[error("({country}, {variable}) at {date}: zero denominator")]
    ZeroDenominator {
        country: String,
        variable: String,
        date: String,
    },
    #[error("donor list for ({target}, {variable}) is empty")]
    EmptyDonors { target: String, variable: String },
    #[error("donor series ({donor}, {variable}) is absent")]
    DonorMissing { donor: String, variable: String },
    #[error("balanced alignment failed: {} missing cells, first {}", gaps.len(), first_gaps(gaps))]
    Unbalanced { gaps: Vec<Gap> },
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

fn first_gaps(gaps: &[Gap]) -> String {
    gaps.iter()
        .take(5)
        .map(|g| format!("({}, {}, {})", g.country, g.quarter, g.variable))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Unbalanced collection of series keyed by `(country, variable)`.
///
/// Each variable has a single frequency across all countries; insertion
/// enforces this. All iteration is in key order, so the contents never depend
/// on input row order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PanelStore {
    series: BTreeMap<SeriesKey, SeriesData>,
}

impl PanelStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn series(&self) -> impl Iterator<Item = (&SeriesKey, &SeriesData)> {
        self.series.iter()
    }

    pub fn get(&self, country: &str, variable: &str) -> Option<&SeriesData> {
        self.series.get(&SeriesKey {
            country: country.to_string(),
            variable: variable.to_string(),
        })
    }

    /// Countries holding at least one series, in lexicographic order.
    pub fn countries(&self) -> Vec<String> {
        let mut out: Vec<String> = self.series.keys().map(|k| k.country.clone()).collect();
        out.dedup();
        out.sort();
        out.dedup();
        out
    }

    /// Variables present in the store, in lexicographic order.
    pub fn variables(&self) -> Vec<String> {
        let mut out: Vec<String> = self.series.keys().map(|k| k.variable.clone()).collect();
        out.sort();
        out.dedup();
        out
    }

    fn variable_frequency(&self, variable: &str) -> Option<Frequency> {
        self.series
            .iter()
            .find(|(k, _)| k.variable == variable)
            .map(|(_, s)| s.frequency())
    }

    /// Adds one observation, creating the series on first touch.
    pub fn insert(
        &mut self,
        country: &str,
        variable: &str,
        date: Date,
        value: f64,
    ) -> Result<(), PanelError> {
        if let Some(freq) = self.variable_frequency(variable) {
            if freq != date.frequency() {
                return Err(PanelError::FrequencyConflict {
                    variable: variable.to_string(),
                    existing: freq,
                    new: date.frequency(),
                });
            }
        }
        let key = SeriesKey {
            country: country.to_string(),
            variable: variable.to_string(),
        };
        let duplicate = || PanelError::DuplicateObservation {
            country: country.to_string(),
            variable: variable.to_string(),
            date: date.to_string(),
        };
        let entry = self.series.entry(key).or_insert_with(|| match date {
            Date::Annual(_) => SeriesData::Annual(BTreeMap::new()),
            Date::Quarterly(_) => SeriesData::Quarterly(BTreeMap::new()),
            Date::Monthly(_) => SeriesData::Monthly(BTreeMap::new()),
        });
        match (entry, date) {
            (SeriesData::Annual(m), Date::Annual(y)) => {
                if m.insert(y, value).is_some() {
                    return Err(duplicate());
                }
            }
            (SeriesData::Quarterly(m), Date::Quarterly(q)) => {
                if m.insert(q, value).is_some() {
                    return Err(duplicate());
                }
            }
            (SeriesData::Monthly(m), Date::Monthly(mo)) => {
                if m.insert(mo, value).is_some() {
                    return Err(duplicate());
                }
            }
            // insert above guarantees the series frequency matches the date
            _ => unreachable!("frequency checked before insertion"),
        }
        Ok(())
    }

    /// Replaces (or creates) a whole quarterly series.
    pub fn put_quarterly(&mut self, country: &str, variable: &str, obs: BTreeMap<Quarter, f64>) {
        self.series.insert(
            SeriesKey {
                country: country.to_string(),
                variable: variable.to_string(),
            },
            SeriesData::Quarterly(obs),
        );
    }

    /// Reads long-format CSV with header `country,date,variable,value`.
    ///
    /// Rows may arrive in any order. A repeated `(country, variable, date)`
    /// triple is a conflict, and malformed dates or values are reported with
    /// their 1-based line number.
    pub fn from_csv_reader<R: io::Read>(reader: R) -> Result<Self, PanelError> {
        let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let mut store = PanelStore::new();
        for record in csv_reader.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let field = |idx: usize, name: &'static str| -> Result<&str, PanelError> {
                record.get(idx).ok_or(PanelError::ParseRow {
                    line,
                    field: name,
                    content: String::new(),
                })
            };
            let country = field(0, "country")?.to_string();
            let date_raw = field(1, "date")?;
            let date: Date = date_raw.parse().map_err(|_| PanelError::ParseRow {
                line,
                field: "date",
                content: date_raw.to_string(),
            })?;
            let variable = field(2, "variable")?.to_string();
            let value_raw = field(3, "value")?;
            let value: f64 = value_raw.parse().map_err(|_| PanelError::ParseRow {
                line,
                field: "value",
                content: value_raw.to_string(),
            })?;
            if !value.is_finite() {
                return Err(PanelError::NonFiniteValue { line, value });
            }
            store.insert(&country, &variable, date, value)?;
        }
        Ok(store)
    }

    /// Writes the store as long-format CSV ordered by (country, variable, date).
    ///
    /// Values are printed with the shortest representation that parses back to
    /// the identical bits, so a load of the output reproduces the store.
    pub fn to_csv_writer<W: io::Write>(&self, writer: W) -> Result<(), PanelError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["country", "date", "variable", "value"])?;
        for (key, data) in &self.series {
            let mut write =
                |date: String, value: f64| -> Result<(), csv::Error> {
                    w.write_record([&key.country, &date, &key.variable, &value.to_string()])
                };
            match data {
                SeriesData::Annual(m) => {
                    for (y, v) in m {
                        write(y.to_string(), *v)?;
                    }
                }
                SeriesData::Quarterly(m) => {
                    for (q, v) in m {
                        write(q.to_string(), *v)?;
                    }
                }
                SeriesData::Monthly(m) => {
                    for (mo, v) in m {
                        write(mo.to_string(), *v)?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Converts one annual variable to quarterly in place, for every country
    /// holding it.
    pub fn interpolate_annual(
        &mut self,
        variable: &str,
        method: InterpMethod,
        anchor_quarter: u8,
    ) -> Result<(), PanelError> {
        let keys: Vec<SeriesKey> = self
            .series
            .keys()
            .filter(|k| k.variable == variable)
            .cloned()
            .collect();
        for key in keys {
            let annual = match &self.series[&key] {
                SeriesData::Annual(m) => m.clone(),
                other => {
                    return Err(PanelError::WrongFrequency {
                        country: key.country,
                        variable: key.variable,
                        required: Frequency::Annual,
                        actual: other.frequency(),
                    })
                }
            };
            let quarterly =
                interpolate_annual(&key.country, &key.variable, &annual, method, anchor_quarter)?;
            self.series.insert(key, SeriesData::Quarterly(quarterly));
        }
        Ok(())
    }

    /// Converts one monthly variable to quarterly in place, for every country
    /// holding it.
    pub fn aggregate_monthly(&mut self, variable: &str) -> Result<(), PanelError> {
        let keys: Vec<SeriesKey> = self
            .series
            .keys()
            .filter(|k| k.variable == variable)
            .cloned()
            .collect();
        for key in keys {
            let monthly = match &self.series[&key] {
                SeriesData::Monthly(m) => m.clone(),
                other => {
                    return Err(PanelError::WrongFrequency {
                        country: key.country,
                        variable: key.variable,
                        required: Frequency::Monthly,
                        actual: other.frequency(),
                    })
                }
            };
            let quarterly = aggregate_monthly(&key.country, &key.variable, &monthly)?;
            self.series.insert(key, SeriesData::Quarterly(quarterly));
        }
        Ok(())
    }

    /// Applies a pointwise transform to a quarterly variable in place.
    pub fn transform(&mut self, variable: &str, op: Transform) -> Result<(), PanelError> {
        if op == Transform::Identity {
            return Ok(());
        }
        let keys: Vec<SeriesKey> = self
            .series
            .keys()
            .filter(|k| k.variable == variable)
            .cloned()
            .collect();
        for key in keys {
            let data = self.series.get_mut(&key).expect("key enumerated above");
            let obs = match data {
                SeriesData::Quarterly(m) => m,
                other => {
                    return Err(PanelError::WrongFrequency {
                        country: key.country.clone(),
                        variable: key.variable.clone(),
                        required: Frequency::Quarterly,
                        actual: other.frequency(),
                    })
                }
            };
            for (q, v) in obs.iter_mut() {
                if *v <= 0.0 {
                    return Err(PanelError::LogDomain {
                        country: key.country.clone(),
                        variable: key.variable.clone(),
                        date: q.to_string(),
                        value: *v,
                    });
                }
                *v = 100.0 * v.ln();
            }
        }
        Ok(())
    }

    /// Stores `numerator / denominator` under `new_variable`, per country, on
    /// the dates where both quarterly inputs exist.
    pub fn derive_ratio(
        &mut self,
        numerator: &str,
        denominator: &str,
        new_variable: &str,
    ) -> Result<(), PanelError> {
        let countries = self.countries();
        for country in countries {
            let (num, den) = match (self.get(&country, numerator), self.get(&country, denominator)) {
                (Some(n), Some(d)) => (n, d),
                _ => continue,
            };
            let (num, den) = match (num, den) {
                (SeriesData::Quarterly(n), SeriesData::Quarterly(d)) => (n, d),
                (n, d) => {
                    let (variable, actual) = if !matches!(n, SeriesData::Quarterly(_)) {
                        (numerator, n.frequency())
                    } else {
                        (denominator, d.frequency())
                    };
                    return Err(PanelError::WrongFrequency {
                        country,
                        variable: variable.to_string(),
                        required: Frequency::Quarterly,
                        actual,
                    });
                }
            };
            let mut out = BTreeMap::new();
            for (q, n) in num {
                if let Some(d) = den.get(q) {
                    if *d == 0.0 {
                        return Err(PanelError::ZeroDenominator {
                            country,
                            variable: denominator.to_string(),
                            date: q.to_string(),
                        });
                    }
                    out.insert(*q, n / d);
                }
            }
            if !out.is_empty() {
                self.put_quarterly(&country, new_variable, out);
            }
        }
        Ok(())
    }

    /// Fills a missing `(target, variable)` series with the unweighted mean of
    /// the donor countries' series, on dates where every donor reports.
    ///
    /// An existing target series is left untouched.
    pub fn impute_from_donors(
        &mut self,
        target: &str,
        donors: &[&str],
        variable: &str,
    ) -> Result<(), PanelError> {
        if donors.is_empty() {
            return Err(PanelError::EmptyDonors {
                target: target.to_string(),
                variable: variable.to_string(),
            });
        }
        if self.get(target, variable).is_some() {
            return Ok(());
        }
        let mut donor_series = Vec::with_capacity(donors.len());
        for donor in donors {
            match self.get(donor, variable) {
                Some(SeriesData::Quarterly(m)) => donor_series.push(m.clone()),
                Some(other) => {
                    return Err(PanelError::WrongFrequency {
                        country: donor.to_string(),
                        variable: variable.to_string(),
                        required: Frequency::Quarterly,
                        actual: other.frequency(),
                    })
                }
                None => {
                    return Err(PanelError::DonorMissing {
                        donor: donor.to_string(),
                        variable: variable.to_string(),
                    })
                }
            }
        }
        let mut imputed = BTreeMap::new();
        for q in donor_series[0].keys() {
            let values: Vec<f64> = donor_series.iter().filter_map(|m| m.get(q)).copied().collect();
            if values.len() == donor_series.len() {
                imputed.insert(*q, values.iter().sum::<f64>() / values.len() as f64);
            }
        }
        self.put_quarterly(target, variable, imputed);
        Ok(())
    }

    /// Builds the dense balanced array over `countries x span x variables`.
    ///
    /// Countries and variables are stored in lexicographic order regardless of
    /// argument order. Every missing cell is collected before failing, so one
    /// pass reports the complete gap set.
    pub fn align_balanced(
        &self,
        countries: &[&str],
        span: (Quarter, Quarter),
        variables: &[&str],
    ) -> Result<PanelDataset, PanelError> {
        let mut countries: Vec<String> = countries.iter().map(|s| s.to_string()).collect();
        countries.sort();
        countries.dedup();
        let mut variables: Vec<String> = variables.iter().map(|s| s.to_string()).collect();
        variables.sort();
        variables.dedup();
        let quarters = span.0.through(span.1);
        let mut values = vec![f64::NAN; countries.len() * quarters.len() * variables.len()];
        let mut gaps = Vec::new();
        for (ci, country) in countries.iter().enumerate() {
            for (ki, variable) in variables.iter().enumerate() {
                let obs = match self.get(country, variable) {
                    Some(SeriesData::Quarterly(m)) => Some(m),
                    Some(other) => {
                        return Err(PanelError::WrongFrequency {
                            country: country.clone(),
                            variable: variable.clone(),
                            required: Frequency::Quarterly,
                            actual: other.frequency(),
                        })
                    }
                    None => None,
                };
                for (ti, q) in quarters.iter().enumerate() {
                    match obs.and_then(|m| m.get(q)) {
                        Some(v) => {
                            values[(ci * quarters.len() + ti) * variables.len() + ki] = *v;
                        }
                        None => gaps.push(Gap {
                            country: country.clone(),
                            quarter: *q,
                            variable: variable.clone(),
                        }),
                    }
                }
            }
        }
        if !gaps.is_empty() {
            return Err(PanelError::Unbalanced { gaps });
        }
        Ok(PanelDataset {
            countries,
            quarters,
            variables,
            values,
        })
    }
}

/// Carries one annual series to quarterly frequency.
///
/// With [`InterpMethod::Linear`], year `y`'s value anchors quarter
/// `(y, anchor_quarter)`; quarters between consecutive anchors lie on the
/// straight line through them, and quarters outside the anchor range hold the
/// nearest annual value. With [`InterpMethod::Flat`], all four quarters of an
/// observed year carry that year's value.
pub fn interpolate_annual(
    country: &str,
    variable: &str,
    annual: &BTreeMap<i32, f64>,
    method: InterpMethod,
    anchor_quarter: u8,
) -> Result<BTreeMap<Quarter, f64>, PanelError> {
    let anchor_quarter = anchor_quarter.clamp(1, 4);
    let mut out = BTreeMap::new();
    match method {
        InterpMethod::Flat => {
            if annual.is_empty() {
                return Err(PanelError::TooFewAnchors {
                    country: country.to_string(),
                    variable: variable.to_string(),
                    found: 0,
                });
            }
            for (year, value) in annual {
                for q in 1..=4 {
                    out.insert(Quarter::new(*year, q).expect("quarter in 1..=4"), *value);
                }
            }
        }
        InterpMethod::Linear => {
            if annual.len() < 2 {
                return Err(PanelError::TooFewAnchors {
                    country: country.to_string(),
                    variable: variable.to_string(),
                    found: annual.len(),
                });
            }
            let anchors: Vec<(i64, f64)> = annual
                .iter()
                .map(|(y, v)| {
                    (Quarter::new(*y, anchor_quarter).expect("quarter in 1..=4").index(), *v)
                })
                .collect();
            let first_year = *annual.keys().next().expect("non-empty");
            let last_year = *annual.keys().next_back().expect("non-empty");
            let start = Quarter::new(first_year, 1).expect("quarter 1");
            let end = Quarter::new(last_year, 4).expect("quarter 4");
            for q in start.through(end) {
                let idx = q.index();
                let value = match anchors.binary_search_by_key(&idx, |a| a.0) {
                    Ok(pos) => anchors[pos].1,
                    Err(0) => anchors[0].1,
                    Err(pos) if pos == anchors.len() => anchors[anchors.len() - 1].1,
                    Err(pos) => {
                        let (x0, y0) = anchors[pos - 1];
                        let (x1, y1) = anchors[pos];
                        y0 + (y1 - y0) * (idx - x0) as f64 / (x1 - x0) as f64
                    }
                };
                out.insert(q, value);
            }
        }
    }
    Ok(out)
}

/// Averages a monthly series within quarters.
///
/// Every quarter touched by the series must contribute exactly three months;
/// otherwise the error names the missing months.
pub fn aggregate_monthly(
    country: &str,
    variable: &str,
    monthly: &BTreeMap<Month, f64>,
) -> Result<BTreeMap<Quarter, f64>, PanelError> {
    let mut grouped: BTreeMap<Quarter, Vec<Month>> = BTreeMap::new();
    for month in monthly.keys() {
        grouped.entry(month.containing_quarter()).or_default().push(*month);
    }
    let mut out = BTreeMap::new();
    for (quarter, months) in grouped {
        if months.len() != 3 {
            let missing: Vec<String> = (1..=3)
                .map(|offset| {
                    Month::new(quarter.year(), (quarter.quarter() - 1) * 3 + offset)
                        .expect("month in 1..=12")
                })
                .filter(|m| !monthly.contains_key(m))
                .map(|m| m.to_string())
                .collect();
            return Err(PanelError::IncompleteQuarter {
                country: country.to_string(),
                variable: variable.to_string(),
                quarter,
                missing,
            });
        }
        let sum: f64 = months.iter().map(|m| monthly[m]).sum();
        out.insert(quarter, sum / 3.0);
    }
    Ok(out)
}

/// Dense balanced panel: `countries x quarters x variables`, both name axes in
/// lexicographic order and quarters contiguous ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    countries: Vec<String>,
    quarters: Vec<Quarter>,
    variables: Vec<String>,
    values: Vec<f64>,
}

impl PanelDataset {
    pub fn from_parts(
        countries: Vec<String>,
        quarters: Vec<Quarter>,
        variables: Vec<String>,
        values: Vec<f64>,
    ) -> Self {
        assert_eq!(values.len(), countries.len() * quarters.len() * variables.len());
        PanelDataset {
            countries,
            quarters,
            variables,
            values,
        }
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn quarters(&self) -> &[Quarter] {
        &self.quarters
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    /// Raw backing values, row-major `[country][quarter][variable]`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_countries(&self) -> usize {
        self.countries.len()
    }

    pub fn n_quarters(&self) -> usize {
        self.quarters.len()
    }

    pub fn n_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn value(&self, country: usize, quarter: usize, variable: usize) -> f64 {
        self.values[(country * self.quarters.len() + quarter) * self.variables.len() + variable]
    }

    pub fn country_index(&self, country: &str) -> Option<usize> {
        self.countries.iter().position(|c| c == country)
    }

    pub fn variable_index(&self, variable: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == variable)
    }

    pub fn quarter_index(&self, quarter: Quarter) -> Option<usize> {
        let first = self.quarters.first()?.index();
        let offset = quarter.index() - first;
        if offset < 0 || offset as usize >= self.quarters.len() {
            None
        } else {
            Some(offset as usize)
        }
    }

    /// One country's time series for one variable.
    pub fn series(&self, country: usize, variable: usize) -> Vec<f64> {
        (0..self.quarters.len()).map(|t| self.value(country, t, variable)).collect()
    }

    /// Restricts to a later end quarter and/or drops countries, preserving
    /// balance.
    pub fn subsample(&self, end: Option<Quarter>, exclude_countries: &[String]) -> PanelDataset {
        let keep_t = match end {
            Some(e) => self.quarters.iter().filter(|q| **q <= e).count(),
            None => self.quarters.len(),
        };
        let keep_c: Vec<usize> = (0..self.countries.len())
            .filter(|ci| !exclude_countries.contains(&self.countries[*ci]))
            .collect();
        let mut values =
            Vec::with_capacity(keep_c.len() * keep_t * self.variables.len());
        for &ci in &keep_c {
            for t in 0..keep_t {
                for k in 0..self.variables.len() {
                    values.push(self.value(ci, t, k));
                }
            }
        }
        PanelDataset {
            countries: keep_c.iter().map(|&ci| self.countries[ci].clone()).collect(),
            quarters: self.quarters[..keep_t].to_vec(),
            variables: self.variables.clone(),
            values,
        }
    }

    /// Writes the dataset as long-format CSV in (country, variable, date) order.
    pub fn to_csv_writer<W: io::Write>(&self, writer: W) -> Result<(), PanelError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["country", "date", "variable", "value"])?;
        for (ci, country) in self.countries.iter().enumerate() {
            for (ki, variable) in self.variables.iter().enumerate() {
                for (ti, q) in self.quarters.iter().enumerate() {
                    w.write_record([
                        country,
                        &q.to_string(),
                        variable,
                        &self.value(ci, ti, ki).to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}
