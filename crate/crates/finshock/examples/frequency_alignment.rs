//! Carries an annual series to quarterly frequency both ways: linear
//! interpolation between fourth-quarter anchors, and the flat per-year
//! robustness variant.
//!
//! Run with: cargo run --example frequency_alignment

use std::collections::BTreeMap;

use finshock::dates::Quarter;
use finshock::panel::{interpolate_annual, InterpMethod};

fn main() {
    let annual: BTreeMap<i32, f64> = [
        (2008, 29.4),
        (2009, 30.1),
        (2010, 29.8),
        (2012, 31.0),
    ]
    .into_iter()
    .collect();

    let linear =
        interpolate_annual("AT", "gini_total", &annual, InterpMethod::Linear, 4).expect("linear");
    let flat =
        interpolate_annual("AT", "gini_total", &annual, InterpMethod::Flat, 4).expect("flat");

    println!("annual observations: {annual:?}");
    println!("(2011 is missing: linear bridges the gap, flat leaves it empty)\n");
    println!("{:<10} {:>8} {:>8}", "quarter", "linear", "flat");
    let start = Quarter::new(2008, 1).unwrap();
    let end = Quarter::new(2012, 4).unwrap();
    for q in start.through(end) {
        let lin = linear
            .get(&q)
            .map(|v| format!("{v:>8.3}"))
            .unwrap_or_else(|| format!("{:>8}", "-"));
        let fl = flat
            .get(&q)
            .map(|v| format!("{v:>8.3}"))
            .unwrap_or_else(|| format!("{:>8}", "-"));
        println!("{q:<10} {lin} {fl}");
    }
}
