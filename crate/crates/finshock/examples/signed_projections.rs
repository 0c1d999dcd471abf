//! Sign-split local projections on an asymmetric outcome: negative shocks
//! hit twice as hard as positive ones, and the split regression recovers
//! both loading paths with a joint band on their difference.
//!
//! Run with: cargo run --example signed_projections

use finshock::dgp::{simulate_outcome, AsymmetricOutcomeSpec};
use finshock::identification::ShockPanel;
use finshock::dates::Quarter;
use finshock::lp::{lp_irf_signed, HacRule, LpData, LpSpec, Z90};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() {
    let (n, t) = (10, 240);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut quarters = Vec::with_capacity(t);
    let mut q = Quarter::new(1990, 1).unwrap();
    for _ in 0..t {
        quarters.push(q);
        q = q.next();
    }
    let shocks = ShockPanel {
        countries: (0..n).map(|i| format!("C{i:02}")).collect(),
        quarters,
        values: (0..n * t).map(|_| rng.sample(StandardNormal)).collect(),
    };

    let theta_pos = vec![0.5, 0.4, 0.3, 0.2, 0.1, 0.05, 0.0];
    let theta_neg: Vec<f64> = theta_pos.iter().map(|v| 2.0 * v).collect();
    let h_max = theta_pos.len() - 1;
    let outcome_spec =
        AsymmetricOutcomeSpec::new(theta_pos.clone(), theta_neg.clone(), 0.4, 4).unwrap();
    let (oq, oy) = simulate_outcome(&shocks, &outcome_spec).expect("outcome");

    let tt = oq.len();
    let shock_trim = DMatrix::from_fn(n, tt, |c, s| shocks.value(c, s + h_max));
    let data = LpData::new(
        shocks.countries.clone(),
        oq,
        "y".to_string(),
        "eps".to_string(),
        oy.clone(),
        shock_trim.clone(),
        vec![("y".to_string(), oy), ("eps".to_string(), shock_trim)],
        vec![],
    )
    .expect("aligned panels");

    let spec = LpSpec {
        horizons: h_max,
        lags: 2,
        hac_rule: HacRule::PPlusHPlus1,
        include_uncertainty: false,
        fixed_window: false,
    };
    let signed = lp_irf_signed(&data, &spec).expect("split projections");

    println!(
        "{:>2} {:>8} {:>8} {:>8} {:>8} {:>10}",
        "h", "beta+", "true+", "beta-", "true-", "split?"
    );
    for h in 0..=h_max {
        let p = &signed.positive.points[h];
        let m = &signed.negative.points[h];
        // the joint band tells whether the branches differ significantly
        let var = p.se * p.se + m.se * m.se - 2.0 * signed.cov_pn[h];
        let separated = (p.beta - m.beta).abs() > Z90 * var.max(0.0).sqrt();
        println!(
            "{:>2} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>10}",
            h,
            p.beta,
            theta_pos[h],
            m.beta,
            theta_neg[h],
            if separated { "yes" } else { "no" }
        );
    }
}
