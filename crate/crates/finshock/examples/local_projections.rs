//! Panel local projections of one variable on the true financial shock,
//! with date-clustered HAC bands, printed against the impulse responses
//! implied by the generating system's companion form.
//!
//! Run with: cargo run --example local_projections

use finshock::bvar::companion_irf;
use finshock::dgp::{make_sign_separated_impact, simulate_var_panel, DgpSpec};
use finshock::identification::scheme;
use finshock::lp::{lp_irf, HacRule, LpData, LpSpec};
use nalgebra::DMatrix;

fn main() {
    let base = scheme("baseline").expect("built-in scheme");
    let fin = base.shock_index("financial").expect("financial shock");
    let impact = make_sign_separated_impact(&base, 2).expect("impact");
    let (n, t, k, p) = (16, 80, 5, 4);
    let mut spec = DgpSpec::random_stable(n, t, k, p, 0.7, impact, 2).expect("stable system");
    spec.variables = base.variables().to_vec();
    let (panel, shocks) = simulate_var_panel(&spec);

    let outcome = DMatrix::from_fn(n, t, |c, s| panel.value(c, s, 0));
    let shock = DMatrix::from_fn(n, t, |c, s| shocks[fin].value(c, s));
    let controls: Vec<(String, DMatrix<f64>)> = (0..k)
        .map(|v| {
            let m = DMatrix::from_fn(n, t, |c, s| panel.value(c, s, v));
            (spec.variables[v].clone(), m)
        })
        .collect();
    let data = LpData::new(
        panel.countries().to_vec(),
        panel.quarters().to_vec(),
        spec.variables[0].clone(),
        "financial".to_string(),
        outcome,
        shock,
        controls,
        vec![],
    )
    .expect("aligned panels");

    let lp_spec = LpSpec {
        horizons: 8,
        lags: p,
        hac_rule: HacRule::HPlus1,
        include_uncertainty: false,
        fixed_window: false,
    };
    let irf = lp_irf(&data, &lp_spec).expect("projections");
    let psis = companion_irf(&spec.lag_mats, 8);

    println!(
        "response of {} to a unit financial shock\n",
        spec.variables[0]
    );
    println!(
        "{:>2} {:>9} {:>9} {:>9} {:>9} {:>9} {:>7}",
        "h", "beta", "se", "lo90", "hi90", "true", "n_obs"
    );
    for (h, point) in irf.points.iter().enumerate() {
        let truth = (&psis[h] * &spec.impact)[(0, fin)];
        println!(
            "{:>2} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>7}",
            h, point.beta, point.se, point.lo90, point.hi90, truth, point.n_obs
        );
    }
}
