//! Generates a stable synthetic VAR panel whose impact matrix strictly
//! satisfies the baseline sign scheme, then prints the true impact, a few
//! quarters of one country, and the matching structural shocks.
//!
//! Run with: cargo run --example simulate_panel

use finshock::dgp::{make_sign_separated_impact, simulate_var_panel, DgpSpec};
use finshock::identification::{satisfies, scheme};

fn main() {
    let base = scheme("baseline").expect("built-in scheme");
    let impact = make_sign_separated_impact(&base, 1).expect("sign-separated impact");
    let mut spec = DgpSpec::random_stable(4, 16, 5, 2, 0.7, impact, 1).expect("stable system");
    spec.variables = base.variables().to_vec();
    let (panel, shocks) = simulate_var_panel(&spec);

    println!("impact matrix (rows: variables, columns: shocks)");
    print!("{:<14}", "");
    for shock in base.shocks() {
        print!("{shock:>12}");
    }
    println!();
    for (i, var) in spec.variables.iter().enumerate() {
        print!("{var:<14}");
        for j in 0..base.k() {
            print!("{:>12.3}", spec.impact[(i, j)]);
        }
        println!();
    }
    println!(
        "satisfies the baseline scheme: {}",
        satisfies(&spec.impact, &base)
    );

    let country = &panel.countries()[0];
    println!("\nfirst quarters of {country}");
    print!("{:<10}", "quarter");
    for var in &spec.variables {
        print!("{var:>14}");
    }
    println!();
    for (t, quarter) in panel.quarters().iter().take(8).enumerate() {
        print!("{quarter:<10}");
        for v in 0..spec.k() {
            print!("{:>14.4}", panel.value(0, t, v));
        }
        println!();
    }

    let fin = base.shock_index("financial").expect("financial shock");
    println!("\ntrue financial shocks of {country}, same quarters");
    for (t, quarter) in shocks[fin].quarters.iter().take(8).enumerate() {
        println!("{quarter}  {:>8.4}", shocks[fin].value(0, t));
    }
}
