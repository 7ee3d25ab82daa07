//! The whole protocol on the one-parameter coin, where every quantity has
//! a closed form to check against.
//!
//! A predictor theta in [0, 1] shifts a coin's heads probability to
//! p(theta) = 0.5 + mu theta + eta theta^2; squared loss measures the
//! prediction against the realized outcome. The protocol: deploy uniform
//! exploration parameters and collect outcomes, fit a linear response
//! coefficient by least squares, then minimize the fitted modeled risk.

use performative::atlas::{coin_plug_in_argmin, coin_plug_in_risk};
use performative::core::{deploy_and_collect, RngStream};
use performative::harness::{Scenario, ScenarioConfig};
use performative::maps::CoinMap;

fn main() {
    let (mu, eta) = (0.3, 0.2);
    let scenario = Scenario::build("coin_demo", &ScenarioConfig::Coin { mu, eta })
        .expect("coin scenario");
    let map = CoinMap::new(mu, eta).expect("coin map");

    let (theta_star, risk_star) = map.true_optimum();
    println!("ground truth: p(theta) = 0.5 + {mu} theta + {eta} theta^2");
    println!("  optimal deployment theta* = {theta_star:.6}, risk {risk_star:.6}");
    println!(
        "  best linear response coefficient under uniform exploration: {}",
        mu + 0.75 * eta
    );
    println!();

    let n = 100_000;
    let mut rng = RngStream::new(42, 0);
    let data = deploy_and_collect(scenario.map.as_ref(), &scenario.exploration, n, &mut rng)
        .expect("deployment draws");
    println!("step 1: deployed {n} uniform exploration parameters");

    let fit = scenario.fit(&data).expect("least-squares fit");
    let beta_hat = fit.beta.scalar().expect("scalar coefficient");
    println!("step 2: fitted response coefficient beta_hat = {beta_hat:.5}");

    let (theta_hat, path, _) = scenario
        .optimize_plugin(&fit.beta, &mut rng)
        .expect("modeled-risk optimization");
    let formula = coin_plug_in_argmin(beta_hat).expect("closed-form argmin");
    println!(
        "step 3: optimized the modeled risk ({path}) -> theta_hat = {:.6}",
        theta_hat[0]
    );
    println!("         closed-form argmin of the fitted model = {formula:.6}");
    println!();

    let modeled = coin_plug_in_risk(beta_hat, theta_hat[0]).expect("modeled risk");
    let realized = map.true_risk(theta_hat[0]);
    println!("modeled risk at theta_hat:  {modeled:.6}");
    println!("realized risk at theta_hat: {realized:.6}");
    println!("excess over the optimum:    {:.2e}", realized - risk_star);
    println!();
    println!(
        "the curvature eta makes the linear model misspecified, yet the plug-in \
         deployment lands within {:.1e} of the optimum",
        (theta_hat[0] - theta_star).abs()
    );
}
