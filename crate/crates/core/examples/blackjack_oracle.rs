//! Solves Blackjack by backward induction and checks the optimal policy by
//! simulation.
//!
//! cargo run --release --example blackjack_oracle [episodes]

use vsmc_policy::env::blackjack::STICK;
use vsmc_policy::env::{Blackjack, EnvSpec};
use vsmc_policy::eval::{evaluate_with, solve_finite_horizon};
use vsmc_policy::{Result, RngStream};

fn main() -> Result<()> {
    let episodes: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1_000_000);
    let env = EnvSpec::Blackjack.build()?;
    let sol = solve_finite_horizon(env.as_ref())?;
    println!("exact optimal expected return {:.5}", sol.value);
    let stats = evaluate_with(env.as_ref(), episodes, &RngStream::new(0), |_| sol.actor())?;
    println!(
        "{episodes} episodes: return {:.4} ± {:.4}, loss {:.4} draw {:.4} win {:.4}",
        stats.mean,
        stats.std_err,
        stats.outcome_prob("loss"),
        stats.outcome_prob("draw"),
        stats.outcome_prob("win")
    );
    println!("player sum by dealer card A,2..10 after the deal: stick (S) or hit (H), no usable ace");
    let left = sol.actions_left();
    for sum in (12..=20).rev() {
        let row: String = (1..=10)
            .map(|d| match sol.action(&Blackjack::state(sum, d, false), left - 1) {
                Some(STICK) => 'S',
                Some(_) => 'H',
                None => '.',
            })
            .collect();
        println!("{sum:>3} {row}");
    }
    Ok(())
}
