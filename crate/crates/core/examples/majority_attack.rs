// Private-fork race: how often an attacker with a given share of the hash
// rate overtakes the honest chain from two blocks behind.
use tamperchain::params::ChainParams;
use tamperchain::tamper::majority_attack_rate;

fn main() {
    let params = ChainParams {
        genesis_difficulty: 16,
        ..ChainParams::default()
    };
    let (depth, horizon, runs) = (2, 200, 200);
    println!("power  wins/runs  rate   (p/q)^(depth+1)");
    for power in [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.9] {
        let (rate, outcomes) = majority_attack_rate(&params, power, depth, horizon, 0..runs);
        let wins = outcomes.iter().filter(|o| o.attacker_won).count();
        let ruin = (power / (1.0 - power)).powi(depth as i32 + 1).min(1.0);
        println!("{power:>5}  {wins:>4}/{runs:<4}  {rate:.3}  {ruin:.3}");
    }
}
