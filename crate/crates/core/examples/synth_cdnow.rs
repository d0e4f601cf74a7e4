//! Writes a synthetic transaction log in the CDNOW master-file layout
//! (`id yyyymmdd quantity amount`, whitespace separated).
//!
//! A cohort makes its first purchase in the first quarter of 1997 and is
//! observed until 1998-06-30. Each customer buys as a Poisson process with
//! a gamma-distributed weekly rate until an exponentially distributed
//! dropout time; spend per purchase is log-normal around a customer level.
//!
//! ```text
//! cargo run -p loyalty-topo --example synth_cdnow -- [customers] [seed] > cdnow.txt
//! ```

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, LogNormal, Poisson};

fn main() {
    let mut args = std::env::args().skip(1);
    let customers: u32 = args.next().map_or(1000, |a| a.parse().expect("customer count"));
    let seed: u64 = args.next().map_or(1997, |a| a.parse().expect("seed"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let start = NaiveDate::from_ymd_opt(1997, 1, 1).expect("date");
    let end = NaiveDate::from_ymd_opt(1998, 6, 30).expect("date");
    let horizon_weeks = (end - start).num_days() as f64 / 7.0;

    let rate = Gamma::new(0.55, 1.0 / 10.58).expect("rate prior");
    let dropout = Gamma::new(0.61, 1.0 / 11.67).expect("dropout prior");
    let level = LogNormal::new(3.2, 0.6).expect("spend level");
    let basket = Poisson::new(1.2).expect("basket size");

    let mut lines = Vec::new();
    for id in 1..=customers {
        let first = start + Duration::days(rng.random_range(0..90));
        let lambda: f64 = rate.sample(&mut rng);
        let mu: f64 = dropout.sample(&mut rng);
        let life_weeks = if mu > 0.0 { Exp::new(mu).expect("exp").sample(&mut rng) } else { f64::INFINITY };
        let mean_spend: f64 = level.sample(&mut rng);
        let spend = LogNormal::new(mean_spend.ln(), 0.4).expect("spend");

        let remaining = ((end - first).num_days() as f64 / 7.0).min(horizon_weeks);
        let alive = life_weeks.min(remaining);
        let mut t = 0.0;
        let mut purchase = |days: i64, rng: &mut ChaCha8Rng| {
            let date = first + Duration::days(days);
            let qty = 1 + basket.sample(rng) as u64;
            let amount: f64 = spend.sample(rng) * (qty as f64).sqrt();
            let cents = (amount * 100.0).round().max(100.0) as i64;
            lines.push(format!("{:05} {} {:>2} {:>3}.{:02}", id, date.format("%Y%m%d"), qty, cents / 100, cents % 100));
        };
        purchase(0, &mut rng);
        if lambda > 0.0 {
            let gap = Exp::new(lambda).expect("gap");
            loop {
                t += gap.sample(&mut rng);
                if t > alive {
                    break;
                }
                purchase((t * 7.0).floor() as i64, &mut rng);
            }
        }
    }
    for line in lines {
        println!("{line}");
    }
}
