//! Regenerates the synthetic claims fixture under `tests/fixtures`.
//!
//! 345 policies with severity rows (311 single-claim, 34 double-claim), plus zero-count
//! and frequency-only policies that the inner join must drop.

use std::error::Error;
use std::fs::File;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

const SINGLE: usize = 311;
const DOUBLE: usize = 34;
const ZERO: usize = 6;
const FREQ_ONLY: usize = 4;

fn main() -> Result<(), Box<dyn Error>> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures"));
    let mut rng = ChaCha20Rng::seed_from_u64(20_240_901);
    let mut counts: Vec<u32> = [vec![1; SINGLE], vec![2; DOUBLE], vec![0; ZERO], vec![1; FREQ_ONLY]].concat();
    let mut kinds: Vec<u8> = [vec![0u8; SINGLE + DOUBLE], vec![1; ZERO], vec![2; FREQ_ONLY]].concat();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.shuffle(&mut rng);
    counts = order.iter().map(|&i| counts[i]).collect();
    kinds = order.iter().map(|&i| kinds[i]).collect();

    let body = Normal::new(6.0, 0.8)?;
    let small = Normal::new(3.8, 1.0)?;
    let mut freq = csv::Writer::from_writer(File::create(dir.join("freq.csv"))?);
    let mut sev = csv::Writer::from_writer(File::create(dir.join("sev.csv"))?);
    freq.write_record(["policy_id", "claim_count"])?;
    sev.write_record(["policy_id", "claim_amount"])?;
    for (i, (&count, &kind)) in counts.iter().zip(&kinds).enumerate() {
        let id = format!("{}", 100_001 + i * 7);
        freq.write_record([id.as_str(), &count.to_string()])?;
        if kind != 0 {
            continue;
        }
        for _ in 0..count {
            let log_amount: f64 = if rng.random::<f64>() < 0.6 { body.sample(&mut rng) } else { small.sample(&mut rng) };
            let amount = (log_amount.exp() * 100.0).round().max(1.0) / 100.0;
            sev.write_record([id.as_str(), &format!("{amount:.2}")])?;
        }
    }
    freq.flush()?;
    sev.flush()?;
    Ok(())
}
