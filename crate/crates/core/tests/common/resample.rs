//! Independent resampling loop sharing only the per-replicate ChaCha8 stream
//! layout with the library.

use pate_bounds::{OutcomeRange, StudyData, UnitRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SEED: u64 = 20_240_611;
pub const REPS: usize = 200;
pub const POPULATION: usize = 40;
pub const LO: f64 = -2.0;
pub const HI: f64 = 3.0;

// (treated, y)
pub const SAMPLE: [(bool, f64); 10] = [
    (true, 1.4),
    (true, 2.2),
    (true, -0.3),
    (true, 0.9),
    (false, 0.1),
    (false, -1.2),
    (false, 0.7),
    (false, 1.5),
    (true, 2.9),
    (false, -0.4),
];

pub fn data() -> StudyData {
    let mut units: Vec<UnitRecord> = (0..POPULATION)
        .map(|i| UnitRecord::unsampled(format!("p{i}"), vec![]))
        .collect();
    for (i, &(t, y)) in SAMPLE.iter().enumerate() {
        units.push(UnitRecord::sampled(format!("s{i}"), t, y, vec![]));
    }
    StudyData::new(units, OutcomeRange::new(LO, HI).unwrap()).unwrap()
}

pub fn type7(mut v: Vec<f64>, q: f64) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (v.len() - 1) as f64 * q;
    let i = h.floor() as usize;
    let j = h.ceil() as usize;
    v[i] + (h - i as f64) * (v[j] - v[i])
}

/// `(lower ends, upper ends)` for each replicate.
pub fn oracle(mss: bool) -> (Vec<f64>, Vec<f64>) {
    let n = SAMPLE.len();
    let p = n as f64 / (n + POPULATION) as f64;
    let mut los = Vec::new();
    let mut his = Vec::new();
    for r in 0..REPS {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        rng.set_stream(r as u64);
        let sate = loop {
            let draw: Vec<(bool, f64)> = (0..n).map(|_| SAMPLE[rng.random_range(0..n)]).collect();
            let t: Vec<f64> = draw.iter().filter(|d| d.0).map(|d| d.1).collect();
            let c: Vec<f64> = draw.iter().filter(|d| !d.0).map(|d| d.1).collect();
            if !t.is_empty() && !c.is_empty() {
                break t.iter().sum::<f64>() / t.len() as f64 - c.iter().sum::<f64>() / c.len() as f64;
            }
        };
        let lo = sate * p + (LO - HI) * (1.0 - p);
        let hi = if mss { sate } else { sate * p + (HI - LO) * (1.0 - p) };
        los.push(lo);
        his.push(hi);
    }
    (los, his)
}
