//! Synthetic rows in the layout of the ddC/ddI AIDS trial table.
//!
//! The real data are not shipped; this generator only reproduces the schema
//! and rough scale (467 patients, visits at 0, 2, 6, 12 and 18 months).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

pub const AIDS_COLUMNS: [&str; 9] =
    ["patient", "Time", "death", "CD4", "obstime", "drug", "gender", "prevOI", "AZT"];
pub const AIDS_VISITS: [f64; 5] = [0.0, 2.0, 6.0, 12.0, 18.0];
pub const AIDS_PATIENTS: usize = 467;

#[derive(Debug, Clone, PartialEq)]
pub struct AidsRow {
    pub patient: usize,
    pub time: f64,
    pub death: u8,
    pub cd4: f64,
    pub obstime: f64,
    pub drug: &'static str,
    pub gender: &'static str,
    pub prev_oi: &'static str,
    pub azt: &'static str,
}

impl AidsRow {
    pub fn fields(&self) -> [String; 9] {
        [
            self.patient.to_string(),
            self.time.to_string(),
            self.death.to_string(),
            self.cd4.to_string(),
            self.obstime.to_string(),
            self.drug.to_string(),
            self.gender.to_string(),
            self.prev_oi.to_string(),
            self.azt.to_string(),
        ]
    }
}

/// Two latent CD4 trajectories with time-varying membership; the low
/// trajectory carries the higher death hazard.
pub fn simulate_aids_rows(n_patients: usize, seed: u64) -> Vec<AidsRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.2).expect("valid sd");
    let mut rows = Vec::new();
    for p in 1..=n_patients {
        let drug = if rng.random_bool(0.5) { "ddI" } else { "ddC" };
        let gender = if rng.random_bool(0.9) { "male" } else { "female" };
        let prev_oi = if rng.random_bool(0.66) { "AIDS" } else { "noAIDS" };
        let azt = if rng.random_bool(0.35) { "intolerance" } else { "failure" };
        let aids = (prev_oi == "AIDS") as u8 as f64;
        let u0: f64 = 2.0 * rng.sample::<f64, _>(StandardNormal);
        let u1: f64 = 0.05 * rng.sample::<f64, _>(StandardNormal);
        let labels: Vec<usize> = AIDS_VISITS
            .iter()
            .map(|&t| {
                let eta = -0.2 + 1.2 * aids + 0.06 * t;
                let p_low = 1.0 / (1.0 + (-eta).exp());
                rng.random_bool(p_low) as usize
            })
            .collect();
        let mean = |k: usize, t: f64| {
            let base = if k == 0 { 10.5 - 0.12 * t } else { 5.0 - 0.18 * t };
            base - 0.8 * aids + 0.3 * (azt == "failure") as u8 as f64 + u0 + u1 * t
        };
        // constant hazard per class within each visit interval
        let mut time = 0.0;
        let mut death = 0u8;
        let censor_at = rng.random_range(12.0..21.5);
        for (j, &start) in AIDS_VISITS.iter().enumerate() {
            let end = AIDS_VISITS.get(j + 1).copied().unwrap_or(f64::INFINITY).min(censor_at);
            if start >= censor_at {
                break;
            }
            let rate = if labels[j] == 1 { 0.035 } else { 0.008 } * (0.5 * aids - 0.15 * u0).exp();
            let wait = -rng.random::<f64>().max(f64::MIN_POSITIVE).ln() / rate;
            if start + wait < end {
                time = start + wait;
                death = 1;
                break;
            }
            time = end;
        }
        for (j, &t) in AIDS_VISITS.iter().enumerate() {
            if t > time {
                break;
            }
            if j > 0 && rng.random_bool(0.2) {
                continue;
            }
            let cd4 = (mean(labels[j], t) + noise.sample(&mut rng)).max(0.0);
            rows.push(AidsRow {
                patient: p,
                time: ((time * 1e4).round() / 1e4).max(1e-4),
                death,
                cd4: (cd4 * 1e4).round() / 1e4,
                obstime: t,
                drug,
                gender,
                prev_oi,
                azt,
            });
        }
    }
    rows
}
