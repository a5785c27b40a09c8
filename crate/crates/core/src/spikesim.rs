//! Synthetic event generation for spike-sorting experiments.
//!
//! Every neuron is a standard spike shape scaled by one amplitude per
//! recording site; an event is the concatenation of the per-site waveforms
//! plus i.i.d. Gaussian noise. A configurable fraction of events are
//! superpositions: a second neuron's waveform, shifted by a few samples, is
//! added on top of the first neuron's. Ground truth (labels, superposition
//! flags, the amplitude matrix) is returned alongside the events.

use crate::error::{Error, Result};
use crate::geometry::EventMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Simulation parameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SimConfig {
    pub n_neurons: usize,
    pub events_per_neuron: usize,
    /// Site amplitudes are drawn uniformly from [0, amp_max].
    pub amp_max: f64,
    /// Fraction of events that are superpositions of two neurons.
    pub superposition_freq: f64,
    /// Standard deviation of the additive Gaussian noise.
    pub noise_sd: f64,
    pub rng_seed: u64,
    pub n_sites: usize,
    pub samples_per_site: usize,
}

impl SimConfig {
    /// Four sites of 45 samples, unit noise, no superpositions.
    pub fn new(n_neurons: usize, events_per_neuron: usize, amp_max: f64, rng_seed: u64) -> Self {
        SimConfig {
            n_neurons,
            events_per_neuron,
            amp_max,
            superposition_freq: 0.0,
            noise_sd: 1.0,
            rng_seed,
            n_sites: 4,
            samples_per_site: 45,
        }
    }

    /// Event dimension: sites times samples per site.
    pub fn event_dim(&self) -> usize {
        self.n_sites * self.samples_per_site
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_neurons == 0 {
            problems.push("n_neurons must be >= 1");
        }
        if self.events_per_neuron == 0 {
            problems.push("events_per_neuron must be >= 1");
        }
        if !(self.amp_max > 0.0) {
            problems.push("amp_max must be positive");
        }
        if !(0.0..=1.0).contains(&self.superposition_freq) {
            problems.push("superposition_freq must lie in [0, 1]");
        }
        if !(self.noise_sd >= 0.0) {
            problems.push("noise_sd must be nonnegative");
        }
        if self.n_sites == 0 {
            problems.push("n_sites must be >= 1");
        }
        if self.samples_per_site < 8 {
            problems.push("samples_per_site must be >= 8");
        }
        if self.superposition_freq > 0.0 && self.n_neurons < 2 {
            problems.push("superpositions need at least 2 neurons");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(problems.join("; ")))
        }
    }
}

/// Per-event truth emitted with the simulated events.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// The generating neuron (the first neuron, for superposed events).
    pub labels: Vec<usize>,
    pub is_superposition: Vec<bool>,
    /// Site amplitudes, one row per neuron.
    pub amplitudes: Vec<Vec<f64>>,
}

/// The unit-peak standard spike shape: a dominant valley about a third of
/// the way into the window followed by a smaller positive overshoot.
/// Deterministic; max |value| = 1 with the minimum at the valley.
pub fn standard_shape(samples: usize) -> Vec<f64> {
    assert!(samples >= 8, "shape needs at least 8 samples");
    let valley = (samples / 3) as f64;
    let overshoot = valley + 10.0;
    let (sigma_v, sigma_o) = (2.5, 6.0);
    let mut shape: Vec<f64> = (0..samples)
        .map(|i| {
            let x = i as f64;
            let dip = -(-((x - valley) * (x - valley)) / (2.0 * sigma_v * sigma_v)).exp();
            let bump = 0.4 * (-((x - overshoot) * (x - overshoot)) / (2.0 * sigma_o * sigma_o)).exp();
            dip + bump
        })
        .collect();
    let peak = shape.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    for v in &mut shape {
        *v /= peak;
    }
    shape
}

/// The noise-free event of one neuron: per-site amplitude times the
/// standard shape, sites concatenated.
pub fn ideal_event(amplitudes: &[f64], shape: &[f64]) -> Vec<f64> {
    let mut event = Vec::with_capacity(amplitudes.len() * shape.len());
    for &a in amplitudes {
        event.extend(shape.iter().map(|&s| a * s));
    }
    event
}

/// Adds `other`'s ideal event to `base`, shifted by `offset` samples within
/// each site's window and truncated at the window borders.
fn add_shifted(base: &mut [f64], other: &[f64], offset: i64, n_sites: usize, w: usize) {
    for site in 0..n_sites {
        for m in 0..w {
            let src = m as i64 - offset;
            if (0..w as i64).contains(&src) {
                base[site * w + m] += other[site * w + src as usize];
            }
        }
    }
}

const SUPERPOSITION_MAX_SHIFT: i64 = 5;

/// Minimum site-amplitude a neuron must reach, as a fraction of `amp_max`;
/// neurons below it would be indistinguishable from noise.
const MIN_PEAK_AMP_FRACTION: f64 = 0.2;

/// Minimum distance between two neurons' amplitude vectors, as a fraction
/// of `amp_max`; coincident neurons would make any clustering ground truth
/// meaningless.
const MIN_AMP_SEPARATION_FRACTION: f64 = 0.3;

/// Runs the simulation. Reproducible: the same config (including seed)
/// produces bit-identical output.
pub fn simulate(cfg: &SimConfig) -> Result<(EventMatrix, GroundTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let shape = standard_shape(cfg.samples_per_site);
    let dim = cfg.event_dim();
    let n_events = cfg.n_neurons * cfg.events_per_neuron;

    // Per-neuron site amplitudes; redrawn until the neuron is loud enough
    // and distinguishable from the neurons already drawn.
    let mut amplitudes: Vec<Vec<f64>> = Vec::with_capacity(cfg.n_neurons);
    let min_peak = MIN_PEAK_AMP_FRACTION * cfg.amp_max;
    let min_sep = MIN_AMP_SEPARATION_FRACTION * cfg.amp_max;
    for _ in 0..cfg.n_neurons {
        let amps = loop {
            let amps: Vec<f64> = (0..cfg.n_sites)
                .map(|_| rng.gen_range(0.0..=cfg.amp_max))
                .collect();
            let peak = amps.iter().cloned().fold(0.0f64, f64::max);
            if peak < min_peak {
                continue;
            }
            let separated = amplitudes.iter().all(|prev| {
                let d2: f64 = prev
                    .iter()
                    .zip(&amps)
                    .map(|(&a, &b)| (a - b) * (a - b))
                    .sum();
                d2.sqrt() >= min_sep
            });
            if separated {
                break amps;
            }
        };
        amplitudes.push(amps);
    }
    let ideals: Vec<Vec<f64>> = amplitudes.iter().map(|a| ideal_event(a, &shape)).collect();

    // Exactly round(freq * n_events) superpositions, spread uniformly.
    let n_super = (cfg.superposition_freq * n_events as f64).round() as usize;
    let mut slots: Vec<usize> = (0..n_events).collect();
    slots.shuffle(&mut rng);
    let mut is_superposition = vec![false; n_events];
    for &s in &slots[..n_super] {
        is_superposition[s] = true;
    }

    let mut data = Vec::with_capacity(n_events * dim);
    let mut labels = Vec::with_capacity(n_events);
    for neuron in 0..cfg.n_neurons {
        for _ in 0..cfg.events_per_neuron {
            let event_idx = labels.len();
            let mut event = ideals[neuron].clone();
            if is_superposition[event_idx] {
                let second = loop {
                    let s = rng.gen_range(0..cfg.n_neurons);
                    if s != neuron {
                        break s;
                    }
                };
                let offset = rng.gen_range(-SUPERPOSITION_MAX_SHIFT..=SUPERPOSITION_MAX_SHIFT);
                add_shifted(
                    &mut event,
                    &ideals[second],
                    offset,
                    cfg.n_sites,
                    cfg.samples_per_site,
                );
            }
            if cfg.noise_sd > 0.0 {
                for v in &mut event {
                    let z: f64 = rng.sample(StandardNormal);
                    *v += cfg.noise_sd * z;
                }
            }
            data.extend_from_slice(&event);
            labels.push(neuron);
        }
    }

    let events = EventMatrix::new(n_events, dim, data)?;
    Ok((
        events,
        GroundTruth {
            labels,
            is_superposition,
            amplitudes,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_has_unit_valley_a_third_in() {
        let s = standard_shape(45);
        assert_eq!(s.len(), 45);
        let (argmin, min) = s
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &v)| {
                if v < acc.1 {
                    (i, v)
                } else {
                    acc
                }
            });
        assert_eq!(argmin, 15);
        assert_eq!(min, -1.0);
        let max_abs = s.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert_eq!(max_abs, 1.0);
        // Positive overshoot after the valley.
        assert!(s[25] > 0.2);
    }

    #[test]
    fn shape_is_deterministic_and_scales_linearly() {
        assert_eq!(standard_shape(45), standard_shape(45));
        let s = standard_shape(32);
        let a = 7.5;
        let scaled: Vec<f64> = s.iter().map(|&v| a * v).collect();
        let min = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(min, -a);
    }

    #[test]
    fn noise_free_events_equal_ideal_events() {
        let mut cfg = SimConfig::new(3, 5, 20.0, 42);
        cfg.noise_sd = 0.0;
        let (events, truth) = simulate(&cfg).unwrap();
        assert_eq!(events.n(), 15);
        assert_eq!(events.dim(), 180);
        let shape = standard_shape(45);
        for i in 0..events.n() {
            let ideal = ideal_event(&truth.amplitudes[truth.labels[i]], &shape);
            assert_eq!(events.row(i), &ideal[..]);
        }
    }

    #[test]
    fn forty_percent_superpositions_three_neurons() {
        let mut cfg = SimConfig::new(3, 100, 20.0, 7);
        cfg.superposition_freq = 0.4;
        let (events, truth) = simulate(&cfg).unwrap();
        assert_eq!(events.dim(), 180);
        let count = truth.is_superposition.iter().filter(|&&s| s).count();
        assert_eq!(count, 120); // exactly round(0.4 * 300)
        assert_eq!(truth.labels.len(), 300);
        // Superposed events keep the first neuron's label.
        for n in 0..3 {
            assert_eq!(truth.labels.iter().filter(|&&l| l == n).count(), 100);
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let mut cfg = SimConfig::new(4, 20, 10.0, 123);
        cfg.superposition_freq = 0.25;
        let (a, ta) = simulate(&cfg).unwrap();
        let (b, tb) = simulate(&cfg).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        assert_eq!(ta, tb);
        cfg.rng_seed = 124;
        let (c, _) = simulate(&cfg).unwrap();
        assert_ne!(a.as_slice(), c.as_slice());
    }

    #[test]
    fn superposition_fraction_tracks_config() {
        for &freq in &[0.1, 0.5, 0.9] {
            let mut cfg = SimConfig::new(5, 300, 20.0, 9);
            cfg.superposition_freq = freq;
            let (_, truth) = simulate(&cfg).unwrap();
            let got = truth.is_superposition.iter().filter(|&&s| s).count() as f64 / 1500.0;
            assert!(
                (got - freq).abs() <= 0.02,
                "superposition fraction {got} vs configured {freq}"
            );
        }
    }

    #[test]
    fn clean_event_mean_approaches_ideal() {
        let mut cfg = SimConfig::new(2, 200, 20.0, 10);
        cfg.noise_sd = 1.0;
        let (events, truth) = simulate(&cfg).unwrap();
        let shape = standard_shape(45);
        let bound = 3.0 * cfg.noise_sd / (200.0f64).sqrt();
        for neuron in 0..2 {
            let ideal = ideal_event(&truth.amplitudes[neuron], &shape);
            let rows: Vec<usize> = (0..events.n())
                .filter(|&i| truth.labels[i] == neuron)
                .collect();
            for c in 0..events.dim() {
                let mean: f64 =
                    rows.iter().map(|&i| events.row(i)[c]).sum::<f64>() / rows.len() as f64;
                assert!(
                    (mean - ideal[c]).abs() <= bound,
                    "coordinate {c} of neuron {neuron}: mean {mean} vs ideal {}",
                    ideal[c]
                );
            }
        }
    }

    #[test]
    fn residual_variance_close_to_one() {
        let cfg = SimConfig::new(4, 50, 20.0, 31); // 200 events x 180 coords
        let (events, truth) = simulate(&cfg).unwrap();
        let shape = standard_shape(45);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let mut count = 0usize;
        for i in 0..events.n() {
            let ideal = ideal_event(&truth.amplitudes[truth.labels[i]], &shape);
            for (v, iv) in events.row(i).iter().zip(&ideal) {
                let r = v - iv;
                sum += r;
                sum2 += r * r;
                count += 1;
            }
        }
        assert!(count >= 5000);
        let mean = sum / count as f64;
        let var = sum2 / count as f64 - mean * mean;
        assert!((0.9..=1.1).contains(&var), "residual variance {var}");
    }

    #[test]
    fn amplitude_floor_and_separation_hold() {
        for seed in 0..20 {
            let cfg = SimConfig::new(10, 1, 20.0, seed);
            let (_, truth) = simulate(&cfg).unwrap();
            for amps in &truth.amplitudes {
                let peak = amps.iter().cloned().fold(0.0f64, f64::max);
                assert!(peak >= 0.2 * 20.0);
                assert!(amps.iter().all(|&a| (0.0..=20.0).contains(&a)));
            }
            for i in 0..10 {
                for j in 0..i {
                    let d2: f64 = truth.amplitudes[i]
                        .iter()
                        .zip(&truth.amplitudes[j])
                        .map(|(&a, &b)| (a - b) * (a - b))
                        .sum();
                    assert!(d2.sqrt() >= 0.3 * 20.0);
                }
            }
        }
    }

    #[test]
    fn shifted_superposition_truncates_at_borders() {
        let w = 45;
        let mut base = vec![0.0; 2 * w];
        let mut other = vec![0.0; 2 * w];
        other[0] = 1.0; // first sample of site 0
        other[w] = 2.0; // first sample of site 1
        add_shifted(&mut base, &other, -3, 2, w);
        // Shift left by 3: the first samples fall off the window edge.
        assert!(base.iter().all(|&v| v == 0.0));
        let mut base = vec![0.0; 2 * w];
        add_shifted(&mut base, &other, 3, 2, w);
        assert_eq!(base[3], 1.0);
        assert_eq!(base[w + 3], 2.0);
        // Nothing bleeds across the site boundary.
        assert_eq!(base[w], 0.0);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = SimConfig::new(0, 10, 20.0, 1);
        assert!(simulate(&cfg).is_err());
        cfg = SimConfig::new(1, 10, 20.0, 1);
        cfg.superposition_freq = 0.5; // needs two neurons
        assert!(simulate(&cfg).is_err());
        cfg = SimConfig::new(2, 10, 20.0, 1);
        cfg.superposition_freq = 1.5;
        assert!(simulate(&cfg).is_err());
        cfg = SimConfig::new(2, 10, -1.0, 1);
        assert!(simulate(&cfg).is_err());
    }
}
