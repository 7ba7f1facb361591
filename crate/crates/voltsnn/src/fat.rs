//! Error-tolerance analysis and fault-aware training.
//!
//! The accuracy profile measures test accuracy across BER levels; its shape
//! fixes the tolerable-BER threshold and the retraining schedule. Training
//! then walks the schedule in ascending order, injecting a fresh error map
//! per level, retraining one epoch, and keeping the best model seen.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seeds;
use crate::snn::{SimParams, SnnModel};
use crate::stack::DramStack;

/// Accuracy drop (percentage points) separating tolerable from intolerable
/// BER levels.
pub const TOLERABLE_DROP: f64 = 0.03;
/// Accuracy drop bounding the acceptable-accuracy region used to pick the
/// retraining schedule.
pub const ACCEPTABLE_DROP: f64 = 0.01;
/// Post-training drop that flags an accuracy collapse in the level log.
pub const COLLAPSE_DROP: f64 = 0.20;
/// Levels of the conventional retraining ladder (1e-8 .. 1e-2).
pub const CONVENTIONAL_FAT_LEVELS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub ber: f64,
    pub mean_accuracy: f64,
    pub stddev: f64,
}

/// Accuracy-vs-BER curve with its error-free baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyProfile {
    pub baseline_accuracy: f64,
    pub entries: Vec<ProfileEntry>,
}

impl AccuracyProfile {
    pub fn validate(&self) -> Result<()> {
        if !self
            .entries
            .windows(2)
            .all(|w| w[0].ber < w[1].ber)
        {
            return Err(Error::ProfileUnusable("BER values not strictly increasing".into()));
        }
        if self
            .entries
            .iter()
            .any(|e| !(0.0..=1.0).contains(&e.mean_accuracy))
        {
            return Err(Error::ProfileUnusable("accuracy outside [0, 1]".into()));
        }
        Ok(())
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# baseline_accuracy={}", self.baseline_accuracy)?;
        writeln!(w, "ber,mean_accuracy,stddev")?;
        for e in &self.entries {
            writeln!(w, "{},{},{}", e.ber, e.mean_accuracy, e.stddev)?;
        }
        Ok(())
    }

    /// Parses the CSV form written by `write_csv`. Other `#` comment lines
    /// are ignored.
    pub fn read_csv<R: std::io::BufRead>(r: R) -> Result<Self> {
        let mut baseline_accuracy: Option<f64> = None;
        let mut entries = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(Error::Io)?;
            let line = line.trim();
            if let Some(rest) = line.strip_prefix("# baseline_accuracy=") {
                baseline_accuracy = Some(rest.trim().parse().map_err(|e| {
                    Error::ProfileUnusable(format!("line {}: bad baseline: {e}", lineno + 1))
                })?);
                continue;
            }
            if line.is_empty() || line.starts_with('#') || line.starts_with("ber,") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::ProfileUnusable(format!(
                    "line {}: expected 3 fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let num = |k: usize| -> Result<f64> {
                fields[k].trim().parse().map_err(|e| {
                    Error::ProfileUnusable(format!("line {}: field {k}: {e}", lineno + 1))
                })
            };
            entries.push(ProfileEntry {
                ber: num(0)?,
                mean_accuracy: num(1)?,
                stddev: num(2)?,
            });
        }
        let profile = AccuracyProfile {
            baseline_accuracy: baseline_accuracy.ok_or_else(|| {
                Error::ProfileUnusable("missing baseline_accuracy header".into())
            })?,
            entries,
        };
        profile.validate()?;
        Ok(profile)
    }
}

/// Measures accuracy at each BER level: quantize, map, inject a fresh mask
/// per trial, evaluate. Trials run in parallel; results depend only on seeds.
pub fn accuracy_profile(
    model: &SnnModel,
    ber_list: &[f64],
    trials: usize,
    stack: &DramStack,
    sim: &SimParams,
    test_set: &Dataset,
    seed: u64,
) -> Result<AccuracyProfile> {
    if model.labels.is_none() {
        return Err(Error::UnlabeledModel);
    }
    if trials == 0 {
        return Err(Error::InvalidConfig("profile trials must be >= 1".into()));
    }
    stack.validate()?;
    let mut bers: Vec<f64> = ber_list.to_vec();
    bers.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bers.dedup();

    let eval_seed = seeds::derive(seed, &[0x6576616c]);
    let baseline_accuracy = model.evaluate(test_set, sim, eval_seed)?;

    let shape = (model.n_inputs, model.n_neurons);
    let jobs: Vec<(usize, usize)> = (0..bers.len())
        .flat_map(|b| (0..trials).map(move |t| (b, t)))
        .collect();
    let accs: Vec<f64> = jobs
        .par_iter()
        .map(|&(b, t)| -> Result<f64> {
            let ber = bers[b];
            if ber == 0.0 {
                return model.evaluate(test_set, sim, eval_seed);
            }
            let trial_seed = seeds::derive(seed, &[0x7472696c, b as u64, t as u64]);
            let out = stack.corrupt_weights(&model.weights, shape, ber, trial_seed)?;
            let mut corrupted = model.clone();
            corrupted.weights = out.weights;
            corrupted.evaluate(test_set, sim, eval_seed)
        })
        .collect::<Result<Vec<_>>>()?;

    let entries = bers
        .iter()
        .enumerate()
        .map(|(b, &ber)| {
            let slice = &accs[b * trials..(b + 1) * trials];
            let mean = slice.iter().sum::<f64>() / trials as f64;
            let var = slice.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / trials as f64;
            ProfileEntry {
                ber,
                mean_accuracy: mean,
                stddev: var.sqrt(),
            }
        })
        .collect();
    let profile = AccuracyProfile {
        baseline_accuracy,
        entries,
    };
    profile.validate()?;
    Ok(profile)
}

/// Largest profiled BER whose accuracy drop from the baseline stays within
/// the tolerable bound. Errors when every level is intolerable.
pub fn determine_ber_th(profile: &AccuracyProfile) -> Result<f64> {
    profile.validate()?;
    profile
        .entries
        .iter()
        .rev()
        .find(|e| profile.baseline_accuracy - e.mean_accuracy <= TOLERABLE_DROP)
        .map(|e| e.ber)
        .ok_or_else(|| Error::ProfileUnusable("every profiled BER is intolerable".into()))
}

/// Ascending BER levels for fault-aware training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FatSchedule(pub Vec<f64>);

impl FatSchedule {
    pub fn levels(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.0.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(
                "FAT schedule must be strictly ascending".into(),
            ));
        }
        Ok(())
    }

    /// The conventional ladder: seven decades up to 1e-2.
    pub fn conventional() -> Self {
        FatSchedule((0..CONVENTIONAL_FAT_LEVELS).map(|k| 10f64.powi(k as i32 - 8)).collect())
    }
}

/// Efficient schedule from a profile: the two highest BERs of the
/// acceptable-accuracy region plus every BER beyond it, ascending. When the
/// acceptable region has fewer than two points, everything available is used.
pub fn derive_fat_schedule(profile: &AccuracyProfile) -> Result<FatSchedule> {
    profile.validate()?;
    if profile.entries.is_empty() {
        return Err(Error::ProfileUnusable("profile has no entries".into()));
    }
    let acceptable: Vec<f64> = profile
        .entries
        .iter()
        .filter(|e| profile.baseline_accuracy - e.mean_accuracy <= ACCEPTABLE_DROP)
        .map(|e| e.ber)
        .collect();
    let degraded: Vec<f64> = profile
        .entries
        .iter()
        .filter(|e| profile.baseline_accuracy - e.mean_accuracy > ACCEPTABLE_DROP)
        .map(|e| e.ber)
        .collect();
    let mut levels: Vec<f64> = acceptable
        .iter()
        .rev()
        .take(2)
        .copied()
        .chain(degraded.iter().copied())
        .collect();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup();
    let schedule = FatSchedule(levels);
    schedule.validate()?;
    Ok(schedule)
}

/// One row of the per-level training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FatLevelLog {
    pub level: usize,
    pub ber: f64,
    pub train_loss_proxy: f64,
    pub test_accuracy: f64,
    pub collapse: bool,
}

pub fn write_levels_csv<W: std::io::Write>(
    levels: &[FatLevelLog],
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "level,ber,train_loss_proxy,test_accuracy,collapse")?;
    for l in levels {
        writeln!(
            w,
            "{},{},{},{},{}",
            l.level, l.ber, l.train_loss_proxy, l.test_accuracy, l.collapse
        )?;
    }
    Ok(())
}

/// Result of a fault-aware training run.
#[derive(Debug, Clone)]
pub struct FatOutcome {
    pub model: SnnModel,
    pub accuracy: f64,
    pub levels: Vec<FatLevelLog>,
    /// The injection event of each level, for diagnostic export.
    pub masks: Vec<crate::dram::ErrorMask>,
}

/// Fault-aware training. Starting from the pre-trained model, each level
/// samples an error map at its BER, injects it into the carried working
/// model, retrains one epoch, evaluates, and retains the best-accuracy model
/// seen. An empty schedule returns the initial model with accuracy 0.
#[allow(clippy::too_many_arguments)]
pub fn fault_aware_train(
    model0: &SnnModel,
    baseline_accuracy: f64,
    schedule: &FatSchedule,
    stack: &DramStack,
    train_set: &Dataset,
    test_set: &Dataset,
    sim: &SimParams,
    seed: u64,
) -> Result<FatOutcome> {
    schedule.validate()?;
    stack.validate()?;
    let mut working = model0.clone();
    let mut best = model0.clone();
    let mut best_accuracy = 0.0f64;
    let mut levels = Vec::with_capacity(schedule.len());
    let mut masks = Vec::with_capacity(schedule.len());
    let shape = (model0.n_inputs, model0.n_neurons);

    for (level, &ber) in schedule.levels().iter().enumerate() {
        let level_seed = seeds::derive(seed, &[0x6661745f, level as u64]);
        let out = stack.corrupt_weights(&working.weights, shape, ber, level_seed)?;
        working.weights = out.weights;
        masks.push(out.mask);

        let proxy = working.train_epoch(train_set, sim, seeds::derive(level_seed, &[1]));
        // retraining can re-specialize neurons, so labels are re-assigned
        // before each test pass
        working.assign_labels(train_set, sim, seeds::derive(seed, &[0x6c61626c]))?;
        let accuracy = working.evaluate(test_set, sim, seeds::derive(seed, &[0x6576616c]))?;
        levels.push(FatLevelLog {
            level,
            ber,
            train_loss_proxy: proxy,
            test_accuracy: accuracy,
            collapse: accuracy < baseline_accuracy - COLLAPSE_DROP,
        });
        if accuracy > best_accuracy {
            best = working.clone();
            best_accuracy = accuracy;
        }
    }
    Ok(FatOutcome {
        model: best,
        accuracy: best_accuracy,
        levels,
        masks,
    })
}

/// Retraining-cost ratios against the conventional ladder. Per-epoch inputs
/// are this schedule's costs relative to the conventional run's per-epoch
/// costs (1.0 = identical cost per epoch).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostComparison {
    pub speedup: f64,
    pub energy_saving: f64,
}

pub fn retraining_cost(
    schedule: &FatSchedule,
    per_epoch_time_ratio: f64,
    per_epoch_energy_ratio: f64,
) -> Result<CostComparison> {
    if schedule.is_empty() {
        return Err(Error::InvalidConfig("empty FAT schedule has no cost".into()));
    }
    if per_epoch_time_ratio <= 0.0 || per_epoch_energy_ratio <= 0.0 {
        return Err(Error::InvalidConfig(
            "per-epoch cost ratios must be positive".into(),
        ));
    }
    let n = schedule.len() as f64;
    let conv = CONVENTIONAL_FAT_LEVELS as f64;
    Ok(CostComparison {
        speedup: conv / (n * per_epoch_time_ratio),
        energy_saving: 1.0 - (n * per_epoch_energy_ratio) / conv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(baseline: f64, points: &[(f64, f64)]) -> AccuracyProfile {
        AccuracyProfile {
            baseline_accuracy: baseline,
            entries: points
                .iter()
                .map(|&(ber, mean_accuracy)| ProfileEntry {
                    ber,
                    mean_accuracy,
                    stddev: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn ber_th_flat_profile_is_max_ber() {
        let p = profile(0.9, &[(1e-6, 0.9), (1e-4, 0.9), (1e-2, 0.895)]);
        assert_eq!(determine_ber_th(&p).unwrap(), 1e-2);
    }

    #[test]
    fn ber_th_drops_at_largest() {
        let p = profile(0.9, &[(1e-6, 0.9), (1e-4, 0.89), (1e-2, 0.5)]);
        assert_eq!(determine_ber_th(&p).unwrap(), 1e-4);
    }

    #[test]
    fn ber_th_paper_shape() {
        // profile shaped like the reference experiment: tolerable through
        // 1e-2, collapsing at 5e-2 and 1e-1
        let p = profile(
            0.9,
            &[
                (1e-8, 0.90),
                (1e-6, 0.90),
                (1e-4, 0.898),
                (1e-3, 0.895),
                (1e-2, 0.88),
                (5e-2, 0.60),
                (1e-1, 0.3),
            ],
        );
        assert_eq!(determine_ber_th(&p).unwrap(), 1e-2);
    }

    #[test]
    fn ber_th_all_intolerable_is_error() {
        let p = profile(0.9, &[(1e-3, 0.5), (1e-2, 0.3)]);
        assert!(determine_ber_th(&p).is_err());
    }

    #[test]
    fn schedule_paper_defaults() {
        // acceptable region up to 1e-3, degraded at 1e-2 and beyond
        let p = profile(
            0.9,
            &[
                (1e-8, 0.90),
                (1e-7, 0.90),
                (1e-6, 0.90),
                (1e-5, 0.899),
                (1e-4, 0.897),
                (1e-3, 0.894),
                (1e-2, 0.80),
            ],
        );
        let s = derive_fat_schedule(&p).unwrap();
        assert_eq!(s.levels(), &[1e-4, 1e-3, 1e-2]);
    }

    #[test]
    fn schedule_entirely_acceptable_takes_two_largest() {
        let p = profile(0.9, &[(1e-6, 0.9), (1e-4, 0.9), (1e-2, 0.9)]);
        let s = derive_fat_schedule(&p).unwrap();
        assert_eq!(s.levels(), &[1e-4, 1e-2]);
    }

    #[test]
    fn schedule_single_acceptable_point_warns_not_errors() {
        let p = profile(0.9, &[(1e-4, 0.9), (1e-2, 0.5)]);
        let s = derive_fat_schedule(&p).unwrap();
        assert_eq!(s.levels(), &[1e-4, 1e-2]);
    }

    #[test]
    fn conventional_schedule_is_seven_decades() {
        let s = FatSchedule::conventional();
        assert_eq!(s.len(), 7);
        assert_eq!(s.levels()[0], 1e-8);
        assert_eq!(*s.levels().last().unwrap(), 1e-2);
        for w in s.levels().windows(2) {
            assert!((w[1] / w[0] - 10.0).abs() < 1e-9);
        }
        s.validate().unwrap();
    }

    #[test]
    fn retraining_cost_frozen_values() {
        let efat = FatSchedule(vec![1e-4, 1e-3, 1e-2]);
        let c = retraining_cost(&efat, 1.0, 1.0).unwrap();
        assert!((c.speedup - 7.0 / 3.0).abs() < 1e-12);

        let c = retraining_cost(&efat, 0.86, 1.0).unwrap();
        assert!((c.speedup - 7.0 / (3.0 * 0.86)).abs() < 1e-12);
        assert!((c.speedup - 2.713).abs() < 0.01);

        let equal = FatSchedule::conventional();
        let c = retraining_cost(&equal, 1.0, 1.0).unwrap();
        assert_eq!(c.speedup, 1.0);
        assert!(c.energy_saving.abs() < 1e-12);

        assert!(retraining_cost(&FatSchedule(vec![]), 1.0, 1.0).is_err());
        assert!(retraining_cost(&efat, 0.0, 1.0).is_err());
    }

    #[test]
    fn descending_schedule_rejected() {
        let s = FatSchedule(vec![1e-2, 1e-3]);
        assert!(s.validate().is_err());
    }

    #[test]
    fn profile_validation() {
        let p = profile(0.9, &[(1e-2, 0.9), (1e-3, 0.9)]);
        assert!(p.validate().is_err());
        let p = profile(0.9, &[(1e-3, 1.5)]);
        assert!(p.validate().is_err());
    }

    #[test]
    fn profile_csv_roundtrip() {
        let p = profile(0.91, &[(0.0, 0.91), (1e-3, 0.9), (1e-2, 0.7)]);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let back = AccuracyProfile::read_csv(&buf[..]).unwrap();
        assert_eq!(p, back);

        // provenance comments are tolerated
        let with_comment = format!("# config_sha256=ab seed=1\n{}", String::from_utf8(buf).unwrap());
        let back = AccuracyProfile::read_csv(with_comment.as_bytes()).unwrap();
        assert_eq!(p, back);

        assert!(AccuracyProfile::read_csv(&b"ber,mean_accuracy,stddev\n0,0.9,0\n"[..]).is_err());
        assert!(AccuracyProfile::read_csv(&b"# baseline_accuracy=x\n"[..]).is_err());
    }
}
