//! Reward-based model selection and training carbon accounting.
//!
//! The reward trades accuracy against normalized memory footprint and
//! normalized DRAM energy: `R = acc - (mu * m_norm + eps * E_norm)` with
//! non-negative weights `mu` and `eps`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One model variant under consideration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub accuracy: f64,
    pub n_weights: u64,
    pub bitwidth: u32,
    pub e_approx_nj: f64,
    pub e_accurate_nj: f64,
    pub ber: f64,
    pub v_supply: f64,
}

impl Candidate {
    pub fn validate(&self) -> Result<()> {
        if !(self.bitwidth == 8 || self.bitwidth == 32) {
            return Err(Error::CandidateMismatch(format!(
                "{}: bitwidth {} not in {{8, 32}}",
                self.id, self.bitwidth
            )));
        }
        if self.e_approx_nj <= 0.0 || self.e_accurate_nj <= 0.0 {
            return Err(Error::CandidateMismatch(format!(
                "{}: energies must be positive",
                self.id
            )));
        }
        if !(0.0..=1.0).contains(&self.accuracy) {
            return Err(Error::CandidateMismatch(format!(
                "{}: accuracy {} outside [0, 1]",
                self.id, self.accuracy
            )));
        }
        Ok(())
    }
}

/// Memory footprint relative to the 32-bit reference:
/// `(N * BW) / (N_ref * 32)`.
pub fn memory_norm(candidate: &Candidate, reference: &Candidate) -> Result<f64> {
    if candidate.n_weights != reference.n_weights {
        return Err(Error::CandidateMismatch(format!(
            "{} has {} weights, reference {} has {}",
            candidate.id, candidate.n_weights, reference.id, reference.n_weights
        )));
    }
    if reference.bitwidth != 32 {
        return Err(Error::CandidateMismatch(format!(
            "reference {} must be 32-bit",
            reference.id
        )));
    }
    Ok((candidate.n_weights * candidate.bitwidth as u64) as f64
        / (reference.n_weights * 32) as f64)
}

/// Approximate-DRAM energy relative to accurate-DRAM energy.
pub fn energy_norm(candidate: &Candidate) -> Result<f64> {
    if candidate.e_accurate_nj == 0.0 {
        return Err(Error::ZeroDenominator("accurate-DRAM energy"));
    }
    Ok(candidate.e_approx_nj / candidate.e_accurate_nj)
}

pub fn reward(acc: f64, m_norm: f64, e_norm: f64, mu: f64, eps: f64) -> Result<f64> {
    if mu < 0.0 {
        return Err(Error::NegativeInput {
            name: "mu",
            value: mu,
        });
    }
    if eps < 0.0 {
        return Err(Error::NegativeInput {
            name: "eps",
            value: eps,
        });
    }
    Ok(acc - (mu * m_norm + eps * e_norm))
}

/// Argmax-reward candidate; ties prefer smaller memory, then smaller energy.
pub fn select<'a>(
    candidates: &'a [Candidate],
    reference: &Candidate,
    mu: f64,
    eps: f64,
) -> Result<&'a Candidate> {
    if candidates.is_empty() {
        return Err(Error::CandidateMismatch("no candidates".into()));
    }
    let mut best: Option<(&Candidate, f64, f64, f64)> = None;
    for c in candidates {
        c.validate()?;
        let m = memory_norm(c, reference)?;
        let e = energy_norm(c)?;
        let r = reward(c.accuracy, m, e, mu, eps)?;
        let better = match best {
            None => true,
            Some((_, br, bm, be)) => {
                r > br || (r == br && (m < bm || (m == bm && e < be)))
            }
        };
        if better {
            best = Some((c, r, m, e));
        }
    }
    Ok(best.expect("nonempty").0)
}

/// One grid point of the reward report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRow {
    pub candidate: String,
    pub mu: f64,
    pub epsilon: f64,
    pub m_norm: f64,
    pub e_norm: f64,
    pub reward: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardReport {
    pub rows: Vec<RewardRow>,
    /// Notes on candidates whose approximate energy exceeds the accurate one
    /// (should not happen under the voltage model).
    pub anomalies: Vec<String>,
}

impl RewardReport {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "candidate,mu,epsilon,m_norm,e_norm,reward,selected")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.candidate, r.mu, r.epsilon, r.m_norm, r.e_norm, r.reward, r.selected
            )?;
        }
        Ok(())
    }
}

/// Evaluates the reward for every candidate at every (mu, eps) grid point and
/// marks each point's selection.
pub fn reward_grid(
    candidates: &[Candidate],
    reference: &Candidate,
    mu_grid: &[f64],
    eps_grid: &[f64],
) -> Result<RewardReport> {
    let mut report = RewardReport::default();
    for c in candidates {
        if energy_norm(c)? > 1.0 {
            report.anomalies.push(format!(
                "{}: approximate energy {} nJ exceeds accurate {} nJ",
                c.id, c.e_approx_nj, c.e_accurate_nj
            ));
        }
    }
    for &mu in mu_grid {
        for &eps in eps_grid {
            let chosen = select(candidates, reference, mu, eps)?;
            for c in candidates {
                let m = memory_norm(c, reference)?;
                let e = energy_norm(c)?;
                report.rows.push(RewardRow {
                    candidate: c.id.clone(),
                    mu,
                    epsilon: eps,
                    m_norm: m,
                    e_norm: e,
                    reward: reward(c.accuracy, m, e, mu, eps)?,
                    selected: std::ptr::eq(c, chosen),
                });
            }
        }
    }
    Ok(report)
}

/// On-disk candidate set: the pipeline's JSON hand-off into selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidatesFile {
    pub config_sha256: String,
    pub seed: u64,
    pub reference: Candidate,
    pub candidates: Vec<Candidate>,
}

impl CandidatesFile {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: CandidatesFile = serde_json::from_str(s)?;
        file.reference.validate()?;
        for c in &file.candidates {
            c.validate()?;
        }
        Ok(file)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Training-run power and carbon estimate: total power
/// `1.58 * t * (p_c + p_r + g * p_g) / 1000` (kWh for `t` in hours and
/// powers in watts) and emission `0.954` times that.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarbonEstimate {
    pub total_power_kwh: f64,
    pub co2e: f64,
}

pub fn carbon_emission(
    t_hours: f64,
    p_cpu_w: f64,
    p_ram_w: f64,
    p_gpu_w: f64,
    n_gpus: u32,
) -> Result<CarbonEstimate> {
    for (name, value) in [
        ("t_hours", t_hours),
        ("p_cpu_w", p_cpu_w),
        ("p_ram_w", p_ram_w),
        ("p_gpu_w", p_gpu_w),
    ] {
        if value < 0.0 || value.is_nan() {
            return Err(Error::NegativeInput { name, value });
        }
    }
    let total_power_kwh = 1.58 * t_hours * (p_cpu_w + p_ram_w + n_gpus as f64 * p_gpu_w) / 1000.0;
    Ok(CarbonEstimate {
        total_power_kwh,
        co2e: 0.954 * total_power_kwh,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn candidate(id: &str, acc: f64, bitwidth: u32, e_approx: f64) -> Candidate {
        Candidate {
            id: id.into(),
            accuracy: acc,
            n_weights: 78_400,
            bitwidth,
            e_approx_nj: e_approx,
            e_accurate_nj: 100.0,
            ber: 0.0,
            v_supply: 1.35,
        }
    }

    fn reference() -> Candidate {
        candidate("fp32_ref", 0.9, 32, 100.0)
    }

    #[test]
    fn memory_norm_values() {
        let r = reference();
        assert_eq!(memory_norm(&candidate("a", 0.9, 8, 100.0), &r).unwrap(), 0.25);
        assert_eq!(memory_norm(&candidate("b", 0.9, 32, 100.0), &r).unwrap(), 1.0);
        // 16-bit hypothetical
        let mut c = candidate("c", 0.9, 8, 100.0);
        c.bitwidth = 16;
        assert_eq!(memory_norm(&c, &r).unwrap(), 0.5);
        // mismatched weight count
        let mut d = candidate("d", 0.9, 8, 100.0);
        d.n_weights = 10;
        assert!(memory_norm(&d, &r).is_err());
    }

    #[test]
    fn energy_norm_values() {
        assert_eq!(energy_norm(&candidate("a", 0.9, 8, 100.0)).unwrap(), 1.0);
        let scaled = candidate("b", 0.9, 8, 57.66);
        assert!((energy_norm(&scaled).unwrap() - 0.5766).abs() < 1e-12);
        let mut zero = candidate("c", 0.9, 8, 100.0);
        zero.e_accurate_nj = 0.0;
        assert!(energy_norm(&zero).is_err());
    }

    #[test]
    fn reward_formula_frozen() {
        assert_eq!(reward(0.9, 0.25, 0.5, 0.0, 0.0).unwrap(), 0.9);
        let r = reward(0.9, 0.25, 0.5, 10.0, 10.0).unwrap();
        assert!((r - (0.9 - 7.5)).abs() < 1e-12);
        assert!(reward(0.9, 0.25, 0.5, -1.0, 0.0).is_err());
        assert!(reward(0.9, 0.25, 0.5, 0.0, -0.1).is_err());
    }

    #[test]
    fn select_zero_weights_is_accuracy_argmax() {
        let r = reference();
        let cands = vec![
            candidate("small", 0.85, 8, 60.0),
            candidate("big", 0.92, 32, 100.0),
        ];
        let sel = select(&cands, &r, 0.0, 0.0).unwrap();
        assert_eq!(sel.id, "big");
    }

    #[test]
    fn select_translation_invariant() {
        let r = reference();
        let base = vec![
            candidate("a", 0.80, 8, 60.0),
            candidate("b", 0.86, 32, 100.0),
            candidate("c", 0.84, 8, 90.0),
        ];
        let shifted: Vec<Candidate> = base
            .iter()
            .map(|c| Candidate {
                accuracy: (c.accuracy + 0.05).min(1.0),
                ..c.clone()
            })
            .collect();
        for (mu, eps) in [(0.0, 0.0), (0.3, 0.0), (0.0, 0.3), (0.2, 0.2)] {
            let a = select(&base, &r, mu, eps).unwrap();
            let b = select(&shifted, &r, mu, eps).unwrap();
            assert_eq!(a.id, b.id, "mu={mu} eps={eps}");
        }
    }

    #[test]
    fn select_monotone_toward_small_models_as_mu_grows() {
        let r = reference();
        let cands = vec![
            candidate("fp32_big", 0.92, 32, 100.0),
            candidate("fxp8_small", 0.88, 8, 60.0),
        ];
        let mut last_m = f64::INFINITY;
        for mu in [0.0, 0.02, 0.05, 0.1, 1.0, 10.0] {
            let sel = select(&cands, &r, mu, 0.0).unwrap();
            let m = memory_norm(sel, &r).unwrap();
            assert!(m <= last_m, "mu={mu}: m_norm climbed from {last_m} to {m}");
            last_m = m;
        }
    }

    #[test]
    fn select_ties_prefer_smaller_memory_then_energy() {
        let r = reference();
        let cands = vec![
            candidate("fp32", 0.9, 32, 100.0),
            candidate("fxp8_hot", 0.9, 8, 90.0),
            candidate("fxp8_cool", 0.9, 8, 60.0),
        ];
        // mu = eps = 0: all rewards equal -> smallest memory, then energy
        let sel = select(&cands, &r, 0.0, 0.0).unwrap();
        assert_eq!(sel.id, "fxp8_cool");
    }

    #[test]
    fn grid_rescaling_energies_keeps_selection() {
        let r = reference();
        let base = vec![
            candidate("a", 0.80, 8, 60.0),
            candidate("b", 0.90, 32, 95.0),
        ];
        let scaled: Vec<Candidate> = base
            .iter()
            .map(|c| Candidate {
                e_approx_nj: c.e_approx_nj * 7.5,
                e_accurate_nj: c.e_accurate_nj * 7.5,
                ..c.clone()
            })
            .collect();
        for (mu, eps) in [(0.0, 1.0), (1.0, 5.0), (10.0, 10.0)] {
            assert_eq!(
                select(&base, &r, mu, eps).unwrap().id,
                select(&scaled, &r, mu, eps).unwrap().id
            );
        }
    }

    #[test]
    fn reward_grid_marks_selection_and_anomalies() {
        let r = reference();
        let mut hot = candidate("hot", 0.9, 8, 120.0); // approx > accurate
        hot.v_supply = 1.2;
        let cands = vec![candidate("ok", 0.85, 8, 60.0), hot];
        let report = reward_grid(&cands, &r, &[0.0, 1.0], &[0.0]).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert_eq!(report.anomalies.len(), 1);
        for (mu, eps) in [(0.0, 0.0), (1.0, 0.0)] {
            let selected: Vec<_> = report
                .rows
                .iter()
                .filter(|row| row.mu == mu && row.epsilon == eps && row.selected)
                .collect();
            assert_eq!(selected.len(), 1);
        }
    }

    #[test]
    fn carbon_frozen_values() {
        let c = carbon_emission(0.0, 100.0, 50.0, 250.0, 2).unwrap();
        assert_eq!(c.total_power_kwh, 0.0);
        assert_eq!(c.co2e, 0.0);

        let c = carbon_emission(10.0, 50.0, 25.0, 250.0, 1).unwrap();
        assert!((c.total_power_kwh - 5.135).abs() < 1e-12);
        assert!((c.co2e - 4.89879).abs() < 1e-12);

        // linear in t
        let double = carbon_emission(20.0, 50.0, 25.0, 250.0, 1).unwrap();
        assert!((double.co2e - 2.0 * c.co2e).abs() < 1e-12);

        assert!(carbon_emission(-1.0, 0.0, 0.0, 0.0, 0).is_err());
    }
}
