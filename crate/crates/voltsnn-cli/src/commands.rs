//! The experiment pipeline: train -> profile -> fat -> energy -> select ->
//! report. Each command reads the config (and the previous stages' outputs
//! under the output directory) and writes its artifacts atomically, tagged
//! with the config hash and seed.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use voltsnn::checkpoint::Checkpoint;
use voltsnn::config::{DatasetConfig, ExperimentConfig, ScheduleMode};
use voltsnn::dataset::{load_idx_dataset, synthetic_patterns, Dataset};
use voltsnn::dram::{
    compare_reports, generate_trace, map_baseline, map_enforcesnn, simulate_trace, EnergyReport,
    MappingPolicy, TracePattern,
};
use voltsnn::error::{Error, Result};
use voltsnn::fat::{
    accuracy_profile, derive_fat_schedule, determine_ber_th, fault_aware_train, write_levels_csv,
    AccuracyProfile, FatSchedule,
};
use voltsnn::seeds;
use voltsnn::selection::{reward_grid, Candidate, CandidatesFile};
use voltsnn::snn::SnnModel;
use voltsnn::stack::WeightFormat;

use crate::output::{provenance_line, write_atomic};

/// Everything a command needs: validated config, its hash, and the resolved
/// output directory.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub hash: String,
    pub out: PathBuf,
}

impl Context {
    pub fn load(config_path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self> {
        let (mut cfg, hash) = ExperimentConfig::load(config_path)?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Some(o) = out {
            cfg.output_dir = o;
        }
        let out = cfg.output_dir.clone();
        Ok(Self { cfg, hash, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn datasets(&self) -> Result<(Dataset, Dataset)> {
        match &self.cfg.dataset {
            DatasetConfig::Synthetic {
                train_samples,
                test_samples,
                rows,
                cols,
                classes,
            } => {
                let train = synthetic_patterns(
                    *train_samples,
                    *rows,
                    *cols,
                    *classes,
                    seeds::derive(self.cfg.seed, &[0x64617461, 0]),
                );
                let test = synthetic_patterns(
                    *test_samples,
                    *rows,
                    *cols,
                    *classes,
                    seeds::derive(self.cfg.seed, &[0x64617461, 1]),
                );
                Ok((train, test))
            }
            DatasetConfig::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                train_limit,
                test_limit,
            } => {
                let train = load_idx_dataset(train_images, train_labels, *train_limit)?;
                let test = load_idx_dataset(test_images, test_labels, *test_limit)?;
                Ok((train, test))
            }
        }
    }

    fn load_checkpoint(&self, name: &str) -> Result<(Checkpoint, SnnModel)> {
        let path = self.path(name);
        if !path.exists() {
            return Err(Error::MissingArtifact(format!(
                "{} (run the earlier pipeline stages first)",
                path.display()
            )));
        }
        let ck = Checkpoint::load(&path)?;
        let model = ck.clone().into_model()?;
        Ok((ck, model))
    }

    fn write_csv(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.path(name);
        let mut text = provenance_line(&self.hash, self.cfg.seed);
        text.push_str(body);
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }

    fn read_profile(&self, name: &str) -> Result<AccuracyProfile> {
        let path = self.path(name);
        if !path.exists() {
            return Err(Error::MissingArtifact(format!(
                "{} (run `voltsnn profile` first)",
                path.display()
            )));
        }
        AccuracyProfile::read_csv(BufReader::new(File::open(path)?))
    }
}

pub const CHECKPOINT_BASELINE: &str = "checkpoint_baseline.json";
pub const CHECKPOINT_FAT: &str = "checkpoint_fat.json";
pub const PROFILE_BASELINE: &str = "profile_baseline.csv";
pub const PROFILE_FAT: &str = "profile_fat.csv";
pub const FAT_LEVELS: &str = "fat_levels.csv";
pub const ENERGY_REPORTS: &str = "energy_reports.csv";
pub const ENERGY_SUMMARY: &str = "energy_summary.json";
pub const CANDIDATES: &str = "candidates.json";
pub const REWARDS: &str = "reward.csv";

/// Baseline STDP pre-training: train, label, evaluate, checkpoint.
pub fn cmd_train(ctx: &Context) -> Result<()> {
    let (train, test) = ctx.datasets()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let net = &ctx.cfg.network;
    let mut model = SnnModel::new(
        train.pixels(),
        net.n_neurons,
        net.neuron,
        seeds::derive(ctx.cfg.seed, &[0x6d6f646c]),
    );
    for epoch in 0..net.train_epochs {
        let proxy = model.train_epoch(
            &train,
            &net.sim,
            seeds::derive(ctx.cfg.seed, &[0x65706f63, epoch as u64]),
        );
        println!("epoch {epoch}: mean |dw| = {proxy:.6}");
    }
    model.assign_labels(
        &train.take(net.label_samples),
        &net.sim,
        seeds::derive(ctx.cfg.seed, &[0x6c61626c]),
    )?;
    let accuracy = model.evaluate(&test, &net.sim, seeds::derive(ctx.cfg.seed, &[0x6576616c]))?;
    println!("baseline test accuracy: {accuracy:.4}");

    let ck = Checkpoint::from_model(
        &model,
        ctx.cfg.format,
        ctx.cfg.rounding,
        ctx.cfg.seed,
        &ctx.hash,
    )?;
    let path = ctx.path(CHECKPOINT_BASELINE);
    write_atomic(&path, ck.to_json_string()?.as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Accuracy-vs-BER profile of the baseline checkpoint.
pub fn cmd_profile(ctx: &Context) -> Result<()> {
    let (_, test) = ctx.datasets()?;
    let (_, model) = ctx.load_checkpoint(CHECKPOINT_BASELINE)?;
    let profile = accuracy_profile(
        &model,
        &ctx.cfg.profile.ber_list,
        ctx.cfg.profile.trials,
        &ctx.cfg.stack(),
        &ctx.cfg.network.sim,
        &test,
        seeds::derive(ctx.cfg.seed, &[0x70726f66]),
    )?;
    let mut body = Vec::new();
    profile.write_csv(&mut body).map_err(Error::Io)?;
    let path = ctx.write_csv(PROFILE_BASELINE, std::str::from_utf8(&body).unwrap())?;
    println!("wrote {}", path.display());

    match determine_ber_th(&profile) {
        Ok(th) => println!("largest tolerable BER: {th:e}"),
        Err(e) => println!("no tolerable BER found: {e}"),
    }
    match derive_fat_schedule(&profile) {
        Ok(s) => println!("efficient retraining schedule: {:?}", s.levels()),
        Err(e) => println!("schedule derivation failed: {e}"),
    }
    Ok(())
}

fn resolve_schedule(ctx: &Context) -> Result<FatSchedule> {
    match ctx.cfg.fat.schedule_mode {
        ScheduleMode::Conventional => Ok(FatSchedule::conventional()),
        ScheduleMode::Explicit => {
            let s = FatSchedule(ctx.cfg.fat.explicit_levels.clone());
            s.validate()?;
            Ok(s)
        }
        ScheduleMode::Efficient => {
            let profile = ctx.read_profile(PROFILE_BASELINE)?;
            derive_fat_schedule(&profile)
        }
    }
}

/// Fault-aware retraining of the baseline checkpoint, plus a profile of the
/// improved model.
pub fn cmd_fat(ctx: &Context) -> Result<()> {
    let (train, test) = ctx.datasets()?;
    let (_, model) = ctx.load_checkpoint(CHECKPOINT_BASELINE)?;
    let sim = &ctx.cfg.network.sim;
    let stack = ctx.cfg.stack();
    let schedule = resolve_schedule(ctx)?;
    println!("retraining schedule: {:?}", schedule.levels());

    let baseline_accuracy =
        model.evaluate(&test, sim, seeds::derive(ctx.cfg.seed, &[0x6576616c]))?;
    let outcome = fault_aware_train(
        &model,
        baseline_accuracy,
        &schedule,
        &stack,
        &train,
        &test,
        sim,
        seeds::derive(ctx.cfg.seed, &[0x66617421]),
    )?;
    for l in &outcome.levels {
        println!(
            "level {} (BER {:e}): accuracy {:.4}{}",
            l.level,
            l.ber,
            l.test_accuracy,
            if l.collapse { " [collapse]" } else { "" }
        );
    }
    println!("kept model accuracy: {:.4}", outcome.accuracy);

    let mut body = Vec::new();
    write_levels_csv(&outcome.levels, &mut body).map_err(Error::Io)?;
    ctx.write_csv(FAT_LEVELS, std::str::from_utf8(&body).unwrap())?;

    // injected-bit diagnostics, one file per level
    for (level, mask) in outcome.masks.iter().enumerate() {
        let mut body = Vec::new();
        mask.write_csv(&mut body).map_err(Error::Io)?;
        ctx.write_csv(
            &format!("masks/level_{level}.csv"),
            std::str::from_utf8(&body).unwrap(),
        )?;
    }

    let ck = Checkpoint::from_model(
        &outcome.model,
        ctx.cfg.format,
        ctx.cfg.rounding,
        ctx.cfg.seed,
        &ctx.hash,
    )?;
    write_atomic(&ctx.path(CHECKPOINT_FAT), ck.to_json_string()?.as_bytes())?;

    let profile = accuracy_profile(
        &outcome.model,
        &ctx.cfg.profile.ber_list,
        ctx.cfg.profile.trials,
        &stack,
        sim,
        &test,
        seeds::derive(ctx.cfg.seed, &[0x70726f66, 1]),
    )?;
    let mut body = Vec::new();
    profile.write_csv(&mut body).map_err(Error::Io)?;
    ctx.write_csv(PROFILE_FAT, std::str::from_utf8(&body).unwrap())?;
    println!("wrote {}", ctx.path(CHECKPOINT_FAT).display());
    Ok(())
}

/// One simulated storage configuration of the energy grid.
struct EnergyRow {
    format: WeightFormat,
    policy: MappingPolicy,
    report: EnergyReport,
}

fn energy_grid(ctx: &Context, n_weights: u64) -> Result<Vec<EnergyRow>> {
    let g = &ctx.cfg.dram.geometry;
    let stack = ctx.cfg.stack();
    // the error-aware layout skips subarrays above threshold of the
    // deployment-time weak-cell map
    let deploy_ber = ctx.cfg.dram.ber_th.min(stack.flip_probability);
    let map = stack.weak_cells(deploy_ber, seeds::derive(ctx.cfg.seed, &[0x656e6572]))?;
    let ber_table = map.ber_table();

    let fixed = match ctx.cfg.format {
        WeightFormat::Fp32 => WeightFormat::parse("fxp8_signed_q1_6")?,
        f => f,
    };
    let mut rows = Vec::new();
    for format in [WeightFormat::Fp32, fixed] {
        let bytes = n_weights * format.bytes_per_weight();
        for policy in [MappingPolicy::Baseline, MappingPolicy::EnforceSnn] {
            let layout = match policy {
                MappingPolicy::Baseline => map_baseline(g, bytes)?,
                MappingPolicy::EnforceSnn => map_enforcesnn(
                    g,
                    &ber_table,
                    ctx.cfg.dram.ber_th,
                    bytes,
                    ctx.cfg.dram.mapping_variant,
                )?,
            };
            let trace = generate_trace(&layout, TracePattern::RepeatedEpochs(ctx.cfg.energy.epochs));
            for &v in &ctx.cfg.energy.v_supply_list {
                let voltage = ctx.cfg.dram.voltage.with_supply(v)?;
                rows.push(EnergyRow {
                    format,
                    policy,
                    report: simulate_trace(&trace, &voltage, g)?,
                });
            }
        }
    }
    Ok(rows)
}

fn policy_name(p: MappingPolicy) -> &'static str {
    match p {
        MappingPolicy::Baseline => "baseline",
        MappingPolicy::EnforceSnn => "enforcesnn",
    }
}

/// DRAM energy/latency grid over format x policy x supply voltage, plus the
/// headline comparisons against the FP32 + baseline + nominal reference.
pub fn cmd_energy(ctx: &Context) -> Result<()> {
    let (train, _) = ctx.datasets()?;
    let n_weights = (train.pixels() * ctx.cfg.network.n_neurons) as u64;
    let rows = energy_grid(ctx, n_weights)?;

    let mut body = String::from(
        "label,format,policy,v_supply,hits,misses,conflicts,energy_nj,latency_ns,throughput_bytes_per_s\n",
    );
    for r in &rows {
        body.push_str(&format!(
            "{}_{}_{}V,{},{},{},{},{},{},{},{},{}\n",
            r.format.name(),
            policy_name(r.policy),
            r.report.v_supply,
            r.format.name(),
            policy_name(r.policy),
            r.report.v_supply,
            r.report.hits,
            r.report.misses,
            r.report.conflicts,
            r.report.total_energy_nj,
            r.report.total_latency_ns,
            r.report.throughput_bytes_per_s
        ));
    }
    ctx.write_csv(ENERGY_REPORTS, &body)?;

    let nominal = ctx.cfg.dram.voltage.v_nominal;
    let find = |format: WeightFormat, policy: MappingPolicy, v: f64| -> Result<&EnergyReport> {
        rows.iter()
            .find(|r| {
                r.format == format && r.policy == policy && (r.report.v_supply - v).abs() < 1e-9
            })
            .map(|r| &r.report)
            .ok_or_else(|| {
                Error::MissingArtifact(format!(
                    "energy grid misses {} {} at {v} V (add it to energy.v_supply_list)",
                    format.name(),
                    policy_name(policy)
                ))
            })
    };
    let fixed = rows
        .iter()
        .map(|r| r.format)
        .find(|f| *f != WeightFormat::Fp32)
        .expect("grid always contains a fixed-point format");
    let reference = find(WeightFormat::Fp32, MappingPolicy::Baseline, nominal)?;

    let mut lowest = nominal;
    for &v in &ctx.cfg.energy.v_supply_list {
        if v < lowest {
            lowest = v;
        }
    }
    let quant_only = compare_reports(reference, find(fixed, MappingPolicy::Baseline, nominal)?)?;
    let combined = compare_reports(reference, find(fixed, MappingPolicy::EnforceSnn, lowest)?)?;
    let speedups: Vec<(f64, f64)> = ctx
        .cfg
        .energy
        .v_supply_list
        .iter()
        .map(|&v| -> Result<(f64, f64)> {
            let c = compare_reports(reference, find(fixed, MappingPolicy::EnforceSnn, v)?)?;
            Ok((v, c.speedup))
        })
        .collect::<Result<_>>()?;

    let summary = serde_json::json!({
        "config_sha256": ctx.hash,
        "seed": ctx.cfg.seed,
        "n_weights": n_weights,
        "reference": "fp32_baseline_nominal",
        "quantization_energy_saving": quant_only.energy_saving_fraction,
        "combined_energy_saving": combined.energy_saving_fraction,
        "combined_v_supply": lowest,
        "throughput_speedup_by_voltage": speedups
            .iter()
            .map(|(v, s)| serde_json::json!({"v_supply": v, "speedup": s}))
            .collect::<Vec<_>>(),
    });
    write_atomic(
        &ctx.path(ENERGY_SUMMARY),
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    println!(
        "quantization-only saving: {:.4}; combined saving at {:.3} V: {:.4}",
        quant_only.energy_saving_fraction, lowest, combined.energy_saving_fraction
    );
    for (v, s) in &speedups {
        println!("throughput speed-up at {v:.3} V: {s:.3}x");
    }
    println!("wrote {}", ctx.path(ENERGY_SUMMARY).display());
    Ok(())
}

/// Builds candidates from the profile artifacts plus simulated energies.
fn assemble_candidates(ctx: &Context) -> Result<CandidatesFile> {
    let (_, baseline_model) = ctx.load_checkpoint(CHECKPOINT_BASELINE)?;
    let n_weights = baseline_model.n_weights() as u64;
    let bitwidth = ctx.cfg.format.bit_width();
    let stack = ctx.cfg.stack();
    let g = &ctx.cfg.dram.geometry;

    let energy_at = |format: WeightFormat, v: f64| -> Result<f64> {
        let bytes = n_weights * format.bytes_per_weight();
        let layout = map_baseline(g, bytes)?;
        let trace = generate_trace(&layout, TracePattern::SequentialReadAll);
        let voltage = ctx.cfg.dram.voltage.with_supply(v)?;
        Ok(simulate_trace(&trace, &voltage, g)?.total_energy_nj)
    };
    let nominal = ctx.cfg.dram.voltage.v_nominal;

    let mut candidates = Vec::new();
    let mut push_from_profile = |tag: &str, profile: &AccuracyProfile| -> Result<()> {
        for e in &profile.entries {
            let v = ctx.cfg.voltage_for_ber(e.ber);
            candidates.push(Candidate {
                id: format!("{tag}_ber{:e}", e.ber),
                accuracy: e.mean_accuracy,
                n_weights,
                bitwidth,
                e_approx_nj: energy_at(stack.format, v)?,
                e_accurate_nj: energy_at(stack.format, nominal)?,
                ber: e.ber,
                v_supply: v,
            });
        }
        Ok(())
    };
    push_from_profile("baseline", &ctx.read_profile(PROFILE_BASELINE)?)?;
    if ctx.path(PROFILE_FAT).exists() {
        push_from_profile("improved", &ctx.read_profile(PROFILE_FAT)?)?;
    }

    let fp32_energy = energy_at(WeightFormat::Fp32, nominal)?;
    let reference = Candidate {
        id: "fp32_reference".into(),
        accuracy: ctx.read_profile(PROFILE_BASELINE)?.baseline_accuracy,
        n_weights,
        bitwidth: 32,
        e_approx_nj: fp32_energy,
        e_accurate_nj: fp32_energy,
        ber: 0.0,
        v_supply: nominal,
    };
    Ok(CandidatesFile {
        config_sha256: ctx.hash.clone(),
        seed: ctx.cfg.seed,
        reference,
        candidates,
    })
}

/// Reward evaluation over the (mu, eps) grid. Ingests an existing
/// candidates file when present, otherwise assembles one from the pipeline
/// artifacts and writes it alongside the reward report.
pub fn cmd_select(ctx: &Context) -> Result<()> {
    let candidates_path = ctx.path(CANDIDATES);
    let file = if candidates_path.exists() {
        let text = std::fs::read_to_string(&candidates_path)?;
        CandidatesFile::from_json_str(&text)?
    } else {
        let file = assemble_candidates(ctx)?;
        write_atomic(&candidates_path, file.to_json_string()?.as_bytes())?;
        println!("wrote {}", candidates_path.display());
        file
    };

    let report = reward_grid(
        &file.candidates,
        &file.reference,
        &ctx.cfg.selection.mu_grid,
        &ctx.cfg.selection.epsilon_grid,
    )?;
    for a in &report.anomalies {
        eprintln!("warning: {a}");
    }
    let mut body = Vec::new();
    report.write_csv(&mut body).map_err(Error::Io)?;
    let path = ctx.write_csv(REWARDS, std::str::from_utf8(&body).unwrap())?;

    for row in report.rows.iter().filter(|r| r.selected) {
        println!(
            "mu={:<4} eps={:<4} -> {} (reward {:.4})",
            row.mu, row.epsilon, row.candidate, row.reward
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// Reshapes the pipeline outputs into per-figure x/y series files.
pub fn cmd_report(ctx: &Context) -> Result<()> {
    let mut wrote_any = false;

    let baseline = ctx.path(PROFILE_BASELINE).exists();
    if baseline {
        let base = ctx.read_profile(PROFILE_BASELINE)?;
        let fat = if ctx.path(PROFILE_FAT).exists() {
            Some(ctx.read_profile(PROFILE_FAT)?)
        } else {
            None
        };
        let mut body =
            String::from("ber,baseline_mean,baseline_stddev,improved_mean,improved_stddev\n");
        for e in &base.entries {
            let improved = fat
                .as_ref()
                .and_then(|p| p.entries.iter().find(|x| x.ber == e.ber));
            body.push_str(&format!(
                "{},{},{},{},{}\n",
                e.ber,
                e.mean_accuracy,
                e.stddev,
                improved.map_or(String::new(), |x| x.mean_accuracy.to_string()),
                improved.map_or(String::new(), |x| x.stddev.to_string()),
            ));
        }
        ctx.write_csv("report/accuracy_vs_ber.csv", &body)?;
        wrote_any = true;
    }

    let summary_path = ctx.path(ENERGY_SUMMARY);
    if summary_path.exists() {
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&summary_path)?)?;
        let mut body = String::from("v_supply,speedup\n");
        if let Some(arr) = summary["throughput_speedup_by_voltage"].as_array() {
            for p in arr {
                body.push_str(&format!("{},{}\n", p["v_supply"], p["speedup"]));
            }
        }
        ctx.write_csv("report/speedup_vs_voltage.csv", &body)?;

        let mut body = String::from("comparison,energy_saving_fraction\n");
        body.push_str(&format!(
            "quantization_only,{}\ncombined_low_voltage,{}\n",
            summary["quantization_energy_saving"], summary["combined_energy_saving"]
        ));
        ctx.write_csv("report/energy_saving.csv", &body)?;
        wrote_any = true;
    }

    let rewards_path = ctx.path(REWARDS);
    if rewards_path.exists() {
        let text = std::fs::read_to_string(&rewards_path)?;
        let mut body = String::from("mu,epsilon,selected_candidate,reward\n");
        for line in text.lines() {
            if line.starts_with('#') || line.starts_with("candidate,") || line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() == 7 && fields[6] == "true" {
                body.push_str(&format!(
                    "{},{},{},{}\n",
                    fields[1], fields[2], fields[0], fields[5]
                ));
            }
        }
        ctx.write_csv("report/selection_grid.csv", &body)?;
        wrote_any = true;
    }

    if !wrote_any {
        return Err(Error::MissingArtifact(format!(
            "no pipeline outputs found under {}; run the earlier stages first",
            ctx.out.display()
        )));
    }
    println!("wrote report series under {}", ctx.path("report").display());
    Ok(())
}
