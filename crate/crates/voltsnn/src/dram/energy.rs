//! Row-buffer state machine, energy and latency accounting over traces.

use serde::{Deserialize, Serialize};

use crate::dram::geometry::{AccessCondition, DramAddress, DramGeometry, VoltageConfig};
use crate::dram::mapping::AccessTrace;
use crate::error::{Error, Result};

/// Per-bank open-row latch. A row is identified by its (subarray, row) pair.
#[derive(Debug, Clone)]
pub struct RowBufferState {
    open: Vec<Option<(usize, usize)>>,
}

impl RowBufferState {
    pub fn new(geometry: &DramGeometry) -> Self {
        Self {
            open: vec![None; geometry.n_banks_total()],
        }
    }

    /// Classifies one access and updates the latch: open row matches -> hit;
    /// idle bank -> miss; different open row -> conflict. Miss and conflict
    /// leave the requested row open.
    pub fn classify(&mut self, geometry: &DramGeometry, addr: &DramAddress) -> AccessCondition {
        let bank = geometry.bank_linear(addr);
        let requested = (addr.subarray, addr.row);
        let condition = match self.open[bank] {
            Some(open) if open == requested => AccessCondition::Hit,
            Some(_) => AccessCondition::Conflict,
            None => AccessCondition::Miss,
        };
        self.open[bank] = Some(requested);
        condition
    }
}

/// Totals of one trace simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub hits: u64,
    pub misses: u64,
    pub conflicts: u64,
    pub total_energy_nj: f64,
    pub total_latency_ns: f64,
    pub throughput_bytes_per_s: f64,
    pub v_supply: f64,
}

impl EnergyReport {
    pub fn accesses(&self) -> u64 {
        self.hits + self.misses + self.conflicts
    }

    pub fn hit_rate(&self) -> f64 {
        if self.accesses() == 0 {
            0.0
        } else {
            self.hits as f64 / self.accesses() as f64
        }
    }
}

/// Replays a trace: per access, energy by condition and voltage; latency as
/// command time plus burst, where an access to a different bank than the
/// previous one hides its command time under the previous burst
/// (multi-bank burst), exposing `max(t_burst, command)`.
pub fn simulate_trace(
    trace: &AccessTrace,
    voltage: &VoltageConfig,
    geometry: &DramGeometry,
) -> Result<EnergyReport> {
    voltage.validate()?;
    geometry.validate()?;
    let mut state = RowBufferState::new(geometry);
    let mut report = EnergyReport {
        hits: 0,
        misses: 0,
        conflicts: 0,
        total_energy_nj: 0.0,
        total_latency_ns: 0.0,
        throughput_bytes_per_s: 0.0,
        v_supply: voltage.v_supply,
    };
    let mut prev_bank: Option<usize> = None;
    for (position, (addr, _op)) in trace.events.iter().enumerate() {
        geometry.validate_address(addr).map_err(|e| Error::Trace {
            position,
            source: Box::new(e),
        })?;
        let bank = geometry.bank_linear(addr);
        let condition = state.classify(geometry, addr);
        match condition {
            AccessCondition::Hit => report.hits += 1,
            AccessCondition::Miss => report.misses += 1,
            AccessCondition::Conflict => report.conflicts += 1,
        }
        report.total_energy_nj += voltage.access_energy_nj(condition);
        let command = voltage.command_time_ns(condition);
        let exposed = match prev_bank {
            Some(p) if p != bank => voltage.t_burst_ns.max(command),
            _ => command + voltage.t_burst_ns,
        };
        report.total_latency_ns += exposed;
        prev_bank = Some(bank);
    }
    if report.total_latency_ns > 0.0 {
        let bytes = trace.len() as f64 * geometry.bytes_per_column as f64;
        report.throughput_bytes_per_s = bytes / report.total_latency_ns * 1e9;
    }
    Ok(report)
}

/// Energy saving and speed-up of one report over a baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub energy_saving_fraction: f64,
    pub speedup: f64,
}

pub fn compare_reports(baseline: &EnergyReport, improved: &EnergyReport) -> Result<Comparison> {
    if baseline.total_energy_nj == 0.0 || improved.total_energy_nj == 0.0 {
        return Err(Error::ZeroDenominator("report energy"));
    }
    if baseline.total_latency_ns == 0.0 || improved.total_latency_ns == 0.0 {
        return Err(Error::ZeroDenominator("report latency"));
    }
    Ok(Comparison {
        energy_saving_fraction: 1.0 - improved.total_energy_nj / baseline.total_energy_nj,
        speedup: baseline.total_latency_ns / improved.total_latency_ns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dram::mapping::{generate_trace, map_baseline, AccessOp, TracePattern};

    fn geometry() -> DramGeometry {
        DramGeometry {
            n_channels: 1,
            n_ranks_per_channel: 1,
            n_chips_per_rank: 1,
            n_banks_per_chip: 2,
            n_subarrays_per_bank: 2,
            n_rows_per_subarray: 4,
            n_columns_per_row: 4,
            bytes_per_column: 1,
        }
    }

    fn addr(bank: usize, subarray: usize, row: usize, column: usize) -> DramAddress {
        DramAddress {
            channel: 0,
            rank: 0,
            chip: 0,
            bank,
            subarray,
            row,
            column,
        }
    }

    #[test]
    fn classify_cold_then_repeat() {
        let g = geometry();
        let mut s = RowBufferState::new(&g);
        assert_eq!(s.classify(&g, &addr(0, 0, 1, 0)), AccessCondition::Miss);
        assert_eq!(s.classify(&g, &addr(0, 0, 1, 3)), AccessCondition::Hit);
    }

    #[test]
    fn classify_row_change_is_conflict() {
        let g = geometry();
        let mut s = RowBufferState::new(&g);
        assert_eq!(s.classify(&g, &addr(0, 0, 1, 0)), AccessCondition::Miss);
        assert_eq!(s.classify(&g, &addr(0, 0, 2, 0)), AccessCondition::Conflict);
        // different subarray of the same bank occupies the same row buffer
        assert_eq!(s.classify(&g, &addr(0, 1, 2, 0)), AccessCondition::Conflict);
    }

    #[test]
    fn classify_banks_are_independent() {
        let g = geometry();
        let mut s = RowBufferState::new(&g);
        assert_eq!(s.classify(&g, &addr(0, 0, 1, 0)), AccessCondition::Miss);
        assert_eq!(s.classify(&g, &addr(1, 0, 2, 0)), AccessCondition::Miss);
        assert_eq!(s.classify(&g, &addr(0, 0, 1, 1)), AccessCondition::Hit);
    }

    #[test]
    fn empty_trace_zero_report() {
        let g = geometry();
        let v = VoltageConfig::default();
        let r = simulate_trace(&AccessTrace::default(), &v, &g).unwrap();
        assert_eq!(r.accesses(), 0);
        assert_eq!(r.total_energy_nj, 0.0);
        assert_eq!(r.total_latency_ns, 0.0);
        assert_eq!(r.throughput_bytes_per_s, 0.0);
    }

    #[test]
    fn four_hits_accumulate() {
        let g = geometry();
        let v = VoltageConfig::default();
        let events = vec![
            (addr(0, 0, 0, 0), AccessOp::Read),
            (addr(0, 0, 0, 1), AccessOp::Read),
            (addr(0, 0, 0, 2), AccessOp::Read),
            (addr(0, 0, 0, 3), AccessOp::Read),
            (addr(0, 0, 0, 0), AccessOp::Read),
        ];
        let r = simulate_trace(&AccessTrace { events }, &v, &g).unwrap();
        assert_eq!((r.hits, r.misses, r.conflicts), (4, 1, 0));
        assert_eq!(r.total_energy_nj, 4.0 * 4.0 + 7.0);
        // miss: 18 + 10; hits: 4 x 10
        assert_eq!(r.total_latency_ns, 28.0 + 40.0);
    }

    #[test]
    fn voltage_scales_energy_not_latency() {
        let g = geometry();
        let layout = map_baseline(&g, 32).unwrap();
        let trace = generate_trace(&layout, TracePattern::RepeatedEpochs(3));
        let hi = simulate_trace(&trace, &VoltageConfig::at_supply(1.35).unwrap(), &g).unwrap();
        let lo = simulate_trace(&trace, &VoltageConfig::at_supply(1.025).unwrap(), &g).unwrap();
        let scale = VoltageConfig::at_supply(1.025).unwrap().energy_scale();
        assert!((lo.total_energy_nj - hi.total_energy_nj * scale).abs() < 1e-9);
        assert_eq!(lo.total_latency_ns, hi.total_latency_ns);
        assert!(lo.total_energy_nj < hi.total_energy_nj);
    }

    #[test]
    fn streaming_one_row_hit_rate() {
        let g = geometry();
        let events: Vec<_> = (0..g.n_columns_per_row)
            .map(|co| (addr(0, 0, 0, co), AccessOp::Read))
            .collect();
        let r = simulate_trace(
            &AccessTrace { events },
            &VoltageConfig::default(),
            &g,
        )
        .unwrap();
        let n_co = g.n_columns_per_row as f64;
        assert_eq!(r.hit_rate(), (n_co - 1.0) / n_co);
    }

    #[test]
    fn bank_switch_overlaps_command_time() {
        let g = geometry();
        let v = VoltageConfig::default();
        // miss in bank 0, then miss in bank 1: second command time hides
        // under the first burst, exposing max(10, 18) = 18
        let events = vec![
            (addr(0, 0, 0, 0), AccessOp::Read),
            (addr(1, 0, 0, 0), AccessOp::Read),
        ];
        let r = simulate_trace(&AccessTrace { events }, &v, &g).unwrap();
        assert_eq!(r.total_latency_ns, 28.0 + 18.0);

        // same-bank conflict pays the full 18 + 18 + 10
        let events = vec![
            (addr(0, 0, 0, 0), AccessOp::Read),
            (addr(0, 0, 1, 0), AccessOp::Read),
        ];
        let r = simulate_trace(&AccessTrace { events }, &v, &g).unwrap();
        assert_eq!(r.total_latency_ns, 28.0 + 46.0);
    }

    #[test]
    fn invalid_address_reports_position() {
        let g = geometry();
        let events = vec![
            (addr(0, 0, 0, 0), AccessOp::Read),
            (addr(5, 0, 0, 0), AccessOp::Read),
        ];
        let err = simulate_trace(&AccessTrace { events }, &VoltageConfig::default(), &g)
            .unwrap_err();
        match err {
            Error::Trace { position, .. } => assert_eq!(position, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn replay_is_deterministic() {
        let g = geometry();
        let layout = map_baseline(&g, 64).unwrap();
        let trace = generate_trace(&layout, TracePattern::RepeatedEpochs(2));
        let v = VoltageConfig::default();
        let a = simulate_trace(&trace, &v, &g).unwrap();
        let b = simulate_trace(&trace, &v, &g).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn compare_identical_reports() {
        let g = geometry();
        let layout = map_baseline(&g, 32).unwrap();
        let trace = generate_trace(&layout, TracePattern::SequentialReadAll);
        let r = simulate_trace(&trace, &VoltageConfig::default(), &g).unwrap();
        let c = compare_reports(&r, &r).unwrap();
        assert_eq!(c.energy_saving_fraction, 0.0);
        assert_eq!(c.speedup, 1.0);
    }

    #[test]
    fn compare_rejects_zero() {
        let zero = EnergyReport {
            hits: 0,
            misses: 0,
            conflicts: 0,
            total_energy_nj: 0.0,
            total_latency_ns: 0.0,
            throughput_bytes_per_s: 0.0,
            v_supply: 1.35,
        };
        assert!(compare_reports(&zero, &zero).is_err());
    }
}
