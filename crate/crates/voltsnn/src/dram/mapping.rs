//! Physical layouts for weight bytes and access-trace generation.
//!
//! Two policies: the error-aware, row-buffer-maximizing policy that skips
//! subarrays whose BER exceeds the threshold, and the oblivious baseline that
//! fills banks sequentially.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dram::geometry::{DramAddress, DramGeometry};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappingPolicy {
    EnforceSnn,
    Baseline,
}

/// Inner fill order of the error-aware policy. `Listing` fills every column
/// of a bank before advancing banks; `Prose` round-robins banks at column
/// granularity. The two orders cannot be reconciled, so both exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappingVariant {
    Listing,
    Prose,
}

/// One stored weight byte: its column plus the byte slot within the column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayoutSlot {
    pub addr: DramAddress,
    pub byte_in_column: u32,
}

/// Where every weight byte lives.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalLayout {
    slots: Vec<LayoutSlot>,
    policy: MappingPolicy,
    /// Linear ids of the subarrays the layout draws from.
    safe_subarrays: Vec<usize>,
}

impl PhysicalLayout {
    pub fn slots(&self) -> &[LayoutSlot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn policy(&self) -> MappingPolicy {
        self.policy
    }

    pub fn safe_subarrays(&self) -> &[usize] {
        &self.safe_subarrays
    }

    /// Audit export: one row per stored byte.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "byte_index,ch,ra,cp,ba,su,ro,co")?;
        for (i, s) in self.slots.iter().enumerate() {
            let a = &s.addr;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                i, a.channel, a.rank, a.chip, a.bank, a.subarray, a.row, a.column
            )?;
        }
        Ok(())
    }
}

/// Walks columns in a fixed hierarchy order, handing out byte slots.
struct Filler {
    slots: Vec<LayoutSlot>,
    remaining: u64,
    bytes_per_column: u32,
}

impl Filler {
    fn new(data_bytes: u64, bytes_per_column: usize) -> Self {
        Self {
            slots: Vec::with_capacity(data_bytes as usize),
            remaining: data_bytes,
            bytes_per_column: bytes_per_column as u32,
        }
    }

    /// Fills one column with up to `bytes_per_column` bytes.
    fn push_column(&mut self, addr: DramAddress) -> bool {
        for slot in 0..self.bytes_per_column {
            if self.remaining == 0 {
                return false;
            }
            self.slots.push(LayoutSlot {
                addr,
                byte_in_column: slot,
            });
            self.remaining -= 1;
        }
        self.remaining > 0
    }

    fn done(&self) -> bool {
        self.remaining == 0
    }
}

/// Error-aware mapping. Emits addresses in the loop nesting
/// channel -> rank -> chip -> row -> subarray -> bank -> column, skipping
/// every subarray whose estimated BER exceeds `ber_th`.
pub fn map_enforcesnn(
    geometry: &DramGeometry,
    subarray_bers: &[f64],
    ber_th: f64,
    data_bytes: u64,
    variant: MappingVariant,
) -> Result<PhysicalLayout> {
    geometry.validate()?;
    if subarray_bers.len() != geometry.n_subarrays_total() {
        return Err(Error::InvalidConfig(format!(
            "BER table has {} entries, geometry has {} subarrays",
            subarray_bers.len(),
            geometry.n_subarrays_total()
        )));
    }

    let g = geometry;
    let is_safe = |addr: &DramAddress| subarray_bers[g.subarray_linear(addr)] <= ber_th;

    let safe_subarrays: Vec<usize> = (0..g.n_subarrays_total())
        .filter(|&s| subarray_bers[s] <= ber_th)
        .collect();
    let safe_capacity = safe_subarrays.len() as u64
        * g.n_rows_per_subarray as u64
        * g.n_columns_per_row as u64
        * g.bytes_per_column as u64;
    if data_bytes > safe_capacity {
        return Err(Error::Capacity {
            needed_bytes: data_bytes,
            available_bytes: safe_capacity,
        });
    }

    let mut filler = Filler::new(data_bytes, g.bytes_per_column);
    'fill: for ch in 0..g.n_channels {
        for ra in 0..g.n_ranks_per_channel {
            for cp in 0..g.n_chips_per_rank {
                for ro in 0..g.n_rows_per_subarray {
                    for su in 0..g.n_subarrays_per_bank {
                        match variant {
                            MappingVariant::Listing => {
                                for ba in 0..g.n_banks_per_chip {
                                    let addr = DramAddress {
                                        channel: ch,
                                        rank: ra,
                                        chip: cp,
                                        bank: ba,
                                        subarray: su,
                                        row: ro,
                                        column: 0,
                                    };
                                    if !is_safe(&addr) {
                                        continue;
                                    }
                                    for co in 0..g.n_columns_per_row {
                                        if !filler.push_column(DramAddress { column: co, ..addr })
                                        {
                                            break 'fill;
                                        }
                                    }
                                }
                            }
                            MappingVariant::Prose => {
                                // round-robin banks at column granularity
                                for co in 0..g.n_columns_per_row {
                                    for ba in 0..g.n_banks_per_chip {
                                        let addr = DramAddress {
                                            channel: ch,
                                            rank: ra,
                                            chip: cp,
                                            bank: ba,
                                            subarray: su,
                                            row: ro,
                                            column: co,
                                        };
                                        if !is_safe(&addr) {
                                            continue;
                                        }
                                        if !filler.push_column(addr) {
                                            break 'fill;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    debug_assert!(filler.done());
    Ok(PhysicalLayout {
        slots: filler.slots,
        policy: MappingPolicy::EnforceSnn,
        safe_subarrays,
    })
}

/// Oblivious baseline: fill columns then rows sequentially within bank 0,
/// then bank 1, and so on; subarrays of a bank fill in order.
pub fn map_baseline(geometry: &DramGeometry, data_bytes: u64) -> Result<PhysicalLayout> {
    geometry.validate()?;
    let g = geometry;
    if data_bytes > g.capacity_bytes() {
        return Err(Error::Capacity {
            needed_bytes: data_bytes,
            available_bytes: g.capacity_bytes(),
        });
    }

    let mut filler = Filler::new(data_bytes, g.bytes_per_column);
    'fill: for ch in 0..g.n_channels {
        for ra in 0..g.n_ranks_per_channel {
            for cp in 0..g.n_chips_per_rank {
                for ba in 0..g.n_banks_per_chip {
                    for su in 0..g.n_subarrays_per_bank {
                        for ro in 0..g.n_rows_per_subarray {
                            for co in 0..g.n_columns_per_row {
                                let addr = DramAddress {
                                    channel: ch,
                                    rank: ra,
                                    chip: cp,
                                    bank: ba,
                                    subarray: su,
                                    row: ro,
                                    column: co,
                                };
                                if !filler.push_column(addr) {
                                    break 'fill;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    debug_assert!(filler.done());
    Ok(PhysicalLayout {
        slots: filler.slots,
        policy: MappingPolicy::Baseline,
        safe_subarrays: (0..g.n_subarrays_total()).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccessOp {
    Read,
    Write,
}

impl AccessOp {
    fn tag(self) -> &'static str {
        match self {
            AccessOp::Read => "R",
            AccessOp::Write => "W",
        }
    }
}

/// Ordered DRAM accesses.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AccessTrace {
    pub events: Vec<(DramAddress, AccessOp)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TracePattern {
    /// One read per layout slot, in layout order.
    SequentialReadAll,
    /// `k` concatenated sequential passes.
    RepeatedEpochs(usize),
}

/// Emits reads over a layout. Columns holding several bytes are read once
/// per pass.
pub fn generate_trace(layout: &PhysicalLayout, pattern: TracePattern) -> AccessTrace {
    let mut pass = Vec::new();
    let mut last: Option<DramAddress> = None;
    for slot in layout.slots() {
        if last != Some(slot.addr) {
            pass.push((slot.addr, AccessOp::Read));
            last = Some(slot.addr);
        }
    }
    let events = match pattern {
        TracePattern::SequentialReadAll => pass,
        TracePattern::RepeatedEpochs(k) => {
            let mut all = Vec::with_capacity(pass.len() * k);
            for _ in 0..k {
                all.extend_from_slice(&pass);
            }
            all
        }
    };
    AccessTrace { events }
}

impl AccessTrace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,ch,ra,cp,ba,su,ro,co,op")?;
        for (i, (a, op)) in self.events.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                i,
                a.channel,
                a.rank,
                a.chip,
                a.bank,
                a.subarray,
                a.row,
                a.column,
                op.tag()
            )?;
        }
        Ok(())
    }

    /// Parses the CSV form. Comment lines (`#`) and the header are skipped.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut events = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("index") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 9 {
                return Err(Error::TraceFormat(format!(
                    "line {}: expected 9 fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let idx = |k: usize| -> Result<usize> {
                fields[k].trim().parse::<usize>().map_err(|e| {
                    Error::TraceFormat(format!("line {}: field {}: {}", lineno + 1, k, e))
                })
            };
            let addr = DramAddress {
                channel: idx(1)?,
                rank: idx(2)?,
                chip: idx(3)?,
                bank: idx(4)?,
                subarray: idx(5)?,
                row: idx(6)?,
                column: idx(7)?,
            };
            let op = match fields[8].trim() {
                "R" => AccessOp::Read,
                "W" => AccessOp::Write,
                other => {
                    return Err(Error::TraceFormat(format!(
                        "line {}: unknown op {:?}",
                        lineno + 1,
                        other
                    )))
                }
            };
            events.push((addr, op));
        }
        Ok(Self { events })
    }
}
