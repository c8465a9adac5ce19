//! Operation cost model.
//!
//! Every executed HDC operation is counted per hypervector dimension and
//! charged against measured per-operation constants for the SOT-CAM macro and
//! an all-CMOS baseline. HyDra energy scales with the number of active banks
//! (`dim / reference_dim`); HyDra latency does not, since banks run in
//! parallel. CMOS figures are charged at reference-dimension semantics.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hv::check_dim;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Addition,
    Permutation,
    Multiplication,
    Search,
}

impl OpKind {
    pub const ALL: [OpKind; 4] = [
        OpKind::Addition,
        OpKind::Permutation,
        OpKind::Multiplication,
        OpKind::Search,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Addition => "addition",
            OpKind::Permutation => "permutation",
            OpKind::Multiplication => "multiplication",
            OpKind::Search => "search",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OpKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownOp(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpCost {
    pub hydra_latency_ns: f64,
    pub hydra_energy_pj: f64,
    pub cmos_cycles: f64,
    pub cmos_energy_pj: f64,
    /// CMOS energy including the off-memory transfer overhead.
    pub cmos_net_energy_pj: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostTable {
    pub addition: OpCost,
    pub permutation: OpCost,
    pub multiplication: OpCost,
    pub search: OpCost,
    pub mem_read_energy_nj: f64,
    pub cmos_cycle_ns: f64,
    pub reference_dim: usize,
}

impl Default for CostTable {
    /// Measured 7 nm figures for a 2048-bit hypervector.
    fn default() -> Self {
        Self {
            addition: OpCost {
                hydra_latency_ns: 0.462,
                hydra_energy_pj: 41.08,
                cmos_cycles: 385.0,
                cmos_energy_pj: 61.9,
                cmos_net_energy_pj: 883.9,
            },
            permutation: OpCost {
                hydra_latency_ns: 15.36,
                hydra_energy_pj: 0.752,
                cmos_cycles: 193.0,
                cmos_energy_pj: 4.66,
                cmos_net_energy_pj: 415.66,
            },
            multiplication: OpCost {
                hydra_latency_ns: 1.548,
                hydra_energy_pj: 569.0,
                cmos_cycles: 385.0,
                cmos_energy_pj: 3.235,
                cmos_net_energy_pj: 828.47,
            },
            search: OpCost {
                hydra_latency_ns: 0.985,
                hydra_energy_pj: 14.65,
                cmos_cycles: 1922.0,
                cmos_energy_pj: 29.65,
                cmos_net_energy_pj: 4139.7,
            },
            mem_read_energy_nj: 0.411,
            cmos_cycle_ns: 0.5,
            reference_dim: 2048,
        }
    }
}

impl CostTable {
    pub fn cost(&self, op: OpKind) -> &OpCost {
        match op {
            OpKind::Addition => &self.addition,
            OpKind::Permutation => &self.permutation,
            OpKind::Multiplication => &self.multiplication,
            OpKind::Search => &self.search,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for op in OpKind::ALL {
            let c = self.cost(op);
            let fields = [
                c.hydra_latency_ns,
                c.hydra_energy_pj,
                c.cmos_cycles,
                c.cmos_energy_pj,
                c.cmos_net_energy_pj,
            ];
            if fields.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::Param(format!(
                    "cost table entry `{op}` must be positive"
                )));
            }
        }
        if !(self.mem_read_energy_nj > 0.0 && self.cmos_cycle_ns > 0.0) {
            return Err(Error::Param("cost table scalars must be positive".into()));
        }
        check_dim(self.reference_dim)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let table: CostTable =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        table.validate()?;
        Ok(table)
    }

    /// HyDra energy of one operation at `dim`, in pJ.
    pub fn hydra_energy_pj(&self, op: OpKind, dim: usize) -> f64 {
        self.cost(op).hydra_energy_pj * (dim as f64 / self.reference_dim as f64)
    }

    pub fn cmos_latency_ns(&self, op: OpKind) -> f64 {
        self.cost(op).cmos_cycles * self.cmos_cycle_ns
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpRatio {
    pub op: OpKind,
    /// CMOS compute energy over HyDra energy.
    pub energy_ratio: f64,
    /// CMOS energy including memory transfer over HyDra energy.
    pub net_energy_ratio: f64,
}

pub fn ratios_vs_cmos(table: &CostTable) -> Vec<OpRatio> {
    OpKind::ALL
        .into_iter()
        .map(|op| {
            let c = table.cost(op);
            OpRatio {
                op,
                energy_ratio: c.cmos_energy_pj / c.hydra_energy_pj,
                net_energy_ratio: c.cmos_net_energy_pj / c.hydra_energy_pj,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct OpCounts([u64; 4]);

impl OpCounts {
    pub fn get(&self, op: OpKind) -> u64 {
        self.0[op.index()]
    }

    pub fn add(&mut self, op: OpKind, count: u64) {
        self.0[op.index()] += count;
    }

    pub fn merge(&mut self, other: &OpCounts) {
        for op in OpKind::ALL {
            self.add(op, other.get(op));
        }
    }

    pub fn scaled(&self, factor: u64) -> OpCounts {
        OpCounts(self.0.map(|c| c * factor))
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }
}

/// Operation counts keyed by hypervector dimension, plus the number of
/// queries they served.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CostLedger {
    counts: BTreeMap<usize, OpCounts>,
    queries: u64,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tally(&mut self, op: OpKind, count: u64, dim: usize) -> Result<()> {
        check_dim(dim)?;
        if count > 0 {
            self.counts.entry(dim).or_default().add(op, count);
        }
        Ok(())
    }

    pub fn tally_named(&mut self, op: &str, count: u64, dim: usize) -> Result<()> {
        self.tally(op.parse()?, count, dim)
    }

    pub fn tally_counts(&mut self, counts: &OpCounts, dim: usize) -> Result<()> {
        for op in OpKind::ALL {
            self.tally(op, counts.get(op), dim)?;
        }
        Ok(())
    }

    pub fn add_queries(&mut self, n: u64) {
        self.queries += n;
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    pub fn count(&self, op: OpKind) -> u64 {
        self.counts.values().map(|c| c.get(op)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty() && self.queries == 0
    }

    pub fn merge(&mut self, other: &CostLedger) {
        for (&dim, c) in &other.counts {
            self.counts.entry(dim).or_default().merge(c);
        }
        self.queries += other.queries;
    }

    pub fn report(&self, table: &CostTable) -> CostReport {
        let mut lines = Vec::with_capacity(4);
        for op in OpKind::ALL {
            let mut line = OpLine {
                op,
                count: 0,
                hydra_energy_pj: 0.0,
                hydra_latency_ns: 0.0,
                cmos_energy_pj: 0.0,
                cmos_net_energy_pj: 0.0,
                cmos_latency_ns: 0.0,
            };
            let cost = table.cost(op);
            for (&dim, counts) in &self.counts {
                let n = counts.get(op);
                line.count += n;
                line.hydra_energy_pj += n as f64 * table.hydra_energy_pj(op, dim);
            }
            let n = line.count as f64;
            line.hydra_latency_ns = n * cost.hydra_latency_ns;
            line.cmos_energy_pj = n * cost.cmos_energy_pj;
            line.cmos_net_energy_pj = n * cost.cmos_net_energy_pj;
            line.cmos_latency_ns = n * table.cmos_latency_ns(op);
            lines.push(line);
        }
        CostReport {
            lines,
            queries: self.queries,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpLine {
    pub op: OpKind,
    pub count: u64,
    pub hydra_energy_pj: f64,
    pub hydra_latency_ns: f64,
    pub cmos_energy_pj: f64,
    pub cmos_net_energy_pj: f64,
    pub cmos_latency_ns: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub lines: Vec<OpLine>,
    pub queries: u64,
}

impl CostReport {
    pub fn line(&self, op: OpKind) -> &OpLine {
        &self.lines[op.index()]
    }

    fn sum(&self, f: impl Fn(&OpLine) -> f64) -> f64 {
        self.lines.iter().map(f).sum()
    }

    pub fn hydra_energy_pj(&self) -> f64 {
        self.sum(|l| l.hydra_energy_pj)
    }

    pub fn hydra_latency_ns(&self) -> f64 {
        self.sum(|l| l.hydra_latency_ns)
    }

    pub fn cmos_energy_pj(&self) -> f64 {
        self.sum(|l| l.cmos_energy_pj)
    }

    pub fn cmos_net_energy_pj(&self) -> f64 {
        self.sum(|l| l.cmos_net_energy_pj)
    }

    pub fn cmos_latency_ns(&self) -> f64 {
        self.sum(|l| l.cmos_latency_ns)
    }

    pub fn energy_per_query_pj(&self) -> f64 {
        per(self.hydra_energy_pj(), self.queries)
    }

    pub fn latency_per_query_ns(&self) -> f64 {
        per(self.hydra_latency_ns(), self.queries)
    }

    /// Throughput implied by serial execution of the charged latency.
    pub fn queries_per_sec(&self) -> f64 {
        let lat = self.latency_per_query_ns();
        if lat > 0.0 {
            1e9 / lat
        } else {
            0.0
        }
    }

    /// `(key, value)` rows for CSV output.
    pub fn rows(&self) -> Vec<(String, String)> {
        let mut rows = Vec::new();
        for l in &self.lines {
            let p = l.op.name();
            rows.push((format!("{p}.count"), l.count.to_string()));
            rows.push((format!("{p}.hydra_energy_pj"), fmt_f(l.hydra_energy_pj)));
            rows.push((format!("{p}.hydra_latency_ns"), fmt_f(l.hydra_latency_ns)));
            rows.push((format!("{p}.cmos_energy_pj"), fmt_f(l.cmos_energy_pj)));
            rows.push((
                format!("{p}.cmos_net_energy_pj"),
                fmt_f(l.cmos_net_energy_pj),
            ));
            rows.push((format!("{p}.cmos_latency_ns"), fmt_f(l.cmos_latency_ns)));
        }
        rows.push((
            "total.hydra_energy_pj".into(),
            fmt_f(self.hydra_energy_pj()),
        ));
        rows.push((
            "total.hydra_latency_ns".into(),
            fmt_f(self.hydra_latency_ns()),
        ));
        rows.push(("total.cmos_energy_pj".into(), fmt_f(self.cmos_energy_pj())));
        rows.push((
            "total.cmos_net_energy_pj".into(),
            fmt_f(self.cmos_net_energy_pj()),
        ));
        rows.push((
            "total.cmos_latency_ns".into(),
            fmt_f(self.cmos_latency_ns()),
        ));
        rows.push(("queries".into(), self.queries.to_string()));
        rows.push((
            "per_query.hydra_energy_pj".into(),
            fmt_f(self.energy_per_query_pj()),
        ));
        rows.push((
            "per_query.hydra_latency_ns".into(),
            fmt_f(self.latency_per_query_ns()),
        ));
        rows.push(("queries_per_sec".into(), fmt_f(self.queries_per_sec())));
        rows
    }
}

fn per(total: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

pub(crate) fn fmt_f(v: f64) -> String {
    format!("{v:.6}")
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<15} {:>10} {:>16} {:>16} {:>16} {:>16}",
            "op", "count", "hydra pJ", "hydra ns", "cmos pJ", "cmos net pJ"
        )?;
        for l in &self.lines {
            writeln!(
                f,
                "{:<15} {:>10} {:>16.3} {:>16.3} {:>16.3} {:>16.3}",
                l.op.name(),
                l.count,
                l.hydra_energy_pj,
                l.hydra_latency_ns,
                l.cmos_energy_pj,
                l.cmos_net_energy_pj
            )?;
        }
        writeln!(
            f,
            "{:<15} {:>10} {:>16.3} {:>16.3} {:>16.3} {:>16.3}",
            "total",
            "",
            self.hydra_energy_pj(),
            self.hydra_latency_ns(),
            self.cmos_energy_pj(),
            self.cmos_net_energy_pj()
        )?;
        if self.queries > 0 {
            writeln!(
                f,
                "{} queries: {:.3} pJ/query, {:.3} ns/query, {:.0} queries/s",
                self.queries,
                self.energy_per_query_pj(),
                self.latency_per_query_ns(),
                self.queries_per_sec()
            )?;
        }
        Ok(())
    }
}
