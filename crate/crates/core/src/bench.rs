//! Gate-count and wall-time benchmark over a `(k, n)` grid.
//!
//! Each cell generates a seeded dataset, runs one algorithm on a fresh
//! simulation circuit and checks the decrypted mask against the plaintext
//! oracle. Reports are JSON lines (one `meta`, one `cell` per grid point and
//! algorithm, one `diagnostics`) plus a tab-separated table for plotting.

use std::io::{self, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::obool::{CostModel, GateCounts, TraceLevel};
use crate::oracle::{cwc_select, reverse_order};
use crate::pcwc::{run_sim, Algorithm};
use crate::protocol::{gen_dataset, ProtocolError};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// `(k, n)` points.
    pub grid: Vec<(usize, usize)>,
    pub algorithms: Vec<Algorithm>,
    pub seed: u64,
    /// Planted determining-subset size; `None` draws random classes.
    pub planted: Option<usize>,
    /// Per-cell gate budget; cells that exceed it are reported as skipped.
    pub gate_limit: Option<u64>,
    pub cost: CostModel,
    pub execution: Execution,
}

impl BenchConfig {
    /// The grid `k ∈ {4,8,16,32} × n ∈ {8,16,32}`, both algorithms.
    pub fn standard(seed: u64) -> Self {
        let mut grid = Vec::new();
        for k in [4, 8, 16, 32] {
            for n in [8, 16, 32] {
                grid.push((k, n));
            }
        }
        BenchConfig {
            grid,
            algorithms: vec![Algorithm::Naive, Algorithm::Improved],
            seed,
            planted: Some(2),
            gate_limit: None,
            cost: CostModel::default(),
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub record: String,
    pub version: u32,
    pub backend: String,
    pub seed: u64,
    pub timestamp: u64,
    pub execution: String,
    pub planted: Option<usize>,
    pub gate_limit: Option<u64>,
    pub cost_model: CostModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub record: String,
    pub k: usize,
    pub n: usize,
    pub n_pad: usize,
    pub algorithm: Algorithm,
    pub status: CellStatus,
    pub counts: Option<GateCounts>,
    pub total_gates: Option<u64>,
    pub weighted_cost: Option<f64>,
    pub wall_ms: Option<f64>,
    pub digest: Option<String>,
    pub matches_oracle: Option<bool>,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KDoubling {
    pub algorithm: Algorithm,
    pub n: usize,
    pub k_from: usize,
    pub k_to: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRatio {
    pub k: usize,
    pub n: usize,
    /// naive gates / improved gates.
    pub ratio: f64,
}

/// Fit of `count ≈ a · model(k, n)` over the completed cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeFit {
    pub algorithm: Algorithm,
    pub model: String,
    /// Geometric mean of the extreme count/model quotients.
    pub coefficient: f64,
    pub min_quotient: f64,
    pub max_quotient: f64,
    /// Every cell lies within `coefficient ×/÷ sqrt(spread)`.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub record: String,
    pub k_doubling: Vec<KDoubling>,
    pub naive_over_improved: Vec<PairRatio>,
    pub fits: Vec<ShapeFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub meta: Meta,
    pub cells: Vec<CellReport>,
    pub diagnostics: Diagnostics,
}

fn log2(n: usize) -> f64 {
    (n as f64).log2()
}

/// `k · n · log2³ n`.
pub fn improved_model(k: usize, n: usize) -> f64 {
    k as f64 * n as f64 * log2(n).powi(3)
}

/// `k² · n · log2³ n`.
pub fn naive_model(k: usize, n: usize) -> f64 {
    (k * k) as f64 * n as f64 * log2(n).powi(3)
}

/// Fits `a · model` to `(k, n, count)` points.
pub fn fit_shape(
    algorithm: Algorithm,
    name: &str,
    points: &[(usize, usize, u64)],
    model: fn(usize, usize) -> f64,
) -> Option<ShapeFit> {
    let q: Vec<f64> = points
        .iter()
        .map(|&(k, n, c)| c as f64 / model(k, n))
        .filter(|q| q.is_finite() && *q > 0.0)
        .collect();
    if q.is_empty() {
        return None;
    }
    let min = q.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = q.iter().cloned().fold(0.0, f64::max);
    Some(ShapeFit {
        algorithm,
        model: name.to_string(),
        coefficient: (min * max).sqrt(),
        min_quotient: min,
        max_quotient: max,
        spread: max / min,
    })
}

fn run_cell(cfg: &BenchConfig, k: usize, n: usize, algorithm: Algorithm) -> CellReport {
    let n_pad = n.next_power_of_two();
    let mut cell = CellReport {
        record: "cell".into(),
        k,
        n,
        n_pad,
        algorithm,
        status: CellStatus::Skipped,
        counts: None,
        total_gates: None,
        weighted_cost: None,
        wall_ms: None,
        digest: None,
        matches_oracle: None,
        reason: None,
    };
    let seed = cfg.seed ^ ((k as u64) << 32) ^ n as u64;
    let planted = cfg.planted.map(|s| s.min(k));
    let ds = match gen_dataset(n, k, seed, planted) {
        Ok(g) => g.dataset,
        Err(e) => {
            cell.reason = Some(e.to_string());
            return cell;
        }
    };
    match run_sim(&ds, algorithm, TraceLevel::Digest, cfg.gate_limit) {
        Ok(run) => {
            let expected = cwc_select(&ds, &reverse_order(k)).expect("valid order");
            cell.status = CellStatus::Ok;
            cell.total_gates = Some(run.counts.total());
            cell.weighted_cost = Some(cfg.cost.weigh(&run.counts));
            cell.counts = Some(run.counts);
            cell.wall_ms = Some(run.elapsed.as_secs_f64() * 1e3);
            cell.digest = run.digest;
            cell.matches_oracle = Some(run.mask == expected.subset.mask());
        }
        Err(e) if e.is_budget_exceeded() => {
            cell.reason = Some(format!("exceeds gate budget: {e}"));
        }
        Err(e) => cell.reason = Some(e.to_string()),
    }
    cell
}

fn diagnostics(cells: &[CellReport]) -> Diagnostics {
    let ok: Vec<&CellReport> = cells
        .iter()
        .filter(|c| c.status == CellStatus::Ok)
        .collect();
    let find = |alg: Algorithm, k: usize, n: usize| {
        ok.iter()
            .find(|c| c.algorithm == alg && c.k == k && c.n == n)
            .and_then(|c| c.total_gates)
    };
    let mut k_doubling = Vec::new();
    let mut naive_over_improved = Vec::new();
    for c in &ok {
        if let (Some(a), Some(b)) = (c.total_gates, find(c.algorithm, 2 * c.k, c.n)) {
            k_doubling.push(KDoubling {
                algorithm: c.algorithm,
                n: c.n,
                k_from: c.k,
                k_to: 2 * c.k,
                ratio: b as f64 / a as f64,
            });
        }
        if c.algorithm == Algorithm::Improved {
            if let (Some(imp), Some(nav)) = (c.total_gates, find(Algorithm::Naive, c.k, c.n)) {
                naive_over_improved.push(PairRatio {
                    k: c.k,
                    n: c.n,
                    ratio: nav as f64 / imp as f64,
                });
            }
        }
    }
    let points = |alg: Algorithm| -> Vec<(usize, usize, u64)> {
        ok.iter()
            .filter(|c| c.algorithm == alg)
            .filter_map(|c| c.total_gates.map(|t| (c.k, c.n_pad, t)))
            .collect()
    };
    let fits = [
        fit_shape(
            Algorithm::Improved,
            "k*n*log2(n)^3",
            &points(Algorithm::Improved),
            improved_model,
        ),
        fit_shape(
            Algorithm::Naive,
            "k^2*n*log2(n)^3",
            &points(Algorithm::Naive),
            naive_model,
        ),
    ]
    .into_iter()
    .flatten()
    .collect();
    Diagnostics {
        record: "diagnostics".into(),
        k_doubling,
        naive_over_improved,
        fits,
    }
}

/// Runs every `(k, n, algorithm)` cell; cells are independent and may run
/// in parallel, the report is assembled in grid order.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport, ProtocolError> {
    if cfg.grid.is_empty() || cfg.algorithms.is_empty() {
        return Err(ProtocolError::Usage("benchmark grid is empty".into()));
    }
    if let Some(&(k, n)) = cfg.grid.iter().find(|&&(k, n)| k == 0 || n == 0) {
        return Err(ProtocolError::Usage(format!(
            "invalid grid point k={k}, n={n}"
        )));
    }
    let jobs: Vec<(usize, usize, Algorithm)> = cfg
        .grid
        .iter()
        .flat_map(|&(k, n)| cfg.algorithms.iter().map(move |&a| (k, n, a)))
        .collect();
    let cells = cfg
        .execution
        .map(&jobs, |&(k, n, a)| run_cell(cfg, k, n, a));
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let execution = match cfg.execution {
        Execution::Parallel if Execution::parallel_available() => "parallel",
        _ => "sequential",
    };
    Ok(BenchReport {
        meta: Meta {
            record: "meta".into(),
            version: REPORT_VERSION,
            backend: "sim".into(),
            seed: cfg.seed,
            timestamp,
            execution: execution.into(),
            planted: cfg.planted,
            gate_limit: cfg.gate_limit,
            cost_model: cfg.cost,
        },
        diagnostics: diagnostics(&cells),
        cells,
    })
}

impl BenchReport {
    /// JSON lines: meta, cells, diagnostics.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        serde_json::to_writer(&mut w, &self.meta)?;
        writeln!(w)?;
        for c in &self.cells {
            serde_json::to_writer(&mut w, c)?;
            writeln!(w)?;
        }
        serde_json::to_writer(&mut w, &self.diagnostics)?;
        writeln!(w)
    }

    /// Tab-separated table with one row per `(k, n)` and one gate-count
    /// column per algorithm.
    pub fn write_table<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "k\tn\tnaive_gates\timproved_gates\tnaive_ms\timproved_ms\tnaive_over_improved"
        )?;
        let mut points: Vec<(usize, usize)> = self.cells.iter().map(|c| (c.k, c.n)).collect();
        points.dedup();
        for (k, n) in points {
            let get = |a: Algorithm| {
                self.cells
                    .iter()
                    .find(|c| c.k == k && c.n == n && c.algorithm == a)
            };
            let gates = |a| get(a).and_then(|c| c.total_gates);
            let ms = |a| get(a).and_then(|c| c.wall_ms);
            let fmt_u = |v: Option<u64>| v.map_or("-".to_string(), |v| v.to_string());
            let fmt_f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
            let ratio = match (gates(Algorithm::Naive), gates(Algorithm::Improved)) {
                (Some(a), Some(b)) => Some(a as f64 / b as f64),
                _ => None,
            };
            writeln!(
                w,
                "{k}\t{n}\t{}\t{}\t{}\t{}\t{}",
                fmt_u(gates(Algorithm::Naive)),
                fmt_u(gates(Algorithm::Improved)),
                fmt_f(ms(Algorithm::Naive)),
                fmt_f(ms(Algorithm::Improved)),
                fmt_f(ratio)
            )?;
        }
        Ok(())
    }

    pub fn cell(&self, k: usize, n: usize, algorithm: Algorithm) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.k == k && c.n == n && c.algorithm == algorithm)
    }
}
