//! Threshold-driven machine auto-scaling against a moving-average baseline.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const CAPACITY_CLASSES: [f64; 3] = [0.25, 0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityClass {
    pub capacity: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingScenario {
    pub fleet: Vec<CapacityClass>,
    pub threshold: f64,
    pub ma_depth: usize,
    pub interval_seconds: i64,
}

impl ScalingScenario {
    pub fn new(fleet: Vec<CapacityClass>, threshold: f64, ma_depth: usize, interval_seconds: i64) -> Result<Self> {
        let s = ScalingScenario {
            fleet,
            threshold,
            ma_depth,
            interval_seconds,
        };
        s.validate()?;
        Ok(s)
    }

    /// A fleet with the default threshold 0.8, depth 5 and 300 s interval.
    pub fn with_fleet(fleet: Vec<CapacityClass>) -> Result<Self> {
        Self::new(fleet, 0.8, 5, 300)
    }

    fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::invalid(format!("threshold {} outside (0, 1]", self.threshold)));
        }
        if self.ma_depth == 0 {
            return Err(Error::invalid("moving-average depth must be positive"));
        }
        if self.interval_seconds <= 0 {
            return Err(Error::invalid("interval must be positive"));
        }
        for c in &self.fleet {
            if !CAPACITY_CLASSES.contains(&c.capacity) {
                return Err(Error::invalid(format!(
                    "capacity {} is not one of 0.25, 0.5, 1.0",
                    c.capacity
                )));
            }
        }
        if self.fleet.iter().all(|c| c.count == 0) {
            return Err(Error::invalid("fleet has no machines"));
        }
        Ok(())
    }

    pub fn total_capacity(&self) -> f64 {
        self.fleet.iter().map(|c| c.capacity * c.count as f64).sum()
    }

    pub fn machine_count(&self) -> u64 {
        self.fleet.iter().map(|c| c.count).sum()
    }

    /// Google-like mix scaled to about a thousand machines.
    pub fn google() -> Self {
        Self::with_fleet(vec![
            CapacityClass { capacity: 0.25, count: 14 },
            CapacityClass { capacity: 0.5, count: 928 },
            CapacityClass { capacity: 1.0, count: 59 },
        ])
        .expect("valid preset")
    }

    /// Homogeneous fleet of full-capacity machines.
    pub fn alibaba() -> Self {
        Self::with_fleet(vec![CapacityClass { capacity: 1.0, count: 4000 }]).expect("valid preset")
    }

    pub fn preset(id: &str) -> Result<Self> {
        match id {
            "google" => Ok(Self::google()),
            "alibaba" => Ok(Self::alibaba()),
            other => Err(Error::invalid(format!("unknown scenario preset '{other}'"))),
        }
    }

    /// Parses `key = value` lines: `class = <capacity> x <count>` (repeatable),
    /// `threshold`, `ma_depth`, `interval`. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut fleet = Vec::new();
        let (mut threshold, mut ma_depth, mut interval) = (0.8, 5usize, 300i64);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |m: String| Error::Parse {
                line: i as u64 + 1,
                message: m,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key = value, got '{line}'")))?;
            let value = value.trim();
            match key.trim() {
                "class" => {
                    let (cap, count) = value
                        .split_once('x')
                        .ok_or_else(|| bad(format!("expected '<capacity> x <count>', got '{value}'")))?;
                    fleet.push(CapacityClass {
                        capacity: cap.trim().parse().map_err(|_| bad(format!("bad capacity '{cap}'")))?,
                        count: count.trim().parse().map_err(|_| bad(format!("bad count '{count}'")))?,
                    });
                }
                "threshold" => threshold = value.parse().map_err(|_| bad(format!("bad threshold '{value}'")))?,
                "ma_depth" => ma_depth = value.parse().map_err(|_| bad(format!("bad ma_depth '{value}'")))?,
                "interval" => interval = value.parse().map_err(|_| bad(format!("bad interval '{value}'")))?,
                other => return Err(bad(format!("unknown key '{other}'"))),
            }
        }
        Self::new(fleet, threshold, ma_depth, interval)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.fleet {
            writeln!(s, "class = {} x {}", c.capacity, c.count).unwrap();
        }
        writeln!(s, "threshold = {}", self.threshold).unwrap();
        writeln!(s, "ma_depth = {}", self.ma_depth).unwrap();
        writeln!(s, "interval = {}", self.interval_seconds).unwrap();
        s
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// Mean of the trailing `m` counts, rounded half-up.
pub fn baseline_count(history: &[u64], m: usize) -> Result<u64> {
    if m == 0 || history.len() < m {
        return Err(Error::invalid(format!(
            "baseline needs {m} previous counts, got {}",
            history.len()
        )));
    }
    let sum: u64 = history[history.len() - m..].iter().sum();
    let m = m as u64;
    Ok((2 * sum + m) / (2 * m))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    /// Active machines per fleet entry, same order as the scenario fleet.
    pub per_class: Vec<u64>,
    pub total: u64,
    pub active_capacity: f64,
    /// Demand could not be covered even with every machine active.
    pub saturated: bool,
}

/// Activates machines largest capacity first until
/// `active_capacity * threshold >= demand`.
pub fn predictive_count(demand: f64, threshold: f64, fleet: &[CapacityClass]) -> Result<Allocation> {
    if demand.is_nan() {
        return Err(Error::non_finite("predicted demand"));
    }
    if demand < 0.0 {
        return Err(Error::invalid(format!("negative demand {demand}")));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::invalid(format!("threshold {threshold} outside (0, 1]")));
    }
    let total: f64 = fleet.iter().map(|c| c.capacity * c.count as f64).sum();
    let demand = demand.min(total);
    let mut order: Vec<usize> = (0..fleet.len()).collect();
    order.sort_by(|&a, &b| fleet[b].capacity.total_cmp(&fleet[a].capacity).then(a.cmp(&b)));

    let mut per_class = vec![0u64; fleet.len()];
    let mut active = 0.0;
    for &i in &order {
        let c = fleet[i];
        if active * threshold >= demand {
            break;
        }
        // Smallest n with (active + n*cap) * threshold >= demand, corrected for rounding.
        let mut n = (((demand / threshold) - active) / c.capacity).ceil().max(0.0) as u64;
        n = n.min(c.count);
        while n > 0 && (active + (n - 1) as f64 * c.capacity) * threshold >= demand {
            n -= 1;
        }
        while n < c.count && (active + n as f64 * c.capacity) * threshold < demand {
            n += 1;
        }
        per_class[i] = n;
        active += n as f64 * c.capacity;
    }
    let saturated = active * threshold < demand;
    Ok(Allocation {
        total: per_class.iter().sum(),
        per_class,
        active_capacity: active,
        saturated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingStep {
    pub t: usize,
    pub m_base: u64,
    pub m_pred: u64,
    pub ratio: Option<f64>,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub steps: Vec<ScalingStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Intervals contributing a ratio.
    pub count: usize,
}

impl ScalingReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,m_base,m_pred,ratio,saturated\n");
        for st in &self.steps {
            write!(s, "{},{},{},", st.t, st.m_base, st.m_pred).unwrap();
            if let Some(r) = st.ratio {
                write!(s, "{r}").unwrap();
            }
            writeln!(s, ",{}", st.saturated).unwrap();
        }
        s
    }

    /// `None` when no interval had a nonzero baseline.
    pub fn summary(&self) -> Option<RatioSummary> {
        let rs: Vec<f64> = self.steps.iter().filter_map(|s| s.ratio).collect();
        if rs.is_empty() {
            return None;
        }
        Some(RatioSummary {
            min: rs.iter().copied().fold(f64::INFINITY, f64::min),
            max: rs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: rs.iter().sum::<f64>() / rs.len() as f64,
            count: rs.len(),
        })
    }
}

/// Utilization fraction to demand in capacity units.
pub fn utilization_to_demand(u: f64, scenario: &ScalingScenario) -> f64 {
    u.clamp(0.0, 1.0) * scenario.total_capacity()
}

/// Runs both policies over aligned utilization fractions.
pub fn simulate(actual: &[f64], predicted: &[f64], scenario: &ScalingScenario) -> Result<ScalingReport> {
    scenario.validate()?;
    if actual.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "{} actual intervals vs {} predicted",
            actual.len(),
            predicted.len()
        )));
    }
    if let Some(i) = actual.iter().chain(predicted).position(|v| !v.is_finite()) {
        return Err(Error::non_finite(format!("utilization series at position {i}")));
    }
    let m = scenario.ma_depth;
    let mut observed = Vec::with_capacity(actual.len());
    let mut steps = Vec::with_capacity(actual.len());
    for (t, (&u_act, &u_pred)) in actual.iter().zip(predicted).enumerate() {
        let obs = predictive_count(utilization_to_demand(u_act, scenario), scenario.threshold, &scenario.fleet)?.total;
        let m_base = if t < m { obs } else { baseline_count(&observed[t - m..t], m)? };
        observed.push(obs);
        let pred = predictive_count(utilization_to_demand(u_pred, scenario), scenario.threshold, &scenario.fleet)?;
        steps.push(ScalingStep {
            t,
            m_base,
            m_pred: pred.total,
            ratio: (m_base > 0).then(|| pred.total as f64 / m_base as f64),
            saturated: pred.saturated,
        });
    }
    Ok(ScalingReport { steps })
}
