//! Multi-AUV tours over device groups: feasibility, timing, fairness and
//! cycle energy.
//!
//! Node 0 of a [`TravelTable`] is the depot below the station; node `k + 1` is
//! the hover point of group `k`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ocean::{hover_power, segment_power, SegmentCost};
use crate::scenario::{Scenario, Vec3};

/// Ordered group indices visited by each AUV.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RoutePlan {
    pub tours: Vec<Vec<usize>>,
}

impl RoutePlan {
    pub fn new(tours: Vec<Vec<usize>>) -> Self {
        Self { tours }
    }

    pub fn num_auvs(&self) -> usize {
        self.tours.len()
    }

    /// Constraint violations against `k` groups; empty when feasible.
    pub fn violations(&self, k: usize) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = vec![0usize; k];
        for (j, tour) in self.tours.iter().enumerate() {
            for &g in tour {
                if g >= k {
                    out.push(format!("coverage: AUV {j} visits unknown group {g}"));
                } else {
                    seen[g] += 1;
                }
            }
        }
        for (g, &n) in seen.iter().enumerate() {
            if n != 1 {
                out.push(format!("coverage: group {g} served {n} times"));
            }
        }
        let hops: usize = self.tours.iter().map(Vec::len).sum();
        if hops != k {
            out.push(format!("hop total: sum of S_j is {hops}, expected {k}"));
        }
        out
    }

    pub fn check(&self, k: usize) -> Result<()> {
        let v = self.violations(k);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Infeasible(v))
        }
    }

    /// Index of the AUV serving each group.
    pub fn owner(&self, k: usize) -> Vec<usize> {
        let mut own = vec![usize::MAX; k];
        for (j, tour) in self.tours.iter().enumerate() {
            for &g in tour {
                if g < k {
                    own[g] = j;
                }
            }
        }
        own
    }

    /// Hop-indexed binary assignment `y[j][k][hop]`.
    pub fn to_assignment(&self, k: usize) -> Vec<Vec<Vec<bool>>> {
        self.tours
            .iter()
            .map(|tour| {
                let mut y = vec![vec![false; k]; k];
                for (hop, &g) in tour.iter().enumerate() {
                    y[g][hop] = true;
                }
                y
            })
            .collect()
    }

    /// Writes `auv_id,hop_index,dg_id,x,y` rows, depot legs included as `dg_id = -1`.
    pub fn write_csv<W: Write>(&self, scenario: &Scenario, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["auv_id", "hop_index", "dg_id", "x", "y"]).map_err(csv_err)?;
        for (j, tour) in self.tours.iter().enumerate() {
            let depot = scenario.geometry.depot();
            let mut rows = vec![(-1i64, depot)];
            rows.extend(tour.iter().map(|&g| (g as i64, scenario.hover_point(g))));
            rows.push((-1, depot));
            for (hop, (g, p)) in rows.iter().enumerate() {
                w.write_record([j.to_string(), hop.to_string(), g.to_string(), p.x.to_string(), p.y.to_string()])
                    .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Converts a hop-indexed assignment `y[j][k][hop]` into tours, or lists every
/// violated constraint.
pub fn validate_assignment(y: &[Vec<Vec<bool>>], m: usize, k: usize) -> std::result::Result<RoutePlan, Vec<String>> {
    let mut errs = Vec::new();
    if y.len() != m {
        errs.push(format!("shape: {} AUV rows, expected {m}", y.len()));
    }
    let mut covered = vec![0usize; k];
    let mut tours = Vec::with_capacity(y.len());
    let mut total_hops = 0;
    for (j, rows) in y.iter().enumerate() {
        if rows.len() != k {
            errs.push(format!("shape: AUV {j} has {} group rows, expected {k}", rows.len()));
            tours.push(Vec::new());
            continue;
        }
        let max_hop = rows.iter().map(Vec::len).max().unwrap_or(0);
        let mut per_hop: Vec<Vec<usize>> = vec![Vec::new(); max_hop];
        for (g, hops) in rows.iter().enumerate() {
            for (h, &on) in hops.iter().enumerate() {
                if on {
                    per_hop[h].push(g);
                    covered[g] += 1;
                }
            }
        }
        let s_j = per_hop.iter().filter(|v| !v.is_empty()).count();
        total_hops += s_j;
        let mut tour = Vec::with_capacity(s_j);
        for (h, gs) in per_hop.iter().enumerate() {
            if gs.len() > 1 {
                errs.push(format!("hop consistency: AUV {j} hop {h} visits {} groups", gs.len()));
            }
            if h < s_j && gs.is_empty() {
                errs.push(format!("hop consistency: AUV {j} skips hop {h} but uses {s_j} hops"));
            }
            if h >= s_j && !gs.is_empty() {
                errs.push(format!("hop consistency: AUV {j} uses hop {h} beyond S_j = {s_j}"));
            }
            if let Some(&g) = gs.first() {
                tour.push(g);
            }
        }
        tours.push(tour);
    }
    for (g, &n) in covered.iter().enumerate() {
        if n != 1 {
            errs.push(format!("coverage: group {g} served {n} times"));
        }
    }
    if total_hops != k {
        errs.push(format!("hop total: sum of S_j is {total_hops}, expected {k}"));
    }
    if errs.is_empty() {
        Ok(RoutePlan::new(tours))
    } else {
        Err(errs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteTiming {
    pub travel_s: Vec<f64>,
    pub hover_s: Vec<f64>,
    pub cycle_s: Vec<f64>,
    pub fairness_gap_s: f64,
}

/// Precomputed leg costs between the depot and all hover points, and hover
/// power at each group, under the scenario's current field.
#[derive(Debug, Clone)]
pub struct TravelTable {
    pub nodes: Vec<Vec3>,
    legs: Vec<SegmentCost>,
    pub hover_power_w: Vec<f64>,
    n: usize,
}

impl TravelTable {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let d0 = scenario.geometry.auv_height_m;
        let mut nodes = vec![scenario.geometry.depot()];
        nodes.extend((0..scenario.num_groups()).map(|k| scenario.hover_point(k)));
        let n = nodes.len();
        let mut legs = vec![SegmentCost { power_w: 0.0, time_s: 0.0 }; n * n];
        for a in 0..n {
            for b in 0..n {
                if a != b && (nodes[a] - nodes[b]).norm() >= 1e-9 {
                    legs[a * n + b] = segment_power(&nodes[a], &nodes[b], &scenario.vortices, &scenario.constants, d0)?;
                }
            }
        }
        let hover_power_w = nodes[1..]
            .iter()
            .map(|p| hover_power(p, &scenario.vortices, &scenario.constants, d0))
            .collect();
        Ok(Self {
            nodes,
            legs,
            hover_power_w,
            n,
        })
    }

    /// Leg from node `a` to node `b` (0 = depot, `k + 1` = group `k`).
    pub fn leg(&self, a: usize, b: usize) -> SegmentCost {
        self.legs[a * self.n + b]
    }

    pub fn leg_energy(&self, a: usize, b: usize) -> f64 {
        self.leg(a, b).energy_j()
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        (self.nodes[a] - self.nodes[b]).norm()
    }

    /// Node sequence of a tour including both depot legs.
    fn legs_of(tour: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
        let inner = tour.iter().map(|&g| g + 1);
        std::iter::once(0)
            .chain(inner.clone())
            .zip(inner.chain(std::iter::once(0)))
            .filter(move |_| !tour.is_empty())
    }

    pub fn tour_travel_time(&self, tour: &[usize]) -> f64 {
        Self::legs_of(tour).map(|(a, b)| self.leg(a, b).time_s).sum()
    }

    pub fn tour_leg_energy(&self, tour: &[usize]) -> f64 {
        Self::legs_of(tour).map(|(a, b)| self.leg_energy(a, b)).sum()
    }

    pub fn tour_energy(&self, tour: &[usize], service_s: &[f64]) -> f64 {
        let hover: f64 = tour.iter().map(|&g| service_s[g] * self.hover_power_w[g]).sum();
        hover + self.tour_leg_energy(tour)
    }

    pub fn timing(&self, plan: &RoutePlan, service_s: &[f64]) -> Result<RouteTiming> {
        plan.check(service_s.len())?;
        let travel_s: Vec<f64> = plan.tours.iter().map(|t| self.tour_travel_time(t)).collect();
        let hover_s: Vec<f64> = plan.tours.iter().map(|t| t.iter().map(|&g| service_s[g]).sum()).collect();
        let cycle_s: Vec<f64> = travel_s.iter().zip(&hover_s).map(|(a, b)| a + b).collect();
        Ok(RouteTiming {
            fairness_gap_s: fairness_gap(&cycle_s),
            travel_s,
            hover_s,
            cycle_s,
        })
    }

    pub fn energy(&self, plan: &RoutePlan, service_s: &[f64]) -> Result<Vec<f64>> {
        plan.check(service_s.len())?;
        Ok(plan.tours.iter().map(|t| self.tour_energy(t, service_s)).collect())
    }
}

/// Spread between the longest and shortest cycle, idle AUVs included.
pub fn fairness_gap(cycle_s: &[f64]) -> f64 {
    let max = cycle_s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = cycle_s.iter().copied().fold(f64::INFINITY, f64::min);
    if cycle_s.is_empty() {
        0.0
    } else {
        max - min
    }
}

/// Per-AUV travel, hover and cycle times of `plan` given each group's hover time.
pub fn route_timing(plan: &RoutePlan, service_s: &[f64], scenario: &Scenario) -> Result<RouteTiming> {
    TravelTable::new(scenario)?.timing(plan, service_s)
}

/// Per-AUV cycle energy in joules: hovering plus every leg including the return.
pub fn route_energy(plan: &RoutePlan, service_s: &[f64], scenario: &Scenario) -> Result<Vec<f64>> {
    TravelTable::new(scenario)?.energy(plan, service_s)
}
