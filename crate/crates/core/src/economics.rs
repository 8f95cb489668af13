//! Decisions, profit and feasibility.
//!
//! Revenue comes from the latency and device energy that offloading saves;
//! costs are station compute energy, AUV relay energy, AUV propulsion/hover
//! energy and a soft penalty on uneven cycle times.

use serde::{Deserialize, Serialize};

use crate::acoustics::{link_geometry_device_auv, noise_psd, snr_lb_auv_station, snr_lb_device_auv};
use crate::error::{Error, Result};
use crate::routing::{RoutePlan, TravelTable};
use crate::scenario::Scenario;
use crate::service::{cache_capacity_check, dg_service_time, local_task_outcome, offload_outcome, LinkQuality, TaskOutcome};

/// One joint decision, indexed `[group][device]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSet {
    pub offload: Vec<Vec<bool>>,
    pub cache: Vec<Vec<bool>>,
    pub bandwidth: Vec<Vec<f64>>,
    pub compute: Vec<Vec<f64>>,
    pub plan: RoutePlan,
}

impl DecisionSet {
    /// Every task runs on its own device.
    pub fn all_local(scenario: &Scenario, plan: RoutePlan) -> Self {
        let shape = |v| scenario.groups.iter().map(|g| vec![v; g.devices.len()]).collect::<Vec<_>>();
        let zeros = scenario.groups.iter().map(|g| vec![0.0; g.devices.len()]).collect::<Vec<_>>();
        Self {
            offload: shape(false),
            cache: shape(false),
            bandwidth: zeros.clone(),
            compute: zeros,
            plan,
        }
    }

    pub fn group(&self, k: usize) -> GroupDecision {
        GroupDecision {
            offload: self.offload[k].clone(),
            cache: self.cache[k].clone(),
            bandwidth: self.bandwidth[k].clone(),
            compute: self.compute[k].clone(),
        }
    }

    pub fn set_group(&mut self, k: usize, g: GroupDecision) {
        self.offload[k] = g.offload;
        self.cache[k] = g.cache;
        self.bandwidth[k] = g.bandwidth;
        self.compute[k] = g.compute;
    }

    /// Replaces both fraction vectors with an even split among the devices that need them.
    pub fn with_equal_allocation(mut self) -> Self {
        for k in 0..self.offload.len() {
            let mut g = self.group(k);
            g.equalize();
            self.set_group(k, g);
        }
        self
    }
}

/// Decisions for the devices of a single group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupDecision {
    pub offload: Vec<bool>,
    pub cache: Vec<bool>,
    pub bandwidth: Vec<f64>,
    pub compute: Vec<f64>,
}

impl GroupDecision {
    pub fn local(n: usize) -> Self {
        Self {
            offload: vec![false; n],
            cache: vec![false; n],
            bandwidth: vec![0.0; n],
            compute: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.offload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offload.is_empty()
    }

    /// Even bandwidth among offloaded uncached devices, even compute among offloaded devices.
    pub fn equalize(&mut self) {
        let n_tx = (0..self.len()).filter(|&i| self.offload[i] && !self.cache[i]).count();
        let n_off = self.offload.iter().filter(|&&o| o).count();
        for i in 0..self.len() {
            self.bandwidth[i] = if self.offload[i] && !self.cache[i] { 1.0 / n_tx as f64 } else { 0.0 };
            self.compute[i] = if self.offload[i] { 1.0 / n_off as f64 } else { 0.0 };
        }
    }
}

/// Whether hard-constraint violations abort evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Strict,
    Penalty,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct GroupBreakdown {
    pub revenue: f64,
    pub task_cost: f64,
    pub service_time_s: f64,
    pub hover_energy_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfitBreakdown {
    pub revenue: f64,
    pub task_cost: f64,
    pub movement_cost: f64,
    pub fairness_penalty: f64,
    pub profit: f64,
    pub fairness_gap_s: f64,
    pub per_group: Vec<GroupBreakdown>,
    pub auv_energy_j: Vec<f64>,
    pub auv_cycle_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Soft checks are reported but do not make a decision infeasible.
    pub hard: bool,
    pub offenders: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub checks: Vec<Check>,
}

impl FeasibilityReport {
    /// True when every hard constraint holds.
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.hard)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn hard_failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| c.hard && !c.passed)
            .map(|c| format!("{} [{}]", c.name, c.offenders.join(", ")))
            .collect()
    }
}

const SUM_TOL: f64 = 1e-12;

/// Scenario plus everything about it that does not depend on the decisions:
/// link SNRs at each hover point, local execution costs and the leg table.
#[derive(Debug, Clone)]
pub struct SystemModel {
    pub scenario: Scenario,
    pub links: Vec<Vec<LinkQuality>>,
    pub local: Vec<Vec<TaskOutcome>>,
    pub travel: TravelTable,
}

impl SystemModel {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let c = &scenario.constants;
        let g = &scenario.geometry;
        let noise = noise_psd(c.freq_khz, c.shipping, c.wind_mps)?;
        let mut links = Vec::with_capacity(scenario.num_groups());
        for (k, grp) in scenario.groups.iter().enumerate() {
            let hover = scenario.hover_point(k);
            let gamma_station = snr_lb_auv_station(&hover, g, &noise, c)?;
            let row = grp
                .devices
                .iter()
                .map(|d| {
                    let link = link_geometry_device_auv(&d.pos, &hover, g)?;
                    Ok(LinkQuality {
                        gamma_device: snr_lb_device_auv(&link, &noise, c)?,
                        gamma_station,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            links.push(row);
        }
        let local = scenario
            .groups
            .iter()
            .map(|grp| grp.devices.iter().map(|d| local_task_outcome(d, c)).collect())
            .collect();
        Ok(Self {
            scenario: scenario.clone(),
            links,
            local,
            travel: TravelTable::new(scenario)?,
        })
    }

    pub fn num_groups(&self) -> usize {
        self.scenario.num_groups()
    }

    pub fn group_size(&self, k: usize) -> usize {
        self.scenario.groups[k].devices.len()
    }

    fn link_alive(&self, k: usize, i: usize) -> bool {
        let l = &self.links[k][i];
        l.gamma_device > 0.0 && l.gamma_station > 0.0
    }

    /// Outcome of every task of group `k` under `g`.
    pub fn group_outcomes(&self, k: usize, g: &GroupDecision) -> Result<Vec<TaskOutcome>> {
        let s = &self.scenario;
        s.groups[k]
            .devices
            .iter()
            .enumerate()
            .map(|(i, d)| {
                if g.offload[i] {
                    offload_outcome(d, g.bandwidth[i], g.compute[i], g.cache[i], &self.links[k][i], &s.constants, &s.geometry)
                } else {
                    Ok(self.local[k][i])
                }
            })
            .collect()
    }

    /// Revenue, task cost and hover time of group `k` (hover energy excluded).
    pub fn group_value(&self, k: usize, g: &GroupDecision) -> Result<GroupBreakdown> {
        let outcomes = self.group_outcomes(k, g)?;
        let s = &self.scenario;
        let (rho, chi) = (s.economics.cost_station, s.economics.cost_auv);
        let mut revenue = 0.0;
        let mut task_cost = 0.0;
        for (d, o) in s.groups[k].devices.iter().zip(&outcomes) {
            if o.offloaded {
                let time_saved = o.local_time - o.total_time;
                let energy_saved = o.local_energy - o.device_energy;
                revenue += d.time_value * time_saved + d.energy_value * energy_saved;
                task_cost += rho * o.station_energy + chi * o.auv_tx_energy;
            }
        }
        let service_time_s = dg_service_time(&outcomes)?;
        Ok(GroupBreakdown {
            revenue,
            task_cost,
            service_time_s,
            hover_energy_j: service_time_s * self.travel.hover_power_w[k],
        })
    }

    /// Full profit breakdown. Strict mode first requires every hard constraint to hold.
    pub fn evaluate(&self, d: &DecisionSet, mode: EvalMode) -> Result<ProfitBreakdown> {
        if mode == EvalMode::Strict {
            let report = self.audit(d);
            if !report.passes() {
                return Err(Error::Infeasible(report.hard_failures()));
            }
        } else {
            self.check_shape(d)?;
            d.plan.check(self.num_groups())?;
        }
        let s = &self.scenario;
        let per_group = (0..self.num_groups())
            .map(|k| self.group_value(k, &d.group(k)))
            .collect::<Result<Vec<_>>>()?;
        let service: Vec<f64> = per_group.iter().map(|g| g.service_time_s).collect();
        let auv_energy_j = self.travel.energy(&d.plan, &service)?;
        let timing = self.travel.timing(&d.plan, &service)?;
        let revenue: f64 = per_group.iter().map(|g| g.revenue).sum();
        let task_cost: f64 = per_group.iter().map(|g| g.task_cost).sum();
        let movement_cost = s.economics.cost_auv * auv_energy_j.iter().sum::<f64>();
        let fairness_penalty = self.fairness_penalty(timing.fairness_gap_s);
        Ok(ProfitBreakdown {
            revenue,
            task_cost,
            movement_cost,
            fairness_penalty,
            profit: revenue - task_cost - movement_cost - fairness_penalty,
            fairness_gap_s: timing.fairness_gap_s,
            per_group,
            auv_energy_j,
            auv_cycle_s: timing.cycle_s,
        })
    }

    pub fn fairness_penalty(&self, gap_s: f64) -> f64 {
        let e = &self.scenario.economics;
        e.fairness_penalty * (gap_s - self.scenario.constants.fairness_eps_s).max(0.0)
    }

    fn check_shape(&self, d: &DecisionSet) -> Result<()> {
        let k = self.num_groups();
        let ok = [&d.offload.len(), &d.cache.len(), &d.bandwidth.len(), &d.compute.len()]
            .iter()
            .all(|&&n| n == k)
            && (0..k).all(|g| {
                let n = self.group_size(g);
                d.offload[g].len() == n && d.cache[g].len() == n && d.bandwidth[g].len() == n && d.compute[g].len() == n
            });
        if ok {
            Ok(())
        } else {
            Err(Error::Shape("decision vectors do not match the scenario's groups".into()))
        }
    }

    /// Per-constraint pass/fail with offending `(group, device)` indices.
    pub fn audit(&self, d: &DecisionSet) -> FeasibilityReport {
        let mut checks = Vec::new();
        if let Err(e) = self.check_shape(d) {
            checks.push(Check {
                name: "shape",
                passed: false,
                hard: true,
                offenders: vec![e.to_string()],
            });
            return FeasibilityReport { checks };
        }
        let k = self.num_groups();
        let mut per_device = |name: &'static str, bad: &dyn Fn(usize, usize) -> bool| {
            let offenders: Vec<String> = (0..k)
                .flat_map(|g| (0..self.group_size(g)).map(move |i| (g, i)))
                .filter(|&(g, i)| bad(g, i))
                .map(|(g, i)| format!("({g},{i})"))
                .collect();
            checks.push(Check {
                name,
                passed: offenders.is_empty(),
                hard: true,
                offenders,
            });
        };
        let frac_ok = |x: f64| x.is_finite() && (0.0..=1.0).contains(&x);
        per_device("fractions in [0,1]", &|g, i| !frac_ok(d.bandwidth[g][i]) || !frac_ok(d.compute[g][i]));
        per_device("bandwidth only when offloaded", &|g, i| !d.offload[g][i] && d.bandwidth[g][i] > 0.0);
        per_device("no bandwidth when cached", &|g, i| d.cache[g][i] && d.bandwidth[g][i] > 0.0);
        per_device("compute only when offloaded", &|g, i| !d.offload[g][i] && d.compute[g][i] > 0.0);
        per_device("cache only when offloaded", &|g, i| d.cache[g][i] && !d.offload[g][i]);
        per_device("offloaded tasks have resources", &|g, i| {
            d.offload[g][i] && (!(d.compute[g][i] > 0.0) || (!d.cache[g][i] && !(d.bandwidth[g][i] > 0.0)))
        });
        per_device("uncached offloads have a live link", &|g, i| {
            d.offload[g][i] && !d.cache[g][i] && !self.link_alive(g, i)
        });
        let per_group = |name: &'static str, v: &Vec<Vec<f64>>| {
            let offenders: Vec<String> = (0..k)
                .filter(|&g| v[g].iter().sum::<f64>() > 1.0 + SUM_TOL)
                .map(|g| format!("group {g}"))
                .collect();
            Check {
                name,
                passed: offenders.is_empty(),
                hard: true,
                offenders,
            }
        };
        checks.push(per_group("bandwidth sum <= 1", &d.bandwidth));
        checks.push(per_group("compute sum <= 1", &d.compute));
        let tasks = self.scenario.groups.iter().flat_map(|g| g.devices.iter().map(|dv| &dv.task));
        let flags = d.cache.iter().flat_map(|v| v.iter().copied());
        let verdict = cache_capacity_check(flags.zip(tasks), self.scenario.constants.storage_capacity_bits);
        checks.push(Check {
            name: "cache capacity",
            passed: verdict.is_ok(),
            hard: true,
            offenders: if verdict.is_ok() { vec![] } else { vec![format!("{verdict:?}")] },
        });
        let route = d.plan.violations(k);
        let route_ok = route.is_empty() && d.plan.num_auvs() == self.scenario.num_auvs;
        let mut route_off = route;
        if d.plan.num_auvs() != self.scenario.num_auvs {
            route_off.push(format!("plan has {} AUVs, scenario has {}", d.plan.num_auvs(), self.scenario.num_auvs));
        }
        checks.push(Check {
            name: "route",
            passed: route_ok,
            hard: true,
            offenders: route_off,
        });
        if route_ok && checks.iter().all(|c| c.passed) {
            let fair = (0..k)
                .map(|g| self.group_value(g, &d.group(g)).map(|v| v.service_time_s))
                .collect::<Result<Vec<_>>>()
                .and_then(|service| self.travel.timing(&d.plan, &service));
            if let Ok(t) = fair {
                let eps = self.scenario.constants.fairness_eps_s;
                checks.push(Check {
                    name: "fairness gap",
                    passed: t.fairness_gap_s <= eps,
                    hard: false,
                    offenders: if t.fairness_gap_s <= eps {
                        vec![]
                    } else {
                        vec![format!("gap {:.3} s > {eps} s", t.fairness_gap_s)]
                    },
                });
            }
        }
        FeasibilityReport { checks }
    }

    /// Repairs a group's raw decision so it satisfies every per-group
    /// constraint, caching at most `capacity_bits` of input.
    pub fn project_group(&self, k: usize, raw: &GroupDecision, capacity_bits: f64) -> GroupDecision {
        let n = self.group_size(k);
        let devices = &self.scenario.groups[k].devices;
        let clean = |x: f64| if x.is_finite() { x.clamp(0.0, 1.0) } else { 0.0 };
        let mut g = GroupDecision {
            offload: raw.offload.clone(),
            cache: (0..n).map(|i| raw.cache[i] && raw.offload[i]).collect(),
            bandwidth: raw.bandwidth.iter().map(|&x| clean(x)).collect(),
            compute: raw.compute.iter().map(|&x| clean(x)).collect(),
        };
        let used: f64 = (0..n).filter(|&i| g.cache[i]).map(|i| devices[i].task.data_bits).sum();
        if used > capacity_bits {
            let mut order: Vec<usize> = (0..n).filter(|&i| g.cache[i]).collect();
            order.sort_by(|&a, &b| eviction_order(devices[a].time_value, devices[a].task.data_bits, a, devices[b].time_value, devices[b].task.data_bits, b));
            let mut used = used;
            for i in order {
                if used <= capacity_bits {
                    break;
                }
                g.cache[i] = false;
                used -= devices[i].task.data_bits;
            }
        }
        self.mask_and_normalize(k, &mut g);
        g
    }

    fn mask_and_normalize(&self, k: usize, g: &mut GroupDecision) {
        for i in 0..g.len() {
            if !g.offload[i] || g.cache[i] {
                g.bandwidth[i] = 0.0;
            }
            if !g.offload[i] {
                g.compute[i] = 0.0;
            }
            let starved = g.compute[i] <= 0.0 || (!g.cache[i] && (g.bandwidth[i] <= 0.0 || !self.link_alive(k, i)));
            if g.offload[i] && starved {
                g.offload[i] = false;
                g.cache[i] = false;
                g.bandwidth[i] = 0.0;
                g.compute[i] = 0.0;
            }
        }
        for v in [&mut g.bandwidth, &mut g.compute] {
            let sum: f64 = v.iter().sum();
            if sum > 1.0 + SUM_TOL {
                v.iter_mut().for_each(|x| *x /= sum);
            }
        }
    }

    /// Nearest feasible decision: masks, capacity eviction, renormalization.
    /// The route plan is passed through unchanged.
    pub fn project_to_feasible(&self, raw: &DecisionSet) -> DecisionSet {
        let k = self.num_groups();
        let mut groups: Vec<GroupDecision> = (0..k)
            .map(|g| {
                let mut gd = raw.group(g);
                for i in 0..gd.len() {
                    gd.cache[i] &= gd.offload[i];
                    let clean = |x: f64| if x.is_finite() { x.clamp(0.0, 1.0) } else { 0.0 };
                    gd.bandwidth[i] = clean(gd.bandwidth[i]);
                    gd.compute[i] = clean(gd.compute[i]);
                }
                gd
            })
            .collect();
        let cap = self.scenario.constants.storage_capacity_bits;
        let mut cached: Vec<(usize, usize)> = (0..k)
            .flat_map(|g| (0..groups[g].len()).map(move |i| (g, i)))
            .filter(|&(g, i)| groups[g].cache[i])
            .collect();
        let bits = |(g, i): (usize, usize)| self.scenario.groups[g].devices[i].task.data_bits;
        let mut used: f64 = cached.iter().map(|&c| bits(c)).sum();
        if used > cap {
            let dev = |(g, i): (usize, usize)| &self.scenario.groups[g].devices[i];
            cached.sort_by(|&a, &b| {
                let flat = |(g, i): (usize, usize)| groups[..g].iter().map(|x| x.len()).sum::<usize>() + i;
                eviction_order(dev(a).time_value, bits(a), flat(a), dev(b).time_value, bits(b), flat(b))
            });
            for c in cached {
                if used <= cap {
                    break;
                }
                groups[c.0].cache[c.1] = false;
                used -= bits(c);
            }
        }
        let mut out = raw.clone();
        for (g, mut gd) in groups.into_iter().enumerate() {
            self.mask_and_normalize(g, &mut gd);
            out.set_group(g, gd);
        }
        out
    }
}

/// Cached items are evicted lowest time value first, then largest input, then lowest index.
fn eviction_order(wa: f64, za: f64, ia: usize, wb: f64, zb: f64, ib: usize) -> std::cmp::Ordering {
    wa.total_cmp(&wb).then(zb.total_cmp(&za)).then(ia.cmp(&ib))
}
