//! Latency and energy of serving a single task locally or at the station.

use std::f64::consts::PI;

use crate::acoustics::{rate_auv_to_station, rate_device_to_auv};
use crate::error::{Error, Result};
use crate::scenario::{Constants, Device, Geometry, Task};

/// Accounting for one task under one decision.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TaskOutcome {
    pub total_time: f64,
    /// Local execution time, kept for the savings terms even when offloaded.
    pub local_time: f64,
    pub local_energy: f64,
    pub tx_time_da: f64,
    pub tx_time_as: f64,
    pub station_time: f64,
    /// Energy the device spends: local compute, or uplink transmission when offloaded.
    pub device_energy: f64,
    pub station_energy: f64,
    pub auv_tx_energy: f64,
    pub offloaded: bool,
    pub cached: bool,
}

/// Time and energy to run `task` on the device CPU.
pub fn local_outcome(task: &Task, device: &Device, consts: &Constants) -> (f64, f64) {
    let t = task.cycles() / device.cpu_hz;
    (t, consts.cpu_energy_coeff * device.cpu_hz.powf(consts.cpu_exponent) * t)
}

/// Outcome of a device that keeps its task.
pub fn local_task_outcome(device: &Device, consts: &Constants) -> TaskOutcome {
    let (t, e) = local_outcome(&device.task, device, consts);
    TaskOutcome {
        total_time: t,
        local_time: t,
        local_energy: e,
        device_energy: e,
        ..TaskOutcome::default()
    }
}

/// SNR lower bounds of the two hops used by a device's offloaded task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkQuality {
    pub gamma_device: f64,
    pub gamma_station: f64,
}

/// Transmit energy for sending `bits` in `time` over `band_hz`, inverting the
/// Shannon-form rate law. Equals `tx_power * time` when `time` is the airtime
/// at that rate.
fn tx_energy(bits: f64, time: f64, band_hz: f64, depth: f64, gamma: f64, consts: &Constants) -> f64 {
    let prefactor = 2.0 * PI * depth * consts.ref_intensity_w_m2 * band_hz / (consts.circuit_efficiency * gamma);
    prefactor * (2f64.powf(bits / (band_hz * time)) - 1.0) * time
}

/// Outcome of a task relayed by the serving AUV and computed at the station.
///
/// A cached task skips both transmission hops. `f_frac` is the share of the
/// station pool `F`, `r_frac` the share of the device → AUV band.
pub fn offload_outcome(
    device: &Device,
    r_frac: f64,
    f_frac: f64,
    cached: bool,
    link: &LinkQuality,
    consts: &Constants,
    geometry: &Geometry,
) -> Result<TaskOutcome> {
    let task = &device.task;
    let (local_time, local_energy) = local_outcome(task, device, consts);
    if !(f_frac > 0.0) {
        return Err(Error::Allocation("offloaded task needs a positive compute share".into()));
    }
    let (mut t_da, mut t_as, mut e_da, mut e_as) = (0.0, 0.0, 0.0, 0.0);
    if !cached {
        if !(r_frac > 0.0) {
            return Err(Error::Allocation("uncached offloaded task needs a positive bandwidth share".into()));
        }
        let r_da = rate_device_to_auv(r_frac, link.gamma_device, consts, geometry.device_depth_m);
        let r_as = rate_auv_to_station(link.gamma_station, consts, geometry.auv_depth_m);
        if r_da <= 0.0 || r_as <= 0.0 {
            return Err(Error::ZeroRate);
        }
        let z = task.data_bits;
        t_da = z / r_da;
        t_as = z / r_as;
        let band = r_frac * consts.bandwidth_low_hz;
        e_da = tx_energy(z, t_da, band, geometry.device_depth_m, link.gamma_device, consts);
        e_as = tx_energy(z, t_as, consts.bandwidth_high_hz, geometry.auv_depth_m, link.gamma_station, consts);
    }
    let station_hz = f_frac * consts.station_cycles_hz;
    let t_m = task.cycles() / station_hz;
    let e_m = consts.cpu_energy_coeff * station_hz.powf(consts.cpu_exponent) * t_m;
    Ok(TaskOutcome {
        total_time: t_m + t_da + t_as,
        local_time,
        local_energy,
        tx_time_da: t_da,
        tx_time_as: t_as,
        station_time: t_m,
        device_energy: e_da,
        station_energy: e_m,
        auv_tx_energy: e_as,
        offloaded: true,
        cached,
    })
}

/// Hover time at a group: the slowest of its tasks.
pub fn dg_service_time(outcomes: &[TaskOutcome]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::Domain("service time of an empty group".into()));
    }
    Ok(outcomes.iter().map(|o| o.total_time).fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CacheVerdict {
    Ok { slack_bits: f64 },
    Violation { over_bits: f64 },
}

impl CacheVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, CacheVerdict::Ok { .. })
    }
}

/// Compares the cached input volume with the station storage `capacity_bits`.
pub fn cache_capacity_check<'a>(items: impl IntoIterator<Item = (bool, &'a Task)>, capacity_bits: f64) -> CacheVerdict {
    let used: f64 = items.into_iter().filter(|(h, _)| *h).map(|(_, t)| t.data_bits).sum();
    if used <= capacity_bits {
        CacheVerdict::Ok {
            slack_bits: capacity_bits - used,
        }
    } else {
        CacheVerdict::Violation {
            over_bits: used - capacity_bits,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Vec3;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn device(z: f64, alpha: f64, f: f64) -> Device {
        Device {
            pos: Vec3::new(0.0, 0.0, 10.0),
            cpu_hz: f,
            time_value: 15.0,
            energy_value: 1.5,
            task: Task {
                data_bits: z,
                complexity: alpha,
                content_id: 0,
            },
        }
    }

    fn link() -> LinkQuality {
        LinkQuality {
            gamma_device: 2e-4,
            gamma_station: 1e-5,
        }
    }

    #[test]
    fn local_examples() {
        let c = Constants::default();
        let d = device(3e5, 2000.0, 2e9);
        let (t, e) = local_outcome(&d.task, &d, &c);
        assert_relative_eq!(t, 0.3, max_relative = 1e-14);
        assert_relative_eq!(e, 1.25e-26 * 8e27 * 0.3, max_relative = 1e-12);
        assert!((e - 30.0).abs() < 1e-9);
        let d2 = device(3e5, 2000.0, 4e9);
        let (t2, e2) = local_outcome(&d2.task, &d2, &c);
        assert_relative_eq!(t2, t / 2.0, max_relative = 1e-14);
        assert_relative_eq!(e2, e * 4.0, max_relative = 1e-12);
    }

    #[test]
    fn station_time_example() {
        let c = Constants::default();
        let g = Geometry::default();
        let d = device(3e5, 2000.0, 2e9);
        let o = offload_outcome(&d, 0.5, 0.5, false, &link(), &c, &g).unwrap();
        assert_relative_eq!(o.station_time, 0.12, max_relative = 1e-14);
        assert_relative_eq!(o.total_time, o.station_time + o.tx_time_da + o.tx_time_as, max_relative = 1e-15);
    }

    #[test]
    fn cached_skips_transmission() {
        let c = Constants::default();
        let g = Geometry::default();
        let d = device(2e5, 1800.0, 3e9);
        let o = offload_outcome(&d, 0.0, 0.4, true, &link(), &c, &g).unwrap();
        assert_eq!(o.tx_time_da, 0.0);
        assert_eq!(o.tx_time_as, 0.0);
        assert_eq!(o.device_energy, 0.0);
        assert_eq!(o.auv_tx_energy, 0.0);
        assert_eq!(o.total_time, o.station_time);
    }

    #[test]
    fn tx_energy_is_power_times_airtime() {
        // Substituting the rate law into the energy law gives P·T exactly.
        let c = Constants::default();
        let g = Geometry::default();
        let d = device(2.5e5, 1700.0, 1.5e9);
        for r in [0.05, 0.3, 1.0] {
            let o = offload_outcome(&d, r, 0.3, false, &link(), &c, &g).unwrap();
            assert_relative_eq!(o.device_energy, c.tx_power_device_w * o.tx_time_da, max_relative = 1e-9);
            assert_relative_eq!(o.auv_tx_energy, c.tx_power_auv_w * o.tx_time_as, max_relative = 1e-9);
        }
    }

    #[test]
    fn allocation_errors() {
        let c = Constants::default();
        let g = Geometry::default();
        let d = device(2e5, 1800.0, 3e9);
        assert!(matches!(
            offload_outcome(&d, 0.5, 0.0, false, &link(), &c, &g),
            Err(Error::Allocation(_))
        ));
        let dead = LinkQuality {
            gamma_device: 0.0,
            gamma_station: 1e-5,
        };
        assert!(matches!(offload_outcome(&d, 0.5, 0.5, false, &dead, &c, &g), Err(Error::ZeroRate)));
    }

    #[test]
    fn service_time_is_max() {
        let mk = |t| TaskOutcome {
            total_time: t,
            ..TaskOutcome::default()
        };
        assert_eq!(dg_service_time(&[mk(0.1), mk(0.3), mk(0.2)]).unwrap(), 0.3);
        assert_eq!(dg_service_time(&[mk(0.7)]).unwrap(), 0.7);
        assert_eq!(dg_service_time(&[mk(0.1), mk(0.3), mk(0.2), mk(0.25)]).unwrap(), 0.3);
        assert!(dg_service_time(&[]).is_err());
    }

    #[test]
    fn capacity_examples() {
        let t = Task {
            data_bits: 3e5,
            complexity: 1.0,
            content_id: 0,
        };
        let none: Vec<(bool, &Task)> = vec![(false, &t); 10];
        assert_eq!(cache_capacity_check(none, 100e6), CacheVerdict::Ok { slack_bits: 100e6 });
        let many: Vec<(bool, &Task)> = vec![(true, &t); 400];
        match cache_capacity_check(many, 100e6) {
            CacheVerdict::Violation { over_bits } => assert!((over_bits - 2e7).abs() < 1e-3),
            v => panic!("{v:?}"),
        }
        let exact: Vec<(bool, &Task)> = vec![(true, &t); 10];
        assert_eq!(cache_capacity_check(exact, 3e6), CacheVerdict::Ok { slack_bits: 0.0 });
    }

    proptest! {
        #[test]
        fn caching_dominates(z in 1e5f64..3e5, a in 1500.0f64..2000.0, f in 1e9f64..4e9, r in 0.01f64..1.0, ff in 0.01f64..1.0) {
            let c = Constants::default();
            let g = Geometry::default();
            let d = device(z, a, f);
            let plain = offload_outcome(&d, r, ff, false, &link(), &c, &g).unwrap();
            let cached = offload_outcome(&d, r, ff, true, &link(), &c, &g).unwrap();
            prop_assert!(cached.total_time <= plain.total_time);
            prop_assert!(cached.device_energy + cached.auv_tx_energy <= plain.device_energy + plain.auv_tx_energy);
            prop_assert_eq!(cached.station_energy, plain.station_energy);
            for e in [plain.device_energy, plain.auv_tx_energy, plain.station_energy] {
                prop_assert!(e.is_finite() && e >= 0.0);
            }
        }

        #[test]
        fn local_total_is_local_time(z in 1e5f64..3e5, a in 1500.0f64..2000.0, f in 1e9f64..4e9) {
            let c = Constants::default();
            let o = local_task_outcome(&device(z, a, f), &c);
            prop_assert_eq!(o.total_time, o.local_time);
            prop_assert!(!o.offloaded && !o.cached);
        }
    }
}
