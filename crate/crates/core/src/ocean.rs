//! Lamb-vortex current field and the hydrodynamic power an AUV spends to hold
//! station or to cruise through it.

use crate::error::{Error, Result};
use crate::scenario::{Constants, Vec3, Vortex};

const CENTER_TOL: f64 = 1e-9;

/// Velocity induced at `p` by a single vortex.
///
/// The vertical component uses the vortex's offset from the cruising plane
/// `d0 - z0`, not from the sample height.
pub fn vortex_velocity(p: &Vec3, v: &Vortex, d0: f64) -> Vec3 {
    let d = p - v.center;
    let r2 = d.norm_squared();
    if r2.sqrt() < CENTER_TOL {
        return Vec3::zeros();
    }
    let coef = v.strength / (2.0 * std::f64::consts::PI * r2) * (1.0 - (-r2 / (v.radius_m * v.radius_m)).exp());
    Vec3::new(-coef * d.y, coef * d.x, coef * (d0 - v.center.z))
}

/// Superposed current of all vortices at `p`, m/s.
pub fn current_velocity(p: &Vec3, vortices: &[Vortex], d0: f64) -> Vec3 {
    vortices.iter().fold(Vec3::zeros(), |acc, v| acc + vortex_velocity(p, v, d0))
}

/// Vorticity magnitude of one vortex at `p`, 1/s.
pub fn vorticity_mag(p: &Vec3, v: &Vortex) -> f64 {
    let r2 = (p - v.center).norm_squared();
    v.strength / (std::f64::consts::PI * v.radius_m * v.radius_m) * (-r2 / (v.radius_m * v.radius_m)).exp()
}

/// Velocity of the AUV relative to the water when it holds ground speed
/// `speed` along the unit vector `direction`.
pub fn relative_velocity(direction: &Vec3, speed: f64, p: &Vec3, vortices: &[Vortex], d0: f64) -> Result<Vec3> {
    let n = direction.norm();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("direction must be a unit vector, norm is {n}")));
    }
    Ok(direction * speed - current_velocity(p, vortices, d0))
}

/// Quadratic drag for a flow of velocity `v` past the hull, newtons.
pub fn drag_force(v: &Vec3, consts: &Constants) -> f64 {
    0.5 * consts.density_kg_m3 * v.norm_squared() * consts.cross_section_m2 * consts.drag_coeff
}

/// Electric power to hold position at `p` against the local current, watts.
pub fn hover_power(p: &Vec3, vortices: &[Vortex], consts: &Constants, d0: f64) -> f64 {
    let vc = current_velocity(p, vortices, d0);
    drag_force(&vc, consts) * vc.norm() / consts.electric_efficiency
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentCost {
    pub power_w: f64,
    pub time_s: f64,
}

impl SegmentCost {
    pub fn energy_j(&self) -> f64 {
        self.power_w * self.time_s
    }
}

/// Power and duration of a straight cruise from `from` to `to` at the nominal speed.
///
/// The relative flow is averaged over the start, midpoint and end of the segment.
pub fn segment_power(from: &Vec3, to: &Vec3, vortices: &[Vortex], consts: &Constants, d0: f64) -> Result<SegmentCost> {
    segment_power_in(from, to, |p| current_velocity(p, vortices, d0), consts)
}

/// [`segment_power`] for an arbitrary current field.
pub fn segment_power_in(from: &Vec3, to: &Vec3, field: impl Fn(&Vec3) -> Vec3, consts: &Constants) -> Result<SegmentCost> {
    let delta = to - from;
    let len = delta.norm();
    if len < 1e-9 {
        return Err(Error::Degenerate("segment endpoints coincide".into()));
    }
    let dir = delta / len;
    let speed = consts.auv_speed_mps;
    let avg = mean_relative_velocity(&dir, speed, [field(from), field(&(from + delta * 0.5)), field(to)]);
    Ok(SegmentCost {
        power_w: drag_force(&avg, consts) * avg.norm() / consts.electric_efficiency,
        time_s: len / speed,
    })
}

/// Three-point average of `speed * dir - current` over the sampled currents.
pub fn mean_relative_velocity(dir: &Vec3, speed: f64, currents: [Vec3; 3]) -> Vec3 {
    let ground = dir * speed;
    currents.iter().fold(Vec3::zeros(), |acc, c| acc + (ground - c)) / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const D0: f64 = 20.0;

    fn vortex() -> Vortex {
        Vortex {
            center: Vec3::new(0.0, 0.0, D0),
            strength: 8.0,
            radius_m: 100.0,
        }
    }

    #[test]
    fn zero_at_center() {
        let v = vortex();
        assert_eq!(current_velocity(&v.center, std::slice::from_ref(&v), D0), Vec3::zeros());
    }

    #[test]
    fn tangential_speed_at_r0() {
        let v = vortex();
        let u = current_velocity(&Vec3::new(100.0, 0.0, D0), &[v], D0);
        let expect = 8.0 / (2.0 * std::f64::consts::PI * 100.0) * (1.0 - (-1f64).exp());
        assert_relative_eq!(u.y, expect, max_relative = 1e-12);
        assert!((u.y - 0.00805).abs() < 5e-6);
        assert_eq!(u.x, 0.0);
        assert_eq!(u.z, 0.0);
    }

    #[test]
    fn vorticity_values() {
        let v = vortex();
        let c = vorticity_mag(&v.center, &v);
        assert_relative_eq!(c, 8.0 / (std::f64::consts::PI * 1e4), max_relative = 1e-14);
        assert!((c - 2.546e-4).abs() < 1e-7);
        let at_r0 = vorticity_mag(&Vec3::new(0.0, 100.0, D0), &v);
        assert_relative_eq!(at_r0 / c, (-1f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn relative_velocity_cases() {
        let c = Constants::default();
        let e = Vec3::new(1.0, 0.0, 0.0);
        let p = Vec3::new(3.0, 4.0, D0);
        let rel = relative_velocity(&e, c.auv_speed_mps, &p, &[], D0).unwrap();
        assert_relative_eq!(rel.norm(), c.auv_speed_mps, max_relative = 1e-15);
        assert!(relative_velocity(&Vec3::new(1.0, 1.0, 0.0), 1.0, &p, &[], D0).is_err());

        // Opposing current of 0.008 m/s along the direction of travel.
        let opposing = Vec3::new(-0.008, 0.0, 0.0);
        let rel = e * c.auv_speed_mps - opposing;
        assert!((rel.norm() - 2.580).abs() < 1e-3);
        let with_it = e * 0.5 - Vec3::new(0.5, 0.0, 0.0);
        assert_eq!(with_it.norm(), 0.0);
    }

    #[test]
    fn drag_at_cruise_speed() {
        let c = Constants::default();
        let f = drag_force(&Vec3::new(2.572, 0.0, 0.0), &c);
        assert_relative_eq!(f, 0.5 * 1020.0 * 2.572 * 2.572 * 0.0314 * 0.117, max_relative = 1e-14);
        assert!((f - 12.39).abs() < 0.01);
        assert_eq!(drag_force(&Vec3::zeros(), &c), 0.0);
        let f2 = drag_force(&Vec3::new(5.144, 0.0, 0.0), &c);
        assert_relative_eq!(f2 / f, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn hover_power_cases() {
        let c = Constants::default();
        let p = Vec3::new(100.0, 0.0, D0);
        assert_eq!(hover_power(&p, &[], &c, D0), 0.0);
        let v = vortex();
        let h = hover_power(&p, std::slice::from_ref(&v), &c, D0);
        let speed = 8.0 / (2.0 * std::f64::consts::PI * 100.0) * (1.0 - (-1f64).exp());
        let oracle = 0.5 * 1020.0 * speed.powi(3) * 0.0314 * 0.117 / 0.8;
        assert_relative_eq!(h, oracle, max_relative = 1e-12);
        assert!((h - 1.2e-6).abs() < 1e-7, "{h}");
        let strong = Vortex { strength: 16.0, ..v };
        assert_relative_eq!(hover_power(&p, &[strong], &c, D0) / h, 8.0, max_relative = 1e-12);
    }

    #[test]
    fn still_water_kilometer() {
        let c = Constants::default();
        let s = segment_power(&Vec3::new(0.0, 0.0, D0), &Vec3::new(1000.0, 0.0, D0), &[], &c, D0).unwrap();
        assert!((s.time_s - 388.8).abs() < 0.1);
        assert!((s.power_w - 39.8).abs() < 0.1);
        assert!((s.energy_j() - 15.5e3).abs() < 0.1e3);
        assert!(segment_power(&Vec3::zeros(), &Vec3::zeros(), &[], &c, D0).is_err());
    }

    #[test]
    fn opposing_vortex_costs_more() {
        // Below a counter-clockwise vortex the current points in +x, so head -x.
        let c = Constants::default();
        let v = Vortex {
            strength: 2000.0,
            ..vortex()
        };
        let from = Vec3::new(60.0, -50.0, D0);
        let to = Vec3::new(-60.0, -50.0, D0);
        for p in [from, (from + to) / 2.0, to] {
            let u = current_velocity(&p, std::slice::from_ref(&v), D0);
            assert!(u.dot(&(to - from)) < 0.0);
        }
        let with = segment_power(&from, &to, &[v], &c, D0).unwrap();
        let still = segment_power(&from, &to, &[], &c, D0).unwrap();
        assert!(with.energy_j() > still.energy_j());
    }

    proptest! {
        #[test]
        fn planar_orthogonal(x in -500.0f64..500.0, y in -500.0f64..500.0, s in -20.0f64..20.0, r0 in 10.0f64..300.0) {
            let v = Vortex { center: Vec3::new(17.0, -4.0, D0), strength: s, radius_m: r0 };
            let p = Vec3::new(x, y, D0);
            let u = vortex_velocity(&p, &v, D0);
            let dot = u.x * (x - 17.0) + u.y * (y + 4.0);
            prop_assert!(dot.abs() <= 1e-12);
        }

        #[test]
        fn ring_symmetry(r in 1.0f64..400.0, k in 0usize..64) {
            let v = vortex();
            let a = current_velocity(&Vec3::new(r, 0.0, D0), std::slice::from_ref(&v), D0);
            let th = k as f64 * std::f64::consts::TAU / 64.0;
            let b = current_velocity(&Vec3::new(r * th.cos(), r * th.sin(), D0), &[v], D0);
            prop_assert!((a.xy().norm() - b.xy().norm()).abs() <= 1e-9);
        }

        #[test]
        fn superposition(x in -300.0f64..300.0, y in -300.0f64..300.0) {
            let a = vortex();
            let b = Vortex { center: Vec3::new(150.0, 40.0, D0), strength: -5.0, radius_m: 60.0 };
            let p = Vec3::new(x, y, D0);
            let both = current_velocity(&p, &[a.clone(), b.clone()], D0);
            let sum = vortex_velocity(&p, &a, D0) + vortex_velocity(&p, &b, D0);
            prop_assert!((both - sum).norm() <= 1e-15);
        }

        #[test]
        fn uniform_current_average(ux in -1.0f64..1.0, uy in -1.0f64..1.0, x in 1.0f64..500.0) {
            let c = Constants::default();
            let uc = Vec3::new(ux, uy, 0.0);
            let dir = Vec3::new(1.0, 0.0, 0.0);
            let avg = mean_relative_velocity(&dir, c.auv_speed_mps, [uc, uc, uc]);
            let point = dir * c.auv_speed_mps - uc;
            prop_assert!((avg - point).norm() <= 1e-15);
            let seg = segment_power_in(&Vec3::zeros(), &Vec3::new(x, 0.0, 0.0), |_| uc, &c).unwrap();
            let expect = drag_force(&point, &c) * point.norm() / c.electric_efficiency;
            prop_assert!((seg.power_w - expect).abs() <= 1e-12 * expect);
        }

        #[test]
        fn still_water_reversal(ax in -900.0f64..900.0, ay in -900.0f64..900.0, bx in -900.0f64..900.0, by in -900.0f64..900.0) {
            let c = Constants::default();
            let a = Vec3::new(ax, ay, D0);
            let b = Vec3::new(bx, by, D0);
            prop_assume!((a - b).norm() > 1.0);
            let f = segment_power(&a, &b, &[], &c, D0).unwrap();
            let r = segment_power(&b, &a, &[], &c, D0).unwrap();
            prop_assert!((f.energy_j() - r.energy_j()).abs() <= 1e-9 * f.energy_j());
            prop_assert!(f.power_w >= 0.0);
        }

        #[test]
        fn hover_nonnegative(x in -500.0f64..500.0, y in -500.0f64..500.0, s in -50.0f64..50.0) {
            let c = Constants::default();
            let v = Vortex { strength: s, ..vortex() };
            prop_assert!(hover_power(&Vec3::new(x, y, D0), &[v], &c, D0) >= 0.0);
        }
    }
}
