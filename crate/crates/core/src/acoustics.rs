//! Underwater acoustic channel: ambient noise, Thorp absorption, spreading
//! attenuation, reflected-path SNR lower bounds and the two link rates.
//!
//! Frequencies are in kHz and noise levels in dB re 1 µPa²/Hz inside this
//! module only. Everything returned to callers is linear.

use crate::error::{Error, Result};
use crate::scenario::{Constants, Geometry, Vec3};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Ambient noise power spectral densities, linear µPa²/Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBreakdown {
    pub turbulence: f64,
    pub shipping: f64,
    pub waves: f64,
    pub thermal: f64,
    pub combined: f64,
}

impl NoiseBreakdown {
    pub fn combined_db(&self) -> f64 {
        linear_to_db(self.combined)
    }
}

fn check_freq(f_khz: f64) -> Result<()> {
    if f_khz.is_finite() && f_khz > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("frequency must be positive, got {f_khz} kHz")))
    }
}

/// Turbulence, shipping, wind-driven wave and thermal noise at `f_khz`.
///
/// `s` is the shipping activity factor in [0, 1] and `w` the wind speed in m/s.
pub fn noise_psd(f_khz: f64, s: f64, w: f64) -> Result<NoiseBreakdown> {
    check_freq(f_khz)?;
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("shipping factor must lie in [0, 1], got {s}")));
    }
    if !(w.is_finite() && w >= 0.0) {
        return Err(Error::Domain(format!("wind speed must be ≥ 0, got {w}")));
    }
    let lf = f_khz.log10();
    let turbulence_db = 17.0 - 30.0 * lf;
    let shipping_db = 40.0 + 20.0 * (s - 0.5) + 26.0 * lf - 60.0 * (f_khz + 0.03).log10();
    let waves_db = 50.0 + 7.5 * w.sqrt() + 20.0 * lf - 40.0 * (f_khz + 0.4).log10();
    let thermal_db = -15.0 + 20.0 * lf;
    let turbulence = db_to_linear(turbulence_db);
    let shipping = db_to_linear(shipping_db);
    let waves = db_to_linear(waves_db);
    let thermal = db_to_linear(thermal_db);
    Ok(NoiseBreakdown {
        turbulence,
        shipping,
        waves,
        thermal,
        combined: turbulence + shipping + waves + thermal,
    })
}

/// Thorp's empirical absorption coefficient in dB/km.
pub fn absorption_db_per_km(f_khz: f64) -> Result<f64> {
    check_freq(f_khz)?;
    let f2 = f_khz * f_khz;
    Ok(0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003)
}

/// Absorption part of the attenuation over `l_m` meters, `a(f)^(l_m / 1000)`.
pub fn absorption_factor(l_m: f64, f_khz: f64) -> Result<f64> {
    let a = db_to_linear(absorption_db_per_km(f_khz)?);
    Ok(a.powf(l_m / 1000.0))
}

/// Total path attenuation `l^k_s · a(f)^(l/1000)`.
///
/// Spreading uses the distance in meters and absorption the distance in km,
/// since Thorp's coefficient is per kilometer.
pub fn attenuation(l_m: f64, f_khz: f64, spreading: f64) -> Result<f64> {
    if !(l_m.is_finite() && l_m > 0.0) {
        return Err(Error::Domain(format!("path length must be positive, got {l_m} m")));
    }
    Ok(l_m.powf(spreading) * absorption_factor(l_m, f_khz)?)
}

/// Direct and shortest surface/bottom reflected path lengths between a device
/// and an AUV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub los_m: f64,
    pub nlos_surface_m: f64,
    pub nlos_bottom_m: f64,
}

pub fn link_geometry_device_auv(device: &Vec3, auv: &Vec3, geometry: &Geometry) -> Result<LinkGeometry> {
    let d = auv - device;
    let horiz2 = d.x * d.x + d.y * d.y;
    let los = d.norm();
    if los < 1e-9 {
        return Err(Error::Degenerate("device and AUV coincide".into()));
    }
    let h = geometry.water_depth_m;
    let (h0, d0) = (geometry.device_height_m, geometry.auv_height_m);
    let up = 2.0 * h - h0 - d0;
    let down = h0 + d0;
    Ok(LinkGeometry {
        los_m: los,
        nlos_surface_m: (horiz2 + up * up).sqrt(),
        nlos_bottom_m: (horiz2 + down * down).sqrt(),
    })
}

/// SNR of a single unobstructed path, `1 / (A(l) N)`.
pub fn snr_direct(l_m: f64, noise: &NoiseBreakdown, consts: &Constants) -> Result<f64> {
    Ok(1.0 / (attenuation(l_m, consts.freq_khz, consts.spreading)? * noise.combined))
}

fn inv_sqrt_att(l_m: f64, consts: &Constants) -> Result<f64> {
    Ok(attenuation(l_m, consts.freq_khz, consts.spreading)?.sqrt().recip())
}

/// Lower bound on the device → AUV SNR with the shortest surface and bottom
/// reflections subtracted from the direct amplitude.
///
/// A negative amplitude bracket is clamped to zero before squaring.
pub fn snr_lb_device_auv(link: &LinkGeometry, noise: &NoiseBreakdown, consts: &Constants) -> Result<f64> {
    let reflected = consts.surface_paths * consts.gamma_surface * inv_sqrt_att(link.nlos_surface_m, consts)?
        + consts.bottom_paths * consts.gamma_bottom * inv_sqrt_att(link.nlos_bottom_m, consts)?;
    bounded_snr(link.los_m, reflected, noise, consts)
}

/// `(1/√A(direct) - reflected)² / N`, clamped at zero. Without reflections
/// this is [`snr_direct`] itself, bit for bit.
fn bounded_snr(direct_m: f64, reflected: f64, noise: &NoiseBreakdown, consts: &Constants) -> Result<f64> {
    if reflected == 0.0 {
        return snr_direct(direct_m, noise, consts);
    }
    let b = (inv_sqrt_att(direct_m, consts)? - reflected).max(0.0);
    Ok(b * b / noise.combined)
}

/// Direct path to the station and the shortest bottom reflection for an AUV at `auv`.
pub fn station_paths(auv: &Vec3, geometry: &Geometry) -> (f64, f64) {
    let direct = (auv - geometry.station_pos()).norm();
    let v = geometry.device_height_m + geometry.auv_height_m;
    let reflected = (auv.x * auv.x + auv.y * auv.y + v * v).sqrt();
    (direct, reflected)
}

/// Lower bound on the AUV → station SNR (bottom reflection only).
pub fn snr_lb_auv_station(auv: &Vec3, geometry: &Geometry, noise: &NoiseBreakdown, consts: &Constants) -> Result<f64> {
    let (direct, reflected) = station_paths(auv, geometry);
    let bounce = consts.station_paths * consts.gamma_bottom * inv_sqrt_att(reflected, consts)?;
    bounded_snr(direct, bounce, noise, consts)
}

/// Device → AUV rate in bit/s for a bandwidth share `r_frac` at device depth `h1`.
pub fn rate_device_to_auv(r_frac: f64, gamma: f64, consts: &Constants, h1: f64) -> f64 {
    if r_frac <= 0.0 || gamma <= 0.0 {
        return 0.0;
    }
    let rb = r_frac * consts.bandwidth_low_hz;
    let snr = consts.circuit_efficiency * consts.tx_power_device_w * gamma
        / (2.0 * std::f64::consts::PI * h1 * consts.ref_intensity_w_m2 * rb);
    rb * snr.ln_1p() / std::f64::consts::LN_2
}

/// AUV → station rate in bit/s over the full upper band at AUV depth `h2`.
pub fn rate_auv_to_station(gamma: f64, consts: &Constants, h2: f64) -> f64 {
    if gamma <= 0.0 {
        return 0.0;
    }
    let b = consts.bandwidth_high_hz;
    let snr = consts.circuit_efficiency * consts.tx_power_auv_w * gamma
        / (2.0 * std::f64::consts::PI * h2 * consts.ref_intensity_w_m2 * b);
    b * snr.ln_1p() / std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn consts() -> Constants {
        Constants::default()
    }

    #[test]
    fn noise_at_30khz() {
        // Independent evaluation straight from the dB laws, summed in µPa²/Hz.
        let f: f64 = 30.0;
        let comps_db = [
            17.0 - 30.0 * f.log10(),
            40.0 + 26.0 * f.log10() - 60.0 * (f + 0.03).log10(),
            50.0 + 20.0 * f.log10() - 40.0 * (f + 0.4).log10(),
            -15.0 + 20.0 * f.log10(),
        ];
        let oracle: f64 = comps_db.iter().map(|d| 10f64.powf(d / 10.0)).sum();
        let n = noise_psd(30.0, 0.5, 0.0).unwrap();
        assert_relative_eq!(n.combined, oracle, max_relative = 1e-12);
        assert_relative_eq!(n.combined, 133.934, max_relative = 1e-5);
        assert!((n.combined_db() - 21.2689).abs() < 1e-3);
        assert!((linear_to_db(n.thermal) - 14.5424).abs() < 1e-3);
    }

    #[test]
    fn thermal_at_1khz() {
        let n = noise_psd(1.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(linear_to_db(n.thermal), -15.0, epsilon = 1e-12);
    }

    #[test]
    fn shipping_ratio() {
        let a = noise_psd(30.0, 1.0, 0.0).unwrap();
        let b = noise_psd(30.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(a.shipping / b.shipping, 100.0, max_relative = 1e-12);
    }

    #[test]
    fn noise_rejects_bad_freq() {
        assert!(noise_psd(0.0, 0.5, 0.0).is_err());
        assert!(noise_psd(-3.0, 0.5, 0.0).is_err());
        assert!(absorption_db_per_km(0.0).is_err());
    }

    #[test]
    fn thorp_values() {
        let oracle = |f: f64| {
            let f2 = f * f;
            0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003
        };
        for f in [10.0, 30.0] {
            assert_relative_eq!(absorption_db_per_km(f).unwrap(), oracle(f), max_relative = 1e-14);
        }
        assert!((absorption_db_per_km(30.0).unwrap() - 8.280378).abs() < 1e-5);
        assert!((absorption_db_per_km(10.0).unwrap() - 1.187030).abs() < 1e-5);
        assert!((absorption_db_per_km(1e-9).unwrap() - 0.003).abs() < 1e-12);
    }

    #[test]
    fn attenuation_examples() {
        let a = attenuation(1000.0, 30.0, 1.5).unwrap();
        let expect = 1000f64.powf(1.5) * 10f64.powf(absorption_db_per_km(30.0).unwrap() / 10.0);
        assert_relative_eq!(a, expect, max_relative = 1e-12);
        let one = attenuation(1.0, 30.0, 1.5).unwrap();
        let a_lin = 10f64.powf(absorption_db_per_km(30.0).unwrap() / 10.0);
        assert_relative_eq!(one, a_lin.powf(0.001), max_relative = 1e-12);
        assert!(attenuation(0.0, 30.0, 1.5).is_err());
    }

    #[test]
    fn link_geometry_vertical() {
        let g = Geometry::default();
        let dev = Vec3::new(5.0, -3.0, 10.0);
        let auv = Vec3::new(5.0, -3.0, 20.0);
        let l = link_geometry_device_auv(&dev, &auv, &g).unwrap();
        assert_relative_eq!(l.los_m, 10.0, epsilon = 1e-12);
        assert_relative_eq!(l.nlos_surface_m, 370.0, epsilon = 1e-12);
        assert_relative_eq!(l.nlos_bottom_m, 30.0, epsilon = 1e-12);
        assert!(link_geometry_device_auv(&dev, &dev, &g).is_err());
    }

    #[test]
    fn reduces_to_direct_snr_without_reflections() {
        let mut c = consts();
        c.gamma_surface = 0.0;
        c.gamma_bottom = 0.0;
        let n = noise_psd(c.freq_khz, c.shipping, c.wind_mps).unwrap();
        let g = Geometry::default();
        let link = link_geometry_device_auv(&Vec3::new(0.0, 0.0, 10.0), &Vec3::new(40.0, 30.0, 20.0), &g).unwrap();
        assert_eq!(snr_lb_device_auv(&link, &n, &c).unwrap(), snr_direct(link.los_m, &n, &c).unwrap());
        let auv = Vec3::new(300.0, 0.0, 20.0);
        let (direct, _) = station_paths(&auv, &g);
        assert_eq!(snr_lb_auv_station(&auv, &g, &n, &c).unwrap(), snr_direct(direct, &n, &c).unwrap());
    }

    #[test]
    fn negative_bracket_clamps() {
        let c = Constants::hundred_reflections();
        let n = noise_psd(c.freq_khz, c.shipping, c.wind_mps).unwrap();
        let g = Geometry::default();
        let link = link_geometry_device_auv(&Vec3::new(0.0, 0.0, 10.0), &Vec3::new(30.0, 0.0, 20.0), &g).unwrap();
        assert_eq!(snr_lb_device_auv(&link, &n, &c).unwrap(), 0.0);
        assert_eq!(rate_device_to_auv(1.0, 0.0, &c, g.device_depth_m), 0.0);
    }

    #[test]
    fn snr_500m_colocated_paths() {
        // All three paths of equal length: bracket = (1 - Γs - Γb)/√A.
        let c = consts();
        let n = noise_psd(30.0, 0.5, 0.0).unwrap();
        let link = LinkGeometry {
            los_m: 500.0,
            nlos_surface_m: 500.0,
            nlos_bottom_m: 500.0,
        };
        let a = 500f64.powf(1.5) * 10f64.powf(8.280378 * 0.5 / 10.0);
        let b = (1.0 - 1.0 - 0.0139) / a.sqrt();
        assert!(b < 0.0);
        assert_eq!(snr_lb_device_auv(&link, &n, &c).unwrap(), 0.0);
        let link = LinkGeometry {
            nlos_surface_m: 1000.0,
            ..link
        };
        let a_s = 1000f64.powf(1.5) * 10f64.powf(8.280378 / 10.0);
        let b = 1.0 / a.sqrt() - 1.0 / a_s.sqrt() - 0.0139 / a.sqrt();
        let expect = b * b / n.combined;
        assert_relative_eq!(snr_lb_device_auv(&link, &n, &c).unwrap(), expect, max_relative = 1e-5);
        assert!((expect - 9.7975e-8).abs() / 9.7975e-8 < 1e-3);
    }

    #[test]
    fn station_path_below() {
        let g = Geometry::default();
        let (direct, reflected) = station_paths(&Vec3::new(0.0, 0.0, 20.0), &g);
        assert_relative_eq!(direct, 180.0, epsilon = 1e-12);
        assert_relative_eq!(reflected, 30.0, epsilon = 1e-12);
    }

    #[test]
    fn station_rate_below_station() {
        let c = consts();
        let g = Geometry::default();
        let n = noise_psd(30.0, 0.5, 0.0).unwrap();
        let gamma = snr_lb_auv_station(&Vec3::new(0.0, 0.0, 20.0), &g, &n, &c).unwrap();
        // Oracle: amplitude bracket from the two path lengths 180 m and 30 m.
        let att = |l: f64| l.powf(1.5) * 10f64.powf(8.280378 * l / 1000.0 / 10.0);
        let br = 1.0 / att(180.0).sqrt() - 0.0139 / att(30.0).sqrt();
        let g_oracle = br * br / 133.934;
        assert_relative_eq!(gamma, g_oracle, max_relative = 1e-4);
        let snr = 0.2 * 0.036 * g_oracle / (2.0 * std::f64::consts::PI * 180.0 * UPA * 1e4);
        let r_oracle = 1e4 * (1.0 + snr).log2();
        let r = rate_auv_to_station(gamma, &c, g.auv_depth_m);
        assert_relative_eq!(r, r_oracle, max_relative = 1e-4);
        assert!(r.is_finite() && (100e3..120e3).contains(&r), "{r}");
        assert_eq!(rate_auv_to_station(0.0, &c, 180.0), 0.0);
    }

    const UPA: f64 = 1e-12 / (1020.0 * 1500.0);

    #[test]
    fn station_snr_versus_offset() {
        // The reflected path shortens its lead over the direct path faster
        // than the direct path weakens, so the bound first rises slightly
        // (about 0.6% up to ~22 m) and only then decays monotonically.
        let c = consts();
        let g = Geometry::default();
        let n = noise_psd(30.0, 0.5, 0.0).unwrap();
        let at = |x: f64| snr_lb_auv_station(&Vec3::new(x, 0.0, 20.0), &g, &n, &c).unwrap();
        let peak = (0..60).map(|i| at(i as f64)).fold(0.0, f64::max);
        assert!(peak > at(0.0));
        assert!(peak < at(0.0) * 1.01);
        let mut prev = f64::INFINITY;
        for i in 3..400 {
            let v = at(i as f64 * 10.0);
            assert!(v <= prev, "offset {}", i * 10);
            prev = v;
        }
    }

    #[test]
    fn device_rate_concave_increasing() {
        let c = consts();
        let gamma = 2e-4;
        let rs: Vec<f64> = (1..=100).map(|i| rate_device_to_auv(i as f64 / 100.0, gamma, &c, 190.0)).collect();
        for w in rs.windows(2) {
            assert!(w[1] > w[0]);
        }
        for w in rs.windows(3) {
            assert!(w[2] - w[1] < w[1] - w[0]);
        }
        assert_eq!(rate_device_to_auv(0.0, gamma, &c, 190.0), 0.0);
        let mut c2 = c.clone();
        c2.tx_power_device_w *= 2.0;
        assert!(rate_device_to_auv(0.3, gamma, &c2, 190.0) > rate_device_to_auv(0.3, gamma, &c, 190.0));
    }

    proptest! {
        #[test]
        fn db_round_trip(db in -200.0f64..200.0) {
            let back = linear_to_db(db_to_linear(db));
            prop_assert!((back - db).abs() <= 1e-12 * db.abs().max(1.0));
        }

        #[test]
        fn combined_is_linear_sum(f in 0.01f64..200.0, s in 0.0f64..=1.0, w in 0.0f64..30.0) {
            let n = noise_psd(f, s, w).unwrap();
            prop_assert_eq!(n.combined, n.turbulence + n.shipping + n.waves + n.thermal);
            prop_assert!(n.turbulence > 0.0 && n.shipping > 0.0 && n.waves > 0.0 && n.thermal > 0.0);
        }

        #[test]
        fn absorption_multiplicative(l1 in 1.0f64..5000.0, l2 in 1.0f64..5000.0, f in 1.0f64..80.0) {
            let lhs = absorption_factor(l1 + l2, f).unwrap();
            let rhs = absorption_factor(l1, f).unwrap() * absorption_factor(l2, f).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs);
        }

        #[test]
        fn attenuation_increasing(l in 1.0f64..5000.0, dl in 0.01f64..100.0, f in 1.0f64..80.0) {
            prop_assert!(attenuation(l + dl, f, 1.5).unwrap() > attenuation(l, f, 1.5).unwrap());
        }

        #[test]
        fn nlos_not_shorter(dx in -500.0f64..500.0, dy in -500.0f64..500.0) {
            let g = Geometry::default();
            let l = link_geometry_device_auv(&Vec3::new(0.0, 0.0, 10.0), &Vec3::new(dx, dy, 20.0), &g).unwrap();
            prop_assert!(l.nlos_bottom_m >= l.los_m);
            prop_assert!(l.nlos_surface_m >= l.los_m);
            let m = link_geometry_device_auv(&Vec3::new(0.0, 0.0, 10.0), &Vec3::new(-dx, -dy, 20.0), &g).unwrap();
            prop_assert_eq!(l, m);
        }

        #[test]
        fn device_rate_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0, gamma in 0.0f64..1e-2) {
            let c = Constants::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let rl = rate_device_to_auv(lo, gamma, &c, 190.0);
            let rh = rate_device_to_auv(hi, gamma, &c, 190.0);
            prop_assert!(rl >= 0.0);
            prop_assert!(rh >= rl);
        }
    }
}
