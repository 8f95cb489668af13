//! World description: geometry, devices, tasks, physical constants, vortices
//! and economic weights.
//!
//! Units are SI everywhere (meters, seconds, hertz, watts, joules, bits). The
//! only exception is the carrier frequency, which is stored in kHz because the
//! empirical noise and absorption laws are written in kHz; conversion happens
//! inside [`crate::acoustics`] only.
//!
//! Coordinates: `z` is measured upward from the seabed. The surface station
//! sits at `(0, 0, H)`, devices at `z = h0`, AUVs cruise at `z = d0`.
//!
//! Scenario files are TOML. Random generation uses `ChaCha8Rng` seeded with
//! `seed_from_u64`, which produces the same stream on every platform.

use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ScenarioError;

pub type Vec3 = Vector3<f64>;

/// Meters per second in one knot.
pub const KNOT_MPS: f64 = 0.5144;

/// Reference intensity of a 1 µPa plane wave in sea water, `(1e-6 Pa)^2 / (rho c)`
/// with `rho = 1020 kg/m^3` and `c = 1500 m/s`.
pub const UPA_REF_INTENSITY: f64 = 1e-12 / (1020.0 * 1500.0);

const HEIGHT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Water depth `H`, m.
    pub water_depth_m: f64,
    /// Device height above the seabed `h0`, m.
    pub device_height_m: f64,
    /// AUV cruising height above the seabed `d0`, m.
    pub auv_height_m: f64,
    /// Device depth below the surface `H1 = H - h0`, m.
    pub device_depth_m: f64,
    /// AUV depth below the surface `H2 = H - d0`, m.
    pub auv_depth_m: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self::new(200.0, 10.0, 20.0)
    }
}

impl Geometry {
    /// Builds a consistent geometry, deriving both depths from `H`, `h0`, `d0`.
    pub fn new(water_depth_m: f64, device_height_m: f64, auv_height_m: f64) -> Self {
        Self {
            water_depth_m,
            device_height_m,
            auv_height_m,
            device_depth_m: water_depth_m - device_height_m,
            auv_depth_m: water_depth_m - auv_height_m,
        }
    }

    pub fn station_pos(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.water_depth_m)
    }

    /// The sub-surface point below the station where every AUV starts and ends a cycle.
    pub fn depot(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.auv_height_m)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let g = self;
        let all = [
            g.water_depth_m,
            g.device_height_m,
            g.auv_height_m,
            g.device_depth_m,
            g.auv_depth_m,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(ScenarioError::invalid("geometry values must be finite"));
        }
        if g.water_depth_m <= 0.0 {
            return Err(ScenarioError::invalid("H > 0"));
        }
        if !(g.device_height_m > 0.0 && g.device_height_m < g.water_depth_m) {
            return Err(ScenarioError::invalid("0 < h0 < H"));
        }
        if !(g.auv_height_m > 0.0 && g.auv_height_m < g.water_depth_m) {
            return Err(ScenarioError::invalid("0 < d0 < H"));
        }
        if (g.device_depth_m - (g.water_depth_m - g.device_height_m)).abs() > HEIGHT_TOL {
            return Err(ScenarioError::invalid("H1 = H - h0"));
        }
        if (g.auv_depth_m - (g.water_depth_m - g.auv_height_m)).abs() > HEIGHT_TOL {
            return Err(ScenarioError::invalid("H2 = H - d0"));
        }
        Ok(())
    }
}

/// Physical and system constants.
///
/// `surface_paths`, `bottom_paths` and `station_paths` are the reflected-path
/// counts that multiply the shortest reflected amplitude in the SNR lower
/// bounds. `ref_intensity_w_m2` is the reference intensity that converts
/// transmit power into the µPa-referenced source level used by the rate laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub freq_khz: f64,
    pub shipping: f64,
    pub wind_mps: f64,
    pub spreading: f64,
    pub gamma_surface: f64,
    pub gamma_bottom: f64,
    pub surface_paths: f64,
    pub bottom_paths: f64,
    pub station_paths: f64,
    pub bandwidth_low_hz: f64,
    pub bandwidth_high_hz: f64,
    pub tx_power_device_w: f64,
    pub tx_power_auv_w: f64,
    pub circuit_efficiency: f64,
    pub electric_efficiency: f64,
    pub drag_coeff: f64,
    pub cross_section_m2: f64,
    pub density_kg_m3: f64,
    pub auv_speed_mps: f64,
    pub cpu_energy_coeff: f64,
    pub cpu_exponent: f64,
    /// Station compute pool available to each AUV, cycles/s.
    pub station_cycles_hz: f64,
    pub storage_capacity_bits: f64,
    pub fairness_eps_s: f64,
    pub ref_intensity_w_m2: f64,
}

impl Default for Constants {
    /// Standard constants with one reflected path per boundary.
    ///
    /// With 100 reflected paths per boundary the amplitude bracket of both SNR
    /// lower bounds is negative for every admissible geometry and every link
    /// rate collapses to zero; see [`Constants::hundred_reflections`] for the literal set.
    fn default() -> Self {
        Self {
            surface_paths: 1.0,
            bottom_paths: 1.0,
            station_paths: 1.0,
            ..Self::hundred_reflections()
        }
    }
}

impl Constants {
    /// Standard constants with 100 reflected paths per boundary.
    pub fn hundred_reflections() -> Self {
        Self {
            freq_khz: 30.0,
            shipping: 0.5,
            wind_mps: 0.0,
            spreading: 1.5,
            gamma_surface: 1.0,
            gamma_bottom: 0.0139,
            surface_paths: 100.0,
            bottom_paths: 100.0,
            station_paths: 100.0,
            bandwidth_low_hz: 10e3,
            bandwidth_high_hz: 10e3,
            tx_power_device_w: 0.030,
            tx_power_auv_w: 0.036,
            circuit_efficiency: 0.2,
            electric_efficiency: 0.8,
            drag_coeff: 0.117,
            cross_section_m2: 0.0314,
            density_kg_m3: 1020.0,
            auv_speed_mps: 5.0 * KNOT_MPS,
            cpu_energy_coeff: 1.25e-26,
            cpu_exponent: 3.0,
            station_cycles_hz: 10e9,
            storage_capacity_bits: 100e6,
            fairness_eps_s: 2.0,
            ref_intensity_w_m2: UPA_REF_INTENSITY,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let c = self;
        let positive = [
            ("f > 0", c.freq_khz),
            ("k_s > 0", c.spreading),
            ("B_L > 0", c.bandwidth_low_hz),
            ("B_H > 0", c.bandwidth_high_hz),
            ("P_D > 0", c.tx_power_device_w),
            ("P_A > 0", c.tx_power_auv_w),
            ("eta > 0", c.circuit_efficiency),
            ("zeta > 0", c.electric_efficiency),
            ("C_d > 0", c.drag_coeff),
            ("C_a > 0", c.cross_section_m2),
            ("rho_L > 0", c.density_kg_m3),
            ("V_k > 0", c.auv_speed_mps),
            ("mu > 0", c.cpu_energy_coeff),
            ("sigma > 0", c.cpu_exponent),
            ("F > 0", c.station_cycles_hz),
            ("C_e > 0", c.storage_capacity_bits),
            ("epsilon > 0", c.fairness_eps_s),
            ("kappa > 0", c.ref_intensity_w_m2),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ScenarioError::invalid(name));
            }
        }
        let nonneg = [
            ("Gamma_s >= 0", c.gamma_surface),
            ("Gamma_b >= 0", c.gamma_bottom),
            ("alpha >= 0", c.surface_paths),
            ("beta >= 0", c.bottom_paths),
            ("phi >= 0", c.station_paths),
            ("w >= 0", c.wind_mps),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ScenarioError::invalid(name));
            }
        }
        if !(0.0..=1.0).contains(&c.shipping) {
            return Err(ScenarioError::invalid("s in [0, 1]"));
        }
        Ok(())
    }
}

/// Unit prices of provider energy and the soft fairness penalty weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Economics {
    /// Unit cost of station energy, profit units per joule.
    pub cost_station: f64,
    /// Unit cost of AUV energy, profit units per joule.
    pub cost_auv: f64,
    /// Penalty per second of cycle-time spread above the fairness bound.
    pub fairness_penalty: f64,
}

impl Default for Economics {
    fn default() -> Self {
        Self {
            cost_station: 1.0,
            cost_auv: 2.0,
            fairness_penalty: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub data_bits: f64,
    /// CPU cycles needed per input bit.
    pub complexity: f64,
    pub content_id: u32,
}

impl Task {
    pub fn cycles(&self) -> f64 {
        self.data_bits * self.complexity
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub pos: Vec3,
    pub cpu_hz: f64,
    /// Revenue per second of latency saved.
    pub time_value: f64,
    /// Revenue per joule of device energy saved.
    pub energy_value: f64,
    pub task: Task,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceGroup {
    pub centroid: Vec3,
    pub devices: Vec<Device>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vortex {
    pub center: Vec3,
    /// Circulation strength, m^2/s.
    pub strength: f64,
    pub radius_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    pub num_auvs: usize,
    #[serde(default)]
    pub geometry: Geometry,
    #[serde(default)]
    pub constants: Constants,
    #[serde(default)]
    pub economics: Economics,
    #[serde(default)]
    pub vortices: Vec<Vortex>,
    pub groups: Vec<DeviceGroup>,
}

impl Scenario {
    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn total_devices(&self) -> usize {
        self.groups.iter().map(|g| g.devices.len()).sum()
    }

    pub fn max_devices_per_group(&self) -> usize {
        self.groups.iter().map(|g| g.devices.len()).max().unwrap_or(0)
    }

    /// Where an AUV hovers while serving group `k`: above the centroid at height `d0`.
    pub fn hover_point(&self, k: usize) -> Vec3 {
        let c = self.groups[k].centroid;
        Vec3::new(c.x, c.y, self.geometry.auv_height_m)
    }

    pub fn total_task_bits(&self) -> f64 {
        self.groups
            .iter()
            .flat_map(|g| g.devices.iter())
            .map(|d| d.task.data_bits)
            .sum()
    }

    /// Number of devices in the whole scenario requesting each content id.
    pub fn content_popularity(&self) -> std::collections::HashMap<u32, usize> {
        let mut counts = std::collections::HashMap::new();
        for d in self.groups.iter().flat_map(|g| g.devices.iter()) {
            *counts.entry(d.task.content_id).or_insert(0) += 1;
        }
        counts
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.geometry.validate()?;
        self.constants.validate()?;
        if self.num_auvs < 1 {
            return Err(ScenarioError::invalid("M ≥ 1"));
        }
        if self.groups.is_empty() {
            return Err(ScenarioError::invalid("K ≥ 1"));
        }
        if self.groups.len() < self.num_auvs {
            return Err(ScenarioError::invalid("K ≥ M"));
        }
        let e = &self.economics;
        for (name, v) in [
            ("cost_station >= 0", e.cost_station),
            ("cost_auv >= 0", e.cost_auv),
            ("fairness_penalty >= 0", e.fairness_penalty),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ScenarioError::invalid(name));
            }
        }
        let h0 = self.geometry.device_height_m;
        for (k, g) in self.groups.iter().enumerate() {
            if !finite3(&g.centroid) {
                return Err(ScenarioError::invalid(format!("group {k}: centroid must be finite")));
            }
            if g.devices.is_empty() {
                return Err(ScenarioError::invalid(format!("group {k}: nonempty device list")));
            }
            for (i, d) in g.devices.iter().enumerate() {
                let at = |what: &str| ScenarioError::invalid(format!("group {k} device {i}: {what}"));
                if !finite3(&d.pos) {
                    return Err(at("position must be finite"));
                }
                if (d.pos.z - h0).abs() > HEIGHT_TOL {
                    return Err(at("device z = h0"));
                }
                if !(d.cpu_hz.is_finite() && d.cpu_hz > 0.0) {
                    return Err(at("f_ki > 0"));
                }
                if !(d.task.data_bits.is_finite() && d.task.data_bits > 0.0) {
                    return Err(at("Z_ki > 0"));
                }
                if !(d.task.complexity.is_finite() && d.task.complexity > 0.0) {
                    return Err(at("alpha_ki > 0"));
                }
                if !(d.time_value.is_finite() && d.time_value >= 0.0) {
                    return Err(at("omega_ki ≥ 0"));
                }
                if !(d.energy_value.is_finite() && d.energy_value >= 0.0) {
                    return Err(at("lambda_ki ≥ 0"));
                }
            }
        }
        for (v, vx) in self.vortices.iter().enumerate() {
            if !finite3(&vx.center) || !vx.strength.is_finite() {
                return Err(ScenarioError::invalid(format!("vortex {v}: finite center and strength")));
            }
            if !(vx.radius_m.is_finite() && vx.radius_m > 0.0) {
                return Err(ScenarioError::invalid(format!("vortex {v}: r0 > 0")));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String, ScenarioError> {
        toml::to_string(self).map_err(|e| ScenarioError::Serialize(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
        let text = self.to_toml()?;
        std::fs::write(path.as_ref(), text).map_err(|e| ScenarioError::Io {
            path: path.as_ref().display().to_string(),
            source: e,
        })
    }

    /// Short content hash of the canonical TOML form, used to tag experiment output.
    pub fn content_hash(&self) -> String {
        let text = self.to_toml().unwrap_or_default();
        let digest = Sha256::digest(text.as_bytes());
        hex::encode(&digest[..8])
    }
}

fn finite3(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Scenario::from_toml(&text)
}

/// How many devices to place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeviceCount {
    PerGroup(usize),
    /// Spread as evenly as possible; the first `total % K` groups get one extra.
    Total(usize),
}

/// Size and distribution parameters for [`generate_random`].
#[derive(Debug, Clone)]
pub struct GenSpec {
    pub num_groups: usize,
    pub num_auvs: usize,
    pub devices: DeviceCount,
    /// Side of the horizontal square (centered on the station) holding group centroids.
    pub area_m: f64,
    /// Devices lie uniformly in a disc of this radius around their centroid.
    pub device_radius_m: f64,
    pub catalog_size: u32,
    pub zipf_exponent: f64,
    pub num_vortices: usize,
    pub vortex_strength: f64,
    pub vortex_radius_m: f64,
    pub data_bits: (f64, f64),
    pub cpu_hz: (f64, f64),
    pub complexity: (f64, f64),
    pub time_value: (f64, f64),
    pub energy_value: (f64, f64),
    pub geometry: Geometry,
    pub constants: Constants,
    pub economics: Economics,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            num_groups: 15,
            num_auvs: 4,
            devices: DeviceCount::Total(190),
            area_m: 2000.0,
            device_radius_m: 50.0,
            catalog_size: 30,
            zipf_exponent: 0.8,
            num_vortices: 3,
            vortex_strength: 8.0,
            vortex_radius_m: 100.0,
            data_bits: (1e5, 3e5),
            cpu_hz: (1e9, 4e9),
            complexity: (1500.0, 2000.0),
            time_value: (10.0, 20.0),
            energy_value: (1.0, 2.0),
            geometry: Geometry::default(),
            constants: Constants::default(),
            economics: Economics::default(),
        }
    }
}

impl GenSpec {
    pub fn new(num_groups: usize, num_auvs: usize, devices: DeviceCount) -> Self {
        Self {
            num_groups,
            num_auvs,
            devices,
            ..Self::default()
        }
    }

    fn devices_in_group(&self, k: usize) -> usize {
        match self.devices {
            DeviceCount::PerGroup(n) => n,
            DeviceCount::Total(total) => {
                let base = total / self.num_groups;
                base + usize::from(k < total % self.num_groups)
            }
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Samples a scenario. Identical `(spec, seed)` pairs give identical scenarios.
pub fn generate_random(spec: &GenSpec, seed: u64) -> Result<Scenario, ScenarioError> {
    if spec.num_groups < 1 || spec.num_auvs < 1 {
        return Err(ScenarioError::invalid("counts must be ≥ 1"));
    }
    if spec.catalog_size < 1 {
        return Err(ScenarioError::invalid("catalog_size ≥ 1"));
    }
    if (0..spec.num_groups).any(|k| spec.devices_in_group(k) == 0) {
        return Err(ScenarioError::invalid("every group needs at least one device"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zipf = Zipf::new(u64::from(spec.catalog_size), spec.zipf_exponent)
        .map_err(|e| ScenarioError::invalid(format!("zipf: {e}")))?;
    let half = spec.area_m / 2.0;
    let h0 = spec.geometry.device_height_m;
    let mut groups = Vec::with_capacity(spec.num_groups);
    for k in 0..spec.num_groups {
        let cx = rng.gen_range(-half..=half);
        let cy = rng.gen_range(-half..=half);
        let n = spec.devices_in_group(k);
        let mut devices = Vec::with_capacity(n);
        for _ in 0..n {
            let rad = spec.device_radius_m * rng.gen::<f64>().sqrt();
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            let pos = Vec3::new(cx + rad * theta.cos(), cy + rad * theta.sin(), h0);
            let cpu_hz = uniform(&mut rng, spec.cpu_hz);
            let data_bits = uniform(&mut rng, spec.data_bits);
            let complexity = uniform(&mut rng, spec.complexity);
            let time_value = uniform(&mut rng, spec.time_value);
            let energy_value = uniform(&mut rng, spec.energy_value);
            let content_id = zipf.sample(&mut rng) as u32 - 1;
            devices.push(Device {
                pos,
                cpu_hz,
                time_value,
                energy_value,
                task: Task {
                    data_bits,
                    complexity,
                    content_id,
                },
            });
        }
        groups.push(DeviceGroup {
            centroid: Vec3::new(cx, cy, h0),
            devices,
        });
    }
    let d0 = spec.geometry.auv_height_m;
    let vortices = (0..spec.num_vortices)
        .map(|_| Vortex {
            center: Vec3::new(rng.gen_range(-half..=half), rng.gen_range(-half..=half), d0),
            strength: spec.vortex_strength,
            radius_m: spec.vortex_radius_m,
        })
        .collect();
    let scenario = Scenario {
        seed,
        num_auvs: spec.num_auvs,
        geometry: spec.geometry.clone(),
        constants: spec.constants.clone(),
        economics: spec.economics.clone(),
        vortices,
        groups,
    };
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Scenario {
        generate_random(&GenSpec::new(6, 2, DeviceCount::PerGroup(3)), 7).unwrap()
    }

    #[test]
    fn table_speed_and_frequency() {
        let c = Constants::hundred_reflections();
        assert_eq!(c.freq_khz, 30.0);
        assert!((c.auv_speed_mps - 2.572).abs() < 1e-12);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = GenSpec::new(15, 4, DeviceCount::Total(190));
        let a = generate_random(&spec, 42).unwrap().to_toml().unwrap();
        let b = generate_random(&spec, 42).unwrap().to_toml().unwrap();
        assert_eq!(a, b);
        let c = generate_random(&spec, 43).unwrap().to_toml().unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn default_totals() {
        let s = generate_random(&GenSpec::default(), 1).unwrap();
        assert_eq!(s.num_groups(), 15);
        assert_eq!(s.num_auvs, 4);
        assert_eq!(s.total_devices(), 190);
    }

    #[test]
    fn sampled_ranges() {
        let s = small();
        for d in s.groups.iter().flat_map(|g| g.devices.iter()) {
            assert!((1e5..=3e5).contains(&d.task.data_bits));
            assert!((1e9..=4e9).contains(&d.cpu_hz));
            assert!((1500.0..=2000.0).contains(&d.task.complexity));
            assert!((10.0..=20.0).contains(&d.time_value));
            assert!((1.0..=2.0).contains(&d.energy_value));
            assert!(d.task.content_id < 30);
        }
        for g in &s.groups {
            for d in &g.devices {
                let off = (d.pos - g.centroid).norm();
                assert!(off <= 50.0 + 1e-9);
            }
        }
    }

    #[test]
    fn toml_round_trip() {
        let s = small();
        let text = s.to_toml().unwrap();
        let back = Scenario::from_toml(&text).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn zero_auvs_rejected() {
        let mut s = small();
        s.num_auvs = 0;
        let text = s.to_toml().unwrap();
        let err = Scenario::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("M ≥ 1"), "{err}");
    }

    #[test]
    fn missing_vortices_mean_still_water() {
        let mut s = small();
        s.vortices.clear();
        let text = s.to_toml().unwrap();
        assert!(!text.contains("[[vortices]]"));
        let back = Scenario::from_toml(&text).unwrap();
        assert!(back.vortices.is_empty());
    }

    #[test]
    fn inconsistent_depth_rejected() {
        let mut s = small();
        s.geometry.device_depth_m = 180.0;
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("H1 = H - h0"));
    }

    #[test]
    fn device_off_plane_rejected() {
        let mut s = small();
        s.groups[0].devices[0].pos.z = 12.0;
        assert!(s.validate().unwrap_err().to_string().contains("device z = h0"));
    }

    #[test]
    fn parse_error_has_line_context() {
        let err = Scenario::from_toml("num_auvs = 2\ngroups = [\n  nope\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn total_split_is_even() {
        let spec = GenSpec::new(4, 1, DeviceCount::Total(10));
        let s = generate_random(&spec, 3).unwrap();
        let counts: Vec<_> = s.groups.iter().map(|g| g.devices.len()).collect();
        assert_eq!(counts, vec![3, 3, 2, 2]);
    }
}
