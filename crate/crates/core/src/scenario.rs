//! Scenario files: JSON descriptions of constellations, users, radio and
//! learning parameters, with defaults for every field except the users.
//!
//! Every block is optional. Unknown keys are rejected, and errors carry the
//! JSON path of the offending field together with the line and column.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::allocation::{AllocatorConfig, CsiSynthesizer, PredictorConfig};
use crate::channel::{RayleighParams, ShadowedRicianParams, TrafficModel};
use crate::geometry::{constellation_snapshot, ConstellationConfig, FrequencyReuse, GeodeticPoint, UserSet};
use crate::link::{PowerLevels, RadioConfig, Scene};
use crate::rf::{free_space_loss, AntennaSpec, NoiseSpec};
use crate::{db_to_linear, Error, Result};

/// Constellation block as written in a file; missing fields take the
/// defaults of the system it describes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstellationBlock {
    pub name: Option<String>,
    pub num_planes: Option<usize>,
    pub sats_per_plane: Option<usize>,
    pub altitude_km: Option<f64>,
    pub inclination_deg: Option<f64>,
    pub phasing: Option<usize>,
    pub beams_per_sat: Option<usize>,
    pub beam_half_angle_deg: Option<f64>,
    pub frequency_reuse: Option<FrequencyReuse>,
}

impl ConstellationBlock {
    fn resolve(&self, defaults: ConstellationConfig) -> ConstellationConfig {
        ConstellationConfig {
            name: self.name.clone().unwrap_or(defaults.name),
            num_planes: self.num_planes.unwrap_or(defaults.num_planes),
            sats_per_plane: self.sats_per_plane.unwrap_or(defaults.sats_per_plane),
            altitude_km: self.altitude_km.unwrap_or(defaults.altitude_km),
            inclination_deg: self.inclination_deg.unwrap_or(defaults.inclination_deg),
            phasing: self.phasing.unwrap_or(defaults.phasing),
            beams_per_sat: self.beams_per_sat.unwrap_or(defaults.beams_per_sat),
            beam_half_angle_deg: self.beam_half_angle_deg.unwrap_or(defaults.beam_half_angle_deg),
            frequency_reuse: self.frequency_reuse.unwrap_or(defaults.frequency_reuse),
        }
    }
}

/// Reduced NGSO 1 shell: 24 satellites at 500 km.
pub fn default_ngso1() -> ConstellationConfig {
    ConstellationConfig {
        name: "NGSO 1".into(),
        num_planes: 4,
        sats_per_plane: 6,
        altitude_km: 500.0,
        inclination_deg: 53.0,
        phasing: 1,
        beams_per_sat: 7,
        beam_half_angle_deg: 7.5,
        frequency_reuse: FrequencyReuse::Fr4,
    }
}

/// Reduced NGSO 2 shell: 36 satellites at 550 km.
pub fn default_ngso2() -> ConstellationConfig {
    ConstellationConfig {
        name: "NGSO 2".into(),
        num_planes: 6,
        sats_per_plane: 6,
        altitude_km: 550.0,
        inclination_deg: 53.0,
        phasing: 1,
        beams_per_sat: 7,
        beam_half_angle_deg: 7.5,
        frequency_reuse: FrequencyReuse::Fr4,
    }
}

/// Carrier, noise and antenna parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioBlock {
    pub frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub temperature_k: f64,
    pub sat_antenna_diameter_m: f64,
    pub user_antenna_diameter_m: f64,
    pub antenna_efficiency: f64,
    /// Terrestrial path-loss exponent α_t.
    pub path_loss_exponent: f64,
    /// Count same-color beams of the serving constellation as interferers.
    pub intra_cfi: bool,
}

impl Default for RadioBlock {
    fn default() -> Self {
        RadioBlock {
            frequency_hz: 17.9e9,
            bandwidth_hz: 125e6,
            temperature_k: 290.0,
            sat_antenna_diameter_m: 0.4,
            user_antenna_diameter_m: 0.6,
            antenna_efficiency: 0.55,
            path_loss_exponent: 3.5,
            intra_cfi: false,
        }
    }
}

/// Fading statistics and slot-to-slot correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FadingBlock {
    pub satellite: ShadowedRicianParams,
    pub terrestrial: RayleighParams,
    /// Correlation of the Gaussian processes between consecutive slots.
    pub correlation: f64,
}

impl Default for FadingBlock {
    fn default() -> Self {
        FadingBlock {
            satellite: ShadowedRicianParams::standard(),
            terrestrial: RayleighParams::standard(),
            correlation: 0.9995,
        }
    }
}

/// Maximum transmit powers, W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerBlock {
    pub ngso1_max_w: f64,
    pub ngso2_max_w: f64,
    pub bs_max_w: f64,
}

impl Default for PowerBlock {
    fn default() -> Self {
        PowerBlock {
            ngso1_max_w: 5.0,
            ngso2_max_w: 5.0,
            bs_max_w: 5.0,
        }
    }
}

impl PowerBlock {
    pub fn as_array(&self) -> [f64; 3] {
        [self.ngso1_max_w, self.ngso2_max_w, self.bs_max_w]
    }

    pub fn levels(&self) -> PowerLevels {
        PowerLevels {
            ngso1: self.ngso1_max_w,
            ngso2: self.ngso2_max_w,
            bs: self.bs_max_w,
        }
    }
}

/// Experiment sizes and sweep grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationBlock {
    /// Evaluation slots per seed.
    pub eval_slots: usize,
    /// Slots of fading history used to train the CSI predictor.
    pub history_slots: usize,
    /// Slots used to train the Q-network.
    pub train_slots: usize,
    /// Maximum-power grid for the power sweeps, W.
    pub pmax_grid_w: Vec<f64>,
    /// Threshold grid for outage sweeps, dB.
    pub phi_grid_db: Vec<f64>,
    /// Monte Carlo replicas for outage estimates.
    pub monte_carlo_replicas: u64,
    /// Epoch spacing of the C/(I+N) time series, s.
    pub timeseries_step_s: f64,
    pub timeseries_epochs: usize,
}

impl Default for SimulationBlock {
    fn default() -> Self {
        SimulationBlock {
            eval_slots: 200,
            history_slots: 512,
            train_slots: 100,
            pmax_grid_w: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            phi_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            monte_carlo_replicas: 1_000_000,
            timeseries_step_s: 10.0,
            timeseries_epochs: 60,
        }
    }
}

fn default_traffic() -> TrafficModel {
    TrafficModel {
        arrival_rate: 500.0,
        slot_duration_s: 1e-3,
    }
}

fn default_name() -> String {
    "scenario".into()
}

fn default_phi() -> f64 {
    10.0
}

fn default_cfez() -> f64 {
    crate::geometry::DEFAULT_CFEZ_DEG
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default = "default_name")]
    name: String,
    #[serde(default)]
    epoch_s: f64,
    #[serde(default)]
    ngso1: Option<ConstellationBlock>,
    #[serde(default)]
    ngso2: Option<ConstellationBlock>,
    #[serde(default)]
    radio: RadioBlock,
    #[serde(default)]
    fading: FadingBlock,
    #[serde(default)]
    power: PowerBlock,
    #[serde(default = "default_phi")]
    phi_th_db: f64,
    #[serde(default = "default_cfez")]
    cfez_deg: f64,
    #[serde(default = "default_traffic")]
    traffic: TrafficModel,
    #[serde(default)]
    users: UserSet,
    #[serde(default)]
    base_stations: Vec<GeodeticPoint>,
    #[serde(default)]
    allocator: AllocatorConfig,
    #[serde(default)]
    predictor: PredictorConfig,
    #[serde(default)]
    simulation: SimulationBlock,
}

/// A validated scenario with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub epoch_s: f64,
    pub ngso1: Option<ConstellationConfig>,
    pub ngso2: Option<ConstellationConfig>,
    pub radio: RadioBlock,
    pub fading: FadingBlock,
    pub power: PowerBlock,
    pub phi_th_db: f64,
    pub cfez_deg: f64,
    pub traffic: TrafficModel,
    pub users: UserSet,
    pub base_stations: Vec<GeodeticPoint>,
    pub allocator: AllocatorConfig,
    pub predictor: PredictorConfig,
    pub simulation: SimulationBlock,
}

/// A parsed scenario and non-fatal remarks about it.
#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    pub scenario: Scenario,
    pub warnings: Vec<String>,
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be positive and finite, got {v}")))
    }
}

fn in_config(prefix: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => Error::config(format!("{prefix}.{field}"), reason),
        other => Error::config(prefix, other.to_string()),
    }
}

impl Scenario {
    /// Parses and validates scenario JSON.
    pub fn from_json_str(text: &str) -> Result<Validated> {
        let mut de = serde_json::Deserializer::from_str(text);
        let file: ScenarioFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path.is_empty() { ".".into() } else { path }, e.into_inner().to_string())
        })?;
        let scenario = Scenario {
            name: file.name,
            epoch_s: file.epoch_s,
            ngso1: file.ngso1.map(|b| b.resolve(default_ngso1())),
            ngso2: file.ngso2.map(|b| b.resolve(default_ngso2())),
            radio: file.radio,
            fading: file.fading,
            power: file.power,
            phi_th_db: file.phi_th_db,
            cfez_deg: file.cfez_deg,
            traffic: file.traffic,
            users: file.users,
            base_stations: file.base_stations,
            allocator: file.allocator,
            predictor: file.predictor,
            simulation: file.simulation,
        };
        let warnings = scenario.validate()?;
        Ok(Validated { scenario, warnings })
    }

    /// Reads and validates a scenario file.
    pub fn load(path: &Path) -> Result<Validated> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// Checks every field; returns warnings for suspicious but usable values.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if self.ngso1.is_none() && self.ngso2.is_none() {
            return Err(Error::config("ngso1", "at least one constellation block is required"));
        }
        for (key, c) in [("ngso1", &self.ngso1), ("ngso2", &self.ngso2)] {
            if let Some(c) = c {
                c.validate().map_err(|e| in_config(key, e))?;
            }
        }
        if !self.epoch_s.is_finite() {
            return Err(Error::config("epoch_s", "must be finite"));
        }
        let r = &self.radio;
        positive("radio.frequency_hz", r.frequency_hz)?;
        positive("radio.bandwidth_hz", r.bandwidth_hz)?;
        positive("radio.temperature_k", r.temperature_k)?;
        positive("radio.sat_antenna_diameter_m", r.sat_antenna_diameter_m)?;
        positive("radio.user_antenna_diameter_m", r.user_antenna_diameter_m)?;
        positive("radio.path_loss_exponent", r.path_loss_exponent)?;
        if !(r.antenna_efficiency > 0.0 && r.antenna_efficiency <= 1.0) {
            return Err(Error::config("radio.antenna_efficiency", "must be in (0, 1]"));
        }
        self.fading.satellite.validate().map_err(|e| in_config("fading.satellite", e))?;
        positive("fading.terrestrial.mean_power", self.fading.terrestrial.mean_power)?;
        if !(0.0..1.0).contains(&self.fading.correlation) {
            return Err(Error::config("fading.correlation", "must be in [0, 1)"));
        }
        if self.fading.satellite.m.fract() != 0.0 {
            warnings.push(format!(
                "fading.satellite.m = {} is not an integer; analytic outage methods use m = {}",
                self.fading.satellite.m,
                self.fading.satellite.m.round()
            ));
        }
        for (path, v) in [
            ("power.ngso1_max_w", self.power.ngso1_max_w),
            ("power.ngso2_max_w", self.power.ngso2_max_w),
            ("power.bs_max_w", self.power.bs_max_w),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(path, "must be finite and >= 0"));
            }
        }
        if !self.phi_th_db.is_finite() {
            return Err(Error::config("phi_th_db", "must be finite"));
        }
        if !(self.cfez_deg > 0.0 && self.cfez_deg <= 180.0) {
            return Err(Error::config("cfez_deg", "must be in (0, 180]"));
        }
        if !(self.traffic.arrival_rate >= 0.0) {
            return Err(Error::config("traffic.arrival_rate", "must be >= 0"));
        }
        positive("traffic.slot_duration_s", self.traffic.slot_duration_s)?;
        if self.users.ngso1.is_empty() && self.users.ngso2.is_empty() && self.users.bs.is_empty() {
            return Err(Error::config("users", "at least one user is required"));
        }
        if !self.users.bs.is_empty() && self.base_stations.is_empty() {
            return Err(Error::config("base_stations", "terrestrial users need at least one base station"));
        }
        if !self.users.ngso1.is_empty() && self.ngso1.is_none() {
            warnings.push("users.ngso1 is set but there is no ngso1 constellation".into());
        }
        if !self.users.ngso2.is_empty() && self.ngso2.is_none() {
            warnings.push("users.ngso2 is set but there is no ngso2 constellation".into());
        }
        let a = &self.allocator;
        if a.levels < 2 {
            return Err(Error::config("allocator.levels", "must be at least 2"));
        }
        if !(0.0..=1.0).contains(&a.epsilon) {
            return Err(Error::config("allocator.epsilon", "must be in [0, 1]"));
        }
        if a.dqn.fc_widths.is_empty() || a.dqn.fc_widths.contains(&0) {
            return Err(Error::config("allocator.dqn.fc_widths", "widths must be positive"));
        }
        if a.dqn.batch_size == 0 || a.dqn.replay_capacity < a.dqn.batch_size {
            return Err(Error::config("allocator.dqn.batch_size", "must be positive and at most replay_capacity"));
        }
        self.predictor.validate().map_err(|e| in_config("predictor", e))?;
        let s = &self.simulation;
        if s.pmax_grid_w.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::config("simulation.pmax_grid_w", "entries must be positive"));
        }
        if s.phi_grid_db.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::config("simulation.phi_grid_db", "must be ascending"));
        }
        if s.history_slots < self.predictor.min_series_len() + self.predictor.folds {
            return Err(Error::config(
                "simulation.history_slots",
                format!("must be at least {}", self.predictor.min_series_len() + self.predictor.folds),
            ));
        }
        Ok(warnings)
    }

    /// The same scenario with full-size constellations
    /// (648 = 36 × 18 and 1584 = 72 × 22 satellites).
    pub fn at_full_scale(&self) -> Scenario {
        let mut s = self.clone();
        if let Some(c) = &mut s.ngso1 {
            c.num_planes = 36;
            c.sats_per_plane = 18;
            c.phasing = c.phasing.min(35);
        }
        if let Some(c) = &mut s.ngso2 {
            c.num_planes = 72;
            c.sats_per_plane = 22;
            c.phasing = c.phasing.min(71);
        }
        s
    }

    /// Linear SINR threshold φ_th.
    pub fn phi_th(&self) -> f64 {
        db_to_linear(self.phi_th_db)
    }

    pub fn radio_config(&self) -> RadioConfig {
        let r = &self.radio;
        let sat = |c: &Option<ConstellationConfig>| AntennaSpec {
            diameter_m: r.sat_antenna_diameter_m,
            efficiency: r.antenna_efficiency,
            frequency_hz: r.frequency_hz,
            theta_3db_deg: c.as_ref().map(|c| c.beam_half_angle_deg).unwrap_or(7.5),
        };
        let user = AntennaSpec {
            diameter_m: r.user_antenna_diameter_m,
            efficiency: r.antenna_efficiency,
            frequency_hz: r.frequency_hz,
            theta_3db_deg: AntennaSpec::nominal_theta_3db_deg(r.user_antenna_diameter_m, r.frequency_hz),
        };
        RadioConfig {
            ngso1_sat_antenna: sat(&self.ngso1),
            ngso2_sat_antenna: sat(&self.ngso2),
            ngso1_user_antenna: user,
            ngso2_user_antenna: user,
            noise: NoiseSpec::new(r.bandwidth_hz, r.temperature_k),
            path_loss_exponent: r.path_loss_exponent,
            terrestrial_reference_gain: free_space_loss(1.0, r.frequency_hz),
            intra_cfi: r.intra_cfi,
            satellite_fading: self.fading.satellite,
            terrestrial_fading: self.fading.terrestrial,
        }
    }

    /// Snapshot at `epoch_s` with every transmitter at its maximum power and
    /// all beams enabled.
    pub fn scene(&self, epoch_s: f64) -> Scene {
        let b = self.radio.bandwidth_hz;
        let build = |c: &Option<ConstellationConfig>, p: f64| {
            c.as_ref()
                .map(|c| constellation_snapshot(c, epoch_s, b, p))
                .unwrap_or_default()
        };
        Scene::new(
            epoch_s,
            self.radio_config(),
            build(&self.ngso1, self.power.ngso1_max_w),
            build(&self.ngso2, self.power.ngso2_max_w),
            self.users.clone(),
            self.base_stations.clone(),
            self.power.bs_max_w,
        )
    }

    /// Snapshot at the scenario epoch.
    pub fn reference_scene(&self) -> Scene {
        self.scene(self.epoch_s)
    }

    pub fn csi_synthesizer(&self) -> CsiSynthesizer {
        CsiSynthesizer {
            correlation: self.fading.correlation,
            satellite: self.fading.satellite,
            terrestrial: self.fading.terrestrial,
        }
    }

    /// Normalised JSON with every default written out.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }
}
