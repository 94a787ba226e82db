//! Per-user SINR assembly for NGSO 1, NGSO 2 and terrestrial users.
//!
//! A [`Scene`] is a snapshot: satellite positions with their beams, ground
//! users, base stations and the radio configuration. Interference is gathered
//! from the beams that cover a user; whether idle beams count depends on the
//! [`InterferenceMode`].

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{rayleigh_sample, RayleighParams, ShadowedRicianParams, SrSampler, TrafficModel};
use crate::geometry::{
    angle_between_deg, build_coverage_sets, coverage_geometry, distance, elevation_azimuth, sub, BeamRef,
    CoverageSets, GeodeticPoint, Satellite, System, UserClass, UserSet,
};
use crate::outage::{Fading, LinkParams, OutageQuery};
use crate::rf::{free_space_loss, noise_power, pattern_gain, terrestrial_path_gain, AntennaSpec, NoiseSpec};
use crate::{Error, Result};

/// Radio parameters of a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub ngso1_sat_antenna: AntennaSpec,
    pub ngso2_sat_antenna: AntennaSpec,
    pub ngso1_user_antenna: AntennaSpec,
    pub ngso2_user_antenna: AntennaSpec,
    pub noise: NoiseSpec,
    /// Terrestrial path-loss exponent α_t.
    pub path_loss_exponent: f64,
    /// Terrestrial path gain at the 1 km reference distance.
    pub terrestrial_reference_gain: f64,
    /// Count same-color beams of the serving constellation as interferers.
    pub intra_cfi: bool,
    pub satellite_fading: ShadowedRicianParams,
    pub terrestrial_fading: RayleighParams,
}

impl RadioConfig {
    pub fn carrier_hz(&self) -> f64 {
        self.ngso1_sat_antenna.frequency_hz
    }

    fn sat_antenna(&self, system: System) -> &AntennaSpec {
        match system {
            System::Ngso1 => &self.ngso1_sat_antenna,
            System::Ngso2 => &self.ngso2_sat_antenna,
        }
    }

    fn user_antenna(&self, class: UserClass) -> Option<&AntennaSpec> {
        match class {
            UserClass::Ngso1 => Some(&self.ngso1_user_antenna),
            UserClass::Ngso2 => Some(&self.ngso2_user_antenna),
            UserClass::Bs => None,
        }
    }

    pub fn terrestrial_gain(&self, d_km: f64) -> f64 {
        self.terrestrial_reference_gain * terrestrial_path_gain(d_km, self.path_loss_exponent)
    }
}

/// Transmit power per transmitter class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLevels {
    pub ngso1: f64,
    pub ngso2: f64,
    pub bs: f64,
}

impl PowerLevels {
    pub fn get(&self, class: PowerClass) -> f64 {
        match class {
            PowerClass::Ngso1 => self.ngso1,
            PowerClass::Ngso2 => self.ngso2,
            PowerClass::Bs => self.bs,
        }
    }
}

/// Which shared power variable drives a transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PowerClass {
    Ngso1,
    Ngso2,
    Bs,
}

impl PowerClass {
    pub fn index(self) -> usize {
        self as usize
    }

    fn of_system(system: System) -> Self {
        match system {
            System::Ngso1 => PowerClass::Ngso1,
            System::Ngso2 => PowerClass::Ngso2,
        }
    }
}

/// Transmitting end of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Transmitter {
    Sat(System, usize),
    Bs(usize),
}

/// A transmitter → user link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkId {
    pub tx: Transmitter,
    pub class: UserClass,
    pub user: usize,
}

/// Fading power gains `|h|²` per link; links without an entry use `default`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FadingRealization {
    pub values: HashMap<LinkId, f64>,
    pub default: f64,
}

impl FadingRealization {
    /// Every link at unit gain.
    pub fn unit() -> Self {
        FadingRealization {
            values: HashMap::new(),
            default: 1.0,
        }
    }

    pub fn get(&self, link: &LinkId) -> f64 {
        self.values.get(link).copied().unwrap_or(self.default)
    }

    pub fn set(&mut self, link: LinkId, value: f64) {
        self.values.insert(link, value);
    }

    /// Independent draws for every satellite→user and BS→user link of the scene.
    pub fn draw<R: Rng + ?Sized>(scene: &Scene, rng: &mut R) -> Self {
        let sr = SrSampler::new(&scene.radio.satellite_fading);
        let mut out = FadingRealization::unit();
        for link in scene.all_links() {
            let v = match link.tx {
                Transmitter::Sat(..) => sr.sample(rng),
                Transmitter::Bs(_) => rayleigh_sample(&scene.radio.terrestrial_fading, rng),
            };
            out.set(link, v);
        }
        out
    }
}

/// How idle beams enter the interference sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InterferenceMode {
    /// Every enabled beam radiates, whether or not it carries traffic.
    Radiating,
    /// Enabled beams contribute only when their traffic state α is 1.
    TrafficWeighted,
}

/// Components of one user's SINR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrReport {
    pub desired: f64,
    pub interference_ngso: f64,
    pub interference_bs: f64,
    pub noise: f64,
    pub sinr: f64,
}

impl SinrReport {
    fn new(desired: f64, interference_ngso: f64, interference_bs: f64, noise: f64) -> Self {
        SinrReport {
            desired,
            interference_ngso,
            interference_bs,
            noise,
            sinr: desired / (interference_ngso + interference_bs + noise),
        }
    }
}

/// One product term `P · gain · |h|²` of a SINR expression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkTerm {
    pub link: LinkId,
    pub class: PowerClass,
    /// Combined antenna gains and path loss, per watt.
    pub gain: f64,
}

/// The desired link, interferers and noise seen by one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VictimLinks {
    pub desired: LinkTerm,
    pub interferers: Vec<LinkTerm>,
    pub noise_w: f64,
}

/// SINR of one user as a function of the three power variables:
/// `P_d a / (Σ_c P_c i_c + N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrCoefficients {
    pub desired_class: PowerClass,
    pub desired: f64,
    /// Interference per watt for each [`PowerClass`], indexed by `PowerClass::index`.
    pub interference: [f64; 3],
    pub noise: f64,
}

impl SinrCoefficients {
    pub fn sinr(&self, p: [f64; 3]) -> f64 {
        let i: f64 = (0..3).map(|c| p[c] * self.interference[c]).sum();
        p[self.desired_class.index()] * self.desired / (i + self.noise)
    }
}

impl VictimLinks {
    pub fn report(&self, powers: &PowerLevels, fading: &FadingRealization) -> SinrReport {
        let rx = |t: &LinkTerm| powers.get(t.class) * t.gain * fading.get(&t.link);
        let (mut i_ngso, mut i_bs) = (0.0, 0.0);
        for t in &self.interferers {
            match t.link.tx {
                Transmitter::Sat(..) => i_ngso += rx(t),
                Transmitter::Bs(_) => i_bs += rx(t),
            }
        }
        SinrReport::new(rx(&self.desired), i_ngso, i_bs, self.noise_w)
    }

    pub fn coefficients(&self, fading: &FadingRealization) -> SinrCoefficients {
        let mut interference = [0.0; 3];
        for t in &self.interferers {
            interference[t.class.index()] += t.gain * fading.get(&t.link);
        }
        SinrCoefficients {
            desired_class: self.desired.class,
            desired: self.desired.gain * fading.get(&self.desired.link),
            interference,
            noise: self.noise_w,
        }
    }

    /// Outage query with satellite links Shadowed-Rician and terrestrial links Rayleigh.
    pub fn outage_query(
        &self,
        powers: &PowerLevels,
        threshold: f64,
        satellite: ShadowedRicianParams,
        terrestrial: RayleighParams,
    ) -> OutageQuery {
        let params = |t: &LinkTerm| LinkParams {
            power_w: powers.get(t.class),
            gain: t.gain,
            fading: match t.link.tx {
                Transmitter::Sat(..) => Fading::ShadowedRician(satellite),
                Transmitter::Bs(_) => Fading::Rayleigh(terrestrial),
            },
        };
        OutageQuery {
            desired: params(&self.desired),
            ngso_interferers: self
                .interferers
                .iter()
                .filter(|t| matches!(t.link.tx, Transmitter::Sat(..)))
                .map(params)
                .collect(),
            bs_interferers: self
                .interferers
                .iter()
                .filter(|t| matches!(t.link.tx, Transmitter::Bs(_)))
                .map(params)
                .collect(),
            noise_w: self.noise_w,
            threshold,
        }
    }
}

/// A network snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub epoch_s: f64,
    pub radio: RadioConfig,
    pub ngso1: Vec<Satellite>,
    pub ngso2: Vec<Satellite>,
    pub users: UserSet,
    pub base_stations: Vec<GeodeticPoint>,
    pub bs_power_w: f64,
    /// Serving beam of each NGSO 1 user.
    pub serving_ngso1: Vec<Option<BeamRef>>,
    /// Serving beam of each NGSO 2 user.
    pub serving_ngso2: Vec<Option<BeamRef>>,
}

impl Scene {
    /// Builds a scene and assigns each satellite user to the highest-elevation
    /// covering satellite, on the covering beam closest to its axis.
    pub fn new(
        epoch_s: f64,
        radio: RadioConfig,
        ngso1: Vec<Satellite>,
        ngso2: Vec<Satellite>,
        users: UserSet,
        base_stations: Vec<GeodeticPoint>,
        bs_power_w: f64,
    ) -> Self {
        let mut scene = Scene {
            epoch_s,
            radio,
            ngso1,
            ngso2,
            users,
            base_stations,
            bs_power_w,
            serving_ngso1: Vec::new(),
            serving_ngso2: Vec::new(),
        };
        scene.assign_serving();
        scene
    }

    pub fn sats(&self, system: System) -> &[Satellite] {
        match system {
            System::Ngso1 => &self.ngso1,
            System::Ngso2 => &self.ngso2,
        }
    }

    pub fn sats_mut(&mut self, system: System) -> &mut Vec<Satellite> {
        match system {
            System::Ngso1 => &mut self.ngso1,
            System::Ngso2 => &mut self.ngso2,
        }
    }

    pub fn serving(&self, system: System) -> &[Option<BeamRef>] {
        match system {
            System::Ngso1 => &self.serving_ngso1,
            System::Ngso2 => &self.serving_ngso2,
        }
    }

    pub fn serving_mut(&mut self, system: System) -> &mut Vec<Option<BeamRef>> {
        match system {
            System::Ngso1 => &mut self.serving_ngso1,
            System::Ngso2 => &mut self.serving_ngso2,
        }
    }

    pub fn coverage(&self) -> CoverageSets {
        build_coverage_sets(&self.ngso1, &self.ngso2, &self.users)
    }

    /// Recomputes serving beams from scratch and marks them busy.
    pub fn assign_serving(&mut self) {
        let coverage = self.coverage();
        for system in [System::Ngso1, System::Ngso2] {
            let class = user_class(system);
            let n = self.users.of(class).len();
            let mut serving = Vec::with_capacity(n);
            for u in 0..n {
                let user = self.users.of(class)[u];
                let beams = coverage.covering_beams(system, class, u);
                let sats = self.sats(system);
                let best = beams.iter().copied().max_by(|a, b| {
                    let ea = elevation_azimuth(&user, &sats[a.sat].position).0;
                    let eb = elevation_azimuth(&user, &sats[b.sat].position).0;
                    let oa = coverage_geometry(&sats[a.sat].position, &sats[a.sat].beams[a.beam], &user).off_axis_deg;
                    let ob = coverage_geometry(&sats[b.sat].position, &sats[b.sat].beams[b.beam], &user).off_axis_deg;
                    ea.total_cmp(&eb).then(ob.total_cmp(&oa)).then(b.cmp(a))
                });
                serving.push(best);
            }
            *self.serving_mut(system) = serving;
        }
        self.mark_serving_busy();
    }

    fn mark_serving_busy(&mut self) {
        for system in [System::Ngso1, System::Ngso2] {
            let serving: Vec<BeamRef> = self.serving(system).iter().flatten().copied().collect();
            for b in serving {
                let beam = &mut self.sats_mut(system)[b.sat].beams[b.beam];
                beam.traffic = true;
                beam.enabled = true;
            }
        }
    }

    /// Sets every beam's transmit power and the common BS power.
    pub fn set_powers(&mut self, p: &PowerLevels) {
        for sat in &mut self.ngso1 {
            sat.beams.iter_mut().for_each(|b| b.tx_power_w = p.ngso1);
        }
        for sat in &mut self.ngso2 {
            sat.beams.iter_mut().for_each(|b| b.tx_power_w = p.ngso2);
        }
        self.bs_power_w = p.bs;
    }

    /// Current common powers, read from the first beam of each system.
    pub fn powers(&self) -> PowerLevels {
        let first = |sats: &[Satellite]| sats.iter().flat_map(|s| s.beams.first()).map(|b| b.tx_power_w).next();
        PowerLevels {
            ngso1: first(&self.ngso1).unwrap_or(0.0),
            ngso2: first(&self.ngso2).unwrap_or(0.0),
            bs: self.bs_power_w,
        }
    }

    /// Draws α for every beam, then forces serving beams busy.
    pub fn draw_traffic<R: Rng + ?Sized>(&mut self, model: &TrafficModel, rng: &mut R) {
        let p = model.busy_probability();
        for sat in self.ngso1.iter_mut().chain(self.ngso2.iter_mut()) {
            for b in &mut sat.beams {
                b.traffic = rng.random::<f64>() < p;
            }
        }
        self.mark_serving_busy();
    }

    /// Re-enables every beam (the fixed-beam configuration).
    pub fn enable_all_beams(&mut self) {
        for sat in self.ngso1.iter_mut().chain(self.ngso2.iter_mut()) {
            sat.beams.iter_mut().for_each(|b| b.enabled = true);
        }
    }

    /// Nearest base station to BS user `t`, lowest id on ties.
    pub fn serving_bs(&self, t: usize) -> Result<usize> {
        let user = self.users.bs.get(t).ok_or(Error::NoServingBs(t))?.to_ecef();
        self.base_stations
            .iter()
            .enumerate()
            .map(|(i, b)| (i, distance(&b.to_ecef(), &user)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
            .ok_or(Error::NoServingBs(t))
    }

    /// Every satellite→user and BS→user link.
    pub fn all_links(&self) -> Vec<LinkId> {
        let mut links = Vec::new();
        for class in UserClass::ALL {
            for user in 0..self.users.of(class).len() {
                for system in [System::Ngso1, System::Ngso2] {
                    for s in 0..self.sats(system).len() {
                        links.push(LinkId {
                            tx: Transmitter::Sat(system, s),
                            class,
                            user,
                        });
                    }
                }
                for b in 0..self.base_stations.len() {
                    links.push(LinkId {
                        tx: Transmitter::Bs(b),
                        class,
                        user,
                    });
                }
            }
        }
        links
    }

    fn user(&self, class: UserClass, u: usize) -> &GeodeticPoint {
        &self.users.of(class)[u]
    }

    /// Gain-loss product of satellite `sat` towards a user, summed over the
    /// beams in `beams`. `boresight` is the direction the user's dish points at.
    fn sat_gain(
        &self,
        system: System,
        sat: usize,
        beams: &[usize],
        class: UserClass,
        u: usize,
        boresight: Option<[f64; 3]>,
    ) -> f64 {
        let user = self.user(class, u);
        let s = &self.sats(system)[sat];
        let ue = user.to_ecef();
        let to_sat = sub(s.position.to_array(), ue.to_array());
        let tx: f64 = beams
            .iter()
            .map(|&b| {
                let off = coverage_geometry(&s.position, &s.beams[b], user).off_axis_deg;
                pattern_gain(self.radio.sat_antenna(system), off.min(90.0))
            })
            .sum();
        let rx = match (self.radio.user_antenna(class), boresight) {
            (Some(ant), Some(dir)) => pattern_gain(ant, angle_between_deg(dir, to_sat).min(90.0)),
            _ => 1.0,
        };
        let d = distance(&s.position, &ue);
        tx * rx * free_space_loss(d, self.radio.carrier_hz())
    }

    fn bs_gain(&self, bs: usize, class: UserClass, u: usize) -> f64 {
        let d = distance(&self.base_stations[bs].to_ecef(), &self.user(class, u).to_ecef());
        self.radio.terrestrial_gain(d.max(1e-3))
    }

    fn contributing(&self, system: System, refs: &[BeamRef], mode: InterferenceMode) -> Vec<(usize, Vec<usize>)> {
        let mut out: Vec<(usize, Vec<usize>)> = Vec::new();
        for r in refs {
            let beam = &self.sats(system)[r.sat].beams[r.beam];
            if !beam.enabled || (mode == InterferenceMode::TrafficWeighted && !beam.traffic) {
                continue;
            }
            match out.last_mut() {
                Some((s, beams)) if *s == r.sat => beams.push(r.beam),
                _ => out.push((r.sat, vec![r.beam])),
            }
        }
        out
    }

    fn noise(&self) -> f64 {
        noise_power(&self.radio.noise)
    }

    /// Links seen by a satellite user of `system` (NGSO 1 user `k` or NGSO 2 user `j`).
    pub fn sat_user_links(
        &self,
        system: System,
        u: usize,
        coverage: &CoverageSets,
        mode: InterferenceMode,
    ) -> Result<VictimLinks> {
        let class = user_class(system);
        let serving = self
            .serving(system)
            .get(u)
            .copied()
            .flatten()
            .ok_or(Error::NoServingSatellite(u))?;
        let user = self.user(class, u).to_ecef();
        let serving_sat = &self.sats(system)[serving.sat];
        let boresight = sub(serving_sat.position.to_array(), user.to_array());
        let own_class = PowerClass::of_system(system);
        let desired = LinkTerm {
            link: LinkId {
                tx: Transmitter::Sat(system, serving.sat),
                class,
                user: u,
            },
            class: own_class,
            gain: self.sat_gain(system, serving.sat, &[serving.beam], class, u, Some(boresight)),
        };
        let mut interferers = Vec::new();
        let other = system.other();
        for (sat, beams) in self.contributing(other, coverage.covering_beams(other, class, u), mode) {
            interferers.push(LinkTerm {
                link: LinkId {
                    tx: Transmitter::Sat(other, sat),
                    class,
                    user: u,
                },
                class: PowerClass::of_system(other),
                gain: self.sat_gain(other, sat, &beams, class, u, Some(boresight)),
            });
        }
        if self.radio.intra_cfi {
            let color = serving_sat.beams[serving.beam].color;
            let same_color: Vec<BeamRef> = coverage
                .covering_beams(system, class, u)
                .iter()
                .filter(|r| r.sat != serving.sat && self.sats(system)[r.sat].beams[r.beam].color == color)
                .copied()
                .collect();
            for (sat, beams) in self.contributing(system, &same_color, mode) {
                interferers.push(LinkTerm {
                    link: LinkId {
                        tx: Transmitter::Sat(system, sat),
                        class,
                        user: u,
                    },
                    class: own_class,
                    gain: self.sat_gain(system, sat, &beams, class, u, Some(boresight)),
                });
            }
        }
        for bs in 0..self.base_stations.len() {
            interferers.push(LinkTerm {
                link: LinkId {
                    tx: Transmitter::Bs(bs),
                    class,
                    user: u,
                },
                class: PowerClass::Bs,
                gain: self.bs_gain(bs, class, u),
            });
        }
        Ok(VictimLinks {
            desired,
            interferers,
            noise_w: self.noise(),
        })
    }

    /// Links seen by terrestrial user `t`.
    pub fn bs_user_links(&self, t: usize, coverage: &CoverageSets, mode: InterferenceMode) -> Result<VictimLinks> {
        let serving = self.serving_bs(t)?;
        let class = UserClass::Bs;
        let desired = LinkTerm {
            link: LinkId {
                tx: Transmitter::Bs(serving),
                class,
                user: t,
            },
            class: PowerClass::Bs,
            gain: self.bs_gain(serving, class, t),
        };
        let mut interferers = Vec::new();
        for system in [System::Ngso1, System::Ngso2] {
            for (sat, beams) in self.contributing(system, coverage.covering_beams(system, class, t), mode) {
                interferers.push(LinkTerm {
                    link: LinkId {
                        tx: Transmitter::Sat(system, sat),
                        class,
                        user: t,
                    },
                    class: PowerClass::of_system(system),
                    gain: self.sat_gain(system, sat, &beams, class, t, None),
                });
            }
        }
        for bs in (0..self.base_stations.len()).filter(|&b| b != serving) {
            interferers.push(LinkTerm {
                link: LinkId {
                    tx: Transmitter::Bs(bs),
                    class,
                    user: t,
                },
                class: PowerClass::Bs,
                gain: self.bs_gain(bs, class, t),
            });
        }
        Ok(VictimLinks {
            desired,
            interferers,
            noise_w: self.noise(),
        })
    }

    /// Links for any user class.
    pub fn user_links(&self, class: UserClass, u: usize, coverage: &CoverageSets, mode: InterferenceMode) -> Result<VictimLinks> {
        match class {
            UserClass::Ngso1 => self.sat_user_links(System::Ngso1, u, coverage, mode),
            UserClass::Ngso2 => self.sat_user_links(System::Ngso2, u, coverage, mode),
            UserClass::Bs => self.bs_user_links(u, coverage, mode),
        }
    }
}

/// The user class served by a constellation.
pub fn user_class(system: System) -> UserClass {
    match system {
        System::Ngso1 => UserClass::Ngso1,
        System::Ngso2 => UserClass::Ngso2,
    }
}

/// SINR of NGSO 1 user `k` with traffic-weighted interferers.
pub fn sinr_ngso1_user(scene: &Scene, k: usize, fading: &FadingRealization) -> Result<SinrReport> {
    sinr_user(scene, UserClass::Ngso1, k, fading, InterferenceMode::TrafficWeighted)
}

/// SINR of NGSO 2 user `j` with traffic-weighted interferers.
pub fn sinr_ngso2_user(scene: &Scene, j: usize, fading: &FadingRealization) -> Result<SinrReport> {
    sinr_user(scene, UserClass::Ngso2, j, fading, InterferenceMode::TrafficWeighted)
}

/// SINR of terrestrial user `t` with traffic-weighted interferers.
pub fn sinr_bs_user(scene: &Scene, t: usize, fading: &FadingRealization) -> Result<SinrReport> {
    sinr_user(scene, UserClass::Bs, t, fading, InterferenceMode::TrafficWeighted)
}

/// SINR of any user under the given interference mode.
pub fn sinr_user(
    scene: &Scene,
    class: UserClass,
    u: usize,
    fading: &FadingRealization,
    mode: InterferenceMode,
) -> Result<SinrReport> {
    let coverage = scene.coverage();
    let links = scene.user_links(class, u, &coverage, mode)?;
    Ok(links.report(&scene.powers(), fading))
}

/// Shannon rate `B log2(1 + SINR)` in bit/s.
pub fn shannon_rate(bandwidth_hz: f64, sinr: f64) -> f64 {
    bandwidth_hz * (1.0 + sinr).log2()
}

/// Rate of every NGSO 1 user; users without a serving satellite get 0.
pub fn snapshot_throughput(scene: &Scene, fading: &FadingRealization) -> Vec<f64> {
    let coverage = scene.coverage();
    let powers = scene.powers();
    (0..scene.users.ngso1.len())
        .map(|k| {
            scene
                .sat_user_links(System::Ngso1, k, &coverage, InterferenceMode::TrafficWeighted)
                .map(|l| {
                    let b = scene.serving_ngso1[k].map(|r| scene.ngso1[r.sat].beams[r.beam].bandwidth_hz);
                    shannon_rate(b.unwrap_or(scene.radio.noise.bandwidth_hz), l.report(&powers, fading).sinr)
                })
                .unwrap_or(0.0)
        })
        .collect()
}
