//! Spherical-Earth geometry: coordinate transforms, Walker-delta constellations,
//! multibeam layouts, the beam coverage test and the co-frequency exclusion zone.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Earth radius in km.
pub const EARTH_RADIUS_KM: f64 = 6370.0;
/// Standard gravitational parameter of the Earth, km³/s².
pub const EARTH_MU_KM3_S2: f64 = 398_600.4418;
/// Sidereal rotation rate of the Earth, rad/s.
pub const EARTH_ROTATION_RAD_S: f64 = 7.292_115_146_706_979e-5;
/// Default co-frequency exclusion zone angle, degrees.
pub const DEFAULT_CFEZ_DEG: f64 = 5.0;

// Slack on the inclusive coverage boundaries so that points constructed exactly
// on the cone edge are not lost to rounding.
const ANGLE_SLACK_DEG: f64 = 1e-9;
const DISTANCE_SLACK_KM: f64 = 1e-9;

pub type Vec3 = [f64; 3];

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn unit(a: Vec3) -> Vec3 {
    let n = norm(a);
    scale(a, 1.0 / n)
}

/// Angle between two vectors in degrees, robust for nearly parallel inputs.
pub fn angle_between_deg(a: Vec3, b: Vec3) -> f64 {
    norm(cross(a, b)).atan2(dot(a, b)).to_degrees()
}

/// Latitude/longitude in degrees and altitude in km above the spherical Earth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeodetic", into = "RawGeodetic")]
pub struct GeodeticPoint {
    lat: f64,
    lon: f64,
    alt: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeodetic {
    lat: f64,
    lon: f64,
    #[serde(default)]
    alt: f64,
}

impl TryFrom<RawGeodetic> for GeodeticPoint {
    type Error = Error;

    fn try_from(r: RawGeodetic) -> Result<Self> {
        GeodeticPoint::new(r.lat, r.lon, r.alt)
    }
}

impl From<GeodeticPoint> for RawGeodetic {
    fn from(p: GeodeticPoint) -> Self {
        RawGeodetic {
            lat: p.lat,
            lon: p.lon,
            alt: p.alt,
        }
    }
}

impl GeodeticPoint {
    /// Validates `lat ∈ [−90, 90]`, `lon ∈ (−180, 180]` and a finite `alt ≥ 0`.
    pub fn new(lat: f64, lon: f64, alt: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) {
            return Err(Error::invalid("lat", format!("{lat} outside [-90, 90]")));
        }
        if !(lon > -180.0 && lon <= 180.0) {
            return Err(Error::invalid("lon", format!("{lon} outside (-180, 180]")));
        }
        if !alt.is_finite() || alt < 0.0 {
            return Err(Error::invalid("alt", format!("{alt} must be finite and >= 0")));
        }
        Ok(GeodeticPoint { lat, lon, alt })
    }

    /// Ground point with longitude wrapped into `(−180, 180]`.
    pub fn ground(lat: f64, lon: f64) -> Result<Self> {
        GeodeticPoint::new(lat, wrap_lon(lon), 0.0)
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    pub fn alt(&self) -> f64 {
        self.alt
    }

    pub fn to_ecef(&self) -> EcefPoint {
        geodetic_to_ecef(self, EARTH_RADIUS_KM)
    }
}

/// Wraps a longitude in degrees into `(−180, 180]`.
pub fn wrap_lon(lon: f64) -> f64 {
    let mut l = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if l <= -180.0 {
        l += 360.0;
    }
    l
}

/// Earth-centred Earth-fixed Cartesian position in km.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcefPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EcefPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        EcefPoint { x, y, z }
    }

    pub fn from_array(v: Vec3) -> Self {
        EcefPoint::new(v[0], v[1], v[2])
    }

    pub fn to_array(self) -> Vec3 {
        [self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        norm(self.to_array())
    }
}

pub fn geodetic_to_ecef(p: &GeodeticPoint, earth_radius_km: f64) -> EcefPoint {
    let r = earth_radius_km + p.alt;
    let (lat, lon) = (p.lat.to_radians(), p.lon.to_radians());
    EcefPoint::new(
        r * lat.cos() * lon.cos(),
        r * lat.cos() * lon.sin(),
        r * lat.sin(),
    )
}

/// Inverse of [`geodetic_to_ecef`]. Fails for points below the surface.
pub fn ecef_to_geodetic(e: &EcefPoint, earth_radius_km: f64) -> Result<GeodeticPoint> {
    let r = e.norm();
    let mut alt = r - earth_radius_km;
    if alt < 0.0 && alt > -1e-9 {
        alt = 0.0;
    }
    if alt < 0.0 {
        return Err(Error::invalid("ecef", format!("point {r} km from centre is below the surface")));
    }
    let lat = e.z.atan2(e.x.hypot(e.y)).to_degrees();
    let lon = if e.x == 0.0 && e.y == 0.0 {
        0.0
    } else {
        wrap_lon(e.y.atan2(e.x).to_degrees())
    };
    GeodeticPoint::new(lat, lon, alt)
}

pub fn distance(a: &EcefPoint, b: &EcefPoint) -> f64 {
    norm(sub(a.to_array(), b.to_array()))
}

/// Multibeam frequency reuse pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrequencyReuse {
    #[serde(rename = "FR1")]
    Fr1,
    #[serde(rename = "FR4")]
    Fr4,
    #[serde(rename = "FR7")]
    Fr7,
}

impl FrequencyReuse {
    pub fn colors(self) -> u8 {
        match self {
            FrequencyReuse::Fr1 => 1,
            FrequencyReuse::Fr4 => 4,
            FrequencyReuse::Fr7 => 7,
        }
    }
}

/// Walker-delta constellation and its per-satellite beam layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstellationConfig {
    pub name: String,
    pub num_planes: usize,
    pub sats_per_plane: usize,
    pub altitude_km: f64,
    pub inclination_deg: f64,
    pub phasing: usize,
    pub beams_per_sat: usize,
    /// Half of the beamwidth θ^BW, degrees.
    pub beam_half_angle_deg: f64,
    pub frequency_reuse: FrequencyReuse,
}

impl ConstellationConfig {
    pub fn total(&self) -> usize {
        self.num_planes * self.sats_per_plane
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_planes == 0 || self.sats_per_plane == 0 {
            return Err(Error::invalid("num_planes/sats_per_plane", "must be positive"));
        }
        if !(self.altitude_km > 0.0 && self.altitude_km.is_finite()) {
            return Err(Error::invalid("altitude_km", "must be positive"));
        }
        if !(0.0..=180.0).contains(&self.inclination_deg) {
            return Err(Error::invalid("inclination_deg", "must be in [0, 180]"));
        }
        if !(self.beam_half_angle_deg > 0.0 && self.beam_half_angle_deg <= 90.0) {
            return Err(Error::invalid(
                "beam_half_angle_deg",
                format!("{} gives a beamwidth outside (0, 180]", self.beam_half_angle_deg),
            ));
        }
        if self.beams_per_sat == 0 {
            return Err(Error::invalid("beams_per_sat", "must be positive"));
        }
        if self.phasing >= self.num_planes.max(1) && self.num_planes > 1 {
            return Err(Error::invalid("phasing", "must be below num_planes"));
        }
        Ok(())
    }

    pub fn orbit_radius_km(&self) -> f64 {
        EARTH_RADIUS_KM + self.altitude_km
    }

    /// Mean motion in rad/s.
    pub fn mean_motion(&self) -> f64 {
        (EARTH_MU_KM3_S2 / self.orbit_radius_km().powi(3)).sqrt()
    }
}

/// Satellite positions of a circular Walker-delta constellation at `epoch_s`,
/// in the Earth-fixed frame (Earth rotation applied from epoch 0).
pub fn walker_constellation(cfg: &ConstellationConfig, epoch_s: f64) -> Vec<(usize, EcefPoint)> {
    let a = cfg.orbit_radius_km();
    let n = cfg.mean_motion();
    let inc = cfg.inclination_deg.to_radians();
    let total = cfg.total() as f64;
    let theta = EARTH_ROTATION_RAD_S * epoch_s;
    let (st, ct) = theta.sin_cos();
    let mut out = Vec::with_capacity(cfg.total());
    for p in 0..cfg.num_planes {
        let raan = std::f64::consts::TAU * p as f64 / cfg.num_planes as f64;
        let (so, co) = raan.sin_cos();
        for s in 0..cfg.sats_per_plane {
            let u = std::f64::consts::TAU * s as f64 / cfg.sats_per_plane as f64
                + std::f64::consts::TAU * (cfg.phasing * p) as f64 / total
                + n * epoch_s;
            let (su, cu) = u.sin_cos();
            let x = a * (cu * co - su * inc.cos() * so);
            let y = a * (cu * so + su * inc.cos() * co);
            let z = a * su * inc.sin();
            out.push((
                p * cfg.sats_per_plane + s,
                EcefPoint::new(x * ct + y * st, -x * st + y * ct, z),
            ));
        }
    }
    out
}

/// One satellite beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beam {
    pub owner_sat: usize,
    /// Unit vector of the beam axis, Earth-fixed frame.
    pub center_direction: Vec3,
    pub half_angle_deg: f64,
    pub bandwidth_hz: f64,
    pub color: u8,
    /// Traffic state α: true when the beam carries traffic in this slot.
    pub traffic: bool,
    /// False once the beam has been shut off.
    pub enabled: bool,
    pub tx_power_w: f64,
}

impl Beam {
    /// Re-points the beam axis at `target`.
    pub fn point_at(&mut self, sat: &EcefPoint, target: &EcefPoint) {
        self.center_direction = unit(sub(target.to_array(), sat.to_array()));
    }

    /// Ground point hit by the beam axis, if the axis intersects the Earth.
    pub fn ground_center(&self, sat: &EcefPoint) -> Option<GeodeticPoint> {
        let s = sat.to_array();
        let d = self.center_direction;
        let b = dot(s, d);
        let c = dot(s, s) - EARTH_RADIUS_KM * EARTH_RADIUS_KM;
        let disc = b * b - c;
        if disc < 0.0 {
            return None;
        }
        let t = -b - disc.sqrt();
        if t <= 0.0 {
            return None;
        }
        let p = add(s, scale(d, t));
        let g = ecef_to_geodetic(&EcefPoint::from_array(p), EARTH_RADIUS_KM).ok()?;
        GeodeticPoint::new(g.lat(), g.lon(), 0.0).ok()
    }
}

/// A satellite at a snapshot epoch together with its beams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Satellite {
    pub id: usize,
    pub position: EcefPoint,
    pub beams: Vec<Beam>,
}

/// Hexagonal beam layout around nadir: beam 0 at nadir, then rings of 6, 12, …
/// beams whose axes are tilted by multiples of √3 half-angles so that
/// neighbouring footprints overlap without gaps.
pub fn hex_beam_layout(
    owner_sat: usize,
    sat: &EcefPoint,
    cfg: &ConstellationConfig,
    bandwidth_hz: f64,
    tx_power_w: f64,
) -> Vec<Beam> {
    let s = sat.to_array();
    let nadir = scale(unit(s), -1.0);
    let reference = if cross([0.0, 0.0, 1.0], s).iter().all(|c| c.abs() < 1e-12) {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let e1 = unit(cross(reference, s));
    let e2 = cross(nadir, e1);
    let spacing = 3f64.sqrt() * cfg.beam_half_angle_deg;
    let colors = cfg.frequency_reuse.colors();
    let mut beams = Vec::with_capacity(cfg.beams_per_sat);
    let mut ring = 0usize;
    let mut slot = 0usize;
    for idx in 0..cfg.beams_per_sat {
        let dir = if ring == 0 {
            nadir
        } else {
            let tilt = (spacing * ring as f64).min(89.0).to_radians();
            let az = std::f64::consts::TAU * slot as f64 / (6 * ring) as f64;
            let side = add(scale(e1, az.cos()), scale(e2, az.sin()));
            unit(add(scale(nadir, tilt.cos()), scale(side, tilt.sin())))
        };
        beams.push(Beam {
            owner_sat,
            center_direction: dir,
            half_angle_deg: cfg.beam_half_angle_deg,
            bandwidth_hz,
            color: (idx % colors as usize) as u8,
            traffic: false,
            enabled: true,
            tx_power_w,
        });
        if ring == 0 {
            ring = 1;
            slot = 0;
        } else {
            slot += 1;
            if slot == 6 * ring {
                ring += 1;
                slot = 0;
            }
        }
    }
    beams
}

/// Builds the satellites of a constellation at `epoch_s` with their beams.
pub fn constellation_snapshot(
    cfg: &ConstellationConfig,
    epoch_s: f64,
    bandwidth_hz: f64,
    tx_power_w: f64,
) -> Vec<Satellite> {
    walker_constellation(cfg, epoch_s)
        .into_iter()
        .map(|(id, position)| Satellite {
            id,
            position,
            beams: hex_beam_layout(id, &position, cfg, bandwidth_hz, tx_power_w),
        })
        .collect()
}

fn enu_basis(user: &GeodeticPoint) -> (Vec3, Vec3, Vec3) {
    let (lat, lon) = (user.lat.to_radians(), user.lon.to_radians());
    let east = [-lon.sin(), lon.cos(), 0.0];
    let north = [-lat.sin() * lon.cos(), -lat.sin() * lon.sin(), lat.cos()];
    let up = [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()];
    (east, north, up)
}

/// Elevation and azimuth (degrees, azimuth clockwise from north) of `sat` seen
/// from `user`. At the zenith the azimuth is undefined and reported as 0.
pub fn elevation_azimuth(user: &GeodeticPoint, sat: &EcefPoint) -> (f64, f64) {
    let u = user.to_ecef().to_array();
    let los = sub(sat.to_array(), u);
    let range = norm(los);
    let (east, north, up) = enu_basis(user);
    let el = (dot(los, up) / range).clamp(-1.0, 1.0).asin().to_degrees();
    let (e, n) = (dot(los, east), dot(los, north));
    let horizontal = (e * e + n * n).sqrt();
    let az = if horizontal <= 1e-12 * range {
        0.0
    } else {
        e.atan2(n).to_degrees()
    };
    (el, az)
}

/// The quantities entering the coverage condition for one (satellite, beam, user).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageGeometry {
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub distance_km: f64,
    pub d_max_km: f64,
    pub off_axis_deg: f64,
}

impl CoverageGeometry {
    /// All four clauses: positive elevation, azimuth in range, slant range
    /// within the beam border and off-axis angle within the half-beamwidth.
    pub fn covers(&self, half_angle_deg: f64) -> bool {
        self.elevation_deg > 0.0
            && (-180.0..=180.0).contains(&self.azimuth_deg)
            && self.distance_km <= self.d_max_km + DISTANCE_SLACK_KM
            && self.off_axis_deg <= half_angle_deg + ANGLE_SLACK_DEG
    }
}

/// Slant range from the satellite to the farthest point of the beam border on a
/// sphere of radius `rho_km`, or the horizon distance when that edge misses.
pub fn beam_border_range(sat: &EcefPoint, axis: Vec3, half_angle_deg: f64, rho_km: f64) -> f64 {
    let s = sat.to_array();
    let r = norm(s);
    let tangent = (r * r - rho_km * rho_km).max(0.0).sqrt();
    let nadir = scale(s, -1.0 / r);
    let eta = angle_between_deg(axis, nadir);
    let psi = (eta + half_angle_deg).to_radians();
    if psi >= std::f64::consts::FRAC_PI_2 || r * psi.sin() >= rho_km {
        return tangent;
    }
    let (sp, cp) = psi.sin_cos();
    r * cp - (rho_km * rho_km - r * r * sp * sp).sqrt()
}

pub fn coverage_geometry(sat: &EcefPoint, beam: &Beam, user: &GeodeticPoint) -> CoverageGeometry {
    let (elevation_deg, azimuth_deg) = elevation_azimuth(user, sat);
    let u = user.to_ecef();
    let to_user = sub(u.to_array(), sat.to_array());
    let distance_km = norm(to_user);
    let rho = EARTH_RADIUS_KM + user.alt;
    CoverageGeometry {
        elevation_deg,
        azimuth_deg,
        distance_km,
        d_max_km: beam_border_range(sat, beam.center_direction, beam.half_angle_deg, rho),
        off_axis_deg: angle_between_deg(beam.center_direction, to_user),
    }
}

/// True when `beam` of the satellite at `sat` covers `user`.
pub fn coverage_condition(sat: &EcefPoint, beam: &Beam, user: &GeodeticPoint) -> bool {
    coverage_geometry(sat, beam, user).covers(beam.half_angle_deg)
}

/// The two satellite systems sharing the band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Ngso1,
    Ngso2,
}

impl System {
    pub fn other(self) -> System {
        match self {
            System::Ngso1 => System::Ngso2,
            System::Ngso2 => System::Ngso1,
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            System::Ngso1 => "ngso1",
            System::Ngso2 => "ngso2",
        }
    }
}

/// Ground user classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UserClass {
    Ngso1,
    Ngso2,
    Bs,
}

impl UserClass {
    pub const ALL: [UserClass; 3] = [UserClass::Ngso1, UserClass::Ngso2, UserClass::Bs];

    fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            UserClass::Ngso1 => "ngso1",
            UserClass::Ngso2 => "ngso2",
            UserClass::Bs => "bs",
        }
    }
}

/// A beam identified by its satellite and index within that satellite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BeamRef {
    pub sat: usize,
    pub beam: usize,
}

/// Ground users by class.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UserSet {
    pub ngso1: Vec<GeodeticPoint>,
    pub ngso2: Vec<GeodeticPoint>,
    pub bs: Vec<GeodeticPoint>,
}

impl UserSet {
    pub fn of(&self, class: UserClass) -> &[GeodeticPoint] {
        match class {
            UserClass::Ngso1 => &self.ngso1,
            UserClass::Ngso2 => &self.ngso2,
            UserClass::Bs => &self.bs,
        }
    }
}

/// Which enabled beams of each system cover each user.
///
/// The six coverage sets Φ_{X→U} are the satellite projections of these beam
/// lists; `N_S1 = |Φ_{N2→U_N1}|`, `N_S2 = |Φ_{N1→U_N2}|`, `N_S3 = |Φ_{N1→U_BS}|`
/// and `N_S4 = |Φ_{N2→U_BS}|`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSets {
    // [system][class][user] -> sorted covering beams
    beams: [[Vec<Vec<BeamRef>>; 3]; 2],
}

impl CoverageSets {
    pub fn covering_beams(&self, system: System, class: UserClass, user: usize) -> &[BeamRef] {
        self.beams[system.index()][class.index()]
            .get(user)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    /// Satellites of `system` with at least one enabled beam covering the user.
    pub fn covering_sats(&self, system: System, class: UserClass, user: usize) -> Vec<usize> {
        let mut sats: Vec<usize> = self
            .covering_beams(system, class, user)
            .iter()
            .map(|b| b.sat)
            .collect();
        sats.dedup();
        sats
    }

    /// Users of `class` covered by satellite `sat` of `system`.
    pub fn covered_users(&self, system: System, class: UserClass, sat: usize) -> Vec<usize> {
        self.beams[system.index()][class.index()]
            .iter()
            .enumerate()
            .filter(|(_, beams)| beams.iter().any(|b| b.sat == sat))
            .map(|(u, _)| u)
            .collect()
    }

    pub fn user_count(&self, class: UserClass) -> usize {
        self.beams[0][class.index()].len()
    }

    pub fn n_s1(&self, k: usize) -> usize {
        self.covering_sats(System::Ngso2, UserClass::Ngso1, k).len()
    }

    pub fn n_s2(&self, j: usize) -> usize {
        self.covering_sats(System::Ngso1, UserClass::Ngso2, j).len()
    }

    pub fn n_s3(&self, t: usize) -> usize {
        self.covering_sats(System::Ngso1, UserClass::Bs, t).len()
    }

    pub fn n_s4(&self, t: usize) -> usize {
        self.covering_sats(System::Ngso2, UserClass::Bs, t).len()
    }
}

/// Coverage of every user by every enabled beam of both constellations.
pub fn build_coverage_sets(ngso1: &[Satellite], ngso2: &[Satellite], users: &UserSet) -> CoverageSets {
    let per_system = |sats: &[Satellite]| -> [Vec<Vec<BeamRef>>; 3] {
        UserClass::ALL.map(|class| {
            users
                .of(class)
                .iter()
                .map(|user| covering(sats, user))
                .collect()
        })
    };
    CoverageSets {
        beams: [per_system(ngso1), per_system(ngso2)],
    }
}

/// Enabled beams among `sats` that cover `user`, sorted by (sat, beam).
pub fn covering(sats: &[Satellite], user: &GeodeticPoint) -> Vec<BeamRef> {
    let mut out = Vec::new();
    for (si, sat) in sats.iter().enumerate() {
        let (el, _) = elevation_azimuth(user, &sat.position);
        if el <= 0.0 {
            continue;
        }
        for (bi, beam) in sat.beams.iter().enumerate() {
            if beam.enabled && coverage_condition(&sat.position, beam, user) {
                out.push(BeamRef { sat: si, beam: bi });
            }
        }
    }
    out
}

/// Angle at the user between the two satellites, degrees.
pub fn cfez_angle(n1: &EcefPoint, n2: &EcefPoint, user: &EcefPoint) -> Result<f64> {
    let a = sub(n1.to_array(), user.to_array());
    let b = sub(n2.to_array(), user.to_array());
    if norm(a) < 1e-12 || norm(b) < 1e-12 {
        return Err(Error::DegenerateTriangle);
    }
    Ok(angle_between_deg(a, b))
}

/// Strict test `angle < θ_CFEZ`.
pub fn in_cfez(angle_deg: f64, cfez_deg: f64) -> bool {
    angle_deg < cfez_deg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn conversions_on_axes() {
        let e = geodetic_to_ecef(&GeodeticPoint::new(0.0, 0.0, 0.0).unwrap(), 6370.0);
        assert!(close(e.x, 6370.0, 1e-9) && close(e.y, 0.0, 1e-9) && close(e.z, 0.0, 1e-9));
        let e = geodetic_to_ecef(&GeodeticPoint::new(90.0, 37.0, 500.0).unwrap(), 6370.0);
        assert!(close(e.x, 0.0, 1e-9) && close(e.y, 0.0, 1e-9) && close(e.z, 6870.0, 1e-9));
    }

    #[test]
    fn geodetic_validation() {
        assert!(GeodeticPoint::new(91.0, 0.0, 0.0).is_err());
        assert!(GeodeticPoint::new(0.0, -180.0, 0.0).is_err());
        assert!(GeodeticPoint::new(0.0, 180.0, 0.0).is_ok());
        assert!(GeodeticPoint::new(0.0, 0.0, -1.0).is_err());
        assert_eq!(wrap_lon(-180.0), 180.0);
        assert_eq!(wrap_lon(190.0), -170.0);
    }

    #[test]
    fn walker_radii_and_count() {
        let cfg = ConstellationConfig {
            name: "t".into(),
            num_planes: 2,
            sats_per_plane: 2,
            altitude_km: 500.0,
            inclination_deg: 53.0,
            phasing: 1,
            beams_per_sat: 7,
            beam_half_angle_deg: 7.5,
            frequency_reuse: FrequencyReuse::Fr7,
        };
        let sats = walker_constellation(&cfg, 123.0);
        assert_eq!(sats.len(), 4);
        for (_, p) in &sats {
            assert!(close(p.norm(), 6870.0, 1e-6));
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                assert!(distance(&sats[i].1, &sats[j].1) > 1.0);
            }
        }
    }

    #[test]
    fn hex_layout_geometry() {
        let cfg = ConstellationConfig {
            name: "t".into(),
            num_planes: 1,
            sats_per_plane: 1,
            altitude_km: 500.0,
            inclination_deg: 0.0,
            phasing: 0,
            beams_per_sat: 7,
            beam_half_angle_deg: 7.5,
            frequency_reuse: FrequencyReuse::Fr7,
        };
        let sat = EcefPoint::new(6870.0, 0.0, 0.0);
        let beams = hex_beam_layout(0, &sat, &cfg, 125e6, 5.0);
        assert_eq!(beams.len(), 7);
        let nadir = [-1.0, 0.0, 0.0];
        assert!(angle_between_deg(beams[0].center_direction, nadir) < 1e-12);
        for b in &beams[1..] {
            assert!(close(angle_between_deg(b.center_direction, nadir), 3f64.sqrt() * 7.5, 1e-9));
        }
        let colors: Vec<u8> = beams.iter().map(|b| b.color).collect();
        assert_eq!(colors, vec![0, 1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn zenith_elevation() {
        let user = GeodeticPoint::new(10.0, 20.0, 0.0).unwrap();
        let sat = geodetic_to_ecef(&GeodeticPoint::new(10.0, 20.0, 500.0).unwrap(), EARTH_RADIUS_KM);
        let (el, az) = elevation_azimuth(&user, &sat);
        assert!(close(el, 90.0, 1e-9));
        assert_eq!(az, 0.0);
    }

    #[test]
    fn cfez_cases() {
        let u = EcefPoint::new(6370.0, 0.0, 0.0);
        let a = EcefPoint::new(6870.0, 0.0, 0.0);
        let b = EcefPoint::new(6920.0, 0.0, 0.0);
        assert_eq!(cfez_angle(&a, &b, &u).unwrap(), 0.0);
        let c = EcefPoint::new(5870.0, 0.0, 0.0);
        assert!(close(cfez_angle(&a, &c, &u).unwrap(), 180.0, 1e-12));
        assert_eq!(cfez_angle(&a, &b, &a), Err(Error::DegenerateTriangle));
        assert!(in_cfez(0.0, 5.0));
        assert!(!in_cfez(5.0, 5.0));
        assert!(!in_cfez(10.0, 5.0));
    }
}
