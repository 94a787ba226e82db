//! Slot-level simulation of the interference-management schemes.
//!
//! Each slot builds the constellation snapshot, draws beam traffic, optionally
//! schedules beams, assembles every served user's links, predicts the fading
//! of those links from their history, allocates power and finally evaluates
//! the SINRs on the realized fading. Traffic and fading depend only on the
//! seed and the slot, so all schemes see identical conditions for a seed.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::nn::Mlp;
use crate::allocation::power::{baseline_pfpfb, AllocationResult, DqnAllocator, PowerProblem, STATE_DIM};
use crate::allocation::QNetwork;
use crate::allocation::predictor::{predict_csi, train_predictor, CsiHistory, PredictorModel};
use crate::allocation::CsiSynthesizer;
use crate::channel::rng_stream;
use crate::geometry::{cfez_angle, elevation_azimuth, in_cfez, System, UserClass};
use crate::link::{FadingRealization, InterferenceMode, LinkId, PowerClass, PowerLevels, Scene, Transmitter, VictimLinks};
use crate::outage::{op_sweep, OpRow, OutageMethod, OutageQuery};
use crate::scenario::Scenario;
use crate::scheduling::{schedule_beams, DecisionRow, InterfererCounts, ScheduleDecision};
use crate::{linear_to_db, Error, Result};

const TRAFFIC_STREAM: u64 = 0x7472_6166_0000_0000;
const EXPLORE_STREAM: u64 = 0x6578_706c_0000_0000;

/// Interference-management scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Beam scheduling followed by learned power allocation.
    JmdrIm,
    /// Learned power allocation with fixed beams.
    Ppafb,
    /// Maximum power with fixed beams.
    Pfpfb,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::JmdrIm, Scheme::Ppafb, Scheme::Pfpfb];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::JmdrIm => "jmdr-im",
            Scheme::Ppafb => "ppafb",
            Scheme::Pfpfb => "pfpfb",
        }
    }

    pub fn schedules(self) -> bool {
        self == Scheme::JmdrIm
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jmdr-im" => Ok(Scheme::JmdrIm),
            "ppafb" => Ok(Scheme::Ppafb),
            "pfpfb" => Ok(Scheme::Pfpfb),
            other => Err(Error::invalid("scheme", format!("unknown scheme `{other}`"))),
        }
    }
}

/// Which fading the allocator sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CsiMode {
    /// One-step LSTM-ARMA predictions from the link histories.
    Predicted,
    /// The realized fading of the slot.
    Actual,
}

impl CsiMode {
    pub fn label(self) -> &'static str {
        match self {
            CsiMode::Predicted => "predicted",
            CsiMode::Actual => "actual",
        }
    }
}

impl std::str::FromStr for CsiMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "predicted" => Ok(CsiMode::Predicted),
            "actual" => Ok(CsiMode::Actual),
            other => Err(Error::invalid("csi", format!("unknown CSI mode `{other}`"))),
        }
    }
}

/// Correlated fading series of one seed, generated on first use.
#[derive(Debug, Clone)]
pub struct CsiStore {
    synth: CsiSynthesizer,
    seed: u64,
    len: usize,
    series: HashMap<LinkId, Vec<f64>>,
}

impl CsiStore {
    pub fn new(synth: CsiSynthesizer, seed: u64, len: usize) -> Self {
        CsiStore {
            synth,
            seed,
            len,
            series: HashMap::new(),
        }
    }

    pub fn series(&mut self, link: &LinkId) -> &[f64] {
        let (synth, seed, len) = (self.synth, self.seed, self.len);
        self.series.entry(*link).or_insert_with(|| synth.series(link, seed, len))
    }

    /// `|h|²` of `link` at absolute slot index `t`.
    pub fn actual(&mut self, link: &LinkId, t: usize) -> f64 {
        self.series(link)[t]
    }

    /// One-step prediction of slot `t` from the samples before it.
    pub fn predicted(&mut self, model: &PredictorModel, link: &LinkId, t: usize) -> f64 {
        let keep = model.context + model.window + model.residual_lags;
        let s = self.series(link);
        predict_csi(model, &s[t.saturating_sub(keep)..t])
    }
}

/// Scene of slot `t` for one scheme: snapshot, traffic, then scheduling for JMDR-IM.
pub fn slot_scene(scenario: &Scenario, seed: u64, t: usize, scheme: Scheme) -> (Scene, Option<ScheduleDecision>) {
    let epoch = scenario.epoch_s + t as f64 * scenario.traffic.slot_duration_s;
    let mut scene = scenario.scene(epoch);
    let mut rng = rng_stream(seed, TRAFFIC_STREAM | t as u64);
    scene.draw_traffic(&scenario.traffic, &mut rng);
    let decision = scheme.schedules().then(|| schedule_beams(&mut scene));
    (scene, decision)
}

/// Links of every served user, grouped by class.
pub fn victim_links(scene: &Scene) -> Vec<(UserClass, usize, VictimLinks)> {
    let coverage = scene.coverage();
    let mut out = Vec::new();
    for class in UserClass::ALL {
        for u in 0..scene.users.of(class).len() {
            if let Ok(v) = scene.user_links(class, u, &coverage, InterferenceMode::Radiating) {
                out.push((class, u, v));
            }
        }
    }
    out
}

fn links_of(victims: &[(UserClass, usize, VictimLinks)]) -> Vec<LinkId> {
    let mut links: Vec<LinkId> = victims
        .iter()
        .flat_map(|(_, _, v)| std::iter::once(v.desired.link).chain(v.interferers.iter().map(|t| t.link)))
        .collect();
    links.sort();
    links.dedup();
    links
}

/// The power problem of a set of victims under `fading`.
pub fn power_problem(
    victims: &[(UserClass, usize, VictimLinks)],
    fading: &FadingRealization,
    p_max: [f64; 3],
    levels: usize,
    phi_th: f64,
) -> PowerProblem {
    let of = |c: UserClass| {
        victims
            .iter()
            .filter(|(class, _, _)| *class == c)
            .map(|(_, _, v)| v.coefficients(fading))
            .collect()
    };
    PowerProblem {
        ngso1: of(UserClass::Ngso1),
        ngso2: of(UserClass::Ngso2),
        bs: of(UserClass::Bs),
        p_max,
        levels,
        phi_th,
    }
}

/// One training episode of the Q-network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub epoch: usize,
    /// Latest TD loss, NaN before the first update.
    pub loss: f64,
    /// Mean reward per step of the episode.
    pub reward: f64,
    /// Fraction of the last (up to) 100 episodes whose allocation met both constraints.
    pub constraint_rate: f64,
}

/// Predictor and allocator trained for a scenario.
#[derive(Debug, Clone)]
pub struct Trained {
    pub predictor: PredictorModel,
    pub allocator: DqnAllocator,
    pub curve: Vec<TrainingRow>,
}

impl Trained {
    /// Rebuilds the frozen models from checkpoints; the training curve is empty.
    pub fn from_parts(scenario: &Scenario, predictor: PredictorModel, online: Mlp) -> Result<Self> {
        let widths = online.widths();
        if widths.first() != Some(&STATE_DIM) || widths.last() != Some(&scenario.allocator.levels) {
            return Err(Error::Checkpoint(format!(
                "Q-network maps {:?} features to {:?} actions, scenario needs {STATE_DIM} to {}",
                widths.first(),
                widths.last(),
                scenario.allocator.levels
            )));
        }
        let q = QNetwork::from_network(online, scenario.allocator.dqn.clone());
        Ok(Trained {
            predictor,
            allocator: DqnAllocator::from_network(scenario.allocator.clone(), q, scenario.predictor.seed),
            curve: Vec::new(),
        })
    }
}

/// Trains the CSI predictor on fading histories of the reference scene's
/// links, then the Q-network on `train_slots` slots of scheduled scenes with
/// their actual fading. Both use the training seed `scenario.predictor.seed`,
/// disjoint from evaluation through a separate stream offset.
pub fn train(scenario: &Scenario) -> Result<Trained> {
    let seed = scenario.predictor.seed ^ 0x5452_4149_4e00_0000;
    let sim = &scenario.simulation;
    let mut store = CsiStore::new(scenario.csi_synthesizer(), seed, sim.history_slots + sim.train_slots + 1);

    let (scene, _) = slot_scene(scenario, seed, 0, Scheme::Ppafb);
    let links = links_of(&victim_links(&scene));
    if links.is_empty() {
        return Err(Error::config("users", "no user is served at the scenario epoch"));
    }
    let history = CsiHistory::new(
        links
            .iter()
            .map(|l| store.series(l)[..sim.history_slots].to_vec())
            .collect(),
    )?;
    let predictor = train_predictor(&history, &scenario.predictor)?;

    let mut allocator = DqnAllocator::new(scenario.allocator.clone(), seed);
    let mut curve = Vec::with_capacity(sim.train_slots);
    let mut window: std::collections::VecDeque<bool> = std::collections::VecDeque::new();
    let phi = scenario.phi_th();
    for e in 0..sim.train_slots {
        let (scene, _) = slot_scene(scenario, seed, e, Scheme::JmdrIm);
        let victims = victim_links(&scene);
        let t = sim.history_slots + e;
        let mut fading = FadingRealization::unit();
        for l in links_of(&victims) {
            fading.set(l, store.actual(&l, t));
        }
        let target = scenario.allocator.target(scenario.phi_th_db);
        let problem = power_problem(&victims, &fading, scenario.power.as_array(), scenario.allocator.levels, target);
        let result = allocator.allocate(&problem, true);
        let check = PowerProblem { phi_th: phi, ..problem };
        window.push_back(check.feasible(result.powers));
        if window.len() > 100 {
            window.pop_front();
        }
        curve.push(TrainingRow {
            epoch: e,
            loss: allocator.last_loss().unwrap_or(f64::NAN),
            reward: result.reward_sum / (scenario.allocator.iterations + 1) as f64,
            constraint_rate: window.iter().filter(|ok| **ok).count() as f64 / window.len() as f64,
        });
    }
    Ok(Trained {
        predictor,
        allocator,
        curve,
    })
}

/// What to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSpec {
    pub schemes: Vec<Scheme>,
    pub seeds: Vec<u64>,
    pub slots: usize,
    pub csi: CsiMode,
    /// Power class whose maximum is swept, with its grid; `None` keeps the scenario maxima.
    pub sweep: Option<(PowerClass, Vec<f64>)>,
}

impl EvalSpec {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        if self.schemes.is_empty() {
            return Err(Error::config("scheme", "at least one scheme is required"));
        }
        if let Some((_, grid)) = &self.sweep {
            if grid.is_empty() || grid.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
                return Err(Error::config("sweep", "grid entries must be positive"));
            }
        }
        Ok(())
    }
}

/// Outcome of one scheme in one slot at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub seed: u64,
    pub slot: usize,
    pub scheme: Scheme,
    /// Maximum power of the swept class, W (the scenario value without a sweep).
    pub pmax_w: f64,
    /// Allocated powers per [`PowerClass`], W.
    pub powers: [f64; 3],
    /// SINRs on the realized fading.
    pub realized: AllocationResult,
    /// Both constraints met on the realized fading.
    pub constraints_ok: bool,
    /// Scheduling decisions of the slot (JMDR-IM only, first grid point only).
    pub decisions: Vec<DecisionRow>,
}

impl SlotRecord {
    pub fn ngso1_served(&self) -> bool {
        !self.realized.sinr_ngso1.is_empty()
    }
}

fn evaluate_seed(scenario: &Scenario, trained: &Trained, spec: &EvalSpec, seed: u64) -> Result<Vec<SlotRecord>> {
    let sim = &scenario.simulation;
    let mut store = CsiStore::new(scenario.csi_synthesizer(), seed, sim.history_slots + spec.slots + 1);
    let mut allocator = trained.allocator.clone();
    let base_max = scenario.power.as_array();
    let grid: Vec<(f64, [f64; 3])> = match &spec.sweep {
        Some((class, values)) => values
            .iter()
            .map(|&v| {
                let mut p = base_max;
                p[class.index()] = v;
                (v, p)
            })
            .collect(),
        None => vec![(base_max[0], base_max)],
    };
    let phi = scenario.phi_th();
    let target = match spec.csi {
        CsiMode::Predicted => scenario.allocator.target(scenario.phi_th_db),
        CsiMode::Actual => phi,
    };
    let levels = scenario.allocator.levels;
    let mut records = Vec::new();
    for t in 0..spec.slots {
        let abs = sim.history_slots + t;
        let mut actual_cache: HashMap<LinkId, f64> = HashMap::new();
        let mut predicted_cache: HashMap<LinkId, f64> = HashMap::new();
        for &scheme in &spec.schemes {
            let (scene, decision) = slot_scene(scenario, seed, t, scheme);
            let victims = victim_links(&scene);
            let links = links_of(&victims);
            let mut actual = FadingRealization::unit();
            let mut seen = FadingRealization::unit();
            for l in &links {
                let a = *actual_cache.entry(*l).or_insert_with(|| store.actual(l, abs));
                actual.set(*l, a);
                let s = match spec.csi {
                    CsiMode::Actual => a,
                    CsiMode::Predicted => *predicted_cache
                        .entry(*l)
                        .or_insert_with(|| store.predicted(&trained.predictor, l, abs)),
                };
                seen.set(*l, s);
            }
            for (gi, &(pmax_w, p_max)) in grid.iter().enumerate() {
                let problem = power_problem(&victims, &seen, p_max, levels, target);
                let allocation = match scheme {
                    Scheme::Pfpfb => baseline_pfpfb(&problem, p_max),
                    Scheme::JmdrIm | Scheme::Ppafb => {
                        allocator.reseed(seed, EXPLORE_STREAM | ((t as u64) << 8) | gi as u64);
                        allocator.allocate(&problem, false)
                    }
                };
                let check = power_problem(&victims, &actual, p_max, levels, phi);
                let realized = check.evaluate_powers(allocation.levels, allocation.powers, allocation.reward_sum);
                records.push(SlotRecord {
                    seed,
                    slot: t,
                    scheme,
                    pmax_w,
                    powers: allocation.powers,
                    constraints_ok: realized.feasible(),
                    realized,
                    decisions: match (&decision, gi) {
                        (Some(d), 0) => d.log_rows(scene.epoch_s),
                        _ => Vec::new(),
                    },
                });
            }
        }
    }
    Ok(records)
}

/// Runs every seed (in parallel), scheme and grid point; records are ordered
/// by seed, slot, scheme and grid point.
pub fn evaluate(scenario: &Scenario, trained: &Trained, spec: &EvalSpec) -> Result<Vec<SlotRecord>> {
    spec.validate()?;
    let per_seed: Vec<Result<Vec<SlotRecord>>> = spec
        .seeds
        .par_iter()
        .map(|&seed| evaluate_seed(scenario, trained, spec, seed))
        .collect();
    let mut out = Vec::new();
    for r in per_seed {
        out.extend(r?);
    }
    Ok(out)
}

/// Per-scheme, per-grid-point averages over seeds and slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub scheme: Scheme,
    pub pmax_w: f64,
    /// Mean NGSO 1 SINR (linear) over slots with a served NGSO 1 user.
    pub mean_sinr_ngso1: f64,
    /// Mean of the per-slot minimum NGSO 2 SINR (linear).
    pub mean_min_sinr_ngso2: f64,
    /// Mean of the per-slot minimum BS-user SINR (linear).
    pub mean_min_sinr_bs: f64,
    pub constraint_rate: f64,
    /// Mean allocated powers per [`PowerClass`], W.
    pub mean_powers: [f64; 3],
    pub slots: usize,
}

impl SweepSummary {
    pub fn mean_sinr_ngso1_db(&self) -> f64 {
        linear_to_db(self.mean_sinr_ngso1)
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Aggregates records by scheme and grid point.
pub fn summarize(records: &[SlotRecord]) -> Vec<SweepSummary> {
    let mut keys: Vec<(Scheme, f64)> = records.iter().map(|r| (r.scheme, r.pmax_w)).collect();
    keys.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    keys.dedup();
    keys.into_iter()
        .map(|(scheme, pmax_w)| {
            let rs: Vec<&SlotRecord> = records.iter().filter(|r| r.scheme == scheme && r.pmax_w == pmax_w).collect();
            let min_of = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
            SweepSummary {
                scheme,
                pmax_w,
                mean_sinr_ngso1: mean(rs.iter().filter(|r| r.ngso1_served()).map(|r| r.realized.objective)),
                mean_min_sinr_ngso2: mean(
                    rs.iter()
                        .filter(|r| !r.realized.sinr_ngso2.is_empty())
                        .map(|r| min_of(&r.realized.sinr_ngso2)),
                ),
                mean_min_sinr_bs: mean(
                    rs.iter()
                        .filter(|r| !r.realized.sinr_bs.is_empty())
                        .map(|r| min_of(&r.realized.sinr_bs)),
                ),
                constraint_rate: mean(rs.iter().map(|r| if r.constraints_ok { 1.0 } else { 0.0 })),
                mean_powers: [0, 1, 2].map(|c| mean(rs.iter().map(|r| r.powers[c]))),
                slots: rs.len(),
            }
        })
        .collect()
}

/// Outage queries of every served user for given powers and fading statistics.
pub fn outage_queries(scenario: &Scenario, scene: &Scene, powers: &PowerLevels, threshold: f64) -> Vec<(UserClass, usize, OutageQuery)> {
    victim_links(scene)
        .into_iter()
        .map(|(class, u, v)| {
            let q = v.outage_query(powers, threshold, scenario.fading.satellite, scenario.fading.terrestrial);
            (class, u, q)
        })
        .collect()
}

/// Mean fading gain of every link of the victims.
pub fn mean_fading(scenario: &Scenario, victims: &[(UserClass, usize, VictimLinks)]) -> FadingRealization {
    let mut f = FadingRealization::unit();
    for l in links_of(victims) {
        let m = match l.tx {
            Transmitter::Sat(..) => scenario.fading.satellite.mean(),
            Transmitter::Bs(_) => scenario.fading.terrestrial.mean_power,
        };
        f.set(l, m);
    }
    f
}

/// Outage of one served user under one scheme.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpRecord {
    pub seed: u64,
    pub scheme: Scheme,
    pub user: usize,
    /// Allocated powers per [`PowerClass`], W.
    pub powers: [f64; 3],
    pub row: OpRow,
}

fn op_seed(
    scenario: &Scenario,
    trained: &Trained,
    schemes: &[Scheme],
    methods: &[OutageMethod],
    replicas: u64,
    seed: u64,
) -> Result<Vec<OpRecord>> {
    let satellite = if methods.iter().any(|&m| m != OutageMethod::MonteCarlo) {
        scenario.fading.satellite.rounded()
    } else {
        scenario.fading.satellite
    };
    let mut allocator = trained.allocator.clone();
    let mut out = Vec::new();
    for &scheme in schemes {
        let (scene, _) = slot_scene(scenario, seed, 0, scheme);
        let victims = victim_links(&scene);
        let fading = mean_fading(scenario, &victims);
        let p_max = scenario.power.as_array();
        let problem = power_problem(&victims, &fading, p_max, scenario.allocator.levels, scenario.phi_th());
        let allocation = match scheme {
            Scheme::Pfpfb => baseline_pfpfb(&problem, p_max),
            _ => {
                allocator.reseed(seed, EXPLORE_STREAM);
                allocator.allocate(&problem, false)
            }
        };
        let [ngso1, ngso2, bs] = allocation.powers;
        let powers = PowerLevels { ngso1, ngso2, bs };
        for (class, user, v) in &victims {
            let q = v.outage_query(&powers, scenario.phi_th(), satellite, scenario.fading.terrestrial);
            let stream = seed ^ ((scheme as u64) << 48) ^ ((class_index(*class) as u64) << 40) ^ ((*user as u64) << 32);
            for row in op_sweep(&q, *class, methods, &scenario.simulation.phi_grid_db, replicas, stream)? {
                out.push(OpRecord {
                    seed,
                    scheme,
                    user: *user,
                    powers: allocation.powers,
                    row,
                });
            }
        }
    }
    Ok(out)
}

/// Outage versus threshold of every user served in slot 0, for each seed,
/// scheme and method. Powers are allocated on mean fading; when any
/// closed-form method is requested the satellite `m` is rounded so every
/// method sees the same channel.
pub fn op_experiment(
    scenario: &Scenario,
    trained: &Trained,
    schemes: &[Scheme],
    seeds: &[u64],
    methods: &[OutageMethod],
    replicas: u64,
) -> Result<Vec<OpRecord>> {
    if seeds.is_empty() {
        return Err(Error::config("seeds", "at least one seed is required"));
    }
    if methods.is_empty() {
        return Err(Error::config("method", "at least one method is required"));
    }
    let per_seed: Vec<Result<Vec<OpRecord>>> = seeds
        .par_iter()
        .map(|&seed| op_seed(scenario, trained, schemes, methods, replicas, seed))
        .collect();
    let mut out = Vec::new();
    for r in per_seed {
        out.extend(r?);
    }
    Ok(out)
}

/// One point of the C/(I+N) time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeseriesRow {
    pub epoch_s: f64,
    pub scheme: Scheme,
    pub class: UserClass,
    pub user: usize,
    /// C/(I+N) in dB on mean fading, `None` when the user is not served.
    pub cinr_db: Option<f64>,
}

/// C/(I+N) of every user across epochs spaced `timeseries_step_s` apart.
/// Learned schemes allocate on mean fading with a frozen Q-network.
pub fn cinr_timeseries(scenario: &Scenario, trained: &Trained, schemes: &[Scheme], seed: u64) -> Vec<TimeseriesRow> {
    let sim = &scenario.simulation;
    let mut allocator = trained.allocator.clone();
    let mut rows = Vec::new();
    for k in 0..sim.timeseries_epochs {
        let epoch = scenario.epoch_s + k as f64 * sim.timeseries_step_s;
        for &scheme in schemes {
            let mut scene = scenario.scene(epoch);
            let mut rng = rng_stream(seed, TRAFFIC_STREAM | k as u64);
            scene.draw_traffic(&scenario.traffic, &mut rng);
            if scheme.schedules() {
                schedule_beams(&mut scene);
            }
            let victims = victim_links(&scene);
            let fading = mean_fading(scenario, &victims);
            let problem = power_problem(
                &victims,
                &fading,
                scenario.power.as_array(),
                scenario.allocator.levels,
                scenario.phi_th(),
            );
            let result = match scheme {
                Scheme::Pfpfb => baseline_pfpfb(&problem, scenario.power.as_array()),
                _ => {
                    allocator.reseed(seed, EXPLORE_STREAM | ((k as u64) << 8));
                    allocator.allocate(&problem, false)
                }
            };
            let mut iters = [
                result.sinr_ngso1.iter(),
                result.sinr_ngso2.iter(),
                result.sinr_bs.iter(),
            ];
            for class in UserClass::ALL {
                let served: Vec<usize> = victims.iter().filter(|v| v.0 == class).map(|v| v.1).collect();
                let it = &mut iters[class_index(class)];
                let values: HashMap<usize, f64> = served.iter().map(|&u| (u, *it.next().expect("one SINR per victim"))).collect();
                for u in 0..scenario.users.of(class).len() {
                    rows.push(TimeseriesRow {
                        epoch_s: epoch,
                        scheme,
                        class,
                        user: u,
                        cinr_db: values.get(&u).map(|&s| linear_to_db(s)),
                    });
                }
            }
        }
    }
    rows
}

fn class_index(class: UserClass) -> usize {
    match class {
        UserClass::Ngso1 => 0,
        UserClass::Ngso2 => 1,
        UserClass::Bs => 2,
    }
}

/// Coverage statistics of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub epoch_s: f64,
    pub class: UserClass,
    pub user: usize,
    /// Enabled beams of NGSO 1 / NGSO 2 covering the user.
    pub ngso1_beams: usize,
    pub ngso2_beams: usize,
    /// Elevation of the serving satellite, degrees (satellite users only).
    pub serving_elevation_deg: Option<f64>,
    /// Smallest angle at the user between its serving satellite and a
    /// covering satellite of the other system, degrees.
    pub min_cfez_angle_deg: Option<f64>,
    pub in_cfez: bool,
    /// Interferer count N_S1..N_S4 for this user (the one matching its class).
    pub interferers: usize,
}

/// Coverage of every user at `epochs` epochs spaced `step_s` apart.
pub fn coverage_report(scenario: &Scenario, epochs: usize, step_s: f64) -> Vec<CoverageRow> {
    let mut rows = Vec::new();
    for k in 0..epochs {
        let epoch = scenario.epoch_s + k as f64 * step_s;
        let scene = scenario.scene(epoch);
        let coverage = scene.coverage();
        let counts = InterfererCounts::from_coverage(&coverage);
        for class in UserClass::ALL {
            for u in 0..scene.users.of(class).len() {
                let user = scene.users.of(class)[u];
                let (serving_elevation_deg, min_cfez_angle_deg) = match class {
                    UserClass::Bs => (None, None),
                    _ => {
                        let system = if class == UserClass::Ngso1 { System::Ngso1 } else { System::Ngso2 };
                        match scene.serving(system)[u] {
                            None => (None, None),
                            Some(b) => {
                                let own = scene.sats(system)[b.sat].position;
                                let el = elevation_azimuth(&user, &own).0;
                                let other = system.other();
                                let angle = coverage
                                    .covering_sats(other, class, u)
                                    .iter()
                                    .filter_map(|&s| cfez_angle(&own, &scene.sats(other)[s].position, &user.to_ecef()).ok())
                                    .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.min(a))));
                                (Some(el), angle)
                            }
                        }
                    }
                };
                let interferers = match class {
                    UserClass::Ngso1 => counts.n_s1[u],
                    UserClass::Ngso2 => counts.n_s2[u],
                    UserClass::Bs => counts.n_s3[u] + counts.n_s4[u],
                };
                rows.push(CoverageRow {
                    epoch_s: epoch,
                    class,
                    user: u,
                    ngso1_beams: coverage.covering_beams(System::Ngso1, class, u).len(),
                    ngso2_beams: coverage.covering_beams(System::Ngso2, class, u).len(),
                    serving_elevation_deg,
                    min_cfez_angle_deg,
                    in_cfez: min_cfez_angle_deg.is_some_and(|a| in_cfez(a, scenario.cfez_deg)),
                    interferers,
                });
            }
        }
    }
    rows
}
