//! Beam shut-off and beam switching.
//!
//! Idle beams that cover a victim user are turned off. Active NGSO 2 beams that
//! cover an NGSO 1 user hand their traffic to an idle beam of another NGSO 2
//! satellite that can reach the same destination without covering any NGSO 1
//! or terrestrial user; NGSO 1 beams that cover NGSO 2 users are handled the
//! same way, except that beams serving NGSO 1 users stay put. Passes repeat
//! until nothing changes, so the output is a fixed point.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::geometry::{coverage_condition, elevation_azimuth, BeamRef, CoverageSets, GeodeticPoint, System, UserClass};
use crate::link::{user_class, Scene};

/// One beam hand-over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamSwitch {
    pub system: System,
    pub from: BeamRef,
    pub to: BeamRef,
    /// The scene user whose service moved, if the beam served one.
    pub user: Option<usize>,
}

/// Per-user interferer counts `N_S1..N_S4`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InterfererCounts {
    /// NGSO 2 satellites covering each NGSO 1 user.
    pub n_s1: Vec<usize>,
    /// NGSO 1 satellites covering each NGSO 2 user.
    pub n_s2: Vec<usize>,
    /// NGSO 1 satellites covering each terrestrial user.
    pub n_s3: Vec<usize>,
    /// NGSO 2 satellites covering each terrestrial user.
    pub n_s4: Vec<usize>,
}

impl InterfererCounts {
    /// Counts over enabled covering beams.
    pub fn from_coverage(cov: &CoverageSets) -> Self {
        let per = |f: &dyn Fn(usize) -> usize, class: UserClass| (0..cov.user_count(class)).map(f).collect();
        InterfererCounts {
            n_s1: per(&|k| cov.n_s1(k), UserClass::Ngso1),
            n_s2: per(&|j| cov.n_s2(j), UserClass::Ngso2),
            n_s3: per(&|t| cov.n_s3(t), UserClass::Bs),
            n_s4: per(&|t| cov.n_s4(t), UserClass::Bs),
        }
    }

    /// Counts only satellites with at least one busy covering beam.
    pub fn active(scene: &Scene, cov: &CoverageSets) -> Self {
        let count = |system: System, class: UserClass, u: usize| {
            let mut sats: Vec<usize> = cov
                .covering_beams(system, class, u)
                .iter()
                .filter(|r| scene.sats(system)[r.sat].beams[r.beam].traffic)
                .map(|r| r.sat)
                .collect();
            sats.dedup();
            sats.len()
        };
        let per = |system, class| (0..cov.user_count(class)).map(|u| count(system, class, u)).collect();
        InterfererCounts {
            n_s1: per(System::Ngso2, UserClass::Ngso1),
            n_s2: per(System::Ngso1, UserClass::Ngso2),
            n_s3: per(System::Ngso1, UserClass::Bs),
            n_s4: per(System::Ngso2, UserClass::Bs),
        }
    }
}

/// Outcome of one scheduling run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScheduleDecision {
    pub shut_off: BTreeSet<(System, BeamRef)>,
    pub switches: Vec<BeamSwitch>,
    /// Active interfering beams for which no switch target existed.
    pub unresolved: BTreeSet<(System, BeamRef)>,
    pub counts_before: InterfererCounts,
    pub updated_counts: InterfererCounts,
}

impl ScheduleDecision {
    pub fn is_noop(&self) -> bool {
        self.shut_off.is_empty() && self.switches.is_empty()
    }

    /// Rows of the decision log.
    pub fn log_rows(&self, epoch_s: f64) -> Vec<DecisionRow> {
        let mut rows = Vec::new();
        for (system, b) in &self.shut_off {
            rows.push(DecisionRow::new(epoch_s, "shut_off", *system, *b, None));
        }
        for s in &self.switches {
            rows.push(DecisionRow::new(epoch_s, "switch_from", s.system, s.from, s.user));
            rows.push(DecisionRow::new(epoch_s, "switch_to", s.system, s.to, s.user));
        }
        for (system, b) in &self.unresolved {
            rows.push(DecisionRow::new(epoch_s, "no_switch", *system, *b, None));
        }
        rows
    }
}

/// One line of the decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRow {
    pub epoch_s: f64,
    pub action: String,
    pub system: String,
    pub sat: usize,
    pub beam: usize,
    pub user: Option<usize>,
}

impl DecisionRow {
    fn new(epoch_s: f64, action: &str, system: System, b: BeamRef, user: Option<usize>) -> Self {
        DecisionRow {
            epoch_s,
            action: action.to_string(),
            system: system.label().to_string(),
            sat: b.sat,
            beam: b.beam,
            user,
        }
    }
}

/// Runs shut-off and switching on `scene` in place.
pub fn schedule_beams(scene: &mut Scene) -> ScheduleDecision {
    let initial = scene.coverage();
    let mut decision = ScheduleDecision {
        counts_before: InterfererCounts::from_coverage(&initial),
        ..Default::default()
    };
    loop {
        let mut changed = shut_off_idle(scene, &mut decision);
        changed |= switch_pass(scene, System::Ngso2, &mut decision);
        changed |= switch_pass(scene, System::Ngso1, &mut decision);
        if !changed {
            break;
        }
    }
    let cov = scene.coverage();
    decision.unresolved = BTreeSet::new();
    for system in [System::Ngso1, System::Ngso2] {
        let class = user_class(system.other());
        for u in 0..cov.user_count(class) {
            for r in cov.covering_beams(system, class, u) {
                decision.unresolved.insert((system, *r));
            }
        }
    }
    decision.updated_counts = InterfererCounts::from_coverage(&cov);
    decision
}

/// Turns off idle beams that cover a user of the other constellation or a
/// terrestrial user.
fn shut_off_idle(scene: &mut Scene, decision: &mut ScheduleDecision) -> bool {
    let cov = scene.coverage();
    let mut off = BTreeSet::new();
    for system in [System::Ngso1, System::Ngso2] {
        for class in [user_class(system.other()), UserClass::Bs] {
            for u in 0..cov.user_count(class) {
                for r in cov.covering_beams(system, class, u) {
                    if !scene.sats(system)[r.sat].beams[r.beam].traffic {
                        off.insert((system, *r));
                    }
                }
            }
        }
    }
    for (system, r) in &off {
        scene.sats_mut(*system)[r.sat].beams[r.beam].enabled = false;
    }
    let changed = !off.is_empty();
    decision.shut_off.extend(off);
    changed
}

/// Where a beam's traffic goes: its scene user, or the axis ground point.
/// Beams shared by several scene users are not moved.
fn destination(scene: &Scene, system: System, r: BeamRef) -> Option<(GeodeticPoint, Option<usize>)> {
    let class = user_class(system);
    let served: Vec<usize> = (0..scene.serving(system).len())
        .filter(|&u| scene.serving(system)[u] == Some(r))
        .collect();
    match served.as_slice() {
        [] => {}
        [u] => return Some((scene.users.of(class)[*u], Some(*u))),
        _ => return None,
    }
    let sat = &scene.sats(system)[r.sat];
    sat.beams[r.beam].ground_center(&sat.position).map(|g| (g, None))
}

fn switch_pass(scene: &mut Scene, system: System, decision: &mut ScheduleDecision) -> bool {
    let victim = user_class(system.other());
    let mut changed = false;
    let n_victims = scene.users.of(victim).len();
    for u in 0..n_victims {
        let candidates: Vec<BeamRef> = scene.coverage().covering_beams(system, victim, u).to_vec();
        for r in candidates {
            let beam = &scene.sats(system)[r.sat].beams[r.beam];
            if !beam.enabled || !beam.traffic {
                continue;
            }
            if system == System::Ngso1 && scene.serving_ngso1.contains(&Some(r)) {
                continue;
            }
            if let Some(s) = try_switch(scene, system, r) {
                decision.shut_off.remove(&(system, s.to));
                decision.switches.push(s);
                changed = true;
            }
        }
    }
    changed
}

/// Users a switch target of `system` must not cover.
fn protected_users(scene: &Scene, system: System) -> Vec<GeodeticPoint> {
    let mut out = scene.users.of(user_class(system.other())).to_vec();
    out.extend_from_slice(&scene.users.bs);
    out
}

fn try_switch(scene: &mut Scene, system: System, from: BeamRef) -> Option<BeamSwitch> {
    let (dest, user) = destination(scene, system, from)?;
    let dest_ecef = dest.to_ecef();
    let protected = protected_users(scene, system);
    let sats = scene.sats(system);
    let mut order: Vec<(usize, f64)> = sats
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != from.sat)
        .map(|(i, s)| (i, elevation_azimuth(&dest, &s.position).0))
        .filter(|(_, el)| *el > 0.0)
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut target = None;
    'sats: for (si, _) in order {
        let sat = &sats[si];
        for (bi, beam) in sat.beams.iter().enumerate() {
            if beam.traffic {
                continue;
            }
            let mut trial = beam.clone();
            trial.point_at(&sat.position, &dest_ecef);
            trial.enabled = true;
            if !coverage_condition(&sat.position, &trial, &dest) {
                continue;
            }
            if protected.iter().any(|p| {
                elevation_azimuth(p, &sat.position).0 > 0.0 && coverage_condition(&sat.position, &trial, p)
            }) {
                continue;
            }
            target = Some((BeamRef { sat: si, beam: bi }, trial));
            break 'sats;
        }
    }
    let (to, mut new_beam) = target?;
    new_beam.traffic = true;
    let sats = scene.sats_mut(system);
    sats[to.sat].beams[to.beam] = new_beam;
    let old = &mut sats[from.sat].beams[from.beam];
    old.traffic = false;
    old.enabled = false;
    if let Some(u) = user {
        scene.serving_mut(system)[u] = Some(to);
    }
    Some(BeamSwitch { system, from, to, user })
}
