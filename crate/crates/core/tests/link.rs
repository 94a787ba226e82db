//! Per-user SINR assembly checked against hand-assembled sums of
//! `P · G_t · G_r · L · |h|²` terms.

use proptest::prelude::*;
use sgin_core::geometry::*;
use sgin_core::link::*;
use sgin_core::rf::{free_space_loss, noise_power, pattern_gain};
use sgin_core::scenario::Scenario;

fn radio() -> RadioConfig {
    Scenario::from_json_str(r#"{"ngso1": {}, "users": {"ngso1": [{"lat": 0.0, "lon": 0.0}]}}"#)
        .unwrap()
        .scenario
        .radio_config()
}

fn ground(lat: f64, lon: f64) -> GeodeticPoint {
    GeodeticPoint::ground(lat, lon).unwrap()
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn diff(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn angle(a: [f64; 3], b: [f64; 3]) -> f64 {
    let (a, b) = (unit(a), unit(b));
    (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Satellite over (lat, lon) with one beam aimed at `aim`.
fn sat(id: usize, lat: f64, lon: f64, alt: f64, aim: &GeodeticPoint, power: f64, busy: bool) -> Satellite {
    let position = GeodeticPoint::new(lat, lon, alt).unwrap().to_ecef();
    Satellite {
        id,
        position,
        beams: vec![Beam {
            owner_sat: id,
            center_direction: unit(diff(aim.to_ecef().to_array(), position.to_array())),
            half_angle_deg: 7.5,
            bandwidth_hz: 125e6,
            color: 0,
            traffic: busy,
            enabled: true,
            tx_power_w: power,
        }],
    }
}

/// `G_t(off-axis) · G_r(off-boresight) · L(d)` for one satellite beam.
fn sat_gain(radio: &RadioConfig, s: &Satellite, user: &GeodeticPoint, boresight: Option<[f64; 3]>, system: System) -> f64 {
    let u = user.to_ecef().to_array();
    let p = s.position.to_array();
    let (tx_ant, rx_ant) = match system {
        System::Ngso1 => (&radio.ngso1_sat_antenna, &radio.ngso1_user_antenna),
        System::Ngso2 => (&radio.ngso2_sat_antenna, &radio.ngso2_user_antenna),
    };
    let gt = pattern_gain(tx_ant, angle(s.beams[0].center_direction, diff(u, p)));
    let gr = boresight.map_or(1.0, |b| pattern_gain(rx_ant, angle(b, diff(p, u))));
    let d = distance(&s.position, &user.to_ecef());
    gt * gr * free_space_loss(d, radio.carrier_hz())
}

fn bs_gain(radio: &RadioConfig, bs: &GeodeticPoint, user: &GeodeticPoint) -> f64 {
    let d = distance(&bs.to_ecef(), &user.to_ecef());
    radio.terrestrial_reference_gain * d.powf(-radio.path_loss_exponent)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn fading_for(scene: &Scene, values: &[(LinkId, f64)]) -> FadingRealization {
    let mut f = FadingRealization::unit();
    for l in scene.all_links() {
        f.set(l, 1.0);
    }
    for (l, v) in values {
        f.set(*l, *v);
    }
    f
}

#[test]
fn idle_interferers_leave_pure_snr() {
    let r = radio();
    let user = ground(0.0, 0.0);
    let a = sat(0, 0.0, 0.0, 500.0, &user, 5.0, true);
    let b = sat(0, 0.3, 0.1, 550.0, &user, 5.0, false);
    let users = UserSet { ngso1: vec![user], ..Default::default() };
    let scene = Scene::new(0.0, r.clone(), vec![a.clone()], vec![b], users, vec![], 5.0);
    let rep = sinr_ngso1_user(&scene, 0, &FadingRealization::unit()).unwrap();
    let bore = diff(a.position.to_array(), user.to_ecef().to_array());
    let snr = 5.0 * sat_gain(&r, &a, &user, Some(bore), System::Ngso1) / noise_power(&r.noise);
    assert!(rel(rep.sinr, snr) < 1e-12);
    assert_eq!(rep.interference_ngso, 0.0);
    assert_eq!(rep.noise, noise_power(&r.noise));
}

#[test]
fn identical_interferer_halves_the_sinr() {
    let r = radio();
    let user = ground(0.0, 0.0);
    let a = sat(0, 0.0, 0.0, 500.0, &user, 5.0, true);
    let twin = |id| sat(id, 0.0, 0.0, 500.0, &user, 5.0, true);
    let users = UserSet { ngso1: vec![user], ..Default::default() };
    let one = Scene::new(0.0, r.clone(), vec![a.clone()], vec![twin(0)], users.clone(), vec![], 5.0);
    let two = Scene::new(0.0, r.clone(), vec![a.clone()], vec![twin(0), twin(1)], users, vec![], 5.0);
    let f = FadingRealization::unit();
    let s1 = sinr_ngso1_user(&one, 0, &f).unwrap();
    let s2 = sinr_ngso1_user(&two, 0, &f).unwrap();
    assert!(rel(s1.interference_ngso, s1.desired) < 1e-12);
    assert!(rel(s1.sinr, s1.desired / (s1.desired + s1.noise)) < 1e-12);
    assert!(s1.noise < 1e-3 * s1.desired);
    assert!((s2.sinr / s1.sinr - 0.5).abs() < 1e-3);
}

struct Fixture {
    radio: RadioConfig,
    scene: Scene,
}

/// NGSO 1 user with two NGSO 2 interferers and one BS; NGSO 2 user with one
/// NGSO 1 interferer; BS user with one satellite of each system and one
/// other BS.
fn fixture() -> Fixture {
    let r = radio();
    let u1 = ground(0.0, 0.0);
    let u2 = ground(0.05, 0.02);
    let ub = ground(-0.04, 0.03);
    let ngso1 = vec![sat(0, 0.0, 0.0, 500.0, &u1, 3.0, true)];
    let ngso2 = vec![
        sat(0, 0.02, 0.04, 550.0, &u2, 4.0, true),
        sat(1, -0.03, 0.01, 550.0, &u1, 4.0, true),
    ];
    let bss = vec![ground(-0.0405, 0.0305), ground(0.5, 0.5)];
    let users = UserSet {
        ngso1: vec![u1],
        ngso2: vec![u2],
        bs: vec![ub],
    };
    let scene = Scene::new(0.0, r.clone(), ngso1, ngso2, users, bss, 2.0);
    Fixture { radio: r, scene }
}

fn link(tx: Transmitter, class: UserClass, user: usize) -> LinkId {
    LinkId { tx, class, user }
}

#[test]
fn ngso1_sinr_matches_hand_computation() {
    let Fixture { radio: r, scene } = fixture();
    let u1 = scene.users.ngso1[0];
    let cov = scene.coverage();
    assert_eq!(cov.n_s1(0), 2);
    let h = [
        (link(Transmitter::Sat(System::Ngso1, 0), UserClass::Ngso1, 0), 0.7),
        (link(Transmitter::Sat(System::Ngso2, 0), UserClass::Ngso1, 0), 1.3),
        (link(Transmitter::Sat(System::Ngso2, 1), UserClass::Ngso1, 0), 0.4),
        (link(Transmitter::Bs(0), UserClass::Ngso1, 0), 2.1),
        (link(Transmitter::Bs(1), UserClass::Ngso1, 0), 0.2),
    ];
    let f = fading_for(&scene, &h);
    let rep = sinr_ngso1_user(&scene, 0, &f).unwrap();

    let bore = diff(scene.ngso1[0].position.to_array(), u1.to_ecef().to_array());
    let s = 3.0 * sat_gain(&r, &scene.ngso1[0], &u1, Some(bore), System::Ngso1) * 0.7;
    let i_sat = 4.0 * sat_gain(&r, &scene.ngso2[0], &u1, Some(bore), System::Ngso1) * 1.3
        + 4.0 * sat_gain(&r, &scene.ngso2[1], &u1, Some(bore), System::Ngso1) * 0.4;
    let i_bs = 2.0 * bs_gain(&r, &scene.base_stations[0], &u1) * 2.1 + 2.0 * bs_gain(&r, &scene.base_stations[1], &u1) * 0.2;
    let n = noise_power(&r.noise);
    assert!(rel(rep.desired, s) < 1e-12);
    assert!(rel(rep.interference_ngso, i_sat) < 1e-12);
    assert!(rel(rep.interference_bs, i_bs) < 1e-12);
    assert!(rel(rep.sinr, s / (i_sat + i_bs + n)) < 1e-12);
}

#[test]
fn ngso2_sinr_matches_hand_computation() {
    let Fixture { radio: r, scene } = fixture();
    let u2 = scene.users.ngso2[0];
    let cov = scene.coverage();
    let serving = scene.serving_ngso2[0].unwrap();
    let interferers = cov.n_s2(0);
    assert_eq!(interferers, 1);
    let f = fading_for(
        &scene,
        &[
            (link(Transmitter::Sat(System::Ngso2, serving.sat), UserClass::Ngso2, 0), 1.1),
            (link(Transmitter::Sat(System::Ngso1, 0), UserClass::Ngso2, 0), 0.9),
        ],
    );
    let rep = sinr_ngso2_user(&scene, 0, &f).unwrap();
    let srv = &scene.ngso2[serving.sat];
    let bore = diff(srv.position.to_array(), u2.to_ecef().to_array());
    let s = 4.0 * sat_gain(&r, srv, &u2, Some(bore), System::Ngso2) * 1.1;
    let i_sat = 3.0 * sat_gain(&r, &scene.ngso1[0], &u2, Some(bore), System::Ngso2) * 0.9;
    let i_bs: f64 = scene.base_stations.iter().map(|b| 2.0 * bs_gain(&r, b, &u2)).sum();
    let n = noise_power(&r.noise);
    assert!(rel(rep.sinr, s / (i_sat + i_bs + n)) < 1e-12);
}

#[test]
fn bs_sinr_matches_hand_computation() {
    let Fixture { radio: r, scene } = fixture();
    let ub = scene.users.bs[0];
    assert_eq!(scene.serving_bs(0).unwrap(), 0);
    let cov = scene.coverage();
    assert_eq!((cov.n_s3(0), cov.n_s4(0)), (1, 2));
    let f = fading_for(&scene, &[(link(Transmitter::Bs(0), UserClass::Bs, 0), 0.5)]);
    let rep = sinr_bs_user(&scene, 0, &f).unwrap();
    let s = 2.0 * bs_gain(&r, &scene.base_stations[0], &ub) * 0.5;
    let i_sat = 3.0 * sat_gain(&r, &scene.ngso1[0], &ub, None, System::Ngso1)
        + scene.ngso2.iter().map(|x| 4.0 * sat_gain(&r, x, &ub, None, System::Ngso2)).sum::<f64>();
    let i_bs = 2.0 * bs_gain(&r, &scene.base_stations[1], &ub);
    let n = noise_power(&r.noise);
    assert!(rel(rep.interference_ngso, i_sat) < 1e-12);
    assert!(rel(rep.sinr, s / (i_sat + i_bs + n)) < 1e-12);
}

#[test]
fn bs_user_without_satellites() {
    let r = radio();
    let ub = ground(10.0, 10.0);
    let bs = ground(10.001, 10.0);
    let users = UserSet { bs: vec![ub], ..Default::default() };
    let scene = Scene::new(0.0, r.clone(), vec![], vec![], users.clone(), vec![bs], 1.5);
    let rep = sinr_bs_user(&scene, 0, &FadingRealization::unit()).unwrap();
    let snr = 1.5 * bs_gain(&r, &bs, &ub) / noise_power(&r.noise);
    assert!(rel(rep.sinr, snr) < 1e-12);

    // Mirror-image BSs: the lower id serves, the other is one inter-cell term.
    let ub = ground(10.0, 0.0);
    let east = ground(10.0, 0.002);
    let west = ground(10.0, -0.002);
    let scene = Scene::new(0.0, r.clone(), vec![], vec![], UserSet { bs: vec![ub], ..Default::default() }, vec![east, west], 1.5);
    assert_eq!(scene.serving_bs(0).unwrap(), 0);
    let rep = sinr_bs_user(&scene, 0, &FadingRealization::unit()).unwrap();
    let s = 1.5 * bs_gain(&r, &east, &ub);
    let i = 1.5 * bs_gain(&r, &west, &ub);
    assert!(rel(rep.interference_bs, i) < 1e-12);
    assert!(rel(rep.sinr, s / (i + noise_power(&r.noise))) < 1e-12);

    let none = Scene::new(0.0, r, vec![], vec![], UserSet { bs: vec![ub], ..Default::default() }, vec![], 1.0);
    assert!(matches!(sinr_bs_user(&none, 0, &FadingRealization::unit()), Err(sgin_core::Error::NoServingBs(0))));
}

#[test]
fn uncovered_user_has_no_serving_satellite() {
    let r = radio();
    let user = ground(0.0, 0.0);
    let far = sat(0, 0.0, 90.0, 500.0, &ground(0.0, 90.0), 5.0, true);
    let users = UserSet { ngso1: vec![user], ..Default::default() };
    let scene = Scene::new(0.0, r, vec![far], vec![], users, vec![], 1.0);
    assert!(matches!(
        sinr_ngso1_user(&scene, 0, &FadingRealization::unit()),
        Err(sgin_core::Error::NoServingSatellite(0))
    ));
}

#[test]
fn scheduled_away_idle_beams_give_the_weighted_sinr() {
    let scenario = Scenario::load(std::path::Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/reference.json")))
        .unwrap()
        .scenario;
    let mut scene = scenario.reference_scene();
    let mut rng = sgin_core::channel::rng_stream(3, 0);
    scene.draw_traffic(&scenario.traffic, &mut rng);
    let fading = FadingRealization::draw(&scene, &mut rng);
    let powers = scene.powers();
    let cov = scene.coverage();
    let weighted: Vec<_> = UserClass::ALL
        .iter()
        .flat_map(|&c| (0..scene.users.of(c).len()).map(move |u| (c, u)))
        .filter_map(|(c, u)| scene.user_links(c, u, &cov, InterferenceMode::TrafficWeighted).ok().map(|l| l.report(&powers, &fading)))
        .collect();
    for system in [System::Ngso1, System::Ngso2] {
        for s in scene.sats_mut(system).iter_mut() {
            for b in s.beams.iter_mut() {
                b.enabled &= b.traffic;
            }
        }
    }
    let cov = scene.coverage();
    let radiating: Vec<_> = UserClass::ALL
        .iter()
        .flat_map(|&c| (0..scene.users.of(c).len()).map(move |u| (c, u)))
        .filter_map(|(c, u)| scene.user_links(c, u, &cov, InterferenceMode::Radiating).ok().map(|l| l.report(&powers, &fading)))
        .collect();
    assert_eq!(weighted.len(), radiating.len());
    for (w, r) in weighted.iter().zip(&radiating) {
        assert!(rel(r.sinr, w.sinr) < 1e-12);
    }
}

#[test]
fn throughput_examples() {
    assert_eq!(shannon_rate(125e6, 0.0), 0.0);
    assert!((shannon_rate(125e6, 1.0) - 125e6).abs() < 1e-6);
    let r = shannon_rate(125e6, 10.0);
    assert!((r - 125e6 * 11f64.log2()).abs() < 1e-6);
    assert!((r - 432.43e6).abs() < 0.01e6);

    let radio = radio();
    let user = ground(0.0, 0.0);
    let a = sat(0, 0.0, 0.0, 500.0, &user, 5.0, true);
    let users = UserSet { ngso1: vec![user, ground(60.0, 0.0)], ..Default::default() };
    let scene = Scene::new(0.0, radio, vec![a], vec![], users, vec![], 1.0);
    let f = FadingRealization::unit();
    let t = snapshot_throughput(&scene, &f);
    let sinr = sinr_ngso1_user(&scene, 0, &f).unwrap().sinr;
    assert!(rel(t[0], shannon_rate(125e6, sinr)) < 1e-12);
    assert_eq!(t[1], 0.0);
}

proptest! {
    #[test]
    fn sinr_is_monotone_in_powers(
        desired in 1e-12f64..1e-6,
        i in prop::array::uniform3(0.0f64..1e-7),
        noise in 1e-14f64..1e-12,
        p in prop::array::uniform3(0.01f64..10.0),
        class in 0usize..3,
        scale in 1.01f64..4.0,
    ) {
        let desired_class = [PowerClass::Ngso1, PowerClass::Ngso2, PowerClass::Bs][class];
        let mut interference = i;
        interference[class] = 0.0;
        let c = SinrCoefficients { desired_class, desired, interference, noise };
        let base = c.sinr(p);
        let mut up = p;
        up[class] *= scale;
        prop_assert!(c.sinr(up) > base);
        for other in (0..3).filter(|&k| k != class) {
            let mut q = p;
            q[other] *= scale;
            prop_assert!(c.sinr(q) <= base);
        }
    }
}
