//! Link physics and geometry checked against independent oracles and
//! property suites.

use proptest::prelude::*;
use qsat_core::environment::{atmospheric_transmissivity, effective_transmissivity, WeatherRecord};
use qsat_core::linkphys::*;
use qsat_core::orbital::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Brute force over every survival bit of every photon and every dark-click
/// bit of every detector, for each term of the two-pair truncated state.
/// Returns (accepted probability, accepted single-pair probability with both
/// photons delivered).
fn enumerate(ns: f64, e1: f64, d1: f64, e2: f64, d2: f64) -> (f64, f64) {
    let p = |n: i32| (n as f64 + 1.0) * ns.powi(n) / (ns + 1.0).powi(n + 2);
    let z = p(0) + p(1) + p(2);
    // photons per rail (a1, a2, b1, b2) and term weight
    let terms: Vec<(bool, [u32; 4], f64)> = vec![
        (false, [0, 0, 0, 0], p(0) / z),
        (true, [1, 0, 0, 1], p(1) / z / 2.0),
        (true, [0, 1, 1, 0], p(1) / z / 2.0),
        (false, [2, 0, 0, 2], p(2) / z / 3.0),
        (false, [1, 1, 1, 1], p(2) / z / 3.0),
        (false, [0, 2, 2, 0], p(2) / z / 3.0),
    ];
    let eta = [e1, e1, e2, e2];
    let dark = [d1, d1, d2, d2];
    let (mut accept, mut bell) = (0.0, 0.0);
    for (single, rails, w) in terms {
        // each photon gets its own survival bit, ordered rail by rail
        let owners: Vec<usize> = (0..4).flat_map(|r| std::iter::repeat(r).take(rails[r] as usize)).collect();
        for survive in 0u32..(1 << owners.len()) {
            let mut prob = w;
            let mut arrived = [0u32; 4];
            for (b, &r) in owners.iter().enumerate() {
                if survive >> b & 1 == 1 {
                    prob *= eta[r];
                    arrived[r] += 1;
                } else {
                    prob *= 1.0 - eta[r];
                }
            }
            for darks in 0u32..16 {
                let mut q = prob;
                let mut click = [false; 4];
                for r in 0..4 {
                    let on = darks >> r & 1 == 1;
                    q *= if on { dark[r] } else { 1.0 - dark[r] };
                    click[r] = on || arrived[r] > 0;
                }
                if click[0] != click[1] && click[2] != click[3] {
                    accept += q;
                    if single && survive == 0b11 {
                        bell += q;
                    }
                }
            }
        }
    }
    (accept, bell)
}

#[test]
fn outcome_matches_enumeration_example() {
    let src = SourceParams::default();
    let o = end_to_end_outcome(&src, &ArmChannel::new(0.05, 0.0), &ArmChannel::new(0.05, 0.0));
    let (acc, _) = enumerate(0.0078, 0.05, 0.0, 0.05, 0.0);
    assert!((o.success_prob - acc).abs() < 1e-10);
}

#[test]
fn outcome_matches_enumeration_random() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let ns = rng.gen_range(0.0..0.2);
        let (e1, e2) = (rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0));
        let (d1, d2) = (rng.gen_range(0.0..0.1), rng.gen_range(0.0..0.1));
        let src = SourceParams {
            mean_photon_number: ns,
            ..Default::default()
        };
        let o = end_to_end_outcome(&src, &ArmChannel::new(e1, d1), &ArmChannel::new(e2, d2));
        let (acc, bell) = enumerate(ns, e1, d1, e2, d2);
        assert!((o.success_prob - acc).abs() < 1e-10);
        let f = if acc > 0.0 { bell / acc } else { 0.0 };
        assert!((o.fidelity - f).abs() < 1e-10);
        assert!((o.edr / src.repetition_rate - o.success_prob).abs() <= 1e-12 * o.success_prob);
    }
}

#[test]
fn normalization_with_tail() {
    for ns in [1e-6, 0.0078, 0.1, 1.0, 5.0] {
        for k in [0, 2, 10] {
            let head: f64 = (0..=k).map(|n| emission_prob(ns, n)).sum();
            assert!((head + emission_tail(ns, k) - 1.0).abs() < 1e-12, "ns {ns} k {k}");
        }
    }
    // neglected weight of the two-pair truncation at the design point
    assert!(emission_tail(0.0078, 2) < 2e-6);
}

#[test]
fn success_monotone_in_transmissivity() {
    let src = SourceParams::default();
    let grid: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    for &pd in &[0.0, 1e-4, 0.05, 0.4] {
        for &other in &grid {
            let mut last = -1.0;
            for &eta in &grid {
                let s = end_to_end_outcome(&src, &ArmChannel::new(eta, pd), &ArmChannel::new(other, pd)).success_prob;
                assert!(s >= last * (1.0 - 1e-12), "pd {pd} other {other} eta {eta}");
                last = s;
            }
        }
    }
}

#[test]
fn fidelity_monotone_in_dark_clicks() {
    let src = SourceParams::default();
    let grid: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    for &e1 in &grid[1..] {
        for &e2 in &grid[1..] {
            let mut last = f64::INFINITY;
            for &pd in &grid {
                let f = end_to_end_outcome(&src, &ArmChannel::new(e1, pd), &ArmChannel::new(e2, 0.0)).fidelity;
                assert!(f <= last + 1e-15, "e1 {e1} e2 {e2} pd {pd}");
                last = f;
            }
        }
    }
}

#[test]
fn tradeoff_shape() {
    let grid: Vec<f64> = (0..20).map(|k| 10f64.powf(-4.0 + 3.0 * k as f64 / 19.0)).collect();
    for eta in [1.0, 0.3, 0.05, 1e-3] {
        let a = ArmChannel::new(eta, 0.0);
        let c = rate_fidelity_curve(&grid, &SourceParams::default(), &a, &a);
        for w in c.windows(2) {
            assert!(w[1].1 > w[0].1, "edr not increasing at eta {eta}");
            assert!(w[1].2 < w[0].2, "fidelity not decreasing at eta {eta}");
        }
    }
}

#[test]
fn arcs_agree_with_dense_sampling() {
    let re = EARTH_RADIUS;
    for (baseline, alt, theta) in [(1_000e3, 1_000e3, 20.0), (2_500e3, 800e3, 10.0), (300e3, 500e3, 30.0)] {
        let arcs = overhead_visibility_arcs(baseline, alt, theta, re);
        let ro = re + alt;
        let arc = arcs.primary_arc.expect("overlap exists");
        let elev = |a: f64| {
            (
                coplanar_elevation(a, arcs.station1_angle, re, ro),
                coplanar_elevation(a, arcs.station2_angle, re, ro),
            )
        };
        for k in 0..=1000 {
            let a = arc.start + arc.width() * k as f64 / 1000.0;
            let (e1, e2) = elev(a);
            assert!(e1 >= theta - 1e-9 && e2 >= theta - 1e-9);
        }
        for a in [arc.start - 1e-4, arc.end + 1e-4] {
            let (e1, e2) = elev(a);
            assert!(e1 < theta || e2 < theta);
        }
    }
}

#[test]
fn elevation_continuous_along_pass() {
    let cfg = ConstellationConfig {
        rings: 2,
        sats_per_ring: 4,
        altitude: 500e3,
        ..Default::default()
    };
    let gs = [GroundStation::new("G", 12.0, 3.0)];
    let mut last: Option<Vec<f64>> = None;
    for t in 0..2000 {
        let snap = propagate(&cfg, &gs, t, 10.0).unwrap();
        let e: Vec<f64> = snap
            .sat_ids
            .iter()
            .map(|s| link_geometry(&snap, s, "G", 20e3).unwrap().elevation)
            .collect();
        if let Some(prev) = &last {
            for (a, b) in prev.iter().zip(&e) {
                assert!((a - b).abs() <= 5.0, "jump at slot {t}: {a} -> {b}");
            }
        }
        last = Some(e);
    }
}

fn station() -> impl Strategy<Value = GroundStation> {
    (-90.0..=90.0f64, -180.0..180.0f64).prop_map(|(la, lo)| GroundStation::new("p", la, lo))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn positions_have_orbit_radius(t in 0usize..100_000, alt in 300e3..2000e3f64, rings in 1usize..6, spr in 1usize..8) {
        let cfg = ConstellationConfig { rings, sats_per_ring: spr, altitude: alt, ..Default::default() };
        let gs = [GroundStation::new("g", 10.0, 20.0)];
        let snap = propagate(&cfg, &gs, t, 10.0).unwrap();
        for p in &snap.sat_positions {
            prop_assert!((norm(*p) / (EARTH_RADIUS + alt) - 1.0).abs() < 1e-6);
        }
        prop_assert!((norm(snap.gs_positions[0]) / EARTH_RADIUS - 1.0).abs() < 1e-9);
    }

    #[test]
    fn geometry_is_physical(lat in -90.0..=90.0f64, lon in -180.0..180.0f64, t in 0usize..10_000) {
        let cfg = ConstellationConfig { rings: 3, sats_per_ring: 3, ..Default::default() };
        let snap = propagate(&cfg, &[GroundStation::new("g", lat, lon)], t, 10.0).unwrap();
        for s in &snap.sat_ids {
            let g = link_geometry(&snap, s, "g", 20e3).unwrap();
            prop_assert!((-90.0..=90.0).contains(&g.elevation));
            prop_assert!(g.atmospheric_path <= g.slant_range);
            prop_assert!(g.slant_range >= cfg.altitude - 1e-6);
        }
    }

    #[test]
    fn visibility_symmetric(t in 0usize..10_000, clearance in 0.0..500e3f64) {
        let cfg = ConstellationConfig { rings: 3, sats_per_ring: 4, ..Default::default() };
        let snap = propagate(&cfg, &[], t, 10.0).unwrap();
        for a in &snap.sat_ids {
            for b in &snap.sat_ids {
                prop_assert_eq!(
                    inter_satellite_visible(&snap, a, b, clearance).unwrap(),
                    inter_satellite_visible(&snap, b, a, clearance).unwrap()
                );
            }
        }
    }

    #[test]
    fn geodesic_is_a_metric(a in station(), b in station(), c in station()) {
        let d = |x: &GroundStation, y: &GroundStation| geodesic_distance(x, y, EARTH_RADIUS);
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() < 1e-6);
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-6);
    }

    #[test]
    fn probabilities_in_unit_interval(
        ns in 0.0..10.0f64, e1 in 0.0..=1.0f64, e2 in 0.0..=1.0f64, d1 in 0.0..=1.0f64, d2 in 0.0..=1.0f64
    ) {
        let src = SourceParams { mean_photon_number: ns, ..Default::default() };
        let o = end_to_end_outcome(&src, &ArmChannel::new(e1, d1), &ArmChannel::new(e2, d2));
        prop_assert!((0.0..=1.0).contains(&o.success_prob));
        prop_assert!((0.0..=1.0).contains(&o.fidelity));
        prop_assert!((o.edr - src.repetition_rate * o.success_prob).abs() <= 1e-12 * o.edr);
        for n in 0..5 {
            prop_assert!((0.0..=1.0).contains(&emission_prob(ns, n)));
        }
    }

    #[test]
    fn attenuation_ordering(zenith in 0.01..=1.0f64, e in -10.0..=90.0f64, cloud in 0.0..=1.0f64) {
        let rec = WeatherRecord {
            station_id: "g".into(), month: 1, hour_utc: 0,
            zenith_transmissivity: zenith, cloud_cover: cloud, solar_irradiance: 0.0,
        };
        let atm = atmospheric_transmissivity(zenith, e);
        prop_assert!(effective_transmissivity(&rec, e) <= atm);
        prop_assert!(atm <= zenith);
        if zenith < 1.0 && e > 0.0 && e < 89.0 {
            prop_assert!(atmospheric_transmissivity(zenith, e + 1.0) > atm);
        }
    }
}
