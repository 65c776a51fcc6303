mod common;

use bebfleet::twin::{
    fit_road_load, lumped_parameters, road_load_force, trip_energy, BrakeAllocation, ChargingCurve,
    DigitalTwin, MotorEfficiencyMap, TripProfile, TripSample,
};
use proptest::prelude::*;
use rand_distr::{Distribution, Normal};

fn bundled_twin() -> DigitalTwin {
    let p = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/twins/bus_40ft.json");
    DigitalTwin::from_json_file(&p).unwrap()
}

/// Smooth service-like speed trace with hills, bends and a head wind.
fn smooth_profile(dt: f64, duration: f64) -> TripProfile {
    let n = (duration / dt).round() as usize;
    let samples = (0..=n)
        .map(|k| {
            let t = k as f64 * dt;
            let w = 2.0 * std::f64::consts::PI / 120.0;
            let speed = 8.0 + 6.0 * (w * t).sin();
            let accel = 6.0 * w * (w * t).cos();
            let s = 8.0 * t - 6.0 / w * ((w * t).cos() - 1.0);
            TripSample {
                time: t,
                speed,
                accel,
                bearing: 0.0,
                path_position: s,
                grade: 0.03 * (s / 700.0).sin(),
                curvature_radius: 60.0 + 20.0 * (t / 50.0).cos(),
                wind_speed: 3.0,
                wind_bearing: std::f64::consts::PI,
                tire_pressure: 790.0,
            }
        })
        .collect();
    TripProfile::new(samples)
}

fn energy(twin: &DigitalTwin, p: &TripProfile) -> f64 {
    trip_energy(
        &twin.vehicle_params,
        &twin.efficiency_map,
        &twin.brake_allocation,
        &twin.charging_curve,
        p,
    )
    .unwrap()
}

#[test]
fn coarse_trip_energy_matches_a_ten_times_finer_step() {
    let twin = bundled_twin();
    let coarse = energy(&twin, &smooth_profile(1.0, 3600.0));
    let fine = energy(&twin, &smooth_profile(0.1, 3600.0));
    assert!(((coarse - fine) / fine).abs() < 1e-3, "{coarse} vs {fine}");
}

#[test]
fn noiseless_fit_recovers_lumped_parameters() {
    let truth = common::vehicle();
    let profile = smooth_profile(1.0, 1800.0);
    let forces = profile
        .samples
        .iter()
        .map(|s| road_load_force(&truth, s))
        .collect();
    let fit = fit_road_load(&[(profile, forces)], truth.mass_total, truth.gravity).unwrap();
    for (got, want) in fit.as_array().iter().zip(lumped_parameters(&truth)) {
        assert!(((got - want) / want).abs() < 1e-3, "{got} vs {want}");
    }
}

#[test]
fn noisy_fit_stays_close() {
    let truth = common::vehicle();
    let mut r = common::rng(11);
    let noise = Normal::new(0.0, 50.0).unwrap();
    let logs: Vec<_> = (0..4)
        .map(|k| {
            let profile = smooth_profile(0.5 + 0.1 * k as f64, 3600.0);
            let forces = profile
                .samples
                .iter()
                .map(|s| road_load_force(&truth, s) + noise.sample(&mut r))
                .collect();
            (profile, forces)
        })
        .collect();
    let fit = fit_road_load(&logs, truth.mass_total, truth.gravity).unwrap();
    assert!(
        (fit.residual_rms - 50.0).abs() < 5.0,
        "{}",
        fit.residual_rms
    );
    for (got, want) in fit.as_array().iter().zip(lumped_parameters(&truth)) {
        assert!(((got - want) / want).abs() < 0.05, "{got} vs {want}");
    }
}

#[test]
fn bundled_cycles_cost_a_plausible_energy_per_mile() {
    let twin = bundled_twin();
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/profiles");
    for name in ["urban-3h", "crosstown-5h", "suburban-4h", "express-6h"] {
        let f = std::fs::File::open(dir.join(format!("{name}.csv"))).unwrap();
        let p = TripProfile::from_csv(f).unwrap();
        let miles = p.samples.last().unwrap().path_position / 1609.344;
        let per_mile = energy(&twin, &p) / miles;
        assert!((1.0..4.0).contains(&per_mile), "{name}: {per_mile} kWh/mi");
    }
}

proptest! {
    #[test]
    fn flat_cruise_matches_closed_form(v in 0.5f64..25.0, hours in 0.1f64..3.0, eta in 0.6f64..0.98) {
        let mut twin = common::twin(ChargingCurve::flat(100.0));
        twin.efficiency_map = MotorEfficiencyMap::uniform(eta);
        let vp = &twin.vehicle_params;
        let secs = hours * 3600.0;
        let p = TripProfile::new(vec![TripSample::level(0.0, v, 0.0), TripSample::level(secs, v, 0.0)]);
        let force = vp.mass_total * vp.gravity * vp.rolling_coeff + vp.aero_coeff * v * v;
        let closed = (force * v / eta / 1000.0 + vp.aux_power) * hours;
        let got = energy(&twin, &p);
        prop_assert!(((got - closed) / closed).abs() < 1e-9, "{} vs {}", got, closed);
    }

    #[test]
    fn charge_and_time_round_trip(from in 0.0f64..0.95, minutes in 0.5f64..120.0, cap in 100.0f64..600.0) {
        let curve = bundled_twin().charging_curve.clipped(120.0);
        let to = curve.charge_added(cap, from, minutes);
        prop_assume!(to < 1.0 - 1e-9);
        let back = curve.time_to_charge(cap, from, to).unwrap();
        prop_assert!(((back - minutes) / minutes).abs() < 1e-9, "{} vs {}", back, minutes);
    }

}

#[test]
fn slow_braking_is_all_friction() {
    let mut twin = common::twin(ChargingCurve::flat(150.0));
    twin.vehicle_params.aux_power = 0.0;
    twin.brake_allocation = BrakeAllocation {
        regen_min_speed: 50.0,
        max_regen_force: 1e6,
    };
    let p = TripProfile::new(
        (0..=20)
            .map(|k| TripSample::level(k as f64, 20.0 - k as f64, -1.0))
            .collect(),
    );
    assert_eq!(energy(&twin, &p), 0.0);
}
