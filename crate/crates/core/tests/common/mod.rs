#![allow(dead_code)]

pub mod depot;
pub mod geometry;

use bebfleet::model::{
    Block, Bus, BusType, Charger, OperationalConstraints, RouteDescriptor, Scenario, TimeGrid,
};
use bebfleet::solver::{build_instance, Instance};
use bebfleet::twin::{
    BrakeAllocation, ChargingCurve, DigitalTwin, MotorEfficiencyMap, TwinLibrary, VehicleParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seed from `FLEET_SEED`, or a fixed default.
pub fn seed() -> u64 {
    std::env::var("FLEET_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(20_240_607)
}

pub fn rng(offset: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed().wrapping_add(offset))
}

pub fn vehicle() -> VehicleParams {
    VehicleParams {
        mass_total: 15000.0,
        mass_effective: 15600.0,
        aero_coeff: 3.0,
        rolling_coeff: 0.008,
        cornering_stiffness: 2.0e5,
        config_id: "std".into(),
        aux_power: 5.0,
        gravity: 9.81,
    }
}

pub fn twin(curve: ChargingCurve) -> DigitalTwin {
    DigitalTwin {
        vehicle_params: vehicle(),
        efficiency_map: MotorEfficiencyMap::uniform(0.9),
        brake_allocation: BrakeAllocation {
            regen_min_speed: 3.0,
            max_regen_force: 20000.0,
        },
        charging_curve: curve,
    }
}

pub fn library_for(s: &Scenario, curve: ChargingCurve) -> TwinLibrary {
    let mut lib = TwinLibrary::default();
    for t in &s.bus_types {
        lib.twins.insert(t.twin_id.clone(), twin(curve.clone()));
    }
    lib
}

/// A random instance. `oracle` keeps it inside the brute-force domain.
pub fn random_instance(r: &mut ChaCha8Rng, oracle: bool) -> Instance {
    let (max_buses, max_blocks, slots) = if oracle {
        (2, 4, r.random_range(6..=12))
    } else {
        (
            r.random_range(1..=4),
            r.random_range(0..=8),
            r.random_range(12..=32),
        )
    };
    let buses = r.random_range(1..=max_buses);
    let n_blocks = r.random_range(0..=max_blocks);
    let chargers = r.random_range(0..=2usize);
    let capacity = [200.0, 300.0, 400.0][r.random_range(0..3)];
    let bus_types = vec![
        BusType {
            id: "std".into(),
            battery_capacity: capacity,
            compatible_profile: ["40ft".to_string()].into(),
            twin_id: "twin".into(),
        },
        BusType {
            id: "long".into(),
            battery_capacity: capacity * 1.5,
            compatible_profile: ["40ft".to_string(), "60ft".to_string()].into(),
            twin_id: "twin".into(),
        },
    ];
    let buses: Vec<Bus> = (0..buses)
        .map(|i| {
            let soc_min = r.random_range(0.15..0.4);
            let soc_max = if r.random_bool(0.7) {
                1.0
            } else {
                r.random_range(0.85..1.0)
            };
            let soc_initial = r.random_range(soc_min..soc_max);
            let soc_final_target = r.random_range(soc_min + 0.01..soc_max);
            Bus {
                id: format!("b{i}"),
                bus_type: if r.random_bool(0.7) { "std" } else { "long" }.into(),
                soc_initial,
                soc_min,
                soc_max,
                soc_final_target,
            }
        })
        .collect();
    let blocks: Vec<Block> = (0..n_blocks)
        .map(|k| {
            let len = r.random_range(1..=4.min(slots - 1));
            let start = r.random_range(0..slots - len);
            let frac: f64 = r.random_range(0.03..0.5);
            Block {
                id: format!("k{k}"),
                start_slot: start,
                end_slot: start + len,
                distance: r.random_range(5..80) as f64,
                route: RouteDescriptor::Energy(
                    [
                        ("std".to_string(), frac * capacity),
                        ("long".to_string(), frac * capacity * 1.2),
                    ]
                    .into(),
                ),
                required_profile: if r.random_bool(0.2) {
                    ["60ft".to_string()].into()
                } else {
                    ["40ft".to_string()].into()
                },
            }
        })
        .collect();
    let peak_start = r.random_range(0..slots);
    let peak_end = r.random_range(peak_start..=slots);
    let min_buses_in_service = if n_blocks > 0 && r.random_bool(0.3) {
        let b = &blocks[r.random_range(0..n_blocks)];
        vec![(b.start_slot, 1)]
    } else {
        vec![]
    };
    let s = Scenario {
        grid: TimeGrid::new(300, 15, slots),
        bus_types,
        buses,
        blocks,
        chargers: (0..chargers)
            .map(|c| Charger {
                id: format!("c{c}"),
                spot_id: format!("s{c}"),
                max_power: r.random_range(50..200) as f64,
            })
            .collect(),
        constraints: OperationalConstraints {
            max_concurrent_sessions_peak: r.random_range(0..=chargers),
            peak_window: (peak_start, peak_end),
            min_buses_in_service,
            setup_slots: if r.random_bool(0.8) { 1 } else { 2 },
        },
        depot_map_id: None,
    };
    let curve = if r.random_bool(0.5) {
        ChargingCurve::flat(150.0)
    } else {
        ChargingCurve::default_for(150.0)
    };
    build_instance(&s, &library_for(&s, curve)).expect("generator emits valid scenarios")
}

/// A replay-sized day: more buses and blocks than the oracle allows.
pub fn random_day(r: &mut ChaCha8Rng) -> Instance {
    loop {
        let inst = random_instance(r, false);
        if inst.scenario().buses.len() >= 2 && !inst.scenario().blocks.is_empty() {
            return inst;
        }
    }
}
