"""Regenerates the bundled twins, trip profiles, scenarios, depot layout and parking maps.

The outputs are committed; rerunning with the same seed reproduces them.
"""

import json
import math
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent
rng = random.Random(20240607)


def dump(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n")


def twin(aux_kw, max_kw):
    return {
        "vehicle_params": {
            "mass_total": 15500.0,
            "mass_effective": 16200.0,
            "aero_coeff": 3.4,
            "rolling_coeff": 0.0085,
            "cornering_stiffness": 180000.0,
            "config_id": "40ft-low-floor",
            "aux_power": aux_kw,
        },
        "efficiency_map": {
            "force_axis": [0.0, 2000.0, 6000.0, 12000.0, 20000.0],
            "speed_axis": [0.0, 3.0, 8.0, 14.0, 20.0],
            "efficiency": [
                [0.55, 0.70, 0.78, 0.80, 0.78],
                [0.65, 0.82, 0.88, 0.90, 0.88],
                [0.70, 0.86, 0.92, 0.93, 0.91],
                [0.68, 0.85, 0.91, 0.92, 0.90],
                [0.62, 0.80, 0.87, 0.88, 0.86],
            ],
            "floor": 0.5,
        },
        "brake_allocation": {"regen_min_speed": 2.5, "max_regen_force": 25000.0},
        "charging_curve": {
            "breakpoints": [[0.0, 0.6 * max_kw], [0.15, max_kw], [0.85, max_kw], [1.0, 0.2 * max_kw]],
            "charge_efficiency": 0.94,
        },
    }


def drive_cycle(hours, cruise, dwell, grade_amp, dt=4.0):
    """Stop-and-go service: accelerate, cruise, brake, dwell at a stop."""
    rows = []
    t, s = 0.0, 0.0
    end = hours * 3600.0
    v, phase, left, target = 0.0, "dwell", rng.uniform(*dwell), rng.uniform(*cruise)
    while t <= end:
        if phase == "dwell":
            a = 0.0
            left -= dt
            if left <= 0:
                phase, target = "accel", rng.uniform(*cruise)
        elif phase == "accel":
            a = 0.9
            if v + a * dt >= target:
                a = (target - v) / dt
                phase, left = "cruise", rng.uniform(20, 90)
        elif phase == "cruise":
            a = 0.0
            left -= dt
            if left <= 0:
                phase = "brake"
        else:
            a = -1.1
            if v + a * dt <= 0:
                a = -v / dt
                phase, left = "dwell", rng.uniform(*dwell)
        grade = grade_amp * math.sin(s / 900.0)
        radius = 40.0 if rng.random() < 0.03 else "inf"
        rows.append((t, v, a, 0.0, s, grade, radius, 3.0, math.pi, 790.0))
        s += v * dt + 0.5 * a * dt * dt
        v = max(0.0, v + a * dt)
        t += dt
    return rows, s / 1609.344


def write_profile(name, rows):
    path = ROOT / "profiles" / f"{name}.csv"
    with path.open("w") as f:
        f.write("t_s,v_mps,a_mps2,bearing_rad,s_m,grade_rad,curve_radius_m,wind_mps,wind_bearing_rad,tire_kpa\n")
        for r in rows:
            f.write(",".join(f"{x:.4f}" if isinstance(x, float) else str(x) for x in r) + "\n")


def hhmm(minutes):
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


constraints_base = {"setup_slots": 1}
grid = {"day_start": "05:00", "slot_minutes": 15, "slot_count": 96}

# Twins.
dump(ROOT / "twins" / "bus_40ft.json", twin(aux_kw=12.0, max_kw=150.0))

# Route families: (name, hours, cruise m/s range, dwell s range, grade amplitude).
families = [
    ("urban-3h", 3.0, (7.0, 11.0), (15, 40), 0.015),
    ("crosstown-5h", 5.0, (8.0, 13.0), (12, 35), 0.02),
    ("suburban-4h", 4.0, (11.0, 16.0), (10, 25), 0.01),
    ("express-6h", 6.0, (13.0, 19.0), (8, 20), 0.012),
]
miles = {}
for name, hours, cruise, dwell, grade in families:
    rows, mi = drive_cycle(hours, cruise, dwell, grade)
    write_profile(name, rows)
    miles[name] = round(mi, 1)

# Full service day: 8 buses, 8 chargers, ~24 blocks starting 05:30 to 17:00.
blocks = []
starts = [30, 45, 60, 75, 90, 120, 150, 180, 240, 270, 300, 330, 360, 390, 420, 450, 480, 540, 570, 600, 630, 660, 690, 720]
for k, st in enumerate(starts):
    name, hours, *_ = families[k % len(families)]
    begin = 5 * 60 + st
    blocks.append({
        "id": f"blk-{k + 1:02d}",
        "start_slot": hhmm(begin),
        "end_slot": hhmm(begin + int(hours * 60)),
        "distance": miles[name],
        "route_descriptor": {"trip_profile": name},
        "required_profile": [],
    })
full_day = {
    "depot_map_id": "four-spot",
    "grid": grid,
    "bus_types": [{"id": "beb-440", "battery_capacity": 440.0, "compatible_profile": ["40ft"], "twin_id": "bus_40ft"}],
    "buses": [
        {"id": f"bus-{i + 1}", "bus_type": "beb-440", "soc_initial": 0.85, "soc_min": 0.35, "soc_max": 1.0,
         "soc_final_target": 0.85}
        for i in range(8)
    ],
    "blocks": blocks,
    "chargers": [{"id": f"chg-{i + 1}", "spot_id": f"charger-{i + 1}", "max_power": 150.0} for i in range(8)],
    "constraints": {
        "max_concurrent_sessions_peak": 3,
        "peak_window": ["06:00", "22:00"],
        "min_buses_in_service": [["16:00", 4]],
        **constraints_base,
    },
    "twins": {"bus_40ft": "../twins/bus_40ft.json"},
    "trip_profiles": {name: f"../profiles/{name}.csv" for name, *_ in families},
    "depot_layout": "../depots/full_day_layout.json",
}
dump(ROOT / "scenarios" / "full_day.json", full_day)

layout = [
    {"id": f"charger-{i + 1}", "kind": "charger", "charger_id": f"chg-{i + 1}",
     "pose": {"x": 4.0 * i, "y": 0.0, "heading": math.pi / 2}}
    for i in range(8)
] + [
    {"id": f"parking-{i + 1}", "kind": "parking-only", "pose": {"x": 4.0 * i, "y": 20.0, "heading": math.pi / 2}}
    for i in range(8)
]
dump(ROOT / "depots" / "full_day_layout.json", layout)


def energy_block(bid, start, end, miles_, kwh, type_id):
    return {"id": bid, "start_slot": start, "end_slot": end, "distance": miles_,
            "route_descriptor": {"energy_kwh": {type_id: kwh}}, "required_profile": []}


# Tight day: scarce charging makes planner pessimism expensive.
tight_blocks = [
    energy_block("t-01", "05:30", "08:30", 38.0, 95.0, "beb-300"),
    energy_block("t-02", "06:00", "09:30", 44.0, 105.0, "beb-300"),
    energy_block("t-03", "06:30", "10:00", 41.0, 100.0, "beb-300"),
    energy_block("t-04", "11:00", "14:00", 36.0, 90.0, "beb-300"),
    energy_block("t-05", "11:30", "15:00", 43.0, 102.0, "beb-300"),
    energy_block("t-06", "15:30", "18:30", 39.0, 96.0, "beb-300"),
    energy_block("t-07", "16:00", "19:30", 45.0, 108.0, "beb-300"),
]
tight = {
    "grid": grid,
    "bus_types": [{"id": "beb-300", "battery_capacity": 300.0, "compatible_profile": [], "twin_id": "bus_40ft"}],
    "buses": [
        {"id": f"bus-{i + 1}", "bus_type": "beb-300", "soc_initial": 0.9, "soc_min": 0.2, "soc_max": 1.0,
         "soc_final_target": 0.5}
        for i in range(3)
    ],
    "blocks": tight_blocks,
    "chargers": [{"id": "chg-1", "spot_id": "charger-1", "max_power": 50.0}],
    "constraints": {"max_concurrent_sessions_peak": 1, "peak_window": ["06:00", "22:00"],
                    "min_buses_in_service": [], **constraints_base},
    "twins": {"bus_40ft": "../twins/bus_40ft.json"},
}
dump(ROOT / "scenarios" / "tight.json", tight)

tiny = {
    "grid": {"day_start": "05:00", "slot_minutes": 15, "slot_count": 48},
    "bus_types": [{"id": "beb-440", "battery_capacity": 440.0, "compatible_profile": [], "twin_id": "bus_40ft"}],
    "buses": [
        {"id": "bus-1", "bus_type": "beb-440", "soc_initial": 0.85, "soc_min": 0.35, "soc_max": 1.0, "soc_final_target": 0.85},
        {"id": "bus-2", "bus_type": "beb-440", "soc_initial": 0.85, "soc_min": 0.35, "soc_max": 1.0, "soc_final_target": 0.85},
    ],
    "blocks": [
        energy_block("morning", "06:00", "09:00", 36.0, 120.0, "beb-440"),
        energy_block("midday", "10:00", "13:00", 34.0, 110.0, "beb-440"),
        energy_block("evening", "14:00", "16:30", 30.0, 95.0, "beb-440"),
    ],
    "chargers": [{"id": "chg-1", "spot_id": "charger-1", "max_power": 150.0}],
    "constraints": {"max_concurrent_sessions_peak": 1, "peak_window": ["06:00", "17:00"],
                    "min_buses_in_service": [], **constraints_base},
    "twins": {"bus_40ft": "../twins/bus_40ft.json"},
}
dump(ROOT / "scenarios" / "tiny.json", tiny)

impossible = {
    "grid": {"day_start": "05:00", "slot_minutes": 15, "slot_count": 48},
    "bus_types": [{"id": "beb-200", "battery_capacity": 200.0, "compatible_profile": [], "twin_id": "bus_40ft"}],
    "buses": [{"id": "bus-1", "bus_type": "beb-200", "soc_initial": 0.85, "soc_min": 0.35, "soc_max": 1.0,
               "soc_final_target": 0.4}],
    "blocks": [energy_block("marathon", "06:00", "14:00", 160.0, 320.0, "beb-200")],
    "chargers": [],
    "constraints": {"max_concurrent_sessions_peak": 0, "peak_window": ["06:00", "17:00"],
                    "min_buses_in_service": [["08:00", 1]], **constraints_base},
    "twins": {"bus_40ft": "../twins/bus_40ft.json"},
}
dump(ROOT / "scenarios" / "impossible.json", impossible)

# Parking maps: a 60 x 45 m yard, a lane along y = 10 and nose-in spots 4 m
# apart along the north wall, separated by 0.3 m divider walls 7 m deep.
HALF_PI = math.pi / 2
YARD = [[[0, 0], [60.0, 0], [60.0, 45.0], [0, 45.0]]]
LANE = [[[12.0, 10.0], [48.0, 10.0]]]
WEST = {"id": "gate-west", "pose": {"x": 12.0, "y": 10.0, "heading": 0.0}}
EAST = {"id": "gate-east", "pose": {"x": 48.0, "y": 10.0, "heading": math.pi}}


def divider(x, y0=38.0):
    return [[x - 0.15, y0], [x + 0.15, y0], [x + 0.15, 45.0], [x - 0.15, 45.0]]


def spot(i, x, charger):
    s = {"id": f"spot-{i}", "kind": "charger" if charger else "parking-only",
         "pose": {"x": x, "y": 35.5, "heading": HALF_PI}}
    if charger:
        s["charger_id"] = f"c{i}"
    return s


def parking_map(mid, obstacles, spots, entries):
    return {"id": mid, "boundary": YARD, "obstacles": obstacles, "spots": spots,
            "entries": entries, "lanes": LANE}


maps = ROOT / "maps"
dump(maps / "two_spot.json", parking_map(
    "two-spot", [divider(x) for x in (26.0, 30.0, 34.0)],
    [spot(1, 28.0, True), spot(2, 32.0, True)], [WEST]))
dump(maps / "four_spot.json", parking_map(
    "four-spot", [divider(x) for x in (22.0, 26.0, 30.0, 34.0, 38.0)],
    [spot(1, 24.0, True), spot(2, 28.0, True), spot(3, 32.0, False), spot(4, 36.0, False)],
    [WEST, EAST]))
# spot-2 is boxed in: its dividers run down to a cross wall in front of it.
dump(maps / "walled_spot.json", parking_map(
    "walled-spot",
    [divider(26.0), divider(30.0, 30.5), divider(34.0, 30.5),
     [[29.85, 30.5], [34.15, 30.5], [34.15, 31.0], [29.85, 31.0]]],
    [spot(1, 28.0, True), spot(2, 32.0, False)], [WEST]))
dump(maps / "bus_40ft.json", {"length": 12.0, "width": 2.55, "rear_overhang": 3.0, "wheelbase": 6.0})
print("miles per family:", miles)
