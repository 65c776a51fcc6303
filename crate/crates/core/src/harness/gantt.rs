//! Gantt chart of a plan: one row per bus; block, charge and setup
//! rectangles; the SOC trace drawn over each row.

use std::fmt::Write;

use crate::model::Plan;
use crate::solver::Instance;

const LEFT: f64 = 90.0;
const TOP: f64 = 40.0;
const ROW: f64 = 44.0;
const BAR: f64 = 26.0;
const WIDTH: f64 = 1200.0;

fn rect(out: &mut String, class: &str, x0: f64, x1: f64, y: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"  <rect class="{class}" x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{BAR:.2}"><title>{title}</title></rect>"#,
        (x1 - x0).max(0.0)
    );
}

pub fn gantt_svg(inst: &Instance, plan: &Plan, title: &str) -> String {
    let s = inst.scenario();
    let n = s.grid.slot_count.max(1);
    let setup = s.constraints.setup_slots;
    let dx = (WIDTH - LEFT - 20.0) / n as f64;
    let x = |slot: usize| LEFT + dx * slot as f64;
    let height = TOP + ROW * s.buses.len() as f64 + 40.0;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height:.0}" viewBox="0 0 {WIDTH} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    out.push_str(
        "  <style>.block{fill:#2b6cb0}.charge{fill:#38a169}.setup{fill:#111}.soc{fill:none;stroke:#dd6b20;stroke-width:1.2}.grid{stroke:#ddd}</style>\n",
    );
    let _ = writeln!(
        out,
        r#"  <text x="{LEFT}" y="18" font-size="13">{title}</text>"#
    );

    let per_hour = (60 / s.grid.slot_minutes.max(1)).max(1) as usize;
    let axis_y = TOP + ROW * s.buses.len() as f64;
    for k in (0..=s.grid.slot_count).step_by(per_hour) {
        let _ = writeln!(
            out,
            r#"  <line class="grid" x1="{0:.2}" y1="{TOP:.2}" x2="{0:.2}" y2="{axis_y:.2}"/>"#,
            x(k)
        );
        if k % (2 * per_hour) == 0 {
            let _ = writeln!(
                out,
                r#"  <text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                x(k),
                axis_y + 16.0,
                s.grid.clock_label(k)
            );
        }
    }

    for (i, bus) in s.buses.iter().enumerate() {
        let y0 = TOP + ROW * i as f64;
        let bar_y = y0 + (ROW - BAR) / 2.0;
        let _ = writeln!(
            out,
            r#"  <text x="8" y="{:.2}">{}</text>"#,
            y0 + ROW / 2.0 + 4.0,
            bus.id
        );
        for j in plan.decisions.blocks_of(i) {
            let b = &s.blocks[j];
            if b.start_slot >= setup {
                rect(
                    &mut out,
                    "setup",
                    x(b.start_slot - setup),
                    x(b.start_slot),
                    bar_y,
                    "setup",
                );
            }
            rect(
                &mut out,
                "block",
                x(b.start_slot),
                x(b.end_slot),
                bar_y,
                &b.id,
            );
        }
        for (c, e) in plan.decisions.sessions(i) {
            if c >= setup {
                rect(&mut out, "setup", x(c - setup), x(c), bar_y, "setup");
            }
            rect(&mut out, "charge", x(c), x(e), bar_y, "charge");
        }
        if let Some(trace) = plan.soc_trace.get(i) {
            let pts: Vec<String> = trace
                .iter()
                .enumerate()
                .map(|(k, &soc)| {
                    format!(
                        "{:.2},{:.2}",
                        x(k),
                        y0 + 2.0 + (ROW - 4.0) * (1.0 - soc.clamp(0.0, 1.0))
                    )
                })
                .collect();
            let _ = writeln!(
                out,
                r#"  <polyline class="soc" points="{}"/>"#,
                pts.join(" ")
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
