//! Deterministic SVG Gantt rendering: machines on rows, time on the x axis,
//! one rectangle per scheduled operation.

use jobshop::schedule::Schedule;

const ROW_HEIGHT: u32 = 28;
const ROW_GAP: u32 = 8;
const LEFT_MARGIN: u32 = 70;
const TOP_MARGIN: u32 = 30;
const PX_PER_UNIT_MAX: f64 = 40.0;
const CHART_WIDTH: f64 = 900.0;

// job colors cycle through a fixed palette so output is reproducible
const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

pub fn render_svg(schedule: &Schedule) -> String {
    let makespan = schedule.makespan().max(1);
    let machines = schedule.machine_sequences().len();
    let scale = (CHART_WIDTH / f64::from(makespan)).min(PX_PER_UNIT_MAX);
    let width = LEFT_MARGIN as f64 + f64::from(makespan) * scale + 20.0;
    let height = TOP_MARGIN + machines as u32 * (ROW_HEIGHT + ROW_GAP) + 40;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{height}\" \
         viewBox=\"0 0 {:.0} {height}\">\n",
        width, width
    ));
    svg.push_str("<style>text{font-family:monospace;font-size:12px;}</style>\n");
    for (m, sequence) in schedule.machine_sequences().iter().enumerate() {
        let y = TOP_MARGIN + m as u32 * (ROW_HEIGHT + ROW_GAP);
        svg.push_str(&format!(
            "<text x=\"4\" y=\"{}\">machine {m}</text>\n",
            y + ROW_HEIGHT / 2 + 4
        ));
        for s in sequence {
            let x = LEFT_MARGIN as f64 + f64::from(s.start_time) * scale;
            let w = f64::from(s.operation.duration) * scale;
            let color = PALETTE[s.job_id() % PALETTE.len()];
            svg.push_str(&format!(
                "<rect x=\"{x:.1}\" y=\"{y}\" width=\"{w:.1}\" height=\"{ROW_HEIGHT}\" \
                 fill=\"{color}\" stroke=\"#333\"/>\n"
            ));
            if w >= 18.0 {
                svg.push_str(&format!(
                    "<text x=\"{:.1}\" y=\"{}\" fill=\"#fff\">J{}</text>\n",
                    x + 3.0,
                    y + ROW_HEIGHT / 2 + 4,
                    s.job_id()
                ));
            }
        }
    }
    // time axis
    let axis_y = TOP_MARGIN + machines as u32 * (ROW_HEIGHT + ROW_GAP) + 12;
    svg.push_str(&format!(
        "<line x1=\"{LEFT_MARGIN}\" y1=\"{axis_y}\" x2=\"{:.1}\" y2=\"{axis_y}\" \
         stroke=\"#333\"/>\n",
        LEFT_MARGIN as f64 + f64::from(makespan) * scale
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{}\">{makespan}</text>\n",
        LEFT_MARGIN as f64 + f64::from(makespan) * scale - 8.0,
        axis_y + 16
    ));
    svg.push_str("<text x=\"70\" y=\"18\">time</text>\n</svg>\n");
    svg
}
