use std::fmt::Write as _;

use gridsvc::FittedRun;

const SIZE: f64 = 640.0;
const MARGIN: f64 = 40.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f",
];
const UNCLUSTERED: &str = "#b0b0b0";

#[derive(Debug, Clone, Copy)]
pub struct PlotOptions {
    /// shade the in-ball lattice cells
    pub grid: bool,
    /// ring the support vectors
    pub support_vectors: bool,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions {
            grid: true,
            support_vectors: true,
        }
    }
}

fn color(id: u32) -> &'static str {
    if id == 0 {
        UNCLUSTERED
    } else {
        PALETTE[(id as usize - 1) % PALETTE.len()]
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Scatter of the projected points colored by cluster, optionally over the
/// shaded in-ball lattice cells, with support vectors ringed.
pub fn render_svg(run: &FittedRun, opts: PlotOptions) -> String {
    let proj = &run.projection;
    let (min, max) = (proj.min(), proj.max());
    let span = [max[0] - min[0], max[1] - min[1]];
    let inner = SIZE - 2.0 * MARGIN;
    let px = |p: [f64; 2]| {
        (
            MARGIN + (p[0] - min[0]) / span[0] * inner,
            SIZE - MARGIN - (p[1] - min[1]) / span[1] * inner,
        )
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="24" font-family="sans-serif" font-size="13">{} clusters, {} unclustered, seed {}</text>"#,
        run.assignment.n_clusters(),
        run.assignment.unclustered(),
        run.config.seed
    );

    if let (true, Some(grid)) = (opts.grid, &run.grid) {
        let g = grid.grid().size();
        let sc = grid.grid().scale();
        let (w, h) = (sc[0] / span[0] * inner, sc[1] / span[1] * inner);
        let _ = writeln!(s, r#"<g id="cells" fill-opacity="0.25">"#);
        for a in 0..g {
            for b in 0..g {
                if !grid.is_inside(a, b) {
                    continue;
                }
                let (x, y) = px(grid.grid().point(a, b));
                let _ = writeln!(
                    s,
                    r#"<rect class="cell" x="{:.2}" y="{:.2}" width="{w:.2}" height="{h:.2}" fill="{}"/>"#,
                    x - w / 2.0,
                    y - h / 2.0,
                    color(grid.id(a, b))
                );
            }
        }
        let _ = writeln!(s, "</g>");
    }

    let _ = writeln!(s, r#"<g id="points">"#);
    for i in 0..proj.len() {
        let (x, y) = px(proj.point(i));
        let id = run.assignment.label(i);
        let _ = writeln!(
            s,
            r#"<circle class="point" cx="{x:.2}" cy="{y:.2}" r="3" fill="{}"><title>{} (cluster {id})</title></circle>"#,
            color(id),
            escape(&run.row_names[i])
        );
    }
    let _ = writeln!(s, "</g>");

    if opts.support_vectors {
        let _ = writeln!(s, r#"<g id="support-vectors" fill="none" stroke="black">"#);
        for &i in run.model.sv_indices() {
            let (x, y) = px(proj.point(i));
            let _ = writeln!(s, r#"<circle class="sv" cx="{x:.2}" cy="{y:.2}" r="6"/>"#);
        }
        for &i in run.model.bsv_indices() {
            let (x, y) = px(proj.point(i));
            let _ = writeln!(
                s,
                r#"<circle class="bsv" cx="{x:.2}" cy="{y:.2}" r="6" stroke-dasharray="2,2"/>"#
            );
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}
