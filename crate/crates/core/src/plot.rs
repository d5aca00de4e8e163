//! SVG rendering of figure CSV files: one panel for real parts, one for
//! imaginary parts, with the bound band and markers for truth and estimates.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FigureRow {
    pub component_index: usize,
    pub part: String,
    pub bus_id: u32,
    pub truth: Option<f64>,
    pub convex: Option<f64>,
    pub glfp: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

fn field(line: usize, name: &str, raw: &str) -> Result<Option<f64>> {
    if raw.trim().is_empty() {
        return Ok(None);
    }
    raw.trim()
        .parse::<f64>()
        .map(Some)
        .map_err(|_| Error::InvalidInput(format!("line {line}: bad number '{raw}' in column {name}")))
}

pub fn parse_figure_csv(text: &str) -> Result<Vec<FigureRow>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("figure CSV is empty".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let idx = |name: &str| cols.iter().position(|c| *c == name);
    let required = ["component_index", "part", "bus_id"];
    for name in required {
        if idx(name).is_none() {
            return Err(Error::InvalidInput(format!("figure CSV lacks column '{name}'")));
        }
    }
    let mut rows = Vec::new();
    for (no, line) in lines {
        let line_no = no + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols.len() {
            return Err(Error::InvalidInput(format!(
                "line {line_no}: {} fields, header has {}",
                cells.len(),
                cols.len()
            )));
        }
        let get = |name: &str| idx(name).map(|i| cells[i]).unwrap_or("");
        let component_index = get("component_index")
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("line {line_no}: bad component_index")))?;
        let bus_id = get("bus_id")
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("line {line_no}: bad bus_id")))?;
        let part = get("part").trim().to_string();
        if part != "real" && part != "imag" {
            return Err(Error::InvalidInput(format!("line {line_no}: part must be real or imag")));
        }
        rows.push(FigureRow {
            component_index,
            part,
            bus_id,
            truth: field(line_no, "true", get("true"))?,
            convex: field(line_no, "convex_estimate", get("convex_estimate"))?,
            glfp: field(line_no, "glfp_estimate", get("glfp_estimate"))?,
            lower: field(line_no, "lower", get("lower"))?,
            upper: field(line_no, "upper", get("upper"))?,
        });
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("figure CSV has no data rows".into()));
    }
    Ok(rows)
}

const WIDTH: f64 = 960.0;
const PANEL_HEIGHT: f64 = 260.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const PANEL_GAP: f64 = 60.0;

fn panel(out: &mut String, rows: &[&FigureRow], title: &str, top: f64) {
    let values = rows.iter().flat_map(|r| [r.truth, r.convex, r.glfp, r.lower, r.upper]).flatten();
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (-1.0, 1.0);
    }
    if hi - lo < 1e-9 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let n = rows.len().max(1) as f64;
    let x_of = |i: usize| MARGIN_LEFT + plot_w * (i as f64 + 0.5) / n;
    let y_of = |v: f64| top + PANEL_HEIGHT * (hi - v) / (hi - lo);
    let slot = plot_w / n;

    let _ = writeln!(out, r#"<g class="panel" data-part="{title}">"#);
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN_LEFT:.1}" y="{top:.1}" width="{plot_w:.1}" height="{PANEL_HEIGHT:.1}" fill="none" stroke="#444"/>"##
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle">{title}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        top - 8.0
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            out,
            r#"<text class="ytick" x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{v:.4}</text>"#,
            MARGIN_LEFT - 6.0,
            y + 3.0
        );
    }
    for (i, r) in rows.iter().enumerate() {
        let x = x_of(i);
        let bottom = top + PANEL_HEIGHT;
        let _ = writeln!(
            out,
            r##"<line class="xtick" x1="{x:.1}" y1="{bottom:.1}" x2="{x:.1}" y2="{:.1}" stroke="#444"/>"##,
            bottom + 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#,
            bottom + 17.0,
            r.bus_id
        );
        if let (Some(l), Some(u)) = (r.lower, r.upper) {
            let w = (slot * 0.5).min(18.0);
            let _ = writeln!(
                out,
                r##"<rect class="band" x="{:.1}" y="{:.2}" width="{w:.1}" height="{:.2}" fill="#9ecae1" fill-opacity="0.6"/>"##,
                x - w / 2.0,
                y_of(u),
                (y_of(l) - y_of(u)).max(0.5)
            );
        }
        if let Some(t) = r.truth {
            let _ = writeln!(
                out,
                r##"<circle class="true" cx="{x:.1}" cy="{:.2}" r="3.5" fill="#000"/>"##,
                y_of(t)
            );
        }
        if let Some(c) = r.convex {
            let y = y_of(c);
            let _ = writeln!(
                out,
                r##"<path class="convex" d="M{:.1} {:.2} L{:.1} {:.2} M{:.1} {:.2} L{:.1} {:.2}" stroke="#d62728" stroke-width="1.5"/>"##,
                x - 4.0,
                y - 4.0,
                x + 4.0,
                y + 4.0,
                x - 4.0,
                y + 4.0,
                x + 4.0,
                y - 4.0
            );
        }
        if let Some(g) = r.glfp {
            let y = y_of(g);
            let _ = writeln!(
                out,
                r##"<path class="glfp" d="M{x:.1} {:.2} L{:.1} {:.2} L{:.1} {:.2} Z" fill="#2ca02c"/>"##,
                y - 4.5,
                x + 4.5,
                y + 3.5,
                x - 4.5,
                y + 3.5
            );
        }
    }
    let _ = writeln!(out, "</g>");
}

/// Renders both panels; real and imaginary rows are ordered by component index.
pub fn render_svg(rows: &[FigureRow]) -> String {
    let mut real: Vec<&FigureRow> = rows.iter().filter(|r| r.part == "real").collect();
    let mut imag: Vec<&FigureRow> = rows.iter().filter(|r| r.part == "imag").collect();
    real.sort_by_key(|r| r.component_index);
    imag.sort_by_key(|r| r.component_index);
    let height = MARGIN_TOP + 2.0 * PANEL_HEIGHT + PANEL_GAP + 50.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    panel(&mut out, &real, "Real part (p.u.)", MARGIN_TOP);
    panel(&mut out, &imag, "Imaginary part (p.u.)", MARGIN_TOP + PANEL_HEIGHT + PANEL_GAP);
    let legend_y = height - 10.0;
    let _ = writeln!(
        out,
        r##"<text x="{MARGIN_LEFT}" y="{legend_y}" font-size="11">band: interval bounds, dot: true, cross: convex, triangle: GLFP; x-axis: bus id</text>"##
    );
    out.push_str("</svg>\n");
    out
}
