use std::collections::BTreeMap;
use std::fmt::Write;

use super::ProductionPlan;
use crate::constraints::SolverMapping;
use crate::dsl::DslDefinition;
use crate::solver::Schedule;

const WIDTH: f64 = 960.0;
const LABEL_W: f64 = 140.0;
const ROW_H: f64 = 28.0;
const BAR_PAD: f64 = 4.0;
const TOP: f64 = 24.0;
const IDLE_FILL: &str = "#eeeeee";
const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GanttBar {
    pub row: usize,
    pub job: String,
    pub label: String,
    pub start: u64,
    pub end: u64,
}

/// Machine rows with their busy intervals.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Gantt {
    pub rows: Vec<String>,
    pub bars: Vec<GanttBar>,
}

impl Gantt {
    pub fn from_schedule(s: &Schedule, mapping: &SolverMapping) -> Self {
        let mut by_idx: BTreeMap<usize, String> = mapping
            .machines
            .iter()
            .map(|m| (m.solver_index, m.name.clone()))
            .collect();
        for e in &s.entries {
            by_idx
                .entry(e.solver_index)
                .or_insert_with(|| format!("M{}", e.solver_index));
        }
        let row_of: BTreeMap<usize, usize> =
            by_idx.keys().enumerate().map(|(r, &i)| (i, r)).collect();
        let bars = s
            .entries
            .iter()
            .map(|e| GanttBar {
                row: row_of[&e.solver_index],
                job: e.step.job_id.clone(),
                label: e.step.to_string(),
                start: e.start,
                end: e.end,
            })
            .collect();
        Gantt {
            rows: by_idx.into_values().collect(),
            bars,
        }
    }

    pub fn from_plan(plan: &ProductionPlan, d: &DslDefinition) -> Self {
        let mut catalog: Vec<_> = d.machine_catalog.iter().collect();
        catalog.sort_by_key(|m| m.solver_index);
        let mut rows: Vec<String> = catalog.iter().map(|m| m.name.clone()).collect();
        let mut bars = Vec::with_capacity(plan.entries.len());
        for e in &plan.entries {
            let row = match rows.iter().position(|r| r == &e.machine) {
                Some(r) => r,
                None => {
                    rows.push(e.machine.clone());
                    rows.len() - 1
                }
            };
            bars.push(GanttBar {
                row,
                job: e.job_id.clone(),
                label: format!("{}#{} {}", e.job_id, e.step_index, e.operation),
                start: e.start,
                end: e.end,
            });
        }
        Gantt { rows, bars }
    }

    pub fn makespan(&self) -> u64 {
        self.bars.iter().map(|b| b.end).max().unwrap_or(0)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders `g` as a standalone SVG. Rows carry an idle background; each
/// bar is a `rect` with `data-start`/`data-end` in schedule time units.
pub fn emit_gantt(g: &Gantt) -> String {
    let horizon = g.makespan().max(1) as f64;
    let scale = (WIDTH - LABEL_W - 10.0) / horizon;
    let height = TOP + ROW_H * g.rows.len() as f64 + 20.0;
    let mut jobs: Vec<&str> = g.bars.iter().map(|b| b.job.as_str()).collect();
    jobs.sort_unstable();
    jobs.dedup();

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" data-makespan="{}">"#,
        g.makespan()
    );
    let _ = writeln!(
        out,
        r##"<rect class="canvas" x="0" y="0" width="{WIDTH}" height="{height}" fill="#ffffff"/>"##
    );
    for (r, name) in g.rows.iter().enumerate() {
        let y = TOP + ROW_H * r as f64;
        let _ = writeln!(
            out,
            r#"<text class="row-label" x="4" y="{:.2}" font-family="sans-serif" font-size="12">{}</text>"#,
            y + ROW_H / 2.0 + 4.0,
            escape(name)
        );
        let _ = writeln!(
            out,
            r#"<rect class="idle" data-row="{r}" x="{LABEL_W:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{IDLE_FILL}"/>"#,
            y + BAR_PAD / 2.0,
            horizon * scale,
            ROW_H - BAR_PAD
        );
    }
    let mut bars: Vec<&GanttBar> = g.bars.iter().collect();
    bars.sort_by(|a, b| (a.row, a.start, &a.label).cmp(&(b.row, b.start, &b.label)));
    for b in bars {
        let y = TOP + ROW_H * b.row as f64 + BAR_PAD;
        let color = PALETTE[jobs.binary_search(&b.job.as_str()).unwrap_or(0) % PALETTE.len()];
        let _ = writeln!(
            out,
            r##"<rect class="op" data-row="{}" data-job="{}" data-start="{}" data-end="{}" x="{:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{color}" stroke="#333333"><title>{}</title></rect>"##,
            b.row,
            escape(&b.job),
            b.start,
            b.end,
            LABEL_W + b.start as f64 * scale,
            (b.end - b.start) as f64 * scale,
            ROW_H - 2.0 * BAR_PAD,
            escape(&b.label)
        );
    }
    let _ = writeln!(
        out,
        r#"<text class="axis" x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
        LABEL_W + horizon * scale,
        height - 6.0,
        g.makespan()
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bar(row: usize, start: u64, end: u64) -> GanttBar {
        GanttBar {
            row,
            job: "J1".into(),
            label: "J1#0".into(),
            start,
            end,
        }
    }

    #[test]
    fn rightmost_edge_is_makespan() {
        let g = Gantt {
            rows: vec!["A".into(), "B".into()],
            bars: vec![bar(0, 0, 10), bar(1, 10, 55)],
        };
        let svg = emit_gantt(&g);
        assert!(svg.contains(r#"data-end="55""#));
        assert_eq!(svg.matches(r#"class="op""#).count(), 2);
        assert_eq!(svg, emit_gantt(&g));
    }

    #[test]
    fn empty_has_only_rows() {
        let g = Gantt {
            rows: vec!["A".into(), "B".into(), "C".into()],
            bars: vec![],
        };
        let svg = emit_gantt(&g);
        assert_eq!(svg.matches(r#"class="idle""#).count(), 3);
        assert_eq!(svg.matches(r#"class="op""#).count(), 0);
    }
}
