//! Human-readable rendering of score reports.

use std::fmt::Write;

use attrclause_core::evalkit::Report;

pub fn render(report: &Report) -> String {
    let mut s = String::new();
    let width = report.variants.iter().map(|v| v.variant.as_str().chars().count()).max().unwrap_or(7).max(7);
    let _ = writeln!(s, "{:width$}  {:>3}  mean", "variant", "n");
    for v in &report.variants {
        let _ = writeln!(s, "{:width$}  {:>3}  {}", v.variant.as_str(), v.n, v.mean.one_decimal());
    }
    if !report.per_entry.is_empty() {
        let _ = writeln!(s);
        let (bw, aw) = (report.before.variant.as_str().len(), report.after.variant.as_str().len());
        let ew = report.per_entry.iter().map(|d| d.entry_id.chars().count()).max().unwrap_or(5).max(5);
        let _ = writeln!(s, "{:ew$}  {}  {}  delta", "entry", report.before.variant, report.after.variant);
        for d in &report.per_entry {
            let _ = writeln!(s, "{:ew$}  {:>bw$}  {:>aw$}  {:>5}", d.entry_id, d.before, d.after, d.delta);
        }
    }
    let (b, a) = report.average_cells();
    let _ = writeln!(s);
    let _ = writeln!(s, "Average  {b}  {a}");
    let _ = writeln!(s, "{}", report.summary_line());
    if let Some(t) = &report.pattern_tally {
        let _ = writeln!(s);
        s.push_str(&t.render());
    }
    s
}
