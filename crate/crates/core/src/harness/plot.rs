//! Static SVG plots of the diagnostics time series. One file per panel,
//! simple polylines with autoscaled axes.

use crate::diagnostics::DiagnosticsRecord;
use crate::error::Error;
use std::path::Path;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

struct Series<'a> {
    label: &'a str,
    pick: fn(&DiagnosticsRecord) -> f64,
}

pub fn plot_csv(records: &[DiagnosticsRecord], out_dir: &Path) -> Result<Vec<String>, Error> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let panels: &[(&str, &[Series])] = &[
        (
            "energies",
            &[
                Series { label: "E_S", pick: |r| r.e_s },
                Series { label: "E_P", pick: |r| r.e_p },
                Series { label: "E", pick: |r| r.e },
            ],
        ),
        (
            "multiplier",
            &[
                Series { label: "lambda", pick: |r| r.lambda },
                Series { label: "int_lambda_sq", pick: |r| r.int_lambda_sq },
            ],
        ),
        (
            "mass",
            &[
                Series { label: "mass_deficit", pick: |r| r.mass_deficit },
                Series { label: "mass_bound", pick: |r| r.mass_bound },
            ],
        ),
        (
            "geometry",
            &[
                Series { label: "mu_total", pick: |r| r.mu_total },
                Series { label: "volume", pick: |r| r.volume },
            ],
        ),
        (
            "discrepancy",
            &[
                Series { label: "sup_xi", pick: |r| r.sup_xi },
                Series { label: "xi_pos_l1", pick: |r| r.xi_pos_l1 },
            ],
        ),
        (
            "dissipation",
            &[
                Series { label: "dissipation", pick: |r| r.dissipation },
                Series { label: "willmore_proxy", pick: |r| r.willmore_proxy },
            ],
        ),
    ];
    let mut written = Vec::new();
    for (name, series) in panels {
        let path = out_dir.join(format!("{name}.svg"));
        let svg = render_panel(records, name, series);
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        written.push(path.display().to_string());
    }
    Ok(written)
}

fn render_panel(records: &[DiagnosticsRecord], title: &str, series: &[Series]) -> String {
    let ts: Vec<f64> = records.iter().map(|r| r.t).collect();
    let (t0, t1) = (
        ts.first().copied().unwrap_or(0.0),
        ts.last().copied().unwrap_or(1.0),
    );
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in series {
        for r in records {
            let v = (s.pick)(r);
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if !lo.is_finite() || lo == hi {
        lo = lo.min(0.0) - 1.0;
        hi = hi.max(0.0) + 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let x = |t: f64| MARGIN + (t - t0) / (t1 - t0).max(1e-300) * (WIDTH - 2.0 * MARGIN);
    let y = |v: f64| HEIGHT - MARGIN - (v - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="24" font-family="monospace" font-size="16">{title}</text>
"#,
        MARGIN
    );
    // axes
    svg.push_str(&format!(
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>
<line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>
<text x="{m}" y="{lbl}" font-family="monospace" font-size="11">t = {t0:.4}</text>
<text x="{r}" y="{lbl}" font-family="monospace" font-size="11" text-anchor="end">t = {t1:.4}</text>
<text x="4" y="{b}" font-family="monospace" font-size="11">{lo:.3e}</text>
<text x="4" y="{t}" font-family="monospace" font-size="11">{hi:.3e}</text>
"#,
        m = MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        lbl = HEIGHT - MARGIN + 16.0,
    ));
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = records
            .iter()
            .filter(|r| (s.pick)(r).is_finite())
            .map(|r| format!("{:.2},{:.2}", x(r.t), y((s.pick)(r))))
            .collect();
        svg.push_str(&format!(
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>
<text x="{}" y="{}" font-family="monospace" font-size="12" fill="{color}">{}</text>
"#,
            pts.join(" "),
            WIDTH - MARGIN + 4.0 - 120.0,
            20.0 + 14.0 * i as f64,
            s.label,
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plots_are_written() {
        let rec = DiagnosticsRecord {
            t: 0.0,
            e_s: 1.0,
            e_p: 0.0,
            e: 1.0,
            lambda: 0.0,
            int_lambda_sq: 0.0,
            mass: 0.1,
            mass_deficit: 0.0,
            mass_bound: 0.5,
            sup_abs_phi: 0.99,
            sup_xi: -1.0,
            xi_pos_l1: 0.0,
            xi_l1: 1.0,
            mu_total: 0.75,
            volume: 0.2,
            dissipation: 0.0,
            willmore_proxy: 30.0,
        };
        let mut rec2 = rec;
        rec2.t = 0.1;
        rec2.e_s = 0.9;
        let dir = tempfile::tempdir().unwrap();
        let files = plot_csv(&[rec, rec2], dir.path()).unwrap();
        assert_eq!(files.len(), 6);
        for f in files {
            let text = std::fs::read_to_string(f).unwrap();
            assert!(text.starts_with("<svg"));
            assert!(text.contains("polyline"));
        }
    }
}
