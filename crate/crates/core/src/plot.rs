//! Minimal SVG line charts for sweep results.

use std::fmt::Write;

use crate::entropy::sweep::SweepPoint;
use crate::error::{Error, Result};

const W: f64 = 480.0;
const H: f64 = 320.0;
const MARGIN: f64 = 48.0;

fn axis_value(p: &SweepPoint, axis: &str) -> Result<f64> {
    Ok(match axis {
        "sigma_q" => p.sigma_q,
        "bits" => p.bits as f64,
        "eta" => p.eta,
        "n" => p.n as f64,
        other => return Err(Error::param(format!("unknown sweep axis {other}"))),
    })
}

/// Bound against the swept parameter; infeasible points are drawn as open
/// circles on the horizontal axis.
pub fn sweep_svg(points: &[SweepPoint], axis: &str) -> Result<String> {
    if points.is_empty() {
        return Err(Error::param("nothing to plot"));
    }
    let xs: Vec<f64> = points.iter().map(|p| axis_value(p, axis)).collect::<Result<_>>()?;
    let (x0, x1) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let y1 = points.iter().filter_map(|p| p.bound).fold(0.0, f64::max).max(1e-9) * 1.1;
    let span = if x1 > x0 { x1 - x0 } else { 1.0 };
    let px = |x: f64| MARGIN + (x - x0) / span * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - y / y1 * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<path d="M{m} {t} V{b} H{r}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{axis}</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">bits per symbol</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (v, label) in [(x0, x0), (x1, x1)] {
        let _ =
            writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{label:.3}</text>"#, px(v), H - MARGIN + 16.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{:.3}</text>"#, MARGIN - 4.0, py(y1) + 4.0, y1);
    let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">0</text>"#, MARGIN - 4.0, py(0.0) + 4.0);
    let line: Vec<String> =
        xs.iter().zip(points).filter_map(|(&x, p)| p.bound.map(|b| format!("{:.2},{:.2}", px(x), py(b)))).collect();
    if !line.is_empty() {
        let _ =
            writeln!(s, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, line.join(" "));
    }
    for (&x, p) in xs.iter().zip(points) {
        match p.bound {
            Some(b) => {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, px(x), py(b));
            }
            None => {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="none" stroke="firebrick"/>"#,
                    px(x),
                    py(0.0)
                );
            }
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marks_every_point() {
        let pts: Vec<SweepPoint> = (0..4)
            .map(|i| SweepPoint {
                sigma_q: 1.0,
                bits: 8,
                eta: 0.25 * i as f64,
                n: 4,
                bound: (i > 0).then_some(3.0 - i as f64 * 0.5),
            })
            .collect();
        let svg = sweep_svg(&pts, "eta").unwrap();
        assert_eq!(svg.matches("<circle").count(), 4);
        assert_eq!(svg.matches("firebrick").count(), 1);
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(sweep_svg(&pts, "colour").is_err());
    }
}
