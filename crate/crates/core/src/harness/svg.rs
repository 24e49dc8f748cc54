use std::fmt::Write;

use super::ReplicateReport;
use crate::queue_sim::Policy;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let range = |v: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = v.filter(|x| x.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
            if !(lo < hi) {
                (lo - 1.0, lo + 1.0)
            } else {
                (lo, hi)
            }
        };
        Self { x: range(&mut xs.clone()), y: range(&mut ys.clone()) }
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        let sx = PAD + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * PAD);
        let sy = H - PAD - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * PAD);
        (sx, sy)
    }

    fn polyline(&self, out: &mut String, pts: impl Iterator<Item = (f64, f64)>, style: &str) {
        let mut d = String::new();
        for (x, y) in pts.filter(|(x, y)| x.is_finite() && y.is_finite()) {
            let (a, b) = self.px(x, y);
            let _ = write!(d, "{a:.2},{b:.2} ");
        }
        let _ = writeln!(out, r#"<polyline fill="none" {style} points="{}"/>"#, d.trim_end());
    }

    fn axes(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let _ = writeln!(
            out,
            r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - 2.0 * PAD,
            H - 2.0 * PAD
        );
        let _ = writeln!(out, r#"<text x="{}" y="30" text-anchor="middle" font-size="16">{title}</text>"#, W / 2.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{xlabel}</text>"#, W / 2.0, H - 12.0);
        let _ = writeln!(
            out,
            r#"<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">{ylabel}</text>"#,
            H / 2.0,
            H / 2.0
        );
        let ticks = [(self.x.0, self.y.0, "start"), (self.x.1, self.y.0, "end")];
        for (x, _, anchor) in ticks {
            let (a, _) = self.px(x, self.y.0);
            let _ = writeln!(out, r#"<text x="{a:.1}" y="{}" text-anchor="{anchor}" font-size="10">{x:.3e}</text>"#, H - PAD + 14.0);
        }
        for y in [self.y.0, self.y.1] {
            let (_, b) = self.px(self.x.0, y);
            let _ = writeln!(out, r#"<text x="{}" y="{b:.1}" text-anchor="end" font-size="10">{y:.3e}</text>"#, PAD - 4.0);
        }
    }
}

fn document(body: String) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

/// Mean cumulative regret with its 10–90% band against time.
pub fn regret_svg(report: &ReplicateReport) -> String {
    let t = &report.time;
    let all = report.band_lo.iter().chain(&report.band_hi).chain(&report.mean_regret).copied();
    let frame = Frame::fit(t.iter().copied().chain(std::iter::once(0.0)), all.chain(std::iter::once(0.0)));
    let mut body = String::new();
    frame.axes(&mut body, &format!("{}: regret ({} runs)", report.name, report.runs), "time", "cumulative regret");
    let zip = |ys: &Vec<f64>| t.iter().copied().zip(ys.iter().copied()).collect::<Vec<_>>();
    frame.polyline(&mut body, zip(&report.band_lo).into_iter(), r#"stroke="steelblue" stroke-dasharray="4 3""#);
    frame.polyline(&mut body, zip(&report.band_hi).into_iter(), r#"stroke="steelblue" stroke-dasharray="4 3""#);
    frame.polyline(&mut body, zip(&report.mean_regret).into_iter(), r#"stroke="navy" stroke-width="2""#);
    document(body)
}

/// Decision path in the `(μ, p)` plane with the target marked.
pub fn trajectory_svg(title: &str, path: &[Policy], target: Policy) -> String {
    let xs = path.iter().map(|x| x.mu).chain(std::iter::once(target.mu));
    let ys = path.iter().map(|x| x.p).chain(std::iter::once(target.p));
    let frame = Frame::fit(xs, ys);
    let mut body = String::new();
    frame.axes(&mut body, title, "service rate", "price");
    frame.polyline(&mut body, path.iter().map(|x| (x.mu, x.p)), r#"stroke="darkgreen""#);
    let (a, b) = frame.px(target.mu, target.p);
    let _ = writeln!(body, r#"<circle cx="{a:.2}" cy="{b:.2}" r="5" fill="red"/>"#);
    document(body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_is_well_formed() {
        let path = [Policy::new(10.0, 5.0), Policy::new(9.0, 4.0), Policy::new(8.2, 3.8)];
        let s = trajectory_svg("t", &path, Policy::new(8.18, 3.79));
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<polyline").count(), 1);
        assert!(s.contains("<circle"));
    }
}
