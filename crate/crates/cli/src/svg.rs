//! Step plot of profile index against time, one line per run.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 40.0;
const COLOURS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

/// `runs[r]` holds 1-based profile indices over time.
pub fn profile_plot(runs: &[Vec<usize>], profile_count: usize) -> String {
    let steps = runs
        .iter()
        .map(|r| r.len().saturating_sub(1))
        .max()
        .unwrap_or(0)
        .max(1);
    let x = |t: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * t as f64 / steps as f64;
    let y = |k: usize| {
        let span = profile_count.saturating_sub(1).max(1) as f64;
        HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (k.saturating_sub(1)) as f64 / span
    };

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<path d="M{m} {t} V{b} H{r}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">step</text>"#,
        WIDTH / 2.0,
        HEIGHT - 10.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="12" y="{}" font-size="12" transform="rotate(-90 12 {})" text-anchor="middle">profile</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    )
    .unwrap();
    for k in [1, profile_count] {
        writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{k}</text>"#,
            MARGIN - 4.0,
            y(k) + 3.0
        )
        .unwrap();
    }

    for (r, run) in runs.iter().enumerate() {
        let mut d = String::new();
        for (t, &k) in run.iter().enumerate() {
            if t == 0 {
                write!(d, "M{:.1} {:.1}", x(0), y(k)).unwrap();
            } else {
                write!(d, " H{:.1} V{:.1}", x(t), y(k)).unwrap();
            }
        }
        if run.len() == 1 {
            write!(d, " H{:.1}", x(steps)).unwrap();
        }
        writeln!(
            s,
            r#"<path d="{d}" stroke="{}" stroke-width="1.5" fill="none"/>"#,
            COLOURS[r % COLOURS.len()]
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}
