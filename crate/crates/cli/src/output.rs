//! CSV tables and optional SVG plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::Format;
use crate::error::CliError;

/// Shortest round-trip decimal, switching to exponent form for very small or large values.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn status(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Table {
            headers: headers.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// A named data series for plotting.
pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Output {
    pub dir: PathBuf,
    pub prefix: String,
    pub format: Format,
}

impl Output {
    pub fn new(dir: &Path, prefix: &str, format: Format) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Output {
            dir: dir.to_path_buf(),
            prefix: prefix.to_string(),
            format,
        })
    }

    fn path(&self, name: &str, ext: &str) -> PathBuf {
        if name.is_empty() {
            self.dir.join(format!("{}.{ext}", self.prefix))
        } else {
            self.dir.join(format!("{}_{name}.{ext}", self.prefix))
        }
    }

    pub fn csv(&self, name: &str, table: &Table) -> Result<PathBuf, CliError> {
        let p = self.path(name, "csv");
        std::fs::write(&p, table.to_csv()?)?;
        Ok(p)
    }

    pub fn wants_svg(&self) -> bool {
        self.format == Format::CsvSvg
    }

    /// Line plot; with `log_y` the y values are plotted as `log10|y|`.
    pub fn line_plot(&self, name: &str, title: &str, series: &[Series<'_>], log_y: bool) -> Result<(), CliError> {
        if !self.wants_svg() {
            return Ok(());
        }
        let mapped: Vec<Vec<(f64, f64)>> = series
            .iter()
            .map(|s| {
                s.points
                    .iter()
                    .filter_map(|&(x, y)| {
                        let y = if log_y { y.abs().log10() } else { y };
                        y.is_finite().then_some((x, y))
                    })
                    .collect()
            })
            .collect();
        let svg = plot(
            title,
            &mapped,
            &series.iter().map(|s| s.label).collect::<Vec<_>>(),
            false,
            log_y,
        );
        std::fs::write(self.path(name, "svg"), svg)?;
        Ok(())
    }

    pub fn scatter_plot(&self, name: &str, title: &str, points: &[(f64, f64)]) -> Result<(), CliError> {
        if !self.wants_svg() {
            return Ok(());
        }
        let svg = plot(title, &[points.to_vec()], &[""], true, false);
        std::fs::write(self.path(name, "svg"), svg)?;
        Ok(())
    }
}

const COLORS: [&str; 4] = ["#1f5fa8", "#c0392b", "#27864a", "#7d3c98"];

fn plot(title: &str, series: &[Vec<(f64, f64)>], labels: &[&str], scatter: bool, log_y: bool) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let all = series.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * m,
        h - 2.0 * m
    );
    let _ = writeln!(
        s,
        r#"<text x="{m}" y="{}" font-size="13">{}</text>"#,
        m - 15.0,
        escape(title)
    );
    let ylab = |v: f64| if log_y { format!("1e{v:.1}") } else { format!("{v:.3}") };
    let _ = writeln!(s, r#"<text x="{m}" y="{}">{x0:.3}</text>"#, h - m + 15.0);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{x1:.3}</text>"#,
        w - m,
        h - m + 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        m - 4.0,
        h - m,
        ylab(y0)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        m - 4.0,
        m + 10.0,
        ylab(y1)
    );
    for (i, pts) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        if scatter {
            for &(x, y) in pts {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="0.8" fill="{c}"/>"#, sx(x), sy(y));
            }
        } else {
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{c}" stroke-width="1.2" points="{}"/>"#,
                path.join(" ")
            );
        }
        if let Some(l) = labels.get(i).filter(|l| !l.is_empty()) {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" fill="{c}" text-anchor="end">{}</text>"#,
                w - m - 5.0,
                m + 15.0 * (i + 1) as f64,
                escape(l)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for x in [0.0, 1.0, 0.1, 4.0 / 45.0, 1e-26, 3.5e20, -2.5e-7] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(1e-26), "1e-26");
    }

    #[test]
    fn csv_quotes_fields() {
        let mut t = Table::new(&["a", "b"]);
        t.push(["x,y", "1"]);
        assert_eq!(t.to_csv().unwrap(), "a,b\n\"x,y\",1\n");
    }
}
