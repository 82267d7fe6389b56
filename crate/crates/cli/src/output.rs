use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, String> {
        std::fs::create_dir_all(root).map_err(|e| format!("cannot create {}: {e}", root.display()))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), String> {
        let path = self.root.join(name);
        std::fs::write(&path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), String> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
        s.push('\n');
        self.put(name, s.as_bytes())
    }

    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<f64>]) -> Result<(), String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| e.to_string();
        w.write_record(header).map_err(err)?;
        for row in rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| e.to_string())?;
        self.put(name, &bytes)
    }

    pub fn svg(&mut self, name: &str, plot: &Plot) -> Result<(), String> {
        self.put(name, plot.render().as_bytes())
    }
}

/// Line chart of one or more series sharing axes.
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub series: Vec<(String, Vec<(f64, f64)>)>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

impl Plot {
    pub fn render(&self) -> String {
        let (w, h, pad) = (640.0, 400.0, 50.0);
        let pts = self.series.iter().flat_map(|s| s.1.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        if y1 <= y0 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
        let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(&self.title));
        // axes with end labels
        let _ = writeln!(
            s,
            r#"<path d="M{pad} {top} L{pad} {bot} L{right} {bot}" stroke="black" fill="none"/>"#,
            top = pad,
            bot = h - pad,
            right = w - pad
        );
        let _ = writeln!(s, r#"<text x="{pad}" y="{}" text-anchor="middle">{}</text>"#, h - pad + 15.0, num(x0));
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w - pad, h - pad + 15.0, num(x1));
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 12.0, escape(&self.x_label));
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, pad - 4.0, h - pad, num(y0));
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, pad - 4.0, pad + 4.0, num(y1));
        if y0 < 0.0 && y1 > 0.0 {
            let _ = writeln!(
                s,
                r##"<line x1="{pad}" y1="{z:.2}" x2="{}" y2="{z:.2}" stroke="#bbb" stroke-dasharray="4 3"/>"##,
                w - pad,
                z = sy(0.0)
            );
        }
        for (i, (label, data)) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let mut d = String::new();
            for &(x, y) in data.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
                let _ = write!(d, "{:.2},{:.2} ", sx(x), sy(y));
            }
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.2"/>"#, d.trim_end());
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
                w - pad + 4.0 - 90.0,
                pad + 14.0 * i as f64,
                escape(label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn num(v: f64) -> String {
    format!("{v:.4}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
