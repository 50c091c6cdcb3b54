//! Output files: atomic writes, metrics JSON, confusion CSV/SVG and the
//! filter-response table.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::sinc::SincLayer;
use crate::tensor::Scalar;
use crate::train::EvalReport;
use crate::Emotion;

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers see either the old file, no file, or the full new
/// contents.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Points in the magnitude response written by [`filters_csv`].
pub const RESPONSE_POINTS: usize = 257;

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Confusion matrix as CSV: a header row of predicted labels, then one row
/// per true label.
pub fn confusion_csv(report: &EvalReport) -> String {
    let mut out = String::from("true\\predicted");
    for e in Emotion::ALL {
        out.push(',');
        out.push_str(e.as_str());
    }
    out.push('\n');
    for (e, row) in Emotion::ALL.iter().zip(&report.confusion) {
        out.push_str(e.as_str());
        for c in row {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
    }
    out
}

fn parse_confusion_csv(csv: &str) -> Result<(Vec<String>, Vec<Vec<u64>>)> {
    let mut lines = csv.lines();
    let header = lines
        .next()
        .ok_or_else(|| invalid!("confusion csv is empty"))?;
    let columns: Vec<String> = header.split(',').skip(1).map(str::to_string).collect();
    let mut labels = Vec::new();
    let mut counts = Vec::new();
    for (i, line) in lines.enumerate() {
        let mut cells = line.split(',');
        labels.push(cells.next().unwrap_or_default().to_string());
        let row = cells
            .map(|c| {
                c.trim()
                    .parse::<u64>()
                    .map_err(|_| invalid!("confusion csv row {}: bad count {c:?}", i + 2))
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != columns.len() {
            return Err(invalid!(
                "confusion csv row {} has {} counts, header has {}",
                i + 2,
                row.len(),
                columns.len()
            ));
        }
        counts.push(row);
    }
    if labels != columns {
        return Err(invalid!(
            "confusion csv row labels {labels:?} differ from columns {columns:?}"
        ));
    }
    Ok((labels, counts))
}

/// Renders a confusion CSV as an SVG heat map. Cell shading is the row
/// fraction (per-class recall for diagonal cells), so the picture depends
/// on nothing but the CSV text.
pub fn confusion_svg(csv: &str) -> Result<String> {
    const CELL: usize = 80;
    const MARGIN: usize = 100;
    let (labels, counts) = parse_confusion_csv(csv)?;
    let n = labels.len();
    let size = MARGIN + n * CELL + 20;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\">predicted</text>\n",
        MARGIN + n * CELL / 2
    ));
    svg.push_str(&format!(
        "<text x=\"20\" y=\"{y}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {y})\">true</text>\n",
        y = MARGIN + n * CELL / 2
    ));
    for (j, label) in labels.iter().enumerate() {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{label}</text>\n",
            MARGIN + j * CELL + CELL / 2,
            MARGIN - 10
        ));
    }
    for (i, (label, row)) in labels.iter().zip(&counts).enumerate() {
        let y = MARGIN + i * CELL;
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{label}</text>\n",
            MARGIN - 8,
            y + CELL / 2 + 4
        ));
        let total: u64 = row.iter().sum();
        for (j, &c) in row.iter().enumerate() {
            let frac = if total == 0 {
                0.0
            } else {
                c as f64 / total as f64
            };
            let shade = 255 - (frac * 200.0).round() as u8;
            let x = MARGIN + j * CELL;
            let ink = if frac > 0.6 { "#ffffff" } else { "#000000" };
            svg.push_str(&format!(
                "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" \
                 fill=\"rgb({shade},{shade},255)\" stroke=\"#888888\"/>\n"
            ));
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"{ink}\">{c} ({:.1}%)</text>\n",
                x + CELL / 2,
                y + CELL / 2 + 4,
                100.0 * frac
            ));
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes `metrics.json`, `confusion.csv` and `confusion.svg` into `dir`.
pub fn write_evaluation(dir: &Path, report: &EvalReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = confusion_csv(report);
    let svg = confusion_svg(&csv)?;
    write_json(&dir.join("metrics.json"), report)?;
    write_atomic(&dir.join("confusion.csv"), csv.as_bytes())?;
    write_atomic(&dir.join("confusion.svg"), svg.as_bytes())
}

/// One row per filter: index, effective cutoffs in Hz and the magnitude
/// response at [`RESPONSE_POINTS`] frequencies from 0 to fs/2.
pub fn filters_csv<T: Scalar>(layer: &SincLayer<T>) -> String {
    let mut out = String::from("index,f1_hz,f2_hz");
    for k in 0..RESPONSE_POINTS {
        out.push_str(&format!(",m{k}"));
    }
    out.push('\n');
    let response = layer.magnitude_response(RESPONSE_POINTS);
    for (i, ((f1, f2), mags)) in layer.cutoffs().into_iter().zip(response).enumerate() {
        out.push_str(&format!("{i},{f1},{f2}"));
        for m in mags {
            out.push_str(&format!(",{m}"));
        }
        out.push('\n');
    }
    out
}
