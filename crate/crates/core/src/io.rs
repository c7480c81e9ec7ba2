//! CSV schemas for lines, spectra, traces, histograms and fit inputs.
//!
//! | data | columns |
//! |------|---------|
//! | ODMR lines | `frequency_hz,label` |
//! | PLE spectrum | `detuning_ghz,intensity` |
//! | field/strain map | `b_mt,detuning_ghz,strength` |
//! | single trace | `# family=<a|b|c> variant=<none|pi+|pi-|pi+pi+>` then `time_s,rate_cps` |
//! | trace bundle | `family,variant,time_s,rate_cps` |
//! | histogram | `photon_count,occurrences` |
//! | saturation | `power_mw,rate_cps` |
//! | lineshape | `detuning_ghz,intensity` |
//!
//! Lines starting with `#` are comments. Malformed content yields
//! [`Error::MalformedInput`] naming the file and data row.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::photon::CountHistogram;
use crate::rate::{FluorescenceTrace, LabeledTrace, MwVariant, TraceFamily};
use crate::spin_hamiltonian::{OdmrLine, OdmrLineSet, SpinBranch};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn malformed(path: &Path, row: usize, msg: impl std::fmt::Display) -> Error {
    Error::MalformedInput(format!("{}: data row {row}: {msg}", path.display()))
}

/// Leading `#` comment lines of a file, without the marker.
fn leading_comments(path: &Path) -> Result<Vec<String>> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| io_err(path, e))?;
        match line.trim_start().strip_prefix('#') {
            Some(rest) => out.push(rest.trim().to_string()),
            None => break,
        }
    }
    Ok(out)
}

/// Data rows of a CSV file whose header must equal `columns`.
fn read_rows(path: &Path, columns: &[&str]) -> Result<Vec<Vec<String>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(String::from)
        .collect();
    if header != columns {
        return Err(Error::MalformedInput(format!(
            "{}: expected columns {columns:?}, found {header:?}",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| malformed(path, i + 1, e))?;
        if rec.len() != columns.len() {
            return Err(malformed(
                path,
                i + 1,
                format!("expected {} fields, got {}", columns.len(), rec.len()),
            ));
        }
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok(rows)
}

fn parse_f64(path: &Path, row: usize, name: &str, s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| malformed(path, row, format!("{name} is not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(malformed(path, row, format!("{name} is not finite")));
    }
    Ok(v)
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| io_err(path, e))?;
        }
    }
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

/// Write a table with the given header; values use Rust's shortest round-trip formatting.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn num_rows<const N: usize>(rows: impl IntoIterator<Item = [f64; N]>) -> Vec<Vec<String>> {
    rows.into_iter()
        .map(|r| r.iter().map(|v| v.to_string()).collect())
        .collect()
}

pub fn write_xy(
    path: &Path,
    header: [&str; 2],
    rows: impl IntoIterator<Item = (f64, f64)>,
) -> Result<()> {
    write_table(
        path,
        &header,
        &num_rows(rows.into_iter().map(|(a, b)| [a, b])),
    )
}

pub fn write_xyz(
    path: &Path,
    header: [&str; 3],
    rows: impl IntoIterator<Item = (f64, f64, f64)>,
) -> Result<()> {
    write_table(
        path,
        &header,
        &num_rows(rows.into_iter().map(|(a, b, c)| [a, b, c])),
    )
}

pub fn read_xy(path: &Path, header: [&str; 2]) -> Result<Vec<(f64, f64)>> {
    read_rows(path, &header)?
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok((
                parse_f64(path, i + 1, header[0], &r[0])?,
                parse_f64(path, i + 1, header[1], &r[1])?,
            ))
        })
        .collect()
}

pub fn write_odmr_lines(path: &Path, lines: &OdmrLineSet) -> Result<()> {
    let rows: Vec<Vec<String>> = lines
        .lines()
        .iter()
        .map(|l| vec![l.frequency_hz.to_string(), l.branch.label().to_string()])
        .collect();
    write_table(path, &["frequency_hz", "label"], &rows)
}

pub fn read_odmr_lines(path: &Path) -> Result<OdmrLineSet> {
    let mut lines = Vec::new();
    for (i, r) in read_rows(path, &["frequency_hz", "label"])?
        .iter()
        .enumerate()
    {
        let f = parse_f64(path, i + 1, "frequency_hz", &r[0])?;
        if f <= 0.0 {
            return Err(malformed(path, i + 1, "frequency must be positive"));
        }
        let branch = SpinBranch::parse(&r[1])
            .ok_or_else(|| malformed(path, i + 1, format!("unknown label {:?}", r[1])))?;
        lines.push(OdmrLine {
            frequency_hz: f,
            branch,
            weight: f64::NAN,
        });
    }
    OdmrLineSet::new(lines)
}

/// Check `time_s` is uniformly spaced and return the spacing.
fn infer_binwidth(path: &Path, times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::MalformedInput(format!(
            "{}: trace needs at least 2 samples",
            path.display()
        )));
    }
    let bw = times[1] - times[0];
    for (i, w) in times.windows(2).enumerate() {
        let d = w[1] - w[0];
        if d <= 0.0 {
            return Err(malformed(path, i + 2, "time is not increasing"));
        }
        if (d - bw).abs() > 1e-6 * bw {
            return Err(malformed(
                path,
                i + 2,
                "time step differs from the first step",
            ));
        }
    }
    Ok(bw)
}

fn check_rate(path: &Path, row: usize, r: f64) -> Result<f64> {
    if r < 0.0 {
        return Err(malformed(path, row, format!("negative count rate {r}")));
    }
    Ok(r)
}

pub fn write_trace(path: &Path, t: &LabeledTrace) -> Result<()> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    let mut f = std::io::BufWriter::new(f);
    writeln!(
        f,
        "# family={} variant={}",
        t.family.label(),
        t.variant.label()
    )
    .map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(["time_s", "rate_cps"])
        .map_err(|e| csv_err(path, e))?;
    for (time, rate) in t.trace.times_s().iter().zip(&t.trace.rate_cps) {
        w.write_record([time.to_string(), rate.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_trace(path: &Path) -> Result<LabeledTrace> {
    let mut family = None;
    let mut variant = None;
    for c in leading_comments(path)? {
        for kv in c.split_whitespace() {
            match kv.split_once('=') {
                Some(("family", v)) => family = TraceFamily::parse(v),
                Some(("variant", v)) => variant = MwVariant::parse(v),
                _ => {}
            }
        }
    }
    let (Some(family), Some(variant)) = (family, variant) else {
        return Err(Error::MalformedInput(format!(
            "{}: missing '# family=.. variant=..' header",
            path.display()
        )));
    };
    let xy = read_xy(path, ["time_s", "rate_cps"])?;
    let times: Vec<f64> = xy.iter().map(|p| p.0).collect();
    let binwidth_s = infer_binwidth(path, &times)?;
    let rate_cps = xy
        .iter()
        .enumerate()
        .map(|(i, p)| check_rate(path, i + 1, p.1))
        .collect::<Result<_>>()?;
    Ok(LabeledTrace {
        family,
        variant,
        trace: FluorescenceTrace {
            binwidth_s,
            rate_cps,
        },
    })
}

pub fn write_bundle(path: &Path, traces: &[LabeledTrace]) -> Result<()> {
    let mut rows = Vec::new();
    for t in traces {
        for (time, rate) in t.trace.times_s().iter().zip(&t.trace.rate_cps) {
            rows.push(vec![
                t.family.label().to_string(),
                t.variant.label().to_string(),
                time.to_string(),
                rate.to_string(),
            ]);
        }
    }
    write_table(path, &["family", "variant", "time_s", "rate_cps"], &rows)
}

pub fn read_bundle(path: &Path) -> Result<Vec<LabeledTrace>> {
    let rows = read_rows(path, &["family", "variant", "time_s", "rate_cps"])?;
    let mut groups: Vec<(TraceFamily, MwVariant, Vec<f64>, Vec<f64>)> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let fam = TraceFamily::parse(&r[0])
            .ok_or_else(|| malformed(path, i + 1, format!("unknown family {:?}", r[0])))?;
        let var = MwVariant::parse(&r[1])
            .ok_or_else(|| malformed(path, i + 1, format!("unknown variant {:?}", r[1])))?;
        let t = parse_f64(path, i + 1, "time_s", &r[2])?;
        let rate = check_rate(path, i + 1, parse_f64(path, i + 1, "rate_cps", &r[3])?)?;
        match groups.iter_mut().find(|g| g.0 == fam && g.1 == var) {
            Some(g) => {
                g.2.push(t);
                g.3.push(rate);
            }
            None => groups.push((fam, var, vec![t], vec![rate])),
        }
    }
    groups
        .into_iter()
        .map(|(family, variant, times, rate_cps)| {
            let binwidth_s = infer_binwidth(path, &times)?;
            Ok(LabeledTrace {
                family,
                variant,
                trace: FluorescenceTrace {
                    binwidth_s,
                    rate_cps,
                },
            })
        })
        .collect()
}

pub fn write_histogram(path: &Path, h: &CountHistogram) -> Result<()> {
    let rows: Vec<Vec<String>> = h
        .counts
        .iter()
        .enumerate()
        .map(|(k, c)| vec![k.to_string(), c.to_string()])
        .collect();
    write_table(path, &["photon_count", "occurrences"], &rows)
}

pub fn read_histogram(path: &Path) -> Result<CountHistogram> {
    let mut pairs = Vec::new();
    for (i, r) in read_rows(path, &["photon_count", "occurrences"])?
        .iter()
        .enumerate()
    {
        let k: i64 = r[0].parse().map_err(|_| {
            malformed(
                path,
                i + 1,
                format!("photon_count is not an integer: {:?}", r[0]),
            )
        })?;
        let n: i64 = r[1].parse().map_err(|_| {
            malformed(
                path,
                i + 1,
                format!("occurrences is not an integer: {:?}", r[1]),
            )
        })?;
        if k < 0 {
            return Err(malformed(path, i + 1, format!("negative photon count {k}")));
        }
        if n < 0 {
            return Err(malformed(path, i + 1, format!("negative occurrence {n}")));
        }
        pairs.push((k as u64, n as u64));
    }
    CountHistogram::from_pairs(&pairs, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_roundtrip_and_negative_row() {
        let dir = std::env::temp_dir().join(format!("nvscc-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("h.csv");
        let h = CountHistogram::new(vec![5, 0, 7], None).unwrap();
        write_histogram(&p, &h).unwrap();
        assert_eq!(read_histogram(&p).unwrap(), h);
        std::fs::write(&p, "photon_count,occurrences\n0,3\n1,-2\n").unwrap();
        let err = read_histogram(&p).unwrap_err().to_string();
        assert!(err.contains("data row 2"), "{err}");
        std::fs::remove_dir_all(&dir).ok();
    }
}
