//! Text formats: event TSV, rejects, metric table, Venn tallies, ground
//! truth sidecar, label files, binned PDFs and fit reports.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::cascade::{BuildReport, CascadeBuilder, Reject, RejectKind, RetweetEvent};
use crate::error::{Error, Result};
use crate::fit::{BimodalFit, BimodalParams, BinnedPdf};
use crate::metrics::{DirectionFlags, Metric, MetricVector};
use crate::synth::GroundTruth;

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn strip_eol(s: &str) -> &str {
    s.trim_end_matches(['\n', '\r'])
}

/// Parses one event line. Blank lines and `#` comments give `Ok(None)`.
pub fn parse_event_line(line_no: u64, line: &str) -> Result<Option<RetweetEvent>> {
    let line = strip_eol(line);
    if line.trim().is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 5 {
        return Err(parse_err(
            line_no,
            format!("expected 5 tab-separated fields, found {}", fields.len()),
        ));
    }
    let [cascade_id, post_id, actor, source, timestamp] = [0, 1, 2, 3, 4].map(|i| fields[i]);
    for (name, v) in [
        ("cascade_id", cascade_id),
        ("post_id", post_id),
        ("actor", actor),
    ] {
        if v.is_empty() {
            return Err(parse_err(line_no, format!("empty {name}")));
        }
    }
    let timestamp: i64 = timestamp
        .trim()
        .parse()
        .map_err(|_| parse_err(line_no, format!("invalid timestamp '{timestamp}'")))?;
    if timestamp < 0 {
        return Err(parse_err(
            line_no,
            format!("negative timestamp {timestamp}"),
        ));
    }
    Ok(Some(RetweetEvent {
        cascade_id: cascade_id.to_owned(),
        post_id: post_id.to_owned(),
        actor: actor.to_owned(),
        source: (!source.is_empty()).then(|| source.to_owned()),
        timestamp,
    }))
}

/// Streams an event file into a [`CascadeBuilder`]. Garbled lines abort the
/// read; semantic problems (duplicate posts, missing roots) go to the
/// rejects report.
pub fn read_events<R: BufRead>(mut reader: R) -> Result<BuildReport> {
    let mut builder = CascadeBuilder::new();
    let mut buf = String::new();
    let mut line_no = 0u64;
    let mut events = 0u64;
    loop {
        buf.clear();
        if reader.read_line(&mut buf)? == 0 {
            break;
        }
        line_no += 1;
        if let Some(e) = parse_event_line(line_no, &buf)? {
            builder.push(line_no, e);
            events += 1;
        }
    }
    if events == 0 {
        return Err(Error::NoEvents);
    }
    Ok(builder.finish())
}

/// Parses every event of an in-memory file, keeping line numbers.
pub fn parse_events(text: &str) -> Result<Vec<(u64, RetweetEvent)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i as u64 + 1;
        if let Some(e) = parse_event_line(n, line)? {
            out.push((n, e));
        }
    }
    if out.is_empty() {
        return Err(Error::NoEvents);
    }
    Ok(out)
}

pub fn write_event<W: Write>(w: &mut W, e: &RetweetEvent) -> Result<()> {
    writeln!(
        w,
        "{}\t{}\t{}\t{}\t{}",
        e.cascade_id,
        e.post_id,
        e.actor,
        e.source.as_deref().unwrap_or(""),
        e.timestamp
    )?;
    Ok(())
}

pub fn write_events<'a, W, I>(w: &mut W, events: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a RetweetEvent>,
{
    for e in events {
        write_event(w, e)?;
    }
    Ok(())
}

fn reject_prefix(kind: &RejectKind) -> &'static str {
    match kind {
        RejectKind::Event => "event rejected",
        RejectKind::Cascade => "cascade rejected",
        RejectKind::Warning => "warning",
    }
}

/// `line_number<TAB>reason`, with a header.
pub fn write_rejects<W: Write>(w: &mut W, rejects: &[Reject]) -> Result<()> {
    writeln!(w, "line_number\treason")?;
    for r in rejects {
        writeln!(w, "{}\t{}: {}", r.line, reject_prefix(&r.kind), r.reason)?;
    }
    Ok(())
}

const FLAG_COLUMNS: [&str; 3] = ["has_converge", "has_reciprocal", "has_self_loop"];

pub fn metrics_header() -> String {
    let mut cols = vec!["cascade_id"];
    cols.extend(Metric::ALL.iter().map(|m| m.name()));
    cols.extend(FLAG_COLUMNS);
    cols.join("\t")
}

/// One row of the metric table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub cascade_id: String,
    pub metrics: MetricVector,
}

pub fn write_metrics<W: Write>(w: &mut W, rows: &[MetricRow]) -> Result<()> {
    writeln!(w, "{}", metrics_header())?;
    for r in rows {
        let m = &r.metrics;
        write!(w, "{}", r.cascade_id)?;
        for metric in Metric::ALL {
            if metric.is_integer() {
                write!(w, "\t{}", metric.value(m) as u64)?;
            } else {
                write!(w, "\t{}", metric.value(m))?;
            }
        }
        let f = &m.flags;
        writeln!(
            w,
            "\t{}\t{}\t{}",
            f.has_converge, f.has_reciprocal, f.has_self_loop
        )?;
    }
    Ok(())
}

pub fn read_metrics<R: BufRead>(reader: R) -> Result<Vec<MetricRow>> {
    let mut rows = Vec::new();
    let mut header_seen = false;
    let expected = metrics_header();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        let line = strip_eol(&line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line != expected {
                return Err(parse_err(line_no, "unexpected metric table header"));
            }
            header_seen = true;
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 17 {
            return Err(parse_err(
                line_no,
                format!("expected 17 columns, found {}", f.len()),
            ));
        }
        let num = |k: usize| -> Result<f64> {
            f[k].parse::<f64>()
                .map_err(|_| parse_err(line_no, format!("invalid number '{}'", f[k])))
        };
        let int = |k: usize| -> Result<u64> {
            f[k].parse::<u64>()
                .map_err(|_| parse_err(line_no, format!("invalid count '{}'", f[k])))
        };
        let flag = |k: usize| -> Result<bool> {
            f[k].parse::<bool>()
                .map_err(|_| parse_err(line_no, format!("invalid flag '{}'", f[k])))
        };
        rows.push(MetricRow {
            cascade_id: f[0].to_owned(),
            metrics: MetricVector {
                mass: int(1)?,
                length: int(2)?,
                breadth: int(3)?,
                trend: num(4)?,
                fluctuation: num(5)?,
                branch_deviation: num(6)?,
                converge_deviation: num(7)?,
                reciprocity: num(8)?,
                self_loop_ratio: num(9)?,
                avg_activity: num(10)?,
                reciprocal_edge_count: int(11)?,
                self_loop_count: int(12)?,
                post_count: int(13)?,
                flags: DirectionFlags {
                    has_converge: flag(14)?,
                    has_reciprocal: flag(15)?,
                    has_self_loop: flag(16)?,
                },
            },
        });
    }
    if !header_seen {
        return Err(Error::Parse {
            line: 0,
            message: "empty metric table".into(),
        });
    }
    Ok(rows)
}

pub fn write_venn<W: Write>(w: &mut W, tally: &BTreeMap<String, u64>) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, tally)?;
    writeln!(w)?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), |x| x.to_string())
}

/// Ground-truth sidecar; undefined closed forms are written as `NA`.
pub fn write_truth<W: Write>(w: &mut W, truth: &[GroundTruth]) -> Result<()> {
    writeln!(
        w,
        "cascade_id\tshape\tclosed_form_trend\tclosed_form_fluct\tclosed_form_branch\tlabel"
    )?;
    for t in truth {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            t.cascade_id,
            t.shape,
            opt(t.closed_form_trend),
            opt(t.closed_form_fluct),
            opt(t.closed_form_branch),
            t.label
        )?;
    }
    Ok(())
}

/// Reads `cascade_id -> label` from a two-column topic file or from a
/// ground-truth sidecar (label is the last column). A first line starting
/// with `cascade_id` is treated as a header.
pub fn read_labels<R: BufRead>(reader: R) -> Result<BTreeMap<String, String>> {
    let mut labels = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        let line = strip_eol(&line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if i == 0 && line.starts_with("cascade_id\t") {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < 2 || f[0].is_empty() {
            return Err(parse_err(line_no, "expected cascade_id<TAB>label"));
        }
        let label = f[f.len() - 1];
        if label.is_empty() {
            return Err(parse_err(line_no, "empty label"));
        }
        if labels.insert(f[0].to_owned(), label.to_owned()).is_some() {
            return Err(parse_err(line_no, format!("duplicate cascade_id {}", f[0])));
        }
    }
    Ok(labels)
}

/// `bin_center<TAB>density` for every bin, empty bins included.
pub fn write_pdf<W: Write>(w: &mut W, pdf: &BinnedPdf) -> Result<()> {
    writeln!(w, "bin_center\tdensity")?;
    for (x, d) in pdf.centers().iter().zip(&pdf.densities) {
        writeln!(w, "{x}\t{d}")?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub metric_name: String,
    pub params: BimodalParams,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitReport {
    pub fn new(metric_name: &str, fit: &BimodalFit) -> Self {
        Self {
            metric_name: metric_name.to_owned(),
            params: fit.params(),
            sse: fit.residual_sse,
            iterations: fit.iterations,
            converged: fit.converged,
        }
    }
}

pub fn write_json<W: Write, T: Serialize>(w: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_root_and_retweet() {
        let e = parse_event_line(1, "c1\tp1\ta\t\t0\n").unwrap().unwrap();
        assert!(e.source.is_none());
        let e = parse_event_line(2, "c1\tp2\tb\ta\t5\r\n").unwrap().unwrap();
        assert_eq!(e.source.as_deref(), Some("a"));
        assert_eq!(e.timestamp, 5);
        assert!(parse_event_line(3, "# comment").unwrap().is_none());
        assert!(parse_event_line(4, "").unwrap().is_none());
    }

    #[test]
    fn garbled_lines_are_line_anchored() {
        let err = read_events("c\tp\ta\t\t0\nc\tq\tb\n".as_bytes()).unwrap_err();
        assert_eq!(
            err.to_string(),
            "line 2: expected 5 tab-separated fields, found 3"
        );
        let err = parse_event_line(7, "c\tp\ta\t\t-1").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 7, .. }));
        let err = parse_event_line(8, "c\tp\ta\t\tnoon").unwrap_err();
        assert!(err.to_string().contains("invalid timestamp"));
    }

    #[test]
    fn empty_input_has_no_events() {
        assert!(matches!(read_events("".as_bytes()), Err(Error::NoEvents)));
        assert!(matches!(
            read_events("# only a comment\n\n".as_bytes()),
            Err(Error::NoEvents)
        ));
    }

    #[test]
    fn event_round_trip() {
        let events = vec![
            RetweetEvent::original("1", "p0", "a", 0),
            RetweetEvent::retweet("1", "p1", "b", "a", 3),
        ];
        let mut buf = Vec::new();
        write_events(&mut buf, &events).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let parsed: Vec<RetweetEvent> = parse_events(&text)
            .unwrap()
            .into_iter()
            .map(|p| p.1)
            .collect();
        assert_eq!(parsed, events);
    }

    #[test]
    fn metric_table_round_trip_is_exact() {
        let rows = vec![MetricRow {
            cascade_id: "42".into(),
            metrics: MetricVector {
                mass: 10,
                length: 1,
                breadth: 9,
                trend: 1.8,
                fluctuation: 2f64.sqrt() * 0.8,
                branch_deviation: 10f64.sqrt(),
                converge_deviation: 0.1 + 0.2,
                reciprocity: 1.0 / 3.0,
                self_loop_ratio: 0.0,
                avg_activity: 0.9,
                reciprocal_edge_count: 0,
                self_loop_count: 0,
                post_count: 10,
                flags: DirectionFlags {
                    has_converge: true,
                    has_reciprocal: false,
                    has_self_loop: false,
                },
            },
        }];
        let mut buf = Vec::new();
        write_metrics(&mut buf, &rows).unwrap();
        let back = read_metrics(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("cascade_id\tmass\tlength\tbreadth\ttrend"));
    }

    #[test]
    fn metric_table_errors_name_the_line() {
        let text = format!("{}\n1\t2\n", metrics_header());
        let err = read_metrics(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn labels_from_topic_file_and_sidecar() {
        let topic = read_labels("7\tsports\n8\tpolitics\n".as_bytes()).unwrap();
        assert_eq!(topic["7"], "sports");
        let sidecar =
            "cascade_id\tshape\tclosed_form_trend\tclosed_form_fluct\tclosed_form_branch\tlabel\n\
                       0\tstar\t1.8\t1.1\t3.1\tstar\n";
        let l = read_labels(sidecar.as_bytes()).unwrap();
        assert_eq!(l["0"], "star");
        assert!(read_labels("1\ta\n1\tb\n".as_bytes()).is_err());
    }

    #[test]
    fn rejects_have_line_and_reason() {
        let mut buf = Vec::new();
        write_rejects(
            &mut buf,
            &[Reject {
                line: 3,
                kind: RejectKind::Event,
                reason: "cascade 1: duplicate post_id p".into(),
            }],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "line_number\treason\n3\tevent rejected: cascade 1: duplicate post_id p\n"
        );
    }
}
