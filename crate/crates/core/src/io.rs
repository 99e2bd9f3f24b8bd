//! CSV readers and writers for traces and measured data.
//!
//! Every float is written with Rust's shortest round-trip formatting, so
//! reading a file back and writing it again reproduces it byte for byte.

use num_complex::Complex64;

use crate::dynamics::CoherenceTrace;
use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "time_ps,re_rho,im_rho,signal";

/// Metadata key of the only line that changes between identical runs.
pub const TIMESTAMP_KEY: &str = "generated_unix";

/// Trace CSV contents with its '#' metadata in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub metadata: Vec<(String, String)>,
    pub times: Vec<f64>,
    pub rho: Vec<Complex64>,
    pub signal: Vec<f64>,
}

impl TraceFile {
    /// Collects the trace's own settings after the caller's metadata.
    pub fn from_trace(trace: &CoherenceTrace, metadata: &[(String, String)]) -> Self {
        let mut meta = metadata.to_vec();
        meta.push(("frame_ref_cm1".into(), trace.frame_ref.to_string()));
        meta.push(("decay_convention".into(), "amplitude exp(-t/tau_c), signal exp(-2t/tau_c)".into()));
        meta.push((
            "tau_c_ps".into(),
            trace.decay.tau_c().map_or_else(|| "none".into(), |t| t.to_string()),
        ));
        meta.push((
            "probe_fwhm_fs".into(),
            trace.probe_fwhm_fs.map_or_else(|| "none".into(), |t| t.to_string()),
        ));
        if let Some(w) = &trace.aliasing_warning {
            meta.push(("warning".into(), w.clone()));
        }
        TraceFile {
            metadata: meta,
            times: trace.times.clone(),
            rho: trace.rho.clone(),
            signal: trace.signal.clone(),
        }
    }

    pub fn with_timestamp(mut self, unix_seconds: u64) -> Self {
        self.metadata.insert(0, (TIMESTAMP_KEY.into(), unix_seconds.to_string()));
        self
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for ((t, r), s) in self.times.iter().zip(&self.rho).zip(&self.signal) {
            out.push_str(&format!("{t},{},{},{s}\n", r.re, r.im));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut metadata = Vec::new();
        let mut times = Vec::new();
        let mut rho = Vec::new();
        let mut signal = Vec::new();
        let mut seen_header = false;
        for (n, line) in text.lines().enumerate() {
            let lineno = n + 1;
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.strip_prefix(' ').unwrap_or(rest);
                let (k, v) = rest
                    .split_once(": ")
                    .ok_or_else(|| Error::Parse(format!("line {lineno}: metadata without 'key: value'")))?;
                metadata.push((k.to_string(), v.to_string()));
                continue;
            }
            if !seen_header {
                if line.trim() != TRACE_HEADER {
                    return Err(Error::Parse(format!("line {lineno}: expected header '{TRACE_HEADER}'")));
                }
                seen_header = true;
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(Error::Parse(format!("line {lineno}: expected 4 columns, found {}", cols.len())));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {lineno}: '{s}': {e}")))
            };
            times.push(num(cols[0])?);
            rho.push(Complex64::new(num(cols[1])?, num(cols[2])?));
            signal.push(num(cols[3])?);
        }
        if !seen_header {
            return Err(Error::Parse("missing trace header".into()));
        }
        Ok(TraceFile {
            metadata,
            times,
            rho,
            signal,
        })
    }
}

/// (time, signal) columns from a CSV file. Lines starting with '#' are
/// skipped, a non-numeric first row is taken as a header, and a header
/// column named `signal` is preferred over the second column.
pub fn read_two_column(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut column = 1;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.len() < 2 {
            return Err(Error::Parse(format!("record {}: need at least two columns", i + 1)));
        }
        let first: std::result::Result<f64, _> = rec[0].parse();
        if i == 0 && first.is_err() {
            if let Some(c) = rec.iter().position(|h| h.eq_ignore_ascii_case("signal")) {
                column = c;
            }
            continue;
        }
        let t = first.map_err(|e| Error::Parse(format!("record {}: '{}': {e}", i + 1, &rec[0])))?;
        let field = rec
            .get(column)
            .ok_or_else(|| Error::Parse(format!("record {}: missing column {column}", i + 1)))?;
        let v: f64 = field
            .parse()
            .map_err(|e| Error::Parse(format!("record {}: '{field}': {e}", i + 1)))?;
        times.push(t);
        values.push(v);
    }
    if times.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    Ok((times, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DecayModel;

    fn sample() -> CoherenceTrace {
        let times = vec![0.0, 0.5, 1.0];
        let rho = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.1 + 0.2, -1.0 / 3.0),
            Complex64::new(-2.5e-17, 7.0),
        ];
        CoherenceTrace {
            signal: rho.iter().map(|r| r.norm_sqr()).collect(),
            times,
            rho,
            frame_ref: 2329.9123,
            decay: DecayModel::Collisional { tau_c_ps: 256.0 },
            probe_fwhm_fs: None,
            aliasing_warning: Some("aliased".into()),
        }
    }

    #[test]
    fn trace_round_trip_is_byte_identical() {
        let meta = vec![("state".to_string(), "N2_X".to_string())];
        let f = TraceFile::from_trace(&sample(), &meta).with_timestamp(1_700_000_000);
        let text = f.to_csv();
        assert!(text.starts_with("# generated_unix: 1700000000\n# state: N2_X\n"));
        let back = TraceFile::parse(&text).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_csv(), text);
        assert_eq!(back.meta("tau_c_ps"), Some("256"));
        assert_eq!(back.meta("warning"), Some("aliased"));
    }

    #[test]
    fn malformed_traces_are_rejected() {
        assert!(TraceFile::parse("1,2,3,4\n").is_err());
        assert!(TraceFile::parse("time_ps,re_rho,im_rho,signal\n1,2,3\n").is_err());
        assert!(TraceFile::parse("time_ps,re_rho,im_rho,signal\n1,x,3,4\n").is_err());
        assert!(TraceFile::parse("#broken\ntime_ps,re_rho,im_rho,signal\n").is_err());
    }

    #[test]
    fn two_column_reader() {
        let (t, s) = read_two_column("# comment\ntime_ps,signal\n0,1.0\n0.5, 0.25\n").unwrap();
        assert_eq!(t, vec![0.0, 0.5]);
        assert_eq!(s, vec![1.0, 0.25]);
        let (_, s) = read_two_column("0,1\n1,2\n").unwrap();
        assert_eq!(s, vec![1.0, 2.0]);
        // A trace CSV feeds its signal column.
        let text = TraceFile::from_trace(&sample(), &[]).to_csv();
        let (t, s) = read_two_column(&text).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(s, sample().signal);
        assert!(read_two_column("# nothing\n").is_err());
        assert!(read_two_column("0,1\n1,abc\n").is_err());
    }
}
