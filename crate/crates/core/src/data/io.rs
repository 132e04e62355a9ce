//! CSV readers for the three raw data schemas and the fitted-profile writer.
//! Readers check the header exactly and report malformed rows with their
//! 1-based line number.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dynamics::UserProfile;
use crate::error::{Error, Result};

use super::series::{IntensitySeries, IntensityUnit, PerformanceSeries};
use super::trimp::{trimp, Session};

pub const SRPE_HEADER: [&str; 2] = ["date", "perceived_exertion"];
pub const SESSIONS_HEADER: [&str; 6] = ["date", "duration_min", "avg_hr", "rest_hr", "max_hr", "sex"];
pub const VO2MAX_HEADER: [&str; 2] = ["date", "vo2max"];
pub const PROFILES_HEADER: [&str; 11] = [
    "user_id", "alpha", "beta", "lambda", "mu", "delta", "k_f", "k_g", "m", "l", "source",
];

/// Parsed sRPE log plus the number of rows skipped for a missing rating.
#[derive(Debug, Clone, PartialEq)]
pub struct SrpeLog {
    pub series: IntensitySeries,
    pub dropped: usize,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// User id taken from the file stem, e.g. `p07.csv` -> `p07`.
pub fn user_id_from_path(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "user".to_string())
}

struct Rows<R: Read> {
    reader: csv::Reader<R>,
    path: PathBuf,
}

impl<R: Read> Rows<R> {
    fn new(input: R, path: &Path, header: &[&str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let found = reader.headers()?.clone();
        if found.iter().ne(header.iter().copied()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("expected header {:?}, found {:?}", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
            });
        }
        Ok(Self {
            reader,
            path: path.to_path_buf(),
        })
    }

    /// Visits every data row with its line number.
    fn for_each(mut self, mut f: impl FnMut(usize, &csv::StringRecord) -> Result<()>) -> Result<()> {
        let mut record = csv::StringRecord::new();
        loop {
            let more = self.reader.read_record(&mut record).map_err(|e| {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                parse_error(&self.path, line, e.to_string())
            })?;
            if !more {
                return Ok(());
            }
            let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
            f(line, &record)?;
        }
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn field<'r>(path: &Path, line: usize, record: &'r csv::StringRecord, i: usize, name: &str) -> Result<&'r str> {
    record
        .get(i)
        .ok_or_else(|| parse_error(path, line, format!("missing column {name}")))
}

fn parse_date(path: &Path, line: usize, raw: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .map_err(|e| parse_error(path, line, format!("bad ISO-8601 date {raw:?}: {e}")))
}

fn parse_number(path: &Path, line: usize, raw: &str, name: &str) -> Result<f64> {
    let v: f64 = raw
        .parse()
        .map_err(|_| parse_error(path, line, format!("{name} {raw:?} is not a number")))?;
    if !v.is_finite() {
        return Err(parse_error(path, line, format!("{name} {raw:?} is not finite")));
    }
    Ok(v)
}

/// Rejects a date equal to or earlier than the previous row's date.
fn check_order(path: &Path, line: usize, prev: Option<NaiveDate>, date: NaiveDate) -> Result<()> {
    match prev {
        Some(p) if p == date => Err(parse_error(path, line, format!("duplicate date {date}"))),
        Some(p) if date < p => Err(parse_error(path, line, format!("date {date} follows {p}; dates must increase"))),
        _ => Ok(()),
    }
}

pub fn load_srpe(path: impl AsRef<Path>) -> Result<SrpeLog> {
    let path = path.as_ref();
    read_srpe(open(path)?, path)
}

pub fn read_srpe(input: impl Read, path: &Path) -> Result<SrpeLog> {
    let rows = Rows::new(input, path, &SRPE_HEADER)?;
    let mut samples = Vec::new();
    let mut dropped = 0;
    let mut prev = None;
    rows.for_each(|line, rec| {
        let date = parse_date(path, line, field(path, line, rec, 0, "date")?)?;
        check_order(path, line, prev, date)?;
        prev = Some(date);
        let raw = field(path, line, rec, 1, "perceived_exertion")?;
        if raw.is_empty() {
            dropped += 1;
            return Ok(());
        }
        let v = parse_number(path, line, raw, "perceived_exertion")?;
        if !(0.0..=10.0).contains(&v) {
            return Err(parse_error(path, line, format!("perceived exertion {v} outside [0, 10]")));
        }
        samples.push((date, v));
        Ok(())
    })?;
    if dropped > 0 {
        log::info!("{}: dropped {dropped} rows with no exertion rating", path.display());
    }
    Ok(SrpeLog {
        series: IntensitySeries::new(user_id_from_path(path), IntensityUnit::Srpe, samples)?,
        dropped,
    })
}

pub fn load_sessions(path: impl AsRef<Path>) -> Result<Vec<(NaiveDate, Session)>> {
    let path = path.as_ref();
    read_sessions(open(path)?, path)
}

/// Sessions in file order; several sessions may share a date but dates must
/// not decrease.
pub fn read_sessions(input: impl Read, path: &Path) -> Result<Vec<(NaiveDate, Session)>> {
    let rows = Rows::new(input, path, &SESSIONS_HEADER)?;
    let mut out: Vec<(NaiveDate, Session)> = Vec::new();
    rows.for_each(|line, rec| {
        let date = parse_date(path, line, field(path, line, rec, 0, "date")?)?;
        if let Some(&(p, _)) = out.last() {
            if date < p {
                return Err(parse_error(path, line, format!("date {date} follows {p}; dates must not decrease")));
            }
        }
        let num = |i: usize, name: &str| -> Result<f64> { parse_number(path, line, field(path, line, rec, i, name)?, name) };
        let session = Session {
            duration_min: num(1, "duration_min")?,
            avg_hr: num(2, "avg_hr")?,
            rest_hr: num(3, "rest_hr")?,
            max_hr: num(4, "max_hr")?,
            sex: field(path, line, rec, 5, "sex")?
                .parse()
                .map_err(|e: Error| parse_error(path, line, e.to_string()))?,
        };
        trimp(&session).map_err(|e| parse_error(path, line, e.to_string()))?;
        out.push((date, session));
        Ok(())
    })?;
    Ok(out)
}

/// Daily TRIMP series; sessions on the same date are summed.
pub fn trimp_series(user_id: impl Into<String>, sessions: &[(NaiveDate, Session)]) -> Result<IntensitySeries> {
    let mut samples: Vec<(NaiveDate, f64)> = Vec::new();
    for (date, s) in sessions {
        let load = trimp(s)?;
        match samples.last_mut() {
            Some((d, total)) if d == date => *total += load,
            _ => samples.push((*date, load)),
        }
    }
    IntensitySeries::new(user_id, IntensityUnit::Trimp, samples)
}

pub fn load_vo2max(path: impl AsRef<Path>) -> Result<PerformanceSeries> {
    let path = path.as_ref();
    read_vo2max(open(path)?, path)
}

pub fn read_vo2max(input: impl Read, path: &Path) -> Result<PerformanceSeries> {
    let rows = Rows::new(input, path, &VO2MAX_HEADER)?;
    let mut samples = Vec::new();
    let mut prev = None;
    rows.for_each(|line, rec| {
        let date = parse_date(path, line, field(path, line, rec, 0, "date")?)?;
        check_order(path, line, prev, date)?;
        prev = Some(date);
        let v = parse_number(path, line, field(path, line, rec, 1, "vo2max")?, "vo2max")?;
        if v <= 0.0 {
            return Err(parse_error(path, line, format!("VO2max {v} must be > 0")));
        }
        samples.push((date, v));
        Ok(())
    })?;
    PerformanceSeries::new(user_id_from_path(path), samples)
}

/// Where a profile came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileSource {
    Synthetic,
    Fitted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub user_id: String,
    #[serde(flatten)]
    pub profile: UserProfile,
    pub source: ProfileSource,
}

pub fn write_profiles(path: impl AsRef<Path>, rows: &[ProfileRow]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_profiles_to(file, rows)
}

pub fn write_profiles_to(out: impl Write, rows: &[ProfileRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PROFILES_HEADER)?;
    for r in rows {
        let p = &r.profile;
        let source = match r.source {
            ProfileSource::Synthetic => "synthetic",
            ProfileSource::Fitted => "fitted",
        };
        let mut rec = vec![r.user_id.clone()];
        rec.extend([p.alpha, p.beta, p.lambda, p.mu, p.delta, p.k_f, p.k_g, p.m, p.l].iter().map(|v| v.to_string()));
        rec.push(source.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<profiles>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn srpe(text: &str) -> Result<SrpeLog> {
        read_srpe(text.as_bytes(), Path::new("u1.csv"))
    }

    #[test]
    fn srpe_examples() {
        let ok = srpe("date,perceived_exertion\n2024-01-01,3\n2024-01-02,5.5\n2024-01-04,0\n").unwrap();
        assert_eq!(ok.series.samples.len(), 3);
        assert_eq!(ok.series.user_id, "u1");
        assert_eq!(ok.dropped, 0);

        let gap = srpe("date,perceived_exertion\n2024-01-01,3\n2024-01-02,\n2024-01-03,4\n").unwrap();
        assert_eq!(gap.series.samples.len(), 2);
        assert_eq!(gap.dropped, 1);

        let err = srpe("date,perceived_exertion\n2024-01-01,3\n2024-01-01,4\n").unwrap_err();
        assert!(err.to_string().contains("2024-01-01"), "{err}");
        assert!(err.to_string().contains(":3:"), "{err}");
    }

    #[test]
    fn srpe_rejects_malformed_rows() {
        let cases = [
            "date,perceived_exertion\n2024-01-01,abc\n",
            "date,perceived_exertion\n01/02/2024,3\n",
            "date,perceived_exertion\n2024-01-01,11\n",
            "date,perceived_exertion\n2024-01-02,1\n2024-01-01,1\n",
            "date,rpe\n2024-01-01,1\n",
            "date,perceived_exertion\n2024-01-01\n",
        ];
        for text in cases {
            match srpe(text) {
                Err(Error::Parse { line, .. }) => assert!(line >= 1),
                other => panic!("{text:?} gave {other:?}"),
            }
        }
        let bad = srpe("date,perceived_exertion\n2024-01-01,1\n2024-01-02,x\n").unwrap_err();
        assert!(matches!(bad, Error::Parse { line: 3, .. }), "{bad}");
    }

    #[test]
    fn sessions_become_daily_trimp() {
        let text = "date,duration_min,avg_hr,rest_hr,max_hr,sex\n\
                    2024-03-01,30,150,60,190,M\n\
                    2024-03-01,10,150,60,190,M\n\
                    2024-03-03,45,140,55,185,F\n";
        let sessions = read_sessions(text.as_bytes(), Path::new("s.csv")).unwrap();
        assert_eq!(sessions.len(), 3);
        let series = trimp_series("s", &sessions).unwrap();
        assert_eq!(series.samples.len(), 2);
        let single = trimp(&sessions[0].1).unwrap();
        assert!((series.samples[0].1 - single * 4.0 / 3.0).abs() < 1e-9);

        let bad = "date,duration_min,avg_hr,rest_hr,max_hr,sex\n2024-03-01,30,50,60,190,M\n";
        assert!(matches!(read_sessions(bad.as_bytes(), Path::new("s.csv")), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn vo2max_parsing() {
        let p = read_vo2max("date,vo2max\n2024-01-01,45.2\n2024-01-08,46\n".as_bytes(), Path::new("v.csv")).unwrap();
        assert_eq!(p.samples.len(), 2);
        assert!(read_vo2max("date,vo2max\n2024-01-01,0\n".as_bytes(), Path::new("v.csv")).is_err());
    }

    #[test]
    fn profiles_header_and_rows() {
        let mut buf = Vec::new();
        let rows = [ProfileRow {
            user_id: "u".into(),
            profile: UserProfile::default(),
            source: ProfileSource::Fitted,
        }];
        write_profiles_to(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "user_id,alpha,beta,lambda,mu,delta,k_f,k_g,m,l,source");
        assert!(lines.next().unwrap().ends_with(",fitted"));
    }
}
