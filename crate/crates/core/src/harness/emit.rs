//! CSV / JSON emission of trial records, with a determinism hash.
//!
//! The CSV header is fixed; floats print with 17 significant digits so the
//! emit -> parse round trip is lossless. The determinism hash covers every
//! column except `wall_time_ms`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::config::EmitFormat;
use crate::harness::record::TrialRecord;

/// Fixed CSV column order.
pub const CSV_HEADER: &str = "problem,n,d,sigma,kappa,h,m,seed,region,gamma_star,margin_trained,margin_good,margin_bad,margin_constructed,train_err,test_err,err_psi_S,err_psibar_S,err_psi_D,q_ratio,cross_mass_D,status,wall_time_ms";

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn csv_line(r: &TrialRecord, include_wall_time: bool) -> String {
    let mut line = String::new();
    let _ = write!(
        line,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.problem,
        r.n,
        r.d,
        fmt_f64(r.sigma),
        fmt_f64(r.kappa),
        fmt_opt(r.h),
        r.m.map(|m| m.to_string()).unwrap_or_default(),
        r.seed,
        r.region,
        fmt_opt(r.gamma_star),
        fmt_opt(r.margin_trained),
        fmt_opt(r.margin_good),
        fmt_opt(r.margin_bad),
        fmt_opt(r.margin_constructed),
        fmt_opt(r.train_err),
        fmt_opt(r.test_err),
        fmt_opt(r.err_psi_s),
        fmt_opt(r.err_psibar_s),
        fmt_opt(r.err_psi_d),
        fmt_opt(r.q_ratio),
        fmt_opt(r.cross_mass_d),
        r.status,
    );
    if include_wall_time {
        let _ = write!(line, ",{}", r.wall_time_ms);
    }
    line
}

/// Renders records as CSV with the fixed header.
pub fn to_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&csv_line(r, true));
        out.push('\n');
    }
    out
}

/// Renders records as pretty JSON, mirroring the record fields verbatim.
pub fn to_json(records: &[TrialRecord]) -> Result<String> {
    Ok(serde_json::to_string_pretty(records)?)
}

/// Writes records to `path` in the requested format.
pub fn emit(records: &[TrialRecord], format: EmitFormat, path: &Path) -> Result<()> {
    let body = match format {
        EmitFormat::Csv => to_csv(records),
        EmitFormat::Json => to_json(records)?,
    };
    std::fs::write(path, body)?;
    Ok(())
}

/// Parses CSV produced by [`to_csv`] back into records.
pub fn parse_csv(text: &str) -> Result<Vec<TrialRecord>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::invalid("empty csv"))?;
    if header != CSV_HEADER {
        return Err(Error::invalid("unexpected csv header"));
    }
    let parse_opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse::<f64>().map(Some).map_err(|e| Error::invalid(format!("bad float {s}: {e}")))
        }
    };
    let mut records = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 23 {
            return Err(Error::invalid(format!("expected 23 fields, got {}", f.len())));
        }
        records.push(TrialRecord {
            problem: f[0].to_string(),
            n: f[1].parse().map_err(|_| Error::invalid("bad n"))?,
            d: f[2].parse().map_err(|_| Error::invalid("bad d"))?,
            sigma: f[3].parse().map_err(|_| Error::invalid("bad sigma"))?,
            kappa: f[4].parse().map_err(|_| Error::invalid("bad kappa"))?,
            h: parse_opt(f[5])?,
            m: if f[6].is_empty() {
                None
            } else {
                Some(f[6].parse().map_err(|_| Error::invalid("bad m"))?)
            },
            seed: f[7].parse().map_err(|_| Error::invalid("bad seed"))?,
            region: f[8].to_string(),
            gamma_star: parse_opt(f[9])?,
            margin_trained: parse_opt(f[10])?,
            margin_good: parse_opt(f[11])?,
            margin_bad: parse_opt(f[12])?,
            margin_constructed: parse_opt(f[13])?,
            train_err: parse_opt(f[14])?,
            test_err: parse_opt(f[15])?,
            err_psi_s: parse_opt(f[16])?,
            err_psibar_s: parse_opt(f[17])?,
            err_psi_d: parse_opt(f[18])?,
            q_ratio: parse_opt(f[19])?,
            cross_mass_d: parse_opt(f[20])?,
            status: f[21].to_string(),
            wall_time_ms: f[22].parse().map_err(|_| Error::invalid("bad wall time"))?,
        });
    }
    Ok(records)
}

/// FNV-1a-64 hash of the CSV rendering, excluding the wall-time column.
pub fn determinism_hash(records: &[TrialRecord]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    feed(CSV_HEADER.as_bytes());
    for r in records {
        feed(csv_line(r, false).as_bytes());
        feed(b"\n");
    }
    hash
}
