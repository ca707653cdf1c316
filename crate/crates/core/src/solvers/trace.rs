use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

pub const TRACE_HEADER: &str = "k,wall_seconds,V,merit,selected,gamma,tau_scale,flops,discarded";

/// One row per iteration, describing the point `x^k` at the start of the
/// iteration and what the iteration did.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub wall_seconds: f64,
    pub v: f64,
    pub merit: f64,
    pub selected: usize,
    pub gamma: f64,
    pub tau_scale: f64,
    /// Cumulative estimated flops spent to reach `x^k`.
    pub flops: f64,
    pub discarded: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn push(&mut self, r: TraceRecord) {
        if let Some(last) = self.records.last() {
            debug_assert!(r.k > last.k);
            debug_assert!(r.flops >= last.flops);
        }
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.records.len() + 1));
        s.push_str(TRACE_HEADER);
        s.push('\n');
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.k,
                fmt_g17(r.wall_seconds),
                fmt_g17(r.v),
                fmt_g17(r.merit),
                r.selected,
                fmt_g17(r.gamma),
                fmt_g17(r.tau_scale),
                fmt_g17(r.flops),
                u8::from(r.discarded)
            );
        }
        s
    }

    pub fn write_csv(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}

/// C `printf("%.17g")`.
pub fn fmt_g17(v: f64) -> String {
    const P: i32 = 17;
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if exp < -4 || exp >= P {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (P - 1 - exp) as usize, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
