//! Cost to reach merit thresholds, read off a trace.

use flexa::solvers::TraceRecord;

pub const DEFAULT_THRESHOLDS: [f64; 3] = [1e-2, 1e-4, 1e-6];

pub const AGGREGATE_HEADER: &str = "algo,sigma,workers,seed,thresh,iters,wall_s,flops";

/// Iterations, seconds and flops at which a run first reached a threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub iters: f64,
    pub wall_s: f64,
    pub flops: f64,
}

/// First crossing of `thresh` by the running minimum of the merit,
/// interpolated between the two rows around it (in log scale when both
/// merits are positive). `None` if the run never got there.
pub fn first_crossing(records: &[TraceRecord], thresh: f64) -> Option<Crossing> {
    let mut best = f64::INFINITY;
    let mut prev: Option<(&TraceRecord, f64)> = None;
    for r in records {
        let before = best;
        best = best.min(r.merit);
        if best <= thresh {
            let at = |r: &TraceRecord| Crossing {
                iters: r.k as f64,
                wall_s: r.wall_seconds,
                flops: r.flops,
            };
            let Some((p, pm)) = prev else {
                return Some(at(r));
            };
            debug_assert_eq!(pm, before);
            let frac = if pm > 0.0 && best > 0.0 {
                (pm.ln() - thresh.ln()) / (pm.ln() - best.ln())
            } else {
                (pm - thresh) / (pm - best)
            };
            let frac = frac.clamp(0.0, 1.0);
            let lerp = |a: f64, b: f64| a + frac * (b - a);
            return Some(Crossing {
                iters: lerp(p.k as f64, r.k as f64),
                wall_s: lerp(p.wall_seconds, r.wall_seconds),
                flops: lerp(p.flops, r.flops),
            });
        }
        prev = Some((r, best));
    }
    None
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        (s[m - 1] + s[m]) / 2.0
    }
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}
