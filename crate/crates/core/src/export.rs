//! CSV and JSON emission for densities, envelopes, samples, and reports.
//!
//! Output is plain-text and deterministic: floats print with Rust's
//! shortest-roundtrip formatting, columns are fixed, and nothing depends on
//! map iteration order. Identical inputs give byte-identical files.

use std::io::Write;

use serde::Serialize;

use crate::density::FiducialDensity;
use crate::discrete::{DiscreteFiducialBounds, SlpViolationReport};
use crate::error::Result;
use crate::principles::SlpPairReport;
use crate::sampler::{Draw, SampleSet};

/// Pretty-printed JSON for any serializable report, with a trailing newline.
pub fn to_json<T: Serialize>(value: &T, out: &mut dyn Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)
        .map_err(|e| crate::error::Error::InvalidArgument(format!("json serialization: {e}")))?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Density table: one row per grid node, parameter coordinates then the
/// density value.
pub fn density_to_csv(fd: &FiducialDensity, out: &mut dyn Write) -> Result<()> {
    let p = fd.grid.dim();
    for a in 0..p {
        write!(out, "xi{a},")?;
    }
    writeln!(out, "density")?;
    for (node, &v) in fd.grid.nodes().zip(&fd.values) {
        for c in &node {
            write!(out, "{c},")?;
        }
        writeln!(out, "{v}")?;
    }
    Ok(())
}

/// Envelope table: `p, H_lower, H_half, H_upper`.
pub fn bounds_to_csv(b: &DiscreteFiducialBounds, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "p,H_lower,H_half,H_upper")?;
    for k in 0..b.params.len() {
        writeln!(out, "{},{},{},{}", b.params[k], b.lower[k], b.half[k], b.upper[k])?;
    }
    Ok(())
}

/// Side-by-side geometric/binomial envelope table on the shared grid.
pub fn slp_demo_to_csv(r: &SlpViolationReport, out: &mut dyn Write) -> Result<()> {
    writeln!(
        out,
        "p,geom_lower,geom_half,geom_upper,binom_lower,binom_half,binom_upper"
    )?;
    for k in 0..r.geometric.params.len() {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.geometric.params[k],
            r.geometric.lower[k],
            r.geometric.half[k],
            r.geometric.upper[k],
            r.binomial.lower[k],
            r.binomial.half[k],
            r.binomial.upper[k]
        )?;
    }
    Ok(())
}

/// Draws, one row each: parameter coordinates for point draws, or
/// `lo,half,hi` for interval draws. Metadata goes in the JSON sidecar.
pub fn samples_to_csv(s: &SampleSet, out: &mut dyn Write) -> Result<()> {
    let interval = matches!(s.draws.first(), Some(Draw::Interval { .. }));
    if interval {
        writeln!(out, "lo,half,hi")?;
    } else {
        let p = match s.draws.first() {
            Some(Draw::Point(v)) => v.len(),
            _ => 0,
        };
        let header: Vec<String> = (0..p).map(|a| format!("xi{a}")).collect();
        writeln!(out, "{}", header.join(","))?;
    }
    for d in &s.draws {
        match d {
            Draw::Point(v) => {
                let row: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
                writeln!(out, "{}", row.join(","))?;
            }
            Draw::Interval { lo, hi, half } => {
                writeln!(out, "{lo},{half},{hi}")?;
            }
        }
    }
    Ok(())
}

/// Conditional-probability ladder: `theta, c, stderr` (blank `c` for grid
/// gaps).
pub fn slp_pair_to_csv(r: &SlpPairReport, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "theta,c,stderr,p_o1,p_o2,n_o1")?;
    for i in 0..r.theta.len() {
        match r.c[i] {
            Some(c) => writeln!(
                out,
                "{},{},{},{},{},{}",
                r.theta[i], c, r.c_stderr[i], r.p_o1[i], r.p_o2[i], r.n_o1[i]
            )?,
            None => writeln!(
                out,
                "{},,,{},{},{}",
                r.theta[i], r.p_o1[i], r.p_o2[i], r.n_o1[i]
            )?,
        }
    }
    Ok(())
}
