//! Convergence tables in CSV form.

use std::io::Write;

use c1quintic::assembly::Norms;
use c1quintic::solver::{rate, RunReport};
use serde::{Deserialize, Serialize};

/// What the L2/H1/H2 columns measure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormSource {
    /// Exact solution when the problem has one, consecutive differences otherwise.
    Auto,
    /// `u_ℓ − u`.
    Exact,
    /// `u_ℓ − u_{ℓ+1}`; blank on the last level.
    Eps,
}

pub const HEADER: [&str; 10] = [
    "level", "L2", "L2_rate", "H1", "H1_rate", "H2", "H2_rate", "R", "R_rate", "m",
];

fn sci(x: Option<f64>) -> String {
    x.map(|x| format!("{x:.3e}")).unwrap_or_default()
}

fn fixed(x: Option<f64>) -> String {
    x.map(|x| format!("{x:.2}")).unwrap_or_default()
}

/// Table rows as strings, one per level.
pub fn rows(report: &RunReport, source: NormSource) -> anyhow::Result<Vec<[String; 10]>> {
    let exact = match source {
        NormSource::Auto => report.levels.iter().all(|l| l.error.is_some()),
        NormSource::Exact => true,
        NormSource::Eps => false,
    };
    if exact && report.levels.iter().any(|l| l.error.is_none()) {
        anyhow::bail!("problem '{}' has no exact solution; use --norms eps", report.problem);
    }
    let norms: Vec<Option<Norms>> = report
        .levels
        .iter()
        .map(|l| if exact { l.error } else { l.eps })
        .collect();
    let mut out = Vec::new();
    for (i, l) in report.levels.iter().enumerate() {
        let cur = norms[i];
        let prev = i.checked_sub(1).and_then(|j| norms[j]);
        let pick = |n: Option<Norms>, f: fn(&Norms) -> f64| n.as_ref().map(f);
        let col = |f: fn(&Norms) -> f64| [sci(pick(cur, f)), fixed(rate(pick(prev, f), pick(cur, f)))];
        let [l2, l2r] = col(|n| n.l2);
        let [h1, h1r] = col(|n| n.h1);
        let [h2, h2r] = col(|n| n.h2);
        let rr = i
            .checked_sub(1)
            .and_then(|j| rate(Some(report.levels[j].residual), Some(l.residual)));
        out.push([
            l.level.to_string(),
            l2,
            l2r,
            h1,
            h1r,
            h2,
            h2r,
            sci(Some(l.residual)),
            fixed(rr),
            l.iterations.to_string(),
        ]);
    }
    Ok(out)
}

pub fn write_csv(w: impl Write, report: &RunReport, source: NormSource) -> anyhow::Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(HEADER)?;
    for r in rows(report, source)? {
        csv.write_record(&r)?;
    }
    csv.flush()?;
    Ok(())
}
