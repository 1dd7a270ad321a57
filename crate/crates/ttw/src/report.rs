//! The CSV row shared by `simulate`, `adversary` and `bench`.

use anyhow::Result;
use num_rational::Ratio;
use serde::Serialize;
use ttw_core::instance::classify_laxity;
use ttw_core::metric::{diameter, tsp_best_effort};
use ttw_core::{Caps, MetricSpace, Time};

/// Fixed columns: `instance_id, n, L, tsp, diameter, delta, case, policy,
/// alg, opt, opt_prime, ratio, termination_case, seed`. Absent values are
/// empty cells.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Row {
    pub instance_id: String,
    pub n: usize,
    #[serde(rename = "L")]
    pub laxity: Time,
    pub tsp: u64,
    pub diameter: u64,
    /// `TSP / L`, reduced.
    pub delta: String,
    pub case: String,
    pub policy: String,
    pub alg: u64,
    pub opt: Option<u64>,
    pub opt_prime: Option<u64>,
    /// Benchmark over ALG (`opt_prime` when present, else `opt`), six
    /// decimals, or `inf` when ALG served nothing.
    pub ratio: Option<String>,
    pub termination_case: Option<u8>,
    pub seed: Option<u64>,
}

pub const COLUMNS: [&str; 14] = [
    "instance_id",
    "n",
    "L",
    "tsp",
    "diameter",
    "delta",
    "case",
    "policy",
    "alg",
    "opt",
    "opt_prime",
    "ratio",
    "termination_case",
    "seed",
];

pub fn ratio_cell(bench: u64, alg: u64) -> String {
    if alg == 0 {
        if bench == 0 {
            "1.000000".into()
        } else {
            "inf".into()
        }
    } else {
        format!("{:.6}", bench as f64 / alg as f64)
    }
}

/// Metric columns of a row.
#[derive(Debug, Clone)]
pub struct MetricFacts {
    pub n: usize,
    pub tsp: u64,
    pub diameter: u64,
}

impl MetricFacts {
    pub fn of(g: &MetricSpace, caps: &Caps) -> Self {
        MetricFacts {
            n: g.n(),
            tsp: tsp_best_effort(g, caps.tsp).0.weight,
            diameter: diameter(g),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn row(
        &self,
        instance_id: String,
        laxity: Time,
        policy: &str,
        alg: u64,
        opt: Option<u64>,
        opt_prime: Option<u64>,
        termination_case: Option<u8>,
        seed: Option<u64>,
    ) -> Row {
        let delta = if laxity == 0 {
            String::new()
        } else {
            Ratio::new(self.tsp, laxity).to_string()
        };
        Row {
            instance_id,
            n: self.n,
            laxity,
            tsp: self.tsp,
            diameter: self.diameter,
            delta,
            case: classify_laxity(laxity, self.diameter, self.tsp).to_string(),
            policy: policy.into(),
            alg,
            opt,
            opt_prime,
            ratio: opt_prime.or(opt).map(|b| ratio_cell(b, alg)),
            termination_case,
            seed,
        }
    }
}

pub fn to_csv(rows: &[Row]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ttw_core::gen;

    #[test]
    fn header_matches_columns() {
        let facts = MetricFacts::of(&gen::uniform(3, 1), &Caps::default());
        let row = facts.row("x".into(), 12, "edf", 3, Some(4), None, None, Some(7));
        assert_eq!(row.delta, "1/4");
        assert_eq!(row.ratio.as_deref(), Some("1.333333"));
        let text = to_csv(&[row]).unwrap();
        assert_eq!(text.lines().next().unwrap(), COLUMNS.join(","));
        assert_eq!(to_csv(&[]).unwrap().trim_end(), COLUMNS.join(","));
    }

    #[test]
    fn ratio_cells() {
        assert_eq!(ratio_cell(3, 0), "inf");
        assert_eq!(ratio_cell(0, 0), "1.000000");
        assert_eq!(ratio_cell(6, 3), "2.000000");
    }
}
