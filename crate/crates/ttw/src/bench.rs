//! Policy by instance grid. Runs fan out over rayon; rows are sorted
//! before writing so the table does not depend on scheduling.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::Deserialize;
use ttw_core::adversary::{attack_with, laxity_for_delta};
use ttw_core::gen::{self, RequestGen};
use ttw_core::instance::validate_schedule_from;
use ttw_core::policies::{PolicyKind, TourChoice};
use ttw_core::sim::run;
use ttw_core::{Caps, Instance, MetricSpace, Time};

use crate::cli::{Format, Global, Outcome};
use crate::commands::{
    attack_specs, best_opt, check_attack, parse_delta, parse_policy, spec_name, AdversaryMode, Family,
};
use crate::io::to_json;
use crate::report::{to_csv, MetricFacts, Row};

/// Grid axes. Every field is optional; unset fields take the defaults of
/// [`ExperimentConfig::resolved`]. A `--config` JSON file uses the same
/// field names, and flags given on the command line override it.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Metric families (default uniform,path,random).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub families: Vec<Family>,
    /// Node counts (default 3,4,5).
    #[arg(long, value_delimiter = ',')]
    pub nodes: Vec<usize>,
    /// Seeds per cell, counted up from --seed (default 3).
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Requests per instance (default 10).
    #[arg(long)]
    pub requests: Option<usize>,
    /// Absolute laxities.
    #[arg(long, value_delimiter = ',')]
    pub laxity: Vec<Time>,
    /// Ratios TSP / L; each sets L from the metric (default 1/10,1/20
    /// when no laxity is given).
    #[arg(long, value_delimiter = ',')]
    pub delta: Vec<String>,
    /// Policies (default all).
    #[arg(long, value_parser = parse_policy, value_delimiter = ',')]
    pub policies: Vec<PolicyKind>,
    /// Also attack every policy with this adversary at each delta.
    #[arg(long, value_enum)]
    pub adversary: Option<AdversaryMode>,
    /// Uniform distance, path step or star leaf weight (default 1).
    #[arg(long)]
    pub weight: Option<u64>,
    /// Largest random edge weight (default 4).
    #[arg(long)]
    pub max_weight: Option<u64>,
}

impl ExperimentConfig {
    /// `self` over `base`, field by field.
    fn over(self, base: ExperimentConfig) -> ExperimentConfig {
        fn pick<T>(a: Vec<T>, b: Vec<T>) -> Vec<T> {
            if a.is_empty() {
                b
            } else {
                a
            }
        }
        ExperimentConfig {
            families: pick(self.families, base.families),
            nodes: pick(self.nodes, base.nodes),
            seeds: self.seeds.or(base.seeds),
            requests: self.requests.or(base.requests),
            laxity: pick(self.laxity, base.laxity),
            delta: pick(self.delta, base.delta),
            policies: pick(self.policies, base.policies),
            adversary: self.adversary.or(base.adversary),
            weight: self.weight.or(base.weight),
            max_weight: self.max_weight.or(base.max_weight),
        }
    }

    /// Fills every default.
    pub fn resolved(self) -> ExperimentConfig {
        let delta = if self.delta.is_empty() && self.laxity.is_empty() {
            vec!["1/10".into(), "1/20".into()]
        } else {
            self.delta
        };
        ExperimentConfig {
            families: if self.families.is_empty() {
                vec![Family::Uniform, Family::Path, Family::Random]
            } else {
                self.families
            },
            nodes: if self.nodes.is_empty() {
                vec![3, 4, 5]
            } else {
                self.nodes
            },
            seeds: Some(self.seeds.unwrap_or(3)),
            requests: Some(self.requests.unwrap_or(10)),
            laxity: self.laxity,
            delta,
            policies: if self.policies.is_empty() {
                PolicyKind::ALL.to_vec()
            } else {
                self.policies
            },
            adversary: self.adversary,
            weight: Some(self.weight.unwrap_or(1)),
            max_weight: Some(self.max_weight.unwrap_or(4)),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// JSON file with grid axes.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub grid: ExperimentConfig,
}

struct Cell {
    id: String,
    family: Family,
    seed: u64,
    metric: MetricSpace,
    facts: MetricFacts,
    laxity: Time,
    instance: Instance,
}

#[derive(Default)]
struct Partial {
    rows: Vec<Row>,
    violations: Vec<String>,
    capped: Vec<String>,
}

fn simulate_cell(cell: &Cell, policies: &[PolicyKind], caps: &Caps) -> Result<Partial> {
    let mut p = Partial::default();
    let inst = &cell.instance;
    let opt = best_opt(inst, 0, caps)?.map(|(_, r)| r.throughput as u64);
    if opt.is_none() {
        p.capped.push(format!("{}: offline optimum skipped", cell.id));
    }
    let l = cell.laxity;
    for &kind in policies {
        let (mut policy, meta) = kind.build(&cell.metric, l, TourChoice::Auto, caps)?;
        let out = run(inst, &mut policy, 0, None)?;
        let alg = out.schedule.throughput() as u64;
        let tag = format!("{} {kind}", cell.id);
        if validate_schedule_from(inst, &out.schedule, Some(0)).is_err() {
            p.violations.push(format!("{tag}: infeasible schedule"));
        }
        if let Some(o) = opt {
            if alg > o {
                p.violations.push(format!("{tag}: ALG {alg} above OPT {o}"));
            }
            match kind {
                // ALG >= OPT - 3 OPT K / L once L >= 10 TSP
                PolicyKind::TspEdf if meta.tour_exact == Some(true) => {
                    let (tsp, k) = (meta.tour_weight.unwrap_or(0), meta.phase_len.unwrap_or(1));
                    let (a, o, l, k) = (alg as i128, o as i128, l as i128, k as i128);
                    if l >= 10 * tsp as i128 && a * l < o * l - 3 * o * k {
                        p.violations
                            .push(format!("{tag}: ALG {a} below the TSP-EDF bound for OPT {o}"));
                    }
                }
                PolicyKind::OrientWindow
                    if meta.orienteering_exact == Some(true) && l > 9 * cell.facts.diameter && o > 28 * alg =>
                {
                    p.violations.push(format!("{tag}: OPT {o} above 28 ALG {alg}"));
                }
                _ => {}
            }
        }
        let seed = (cell.family == Family::Random).then_some(cell.seed);
        p.rows.push(
            cell.facts
                .row(cell.id.clone(), l, kind.as_str(), alg, opt, None, None, seed),
        );
    }
    Ok(p)
}

struct AttackCell {
    id_prefix: String,
    family: Family,
    seed: u64,
    metric: MetricSpace,
    star: Option<ttw_core::embedding::StarMetric>,
}

fn attack_cell(cell: &AttackCell, mode: AdversaryMode, cfg: &ExperimentConfig, caps: &Caps) -> Result<Partial> {
    let mut p = Partial::default();
    let specs = attack_specs(mode, &cell.metric, cell.star.as_ref(), 0, None, &cfg.delta, 4, caps)?;
    for (_, spec) in &specs {
        let facts = MetricFacts::of(&spec.travel_metric()?, caps);
        for &kind in &cfg.policies {
            let (att, _) = attack_with(spec, kind, caps)?;
            let tr = &att.transcript;
            let id = format!("{}-{}-L{}", cell.id_prefix, spec_name(mode), tr.laxity);
            check_attack(&att, &id, kind, &mut p.violations);
            let seed = (cell.family == Family::Random).then_some(cell.seed);
            p.rows.push(facts.row(
                id,
                tr.laxity,
                kind.as_str(),
                att.report.alg,
                att.report.opt_exact,
                Some(att.report.opt_prime),
                tr.termination.and_then(|t| t.case()),
                seed,
            ));
        }
    }
    Ok(p)
}

pub fn bench(g: &Global, a: &BenchArgs) -> Result<Outcome> {
    let mut cfg = a.grid.clone();
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg = cfg.over(file);
    }
    let cfg = cfg.resolved();
    let deltas = cfg.delta.iter().map(|s| parse_delta(s)).collect::<Result<Vec<_>>>()?;
    let (weight, max_weight) = (cfg.weight.unwrap_or(1), cfg.max_weight.unwrap_or(4));

    let mut cells = Vec::new();
    let mut attacks = Vec::new();
    for &family in &cfg.families {
        for &n in &cfg.nodes {
            for seed in g.seed..g.seed + cfg.seeds.unwrap_or(3) {
                let (metric, star) = family.metric(n, weight, max_weight, seed)?;
                let facts = MetricFacts::of(&metric, &g.caps);
                let mut laxities: Vec<Time> = cfg.laxity.clone();
                for &d in &deltas {
                    laxities.push(laxity_for_delta(facts.tsp, d)?.max(1));
                }
                laxities.sort_unstable();
                laxities.dedup();
                let prefix = format!("{}-n{n}-s{seed}", family.as_str());
                for &l in &laxities {
                    let spec = RequestGen {
                        count: cfg.requests.unwrap_or(10),
                        laxity: l,
                        slack: l,
                        horizon: 2 * l,
                    };
                    cells.push(Cell {
                        id: format!("{prefix}-L{l}"),
                        family,
                        seed,
                        metric: metric.clone(),
                        facts: facts.clone(),
                        laxity: l,
                        instance: gen::random_instance(metric.clone(), spec, seed),
                    });
                }
                let usable = match cfg.adversary {
                    Some(AdversaryMode::Star) => star.is_some() && n >= 2,
                    Some(AdversaryMode::General) => n >= 2,
                    _ => false,
                };
                if usable {
                    attacks.push(AttackCell {
                        id_prefix: prefix,
                        family,
                        seed,
                        metric,
                        star,
                    });
                }
            }
        }
    }

    let mut parts: Vec<Partial> = cells
        .par_iter()
        .map(|c| simulate_cell(c, &cfg.policies, &g.caps))
        .collect::<Result<_>>()?;
    if let Some(mode) = cfg.adversary {
        if mode == AdversaryMode::CaseA {
            anyhow::bail!("bench attacks support star and general modes");
        }
        let more: Vec<Partial> = attacks
            .par_iter()
            .map(|c| attack_cell(c, mode, &cfg, &g.caps))
            .collect::<Result<_>>()?;
        parts.extend(more);
    }

    let mut out = Outcome::default();
    let mut rows = Vec::new();
    for p in parts {
        rows.extend(p.rows);
        out.violations.extend(p.violations);
        out.capped.extend(p.capped);
    }
    rows.sort();
    out.violations.sort();
    out.capped.sort();
    out.text = match g.format {
        Format::Csv => to_csv(&rows)?,
        Format::Json => to_json(&rows)?,
    };
    Ok(out)
}
