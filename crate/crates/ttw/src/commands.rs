//! Subcommands other than `bench`.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, ValueEnum};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use ttw_core::adversary::{attack_with, laxity_for_delta, AttackSpec, RatioReport};
use ttw_core::embedding::{embed_prim_trace, embed_star, verify_embedding, StarMetric, VerifyMode, EXHAUSTIVE_CAP};
use ttw_core::gen::{self, RequestGen};
use ttw_core::instance::{classify_case, laxity, validate_schedule_from};
use ttw_core::metric::{diameter, tsp_best_effort};
use ttw_core::offline::{bundle_state_count, opt_bundled, opt_exact};
use ttw_core::orienteering::{orienteering_exact, orienteering_greedy};
use ttw_core::policies::{PolicyKind, PolicyMeta, TourChoice};
use ttw_core::sim::run;
use ttw_core::{Caps, Instance, MetricSpace, Node, Schedule, Time};

use crate::cli::{Format, Global, Outcome};
use crate::io::{read_instance, read_metric, to_json, write_jsonl};
use crate::report::{to_csv, MetricFacts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Uniform,
    Path,
    Star,
    Random,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Uniform => "uniform",
            Family::Path => "path",
            Family::Star => "star",
            Family::Random => "random",
        }
    }

    /// `weight` is the uniform distance, the path step or the star leaf
    /// weight; `max_weight` bounds random edges.
    pub fn metric(
        self,
        n: usize,
        weight: u64,
        max_weight: u64,
        seed: u64,
    ) -> Result<(MetricSpace, Option<StarMetric>)> {
        ensure!(n >= 1, "a metric needs at least one node");
        ensure!(weight >= 1 && max_weight >= 1, "weights must be positive");
        Ok(match self {
            Family::Uniform => (gen::uniform(n, weight), None),
            Family::Path => (gen::path(n, weight), None),
            Family::Star => {
                let s = StarMetric::new(vec![weight; n]);
                (s.to_metric()?, Some(s))
            }
            Family::Random => (gen::random_metric(n, max_weight, seed), None),
        })
    }
}

pub fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    PolicyKind::from_str(s).map_err(|e| e.to_string())
}

pub fn parse_tour(s: &str) -> Result<TourChoice, String> {
    TourChoice::from_str(s).map_err(|e| e.to_string())
}

pub fn parse_delta(s: &str) -> Result<Ratio<u64>> {
    let d = Ratio::<u64>::from_str(s.trim()).map_err(|_| anyhow::anyhow!("delta {s:?} is not a fraction like 1/16"))?;
    ensure!(*d.numer() > 0, "delta must be positive");
    Ok(d)
}

#[derive(Debug, Clone, Args)]
pub struct MetricArgs {
    /// Metric JSON file, or an instance file whose metric is used.
    #[arg(long, conflicts_with = "family")]
    pub metric: Option<PathBuf>,
    /// Generator family.
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    /// Node count for generated metrics.
    #[arg(short, long, default_value_t = 4)]
    pub n: usize,
    /// Uniform distance, path step, or star leaf weight.
    #[arg(long, default_value_t = 1)]
    pub weight: u64,
    /// Explicit star leaf weights, e.g. 0,1,1,2.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["metric", "family"])]
    pub weights: Vec<u64>,
    /// Largest edge weight of the random family.
    #[arg(long, default_value_t = 9)]
    pub max_weight: u64,
}

impl MetricArgs {
    /// The metric, plus its star form when it was given as one.
    pub fn resolve(&self, seed: u64) -> Result<(MetricSpace, Option<StarMetric>)> {
        if !self.weights.is_empty() {
            let s = StarMetric::new(self.weights.clone());
            return Ok((s.to_metric()?, Some(s)));
        }
        if let Some(p) = &self.metric {
            return Ok((read_metric(p)?, None));
        }
        match self.family {
            Some(f) => f.metric(self.n, self.weight, self.max_weight, seed),
            None => bail!("give a metric with --metric, --family or --weights"),
        }
    }
}

fn json_only(g: &Global, what: &str) -> Result<()> {
    ensure!(g.format == Format::Json, "{what} only writes JSON");
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub metric: MetricArgs,
    /// Number of random requests (none by default).
    #[arg(long, default_value_t = 0)]
    pub requests: usize,
    /// Minimum window length, before scaling.
    #[arg(long, default_value_t = 10)]
    pub laxity: Time,
    /// Extra window length drawn from 0..=slack, before scaling.
    #[arg(long, default_value_t = 0)]
    pub slack: Time,
    /// Releases are drawn from 1..=horizon, before scaling.
    #[arg(long, default_value_t = 20)]
    pub horizon: Time,
    /// Integer factor applied to distances and to all times.
    #[arg(long, default_value_t = 1)]
    pub scale: u64,
}

pub fn gen(g: &Global, a: &GenArgs) -> Result<Outcome> {
    json_only(g, "gen")?;
    ensure!(a.scale >= 1, "scale must be positive");
    ensure!(a.laxity >= 1, "laxity must be at least 1");
    let (mut metric, _) = a.metric.resolve(g.seed)?;
    if a.scale > 1 {
        metric = metric.scaled(a.scale);
    }
    let requests = if a.requests == 0 {
        Vec::new()
    } else {
        let spec = RequestGen {
            count: a.requests,
            laxity: a.laxity * a.scale,
            slack: a.slack * a.scale,
            horizon: a.horizon * a.scale,
        };
        gen::random_instance(metric.clone(), spec, g.seed).requests().to_vec()
    };
    let inst = Instance::new(metric, requests, a.scale)?.with_seed(g.seed);
    Ok(Outcome::text(to_json(&inst)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Verify {
    /// Exhaustive up to the exhaustive cap, sampled above it.
    Auto,
    Exhaustive,
    Sampled,
    None,
}

#[derive(Debug, Clone, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub metric: MetricArgs,
    /// Hub node of the embedding.
    #[arg(long, default_value_t = 0)]
    pub v0: Node,
    #[arg(long, value_enum, default_value_t = Verify::Auto)]
    pub verify: Verify,
    /// Subset count for sampled verification.
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    /// Also trace Embed-Prim from the Steiner tree on these nodes (v0 is added).
    #[arg(long, value_delimiter = ',')]
    pub terminals: Vec<Node>,
}

pub fn embed(g: &Global, a: &EmbedArgs) -> Result<Outcome> {
    json_only(g, "embed")?;
    let (metric, _) = a.metric.resolve(g.seed)?;
    metric.check_node(a.v0)?;
    let emb = embed_star(&metric, a.v0);
    let mode = match a.verify {
        Verify::None => None,
        Verify::Exhaustive => Some(VerifyMode::Exhaustive),
        Verify::Sampled => Some(VerifyMode::Sampled {
            count: a.samples,
            seed: g.seed,
        }),
        Verify::Auto if metric.n() <= EXHAUSTIVE_CAP => Some(VerifyMode::Exhaustive),
        Verify::Auto => Some(VerifyMode::Sampled {
            count: a.samples,
            seed: g.seed,
        }),
    };
    let report = mode.map(|m| verify_embedding(&metric, &emb, m, &g.caps)).transpose()?;
    let trace = if a.terminals.is_empty() {
        None
    } else {
        let mut terms = a.terminals.clone();
        terms.push(a.v0);
        terms.sort_unstable();
        terms.dedup();
        Some(embed_prim_trace(&metric, a.v0, &terms, &g.caps)?)
    };
    let mut out = Outcome::text(to_json(&serde_json::json!({
        "embedding": emb,
        "report": report,
        "trace": trace,
    }))?);
    if let Some(r) = &report {
        if !r.pass {
            let bad = r.checks.iter().filter(|c| !c.pass).count();
            out.violations.push(format!(
                "embedding check failed: property1 {}, {bad} subsets",
                r.property1
            ));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrienteerMethod {
    /// Exact within the orienteering cap, greedy above it.
    Auto,
    Exact,
    Greedy,
}

#[derive(Debug, Clone, Args)]
pub struct OrienteerArgs {
    #[command(flatten)]
    pub metric: MetricArgs,
    /// Node prizes (all 1 when omitted).
    #[arg(long, value_delimiter = ',')]
    pub prizes: Vec<u64>,
    /// Largest allowed path length.
    #[arg(long)]
    pub budget: u64,
    #[arg(long, value_enum, default_value_t = OrienteerMethod::Auto)]
    pub method: OrienteerMethod,
}

pub fn orienteer(g: &Global, a: &OrienteerArgs) -> Result<Outcome> {
    json_only(g, "orienteer")?;
    let (metric, _) = a.metric.resolve(g.seed)?;
    let prizes = if a.prizes.is_empty() {
        vec![1; metric.n()]
    } else {
        a.prizes.clone()
    };
    let method = match a.method {
        OrienteerMethod::Auto if metric.n() <= g.caps.orienteering => OrienteerMethod::Exact,
        OrienteerMethod::Auto => OrienteerMethod::Greedy,
        m => m,
    };
    let solution = match method {
        OrienteerMethod::Greedy => orienteering_greedy(&metric, &prizes, a.budget)?,
        _ => orienteering_exact(&metric, &prizes, a.budget, g.caps.orienteering)?,
    };
    Ok(Outcome::text(to_json(&serde_json::json!({
        "method": method,
        "solution": solution,
    }))?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptMethod {
    /// Plain DP within its cap, else the bundled DP.
    Auto,
    Exact,
    Bundled,
}

#[derive(Debug, Clone, Args)]
pub struct OptArgs {
    /// Instance JSON file.
    #[arg(long)]
    pub instance: PathBuf,
    /// Vehicle position at tick 1.
    #[arg(long, default_value_t = 0)]
    pub start: Node,
    #[arg(long, value_enum, default_value_t = OptMethod::Auto)]
    pub method: OptMethod,
}

/// Best exact oracle within the caps, or `None` when both are too large.
pub fn best_opt(
    inst: &Instance,
    start: Node,
    caps: &Caps,
) -> Result<Option<(OptMethod, ttw_core::offline::OptResult)>> {
    if inst.len() <= caps.opt {
        return Ok(Some((OptMethod::Exact, opt_exact(inst, start, caps, None)?)));
    }
    if bundle_state_count(inst).is_some_and(|s| s <= caps.bundle_states) {
        return Ok(Some((OptMethod::Bundled, opt_bundled(inst, start, caps, None)?)));
    }
    Ok(None)
}

pub fn opt(g: &Global, a: &OptArgs) -> Result<Outcome> {
    json_only(g, "opt")?;
    let inst = read_instance(&a.instance)?;
    let (method, res) = match a.method {
        OptMethod::Exact => (OptMethod::Exact, opt_exact(&inst, a.start, &g.caps, None)?),
        OptMethod::Bundled => (OptMethod::Bundled, opt_bundled(&inst, a.start, &g.caps, None)?),
        OptMethod::Auto => match best_opt(&inst, a.start, &g.caps)? {
            Some(x) => x,
            None => {
                // report the plain DP's cap error
                (OptMethod::Exact, opt_exact(&inst, a.start, &g.caps, None)?)
            }
        },
    };
    let valid = validate_schedule_from(&inst, &res.schedule, Some(a.start)).is_ok();
    let mut out = Outcome::text(to_json(&serde_json::json!({
        "method": method,
        "throughput": res.throughput,
        "explored": res.explored,
        "valid": valid,
        "schedule": res.schedule,
    }))?);
    if !valid {
        out.violations.push("optimal schedule failed validation".into());
    }
    Ok(out)
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Instance JSON file.
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_parser = parse_policy, default_value = "tsp-edf")]
    pub policy: PolicyKind,
    /// Vehicle position at tick 1.
    #[arg(long, default_value_t = 0)]
    pub start: Node,
    /// Tour used by TSP-EDF: exact, approx or auto.
    #[arg(long, value_parser = parse_tour, default_value = "auto")]
    pub tsp: TourChoice,
    /// Write one JSON record per tick to this file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Skip the offline optimum.
    #[arg(long)]
    pub no_opt: bool,
}

#[derive(Debug, Serialize)]
struct Summary {
    instance_id: String,
    policy: PolicyMeta,
    laxity: Time,
    case: Option<ttw_core::instance::CaseReport>,
    throughput: u64,
    opt: Option<u64>,
    opt_method: Option<OptMethod>,
    ratio: Option<String>,
    valid: bool,
    schedule: Schedule,
}

fn stem(p: &std::path::Path) -> String {
    p.file_stem()
        .map_or_else(|| "instance".into(), |s| s.to_string_lossy().into_owned())
}

pub fn simulate(g: &Global, a: &SimulateArgs) -> Result<Outcome> {
    let inst = read_instance(&a.instance)?;
    inst.metric().check_node(a.start)?;
    let l = laxity(&inst).unwrap_or(1);
    let (mut policy, meta) = a.policy.build(inst.metric(), l, a.tsp, &g.caps)?;
    let out = run(&inst, &mut policy, a.start, None)?;
    if let Some(p) = &a.trace {
        write_jsonl(p, &out.trace.ticks)?;
    }
    let alg = out.schedule.throughput() as u64;
    let valid = validate_schedule_from(&inst, &out.schedule, Some(a.start)).is_ok();

    let mut outcome = Outcome::default();
    let opt = if a.no_opt {
        None
    } else {
        let o = best_opt(&inst, a.start, &g.caps)?;
        if o.is_none() {
            outcome
                .capped
                .push(format!("offline optimum skipped for {} requests", inst.len()));
        }
        o
    };
    let opt_n = opt.as_ref().map(|(_, r)| r.throughput as u64);
    if !valid {
        outcome
            .violations
            .push(format!("{} produced an infeasible schedule", meta.name));
    }
    if opt_n.is_some_and(|o| o < alg) {
        outcome.violations.push("policy beat the offline optimum".into());
    }
    let id = stem(&a.instance);
    outcome.text = match g.format {
        Format::Csv => {
            let facts = MetricFacts::of(inst.metric(), &g.caps);
            to_csv(&[facts.row(id, l, &meta.name, alg, opt_n, None, None, inst.seed())])?
        }
        Format::Json => to_json(&Summary {
            instance_id: id,
            laxity: l,
            // empty instances have no laxity to classify
            case: classify_case(&inst, &g.caps).ok(),
            policy: meta,
            throughput: alg,
            opt: opt_n,
            opt_method: opt.map(|(m, _)| m),
            ratio: opt_n.map(|o| crate::report::ratio_cell(o, alg)),
            valid,
            schedule: out.schedule,
        })?,
    };
    Ok(outcome)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryMode {
    CaseA,
    Star,
    General,
}

#[derive(Debug, Clone, Args)]
pub struct AdversaryArgs {
    #[arg(long, value_enum)]
    pub mode: AdversaryMode,
    /// Policies to attack, comma separated.
    #[arg(long, value_parser = parse_policy, value_delimiter = ',', default_value = "tsp-edf")]
    pub policy: Vec<PolicyKind>,
    #[command(flatten)]
    pub metric: MetricArgs,
    /// Type-A node for the block adversaries.
    #[arg(long, default_value_t = 0)]
    pub v0: Node,
    /// Explicit laxity; defaults to (Δ - 1) / 2 for case-a.
    #[arg(long, conflicts_with = "delta")]
    pub laxity: Option<Time>,
    /// Ratios weight / L, comma separated (default 1/9); weight is w(S) in
    /// star mode and TSP(G) in general mode.
    #[arg(long, value_delimiter = ',')]
    pub delta: Vec<String>,
    /// Requests emitted in case-a.
    #[arg(long, default_value_t = 4)]
    pub count: u64,
}

#[derive(Debug, Serialize)]
struct AttackOut {
    policy: PolicyMeta,
    delta: Option<String>,
    laxity: Time,
    report: RatioReport,
    transcript: ttw_core::adversary::AdversaryTranscript,
    schedule: Schedule,
    opt_prime: Schedule,
}

/// The attack specs requested on the command line, each with its δ label.
#[allow(clippy::too_many_arguments)]
pub fn attack_specs(
    mode: AdversaryMode,
    metric: &MetricSpace,
    star: Option<&StarMetric>,
    v0: Node,
    laxity: Option<Time>,
    deltas: &[String],
    count: u64,
    caps: &Caps,
) -> Result<Vec<(Option<String>, AttackSpec)>> {
    if mode == AdversaryMode::CaseA {
        ensure!(deltas.is_empty(), "case-a takes --laxity, not --delta");
        let l = match laxity {
            Some(l) => l,
            None => {
                let d = diameter(metric);
                ensure!(d >= 3, "case-a needs diameter at least 3 (got {d})");
                (d - 1) / 2
            }
        };
        return Ok(vec![(
            None,
            AttackSpec::CaseA {
                metric: metric.clone(),
                laxity: l,
                count,
            },
        )]);
    }
    let weight = match mode {
        AdversaryMode::Star => star.context("star mode needs --weights or --family star")?.total(),
        _ => tsp_best_effort(metric, caps.tsp).0.weight,
    };
    let laxities: Vec<(Option<String>, Time)> = match laxity {
        Some(l) => vec![(None, l)],
        None if deltas.is_empty() => vec![(Some("1/9".into()), laxity_for_delta(weight, Ratio::new(1, 9))?)],
        None => deltas
            .iter()
            .map(|s| {
                let d = parse_delta(s)?;
                Ok((Some(d.to_string()), laxity_for_delta(weight, d)?))
            })
            .collect::<Result<_>>()?,
    };
    Ok(laxities
        .into_iter()
        .map(|(label, l)| {
            let spec = match mode {
                AdversaryMode::Star => AttackSpec::Star {
                    star: star.expect("checked above").clone(),
                    v0,
                    laxity: l,
                },
                _ => AttackSpec::General {
                    metric: metric.clone(),
                    v0,
                    laxity: l,
                },
            };
            (label, spec)
        })
        .collect())
}

pub fn adversary(g: &Global, a: &AdversaryArgs) -> Result<Outcome> {
    let (metric, star) = a.metric.resolve(g.seed)?;
    let specs = attack_specs(
        a.mode,
        &metric,
        star.as_ref(),
        a.v0,
        a.laxity,
        &a.delta,
        a.count,
        &g.caps,
    )?;
    let seed = (a.metric.family == Some(Family::Random)).then_some(g.seed);
    let mut outcome = Outcome::default();
    let (mut rows, mut docs) = (Vec::new(), Vec::new());
    for (label, spec) in &specs {
        let travel = spec.travel_metric()?;
        let facts = MetricFacts::of(&travel, &g.caps);
        for &kind in &a.policy {
            let (att, meta) = attack_with(spec, kind, &g.caps)?;
            let tr = &att.transcript;
            let id = format!("{}-L{}", spec_name(a.mode), tr.laxity);
            check_attack(&att, &id, kind, &mut outcome.violations);
            rows.push(facts.row(
                id,
                tr.laxity,
                kind.as_str(),
                att.report.alg,
                att.report.opt_exact,
                Some(att.report.opt_prime),
                tr.termination.and_then(|t| t.case()),
                seed,
            ));
            docs.push(AttackOut {
                policy: meta,
                delta: label.clone(),
                laxity: tr.laxity,
                report: att.report.clone(),
                transcript: att.transcript.clone(),
                schedule: att.schedule,
                opt_prime: att.opt_prime,
            });
        }
    }
    outcome.text = match g.format {
        Format::Csv => to_csv(&rows)?,
        Format::Json => to_json(&docs)?,
    };
    Ok(outcome)
}

pub fn spec_name(mode: AdversaryMode) -> &'static str {
    match mode {
        AdversaryMode::CaseA => "case-a",
        AdversaryMode::Star => "star",
        AdversaryMode::General => "general",
    }
}

/// Records broken transcript guarantees of one attack.
pub fn check_attack(att: &ttw_core::adversary::Attack, id: &str, kind: PolicyKind, out: &mut Vec<String>) {
    let tr = &att.transcript;
    if validate_schedule_from(&tr.instance, &att.schedule, Some(tr.v0)).is_err() {
        out.push(format!("{id} {kind}: policy schedule infeasible"));
    }
    if validate_schedule_from(&tr.instance, &att.opt_prime, Some(tr.v0)).is_err() {
        out.push(format!("{id} {kind}: OPT' schedule infeasible"));
    }
    if !att.report.opt_prime_bound {
        out.push(format!("{id} {kind}: OPT' count bound missed"));
    }
    if tr.observations.as_ref().is_some_and(|o| !o.hold(tr.laxity)) {
        out.push(format!("{id} {kind}: transcript observations fail"));
    }
}
