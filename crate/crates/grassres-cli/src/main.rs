//! Command-line front end for the engine: relation listings, blowup
//! pipeline runs with atlas emission, and smoothness certification.
//!
//! Exit codes partition the outcomes for scripting: 0 success (and
//! SMOOTH for `certify`), 2 usage or configuration error, 3 an
//! iteration or resource cap was exceeded, 4 a smoothness FAIL witness
//! was found, 5 an UNCERTAIN verdict.

use clap::{Args, Parser, Subcommand};
use grassres::blowup::{run_pipeline, Atlas, BlowupError, PipelineConfig, Stage};
use grassres::certify::{
    birationality_probe, certify_atlas, Certificate, CertifyError, CertifyOptions, Verdict,
};
use grassres::gamma::{matroid_to_gamma, Gamma, Matroid};
use grassres::indexing::PluckerIndex;
use grassres::polyengine::Variable;
use grassres::relations::primary_family;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;

/// Version stamp carried by every JSON emission.
const SCHEMA_VERSION: u64 = 1;

const EXIT_USAGE: u8 = 2;
const EXIT_CAP: u8 = 3;
const EXIT_FAIL: u8 = 4;
const EXIT_UNCERTAIN: u8 = 5;

#[derive(Parser)]
#[command(name = "grassres", version, about = "Blowup pipeline and smoothness certificates for a birational model of a Grassmannian chart")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ChartArgs {
    /// Subspace dimension d of Gr(d, n).
    #[arg(long)]
    d: usize,
    /// Ambient dimension n of Gr(d, n).
    #[arg(long)]
    n: usize,
    /// Chart index m, as digits (e.g. 45, 123) or comma-separated entries.
    #[arg(long)]
    chart: String,
}

#[derive(Args)]
struct PipelineArgs {
    /// Process only the first K blocks.
    #[arg(long)]
    blocks: Option<usize>,
    /// Stop the pipeline early; `theta` stops after the leading blowups.
    #[arg(long, value_name = "STAGE")]
    stop_after: Option<String>,
    /// Keep charts whose model transform is empty at every prime.
    #[arg(long)]
    no_prune: bool,
    /// Primes used for liveness, pruning, and certification.
    #[arg(long, value_delimiter = ',', default_values_t = [5u64, 7])]
    primes: Vec<u64>,
    /// Degree bound for the quotient-binomial kernel search.
    #[arg(long, default_value_t = 3)]
    max_rho_degree: usize,
    /// Cap on pairwise rounds per (block, binomial).
    #[arg(long, default_value_t = 64)]
    round_cap: usize,
    /// Cap on live centers per round.
    #[arg(long, default_value_t = 256)]
    sets_cap: usize,
}

#[derive(Args)]
struct GammaArgs {
    /// Γ inline, as a JSON list of indices, e.g. '[[3,4]]'.
    #[arg(long, conflicts_with_all = ["gamma_file", "matroid"])]
    gamma: Option<String>,
    /// Path to a JSON file holding the same list.
    #[arg(long, conflicts_with = "matroid")]
    gamma_file: Option<PathBuf>,
    /// Path to a matroid bases file {"n": .., "d": .., "bases": [[..]]};
    /// Γ is its set of non-bases.
    #[arg(long)]
    matroid: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// RNG seed for the sampling stages; recorded in the report.
    #[arg(long, default_value_t = 0x6ea9)]
    seed: u64,
    /// Maximum worker threads (env GRASSRES_JOBS). Reports are
    /// byte-deterministic regardless.
    #[arg(long, env = "GRASSRES_JOBS", default_value_t = 1)]
    jobs: usize,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// List the primary Plücker relations of the chart.
    Relations {
        #[command(flatten)]
        chart: ChartArgs,
        /// Emit JSON instead of text.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Run the blowup pipeline and emit the chart atlas.
    Pipeline {
        #[command(flatten)]
        chart: ChartArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Run the pipeline, transport Γ, and certify smoothness.
    Certify {
        #[command(flatten)]
        chart: ChartArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        gamma: GammaArgs,
        /// Trials for the birationality probe; 0 disables it.
        #[arg(long, default_value_t = 50)]
        probe_trials: usize,
        /// Enumeration refuses charts with more free coordinates.
        #[arg(long, default_value_t = 12)]
        free_var_bound: usize,
        /// Cap on enumerated points per (chart, prime).
        #[arg(long, default_value_t = 200_000)]
        point_cap: usize,
        /// Sampled subscheme points per prime for the Γ-transport.
        #[arg(long, default_value_t = 40)]
        transport_samples: usize,
        #[command(flatten)]
        report: ReportArgs,
    },
}

/// A failure with the exit code it maps to.
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> CliError {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    fn cap(message: impl Into<String>) -> CliError {
        CliError { code: EXIT_CAP, message: message.into() }
    }
}

impl From<BlowupError> for CliError {
    fn from(e: BlowupError) -> CliError {
        match e {
            BlowupError::NonTermination { .. } => CliError::cap(e.to_string()),
            _ => CliError::usage(e.to_string()),
        }
    }
}

impl From<CertifyError> for CliError {
    fn from(e: CertifyError) -> CliError {
        match e {
            CertifyError::ResourceLimit { .. } => CliError::cap(e.to_string()),
            CertifyError::Blowup(b) => b.into(),
            _ => CliError::usage(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Relations { chart, json, report } => cmd_relations(&chart, json, &report),
        Cmd::Pipeline { chart, pipeline, report } => cmd_pipeline(&chart, &pipeline, &report),
        Cmd::Certify {
            chart,
            pipeline,
            gamma,
            probe_trials,
            free_var_bound,
            point_cap,
            transport_samples,
            report,
        } => {
            let opts = CertifyOptions {
                free_var_bound,
                point_cap,
                transport_samples,
                seed: report.seed,
            };
            cmd_certify(&chart, &pipeline, &gamma, probe_trials, &opts, &report)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

/// Parses a chart or Γ-member index: digits for single-digit entries
/// (`45`, `123`) or comma-separated entries (`4,5`), validated against
/// (d, n).
fn parse_index(s: &str, d: usize, n: usize) -> Result<PluckerIndex, CliError> {
    let entries: Vec<u8> = if s.contains(',') {
        s.split(',')
            .map(|t| t.trim().parse::<u8>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::usage(format!("cannot parse index entries in {s:?}")))?
    } else {
        s.chars()
            .map(|c| c.to_digit(10).map(|x| x as u8))
            .collect::<Option<_>>()
            .ok_or_else(|| CliError::usage(format!("cannot parse index {s:?}")))?
    };
    if entries.len() != d
        || !entries.windows(2).all(|w| w[0] < w[1])
        || entries.iter().any(|&e| e < 1 || e as usize > n)
    {
        return Err(CliError::usage(format!(
            "{s:?} is not a strictly increasing {d}-subset of 1..={n}"
        )));
    }
    Ok(PluckerIndex::new(&entries))
}

fn validate(chart: &ChartArgs, primes: &[u64]) -> Result<PluckerIndex, CliError> {
    if chart.d < 1 || chart.d >= chart.n {
        return Err(CliError::usage(format!(
            "require 1 <= d < n, got d={} n={}",
            chart.d, chart.n
        )));
    }
    let mut seen = std::collections::BTreeSet::new();
    for &p in primes {
        if p < 3 || p % 2 == 0 || (3..p).step_by(2).any(|q| p % q == 0) || !seen.insert(p) {
            return Err(CliError::usage(format!("primes must be distinct odd primes, got {p}")));
        }
    }
    parse_index(&chart.chart, chart.d, chart.n)
}

/// Resolves the Γ source: inline JSON, a JSON file, or a matroid bases
/// file whose non-bases form Γ. No source means Γ = ∅.
fn resolve_gamma(args: &GammaArgs, d: usize, n: usize, m: &PluckerIndex) -> Result<Gamma, CliError> {
    let inline_members = |text: &str| -> Result<Gamma, CliError> {
        let raw: Vec<Vec<u8>> = serde_json::from_str(text)
            .map_err(|e| CliError::usage(format!("cannot parse Γ: {e}")))?;
        let members: Vec<PluckerIndex> = raw
            .iter()
            .map(|v| parse_index(&v.iter().map(u8::to_string).collect::<Vec<_>>().join(","), d, n))
            .collect::<Result<_, _>>()?;
        Gamma::new(d, n, m, members).map_err(|e| CliError::usage(e.to_string()))
    };
    if let Some(text) = &args.gamma {
        return inline_members(text);
    }
    if let Some(path) = &args.gamma_file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        return inline_members(&text);
    }
    if let Some(path) = &args.matroid {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        let raw: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("cannot parse matroid file: {e}")))?;
        let field = |k: &str| -> Result<usize, CliError> {
            raw.get(k)
                .and_then(Value::as_u64)
                .map(|x| x as usize)
                .ok_or_else(|| CliError::usage(format!("matroid file lacks integer field {k:?}")))
        };
        let (mn, md) = (field("n")?, field("d")?);
        if (mn, md) != (n, d) {
            return Err(CliError::usage(format!(
                "matroid is on Gr({md},{mn}), expected Gr({d},{n})"
            )));
        }
        let bases_raw: Vec<Vec<u8>> = serde_json::from_value(
            raw.get("bases").cloned().ok_or_else(|| CliError::usage("matroid file lacks \"bases\""))?,
        )
        .map_err(|e| CliError::usage(format!("cannot parse matroid bases: {e}")))?;
        let bases: Vec<PluckerIndex> = bases_raw
            .iter()
            .map(|v| parse_index(&v.iter().map(u8::to_string).collect::<Vec<_>>().join(","), d, n))
            .collect::<Result<_, _>>()?;
        let mat = Matroid::new(n, d, bases).map_err(|e| CliError::usage(e.to_string()))?;
        return matroid_to_gamma(&mat, m).map_err(|e| CliError::usage(e.to_string()));
    }
    Ok(Gamma::empty())
}

fn pipeline_config(args: &PipelineArgs) -> Result<PipelineConfig, CliError> {
    match args.stop_after.as_deref() {
        None | Some("theta") => {}
        Some(other) => {
            return Err(CliError::usage(format!(
                "unknown stage {other:?} for --stop-after (expected \"theta\")"
            )))
        }
    }
    Ok(PipelineConfig {
        primes: args.primes.clone(),
        max_rho_degree: args.max_rho_degree,
        round_cap: args.round_cap,
        sets_cap: args.sets_cap,
        prune: !args.no_prune,
        blocks: args.blocks,
        stop_after_lead: args.stop_after.as_deref() == Some("theta"),
        skip_linear_stage: false,
        basepoint: None,
    })
}

fn emit(text: &str, report: &ReportArgs) -> Result<(), CliError> {
    match &report.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            // A closed pipe on stdout is not an error for a reporting tool.
            use std::io::Write;
            let _ = writeln!(std::io::stdout(), "{text}");
            Ok(())
        }
    }
}

fn index_json(u: &PluckerIndex) -> Value {
    Value::Array(u.0.iter().map(|&e| Value::from(e)).collect())
}

fn cmd_relations(chart: &ChartArgs, json_out: bool, report: &ReportArgs) -> Result<u8, CliError> {
    let m = validate(chart, &[])?;
    let family = primary_family(chart.d, chart.n, &m)
        .map_err(|e| CliError::usage(e.to_string()))?;
    if json_out {
        let relations: Vec<Value> = family
            .iter()
            .map(|f| {
                let (_, (a, b)) = &f.terms[f.leading_position];
                json!({
                    "u": index_json(&f.u),
                    "rank": f.rank,
                    "terms": f.t_f,
                    "leading": Variable::rho(a.clone(), b.clone()).to_string(),
                    "relation": f.polynomial().to_string(),
                    "on_chart": f.dehomogenized().to_string(),
                })
            })
            .collect();
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "d": chart.d,
            "n": chart.n,
            "chart": index_json(&m),
            "relations": relations,
        });
        emit(&serde_json::to_string_pretty(&doc).expect("report serializes"), report)?;
    } else {
        let mut out = String::new();
        for (k, f) in family.iter().enumerate() {
            let (_, (a, b)) = &f.terms[f.leading_position];
            out.push_str(&format!(
                "F_{}  u={}  rank={}  terms={}  leading={}\n  {}\n  on chart: {}\n",
                k + 1,
                f.u,
                f.rank,
                f.t_f,
                Variable::rho(a.clone(), b.clone()),
                f.polynomial(),
                f.dehomogenized(),
            ));
        }
        emit(out.trim_end(), report)?;
    }
    Ok(0)
}

/// The atlas as JSON: stats, pruned/dropped charts, and per final chart
/// its coordinates with roles, exceptional bookkeeping, relations, and
/// main-binomial termination flags.
fn atlas_json(atlas: &Atlas, seed: u64) -> Result<Value, CliError> {
    let stats: Vec<Value> = atlas
        .stats
        .iter()
        .map(|s| {
            json!({
                "block": s.block,
                "binomial": s.tau,
                "rounds": s.rounds,
                "live_sets_per_round": s.live_sets_per_round,
            })
        })
        .collect();
    let role = |v: &Variable| match v {
        Variable::Pi(..) => "coordinate",
        Variable::Rho(..) => "pair",
        Variable::Eps(..) => "exceptional",
        Variable::Delta(..) => "exceptional-pair",
        Variable::YInv(..) => "unit",
    };
    let stage_name = |s: &Stage| match s {
        Stage::Root => "root".to_string(),
        Stage::Lead(k) => format!("lead {k}"),
        Stage::Pairwise { block, tau, round, step } => {
            format!("pairwise {block}.{tau} round {round} step {step}")
        }
        Stage::Linear(k) => format!("linear {k}"),
    };
    let mut charts = Vec::new();
    for id in &atlas.frontier {
        let c = atlas.chart(id);
        let mut mains = Vec::new();
        for b in &c.mains {
            let mut terminated = true;
            for &p in &atlas.config.primes {
                terminated &= atlas
                    .terminated(c, b, p)
                    .map_err(|e| CliError::usage(e.to_string()))?;
            }
            mains.push(json!({
                "block": b.block,
                "relation": b.polynomial().to_string(),
                "terminated": terminated,
            }));
        }
        let texts = |bs: &[grassres::model::Binomial]| -> Vec<String> {
            bs.iter().map(|b| b.polynomial().to_string()).collect()
        };
        charts.push(json!({
            "id": c.id,
            "parent": c.parent,
            "stage": stage_name(&c.stage),
            "variables": c
                .vars
                .iter()
                .map(|v| json!({"name": v.to_string(), "role": role(v)}))
                .collect::<Vec<_>>(),
            "exceptional_indices": c.e_set.iter().map(index_json).collect::<Vec<_>>(),
            "exceptional_pairs": c
                .d_set
                .iter()
                .map(|(a, b)| json!([index_json(a), index_json(b)]))
                .collect::<Vec<_>>(),
            "linear_blocks": c.l_set.iter().collect::<Vec<_>>(),
            "mains": mains,
            "residuals": texts(&c.residuals),
            "quotients": texts(&c.quotients),
            "linears": c.linears.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
            "formal": c
                .l_defs
                .iter()
                .map(|(v, p)| (v.to_string(), Value::from(p.to_string())))
                .collect::<serde_json::Map<_, _>>(),
            "uncertain": c.uncertain,
        }));
    }
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "seed": seed,
        "d": atlas.d,
        "n": atlas.n,
        "chart": index_json(&atlas.m),
        "primes": atlas.config.primes,
        "processed_blocks": atlas.processed_blocks,
        "pruned_charts": atlas.pruned.len(),
        "pruned": atlas.pruned,
        "dropped": atlas.dropped,
        "stats": stats,
        "charts": charts,
    }))
}

fn cmd_pipeline(
    chart: &ChartArgs,
    pipeline: &PipelineArgs,
    report: &ReportArgs,
) -> Result<u8, CliError> {
    let m = validate(chart, &pipeline.primes)?;
    let config = pipeline_config(pipeline)?;
    let atlas = run_pipeline(chart.d, chart.n, &m, config)?;
    let doc = atlas_json(&atlas, report.seed)?;
    emit(&serde_json::to_string_pretty(&doc).expect("report serializes"), report)?;
    Ok(0)
}

fn certificate_json(cert: &Certificate, seed: u64) -> Value {
    let charts: Vec<Value> = cert
        .charts
        .iter()
        .map(|r| {
            json!({
                "id": r.id,
                "points_checked": r.points_checked,
                "rank_expected": r.rank_expected,
                "rank_min": r.rank_min,
                "pass": r.pass,
            })
        })
        .collect();
    let verdict = match &cert.verdict {
        Verdict::Smooth => json!("SMOOTH"),
        Verdict::Fail(_) => json!("FAIL"),
        Verdict::Uncertain { .. } => json!("UNCERTAIN"),
    };
    let mut doc = json!({
        "schema_version": SCHEMA_VERSION,
        "seed": seed,
        "gamma": cert.gamma.iter().map(index_json).collect::<Vec<_>>(),
        "primes": cert.primes,
        "charts": charts,
        "quotients_redundant": cert.quotients_redundant,
        "verdict": verdict,
    });
    match &cert.verdict {
        Verdict::Fail(w) => {
            doc["witness"] = json!({
                "chart": w.chart,
                "prime": w.prime,
                "rank": w.rank,
                "point": w
                    .point
                    .iter()
                    .map(|(v, x)| (v.to_string(), Value::from(*x)))
                    .collect::<serde_json::Map<_, _>>(),
            });
        }
        Verdict::Uncertain { detail } => {
            doc["detail"] = json!(detail);
        }
        Verdict::Smooth => {}
    }
    if let Some(ev) = &cert.birational {
        doc["birational"] = json!({
            "trials": ev.trials,
            "fiber_histogram": ev
                .fiber_histogram
                .iter()
                .map(|(k, v)| (k.to_string(), Value::from(*v)))
                .collect::<serde_json::Map<_, _>>(),
        });
    }
    doc
}

fn cmd_certify(
    chart: &ChartArgs,
    pipeline: &PipelineArgs,
    gamma_args: &GammaArgs,
    probe_trials: usize,
    opts: &CertifyOptions,
    report: &ReportArgs,
) -> Result<u8, CliError> {
    let m = validate(chart, &pipeline.primes)?;
    let gamma = resolve_gamma(gamma_args, chart.d, chart.n, &m)?;
    let config = pipeline_config(pipeline)?;
    let atlas = run_pipeline(chart.d, chart.n, &m, config)?;
    let mut cert = certify_atlas(&atlas, &gamma, opts)?;
    if probe_trials > 0 {
        // The probe samples dense points, so it runs at the largest
        // configured prime.
        let prime = *atlas.config.primes.iter().max().expect("primes validated non-empty");
        cert.birational = Some(birationality_probe(&atlas, &gamma, prime, probe_trials, opts.seed)?);
    }
    let doc = certificate_json(&cert, report.seed);
    emit(&serde_json::to_string_pretty(&doc).expect("report serializes"), report)?;
    Ok(match cert.verdict {
        Verdict::Smooth => 0,
        Verdict::Fail(_) => EXIT_FAIL,
        Verdict::Uncertain { .. } => EXIT_UNCERTAIN,
    })
}
