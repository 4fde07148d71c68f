//! Command implementations. Each returns its stdout text so the binary stays a
//! thin argument parser and the commands can be tested in process.

use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use conseq_core::catalog::{load_catalog, DomainId};
use conseq_core::consequence::{explain, ExplanationVariant};
use conseq_core::preferences::{validate_profile, PreferenceProfile};
use conseq_core::recommender::{recommend, RecommendError, WeightVector};
use conseq_core::stats::{run_analysis, AnalysisPlan, AnalysisReport};
use conseq_core::study::{read_log, replay, write_log, EventRecord, Outcome, StudyContext};

use crate::report::{render, Format};
use crate::simulate::{simulate, SimulationConfig};
use crate::CliError;

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })
}

pub struct RecommendArgs {
    pub domain: DomainId,
    pub prefs: PathBuf,
    pub weights: Option<PathBuf>,
    pub variant: ExplanationVariant,
}

pub fn cmd_recommend(args: &RecommendArgs, ctx: &StudyContext) -> Result<String, CliError> {
    let profile = PreferenceProfile::from_json(&read(&args.prefs)?)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", args.prefs.display())))?;
    let weights = match &args.weights {
        Some(path) => WeightVector::from_json(&read(path)?)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?,
        None => WeightVector::uniform(),
    };
    recommend_text(args.domain, &profile, &weights, args.variant, ctx)
}

/// Top item, utility breakdown and explanation for an in-memory profile.
pub fn recommend_text(
    domain: DomainId,
    profile: &PreferenceProfile,
    weights: &WeightVector,
    variant: ExplanationVariant,
    ctx: &StudyContext,
) -> Result<String, CliError> {
    if profile.domain != domain {
        return Err(CliError::Invalid(format!("profile is for `{}`, not `{domain}`", profile.domain)));
    }
    let catalog = ctx.catalog(domain);
    if let Err(violations) = validate_profile(profile, &catalog.spec) {
        let lines: Vec<String> = violations.iter().map(|v| format!("  {v}")).collect();
        return Err(CliError::Invalid(format!("invalid profile:\n{}", lines.join("\n"))));
    }
    let ranked = recommend(catalog, profile, weights, &ctx.scoring).map_err(|e| match e {
        RecommendError::NoCandidate(misses) => {
            let mut msg = String::from("no item satisfies every hard constraint; nearest misses:");
            for m in misses {
                let _ = write!(msg, "\n  {} violates {}", m.item_id, m.violated.join(", "));
            }
            CliError::NoCandidate(msg)
        }
        other => CliError::Invalid(other.to_string()),
    })?;
    let top = &ranked[0];
    let item = catalog.item(&top.item_id).expect("ranked items come from the catalog");
    let explanation = explain(top, item, profile, &ctx.rules[&domain], &catalog.spec, variant, &Default::default())?;

    let mut out = String::new();
    let _ = writeln!(out, "top item: {} ({})", item.id, item.title);
    let _ = writeln!(out, "utility: {:.4}", top.utility);
    for (pref, c) in &top.contributions {
        let _ = writeln!(
            out,
            "  {pref:<20} weight {:<5} compatibility {:.3}  share {:.3}",
            weights.weight(pref),
            c.compatibility,
            c.share
        );
    }
    let _ = writeln!(out, "explanation ({}):", variant.short_name());
    let _ = writeln!(out, "{}", explanation.text);
    Ok(out)
}

/// Writes the simulated log to `out` and returns a one-line summary.
pub fn cmd_simulate(cfg: &SimulationConfig, out: &Path, ctx: &StudyContext) -> Result<String, CliError> {
    let log = simulate(cfg, ctx)?;
    let file = fs::File::create(out).map_err(|source| CliError::Write { path: out.to_path_buf(), source })?;
    write_log(std::io::BufWriter::new(file), &log).map_err(|source| CliError::Write { path: out.to_path_buf(), source })?;
    let sessions = log.iter().filter(|r| matches!(r.payload, conseq_core::study::EventPayload::Created { .. })).count();
    Ok(format!("wrote {} events for {sessions} sessions to {}\n", log.len(), out.display()))
}

pub struct AnalyzeArgs {
    pub input: PathBuf,
    pub outcome: Outcome,
    pub group_by: Vec<String>,
    pub alpha: f64,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeOutput {
    pub report: AnalysisReport,
    pub text: String,
    /// Conditions worth a note on stderr that do not stop the analysis.
    pub warnings: Vec<String>,
}

pub fn cmd_analyze(args: &AnalyzeArgs, ctx: &StudyContext) -> Result<AnalyzeOutput, CliError> {
    let file = fs::File::open(&args.input).map_err(|source| CliError::Read { path: args.input.clone(), source })?;
    let records = read_log(BufReader::new(file))?;
    let keys: Vec<&str> = args.group_by.iter().map(String::as_str).collect();
    let mut plan = AnalysisPlan::new(args.outcome, &keys);
    plan.alpha = args.alpha;
    analyze_records(&records, &plan, args.format, ctx)
}

pub fn analyze_records(
    records: &[EventRecord],
    plan: &AnalysisPlan,
    format: Format,
    ctx: &StudyContext,
) -> Result<AnalyzeOutput, CliError> {
    let sessions: Vec<_> = replay(records, ctx)?.into_values().collect();
    let report = run_analysis(&sessions, plan)?;
    let mut warnings = Vec::new();
    if report.excluded_sessions > 0 {
        warnings.push(format!("{} incomplete session(s) excluded", report.excluded_sessions));
    }
    Ok(AnalyzeOutput { text: render(&report, format), report, warnings })
}

pub fn cmd_validate_catalog(domain: DomainId, file: &Path, ctx: &StudyContext) -> Result<String, CliError> {
    let source = fs::File::open(file).map_err(|source| CliError::Read { path: file.to_path_buf(), source })?;
    let catalog = load_catalog(BufReader::new(source), &ctx.catalog(domain).spec)?;
    Ok(format!("{}: {} valid {} item(s)\n", file.display(), catalog.items.len(), domain))
}
