use clap::{Args, Parser, Subcommand};
use ifs_cstar::basis::OrbitBasis;
use ifs_cstar::conditions::{refine_seed_set, ConditionError};
use ifs_cstar::config::{self, ConfigError, Format, RunConfig, SeedSpec};
use ifs_cstar::report::{self, ReportInputs};
use ifs_cstar::suites::{self, SuiteReport};
use ifs_cstar::verdict::{evaluate_verdict, gather_ledger, SeedSummary, Verdict};
use std::path::Path;
use std::sync::Arc;

const GALLERIES: [(&str, &str); 2] = [
    ("cantor", include_str!("../../../galleries/cantor.json")),
    ("halfmaps", include_str!("../../../galleries/halfmaps.json")),
];

/// `verify` runs the thorough fuzz budget; `verdict` runs a lighter pass,
/// since its evidence is advisory and the full pipeline has to stay fast.
const VERIFY_IDENTITY_TRIALS: usize = 50;
const VERDICT_IDENTITY_TRIALS: usize = 10;

#[derive(Parser)]
#[command(
    name = "ifs-cstar",
    version,
    about = "Exact finite-truncation analysis of affine iterated function systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the structural condition checks only
    Check(RunArgs),
    /// Run the matrix identity and grading suites
    Verify(RunArgs),
    /// Full pipeline: conditions, suites, and the masa/Cartan verdict
    Verdict(RunArgs),
    /// Run the full pipeline on a bundled example system
    Gallery(GalleryArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to a JSON config file, or gallery:<name>
    #[arg(long)]
    config: String,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct GalleryArgs {
    /// Bundled system name (cantor | halfmaps); omit to list them
    name: Option<String>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct Overrides {
    /// Truncation depth (≥ 1)
    #[arg(long)]
    depth: Option<u32>,
    /// "auto", or points with comma-separated coordinates,
    /// semicolon-separated points
    #[arg(long)]
    seeds: Option<String>,
    /// Exit 4 when the verdict is inconclusive
    #[arg(long)]
    strict: bool,
    /// Report format: json or text
    #[arg(long)]
    format: Option<String>,
    /// Seed for the reproducible fuzz suites and auto-seed search
    #[arg(long = "rng-seed")]
    rng_seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Check,
    Verify,
    Verdict,
}

struct Failure {
    message: String,
    code: i32,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure {
            message: e.to_string(),
            code: 2,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Check(a) => run(Mode::Check, &a),
        Command::Verify(a) => run(Mode::Verify, &a),
        Command::Verdict(a) => run(Mode::Verdict, &a),
        Command::Gallery(g) => gallery(&g),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(f) => {
            eprintln!("ifs-cstar: {}", f.message);
            std::process::exit(f.code);
        }
    }
}

fn load(config_arg: &str) -> Result<RunConfig, ConfigError> {
    if let Some(name) = config_arg.strip_prefix("gallery:") {
        let (_, src) = GALLERIES
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| {
                ConfigError::Validation(format!(
                    "unknown gallery `{name}` (available: cantor, halfmaps)"
                ))
            })?;
        config::parse_config_str(src)
    } else {
        config::load_config(Path::new(config_arg))
    }
}

fn apply_overrides(cfg: &mut RunConfig, o: &Overrides) -> Result<(), ConfigError> {
    if let Some(d) = o.depth {
        if d == 0 {
            return Err(ConfigError::Validation("depth must be at least 1".into()));
        }
        cfg.depth = d;
    }
    if let Some(s) = &o.seeds {
        cfg.seeds = if s.trim() == "auto" {
            SeedSpec::Auto
        } else {
            SeedSpec::Explicit(config::parse_seed_list(s, cfg.ifs.dim())?)
        };
    }
    if let Some(f) = &o.format {
        cfg.format = Format::parse(f)?;
    }
    if let Some(r) = o.rng_seed {
        cfg.rng_seed = r;
    }
    Ok(())
}

fn run(mode: Mode, args: &RunArgs) -> Result<i32, Failure> {
    let mut cfg = load(&args.config)?;
    apply_overrides(&mut cfg, &args.overrides)?;
    pipeline(mode, &cfg, args.overrides.strict)
}

fn gallery(args: &GalleryArgs) -> Result<i32, Failure> {
    let Some(name) = &args.name else {
        for (name, _) in GALLERIES {
            println!("{name}");
        }
        return Ok(0);
    };
    let mut cfg = load(&format!("gallery:{name}"))?;
    apply_overrides(&mut cfg, &args.overrides)?;
    pipeline(Mode::Verdict, &cfg, args.overrides.strict)
}

fn pipeline(mode: Mode, cfg: &RunConfig, strict: bool) -> Result<i32, Failure> {
    let (resolved, seed_source) = config::resolve_seeds(cfg)?;
    // An empty kept set is fatal only for the matrix suites; the condition
    // checks and the verdict run on the system itself, so e.g. a
    // duplicate-maps config can still reach its inconclusive verdict.
    let (kept, removed_count) = match refine_seed_set(&cfg.ifs, &resolved, cfg.depth) {
        Ok(out) => (out.kept, out.removed.len()),
        Err(ConditionError::NoAdmissibleSeeds { count }) => (Vec::new(), count),
        Err(e) => {
            return Err(Failure {
                message: format!("seed refinement failed: {e}"),
                code: 2,
            })
        }
    };
    let summary = SeedSummary {
        kept: kept.len(),
        removed: removed_count,
        depth: cfg.depth,
    };

    let selected: Vec<&str> = match mode {
        Mode::Check => vec!["conditions"],
        Mode::Verify => vec!["identities", "graded"],
        Mode::Verdict => cfg
            .suites
            .iter()
            .map(|s| s.as_str())
            .filter(|s| *s != "verdict")
            .collect(),
    };

    let needs_basis = selected.iter().any(|s| *s == "identities" || *s == "graded");
    let basis = if needs_basis {
        if kept.is_empty() {
            return Err(Failure {
                message: "no seeds survive refinement; supply different seeds".into(),
                code: 2,
            });
        }
        Some(Arc::new(
            OrbitBasis::build(cfg.ifs.clone(), kept.clone(), cfg.depth).map_err(|e| {
                Failure {
                    message: format!("cannot build the orbit basis: {e}"),
                    code: 2,
                }
            })?,
        ))
    } else {
        None
    };

    let mut ledger = gather_ledger(&cfg.ifs, cfg.depth, cfg.resolution).map_err(|e| Failure {
        message: format!("condition checks failed: {e}"),
        code: 2,
    })?;
    ledger.seed_refinement = Some(summary);

    let mut reports: Vec<SuiteReport> = Vec::new();
    for s in &selected {
        match *s {
            "conditions" => reports.push(suites::run_conditions_suite(
                &cfg.ifs,
                &resolved,
                cfg.depth,
                cfg.resolution,
            )),
            "identities" => reports.push(suites::run_identities_suite(
                basis.as_ref().expect("basis built for identities"),
                cfg.rng_seed,
                match mode {
                    Mode::Verdict => VERDICT_IDENTITY_TRIALS,
                    _ => VERIFY_IDENTITY_TRIALS,
                },
            )),
            "graded" => reports.push(suites::run_graded_suite(
                basis.as_ref().expect("basis built for graded"),
                cfg.rng_seed,
            )),
            _ => {}
        }
    }

    // The verdict suite always runs in verdict mode so that hard internal
    // errors (evidence contradicting a theorem-derived conclusion)
    // surface as failed invariants rather than vanishing.
    let verdict: Option<Verdict> = if mode == Mode::Verdict {
        let evidence = if reports
            .iter()
            .any(|r| r.suite == "identities" || r.suite == "graded")
        {
            Some(suites::evidence_from_reports(&reports))
        } else {
            None
        };
        let outcome = evaluate_verdict(&cfg.ifs, &ledger, evidence);
        if let Err(e) = &outcome {
            eprintln!("ifs-cstar: verdict unavailable: {e}");
        }
        reports.push(suites::run_verdict_suite(&outcome));
        outcome.ok()
    } else {
        None
    };

    let rep = report::report_json(&ReportInputs {
        config: cfg,
        seeds: &kept,
        seed_source,
        ledger: Some(&ledger),
        verdict: verdict.as_ref(),
        suites: &reports,
    });
    let rendered = match cfg.format {
        Format::Json => report::to_json_string(&rep),
        Format::Text => report::render_text(&rep),
    };
    match &cfg.output_path {
        Some(path) => std::fs::write(path, &rendered).map_err(|e| Failure {
            message: format!("cannot write `{}`: {e}", path.display()),
            code: 2,
        })?,
        None => print!("{rendered}"),
    }

    Ok(report::exit_code(&reports, verdict.as_ref(), strict))
}
