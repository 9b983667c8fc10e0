use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use plonkc::builder::Program;
use plonkc::circuit::{format_stats, stats, GateStats};
use plonkc::field::{FieldElement, FieldSpec};
use plonkc::gadgets::{self, sha_expansion};
use plonkc::json::{circuit_to_json, constraint_system_to_json, custom_gate_to_json, trace_to_json};
use plonkc::optimizer::{flatten, optimize_program, OptError, Pass, PassReport, Profile};
use plonkc::tabulation::{export_csv, export_json, tabulate};
use plonkc::verify::{
    check_completeness, check_pipeline_preservation, check_preservation, check_soundness_bruteforce, soundness_smoke,
    CheckReport, VerifyError,
};

#[derive(Parser)]
#[command(name = "plonkc", version, about = "Build, optimize and check PLONKish circuits")]
struct Cli {
    /// Field modulus: a prime, or "goldilocks".
    #[arg(long, global = true, env = "PLONKC_FIELD", default_value = "goldilocks")]
    field: String,
    /// Write data here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct OptArgs {
    #[arg(long, default_value = "boojum")]
    profile: String,
    /// Comma-separated pass names; defaults to the full pipeline.
    #[arg(long)]
    passes: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Property {
    Completeness,
    Soundness,
    Preservation,
}

#[derive(Subcommand)]
enum Cmd {
    /// List the gadget corpus.
    List,
    /// Build a gadget and print its circuit.
    Build {
        gadget: String,
        #[arg(long, default_value_t = 16)]
        steps: usize,
    },
    /// Build, optimize, compile and tabulate.
    Pipeline {
        gadget: String,
        #[command(flatten)]
        opt: OptArgs,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long, default_value_t = 16)]
        steps: usize,
    },
    /// Optimize a gadget and print the result with pass reports.
    Optimize {
        gadget: String,
        #[command(flatten)]
        opt: OptArgs,
        #[arg(long, default_value_t = 16)]
        steps: usize,
    },
    /// Generate the witness for the given inputs.
    Trace {
        gadget: String,
        /// Comma-separated input values.
        #[arg(long, allow_hyphen_values = true)]
        input: String,
        /// Trace the optimized circuit under this profile.
        #[arg(long)]
        profile: Option<String>,
        #[arg(long, default_value_t = 16)]
        steps: usize,
    },
    /// Gate counts, before and after optimization.
    Stats {
        gadget: String,
        #[command(flatten)]
        opt: OptArgs,
        #[arg(long, default_value_t = 16)]
        steps: usize,
    },
    /// Compile a gadget and print its table or constraint system.
    Tabulate {
        gadget: String,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Print the constraint system instead of the table.
        #[arg(long)]
        constraints: bool,
        #[arg(long, default_value_t = 16)]
        steps: usize,
    },
    /// Inline a lookup-free gadget into one custom gate.
    Flatten {
        gadget: String,
        #[arg(long)]
        max_degree: usize,
    },
    /// Run a property check and print a JSON report.
    Verify {
        #[arg(long, value_enum)]
        property: Property,
        #[arg(long)]
        gadget: String,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Pass to check for preservation; all passes and the full pipeline
        /// when omitted.
        #[arg(long)]
        pass: Option<String>,
        #[arg(long, default_value = "boojum")]
        profile: String,
    },
}

enum Failure {
    Io(anyhow::Error),
    Usage(String),
    Trace(String),
    Property(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Trace(_) => 3,
            Failure::Property(_) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Io(e) => format!("{e:#}"),
            Failure::Usage(m) | Failure::Trace(m) | Failure::Property(m) => m.clone(),
        }
    }
}

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

fn parse_field(s: &str) -> Result<FieldSpec, Failure> {
    if s.eq_ignore_ascii_case("goldilocks") {
        return Ok(FieldSpec::goldilocks());
    }
    let p: u64 = s.parse().map_err(|_| usage(format!("bad field {s:?}")))?;
    FieldSpec::new(p).map_err(usage)
}

fn load(name: &str, field: FieldSpec, steps: usize) -> Result<Program, Failure> {
    if name == "sha_expansion" {
        if steps == 0 || steps > 48 {
            return Err(usage("--steps must be between 1 and 48"));
        }
        return Ok(sha_expansion(field, steps));
    }
    if name == "double_bool_check" {
        return Ok(gadgets::double_bool_check(field));
    }
    gadgets::find(name)
        .map(|g| (g.build)(field))
        .ok_or_else(|| usage(format!("unknown gadget {name:?}; try `plonkc list`")))
}

fn parse_opt(o: &OptArgs) -> Result<(Profile, Option<Vec<Pass>>), Failure> {
    let profile = Profile::parse(&o.profile).map_err(usage)?;
    let passes = o.passes.as_deref().map(Pass::parse_list).transpose().map_err(usage)?;
    Ok((profile, passes))
}

fn run_opt(p: &Program, profile: Profile, passes: Option<&[Pass]>) -> Result<(Program, Vec<PassReport>), Failure> {
    optimize_program(p, profile, passes).map_err(|e| match e {
        OptError::Discipline(_) | OptError::Invalid(_) => Failure::Property(e.to_string()),
        e => usage(e),
    })
}

fn parse_inputs(s: &str, field: FieldSpec) -> Result<Vec<FieldElement>, Failure> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| {
            let x = x.trim();
            match x.strip_prefix('-') {
                Some(abs) => {
                    let v: i64 = abs.parse().map_err(|_| usage(format!("bad input {x:?}")))?;
                    Ok(field.from_i64(-v))
                }
                None => field.parse(x).map_err(usage),
            }
        })
        .collect()
}

fn emit(out: &Option<PathBuf>, data: &str) -> Result<(), Failure> {
    let mut data = data.to_string();
    if !data.ends_with('\n') {
        data.push('\n');
    }
    match out {
        Some(path) => fs::write(path, data)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::Io),
        None => std::io::stdout()
            .write_all(data.as_bytes())
            .context("writing standard output")
            .map_err(Failure::Io),
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn stats_json(s: &GateStats) -> Value {
    Value::Object(s.iter().map(|(k, v)| (k.to_string(), json!(v))).collect())
}

fn total(s: &GateStats) -> usize {
    s.values().sum()
}

fn print_comparison(before: &GateStats, after: &GateStats) {
    eprintln!("{:<12} {:>8} {:>8}", "gate", "before", "after");
    let mut tags: Vec<_> = before.keys().chain(after.keys()).copied().collect();
    tags.sort();
    tags.dedup();
    for t in tags {
        let get = |s: &GateStats| s.get(&t).copied().unwrap_or(0);
        eprintln!("{:<12} {:>8} {:>8}", t.to_string(), get(before), get(after));
    }
    eprintln!("{:<12} {:>8} {:>8}", "total", total(before), total(after));
}

fn report_result(reports: &[CheckReport], out: &Option<PathBuf>) -> Result<(), Failure> {
    emit(out, &pretty(&serde_json::to_value(reports).expect("serializable")))?;
    for r in reports {
        eprintln!(
            "{} {}: {} cases, {} skipped, {} failures",
            r.property,
            r.subject,
            r.cases,
            r.skipped,
            r.failures.len()
        );
    }
    let failed: usize = reports.iter().map(|r| r.failures.len()).sum();
    if failed > 0 {
        return Err(Failure::Property(format!("{failed} property failures")));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let field = parse_field(&cli.field)?;
    let out = &cli.out;
    match cli.cmd {
        Cmd::List => {
            let mut lines: Vec<String> = gadgets::registry()
                .iter()
                .map(|g| format!("{:<20} {}", g.name, g.summary))
                .collect();
            lines.push(format!(
                "{:<20} {}",
                "sha_expansion", "message-expansion loop (--steps)"
            ));
            lines.push(format!(
                "{:<20} {}",
                "double_bool_check", "input asserted boolean twice"
            ));
            emit(out, &lines.join("\n"))
        }
        Cmd::Build { gadget, steps } => {
            let p = load(&gadget, field, steps)?;
            let c = p.circuit();
            eprintln!("{gadget}: {}", format_stats(&stats(&c)));
            let doc = json!({
                "gadget": gadget,
                "inputs": p.inputs.iter().map(|w| w.0).collect::<Vec<_>>(),
                "outputs": p.outputs.iter().map(|w| w.0).collect::<Vec<_>>(),
                "stats": stats_json(&stats(&c)),
                "circuit": circuit_to_json(&c, field),
            });
            emit(out, &pretty(&doc))
        }
        Cmd::Pipeline {
            gadget,
            opt,
            format,
            steps,
        } => {
            let p = load(&gadget, field, steps)?;
            let (profile, passes) = parse_opt(&opt)?;
            let (q, reports) = run_opt(&p, profile, passes.as_deref())?;
            print_comparison(&stats(&p.circuit()), &stats(&q.circuit()));
            eprintln!("body: {}", format_stats(&stats(&q.body)));
            eprintln!("{}", serde_json::to_string(&reports).expect("serializable"));
            let table = tabulate(&q.constraint_system());
            emit(
                out,
                &match format {
                    Format::Json => export_json(&table),
                    Format::Csv => export_csv(&table),
                },
            )
        }
        Cmd::Optimize { gadget, opt, steps } => {
            let p = load(&gadget, field, steps)?;
            let (profile, passes) = parse_opt(&opt)?;
            let (q, reports) = run_opt(&p, profile, passes.as_deref())?;
            print_comparison(&stats(&p.body), &stats(&q.body));
            let doc = json!({
                "gadget": gadget,
                "profile": profile.name(),
                "before": stats_json(&stats(&p.body)),
                "after": stats_json(&stats(&q.body)),
                "reports": reports,
                "outputs": q.outputs.iter().map(|w| w.0).collect::<Vec<_>>(),
                "circuit": circuit_to_json(&q.circuit(), field),
            });
            emit(out, &pretty(&doc))
        }
        Cmd::Trace {
            gadget,
            input,
            profile,
            steps,
        } => {
            let mut p = load(&gadget, field, steps)?;
            if let Some(profile) = profile {
                p = run_opt(&p, Profile::parse(&profile).map_err(usage)?, None)?.0;
            }
            let xs = parse_inputs(&input, field)?;
            if xs.len() != p.inputs.len() {
                return Err(usage(format!(
                    "{gadget} takes {} inputs, got {}",
                    p.inputs.len(),
                    xs.len()
                )));
            }
            match p.run(&xs) {
                Ok(t) => {
                    let outs: Vec<String> = p
                        .output_values(&t)
                        .iter()
                        .map(|v| v.map_or("_".into(), |v| v.value().to_string()))
                        .collect();
                    eprintln!("outputs: [{}]", outs.join(", "));
                    emit(out, &serde_json::to_string(&trace_to_json(&t)).expect("serializable"))
                }
                Err(e) => Err(Failure::Trace(format!("trace generation failed: {e}"))),
            }
        }
        Cmd::Stats { gadget, opt, steps } => {
            let p = load(&gadget, field, steps)?;
            let (profile, passes) = parse_opt(&opt)?;
            let (q, _) = run_opt(&p, profile, passes.as_deref())?;
            print_comparison(&stats(&p.body), &stats(&q.body));
            let doc = json!({
                "gadget": gadget,
                "profile": profile.name(),
                "preamble": stats_json(&stats(&p.preamble)),
                "before": stats_json(&stats(&p.body)),
                "after": stats_json(&stats(&q.body)),
            });
            emit(out, &pretty(&doc))
        }
        Cmd::Tabulate {
            gadget,
            format,
            constraints,
            steps,
        } => {
            let p = load(&gadget, field, steps)?;
            let cs = p.constraint_system();
            if constraints {
                return emit(out, &pretty(&constraint_system_to_json(&cs)));
            }
            let table = tabulate(&cs);
            eprintln!(
                "{} rows, {} wire columns, {} constant columns",
                table.rows.len(),
                table.geometry.wire_columns,
                table.geometry.constant_columns.len()
            );
            emit(
                out,
                &match format {
                    Format::Json => export_json(&table),
                    Format::Csv => export_csv(&table),
                },
            )
        }
        Cmd::Flatten { gadget, max_degree } => {
            let p = load(&gadget, field, 16)?;
            let g = flatten(&p.circuit(), max_degree).map_err(usage)?;
            eprintln!(
                "width {}, {} identities, max degree {}",
                g.width(),
                g.identities.len(),
                g.max_degree
            );
            emit(out, &pretty(&custom_gate_to_json(&g)))
        }
        Cmd::Verify {
            property,
            gadget,
            samples,
            seed,
            pass,
            profile,
        } => {
            let p = load(&gadget, field, 16)?;
            let reports = match property {
                Property::Completeness => vec![check_completeness(&p, &gadget, samples, seed)],
                Property::Soundness => match check_soundness_bruteforce(&p, &gadget) {
                    Ok(r) => vec![r],
                    Err(VerifyError::Budget { .. }) => {
                        eprintln!("field too large to enumerate; running the randomized search instead");
                        vec![soundness_smoke(&p, &gadget, samples, seed)]
                    }
                    Err(e) => return Err(usage(e)),
                },
                Property::Preservation => {
                    let profile = Profile::parse(&profile).map_err(usage)?;
                    match pass {
                        Some(name) => {
                            let pass = Pass::parse(&name).map_err(usage)?;
                            vec![check_preservation(pass, &p, profile, &gadget, samples, seed)]
                        }
                        None => {
                            let mut rs: Vec<CheckReport> = Pass::DEFAULT
                                .iter()
                                .map(|&pass| check_preservation(pass, &p, profile, &gadget, samples, seed))
                                .collect();
                            rs.push(check_pipeline_preservation(&p, profile, &gadget, samples, seed).map_err(usage)?);
                            rs
                        }
                    }
                }
            };
            report_result(&reports, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
