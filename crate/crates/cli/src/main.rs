//! `periscope`: synthesize, realize, trace and export mirror systems.
//!
//! Exit status: 0 pass, 1 verification failure, 2 usage or input error,
//! 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use periscope::composer::{
    mixed_detail, realize_orientation_preserving_with, realize_orientation_reversing_with, ComposeOptions,
};
use periscope::decomposition::{decompose_local_with, DecomposeOptions};
use periscope::ellipse::EllipseConfig;
use periscope::io::export::{ellipse_csv, system_obj, traces_csv, DEFAULT_MESH_RESOLUTION};
use periscope::io::spec::{parse_domain, parse_map, parse_point};
use periscope::io::{SceneDocument, SchemaMode};
use periscope::map::{orientation_check, Orientation, ORIENTATION_GRID};
use periscope::sampling::halton_points;
use periscope::two_mirror::{synthesize_two_mirror_with, SynthesisOptions};
use periscope::verifier::{trace_ray, verify_system, VerificationReport, VerifyOptions};
use periscope::{Error, PlaneMap, ScalarField};

#[derive(Parser)]
#[command(
    name = "periscope",
    version,
    about = "Mirror systems carrying one parallel beam onto another"
)]
struct Cli {
    /// Map tolerance for verification (and decomposition).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Reserved: every computation is already deterministic.
    #[arg(long, global = true)]
    seed_free: bool,
    /// Reject unknown fields in scene files.
    #[arg(long, global = true)]
    strict_schema: bool,
    /// Output file (or directory for `export`); stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Use the four-reflection pipeline regardless of orientation.
    #[arg(long = "force-4", global = true)]
    force_4: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Two mirrors realizing x -> x + grad G(x).
    Synthesize {
        #[arg(long)]
        potential: String,
        #[arg(long)]
        domain: String,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Write the verification report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Four or six reflections realizing a plane map.
    Realize {
        #[arg(long)]
        map: String,
        #[arg(long)]
        domain: String,
        #[arg(long, default_value_t = 1)]
        partition: usize,
        #[arg(long)]
        flip_c: Option<f64>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Local splitting of a map into two gradient maps.
    Decompose {
        #[arg(long)]
        map: String,
        #[arg(long)]
        at: String,
        #[arg(long, default_value_t = 8)]
        degree: usize,
    },
    /// Ray paths through a scene as CSV.
    Trace {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 0)]
        system: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Verification report for every system of a scene.
    Verify {
        #[arg(long)]
        scene: PathBuf,
        /// Expected map; defaults to the one stored with each system.
        #[arg(long)]
        map: Option<String>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Mirror image of every system, realizing the inverse maps.
    Invert {
        #[arg(long)]
        scene: PathBuf,
    },
    /// OBJ meshes of every mirror into the `--out` directory.
    Export {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MESH_RESOLUTION)]
        resolution: usize,
    },
    /// Pencil map table of an ellipse as CSV.
    Ellipse {
        #[arg(long)]
        c: f64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
}

enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(hint) = hint(&e) {
                eprintln!("hint: {hint}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::Schema(_) | Error::InvalidDomain(_) | Error::Io(_) => 2,
        e if e.is_numerical() => 3,
        _ => 1,
    }
}

fn root_cause(e: &Error) -> &Error {
    match e {
        Error::CellDecomposition { source, .. } => root_cause(source),
        e => e,
    }
}

fn hint(e: &Error) -> Option<&'static str> {
    match root_cause(e) {
        Error::NotHyperbolic { .. } => Some(
            "where (tr J)^2 = 4 det J the symmetry equation is not hyperbolic; maps such as e^{x2}(x1, x2) admit no local splitting into two gradient maps there",
        ),
        Error::WrongOrientation { found, .. } if found == "preserving" => {
            Some("orientation-preserving maps need the six-reflection pipeline")
        }
        Error::WrongOrientation { found, .. } if found == "mixed" => {
            Some("restrict the domain to a region where det J keeps one sign")
        }
        _ => None,
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_scene(path: &Path, strict: bool) -> Result<SceneDocument, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mode = if strict { SchemaMode::Strict } else { SchemaMode::Lax };
    SceneDocument::parse(&text, mode)
}

fn json<T: serde::Serialize>(v: &T) -> Result<String, Error> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn write_report(path: Option<&Path>, report: &VerificationReport) -> Result<(), Error> {
    eprintln!("{}", report.summary());
    if let Some(p) = path {
        write_output(Some(p), &json(report)?)?;
    }
    Ok(())
}

fn verdict(passed: bool) -> Outcome {
    if passed {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

fn run(cli: &Cli) -> Result<Outcome, Error> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Synthesize {
            potential,
            domain,
            c,
            h,
            samples,
            report,
        } => {
            let g = ScalarField::parse(potential)?;
            let d1 = parse_domain(domain)?;
            let tol = cli.tol.unwrap_or(1e-8);
            let mut opts = SynthesisOptions::default();
            opts.verify.map_tolerance = tol;
            let system = synthesize_two_mirror_with(&g, &d1, *c, *h, &opts)?;
            let vopts = VerifyOptions {
                samples: *samples,
                map_tolerance: tol,
                spread_tolerance: Some(1e-9 * system.path_constant().max(1.0)),
                ..VerifyOptions::default()
            };
            let expected = PlaneMap::displacement(g);
            let r = verify_system(&system, &expected, &vopts);
            write_report(report.as_deref(), &r)?;
            let doc = SceneDocument::new(vec![system])
                .with_metadata("command", "synthesize")
                .with_metadata("potential", potential.as_str());
            write_output(out, &doc.to_json()?)?;
            Ok(verdict(r.passed))
        }
        Command::Realize {
            map,
            domain,
            partition,
            flip_c,
            report,
        } => {
            let f = parse_map(map)?;
            let d1 = parse_domain(domain)?;
            let mut opts = ComposeOptions::default();
            let composite = if cli.force_4 {
                opts.check_orientation = false;
                opts.verify.map_tolerance = cli.tol.unwrap_or(1e-6);
                realize_orientation_reversing_with(&f, &d1, *partition, &opts)?
            } else {
                let check = orientation_check(&f, &d1, ORIENTATION_GRID)?;
                match check.orientation {
                    Orientation::Reversing => {
                        opts.verify.map_tolerance = cli.tol.unwrap_or(1e-6);
                        realize_orientation_reversing_with(&f, &d1, *partition, &opts)?
                    }
                    Orientation::Preserving => {
                        opts.verify.map_tolerance = cli.tol.unwrap_or(1e-5);
                        realize_orientation_preserving_with(&f, &d1, *flip_c, *partition, &opts)?
                    }
                    Orientation::Mixed => {
                        return Err(Error::WrongOrientation {
                            expected: "reversing or preserving".into(),
                            found: "mixed".into(),
                            detail: mixed_detail(&check),
                        })
                    }
                }
            };
            write_report(report.as_deref(), &composite.report)?;
            let doc = SceneDocument::new(vec![composite.system])
                .with_metadata("command", "realize")
                .with_metadata("map", map.as_str());
            write_output(out, &doc.to_json()?)?;
            Ok(verdict(composite.report.passed))
        }
        Command::Decompose { map, at, degree } => {
            let f = parse_map(map)?;
            let x0 = parse_point(at)?;
            let opts = DecomposeOptions {
                degree: *degree,
                tolerance: cli.tol.unwrap_or(1e-8),
                ..DecomposeOptions::default()
            };
            let r = decompose_local_with(&f, &x0, &opts)?;
            write_output(out, &json(&r)?)?;
            Ok(Outcome::Pass)
        }
        Command::Trace { scene, system, samples } => {
            let doc = read_scene(scene, cli.strict_schema)?;
            let s = doc
                .systems
                .get(*system)
                .ok_or_else(|| Error::Schema(format!("scene has no system {system}")))?;
            let labels = halton_points(&s.entry_domain, *samples);
            let traces = labels
                .iter()
                .map(|x| trace_ray(s, x, 16))
                .collect::<Result<Vec<_>, _>>()?;
            write_output(out, &traces_csv(s, &traces)?)?;
            Ok(Outcome::Pass)
        }
        Command::Verify { scene, map, samples } => {
            let doc = read_scene(scene, cli.strict_schema)?;
            let given = map.as_deref().map(parse_map).transpose()?;
            let mut reports = Vec::new();
            for (i, s) in doc.systems.iter().enumerate() {
                let expected = given
                    .clone()
                    .or_else(|| s.expected_map.clone())
                    .ok_or_else(|| Error::Schema(format!("system {i} has no expected map; pass --map")))?;
                let vopts = VerifyOptions {
                    samples: *samples,
                    map_tolerance: cli.tol.unwrap_or(1e-8),
                    ..VerifyOptions::default()
                };
                let r = verify_system(s, &expected, &vopts);
                eprintln!("system {i}: {}", r.summary());
                reports.push(r);
            }
            write_output(out, &json(&reports)?)?;
            Ok(verdict(reports.iter().all(|r| r.passed)))
        }
        Command::Invert { scene } => {
            let mut doc = read_scene(scene, cli.strict_schema)?;
            doc.systems = doc.systems.iter().map(periscope::composer::invert_system).collect();
            write_output(out, &doc.to_json()?)?;
            Ok(Outcome::Pass)
        }
        Command::Export { scene, resolution } => {
            let doc = read_scene(scene, cli.strict_schema)?;
            let dir = out.ok_or_else(|| Error::Io("export needs --out <directory>".into()))?;
            std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
            for (i, s) in doc.systems.iter().enumerate() {
                for (id, obj) in system_obj(s, *resolution)? {
                    let name: String = id
                        .chars()
                        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
                        .collect();
                    write_output(Some(&dir.join(format!("system{i}_{name}.obj"))), &obj)?;
                }
            }
            Ok(Outcome::Pass)
        }
        Command::Ellipse { c, samples } => {
            let cfg = EllipseConfig::new(*c)?;
            write_output(out, &ellipse_csv(&cfg, *samples)?)?;
            Ok(Outcome::Pass)
        }
    }
}
