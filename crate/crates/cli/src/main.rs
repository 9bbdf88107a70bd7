use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qseries::elliptic::{jacobi_inverse, theta_quotient};
use qseries::error::QError;
use qseries::factorize::factorize;
use qseries::qcore::{qpoch, qpoch_inf, theta, QContext, C64, ONE};
use qseries::roots::product_exponent;
use qseries::series::{psi, psi_star_extended, w_series, w_star, SeriesSpec, WSpec};
use qseries::verify::{fmt_complex15, parse_complex, run_suite, Suite, SuiteConfig};
use qseries::wronskian::{gustafson_value, wronskian2, wronskian2_closed_form};

#[derive(Parser)]
#[command(name = "qs", version, about = "Evaluate and verify bilateral q-series identities")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a registered function; `qs eval --list` shows them.
    Eval {
        name: Option<String>,
        #[arg(allow_hyphen_values = true)]
        args: Vec<String>,
        #[arg(long, default_value = "0.5")]
        q: String,
        #[arg(long)]
        list: bool,
    },
    /// Run a verification suite and write a newline-delimited report.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value = "0.5")]
        q: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, default_value_t = 1.0)]
        tolerance_scale: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record wall-clock time per identity (reports are then not reproducible).
        #[arg(long)]
        timings: bool,
        /// Numerator parameters of the 2psi2 used by the theorem suites.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        a: Vec<String>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        b: Vec<String>,
    },
    /// Factorize psi*(x, y) in y into A times theta factors.
    Factorize {
        #[arg(long)]
        r: usize,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        a: Vec<String>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        b: Vec<String>,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, default_value = "0.5")]
        q: String,
    },
}

/// Failure with the exit code it maps to.
enum Fail {
    Usage(String),
    Domain(String),
}

impl From<QError> for Fail {
    fn from(e: QError) -> Self {
        Fail::Domain(e.to_string())
    }
}

type Out<T> = std::result::Result<T, Fail>;

fn complex(s: &str) -> Out<C64> {
    parse_complex(s).map_err(|e| Fail::Usage(e.to_string()))
}

fn complexes(v: &[String]) -> Out<Vec<C64>> {
    v.iter().map(|s| complex(s)).collect()
}

fn context(q: &str) -> Out<QContext> {
    let ctx = QContext::new(complex(q)?)?;
    match max_terms()? {
        Some(m) => Ok(ctx.with_max_terms(m)?),
        None => Ok(ctx),
    }
}

fn max_terms() -> Out<Option<usize>> {
    match std::env::var("QS_MAX_TERMS") {
        Ok(v) => v
            .parse()
            .map(Some)
            .map_err(|_| Fail::Usage(format!("QS_MAX_TERMS={v:?} is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

enum Arity {
    Exact(usize),
    /// `a_1..a_r, b_1..b_r` followed by the given number of trailing arguments.
    Spec(usize),
    /// `a_1..a_{r-2}, y` with `r >= 3`.
    W,
}

type EvalFn = fn(&[C64], &QContext) -> qseries::error::Result<C64>;

struct Entry {
    name: &'static str,
    arity: Arity,
    usage: &'static str,
    f: EvalFn,
}

fn split_spec(args: &[C64], tail: usize) -> qseries::error::Result<(SeriesSpec, &[C64])> {
    let r = (args.len() - tail) / 2;
    Ok((
        SeriesSpec::new(args[..r].to_vec(), args[r..2 * r].to_vec())?,
        &args[2 * r..],
    ))
}

fn split_w(args: &[C64]) -> qseries::error::Result<(WSpec, C64)> {
    let (y, a) = args.split_last().expect("arity checked");
    Ok((WSpec::new(a.to_vec())?, *y))
}

fn integer(z: C64) -> qseries::error::Result<i64> {
    if z.im != 0.0 || z.re.fract() != 0.0 || z.re.abs() > 1e9 {
        return Err(QError::Domain(format!("n = {z} must be an integer")));
    }
    Ok(z.re as i64)
}

const REGISTRY: &[Entry] = &[
    Entry {
        name: "theta",
        arity: Arity::Exact(1),
        usage: "x",
        f: |a, c| theta(a[0], c),
    },
    Entry {
        name: "qpoch",
        arity: Arity::Exact(2),
        usage: "x n",
        f: |a, c| qpoch(a[0], integer(a[1])?, c),
    },
    Entry {
        name: "qpoch_inf",
        arity: Arity::Exact(1),
        usage: "x",
        f: |a, c| qpoch_inf(a[0], c),
    },
    Entry {
        name: "psi",
        arity: Arity::Spec(2),
        usage: "a_1..a_r b_1..b_r x y",
        f: |a, c| {
            let (s, t) = split_spec(a, 2)?;
            psi(&s, t[0], t[1], c)
        },
    },
    Entry {
        name: "psi_star",
        arity: Arity::Spec(2),
        usage: "a_1..a_r b_1..b_r x y",
        f: |a, c| {
            let (s, t) = split_spec(a, 2)?;
            psi_star_extended(&s, t[0], t[1], c)
        },
    },
    Entry {
        name: "psi_star1_closed_form",
        arity: Arity::Exact(4),
        usage: "a b x y",
        f: |a, c| Ok(qpoch_inf(a[1] / a[0], c)? * theta(a[0] * a[2] * a[3], c)?),
    },
    Entry {
        name: "w_series",
        arity: Arity::W,
        usage: "a_1..a_{r-2} y",
        f: |a, c| {
            let (w, y) = split_w(a)?;
            w_series(&w, y, c)
        },
    },
    Entry {
        name: "w_star",
        arity: Arity::W,
        usage: "a_1..a_{r-2} y",
        f: |a, c| {
            let (w, y) = split_w(a)?;
            w_star(&w, y, c)
        },
    },
    Entry {
        name: "theta_quotient",
        arity: Arity::Exact(1),
        usage: "x",
        f: |a, c| theta_quotient(a[0], c),
    },
    Entry {
        name: "jacobi_inverse",
        arity: Arity::Exact(1),
        usage: "y",
        f: |a, c| jacobi_inverse(a[0], c),
    },
    Entry {
        name: "wronskian2",
        arity: Arity::Exact(7),
        usage: "a_1 a_2 b_1 b_2 x y z",
        f: |a, c| {
            let (s, t) = split_spec(a, 3)?;
            wronskian2(&s, t[0], t[1], t[2], c)
        },
    },
    Entry {
        name: "wronskian2_closed_form",
        arity: Arity::Exact(7),
        usage: "a_1 a_2 b_1 b_2 x y z",
        f: |a, c| {
            let (s, t) = split_spec(a, 3)?;
            wronskian2_closed_form(&s, t[0], t[1], t[2], c)
        },
    },
    Entry {
        name: "gustafson_value",
        arity: Arity::Spec(0),
        usage: "a_1..a_r b_1..b_r",
        f: |a, c| {
            let (s, _) = split_spec(a, 0)?;
            gustafson_value(&s, c)
        },
    },
];

fn arity_ok(arity: &Arity, n: usize) -> bool {
    match *arity {
        Arity::Exact(k) => n == k,
        Arity::Spec(tail) => n >= tail + 2 && (n - tail).is_multiple_of(2),
        Arity::W => n >= 2,
    }
}

/// Positional values may start with `-`, so a trailing `--q` lands among them.
fn take_q(args: Vec<String>, mut q: String) -> Out<(Vec<String>, String)> {
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--q" {
            q = it.next().ok_or_else(|| Fail::Usage("--q needs a value".into()))?;
        } else if let Some(v) = a.strip_prefix("--q=") {
            q = v.to_string();
        } else {
            rest.push(a);
        }
    }
    Ok((rest, q))
}

fn cmd_eval(name: Option<String>, args: Vec<String>, q: String, list: bool) -> Out<()> {
    let (args, q) = take_q(args, q)?;
    let (args, q) = (&args[..], &q[..]);
    if list {
        for e in REGISTRY {
            println!("{} {}", e.name, e.usage);
        }
        return Ok(());
    }
    let name = name.ok_or_else(|| Fail::Usage("missing function name (see --list)".into()))?;
    let entry = REGISTRY
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Fail::Usage(format!("unknown function {name:?} (see --list)")))?;
    if !arity_ok(&entry.arity, args.len()) {
        return Err(Fail::Usage(format!(
            "{name} takes `{}`, got {} argument(s)",
            entry.usage,
            args.len()
        )));
    }
    let vals = complexes(args)?;
    let ctx = context(q)?;
    println!("{}", fmt_complex15((entry.f)(&vals, &ctx)?));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    suite: &str,
    q: &str,
    seed: u64,
    samples: usize,
    tolerance_scale: f64,
    out: Option<PathBuf>,
    timings: bool,
    a: &[String],
    b: &[String],
) -> Out<bool> {
    let suite: Suite = suite.parse().map_err(|e: QError| Fail::Usage(e.to_string()))?;
    let mut config = SuiteConfig::new(suite, complex(q)?, seed, samples)?.with_tolerance_scale(tolerance_scale)?;
    if !a.is_empty() || !b.is_empty() {
        config = config.with_params(SeriesSpec::new(complexes(a)?, complexes(b)?)?)?;
    }
    config.max_terms = max_terms()?;
    let report = run_suite(&config, timings)?;
    let text = report.to_ndjson();
    match out {
        Some(path) => {
            std::fs::write(&path, text).map_err(|e| Fail::Domain(format!("cannot write {}: {e}", path.display())))?
        }
        None => print!("{text}"),
    }
    for r in report.records.iter().filter(|r| !r.pass) {
        let residual = r.residual.map_or("none".to_string(), |v| format!("{v:e}"));
        let why = r.error.as_deref().unwrap_or("");
        eprintln!(
            "fail {} residual {residual} tolerance {:e} {why}",
            r.identity_id, r.tolerance
        );
    }
    eprintln!("{}", report.summary());
    Ok(report.all_pass())
}

fn cmd_factorize(r: usize, a: &[String], b: &[String], x: &str, q: &str) -> Out<()> {
    if a.len() != r || b.len() != r {
        return Err(Fail::Usage(format!(
            "--r {r} needs {r} values for --a and --b, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let spec = SeriesSpec::new(complexes(a)?, complexes(b)?)?;
    let x = complex(x)?;
    let ctx = context(q)?;
    let f = factorize(&spec, x, &ctx)?;
    let reduced: Vec<C64> = f.rhos.iter().map(|c| ctx.reduce_to_band(c.rep, ONE).0).collect();
    let (k, _) = product_exponent(&reduced, spec.a_product() * x, &ctx);
    println!("A = {}", fmt_complex15(f.a));
    for (j, c) in f.rhos.iter().enumerate() {
        println!(
            "rho_{} = {}  band ({}, {}]",
            j + 1,
            fmt_complex15(c.rep),
            c.modulus_band.0,
            c.modulus_band.1
        );
    }
    println!("residual = {:e}", f.residual);
    println!("product exponent = {k}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Eval { name, args, q, list } => cmd_eval(name, args, q, list).map(|_| true),
        Cmd::Verify {
            suite,
            q,
            seed,
            samples,
            tolerance_scale,
            out,
            timings,
            a,
            b,
        } => cmd_verify(&suite, &q, seed, samples, tolerance_scale, out, timings, &a, &b),
        Cmd::Factorize { r, a, b, x, q } => cmd_factorize(r, &a, &b, &x, &q).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Fail::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Fail::Domain(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
