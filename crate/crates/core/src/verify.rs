//! Seeded verification suites and their newline-delimited reports.
//!
//! Sample points are drawn sequentially from a ChaCha8 stream, with
//! rejection of points near poles or branch points. The residuals are then
//! evaluated in parallel and written in sample order, so a report depends
//! only on the configuration.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::classical::{one_psi_one, q_gauss, six_psi_six};
use crate::elliptic::{jacobi_inverse, theta_quotient, InversionConstants, BRANCH_CLEARANCE};
use crate::error::{QError, Result};
use crate::factorize::{
    bailey_zero_set_residual, branch_clearance, factorize, find_rhos, fit_w_theta2, pair_mismatch, rho_via_integral,
    verify_a_ratio_relations, verify_a_rho_relation, verify_a_rho_relation_at_one, verify_bailey_symmetry,
    verify_rho_functional_equation, DENOMINATOR_GUARD,
};
use crate::linalg::det;
use crate::qcore::{min_factor_modulus, theta, theta_clearance, QContext, C64, ONE};
use crate::roots::product_exponent;
use crate::series::{psi_annulus, psi_star_extended, psi_star_sum, w_star_sum, SeriesSpec, WSpec};
use crate::thetaspaces::{
    nodes_admissible, odd_omega_lift, omega_expansion_residual, reflected_product, reflection_residual,
    sample_conditioning, slater_general_check, slater_vwp_check, theta_det_ratio, theta_space_residual,
    SampledFunction, ThetaSpaceTag,
};
use crate::vwp::{
    sqrt_q_reduction_residual, w5_residual, w6_constancy, w6_residual, w_quasi_periodic_residual,
    w_reflection_residual, w_vanishing_residual,
};
use crate::wronskian::{
    bracket, bracket_closed_form, gustafson_ratio, gustafson_value, half_period_residual, qwronskian_step_check,
    theta_solution_system, three_term_residual, weierstrass_residual, wronskian2, wronskian2_closed_form,
};

/// Identifier of the sample generator, recorded in every report header.
pub const GENERATOR_ID: &str = "rand_chacha-0.9/ChaCha8Rng::seed_from_u64";
/// Parameter tuples with a Pochhammer factor below this modulus are redrawn.
pub const POLE_GUARD: f64 = 1e-3;
/// Draws allowed per sample before the suite is declared unsatisfiable.
pub const MAX_ATTEMPTS: usize = 2000;
pub const TOLERANCE_SCALE_RANGE: (f64, f64) = (1e-4, 100.0);
/// Points whose evaluation loses more than this factor to cancellation are
/// redrawn, so that double precision can meet the fixed tolerances.
pub const COND_GUARD: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Classical,
    Theorem1,
    Theorem2,
    Vwp,
    Slater,
    Wronskian,
    Elliptic,
    Thetaspace,
    All,
}

impl Suite {
    pub const CONCRETE: [Suite; 8] = [
        Suite::Classical,
        Suite::Theorem1,
        Suite::Theorem2,
        Suite::Vwp,
        Suite::Slater,
        Suite::Wronskian,
        Suite::Elliptic,
        Suite::Thetaspace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Classical => "classical",
            Suite::Theorem1 => "theorem1",
            Suite::Theorem2 => "theorem2",
            Suite::Vwp => "vwp",
            Suite::Slater => "slater",
            Suite::Wronskian => "wronskian",
            Suite::Elliptic => "elliptic",
            Suite::Thetaspace => "thetaspace",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = QError;
    fn from_str(s: &str) -> Result<Self> {
        Suite::CONCRETE
            .iter()
            .chain(std::iter::once(&Suite::All))
            .find(|v| v.name() == s)
            .copied()
            .ok_or_else(|| QError::Domain(format!("unknown suite {s:?}")))
    }
}

/// What to run and how to sample it.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub suite: Suite,
    pub q: C64,
    pub seed: u64,
    pub samples: usize,
    pub tolerance_scale: f64,
    /// Replaces the default `_2ψ_2` spec in the theorem and Wronskian suites.
    pub params: Option<SeriesSpec>,
    /// Overrides the default truncation limit of the context.
    pub max_terms: Option<usize>,
}

impl SuiteConfig {
    pub fn new(suite: Suite, q: C64, seed: u64, samples: usize) -> Result<Self> {
        let c = SuiteConfig {
            suite,
            q,
            seed,
            samples,
            tolerance_scale: 1.0,
            params: None,
            max_terms: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_tolerance_scale(mut self, s: f64) -> Result<Self> {
        self.tolerance_scale = s;
        self.validate()?;
        Ok(self)
    }

    pub fn with_params(mut self, spec: SeriesSpec) -> Result<Self> {
        if spec.r() != 2 {
            return Err(QError::Domain("suite parameters must be a 2psi2 spec".into()));
        }
        self.params = Some(spec);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(QError::Domain("samples must be at least 1".into()));
        }
        let (lo, hi) = TOLERANCE_SCALE_RANGE;
        if !(self.tolerance_scale >= lo && self.tolerance_scale <= hi) {
            return Err(QError::Domain(format!(
                "tolerance_scale must lie in [{lo}, {hi}], got {}",
                self.tolerance_scale
            )));
        }
        self.context().map(|_| ())
    }

    pub fn context(&self) -> Result<QContext> {
        let ctx = QContext::new(self.q)?;
        match self.max_terms {
            Some(m) => ctx.with_max_terms(m),
            None => Ok(ctx),
        }
    }
}

/// Formats a complex number as a single token, `a+bi` or `a-bi`.
pub fn fmt_complex(z: C64) -> String {
    if z.im < 0.0 || (z.im == 0.0 && z.im.is_sign_negative()) {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

/// Parses `a`, `bi`, `a+bi` or `a-bi` (no spaces; `i` alone means `1i`).
pub fn parse_complex(s: &str) -> Result<C64> {
    let bad = || QError::Domain(format!("cannot parse {s:?} as a complex number a+bi"));
    let t = s.trim();
    let Some(body) = t.strip_suffix(['i', 'j']) else {
        return t.parse::<f64>().map(|re| C64::new(re, 0.0)).map_err(|_| bad());
    };
    // split at the last sign that does not start an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (body[..k].parse::<f64>().map_err(|_| bad())?, &body[k..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        v => v.parse::<f64>().map_err(|_| bad())?,
    };
    Ok(C64::new(re, im))
}

/// `%.15g`-style rendering of one real number.
pub fn fmt_sig15(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let exp = v.abs().log10().floor() as i32;
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if !(-5..15).contains(&exp) {
        let s = format!("{v:.14e}");
        let (m, e) = s.split_once('e').expect("exponent form");
        format!("{}e{e}", trim(m.to_string()))
    } else {
        trim(format!("{v:.*}", (14 - exp).max(0) as usize))
    }
}

/// `re+im i` with 15 significant digits per component.
pub fn fmt_complex15(z: C64) -> String {
    let im = fmt_sig15(z.im.abs());
    if z.im < 0.0 {
        format!("{}-{im}i", fmt_sig15(z.re))
    } else {
        format!("{}+{im}i", fmt_sig15(z.re))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportHeader {
    pub version: String,
    pub suite: String,
    pub q: String,
    pub seed: u64,
    pub samples: usize,
    pub tolerance_scale: f64,
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRecord {
    pub identity_id: String,
    pub inputs: Value,
    /// `None` when the evaluation itself failed; see `error`.
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub runtime_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub header: ReportHeader,
    pub records: Vec<ReportRecord>,
}

impl Report {
    pub fn passed(&self) -> usize {
        self.records.iter().filter(|r| r.pass).count()
    }

    pub fn all_pass(&self) -> bool {
        self.passed() == self.records.len()
    }

    /// `PASS k/k` or `FAIL j/k` with `j` the number of failing records.
    pub fn summary(&self) -> String {
        let k = self.records.len();
        if self.all_pass() {
            format!("PASS {k}/{k}")
        } else {
            format!("FAIL {}/{k}", k - self.passed())
        }
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn ids(&self) -> Vec<&str> {
        let mut v: Vec<&str> = Vec::new();
        for r in &self.records {
            if !v.contains(&r.identity_id.as_str()) {
                v.push(&r.identity_id);
            }
        }
        v
    }
}

type Check = Arc<dyn Fn() -> Result<f64> + Send + Sync>;

struct Case {
    id: &'static str,
    inputs: Value,
    tol: f64,
    check: Check,
}

struct Sampler {
    rng: ChaCha8Rng,
    ctx: QContext,
    /// Set when a draw was asked for from an empty range.
    empty: bool,
}

impl Sampler {
    fn log_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if !(0.0 < lo && lo < hi) {
            self.empty = true;
            return f64::NAN;
        }
        self.rng.random_range(lo.ln()..hi.ln()).exp()
    }

    /// Modulus log-uniform in `[lo, hi]`, argument uniform in `[-arg, arg]`.
    fn complex(&mut self, lo: f64, hi: f64, arg: f64) -> C64 {
        let m = self.log_uniform(lo, hi);
        let t = if arg > 0.0 {
            self.rng.random_range(-arg..arg)
        } else {
            0.0
        };
        C64::from_polar(m, t)
    }

    fn full_circle(&mut self, lo: f64, hi: f64) -> C64 {
        self.complex(lo, hi, std::f64::consts::PI)
    }

    /// Moduli `|q|^{1/2} .. |q|^{-1/2}`: one period of every quasi-periodic
    /// function, and free of the cancellation that far-out points bring.
    fn band(&self) -> (f64, f64) {
        let h = self.ctx.q().norm().sqrt();
        (h, 1.0 / h)
    }

    fn band_point(&mut self) -> C64 {
        let (lo, hi) = self.band();
        self.full_circle(lo, hi)
    }

    /// Redraws until `f` accepts, up to `MAX_ATTEMPTS` times.
    fn draw<T>(&mut self, what: &str, mut f: impl FnMut(&mut Self) -> Option<T>) -> Result<T> {
        for _ in 0..MAX_ATTEMPTS {
            let v = f(self);
            if self.empty {
                return Err(QError::Unsatisfiable(format!("empty sampling range for {what}")));
            }
            if let Some(v) = v {
                return Ok(v);
            }
        }
        Err(QError::Unsatisfiable(format!(
            "no admissible {what} after {MAX_ATTEMPTS} draws"
        )))
    }

    fn factors_clear(&self, zs: &[C64]) -> bool {
        zs.iter().all(|&z| min_factor_modulus(z, &self.ctx) >= POLE_GUARD)
    }

    fn thetas_clear(&self, zs: &[C64]) -> bool {
        zs.iter().all(|&z| theta_clearance(z, &self.ctx) >= POLE_GUARD)
    }
}

fn cval(z: C64) -> Value {
    Value::String(fmt_complex(z))
}

fn clist(zs: &[C64]) -> Value {
    Value::Array(zs.iter().map(|&z| cval(z)).collect())
}

fn spec_json(s: &SeriesSpec) -> Value {
    json!({"a": clist(s.a()), "b": clist(s.b())})
}

/// `Σ|t| / |Σ t|`, the amplification of rounding errors in the sum.
fn cancellation(terms: &[C64]) -> f64 {
    let sum: C64 = terms.iter().sum();
    let mag: f64 = terms.iter().map(|t| t.norm()).sum();
    if sum.norm() == 0.0 {
        f64::INFINITY
    } else {
        mag / sum.norm()
    }
}

/// `Π ‖row‖ / |det|`; large values mean a nearly singular matrix.
fn hadamard(rows: &[Vec<C64>]) -> f64 {
    let d = det(rows).norm();
    let p: f64 = rows
        .iter()
        .map(|r| r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
        .product();
    if d == 0.0 {
        f64::INFINITY
    } else {
        p / d
    }
}

fn psi_cond(spec: &SeriesSpec, x: C64, y: C64, ctx: &QContext) -> f64 {
    match psi_star_sum(spec, x, y, ctx) {
        Ok(v) if v.value.norm() > 0.0 => v.scale / v.value.norm(),
        _ => f64::INFINITY,
    }
}

fn w_cond(w: &WSpec, y: C64, ctx: &QContext) -> f64 {
    match w_star_sum(w, y, ctx) {
        Ok(v) if v.value.norm() > 0.0 => v.scale / v.value.norm(),
        _ => f64::INFINITY,
    }
}

fn well_conditioned(conds: impl IntoIterator<Item = f64>) -> bool {
    conds.into_iter().all(|c| c <= COND_GUARD)
}

fn rel(a: C64, b: C64) -> f64 {
    let s = a.norm().max(b.norm());
    if s == 0.0 {
        0.0
    } else {
        (a - b).norm() / s
    }
}

fn case(id: &'static str, inputs: Value, tol: f64, check: impl Fn() -> Result<f64> + Send + Sync + 'static) -> Case {
    Case {
        id,
        inputs,
        tol,
        check: Arc::new(check),
    }
}

pub fn default_spec2() -> SeriesSpec {
    SeriesSpec::from_real(&[2.0, 3.0], &[0.1, 0.15]).expect("valid spec")
}

pub fn default_spec3() -> SeriesSpec {
    SeriesSpec::from_real(&[2.0, 3.0, 1.5], &[0.1, 0.15, 0.2]).expect("valid spec")
}

/// Runs the configured suite. `timings` fills `runtime_ms`; reports are
/// byte-reproducible only without it.
pub fn run_suite(config: &SuiteConfig, timings: bool) -> Result<Report> {
    config.validate()?;
    let ctx = config.context()?;
    let mut cases = Vec::new();
    let suites: Vec<Suite> = match config.suite {
        Suite::All => Suite::CONCRETE.to_vec(),
        s => vec![s],
    };
    for s in suites {
        // each suite gets its own stream so `all` reproduces the single-suite reports
        let mut sm = Sampler {
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ suite_salt(s)),
            ctx,
            empty: false,
        };
        let n = config.samples;
        let spec2 = config.params.clone().unwrap_or_else(default_spec2);
        match s {
            Suite::Classical => classical_cases(&mut sm, n, &mut cases)?,
            Suite::Theorem1 => theorem1_cases(&mut sm, n, &spec2, &mut cases)?,
            Suite::Theorem2 => theorem2_cases(&mut sm, n, &spec2, &mut cases)?,
            Suite::Vwp => vwp_cases(&mut sm, n, &mut cases)?,
            Suite::Slater => slater_cases(&mut sm, n, &spec2, &mut cases)?,
            Suite::Wronskian => wronskian_cases(&mut sm, n, &spec2, &mut cases)?,
            Suite::Elliptic => elliptic_cases(&mut sm, n, &mut cases)?,
            Suite::Thetaspace => thetaspace_cases(&mut sm, n, &spec2, &mut cases)?,
            Suite::All => unreachable!(),
        }
        if sm.empty {
            return Err(QError::Unsatisfiable(format!("empty sampling range in the {s} suite")));
        }
    }
    let scale = config.tolerance_scale;
    let records = cases
        .par_iter()
        .map(|c| {
            let start = Instant::now();
            let out = (c.check)();
            let ms = start.elapsed().as_secs_f64() * 1e3;
            let tol = c.tol * scale;
            let (residual, error) = match out {
                Ok(v) if v.is_finite() => (Some(v), None),
                Ok(v) => (None, Some(format!("non-finite residual {v}"))),
                Err(e) => (None, Some(e.to_string())),
            };
            ReportRecord {
                identity_id: c.id.to_string(),
                inputs: c.inputs.clone(),
                residual,
                tolerance: tol,
                pass: residual.is_some_and(|r| r < tol),
                runtime_ms: timings.then_some(ms),
                error,
            }
        })
        .collect();
    Ok(Report {
        header: ReportHeader {
            version: env!("CARGO_PKG_VERSION").to_string(),
            suite: config.suite.name().to_string(),
            q: fmt_complex(config.q),
            seed: config.seed,
            samples: config.samples,
            tolerance_scale: config.tolerance_scale,
            generator: GENERATOR_ID.to_string(),
        },
        records,
    })
}

fn suite_salt(s: Suite) -> u64 {
    (s as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn classical_cases(sm: &mut Sampler, n: usize, out: &mut Vec<Case>) -> Result<()> {
    let ctx = sm.ctx;
    let q = ctx.q();
    for _ in 0..n {
        let (a, b, x) = sm.draw("q-Gauss point", |s| {
            let a = s.full_circle(0.2, 2.5);
            let b = s.full_circle(0.2, 2.5);
            let x = s.full_circle(0.05, 0.8);
            s.factors_clear(&[q, x, a * b * x, a * x, b * x]).then_some((a, b, x))
        })?;
        out.push(case(
            "q_gauss",
            json!({"a": cval(a), "b": cval(b), "x": cval(x)}),
            1e-9,
            move || Ok(q_gauss(a, b, x, &ctx)?.relative_residual()),
        ));
    }
    for _ in 0..n {
        let (a, b, x) = sm.draw("1psi1 point", |s| {
            let a = s.full_circle(1.2, 3.0);
            let b = s.full_circle(0.05, 0.6);
            let lo = (b / a).norm() * 1.5;
            let x = s.full_circle(lo.max(0.05), 0.85);
            let ok = s.factors_clear(&[x, b / (a * x), b, q / a, b / a, q]) && s.thetas_clear(&[a * x]);
            let ok = ok && one_psi_one(a, b, x, &s.ctx).is_ok_and(|p| p.scale <= COND_GUARD * p.lhs.norm());
            ok.then_some((a, b, x))
        })?;
        out.push(case(
            "one_psi_one",
            json!({"a": cval(a), "b": cval(b), "x": cval(x)}),
            1e-9,
            move || Ok(one_psi_one(a, b, x, &ctx)?.relative_residual()),
        ));
    }
    for _ in 0..n {
        let (a, y) = sm.draw("6psi6 point", |s| {
            let a = [0; 4].map(|_| s.complex(1.2, 2.5, 0.5));
            let y = s.band_point();
            let mut f = vec![q / a.iter().product::<C64>()];
            for i in 0..4 {
                f.push(q / (a[i] * y));
                f.push(q * y / a[i]);
                for j in i + 1..4 {
                    f.push(q / (a[i] * a[j]));
                }
            }
            let lattice: Vec<C64> = a.iter().flat_map(|&ai| [ai * y, ai / y]).collect();
            let ok = s.factors_clear(&f) && s.thetas_clear(&[y * y]) && s.thetas_clear(&lattice);
            let ok = ok && six_psi_six(&a, y, &s.ctx).is_ok_and(|p| p.scale <= COND_GUARD * p.lhs.norm());
            ok.then_some((a, y))
        })?;
        out.push(case(
            "six_psi_six",
            json!({"a": clist(&a), "y": cval(y)}),
            1e-8,
            move || Ok(six_psi_six(&a, y, &ctx)?.relative_residual()),
        ));
    }
    Ok(())
}

/// `x` inside the annulus of `spec`, away from its edges.
fn annulus_point(sm: &mut Sampler, spec: &SeriesSpec, hi: f64, arg: f64) -> C64 {
    let inner = psi_annulus(spec, &sm.ctx).inner;
    let lo = (inner * 4.0).max(0.1);
    sm.complex(lo, hi, arg)
}

fn theorem1_cases(sm: &mut Sampler, n: usize, spec2: &SeriesSpec, out: &mut Vec<Case>) -> Result<()> {
    let ctx = sm.ctx;
    for (spec, recon, product) in [
        (spec2.clone(), "reconstruction_r2", "rho_product_r2"),
        (default_spec3(), "reconstruction_r3", "rho_product_r3"),
    ] {
        for _ in 0..n {
            let x = sm.draw("factorization point", |s| {
                let x = annulus_point(s, &spec, 0.8, std::f64::consts::PI);
                s.factors_clear(&[x, spec.balance() / x]).then_some(x)
            })?;
            let inputs = json!({"spec": spec_json(&spec), "x": cval(x)});
            let s1 = spec.clone();
            out.push(case(recon, inputs.clone(), 1e-8, move || {
                Ok(factorize(&s1, x, &ctx)?.residual)
            }));
            let s2 = spec.clone();
            out.push(case(product, inputs, 1e-8, move || {
                let reps: Vec<C64> = find_rhos(&s2, x, &ctx)?.iter().map(|c| c.rep).collect();
                Ok(product_exponent(&reps, s2.a_product() * x, &ctx).1)
            }));
        }
    }
    Ok(())
}

fn theorem2_point(sm: &mut Sampler, spec: &SeriesSpec) -> Result<C64> {
    let ctx = sm.ctx;
    let q = ctx.q();
    sm.draw("tracked x point", |s| {
        let x = annulus_point(s, spec, 0.7, 1.2);
        let d1 = (ONE - q * x).norm();
        let d2 = (spec.b_product() - spec.a_product() * q * q * x).norm();
        if d1 < DENOMINATOR_GUARD || d2 < DENOMINATOR_GUARD {
            return None;
        }
        match branch_clearance(spec, x, &ctx) {
            Ok(c) if c >= POLE_GUARD => Some(x),
            _ => None,
        }
    })
}

fn theorem2_cases(sm: &mut Sampler, n: usize, spec: &SeriesSpec, out: &mut Vec<Case>) -> Result<()> {
    let ctx = sm.ctx;
    let s0 = spec.clone();
    out.push(case(
        "A_rho_relation_x1",
        json!({"spec": spec_json(spec), "x": cval(ONE)}),
        1e-7,
        move || verify_a_rho_relation_at_one(&s0, &ctx),
    ));
    for _ in 0..n {
        let x = theorem2_point(sm, spec)?;
        let y = sm.full_circle(0.5, 1.5);
        let inputs = json!({"spec": spec_json(spec), "x": cval(x)});
        let s = spec.clone();
        out.push(case("A_rho_relation", inputs.clone(), 1e-7, move || {
            verify_a_rho_relation(&s, x, &ctx)
        }));
        let s = spec.clone();
        out.push(case("A_ratio_relations", inputs.clone(), 1e-7, move || {
            Ok(verify_a_ratio_relations(&s, x, &ctx)?.into_iter().fold(0.0, f64::max))
        }));
        let s = spec.clone();
        out.push(case("rho_functional_eq", inputs.clone(), 1e-7, move || {
            verify_rho_functional_equation(&s, x, &ctx)
        }));
        let s = spec.clone();
        out.push(case("rho_integral_match", inputs.clone(), 1e-7, move || {
            let ri = rho_via_integral(&s, x, &ctx)?;
            let classes = find_rhos(&s, x, &ctx)?;
            Ok(pair_mismatch(&s, x, ri.rho.rep, &classes, &ctx).max(ri.quotient_residual))
        }));
        let s = spec.clone();
        out.push(case(
            "bailey_symmetry",
            json!({"spec": spec_json(spec), "x": cval(x), "y": cval(y)}),
            1e-10,
            move || verify_bailey_symmetry(&s, x, y, &ctx),
        ));
        let s = spec.clone();
        out.push(case("bailey_zero_set", inputs, 1e-7, move || {
            bailey_zero_set_residual(&s, x, &ctx)
        }));
    }
    Ok(())
}

fn wspec_point(sm: &mut Sampler, r: usize, lo: f64, hi: f64) -> Result<WSpec> {
    let q = sm.ctx.q();
    sm.draw("W parameters", |s| {
        let a: Vec<C64> = (0..r - 2).map(|_| s.complex(lo, hi, 0.6)).collect();
        let mut f = Vec::new();
        for i in 0..a.len() {
            f.push(s.ctx.sqrt_q() / a[i]);
            for j in i + 1..a.len() {
                f.push(q / (a[i] * a[j]));
            }
        }
        let w = WSpec::new(a).ok()?;
        f.push(w.argument(&s.ctx));
        (s.factors_clear(&f) && w.argument(&s.ctx).norm() < 0.7).then_some(w)
    })
}

/// A point `y` where every `(spec, map(y))` pair is off the pole lattices and
/// well conditioned.
/// The conditioning test is skipped for `r = 3, 4`, where `W*` vanishes.
fn w_point(sm: &mut Sampler, uses: impl Fn(C64) -> Vec<(WSpec, C64)>) -> Result<C64> {
    sm.draw("W sample point", |s| {
        let y = s.band_point();
        let pts = uses(y);
        let ok = pts.iter().all(|(w, v)| w_point_clear(s, w, *v))
            && well_conditioned(
                pts.iter()
                    .filter(|(w, _)| w.r() > 4)
                    .map(|(w, v)| w_cond(w, *v, &s.ctx)),
            );
        ok.then_some(y)
    })
}

fn vwp_cases(sm: &mut Sampler, n: usize, out: &mut Vec<Case>) -> Result<()> {
    let ctx = sm.ctx;
    for (r, id, lo, hi) in [(3, "w3_vanishing", 2.5, 4.0), (4, "w4_vanishing", 1.8, 3.0)] {
        for _ in 0..n {
            let w = wspec_point(sm, r, lo, hi)?;
            let y = w_point(sm, |y| vec![(w.clone(), y)])?;
            let inputs = json!({"a": clist(w.a()), "y": cval(y)});
            out.push(case(id, inputs, 1e-10, move || w_vanishing_residual(&w, y, &ctx)));
        }
    }
    for _ in 0..n {
        let w = wspec_point(sm, 6, 1.3, 2.2)?;
        let y = w_point(sm, |y| vec![(w.clone(), y), (w.clone(), y.inv())])?;
        let y2 = w_point(sm, |y| vec![(w.clone(), y)])?;
        let inputs = json!({"a": clist(w.a()), "y": cval(y)});
        let w1 = w.clone();
        out.push(case(
            "w6_constancy",
            json!({"a": clist(w.a()), "y": [cval(y), cval(y2)]}),
            1e-9,
            move || w6_constancy(&w1, &[y, y2], &ctx),
        ));
        let w1 = w.clone();
        out.push(case("w6_product", inputs.clone(), 1e-9, move || {
            w6_residual(&w1, y, &ctx)
        }));
        out.push(case("w_reflection", inputs.clone(), 1e-9, move || {
            w_reflection_residual(&w, y, &ctx)
        }));
    }
    for _ in 0..n {
        let w = wspec_point(sm, 5, 1.3, 2.2)?;
        let mut up = w.a().to_vec();
        up.push(ctx.sqrt_q());
        let upper = WSpec::new(up)?;
        let q = ctx.q();
        let y = w_point(sm, |y| vec![(w.clone(), y), (w.clone(), q * y), (upper.clone(), y)])?;
        let inputs = json!({"a": clist(w.a()), "y": cval(y)});
        let w1 = w.clone();
        out.push(case("sqrt_q_reduction", inputs.clone(), 1e-9, move || {
            sqrt_q_reduction_residual(&w1, y, &ctx)
        }));
        let w1 = w.clone();
        out.push(case("w5_product", inputs.clone(), 1e-9, move || {
            w5_residual(&w1, y, &ctx)
        }));
        out.push(case("w_quasi_periodicity", inputs, 1e-9, move || {
            w_quasi_periodic_residual(&w, y, &ctx)
        }));
    }
    for _ in 0..n {
        let w = wspec_point(sm, 8, 1.2, 2.0)?;
        out.push(case("w8_fit", json!({"a": clist(w.a())}), 1e-8, move || {
            let f = fit_w_theta2(&w, &ctx)?;
            Ok(f.residual.max(f.pair_mismatch))
        }));
    }
    Ok(())
}

/// `k` nodes with moduli log-uniform in `[0.5, 1.8]` and well separated modulo `q`.
fn nodes(sm: &mut Sampler, k: usize, avoid: &[C64]) -> Result<Vec<C64>> {
    nodes_in(sm, k, avoid, (0.5, 1.8))
}

fn band_nodes(sm: &mut Sampler, k: usize, avoid: &[C64]) -> Result<Vec<C64>> {
    let band = sm.band();
    nodes_in(sm, k, avoid, band)
}

fn nodes_in(sm: &mut Sampler, k: usize, avoid: &[C64], (lo, hi): (f64, f64)) -> Result<Vec<C64>> {
    sm.draw("interpolation nodes", |s| {
        let zs: Vec<C64> = (0..k).map(|_| s.full_circle(lo, hi)).collect();
        let mut all = zs.clone();
        all.extend_from_slice(avoid);
        nodes_admissible(&all, 1e-2, &s.ctx).then_some(zs)
    })
}

fn slater_cases(sm: &mut Sampler, n: usize, spec2: &SeriesSpec, out: &mut Vec<Case>) -> Result<()> {
    let ctx = sm.ctx;
    for _ in 0..n {
        let (x, zs, y) = sm.draw("Slater point", |s| {
            let x = annulus_point(s, spec2, 0.8, std::f64::consts::PI);
            let zs = band_nodes(s, 2, &[]).ok()?;
            let y = band_nodes(s, 1, &zs).ok()?[0];
            let pts = [y, zs[0], zs[1]];
            well_conditioned(pts.iter().map(|&v| psi_cond(spec2, x, v, &s.ctx))).then_some((x, zs, y))
        })?;
        let s = spec2.clone();
        out.push(case(
            "slater_general_r2",
            json!({"spec": spec_json(spec2), "x": cval(x), "y": cval(y), "nodes": clist(&zs)}),
            1e-9,
            move || slater_general_check(&s, x, y, &zs, &ctx),
        ));
    }
    for (r, id, tol) in [
        (8, "slater_vwp_r8", 1e-8),
        (5, "slater_vwp_r5", 1e-8),
        (6, "slater_vwp_r6", 1e-8),
    ] {
        let k = if r % 2 == 0 { (r - 4) / 2 } else { (r - 3) / 2 };
        for _ in 0..n {
            let w = wspec_point(sm, r, 1.2, 2.2)?;
            let sq = ctx.sqrt_q();
            let zs = sm.draw("W nodes", |s| {
                let zs = band_nodes(s, k, &[ONE, sq]).ok()?;
                let clear = zs.iter().all(|&z| w_point_clear(s, &w, z))
                    && well_conditioned(zs.iter().map(|&z| w_cond(&w, z, &s.ctx)));
                clear.then_some(zs)
            })?;
            let y = sm.draw("W target", |s| {
                let y = band_nodes(s, 1, &zs).ok()?[0];
                (w_point_clear(s, &w, y) && w_cond(&w, y, &s.ctx) <= COND_GUARD).then_some(y)
            })?;
            out.push(case(
                id,
                json!({"a": clist(w.a()), "y": cval(y), "nodes": clist(&zs)}),
                tol,
                move || slater_vwp_check(&w, y, &zs, &ctx),
            ));
        }
    }
    Ok(())
}

fn w_point_clear(s: &Sampler, w: &WSpec, y: C64) -> bool {
    let mut z = vec![y * y, y * s.ctx.sqrt_q()];
    for &a in w.a() {
        z.push(a * y);
        z.push(a / y);
    }
    s.thetas_clear(&z)
}

fn wronskian_cases(sm: &mut Sampler, n: usize, spec2: &SeriesSpec, out: &mut Vec<Case>) -> Result<()> {
    let ctx = sm.ctx;
    let q = ctx.q();
    for _ in 0..n {
        let (x, y, z) = sm.draw("Wronskian triple", |s| {
            let x = annulus_point(s, spec2, 0.8, std::f64::consts::PI);
            let y = s.band_point();
            let z = s.band_point();
            let c = spec2.a_product() * x;
            let ok = s.thetas_clear(&[y / z, x / y, x / z, c * y * z, q * x / y, q * x / z])
                && s.factors_clear(&[q * x, spec2.balance() / x]);
            (ok && triple_conditioned(spec2, x, y, z, &s.ctx)).then_some((x, y, z))
        })?;
        let inputs = json!({"spec": spec_json(spec2), "x": cval(x), "y": cval(y), "z": cval(z)});
        let s = spec2.clone();
        out.push(case("wronskian2_closed_form", inputs.clone(), 1e-9, move || {
            Ok(rel(
                wronskian2(&s, x, y, z, &ctx)?,
                wronskian2_closed_form(&s, x, y, z, &ctx)?,
            ))
        }));
        let s = spec2.clone();
        out.push(case("bracket_closed_form", inputs.clone(), 1e-9, move || {
            Ok(rel(
                bracket(&s, x, y, z, &ctx)?,
                bracket_closed_form(&s, x, y, z, &ctx)?,
            ))
        }));
        let s = spec2.clone();
        out.push(case("three_term", inputs.clone(), 1e-9, move || {
            three_term_residual(&s, x, y, &ctx)
        }));
        let s = spec2.clone();
        out.push(case("half_period", inputs.clone(), 1e-8, move || {
            half_period_residual(&s, x, y, &ctx)
        }));
        let s = spec2.clone();
        out.push(case("weierstrass_form", inputs, 1e-9, move || {
            let r0 = find_rhos(&s, x, &ctx)?[0].rep;
            let r1 = find_rhos(&s, q * x, &ctx)?[0].rep;
            weierstrass_residual(&s, x, r0, r1, y, z, &ctx)
        }));
    }
    for (spec, id) in [(spec2.clone(), "gustafson_r2"), (default_spec3(), "gustafson_r3")] {
        let r = spec.r();
        for _ in 0..n {
            let x = sm.draw("Gustafson point", |s| {
                let x = s.full_circle(0.1, 0.4);
                let mut f = vec![spec.balance() / x];
                for j in 1..r as i64 {
                    f.push(x * s.ctx.qpow(j));
                    f.push(spec.balance() / (x * s.ctx.qpow(j)));
                }
                s.factors_clear(&f).then_some(x)
            })?;
            let ys = sm.draw("Gustafson nodes", |s| {
                let ys = band_nodes(s, r, &[]).ok()?;
                let ay: C64 = spec.a().iter().zip(&ys).map(|(&a, &y)| a * y).product();
                let rows = ys
                    .iter()
                    .map(|&y| {
                        (0..r)
                            .map(|j| {
                                Ok(y.powi(j as i32) * psi_star_extended(&spec, x * s.ctx.qpow(j as i64), y, &s.ctx)?)
                            })
                            .collect::<Result<Vec<C64>>>()
                    })
                    .collect::<Result<Vec<_>>>()
                    .ok()?;
                (s.thetas_clear(&[ay * x]) && hadamard(&rows) <= COND_GUARD).then_some(ys)
            })?;
            let s = spec.clone();
            out.push(case(
                id,
                json!({"spec": spec_json(&spec), "x": cval(x), "y": clist(&ys)}),
                1e-8,
                move || Ok(rel(gustafson_ratio(&s, x, &ys, &ctx)?, gustafson_value(&s, &ctx)?)),
            ));
        }
    }
    for (spec, id, tol) in [
        (spec2.clone(), "qwronskian_step_n2", 1e-9),
        (default_spec3(), "qwronskian_step_n3", 1e-9),
    ] {
        let r = spec.r();
        for _ in 0..n {
            let (x, ys) = sm.draw("q-Wronskian point", |s| {
                let x = s.full_circle(0.15, 0.4);
                let ys = band_nodes(s, r, &[]).ok()?;
                let (fs, _) = theta_solution_system(&spec, &ys, s.ctx);
                let vals = fs
                    .iter()
                    .map(|f| {
                        (0..=r)
                            .map(|m| f.eval(x * s.ctx.qpow(m as i64)))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()
                    .ok()?;
                let at_x: Vec<Vec<C64>> = vals.iter().map(|v| v[..r].to_vec()).collect();
                let at_qx: Vec<Vec<C64>> = vals.iter().map(|v| v[1..].to_vec()).collect();
                well_conditioned([hadamard(&at_x), hadamard(&at_qx)]).then_some((x, ys))
            })?;
            let s = spec.clone();
            out.push(case(
                id,
                json!({"spec": spec_json(&spec), "x": cval(x), "y": clist(&ys)}),
                tol,
                move || {
                    let (fs, cs) = theta_solution_system(&s, &ys, ctx);
                    qwronskian_step_check(&fs, &cs, x, &ctx)
                },
            ));
        }
    }
    Ok(())
}

/// Cancellation in the Wronskian and bracket differences, and in the four series.
fn triple_conditioned(spec: &SeriesSpec, x: C64, y: C64, z: C64, ctx: &QContext) -> bool {
    let qx = ctx.q() * x;
    let p = |u: C64, v: C64| psi_star_extended(spec, u, v, ctx);
    let t = |u: C64| theta(u, ctx);
    let terms = (|| -> Result<[C64; 4]> {
        let (pxy, pxz, pqy, pqz) = (p(x, y)?, p(x, z)?, p(qx, y)?, p(qx, z)?);
        let w1 = t(qx / y)? * pqy * t(x / z)? * pxz;
        let w2 = t(x / y)? * pxy * t(qx / z)? * pqz;
        Ok([w1, -w2, z * pxy * pqz, -y * pqy * pxz])
    })();
    let Ok([w1, w2, b1, b2]) = terms else {
        return false;
    };
    let series = [(x, y), (x, z), (qx, y), (qx, z)].map(|(u, v)| psi_cond(spec, u, v, ctx));
    well_conditioned(
        [cancellation(&[w1, w2]), cancellation(&[b1, b2])]
            .into_iter()
            .chain(series),
    )
}

fn elliptic_cases(sm: &mut Sampler, n: usize, out: &mut Vec<Case>) -> Result<()> {
    let ctx = sm.ctx;
    let consts = InversionConstants::new(&ctx)?;
    let branch = consts.branch_points_u();
    for _ in 0..n {
        let y = sm.draw("inversion target", |s| {
            let y = s.full_circle(0.1, 3.0);
            branch
                .iter()
                .all(|&b| (y - b).norm() > 0.05 * b.norm().max(1.0) && (y - b).norm() > BRANCH_CLEARANCE)
                .then_some(y)
        })?;
        out.push(case("jacobi_round_trip", json!({"y": cval(y)}), 1e-8, move || {
            let x = jacobi_inverse(y, &ctx)?;
            Ok(rel(theta_quotient(x, &ctx)?, y))
        }));
        out.push(case("solution_set", json!({"y": cval(y)}), 1e-9, move || {
            let x0 = jacobi_inverse(y, &ctx)?;
            let base = theta_quotient(x0, &ctx)?;
            let mut worst = 0.0f64;
            for k in -1..=1i64 {
                let qk = ctx.qpow(k);
                worst = worst.max(rel(theta_quotient(qk * x0, &ctx)?, base));
                worst = worst.max(rel(theta_quotient(qk / x0, &ctx)?, base));
            }
            Ok(worst)
        }));
    }
    Ok(())
}

fn thetaspace_cases(sm: &mut Sampler, n: usize, spec2: &SeriesSpec, out: &mut Vec<Case>) -> Result<()> {
    let ctx = sm.ctx;
    for i in 0..n {
        let deg = 1 + i % 3;
        let alphas: Vec<C64> = (0..deg).map(|_| sm.full_circle(0.5, 2.0)).collect();
        let xs = nodes(sm, 6, &[])?;
        let c: C64 = alphas.iter().product();
        let f = SampledFunction::theta_product(alphas.clone(), ctx);
        out.push(case(
            "theta_membership",
            json!({"alphas": clist(&alphas), "x": clist(&xs)}),
            1e-10,
            move || theta_space_residual(&f, ThetaSpaceTag::new(deg as i32, c)?, &xs, &ctx),
        ));
    }
    for _ in 0..n {
        let x0 = annulus_point(sm, spec2, 0.8, std::f64::consts::PI);
        let xs = nodes(sm, 6, &[])?;
        let s = spec2.clone();
        out.push(case(
            "psi_star_membership",
            json!({"spec": spec_json(spec2), "x": cval(x0), "y": clist(&xs)}),
            1e-9,
            move || {
                let g = SampledFunction::psi_star_in_y(s.clone(), x0, ctx);
                theta_space_residual(&g, ThetaSpaceTag::new(2, s.a_product() * x0)?, &xs, &ctx)
            },
        ));
    }
    for _ in 0..n {
        let c = sm.full_circle(0.6, 1.6);
        let al = sm.full_circle(0.6, 1.6);
        let xs = nodes(sm, 6, &[])?;
        let f = SampledFunction::theta_product(vec![al, c / al], ctx);
        out.push(case(
            "theta2_reflection",
            json!({"c": cval(c), "alpha": cval(al), "x": clist(&xs)}),
            1e-10,
            move || reflection_residual(&f, c, 1.0, &xs, &ctx),
        ));
    }
    for _ in 0..n {
        let c = sm.full_circle(0.6, 1.6);
        let g1 = sm.full_circle(0.6, 1.6);
        let g2 = sm.full_circle(0.6, 1.6);
        let (zs, xs) = sm.draw("Ω nodes", |s| {
            let zs = nodes(s, 3, &[]).ok()?;
            // the ω basis divides by θ(c z_j z_k)
            let mut pairs = Vec::new();
            for j in 0..3 {
                for k in j + 1..3 {
                    pairs.push(c * zs[j] * zs[k]);
                }
            }
            let xs = nodes(s, 4, &zs).ok()?;
            s.thetas_clear(&pairs).then_some((zs, xs))
        })?;
        let g = SampledFunction::theta_product(vec![g1, g2], ctx);
        let f = reflected_product(&g, c, ctx);
        out.push(case(
            "omega_expansion",
            json!({"c": cval(c), "g": clist(&[g1, g2]), "nodes": clist(&zs), "x": clist(&xs)}),
            1e-9,
            move || omega_expansion_residual(&f, &zs, c, &xs, &ctx),
        ));
    }
    for _ in 0..n {
        let c = sm.full_circle(0.6, 1.6);
        let al = sm.full_circle(0.6, 1.6);
        let xs = nodes(sm, 6, &[])?;
        let h = SampledFunction::theta_product(vec![al, c / al], ctx);
        let lifted = odd_omega_lift(&h, c, ctx);
        out.push(case(
            "omega_sign_lemma",
            json!({"c": cval(c), "alpha": cval(al), "x": clist(&xs)}),
            1e-10,
            move || reflection_residual(&lifted, c, -1.0, &xs, &ctx),
        ));
    }
    for i in 0..n {
        let deg = 2 + i % 2;
        let c = sm.full_circle(0.8, 1.4);
        let members: Vec<SampledFunction> = (0..=deg)
            .map(|_| {
                let mut alphas: Vec<C64> = (0..deg - 1).map(|_| sm.full_circle(0.6, 1.6)).collect();
                let p: C64 = alphas.iter().product();
                alphas.push(c / p);
                SampledFunction::theta_product(alphas, ctx)
            })
            .collect();
        let zs = nodes(sm, deg + 1, &[])?;
        out.push(case(
            "dimension_gap",
            json!({"n": deg, "c": cval(c), "nodes": clist(&zs)}),
            1e-8,
            move || sample_conditioning(&members, &zs),
        ));
    }
    for _ in 0..n {
        let c = sm.full_circle(0.8, 1.4);
        let (al, be) = (sm.full_circle(0.6, 1.6), sm.full_circle(0.6, 1.6));
        let xa = nodes(sm, 2, &[])?;
        let xb = nodes(sm, 2, &[])?;
        let fs = [
            SampledFunction::theta_product(vec![al, c / al], ctx),
            SampledFunction::theta_product(vec![be, c / be], ctx),
        ];
        out.push(case(
            "theta_det_ratio",
            json!({"c": cval(c), "alpha": [cval(al), cval(be)], "nodes": [clist(&xa), clist(&xb)]}),
            1e-8,
            move || theta_det_ratio(&fs, [&xa, &xb], c, &ctx),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let q = C64::new(0.5, 0.0);
        assert!(SuiteConfig::new(Suite::Classical, q, 1, 0).is_err());
        let c = SuiteConfig::new(Suite::Classical, q, 1, 1).unwrap();
        assert!(c.clone().with_tolerance_scale(1e3).is_err());
        assert!(c.with_tolerance_scale(0.5).is_ok());
        assert!(SuiteConfig::new(Suite::Classical, C64::new(1.0, 0.0), 1, 1).is_err());
        assert_eq!("theorem2".parse::<Suite>().unwrap(), Suite::Theorem2);
        assert!("bogus".parse::<Suite>().is_err());
    }

    #[test]
    fn complex_parsing() {
        assert_eq!(parse_complex("0.3+0.2i").unwrap(), C64::new(0.3, 0.2));
        assert_eq!(parse_complex("-1e-3-2.5e+1i").unwrap(), C64::new(-1e-3, -25.0));
        assert_eq!(parse_complex("0.5").unwrap(), C64::new(0.5, 0.0));
        assert_eq!(parse_complex("-i").unwrap(), C64::new(0.0, -1.0));
        assert_eq!(parse_complex("2i").unwrap(), C64::new(0.0, 2.0));
        assert!(parse_complex("0.3 + 0.2i").is_err());
        assert!(parse_complex("abc").is_err());
        assert_eq!(fmt_complex15(C64::new(1.0, -0.25)), "1-0.25i");
        assert_eq!(fmt_complex15(C64::new(1.0 / 3.0, 0.0)), "0.333333333333333+0i");
        assert_eq!(fmt_sig15(1.5e-20), "1.5e-20");
        for z in [C64::new(0.1, -7.25e9), C64::new(-3.0, 1e-12)] {
            assert_eq!(parse_complex(&fmt_complex(z)).unwrap(), z);
        }
    }

    #[test]
    fn complex_tokens() {
        assert_eq!(fmt_complex(C64::new(0.5, 0.0)), "0.5+0i");
        assert_eq!(fmt_complex(C64::new(0.3, -0.2)), "0.3-0.2i");
    }

    #[test]
    fn classical_suite_is_deterministic() {
        let c = SuiteConfig::new(Suite::Classical, C64::new(0.5, 0.0), 7, 5).unwrap();
        let a = run_suite(&c, false).unwrap();
        let b = run_suite(&c, false).unwrap();
        assert_eq!(a.to_ndjson(), b.to_ndjson());
        assert!(a.all_pass(), "{}", a.to_ndjson());
        assert_eq!(a.summary(), "PASS 15/15");
    }
}
