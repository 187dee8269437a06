//! Scheduling and execution of check instances.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{CheckKind, PreparedPair, RunConfig};
use crate::bounds::{
    appendix_sup_constant, eq17_audit, eq25_constant, gaussian_section5_bounds, kappa_power_exponential,
    pinsker_report, verify_corollary, BoundReport, KappaSource, Verdict, AUDITED_CLAIM,
};
use crate::densities::DensityModel;
use crate::error::{Error, Result};
use crate::metrics::{generalized_fisher_distance, l1_distance};
use crate::quadrature::{expectation_with, Tolerances};
use crate::stein::{characterization_residual, fundamental_identity_residual, stein_identity_residual, TestFunction};

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "STEIN_AUDIT_THREADS";

/// One row of the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub pair_id: String,
    pub check: String,
    pub metric: String,
    pub lhs: f64,
    pub kappa: Option<f64>,
    pub kappa_source: String,
    #[serde(rename = "sqrtJ")]
    pub sqrt_j: Option<f64>,
    pub rhs: f64,
    pub slack: f64,
    pub verdict: Verdict,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Passed,
    Failed,
    AuditedViolation,
    Skipped,
}

impl Record {
    fn from_bound(pair_id: &str, check: CheckKind, b: BoundReport) -> Self {
        Self {
            pair_id: pair_id.into(),
            check: check.id().into(),
            metric: b.metric_id,
            lhs: b.lhs,
            kappa: Some(b.kappa),
            kappa_source: b.kappa_source.id().into(),
            sqrt_j: Some(b.sqrt_j),
            rhs: b.rhs,
            slack: b.slack,
            verdict: b.verdict,
            flags: b.flags,
        }
    }

    /// `|residual| ≤ tol`, stored as `lhs = |residual|`, `rhs = tol`.
    fn residual(pair_id: &str, check: CheckKind, metric: String, residual: f64, tol: f64) -> Self {
        let verdict = if !residual.is_finite() {
            Verdict::Error
        } else if residual <= tol {
            Verdict::Holds
        } else {
            Verdict::Violated
        };
        Self {
            pair_id: pair_id.into(),
            check: check.id().into(),
            metric,
            lhs: residual,
            kappa: None,
            kappa_source: String::new(),
            sqrt_j: None,
            rhs: tol,
            slack: tol - residual,
            verdict,
            flags: if residual.is_finite() { Vec::new() } else { vec!["error:non_finite_residual".into()] },
        }
    }

    fn skipped(pair_id: &str, check: CheckKind, metric: &str, reason: &str) -> Self {
        Self {
            pair_id: pair_id.into(),
            check: check.id().into(),
            metric: metric.into(),
            lhs: f64::NAN,
            kappa: None,
            kappa_source: String::new(),
            sqrt_j: None,
            rhs: f64::NAN,
            slack: f64::NAN,
            verdict: Verdict::NotApplicable,
            flags: vec![format!("skipped:{reason}")],
        }
    }

    fn failed(pair_id: &str, check: CheckKind, metric: &str, err: &Error) -> Self {
        let mut r = Self::skipped(pair_id, check, metric, "");
        r.verdict = Verdict::Error;
        r.flags = vec![format!("error:{err}")];
        r
    }

    pub fn is_audited(&self) -> bool {
        self.flags.iter().any(|f| f == AUDITED_CLAIM)
    }

    pub fn outcome(&self) -> Outcome {
        match self.verdict {
            Verdict::Holds => Outcome::Passed,
            Verdict::Violated if self.is_audited() => Outcome::AuditedViolation,
            Verdict::Violated | Verdict::Error => Outcome::Failed,
            Verdict::NotFinite | Verdict::NotApplicable => Outcome::Skipped,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CheckCounts {
    pub passed: usize,
    pub failed: usize,
    pub audited_violations: usize,
    pub skipped: usize,
}

impl CheckCounts {
    fn add(&mut self, o: Outcome) {
        match o {
            Outcome::Passed => self.passed += 1,
            Outcome::Failed => self.failed += 1,
            Outcome::AuditedViolation => self.audited_violations += 1,
            Outcome::Skipped => self.skipped += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.passed + self.failed + self.audited_violations + self.skipped
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub checks: BTreeMap<String, CheckCounts>,
    pub total: CheckCounts,
    pub scheduled: usize,
    /// Largest residual per identity check.
    pub worst_residual: BTreeMap<String, f64>,
    /// Smallest slack per bound check.
    pub min_slack: BTreeMap<String, f64>,
    /// Not serialized, so report bodies stay reproducible.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunSummary {
    pub fn from_records(records: &[Record], wall_time: Duration) -> Self {
        let mut checks: BTreeMap<String, CheckCounts> = BTreeMap::new();
        let mut total = CheckCounts::default();
        let mut worst_residual: BTreeMap<String, f64> = BTreeMap::new();
        let mut min_slack: BTreeMap<String, f64> = BTreeMap::new();
        for r in records {
            let o = r.outcome();
            checks.entry(r.check.clone()).or_default().add(o);
            total.add(o);
            if matches!(o, Outcome::Skipped) || r.verdict == Verdict::Error {
                continue;
            }
            if r.kappa.is_none() {
                let w = worst_residual.entry(r.check.clone()).or_insert(0.0);
                *w = w.max(r.lhs);
            } else {
                let s = min_slack.entry(r.check.clone()).or_insert(f64::INFINITY);
                *s = s.min(r.slack);
            }
        }
        Self {
            checks,
            total,
            scheduled: records.len(),
            worst_residual,
            min_slack,
            wall_time,
        }
    }

    /// 0 on success, 2 when an asserted check failed, or when `strict` and
    /// an audited claim was violated.
    pub fn exit_code(&self, strict: bool) -> i32 {
        if self.total.failed > 0 || (strict && self.total.audited_violations > 0) {
            2
        } else {
            0
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<Record>,
    pub summary: RunSummary,
}

/// Validates, schedules and runs every (pair, check) instance. Results are
/// ordered by pair, then by the fixed check order, whatever the schedule.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    let start = Instant::now();
    let pairs = config.prepare()?;
    let checks = config.ordered_checks();
    let ctx = Context {
        config,
        l_family: config.l_functions()?,
        f_family: config.f_functions()?,
        h: config.h_function()?,
    };
    let tasks: Vec<(&PreparedPair, CheckKind)> =
        pairs.iter().flat_map(|p| checks.iter().map(move |&c| (p, c))).collect();

    let pool = thread_pool()?;
    let records: Vec<Record> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(pair, check)| ctx.run_check(pair, check))
            .collect::<Vec<Vec<Record>>>()
            .into_iter()
            .flatten()
            .collect()
    });
    let summary = RunSummary::from_records(&records, start.elapsed());
    Ok(RunOutput { records, summary })
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(Error::Config(format!("{THREADS_ENV} must be positive")));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(e.to_string()))
}

struct Context<'a> {
    config: &'a RunConfig,
    l_family: Vec<TestFunction>,
    f_family: Vec<TestFunction>,
    h: TestFunction,
}

/// A machine-readable reason for errors that mean "does not apply".
fn skip_reason(e: &Error) -> Option<&'static str> {
    match e {
        Error::SupportMismatch { .. } => Some("support_mismatch"),
        Error::NotPowerExponential => Some("not_power_exponential"),
        Error::NonFiniteMoments => Some("non_finite_moments"),
        Error::NotCentered { .. } => Some("h_not_centered"),
        Error::NonConvergence { value, .. } if value.is_infinite() => Some("infinite_fisher_information"),
        _ => None,
    }
}

fn error_record(pair: &PreparedPair, check: CheckKind, metric: &str, e: &Error) -> Record {
    match skip_reason(e) {
        Some(reason) => Record::skipped(&pair.id, check, metric, reason),
        None => Record::failed(&pair.id, check, metric, e),
    }
}

fn mark_infinite(mut r: Record) -> Record {
    if r.verdict == Verdict::NotFinite {
        r.flags.push("skipped:infinite_constant".into());
    }
    r
}

impl Context<'_> {
    fn run_check(&self, pair: &PreparedPair, check: CheckKind) -> Vec<Record> {
        let (p, q, id) = (&pair.target, &pair.q, pair.id.as_str());
        let tol = &self.config.tolerances;
        let bounds = |res: Result<Vec<BoundReport>>, metric: &str| match res {
            Ok(v) => v
                .into_iter()
                .map(|b| mark_infinite(Record::from_bound(id, check, b)))
                .collect(),
            Err(e) => vec![error_record(pair, check, metric, &e)],
        };
        match check {
            CheckKind::Characterization => self
                .config
                .z_grid
                .points(p)
                .into_iter()
                .map(|z| {
                    let metric = format!("z={z}");
                    match characterization_residual(p, q, z) {
                        Ok(c) => Record::residual(id, check, metric, c.residual, tol.characterization),
                        Err(e) => error_record(pair, check, &metric, &e),
                    }
                })
                .collect(),
            CheckKind::Eq9 => self
                .f_family
                .iter()
                .map(|f| match stein_identity_residual(p, q, f) {
                    Ok(s) => member_gate(Record::residual(id, check, f.name.clone(), s.residual, tol.eq9), s.membership_warning),
                    Err(e) => error_record(pair, check, &f.name, &e),
                })
                .collect(),
            CheckKind::Fundeq => self
                .l_family
                .iter()
                .map(|l| match fundamental_identity_residual(p, q, l) {
                    Ok(s) => member_gate(Record::residual(id, check, l.name.clone(), s.residual, tol.fundeq), s.membership_warning),
                    Err(e) => error_record(pair, check, &l.name, &e),
                })
                .collect(),
            CheckKind::Corollary => bounds(verify_corollary(p, q), "all"),
            CheckKind::Section5 => match p.gaussian_params() {
                Some((mu0, var0)) => bounds(gaussian_section5_bounds(mu0, var0, q), "all"),
                None => vec![Record::skipped(id, check, "all", "target_not_gaussian")],
            },
            CheckKind::Eq17Audit => vec![self.eq17(pair)],
            CheckKind::Appendix => bounds(
                appendix_sup_constant(p, q)
                    .map(|c| vec![BoundReport::new("appendix_constant", c.value, 1.0, KappaSource::AppendixUnit, 1.0)]),
                "appendix_constant",
            ),
            CheckKind::Pinsker => bounds(pinsker_report(p, q).map(|r| vec![r]), "tv"),
            CheckKind::Eq25 => match p.gaussian_params() {
                Some((_, var0)) => bounds(eq25_report(p, q, var0.sqrt()).map(|r| vec![r]), "l1"),
                None => vec![Record::skipped(id, check, "l1", "target_not_gaussian")],
            },
        }
    }

    fn eq17(&self, pair: &PreparedPair) -> Record {
        let check = CheckKind::Eq17Audit;
        let metric = format!("rms({})", self.h.name);
        let p = &pair.target;
        let result = (|| {
            let pe = p.centered_power_exponential().ok_or(Error::NotPowerExponential)?;
            let alpha = pe.power_exponential_params().map_or(f64::NAN, |x| x.alpha);
            let h = centered(&pe, &self.h)?;
            let a = eq17_audit(&pe, &pair.q, &h)?;
            let mut b = BoundReport::new(&metric, a.measured_rms, kappa_power_exponential(alpha, a.h_sup_norm), KappaSource::PowerExp, 1.0);
            b.flags.push(AUDITED_CLAIM.into());
            b.flags.push(format!("ratio={}", a.ratio));
            b.flags.push(format!("h_sup_norm={}", a.h_sup_norm));
            Ok::<_, Error>(b)
        })();
        match result {
            Ok(b) => Record::from_bound(&pair.id, check, b),
            Err(e) => error_record(pair, check, &metric, &e),
        }
    }
}

fn member_gate(mut r: Record, warning: Option<String>) -> Record {
    if let Some(w) = warning {
        r.verdict = Verdict::NotApplicable;
        r.flags.push("skipped:not_in_test_class".into());
        r.flags.push(w);
    }
    r
}

/// `h − E_p[h]`.
fn centered(p: &DensityModel, h: &TestFunction) -> Result<TestFunction> {
    let m = expectation_with(p, |x| h.eval(x), &h.breakpoints, &Tolerances::tight())?
        .require_converged()?
        .value;
    if m.abs() <= 1e-12 {
        return Ok(h.clone());
    }
    let inner = h.clone();
    Ok(TestFunction::new(format!("{}-E[{}]", h.name, h.name), move |x| inner.eval(x) - m)
        .with_breakpoints(h.breakpoints.clone()))
}

/// `∫|p − q| ≤ √2·σ₀·√J` for a Gaussian target, the standardized form.
fn eq25_report(p: &DensityModel, q: &DensityModel, sigma0: f64) -> Result<BoundReport> {
    let sqrt_j = generalized_fisher_distance(p, q)?.sqrt();
    let mut b = BoundReport::new("l1", l1_distance(p, q)?, eq25_constant(), KappaSource::GaussianL1, sigma0 * sqrt_j);
    if sigma0 != 1.0 {
        b.flags.push("standardized".into());
    }
    Ok(b)
}
