//! Subcommand bodies. Each returns an [`Outcome`]: the JSON result embedded
//! in the report, flat rows for CSV output, and the pass/fail verdict.

use anyhow::{anyhow, bail, Context, Result};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use modsum_core::attacks::{
    run_attack, secrecy_audit, wilson_interval, AttackKind, AttackMode, AttackParams, AttackSpec, AuditBundle,
    AuditProtocol,
};
use modsum_core::channel::{Behavior, Transcript};
use modsum_core::field::{ExtFieldSpec, Field, FieldVector};
use modsum_core::mzsr::{ideal_mzsr, quantum_mzsr, ring_mzsr_random, ZeroSumBundle};
use modsum_core::protocols::{
    anon_auth_basic, anon_auth_secure, derive_mac_params, homomorphic_compute, mzsr_via_secure_sum,
    secret_share_basic, secret_share_cheater_detect, secure_modulo_sum, AuthSetup, HomomorphicSpec, LinearMap,
};
use modsum_core::tape::seeded_rng;
use modsum_core::verification::{
    bell_selftest, selftest_player_j, trusted_device_verify, verifiable_secure_sum, SignConvention, Source,
    ThresholdSet, VerificationReport, DEFAULT_C1,
};
use modsum_core::Error as CoreError;

use crate::config::{indices, Params};

pub type Row = Map<String, Value>;

#[derive(Clone, Debug)]
pub struct Outcome {
    pub result: Value,
    pub rows: Vec<Row>,
    pub passed: bool,
}

impl Outcome {
    fn ok(result: Value, rows: Vec<Row>) -> Self {
        Self { result, rows, passed: true }
    }
}

fn row(v: Value) -> Row {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("rows are built from json objects"),
    }
}

fn digits(v: &FieldVector) -> String {
    v.values().iter().map(u32::to_string).collect::<Vec<_>>().join(",")
}

fn parse_row(field: &Field, text: &str) -> Result<FieldVector> {
    let vals = text
        .split(',')
        .map(|v| v.trim().parse::<u32>().with_context(|| format!("bad symbol {v:?}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(field.vector(vals)?)
}

fn parse_matrix(text: &str) -> Result<Vec<Vec<u32>>> {
    text.split(';')
        .map(|r| {
            r.split(',').map(|v| v.trim().parse::<u32>().with_context(|| format!("bad map entry {v:?}"))).collect()
        })
        .collect()
}

// ---------------------------------------------------------------- run-protocol

struct SingleRun {
    correct: bool,
    digest: String,
    detail: Value,
}

fn make_bundle(p: &Params, m: usize, field: &Field, c: usize, rng: &mut ChaCha8Rng) -> Result<ZeroSumBundle> {
    Ok(match p.generator.as_deref().unwrap_or("ideal") {
        "ideal" => ideal_mzsr(m, field, c, rng)?,
        "ring" => ring_mzsr_random(m, field, c, rng)?,
        "quantum" => quantum_mzsr(m, field, c, &p.noise(field, m)?, rng)?,
        "from-summation" => mzsr_via_secure_sum(m, field, c, rng)?.0,
        g => bail!("unknown generator {g} (ideal | ring | quantum | from-summation)"),
    })
}

fn random_inputs(field: &Field, m: usize, c: usize, rng: &mut ChaCha8Rng) -> Vec<FieldVector> {
    (0..m).map(|_| FieldVector::random(field, c, rng)).collect()
}

fn auth_setup(p: &Params, m: usize, field: &Field, d: usize, rng: &mut ChaCha8Rng) -> Result<AuthSetup> {
    let project = match &p.inputs {
        Some(t) => parse_row(field, t)?,
        None => FieldVector::random(field, d, rng),
    };
    if project.len() != d {
        bail!("project has {} symbols, expected d = {d}", project.len());
    }
    let mut setup = AuthSetup::unanimous(project.clone(), m);
    for i in indices(p.disapprove.as_deref())? {
        *setup.approve.get_mut(i - 1).ok_or_else(|| anyhow!("party {i} outside 1..={m}"))? = false;
    }
    let mut bump = vec![0; d];
    bump[0] = 1;
    let bump = field.vector(bump)?;
    for i in indices(p.mismatch.as_deref())? {
        *setup.recognized.get_mut(i - 1).ok_or_else(|| anyhow!("party {i} outside 1..={m}"))? = project.add(&bump)?;
    }
    Ok(setup)
}

fn transcript_digest(t: &Transcript) -> String {
    t.digest()
}

fn run_once(p: &Params, name: &str, stream: u64) -> Result<SingleRun> {
    let field = p.field()?;
    let m = p.m();
    let mut rng = seeded_rng(p.seed(), stream);
    match name {
        "secure-sum" | "homomorphic" => {
            let c = p.c();
            let inputs = match p.parsed_inputs(&field, m, c)? {
                Some(v) => v,
                None => random_inputs(&field, m, c, &mut rng),
            };
            let bundle = make_bundle(p, m, &field, c, &mut rng)?;
            let adv = p.adversary(Behavior::SemiHonest)?;
            let (run, expected) = if name == "secure-sum" {
                (secure_modulo_sum(&inputs, &bundle, &adv, &mut rng)?, FieldVector::sum(&inputs)?)
            } else {
                let map = match &p.map {
                    Some(t) => LinearMap::new(&field, parse_matrix(t)?)?,
                    None => LinearMap::identity(&field, c),
                };
                let ones = field.vector(vec![1; c])?;
                let spec = HomomorphicSpec::new(vec![ones; m], map)?;
                let expected = spec.evaluate(&inputs)?;
                (homomorphic_compute(&spec, &inputs, &bundle, &adv, &mut rng)?, expected)
            };
            let correct = run.outputs.iter().all(|o| *o == expected);
            Ok(SingleRun {
                correct,
                digest: transcript_digest(&run.transcript),
                detail: json!({
                    "inputs": inputs.iter().map(digits).collect::<Vec<_>>(),
                    "bundle": bundle.to_json(),
                    "expected": digits(&expected),
                    "outputs": run.outputs.iter().map(digits).collect::<Vec<_>>(),
                }),
            })
        }
        "secret-share" => {
            let c = p.c();
            let secret = match &p.inputs {
                Some(t) => parse_row(&field, t)?,
                None => FieldVector::random(&field, c, &mut rng),
            };
            let bundle = make_bundle(p, m, &field, c, &mut rng)?;
            let run = secret_share_basic(&secret, &bundle, &p.adversary(Behavior::SemiHonest)?, &mut rng)?;
            Ok(SingleRun {
                correct: run.reconstruction == secret,
                digest: transcript_digest(&run.transcript),
                detail: json!({
                    "secret": digits(&secret),
                    "bundle": bundle.to_json(),
                    "reconstruction": digits(&run.reconstruction),
                }),
            })
        }
        "cheater-detect" | "cheater-ss" => {
            let c = p.c();
            let ext = ExtFieldSpec::new(field.clone(), c)?;
            let secret = match &p.inputs {
                Some(t) => field.element(t.trim().parse().with_context(|| format!("bad secret {t:?}"))?)?,
                None => field.random_nonzero(&mut rng),
            };
            let bundle = make_bundle(p, m, &field, c, &mut rng)?;
            let run = secret_share_cheater_detect(&secret, &ext, &bundle, &p.adversary(Behavior::Modification)?, &mut rng)?;
            Ok(SingleRun {
                correct: run.outcome.is_accept_of(&secret),
                digest: transcript_digest(&run.transcript),
                detail: json!({
                    "secret": secret.value(),
                    "bundle": bundle.to_json(),
                    "reconstruction": run.outcome,
                }),
            })
        }
        "anon-auth" | "anon-auth-secure" => {
            let (e, d) = (p.e.unwrap_or(1), p.d.unwrap_or(1));
            let setup = auth_setup(p, m, &field, d, &mut rng)?;
            let bundle = make_bundle(p, m, &field, 2 * e + d - 1, &mut rng)?;
            let params = derive_mac_params(&bundle, e, d)?;
            let adv = p.adversary(Behavior::Rushing)?;
            let run = if name == "anon-auth" {
                anon_auth_basic(&setup, &params, &adv, None, &mut rng)?
            } else {
                anon_auth_secure(&setup, &params, &adv, None, &mut rng)?
            };
            let should_accept = setup.approve.iter().all(|&a| a) && setup.recognized.iter().all(|y| *y == setup.project);
            Ok(SingleRun {
                correct: run.accepted == should_accept,
                digest: transcript_digest(&run.transcript),
                detail: json!({
                    "project": digits(&setup.project),
                    "approve": setup.approve,
                    "recognized": setup.recognized.iter().map(digits).collect::<Vec<_>>(),
                    "accepted": run.accepted,
                    "expected_accept": should_accept,
                }),
            })
        }
        other => bail!(
            "unknown protocol {other} (secure-sum | homomorphic | secret-share | cheater-detect | anon-auth | anon-auth-secure)"
        ),
    }
}

pub fn run_protocol(p: &Params) -> Result<Outcome> {
    let name = p.name.as_deref().ok_or_else(|| anyhow!("run-protocol needs --name"))?;
    match p.repeat {
        None | Some(1) => {
            let run = run_once(p, name, 0)?;
            let mut result = json!({ "protocol": name, "correct": run.correct, "transcript_digest": run.digest });
            result.as_object_mut().expect("object").extend(run.detail.as_object().expect("object").clone());
            let r = row(json!({ "protocol": name, "correct": run.correct, "transcript_digest": run.digest }));
            Ok(Outcome::ok(result, vec![r]))
        }
        Some(0) => bail!("--repeat must be positive"),
        Some(n) => {
            let runs = (0..n).into_par_iter().map(|i| run_once(p, name, i)).collect::<Result<Vec<_>>>()?;
            let successes = runs.iter().filter(|r| r.correct).count() as u64;
            let (lo, hi) = wilson_interval(successes, n);
            let rate = successes as f64 / n as f64;
            let summary = json!({
                "protocol": name,
                "runs": n,
                "successes": successes,
                "rate": rate,
                "ci95_low": lo,
                "ci95_high": hi,
            });
            let mut result = summary.clone();
            result["ci95"] = json!([lo, hi]);
            Ok(Outcome::ok(result, vec![row(summary)]))
        }
    }
}

// ---------------------------------------------------------------- verify

fn thresholds(p: &Params) -> Result<ThresholdSet> {
    let signs = match p.signs.as_deref().unwrap_or("ideal") {
        "ideal" => SignConvention::IdealDerived,
        "literal" => SignConvention::Literal,
        s => bail!("unknown sign convention {s} (ideal | literal)"),
    };
    let mut th = ThresholdSet::new(p.c1.unwrap_or(DEFAULT_C1)).with_signs(signs);
    th.literal_bell_threshold = p.literal_bell.unwrap_or(false);
    Ok(th)
}

fn source(p: &Params, target: &str, field: &Field, m: usize) -> Result<Source> {
    let default = if target == "bell" { "bell" } else { "ghz" };
    Ok(match p.source.as_deref().unwrap_or(default) {
        "ghz" => Source::ghz(m, field, p.noise(field, m)?)?,
        "bell" => Source::bell(p.noise(&Field::prime(2)?, 2)?)?,
        "product" => Source::product_zero(m, field)?,
        "classical" => Source::deterministic(field, if target == "bell" { 2 } else { m }),
        s => bail!("unknown source {s} (ghz | bell | product | classical)"),
    })
}

fn check_rows(report: &VerificationReport, extra: &[(&str, Value)]) -> Vec<Row> {
    report
        .checks
        .iter()
        .map(|c| {
            let mut r = Row::new();
            for (k, v) in extra {
                r.insert((*k).into(), v.clone());
            }
            r.insert("check".into(), json!(c.name));
            r.insert("average".into(), json!(c.average));
            r.insert("threshold".into(), json!(c.threshold));
            r.insert("margin".into(), json!(c.margin));
            r.insert("pass".into(), json!(c.pass));
            r
        })
        .collect()
}

pub fn verify(p: &Params) -> Result<Outcome> {
    let target = p.name.as_deref().ok_or_else(|| anyhow!("verify needs --protocol"))?;
    let field = p.field()?;
    let m = p.m();
    let n = p.n.unwrap_or(100);
    let seed = p.seed();
    match target {
        "player-j" => {
            let src = source(p, target, &field, m)?;
            let out = selftest_player_j(&src, m, n, p.j.unwrap_or(1), &thresholds(p)?, seed)?;
            let mut result = out.report.to_json();
            result["bundle"] = out.bundle.map_or(Value::Null, |b| b.to_json());
            let rows = check_rows(&out.report, &[]);
            Ok(Outcome { result, rows, passed: out.report.passed })
        }
        "bell" => {
            let src = source(p, target, &field, 2)?;
            let report = bell_selftest(&src, n, &thresholds(p)?, seed)?;
            let rows = check_rows(&report, &[]);
            Ok(Outcome { result: report.to_json(), rows, passed: report.passed })
        }
        "trusted" => {
            let src = source(p, target, &field, m)?;
            let out = trusted_device_verify(&src, n, p.alpha.unwrap_or(0.05), seed)?;
            let mut result = out.report.to_json();
            result["bundle"] = out.bundle.map_or(Value::Null, |b| b.to_json());
            let extra: Vec<(&str, Value)> =
                out.report.diagnostics.iter().map(|(k, v)| (k.as_str(), json!(v))).collect();
            let rows = check_rows(&out.report, &extra);
            Ok(Outcome { result, rows, passed: out.report.passed })
        }
        "verifiable-sum" => {
            let src = source(p, target, &field, m)?;
            let inputs = match p.parsed_inputs(&field, m, 1)? {
                Some(v) => v,
                None => random_inputs(&field, m, 1, &mut seeded_rng(seed, 1)),
            };
            let run = verifiable_secure_sum(&inputs, &src, n, &thresholds(p)?, seed)?;
            let passed = run.reports.iter().all(|r| r.passed);
            let rows = run
                .reports
                .iter()
                .enumerate()
                .flat_map(|(i, r)| check_rows(r, &[("player", json!(i + 1))]))
                .collect();
            let result = json!({
                "protocol": "verifiable-sum",
                "passed": passed,
                "inputs": inputs.iter().map(digits).collect::<Vec<_>>(),
                "expected": digits(&FieldVector::sum(&inputs)?),
                "outputs": run.sum.as_ref().map(|s| s.outputs.iter().map(digits).collect::<Vec<_>>()),
                "transcript_digest": run.sum.as_ref().map(|s| s.transcript.digest()),
                "bundle": run.bundle.map(|b| b.to_json()),
                "reports": run.reports.iter().map(VerificationReport::to_json).collect::<Vec<_>>(),
            });
            Ok(Outcome { result, rows, passed })
        }
        t => bail!("unknown verification target {t} (player-j | bell | trusted | verifiable-sum)"),
    }
}

// ---------------------------------------------------------------- attack

pub fn attack(p: &Params) -> Result<Outcome> {
    let kind = AttackKind::parse(p.name.as_deref().ok_or_else(|| anyhow!("attack needs --name"))?)?;
    let d = AttackParams::default();
    let params = AttackParams {
        m: p.m.unwrap_or(d.m),
        q: p.field()?.order(),
        c: p.c.unwrap_or(d.c),
        e: p.e.unwrap_or(d.e),
        d: p.d.unwrap_or(d.d),
        secure: p.secure.unwrap_or(false),
        l: p.l,
        offset: p.offset,
    };
    let spec = AttackSpec::new(kind, params)?;
    let mode = match p.mode.as_deref().unwrap_or("exact") {
        "exact" => AttackMode::Exact,
        "mc" | "monte-carlo" => AttackMode::MonteCarlo { trials: p.trials.unwrap_or(100_000), seed: p.seed() },
        s => bail!("unknown mode {s} (exact | mc)"),
    };
    let res = match run_attack(&spec, mode) {
        Err(CoreError::EnumerationTooLarge { limit }) => bail!(
            "exact enumeration needs {} atoms, above the limit {limit}; rerun with --mode mc",
            spec.atoms()
        ),
        r => r?,
    };
    let r = row(json!({
        "attack": kind.name(),
        "protocol": res.protocol,
        "mode": if res.exact.is_some() { "exact" } else { "mc" },
        "estimate": res.estimate,
        "exact": res.exact.as_ref().map(|e| e.rational.clone()),
        "closed_form": res.closed_form,
        "ci95_low": res.ci95.0,
        "ci95_high": res.ci95.1,
        "trials": res.trials,
        "successes": res.successes,
    }));
    Ok(Outcome::ok(res.to_json(), vec![r]))
}

// ---------------------------------------------------------------- audit

pub fn audit(p: &Params) -> Result<Outcome> {
    let protocol = AuditProtocol::parse(p.name.as_deref().unwrap_or("secure-sum"))?;
    let bundle = match p.bundle.as_deref().unwrap_or("ideal") {
        "ideal" => AuditBundle::Ideal,
        "copied-share" => AuditBundle::CopiedShare,
        b => bail!("unknown audit bundle {b} (ideal | copied-share)"),
    };
    let colluders = indices(p.colluders.as_deref())?;
    let field = p.field()?;
    let audit = secrecy_audit(protocol, p.m(), &field, p.c(), &colluders, bundle)?;
    let rows = audit.leakage.iter().map(|(t, bits)| row(json!({ "target": t, "bits": bits, "exact": true }))).collect();
    let mut result = serde_json::to_value(&audit)?;
    result["exact"] = json!(true);
    result["max_leakage"] = json!(audit.max_leakage());
    Ok(Outcome::ok(result, rows))
}

// ---------------------------------------------------------------- sweep

fn dispatch(experiment: &str, p: &Params) -> Result<Outcome> {
    match experiment {
        "run-protocol" => run_protocol(p),
        "verify" => verify(p),
        "attack" => attack(p),
        "audit" => audit(p),
        e => bail!("unknown experiment {e} (run-protocol | verify | attack | audit)"),
    }
}

pub fn dispatch_command(command: &str, p: &Params) -> Result<Outcome> {
    match command {
        "sweep" => sweep(p),
        c => dispatch(c, p),
    }
}

pub fn sweep(p: &Params) -> Result<Outcome> {
    let experiment = p.experiment.as_deref().ok_or_else(|| anyhow!("sweep needs --experiment"))?;
    let param = p.param.as_deref().ok_or_else(|| anyhow!("sweep needs --param"))?;
    let values: Vec<&str> = p
        .values
        .as_deref()
        .ok_or_else(|| anyhow!("sweep needs --values"))?
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        bail!("--values is empty");
    }
    let mut base = p.clone();
    base.experiment = None;
    base.param = None;
    base.values = None;
    let points = values
        .par_iter()
        .map(|v| {
            let q = base.with_value(param, v)?;
            dispatch(experiment, &q).with_context(|| format!("{param} = {v}"))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for (v, out) in values.iter().zip(&points) {
        for r in &out.rows {
            let mut full = Row::new();
            full.insert(param.to_string(), json!(v));
            full.extend(r.clone());
            rows.push(full);
        }
        results.push(json!({ "value": v, "passed": out.passed, "result": out.result }));
    }
    let result = json!({ "experiment": experiment, "param": param, "points": results });
    Ok(Outcome::ok(result, rows))
}

