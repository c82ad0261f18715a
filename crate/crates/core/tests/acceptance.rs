//! End-to-end acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed.

use std::collections::BTreeSet;
use std::f64::consts::SQRT_2;
use std::process::ExitCode;
use std::time::Instant;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use modsum_core::analysis::{hypergeometric_posterior, maximizing_prior, mutual_information, TableBuilder};
use modsum_core::attacks::{run_attack, secrecy_audit, AttackKind, AttackMode, AttackParams, AttackSpec};
use modsum_core::attacks::{AuditBundle, AuditProtocol};
use modsum_core::channel::{extract_view, party_set};
use modsum_core::mzsr::{
    audit_bundle_distribution, audit_distribution, bundle_distribution, direct_sum_oracle, ideal_mzsr,
    mzsr_from_summation, quantum_bundle_distribution, ring_mzsr_random, BundleAudit,
};
use modsum_core::protocols::{mzsr_via_secure_sum, real_ideal_distance, HomomorphicSpec, LinearMap};
use modsum_core::quantum::{
    bell_state, chsh_terms, computational_distribution, expectation_sum, ghz_phase_state, matmul, max_abs_diff,
    NoiseModel, Projector,
};
use modsum_core::tape::{enumerate, ExhaustiveTape};
use modsum_core::verification::{
    sampling_bound, selftest_player_j, trusted_device_verify, Source, ThresholdSet,
};
use modsum_core::{ExtFieldSpec, Field, FieldVector, Result, ZeroSumBundle};

type Outcome = Result<(bool, String)>;

fn rat(a: i64, b: i64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

fn vecs(f: &Field, c: usize) -> Vec<FieldVector> {
    let q = f.order();
    (0..q.pow(c as u32))
        .map(|mut k| {
            let vals = (0..c)
                .map(|_| {
                    let d = k % q;
                    k /= q;
                    d
                })
                .collect();
            f.vector(vals).unwrap()
        })
        .collect()
}

/// Oracle: the exact distribution is uniform over the zero-sum set.
fn uniform_on_zero_sum<F>(f: &Field, m: usize, c: usize, generator: F) -> Result<bool>
where
    F: FnMut(&mut ExhaustiveTape) -> Result<ZeroSumBundle>,
{
    let dist = bundle_distribution(generator)?;
    let size = u64::from(f.order()).pow(((m - 1) * c) as u32);
    let p = rat(1, size as i64);
    let zero_sum = |shares: &Vec<Vec<u32>>| {
        (0..c).all(|k| shares.iter().fold(0, |acc, s| f.add_raw(acc, s[k])) == 0)
    };
    Ok(dist.len() as u64 == size && dist.iter().all(|(k, w)| zero_sum(k) && *w == p))
}

fn criterion_1() -> Outcome {
    let mut cases = 0;
    let mut bad = Vec::new();
    for m in [3, 4] {
        for q in [2, 4] {
            for c in [1, 2] {
                let f = Field::of_order(q)?;
                let mut check = |name: &str, audit: BundleAudit, oracle: bool| {
                    cases += 1;
                    if !(audit.passed() && oracle) {
                        bad.push(format!("{name} m={m} q={q} c={c}"));
                    }
                };
                let ideal = audit_bundle_distribution(|t| ideal_mzsr(m, &f, c, t))?;
                check("ideal", ideal, uniform_on_zero_sum(&f, m, c, |t| ideal_mzsr(m, &f, c, t))?);
                let ring = audit_bundle_distribution(|t| ring_mzsr_random(m, &f, c, t))?;
                check("ring", ring, uniform_on_zero_sum(&f, m, c, |t| ring_mzsr_random(m, &f, c, t))?);
                let gen = |t: &mut ExhaustiveTape| mzsr_from_summation(m, &f, c, direct_sum_oracle, t);
                check("from-summation", audit_bundle_distribution(gen)?, uniform_on_zero_sum(&f, m, c, gen)?);
                // The protocol-backed summation oracle is enumerable at q = 2.
                if q == 2 {
                    let gen = |t: &mut ExhaustiveTape| Ok(mzsr_via_secure_sum(m, &f, c, t)?.0);
                    check("composed", audit_bundle_distribution(gen)?, uniform_on_zero_sum(&f, m, c, gen)?);
                }
                let atoms = quantum_bundle_distribution(m, &f, c, &NoiseModel::None)?;
                let size = f64::from(q).powi(((m - 1) * c) as i32);
                let oracle = atoms.len() as f64 == size
                    && atoms.iter().all(|(b, p)| b.is_zero_sum() && (p - 1.0 / size).abs() < 1e-12);
                check("quantum", audit_distribution(&atoms)?, oracle);
            }
        }
    }
    Ok((bad.is_empty(), format!("{cases} generator/parameter cases audited; failures: {bad:?}")))
}

fn criterion_2() -> Outcome {
    let f = Field::prime(2)?;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for m in [3usize, 4] {
        let parties: Vec<usize> = (1..=m).collect();
        let sets: Vec<Vec<usize>> = if m == 3 {
            parties.iter().map(|&a| vec![a]).collect()
        } else {
            (1..=m).flat_map(|a| (a + 1..=m).map(move |b| vec![a, b])).collect()
        };
        for t in sets {
            let audit = secrecy_audit(AuditProtocol::SecureSum, m, &f, 1, &t, AuditBundle::Ideal)?;
            checked += audit.leakage.len();
            worst = worst.max(audit.max_leakage());
        }
    }
    Ok((worst == 0.0, format!("{checked} (j, T) pairs; max I(Y_j; view) = {worst} bits")))
}

fn criterion_3() -> Outcome {
    let f = Field::prime(2)?;
    let m = 4;
    let views = [vec![2, 3], vec![3, 4], vec![1, 3]];
    let mut names: Vec<String> = (1..=m).map(|i| format!("x{i}")).collect();
    names.push("sy".into());
    names.extend((0..views.len()).map(|k| format!("v{k}")));
    let mut tb = TableBuilder::<BigRational>::new(names);
    enumerate(1 << 20, |tape| {
        let (b, run) = mzsr_via_secure_sum(m, &f, 1, tape)?;
        let mut row: Vec<String> = b.shares().iter().map(|s| s.values()[0].to_string()).collect();
        row.push(run.outputs[0].values()[0].to_string());
        for v in &views {
            let set = party_set(v)?;
            let own: Vec<String> = set.iter().map(|p| b.share(p.index()).values()[0].to_string()).collect();
            row.push(format!("{}#{}", extract_view(&run.transcript, &set)?.encode(), own.join(",")));
        }
        tb.add(&row, &tape.weight())
    })?;
    let t = tb.build()?;
    let identities = [
        ("I(X1; X2 X3 SY)", mutual_information(&t, &["x1"], &["x2", "x3", "sy"])?),
        ("I(X2; X3 X4 SY)", mutual_information(&t, &["x2"], &["x3", "x4", "sy"])?),
        ("I(X2; X1 X3 SY)", mutual_information(&t, &["x2"], &["x1", "x3", "sy"])?),
        ("I(X1; view{2,3})", mutual_information(&t, &["x1"], &["v0"])?),
        ("I(X2; view{3,4})", mutual_information(&t, &["x2"], &["v1"])?),
        ("I(X2; view{1,3})", mutual_information(&t, &["x2"], &["v2"])?),
    ];
    let ok = identities.iter().all(|(_, v)| *v == 0.0);
    let detail: Vec<String> = identities.iter().map(|(n, v)| format!("{n}={v}")).collect();
    Ok((ok, detail.join(", ")))
}

/// Oracle for the cheater-detectable sharing, straight from field arithmetic:
/// `Y' = -X_1 Y / (Delta - X_1)` with `X_1 != 0` and `Delta != 0` uniform.
fn modification_oracle(q: u32, c: usize) -> Result<BigRational> {
    let base = Field::of_order(q)?;
    let ext = ExtFieldSpec::new(base.clone(), c)?;
    let big = ext.field();
    let (mut hit, mut total) = (0i64, 0i64);
    for y in base.elements().filter(|y| !y.is_zero()) {
        let y = ext.embed(&y)?;
        for x1 in big.elements().filter(|x| !x.is_zero()) {
            for delta in big.elements().filter(|d| !d.is_zero()) {
                total += 1;
                let v = delta.sub(&x1)?;
                if v.is_zero() {
                    hit += 1;
                    continue;
                }
                let decoded = x1.mul(&y)?.mul(&v.inv()?)?.neg();
                if ext.restrict(&decoded).is_some() && decoded != y {
                    hit += 1;
                }
            }
        }
    }
    Ok(rat(hit, total))
}

fn exact_of(kind: AttackKind, params: AttackParams) -> Result<BigRational> {
    let r = run_attack(&AttackSpec::new(kind, params)?, AttackMode::Exact)?;
    Ok(r.exact.expect("exact mode").rational.parse().expect("rational"))
}

fn criterion_4() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (c, honest, modified) in [(2usize, rat(3, 4), rat(1, 3)), (3, rat(7, 8), rat(1, 7))] {
        let p = AttackParams { q: 2, c, ..Default::default() };
        for (kind, want) in [(AttackKind::HonestSharing, &honest), (AttackKind::Modification, &modified)] {
            let exact = exact_of(kind, p.clone())?;
            let oracle = if kind == AttackKind::Modification {
                modification_oracle(2, c)?
            } else {
                rat(1, 1) - rat(1, 1 << c)
            };
            let spec = AttackSpec::new(kind, p.clone())?;
            let mc = run_attack(&spec, AttackMode::MonteCarlo { trials: 100_000, seed: 2024 + c as u64 })?;
            let w = want.to_f64().unwrap();
            let inside = mc.ci95.0 <= w && w <= mc.ci95.1;
            ok &= exact == *want && oracle == *want && inside;
            detail.push(format!(
                "{} c={c}: exact {exact}, MC {:.4} in [{:.4}, {:.4}]",
                kind.name(),
                mc.estimate,
                mc.ci95.0,
                mc.ci95.1
            ));
        }
    }
    Ok((ok, detail.join("; ")))
}

/// Oracle: fraction of Toeplitz seeds with `T delta = 0` for a fixed nonzero `delta`,
/// averaged over all nonzero `delta` (binary field).
fn toeplitz_kernel_oracle(e: usize, d: usize) -> BigRational {
    let seeds = 1u32 << (e + d - 1);
    let (mut hit, mut total) = (0i64, 0i64);
    for s in 0..seeds {
        let bit = |k: usize| (s >> k) & 1;
        let entry = |i: usize, j: usize| if i >= j { bit(i - j) } else { bit(e - 1 + j - i) };
        for delta in 1u32..(1 << d) {
            total += 1;
            let zero = (0..e).all(|i| (0..d).fold(0, |acc, j| acc ^ (entry(i, j) & ((delta >> j) & 1))) == 0);
            hit += i64::from(zero);
        }
    }
    rat(hit, total)
}

fn criterion_5() -> Outcome {
    let mut ok = true;
    let mut cases = 0;
    let mut bad = Vec::new();
    for e in 1..=2usize {
        for d in 1..=2usize {
            let want = rat(1, 1 << e);
            ok &= toeplitz_kernel_oracle(e, d) == want;
            let p = AttackParams { m: 3, q: 2, e, d, ..Default::default() };
            let secure = AttackParams { secure: true, ..p.clone() };
            let runs = [
                ("disagreement", exact_of(AttackKind::Disagreement, p.clone())?, &want),
                ("mismatch", exact_of(AttackKind::Mismatch, p.clone())?, &want),
                ("disagreement-secure", exact_of(AttackKind::Disagreement, secure.clone())?, &want),
                ("mismatch-secure", exact_of(AttackKind::Mismatch, secure)?, &want),
                ("collusion", exact_of(AttackKind::Collusion, p.clone())?, &want),
            ];
            for (name, got, want) in runs {
                cases += 1;
                if got != *want {
                    ok = false;
                    bad.push(format!("{name} e={e} d={d}: {got}"));
                }
            }
            cases += 1;
            let rushing = exact_of(AttackKind::Rushing, p)?;
            if !rushing.is_one() {
                ok = false;
                bad.push(format!("rushing e={e} d={d}: {rushing}"));
            }
        }
    }
    Ok((ok, format!("{cases} exact enumerations equal q^-e (rushing 1); mismatches: {bad:?}")))
}

fn criterion_6() -> Outcome {
    let mut worst_uniform: f64 = 0.0;
    let mut worst_phase: f64 = 0.0;
    let mut worst_proj: f64 = 0.0;
    for q in [2u32, 3] {
        let f = Field::prime(q)?;
        for m in 2..=5usize {
            let ghz = ghz_phase_state(m, &f)?;
            let dist = computational_distribution(&ghz);
            let p = f64::from(q).powi(-(m as i32 - 1));
            // Oracle amplitudes: uniform superposition of zero-sum strings.
            let amps = ghz.amplitudes().expect("pure");
            let mut phase: Option<Complex64> = None;
            for (i, pr) in dist.iter().enumerate() {
                let zero = ghz.digits(i).iter().fold(0, |acc, &d| f.add_raw(acc, d)) == 0;
                let want = if zero { p } else { 0.0 };
                worst_uniform = worst_uniform.max((pr - want).abs());
                if zero {
                    let g = *phase.get_or_insert(amps[i] / p.sqrt());
                    worst_phase = worst_phase.max((amps[i] - g * p.sqrt()).norm());
                }
            }
            let dim = ghz.dim();
            let p1 = Projector::ZeroSum.matrix(&f, m)?;
            let p2 = Projector::UniformPhase.matrix(&f, m)?;
            let g = Projector::Ghz.matrix(&f, m)?;
            worst_proj = worst_proj.max(max_abs_diff(&matmul(&p1, &p2, dim), &g));
        }
    }
    let chsh = expectation_sum(&bell_state(), &chsh_terms(0, 1, 1.0))?;
    let chsh_err = (chsh - 2.0 * SQRT_2).abs();
    let ok = worst_uniform < 1e-12 && worst_phase < 1e-12 && worst_proj < 1e-9 && chsh_err < 1e-9;
    Ok((
        ok,
        format!(
            "max |P - uniform| = {worst_uniform:.1e}, amplitude deviation {worst_phase:.1e}, \
             max |P1 P2 - GHZ| = {worst_proj:.1e}, CHSH = {chsh:.12}"
        ),
    ))
}

fn criterion_7() -> Outcome {
    let f = Field::prime(2)?;
    let th = ThresholdSet::default();
    let (m, n, runs) = (3usize, 500usize, 50u64);
    let sources = [
        ("noiseless", Source::ghz(m, &f, NoiseModel::None)?),
        ("product", Source::product_zero(m, &f)?),
        ("depolarized(0.3)", Source::ghz(m, &f, NoiseModel::Depolarizing(0.3))?),
    ];
    let mut passes = Vec::new();
    for (_, src) in &sources {
        let mut count = 0;
        for seed in 0..runs {
            let j = 1 + (seed as usize % m);
            count += usize::from(selftest_player_j(src, m, n, j, &th, seed)?.report.passed);
        }
        passes.push(count);
    }
    let ok = passes[0] == runs as usize && passes[1] <= 1 && passes[2] <= 1;
    let detail: Vec<String> = sources.iter().zip(&passes).map(|((name, _), p)| format!("{name} passed {p}/{runs}")).collect();
    Ok((ok, detail.join(", ")))
}

/// Oracle: maximum of `Pr(Y=1 | Z<=k)` over every prior on `X in 0..=n+1`
/// with `Pr(Z<=k) >= alpha`. The objective is linear-fractional, so the
/// maximum sits at a single atom or at two atoms mixed to `Pr(Z<=k) = alpha`.
fn worst_posterior(n: usize, k: usize, alpha: &BigRational) -> BigRational {
    let n1 = rat((n + 1) as i64, 1);
    let parts = |x: usize| -> (BigRational, BigRational) {
        let xr = rat(x as i64, 1);
        let stay = if x <= k { (&n1 - &xr) / &n1 } else { BigRational::zero() };
        let moved = if x >= 1 && x <= k + 1 { xr / &n1 } else { BigRational::zero() };
        (moved.clone(), stay + moved)
    };
    // X >= k+2 never yields Z <= k: one representative suffices.
    let xs: Vec<usize> = (0..=(k + 2).min(n + 1)).collect();
    let mut best = BigRational::zero();
    for &x in &xs {
        let (num, den) = parts(x);
        if den >= *alpha && !den.is_zero() {
            best = best.max(&num / &den);
        }
        for &y in &xs {
            let (ny, dy) = parts(y);
            if den > *alpha && dy < *alpha {
                let p = (alpha - &dy) / (&den - &dy);
                let value = (&p * &num + (BigRational::one() - &p) * &ny) / alpha;
                best = best.max(value);
            }
        }
    }
    best
}

fn criterion_8() -> Outcome {
    let (mut points, mut worst_gap, mut worst_tight) = (0usize, f64::INFINITY, 0.0f64);
    let mut ok = true;
    for n in 10..=200usize {
        for k in 0..=5usize {
            for a in 1..=10i64 {
                let alpha_r = rat(a, 20);
                let alpha = a as f64 / 20.0;
                if k >= n || alpha_r.clone() * rat((n + 1) as i64, 1) < rat((k + 1) as i64, 1) {
                    continue;
                }
                points += 1;
                let bound = sampling_bound(n, k, alpha)?.value;
                let exact = worst_posterior(n, k, &alpha_r);
                let exact_bound = rat(k as i64, 1) / (&alpha_r * rat((n + 1) as i64, 1))
                    + (BigRational::one() - &alpha_r) / (&alpha_r * rat((n - k) as i64, 1));
                ok &= exact <= exact_bound;
                let gap = bound - exact.to_f64().unwrap();
                worst_gap = worst_gap.min(gap);
                ok &= gap >= -1e-12;
                let tight = hypergeometric_posterior(n, &maximizing_prior(n, k, alpha)?, k)?;
                worst_tight = worst_tight.max((tight - bound).abs());
            }
        }
    }
    ok &= worst_tight < 1e-9;
    Ok((
        ok,
        format!("{points} grid points; min(bound - worst posterior) = {worst_gap:.2e}; |posterior at maximizing prior - bound| <= {worst_tight:.1e}"),
    ))
}

fn criterion_9() -> Outcome {
    let f = Field::prime(2)?;
    let (m, alpha, runs) = (3usize, 0.05, 1000u64);
    let mut ok = true;
    let mut detail = Vec::new();
    for n in [10usize, 50, 200] {
        let cap = 1.0 / (2 * n + 1) as f64;
        let mut worst: f64 = 0.0;
        let mut deltas = vec![0.01, 0.05, 0.1, 0.3, 0.5, 1.0];
        deltas.push(4.0 / (3.0 * (n + 1) as f64));
        for (i, &delta) in deltas.iter().enumerate() {
            let src = Source::ghz_with_replacement(m, &f, delta)?;
            let fidelity = src.fidelity()?.expect("quantum source");
            let mut passed = 0u64;
            for r in 0..runs {
                let seed = (n as u64) << 32 | (i as u64) << 16 | r;
                passed += u64::from(trusted_device_verify(&src, n, alpha, seed)?.report.passed);
            }
            let rate = passed as f64 / runs as f64;
            let exact = (1.0 - 0.75 * delta).powi(n as i32);
            // Pass probability times infidelity of the released copy stays below 1/(2n+1);
            // hence a source passing with probability >= alpha has F >= 1 - 1/(alpha(2n+1)).
            ok &= exact * (1.0 - fidelity) <= cap && rate * (1.0 - fidelity) <= cap;
            if rate >= alpha {
                ok &= fidelity >= 1.0 - 1.0 / (alpha * (2 * n + 1) as f64);
            }
            worst = worst.max(rate * (1.0 - fidelity) / cap);
        }
        detail.push(format!("n={n}: max pass*(1-F)*(2n+1) = {worst:.3}"));
    }
    Ok((ok, detail.join(", ")))
}

fn criterion_10() -> Outcome {
    let f2 = Field::prime(2)?;
    let f3 = Field::prime(3)?;
    let one = |f: &Field, c: usize| f.vector(vec![1; c]).unwrap();
    // GL(1, F_2) is trivial, so distinct invertible maps are taken at
    // q = 3 (c = 1) and at q = 2 (c = 2); q = 2, c = 1 uses two weightings.
    let specs = vec![
        ("F2 id, alpha=(1,1,1)", HomomorphicSpec::summation(&f2, 3, 1)),
        (
            "F2 id, alpha=(1,0,1)",
            HomomorphicSpec::new(vec![one(&f2, 1), f2.vector(vec![0])?, one(&f2, 1)], LinearMap::identity(&f2, 1))?,
        ),
        ("F3 id", HomomorphicSpec::summation(&f3, 3, 1)),
        ("F3 times 2", HomomorphicSpec::new(vec![one(&f3, 1); 3], LinearMap::new(&f3, vec![vec![2]])?)?),
        ("F2^2 swap", HomomorphicSpec::new(vec![one(&f2, 2); 3], LinearMap::permutation(&f2, &[1, 0])?)?),
    ];
    let mut cases = 0;
    let mut bad = Vec::new();
    for (name, spec) in &specs {
        let field = spec.map.field().clone();
        let c = spec.map.dim();
        let all = vecs(&field, c);
        for t in [vec![1usize], vec![2], vec![3], vec![1, 2], vec![1, 3], vec![2, 3]] {
            let set: BTreeSet<_> = party_set(&t)?;
            for a in &all {
                for b in &all {
                    for d in &all {
                        cases += 1;
                        let l1 = real_ideal_distance(spec, &[a.clone(), b.clone(), d.clone()], &set)?;
                        if !l1.is_zero() {
                            bad.push(format!("{name} T={t:?}"));
                        }
                    }
                }
            }
        }
    }
    Ok((bad.is_empty(), format!("{cases} (f, T, input) cases with TV = 0 exactly; failures: {bad:?}")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("zero-sum correctness", criterion_1),
        ("summation secrecy", criterion_2),
        ("composed generation identities", criterion_3),
        ("cheater detection", criterion_4),
        ("anonymous authentication", criterion_5),
        ("GHZ layer", criterion_6),
        ("self-test verification", criterion_7),
        ("sampling bound", criterion_8),
        ("trusted-device bound", criterion_9),
        ("real/ideal", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "{} {:>2} {name} ({:.1}s): {detail}",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
