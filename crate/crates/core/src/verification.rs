//! Verification of GHZ sources: the Player-j self-test and the Bell
//! self-test for untrusted qubit devices, the trusted-device test over
//! `F_q`, the hypergeometric sampling bound, and the verified summation.
//!
//! Copies are simulated independently (i.i.d. sources). Each report is a
//! deterministic function of its seed.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::SQRT_2;

use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::analysis::{l1_distance, JointTable, TableBuilder};
use crate::channel::AdversaryModel;
use crate::field::{Field, FieldVector};
use crate::mzsr::{noise_label, Provenance, ZeroSumBundle};
use crate::protocols::{secure_modulo_sum, SumRun};
use crate::quantum::{
    self, ghz_fidelity, ghz_phase_state, LocalBasis, NoiseModel, Observable, Pauli, QuantumRegister,
};
use crate::tape::seeded_rng;
use crate::{Error, Result};

pub const DEFAULT_C1: f64 = 10.0;

/// Sign `s` in the checks `A[s Z_j prod Z_l]` and
/// `A[A(0)_j (X_k + s prod Z_l) + A(1)_j (X_k - s prod Z_l)]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignConvention {
    /// `s = +1`, the value the ideal state attains.
    #[default]
    IdealDerived,
    /// `s = -1`, as the checks are literally written.
    Literal,
}

impl SignConvention {
    pub fn s(self) -> f64 {
        match self {
            SignConvention::IdealDerived => 1.0,
            SignConvention::Literal => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdSet {
    pub c1: f64,
    pub signs: SignConvention,
    /// Bell test only: use `sqrt 2 - c1/sqrt n` instead of `2 sqrt 2 - c1/sqrt n`.
    pub literal_bell_threshold: bool,
}

impl Default for ThresholdSet {
    fn default() -> Self {
        Self { c1: DEFAULT_C1, signs: SignConvention::IdealDerived, literal_bell_threshold: false }
    }
}

impl ThresholdSet {
    pub fn new(c1: f64) -> Self {
        Self { c1, ..Default::default() }
    }

    pub fn with_signs(mut self, signs: SignConvention) -> Self {
        self.signs = signs;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidThresholds("group size n must be positive".into()));
        }
        if !(self.c1 >= 0.0 && self.c1.is_finite()) {
            return Err(Error::InvalidThresholds(format!("c1 = {} must be finite and nonnegative", self.c1)));
        }
        if self.c1 >= 2.0 * n as f64 {
            return Err(Error::InvalidThresholds(format!(
                "c1 = {} makes 1 - c1/n = {} fall below -1 at n = {n}",
                self.c1,
                self.correlation(n)
            )));
        }
        Ok(())
    }

    /// `1 - c1/n`.
    pub fn correlation(&self, n: usize) -> f64 {
        1.0 - self.c1 / n as f64
    }

    /// `2 sqrt 2 - c1/sqrt n`.
    pub fn chsh(&self, n: usize) -> f64 {
        2.0 * SQRT_2 - self.c1 / (n as f64).sqrt()
    }

    fn bell_chsh(&self, n: usize) -> f64 {
        if self.literal_bell_threshold {
            SQRT_2 - self.c1 / (n as f64).sqrt()
        } else {
            self.chsh(n)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub average: f64,
    pub threshold: f64,
    pub margin: f64,
    pub pass: bool,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, average: f64, threshold: f64) -> Self {
        Self { name: name.into(), average, threshold, margin: average - threshold, pass: average >= threshold }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub protocol: String,
    pub m: usize,
    pub n: usize,
    pub c1: Option<f64>,
    pub alpha: Option<f64>,
    pub checks: Vec<CheckResult>,
    pub signs: SignConvention,
    pub seed: u64,
    pub source: String,
    pub passed: bool,
    /// Exact fidelity of one source copy with the phase GHZ state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_fidelity: Option<f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub diagnostics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

/// What one party measures on one copy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    Pauli(Pauli),
    Computational,
    Phase,
}

/// An i.i.d. copy source.
#[derive(Clone, Debug)]
pub enum Source {
    /// Each copy is `noise(state)`.
    Quantum { state: QuantumRegister, noise: NoiseModel },
    /// Local deterministic devices: party `p` answers setting `s` with a
    /// fixed outcome index (0 unless listed).
    Deterministic { field: Field, parties: usize, answers: Vec<((usize, Setting), u32)> },
}

impl Source {
    pub fn quantum(state: QuantumRegister, noise: NoiseModel) -> Result<Self> {
        noise.validate()?;
        Ok(Source::Quantum { state, noise })
    }

    /// Phase GHZ state of `m` parties under `noise`.
    pub fn ghz(m: usize, field: &Field, noise: NoiseModel) -> Result<Self> {
        Self::quantum(ghz_phase_state(m, field)?, noise)
    }

    pub fn bell(noise: NoiseModel) -> Result<Self> {
        Self::quantum(quantum::bell_state(), noise)
    }

    /// Always `|0...0>`.
    pub fn product_zero(m: usize, field: &Field) -> Result<Self> {
        Self::quantum(QuantumRegister::basis_state(field, &vec![0; m])?, NoiseModel::None)
    }

    /// `(1 - delta) |GHZ><GHZ| + delta |0...0><0...0|` per copy.
    pub fn ghz_with_replacement(m: usize, field: &Field, delta: f64) -> Result<Self> {
        let wrong = QuantumRegister::basis_state(field, &vec![0; m])?;
        Self::ghz(m, field, NoiseModel::Replacement { state: Box::new(wrong), prob: delta })
    }

    pub fn deterministic(field: &Field, parties: usize) -> Self {
        Source::Deterministic { field: field.clone(), parties, answers: Vec::new() }
    }

    pub fn with_answer(mut self, party: usize, setting: Setting, outcome: u32) -> Self {
        if let Source::Deterministic { answers, .. } = &mut self {
            answers.retain(|(k, _)| *k != (party, setting));
            answers.push(((party, setting), outcome));
        }
        self
    }

    pub fn parties(&self) -> usize {
        match self {
            Source::Quantum { state, .. } => state.parties(),
            Source::Deterministic { parties, .. } => *parties,
        }
    }

    pub fn field(&self) -> &Field {
        match self {
            Source::Quantum { state, .. } => state.field(),
            Source::Deterministic { field, .. } => field,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Source::Quantum { noise, .. } => format!("quantum:{}", noise_label(noise)),
            Source::Deterministic { .. } => "deterministic".into(),
        }
    }

    /// Exact phase GHZ fidelity of one copy.
    pub fn fidelity(&self) -> Result<Option<f64>> {
        match self {
            Source::Quantum { state, noise } => {
                let mut f = 0.0;
                for (w, reg) in noise.mixture(state)? {
                    f += w * ghz_fidelity(&reg)?;
                }
                Ok(Some(f))
            }
            Source::Deterministic { .. } => Ok(None),
        }
    }

    /// Exact expectation of a product of `+-1` observables (qubit sources).
    pub fn expectation(&self, obs: &Observable) -> Result<f64> {
        match self {
            Source::Quantum { state, noise } => {
                let mut e = 0.0;
                for (w, reg) in noise.mixture(state)? {
                    e += w * quantum::expectation(&reg, obs)?;
                }
                Ok(e)
            }
            Source::Deterministic { .. } => Err(Error::InvalidParameter("deterministic sources are sampled".into())),
        }
    }
}

fn local_basis(setting: Setting, field: &Field) -> LocalBasis {
    match setting {
        Setting::Pauli(p) => p.basis(),
        Setting::Computational => LocalBasis::computational(field.order() as usize),
        Setting::Phase => LocalBasis::phase(field),
    }
}

fn pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Samples measured copies, caching the exact outcome distribution of every
/// (mixture component, setting list) pair.
struct CopySampler<'a> {
    source: &'a Source,
    components: Vec<(f64, QuantumRegister)>,
    weights: Vec<f64>,
    cache: HashMap<Vec<(usize, Setting)>, Vec<Vec<f64>>>,
}

impl<'a> CopySampler<'a> {
    fn new(source: &'a Source) -> Result<Self> {
        let components = match source {
            Source::Quantum { state, noise } => noise.mixture(state)?,
            Source::Deterministic { .. } => Vec::new(),
        };
        let weights = components.iter().map(|(w, _)| *w).collect();
        Ok(Self { source, components, weights, cache: HashMap::new() })
    }

    /// Outcome index per listed party.
    fn sample<R: Rng + ?Sized>(&mut self, settings: &[(usize, Setting)], rng: &mut R) -> Result<Vec<u32>> {
        if let Source::Deterministic { answers, .. } = self.source {
            return Ok(settings
                .iter()
                .map(|key| answers.iter().find(|(k, _)| k == key).map_or(0, |(_, v)| *v))
                .collect());
        }
        if !self.cache.contains_key(settings) {
            let field = self.source.field();
            let bases: Vec<(usize, LocalBasis)> = settings.iter().map(|&(p, s)| (p, local_basis(s, field))).collect();
            let dists = self
                .components
                .iter()
                .map(|(_, reg)| quantum::outcome_distribution(reg, &bases))
                .collect::<Result<Vec<_>>>()?;
            self.cache.insert(settings.to_vec(), dists);
        }
        let c = pick(&self.weights, rng);
        let dist = &self.cache[settings][c];
        let mut idx = pick(dist, rng);
        let q = self.source.field().order() as usize;
        let mut out = vec![0u32; settings.len()];
        for k in (0..settings.len()).rev() {
            out[k] = (idx % q) as u32;
            idx /= q;
        }
        Ok(out)
    }
}

/// `+1` for outcome index 0 of every listed party's `+-1` observable, times `-1` per index 1.
fn product_sign(outcomes: &[u32]) -> f64 {
    if outcomes.iter().filter(|&&o| o == 1).count() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Uniformly random split of `0..total` into consecutive groups of the given sizes.
pub fn random_partition<R: Rng + ?Sized>(total: usize, sizes: &[usize], rng: &mut R) -> Result<Vec<Vec<usize>>> {
    let needed: usize = sizes.iter().sum();
    if needed > total {
        return Err(Error::InsufficientCopies { needed, available: total });
    }
    let mut idx: Vec<usize> = (0..total).collect();
    idx.shuffle(rng);
    let mut out = Vec::with_capacity(sizes.len());
    let mut at = 0;
    for &s in sizes {
        out.push(idx[at..at + s].to_vec());
        at += s;
    }
    Ok(out)
}

/// Group layout of the Player-j test: group `g m + p` (zero-based `p`)
/// measures the `g`-th observable of `{Z, X, A(0), A(1)}` on party `j`
/// together with `X_p` (for `p != j`) or `Z` on every other party (`p = j`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SelfTestPlan {
    pub m: usize,
    pub n: usize,
    /// One-based player under test.
    pub j: usize,
    /// Copy indices of each of the `4m` groups.
    pub groups: Vec<Vec<usize>>,
    pub final_copy: usize,
}

const J_OBSERVABLES: [Pauli; 4] = [Pauli::Z, Pauli::X, Pauli::A(0), Pauli::A(1)];

impl SelfTestPlan {
    pub fn copies(m: usize, n: usize) -> usize {
        4 * m * n + 1
    }

    pub fn random<R: Rng + ?Sized>(m: usize, n: usize, j: usize, rng: &mut R) -> Result<Self> {
        Self::from_copies(&(0..Self::copies(m, n)).collect::<Vec<_>>(), m, n, j, rng)
    }

    /// Plan over an explicit pool of copy indices (of size at least `4mn + 1`).
    pub fn from_copies<R: Rng + ?Sized>(pool: &[usize], m: usize, n: usize, j: usize, rng: &mut R) -> Result<Self> {
        if m < 2 || j == 0 || j > m {
            return Err(Error::InvalidParameter(format!("player {j} outside 1..={m}")));
        }
        let mut sizes = vec![n; 4 * m];
        sizes.push(1);
        let parts = random_partition(pool.len(), &sizes, rng)?;
        let mut groups: Vec<Vec<usize>> = parts.into_iter().map(|g| g.into_iter().map(|i| pool[i]).collect()).collect();
        let final_copy = groups.pop().expect("final group")[0];
        Ok(Self { m, n, j, groups, final_copy })
    }

    /// Settings of group `g m + p`.
    pub fn settings(&self, group: usize) -> Vec<(usize, Setting)> {
        let (g, p) = (group / self.m, group % self.m);
        let j = self.j - 1;
        let mut s = vec![(j, Setting::Pauli(J_OBSERVABLES[g]))];
        if p == j {
            s.extend((0..self.m).filter(|&l| l != j).map(|l| (l, Setting::Pauli(Pauli::Z))));
        } else {
            s.push((p, Setting::Pauli(Pauli::X)));
        }
        s
    }

    fn observable(&self, group: usize) -> Observable {
        let factors = self
            .settings(group)
            .into_iter()
            .map(|(p, s)| match s {
                Setting::Pauli(k) => (p, k),
                _ => unreachable!("self-test settings are Pauli"),
            })
            .collect();
        Observable::product(factors).expect("distinct parties")
    }
}

/// Player-j checks from per-group averages `avg[g m + p]`.
fn player_j_checks(plan: &SelfTestPlan, avg: &[f64], th: &ThresholdSet) -> (Vec<CheckResult>, BTreeMap<String, f64>) {
    let (m, n, j) = (plan.m, plan.n, plan.j - 1);
    let s = th.signs.s();
    let mut checks = Vec::new();
    let mut diag = BTreeMap::new();
    for k in (0..m).filter(|&k| k != j) {
        checks.push(CheckResult::new(format!("XX[{},{}]", j + 1, k + 1), avg[m + k], th.correlation(n)));
    }
    checks.push(CheckResult::new(format!("ZZ[{}]", j + 1), s * avg[j], th.correlation(n)));
    for k in (0..m).filter(|&k| k != j) {
        let v = avg[2 * m + k] + s * avg[2 * m + j] + avg[3 * m + k] - s * avg[3 * m + j];
        checks.push(CheckResult::new(format!("CHSH[{},{}]", j + 1, k + 1), v, th.chsh(n)));
        diag.insert(format!("ZX[{},{}]", j + 1, k + 1), avg[k]);
    }
    diag.insert(format!("XZ[{}]", j + 1), avg[m + j]);
    (checks, diag)
}

fn sign_notes(th: &ThresholdSet) -> Vec<String> {
    match th.signs {
        SignConvention::IdealDerived => Vec::new(),
        SignConvention::Literal => vec![
            "literal signs: the ideal state scores -1 on the ZZ check and 0 on the CHSH check".into(),
        ],
    }
}

fn measure_groups<R: Rng + ?Sized>(
    sampler: &mut CopySampler<'_>,
    plan: &SelfTestPlan,
    rng: &mut R,
) -> Result<Vec<f64>> {
    (0..plan.groups.len())
        .map(|g| {
            let settings = plan.settings(g);
            let mut total = 0.0;
            for _ in &plan.groups[g] {
                total += product_sign(&sampler.sample(&settings, rng)?);
            }
            Ok(total / plan.groups[g].len() as f64)
        })
        .collect()
}

fn check_qubit_source(source: &Source, m: usize) -> Result<()> {
    if source.field().order() != 2 {
        return Err(Error::UnsupportedObservable("self-testing is defined for q = 2 only".into()));
    }
    if source.parties() != m {
        return Err(Error::DimensionMismatch(format!("source has {} parties, test expects {m}", source.parties())));
    }
    Ok(())
}

fn measure_final<R: Rng + ?Sized>(sampler: &mut CopySampler<'_>, m: usize, rng: &mut R) -> Result<ZeroSumBundle> {
    let settings: Vec<(usize, Setting)> = (0..m).map(|p| (p, Setting::Computational)).collect();
    let digits = sampler.sample(&settings, rng)?;
    let field = sampler.source.field().clone();
    let shares = digits.iter().map(|&d| FieldVector::new(field.clone(), vec![d])).collect::<Result<Vec<_>>>()?;
    let noise = match sampler.source {
        Source::Quantum { noise, .. } => noise_label(noise),
        Source::Deterministic { .. } => "deterministic".into(),
    };
    ZeroSumBundle::unchecked(shares, Provenance::Quantum { noise })
}

#[derive(Clone, Debug)]
pub struct SelfTestOutcome {
    pub report: VerificationReport,
    pub plan: SelfTestPlan,
    /// Computational-basis outcomes of the final copy, present only on pass.
    pub bundle: Option<ZeroSumBundle>,
}

/// Player-j self-test on `4mn + 1` copies.
pub fn selftest_player_j(
    source: &Source,
    m: usize,
    n: usize,
    j: usize,
    thresholds: &ThresholdSet,
    seed: u64,
) -> Result<SelfTestOutcome> {
    thresholds.validate(n)?;
    check_qubit_source(source, m)?;
    let mut rng = seeded_rng(seed, 0);
    let plan = SelfTestPlan::random(m, n, j, &mut rng)?;
    let mut sampler = CopySampler::new(source)?;
    let avg = measure_groups(&mut sampler, &plan, &mut rng)?;
    let (checks, diagnostics) = player_j_checks(&plan, &avg, thresholds);
    let passed = checks.iter().all(|c| c.pass);
    let bundle = if passed { Some(measure_final(&mut sampler, m, &mut rng)?) } else { None };
    let report = VerificationReport {
        protocol: "player-j-selftest".into(),
        m,
        n,
        c1: Some(thresholds.c1),
        alpha: None,
        checks,
        signs: thresholds.signs,
        seed,
        source: source.label(),
        passed,
        final_fidelity: source.fidelity()?,
        diagnostics,
        notes: sign_notes(thresholds),
    };
    Ok(SelfTestOutcome { report, plan, bundle })
}

/// Exact expected value of every Player-j check quantity for a quantum source.
pub fn expected_player_j_checks(source: &Source, m: usize, j: usize, thresholds: &ThresholdSet) -> Result<Vec<(String, f64)>> {
    check_qubit_source(source, m)?;
    let plan = SelfTestPlan { m, n: 1, j, groups: vec![Vec::new(); 4 * m], final_copy: 0 };
    if j == 0 || j > m {
        return Err(Error::InvalidParameter(format!("player {j} outside 1..={m}")));
    }
    let avg = (0..4 * m).map(|g| source.expectation(&plan.observable(g))).collect::<Result<Vec<_>>>()?;
    let (checks, _) = player_j_checks(&plan, &avg, thresholds);
    Ok(checks.into_iter().map(|c| (c.name, c.average)).collect())
}

const BELL_GROUPS: [(Pauli, Pauli); 6] = [
    (Pauli::X, Pauli::X),
    (Pauli::Z, Pauli::Z),
    (Pauli::A(0), Pauli::X),
    (Pauli::A(0), Pauli::Z),
    (Pauli::A(1), Pauli::X),
    (Pauli::A(1), Pauli::Z),
];

fn bell_checks(avg: &[f64], n: usize, th: &ThresholdSet) -> Vec<CheckResult> {
    let s = th.signs.s();
    vec![
        CheckResult::new("XX", avg[0], th.correlation(n)),
        CheckResult::new("ZZ", s * avg[1], th.correlation(n)),
        CheckResult::new("CHSH", avg[2] + s * avg[3] + avg[4] - s * avg[5], th.bell_chsh(n)),
    ]
}

/// Bell self-test on `6n + 1` two-qubit copies, `n` per group.
pub fn bell_selftest(source: &Source, n: usize, thresholds: &ThresholdSet, seed: u64) -> Result<VerificationReport> {
    thresholds.validate(n)?;
    check_qubit_source(source, 2)?;
    let mut rng = seeded_rng(seed, 0);
    let mut sizes = vec![n; 6];
    sizes.push(1);
    let groups = random_partition(6 * n + 1, &sizes, &mut rng)?;
    let mut sampler = CopySampler::new(source)?;
    let avg = BELL_GROUPS
        .iter()
        .zip(&groups)
        .map(|(&(a, b), group)| {
            let settings = [(0, Setting::Pauli(a)), (1, Setting::Pauli(b))];
            let mut total = 0.0;
            for _ in group {
                total += product_sign(&sampler.sample(&settings, &mut rng)?);
            }
            Ok(total / n as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let checks = bell_checks(&avg, n, thresholds);
    let passed = checks.iter().all(|c| c.pass);
    let mut notes = sign_notes(thresholds);
    if thresholds.literal_bell_threshold {
        notes.push("CHSH threshold sqrt 2 - c1/sqrt n as literally stated; 2 sqrt 2 - c1/sqrt n is the default".into());
    }
    Ok(VerificationReport {
        protocol: "bell-selftest".into(),
        m: 2,
        n,
        c1: Some(thresholds.c1),
        alpha: None,
        checks,
        signs: thresholds.signs,
        seed,
        source: source.label(),
        passed,
        final_fidelity: source.fidelity()?,
        diagnostics: BTreeMap::new(),
        notes,
    })
}

/// Exact expected Bell-test check quantities.
pub fn expected_bell_checks(source: &Source, thresholds: &ThresholdSet) -> Result<Vec<(String, f64)>> {
    check_qubit_source(source, 2)?;
    let avg = BELL_GROUPS
        .iter()
        .map(|&(a, b)| source.expectation(&Observable::product(vec![(0, a), (1, b)])?))
        .collect::<Result<Vec<_>>>()?;
    Ok(bell_checks(&avg, 1, thresholds).into_iter().map(|c| (c.name, c.average)).collect())
}

/// Guarantees of a passed trusted-device test at significance `alpha`:
/// fidelity at least `1 - 1/(alpha (2n+1))` and trace distance at most
/// `1/sqrt(alpha (2n+1))`.
pub fn trusted_bounds(n: usize, alpha: f64) -> Result<(f64, f64)> {
    let t = alpha * (2 * n + 1) as f64;
    if !(alpha > 0.0 && alpha <= 1.0) || t <= 1.0 {
        return Err(Error::InvalidParameter(format!("need 1/(2n+1) < alpha <= 1, got alpha = {alpha}, n = {n}")));
    }
    Ok((1.0 - 1.0 / t, 1.0 / t.sqrt()))
}

#[derive(Clone, Debug)]
pub struct TrustedOutcome {
    pub report: VerificationReport,
    pub bundle: Option<ZeroSumBundle>,
}

/// Trusted-device test on `2n + 1` copies over any `F_q`: `n` copies must
/// give equal phase-basis outcomes and `n` copies zero-sum computational outcomes.
pub fn trusted_device_verify(source: &Source, n: usize, alpha: f64, seed: u64) -> Result<TrustedOutcome> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let (fid_bound, td_bound) = trusted_bounds(n, alpha)?;
    let m = source.parties();
    let field = source.field().clone();
    let mut rng = seeded_rng(seed, 0);
    let groups = random_partition(2 * n + 1, &[n, n, 1], &mut rng)?;
    let mut sampler = CopySampler::new(source)?;
    let phase: Vec<(usize, Setting)> = (0..m).map(|p| (p, Setting::Phase)).collect();
    let comp: Vec<(usize, Setting)> = (0..m).map(|p| (p, Setting::Computational)).collect();
    let mut phase_ok = 0usize;
    for _ in &groups[0] {
        let o = sampler.sample(&phase, &mut rng)?;
        phase_ok += usize::from(o.iter().all(|&v| v == o[0]));
    }
    let mut comp_ok = 0usize;
    for _ in &groups[1] {
        let o = sampler.sample(&comp, &mut rng)?;
        comp_ok += usize::from(o.iter().fold(0, |acc, &d| field.add_raw(acc, d)) == 0);
    }
    let checks = vec![
        CheckResult::new("phase-all-equal", phase_ok as f64 / n as f64, 1.0),
        CheckResult::new("computational-zero-sum", comp_ok as f64 / n as f64, 1.0),
    ];
    let passed = checks.iter().all(|c| c.pass);
    let bundle = if passed { Some(measure_final(&mut sampler, m, &mut rng)?) } else { None };
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("fidelity_bound".into(), fid_bound);
    diagnostics.insert("trace_distance_bound".into(), td_bound);
    Ok(TrustedOutcome {
        report: VerificationReport {
            protocol: "trusted-device".into(),
            m,
            n,
            c1: None,
            alpha: Some(alpha),
            checks,
            signs: SignConvention::IdealDerived,
            seed,
            source: source.label(),
            passed,
            final_fidelity: source.fidelity()?,
            diagnostics,
            notes: Vec::new(),
        },
        bundle,
    })
}

/// Exact probability that one copy passes the phase-basis check.
pub fn phase_check_probability(source: &Source) -> Result<f64> {
    let Source::Quantum { state, noise } = source else {
        return Err(Error::InvalidParameter("deterministic sources are sampled".into()));
    };
    let field = source.field();
    let q = field.order() as usize;
    let m = source.parties();
    let bases: Vec<(usize, LocalBasis)> = (0..m).map(|p| (p, LocalBasis::phase(field))).collect();
    let all_equal: Vec<usize> = (0..q).map(|z| (0..m).fold(0, |acc, _| acc * q + z)).collect();
    let mut total = 0.0;
    for (w, reg) in noise.mixture(state)? {
        let dist = quantum::outcome_distribution(&reg, &bases)?;
        total += w * all_equal.iter().map(|&i| dist[i]).sum::<f64>();
    }
    Ok(total)
}

/// `Pr(Y = 1 | Z <= k) <= k/(alpha (n+1)) + (1-alpha)/(alpha (n-k))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SamplingBound {
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
    pub value: f64,
}

pub fn sampling_bound(n: usize, k: usize, alpha: f64) -> Result<SamplingBound> {
    if k >= n {
        return Err(Error::InvalidParameter(format!("need k < n, got k = {k}, n = {n}")));
    }
    if !(alpha <= 1.0 && alpha * ((n + 1) as f64) >= (k + 1) as f64) {
        return Err(Error::InvalidParameter(format!("need (k+1)/(n+1) <= alpha <= 1, got alpha = {alpha}")));
    }
    let value = k as f64 / (alpha * (n + 1) as f64) + (1.0 - alpha) / (alpha * (n - k) as f64);
    Ok(SamplingBound { n, k, alpha, value })
}

/// Posterior `Pr(Y = 1 | Z <= k)` under the two-point prior
/// `(1-p) [X = k] + p [X = k+1]` of the bound's proof.
pub fn two_point_posterior(n: usize, k: usize, p: f64) -> f64 {
    let n1 = (n + 1) as f64;
    ((1.0 - p) * k as f64 / n1 + p * (k + 1) as f64 / n1) / ((1.0 - p) + p * (k + 1) as f64 / n1)
}

/// Result of the verified summation.
#[derive(Clone, Debug)]
pub struct VerifiableSumRun {
    pub reports: Vec<VerificationReport>,
    pub bundle: Option<ZeroSumBundle>,
    /// Present only if every report passed.
    pub sum: Option<SumRun>,
}

/// Every player runs the Player-j test on its own `4mn` copies out of
/// `4m^2 n + 1`; only if all pass is the last copy measured and the
/// summation run with `Z_i = Y_i + X_i`.
pub fn verifiable_secure_sum(
    inputs: &[FieldVector],
    source: &Source,
    n: usize,
    thresholds: &ThresholdSet,
    seed: u64,
) -> Result<VerifiableSumRun> {
    let m = source.parties();
    thresholds.validate(n)?;
    check_qubit_source(source, m)?;
    if inputs.len() != m || inputs.iter().any(|y| y.len() != 1 || y.field() != source.field()) {
        return Err(Error::InvalidParameter("inputs must be m single symbols over the source field".into()));
    }
    let mut rng = seeded_rng(seed, 0);
    let slice = 4 * m * n;
    let mut sizes = vec![slice; m];
    sizes.push(1);
    let slices = random_partition(m * slice + 1, &sizes, &mut rng)?;
    let mut sampler = CopySampler::new(source)?;
    let mut reports = Vec::with_capacity(m);
    for j in 1..=m {
        let mut sub = seeded_rng(seed, j as u64);
        // The player's slice holds exactly 4mn copies; its plan uses them all.
        let mut pool = slices[j - 1].clone();
        pool.push(usize::MAX);
        let plan = SelfTestPlan::from_copies(&pool, m, n, j, &mut sub)?;
        let avg = measure_groups(&mut sampler, &plan, &mut sub)?;
        let (checks, diagnostics) = player_j_checks(&plan, &avg, thresholds);
        let passed = checks.iter().all(|c| c.pass);
        reports.push(VerificationReport {
            protocol: "player-j-selftest".into(),
            m,
            n,
            c1: Some(thresholds.c1),
            alpha: None,
            checks,
            signs: thresholds.signs,
            seed,
            source: source.label(),
            passed,
            final_fidelity: source.fidelity()?,
            diagnostics,
            notes: sign_notes(thresholds),
        });
    }
    if !reports.iter().all(|r| r.passed) {
        return Ok(VerifiableSumRun { reports, bundle: None, sum: None });
    }
    let mut final_rng: ChaCha8Rng = seeded_rng(seed, m as u64 + 1);
    let bundle = measure_final(&mut sampler, m, &mut final_rng)?;
    let sum = secure_modulo_sum(inputs, &bundle, &AdversaryModel::honest(), &mut final_rng)?;
    Ok(VerifiableSumRun { reports, bundle: Some(bundle), sum: Some(sum) })
}

/// Exact `||P_{X_j,E} - P_{X_j} P_E||_1` for a source that, with probability
/// `delta`, sends a computational-basis zero-sum string and hands a copy of
/// it to the eavesdropper `E`; otherwise it sends the GHZ state and `E` gets nothing.
pub fn classical_copy_leakage(m: usize, field: &Field, j: usize, delta: f64) -> Result<f64> {
    if j == 0 || j > m {
        return Err(Error::InvalidParameter(format!("player {j} outside 1..={m}")));
    }
    let ghz = ghz_phase_state(m, field)?;
    let dist = quantum::computational_distribution(&ghz);
    let mut joint = TableBuilder::<f64>::new(["x", "e"]);
    for (i, &p) in dist.iter().enumerate().filter(|(_, &p)| p > 0.0) {
        let digits = ghz.digits(i);
        let xj = digits[j - 1].to_string();
        let record: Vec<String> = digits.iter().map(u32::to_string).collect();
        joint.add(&[xj.clone(), "none".into()], &((1.0 - delta) * p))?;
        joint.add(&[xj, record.join(",")], &(delta * p))?;
    }
    let joint: JointTable<f64> = joint.build()?;
    let px = joint.marginal(&["x"])?;
    let pe = joint.marginal(&["e"])?;
    let mut product = TableBuilder::<f64>::new(["x", "e"]);
    for (x, wx) in px.cells() {
        for (e, we) in pe.cells() {
            product.add(&[x[0], e[0]], &(wx * we))?;
        }
    }
    l1_distance(&joint, &product.build()?)
}

/// Upper bound on the pass probability of the leaky source above: the XX
/// check alone passes iff at most `c1/2` of its `n` outcomes are `-1`, each
/// of which occurs independently with probability `delta/2`.
pub fn xx_pass_upper_bound(n: usize, c1: f64, delta: f64) -> Result<f64> {
    let k = (c1 / 2.0).floor() as u64;
    let b = Binomial::new(delta / 2.0, n as u64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(b.cdf(k))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LeakagePoint {
    pub n: usize,
    /// Largest leak parameter whose pass probability can still reach `alpha`.
    pub delta_max: f64,
    /// Exact leakage at `delta_max`.
    pub leakage: f64,
}

/// For each `n`, the largest leakage a source can have while still passing
/// with probability at least `alpha`.
pub fn leakage_trend(m: usize, j: usize, c1: f64, alpha: f64, ns: &[usize]) -> Result<Vec<LeakagePoint>> {
    let field = Field::prime(2)?;
    ns.iter()
        .map(|&n| {
            let (mut lo, mut hi) = (0.0, 1.0);
            if xx_pass_upper_bound(n, c1, hi)? >= alpha {
                lo = hi;
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if xx_pass_upper_bound(n, c1, mid)? >= alpha {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(LeakagePoint { n, delta_max: lo, leakage: classical_copy_leakage(m, &field, j, lo)? })
        })
        .collect()
}

/// Exact `P(x)` for a fixed-`n` pass event of the trusted-device test on an
/// i.i.d. source `(1 - delta) GHZ + delta sigma`: `(per-copy phase pass)^n
/// (per-copy computational pass)^n`, with the exact source fidelity.
pub fn trusted_pass_probability(source: &Source, n: usize) -> Result<f64> {
    let p_phase = phase_check_probability(source)?;
    let Source::Quantum { state, noise } = source else { unreachable!() };
    let mut p_comp = 0.0;
    for (w, reg) in noise.mixture(state)? {
        p_comp += w * quantum::project_probability(&reg, &quantum::Projector::ZeroSum)?;
    }
    Ok(p_phase.powi(n as i32) * p_comp.powi(n as i32))
}

/// Exact rational `1/(2n+1)`.
pub fn inverse_copies(n: usize) -> BigRational {
    BigRational::new(1.into(), (2 * n + 1).into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;

    fn f2() -> Field {
        Field::prime(2).unwrap()
    }

    #[test]
    fn thresholds() {
        let t = ThresholdSet::default();
        assert_eq!(t.correlation(500), 0.98);
        assert!((t.chsh(100) - (2.0 * SQRT_2 - 1.0)).abs() < 1e-15);
        assert!(t.validate(0).is_err());
        assert!(ThresholdSet::new(-1.0).validate(5).is_err());
        assert!(ThresholdSet::new(10.0).validate(5).is_err());
        assert!(ThresholdSet::new(10.0).validate(6).is_ok());
    }

    #[test]
    fn noiseless_player_j_passes() {
        let src = Source::ghz(3, &f2(), NoiseModel::None).unwrap();
        let out = selftest_player_j(&src, 3, 500, 1, &ThresholdSet::default(), 1).unwrap();
        assert!(out.report.passed, "{:?}", out.report.checks);
        assert_eq!(out.report.check("XX[1,2]").unwrap().average, 1.0);
        assert_eq!(out.report.check("ZZ[1]").unwrap().average, 1.0);
        let b = out.bundle.unwrap();
        assert!(b.is_zero_sum());
        assert!((out.report.final_fidelity.unwrap() - 1.0).abs() < 1e-12);
        // plan: 4m groups of n, disjoint, plus one final copy
        let mut all: Vec<usize> = out.plan.groups.iter().flatten().copied().collect();
        all.push(out.plan.final_copy);
        all.sort_unstable();
        assert_eq!(all, (0..6001).collect::<Vec<_>>());
    }

    #[test]
    fn same_seed_same_report() {
        let src = Source::ghz(3, &f2(), NoiseModel::Depolarizing(0.05)).unwrap();
        let a = selftest_player_j(&src, 3, 50, 2, &ThresholdSet::default(), 9).unwrap();
        let b = selftest_player_j(&src, 3, 50, 2, &ThresholdSet::default(), 9).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.plan, b.plan);
    }

    #[test]
    fn wrong_sources_fail() {
        let f = f2();
        let product = Source::product_zero(3, &f).unwrap();
        let out = selftest_player_j(&product, 3, 200, 1, &ThresholdSet::default(), 2).unwrap();
        assert!(!out.report.passed);
        assert!(out.bundle.is_none());
        assert!(out.report.check("XX[1,2]").unwrap().average.abs() < 0.25);

        let noisy = Source::ghz(3, &f, NoiseModel::Depolarizing(0.2)).unwrap();
        let out = selftest_player_j(&noisy, 3, 2000, 1, &ThresholdSet::default(), 3).unwrap();
        assert!(!out.report.passed);
        assert!(out.report.check("XX[1,2]").unwrap().margin < 0.0);
    }

    #[test]
    fn exact_expectations_and_monotonicity() {
        let f = f2();
        let th = ThresholdSet::default();
        let ideal = expected_player_j_checks(&Source::ghz(3, &f, NoiseModel::None).unwrap(), 3, 1, &th).unwrap();
        for (name, v) in &ideal {
            let want = if name.starts_with("CHSH") { 2.0 * SQRT_2 } else { 1.0 };
            assert!((v - want).abs() < 1e-9, "{name} = {v}");
        }
        let literal = th.clone().with_signs(SignConvention::Literal);
        let lit = expected_player_j_checks(&Source::ghz(3, &f, NoiseModel::None).unwrap(), 3, 1, &literal).unwrap();
        assert!((lit.iter().find(|(n, _)| n == "ZZ[1]").unwrap().1 + 1.0).abs() < 1e-9);
        let mut prev: Option<Vec<(String, f64)>> = None;
        for eps in [0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 1.0] {
            let cur = expected_player_j_checks(&Source::ghz(3, &f, NoiseModel::Depolarizing(eps)).unwrap(), 3, 2, &th)
                .unwrap();
            if let Some(p) = &prev {
                for ((n, a), (_, b)) in p.iter().zip(&cur) {
                    assert!(b <= &(a + 1e-12), "{n} increased at eps = {eps}");
                }
            }
            prev = Some(cur);
        }
        let xx = expected_player_j_checks(&Source::ghz(3, &f, NoiseModel::Depolarizing(0.3)).unwrap(), 3, 1, &th)
            .unwrap();
        assert!((xx[0].1 - 0.49).abs() < 1e-12);
    }

    #[test]
    fn bell_test() {
        let th = ThresholdSet::default();
        let ideal = Source::bell(NoiseModel::None).unwrap();
        let exp = expected_bell_checks(&ideal, &th).unwrap();
        assert!((exp[2].1 - 2.0 * SQRT_2).abs() < 1e-12);
        assert!(bell_selftest(&ideal, 500, &th, 4).unwrap().passed);

        let classical = Source::deterministic(&f2(), 2);
        let r = bell_selftest(&classical, 500, &th, 5).unwrap();
        assert!(r.check("CHSH").unwrap().average <= 2.0);
        assert!(!r.passed);

        let literal = th.clone().with_signs(SignConvention::Literal);
        let r = bell_selftest(&ideal, 100, &literal, 6).unwrap();
        assert_eq!(r.check("ZZ").unwrap().average, -1.0);
        assert!(!r.notes.is_empty());
        let mut lit_threshold = th.clone();
        lit_threshold.literal_bell_threshold = true;
        let r = bell_selftest(&ideal, 100, &lit_threshold, 6).unwrap();
        assert!((r.check("CHSH").unwrap().threshold - (SQRT_2 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn trusted_device() {
        let (fid, td) = trusted_bounds(12, 0.05).unwrap();
        assert!((fid - 0.2).abs() < 1e-12);
        assert!((td - 0.894427190999916).abs() < 1e-12);
        assert!(trusted_bounds(12, 1.0 / 25.0).is_err());

        let f3 = Field::prime(3).unwrap();
        let ok = trusted_device_verify(&Source::ghz(3, &f3, NoiseModel::None).unwrap(), 40, 0.1, 7).unwrap();
        assert!(ok.report.passed);
        assert!(ok.bundle.unwrap().is_zero_sum());

        let f = f2();
        let wrong = QuantumRegister::basis_state(&f, &[0, 0, 0]).unwrap();
        assert!((phase_check_probability(&Source::quantum(wrong, NoiseModel::None).unwrap()).unwrap() - 0.25).abs() < 1e-12);
        let fifth = Source::ghz_with_replacement(3, &f, 0.2).unwrap();
        let r = trusted_device_verify(&fifth, 100, 0.05, 8).unwrap();
        assert!(!r.report.passed);
        assert!((fifth.fidelity().unwrap().unwrap() - (0.8 + 0.2 * 0.25)).abs() < 1e-12);
    }

    #[test]
    fn sampling_bound_examples() {
        assert!((sampling_bound(10, 0, 0.5).unwrap().value - 0.1).abs() < 1e-15);
        let b = sampling_bound(100, 2, 0.2).unwrap().value;
        assert!((b - (2.0 / (0.2 * 101.0) + 0.8 / (0.2 * 98.0))).abs() < 1e-15);
        assert!((b - 0.13984).abs() < 5e-5);
        assert!(sampling_bound(10, 10, 0.5).is_err());
        assert!(sampling_bound(10, 3, 0.3).is_err());
        let (n, k, a) = (10, 1, 0.4);
        let p = (1.0 - a) * (n + 1) as f64 / (n - k) as f64;
        assert!((two_point_posterior(n, k, p) - sampling_bound(n, k, a).unwrap().value).abs() < 1e-12);
    }

    #[test]
    fn verified_summation() {
        let f = f2();
        let ys: Vec<FieldVector> = [1, 1, 0].iter().map(|&y| f.vector(vec![y]).unwrap()).collect();
        let src = Source::ghz(3, &f, NoiseModel::None).unwrap();
        let run = verifiable_secure_sum(&ys, &src, 200, &ThresholdSet::default(), 11).unwrap();
        assert!(run.reports.iter().all(|r| r.passed));
        assert!(run.sum.unwrap().outputs.iter().all(|o| o.is_zero()));

        let bad = Source::product_zero(3, &f).unwrap();
        let run = verifiable_secure_sum(&ys, &bad, 50, &ThresholdSet::default(), 12).unwrap();
        assert!(run.reports.iter().any(|r| !r.passed));
        assert!(run.sum.is_none() && run.bundle.is_none());
    }

    #[test]
    fn leakage_shrinks_with_n() {
        assert!((classical_copy_leakage(3, &f2(), 1, 0.3).unwrap() - 0.3).abs() < 1e-12);
        let pts = leakage_trend(3, 1, 10.0, 0.05, &[50, 200, 800]).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].leakage < w[0].leakage);
        }
    }
}
