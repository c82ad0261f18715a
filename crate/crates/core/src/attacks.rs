//! Adversary strategies against the protocols, with exact (enumerated) or
//! Monte-Carlo success probabilities, and exact secrecy audits of
//! colluding views.

use std::collections::{BTreeMap, HashMap};

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::analysis::{mutual_information, TableBuilder};
use crate::channel::{extract_view, party_set, AdversaryModel, Behavior, PartyId};
use crate::field::{ExtFieldSpec, Field, FieldVector};
use crate::mzsr::{ideal_mzsr, Provenance, ZeroSumBundle};
use crate::protocols::{
    anon_auth_basic, anon_auth_secure, derive_mac_params, mzsr_via_secure_sum, secret_share_basic,
    secret_share_cheater_detect, secure_modulo_sum, vec_label, AuthSetup, MacParams, ShareOutcome, VoteStrategy,
    PROTOCOL_ENUM_LIMIT,
};
use crate::tape::{enumerate, seeded_rng, Tape};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    /// Honest run of the cheater-detectable sharing; success = the secret is recovered.
    HonestSharing,
    /// Parties `2..m-1` alter their broadcast shares in the cheater-detectable sharing.
    Modification,
    /// One honest party disapproves the project.
    Disagreement,
    /// One honest party recognizes a different project.
    Mismatch,
    /// Parties `l..m` of the secure variant try to make the vote accept
    /// although party 2 recognizes a different project.
    Collusion,
    /// Party `m` of the basic variant sends minus the sum of the votes it has seen.
    Rushing,
}

impl AttackKind {
    pub const ALL: [AttackKind; 6] = [
        AttackKind::HonestSharing,
        AttackKind::Modification,
        AttackKind::Disagreement,
        AttackKind::Mismatch,
        AttackKind::Collusion,
        AttackKind::Rushing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::HonestSharing => "honest-sharing",
            AttackKind::Modification => "modification",
            AttackKind::Disagreement => "disagreement",
            AttackKind::Mismatch => "mismatch",
            AttackKind::Collusion => "collusion",
            AttackKind::Rushing => "rushing",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown attack {s}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum AttackMode {
    Exact,
    MonteCarlo { trials: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackParams {
    pub m: usize,
    pub q: u32,
    /// Extension degree of the cheater-detectable sharing.
    pub c: usize,
    /// Tag length of the authentication protocols.
    pub e: usize,
    /// Project length of the authentication protocols.
    pub d: usize,
    /// Run disagreement / mismatch against the secure variant.
    pub secure: bool,
    /// First colluding party of the collusion attack.
    pub l: Option<usize>,
    /// Fixed modification offset (packed element of `F_{q^c}`); uniform nonzero if absent.
    pub offset: Option<u32>,
}

impl Default for AttackParams {
    fn default() -> Self {
        Self { m: 3, q: 2, c: 2, e: 1, d: 1, secure: false, l: None, offset: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub protocol: &'static str,
    pub params: AttackParams,
    pub adversary: AdversaryModel,
}

impl AttackSpec {
    pub fn new(kind: AttackKind, params: AttackParams) -> Result<Self> {
        let m = params.m;
        if m < 3 {
            return Err(Error::InvalidParameter("attacks need at least three parties".into()));
        }
        if params.q < 2 || params.c == 0 || params.e == 0 || params.d == 0 {
            return Err(Error::InvalidParameter("q >= 2 and c, e, d >= 1 required".into()));
        }
        let ids = |r: std::ops::RangeInclusive<usize>| r.map(PartyId::from_index).collect::<Vec<_>>();
        let (protocol, adversary) = match kind {
            AttackKind::HonestSharing => ("cheater-detect", AdversaryModel::honest()),
            AttackKind::Modification => {
                let mut adv = AdversaryModel::new(ids(1..=m - 2), Behavior::Modification);
                if let Some(o) = params.offset {
                    adv = adv.with_param("offset", o);
                }
                ("cheater-detect", adv)
            }
            AttackKind::Disagreement | AttackKind::Mismatch => {
                (if params.secure { "anon-auth-secure" } else { "anon-auth" }, AdversaryModel::honest())
            }
            AttackKind::Collusion => {
                let l = params.l.unwrap_or(m);
                if l < 3 || l > m {
                    return Err(Error::InvalidParameter(format!("colluders l..m need 3 <= l <= m, got l = {l}")));
                }
                ("anon-auth-secure", AdversaryModel::new(ids(l - 1..=m - 1), Behavior::MismatchedRecognition))
            }
            AttackKind::Rushing => ("anon-auth", AdversaryModel::new(ids(m - 1..=m - 1), Behavior::Rushing)),
        };
        adversary.validate(m)?;
        Ok(Self { kind, protocol, params, adversary })
    }

    /// Closed-form success probability the attack is expected to reach.
    pub fn closed_form(&self) -> f64 {
        let p = &self.params;
        let q = f64::from(p.q);
        match self.kind {
            AttackKind::HonestSharing => 1.0 - q.powi(-(p.c as i32)),
            AttackKind::Modification => (q - 1.0) / (q.powi(p.c as i32) - 1.0),
            AttackKind::Disagreement | AttackKind::Mismatch | AttackKind::Collusion => q.powi(-(p.e as i32)),
            AttackKind::Rushing => 1.0,
        }
    }

    /// Event the probability is conditioned on, if any.
    pub fn condition(&self) -> Option<&'static str> {
        match self.kind {
            AttackKind::Modification => Some("Z != 0"),
            _ => None,
        }
    }

    /// Number of equally likely atoms a full enumeration visits.
    pub fn atoms(&self) -> u128 {
        let p = &self.params;
        let q = u128::from(p.q);
        let m = p.m as u32;
        let pow = |e: usize| q.saturating_pow(e as u32);
        match self.kind {
            AttackKind::HonestSharing => (q - 1).saturating_mul(pow(p.c * (m as usize - 1))),
            AttackKind::Modification => {
                let offsets = if p.offset.is_some() { 1 } else { pow(p.c) - 1 };
                (q - 1).saturating_mul(pow(p.c * (m as usize - 1))).saturating_mul(offsets)
            }
            _ => {
                let share = 2 * p.e + p.d - 1;
                let base = pow(share * (m as usize - 1)).saturating_mul(pow(p.d));
                match self.kind {
                    AttackKind::Disagreement => base.saturating_mul(pow(p.e)),
                    AttackKind::Mismatch => base.saturating_mul(pow(p.d) - 1),
                    AttackKind::Collusion => base.saturating_mul(pow(p.d) - 1).saturating_mul(pow(p.e)),
                    _ => base,
                }
            }
        }
    }

    fn field(&self) -> Result<Field> {
        Field::of_order(self.params.q)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactValue {
    pub value: f64,
    pub rational: String,
}

impl ExactValue {
    fn new(r: &BigRational) -> Self {
        Self { value: r.to_f64().unwrap_or(f64::NAN), rational: r.to_string() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttackResult {
    pub attack: AttackKind,
    pub protocol: &'static str,
    pub params: AttackParams,
    pub closed_form: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactValue>,
    pub estimate: f64,
    pub ci95: (f64, f64),
    /// Monte-Carlo trials (after conditioning), or enumerated atoms in exact mode.
    pub trials: u64,
    pub successes: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl AttackResult {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("result serializes")
    }
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = Normal::standard().inverse_cdf(0.975);
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// One attack trial: `None` if the run falls outside the conditioning event.
fn trial(spec: &AttackSpec, field: &Field, tape: &mut dyn Tape) -> Result<Option<bool>> {
    let p = &spec.params;
    match spec.kind {
        AttackKind::HonestSharing | AttackKind::Modification => {
            let ext = ExtFieldSpec::new(field.clone(), p.c)?;
            let secret = field.random_nonzero(tape);
            let bundle = ideal_mzsr(p.m, field, p.c, tape)?;
            let run = secret_share_cheater_detect(&secret, &ext, &bundle, &spec.adversary, tape)?;
            Ok(match (spec.kind, run.outcome) {
                (AttackKind::HonestSharing, outcome) => Some(outcome.is_accept_of(&secret)),
                (_, ShareOutcome::Fail) => None,
                (_, ShareOutcome::Accept(y)) => Some(y != secret),
                (_, ShareOutcome::Singular) => Some(true),
                (_, ShareOutcome::Reject) => Some(false),
            })
        }
        AttackKind::Disagreement | AttackKind::Mismatch | AttackKind::Rushing => {
            let params = auth_params(p, field, tape)?;
            let project = FieldVector::random(field, p.d, tape);
            let mut setup = AuthSetup::unanimous(project.clone(), p.m);
            match spec.kind {
                AttackKind::Disagreement | AttackKind::Rushing => setup.approve[p.m - 1] = false,
                _ => setup.recognized[p.m - 1] = perturbed(&project, tape)?,
            }
            let run = if spec.protocol == "anon-auth-secure" {
                anon_auth_secure(&setup, &params, &spec.adversary, None, tape)?
            } else {
                anon_auth_basic(&setup, &params, &spec.adversary, None, tape)?
            };
            Ok(Some(run.accepted))
        }
        AttackKind::Collusion => {
            let (params, setup) = collusion_setup(p, field, tape)?;
            let guess = FieldVector::random(field, p.e, tape);
            let colluders = colluder_params(spec, &params);
            let strategy = collusion_vote(spec, &setup, colluders, Some(guess));
            Ok(Some(anon_auth_secure(&setup, &params, &spec.adversary, Some(&strategy), tape)?.accepted))
        }
    }
}

fn auth_params(p: &AttackParams, field: &Field, tape: &mut dyn Tape) -> Result<Vec<MacParams>> {
    let bundle = ideal_mzsr(p.m, field, 2 * p.e + p.d - 1, tape)?;
    derive_mac_params(&bundle, p.e, p.d)
}

/// `y + delta` with `delta` uniform nonzero.
fn perturbed(y: &FieldVector, tape: &mut dyn Tape) -> Result<FieldVector> {
    let field = y.field();
    let total = u64::from(field.order()).pow(y.len() as u32);
    let mut k = 1 + tape.draw(total - 1);
    let q = u64::from(field.order());
    let delta: Vec<u32> = (0..y.len())
        .map(|_| {
            let d = (k % q) as u32;
            k /= q;
            d
        })
        .collect();
    y.add(&field.vector(delta)?)
}

/// Everyone approves; party 2 recognizes a perturbed project.
fn collusion_setup(p: &AttackParams, field: &Field, tape: &mut dyn Tape) -> Result<(Vec<MacParams>, AuthSetup)> {
    let params = auth_params(p, field, tape)?;
    let project = FieldVector::random(field, p.d, tape);
    let mut setup = AuthSetup::unanimous(project.clone(), p.m);
    setup.recognized[1] = perturbed(&project, tape)?;
    Ok((params, setup))
}

fn colluder_params<'a>(spec: &AttackSpec, params: &'a [MacParams]) -> Vec<(PartyId, &'a MacParams)> {
    spec.adversary.corrupted.iter().map(|&p| (p, &params[p.index()])).collect()
}

/// Colluders vote `T_i Y_1 + A_i`; the first one subtracts `offset`
/// (a guess of `T_2 (Y_2 - Y_1)`), or votes `offset` outright when `fixed`.
fn collusion_vote<'a>(
    spec: &AttackSpec,
    setup: &'a AuthSetup,
    colluders: Vec<(PartyId, &'a MacParams)>,
    guess: Option<FieldVector>,
) -> impl Fn(PartyId, &[crate::channel::BroadcastMessage]) -> Result<FieldVector> + 'a {
    let first = spec.adversary.corrupted.first().copied();
    move |me, _| {
        let (_, params) = colluders.iter().find(|(p, _)| *p == me).expect("corrupted party");
        let vote = params.tag(&setup.project)?;
        match (&guess, Some(me) == first) {
            (Some(g), true) => vote.sub(g),
            _ => Ok(vote),
        }
    }
}

/// Success of the best colluder strategy: for each colluder view (their
/// shares and every party's recognized project) pick the joint vote that
/// maximizes the acceptance probability.
fn collusion_optimal(spec: &AttackSpec, field: &Field) -> Result<(BigRational, u64)> {
    let p = &spec.params;
    let candidates: Vec<FieldVector> = {
        let q = field.order();
        (0..q.pow(p.e as u32))
            .map(|mut k| {
                field.vector(
                    (0..p.e)
                        .map(|_| {
                            let d = k % q;
                            k /= q;
                            d
                        })
                        .collect(),
                )
            })
            .collect::<Result<_>>()?
    };
    let first = spec.adversary.corrupted.first().copied().expect("colluders");
    let mut by_view: HashMap<String, Vec<BigRational>> = HashMap::new();
    let mut atoms = 0u64;
    enumerate(PROTOCOL_ENUM_LIMIT, |tape| {
        let (params, setup) = collusion_setup(p, field, tape)?;
        let weight = tape.weight();
        atoms += 1;
        let mut view: Vec<String> = spec.adversary.corrupted.iter().map(|c| vec_label(&params[c.index()].seed)).collect();
        view.extend(spec.adversary.corrupted.iter().map(|c| vec_label(&params[c.index()].mask)));
        view.extend(setup.recognized.iter().map(vec_label));
        let slot = by_view.entry(view.join("|")).or_insert_with(|| vec![BigRational::zero(); candidates.len()]);
        for (k, cand) in candidates.iter().enumerate() {
            let strategy = |me: PartyId, _: &[crate::channel::BroadcastMessage]| -> Result<FieldVector> {
                Ok(if me == first { cand.clone() } else { FieldVector::zero(field, p.e) })
            };
            let strategy: &VoteStrategy<'_> = &strategy;
            if anon_auth_secure(&setup, &params, &spec.adversary, Some(strategy), tape)?.accepted {
                slot[k] += &weight;
            }
        }
        Ok(())
    })?;
    let mut views: Vec<_> = by_view.into_iter().collect();
    views.sort_by(|a, b| a.0.cmp(&b.0));
    let best = views
        .into_iter()
        .map(|(_, w)| w.into_iter().max().expect("candidates"))
        .fold(BigRational::zero(), |acc, w| acc + w);
    Ok((best, atoms))
}

/// Runs one attack exactly (full enumeration of every random choice) or by
/// Monte-Carlo sampling.
pub fn run_attack(spec: &AttackSpec, mode: AttackMode) -> Result<AttackResult> {
    let field = spec.field()?;
    let base = |exact: Option<ExactValue>, estimate, ci95, trials, successes, seed| AttackResult {
        attack: spec.kind,
        protocol: spec.protocol,
        params: spec.params.clone(),
        closed_form: spec.closed_form(),
        condition: spec.condition(),
        exact,
        estimate,
        ci95,
        trials,
        successes,
        seed,
    };
    match mode {
        AttackMode::Exact => {
            if spec.atoms() > u128::from(PROTOCOL_ENUM_LIMIT) {
                return Err(Error::EnumerationTooLarge { limit: PROTOCOL_ENUM_LIMIT });
            }
            let (prob, atoms) = if spec.kind == AttackKind::Collusion {
                collusion_optimal(spec, &field)?
            } else {
                let (mut hit, mut counted) = (BigRational::zero(), BigRational::zero());
                let mut atoms = 0u64;
                enumerate(PROTOCOL_ENUM_LIMIT, |tape| {
                    atoms += 1;
                    if let Some(success) = trial(spec, &field, tape)? {
                        counted += tape.weight();
                        if success {
                            hit += tape.weight();
                        }
                    }
                    Ok(())
                })?;
                if counted.is_zero() {
                    return Err(Error::ImpossibleConditioning);
                }
                (hit / counted, atoms)
            };
            let exact = ExactValue::new(&prob);
            let v = exact.value;
            Ok(base(Some(exact), v, (v, v), atoms, 0, None))
        }
        AttackMode::MonteCarlo { trials, seed } => {
            if trials == 0 {
                return Err(Error::InvalidParameter("trials must be positive".into()));
            }
            let mut rng = seeded_rng(seed, 0);
            let (mut counted, mut successes) = (0u64, 0u64);
            for _ in 0..trials {
                if let Some(success) = trial(spec, &field, &mut rng)? {
                    counted += 1;
                    successes += u64::from(success);
                }
            }
            if counted == 0 {
                return Err(Error::ImpossibleConditioning);
            }
            let estimate = successes as f64 / counted as f64;
            Ok(base(None, estimate, wilson_interval(successes, counted), counted, successes, Some(seed)))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditProtocol {
    /// Summation from a zero-sum bundle; targets are the inputs `Y_j`.
    SecureSum,
    /// Zero-sum bundle generated by a summation; targets are the output shares `X_j`.
    Composed,
    /// Basic secret sharing; the target is the secret.
    SecretShare,
}

impl AuditProtocol {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "secure-sum" => Ok(Self::SecureSum),
            "composed" | "mzsr-from-sum" => Ok(Self::Composed),
            "secret-share" => Ok(Self::SecretShare),
            _ => Err(Error::InvalidParameter(format!("no secrecy audit for {s}"))),
        }
    }
}

/// Bundle fed to the audited protocol.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditBundle {
    #[default]
    Ideal,
    /// Zero-sum but broken: `X_2 := X_1`, `X_m` balances the sum.
    CopiedShare,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SecrecyAudit {
    pub protocol: AuditProtocol,
    pub m: usize,
    pub q: u32,
    pub c: usize,
    pub colluders: Vec<usize>,
    pub bundle: AuditBundle,
    /// `I(target; colluder view)` in bits, per honest target.
    pub leakage: BTreeMap<String, f64>,
    pub atoms: u64,
}

impl SecrecyAudit {
    pub fn max_leakage(&self) -> f64 {
        self.leakage.values().copied().fold(0.0, f64::max)
    }
}

fn audit_bundle(kind: AuditBundle, m: usize, field: &Field, c: usize, tape: &mut dyn Tape) -> Result<ZeroSumBundle> {
    let bundle = ideal_mzsr(m, field, c, tape)?;
    match kind {
        AuditBundle::Ideal => Ok(bundle),
        AuditBundle::CopiedShare => {
            let mut shares = bundle.shares().to_vec();
            shares[1] = shares[0].clone();
            let rest = FieldVector::sum(&shares[..m - 1])?;
            shares[m - 1] = rest.neg();
            ZeroSumBundle::new(shares, Provenance::Ideal)
        }
    }
}

/// Exact `I(target; view of colluders)` for every honest target, with
/// uniform independent inputs and every random choice enumerated.
pub fn secrecy_audit(
    protocol: AuditProtocol,
    m: usize,
    field: &Field,
    c: usize,
    colluders: &[usize],
    bundle: AuditBundle,
) -> Result<SecrecyAudit> {
    let set = party_set(colluders)?;
    if set.iter().any(|p| p.get() > m) || set.len() >= m {
        return Err(Error::InvalidParameter(format!("colluders {colluders:?} must be a proper subset of 1..={m}")));
    }
    let honest: Vec<usize> = (1..=m).filter(|i| !colluders.contains(i)).collect();
    let targets: Vec<String> = match protocol {
        AuditProtocol::SecretShare => vec!["y".into()],
        AuditProtocol::SecureSum => honest.iter().map(|j| format!("y{j}")).collect(),
        AuditProtocol::Composed => honest.iter().map(|j| format!("x{j}")).collect(),
    };
    if protocol == AuditProtocol::Composed && bundle != AuditBundle::Ideal {
        return Err(Error::InvalidParameter("the composed protocol generates its own bundle".into()));
    }
    let mut vars = targets.clone();
    vars.push("view".into());
    let mut tb = TableBuilder::<BigRational>::new(vars);
    let mut atoms = 0u64;
    enumerate(PROTOCOL_ENUM_LIMIT, |tape| {
        atoms += 1;
        let mut row: Vec<String> = Vec::with_capacity(targets.len() + 1);
        let view = match protocol {
            AuditProtocol::SecureSum => {
                let ys: Vec<FieldVector> = (0..m).map(|_| FieldVector::random(field, c, tape)).collect();
                let b = audit_bundle(bundle, m, field, c, tape)?;
                let run = secure_modulo_sum(&ys, &b, &AdversaryModel::honest(), tape)?;
                row.extend(honest.iter().map(|&j| vec_label(&ys[j - 1])));
                extract_view(&run.transcript, &set)?.encode()
            }
            AuditProtocol::SecretShare => {
                let y = FieldVector::random(field, c, tape);
                let b = audit_bundle(bundle, m, field, c, tape)?;
                let run = secret_share_basic(&y, &b, &AdversaryModel::honest(), tape)?;
                row.push(vec_label(&y));
                extract_view(&run.transcript, &set)?.encode()
            }
            AuditProtocol::Composed => {
                let (b, run) = mzsr_via_secure_sum(m, field, c, tape)?;
                row.extend(honest.iter().map(|&j| vec_label(b.share(j - 1))));
                let own: Vec<String> = set.iter().map(|p| vec_label(b.share(p.index()))).collect();
                format!("{}#{}", extract_view(&run.transcript, &set)?.encode(), own.join(";"))
            }
        };
        row.push(view);
        tb.add(&row, &tape.weight())
    })?;
    let table = tb.build()?;
    let leakage = targets
        .iter()
        .map(|t| Ok((t.clone(), mutual_information(&table, &[t.as_str()], &["view"])?)))
        .collect::<Result<_>>()?;
    Ok(SecrecyAudit {
        protocol,
        m,
        q: field.order(),
        c,
        colluders: colluders.to_vec(),
        bundle,
        leakage,
        atoms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact(kind: AttackKind, params: AttackParams) -> BigRational {
        let r = run_attack(&AttackSpec::new(kind, params).unwrap(), AttackMode::Exact).unwrap();
        r.exact.unwrap().rational.parse().unwrap()
    }

    fn ratio(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn sharing_probabilities() {
        for (c, honest, modified) in [(2, ratio(3, 4), ratio(1, 3)), (3, ratio(7, 8), ratio(1, 7))] {
            let p = AttackParams { c, ..Default::default() };
            assert_eq!(exact(AttackKind::HonestSharing, p.clone()), honest);
            assert_eq!(exact(AttackKind::Modification, p), modified);
        }
        // q = 3: (q-1)/(q^2-1) = 1/4.
        let p = AttackParams { q: 3, c: 2, ..Default::default() };
        assert_eq!(exact(AttackKind::Modification, p), ratio(1, 4));
        // A fixed offset yields the same success probability.
        let p = AttackParams { c: 2, offset: Some(3), ..Default::default() };
        assert_eq!(exact(AttackKind::Modification, p), ratio(1, 3));
    }

    #[test]
    fn authentication_probabilities() {
        for e in 1..=2usize {
            for d in 1..=2usize {
                let want = ratio(1, 1 << e);
                for secure in [false, true] {
                    let p = AttackParams { e, d, secure, ..Default::default() };
                    assert_eq!(exact(AttackKind::Disagreement, p.clone()), want, "e={e} d={d}");
                    assert_eq!(exact(AttackKind::Mismatch, p), want, "e={e} d={d}");
                }
                let p = AttackParams { e, d, ..Default::default() };
                assert_eq!(exact(AttackKind::Collusion, p.clone()), want);
                assert_eq!(exact(AttackKind::Rushing, p), ratio(1, 1));
            }
        }
    }

    #[test]
    fn monte_carlo_interval() {
        let spec = AttackSpec::new(AttackKind::Modification, AttackParams::default()).unwrap();
        let r = run_attack(&spec, AttackMode::MonteCarlo { trials: 20_000, seed: 5 }).unwrap();
        assert!(r.ci95.0 <= 1.0 / 3.0 && 1.0 / 3.0 <= r.ci95.1, "{:?}", r.ci95);
        assert!(r.trials < 20_000);
        let again = run_attack(&spec, AttackMode::MonteCarlo { trials: 20_000, seed: 5 }).unwrap();
        assert_eq!(r, again);
        let json = r.to_json();
        assert_eq!(json["attack"], "modification");
        assert!(json.get("exact").is_none());
    }

    #[test]
    fn wilson_interval_values() {
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
        let (lo, hi) = wilson_interval(0, 10);
        assert!(lo.abs() < 1e-12 && hi > 0.2);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(AttackSpec::new(AttackKind::Rushing, AttackParams { m: 2, ..Default::default() }).is_err());
        assert!(AttackSpec::new(AttackKind::Collusion, AttackParams { l: Some(2), ..Default::default() }).is_err());
        assert!(AttackKind::parse("nope").is_err());
        assert_eq!(AttackKind::parse("rushing").unwrap(), AttackKind::Rushing);
        let big = AttackParams { m: 4, q: 4, c: 3, ..Default::default() };
        let spec = AttackSpec::new(AttackKind::Modification, big).unwrap();
        assert!(matches!(run_attack(&spec, AttackMode::Exact), Err(Error::EnumerationTooLarge { .. })));
    }

    #[test]
    fn secrecy_audits() {
        let f = Field::prime(2).unwrap();
        let a = secrecy_audit(AuditProtocol::SecureSum, 3, &f, 1, &[3], AuditBundle::Ideal).unwrap();
        assert_eq!(a.max_leakage(), 0.0);
        assert_eq!(a.leakage.len(), 2);
        // Over F_2 the copied share leaves X_3 = 0, so party 3 alone learns
        // only Y_1 + Y_2; party 2 holds X_1 and reads Y_1 off Z_1.
        let broken = secrecy_audit(AuditProtocol::SecureSum, 3, &f, 1, &[3], AuditBundle::CopiedShare).unwrap();
        assert_eq!(broken.leakage["y1"], 0.0);
        let broken = secrecy_audit(AuditProtocol::SecureSum, 3, &f, 1, &[2], AuditBundle::CopiedShare).unwrap();
        assert!((broken.leakage["y1"] - 1.0).abs() < 1e-12);
        // Over F_3, X_3 = -2 X_1 = X_1.
        let f3 = Field::prime(3).unwrap();
        let broken = secrecy_audit(AuditProtocol::SecureSum, 3, &f3, 1, &[3], AuditBundle::CopiedShare).unwrap();
        assert!((broken.leakage["y1"] - 3f64.log2()).abs() < 1e-12);
        let composed = secrecy_audit(AuditProtocol::Composed, 4, &f, 1, &[3, 4], AuditBundle::Ideal).unwrap();
        assert_eq!(composed.leakage["x2"], 0.0);
        let share = secrecy_audit(AuditProtocol::SecretShare, 3, &f, 1, &[2], AuditBundle::Ideal).unwrap();
        assert_eq!(share.max_leakage(), 0.0);
        assert!(secrecy_audit(AuditProtocol::SecureSum, 3, &f, 1, &[1, 2, 3], AuditBundle::Ideal).is_err());
    }

    #[test]
    fn audit_is_symmetric_under_relabeling() {
        let f = Field::prime(2).unwrap();
        let a = secrecy_audit(AuditProtocol::SecureSum, 4, &f, 1, &[2, 3], AuditBundle::Ideal).unwrap();
        let b = secrecy_audit(AuditProtocol::SecureSum, 4, &f, 1, &[3, 4], AuditBundle::Ideal).unwrap();
        assert_eq!(a.max_leakage(), b.max_leakage());
        assert_eq!(a.leakage["y1"], b.leakage["y1"]);
    }
}
