//! Classical protocols built on a zero-sum bundle and the broadcast channel.
//!
//! Share `X_i` of the bundle belongs to party `i` (one-based). Parties record
//! their share under the private label `x` and their input under `y`.

use std::collections::BTreeSet;

use num_rational::BigRational;
use serde::Serialize;

use crate::analysis::{l1_distance, JointTable, TableBuilder};
use crate::channel::{
    extract_view, run_rounds, AdversaryModel, Behavior, BroadcastMessage, FnParty, Outgoing, PartyId, PartyProgram,
    Payload, RoundCtx, RunResult, Transcript,
};
use crate::field::{ExtFieldSpec, Field, FieldElement, FieldVector};
use crate::mzsr::{ideal_mzsr, mzsr_from_summation, ZeroSumBundle};
use crate::tape::{enumerate, Tape};
use crate::{Error, Result};

pub const ACCEPT: &str = "accept";
pub const REJECT: &str = "reject";

/// Enumeration cap for the protocol-level exact computations.
pub const PROTOCOL_ENUM_LIMIT: u64 = 1 << 24;

type Party<'a> = Box<dyn PartyProgram + 'a>;

fn no_output(_: PartyId, _: &[BroadcastMessage]) -> Result<Option<Payload>> {
    Ok(None)
}

pub(crate) fn vec_label(v: &FieldVector) -> String {
    v.values().iter().map(u32::to_string).collect::<Vec<_>>().join(",")
}

fn allow(adversary: &AdversaryModel, protocol: &str, allowed: &[Behavior]) -> Result<()> {
    if adversary.corrupted.is_empty() || allowed.contains(&adversary.behavior) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{protocol} does not model a {:?} adversary", adversary.behavior)))
    }
}

fn check_inputs(inputs: &[FieldVector], bundle: &ZeroSumBundle) -> Result<()> {
    if inputs.len() != bundle.m() {
        return Err(Error::LengthMismatch { expected: bundle.m(), got: inputs.len() });
    }
    for y in inputs {
        if y.field() != bundle.field() {
            return Err(Error::FieldMismatch);
        }
        if y.len() != bundle.c() {
            return Err(Error::LengthMismatch { expected: bundle.c(), got: y.len() });
        }
    }
    Ok(())
}

fn round_sum(msgs: &[BroadcastMessage], round: usize, field: &Field, c: usize) -> Result<FieldVector> {
    msgs.iter().filter(|m| m.round == round).try_fold(FieldVector::zero(field, c), |acc, m| {
        let v = m.payload.as_vector().ok_or_else(|| Error::InvalidParameter("expected a vector payload".into()))?;
        acc.add(v)
    })
}

fn vector_outputs(run: &RunResult) -> Result<Vec<FieldVector>> {
    run.outputs
        .iter()
        .map(|o| {
            o.as_ref()
                .and_then(Payload::as_vector)
                .cloned()
                .ok_or_else(|| Error::InvalidParameter("party produced no vector output".into()))
        })
        .collect()
}

/// Result of a summation-style protocol: one output per party.
#[derive(Clone, Debug)]
pub struct SumRun {
    pub outputs: Vec<FieldVector>,
    pub transcript: Transcript,
}

/// Every party broadcasts `Z_i = Y_i + X_i` and outputs the sum of all `Z`.
pub fn secure_modulo_sum(
    inputs: &[FieldVector],
    bundle: &ZeroSumBundle,
    adversary: &AdversaryModel,
    tape: &mut dyn Tape,
) -> Result<SumRun> {
    check_inputs(inputs, bundle)?;
    allow(adversary, "secure-sum", &[Behavior::SemiHonest, Behavior::Rushing])?;
    let (field, c) = (bundle.field().clone(), bundle.c());
    let mut parties: Vec<Party<'_>> = (0..bundle.m())
        .map(|i| {
            let (y, x) = (&inputs[i], bundle.share(i));
            let field = field.clone();
            Box::new(FnParty::new(
                move |ctx: &mut RoundCtx<'_>| {
                    ctx.record("x", Payload::Vector(x.clone()));
                    ctx.record("y", Payload::Vector(y.clone()));
                    Ok(Some(Payload::Vector(y.add(x)?).into()))
                },
                move |_, msgs: &[BroadcastMessage]| Ok(Some(Payload::Vector(round_sum(msgs, 1, &field, c)?))),
            )) as Party<'_>
        })
        .collect();
    let run = run_rounds(&mut parties, 1, adversary, tape, 1)?;
    Ok(SumRun { outputs: vector_outputs(&run)?, transcript: run.transcript })
}

/// Summation oracle that runs [`secure_modulo_sum`] on a fresh ideal bundle.
pub fn protocol_sum_oracle<T: Tape>(ys: &[FieldVector], tape: &mut T) -> Result<FieldVector> {
    let first = ys.first().ok_or_else(|| Error::InvalidParameter("no inputs".into()))?;
    let bundle = ideal_mzsr(ys.len(), first.field(), first.len(), tape)?;
    let run = secure_modulo_sum(ys, &bundle, &AdversaryModel::honest(), tape)?;
    Ok(run.outputs[0].clone())
}

/// Zero-sum bundle generated from a secure summation, together with the
/// inner summation run so that composed views can be audited.
pub fn mzsr_via_secure_sum<T: Tape>(m: usize, field: &Field, c: usize, tape: &mut T) -> Result<(ZeroSumBundle, SumRun)> {
    let mut inner = None;
    let bundle = mzsr_from_summation(
        m,
        field,
        c,
        |ys: &[FieldVector], t: &mut T| {
            let b = ideal_mzsr(ys.len(), field, c, t)?;
            let run = secure_modulo_sum(ys, &b, &AdversaryModel::honest(), t)?;
            let total = run.outputs[0].clone();
            inner = Some(run);
            Ok(total)
        },
        tape,
    )?;
    Ok((bundle, inner.expect("oracle ran")))
}

/// Invertible `F_q`-linear map on `F_q^c`, stored as a row-major matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LinearMap {
    #[serde(skip)]
    field: Field,
    rows: Vec<Vec<u32>>,
}

impl LinearMap {
    pub fn new(field: &Field, rows: Vec<Vec<u32>>) -> Result<Self> {
        let c = rows.len();
        if c == 0 || rows.iter().any(|r| r.len() != c) {
            return Err(Error::InvalidParameter("linear map must be a non-empty square matrix".into()));
        }
        if rows.iter().flatten().any(|&v| v >= field.order()) {
            return Err(Error::InvalidParameter("matrix entry outside the field".into()));
        }
        let map = Self { field: field.clone(), rows };
        if map.rank() < c {
            return Err(Error::NotInvertible);
        }
        Ok(map)
    }

    pub fn identity(field: &Field, c: usize) -> Self {
        let rows = (0..c).map(|i| (0..c).map(|j| u32::from(i == j)).collect()).collect();
        Self { field: field.clone(), rows }
    }

    /// Output coordinate `i` is input coordinate `perm[i]`.
    pub fn permutation(field: &Field, perm: &[usize]) -> Result<Self> {
        let c = perm.len();
        let rows = perm.iter().map(|&p| (0..c).map(|j| u32::from(j == p)).collect()).collect();
        Self::new(field, rows)
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    fn rank(&self) -> usize {
        let f = &self.field;
        let mut a = self.rows.clone();
        let n = a.len();
        let mut rank = 0;
        for col in 0..n {
            let Some(piv) = (rank..n).find(|&r| a[r][col] != 0) else { continue };
            a.swap(rank, piv);
            let inv = f.inv_raw(a[rank][col]).expect("nonzero pivot");
            for r in 0..n {
                if r != rank && a[r][col] != 0 {
                    let k = f.mul_raw(a[r][col], inv);
                    for j in 0..n {
                        let sub = f.mul_raw(k, a[rank][j]);
                        a[r][j] = f.sub_raw(a[r][j], sub);
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    pub fn apply(&self, v: &FieldVector) -> Result<FieldVector> {
        if v.field() != &self.field {
            return Err(Error::FieldMismatch);
        }
        if v.len() != self.dim() {
            return Err(Error::LengthMismatch { expected: self.dim(), got: v.len() });
        }
        let f = &self.field;
        let values = self
            .rows
            .iter()
            .map(|row| row.iter().zip(v.values()).fold(0, |acc, (&a, &x)| f.add_raw(acc, f.mul_raw(a, x))))
            .collect();
        FieldVector::new(f.clone(), values)
    }
}

/// `f(Y_1..Y_m) = f~(alpha_1 Y_1 + ... + alpha_m Y_m)` with componentwise `alpha_i`.
#[derive(Clone, Debug, Serialize)]
pub struct HomomorphicSpec {
    pub alphas: Vec<FieldVector>,
    pub map: LinearMap,
}

impl HomomorphicSpec {
    pub fn new(alphas: Vec<FieldVector>, map: LinearMap) -> Result<Self> {
        for a in &alphas {
            if a.field() != &map.field {
                return Err(Error::FieldMismatch);
            }
            if a.len() != map.dim() {
                return Err(Error::LengthMismatch { expected: map.dim(), got: a.len() });
            }
        }
        Ok(Self { alphas, map })
    }

    /// All `alpha_i = 1` and `f~ = id`: plain summation.
    pub fn summation(field: &Field, m: usize, c: usize) -> Self {
        let ones = FieldVector::new(field.clone(), vec![1; c]).expect("one is in every field");
        Self { alphas: vec![ones; m], map: LinearMap::identity(field, c) }
    }

    /// Direct evaluation of `f`.
    pub fn evaluate(&self, inputs: &[FieldVector]) -> Result<FieldVector> {
        if inputs.len() != self.alphas.len() {
            return Err(Error::LengthMismatch { expected: self.alphas.len(), got: inputs.len() });
        }
        let terms = self.alphas.iter().zip(inputs).map(|(a, y)| a.hadamard(y)).collect::<Result<Vec<_>>>()?;
        self.map.apply(&FieldVector::sum(&terms)?)
    }

    fn message(&self, i: usize, x: &FieldVector, y: &FieldVector) -> Result<FieldVector> {
        self.map.apply(&x.add(&self.alphas[i].hadamard(y)?)?)
    }
}

/// Every party broadcasts `Z_i = f~(X_i + alpha_i Y_i)` and outputs `sum Z_i`.
pub fn homomorphic_compute(
    spec: &HomomorphicSpec,
    inputs: &[FieldVector],
    bundle: &ZeroSumBundle,
    adversary: &AdversaryModel,
    tape: &mut dyn Tape,
) -> Result<SumRun> {
    check_inputs(inputs, bundle)?;
    if spec.alphas.len() != bundle.m() || spec.map.dim() != bundle.c() || spec.map.field != *bundle.field() {
        return Err(Error::InvalidParameter("homomorphic spec does not match the bundle".into()));
    }
    allow(adversary, "homomorphic", &[Behavior::SemiHonest, Behavior::Rushing])?;
    let (field, c) = (bundle.field().clone(), bundle.c());
    let mut parties: Vec<Party<'_>> = (0..bundle.m())
        .map(|i| {
            let (y, x) = (&inputs[i], bundle.share(i));
            let field = field.clone();
            Box::new(FnParty::new(
                move |ctx: &mut RoundCtx<'_>| {
                    ctx.record("x", Payload::Vector(x.clone()));
                    ctx.record("y", Payload::Vector(y.clone()));
                    Ok(Some(Payload::Vector(spec.message(i, x, y)?).into()))
                },
                move |_, msgs: &[BroadcastMessage]| Ok(Some(Payload::Vector(round_sum(msgs, 1, &field, c)?))),
            )) as Party<'_>
        })
        .collect();
    let run = run_rounds(&mut parties, 1, adversary, tape, 2)?;
    Ok(SumRun { outputs: vector_outputs(&run)?, transcript: run.transcript })
}

fn world_label(
    corrupted: &BTreeSet<PartyId>,
    xs: &[(PartyId, FieldVector)],
    ys: &[(PartyId, FieldVector)],
    zs: &[FieldVector],
    honest_out: &[(PartyId, FieldVector)],
) -> String {
    let mut parts = Vec::new();
    for (p, x) in xs {
        parts.push(format!("x{p}={}", vec_label(x)));
    }
    for (p, y) in ys {
        parts.push(format!("y{p}={}", vec_label(y)));
    }
    for (k, z) in zs.iter().enumerate() {
        parts.push(format!("z{}={}", k + 1, vec_label(z)));
    }
    for (p, o) in honest_out {
        debug_assert!(!corrupted.contains(p));
        parts.push(format!("out{p}={}", vec_label(o)));
    }
    parts.join(";")
}

/// Exact Real and Ideal distributions for a fixed input vector.
///
/// Real: corrupted view `(X_T, Y_T, Z_1..Z_m)` plus honest outputs from the
/// protocol. Ideal: the simulator draws `X_T` from the zero-sum functionality,
/// computes `Z_T`, fills the honest `Z` uniformly except the last one, which
/// it fixes from the ideal output.
pub fn real_ideal_tables(
    spec: &HomomorphicSpec,
    inputs: &[FieldVector],
    corrupted: &BTreeSet<PartyId>,
) -> Result<(JointTable<BigRational>, JointTable<BigRational>)> {
    let m = spec.alphas.len();
    let field = spec.map.field.clone();
    let c = spec.map.dim();
    if corrupted.is_empty() || corrupted.len() > m - 1 || corrupted.iter().any(|p| p.get() > m) {
        return Err(Error::InvalidParameter("corrupted set must have size 1..=m-1".into()));
    }
    let honest: Vec<PartyId> = (0..m).map(PartyId::from_index).filter(|p| !corrupted.contains(p)).collect();
    let adversary = AdversaryModel::new(corrupted.iter().copied(), Behavior::SemiHonest);

    let mut real = TableBuilder::<BigRational>::new(["world"]);
    enumerate(PROTOCOL_ENUM_LIMIT, |tape| {
        let bundle = ideal_mzsr(m, &field, c, tape)?;
        let run = homomorphic_compute(spec, inputs, &bundle, &adversary, tape)?;
        let view = extract_view(&run.transcript, corrupted)?;
        let pick = |label: &str| -> Vec<(PartyId, FieldVector)> {
            corrupted
                .iter()
                .map(|&p| (p, view.private_value(p, label).and_then(Payload::as_vector).expect("recorded").clone()))
                .collect()
        };
        let zs: Vec<FieldVector> =
            view.public.iter().map(|msg| msg.payload.as_vector().expect("vector").clone()).collect();
        let outs: Vec<(PartyId, FieldVector)> = honest.iter().map(|&p| (p, run.outputs[p.index()].clone())).collect();
        real.add(&[world_label(corrupted, &pick("x"), &pick("y"), &zs, &outs)], &tape.weight())
    })?;

    let target = spec.evaluate(inputs)?;
    let mut ideal = TableBuilder::<BigRational>::new(["world"]);
    enumerate(PROTOCOL_ENUM_LIMIT, |tape| {
        let from_functionality = ideal_mzsr(m, &field, c, tape)?;
        let xs: Vec<(PartyId, FieldVector)> =
            corrupted.iter().map(|&p| (p, from_functionality.share(p.index()).clone())).collect();
        let ys: Vec<(PartyId, FieldVector)> = corrupted.iter().map(|&p| (p, inputs[p.index()].clone())).collect();
        let mut zs = vec![FieldVector::zero(&field, c); m];
        for ((p, x), (_, y)) in xs.iter().zip(&ys) {
            zs[p.index()] = spec.message(p.index(), x, y)?;
        }
        let (last, rest) = honest.split_last().expect("at least one honest party");
        for p in rest {
            zs[p.index()] = FieldVector::random(&field, c, tape);
        }
        let others: Vec<&FieldVector> =
            zs.iter().enumerate().filter(|(k, _)| *k != last.index()).map(|(_, z)| z).collect();
        zs[last.index()] = target.sub(&FieldVector::sum(others)?)?;
        let outs: Vec<(PartyId, FieldVector)> = honest.iter().map(|&p| (p, target.clone())).collect();
        ideal.add(&[world_label(corrupted, &xs, &ys, &zs, &outs)], &tape.weight())
    })?;
    Ok((real.build()?, ideal.build()?))
}

/// Exact `||Real - Ideal||_1`.
pub fn real_ideal_distance(
    spec: &HomomorphicSpec,
    inputs: &[FieldVector],
    corrupted: &BTreeSet<PartyId>,
) -> Result<BigRational> {
    let (real, ideal) = real_ideal_tables(spec, inputs, corrupted)?;
    l1_distance(&real, &ideal)
}

#[derive(Clone, Debug)]
pub struct ShareRun {
    pub reconstruction: FieldVector,
    pub transcript: Transcript,
}

/// Party 1 broadcasts `Z = X_1 + Y`; parties `2..m-1` broadcast their
/// shares; party `m` reconstructs `Z + X_2 + ... + X_m`.
pub fn secret_share_basic(
    secret: &FieldVector,
    bundle: &ZeroSumBundle,
    adversary: &AdversaryModel,
    tape: &mut dyn Tape,
) -> Result<ShareRun> {
    let m = bundle.m();
    if m < 3 {
        return Err(Error::InvalidParameter("secret sharing needs at least three parties".into()));
    }
    if secret.field() != bundle.field() || secret.len() != bundle.c() {
        return Err(Error::InvalidParameter("secret does not match the bundle".into()));
    }
    allow(adversary, "secret-share", &[Behavior::SemiHonest, Behavior::Rushing])?;
    let last = PartyId::from_index(m - 1);
    let mut parties: Vec<Party<'_>> = Vec::with_capacity(m);
    parties.push(Box::new(FnParty::new(
        move |ctx: &mut RoundCtx<'_>| {
            if ctx.round() != 1 {
                return Ok(None);
            }
            ctx.record("x", Payload::Vector(bundle.share(0).clone()));
            ctx.record("y", Payload::Vector(secret.clone()));
            let z = bundle.share(0).add(secret)?;
            Ok(Some(Outgoing { payload: Payload::Vector(z), recipients: Some(vec![last]) }))
        },
        no_output,
    )));
    for i in 1..m - 1 {
        let x = bundle.share(i);
        parties.push(Box::new(FnParty::new(
            move |ctx: &mut RoundCtx<'_>| {
                if ctx.round() != 2 {
                    ctx.record("x", Payload::Vector(x.clone()));
                    return Ok(None);
                }
                Ok(Some(Outgoing { payload: Payload::Vector(x.clone()), recipients: Some(vec![last]) }))
            },
            no_output,
        )));
    }
    let x_last = bundle.share(m - 1);
    parties.push(Box::new(FnParty::new(
        move |ctx: &mut RoundCtx<'_>| {
            if ctx.round() == 1 {
                ctx.record("x", Payload::Vector(x_last.clone()));
            }
            Ok(None)
        },
        move |_, msgs: &[BroadcastMessage]| {
            let z = round_sum(msgs, 1, x_last.field(), x_last.len())?;
            let shares = round_sum(msgs, 2, x_last.field(), x_last.len())?;
            Ok(Some(Payload::Vector(z.add(&shares)?.add(x_last)?)))
        },
    )));
    let run = run_rounds(&mut parties, 2, adversary, tape, 3)?;
    let reconstruction = run.outputs[m - 1]
        .as_ref()
        .and_then(Payload::as_vector)
        .cloned()
        .ok_or_else(|| Error::InvalidParameter("no reconstruction".into()))?;
    Ok(ShareRun { reconstruction, transcript: run.transcript })
}

/// Reconstruction result of the cheater-detectable protocol.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", content = "value", rename_all = "kebab-case")]
pub enum ShareOutcome {
    /// `Y'` lies in `F_q`.
    Accept(FieldElement),
    /// `Y'` lies outside `F_q`: cheating detected.
    Reject,
    /// `Z != 0` but the received shares sum to zero, so `Y'` is undefined.
    /// Party `m` treats this as cheating too.
    Singular,
    /// `Z = 0`: the dealing carried no information.
    Fail,
}

impl ShareOutcome {
    pub fn is_accept_of(&self, y: &FieldElement) -> bool {
        matches!(self, ShareOutcome::Accept(v) if v == y)
    }
}

#[derive(Clone, Debug)]
pub struct CheaterRun {
    pub outcome: ShareOutcome,
    pub transcript: Transcript,
}

/// Parties `2..m-1` first broadcast their shares; party 1 then deals
/// `Z = X_1 Y` in `F_{q'}`; party `m` computes `Y' = -Z (X_2 + ... + X_m)^{-1}`.
///
/// A modification adversary controls some of parties `2..m-1` and adds an
/// offset to the sum of their broadcasts. The offset is the adversary
/// parameter `offset` (packed element of `F_{q'}`) or, if absent, a uniform
/// nonzero element drawn from the tape.
pub fn secret_share_cheater_detect(
    secret: &FieldElement,
    ext: &ExtFieldSpec,
    bundle: &ZeroSumBundle,
    adversary: &AdversaryModel,
    tape: &mut dyn Tape,
) -> Result<CheaterRun> {
    let m = bundle.m();
    if m < 3 {
        return Err(Error::InvalidParameter("secret sharing needs at least three parties".into()));
    }
    bundle.check_shape(m, ext.base(), ext.degree())?;
    if secret.field() != ext.base() {
        return Err(Error::FieldMismatch);
    }
    if secret.is_zero() {
        return Err(Error::InvalidParameter("the secret must be nonzero".into()));
    }
    allow(adversary, "cheater-detect", &[Behavior::SemiHonest, Behavior::Modification])?;
    let modifier = if adversary.behavior == Behavior::Modification && !adversary.corrupted.is_empty() {
        if adversary.corrupted.iter().any(|p| p.get() < 2 || p.get() > m - 1) {
            return Err(Error::InvalidParameter("modification attackers must be among parties 2..m-1".into()));
        }
        let fixed = match adversary.params.get("offset") {
            Some(s) => Some(
                ext.field()
                    .element(s.parse().map_err(|_| Error::InvalidParameter(format!("bad offset {s}")))?)?,
            ),
            None => None,
        };
        adversary.corrupted.first().copied().map(|p| (p, fixed))
    } else {
        None
    };
    let last = PartyId::from_index(m - 1);
    let ext_field = ext.field().clone();
    let mut parties: Vec<Party<'_>> = Vec::with_capacity(m);
    parties.push(Box::new(FnParty::new(
        move |ctx: &mut RoundCtx<'_>| {
            if ctx.round() == 1 {
                ctx.record("x", Payload::Vector(bundle.share(0).clone()));
                ctx.record("y", Payload::Element(secret.clone()));
                return Ok(None);
            }
            let z = ext.lift(bundle.share(0))?.mul(&ext.embed(secret)?)?;
            Ok(Some(Outgoing { payload: Payload::Element(z), recipients: Some(vec![last]) }))
        },
        no_output,
    )));
    for i in 1..m - 1 {
        let party = PartyId::from_index(i);
        let x = bundle.share(i);
        let modifier = modifier.clone();
        let ext_field = ext_field.clone();
        parties.push(Box::new(FnParty::new(
            move |ctx: &mut RoundCtx<'_>| {
                if ctx.round() != 1 {
                    return Ok(None);
                }
                ctx.record("x", Payload::Vector(x.clone()));
                let mut sent = x.clone();
                if let Some((who, fixed)) = &modifier {
                    if *who == party {
                        let delta = match fixed {
                            Some(d) => d.clone(),
                            None => ext_field.element(1 + ctx.tape().draw(u64::from(ext_field.order()) - 1) as u32)?,
                        };
                        ctx.record("offset", Payload::Element(delta.clone()));
                        sent = ext.lower(&ext.lift(&sent)?.add(&delta)?)?;
                    }
                }
                Ok(Some(Outgoing { payload: Payload::Vector(sent), recipients: Some(vec![last]) }))
            },
            no_output,
        )));
    }
    let x_last = bundle.share(m - 1);
    parties.push(Box::new(FnParty::new(
        move |ctx: &mut RoundCtx<'_>| {
            if ctx.round() == 1 {
                ctx.record("x", Payload::Vector(x_last.clone()));
            }
            Ok(None)
        },
        move |_, msgs: &[BroadcastMessage]| {
            let z = msgs
                .iter()
                .find(|msg| msg.round == 2 && msg.sender == PartyId::from_index(0))
                .and_then(|msg| msg.payload.as_element())
                .ok_or_else(|| Error::InvalidParameter("no dealing message".into()))?;
            if z.is_zero() {
                return Ok(Some(Payload::Tag("fail".into())));
            }
            let v = ext.lift(&round_sum(msgs, 1, x_last.field(), x_last.len())?.add(x_last)?)?;
            if v.is_zero() {
                return Ok(Some(Payload::Tag("singular".into())));
            }
            let y = z.mul(&v.inv()?)?.neg();
            Ok(Some(match ext.restrict(&y) {
                Some(y) => Payload::Element(y),
                None => Payload::Tag(REJECT.into()),
            }))
        },
    )));
    let run = run_rounds(&mut parties, 2, adversary, tape, 4)?;
    let outcome = match &run.outputs[m - 1] {
        Some(Payload::Element(y)) => ShareOutcome::Accept(y.clone()),
        Some(Payload::Tag(t)) if t == "fail" => ShareOutcome::Fail,
        Some(Payload::Tag(t)) if t == "singular" => ShareOutcome::Singular,
        _ => ShareOutcome::Reject,
    };
    Ok(CheaterRun { outcome, transcript: run.transcript })
}

/// Toeplitz hash `T` (e x d) and mask `A` carved from one share.
///
/// Layout: the first column of `T` is `seed[0..e]`, the rest of the first
/// row is `seed[e..e+d-1]`, and `A = share[e+d-1..2e+d-1]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MacParams {
    pub e: usize,
    pub d: usize,
    pub seed: FieldVector,
    pub mask: FieldVector,
}

impl MacParams {
    pub fn from_share(share: &FieldVector, e: usize, d: usize) -> Result<Self> {
        if e == 0 || d == 0 {
            return Err(Error::InvalidParameter("e and d must be positive".into()));
        }
        if share.len() != 2 * e + d - 1 {
            return Err(Error::InvalidParameter(format!(
                "share length {} does not equal 2e+d-1 = {}",
                share.len(),
                2 * e + d - 1
            )));
        }
        Ok(Self { e, d, seed: share.slice(0, e + d - 1), mask: share.slice(e + d - 1, e) })
    }

    pub fn field(&self) -> &Field {
        self.seed.field()
    }

    pub fn entry(&self, i: usize, j: usize) -> u32 {
        if i >= j {
            self.seed.values()[i - j]
        } else {
            self.seed.values()[self.e - 1 + (j - i)]
        }
    }

    pub fn matrix(&self) -> Vec<Vec<u32>> {
        (0..self.e).map(|i| (0..self.d).map(|j| self.entry(i, j)).collect()).collect()
    }

    /// `T y`.
    pub fn hash(&self, y: &FieldVector) -> Result<FieldVector> {
        if y.field() != self.field() {
            return Err(Error::FieldMismatch);
        }
        if y.len() != self.d {
            return Err(Error::LengthMismatch { expected: self.d, got: y.len() });
        }
        let f = self.field();
        let values = (0..self.e)
            .map(|i| (0..self.d).fold(0, |acc, j| f.add_raw(acc, f.mul_raw(self.entry(i, j), y.values()[j]))))
            .collect();
        FieldVector::new(f.clone(), values)
    }

    /// `T y + A`.
    pub fn tag(&self, y: &FieldVector) -> Result<FieldVector> {
        self.hash(y)?.add(&self.mask)
    }
}

pub fn derive_mac_params(bundle: &ZeroSumBundle, e: usize, d: usize) -> Result<Vec<MacParams>> {
    bundle.shares().iter().map(|x| MacParams::from_share(x, e, d)).collect()
}

/// Inputs of an anonymous-authentication round.
#[derive(Clone, Debug)]
pub struct AuthSetup {
    pub project: FieldVector,
    /// Project as recognized by each party.
    pub recognized: Vec<FieldVector>,
    pub approve: Vec<bool>,
}

impl AuthSetup {
    /// Everyone recognizes `project` and approves.
    pub fn unanimous(project: FieldVector, m: usize) -> Self {
        Self { recognized: vec![project.clone(); m], approve: vec![true; m], project }
    }

    fn check(&self, params: &[MacParams]) -> Result<()> {
        let m = params.len();
        if self.recognized.len() != m || self.approve.len() != m {
            return Err(Error::LengthMismatch { expected: m, got: self.recognized.len().min(self.approve.len()) });
        }
        for y in std::iter::once(&self.project).chain(&self.recognized) {
            if y.len() != params[0].d || y.field() != params[0].field() {
                return Err(Error::InvalidParameter("project does not match the MAC dimensions".into()));
            }
        }
        Ok(())
    }
}

/// Vote chosen by a corrupted party from what it can see.
pub type VoteStrategy<'s> = dyn Fn(PartyId, &[BroadcastMessage]) -> Result<FieldVector> + 's;

#[derive(Clone, Debug)]
pub struct AuthRun {
    pub accepted: bool,
    pub transcript: Transcript,
}

fn honest_vote(
    ctx: &mut RoundCtx<'_>,
    params: &MacParams,
    recognized: &FieldVector,
    approve: bool,
) -> Result<FieldVector> {
    ctx.record("x", Payload::Vector(params.seed.clone()));
    if approve {
        params.tag(recognized)
    } else {
        Ok(FieldVector::random(params.field(), params.e, ctx.tape()))
    }
}

fn rushing_vote(me: PartyId, msgs: &[BroadcastMessage], round: usize, field: &Field, e: usize) -> Result<FieldVector> {
    let others: Vec<&FieldVector> = msgs
        .iter()
        .filter(|msg| msg.round == round && msg.sender != me)
        .filter_map(|msg| msg.payload.as_vector())
        .collect();
    Ok(others.into_iter().try_fold(FieldVector::zero(field, e), |acc, v| acc.add(v))?.neg())
}

/// Every party broadcasts its vote `B_i`; all accept iff `sum B_i = 0`.
///
/// Approving parties vote `T_i Y_i + A_i`, disapproving ones a uniform
/// vector. Corrupted parties use `strategy` if given; a rushing corrupted
/// party without one votes minus the sum of the votes it has seen.
pub fn anon_auth_basic(
    setup: &AuthSetup,
    params: &[MacParams],
    adversary: &AdversaryModel,
    strategy: Option<&VoteStrategy<'_>>,
    tape: &mut dyn Tape,
) -> Result<AuthRun> {
    setup.check(params)?;
    allow(adversary, "anon-auth", &[Behavior::SemiHonest, Behavior::Rushing, Behavior::MismatchedRecognition])?;
    let m = params.len();
    let field = params[0].field().clone();
    let e = params[0].e;
    let mut parties: Vec<Party<'_>> = Vec::with_capacity(m);
    for i in 0..m {
        let party = PartyId::from_index(i);
        let corrupt = adversary.is_corrupted(party);
        let rushing = corrupt && adversary.behavior == Behavior::Rushing;
        let (p, y, ok) = (&params[i], &setup.recognized[i], setup.approve[i]);
        let field = field.clone();
        let field2 = field.clone();
        parties.push(Box::new(FnParty::new(
            move |ctx: &mut RoundCtx<'_>| {
                let vote = match strategy {
                    Some(s) if corrupt => {
                        ctx.record("x", Payload::Vector(p.seed.clone()));
                        s(party, ctx.messages())?
                    }
                    _ if rushing => {
                        ctx.record("x", Payload::Vector(p.seed.clone()));
                        rushing_vote(party, ctx.messages(), 1, &field, e)?
                    }
                    _ => honest_vote(ctx, p, y, ok)?,
                };
                Ok(Some(Payload::Vector(vote).into()))
            },
            move |_, msgs: &[BroadcastMessage]| {
                let total = round_sum(msgs, 1, &field2, e)?;
                Ok(Some(Payload::Tag(if total.is_zero() { ACCEPT } else { REJECT }.into())))
            },
        )));
    }
    let run = run_rounds(&mut parties, 1, adversary, tape, 5)?;
    let accepted = run.outputs.iter().all(|o| o.as_ref().and_then(Payload::as_tag) == Some(ACCEPT));
    Ok(AuthRun { accepted, transcript: run.transcript })
}

/// Parties `2..m` send their votes to the trusted party 1, which adds
/// `B_1 = T_1 Y_1 + A_1` and broadcasts the verdict.
pub fn anon_auth_secure(
    setup: &AuthSetup,
    params: &[MacParams],
    adversary: &AdversaryModel,
    strategy: Option<&VoteStrategy<'_>>,
    tape: &mut dyn Tape,
) -> Result<AuthRun> {
    setup.check(params)?;
    allow(adversary, "anon-auth-secure", &[Behavior::SemiHonest, Behavior::Rushing, Behavior::MismatchedRecognition])?;
    let first = PartyId::from_index(0);
    if adversary.is_corrupted(first) {
        return Err(Error::InvalidParameter("party 1 is trusted and cannot be corrupted".into()));
    }
    let m = params.len();
    let field = params[0].field().clone();
    let e = params[0].e;
    let mut parties: Vec<Party<'_>> = Vec::with_capacity(m);
    let (p1, y1) = (&params[0], &setup.recognized[0]);
    parties.push(Box::new(FnParty::new(
        move |ctx: &mut RoundCtx<'_>| {
            if ctx.round() == 1 {
                ctx.record("x", Payload::Vector(p1.seed.clone()));
                return Ok(None);
            }
            let total = round_sum(ctx.messages(), 1, &field, e)?.add(&p1.tag(y1)?)?;
            Ok(Some(Payload::Tag(if total.is_zero() { ACCEPT } else { REJECT }.into()).into()))
        },
        no_output,
    )));
    for i in 1..m {
        let party = PartyId::from_index(i);
        let corrupt = adversary.is_corrupted(party);
        let (p, y, ok) = (&params[i], &setup.recognized[i], setup.approve[i]);
        parties.push(Box::new(FnParty::new(
            move |ctx: &mut RoundCtx<'_>| {
                if ctx.round() != 1 {
                    return Ok(None);
                }
                let vote = match strategy {
                    Some(s) if corrupt => {
                        ctx.record("x", Payload::Vector(p.seed.clone()));
                        s(party, ctx.messages())?
                    }
                    _ => honest_vote(ctx, p, y, ok)?,
                };
                Ok(Some(Outgoing { payload: Payload::Vector(vote), recipients: Some(vec![first]) }))
            },
            no_output,
        )));
    }
    let run = run_rounds(&mut parties, 2, adversary, tape, 6)?;
    let accepted = run.transcript.sent(first, 2).and_then(Payload::as_tag) == Some(ACCEPT);
    Ok(AuthRun { accepted, transcript: run.transcript })
}

/// CLI-facing description of a protocol.
#[derive(Clone, Debug, Serialize)]
pub struct ProtocolDescriptor {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: &'static [&'static str],
    pub adversaries: &'static [Behavior],
}

pub const REGISTRY: &[ProtocolDescriptor] = &[
    ProtocolDescriptor {
        name: "secure-sum",
        summary: "broadcast Y_i + X_i, output the sum",
        params: &["m", "q", "c", "inputs"],
        adversaries: &[Behavior::SemiHonest, Behavior::Rushing],
    },
    ProtocolDescriptor {
        name: "homomorphic",
        summary: "broadcast f~(X_i + alpha_i Y_i), output the sum",
        params: &["m", "q", "c", "inputs", "alphas", "map"],
        adversaries: &[Behavior::SemiHonest, Behavior::Rushing],
    },
    ProtocolDescriptor {
        name: "secret-share",
        summary: "deal X_1 + Y, reconstruct at party m",
        params: &["m", "q", "c", "secret"],
        adversaries: &[Behavior::SemiHonest, Behavior::Rushing],
    },
    ProtocolDescriptor {
        name: "cheater-detect",
        summary: "deal X_1 Y in F_{q^c}, detect modified shares",
        params: &["m", "q", "c", "secret"],
        adversaries: &[Behavior::SemiHonest, Behavior::Modification],
    },
    ProtocolDescriptor {
        name: "anon-auth",
        summary: "broadcast Toeplitz tags, accept on zero sum",
        params: &["m", "q", "e", "d", "project", "approve"],
        adversaries: &[Behavior::SemiHonest, Behavior::Rushing, Behavior::MismatchedRecognition],
    },
    ProtocolDescriptor {
        name: "anon-auth-secure",
        summary: "send tags to trusted party 1, which announces the verdict",
        params: &["m", "q", "e", "d", "project", "approve"],
        adversaries: &[Behavior::SemiHonest, Behavior::Rushing, Behavior::MismatchedRecognition],
    },
];

pub fn descriptor(name: &str) -> Option<&'static ProtocolDescriptor> {
    REGISTRY.iter().find(|d| d.name == name)
}
