//! Synchronous broadcast channel with round-structured party programs.
//!
//! Every posted message is delivered unchanged to every party. Within a
//! round honest parties act on the messages of earlier rounds only; a
//! rushing adversary's corrupted parties act after them and also see the
//! honest messages of the current round.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::field::{FieldElement, FieldVector};
use crate::tape::Tape;
use crate::{Error, Result};

/// One-based party index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct PartyId(usize);

impl PartyId {
    pub fn new(i: usize) -> Result<Self> {
        if i == 0 {
            return Err(Error::InvalidParameter("party ids start at 1".into()));
        }
        Ok(Self(i))
    }

    /// Party for a zero-based index.
    pub fn from_index(i: usize) -> Self {
        Self(i + 1)
    }

    pub fn get(self) -> usize {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 - 1
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "type", content = "value", rename_all = "kebab-case")]
pub enum Payload {
    Vector(FieldVector),
    Element(FieldElement),
    Tag(String),
}

impl Payload {
    /// Canonical text form used in view encodings.
    pub fn label(&self) -> String {
        let join = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
        match self {
            Payload::Vector(v) => format!("v[{}]", join(v.values())),
            Payload::Element(e) => format!("e{}", e.value()),
            Payload::Tag(t) => format!("t:{t}"),
        }
    }

    pub fn as_vector(&self) -> Option<&FieldVector> {
        match self {
            Payload::Vector(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_element(&self) -> Option<&FieldElement> {
        match self {
            Payload::Element(e) => Some(e),
            _ => None,
        }
    }

    pub fn as_tag(&self) -> Option<&str> {
        match self {
            Payload::Tag(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BroadcastMessage {
    pub sid: u64,
    pub round: usize,
    pub sender: PartyId,
    pub payload: Payload,
    /// Intended receivers; the channel still delivers to everyone.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recipients: Option<Vec<PartyId>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PrivateEntry {
    pub label: String,
    pub payload: Payload,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Transcript {
    pub sid: u64,
    messages: Vec<BroadcastMessage>,
    tapes: BTreeMap<PartyId, Vec<PrivateEntry>>,
}

impl Transcript {
    pub fn new(sid: u64) -> Self {
        Self { sid, ..Default::default() }
    }

    pub fn messages(&self) -> &[BroadcastMessage] {
        &self.messages
    }

    pub fn tape(&self, p: PartyId) -> &[PrivateEntry] {
        self.tapes.get(&p).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Payload of `sender` in `round`.
    pub fn sent(&self, sender: PartyId, round: usize) -> Option<&Payload> {
        self.messages.iter().find(|m| m.sender == sender && m.round == round).map(|m| &m.payload)
    }

    /// Record a private value held by `p` (inputs, shares).
    pub fn record(&mut self, p: PartyId, label: impl Into<String>, payload: Payload) {
        self.tapes.entry(p).or_default().push(PrivateEntry { label: label.into(), payload });
    }

    /// One JSON object per message: `{sid, round, sender, payload}`.
    pub fn to_jsonl(&self) -> String {
        self.messages
            .iter()
            .map(|m| {
                serde_json::json!({ "sid": m.sid, "round": m.round, "sender": m.sender, "payload": m.payload })
                    .to_string()
                    + "\n"
            })
            .collect()
    }

    /// SHA-256 over the message lines and the private tapes.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_jsonl().as_bytes());
        h.update(serde_json::to_string(&self.tapes).expect("tapes serialize").as_bytes());
        hex::encode(h.finalize())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Behavior {
    SemiHonest,
    Modification,
    Rushing,
    MismatchedRecognition,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AdversaryModel {
    pub corrupted: BTreeSet<PartyId>,
    pub behavior: Behavior,
    pub params: BTreeMap<String, String>,
}

impl AdversaryModel {
    pub fn honest() -> Self {
        Self { corrupted: BTreeSet::new(), behavior: Behavior::SemiHonest, params: BTreeMap::new() }
    }

    pub fn new(corrupted: impl IntoIterator<Item = PartyId>, behavior: Behavior) -> Self {
        Self { corrupted: corrupted.into_iter().collect(), behavior, params: BTreeMap::new() }
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.into(), value.to_string());
        self
    }

    pub fn is_corrupted(&self, p: PartyId) -> bool {
        self.corrupted.contains(&p)
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.corrupted.len() > m.saturating_sub(1) {
            return Err(Error::InvalidParameter(format!("at most {} of {m} parties may be corrupted", m - 1)));
        }
        if let Some(p) = self.corrupted.iter().find(|p| p.get() > m) {
            return Err(Error::InvalidParameter(format!("party {p} outside 1..={m}")));
        }
        Ok(())
    }
}

/// What a party sees while producing its message for a round.
pub struct RoundCtx<'a> {
    party: PartyId,
    round: usize,
    m: usize,
    board: &'a [BroadcastMessage],
    tape: &'a mut dyn Tape,
    private: &'a mut Vec<PrivateEntry>,
}

impl RoundCtx<'_> {
    pub fn party(&self) -> PartyId {
        self.party
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Every message visible to this party.
    pub fn messages(&self) -> &[BroadcastMessage] {
        self.board
    }

    pub fn sent(&self, sender: PartyId, round: usize) -> Option<&Payload> {
        self.board.iter().find(|m| m.sender == sender && m.round == round).map(|m| &m.payload)
    }

    pub fn tape(&mut self) -> &mut dyn Tape {
        self.tape
    }

    pub fn record(&mut self, label: impl Into<String>, payload: Payload) {
        self.private.push(PrivateEntry { label: label.into(), payload });
    }
}

/// A party's message for one round.
#[derive(Clone, Debug)]
pub struct Outgoing {
    pub payload: Payload,
    pub recipients: Option<Vec<PartyId>>,
}

impl From<Payload> for Outgoing {
    fn from(payload: Payload) -> Self {
        Self { payload, recipients: None }
    }
}

pub trait PartyProgram {
    /// Message for the current round, if any.
    fn act(&mut self, ctx: &mut RoundCtx<'_>) -> Result<Option<Outgoing>>;

    /// Local output after the last round.
    fn output(&mut self, _party: PartyId, _messages: &[BroadcastMessage]) -> Result<Option<Payload>> {
        Ok(None)
    }
}

/// Party program from a pair of closures.
pub struct FnParty<A, O> {
    act: A,
    output: O,
}

impl<A, O> FnParty<A, O>
where
    A: FnMut(&mut RoundCtx<'_>) -> Result<Option<Outgoing>>,
    O: FnMut(PartyId, &[BroadcastMessage]) -> Result<Option<Payload>>,
{
    pub fn new(act: A, output: O) -> Self {
        Self { act, output }
    }
}

impl<A, O> PartyProgram for FnParty<A, O>
where
    A: FnMut(&mut RoundCtx<'_>) -> Result<Option<Outgoing>>,
    O: FnMut(PartyId, &[BroadcastMessage]) -> Result<Option<Payload>>,
{
    fn act(&mut self, ctx: &mut RoundCtx<'_>) -> Result<Option<Outgoing>> {
        (self.act)(ctx)
    }

    fn output(&mut self, party: PartyId, messages: &[BroadcastMessage]) -> Result<Option<Payload>> {
        (self.output)(party, messages)
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub transcript: Transcript,
    /// Output of party `i + 1` at index `i`.
    pub outputs: Vec<Option<Payload>>,
}

/// Run `rounds` synchronous rounds. Party `i + 1` runs `parties[i]`.
///
/// Randomness comes from one shared tape consumed in a fixed party order,
/// so a run is a deterministic function of the tape.
pub fn run_rounds(
    parties: &mut [Box<dyn PartyProgram + '_>],
    rounds: usize,
    adversary: &AdversaryModel,
    tape: &mut dyn Tape,
    sid: u64,
) -> Result<RunResult> {
    let m = parties.len();
    adversary.validate(m)?;
    let mut transcript = Transcript::new(sid);
    let mut private: Vec<Vec<PrivateEntry>> = vec![Vec::new(); m];
    let rushing = adversary.behavior == Behavior::Rushing;
    for round in 1..=rounds {
        let mut order: Vec<usize> = (0..m).collect();
        if rushing {
            order.sort_by_key(|&i| adversary.is_corrupted(PartyId::from_index(i)));
        }
        let start = transcript.messages.len();
        let mut posted: Vec<BroadcastMessage> = Vec::new();
        for i in order {
            let party = PartyId::from_index(i);
            // Board: earlier rounds, plus this round's honest messages for a rushing corrupted party.
            let mut board = transcript.messages[..start].to_vec();
            if rushing && adversary.is_corrupted(party) {
                board.extend(posted.iter().filter(|msg| !adversary.is_corrupted(msg.sender)).cloned());
            }
            let mut ctx = RoundCtx { party, round, m, board: &board, tape: &mut *tape, private: &mut private[i] };
            let out = parties[i]
                .act(&mut ctx)
                .map_err(|e| Error::PartyFault { party: party.get(), round, reason: e.to_string() })?;
            if let Some(out) = out {
                posted.push(BroadcastMessage { sid, round, sender: party, payload: out.payload, recipients: out.recipients });
            }
        }
        posted.sort_by_key(|msg| msg.sender);
        transcript.messages.extend(posted);
    }
    for (i, entries) in private.into_iter().enumerate() {
        for e in entries {
            transcript.record(PartyId::from_index(i), e.label, e.payload);
        }
    }
    let mut outputs = Vec::with_capacity(m);
    for (i, p) in parties.iter_mut().enumerate() {
        let party = PartyId::from_index(i);
        outputs.push(
            p.output(party, &transcript.messages)
                .map_err(|e| Error::PartyFault { party: party.get(), round: rounds + 1, reason: e.to_string() })?,
        );
    }
    Ok(RunResult { transcript, outputs })
}

/// Joint view of a set of parties: all broadcasts plus their private tapes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct View {
    pub parties: Vec<PartyId>,
    pub public: Vec<BroadcastMessage>,
    pub private: Vec<(PartyId, PrivateEntry)>,
}

impl View {
    /// Canonical string; equal views encode identically.
    pub fn encode(&self) -> String {
        let mut parts: Vec<String> =
            self.public.iter().map(|m| format!("r{}.p{}={}", m.round, m.sender, m.payload.label())).collect();
        parts.extend(self.private.iter().map(|(p, e)| format!("p{}.{}={}", p, e.label, e.payload.label())));
        parts.join(";")
    }

    /// Private entry `label` of party `p`.
    pub fn private_value(&self, p: PartyId, label: &str) -> Option<&Payload> {
        self.private.iter().find(|(q, e)| *q == p && e.label == label).map(|(_, e)| &e.payload)
    }

    pub fn len(&self) -> usize {
        self.public.len() + self.private.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn extract_view(transcript: &Transcript, subset: &BTreeSet<PartyId>) -> Result<View> {
    if subset.is_empty() {
        return Err(Error::InvalidParameter("view of an empty party set".into()));
    }
    let private = subset.iter().flat_map(|&p| transcript.tape(p).iter().map(move |e| (p, e.clone()))).collect();
    Ok(View { parties: subset.iter().copied().collect(), public: transcript.messages.clone(), private })
}

/// `{a, b, ...}` from one-based indices.
pub fn party_set(ids: &[usize]) -> Result<BTreeSet<PartyId>> {
    ids.iter().map(|&i| PartyId::new(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;
    use crate::tape::seeded_rng;

    fn broadcaster(value: u32) -> Box<dyn PartyProgram> {
        let f = Field::prime(5).unwrap();
        Box::new(FnParty::new(
            move |ctx: &mut RoundCtx<'_>| {
                let noise = ctx.tape().draw(5) as u32;
                ctx.record("input", Payload::Element(f.element(value).unwrap()));
                Ok(Some(Payload::Element(f.element((value + noise) % 5).unwrap()).into()))
            },
            |_, msgs: &[BroadcastMessage]| Ok(Some(Payload::Tag(msgs.len().to_string()))),
        ))
    }

    #[test]
    fn honest_broadcasts_reach_everyone() {
        let mut parties: Vec<Box<dyn PartyProgram>> = (0..3).map(broadcaster).collect();
        let mut rng = seeded_rng(1, 0);
        let run = run_rounds(&mut parties, 1, &AdversaryModel::honest(), &mut rng, 0).unwrap();
        assert_eq!(run.transcript.messages().len(), 3);
        assert!(run.outputs.iter().all(|o| o == &Some(Payload::Tag("3".into()))));
    }

    #[test]
    fn replay_is_bit_identical() {
        let go = || {
            let mut parties: Vec<Box<dyn PartyProgram>> = (0..3).map(broadcaster).collect();
            let mut rng = seeded_rng(9, 0);
            run_rounds(&mut parties, 2, &AdversaryModel::honest(), &mut rng, 4).unwrap().transcript
        };
        let (a, b) = (go(), go());
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        assert_eq!(a.digest(), a.digest());
    }

    #[test]
    fn rushing_party_sees_current_round() {
        let f = Field::prime(5).unwrap();
        let mut parties: Vec<Box<dyn PartyProgram>> = vec![broadcaster(1), broadcaster(2)];
        let f2 = f.clone();
        parties.push(Box::new(FnParty::new(
            move |ctx: &mut RoundCtx<'_>| {
                let sum = ctx
                    .messages()
                    .iter()
                    .filter(|m| m.round == ctx.round())
                    .map(|m| m.payload.as_element().unwrap().value())
                    .sum::<u32>();
                Ok(Some(Payload::Element(f2.element((5 - sum % 5) % 5).unwrap()).into()))
            },
            |_, _: &[BroadcastMessage]| Ok(None),
        )));
        let adv = AdversaryModel::new([PartyId::new(3).unwrap()], Behavior::Rushing);
        let mut rng = seeded_rng(2, 0);
        let run = run_rounds(&mut parties, 1, &adv, &mut rng, 0).unwrap();
        let total: u32 = run.transcript.messages().iter().map(|m| m.payload.as_element().unwrap().value()).sum();
        assert_eq!(total % 5, 0);
        // senders are ordered within the round
        let senders: Vec<usize> = run.transcript.messages().iter().map(|m| m.sender.get()).collect();
        assert_eq!(senders, vec![1, 2, 3]);

        // without rushing the same program sees nothing from the current round
        let mut parties: Vec<Box<dyn PartyProgram>> = vec![broadcaster(1), broadcaster(2)];
        parties.push(Box::new(FnParty::new(
            move |ctx: &mut RoundCtx<'_>| {
                assert!(ctx.messages().iter().all(|m| m.round < ctx.round()));
                Ok(Some(Payload::Element(f.zero()).into()))
            },
            |_, _: &[BroadcastMessage]| Ok(None),
        )));
        let adv = AdversaryModel::new([PartyId::new(3).unwrap()], Behavior::SemiHonest);
        run_rounds(&mut parties, 1, &adv, &mut rng, 0).unwrap();
    }

    #[test]
    fn faults_and_adversary_limits() {
        let mut parties: Vec<Box<dyn PartyProgram>> = vec![
            broadcaster(0),
            Box::new(FnParty::new(
                |_: &mut RoundCtx<'_>| Err(Error::InvalidParameter("boom".into())),
                |_, _: &[BroadcastMessage]| Ok(None),
            )),
        ];
        let mut rng = seeded_rng(3, 0);
        let err = run_rounds(&mut parties, 1, &AdversaryModel::honest(), &mut rng, 0).unwrap_err();
        assert!(matches!(err, Error::PartyFault { party: 2, round: 1, .. }));
        let all = AdversaryModel::new(party_set(&[1, 2]).unwrap(), Behavior::SemiHonest);
        assert!(all.validate(2).is_err());
        assert!(PartyId::new(0).is_err());
    }

    #[test]
    fn views() {
        let mut parties: Vec<Box<dyn PartyProgram>> = (0..3).map(broadcaster).collect();
        let mut rng = seeded_rng(4, 0);
        let run = run_rounds(&mut parties, 1, &AdversaryModel::honest(), &mut rng, 0).unwrap();
        let t = &run.transcript;
        let all = extract_view(t, &party_set(&[1, 2, 3]).unwrap()).unwrap();
        assert_eq!(all.public.len(), 3);
        assert_eq!(all.private.len(), 3);
        let one = extract_view(t, &party_set(&[2]).unwrap()).unwrap();
        assert_eq!(one.public, all.public);
        assert!(one.private_value(PartyId::new(2).unwrap(), "input").is_some());
        assert!(one.private_value(PartyId::new(1).unwrap(), "input").is_none());
        assert!(extract_view(t, &BTreeSet::new()).is_err());
        assert_ne!(one.encode(), all.encode());
        let line = t.to_jsonl().lines().next().unwrap().to_string();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        for key in ["sid", "round", "sender", "payload"] {
            assert!(v.get(key).is_some());
        }
    }
}
