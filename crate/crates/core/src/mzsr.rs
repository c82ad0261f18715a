//! Modulo zero-sum randomness: shares `X_1..X_m` in `F_q^c` with
//! `X_1 + ... + X_m = 0` and any `m - 1` of them uniform and independent.
//!
//! Share indices are zero-based here; share `i` belongs to party `i + 1`.

use std::collections::HashMap;

use num_rational::BigRational;
use rand::Rng;
use serde::Serialize;

use crate::analysis::Weight;
use crate::field::{Field, FieldVector};
use crate::quantum::{self, NoiseModel};
use crate::tape::{ExhaustiveTape, Tape};
use crate::{Error, Result};

/// Enumeration cap for exact audits.
pub const AUDIT_LIMIT: u64 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    Ideal,
    Ring,
    Quantum { noise: String },
    FromSummation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZeroSumBundle {
    field: Field,
    c: usize,
    shares: Vec<FieldVector>,
    provenance: Provenance,
    seed: Option<u64>,
}

impl ZeroSumBundle {
    /// Bundle whose shares must sum to zero.
    pub fn new(shares: Vec<FieldVector>, provenance: Provenance) -> Result<Self> {
        let b = Self::unchecked(shares, provenance)?;
        if !b.is_zero_sum() {
            return Err(Error::InvalidParameter("shares do not sum to zero".into()));
        }
        Ok(b)
    }

    /// Bundle that may violate the zero-sum condition (noisy sources, attack fixtures).
    pub fn unchecked(shares: Vec<FieldVector>, provenance: Provenance) -> Result<Self> {
        if shares.len() < 2 {
            return Err(Error::InvalidParameter("a bundle needs at least two shares".into()));
        }
        let field = shares[0].field().clone();
        let c = shares[0].len();
        for s in &shares {
            if s.field() != &field {
                return Err(Error::FieldMismatch);
            }
            if s.len() != c {
                return Err(Error::LengthMismatch { expected: c, got: s.len() });
            }
        }
        Ok(Self { field, c, shares, provenance, seed: None })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn m(&self) -> usize {
        self.shares.len()
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn shares(&self) -> &[FieldVector] {
        &self.shares
    }

    /// Share of party `i + 1`.
    pub fn share(&self, i: usize) -> &FieldVector {
        &self.shares[i]
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn is_zero_sum(&self) -> bool {
        FieldVector::sum(&self.shares).map(|s| s.is_zero()).unwrap_or(false)
    }

    /// Check that the bundle fits `m` parties over `field` with length `c`.
    pub fn check_shape(&self, m: usize, field: &Field, c: usize) -> Result<()> {
        if &self.field != field {
            return Err(Error::FieldMismatch);
        }
        if self.m() != m {
            return Err(Error::LengthMismatch { expected: m, got: self.m() });
        }
        if self.c != c {
            return Err(Error::LengthMismatch { expected: c, got: self.c });
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "m": self.m(),
            "q": self.field.order(),
            "c": self.c,
            "shares": self.shares,
            "provenance": self.provenance,
            "seed": self.seed,
        })
    }
}

fn check_params(m: usize, c: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::InvalidParameter("need at least two parties".into()));
    }
    if c == 0 {
        return Err(Error::InvalidParameter("share length must be positive".into()));
    }
    Ok(())
}

/// `X_1..X_{m-1}` uniform, `X_m = -(X_1 + ... + X_{m-1})`.
pub fn ideal_mzsr<T: Tape + ?Sized>(m: usize, field: &Field, c: usize, tape: &mut T) -> Result<ZeroSumBundle> {
    check_params(m, c)?;
    let mut shares: Vec<FieldVector> = (0..m - 1).map(|_| FieldVector::random(field, c, tape)).collect();
    shares.push(FieldVector::sum(&shares)?.neg());
    ZeroSumBundle::new(shares, Provenance::Ideal)
}

/// Ring construction from keys `Z_i` shared by neighbours `i` and `i + 1`:
/// `X_1 = Z_1 - Z_m`, `X_i = Z_i - Z_{i-1}`.
pub fn ring_mzsr(keys: &[FieldVector]) -> Result<ZeroSumBundle> {
    let m = keys.len();
    if m < 2 {
        return Err(Error::InvalidParameter("need at least two keys".into()));
    }
    let shares = (0..m).map(|i| keys[i].sub(&keys[(i + m - 1) % m])).collect::<Result<Vec<_>>>()?;
    ZeroSumBundle::new(shares, Provenance::Ring)
}

/// Ring construction with uniformly drawn keys.
pub fn ring_mzsr_random<T: Tape + ?Sized>(m: usize, field: &Field, c: usize, tape: &mut T) -> Result<ZeroSumBundle> {
    check_params(m, c)?;
    let keys: Vec<FieldVector> = (0..m).map(|_| FieldVector::random(field, c, tape)).collect();
    ring_mzsr(&keys)
}

pub fn noise_label(noise: &NoiseModel) -> String {
    match noise {
        NoiseModel::None => "none".into(),
        NoiseModel::Depolarizing(e) => format!("depolarizing({e})"),
        NoiseModel::Dephasing(e) => format!("dephasing({e})"),
        NoiseModel::Replacement { prob, .. } => format!("replacement({prob})"),
    }
}

/// Computational-basis outcomes of `c` independent (possibly noisy) phase
/// GHZ registers. Noisy bundles may violate the zero-sum condition.
pub fn quantum_mzsr<R: Rng + ?Sized>(
    m: usize,
    field: &Field,
    c: usize,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<ZeroSumBundle> {
    check_params(m, c)?;
    let ghz = quantum::ghz_phase_state(m, field)?;
    let mut cols = Vec::with_capacity(c);
    for _ in 0..c {
        let reg = quantum::apply_noise(&ghz, noise, rng)?;
        cols.push(quantum::measure_computational(&reg, rng)?.0);
    }
    let shares = (0..m)
        .map(|i| FieldVector::new(field.clone(), cols.iter().map(|col| col[i]).collect()))
        .collect::<Result<Vec<_>>>()?;
    ZeroSumBundle::unchecked(shares, Provenance::Quantum { noise: noise_label(noise) })
}

/// Exact (Born-rule, floating point) distribution of [`quantum_mzsr`] bundles.
pub fn quantum_bundle_distribution(
    m: usize,
    field: &Field,
    c: usize,
    noise: &NoiseModel,
) -> Result<Vec<(ZeroSumBundle, f64)>> {
    check_params(m, c)?;
    let ghz = quantum::ghz_phase_state(m, field)?;
    let mut per_symbol = vec![0.0; ghz.dim()];
    for (w, reg) in noise.mixture(&ghz)? {
        for (i, p) in quantum::computational_distribution(&reg).iter().enumerate() {
            per_symbol[i] += w * p;
        }
    }
    let support: Vec<(Vec<u32>, f64)> =
        per_symbol.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(i, &p)| (ghz.digits(i), p)).collect();
    let total = support.len().checked_pow(c as u32).filter(|&t| t as u64 <= AUDIT_LIMIT);
    if total.is_none() {
        return Err(Error::EnumerationTooLarge { limit: AUDIT_LIMIT });
    }
    let provenance = Provenance::Quantum { noise: noise_label(noise) };
    let mut out = Vec::new();
    let mut idx = vec![0usize; c];
    loop {
        let p: f64 = idx.iter().map(|&k| support[k].1).product();
        let shares = (0..m)
            .map(|i| FieldVector::new(field.clone(), idx.iter().map(|&k| support[k].0[i]).collect()))
            .collect::<Result<Vec<_>>>()?;
        out.push((ZeroSumBundle::unchecked(shares, provenance.clone())?, p));
        let mut pos = c;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < support.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Bundle from a secure summation: `X_1 = Y_1 - sum Y`, `X_i = Y_i`.
pub fn mzsr_from_summation<T, F>(m: usize, field: &Field, c: usize, mut oracle: F, tape: &mut T) -> Result<ZeroSumBundle>
where
    T: Tape + ?Sized,
    F: FnMut(&[FieldVector], &mut T) -> Result<FieldVector>,
{
    check_params(m, c)?;
    let ys: Vec<FieldVector> = (0..m).map(|_| FieldVector::random(field, c, tape)).collect();
    let total = oracle(&ys, tape)?;
    if total.len() != c || total.field() != field {
        return Err(Error::InvalidParameter("summation oracle returned a malformed sum".into()));
    }
    let mut shares = ys.clone();
    shares[0] = ys[0].sub(&total)?;
    ZeroSumBundle::new(shares, Provenance::FromSummation)
}

/// Trusted summation oracle that adds its inputs directly.
pub fn direct_sum_oracle<T: Tape + ?Sized>(ys: &[FieldVector], _tape: &mut T) -> Result<FieldVector> {
    FieldVector::sum(ys)
}

/// Summary of one `(m-1)`-subset marginal.
#[derive(Clone, Debug, Serialize)]
pub struct MarginalSummary {
    /// Zero-based share indices.
    pub parties: Vec<usize>,
    pub support: usize,
    pub expected_support: u64,
    pub uniform: bool,
    pub min_prob: f64,
    pub max_prob: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BundleAudit {
    pub m: usize,
    pub q: u32,
    pub c: usize,
    pub atoms: usize,
    /// `exact` for rational audits, `float` for Born-rule distributions.
    pub mode: &'static str,
    pub zero_sum: bool,
    pub uniform_marginals: bool,
    pub marginals: Vec<MarginalSummary>,
}

impl BundleAudit {
    pub fn passed(&self) -> bool {
        self.zero_sum && self.uniform_marginals
    }
}

/// Audit a weighted list of bundles: zero-sum on every atom, and every
/// `(m-1)`-subset marginal uniform on `F_q^{(m-1)c}`.
pub fn audit_distribution<W: Weight>(atoms: &[(ZeroSumBundle, W)]) -> Result<BundleAudit> {
    let first = &atoms.first().ok_or_else(|| Error::InvalidParameter("empty distribution".into()))?.0;
    let (m, field, c) = (first.m(), first.field().clone(), first.c());
    let mut total = W::zero();
    for (b, w) in atoms {
        b.check_shape(m, &field, c)?;
        total = total.add(w);
    }
    if !total.is_unit() {
        return Err(Error::MalformedTable(format!("bundle weights sum to {}", total.render())));
    }
    let zero_sum = atoms.iter().all(|(b, w)| w.is_zero() || b.is_zero_sum());
    let q = field.order();
    let expected_support = (q as u64).pow(((m - 1) * c) as u32);
    let target = W::ratio(1, expected_support);
    let close = |x: &W| if W::EXACT { *x == target } else { x.sub(&target).abs().to_f64() <= 1e-12 };
    let mut marginals = Vec::with_capacity(m);
    for skip in (0..m).rev() {
        let parties: Vec<usize> = (0..m).filter(|&i| i != skip).collect();
        let mut table: HashMap<Vec<u32>, W> = HashMap::new();
        for (b, w) in atoms {
            if w.is_zero() {
                continue;
            }
            let key: Vec<u32> = parties.iter().flat_map(|&i| b.share(i).values().iter().copied()).collect();
            let e = table.entry(key).or_insert_with(W::zero);
            *e = e.add(w);
        }
        let probs: Vec<f64> = table.values().map(Weight::to_f64).collect();
        let uniform = table.len() as u64 == expected_support && table.values().all(close);
        marginals.push(MarginalSummary {
            parties,
            support: table.len(),
            expected_support,
            uniform,
            min_prob: probs.iter().copied().fold(f64::INFINITY, f64::min),
            max_prob: probs.iter().copied().fold(0.0, f64::max),
        });
    }
    Ok(BundleAudit {
        m,
        q,
        c,
        atoms: atoms.len(),
        mode: if W::EXACT { "exact" } else { "float" },
        zero_sum,
        uniform_marginals: marginals.iter().all(|s| s.uniform),
        marginals,
    })
}

/// Exact audit of a tape-driven generator by enumerating all of its randomness.
pub fn audit_bundle_distribution<F>(mut generator: F) -> Result<BundleAudit>
where
    F: FnMut(&mut ExhaustiveTape) -> Result<ZeroSumBundle>,
{
    let mut atoms: Vec<(ZeroSumBundle, BigRational)> = Vec::new();
    crate::tape::enumerate(AUDIT_LIMIT, |tape| {
        let b = generator(tape)?;
        atoms.push((b, tape.weight()));
        Ok(())
    })?;
    audit_distribution(&atoms)
}

/// Exact distribution of a tape-driven generator, keyed by share values.
pub fn bundle_distribution<F>(mut generator: F) -> Result<HashMap<Vec<Vec<u32>>, BigRational>>
where
    F: FnMut(&mut ExhaustiveTape) -> Result<ZeroSumBundle>,
{
    let mut dist: HashMap<Vec<Vec<u32>>, BigRational> = HashMap::new();
    crate::tape::enumerate(AUDIT_LIMIT, |tape| {
        let b = generator(tape)?;
        let key = b.shares().iter().map(|s| s.values().to_vec()).collect();
        *dist.entry(key).or_insert_with(<BigRational as Weight>::zero) += tape.weight();
        Ok(())
    })?;
    Ok(dist)
}
