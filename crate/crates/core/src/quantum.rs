//! Dense simulation of `m` qudits of dimension `q`, where each qudit's
//! computational basis is labelled by the elements of `F_q`.
//!
//! Party 0 is the most significant digit of a basis index, so the basis
//! string `x_1 x_2 ... x_m` sits at index `sum_k x_k q^(m-1-k)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::field::Field;
use crate::{Error, Result};

/// Largest state-vector length handled.
pub const MAX_PURE_DIM: usize = 4096;
/// Largest density-matrix side handled.
pub const MAX_MIXED_DIM: usize = 256;

const TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
enum Repr {
    Pure(Vec<Complex64>),
    /// Row-major `dim x dim` matrix.
    Mixed(Vec<Complex64>),
}

#[derive(Clone, Debug)]
pub struct QuantumRegister {
    field: Field,
    parties: usize,
    repr: Repr,
}

fn total_dim(q: usize, m: usize) -> Option<usize> {
    q.checked_pow(m as u32)
}

impl QuantumRegister {
    fn check_dims(field: &Field, parties: usize, mixed: bool) -> Result<usize> {
        let q = field.order() as usize;
        let cap = if mixed { MAX_MIXED_DIM } else { MAX_PURE_DIM };
        match total_dim(q, parties) {
            Some(d) if parties >= 1 && d <= cap => Ok(d),
            _ => Err(Error::UnsupportedDimension(format!("{q}^{parties} exceeds the cap of {cap}"))),
        }
    }

    /// Pure register from raw amplitudes (normalized on construction).
    pub fn from_amplitudes(field: &Field, parties: usize, amps: Vec<Complex64>) -> Result<Self> {
        let dim = Self::check_dims(field, parties, false)?;
        if amps.len() != dim {
            return Err(Error::DimensionMismatch(format!("expected {dim} amplitudes, got {}", amps.len())));
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < TOL {
            return Err(Error::InvalidParameter("zero state vector".into()));
        }
        Ok(Self { field: field.clone(), parties, repr: Repr::Pure(amps.into_iter().map(|a| a / norm).collect()) })
    }

    /// Mixed register from a row-major density matrix.
    pub fn from_density(field: &Field, parties: usize, rho: Vec<Complex64>) -> Result<Self> {
        let dim = Self::check_dims(field, parties, true)?;
        if rho.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!("expected {dim}x{dim} density matrix")));
        }
        let reg = Self { field: field.clone(), parties, repr: Repr::Mixed(rho) };
        if (reg.trace() - 1.0).abs() > TOL {
            return Err(Error::InvalidParameter("density matrix must have unit trace".into()));
        }
        Ok(reg)
    }

    /// Computational basis state `|x_1 ... x_m>`.
    pub fn basis_state(field: &Field, digits: &[u32]) -> Result<Self> {
        let q = field.order();
        let dim = Self::check_dims(field, digits.len(), false)?;
        if digits.iter().any(|&d| d >= q) {
            return Err(Error::InvalidParameter("basis digit outside the field".into()));
        }
        let idx = digits.iter().fold(0usize, |acc, &d| acc * q as usize + d as usize);
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[idx] = Complex64::new(1.0, 0.0);
        Ok(Self { field: field.clone(), parties: digits.len(), repr: Repr::Pure(amps) })
    }

    pub fn maximally_mixed(field: &Field, parties: usize) -> Result<Self> {
        let dim = Self::check_dims(field, parties, true)?;
        let mut rho = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            rho[i * dim + i] = Complex64::new(1.0 / dim as f64, 0.0);
        }
        Ok(Self { field: field.clone(), parties, repr: Repr::Mixed(rho) })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    /// Local dimension `q`.
    pub fn local_dim(&self) -> usize {
        self.field.order() as usize
    }

    pub fn dim(&self) -> usize {
        self.local_dim().pow(self.parties as u32)
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.repr, Repr::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&[Complex64]> {
        match &self.repr {
            Repr::Pure(a) => Some(a),
            Repr::Mixed(_) => None,
        }
    }

    /// Digits of a basis index, most significant party first.
    pub fn digits(&self, mut idx: usize) -> Vec<u32> {
        let q = self.local_dim();
        let mut d = vec![0; self.parties];
        for k in (0..self.parties).rev() {
            d[k] = (idx % q) as u32;
            idx /= q;
        }
        d
    }

    fn stride(&self, party: usize) -> usize {
        self.local_dim().pow((self.parties - 1 - party) as u32)
    }

    /// `Tr rho` (or the squared norm of a pure state).
    pub fn trace(&self) -> f64 {
        match &self.repr {
            Repr::Pure(a) => a.iter().map(|x| x.norm_sqr()).sum(),
            Repr::Mixed(r) => {
                let d = self.dim();
                (0..d).map(|i| r[i * d + i].re).sum()
            }
        }
    }

    /// Density-matrix form of the register.
    pub fn to_mixed(&self) -> Result<QuantumRegister> {
        match &self.repr {
            Repr::Mixed(_) => Ok(self.clone()),
            Repr::Pure(a) => {
                let d = Self::check_dims(&self.field, self.parties, true)?;
                let mut rho = vec![Complex64::new(0.0, 0.0); d * d];
                for i in 0..d {
                    for j in 0..d {
                        rho[i * d + j] = a[i] * a[j].conj();
                    }
                }
                Ok(Self { field: self.field.clone(), parties: self.parties, repr: Repr::Mixed(rho) })
            }
        }
    }

    /// `<v| rho |v>` for a vector `v` in the full space.
    pub fn overlap(&self, v: &[Complex64]) -> Result<f64> {
        let d = self.dim();
        if v.len() != d {
            return Err(Error::DimensionMismatch(format!("vector of length {} against dimension {d}", v.len())));
        }
        Ok(match &self.repr {
            Repr::Pure(a) => {
                let ip: Complex64 = v.iter().zip(a).map(|(x, y)| x.conj() * y).sum();
                ip.norm_sqr()
            }
            Repr::Mixed(r) => {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..d {
                    if v[i] == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for j in 0..d {
                        acc += v[i].conj() * r[i * d + j] * v[j];
                    }
                }
                acc.re
            }
        })
    }

    /// Apply a single-qudit operator `u` (row-major `q x q`) to `party`.
    /// Mixed states transform as `u rho u^dagger`.
    fn apply_local(&mut self, party: usize, u: &[Complex64]) {
        let q = self.local_dim();
        let stride = self.stride(party);
        let d = self.dim();
        let apply_vec = |v: &mut [Complex64], step: usize, len: usize| {
            let mut buf = vec![Complex64::new(0.0, 0.0); q];
            for base in 0..len {
                if !(base / stride).is_multiple_of(q) {
                    continue;
                }
                for (r, slot) in buf.iter_mut().enumerate() {
                    *slot = (0..q).map(|c| u[r * q + c] * v[(base + c * stride) * step]).sum();
                }
                for (r, val) in buf.iter().enumerate() {
                    v[(base + r * stride) * step] = *val;
                }
            }
        };
        match &mut self.repr {
            Repr::Pure(a) => apply_vec(a, 1, d),
            Repr::Mixed(rho) => {
                // columns: rho <- u rho
                let mut col = vec![Complex64::new(0.0, 0.0); d];
                for j in 0..d {
                    for i in 0..d {
                        col[i] = rho[i * d + j];
                    }
                    apply_vec(&mut col, 1, d);
                    for i in 0..d {
                        rho[i * d + j] = col[i];
                    }
                }
                // rows: rho <- rho u^dagger, i.e. conj(u) acting on each row
                let uc: Vec<Complex64> = u.iter().map(|x| x.conj()).collect();
                for i in 0..d {
                    let row = &mut rho[i * d..(i + 1) * d];
                    let mut buf = vec![Complex64::new(0.0, 0.0); q];
                    for base in 0..d {
                        if !(base / stride).is_multiple_of(q) {
                            continue;
                        }
                        for (r, slot) in buf.iter_mut().enumerate() {
                            *slot = (0..q).map(|c| uc[r * q + c] * row[base + c * stride]).sum();
                        }
                        for (r, val) in buf.iter().enumerate() {
                            row[base + r * stride] = *val;
                        }
                    }
                }
            }
        }
    }

    /// Probability of each basis index (diagonal of `rho`).
    fn diagonal(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Pure(a) => a.iter().map(|x| x.norm_sqr()).collect(),
            Repr::Mixed(r) => {
                let d = self.dim();
                (0..d).map(|i| r[i * d + i].re.max(0.0)).collect()
            }
        }
    }

    /// Keep only basis indices accepted by `keep`, then renormalize.
    fn project_diagonal(&mut self, keep: impl Fn(usize) -> bool) -> Result<()> {
        let d = self.dim();
        match &mut self.repr {
            Repr::Pure(a) => {
                for (i, x) in a.iter_mut().enumerate() {
                    if !keep(i) {
                        *x = Complex64::new(0.0, 0.0);
                    }
                }
            }
            Repr::Mixed(r) => {
                for i in 0..d {
                    for j in 0..d {
                        if !keep(i) || !keep(j) {
                            r[i * d + j] = Complex64::new(0.0, 0.0);
                        }
                    }
                }
            }
        }
        let t = self.trace();
        if t < 1e-15 {
            return Err(Error::ImpossibleConditioning);
        }
        let s = match &self.repr {
            Repr::Pure(_) => t.sqrt(),
            Repr::Mixed(_) => t,
        };
        match &mut self.repr {
            Repr::Pure(a) => a.iter_mut().for_each(|x| *x /= s),
            Repr::Mixed(r) => r.iter_mut().for_each(|x| *x /= s),
        }
        Ok(())
    }

    /// JSON array of `[re, im]` amplitude pairs; density matrices export row-major.
    pub fn to_json(&self) -> serde_json::Value {
        let pairs = |v: &[Complex64]| v.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>();
        match &self.repr {
            Repr::Pure(a) => serde_json::json!(pairs(a)),
            Repr::Mixed(r) => serde_json::json!({ "density": pairs(r), "dim": self.dim() }),
        }
    }
}

/// Whether the digits sum to zero in `F_q`.
fn zero_sum(field: &Field, digits: &[u32]) -> bool {
    digits.iter().fold(0, |acc, &d| field.add_raw(acc, d)) == 0
}

/// Uniform superposition over all strings `x_1..x_m` with `x_1 + ... + x_m = 0` in `F_q`.
pub fn ghz_phase_state(m: usize, field: &Field) -> Result<QuantumRegister> {
    if m < 2 {
        return Err(Error::InvalidParameter("GHZ state needs at least two parties".into()));
    }
    let dim = QuantumRegister::check_dims(field, m, false)?;
    let q = field.order() as usize;
    let amp = Complex64::new((q as f64).powf(-((m - 1) as f64) / 2.0), 0.0);
    let mut reg = QuantumRegister { field: field.clone(), parties: m, repr: Repr::Pure(vec![Complex64::new(0.0, 0.0); dim]) };
    let on: Vec<usize> = (0..dim).filter(|&i| zero_sum(field, &reg.digits(i))).collect();
    if let Repr::Pure(a) = &mut reg.repr {
        for i in on {
            a[i] = amp;
        }
    }
    Ok(reg)
}

/// Two-qubit Bell state `(|00> + |11>)/sqrt 2`.
pub fn bell_state() -> QuantumRegister {
    ghz_phase_state(2, &Field::prime(2).expect("GF(2)")).expect("2-qubit register")
}

/// An orthonormal basis for one qudit; column `k` is basis vector `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalBasis {
    q: usize,
    /// Row-major `q x q` unitary.
    vectors: Vec<Complex64>,
}

impl LocalBasis {
    pub fn computational(q: usize) -> Self {
        let mut v = vec![Complex64::new(0.0, 0.0); q * q];
        for i in 0..q {
            v[i * q + i] = Complex64::new(1.0, 0.0);
        }
        Self { q, vectors: v }
    }

    /// Phase basis `|z>_p = q^(-1/2) sum_x omega^(-tr(x z)) |x>` with `omega = e^(2 pi i / p)`.
    pub fn phase(field: &Field) -> Self {
        let q = field.order() as usize;
        let p = field.p() as f64;
        let norm = 1.0 / (q as f64).sqrt();
        let mut v = vec![Complex64::new(0.0, 0.0); q * q];
        for x in 0..q {
            for z in 0..q {
                let t = field.trace_raw(field.mul_raw(x as u32, z as u32)) as f64;
                v[x * q + z] = Complex64::from_polar(norm, -2.0 * PI * t / p);
            }
        }
        Self { q, vectors: v }
    }

    /// Eigenbasis of `cos(theta) Z + sin(theta) X`; index 0 is the `+1` eigenvector.
    fn qubit_axis(theta: f64) -> Self {
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let r = |x: f64| Complex64::new(x, 0.0);
        Self { q: 2, vectors: vec![r(c), r(-s), r(s), r(c)] }
    }

    fn vector(&self, k: usize) -> Vec<Complex64> {
        (0..self.q).map(|r| self.vectors[r * self.q + k]).collect()
    }

    fn adjoint(&self) -> Vec<Complex64> {
        let q = self.q;
        let mut a = vec![Complex64::new(0.0, 0.0); q * q];
        for r in 0..q {
            for c in 0..q {
                a[r * q + c] = self.vectors[c * q + r].conj();
            }
        }
        a
    }
}

/// Single-qubit `+-1` observables used by the self-tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Pauli {
    Z,
    X,
    /// `A(k) = (X + (-1)^k Z) / sqrt 2`.
    A(u8),
}

impl Pauli {
    fn theta(self) -> f64 {
        match self {
            Pauli::Z => 0.0,
            Pauli::X => PI / 2.0,
            Pauli::A(0) => PI / 4.0,
            Pauli::A(_) => 3.0 * PI / 4.0,
        }
    }

    pub fn basis(self) -> LocalBasis {
        LocalBasis::qubit_axis(self.theta())
    }

    /// Dense 2x2 matrix, row-major.
    pub fn matrix(self) -> [Complex64; 4] {
        let (c, s) = (self.theta().cos(), self.theta().sin());
        let r = |x: f64| Complex64::new(x, 0.0);
        [r(c), r(s), r(s), r(-c)]
    }
}

/// Product of single-party `+-1` observables on distinct parties.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Observable {
    factors: Vec<(usize, Pauli)>,
}

impl Observable {
    pub fn single(party: usize, kind: Pauli) -> Self {
        Self { factors: vec![(party, kind)] }
    }

    pub fn product(factors: Vec<(usize, Pauli)>) -> Result<Self> {
        let mut parties: Vec<usize> = factors.iter().map(|f| f.0).collect();
        parties.sort_unstable();
        parties.dedup();
        if parties.len() != factors.len() || factors.is_empty() {
            return Err(Error::UnsupportedObservable("composite parties must be distinct and non-empty".into()));
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[(usize, Pauli)] {
        &self.factors
    }

    fn settings(&self, reg: &QuantumRegister) -> Result<Vec<(usize, LocalBasis)>> {
        if reg.local_dim() != 2 {
            return Err(Error::UnsupportedObservable(format!(
                "+-1 qubit observables need q = 2, register has q = {}",
                reg.local_dim()
            )));
        }
        if let Some(&(p, _)) = self.factors.iter().find(|f| f.0 >= reg.parties) {
            return Err(Error::DimensionMismatch(format!("party {p} outside a {}-party register", reg.parties)));
        }
        Ok(self.factors.iter().map(|&(p, k)| (p, k.basis())).collect())
    }
}

/// Joint outcome distribution when each listed party measures its basis.
///
/// Entry `o` of the result is indexed in mixed radix with the first listed
/// party most significant. Unlisted parties are traced out.
pub fn outcome_distribution(reg: &QuantumRegister, settings: &[(usize, LocalBasis)]) -> Result<Vec<f64>> {
    let rotated = rotate_into(reg, settings)?;
    let q = reg.local_dim();
    let diag = rotated.diagonal();
    let mut dist = vec![0.0; q.pow(settings.len() as u32)];
    for (i, p) in diag.iter().enumerate() {
        dist[outcome_index(&rotated, settings, i)] += p;
    }
    Ok(dist)
}

fn rotate_into(reg: &QuantumRegister, settings: &[(usize, LocalBasis)]) -> Result<QuantumRegister> {
    let mut rotated = reg.clone();
    for (party, basis) in settings {
        if *party >= reg.parties || basis.q != reg.local_dim() {
            return Err(Error::DimensionMismatch(format!("setting for party {party} does not fit the register")));
        }
        rotated.apply_local(*party, &basis.adjoint());
    }
    Ok(rotated)
}

fn outcome_index(reg: &QuantumRegister, settings: &[(usize, LocalBasis)], idx: usize) -> usize {
    let q = reg.local_dim();
    settings.iter().fold(0, |acc, (party, _)| acc * q + (idx / reg.stride(*party)) % q)
}

fn sample_index<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> usize {
    let total: f64 = dist.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &p) in dist.iter().enumerate() {
        if u < p {
            return i;
        }
        u -= p;
    }
    dist.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Measure the listed parties in their bases; returns per-party outcome
/// indices and the post-measurement register.
pub fn measure_local<R: Rng + ?Sized>(
    reg: &QuantumRegister,
    settings: &[(usize, LocalBasis)],
    rng: &mut R,
) -> Result<(Vec<u32>, QuantumRegister)> {
    let q = reg.local_dim();
    let mut rotated = rotate_into(reg, settings)?;
    let diag = rotated.diagonal();
    let mut dist = vec![0.0; q.pow(settings.len() as u32)];
    for (i, p) in diag.iter().enumerate() {
        dist[outcome_index(&rotated, settings, i)] += p;
    }
    let o = sample_index(&dist, rng);
    let mut outcome = vec![0u32; settings.len()];
    let mut rest = o;
    for k in (0..settings.len()).rev() {
        outcome[k] = (rest % q) as u32;
        rest /= q;
    }
    let strides: Vec<(usize, u32)> =
        settings.iter().zip(&outcome).map(|((p, _), &v)| (rotated.stride(*p), v)).collect();
    rotated.project_diagonal(|i| strides.iter().all(|&(s, v)| (i / s) % q == v as usize))?;
    for (party, basis) in settings {
        rotated.apply_local(*party, &basis.vectors);
    }
    Ok((outcome, rotated))
}

/// Measure every party in the computational basis.
pub fn measure_computational<R: Rng + ?Sized>(reg: &QuantumRegister, rng: &mut R) -> Result<(Vec<u32>, QuantumRegister)> {
    let settings = computational_settings(reg);
    measure_local(reg, &settings, rng)
}

/// Exact Born-rule distribution of a full computational-basis measurement.
pub fn computational_distribution(reg: &QuantumRegister) -> Vec<f64> {
    reg.diagonal()
}

fn computational_settings(reg: &QuantumRegister) -> Vec<(usize, LocalBasis)> {
    (0..reg.parties).map(|p| (p, LocalBasis::computational(reg.local_dim()))).collect()
}

fn sign(outcomes: &[u32]) -> i8 {
    if outcomes.iter().filter(|&&o| o == 1).count() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Measure a (possibly composite) `+-1` observable; the outcome is the
/// product of the per-party results.
pub fn measure_observable<R: Rng + ?Sized>(
    reg: &QuantumRegister,
    obs: &Observable,
    rng: &mut R,
) -> Result<(i8, QuantumRegister)> {
    let settings = obs.settings(reg)?;
    let (outcomes, post) = measure_local(reg, &settings, rng)?;
    Ok((sign(&outcomes), post))
}

/// Per-party `+-1` outcomes for a set of single-party observables.
pub fn measure_signs<R: Rng + ?Sized>(reg: &QuantumRegister, obs: &Observable, rng: &mut R) -> Result<Vec<i8>> {
    let settings = obs.settings(reg)?;
    let (outcomes, _) = measure_local(reg, &settings, rng)?;
    Ok(outcomes.iter().map(|&o| if o == 0 { 1 } else { -1 }).collect())
}

/// Exact `Tr(rho O)`.
pub fn expectation(reg: &QuantumRegister, obs: &Observable) -> Result<f64> {
    let settings = obs.settings(reg)?;
    let dist = outcome_distribution(reg, &settings)?;
    let n = settings.len();
    Ok(dist
        .iter()
        .enumerate()
        .map(|(o, p)| {
            let bits: Vec<u32> = (0..n).map(|k| ((o >> (n - 1 - k)) & 1) as u32).collect();
            p * sign(&bits) as f64
        })
        .sum())
}

/// Exact expectation of a real linear combination of observables.
pub fn expectation_sum(reg: &QuantumRegister, terms: &[(f64, Observable)]) -> Result<f64> {
    terms.iter().try_fold(0.0, |acc, (c, o)| Ok(acc + c * expectation(reg, o)?))
}

/// CHSH combination `A(0)_a (X_b + s Z_b) + A(1)_a (X_b - s Z_b)`; `s = +1`
/// is the pairing that reaches `2 sqrt 2` on `(|00> + |11>)/sqrt 2`.
pub fn chsh_terms(a: usize, b: usize, s: f64) -> Vec<(f64, Observable)> {
    let o = |x: Pauli, y: Pauli| Observable::product(vec![(a, x), (b, y)]).expect("distinct parties");
    vec![
        (1.0, o(Pauli::A(0), Pauli::X)),
        (s, o(Pauli::A(0), Pauli::Z)),
        (1.0, o(Pauli::A(1), Pauli::X)),
        (-s, o(Pauli::A(1), Pauli::Z)),
    ]
}

/// Projectors used to verify the phase GHZ state.
#[derive(Clone, Debug)]
pub enum Projector {
    /// Span of computational strings summing to zero.
    ZeroSum,
    /// Span of the phase-basis strings `|z, ..., z>_p`.
    UniformPhase,
    /// Rank-one projector onto the phase GHZ state.
    Ghz,
    /// Dense row-major matrix.
    Custom(Vec<Complex64>),
}

/// `|z, ..., z>_p` as a full vector.
fn uniform_phase_vector(field: &Field, m: usize, z: usize) -> Vec<Complex64> {
    let basis = LocalBasis::phase(field);
    let q = field.order() as usize;
    let local = basis.vector(z);
    let dim = q.pow(m as u32);
    (0..dim)
        .map(|mut idx| {
            let mut amp = Complex64::new(1.0, 0.0);
            for _ in 0..m {
                amp *= local[idx % q];
                idx /= q;
            }
            amp
        })
        .collect()
}

impl Projector {
    /// Dense matrix of the projector for an `m`-party register over `field`.
    pub fn matrix(&self, field: &Field, m: usize) -> Result<Vec<Complex64>> {
        let q = field.order() as usize;
        let dim = total_dim(q, m)
            .filter(|&d| d <= MAX_MIXED_DIM)
            .ok_or_else(|| Error::UnsupportedDimension(format!("{q}^{m} too large for a dense projector")))?;
        let mut out = vec![Complex64::new(0.0, 0.0); dim * dim];
        let mut add_rank_one = |v: &[Complex64]| {
            for i in 0..dim {
                for j in 0..dim {
                    out[i * dim + j] += v[i] * v[j].conj();
                }
            }
        };
        match self {
            Projector::ZeroSum => {
                let reg = QuantumRegister::basis_state(field, &vec![0; m])?;
                for i in 0..dim {
                    if zero_sum(field, &reg.digits(i)) {
                        let mut e = vec![Complex64::new(0.0, 0.0); dim];
                        e[i] = Complex64::new(1.0, 0.0);
                        add_rank_one(&e);
                    }
                }
            }
            Projector::UniformPhase => {
                for z in 0..q {
                    add_rank_one(&uniform_phase_vector(field, m, z));
                }
            }
            Projector::Ghz => {
                let g = ghz_phase_state(m, field)?;
                add_rank_one(g.amplitudes().expect("pure"));
            }
            Projector::Custom(mat) => {
                if mat.len() != dim * dim {
                    return Err(Error::DimensionMismatch("custom projector size".into()));
                }
                return Ok(mat.clone());
            }
        }
        Ok(out)
    }
}

/// `Tr(rho P)`.
pub fn project_probability(reg: &QuantumRegister, proj: &Projector) -> Result<f64> {
    let m = reg.parties;
    let field = reg.field.clone();
    let p = match proj {
        Projector::ZeroSum => {
            let diag = reg.diagonal();
            diag.iter().enumerate().filter(|(i, _)| zero_sum(&field, &reg.digits(*i))).map(|(_, p)| p).sum()
        }
        Projector::UniformPhase => {
            let q = field.order() as usize;
            (0..q).map(|z| reg.overlap(&uniform_phase_vector(&field, m, z))).sum::<Result<f64>>()?
        }
        Projector::Ghz => {
            let g = ghz_phase_state(m, &field)?;
            reg.overlap(g.amplitudes().expect("pure"))?
        }
        Projector::Custom(mat) => {
            let d = reg.dim();
            if mat.len() != d * d {
                return Err(Error::DimensionMismatch(format!("projector of size {} against dimension {d}", mat.len())));
            }
            let rho = reg.to_mixed()?;
            let Repr::Mixed(r) = &rho.repr else { unreachable!() };
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..d {
                for j in 0..d {
                    acc += r[i * d + j] * mat[j * d + i];
                }
            }
            acc.re
        }
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Fidelity `<GHZ| rho |GHZ>` with the phase GHZ state.
pub fn ghz_fidelity(reg: &QuantumRegister) -> Result<f64> {
    project_probability(reg, &Projector::Ghz)
}

/// `prod_{i != j} (I + X_j X_i) / 2` for qubits, as a dense matrix.
pub fn phase_stabilizer_product(m: usize, j: usize) -> Result<Vec<Complex64>> {
    let dim = 1usize << m;
    if dim > MAX_MIXED_DIM {
        return Err(Error::UnsupportedDimension(format!("2^{m} too large for a dense projector")));
    }
    let mut acc = identity(dim);
    for i in (0..m).filter(|&i| i != j) {
        // X_j X_i flips bits j and i.
        let mask = (1 << (m - 1 - j)) | (1 << (m - 1 - i));
        let mut factor = identity(dim);
        for r in 0..dim {
            factor[r * dim + (r ^ mask)] += Complex64::new(1.0, 0.0);
        }
        factor.iter_mut().for_each(|x| *x *= 0.5);
        acc = matmul(&acc, &factor, dim);
    }
    Ok(acc)
}

pub fn identity(dim: usize) -> Vec<Complex64> {
    let mut m = vec![Complex64::new(0.0, 0.0); dim * dim];
    for i in 0..dim {
        m[i * dim + i] = Complex64::new(1.0, 0.0);
    }
    m
}

pub fn matmul(a: &[Complex64], b: &[Complex64], dim: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); dim * dim];
    for i in 0..dim {
        for k in 0..dim {
            let aik = a[i * dim + k];
            if aik == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..dim {
                out[i * dim + j] += aik * b[k * dim + j];
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Per-copy noise applied to a register.
#[derive(Clone, Debug)]
pub enum NoiseModel {
    None,
    /// Each party independently replaced by the maximally mixed state with probability `eps`.
    Depolarizing(f64),
    /// Each party's off-diagonal coherences shrunk by `1 - eps`.
    Dephasing(f64),
    /// Whole register replaced by `state` with probability `prob`.
    Replacement { state: Box<QuantumRegister>, prob: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let e = match self {
            NoiseModel::None => 0.0,
            NoiseModel::Depolarizing(e) | NoiseModel::Dephasing(e) => *e,
            NoiseModel::Replacement { prob, .. } => *prob,
        };
        if (0.0..=1.0).contains(&e) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("noise parameter {e} outside [0, 1]")))
        }
    }

    /// Exact result of the channel as a finite mixture of registers.
    pub fn mixture(&self, reg: &QuantumRegister) -> Result<Vec<(f64, QuantumRegister)>> {
        self.validate()?;
        Ok(match self {
            NoiseModel::None => vec![(1.0, reg.clone())],
            NoiseModel::Depolarizing(e) | NoiseModel::Dephasing(e) if *e == 0.0 => vec![(1.0, reg.clone())],
            NoiseModel::Depolarizing(e) => vec![(1.0, depolarize(reg, *e)?)],
            NoiseModel::Dephasing(e) => vec![(1.0, dephase(reg, *e)?)],
            NoiseModel::Replacement { state, prob } => {
                if state.parties != reg.parties || state.field != reg.field {
                    return Err(Error::DimensionMismatch("replacement state does not match the register".into()));
                }
                vec![(1.0 - prob, reg.clone()), (*prob, (**state).clone())]
            }
        })
    }
}

fn mixed_entries(reg: &QuantumRegister) -> Result<(QuantumRegister, usize)> {
    let rho = reg.to_mixed()?;
    let d = rho.dim();
    Ok((rho, d))
}

fn depolarize(reg: &QuantumRegister, eps: f64) -> Result<QuantumRegister> {
    let (mut rho, d) = mixed_entries(reg)?;
    let q = reg.local_dim();
    for party in 0..reg.parties {
        let stride = rho.stride(party);
        let Repr::Mixed(r) = &rho.repr else { unreachable!() };
        let mut next = r.clone();
        for i in 0..d {
            for j in 0..d {
                let (di, dj) = ((i / stride) % q, (j / stride) % q);
                let mut v = r[i * d + j] * (1.0 - eps);
                if di == dj {
                    let (bi, bj) = (i - di * stride, j - dj * stride);
                    let partial: Complex64 = (0..q).map(|a| r[(bi + a * stride) * d + bj + a * stride]).sum();
                    v += partial * (eps / q as f64);
                }
                next[i * d + j] = v;
            }
        }
        rho.repr = Repr::Mixed(next);
    }
    Ok(rho)
}

fn dephase(reg: &QuantumRegister, eps: f64) -> Result<QuantumRegister> {
    let (mut rho, d) = mixed_entries(reg)?;
    let q = reg.local_dim();
    let strides: Vec<usize> = (0..reg.parties).map(|p| rho.stride(p)).collect();
    if let Repr::Mixed(r) = &mut rho.repr {
        for i in 0..d {
            for j in 0..d {
                let differing = strides.iter().filter(|&&s| (i / s) % q != (j / s) % q).count();
                r[i * d + j] *= (1.0 - eps).powi(differing as i32);
            }
        }
    }
    Ok(rho)
}

/// Apply a noise model. Depolarizing and dephasing act as exact channels;
/// replacement is sampled.
pub fn apply_noise<R: Rng + ?Sized>(reg: &QuantumRegister, model: &NoiseModel, rng: &mut R) -> Result<QuantumRegister> {
    let mixture = model.mixture(reg)?;
    if mixture.len() == 1 {
        return Ok(mixture.into_iter().next().unwrap().1);
    }
    let weights: Vec<f64> = mixture.iter().map(|(w, _)| *w).collect();
    let k = sample_index(&weights, rng);
    Ok(mixture.into_iter().nth(k).unwrap().1)
}

/// Probability of `+1` for a `+-1` observable, as `(1 + <O>)/2`.
pub fn plus_probability(reg: &QuantumRegister, obs: &Observable) -> Result<f64> {
    Ok((1.0 + expectation(reg, obs)?) / 2.0)
}
