//! Exact discrete distributions: joint tables, mutual information,
//! total-variation distance and the hypergeometric posterior used by the
//! sampling bound.
//!
//! Tables are generic over [`Weight`], implemented for [`BigRational`]
//! (exact) and `f64` (float mode, normalization checked to 1e-12).

use std::collections::{BTreeMap, HashMap};
use std::fmt::Debug;
use std::io::{Read, Write};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const FLOAT_TOLERANCE: f64 = 1e-12;

/// Probability weights: exact rationals or doubles.
pub trait Weight: Clone + Debug + PartialEq + PartialOrd {
    const EXACT: bool;
    fn zero() -> Self;
    fn one() -> Self;
    fn ratio(num: u64, den: u64) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn abs(&self) -> Self;
    fn is_zero(&self) -> bool;
    fn to_f64(&self) -> f64;
    fn from_rational(r: &BigRational) -> Self;
    /// Whether `self` equals one within the mode's normalization tolerance.
    fn is_unit(&self) -> bool;
    fn parse(s: &str) -> Result<Self>;
    fn render(&self) -> String;
}

impl Weight for BigRational {
    const EXACT: bool = true;
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn ratio(num: u64, den: u64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
    fn is_unit(&self) -> bool {
        One::is_one(self)
    }
    fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::MalformedTable(format!("not a rational: {s:?}"));
        match s.split_once('/') {
            Some((n, d)) => {
                let n: BigInt = n.trim().parse().map_err(|_| bad())?;
                let d: BigInt = d.trim().parse().map_err(|_| bad())?;
                if Zero::is_zero(&d) {
                    return Err(bad());
                }
                Ok(BigRational::new(n, d))
            }
            None => Ok(BigRational::from_integer(s.parse().map_err(|_| bad())?)),
        }
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

impl Weight for f64 {
    const EXACT: bool = false;
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn ratio(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn from_rational(r: &BigRational) -> Self {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }
    fn is_unit(&self) -> bool {
        (self - 1.0).abs() <= FLOAT_TOLERANCE
    }
    fn parse(s: &str) -> Result<Self> {
        s.trim().parse().map_err(|_| Error::MalformedTable(format!("not a number: {s:?}")))
    }
    fn render(&self) -> String {
        format!("{self:e}")
    }
}

/// Joint distribution over named variables with string-labelled outcomes.
///
/// Outcome labels are interned per variable; cells absent from the map have
/// probability zero.
#[derive(Clone, Debug, PartialEq)]
pub struct JointTable<W: Weight> {
    vars: Vec<String>,
    alphabets: Vec<Vec<String>>,
    cells: BTreeMap<Vec<u32>, W>,
}

/// Accumulates weighted outcomes into a [`JointTable`].
#[derive(Clone, Debug)]
pub struct TableBuilder<W: Weight> {
    vars: Vec<String>,
    alphabets: Vec<Vec<String>>,
    index: Vec<HashMap<String, u32>>,
    cells: BTreeMap<Vec<u32>, W>,
}

impl<W: Weight> TableBuilder<W> {
    pub fn new<S: Into<String>>(vars: impl IntoIterator<Item = S>) -> Self {
        let vars: Vec<String> = vars.into_iter().map(Into::into).collect();
        let n = vars.len();
        Self { vars, alphabets: vec![Vec::new(); n], index: vec![HashMap::new(); n], cells: BTreeMap::new() }
    }

    /// Add `weight` to the cell labelled `outcome` (one label per variable).
    pub fn add<S: AsRef<str>>(&mut self, outcome: &[S], weight: &W) -> Result<()> {
        if outcome.len() != self.vars.len() {
            return Err(Error::MalformedTable(format!(
                "outcome has {} labels for {} variables",
                outcome.len(),
                self.vars.len()
            )));
        }
        let key: Vec<u32> = outcome
            .iter()
            .enumerate()
            .map(|(v, label)| {
                let label = label.as_ref();
                match self.index[v].get(label) {
                    Some(&i) => i,
                    None => {
                        let i = self.alphabets[v].len() as u32;
                        self.alphabets[v].push(label.to_string());
                        self.index[v].insert(label.to_string(), i);
                        i
                    }
                }
            })
            .collect();
        let cell = self.cells.entry(key).or_insert_with(W::zero);
        *cell = cell.add(weight);
        Ok(())
    }

    pub fn build(self) -> Result<JointTable<W>> {
        JointTable::from_parts(self.vars, self.alphabets, self.cells)
    }
}

/// Counts of integer multiplicities, normalized on build; keeps enumeration
/// with uniform atoms in integer arithmetic.
#[derive(Clone, Debug)]
pub struct CountBuilder {
    inner: TableBuilder<BigRational>,
    total: u64,
}

impl CountBuilder {
    pub fn new<S: Into<String>>(vars: impl IntoIterator<Item = S>) -> Self {
        Self { inner: TableBuilder::new(vars), total: 0 }
    }

    pub fn add<S: AsRef<str>>(&mut self, outcome: &[S]) -> Result<()> {
        self.total += 1;
        self.inner.add(outcome, &<BigRational as One>::one())
    }

    pub fn build<W: Weight>(self) -> Result<JointTable<W>> {
        if self.total == 0 {
            return Err(Error::MalformedTable("no outcomes".into()));
        }
        let denom = BigRational::from_integer(BigInt::from(self.total));
        let cells = self.inner.cells.into_iter().map(|(k, c)| (k, W::from_rational(&(c / &denom)))).collect();
        JointTable::from_parts(self.inner.vars, self.inner.alphabets, cells)
    }
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    vars: Vec<String>,
    cells: Vec<CellJson>,
}

#[derive(Serialize, Deserialize)]
struct CellJson {
    outcome: Vec<String>,
    p: String,
}

impl<W: Weight> JointTable<W> {
    fn from_parts(vars: Vec<String>, alphabets: Vec<Vec<String>>, cells: BTreeMap<Vec<u32>, W>) -> Result<Self> {
        let mut seen = vars.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != vars.len() {
            return Err(Error::MalformedTable("duplicate variable names".into()));
        }
        let mut total = W::zero();
        for w in cells.values() {
            if *w < W::zero() {
                return Err(Error::MalformedTable("negative probability".into()));
            }
            total = total.add(w);
        }
        if !total.is_unit() {
            return Err(Error::MalformedTable(format!("probabilities sum to {}", total.render())));
        }
        let cells = cells.into_iter().filter(|(_, w)| !w.is_zero()).collect();
        Ok(Self { vars, alphabets, cells })
    }

    /// Table from labelled cells.
    pub fn from_cells<S: AsRef<str>>(vars: &[&str], cells: &[(Vec<S>, W)]) -> Result<Self> {
        let mut b = TableBuilder::new(vars.iter().copied());
        for (o, w) in cells {
            b.add(o, w)?;
        }
        b.build()
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// Number of distinct labels seen for each variable.
    pub fn alphabet_sizes(&self) -> Vec<usize> {
        self.alphabets.iter().map(Vec::len).collect()
    }

    pub fn support_size(&self) -> usize {
        self.cells.len()
    }

    fn var_index(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::MalformedTable(format!("unknown variable {name:?}")))
    }

    fn indices(&self, names: &[&str]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.var_index(n)).collect()
    }

    /// Labelled cells with nonzero probability.
    pub fn cells(&self) -> impl Iterator<Item = (Vec<&str>, &W)> {
        self.cells.iter().map(|(k, w)| {
            (k.iter().enumerate().map(|(v, &i)| self.alphabets[v][i as usize].as_str()).collect(), w)
        })
    }

    /// Probability of a labelled outcome (zero if absent).
    pub fn prob<S: AsRef<str>>(&self, outcome: &[S]) -> W {
        let key: Option<Vec<u32>> = outcome
            .iter()
            .enumerate()
            .map(|(v, l)| self.alphabets.get(v)?.iter().position(|a| a == l.as_ref()).map(|i| i as u32))
            .collect();
        key.and_then(|k| self.cells.get(&k).cloned()).unwrap_or_else(W::zero)
    }

    /// Marginal over the named variables, in the given order.
    pub fn marginal(&self, names: &[&str]) -> Result<JointTable<W>> {
        let idx = self.indices(names)?;
        let mut cells: BTreeMap<Vec<u32>, W> = BTreeMap::new();
        for (k, w) in &self.cells {
            let key: Vec<u32> = idx.iter().map(|&i| k[i]).collect();
            let c = cells.entry(key).or_insert_with(W::zero);
            *c = c.add(w);
        }
        Ok(JointTable {
            vars: names.iter().map(|s| s.to_string()).collect(),
            alphabets: idx.iter().map(|&i| self.alphabets[i].clone()).collect(),
            cells,
        })
    }

    fn grouped(&self, idx: &[usize]) -> BTreeMap<Vec<u32>, W> {
        let mut out: BTreeMap<Vec<u32>, W> = BTreeMap::new();
        for (k, w) in &self.cells {
            let key: Vec<u32> = idx.iter().map(|&i| k[i]).collect();
            let c = out.entry(key).or_insert_with(W::zero);
            *c = c.add(w);
        }
        out
    }

    /// Shannon entropy in bits of the named group.
    pub fn entropy(&self, names: &[&str]) -> Result<f64> {
        let idx = self.indices(names)?;
        Ok(self
            .grouped(&idx)
            .values()
            .map(|w| {
                let p = w.to_f64();
                -p * p.log2()
            })
            .sum())
    }

    /// Whether the two groups are independent, by exact cellwise comparison
    /// in rational mode (float mode compares within 1e-12).
    pub fn independent(&self, a: &[&str], b: &[&str]) -> Result<bool> {
        let (ia, ib) = self.disjoint_groups(a, b)?;
        let pa = self.grouped(&ia);
        let pb = self.grouped(&ib);
        let joint = self.grouped(&[ia.clone(), ib.clone()].concat());
        let close = |x: &W, y: &W| if W::EXACT { x == y } else { x.sub(y).abs().to_f64() <= FLOAT_TOLERANCE };
        for (ka, wa) in &pa {
            for (kb, wb) in &pb {
                let key = [ka.clone(), kb.clone()].concat();
                let j = joint.get(&key).cloned().unwrap_or_else(W::zero);
                if !close(&j, &wa.mul(wb)) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    fn disjoint_groups(&self, a: &[&str], b: &[&str]) -> Result<(Vec<usize>, Vec<usize>)> {
        let ia = self.indices(a)?;
        let ib = self.indices(b)?;
        if ia.is_empty() || ib.is_empty() || ia.iter().any(|i| ib.contains(i)) {
            return Err(Error::MalformedTable("groups must be non-empty and disjoint".into()));
        }
        Ok((ia, ib))
    }

    /// Export as CSV: one column per variable plus `p`.
    pub fn write_csv<Wr: Write>(&self, w: Wr) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = self.vars.iter().map(String::as_str).collect();
        header.push("p");
        out.write_record(&header).map_err(csv_err)?;
        for (labels, p) in self.cells() {
            let mut row: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
            row.push(p.render());
            out.write_record(&row).map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::MalformedTable(e.to_string()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers().map_err(csv_err)?.clone();
        let n = header.len();
        if n < 2 || &header[n - 1] != "p" {
            return Err(Error::MalformedTable("last CSV column must be p".into()));
        }
        let mut b = TableBuilder::new(header.iter().take(n - 1).map(str::to_string));
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let labels: Vec<&str> = rec.iter().take(n - 1).collect();
            b.add(&labels, &W::parse(&rec[n - 1])?)?;
        }
        b.build()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let t = TableJson {
            vars: self.vars.clone(),
            cells: self
                .cells()
                .map(|(o, p)| CellJson { outcome: o.iter().map(|s| s.to_string()).collect(), p: p.render() })
                .collect(),
        };
        serde_json::to_value(t).expect("table serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let t: TableJson = serde_json::from_value(v.clone())?;
        let mut b = TableBuilder::new(t.vars);
        for c in t.cells {
            b.add(&c.outcome, &W::parse(&c.p)?)?;
        }
        b.build()
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::MalformedTable(e.to_string())
}

fn mi_terms<W: Weight>(table: &JointTable<W>, ia: &[usize], ib: &[usize]) -> f64 {
    let pa = table.grouped(ia);
    let pb = table.grouped(ib);
    let joint = table.grouped(&[ia.to_vec(), ib.to_vec()].concat());
    let split = ia.len();
    let mut acc = 0.0;
    for (k, pab) in &joint {
        let a = &pa[&k[..split].to_vec()];
        let b = &pb[&k[split..].to_vec()];
        let prod = a.mul(b);
        // Exactly independent cells contribute exactly zero.
        if *pab == prod {
            continue;
        }
        acc += pab.to_f64() * (pab.to_f64() / prod.to_f64()).log2();
    }
    acc
}

/// `I(A; B)` in bits. Variables outside both groups are marginalized.
pub fn mutual_information<W: Weight>(table: &JointTable<W>, a: &[&str], b: &[&str]) -> Result<f64> {
    let (ia, ib) = table.disjoint_groups(a, b)?;
    Ok(mi_terms(table, &ia, &ib).max(0.0))
}

/// `I(A; B | C)` in bits, as `sum_c p(c) I(A; B | C = c)`.
pub fn conditional_mutual_information<W: Weight>(
    table: &JointTable<W>,
    a: &[&str],
    b: &[&str],
    c: &[&str],
) -> Result<f64> {
    if c.is_empty() {
        return mutual_information(table, a, b);
    }
    let (ia, ib) = table.disjoint_groups(a, b)?;
    let ic = table.indices(c)?;
    if ic.iter().any(|i| ia.contains(i) || ib.contains(i)) {
        return Err(Error::MalformedTable("conditioning group overlaps".into()));
    }
    let pc = table.grouped(&ic);
    let mut total = 0.0;
    for (kc, wc) in &pc {
        let cells: BTreeMap<Vec<u32>, W> = table
            .cells
            .iter()
            .filter(|(k, _)| ic.iter().zip(kc).all(|(&i, v)| k[i] == *v))
            .map(|(k, w)| (k.clone(), w.div(wc)))
            .collect();
        let slice = JointTable { vars: table.vars.clone(), alphabets: table.alphabets.clone(), cells };
        total += wc.to_f64() * mi_terms(&slice, &ia, &ib);
    }
    Ok(total.max(0.0))
}

/// Total-variation distance in both normalizations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TvDistance {
    /// `1/2 ||p - q||_1`, in `[0, 1]`.
    pub tv: f64,
    /// `||p - q||_1`, in `[0, 2]`.
    pub l1: f64,
}

/// Exact `||p - q||_1` over the union of supports, matched by labels.
pub fn l1_distance<W: Weight>(p: &JointTable<W>, q: &JointTable<W>) -> Result<W> {
    if p.vars != q.vars {
        return Err(Error::MalformedTable(format!("alphabet mismatch: {:?} vs {:?}", p.vars, q.vars)));
    }
    let mut diff: BTreeMap<Vec<String>, W> = BTreeMap::new();
    for (o, w) in p.cells() {
        diff.insert(o.iter().map(|s| s.to_string()).collect(), w.clone());
    }
    for (o, w) in q.cells() {
        let key: Vec<String> = o.iter().map(|s| s.to_string()).collect();
        let e = diff.entry(key).or_insert_with(W::zero);
        *e = e.sub(w);
    }
    Ok(diff.values().fold(W::zero(), |acc, d| acc.add(&d.abs())))
}

pub fn tv_distance<W: Weight>(p: &JointTable<W>, q: &JointTable<W>) -> Result<TvDistance> {
    let l1 = l1_distance(p, q)?.to_f64();
    Ok(TvDistance { tv: l1 / 2.0, l1 })
}

/// `Pr(Y = 1 | Z <= k)` when `n + 1` binary variables with `X` ones in total
/// (prior `prior[x]`, `x = 0..=n+1`) have `n` of them observed uniformly at
/// random; `Z` counts observed ones and `Y` is the unobserved variable.
pub fn hypergeometric_posterior<W: Weight>(n: usize, prior: &[W], k: usize) -> Result<W> {
    if prior.len() != n + 2 {
        return Err(Error::InvalidParameter(format!("prior must cover 0..={}", n + 1)));
    }
    if prior.iter().any(|p| *p < W::zero()) || !prior.iter().fold(W::zero(), |a, p| a.add(p)).is_unit() {
        return Err(Error::InvalidParameter("prior must be a probability vector".into()));
    }
    let (num, den) = posterior_parts(n, prior, k);
    if den.is_zero() {
        return Err(Error::ImpossibleConditioning);
    }
    Ok(num.div(&den))
}

/// `(Pr(Z <= k, Y = 1), Pr(Z <= k))`.
pub fn posterior_parts<W: Weight>(n: usize, prior: &[W], k: usize) -> (W, W) {
    let n1 = (n + 1) as u64;
    let mut num = W::zero();
    let mut den = W::zero();
    for z in 0..=k.min(n) {
        // Pr(Z = z, Y = 0) = P_z (n - z + 1)/(n + 1); Pr(Z = z, Y = 1) = P_{z+1} (z + 1)/(n + 1)
        let y0 = prior[z].mul(&W::ratio((n - z + 1) as u64, n1));
        let y1 = prior[z + 1].mul(&W::ratio((z + 1) as u64, n1));
        num = num.add(&y1);
        den = den.add(&y0).add(&y1);
    }
    (num, den)
}

/// The two-point prior on `{k, k+1}` at which the acceptance constraint
/// `Pr(Z <= k) >= alpha` is tight.
pub fn maximizing_prior(n: usize, k: usize, alpha: f64) -> Result<Vec<f64>> {
    if k >= n || alpha * ((n + 1) as f64) < (k + 1) as f64 || alpha > 1.0 {
        return Err(Error::InvalidParameter(format!("need k < n and (k+1)/(n+1) <= alpha <= 1 (n={n}, k={k})")));
    }
    let p = (1.0 - alpha) * (n + 1) as f64 / (n - k) as f64;
    let mut prior = vec![0.0; n + 2];
    prior[k] = 1.0 - p;
    prior[k + 1] += p;
    Ok(prior)
}
