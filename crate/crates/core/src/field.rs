//! Finite fields `F_q` with `q = p^l`, extensions `F_{q^c}` over them, and
//! fixed-length vectors of field elements.
//!
//! Elements are stored as a packed integer: the little-endian digits of the
//! value in base `p` (or base `q` for an extension) are the coefficients of
//! the element's polynomial representative. All arithmetic goes through
//! precomputed tables, so fields are capped at 256 elements.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;

use crate::tape::Tape;
use crate::{Error, Result};

/// Largest field order supported by the table-driven arithmetic.
pub const MAX_FIELD_ORDER: u32 = 256;

/// Default irreducible polynomials (little-endian coefficients, monic).
const DEFAULT_POLYS: &[(u32, &[u32])] = &[
    (4, &[1, 1, 1]),
    (8, &[1, 1, 0, 1]),
    (16, &[1, 1, 0, 0, 1]),
    (32, &[1, 0, 1, 0, 0, 1]),
    (64, &[1, 1, 0, 0, 0, 0, 1]),
    (128, &[1, 1, 0, 0, 0, 0, 0, 1]),
    (256, &[1, 1, 0, 1, 1, 0, 0, 0, 1]),
    (9, &[1, 0, 1]),
    (27, &[1, 2, 0, 1]),
    (81, &[2, 1, 0, 0, 1]),
    (243, &[1, 2, 0, 0, 0, 1]),
    (25, &[2, 0, 1]),
    (125, &[2, 3, 0, 1]),
    (49, &[1, 0, 1]),
];

/// How the elements of a field are represented.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Construction {
    /// `F_p[x] / (poly)` with `poly` over the prime field.
    PrimePower,
    /// `F_q[y] / (poly)` with `poly` over the base field `F_q`.
    Extension(Field),
}

/// Description of a finite field together with its arithmetic tables.
pub struct FieldSpec {
    p: u32,
    degree: usize,
    poly: Vec<u32>,
    order: u32,
    construction: Construction,
    add: Vec<u16>,
    mul: Vec<u16>,
    neg: Vec<u16>,
    inv: Vec<u16>,
}

/// Cheaply clonable shared handle to a [`FieldSpec`].
#[derive(Clone)]
pub struct Field(Arc<FieldSpec>);

impl Deref for Field {
    type Target = FieldSpec;
    fn deref(&self) -> &FieldSpec {
        &self.0
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.p == other.p
                && self.degree == other.degree
                && self.poly == other.poly
                && self.construction == other.construction)
    }
}
impl Eq for Field {}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.construction {
            Construction::PrimePower => write!(f, "GF({}; p={}, poly={:?})", self.order, self.p, self.poly),
            Construction::Extension(base) => {
                write!(f, "GF({}) over GF({}) (poly={:?})", self.order, base.order, self.poly)
            }
        }
    }
}

/// Minimal coefficient-ring interface used to build polynomial quotients.
trait Coeffs {
    fn size(&self) -> u32;
    fn add(&self, a: u32, b: u32) -> u32;
    fn mul(&self, a: u32, b: u32) -> u32;
    fn neg(&self, a: u32) -> u32;
    fn inv(&self, a: u32) -> u32;
}

struct PrimeCoeffs(u32);

impl Coeffs for PrimeCoeffs {
    fn size(&self) -> u32 {
        self.0
    }
    fn add(&self, a: u32, b: u32) -> u32 {
        (a + b) % self.0
    }
    fn mul(&self, a: u32, b: u32) -> u32 {
        (a * b) % self.0
    }
    fn neg(&self, a: u32) -> u32 {
        (self.0 - a) % self.0
    }
    fn inv(&self, a: u32) -> u32 {
        // Fermat: a^(p-2)
        let mut r = 1;
        for _ in 0..self.0 - 2 {
            r = self.mul(r, a);
        }
        r
    }
}

impl Coeffs for FieldSpec {
    fn size(&self) -> u32 {
        self.order
    }
    fn add(&self, a: u32, b: u32) -> u32 {
        self.add_raw(a, b)
    }
    fn mul(&self, a: u32, b: u32) -> u32 {
        self.mul_raw(a, b)
    }
    fn neg(&self, a: u32) -> u32 {
        self.neg_raw(a)
    }
    fn inv(&self, a: u32) -> u32 {
        self.inv[a as usize] as u32
    }
}

fn is_prime(n: u32) -> bool {
    n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
}

fn poly_trim(mut a: Vec<u32>) -> Vec<u32> {
    while a.len() > 1 && *a.last().unwrap() == 0 {
        a.pop();
    }
    a
}

fn poly_is_zero(a: &[u32]) -> bool {
    a.iter().all(|&c| c == 0)
}

/// Remainder of `a` modulo the monic-or-not `m`.
fn poly_rem<C: Coeffs + ?Sized>(ring: &C, a: &[u32], m: &[u32]) -> Vec<u32> {
    let mut r = a.to_vec();
    let dm = m.len() - 1;
    let lead_inv = ring.inv(m[dm]);
    while r.len() > dm && !poly_is_zero(&r) {
        let dr = r.len() - 1;
        let coef = ring.mul(r[dr], lead_inv);
        if coef != 0 {
            for i in 0..=dm {
                let t = ring.mul(coef, m[i]);
                r[dr - dm + i] = ring.add(r[dr - dm + i], ring.neg(t));
            }
        }
        r.pop();
    }
    r.resize(dm.max(1), 0);
    r
}

fn poly_mul<C: Coeffs + ?Sized>(ring: &C, a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = vec![0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = ring.add(out[i + j], ring.mul(x, y));
        }
    }
    out
}

/// Enumerate every monic polynomial of exactly `deg` over the ring.
fn monic_polys(size: u32, deg: usize) -> impl Iterator<Item = Vec<u32>> {
    let count = (size as u64).pow(deg as u32);
    (0..count).map(move |mut idx| {
        let mut c = Vec::with_capacity(deg + 1);
        for _ in 0..deg {
            c.push((idx % size as u64) as u32);
            idx /= size as u64;
        }
        c.push(1);
        c
    })
}

/// Trial division by every monic polynomial of degree at most `deg / 2`.
fn poly_is_irreducible<C: Coeffs + ?Sized>(ring: &C, poly: &[u32]) -> bool {
    let deg = poly.len() - 1;
    if deg == 0 {
        return false;
    }
    for d in 1..=deg / 2 {
        for f in monic_polys(ring.size(), d) {
            if poly_is_zero(&poly_rem(ring, poly, &f)) {
                return false;
            }
        }
    }
    true
}

fn smallest_irreducible<C: Coeffs + ?Sized>(ring: &C, deg: usize) -> Vec<u32> {
    monic_polys(ring.size(), deg)
        .find(|f| poly_is_irreducible(ring, f))
        .expect("irreducible polynomials exist in every degree")
}

fn digits(mut v: u32, base: u32, len: usize) -> Vec<u32> {
    let mut d = Vec::with_capacity(len);
    for _ in 0..len {
        d.push(v % base);
        v /= base;
    }
    d
}

fn undigits(d: &[u32], base: u32) -> u32 {
    d.iter().rev().fold(0, |acc, &c| acc * base + c)
}

impl FieldSpec {
    fn build<C: Coeffs + ?Sized>(
        ring: &C,
        p: u32,
        degree: usize,
        poly: Vec<u32>,
        construction: Construction,
    ) -> Result<FieldSpec> {
        let base = ring.size();
        let order = base
            .checked_pow(degree as u32)
            .filter(|&o| o <= MAX_FIELD_ORDER)
            .ok_or_else(|| Error::InvalidField(format!("field order {base}^{degree} exceeds {MAX_FIELD_ORDER}")))?;
        if order < 2 {
            return Err(Error::InvalidField("field order must be at least 2".into()));
        }
        let q = order as usize;
        let mut add = vec![0u16; q * q];
        let mut mul = vec![0u16; q * q];
        let elems: Vec<Vec<u32>> = (0..order).map(|v| digits(v, base, degree)).collect();
        for a in 0..q {
            for b in 0..q {
                let s: Vec<u32> = elems[a].iter().zip(&elems[b]).map(|(&x, &y)| ring.add(x, y)).collect();
                add[a * q + b] = undigits(&s, base) as u16;
                let prod = if degree == 1 {
                    vec![ring.mul(elems[a][0], elems[b][0])]
                } else {
                    poly_rem(ring, &poly_mul(ring, &elems[a], &elems[b]), &poly)
                };
                mul[a * q + b] = undigits(&prod, base) as u16;
            }
        }
        let mut neg = vec![0u16; q];
        let mut inv = vec![0u16; q];
        for a in 0..q {
            neg[a] = (0..q).find(|&b| add[a * q + b] == 0).unwrap() as u16;
            if a != 0 {
                inv[a] = (1..q)
                    .find(|&b| mul[a * q + b] == 1)
                    .ok_or_else(|| Error::InvalidField("modulus is not irreducible".into()))?
                    as u16;
            }
        }
        Ok(FieldSpec { p, degree, poly, order, construction, add, mul, neg, inv })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    /// Degree of the defining polynomial over the coefficient field.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn poly(&self) -> &[u32] {
        &self.poly
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Degree of the field over its prime subfield.
    pub fn prime_degree(&self) -> usize {
        match &self.construction {
            Construction::PrimePower => self.degree,
            Construction::Extension(base) => base.prime_degree() * self.degree,
        }
    }

    /// Base field when this field was built as an extension.
    pub fn base(&self) -> Option<&Field> {
        match &self.construction {
            Construction::PrimePower => None,
            Construction::Extension(b) => Some(b),
        }
    }

    /// Size of the coefficient alphabet used by [`FieldElement::coeffs`].
    pub fn coeff_base(&self) -> u32 {
        match &self.construction {
            Construction::PrimePower => self.p,
            Construction::Extension(b) => b.order,
        }
    }

    #[inline]
    pub fn add_raw(&self, a: u32, b: u32) -> u32 {
        self.add[a as usize * self.order as usize + b as usize] as u32
    }
    #[inline]
    pub fn mul_raw(&self, a: u32, b: u32) -> u32 {
        self.mul[a as usize * self.order as usize + b as usize] as u32
    }
    #[inline]
    pub fn neg_raw(&self, a: u32) -> u32 {
        self.neg[a as usize] as u32
    }
    #[inline]
    pub fn sub_raw(&self, a: u32, b: u32) -> u32 {
        self.add_raw(a, self.neg_raw(b))
    }
    pub fn inv_raw(&self, a: u32) -> Result<u32> {
        if a == 0 {
            Err(Error::NotInvertible)
        } else {
            Ok(self.inv[a as usize] as u32)
        }
    }

    pub fn pow_raw(&self, a: u32, mut e: u64) -> u32 {
        let mut base = a;
        let mut acc = 1;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul_raw(acc, base);
            }
            base = self.mul_raw(base, base);
            e >>= 1;
        }
        acc
    }

    /// Absolute trace `a + a^p + ... + a^(p^(L-1))`, returned as an integer in `0..p`.
    pub fn trace_raw(&self, a: u32) -> u32 {
        let mut acc = 0;
        let mut x = a;
        for _ in 0..self.prime_degree() {
            acc = self.add_raw(acc, x);
            x = self.pow_raw(x, self.p as u64);
        }
        debug_assert!(acc < self.p, "trace must land in the prime subfield");
        acc
    }
}

impl Field {
    /// The prime field `F_p`.
    pub fn prime(p: u32) -> Result<Field> {
        Field::new(p, 1)
    }

    /// `F_{p^l}` using the shipped polynomial table, falling back to the
    /// lexicographically smallest monic irreducible polynomial.
    pub fn new(p: u32, degree: usize) -> Result<Field> {
        if !is_prime(p) {
            return Err(Error::InvalidField(format!("characteristic {p} is not prime")));
        }
        if degree == 0 {
            return Err(Error::InvalidField("extension degree must be positive".into()));
        }
        let order = (p as u64).checked_pow(degree as u32).unwrap_or(u64::MAX);
        if order > MAX_FIELD_ORDER as u64 {
            return Err(Error::InvalidField(format!("field order {p}^{degree} exceeds {MAX_FIELD_ORDER}")));
        }
        let poly = if degree == 1 {
            vec![0, 1]
        } else {
            DEFAULT_POLYS
                .iter()
                .find(|(q, _)| *q as u64 == order)
                .map(|(_, c)| c.to_vec())
                .unwrap_or_else(|| smallest_irreducible(&PrimeCoeffs(p), degree))
        };
        Field::with_poly(p, poly)
    }

    /// `F_{p^l}` with an explicit modulus (little-endian coefficients over `F_p`).
    pub fn with_poly(p: u32, poly: Vec<u32>) -> Result<Field> {
        if !is_prime(p) {
            return Err(Error::InvalidField(format!("characteristic {p} is not prime")));
        }
        let poly = poly_trim(poly);
        if poly.len() < 2 {
            return Err(Error::InvalidField("modulus must have positive degree".into()));
        }
        if poly.iter().any(|&c| c >= p) {
            return Err(Error::InvalidField("modulus coefficients must be reduced mod p".into()));
        }
        if *poly.last().unwrap() != 1 {
            return Err(Error::InvalidField("modulus must be monic".into()));
        }
        let ring = PrimeCoeffs(p);
        if !poly_is_irreducible(&ring, &poly) {
            return Err(Error::InvalidField(format!("{poly:?} is reducible over GF({p})")));
        }
        let degree = poly.len() - 1;
        Ok(Field(Arc::new(FieldSpec::build(&ring, p, degree, poly, Construction::PrimePower)?)))
    }

    /// `F_q` for a prime power `q`.
    pub fn of_order(q: u32) -> Result<Field> {
        let p = (2..=q).find(|d| q.is_multiple_of(*d)).ok_or_else(|| Error::InvalidField(format!("no field of order {q}")))?;
        let mut rest = q;
        let mut degree = 0;
        while rest.is_multiple_of(p) {
            rest /= p;
            degree += 1;
        }
        if rest != 1 {
            return Err(Error::InvalidField(format!("{q} is not a prime power")));
        }
        Field::new(p, degree)
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement { field: self.clone(), value: 0 }
    }

    pub fn one(&self) -> FieldElement {
        FieldElement { field: self.clone(), value: 1 }
    }

    pub fn element(&self, value: u32) -> Result<FieldElement> {
        if value >= self.order {
            return Err(Error::InvalidParameter(format!("value {value} outside GF({})", self.order)));
        }
        Ok(FieldElement { field: self.clone(), value })
    }

    /// Element from little-endian coefficients over the coefficient field.
    pub fn from_coeffs(&self, coeffs: &[u32]) -> Result<FieldElement> {
        let base = self.coeff_base();
        if coeffs.len() != self.degree || coeffs.iter().any(|&c| c >= base) {
            return Err(Error::LengthMismatch { expected: self.degree, got: coeffs.len() });
        }
        Ok(FieldElement { field: self.clone(), value: undigits(coeffs, base) })
    }

    pub fn elements(&self) -> impl Iterator<Item = FieldElement> + '_ {
        (0..self.order).map(move |v| FieldElement { field: self.clone(), value: v })
    }

    pub fn random<T: Tape + ?Sized>(&self, tape: &mut T) -> FieldElement {
        FieldElement { field: self.clone(), value: tape.draw(self.order as u64) as u32 }
    }

    /// Uniform element of `F_q \ {0}`.
    pub fn random_nonzero<T: Tape + ?Sized>(&self, tape: &mut T) -> FieldElement {
        FieldElement { field: self.clone(), value: 1 + tape.draw(self.order as u64 - 1) as u32 }
    }

    pub fn vector(&self, values: Vec<u32>) -> Result<FieldVector> {
        FieldVector::new(self.clone(), values)
    }
}

impl Serialize for FieldSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match &self.construction {
            Construction::PrimePower => {
                let mut st = s.serialize_struct("FieldSpec", 3)?;
                st.serialize_field("p", &self.p)?;
                st.serialize_field("l", &self.degree)?;
                st.serialize_field("poly", &self.poly)?;
                st.end()
            }
            Construction::Extension(base) => {
                let mut st = s.serialize_struct("ExtFieldSpec", 3)?;
                st.serialize_field("base", &**base)?;
                st.serialize_field("c", &self.degree)?;
                st.serialize_field("poly", &self.poly)?;
                st.end()
            }
        }
    }
}

impl Serialize for Field {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        (**self).serialize(s)
    }
}

/// An element of a [`Field`].
#[derive(Clone, PartialEq, Eq)]
pub struct FieldElement {
    field: Field,
    value: u32,
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coeffs())
    }
}

impl Serialize for FieldElement {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coeffs().serialize(s)
    }
}

impl FieldElement {
    pub fn field(&self) -> &Field {
        &self.field
    }

    /// Packed integer encoding of the element.
    pub fn value(&self) -> u32 {
        self.value
    }

    /// Little-endian coefficients over the coefficient field.
    pub fn coeffs(&self) -> Vec<u32> {
        digits(self.value, self.field.coeff_base(), self.field.degree)
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    fn check(&self, other: &FieldElement) -> Result<()> {
        if self.field == other.field {
            Ok(())
        } else {
            Err(Error::FieldMismatch)
        }
    }

    pub fn add(&self, other: &FieldElement) -> Result<FieldElement> {
        self.check(other)?;
        Ok(FieldElement { field: self.field.clone(), value: self.field.add_raw(self.value, other.value) })
    }

    pub fn sub(&self, other: &FieldElement) -> Result<FieldElement> {
        self.check(other)?;
        Ok(FieldElement { field: self.field.clone(), value: self.field.sub_raw(self.value, other.value) })
    }

    pub fn neg(&self) -> FieldElement {
        FieldElement { field: self.field.clone(), value: self.field.neg_raw(self.value) }
    }

    pub fn mul(&self, other: &FieldElement) -> Result<FieldElement> {
        self.check(other)?;
        Ok(FieldElement { field: self.field.clone(), value: self.field.mul_raw(self.value, other.value) })
    }

    pub fn inv(&self) -> Result<FieldElement> {
        Ok(FieldElement { field: self.field.clone(), value: self.field.inv_raw(self.value)? })
    }

    pub fn pow(&self, e: u64) -> FieldElement {
        FieldElement { field: self.field.clone(), value: self.field.pow_raw(self.value, e) }
    }

    /// Absolute trace down to the prime field `F_p`.
    pub fn trace(&self) -> FieldElement {
        let prime = Field::prime(self.field.p).expect("characteristic is prime");
        FieldElement { field: prime, value: self.field.trace_raw(self.value) }
    }

    /// True when the element lies in the base field of an extension, i.e. its
    /// representative polynomial is constant.
    pub fn in_base_field(&self) -> bool {
        self.value < self.field.coeff_base() || self.field.base().is_none()
    }
}

pub fn fe_add(a: &FieldElement, b: &FieldElement) -> Result<FieldElement> {
    a.add(b)
}

pub fn fe_mul(a: &FieldElement, b: &FieldElement) -> Result<FieldElement> {
    a.mul(b)
}

pub fn fe_inv(a: &FieldElement) -> Result<FieldElement> {
    a.inv()
}

pub fn fe_trace(a: &FieldElement) -> FieldElement {
    a.trace()
}

/// `F_{q'}` with `q' = q^c`, built as `F_q[y] / (poly)`; identifies `F_q^c`
/// with `F_{q'}` through the coefficient map.
#[derive(Clone, Debug)]
pub struct ExtFieldSpec {
    base: Field,
    ext: Field,
}

impl ExtFieldSpec {
    pub fn new(base: Field, c: usize) -> Result<ExtFieldSpec> {
        if c == 0 {
            return Err(Error::InvalidField("extension degree must be positive".into()));
        }
        let poly = if c == 1 { vec![0, 1] } else { smallest_irreducible(&*base, c) };
        ExtFieldSpec::with_poly(base, poly)
    }

    /// Extension with an explicit modulus whose coefficients are packed base-field values.
    pub fn with_poly(base: Field, poly: Vec<u32>) -> Result<ExtFieldSpec> {
        let poly = poly_trim(poly);
        if poly.len() < 2 || *poly.last().unwrap() != 1 || poly.iter().any(|&c| c >= base.order) {
            return Err(Error::InvalidField("extension modulus must be monic over the base field".into()));
        }
        if !poly_is_irreducible(&*base, &poly) {
            return Err(Error::InvalidField(format!("{poly:?} is reducible over GF({})", base.order)));
        }
        let c = poly.len() - 1;
        let spec = FieldSpec::build(&*base, base.p, c, poly, Construction::Extension(base.clone()))?;
        Ok(ExtFieldSpec { base, ext: Field(Arc::new(spec)) })
    }

    pub fn base(&self) -> &Field {
        &self.base
    }

    pub fn field(&self) -> &Field {
        &self.ext
    }

    pub fn degree(&self) -> usize {
        self.ext.degree
    }

    pub fn order(&self) -> u32 {
        self.ext.order
    }

    /// Map a length-`c` vector over `F_q` to `F_{q'}`.
    pub fn lift(&self, v: &FieldVector) -> Result<FieldElement> {
        if v.field != self.base {
            return Err(Error::FieldMismatch);
        }
        if v.len() != self.degree() {
            return Err(Error::LengthMismatch { expected: self.degree(), got: v.len() });
        }
        self.ext.from_coeffs(&v.values)
    }

    /// Inverse of [`ExtFieldSpec::lift`].
    pub fn lower(&self, a: &FieldElement) -> Result<FieldVector> {
        if a.field != self.ext {
            return Err(Error::FieldMismatch);
        }
        FieldVector::new(self.base.clone(), a.coeffs())
    }

    /// Embed a base-field element as a constant of the extension.
    pub fn embed(&self, a: &FieldElement) -> Result<FieldElement> {
        if a.field != self.base {
            return Err(Error::FieldMismatch);
        }
        self.ext.element(a.value)
    }

    /// Project a constant of the extension back into the base field.
    pub fn restrict(&self, a: &FieldElement) -> Option<FieldElement> {
        (a.field == self.ext && a.in_base_field()).then(|| FieldElement { field: self.base.clone(), value: a.value })
    }
}

pub fn ext_lift(v: &FieldVector, spec: &ExtFieldSpec) -> Result<FieldElement> {
    spec.lift(v)
}

pub fn ext_lower(a: &FieldElement, spec: &ExtFieldSpec) -> Result<FieldVector> {
    spec.lower(a)
}

/// Fixed-length vector over a field with componentwise arithmetic.
#[derive(Clone, PartialEq, Eq)]
pub struct FieldVector {
    field: Field,
    values: Vec<u32>,
}

impl fmt::Debug for FieldVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.values)
    }
}

impl Serialize for FieldVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let coeffs: Vec<Vec<u32>> = self.iter().map(|e| e.coeffs()).collect();
        coeffs.serialize(s)
    }
}

impl FieldVector {
    pub fn new(field: Field, values: Vec<u32>) -> Result<FieldVector> {
        if let Some(&bad) = values.iter().find(|&&v| v >= field.order) {
            return Err(Error::InvalidParameter(format!("value {bad} outside GF({})", field.order)));
        }
        Ok(FieldVector { field, values })
    }

    pub fn zero(field: &Field, len: usize) -> FieldVector {
        FieldVector { field: field.clone(), values: vec![0; len] }
    }

    pub fn random<T: Tape + ?Sized>(field: &Field, len: usize, tape: &mut T) -> FieldVector {
        let values = (0..len).map(|_| tape.draw(field.order as u64) as u32).collect();
        FieldVector { field: field.clone(), values }
    }

    pub fn from_elements(field: &Field, elems: &[FieldElement]) -> Result<FieldVector> {
        if elems.iter().any(|e| &e.field != field) {
            return Err(Error::FieldMismatch);
        }
        Ok(FieldVector { field: field.clone(), values: elems.iter().map(|e| e.value).collect() })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn get(&self, i: usize) -> FieldElement {
        FieldElement { field: self.field.clone(), value: self.values[i] }
    }

    pub fn iter(&self) -> impl Iterator<Item = FieldElement> + '_ {
        self.values.iter().map(move |&v| FieldElement { field: self.field.clone(), value: v })
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0)
    }

    /// Sub-vector `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> FieldVector {
        FieldVector { field: self.field.clone(), values: self.values[start..start + len].to_vec() }
    }

    fn check(&self, other: &FieldVector) -> Result<()> {
        if self.field != other.field {
            return Err(Error::FieldMismatch);
        }
        if self.len() != other.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: other.len() });
        }
        Ok(())
    }

    fn zip_with(&self, other: &FieldVector, f: impl Fn(u32, u32) -> u32) -> Result<FieldVector> {
        self.check(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(FieldVector { field: self.field.clone(), values })
    }

    pub fn add(&self, other: &FieldVector) -> Result<FieldVector> {
        self.zip_with(other, |a, b| self.field.add_raw(a, b))
    }

    pub fn sub(&self, other: &FieldVector) -> Result<FieldVector> {
        self.zip_with(other, |a, b| self.field.sub_raw(a, b))
    }

    /// Componentwise product.
    pub fn hadamard(&self, other: &FieldVector) -> Result<FieldVector> {
        self.zip_with(other, |a, b| self.field.mul_raw(a, b))
    }

    pub fn neg(&self) -> FieldVector {
        FieldVector { field: self.field.clone(), values: self.values.iter().map(|&a| self.field.neg_raw(a)).collect() }
    }

    pub fn scale(&self, s: &FieldElement) -> Result<FieldVector> {
        if s.field != self.field {
            return Err(Error::FieldMismatch);
        }
        Ok(FieldVector {
            field: self.field.clone(),
            values: self.values.iter().map(|&a| self.field.mul_raw(a, s.value)).collect(),
        })
    }

    /// Sum of a non-empty list of equal-length vectors.
    pub fn sum<'a>(items: impl IntoIterator<Item = &'a FieldVector>) -> Result<FieldVector> {
        let mut it = items.into_iter();
        let first = it.next().ok_or_else(|| Error::InvalidParameter("empty sum".into()))?.clone();
        it.try_fold(first, |acc, v| acc.add(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gf(q: u32) -> Field {
        Field::of_order(q).unwrap()
    }

    #[test]
    fn small_field_examples() {
        let f2 = gf(2);
        assert_eq!(fe_add(&f2.one(), &f2.one()).unwrap(), f2.zero());
        let f3 = gf(3);
        let two = f3.element(2).unwrap();
        assert_eq!(fe_add(&two, &two).unwrap().value(), 1);
        let f5 = gf(5);
        assert_eq!(fe_inv(&f5.element(2).unwrap()).unwrap().value(), 3);
        assert_eq!(fe_inv(&f2.one()).unwrap(), f2.one());
    }

    #[test]
    fn gf4_examples() {
        // omega = x, coefficients little-endian [0, 1]; omega + 1 = [1, 1]
        let f4 = gf(4);
        assert_eq!(f4.poly(), &[1, 1, 1]);
        let w = f4.from_coeffs(&[0, 1]).unwrap();
        let w1 = f4.from_coeffs(&[1, 1]).unwrap();
        assert_eq!(fe_add(&w, &w1).unwrap(), f4.one());
        assert_eq!(fe_mul(&w, &w).unwrap(), w1);
        assert_eq!(fe_mul(&w, &w1).unwrap(), f4.one());
        assert_eq!(fe_inv(&w).unwrap(), w1);
        assert_eq!(fe_trace(&w).value(), 1);
        assert_eq!(fe_trace(&f4.one()).value(), 0);
        assert_eq!(fe_trace(&f4.zero()).value(), 0);
    }

    #[test]
    fn zero_is_not_invertible() {
        let f4 = gf(4);
        assert!(matches!(fe_inv(&f4.zero()), Err(Error::NotInvertible)));
    }

    #[test]
    fn mismatched_fields_rejected() {
        let a = gf(4).one();
        let b = gf(8).one();
        assert!(matches!(fe_add(&a, &b), Err(Error::FieldMismatch)));
        assert!(matches!(fe_mul(&a, &b), Err(Error::FieldMismatch)));
    }

    #[test]
    fn field_axioms_exhaustive() {
        for q in [2, 3, 4, 8] {
            let f = gf(q);
            let els: Vec<_> = f.elements().collect();
            for a in &els {
                assert_eq!(fe_add(a, &f.zero()).unwrap(), *a);
                assert_eq!(fe_mul(a, &f.one()).unwrap(), *a);
                if !a.is_zero() {
                    let invs: Vec<_> = els.iter().filter(|b| fe_mul(a, b).unwrap() == f.one()).collect();
                    assert_eq!(invs.len(), 1, "unique inverse in GF({q})");
                }
                for b in &els {
                    assert_eq!(fe_add(a, b).unwrap(), fe_add(b, a).unwrap());
                    assert_eq!(fe_mul(a, b).unwrap(), fe_mul(b, a).unwrap());
                    for c in &els {
                        let l = fe_add(&fe_add(a, b).unwrap(), c).unwrap();
                        let r = fe_add(a, &fe_add(b, c).unwrap()).unwrap();
                        assert_eq!(l, r);
                        let l = fe_mul(&fe_mul(a, b).unwrap(), c).unwrap();
                        let r = fe_mul(a, &fe_mul(b, c).unwrap()).unwrap();
                        assert_eq!(l, r);
                        let l = fe_mul(a, &fe_add(b, c).unwrap()).unwrap();
                        let r = fe_add(&fe_mul(a, b).unwrap(), &fe_mul(a, c).unwrap()).unwrap();
                        assert_eq!(l, r);
                    }
                }
            }
        }
    }

    /// Trace of the multiplication map `x -> a x` written in the coefficient basis.
    fn matrix_trace(f: &Field, a: &FieldElement) -> u32 {
        let l = f.degree();
        let mut tr = 0;
        for i in 0..l {
            let mut basis = vec![0; l];
            basis[i] = 1;
            let image = fe_mul(a, &f.from_coeffs(&basis).unwrap()).unwrap();
            tr = (tr + image.coeffs()[i]) % f.p();
        }
        tr
    }

    #[test]
    fn trace_matches_multiplication_map_and_is_linear_surjective() {
        for q in [2, 3, 4, 5, 7, 8, 9, 11, 13, 16] {
            let f = gf(q);
            let mut hit = vec![false; f.p() as usize];
            for a in f.elements() {
                let t = fe_trace(&a).value();
                assert_eq!(t, matrix_trace(&f, &a), "GF({q}) trace of {a:?}");
                hit[t as usize] = true;
                for b in f.elements() {
                    let sum = fe_trace(&fe_add(&a, &b).unwrap()).value();
                    assert_eq!(sum, (t + fe_trace(&b).value()) % f.p());
                }
                for c in 0..f.p() {
                    let scaled = fe_mul(&a, &f.element(c).unwrap()).unwrap();
                    assert_eq!(fe_trace(&scaled).value(), (t * c) % f.p());
                }
            }
            assert!(hit.iter().all(|&h| h), "trace onto F_p for GF({q})");
        }
    }

    #[test]
    fn shipped_polynomials_are_irreducible() {
        for (q, poly) in DEFAULT_POLYS {
            let p = (2..=*q).find(|d| q % d == 0).unwrap();
            assert!(Field::with_poly(p, poly.to_vec()).is_ok(), "GF({q})");
        }
        assert!(Field::with_poly(2, vec![1, 0, 1]).is_err());
        assert!(Field::with_poly(2, vec![1, 1, 2]).is_err());
        assert!(Field::of_order(6).is_err());
        assert!(Field::of_order(512).is_err());
    }

    #[test]
    fn ext_lift_examples() {
        let ext = ExtFieldSpec::new(gf(2), 2).unwrap();
        assert_eq!(ext.order(), 4);
        let f2 = gf(2);
        let zero = ext_lift(&f2.vector(vec![0, 0]).unwrap(), &ext).unwrap();
        assert!(zero.is_zero());
        let a = ext_lift(&f2.vector(vec![1, 0]).unwrap(), &ext).unwrap();
        let b = ext_lift(&f2.vector(vec![0, 1]).unwrap(), &ext).unwrap();
        assert!(!a.is_zero() && !b.is_zero() && a != b);
        let c = fe_add(&a, &b).unwrap();
        assert!(!c.is_zero() && c != a && c != b);
        assert!(matches!(ext_lift(&f2.vector(vec![1, 0, 0]).unwrap(), &ext), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn ext_lift_round_trip_q2_c3() {
        let f2 = gf(2);
        let ext = ExtFieldSpec::new(f2.clone(), 3).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for v in 0..8u32 {
            let vec = f2.vector(vec![v & 1, (v >> 1) & 1, (v >> 2) & 1]).unwrap();
            let lifted = ext_lift(&vec, &ext).unwrap();
            assert!(seen.insert(lifted.value()));
            assert_eq!(ext_lower(&lifted, &ext).unwrap(), vec);
        }
    }

    #[test]
    fn ext_lift_is_additive_isomorphism() {
        for (q, c) in [(2, 2), (2, 3), (2, 4), (2, 8), (4, 2), (4, 3), (4, 4), (3, 2), (3, 3)] {
            let base = gf(q);
            let ext = ExtFieldSpec::new(base.clone(), c).unwrap();
            let n = q.pow(c as u32);
            assert_eq!(ext.order(), n);
            let vecs: Vec<FieldVector> = (0..n)
                .map(|mut v| {
                    let vals = (0..c)
                        .map(|_| {
                            let d = v % q;
                            v /= q;
                            d
                        })
                        .collect();
                    base.vector(vals).unwrap()
                })
                .collect();
            let lifted: Vec<_> = vecs.iter().map(|v| ext_lift(v, &ext).unwrap()).collect();
            let distinct: std::collections::BTreeSet<_> = lifted.iter().map(|e| e.value()).collect();
            assert_eq!(distinct.len(), n as usize);
            for i in 0..vecs.len() {
                for j in 0..vecs.len() {
                    let lhs = ext_lift(&vecs[i].add(&vecs[j]).unwrap(), &ext).unwrap();
                    assert_eq!(lhs, fe_add(&lifted[i], &lifted[j]).unwrap());
                }
            }
        }
    }

    #[test]
    fn base_field_embeds_as_constants() {
        let base = gf(4);
        let ext = ExtFieldSpec::new(base.clone(), 2).unwrap();
        for a in base.elements() {
            let e = ext.embed(&a).unwrap();
            assert!(e.in_base_field());
            assert_eq!(ext.restrict(&e).unwrap(), a);
            for b in base.elements() {
                let prod = fe_mul(&e, &ext.embed(&b).unwrap()).unwrap();
                assert_eq!(ext.restrict(&prod).unwrap(), fe_mul(&a, &b).unwrap());
            }
        }
    }

    #[test]
    fn serializes_spec_and_elements() {
        let f4 = gf(4);
        let json = serde_json::to_value(&f4).unwrap();
        assert_eq!(json, serde_json::json!({"p": 2, "l": 2, "poly": [1, 1, 1]}));
        let w = f4.from_coeffs(&[0, 1]).unwrap();
        assert_eq!(serde_json::to_string(&w).unwrap(), "[0,1]");
    }
}
