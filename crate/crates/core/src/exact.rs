//! Exact rational scalars, vectors and matrices.
//!
//! Everything in this crate is computed over `BigRational`; nothing is ever
//! rounded. The only place floating point shows up is the labelled decimal
//! approximation used in reports.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

pub use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
pub use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Integer as a rational.
pub fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// `num / den` as a reduced rational. Panics on a zero denominator.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Squared Euclidean norm of a rational vector.
pub fn norm_sq(v: &[BigRational]) -> BigRational {
    v.iter().fold(BigRational::zero(), |acc, x| acc + x * x)
}

/// Always renders `p/q`, also for integers (`1/1`, `0/1`).
pub fn fraction_string(x: &BigRational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Parses `p/q` or a bare integer.
pub fn parse_fraction(s: &str) -> Option<BigRational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().ok()?;
            let q: BigInt = q.trim().parse().ok()?;
            if q.is_zero() {
                return None;
            }
            Some(BigRational::new(p, q))
        }
        None => s.parse::<BigInt>().ok().map(BigRational::from_integer),
    }
}

/// Decimal rendering of an exact rational with `digits` significant digits,
/// rounded half-to-even. Derived from the exact value, so it is reproducible
/// bit for bit.
pub fn decimal_approx(x: &BigRational, digits: usize) -> String {
    assert!(digits > 0);
    if x.is_zero() {
        return "0".to_string();
    }
    let negative = x.is_negative();
    let x = x.abs();
    let ten = BigInt::from(10);

    // exponent e with 10^e <= x < 10^(e+1)
    let mut e: i64 = x.numer().to_string().len() as i64 - x.denom().to_string().len() as i64;
    let pow10 = |k: i64| -> BigRational {
        if k >= 0 {
            BigRational::from_integer(num_traits::pow(ten.clone(), k as usize))
        } else {
            BigRational::new(BigInt::one(), num_traits::pow(ten.clone(), (-k) as usize))
        }
    };
    while x < pow10(e) {
        e -= 1;
    }
    while x >= pow10(e + 1) {
        e += 1;
    }

    let shift = digits as i64 - 1 - e;
    let scaled = &x * pow10(shift);
    let mut mantissa = round_half_even(&scaled);
    // rounding may carry into a new digit, e.g. 9.99.. -> 10.0..
    if mantissa.to_string().len() > digits {
        mantissa /= &ten;
        e += 1;
    }

    let mut m = mantissa.to_string();
    let sign = if negative { "-" } else { "" };
    if (-6..digits as i64).contains(&e) {
        let point = e + 1;
        let body = if point <= 0 {
            format!("0.{}{}", "0".repeat((-point) as usize), m)
        } else if point as usize >= m.len() {
            format!("{}{}", m, "0".repeat(point as usize - m.len()))
        } else {
            format!("{}.{}", &m[..point as usize], &m[point as usize..])
        };
        format!("{sign}{}", trim_fraction_zeros(body))
    } else {
        let rest = m.split_off(1);
        let body = if rest.is_empty() {
            m
        } else {
            trim_fraction_zeros(format!("{m}.{rest}"))
        };
        format!("{sign}{body}e{e}")
    }
}

fn trim_fraction_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0');
    t.trim_end_matches('.').to_string()
}

fn round_half_even(x: &BigRational) -> BigInt {
    let floor = x.floor().to_integer();
    let frac = x - BigRational::from_integer(floor.clone());
    let half = ratio(1, 2);
    if frac > half || (frac == half && floor.is_odd()) {
        floor + 1
    } else {
        floor
    }
}

/// Dense row-major matrix of exact rationals.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<BigRational>,
}

impl RationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![BigRational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = BigRational::one();
        }
        m
    }

    /// Builds from row-major entries; fails if the length does not match.
    pub fn from_entries(rows: usize, cols: usize, entries: Vec<BigRational>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_rows(rows: Vec<Vec<BigRational>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::from_entries(r, c, rows.into_iter().flatten().collect())
    }

    /// Convenience constructor for integer literals in tests and protocols.
    pub fn from_i64(rows: &[&[i64]]) -> Self {
        Self::from_rows(
            rows.iter()
                .map(|row| row.iter().map(|&x| rat(x)).collect())
                .collect(),
        )
        .expect("rectangular literal")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[BigRational] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[BigRational] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Zero::is_zero)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|x| x * s).collect(),
        }
    }

    /// `selfᵀ · self`.
    pub fn gram(&self) -> Self {
        let mut g = Self::zeros(self.cols, self.cols);
        for i in 0..self.cols {
            for j in i..self.cols {
                let mut acc = BigRational::zero();
                for r in 0..self.rows {
                    let a = &self[(r, i)];
                    if a.is_zero() {
                        continue;
                    }
                    acc += a * &self[(r, j)];
                }
                g[(j, i)] = acc.clone();
                g[(i, j)] = acc;
            }
        }
        g
    }

    pub fn mul_vec(&self, v: &[BigRational]) -> Result<Vec<BigRational>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .filter(|(a, _)| !a.is_zero())
                    .fold(BigRational::zero(), |acc, (a, x)| acc + a * x)
            })
            .collect())
    }

    /// Quadratic form `vᵀ · self · v`.
    pub fn quadratic_form(&self, v: &[BigRational]) -> Result<BigRational> {
        let mv = self.mul_vec(v)?;
        Ok(v.iter()
            .zip(&mv)
            .fold(BigRational::zero(), |acc, (a, b)| acc + a * b))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let mut k = Self::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = &self[(i, j)];
                if a.is_zero() {
                    continue;
                }
                for p in 0..other.rows {
                    for q in 0..other.cols {
                        k[(i * other.rows + p, j * other.cols + q)] = a * &other[(p, q)];
                    }
                }
            }
        }
        k
    }

    fn check_same_shape(&self, other: &Self) {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "matrix shape mismatch"
        );
    }
}

impl Index<(usize, usize)> for RationalMatrix {
    type Output = BigRational;

    fn index(&self, (i, j): (usize, usize)) -> &BigRational {
        &self.entries[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for RationalMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigRational {
        &mut self.entries[i * self.cols + j]
    }
}

impl Add for &RationalMatrix {
    type Output = RationalMatrix;

    fn add(self, rhs: &RationalMatrix) -> RationalMatrix {
        self.check_same_shape(rhs);
        RationalMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &RationalMatrix {
    type Output = RationalMatrix;

    fn sub(self, rhs: &RationalMatrix) -> RationalMatrix {
        self.check_same_shape(rhs);
        RationalMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &RationalMatrix {
    type Output = RationalMatrix;

    fn mul(self, rhs: &RationalMatrix) -> RationalMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix shape mismatch");
        let mut out = RationalMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * &rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl fmt::Debug for RationalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            let row: Vec<String> = self.row(i).iter().map(ToString::to_string).collect();
            write!(f, "{}", row.join(" "))?;
        }
        write!(f, "]")
    }
}

/// `M = L · diag(d) · Lᵀ` with `L` unit lower triangular.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LdlFactorization {
    pub l: RationalMatrix,
    pub d: Vec<BigRational>,
}

impl LdlFactorization {
    pub fn reconstruct(&self) -> RationalMatrix {
        let n = self.d.len();
        let mut ld = self.l.clone();
        for i in 0..n {
            for j in 0..n {
                ld[(i, j)] = &ld[(i, j)] * &self.d[j];
            }
        }
        &ld * &self.l.transpose()
    }
}

/// Whether negative pivots are an error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LdlMode {
    General,
    Psd,
}

/// Rational LDLᵀ without pivoting.
///
/// A zero pivot is accepted only when the rest of its column (after
/// elimination) is zero as well; the column of `L` is then left at zero.
pub fn ldl_decompose(m: &RationalMatrix, mode: LdlMode) -> Result<LdlFactorization> {
    if !m.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let n = m.rows();
    let mut l = RationalMatrix::identity(n);
    let mut d: Vec<BigRational> = Vec::with_capacity(n);

    for j in 0..n {
        let mut pivot = m[(j, j)].clone();
        for k in 0..j {
            if !l[(j, k)].is_zero() {
                pivot -= &l[(j, k)] * &l[(j, k)] * &d[k];
            }
        }
        if mode == LdlMode::Psd && pivot.is_negative() {
            return Err(Error::Indefinite(format!("negative pivot {pivot} at {j}")));
        }
        for i in j + 1..n {
            let mut v = m[(i, j)].clone();
            for k in 0..j {
                if !d[k].is_zero() {
                    v -= &l[(i, k)] * &l[(j, k)] * &d[k];
                }
            }
            if pivot.is_zero() {
                if !v.is_zero() {
                    return Err(Error::Indefinite(format!(
                        "zero pivot at {j} with nonzero entry in row {i}"
                    )));
                }
            } else {
                l[(i, j)] = v / &pivot;
            }
        }
        d.push(pivot);
    }
    Ok(LdlFactorization { l, d })
}

/// Positive semidefiniteness via LDLᵀ under the zero-pivot rule.
pub fn is_psd(m: &RationalMatrix) -> Result<bool> {
    match ldl_decompose(m, LdlMode::Psd) {
        Ok(_) => Ok(true),
        Err(Error::Indefinite(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

fn is_square(n: &BigUint) -> Option<BigUint> {
    let r = n.sqrt();
    (&r * &r == *n).then_some(r)
}

fn sum_of_two_squares(n: &BigUint) -> Option<(BigUint, BigUint)> {
    let mut c = n.sqrt();
    loop {
        let rest = n - &c * &c;
        if let Some(e) = is_square(&rest) {
            return Some((c, e));
        }
        // only need c >= e
        if &c * &c * 2u32 < *n || c.is_zero() {
            return None;
        }
        c -= 1u32;
    }
}

fn sum_of_three_squares(n: &BigUint) -> Option<(BigUint, BigUint, BigUint)> {
    // Legendre: n = 4^a (8b + 7) is not a sum of three squares
    let mut t = n.clone();
    while !t.is_zero() && (&t % 4u32).is_zero() {
        t /= 4u32;
    }
    if (&t % 8u32) == BigUint::from(7u32) {
        return None;
    }
    let mut b = n.sqrt();
    loop {
        let rest = n - &b * &b;
        if let Some((c, e)) = sum_of_two_squares(&rest) {
            return Some((b, c, e));
        }
        if b.is_zero() {
            return None;
        }
        b -= 1u32;
    }
}

/// Four squares summing to `n`, found by descending exhaustive search.
pub fn four_square_decompose(n: &BigUint) -> [BigUint; 4] {
    let mut a = n.sqrt();
    loop {
        let rest = n - &a * &a;
        if let Some((b, c, e)) = sum_of_three_squares(&rest) {
            return [a, b, c, e];
        }
        assert!(
            !a.is_zero(),
            "Lagrange's theorem guarantees a decomposition"
        );
        a -= 1u32;
    }
}

/// Rationals whose squares sum to `d`: with `d = p/q`, decompose `p·q` into
/// four squares and divide each root by `q`. Zero terms are dropped.
pub fn rational_sqrt_rows(d: &BigRational) -> Result<Vec<BigRational>> {
    if d.is_negative() {
        return Err(Error::Indefinite(format!(
            "negative value {d} has no real root"
        )));
    }
    let p = d.numer().to_biguint().expect("nonnegative");
    let q = d.denom().to_biguint().expect("positive");
    let qi = BigInt::from(q.clone());
    Ok(four_square_decompose(&(&p * &q))
        .into_iter()
        .filter(|x| !x.is_zero())
        .map(|x| BigRational::new(BigInt::from(x), qi.clone()))
        .collect())
}
