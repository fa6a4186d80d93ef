//! Rational superoperators: finite sets of operation elements `E_j = P_j / D`
//! with `Σ E_jᵀ E_j = I`, where every payload `P_j` is rational and `D` is a
//! positive integer shared by all elements.
//!
//! Main elements carry the computation; observing any other element ends the
//! current iteration of a protocol.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exact::{
    fraction_string, is_psd, ldl_decompose, norm_sq, parse_fraction, rat, rational_sqrt_rows,
    BigRational, LdlMode, RationalMatrix,
};

/// Choice of the common denominator `D`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Denominator {
    /// Smallest positive integer that admits a completion.
    #[default]
    Auto,
    Fixed(u64),
}

impl Denominator {
    pub fn parse(s: &str) -> Option<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Some(Denominator::Auto);
        }
        s.parse::<u64>()
            .ok()
            .filter(|&d| d >= 1)
            .map(Denominator::Fixed)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Superoperator {
    dim: usize,
    denominator: u64,
    payloads: Vec<RationalMatrix>,
    main_indices: Vec<usize>,
    aux_gram: RationalMatrix,
}

/// One outcome of applying a superoperator to an unnormalized state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BranchOutcome {
    pub element_index: usize,
    pub unnormalized_vector: Vec<BigRational>,
    pub probability: BigRational,
}

impl Superoperator {
    /// Assembles a superoperator from payloads without checking the
    /// trace-preservation identity; see [`Superoperator::validate`].
    pub fn from_payloads(
        payloads: Vec<RationalMatrix>,
        main_indices: Vec<usize>,
        denominator: u64,
    ) -> Result<Self> {
        let dim = payloads
            .first()
            .ok_or_else(|| Error::InvalidSuperoperator("no operation elements".into()))?
            .rows();
        if denominator == 0 {
            return Err(Error::InvalidSuperoperator(
                "denominator must be positive".into(),
            ));
        }
        if payloads.iter().any(|p| p.rows() != dim || p.cols() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "all operation elements must be {dim}x{dim}"
            )));
        }
        let mut seen = vec![false; payloads.len()];
        for &m in &main_indices {
            if m >= payloads.len() || seen[m] {
                return Err(Error::InvalidSuperoperator(format!("bad main index {m}")));
            }
            seen[m] = true;
        }
        let mut aux_gram = RationalMatrix::zeros(dim, dim);
        for (j, p) in payloads.iter().enumerate() {
            if !seen[j] && !p.is_zero() {
                aux_gram = &aux_gram + &p.gram();
            }
        }
        Ok(Self {
            dim,
            denominator,
            payloads,
            main_indices,
            aux_gram,
        })
    }

    /// Builds from operation elements `E_j` (payload = `E_j · D`).
    pub fn from_elements(
        elements: Vec<RationalMatrix>,
        main_indices: Vec<usize>,
        denominator: u64,
    ) -> Result<Self> {
        let d = rat(denominator as i64);
        Self::from_payloads(
            elements.iter().map(|e| e.scale(&d)).collect(),
            main_indices,
            denominator,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn len(&self) -> usize {
        self.payloads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payloads.is_empty()
    }

    pub fn payloads(&self) -> &[RationalMatrix] {
        &self.payloads
    }

    pub fn main_indices(&self) -> &[usize] {
        &self.main_indices
    }

    pub fn is_main(&self, index: usize) -> bool {
        self.main_indices.contains(&index)
    }

    /// Payload of the `pos`-th main element.
    pub fn main_payload(&self, pos: usize) -> &RationalMatrix {
        &self.payloads[self.main_indices[pos]]
    }

    /// `Σ Pᵀ P` over the non-main payloads.
    pub fn aux_gram(&self) -> &RationalMatrix {
        &self.aux_gram
    }

    pub fn element(&self, index: usize) -> RationalMatrix {
        self.payloads[index].scale(&BigRational::new(
            BigInt::one(),
            BigInt::from(self.denominator),
        ))
    }

    pub fn elements(&self) -> Vec<RationalMatrix> {
        (0..self.len()).map(|j| self.element(j)).collect()
    }

    /// Exact check of `Σ E_jᵀ E_j = I`, i.e. `Σ P_jᵀ P_j = D² I`.
    pub fn validate(&self) -> bool {
        let mut sum = RationalMatrix::zeros(self.dim, self.dim);
        for p in &self.payloads {
            sum = &sum + &p.gram();
        }
        let d2 = rat(self.denominator as i64).pow(2);
        sum == RationalMatrix::identity(self.dim).scale(&d2)
    }

    /// Applies every operation element to `state`.
    pub fn apply(&self, state: &[BigRational]) -> Result<Vec<BranchOutcome>> {
        if state.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "state of length {} for a {}-dimensional register",
                state.len(),
                self.dim
            )));
        }
        let inv = BigRational::new(BigInt::one(), BigInt::from(self.denominator));
        self.payloads
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let v: Vec<BigRational> = p.mul_vec(state)?.into_iter().map(|x| x * &inv).collect();
                let probability = norm_sq(&v);
                Ok(BranchOutcome {
                    element_index: j,
                    unnormalized_vector: v,
                    probability,
                })
            })
            .collect()
    }

    /// Textual dump: header lines, then one block per element with exact
    /// `p/q` entries.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "superoperator").unwrap();
        writeln!(out, "dim {}", self.dim).unwrap();
        writeln!(out, "denominator {}", self.denominator).unwrap();
        for j in 0..self.len() {
            let kind = if self.is_main(j) { "main" } else { "aux" };
            writeln!(out, "element {kind}").unwrap();
            let e = self.element(j);
            for i in 0..self.dim {
                let row: Vec<String> = e.row(i).iter().map(fraction_string).collect();
                writeln!(out, "{}", row.join(" ")).unwrap();
            }
        }
        out
    }

    /// Parses the format written by [`Superoperator::to_text`]. Main indices
    /// follow the order of `element main` blocks.
    pub fn parse_text(text: &str) -> Result<Self> {
        let doc = parse_blocks(text, "superoperator", "element")?;
        let denominator = doc
            .denominator
            .ok_or_else(|| syntax(0, "missing `denominator` line"))?;
        Self::from_elements(doc.matrices, doc.mains, denominator)
    }
}

/// Main payloads read from a `payloads` file, plus an optional `denominator`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PayloadSet {
    pub mains: Vec<RationalMatrix>,
    pub denominator: Option<u64>,
}

/// Parses
///
/// ```text
/// payloads
/// dim 2
/// main
/// 1 0
/// 0 2
/// ```
pub fn parse_payloads(text: &str) -> Result<PayloadSet> {
    let doc = parse_blocks(text, "payloads", "main")?;
    Ok(PayloadSet {
        mains: doc.matrices,
        denominator: doc.denominator,
    })
}

struct BlockDoc {
    denominator: Option<u64>,
    matrices: Vec<RationalMatrix>,
    mains: Vec<usize>,
}

fn syntax(line: usize, message: &str) -> Error {
    Error::Syntax {
        position: line,
        message: message.to_string(),
    }
}

fn parse_blocks(text: &str, header: &str, block: &str) -> Result<BlockDoc> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split("//").next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    match lines.next() {
        Some((_, l)) if l == header => {}
        Some((n, _)) => return Err(syntax(n, &format!("expected `{header}`"))),
        None => return Err(syntax(0, "empty input")),
    }

    let mut dim = None;
    let mut denominator = None;
    let mut matrices = Vec::new();
    let mut mains = Vec::new();
    let mut current: Option<Vec<BigRational>> = None;

    let flush = |current: &mut Option<Vec<BigRational>>,
                 matrices: &mut Vec<RationalMatrix>,
                 dim: usize,
                 line: usize|
     -> Result<()> {
        if let Some(entries) = current.take() {
            if entries.len() != dim * dim {
                return Err(syntax(line, "block has the wrong number of rows"));
            }
            matrices.push(RationalMatrix::from_entries(dim, dim, entries)?);
        }
        Ok(())
    };

    for (n, line) in lines {
        let mut words = line.split_whitespace();
        let first = words.next().unwrap_or("");
        match first {
            "dim" => {
                dim = words
                    .next()
                    .and_then(|w| w.parse::<usize>().ok())
                    .filter(|&d| d > 0);
                if dim.is_none() {
                    return Err(syntax(n, "bad `dim`"));
                }
            }
            "denominator" => {
                denominator = words
                    .next()
                    .and_then(|w| w.parse::<u64>().ok())
                    .filter(|&d| d > 0);
                if denominator.is_none() {
                    return Err(syntax(n, "bad `denominator`"));
                }
            }
            w if w == block => {
                let d = dim.ok_or_else(|| syntax(n, "`dim` must precede blocks"))?;
                flush(&mut current, &mut matrices, d, n)?;
                let is_main = block == "main" || words.next() == Some("main");
                if is_main {
                    mains.push(matrices.len());
                }
                current = Some(Vec::with_capacity(d * d));
            }
            _ => {
                let d = dim.ok_or_else(|| syntax(n, "`dim` must precede rows"))?;
                let entries = current
                    .as_mut()
                    .ok_or_else(|| syntax(n, "matrix row outside a block"))?;
                let row: Option<Vec<BigRational>> =
                    line.split_whitespace().map(parse_fraction).collect();
                let row = row.ok_or_else(|| syntax(n, "bad rational entry"))?;
                if row.len() != d || entries.len() + d > d * d {
                    return Err(syntax(n, "row has the wrong shape"));
                }
                entries.extend(row);
            }
        }
    }
    let d = dim.ok_or_else(|| syntax(0, "missing `dim`"))?;
    flush(&mut current, &mut matrices, d, text.lines().count())?;
    if matrices.is_empty() {
        return Err(syntax(0, "no matrices"));
    }
    Ok(BlockDoc {
        denominator,
        matrices,
        mains,
    })
}

fn gram_sum(mains: &[RationalMatrix]) -> Result<RationalMatrix> {
    let dim = mains
        .first()
        .ok_or_else(|| Error::InvalidSuperoperator("no main payloads".into()))?
        .rows();
    let mut g = RationalMatrix::zeros(dim, dim);
    for m in mains {
        if m.rows() != dim || m.cols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "main payloads must all be {dim}x{dim}"
            )));
        }
        g = &g + &m.gram();
    }
    Ok(g)
}

fn residual(gram: &RationalMatrix, d: u64) -> RationalMatrix {
    let d2 = rat(d as i64).pow(2);
    &RationalMatrix::identity(gram.rows()).scale(&d2) - gram
}

/// Smallest integer `D` such that `D² I − Σ MᵀM` is positive semidefinite.
///
/// The scan starts at the largest column norm of the stacked payloads, which
/// is a lower bound.
pub fn minimal_denominator(mains: &[RationalMatrix]) -> Result<u64> {
    let g = gram_sum(mains)?;
    let max_diag = (0..g.rows())
        .map(|i| g[(i, i)].clone())
        .max()
        .unwrap_or_else(BigRational::zero);
    let floor = max_diag.floor().to_integer();
    let mut d: u64 = floor
        .to_biguint()
        .map(|f| f.sqrt())
        .and_then(|r| u64::try_from(r).ok())
        .unwrap_or(0)
        .max(1);
    while rat(d as i64).pow(2) < max_diag {
        d += 1;
    }
    while !is_psd(&residual(&g, d))? {
        d += 1;
    }
    Ok(d)
}

/// Completes `mains` into a superoperator with denominator `D`.
///
/// With `G = Σ MᵢᵀMᵢ`, the residual `R = D²I − G` is factored as `L·diag(d)·Lᵀ`;
/// each pivot `dᵢ` is written as a sum of at most four rational squares `s²`,
/// and every `s·(column i of L)ᵀ` becomes one auxiliary row. The rows are
/// packed into `dim`×`dim` blocks, padded with zero rows.
pub fn complete(mains: &[RationalMatrix], denominator: Denominator) -> Result<Superoperator> {
    let g = gram_sum(mains)?;
    let dim = g.rows();
    let d = match denominator {
        Denominator::Fixed(0) => return Err(Error::DTooSmall(0)),
        Denominator::Fixed(d) => d,
        Denominator::Auto => minimal_denominator(mains)?,
    };
    let fact = match ldl_decompose(&residual(&g, d), LdlMode::Psd) {
        Ok(f) => f,
        Err(Error::Indefinite(_)) => return Err(Error::DTooSmall(d)),
        Err(e) => return Err(e),
    };

    let mut aux_rows: Vec<Vec<BigRational>> = Vec::new();
    for (i, pivot) in fact.d.iter().enumerate() {
        for s in rational_sqrt_rows(pivot)? {
            aux_rows.push((0..dim).map(|r| &s * &fact.l[(r, i)]).collect());
        }
    }

    let mut payloads: Vec<RationalMatrix> = mains.to_vec();
    for chunk in aux_rows.chunks(dim) {
        let mut block = RationalMatrix::zeros(dim, dim);
        for (r, row) in chunk.iter().enumerate() {
            for (c, x) in row.iter().enumerate() {
                block[(r, c)] = x.clone();
            }
        }
        payloads.push(block);
    }
    Superoperator::from_payloads(payloads, (0..mains.len()).collect(), d)
}

fn uniform_copies(dim: usize, d: u64, mains: usize) -> Superoperator {
    let copies = (d * d) as usize;
    Superoperator::from_payloads(
        vec![RationalMatrix::identity(dim); copies],
        (0..mains).collect(),
        d,
    )
    .expect("well-formed copies")
}

/// `D²` elements `(1/D)·I`; outcomes 0 and 1 are the two faces of the coin.
pub fn coin_flip(dim: usize, d: u64) -> Result<Superoperator> {
    if d < 2 || dim == 0 {
        return Err(Error::InvalidParameter(format!(
            "coin flip needs D >= 2 and a nonempty register (got D = {d}, dim = {dim})"
        )));
    }
    Ok(uniform_copies(dim, d, 2))
}

/// `D²` elements `(1/D)·I` with a single main element; stands in for the
/// identity so that every step carries the same factor `1/D`.
pub fn identity_sop(dim: usize, d: u64) -> Result<Superoperator> {
    if d < 1 || dim == 0 {
        return Err(Error::InvalidParameter(format!(
            "identity needs D >= 1 and a nonempty register (got D = {d}, dim = {dim})"
        )));
    }
    Ok(uniform_copies(dim, d, 1))
}

/// Payload acting as `[[1,0],[k,m]]` on coordinates `(i, j)` and as the
/// identity elsewhere: reading digit `k` maps `(1, x)` to `(1, m·x + k)`.
pub fn encoder_payload(
    k: u64,
    m: u64,
    (i, j): (usize, usize),
    dim: usize,
) -> Result<RationalMatrix> {
    if m < 2 || k >= m {
        return Err(Error::InvalidParameter(format!("digit {k} in base {m}")));
    }
    if i == j || i >= dim || j >= dim {
        return Err(Error::InvalidParameter(format!(
            "target coordinates ({i}, {j}) in a {dim}-dimensional register"
        )));
    }
    let mut p = RationalMatrix::identity(dim);
    p[(j, i)] = rat(k as i64);
    p[(j, j)] = rat(m as i64);
    Ok(p)
}

pub fn encoder(
    k: u64,
    m: u64,
    target: (usize, usize),
    dim: usize,
    denominator: Denominator,
) -> Result<Superoperator> {
    complete(&[encoder_payload(k, m, target, dim)?], denominator)
}

/// Moves every superoperator to the denominator `d_common` while keeping the
/// effective main elements `P/D` unchanged: main payloads are rescaled by
/// `d_common / D` and the auxiliary part is recomputed.
pub fn rebase_common_d(sops: &[Superoperator], d_common: u64) -> Result<Vec<Superoperator>> {
    sops.iter()
        .map(|sop| {
            let factor = BigRational::new(BigInt::from(d_common), BigInt::from(sop.denominator()));
            let mains: Vec<RationalMatrix> = sop
                .main_indices()
                .iter()
                .map(|&j| sop.payloads()[j].scale(&factor))
                .collect();
            complete(&mains, Denominator::Fixed(d_common))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ratio;

    fn v(xs: &[i64]) -> Vec<BigRational> {
        xs.iter().map(|&x| rat(x)).collect()
    }

    #[test]
    fn complete_binary_encoder_example() {
        let a0 = RationalMatrix::from_i64(&[&[1, 0], &[0, 2]]);
        let sop = complete(std::slice::from_ref(&a0), Denominator::Fixed(2)).unwrap();
        assert_eq!(sop.payloads()[0], a0);
        // R = [[3,0],[0,0]], three rows (1,0) packed into two blocks
        assert_eq!(sop.len(), 3);
        assert_eq!(
            sop.payloads()[1],
            RationalMatrix::from_i64(&[&[1, 0], &[1, 0]])
        );
        assert_eq!(
            sop.payloads()[2],
            RationalMatrix::from_i64(&[&[1, 0], &[0, 0]])
        );
        assert!(sop.validate());
        // (1/4)(G + R) = I
        let g = a0.gram();
        let r = RationalMatrix::from_i64(&[&[3, 0], &[0, 0]]);
        assert_eq!((&g + &r).scale(&ratio(1, 4)), RationalMatrix::identity(2));
    }

    #[test]
    fn unitary_needs_no_auxiliaries() {
        let sop = complete(&[RationalMatrix::identity(2)], Denominator::Fixed(1)).unwrap();
        assert_eq!(sop.len(), 1);
        assert!(sop.validate());
        assert_eq!(
            minimal_denominator(&[RationalMatrix::identity(3)]).unwrap(),
            1
        );
    }

    #[test]
    fn mismatch_pair_completes() {
        let m1 = RationalMatrix::from_i64(&[&[0, 3, -3, 0], &[0; 4], &[0; 4], &[0; 4]]);
        let m2 = RationalMatrix::from_i64(&[&[1, 0, 0, 0], &[0, 0, 0, 1], &[0; 4], &[0; 4]]);
        let sop = complete(&[m1, m2], Denominator::Auto).unwrap();
        // G has eigenvalue 18 on (0,1,-1,0): D^2 >= 18
        assert_eq!(sop.denominator(), 5);
        assert!(sop.validate());
        assert_eq!(sop.main_indices(), &[0, 1]);
    }

    #[test]
    fn explicit_d_too_small() {
        let a1 = RationalMatrix::from_i64(&[&[1, 0], &[1, 2]]);
        assert_eq!(
            complete(std::slice::from_ref(&a1), Denominator::Fixed(2)),
            Err(Error::DTooSmall(2))
        );
        assert_eq!(minimal_denominator(&[a1]).unwrap(), 3);
    }

    #[test]
    fn dimension_mismatch() {
        let a = RationalMatrix::identity(2);
        let b = RationalMatrix::identity(3);
        assert!(matches!(
            complete(&[a, b], Denominator::Auto),
            Err(Error::DimensionMismatch(_))
        ));
        let sop = identity_sop(2, 2).unwrap();
        assert!(matches!(
            sop.apply(&v(&[1, 0, 0])),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn validate_rejects_missing_mass() {
        let sop = coin_flip(2, 2).unwrap();
        assert!(sop.validate());
        let mut payloads = sop.payloads().to_vec();
        payloads[3] = RationalMatrix::zeros(2, 2);
        let broken = Superoperator::from_payloads(payloads, vec![0, 1], 2).unwrap();
        assert!(!broken.validate());
    }

    #[test]
    fn coin_flip_outcomes() {
        let sop = coin_flip(4, 2).unwrap();
        assert_eq!(sop.len(), 4);
        assert_eq!(sop.main_indices(), &[0, 1]);
        let out = sop.apply(&v(&[1, 0, 0, 0])).unwrap();
        for o in &out {
            assert_eq!(o.probability, ratio(1, 4));
        }
        assert_eq!(out[0].unnormalized_vector, out[1].unnormalized_vector);

        let sop = coin_flip(2, 3).unwrap();
        assert_eq!(sop.len(), 9);
        for j in 0..9 {
            assert_eq!(
                sop.element(j),
                RationalMatrix::identity(2).scale(&ratio(1, 3))
            );
        }
        assert!(coin_flip(2, 1).is_err());
    }

    #[test]
    fn identity_sop_outcomes() {
        let sop = identity_sop(2, 2).unwrap();
        assert_eq!(sop.main_indices(), &[0]);
        let out = sop.apply(&v(&[1, 0])).unwrap();
        assert_eq!(out[0].unnormalized_vector, vec![ratio(1, 2), rat(0)]);
        assert_eq!(out[0].probability, ratio(1, 4));
        let total: BigRational = out.iter().map(|o| o.probability.clone()).sum();
        assert_eq!(total, rat(1));
        assert!(identity_sop(3, 1).unwrap().validate());
    }

    #[test]
    fn encoder_blocks() {
        assert_eq!(
            encoder_payload(0, 2, (0, 1), 2).unwrap(),
            RationalMatrix::from_i64(&[&[1, 0], &[0, 2]])
        );
        assert_eq!(
            encoder_payload(1, 2, (0, 1), 2).unwrap(),
            RationalMatrix::from_i64(&[&[1, 0], &[1, 2]])
        );
        assert_eq!(
            encoder_payload(2, 3, (0, 1), 2).unwrap(),
            RationalMatrix::from_i64(&[&[1, 0], &[2, 3]])
        );
        // embedded on (q1, q3) of a 4-dim register, identity elsewhere
        let p = encoder_payload(1, 2, (0, 2), 4).unwrap();
        assert_eq!(
            p,
            RationalMatrix::from_i64(&[&[1, 0, 0, 0], &[0, 1, 0, 0], &[1, 0, 2, 0], &[0, 0, 0, 1]])
        );
        assert!(encoder_payload(2, 2, (0, 1), 2).is_err());
        assert!(encoder_payload(0, 2, (1, 1), 2).is_err());
    }

    #[test]
    fn encoder_main_branch_encodes_one() {
        let sop = encoder(1, 2, (0, 1), 2, Denominator::Auto).unwrap();
        assert!(sop.validate());
        let d = rat(sop.denominator() as i64);
        let out = sop.apply(&v(&[1, 0])).unwrap();
        let scaled: Vec<BigRational> = out[0].unnormalized_vector.iter().map(|x| x * &d).collect();
        assert_eq!(scaled, v(&[1, 1]));
    }

    #[test]
    fn zero_state_gives_zero_outcomes() {
        let sop = encoder(1, 3, (0, 1), 2, Denominator::Auto).unwrap();
        for o in sop.apply(&v(&[0, 0])).unwrap() {
            assert!(o.probability.is_zero());
            assert!(o.unnormalized_vector.iter().all(Zero::is_zero));
        }
    }

    #[test]
    fn rebase_identity_keeps_main_branch() {
        let sop = identity_sop(2, 2).unwrap();
        let rebased = rebase_common_d(std::slice::from_ref(&sop), 4).unwrap();
        let r = &rebased[0];
        assert_eq!(r.denominator(), 4);
        assert!(r.validate());
        assert_eq!(
            r.element(0),
            RationalMatrix::identity(2).scale(&ratio(1, 2))
        );
        let state = v(&[3, -1]);
        assert_eq!(
            sop.apply(&state).unwrap()[0].unnormalized_vector,
            r.apply(&state).unwrap()[0].unnormalized_vector
        );
        // rebasing to the same D is a no-op on the main branch
        let same = rebase_common_d(std::slice::from_ref(&sop), 2).unwrap();
        assert_eq!(same[0].element(0), sop.element(0));
    }

    #[test]
    fn rebase_encoders_to_shared_d() {
        let e0 = encoder(0, 2, (0, 1), 2, Denominator::Auto).unwrap();
        let e1 = encoder(1, 2, (0, 1), 2, Denominator::Auto).unwrap();
        let common = e0.denominator().max(e1.denominator()) + 1;
        let rebased = rebase_common_d(&[e0.clone(), e1.clone()], common).unwrap();
        let state = vec![rat(1), ratio(5, 3)];
        for (before, after) in [e0, e1].iter().zip(&rebased) {
            assert!(after.validate());
            assert_eq!(after.denominator(), common);
            assert_eq!(
                before.apply(&state).unwrap()[0].unnormalized_vector,
                after.apply(&state).unwrap()[0].unnormalized_vector
            );
        }
        // effective elements are contractions, so any D >= 1 works
        let down = rebase_common_d(&[identity_sop(2, 3).unwrap()], 1).unwrap();
        assert!(down[0].validate());
    }

    #[test]
    fn rational_payloads_complete() {
        // subtract / clear / halve
        let mut p = RationalMatrix::from_i64(&[&[1, 0, 0, 0], &[0, 1, -1, 0], &[0; 4], &[0; 4]]);
        p[(3, 3)] = ratio(1, 2);
        let sop = complete(&[p], Denominator::Auto).unwrap();
        assert!(sop.validate());
        assert_eq!(sop.denominator(), 2);
    }

    #[test]
    fn text_round_trip() {
        let sop = encoder(1, 2, (0, 1), 2, Denominator::Fixed(3)).unwrap();
        let text = sop.to_text();
        assert!(text.contains("1/3 0/1"));
        let back = Superoperator::parse_text(&text).unwrap();
        assert_eq!(back, sop);
        assert!(back.validate());

        let set = parse_payloads("payloads\ndim 2\ndenominator 2\nmain\n1 0\n0 2\n").unwrap();
        assert_eq!(set.denominator, Some(2));
        assert_eq!(
            set.mains,
            vec![RationalMatrix::from_i64(&[&[1, 0], &[0, 2]])]
        );
        assert!(parse_payloads("payloads\ndim 2\nmain\n1 0\n").is_err());
        assert!(parse_payloads("nonsense").is_err());
    }
}
