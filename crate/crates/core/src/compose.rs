//! Composition of a two-component CTBN generator from its conditional
//! generators.
//!
//! Composite states are ordered with the first component running fastest:
//! `w = x + nx (y - 1)`, all indices 1-based. With that ordering the joint
//! generator is the block-diagonal direct sum of the `X|y_k` family plus the
//! banded expansion of the `Y|x_i` family; the two only meet on the diagonal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{Generator, GeneratorDocument};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Conditional generators of one component, one per state of the other.
///
/// For the family `X|Y`, `base_dim = nx`, `cond_dim = ny` and member `k`
/// (1-based) is `Q^{X|y_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalFamily<T> {
    base_dim: usize,
    members: Vec<Generator<T>>,
}

impl<T: Scalar> ConditionalFamily<T> {
    pub fn new(members: Vec<Generator<T>>) -> Result<Self> {
        let base_dim = members
            .first()
            .map(Generator::dim)
            .ok_or_else(|| Error::InvalidFamily("a family needs at least one member".into()))?;
        if base_dim == 0 {
            return Err(Error::InvalidFamily("members must have at least one state".into()));
        }
        if let Some(bad) = members.iter().find(|m| m.dim() != base_dim) {
            return Err(Error::DimensionMismatch { expected: base_dim, found: bad.dim() });
        }
        Ok(Self { base_dim, members })
    }

    /// `cond_dim` copies of the same generator: a locally independent family.
    pub fn repeated(member: Generator<T>, cond_dim: usize) -> Result<Self> {
        Self::new(vec![member; cond_dim])
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn cond_dim(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[Generator<T>] {
        &self.members
    }

    /// Member for the 1-based conditioning state `k`.
    pub fn member(&self, k: usize) -> &Generator<T> {
        &self.members[k - 1]
    }

    pub fn to_documents(&self) -> Vec<Vec<Vec<f64>>> {
        self.members.iter().map(|m| m.to_document().rates).collect()
    }

    pub fn from_documents(docs: &[Vec<Vec<f64>>]) -> Result<Self> {
        let members = docs
            .iter()
            .map(|rates| Generator::from_document(&GeneratorDocument { n: rates.len(), rates: rates.clone() }))
            .collect::<Result<Vec<_>>>()?;
        Self::new(members)
    }
}

/// Block-diagonal stacking of the members: member `k` occupies rows and
/// columns `(k-1) base_dim + 1 ..= k base_dim`.
pub fn direct_sum<T: Scalar>(family: &ConditionalFamily<T>) -> Matrix<T> {
    let n = family.base_dim;
    let total = n * family.cond_dim();
    let mut out = Matrix::zeros(total, total);
    for (k, member) in family.members.iter().enumerate() {
        out.set_block(k * n, k * n, member.rates());
    }
    out
}

/// Interleaving embedding `Σ_k B_k ⊗ E_kk` of a family `B_1..B_{n_A}` of
/// `n_B x n_B` generators: entry `(i, j)` of `B_k` lands at row
/// `(i-1) n_A + k`, column `(j-1) n_A + k`.
pub fn expansion<T: Scalar>(family: &ConditionalFamily<T>) -> Matrix<T> {
    let nb = family.base_dim;
    let na = family.cond_dim();
    let mut out = Matrix::zeros(nb * na, nb * na);
    for (k, member) in family.members.iter().enumerate() {
        let b = member.rates();
        for i in 0..nb {
            for j in 0..nb {
                out[(i * na + k, j * na + k)] = b[(i, j)];
            }
        }
    }
    out
}

/// Joint generator `direct_sum(X|Y) + expansion(Y|X)` of the composite chain.
pub fn compose_generators<T: Scalar>(
    x_given_y: &ConditionalFamily<T>,
    y_given_x: &ConditionalFamily<T>,
) -> Result<Generator<T>> {
    let (nx, ny) = (x_given_y.base_dim(), x_given_y.cond_dim());
    if y_given_x.base_dim() != ny {
        return Err(Error::DimensionMismatch { expected: ny, found: y_given_x.base_dim() });
    }
    if y_given_x.cond_dim() != nx {
        return Err(Error::DimensionMismatch { expected: nx, found: y_given_x.cond_dim() });
    }
    let joint = direct_sum(x_given_y).add(&expansion(y_given_x));
    Generator::new(joint).map_err(|e| Error::Internal(format!("composed generator invalid: {e}")))
}

/// Composite index `w = x + nx (y - 1)`.
pub fn composite_index(x: usize, y: usize, nx: usize) -> Result<usize> {
    if x == 0 || x > nx {
        return Err(Error::OutOfRange { what: "x", value: x, max: nx });
    }
    if y == 0 {
        return Err(Error::OutOfRange { what: "y", value: y, max: usize::MAX });
    }
    Ok(x + nx * (y - 1))
}

/// Inverse of [`composite_index`]: `x = 1 + (w - 1) mod nx`, `y = ⌈w / nx⌉`.
pub fn split_index(w: usize, nx: usize) -> Result<(usize, usize)> {
    if nx == 0 {
        return Err(Error::OutOfRange { what: "nx", value: nx, max: usize::MAX });
    }
    if w == 0 {
        return Err(Error::OutOfRange { what: "w", value: w, max: usize::MAX });
    }
    Ok((1 + (w - 1) % nx, w.div_ceil(nx)))
}

/// A composite state with both of its coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CompositeIndex {
    pub w: usize,
    pub x: usize,
    pub y: usize,
}

/// The `nx x ny` grid of composite states, with range-checked conversions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateGrid {
    pub nx: usize,
    pub ny: usize,
}

impl StateGrid {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidConfig(format!("empty state grid {nx}x{ny}")));
        }
        Ok(Self { nx, ny })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn from_pair(&self, x: usize, y: usize) -> Result<CompositeIndex> {
        if y == 0 || y > self.ny {
            return Err(Error::OutOfRange { what: "y", value: y, max: self.ny });
        }
        let w = composite_index(x, y, self.nx)?;
        Ok(CompositeIndex { w, x, y })
    }

    pub fn from_composite(&self, w: usize) -> Result<CompositeIndex> {
        if w == 0 || w > self.len() {
            return Err(Error::OutOfRange { what: "w", value: w, max: self.len() });
        }
        let (x, y) = split_index(w, self.nx)?;
        Ok(CompositeIndex { w, x, y })
    }

    /// All composite states in ascending `w`.
    pub fn iter(&self) -> impl Iterator<Item = CompositeIndex> + '_ {
        (1..=self.len()).map(move |w| {
            let (x, y) = (1 + (w - 1) % self.nx, w.div_ceil(self.nx));
            CompositeIndex { w, x, y }
        })
    }
}

/// True when every pair of members differs by at most `tol` entrywise.
pub fn is_locally_independent<T: Scalar>(family: &ConditionalFamily<T>, tol: T) -> bool {
    let first = family.members[0].rates();
    family.members.iter().enumerate().all(|(a, ma)| {
        family.members[a + 1..].iter().all(|mb| {
            let (ra, rb) = (ma.rates(), mb.rates());
            (0..first.rows()).all(|i| (0..first.cols()).all(|j| (ra[(i, j)] - rb[(i, j)]).abs() <= tol))
        })
    })
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::InvalidPermutation(format!("length {} for {n} states", perm.len())));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p == 0 || p > n || seen[p - 1] {
            return Err(Error::InvalidPermutation(format!("{perm:?} is not a permutation of 1..={n}")));
        }
        seen[p - 1] = true;
    }
    Ok(())
}

/// Checks `B[i][j] = A[R(i)][R(j)]` within `1e-12` for the 1-based
/// permutation `perm` (`perm[i-1] = R(i)`), i.e. `R A R = B` for the
/// permutation matrix of `R`.
pub fn verify_equivalence<T: Scalar>(a: &Generator<T>, b: &Generator<T>, perm: &[usize]) -> Result<bool> {
    let n = a.dim();
    if b.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.dim() });
    }
    check_permutation(perm, n)?;
    let tol = T::tol(1e-12);
    let (ra, rb) = (a.rates(), b.rates());
    Ok((0..n).all(|i| (0..n).all(|j| (rb[(i, j)] - ra[(perm[i] - 1, perm[j] - 1)]).abs() <= tol)))
}

/// Inverse of a 1-based permutation.
pub fn invert_permutation(perm: &[usize]) -> Result<Vec<usize>> {
    check_permutation(perm, perm.len())?;
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p - 1] = i + 1;
    }
    Ok(inv)
}

/// Permutation relating the two component orderings: position
/// `i = y + ny (x - 1)` of the swapped composition maps to
/// `w = x + nx (y - 1)` of the original one.
pub fn swap_permutation(nx: usize, ny: usize) -> Vec<usize> {
    let mut perm = Vec::with_capacity(nx * ny);
    for x in 1..=nx {
        for y in 1..=ny {
            perm.push(x + nx * (y - 1));
        }
    }
    perm
}

/// A two-component CTBN: both conditional families and the composed joint generator.
#[derive(Debug, Clone, PartialEq)]
pub struct CtbnModel<T> {
    x_given_y: ConditionalFamily<T>,
    y_given_x: ConditionalFamily<T>,
    qw: Generator<T>,
}

impl<T: Scalar> CtbnModel<T> {
    pub fn new(x_given_y: ConditionalFamily<T>, y_given_x: ConditionalFamily<T>) -> Result<Self> {
        let qw = compose_generators(&x_given_y, &y_given_x)?;
        Ok(Self { x_given_y, y_given_x, qw })
    }

    /// Two binary components where `X` switches with rates modulated by `Y`
    /// and `Y` switches with rates modulated by `X`.
    pub fn modulated(params: &ModulatedParams<T>) -> Result<Self> {
        let x = ConditionalFamily::new(vec![
            Generator::two_state(params.lambda[0], params.mu[0])?,
            Generator::two_state(params.lambda[1], params.mu[1])?,
        ])?;
        let y = ConditionalFamily::new(vec![
            Generator::two_state(params.beta[0], params.gamma[0])?,
            Generator::two_state(params.beta[1], params.gamma[1])?,
        ])?;
        Self::new(x, y)
    }

    pub fn nx(&self) -> usize {
        self.x_given_y.base_dim()
    }

    pub fn ny(&self) -> usize {
        self.y_given_x.base_dim()
    }

    pub fn grid(&self) -> StateGrid {
        StateGrid { nx: self.nx(), ny: self.ny() }
    }

    pub fn x_given_y(&self) -> &ConditionalFamily<T> {
        &self.x_given_y
    }

    pub fn y_given_x(&self) -> &ConditionalFamily<T> {
        &self.y_given_x
    }

    pub fn joint(&self) -> &Generator<T> {
        &self.qw
    }

    /// The same network with the roles of the components exchanged.
    pub fn swapped(&self) -> Self {
        Self::new(self.y_given_x.clone(), self.x_given_y.clone())
            .expect("swapping components of a valid model stays valid")
    }

    pub fn cast<U: Scalar>(&self) -> CtbnModel<U> {
        let cast_family = |f: &ConditionalFamily<T>| ConditionalFamily {
            base_dim: f.base_dim,
            members: f.members.iter().map(Generator::cast).collect(),
        };
        CtbnModel {
            x_given_y: cast_family(&self.x_given_y),
            y_given_x: cast_family(&self.y_given_x),
            qw: self.qw.cast(),
        }
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            nx: self.nx(),
            ny: self.ny(),
            x_given_y: self.x_given_y.to_documents(),
            y_given_x: self.y_given_x.to_documents(),
        }
    }

    /// Rebuilds the model; the joint generator is always recomputed.
    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let x = ConditionalFamily::from_documents(&doc.x_given_y)?;
        let y = ConditionalFamily::from_documents(&doc.y_given_x)?;
        if x.base_dim() != doc.nx || x.cond_dim() != doc.ny {
            return Err(Error::InvalidFamily(format!(
                "x_given_y is {}x{} members of size {}, expected {} members of size {}",
                x.cond_dim(),
                x.base_dim(),
                x.base_dim(),
                doc.ny,
                doc.nx
            )));
        }
        if y.base_dim() != doc.ny || y.cond_dim() != doc.nx {
            return Err(Error::InvalidFamily(format!(
                "y_given_x has {} members of size {}, expected {} members of size {}",
                y.cond_dim(),
                y.base_dim(),
                doc.nx,
                doc.ny
            )));
        }
        Self::new(x, y)
    }
}

/// JSON form of a model. A `qw` field, if present, is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub nx: usize,
    pub ny: usize,
    pub x_given_y: Vec<Vec<Vec<f64>>>,
    pub y_given_x: Vec<Vec<Vec<f64>>>,
}

/// Rates of the binary Markov-modulated example. Index 0 is the rate under
/// the other component's state 1, index 1 under state 2. `lambda`/`mu` are
/// the 1→2 / 2→1 rates of `X`, `beta`/`gamma` those of `Y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulatedParams<T> {
    pub lambda: [T; 2],
    pub mu: [T; 2],
    pub beta: [T; 2],
    pub gamma: [T; 2],
}
