//! Generators (intensity matrices) of finite continuous-time Markov chains,
//! together with their transient laws, expected occupation times and
//! stationary distributions.
//!
//! States are numbered `1..=n` wherever a state appears in the public API.
//! The underlying [`Matrix`] is indexed from zero like any matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expm, Lu, Matrix};
use crate::scalar::{sum, Scalar};

/// A validated generator: off-diagonal rates are non-negative and every row
/// sums to zero within `1e-9 * max(1, max |entry|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator<T> {
    rates: Matrix<T>,
}

/// Checks the generator invariants and wraps the matrix.
pub fn validate_generator<T: Scalar>(rates: Matrix<T>) -> Result<Generator<T>> {
    if !rates.is_square() {
        return Err(Error::NonSquare { rows: rates.rows(), cols: rates.cols() });
    }
    let n = rates.rows();
    for i in 0..n {
        for j in 0..n {
            let v = rates[(i, j)];
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i + 1, col: j + 1 });
            }
            if i != j && v < T::zero() {
                return Err(Error::NegativeOffDiagonal { row: i + 1, col: j + 1 });
            }
        }
    }
    let tol = T::tol(1e-9) * T::one().max(rates.max_abs());
    for i in 0..n {
        let row_sum = sum(rates.row(i).iter().copied());
        if row_sum.abs() > tol || rates[(i, i)] > tol {
            return Err(Error::RowSumNonZero { row: i + 1, sum: row_sum.as_f64() });
        }
    }
    Ok(Generator { rates })
}

impl<T: Scalar> Generator<T> {
    pub fn new(rates: Matrix<T>) -> Result<Self> {
        validate_generator(rates)
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let m = Matrix::from_rows(rows)
            .ok_or_else(|| Error::NonSquare { rows: rows.len(), cols: rows.iter().map(Vec::len).max().unwrap_or(0) })?;
        validate_generator(m)
    }

    /// Builds a generator from its off-diagonal rates; the diagonal of
    /// `off_diagonal` is ignored and replaced by the negative row sums.
    pub fn from_off_diagonal(mut off_diagonal: Matrix<T>) -> Result<Self> {
        if !off_diagonal.is_square() {
            return Err(Error::NonSquare { rows: off_diagonal.rows(), cols: off_diagonal.cols() });
        }
        for i in 0..off_diagonal.rows() {
            off_diagonal[(i, i)] = T::zero();
            let exit = sum(off_diagonal.row(i).iter().copied());
            off_diagonal[(i, i)] = -exit;
        }
        validate_generator(off_diagonal)
    }

    /// The all-zero generator: every state absorbing.
    pub fn zeros(n: usize) -> Self {
        Self { rates: Matrix::zeros(n, n) }
    }

    /// Two-state generator with rates `up` (1 to 2) and `down` (2 to 1).
    pub fn two_state(up: T, down: T) -> Result<Self> {
        Self::from_rows(&[vec![-up, up], vec![down, -down]])
    }

    pub fn dim(&self) -> usize {
        self.rates.rows()
    }

    pub fn rates(&self) -> &Matrix<T> {
        &self.rates
    }

    pub fn into_rates(self) -> Matrix<T> {
        self.rates
    }

    /// Rate `q(to | from)` with 1-based states.
    pub fn rate(&self, from: usize, to: usize) -> T {
        self.rates[(from - 1, to - 1)]
    }

    /// Total rate of leaving 1-based `state`, `-q(state | state)`.
    pub fn exit_rate(&self, state: usize) -> T {
        -self.rates[(state - 1, state - 1)]
    }

    pub fn cast<U: Scalar>(&self) -> Generator<U> {
        Generator { rates: self.rates.map(|v| U::lit(v.as_f64())) }
    }

    pub fn to_document(&self) -> GeneratorDocument {
        GeneratorDocument { n: self.dim(), rates: self.rates.map(Scalar::as_f64).to_rows() }
    }

    pub fn from_document(doc: &GeneratorDocument) -> Result<Self> {
        if doc.rates.len() != doc.n {
            return Err(Error::DimensionMismatch { expected: doc.n, found: doc.rates.len() });
        }
        let rows: Vec<Vec<T>> = doc.rates.iter().map(|r| r.iter().map(|&v| T::lit(v)).collect()).collect();
        Self::from_rows(&rows)
    }

    /// One matrix row per line, comma separated.
    pub fn to_csv(&self) -> String {
        matrix_to_csv(&self.rates)
    }
}

/// JSON form of a generator: `{"n": int, "rates": [[...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorDocument {
    pub n: usize,
    pub rates: Vec<Vec<f64>>,
}

pub fn matrix_to_csv<T: Scalar>(m: &Matrix<T>) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|v| format!("{}", v.as_f64())).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// A distribution over states `1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector<T> {
    p: Vec<T>,
}

impl<T: Scalar> ProbabilityVector<T> {
    /// Entries must be non-negative and sum to one within `1e-12`.
    pub fn new(p: Vec<T>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidProbability("empty vector".into()));
        }
        if let Some(i) = p.iter().position(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::InvalidProbability(format!("entry {} is {}", i + 1, p[i])));
        }
        let total = sum(p.iter().copied());
        if (total - T::one()).abs() > T::tol(1e-12) {
            return Err(Error::InvalidProbability(format!("entries sum to {total}")));
        }
        Ok(Self { p })
    }

    /// All mass on the 1-based `state`.
    pub fn point(n: usize, state: usize) -> Result<Self> {
        if state == 0 || state > n {
            return Err(Error::OutOfRange { what: "state", value: state, max: n });
        }
        let mut p = vec![T::zero(); n];
        p[state - 1] = T::one();
        Ok(Self { p })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidProbability("empty vector".into()));
        }
        Ok(Self { p: vec![T::one() / T::lit(n as f64); n] })
    }

    /// Clips round-off negatives and renormalises; used on numerically computed laws.
    fn from_numeric(mut p: Vec<T>) -> Result<Self> {
        for v in p.iter_mut() {
            if *v < T::zero() {
                if *v < -T::tol(1e-10) {
                    return Err(Error::Internal(format!("probability {} far below zero", *v)));
                }
                *v = T::zero();
            }
        }
        let total = sum(p.iter().copied());
        for v in p.iter_mut() {
            *v = *v / total;
        }
        Self::new(p)
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.p
    }

    /// Probability of the 1-based `state`.
    pub fn prob(&self, state: usize) -> T {
        self.p[state - 1]
    }

    pub fn into_vec(self) -> Vec<T> {
        self.p
    }
}

/// Expected (or realised) time spent in each state over `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationVector<T> {
    values: Vec<T>,
    horizon: T,
}

impl<T: Scalar> OccupationVector<T> {
    /// Entries must be non-negative and sum to `horizon` within `1e-9 * horizon`.
    pub fn new(values: Vec<T>, horizon: T) -> Result<Self> {
        if horizon < T::zero() || !horizon.is_finite() {
            return Err(Error::NegativeTime(horizon.as_f64()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::InvalidOccupation(format!("entry {} is {}", i + 1, values[i])));
        }
        let total = sum(values.iter().copied());
        if (total - horizon).abs() > T::tol(1e-9) * horizon.max(T::min_positive_value()) {
            return Err(Error::InvalidOccupation(format!("entries sum to {total}, horizon {horizon}")));
        }
        Ok(Self { values, horizon })
    }

    /// Occupation that need not sum to a horizon, e.g. the slice of a composite
    /// occupation belonging to one conditioning state. `horizon` is set to the total.
    pub fn partial(values: Vec<T>) -> Result<Self> {
        let total = sum(values.iter().copied());
        Self::new(values, total)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Occupation of the 1-based `state`.
    pub fn time_in(&self, state: usize) -> T {
        self.values[state - 1]
    }

    /// Occupation divided by the horizon; all zeros when the horizon is zero.
    pub fn fractions(&self) -> Vec<T> {
        if self.horizon == T::zero() {
            return vec![T::zero(); self.values.len()];
        }
        self.values.iter().map(|&v| v / self.horizon).collect()
    }
}

fn check_dims<T: Scalar>(q: &Generator<T>, p0: &ProbabilityVector<T>) -> Result<()> {
    if q.dim() != p0.len() {
        return Err(Error::DimensionMismatch { expected: q.dim(), found: p0.len() });
    }
    Ok(())
}

/// The law at time `t` of the chain started from `p0`: `p0 exp(Q t)`.
pub fn transient_distribution<T: Scalar>(
    q: &Generator<T>,
    p0: &ProbabilityVector<T>,
    t: T,
) -> Result<ProbabilityVector<T>> {
    check_dims(q, p0)?;
    if !(t >= T::zero()) || !t.is_finite() {
        return Err(Error::NegativeTime(t.as_f64()));
    }
    if t == T::zero() {
        return Ok(p0.clone());
    }
    let propagator = expm(&q.rates.scale(t));
    ProbabilityVector::from_numeric(propagator.left_mul(p0.as_slice()))
}

/// Expected occupation times `a(i) = ∫₀^T (p0 exp(Qs))_i ds`.
///
/// Evaluated exactly from the exponential of the augmented generator
/// `[[Q, I], [0, 0]] * T`, whose upper-right block is `∫₀^T exp(Qs) ds`.
pub fn occupation_times<T: Scalar>(
    q: &Generator<T>,
    p0: &ProbabilityVector<T>,
    horizon: T,
) -> Result<OccupationVector<T>> {
    check_dims(q, p0)?;
    if !(horizon >= T::zero()) || !horizon.is_finite() {
        return Err(Error::NegativeTime(horizon.as_f64()));
    }
    let n = q.dim();
    if horizon == T::zero() {
        return OccupationVector::new(vec![T::zero(); n], T::zero());
    }
    let mut augmented = Matrix::zeros(2 * n, 2 * n);
    augmented.set_block(0, 0, &q.rates.scale(horizon));
    augmented.set_block(0, n, &Matrix::identity(n).scale(horizon));
    let integral = expm(&augmented).block(0, n, n, n);
    let mut values = integral.left_mul(p0.as_slice());
    let floor = -T::tol(1e-10) * horizon;
    for v in values.iter_mut() {
        if *v < T::zero() {
            if *v < floor {
                return Err(Error::Internal(format!("occupation {} far below zero", *v)));
            }
            *v = T::zero();
        }
    }
    OccupationVector::new(values, horizon)
}

/// The unique `π` with `πQ = 0` and `Σπ = 1`.
///
/// Fails with [`Error::NotUniquelyErgodic`] when the chain has more than one
/// closed communicating class, since the stationary law is then a modelling
/// choice the caller has to make.
pub fn stationary_distribution<T: Scalar>(q: &Generator<T>) -> Result<ProbabilityVector<T>> {
    let n = q.dim();
    if n == 1 {
        return ProbabilityVector::point(1, 1);
    }
    let scale = T::one().max(q.rates.norm_inf());
    // Columns of Q are linearly dependent, so one balance equation can be
    // swapped for the normalisation constraint.
    let mut system = q.rates.transpose();
    for j in 0..n {
        system[(n - 1, j)] = T::one();
    }
    let lu = Lu::new(&system, T::tol(1e-10) * scale).map_err(|_| Error::NotUniquelyErgodic)?;
    let mut rhs = vec![T::zero(); n];
    rhs[n - 1] = T::one();
    let mut pi = lu.solve_vec(&rhs);
    // One refinement step.
    let residual: Vec<T> = {
        let applied = system_apply(&system, &pi);
        applied.iter().zip(&rhs).map(|(&a, &b)| b - a).collect()
    };
    let correction = lu.solve_vec(&residual);
    for (p, c) in pi.iter_mut().zip(correction) {
        *p = *p + c;
    }
    let pi = ProbabilityVector::from_numeric(pi).map_err(|_| Error::NotUniquelyErgodic)?;
    let balance = q.rates.left_mul(pi.as_slice());
    let worst = balance.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    if worst > T::tol(1e-10) * scale {
        return Err(Error::NotUniquelyErgodic);
    }
    Ok(pi)
}

fn system_apply<T: Scalar>(a: &Matrix<T>, x: &[T]) -> Vec<T> {
    (0..a.rows()).map(|i| sum(a.row(i).iter().zip(x).map(|(&m, &v)| m * v))).collect()
}

/// Initial law of a chain: an explicit vector, or the stationary law of the generator.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw<T> {
    Stationary,
    Given(ProbabilityVector<T>),
}

impl<T: Scalar> InitialLaw<T> {
    pub fn resolve(&self, q: &Generator<T>) -> Result<ProbabilityVector<T>> {
        match self {
            InitialLaw::Stationary => stationary_distribution(q),
            InitialLaw::Given(p) => {
                check_dims(q, p)?;
                Ok(p.clone())
            }
        }
    }
}
