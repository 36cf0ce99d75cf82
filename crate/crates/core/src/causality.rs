//! Kullback–Leibler divergence between CTMC path laws and the directional
//! causality measure built on it.
//!
//! `C(X←Y)` weighs, for each state `y_k` of the source, the divergence of the
//! `X|y_k` dynamics from the occupation-weighted mixture of all `X|y` members.
//! It is zero exactly when `X` does not depend on `Y`.

use serde::{Deserialize, Serialize};

use crate::compose::{ConditionalFamily, CtbnModel};
use crate::error::{Error, Result};
use crate::estimate::{conditional_stats, mle_generator, occupation_fraction, SufficientStats};
use crate::generators::{occupation_times, Generator, OccupationVector, ProbabilityVector};
use crate::linalg::Matrix;
use crate::scalar::{sum, Scalar};
use crate::simulate::{project, Trajectory};

/// Which component is the effect: `XFromY` is `X←Y`, the influence of `Y` on `X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    XFromY,
    YFromX,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Direction::XFromY => "X<-Y",
            Direction::YFromX => "Y<-X",
        }
    }
}

/// `q (r log r - r + 1)` with `r = p / q`: the contribution of one jump
/// `i -> j` with rate `p` under the numerator law and `q` under the reference.
/// Non-negative, zero iff `p = q`.
fn rate_divergence<T: Scalar>(p: T, q: T) -> T {
    if p == T::zero() {
        return q;
    }
    let d = p / q - T::one();
    let value = q * ((T::one() + d) * d.ln_1p() - d);
    value.max(T::zero())
}

/// `c_i = q0(i|i) - q(i|i) + Σ_{j≠i} q0(j|i) log(q0(j|i)/q(j|i))` for one row.
fn row_divergence<T: Scalar>(q0: &Generator<T>, q: &Generator<T>, i: usize) -> Result<T> {
    let n = q0.dim();
    let mut terms = Vec::with_capacity(n);
    for j in 1..=n {
        if j == i {
            continue;
        }
        let (p, r) = (q0.rate(i, j), q.rate(i, j));
        if p > T::zero() && r == T::zero() {
            return Err(Error::NotAbsolutelyContinuous { row: i, col: j });
        }
        terms.push(rate_divergence(p, r));
    }
    Ok(sum(terms))
}

/// Divergence of the law of `q0` from the law of `q` over a horizon with
/// occupation `occ`: `Σ_i occ(i) c_i`. Rows with zero occupation are skipped.
pub fn kl_divergence<T: Scalar>(q0: &Generator<T>, q: &Generator<T>, occ: &OccupationVector<T>) -> Result<T> {
    if q0.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: q0.dim(), found: q.dim() });
    }
    if occ.len() != q0.dim() {
        return Err(Error::DimensionMismatch { expected: q0.dim(), found: occ.len() });
    }
    let mut terms = Vec::with_capacity(q0.dim());
    for i in 1..=q0.dim() {
        let a = occ.time_in(i);
        if a > T::zero() {
            terms.push(a * row_divergence(q0, q, i)?);
        }
    }
    clamp_nonnegative(sum(terms))
}

fn clamp_nonnegative<T: Scalar>(value: T) -> Result<T> {
    if value >= T::zero() {
        Ok(value)
    } else if value > T::lit(-1e-9) {
        Ok(T::zero())
    } else {
        Err(Error::Internal(format!("divergence {value} is negative")))
    }
}

/// Mixture `Σ_k w_k Q^{X|y_k}` of a family's members.
pub fn marginal_generator<T: Scalar>(family: &ConditionalFamily<T>, fractions: &[T]) -> Result<Generator<T>> {
    if fractions.len() != family.cond_dim() {
        return Err(Error::DimensionMismatch { expected: family.cond_dim(), found: fractions.len() });
    }
    let total = sum(fractions.iter().copied());
    if fractions.iter().any(|&f| !(f >= T::zero())) || (total - T::one()).abs() > T::tol(1e-9) {
        return Err(Error::InvalidProbability("mixture weights must be non-negative and sum to one".into()));
    }
    let n = family.base_dim();
    // Mixing deviations from the heaviest member keeps identical members exact.
    let base = (0..fractions.len()).fold(0, |best, k| if fractions[k] > fractions[best] { k } else { best });
    let base = family.members()[base].rates();
    let off = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            T::zero()
        } else {
            let shift =
                sum(family.members().iter().zip(fractions).map(|(m, &f)| f * (m.rates()[(i, j)] - base[(i, j)])));
            (base[(i, j)] + shift).max(T::zero())
        }
    });
    Generator::from_off_diagonal(off)
}

/// The family of the effect component, the occupation fractions of the
/// source component, and the composite occupation `A(effect = i, source = k)`.
struct Directional<'a, T> {
    family: &'a ConditionalFamily<T>,
    mixture: Generator<T>,
    fractions: Vec<T>,
    composite: Box<dyn Fn(usize, usize) -> T + 'a>,
}

impl<T: Scalar> Directional<'_, T> {
    fn causality(&self) -> Result<T> {
        let n = self.family.base_dim();
        let mut terms = Vec::with_capacity(self.family.cond_dim());
        for (k, &f) in self.fractions.iter().enumerate() {
            if f <= T::zero() {
                continue;
            }
            let occ = OccupationVector::partial((1..=n).map(|i| (self.composite)(i, k + 1)).collect())?;
            terms.push(f * kl_divergence(self.family.member(k + 1), &self.mixture, &occ)?);
        }
        clamp_nonnegative(sum(terms))
    }

    /// `max_{k,i} c_{ki}` over source states with positive fraction.
    fn bound(&self) -> Result<T> {
        let mut best = T::zero();
        for (k, &f) in self.fractions.iter().enumerate() {
            if f <= T::zero() {
                continue;
            }
            for i in 1..=self.family.base_dim() {
                best = best.max(row_divergence(self.family.member(k + 1), &self.mixture, i)?);
            }
        }
        Ok(best)
    }
}

fn model_directional<'a, T: Scalar>(
    model: &'a CtbnModel<T>,
    occ: &'a OccupationVector<T>,
    direction: Direction,
) -> Result<Directional<'a, T>> {
    let (nx, ny) = (model.nx(), model.ny());
    let horizon = occ.horizon();
    let at = move |x: usize, y: usize| occ.time_in(x + nx * (y - 1));
    let (family, fractions, composite): (_, Vec<T>, Box<dyn Fn(usize, usize) -> T>) = match direction {
        Direction::XFromY => (
            model.x_given_y(),
            (1..=ny).map(|k| sum((1..=nx).map(|i| at(i, k))) / horizon).collect(),
            Box::new(move |i, k| at(i, k)),
        ),
        Direction::YFromX => (
            model.y_given_x(),
            (1..=nx).map(|i| sum((1..=ny).map(|k| at(i, k))) / horizon).collect(),
            Box::new(move |k, i| at(i, k)),
        ),
    };
    let mixture = marginal_generator(family, &fractions)?;
    Ok(Directional { family, mixture, fractions, composite })
}

fn model_occupation<T: Scalar>(
    model: &CtbnModel<T>,
    p0: &ProbabilityVector<T>,
    horizon: T,
) -> Result<OccupationVector<T>> {
    if !(horizon > T::zero()) {
        return Err(Error::NegativeTime(horizon.as_f64()));
    }
    occupation_times(model.joint(), p0, horizon)
}

/// Model-based `C^T` over `[0, horizon]` from the composite initial law `p0`,
/// using expected occupation times.
pub fn causality<T: Scalar>(
    model: &CtbnModel<T>,
    p0: &ProbabilityVector<T>,
    horizon: T,
    direction: Direction,
) -> Result<T> {
    let occ = model_occupation(model, p0, horizon)?;
    let value = model_directional(model, &occ, direction)?.causality();
    value
}

/// `causality / horizon`.
pub fn average_causality<T: Scalar>(
    model: &CtbnModel<T>,
    p0: &ProbabilityVector<T>,
    horizon: T,
    direction: Direction,
) -> Result<T> {
    Ok(causality(model, p0, horizon, direction)? / horizon)
}

/// Upper bound on the average causality, with the mixture weighted by the
/// occupation fractions at `horizon` from `p0`.
pub fn causality_bound<T: Scalar>(
    model: &CtbnModel<T>,
    p0: &ProbabilityVector<T>,
    horizon: T,
    direction: Direction,
) -> Result<T> {
    let occ = model_occupation(model, p0, horizon)?;
    let value = model_directional(model, &occ, direction)?.bound();
    value
}

/// Plug-in estimates read off one composite path.
struct EmpiricalParts {
    x_given_y: ConditionalFamily<f64>,
    y_given_x: ConditionalFamily<f64>,
    x_marginal: Generator<f64>,
    y_marginal: Generator<f64>,
    x_fractions: Vec<f64>,
    y_fractions: Vec<f64>,
    composite: Vec<f64>,
    nx: usize,
}

impl EmpiricalParts {
    fn new(traj_w: &Trajectory, nx: usize, ny: usize) -> Result<Self> {
        if traj_w.horizon() <= 0.0 {
            return Err(Error::ZeroHorizon);
        }
        if nx == 0 || ny == 0 || traj_w.n() != nx * ny {
            return Err(Error::DimensionMismatch { expected: nx * ny, found: traj_w.n() });
        }
        let stats = conditional_stats(traj_w, nx, ny)?;
        let (x, y) = project(traj_w, nx)?;
        let family = |members: &[SufficientStats]| ConditionalFamily::new(members.iter().map(mle_generator).collect());
        let marginal = |path: &Trajectory| -> Result<Generator<f64>> {
            Ok(mle_generator(&crate::estimate::collect_stats(std::slice::from_ref(path))?))
        };
        let composite = (1..=ny)
            .flat_map(|k| (1..=nx).map(move |i| (i, k)))
            .map(|(i, k)| stats.composite_occupation(i, k))
            .collect();
        Ok(Self {
            x_given_y: family(&stats.x_given_y)?,
            y_given_x: family(&stats.y_given_x)?,
            x_marginal: marginal(&x)?,
            y_marginal: marginal(&y)?,
            x_fractions: occupation_fraction(&x)?,
            y_fractions: occupation_fraction(&y)?,
            composite,
            nx,
        })
    }

    fn directional(&self, direction: Direction) -> Directional<'_, f64> {
        let nx = self.nx;
        let at = move |x: usize, y: usize| self.composite[x - 1 + nx * (y - 1)];
        match direction {
            Direction::XFromY => Directional {
                family: &self.x_given_y,
                mixture: self.x_marginal.clone(),
                fractions: self.y_fractions.clone(),
                composite: Box::new(move |i, k| at(i, k)),
            },
            Direction::YFromX => Directional {
                family: &self.y_given_x,
                mixture: self.y_marginal.clone(),
                fractions: self.x_fractions.clone(),
                composite: Box::new(move |k, i| at(i, k)),
            },
        }
    }
}

/// Plug-in estimate of `C^T` from one observed composite path: realised
/// occupation times and fractions, conditional MLEs, and the marginal MLE of
/// the effect component.
pub fn empirical_causality(traj_w: &Trajectory, nx: usize, ny: usize, direction: Direction) -> Result<f64> {
    EmpiricalParts::new(traj_w, nx, ny)?.directional(direction).causality()
}

/// `κ(x) = (1 + sqrt(1 - exp(-2x))) / 2`: the success probability whose
/// Bernoulli law lies at divergence `x` from a fair coin.
pub fn kl_calibration<T: Scalar>(x: T) -> Result<T> {
    if !(x >= T::zero()) {
        return Err(Error::NegativeInput(x.as_f64()));
    }
    let gap = -(-(x + x)).exp_m1();
    Ok((T::one() + gap.sqrt()) / T::lit(2.0))
}

/// Both causality directions with their averages, bounds and calibrations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalityReport {
    pub source: String,
    pub horizon: f64,
    pub c_x_from_y: f64,
    pub c_y_from_x: f64,
    pub avg_x_from_y: f64,
    pub avg_y_from_x: f64,
    pub bound_x_from_y: f64,
    pub bound_y_from_x: f64,
    pub kappa_x_from_y: f64,
    pub kappa_y_from_x: f64,
    pub occupation_fractions_x: Vec<f64>,
    pub occupation_fractions_y: Vec<f64>,
}

pub const REPORT_CSV_HEADER: &str =
    "source,horizon,c_x_from_y,c_y_from_x,avg_x_from_y,avg_y_from_x,bound_x_from_y,bound_y_from_x,kappa_x_from_y,kappa_y_from_x";

impl CausalityReport {
    fn assemble(
        source: &str,
        horizon: f64,
        c: [f64; 2],
        bound: [f64; 2],
        fractions_x: Vec<f64>,
        fractions_y: Vec<f64>,
    ) -> Result<Self> {
        let avg = [c[0] / horizon, c[1] / horizon];
        let report = Self {
            source: source.to_string(),
            horizon,
            c_x_from_y: c[0],
            c_y_from_x: c[1],
            avg_x_from_y: avg[0],
            avg_y_from_x: avg[1],
            bound_x_from_y: bound[0],
            bound_y_from_x: bound[1],
            kappa_x_from_y: kl_calibration(avg[0])?,
            kappa_y_from_x: kl_calibration(avg[1])?,
            occupation_fractions_x: fractions_x,
            occupation_fractions_y: fractions_y,
        };
        report.check()?;
        Ok(report)
    }

    /// Checks non-negativity, `avg = c / T`, `c <= bound T` and `κ ∈ [0.5, 1]`.
    pub fn check(&self) -> Result<()> {
        let pairs = [
            (self.c_x_from_y, self.avg_x_from_y, self.bound_x_from_y, self.kappa_x_from_y),
            (self.c_y_from_x, self.avg_y_from_x, self.bound_y_from_x, self.kappa_y_from_x),
        ];
        for (c, avg, bound, kappa) in pairs {
            let ok = c >= 0.0
                && (avg - c / self.horizon).abs() <= 1e-12 * avg.abs().max(1.0)
                && c <= bound * self.horizon + 1e-9 * self.horizon.max(1.0)
                && (0.5..=1.0).contains(&kappa);
            if !ok {
                return Err(Error::Internal(format!(
                    "report invariants violated: c={c}, avg={avg}, bound={bound}, kappa={kappa}"
                )));
            }
        }
        Ok(())
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.source,
            self.horizon,
            self.c_x_from_y,
            self.c_y_from_x,
            self.avg_x_from_y,
            self.avg_y_from_x,
            self.bound_x_from_y,
            self.bound_y_from_x,
            self.kappa_x_from_y,
            self.kappa_y_from_x
        )
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{} causality over horizon {}\n", self.source, self.horizon);
        out.push_str(&format!(
            "{:<10}{:>16}{:>16}{:>16}{:>12}\n",
            "direction", "causality", "average", "bound", "kappa"
        ));
        for (label, c, avg, bound, kappa) in [
            ("X<-Y", self.c_x_from_y, self.avg_x_from_y, self.bound_x_from_y, self.kappa_x_from_y),
            ("Y<-X", self.c_y_from_x, self.avg_y_from_x, self.bound_y_from_x, self.kappa_y_from_x),
        ] {
            out.push_str(&format!("{label:<10}{c:>16.6e}{avg:>16.6e}{bound:>16.6e}{kappa:>12.6}\n"));
        }
        out
    }
}

/// Report from a model's expected occupation times.
pub fn build_report<T: Scalar>(model: &CtbnModel<T>, p0: &ProbabilityVector<T>, horizon: T) -> Result<CausalityReport> {
    let occ = model_occupation(model, p0, horizon)?;
    let xy = model_directional(model, &occ, Direction::XFromY)?;
    let yx = model_directional(model, &occ, Direction::YFromX)?;
    CausalityReport::assemble(
        "model",
        horizon.as_f64(),
        [xy.causality()?.as_f64(), yx.causality()?.as_f64()],
        [xy.bound()?.as_f64(), yx.bound()?.as_f64()],
        yx.fractions.iter().map(|f| f.as_f64()).collect(),
        xy.fractions.iter().map(|f| f.as_f64()).collect(),
    )
}

/// Report from plug-in estimates on one composite path.
pub fn build_report_empirical(traj_w: &Trajectory, nx: usize, ny: usize) -> Result<CausalityReport> {
    let parts = EmpiricalParts::new(traj_w, nx, ny)?;
    let xy = parts.directional(Direction::XFromY);
    let yx = parts.directional(Direction::YFromX);
    CausalityReport::assemble(
        "empirical",
        traj_w.horizon(),
        [xy.causality()?, yx.causality()?],
        [xy.bound()?, yx.bound()?],
        parts.x_fractions.clone(),
        parts.y_fractions.clone(),
    )
}
