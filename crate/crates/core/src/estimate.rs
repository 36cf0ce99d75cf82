//! Sufficient statistics and maximum-likelihood generators from observed paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::simulate::{project, Trajectory};

/// Transition counts and occupation times pooled over one or more trials.
///
/// `counts[i][j]` is the number of `i+1 -> j+1` jumps; `occupation[i]` the
/// time spent in state `i+1`. The final, censored holding time of each trial
/// counts toward occupation but not toward any transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    pub n: usize,
    pub counts: Vec<Vec<u64>>,
    pub occupation: Vec<f64>,
    pub horizon_total: f64,
    pub trials: usize,
}

impl SufficientStats {
    pub fn empty(n: usize) -> Self {
        Self { n, counts: vec![vec![0; n]; n], occupation: vec![0.0; n], horizon_total: 0.0, trials: 0 }
    }

    /// Adds one trial.
    pub fn add(&mut self, traj: &Trajectory) -> Result<()> {
        if traj.n() != self.n {
            return Err(Error::MixedDimensions { first: self.n, other: traj.n() });
        }
        for (state, start, end) in traj.segments() {
            self.occupation[state - 1] += end - start;
        }
        for (_, from, to) in traj.transitions() {
            self.counts[from - 1][to - 1] += 1;
        }
        self.horizon_total += traj.horizon();
        self.trials += 1;
        Ok(())
    }

    /// Elementwise sum of two batches.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::MixedDimensions { first: self.n, other: other.n });
        }
        let mut out = self.clone();
        for (row, other_row) in out.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(other_row) {
                *c += o;
            }
        }
        for (a, b) in out.occupation.iter_mut().zip(&other.occupation) {
            *a += b;
        }
        out.horizon_total += other.horizon_total;
        out.trials += other.trials;
        Ok(out)
    }

    /// Checks shape, zero diagonal, non-negative occupation summing to the
    /// pooled horizon, and no counts out of unvisited states.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(format!("sufficient statistics: {msg}")));
        if self.counts.len() != self.n
            || self.counts.iter().any(|r| r.len() != self.n)
            || self.occupation.len() != self.n
        {
            return bad(format!("expected {n}x{n} counts and {n} occupations", n = self.n));
        }
        if let Some(i) = (0..self.n).find(|&i| self.counts[i][i] != 0) {
            return bad(format!("diagonal count at state {}", i + 1));
        }
        if let Some(i) = self.occupation.iter().position(|&a| !(a >= 0.0) || !a.is_finite()) {
            return bad(format!("occupation of state {} is {}", i + 1, self.occupation[i]));
        }
        if let Some(i) = (0..self.n).find(|&i| self.occupation[i] == 0.0 && self.counts[i].iter().any(|&c| c > 0)) {
            return bad(format!("state {} has transitions but no occupation", i + 1));
        }
        let total: f64 = self.occupation.iter().sum();
        if (total - self.horizon_total).abs() > 1e-9 * self.horizon_total.max(1e-300) {
            return bad(format!("occupation sums to {total}, horizon total is {}", self.horizon_total));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let stats: Self = serde_json::from_str(text)?;
        stats.validate()?;
        Ok(stats)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn total_transitions(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Pools the statistics of several trials over the same state space.
pub fn collect_stats(trajectories: &[Trajectory]) -> Result<SufficientStats> {
    let first = trajectories.first().ok_or(Error::EmptyInput)?;
    let mut stats = SufficientStats::empty(first.n());
    for t in trajectories {
        stats.add(t)?;
    }
    Ok(stats)
}

/// `q(j|i) = N(j|i) / A(i)`, with rows of unvisited states set to zero.
pub fn mle_generator<T: Scalar>(stats: &SufficientStats) -> Generator<T> {
    let n = stats.n;
    let off = Matrix::from_fn(n, n, |i, j| {
        let a = stats.occupation[i];
        if i == j || a <= 0.0 {
            T::zero()
        } else {
            T::lit(stats.counts[i][j] as f64) / T::lit(a)
        }
    });
    Generator::from_off_diagonal(off).expect("non-negative finite rates always form a generator")
}

/// Log-likelihood of `q` up to the additive constant:
/// `Σ N(j|i) log q(j|i) - Σ A(i) q_i`, with `0 log 0 = 0`.
pub fn log_likelihood<T: Scalar>(stats: &SufficientStats, q: &Generator<T>) -> Result<f64> {
    if q.dim() != stats.n {
        return Err(Error::DimensionMismatch { expected: stats.n, found: q.dim() });
    }
    let mut ll = 0.0;
    for i in 1..=stats.n {
        ll -= stats.occupation[i - 1] * q.exit_rate(i).as_f64();
        for j in 1..=stats.n {
            let c = stats.counts[i - 1][j - 1];
            if i != j && c > 0 {
                ll += c as f64 * q.rate(i, j).as_f64().ln();
            }
        }
    }
    Ok(ll)
}

/// Statistics of both conditional families read off one composite path.
///
/// `x_given_y[k-1]` holds the `X` jumps and `X` occupation while `Y = k`;
/// `y_given_x[i-1]` the `Y` jumps and occupation while `X = i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalStats {
    pub nx: usize,
    pub ny: usize,
    pub x_given_y: Vec<SufficientStats>,
    pub y_given_x: Vec<SufficientStats>,
}

impl ConditionalStats {
    pub fn empty(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            x_given_y: vec![SufficientStats::empty(nx); ny],
            y_given_x: vec![SufficientStats::empty(ny); nx],
        }
    }

    pub fn add(&mut self, traj_w: &Trajectory) -> Result<()> {
        let (nx, ny) = (self.nx, self.ny);
        if traj_w.n() != nx * ny {
            return Err(Error::DimensionMismatch { expected: nx * ny, found: traj_w.n() });
        }
        let split = |w: usize| (1 + (w - 1) % nx, w.div_ceil(nx));
        for (w, start, end) in traj_w.segments() {
            let (x, y) = split(w);
            self.x_given_y[y - 1].occupation[x - 1] += end - start;
            self.y_given_x[x - 1].occupation[y - 1] += end - start;
        }
        for (time, from, to) in traj_w.transitions() {
            let ((x0, y0), (x1, y1)) = (split(from), split(to));
            if x0 != x1 && y0 != y1 {
                return Err(Error::SimultaneousJump { time });
            }
            if x0 != x1 {
                self.x_given_y[y0 - 1].counts[x0 - 1][x1 - 1] += 1;
            } else {
                self.y_given_x[x0 - 1].counts[y0 - 1][y1 - 1] += 1;
            }
        }
        for s in self.x_given_y.iter_mut().chain(self.y_given_x.iter_mut()) {
            s.horizon_total = s.occupation.iter().sum();
            s.trials += 1;
        }
        Ok(())
    }

    pub fn merge(&self, other: &Self) -> Result<Self> {
        if (self.nx, self.ny) != (other.nx, other.ny) {
            return Err(Error::MixedDimensions { first: self.nx * self.ny, other: other.nx * other.ny });
        }
        let merge_all = |a: &[SufficientStats], b: &[SufficientStats]| {
            a.iter().zip(b).map(|(s, t)| s.merge(t)).collect::<Result<Vec<_>>>()
        };
        Ok(Self {
            nx: self.nx,
            ny: self.ny,
            x_given_y: merge_all(&self.x_given_y, &other.x_given_y)?,
            y_given_x: merge_all(&self.y_given_x, &other.y_given_x)?,
        })
    }

    /// Composite occupation time of `(x, y)`.
    pub fn composite_occupation(&self, x: usize, y: usize) -> f64 {
        self.x_given_y[y - 1].occupation[x - 1]
    }
}

pub fn conditional_stats(traj_w: &Trajectory, nx: usize, ny: usize) -> Result<ConditionalStats> {
    let mut stats = ConditionalStats::empty(nx, ny);
    stats.add(traj_w)?;
    Ok(stats)
}

/// Fraction of the horizon spent in each state.
pub fn occupation_fraction(traj: &Trajectory) -> Result<Vec<f64>> {
    if traj.horizon() <= 0.0 {
        return Err(Error::ZeroHorizon);
    }
    let mut occ = vec![0.0; traj.n()];
    for (state, start, end) in traj.segments() {
        occ[state - 1] += end - start;
    }
    Ok(occ.into_iter().map(|a| a / traj.horizon()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    X,
    Y,
}

/// MLE of one component's generator from its projected path, ignoring the other.
pub fn marginal_mle<T: Scalar>(traj_w: &Trajectory, nx: usize, component: Component) -> Result<Generator<T>> {
    let (x, y) = project(traj_w, nx)?;
    let path = match component {
        Component::X => x,
        Component::Y => y,
    };
    Ok(mle_generator(&collect_stats(std::slice::from_ref(&path))?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::Event;

    fn path(n: usize, initial: usize, events: &[(f64, usize)], horizon: f64) -> Trajectory {
        let events = events.iter().map(|&(time, state)| Event { time, state }).collect();
        Trajectory::new(n, initial, events, horizon).unwrap()
    }

    #[test]
    fn collect_examples() {
        let t = path(2, 1, &[(4.0, 2)], 6.0);
        let s = collect_stats(&[t.clone()]).unwrap();
        assert_eq!(s.counts, vec![vec![0, 1], vec![0, 0]]);
        assert_eq!(s.occupation, vec![4.0, 2.0]);
        let s2 = collect_stats(&[t.clone(), t]).unwrap();
        assert_eq!(s2.counts[0][1], 2);
        assert_eq!(s2.occupation, vec![8.0, 4.0]);
        assert_eq!(s2.trials, 2);
        s2.validate().unwrap();

        let still = Trajectory::constant(3, 1, 7.0).unwrap();
        let s = collect_stats(&[still]).unwrap();
        assert_eq!(s.total_transitions(), 0);
        assert_eq!(s.occupation, vec![7.0, 0.0, 0.0]);
    }

    #[test]
    fn collect_errors() {
        assert!(matches!(collect_stats(&[]), Err(Error::EmptyInput)));
        let a = Trajectory::constant(2, 1, 1.0).unwrap();
        let b = Trajectory::constant(3, 1, 1.0).unwrap();
        assert!(matches!(collect_stats(&[a, b]), Err(Error::MixedDimensions { first: 2, other: 3 })));
    }

    #[test]
    fn mle_examples() {
        let mut s = SufficientStats::empty(2);
        s.counts[0][1] = 3;
        s.occupation = vec![6.0, 0.0];
        s.horizon_total = 6.0;
        let q: Generator<f64> = mle_generator(&s);
        assert_eq!(q.rate(1, 2), 0.5);
        assert_eq!(q.rate(1, 1), -0.5);
        assert_eq!(q.rate(2, 1), 0.0);
        assert_eq!(q.rate(2, 2), 0.0);
    }

    #[test]
    fn merge_adds() {
        let a = collect_stats(&[path(2, 1, &[(1.0, 2)], 3.0)]).unwrap();
        let b = collect_stats(&[path(2, 2, &[(2.0, 1)], 5.0)]).unwrap();
        let m = a.merge(&b).unwrap();
        assert_eq!(m.counts, vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(m.occupation, vec![4.0, 4.0]);
        assert_eq!(m.horizon_total, 8.0);
        assert_eq!(m, b.merge(&a).unwrap());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let s = collect_stats(&[path(2, 1, &[(1.0, 2)], 3.0)]).unwrap();
        let back = SufficientStats::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
        let text = r#"{"n":2,"counts":[[1,0],[0,0]],"occupation":[1.0,0.0],"horizon_total":1.0,"trials":1}"#;
        assert!(SufficientStats::from_json(text).is_err());
        let text = r#"{"n":2,"counts":[[0,0],[1,0]],"occupation":[1.0,0.0],"horizon_total":1.0,"trials":1}"#;
        assert!(SufficientStats::from_json(text).is_err());
    }

    #[test]
    fn conditional_examples() {
        // (1,1) -> (2,1) -> (2,2)
        let w = path(4, 1, &[(1.0, 2), (2.0, 4)], 3.0);
        let c = conditional_stats(&w, 2, 2).unwrap();
        assert_eq!(c.x_given_y[0].counts[0][1], 1);
        assert_eq!(c.x_given_y[1].total_transitions(), 0);
        assert_eq!(c.y_given_x[1].counts[0][1], 1);
        assert_eq!(c.composite_occupation(2, 2), 1.0);

        let stay = path(4, 1, &[(1.0, 2)], 3.0);
        let c = conditional_stats(&stay, 2, 2).unwrap();
        assert_eq!(c.x_given_y[1].occupation, vec![0.0, 0.0]);
        assert_eq!(c.x_given_y[1].total_transitions(), 0);

        let diagonal = path(4, 1, &[(1.0, 4)], 3.0);
        assert!(matches!(conditional_stats(&diagonal, 2, 2), Err(Error::SimultaneousJump { .. })));
    }

    #[test]
    fn fractions() {
        assert_eq!(occupation_fraction(&Trajectory::constant(3, 1, 2.0).unwrap()).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(occupation_fraction(&path(2, 1, &[(1.0, 2)], 2.0)).unwrap(), vec![0.5, 0.5]);
        assert!(matches!(occupation_fraction(&Trajectory::constant(2, 1, 0.0).unwrap()), Err(Error::ZeroHorizon)));
    }

    #[test]
    fn marginal_of_still_component_is_zero() {
        let w = path(4, 1, &[(1.0, 3), (2.0, 1)], 3.0);
        let q: Generator<f64> = marginal_mle(&w, 2, Component::X).unwrap();
        assert_eq!(q.rates().max_abs(), 0.0);
        let qy: Generator<f64> = marginal_mle(&w, 2, Component::Y).unwrap();
        assert_eq!(qy.rate(1, 2), 1.0 / 2.0);
    }

    #[test]
    fn likelihood_prefers_mle() {
        let s = collect_stats(&[path(2, 1, &[(1.0, 2), (1.5, 1), (4.0, 2)], 5.0)]).unwrap();
        let q: Generator<f64> = mle_generator(&s);
        let best = log_likelihood(&s, &q).unwrap();
        let other = Generator::two_state(0.3, 1.0).unwrap();
        assert!(log_likelihood(&s, &other).unwrap() < best);
    }
}
