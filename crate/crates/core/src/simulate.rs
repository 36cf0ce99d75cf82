//! Trajectory sampling for finite CTMCs, and projection of composite paths
//! onto their components (and back).
//!
//! Paths are right-continuous and piecewise constant: a [`Trajectory`] stores
//! its initial state and the post-jump state of every event in `(0, T]`.

use std::fmt::Write as _;
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::compose::composite_index;
use crate::error::{Error, Result};
use crate::generators::{Generator, ProbabilityVector};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub state: usize,
}

/// A sampled or observed path over states `1..=n` on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    n: usize,
    initial: usize,
    events: Vec<Event>,
    horizon: f64,
}

impl Trajectory {
    /// Validates: times strictly increasing in `(0, horizon]`, states in
    /// `1..=n`, every event changes the state.
    pub fn new(n: usize, initial: usize, events: Vec<Event>, horizon: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidTrajectory("state count must be at least 1".into()));
        }
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidTrajectory(format!("horizon {horizon} is not a finite non-negative time")));
        }
        if initial == 0 || initial > n {
            return Err(Error::InvalidTrajectory(format!("initial state {initial} outside 1..={n}")));
        }
        let mut prev_time = 0.0;
        let mut prev_state = initial;
        for (k, e) in events.iter().enumerate() {
            if !(e.time > prev_time) || e.time > horizon {
                return Err(Error::InvalidTrajectory(format!(
                    "event {} at time {} is not in ({prev_time}, {horizon}]",
                    k + 1,
                    e.time
                )));
            }
            if e.state == 0 || e.state > n {
                return Err(Error::InvalidTrajectory(format!("event {} state {} outside 1..={n}", k + 1, e.state)));
            }
            if e.state == prev_state {
                return Err(Error::InvalidTrajectory(format!("event {} does not change the state", k + 1)));
            }
            prev_time = e.time;
            prev_state = e.state;
        }
        Ok(Self { n, initial, events, horizon })
    }

    /// A path with no jumps.
    pub fn constant(n: usize, state: usize, horizon: f64) -> Result<Self> {
        Self::new(n, state, Vec::new(), horizon)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn final_state(&self) -> usize {
        self.events.last().map_or(self.initial, |e| e.state)
    }

    /// Holding intervals `(state, start, end)` covering `[0, horizon]`. The last
    /// one is censored at the horizon and may have zero length.
    pub fn segments(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        let starts = std::iter::once((self.initial, 0.0)).chain(self.events.iter().map(|e| (e.state, e.time)));
        let ends = self.events.iter().map(|e| e.time).chain(std::iter::once(self.horizon));
        starts.zip(ends).map(|((s, a), b)| (s, a, b))
    }

    /// Jumps `(time, from, to)`.
    pub fn transitions(&self) -> impl Iterator<Item = (f64, usize, usize)> + '_ {
        let froms = std::iter::once(self.initial).chain(self.events.iter().map(|e| e.state));
        self.events.iter().zip(froms).map(|(e, from)| (e.time, from, e.state))
    }

    /// The path restricted to `[0, horizon]`.
    pub fn truncate(&self, horizon: f64) -> Result<Self> {
        if !(horizon >= 0.0) || horizon > self.horizon {
            return Err(Error::InvalidTrajectory(format!("cannot truncate horizon {} to {horizon}", self.horizon)));
        }
        let events = self.events.iter().take_while(|e| e.time <= horizon).copied().collect();
        Ok(Self { n: self.n, initial: self.initial, events, horizon })
    }

    /// Tab-separated text: a `n initial horizon` header line followed by one
    /// `time state` line per event. Times carry 17 significant digits.
    pub fn to_tsv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.events.len() + 1));
        let _ = writeln!(out, "{}\t{}\t{:.16e}", self.n, self.initial, self.horizon);
        for e in &self.events {
            let _ = writeln!(out, "{:.16e}\t{}", e.time, e.state);
        }
        out
    }

    pub fn read_tsv(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines().enumerate().filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let (header_no, header) = lines.next().ok_or(Error::EmptyInput)?;
        let header = header?;
        let fields: Vec<&str> = header.split('\t').map(str::trim).collect();
        let malformed = |line: usize, reason: &str| Error::MalformedRow { line: line + 1, reason: reason.to_string() };
        if fields.len() != 3 {
            return Err(malformed(header_no, "header must be n<TAB>initial<TAB>horizon"));
        }
        let n: usize = fields[0].parse().map_err(|_| malformed(header_no, "bad state count"))?;
        let initial: usize = fields[1].parse().map_err(|_| malformed(header_no, "bad initial state"))?;
        let horizon: f64 = fields[2].parse().map_err(|_| malformed(header_no, "bad horizon"))?;
        let mut events = Vec::new();
        for (no, line) in lines {
            let line = line?;
            let mut parts = line.split('\t').map(str::trim);
            let (Some(t), Some(s), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(malformed(no, "expected time<TAB>state"));
            };
            let time: f64 = t.parse().map_err(|_| malformed(no, "bad time"))?;
            let state: usize = s.parse().map_err(|_| malformed(no, "bad state"))?;
            events.push(Event { time, state });
        }
        Self::new(n, initial, events, horizon)
    }
}

/// Batch simulation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub replications: usize,
    pub horizon: f64,
}

impl SimConfig {
    pub fn new(seed: u64, replications: usize, horizon: f64) -> Result<Self> {
        if replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidConfig(format!("horizon {horizon} must be positive")));
        }
        Ok(Self { seed, replications, horizon })
    }
}

/// Random stream for replication `replication` of a run seeded with `seed`.
/// Streams are independent, so replications can be drawn in any order.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// Precomputed exit rates and cumulative jump weights of a generator.
#[derive(Debug, Clone)]
pub struct JumpTable {
    exit: Vec<f64>,
    cumulative: Vec<Vec<(usize, f64)>>,
}

impl JumpTable {
    pub fn new<T: Scalar>(q: &Generator<T>) -> Self {
        let n = q.dim();
        let mut exit = Vec::with_capacity(n);
        let mut cumulative = Vec::with_capacity(n);
        for i in 1..=n {
            let mut acc = 0.0;
            let mut row = Vec::new();
            for j in 1..=n {
                let r = q.rate(i, j).as_f64();
                if j != i && r > 0.0 {
                    acc += r;
                    row.push((j, acc));
                }
            }
            exit.push(acc);
            cumulative.push(row);
        }
        Self { exit, cumulative }
    }

    pub fn exit_rate(&self, state: usize) -> f64 {
        self.exit[state - 1]
    }

    /// Exponential holding time by inversion; a zero variate is redrawn.
    pub fn holding_time(&self, state: usize, rng: &mut impl Rng) -> f64 {
        let rate = self.exit[state - 1];
        loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                let hold = -u.ln() / rate;
                if hold > 0.0 {
                    return hold;
                }
            }
        }
    }

    pub fn next_state(&self, state: usize, rng: &mut impl Rng) -> usize {
        let row = &self.cumulative[state - 1];
        let total = self.exit[state - 1];
        let u = rng.random::<f64>() * total;
        row.iter().find(|&&(_, c)| u < c).or(row.last()).map(|&(j, _)| j).expect("state has a positive exit rate")
    }
}

fn sample_initial<T: Scalar>(p0: &ProbabilityVector<T>, rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 1;
    for (i, p) in p0.as_slice().iter().enumerate() {
        let p = p.as_f64();
        if p > 0.0 {
            last_positive = i + 1;
            acc += p;
            if u < acc {
                return i + 1;
            }
        }
    }
    last_positive
}

/// Draws one path on `[0, horizon]` with the given random stream.
pub fn sample_with_rng<T: Scalar>(
    table: &JumpTable,
    p0: &ProbabilityVector<T>,
    horizon: f64,
    rng: &mut impl Rng,
) -> Result<Trajectory> {
    if p0.len() != table.exit.len() {
        return Err(Error::DimensionMismatch { expected: table.exit.len(), found: p0.len() });
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidConfig(format!("horizon {horizon} must be positive")));
    }
    let initial = sample_initial(p0, rng);
    let mut state = initial;
    let mut time = 0.0;
    let mut events = Vec::new();
    while table.exit_rate(state) > 0.0 {
        time += table.holding_time(state, rng);
        if time >= horizon {
            break;
        }
        state = table.next_state(state, rng);
        events.push(Event { time, state });
    }
    Ok(Trajectory { n: table.exit.len(), initial, events, horizon })
}

/// Draws one path from `q` started from `p0`, using replication stream 0 of `seed`.
pub fn sample_trajectory<T: Scalar>(
    q: &Generator<T>,
    p0: &ProbabilityVector<T>,
    horizon: f64,
    seed: u64,
) -> Result<Trajectory> {
    if q.dim() != p0.len() {
        return Err(Error::DimensionMismatch { expected: q.dim(), found: p0.len() });
    }
    sample_with_rng(&JumpTable::new(q), p0, horizon, &mut replication_rng(seed, 0))
}

/// `config.replications` independent paths; path `r` uses stream `r`.
pub fn sample_batch<T: Scalar>(
    q: &Generator<T>,
    p0: &ProbabilityVector<T>,
    config: &SimConfig,
) -> Result<Vec<Trajectory>> {
    if q.dim() != p0.len() {
        return Err(Error::DimensionMismatch { expected: q.dim(), found: p0.len() });
    }
    let table = JumpTable::new(q);
    (0..config.replications as u64)
        .map(|r| sample_with_rng(&table, p0, config.horizon, &mut replication_rng(config.seed, r)))
        .collect()
}

/// Splits a composite path into its `X` and `Y` paths.
pub fn project(traj_w: &Trajectory, nx: usize) -> Result<(Trajectory, Trajectory)> {
    if nx == 0 || traj_w.n % nx != 0 {
        return Err(Error::DimensionMismatch { expected: nx, found: traj_w.n });
    }
    let ny = traj_w.n / nx;
    let split = |w: usize| (1 + (w - 1) % nx, w.div_ceil(nx));
    let (x0, y0) = split(traj_w.initial);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let (mut x, mut y) = (x0, y0);
    for e in &traj_w.events {
        let (nx_state, ny_state) = split(e.state);
        match (nx_state != x, ny_state != y) {
            (true, true) => return Err(Error::SimultaneousJump { time: e.time }),
            (true, false) => xs.push(Event { time: e.time, state: nx_state }),
            (false, true) => ys.push(Event { time: e.time, state: ny_state }),
            (false, false) => unreachable!("validated trajectories always change state"),
        }
        x = nx_state;
        y = ny_state;
    }
    Ok((
        Trajectory { n: nx, initial: x0, events: xs, horizon: traj_w.horizon },
        Trajectory { n: ny, initial: y0, events: ys, horizon: traj_w.horizon },
    ))
}

/// Merges component paths into the composite path; inverse of [`project`].
pub fn combine(traj_x: &Trajectory, traj_y: &Trajectory, nx: usize) -> Result<Trajectory> {
    if traj_x.n != nx {
        return Err(Error::DimensionMismatch { expected: nx, found: traj_x.n });
    }
    if traj_x.horizon != traj_y.horizon {
        return Err(Error::InvalidTrajectory(format!(
            "component horizons differ: {} vs {}",
            traj_x.horizon, traj_y.horizon
        )));
    }
    let (mut x, mut y) = (traj_x.initial, traj_y.initial);
    let initial = composite_index(x, y, nx)?;
    let mut events = Vec::with_capacity(traj_x.events.len() + traj_y.events.len());
    let (mut i, mut j) = (0, 0);
    while i < traj_x.events.len() || j < traj_y.events.len() {
        let ex = traj_x.events.get(i);
        let ey = traj_y.events.get(j);
        let time = match (ex, ey) {
            (Some(a), Some(b)) if a.time == b.time => return Err(Error::SharedJumpTime { time: a.time }),
            (Some(a), Some(b)) if a.time < b.time => {
                x = a.state;
                i += 1;
                a.time
            }
            (Some(a), None) => {
                x = a.state;
                i += 1;
                a.time
            }
            (_, Some(b)) => {
                y = b.state;
                j += 1;
                b.time
            }
            (None, None) => unreachable!(),
        };
        events.push(Event { time, state: x + nx * (y - 1) });
    }
    Ok(Trajectory { n: nx * traj_y.n, initial, events, horizon: traj_x.horizon })
}
