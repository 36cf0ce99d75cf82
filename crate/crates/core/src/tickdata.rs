//! Price quotes as a two-component network: `X` is the size of the last
//! uptick and `Y` the size of the last downtick, both in ticks and capped.

use std::io::BufRead;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::causality::{build_report_empirical, CausalityReport};
use crate::error::{Error, Result};
use crate::estimate::{collect_stats, mle_generator};
use crate::generators::Generator;
use crate::simulate::{combine, project, replication_rng, Event, Trajectory};

pub const QUOTE_CSV_HEADER: &str = "timestamp_ms,price";

/// One price change; the price is held as an integer number of ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quote {
    pub timestamp_ms: i64,
    pub ticks: i64,
}

/// Quotes with consecutive duplicates removed. The first quote fixes the
/// starting price; every later one is a price change.
#[derive(Debug, Clone, PartialEq)]
pub struct QuoteSeries {
    tick_size: f64,
    quotes: Vec<Quote>,
}

impl QuoteSeries {
    /// Validates ordering and positivity, then drops repeated prices.
    pub fn new(tick_size: f64, quotes: Vec<Quote>) -> Result<Self> {
        check_tick_size(tick_size)?;
        if quotes.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut kept: Vec<Quote> = Vec::with_capacity(quotes.len());
        for (k, q) in quotes.into_iter().enumerate() {
            if q.ticks <= 0 {
                return Err(Error::MalformedRow { line: k + 1, reason: "price must be positive".into() });
            }
            if let Some(last) = kept.last() {
                if q.timestamp_ms < last.timestamp_ms {
                    return Err(Error::NonMonotoneTime { line: k + 1 });
                }
                if q.ticks == last.ticks {
                    continue;
                }
            }
            kept.push(q);
        }
        Ok(Self { tick_size, quotes: kept })
    }

    pub fn tick_size(&self) -> f64 {
        self.tick_size
    }

    pub fn quotes(&self) -> &[Quote] {
        &self.quotes
    }

    /// Number of price changes after the opening quote.
    pub fn changes(&self) -> usize {
        self.quotes.len() - 1
    }

    pub fn price(&self, k: usize) -> f64 {
        self.quotes[k].ticks as f64 * self.tick_size
    }

    /// CSV with the header line; prices printed to the tick's precision.
    pub fn to_csv(&self) -> String {
        let decimals = format!("{}", self.tick_size).split('.').nth(1).map_or(0, str::len);
        let mut out = String::with_capacity(24 * (self.quotes.len() + 1));
        out.push_str(QUOTE_CSV_HEADER);
        out.push('\n');
        for (k, q) in self.quotes.iter().enumerate() {
            out.push_str(&format!("{},{:.*}\n", q.timestamp_ms, decimals, self.price(k)));
        }
        out
    }
}

fn check_tick_size(tick_size: f64) -> Result<()> {
    if !(tick_size > 0.0) || !tick_size.is_finite() {
        return Err(Error::InvalidConfig(format!("tick size {tick_size} must be positive")));
    }
    Ok(())
}

/// Reads `timestamp_ms,price` CSV. Line numbers in errors count the header as line 1.
pub fn parse_quotes(reader: impl BufRead, tick_size: f64) -> Result<QuoteSeries> {
    check_tick_size(tick_size)?;
    let mut lines = reader.lines();
    let header = match lines.next() {
        None => return Err(Error::EmptyInput),
        Some(line) => line?,
    };
    if header.trim().trim_start_matches('\u{feff}') != QUOTE_CSV_HEADER {
        return Err(Error::MalformedRow { line: 1, reason: format!("expected header '{QUOTE_CSV_HEADER}'") });
    }
    let mut quotes = Vec::new();
    let mut last_ms = i64::MIN;
    for (k, line) in lines.enumerate() {
        let line_no = k + 2;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let malformed = |reason: &str| Error::MalformedRow { line: line_no, reason: reason.to_string() };
        let mut fields = line.split(',').map(str::trim);
        let (Some(ts), Some(price), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(malformed("expected two fields"));
        };
        let timestamp_ms: i64 = ts.parse().map_err(|_| malformed("timestamp is not an integer"))?;
        let price: f64 = price.parse().map_err(|_| malformed("price is not a number"))?;
        if !(price > 0.0) || !price.is_finite() {
            return Err(malformed("price must be positive"));
        }
        if timestamp_ms < last_ms {
            return Err(Error::NonMonotoneTime { line: line_no });
        }
        last_ms = timestamp_ms;
        let ticks = (price / tick_size).round();
        let slack = 1e-9 * tick_size + 4.0 * f64::EPSILON * price;
        if (price - ticks * tick_size).abs() > slack {
            return Err(Error::OffGridPrice { line: line_no });
        }
        quotes.push(Quote { timestamp_ms, ticks: ticks as i64 });
    }
    QuoteSeries::new(tick_size, quotes)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickModelConfig {
    pub cap: usize,
    pub tick_size: f64,
}

impl TickModelConfig {
    pub fn new(cap: usize, tick_size: f64) -> Result<Self> {
        if cap == 0 {
            return Err(Error::InvalidConfig("cap must be at least 1".into()));
        }
        check_tick_size(tick_size)?;
        Ok(Self { cap, tick_size })
    }
}

/// Component paths over states `1..=cap`, with bookkeeping of what was dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct TickPaths {
    pub x: Trajectory,
    pub y: Trajectory,
    /// Changes before both directions had been seen.
    pub warmup: usize,
    /// Changes after warm-up that moved a component.
    pub events_used: usize,
    /// Changes after warm-up repeating the current capped size.
    pub events_absorbed: usize,
}

/// Change times in microseconds from the first quote. Changes within the same
/// millisecond are spread by one microsecond each, in file order.
fn change_times(quotes: &[Quote]) -> Vec<i64> {
    let origin = quotes[0].timestamp_ms;
    let mut times = Vec::with_capacity(quotes.len());
    let mut same_ms = 0;
    for (k, q) in quotes.iter().enumerate() {
        if k > 0 && q.timestamp_ms == quotes[k - 1].timestamp_ms {
            same_ms += 1;
        } else {
            same_ms = 0;
        }
        times.push((q.timestamp_ms - origin) * 1000 + same_ms);
    }
    times
}

/// Builds the uptick and downtick paths. The clock starts at the first change
/// by which both directions have occurred; earlier changes are discarded.
pub fn to_component_paths(quotes: &QuoteSeries, config: &TickModelConfig) -> Result<TickPaths> {
    let cap = config.cap as i64;
    let q = quotes.quotes();
    let times = change_times(q);
    let mut x: Option<usize> = None;
    let mut y: Option<usize> = None;
    let mut start = None;
    for k in 1..q.len() {
        let d = q[k].ticks - q[k - 1].ticks;
        let size = d.abs().min(cap) as usize;
        if d > 0 {
            x = Some(size);
        } else {
            y = Some(size);
        }
        if x.is_some() && y.is_some() {
            start = Some(k);
            break;
        }
    }
    let (Some(start), Some(x0), Some(y0)) = (start, x, y) else {
        return Err(Error::InsufficientData("need at least one uptick and one downtick".into()));
    };
    let t0 = times[start];
    let seconds = |us: i64| (us - t0) as f64 / 1e6;
    let horizon = seconds(times[q.len() - 1]);
    if !(horizon > 0.0) {
        return Err(Error::InsufficientData("no observation time after warm-up".into()));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let (mut xc, mut yc) = (x0, y0);
    let mut absorbed = 0;
    for k in start + 1..q.len() {
        let d = q[k].ticks - q[k - 1].ticks;
        let size = d.abs().min(cap) as usize;
        let time = seconds(times[k]);
        let (current, events) = if d > 0 { (&mut xc, &mut xs) } else { (&mut yc, &mut ys) };
        if size == *current {
            absorbed += 1;
        } else {
            *current = size;
            events.push(Event { time, state: size });
        }
    }
    let events_used = xs.len() + ys.len();
    Ok(TickPaths {
        x: Trajectory::new(config.cap, x0, xs, horizon)?,
        y: Trajectory::new(config.cap, y0, ys, horizon)?,
        warmup: start - 1,
        events_used,
        events_absorbed: absorbed,
    })
}

/// Causality summary for one cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickReport {
    pub cap: usize,
    pub events_used: usize,
    pub events_absorbed: usize,
    pub warmup: usize,
    pub report: CausalityReport,
}

pub const TICK_CSV_HEADER: &str = "M,kappa_x_from_y,kappa_y_from_x,avg_c_xy,avg_c_yx,events_used,events_absorbed";

impl TickReport {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.cap,
            self.report.kappa_x_from_y,
            self.report.kappa_y_from_x,
            self.report.avg_x_from_y,
            self.report.avg_y_from_x,
            self.events_used,
            self.events_absorbed
        )
    }
}

/// One cap's result: the report and the estimated joint generator over `cap²` states.
#[derive(Debug, Clone, PartialEq)]
pub struct TickAnalysis {
    pub summary: TickReport,
    pub joint: Generator<f64>,
}

pub fn analyze_cap(quotes: &QuoteSeries, cap: usize) -> Result<TickAnalysis> {
    let config = TickModelConfig::new(cap, quotes.tick_size())?;
    let paths = to_component_paths(quotes, &config)?;
    let w = combine(&paths.x, &paths.y, cap)?;
    let report = build_report_empirical(&w, cap, cap)?;
    let joint = mle_generator(&collect_stats(std::slice::from_ref(&w))?);
    Ok(TickAnalysis {
        summary: TickReport {
            cap,
            events_used: paths.events_used,
            events_absorbed: paths.events_absorbed,
            warmup: paths.warmup,
            report,
        },
        joint,
    })
}

/// Runs [`analyze_cap`] for every cap in the sweep.
pub fn tick_causality(quotes: &QuoteSeries, caps: &[usize]) -> Result<Vec<TickAnalysis>> {
    caps.iter().map(|&cap| analyze_cap(quotes, cap)).collect()
}

/// Synthetic price path from independent up and down Poisson streams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkellamSpec {
    pub rate_up: f64,
    pub rate_down: f64,
    pub horizon: f64,
    pub tick_size: f64,
    /// Jump sizes are geometric on `1, 2, ...` with `P(size > m) = size_decay^m`;
    /// zero gives unit jumps.
    pub size_decay: f64,
    pub start_ticks: i64,
}

impl SkellamSpec {
    pub fn unit(rate_up: f64, rate_down: f64, horizon: f64, tick_size: f64) -> Self {
        Self { rate_up, rate_down, horizon, tick_size, size_decay: 0.0, start_ticks: 1 << 40 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rate_up > 0.0 && self.rate_down > 0.0) || !(self.rate_up + self.rate_down).is_finite() {
            return Err(Error::InvalidConfig("jump rates must be positive".into()));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidConfig("horizon must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.size_decay) {
            return Err(Error::InvalidConfig("size decay must lie in [0, 1)".into()));
        }
        if self.start_ticks <= 0 {
            return Err(Error::InvalidConfig("starting price must be positive".into()));
        }
        check_tick_size(self.tick_size)
    }
}

fn jump_size(decay: f64, rng: &mut impl Rng) -> i64 {
    if decay == 0.0 {
        return 1;
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    1 + (u.ln() / decay.ln()).floor() as i64
}

/// Samples a quote series on `[0, horizon]` seconds, opening at `start_ticks`
/// at time 0. An event landing in the same millisecond as the previous quote
/// has its waiting time redrawn.
pub fn sample_skellam(synth: &SkellamSpec, seed: u64) -> Result<QuoteSeries> {
    synth.validate()?;
    let mut rng = replication_rng(seed, 0);
    let total = synth.rate_up + synth.rate_down;
    let p_up = synth.rate_up / total;
    let mut quotes = vec![Quote { timestamp_ms: 0, ticks: synth.start_ticks }];
    let mut time = 0.0;
    let mut ticks = synth.start_ticks;
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let candidate = time - u.ln() / total;
        if candidate >= synth.horizon {
            break;
        }
        let ms = (candidate * 1000.0).floor() as i64;
        if ms == quotes.last().map_or(-1, |q| q.timestamp_ms) {
            continue;
        }
        time = candidate;
        let up = rng.random::<f64>() < p_up;
        let size = jump_size(synth.size_decay, &mut rng);
        if up {
            ticks += size;
        } else {
            ticks = (ticks - size).max(1);
        }
        quotes.push(Quote { timestamp_ms: ms, ticks });
    }
    QuoteSeries::new(synth.tick_size, quotes)
}

/// Unit-jump Skellam quotes.
pub fn sample_skellam_quotes(
    rate_up: f64,
    rate_down: f64,
    horizon: f64,
    tick_size: f64,
    seed: u64,
) -> Result<QuoteSeries> {
    sample_skellam(&SkellamSpec::unit(rate_up, rate_down, horizon, tick_size), seed)
}

/// Renders a composite path as quotes whose component paths (with cap at
/// least `max(nx, ny)`) reproduce it, up to millisecond rounding of times.
/// An uptick of size `x₀` and a downtick of size `y₀` open the series.
pub fn quotes_from_ctbn_path(traj_w: &Trajectory, nx: usize, tick_size: f64) -> Result<QuoteSeries> {
    check_tick_size(tick_size)?;
    let (x, y) = project(traj_w, nx)?;
    let downs: i64 = y.initial() as i64 + y.events().iter().map(|e| e.state as i64).sum::<i64>();
    let mut ticks = downs + 1;
    let mut quotes = vec![Quote { timestamp_ms: 0, ticks }];
    ticks += x.initial() as i64;
    quotes.push(Quote { timestamp_ms: 1, ticks });
    ticks -= y.initial() as i64;
    quotes.push(Quote { timestamp_ms: 2, ticks });
    let (mut xi, mut yi) = (0, 0);
    while xi < x.events().len() || yi < y.events().len() {
        let next_x = x.events().get(xi);
        let next_y = y.events().get(yi);
        let take_x = match (next_x, next_y) {
            (Some(a), Some(b)) => a.time < b.time,
            (Some(_), None) => true,
            _ => false,
        };
        let (time, delta) = if take_x {
            let e = next_x.unwrap();
            xi += 1;
            (e.time, e.state as i64)
        } else {
            let e = next_y.unwrap();
            yi += 1;
            (e.time, -(e.state as i64))
        };
        ticks += delta;
        quotes.push(Quote { timestamp_ms: 2 + (time * 1000.0).floor() as i64, ticks });
    }
    // Closing quote at the horizon, one tick away from the last price, so the
    // observation window covers the whole path. It repeats the last uptick size
    // when possible and is then absorbed.
    let last_up = x.final_state() as i64;
    quotes.push(Quote { timestamp_ms: 2 + (traj_w.horizon() * 1000.0).floor() as i64 + 1, ticks: ticks + last_up });
    QuoteSeries::new(tick_size, quotes)
}
