//! Discrete-event simulation of the processor-sharing queue.
//!
//! Residuals are stored as targets against a shared accumulator `S` (the
//! service each job present has received since time 0), so that with `n`
//! jobs every residual `target - S` falls at rate `1/n` without touching
//! the heap. Each event costs `O(log n)`.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::distributions::ServiceDistribution;
use crate::error::{Error, Result};
use crate::fluid::FluidSolution;
use crate::grid::GridParams;
use crate::measures::{GridMeasure, Tail, TailEntry};
use crate::metrics::{prohorov, total_variation};

/// Independent random streams of one replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Initial = 0,
    Arrivals = 1,
    Services = 2,
}

/// Deterministic stream keyed by `(seed, replica, purpose)`.
pub fn stream(seed: u64, replica: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&replica.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(purpose as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Target(f64);

impl Eq for Target {}

impl PartialOrd for Target {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Target {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    Arrival { service: f64 },
    Departure,
}

/// State of the queue between events.
#[derive(Debug, Clone)]
pub struct QueueState {
    clock: f64,
    attained: f64,
    targets: BinaryHeap<Reverse<Target>>,
    next_arrival: f64,
    arrivals: u64,
    departures: u64,
    initial: usize,
    arrival_rng: ChaCha8Rng,
    service_rng: ChaCha8Rng,
    interarrival: Exp<f64>,
    dist: ServiceDistribution,
}

impl QueueState {
    /// Starts with the given residual service times at clock 0.
    pub fn new(dist: &ServiceDistribution, residuals: &[f64], seed: u64, replica: u64) -> Result<Self> {
        if let Some(x) = residuals.iter().find(|x| !(**x > 0.0)) {
            return Err(Error::InvalidArgument(format!("residual {x} must be positive")));
        }
        let interarrival = Exp::new(dist.alpha()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut arrival_rng = stream(seed, replica, Purpose::Arrivals);
        let next_arrival = interarrival.sample(&mut arrival_rng);
        Ok(Self {
            clock: 0.0,
            attained: 0.0,
            targets: residuals.iter().map(|&x| Reverse(Target(x))).collect(),
            next_arrival,
            arrivals: 0,
            departures: 0,
            initial: residuals.len(),
            arrival_rng,
            service_rng: stream(seed, replica, Purpose::Services),
            interarrival,
            dist: dist.clone(),
        })
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn arrivals(&self) -> u64 {
        self.arrivals
    }

    pub fn departures(&self) -> u64 {
        self.departures
    }

    pub fn initial_count(&self) -> usize {
        self.initial
    }

    pub fn next_arrival(&self) -> f64 {
        self.next_arrival
    }

    /// Residual service times of the jobs present (unordered).
    pub fn residuals(&self) -> Vec<f64> {
        self.targets
            .iter()
            .map(|Reverse(Target(x))| (x - self.attained).max(0.0))
            .collect()
    }

    /// Sum of residual service times.
    pub fn workload(&self) -> f64 {
        let sum: f64 = self.targets.iter().map(|Reverse(Target(x))| x).sum();
        (sum - self.attained * self.targets.len() as f64).max(0.0)
    }

    /// Clock time of the next departure if no arrival intervenes.
    pub fn next_departure(&self) -> f64 {
        match self.targets.peek() {
            None => f64::INFINITY,
            Some(Reverse(Target(x))) => self.clock + (x - self.attained).max(0.0) * self.targets.len() as f64,
        }
    }

    fn serve(&mut self, dt: f64) {
        let n = self.targets.len();
        if n > 0 {
            self.attained += dt / n as f64;
        }
        self.clock += dt;
    }

    /// Processes the next event if it happens no later than `horizon`;
    /// otherwise advances the clock to `horizon` and returns `None`.
    pub fn step(&mut self, horizon: f64) -> Option<Event> {
        let dep = self.next_departure();
        let arr = self.next_arrival;
        let next = dep.min(arr);
        if next > horizon {
            self.serve(horizon - self.clock);
            return None;
        }
        if dep <= arr {
            self.serve(next - self.clock);
            let Reverse(Target(x)) = self.targets.pop().unwrap();
            // the departing job's residual is exactly zero now
            self.attained = self.attained.max(x);
            self.departures += 1;
            Some(Event::Departure)
        } else {
            self.serve(next - self.clock);
            let service = self.dist.sample(&mut self.service_rng);
            self.targets.push(Reverse(Target(self.attained + service)));
            self.arrivals += 1;
            self.next_arrival = self.clock + self.interarrival.sample(&mut self.arrival_rng);
            Some(Event::Arrival { service })
        }
    }

    /// Runs all events up to `t` and leaves the clock at `t`.
    pub fn advance_to(&mut self, t: f64) {
        while self.step(t).is_some() {}
    }
}

/// Fluid-scaled snapshots of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub r: f64,
    pub seed: u64,
    pub replica: u64,
    pub snapshot_times: Vec<f64>,
    /// `(1/r)` times the empirical measure of residuals at clock `r t`.
    pub snapshots: Vec<GridMeasure>,
    /// Job count at each snapshot.
    pub counts: Vec<usize>,
    /// Unscaled workload (sum of residuals) at each snapshot.
    pub workloads: Vec<f64>,
}

/// Initial residuals: `⌊r ⟨1, ξ⟩⌋` i.i.d. draws from `ξ / ⟨1, ξ⟩`.
pub fn initial_residuals(xi: &GridMeasure, r: f64, seed: u64, replica: u64) -> Result<Vec<f64>> {
    let count = (r * xi.total_mass()).floor() as usize;
    let mut rng = stream(seed, replica, Purpose::Initial);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x = xi.sample(&mut rng)?;
        // a draw of exactly 0 has probability zero; skip it if rounding makes one
        if x > 0.0 {
            out.push(x);
        }
    }
    Ok(out)
}

const SNAPSHOT_ORDERS: [f64; 8] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0];

/// `(1/r)` times the empirical measure of `residuals` on `grid`; residuals
/// beyond `x_max` go to the tail with exact moments.
pub fn scaled_snapshot(residuals: &[f64], r: f64, grid: &GridParams) -> GridMeasure {
    let h = grid.h;
    let n = grid.x_cells();
    let x_max = n as f64 * h;
    let w = 1.0 / r;
    let mut masses = vec![0.0; n];
    let mut tail_mass = 0.0;
    let mut moments = [0.0; SNAPSHOT_ORDERS.len()];
    for &x in residuals {
        if x >= x_max {
            tail_mass += w;
            for (m, g) in moments.iter_mut().zip(SNAPSHOT_ORDERS) {
                *m += w * x.powf(g);
            }
        } else {
            masses[((x / h) as usize).min(n - 1)] += w;
        }
    }
    let mut cdf = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    cdf.push(0.0);
    for m in &masses {
        acc += m;
        cdf.push(acc);
    }
    let tail = if tail_mass == 0.0 {
        Tail::Empty
    } else {
        Tail::Table(
            SNAPSHOT_ORDERS
                .iter()
                .zip(moments)
                .map(|(&gamma, value)| TailEntry {
                    gamma,
                    value,
                    upper: value,
                })
                .collect(),
        )
    };
    GridMeasure::from_parts(h, cdf, tail_mass, tail)
}

/// One replica of the scaled queue.
pub fn simulate_replica(
    d: &ServiceDistribution,
    xi: &GridMeasure,
    r: f64,
    snapshot_times: &[f64],
    seed: u64,
    replica: u64,
    grid: &GridParams,
) -> Result<Trajectory> {
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::InvalidScale(r));
    }
    if snapshot_times.windows(2).any(|w| !(w[1] >= w[0])) || snapshot_times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidArgument(
            "snapshot times must be nonnegative and nondecreasing".into(),
        ));
    }
    let init = initial_residuals(xi, r, seed, replica)?;
    let mut q = QueueState::new(d, &init, seed, replica)?;
    let mut snapshots = Vec::with_capacity(snapshot_times.len());
    let mut counts = Vec::with_capacity(snapshot_times.len());
    let mut workloads = Vec::with_capacity(snapshot_times.len());
    for &t in snapshot_times {
        q.advance_to(r * t);
        let res = q.residuals();
        snapshots.push(scaled_snapshot(&res, r, grid));
        counts.push(res.len());
        workloads.push(q.workload());
    }
    Ok(Trajectory {
        r,
        seed,
        replica,
        snapshot_times: snapshot_times.to_vec(),
        snapshots,
        counts,
        workloads,
    })
}

/// Replica 0 of `seed`.
pub fn simulate(
    d: &ServiceDistribution,
    xi: &GridMeasure,
    r: f64,
    snapshot_times: &[f64],
    seed: u64,
    grid: &GridParams,
) -> Result<Trajectory> {
    simulate_replica(d, xi, r, snapshot_times, seed, 0, grid)
}

/// Replicas `0..replicas` in parallel, returned in replica order.
pub fn simulate_replicas(
    d: &ServiceDistribution,
    xi: &GridMeasure,
    r: f64,
    snapshot_times: &[f64],
    seed: u64,
    replicas: u64,
    grid: &GridParams,
) -> Result<Vec<Trajectory>> {
    (0..replicas)
        .into_par_iter()
        .map(|rep| simulate_replica(d, xi, r, snapshot_times, seed, rep, grid))
        .collect()
}

/// Sum of residuals.
pub fn workload_of(residuals: &[f64]) -> f64 {
    residuals.iter().sum()
}

/// `r ⟨χ, snapshot⟩` for a fluid-scaled snapshot.
pub fn workload_of_snapshot(snapshot: &GridMeasure, r: f64) -> Result<f64> {
    Ok(r * snapshot.mass_and_moment(1.0)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub t: f64,
    pub rho: f64,
    /// Present when neither measure has mass beyond the grid.
    pub tv: Option<f64>,
}

/// Distances between each snapshot and the fluid state at the same time.
pub fn compare_to_fluid(traj: &Trajectory, sol: &FluidSolution) -> Result<Vec<ComparisonRow>> {
    let mut out = Vec::with_capacity(traj.snapshots.len());
    for (t, snap) in traj.snapshot_times.iter().zip(&traj.snapshots) {
        let fluid = sol.measure_at(*t)?;
        if (fluid.h() - snap.h()).abs() > 1e-12 * fluid.h() || fluid.cells() != snap.cells() {
            return Err(Error::GridMismatch(format!(
                "snapshot grid ({}, {}) vs fluid grid ({}, {})",
                snap.h(),
                snap.x_max(),
                fluid.h(),
                fluid.x_max()
            )));
        }
        let rho = prohorov(snap, &fluid)?.value;
        let tv = if snap.tail_mass() == 0.0 && fluid.tail_mass() == 0.0 {
            Some(total_variation(snap, &fluid)?.value)
        } else {
            None
        };
        out.push(ComparisonRow { t: *t, rho, tv });
    }
    Ok(out)
}

/// Median in the order-statistics sense (mean of the middle pair).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Straightforward `O(n)`-per-event simulator driven by the same random
/// streams; serves as an oracle for the heap implementation.
pub mod reference {
    use super::*;

    pub fn residuals_at(
        d: &ServiceDistribution,
        init: &[f64],
        seed: u64,
        replica: u64,
        t_end: f64,
    ) -> Result<Vec<f64>> {
        let exp = Exp::new(d.alpha()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut arr_rng = stream(seed, replica, Purpose::Arrivals);
        let mut svc_rng = stream(seed, replica, Purpose::Services);
        let mut jobs = init.to_vec();
        let mut clock = 0.0;
        let mut next_arrival = exp.sample(&mut arr_rng);
        loop {
            let n = jobs.len();
            let (imin, rmin) =
                jobs.iter().enumerate().fold(
                    (usize::MAX, f64::INFINITY),
                    |acc, (i, &x)| if x < acc.1 { (i, x) } else { acc },
                );
            let dep = if n == 0 { f64::INFINITY } else { clock + rmin * n as f64 };
            let next = dep.min(next_arrival);
            if next > t_end {
                let dt = t_end - clock;
                if n > 0 {
                    for x in jobs.iter_mut() {
                        *x -= dt / n as f64;
                    }
                }
                return Ok(jobs);
            }
            let dt = next - clock;
            for x in jobs.iter_mut() {
                *x -= dt / n.max(1) as f64;
            }
            clock = next;
            if dep <= next_arrival {
                jobs.swap_remove(imin);
            } else {
                jobs.push(d.sample(&mut svc_rng));
                next_arrival = clock + exp.sample(&mut arr_rng);
            }
        }
    }
}

/// Draw helper shared by tests: a uniform on `(0, 1)`.
#[doc(hidden)]
pub fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::make_measure;

    fn exp1() -> ServiceDistribution {
        ServiceDistribution::exponential(1.0).unwrap()
    }

    fn uniform_xi(g: &GridParams) -> GridMeasure {
        make_measure(&"uniformdensity:a=0,b=2,mass=1".parse().unwrap(), None, g).unwrap()
    }

    #[test]
    fn deterministic_and_mass_exact() {
        let g = GridParams::new(0.01, 20.0, 20.0).unwrap();
        let xi = uniform_xi(&g);
        let a = simulate(&exp1(), &xi, 100.0, &[0.0, 0.5, 1.0], 7, &g).unwrap();
        let b = simulate(&exp1(), &xi, 100.0, &[0.0, 0.5, 1.0], 7, &g).unwrap();
        assert_eq!(a, b);
        for (snap, c) in a.snapshots.iter().zip(&a.counts) {
            assert!((snap.total_mass() - *c as f64 / 100.0).abs() < 1e-12);
        }
        assert_eq!(a.counts[0], 100);
        let c = simulate(&exp1(), &xi, 100.0, &[1.0], 8, &g).unwrap();
        assert_ne!(a.counts[2], 0);
        assert_ne!(a.snapshots[2], c.snapshots[0]);
    }

    #[test]
    fn invalid_scale() {
        let g = GridParams::default();
        let xi = uniform_xi(&g);
        assert_eq!(
            simulate(&exp1(), &xi, 0.5, &[1.0], 1, &g).unwrap_err(),
            Error::InvalidScale(0.5)
        );
    }

    #[test]
    fn empty_start() {
        let g = GridParams::default();
        let z = GridMeasure::zero(g.h, g.x_max);
        let tr = simulate(&exp1(), &z, 50.0, &[0.0], 1, &g).unwrap();
        assert_eq!(tr.counts[0], 0);
        assert_eq!(tr.workloads[0], 0.0);
    }

    #[test]
    fn event_bookkeeping() {
        let d = exp1();
        let mut q = QueueState::new(&d, &[0.5, 1.0, 2.0], 3, 0).unwrap();
        let mut last_work = q.workload();
        let mut last_clock = 0.0;
        for _ in 0..200 {
            let before = q.len();
            let horizon = q.clock() + 10.0;
            match q.step(horizon) {
                Some(Event::Arrival { service }) => {
                    assert_eq!(q.len(), before + 1);
                    let served = if before > 0 { q.clock() - last_clock } else { 0.0 };
                    assert!((q.workload() - (last_work - served + service)).abs() < 1e-9);
                }
                Some(Event::Departure) => {
                    assert_eq!(q.len(), before - 1);
                    assert!((q.workload() - (last_work - (q.clock() - last_clock))).abs() < 1e-9);
                }
                None => {}
            }
            assert!(q.residuals().iter().all(|&x| x >= 0.0));
            assert_eq!(q.len() as u64, q.initial_count() as u64 + q.arrivals() - q.departures());
            last_work = q.workload();
            last_clock = q.clock();
        }
    }

    #[test]
    fn matches_reference_simulator() {
        let d = ServiceDistribution::uniform(0.0, 2.0).unwrap();
        let init = [0.3, 1.2, 0.7, 2.5];
        for seed in 0..5 {
            let mut q = QueueState::new(&d, &init, seed, 1).unwrap();
            q.advance_to(40.0);
            let mut fast = q.residuals();
            let mut slow = reference::residuals_at(&d, &init, seed, 1, 40.0).unwrap();
            fast.sort_by(|a, b| a.total_cmp(b));
            slow.sort_by(|a, b| a.total_cmp(b));
            assert_eq!(fast.len(), slow.len());
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
