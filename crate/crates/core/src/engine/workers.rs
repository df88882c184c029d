//! Simulated worker pool for system-driven delays.
//!
//! Each worker repeatedly reads the server's current version, spends a
//! service time computing a gradient, and delivers it. The server applies an
//! update once it holds the required number of gradients. Events are ordered
//! by `(time, worker_id)`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::cmp::Reverse;

use rand_distr::{Distribution, Exp, Gamma};

use crate::delay::ServiceModel;
use crate::rng::binomial;
use crate::SimRng;

/// A gradient delivered to the server.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delivery {
    pub worker: usize,
    /// Version the worker read before computing.
    pub version: usize,
    /// Virtual time the worker read it.
    pub read_at: f64,
    pub delivered_at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    time: f64,
    worker: usize,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.worker.cmp(&other.worker))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
struct Worker {
    rate: f64,
    version: usize,
    read_at: f64,
}

/// Batches at least this large are collected by sampling the superposed
/// arrival process directly when service times are memoryless.
const AGGREGATE_THRESHOLD: u64 = 1024;

#[derive(Debug, Clone)]
pub struct WorkerPool {
    workers: Vec<Worker>,
    service: ServiceModel,
    queue: BinaryHeap<Reverse<Event>>,
    clock: f64,
    parked: Option<usize>,
    exact_events: bool,
    rng: SimRng,
}

impl WorkerPool {
    /// All workers read version 0 at time 0. Per-worker rates come from `rng`.
    ///
    /// `exact_events` forces event-by-event simulation even for very large
    /// batches.
    pub fn new(n: usize, service: ServiceModel, mut rng: SimRng, exact_events: bool) -> Self {
        let workers = (0..n)
            .map(|w| Worker {
                rate: match &service {
                    ServiceModel::GammaExp { shape, rate, .. } => Gamma::new(*shape, 1.0 / rate)
                        .expect("validated")
                        .sample(&mut rng),
                    ServiceModel::Fixed { times } => 1.0 / times[w],
                },
                version: 0,
                read_at: 0.0,
            })
            .collect();
        let mut pool = Self {
            workers,
            service,
            queue: BinaryHeap::new(),
            clock: 0.0,
            parked: None,
            exact_events,
            rng,
        };
        for w in 0..n {
            let t = pool.service_time(w);
            pool.queue.push(Reverse(Event { time: t, worker: w }));
        }
        pool
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn rates(&self) -> Vec<f64> {
        self.workers.iter().map(|w| w.rate).collect()
    }

    fn memoryless(&self) -> bool {
        matches!(self.service, ServiceModel::GammaExp { redraw: false, .. })
    }

    fn service_time(&mut self, w: usize) -> f64 {
        match &self.service {
            ServiceModel::Fixed { times } => times[w],
            ServiceModel::GammaExp { shape, rate, redraw } => {
                let lambda = if *redraw {
                    Gamma::new(*shape, 1.0 / rate)
                        .expect("validated")
                        .sample(&mut self.rng)
                } else {
                    self.workers[w].rate
                };
                Exp::new(lambda).expect("positive rate").sample(&mut self.rng)
            }
        }
    }

    /// Pops deliveries until `need` gradients are in hand. Every delivering
    /// worker immediately reads `current` and starts again, except the one
    /// completing the batch, which waits for the update.
    pub fn collect_events(&mut self, current: usize, need: u64) -> Vec<Delivery> {
        assert!(self.parked.is_none(), "call after_update between batches");
        let mut out = Vec::with_capacity(need as usize);
        for i in 0..need {
            let Reverse(ev) = self.queue.pop().expect("workers are always busy");
            self.clock = ev.time;
            let w = &mut self.workers[ev.worker];
            out.push(Delivery {
                worker: ev.worker,
                version: w.version,
                read_at: w.read_at,
                delivered_at: ev.time,
            });
            if i + 1 == need {
                self.parked = Some(ev.worker);
            } else {
                w.version = current;
                w.read_at = ev.time;
                let t = ev.time + self.service_time(ev.worker);
                self.queue.push(Reverse(Event {
                    time: t,
                    worker: ev.worker,
                }));
            }
        }
        out
    }

    /// Gradient counts per version read, for a batch of `need` at server
    /// version `current`.
    pub fn collect(&mut self, current: usize, need: u64) -> BTreeMap<usize, u64> {
        if need >= AGGREGATE_THRESHOLD && self.memoryless() && !self.exact_events {
            return self.collect_aggregated(current, need);
        }
        let mut counts = BTreeMap::new();
        for d in self.collect_events(current, need) {
            *counts.entry(d.version).or_insert(0) += 1;
        }
        counts
    }

    /// Same law as [`collect_events`](Self::collect_events) for exponential
    /// service with fixed rates: deliveries form independent Poisson streams,
    /// so the batch time is `Gamma(need, 1/sum(rates))`, per-worker counts are
    /// multinomial, and residual service times are fresh exponentials.
    fn collect_aggregated(&mut self, current: usize, need: u64) -> BTreeMap<usize, u64> {
        assert!(self.parked.is_none(), "call after_update between batches");
        let total: f64 = self.workers.iter().map(|w| w.rate).sum();
        let elapsed = Gamma::new(need as f64, 1.0 / total)
            .expect("positive")
            .sample(&mut self.rng);
        let mut per_worker = vec![0u64; self.workers.len()];
        let mut remaining = need;
        let mut mass = total;
        let n = self.workers.len();
        for (w, worker) in self.workers.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            let c = if w + 1 == n {
                remaining
            } else {
                binomial(remaining, (worker.rate / mass).clamp(0.0, 1.0), &mut self.rng)
            };
            per_worker[w] = c;
            remaining -= c;
            mass -= worker.rate;
        }
        // The last arrival is equally likely to be any of the `need` arrivals.
        let mut pick = rand::Rng::random_range(&mut self.rng, 0..need);
        let mut last = 0;
        for (w, c) in per_worker.iter().enumerate() {
            if pick < *c {
                last = w;
                break;
            }
            pick -= c;
        }

        self.clock += elapsed;
        let mut counts = BTreeMap::new();
        for (w, &c) in per_worker.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let worker = &mut self.workers[w];
            *counts.entry(worker.version).or_insert(0) += 1;
            if c > 1 {
                *counts.entry(current).or_insert(0) += c - 1;
            }
            worker.version = current;
            worker.read_at = self.clock;
        }
        self.parked = Some(last);
        self.queue.clear();
        for w in 0..n {
            if w != last {
                let t = self.clock + self.service_time(w);
                self.queue.push(Reverse(Event { time: t, worker: w }));
            }
        }
        counts
    }

    /// The worker that completed the batch reads the freshly updated version.
    pub fn after_update(&mut self, new_version: usize) {
        if let Some(w) = self.parked.take() {
            self.workers[w].version = new_version;
            self.workers[w].read_at = self.clock;
            let t = self.clock + self.service_time(w);
            self.queue.push(Reverse(Event { time: t, worker: w }));
        }
    }

    /// A synchronous round: `need` fresh gradients split as evenly as
    /// possible across the workers, each computing its share back to back.
    /// Returns the elapsed time, the slowest worker's total.
    ///
    /// Synchronous rounds use their own clock; the asynchronous queue is untouched.
    pub fn sync_round(&mut self, need: u64) -> f64 {
        let n = self.workers.len() as u64;
        let mut slowest: f64 = 0.0;
        for w in 0..self.workers.len() {
            let share = need / n + u64::from((w as u64) < need % n);
            let t = match &self.service {
                ServiceModel::GammaExp { redraw: false, .. } if share > 0 => {
                    Gamma::new(share as f64, 1.0 / self.workers[w].rate)
                        .expect("positive")
                        .sample(&mut self.rng)
                }
                _ => (0..share).map(|_| self.service_time(w)).sum(),
            };
            slowest = slowest.max(t);
        }
        self.clock += slowest;
        slowest
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn fixed(times: Vec<f64>) -> WorkerPool {
        WorkerPool::new(
            times.len(),
            ServiceModel::Fixed { times },
            stream(0, 3),
            true,
        )
    }

    fn gamma_pool(n: usize, seed: u64, exact: bool) -> WorkerPool {
        WorkerPool::new(n, ServiceModel::default(), stream(seed, 3), exact)
    }

    #[test]
    fn single_worker_never_stale() {
        let mut p = gamma_pool(1, 5, true);
        for k in 0..200 {
            let d = p.collect_events(k, 1);
            assert_eq!(d[0].version, k);
            p.after_update(k + 1);
        }
    }

    #[test]
    fn identical_workers_are_at_most_n_minus_one_stale() {
        let mut p = fixed(vec![1.0; 10]);
        let mut delays = Vec::new();
        for k in 0..200 {
            let d = p.collect_events(k, 1)[0];
            delays.push(k - d.version);
            p.after_update(k + 1);
        }
        assert!(delays.iter().all(|d| *d <= 9));
        assert!(delays[20..].iter().all(|d| *d == 9));
    }

    #[test]
    fn staleness_counts_updates_since_the_read() {
        // Heterogeneous speeds: a slow worker can miss many updates, but its
        // delay is exactly the number of updates applied strictly between its
        // read and its delivery.
        let mut p = gamma_pool(10, 8, true);
        let mut update_times: Vec<f64> = Vec::new();
        let mut max = 0;
        for k in 0..3000 {
            let d = p.collect_events(k, 1)[0];
            assert!(d.read_at <= d.delivered_at);
            let between = update_times
                .iter()
                .filter(|t| **t > d.read_at && **t < d.delivered_at)
                .count();
            assert_eq!(k - d.version, between);
            max = max.max(between);
            update_times.push(d.delivered_at);
            p.after_update(k + 1);
        }
        assert!(max > 9, "heterogeneous workers should exceed N - 1, got {max}");
    }

    #[test]
    fn deterministic_round_robin() {
        // Times 1, 2, 3. Hand simulation, one gradient per update:
        // t=1 w0 (read v0, at v0) -> update 1, w0 reads v1, next at 2
        // t=2 w0 (v1, at v1) -> update 2; w1 also at t=2 (v0, at v2), tie broken by id
        // t=2 w1 -> update 3, w1 reads v3, next at 4
        // t=3 w0 (v2) -> update 4; w2 also at t=3 (v0)
        // t=3 w2 (v0, at v4) -> update 5
        let mut p = fixed(vec![1.0, 2.0, 3.0]);
        let mut seen = Vec::new();
        for k in 0..5 {
            let d = p.collect_events(k, 1)[0];
            seen.push((d.worker, d.delivered_at, k - d.version));
            p.after_update(k + 1);
        }
        assert_eq!(
            seen,
            vec![(0, 1.0, 0), (0, 2.0, 0), (1, 2.0, 2), (0, 3.0, 1), (2, 3.0, 4)]
        );
    }

    #[test]
    fn clock_is_monotone() {
        let mut p = gamma_pool(4, 1, true);
        let mut last = 0.0;
        for k in 0..500 {
            for d in p.collect_events(k, 3) {
                assert!(d.delivered_at >= last);
                assert!(d.version <= k);
                last = d.delivered_at;
            }
            p.after_update(k + 1);
        }
    }

    #[test]
    fn aggregated_collection_matches_event_loop_in_law() {
        // Mean staleness and time per batch agree between the two routes.
        let (mut ev_delay, mut ag_delay, mut ev_time, mut ag_time) = (0.0, 0.0, 0.0, 0.0);
        let need = 2000u64;
        let runs = 40;
        for seed in 0..runs {
            for (exact, delay, time) in [
                (true, &mut ev_delay, &mut ev_time),
                (false, &mut ag_delay, &mut ag_time),
            ] {
                let mut p = gamma_pool(10, seed, exact);
                // shared rates: both pools draw rates first from the same stream
                for k in 0..5 {
                    let c = p.collect(k, need);
                    if k == 4 {
                        let stale: u64 = c.iter().map(|(v, n)| (k - v) as u64 * n).sum();
                        *delay += stale as f64 / need as f64;
                    }
                    p.after_update(k + 1);
                }
                *time += p.clock();
            }
        }
        let r = runs as f64;
        assert!((ev_time / r - ag_time / r).abs() / (ev_time / r) < 0.02, "{ev_time} {ag_time}");
        assert!((ev_delay - ag_delay).abs() / r < 0.002, "{ev_delay} {ag_delay}");
    }

    #[test]
    fn sync_round_waits_for_slowest() {
        let mut p = fixed(vec![1.0, 2.0, 3.0]);
        // shares 4, 3, 3 -> times 4, 6, 9
        assert_eq!(p.sync_round(10), 9.0);
        assert_eq!(p.clock(), 9.0);
    }
}
