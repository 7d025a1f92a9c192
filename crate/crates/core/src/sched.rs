//! Component tasks and the two ways of driving them.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::trace::Clock;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Poll {
    /// Handled one item.
    Busy,
    /// Nothing to do right now.
    Idle,
    /// Finished for good; the scheduler drops it.
    Done,
}

/// A reactive component consuming its own queue, one item per poll.
pub trait Task: Send {
    fn label(&self) -> String;
    fn poll(&mut self) -> Poll;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RoundStats {
    pub busy: usize,
    pub idle: usize,
    pub finished: usize,
}

/// Seeded round-robin driver: each round polls every live task once, in an
/// order drawn from the seeded generator. The clock holds the round number.
pub struct Scheduler {
    tasks: Vec<Box<dyn Task>>,
    rng: ChaCha8Rng,
    clock: Clock,
    round: u64,
}

impl Scheduler {
    pub fn new(seed: u64, clock: Clock) -> Self {
        Scheduler { tasks: Vec::new(), rng: ChaCha8Rng::seed_from_u64(seed), clock, round: 0 }
    }

    pub fn spawn(&mut self, task: Box<dyn Task>) {
        self.tasks.push(task);
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.tasks.iter().map(|t| t.label()).collect()
    }

    pub fn rounds(&self) -> u64 {
        self.round
    }

    pub fn round(&mut self) -> RoundStats {
        self.round += 1;
        self.clock.set(self.round);
        let mut order: Vec<usize> = (0..self.tasks.len()).collect();
        order.shuffle(&mut self.rng);
        let mut stats = RoundStats::default();
        let mut done = vec![false; self.tasks.len()];
        for i in order {
            match self.tasks[i].poll() {
                Poll::Busy => stats.busy += 1,
                Poll::Idle => stats.idle += 1,
                Poll::Done => {
                    stats.finished += 1;
                    done[i] = true;
                }
            }
        }
        let mut i = 0;
        self.tasks.retain(|_| {
            let keep = !done[i];
            i += 1;
            keep
        });
        stats
    }

    /// Runs rounds until one passes with no task busy, or `max_rounds` elapse.
    /// Returns the number of rounds run.
    pub fn run_until_quiet(&mut self, max_rounds: u64) -> u64 {
        let start = self.round;
        while self.round - start < max_rounds {
            if self.round().busy == 0 {
                break;
            }
        }
        self.round - start
    }

    /// Hands every task its own thread until `stop` is raised, then joins them
    /// and keeps the tasks that had not finished.
    pub fn run_threaded(&mut self, stop: Arc<AtomicBool>, idle_sleep: Duration) {
        let tasks = std::mem::take(&mut self.tasks);
        let handles: Vec<_> = tasks
            .into_iter()
            .map(|mut task| {
                let stop = Arc::clone(&stop);
                let clock = self.clock.clone();
                thread::Builder::new()
                    .name(task.label())
                    .spawn(move || {
                        while !stop.load(Ordering::SeqCst) {
                            match task.poll() {
                                Poll::Busy => {
                                    clock.advance();
                                }
                                Poll::Idle => thread::sleep(idle_sleep),
                                Poll::Done => return None,
                            }
                        }
                        Some(task)
                    })
                    .expect("spawn task thread")
            })
            .collect();
        for h in handles {
            if let Ok(Some(task)) = h.join() {
                self.tasks.push(task);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use parking_lot::Mutex;

    struct Counter {
        name: &'static str,
        left: usize,
        log: Arc<Mutex<Vec<&'static str>>>,
    }

    impl Task for Counter {
        fn label(&self) -> String {
            self.name.into()
        }
        fn poll(&mut self) -> Poll {
            if self.left == 0 {
                return Poll::Done;
            }
            self.left -= 1;
            self.log.lock().push(self.name);
            Poll::Busy
        }
    }

    fn run(seed: u64) -> Vec<&'static str> {
        let log = Arc::new(Mutex::new(Vec::new()));
        let mut s = Scheduler::new(seed, Clock::default());
        for name in ["a", "b", "c", "d"] {
            s.spawn(Box::new(Counter { name, left: 3, log: Arc::clone(&log) }));
        }
        s.run_until_quiet(100);
        assert!(s.is_empty());
        let v = log.lock().clone();
        v
    }

    #[test]
    fn same_seed_same_interleaving() {
        assert_eq!(run(7), run(7));
        assert_eq!(run(7).len(), 12);
    }

    #[test]
    fn every_task_polled_once_per_round() {
        let log = run(3);
        for chunk in log.chunks(4) {
            let mut c = chunk.to_vec();
            c.sort();
            assert_eq!(c, vec!["a", "b", "c", "d"]);
        }
    }

    #[test]
    fn threaded_mode_stops_on_flag() {
        let log = Arc::new(Mutex::new(Vec::new()));
        let mut s = Scheduler::new(0, Clock::default());
        s.spawn(Box::new(Counter { name: "a", left: 5, log: Arc::clone(&log) }));
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let watcher = thread::spawn(move || {
            thread::sleep(Duration::from_millis(50));
            flag.store(true, Ordering::SeqCst);
        });
        s.run_threaded(stop, Duration::from_millis(1));
        watcher.join().unwrap();
        assert_eq!(log.lock().len(), 5);
    }
}
