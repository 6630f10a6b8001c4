//! Fixed-size worker pool with one queue per worker.
//!
//! Workers are spawned once and reused for every batch of a run. Tasks are
//! addressed to a specific worker, which keeps schedules (and therefore
//! per-worker access traces) reproducible. A panicking task aborts the whole
//! process after printing a diagnostic; results of half-trained members are
//! never observable.

use std::panic::{self, AssertUnwindSafe};
use std::sync::mpsc::{self, Receiver, Sender};
use std::thread::JoinHandle;

use crate::error::{Error, Result};

pub type Task = Box<dyn FnOnce() + Send + 'static>;

enum Msg {
    Run(Task),
    Shutdown,
}

pub struct FixedPool {
    senders: Vec<Sender<Msg>>,
    handles: Vec<JoinHandle<()>>,
}

impl FixedPool {
    /// Spawns `threads` workers. With `pin_cores` each worker is pinned to
    /// core `index % cores` where the platform allows it (best effort).
    pub fn new(threads: usize, pin_cores: bool) -> Result<Self> {
        if threads == 0 {
            return Err(Error::domain("a worker pool needs at least one thread"));
        }
        let mut senders = Vec::with_capacity(threads);
        let mut handles = Vec::with_capacity(threads);
        for index in 0..threads {
            let (tx, rx) = mpsc::channel::<Msg>();
            let handle = std::thread::Builder::new()
                .name(format!("streambag-worker-{index}"))
                .spawn(move || {
                    if pin_cores {
                        pin_to_core(index);
                    }
                    worker_loop(index, rx);
                })?;
            senders.push(tx);
            handles.push(handle);
        }
        Ok(FixedPool { senders, handles })
    }

    pub fn threads(&self) -> usize {
        self.senders.len()
    }

    /// Enqueues a task on one worker's queue; tasks on the same worker run in
    /// submission order.
    pub fn submit(&self, worker: usize, task: Task) {
        self.senders[worker].send(Msg::Run(task)).expect("worker queue closed unexpectedly");
    }
}

impl Drop for FixedPool {
    fn drop(&mut self) {
        for tx in &self.senders {
            let _ = tx.send(Msg::Shutdown);
        }
        for handle in self.handles.drain(..) {
            let _ = handle.join();
        }
    }
}

fn worker_loop(index: usize, rx: Receiver<Msg>) {
    while let Ok(msg) = rx.recv() {
        match msg {
            Msg::Run(task) => {
                if panic::catch_unwind(AssertUnwindSafe(task)).is_err() {
                    eprintln!("streambag worker {index} panicked, aborting the run");
                    std::process::abort();
                }
            }
            Msg::Shutdown => break,
        }
    }
}

/// Runs `tasks` to completion across the pool (fork, compute, join). Task `i`
/// goes to worker `i % threads`; each task receives its worker index. Results
/// come back in task order.
pub fn pool_execute<R, F>(pool: &FixedPool, tasks: Vec<F>) -> Vec<R>
where
    R: Send + 'static,
    F: FnOnce(usize) -> R + Send + 'static,
{
    let threads = pool.threads();
    let n = tasks.len();
    let (tx, rx) = mpsc::channel();
    for (i, task) in tasks.into_iter().enumerate() {
        let worker = i % threads;
        let tx = tx.clone();
        pool.submit(
            worker,
            Box::new(move || {
                let out = task(worker);
                let _ = tx.send((i, out));
            }),
        );
    }
    drop(tx);
    let mut results: Vec<Option<R>> = (0..n).map(|_| None).collect();
    for _ in 0..n {
        let (i, r) = rx.recv().expect("a worker stopped before completing its tasks");
        results[i] = Some(r);
    }
    results.into_iter().map(|r| r.expect("every task reports exactly once")).collect()
}

#[cfg(target_os = "linux")]
fn pin_to_core(worker: usize) {
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    // best effort: failures (cgroup limits, permissions) are ignored
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_SET(worker % cores, &mut set);
        libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set);
    }
}

#[cfg(not(target_os = "linux"))]
fn pin_to_core(_worker: usize) {}
