//! The two-queue scheduler: events wait in `UnExec` until every dependency
//! has finished, then move to `Exec`, from which workers take them.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use super::{DepError, DepGraph};

/// Timing of one schedule run, indexed by window position.
#[derive(Clone, Debug, Default)]
pub struct ScheduleTrace {
    /// Event indices in the order they started.
    pub order: Vec<usize>,
    pub start: Vec<Duration>,
    pub end: Vec<Duration>,
    pub worker: Vec<usize>,
}

struct State {
    // Unfinished dependency count per event; events with a non-zero count
    // form UnExec.
    pending: Vec<usize>,
    exec: BinaryHeap<Reverse<usize>>,
    running: usize,
    done: usize,
    error: Option<crate::Error>,
    trace: ScheduleTrace,
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".to_string()
    }
}

fn run_one<F>(exec: &F, i: usize, seq: usize) -> crate::Result<()>
where
    F: Fn(usize) -> crate::Result<()> + Sync,
{
    match catch_unwind(AssertUnwindSafe(|| exec(i))) {
        Ok(r) => r,
        Err(p) => Err(DepError::ExecutorPanic { seq, message: panic_message(p) }.into()),
    }
}

/// Core scheduler over an arbitrary DAG. `preds[i]` must finish before `i`
/// starts; `succs` is the reverse relation. Ready events are taken in the
/// order of `rank` (smallest first), so one worker follows `rank` exactly.
fn execute<F>(
    preds: &[&[usize]],
    succs: &[&[usize]],
    rank: impl Fn(usize) -> usize + Sync,
    seq_of: impl Fn(usize) -> usize + Sync,
    workers: usize,
    exec: F,
) -> crate::Result<ScheduleTrace>
where
    F: Fn(usize) -> crate::Result<()> + Sync,
{
    let n = preds.len();
    if workers == 0 {
        return Err(DepError::ZeroWorkers.into());
    }
    let t0 = Instant::now();
    let mut trace = ScheduleTrace {
        order: Vec::with_capacity(n),
        start: vec![Duration::ZERO; n],
        end: vec![Duration::ZERO; n],
        worker: vec![0; n],
    };

    if workers == 1 || !crate::parallel::enabled() || n <= 1 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| rank(i));
        for i in order {
            trace.order.push(i);
            trace.start[i] = t0.elapsed();
            run_one(&exec, i, seq_of(i))?;
            trace.end[i] = t0.elapsed();
        }
        return Ok(trace);
    }

    let pending: Vec<usize> = preds.iter().map(|p| p.len()).collect();
    let mut exec_q = BinaryHeap::new();
    for (i, &p) in pending.iter().enumerate() {
        if p == 0 {
            exec_q.push(Reverse(rank(i)));
        }
    }
    // rank -> index
    let mut by_rank = vec![0; n];
    for i in 0..n {
        by_rank[rank(i)] = i;
    }
    let state = Mutex::new(State { pending, exec: exec_q, running: 0, done: 0, error: None, trace });
    let cv = Condvar::new();

    crate::parallel::run_workers(workers, |w| {
        let mut st = state.lock().unwrap_or_else(|e| e.into_inner());
        loop {
            if st.error.is_some() || st.done == n {
                break;
            }
            let Some(Reverse(r)) = st.exec.pop() else {
                if st.running == 0 {
                    let (done, total) = (st.done, n);
                    st.error = Some(DepError::Stalled { done, total }.into());
                    cv.notify_all();
                    break;
                }
                st = cv.wait(st).unwrap_or_else(|e| e.into_inner());
                continue;
            };
            let i = by_rank[r];
            st.running += 1;
            st.trace.order.push(i);
            st.trace.start[i] = t0.elapsed();
            st.trace.worker[i] = w;
            drop(st);

            let result = run_one(&exec, i, seq_of(i));

            st = state.lock().unwrap_or_else(|e| e.into_inner());
            st.running -= 1;
            st.trace.end[i] = t0.elapsed();
            match result {
                Ok(()) => {
                    st.done += 1;
                    for &s in succs[i] {
                        st.pending[s] -= 1;
                        if st.pending[s] == 0 {
                            st.exec.push(Reverse(rank(s)));
                        }
                    }
                }
                Err(e) => {
                    if st.error.is_none() {
                        st.error = Some(e);
                    }
                }
            }
            cv.notify_all();
        }
    });

    let st = state.into_inner().unwrap_or_else(|e| e.into_inner());
    match st.error {
        Some(e) => Err(e),
        None => Ok(st.trace),
    }
}

/// Executes every event of `graph` once, each only after all its
/// dependencies finished. With one worker the order is the window order.
/// The first executor error (or panic) stops the run and is returned.
pub fn run_schedule<F>(graph: &DepGraph, workers: usize, exec: F) -> crate::Result<ScheduleTrace>
where
    F: Fn(usize) -> crate::Result<()> + Sync,
{
    let preds: Vec<&[usize]> = (0..graph.len()).map(|i| graph.deps(i)).collect();
    let succs: Vec<&[usize]> = (0..graph.len()).map(|i| graph.dependents(i)).collect();
    execute(&preds, &succs, |i| i, |i| graph.seq(i), workers, exec)
}

/// Like [`run_schedule`] with every edge reversed: an event runs only after
/// all events depending on it finished. One worker runs the window back to
/// front. Used for the backward pass.
pub fn run_schedule_reverse<F>(graph: &DepGraph, workers: usize, exec: F) -> crate::Result<ScheduleTrace>
where
    F: Fn(usize) -> crate::Result<()> + Sync,
{
    let n = graph.len();
    let preds: Vec<&[usize]> = (0..n).map(|i| graph.dependents(i)).collect();
    let succs: Vec<&[usize]> = (0..n).map(|i| graph.deps(i)).collect();
    execute(&preds, &succs, |i| n - 1 - i, |i| graph.seq(i), workers, exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deps::{DepMode, DepSearch};
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn chain_and_free() -> DepGraph {
        // 0 <- 2 <- 3, 1 free.
        DepGraph::from_sets(
            vec![0, 1, 2, 3],
            vec![vec![1], vec![9], vec![1, 2], vec![2]],
            vec![vec![1], vec![9], vec![2], vec![2]],
            DepMode::Paper,
            DepSearch::Scan,
        )
    }

    #[test]
    fn single_worker_follows_window_order() {
        let g = chain_and_free();
        let order = Mutex::new(Vec::new());
        run_schedule(&g, 1, |i| {
            order.lock().unwrap().push(i);
            Ok(())
        })
        .unwrap();
        assert_eq!(*order.lock().unwrap(), vec![0, 1, 2, 3]);
        let order = Mutex::new(Vec::new());
        run_schedule_reverse(&g, 1, |i| {
            order.lock().unwrap().push(i);
            Ok(())
        })
        .unwrap();
        assert_eq!(*order.lock().unwrap(), vec![3, 2, 1, 0]);
    }

    #[test]
    fn parallel_respects_dependencies() {
        let g = chain_and_free();
        for workers in [2, 3, 4] {
            let count = AtomicUsize::new(0);
            let trace = run_schedule(&g, workers, |_| {
                count.fetch_add(1, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(2));
                Ok(())
            })
            .unwrap();
            assert_eq!(count.load(Ordering::SeqCst), 4);
            for i in 0..g.len() {
                for &j in g.deps(i) {
                    assert!(trace.start[i] >= trace.end[j], "event {i} started before {j} finished");
                }
            }
        }
    }

    #[test]
    fn panics_and_errors_surface() {
        let g = chain_and_free();
        for workers in [1, 3] {
            let err = run_schedule(&g, workers, |i| {
                if i == 2 {
                    panic!("boom");
                }
                Ok(())
            })
            .unwrap_err();
            assert!(err.to_string().contains("boom"), "{err}");
        }
        assert!(run_schedule(&g, 0, |_| Ok(())).is_err());
    }
}
