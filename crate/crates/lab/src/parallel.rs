//! Replica-parallel execution with worker-count-independent results.
//!
//! Replicas are partitioned across workers by stride; each worker returns
//! its results tagged with the replica index, and the caller receives one
//! vector ordered by replica. Because every replica derives its randomness
//! from its own index and the reduction happens sequentially in replica
//! order, the assembled output is bit-identical for any worker count.

/// Runs `task(r)` for `r in 0..reps` across `workers` threads and returns
/// the results in replica order.
pub fn run_replicas<T, F>(reps: usize, workers: usize, task: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if workers <= 1 || reps <= 1 {
        return (0..reps).map(task).collect();
    }
    let workers = workers.min(reps);
    let mut slots: Vec<Option<T>> = (0..reps).map(|_| None).collect();
    std::thread::scope(|scope| {
        let task = &task;
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    let mut out = Vec::new();
                    let mut r = w;
                    while r < reps {
                        out.push((r, task(r)));
                        r += workers;
                    }
                    out
                })
            })
            .collect();
        for handle in handles {
            for (r, value) in handle.join().expect("replica worker panicked") {
                slots[r] = Some(value);
            }
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.expect("every replica index is covered by exactly one worker"))
        .collect()
}
