//! Ordered worker-pool map: items are claimed from a shared cursor by a
//! fixed number of threads and results are returned in input order, so the
//! output is independent of the worker count.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub fn ordered_map<T, U, F>(items: Vec<T>, workers: usize, f: F) -> Vec<U>
where
    T: Send + Sync,
    U: Send,
    F: Fn(&T) -> U + Send + Sync,
{
    let workers = workers.max(1).min(items.len().max(1));
    if workers == 1 {
        return items.iter().map(|item| f(item)).collect();
    }
    let cursor = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<U>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = cursor.fetch_add(1, Ordering::SeqCst);
                if idx >= items.len() {
                    break;
                }
                let out = f(&items[idx]);
                *results[idx].lock().expect("result slot poisoned") = Some(out);
            });
        }
    });
    results
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .expect("result slot poisoned")
                .expect("every slot filled")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_order_matches_input_order() {
        let items: Vec<u64> = (0..100).collect();
        let doubled = ordered_map(items.clone(), 8, |x| x * 2);
        assert_eq!(doubled, items.iter().map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let items: Vec<u64> = (0..50).collect();
        let one = ordered_map(items.clone(), 1, |x| x * x);
        let eight = ordered_map(items, 8, |x| x * x);
        assert_eq!(one, eight);
    }

    #[test]
    fn empty_input() {
        let out: Vec<u64> = ordered_map(Vec::<u64>::new(), 4, |x| *x);
        assert!(out.is_empty());
    }
}
