//! Bounded worker threads with order-preserving results.
//!
//! `OGN_THREADS` caps the worker count for every parallel section in the
//! library. Results are always collected in input order and reduced serially,
//! so thread count never changes numerical output.

/// Worker cap from `OGN_THREADS`, falling back to available parallelism.
pub fn thread_count() -> usize {
    match std::env::var("OGN_THREADS") {
        Ok(v) => v.parse::<usize>().ok().filter(|&n| n > 0).unwrap_or(1),
        Err(_) => std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1),
    }
}

/// Map `f` over `items`, possibly on several threads, returning outputs in
/// input order. `f` must be pure for the determinism contract to hold.
pub fn map_ordered<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let threads = threads.max(1).min(items.len().max(1));
    if threads == 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let mut out: Vec<Option<R>> = Vec::with_capacity(items.len());
    out.resize_with(items.len(), || None);
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let f = &f;
        for (slot_chunk, item_chunk) in out.chunks_mut(chunk).zip(items.chunks(chunk)) {
            scope.spawn(move || {
                for (slot, item) in slot_chunk.iter_mut().zip(item_chunk) {
                    *slot = Some(f(item));
                }
            });
        }
    });
    out.into_iter().map(|r| r.expect("worker filled slot")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_input_order() {
        let items: Vec<u64> = (0..97).collect();
        let one = map_ordered(&items, 1, |x| x * 3);
        let many = map_ordered(&items, 4, |x| x * 3);
        assert_eq!(one, many);
        assert_eq!(one[10], 30);
    }
}
