//! Shard-parallel helpers over `std::thread::scope`.

/// Splits `items` into at most `shards` contiguous chunks, applies `f` to
/// each on its own thread, and returns the results in chunk order.
pub fn map_shards<T, U, F>(items: &[T], shards: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&[T]) -> U + Sync,
{
    let shards = shards.clamp(1, items.len().max(1));
    if shards == 1 {
        return vec![f(items)];
    }
    let size = items.len().div_ceil(shards);
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(size).map(|c| s.spawn(|| f(c))).collect();
        handles.into_iter().map(|h| h.join().expect("shard worker panicked")).collect()
    })
}

/// Worker count for the host.
pub fn default_shards() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
