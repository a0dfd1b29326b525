use rayon::prelude::*;

pub const THREADS_VAR: &str = "SSNMF_THREADS";

/// Worker cap from `SSNMF_THREADS`; unset, `0` or unparsable means sequential.
pub fn worker_count() -> usize {
    std::env::var(THREADS_VAR).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(0)
}

/// Maps `f` over `items`, keeping input order in the output regardless of the
/// worker count.
pub fn ordered_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let items: Vec<u64> = (0..200).collect();
        let seq = ordered_map(&items, 0, |v| v * v);
        assert_eq!(ordered_map(&items, 4, |v| v * v), seq);
        assert_eq!(seq[13], 169);
    }
}
