use crate::error::Result;
use lru::LruCache;
use std::hash::Hash;
use std::num::NonZeroUsize;

/// A fitter's answer: the parameters and whether they deserve to be memoized.
#[derive(Debug, Clone, PartialEq)]
pub struct Fitted<V> {
    pub value: V,
    pub store: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheOutcome {
    Hit,
    /// Fitted and stored.
    Stored,
    /// Fitted but not stored.
    Fitted,
}

/// Bounded least-recently-used memo from canonical expression keys to fitted
/// parameters. Entries are only ever reused, never refined.
pub struct ParamCache<K: Hash + Eq, V> {
    inner: LruCache<K, V>,
    hits: u64,
    misses: u64,
}

impl<K: Hash + Eq, V: Clone> ParamCache<K, V> {
    /// Default capacity (number of expressions).
    pub const DEFAULT_CAPACITY: usize = 10_000;

    pub fn new(capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).expect("capacity is at least one");
        Self {
            inner: LruCache::new(cap),
            hits: 0,
            misses: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.inner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.inner.cap().get()
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn contains(&self, key: &K) -> bool {
        self.inner.contains(key)
    }

    /// Looks up and refreshes recency.
    pub fn get(&mut self, key: &K) -> Option<&V> {
        self.inner.get(key)
    }

    pub fn insert(&mut self, key: K, value: V) {
        self.inner.put(key, value);
    }

    /// Returns the memoized value for `key`, or runs `fit` and stores its
    /// result when the fitter asks for it.
    pub fn get_or_fit<F>(&mut self, key: K, fit: F) -> Result<(V, CacheOutcome)>
    where
        F: FnOnce() -> Result<Fitted<V>>,
    {
        if let Some(v) = self.inner.get(&key) {
            self.hits += 1;
            return Ok((v.clone(), CacheOutcome::Hit));
        }
        self.misses += 1;
        let fitted = fit()?;
        if fitted.store {
            self.inner.put(key, fitted.value.clone());
            Ok((fitted.value, CacheOutcome::Stored))
        } else {
            Ok((fitted.value, CacheOutcome::Fitted))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evicts_least_recently_used() {
        let mut c = ParamCache::new(2);
        c.insert(1, "a");
        c.insert(2, "b");
        c.insert(3, "c");
        assert!(!c.contains(&1));
        assert!(c.contains(&2) && c.contains(&3));
    }

    #[test]
    fn hit_refreshes_recency() {
        let mut c = ParamCache::new(2);
        c.insert(1, "a");
        c.insert(2, "b");
        assert_eq!(c.get(&1), Some(&"a"));
        c.insert(3, "c");
        assert!(c.contains(&1));
        assert!(!c.contains(&2));
    }

    #[test]
    fn get_or_fit_skips_fitting_on_hit() {
        let mut c = ParamCache::new(4);
        let mut calls = 0;
        let mut fit = || {
            calls += 1;
            Ok(Fitted {
                value: 7,
                store: true,
            })
        };
        assert_eq!(c.get_or_fit("k", &mut fit).unwrap(), (7, CacheOutcome::Stored));
        assert_eq!(c.get_or_fit("k", &mut fit).unwrap(), (7, CacheOutcome::Hit));
        assert_eq!(calls, 1);
        assert_eq!((c.hits(), c.misses()), (1, 1));
    }

    #[test]
    fn unstored_fits_are_not_memoized() {
        let mut c = ParamCache::new(4);
        let fit = || {
            Ok(Fitted {
                value: 1,
                store: false,
            })
        };
        assert_eq!(c.get_or_fit("k", fit).unwrap().1, CacheOutcome::Fitted);
        assert!(c.is_empty());
    }

    #[test]
    fn size_never_exceeds_capacity() {
        let mut c = ParamCache::new(10_000);
        for i in 0..25_000u64 {
            c.insert(i.wrapping_mul(2654435761) % 30_000, i);
            assert!(c.len() <= 10_000);
        }
    }
}
