//! Keyed priority queue with replace-if-better enqueue semantics, and the
//! four update-ordering policies used by the selective-update solvers.
//!
//! Keys are ordered as a min-queue: `dequeue` returns the entry with the
//! smallest key, ties broken by the lowest index. An index appears at most
//! once; enqueueing an index that is already present replaces its key only
//! when the new key is strictly smaller.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum QueueError {
    #[error("dequeue from an empty queue")]
    Underflow,
}

/// Ordering rule for pending component updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyTag {
    /// Largest pending variation first.
    Variation,
    /// Smallest current value first (Dijkstra-like).
    Value,
    /// First inserted, first updated.
    Fifo,
    /// Last inserted, first updated.
    Lifo,
}

impl PolicyTag {
    pub const ALL: [PolicyTag; 4] = [
        PolicyTag::Variation,
        PolicyTag::Value,
        PolicyTag::Fifo,
        PolicyTag::Lifo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyTag::Variation => "variation",
            PolicyTag::Value => "value",
            PolicyTag::Fifo => "fifo",
            PolicyTag::Lifo => "lifo",
        }
    }
}

impl fmt::Display for PolicyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "variation" => Ok(PolicyTag::Variation),
            "value" => Ok(PolicyTag::Value),
            "fifo" => Ok(PolicyTag::Fifo),
            "lifo" => Ok(PolicyTag::Lifo),
            other => Err(format!("unknown policy `{other}`")),
        }
    }
}

/// Queue key for `policy` under min-order.
///
/// `value` is the current component value, `variation` the pending decrease
/// and `counter` the number of enqueue calls made so far in the run.
#[inline]
pub fn key_for(policy: PolicyTag, value: f64, variation: f64, counter: u64) -> f64 {
    match policy {
        PolicyTag::Variation => -variation,
        PolicyTag::Value => value,
        PolicyTag::Fifo => counter as f64,
        PolicyTag::Lifo => -(counter as f64),
    }
}

const ABSENT: usize = usize::MAX;

#[derive(Debug, Clone, Copy)]
struct Entry {
    index: usize,
    key: f64,
}

impl Entry {
    #[inline]
    fn before(&self, other: &Entry) -> bool {
        self.key < other.key || (self.key == other.key && self.index < other.index)
    }
}

/// Binary min-heap over `(index, key)` pairs with a position map, so that
/// key replacement is `O(log n)` and no stale entries are ever stored.
#[derive(Debug, Clone, Default)]
pub struct PolicyQueue {
    heap: Vec<Entry>,
    pos: Vec<usize>,
}

impl PolicyQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            heap: Vec::with_capacity(n),
            pos: vec![ABSENT; n],
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.pos.get(index).is_some_and(|&p| p != ABSENT)
    }

    /// Current key of `index`, if queued.
    pub fn key_of(&self, index: usize) -> Option<f64> {
        match self.pos.get(index) {
            Some(&p) if p != ABSENT => Some(self.heap[p].key),
            _ => None,
        }
    }

    /// Smallest entry without removing it.
    pub fn peek(&self) -> Option<(usize, f64)> {
        self.heap.first().map(|e| (e.index, e.key))
    }

    /// Inserts `(index, key)`, or lowers the key of an existing entry.
    /// Returns `true` when the queue changed.
    #[inline]
    pub fn enqueue(&mut self, index: usize, key: f64) -> bool {
        if index >= self.pos.len() {
            self.pos.resize(index + 1, ABSENT);
        }
        let p = self.pos[index];
        if p == ABSENT {
            self.heap.push(Entry { index, key });
            let last = self.heap.len() - 1;
            self.pos[index] = last;
            self.sift_up(last);
            true
        } else if key < self.heap[p].key {
            self.heap[p].key = key;
            self.sift_up(p);
            true
        } else {
            false
        }
    }

    #[inline]
    pub fn dequeue(&mut self) -> Result<usize, QueueError> {
        if self.heap.is_empty() {
            return Err(QueueError::Underflow);
        }
        let top = self.heap.swap_remove(0);
        self.pos[top.index] = ABSENT;
        if !self.heap.is_empty() {
            self.pos[self.heap[0].index] = 0;
            self.sift_down(0);
        }
        Ok(top.index)
    }

    pub fn clear(&mut self) {
        for e in self.heap.drain(..) {
            self.pos[e.index] = ABSENT;
        }
    }

    // both sifts carry the moving entry in a hole and write it back once
    #[inline]
    fn sift_up(&mut self, mut i: usize) {
        let moving = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            let above = self.heap[parent];
            if !moving.before(&above) {
                break;
            }
            self.heap[i] = above;
            self.pos[above.index] = i;
            i = parent;
        }
        self.heap[i] = moving;
        self.pos[moving.index] = i;
    }

    #[inline]
    fn sift_down(&mut self, mut i: usize) {
        let n = self.heap.len();
        let moving = self.heap[i];
        loop {
            let l = 2 * i + 1;
            if l >= n {
                break;
            }
            let r = l + 1;
            let m = if r < n && self.heap[r].before(&self.heap[l]) {
                r
            } else {
                l
            };
            let child = self.heap[m];
            if !child.before(&moving) {
                break;
            }
            self.heap[i] = child;
            self.pos[child.index] = i;
            i = m;
        }
        self.heap[i] = moving;
        self.pos[moving.index] = i;
    }
}

/// Selects the data structure backing a [`Frontier`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QueueImpl {
    /// Plain queue/stack for FIFO/LIFO, heap otherwise.
    #[default]
    Auto,
    /// Always the keyed heap.
    Heap,
}

/// The set of indices awaiting an update, ordered by a policy.
///
/// Tracks the enqueue counter used by the FIFO and LIFO keys. The FIFO and
/// LIFO fast paths dequeue in exactly the same order as the keyed heap would.
#[derive(Debug, Clone)]
pub struct Frontier {
    policy: PolicyTag,
    counter: u64,
    inner: FrontierImpl,
}

#[derive(Debug, Clone)]
enum FrontierImpl {
    Heap(PolicyQueue),
    Fifo {
        queue: VecDeque<usize>,
        queued: Vec<bool>,
    },
    // Re-pushing a queued index moves it to the top; older copies are
    // skipped on pop by comparing stamps.
    Lifo {
        stack: Vec<(usize, u64)>,
        stamp: Vec<u64>,
        len: usize,
    },
}

impl Frontier {
    pub fn new(policy: PolicyTag, n: usize, which: QueueImpl) -> Self {
        let inner = match (which, policy) {
            (QueueImpl::Auto, PolicyTag::Fifo) => FrontierImpl::Fifo {
                queue: VecDeque::with_capacity(n),
                queued: vec![false; n],
            },
            (QueueImpl::Auto, PolicyTag::Lifo) => FrontierImpl::Lifo {
                stack: Vec::with_capacity(n),
                stamp: vec![0; n],
                len: 0,
            },
            _ => FrontierImpl::Heap(PolicyQueue::with_capacity(n)),
        };
        Self {
            policy,
            counter: 0,
            inner,
        }
    }

    pub fn policy(&self) -> PolicyTag {
        self.policy
    }

    pub fn len(&self) -> usize {
        match &self.inner {
            FrontierImpl::Heap(q) => q.len(),
            FrontierImpl::Fifo { queue, .. } => queue.len(),
            FrontierImpl::Lifo { len, .. } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Schedules `index` for an update; `value` and `variation` feed the key.
    #[inline]
    pub fn push(&mut self, index: usize, value: f64, variation: f64) {
        self.counter += 1;
        match &mut self.inner {
            FrontierImpl::Heap(q) => {
                q.enqueue(index, key_for(self.policy, value, variation, self.counter));
            }
            FrontierImpl::Fifo { queue, queued } => {
                if !queued[index] {
                    queued[index] = true;
                    queue.push_back(index);
                }
            }
            FrontierImpl::Lifo { stack, stamp, len } => {
                if stamp[index] == 0 {
                    *len += 1;
                }
                stamp[index] = self.counter;
                stack.push((index, self.counter));
            }
        }
    }

    #[inline]
    pub fn pop(&mut self) -> Option<usize> {
        match &mut self.inner {
            FrontierImpl::Heap(q) => q.dequeue().ok(),
            FrontierImpl::Fifo { queue, queued } => {
                let i = queue.pop_front()?;
                queued[i] = false;
                Some(i)
            }
            FrontierImpl::Lifo { stack, stamp, len } => {
                while let Some((i, s)) = stack.pop() {
                    if stamp[i] == s {
                        stamp[i] = 0;
                        *len -= 1;
                        return Some(i);
                    }
                }
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn enqueue_inserts() {
        let mut q = PolicyQueue::new();
        q.enqueue(3, 5.0);
        assert_eq!(q.len(), 1);
        assert_eq!(q.key_of(3), Some(5.0));
    }

    #[test]
    fn better_key_replaces() {
        let mut q = PolicyQueue::new();
        q.enqueue(3, 5.0);
        assert!(q.enqueue(3, 2.0));
        assert_eq!(q.len(), 1);
        assert_eq!(q.key_of(3), Some(2.0));
    }

    #[test]
    fn worse_key_is_rejected() {
        let mut q = PolicyQueue::new();
        q.enqueue(3, 2.0);
        assert!(!q.enqueue(3, 5.0));
        assert_eq!(q.key_of(3), Some(2.0));
    }

    #[test]
    fn dequeue_min_key() {
        let mut q = PolicyQueue::new();
        q.enqueue(1, 3.0);
        q.enqueue(2, 1.0);
        assert_eq!(q.dequeue(), Ok(2));
        assert_eq!(q.peek(), Some((1, 3.0)));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let mut q = PolicyQueue::new();
        q.enqueue(2, 1.0);
        q.enqueue(1, 1.0);
        assert_eq!(q.dequeue(), Ok(1));
    }

    #[test]
    fn singleton_then_underflow() {
        let mut q = PolicyQueue::new();
        q.enqueue(7, 0.0);
        assert_eq!(q.dequeue(), Ok(7));
        assert!(q.is_empty());
        assert_eq!(q.dequeue(), Err(QueueError::Underflow));
    }

    #[test]
    fn policy_keys() {
        // larger variation dequeued first
        let mut q = PolicyQueue::new();
        q.enqueue(0, key_for(PolicyTag::Variation, 0.0, 1.0, 0));
        q.enqueue(1, key_for(PolicyTag::Variation, 0.0, 4.0, 1));
        assert_eq!(key_for(PolicyTag::Variation, 0.0, 4.0, 1), -4.0);
        assert_eq!(q.dequeue(), Ok(1));

        let mut q = PolicyQueue::new();
        q.enqueue(5, key_for(PolicyTag::Value, 3.0, 1.0, 0));
        q.enqueue(9, key_for(PolicyTag::Value, 0.5, 1.0, 1));
        assert_eq!(q.dequeue(), Ok(9));

        let mut q = PolicyQueue::new();
        q.enqueue(4, key_for(PolicyTag::Fifo, 0.0, 0.0, 2));
        q.enqueue(8, key_for(PolicyTag::Fifo, 0.0, 0.0, 1));
        assert_eq!(q.dequeue(), Ok(8));
    }

    #[test]
    fn fifo_and_lifo_order() {
        for which in [QueueImpl::Auto, QueueImpl::Heap] {
            let mut f = Frontier::new(PolicyTag::Fifo, 10, which);
            let mut l = Frontier::new(PolicyTag::Lifo, 10, which);
            for i in [4, 1, 7, 3] {
                f.push(i, 0.0, 1.0);
                l.push(i, 0.0, 1.0);
            }
            let fo: Vec<_> = std::iter::from_fn(|| f.pop()).collect();
            let lo: Vec<_> = std::iter::from_fn(|| l.pop()).collect();
            assert_eq!(fo, vec![4, 1, 7, 3]);
            assert_eq!(lo, vec![3, 7, 1, 4]);
        }
    }

    #[derive(Debug, Clone)]
    enum Op {
        Push(usize, f64),
        Pop,
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (0usize..16, -4i32..4).prop_map(|(i, k)| Op::Push(i, k as f64 * 0.5)),
            Just(Op::Pop),
        ]
    }

    proptest! {
        // Reference: a plain list scanned for the minimum on every pop.
        #[test]
        fn heap_matches_sorted_reference(ops in prop::collection::vec(op(), 0..200)) {
            let mut q = PolicyQueue::new();
            let mut reference: Vec<(usize, f64)> = Vec::new();
            for op in ops {
                match op {
                    Op::Push(i, k) => {
                        q.enqueue(i, k);
                        match reference.iter_mut().find(|e| e.0 == i) {
                            Some(e) => if k < e.1 { e.1 = k },
                            None => reference.push((i, k)),
                        }
                    }
                    Op::Pop => {
                        reference.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
                        let expect = if reference.is_empty() { None } else { Some(reference.remove(0).0) };
                        prop_assert_eq!(q.dequeue().ok(), expect);
                    }
                }
                prop_assert_eq!(q.len(), reference.len());
                prop_assert!(q.len() <= 16);
            }
        }

        #[test]
        fn fast_paths_match_heap(
            policy in prop_oneof![Just(PolicyTag::Fifo), Just(PolicyTag::Lifo)],
            ops in prop::collection::vec(op(), 0..200),
        ) {
            let mut fast = Frontier::new(policy, 16, QueueImpl::Auto);
            let mut heap = Frontier::new(policy, 16, QueueImpl::Heap);
            for op in ops {
                match op {
                    Op::Push(i, _) => { fast.push(i, 0.0, 1.0); heap.push(i, 0.0, 1.0); }
                    Op::Pop => prop_assert_eq!(fast.pop(), heap.pop()),
                }
                prop_assert_eq!(fast.len(), heap.len());
            }
        }
    }
}
