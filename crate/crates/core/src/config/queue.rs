use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

pub const DEFAULT_CAPACITY: usize = 1024;

/// Bounded FIFO that never blocks the producer: when full, the oldest item
/// is dropped and `lost` is set.
#[derive(Debug)]
pub struct BoundedQueue<T> {
    items: Mutex<VecDeque<T>>,
    ready: Condvar,
    capacity: usize,
    lost: AtomicBool,
    closed: AtomicBool,
}

impl<T> BoundedQueue<T> {
    pub fn new(capacity: usize) -> Self {
        BoundedQueue {
            items: Mutex::new(VecDeque::with_capacity(capacity.min(DEFAULT_CAPACITY))),
            ready: Condvar::new(),
            capacity: capacity.max(1),
            lost: AtomicBool::new(false),
            closed: AtomicBool::new(false),
        }
    }

    pub fn push(&self, item: T) {
        let mut q = self.items.lock().unwrap_or_else(|e| e.into_inner());
        if q.len() == self.capacity {
            q.pop_front();
            self.lost.store(true, Ordering::SeqCst);
        }
        q.push_back(item);
        self.ready.notify_all();
    }

    pub fn try_pop(&self) -> Option<T> {
        self.items.lock().unwrap_or_else(|e| e.into_inner()).pop_front()
    }

    /// Waits up to `timeout`; None on timeout or once closed and drained.
    pub fn pop_timeout(&self, timeout: Duration) -> Option<T> {
        let q = self.items.lock().unwrap_or_else(|e| e.into_inner());
        let (mut q, _) = self
            .ready
            .wait_timeout_while(q, timeout, |q| q.is_empty() && !self.closed.load(Ordering::SeqCst))
            .unwrap_or_else(|e| e.into_inner());
        q.pop_front()
    }

    pub fn drain(&self) -> Vec<T> {
        self.items.lock().unwrap_or_else(|e| e.into_inner()).drain(..).collect()
    }

    pub fn len(&self) -> usize {
        self.items.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True once an item has been dropped; cleared by reading.
    pub fn take_lost(&self) -> bool {
        self.lost.swap(false, Ordering::SeqCst)
    }

    pub fn close(&self) {
        self.closed.store(true, Ordering::SeqCst);
        let _guard = self.items.lock().unwrap_or_else(|e| e.into_inner());
        self.ready.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.closed.load(Ordering::SeqCst)
    }
}
