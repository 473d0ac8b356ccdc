//! Allocation counting hook.
//!
//! The library never installs a global allocator. A binary or test opts in:
//!
//! ```ignore
//! #[global_allocator]
//! static ALLOC: bbpeel::harness::alloc::CountingAllocator = bbpeel::harness::alloc::CountingAllocator;
//! ```
//!
//! Counts are per thread, so concurrently running tests do not pollute
//! each other's measurements.

use std::alloc::{GlobalAlloc, Layout, System};
use std::cell::Cell;
use std::sync::atomic::{AtomicBool, Ordering};

static INSTALLED: AtomicBool = AtomicBool::new(false);

thread_local! {
    static COUNT: Cell<u64> = const { Cell::new(0) };
}

pub struct CountingAllocator;

#[inline]
fn bump() {
    INSTALLED.store(true, Ordering::Relaxed);
    let _ = COUNT.try_with(|c| c.set(c.get() + 1));
}

unsafe impl GlobalAlloc for CountingAllocator {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        bump();
        System.alloc(layout)
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        bump();
        System.alloc_zeroed(layout)
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        bump();
        System.realloc(ptr, layout, new_size)
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout)
    }
}

/// Whether `CountingAllocator` is the active global allocator.
pub fn is_installed() -> bool {
    if !INSTALLED.load(Ordering::Relaxed) {
        // any allocation through the hook flips the flag
        drop(std::hint::black_box(Box::new(0u8)));
    }
    INSTALLED.load(Ordering::Relaxed)
}

/// Allocations (including reallocations) made by the current thread so far.
pub fn thread_allocations() -> u64 {
    COUNT.with(|c| c.get())
}

/// Runs `f` and returns its result with the number of allocations it made on
/// this thread, or `None` for the count when the hook is not installed.
pub fn count_allocations<T>(f: impl FnOnce() -> T) -> (T, Option<u64>) {
    let installed = is_installed();
    let before = thread_allocations();
    let out = f();
    let after = thread_allocations();
    (out, installed.then_some(after - before))
}
