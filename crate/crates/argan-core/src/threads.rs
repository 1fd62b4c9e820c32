//! Kernel-level parallelism, capped by the ARGAN_THREADS environment variable.
//!
//! Work is only ever split across *output* elements: every output value is
//! written by exactly one thread and its inner summation order never changes.
//! Results are therefore bitwise identical for any thread count, and the
//! single-threaded default (ARGAN_THREADS=1) is the reference behavior.

use crate::tensor::Scalar;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

/// Nanosecond tallies for coarse hot-path profiling (ARGAN_PROFILE=1).
pub static T_GEMM: AtomicU64 = AtomicU64::new(0);
pub static T_IMCOL: AtomicU64 = AtomicU64::new(0);
pub static T_ACT: AtomicU64 = AtomicU64::new(0);
pub static T_BN: AtomicU64 = AtomicU64::new(0);

pub fn profile_enabled() -> bool {
    static ON: OnceLock<bool> = OnceLock::new();
    *ON.get_or_init(|| std::env::var("ARGAN_PROFILE").is_ok())
}

pub struct ScopedTimer(&'static AtomicU64, std::time::Instant, bool);

impl ScopedTimer {
    pub fn new(sink: &'static AtomicU64) -> Self {
        ScopedTimer(sink, std::time::Instant::now(), profile_enabled())
    }
}

impl Drop for ScopedTimer {
    fn drop(&mut self) {
        if self.2 {
            self.0.fetch_add(self.1.elapsed().as_nanos() as u64, Ordering::Relaxed);
        }
    }
}

pub fn profile_dump_and_reset(label: &str) {
    if !profile_enabled() {
        return;
    }
    let g = T_GEMM.swap(0, Ordering::Relaxed) as f64 / 1e6;
    let i = T_IMCOL.swap(0, Ordering::Relaxed) as f64 / 1e6;
    let a = T_ACT.swap(0, Ordering::Relaxed) as f64 / 1e6;
    let b = T_BN.swap(0, Ordering::Relaxed) as f64 / 1e6;
    eprintln!("[profile {label}] gemm {g:.0} ms | im2col/col2im {i:.0} ms | activations {a:.0} ms | batchnorm {b:.0} ms");
}

static THREADS: OnceLock<usize> = OnceLock::new();

/// Number of kernel threads; parsed once from ARGAN_THREADS (default 1).
pub fn kernel_threads() -> usize {
    *THREADS.get_or_init(|| {
        std::env::var("ARGAN_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n >= 1)
            .unwrap_or(1)
    })
}

/// Allocate without zero-filling; callers must overwrite every element
/// before reading (true for gemm outputs with beta = 0 and for im2col /
/// gather targets, which write all cells including padding).
pub fn uninit_vec<T: Scalar>(n: usize) -> Vec<T> {
    let mut v = Vec::with_capacity(n);
    // Safety: T is a plain Copy float; the contract above guarantees every
    // element is written before any read.
    unsafe { v.set_len(n) };
    v
}

type Job = Box<dyn FnOnce() + Send + 'static>;

/// Long-lived workers fed over channels; spawning threads per kernel call
/// costs more than the small gemms being split.
struct Pool {
    senders: Vec<std::sync::mpsc::Sender<Job>>,
    outstanding: std::sync::Arc<(std::sync::Mutex<usize>, std::sync::Condvar)>,
    panicked: std::sync::Arc<std::sync::atomic::AtomicBool>,
}

impl Pool {
    fn new(workers: usize) -> Pool {
        let outstanding = std::sync::Arc::new((std::sync::Mutex::new(0usize), std::sync::Condvar::new()));
        let panicked = std::sync::Arc::new(std::sync::atomic::AtomicBool::new(false));
        let senders = (0..workers)
            .map(|_| {
                let (tx, rx) = std::sync::mpsc::channel::<Job>();
                let outstanding = std::sync::Arc::clone(&outstanding);
                let panicked = std::sync::Arc::clone(&panicked);
                std::thread::spawn(move || {
                    for job in rx {
                        if std::panic::catch_unwind(std::panic::AssertUnwindSafe(job)).is_err() {
                            panicked.store(true, Ordering::SeqCst);
                        }
                        let (lock, cv) = &*outstanding;
                        let mut n = lock.lock().unwrap();
                        *n -= 1;
                        if *n == 0 {
                            cv.notify_all();
                        }
                    }
                });
                tx
            })
            .collect();
        Pool {
            senders,
            outstanding,
            panicked,
        }
    }
}

fn pool() -> Option<&'static Pool> {
    static POOL: OnceLock<Option<Pool>> = OnceLock::new();
    POOL.get_or_init(|| {
        let t = kernel_threads();
        if t <= 1 {
            None
        } else {
            Some(Pool::new(t - 1))
        }
    })
    .as_ref()
}

/// Run the tasks to completion, using the worker pool when enabled. The
/// first task runs on the calling thread. Tasks may borrow from the caller:
/// this function does not return until every task has finished.
pub fn scoped_run<'env>(tasks: Vec<Box<dyn FnOnce() + Send + 'env>>) {
    let Some(pool) = pool() else {
        for t in tasks {
            t();
        }
        return;
    };
    if tasks.len() <= 1 {
        for t in tasks {
            t();
        }
        return;
    }
    let mut iter = tasks.into_iter();
    let local = iter.next().unwrap();
    let rest: Vec<_> = iter.collect();
    {
        let (lock, _) = &*pool.outstanding;
        *lock.lock().unwrap() += rest.len();
    }
    for (i, t) in rest.into_iter().enumerate() {
        // Safety: the completion wait below keeps every borrow alive until
        // the job has run, which is what the 'static bound stands in for.
        let job: Job = unsafe {
            std::mem::transmute::<Box<dyn FnOnce() + Send + '_>, Box<dyn FnOnce() + Send + 'static>>(t)
        };
        pool.senders[i % pool.senders.len()].send(job).unwrap();
    }
    local();
    let (lock, cv) = &*pool.outstanding;
    let mut n = lock.lock().unwrap();
    while *n != 0 {
        n = cv.wait(n).unwrap();
    }
    drop(n);
    if pool.panicked.load(Ordering::SeqCst) {
        panic!("a kernel worker thread panicked");
    }
}

/// Split `buf` into `n_items` chunks of `item_len` and hand contiguous item
/// ranges to up to `kernel_threads()` worker threads. Each item is written
/// by exactly one thread, so results match the single-threaded run bitwise.
pub fn run_batched<T, F>(buf: &mut [T], item_len: usize, n_items: usize, f: F)
where
    T: Send,
    F: Fn(std::ops::Range<usize>, &mut [T]) + Sync,
{
    debug_assert!(buf.len() >= item_len * n_items);
    let threads = kernel_threads().min(n_items.max(1));
    if threads <= 1 {
        f(0..n_items, &mut buf[..item_len * n_items]);
        return;
    }
    let per = n_items.div_ceil(threads);
    let mut tasks: Vec<Box<dyn FnOnce() + Send + '_>> = Vec::new();
    let mut rest = &mut buf[..item_len * n_items];
    let mut start = 0usize;
    while start < n_items {
        let take = per.min(n_items - start);
        let (chunk, tail) = rest.split_at_mut(take * item_len);
        rest = tail;
        let fr = &f;
        let range = start..start + take;
        tasks.push(Box::new(move || fr(range, chunk)));
        start += take;
    }
    scoped_run(tasks);
}

/// Plain single-threaded gemm with transpose flags; used inside batched
/// regions where the outer loop already owns the parallelism.
///
/// Single-column outputs (n == 1, the bottleneck-resolution layers) take a
/// direct matvec path, which beats a packing gemm there.
pub fn gemm_single<T: Scalar>(
    trans_a: bool,
    trans_b: bool,
    m: usize,
    k: usize,
    n: usize,
    alpha: T,
    a: &[T],
    b: &[T],
    beta: T,
    c: &mut [T],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if n == 1 {
        gemm_narrow(trans_a, trans_b, m, k, n, alpha, a, b, beta, c);
        return;
    }
    let (rsa, csa) = if trans_a {
        (1isize, m as isize)
    } else {
        (k as isize, 1isize)
    };
    let (rsb, csb) = if trans_b {
        (1isize, k as isize)
    } else {
        (n as isize, 1isize)
    };
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Contiguous dot product with eight independent accumulators (fixed
/// combination order, SIMD-friendly).
#[inline]
fn dot8<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let chunks = n / 8;
    let mut acc = [T::ZERO; 8];
    for ci in 0..chunks {
        let i = ci * 8;
        let av = &a[i..i + 8];
        let bv = &b[i..i + 8];
        for l in 0..8 {
            acc[l] += av[l] * bv[l];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for i in chunks * 8..n {
        s += a[i] * b[i];
    }
    s
}

fn gemm_narrow<T: Scalar>(
    trans_a: bool,
    trans_b: bool,
    m: usize,
    k: usize,
    n: usize,
    alpha: T,
    a: &[T],
    b: &[T],
    beta: T,
    c: &mut [T],
) {
    if beta == T::ZERO {
        c[..m * n].fill(T::ZERO);
    } else if beta != T::ONE {
        for v in &mut c[..m * n] {
            *v = *v * beta;
        }
    }
    if trans_a {
        // A stored k x m: row p is contiguous over i, so accumulate
        // rank-1 contributions in ascending p. C is narrow enough to stay
        // cache-resident across the k passes.
        if n == 1 {
            let b_at = |p: usize| if trans_b { b[p] } else { b[p] };
            for p in 0..k {
                let ar = &a[p * m..p * m + m];
                let bv = alpha * b_at(p);
                for (cv, &av) in c[..m].iter_mut().zip(ar) {
                    *cv += av * bv;
                }
            }
        } else {
            for p in 0..k {
                let ar = &a[p * m..p * m + m];
                let mut brow = [T::ZERO; 16];
                for (j, bj) in brow[..n].iter_mut().enumerate() {
                    *bj = alpha * if trans_b { b[j * k + p] } else { b[p * n + j] };
                }
                for (i, &av) in ar.iter().enumerate() {
                    let crow = &mut c[i * n..i * n + n];
                    for j in 0..n {
                        crow[j] += av * brow[j];
                    }
                }
            }
        }
    } else if trans_b {
        // Both A rows and B rows are contiguous dot operands.
        for i in 0..m {
            let ar = &a[i * k..i * k + k];
            let crow = &mut c[i * n..i * n + n];
            for (j, cv) in crow.iter_mut().enumerate() {
                *cv += alpha * dot8(ar, &b[j * k..j * k + k]);
            }
        }
    } else {
        // Gather B's narrow columns into a contiguous scratch once.
        let mut bt = vec![T::ZERO; n * k];
        for p in 0..k {
            for j in 0..n {
                bt[j * k + p] = b[p * n + j];
            }
        }
        for i in 0..m {
            let ar = &a[i * k..i * k + k];
            let crow = &mut c[i * n..i * n + n];
            for (j, cv) in crow.iter_mut().enumerate() {
                *cv += alpha * dot8(ar, &bt[j * k..j * k + k]);
            }
        }
    }
}

/// Row-major matrix product C ← alpha·A·B + beta·C with optional transposes.
///
/// `m`, `k`, `n` describe the logical product: op(A) is m×k, op(B) is k×n.
/// Splitting is along rows of C when the problem is large enough.
pub fn gemm<T: Scalar>(
    trans_a: bool,
    trans_b: bool,
    m: usize,
    k: usize,
    n: usize,
    alpha: T,
    a: &[T],
    b: &[T],
    beta: T,
    c: &mut [T],
) {
    let _t = ScopedTimer::new(&T_GEMM);
    // Strides of the stored (untransposed) buffers.
    let (rsa, csa) = if trans_a {
        (1isize, m as isize) // A stored k×m, read transposed
    } else {
        (k as isize, 1isize)
    };
    let (rsb, csb) = if trans_b {
        (1isize, k as isize) // B stored n×k, read transposed
    } else {
        (n as isize, 1isize)
    };
    assert!(a.len() >= m * k, "gemm: A buffer too small");
    assert!(b.len() >= k * n, "gemm: B buffer too small");
    assert!(c.len() >= m * n, "gemm: C buffer too small");

    let threads = kernel_threads();
    let big_enough = m * k * n >= 1 << 18;
    if threads <= 1 || !big_enough || (m < 2 * threads && n < 64 * threads) {
        gemm_single(trans_a, trans_b, m, k, n, alpha, a, b, beta, c);
        return;
    }

    // Prefer splitting the wider dimension so each chunk keeps a healthy
    // kernel shape; either way each output element is written once with an
    // unchanged inner order.
    if n >= m && n >= 64 * threads {
        let cols_per = n.div_ceil(threads);
        let c_addr = SendPtr(c.as_mut_ptr());
        let mut tasks: Vec<Box<dyn FnOnce() + Send + '_>> = Vec::new();
        let mut col0 = 0usize;
        while col0 < n {
            let cols = cols_per.min(n - col0);
            let a_ref = a;
            let b_ref = b;
            tasks.push(Box::new(move || {
                let b_off = if trans_b {
                    col0 as isize * k as isize // B stored n x k: skip rows
                } else {
                    col0 as isize // skip columns
                };
                let c_ptr = c_addr;
                unsafe {
                    T::gemm_raw(
                        m,
                        k,
                        cols,
                        alpha,
                        a_ref.as_ptr(),
                        rsa,
                        csa,
                        b_ref.as_ptr().offset(b_off),
                        rsb,
                        csb,
                        beta,
                        c_ptr.0.offset(col0 as isize),
                        n as isize,
                        1,
                    );
                }
            }));
            col0 += cols;
        }
        scoped_run(tasks);
        return;
    }

    let rows_per = m.div_ceil(threads);
    let mut tasks: Vec<Box<dyn FnOnce() + Send + '_>> = Vec::new();
    let mut rest = &mut c[..m * n];
    let mut row0 = 0usize;
    while row0 < m {
        let rows = rows_per.min(m - row0);
        let (chunk, tail) = rest.split_at_mut(rows * n);
        rest = tail;
        let a_ref = a;
        let b_ref = b;
        tasks.push(Box::new(move || {
            // Offset A to the chunk's first logical row.
            let a_off = row0 as isize * rsa;
            unsafe {
                T::gemm_raw(
                    rows,
                    k,
                    n,
                    alpha,
                    a_ref.as_ptr().offset(a_off),
                    rsa,
                    csa,
                    b_ref.as_ptr(),
                    rsb,
                    csb,
                    beta,
                    chunk.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
        }));
        row0 += rows;
    }
    scoped_run(tasks);
}

/// Raw pointer wrapper for disjoint column-block writes across threads.
#[derive(Clone, Copy)]
struct SendPtr<T>(*mut T);
unsafe impl<T> Send for SendPtr<T> {}
unsafe impl<T> Sync for SendPtr<T> {}
