//! Worker-pool sizing from the environment.

use std::sync::Once;

/// Applies RADAR_ACCUM_THREADS to the global rayon pool. 0 or unset means
/// automatic sizing. Safe to call more than once; only the first call binds.
pub fn init_thread_pool() {
    static INIT: Once = Once::new();
    INIT.call_once(|| {
        let Ok(raw) = std::env::var("RADAR_ACCUM_THREADS") else {
            return;
        };
        match raw.trim().parse::<usize>() {
            Ok(0) => {}
            Ok(n) => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            Err(_) => {
                eprintln!("warning: ignoring RADAR_ACCUM_THREADS={raw:?} (not an integer)");
            }
        }
    });
}
