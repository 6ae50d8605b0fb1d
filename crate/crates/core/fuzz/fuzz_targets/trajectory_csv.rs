#![no_main]

use libfuzzer_sys::fuzz_target;

use ee_trajectory::experiment::read_trajectory_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = read_trajectory_csv(data) {
        assert!(!t.is_empty());
        assert_eq!(t.q.len(), t.v.len());
        assert_eq!(t.q.len(), t.a.len());
    }
});
