#![no_main]

use libfuzzer_sys::fuzz_target;

use ee_trajectory::optimizer::{read_convergence_csv, write_convergence_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = read_convergence_csv(data) {
        let mut out = Vec::new();
        write_convergence_csv(&records, &mut out).expect("write");
        assert_eq!(read_convergence_csv(out.as_slice()).expect("re-read"), records);
    }
});
