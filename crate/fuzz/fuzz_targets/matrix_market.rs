#![no_main]

use libfuzzer_sys::fuzz_target;
use pqr_lab::mm::{read_matrix_market, write_symmetric};

fuzz_target!(|data: &[u8]| {
    let Ok(m) = read_matrix_market(data) else { return };
    // anything that converts must survive a write/read round trip
    if let Ok(sym) = m.to_sym() {
        let mut buf = Vec::new();
        write_symmetric(&mut buf, &sym, "").unwrap();
        let back = read_matrix_market(buf.as_slice()).unwrap().to_sym().unwrap();
        assert_eq!(back, sym);
    }
    let _ = m.to_adjacency();
});
