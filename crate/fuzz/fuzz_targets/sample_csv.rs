#![no_main]

use libfuzzer_sys::fuzz_target;
use pqr_lab::density::SampleBatch;

fuzz_target!(|data: &[u8]| {
    let Ok(batch) = SampleBatch::read_csv(data) else { return };
    let mut buf = Vec::new();
    batch.write_csv(&mut buf).unwrap();
    let back = SampleBatch::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.len(), batch.len());
    assert_eq!(back.labels, batch.labels);
});
