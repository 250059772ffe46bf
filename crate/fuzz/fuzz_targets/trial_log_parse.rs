#![no_main]
use libfuzzer_sys::fuzz_target;
use tactokit::analysis::{build_confusion, parse_log, report, Aggregation};

fuzz_target!(|data: &[u8]| {
    let Ok(records) = parse_log(data) else { return };
    if let Ok(cm) = build_confusion(&records, |_| true) {
        let _ = cm.information_transfer();
    }
    let _ = report(&records, &["posture", "method"], Aggregation::PerParticipant);
});
