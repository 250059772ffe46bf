#![no_main]
use libfuzzer_sys::fuzz_target;
use tactokit::synth::DeviceSchedule;

fuzz_target!(|data: &[u8]| {
    let Ok(schedule) = DeviceSchedule::read_jsonl(data) else { return };
    let mut out = Vec::new();
    schedule.write_jsonl(&mut out).unwrap();
    assert_eq!(DeviceSchedule::read_jsonl(out.as_slice()).unwrap(), schedule);
});
