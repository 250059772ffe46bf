#![no_main]
use libfuzzer_sys::fuzz_target;
use tactokit::PatternSet;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(set) = PatternSet::parse(text, "fuzz") {
        let again = PatternSet::parse(&set.to_text(), "fuzz").expect("printed set reparses");
        assert_eq!(set, again);
    }
});
