#![no_main]
use libfuzzer_sys::fuzz_target;
use tactokit::experiment::{Session, SessionConfig};
use tactokit::ConfusionKernel;

// session configs arrive as TOML files or JSON request bodies
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for cfg in [SessionConfig::from_toml(text), SessionConfig::from_json(text)].into_iter().flatten() {
        let _ = Session::new(cfg, 0);
    }
    let _ = ConfusionKernel::from_toml(text);
});
