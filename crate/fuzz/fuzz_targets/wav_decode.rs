#![no_main]
use libfuzzer_sys::fuzz_target;
use tactokit::synth::{decode_wav, encode_wav};

fuzz_target!(|data: &[u8]| {
    let Ok(buf) = decode_wav(data) else { return };
    let again = decode_wav(&encode_wav(&buf)).expect("re-encoded wav decodes");
    assert_eq!(again.n_channels(), buf.n_channels());
    assert_eq!(again.samples_per_channel(), buf.samples_per_channel());
});
