#![no_main]
use libfuzzer_sys::fuzz_target;
use tactokit::device::{decode_frame, decode_stream, encode_frame};

fuzz_target!(|data: &[u8]| {
    if let Ok(frame) = decode_frame(data) {
        assert_eq!(&encode_frame(&frame)[..], data);
    }
    for frame in decode_stream(data) {
        assert_eq!(decode_frame(&encode_frame(&frame)), Ok(frame));
    }
});
