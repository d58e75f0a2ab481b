use chunkgen_core::{Frame, FrameShape};
use chunkgen_harness::ppm::{encode_ppm, parse_ppm, write_ppm};
use proptest::prelude::*;

#[test]
fn header_and_size() {
    let f = Frame::filled(FrameShape::new(32, 32, 3).unwrap(), 0.5).unwrap();
    let b = encode_ppm(&f).unwrap();
    let header = b"P6\n32 32\n255\n";
    assert_eq!(header.len(), 13);
    assert_eq!(&b[..13], header);
    assert_eq!(b.len(), 13 + 3072);
    assert!(b[13..].iter().all(|&v| v == 128));
}

#[test]
fn clamp_and_scale() {
    let fs = FrameShape::new(1, 2, 3).unwrap();
    let f = Frame::from_clamped(fs, &[1.0, -0.2, 0.2, 0.0, 0.999, 0.5]).unwrap();
    let p = parse_ppm(&encode_ppm(&f).unwrap()).unwrap();
    assert_eq!(p.pixels, vec![255, 0, 51, 0, 255, 128]);
}

#[test]
fn single_channel_is_replicated() {
    let fs = FrameShape::new(2, 1, 1).unwrap();
    let f = Frame::new(fs, vec![0.0, 1.0]).unwrap();
    let p = parse_ppm(&encode_ppm(&f).unwrap()).unwrap();
    assert_eq!((p.width, p.height), (1, 2));
    assert_eq!(p.pixels, vec![0, 0, 0, 255, 255, 255]);
}

#[test]
fn other_channel_counts_are_rejected() {
    let f = Frame::filled(FrameShape::new(2, 2, 2).unwrap(), 0.5).unwrap();
    assert!(encode_ppm(&f).is_err());
}

#[test]
fn write_reports_the_path() {
    let f = Frame::filled(FrameShape::new(2, 2, 3).unwrap(), 0.5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing").join("x.ppm");
    let err = write_ppm(&f, &path).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("x.ppm"));
    let ok = dir.path().join("x.ppm");
    write_ppm(&f, &ok).unwrap();
    assert_eq!(std::fs::read(&ok).unwrap(), encode_ppm(&f).unwrap());
}

proptest! {
    #[test]
    fn round_trip_recovers_bytes(h in 1usize..9, w in 1usize..9, bytes in proptest::collection::vec(any::<u8>(), 243)) {
        let n = h * w * 3;
        let data: Vec<f64> = bytes[..n].iter().map(|b| *b as f64 / 255.0).collect();
        let f = Frame::new(FrameShape::new(h, w, 3).unwrap(), data).unwrap();
        let p = parse_ppm(&encode_ppm(&f).unwrap()).unwrap();
        prop_assert_eq!((p.width, p.height), (w, h));
        prop_assert_eq!(&p.pixels[..], &bytes[..n]);
    }
}
