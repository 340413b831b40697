use gridwave::{
    analyze, build_design, dual_with_bounds, load_coefs, save_coefs, synthesize_real, CoefHeader, DelaySequence,
    DelayTag, Wavelet,
};

fn small_design(tag: DelayTag, d: usize) -> gridwave::FilterBankDesign {
    let delays = DelaySequence::generate(&tag.kind(), 81).unwrap();
    build_design(&Wavelet::cauchy(300.0).unwrap(), 80, 2, d, d * 12, &delays).unwrap()
}

fn signal(len: usize) -> Vec<f64> {
    (0..len).map(|i| (0.07 * i as f64).sin() + 0.3 * (1.9 * i as f64).cos()).collect()
}

#[test]
fn roundtrip_through_a_coefficient_file() {
    let des = small_design(DelayTag::Kronecker, 40);
    let x = signal(des.params.len);
    let coefs = analyze(&des, &x).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.gwfb");
    save_coefs(&path, &CoefHeader::for_design(&des, x.len()).unwrap(), &coefs).unwrap();

    let (header, rebuilt, loaded) = load_coefs(&path).unwrap();
    assert_eq!(header.signal_len, x.len());
    assert_eq!(rebuilt.bank().id(), des.bank().id());
    let (dual, fd) = dual_with_bounds(&rebuilt).unwrap();
    assert!(fd.invertible());
    let y = synthesize_real(&dual, &loaded).unwrap();
    let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-10, "{err}");
}

#[test]
fn zero_delays_are_singular_at_low_redundancy() {
    let des = small_design(DelayTag::Zero, 80);
    let err = dual_with_bounds(&des).unwrap_err();
    assert!(matches!(err, gridwave::Error::NotInvertible { .. }), "{err}");
}
