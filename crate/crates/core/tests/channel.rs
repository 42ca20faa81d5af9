use hybrid_mimo::channel::{
    gen_mmwave, gen_rayleigh, load_channel, mmwave_matrix, rayleigh_matrix, save_channel,
    MmWaveParams,
};
use hybrid_mimo::linalg::frobenius_sq;
use hybrid_mimo::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn mmwave_energy_matches_antenna_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let params = MmWaveParams::default();
    let (n, m, draws) = (32, 16, 10_000);
    let total: f64 = (0..draws)
        .map(|_| frobenius_sq(&mmwave_matrix(&params, n, m, &mut rng).unwrap()))
        .sum();
    let mean = total / draws as f64;
    let target = (n * m) as f64;
    assert!((mean - target).abs() < 0.03 * target, "mean {mean}");
}

#[test]
fn rayleigh_energy_matches_antenna_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws = 10_000;
    let mean: f64 = (0..draws)
        .map(|_| frobenius_sq(&rayleigh_matrix(4, 4, &mut rng).unwrap()))
        .sum::<f64>()
        / draws as f64;
    assert!((mean - 16.0).abs() < 0.03 * 16.0, "mean {mean}");

    let scalar: f64 = (0..100_000)
        .map(|_| rayleigh_matrix(1, 1, &mut rng).unwrap()[(0, 0)].norm_sqr())
        .sum::<f64>()
        / 100_000.0;
    assert!((scalar - 1.0).abs() < 0.02, "scalar {scalar}");
}

#[test]
fn dump_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    for ch in [
        gen_mmwave(&MmWaveParams::default(), 8, 4, 11).unwrap(),
        gen_rayleigh(3, 5, 12).unwrap(),
    ] {
        let path = dir.path().join(format!("{}.csv", ch.model));
        save_channel(&path, &ch).unwrap();
        let back = load_channel(&path).unwrap();
        assert_eq!(back.h, ch.h);
        assert_eq!(back.model, ch.model);
        assert_eq!(back.seed, ch.seed);
        let text = std::fs::read_to_string(&path).unwrap();
        let first = text.lines().next().unwrap();
        assert_eq!(
            first,
            format!("{},{},{},{}", ch.h.nrows(), ch.h.ncols(), ch.model, ch.seed)
        );
    }
}

#[test]
fn malformed_dump_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "2,1,rayleigh,0\n1,0\n1,x\n").unwrap();
    match load_channel(&path) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(
        load_channel(&dir.path().join("missing.csv")),
        Err(Error::Io { .. })
    ));
}
