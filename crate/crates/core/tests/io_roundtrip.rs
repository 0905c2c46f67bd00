use std::fs;

use tlrmt_core::factor::{decompose, standardize};
use tlrmt_core::garch::GjrGarchParams;
use tlrmt_core::panel::{ingest_csv, to_magnitudes, to_returns, IngestConfig, MaskedPanel};
use tlrmt_core::simulate::{draw_loadings, generate, GfmScenario, PerSeries};
use tlrmt_core::spectrum::{fit_power_law, lambda_curve, CurveOptions, SpectrumSource};
use tlrmt_core::xcorr::{corr_matrix, Estimator};
use tlrmt_core::Error;

fn scenario(holiday: f64) -> GfmScenario {
    GfmScenario {
        version: 1,
        n: 6,
        t: 800,
        mu: PerSeries::All(0.0),
        b: draw_loadings(6, (0.3, 1.2), 1, 11),
        sigma_eps: PerSeries::All(2.0),
        factor_params: GjrGarchParams::WORLD_FACTOR,
        holiday_prob: PerSeries::All(holiday),
        seed: 11,
        log_price_scale: 0.01,
    }
}

#[test]
fn simulated_prices_survive_csv_and_reproduce_returns() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(&scenario(0.05)).unwrap();
    let path = dir.path().join("prices.csv");
    g.prices.write_csv(&path).unwrap();

    let prices = ingest_csv(&path, &IngestConfig::default()).unwrap();
    assert_eq!(prices.names(), g.prices.names());
    let returns = to_returns(&prices);
    assert_eq!(returns.mask(), g.returns.mask());
    let err = (returns.values() * 100.0 - g.returns.values()).amax();
    assert!(err < 1e-6, "max return error {err}");
}

#[test]
fn masked_panel_cache_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(&scenario(0.1)).unwrap();
    let mags = to_magnitudes(&g.returns).unwrap();
    let path = dir.path().join("magnitudes.csv");
    mags.write_csv(&path).unwrap();
    let back = MaskedPanel::read_csv(&path).unwrap();
    assert_eq!(back.names(), mags.names());
    assert_eq!(back.timestamps(), mags.timestamps());
    assert_eq!(back.mask(), mags.mask());
    let rel = back
        .values()
        .iter()
        .zip(mags.values().iter())
        .map(|(a, b)| (a - b).abs() / b.abs().max(1e-300))
        .fold(0.0, f64::max);
    assert!(rel < 1e-11, "relative error {rel}");
}

#[test]
fn ingest_reports_line_of_bad_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "date,a,b\n1,10,20\n2,11,21\n2,12,22\n").unwrap();
    match ingest_csv(&path, &IngestConfig::default()) {
        Err(Error::NonMonotoneTimestamps { line, .. }) => assert_eq!(line, 4),
        other => panic!("unexpected {other:?}"),
    }

    fs::write(&path, "date,a,b\n1,10,20\n2,11,-21\n3,12,22\n").unwrap();
    match ingest_csv(&path, &IngestConfig::default()) {
        Err(Error::NonPositivePrice { line, column, .. }) => {
            assert_eq!(line, 3);
            assert_eq!(column, "b");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn semicolon_delimited_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("semi.csv");
    fs::write(&path, "date;a;b\n2020-01-01;10;20\n2020-01-02;;21\n2020-01-03;12;22\n").unwrap();
    let p = ingest_csv(&path, &IngestConfig { delimiter: b';' }).unwrap();
    assert_eq!(p.len(), 3);
    assert!(p.missing()[(0, 1)]);
    let r = to_returns(&p);
    assert!(r.is_masked(0, 0) && r.is_masked(0, 1));
    assert!((r.values()[(1, 1)] - (22.0f64 / 21.0).ln()).abs() < 1e-12);
}

#[test]
fn exports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let write_all = |tag: &str| {
        let g = generate(&scenario(0.02)).unwrap();
        let curve = lambda_curve(&g.returns, &(0..=20).collect::<Vec<_>>(), SpectrumSource::Returns, CurveOptions::default()).unwrap();
        curve.write_csv(dir.path().join(format!("{tag}-curve.csv"))).unwrap();
        fit_power_law(&curve, (1, 20))
            .unwrap()
            .write_json(dir.path().join(format!("{tag}-fit.json")))
            .unwrap();
        let d = decompose(&standardize(&g.returns).unwrap()).unwrap();
        d.write_json(dir.path().join(format!("{tag}-decomp.json")), 0.1).unwrap();
        let c = corr_matrix(&g.returns, 3, Estimator::OverlapCorrected).unwrap();
        c.write_json(dir.path().join(format!("{tag}-c3.json")), g.returns.names()).unwrap();
    };
    write_all("a");
    write_all("b");
    for name in ["curve.csv", "fit.json", "decomp.json", "c3.json"] {
        let a = fs::read(dir.path().join(format!("a-{name}"))).unwrap();
        let b = fs::read(dir.path().join(format!("b-{name}"))).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}
