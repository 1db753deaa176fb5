use std::f64::consts::TAU;

use approx::assert_abs_diff_eq;
use telltale::harness::{
    param_errors, report_csv, run_experiment, sample_chain, transported_mask, ChainFamily, ChannelMode,
    ExperimentConfig, CSV_COLUMNS,
};
use telltale::transforms::{GeoBlock, GeoOp, GeoOrder, GeoParams, ParamRanges, PhoOp, PhoParams};
use telltale::Image;

#[test]
fn family_names_round_trip() {
    for name in ChainFamily::STANDARD {
        let fam: ChainFamily = name.parse().unwrap();
        assert_eq!(fam.to_string(), name);
    }
    let fam: ChainFamily = "ro&syn&H".parse().unwrap();
    assert_eq!(fam.to_string(), "Syn&H&Ro");
    assert_eq!(fam.active_keys(), vec!["ro", "h"]);
    assert!("Syn&Zoom".parse::<ChainFamily>().is_err());
    assert!("B&B".parse::<ChainFamily>().is_err());
    let bare: ChainFamily = "Sc&Tr".parse().unwrap();
    assert!(!bare.semantic && bare.photometric.is_empty());
}

#[test]
fn sampled_chains_vary_only_the_family() {
    let ranges = ParamRanges::default();
    let fam: ChainFamily = "Syn&C&Tr".parse().unwrap();
    for seed in 0..50 {
        let chain = sample_chain(&fam, &ranges, 32, 32, seed).unwrap();
        assert!(chain.semantic.is_some());
        let pho = chain.photometric.unwrap().params;
        assert_eq!(PhoParams { c: 1.0, ..pho }, PhoParams::identity());
        assert!(ranges.c.contains(pho.c));
        let geo = chain.geometric.unwrap().params;
        assert_eq!(
            GeoParams {
                tr_x: 0.0,
                tr_y: 0.0,
                ..geo
            },
            GeoParams::identity()
        );
        assert!(ranges.tr.contains(geo.tr_x) && ranges.tr.contains(geo.tr_y));
        assert_eq!(sample_chain(&fam, &ranges, 32, 32, seed).unwrap(), chain);
    }
    let only_geo = sample_chain(&"Ro".parse().unwrap(), &ranges, 8, 8, 3).unwrap();
    assert!(only_geo.semantic.is_none() && only_geo.photometric.is_none());
}

#[test]
fn errors_are_in_reporting_units() {
    let g = GeoParams::identity();
    let moved = GeoParams {
        ro: 0.01 * TAU,
        tr_x: 0.02,
        tr_y: 0.04,
        sc: 1.05,
        sh_x: 0.02 * TAU,
        ..g
    };
    let p = PhoParams::identity();
    let e = param_errors(&g, &moved, &p, &PhoParams { h: 0.95, b: 0.9, ..p });
    let expected = [0.01, 0.03, 0.05, 0.01, 0.1, 0.0, 0.05, 0.0];
    for (got, want) in e.iter().zip(expected) {
        assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
    }
    // hue wraps around
    let e = param_errors(&g, &g, &PhoParams { h: -0.49, ..p }, &PhoParams { h: 0.49, ..p });
    assert_abs_diff_eq!(e[6], 0.02, epsilon = 1e-12);
}

#[test]
fn mask_transport() {
    let mask = Image::from_fn(16, 16, 1, |x, y, px| px[0] = (x < 8 && y < 4) as u8 as f32).unwrap();
    assert_eq!(transported_mask(&mask, None).unwrap(), mask);
    let shift = GeoBlock {
        order: GeoOrder::canonical(),
        params: GeoParams {
            tr_x: 0.25,
            ..GeoParams::identity()
        },
    };
    let moved = transported_mask(&mask, Some(&shift)).unwrap();
    for y in 0..16 {
        for x in 0..16 {
            assert_eq!(
                moved.get(x, y, 0),
                ((4..12).contains(&x) && y < 4) as u8 as f32,
                "({x}, {y})"
            );
        }
    }
}

fn small(family: &str) -> ExperimentConfig {
    ExperimentConfig {
        family: family.parse().unwrap(),
        trials: 4,
        size: 64,
        ..ExperimentConfig::default()
    }
}

#[test]
fn report_is_reproducible() {
    let cfg = ExperimentConfig {
        sigma: 0.05,
        ..small("Syn&B&Ro")
    };
    let a = report_csv(&run_experiment(&cfg).unwrap()).unwrap();
    let b = report_csv(&run_experiment(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
    assert_eq!(lines.count(), 4);

    let other = run_experiment(&ExperimentConfig { seed: 1, ..cfg }).unwrap();
    assert_ne!(report_csv(&other).unwrap(), text.into_bytes());
}

#[test]
fn aggregate_covers_active_operations() {
    let report = run_experiment(&small("Syn&H&Sc")).unwrap();
    let agg = &report.aggregate;
    assert_eq!(agg.errors.keys().collect::<Vec<_>>(), vec!["h", "sc"]);
    assert_eq!(agg.errors["h"].n, 4);
    assert_eq!(agg.failures, 0);
    assert!(agg.errors["h"].mean <= 0.02 && agg.errors["sc"].mean <= 0.02, "{agg:?}");
    assert!(agg.iou.mean >= 0.85);
}

#[test]
fn residual_channel_runs() {
    let cfg = ExperimentConfig {
        channel: ChannelMode::Residual,
        trials: 2,
        ..small("Syn&B")
    };
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert!(report.rows.iter().all(|r| r.outcome.is_ok()));
}

#[test]
fn config_json_defaults_and_validation() {
    let cfg: ExperimentConfig = serde_json::from_str(r#"{"family": "Syn&S&Sh", "sigma": 0.05}"#).unwrap();
    assert_eq!(cfg.trials, 30);
    assert_eq!(cfg.size, 128);
    assert!(cfg.family.is_active_pho(PhoOp::S) && cfg.family.is_active_geo(GeoOp::Sh));
    assert!(serde_json::from_str::<ExperimentConfig>(r#"{"famly": "Syn&B"}"#).is_err());
    assert!(ExperimentConfig {
        trials: 0,
        ..cfg.clone()
    }
    .validate()
    .is_err());
    assert!(ExperimentConfig { sigma: -1.0, ..cfg }.validate().is_err());
}
