use approx::assert_abs_diff_eq;
use telltale::channel::{oracle_extract, NoiseSpec, WatermarkBundle};
use telltale::metrics::{iou, mae};
use telltale::patterns::{make_references, PatternConfig};
use telltale::reasoner::{
    fd_gradient, optimize_geo, optimize_pho, reason_chain, reason_geometric, reason_semantic, render_geo, render_pho,
    FnObjective, GeoResult, ReasonConfig,
};
use telltale::transforms::{
    apply_geometric, apply_photometric, random_mask, ChainSpec, ClassMember, Fill, GeoBlock, GeoOp, GeoOrder,
    GeoParams, PhoOp, PhoOrder, PhoParams, SemanticEdit,
};
use telltale::Image;

fn refs(n: usize) -> WatermarkBundle {
    make_references(&PatternConfig::with_size(n, n)).unwrap()
}

fn identity_geo() -> GeoResult {
    GeoResult {
        order: GeoOrder::canonical(),
        params: GeoParams::identity(),
        loss: 0.0,
        trace: vec![],
    }
}

#[test]
fn fd_gradient_of_a_quadratic() {
    let mut f = FnObjective(|x: &[f64]| x.iter().map(|v| v * v).sum());
    let g = fd_gradient(&mut f, &[1.0, -2.0], &[1e-3, 1e-3]);
    assert_abs_diff_eq!(g[0], 2.0, epsilon = 1e-9);
    assert_abs_diff_eq!(g[1], -4.0, epsilon = 1e-9);
}

#[test]
fn fd_gradient_of_a_constant_is_zero() {
    let mut f = FnObjective(|_: &[f64]| 3.5);
    assert_eq!(fd_gradient(&mut f, &[0.3, 0.1, 9.0], &[1e-3; 3]), vec![0.0; 3]);
}

#[test]
fn geometric_loss_is_stationary_at_the_truth() {
    let r = refs(128);
    let order = GeoOrder::canonical();
    let render = |p: &GeoParams| apply_geometric(&r.geo, &order, p).unwrap();
    for truth in [
        GeoParams {
            ro: 0.3,
            ..GeoParams::identity()
        },
        GeoParams {
            tr_x: 0.1,
            ..GeoParams::identity()
        },
    ] {
        let target = render(&truth);
        let mut loss = FnObjective(|x: &[f64]| mae(&render(&GeoParams::from_slice(x)), &target).unwrap());
        let x0 = truth.to_array();
        assert!(loss.0(&x0) <= 1e-9);
        // an L1 minimum is a kink: every one-sided move must cost something
        for i in 0..6 {
            for h in [1e-3, -1e-3, 1e-2, -1e-2] {
                let mut x = x0;
                x[i] += h;
                assert!(loss.0(&x) > 0.0, "coordinate {i} step {h}");
            }
        }
        // zero fill makes zooming out cost more than zooming in, so only the
        // translation gradient is symmetric enough to vanish
        let g = fd_gradient(&mut loss, &x0, &[1e-3; 6]);
        assert!(g[1].hypot(g[2]) <= 1e-3 * 4.0, "{g:?}");
    }
}

#[test]
fn identity_target_is_explained_from_the_first_iteration() {
    let r = refs(64);
    let res = optimize_geo(&r.geo, &r.geo, GeoOrder::canonical(), &ReasonConfig::default()).unwrap();
    assert_eq!(res.trace[0], 0.0);
    assert_eq!(res.loss, 0.0);
    assert_eq!(res.params, GeoParams::identity());
}

#[test]
fn recovers_a_rotation() {
    let r = refs(128);
    let chain = ChainSpec::identity().with_geometric(
        GeoOrder::canonical(),
        GeoParams {
            ro: 0.3,
            ..GeoParams::identity()
        },
    );
    let bundle = oracle_extract(&r, &chain, NoiseSpec::NONE).unwrap();
    let res = reason_geometric(&bundle, &r, &ReasonConfig::default()).unwrap();
    assert_abs_diff_eq!(res.params.ro, 0.3, epsilon = 0.01);
    let rendered = render_geo(&r.geo, &res.order, &res.params).unwrap();
    assert_abs_diff_eq!(res.loss, mae(&rendered, &bundle.geo).unwrap(), epsilon = 1e-9);
}

#[test]
fn trace_never_increases() {
    let r = refs(64);
    let order = GeoOrder::canonical();
    let target = apply_geometric(
        &r.geo,
        &order,
        &GeoParams {
            sc: 1.1,
            tr_x: 0.05,
            ..GeoParams::identity()
        },
    )
    .unwrap();
    let res = optimize_geo(&r.geo, &target, order, &ReasonConfig::default()).unwrap();
    assert!(res.trace.len() > 1);
    for w in res.trace.windows(2) {
        assert!(w[1] <= w[0], "{} then {}", w[0], w[1]);
    }
    assert_eq!(*res.trace.last().unwrap(), res.loss);
}

#[test]
fn identity_chain_is_explained_exactly() {
    let r = refs(64);
    let bundle = oracle_extract(&r, &ChainSpec::identity(), NoiseSpec::NONE).unwrap();
    let hyp = reason_chain(&bundle, &r, &ReasonConfig::default()).unwrap();
    assert!(hyp.geometric.loss <= 1e-6);
    assert!(hyp.photometric.loss <= 1e-6);
    assert_eq!(hyp.geometric.params, GeoParams::identity());
    assert_eq!(hyp.photometric.params, PhoParams::identity());
}

#[test]
fn translation_and_rotation_re_render() {
    let r = refs(128);
    let chain = ChainSpec::identity().with_geometric(
        GeoOrder::new([GeoOp::Tr, GeoOp::Ro, GeoOp::Sc, GeoOp::Sh]).unwrap(),
        GeoParams {
            tr_x: 0.15,
            ro: 0.4,
            ..GeoParams::identity()
        },
    );
    let bundle = oracle_extract(&r, &chain, NoiseSpec::NONE).unwrap();
    let hyp = reason_chain(&bundle, &r, &ReasonConfig::default()).unwrap();
    let rendered = render_geo(&r.geo, &hyp.geometric.order, &hyp.geometric.params).unwrap();
    assert!(mae(&rendered, &bundle.geo).unwrap() <= 0.01);
}

#[test]
fn recovers_a_hue_shift() {
    let r = refs(64);
    let order = PhoOrder::canonical();
    let target = apply_photometric(
        &r.pho,
        &order,
        &PhoParams {
            h: 0.3,
            ..PhoParams::identity()
        },
    )
    .unwrap();
    let res = optimize_pho(
        &r.pho,
        &target,
        order,
        &identity_geo().block(),
        &ReasonConfig::default(),
    )
    .unwrap();
    assert_abs_diff_eq!(res.params.h, 0.3, epsilon = 0.02);
}

#[test]
fn recovers_brightness_through_a_known_warp() {
    let r = refs(64);
    let geo = GeoBlock {
        order: GeoOrder::canonical(),
        params: GeoParams {
            ro: 0.2,
            ..GeoParams::identity()
        },
    };
    let order = PhoOrder::canonical();
    let truth = PhoParams {
        b: 1.25,
        ..PhoParams::identity()
    };
    let target = geo.apply(&apply_photometric(&r.pho, &order, &truth).unwrap()).unwrap();
    let res = optimize_pho(&r.pho, &target, order, &geo, &ReasonConfig::default()).unwrap();
    assert_abs_diff_eq!(res.params.b, 1.25, epsilon = 0.05);
    let g = GeoResult {
        params: geo.params,
        ..identity_geo()
    };
    let rendered = render_pho(&r.pho, &order, &res.params, &g).unwrap();
    assert_abs_diff_eq!(mae(&rendered, &target).unwrap(), res.loss, epsilon = 1e-9);
}

#[test]
fn semantic_mask_is_the_binarized_channel() {
    let r = refs(48);
    let mask = random_mask(48, 48, 5).unwrap();
    let chain = ChainSpec::identity()
        .with_semantic(SemanticEdit::new(mask.clone(), Fill::Surrogate { seed: 2 }).unwrap())
        .with_photometric(
            PhoOrder::canonical(),
            PhoParams {
                s: 0.8,
                ..PhoParams::identity()
            },
        );
    let bundle = oracle_extract(&r, &chain, NoiseSpec::NONE).unwrap();
    let (soft, hard) = reason_semantic(&bundle, 0.5);
    assert_eq!(soft, bundle.sem);
    assert!(hard.is_binary());
    assert_eq!(iou(&hard, &mask).unwrap(), 1.0);

    let empty = Image::zeros(48, 48, 1).unwrap();
    let (_, none) = reason_semantic(
        &oracle_extract(&r, &ChainSpec::identity(), NoiseSpec::NONE).unwrap(),
        0.5,
    );
    assert_eq!(iou(&none, &empty).unwrap(), 1.0);
}

#[test]
fn reasoning_is_deterministic() {
    let r = refs(64);
    let chain = ChainSpec::identity()
        .with_photometric(
            PhoOrder::canonical(),
            PhoParams {
                c: 0.9,
                ..PhoParams::identity()
            },
        )
        .with_geometric(
            GeoOrder::canonical(),
            GeoParams {
                sc: 0.9,
                ..GeoParams::identity()
            },
        );
    let bundle = oracle_extract(&r, &chain, NoiseSpec::new(0.05, 9).unwrap()).unwrap();
    let cfg = ReasonConfig::default();
    let a = reason_chain(&bundle, &r, &cfg).unwrap();
    let b = reason_chain(&bundle, &r, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn exhaustive_search_agrees_on_a_single_operation() {
    let r = refs(64);
    let chain = ChainSpec::identity().with_photometric(
        PhoOrder::canonical(),
        PhoParams {
            s: 1.2,
            ..PhoParams::identity()
        },
    );
    let bundle = oracle_extract(&r, &chain, NoiseSpec::NONE).unwrap();
    let cfg = ReasonConfig {
        search: telltale::reasoner::Search::Exhaustive,
        max_iter: 40,
        ..ReasonConfig::default()
    };
    let hyp = reason_chain(&bundle, &r, &cfg).unwrap();
    assert!(hyp.photometric.loss <= 0.02, "loss {}", hyp.photometric.loss);
    assert_eq!(PhoOp::ALL.len(), 4);
}

#[test]
fn invalid_config_is_rejected() {
    let r = refs(32);
    let cfg = ReasonConfig {
        max_iter: 0,
        ..ReasonConfig::default()
    };
    assert!(optimize_geo(&r.geo, &r.geo, GeoOrder::canonical(), &cfg).is_err());
}
