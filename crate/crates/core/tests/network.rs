use eegnext::nn::{build_network, NetworkMeta, NnError, StemMode, TensorF32, WeightArchive, TAP_NAMES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn meta(c: usize, s: usize, t: usize, l: usize) -> NetworkMeta {
    NetworkMeta {
        n_channels: c,
        n_scales: s,
        n_samples: t,
        n_labels: l,
        stem: StemMode::Adapter,
    }
}

fn random_input(rng: &mut ChaCha8Rng, dims: Vec<usize>) -> TensorF32 {
    let n = dims.iter().product();
    TensorF32::new(dims, (0..n).map(|_| rng.gen_range(0.0f32..1.0)).collect()).unwrap()
}

fn expected_taps(s: usize, t: usize, l: usize) -> Vec<(&'static str, Vec<usize>)> {
    vec![
        ("stem.conv", vec![3, s, t]),
        ("stem.gelu", vec![3, s, t]),
        ("resize", vec![3, 64, 64]),
        ("patchify", vec![96, 16, 16]),
        ("ln0", vec![96, 16, 16]),
        ("stage1", vec![96, 16, 16]),
        ("ln1", vec![96, 16, 16]),
        ("down1", vec![192, 8, 8]),
        ("stage2", vec![192, 8, 8]),
        ("ln2", vec![192, 8, 8]),
        ("down2", vec![384, 4, 4]),
        ("stage3", vec![384, 4, 4]),
        ("ln3", vec![384, 4, 4]),
        ("down3", vec![768, 2, 2]),
        ("stage4", vec![768, 2, 2]),
        ("pool", vec![768, 1, 1]),
        ("ln4", vec![768, 1, 1]),
        ("features", vec![768]),
        ("logits", vec![l]),
    ]
}

#[test]
fn tap_dims_follow_the_architecture_table() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (c, s, t, l) = (2, 20, 90, 3);
    let net = build_network(meta(c, s, t, l), 1).unwrap();
    let x = random_input(&mut rng, vec![2, c, s, t]);
    let (logits, taps) = net.forward_taps(&x).unwrap();
    assert_eq!(logits.dims(), &[2, l]);
    let names: Vec<&str> = taps.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, TAP_NAMES.to_vec());
    for ((name, tensor), (en, dims)) in taps.iter().zip(expected_taps(s, t, l)) {
        assert_eq!(name, en);
        assert_eq!(&tensor.dims()[1..], &dims[..], "tap {name}");
        assert!(tensor.is_finite(), "tap {name}");
    }
    let static_dims = net.layer_output_dims();
    assert_eq!(static_dims.last().unwrap().1, vec![l]);
}

#[test]
fn batch_rows_are_independent_and_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let net = build_network(meta(1, 12, 40, 2), 3).unwrap();
    let batch = random_input(&mut rng, vec![8, 1, 12, 40]);
    let full = net.forward(&batch).unwrap();
    let again = net.forward(&batch).unwrap();
    assert_eq!(
        full.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        again.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    let single = net.forward(&batch.batch_item(5)).unwrap();
    assert_eq!(
        single.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        full.data()[10..12].iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn zero_input_with_zero_head_gives_uniform_logits() {
    let mut net = build_network(meta(2, 8, 32, 4), 0).unwrap();
    net.set_param("head.w", TensorF32::zeros(vec![4, 768])).unwrap();
    let logits = net.forward(&TensorF32::zeros(vec![2, 2, 8, 32])).unwrap();
    assert!(logits.data().iter().all(|&v| v == logits.data()[0]));
}

#[test]
fn features_of_zero_input_are_identical_rows() {
    let net = build_network(meta(1, 8, 16, 2), 4).unwrap();
    let f = net.features(&TensorF32::zeros(vec![3, 1, 8, 16])).unwrap();
    assert_eq!(f.dims(), &[3, 768]);
    assert_eq!(f.data()[..768], f.data()[768..1536]);
    assert_eq!(f.data()[..768], f.data()[1536..]);
}

#[test]
fn input_dims_are_checked() {
    let net = build_network(meta(2, 8, 16, 2), 0).unwrap();
    assert!(matches!(
        net.forward(&TensorF32::zeros(vec![1, 3, 8, 16])),
        Err(NnError::ShapeMismatch(_))
    ));
}

#[test]
fn non_finite_input_is_reported_with_layer() {
    let net = build_network(meta(1, 8, 16, 2), 0).unwrap();
    let mut x = TensorF32::zeros(vec![1, 1, 8, 16]);
    x.data_mut()[3] = f32::INFINITY;
    match net.forward(&x) {
        Err(NnError::NonFiniteActivation { layer }) => assert_eq!(layer, "stem.conv"),
        other => panic!("expected NonFiniteActivation, got {other:?}"),
    }
}

#[test]
fn save_load_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.eegw");
    let a = build_network(meta(2, 8, 16, 3), 10).unwrap();
    a.save_weights(&path).unwrap();
    let mut b = build_network(meta(2, 8, 16, 3), 11).unwrap();
    assert_ne!(a.params(), b.params());
    let summary = b.load_weights(&WeightArchive::load(&path).unwrap(), true).unwrap();
    assert!(summary.missing.is_empty());
    for ((na, ta), (nb, tb)) in a.params().iter().zip(b.params().iter()) {
        assert_eq!(na, nb);
        let ba: Vec<u32> = ta.data().iter().map(|v| v.to_bits()).collect();
        let bb: Vec<u32> = tb.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(ba, bb, "{na}");
    }
}

#[test]
fn strict_and_non_strict_loading() {
    let src = build_network(meta(2, 8, 16, 3), 20).unwrap();
    let mut archive = src.params().clone();
    archive.retain(|n| !n.starts_with("head.") && !n.starts_with("stem."));
    archive.insert("whitener/s01", TensorF32::zeros(vec![2, 2]));

    let mut strict = build_network(meta(2, 8, 16, 3), 21).unwrap();
    let before = strict.params().clone();
    match strict.load_weights(&archive, true) {
        Err(NnError::MissingTensor(name)) => assert!(name.starts_with("stem.") || name.starts_with("head.")),
        other => panic!("expected MissingTensor, got {other:?}"),
    }
    assert_eq!(strict.params(), &before);

    let mut loose = build_network(meta(2, 8, 16, 3), 21).unwrap();
    let summary = loose.load_weights(&archive, false).unwrap();
    assert_eq!(summary.missing, vec!["stem.conv.w", "stem.conv.b", "head.w", "head.b"]);
    assert_eq!(summary.unused, vec!["whitener/s01"]);
    assert_eq!(loose.param("head.w").unwrap(), before.get("head.w").unwrap());
    assert_eq!(loose.param("stage3.block4.fc1.w").unwrap(), src.param("stage3.block4.fc1.w").unwrap());
}

#[test]
fn shape_errors_abort_before_assignment() {
    let mut net = build_network(meta(2, 8, 16, 3), 0).unwrap();
    let before = net.params().clone();
    let mut archive = net.params().clone();
    archive.insert("patchify.b", TensorF32::zeros(vec![96]));
    archive.insert("head.b", TensorF32::zeros(vec![5]));
    assert!(matches!(net.load_weights(&archive, false), Err(NnError::ShapeMismatch(_))));
    assert_eq!(net.params(), &before);
}

#[test]
fn imagenet_layout_loads_into_bypassed_stem() {
    let m = NetworkMeta {
        n_channels: 3,
        n_scales: 64,
        n_samples: 64,
        n_labels: 1000,
        stem: StemMode::Bypass,
    };
    let reference = build_network(m, 5).unwrap();
    let mut net = build_network(m, 6).unwrap();
    let summary = net.load_weights(reference.params(), true).unwrap();
    assert_eq!(summary.loaded.len(), reference.params().len());
    let x = TensorF32::full(vec![1, 3, 64, 64], 0.5);
    assert_eq!(net.forward(&x).unwrap(), reference.forward(&x).unwrap());
}
