//! Attribution checked against values computed independently at 50
//! significant digits (mpmath re-evaluation of the forward pass and of the
//! Riemann sum with hand-derived gradients).

#![allow(clippy::excessive_precision)]

use approx::assert_abs_diff_eq;
use condsel::attribution::{
    all_block_conductances, conductance_vector, layer_conductance, objective, AttributionConfig, Block, BlockKind,
    ToyNetwork,
};

const X: [f64; 4] = [0.5, -0.3, 0.8, -0.1];

fn seed0_net() -> ToyNetwork {
    ToyNetwork::seeded(0, &[4, 8, 4], BlockKind::AffineTanh).unwrap()
}

#[test]
fn seed0_forward_matches_extended_precision() {
    let fwd = seed0_net().forward(&X).unwrap();
    let expected = [
        0.296_856_062_970_080_305_75,
        0.016_305_092_584_451_526_315,
        0.539_166_232_710_615_314_83,
        -0.009_314_638_067_179_026_741_6,
    ];
    for (got, want) in fwd.embedding().iter().zip(expected) {
        assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
    }
}

#[test]
fn seed0_conductance_matches_extended_precision() {
    let net = seed0_net();
    let cfg = AttributionConfig::with_steps(8);
    let block0 = [
        0.110_801_742_165_626_947_58,
        -0.072_133_110_166_276_170_823,
        0.112_900_115_050_893_969_61,
        0.197_678_295_496_872_633_51,
        0.000_893_049_607_963_573_785_86,
        -0.002_733_461_023_453_014_115_7,
        -0.061_818_120_484_284_438_018,
        0.134_289_955_543_695_724_54,
    ];
    let block1 = [
        0.130_754_367_402_060_041_7,
        -0.072_223_651_342_049_773_474,
        0.375_066_571_371_472_509_07,
        -0.001_843_254_923_354_213_835_1,
    ];
    let all = all_block_conductances(&net, &X, &cfg).unwrap();
    for (got, want) in all[0].per_neuron.iter().zip(block0) {
        assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
    }
    for (got, want) in all[1].per_neuron.iter().zip(block1) {
        assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
    }
    assert_abs_diff_eq!(all[0].score, 0.086_655_981_192_383_308_997, epsilon = 1e-12);
    assert_abs_diff_eq!(all[1].score, 0.144_971_961_259_734_134_52, epsilon = 1e-12);
    assert_eq!(layer_conductance(&net, 1, &X, &cfg).unwrap(), all[1]);
}

fn identity_then_scale() -> ToyNetwork {
    ToyNetwork::new(
        2,
        vec![
            Block::new(BlockKind::Affine, vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]).unwrap(),
            Block::new(BlockKind::AffineTanh, vec![vec![2.0, 0.0], vec![0.0, 3.0]], vec![0.0, 0.0]).unwrap(),
        ],
    )
    .unwrap()
}

#[test]
fn identity_then_scale_matches_brute_force_riemann_sum() {
    let net = identity_then_scale();
    let x = [0.3, -0.5];
    let cases = [
        (4, [0.451_578_145_654_092_122_95, 0.527_502_451_489_720_367_05]),
        (16, [0.507_926_096_732_408_650_98, 0.526_598_735_755_841_558_73]),
    ];
    for (steps, want) in cases {
        let got = conductance_vector(&net, &x, &AttributionConfig::with_steps(steps)).unwrap();
        assert_eq!(got.len(), 2);
        for (g, w) in got.iter().zip(want) {
            assert_abs_diff_eq!(*g, w, epsilon = 1e-12);
        }
    }
    let block0 = layer_conductance(&net, 0, &x, &AttributionConfig::with_steps(4)).unwrap();
    assert_abs_diff_eq!(block0.per_neuron[0], 0.224_964_457_739_009_392_57, epsilon = 1e-12);
    assert_abs_diff_eq!(block0.per_neuron[1], 0.678_191_833_569_174_853_33, epsilon = 1e-12);
}

/// Central finite differences of the objective with respect to the block
/// output, as an oracle for the hand-written backward pass at n = 1.
#[test]
fn single_step_matches_finite_differences() {
    let net = seed0_net();
    let cfg = AttributionConfig::with_steps(1);
    let c = layer_conductance(&net, 1, &X, &cfg).unwrap();
    let y = net.forward(&X).unwrap().embedding().to_vec();
    let y0 = net.forward(&[0.0; 4]).unwrap().embedding().to_vec();
    let h = 1e-6;
    for j in 0..y.len() {
        let mut up = y.clone();
        let mut down = y.clone();
        up[j] += h;
        down[j] -= h;
        let grad = (objective(&up) - objective(&down)) / (2.0 * h);
        assert_abs_diff_eq!(c.per_neuron[j], grad * (y[j] - y0[j]), epsilon = 1e-8);
    }
}

#[test]
fn completeness_at_256_steps() {
    let net = seed0_net();
    let delta = objective(net.forward(&X).unwrap().embedding()) - objective(net.forward(&[0.0; 4]).unwrap().embedding());
    let sum = |steps| -> f64 {
        all_block_conductances(&net, &X, &AttributionConfig::with_steps(steps)).unwrap()[1]
            .per_neuron
            .iter()
            .sum()
    };
    let reference = sum(100_000);
    assert!((reference - delta).abs() <= 1e-5);
    // First-order rule: the completeness gap roughly halves per doubling.
    let gaps: Vec<f64> = [64, 128, 256, 512].iter().map(|&n| (sum(n) - delta).abs()).collect();
    for pair in gaps.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((1.8..=2.2).contains(&ratio), "ratio {ratio} from {gaps:?}");
    }
    assert!(gaps[2] < 5e-3, "gap at 256 steps {}", gaps[2]);
}

#[test]
fn every_block_is_complete() {
    let net = ToyNetwork::seeded(5, &[3, 6, 5, 2], BlockKind::AffineTanh).unwrap();
    let x = [0.4, -0.9, 0.2];
    let delta = objective(net.forward(&x).unwrap().embedding()) - objective(net.forward(&[0.0; 3]).unwrap().embedding());
    for b in all_block_conductances(&net, &x, &AttributionConfig::with_steps(4096)).unwrap() {
        let total: f64 = b.per_neuron.iter().sum();
        assert!((total - delta).abs() < 1e-3, "block {} gap {}", b.block_index, total - delta);
        assert!(b.score >= 0.0);
    }
}

#[test]
fn deterministic_bits() {
    let net = seed0_net();
    let cfg = AttributionConfig::default();
    let a = conductance_vector(&net, &X, &cfg).unwrap();
    let b = conductance_vector(&net, &X, &cfg).unwrap();
    assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
}
