use alu_core::attack::{fit_gaussian, ulira_posterior};
use alu_core::bounds::{
    bound_learn_retrain_strongly_convex, bound_unlearn, decide_unlearn_vs_retrain,
    generalization_bound, lsi_convex, required_sigma, strongly_convex_decay, DataPartition,
    DivergenceBound, NoiseMode, NoiseRegime, UnlearnRegime,
};
use alu_core::model::{
    clipped_gradient, derive_profile, loss_gradient, loss_value, norm, project_ball, Dataset,
    Label, LabeledExample,
};
use alu_core::pngd::{run_pipeline, HyperParams, Pipeline};
use alu_core::renyi::{
    dv_objective, polysoftplus, polysoftplus_derivative, Discriminator, DiscriminatorSpec,
    Objective,
};
use proptest::prelude::*;
use proptest::sample::SizeRange;

const DIM: usize = 4;

fn example() -> impl Strategy<Value = LabeledExample> {
    (prop::collection::vec(-3.0..3.0f64, DIM), any::<bool>()).prop_map(|(x, pos)| {
        LabeledExample::new(x, if pos { Label::Pos } else { Label::Neg }).unwrap()
    })
}

fn examples(n: impl Into<SizeRange>) -> impl Strategy<Value = Vec<LabeledExample>> {
    prop::collection::vec(example(), n)
}

fn theta() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4.0..4.0f64, DIM)
}

fn hp(t: usize, k: usize) -> HyperParams {
    HyperParams {
        eta: 0.5,
        sigma: 0.3,
        t,
        k,
        radius: 3.0,
        alpha: 2.0,
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn clipped_gradient_norm_is_bounded(th in theta(), data in examples(1..20), lambda in 0.0..2.0f64, clip in 0.01..5.0f64) {
        let g = clipped_gradient(&th, &data, lambda, clip).unwrap();
        prop_assert!(norm(&g) <= clip * (1.0 + 1e-12));
    }

    #[test]
    fn loss_is_strongly_convex_on_segments(a in theta(), b in theta(), data in examples(1..20), lambda in 0.01..2.0f64) {
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let dist2: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
        let f = |t: &[f64]| loss_value(t, &data, lambda).unwrap();
        prop_assert!(f(&mid) <= 0.5 * (f(&a) + f(&b)) - lambda / 8.0 * dist2 + 1e-8);
    }

    #[test]
    fn loss_gradient_matches_central_differences(th in theta(), data in examples(1..20), lambda in 0.0..2.0f64) {
        let g = loss_gradient(&th, &data, lambda).unwrap();
        let h = 1e-5;
        for i in 0..DIM {
            let (mut up, mut dn) = (th.clone(), th.clone());
            up[i] += h;
            dn[i] -= h;
            let fd = (loss_value(&up, &data, lambda).unwrap() - loss_value(&dn, &data, lambda).unwrap()) / (2.0 * h);
            prop_assert!((g[i] - fd).abs() <= 1e-4 * g[i].abs().max(1e-3), "coordinate {i}: {} vs {fd}", g[i]);
        }
    }

    #[test]
    fn projection_is_a_contraction(u in theta(), v in theta(), r in 0.1..5.0f64) {
        let (pu, pv) = (project_ball(&u, r).unwrap(), project_ball(&v, r).unwrap());
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        prop_assert!(d(&pu.weights, &pv.weights) <= d(&u, &v) * (1.0 + 1e-12) + 1e-15);
        prop_assert!(norm(&pu.weights) <= r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pipeline_outputs_stay_in_the_ball(pubs in examples(0..8), retain in examples(1..8), forget in examples(0..4), seed in any::<u64>(), p in 0..3usize) {
        let ds = Dataset::new(pubs, retain, forget).unwrap();
        let pipeline = [Pipeline::Learn, Pipeline::Unlearn, Pipeline::Retrain][p];
        let profile = derive_profile(0.1, 1.0).unwrap();
        let hp = HyperParams { sigma: 3.0, ..hp(6, 3) };
        let th = run_pipeline(&ds, pipeline, &hp, &profile, seed, None).unwrap();
        prop_assert!(norm(&th.weights) <= hp.radius);
    }

    #[test]
    fn pipelines_ignore_row_order(pubs in examples(1..10), retain in examples(1..10), forget in examples(1..5), seed in any::<u64>(), rot in 0..10usize) {
        let profile = derive_profile(0.1, 1.0).unwrap();
        let ds = Dataset::new(pubs.clone(), retain.clone(), forget.clone()).unwrap();
        let shuffle = |mut v: Vec<LabeledExample>| {
            let k = rot % v.len();
            v.rotate_left(k);
            v.reverse();
            v
        };
        let permuted = Dataset::new(shuffle(pubs), shuffle(retain), shuffle(forget)).unwrap();
        for pipeline in [Pipeline::Learn, Pipeline::Unlearn, Pipeline::Retrain] {
            let a = run_pipeline(&ds, pipeline, &hp(8, 3), &profile, seed, None).unwrap();
            let b = run_pipeline(&permuted, pipeline, &hp(8, 3), &profile, seed, None).unwrap();
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&a.weights), bits(&b.weights));
        }
    }

    #[test]
    fn empty_forget_makes_unlearning_retraining(pubs in examples(0..8), retain in examples(1..8), seed in any::<u64>(), t in 0..10usize, k in 0..6usize) {
        let ds = Dataset::new(pubs, retain, vec![]).unwrap();
        let profile = derive_profile(0.1, 1.0).unwrap();
        let u = run_pipeline(&ds, Pipeline::Unlearn, &hp(t, k), &profile, seed, None).unwrap();
        let r = run_pipeline(&ds, Pipeline::Retrain, &hp(t, k), &profile, seed, None).unwrap();
        prop_assert_eq!(u, r);
    }
}

fn partition() -> impl Strategy<Value = DataPartition> {
    (0..5000usize, 1..5000usize)
        .prop_flat_map(|(n_pub, n_priv)| (Just(n_pub), Just(n_priv), 0..=n_priv))
        .prop_map(|(a, b, c)| DataPartition::new(a, b, c).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn asymmetric_noise_scales_with_private_share(part in partition(), lambda in 0.001..1.0f64, clip in 0.1..10.0f64, eps in 0.01..10.0f64, t in 1..100_000usize, alpha in 1.1..20.0f64) {
        let profile = derive_profile(lambda, clip).unwrap();
        let eta = 1.0 / profile.smoothness;
        let regime = NoiseRegime::StronglyConvexClosedForm;
        let s = required_sigma(alpha, &profile, &part, eps, t, eta, NoiseMode::Symmetric, &regime).unwrap().sigma;
        let a = required_sigma(alpha, &profile, &part, eps, t, eta, NoiseMode::Asymmetric, &regime).unwrap().sigma;
        let ratio = part.n_priv as f64 / part.n_total() as f64;
        prop_assert!((a - s * ratio).abs() <= 1e-12 * s.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn learn_retrain_bound_is_monotone(part in partition(), extra in 1..1000usize, sigma in 0.01..10.0f64, t in 1..10_000usize) {
        let profile = derive_profile(0.05, 1.0).unwrap();
        let b = |p: &DataPartition| bound_learn_retrain_strongly_convex(2.0, &profile, 1.0, sigma, t, p).unwrap().value;
        let more_pub = DataPartition::new(part.n_pub + extra, part.n_priv, part.n_forget).unwrap();
        prop_assert!(b(&more_pub) <= b(&part));
        if part.n_forget < part.n_priv {
            let more_forget = DataPartition::new(part.n_pub, part.n_priv, part.n_forget + 1).unwrap();
            prop_assert!(b(&more_forget) >= b(&part));
        }
        let none = DataPartition::new(part.n_pub, part.n_priv, 0).unwrap();
        prop_assert_eq!(b(&none), 0.0);
    }

    #[test]
    fn strongly_convex_unlearning_is_a_semigroup(d0 in 0.0..1e4f64, k1 in 0..500usize, k2 in 0..500usize, sigma in 0.01..2.0f64, eta in 0.01..2.0f64) {
        let m = 0.05;
        let c = 2.0 * sigma * sigma / m;
        let profile = derive_profile(m, 1.0).unwrap();
        let h = HyperParams { eta, sigma, ..hp(10, 0) };
        let init = DivergenceBound::user_supplied(d0, 2.0).unwrap();
        let regime = UnlearnRegime::StronglyConvex { c };
        let b = |k| bound_unlearn(&init, k, 2.0, &h, &profile, &regime).unwrap().value;
        prop_assert_eq!(b(0), d0);
        prop_assert!(b(k1 + 1) <= b(k1));
        let composed = d0 * strongly_convex_decay(k1, 2.0, eta, sigma, c) * strongly_convex_decay(k2, 2.0, eta, sigma, c);
        prop_assert!((b(k1 + k2) - composed).abs() <= 1e-12 * d0.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn unlearn_preference_flips_at_most_once(n_priv in 10..5000usize, frac in 0.01..1.0f64, sigma in 0.05..5.0f64, t in 1..500usize) {
        let n_forget = ((n_priv as f64 * frac) as usize).max(1);
        let mut seen_true = false;
        for n_pub in (0..20).map(|i| i * i * 250) {
            let part = DataPartition::new(n_pub, n_priv, n_forget).unwrap();
            let d = decide_unlearn_vs_retrain(1.0, 2.0, sigma, 1.0, 1.0, 0.05, 1.0, &part, t).unwrap();
            prop_assert!(!seen_true || d.unlearn_preferred, "flipped back at n_pub = {}", n_pub);
            seen_true |= d.unlearn_preferred;
        }
    }

    #[test]
    fn mismatch_bound_is_monotone(d in 0.0..3.0f64, da in 0.0..10.0f64, risk in 0.0..5.0f64, step in 0.001..1.0f64, n_pub in 0..1000usize, n_ret in 1..1000usize) {
        let g = |d: f64, da: f64, risk: f64| generalization_bound(d, n_pub, n_ret, risk, 1.0, 2.0, da).unwrap().total;
        let base = g(d, da, risk);
        prop_assert!(g(d + step, da, risk) >= base);
        prop_assert!(g(d, da + step, risk) >= base);
        prop_assert!(g(d, da, risk + step) >= base);
    }

    #[test]
    fn posterior_is_symmetric_in_the_fits(score in -50.0..50.0f64, a in prop::collection::vec(-5.0..5.0f64, 2..10), b in prop::collection::vec(-5.0..5.0f64, 2..10)) {
        let (fu, fr) = (fit_gaussian(&a).unwrap(), fit_gaussian(&b).unwrap());
        let p = ulira_posterior(score, &fu, &fr).value;
        let q = ulira_posterior(score, &fr, &fu).value;
        prop_assert_eq!(p + q, 1.0);
    }

    #[test]
    fn polysoftplus_is_negative_and_decreasing(x in -1e6..1e6f64, dx in 1e-6..10.0f64) {
        prop_assert!(polysoftplus(x) < 0.0);
        prop_assert!(polysoftplus(x + dx) < polysoftplus(x));
        prop_assert!(polysoftplus_derivative(x) < 0.0);
    }

    #[test]
    fn dv_objective_vanishes_at_constant_witnesses(c in -100.0..100.0f64, np in 1..50usize, nq in 1..50usize, alpha in 1.01..10.0f64) {
        prop_assert_eq!(dv_objective(&vec![c; np], &vec![c; nq], alpha).unwrap(), 0.0);
    }
}

#[test]
fn convex_lsi_matches_unrolled_recurrence() {
    let (c0, eta, sigma) = (0.7, 0.3, 1.9);
    let k = 10_000;
    let closed = lsi_convex(c0, eta, sigma, k).unwrap();
    let mut c = c0;
    for i in 0..=k {
        assert!((closed.constants[i] - c).abs() <= 1e-12 * c, "k = {i}");
        c += 2.0 * eta * sigma * sigma;
    }
}

#[test]
fn polysoftplus_is_c1_at_zero() {
    let h = 1e-6;
    let left = (polysoftplus(0.0) - polysoftplus(-h)) / h;
    let right = (polysoftplus(h) - polysoftplus(0.0)) / h;
    assert!((left + 1.0).abs() < 1e-5 && (right + 1.0).abs() < 1e-5);
}

fn rows(strategy_seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n as u64)
        .map(|i| alu_core::noise::standard_normal(strategy_seed, i, d))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn discriminator_respects_its_lipschitz_bound(seed in any::<u64>(), data_seed in any::<u64>(), d in 1..6usize) {
        let spec = DiscriminatorSpec { hidden_width: 8, ..DiscriminatorSpec::for_objective(d, Objective::Dv) };
        let mut net = Discriminator::new(spec, seed).unwrap();
        for _ in 0..200 {
            net.power_step();
        }
        let xs = rows(data_seed, 20, d);
        let refs: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let out = net.forward(&refs).unwrap();
        let bound = net.spec.lipschitz_bound();
        for i in 0..xs.len() {
            for j in 0..i {
                let dx = xs[i].iter().zip(&xs[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                prop_assert!((out[i] - out[j]).abs() <= 1.05 * bound * dx);
            }
        }
    }

    #[test]
    fn backprop_matches_central_differences(seed in any::<u64>(), data_seed in any::<u64>(), d in 1..4usize, cc in any::<bool>()) {
        let objective = if cc { Objective::Cc } else { Objective::Dv };
        let spec = DiscriminatorSpec { hidden_width: 5, ..DiscriminatorSpec::for_objective(d, objective) };
        let mut net = Discriminator::new(spec, seed).unwrap();
        let (p, q) = (rows(data_seed, 7, d), rows(data_seed ^ 1, 6, d));
        let (p, q): (Vec<&[f64]>, Vec<&[f64]>) = (p.iter().map(|v| v.as_slice()).collect(), q.iter().map(|v| v.as_slice()).collect());
        let (_, grads) = net.objective_and_grad(&p, &q, objective, 2.0).unwrap();
        let g = grads.flatten();
        let theta = net.params();
        let h = 1e-6;
        for i in 0..theta.len() {
            let mut at = |delta: f64| {
                let mut t = theta.clone();
                t[i] += delta;
                net.set_params(&t).unwrap();
                net.objective(&p, &q, objective, 2.0).unwrap()
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            prop_assert!((g[i] - fd).abs() <= 1e-4 * g[i].abs().max(1e-2), "param {i}: {} vs {fd} (rel {})", g[i], rel_err(g[i], fd));
        }
    }
}
