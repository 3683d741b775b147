use rand::Rng;
use swapbal_core::nn::{HeadLayout, PolicyParams};
use swapbal_core::ppo::corridor::{Corridor, OPTIMAL_RETURN};
use swapbal_core::ppo::{
    act_greedy, action_log_prob, compute_gae, head_log_probs, loss, loss_and_grad, sample_action, train,
    Environment, LossCoefficients, Sample, TrainConfig,
};
use swapbal_core::rng::{rng_from_seed, SimRng};

/// Direct double sum: A_t = sum_k (gamma lambda)^(k-t) delta_k, cut after the first done.
fn gae_brute(r: &[f64], v: &[f64], d: &[bool], boot: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = r.len();
    let next_v = |k: usize| if k + 1 < n { v[k + 1] } else { boot };
    let delta = |k: usize| r[k] + if d[k] { 0.0 } else { gamma * next_v(k) } - v[k];
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            for k in t..n {
                sum += (gamma * lambda).powi((k - t) as i32) * delta(k);
                if d[k] {
                    break;
                }
            }
            sum
        })
        .collect()
}

#[test]
fn gae_matches_double_sum() {
    let mut rng = rng_from_seed(7);
    for _ in 0..100 {
        let n = rng.gen_range(1..=50);
        let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.1)).collect();
        let boot = rng.gen_range(-1.0..1.0);
        let gamma = rng.gen_range(0.8..1.0);
        let lambda = rng.gen_range(0.0..1.0);
        let (adv, ret) = compute_gae(&r, &v, &d, boot, gamma, lambda);
        let want = gae_brute(&r, &v, &d, boot, gamma, lambda);
        for t in 0..n {
            assert!((adv[t] - want[t]).abs() <= 1e-10, "t={t}: {} vs {}", adv[t], want[t]);
            assert!((ret[t] - (want[t] + v[t])).abs() <= 1e-10);
        }
    }
}

fn random_params(obs_len: usize, components: &[usize], layout: HeadLayout, rng: &mut SimRng) -> PolicyParams {
    let mut p = PolicyParams::zeros(obs_len, 5, components, layout);
    for x in &mut p.data {
        *x = rng.gen_range(-0.8..0.8);
    }
    p
}

/// Forward pass written against the documented flat layout.
fn reference_forward(p: &PolicyParams, x: &[f64]) -> (Vec<f64>, f64) {
    let (n, h) = (p.obs_len, p.hidden);
    let logits: usize = p.head_sizes().iter().sum();
    let d = &p.data;
    let mut at = 0;
    let mut dense = |inp: &[f64], out: usize| -> Vec<f64> {
        let w = at;
        let b = at + out * inp.len();
        at = b + out;
        (0..out)
            .map(|o| d[b + o] + (0..inp.len()).map(|i| d[w + o * inp.len() + i] * inp[i]).sum::<f64>())
            .collect()
    };
    assert_eq!(x.len(), n);
    let h1: Vec<f64> = dense(x, h).into_iter().map(f64::tanh).collect();
    let h2: Vec<f64> = dense(&h1, h).into_iter().map(f64::tanh).collect();
    let l = dense(&h2, logits);
    let v = dense(&h2, 1)[0];
    (l, v)
}

#[test]
fn forward_matches_reference() {
    let mut rng = rng_from_seed(3);
    for layout in [HeadLayout::Factorized, HeadLayout::Joint] {
        let p = random_params(6, &[3, 2, 4], layout, &mut rng);
        for _ in 0..20 {
            let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let out = p.forward(&x).unwrap();
            let (l, v) = reference_forward(&p, &x);
            let flat: Vec<f64> = out.logits.concat();
            assert_eq!(flat.len(), l.len());
            for (a, b) in flat.iter().zip(&l) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((out.value - v).abs() < 1e-12);
        }
    }
}

fn random_batch(p: &PolicyParams, size: usize, rng: &mut SimRng) -> Vec<Sample> {
    (0..size)
        .map(|_| {
            let observation: Vec<f64> = (0..p.obs_len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let action: Vec<usize> = p.components.iter().map(|&c| rng.gen_range(0..c)).collect();
            let lp = action_log_prob(p, &observation, &action).unwrap();
            Sample {
                observation,
                action,
                // keep ratios well away from the clip boundaries
                old_log_prob: lp + rng.gen_range(-0.1..0.1),
                advantage: rng.gen_range(-1.0..1.0),
                ret: rng.gen_range(-1.0..1.0),
            }
        })
        .collect()
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let coef = LossCoefficients {
        clip_ratio: 0.2,
        value_coef: 0.5,
        entropy_coef: 0.01,
    };
    let mut rng = rng_from_seed(11);
    let mut worst = 0.0f64;
    for trial in 0..10 {
        let layout = if trial % 2 == 0 { HeadLayout::Factorized } else { HeadLayout::Joint };
        let mut p = random_params(4, &[3, 2], layout, &mut rng);
        let batch = random_batch(&p, 6, &mut rng);
        let (_, grad) = loss_and_grad(&p, &batch, coef).unwrap();
        let eps = 1e-5;
        for i in 0..p.len() {
            let x = p.data[i];
            p.data[i] = x + eps;
            let up = loss(&p, &batch, coef).unwrap().total;
            p.data[i] = x - eps;
            let down = loss(&p, &batch, coef).unwrap().total;
            p.data[i] = x;
            let fd = (up - down) / (2.0 * eps);
            let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    assert!(worst <= 1e-4, "max relative error {worst:e}");
}

#[test]
fn sampled_log_prob_is_consistent() {
    let mut rng = rng_from_seed(5);
    for layout in [HeadLayout::Factorized, HeadLayout::Joint] {
        let p = random_params(5, &[4, 3], layout, &mut rng);
        for _ in 0..50 {
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (a, lp, v) = sample_action(&p, &x, &mut rng).unwrap();
            assert!((lp - action_log_prob(&p, &x, &a).unwrap()).abs() <= 1e-12);
            assert!((v - p.forward(&x).unwrap().value).abs() <= 1e-12);
        }
    }
}

#[test]
fn greedy_picks_the_most_probable_action() {
    let mut rng = rng_from_seed(9);
    for layout in [HeadLayout::Factorized, HeadLayout::Joint] {
        let p = random_params(5, &[4, 3], layout, &mut rng);
        for _ in 0..30 {
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g = act_greedy(&p, &x).unwrap();
            let best = action_log_prob(&p, &x, &g).unwrap();
            for a0 in 0..4 {
                for a1 in 0..3 {
                    assert!(action_log_prob(&p, &x, &[a0, a1]).unwrap() <= best + 1e-12);
                }
            }
        }
    }
}

#[test]
fn head_probabilities_sum_to_one() {
    let mut rng = rng_from_seed(1);
    let p = random_params(3, &[2, 5], HeadLayout::Factorized, &mut rng);
    let (heads, _) = head_log_probs(&p, &[0.1, -0.4, 0.9]).unwrap();
    for h in heads {
        let total: f64 = h.iter().map(|l| l.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

fn corridor_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 3e-3,
        total_steps: 20_000,
        hidden: 16,
        seed: 4,
        ..TrainConfig::default()
    }
}

fn greedy_return(p: &PolicyParams) -> f64 {
    let mut env = Corridor::new();
    let mut obs = env.reset(0).unwrap();
    let mut total = 0.0;
    loop {
        let s = env.step(&act_greedy(p, &obs).unwrap()).unwrap();
        total += s.reward;
        if s.done {
            return total;
        }
        obs = s.observation;
    }
}

#[test]
fn corridor_is_solved_reproducibly() {
    let cfg = corridor_config();
    let a = train(&mut Corridor::new(), &cfg, |_| {}).unwrap();
    let b = train(&mut Corridor::new(), &cfg, |_| {}).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.curve, b.curve);
    assert!((greedy_return(&a.params) - OPTIMAL_RETURN).abs() < 1e-9);
    let last = a.curve.last().unwrap().stats.mean_episode_reward.unwrap();
    assert!(last > OPTIMAL_RETURN - 0.05, "late mean return {last}");
}

#[test]
fn training_bookkeeping() {
    let cfg = TrainConfig {
        total_steps: 2048,
        ..corridor_config()
    };
    let mut rows = Vec::new();
    let out = train(&mut Corridor::new(), &cfg, |r| rows.push(r.clone())).unwrap();
    assert_eq!(out.curve.len(), 8);
    assert_eq!(rows, out.curve);
    for (i, r) in out.curve.iter().enumerate() {
        assert_eq!(r.update, i + 1);
        assert_eq!(r.steps, (i + 1) * 256);
    }
    let other = train(&mut Corridor::new(), &TrainConfig { seed: 5, ..cfg }, |_| {}).unwrap();
    assert_ne!(other.params, out.params);
}
