//! Invariants checked over random inputs.

mod common;

use betadiff::chain::{reverse_conditional_params, reverse_update_logit, DiffusionConfig};
use betadiff::config::{preset, ExperimentConfig, PRESETS};
use betadiff::loss::{kl_beta, KlubGeometry, LossVariant};
use betadiff::net::{GeneratorNet, OUTPUT_MARGIN};
use betadiff::random::{BetaParams, RngStream};
use betadiff::schedule::Schedule;
use betadiff::specfn::{digamma, ln_beta, ln_gamma, trigamma};
use betadiff::{logit, sigmoid};
use proptest::prelude::*;

fn positive() -> impl Strategy<Value = f64> {
    // log-uniform over many decades
    (-8.0f64..8.0).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn ln_gamma_recurrence(x in positive()) {
        // ln Γ(x + 1) = ln Γ(x) + ln x
        let lhs = ln_gamma(x + 1.0).unwrap();
        let rhs = ln_gamma(x).unwrap() + x.ln();
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-13 * scale, "x={x}: {lhs} vs {rhs}");
    }

    #[test]
    fn digamma_recurrence(x in positive()) {
        let lhs = digamma(x + 1.0).unwrap();
        let rhs = digamma(x).unwrap() + 1.0 / x;
        let scale = lhs.abs().max(1.0 / x).max(1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-13 * scale);
    }

    #[test]
    fn trigamma_positive_and_decreasing(x in positive()) {
        let a = trigamma(x).unwrap();
        let b = trigamma(x * 1.5).unwrap();
        prop_assert!(a > 0.0 && b > 0.0);
        prop_assert!(b < a);
    }

    #[test]
    fn ln_beta_symmetric(a in positive(), b in positive()) {
        prop_assert_eq!(ln_beta(a, b).unwrap().to_bits(), ln_beta(b, a).unwrap().to_bits());
    }

    #[test]
    fn ln_beta_matches_lanczos(a in 0.01f64..500.0, b in 0.01f64..500.0) {
        let got = ln_beta(a, b).unwrap();
        let want = common::ref_ln_beta(a, b);
        prop_assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "{got} vs {want}");
    }

    #[test]
    fn kl_nonnegative_and_zero_on_diagonal(
        ap in positive(), bp in positive(), aq in positive(), bq in positive()
    ) {
        let p = BetaParams::new(ap, bp).unwrap();
        let q = BetaParams::new(aq, bq).unwrap();
        let kl = kl_beta(p, q).unwrap();
        prop_assert!(kl >= 0.0 && !kl.is_nan());
        prop_assert_eq!(kl_beta(p, p).unwrap(), 0.0);
    }

    #[test]
    fn reverse_update_never_decreases(l1 in -700.0f64..700.0, l2 in -700.0f64..700.0) {
        let out = reverse_update_logit(l1, l2);
        prop_assert!(out.is_finite());
        prop_assert!(out >= l1 && out >= l2, "{out} < max({l1}, {l2})");
    }

    #[test]
    fn reverse_update_is_z_plus_one_minus_z_p(l1 in -30.0f64..30.0, l2 in -30.0f64..30.0) {
        let (z, p) = (sigmoid(l1), sigmoid(l2));
        let want = z + (1.0 - z) * p;
        let got = sigmoid(reverse_update_logit(l1, l2));
        prop_assert!((got - want).abs() <= 1e-14);
    }

    #[test]
    fn logit_inverts_sigmoid(z in 1e-300f64..1.0) {
        prop_assume!(z < 1.0 - 1e-15);
        let l = logit(z);
        let back = sigmoid(l);
        // exp amplifies the rounding of its argument by |l|
        let tol = 4.0 * f64::EPSILON * z * l.abs().max(1.0);
        prop_assert!((back - z).abs() <= tol, "{back} vs {z}");
    }

    #[test]
    fn schedules_decrease_from_one(t in 1e-5f64..0.99, dt in 1e-4f64..0.01) {
        for sched in [Schedule::default(), Schedule::default_sigmoid()] {
            let a = sched.alpha(t).unwrap();
            let b = sched.alpha(t + dt).unwrap();
            prop_assert!(a > b && a < 1.0 && b > 0.0);
            let d = sched.alpha_diff(t, t + dt).unwrap();
            prop_assert!(d > 0.0);
            prop_assert!((d - (a - b)).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn reverse_shapes_positive(
        x in 1e-6f64..(1.0 - 1e-6), t in 1e-5f64..1.0, pi in 0.05f64..0.95
    ) {
        let cfg = DiffusionConfig::default();
        let p = reverse_conditional_params(&cfg, x, pi * t, t).unwrap();
        prop_assert!(p.a() > 0.0 && p.b() > 0.0);
    }

    #[test]
    fn klub_minimized_at_truth(x0 in 0.01f64..0.99, dx in -0.2f64..0.2, t in 0.01f64..1.0) {
        // a point mass at x0 makes x0 itself the unique minimizer
        let x_hat = (x0 + dx).clamp(1e-3, 1.0 - 1e-3);
        let geo = KlubGeometry::at_time(&DiffusionConfig::default(), t).unwrap();
        for variant in [LossVariant::Klub, LossVariant::NegElbo] {
            let at_truth = geo.conditional(x0, x0, variant).unwrap() + geo.marginal(x0, x0, variant).unwrap();
            let off = geo.conditional(x0, x_hat, variant).unwrap() + geo.marginal(x0, x_hat, variant).unwrap();
            prop_assert!(at_truth.abs() < 1e-9, "{variant}: {at_truth}");
            prop_assert!(off >= at_truth - 1e-12);
        }
    }

    #[test]
    fn output_inside_scaled_range(
        seed in any::<u64>(), input in -1e6f64..1e6, t in 0.0f64..1.0, gain in 0.0f64..1e4
    ) {
        // inflate the weights so the sigmoid saturates for many inputs
        let mut net = GeneratorNet::new(4, 1000.0, &[8], &mut RngStream::new(seed, 0));
        for p in net.params_mut() {
            *p *= gain;
        }
        let y = net.forward(input, t);
        prop_assert!((OUTPUT_MARGIN..=1.0 - OUTPUT_MARGIN).contains(&y));
        let cfg = DiffusionConfig::image_defaults();
        let x_hat = cfg.scale * y + cfg.shift;
        prop_assert!(x_hat > cfg.shift && x_hat < cfg.shift + cfg.scale, "x_hat={x_hat}");
    }

    #[test]
    fn config_text_round_trip(
        which in 0..PRESETS.len(),
        eta in 1.0f64..1e6,
        omega in 0.0f64..1.0,
        lr in 1e-6f64..1e-1,
        seed in any::<u64>(),
        batch in 1usize..5000,
        hidden in prop::collection::vec(1usize..512, 1..4),
    ) {
        let mut cfg = preset(PRESETS[which].name).unwrap();
        cfg.diffusion.eta = eta;
        cfg.diffusion.omega = omega;
        cfg.train.lr = lr;
        cfg.train.seed = seed;
        cfg.train.batch_size = batch;
        cfg.net.hidden = hidden;
        let text = cfg.to_text();
        let back = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_text(), text);
    }
}
