use proptest::prelude::*;

use carefulness::behavior::{fit_behavior, sym_eigen2, ModelPair, PhasePoint};
use carefulness::classifier::{belief_step, classify_online, BeliefState, ClassifierConfig, UpdateRule};
use carefulness::robosim::{
    neutral_command, net_human_ticks, run_trial, step_end_effector, ControllerSpec, EndEffectorState, ExpressiveSegment,
    RobotPhase, SimParams, TaskGeometry, ROBOT_DT,
};
use carefulness::signal::{derivative, lowpass_butter2, resample, Condition, Cup, FilterSpec, MotionPhase, ScalarSeries};
use carefulness::synth::{min_jerk, synth_trial, CarefulnessLabel, MinJerkParams, SynthConfig};

const H: f64 = 1.0 / 120.0;

fn slope() -> impl Strategy<Value = f64> {
    -5.0..-0.1f64
}

fn point3() -> impl Strategy<Value = [f64; 3]> {
    [-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64]
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt()
}

fn label_strategy() -> impl Strategy<Value = CarefulnessLabel> {
    prop_oneof![Just(CarefulnessLabel::NotCareful), Just(CarefulnessLabel::Careful)]
}

/// Exponential distance stream on which every slope observation equals `y`.
fn exp_stream(y: f64, n: usize) -> Vec<f64> {
    let a = (y * H).asinh() / H;
    (0..n).map(|i| 4.0 * (a * i as f64 * H).exp()).collect()
}

/// Analytic magnitude of the bilinear second-order Butterworth low-pass.
fn butter_mag(f: f64, fc: f64, fs: f64) -> f64 {
    let r = (std::f64::consts::PI * f / fs).tan() / (std::f64::consts::PI * fc / fs).tan();
    1.0 / (1.0 + r.powi(4)).sqrt()
}

fn sine(f: f64, fs: f64, n: usize, phase: f64) -> ScalarSeries {
    let v = (0..n)
        .map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / fs + phase).sin())
        .collect();
    ScalarSeries::from_uniform(0.0, 1.0 / fs, v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn belief_stays_on_simplex(
        b1 in 0.0..=1.0f64,
        x in -50.0..50.0f64,
        y1 in slope(),
        y2 in slope(),
        literal in any::<bool>(),
        steps in 1usize..50,
    ) {
        prop_assume!((y1 - y2).abs() > 1e-6);
        let models = ModelPair::from_slopes(y1, y2).unwrap();
        let cfg = ClassifierConfig {
            update_rule: if literal { UpdateRule::PaperLiteral } else { UpdateRule::ErrorProjected },
            ..Default::default()
        };
        let mut b = BeliefState::new(b1);
        for _ in 0..steps {
            b = belief_step(b, x, &models, &cfg);
            prop_assert!((b.b[0] + b.b[1] - 1.0).abs() <= 1e-9);
            prop_assert!(b.b.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn belief_converges_on_matching_slope(y1 in slope(), y2 in slope(), pick in label_strategy()) {
        prop_assume!((y1.abs() - y2.abs()).abs() > 0.05);
        let models = ModelPair::from_slopes(y1, y2).unwrap();
        let cfg = ClassifierConfig::default();
        let k = pick.index();
        let x = models.slopes()[k];
        let mut b = BeliefState::default();
        let mut trace = vec![b.b[k]];
        for _ in 0..120 * 600 {
            b = belief_step(b, x, &models, &cfg);
            trace.push(b.b[k]);
            if b.b[k] == 1.0 {
                break;
            }
        }
        prop_assert!(b.b[k] >= cfg.decision_threshold, "final b_k {}", b.b[k]);
        // Past the last decrease the belief grows monotonically to the end.
        let last_drop = trace.windows(2).rposition(|w| w[1] < w[0]).map_or(0, |i| i + 1);
        prop_assert!(trace[last_drop..].windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(last_drop < trace.len() - 1 || b.b[k] == 1.0);
    }

    #[test]
    fn eigen_pairs_satisfy_definition(g in prop::array::uniform4(-3.0..3.0f64), ridge in 1e-6..1.0f64) {
        let a = g[0] * g[0] + g[1] * g[1] + ridge;
        let b = g[0] * g[2] + g[1] * g[3];
        let c = g[2] * g[2] + g[3] * g[3] + ridge;
        let e = sym_eigen2(a, b, c);
        // Characteristic polynomial roots.
        let tr = a + c;
        let disc = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
        let scale = 1.0 + tr;
        prop_assert!((e.values[0] - (tr + disc) / 2.0).abs() <= 1e-12 * scale);
        prop_assert!((e.values[1] - (tr - disc) / 2.0).abs() <= 1e-9 * scale);
        let v = e.principal;
        prop_assert!((v[0].hypot(v[1]) - 1.0).abs() <= 1e-12);
        let l = e.values[0];
        prop_assert!((a * v[0] + b * v[1] - l * v[0]).abs() <= 1e-9 * scale);
        prop_assert!((b * v[0] + c * v[1] - l * v[1]).abs() <= 1e-9 * scale);
    }

    #[test]
    fn resample_is_exact_for_affine(
        a in -10.0..10.0f64,
        m in -10.0..10.0f64,
        n_in in 2usize..300,
        n_out in 2usize..400,
        t0 in -5.0..5.0f64,
    ) {
        let s = ScalarSeries::from_uniform(t0, H, (0..n_in).map(|i| a + m * (t0 + i as f64 * H)).collect()).unwrap();
        let r = resample(&s, n_out).unwrap();
        prop_assert_eq!(r.len(), n_out);
        for (t, v) in r.t().iter().zip(r.values()) {
            prop_assert!((v - (a + m * t)).abs() <= 1e-12, "t {t}: {v} vs {}", a + m * t);
        }
    }

    #[test]
    fn derivative_inverts_cumulative_sum(amp in 0.1..5.0f64, omega in 0.5..20.0f64, phase in 0.0..6.3f64, n in 10usize..400) {
        let f: Vec<f64> = (0..n).map(|i| amp * (omega * i as f64 * H + phase).sin()).collect();
        let mut s = vec![0.0];
        for i in 1..n {
            s.push(s[i - 1] + 0.5 * (f[i - 1] + f[i]) * H);
        }
        let d = derivative(&ScalarSeries::from_uniform(0.0, H, s).unwrap()).unwrap();
        let bound = 0.25 * amp * omega * omega * H * H + 1e-9;
        for i in 1..n - 1 {
            prop_assert!((d.values()[i] - f[i]).abs() <= bound);
        }
    }

    #[test]
    fn filter_passes_constants(c in -100.0..100.0f64, zero_phase in any::<bool>(), fc in 1.0..20.0f64, n in 9usize..200) {
        let s = ScalarSeries::from_uniform(0.0, H, vec![c; n]).unwrap();
        let out = lowpass_butter2(&s, &FilterSpec::new(fc, 120.0).unwrap(), zero_phase).unwrap();
        prop_assert!(out.values().iter().all(|v| (v - c).abs() <= 1e-9 * (1.0 + c.abs())));
    }

    #[test]
    fn filter_matches_analytic_response(fc in 1.0..10.0f64, fs_ratio in 10.0..40.0f64, which in 0usize..4) {
        let fs = fc * fs_ratio;
        let f = [0.25, 0.5, 1.0, 2.0][which] * fc;
        let n = (fs / f * 40.0) as usize;
        let out = lowpass_butter2(&sine(f, fs, n, 0.0), &FilterSpec::new(fc, fs).unwrap(), false).unwrap();
        let tail = &out.values()[n / 2..];
        let rms = (tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64).sqrt();
        let measured_db = 20.0 * (rms * 2f64.sqrt()).log10();
        let expected_db = 20.0 * butter_mag(f, fc, fs).log10();
        prop_assert!((measured_db - expected_db).abs() <= 0.2, "{measured_db} vs {expected_db}");
    }

    #[test]
    fn zero_phase_has_no_lag(fc in 4.0..12.0f64, ratio in 0.1..0.8f64, phase in 0.0..6.3f64) {
        let fs = 120.0;
        let f = ratio * fc;
        let n = 1200;
        let input = sine(f, fs, n, phase);
        let out = lowpass_butter2(&input, &FilterSpec::new(fc, fs).unwrap(), true).unwrap();
        let (x, y) = (&input.values()[200..1000], &out.values()[200..1000]);
        let xcorr = |lag: i64| -> f64 {
            (0..x.len() as i64)
                .filter_map(|i| {
                    let j = i + lag;
                    (0..y.len() as i64).contains(&j).then(|| x[i as usize] * y[j as usize])
                })
                .sum::<f64>()
        };
        let best = (-10i64..=10).max_by(|a, b| xcorr(*a).total_cmp(&xcorr(*b))).unwrap();
        prop_assert_eq!(best, 0);
    }

    #[test]
    fn duplicated_points_reweight_covariance(
        pts in prop::collection::vec((0.05..1.0f64, -2.0..0.0f64), 10..60),
    ) {
        let points: Vec<PhasePoint> = pts.iter().map(|&(x, xdot)| PhasePoint { x, xdot }).collect();
        let doubled: Vec<PhasePoint> = points.iter().chain(&points).copied().collect();
        let (Ok(m1), Ok(m2)) = (
            fit_behavior(&points, CarefulnessLabel::Careful),
            fit_behavior(&doubled, CarefulnessLabel::Careful),
        ) else {
            return Ok(());
        };
        // Brute-force two-pass moments.
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.x).sum::<f64>() / n;
        let mv = points.iter().map(|p| p.xdot).sum::<f64>() / n;
        let sxx: f64 = points.iter().map(|p| (p.x - mx) * (p.x - mx)).sum();
        let sxv: f64 = points.iter().map(|p| (p.x - mx) * (p.xdot - mv)).sum();
        let svv: f64 = points.iter().map(|p| (p.xdot - mv) * (p.xdot - mv)).sum();
        let expect = |s: f64, k: f64| s * k / (k * n - 1.0);
        for (m, k) in [(&m1, 1.0), (&m2, 2.0)] {
            prop_assert!((m.mean[0] - mx).abs() <= 1e-12 && (m.mean[1] - mv).abs() <= 1e-12);
            prop_assert!((m.cov[0][0] - expect(sxx, k)).abs() <= 1e-12);
            prop_assert!((m.cov[0][1] - expect(sxv, k)).abs() <= 1e-12);
            prop_assert!((m.cov[1][1] - expect(svv, k)).abs() <= 1e-12);
        }
        prop_assert!(m1.eigenvector[1] > 0.0 && m2.eigenvector[1] > 0.0);
    }

    #[test]
    fn collinear_scaling_scales_slope(m in -3.0..-0.1f64, b in -0.5..0.5f64, c in 0.2..5.0f64) {
        let line = |k: f64| -> Vec<PhasePoint> {
            (0..30)
                .map(|i| {
                    let x = 0.05 + 0.03 * i as f64;
                    PhasePoint { x, xdot: k * (m * x + b) }
                })
                .collect()
        };
        let y = fit_behavior(&line(1.0), CarefulnessLabel::Careful).unwrap().slope;
        let yc = fit_behavior(&line(c), CarefulnessLabel::Careful).unwrap().slope;
        prop_assert!((y - m).abs() <= 1e-9);
        prop_assert!((yc - c * y).abs() <= 1e-9 * c.max(1.0));
    }

    #[test]
    fn approach_clouds_have_negative_slope(
        m in -3.0..-0.3f64,
        noise in prop::collection::vec(-0.02..0.02f64, 40),
    ) {
        let pts: Vec<PhasePoint> = noise
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let x = 0.05 + 0.02 * i as f64;
                PhasePoint { x, xdot: m * x + e }
            })
            .collect();
        let model = fit_behavior(&pts, CarefulnessLabel::NotCareful).unwrap();
        prop_assert!(model.eigenvector[1] > 0.0);
        prop_assert!(model.slope < 0.0);
    }

    #[test]
    fn neutral_controller_closes_distance(
        start in point3(),
        target in point3(),
        k_p in 1.0..10.0f64,
        v_const in 0.05..1.0f64,
    ) {
        let mut s = EndEffectorState::at_rest(start);
        let mut d = dist3(start, target);
        let mut ticks = 0;
        while d >= 1e-3 {
            s = step_end_effector(&s, neutral_command(&s, target, k_p, v_const), ROBOT_DT, 1.5);
            let next = dist3(s.pos, target);
            prop_assert!(next < d, "tick {ticks}: {next} >= {d}");
            d = next;
            ticks += 1;
            prop_assert!(ticks < 100_000);
        }
    }

    #[test]
    fn expressive_segment_reaches_end(
        start in point3(),
        end in point3(),
        d in 0.1..1.5f64,
        t in 0.5..5.0f64,
    ) {
        prop_assume!(dist3(start, end) > 0.01);
        let profile = min_jerk(MinJerkParams { distance: d, duration: t, sample_rate_hz: 120.0 }).unwrap();
        let seg = ExpressiveSegment::new(start, end, &profile).unwrap();
        let mut s = EndEffectorState::at_rest(start);
        let mut k = 0;
        while (k as f64) * ROBOT_DT < seg.duration() {
            s = step_end_effector(&s, seg.command(k as f64 * ROBOT_DT), ROBOT_DT, f64::INFINITY);
            k += 1;
        }
        prop_assert!(dist3(s.pos, end) <= 1e-3);
    }

    #[test]
    fn net_time_identity(total_extra in 0u64..100_000, segments in prop::collection::vec(0u64..10_000, 0..8)) {
        let busy: u64 = segments.iter().sum();
        let net = net_human_ticks(busy + total_extra, &segments).unwrap();
        prop_assert_eq!(net + busy, busy + total_extra);
        if busy > 0 {
            prop_assert!(net_human_ticks(busy - 1, &segments).is_err());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn skip_samples_do_not_change_decision(
        pick in label_strategy(),
        at in 0usize..240,
        run in 1usize..60,
    ) {
        // A faster gain keeps the decision well inside the stream.
        let models = ModelPair::from_slopes(-3.0, -1.5).unwrap();
        let cfg = ClassifierConfig { epsilon: 1.0, ..Default::default() };
        let base = exp_stream(models.slopes()[pick.index()], 240);
        let mut held = base.clone();
        let v = held[at];
        held.splice(at..at, std::iter::repeat_n(v, run));
        let classify = |v: Vec<f64>| classify_online(&ScalarSeries::from_uniform(0.0, H, v).unwrap(), &models, &cfg).unwrap();
        let (a, b) = (classify(base), classify(held));
        prop_assert_eq!(a.label, Some(pick));
        prop_assert_eq!(b.label, a.label);
    }

    #[test]
    fn synth_trials_are_deterministic_and_unimodal(pick in label_strategy(), seed in any::<u64>()) {
        let cfg = SynthConfig { noise_std: 0.0, ..Default::default() };
        let a = synth_trial(pick, &cfg, seed).unwrap();
        prop_assert_eq!(&a, &synth_trial(pick, &cfg, seed).unwrap());
        let dt = a.samples()[1].t - a.samples()[0].t;
        prop_assert!(a.samples().windows(2).all(|w| ((w[1].t - w[0].t) - dt).abs() <= 1e-9 && w[1].t > w[0].t));
        prop_assert!((dt - H).abs() <= 1e-12);
        let speed = a.speed();
        for phase in [MotionPhase::Reach, MotionPhase::Carry] {
            let r = a.phase_range(phase).unwrap();
            let v = &speed.values()[r];
            let maxima = (1..v.len() - 1).filter(|&i| v[i] > v[i - 1] && v[i] >= v[i + 1]).count();
            prop_assert_eq!(maxima, 1, "{:?}", phase);
        }
    }

    #[test]
    fn trials_follow_the_state_machine(full in any::<bool>(), expressive in any::<bool>(), seed in any::<u64>()) {
        let cup = if full { Cup::Full } else { Cup::Empty };
        let condition = if expressive { Condition::Exp } else { Condition::Neu };
        let label = if full { CarefulnessLabel::Careful } else { CarefulnessLabel::NotCareful };
        let geometry = TaskGeometry::default();
        let mut synth = SynthConfig::default();
        synth.geometry.handover = geometry.handover;
        let mut human = synth_trial(label, &synth, seed).unwrap();
        human.meta_mut().condition = condition;
        let spec = ControllerSpec::default_for(condition);
        let params = SimParams::default();
        let a = run_trial(cup, condition, &human, &geometry, &spec, &params, None).unwrap();
        let b = run_trial(cup, condition, &human, &geometry, &spec, &params, None).unwrap();
        prop_assert_eq!(&a.metrics, &b.metrics);
        prop_assert_eq!(a.visited.as_slice(), RobotPhase::sequence(cup));
        if full {
            let pour = a.trace.iter().filter(|s| s.phase == RobotPhase::Pour).count();
            let first_release = a.trace.iter().position(|s| s.phase == RobotPhase::Release).unwrap();
            let last_pour = a.trace.iter().rposition(|s| s.phase == RobotPhase::Pour).unwrap();
            prop_assert!(last_pour < first_release);
            prop_assert!(pour as f64 * ROBOT_DT >= geometry.pour_dwell - 1e-9);
        }
    }
}
