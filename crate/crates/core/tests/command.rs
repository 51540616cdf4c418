use proptest::prelude::*;
use psyframe::command::*;
use psyframe::model::Posterior;
use psyframe::synth::ClassLabel;

fn default_state() -> IntegratorState {
    IntegratorState::new(&IntegratorParams::default())
}

/// First tick at which `A_n = p (1 - lambda^n) / (1 - lambda)` reaches theta,
/// by direct search over the closed form.
fn closed_form_trigger_tick(p: f64, lambda: f64, theta: f64) -> Option<u32> {
    (1..10_000).find(|&n| p * (1.0 - lambda.powi(n as i32)) / (1.0 - lambda) >= theta)
}

#[test]
fn one_hot_triggers_at_closed_form_tick() {
    assert_eq!(closed_form_trigger_tick(1.0, 0.9, 5.0), Some(7));
    for c in ClassLabel::ALL {
        let mut s = default_state();
        let p = Posterior::one_hot(c);
        let first = (1..=50).find(|_| s.integrate(&p).is_some());
        assert_eq!(first, Some(7), "class {}", c.id());
    }
}

#[test]
fn accumulator_matches_recurrence_before_trigger() {
    let mut s = default_state();
    let p = Posterior::one_hot(ClassLabel::new(2).unwrap());
    let row = class_to_move(ClassLabel::new(2).unwrap()).row();
    for n in 1..=6 {
        assert!(s.integrate(&p).is_none());
        let expected = 10.0 * (1.0 - 0.9f64.powi(n));
        assert!((s.accumulators[row] - expected).abs() < 1e-12);
    }
    assert!(s.accumulators[row] < 5.0);
    assert_eq!(s.integrate(&p), Some(Move::HeavyPunch));
}

#[test]
fn uniform_never_triggers() {
    let mut s = default_state();
    let p = Posterior::uniform();
    for _ in 0..10_000 {
        assert!(s.integrate(&p).is_none());
    }
    for a in s.accumulators {
        assert!((a - 2.0).abs() < 1e-9);
    }
}

#[test]
fn scaled_posterior_trigger_tick() {
    // p = 0.9 on one class needs 0.9^n <= 4/9
    let p = Posterior { probs: [0.0, 0.9, 0.1, 0.0, 0.0] };
    let mut s = default_state();
    let first = (1..=50).find(|_| s.integrate(&p).is_some()).unwrap();
    assert_eq!(Some(first), closed_form_trigger_tick(0.9, 0.9, 5.0));
}

#[test]
fn exhaustive_pairs() {
    let w = DEFAULT_COMBO_WINDOW;
    let mut combos = Vec::new();
    for a in Move::BASE {
        for b in Move::BASE {
            for gap in 1..w {
                let mut r = ComboResolver::new(w);
                let mut out = r.step(10, Some(a));
                out.extend(r.step(10 + gap, Some(b)));
                out.extend(r.flush(10 + gap + 1));
                let moves: Vec<Move> = out.iter().map(|e| e.mv).collect();
                match combo_for(a, b) {
                    Some(c) => {
                        assert_eq!(moves, vec![c], "{a:?},{b:?}");
                        assert_eq!(out[0].source, EventSource::Combo);
                        if gap == 1 {
                            combos.push((a, b, c));
                        }
                    }
                    None => assert_eq!(moves, vec![a, b], "{a:?},{b:?}"),
                }
            }
        }
    }
    assert_eq!(
        combos,
        vec![
            (Move::Forward, Move::Punch, Move::PunchCombo),
            (Move::Forward, Move::HeavyPunch, Move::Uppercut),
            (Move::Forward, Move::Kick, Move::KickCombo),
            (Move::Punch, Move::HeavyPunch, Move::Hadoken),
        ]
    );
}

/// Independent reference: walk the sorted trigger list, pairing each rule
/// opener with its immediate successor when close enough.
fn reference_resolve(triggers: &[(u64, Move)], w: u64, end: u64) -> Vec<MoveEvent> {
    let opens = |m: Move| COMBO_RULES.iter().any(|r| r.first == m);
    let mut out = Vec::new();
    let mut i = 0;
    while i < triggers.len() {
        let (t, m) = triggers[i];
        if !opens(m) {
            out.push(MoveEvent::base(t, m));
            i += 1;
            continue;
        }
        match triggers.get(i + 1) {
            Some(&(t2, m2)) if t2 < t + w => {
                if let Some(c) = combo_for(m, m2) {
                    out.push(MoveEvent::combo(t2, c));
                    i += 2;
                } else {
                    out.push(MoveEvent::base(t2, m));
                    i += 1;
                }
            }
            _ => {
                let release = if t + w <= end { t + w } else { end };
                out.push(MoveEvent::base(release, m));
                i += 1;
            }
        }
    }
    out
}

fn run_resolver(triggers: &[(u64, Move)], w: u64, end: u64) -> Vec<MoveEvent> {
    let mut r = ComboResolver::new(w);
    let mut out = Vec::new();
    let mut k = 0;
    for t in 0..end {
        let trig = if k < triggers.len() && triggers[k].0 == t {
            k += 1;
            Some(triggers[k - 1].1)
        } else {
            None
        };
        out.extend(r.step(t, trig));
    }
    out.extend(r.flush(end));
    out
}

fn trigger_stream() -> impl Strategy<Value = Vec<(u64, Move)>> {
    prop::collection::vec((1u64..12, 0usize..5), 0..40).prop_map(|v| {
        let mut t = 0;
        v.into_iter()
            .map(|(gap, m)| {
                t += gap;
                (t, Move::BASE[m])
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn resolver_matches_reference(triggers in trigger_stream(), w in 1u64..12) {
        let end = triggers.last().map_or(0, |t| t.0) + 1;
        let got = run_resolver(&triggers, w, end);
        prop_assert_eq!(&got, &reference_resolve(&triggers, w, end));
        // every trigger is accounted for exactly once
        let n_combo = got.iter().filter(|e| e.source == EventSource::Combo).count();
        let n_base = got.len() - n_combo;
        prop_assert_eq!(n_base + 2 * n_combo, triggers.len());
        prop_assert!(got.windows(2).all(|p| p[0].tick <= p[1].tick));
    }

    #[test]
    fn accumulators_bounded(
        lambda in 0.05f64..0.99,
        theta in 0.1f64..50.0,
        stream in prop::collection::vec(prop::array::uniform5(0.0f64..1.0), 1..300),
    ) {
        let params = IntegratorParams { lambda, theta, ..Default::default() };
        let mut s = IntegratorState::new(&params);
        let bound = params.bound();
        for raw in stream {
            let total: f64 = raw.iter().sum::<f64>() + 1e-9;
            let p = Posterior { probs: raw.map(|x| (x + 1e-9 / 5.0) / total) };
            s.integrate(&p);
            for a in s.accumulators {
                prop_assert!((0.0..=bound + 1e-9).contains(&a));
            }
        }
    }

    #[test]
    fn no_trigger_during_refractory(
        refractory in 0u32..6,
        classes in prop::collection::vec(0u8..5, 1..200),
    ) {
        let params = IntegratorParams { theta: 0.5, refractory, ..Default::default() };
        let mut s = IntegratorState::new(&params);
        let mut last: Option<usize> = None;
        for (t, c) in classes.iter().enumerate() {
            let fired = s.integrate(&Posterior::one_hot(ClassLabel::new(*c).unwrap()));
            if fired.is_some() {
                if let Some(l) = last {
                    prop_assert!(t - l > refractory as usize);
                }
                last = Some(t);
            }
        }
    }
}
