//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};
use vahr_core::metrics::{InteractionEvent, InteractionKind};
use vahr_core::{Scalar, StateMap};

/// Validity of a filter by the wildcard rules, checked segment by segment.
pub fn filter_is_valid(filter: &str) -> bool {
    let segs: Vec<&str> = filter.split('/').collect();
    segs.iter().enumerate().all(|(i, s)| {
        !s.is_empty()
            && (*s == "+" || (*s == "#" && i == segs.len() - 1) || !s.contains(['+', '#']))
    })
}

/// Tries every way of aligning filter segments with topic segments.
pub fn brute_force_match(filter: &[&str], topic: &[&str]) -> bool {
    match filter.split_first() {
        None => topic.is_empty(),
        Some((&"#", rest)) => (0..=topic.len()).any(|k| brute_force_match(rest, &topic[k..])),
        Some((&"+", rest)) => !topic.is_empty() && brute_force_match(rest, &topic[1..]),
        Some((lit, rest)) => topic.first() == Some(lit) && brute_force_match(rest, &topic[1..]),
    }
}

/// Every path of 1..=max_len segments drawn from `alphabet`.
pub fn all_paths(alphabet: &[&str], max_len: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut frontier: Vec<Vec<&str>> = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for path in &frontier {
            for seg in alphabet {
                let mut p = path.clone();
                p.push(seg);
                out.push(p.join("/"));
                next.push(p);
            }
        }
        frontier = next;
    }
    out
}

/// Delta as a set difference of (key, value) pairs.
pub fn delta_oracle(desired: &StateMap, reported: &StateMap) -> StateMap {
    let as_set = |m: &StateMap| -> BTreeSet<(String, String)> {
        m.iter().map(|(k, v)| (k.clone(), format!("{v:?}"))).collect()
    };
    let keep = &as_set(desired) - &as_set(reported);
    desired
        .iter()
        .filter(|(k, v)| keep.contains(&((*k).clone(), format!("{v:?}"))))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

/// Every map over keys {a,b,c} where each key is absent or one of three values.
pub fn all_small_maps() -> Vec<StateMap> {
    let values = [None, Some(Scalar::Int(1)), Some(Scalar::Str("x".into())), Some(Scalar::Bool(true))];
    let mut out = Vec::new();
    for a in &values {
        for b in &values {
            for c in &values {
                let mut m = StateMap::new();
                for (k, v) in [("a", a), ("b", b), ("c", c)] {
                    if let Some(v) = v {
                        m.insert(k.to_string(), v.clone());
                    }
                }
                out.push(m);
            }
        }
    }
    out
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct IntervalTotals {
    pub ie_ms: BTreeMap<Option<u32>, u64>,
    pub nt_ms: BTreeMap<Option<u32>, u64>,
    pub unpaired: usize,
}

fn channel(kind: InteractionKind) -> Option<(u8, bool)> {
    use InteractionKind::*;
    match kind {
        CommandStart => Some((0, true)),
        CommandAck => Some((0, false)),
        UtteranceStart => Some((1, true)),
        UtteranceEnd => Some((1, false)),
        RobotAutonomousStart => Some((2, true)),
        RobotIdle | RobotStuck => Some((2, false)),
        PuzzlePiecePlaced => None,
    }
}

/// Pairs each start with the next event on its (channel, robot) lane when
/// that event is an end. Quadratic and stateless by construction.
pub fn interval_oracle(log: &[InteractionEvent]) -> IntervalTotals {
    let mut totals = IntervalTotals::default();
    let lane = |e: &InteractionEvent| channel(e.kind).map(|(c, _)| (c, e.robot_id));
    for (i, e) in log.iter().enumerate() {
        let Some((ch, is_start)) = channel(e.kind) else {
            continue;
        };
        let key = Some((ch, e.robot_id));
        if is_start {
            let next = log[i + 1..].iter().find(|n| lane(n) == key);
            match next {
                Some(n) if !channel(n.kind).unwrap().1 => {
                    let span = n.sim_time - e.sim_time;
                    let bucket = if ch == 2 { &mut totals.nt_ms } else { &mut totals.ie_ms };
                    *bucket.entry(e.robot_id).or_default() += span;
                }
                _ => totals.unpaired += 1,
            }
        } else {
            let prev = log[..i].iter().rev().find(|p| lane(p) == key);
            if !matches!(prev, Some(p) if channel(p.kind).unwrap().1) {
                totals.unpaired += 1;
            }
        }
    }
    totals
}

/// A random time-ordered interaction log over two robots plus unattributed events.
pub fn random_interaction_log<R: Rng>(rng: &mut R, len: usize) -> Vec<InteractionEvent> {
    use InteractionKind::*;
    let kinds = [
        CommandStart,
        CommandAck,
        UtteranceStart,
        UtteranceEnd,
        RobotAutonomousStart,
        RobotIdle,
        RobotStuck,
        PuzzlePiecePlaced,
    ];
    let mut t = 0u64;
    (0..len)
        .map(|_| {
            t += rng.gen_range(0..3_000);
            let robot = match rng.gen_range(0..3) {
                0 => None,
                r => Some(r as u32),
            };
            InteractionEvent::new(kinds[rng.gen_range(0..kinds.len())], robot, t)
        })
        .collect()
}

/// Adaptive Simpson quadrature.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, eps: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
        let m = (a + b) / 2.0;
        let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
            return left + right + (left + right - whole) / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f((a + b) / 2.0));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, eps, 50)
}

/// Upper F tail by integrating the density after substituting
/// x = (d2/d1)·tan²θ, which turns it into sin^(d1-1)·cos^(d2-1) on [0, π/2].
pub fn f_tail_oracle(f: f64, d1: f64, d2: f64) -> f64 {
    let g = |t: f64| t.sin().powf(d1 - 1.0) * t.cos().powf(d2 - 1.0);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let theta = (d1 * f / d2).sqrt().atan();
    simpson(&g, theta, half_pi, 1e-13) / simpson(&g, 0.0, half_pi, 1e-13)
}

/// One-way ANOVA computed directly from the sums of squares.
pub fn anova_oracle(groups: &[Vec<f64>]) -> (f64, f64) {
    let n: usize = groups.iter().map(Vec::len).sum();
    let k = groups.len();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ssb += g.len() as f64 * (m - grand) * (m - grand);
        ssw += g.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    }
    let (d1, d2) = ((k - 1) as f64, (n - k) as f64);
    let f = (ssb / d1) / (ssw / d2);
    (f, f_tail_oracle(f, d1, d2))
}

pub fn scenario_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}
