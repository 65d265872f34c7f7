use hierload::forecasters::{HwState, Smoothing, WeeklyDecay};

/// Textbook form with explicit time-indexed arrays:
/// `L_t = α(y_t − s1_{t−p1} − s2_{t−p2}) + (1−α)L_{t−1}`,
/// `s1_t = γ1(y_t − L_t − s2_{t−p2}) + (1−γ1)s1_{t−p1}`,
/// `s2_t = γ2(y_t − L_t − s1_{t−p1}) + (1−γ2)s2_{t−p2}`.
struct Reference {
    level: Vec<f64>,
    s1: Vec<f64>,
    s2: Vec<f64>,
}

fn reference(y: &[f64], p1: usize, p2: usize, l0: f64, s1_0: &[f64], s2_0: &[f64], a: f64, g1: f64, g2: f64) -> Reference {
    // Index p2 + t holds time t; negative times carry the initial states.
    let n = y.len();
    let mut level = vec![l0; n + 1];
    let mut s1 = vec![0.0; p2 + n];
    let mut s2 = vec![0.0; p2 + n];
    for i in 0..p2 {
        s2[i] = s2_0[i];
    }
    for i in p2 - p1..p2 {
        s1[i] = s1_0[i - (p2 - p1)];
    }
    for t in 0..n {
        let k = p2 + t;
        let l = a * (y[t] - s1[k - p1] - s2[k - p2]) + (1.0 - a) * level[t];
        level[t + 1] = l;
        s1[k] = g1 * (y[t] - l - s2[k - p2]) + (1.0 - g1) * s1[k - p1];
        s2[k] = g2 * (y[t] - l - s1[k - p1]) + (1.0 - g2) * s2[k - p2];
    }
    Reference { level, s1, s2 }
}

#[test]
fn five_hundred_steps_match_reference_recursion() {
    let (p1, p2) = (12usize, 84usize);
    let n = 500;
    let y: Vec<f64> = (0..n)
        .map(|t| {
            let t = t as f64;
            10.0 + 3.0 * (t * std::f64::consts::TAU / p1 as f64).sin() + 0.7 * (t * std::f64::consts::TAU / p2 as f64).cos()
                + 0.3 * (t * 1.37).sin()
        })
        .collect();
    let s1_0: Vec<f64> = (0..p1).map(|i| (i as f64 * 0.4).sin()).collect();
    let s2_0: Vec<f64> = (0..p2).map(|i| 0.1 * (i as f64 * 0.11).cos()).collect();
    let (a, g1, g2) = (0.31, 0.17, 0.09);

    // Start at absolute time p2 so the library's modular buffers line up
    // with the reference's "time − period" indices.
    let start = p2;
    let mut state = HwState::zeros(p1, p2, 9.5);
    for i in 0..p1 {
        state.s1[(start - p1 + i) % p1] = s1_0[i];
    }
    for i in 0..p2 {
        state.s2[(start - p2 + i) % p2] = s2_0[i];
    }
    let r = reference(&y, p1, p2, 9.5, &s1_0, &s2_0, a, g1, g2);
    let smoothing = Smoothing::new(a, g1, g2);
    for (t, &v) in y.iter().enumerate() {
        state.update(start + t, v, &smoothing, WeeklyDecay::Gamma2);
        assert!((state.level - r.level[t + 1]).abs() < 1e-12, "level at {t}");
        let k = p2 + t;
        assert!((state.s1[(start + t) % p1] - r.s1[k]).abs() < 1e-12, "s1 at {t}");
        assert!((state.s2[(start + t) % p2] - r.s2[k]).abs() < 1e-12, "s2 at {t}");
    }
    // j-step forecasts reuse the last seasonal states of each period.
    let last = p2 + n - 1;
    for j in 1..=p2 {
        let expect = r.level[n] + r.s1[last + j - p1 * j.div_ceil(p1)] + r.s2[last + j - p2];
        assert!((state.forecast(start + n - 1, j) - expect).abs() < 1e-12, "forecast {j}");
    }
}
