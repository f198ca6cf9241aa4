use fvlab_core::numerics::Rng;
use fvlab_core::stats::{
    anova_oneway, one_sample_t, one_sample_t_from_summary, tukey_hsd, SampleSet,
};
use proptest::prelude::*;

/// Two-sided Student-t tail by quadrature. With `x = √ν·tan θ` the density
/// is proportional to `cos^(ν−1) θ` on `(−π/2, π/2)`, so the tail is a ratio
/// of two Simpson integrals and needs no gamma function.
fn t_two_sided_quadrature(t: f64, df: f64) -> f64 {
    let simpson = |a: f64, b: f64, n: usize| {
        let h = (b - a) / n as f64;
        let f = |th: f64| th.cos().max(0.0).powf(df - 1.0);
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    let theta = (t.abs() / df.sqrt()).atan();
    2.0 * simpson(theta, half_pi, 200_000) / simpson(-half_pi, half_pi, 400_000)
}

#[test]
fn t_p_values_match_quadrature() {
    let mut rng = Rng::new(1);
    for df in [5usize, 30, 100] {
        for _ in 0..20 {
            let n = df + 1;
            let values: Vec<f64> = (0..n)
                .map(|_| 0.5 + 0.1 * rng.normal() + 0.03 * rng.uniform())
                .collect();
            let r = one_sample_t(&SampleSet::new("s", values).unwrap(), 0.5).unwrap();
            let oracle = t_two_sided_quadrature(r.statistic, df as f64);
            assert!(
                (r.p_value - oracle).abs() < 1e-6,
                "df {df} t {}: {} vs {oracle}",
                r.statistic,
                r.p_value
            );
        }
        for t in [0.0, 0.5, 1.0, 2.0, 3.0, 5.0] {
            let r = one_sample_t_from_summary(
                0.5 + t * 0.1 / ((df + 1) as f64).sqrt(),
                0.1,
                df + 1,
                0.5,
            )
            .unwrap();
            assert!(
                (r.p_value - t_two_sided_quadrature(t, df as f64)).abs() < 1e-6,
                "df {df} t {t}"
            );
        }
    }
}

/// Pooled-variance two-sample t statistic.
fn pooled_t(a: &[f64], b: &[f64]) -> f64 {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let ss = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>()
    };
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let sp2 = (ss(a) + ss(b)) / (na + nb - 2.0);
    (mean(a) - mean(b)) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt()
}

#[test]
fn two_group_anova_is_squared_pooled_t() {
    let mut rng = Rng::new(2);
    for n in [3, 10, 40] {
        let a: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let b: Vec<f64> = (0..n).map(|_| 0.4 + rng.normal()).collect();
        let f = anova_oneway(&[
            SampleSet::new("a", a.clone()).unwrap(),
            SampleSet::new("b", b.clone()).unwrap(),
        ])
        .unwrap();
        let t = pooled_t(&a, &b);
        assert!((f.statistic - t * t).abs() < 1e-9 * (1.0 + t * t));
        let tp = fvlab_core::numerics::student_t_sf_two_sided(t, (2 * n - 2) as f64).unwrap();
        assert!((f.p_value - tp).abs() < 1e-9);
    }
}

#[test]
fn resampled_study_groups_reproduce_a_significant_anova() {
    let mut rng = Rng::new(3);
    let rows = [
        (0.714, 0.136, 70),
        (0.650, 0.130, 70),
        (0.584, 0.138, 73),
        (0.552, 0.122, 75),
    ];
    let groups: Vec<SampleSet> = rows
        .iter()
        .enumerate()
        .map(|(i, &(m, s, n))| {
            SampleSet::new(
                format!("exp{}", i + 1),
                (0..n).map(|_| m + s * rng.normal()).collect(),
            )
            .unwrap()
        })
        .collect();
    let r = anova_oneway(&groups).unwrap();
    assert!(r.p_value < 0.001, "F {} p {}", r.statistic, r.p_value);
    assert!((12.0..32.0).contains(&r.statistic), "F {}", r.statistic);
}

#[test]
fn tukey_p_values_fall_as_separation_grows() {
    let mut rng = Rng::new(4);
    let base: Vec<Vec<f64>> = (0..3)
        .map(|_| {
            let v: Vec<f64> = (0..12).map(|_| 0.1 * rng.normal()).collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.into_iter().map(|x| x - m).collect()
        })
        .collect();
    let mut last = 1.0;
    for step in 0..12 {
        let shift = 0.02 * step as f64;
        let groups: Vec<SampleSet> = base
            .iter()
            .enumerate()
            .map(|(i, v)| {
                SampleSet::new(
                    i.to_string(),
                    v.iter()
                        .map(|x| x + if i == 0 { shift } else { 0.0 })
                        .collect(),
                )
                .unwrap()
            })
            .collect();
        let r = tukey_hsd(&groups, 0.05, 20_000, 5).unwrap();
        let p = r.pair(0, 1).unwrap().p_value;
        assert!(p <= last, "shift {shift}: {p} > {last}");
        last = p;
    }
    assert!(last < 0.05);
}

proptest! {
    #[test]
    fn anova_is_shift_invariant(seed in any::<u64>(), c in -100.0f64..100.0) {
        let mut rng = Rng::new(seed);
        let groups: Vec<Vec<f64>> = (0..3).map(|g| (0..8).map(|_| g as f64 * 0.2 + rng.normal()).collect()).collect();
        let make = |shift: f64| -> Vec<SampleSet> {
            groups.iter().enumerate().map(|(i, v)| SampleSet::new(i.to_string(), v.iter().map(|x| x + shift).collect()).unwrap()).collect()
        };
        let f0 = anova_oneway(&make(0.0)).unwrap().statistic;
        let f1 = anova_oneway(&make(c)).unwrap().statistic;
        prop_assert!((f0 - f1).abs() <= 1e-7 * (1.0 + f0));
    }
}
