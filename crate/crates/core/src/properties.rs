//! Randomized invariants of the numerical core.

use crate::ensembles::{
    initial_profile, lambda_closed_form, lambda_generic, monotone_branch, solve_param, variance_profile,
    EnsembleSpec, Family, FamilyParams, ParamBounds, VarianceProfile,
};
use crate::fit::fit_exponential;
use crate::measures::{entropies, measure_batch, schmidt_values};
use crate::sampler::{draw_raw, draw_sample, with_workers};
use faer::c64;
use proptest::prelude::*;

fn family() -> impl Strategy<Value = Family> {
    prop::sample::select(Family::ALL.to_vec())
}

/// Specs with no singular cell, up to `2^3 x 2^4`.
fn spec() -> impl Strategy<Value = EnsembleSpec> {
    (family(), 1u32..=3, 0u32..=1, 0.25f64..1.5, -2.5f64..2.5, -2.5f64..2.5, 0u32..=4, any::<bool>())
        .prop_map(|(f, l_a, extra, gamma, p, q, radius, squared)| {
            let l_b = l_a + extra;
            let params = match f {
                Family::Se => FamilyParams::Sparse {
                    w: 10f64.powf(p),
                    w_s: 10f64.powf(q),
                    hamming_radius: radius.min(l_a + l_b),
                },
                _ => FamilyParams::Decay { mu: 10f64.powf(p) },
            };
            EnsembleSpec::new(f, l_a, l_b, params)
                .and_then(|s| s.with_gamma(gamma))
                .unwrap()
                .with_ee_squared(squared)
        })
        .prop_filter("singular cell", |s| crate::ensembles::singular_cells(s).is_empty())
}

fn matrix(n_a: usize, n_b: usize, seed: u64) -> faer::Mat<c64> {
    let profile = VarianceProfile::uniform(n_a, n_b, 1.0);
    draw_sample(&profile, seed, 0).unwrap().c
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn closed_form_matches_generic(s in spec()) {
        let closed = lambda_closed_form(&s).unwrap();
        let generic = lambda_generic(&variance_profile(&s).unwrap(), s.gamma, &initial_profile(&s).unwrap()).unwrap();
        prop_assert!((closed - generic).abs() <= 1e-10 * closed.abs().max(1.0), "{closed} vs {generic}");
    }

    #[test]
    fn lambda_is_monotone_on_the_branch(s in spec(), t in 0.05f64..0.95) {
        prop_assume!(s.family != Family::Se);
        let (lo, hi) = monotone_branch(&s, ParamBounds { lo: 1e-3, hi: 1e3 });
        prop_assume!(lo < hi);
        let p1 = (lo.ln() + t * (hi.ln() - lo.ln())).exp();
        let p2 = p1 * 1.5;
        prop_assume!(p2 < hi);
        let l1 = lambda_closed_form(&s.with_param(p1).unwrap()).unwrap();
        let l2 = lambda_closed_form(&s.with_param(p2).unwrap()).unwrap();
        // Deep in the separable corner both values underflow to zero.
        prop_assume!(l1.max(l2) > 1e-250);
        if s.family.lambda_increases_with_param() {
            prop_assert!(l2 > l1, "{l1} {l2}");
        } else {
            prop_assert!(l2 < l1, "{l1} {l2}");
        }
    }

    #[test]
    fn solver_round_trips(s in spec()) {
        let target = lambda_closed_form(&s).unwrap();
        prop_assume!(target > 1e-6 && target < 1e6);
        match solve_param(&s, target, ParamBounds::default()) {
            Ok(p) => {
                let back = lambda_closed_form(&s.with_param(p).unwrap()).unwrap();
                prop_assert!((back / target - 1.0).abs() <= 1e-7, "{back} vs {target}");
            }
            // Parameters off the monotone branch need not be reachable.
            Err(crate::Error::Unattainable { .. }) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn renyi_ordering(l_a in 1u32..=4, extra in 0u32..=2, seed in any::<u64>()) {
        let (n_a, n_b) = (1usize << l_a, 1usize << (l_a + extra));
        let rec = entropies(&schmidt_values(matrix(n_a, n_b, seed).as_ref()).unwrap());
        let ln_n = (n_a as f64).ln();
        prop_assert!(rec.r2 >= 0.0);
        prop_assert!(rec.r2 <= rec.r1 + 1e-12);
        prop_assert!(rec.r1 <= ln_n + 1e-12);
        prop_assert!(rec.r0 >= n_a as f64 * ln_n - 1e-9);
        prop_assert!(rec.q >= 1.0 - 1e-12 && rec.q <= n_a as f64 + 1e-9);
    }

    #[test]
    fn spectrum_is_permutation_invariant(l_a in 1u32..=3, seed in any::<u64>(), shift in 1usize..7) {
        let n = 1usize << l_a;
        let c = matrix(n, 2 * n, seed);
        let p = faer::Mat::<c64>::from_fn(n, 2 * n, |i, j| c[((i + shift) % n, (j * 3 + shift) % (2 * n))]);
        let a = schmidt_values(c.as_ref()).unwrap();
        let b = schmidt_values(p.as_ref()).unwrap();
        for (x, y) in a.lambdas.iter().zip(&b.lambdas) {
            prop_assert!((x - y).abs() <= 1e-13, "{x} vs {y}");
        }
    }

    #[test]
    fn exponential_fit_is_scale_equivariant(a in 0.1f64..10.0, b in 0.2f64..1.5, s in 0.01f64..100.0, noise in any::<u64>()) {
        let jitter = |l: u32| 1.0 + 0.01 * (((noise >> (l * 4)) & 15) as f64 / 15.0 - 0.5);
        let pts: Vec<(f64, f64)> = (4..=9).map(|l| (l as f64, a * (b * l as f64).exp2() * jitter(l))).collect();
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(l, d)| (l, s * d)).collect();
        let f1 = fit_exponential(&pts).unwrap();
        let f2 = fit_exponential(&scaled).unwrap();
        prop_assert!((f2.params[0] / (s * f1.params[0]) - 1.0).abs() <= 1e-10);
        prop_assert!((f2.params[1] - f1.params[1]).abs() <= 1e-10);
        prop_assert!((f2.r_squared - f1.r_squared).abs() <= 1e-10);
    }
}

#[test]
fn sampler_moments_follow_the_profile() {
    let profile = VarianceProfile::from_fn(2, 3, |k, l| (k + 2 * l) as f64 * 0.25);
    let draws = 20_000;
    let mut sum_sq = vec![0.0; 6];
    let mut cross = 0.0;
    for i in 0..draws {
        let c = draw_raw(&profile, 99, i);
        for k in 0..2 {
            for l in 0..3 {
                sum_sq[k * 3 + l] += c[(k, l)].re.powi(2) + c[(k, l)].im.powi(2);
            }
        }
        cross += c[(1, 1)].re * c[(1, 2)].re;
    }
    for k in 1..=2 {
        for l in 1..=3 {
            let h = profile.h(k, l);
            let m = sum_sq[(k - 1) * 3 + (l - 1)] / draws as f64;
            // E|c|^2 = 2h; relative error about 1/sqrt(draws).
            assert!((m - 2.0 * h).abs() <= 0.05 * 2.0 * h + 1e-12, "({k},{l}): {m} vs {}", 2.0 * h);
        }
    }
    let sd = (profile.h(2, 2) * profile.h(2, 3)).sqrt();
    let corr = cross / draws as f64 / sd;
    assert!(corr.abs() <= 4.0 / (draws as f64).sqrt(), "correlation {corr}");
}

#[test]
fn zero_variance_cells_stay_zero() {
    let profile = VarianceProfile::from_fn(2, 2, |k, l| if k == 1 && l == 1 { 1.0 } else { 0.0 });
    for i in 0..20 {
        let c = draw_sample(&profile, 3, i).unwrap().c;
        assert_eq!(c[(0, 1)], c64::new(0.0, 0.0));
        assert!((c[(0, 0)].norm() - 1.0).abs() < 1e-15);
    }
}

#[test]
fn batches_ignore_worker_count() {
    let spec = EnsembleSpec::decay(Family::Pe, 4, 4, 0.2).unwrap().with_gamma(0.5).unwrap();
    let profile = variance_profile(&spec).unwrap();
    let one = with_workers(1, || measure_batch(&profile, 5, 24)).unwrap().unwrap();
    let four = with_workers(4, || measure_batch(&profile, 5, 24)).unwrap().unwrap();
    assert_eq!(one, four);
}
