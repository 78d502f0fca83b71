use proptest::prelude::*;

use ridgeline_core::active_subspace::{
    alignment, apply_sign_convention, bootstrap_direction, fit_active_direction, summary_data,
};
use ridgeline_core::campaign::{evaluate_campaign, Link, RunStatus, SyntheticRidge};
use ridgeline_core::linalg::dot;
use ridgeline_core::surrogate::fit_quadratic;
use ridgeline_core::uq::{self, Feasibility};
use ridgeline_core::{rng, Campaign, ParameterSpace};

fn ridge(seed: u64) -> SyntheticRidge {
    let mut w = rng::random_unit_vector(7, seed);
    apply_sign_convention(&mut w);
    SyntheticRidge::new(w, Link::CubicMonotone, 0.0).unwrap()
}

fn evaluated_campaign(seed: u64) -> (Campaign, SyntheticRidge) {
    let mut c = Campaign::sample(ParameterSpace::hyshot(), 60, seed, Default::default()).unwrap();
    let r = ridge(seed + 100);
    let summary = evaluate_campaign(&mut c, &r, 4, |_| Ok(())).unwrap();
    assert_eq!((summary.attempted, summary.done, summary.failed), (60, 60, 0));
    (c, r)
}

#[test]
fn campaign_to_safe_set() {
    let (c, r) = evaluated_campaign(3);
    let (xs, fs) = c.done_samples();
    let active = fit_active_direction(&xs, &fs).unwrap();
    assert!(alignment(&active.w, r.direction()) > 0.95);

    let ens = bootstrap_direction(&xs, &fs, &active, 50, 9).unwrap();
    assert_eq!(ens.replicates.len(), 50);
    let summary = summary_data(&xs, &fs, &active, Some(&ens)).unwrap();
    // the fitted direction is close to but not exactly w*, so a few near ties may swap
    assert!(summary.discordant_pairs < 60 * 59 / 2 / 20, "{}", summary.discordant_pairs);

    let range = uq::estimate_range(&active.w, &fs, summary.discordant_pairs, |x| Ok(r.value(x))).unwrap();
    assert!(range.validated);
    assert_eq!(range.monotone_caveat, summary.discordant_pairs > 0);

    let surrogate = fit_quadratic(&summary.points, active.domain()).unwrap();
    let mid = 0.5 * (range.f_min + range.f_max);
    let safe = uq::invert_safe_set(&surrogate, &active.w, mid, 0.99).unwrap();
    assert_eq!(safe.feasible, Feasibility::Partial);
    let ranges = safe.safe_ranges(&c.space).unwrap();
    assert_eq!(ranges.len(), 7);
    assert!(ranges.iter().all(|s| s.original_min <= s.min && s.max <= s.original_max));
}

#[test]
fn saved_campaign_reloads_identically() {
    let (c, _) = evaluated_campaign(4);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    c.save(&path).unwrap();
    let back = Campaign::load(&path).unwrap();
    assert_eq!(back.to_json(), c.to_json());
    assert_eq!(back.count(RunStatus::Done), 60);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // every point of the inscribed box satisfies the upper-confidence constraint
    #[test]
    fn inscribed_box_is_safe(level_frac in 0.05f64..0.95, fracs in prop::collection::vec(0.0f64..=1.0, 7)) {
        let (c, _) = evaluated_campaign(5);
        let (xs, fs) = c.done_samples();
        let active = fit_active_direction(&xs, &fs).unwrap();
        let points = summary_data(&xs, &fs, &active, None).unwrap().points;
        let s = fit_quadratic(&points, active.domain()).unwrap();
        let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
        let threshold = lo + level_frac * (hi - lo);
        let safe = uq::invert_safe_set(&s, &active.w, threshold, 0.99).unwrap();
        prop_assume!(safe.feasible != Feasibility::Empty);
        let x: Vec<f64> = safe.normalized_ranges().iter().zip(&fracs).map(|((a, b), t)| a + t * (b - a)).collect();
        prop_assert!(dot(&active.w, &x) <= safe.y_max + 1e-9);
        prop_assert!(safe.contains(&active.w, &x) || dot(&active.w, &x) - safe.y_max < 1e-9);
    }
}
