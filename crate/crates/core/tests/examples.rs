//! Runs every example and checks what it reports.

macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!("../examples/", stringify!($name), ".rs"));
        }
    };
}

example!(closed_forms);
example!(lag_geometry);
example!(simulate_fields);
example!(estimate_madograms);
example!(fit_schemes);
example!(select_model);
example!(marginal_transform);
example!(permutation_bands);

use stmado::models::{theta_from_fmadogram, Family};
use stmado::Margins;

#[test]
fn closed_forms_are_mutually_consistent() {
    let rows = closed_forms::run_example().unwrap();
    assert_eq!(rows.len(), 24);
    for r in rows {
        assert!((1.0..=2.0).contains(&r.theta), "{:?} {}", r.family, r.theta);
        assert!((r.chi - (2.0 - r.theta)).abs() < 1e-12);
        assert!((theta_from_fmadogram(r.nu) - r.theta).abs() < 1e-12);
    }
}

#[test]
fn lag_geometry_counts_agree() {
    let s = lag_geometry::run_example().unwrap();
    for (h, closed, listed) in &s.counts {
        assert_eq!(*closed as usize, *listed, "h = {h}");
    }
    assert_eq!((s.spatial_groups, s.temporal_groups, s.joint_groups), (10, 10, 100));
}

#[test]
fn simulated_fields_are_frechet_and_distinct() {
    let fields = simulate_fields::run_example().unwrap();
    assert_eq!(fields.len(), 4);
    for (_, f) in &fields {
        assert_eq!(f.margins(), Margins::Frechet);
        assert!(f.values().iter().all(|&v| v > 0.0));
    }
    assert_ne!(fields[0].1.values(), fields[1].1.values());
    assert_eq!(fields[2].0, Family::B1);
}

#[test]
fn empirical_madograms_track_the_model() {
    for (h, l, emp, model) in estimate_madograms::run_example().unwrap() {
        assert!((emp - model).abs() < 0.03, "h {h} l' {l}: {emp} vs {model}");
    }
}

#[test]
fn fits_recover_exact_data_and_stay_valid() {
    let f = fit_schemes::run_example().unwrap();
    for (a, b) in f.exact.model.to_vec().iter().zip(f.truth.to_vec()) {
        assert!((a - b).abs() < 1e-4);
    }
    assert!(f.joint.objective.is_finite() && f.separate.objective.is_finite());
    f.separate.model.validate().unwrap();
}

#[test]
fn selection_prefers_the_generating_family() {
    let report = select_model::run_example().unwrap();
    assert_eq!(report.entries.len(), 3);
    assert_eq!(report.selected, Family::A1);
}

#[test]
fn marginal_transform_yields_unit_frechet_blocks() {
    let report = marginal_transform::run_example().unwrap();
    assert_eq!(report.sites.len(), 16);
    assert_eq!(report.field.margins(), Margins::Frechet);
    assert_eq!((report.field.n(), report.field.t_len()), (4, 60));
    for s in &report.sites {
        let g = s.law.as_gev();
        assert!(g.sigma > 2.0 && g.sigma < 8.0, "{g:?}");
        assert_eq!(g.xi, 0.0);
    }
}

#[test]
fn short_range_dependence_has_a_range_beyond_one() {
    let b = permutation_bands::run_example().unwrap();
    for band in [&b.spatial, &b.temporal] {
        assert!(band.lower.iter().zip(&band.upper).all(|(lo, hi)| lo <= hi));
    }
    assert!(b.spatial_range.is_some_and(|r| r > 1.0), "{:?}", b.spatial_range);
}
