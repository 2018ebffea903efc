use asyncbo::acquisition::Rule;
use asyncbo_web::{acquisition_curve_impl, catalog_impl, simulate_impl};

const XS: [f64; 4] = [0.1, 0.35, 0.6, 0.9];
const YS: [f64; 4] = [0.2, -1.0, 0.5, 1.3];

#[test]
fn curve_shapes_and_bands() {
    let c = acquisition_curve_impl(&XS, &YS, &[0.4], "ucb", true, 101, 0).unwrap();
    assert_eq!(c.grid.len(), 101);
    assert_eq!(c.grid[0], 0.0);
    assert_eq!(c.grid[100], 1.0);
    for i in 0..101 {
        assert!(c.lower[i] <= c.mean[i] && c.mean[i] <= c.upper[i]);
    }
    assert!((0.0..=1.0).contains(&c.proposal));
    assert!(c.lengthscale > 0.0);
}

#[test]
fn every_rule_evaluates() {
    for r in Rule::ALL {
        let c = acquisition_curve_impl(&XS, &YS, &[0.4, 0.8], r.name(), false, 51, 3).unwrap();
        let randomized = matches!(r, Rule::Random | Rule::Thompson | Rule::Aegis);
        assert_eq!(c.acquisition.is_none(), randomized, "{r}");
        if let Some(a) = c.acquisition {
            assert!(a.iter().all(|v| v.is_finite()), "{r}");
        }
    }
}

#[test]
fn penalized_surface_vanishes_at_busy_point() {
    // 0.5 lies on the 101-point grid.
    let c = acquisition_curve_impl(&XS, &YS, &[0.5], "lp-ucb", false, 101, 0).unwrap();
    let a = c.acquisition.unwrap();
    assert!(a[50].abs() < 1e-12);
    assert!(a.iter().cloned().fold(f64::NEG_INFINITY, f64::max) > 0.0);
}

#[test]
fn bad_input_reports_errors() {
    assert!(acquisition_curve_impl(&[], &[], &[], "ucb", true, 10, 0).is_err());
    assert!(acquisition_curve_impl(&XS, &YS, &[], "nope", true, 10, 0).unwrap_err().contains("valid names"));
    assert!(acquisition_curve_impl(&XS, &YS[..3], &[], "ucb", true, 10, 0).is_err());
    assert!(simulate_impl("hartmann-4", "ucb", 2, 5, 0).is_err());
}

#[test]
fn simulation_summary_is_consistent_and_reproducible() {
    let a = simulate_impl("branin-2", "kb-ucb", 3, 8, 1).unwrap();
    let b = simulate_impl("branin-2", "kb-ucb", 3, 8, 1).unwrap();
    assert_eq!(a.csv, b.csv);
    assert_eq!(a.times.len(), 6 + 8);
    assert_eq!(a.log_regret.len(), a.times.len());
    assert!(a.log_regret.windows(2).all(|w| w[1] <= w[0]));
    assert!(a.workers[..6].iter().all(|&w| w == -1));
    assert_eq!(a.delta.len(), a.delta_query.len());
    assert!(a.csv.starts_with("# asyncbo-trace v1"));
}

#[test]
fn catalog_lists_runnable_objectives() {
    let c = catalog_impl();
    let objectives = c["objectives"].as_array().unwrap();
    assert_eq!(objectives.len(), 7);
    for o in objectives {
        assert!(simulate_impl(o.as_str().unwrap(), "random", 1, 1, 0).is_ok(), "{o}");
    }
    assert_eq!(c["rules"].as_array().unwrap().len(), Rule::ALL.len());
}
