mod common;

use common::*;
use srqda::fisher::{BulkTerms, VarianceForm};

#[test]
fn deterministic_equivalents_match_monte_carlo_with_orthogonal_directions() {
    let bed = StatisticBed::new(moment_specs(300, 1.2, None, 7), [600, 600], VarianceForm::Displayed, 11);
    for g in 0..3 {
        let gamma = bed.random_gamma(100 + g);
        for c in bed.check(&gamma, BulkTerms::Omitted, 100_000, 5 + g) {
            // The Monte Carlo itself must agree with the exact conditional moments.
            assert!((c.mean_mc - c.mean_exact).abs() < 4.0 * (c.var_exact / 100_000.0).sqrt(), "{c:?}");
            assert!((c.var_mc / c.var_exact - 1.0).abs() < 0.06, "{c:?}");
            assert!(c.mean_rel_err() <= 0.05, "{c:?}");
            assert!(c.var_rel_err() <= 0.10, "{c:?}");
        }
    }
}

#[test]
fn forms_agree_without_cross_class_overlap() {
    let beds = [VarianceForm::Displayed, VarianceForm::PatternConsistent, VarianceForm::Rederived]
        .map(|f| StatisticBed::new(moment_specs(120, 1.5, None, 3), [300, 300], f, 4));
    let gamma = beds[0].random_gamma(9);
    let v: Vec<f64> = beds.iter().map(|b| b.check(&gamma, BulkTerms::Omitted, 10, 1)[0].var_bar).collect();
    assert!((v[0] - v[1]).abs() < 1e-9 * v[0] && (v[0] - v[2]).abs() < 1e-9 * v[0], "{v:?}");
}

#[test]
fn rederived_form_tracks_overlapping_directions() {
    let specs = moment_specs(300, 1.2, Some(0.6), 7);
    let bed = StatisticBed::new(specs.clone(), [600, 600], VarianceForm::Rederived, 11);
    let displayed = StatisticBed::new(specs, [600, 600], VarianceForm::Displayed, 11);
    let mut worst = 0.0f64;
    let mut worst_displayed = 0.0f64;
    for g in 0..3 {
        let gamma = bed.random_gamma(100 + g);
        for (c, d) in bed.check(&gamma, BulkTerms::Omitted, 20_000, 5).iter().zip(displayed.check(&gamma, BulkTerms::Omitted, 10, 5)) {
            assert!(c.mean_rel_err() <= 0.05, "{c:?}");
            worst = worst.max((c.var_exact - c.var_bar).abs() / c.var_bar);
            worst_displayed = worst_displayed.max((d.var_exact - d.var_bar).abs() / d.var_bar.abs());
        }
    }
    assert!(worst < 0.15, "{worst}");
    assert!(worst_displayed > 0.3, "{worst_displayed}");
}

/// With the bulk quadratic form restored the moments describe `2 W(x)`
/// itself; without it the variance misses the chi-square fluctuation.
#[test]
fn bulk_terms_account_for_the_full_quadratic_form() {
    let bed = StatisticBed::new(moment_specs(200, 1.5, None, 21), [400, 400], VarianceForm::Rederived, 22);
    for g in 0..3 {
        let gamma = bed.random_gamma(3 + g);
        let included = bed.check(&gamma, BulkTerms::Included, 10, 1);
        let omitted = bed.check(&gamma, BulkTerms::Omitted, 10, 1);
        let full = bed.full_moments(&gamma);
        for i in 0..2 {
            let (m, v) = full[i];
            assert!(((included[i].mean_bar - m) / m).abs() < 0.05, "{:?} vs {m}", included[i]);
            assert!(((included[i].var_bar - v) / v).abs() < 0.12, "{:?} vs {v}", included[i]);
            assert!(((omitted[i].var_bar - v) / v).abs() > 0.5, "{:?} vs {v}", omitted[i]);
        }
    }
}


/// With almost no shrinkage of the leading spikes the conditional variance
/// still depends on the particular training sample at `p = 300`; the gap
/// to the deterministic equivalent closes as `p` grows.
#[test]
fn small_shrinkage_gap_closes_with_dimension() {
    let gamma = srqda::fisher::GammaParams {
        gamma1_0: 0.0025,
        gamma2_0: 0.4,
        gamma1_1: 0.145,
        gamma2_1: 0.4,
    };
    let worst = |p: usize| {
        (0..4u64)
            .map(|s| {
                let bed = StatisticBed::new(moment_specs(p, 1.2, None, 707 + s), [2 * p, 2 * p], VarianceForm::default(), 900 + s);
                let c = bed.check(&gamma, BulkTerms::Omitted, 10, 1)[0];
                (c.var_exact / c.var_bar - 1.0).abs()
            })
            .fold(0.0, f64::max)
    };
    let (small, large) = (worst(150), worst(1200));
    assert!(large < 0.06, "{small} -> {large}");
    assert!(large < small, "{small} -> {large}");
}
