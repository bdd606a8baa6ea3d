use gl_lod::analysis::{fit_decay, fit_rate};
use gl_lod::spectrum::coercivity_trend_pairs;

const RHO_INV: [(f64, f64); 5] = [
    (8.0, 1.7124e-2),
    (12.0, 1.2444e-2),
    (16.0, 1.1930e-3),
    (20.0, 4.0621e-5),
    (32.0, 3.8279e-4),
];

#[test]
fn coercivity_exponent_of_published_table() {
    let without_32 = coercivity_trend_pairs(&RHO_INV[..4]).unwrap();
    assert!((without_32 - 6.319).abs() < 1e-3, "{without_32}");
    let all = coercivity_trend_pairs(&RHO_INV).unwrap();
    assert!((all - 3.713).abs() < 1e-3, "{all}");
}

#[test]
fn published_kappa8_lod_errors_converge_at_about_third_order() {
    let data = [
        (2.5e-1, 2.646701063281616e-1),
        (1.25e-1, 2.255503682609795e-2),
        (6.25e-2, 1.795684303882613e-3),
        (3.125e-2, 2.044910493346325e-4),
        (1.5625e-2, 2.970340831674449e-5),
    ];
    let rate = fit_rate(&data[..4], false).unwrap();
    assert!((rate - 3.466).abs() < 1e-3, "{rate}");
    assert!((rate - 3.45).abs() < 0.05);
    let all = fit_rate(&data, false).unwrap();
    assert!((all - 3.303).abs() < 1e-3, "{all}");
}

#[test]
fn published_localization_errors_decay_near_unit_rate() {
    let errs = [
        1.168107943932533e-1,
        4.468336060042428e-2,
        1.750244336516688e-2,
        6.648979976824701e-3,
        2.662044985356583e-3,
        1.054498966086386e-3,
        4.032293746584898e-4,
        1.438617013489406e-4,
        5.134893951764564e-5,
        1.746051048409995e-5,
    ];
    let pairs: Vec<(f64, f64)> = errs
        .iter()
        .enumerate()
        .map(|(i, &e)| ((i + 1) as f64, e))
        .collect();
    let r = fit_decay(&pairs).unwrap();
    assert!((r - 0.9697).abs() < 1e-3, "{r}");
    assert!((r - 1.0066).abs() < 0.05);
}
