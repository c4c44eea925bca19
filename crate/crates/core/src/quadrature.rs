//! Fixed-order Gauss–Legendre rules.

/// Nodes of the 8-point Gauss–Legendre rule on `[-1, 1]`.
const NODES8: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_78,
    0.183_434_642_495_649_78,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];

const WEIGHTS8: [f64; 8] = [
    0.101_228_536_290_376_69,
    0.222_381_034_453_374_34,
    0.313_706_645_877_887_05,
    0.362_683_783_378_361_77,
    0.362_683_783_378_361_77,
    0.313_706_645_877_887_05,
    0.222_381_034_453_374_34,
    0.101_228_536_290_376_69,
];

/// Integral of `f` over `[a, b]` with the 8-point Gauss–Legendre rule.
/// Exact for polynomials of degree up to 15.
pub fn gauss_legendre8<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    NODES8
        .iter()
        .zip(WEIGHTS8.iter())
        .map(|(&t, &w)| w * f(mid + half * t))
        .sum::<f64>()
        * half
}

/// Composite 8-point rule over `panels` equal sub-intervals of `[a, b]`.
pub fn composite_gauss_legendre8<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * h;
            let hi = if k + 1 == panels { b } else { lo + h };
            gauss_legendre8(&f, lo, hi)
        })
        .sum()
}
