//! Measured envelopes, frozen after their first generation.
//!
//! Each constant records the extreme value of a ratio over a fixed, seeded
//! sample or scan. The ignored test `regenerate` recomputes them all; the
//! acceptance suite draws its instances from inside the same domains.

/// Levels of `K` covered by the `Q` against `sum_u Q^u` scan.
pub const Q_SCAN_LEVELS: u32 = 6;
/// Atoms and left ends of `K` lie in `[-Q_SCAN_REACH, Q_SCAN_REACH)`.
pub const Q_SCAN_REACH: i64 = 96;
/// Origins of the scan; other origins are translates.
pub const Q_SCAN_ORIGINS: [i64; 2] = [0, 3];
/// Smallest `sum_u Q^u / Q` over single atoms of the scan domain.
pub const Q_RATIO_LO: f64 = 1.0 / 54.0;
/// Largest `sum_u Q^u / Q` over single atoms of the scan domain.
pub const Q_RATIO_HI: f64 = 1.678_032_769_097_221_9;

/// Seeds `0..LAMBDA_SEEDS` of [`crate::sampling::random_positive_form`] at `p = 2`.
pub const LAMBDA_SEEDS: u64 = 3000;
/// Largest `||Lambda|| / (U + T + T*)` over that sample. The lower end `1/3`
/// follows from `max(U, T, T*) <= ||Lambda||`.
pub const LAMBDA_RATIO_HI: f64 = 0.747_046_458_094_126_1;

/// Seeds `0..HOLES_SEEDS` of [`crate::sampling::random_profile`].
pub const HOLES_SEEDS: u64 = 3000;
/// Largest `Q / (U + T + T*)` for the inequality with holes over that sample.
pub const HOLES_RATIO_HI: f64 = 0.153_578_599_915_633_4;

/// Seeds `0..ERROR_SEEDS` of [`crate::sampling::decomposition_instance`] with
/// depth `4 + seed % 3`, `gamma = ERROR_GAMMA`, `r = ERROR_R`.
pub const ERROR_SEEDS: u64 = 200;
pub const ERROR_GAMMA: f64 = 0.9;
pub const ERROR_R: u32 = 3;
/// Largest `(|E_0| + sum_k |E_k|) / (H* ||f|| ||g||)` over that sample.
pub const ERROR_RATIO_HI: f64 = 0.027_339_934_055_993_61;

pub fn error_depth(seed: u64) -> u32 {
    4 + (seed % 3) as u32
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::decomposition::Decomposition;
    use crate::hilbert::IntervalMode;
    use crate::poisson::{holes_inequality_norm, holes_testing, single_atom_ratio_range};
    use crate::sampling::{decomposition_instance, random_positive_form, random_profile};

    fn q_range() -> (f64, f64) {
        Q_SCAN_ORIGINS.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &o| {
            let (a, b) = single_atom_ratio_range(o, Q_SCAN_LEVELS, Q_SCAN_REACH);
            (lo.min(a), hi.max(b))
        })
    }

    fn lambda_max(seeds: u64) -> f64 {
        (0..seeds)
            .filter_map(|s| {
                let f = random_positive_form(&mut ChaCha8Rng::seed_from_u64(s), 2.0);
                let n = f.norm_p2().value;
                let t = f.testing();
                (n > 0.0).then(|| n / (t.u + t.t + t.t_star))
            })
            .fold(0.0, f64::max)
    }

    fn holes_max(seeds: u64) -> f64 {
        (0..seeds)
            .filter_map(|s| {
                let (p, w) = random_profile(&mut ChaCha8Rng::seed_from_u64(s));
                let h = holes_testing(&p, &w);
                let q = holes_inequality_norm(&p, &w).value;
                (q > 0.0).then(|| q / (h.u + h.t + h.t_star))
            })
            .fold(0.0, f64::max)
    }

    fn error_max(seeds: u64) -> f64 {
        (0..seeds)
            .filter_map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let inst = decomposition_instance(&mut rng, error_depth(s), ERROR_GAMMA, ERROR_R);
                let hs = inst.form.testing_constants(IntervalMode::Exhaustive).h_local_dual.value;
                let d = Decomposition::new(&inst.form, inst.sys, &inst.f, &inst.g).ok()?;
                let den = hs * inst.f.norm(inst.form.sigma()) * inst.g.norm(inst.form.w());
                (den > 0.0).then(|| d.error_terms().abs_total() / den)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn prefixes_stay_inside() {
        assert!(lambda_max(200) <= LAMBDA_RATIO_HI);
        assert!(holes_max(200) <= HOLES_RATIO_HI);
        assert!(error_max(20) <= ERROR_RATIO_HI);
        let (lo, hi) = Q_SCAN_ORIGINS.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &o| {
            let (a, b) = single_atom_ratio_range(o, 3, 32);
            (lo.min(a), hi.max(b))
        });
        assert!(lo >= Q_RATIO_LO - 1e-15 && hi <= Q_RATIO_HI, "{lo} {hi}");
    }

    #[test]
    #[ignore = "regenerates the frozen values; run with --release"]
    fn regenerate() {
        let (lo, hi) = q_range();
        println!("Q_RATIO_LO = {lo:.17}\nQ_RATIO_HI = {hi:.17}");
        println!("LAMBDA_RATIO_HI = {:.17}", lambda_max(LAMBDA_SEEDS));
        println!("HOLES_RATIO_HI = {:.17}", holes_max(HOLES_SEEDS));
        println!("ERROR_RATIO_HI = {:.17}", error_max(ERROR_SEEDS));
        assert_eq!(lo, Q_RATIO_LO);
        assert_eq!(hi, Q_RATIO_HI);
    }
}
