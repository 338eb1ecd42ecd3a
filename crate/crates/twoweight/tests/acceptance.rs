//! Acceptance suite: one line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test --release --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twoweight::a2::a2_constants;
use twoweight::config::RunConfig;
use twoweight::decomposition::{
    admissible_q, basic_bound, carleson_embedding, monotonicity_check, size_of_q, Decomposition, StoppingTree,
};
use twoweight::dyadic::{expand, tripled_lemma_violations, DyadicInterval, ShiftedDyadicSystem};
use twoweight::ensemble::{ensemble, EnsembleKind, EnsembleParams};
use twoweight::envelopes::{
    error_depth, ERROR_GAMMA, ERROR_R, ERROR_RATIO_HI, LAMBDA_RATIO_HI, LAMBDA_SEEDS, Q_RATIO_HI, Q_RATIO_LO,
    Q_SCAN_LEVELS, Q_SCAN_ORIGINS, Q_SCAN_REACH,
};
use twoweight::hardy::{halfline_characterization, hardy_constant, hardy_norm, tail_power_bound};
use twoweight::hilbert::{HilbertForm, IntervalMode};
use twoweight::measure::{GridFunction, GridInterval, GridMeasure};
use twoweight::poisson::compare_q;
use twoweight::report::{render, run_report};
use twoweight::sampling::{decomposition_instance, random_function, random_pair, random_positive_form};

/// Relative slack for inequalities that hold exactly in real arithmetic.
const EXACT: f64 = 1e-12;
/// Slack of the Hardy and half-line sandwiches.
const SANDWICH: f64 = 1e-9;

type Outcome = std::result::Result<String, String>;

fn le(lhs: f64, rhs: f64, tol: f64) -> bool {
    lhs <= rhs + tol * lhs.abs().max(rhs.abs())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn hardy_sandwich() -> Outcome {
    let mut r = rng(101);
    let (mut worst_lo, mut worst_hi, mut slowest) = (f64::INFINITY, f64::INFINITY, 0.0f64);
    for i in 0..200 {
        let (s, w) = random_pair(&mut r, 128, i % 4 == 0);
        let t = Instant::now();
        let a = hardy_constant(&s, &w).map_err(|e| e.to_string())?;
        let c = hardy_norm(&s, &w).map_err(|e| e.to_string())?.value;
        slowest = slowest.max(t.elapsed().as_secs_f64());
        worst_lo = worst_lo.min((c - a) / a);
        worst_hi = worst_hi.min((2.0 * a - c) / a);
    }
    check(
        worst_lo >= -SANDWICH && worst_hi >= -SANDWICH && slowest < 1.0,
        format!("min (C-A)/A = {worst_lo:.3e}, min (2A-C)/A = {worst_hi:.3e}, slowest {slowest:.3} s"),
    )
}

fn halfline_sandwich() -> Outcome {
    let mut r = rng(101);
    let (mut worst_lo, mut worst_hi, mut slowest) = (f64::INFINITY, f64::INFINITY, 0.0f64);
    for i in 0..200 {
        let (s, w) = random_pair(&mut r, 128, i % 4 == 0);
        let t = Instant::now();
        let h = halfline_characterization(&s, &w).map_err(|e| e.to_string())?;
        slowest = slowest.max(t.elapsed().as_secs_f64());
        worst_lo = worst_lo.min((h.c - h.a / 4.0) / h.a);
        worst_hi = worst_hi.min((2.0 * h.a - h.c) / h.a);
    }
    check(
        worst_lo >= -SANDWICH && worst_hi >= -SANDWICH && slowest < 1.0,
        format!("min (C-A/4)/A = {worst_lo:.3e}, min (2A-C)/A = {worst_hi:.3e}, slowest {slowest:.3} s"),
    )
}

fn tail_power() -> Outcome {
    let mut r = rng(103);
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    for _ in 0..100 {
        let (_, w) = random_pair(&mut r, 64, false);
        let alpha = r.gen_range(0.01..0.99);
        let t = r.gen_range(0.0..128.0);
        let (lhs, rhs) = tail_power_bound(&w, t, alpha).map_err(|e| e.to_string())?;
        if rhs > 0.0 {
            worst = worst.max(lhs / rhs);
        }
        if !le(lhs, rhs, EXACT) {
            bad += 1;
        }
    }
    check(bad == 0, format!("{bad} violations, max lhs/rhs = {worst:.6}"))
}

fn a2_chain() -> Outcome {
    let mut r = rng(104);
    let (mut bad, mut shared) = (0, 0);
    let (mut star_ratio, mut a2_ratio): (f64, f64) = (0.0, 0.0);
    for i in 0..200 {
        let (s, w) = random_pair(&mut r, 32, i % 3 == 0);
        if s.atoms().any(|(k, _)| w.mass(k) > 0.0) {
            shared += 1;
        }
        let form = HilbertForm::new(s, w).map_err(|e| e.to_string())?;
        let tc = form.testing_constants(IntervalMode::Exhaustive);
        let a = a2_constants(&form);
        let min_star = a.a2_star.value.min(a.a2_star_dual.value);
        let ok = le(a.a2_star.value, 2.0 * tc.h_off.value, EXACT)
            && le(a.a2_star_dual.value, 2.0 * tc.h_off_dual.value, EXACT)
            && le(a.a2.value, 1.5 * min_star, EXACT);
        if !ok {
            bad += 1;
        }
        star_ratio = star_ratio.max(a.a2_star.value / tc.h_off.value).max(a.a2_star_dual.value / tc.h_off_dual.value);
        if min_star > 0.0 {
            a2_ratio = a2_ratio.max(a.a2.value / min_star);
        }
    }
    check(
        bad == 0 && shared >= 50,
        format!("{bad} violations, {shared} with a shared atom, max A2*/H_off = {star_ratio:.4}, max A2/min A2* = {a2_ratio:.4}"),
    )
}

fn testing_chain() -> Outcome {
    let mut r = rng(105);
    let mut bad = Vec::new();
    for i in 0..100 {
        let (s, w) = random_pair(&mut r, 24, i % 2 == 0);
        let form = HilbertForm::new(s, w).map_err(|e| e.to_string())?;
        let c = form.operator_norm().value;
        let tc = form.testing_constants(IntervalMode::Exhaustive);
        let weak = form.weak_boundedness().value;
        let mut pairs = vec![
            (tc.h_local.value, tc.h_glob.value),
            (tc.h_local_dual.value, tc.h_glob_dual.value),
            (tc.h_glob.value, c),
            (tc.h_glob_dual.value, c),
            (tc.h_off.value, tc.h_glob.value),
            (tc.h_off_dual.value, tc.h_glob_dual.value),
            (weak, c),
        ];
        for (n, k) in form.windowed_constants(6).into_iter().enumerate() {
            pairs.push((k, 2f64.powi(n as i32 + 1) * weak));
        }
        if pairs.iter().any(|&(l, r)| !le(l, r, EXACT)) {
            bad.push(i);
        }
    }
    check(bad.is_empty(), format!("100 instances, violations at {bad:?}"))
}

fn basic_bounds() -> Outcome {
    let mut r = rng(106);
    let mut worst: [f64; 4] = [0.0; 4];
    let mut bad = 0;
    for form_seed in 0..25 {
        let inst = decomposition_instance(&mut r, 4, 0.9, 3);
        let weak = inst.form.weak_boundedness().value;
        let (s, w) = (inst.form.sigma().clone(), inst.form.w().clone());
        for _ in 0..20 {
            let li = r.gen_range(1..=4u32);
            let lj = r.gen_range(1..=4u32);
            let i = DyadicInterval { left: r.gen_range(0..(16 >> li)) << li, level: li };
            let j = DyadicInterval { left: r.gen_range(0..(16 >> lj)) << lj, level: lj };
            let f = random_function(&mut r, &s);
            let g = random_function(&mut r, &w);
            let b = basic_bound(&inst.form, &i, &j, &f, &g, weak).map_err(|e| format!("form {form_seed}: {e}"))?;
            for (n, (lhs, rhs)) in b.all().into_iter().enumerate() {
                if !le(lhs, rhs, EXACT) {
                    bad += 1;
                }
                if rhs > 0.0 {
                    worst[n] = worst[n].max(lhs / rhs);
                }
            }
        }
    }
    check(
        bad == 0,
        format!("500 draws, {bad} violations, max |B|/bound (DD, ED, DE, EE) = {:.3} {:.3} {:.3} {:.3}", worst[0], worst[1], worst[2], worst[3]),
    )
}

fn reconstruction() -> Outcome {
    let mut r = rng(107);
    let (mut res, mut pyth): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let depth = r.gen_range(2..=7u32);
        let n = 1i64 << depth;
        let mut atoms = Vec::new();
        for k in 0..n {
            if r.gen_bool(0.7) {
                atoms.push((k, r.gen_range(-3.0f64..3.0).exp()));
            }
        }
        let mu = GridMeasure::from_cells(0, atoms).map_err(|e| e.to_string())?;
        let f = random_function(&mut r, &mu);
        let shift = r.gen_range(0..n);
        let sys = ShiftedDyadicSystem::new(0, 0, depth, shift, 0.9, 3).map_err(|e| e.to_string())?;
        let ex = expand(&f, &mu, &sys).map_err(|e| e.to_string())?;
        let back = ex.reconstruct(&mu);
        for (k, _) in mu.atoms() {
            res = res.max((back.value(k) - f.value(k)).abs());
        }
        let nf = f.norm(&mu).powi(2);
        if nf > 0.0 {
            pyth = pyth.max((ex.energy() - nf).abs() / nf);
        }
    }
    check(
        res <= 1e-12 && pyth <= 1e-10,
        format!("max |f - sum| = {res:.3e} (<= 1e-12), max relative Pythagoras residual = {pyth:.3e} (<= 1e-10)"),
    )
}

fn stopping() -> Outcome {
    let (mut half, mut carl, mut emb, mut oracle): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    let mut nodes = 0;
    for seed in 0..100u64 {
        let inst = decomposition_instance(&mut rng(seed), error_depth(seed), ERROR_GAMMA, ERROR_R);
        let tree = StoppingTree::build(&inst.form, &inst.g, &inst.sys).map_err(|e| e.to_string())?;
        nodes += tree.len();
        half = half.max(tree.half_mass_ratio());
        carl = carl.max(tree.carleson_ratio(inst.form.w()));
        let e = carleson_embedding(&tree, &inst.g, inst.form.w());
        emb = emb.max(e.ratio);
        oracle = oracle.max(e.oracle);
    }
    check(
        le(half, 0.5, EXACT) && le(carl, 2.0, EXACT) && le(emb, 8.0, EXACT) && le(oracle, 8.0, EXACT),
        format!("100 trees, {nodes} nodes, max child mass ratio {half:.4}, max Carleson {carl:.4}, max embedding {emb:.4} (oracle {oracle:.4}, bound 8)"),
    )
}

fn decomposition_identities() -> Outcome {
    let (mut res, mut err): (f64, f64) = (0.0, 0.0);
    for seed in 0..50u64 {
        let inst = decomposition_instance(&mut rng(seed), error_depth(seed), ERROR_GAMMA, ERROR_R);
        let d = Decomposition::new(&inst.form, inst.sys, &inst.f, &inst.g).map_err(|e| e.to_string())?;
        let rep = d.split_identities(&inst.g);
        res = res.max(rep.max_residual());
        let h_star = inst.form.testing_constants(IntervalMode::Exhaustive).h_local_dual.value;
        let scale = h_star * inst.f.norm(inst.form.sigma()) * inst.g.norm(inst.form.w());
        if scale > 0.0 {
            err = err.max(rep.errors.abs_total() / scale);
        }
    }
    check(
        res <= 1e-10 && err <= ERROR_RATIO_HI,
        format!("50 instances of 16-64 cells, max residual {res:.3e} (<= 1e-10), max error/(H* |f| |g|) = {err:.4} (envelope {ERROR_RATIO_HI:.4})"),
    )
}

fn monotonicity() -> Outcome {
    const C0: f64 = 1.0 / 20.0;
    let mut r = rng(110);
    let (mut bad1, mut bad2) = (0, 0);
    let mut min_ratio = f64::INFINITY;
    for _ in 0..500 {
        let n = 16i64;
        let sigma = GridMeasure::from_cells(0, (0..n).map(|k| (k, r.gen_range(0.1..2.0)))).map_err(|e| e.to_string())?;
        let w = GridMeasure::from_cells(0, (0..n).map(|k| (k, r.gen_range(0.1..2.0)))).map_err(|e| e.to_string())?;
        let form = HilbertForm::new(sigma, w).map_err(|e| e.to_string())?;
        let level = r.gen_range(1..=3u32);
        let j = DyadicInterval { left: r.gen_range(0..(n >> level)) << level, level };
        let f = GridFunction::from_cells(0, (0..n).map(|k| (k, r.gen_range(-1.0..1.0))));
        let family: Vec<DyadicInterval> = (1..=level)
            .flat_map(|l| (0..(1i64 << (level - l))).map(move |a| DyadicInterval { left: j.left + (a << l), level: l }))
            .filter(|_| r.gen_bool(0.7))
            .collect();
        let h = GridFunction::from_cells(0, (0..n).filter(|k| !j.contains_cell(*k)).map(|k| (k, r.gen_range(0.0..1.0))));
        let g = GridFunction::from_cells(0, h.entries().map(|(k, v)| (k, v * r.gen_range(-1.0..1.0))).collect::<Vec<_>>());
        let m = monotonicity_check(&form, &f, &family, &j, &g, &h).map_err(|e| e.to_string())?;
        if !le(m.lhs, m.mid, EXACT) {
            bad1 += 1;
        }
        if !le(C0 * m.poisson, m.mid, EXACT) {
            bad2 += 1;
        }
        if m.poisson > 0.0 {
            min_ratio = min_ratio.min(m.mid / m.poisson);
        }
    }
    check(
        bad1 == 0 && bad2 == 0,
        format!("500 instances, upper {bad1} violations, lower (c0 = 1/20) {bad2} violations, min mid/poisson = {min_ratio:.4}"),
    )
}

fn positive_dyadic() -> Outcome {
    let mut bad = 0;
    let mut hi: f64 = 0.0;
    for seed in 0..500u64.min(LAMBDA_SEEDS) {
        let form = random_positive_form(&mut rng(seed), 2.0);
        let norm = form.norm_p2().value;
        let t = form.testing();
        let sum = t.u + t.t + t.t_star;
        if !le(t.u.max(t.t).max(t.t_star), norm, EXACT) {
            bad += 1;
        }
        if sum > 0.0 {
            hi = hi.max(norm / sum);
        }
    }
    check(
        bad == 0 && hi <= LAMBDA_RATIO_HI,
        format!("500 forms at p = 2, {bad} violations, max |Lambda|/(U+T+T*) = {hi:.4} (envelope {LAMBDA_RATIO_HI:.4})"),
    )
}

fn dyadic_poisson() -> Outcome {
    let mut r = rng(112);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..500 {
        let origin = Q_SCAN_ORIGINS[r.gen_range(0..Q_SCAN_ORIGINS.len())];
        let level = r.gen_range(0..=Q_SCAN_LEVELS);
        let len = 1i64 << level;
        let left = r.gen_range(-Q_SCAN_REACH..Q_SCAN_REACH);
        let left = left - (left - origin).rem_euclid(len);
        let k = DyadicInterval { left, level };
        let atoms: Vec<(i64, f64)> =
            (0..r.gen_range(1..12)).map(|_| (r.gen_range(-Q_SCAN_REACH..Q_SCAN_REACH), r.gen_range(0.0..2.0))).collect();
        let mu = GridMeasure::from_cells(0, atoms).map_err(|e| e.to_string())?;
        let h = GridFunction::from_cells(0, mu.atoms().map(|(k, _)| (k, r.gen_range(0.0..3.0))).collect::<Vec<_>>());
        let c = compare_q(&h, &mu, &k, origin).map_err(|e| e.to_string())?;
        if c.q > 0.0 {
            lo = lo.min(c.ratio);
            hi = hi.max(c.ratio);
        }
    }
    let inside = le(Q_RATIO_LO, lo, EXACT) && le(hi, Q_RATIO_HI, EXACT);
    let window = GridInterval::with_len(-512, 1024);
    let violations: usize = Q_SCAN_ORIGINS.iter().map(|&o| tripled_lemma_violations(o, window, 10, 3)).sum();
    check(
        inside && violations == 0,
        format!(
            "ratio range [{lo:.4}, {hi:.4}] inside [{Q_RATIO_LO:.4}, {Q_RATIO_HI:.4}]; tripled lemma on 1024 cells: {violations} violations"
        ),
    )
}

fn comparability() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    let mut glob_bad = 0;
    for kind in EnsembleKind::ALL {
        let mut medians = Vec::new();
        for seed in 0..3u64 {
            let insts = ensemble(&EnsembleParams { kind, n: 16, count: 40, seed }).map_err(|e| e.to_string())?;
            let mut ratios = Vec::new();
            for inst in insts {
                let form = HilbertForm::new(inst.sigma, inst.w).map_err(|e| e.to_string())?;
                let c = form.operator_norm().value;
                let tc = form.testing_constants(IntervalMode::Exhaustive);
                if !le(tc.h_glob.value, c, EXACT) || !le(tc.h_glob_dual.value, c, EXACT) {
                    glob_bad += 1;
                }
                let a = a2_constants(&form);
                let deep = tc.h_local.value + tc.h_local_dual.value + a.a2_star.value + a.a2_star_dual.value;
                if deep > 0.0 {
                    ratios.push(c / deep);
                }
            }
            if ratios.iter().any(|x| !x.is_finite()) || ratios.is_empty() {
                ok = false;
            }
            medians.push(median(ratios));
        }
        let (mn, mx) = medians.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        let spread = mx / mn - 1.0;
        ok &= spread <= 0.05;
        lines.push(format!("{kind} {:.4}/{:.4}/{:.4}", medians[0], medians[1], medians[2]));
    }
    let mut lattice = Vec::new();
    for n in [64usize, 256] {
        let inst = &ensemble(&EnsembleParams { kind: EnsembleKind::Lattice, n, count: 1, seed: 0 }).map_err(|e| e.to_string())?[0];
        let c = HilbertForm::new(inst.sigma.clone(), inst.w.clone()).map_err(|e| e.to_string())?.operator_norm().value;
        ok &= c <= std::f64::consts::PI + 1e-6;
        lattice.push(format!("N={n}: C = {c:.6}"));
    }
    ok &= glob_bad == 0;
    check(
        ok,
        format!(
            "H_glob > C on {glob_bad}; median C/(H+H*+A2*+A2*') per seed 0/1/2 (spread <= 5%): {}; lattice {}",
            lines.join(", "),
            lattice.join(", ")
        ),
    )
}

fn size_bound() -> Outcome {
    let (mut worst, mut over3, mut collections) = (0.0f64, 0, 0);
    let mut bad = 0;
    for seed in 0..50u64 {
        let inst = decomposition_instance(&mut rng(seed), error_depth(seed), ERROR_GAMMA, ERROR_R);
        let tree = StoppingTree::build(&inst.form, &inst.g, &inst.sys).map_err(|e| e.to_string())?;
        let h_star = inst.form.testing_constants(IntervalMode::Exhaustive).h_local_dual.value;
        for s in 0..tree.len() {
            let q = admissible_q(&tree, s);
            let size = size_of_q(&q, inst.form.sigma(), inst.form.w()).value;
            collections += 1;
            if !le(size, 12.0 * h_star, EXACT) {
                bad += 1;
            }
            if size > 3.0 * h_star {
                over3 += 1;
            }
            if h_star > 0.0 {
                worst = worst.max(size / h_star);
            }
        }
    }
    check(
        bad == 0,
        format!("{collections} collections, {bad} above 12 H*, max size/H* = {worst:.4}, {over3} above 3 H*"),
    )
}

fn determinism() -> Outcome {
    let cfg = RunConfig { seed: 5, ..RunConfig::default() };
    let mut first: Option<Vec<(&'static str, String)>> = None;
    for _ in 0..3 {
        let mut insts = Vec::new();
        let mut params = Vec::new();
        for kind in EnsembleKind::ALL {
            let p = EnsembleParams { kind, n: 8, count: 3, seed: 5 };
            insts.extend(ensemble(&p).map_err(|e| e.to_string())?);
            params.push(p);
        }
        let report = run_report(&insts, &cfg, None);
        let files = render(&report).map_err(|e| e.to_string())?;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        twoweight::report::write_report(&report, dir.path()).map_err(|e| e.to_string())?;
        for (name, text) in &files {
            let on_disk = std::fs::read_to_string(dir.path().join(name)).map_err(|e| e.to_string())?;
            if &on_disk != text {
                return Err(format!("{name} on disk differs from the rendering"));
            }
        }
        match &first {
            None => first = Some(files),
            Some(f) if *f != files => return Err("repeated renderings differ".into()),
            Some(_) => {}
        }
    }
    let f = first.expect("three runs");
    let bytes: usize = f.iter().map(|(_, t)| t.len()).sum();
    check(true, format!("3 runs over 15 instances, {} files, {bytes} bytes, byte-identical", f.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 15] = [
        ("hardy sandwich A <= C <= 2A", hardy_sandwich),
        ("half-line sandwich A/4 <= C <= 2A", halfline_sandwich),
        ("tail power bound", tail_power),
        ("A2 chain", a2_chain),
        ("testing chain", testing_chain),
        ("basic bounds (2, sqrt 2, sqrt 2, 1)", basic_bounds),
        ("reconstruction and Pythagoras", reconstruction),
        ("stopping invariants", stopping),
        ("decomposition identities", decomposition_identities),
        ("monotonicity", monotonicity),
        ("positive dyadic form", positive_dyadic),
        ("dyadic Poisson comparison", dyadic_poisson),
        ("comparability", comparability),
        ("size of admissible collections", size_bound),
        ("report determinism", determinism),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = run();
        let secs = t.elapsed().as_secs_f64();
        let (tag, detail) = match out {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {:>2}: {name}: {detail} [{secs:.1} s]", n + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
