//! Per-instance verification records, ensemble summaries and the files they
//! are written to.
//!
//! A report directory holds
//!
//! * `report.csv`: one row per instance, columns [`csv_header`];
//! * `report.jsonl`: one [`InstanceReport`] per line;
//! * `summary.json`: the [`Summary`], echoing the effective configuration;
//! * `timings.csv`: wall-clock seconds per instance and stage.
//!
//! Everything except `timings.csv` is a function of the inputs and the
//! configuration alone, so repeated runs produce identical bytes.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::a2::a2_constants;
use crate::config::RunConfig;
use crate::decomposition::{
    admissible_q, carleson_embedding, energy_profile, good_part, size_of_q, Decomposition, StoppingTree,
};
use crate::dyadic::ShiftedDyadicSystem;
use crate::ensemble::{EnsembleParams, Instance};
use crate::error::{Error, Result};
use crate::hardy::{halfline_characterization, hardy_constant, hardy_norm};
use crate::hilbert::HilbertForm;
use crate::measure::{GridInterval, GridMeasure};
use crate::poisson::{holes_inequality_norm, holes_testing};
use crate::sampling::random_function;

pub const FORMAT_VERSION: &str = "twoweight-report/1";
/// `K_n` is tabulated for `n = 0..=K_MAX`.
pub const K_MAX: u32 = 6;
/// Largest depth of the covering system on which the decomposition is run.
pub const DECOMPOSITION_MAX_DEPTH: u32 = 10;
/// Residual allowed in the decomposition identities, relative to `max(1, C ||f|| ||g||)`.
pub const SPLIT_TOL: f64 = 1e-10;
/// Bound for the best Carleson embedding constant of a stopping tree.
pub const CARLESON_EMBEDDING_BOUND: f64 = 8.0;
/// `size(Q) <= SIZE_FACTOR H*`.
pub const SIZE_FACTOR: f64 = 12.0;
/// `max(U, T, T*) <= HOLES_FACTOR Q` for the inequality with holes.
pub const HOLES_FACTOR: f64 = 3.0;
/// Stream offset for the test functions `f`, `g` of instance `i`.
pub const FUNCTION_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::NotApplicable => "not-applicable",
        }
    }
}

/// Whether the constant of an inequality is the one stated with the theorem
/// or one derived from its proof.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    Stated,
    Derived,
}

/// `lhs <= rhs`, checked up to the relative tolerance of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub basis: Basis,
    pub status: Status,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub witness: Option<String>,
    pub note: Option<String>,
}

/// Names and bases of the verdicts, in report order.
pub const VERDICTS: [(&str, Basis); 21] = [
    ("h_le_h_glob", Basis::Stated),
    ("h_star_le_h_glob_star", Basis::Stated),
    ("h_glob_le_c", Basis::Stated),
    ("h_glob_star_le_c", Basis::Stated),
    ("h_off_le_h_glob", Basis::Stated),
    ("h_off_star_le_h_glob_star", Basis::Stated),
    ("weak_le_c", Basis::Stated),
    ("k_n_le_2pow_weak", Basis::Stated),
    ("a2_star_le_2h_off", Basis::Stated),
    ("a2_star_dual_le_2h_off_star", Basis::Stated),
    ("a2_le_three_halves_min_star", Basis::Stated),
    ("hardy_a_le_c", Basis::Stated),
    ("hardy_c_le_2a", Basis::Stated),
    ("halfline_quarter_a_le_c", Basis::Stated),
    ("halfline_c_le_2a", Basis::Stated),
    ("stopping_half_mass", Basis::Stated),
    ("stopping_carleson", Basis::Stated),
    ("carleson_embedding_le_8", Basis::Derived),
    ("split_identities", Basis::Stated),
    ("size_q_le_12h_star", Basis::Derived),
    ("holes_max_le_3q", Basis::Derived),
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c: Option<f64>,
    pub h: Option<f64>,
    pub h_star: Option<f64>,
    pub h_glob: Option<f64>,
    pub h_glob_star: Option<f64>,
    pub h_off: Option<f64>,
    pub h_off_star: Option<f64>,
    pub weak: Option<f64>,
    /// `K_0 ..= K_K_MAX`
    pub k_n: Option<Vec<f64>>,
    pub a2_star: Option<f64>,
    pub a2_star_dual: Option<f64>,
    pub a2: Option<f64>,
    pub a2_lacey: Option<f64>,
    pub hardy_a: Option<f64>,
    pub hardy_c: Option<f64>,
    pub halfline_a: Option<f64>,
    pub halfline_c: Option<f64>,
    pub stopping_nodes: Option<usize>,
    pub size_q: Option<f64>,
    /// testing constants and norm of the inequality with holes for the
    /// energy profile with the largest norm
    pub holes_u: Option<f64>,
    pub holes_t: Option<f64>,
    pub holes_t_star: Option<f64>,
    pub holes_q: Option<f64>,
}

/// Comparability ratios; measured, never judged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    /// `C / (H_glob + H_glob*)`
    pub c_over_glob: Option<f64>,
    /// `C / (H + H* + [sigma,w]* + [w,sigma]*)`
    pub c_over_deep: Option<f64>,
    /// `[sigma,w]* / H_off`
    pub a2_star_over_h_off: Option<f64>,
    pub hardy_c_over_a: Option<f64>,
    pub halfline_c_over_a: Option<f64>,
    /// `sum_S w(S) <g>_S^2 / ||g||^2` for the test function `g`
    pub carleson_embedding: Option<f64>,
    /// `(|E_0| + sum_k |E_k|) / (H* ||f|| ||g||)`
    pub error_over_h_star: Option<f64>,
    pub size_q_over_h_star: Option<f64>,
    /// `Q / (U + T + T*)`, largest over the energy profiles
    pub holes_q_over_sum: Option<f64>,
}

impl Ratios {
    pub fn entries(&self) -> [(&'static str, Option<f64>); 9] {
        [
            ("c_over_glob", self.c_over_glob),
            ("c_over_deep", self.c_over_deep),
            ("a2_star_over_h_off", self.a2_star_over_h_off),
            ("hardy_c_over_a", self.hardy_c_over_a),
            ("halfline_c_over_a", self.halfline_c_over_a),
            ("carleson_embedding", self.carleson_embedding),
            ("error_over_h_star", self.error_over_h_star),
            ("size_q_over_h_star", self.size_q_over_h_star),
            ("holes_q_over_sum", self.holes_q_over_sum),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub format_version: String,
    pub index: usize,
    pub label: String,
    pub scale_exponent: i32,
    pub sigma_atoms: usize,
    pub w_atoms: usize,
    pub shared_atoms: usize,
    /// seed and stream of the test functions of the decomposition
    pub seed: u64,
    pub stream: u64,
    pub error: Option<String>,
    pub constants: Constants,
    pub ratios: Ratios,
    pub verdicts: Vec<Verdict>,
}

impl InstanceReport {
    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| v.status == Status::Fail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub index: usize,
    pub label: String,
    pub stages: Vec<(String, f64)>,
}

fn ratio(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    }
}

fn interval_text(i: Option<GridInterval>) -> Option<String> {
    i.map(|i| i.to_string())
}

struct Verdicts {
    tol: f64,
    map: BTreeMap<&'static str, Verdict>,
}

impl Verdicts {
    fn new(tol: f64) -> Self {
        Self { tol, map: BTreeMap::new() }
    }

    fn basis(name: &str) -> Basis {
        VERDICTS.iter().find(|v| v.0 == name).map(|v| v.1).expect("known verdict")
    }

    fn check(&mut self, name: &'static str, lhs: f64, rhs: f64, witness: Option<String>) {
        let slack = self.tol * lhs.abs().max(rhs.abs());
        let status = if lhs <= rhs + slack { Status::Pass } else { Status::Fail };
        let witness = match (status, witness) {
            (Status::Fail, None) => Some("whole instance".to_string()),
            (_, w) => w,
        };
        self.map.insert(
            name,
            Verdict { name: name.into(), basis: Self::basis(name), status, lhs: Some(lhs), rhs: Some(rhs), witness, note: None },
        );
    }

    fn skip(&mut self, names: &[&'static str], note: &str) {
        for &name in names {
            self.map.entry(name).or_insert_with(|| Verdict {
                name: name.into(),
                basis: Self::basis(name),
                status: Status::NotApplicable,
                lhs: None,
                rhs: None,
                witness: None,
                note: Some(note.into()),
            });
        }
    }

    fn finish(mut self, note: &str) -> Vec<Verdict> {
        let all: Vec<&'static str> = VERDICTS.iter().map(|v| v.0).collect();
        self.skip(&all, note);
        VERDICTS.iter().map(|v| self.map.remove(v.0).expect("filled")).collect()
    }
}

const HARDY: [&str; 4] = ["hardy_a_le_c", "hardy_c_le_2a", "halfline_quarter_a_le_c", "halfline_c_le_2a"];
const DECOMPOSITION: [&str; 6] = [
    "stopping_half_mass",
    "stopping_carleson",
    "carleson_embedding_le_8",
    "split_identities",
    "size_q_le_12h_star",
    "holes_max_le_3q",
];

struct Run<'a> {
    cfg: &'a RunConfig,
    start: Instant,
    last: Instant,
    stages: Vec<(String, f64)>,
}

impl Run<'_> {
    fn over_budget(&self) -> bool {
        self.start.elapsed().as_secs_f64() > self.cfg.budget_seconds
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.stages.push((stage.to_string(), (now - self.last).as_secs_f64()));
        self.last = now;
    }
}

fn shared_atoms(sigma: &GridMeasure, w: &GridMeasure) -> usize {
    sigma.atoms().filter(|(k, _)| w.mass(*k) > 0.0).count()
}

/// Worst `sum_{ch(S)} w(S') / w(S)` with its node.
fn half_mass_witness(tree: &StoppingTree) -> (f64, Option<String>) {
    let mut best = (0.0, None);
    for n in &tree.nodes {
        let v = n.children.iter().fold(0.0, |s, &c| s + tree.nodes[c].w_mass) / n.w_mass;
        if v > best.0 || best.1.is_none() {
            best = (v, Some(format!("stopping interval {}", n.interval)));
        }
    }
    best
}

/// All constants, ratios and verdicts for one pair.
pub fn analyze(index: usize, label: &str, sigma: &GridMeasure, w: &GridMeasure, cfg: &RunConfig) -> (InstanceReport, Timing) {
    let now = Instant::now();
    let mut run = Run { cfg, start: now, last: now, stages: Vec::new() };
    let mut rep = InstanceReport {
        format_version: FORMAT_VERSION.into(),
        index,
        label: label.into(),
        scale_exponent: sigma.scale(),
        sigma_atoms: sigma.len(),
        w_atoms: w.len(),
        shared_atoms: shared_atoms(sigma, w),
        seed: cfg.seed,
        stream: FUNCTION_STREAM + index as u64,
        error: None,
        constants: Constants::default(),
        ratios: Ratios::default(),
        verdicts: Vec::new(),
    };
    let mut v = Verdicts::new(cfg.tolerance);
    if sigma.scale() != w.scale() {
        rep.error = Some(Error::ScaleMismatch(sigma.scale(), w.scale()).to_string());
        rep.verdicts = v.finish("input error");
    } else if sigma.is_empty() || w.is_empty() {
        let zero = Some(0.0);
        let k = &mut rep.constants;
        (k.c, k.h, k.h_star, k.h_glob, k.h_glob_star, k.h_off, k.h_off_star, k.weak) =
            (zero, zero, zero, zero, zero, zero, zero, zero);
        k.k_n = Some(vec![0.0; K_MAX as usize + 1]);
        (k.a2_star, k.a2_star_dual, k.a2, k.a2_lacey) = (zero, zero, zero, zero);
        rep.verdicts = v.finish("empty measure");
    } else {
        let form = HilbertForm::new(sigma.clone(), w.clone()).expect("nonempty measures at one scale");
        if let Err(e) = fill(&form, &mut rep, &mut v, &mut run) {
            rep.error = Some(e.to_string());
        }
        rep.verdicts = v.finish(if rep.error.is_some() { "input error" } else { "budget exceeded" });
    }
    run.lap("total-tail");
    let timing = Timing { index, label: label.into(), stages: run.stages };
    (rep, timing)
}

fn fill(form: &HilbertForm, rep: &mut InstanceReport, v: &mut Verdicts, run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let (sigma, w) = (form.sigma(), form.w());
    let k = &mut rep.constants;

    let c = form.operator_norm().value;
    k.c = Some(c);
    run.lap("norm");

    if run.over_budget() {
        return Ok(());
    }
    let tc = form.testing_constants(cfg.interval_mode);
    (k.h, k.h_star) = (Some(tc.h_local.value), Some(tc.h_local_dual.value));
    (k.h_glob, k.h_glob_star) = (Some(tc.h_glob.value), Some(tc.h_glob_dual.value));
    (k.h_off, k.h_off_star) = (Some(tc.h_off.value), Some(tc.h_off_dual.value));
    let weak = form.weak_boundedness();
    k.weak = Some(weak.value);
    v.check("h_le_h_glob", tc.h_local.value, tc.h_glob.value, interval_text(tc.h_local.interval));
    v.check("h_star_le_h_glob_star", tc.h_local_dual.value, tc.h_glob_dual.value, interval_text(tc.h_local_dual.interval));
    v.check("h_glob_le_c", tc.h_glob.value, c, interval_text(tc.h_glob.interval));
    v.check("h_glob_star_le_c", tc.h_glob_dual.value, c, interval_text(tc.h_glob_dual.interval));
    v.check("h_off_le_h_glob", tc.h_off.value, tc.h_glob.value, interval_text(tc.h_off.interval));
    v.check("h_off_star_le_h_glob_star", tc.h_off_dual.value, tc.h_glob_dual.value, interval_text(tc.h_off_dual.interval));
    v.check("weak_le_c", weak.value, c, weak.pair.map(|(i, j)| format!("I = {i}, J = {j}")));
    run.lap("testing");

    if run.over_budget() {
        return Ok(());
    }
    let kn = form.windowed_constants(K_MAX);
    let (worst_n, worst) = kn
        .iter()
        .enumerate()
        .map(|(n, x)| (n, x / 2f64.powi(n as i32 + 1)))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    v.check("k_n_le_2pow_weak", worst, weak.value, Some(format!("n = {worst_n}")));
    k.k_n = Some(kn);
    run.lap("windowed");

    if run.over_budget() {
        return Ok(());
    }
    let a2 = a2_constants(form);
    (k.a2_star, k.a2_star_dual) = (Some(a2.a2_star.value), Some(a2.a2_star_dual.value));
    (k.a2, k.a2_lacey) = (Some(a2.a2.value), Some(a2.a2_lacey.value));
    v.check("a2_star_le_2h_off", a2.a2_star.value, 2.0 * tc.h_off.value, interval_text(a2.a2_star.interval));
    v.check(
        "a2_star_dual_le_2h_off_star",
        a2.a2_star_dual.value,
        2.0 * tc.h_off_dual.value,
        interval_text(a2.a2_star_dual.interval),
    );
    v.check(
        "a2_le_three_halves_min_star",
        a2.a2.value,
        1.5 * a2.a2_star.value.min(a2.a2_star_dual.value),
        a2.a2.pair.map(|(i, j)| format!("I = {i}, J = {j}")),
    );
    run.lap("a2");

    let r = &mut rep.ratios;
    r.c_over_glob = ratio(k.c, Some(tc.h_glob.value + tc.h_glob_dual.value));
    r.c_over_deep = ratio(
        k.c,
        Some(tc.h_local.value + tc.h_local_dual.value + a2.a2_star.value + a2.a2_star_dual.value),
    );
    r.a2_star_over_h_off = ratio(k.a2_star, k.h_off);

    if run.over_budget() {
        return Ok(());
    }
    let half_line = form.hull().lo >= 0;
    if half_line {
        let a = hardy_constant(sigma, w)?;
        let hc = hardy_norm(sigma, w)?.value;
        let hl = halfline_characterization(sigma, w)?;
        (k.hardy_a, k.hardy_c, k.halfline_a, k.halfline_c) = (Some(a), Some(hc), Some(hl.a), Some(hl.c));
        v.check("hardy_a_le_c", a, hc, None);
        v.check("hardy_c_le_2a", hc, 2.0 * a, None);
        v.check("halfline_quarter_a_le_c", hl.a / 4.0, hl.c, None);
        v.check("halfline_c_le_2a", hl.c, 2.0 * hl.a, None);
        r.hardy_c_over_a = ratio(k.hardy_c, k.hardy_a);
        r.halfline_c_over_a = ratio(k.halfline_c, k.halfline_a);
    } else {
        v.skip(&HARDY, "support meets (-inf, 0]");
    }
    run.lap("hardy");

    if run.over_budget() {
        return Ok(());
    }
    let sys = ShiftedDyadicSystem::covering(form.scale(), form.hull(), cfg.gamma, cfg.r)?;
    if sys.depth > DECOMPOSITION_MAX_DEPTH {
        v.skip(&DECOMPOSITION, &format!("covering system depth {} exceeds {DECOMPOSITION_MAX_DEPTH}", sys.depth));
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rep.seed);
    rng.set_stream(rep.stream);
    let f = good_part(&random_function(&mut rng, sigma), sigma, &sys)?;
    let g = good_part(&random_function(&mut rng, w), w, &sys)?;
    let d = Decomposition::new(form, sys, &f, &g)?;
    let tree = d.tree();
    k.stopping_nodes = Some(tree.len());
    let fg = format!("seed {} stream {}", rep.seed, rep.stream);
    let (hm, hm_at) = half_mass_witness(tree);
    v.check("stopping_half_mass", hm, 0.5, hm_at);
    v.check("stopping_carleson", tree.carleson_ratio(w), 2.0, Some(format!("tree of g, {fg}")));
    let emb = carleson_embedding(tree, &g, w);
    v.check("carleson_embedding_le_8", emb.oracle, CARLESON_EMBEDDING_BOUND, Some(format!("tree of g, {fg}")));
    r.carleson_embedding = Some(emb.ratio);
    let (nf, ng) = (f.norm(sigma), g.norm(w));
    let split = d.split_identities(&g);
    v.check("split_identities", split.max_residual(), SPLIT_TOL * (c * nf * ng).max(1.0), Some(format!("f, g with {fg}")));
    let h_star = tc.h_local_dual.value;
    r.error_over_h_star = ratio(Some(split.errors.abs_total()), Some(h_star * nf * ng));
    run.lap("decomposition");

    if run.over_budget() {
        return Ok(());
    }
    let mut size = (0.0, None);
    for s in 0..tree.len() {
        let q = size_of_q(&admissible_q(tree, s), sigma, w);
        if q.value > size.0 {
            size = (q.value, q.witness.map(|i| format!("K = {i} under {}", tree.interval(s))));
        }
    }
    k.size_q = Some(size.0);
    v.check("size_q_le_12h_star", size.0, SIZE_FACTOR * h_star, size.1);
    r.size_q_over_h_star = ratio(k.size_q, Some(h_star));
    run.lap("size");

    if run.over_budget() {
        return Ok(());
    }
    let mut worst: Option<(f64, f64, String)> = None;
    let mut largest: Option<(f64, f64, f64, f64)> = None;
    let mut holes_ratio: Option<f64> = None;
    for kk in 0..=cfg.r {
        for u in 0..3u8 {
            let profile = energy_profile(tree, sigma, kk, u)?;
            if profile.is_empty() {
                continue;
            }
            let h = holes_testing(&profile, w);
            let q = holes_inequality_norm(&profile, w).value;
            let m = h.u.max(h.t).max(h.t_star);
            if worst.as_ref().is_none_or(|x| m - HOLES_FACTOR * q > x.0 - HOLES_FACTOR * x.1) {
                worst = Some((m, q, format!("energy profile k = {kk}, u = {u}, {fg}")));
            }
            if largest.is_none_or(|x| q > x.3) {
                largest = Some((h.u, h.t, h.t_star, q));
            }
            if let Some(x) = ratio(Some(q), Some(h.u + h.t + h.t_star)) {
                holes_ratio = Some(holes_ratio.map_or(x, |y: f64| y.max(x)));
            }
        }
    }
    match worst {
        Some((m, q, at)) => v.check("holes_max_le_3q", m, HOLES_FACTOR * q, Some(at)),
        None => v.skip(&["holes_max_le_3q"], "every energy profile is empty"),
    }
    if let Some((u, t, ts, q)) = largest {
        (k.holes_u, k.holes_t, k.holes_t_star, k.holes_q) = (Some(u), Some(t), Some(ts), Some(q));
    }
    r.holes_q_over_sum = holes_ratio;
    run.lap("holes");
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub pass: usize,
    pub fail: usize,
    pub not_applicable: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub median: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        Some(Stats { count: n, min: v[0], max: v[n - 1], median })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub format_version: String,
    pub config: RunConfig,
    pub ensemble: Option<EnsembleParams>,
    pub instances: usize,
    pub errors: usize,
    pub verdicts: BTreeMap<String, Tally>,
    pub ratios: BTreeMap<String, Option<Stats>>,
}

impl Summary {
    pub fn of(records: &[InstanceReport], config: &RunConfig, ensemble: Option<EnsembleParams>) -> Summary {
        let mut verdicts: BTreeMap<String, Tally> = VERDICTS.iter().map(|v| (v.0.to_string(), Tally::default())).collect();
        for rec in records {
            for v in &rec.verdicts {
                let t = verdicts.entry(v.name.clone()).or_default();
                match v.status {
                    Status::Pass => t.pass += 1,
                    Status::Fail => t.fail += 1,
                    Status::NotApplicable => t.not_applicable += 1,
                }
            }
        }
        let names = Ratios::default().entries().map(|e| e.0);
        let ratios = names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let vals: Vec<f64> = records.iter().filter_map(|r| r.ratios.entries()[i].1).filter(|x| x.is_finite()).collect();
                (name.to_string(), Stats::of(&vals))
            })
            .collect();
        Summary {
            format_version: FORMAT_VERSION.into(),
            config: *config,
            ensemble,
            instances: records.len(),
            errors: records.iter().filter(|r| r.error.is_some()).count(),
            verdicts,
            ratios,
        }
    }

    pub fn failures(&self) -> usize {
        self.verdicts.values().map(|t| t.fail).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub records: Vec<InstanceReport>,
    pub timings: Vec<Timing>,
    pub summary: Summary,
}

/// Analyse every instance in parallel and assemble the report in instance order.
pub fn run_report(instances: &[Instance], config: &RunConfig, ensemble: Option<EnsembleParams>) -> Report {
    let results: Vec<(InstanceReport, Timing)> = instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| analyze(i, &inst.label, &inst.sigma, &inst.w, config))
        .collect();
    let (records, timings): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let summary = Summary::of(&records, config, ensemble);
    Report { records, timings, summary }
}

const CONSTANT_COLUMNS: [&str; 22] = [
    "c",
    "h",
    "h_star",
    "h_glob",
    "h_glob_star",
    "h_off",
    "h_off_star",
    "weak",
    "a2_star",
    "a2_star_dual",
    "a2",
    "a2_lacey",
    "hardy_a",
    "hardy_c",
    "halfline_a",
    "halfline_c",
    "stopping_nodes",
    "size_q",
    "holes_u",
    "holes_t",
    "holes_t_star",
    "holes_q",
];

/// Column names of `report.csv`.
pub fn csv_header() -> Vec<String> {
    let mut h: Vec<String> =
        ["index", "label", "scale_exponent", "sigma_atoms", "w_atoms", "shared_atoms", "error"].map(String::from).to_vec();
    h.extend(CONSTANT_COLUMNS.iter().map(|s| s.to_string()));
    h.extend((0..=K_MAX).map(|n| format!("k_{n}")));
    h.extend(Ratios::default().entries().iter().map(|e| e.0.to_string()));
    h.extend(VERDICTS.iter().map(|v| v.0.to_string()));
    h
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_row(r: &InstanceReport) -> Vec<String> {
    let k = &r.constants;
    let mut row = vec![
        r.index.to_string(),
        r.label.clone(),
        r.scale_exponent.to_string(),
        r.sigma_atoms.to_string(),
        r.w_atoms.to_string(),
        r.shared_atoms.to_string(),
        r.error.clone().unwrap_or_default(),
    ];
    let consts = [
        k.c,
        k.h,
        k.h_star,
        k.h_glob,
        k.h_glob_star,
        k.h_off,
        k.h_off_star,
        k.weak,
        k.a2_star,
        k.a2_star_dual,
        k.a2,
        k.a2_lacey,
        k.hardy_a,
        k.hardy_c,
        k.halfline_a,
        k.halfline_c,
        k.stopping_nodes.map(|n| n as f64),
        k.size_q,
        k.holes_u,
        k.holes_t,
        k.holes_t_star,
        k.holes_q,
    ];
    row.extend(consts.iter().map(|x| cell(*x)));
    row.extend((0..=K_MAX as usize).map(|n| cell(k.k_n.as_ref().and_then(|v| v.get(n).copied()))));
    row.extend(r.ratios.entries().iter().map(|e| cell(e.1)));
    row.extend(r.verdicts.iter().map(|v| v.status.name().to_string()));
    row
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// The deterministic part of the report: `(file name, contents)`.
pub fn render(report: &Report) -> Result<Vec<(&'static str, String)>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::Io(e.to_string());
    wtr.write_record(csv_header()).map_err(to_err)?;
    for r in &report.records {
        wtr.write_record(csv_row(r)).map_err(to_err)?;
    }
    let table = String::from_utf8(wtr.into_inner().map_err(|e| Error::Io(e.to_string()))?).expect("utf-8");
    let mut lines = String::new();
    for r in &report.records {
        lines.push_str(&serde_json::to_string(r).map_err(|e| Error::Io(e.to_string()))?);
        lines.push('\n');
    }
    let mut summary = serde_json::to_string_pretty(&report.summary).map_err(|e| Error::Io(e.to_string()))?;
    summary.push('\n');
    Ok(vec![("report.csv", table), ("report.jsonl", lines), ("summary.json", summary)])
}

pub fn write_report(report: &Report, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for (name, text) in render(report)? {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    }
    let path = dir.join("timings.csv");
    let mut wtr = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
    wtr.write_record(["index", "label", "stage", "seconds"]).map_err(|e| io_err(&path, e))?;
    for t in &report.timings {
        for (stage, secs) in &t.stages {
            wtr.write_record([t.index.to_string(), t.label.clone(), stage.clone(), secs.to_string()])
                .map_err(|e| io_err(&path, e))?;
        }
    }
    wtr.flush().map_err(|e| io_err(&path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{ensemble, EnsembleKind};

    const TESTING: [&str; 7] = [
        "h_le_h_glob",
        "h_star_le_h_glob_star",
        "h_glob_le_c",
        "h_glob_star_le_c",
        "h_off_le_h_glob",
        "h_off_star_le_h_glob_star",
        "weak_le_c",
    ];
    const A2: [&str; 3] = ["a2_star_le_2h_off", "a2_star_dual_le_2h_off_star", "a2_le_three_halves_min_star"];

    fn two_cell() -> (GridMeasure, GridMeasure) {
        (GridMeasure::from_cells(0, [(0, 1.0)]).unwrap(), GridMeasure::from_cells(0, [(1, 1.0)]).unwrap())
    }

    #[test]
    fn two_cell_pair_passes() {
        let (s, w) = two_cell();
        let (rep, _) = analyze(0, "two-cell", &s, &w, &RunConfig::default());
        assert!(rep.error.is_none());
        assert!((rep.constants.c.unwrap() - 1.0).abs() < 1e-12);
        assert!((rep.constants.h_glob.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(rep.failures().count(), 0, "{:?}", rep.verdicts);
        for name in TESTING.iter().chain(A2.iter()).chain(HARDY.iter()) {
            assert_eq!(rep.verdict(name).unwrap().status, Status::Pass, "{name}");
        }
    }

    #[test]
    fn empty_pair_is_not_applicable() {
        let (rep, _) = analyze(0, "empty", &GridMeasure::zero(0), &GridMeasure::zero(0), &RunConfig::default());
        assert_eq!(rep.constants.c, Some(0.0));
        assert_eq!(rep.constants.a2_star, Some(0.0));
        assert!(rep.verdicts.iter().all(|v| v.status == Status::NotApplicable));
        assert_eq!(rep.verdicts.len(), VERDICTS.len());
    }

    #[test]
    fn budget_marks_not_applicable() {
        let (s, w) = two_cell();
        let cfg = RunConfig { budget_seconds: 1e-12, ..RunConfig::default() };
        let (rep, _) = analyze(0, "tiny budget", &s, &w, &cfg);
        assert!(rep.constants.c.is_some());
        assert_eq!(rep.verdict("h_glob_le_c").unwrap().status, Status::NotApplicable);
        assert_eq!(rep.verdict("h_glob_le_c").unwrap().note.as_deref(), Some("budget exceeded"));
    }

    #[test]
    fn failure_carries_a_witness() {
        let mut v = Verdicts::new(0.0);
        v.check("weak_le_c", 2.0, 1.0, None);
        let out = v.finish("x");
        assert_eq!(out[6].status, Status::Fail);
        assert!(out[6].witness.is_some());
    }

    #[test]
    fn rows_match_header_and_output_is_stable() {
        let params = EnsembleParams { kind: EnsembleKind::CommonMass, n: 6, count: 4, seed: 5 };
        let inst = ensemble(&params).unwrap();
        let cfg = RunConfig::default();
        let a = run_report(&inst, &cfg, Some(params));
        let b = run_report(&inst, &cfg, Some(params));
        for r in &a.records {
            assert_eq!(csv_row(r).len(), csv_header().len());
        }
        assert_eq!(render(&a).unwrap(), render(&b).unwrap());
        assert_eq!(a.summary.instances, 4);
        assert_eq!(a.summary.failures(), 0, "{:?}", a.summary.verdicts);
    }

    #[test]
    fn median_of_even_count() {
        let s = Stats::of(&[3.0, 1.0, 2.0, 10.0]).unwrap();
        assert_eq!((s.min, s.max, s.median), (1.0, 10.0, 2.5));
        assert!(Stats::of(&[]).is_none());
    }
}
