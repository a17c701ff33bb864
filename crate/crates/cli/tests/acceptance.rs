//! Acceptance suite: one PASS/FAIL line per criterion, with pinned limits.
//! Exits non-zero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde_json::Value;

use detflop::chamber::{chamber_bfs, ChamberError, PushforwardSet, TilingStatus};
use detflop::cone::{self, ConeRP, IMatrix};
use detflop::domain::{fundamental_domain, shear_toy_certificate};
use detflop::exactnum::{Gf, GfField, SeededRng};
use detflop::flop::{apply_flop, check_diagram, FlopMap, PointSource};
use detflop::picard::{calibrated_pushforward, degree_count_pullback, model_basis, OracleConfig, PushforwardMatrix};
use detflop::tensor::{determinant_form, random_instance, CoefficientTensor, Instance};
use detflop::varprobe::{enumerate_points, sample_point, smoothness_scan, MultiProjPoint, ProbeBudget};

struct Outcome {
    passed: bool,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { passed: true, lines: Vec::new() }
    }

    /// Records one sub-check.
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        self.passed &= ok;
        self.lines.push(format!("{} {}", if ok { "ok  " } else { "FAIL" }, what.into()));
    }

    fn note(&mut self, what: impl Into<String>) {
        self.lines.push(format!("info {}", what.into()));
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn load_instance(name: &str) -> Instance {
    Instance::from_json(&std::fs::read_to_string(fixtures().join(name)).expect("fixture")).expect("instance")
}

fn load_matrices(name: &str) -> Vec<PushforwardMatrix> {
    detflop_cli::load_fixtures(&fixtures().join(name)).expect("matrix fixtures")
}

fn cli(args: &[&str]) -> (i32, Vec<u8>, Vec<u8>) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["detflop"];
    argv.extend_from_slice(args);
    let code = detflop_cli::run(argv, &mut out, &mut err);
    (code, out, err)
}

fn point(field: GfField, pairs: &[(usize, [i64; 2])]) -> MultiProjPoint<Gf> {
    MultiProjPoint::new(pairs.iter().map(|(s, v)| (*s, v.iter().map(|&x| field.elem(x)).collect())).collect()).unwrap()
}

/// 1. Diagonal tensor, n = 1, N = 2: points over F_3 and the flop by hand.
fn criterion_1() -> Outcome {
    let mut o = Outcome::new();
    let f3 = GfField::finite(3, 1).unwrap();
    let t = CoefficientTensor::diagonal(1, 2).unwrap().lift::<Gf>(&f3);
    let a = point(f3, &[(1, [1, 0]), (2, [0, 1])]);
    let b = point(f3, &[(1, [0, 1]), (2, [1, 0])]);
    let e = enumerate_points(&t, 0, 1_000).unwrap();
    let found: BTreeSet<_> = e.points.iter().cloned().collect();
    o.check(
        found == BTreeSet::from([a.clone(), b.clone()]) && e.points.len() == 2 && e.scanned == 16,
        format!("X_0(F_3) = {{([1:0],[0:1]), ([0:1],[1:0])}}: {} points of {} scanned", e.points.len(), e.scanned),
    );
    let flop = FlopMap::new(2, 0, 1).unwrap();
    let image = apply_flop(&t, flop, &a);
    o.check(
        image.as_ref() == Ok(&point(f3, &[(0, [1, 0]), (2, [0, 1])])),
        format!("phi_01([1:0],[0:1]) = {:?} on X_1", image.as_ref().map(|q| q.indices())),
    );
    for p in [&a, &b] {
        let back = apply_flop(&t, flop, p).and_then(|q| apply_flop(&t, flop.reverse(), &q));
        o.check(back.as_ref() == Ok(p), format!("phi_10 . phi_01 fixes {:?}", p.indices()));
    }
    o
}

/// 2. Slice transposition and symmetry of the determinantal form.
fn criterion_2() -> Outcome {
    let mut o = Outcome::new();
    let shapes = [(1, 2), (1, 3), (1, 4), (2, 2), (2, 3), (2, 4)];
    let f101 = GfField::finite(101, 1).unwrap();
    let f5 = GfField::finite(5, 1).unwrap();
    let (mut slice_checks, mut slice_bad, mut form_pairs, mut form_bad, mut grid_points, mut grid_bad) = (0, 0, 0, 0, 0u64, 0);
    for k in 0..50u64 {
        let (n, big_n) = shapes[k as usize % shapes.len()];
        let inst = random_instance(n, big_n, 1000 + k, 9).unwrap();
        let t = inst.tensor.lift::<Gf>(&f101);
        let mut rng = SeededRng::derived(k, 2);
        for j in 0..=big_n {
            for i in (0..=big_n).filter(|&i| i != j) {
                for _ in 0..100 {
                    let coords: BTreeMap<usize, Vec<Gf>> = (0..=big_n)
                        .filter(|&s| s != j && s != i)
                        .map(|s| (s, (0..=n).map(|_| f101.elem(rng.below(101) as i64)).collect()))
                        .collect();
                    slice_checks += 1;
                    if t.slice_matrix(j, i, &coords).unwrap() != t.slice_matrix(i, j, &coords).unwrap().transpose() {
                        slice_bad += 1;
                    }
                }
                if j < i {
                    form_pairs += 1;
                    let (a, b) = (determinant_form(&inst, j, i).unwrap(), determinant_form(&inst, i, j).unwrap());
                    if a.form != b.form || a.ambient != b.ambient {
                        form_bad += 1;
                    }
                    if n == 1 {
                        // Every point of the affine grid F_5^2 per factor.
                        let per = affine_grid(f5, a.ambient.len());
                        for c in per {
                            grid_points += 1;
                            if a.form.eval::<Gf>(&f5, &c) != b.form.eval::<Gf>(&f5, &c) {
                                grid_bad += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    o.check(slice_bad == 0, format!("A_ji = A_ij^T at {slice_checks} coordinate choices over F_101 ({slice_bad} mismatches)"));
    o.check(form_bad == 0, format!("det form of {{j,i}} order-independent on {form_pairs} pairs ({form_bad} mismatches)"));
    o.check(grid_bad == 0 && grid_points > 0, format!("full-grid identity test over F_5 at n = 1: {grid_points} grid points ({grid_bad} mismatches)"));
    o
}

fn affine_grid(f: GfField, factors: usize) -> Vec<Vec<Vec<Gf>>> {
    let vectors: Vec<Vec<Gf>> = f.elements().flat_map(|x| f.elements().map(move |y| vec![x, y])).collect();
    let mut grid = vec![Vec::new()];
    for _ in 0..factors {
        grid = grid.into_iter().flat_map(|g: Vec<Vec<Gf>>| vectors.iter().map(move |v| [g.clone(), vec![v.clone()]].concat())).collect();
    }
    grid
}

/// 3. The flagship instance through `verify`.
fn criterion_3() -> Outcome {
    let mut o = Outcome::new();
    let inst = load_instance("flagship.json");
    o.check(inst.dim_x() == 3 && inst.model_count() == 6, format!("gen 1 5 42 9: dim X = {}, models = {}", inst.dim_x(), inst.model_count()));
    let path = fixtures().join("flagship.json");
    let (code, out, _) = cli(&["verify", path.to_str().unwrap()]);
    o.check(code == 0, format!("verify exit code {code}"));
    let report: Value = serde_json::from_slice(&out).expect("verify JSON");
    for s in report["smoothness"].as_array().unwrap() {
        let count = s["witness_count"].as_u64().unwrap();
        o.check(
            count == 0 && s["assumption"] == "7.3",
            format!(
                "X_{}: {} enumerated F_3-points, {count} Jacobian-singular{}",
                s["model"],
                s["tested"],
                s["witnesses"].as_array().unwrap().first().map(|w| format!(" (e.g. {w})")).unwrap_or_default()
            ),
        );
    }
    let diagrams = report["diagram"].as_array().unwrap();
    let min_tested = diagrams.iter().map(|d| d["tested"].as_u64().unwrap()).min().unwrap();
    let failures: usize = diagrams.iter().map(|d| d["failures"].as_array().unwrap().len()).sum();
    o.check(
        diagrams.len() == 30 && min_tested >= 100 && failures == 0 && diagrams.iter().all(|d| d["field"] == "GF(7)"),
        format!("{} ordered pairs over F_7, >= {min_tested} non-exceptional points each, {failures} failures", diagrams.len()),
    );
    let ranks = report["rank_locus"].as_array().unwrap();
    let missing: Vec<&Value> = ranks.iter().filter(|r| r["verdict"] != "exceptional-locus-nonempty").map(|r| &r["pair"]).collect();
    o.check(ranks.len() == 15 && missing.is_empty(), format!("exceptional witness for {}/15 pairs [7.5]", 15 - missing.len()));
    // Context for the smoothness result: the same scan at larger primes.
    let fields = detflop::varprobe::fields_of_orders(&[5, 7, 11]).unwrap();
    for f in fields {
        let singular: u64 = (0..=5)
            .map(|ell| smoothness_scan(&inst.tensor, ell, std::slice::from_ref(&f), &ProbeBudget::default()).unwrap().witness_count)
            .sum();
        o.note(format!("{f}: {singular} Jacobian-singular points over all six models"));
    }
    o
}

/// 4. Oracle on the N = 3 instance over {3, 5}.
fn criterion_4() -> Outcome {
    let mut o = Outcome::new();
    let inst = load_instance("n3_seed10.json");
    let big_n = inst.big_n();
    let cfg = OracleConfig { primes: vec![3, 5], tower_height: 3, ..OracleConfig::default() };
    let mut matrices = BTreeMap::new();
    for j in 0..=big_n {
        for i in (0..=big_n).filter(|&i| i != j) {
            let res = degree_count_pullback(&inst.tensor, i, j, &cfg);
            let m = calibrated_pushforward(&inst.tensor, j, i, &cfg);
            match (res, m) {
                (Ok(res), Ok(m)) => {
                    let classes: Vec<_> = res.per_prime.iter().map(|p| p.class.clone()).collect();
                    let agree = res.cross_checked && classes.len() == 2 && classes[0] == classes[1];
                    let col = model_basis(big_n, j).iter().position(|&k| k == i).unwrap();
                    let row = model_basis(big_n, i).iter().position(|&k| k == j).unwrap();
                    let forced = m.matrix[row][col];
                    o.check(
                        agree && forced == -1,
                        format!("{j} -> {i}: classes over GF(3), GF(5) = {classes:?}, exchanged coefficient {forced}"),
                    );
                    matrices.insert((j, i), m);
                }
                (r, m) => o.check(false, format!("{j} -> {i}: {:?} / {:?}", r.err(), m.err())),
            }
        }
    }
    let mut bad = Vec::new();
    for ((j, i), m) in &matrices {
        let back = &matrices[&(*i, *j)];
        let prod = cone::mat_mul(&back.as_imatrix(), &m.as_imatrix());
        if m.validate().is_err() || prod != cone::identity(big_n) || cone::det_i128(&m.as_imatrix()).abs() != 1 {
            bad.push((*j, *i));
        }
    }
    o.check(bad.is_empty() && matrices.len() == 12, format!("{} matrices unimodular, M_ij M_ji = 1, shared classes fixed; bad: {bad:?}", matrices.len()));
    o
}

/// 5. Tiling of the flagship movable cone.
fn criterion_5() -> Outcome {
    let mut o = Outcome::new();
    let matrices = load_matrices("flagship_matrices.json");
    let set = PushforwardSet::new(5, &matrices).unwrap();
    let cert = chamber_bfs(&set, 3).unwrap();
    o.check(cert.status == TilingStatus::Closed, format!("status {:?} at depth {}", cert.status, cert.explored_depth));
    o.check(cert.orbits.len() == 6, format!("orbit count {} (= 6 <= N+1 = 6)", cert.orbits.len()));
    let c = cert.chambers.len();
    let pairs = c * (c - 1) / 2;
    o.check(cert.fan_pairs_checked == pairs, format!("fan property on {}/{pairs} pairs of {c} chambers", cert.fan_pairs_checked));
    let walls_ok = matrices.iter().filter(|m| m.wall().map(|w| w.dimension() == 4).unwrap_or(false)).count();
    o.check(matrices.len() == 30 && walls_ok == 30, format!("shared facet of dimension N-1 = 4 for {walls_ok}/{} matrices", matrices.len()));
    o
}

/// 6. Fundamental domains: shear toy and flagship.
fn criterion_6() -> Outcome {
    let mut o = Outcome::new();
    let toy = shear_toy_certificate(6);
    let d = fundamental_domain(&toy, 6).unwrap();
    o.check(d.cone == toy.chambers[0].chamber, format!("toy: Pi = single chamber {:?}", d.cone.generators()));
    let shear: IMatrix = vec![vec![1, 0], vec![1, 1]];
    let inv = cone::inverse_unimodular(&shear).unwrap();
    let mut translates: Vec<ConeRP> = Vec::new();
    for k in -6i64..=6 {
        let step = if k >= 0 { &shear } else { &inv };
        let mut g = cone::identity(2);
        for _ in 0..k.unsigned_abs() {
            g = cone::mat_mul(step, &g);
        }
        translates.push(d.cone.transform(&g));
    }
    let overlaps = (0..translates.len())
        .flat_map(|a| (a + 1..translates.len()).map(move |b| (a, b)))
        .filter(|&(a, b)| translates[a].interiors_overlap(&translates[b]))
        .count();
    o.check(overlaps == 0, format!("toy: {} B_6-translates, {overlaps} overlapping pairs of {}", translates.len(), 13 * 12 / 2));
    let uncovered = toy.chambers.iter().filter(|c| !translates.contains(&c.chamber)).count();
    o.check(uncovered == 0, format!("toy: {} explored chambers covered, {uncovered} uncovered", toy.chambers.len()));
    o.check(d.all_passed(), format!("toy: {} ball certifications passed", d.certified.len()));
    let set = PushforwardSet::new(5, &load_matrices("flagship_matrices.json")).unwrap();
    let cert = chamber_bfs(&set, 3).unwrap();
    match fundamental_domain(&cert, 4) {
        Ok(d) => {
            for c in &d.certified {
                o.check(c.passed, format!("flagship R = 4: {}", c.name));
            }
            o.note(format!("flagship: ball B_4 has {} elements, {} Dirichlet cuts, Pi has {} rays", d.ball_size, d.cuts, d.cone.generators().len()));
        }
        Err(e @ ChamberError::StabilizerObstruction { .. }) => o.check(true, format!("flagship: stabilizer obstruction reported: {e}")),
        Err(e) => o.check(false, format!("flagship: {e}")),
    }
    o
}

/// 7. Corrupted tensor entries and matrix entries are detected.
fn criterion_7() -> Outcome {
    let mut o = Outcome::new();
    let inst = load_instance("flagship.json");
    let f7 = GfField::finite(7, 1).unwrap();
    let mut rng = SeededRng::new(7);
    let points: Vec<_> = (0..20).map(|_| sample_point(&inst.tensor, 0, f7, &mut rng, 64).unwrap().point).collect();
    let multi = vec![0; inst.tensor.slots()];
    let corrupted = inst.tensor.with_entry(&multi, inst.tensor.get(&multi) + 1);
    let flop = FlopMap::new(5, 0, 1).unwrap();
    let clean = check_diagram(&inst.tensor, f7, flop, PointSource::Points(points.clone())).unwrap();
    let dirty = check_diagram(&corrupted, f7, flop, PointSource::Points(points)).unwrap();
    o.check(clean.passed(), format!("clean tensor: {} failures on {} points", clean.failures.len(), clean.tested));
    o.check(!dirty.passed(), format!("one tensor entry +1: {} diagram failures", dirty.failures.len()));
    let mut matrices = load_matrices("flagship_matrices.json");
    matrices[0].matrix[1][0] += 1;
    let err = PushforwardSet::new(5, &matrices).and_then(|s| chamber_bfs(&s, 3).map(|_| ()));
    o.check(
        matches!(err, Err(ChamberError::InconsistentFan(_))),
        format!("one matrix entry +1: {}", err.err().map(|e| e.to_string()).unwrap_or_else(|| "accepted".into())),
    );
    o
}

/// 8. `gen`, `verify` and `cone` are byte-for-byte reproducible.
fn criterion_8() -> Outcome {
    let mut o = Outcome::new();
    let tmp = tempfile::tempdir().unwrap();
    let run_all = |tag: &str| -> Vec<(String, Vec<u8>)> {
        let dir = tmp.path().join(tag);
        let inst = dir.join("inst.json");
        let s = |p: &Path| p.to_str().unwrap().to_string();
        let fixtures = fixtures().join("flagship_matrices.json");
        let runs: Vec<Vec<String>> = vec![
            vec!["gen".into(), "1".into(), "5".into(), "42".into(), "9".into(), "--out".into(), s(&inst)],
            vec!["verify".into(), s(&inst), "--out".into(), s(&dir.join("verify.json"))],
            vec!["cone".into(), s(&inst), "--fixtures".into(), s(&fixtures), "--out".into(), s(&dir.join("cone"))],
        ];
        let mut outputs = Vec::new();
        for args in runs {
            let (code, out, _) = cli(&args.iter().map(String::as_str).collect::<Vec<_>>());
            outputs.push((format!("{} exit/stdout", args[0]), [vec![code as u8], out].concat()));
        }
        for f in ["inst.json", "verify.json", "cone/certificate.json", "cone/domain.json", "cone/matrices.json"] {
            outputs.push((f.to_string(), std::fs::read(dir.join(f)).unwrap_or_default()));
        }
        outputs
    };
    let first = run_all("a");
    let second = run_all("b");
    let flagship = std::fs::read(fixtures().join("flagship.json")).unwrap();
    o.check(first[3].1 == flagship, "gen output equals the committed flagship fixture");
    for ((name, a), (_, b)) in first.iter().zip(&second) {
        o.check(a == b && !a.is_empty(), format!("{name}: {} bytes, identical", a.len()));
    }
    o
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 8] = [
        ("diagonal fixture", criterion_1, Duration::from_secs(1)),
        ("transpose duality", criterion_2, Duration::from_secs(30)),
        ("flagship verification", criterion_3, Duration::from_secs(300)),
        ("oracle calibration", criterion_4, Duration::from_secs(120)),
        ("tiling", criterion_5, Duration::from_secs(120)),
        ("fundamental domain", criterion_6, Duration::from_secs(120)),
        ("mutation sensitivity", criterion_7, Duration::from_secs(60)),
        ("determinism", criterion_8, Duration::from_secs(60)),
    ];
    let mut failed = Vec::new();
    for (k, (name, f, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *limit;
        let pass = outcome.passed && in_time;
        println!(
            "[{}] criterion {}: {name} ({:.2} s, limit {} s{})",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", exceeded" }
        );
        for line in &outcome.lines {
            println!("    {line}");
        }
        if !pass {
            failed.push(k + 1);
        }
    }
    println!("acceptance: {}/8 criteria passed; failed: {failed:?}", 8 - failed.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
