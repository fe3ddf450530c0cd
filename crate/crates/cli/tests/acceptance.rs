//! Acceptance suite: one line per criterion. The oracles here are computed
//! from scratch (dense inverses, closed forms), not taken from the library.
//!
//! `ACCEPTANCE_ONLY=2,9` runs a subset. Failures are reported on stdout;
//! with `ACCEPTANCE_STRICT=1` any failure also fails the process.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use sclqg_core::cascade::{cascade_statistics, run_cascade, CascadeConfig, OffspringLaw, SignMode};
use sclqg_core::disk::{rotate_field_vector, DiskConfig, LiouvilleSampler};
use sclqg_core::gff::{BoundaryCondition, GffSampler};
use sclqg_core::lattice::LatticeDomain;
use sclqg_core::loops::{
    markov_report, nonindependence_report, recover_signs, CouplingConfig, CouplingSampler,
    LoopSource, MarkovConfig, MarkovExperiment, NonIndependenceConfig, NonIndependenceExperiment,
};
use sclqg_core::maps::{
    enumerate_decorated_maps, gasket_decompose, reassemble, survival_experiment, EnumerationCaps,
    RingAnchor, RingMode, StructuralSampler, SurvivalConfig, WeightTable,
};
use sclqg_core::params::{kappa_central_charge, ParamSet};
use sclqg_core::rng::Streams;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn q_of(c: f64) -> f64 {
    ((c - 1.0) / 6.0).sqrt()
}

/// pi sqrt(4 - Q^2) / Q.
fn gap(c: f64) -> f64 {
    let q = q_of(c);
    PI * (4.0 - q * q).sqrt() / q
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 1..=1000 {
        let c = 1.0 + 24.0 * i as f64 / 1001.0;
        let p = ParamSet::from_central_charge(c).unwrap();
        let q = q_of(c);
        worst = worst.max(((p.c_l() + p.dual_c()) - 26.0).abs() / 26.0);
        worst = worst.max((1.0 + 6.0 * p.q() * p.q() - c).abs() / c);
        worst = worst.max((p.q() - q).abs() / q);
        worst = worst.max((p.s().unwrap().ln() - gap(c)).abs() / gap(c));
    }
    let c4 = kappa_central_charge(4.0).unwrap();
    outcome(
        worst <= 1e-12 && c4 == 1.0,
        format!("max relative error {worst:.2e}, c(kappa=4) = {c4}"),
    )
}

/// The lattice of a disk grid rebuilt from vertex positions: neighbors at
/// distance h, boundary where a lattice neighbor leaves the closed disk.
struct Lattice {
    neighbors: Vec<Vec<usize>>,
    boundary: Vec<bool>,
}

fn rebuild(d: &LatticeDomain) -> Lattice {
    let h = d.h();
    let key = |p: [f64; 2]| ((p[0] / h).round() as i64, (p[1] / h).round() as i64);
    let index: HashMap<(i64, i64), usize> = (0..d.len()).map(|v| (key(d.position(v)), v)).collect();
    let mut neighbors = vec![Vec::new(); d.len()];
    let mut boundary = vec![false; d.len()];
    for v in 0..d.len() {
        let (i, j) = key(d.position(v));
        for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (x, y) = ((i + di) as f64 * h, (j + dj) as f64 * h);
            if x * x + y * y > 1.0 + 1e-9 {
                boundary[v] = true;
            }
            if let Some(&u) = index.get(&(i + di, j + dj)) {
                neighbors[v].push(u);
            }
        }
    }
    Lattice {
        neighbors,
        boundary,
    }
}

/// 2 pi times the inverse Laplacian on interior vertices (zero boundary), or
/// the pseudo-inverse on the whole graph (free boundary).
fn green_oracle(l: &Lattice, free: bool) -> DMatrix<f64> {
    let n = l.neighbors.len();
    let mut lap = DMatrix::<f64>::zeros(n, n);
    for v in 0..n {
        for &u in &l.neighbors[v] {
            lap[(v, u)] -= 1.0;
            lap[(v, v)] += 1.0;
        }
    }
    if free {
        let pinv = lap.pseudo_inverse(1e-9).unwrap();
        return pinv * (2.0 * PI);
    }
    let inner: Vec<usize> = (0..n).filter(|&v| !l.boundary[v]).collect();
    let a = DMatrix::from_fn(inner.len(), inner.len(), |r, c| lap[(inner[r], inner[c])]);
    let inv = a.try_inverse().unwrap();
    let mut g = DMatrix::<f64>::zeros(n, n);
    for (r, &u) in inner.iter().enumerate() {
        for (c, &v) in inner.iter().enumerate() {
            g[(u, v)] = 2.0 * PI * inv[(r, c)];
        }
    }
    g
}

/// Largest |empirical - oracle| / SE over all covariance entries, where the
/// Gaussian SE of entry (i, j) is sqrt((g_ii g_jj + g_ij^2) / N).
fn covariance_z(samples: &[Vec<f64>], g: &DMatrix<f64>) -> f64 {
    let n = g.nrows();
    let m = samples.len() as f64;
    let x = DMatrix::from_fn(samples.len(), n, |r, c| samples[r][c]);
    let emp = x.transpose() * &x / m;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let se = ((g[(i, i)] * g[(j, j)] + g[(i, j)].powi(2)) / m).sqrt();
            if se > 0.0 {
                worst = worst.max((emp[(i, j)] - g[(i, j)]).abs() / se);
            } else if emp[(i, j)].abs() > 1e-12 {
                worst = f64::INFINITY;
            }
        }
    }
    worst
}

fn criterion_2() -> Outcome {
    let d = Arc::new(LatticeDomain::disk_grid(17).unwrap());
    let l = rebuild(&d);
    let boundary_matches = (0..d.len()).all(|v| d.is_boundary(v) == l.boundary[v]);
    let mut parts = Vec::new();
    let mut pass = boundary_matches;
    for (name, bc, free) in [
        ("zero", BoundaryCondition::Zero, false),
        ("free", BoundaryCondition::Free, true),
    ] {
        let s = GffSampler::new(d.clone(), bc).unwrap();
        let mut rng = Streams::new(20).stream(name);
        // The free field has mean zero, so its covariance is centered.
        let samples: Vec<Vec<f64>> = (0..10_000).map(|_| s.sample(&mut rng).values).collect();
        let z = covariance_z(&samples, &green_oracle(&l, free));
        pass &= z < 5.0;
        parts.push(format!("{name}: max |z| {z:.2}"));
    }
    outcome(pass, format!("{} vertices, {}", d.len(), parts.join(", ")))
}

fn haar(n: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    (0..n)
        .map(|i| (0..n).map(|j| q[(i, j)] * r[(j, j)].signum()).collect())
        .collect()
}

fn criterion_3() -> Outcome {
    let d = Arc::new(LatticeDomain::disk_grid(9).unwrap());
    let ls = LiouvilleSampler::new(d.clone()).unwrap();
    let mut rng = Streams::new(30).stream("matrices");
    let mut worst: f64 = 0.0;
    for dim in [2, 3] {
        for _ in 0..100 {
            let q: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..2.0)).collect();
            let a = haar(dim, &mut rng);
            let fields: Vec<_> = q
                .iter()
                .map(|&qi| ls.sample(qi, (-1.0, 1.0), &mut rng).unwrap())
                .collect();
            let r = rotate_field_vector(&fields, &a).unwrap();
            let before: f64 = q.iter().map(|x| 1.0 + 6.0 * x * x).sum();
            worst = worst.max((r.central_charges.iter().sum::<f64>() - before).abs());
        }
    }
    // A fixed rotation with nonnegative rotated charges, 10^4 pairs.
    let (q1, q2) = (1.2, 0.9);
    let t: f64 = 0.6;
    let a = vec![vec![t.cos(), t.sin()], vec![-t.sin(), t.cos()]];
    let n_samples = 10_000;
    let mut srng = Streams::new(31).stream("fields");
    let probes: Vec<usize> = vec![
        d.nearest_vertex(Complex64::new(0.0, 0.0)),
        d.nearest_vertex(Complex64::new(0.5, 0.25)),
    ];
    let (mut rot1, mut rot2, mut fresh) = (Vec::new(), Vec::new(), Vec::new());
    let mut mean_dev: f64 = 0.0;
    let mut mean_acc = vec![0.0; d.len()];
    let mut q_hat = 0.0;
    for _ in 0..n_samples {
        let f = [
            ls.sample(q1, (-1.0, 1.0), &mut srng).unwrap(),
            ls.sample(q2, (-1.0, 1.0), &mut srng).unwrap(),
        ];
        let r = rotate_field_vector(&f, &a).unwrap();
        q_hat = r.charges[0];
        let g1 = &r.fields[0].liouville.as_ref().unwrap().gff.values;
        let g2 = &r.fields[1].liouville.as_ref().unwrap().gff.values;
        rot1.push(probes.iter().map(|&v| g1[v]).collect::<Vec<_>>());
        rot2.push(probes.iter().map(|&v| g2[v]).collect::<Vec<_>>());
        let c = r.fields[0].liouville.as_ref().unwrap().constant;
        for (acc, v) in mean_acc.iter_mut().zip(&r.fields[0].field.values) {
            *acc += v - c;
        }
        let fr = ls.sample(q1, (-1.0, 1.0), &mut srng).unwrap();
        let gf = &fr.liouville.as_ref().unwrap().gff.values;
        fresh.push(probes.iter().map(|&v| gf[v]).collect::<Vec<_>>());
    }
    // Cross-covariances of the two rotated GFF parts vanish; the marginal
    // covariance of a rotated part equals that of a fresh free GFF.
    let m = n_samples as f64;
    let cov = |x: &[Vec<f64>], y: &[Vec<f64>], i: usize, j: usize| -> (f64, f64) {
        let (mx, my) = (
            x.iter().map(|r| r[i]).sum::<f64>() / m,
            y.iter().map(|r| r[j]).sum::<f64>() / m,
        );
        let prods: Vec<f64> = x
            .iter()
            .zip(y)
            .map(|(a, b)| (a[i] - mx) * (b[j] - my))
            .collect();
        let mean = prods.iter().sum::<f64>() / m;
        let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (m - 1.0);
        (mean, (var / m).sqrt())
    };
    let mut z: f64 = 0.0;
    for i in 0..probes.len() {
        for j in 0..probes.len() {
            let (c12, se12) = cov(&rot1, &rot2, i, j);
            z = z.max(c12.abs() / se12);
            let (c11, se11) = cov(&rot1, &rot1, i, j);
            let (cff, seff) = cov(&fresh, &fresh, i, j);
            z = z.max((c11 - cff).abs() / (se11 * se11 + seff * seff).sqrt());
        }
    }
    // The mean of the rotated field minus its constant is -2 Q_hat log max(|z|, 1).
    let h = d.h();
    for (v, acc) in mean_acc.iter().enumerate() {
        let w = d.point(v);
        if (w - Complex64::new(1.0, 0.0)).norm() < 3.0 * h {
            continue;
        }
        let zh = Complex64::i() * (1.0 + w) / (1.0 - w);
        let want = -2.0 * q_hat * zh.norm().max(1.0).ln();
        let got = acc / m;
        let se = (fresh_var(&ls, v) / m).sqrt();
        mean_dev = mean_dev.max((got - want).abs() / se);
    }
    z = z.max(mean_dev);
    outcome(
        worst <= 1e-10 && z < 5.0,
        format!("200 matrices: max |sum c_hat - sum c| {worst:.1e}; max |z| of covariance and mean checks {z:.2}"),
    )
}

/// Variance of a fresh free GFF part at vertex v, from 2000 samples.
fn fresh_var(ls: &LiouvilleSampler, v: usize) -> f64 {
    thread_local! {
        static CACHE: std::cell::RefCell<Option<Vec<Vec<f64>>>> = const { std::cell::RefCell::new(None) };
    }
    CACHE.with(|c| {
        let mut c = c.borrow_mut();
        let samples = c.get_or_insert_with(|| {
            let mut rng = Streams::new(32).stream("variance");
            (0..2000)
                .map(|_| {
                    ls.sample(0.0, (0.0, 1.0), &mut rng)
                        .unwrap()
                        .liouville
                        .unwrap()
                        .gff
                        .values
                })
                .collect()
        });
        let m = samples.len() as f64;
        let mean = samples.iter().map(|s| s[v]).sum::<f64>() / m;
        samples.iter().map(|s| (s[v] - mean).powi(2)).sum::<f64>() / (m - 1.0)
    })
}

fn coupling(c: f64, source: LoopSource, depth: usize) -> CouplingSampler {
    let n = 65;
    let disk = DiskConfig {
        epsilon: 4.0 / (n - 1) as f64,
        ..DiskConfig::for_disk(n)
    };
    CouplingSampler::new(
        ParamSet::from_central_charge(c).unwrap(),
        CouplingConfig {
            disk,
            depth,
            source,
        },
    )
    .unwrap()
}

fn criterion_4() -> Outcome {
    let (mut loops, mut bad, mut worst) = (0usize, 0usize, 0.0f64);
    for c in [7.0, 13.0, 19.0] {
        let want = gap(c);
        let s = coupling(c, LoopSource::nested_circles(3), 3);
        let streams = Streams::new(40);
        for i in 0..100 {
            let cd = s.sample(1.0, &streams.child(&format!("c{c}"), i)).unwrap();
            for n in &cd.tree.nodes {
                let r = n.inner_length / n.outer_length;
                let e = (r / (f64::from(n.sign) * want).exp() - 1.0).abs();
                worst = worst.max(e);
                loops += 1;
                bad += usize::from(e > 1e-9);
            }
        }
    }
    let e_pi = (gap(13.0) - PI).abs();
    outcome(
        loops > 0 && bad == 0 && e_pi < 1e-12,
        format!(
            "{loops} loops, {bad} off, max relative error {worst:.1e}; |gap(13) - pi| = {e_pi:.1e}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let s = coupling(13.0, LoopSource::RandomCircles { max_children: 3 }, 3);
    let streams = Streams::new(50);
    let (mut total, mut right) = (0usize, 0usize);
    for i in 0..100 {
        let cd = s.sample(1.0, &streams.child("run", i)).unwrap();
        let got = recover_signs(&cd).unwrap();
        total += cd.tree.len();
        right += got
            .iter()
            .zip(&cd.tree.nodes)
            .filter(|(g, n)| **g == n.sign)
            .count();
    }
    outcome(
        total > 0 && right == total,
        format!("{right}/{total} signs recovered"),
    )
}

fn criterion_6() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (c, target) in [(13.0, q_of(13.0).powi(2) / 4.0), (25.0, 1.0)] {
        let p = ParamSet::from_central_charge(c).unwrap();
        let config = NonIndependenceConfig {
            disk: DiskConfig::for_disk(129),
            ..NonIndependenceConfig::default()
        };
        let distances = config.distances.clone();
        let smallest = distances.iter().copied().fold(f64::INFINITY, f64::min);
        let exp = NonIndependenceExperiment::new(p, config).unwrap();
        let streams = Streams::new(60).child(&format!("c{c}"), 0);
        let samples: Vec<_> = (0..1000)
            .map(|i| exp.run(&streams.child("run", i)).unwrap())
            .collect();
        let r = nonindependence_report(p, &distances, &samples).unwrap();
        let at = r.scales.iter().find(|s| s.distance == smallest).unwrap();
        let ratio = at.normalized / target;
        pass &= (ratio - 1.0).abs() <= 0.25 && smallest == 2f64.powi(-6);
        parts.push(format!(
            "c_l {c}: {:.4} vs target {target:.4} (ratio {ratio:.3})",
            at.normalized
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_7() -> Outcome {
    let exp = MarkovExperiment::new(ParamSet::critical(), MarkovConfig::default()).unwrap();
    let streams = Streams::new(70);
    let samples: Vec<_> = (0..1000)
        .map(|i| exp.run(&streams.child("run", i)).unwrap())
        .collect();
    let r = markov_report(&samples).unwrap();
    // Same pipeline with both sides fresh: checks that the comparison itself
    // is calibrated, independently of the loop.
    let null: Vec<_> = (0..1000)
        .map(|i| exp.run_null(&streams.child("null", i)).unwrap())
        .collect();
    let n = markov_report(&null).unwrap();
    let fmt = |r: &sclqg_core::loops::MarkovReport| {
        r.statistics
            .iter()
            .map(|s| format!("{:.3}", s.p_value))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let cps: Vec<String> = r
        .statistics
        .iter()
        .map(|s| format!("{:.1e}", s.control_p_value))
        .collect();
    outcome(
        r.passing >= 4 && r.control_detects,
        format!(
            "restricted vs fresh p = [{}] ({}/5 > 0.01); control p = [{}]; fresh vs fresh p = [{}] ({}/5 > 0.01)",
            fmt(&r),
            r.passing,
            cps.join(", "),
            fmt(&n),
            n.passing
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for c in [7.0, 13.0] {
        let a = gap(c);
        let p = ParamSet::from_central_charge(c).unwrap();
        let config = CascadeConfig {
            law: OffspringLaw::identity(),
            max_gen: 6,
            signs: SignMode::Fair,
            ..CascadeConfig::default()
        };
        let streams = Streams::new(80).child(&format!("c{c}"), 0);
        let runs: Vec<_> = (0..10_000)
            .map(|i| run_cascade(1.0, p, &config, &streams.child("run", i)).unwrap())
            .collect();
        let mut node_err: f64 = 0.0;
        let mut sums_ok = true;
        for r in &runs {
            for n in &r.nodes {
                let want = (a * n.sign_sum as f64).exp() * n.critical_length;
                node_err = node_err.max((n.inner_length - want).abs() / want);
                let parent_sum = n.parent.map_or(0, |q| r.nodes[q].sign_sum);
                sums_ok &= n.sign_sum == parent_sum + i64::from(n.sign);
            }
        }
        let report = cascade_statistics(&runs, false).unwrap();
        let mut worst_z: f64 = 0.0;
        for g in report.generations.iter().filter(|g| g.generation <= 6) {
            let want = a.cosh().powi(g.generation as i32);
            let z = if g.total_length_se > 0.0 {
                (g.total_length - want).abs() / g.total_length_se
            } else {
                0.0
            };
            let exact_at_zero = g.generation > 0 || (g.total_length - 1.0).abs() < 1e-12;
            pass &= exact_at_zero;
            worst_z = worst_z.max(z);
        }
        pass &= worst_z < 3.0 && node_err <= 1e-12 && sums_ok && report.generations.len() == 7;
        parts.push(format!(
            "c_l {c}: max |z| {worst_z:.2}, node identity {node_err:.1e}"
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_9() -> Outcome {
    let (k, f, beta) = (3, 8, 1.5);
    let e = enumerate_decorated_maps(k, f, beta, &EnumerationCaps::default()).unwrap();
    let t1 = WeightTable::new(1, k + f).unwrap();
    let t2 = WeightTable::new(2, k + f).unwrap();
    let agree = e.weighted_counts(1) == t1.counts(k, f).unwrap()
        && e.weighted_counts(2) == t2.counts(k, f).unwrap();
    let mut rt_fail = 0usize;
    for m in &e.maps {
        let ok = gasket_decompose(&m.map)
            .and_then(|d| reassemble(&d.gasket, &d.fillings))
            .is_ok_and(|back| back.validate().is_ok() && back.canonical_code() == m.code);
        rt_fail += usize::from(!ok);
    }
    // Boltzmann law computed here from the enumerated maps.
    let w: Vec<f64> = e
        .maps
        .iter()
        .map(|m| (-beta * m.triangles as f64).exp() * 2f64.powi(m.loops as i32))
        .collect();
    let z: f64 = w.iter().sum();
    let sampler = StructuralSampler::new(k, f, beta, RingMode::Original).unwrap();
    let mut rng = Streams::new(90).stream("maps");
    let n = 100_000;
    let mut hits = vec![0usize; e.len()];
    let mut outside = 0usize;
    for _ in 0..n {
        let s = sampler.sample(&mut rng).unwrap();
        match e.index_of(&s.map.canonical_code()) {
            Some(i) => hits[i] += 1,
            None => outside += 1,
        }
    }
    let tv = 0.5
        * hits
            .iter()
            .zip(&w)
            .map(|(&h, &wi)| (h as f64 / n as f64 - wi / z).abs())
            .sum::<f64>()
        + 0.5 * outside as f64 / n as f64;
    outcome(
        tv < 0.05 && rt_fail == 0 && agree && e.duplicates == 0,
        format!(
            "{} maps, TV {tv:.4}, {outside} outside, round-trip failures {rt_fail}, enumerators agree {agree}",
            e.len()
        ),
    )
}

fn criterion_10() -> Outcome {
    let (k, f, beta) = (2, 4, 1.5);
    let n = 100_000;
    let e = enumerate_decorated_maps(k, f, beta, &EnumerationCaps::default()).unwrap();
    let law = |mode: RingMode, name: &str| -> Vec<f64> {
        let s = StructuralSampler::new(k, f, beta, mode).unwrap();
        let mut rng = Streams::new(100).stream(name);
        let mut c = vec![0.0; e.len() + 1];
        for _ in 0..n {
            let m = s.sample(&mut rng).unwrap().map;
            c[e.index_of(&m.canonical_code()).unwrap_or(e.len())] += 1.0 / n as f64;
        }
        c
    };
    let orig = law(RingMode::Original, "original");
    let modi = law(
        RingMode::Modified {
            s: 1.0,
            anchor: RingAnchor::CriticalInner,
        },
        "modified",
    );
    let tv = 0.5
        * orig
            .iter()
            .zip(&modi)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
    let report = survival_experiment(&SurvivalConfig::default(), &Streams::new(101)).unwrap();
    let frac = report.s_monotone_fraction;
    outcome(
        tv < 0.02 && frac >= 0.8,
        format!("TV(modified s=1, original) {tv:.4} over {} maps; survival nondecreasing in s on {:.0}% of pairs", e.len(), 100.0 * frac),
    )
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    type Check = (usize, &'static str, fn() -> Outcome);
    let checks: [Check; 10] = [
        (1, "parameter algebra", criterion_1),
        (2, "GFF covariance", criterion_2),
        (3, "rotation of Liouville fields", criterion_3),
        (4, "length gap", criterion_4),
        (5, "sign recovery", criterion_5),
        (6, "non-independence statistic", criterion_6),
        (7, "Markov property", criterion_7),
        (8, "cascade closed form", criterion_8),
        (9, "planar-map oracle", criterion_9),
        (10, "modified ring step", criterion_10),
    ];
    let (mut ran, mut failed) = (0, 0);
    for (i, name, check) in checks {
        if only.as_ref().is_some_and(|o| !o.contains(&i)) {
            continue;
        }
        let t = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {i:>2} {verdict} [{name}] {} ({:.1} s)",
            o.detail,
            t.elapsed().as_secs_f64()
        );
        ran += 1;
        failed += usize::from(!o.pass);
    }
    println!("{} of {ran} criteria pass", ran - failed);
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
