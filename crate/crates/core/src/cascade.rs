//! The multiplicative cascade of inner boundary lengths of nested loops.
//!
//! Critical lengths branch by an offspring law applied at length 1 and
//! scaled; each loop carries a fair sign and its inner length is the
//! critical length times exp(k pi S) with S the running sign sum and
//! k = sqrt(4-Q^2)/Q.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};

use crate::error::{bail, Result};
#[allow(unused_imports)]
use crate::float::*;
use crate::params::ParamSet;
use crate::rng::Streams;
use crate::stats::mean_se;

/// Default node cap per run.
pub const DEFAULT_NODE_CAP: usize = 10_000_000;

/// Critical offspring laws. Each samples the children's lengths of a parent
/// of length 1; lengths for other parents are scaled.
#[derive(Debug, Clone, PartialEq)]
pub enum OffspringLaw {
    /// `parts` children sharing `fraction` of the parent's length with
    /// symmetric Dirichlet(`concentration`) proportions. One part with
    /// fraction 1 is the identity law.
    DirichletSplit {
        parts: usize,
        concentration: f64,
        fraction: f64,
    },
    /// Proxy from the jumps of an `alpha`-stable subordinator series: jumps
    /// scale * Gamma_i^{-1/alpha} above `jump_threshold`, rescaled to total
    /// at most 1. Not the exact conditioned law.
    StableProxy {
        alpha: f64,
        scale: f64,
        jump_threshold: f64,
    },
    /// Rows of child-to-parent length ratios, drawn uniformly.
    Empirical { table: Vec<Vec<f64>> },
}

impl OffspringLaw {
    pub fn identity() -> Self {
        OffspringLaw::DirichletSplit {
            parts: 1,
            concentration: 1.0,
            fraction: 1.0,
        }
    }

    pub fn stable_default() -> Self {
        OffspringLaw::StableProxy {
            alpha: 1.5,
            scale: 0.5,
            jump_threshold: 0.1,
        }
    }

    /// Whether the law is one of the proxies for the unknown critical law.
    pub fn is_proxy(&self) -> bool {
        !matches!(self, OffspringLaw::DirichletSplit { parts: 1, fraction, .. } if *fraction == 1.0)
    }

    pub fn name(&self) -> &'static str {
        match self {
            OffspringLaw::DirichletSplit {
                parts: 1, fraction, ..
            } if *fraction == 1.0 => "identity",
            OffspringLaw::DirichletSplit { .. } => "dirichlet",
            OffspringLaw::StableProxy { .. } => "stable_proxy",
            OffspringLaw::Empirical { .. } => "empirical",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OffspringLaw::DirichletSplit {
                parts,
                concentration,
                fraction,
            } => {
                if *parts == 0 || !(*concentration > 0.0) || !(*fraction > 0.0 && *fraction <= 1.0)
                {
                    bail!(
                        InvalidArgument,
                        "Dirichlet split needs parts >= 1, concentration > 0, fraction in (0, 1]"
                    );
                }
            }
            OffspringLaw::StableProxy {
                alpha,
                scale,
                jump_threshold,
            } => {
                if !(*alpha > 0.0 && *alpha < 2.0) || !(*scale > 0.0) || !(*jump_threshold > 0.0) {
                    bail!(
                        InvalidArgument,
                        "stable proxy needs alpha in (0, 2), scale > 0, threshold > 0"
                    );
                }
            }
            OffspringLaw::Empirical { table } => {
                if table.is_empty() {
                    bail!(InvalidArgument, "empirical offspring table is empty");
                }
                if table
                    .iter()
                    .flatten()
                    .any(|&r| !(r > 0.0) || !r.is_finite())
                {
                    bail!(
                        InvalidArgument,
                        "empirical offspring ratios must be positive"
                    );
                }
            }
        }
        Ok(())
    }

    /// Children's lengths for a parent of length 1.
    pub fn sample_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            OffspringLaw::DirichletSplit {
                parts: 1, fraction, ..
            } => vec![*fraction],
            OffspringLaw::DirichletSplit {
                parts,
                concentration,
                fraction,
            } => {
                let g = Gamma::new(*concentration, 1.0).expect("validated");
                let mut x: Vec<f64> = (0..*parts).map(|_| g.sample(rng)).collect();
                let s: f64 = x.iter().sum();
                x.iter_mut().for_each(|v| *v *= fraction / s);
                x
            }
            OffspringLaw::StableProxy {
                alpha,
                scale,
                jump_threshold,
            } => {
                let mut out = Vec::new();
                let mut gamma = 0.0;
                loop {
                    let e: f64 = Exp1.sample(rng);
                    gamma += e;
                    let j = scale * gamma.powf(-1.0 / alpha);
                    if j < *jump_threshold {
                        break;
                    }
                    out.push(j);
                }
                let s: f64 = out.iter().sum();
                if s > 1.0 {
                    out.iter_mut().for_each(|v| *v /= s);
                }
                out
            }
            OffspringLaw::Empirical { table } => table[rng.random_range(0..table.len())].clone(),
        }
    }
}

/// How loop signs are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignMode {
    Fair,
    /// The fair draws negated.
    Flipped,
    /// Every sign equal to the given value.
    Forced(i8),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeConfig {
    pub law: OffspringLaw,
    pub max_gen: usize,
    /// Nodes with inner length below this are frozen; None means 1e-6 L0.
    pub delta: Option<f64>,
    pub node_cap: usize,
    pub signs: SignMode,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            law: OffspringLaw::identity(),
            max_gen: 6,
            delta: None,
            node_cap: DEFAULT_NODE_CAP,
            signs: SignMode::Fair,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeNode {
    pub id: usize,
    pub parent: Option<usize>,
    /// 0 for the root (the disk boundary).
    pub generation: usize,
    /// 0 for the root.
    pub sign: i8,
    pub critical_length: f64,
    pub inner_length: f64,
    pub sign_sum: i64,
    /// Below the extinction threshold, so never branched.
    pub frozen: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeRun {
    pub nodes: Vec<CascadeNode>,
    pub l0: f64,
    pub delta: f64,
    pub max_gen: usize,
    /// The node cap stopped the run early.
    pub truncated: bool,
    /// No node of generation max_gen was reached.
    pub extinct: bool,
}

impl CascadeRun {
    pub fn generation(&self, n: usize) -> impl Iterator<Item = &CascadeNode> + '_ {
        self.nodes.iter().filter(move |x| x.generation == n)
    }
}

/// Runs the cascade from a root of length `l0`. Offspring and signs use the
/// streams "offspring" and "signs".
pub fn run_cascade(
    l0: f64,
    params: ParamSet,
    config: &CascadeConfig,
    streams: &Streams,
) -> Result<CascadeRun> {
    if !(l0 > 0.0) || !l0.is_finite() {
        bail!(InvalidArgument, "root length {l0} must be positive");
    }
    let Some(s) = params.s() else {
        bail!(
            ParameterOutOfRange,
            "c_l = {} > 25 has no inner-length cascade",
            params.c_l()
        );
    };
    let a = s.ln();
    config.law.validate()?;
    if let SignMode::Forced(x) = config.signs {
        if x != 1 && x != -1 {
            bail!(InvalidArgument, "forced sign must be +-1");
        }
    }
    let delta = config.delta.unwrap_or(1e-6 * l0);
    if !(delta > 0.0) {
        bail!(
            InvalidArgument,
            "extinction threshold {delta} must be positive"
        );
    }
    let mut off = streams.stream("offspring");
    let mut sg = streams.stream("signs");
    let mut nodes = vec![CascadeNode {
        id: 0,
        parent: None,
        generation: 0,
        sign: 0,
        critical_length: l0,
        inner_length: l0,
        sign_sum: 0,
        frozen: l0 < delta,
    }];
    let mut frontier: Vec<usize> = if l0 < delta { Vec::new() } else { vec![0] };
    let mut truncated = false;
    let mut reached = config.max_gen == 0 && !frontier.is_empty();
    'gens: for g in 1..=config.max_gen {
        let mut next = Vec::new();
        for &p in &frontier {
            let (pl, ps) = (nodes[p].critical_length, nodes[p].sign_sum);
            for r in config.law.sample_unit(&mut off) {
                if nodes.len() >= config.node_cap {
                    truncated = true;
                    break 'gens;
                }
                let fair: i8 = if sg.random::<bool>() { 1 } else { -1 };
                let sign = match config.signs {
                    SignMode::Fair => fair,
                    SignMode::Flipped => -fair,
                    SignMode::Forced(x) => x,
                };
                let sum = ps + i64::from(sign);
                let critical = pl * r;
                let inner = (a * sum as f64).exp() * critical;
                let id = nodes.len();
                let frozen = inner < delta;
                nodes.push(CascadeNode {
                    id,
                    parent: Some(p),
                    generation: g,
                    sign,
                    critical_length: critical,
                    inner_length: inner,
                    sign_sum: sum,
                    frozen,
                });
                if g == config.max_gen {
                    reached = true;
                }
                if !frozen {
                    next.push(id);
                }
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    Ok(CascadeRun {
        nodes,
        l0,
        delta,
        max_gen: config.max_gen,
        truncated,
        extinct: !reached,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    /// Fraction of runs with a node in this generation.
    pub survival: f64,
    pub survival_se: f64,
    /// Total inner length of the generation, over L0.
    pub total_length: f64,
    pub total_length_se: f64,
    /// Largest inner length of the generation, over L0 (0 when empty).
    pub max_length: f64,
    pub max_length_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeReport {
    pub runs_used: usize,
    pub truncated_excluded: usize,
    pub extinct_fraction: f64,
    pub generations: Vec<GenerationStats>,
}

/// Per-generation aggregates across runs, in run order. Truncated runs are
/// left out unless `include_truncated`.
pub fn cascade_statistics(runs: &[CascadeRun], include_truncated: bool) -> Result<CascadeReport> {
    let used: Vec<&CascadeRun> = runs
        .iter()
        .filter(|r| include_truncated || !r.truncated)
        .collect();
    if used.is_empty() {
        bail!(InvalidArgument, "no runs to aggregate");
    }
    let max_gen = used.iter().map(|r| r.max_gen).max().unwrap_or(0);
    let mut generations = Vec::with_capacity(max_gen + 1);
    for g in 0..=max_gen {
        let (mut alive, mut total, mut maxl) = (Vec::new(), Vec::new(), Vec::new());
        for r in &used {
            let (mut any, mut t, mut m) = (false, 0.0, 0.0f64);
            for n in r.generation(g) {
                any = true;
                t += n.inner_length;
                m = m.max(n.inner_length);
            }
            alive.push(if any { 1.0 } else { 0.0 });
            total.push(t / r.l0);
            maxl.push(m / r.l0);
        }
        let (a, t, m) = (mean_se(&alive), mean_se(&total), mean_se(&maxl));
        generations.push(GenerationStats {
            generation: g,
            survival: a.mean,
            survival_se: a.se,
            total_length: t.mean,
            total_length_se: t.se,
            max_length: m.mean,
            max_length_se: m.se,
        });
    }
    let extinct = used.iter().filter(|r| r.extinct).count() as f64 / used.len() as f64;
    Ok(CascadeReport {
        runs_used: used.len(),
        truncated_excluded: runs.len() - used.len(),
        extinct_fraction: extinct,
        generations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// Every node counts once.
    Node,
    /// Each run's unit mass descends the tree, split equally among children.
    Lineage,
}

/// Histogram of sign sums in generation `n`, as sorted (value, weight)
/// pairs. Node weights are counts; lineage weights sum to the number of
/// runs reaching generation n.
pub fn sign_sum_distribution(
    runs: &[CascadeRun],
    n: usize,
    weighting: Weighting,
) -> Result<Vec<(i64, f64)>> {
    let mut hist: BTreeMap<i64, f64> = BTreeMap::new();
    for r in runs {
        let mut w = vec![0.0; r.nodes.len()];
        if weighting == Weighting::Lineage {
            let mut kids = vec![0usize; r.nodes.len()];
            for x in &r.nodes {
                if let Some(p) = x.parent {
                    kids[p] += 1;
                }
            }
            // Parents precede children in node order.
            w[0] = 1.0;
            for x in r.nodes.iter().skip(1) {
                let p = x.parent.expect("non-root");
                w[x.id] = w[p] / kids[p] as f64;
            }
            let reach: f64 = r.generation(n).map(|x| w[x.id]).sum();
            if reach > 0.0 {
                r.generation(n).for_each(|x| w[x.id] /= reach);
            }
        }
        for x in r.generation(n) {
            let wt = if weighting == Weighting::Node {
                1.0
            } else {
                w[x.id]
            };
            *hist.entry(x.sign_sum).or_insert(0.0) += wt;
        }
    }
    if hist.is_empty() {
        bail!(InvalidArgument, "generation {n} is empty in every run");
    }
    Ok(hist.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn p(c: f64) -> ParamSet {
        ParamSet::from_central_charge(c).unwrap()
    }

    #[test]
    fn identity_lineage_is_a_walk() {
        let cfg = CascadeConfig::default();
        let r = run_cascade(1.0, p(13.0), &cfg, &Streams::new(1)).unwrap();
        assert_eq!(r.nodes.len(), 7);
        for x in r.nodes.iter().skip(1) {
            let par = &r.nodes[x.parent.unwrap()];
            let step = (x.inner_length / par.inner_length).ln();
            assert!((step.abs() - PI).abs() < 1e-12);
            assert_eq!(x.critical_length, 1.0);
        }
    }

    #[test]
    fn node_identity_and_sign_sums() {
        let cfg = CascadeConfig {
            law: OffspringLaw::stable_default(),
            max_gen: 4,
            ..Default::default()
        };
        for c in [3.0, 13.0, 24.0] {
            let a = p(c).s().unwrap().ln();
            let r = run_cascade(1.0, p(c), &cfg, &Streams::new(2)).unwrap();
            for x in r.nodes.iter().skip(1) {
                let want = (a * x.sign_sum as f64).exp() * x.critical_length;
                assert!((x.inner_length / want - 1.0).abs() < 1e-12);
                let par = &r.nodes[x.parent.unwrap()];
                assert_eq!(x.sign_sum, par.sign_sum + i64::from(x.sign));
                assert!(!par.frozen);
            }
        }
    }

    #[test]
    fn forced_signs_scale_the_critical_cascade() {
        let law = OffspringLaw::DirichletSplit {
            parts: 3,
            concentration: 0.7,
            fraction: 0.9,
        };
        let cfg = CascadeConfig {
            law,
            max_gen: 4,
            delta: Some(1e-300),
            ..Default::default()
        };
        let st = Streams::new(3);
        let crit = run_cascade(1.0, ParamSet::critical(), &cfg, &st).unwrap();
        let up = run_cascade(
            1.0,
            p(13.0),
            &CascadeConfig {
                signs: SignMode::Forced(1),
                ..cfg.clone()
            },
            &st,
        )
        .unwrap();
        assert_eq!(crit.nodes.len(), up.nodes.len());
        for (c, u) in crit.nodes.iter().zip(&up.nodes) {
            let want = c.inner_length * (PI * u.generation as f64).exp();
            assert!((u.inner_length / want - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flipped_signs_mirror() {
        let cfg = CascadeConfig {
            max_gen: 3,
            ..Default::default()
        };
        let mut fair = Vec::new();
        let mut flip = Vec::new();
        for i in 0..200 {
            let st = Streams::new(4).child("r", i);
            fair.push(run_cascade(1.0, p(7.0), &cfg, &st).unwrap());
            flip.push(
                run_cascade(
                    1.0,
                    p(7.0),
                    &CascadeConfig {
                        signs: SignMode::Flipped,
                        ..cfg.clone()
                    },
                    &st,
                )
                .unwrap(),
            );
        }
        let a = sign_sum_distribution(&fair, 3, Weighting::Node).unwrap();
        let mut b = sign_sum_distribution(&flip, 3, Weighting::Node).unwrap();
        b.iter_mut().for_each(|x| x.0 = -x.0);
        b.reverse();
        assert_eq!(a, b);
    }

    #[test]
    fn large_delta_extinguishes() {
        let cfg = CascadeConfig {
            delta: Some(1e9),
            ..Default::default()
        };
        let r = run_cascade(1.0, p(13.0), &cfg, &Streams::new(5)).unwrap();
        assert_eq!(r.nodes.len(), 1);
        assert!(r.extinct);
        let cfg = CascadeConfig {
            delta: Some(2.0),
            ..Default::default()
        };
        let r = run_cascade(1.0, p(13.0), &cfg, &Streams::new(5)).unwrap();
        assert!(r.nodes.iter().all(|x| x.generation <= 1));
    }

    #[test]
    fn node_cap_truncates() {
        let law = OffspringLaw::DirichletSplit {
            parts: 4,
            concentration: 1.0,
            fraction: 1.0,
        };
        let cfg = CascadeConfig {
            law,
            max_gen: 10,
            node_cap: 50,
            ..Default::default()
        };
        let r = run_cascade(1.0, p(13.0), &cfg, &Streams::new(6)).unwrap();
        assert!(r.truncated);
        assert_eq!(r.nodes.len(), 50);
        let rep = cascade_statistics(core::slice::from_ref(&r), true).unwrap();
        assert_eq!(rep.truncated_excluded, 0);
        assert!(cascade_statistics(&[r], false).is_err());
    }

    #[test]
    fn lineage_weights_sum_to_reaching_runs() {
        let law = OffspringLaw::DirichletSplit {
            parts: 3,
            concentration: 1.0,
            fraction: 0.8,
        };
        let cfg = CascadeConfig {
            law,
            max_gen: 3,
            ..Default::default()
        };
        let runs: Vec<_> = (0..20)
            .map(|i| run_cascade(1.0, p(13.0), &cfg, &Streams::new(7).child("r", i)).unwrap())
            .collect();
        let h = sign_sum_distribution(&runs, 3, Weighting::Lineage).unwrap();
        let total: f64 = h.iter().map(|x| x.1).sum();
        assert!((total - 20.0).abs() < 1e-9);
        assert!(sign_sum_distribution(&runs, 4, Weighting::Node).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn scale_equivariance(seed in 0u64..1000, c in 2.0f64..24.9) {
            let cfg = CascadeConfig { law: OffspringLaw::stable_default(), max_gen: 3, ..Default::default() };
            let st = Streams::new(seed);
            let a = run_cascade(1.0, p(c), &cfg, &st).unwrap();
            let b = run_cascade(2.0, p(c), &cfg, &st).unwrap();
            prop_assert_eq!(a.nodes.len(), b.nodes.len());
            for (x, y) in a.nodes.iter().zip(&b.nodes) {
                prop_assert!((y.inner_length / (2.0 * x.inner_length) - 1.0).abs() < 1e-12);
                prop_assert_eq!(x.sign_sum, y.sign_sum);
            }
        }

        #[test]
        fn survival_is_nonincreasing(seed in 0u64..1000) {
            let cfg = CascadeConfig { law: OffspringLaw::stable_default(), max_gen: 3, delta: Some(1e-3), ..Default::default() };
            let runs: Vec<_> = (0..5).map(|i| run_cascade(1.0, p(13.0), &cfg, &Streams::new(seed).child("r", i)).unwrap()).collect();
            let rep = cascade_statistics(&runs, false).unwrap();
            for w in rep.generations.windows(2) {
                prop_assert!(w[1].survival <= w[0].survival);
            }
        }
    }
}
