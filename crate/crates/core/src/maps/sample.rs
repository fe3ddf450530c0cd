//! The recursive gasket sampler. Structural mode draws exact maps from the
//! counting tables; perimeter-only mode follows hole perimeters alone,
//! either under the exact marginals or under proxy laws, and reports them
//! as a cascade with lengths = perimeters.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Poisson;

use super::count::ring_count;
use super::{reassemble, DecoratedMap, FaceKind, Filling, Gasket, HalfEdgeMap, Ring, WeightTable};
use crate::cascade::{CascadeNode, CascadeRun};
use crate::error::{bail, Error, Result};
#[allow(unused_imports)]
use crate::float::*;
use crate::rng::Streams;
use crate::stats::mean_se;

/// What the ratio s multiplies in the modified ring step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingAnchor {
    /// The hole perimeter: inner perimeter floor(s^{+-1} p).
    Outer,
    /// The inner perimeter drawn by the original ring law: floor(s^{+-1} p').
    /// At s = 1 this leaves the original law unchanged.
    CriticalInner,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RingMode {
    Original,
    /// A fair coin per hole picks s or 1/s.
    Modified {
        s: f64,
        anchor: RingAnchor,
    },
}

impl RingMode {
    pub fn validate(&self) -> Result<()> {
        if let RingMode::Modified { s, .. } = self {
            if !(*s >= 1.0) || !s.is_finite() {
                bail!(
                    InvalidArgument,
                    "ring ratio s = {s} must be finite and at least 1"
                );
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            RingMode::Original => "original",
            RingMode::Modified { .. } => "modified",
        }
    }

    /// Sign and inner perimeter for a hole of perimeter p whose original
    /// ring law gave p'.
    fn apply<R: Rng + ?Sized>(&self, p: usize, drawn: usize, rng: &mut R) -> (i8, usize) {
        match *self {
            RingMode::Original => (0, drawn),
            RingMode::Modified { s, anchor } => {
                let sign: i8 = if rng.random::<bool>() { 1 } else { -1 };
                let base = match anchor {
                    RingAnchor::Outer => p,
                    RingAnchor::CriticalInner => drawn,
                } as f64;
                let r = if sign > 0 { s } else { 1.0 / s };
                // Guard against products that are integers up to rounding.
                let v = (r * base * (1.0 + 1e-12)).floor();
                (
                    sign,
                    if v >= usize::MAX as f64 {
                        usize::MAX
                    } else {
                        v as usize
                    },
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralSample {
    pub map: DecoratedMap,
    /// Hole perimeters by nesting depth; the root is the boundary.
    pub cascade: CascadeRun,
}

/// Exact sampler of the Boltzmann law e^{-beta n} 2^{loops} on decorated
/// maps of perimeter k with at most `max_faces` triangles, by gasket
/// peeling, ring and interior recursion. In modified mode the inner
/// perimeters are changed per hole and interiors keep their drawn size
/// (plus one triangle when parity requires).
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralSampler {
    table: WeightTable,
    perimeter: usize,
    max_faces: usize,
    beta: f64,
    mode: RingMode,
    sizes: Vec<f64>,
}

impl StructuralSampler {
    pub fn new(perimeter: usize, max_faces: usize, beta: f64, mode: RingMode) -> Result<Self> {
        mode.validate()?;
        if perimeter == 0 {
            bail!(InvalidArgument, "perimeter must be at least 1");
        }
        if !beta.is_finite() {
            bail!(InvalidArgument, "beta must be finite");
        }
        let base = perimeter + max_faces;
        let reach = match mode {
            RingMode::Original => base,
            RingMode::Modified { .. } => (2 * base + 2).min(40),
        };
        let table = WeightTable::new(2, reach)?;
        let sizes: Vec<f64> = (0..=max_faces)
            .map(|n| table.w(perimeter, n) as f64 * (-beta * n as f64).exp())
            .collect();
        if sizes.iter().all(|&w| w == 0.0) {
            bail!(
                InvalidArgument,
                "no maps of perimeter {perimeter} with at most {max_faces} triangles"
            );
        }
        Ok(Self {
            table,
            perimeter,
            max_faces,
            beta,
            mode,
            sizes,
        })
    }

    pub fn perimeter(&self) -> usize {
        self.perimeter
    }

    pub fn max_faces(&self) -> usize {
        self.max_faces
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mode(&self) -> RingMode {
        self.mode
    }

    pub fn table(&self) -> &WeightTable {
        &self.table
    }

    fn draw_size<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        WeightedIndex::new(&self.sizes)
            .map(|d| d.sample(rng))
            .unwrap_or(0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<StructuralSample> {
        let m = self.draw_size(rng);
        let mut nodes = vec![root_node(self.perimeter)];
        let map = self
            .fill(self.perimeter, m, 0, &mut nodes, rng, true)?
            .unwrap_or_else(DecoratedMap::vertex);
        Ok(StructuralSample {
            map,
            cascade: finished_run(self.perimeter, nodes),
        })
    }

    /// The perimeters of `sample` without building maps.
    pub fn sample_perimeters<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CascadeRun> {
        let m = self.draw_size(rng);
        let mut nodes = vec![root_node(self.perimeter)];
        self.fill(self.perimeter, m, 0, &mut nodes, rng, false)?;
        Ok(finished_run(self.perimeter, nodes))
    }

    /// A map of perimeter k with exactly m triangles, weighted by 2^loops.
    fn fill<R: Rng + ?Sized>(
        &self,
        k: usize,
        m: usize,
        parent: usize,
        nodes: &mut Vec<CascadeNode>,
        rng: &mut R,
        build: bool,
    ) -> Result<Option<DecoratedMap>> {
        let t = &self.table;
        if !t.is_exact(k, m) {
            bail!(
                CapExceeded,
                "perimeter {k} with {m} triangles is beyond the table reach {}",
                t.reach()
            );
        }
        if t.w(k, m) == 0 {
            bail!(Numerical, "no map of perimeter {k} with {m} triangles");
        }
        if k == 0 {
            return Ok(build.then(DecoratedMap::vertex));
        }
        // Gasket by peeling; each hole carries the triangles of its filling.
        let mut g = HalfEdgeMap::open_polygon(k);
        let mut first = vec![0];
        first.extend((1..k).rev());
        let mut regions: Vec<(Vec<usize>, usize)> = vec![(first, m)];
        let mut holes: Vec<(usize, usize)> = Vec::new();
        let mut hole_of_face: Vec<usize> = vec![usize::MAX];
        while let Some((sides, b)) = regions.pop() {
            let l = sides.len();
            if l == 0 {
                continue;
            }
            let e = sides[0];
            let total = t.w(l, b);
            let mut u = rng.random_range(0..total);
            let mut chosen = None;
            'pick: for p in 1..=b {
                for a in p..=b {
                    let wt = t.x(p, a) * t.w(l + p - 2, b - a);
                    if u < wt {
                        chosen = Some(Step::Hole(p, a));
                        break 'pick;
                    }
                    u -= wt;
                }
            }
            if chosen.is_none() {
                'glue: for j in 1..l {
                    for a in 0..=b {
                        let wt = t.w(j - 1, a) * t.w(l - 1 - j, b - a);
                        if u < wt {
                            chosen = Some(Step::Glue(j, a));
                            break 'glue;
                        }
                        u -= wt;
                    }
                }
            }
            match chosen.ok_or_else(|| {
                Error::Numerical(format!("peeling weights do not sum to W({l}, {b})"))
            })? {
                Step::Hole(p, a) => {
                    let f0 = g.add_face(FaceKind::Hole, p);
                    hole_of_face.push(holes.len());
                    holes.push((p, a));
                    g.glue(e, f0);
                    let mut s: Vec<usize> = (1..p).rev().map(|i| f0 + i).collect();
                    s.extend_from_slice(&sides[1..]);
                    regions.push((s, b - a));
                }
                Step::Glue(j, a) => {
                    g.glue(e, sides[j]);
                    regions.push((sides[j + 1..].to_vec(), b - a));
                    regions.push((sides[1..j].to_vec(), a));
                }
            }
        }
        let (gasket, order) = Gasket::new(&g)?;
        let hole_order: Vec<usize> = gasket
            .holes
            .iter()
            .map(|&r| hole_of_face[g.face[order[r]]])
            .collect();
        let generation = nodes[parent].generation + 1;
        let sign_sum = nodes[parent].sign_sum;
        let mut fillings = Vec::with_capacity(holes.len());
        for hi in hole_order {
            let (p, a) = holes[hi];
            let weights: Vec<u128> = (0..=a - p)
                .map(|q| ring_count(p, q) * t.w(q, a - p - q))
                .collect();
            let drawn = pick_u128(&weights, rng);
            let size = a - p - drawn;
            let (sign, q) = self.mode.apply(p, drawn, rng);
            let j = if q == drawn {
                size
            } else if q == 0 {
                0
            } else {
                size + (size + q) % 2
            };
            let id = nodes.len();
            nodes.push(CascadeNode {
                id,
                parent: Some(parent),
                generation,
                sign,
                critical_length: p as f64,
                inner_length: q as f64,
                sign_sum: sign_sum + i64::from(sign),
                frozen: q == 0,
            });
            let interior = self.fill(q, j, id, nodes, rng, build)?;
            if build {
                let word = ring_word(p, q, rng);
                fillings.push(Filling {
                    ring: Ring::new(word)?,
                    interior: interior.unwrap_or_else(DecoratedMap::vertex),
                });
            }
        }
        if !build {
            return Ok(None);
        }
        reassemble(&gasket, &fillings).map(Some)
    }
}

enum Step {
    Hole(usize, usize),
    Glue(usize, usize),
}

fn pick_u128<R: Rng + ?Sized>(w: &[u128], rng: &mut R) -> usize {
    let total: u128 = w.iter().sum();
    let mut u = rng.random_range(0..total);
    for (i, &x) in w.iter().enumerate() {
        if u < x {
            return i;
        }
        u -= x;
    }
    w.len() - 1
}

/// A uniform ring word with p outs and q ins, starting with an out.
fn ring_word<R: Rng + ?Sized>(p: usize, q: usize, rng: &mut R) -> Vec<bool> {
    let l = p + q;
    let mut word = vec![false; l];
    word[0] = true;
    for i in rand::seq::index::sample(rng, l - 1, p - 1) {
        word[i + 1] = true;
    }
    word
}

fn root_node(k: usize) -> CascadeNode {
    CascadeNode {
        id: 0,
        parent: None,
        generation: 0,
        sign: 0,
        critical_length: k as f64,
        inner_length: k as f64,
        sign_sum: 0,
        frozen: k == 0,
    }
}

/// Structural runs always end with every inner perimeter 0.
fn finished_run(k: usize, nodes: Vec<CascadeNode>) -> CascadeRun {
    let max_gen = nodes.iter().map(|n| n.generation).max().unwrap_or(0);
    CascadeRun {
        nodes,
        l0: k as f64,
        delta: 1.0,
        max_gen,
        truncated: false,
        extinct: true,
    }
}

/// Proxy number and sizes of the holes of a gasket of perimeter q: a
/// Poisson number of holes, each of perimeter floor(q fraction U^(1/tail))
/// with U uniform, perimeter 0 meaning no hole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoleProxy {
    pub mean_holes: f64,
    pub max_fraction: f64,
    pub tail: f64,
}

impl Default for HoleProxy {
    fn default() -> Self {
        Self {
            mean_holes: 2.0,
            max_fraction: 0.5,
            tail: 1.0,
        }
    }
}

impl HoleProxy {
    /// Expected total hole perimeter per unit perimeter, before flooring.
    pub fn mean_ratio(&self) -> f64 {
        self.mean_holes * self.max_fraction * self.tail / (self.tail + 1.0)
    }

    fn validate(&self) -> Result<()> {
        if !(self.mean_holes > 0.0
            && self.max_fraction > 0.0
            && self.max_fraction <= 1.0
            && self.tail > 0.0)
        {
            bail!(
                InvalidArgument,
                "hole proxy needs mean_holes > 0, 0 < max_fraction <= 1, tail > 0"
            );
        }
        Ok(())
    }
}

/// Proxy original ring law: inner perimeter from the outer one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RingProxy {
    #[default]
    Identity,
    /// Always 0: every loop closes off its interior.
    Zero,
    /// p - 1, p or p + 1 uniformly, floored at 0.
    Jitter,
}

impl RingProxy {
    fn draw<R: Rng + ?Sized>(&self, p: usize, rng: &mut R) -> usize {
        match self {
            RingProxy::Identity => p,
            RingProxy::Zero => 0,
            RingProxy::Jitter => (p + rng.random_range(0..3usize)).saturating_sub(1),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RingProxy::Identity => "identity",
            RingProxy::Zero => "zero",
            RingProxy::Jitter => "jitter",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerimeterLaws {
    pub holes: HoleProxy,
    pub ring: RingProxy,
}

/// Perimeter-only branching under proxy laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerimeterSampler {
    pub laws: PerimeterLaws,
    pub mode: RingMode,
    pub max_gen: usize,
    pub node_cap: usize,
    /// Perimeters above this stop the run, flagged truncated.
    pub max_perimeter: usize,
}

impl PerimeterSampler {
    pub fn new(laws: PerimeterLaws, mode: RingMode, max_gen: usize) -> Self {
        Self {
            laws,
            mode,
            max_gen,
            node_cap: 1_000_000,
            max_perimeter: 1 << 40,
        }
    }

    /// A run from boundary perimeter k. `extinct` is false when a node with
    /// positive inner perimeter reaches the generation cap.
    pub fn run<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<CascadeRun> {
        self.mode.validate()?;
        self.laws.holes.validate()?;
        let hp = self.laws.holes;
        let poisson =
            Poisson::new(hp.mean_holes).map_err(|e| Error::InvalidArgument(format!("{e}")))?;
        let mut nodes = vec![root_node(k)];
        let mut frontier: Vec<usize> = if k == 0 { Vec::new() } else { vec![0] };
        let mut truncated = false;
        'gens: for g in 1..=self.max_gen {
            let mut next = Vec::new();
            for &pi in &frontier {
                let q = nodes[pi].inner_length as usize;
                let count = poisson.sample(rng) as usize;
                for _ in 0..count {
                    let u: f64 = rng.random();
                    let p = (q as f64 * hp.max_fraction * u.powf(1.0 / hp.tail)).floor() as usize;
                    if p == 0 {
                        continue;
                    }
                    let drawn = self.laws.ring.draw(p, rng);
                    let (sign, inner) = self.mode.apply(p, drawn, rng);
                    if nodes.len() >= self.node_cap || inner > self.max_perimeter {
                        truncated = true;
                        break 'gens;
                    }
                    let id = nodes.len();
                    nodes.push(CascadeNode {
                        id,
                        parent: Some(pi),
                        generation: g,
                        sign,
                        critical_length: p as f64,
                        inner_length: inner as f64,
                        sign_sum: nodes[pi].sign_sum + i64::from(sign),
                        frozen: inner == 0,
                    });
                    if inner > 0 {
                        next.push(id);
                    }
                }
            }
            frontier = next;
            if frontier.is_empty() {
                break;
            }
        }
        let alive = nodes
            .iter()
            .any(|n| n.generation == self.max_gen && !n.frozen);
        Ok(CascadeRun {
            nodes,
            l0: k as f64,
            delta: 1.0,
            max_gen: self.max_gen,
            truncated,
            extinct: !alive,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalConfig {
    pub perimeters: Vec<usize>,
    pub s_values: Vec<f64>,
    pub runs: usize,
    pub max_gen: usize,
    pub node_cap: usize,
    pub laws: PerimeterLaws,
    pub anchor: RingAnchor,
}

impl Default for SurvivalConfig {
    fn default() -> Self {
        Self {
            perimeters: vec![8, 32, 128],
            s_values: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            runs: 10_000,
            max_gen: 8,
            node_cap: 200_000,
            laws: PerimeterLaws::default(),
            anchor: RingAnchor::Outer,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalPoint {
    pub perimeter: usize,
    pub s: f64,
    pub runs: usize,
    /// Runs alive at the generation cap; truncated runs count as alive.
    pub survived: usize,
    pub truncated: usize,
    pub survival: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalReport {
    pub points: Vec<SurvivalPoint>,
    /// Fraction of adjacent s pairs (at fixed k) where survival does not
    /// decrease.
    pub s_monotone_fraction: f64,
    /// The same across adjacent k at fixed s.
    pub k_monotone_fraction: f64,
}

/// Survival to the generation cap for every (k, s), in modified mode (s = 1
/// included). Run i uses the same stream for every s at a given k.
pub fn survival_experiment(config: &SurvivalConfig, streams: &Streams) -> Result<SurvivalReport> {
    if config.runs == 0 || config.perimeters.is_empty() || config.s_values.is_empty() {
        bail!(
            InvalidArgument,
            "survival needs runs, perimeters and s values"
        );
    }
    let mut points = Vec::new();
    for &k in &config.perimeters {
        for &s in &config.s_values {
            let sampler = PerimeterSampler {
                node_cap: config.node_cap,
                ..PerimeterSampler::new(
                    config.laws,
                    RingMode::Modified {
                        s,
                        anchor: config.anchor,
                    },
                    config.max_gen,
                )
            };
            let (mut survived, mut truncated) = (0, 0);
            let mut alive = Vec::with_capacity(config.runs);
            for i in 0..config.runs {
                let mut rng = streams
                    .child(&format!("survival-k{k}"), i as u64)
                    .stream("perimeters");
                let r = sampler.run(k, &mut rng)?;
                let ok = r.truncated || !r.extinct;
                truncated += usize::from(r.truncated);
                survived += usize::from(ok);
                alive.push(if ok { 1.0 } else { 0.0 });
            }
            let ms = mean_se(&alive);
            points.push(SurvivalPoint {
                perimeter: k,
                s,
                runs: config.runs,
                survived,
                truncated,
                survival: ms.mean,
                se: ms.se,
            });
        }
    }
    let ns = config.s_values.len();
    let at = |ki: usize, si: usize| points[ki * ns + si].survival;
    let (mut good, mut pairs) = (0, 0);
    for ki in 0..config.perimeters.len() {
        for si in 1..ns {
            pairs += 1;
            good += usize::from(at(ki, si) >= at(ki, si - 1));
        }
    }
    let s_monotone_fraction = if pairs == 0 {
        1.0
    } else {
        good as f64 / pairs as f64
    };
    let (mut good, mut pairs) = (0, 0);
    for si in 0..ns {
        for ki in 1..config.perimeters.len() {
            pairs += 1;
            good += usize::from(at(ki, si) >= at(ki - 1, si));
        }
    }
    let k_monotone_fraction = if pairs == 0 {
        1.0
    } else {
        good as f64 / pairs as f64
    };
    Ok(SurvivalReport {
        points,
        s_monotone_fraction,
        k_monotone_fraction,
    })
}
