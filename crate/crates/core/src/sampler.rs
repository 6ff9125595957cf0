//! Monte Carlo samplers for fiducial distributions.
//!
//! The defining construction conditions the best-fitting parameter on a
//! near-miss event: draw fresh noise `U*`, minimize `||x - G(U*, xi)||`
//! over the parameter box, and keep the argmin whenever the minimum is
//! within `epsilon`. Three specializations live here:
//!
//! - [`sample_gfd_eps`] — the generic `epsilon > 0` rejection sampler with
//!   grid scan plus local refinement of the argmin.
//! - [`sample_gfd_exact`] — exact `epsilon = 0` conditioning for models
//!   that can solve the zero-residual fit directly (positive-probability
//!   exact-fit events).
//! - [`sample_gfd_discrete`] — the lattice case, where the argmin is a
//!   whole parameter interval `{xi : F(x-, xi) <= u <= F(x, xi)}` and draws
//!   are intervals with a half-correction representative.
//!
//! Proposals are processed in fixed-size chunks, each driven by its own
//! seeded RNG substream; accepted draws are merged in chunk order. Results
//! are therefore bit-identical for a fixed seed regardless of the worker
//! count.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::FiducialDensity;
use crate::error::{Error, Result};
use crate::grid::ParameterGrid;
use crate::model::{Dge, DiscreteDge};
use crate::rng::substream;

mod refine;

/// Refinement windows re-center at most this many times per proposal before
/// the argmin walk is declared unbracketed and the proposal is flagged.
const MAX_REFINE_HOPS: usize = 12;

/// Flagged-proposal thresholds for the coarse-grid error: at least this
/// many unbracketed walks, and more than one per thousand proposals.
const WALKAWAY_MIN_COUNT: u64 = 20;
const WALKAWAY_MAX_RATE: f64 = 1e-3;

/// Norm used in the near-miss event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Norm {
    #[default]
    L2,
    Linf,
}

/// How the lattice sampler summarizes a set-valued draw into a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Representative {
    /// Solve `(F(x, xi) + F(x-, xi))/2 = u`: deterministic, distributed by
    /// the half-corrected CDF.
    #[default]
    CdfMidpoint,
    /// A fair coin picks which envelope equation to solve per draw; the
    /// same law realized by randomization.
    RandomEndpoint,
}

impl Norm {
    pub fn eval(&self, diff: impl Iterator<Item = f64>) -> f64 {
        match self {
            Norm::L2 => diff.map(|d| d * d).sum::<f64>().sqrt(),
            Norm::Linf => diff.map(f64::abs).fold(0.0, f64::max),
        }
    }
}

/// Tuning knobs for the samplers. The defaults follow the desk-scale
/// contract: explicit budget, fixed chunk size, 20 refinement iterations.
#[derive(Debug, Clone)]
pub struct SamplerOptions {
    pub norm: Norm,
    /// Worker threads; results do not depend on this value.
    pub workers: usize,
    /// Proposal budget across all chunks.
    pub budget: u64,
    pub chunk_size: u64,
    /// Iterations of golden-section (p = 1) or Nelder–Mead (p > 1)
    /// refinement within the winning grid cell's neighborhood.
    pub refine_iters: usize,
    /// Objective window within which grid minimizers count as tied.
    pub tie_tol: f64,
    /// Point summary convention for set-valued lattice draws.
    pub representative: Representative,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            norm: Norm::L2,
            workers: 1,
            budget: 10_000_000,
            chunk_size: 4096,
            refine_iters: 20,
            tie_tol: 1e-12,
            representative: Representative::CdfMidpoint,
        }
    }
}

/// One accepted draw: a parameter point, or a parameter interval in the
/// set-valued discrete case (with its half-correction representative).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Draw {
    Point(Vec<f64>),
    Interval { lo: f64, hi: f64, half: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub model_id: String,
    pub data: Vec<f64>,
    /// Tolerance of the near-miss event; 0 for exact conditioning, absent
    /// for direct density draws.
    pub epsilon: Option<f64>,
    pub proposals_used: u64,
    pub acceptance_rate: f64,
    pub seed: u64,
    pub norm: Norm,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub draws: Vec<Draw>,
    /// Optional nonnegative weights summing to 1.
    pub weights: Option<Vec<f64>>,
    pub meta: SampleMeta,
}

impl SampleSet {
    /// Point draws' values along `axis`. Panics on interval draws.
    pub fn coordinate(&self, axis: usize) -> Vec<f64> {
        self.draws
            .iter()
            .map(|d| match d {
                Draw::Point(p) => p[axis],
                Draw::Interval { .. } => panic!("coordinate() on interval draws"),
            })
            .collect()
    }

    /// `(lows, halves, highs)` of interval draws. Panics on point draws.
    pub fn interval_parts(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut lo = Vec::with_capacity(self.draws.len());
        let mut half = Vec::with_capacity(self.draws.len());
        let mut hi = Vec::with_capacity(self.draws.len());
        for d in &self.draws {
            match d {
                Draw::Interval { lo: l, hi: h, half: m } => {
                    lo.push(*l);
                    half.push(*m);
                    hi.push(*h);
                }
                Draw::Point(_) => panic!("interval_parts() on point draws"),
            }
        }
        (lo, half, hi)
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

/// Per-proposal outcome inside the chunked driver.
struct Proposal<A> {
    accepted: Option<A>,
    /// The argmin walk failed to settle (see [`MAX_REFINE_HOPS`]); carries
    /// the offending axis.
    walkaway: Option<usize>,
}

impl<A> Proposal<A> {
    fn reject() -> Self {
        Self { accepted: None, walkaway: None }
    }

    fn accept(a: A) -> Self {
        Self { accepted: Some(a), walkaway: None }
    }
}

/// What a chunked run produced, before error classification.
struct ChunkedOutcome<A> {
    draws: Vec<A>,
    /// Proposals up to and including the last accepted one (or the full
    /// budget when the target was not reached).
    proposals_used: u64,
    /// Unsettled argmin walks within the first `proposals_used` proposals,
    /// with the axis of the first one.
    walkaways: u64,
    walkaway_axis: usize,
}

/// Chunked conditional-simulation driver.
///
/// Proposals are indexed globally by `(chunk, position)`; chunk `c` uses RNG
/// substream `c + 1` of `seed`. Accepted draws are merged in global proposal
/// order, so the outcome is identical for any worker count.
fn run_chunked<A, F>(
    seed: u64,
    n_target: usize,
    opts: &SamplerOptions,
    eval: F,
) -> Result<ChunkedOutcome<A>>
where
    A: Send,
    F: Fn(&mut ChaCha8Rng) -> Result<Proposal<A>> + Sync,
{
    if n_target == 0 {
        return Err(Error::InvalidArgument("n_target must be >= 1".into()));
    }
    if opts.budget == 0 || opts.chunk_size == 0 {
        return Err(Error::InvalidArgument("budget and chunk_size must be positive".into()));
    }
    let n_chunks = opts.budget.div_ceil(opts.chunk_size);
    let next_chunk = AtomicUsize::new(0);
    let accepted_count = AtomicUsize::new(0);
    type ChunkData<A> = (u64, Vec<(u64, A)>, Vec<(u64, usize)>);
    let collected: Mutex<Vec<ChunkData<A>>> = Mutex::new(Vec::new());
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let workers = opts.workers.max(1);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let chunk = next_chunk.fetch_add(1, Ordering::Relaxed) as u64;
                if chunk >= n_chunks
                    || accepted_count.load(Ordering::Relaxed) >= n_target
                    || failure.lock().unwrap().is_some()
                {
                    return;
                }
                let start = chunk * opts.chunk_size;
                let size = opts.chunk_size.min(opts.budget - start);
                let mut rng = substream(seed, chunk + 1);
                let mut local: Vec<(u64, A)> = Vec::new();
                let mut flagged: Vec<(u64, usize)> = Vec::new();
                for pos in 0..size {
                    match eval(&mut rng) {
                        Ok(p) => {
                            if let Some(axis) = p.walkaway {
                                flagged.push((pos, axis));
                            }
                            if let Some(a) = p.accepted {
                                local.push((pos, a));
                            }
                        }
                        Err(e) => {
                            let mut slot = failure.lock().unwrap();
                            if slot.is_none() {
                                *slot = Some(e);
                            }
                            return;
                        }
                    }
                }
                accepted_count.fetch_add(local.len(), Ordering::Relaxed);
                collected.lock().unwrap().push((chunk, local, flagged));
            });
        }
    });

    if let Some(e) = failure.into_inner().unwrap().take() {
        return Err(e);
    }
    let mut chunks = collected.into_inner().unwrap();
    chunks.sort_unstable_by_key(|(c, _, _)| *c);
    // Deterministic horizon: the ordinal just past the n_target-th accept,
    // or the full budget when the target was not reached.
    let mut proposals_used = opts.budget;
    let mut seen = 0usize;
    'outer: for (chunk, local, _) in &chunks {
        for (pos, _) in local {
            seen += 1;
            if seen == n_target {
                proposals_used = chunk * opts.chunk_size + pos + 1;
                break 'outer;
            }
        }
    }
    let mut draws: Vec<A> = Vec::with_capacity(n_target.min(seen));
    let mut walkaways = 0u64;
    let mut walkaway_axis = 0usize;
    for (chunk, local, flagged) in chunks {
        let base = chunk * opts.chunk_size;
        for (pos, axis) in flagged {
            if base + pos < proposals_used {
                if walkaways == 0 {
                    walkaway_axis = axis;
                }
                walkaways += 1;
            }
        }
        for (pos, a) in local {
            if base + pos < proposals_used {
                draws.push(a);
            }
        }
    }
    Ok(ChunkedOutcome { draws, proposals_used, walkaways, walkaway_axis })
}

fn make_meta(
    dge: &dyn Dge,
    x: &[f64],
    epsilon: Option<f64>,
    draws: usize,
    proposals_used: u64,
    seed: u64,
    opts: &SamplerOptions,
) -> SampleMeta {
    SampleMeta {
        model_id: dge.model_id(),
        data: x.to_vec(),
        epsilon,
        proposals_used,
        acceptance_rate: draws as f64 / proposals_used as f64,
        seed,
        norm: opts.norm,
        workers: opts.workers.max(1),
    }
}

/// The generic tolerance sampler: accepts a noise draw when the grid-plus-
/// refinement minimum of `||x - G(u, xi)||` is at most `epsilon`, recording
/// the refined argmin. Grid-cell ties within `tie_tol` are broken uniformly
/// at random.
///
/// Fails with [`Error::GridTooCoarse`] when refinement moves the argmin by
/// more than one grid cell, and with [`Error::BudgetExhausted`] (carrying
/// the partial sample) when the proposal budget runs out.
pub fn sample_gfd_eps(
    dge: &dyn Dge,
    x: &[f64],
    epsilon: f64,
    n_target: usize,
    grid: &ParameterGrid,
    seed: u64,
    opts: &SamplerOptions,
) -> Result<SampleSet> {
    if epsilon <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}; use the exact or discrete samplers for epsilon = 0"
        )));
    }
    if x.len() != dge.data_dim() {
        return Err(Error::Dimension(format!(
            "data has length {}, model expects {}",
            x.len(),
            dge.data_dim()
        )));
    }
    if grid.dim() != dge.param_dim() {
        return Err(Error::Dimension("grid dimension must match the parameter dimension".into()));
    }

    let p = grid.dim();
    let n = dge.data_dim();
    // Node coordinates, flattened with stride p, computed once.
    let mut node_coords = vec![0.0f64; grid.len() * p];
    for (flat, node) in grid.nodes().enumerate() {
        node_coords[flat * p..(flat + 1) * p].copy_from_slice(&node);
    }
    let steps: Vec<f64> = grid.axes().iter().map(|a| a.step()).collect();
    let grid_lo: Vec<f64> = grid.axes().iter().map(|a| a.lo).collect();
    let grid_hi: Vec<f64> = grid.axes().iter().map(|a| a.hi).collect();
    let space = dge.param_space();
    let box_lo: Vec<f64> =
        grid_lo.iter().zip(space.lo()).map(|(&g, &b)| g.max(b)).collect();
    let box_hi: Vec<f64> =
        grid_hi.iter().zip(space.hi()).map(|(&g, &b)| g.min(b)).collect();

    let eval = |rng: &mut ChaCha8Rng| -> Result<Proposal<Vec<f64>>> {
        let u = dge.sample_noise(rng);
        let mut sim = vec![0.0f64; n];
        let objective = |xi: &[f64]| {
            dge.forward_into(&u, xi, &mut sim);
            opts.norm.eval(sim.iter().zip(x).map(|(s, o)| s - o))
        };
        // Coarse scan over the grid, collecting tied minimizers.
        let mut best = f64::INFINITY;
        let mut ties: Vec<usize> = Vec::new();
        {
            let mut sim_scan = vec![0.0f64; n];
            for flat in 0..grid.len() {
                let xi = &node_coords[flat * p..(flat + 1) * p];
                dge.forward_into(&u, xi, &mut sim_scan);
                let d = opts.norm.eval(sim_scan.iter().zip(x).map(|(s, o)| s - o));
                if d < best - opts.tie_tol {
                    best = d;
                    ties.clear();
                    ties.push(flat);
                } else if d <= best + opts.tie_tol {
                    ties.push(flat);
                }
            }
        }
        let pick = if ties.len() > 1 { ties[rng.random_range(0..ties.len())] } else { ties[0] };
        let node = &node_coords[pick * p..(pick + 1) * p];

        // Local refinement in the winning cell's neighborhood (anchor
        // +- 1.5 steps, clamped to the grid box intersected with the
        // parameter box). A minimizer more than one cell from the anchor
        // re-centers the window and tries again; a walk that never settles
        // is flagged, and too many flagged proposals fail the whole run
        // as a coarse-grid signal.
        let mut obj = objective;
        let mut anchor = node.to_vec();
        let mut best_pos = anchor.clone();
        let mut best_val = best;
        let mut settled = false;
        let mut offending_axis = 0usize;
        for _hop in 0..=MAX_REFINE_HOPS {
            let mut lo = vec![0.0f64; p];
            let mut hi = vec![0.0f64; p];
            for a in 0..p {
                lo[a] = (anchor[a] - 1.5 * steps[a]).max(box_lo[a]);
                hi[a] = (anchor[a] + 1.5 * steps[a]).min(box_hi[a]);
            }
            let (pos, val) =
                refine::minimize_in_box(&mut obj, &anchor, &steps, &lo, &hi, opts.refine_iters);
            if val < best_val {
                best_pos = pos.clone();
                best_val = val;
            }
            let moved_axis =
                (0..p).find(|&a| (pos[a] - anchor[a]).abs() > steps[a] * (1.0 + 1e-9));
            match moved_axis {
                None => {
                    settled = true;
                    break;
                }
                Some(a) => {
                    offending_axis = a;
                    anchor = pos;
                }
            }
        }
        Ok(Proposal {
            accepted: (best_val <= epsilon).then_some(best_pos),
            walkaway: (!settled).then_some(offending_axis),
        })
    };

    let outcome = run_chunked(seed, n_target, opts, eval)?;
    if outcome.walkaways >= WALKAWAY_MIN_COUNT
        && outcome.walkaways as f64 > WALKAWAY_MAX_RATE * outcome.proposals_used as f64
    {
        return Err(Error::GridTooCoarse { axis: outcome.walkaway_axis });
    }
    let accepted = outcome.draws.len();
    let set = SampleSet {
        draws: outcome.draws.into_iter().map(Draw::Point).collect(),
        weights: None,
        meta: make_meta(dge, x, Some(epsilon), accepted, outcome.proposals_used, seed, opts),
    };
    if accepted < n_target {
        return Err(Error::BudgetExhausted {
            budget: opts.budget,
            accepted,
            target: n_target,
            partial: Box::new(set),
        });
    }
    Ok(set)
}

/// Exact zero-residual conditioning for models with a positive-probability
/// exact-fit event (the `epsilon -> 0` limit evaluated at 0).
pub fn sample_gfd_exact(
    dge: &dyn Dge,
    x: &[f64],
    n_target: usize,
    seed: u64,
    opts: &SamplerOptions,
) -> Result<SampleSet> {
    if x.len() != dge.data_dim() {
        return Err(Error::Dimension(format!(
            "data has length {}, model expects {}",
            x.len(),
            dge.data_dim()
        )));
    }
    let eval = |rng: &mut ChaCha8Rng| -> Result<Proposal<Vec<f64>>> {
        let u = dge.sample_noise(rng);
        Ok(Proposal { accepted: dge.exact_fit(x, &u), walkaway: None })
    };
    let outcome = run_chunked(seed, n_target, opts, eval)?;
    let accepted = outcome.draws.len();
    let set = SampleSet {
        draws: outcome.draws.into_iter().map(Draw::Point).collect(),
        weights: None,
        meta: make_meta(dge, x, Some(0.0), accepted, outcome.proposals_used, seed, opts),
    };
    if accepted == 0 {
        return Err(Error::ZeroMassEvent { proposals: opts.budget });
    }
    if accepted < n_target {
        return Err(Error::BudgetExhausted {
            budget: opts.budget,
            accepted,
            target: n_target,
            partial: Box::new(set),
        });
    }
    Ok(set)
}

/// Solves `f(t) = target` for monotone `f` on `[lo, hi]` by bisection.
/// Assumes a sign change; 100 iterations pin the root to full precision.
fn bisect_monotone(f: &dyn Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    let rising = f(hi) >= f(lo);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        let go_right = if rising { v < target } else { v >= target };
        if go_right {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * (1.0 + hi.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Lattice sampler: retains noise draws that reproduce the observed value
/// exactly for some parameter, returning the solved parameter interval
/// `{xi : F(x-, xi) <= u <= F(x, xi)}` per draw. The half-correction
/// representative solves `(F(x, xi) + F(x-, xi))/2 = u`, so the
/// representatives are distributed by the half-corrected CDF.
pub fn sample_gfd_discrete(
    dge: &dyn DiscreteDge,
    x: i64,
    n_target: usize,
    seed: u64,
    opts: &SamplerOptions,
) -> Result<SampleSet> {
    let space = dge.param_space();
    if space.dim() != 1 {
        return Err(Error::Dimension("the lattice sampler handles p = 1 models".into()));
    }
    let (range_lo, range_hi) = (space.lo()[0], space.hi()[0]);
    let f_at = |t: f64| dge.cdf(x, &[t]);
    let f_left = |t: f64| dge.cdf_left(x, &[t]);
    let f_mid = |t: f64| 0.5 * (f_at(t) + f_left(t));

    // Constraint solving depends only on monotonicity, probed at the ends.
    let rising = f_at(range_hi) >= f_at(range_lo);

    let eval = |rng: &mut ChaCha8Rng| -> Result<Proposal<Draw>> {
        let u: f64 = rng.random();
        // Acceptance is the exact-fit event: some parameter must satisfy
        // both F(x, xi) >= u (A) and F(x-, xi) <= u (B). Each constraint
        // binds one interval endpoint; an endpoint whose constraint never
        // binds sits at the range edge.
        let (lo, hi) = if rising {
            // A: xi >= solve(F(x, .) = u); impossible if F(x, hi) < u.
            if f_at(range_hi) < u {
                return Ok(Proposal::reject());
            }
            let lo = if f_at(range_lo) >= u {
                range_lo
            } else {
                bisect_monotone(&f_at, u, range_lo, range_hi)
            };
            // B: xi <= solve(F(x-, .) = u); impossible if F(x-, lo) > u.
            if f_left(range_lo) > u {
                return Ok(Proposal::reject());
            }
            let hi = if f_left(range_hi) <= u {
                range_hi
            } else {
                bisect_monotone(&f_left, u, range_lo, range_hi)
            };
            (lo, hi)
        } else {
            if f_at(range_lo) < u {
                return Ok(Proposal::reject());
            }
            let hi = if f_at(range_hi) >= u {
                range_hi
            } else {
                bisect_monotone(&f_at, u, range_lo, range_hi)
            };
            if f_left(range_hi) > u {
                return Ok(Proposal::reject());
            }
            let lo = if f_left(range_lo) <= u {
                range_lo
            } else {
                bisect_monotone(&f_left, u, range_lo, range_hi)
            };
            (lo, hi)
        };
        if lo > hi {
            return Ok(Proposal::reject());
        }
        // Representative of the set-valued draw. Curves are solved with
        // clamping to the range ends, where the corrected CDF can carry
        // boundary atoms (e.g. the bottom of a support).
        let solve_clamped = |f: &dyn Fn(f64) -> f64, u: f64| -> f64 {
            let (v_lo, v_hi) = (f(range_lo), f(range_hi));
            let (v_min, v_max) = if v_lo <= v_hi { (v_lo, v_hi) } else { (v_hi, v_lo) };
            if u <= v_min {
                if v_lo <= v_hi {
                    range_lo
                } else {
                    range_hi
                }
            } else if u >= v_max {
                if v_lo <= v_hi {
                    range_hi
                } else {
                    range_lo
                }
            } else {
                bisect_monotone(f, u, range_lo, range_hi)
            }
        };
        let half = match opts.representative {
            Representative::CdfMidpoint => solve_clamped(&f_mid, u),
            Representative::RandomEndpoint => {
                if rng.random::<bool>() {
                    solve_clamped(&f_at, u)
                } else {
                    solve_clamped(&f_left, u)
                }
            }
        };
        Ok(Proposal::accept(Draw::Interval { lo, hi, half: half.clamp(lo, hi) }))
    };

    let outcome = run_chunked(seed, n_target, opts, eval)?;
    let accepted = outcome.draws.len();
    let x_data = vec![x as f64];
    let set = SampleSet {
        draws: outcome.draws,
        weights: None,
        meta: make_meta(
            dge as &dyn Dge,
            &x_data,
            Some(0.0),
            accepted,
            outcome.proposals_used,
            seed,
            opts,
        ),
    };
    if accepted == 0 {
        return Err(Error::ZeroMassEvent { proposals: opts.budget });
    }
    if accepted < n_target {
        return Err(Error::BudgetExhausted {
            budget: opts.budget,
            accepted,
            target: n_target,
            partial: Box::new(set),
        });
    }
    Ok(set)
}

/// I.i.d. draws from a tabulated 1-d density via the interpolated inverse
/// CDF.
pub fn sample_from_density(
    fd: &FiducialDensity,
    n_target: usize,
    seed: u64,
) -> Result<SampleSet> {
    if fd.grid.dim() != 1 {
        return Err(Error::Dimension("direct density sampling needs a 1-d density".into()));
    }
    if n_target == 0 {
        return Err(Error::InvalidArgument("n_target must be >= 1".into()));
    }
    let mut rng = substream(seed, 1);
    let mut draws = Vec::with_capacity(n_target);
    for _ in 0..n_target {
        let u: f64 = rng.random();
        // Quantile levels are open-interval; nudge the endpoints.
        let q = u.clamp(1e-15, 1.0 - 1e-15);
        draws.push(Draw::Point(vec![fd.quantile(q)?]));
    }
    Ok(SampleSet {
        draws,
        weights: None,
        meta: SampleMeta {
            model_id: "tabulated-density".into(),
            data: Vec::new(),
            epsilon: None,
            proposals_used: n_target as u64,
            acceptance_rate: 1.0,
            seed,
            norm: Norm::L2,
            workers: 1,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::tabulate_gfd;
    use crate::grid::{ParamBox, ParameterGrid};
    use crate::model::{
        make_binomial, make_geometric, make_normal_location, make_normal_location_scale,
        make_two_instrument, make_two_instrument_marginal,
    };
    use crate::stats::{ecdf_sorted, ks_distance, normal_cdf};

    /// G(u, xi) = xi: the degenerate model fits any observation exactly.
    struct Degenerate;
    impl Dge for Degenerate {
        fn model_id(&self) -> String {
            "degenerate".into()
        }
        fn data_dim(&self) -> usize {
            1
        }
        fn param_dim(&self) -> usize {
            1
        }
        fn noise_dim(&self) -> usize {
            1
        }
        fn param_space(&self) -> &ParamBox {
            use std::sync::OnceLock;
            static B: OnceLock<ParamBox> = OnceLock::new();
            B.get_or_init(|| ParamBox::new(vec![-10.0], vec![10.0]).unwrap())
        }
        fn forward(&self, _u: &[f64], xi: &[f64]) -> Vec<f64> {
            vec![xi[0]]
        }
        fn sample_noise(&self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
            vec![rng.random()]
        }
    }

    #[test]
    fn degenerate_model_is_a_point_mass_with_full_acceptance() {
        let grid = ParameterGrid::line(-10.0, 10.0, 100).unwrap();
        let opts = SamplerOptions { refine_iters: 40, ..Default::default() };
        let s = sample_gfd_eps(&Degenerate, &[3.25], 0.05, 500, &grid, 7, &opts).unwrap();
        assert_eq!(s.meta.acceptance_rate, 1.0);
        assert_eq!(s.meta.proposals_used, 500);
        for v in s.coordinate(0) {
            assert!((v - 3.25).abs() < 1e-3, "draw {v}");
        }
    }

    #[test]
    fn single_observation_location_draws_are_normal_around_x() {
        let m = make_normal_location(1).unwrap();
        let x = 1.2;
        let grid = ParameterGrid::line(x - 9.0, x + 9.0, 301).unwrap();
        let opts = SamplerOptions { refine_iters: 40, ..Default::default() };
        let s = sample_gfd_eps(&m, &[x], 0.05, 10_000, &grid, 11, &opts).unwrap();
        let d = ks_distance(&s.coordinate(0), |t| normal_cdf(t - x));
        assert!(d < 0.02, "KS = {d}");
    }

    #[test]
    fn identical_seeds_reproduce_bit_for_bit_across_worker_counts() {
        let m = make_normal_location_scale(3).unwrap();
        let x = [0.1, 0.5, -0.4];
        let grid = ParameterGrid::from_box(
            &ParamBox::new(vec![-2.0, 0.05], vec![2.0, 2.5]).unwrap(),
            &[25, 25],
        )
        .unwrap();
        let one = SamplerOptions { workers: 1, ..Default::default() };
        let four = SamplerOptions { workers: 4, ..Default::default() };
        let a = sample_gfd_eps(&m, &x, 0.35, 400, &grid, 99, &one).unwrap();
        let b = sample_gfd_eps(&m, &x, 0.35, 400, &grid, 99, &one).unwrap();
        let c = sample_gfd_eps(&m, &x, 0.35, 400, &grid, 99, &four).unwrap();
        assert_eq!(a.draws, b.draws);
        assert_eq!(a.meta.proposals_used, b.meta.proposals_used);
        assert_eq!(a.draws, c.draws);
        assert_eq!(a.meta.proposals_used, c.meta.proposals_used);
    }

    #[test]
    fn draws_stay_inside_the_parameter_box_and_rate_is_exact() {
        let m = make_normal_location_scale(3).unwrap();
        let x = [0.0, 0.8, -0.5];
        let grid = ParameterGrid::from_box(
            &ParamBox::new(vec![-2.0, 0.05], vec![2.0, 2.5]).unwrap(),
            &[25, 25],
        )
        .unwrap();
        let s =
            sample_gfd_eps(&m, &x, 0.4, 300, &grid, 5, &SamplerOptions::default()).unwrap();
        assert_eq!(
            s.meta.acceptance_rate,
            s.len() as f64 / s.meta.proposals_used as f64
        );
        for d in &s.draws {
            if let Draw::Point(p) = d {
                assert!(m.param_space().contains(p), "{p:?} escaped the box");
            }
        }
    }

    #[test]
    fn tiny_epsilon_exhausts_the_budget_with_partial_sample() {
        let m = make_normal_location_scale(5).unwrap();
        let x = [0.0, 1.0, -1.0, 0.5, 2.0];
        let grid = ParameterGrid::from_box(
            &ParamBox::new(vec![-3.0, 0.05], vec![3.0, 3.0]).unwrap(),
            &[20, 20],
        )
        .unwrap();
        let opts = SamplerOptions { budget: 2000, ..Default::default() };
        match sample_gfd_eps(&m, &x, 1e-9, 50, &grid, 3, &opts) {
            Err(Error::BudgetExhausted { budget, accepted, target, partial }) => {
                assert_eq!(budget, 2000);
                assert_eq!(target, 50);
                assert_eq!(partial.len(), accepted);
                assert_eq!(partial.meta.proposals_used, 2000);
            }
            other => panic!("expected BudgetExhausted, got {other:?}"),
        }
    }

    #[test]
    fn runaway_argmin_walk_raises_grid_too_coarse() {
        // Adversarial objective: exactly constant on the midpoint lattice
        // (so the coarse scan learns nothing and anchors at a random tied
        // node) but strictly decreasing off-lattice. Every refinement window
        // then bottoms out at its right face and the re-anchoring walk never
        // settles: the grid genuinely cannot bracket the argmin.
        struct OffLatticeDescent;
        impl Dge for OffLatticeDescent {
            fn model_id(&self) -> String {
                "off-lattice-descent".into()
            }
            fn data_dim(&self) -> usize {
                1
            }
            fn param_dim(&self) -> usize {
                1
            }
            fn noise_dim(&self) -> usize {
                1
            }
            fn param_space(&self) -> &ParamBox {
                use std::sync::OnceLock;
                static B: OnceLock<ParamBox> = OnceLock::new();
                B.get_or_init(|| ParamBox::new(vec![0.0], vec![400.0]).unwrap())
            }
            fn forward(&self, _u: &[f64], xi: &[f64]) -> Vec<f64> {
                let t = xi[0];
                // Midpoints of a 200-cell grid over [0, 400] are the odd
                // integers.
                let half = (t - 1.0) / 2.0;
                let on_lattice = (half - half.round()).abs() < 1e-9;
                vec![if on_lattice { 5.0 } else { 6.0 - 0.01 * t }]
            }
            fn sample_noise(&self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
                vec![rng.random()]
            }
        }
        let grid = ParameterGrid::line(0.0, 400.0, 200).unwrap();
        let opts = SamplerOptions { budget: 4096, ..Default::default() };
        let err = sample_gfd_eps(&OffLatticeDescent, &[0.0], 0.5, 10, &grid, 1, &opts)
            .unwrap_err();
        assert!(matches!(err, Error::GridTooCoarse { .. }), "got {err:?}");
    }

    #[test]
    fn exact_two_instrument_conditional_matches_the_chosen_instrument() {
        let m = make_two_instrument(1.0, 10.0).unwrap();
        let opts = SamplerOptions::default();
        for (machine, sigma) in [(1.0f64, 1.0f64), (2.0, 10.0)] {
            let s = sample_gfd_exact(&m, &[0.0, machine], 10_000, 17, &opts).unwrap();
            let d = ks_distance(&s.coordinate(0), |t| normal_cdf(t / sigma));
            assert!(d < 0.03, "machine {machine}: KS = {d}");
            // The label match is a fair-coin event.
            assert!((s.meta.acceptance_rate - 0.5).abs() < 0.05);
        }
    }

    #[test]
    fn exact_two_instrument_marginal_matches_the_even_mixture() {
        let m = make_two_instrument_marginal(1.0, 10.0).unwrap();
        let s = sample_gfd_exact(&m, &[0.0], 10_000, 19, &SamplerOptions::default()).unwrap();
        assert_eq!(s.meta.acceptance_rate, 1.0);
        let d = ks_distance(&s.coordinate(0), |t| {
            0.5 * normal_cdf(t) + 0.5 * normal_cdf(t / 10.0)
        });
        assert!(d < 0.03, "KS = {d}");
    }

    #[test]
    fn eps_sampler_agrees_with_exact_conditioning_on_the_two_instrument_model() {
        // Dual route: the generic near-miss sampler at small epsilon must
        // reproduce the exact zero-residual conditional law.
        let m = make_two_instrument(1.0, 10.0).unwrap();
        let x = [0.0, 1.0];
        let grid = ParameterGrid::line(-12.0, 12.0, 201).unwrap();
        let opts = SamplerOptions { refine_iters: 40, ..Default::default() };
        let s = sample_gfd_eps(&m, &x, 1e-3, 4000, &grid, 23, &opts).unwrap();
        let d = ks_distance(&s.coordinate(0), |t| normal_cdf(t));
        assert!(d < 0.03, "KS = {d}");
    }

    #[test]
    fn discrete_geometric_interval_endpoints_have_the_envelope_laws() {
        let g = make_geometric();
        let n = 3i64;
        let s = sample_gfd_discrete(&g, n, 20_000, 29, &SamplerOptions::default()).unwrap();
        let (mut lo, half, mut hi) = s.interval_parts();
        lo.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        hi.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let mut half_sorted = half.clone();
        half_sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let mc = 3.0 / (s.len() as f64).sqrt();
        for k in 1..40 {
            let p = k as f64 / 40.0;
            let q = 1.0 - p;
            let h_plus = 1.0 - q.powi(3);
            let h_minus = 1.0 - q.powi(2);
            let h_half = 0.5 * (h_plus + h_minus);
            // Lower endpoints follow the upper envelope, upper endpoints the
            // lower envelope, and representatives the half correction.
            assert!((ecdf_sorted(&lo, p) - h_plus).abs() < mc, "lo at {p}");
            assert!((ecdf_sorted(&hi, p) - h_minus).abs() < mc, "hi at {p}");
            assert!((ecdf_sorted(&half_sorted, p) - h_half).abs() < mc, "half at {p}");
            // And the empirical half CDF sits inside the envelope +- noise.
            let e = ecdf_sorted(&half_sorted, p);
            assert!(e >= h_minus - mc && e <= h_plus + mc);
        }
    }

    #[test]
    fn discrete_geometric_first_success_fills_the_upper_range() {
        // Observed N = 1: F(0, p) = 0 never binds, so the interval is
        // [solve(F(1, .) = u), top of range] = [u, hi).
        let g = make_geometric();
        let s = sample_gfd_discrete(&g, 1, 2000, 31, &SamplerOptions::default()).unwrap();
        let (lo, _, hi) = s.interval_parts();
        let top = g.param_space().hi()[0];
        for (&l, &h) in lo.iter().zip(&hi) {
            assert!((h - top).abs() < 1e-9, "upper endpoint {h} should be the range top");
            assert!(l < h);
        }
        // Small u gives an interval reaching from near 0 to the top.
        let d = ks_distance(&lo, |t| t.clamp(0.0, 1.0));
        assert!(d < 0.03, "lower endpoints should be uniform, KS = {d}");
    }

    #[test]
    fn random_endpoint_summaries_realize_the_same_law() {
        // The randomized selection is the mixture the midpoint convention
        // realizes deterministically: both representative streams must have
        // the half-corrected CDF.
        let g = make_geometric();
        let mid_opts = SamplerOptions::default();
        let rnd_opts =
            SamplerOptions { representative: Representative::RandomEndpoint, ..Default::default() };
        let a = sample_gfd_discrete(&g, 3, 15_000, 59, &mid_opts).unwrap();
        let b = sample_gfd_discrete(&g, 3, 15_000, 59, &rnd_opts).unwrap();
        let (_, half_a, _) = a.interval_parts();
        let (_, half_b, _) = b.interval_parts();
        let mut sorted_a = half_a;
        sorted_a.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap());
        let mc = 3.0 / (15_000f64).sqrt();
        let d = ks_distance(&half_b, |t| ecdf_sorted(&sorted_a, t));
        assert!(d < mc, "KS between conventions: {d}");
    }

    #[test]
    fn impossible_exact_fit_is_a_zero_mass_event() {
        // Observed label 3 can never be produced by the coin, so no noise
        // draw admits a zero-residual fit.
        let m = make_two_instrument(1.0, 10.0).unwrap();
        let opts = SamplerOptions { budget: 2048, ..Default::default() };
        let err = sample_gfd_exact(&m, &[0.0, 3.0], 100, 5, &opts).unwrap_err();
        assert!(matches!(err, Error::ZeroMassEvent { .. }), "got {err:?}");
    }

    #[test]
    fn discrete_binomial_envelope_matches_the_bounds_module() {
        let b = make_binomial(3).unwrap();
        let s = sample_gfd_discrete(&b, 1, 20_000, 37, &SamplerOptions::default()).unwrap();
        let grid = ParameterGrid::line(1e-6, 1.0 - 1e-6, 200).unwrap();
        let bounds = crate::discrete::discrete_bounds(&b, 1, &grid).unwrap();
        let (_, half, _) = s.interval_parts();
        let mut half_sorted = half;
        half_sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let mc = 3.0 / (s.len() as f64).sqrt();
        for (k, &p) in bounds.params.iter().enumerate() {
            let e = ecdf_sorted(&half_sorted, p);
            assert!(
                e >= bounds.lower[k] - mc && e <= bounds.upper[k] + mc,
                "ecdf {e} outside envelope [{}, {}] at p = {p}",
                bounds.lower[k],
                bounds.upper[k]
            );
        }
    }

    #[test]
    fn density_draws_match_their_source() {
        // Uniform tabulation.
        let grid = ParameterGrid::line(0.0, 1.0, 100).unwrap();
        let uniform = FiducialDensity {
            grid: grid.clone(),
            values: vec![1.0; 100],
            normalizer: 1.0,
            failed_nodes: 0,
            source: crate::density::DensitySource::JacobianWeighted,
        };
        let s = sample_from_density(&uniform, 10_000, 41).unwrap();
        let mean = crate::stats::mean(&s.coordinate(0));
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");

        // Standard normal tabulation: lower-tail fraction below -1.96.
        let m = make_normal_location(1).unwrap();
        let ngrid = ParameterGrid::line(-8.0, 8.0, 2001).unwrap();
        let fd = tabulate_gfd(&m, &[0.0], &ngrid).unwrap();
        let s2 = sample_from_density(&fd, 10_000, 43).unwrap();
        let frac =
            s2.coordinate(0).iter().filter(|&&v| v < -1.959963984540054).count() as f64 / 10_000.0;
        assert!((frac - 0.025).abs() < 0.006, "tail fraction {frac}");

        // Delta-like density: all draws in the hot cell.
        let mut delta_vals = vec![0.0; 100];
        delta_vals[42] = 100.0;
        let delta = FiducialDensity {
            grid: grid.clone(),
            values: delta_vals,
            normalizer: 1.0,
            failed_nodes: 0,
            source: crate::density::DensitySource::JacobianWeighted,
        };
        let s3 = sample_from_density(&delta, 500, 47).unwrap();
        for v in s3.coordinate(0) {
            assert!((0.42..=0.43).contains(&v), "draw {v} outside the hot cell");
        }
    }

    #[test]
    fn eps_ladder_converges_to_the_tabulated_density() {
        // Small-scale version of the convergence contract: KS against the
        // tabulated density is nonincreasing in epsilon up to MC noise.
        let m = make_normal_location_scale(3).unwrap();
        let x = [-0.2, 0.15, 0.4];
        let sample_grid = ParameterGrid::from_box(
            &ParamBox::new(vec![-1.5, 0.02], vec![1.5, 2.0]).unwrap(),
            &[30, 30],
        )
        .unwrap();
        let density_grid = ParameterGrid::from_box(
            &ParamBox::new(vec![-1.5, 0.02], vec![1.5, 2.0]).unwrap(),
            &[160, 160],
        )
        .unwrap();
        let fd = tabulate_gfd(&m, &x, &density_grid).unwrap();
        let marg_mu = fd.marginal(0).unwrap();
        let marg_sigma = fd.marginal(1).unwrap();
        let n_draws = 3000;
        let mut ks = Vec::new();
        for eps in [0.5, 0.25, 0.12] {
            let s = sample_gfd_eps(&m, &x, eps, n_draws, &sample_grid, 53, &SamplerOptions::default())
                .unwrap();
            let d_mu = ks_distance(&s.coordinate(0), |t| marg_mu.cdf(t).unwrap());
            let d_sigma = ks_distance(&s.coordinate(1), |t| marg_sigma.cdf(t).unwrap());
            ks.push(d_mu.max(d_sigma));
        }
        let mc_noise = 1.36 / (n_draws as f64).sqrt();
        assert!(ks[2] < 0.08, "final KS {:.4}", ks[2]);
        assert!(ks[1] <= ks[0] + 2.0 * mc_noise, "ladder: {ks:?}");
        assert!(ks[2] <= ks[1] + 2.0 * mc_noise, "ladder: {ks:?}");
    }
}
