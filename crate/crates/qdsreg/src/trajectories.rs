//! Monte-Carlo jump unraveling of the predual dynamics.
//!
//! Between jumps the state follows the non-unitary no-jump drift
//! `ψ_t = e^{-tG} ψ`; the squared norm is the survival probability, and jump
//! times are sampled by inverting it against a uniform draw. Jumps apply a
//! Kraus operator with probability proportional to `‖L_k ψ‖²` and
//! renormalize. A trajectory that spends its whole jump budget before the
//! horizon is recorded as exploded — the finite-truncation face of a jump
//! process that accumulates infinitely many events in finite time.
//!
//! Each trajectory owns a counter-based RNG stream keyed by
//! `(base_seed, index)`, so ensembles are bit-reproducible regardless of
//! thread count.

use ndarray::prelude::*;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::linalg::{self, dagger};
use crate::lindblad::LindbladGenerator;
use crate::{Error, Result};

/// Fixed parameters of one unraveling run.
#[derive(Clone, Copy, Debug)]
pub struct TrajectoryOpts {
    pub t_max: f64,
    pub dt: f64,
    pub jump_cap: usize,
}

/// One unraveled trajectory.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub index: u64,
    pub jump_times: Vec<f64>,
    pub jump_channels: Vec<usize>,
    pub final_time: f64,
    /// Jump budget spent before the horizon.
    pub exploded: bool,
    /// Norm of the state at `final_time` relative to the last
    /// renormalization, i.e. the square root of the survival since the last
    /// jump.
    pub final_state_norm: f64,
    /// Normalized state at `final_time`.
    pub final_state: Array1<C64>,
}

/// Order-independent aggregate of an ensemble.
#[derive(Clone, Debug)]
pub struct EnsembleSummary {
    pub n_traj: usize,
    pub explosion_fraction: f64,
    /// Fraction of non-exploded trajectories: the Monte-Carlo estimate of
    /// `⟨ψ₀|P^min_t(I)|ψ₀⟩` under the jump-cap proxy.
    pub survival_estimate: f64,
    /// Histogram over jump counts, `0 ..= jump_cap`.
    pub jump_histogram: Vec<u64>,
    /// Mean time of the cap-th jump over exploded trajectories.
    pub mean_time_to_cap: Option<f64>,
}

/// Precomputed no-jump drift in a form that evaluates survival cheaply.
enum Drift {
    /// `G` diagonal: componentwise decay.
    Diagonal(Array1<C64>),
    /// `G` Hermitian: spectral decay in a fixed eigenbasis.
    Hermitian {
        vals: Array1<f64>,
        vecs: Array2<C64>,
    },
    /// Fixed-step fourth-order integration of `ψ' = -Gψ`.
    General(Array2<C64>),
}

struct SparseOp {
    entries: Vec<(usize, usize, C64)>,
    dim: usize,
}

impl SparseOp {
    fn from_dense(m: &Array2<C64>) -> Self {
        let mut entries = Vec::new();
        for ((i, j), z) in m.indexed_iter() {
            if z.norm() != 0.0 {
                entries.push((i, j, *z));
            }
        }
        SparseOp {
            entries,
            dim: m.nrows(),
        }
    }

    fn apply(&self, psi: &Array1<C64>) -> Array1<C64> {
        let mut out = Array1::zeros(self.dim);
        for &(i, j, z) in &self.entries {
            out[i] += z * psi[j];
        }
        out
    }
}

fn norm2(psi: &Array1<C64>) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum()
}

fn build_drift(l: &LindbladGenerator) -> Result<Drift> {
    let g = l.g();
    let n = g.nrows();
    let mut off = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                off = off.max(g[[i, j]].norm());
            }
        }
    }
    if off == 0.0 {
        return Ok(Drift::Diagonal(g.diag().to_owned()));
    }
    let scale = 1.0 + linalg::max_abs(g);
    if linalg::hermiticity_defect(g) <= 1e-10 * scale {
        let (vals, vecs) = linalg::eigh(g)?;
        return Ok(Drift::Hermitian { vals, vecs });
    }
    Ok(Drift::General(g.clone()))
}

/// One RK4 step of `ψ' = -Gψ`.
fn rk4_step(g: &Array2<C64>, psi: &Array1<C64>, dt: f64) -> Array1<C64> {
    let f = |p: &Array1<C64>| -> Array1<C64> { g.dot(p).mapv(|z| -z) };
    let h = C64::new(dt, 0.0);
    let k1 = f(psi);
    let k2 = f(&(psi + &k1.mapv(|z| z * h * 0.5)));
    let k3 = f(&(psi + &k2.mapv(|z| z * h * 0.5)));
    let k4 = f(&(psi + &k3.mapv(|z| z * h)));
    psi + &(k1 + k2.mapv(|z| z * 2.0) + k3.mapv(|z| z * 2.0) + k4).mapv(|z| z * h / 6.0)
}

/// Outcome of one no-jump segment.
enum Segment {
    /// Survived to the horizon; normalized state and its survival norm.
    Survived { state: Array1<C64>, norm: f64 },
    /// Survival crossed the draw at this offset; normalized state there.
    Jumped { tau: f64, state: Array1<C64> },
}

fn run_segment(
    drift: &Drift,
    psi: &Array1<C64>,
    horizon: f64,
    u: f64,
    dt: f64,
) -> Segment {
    match drift {
        Drift::Diagonal(g) => {
            let weights: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
            let rates: Vec<f64> = g.iter().map(|z| 2.0 * z.re).collect();
            let survival = |tau: f64| -> f64 {
                weights
                    .iter()
                    .zip(&rates)
                    .map(|(w, r)| w * (-r * tau).exp())
                    .sum()
            };
            let state_at = |tau: f64| -> Array1<C64> {
                Array1::from_iter(
                    psi.iter()
                        .zip(g.iter())
                        .map(|(z, gi)| z * (-gi * C64::new(tau, 0.0)).exp()),
                )
            };
            segment_closed_form(survival, state_at, horizon, u, dt)
        }
        Drift::Hermitian { vals, vecs } => {
            let coeff = dagger(vecs).dot(psi);
            let weights: Vec<f64> = coeff.iter().map(|z| z.norm_sqr()).collect();
            let survival = |tau: f64| -> f64 {
                weights
                    .iter()
                    .zip(vals.iter())
                    .map(|(w, d)| w * (-2.0 * d * tau).exp())
                    .sum()
            };
            let state_at = |tau: f64| -> Array1<C64> {
                let evolved = Array1::from_iter(
                    coeff
                        .iter()
                        .zip(vals.iter())
                        .map(|(z, d)| z * C64::new((-d * tau).exp(), 0.0)),
                );
                vecs.dot(&evolved)
            };
            segment_closed_form(survival, state_at, horizon, u, dt)
        }
        Drift::General(g) => {
            let mut prev = psi.clone();
            let mut t = 0.0f64;
            let mut s_prev = norm2(&prev);
            loop {
                if t >= horizon - 1e-15 {
                    let n = s_prev.sqrt();
                    let state = prev.mapv(|z| z / C64::new(n, 0.0));
                    return Segment::Survived { state, norm: n };
                }
                let step = dt.min(horizon - t);
                let cur = rk4_step(g, &prev, step);
                let s_cur = norm2(&cur);
                if s_cur <= u {
                    // root of the linear interpolant of the sampled survival
                    let frac = if s_prev > s_cur {
                        ((s_prev - u) / (s_prev - s_cur)).clamp(0.0, 1.0)
                    } else {
                        1.0
                    };
                    let tau = t + frac * step;
                    let state = rk4_step(g, &prev, frac * step);
                    let n = norm2(&state).sqrt();
                    let state = state.mapv(|z| z / C64::new(n, 0.0));
                    return Segment::Jumped {
                        tau: tau.max(f64::MIN_POSITIVE),
                        state,
                    };
                }
                prev = cur;
                s_prev = s_cur;
                t += step;
            }
        }
    }
}

/// Shared marching + bisection for drifts with closed-form survival.
fn segment_closed_form(
    survival: impl Fn(f64) -> f64,
    state_at: impl Fn(f64) -> Array1<C64>,
    horizon: f64,
    u: f64,
    dt: f64,
) -> Segment {
    if survival(horizon) > u {
        let state = state_at(horizon);
        let n = norm2(&state).sqrt();
        return Segment::Survived {
            state: state.mapv(|z| z / C64::new(n, 0.0)),
            norm: n,
        };
    }
    let mut lo = 0.0f64;
    let mut t = dt.min(horizon);
    while survival(t) > u {
        lo = t;
        t = (t + dt).min(horizon);
    }
    let mut hi = t;
    // bisection on the exact survival, tolerance 1e-10 in probability
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let s = survival(mid);
        if (s - u).abs() <= 1e-10 || (hi - lo) < 1e-15 * (1.0 + hi) {
            break;
        }
        if s > u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = (0.5 * (lo + hi)).max(f64::MIN_POSITIVE);
    let state = state_at(tau);
    let n = norm2(&state).sqrt();
    Segment::Jumped {
        tau,
        state: state.mapv(|z| z / C64::new(n, 0.0)),
    }
}

/// Unravel a single trajectory with the RNG stream `(base_seed, index)`.
pub fn run_trajectory(
    l: &LindbladGenerator,
    psi0: &Array1<C64>,
    opts: &TrajectoryOpts,
    base_seed: u64,
    index: u64,
) -> Result<TrajectoryRecord> {
    let drift = build_drift(l)?;
    let kraus: Vec<SparseOp> = l.kraus().iter().map(SparseOp::from_dense).collect();
    run_trajectory_with(l, &drift, &kraus, psi0, opts, base_seed, index)
}

fn run_trajectory_with(
    l: &LindbladGenerator,
    drift: &Drift,
    kraus: &[SparseOp],
    psi0: &Array1<C64>,
    opts: &TrajectoryOpts,
    base_seed: u64,
    index: u64,
) -> Result<TrajectoryRecord> {
    if opts.dt <= 0.0 {
        return Err(Error::InvalidArg("dt must be positive".into()));
    }
    if opts.jump_cap < 1 {
        return Err(Error::InvalidArg("jump_cap must be at least 1".into()));
    }
    let d = l.space().total_dim();
    if psi0.len() != d {
        return Err(Error::Dimension("initial state length mismatch".into()));
    }
    if (norm2(psi0) - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArg("initial state must be normalized".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index);

    let mut psi = psi0.clone();
    let mut t = 0.0f64;
    let mut jump_times = Vec::new();
    let mut jump_channels = Vec::new();
    let mut exploded = false;
    let (final_state, final_norm, final_time) = loop {
        let u: f64 = loop {
            let v: f64 = rng.gen();
            if v > 0.0 {
                break v;
            }
        };
        match run_segment(drift, &psi, opts.t_max - t, u, opts.dt) {
            Segment::Survived { state, norm } => {
                break (state, norm, opts.t_max);
            }
            Segment::Jumped { tau, state } => {
                let rates: Vec<f64> = kraus.iter().map(|k| norm2(&k.apply(&state))).collect();
                let total: f64 = rates.iter().sum();
                if total <= 0.0 {
                    // no channel can fire; the survival plateau ends the run
                    break (state, u.sqrt(), opts.t_max);
                }
                let mut w: f64 = rng.gen::<f64>() * total;
                let mut channel = rates.len() - 1;
                for (k, r) in rates.iter().enumerate() {
                    if w < *r {
                        channel = k;
                        break;
                    }
                    w -= r;
                }
                let jumped = kraus[channel].apply(&state);
                let n = norm2(&jumped).sqrt();
                psi = jumped.mapv(|z| z / C64::new(n, 0.0));
                t += tau;
                jump_times.push(t);
                jump_channels.push(channel);
                if jump_times.len() >= opts.jump_cap {
                    exploded = true;
                    break (psi.clone(), 1.0, t);
                }
            }
        }
    };
    Ok(TrajectoryRecord {
        index,
        jump_times,
        jump_channels,
        final_time,
        exploded,
        final_state_norm: final_norm,
        final_state,
    })
}

/// Run `n_traj` independent trajectories and aggregate.
///
/// Trajectories are distributed over the ambient rayon pool; the aggregation
/// is by trajectory index, so the summary is bit-identical for any thread
/// count.
pub fn ensemble(
    l: &LindbladGenerator,
    psi0: &Array1<C64>,
    opts: &TrajectoryOpts,
    n_traj: usize,
    base_seed: u64,
) -> Result<(EnsembleSummary, Vec<TrajectoryRecord>)> {
    if n_traj < 1 {
        return Err(Error::InvalidArg("n_traj must be at least 1".into()));
    }
    let drift = build_drift(l)?;
    let kraus: Vec<SparseOp> = l.kraus().iter().map(SparseOp::from_dense).collect();
    let records: Vec<TrajectoryRecord> = (0..n_traj as u64)
        .into_par_iter()
        .map(|i| run_trajectory_with(l, &drift, &kraus, psi0, opts, base_seed, i))
        .collect::<Result<Vec<_>>>()?;

    let mut histogram = vec![0u64; opts.jump_cap + 1];
    let mut n_exploded = 0usize;
    let mut cap_time_sum = 0.0f64;
    for r in &records {
        let n = r.jump_times.len().min(opts.jump_cap);
        histogram[n] += 1;
        if r.exploded {
            n_exploded += 1;
            cap_time_sum += r.final_time;
        }
    }
    let explosion_fraction = n_exploded as f64 / n_traj as f64;
    Ok((
        EnsembleSummary {
            n_traj,
            explosion_fraction,
            survival_estimate: 1.0 - explosion_fraction,
            jump_histogram: histogram,
            mean_time_to_cap: if n_exploded > 0 {
                Some(cap_time_sum / n_exploded as f64)
            } else {
                None
            },
        },
        records,
    ))
}
