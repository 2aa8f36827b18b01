//! Conservativity certificates and non-unitality witnesses.
//!
//! Every operator inequality `A ⪯ B` is decided by the smallest eigenvalue
//! of the interior-block compression of `B − A`: a polynomial generator of
//! order `p` corrupts the last `p` rows per mode of the truncation, so those
//! rows never enter a verdict. A pass at a single truncation is evidence,
//! not proof; callers are expected to sweep increasing dimensions.

use std::collections::BTreeMap;

use ndarray::prelude::*;
use ndarray_linalg::SVD;
use num_complex::Complex64 as C64;

use crate::fock::{eval_polynomial, CoeffBlock, ModeFactor, PolyTerm};
use crate::linalg::{self, dagger};
use crate::lindblad::LindbladGenerator;
use crate::minimal::{default_t_cap, q_epsilon};
use crate::space::{compress, compress_rows, OperatorMatrix, SpaceSpec};
use crate::{Error, Result};

/// Margin tolerance for interior-block PSD checks.
pub const INEQ_TOL: f64 = 1e-9;

/// Residual below which a deficiency direction is declared, provided the
/// trend over truncations decreases and the candidate carries essentially
/// no boundary mass.
pub const DEFICIENCY_RESIDUAL_TOL: f64 = 1e-4;
pub const DEFICIENCY_BOUNDARY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CertKind {
    Reference,
    LambdaPair,
    Balance,
    Deficiency,
    Witness,
}

impl CertKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CertKind::Reference => "reference",
            CertKind::LambdaPair => "lambda_pair",
            CertKind::Balance => "balance",
            CertKind::Deficiency => "deficiency",
            CertKind::Witness => "witness",
        }
    }
}

/// Outcome of one certificate evaluation.
#[derive(Clone, Debug)]
pub struct CertificateReport {
    pub kind: CertKind,
    pub passed: bool,
    /// Smallest relevant eigenvalue (inequalities) or residual (deficiency).
    pub margin: f64,
    pub constants: BTreeMap<String, f64>,
    pub interior_buffer: usize,
    pub truncation: SpaceSpec,
    pub details: String,
}

fn min_eig_interior(m: &Array2<C64>, interior: &[usize]) -> Result<f64> {
    linalg::min_eig_hermitian(&compress(m, interior))
}

/// Smallest `c` with `M ⪯ c P` on the given block, i.e. the largest
/// eigenvalue of `P^{-1/2} M P^{-1/2}`. `P` must be positive definite on the
/// block; a numerically diagonal `P` is scaled directly.
fn smallest_feasible_bound(m: &Array2<C64>, p: &Array2<C64>) -> Result<f64> {
    let n = p.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let mut off = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                off = off.max(p[[i, j]].norm());
            }
        }
    }
    let scaled = if off == 0.0 {
        let mut s = Array1::zeros(n);
        for i in 0..n {
            let d = p[[i, i]].re;
            if d <= 0.0 {
                return Err(Error::InvalidArg(
                    "dominating operator is not positive definite on the interior".into(),
                ));
            }
            s[i] = 1.0 / d.sqrt();
        }
        Array2::from_shape_fn((n, n), |(i, j)| m[[i, j]] * C64::new(s[i] * s[j], 0.0))
    } else {
        let (vals, vecs) = linalg::eigh(p)?;
        if vals[0] <= 0.0 {
            return Err(Error::InvalidArg(
                "dominating operator is not positive definite on the interior".into(),
            ));
        }
        let inv_sqrt = linalg::from_eigh(&vals, &vecs, |x| C64::new(1.0 / x.sqrt(), 0.0));
        inv_sqrt.dot(m).dot(&inv_sqrt)
    };
    let vals = linalg::eigvalsh(&scaled)?;
    Ok(vals[vals.len() - 1])
}

/// Interior-block check of `A ⪯ B`.
///
/// `margin` is the smallest eigenvalue of the compressed `B − A`; the check
/// passes when it is not below `-1e-9`.
pub fn check_operator_inequality(
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    buffer: usize,
) -> Result<CertificateReport> {
    if a.space() != b.space() {
        return Err(Error::Dimension("operands live on different spaces".into()));
    }
    let interior = a.space().interior_indices(buffer)?;
    let diff = b.entries() - a.entries();
    let margin = min_eig_interior(&diff, &interior)?;
    Ok(CertificateReport {
        kind: CertKind::Reference,
        passed: margin >= -INEQ_TOL,
        margin,
        constants: BTreeMap::new(),
        interior_buffer: buffer,
        truncation: a.space().clone(),
        details: format!("interior block of size {}", interior.len()),
    })
}

/// Reference-operator certificate `L(Λ) ⪯ cΛ` on the interior block.
///
/// When `c` is absent the smallest feasible value is computed by a
/// congruence-transformed eigenvalue problem. The domination precondition
/// `Φ(I) ⪯ Λ` is checked first and a failure is reported, not raised. The
/// lower bound `I ⪯ Φ(I)` is recorded as strict or shifted (`Φ(I) + I`),
/// since gallery CP maps routinely annihilate the vacuum.
pub fn check_reference(
    l: &LindbladGenerator,
    lambda: &OperatorMatrix,
    c: Option<f64>,
    buffer: usize,
) -> Result<CertificateReport> {
    let space = l.space().clone();
    let interior = space.interior_indices(buffer)?;
    let d = space.total_dim();
    let eye = Array2::from_diag_elem(d, C64::new(1.0, 0.0));

    let lower = min_eig_interior(&(l.phi_identity() - &eye), &interior)?;
    let lower_form = if lower >= -INEQ_TOL { "strict" } else { "shifted" };
    let dom = min_eig_interior(&(lambda.entries() - l.phi_identity()), &interior)?;

    let l_lambda = l.heisenberg_apply(lambda.entries())?;
    let mut constants = BTreeMap::new();
    constants.insert("phi_lower_margin".into(), lower);
    constants.insert("domination_margin".into(), dom);

    let (c_used, margin) = match c {
        Some(c) => {
            let diff = lambda.entries().mapv(|z| z * C64::new(c, 0.0)) - &l_lambda;
            (c, min_eig_interior(&diff, &interior)?)
        }
        None => {
            let m_int = compress(&l_lambda, &interior);
            let p_int = compress(lambda.entries(), &interior);
            let c_star = smallest_feasible_bound(&m_int, &p_int)?;
            let diff = lambda.entries().mapv(|z| z * C64::new(c_star, 0.0)) - &l_lambda;
            (c_star, min_eig_interior(&diff, &interior)?)
        }
    };
    constants.insert("c".into(), c_used);

    let dom_ok = dom >= -INEQ_TOL;
    let margin_ok = margin >= -INEQ_TOL;
    Ok(CertificateReport {
        kind: CertKind::Reference,
        passed: dom_ok && margin_ok,
        margin,
        constants,
        interior_buffer: buffer,
        truncation: space,
        details: format!(
            "phi lower bound {lower_form}; domination margin {dom:.3e}; \
             c{} = {c_used:.6e}",
            if c.is_some() { "" } else { " (smallest feasible)" }
        ),
    })
}

/// Candidate constants for a Λ-pair check; absent entries are replaced by
/// the smallest feasible values on the interior block.
#[derive(Clone, Copy, Debug, Default)]
pub struct LambdaPairParams {
    pub eps: Option<f64>,
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
}

/// Result of [`check_lambda_pair`]: the report plus everything the direct
/// interaction-representation cross-check needs.
#[derive(Clone, Debug)]
pub struct LambdaPairOutcome {
    pub report: CertificateReport,
    /// Reduced generator with Hamiltonian `H − H_sa − Λ`.
    pub reduced: LindbladGenerator,
    pub h_int: OperatorMatrix,
    /// The derived growth rate `λ = c₀(c + c₁ + μc₂)`.
    pub lambda_rate: f64,
}

/// Spectral power of the positive part, clamping negative edge eigenvalues.
fn psd_power_clamped(m: &Array2<C64>, eps: f64) -> Result<(Array2<C64>, f64)> {
    let (vals, vecs) = linalg::eigh(m)?;
    let min_eig = vals[0];
    Ok((
        linalg::from_eigh(&vals, &vecs, |x| C64::new(x.max(0.0).powf(eps), 0.0)),
        min_eig,
    ))
}

/// Λ-pair certificate: verifies the power-domination inequalities
///
/// ```text
/// -μ H_int^ε ⪯ H_sa ⪯ μ H_int^ε,   0 ⪯ H_int ⪯ νΛ,
/// Φ(H_sa) ⪯ c₁Λ,   Φ(H_int^ε) ⪯ c₂Λ
/// ```
///
/// on the interior block, with `H_int = Λ + H_sa`, computes `c` from the
/// reduced generator's reference check, and reports
/// `c₀ = μ + (1+μ)ν` together with the growth rate `λ = c₀(c + c₁ + μc₂)`.
///
/// `eps` is scanned over {0.25, 0.5, 0.75} unless fixed by the caller.
pub fn check_lambda_pair(
    l: &LindbladGenerator,
    lambda: &OperatorMatrix,
    h_sa: &OperatorMatrix,
    params: LambdaPairParams,
    buffer: usize,
) -> Result<LambdaPairOutcome> {
    let space = l.space().clone();
    let interior = space.interior_indices(buffer)?;

    let h_int_m = lambda.entries() + h_sa.entries();
    let h_int = OperatorMatrix::hermitian(space.clone(), h_int_m.clone())?;
    let h_int_pos = min_eig_interior(&h_int_m, &interior)?;

    // reduced generator: Hamiltonian H₀ = H − H_sa − Λ
    let h0 = l.hamiltonian() - h_sa.entries() - lambda.entries();
    let reduced = l.with_hamiltonian(h0)?;
    let l0_lambda = reduced.heisenberg_apply(lambda.entries())?;
    let c = smallest_feasible_bound(
        &compress(&l0_lambda, &interior),
        &compress(lambda.entries(), &interior),
    )?;

    let phi_h_sa = l.phi_apply(h_sa.entries())?;
    let lam_int = compress(lambda.entries(), &interior);

    let eps_candidates: Vec<f64> = match params.eps {
        Some(e) => vec![e],
        None => vec![0.25, 0.5, 0.75],
    };

    // (eps, margins, constants, worst margin)
    let mut best: Option<(f64, [f64; 5], [f64; 4], f64)> = None;
    for &eps in &eps_candidates {
        let (h_pow, _clamp_floor) = psd_power_clamped(&h_int_m, eps)?;
        let phi_h_pow = l.phi_apply(&h_pow)?;
        let hpow_int = compress(&h_pow, &interior);

        let mu = match params.mu {
            Some(m) => m,
            None => {
                let hsa_int = compress(h_sa.entries(), &interior);
                let up = smallest_feasible_bound(&hsa_int, &hpow_int)?;
                let dn = smallest_feasible_bound(&hsa_int.mapv(|z| -z), &hpow_int)?;
                up.max(dn).max(0.0)
            }
        };
        let nu = match params.nu {
            Some(n) => n,
            None => smallest_feasible_bound(&compress(&h_int_m, &interior), &lam_int)?.max(0.0),
        };
        let c1 = match params.c1 {
            Some(v) => v,
            None => smallest_feasible_bound(&compress(&phi_h_sa, &interior), &lam_int)?,
        };
        let c2 = match params.c2 {
            Some(v) => v,
            None => smallest_feasible_bound(&compress(&phi_h_pow, &interior), &lam_int)?,
        };

        let scale = |m: &Array2<C64>, s: f64| m.mapv(|z| z * C64::new(s, 0.0));
        let margins = [
            min_eig_interior(&(&scale(&h_pow, mu) - h_sa.entries()), &interior)?,
            min_eig_interior(&(h_sa.entries() + &scale(&h_pow, mu)), &interior)?,
            min_eig_interior(&(&scale(lambda.entries(), nu) - &h_int_m), &interior)?,
            min_eig_interior(&(&scale(lambda.entries(), c1) - &phi_h_sa), &interior)?,
            min_eig_interior(&(&scale(lambda.entries(), c2) - &phi_h_pow), &interior)?,
        ];
        let worst = margins.iter().cloned().fold(f64::INFINITY, f64::min);
        let all_pass = worst >= -INEQ_TOL && h_int_pos >= -INEQ_TOL;
        if all_pass {
            best = Some((eps, margins, [mu, nu, c1, c2], worst));
            break;
        }
        match &best {
            Some((_, _, _, w)) if worst <= *w => {}
            _ => best = Some((eps, margins, [mu, nu, c1, c2], worst)),
        }
    }
    let (eps, margins, [mu, nu, c1, c2], worst) = best.expect("at least one eps candidate");

    let c0 = mu + (1.0 + mu) * nu;
    let lambda_rate = c0 * (c + c1 + mu * c2);
    let passed = worst >= -INEQ_TOL && h_int_pos >= -INEQ_TOL;

    let mut constants = BTreeMap::new();
    constants.insert("eps".into(), eps);
    constants.insert("mu".into(), mu);
    constants.insert("nu".into(), nu);
    constants.insert("c1".into(), c1);
    constants.insert("c2".into(), c2);
    constants.insert("c".into(), c);
    constants.insert("c0".into(), c0);
    constants.insert("lambda_rate".into(), lambda_rate);
    constants.insert("h_int_min_eig".into(), h_int_pos);

    let report = CertificateReport {
        kind: CertKind::LambdaPair,
        passed,
        margin: worst.min(h_int_pos),
        constants,
        interior_buffer: buffer,
        truncation: space,
        details: format!(
            "margins: H_sa below muH^eps {:.3e}, above -muH^eps {:.3e}, H_int below nuL {:.3e}, \
             Phi(H_sa) below c1L {:.3e}, Phi(H^eps) below c2L {:.3e}; H_int PSD {:.3e}",
            margins[0], margins[1], margins[2], margins[3], margins[4], h_int_pos
        ),
    };
    Ok(LambdaPairOutcome {
        report,
        reduced,
        h_int,
        lambda_rate,
    })
}

/// Direct cross-check of a passing Λ-pair: margins of `λΛ − L_t(Λ)` on the
/// interior block with `L_t` the interaction-representation generator of the
/// reduced part, at the given times.
pub fn interaction_chain_margins(
    outcome: &LambdaPairOutcome,
    lambda: &OperatorMatrix,
    times: &[f64],
    buffer: usize,
) -> Result<Vec<(f64, f64)>> {
    let interior = outcome.reduced.space().interior_indices(buffer)?;
    let rate = C64::new(outcome.lambda_rate, 0.0);
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let lt = outcome.reduced.interaction_picture(&outcome.h_int, t)?;
        let action = lt.heisenberg_apply(lambda.entries())?;
        let diff = lambda.entries().mapv(|z| z * rate) - &action;
        out.push((t, min_eig_interior(&diff, &interior)?));
    }
    Ok(out)
}

/// Candidate deficiency direction from the interior-row least-squares
/// system.
#[derive(Clone, Debug)]
pub struct DeficiencyResult {
    /// Smallest singular value of the interior-row system at the largest
    /// truncation.
    pub residual: f64,
    /// Corresponding right singular vector (unit norm).
    pub vector: Array1<C64>,
    /// Squared-norm fraction of the vector on the boundary buffer.
    pub boundary_mass: f64,
    /// `(dimension, residual)` per truncation, in the order given.
    pub truncation_trend: Vec<(usize, f64)>,
    /// Space of the largest truncation.
    pub space: SpaceSpec,
    /// Verdict under the declaration thresholds.
    pub detected: bool,
}

/// Search for a (−i)-deficiency direction of a symmetric polynomial
/// Hamiltonian.
///
/// For each dimension `d`, the interior rows of `H_d + iI` form a
/// rectangular system; its smallest singular value vanishes root-
/// exponentially with `d` when a normalizable solution of `H†ψ = −iψ`
/// exists, while for essentially self-adjoint controls it stays at or above
/// 1 (every singular value of a Hermitian matrix plus `iI` is `√(λ²+1)`).
/// Deficiency is declared when the residual falls below `1e-4` at the
/// largest dimension, decreases along the sweep, and the candidate carries
/// boundary mass below `1e-6`.
pub fn deficiency_search(
    h_terms: &[PolyTerm],
    spin_dim: usize,
    dims: &[usize],
    buffer: usize,
) -> Result<DeficiencyResult> {
    if dims.is_empty() {
        return Err(Error::InvalidArg("at least one truncation required".into()));
    }
    if dims.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArg("dimensions must be strictly increasing".into()));
    }
    let max_order = h_terms.iter().map(|t| t.order()).max().unwrap_or(0) as usize;
    if buffer < max_order {
        return Err(Error::InvalidArg(format!(
            "buffer {buffer} is below the polynomial order {max_order}"
        )));
    }
    let n_modes = h_terms
        .iter()
        .flat_map(|t| t.factors.iter().map(|f| f.mode + 1))
        .max()
        .unwrap_or(1);

    let mut trend = Vec::new();
    let mut last: Option<(Array1<C64>, f64, SpaceSpec)> = None;
    for &d in dims {
        let space = SpaceSpec::new(vec![d; n_modes], spin_dim)?;
        let h = eval_polynomial(&space, h_terms, true)?;
        let total = space.total_dim();
        let mut a = h.into_entries();
        for i in 0..total {
            a[[i, i]] += C64::new(0.0, 1.0);
        }
        let rows = space.interior_indices(buffer)?;
        let rect = compress_rows(&a, &rows);
        let (_, s, vt) = rect.svd(false, true)?;
        let vt = vt.ok_or_else(|| Error::Linalg("svd returned no right vectors".into()))?;
        let k = s.len();
        let sigma_min = s[k - 1];
        let v: Array1<C64> = vt.row(k - 1).mapv(|z| z.conj());
        trend.push((d, sigma_min));
        let boundary = space.boundary_indices(buffer)?;
        let bmass: f64 = boundary.iter().map(|&i| v[i].norm_sqr()).sum();
        last = Some((v, bmass, space));
    }
    let (vector, boundary_mass, space) = last.unwrap();
    let residual = trend.last().unwrap().1;
    let decreasing = trend.windows(2).all(|w| w[1].1 < w[0].1);
    let detected = residual < DEFICIENCY_RESIDUAL_TOL
        && (trend.len() < 2 || decreasing)
        && boundary_mass < DEFICIENCY_BOUNDARY_TOL;
    Ok(DeficiencyResult {
        residual,
        vector,
        boundary_mass,
        truncation_trend: trend,
        space,
        detected,
    })
}

/// Report wrapper for a deficiency search. `passed` means a deficiency
/// direction was found, i.e. non-unitality evidence.
pub fn deficiency_report(r: &DeficiencyResult, buffer: usize) -> CertificateReport {
    let mut constants = BTreeMap::new();
    constants.insert("residual".into(), r.residual);
    constants.insert("boundary_mass".into(), r.boundary_mass);
    for (d, s) in &r.truncation_trend {
        constants.insert(format!("residual_d{d}"), *s);
    }
    CertificateReport {
        kind: CertKind::Deficiency,
        passed: r.detected,
        margin: r.residual,
        constants,
        interior_buffer: buffer,
        truncation: r.space.clone(),
        details: format!(
            "trend {:?}; boundary mass {:.3e}",
            r.truncation_trend, r.boundary_mass
        ),
    }
}

/// Projection onto the boundary buffer: the truncation-level stand-in for
/// the subspace probability escapes into under jump explosion.
pub fn escape_projection(space: &SpaceSpec, buffer: usize) -> Result<OperatorMatrix> {
    let boundary = space.boundary_indices(buffer)?;
    let d = space.total_dim();
    let mut m = Array2::zeros((d, d));
    for &i in &boundary {
        m[[i, i]] = C64::new(1.0, 0.0);
    }
    OperatorMatrix::hermitian(space.clone(), m)
}

/// Non-unitality witness chain for a projection `π`.
///
/// Checks the quadratic-form condition
/// `Φ(π) − ½(Φ(I)π + πΦ(I)) + (2−ε)π ⪰ 0` on the interior block; on a pass
/// it additionally requires `L(π) ⪰ επ` and the fixed-point condition
/// `Q_ε(π) ⪰ π − 1e-6`, all on the interior block. A fully passing chain
/// flags the minimal solution as non-unital.
pub fn check_witness(
    l: &LindbladGenerator,
    pi: &OperatorMatrix,
    eps: f64,
    buffer: usize,
    q_steps: usize,
) -> Result<CertificateReport> {
    let space = l.space().clone();
    let p2 = pi.entries().dot(pi.entries());
    let idem = linalg::max_abs(&(&p2 - pi.entries()));
    if idem > 1e-8 || linalg::hermiticity_defect(pi.entries()) > 1e-8 {
        return Err(Error::InvalidArg(format!(
            "witness operand is not a projection (idempotency defect {idem:.3e})"
        )));
    }
    let interior = space.interior_indices(buffer)?;
    let mut constants = BTreeMap::new();
    constants.insert("eps".into(), eps);

    if linalg::max_abs(pi.entries()) == 0.0 {
        return Ok(CertificateReport {
            kind: CertKind::Witness,
            passed: true,
            margin: 0.0,
            constants,
            interior_buffer: buffer,
            truncation: space,
            details: "degenerate zero projection; vacuous pass".into(),
        });
    }

    let phi_pi = l.phi_apply(pi.entries())?;
    let anti = l.phi_identity().dot(pi.entries()) + pi.entries().dot(l.phi_identity());
    let eq_form =
        &phi_pi - &anti.mapv(|z| z * 0.5) + &pi.entries().mapv(|z| z * C64::new(2.0 - eps, 0.0));
    let m_form = min_eig_interior(&eq_form, &interior)?;
    constants.insert("form_margin".into(), m_form);

    if m_form < -INEQ_TOL {
        return Ok(CertificateReport {
            kind: CertKind::Witness,
            passed: false,
            margin: m_form,
            constants,
            interior_buffer: buffer,
            truncation: space,
            details: "quadratic-form condition failed".into(),
        });
    }

    let l_pi = l.heisenberg_apply(pi.entries())?;
    let growth = &l_pi - &pi.entries().mapv(|z| z * C64::new(eps, 0.0));
    let m_growth = min_eig_interior(&growth, &interior)?;
    constants.insert("growth_margin".into(), m_growth);

    let q = q_epsilon(l, pi, eps, default_t_cap(eps), q_steps)?;
    let m_fixed = min_eig_interior(&(&q.value - pi.entries()), &interior)?;
    constants.insert("fixed_point_margin".into(), m_fixed);
    constants.insert("q_tail_bound".into(), q.tail_bound);

    let passed = m_growth >= -INEQ_TOL && m_fixed >= -1e-6;
    let margin = m_form.min(m_growth).min(m_fixed);
    Ok(CertificateReport {
        kind: CertKind::Witness,
        passed,
        margin,
        constants,
        interior_buffer: buffer,
        truncation: space,
        details: if passed {
            "witness chain passed: minimal solution flagged non-unital".into()
        } else if m_growth < -INEQ_TOL {
            "growth condition L(pi) above eps*pi failed".into()
        } else {
            "fixed-point condition Q_eps(pi) above pi failed".into()
        },
    })
}

/// Whether a balance term damps (`(a†)^m B a^m`) or pumps (`a^n B (a†)^n`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BalanceKind {
    Loss,
    Gain,
}

/// One term of the balance condition: a PSD coefficient block and the word
/// order.
#[derive(Clone, Debug)]
pub struct BalanceTerm {
    pub kind: BalanceKind,
    pub coeff: CoeffBlock,
    pub order: u32,
}

fn falling_factorial(n: usize, m: usize) -> f64 {
    if m > n {
        return 0.0;
    }
    ((n - m + 1)..=n).map(|k| k as f64).product()
}

fn rising_factorial(n: usize, m: usize) -> f64 {
    ((n + 1)..=(n + m)).map(|k| k as f64).product()
}

/// Balance condition for diagonal reference operators `Λ = λ((a†a)^n + I)`.
///
/// The quick sufficient test is positivity of `S = Σ (c⁺m − c⁻n)`; the scan
/// additionally evaluates the exact diagonal ratio of the reference action
/// against `Λ` over occupation levels `N ≤ n_max` and reports its supremum.
pub fn balance_condition(
    terms: &[BalanceTerm],
    spin_dim: usize,
    n_power: u32,
    n_max: usize,
) -> Result<CertificateReport> {
    if n_max < 1 {
        return Err(Error::InvalidArg("n_max must be at least 1".into()));
    }
    let max_order = terms.iter().map(|t| t.order).max().unwrap_or(0);
    if n_power < max_order {
        return Err(Error::InvalidArg(format!(
            "reference power {n_power} is below the largest term order {max_order}"
        )));
    }
    let m = spin_dim;
    let mut s_matrix: Array2<C64> = Array2::zeros((m, m));
    for t in terms {
        let block = t.coeff.as_matrix(m)?;
        let sign = match t.kind {
            BalanceKind::Loss => 1.0,
            BalanceKind::Gain => -1.0,
        };
        s_matrix = s_matrix + block.mapv(|z| z * C64::new(sign * t.order as f64, 0.0));
    }
    let s_min = linalg::min_eig_hermitian(&s_matrix)?;

    // exact diagonal ratio (reference action over Λ) per occupation level
    let mut c_star = f64::NEG_INFINITY;
    let mut n_star = 1usize;
    let mut tail_value = 0.0f64;
    for n in 1..=n_max {
        let mut expr: Array2<C64> = Array2::zeros((m, m));
        let lam_n = (n as f64).powi(n_power as i32) + 1.0;
        for t in terms {
            let block = t.coeff.as_matrix(m)?;
            let ord = t.order as usize;
            let (fac, shifted) = match t.kind {
                BalanceKind::Loss => {
                    let f = falling_factorial(n, ord);
                    let sh = if n >= ord {
                        ((n - ord) as f64).powi(n_power as i32)
                    } else {
                        0.0
                    };
                    (f, sh)
                }
                BalanceKind::Gain => (
                    rising_factorial(n, ord),
                    ((n + ord) as f64).powi(n_power as i32),
                ),
            };
            let weight = fac * (shifted - (n as f64).powi(n_power as i32)) / lam_n;
            expr = expr + block.mapv(|z| z * C64::new(weight, 0.0));
        }
        let top = linalg::eigvalsh(&expr)?;
        let top = top[top.len() - 1];
        if top > c_star {
            c_star = top;
            n_star = n;
        }
        if n == n_max {
            tail_value = top;
        }
    }

    let mut constants = BTreeMap::new();
    constants.insert("s_min".into(), s_min);
    constants.insert("c_star".into(), c_star);
    constants.insert("n_star".into(), n_star as f64);
    constants.insert("tail_value".into(), tail_value);

    Ok(CertificateReport {
        kind: CertKind::Balance,
        passed: s_min > 0.0,
        margin: s_min,
        constants,
        interior_buffer: 0,
        truncation: SpaceSpec::new(vec![2], spin_dim)?,
        details: format!(
            "S min eig {s_min:.6e}; ratio supremum {c_star:.6e} at N = {n_star}; \
             ratio at N = {n_max}: {tail_value:.6e}"
        ),
    })
}

/// Two-mode ladder reference operator
/// `Λ_N = λ^{(N)} I + Σ_k λ_k (a₁†)^{N-k} a₁^{N-k} (a₂†)^k a₂^k`.
#[derive(Clone, Debug)]
pub struct LadderReference {
    pub operator: OperatorMatrix,
    pub ladder_coeffs: Vec<f64>,
    pub identity_coeff: f64,
}

/// Coefficients by the strict recurrence
/// `λ_{k+1} = slack · λ_k (N−k)L / ((k+1)M)` (floored at 1), which exceeds
/// the required bound `λ_k (N−k)L / ((k+1)M)` whenever `slack > 1`.
pub fn build_lambda_n(
    space: &SpaceSpec,
    l_order: u32,
    m_order: u32,
    big_n: usize,
    lambda0: f64,
    slack: f64,
) -> Result<LadderReference> {
    if space.n_modes() != 2 {
        return Err(Error::InvalidArg("ladder reference needs exactly two modes".into()));
    }
    if l_order < 1 || m_order < 1 || big_n < 1 {
        return Err(Error::InvalidArg("orders and N must be at least 1".into()));
    }
    if lambda0 < 1.0 || slack <= 1.0 {
        return Err(Error::InvalidArg("need lambda0 at least 1 and slack above 1".into()));
    }
    let mut coeffs = vec![lambda0];
    for k in 0..big_n {
        let bound = coeffs[k] * ((big_n - k) as f64 * l_order as f64)
            / ((k + 1) as f64 * m_order as f64);
        coeffs.push((slack * bound).max(1.0));
    }
    let identity_coeff = slack * coeffs.iter().cloned().fold(1.0f64, f64::max);

    let mut terms = vec![PolyTerm::scalar(C64::new(identity_coeff, 0.0), vec![])];
    for (k, &lam) in coeffs.iter().enumerate() {
        let mut factors = Vec::new();
        let p1 = (big_n - k) as u32;
        if p1 > 0 {
            factors.push(ModeFactor {
                mode: 0,
                dagger: p1,
                plain: p1,
            });
        }
        if k > 0 {
            factors.push(ModeFactor {
                mode: 1,
                dagger: k as u32,
                plain: k as u32,
            });
        }
        terms.push(PolyTerm::scalar(C64::new(lam, 0.0), factors));
    }
    let op = eval_polynomial(space, &terms, false)?;
    let operator = OperatorMatrix::hermitian(space.clone(), op.into_entries())?;
    Ok(LadderReference {
        operator,
        ladder_coeffs: coeffs,
        identity_coeff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{assemble, CPMapSpec, KrausTerm};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn word(mode: usize, dagger: u32, plain: u32) -> PolyTerm {
        PolyTerm::scalar(c(1.0, 0.0), vec![ModeFactor { mode, dagger, plain }])
    }

    fn damped(d: usize, gamma: f64) -> LindbladGenerator {
        let s = SpaceSpec::single_mode(d).unwrap();
        let cp = CPMapSpec::new(vec![KrausTerm::scalar_word(gamma, word(0, 0, 1))]);
        assemble(&s, &cp, &[]).unwrap()
    }

    fn diagonal_ref(l: &LindbladGenerator, c_lam: f64, m: u32) -> OperatorMatrix {
        crate::fock::diagonal_lambda(l.space(), c_lam, &vec![m; l.space().n_modes()]).unwrap()
    }

    #[test]
    fn inequality_margins() {
        let s = SpaceSpec::single_mode(3).unwrap();
        let zero = OperatorMatrix::zeros(s.clone());
        let id = OperatorMatrix::identity(s.clone());
        let r = check_operator_inequality(&zero, &id, 0).unwrap();
        assert!(r.passed);
        assert!((r.margin - 1.0).abs() < 1e-12);

        let mut diag = Array2::zeros((3, 3));
        for i in 0..3 {
            diag[[i, i]] = c(i as f64, 0.0);
        }
        let a = OperatorMatrix::hermitian(s.clone(), diag.clone()).unwrap();
        let b = OperatorMatrix::hermitian(s, diag).unwrap();
        let r = check_operator_inequality(&a, &b, 0).unwrap();
        assert!(r.passed);
        assert!(r.margin.abs() < 1e-12);
    }

    #[test]
    fn inequality_antisymmetry() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let s = SpaceSpec::single_mode(5).unwrap();
        for _ in 0..10 {
            let m = Array2::from_shape_fn((5, 5), |_| {
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let h = (&m + &dagger(&m)).mapv(|z| z * 0.5);
            let a = OperatorMatrix::hermitian(s.clone(), h).unwrap();
            let b = OperatorMatrix::zeros(s.clone());
            let fwd = check_operator_inequality(&a, &b, 1).unwrap();
            let bwd = check_operator_inequality(&b, &a, 1).unwrap();
            if fwd.margin.abs() > INEQ_TOL {
                assert!(bwd.margin <= -fwd.margin + 2e-9);
            }
        }
    }

    #[test]
    fn damped_oscillator_generator_action_is_nonpositive() {
        // interior block of L(I + a†a) = -γ a†a ⪯ 0
        let l = damped(10, 1.0);
        let lam = diagonal_ref(&l, 1.0, 1);
        let act = l.heisenberg_apply(lam.entries()).unwrap();
        let a = OperatorMatrix::hermitian(l.space().clone(), act).unwrap();
        let zero = OperatorMatrix::zeros(l.space().clone());
        let r = check_operator_inequality(&a, &zero, 2).unwrap();
        assert!(r.passed, "margin {}", r.margin);
    }

    #[test]
    fn zero_generator_reference_with_zero_c() {
        let s = SpaceSpec::single_mode(4).unwrap();
        let l = assemble(&s, &CPMapSpec::default(), &[]).unwrap();
        let lam = diagonal_ref(&l, 1.0, 1);
        let r = check_reference(&l, &lam, Some(0.0), 1).unwrap();
        assert!(r.passed);
        assert!(r.margin.abs() < 1e-12);
    }

    #[test]
    fn damped_oscillator_smallest_feasible_c_is_zero() {
        let l = damped(10, 1.0);
        let lam = diagonal_ref(&l, 1.0, 1);
        let r = check_reference(&l, &lam, None, 2).unwrap();
        assert!(r.passed, "{}", r.details);
        let c = r.constants["c"];
        assert!(c.abs() <= 1e-9, "c = {c}");
    }

    #[test]
    fn reference_reports_domination_failure() {
        let l = damped(8, 10.0);
        let lam = diagonal_ref(&l, 0.01, 1);
        let r = check_reference(&l, &lam, Some(0.0), 2).unwrap();
        assert!(!r.passed);
        assert!(r.constants["domination_margin"] < 0.0);
    }

    #[test]
    fn lambda_pair_trivial_h_sa_reduces_to_reference() {
        let l = damped(10, 1.0);
        let lam = diagonal_ref(&l, 5.0, 2);
        let h_sa = OperatorMatrix::zeros(l.space().clone());
        let out = check_lambda_pair(&l, &lam, &h_sa, LambdaPairParams::default(), 2).unwrap();
        assert!(out.report.passed, "{}", out.report.details);
        assert!(out.report.constants["mu"].abs() < 1e-9);
        assert!(out.report.constants["c1"].abs() < 1e-9);
    }

    #[test]
    fn beamsplitter_lambda_pair_with_given_constants() {
        // two-mode exchange Hamiltonian under damping, certified at fixed
        // constants; the direct interaction-representation margins must
        // then also pass
        let s = SpaceSpec::new(vec![8, 8], 1).unwrap();
        let h_terms = vec![PolyTerm::scalar(
            c(1.0, 0.0),
            vec![
                ModeFactor {
                    mode: 0,
                    dagger: 1,
                    plain: 0,
                },
                ModeFactor {
                    mode: 1,
                    dagger: 0,
                    plain: 1,
                },
            ],
        )];
        let cp = CPMapSpec::new(vec![
            KrausTerm::scalar_word(0.5, word(0, 0, 1)),
            KrausTerm::scalar_word(0.5, word(1, 0, 1)),
        ]);
        let l = assemble(&s, &cp, &h_terms).unwrap();
        let lam = crate::fock::diagonal_lambda(&s, 20.0, &[2, 2]).unwrap();
        let h_sa = eval_polynomial(&s, &h_terms, true).unwrap();
        let params = LambdaPairParams {
            eps: Some(0.5),
            mu: Some(0.6),
            nu: Some(1.3),
            c1: Some(0.5),
            c2: Some(1.0),
        };
        let out = check_lambda_pair(&l, &lam, &h_sa, params, 2).unwrap();
        assert!(out.report.passed, "{}", out.report.details);
        let margins = interaction_chain_margins(&out, &lam, &[0.0, 0.5, 1.0], 2).unwrap();
        for (t, m) in margins {
            assert!(m >= -INEQ_TOL, "t = {t}: margin {m}");
        }
    }

    #[test]
    fn undersized_reference_fails_lambda_pair() {
        let s = SpaceSpec::new(vec![8, 8], 1).unwrap();
        let h_terms = vec![PolyTerm::scalar(
            c(1.0, 0.0),
            vec![
                ModeFactor {
                    mode: 0,
                    dagger: 1,
                    plain: 0,
                },
                ModeFactor {
                    mode: 1,
                    dagger: 0,
                    plain: 1,
                },
            ],
        )];
        let cp = CPMapSpec::new(vec![KrausTerm::scalar_word(0.5, word(0, 0, 1))]);
        let l = assemble(&s, &cp, &h_terms).unwrap();
        let lam = crate::fock::diagonal_lambda(&s, 0.01, &[2, 2]).unwrap();
        let h_sa = eval_polynomial(&s, &h_terms, true).unwrap();
        let params = LambdaPairParams {
            eps: Some(0.5),
            mu: Some(0.6),
            nu: Some(1.3),
            c1: Some(0.5),
            c2: Some(1.0),
        };
        let out = check_lambda_pair(&l, &lam, &h_sa, params, 2).unwrap();
        assert!(!out.report.passed);
        assert!(out.report.margin < 0.0);
    }

    #[test]
    fn hermitian_control_has_unit_residual() {
        let terms = vec![PolyTerm::scalar(
            c(0.5, 0.0),
            vec![ModeFactor {
                mode: 0,
                dagger: 1,
                plain: 1,
            }],
        )];
        let r = deficiency_search(&terms, 1, &[12, 20], 2).unwrap();
        assert!(!r.detected);
        for (_, s) in &r.truncation_trend {
            assert!(*s >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn balance_examples() {
        let r = balance_condition(
            &[BalanceTerm {
                kind: BalanceKind::Loss,
                coeff: CoeffBlock::Scalar(c(1.0, 0.0)),
                order: 1,
            }],
            1,
            1,
            50,
        )
        .unwrap();
        assert!(r.passed);
        assert!((r.margin - 1.0).abs() < 1e-12);

        let r = balance_condition(
            &[
                BalanceTerm {
                    kind: BalanceKind::Loss,
                    coeff: CoeffBlock::Scalar(c(1.0, 0.0)),
                    order: 2,
                },
                BalanceTerm {
                    kind: BalanceKind::Gain,
                    coeff: CoeffBlock::Scalar(c(5.0, 0.0)),
                    order: 1,
                },
            ],
            1,
            2,
            200,
        )
        .unwrap();
        assert!(!r.passed);
        assert!((r.margin + 3.0).abs() < 1e-12);

        let r = balance_condition(
            &[
                BalanceTerm {
                    kind: BalanceKind::Loss,
                    coeff: CoeffBlock::Scalar(c(2.0 * 1.5, 0.0)),
                    order: 2,
                },
                BalanceTerm {
                    kind: BalanceKind::Gain,
                    coeff: CoeffBlock::Scalar(c(2.0 * 0.5, 0.0)),
                    order: 2,
                },
            ],
            1,
            2,
            200,
        )
        .unwrap();
        assert!(r.passed);
        assert!((r.margin - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ladder_coefficients_follow_recurrence() {
        // L = M = 1, N = 2, λ₀ = 1, slack = 1.5 → λ₁ = 3, λ₂ = 2.25
        let s = SpaceSpec::new(vec![4, 4], 1).unwrap();
        let lr = build_lambda_n(&s, 1, 1, 2, 1.0, 1.5).unwrap();
        assert_eq!(lr.ladder_coeffs.len(), 3);
        assert!((lr.ladder_coeffs[0] - 1.0).abs() < 1e-12);
        assert!((lr.ladder_coeffs[1] - 3.0).abs() < 1e-12);
        assert!((lr.ladder_coeffs[2] - 2.25).abs() < 1e-12);
        // strict required bounds
        assert!(lr.ladder_coeffs[1] > lr.ladder_coeffs[0] * 2.0);
        assert!(lr.ladder_coeffs[2] > lr.ladder_coeffs[1] * 0.5);
    }

    #[test]
    fn ladder_reference_structure_at_n1() {
        let s = SpaceSpec::new(vec![3, 3], 1).unwrap();
        let lr = build_lambda_n(&s, 1, 1, 1, 1.0, 1.5).unwrap();
        assert_eq!(lr.ladder_coeffs.len(), 2);
        for idx in 0..s.total_dim() {
            let (occ, _) = s.occupations(idx);
            let want = lr.identity_coeff
                + lr.ladder_coeffs[0] * occ[0] as f64
                + lr.ladder_coeffs[1] * occ[1] as f64;
            assert!((lr.operator.entries()[[idx, idx]] - c(want, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn exchange_pump_generator_has_ladder_reference() {
        // Kraus a₂ a₁† with the ladder reference at N = 4
        let s = SpaceSpec::new(vec![10, 10], 1).unwrap();
        let kraus_word = PolyTerm::scalar(
            c(1.0, 0.0),
            vec![
                ModeFactor {
                    mode: 0,
                    dagger: 1,
                    plain: 0,
                },
                ModeFactor {
                    mode: 1,
                    dagger: 0,
                    plain: 1,
                },
            ],
        );
        let cp = CPMapSpec::new(vec![KrausTerm::scalar_word(1.0, kraus_word)]);
        let l = assemble(&s, &cp, &[]).unwrap();
        let lr = build_lambda_n(&s, 1, 1, 4, 1.0, 1.5).unwrap();
        let r = check_reference(&l, &lr.operator, None, 2).unwrap();
        assert!(r.passed, "{}", r.details);
        assert!(r.constants["c"].is_finite());
    }

    #[test]
    fn witness_rejects_non_projection() {
        let l = damped(6, 1.0);
        let m = Array2::from_diag_elem(6, c(0.5, 0.0));
        let pi = OperatorMatrix::hermitian(l.space().clone(), m).unwrap();
        assert!(check_witness(&l, &pi, 0.5, 1, 200).is_err());
    }

    #[test]
    fn witness_zero_projection_is_vacuous() {
        let l = damped(6, 1.0);
        let pi = OperatorMatrix::zeros(l.space().clone());
        let r = check_witness(&l, &pi, 0.5, 1, 200).unwrap();
        assert!(r.passed);
        assert_eq!(r.margin, 0.0);
        assert!(r.details.contains("degenerate"));
    }

    #[test]
    fn witness_fails_for_unital_damped_oscillator() {
        // π = |0⟩⟨0|: the growth condition L(π) ⪰ επ fails
        let l = damped(8, 1.0);
        let mut m = Array2::zeros((8, 8));
        m[[0, 0]] = c(1.0, 0.0);
        let pi = OperatorMatrix::hermitian(l.space().clone(), m).unwrap();
        let r = check_witness(&l, &pi, 0.5, 1, 400).unwrap();
        assert!(!r.passed);
        assert!(r.constants["growth_margin"] < 0.0);
    }

    #[test]
    fn witness_chain_passes_for_pure_birth_component() {
        // Kraus (a†)²: probability escapes up the ladder; the escape
        // projection certifies non-unitality with nonnegative margins
        let s = SpaceSpec::single_mode(24).unwrap();
        let cp = CPMapSpec::new(vec![KrausTerm::scalar_word(1.0, word(0, 2, 0))]);
        let l = assemble(&s, &cp, &[]).unwrap();
        let pi = escape_projection(&s, 2).unwrap();
        let r = check_witness(&l, &pi, 0.5, 2, 400).unwrap();
        assert!(r.passed, "{} ({:?})", r.details, r.constants);
    }
}
