//! Truncated ladder operators and symbolic polynomial evaluation.
//!
//! A polynomial term is a spin-factor coefficient block together with a
//! normal-ordered word `∏_k (a_k†)^{n_k} (a_k)^{m_k}` (daggers left of plains
//! per mode, modes in ascending order). Terms are *not* reordered: callers
//! must supply normal-ordered input.
//!
//! Truncation convention is a hard cutoff, `a†|d-1⟩ = 0`. The rows a
//! polynomial of order `p` corrupts are the last `p` per mode; inequality
//! checks downstream compress to an interior block to stay clear of them.

use ndarray::prelude::*;
use num_complex::Complex64 as C64;

use crate::linalg;
use crate::space::{OperatorMatrix, SpaceSpec};
use crate::{Error, Result};

/// Spin-factor coefficient of a polynomial term: a scalar, or an `M × M`
/// block acting on the matrix factor `C^M`.
#[derive(Clone, Debug)]
pub enum CoeffBlock {
    Scalar(C64),
    Matrix(Array2<C64>),
}

impl CoeffBlock {
    pub fn one() -> Self {
        CoeffBlock::Scalar(C64::new(1.0, 0.0))
    }

    /// Materialize as an `M × M` matrix.
    pub fn as_matrix(&self, spin_dim: usize) -> Result<Array2<C64>> {
        match self {
            CoeffBlock::Scalar(z) => Ok(Array2::from_diag_elem(spin_dim, *z)),
            CoeffBlock::Matrix(m) => {
                if m.dim() != (spin_dim, spin_dim) {
                    return Err(Error::Dimension(format!(
                        "coefficient block {:?} does not match spin dimension {spin_dim}",
                        m.dim()
                    )));
                }
                Ok(m.clone())
            }
        }
    }

    /// PSD square root; errors if the block is not positive semidefinite.
    pub fn psd_sqrt(&self, spin_dim: usize) -> Result<Array2<C64>> {
        match self {
            CoeffBlock::Scalar(z) => {
                if z.im.abs() > 1e-14 * (1.0 + z.re.abs()) || z.re < -1e-14 {
                    return Err(Error::InvalidArg(format!(
                        "scalar Kraus coefficient {z} is not a nonnegative real"
                    )));
                }
                Ok(Array2::from_diag_elem(spin_dim, C64::new(z.re.max(0.0).sqrt(), 0.0)))
            }
            CoeffBlock::Matrix(_) => {
                let m = self.as_matrix(spin_dim)?;
                let defect = linalg::hermiticity_defect(&m);
                if defect > 1e-12 * (1.0 + linalg::max_abs(&m)) {
                    return Err(Error::NotHermitian(
                        "Kraus coefficient block is not Hermitian".into(),
                    ));
                }
                let (vals, vecs) = linalg::eigh(&m)?;
                let scale = vals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
                if vals.iter().any(|&v| v < -1e-12 * (1.0 + scale)) {
                    return Err(Error::InvalidArg(
                        "Kraus coefficient block has a negative eigenvalue".into(),
                    ));
                }
                Ok(linalg::from_eigh(&vals, &vecs, |x| {
                    C64::new(x.max(0.0).sqrt(), 0.0)
                }))
            }
        }
    }
}

/// One normal-ordered factor on a single mode: `(a_k†)^dagger (a_k)^plain`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModeFactor {
    pub mode: usize,
    pub dagger: u32,
    pub plain: u32,
}

/// `coeff ⊗ ∏_k (a_k†)^{n_k} (a_k)^{m_k}` with at most one factor per mode.
#[derive(Clone, Debug)]
pub struct PolyTerm {
    pub coeff: CoeffBlock,
    pub factors: Vec<ModeFactor>,
}

impl PolyTerm {
    pub fn new(coeff: CoeffBlock, factors: Vec<ModeFactor>) -> Self {
        PolyTerm { coeff, factors }
    }

    /// Scalar-coefficient convenience constructor.
    pub fn scalar(coeff: C64, factors: Vec<ModeFactor>) -> Self {
        PolyTerm::new(CoeffBlock::Scalar(coeff), factors)
    }

    /// Total polynomial order `Σ (n + m)`.
    pub fn order(&self) -> u32 {
        self.factors.iter().map(|f| f.dagger + f.plain).sum()
    }

    fn validate(&self, space: &SpaceSpec) -> Result<()> {
        let mut seen = vec![false; space.n_modes()];
        for f in &self.factors {
            if f.mode >= space.n_modes() {
                return Err(Error::InvalidArg(format!(
                    "mode index {} out of range (space has {} modes)",
                    f.mode,
                    space.n_modes()
                )));
            }
            if seen[f.mode] {
                return Err(Error::InvalidArg(format!(
                    "mode {} appears twice in one term; input must be normal-ordered",
                    f.mode
                )));
            }
            seen[f.mode] = true;
        }
        Ok(())
    }
}

/// Local annihilation matrix on a single truncated mode: `a|n⟩ = √n |n-1⟩`.
fn local_annihilation(dim: usize) -> Array2<C64> {
    let mut a = Array2::zeros((dim, dim));
    for n in 1..dim {
        a[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// Full-space annihilation and creation operators for one mode.
pub fn build_ladder(space: &SpaceSpec, mode: usize) -> Result<(OperatorMatrix, OperatorMatrix)> {
    if mode >= space.n_modes() {
        return Err(Error::InvalidArg(format!(
            "mode index {mode} out of range (space has {} modes)",
            space.n_modes()
        )));
    }
    let mut acc: Array2<C64> = Array2::from_diag_elem(1, C64::new(1.0, 0.0));
    for (k, &d) in space.mode_dims().iter().enumerate() {
        let local = if k == mode {
            local_annihilation(d)
        } else {
            Array2::from_diag_elem(d, C64::new(1.0, 0.0))
        };
        acc = linalg::kron(&acc, &local);
    }
    let spin_eye = Array2::from_diag_elem(space.spin_dim(), C64::new(1.0, 0.0));
    let a = linalg::kron(&acc, &spin_eye);
    let a_dag = linalg::dagger(&a);
    Ok((
        OperatorMatrix::new(space.clone(), a)?,
        OperatorMatrix::new(space.clone(), a_dag)?,
    ))
}

/// Evaluate `Σ_j coeff_j ⊗ ∏_k (a_k†)^{n_jk} (a_k)^{m_jk}` as a matrix,
/// adding the conjugate transpose when `hermitize` is set.
pub fn eval_polynomial(
    space: &SpaceSpec,
    terms: &[PolyTerm],
    hermitize: bool,
) -> Result<OperatorMatrix> {
    let d = space.total_dim();
    let mut total: Array2<C64> = Array2::zeros((d, d));
    for term in terms {
        term.validate(space)?;
        let mut acc: Array2<C64> = Array2::from_diag_elem(1, C64::new(1.0, 0.0));
        for (k, &dk) in space.mode_dims().iter().enumerate() {
            let mut local = Array2::from_diag_elem(dk, C64::new(1.0, 0.0));
            if let Some(f) = term.factors.iter().find(|f| f.mode == k) {
                let a = local_annihilation(dk);
                let a_dag = linalg::dagger(&a);
                for _ in 0..f.dagger {
                    local = local.dot(&a_dag);
                }
                for _ in 0..f.plain {
                    local = local.dot(&a);
                }
            }
            acc = linalg::kron(&acc, &local);
        }
        let block = term.coeff.as_matrix(space.spin_dim())?;
        total = total + linalg::kron(&acc, &block);
    }
    if hermitize {
        let dag = linalg::dagger(&total);
        total = total + dag;
        Ok(OperatorMatrix::hermitian(space.clone(), total)?)
    } else {
        OperatorMatrix::new(space.clone(), total)
    }
}

/// Diagonal reference operator `c_Λ (I + Σ_k (a_k† a_k)^{m_k})`.
///
/// Positive with smallest eigenvalue `c_Λ` (attained on the vacuum), and
/// commuting with every number operator.
pub fn diagonal_lambda(
    space: &SpaceSpec,
    c_lambda: f64,
    exponents: &[u32],
) -> Result<OperatorMatrix> {
    if c_lambda <= 0.0 {
        return Err(Error::InvalidArg("c_lambda must be positive".into()));
    }
    if exponents.len() != space.n_modes() {
        return Err(Error::Dimension(format!(
            "expected {} exponents, got {}",
            space.n_modes(),
            exponents.len()
        )));
    }
    if exponents.iter().any(|&m| m < 1) {
        return Err(Error::InvalidArg("every exponent must be at least 1".into()));
    }
    let d = space.total_dim();
    let mut m = Array2::zeros((d, d));
    for idx in 0..d {
        let (occ, _) = space.occupations(idx);
        let mut v = 1.0f64;
        for (k, &n) in occ.iter().enumerate() {
            v += (n as f64).powi(exponents[k] as i32);
        }
        m[[idx, idx]] = C64::new(c_lambda * v, 0.0);
    }
    OperatorMatrix::hermitian(space.clone(), m)
}

/// Spectral fractional power `A^eps` of a PSD Hermitian matrix.
///
/// Eigenvalues in `[-1e-10, 0)` are clamped to zero; anything lower is an
/// error.
pub fn fractional_power(a: &OperatorMatrix, eps: f64) -> Result<OperatorMatrix> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArg(format!(
            "fractional power exponent {eps} must lie in (0, 1]"
        )));
    }
    let scale = 1.0 + linalg::max_abs(a.entries());
    if linalg::hermiticity_defect(a.entries()) > 1e-12 * scale {
        return Err(Error::NotHermitian(
            "fractional power requires a Hermitian input".into(),
        ));
    }
    let (vals, vecs) = linalg::eigh(a.entries())?;
    if vals.iter().any(|&v| v < -1e-10 * scale) {
        return Err(Error::InvalidArg(format!(
            "matrix has negative eigenvalue {:.3e}; not PSD",
            vals[0]
        )));
    }
    let m = linalg::from_eigh(&vals, &vecs, |x| C64::new(x.max(0.0).powf(eps), 0.0));
    OperatorMatrix::hermitian(a.space().clone(), m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dagger, kron, max_abs, min_eig_hermitian};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn ladder_d4_matrix_elements() {
        let s = SpaceSpec::single_mode(4).unwrap();
        let (a, a_dag) = build_ladder(&s, 0).unwrap();
        let a = a.entries();
        // nonzeros (0,1)=1, (1,2)=√2, (2,3)=√3
        assert_eq!(a[[0, 1]], c(1.0, 0.0));
        assert_eq!(a[[1, 2]], c(2.0f64.sqrt(), 0.0));
        assert_eq!(a[[2, 3]], c(3.0f64.sqrt(), 0.0));
        let nnz = a.iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nnz, 3);
        // dagger is the exact conjugate transpose
        assert_eq!(max_abs(&(a_dag.entries() - &dagger(a))), 0.0);
    }

    #[test]
    fn ladder_commutator_truncation_artifact() {
        // [a, a†] = diag(1, 1, 1, -(d-1)) at d = 4
        let s = SpaceSpec::single_mode(4).unwrap();
        let (a, ad) = build_ladder(&s, 0).unwrap();
        let comm = a.entries().dot(ad.entries()) - ad.entries().dot(a.entries());
        for i in 0..4 {
            let want = if i < 3 { 1.0 } else { -3.0 };
            assert!((comm[[i, i]] - c(want, 0.0)).norm() < 1e-14);
            for j in 0..4 {
                if i != j {
                    assert!(comm[[i, j]].norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn ccr_holds_on_interior_for_every_mode() {
        let s = SpaceSpec::new(vec![5, 3], 2).unwrap();
        for mode in 0..2 {
            let (a, ad) = build_ladder(&s, mode).unwrap();
            let comm = a.entries().dot(ad.entries()) - ad.entries().dot(a.entries());
            for idx in 0..s.total_dim() {
                let (occ, _) = s.occupations(idx);
                if occ[mode] < s.mode_dims()[mode] - 1 {
                    assert!((comm[[idx, idx]] - c(1.0, 0.0)).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn number_operator_from_polynomial() {
        let s = SpaceSpec::single_mode(4).unwrap();
        let term = PolyTerm::scalar(
            c(1.0, 0.0),
            vec![ModeFactor {
                mode: 0,
                dagger: 1,
                plain: 1,
            }],
        );
        let n = eval_polynomial(&s, &[term], false).unwrap();
        for i in 0..4 {
            assert!((n.entries()[[i, i]] - c(i as f64, 0.0)).norm() < 1e-14);
        }
        assert!(max_abs(n.entries()) < 3.0 + 1e-12);
    }

    #[test]
    fn empty_polynomial_is_zero() {
        let s = SpaceSpec::new(vec![3, 3], 2).unwrap();
        let z = eval_polynomial(&s, &[], false).unwrap();
        assert_eq!(max_abs(z.entries()), 0.0);
    }

    #[test]
    fn two_mode_coupling_matches_kron_oracle() {
        // coeff 1, word a1† a2, hermitized: must equal a†⊗a + a⊗a† built by
        // explicit Kronecker products of local ladder matrices.
        let s = SpaceSpec::new(vec![3, 3], 1).unwrap();
        let term = PolyTerm::scalar(
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
        let h = eval_polynomial(&s, &[term], true).unwrap();

        let a = local_annihilation(3);
        let ad = dagger(&a);
        let oracle = kron(&ad, &a) + kron(&a, &ad);
        assert!(max_abs(&(h.entries() - &oracle)) < 1e-14);
    }

    #[test]
    fn hermitize_always_yields_hermitian() {
        let s = SpaceSpec::new(vec![4, 3], 2).unwrap();
        let mut sigma = Array2::zeros((2, 2));
        sigma[[0, 1]] = c(0.3, 1.1);
        let terms = vec![
            PolyTerm::new(
                CoeffBlock::Matrix(sigma),
                vec![ModeFactor {
                    mode: 0,
                    dagger: 2,
                    plain: 1,
                }],
            ),
            PolyTerm::scalar(
                c(0.0, -0.7),
                vec![ModeFactor {
                    mode: 1,
                    dagger: 0,
                    plain: 1,
                }],
            ),
        ];
        let h = eval_polynomial(&s, &terms, true).unwrap();
        assert!(crate::linalg::hermiticity_defect(h.entries()) <= 1e-12);
    }

    #[test]
    fn duplicate_mode_rejected() {
        let s = SpaceSpec::single_mode(4).unwrap();
        let term = PolyTerm::scalar(
            c(1.0, 0.0),
            vec![
                ModeFactor {
                    mode: 0,
                    dagger: 1,
                    plain: 0,
                },
                ModeFactor {
                    mode: 0,
                    dagger: 0,
                    plain: 1,
                },
            ],
        );
        assert!(eval_polynomial(&s, &[term], false).is_err());
    }

    #[test]
    fn diagonal_lambda_values() {
        // c=1, m=2, d=3 → diag(1, 2, 5)
        let s = SpaceSpec::single_mode(3).unwrap();
        let l = diagonal_lambda(&s, 1.0, &[2]).unwrap();
        for (i, want) in [1.0, 2.0, 5.0].iter().enumerate() {
            assert!((l.entries()[[i, i]] - c(*want, 0.0)).norm() < 1e-14);
        }
        // c=2, m=1, d=2 → diag(2, 4)
        let s = SpaceSpec::single_mode(2).unwrap();
        let l = diagonal_lambda(&s, 2.0, &[1]).unwrap();
        assert!((l.entries()[[0, 0]] - c(2.0, 0.0)).norm() < 1e-14);
        assert!((l.entries()[[1, 1]] - c(4.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn diagonal_lambda_two_modes_enumerated() {
        // two modes d=2, m=(1,1), c=1 → 1 + n1 + n2 over the 4 basis states
        let s = SpaceSpec::new(vec![2, 2], 1).unwrap();
        let l = diagonal_lambda(&s, 1.0, &[1, 1]).unwrap();
        let mut got: Vec<f64> = (0..4).map(|i| l.entries()[[i, i]].re).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, vec![1.0, 2.0, 2.0, 3.0]);
        // smallest eigenvalue is c_lambda
        assert!((min_eig_hermitian(l.entries()).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_lambda_commutes_with_number_operators() {
        let s = SpaceSpec::new(vec![3, 4], 2).unwrap();
        let l = diagonal_lambda(&s, 2.5, &[2, 3]).unwrap();
        for mode in 0..2 {
            let (a, ad) = build_ladder(&s, mode).unwrap();
            let n = ad.entries().dot(a.entries());
            let comm = l.entries().dot(&n) - n.dot(l.entries());
            assert_eq!(max_abs(&comm), 0.0);
        }
    }

    #[test]
    fn fractional_power_examples() {
        let s = SpaceSpec::single_mode(2).unwrap();
        // identity stays identity for any exponent
        let id = OperatorMatrix::identity(s.clone());
        for eps in [0.25, 0.5, 1.0] {
            let r = fractional_power(&id, eps).unwrap();
            assert!(max_abs(&(r.entries() - id.entries())) < 1e-12);
        }
        // diag(0,4)^0.5 = diag(0,2)
        let mut m = Array2::zeros((2, 2));
        m[[1, 1]] = c(4.0, 0.0);
        let a = OperatorMatrix::hermitian(s, m).unwrap();
        let r = fractional_power(&a, 0.5).unwrap();
        assert!((r.entries()[[0, 0]]).norm() < 1e-12);
        assert!((r.entries()[[1, 1]] - c(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn fractional_power_dominated_by_identity_plus_input() {
        // X^eps ⪯ I + X for PSD X: min eig of (I + A - A^eps) ≥ -1e-10.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let s = SpaceSpec::single_mode(5).unwrap();
        let mut b: Array2<C64> = Array2::zeros((5, 5));
        for i in 0..5 {
            for j in 0..5 {
                b[[i, j]] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        let psd = b.dot(&dagger(&b));
        let a = OperatorMatrix::hermitian(s.clone(), psd.clone()).unwrap();
        let r = fractional_power(&a, 0.3).unwrap();
        let diff =
            Array2::from_diag_elem(5, c(1.0, 0.0)) + &psd - r.entries();
        assert!(min_eig_hermitian(&diff).unwrap() >= -1e-10);
    }

    #[test]
    fn fractional_power_identity_at_one_and_monotone_in_eps() {
        let s = SpaceSpec::single_mode(4).unwrap();
        // spectrum in [1, ∞): A = I + n
        let mut m = Array2::zeros((4, 4));
        for i in 0..4 {
            m[[i, i]] = c(1.0 + i as f64, 0.0);
        }
        let a = OperatorMatrix::hermitian(s, m.clone()).unwrap();
        let r1 = fractional_power(&a, 1.0).unwrap();
        assert!(max_abs(&(r1.entries() - &m)) < 1e-12);
        let lo = fractional_power(&a, 0.4).unwrap();
        let hi = fractional_power(&a, 0.8).unwrap();
        let diff = hi.entries() - lo.entries();
        assert!(min_eig_hermitian(&diff).unwrap() >= -1e-12);
    }

    #[test]
    fn fractional_power_rejects_bad_input() {
        let s = SpaceSpec::single_mode(2).unwrap();
        let mut m = Array2::zeros((2, 2));
        m[[0, 0]] = c(-1.0, 0.0);
        let a = OperatorMatrix::hermitian(s.clone(), m).unwrap();
        assert!(fractional_power(&a, 0.5).is_err());
        let mut nh = Array2::zeros((2, 2));
        nh[[0, 1]] = c(1.0, 0.0);
        let op = OperatorMatrix::new(s, nh).unwrap();
        assert!(fractional_power(&op, 0.5).is_err());
    }
}
