//! Assembly of the formal generator `L(B) = Φ(B) − G†B − BG` and its actions.
//!
//! The completely positive part is specified in Kraus form
//! `Φ(B) = Σ_k L_k† B L_k`; each Kraus operator is a PSD coefficient block
//! (absorbed into the spin factor as its square root) times a sum of
//! operator words. The Hamiltonian enters hermitized (`Σ h_j W_j + h.a.`),
//! so `G = ½Φ(I) + iH` satisfies the compatibility identity `G + G† = Φ(I)`
//! exactly at matrix level.

use ndarray::prelude::*;
use num_complex::Complex64 as C64;

use crate::fock::{eval_polynomial, CoeffBlock, PolyTerm};
use crate::linalg::{self, dagger, kron};
use crate::space::{OperatorMatrix, SpaceSpec};
use crate::{Error, Result};

/// One Kraus operator: `(Σ words) · (I ⊗ √coefficient)`.
///
/// The coefficient must be PSD (a nonnegative scalar or a PSD spin block).
/// A sum of words is allowed because physically relevant jump operators may
/// mix ladder monomials on different spin transitions.
#[derive(Clone, Debug)]
pub struct KrausTerm {
    pub coefficient: CoeffBlock,
    pub words: Vec<PolyTerm>,
}

impl KrausTerm {
    pub fn new(coefficient: CoeffBlock, words: Vec<PolyTerm>) -> Self {
        KrausTerm {
            coefficient,
            words,
        }
    }

    /// Single-word convenience constructor with a scalar rate.
    pub fn scalar_word(rate: f64, word: PolyTerm) -> Self {
        KrausTerm::new(CoeffBlock::Scalar(C64::new(rate, 0.0)), vec![word])
    }

    pub fn max_order(&self) -> u32 {
        self.words.iter().map(|w| w.order()).max().unwrap_or(0)
    }
}

/// Kraus-form specification of the completely positive part.
#[derive(Clone, Debug, Default)]
pub struct CPMapSpec {
    pub terms: Vec<KrausTerm>,
}

impl CPMapSpec {
    pub fn new(terms: Vec<KrausTerm>) -> Self {
        CPMapSpec { terms }
    }
}

/// Which action a superoperator matrix represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Picture {
    Heisenberg,
    Predual,
}

/// Assembled generator on a fixed truncation.
#[derive(Clone, Debug)]
pub struct LindbladGenerator {
    space: SpaceSpec,
    kraus: Vec<Array2<C64>>,
    h: Array2<C64>,
    g: Array2<C64>,
    phi_identity: Array2<C64>,
    max_word_order: u32,
}

/// Build Kraus matrices, the hermitized Hamiltonian, and `G = ½Φ(I) + iH`.
pub fn assemble(
    space: &SpaceSpec,
    cp: &CPMapSpec,
    h_terms: &[PolyTerm],
) -> Result<LindbladGenerator> {
    let d = space.total_dim();
    let mut kraus = Vec::with_capacity(cp.terms.len());
    let mut max_order = 0u32;
    for term in &cp.terms {
        let sqrt_coeff = term.coefficient.psd_sqrt(space.spin_dim())?;
        let fock_dim = d / space.spin_dim();
        let fock_eye = Array2::from_diag_elem(fock_dim, C64::new(1.0, 0.0));
        let spin_sqrt = kron(&fock_eye, &sqrt_coeff);
        let word_sum = eval_polynomial(space, &term.words, false)?;
        kraus.push(word_sum.entries().dot(&spin_sqrt));
        max_order = max_order.max(term.max_order());
    }
    for t in h_terms {
        max_order = max_order.max(t.order());
    }

    let h = eval_polynomial(space, h_terms, true)?;
    let mut phi_identity: Array2<C64> = Array2::zeros((d, d));
    for l in &kraus {
        phi_identity = phi_identity + dagger(l).dot(l);
    }
    let i_c = C64::new(0.0, 1.0);
    let g = phi_identity.mapv(|z| z * 0.5) + h.entries().mapv(|z| z * i_c);

    let compat = &g + &dagger(&g) - &phi_identity;
    let scale = 1.0 + linalg::max_abs(&phi_identity);
    if linalg::max_abs(&compat) > 1e-12 * scale {
        return Err(Error::Linalg(format!(
            "compatibility defect {:.3e} after assembly",
            linalg::max_abs(&compat)
        )));
    }

    Ok(LindbladGenerator {
        space: space.clone(),
        kraus,
        h: h.into_entries(),
        g,
        phi_identity,
        max_word_order: max_order,
    })
}

impl LindbladGenerator {
    /// Construct directly from materialized parts; used by the interaction
    /// picture where the Kraus matrices are conjugated rather than rebuilt.
    fn from_parts(
        space: SpaceSpec,
        kraus: Vec<Array2<C64>>,
        h: Array2<C64>,
        g: Array2<C64>,
        phi_identity: Array2<C64>,
        max_word_order: u32,
    ) -> Self {
        LindbladGenerator {
            space,
            kraus,
            h,
            g,
            phi_identity,
            max_word_order,
        }
    }

    /// Same completely positive part, different Hermitian Hamiltonian.
    ///
    /// Used to pass between a full generator and its reduced form
    /// `G₀ = ½Φ(I) + i(H − H_sa − Λ)` in the interaction-representation
    /// certificates.
    pub fn with_hamiltonian(&self, h: Array2<C64>) -> Result<LindbladGenerator> {
        let d = self.space.total_dim();
        if h.dim() != (d, d) {
            return Err(Error::Dimension("hamiltonian shape mismatch".into()));
        }
        let scale = 1.0 + linalg::max_abs(&h);
        if linalg::hermiticity_defect(&h) > 1e-10 * scale {
            return Err(Error::NotHermitian("replacement Hamiltonian".into()));
        }
        let i_c = C64::new(0.0, 1.0);
        let g = self.phi_identity.mapv(|z| z * 0.5) + h.mapv(|z| z * i_c);
        Ok(LindbladGenerator {
            space: self.space.clone(),
            kraus: self.kraus.clone(),
            h,
            g,
            phi_identity: self.phi_identity.clone(),
            max_word_order: self.max_word_order,
        })
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn kraus(&self) -> &[Array2<C64>] {
        &self.kraus
    }

    pub fn hamiltonian(&self) -> &Array2<C64> {
        &self.h
    }

    pub fn g(&self) -> &Array2<C64> {
        &self.g
    }

    pub fn phi_identity(&self) -> &Array2<C64> {
        &self.phi_identity
    }

    /// Largest polynomial order appearing in the Hamiltonian and Kraus
    /// words; the default interior buffer for certificates on this
    /// generator.
    pub fn max_word_order(&self) -> u32 {
        self.max_word_order
    }

    fn check_shape(&self, x: &Array2<C64>) -> Result<()> {
        let d = self.space.total_dim();
        if x.dim() != (d, d) {
            return Err(Error::Dimension(format!(
                "operand shape {:?} does not match generator dimension {d}",
                x.dim()
            )));
        }
        Ok(())
    }

    /// `Φ(X) = Σ_k L_k† X L_k`.
    pub fn phi_apply(&self, x: &Array2<C64>) -> Result<Array2<C64>> {
        self.check_shape(x)?;
        let d = self.space.total_dim();
        let mut acc: Array2<C64> = Array2::zeros((d, d));
        for l in &self.kraus {
            acc = acc + dagger(l).dot(x).dot(l);
        }
        Ok(acc)
    }

    /// `Φ_*(ρ) = Σ_k L_k ρ L_k†`.
    pub fn phi_predual_apply(&self, rho: &Array2<C64>) -> Result<Array2<C64>> {
        self.check_shape(rho)?;
        let d = self.space.total_dim();
        let mut acc: Array2<C64> = Array2::zeros((d, d));
        for l in &self.kraus {
            acc = acc + l.dot(rho).dot(&dagger(l));
        }
        Ok(acc)
    }

    /// Heisenberg action `L(X) = Φ(X) − G†X − XG`.
    pub fn heisenberg_apply(&self, x: &Array2<C64>) -> Result<Array2<C64>> {
        self.check_shape(x)?;
        let gd = dagger(&self.g);
        Ok(self.phi_apply(x)? - gd.dot(x) - x.dot(&self.g))
    }

    /// Predual (Schrödinger) action `L_*(ρ) = Σ_k L_k ρ L_k† − Gρ − ρG†`.
    ///
    /// Satisfies `tr(X · L_*(ρ)) = tr(L(X) · ρ)` at matrix level.
    pub fn predual_apply(&self, rho: &Array2<C64>) -> Result<Array2<C64>> {
        self.check_shape(rho)?;
        let gd = dagger(&self.g);
        Ok(self.phi_predual_apply(rho)? - self.g.dot(rho) - rho.dot(&gd))
    }

    /// Dense superoperator in column-stacking vectorization.
    ///
    /// Brute-force oracle: `total_dim` must not exceed `cap`.
    pub fn superoperator_matrix(&self, picture: Picture, cap: usize) -> Result<Array2<C64>> {
        let d = self.space.total_dim();
        if d > cap {
            return Err(Error::InvalidArg(format!(
                "total dimension {d} exceeds the superoperator oracle cap {cap}"
            )));
        }
        let eye = Array2::from_diag_elem(d, C64::new(1.0, 0.0));
        let gd = dagger(&self.g);
        let mut s: Array2<C64> = Array2::zeros((d * d, d * d));
        match picture {
            Picture::Heisenberg => {
                for l in &self.kraus {
                    s = s + kron(&l.t().to_owned(), &dagger(l));
                }
                s = s - kron(&eye, &gd) - kron(&self.g.t().to_owned(), &eye);
            }
            Picture::Predual => {
                for l in &self.kraus {
                    s = s + kron(&l.mapv(|z| z.conj()), l);
                }
                s = s - kron(&eye, &self.g) - kron(&self.g.mapv(|z| z.conj()), &eye);
            }
        }
        Ok(s)
    }

    /// Generator at time `t` in the interaction representation generated by
    /// a constant Hermitian `H_int`: every coefficient is conjugated by
    /// `U_t = exp(-i t H_int)`, i.e. `L_k(t) = U_t† L_k U_t`,
    /// `G(t) = U_t† G U_t`. With `H_int = a†a` this phases a jump operator
    /// `a` to `e^{-it} a`.
    ///
    /// The unitary is computed from the eigendecomposition of `H_int`, so
    /// repeated calls at different times reuse no state but stay exact.
    pub fn interaction_picture(&self, h_int: &OperatorMatrix, t: f64) -> Result<LindbladGenerator> {
        self.check_shape(h_int.entries())?;
        let scale = 1.0 + linalg::max_abs(h_int.entries());
        if linalg::hermiticity_defect(h_int.entries()) > 1e-10 * scale {
            return Err(Error::NotHermitian(
                "interaction Hamiltonian must be Hermitian".into(),
            ));
        }
        let (vals, vecs) = linalg::eigh(h_int.entries())?;
        let u = linalg::from_eigh(&vals, &vecs, |x| (C64::new(0.0, -t * x)).exp());
        let ud = dagger(&u);
        let conj = |m: &Array2<C64>| ud.dot(m).dot(&u);
        let kraus = self.kraus.iter().map(|l| conj(l)).collect();
        Ok(LindbladGenerator::from_parts(
            self.space.clone(),
            kraus,
            conj(&self.h),
            conj(&self.g),
            conj(&self.phi_identity),
            self.max_word_order,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::ModeFactor;
    use crate::linalg::{expm, max_abs, min_eig_hermitian, trace, vec_col};
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn word_a(mode: usize) -> PolyTerm {
        PolyTerm::scalar(
            c(1.0, 0.0),
            vec![ModeFactor {
                mode,
                dagger: 0,
                plain: 1,
            }],
        )
    }

    /// Single-mode damped oscillator: Kraus √γ a, H = 0.
    fn damped(d: usize, gamma: f64) -> LindbladGenerator {
        let s = SpaceSpec::single_mode(d).unwrap();
        let cp = CPMapSpec::new(vec![KrausTerm::scalar_word(gamma, word_a(0))]);
        assemble(&s, &cp, &[]).unwrap()
    }

    fn rand_matrix(rng: &mut impl Rng, d: usize) -> Array2<C64> {
        Array2::from_shape_fn((d, d), |_| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    fn rand_hermitian(rng: &mut impl Rng, d: usize) -> Array2<C64> {
        let m = rand_matrix(rng, d);
        (&m + &dagger(&m)).mapv(|z| z * 0.5)
    }

    #[test]
    fn empty_spec_gives_zero_generator() {
        let s = SpaceSpec::single_mode(3).unwrap();
        let l = assemble(&s, &CPMapSpec::default(), &[]).unwrap();
        assert_eq!(max_abs(l.g()), 0.0);
        assert_eq!(max_abs(l.phi_identity()), 0.0);
        assert!(l.kraus().is_empty());
        let x = Array2::from_diag_elem(3, c(2.0, 0.0));
        assert_eq!(max_abs(&l.heisenberg_apply(&x).unwrap()), 0.0);
        assert_eq!(max_abs(&l.predual_apply(&x).unwrap()), 0.0);
    }

    #[test]
    fn damped_oscillator_phi_identity_is_number_operator() {
        let l = damped(6, 1.0);
        for i in 0..6 {
            assert!((l.phi_identity()[[i, i]] - c(i as f64, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn compatibility_holds_for_spin_valued_assembly() {
        // two modes ⊗ C² with matrix-coefficient terms
        let s = SpaceSpec::new(vec![4, 4], 2).unwrap();
        let mut sp = Array2::zeros((2, 2));
        sp[[0, 1]] = c(1.0, 0.0); // sigma_plus
        let mut sm = Array2::zeros((2, 2));
        sm[[1, 0]] = c(1.0, 0.0); // sigma_minus
        let h_terms = vec![
            PolyTerm::scalar(
                c(0.0, 1.0),
                vec![ModeFactor {
                    mode: 0,
                    dagger: 1,
                    plain: 0,
                }],
            ),
            PolyTerm::new(
                CoeffBlock::Matrix(sp.dot(&sm).mapv(|z| z * 0.5)),
                vec![],
            ),
            PolyTerm::new(
                CoeffBlock::Matrix(sp.mapv(|z| z * c(0.0, 0.5))),
                vec![ModeFactor {
                    mode: 1,
                    dagger: 0,
                    plain: 1,
                }],
            ),
        ];
        let cp = CPMapSpec::new(vec![
            KrausTerm::scalar_word(1.0, word_a(0)),
            KrausTerm::scalar_word(1.0, word_a(1)),
            KrausTerm::new(
                CoeffBlock::Scalar(c(1.0, 0.0)),
                vec![PolyTerm::new(CoeffBlock::Matrix(sm), vec![])],
            ),
        ]);
        let l = assemble(&s, &cp, &h_terms).unwrap();
        let defect = l.g() + &dagger(l.g()) - l.phi_identity();
        assert!(max_abs(&defect) < 1e-12);
        // unitality at matrix level
        let eye = Array2::from_diag_elem(s.total_dim(), c(1.0, 0.0));
        assert!(max_abs(&l.heisenberg_apply(&eye).unwrap()) < 1e-13);
    }

    #[test]
    fn non_psd_coefficient_rejected() {
        let s = SpaceSpec::single_mode(3).unwrap();
        let cp = CPMapSpec::new(vec![KrausTerm::scalar_word(-1.0, word_a(0))]);
        assert!(assemble(&s, &cp, &[]).is_err());
    }

    #[test]
    fn heisenberg_decays_number_operator() {
        // interior rows of L(a†a) equal -a†a for the damped oscillator
        let l = damped(8, 1.0);
        let mut n: Array2<C64> = Array2::zeros((8, 8));
        for i in 0..8 {
            n[[i, i]] = c(i as f64, 0.0);
        }
        let out = l.heisenberg_apply(&n).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { -(i as f64) } else { 0.0 };
                assert!((out[[i, j]] - c(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn predual_decays_excited_state() {
        let l = damped(4, 1.0);
        let mut rho: Array2<C64> = Array2::zeros((4, 4));
        rho[[1, 1]] = c(1.0, 0.0);
        let out = l.predual_apply(&rho).unwrap();
        let mut want: Array2<C64> = Array2::zeros((4, 4));
        want[[0, 0]] = c(1.0, 0.0);
        want[[1, 1]] = c(-1.0, 0.0);
        assert!(max_abs(&(&out - &want)) < 1e-13);
    }

    #[test]
    fn trace_duality_on_random_pairs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let l = damped(4, 1.0);
        for _ in 0..20 {
            let x = rand_hermitian(&mut rng, 4);
            let rho = rand_hermitian(&mut rng, 4);
            let lhs = trace(&x.dot(&l.predual_apply(&rho).unwrap()));
            let rhs = trace(&l.heisenberg_apply(&x).unwrap().dot(&rho));
            assert!((lhs - rhs).norm() < 1e-12 * (1.0 + lhs.norm()));
        }
    }

    #[test]
    fn superoperator_zero_generator() {
        let s = SpaceSpec::single_mode(2).unwrap();
        let l = assemble(&s, &CPMapSpec::default(), &[]).unwrap();
        let sm = l.superoperator_matrix(Picture::Heisenberg, 64).unwrap();
        assert_eq!(sm.dim(), (4, 4));
        assert_eq!(max_abs(&sm), 0.0);
        let e = expm(&sm).unwrap();
        for i in 0..4 {
            assert!((e[[i, i]] - c(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn superoperator_matches_direct_application() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let s = SpaceSpec::single_mode(3).unwrap();
        let h = vec![PolyTerm::scalar(
            c(0.4, 0.2),
            vec![ModeFactor {
                mode: 0,
                dagger: 1,
                plain: 0,
            }],
        )];
        let cp = CPMapSpec::new(vec![KrausTerm::scalar_word(0.7, word_a(0))]);
        let l = assemble(&s, &cp, &h).unwrap();
        let sh = l.superoperator_matrix(Picture::Heisenberg, 64).unwrap();
        let sp = l.superoperator_matrix(Picture::Predual, 64).unwrap();
        for _ in 0..10 {
            let x = rand_matrix(&mut rng, 3);
            let via_matrix = sh.dot(&vec_col(&x));
            let direct = vec_col(&l.heisenberg_apply(&x).unwrap());
            for k in 0..9 {
                assert!((via_matrix[k] - direct[k]).norm() < 1e-12);
            }
            let via_matrix = sp.dot(&vec_col(&x));
            let direct = vec_col(&l.predual_apply(&x).unwrap());
            for k in 0..9 {
                assert!((via_matrix[k] - direct[k]).norm() < 1e-12);
            }
        }
        // predual and heisenberg are adjoint in the trace pairing
        let defect = &sp - &dagger(&sh);
        assert!(max_abs(&defect) < 1e-12);
    }

    #[test]
    fn superoperator_cap_enforced() {
        let l = damped(9, 1.0);
        assert!(l.superoperator_matrix(Picture::Heisenberg, 8).is_err());
    }

    #[test]
    fn predual_exponential_preserves_positivity_at_small_steps() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let l = damped(3, 1.0);
        let sp = l.superoperator_matrix(Picture::Predual, 64).unwrap();
        let prop = expm(&sp.mapv(|z| z * c(1e-3, 0.0))).unwrap();
        for _ in 0..5 {
            let b = rand_matrix(&mut rng, 3);
            let rho = b.dot(&dagger(&b));
            let rho = rho.mapv(|z| z / trace(&rho));
            let out = crate::linalg::unvec_col(&prop.dot(&vec_col(&rho)), 3);
            assert!(min_eig_hermitian(&out.mapv(|z| z)).unwrap() >= -1e-8);
        }
    }

    #[test]
    fn interaction_picture_at_zero_is_identity_map() {
        let l = damped(5, 0.8);
        let mut hm: Array2<C64> = Array2::zeros((5, 5));
        for i in 0..5 {
            hm[[i, i]] = c(i as f64, 0.0);
        }
        let h_int = OperatorMatrix::hermitian(l.space().clone(), hm).unwrap();
        let lt = l.interaction_picture(&h_int, 0.0).unwrap();
        assert!(max_abs(&(lt.g() - l.g())) < 1e-13);
        assert!(max_abs(&(&lt.kraus()[0] - &l.kraus()[0])) < 1e-13);
    }

    #[test]
    fn interaction_picture_phases_the_jump_operator() {
        // H_int = a†a, L = a: L(t) = e^{-it} a
        let l = damped(6, 1.0);
        let mut hm: Array2<C64> = Array2::zeros((6, 6));
        for i in 0..6 {
            hm[[i, i]] = c(i as f64, 0.0);
        }
        let h_int = OperatorMatrix::hermitian(l.space().clone(), hm).unwrap();
        for t in [0.3, 1.1, 2.7] {
            let lt = l.interaction_picture(&h_int, t).unwrap();
            let phase = (c(0.0, -t)).exp();
            let want = l.kraus()[0].mapv(|z| z * phase);
            assert!(max_abs(&(&lt.kraus()[0] - &want)) < 1e-10);
        }
    }

    #[test]
    fn interaction_picture_is_unitarily_equivalent_to_shifted_generator() {
        // Integrating the time-dependent interaction-picture superoperator
        // must match conjugation of exp(t (S_L + S_comm)) where S_comm is the
        // superoperator of i[H_int, ·].
        let s = SpaceSpec::single_mode(4).unwrap();
        let h = vec![PolyTerm::scalar(
            c(0.0, 0.5),
            vec![ModeFactor {
                mode: 0,
                dagger: 1,
                plain: 0,
            }],
        )];
        let cp = CPMapSpec::new(vec![KrausTerm::scalar_word(0.6, word_a(0))]);
        let l = assemble(&s, &cp, &h).unwrap();

        // H_int: a†a plus a drive, Hermitian, not commuting with H
        let h_int_terms = vec![
            PolyTerm::scalar(
                c(0.5, 0.0),
                vec![ModeFactor {
                    mode: 0,
                    dagger: 1,
                    plain: 1,
                }],
            ),
            PolyTerm::scalar(
                c(0.15, 0.0),
                vec![ModeFactor {
                    mode: 0,
                    dagger: 1,
                    plain: 0,
                }],
            ),
        ];
        let h_int = eval_polynomial(&s, &h_int_terms, true).unwrap();

        let t_final = 0.7;
        let steps = 4000usize;
        let dt = t_final / steps as f64;
        let dim2 = 16usize;
        // route A: RK4 on dV/dt = S_t V with S_t from interaction_picture
        let s_at = |t: f64| {
            l.interaction_picture(&h_int, t)
                .unwrap()
                .superoperator_matrix(Picture::Heisenberg, 64)
                .unwrap()
        };
        let mut v: Array2<C64> = Array2::from_diag_elem(dim2, c(1.0, 0.0));
        for k in 0..steps {
            let t0 = k as f64 * dt;
            let s0 = s_at(t0);
            let sh = s_at(t0 + dt / 2.0);
            let s1 = s_at(t0 + dt);
            let k1 = s0.dot(&v);
            let k2 = sh.dot(&(&v + &k1.mapv(|z| z * c(dt / 2.0, 0.0))));
            let k3 = sh.dot(&(&v + &k2.mapv(|z| z * c(dt / 2.0, 0.0))));
            let k4 = s1.dot(&(&v + &k3.mapv(|z| z * c(dt, 0.0))));
            v = &v
                + &(k1 + k2.mapv(|z| z * c(2.0, 0.0)) + k3.mapv(|z| z * c(2.0, 0.0)) + k4)
                    .mapv(|z| z * c(dt / 6.0, 0.0));
        }

        // route B: with U_t = e^{-itH_int} the substitution C = U B U† turns
        // the interaction-picture equation into dC/dt = (L - i[H_int, ·])(C),
        // so T_t(B) = U_t† exp(t (S_L - S_comm))(B) U_t.
        let s_l = l.superoperator_matrix(Picture::Heisenberg, 64).unwrap();
        let eye = Array2::from_diag_elem(4, c(1.0, 0.0));
        let s_comm = (kron(&eye, h_int.entries()) - kron(&h_int.entries().t().to_owned(), &eye))
            .mapv(|z| z * c(0.0, 1.0));
        let e = expm(&(&s_l - &s_comm).mapv(|z| z * c(t_final, 0.0))).unwrap();
        let (vals, vecs) = linalg::eigh(h_int.entries()).unwrap();
        let u = linalg::from_eigh(&vals, &vecs, |x| (c(0.0, -t_final * x)).exp());
        let cconj = kron(&u.t().to_owned(), &dagger(&u));
        let want = cconj.dot(&e);

        assert!(max_abs(&(&v - &want)) < 1e-8);
    }
}
