//! Model configuration: schema, validation, binding, and the gallery.
//!
//! Configs are JSON key-value trees with a strict schema (unknown keys are
//! rejected). Coefficients are bound against the named scalar `parameters`
//! table; referencing an unbound name is its own error class so shell
//! pipelines can tell a typo from a parse error.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::prelude::*;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::certify::{BalanceKind, BalanceTerm, LadderReference};
use crate::fock::{diagonal_lambda, eval_polynomial, CoeffBlock, ModeFactor, PolyTerm};
use crate::lindblad::{assemble, CPMapSpec, KrausTerm, LindbladGenerator};
use crate::space::{OperatorMatrix, SpaceSpec};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub mode_dims: Vec<usize>,
    pub spin_dim: usize,
}

impl SpaceConfig {
    pub fn to_space(&self) -> Result<SpaceSpec> {
        SpaceSpec::new(self.mode_dims.clone(), self.spin_dim)
    }
}

/// A coefficient: `(re + i·im) · parameters[param] · scale`, optionally
/// times an explicit spin block. `re` defaults to 1 when neither part is
/// given so that `{"param": "gamma"}` reads naturally.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CoeffConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub re: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<[f64; 2]>>>,
}

impl CoeffConfig {
    pub fn bind(&self, params: &BTreeMap<String, f64>) -> Result<CoeffBlock> {
        let mut value = C64::new(
            self.re.unwrap_or(if self.im.is_some() { 0.0 } else { 1.0 }),
            self.im.unwrap_or(0.0),
        );
        if let Some(name) = &self.param {
            let p = params
                .get(name)
                .ok_or_else(|| Error::UnboundParameter(name.clone()))?;
            value *= C64::new(*p, 0.0);
        }
        if let Some(s) = self.scale {
            value *= C64::new(s, 0.0);
        }
        match &self.matrix {
            None => Ok(CoeffBlock::Scalar(value)),
            Some(rows) => {
                let m = rows.len();
                let mut block = Array2::zeros((m, m));
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != m {
                        return Err(Error::Dimension(
                            "coefficient matrix must be square".into(),
                        ));
                    }
                    for (j, e) in row.iter().enumerate() {
                        block[[i, j]] = C64::new(e[0], e[1]) * value;
                    }
                }
                Ok(CoeffBlock::Matrix(block))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorConfig {
    pub mode: usize,
    #[serde(default)]
    pub dagger: u32,
    #[serde(default)]
    pub plain: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeff: Option<CoeffConfig>,
    #[serde(default)]
    pub factors: Vec<FactorConfig>,
}

impl TermConfig {
    pub fn bind(&self, params: &BTreeMap<String, f64>) -> Result<PolyTerm> {
        let coeff = match &self.coeff {
            Some(c) => c.bind(params)?,
            None => CoeffBlock::one(),
        };
        let factors = self
            .factors
            .iter()
            .map(|f| ModeFactor {
                mode: f.mode,
                dagger: f.dagger,
                plain: f.plain,
            })
            .collect();
        Ok(PolyTerm::new(coeff, factors))
    }
}

pub fn bind_terms(terms: &[TermConfig], params: &BTreeMap<String, f64>) -> Result<Vec<PolyTerm>> {
    terms.iter().map(|t| t.bind(params)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrausConfig {
    pub coefficient: CoeffConfig,
    pub words: Vec<TermConfig>,
}

pub fn bind_cp_map(
    kraus: &[KrausConfig],
    params: &BTreeMap<String, f64>,
) -> Result<CPMapSpec> {
    let terms = kraus
        .iter()
        .map(|k| {
            Ok(KrausTerm::new(
                k.coefficient.bind(params)?,
                bind_terms(&k.words, params)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CPMapSpec::new(terms))
}

/// Reference-operator constructors available to configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaConfig {
    /// `c_Λ (I + Σ_k (a_k†a_k)^{m_k})`
    DiagonalPower { c_lambda: f64, exponents: Vec<u32> },
    /// `c (I + Σ_k (a_k†)^{m_k} a_k^{m_k})`
    FallingPower { c: f64, orders: Vec<u32> },
    /// Two-mode ladder family from the exchange-pump construction.
    Ladder {
        l_order: u32,
        m_order: u32,
        big_n: usize,
        lambda0: f64,
        slack: f64,
    },
}

impl LambdaConfig {
    pub fn build(&self, space: &SpaceSpec) -> Result<OperatorMatrix> {
        match self {
            LambdaConfig::DiagonalPower { c_lambda, exponents } => {
                diagonal_lambda(space, *c_lambda, exponents)
            }
            LambdaConfig::FallingPower { c, orders } => {
                if orders.len() != space.n_modes() {
                    return Err(Error::Dimension(
                        "one falling-power order per mode required".into(),
                    ));
                }
                let mut terms = vec![PolyTerm::scalar(C64::new(*c, 0.0), vec![])];
                for (k, &m) in orders.iter().enumerate() {
                    terms.push(PolyTerm::scalar(
                        C64::new(*c, 0.0),
                        vec![ModeFactor {
                            mode: k,
                            dagger: m,
                            plain: m,
                        }],
                    ));
                }
                let op = eval_polynomial(space, &terms, false)?;
                OperatorMatrix::hermitian(space.clone(), op.into_entries())
            }
            LambdaConfig::Ladder {
                l_order,
                m_order,
                big_n,
                lambda0,
                slack,
            } => {
                let LadderReference { operator, .. } = crate::certify::build_lambda_n(
                    space, *l_order, *m_order, *big_n, *lambda0, *slack,
                )?;
                Ok(operator)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalanceTermConfig {
    pub kind: String, // "loss" or "gain"
    pub coefficient: CoeffConfig,
    pub order: u32,
}

impl BalanceTermConfig {
    pub fn bind(&self, params: &BTreeMap<String, f64>) -> Result<BalanceTerm> {
        let kind = match self.kind.as_str() {
            "loss" => BalanceKind::Loss,
            "gain" => BalanceKind::Gain,
            other => {
                return Err(Error::Config(format!(
                    "balance term kind must be 'loss' or 'gain', got '{other}'"
                )))
            }
        };
        Ok(BalanceTerm {
            kind,
            coeff: self.coefficient.bind(params)?,
            order: self.order,
        })
    }
}

/// One requested certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckConfig {
    Reference {
        lambda: LambdaConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<f64>,
    },
    LambdaPair {
        lambda: LambdaConfig,
        /// Indices into `hamiltonian`: the self-adjoint part `H_sa`.
        h_sa_indices: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        nu: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c1: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c2: Option<f64>,
        /// Times for the direct interaction-representation cross-check.
        #[serde(default)]
        chain_times: Vec<f64>,
    },
    Balance {
        terms: Vec<BalanceTermConfig>,
        n_power: u32,
        n_max: usize,
        #[serde(default)]
        component: bool,
    },
    Deficiency {
        dims: Vec<usize>,
        #[serde(default)]
        component: bool,
    },
    Witness {
        eps: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q_steps: Option<usize>,
        #[serde(default)]
        component: bool,
    },
    Lemma41 {
        l_order: u32,
        m_order: u32,
        big_n: usize,
        lambda0: f64,
        slack: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificatesConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interior_buffer: Option<usize>,
    /// Truncations for dimension-sweepable checks; the base space is used
    /// when empty.
    #[serde(default)]
    pub dims_sweep: Vec<Vec<usize>>,
    pub checks: Vec<CheckConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Fock {
        occupations: Vec<usize>,
        #[serde(default)]
        spin: usize,
    },
    Amplitudes {
        entries: Vec<AmplitudeEntry>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudeEntry {
    pub occupations: Vec<usize>,
    #[serde(default)]
    pub spin: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl InitialConfig {
    /// Resolve to a unit vector on the given space.
    pub fn build_state(&self, space: &SpaceSpec) -> Result<Array1<C64>> {
        let d = space.total_dim();
        let mut v: Array1<C64> = Array1::zeros(d);
        match self {
            InitialConfig::Fock { occupations, spin } => {
                let idx = space.index_of(occupations, *spin)?;
                v[idx] = C64::new(1.0, 0.0);
            }
            InitialConfig::Amplitudes { entries } => {
                if entries.is_empty() {
                    return Err(Error::Config("empty amplitude list".into()));
                }
                for e in entries {
                    let idx = space.index_of(&e.occupations, e.spin)?;
                    v[idx] += C64::new(e.re, e.im);
                }
                let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if n == 0.0 {
                    return Err(Error::Config("amplitudes sum to the zero vector".into()));
                }
                v.mapv_inplace(|z| z / C64::new(n, 0.0));
            }
        }
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub t_max: f64,
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    pub initial: InitialConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoriesConfig {
    pub n_traj: usize,
    pub t_max: f64,
    pub dt: f64,
    pub jump_cap: usize,
    pub base_seed: u64,
    pub initial: InitialConfig,
    #[serde(default)]
    pub use_component: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    pub t: f64,
    pub n_max: usize,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
}

/// Submodel for block-diagonal analysis (e.g. one spin block of a
/// spin-coupled map).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub space: SpaceConfig,
    #[serde(default)]
    pub hamiltonian: Vec<TermConfig>,
    #[serde(default)]
    pub cp_map: Vec<KrausConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub space: SpaceConfig,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    #[serde(default)]
    pub hamiltonian: Vec<TermConfig>,
    #[serde(default)]
    pub cp_map: Vec<KrausConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<ComponentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificates: Option<CertificatesConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolution: Option<EvolutionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<TrajectoriesConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration: Option<IterationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

impl ModelConfig {
    pub fn space(&self) -> Result<SpaceSpec> {
        self.space.to_space()
    }

    /// Assemble the generator at the configured truncation.
    pub fn assemble(&self) -> Result<LindbladGenerator> {
        self.assemble_at(&self.space.mode_dims)
    }

    /// Assemble at a different per-mode truncation (same spin factor).
    pub fn assemble_at(&self, mode_dims: &[usize]) -> Result<LindbladGenerator> {
        let space = SpaceSpec::new(mode_dims.to_vec(), self.space.spin_dim)?;
        let cp = bind_cp_map(&self.cp_map, &self.parameters)?;
        let h = bind_terms(&self.hamiltonian, &self.parameters)?;
        assemble(&space, &cp, &h)
    }

    /// Assemble the component submodel, optionally re-dimensioned.
    pub fn assemble_component(&self, mode_dims: Option<&[usize]>) -> Result<LindbladGenerator> {
        let comp = self
            .component
            .as_ref()
            .ok_or_else(|| Error::Config("model has no component section".into()))?;
        let dims = mode_dims.unwrap_or(&comp.space.mode_dims);
        let space = SpaceSpec::new(dims.to_vec(), comp.space.spin_dim)?;
        let cp = bind_cp_map(&comp.cp_map, &self.parameters)?;
        let h = bind_terms(&comp.hamiltonian, &self.parameters)?;
        assemble(&space, &cp, &h)
    }

    /// Hamiltonian terms of the analysis target for a deficiency search.
    pub fn hamiltonian_terms(&self, component: bool) -> Result<(Vec<PolyTerm>, usize)> {
        if component {
            let comp = self
                .component
                .as_ref()
                .ok_or_else(|| Error::Config("model has no component section".into()))?;
            Ok((
                bind_terms(&comp.hamiltonian, &self.parameters)?,
                comp.space.spin_dim,
            ))
        } else {
            Ok((
                bind_terms(&self.hamiltonian, &self.parameters)?,
                self.space.spin_dim,
            ))
        }
    }

    /// Full validation: every space, coefficient binding, and initial state
    /// must resolve.
    pub fn validate(&self) -> Result<()> {
        let space = self.space()?;
        let _ = self.assemble()?;
        if let Some(comp) = &self.component {
            comp.space.to_space()?;
            let _ = self.assemble_component(None)?;
        }
        if let Some(ev) = &self.evolution {
            let s = match &ev.dims {
                Some(d) => SpaceSpec::new(d.clone(), self.space.spin_dim)?,
                None => space.clone(),
            };
            let _ = ev.initial.build_state(&s)?;
            if ev.dt <= 0.0 || ev.t_max <= 0.0 {
                return Err(Error::Config("evolution needs positive t_max and dt".into()));
            }
        }
        if let Some(tr) = &self.trajectories {
            let target = if tr.use_component {
                let comp = self
                    .component
                    .as_ref()
                    .ok_or_else(|| Error::Config("trajectories target a missing component".into()))?;
                match &tr.dims {
                    Some(d) => SpaceSpec::new(d.clone(), comp.space.spin_dim)?,
                    None => comp.space.to_space()?,
                }
            } else {
                match &tr.dims {
                    Some(d) => SpaceSpec::new(d.clone(), self.space.spin_dim)?,
                    None => space.clone(),
                }
            };
            let _ = tr.initial.build_state(&target)?;
        }
        if let Some(cert) = &self.certificates {
            for dims in &cert.dims_sweep {
                if dims.len() != self.space.mode_dims.len() {
                    return Err(Error::Dimension(
                        "dims_sweep entry has the wrong number of modes".into(),
                    ));
                }
            }
            for check in &cert.checks {
                if let CheckConfig::LambdaPair { h_sa_indices, .. } = check {
                    for &i in h_sa_indices {
                        if i >= self.hamiltonian.len() {
                            return Err(Error::Config(format!(
                                "h_sa index {i} out of range ({} hamiltonian terms)",
                                self.hamiltonian.len()
                            )));
                        }
                    }
                }
                if let CheckConfig::Balance { terms, .. } = check {
                    for t in terms {
                        t.bind(&self.parameters)?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization")
    }
}

/// Parse and validate a config file.
pub fn load_config(path: &Path) -> Result<ModelConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// Parse and validate config text.
pub fn parse_config(text: &str) -> Result<ModelConfig> {
    let cfg: ModelConfig = serde_json::from_str(text).map_err(|e| {
        Error::Config(format!(
            "parse error at line {}, column {}: {e}",
            e.line(),
            e.column()
        ))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Canned gallery entries.
pub const GALLERY_NAMES: [&str; 8] = [
    "ex1",
    "ex2",
    "ex3_sbp",
    "ex4_kilin",
    "ex5_balance",
    "ex5_sm_unregular",
    "ex6_lmv",
    "eq33_deficiency",
];

/// Fetch a gallery entry by name.
pub fn gallery(name: &str) -> Result<ModelConfig> {
    let text = match name {
        "ex1" => include_str!("../gallery/ex1.json"),
        "ex2" => include_str!("../gallery/ex2.json"),
        "ex3_sbp" => include_str!("../gallery/ex3_sbp.json"),
        "ex4_kilin" => include_str!("../gallery/ex4_kilin.json"),
        "ex5_balance" => include_str!("../gallery/ex5_balance.json"),
        "ex5_sm_unregular" => include_str!("../gallery/ex5_sm_unregular.json"),
        "ex6_lmv" => include_str!("../gallery/ex6_lmv.json"),
        "eq33_deficiency" => include_str!("../gallery/eq33_deficiency.json"),
        other => {
            return Err(Error::Config(format!(
                "unknown gallery entry '{other}'; available: {}",
                GALLERY_NAMES.join(", ")
            )))
        }
    };
    parse_config(text)
}
