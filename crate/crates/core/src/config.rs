//! JSON experiment configs and their translation into runnable experiments.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::convex_sets::{projection_operator, ConvexSet};
use crate::diagnostics::{check_vi_limit, h2p_tail, FixSet, LimitReport, ViOptions};
use crate::engine::{
    self, check_h1n_on_run, estimate_q_map, Anchor, IterationTrace, OperatorFamily, QMapEstimate, QMapOptions,
    StopRule,
};
use crate::error::{Error, Result};
use crate::hilbert::{check_dims, matrix, Vector};
use crate::monotone::{
    projected_gradient_map, AffineMonotoneOp, InnerSolverOptions, QuadraticBifunction, DEFAULT_INNER_TOL,
    DEFAULT_MAX_INNER,
};
use crate::operators::{averaged, compose, convex_combination, ContractionSpec, MeirKeelerSpec, Operator};
use crate::schedules::{HypothesisReport, Schedule};

/// Inner tolerances must sit at least this factor below any outer threshold.
pub const TOLERANCE_FACTOR: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonotoneConfig {
    pub m: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

impl MonotoneConfig {
    pub fn build(&self) -> Result<AffineMonotoneOp> {
        AffineMonotoneOp::new(matrix(&self.m)?, Vector::from_vec(self.q.clone()), self.mu)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BifunctionConfig {
    pub m: Vec<Vec<f64>>,
    pub q: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorConfig {
    Identity { dim: usize },
    Affine { m: Vec<Vec<f64>>, b: Vec<f64> },
    Rotation { angle: f64 },
    Projection { set: ConvexSet },
    Resolvent { operator: MonotoneConfig, r: f64 },
    ProjectedGradient { set: ConvexSet, operator: MonotoneConfig, lambda: f64 },
    Composition { operators: Vec<OperatorConfig> },
    ConvexCombination { operators: Vec<OperatorConfig>, weights: Vec<f64> },
    Averaged { operator: Box<OperatorConfig>, lambda: f64 },
}

impl OperatorConfig {
    pub fn build(&self) -> Result<Operator> {
        match self {
            OperatorConfig::Identity { dim } => Ok(Operator::identity(*dim)),
            OperatorConfig::Affine { m, b } => Operator::affine(matrix(m)?, Vector::from_vec(b.clone())),
            OperatorConfig::Rotation { angle } => Ok(Operator::rotation(*angle)),
            OperatorConfig::Projection { set } => Ok(projection_operator(set)),
            OperatorConfig::Resolvent { operator, r } => operator.build()?.resolvent(*r),
            OperatorConfig::ProjectedGradient { set, operator, lambda } => {
                projected_gradient_map(set, &operator.build()?, *lambda)
            }
            OperatorConfig::Composition { operators } => {
                let ops = build_all(operators)?;
                let mut acc = ops[ops.len() - 1].clone();
                for op in ops[..ops.len() - 1].iter().rev() {
                    acc = compose(op, &acc)?;
                }
                Ok(acc)
            }
            OperatorConfig::ConvexCombination { operators, weights } => {
                convex_combination(&build_all(operators)?, weights)
            }
            OperatorConfig::Averaged { operator, lambda } => averaged(&operator.build()?, *lambda),
        }
    }
}

fn build_all(ops: &[OperatorConfig]) -> Result<Vec<Operator>> {
    if ops.is_empty() {
        return Err(Error::Config("operator list is empty".into()));
    }
    ops.iter().map(OperatorConfig::build).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnchorConfig {
    /// `f ≡ value`
    Constant { value: Vec<f64> },
    /// `f(x) = M x + b` with declared modulus `alpha`.
    ContractionAffine { alpha: f64, m: Vec<Vec<f64>>, b: Vec<f64> },
    /// `Φ(x) = anchor + (x - center) φ(|x - center|)`.
    MkcRadial { anchor: Vec<f64>, center: Vec<f64> },
}

impl AnchorConfig {
    pub fn build(&self) -> Result<Anchor> {
        Ok(match self {
            AnchorConfig::Constant { value } => ContractionSpec::constant(Vector::from_vec(value.clone())).into(),
            AnchorConfig::ContractionAffine { alpha, m, b } => {
                ContractionSpec::affine(*alpha, matrix(m)?, Vector::from_vec(b.clone()))?.into()
            }
            AnchorConfig::MkcRadial { anchor, center } => {
                MeirKeelerSpec::radial(Vector::from_vec(anchor.clone()), Vector::from_vec(center.clone()))?.into()
            }
        })
    }
}

fn default_inner_tol() -> f64 {
    DEFAULT_INNER_TOL
}

fn default_max_inner() -> usize {
    DEFAULT_MAX_INNER
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyConfig {
    Constant {
        operator: OperatorConfig,
    },
    Mann {
        operator: OperatorConfig,
        beta: Schedule,
    },
    Cyclic {
        operators: Vec<OperatorConfig>,
    },
    ResolventVarying {
        operator: MonotoneConfig,
        r: Schedule,
    },
    ConvexCombVarying {
        operators: Vec<OperatorConfig>,
        weights: Vec<Schedule>,
    },
    ProjectedGradientVarying {
        set: ConvexSet,
        operator: MonotoneConfig,
        lambda: Schedule,
    },
    EquilibriumVarying {
        bifunction: BifunctionConfig,
        set: ConvexSet,
        r: Schedule,
        #[serde(default = "default_inner_tol")]
        inner_tol: f64,
        #[serde(default = "default_max_inner")]
        max_inner: usize,
    },
    GammaChain {
        operators: Vec<OperatorConfig>,
        betas: Vec<Schedule>,
    },
    Retracted {
        operator: OperatorConfig,
        set: ConvexSet,
    },
    Composition {
        operators: Vec<OperatorConfig>,
    },
}

impl FamilyConfig {
    pub fn build(&self) -> Result<OperatorFamily> {
        match self {
            FamilyConfig::Constant { operator } => Ok(OperatorFamily::constant(operator.build()?)),
            FamilyConfig::Mann { operator, beta } => OperatorFamily::mann(operator.build()?, beta.clone()),
            FamilyConfig::Cyclic { operators } => OperatorFamily::cyclic(build_all(operators)?),
            FamilyConfig::ResolventVarying { operator, r } => {
                OperatorFamily::resolvent_varying(operator.build()?, r.clone())
            }
            FamilyConfig::ConvexCombVarying { operators, weights } => {
                OperatorFamily::convex_comb_varying(build_all(operators)?, weights.clone())
            }
            FamilyConfig::ProjectedGradientVarying { set, operator, lambda } => {
                OperatorFamily::projected_gradient_varying(set.clone(), operator.build()?, lambda.clone())
            }
            FamilyConfig::EquilibriumVarying {
                bifunction,
                set,
                r,
                inner_tol,
                max_inner,
            } => OperatorFamily::equilibrium_varying(
                QuadraticBifunction::new(matrix(&bifunction.m)?, Vector::from_vec(bifunction.q.clone()))?,
                set.clone(),
                r.clone(),
                InnerSolverOptions {
                    inner_tol: *inner_tol,
                    max_inner: *max_inner,
                },
            ),
            FamilyConfig::GammaChain { operators, betas } => {
                OperatorFamily::gamma_chain(build_all(operators)?, betas.clone())
            }
            FamilyConfig::Retracted { operator, set } => OperatorFamily::retracted(operator.build()?, set.clone()),
            FamilyConfig::Composition { operators } => OperatorFamily::composition(build_all(operators)?),
        }
    }

    fn inner_tol(&self) -> Option<f64> {
        match self {
            FamilyConfig::EquilibriumVarying { inner_tol, .. } => Some(*inner_tol),
            _ => None,
        }
    }
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitConfig {
    #[serde(default = "yes")]
    pub trace_csv: bool,
    /// Keep every k-th row of the trace (the last row is always kept).
    #[serde(default = "one")]
    pub every_k: usize,
}

impl Default for EmitConfig {
    fn default() -> Self {
        EmitConfig {
            trace_csv: true,
            every_k: 1,
        }
    }
}

fn default_vi_tol() -> f64 {
    1e-6
}

fn default_samples() -> usize {
    crate::sampling::DEFAULT_TRIALS
}

fn default_radius() -> f64 {
    10.0
}

fn default_tail() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// The common fixed point set `F`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fix_set: Option<FixSet>,
    /// A declared common fixed point `p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fix_point: Option<Vec<f64>>,
    #[serde(default = "default_vi_tol")]
    pub vi_tol: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Radius for sampling unbounded parts of `F`.
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_tail")]
    pub tail_fraction: f64,
    #[serde(default)]
    pub q_map: QMapOptions,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            fix_set: None,
            fix_point: None,
            vi_tol: default_vi_tol(),
            samples: default_samples(),
            radius: default_radius(),
            tail_fraction: default_tail(),
            q_map: QMapOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    #[serde(default)]
    pub seed: u64,
    pub x0: Vec<f64>,
    pub f: AnchorConfig,
    pub family: FamilyConfig,
    pub alpha: Schedule,
    #[serde(default)]
    pub stop: StopRule,
    #[serde(default)]
    pub emit: EmitConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("schema: {e}")))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn sha256(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn build(&self) -> Result<Experiment> {
        Experiment::new(self.clone())
    }
}

/// A validated, ready-to-run experiment.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub anchor: Anchor,
    pub family: OperatorFamily,
    pub alpha: Schedule,
    pub x0: Vector,
    pub fix_set: Option<FixSet>,
    pub fix_point: Option<Vector>,
}

impl Experiment {
    fn new(config: ExperimentConfig) -> Result<Self> {
        let family = config.family.build()?;
        let dim = family.dim();
        let x0 = Vector::from_vec(config.x0.clone());
        check_dims(dim, x0.len())?;
        let anchor = config.f.build()?;
        check_dims(dim, anchor.operator().dim())?;
        let alpha = config.alpha.clone();
        let stop = &config.stop;
        if stop.max_iters == 0 {
            return Err(Error::Config("stop.max_iters must be at least 1".into()));
        }
        if let Some(r) = stop.residual {
            if !(r > 0.0) {
                return Err(Error::Config("stop.residual must be positive".into()));
            }
        }
        if let Some(len) = alpha.len() {
            if len < stop.max_iters {
                return Err(Error::Config(format!(
                    "alpha list has {len} terms, fewer than stop.max_iters = {}",
                    stop.max_iters
                )));
            }
        }
        let in_range = match alpha.len() {
            Some(len) => (0..len).all(|n| alpha.value(n).is_ok_and(|a| a > 0.0 && a < 1.0)),
            None => alpha.values_within_open(0.0, 1.0),
        };
        if !in_range {
            return Err(Error::hypothesis("H3,N (i)", "α_n must lie in (0,1) for every n"));
        }
        if let Some(inner) = config.family.inner_tol() {
            let outer = [
                ("stop.residual", stop.residual),
                ("analysis.q_map.path_tol", Some(config.analysis.q_map.path_tol)),
            ];
            for (name, value) in outer {
                if let Some(v) = value {
                    if v < TOLERANCE_FACTOR * inner {
                        return Err(Error::Config(format!(
                            "tolerance hierarchy: {name} = {v:e} must be at least {TOLERANCE_FACTOR} × inner_tol = {inner:e}"
                        )));
                    }
                }
            }
        }
        if config.emit.every_k == 0 {
            return Err(Error::Config("emit.every_k must be at least 1".into()));
        }
        let a = &config.analysis;
        if !(a.tail_fraction > 0.0 && a.tail_fraction <= 1.0) {
            return Err(Error::Config("analysis.tail_fraction must lie in (0,1]".into()));
        }
        if let Some(f) = &a.fix_set {
            check_dims(dim, f.dim())?;
        }
        let fix_point = match &a.fix_point {
            Some(p) => {
                check_dims(dim, p.len())?;
                Some(Vector::from_vec(p.clone()))
            }
            None => None,
        };
        Ok(Experiment {
            fix_set: a.fix_set.clone(),
            fix_point,
            anchor,
            family,
            alpha,
            x0,
            config,
        })
    }

    pub fn n_shift(&self) -> usize {
        self.family.period()
    }

    pub fn vi_options(&self) -> ViOptions {
        ViOptions {
            tol: self.config.analysis.vi_tol,
            samples: self.config.analysis.samples,
            radius: self.config.analysis.radius,
            seed: self.config.seed,
        }
    }

    pub fn run(&self) -> Result<IterationTrace> {
        self.run_with(&self.config.stop)
    }

    pub fn run_with(&self, stop: &StopRule) -> Result<IterationTrace> {
        let echo = serde_json::to_value(&self.config)?;
        engine::run(&self.x0, &self.anchor, &self.family, &self.alpha, stop, echo)
    }

    /// The anchor as it acts on the iterates (`f ∘ P` for the retracted scheme).
    pub fn effective_anchor(&self) -> Result<Anchor> {
        self.family.effective_anchor(&self.anchor)
    }

    pub fn q_map(&self) -> Result<QMapEstimate> {
        estimate_q_map(
            &self.effective_anchor()?,
            &self.family.reference_operator()?,
            &self.x0,
            &self.config.analysis.q_map,
        )
    }

    pub fn h1n(&self, trace: &IterationTrace) -> Result<HypothesisReport> {
        check_h1n_on_run(trace, &self.family, &self.alpha, self.n_shift())
    }

    /// VI check at `x`; `iterates` feed the H2,p tail when a fixed point is declared.
    pub fn limit_report(&self, x: &Vector, iterates: Option<&[Vector]>) -> Result<LimitReport> {
        let fix = self
            .fix_set
            .as_ref()
            .ok_or_else(|| Error::Config("analysis.fix_set is required for the limit check".into()))?;
        let anchor = self.effective_anchor()?;
        let mut rep = check_vi_limit(x, anchor.operator(), fix, &self.vi_options())?;
        let t = self.family.reference_operator()?;
        rep.fixres = Some((x - t.apply(x)?).norm());
        if let (Some(p), Some(its)) = (&self.fix_point, iterates) {
            rep.h2p_tail = Some(h2p_tail(its, anchor.operator(), p, self.config.analysis.tail_fraction)?);
        }
        Ok(rep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::StopCause;

    const BALL: &str = r#"{
        "scenario": "ball",
        "x0": [0, 0],
        "f": {"kind": "constant", "value": [2, 0]},
        "family": {"kind": "constant", "operator": {"kind": "projection", "set": {"kind": "ball", "center": [0, 0], "radius": 1}}},
        "alpha": {"family": "harmonic"},
        "analysis": {"fix_set": {"set": {"kind": "ball", "center": [0, 0], "radius": 1}}, "fix_point": [1, 0]}
    }"#;

    #[test]
    fn ball_config_runs() {
        let cfg = ExperimentConfig::from_json(BALL).unwrap();
        let exp = cfg.build().unwrap();
        let trace = exp.run().unwrap();
        assert_eq!(trace.stop_cause, StopCause::ResidualMet);
        assert!((trace.last() - Vector::from_vec(vec![1.0, 0.0])).norm() <= 1e-3);
        let rep = exp.limit_report(trace.last(), Some(&trace.iterates)).unwrap();
        assert!(rep.h2p_tail.unwrap() <= 1e-3);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = BALL.replace("\"scenario\"", "\"colour\": 1, \"scenario\"");
        let err = ExperimentConfig::from_json(&bad).unwrap_err();
        assert!(err.to_string().contains("schema"));
    }

    #[test]
    fn alpha_out_of_range_names_item_i() {
        let bad = BALL.replace(r#"{"family": "harmonic"}"#, r#"{"family": "constant", "value": 1.5}"#);
        let err = ExperimentConfig::from_json(&bad).unwrap().build().unwrap_err();
        assert!(err.to_string().contains("H3,N (i)"), "{err}");
    }

    #[test]
    fn tolerance_hierarchy_is_enforced() {
        let cfg = r#"{
            "scenario": "eq",
            "x0": [0, 0],
            "f": {"kind": "constant", "value": [2, 3]},
            "family": {"kind": "equilibrium_varying",
                       "bifunction": {"m": [[0, 0], [0, 1]], "q": [0, -0.5]},
                       "set": {"kind": "box", "lo": [0, 0], "hi": [1, 1]},
                       "r": {"family": "constant", "value": 1.0},
                       "inner_tol": 1e-8},
            "alpha": {"family": "harmonic"},
            "stop": {"residual": 1e-9}
        }"#;
        let err = ExperimentConfig::from_json(cfg).unwrap().build().unwrap_err();
        assert!(err.to_string().contains("tolerance hierarchy"));
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::from_json(BALL).unwrap();
        let b = ExperimentConfig::from_json(BALL).unwrap();
        assert_eq!(a.sha256(), b.sha256());
        let mut c = a.clone();
        c.seed = 7;
        assert_ne!(a.sha256(), c.sha256());
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back.sha256(), a.sha256());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let bad = BALL.replace(r#""x0": [0, 0]"#, r#""x0": [0, 0, 0]"#);
        assert!(ExperimentConfig::from_json(&bad).unwrap().build().is_err());
    }
}
