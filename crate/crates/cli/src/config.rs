//! Run configuration: `key = value` lines grouped under `[section]` headers, matrices as
//! bracketed row lists. Parsing reports every problem at once.

use lipstab::model::{LinearPlant, ParamBox, PlantModel, SafePolytope, VanDerPol};
use lipstab::policy::TrainConfig;
use lipstab::synthesis::SynthesisConfig;
use nalgebra::{DMatrix, DVector};
use toml::{Table, Value};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum PlantSpec {
    VanDerPol,
    /// `ẋ = (A₀ + Σ θ_k A_k) x + (B₀ + Σ θ_k B_k) u`.
    Linear {
        a0: DMatrix<f64>,
        b0: DMatrix<f64>,
        a_k: Vec<DMatrix<f64>>,
        b_k: Vec<DMatrix<f64>>,
    },
}

impl PlantSpec {
    pub fn build(&self) -> lipstab::Result<Box<dyn PlantModel>> {
        Ok(match self {
            PlantSpec::VanDerPol => Box::new(VanDerPol),
            PlantSpec::Linear { a0, b0, a_k, b_k } => {
                Box::new(LinearPlant::new(a0.clone(), b0.clone(), a_k.clone(), b_k.clone())?)
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            PlantSpec::VanDerPol => "van-der-pol",
            PlantSpec::Linear { .. } => "linear",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SafeSpec {
    /// Counter-clockwise or clockwise vertices of a convex polygon.
    Vertices(Vec<[f64; 2]>),
    /// `{x | a x ≤ b}`.
    HalfSpaces { a: DMatrix<f64>, b: Vec<f64> },
}

impl SafeSpec {
    pub fn build(&self) -> lipstab::Result<SafePolytope> {
        match self {
            SafeSpec::Vertices(v) => SafePolytope::from_vertices_2d(v),
            SafeSpec::HalfSpaces { a, b } => SafePolytope::new(a.clone(), DVector::from_column_slice(b)),
        }
    }
}

/// `r(x, u) = −(q‖x‖² + r‖u‖²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardSpec {
    pub state_weight: f64,
    pub input_weight: f64,
}

impl RewardSpec {
    pub fn eval(&self, x: &[f64], u: &[f64]) -> f64 {
        -(self.state_weight * x.iter().map(|v| v * v).sum::<f64>() + self.input_weight * u.iter().map(|v| v * v).sum::<f64>())
    }
}

/// Gain, budget and domain scale of an explicit closed loop.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopSpec {
    pub gain: DMatrix<f64>,
    pub lipschitz: f64,
    pub scale: f64,
    /// Starting point for the Lyapunov search (identity when absent).
    pub p: Option<DMatrix<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSpec {
    pub config: TrainConfig,
    /// Defaults to the certified budget.
    pub lipschitz_cap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSpec {
    pub n_runs: usize,
    pub n_steps: usize,
    pub tau: f64,
    pub substeps: usize,
    pub seed: u64,
    pub lqr_state_weight: f64,
    pub lqr_input_weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub plant: PlantSpec,
    pub output_dir: Option<String>,
    pub params_lower: Vec<f64>,
    pub params_upper: Vec<f64>,
    pub safe: SafeSpec,
    pub reward: RewardSpec,
    pub synthesis: SynthesisConfig,
    pub sector: Option<LoopSpec>,
    pub certify: Option<LoopSpec>,
    pub train: TrainSpec,
    pub evaluate: EvalSpec,
}

/// Shipped configuration of the two-state example.
pub const EXAMPLE_CONFIG: &str = include_str!("../../../configs/reproduce_example.toml");

impl RunConfig {
    pub fn params(&self) -> lipstab::Result<ParamBox> {
        ParamBox::new(self.params_lower.clone(), self.params_upper.clone())
    }

    pub fn example() -> Self {
        Self::parse(EXAMPLE_CONFIG).expect("shipped configuration is valid")
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(vec![e.to_string()]))?;
        let mut errs = Vec::new();
        let cfg = read_config(&table, &mut errs);
        match cfg {
            Some(cfg) if errs.is_empty() => {
                cfg.check(&mut errs);
                if errs.is_empty() {
                    Ok(cfg)
                } else {
                    Err(CliError::Config(errs))
                }
            }
            _ => Err(CliError::Config(errs)),
        }
    }

    /// Cross-field invariants.
    fn check(&self, errs: &mut Vec<String>) {
        let model = match self.plant.build() {
            Ok(m) => Some(m),
            Err(e) => {
                errs.push(format!("plant: {e}"));
                None
            }
        };
        let params = self.params().map_err(|e| errs.push(format!("params: {e}"))).ok();
        let safe = self.safe.build().map_err(|e| errs.push(format!("safe: {e}"))).ok();
        if let Err(e) = self.synthesis.validate() {
            errs.push(format!("synthesis: {e}"));
        }
        let mut train = self.train.config.clone();
        train.lipschitz_cap = self.train.lipschitz_cap.unwrap_or(0.0);
        errs.extend(train.violations().into_iter().map(|v| format!("train: {v}")));
        if !(self.reward.state_weight >= 0.0 && self.reward.input_weight >= 0.0) {
            errs.push("reward: weights must be nonnegative".into());
        }
        let e = &self.evaluate;
        if !(e.tau > 0.0) || e.substeps == 0 {
            errs.push("evaluate: tau must be positive and substeps at least 1".into());
        }
        if !(e.lqr_state_weight >= 0.0 && e.lqr_input_weight > 0.0) {
            errs.push("evaluate: LQR state weight must be nonnegative and input weight positive".into());
        }
        let Some(model) = model else { return };
        let (n, m) = (model.state_dim(), model.input_dim());
        if let Some(p) = &params {
            if p.dim() != model.param_dim() {
                errs.push(format!("params: plant has {} parameters, box has {}", model.param_dim(), p.dim()));
            }
        }
        if let Some(s) = &safe {
            if s.dim() != n {
                errs.push(format!("safe: polytope dimension {} differs from state dimension {n}", s.dim()));
            }
        }
        if train.exploration.len() != m {
            errs.push(format!("train: exploration needs {m} variances, got {}", train.exploration.len()));
        }
        for (name, spec) in [("sector", &self.sector), ("certify", &self.certify)] {
            let Some(spec) = spec else { continue };
            if spec.gain.shape() != (m, n) {
                errs.push(format!("{name}: gain must be {m}x{n}"));
            }
            if !(spec.lipschitz >= 0.0) {
                errs.push(format!("{name}: lipschitz must be nonnegative"));
            }
            if !(spec.scale > 0.0 && spec.scale <= 1.0) {
                errs.push(format!("{name}: scale must lie in (0, 1]"));
            }
            if spec.p.as_ref().is_some_and(|p| p.shape() != (n, n)) {
                errs.push(format!("{name}: p must be {n}x{n}"));
            }
        }
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new();
        t.insert("plant".into(), Value::String(self.plant.name().into()));
        if let Some(dir) = &self.output_dir {
            t.insert("output_dir".into(), Value::String(dir.clone()));
        }
        if let PlantSpec::Linear { a0, b0, a_k, b_k } = &self.plant {
            let mut s = Table::new();
            s.insert("a0".into(), matrix_value(a0));
            s.insert("b0".into(), matrix_value(b0));
            s.insert("a_k".into(), Value::Array(a_k.iter().map(matrix_value).collect()));
            s.insert("b_k".into(), Value::Array(b_k.iter().map(matrix_value).collect()));
            t.insert("linear".into(), Value::Table(s));
        }
        let mut s = Table::new();
        s.insert("lower".into(), vec_value(&self.params_lower));
        s.insert("upper".into(), vec_value(&self.params_upper));
        t.insert("params".into(), Value::Table(s));
        let mut s = Table::new();
        match &self.safe {
            SafeSpec::Vertices(v) => {
                s.insert("vertices".into(), Value::Array(v.iter().map(|p| vec_value(p)).collect()));
            }
            SafeSpec::HalfSpaces { a, b } => {
                s.insert("a".into(), matrix_value(a));
                s.insert("b".into(), vec_value(b));
            }
        }
        t.insert("safe".into(), Value::Table(s));
        let mut s = Table::new();
        s.insert("state_weight".into(), Value::Float(self.reward.state_weight));
        s.insert("input_weight".into(), Value::Float(self.reward.input_weight));
        t.insert("reward".into(), Value::Table(s));
        let c = &self.synthesis;
        let mut s = Table::new();
        s.insert("tradeoff".into(), Value::Float(c.tradeoff));
        s.insert("n_steps".into(), int_value(c.n_steps as u64));
        s.insert("sector_tol".into(), Value::Float(c.sector_tol));
        s.insert("lmi_margin".into(), Value::Float(c.lmi_margin));
        s.insert("p_min_eig".into(), Value::Float(c.p_min_eig));
        s.insert("nominal_decay".into(), Value::Float(c.nominal_decay));
        if let Some(k) = c.fail_at {
            s.insert("fail_at".into(), int_value(k as u64));
        }
        t.insert("synthesis".into(), Value::Table(s));
        for (name, spec) in [("sector", &self.sector), ("certify", &self.certify)] {
            if let Some(spec) = spec {
                let mut s = Table::new();
                s.insert("gain".into(), matrix_value(&spec.gain));
                s.insert("lipschitz".into(), Value::Float(spec.lipschitz));
                s.insert("scale".into(), Value::Float(spec.scale));
                if let Some(p) = &spec.p {
                    s.insert("p".into(), matrix_value(p));
                }
                t.insert(name.into(), Value::Table(s));
            }
        }
        let c = &self.train.config;
        let mut s = Table::new();
        s.insert("tau".into(), Value::Float(c.tau));
        s.insert("actor_lr".into(), Value::Float(c.actor_lr));
        s.insert("critic_lr".into(), Value::Float(c.critic_lr));
        s.insert("exploration".into(), vec_value(&c.exploration));
        s.insert("decay".into(), Value::Float(c.decay));
        s.insert("nu_min".into(), Value::Float(c.nu_min));
        s.insert("n_traj".into(), int_value(c.n_traj as u64));
        s.insert("n_steps".into(), int_value(c.n_steps as u64));
        s.insert("n_adv".into(), int_value(c.n_adv as u64));
        s.insert("beta".into(), Value::Float(c.beta));
        s.insert("hidden".into(), int_value(c.hidden as u64));
        s.insert("substeps".into(), int_value(c.substeps as u64));
        s.insert("seed".into(), int_value(c.seed));
        if let Some(cap) = self.train.lipschitz_cap {
            s.insert("lipschitz_cap".into(), Value::Float(cap));
        }
        t.insert("train".into(), Value::Table(s));
        let e = &self.evaluate;
        let mut s = Table::new();
        s.insert("n_runs".into(), int_value(e.n_runs as u64));
        s.insert("n_steps".into(), int_value(e.n_steps as u64));
        s.insert("tau".into(), Value::Float(e.tau));
        s.insert("substeps".into(), int_value(e.substeps as u64));
        s.insert("seed".into(), int_value(e.seed));
        s.insert("lqr_state_weight".into(), Value::Float(e.lqr_state_weight));
        s.insert("lqr_input_weight".into(), Value::Float(e.lqr_input_weight));
        t.insert("evaluate".into(), Value::Table(s));
        t
    }

    pub fn to_text(&self) -> String {
        self.to_table().to_string()
    }
}

fn int_value(v: u64) -> Value {
    Value::Integer(v as i64)
}

fn vec_value(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| Value::Float(x)).collect())
}

fn matrix_value(m: &DMatrix<f64>) -> Value {
    Value::Array((0..m.nrows()).map(|r| vec_value(&m.row(r).iter().copied().collect::<Vec<_>>())).collect())
}

/// Typed access to one section, recording every problem under the section's name.
struct Section<'a> {
    name: &'a str,
    table: Option<&'a Table>,
    seen: Vec<&'static str>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &'a str, errs: &mut Vec<String>) -> Self {
        let table = match root.get(name) {
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                errs.push(format!("{name}: expected a [{name}] section"));
                None
            }
            None => None,
        };
        Self { name, table, seen: Vec::new() }
    }

    fn root(root: &'a Table) -> Self {
        Self { name: "", table: Some(root), seen: Vec::new() }
    }

    fn present(&self) -> bool {
        self.table.is_some()
    }

    fn label(&self, key: &str) -> String {
        if self.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.name)
        }
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.push(key);
        self.table?.get(key)
    }

    fn get<T>(
        &mut self,
        key: &'static str,
        default: Option<T>,
        errs: &mut Vec<String>,
        conv: impl Fn(&Value) -> Option<T>,
        what: &str,
    ) -> Option<T> {
        match self.raw(key) {
            Some(v) => conv(v).or_else(|| {
                errs.push(format!("{}: expected {what}", self.label(key)));
                None
            }),
            None => default.or_else(|| {
                errs.push(format!("{}: missing required key", self.label(key)));
                None
            }),
        }
    }

    fn f64(&mut self, key: &'static str, default: Option<f64>, errs: &mut Vec<String>) -> Option<f64> {
        self.get(key, default, errs, as_f64, "a number")
    }

    fn usize(&mut self, key: &'static str, default: Option<usize>, errs: &mut Vec<String>) -> Option<usize> {
        self.get(key, default, errs, |v| v.as_integer().and_then(|i| usize::try_from(i).ok()), "a nonnegative integer")
    }

    fn u64(&mut self, key: &'static str, default: Option<u64>, errs: &mut Vec<String>) -> Option<u64> {
        self.get(key, default, errs, |v| v.as_integer().and_then(|i| u64::try_from(i).ok()), "a nonnegative integer")
    }

    fn vector(&mut self, key: &'static str, default: Option<Vec<f64>>, errs: &mut Vec<String>) -> Option<Vec<f64>> {
        self.get(key, default, errs, as_vec, "a list of numbers")
    }

    fn matrix(&mut self, key: &'static str, errs: &mut Vec<String>) -> Option<DMatrix<f64>> {
        self.get(key, None, errs, as_matrix, "a matrix given as a list of equal-length rows")
    }

    fn optional_matrix(&mut self, key: &'static str, errs: &mut Vec<String>) -> Option<Option<DMatrix<f64>>> {
        match self.raw(key) {
            None => Some(None),
            Some(v) => match as_matrix(v) {
                Some(m) => Some(Some(m)),
                None => {
                    errs.push(format!("{}: expected a matrix given as a list of equal-length rows", self.label(key)));
                    None
                }
            },
        }
    }

    /// Reports keys that were never requested.
    fn finish(self, errs: &mut Vec<String>, extra_allowed: &[&str]) {
        let Some(t) = self.table else { return };
        for k in t.keys() {
            if !self.seen.contains(&k.as_str()) && !extra_allowed.contains(&k.as_str()) {
                errs.push(format!("{}: unknown key", self.label(k)));
            }
        }
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn as_vec(v: &Value) -> Option<Vec<f64>> {
    v.as_array()?.iter().map(as_f64).collect()
}

fn as_matrix(v: &Value) -> Option<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = v.as_array()?.iter().map(as_vec).collect::<Option<_>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return None;
    }
    Some(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn as_matrix_list(v: &Value) -> Option<Vec<DMatrix<f64>>> {
    v.as_array()?.iter().map(as_matrix).collect()
}

const SECTIONS: [&str; 9] = ["linear", "params", "safe", "reward", "synthesis", "sector", "certify", "train", "evaluate"];

fn read_config(root: &Table, errs: &mut Vec<String>) -> Option<RunConfig> {
    let mut top = Section::root(root);
    let plant_name = top.get("plant", None, errs, |v| v.as_str().map(str::to_string), "a plant name");
    let output_dir = match top.raw("output_dir") {
        None => Some(None),
        Some(Value::String(s)) => Some(Some(s.clone())),
        Some(_) => {
            errs.push("output_dir: expected a string".into());
            None
        }
    };
    top.finish(errs, &SECTIONS);

    let mut lin = Section::new(root, "linear", errs);
    let plant = match plant_name.as_deref() {
        Some("van-der-pol") => {
            if lin.present() {
                errs.push("linear: section only allowed with plant = \"linear\"".into());
            }
            Some(PlantSpec::VanDerPol)
        }
        Some("linear") => {
            let a0 = lin.matrix("a0", errs);
            let b0 = lin.matrix("b0", errs);
            let a_k = lin.get("a_k", Some(vec![]), errs, as_matrix_list, "a list of matrices");
            let b_k = lin.get("b_k", Some(vec![]), errs, as_matrix_list, "a list of matrices");
            lin.finish(errs, &[]);
            match (a0, b0, a_k, b_k) {
                (Some(a0), Some(b0), Some(mut a_k), Some(mut b_k)) => {
                    // an omitted list means those matrices do not depend on θ
                    if b_k.is_empty() {
                        b_k = vec![DMatrix::zeros(b0.nrows(), b0.ncols()); a_k.len()];
                    } else if a_k.is_empty() {
                        a_k = vec![DMatrix::zeros(a0.nrows(), a0.ncols()); b_k.len()];
                    }
                    Some(PlantSpec::Linear { a0, b0, a_k, b_k })
                }
                _ => None,
            }
        }
        Some(other) => {
            errs.push(format!("plant: unknown plant {other:?} (expected \"van-der-pol\" or \"linear\")"));
            None
        }
        None => None,
    };

    let mut s = Section::new(root, "params", errs);
    let params_lower = s.vector("lower", None, errs);
    let params_upper = s.vector("upper", None, errs);
    s.finish(errs, &[]);

    let mut s = Section::new(root, "safe", errs);
    let safe = if s.table.is_some_and(|t| t.contains_key("vertices")) {
        s.get("vertices", None, errs, |v| {
            v.as_array()?
                .iter()
                .map(|p| as_vec(p).filter(|p| p.len() == 2).map(|p| [p[0], p[1]]))
                .collect::<Option<Vec<_>>>()
        }, "a list of [x, y] pairs")
        .map(SafeSpec::Vertices)
    } else {
        let a = s.matrix("a", errs);
        let b = s.vector("b", None, errs);
        a.zip(b).map(|(a, b)| SafeSpec::HalfSpaces { a, b })
    };
    s.finish(errs, &[]);

    let mut s = Section::new(root, "reward", errs);
    let state_weight = s.f64("state_weight", Some(1.0), errs);
    let input_weight = s.f64("input_weight", Some(0.1), errs);
    s.finish(errs, &[]);

    let d = SynthesisConfig::default();
    let mut s = Section::new(root, "synthesis", errs);
    let tradeoff = s.f64("tradeoff", Some(d.tradeoff), errs);
    let n_steps = s.usize("n_steps", Some(d.n_steps), errs);
    let sector_tol = s.f64("sector_tol", Some(d.sector_tol), errs);
    let lmi_margin = s.f64("lmi_margin", Some(d.lmi_margin), errs);
    let p_min_eig = s.f64("p_min_eig", Some(d.p_min_eig), errs);
    let nominal_decay = s.f64("nominal_decay", Some(d.nominal_decay), errs);
    let fail_at = match s.raw("fail_at") {
        None => Some(None),
        Some(v) => match v.as_integer().and_then(|i| usize::try_from(i).ok()) {
            Some(k) => Some(Some(k)),
            None => {
                errs.push("synthesis.fail_at: expected a nonnegative integer".into());
                None
            }
        },
    };
    s.finish(errs, &[]);

    let sector = read_loop(root, "sector", errs);
    let certify = read_loop(root, "certify", errs);

    let d = TrainConfig::example(0.0);
    let mut s = Section::new(root, "train", errs);
    let train = (|| {
        let tau = s.f64("tau", Some(d.tau), errs);
        let actor_lr = s.f64("actor_lr", Some(d.actor_lr), errs);
        let critic_lr = s.f64("critic_lr", Some(d.critic_lr), errs);
        let exploration = s.vector("exploration", Some(d.exploration.clone()), errs);
        let decay = s.f64("decay", Some(d.decay), errs);
        let nu_min = s.f64("nu_min", Some(d.nu_min), errs);
        let n_traj = s.usize("n_traj", Some(d.n_traj), errs);
        let n_steps = s.usize("n_steps", Some(d.n_steps), errs);
        let n_adv = s.usize("n_adv", Some(d.n_adv), errs);
        let beta = s.f64("beta", Some(d.beta), errs);
        let hidden = s.usize("hidden", Some(d.hidden), errs);
        let substeps = s.usize("substeps", Some(d.substeps), errs);
        let seed = s.u64("seed", Some(d.seed), errs);
        let cap = match s.raw("lipschitz_cap") {
            None => Some(None),
            Some(v) => as_f64(v).map(Some).or_else(|| {
                errs.push("train.lipschitz_cap: expected a number".into());
                None
            }),
        };
        Some(TrainSpec {
            config: TrainConfig {
                tau: tau?,
                actor_lr: actor_lr?,
                critic_lr: critic_lr?,
                exploration: exploration?,
                decay: decay?,
                nu_min: nu_min?,
                n_traj: n_traj?,
                n_steps: n_steps?,
                n_adv: n_adv?,
                beta: beta?,
                lipschitz_cap: 0.0,
                hidden: hidden?,
                substeps: substeps?,
                seed: seed?,
            },
            lipschitz_cap: cap?,
        })
    })();
    s.finish(errs, &[]);

    let mut s = Section::new(root, "evaluate", errs);
    let evaluate = (|| {
        let n_runs = s.usize("n_runs", Some(40), errs);
        let n_steps = s.usize("n_steps", Some(200), errs);
        let tau = s.f64("tau", Some(0.1), errs);
        let substeps = s.usize("substeps", Some(lipstab::sim::DEFAULT_SUBSTEPS), errs);
        let seed = s.u64("seed", Some(0), errs);
        let lqr_state_weight = s.f64("lqr_state_weight", Some(1.0), errs);
        let lqr_input_weight = s.f64("lqr_input_weight", Some(1.0), errs);
        Some(EvalSpec {
            n_runs: n_runs?,
            n_steps: n_steps?,
            tau: tau?,
            substeps: substeps?,
            seed: seed?,
            lqr_state_weight: lqr_state_weight?,
            lqr_input_weight: lqr_input_weight?,
        })
    })();
    s.finish(errs, &[]);

    Some(RunConfig {
        plant: plant?,
        output_dir: output_dir?,
        params_lower: params_lower?,
        params_upper: params_upper?,
        safe: safe?,
        reward: RewardSpec { state_weight: state_weight?, input_weight: input_weight? },
        synthesis: SynthesisConfig {
            tradeoff: tradeoff?,
            n_steps: n_steps?,
            sector_tol: sector_tol?,
            lmi_margin: lmi_margin?,
            p_min_eig: p_min_eig?,
            nominal_decay: nominal_decay?,
            solver: d_solver(),
            fail_at: fail_at?,
        },
        sector: sector?,
        certify: certify?,
        train: train?,
        evaluate: evaluate?,
    })
}

fn d_solver() -> lipstab::conic::SolverOptions {
    SynthesisConfig::default().solver
}

fn read_loop(root: &Table, name: &'static str, errs: &mut Vec<String>) -> Option<Option<LoopSpec>> {
    let mut s = Section::new(root, name, errs);
    if !s.present() {
        return Some(None);
    }
    let gain = s.matrix("gain", errs);
    let lipschitz = s.f64("lipschitz", None, errs);
    let scale = s.f64("scale", Some(1.0), errs);
    let p = s.optional_matrix("p", errs);
    s.finish(errs, &[]);
    Some(Some(LoopSpec { gain: gain?, lipschitz: lipschitz?, scale: scale?, p: p? }))
}
