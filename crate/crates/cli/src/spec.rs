//! Problem and solver identifiers such as `quadratic:dim=50,null=10,seed=7`
//! or `gd_linesearch:gamma=0.5,c1=10/L`.

use std::fmt;
use std::str::FromStr;

use convrate::oracle::{gallery, Problem, Vector};
use convrate::solvers::{LineSearch, SamplingDistribution, StepInit};

use crate::error::SpecError;

/// Splits `name:key=value,key=value` into the name and its parameters.
fn split_spec(s: &str) -> Result<(&str, Vec<(&str, &str)>), SpecError> {
    let s = s.trim();
    let (name, rest) = match s.split_once(':') {
        Some((n, r)) => (n.trim(), r.trim()),
        None => (s, ""),
    };
    if name.is_empty() {
        return Err(SpecError::new(s, "missing name"));
    }
    let mut params = Vec::new();
    for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| SpecError::new(s, format!("`{part}` is not key=value")))?;
        let k = k.trim();
        if params.iter().any(|(seen, _)| *seen == k) {
            return Err(SpecError::new(s, format!("duplicate key `{k}`")));
        }
        params.push((k, v.trim()));
    }
    Ok((name, params))
}

struct Params<'a> {
    spec: &'a str,
    entries: Vec<(&'a str, &'a str)>,
}

impl<'a> Params<'a> {
    fn take(&mut self, key: &str) -> Option<&'a str> {
        let i = self.entries.iter().position(|(k, _)| *k == key)?;
        Some(self.entries.remove(i).1)
    }

    fn parse<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, SpecError> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| SpecError::new(self.spec, format!("cannot parse `{key}={v}`"))),
        }
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Result<T, SpecError> {
        self.parse(key)?
            .ok_or_else(|| SpecError::new(self.spec, format!("missing `{key}`")))
    }

    fn finish(self) -> Result<(), SpecError> {
        match self.entries.first() {
            Some((k, _)) => Err(SpecError::new(self.spec, format!("unknown key `{k}`"))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Quadratic {
        dim: usize,
        null: usize,
        seed: u64,
        log_lo: f64,
        log_hi: f64,
    },
    Power {
        p: u32,
    },
    Lasso {
        dim: usize,
        rows: usize,
        seed: u64,
        weight: f64,
    },
}

impl ProblemSpec {
    pub fn build(&self) -> convrate::Result<Problem> {
        match *self {
            ProblemSpec::Quadratic {
                dim,
                null,
                seed,
                log_lo,
                log_hi,
            } => gallery::quadratic(dim, null, seed, log_lo, log_hi),
            ProblemSpec::Power { p } => convrate::oracle::make_power(p),
            ProblemSpec::Lasso {
                dim,
                rows,
                seed,
                weight,
            } => gallery::lasso(dim, rows, seed, weight),
        }
    }
}

impl FromStr for ProblemSpec {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, SpecError> {
        let (name, entries) = split_spec(s)?;
        let mut p = Params { spec: s, entries };
        let spec = match name {
            "quadratic" => ProblemSpec::Quadratic {
                dim: p.require("dim")?,
                null: p.parse("null")?.unwrap_or(0),
                seed: p.parse("seed")?.unwrap_or(0),
                log_lo: p.parse("log_lo")?.unwrap_or(-2.0),
                log_hi: p.parse("log_hi")?.unwrap_or(2.0),
            },
            "power" => ProblemSpec::Power { p: p.require("p")? },
            "lasso" => {
                let dim: usize = p.require("dim")?;
                ProblemSpec::Lasso {
                    dim,
                    rows: p.parse("rows")?.unwrap_or((dim / 2).max(1)),
                    seed: p.parse("seed")?.unwrap_or(0),
                    weight: p.parse("weight")?.unwrap_or(0.1),
                }
            }
            other => return Err(SpecError::new(s, format!("unknown problem `{other}`"))),
        };
        p.finish()?;
        Ok(spec)
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemSpec::Quadratic {
                dim,
                null,
                seed,
                log_lo,
                log_hi,
            } => write!(
                f,
                "quadratic:dim={dim},null={null},seed={seed},log_lo={log_lo},log_hi={log_hi}"
            ),
            ProblemSpec::Power { p } => write!(f, "power:p={p}"),
            ProblemSpec::Lasso {
                dim,
                rows,
                seed,
                weight,
            } => write!(f, "lasso:dim={dim},rows={rows},seed={seed},weight={weight}"),
        }
    }
}

/// A number that may scale with the Lipschitz constant `L` of the problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scalar {
    Value(f64),
    /// `c / L`; `inv_L` is `1 / L`.
    OverL(f64),
    /// `c * L`; `L` alone is `1 * L`.
    TimesL(f64),
}

impl Scalar {
    pub fn resolve(&self, lipschitz: f64) -> f64 {
        match *self {
            Scalar::Value(v) => v,
            Scalar::OverL(c) => c / lipschitz,
            Scalar::TimesL(c) => c * lipschitz,
        }
    }
}

impl FromStr for Scalar {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, SpecError> {
        let t = s.trim();
        let num = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| SpecError::new(s, "expected a number, `inv_L`, `c/L` or `c*L`"))
        };
        if t == "inv_L" {
            Ok(Scalar::OverL(1.0))
        } else if t == "L" {
            Ok(Scalar::TimesL(1.0))
        } else if let Some(c) = t.strip_suffix("/L") {
            Ok(Scalar::OverL(num(c)?))
        } else if let Some(c) = t.strip_suffix("*L") {
            Ok(Scalar::TimesL(num(c)?))
        } else {
            Ok(Scalar::Value(num(t)?))
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Value(v) => write!(f, "{v}"),
            Scalar::OverL(c) => write!(f, "{c}/L"),
            Scalar::TimesL(c) => write!(f, "{c}*L"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchSpec {
    pub gamma: f64,
    pub c1: Scalar,
    /// `None` means the largest admissible value `(2 - gamma) / L`.
    pub c2: Option<Scalar>,
    pub shrink: f64,
    pub init: StepInit,
}

impl LineSearchSpec {
    pub fn resolve(&self, lipschitz: f64) -> LineSearch {
        let c2 = match self.c2 {
            Some(c) => c.resolve(lipschitz),
            None => (2.0 - self.gamma) / lipschitz,
        };
        LineSearch::new(self.gamma, self.c1.resolve(lipschitz), c2)
            .with_shrink(self.shrink)
            .with_init(self.init)
    }

    fn parse(p: &mut Params<'_>) -> Result<Self, SpecError> {
        let init = match p.take("init") {
            None | Some("constant") => StepInit::Constant,
            Some("bb") => StepInit::BarzilaiBorwein,
            Some(other) => return Err(SpecError::new(p.spec, format!("unknown init `{other}`"))),
        };
        Ok(Self {
            gamma: p.parse("gamma")?.unwrap_or(0.5),
            c1: p.parse("c1")?.unwrap_or(Scalar::OverL(10.0)),
            c2: p.parse("c2")?,
            shrink: p.parse("shrink")?.unwrap_or(0.5),
            init,
        })
    }
}

impl fmt::Display for LineSearchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "gamma={},c1={}", self.gamma, self.c1)?;
        if let Some(c2) = self.c2 {
            write!(f, ",c2={c2}")?;
        }
        let init = match self.init {
            StepInit::Constant => "constant",
            StepInit::BarzilaiBorwein => "bb",
        };
        write!(f, ",shrink={},init={init}", self.shrink)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LbarSpec {
    /// `lbar_i = L_i`.
    Coordinate,
    /// `lbar_i = L`.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistSpec {
    Uniform,
    /// `p_i` proportional to `lbar_i`.
    Proportional,
    /// `p_min` on every coordinate but the first, which takes the rest.
    Skewed {
        p_min: f64,
    },
}

impl DistSpec {
    pub fn build(&self, lbar: &[f64]) -> convrate::Result<SamplingDistribution> {
        let n = lbar.len();
        match *self {
            DistSpec::Uniform => SamplingDistribution::uniform(n),
            DistSpec::Proportional => SamplingDistribution::proportional(lbar),
            DistSpec::Skewed { p_min } => {
                let mut probs = vec![p_min; n];
                probs[0] = 1.0 - p_min * (n - 1) as f64;
                SamplingDistribution::new(probs)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateSpec {
    pub lbar: LbarSpec,
    pub dist: DistSpec,
}

impl CoordinateSpec {
    pub fn lbar(&self, problem: &Problem) -> Vec<f64> {
        match self.lbar {
            LbarSpec::Coordinate => problem.coord_lipschitz().to_vec(),
            LbarSpec::Global => vec![problem.lipschitz(); problem.dim()],
        }
    }

    fn parse(p: &mut Params<'_>) -> Result<Self, SpecError> {
        let lbar = match p.take("lbar") {
            None | Some("coord") => LbarSpec::Coordinate,
            Some("global") => LbarSpec::Global,
            Some(other) => return Err(SpecError::new(p.spec, format!("unknown lbar `{other}`"))),
        };
        let dist = match p.take("dist") {
            None | Some("uniform") => DistSpec::Uniform,
            Some("proportional") => DistSpec::Proportional,
            Some("skewed") => DistSpec::Skewed {
                p_min: p.require("pmin")?,
            },
            Some(other) => return Err(SpecError::new(p.spec, format!("unknown dist `{other}`"))),
        };
        Ok(Self { lbar, dist })
    }
}

impl fmt::Display for CoordinateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lbar = match self.lbar {
            LbarSpec::Coordinate => "coord",
            LbarSpec::Global => "global",
        };
        write!(f, "lbar={lbar},")?;
        match self.dist {
            DistSpec::Uniform => write!(f, "dist=uniform"),
            DistSpec::Proportional => write!(f, "dist=proportional"),
            DistSpec::Skewed { p_min } => write!(f, "dist=skewed,pmin={p_min}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverSpec {
    GdFixed { alpha: Scalar },
    GdLineSearch(LineSearchSpec),
    ProxGradFixed { lbar: Scalar },
    ProxGradLineSearch(LineSearchSpec),
    Cd(CoordinateSpec),
    ProxCd(CoordinateSpec),
}

impl SolverSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SolverSpec::GdFixed { .. } => "gd_fixed",
            SolverSpec::GdLineSearch(_) => "gd_linesearch",
            SolverSpec::ProxGradFixed { .. } => "proxgrad_fixed",
            SolverSpec::ProxGradLineSearch(_) => "proxgrad_linesearch",
            SolverSpec::Cd(_) => "cd_stochastic",
            SolverSpec::ProxCd(_) => "proxcd_stochastic",
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, SolverSpec::Cd(_) | SolverSpec::ProxCd(_))
    }

    pub fn needs_regularizer(&self) -> bool {
        matches!(
            self,
            SolverSpec::ProxGradFixed { .. }
                | SolverSpec::ProxGradLineSearch(_)
                | SolverSpec::ProxCd(_)
        )
    }
}

impl FromStr for SolverSpec {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, SpecError> {
        let (name, entries) = split_spec(s)?;
        let mut p = Params { spec: s, entries };
        let spec = match name {
            "gd_fixed" => SolverSpec::GdFixed {
                alpha: p.parse("alpha")?.unwrap_or(Scalar::OverL(1.0)),
            },
            "gd_linesearch" => SolverSpec::GdLineSearch(LineSearchSpec::parse(&mut p)?),
            "proxgrad_fixed" => SolverSpec::ProxGradFixed {
                lbar: p.parse("lbar")?.unwrap_or(Scalar::TimesL(1.0)),
            },
            "proxgrad_linesearch" => SolverSpec::ProxGradLineSearch(LineSearchSpec::parse(&mut p)?),
            "cd_stochastic" => SolverSpec::Cd(CoordinateSpec::parse(&mut p)?),
            "proxcd_stochastic" => SolverSpec::ProxCd(CoordinateSpec::parse(&mut p)?),
            other => return Err(SpecError::new(s, format!("unknown solver `{other}`"))),
        };
        p.finish()?;
        Ok(spec)
    }
}

impl fmt::Display for SolverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.name())?;
        match self {
            SolverSpec::GdFixed { alpha } => write!(f, "alpha={alpha}"),
            SolverSpec::ProxGradFixed { lbar } => write!(f, "lbar={lbar}"),
            SolverSpec::GdLineSearch(ls) | SolverSpec::ProxGradLineSearch(ls) => write!(f, "{ls}"),
            SolverSpec::Cd(c) | SolverSpec::ProxCd(c) => write!(f, "{c}"),
        }
    }
}

/// Starting point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum X0Spec {
    /// All ones for `power`, `random:0` otherwise.
    #[default]
    Auto,
    Zeros,
    Ones,
    Random(u64),
}

impl X0Spec {
    pub fn build(&self, problem: &ProblemSpec, dim: usize) -> Vector {
        match *self {
            X0Spec::Auto => match problem {
                ProblemSpec::Power { .. } => Vector::from_element(dim, 1.0),
                _ => gallery::random_start(dim, 0),
            },
            X0Spec::Zeros => Vector::zeros(dim),
            X0Spec::Ones => Vector::from_element(dim, 1.0),
            X0Spec::Random(seed) => gallery::random_start(dim, seed),
        }
    }
}

impl FromStr for X0Spec {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, SpecError> {
        match s.trim() {
            "auto" => Ok(X0Spec::Auto),
            "zeros" => Ok(X0Spec::Zeros),
            "ones" => Ok(X0Spec::Ones),
            t => match t.strip_prefix("random:").map(str::parse) {
                Some(Ok(seed)) => Ok(X0Spec::Random(seed)),
                _ => Err(SpecError::new(
                    s,
                    "expected auto, zeros, ones or random:<seed>",
                )),
            },
        }
    }
}

impl fmt::Display for X0Spec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            X0Spec::Auto => write!(f, "auto"),
            X0Spec::Zeros => write!(f, "zeros"),
            X0Spec::Ones => write!(f, "ones"),
            X0Spec::Random(seed) => write!(f, "random:{seed}"),
        }
    }
}
