//! The `frobkit` command line: one job per invocation, a JSON report on
//! stdout (or `--out`), a short summary on stderr.
//!
//! Exit status: 0 on success, 2 when the result is undetermined at the
//! available precision, 1 on any other error.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::intertwine;
use crate::json;
use crate::kisin::{self, KisinModule};
use crate::scalars::{FieldSpec, DEFAULT_PRECISION};
use crate::series::{EisensteinE, FrobLift, Preset, DEFAULT_ORDER};
use crate::tower::TowerSpec;
use crate::witt::{self, PerfBudget, WittRing};

pub const PRECISION_ENV: &str = "FROBKIT_PRECISION";

/// A job as read from `--config` or assembled from flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub field: FieldConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// `a_1, …, a_p` as element JSON.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f2: Option<Vec<Value>>,
    /// `c_0, …, c_{e₀}`.
    #[serde(default, rename = "E", skip_serializing_if = "Option::is_none")]
    pub e: Option<Vec<Value>>,
    #[serde(default)]
    pub precision: PrecisionConfig,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Value>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub p: u64,
    /// Monic Eisenstein polynomial of ϖ, `g_0, …, g_e`; `Q_p` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eisenstein: Option<Vec<i64>>,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig { p: 3, eisenstein: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecisionConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub piadic: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witt_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_budget: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exp_bound: Option<u64>,
}

impl JobConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de)
            .map_err(|e| Error::InvalidInput(format!("config at {}: {}", e.path(), e.inner())))
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// The preset's lift and Eisenstein polynomial written out explicitly.
    pub fn for_preset(preset: Preset, p: u64) -> Result<Self> {
        let spec = FieldSpec::unramified(p)?;
        let list = |v: Value| v["coeffs"].as_array().cloned();
        Ok(JobConfig {
            field: FieldConfig { p, eisenstein: None },
            preset: Some(preset.name().to_string()),
            f: list(json::frob_lift(&preset.frob_lift(&spec))),
            e: list(json::eisenstein(&preset.eisenstein(&spec))),
            ..Default::default()
        })
    }

    fn piadic(&self) -> Result<i64> {
        if let Some(n) = self.precision.piadic {
            return Ok(n);
        }
        match std::env::var(PRECISION_ENV) {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("{PRECISION_ENV}={s} is not an integer"))),
            Err(_) => Ok(DEFAULT_PRECISION),
        }
    }

    pub fn spec(&self) -> Result<Arc<FieldSpec>> {
        let p = self.field.p;
        let base = match &self.field.eisenstein {
            Some(g) => FieldSpec::from_i64(p, g)?,
            None => FieldSpec::unramified(p)?,
        };
        Ok(base.with_precision(self.piadic()?))
    }

    fn preset(&self) -> Result<Option<Preset>> {
        self.preset.as_deref().map(Preset::parse).transpose()
    }

    pub fn frob_lift(&self, spec: &Arc<FieldSpec>) -> Result<FrobLift> {
        if let Some(f) = &self.f {
            return json::parse_frob_lift(spec, &Value::Array(f.clone()), "f");
        }
        self.preset()?
            .map(|p| p.frob_lift(spec))
            .ok_or_else(|| Error::InvalidInput("f: give a preset or explicit coefficients".into()))
    }

    pub fn frob_lift2(&self, spec: &Arc<FieldSpec>) -> Result<FrobLift> {
        let f2 = self.f2.as_ref().ok_or_else(|| Error::InvalidInput("f2: missing".into()))?;
        json::parse_frob_lift(spec, &Value::Array(f2.clone()), "f2")
    }

    pub fn eisenstein(&self, spec: &Arc<FieldSpec>) -> Result<EisensteinE> {
        if let Some(e) = &self.e {
            return json::parse_eisenstein(spec, &Value::Array(e.clone()), "E");
        }
        self.preset()?
            .map(|p| p.eisenstein(spec))
            .ok_or_else(|| Error::InvalidInput("E: give a preset or explicit coefficients".into()))
    }

    fn u_order(&self) -> usize {
        self.precision.u_order.unwrap_or(DEFAULT_ORDER)
    }

    fn budget(&self) -> PerfBudget {
        let d = PerfBudget::default();
        PerfBudget {
            root_levels: self.precision.root_budget.unwrap_or(d.root_levels),
            exp_bound: self.precision.exp_bound.unwrap_or(d.exp_bound),
        }
    }

    fn param(&self, key: &str) -> Option<&Value> {
        self.params.get(key)
    }

    fn param_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.param(key) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .map(|n| n as usize)
                .ok_or_else(|| Error::InvalidInput(format!("params.{key}: expected a count"))),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "frobkit", version, about = "Frobenius lifts, Witt vectors, iterate towers and Kisin modules")]
struct Cli {
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Job configuration (JSON); flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default, Clone)]
struct Common {
    #[arg(long)]
    p: Option<u64>,
    /// Eisenstein polynomial of ϖ over Q_p, `g0,...,ge` (default: ϖ = p).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    field: Option<Vec<i64>>,
    /// ϖ-adic working precision.
    #[arg(long)]
    precision: Option<i64>,
    #[arg(long)]
    preset: Option<String>,
    /// Frobenius lift coefficients `a1,...,ap`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    f: Option<Vec<i64>>,
    /// Eisenstein polynomial `c0,...,1`.
    #[arg(long = "E", value_delimiter = ',', allow_hyphen_values = true)]
    e: Option<Vec<i64>>,
    /// u-adic order cap.
    #[arg(long = "M")]
    m: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Elementary levels, APF constant and ramification polygons.
    Tower {
        #[command(flatten)]
        common: Common,
        /// Number of levels i_1..i_n to list.
        #[arg(long, default_value_t = 6)]
        levels: u32,
        /// Number of ramification polygons.
        #[arg(long, default_value_t = 4)]
        polygons: u32,
    },
    /// Intertwiner ξ with f(ξ) = ξ(f2).
    Intertwine {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        f2: Option<Vec<i64>>,
        #[arg(long)]
        mu0: Option<i64>,
        /// Target ϖ-adic precision of the verification.
        #[arg(long = "N")]
        n: Option<i64>,
    },
    /// Ghost-map checks of the Witt sum and product laws.
    WittSelftest {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        len: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// The Witt vector u = {ū}_f fixed by f∘φ⁻¹.
    Fixedpoint {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        len: Option<usize>,
        #[arg(long)]
        root_budget: Option<u32>,
        #[arg(long)]
        exp_bound: Option<u64>,
    },
    /// Kisin-module computations.
    Kisin {
        #[command(subcommand)]
        command: KisinCommand,
    },
    /// List the named presets with their explicit configurations.
    Presets {
        #[arg(long, default_value_t = 3)]
        p: u64,
    },
}

#[derive(Args, Debug, Default, Clone)]
struct MatrixArgs {
    /// Frobenius matrix: row-major lists of series JSON, inline or a file path.
    #[arg(long)]
    matrix: Option<String>,
    /// Declared height.
    #[arg(long)]
    r: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum KisinCommand {
    /// Check that E^r·A⁻¹ is integral.
    Height {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        m: MatrixArgs,
    },
    /// Minimal height m of a rank-one module, a = γE^m.
    Minheight {
        #[command(flatten)]
        common: Common,
        /// Series JSON, inline or a file path.
        #[arg(long)]
        series: Option<String>,
    },
    /// Search for n ≤ N with φⁿ(f/u) a power of E.
    Hypothesis {
        #[command(flatten)]
        common: Common,
        #[arg(long = "N")]
        n: Option<usize>,
    },
    /// The module A·𝔖 with A·E^l = φ(A).
    Counterexample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
    },
    /// The products Y_n and their gauge trace.
    Xi {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        m: MatrixArgs,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Rank of Fil¹ for a height-1 module.
    Fil1 {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        m: MatrixArgs,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<JobConfig> {
    match path {
        None => Ok(JobConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", p.display())))?;
            JobConfig::parse(&text)
        }
    }
}

fn ints(xs: &[i64]) -> Vec<Value> {
    xs.iter().map(|&x| json!(x)).collect()
}

fn apply_common(cfg: &mut JobConfig, c: &Common) {
    if let Some(p) = c.p {
        cfg.field.p = p;
    }
    if let Some(g) = &c.field {
        cfg.field.eisenstein = Some(g.clone());
    }
    if let Some(n) = c.precision {
        cfg.precision.piadic = Some(n);
    }
    if let Some(name) = &c.preset {
        cfg.preset = Some(name.clone());
    }
    if let Some(f) = &c.f {
        cfg.f = Some(ints(f));
    }
    if let Some(e) = &c.e {
        cfg.e = Some(ints(e));
    }
    if let Some(m) = c.m {
        cfg.precision.u_order = Some(m);
    }
}

fn set_param(cfg: &mut JobConfig, key: &str, v: Option<Value>) {
    if let Some(v) = v {
        cfg.params.insert(key.to_string(), v);
    }
}

fn read_json_arg(arg: &str) -> Result<Value> {
    let text = if arg.trim_start().starts_with(['[', '{']) {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| Error::InvalidInput(format!("cannot read {arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{arg}: {e}")))
}

fn apply_matrix(cfg: &mut JobConfig, m: &MatrixArgs) -> Result<()> {
    if let Some(a) = &m.matrix {
        cfg.params.insert("matrix".into(), read_json_arg(a)?);
    }
    set_param(cfg, "r", m.r.map(|r| json!(r)));
    Ok(())
}

/// A report and the one-line summary for stderr.
pub struct Outcome {
    pub report: Value,
    pub summary: String,
}

pub fn run_tower(cfg: &JobConfig, levels: u32, polygons: u32) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let f = cfg.frob_lift(&spec)?;
    let e0 = cfg.eisenstein(&spec)?.degree() as u64;
    let t = TowerSpec::new(f, e0)?;
    let imin = t.imin()?;
    let lv = (1..=levels)
        .map(|n| Ok(json!({ "n": n, "i_n": json::rational(&t.elementary_level(n)?) })))
        .collect::<Result<Vec<_>>>()?;
    let c = t.checked_apf_constant()?;
    let polys = (1..=polygons).map(|n| t.ramification_polygon(n)).collect::<Result<Vec<_>>>()?;
    let single = polys.iter().all(|r| r.single_segment);
    let poly_json: Vec<Value> = polys
        .iter()
        .map(|r| {
            json!({
                "n": r.n,
                "points": r.points.iter().map(|(i, v)| json!([i, json::rational(v)])).collect::<Vec<_>>(),
                "tie": r.tie,
                "hull": json::polygon(&r.polygon),
                "single_segment": r.single_segment,
            })
        })
        .collect();
    let report = json!({
        "p": t.p, "e0": t.e0, "e": t.e,
        "imin": imin,
        "levels": lv,
        "c": json::rational(&c),
        "polygon": poly_json,
        "single_segment": single,
    });
    Ok(Outcome { summary: format!("imin = {imin}, c = {c}, single segment: {single}"), report })
}

pub fn run_intertwine(cfg: &JobConfig, n_target: i64) -> Result<Outcome> {
    let mut spec = cfg.spec()?;
    let m = cfg.u_order();
    let f = cfg.frob_lift(&spec)?;
    let f2 = cfg.frob_lift2(&spec)?;
    let need = intertwine::required_precision(&f, &f2, m, n_target)?;
    if cfg.precision.piadic.is_none() && spec.default_prec() < need {
        spec = spec.with_precision(need);
    }
    let f = cfg.frob_lift(&spec)?;
    let f2 = cfg.frob_lift2(&spec)?;
    let choice = match cfg.param("mu0") {
        Some(v) => Some(json::parse_element(&spec, v, "params.mu0")?.to_of()?),
        None => None,
    };
    let comp = intertwine::check_compatible(&f, &f2)?;
    let results = intertwine::solve_all(&f, &f2, choice, m, n_target)?;
    let out: Vec<Value> = results
        .iter()
        .map(|r| {
            json!({
                "mu0": json::element(&r.mu0.clone().into()),
                "xi": json::series(&r.xi),
                "integral": r.integral,
                "verified_to": { "M": r.verified_to.0, "N": r.verified_to.1 },
                "losses": r.losses.iter().map(|l| json!({
                    "degree": l.degree,
                    "divisor_valuation": l.divisor_valuation,
                    "lambda_valuation": json::valuation(l.lambda_valuation),
                    "precision": l.precision,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    let report = json!({
        "s": comp.s,
        "working_precision": spec.default_prec(),
        "results": out,
    });
    let summary = format!(
        "{} intertwiner(s) modulo x^{m}, verified to ϖ^{n_target}, integral: {}",
        results.len(),
        results.iter().all(|r| r.integral)
    );
    Ok(Outcome { report, summary })
}

pub fn run_witt_selftest(cfg: &JobConfig, samples: usize, seed: u64) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let len = cfg.precision.witt_len.unwrap_or(4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tests = (1..=len).map(|l| witt::witt_selftest(&spec, l, samples, &mut rng)).collect::<Result<Vec<_>>>()?;
    let passed = tests.iter().all(witt::SelfTest::passed);
    let report = json!({
        "field": json::field(&spec),
        "lengths": tests.iter().map(|t| json!({
            "len": t.len,
            "ghost_identities": t.ghost_identities,
            "integral": t.integral,
            "samples": t.samples,
            "failures": t.failures,
            "passed": t.passed(),
        })).collect::<Vec<_>>(),
        "passed": passed,
    });
    if !passed {
        return Err(Error::IdentityFailed(format!("Witt self-test failed: {report}")));
    }
    Ok(Outcome { report, summary: format!("Witt laws up to length {len}: all checks passed") })
}

pub fn run_fixedpoint(cfg: &JobConfig) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let f = cfg.frob_lift(&spec)?;
    let e = cfg.eisenstein(&spec)?;
    let len = cfg.precision.witt_len.unwrap_or(4);
    let budget = cfg.budget();
    let fp = witt::f_fixed_point(&f, len, budget)?;
    let ring = WittRing::new(&spec, len, budget)?;
    let (frob_ok, lifts_ubar) = witt::verify_fixed_point(&ring, &f, &fp.u)?;
    let red = witt::check_e_reduction(&ring, &e, &fp.u)?;
    let report = json!({
        "len": len,
        "iterations": fp.iterations,
        "u": json::witt_vec(&fp.u),
        "frobenius_is_f": frob_ok,
        "lifts_ubar": lifts_ubar,
        "e_reduction": {
            "holds": red.holds,
            "v_R": red.v_r.as_ref().map(json::rational),
            "v_pi": json::rational(&red.v_pi),
        },
    });
    let summary = format!(
        "fixed point after {} iteration(s); φ(u) = f(u): {frob_ok}; u ≡ [ū]: {lifts_ubar}; E(u) reduction: {}",
        fp.iterations, red.holds
    );
    Ok(Outcome { report, summary })
}

fn module_from(cfg: &JobConfig, spec: &Arc<FieldSpec>) -> Result<KisinModule> {
    let e = cfg.eisenstein(spec)?;
    let a = cfg.param("matrix").ok_or_else(|| Error::InvalidInput("params.matrix: missing".into()))?;
    let a = json::parse_matrix(spec, a, cfg.u_order(), "params.matrix")?;
    let r = cfg.param_usize("r", 1)?;
    KisinModule::new(a, e, r)
}

pub fn run_kisin_height(cfg: &JobConfig) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let m = module_from(cfg, &spec)?;
    let ok = kisin::verify_height(&m)?;
    Ok(Outcome {
        report: json!({ "d": m.rank(), "r": m.height(), "height_ok": ok }),
        summary: format!("E-height ≤ {}: {ok}", m.height()),
    })
}

pub fn run_kisin_minheight(cfg: &JobConfig) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let e = cfg.eisenstein(&spec)?;
    let a = cfg.param("series").ok_or_else(|| Error::InvalidInput("params.series: missing".into()))?;
    let a = json::parse_series(&spec, a, cfg.u_order(), "params.series")?;
    let (m, gamma) = kisin::minimal_height_rank1(&a, &e)?;
    Ok(Outcome {
        report: json!({ "m": m, "unit_cofactor": json::series(&gamma) }),
        summary: format!("minimal height {m}"),
    })
}

pub fn run_kisin_hypothesis(cfg: &JobConfig) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let f = cfg.frob_lift(&spec)?;
    let e = cfg.eisenstein(&spec)?;
    let max_n = cfg.param_usize("N", 6)?;
    Ok(match kisin::hypothesis_check(&f, &e, max_n)? {
        Some((n, k)) => Outcome {
            report: json!({ "found": true, "n": n, "k": k }),
            summary: format!("φ^{n}(f/u) = E^{k}: the full-faithfulness hypothesis fails"),
        },
        None => Outcome {
            report: json!({ "found": false }),
            summary: format!("no φ^n(f/u) with n ≤ {max_n} is a power of E"),
        },
    })
}

pub fn run_kisin_counterexample(cfg: &JobConfig) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let f = cfg.frob_lift(&spec)?;
    let e = cfg.eisenstein(&spec)?;
    let n = match cfg.param("n") {
        Some(_) => cfg.param_usize("n", 0)?,
        None => kisin::hypothesis_check(&f, &e, 6)?
            .map(|(n, _)| n)
            .ok_or_else(|| Error::InvalidInput("no n ≤ 6 with φⁿ(f/u) a power of E; pass --n".into()))?,
    };
    let c = kisin::counterexample_module(&f, &e, n, cfg.u_order())?;
    let sub = kisin::verify_height(&c.submodule)?;
    let amb = kisin::verify_height(&c.ambient)?;
    Ok(Outcome {
        report: json!({
            "n": n,
            "l": c.l,
            "A": json::series(&c.a),
            "identity": true,
            "height_ok": { "submodule": sub, "ambient": amb },
        }),
        summary: format!("A·E^{} = φ(A) holds modulo u^{}", c.l, c.a.cap()),
    })
}

pub fn run_kisin_xi(cfg: &JobConfig) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let m = module_from(cfg, &spec)?;
    let f = cfg.frob_lift(&spec)?;
    let steps = cfg.param_usize("steps", 7)?;
    let t = kisin::xi_iterate(&m, &f, steps)?;
    Ok(Outcome {
        report: json!({
            "Y": json::matrix(&t.y),
            "gauges": t.gauges.iter().map(|g| json::valuation(*g)).collect::<Vec<_>>(),
            "residual_gauge": json::valuation(t.residual),
        }),
        summary: format!(
            "Y_{steps}: gauges {}",
            t.gauges.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
        ),
    })
}

pub fn run_kisin_fil1(cfg: &JobConfig) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let m = module_from(cfg, &spec)?;
    let s = kisin::fil1_rank(&m)?;
    let det = kisin::det_height(&m)?;
    Ok(Outcome {
        report: json!({ "d": m.rank(), "fil1": s, "det_height": det }),
        summary: format!("dim Fil¹ = {s}"),
    })
}

pub fn run_presets(p: u64) -> Result<Outcome> {
    let list = Preset::ALL
        .iter()
        .map(|&pr| {
            Ok(json!({
                "name": pr.name(),
                "description": pr.description(),
                "config": JobConfig::for_preset(pr, p)?.to_json(),
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Outcome {
        report: json!({ "presets": list }),
        summary: Preset::ALL.iter().map(|p| p.name()).collect::<Vec<_>>().join(", "),
    })
}

fn dispatch(cli: Cli) -> Result<Outcome> {
    let mut cfg = load_config(&cli.config)?;
    match cli.command {
        Command::Presets { p } => run_presets(p),
        Command::Tower { common, levels, polygons } => {
            apply_common(&mut cfg, &common);
            run_tower(&cfg, levels, polygons)
        }
        Command::Intertwine { common, f2, mu0, n } => {
            apply_common(&mut cfg, &common);
            if let Some(f2) = f2 {
                cfg.f2 = Some(ints(&f2));
            }
            set_param(&mut cfg, "mu0", mu0.map(|m| json!(m)));
            set_param(&mut cfg, "N", n.map(|n| json!(n)));
            if common.m.is_none() && cfg.precision.u_order.is_none() {
                cfg.precision.u_order = Some(25);
            }
            let n_target = match cfg.param("N") {
                Some(v) => v.as_i64().ok_or_else(|| Error::InvalidInput("params.N: expected an integer".into()))?,
                None => 10,
            };
            run_intertwine(&cfg, n_target)
        }
        Command::WittSelftest { common, len, samples, seed } => {
            apply_common(&mut cfg, &common);
            if len.is_some() {
                cfg.precision.witt_len = len;
            }
            set_param(&mut cfg, "samples", samples.map(|s| json!(s)));
            set_param(&mut cfg, "seed", seed.map(|s| json!(s)));
            let samples = cfg.param_usize("samples", 100)?;
            let seed = cfg.param_usize("seed", 0)? as u64;
            run_witt_selftest(&cfg, samples, seed)
        }
        Command::Fixedpoint { common, len, root_budget, exp_bound } => {
            apply_common(&mut cfg, &common);
            if len.is_some() {
                cfg.precision.witt_len = len;
            }
            if root_budget.is_some() {
                cfg.precision.root_budget = root_budget;
            }
            if exp_bound.is_some() {
                cfg.precision.exp_bound = exp_bound;
            }
            run_fixedpoint(&cfg)
        }
        Command::Kisin { command } => match command {
            KisinCommand::Height { common, m } => {
                apply_common(&mut cfg, &common);
                apply_matrix(&mut cfg, &m)?;
                run_kisin_height(&cfg)
            }
            KisinCommand::Minheight { common, series } => {
                apply_common(&mut cfg, &common);
                if let Some(s) = series {
                    cfg.params.insert("series".into(), read_json_arg(&s)?);
                }
                run_kisin_minheight(&cfg)
            }
            KisinCommand::Hypothesis { common, n } => {
                apply_common(&mut cfg, &common);
                set_param(&mut cfg, "N", n.map(|n| json!(n)));
                run_kisin_hypothesis(&cfg)
            }
            KisinCommand::Counterexample { common, n } => {
                apply_common(&mut cfg, &common);
                set_param(&mut cfg, "n", n.map(|n| json!(n)));
                run_kisin_counterexample(&cfg)
            }
            KisinCommand::Xi { common, m, steps } => {
                apply_common(&mut cfg, &common);
                apply_matrix(&mut cfg, &m)?;
                set_param(&mut cfg, "steps", steps.map(|s| json!(s)));
                run_kisin_xi(&cfg)
            }
            KisinCommand::Fil1 { common, m } => {
                apply_common(&mut cfg, &common);
                apply_matrix(&mut cfg, &m)?;
                run_kisin_fil1(&cfg)
            }
        },
    }
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_precision_related() {
        2
    } else {
        1
    }
}

/// Parse `args` (including the program name), run the job and write the
/// report and summary. Returns the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                return 1;
            }
            let _ = write!(stdout, "{e}");
            return 0;
        }
    };
    let out = cli.out.clone();
    match dispatch(cli) {
        Ok(o) => {
            let text = serde_json::to_string_pretty(&o.report).expect("report serializes") + "\n";
            let written = match &out {
                Some(path) => std::fs::write(path, &text).map_err(|e| e.to_string()),
                None => stdout.write_all(text.as_bytes()).map_err(|e| e.to_string()),
            };
            if let Err(e) = written {
                let _ = writeln!(stderr, "error: cannot write report: {e}");
                return 1;
            }
            let _ = writeln!(stderr, "{}", o.summary);
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_ok(args: &[&str]) -> Value {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("frobkit").chain(args.iter().copied()), &mut out, &mut err);
        assert_eq!(code, 0, "{}", String::from_utf8_lossy(&err));
        serde_json::from_slice(&out).unwrap()
    }

    #[test]
    fn tower_report() {
        let r = run_ok(&["tower", "--preset", "cyclotomic", "--p", "3"]);
        assert_eq!(r["c"], "2/3");
        assert_eq!(r["imin"], 1);
        assert_eq!(r["levels"][1]["i_n"], "8");
        assert_eq!(r["single_segment"], true);
    }

    #[test]
    fn hypothesis_report() {
        let r = run_ok(&["kisin", "hypothesis", "--preset", "twisted", "--p", "3", "--N", "4"]);
        assert_eq!(r, json!({ "found": true, "n": 1, "k": 2 }));
    }

    #[test]
    fn presets_round_trip() {
        let r = run_ok(&["presets"]);
        let names: Vec<&str> = r["presets"].as_array().unwrap().iter().map(|x| x["name"].as_str().unwrap()).collect();
        assert_eq!(names, ["classical", "cyclotomic", "lubin-tate", "twisted"]);
        for entry in r["presets"].as_array().unwrap() {
            let cfg = JobConfig::parse(&entry["config"].to_string()).unwrap();
            assert_eq!(cfg.to_json(), entry["config"]);
            let spec = cfg.spec().unwrap();
            let preset = Preset::parse(cfg.preset.as_deref().unwrap()).unwrap();
            let explicit = JobConfig { preset: None, ..cfg.clone() };
            let f = explicit.frob_lift(&spec).unwrap();
            assert!(f.coeffs().iter().zip(preset.frob_lift(&spec).coeffs()).all(|(a, b)| a.eq_at_prec(b)));
            let e = explicit.eisenstein(&spec).unwrap();
            assert!(e.coeffs().iter().zip(preset.eisenstein(&spec).coeffs()).all(|(a, b)| a.eq_at_prec(b)));
        }
    }

    #[test]
    fn malformed_config_names_the_path() {
        let err = JobConfig::parse(r#"{"field": {"p": "three"}}"#).unwrap_err().to_string();
        assert!(err.contains("field.p"), "{err}");
        let err = JobConfig::parse(r#"{"field": {"p": 3}, "precision": {"N": 3}}"#).unwrap_err().to_string();
        assert!(err.contains("precision"), "{err}");
    }

    #[test]
    fn exit_codes() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(run(["frobkit", "frobnicate"], &mut out, &mut err), 1);
        let code = run(
            ["frobkit", "intertwine", "--p", "3", "--preset", "cyclotomic", "--f2", "3,0,1", "--precision", "12"],
            &mut out,
            &mut err,
        );
        assert_eq!(code, 2, "{}", String::from_utf8_lossy(&err));
        let code = run(
            ["frobkit", "intertwine", "--p", "3", "--preset", "cyclotomic", "--f2", "6,0,1"],
            &mut out,
            &mut err,
        );
        assert_eq!(code, 1);
    }

    #[test]
    fn reports_are_deterministic() {
        let a = run_ok(&["kisin", "counterexample", "--preset", "cyclotomic", "--p", "3", "--M", "12"]);
        let b = run_ok(&["kisin", "counterexample", "--preset", "cyclotomic", "--p", "3", "--M", "12"]);
        assert_eq!(a.to_string(), b.to_string());
        assert_eq!(a["l"], 1);
    }

    #[test]
    fn matrix_commands() {
        let r = run_ok(&["kisin", "fil1", "--preset", "classical", "--p", "3", "--matrix", "[[[3, 0, 1]]]"]);
        assert_eq!(r["fil1"], 1);
        assert_eq!(r["det_height"], 1);
        let r = run_ok(&["kisin", "height", "--preset", "classical", "--p", "3", "--matrix", "[[[3, 0, 1]]]", "--r", "0"]);
        assert_eq!(r["height_ok"], false);
    }
}
