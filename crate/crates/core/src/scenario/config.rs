//! Scenario documents: schema, validation and model construction.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambient::{
    catalog, catalog_entries, AmbientError, AmbientKind, AmbientModel, Backend, ClassicalTag, CoefficientExprs, StructureExprs,
};
use crate::biharmonic::BoundKind;
use crate::expr::{parse_expression_strict, Bindings, Expr, ParseError};
use crate::submanifold::{Domain, ImmersionModel};

use super::catalog::immersion_entry;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error("{path}: unknown catalog name '{name}'")]
    UnknownCatalog { path: String, name: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl ConfigError {
    pub fn path(&self) -> &str {
        match self {
            ConfigError::Schema { path, .. }
            | ConfigError::Parse { path, .. }
            | ConfigError::UnknownCatalog { path, .. }
            | ConfigError::Invalid { path, .. } => path,
        }
    }

    fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid { path: path.into(), message: message.into() }
    }
}

/// A number, or an expression in the scenario constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Expr(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbientSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inline: Option<InlineAmbient>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddedSpec {
    pub normals: Vec<Vec<String>>,
    pub constraints: Vec<String>,
    /// Parametrization in `p1, p2, ...`.
    pub chart: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineAmbient {
    #[serde(default)]
    pub name: Option<String>,
    pub kind: AmbientKind,
    pub dim: usize,
    pub coords: Vec<String>,
    #[serde(default)]
    pub metric: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub embedded: Option<EmbeddedSpec>,
    #[serde(default)]
    pub j: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub phi: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub xi: Option<Vec<String>>,
    #[serde(default)]
    pub eta: Option<Vec<String>>,
    #[serde(default)]
    pub alpha: Option<String>,
    #[serde(default)]
    pub beta: Option<String>,
    #[serde(default)]
    pub f1: Option<String>,
    #[serde(default)]
    pub f2: Option<String>,
    #[serde(default)]
    pub f3: Option<String>,
    #[serde(default)]
    pub tag: Option<ClassicalTag>,
    #[serde(default)]
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImmersionSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variables: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lo: Vec<Value>,
    pub hi: Vec<Value>,
    #[serde(default)]
    pub periodic: Option<Vec<bool>>,
    pub samples: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum CheckKind {
    ResidualGeneral,
    ResidualGcsf,
    ResidualGssf,
    Specialization {
        #[serde(default)]
        tol: Option<f64>,
    },
    Gauss {
        #[serde(default)]
        tol: Option<f64>,
    },
    CmcCharacterization {
        #[serde(default)]
        tol: Option<f64>,
    },
    BoundCheck {
        kind: BoundKind,
        #[serde(default)]
        tol: Option<f64>,
    },
    NonexistenceAudit,
    Classification,
    PseudoUmbilical {
        #[serde(default)]
        tol: Option<f64>,
    },
    Oracle {
        #[serde(default)]
        steps: Option<Vec<f64>>,
        #[serde(default)]
        min_order: Option<f64>,
    },
}

impl CheckKind {
    pub fn op(&self) -> &'static str {
        match self {
            CheckKind::ResidualGeneral => "residual_general",
            CheckKind::ResidualGcsf => "residual_gcsf",
            CheckKind::ResidualGssf => "residual_gssf",
            CheckKind::Specialization { .. } => "specialization",
            CheckKind::Gauss { .. } => "gauss",
            CheckKind::CmcCharacterization { .. } => "cmc_characterization",
            CheckKind::BoundCheck { .. } => "bound_check",
            CheckKind::NonexistenceAudit => "nonexistence_audit",
            CheckKind::Classification => "classification",
            CheckKind::PseudoUmbilical { .. } => "pseudo_umbilical",
            CheckKind::Oracle { .. } => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(flatten)]
    pub kind: CheckKind,
}

impl CheckSpec {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.op().to_string())
    }
}

/// The document as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub constants: BTreeMap<String, Value>,
    pub ambient: AmbientSpec,
    pub immersion: ImmersionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    /// Expected verdict per check label (`verdict` names the overall one).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub expect: BTreeMap<String, String>,
}

/// A validated scenario with its models built.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub document: ScenarioDocument,
    pub name: String,
    pub constants: Bindings,
    pub ambient: AmbientModel,
    pub immersion: ImmersionModel,
    pub checks: Vec<CheckSpec>,
    pub expect: BTreeMap<String, String>,
}

impl ScenarioConfig {
    /// The same scenario with one constant replaced by a number.
    pub fn with_constant(&self, name: &str, value: f64) -> Result<ScenarioConfig, ConfigError> {
        if !self.document.constants.contains_key(name) {
            return Err(ConfigError::invalid("constants", format!("no constant named '{name}'")));
        }
        let mut doc = self.document.clone();
        doc.constants.insert(name.to_string(), Value::Number(value));
        build(doc)
    }
}

/// Parses and validates a JSON scenario document.
pub fn load_scenario(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: ScenarioDocument = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::Schema { path: if path == "." { "document".into() } else { path }, message: e.into_inner().to_string() }
    })?;
    build(doc)
}

pub fn build(doc: ScenarioDocument) -> Result<ScenarioConfig, ConfigError> {
    if doc.schema_version != SCHEMA_VERSION {
        return Err(ConfigError::Schema {
            path: "schema_version".into(),
            message: format!("unsupported version {}, expected {SCHEMA_VERSION}", doc.schema_version),
        });
    }
    let constants = resolve_constants(&doc.constants)?;
    let known: BTreeSet<String> = constants.names().map(str::to_string).collect();
    let ambient = build_ambient(&doc.ambient, &constants, &known)?;
    let immersion = build_immersion(&doc, &constants, &known)?;
    immersion.validate(&ambient).map_err(|e| ConfigError::invalid("immersion", e.to_string()))?;
    let mut labels = BTreeSet::new();
    for (i, c) in doc.checks.iter().enumerate() {
        if !labels.insert(c.label()) {
            return Err(ConfigError::invalid(format!("checks[{i}]"), format!("duplicate check label '{}'", c.label())));
        }
        let wrong = match (&c.kind, ambient.kind) {
            (CheckKind::ResidualGcsf, AmbientKind::GeneralizedSasakian) => Some("residual_gcsf needs a complex ambient"),
            (CheckKind::ResidualGssf, AmbientKind::GeneralizedComplex) => Some("residual_gssf needs a contact ambient"),
            _ => None,
        };
        if let Some(msg) = wrong {
            return Err(ConfigError::invalid(format!("checks[{i}]"), msg));
        }
    }
    for key in doc.expect.keys() {
        if key != "verdict" && !labels.contains(key) {
            return Err(ConfigError::invalid(format!("expect.{key}"), "no check with this label"));
        }
    }
    let name = doc.name.clone().unwrap_or_else(|| format!("{} in {}", immersion.name, ambient.name));
    Ok(ScenarioConfig {
        checks: doc.checks.clone(),
        expect: doc.expect.clone(),
        document: doc,
        name,
        constants,
        ambient,
        immersion,
    })
}

fn parse_at(src: &str, params: &[&str], known: &BTreeSet<String>, path: &str) -> Result<Expr, ConfigError> {
    parse_expression_strict(src, params, known).map_err(|source| ConfigError::Parse { path: path.to_string(), source })
}

fn eval_value(v: &Value, b: &Bindings, known: &BTreeSet<String>, path: &str) -> Result<f64, ConfigError> {
    match v {
        Value::Number(x) => Ok(*x),
        Value::Expr(s) => {
            let e = parse_at(s, &[], known, path)?;
            e.eval(&[], b).map_err(|err| ConfigError::invalid(path, err.to_string()))
        }
    }
}

/// Evaluates constants in dependency order.
fn resolve_constants(raw: &BTreeMap<String, Value>) -> Result<Bindings, ConfigError> {
    let mut b = Bindings::new();
    let mut known: BTreeSet<String> = b.names().map(str::to_string).collect();
    known.extend(raw.keys().cloned());
    let mut parsed = BTreeMap::new();
    for (k, v) in raw {
        let path = format!("constants.{k}");
        if k == "pi" {
            return Err(ConfigError::invalid(path, "'pi' is predefined"));
        }
        match v {
            Value::Number(x) => b.set(k, *x),
            Value::Expr(s) => {
                parsed.insert(k.clone(), parse_at(s, &[], &known, &path)?);
            }
        }
    }
    while !parsed.is_empty() {
        let ready: Vec<String> =
            parsed.iter().filter(|(_, e)| e.constants().iter().all(|c| b.contains(c))).map(|(k, _)| k.clone()).collect();
        if ready.is_empty() {
            let k = parsed.keys().next().expect("nonempty");
            return Err(ConfigError::invalid(format!("constants.{k}"), "circular constant definitions"));
        }
        for k in ready {
            let e = parsed.remove(&k).expect("ready key");
            let x = e.eval(&[], &b).map_err(|err| ConfigError::invalid(format!("constants.{k}"), err.to_string()))?;
            b.set(&k, x);
        }
    }
    Ok(b)
}

fn build_ambient(spec: &AmbientSpec, b: &Bindings, known: &BTreeSet<String>) -> Result<AmbientModel, ConfigError> {
    let ambient_err = |path: &str, e: AmbientError| match e {
        AmbientError::UnknownCatalog(name) => ConfigError::UnknownCatalog { path: path.to_string(), name },
        other => ConfigError::invalid(path, other.to_string()),
    };
    match (&spec.catalog, &spec.inline) {
        (Some(name), None) => {
            let mut params = BTreeMap::new();
            if let Some(entry) = catalog_entries().into_iter().find(|e| e.name == name) {
                for (p, _) in &entry.params {
                    if let Some(x) = b.get(p) {
                        params.insert(p.to_string(), x);
                    }
                }
            }
            for (k, v) in &spec.params {
                params.insert(k.clone(), eval_value(v, b, known, &format!("ambient.params.{k}"))?);
            }
            catalog(name, &params).map_err(|e| {
                let path = if matches!(e, AmbientError::UnknownCatalog(_)) { "ambient.catalog" } else { "ambient.params" };
                ambient_err(path, e)
            })
        }
        (None, Some(inline)) => {
            if !spec.params.is_empty() {
                return Err(ConfigError::invalid("ambient.params", "params apply to catalog ambients only"));
            }
            let model = inline_ambient(inline, b, known)?;
            model.validate().map_err(|e| ambient_err("ambient.inline", e))?;
            Ok(model)
        }
        _ => Err(ConfigError::Schema { path: "ambient".into(), message: "exactly one of 'catalog' or 'inline' is required".into() }),
    }
}

fn inline_ambient(a: &InlineAmbient, b: &Bindings, known: &BTreeSet<String>) -> Result<AmbientModel, ConfigError> {
    let coords: Vec<&str> = a.coords.iter().map(String::as_str).collect();
    let base = "ambient.inline";
    let one = |field: &str, s: &Option<String>| -> Result<Expr, ConfigError> {
        let path = format!("{base}.{field}");
        let s = s.as_ref().ok_or_else(|| ConfigError::Schema { path: path.clone(), message: "missing field".into() })?;
        parse_at(s, &coords, known, &path)
    };
    let vec_of = |field: &str, v: &[String], params: &[&str]| -> Result<Vec<Expr>, ConfigError> {
        v.iter().enumerate().map(|(i, s)| parse_at(s, params, known, &format!("{base}.{field}[{i}]"))).collect()
    };
    let mat_of = |field: &str, m: &[Vec<String>]| -> Result<Vec<Vec<Expr>>, ConfigError> {
        m.iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter().enumerate().map(|(j, s)| parse_at(s, &coords, known, &format!("{base}.{field}[{i}][{j}]"))).collect()
            })
            .collect()
    };
    let missing = |field: &str| ConfigError::Schema { path: format!("{base}.{field}"), message: "missing field".into() };
    let backend = match (&a.metric, &a.embedded) {
        (Some(m), None) => Backend::Chart { metric: mat_of("metric", m)? },
        (None, Some(e)) => {
            let chart_params: Vec<String> = (1..=a.dim).map(|i| format!("p{i}")).collect();
            let chart_params: Vec<&str> = chart_params.iter().map(String::as_str).collect();
            Backend::Embedded {
                normals: e.normals.iter().enumerate().map(|(i, n)| vec_of(&format!("embedded.normals[{i}]"), n, &coords)).collect::<Result<_, _>>()?,
                constraints: vec_of("embedded.constraints", &e.constraints, &coords)?,
                chart: vec_of("embedded.chart", &e.chart, &chart_params)?,
            }
        }
        _ => return Err(ConfigError::Schema { path: base.into(), message: "exactly one of 'metric' or 'embedded' is required".into() }),
    };
    let (structure, coefficients) = match a.kind {
        AmbientKind::GeneralizedComplex => (
            StructureExprs::Complex { j: mat_of("j", a.j.as_ref().ok_or_else(|| missing("j"))?)? },
            CoefficientExprs::Complex { alpha: one("alpha", &a.alpha)?, beta: one("beta", &a.beta)? },
        ),
        AmbientKind::GeneralizedSasakian => (
            StructureExprs::Contact {
                phi: mat_of("phi", a.phi.as_ref().ok_or_else(|| missing("phi"))?)?,
                xi: vec_of("xi", a.xi.as_ref().ok_or_else(|| missing("xi"))?, &coords)?,
                eta: vec_of("eta", a.eta.as_ref().ok_or_else(|| missing("eta"))?, &coords)?,
            },
            CoefficientExprs::Contact { f1: one("f1", &a.f1)?, f2: one("f2", &a.f2)?, f3: one("f3", &a.f3)? },
        ),
    };
    Ok(AmbientModel {
        name: a.name.clone().unwrap_or_else(|| "inline".into()),
        kind: a.kind,
        dim: a.dim,
        coords: a.coords.clone(),
        backend,
        structure,
        coefficients,
        tag: a.tag,
        certified: a.certified,
        bindings: b.clone(),
    })
}

fn build_immersion(doc: &ScenarioDocument, b: &Bindings, known: &BTreeSet<String>) -> Result<ImmersionModel, ConfigError> {
    let spec = &doc.immersion;
    let (name, variables, components, bindings, default_domain) = match (&spec.catalog, &spec.components) {
        (Some(name), None) => {
            if spec.variables.is_some() {
                return Err(ConfigError::invalid("immersion.variables", "variables apply to inline immersions only"));
            }
            let entry = immersion_entry(name)
                .ok_or_else(|| ConfigError::UnknownCatalog { path: "immersion.catalog".into(), name: name.clone() })?;
            // explicit params win over same-named scenario constants, which win over defaults
            let mut local = Bindings::new();
            for (p, default) in &entry.params {
                local.set(p, b.get(p).unwrap_or(*default));
            }
            for (k, v) in &spec.params {
                let path = format!("immersion.params.{k}");
                if !entry.params.iter().any(|(p, _)| p == k) {
                    return Err(ConfigError::invalid(path, format!("immersion '{name}' has no parameter '{k}'")));
                }
                local.set(k, eval_value(v, b, known, &path)?);
            }
            let vars = entry.variables();
            let var_refs: Vec<&str> = vars.iter().map(String::as_str).collect();
            let local_known: BTreeSet<String> = local.names().map(str::to_string).collect();
            let comps = entry
                .components
                .iter()
                .enumerate()
                .map(|(i, c)| parse_at(c, &var_refs, &local_known, &format!("immersion.components[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            (name.clone(), vars, comps, local, Some(entry.domain))
        }
        (None, Some(comps)) => {
            if !spec.params.is_empty() {
                return Err(ConfigError::invalid("immersion.params", "params apply to catalog immersions only"));
            }
            let vars = spec.variables.clone().ok_or_else(|| ConfigError::Schema {
                path: "immersion.variables".into(),
                message: "inline immersions need variable names".into(),
            })?;
            let var_refs: Vec<&str> = vars.iter().map(String::as_str).collect();
            let comps = comps
                .iter()
                .enumerate()
                .map(|(i, c)| parse_at(c, &var_refs, known, &format!("immersion.components[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            ("inline".to_string(), vars, comps, b.clone(), None)
        }
        _ => {
            return Err(ConfigError::Schema {
                path: "immersion".into(),
                message: "exactly one of 'catalog' or 'components' is required".into(),
            })
        }
    };
    let domain = match &doc.domain {
        Some(d) => {
            let vals = |field: &str, v: &[Value]| -> Result<Vec<f64>, ConfigError> {
                v.iter().enumerate().map(|(i, x)| eval_value(x, b, known, &format!("domain.{field}[{i}]"))).collect()
            };
            let lo = vals("lo", &d.lo)?;
            let periodic = d.periodic.clone().unwrap_or_else(|| vec![false; lo.len()]);
            Domain::new(lo, vals("hi", &d.hi)?, periodic, d.samples.clone())
        }
        None => default_domain.ok_or_else(|| ConfigError::Schema {
            path: "domain".into(),
            message: "inline immersions need a domain".into(),
        })?,
    };
    domain.validate(variables.len()).map_err(|e| ConfigError::invalid("domain", e.to_string()))?;
    Ok(ImmersionModel { name, params: variables, components, domain, bindings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(ambient: &str, immersion: &str) -> String {
        format!(r#"{{"schema_version": 1, "ambient": {ambient}, "immersion": {immersion}}}"#)
    }

    #[test]
    fn catalog_scenario_with_constant() {
        let text = r#"{
            "schema_version": 1,
            "constants": {"rho": 0.7071},
            "ambient": {"catalog": "sasakian_sphere_S5"},
            "immersion": {"catalog": "small_hypersphere"},
            "checks": [{"op": "residual_gssf"}]
        }"#;
        let cfg = load_scenario(text).unwrap();
        assert_eq!(cfg.immersion.bindings.get("rho"), Some(0.7071));
        assert_eq!(cfg.immersion.dim(), 4);
        assert_eq!(cfg.checks[0].label(), "residual_gssf");
    }

    #[test]
    fn explicit_params_override_constants() {
        let text = r#"{
            "schema_version": 1,
            "constants": {"r": 2, "half": "r/2"},
            "ambient": {"catalog": "flat_C2"},
            "immersion": {"catalog": "round_hypersphere", "params": {"r": "half + 0.25"}}
        }"#;
        let cfg = load_scenario(text).unwrap();
        assert_eq!(cfg.constants.get("half"), Some(1.0));
        assert_eq!(cfg.immersion.bindings.get("r"), Some(1.25));
        let swept = cfg.with_constant("r", 4.0).unwrap();
        assert_eq!(swept.immersion.bindings.get("r"), Some(2.25));
    }

    #[test]
    fn parse_error_carries_component_path() {
        let text = serde_json::json!({
            "schema_version": 1,
            "ambient": {"catalog": "flat_C2"},
            "immersion": {"variables": ["u1"], "components": ["sin(u1", "0", "0", "0"]},
            "domain": {"lo": [0], "hi": [1], "samples": [3]}
        });
        let err = load_scenario(&text.to_string()).unwrap_err();
        assert_eq!(err.path(), "immersion.components[0]", "{err}");
        assert!(matches!(err, ConfigError::Parse { .. }));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let text = serde_json::json!({
            "schema_version": 1,
            "ambient": {"catalog": "CP2"},
            "immersion": {"variables": ["u1", "u2"], "components": ["u1", "u2", "0", "0", "0"]},
            "domain": {"lo": [0, 0], "hi": [1, 1], "samples": [2, 2]}
        });
        let err = load_scenario(&text.to_string()).unwrap_err();
        assert_eq!(err.path(), "immersion", "{err}");
        assert!(err.to_string().contains('5'), "{err}");
    }

    #[test]
    fn schema_errors_carry_paths() {
        let err = load_scenario(r#"{"schema_version": 1, "ambient": {"catalog": 3}, "immersion": {}}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Schema { .. }));
        assert_eq!(err.path(), "ambient.catalog");

        let err = load_scenario(r#"{"schema_version": 1, "ambient": {"catalog": "flat_C2"}}"#).unwrap_err();
        assert!(err.to_string().contains("immersion"), "{err}");

        let err = load_scenario(&doc(r#"{"catalog": "flat_C2"}"#, r#"{"catalog": "circle"}"#).replace(
            r#""schema_version": 1"#,
            r#""schema_version": 1, "checks": [{"op": "bound_check", "kind": "Nope"}]"#,
        ))
        .unwrap_err();
        assert!(err.path().starts_with("checks[0]"), "{err}");
    }

    #[test]
    fn unknown_catalogs() {
        let err = load_scenario(&doc(r#"{"catalog": "CP3"}"#, r#"{"catalog": "circle"}"#)).unwrap_err();
        assert!(matches!(&err, ConfigError::UnknownCatalog { path, name } if path == "ambient.catalog" && name == "CP3"));
        let err = load_scenario(&doc(r#"{"catalog": "flat_C2"}"#, r#"{"catalog": "torus3"}"#)).unwrap_err();
        assert_eq!(err.path(), "immersion.catalog");
    }

    #[test]
    fn constants_resolve_in_dependency_order() {
        let mut raw = BTreeMap::new();
        raw.insert("a".to_string(), Value::Expr("b + 1".into()));
        raw.insert("b".to_string(), Value::Expr("c * 2".into()));
        raw.insert("c".to_string(), Value::Number(1.5));
        let b = resolve_constants(&raw).unwrap();
        assert_eq!(b.get("a"), Some(4.0));

        raw.insert("c".to_string(), Value::Expr("a".into()));
        let err = resolve_constants(&raw).unwrap_err();
        assert!(err.to_string().contains("circular"));

        raw.insert("c".to_string(), Value::Expr("zeta".into()));
        assert!(matches!(resolve_constants(&raw).unwrap_err(), ConfigError::Parse { .. }));
    }

    #[test]
    fn expectations_and_checks_are_validated() {
        let base = doc(r#"{"catalog": "flat_C2"}"#, r#"{"catalog": "circle"}"#);
        let with = |extra: &str| base.replacen(r#""schema_version": 1"#, &format!(r#""schema_version": 1, {extra}"#), 1);
        let err = load_scenario(&with(r#""expect": {"nothing": "Coherent"}"#)).unwrap_err();
        assert_eq!(err.path(), "expect.nothing");
        let err = load_scenario(&with(r#""checks": [{"op": "gauss"}, {"op": "gauss"}]"#)).unwrap_err();
        assert_eq!(err.path(), "checks[1]");
        let err = load_scenario(&with(r#""checks": [{"op": "residual_gssf"}]"#)).unwrap_err();
        assert_eq!(err.path(), "checks[0]");
        assert!(load_scenario(&with(r#""checks": [{"op": "gauss", "label": "g"}], "expect": {"g": "Agree"}"#)).is_ok());
    }

    #[test]
    fn inline_ambient_round_trip() {
        let text = r#"{
            "schema_version": 1,
            "ambient": {"inline": {
                "kind": "GeneralizedComplex", "dim": 4, "coords": ["x1", "y1", "x2", "y2"],
                "metric": [["1","0","0","0"],["0","1","0","0"],["0","0","1","0"],["0","0","0","1"]],
                "j": [["0","-1","0","0"],["1","0","0","0"],["0","0","0","-1"],["0","0","1","0"]],
                "alpha": "0", "beta": "0", "certified": true
            }},
            "immersion": {"variables": ["s", "t"], "components": ["s", "t", "0", "0"]},
            "domain": {"lo": [0, "-pi/4"], "hi": [1, "pi/4"], "samples": [2, 3]}
        }"#;
        let cfg = load_scenario(text).unwrap();
        assert_eq!(cfg.ambient.name, "inline");
        assert_eq!(cfg.immersion.domain.lo[1], -std::f64::consts::FRAC_PI_4);
        let again = build(serde_json::from_str(&serde_json::to_string(&cfg.document).unwrap()).unwrap()).unwrap();
        assert_eq!(again.document, cfg.document);
    }
}
