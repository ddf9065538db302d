//! Reading and writing theories, substitution files, model files and comma
//! files.
//!
//! Model files are JSON objects with a `theory` (a path ending in `.gat`,
//! relative to the model file, or inline source), `sorts` and `ops`. An
//! indexed sort is an object keyed by comma-joined index labels; an
//! operation is a table nested one level per argument. Equations are not
//! listed. The canonical form has sorted keys, two-space indentation and a
//! trailing newline.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value as Json};
use twosort_core::coreflect::{CommaObject, FamilyMorphism, FamilyObject};
use twosort_core::models::{split_key, FiniteModel, Value};
use twosort_core::{check_theory, parse_subst_file, parse_theory, CheckedTheory, ConvBudget, DeclClass, KernelError, Substitution, Theory};

use crate::error::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn parse_source(src: &str, context: &str) -> Result<Theory, CliError> {
    parse_theory(src).map_err(|e| CliError::kernel(context, e))
}

pub fn check_source(src: &str, context: &str, budget: ConvBudget) -> Result<CheckedTheory, CliError> {
    let th = parse_source(src, context)?;
    check_theory(&th, budget).map_err(|e| CliError::kernel(context, e))
}

pub fn load_theory(path: &Path, budget: ConvBudget) -> Result<CheckedTheory, CliError> {
    check_source(&read_text(path)?, &path.display().to_string(), budget)
}

fn relative_to(file: &Path, target: &str) -> PathBuf {
    match file.parent() {
        Some(dir) => dir.join(target),
        None => PathBuf::from(target),
    }
}

/// Loads a substitution file. The theories named in its header are read
/// relative to the file, and the entries are put in target order.
pub fn load_subst(path: &Path, budget: ConvBudget) -> Result<Substitution, CliError> {
    let ctx = path.display().to_string();
    let raw = parse_subst_file(&read_text(path)?).map_err(|e| CliError::kernel(&ctx, e))?;
    let source = load_theory(&relative_to(path, &raw.from), budget)?;
    let target = load_theory(&relative_to(path, &raw.to), budget)?;
    let mut entries: BTreeMap<_, _> = BTreeMap::new();
    for (n, t) in raw.entries {
        if entries.insert(n.clone(), t).is_some() {
            return Err(CliError::kernel(&ctx, KernelError::Mismatch(format!("{n} is assigned twice"))));
        }
    }
    let mut assignments = Vec::new();
    for d in target.decls() {
        let t = entries
            .remove(&d.name)
            .ok_or_else(|| CliError::kernel(&ctx, KernelError::Mismatch(format!("no assignment for {}", d.name))))?;
        assignments.push(t);
    }
    if let Some(n) = entries.keys().next() {
        return Err(CliError::kernel(&ctx, KernelError::Mismatch(format!("{n} is not declared in the target theory"))));
    }
    let s = Substitution {
        source: source.theory().clone(),
        target: target.theory().clone(),
        assignments,
    };
    twosort_core::check_substitution(&s, budget).map_err(|e| CliError::kernel(&ctx, e))?;
    Ok(s)
}

pub fn print_json(j: &Json) -> String {
    let mut s = serde_json::to_string_pretty(j).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn value_to_json(v: &Value) -> Json {
    match v {
        Value::Set(c) => Json::Array(c.iter().cloned().map(Json::String).collect()),
        Value::Elem(l) => Json::String(l.clone()),
        Value::Fn(t) => Json::Object(t.iter().map(|(k, v)| (k.clone(), value_to_json(v))).collect()),
        Value::Proof => Json::Null,
    }
}

/// Flattens the first `depth` table levels into comma-joined keys.
fn flatten(v: &Value, depth: usize, prefix: &mut Vec<String>, out: &mut Map<String, Json>) {
    match v {
        Value::Fn(t) if depth > 0 => {
            for (k, w) in t {
                prefix.push(k.clone());
                flatten(w, depth - 1, prefix, out);
                prefix.pop();
            }
        }
        other => {
            out.insert(prefix.join(","), value_to_json(other));
        }
    }
}

pub fn model_to_json(m: &FiniteModel, theory: &str) -> Json {
    let th = m.theory();
    let mut sorts = Map::new();
    let mut ops = Map::new();
    for (i, (d, v)) in th.decls().iter().zip(m.values()).enumerate() {
        match th.class(i) {
            DeclClass::Sort => {
                let arity = d.ty.peel().0.len();
                let j = if arity == 0 {
                    value_to_json(v)
                } else {
                    let mut flat = Map::new();
                    flatten(v, arity, &mut Vec::new(), &mut flat);
                    Json::Object(flat)
                };
                sorts.insert(d.name.to_string(), j);
            }
            DeclClass::Operation => {
                ops.insert(d.name.to_string(), value_to_json(v));
            }
            _ => {}
        }
    }
    let mut top = Map::new();
    top.insert("theory".into(), Json::String(theory.into()));
    top.insert("sorts".into(), Json::Object(sorts));
    top.insert("ops".into(), Json::Object(ops));
    Json::Object(top)
}

pub fn write_model(m: &FiniteModel, theory: &str) -> String {
    print_json(&model_to_json(m, theory))
}

fn json_to_value(j: &Json, ctx: &str) -> Result<Value, CliError> {
    match j {
        Json::String(s) => Ok(Value::Elem(s.clone())),
        Json::Array(items) => items
            .iter()
            .map(|i| match i {
                Json::String(s) => Ok(s.clone()),
                _ => Err(CliError::format(ctx, "carrier entries must be strings")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Value::Set),
        Json::Object(map) => {
            let mut table = BTreeMap::new();
            for (k, v) in map {
                let v = json_to_value(v, ctx)?;
                insert_path(&mut table, &split_key(k), v, ctx)?;
            }
            Ok(Value::Fn(table))
        }
        _ => Err(CliError::format(ctx, format!("unexpected JSON value {j}"))),
    }
}

fn insert_path(table: &mut BTreeMap<String, Value>, path: &[String], v: Value, ctx: &str) -> Result<(), CliError> {
    let Some((first, rest)) = path.split_first() else {
        return Err(CliError::format(ctx, "empty table key"));
    };
    if rest.is_empty() {
        if table.insert(first.clone(), v).is_some() {
            return Err(CliError::format(ctx, format!("duplicate entry for {first}")));
        }
        return Ok(());
    }
    match table.entry(first.clone()).or_insert_with(|| Value::Fn(BTreeMap::new())) {
        Value::Fn(inner) => insert_path(inner, rest, v, ctx),
        _ => Err(CliError::format(ctx, format!("conflicting entries under {first}"))),
    }
}

fn section<'j>(top: &'j Map<String, Json>, key: &str, ctx: &str) -> Result<Option<&'j Map<String, Json>>, CliError> {
    match top.get(key) {
        None => Ok(None),
        Some(Json::Object(m)) => Ok(Some(m)),
        Some(_) => Err(CliError::format(ctx, format!("`{key}` must be an object"))),
    }
}

/// Reads the `sorts` and `ops` of a model file against a theory. Equation
/// tables are filled in; nothing is checked beyond the JSON structure.
pub fn model_from_json(j: &Json, th: &CheckedTheory, ctx: &str) -> Result<FiniteModel, CliError> {
    let Json::Object(top) = j else {
        return Err(CliError::format(ctx, "a model file is a JSON object"));
    };
    if let Some(k) = top.keys().find(|k| !matches!(k.as_str(), "theory" | "sorts" | "ops")) {
        return Err(CliError::format(ctx, format!("unknown field `{k}`")));
    }
    let empty = Map::new();
    let sorts = section(top, "sorts", ctx)?.unwrap_or(&empty);
    let ops = section(top, "ops", ctx)?.unwrap_or(&empty);
    for (names, class) in [(sorts, "sorts"), (ops, "ops")] {
        for k in names.keys() {
            let ok = th.decls().iter().enumerate().any(|(i, d)| {
                d.name.as_str() == k
                    && match class {
                        "sorts" => th.class(i) == DeclClass::Sort,
                        _ => th.class(i) == DeclClass::Operation,
                    }
            });
            if !ok {
                return Err(CliError::format(ctx, format!("`{k}` is not a declared {} of the theory", &class[..class.len() - 1])));
            }
        }
    }
    let mut m = FiniteModel::new(th.clone(), Vec::new());
    for (i, d) in th.decls().iter().enumerate() {
        let v = match th.class(i) {
            DeclClass::Sort | DeclClass::Operation => {
                let src = if th.class(i) == DeclClass::Sort { sorts } else { ops };
                let j = src.get(d.name.as_str()).ok_or_else(|| {
                    CliError::model(ctx, twosort_core::ModelError::Totality {
                        decl: d.name.clone(),
                        msg: "no value given".into(),
                    })
                })?;
                json_to_value(j, ctx)?
            }
            _ => m
                .build_value(&d.ty, &mut |_, _| None)
                .map_err(|e| CliError::model(ctx, e))?
                .ok_or_else(|| CliError::format(ctx, format!("cannot fill equation {}", d.name)))?,
        };
        m.push(v);
    }
    Ok(m)
}

/// The theory a file refers to: a `.gat` path relative to `file`, or
/// inline source.
fn resolve_theory(j: &Json, file: &Path, budget: ConvBudget) -> Result<Option<CheckedTheory>, CliError> {
    let ctx = file.display().to_string();
    match j {
        Json::Object(top) => match top.get("theory") {
            None => Ok(None),
            Some(Json::String(s)) if s.ends_with(".gat") && !s.contains(';') => load_theory(&relative_to(file, s), budget).map(Some),
            Some(Json::String(s)) => check_source(s, &format!("{ctx} (inline theory)"), budget).map(Some),
            Some(_) => Err(CliError::format(&ctx, "`theory` must be a string")),
        },
        _ => Err(CliError::format(&ctx, "expected a JSON object")),
    }
}

fn pick_theory(found: Option<CheckedTheory>, expected: Option<&CheckedTheory>, ctx: &str) -> Result<CheckedTheory, CliError> {
    match (found, expected) {
        (Some(f), Some(e)) => {
            if f.theory().alpha_eq(e.theory()) {
                Ok(e.clone())
            } else {
                Err(CliError::kernel(ctx, KernelError::Mismatch("the file is over a different theory".into())))
            }
        }
        (Some(f), None) => Ok(f),
        (None, Some(e)) => Ok(e.clone()),
        (None, None) => Err(CliError::format(ctx, "no theory given")),
    }
}

pub fn parse_json(text: &str, ctx: &str) -> Result<Json, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::format(ctx, format!("invalid JSON: {e}")))
}

/// Loads a model file. When `expected` is given the file's own theory, if
/// any, must agree with it.
pub fn load_model(path: &Path, expected: Option<&CheckedTheory>, budget: ConvBudget) -> Result<FiniteModel, CliError> {
    let ctx = path.display().to_string();
    let j = parse_json(&read_text(path)?, &ctx)?;
    let th = pick_theory(resolve_theory(&j, path, budget)?, expected, &ctx)?;
    model_from_json(&j, &th, &ctx)
}

pub fn comma_to_json(c: &CommaObject, theory: &str) -> Json {
    let mut family = Map::new();
    family.insert("U".into(), Json::Array(c.family.u.iter().cloned().map(Json::String).collect()));
    family.insert(
        "El".into(),
        Json::Object(
            c.family
                .el
                .iter()
                .map(|(k, v)| (k.clone(), Json::Array(v.iter().cloned().map(Json::String).collect())))
                .collect(),
        ),
    );
    let map = c.map.base.iter().map(|(k, v)| (k.clone(), Json::String(v.clone()))).collect();
    let mut top = Map::new();
    top.insert("model".into(), model_to_json(&c.model, theory));
    top.insert("family".into(), Json::Object(family));
    top.insert("map".into(), Json::Object(map));
    Json::Object(top)
}

fn strings(j: &Json, ctx: &str, what: &str) -> Result<Vec<String>, CliError> {
    match json_to_value(j, ctx)? {
        Value::Set(v) => Ok(v),
        _ => Err(CliError::format(ctx, format!("{what} must be an array of strings"))),
    }
}

/// Reads a comma file. Its fiber maps are the identities, as they are for
/// every object of the comma category.
pub fn comma_from_json(j: &Json, file: &Path, expected: Option<&CheckedTheory>, budget: ConvBudget) -> Result<CommaObject, CliError> {
    let ctx = file.display().to_string();
    let Json::Object(top) = j else {
        return Err(CliError::format(&ctx, "a comma file is a JSON object"));
    };
    let field = |k: &str| top.get(k).ok_or_else(|| CliError::format(&ctx, format!("missing field `{k}`")));
    let mj = field("model")?;
    let th = pick_theory(resolve_theory(mj, file, budget)?, expected, &ctx)?;
    let model = model_from_json(mj, &th, &ctx)?;
    let Json::Object(fam) = field("family")? else {
        return Err(CliError::format(&ctx, "`family` must be an object"));
    };
    let u = strings(fam.get("U").ok_or_else(|| CliError::format(&ctx, "missing family field `U`"))?, &ctx, "U")?;
    let Some(Json::Object(elj)) = fam.get("El") else {
        return Err(CliError::format(&ctx, "missing family field `El`"));
    };
    let mut el = BTreeMap::new();
    for (k, v) in elj {
        el.insert(k.clone(), strings(v, &ctx, "El entries")?);
    }
    let Json::Object(mapj) = field("map")? else {
        return Err(CliError::format(&ctx, "`map` must be an object"));
    };
    let own = twosort_core::coreflect::family_of_model(&model).map_err(|e| CliError::model(&ctx, e))?;
    let mut base = BTreeMap::new();
    let mut fibers = BTreeMap::new();
    for (k, v) in mapj {
        let Json::String(v) = v else {
            return Err(CliError::format(&ctx, "map entries must be strings"));
        };
        base.insert(k.clone(), v.clone());
        let fiber = own.el.get(k).cloned().unwrap_or_default();
        fibers.insert(k.clone(), fiber.into_iter().map(|x| (x.clone(), x)).collect());
    }
    Ok(CommaObject {
        model,
        family: FamilyObject { u, el },
        map: FamilyMorphism {
            base,
            fibers,
            cartesian: true,
        },
    })
}

pub fn load_comma(path: &Path, expected: Option<&CheckedTheory>, budget: ConvBudget) -> Result<CommaObject, CliError> {
    let j = parse_json(&read_text(path)?, &path.display().to_string())?;
    comma_from_json(&j, path, expected, budget)
}
