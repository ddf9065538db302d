//! Finite set-theoretic models, evaluation, model morphisms and hom-set
//! enumeration.
//!
//! A value of type `(x : A) B` is a table keyed by the labels of the carrier
//! of `A`; sorts are carriers (sorted label lists), operations are elements
//! or tables of elements, equations are `Proof` or tables of `Proof`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::ModelError;
use crate::kernel::{CheckedTheory, DeclClass};
use crate::normalize::nf;
use crate::syntax::{Name, Substitution, Tm, Ty};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Value {
    /// A carrier: sorted, pairwise distinct labels.
    Set(Vec<String>),
    Elem(String),
    /// A curried table keyed by argument label.
    Fn(BTreeMap<String, Value>),
    Proof,
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Set(c) => write!(f, "{{{}}}", c.join(", ")),
            Value::Elem(e) => f.write_str(e),
            Value::Fn(m) => {
                f.write_str("[")?;
                for (i, (k, v)) in m.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k} -> {v}")?;
                }
                f.write_str("]")
            }
            Value::Proof => f.write_str("proof"),
        }
    }
}

impl Value {
    pub fn set<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Value {
        let mut v: Vec<String> = labels.into_iter().map(Into::into).collect();
        v.sort();
        v.dedup();
        Value::Set(v)
    }

    pub fn elem(label: impl Into<String>) -> Value {
        Value::Elem(label.into())
    }

    /// Applies a table to a sequence of argument labels.
    pub fn apply(&self, args: &[String]) -> Result<&Value, ModelError> {
        let mut cur = self;
        for a in args {
            cur = match cur {
                Value::Fn(m) => m
                    .get(a)
                    .ok_or_else(|| ModelError::Domain(format!("argument {a} is outside the table domain")))?,
                other => return Err(ModelError::Domain(format!("applying non-function value {other}"))),
            };
        }
        Ok(cur)
    }
}

/// A label is nonempty, its parentheses are balanced and every comma sits
/// inside parentheses. Plain labels use none of these characters; the rule
/// admits index tags such as `E(a,b)` while keeping tags injective.
pub fn is_valid_label(l: &str) -> bool {
    let mut depth = 0usize;
    for c in l.chars() {
        match c {
            '(' => depth += 1,
            ')' => {
                if depth == 0 {
                    return false;
                }
                depth -= 1;
            }
            ',' if depth == 0 => return false,
            _ => {}
        }
    }
    !l.is_empty() && depth == 0
}

/// The tag `S(l1,...,ln)` naming a carrier of a model.
pub fn tag(sort: &Name, labels: &[String]) -> String {
    format!("{sort}({})", labels.join(","))
}

/// Splits a comma-joined index key at its top-level commas.
pub fn split_key(key: &str) -> Vec<String> {
    if key.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut cur = String::new();
    for c in key.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                out.push(core::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    out.push(cur);
    out
}

pub type Env = Vec<(Name, Value)>;

/// A model: one value per declaration of the theory. A model may also be a
/// prefix (fewer values than declarations) while it is being built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteModel {
    theory: CheckedTheory,
    values: Vec<Value>,
    index: BTreeMap<Name, usize>,
}

/// What a leaf of a declaration's table must hold.
pub enum Leaf<'a> {
    Set,
    Elem(&'a [String]),
}

impl FiniteModel {
    pub fn new(theory: CheckedTheory, values: Vec<Value>) -> FiniteModel {
        let index = theory
            .decls()
            .iter()
            .enumerate()
            .map(|(i, d)| (d.name.clone(), i))
            .collect();
        FiniteModel { theory, values, index }
    }

    pub fn theory(&self) -> &CheckedTheory {
        &self.theory
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn value(&self, name: &Name) -> Option<&Value> {
        self.index.get(name).and_then(|&i| self.values.get(i))
    }

    pub fn index_of(&self, name: &Name) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn push(&mut self, v: Value) {
        self.values.push(v);
    }

    fn lookup<'s>(&'s self, n: &Name, env: &'s [(Name, Value)]) -> Result<&'s Value, ModelError> {
        if let Some((_, v)) = env.iter().rev().find(|(m, _)| m == n) {
            return Ok(v);
        }
        self.value(n)
            .ok_or_else(|| ModelError::Domain(format!("no value for {n}")))
    }

    /// Evaluates `t` with the binders in `env` (innermost last).
    pub fn eval(&self, t: &Tm, env: &[(Name, Value)]) -> Result<Value, ModelError> {
        self.ev(t, &mut env.to_vec())
    }

    fn ev(&self, t: &Tm, env: &mut Env) -> Result<Value, ModelError> {
        match t {
            Tm::Var(_) | Tm::App(..) => {
                let (head, args) = t.spine();
                let labels = args
                    .iter()
                    .map(|a| self.ev_label(a, env))
                    .collect::<Result<Vec<_>, _>>()?;
                match head {
                    Tm::Var(n) => Ok(self.lookup(n, env)?.apply(&labels)?.clone()),
                    other => Ok(self.ev(other, env)?.apply(&labels)?.clone()),
                }
            }
            Tm::Lam(x, d, b) => {
                let dom = self.ev_carrier(d, env)?;
                let mut table = BTreeMap::new();
                for l in dom {
                    env.push((x.clone(), Value::Elem(l.clone())));
                    let v = self.ev(b, env);
                    env.pop();
                    table.insert(l, v?);
                }
                Ok(Value::Fn(table))
            }
            Tm::Refl(_) => Ok(Value::Proof),
        }
    }

    fn ev_label(&self, t: &Tm, env: &mut Env) -> Result<String, ModelError> {
        match self.ev(t, env)? {
            Value::Elem(l) => Ok(l),
            other => Err(ModelError::Domain(format!("`{t}` evaluates to {other}, not an element"))),
        }
    }

    fn ev_carrier(&self, t: &Tm, env: &mut Env) -> Result<Vec<String>, ModelError> {
        match self.ev(t, env)? {
            Value::Set(c) => Ok(c),
            other => Err(ModelError::Domain(format!("`{t}` evaluates to {other}, not a carrier"))),
        }
    }

    /// The carrier of a small type under `env`.
    pub fn carrier(&self, t: &Tm, env: &[(Name, Value)]) -> Result<Vec<String>, ModelError> {
        self.ev_carrier(t, &mut env.to_vec())
    }

    /// All label tuples for a telescope of small binders, in lexicographic
    /// order of the carriers.
    pub fn tuples(&self, binders: &[(Name, Tm)]) -> Result<Vec<Vec<String>>, ModelError> {
        let mut out = Vec::new();
        self.tuples_in(binders, &mut Vec::new(), &mut Vec::new(), &mut out)?;
        Ok(out)
    }

    fn tuples_in(&self, binders: &[(Name, Tm)], env: &mut Env, acc: &mut Vec<String>, out: &mut Vec<Vec<String>>) -> Result<(), ModelError> {
        let Some(((x, d), rest)) = binders.split_first() else {
            out.push(acc.clone());
            return Ok(());
        };
        for l in self.ev_carrier(d, env)? {
            env.push((x.clone(), Value::Elem(l.clone())));
            acc.push(l);
            let r = self.tuples_in(rest, env, acc, out);
            acc.pop();
            env.pop();
            r?;
        }
        Ok(())
    }

    /// Builds a value of type `ty` over the current prefix by filling its
    /// leaves with `leaf`, which receives the binder assignment. Equation
    /// leaves are always `Proof`. Returns `None` if `leaf` does.
    pub fn build_value<F>(&self, ty: &Ty, leaf: &mut F) -> Result<Option<Value>, ModelError>
    where
        F: FnMut(Leaf<'_>, &[(Name, String)]) -> Option<Value>,
    {
        self.build_in(ty, &mut Vec::new(), leaf)
    }

    fn build_in<F>(&self, ty: &Ty, env: &mut Env, leaf: &mut F) -> Result<Option<Value>, ModelError>
    where
        F: FnMut(Leaf<'_>, &[(Name, String)]) -> Option<Value>,
    {
        let labels = |env: &Env| -> Vec<(Name, String)> {
            env.iter()
                .map(|(n, v)| (n.clone(), match v {
                    Value::Elem(l) => l.clone(),
                    other => other.to_string(),
                }))
                .collect()
        };
        match ty {
            Ty::Set => Ok(leaf(Leaf::Set, &labels(env))),
            Ty::Small(t) => {
                let c = self.ev_carrier(t, env)?;
                Ok(leaf(Leaf::Elem(&c), &labels(env)))
            }
            Ty::Eq(..) => Ok(Some(Value::Proof)),
            Ty::Pi(x, d, b) => {
                let mut table = BTreeMap::new();
                for l in self.ev_carrier(d, env)? {
                    env.push((x.clone(), Value::Elem(l.clone())));
                    let v = self.build_in(b, env, leaf);
                    env.pop();
                    match v? {
                        Some(v) => {
                            table.insert(l, v);
                        }
                        None => return Ok(None),
                    }
                }
                Ok(Some(Value::Fn(table)))
            }
        }
    }

    /// The sort and index labels naming the carrier of a small type.
    pub fn address(&self, t: &Tm, env: &[(Name, Value)]) -> Result<Addr, ModelError> {
        let t = nf(t);
        let (head, args) = t.spine();
        let sort = match head {
            Tm::Var(n) if !env.iter().any(|(m, _)| m == n) => self
                .index_of(n)
                .filter(|&i| self.theory.class(i) == DeclClass::Sort),
            _ => None,
        }
        .ok_or_else(|| ModelError::Domain(format!("`{t}` is not a sort application")))?;
        let mut env = env.to_vec();
        let labels = args
            .iter()
            .map(|a| self.ev_label(a, &mut env))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((sort, labels))
    }

    /// Carrier at an address.
    pub fn carrier_at(&self, addr: &Addr) -> Result<&[String], ModelError> {
        match self.values[addr.0].apply(&addr.1)? {
            Value::Set(c) => Ok(c),
            other => Err(ModelError::Domain(format!("{other} is not a carrier"))),
        }
    }

    /// Every (sort, index) address of the model, in declaration then
    /// lexicographic index order.
    pub fn addresses(&self) -> Result<Vec<Addr>, ModelError> {
        let mut out = Vec::new();
        for (i, d) in self.theory.decls().iter().enumerate() {
            if self.theory.class(i) == DeclClass::Sort {
                let (binders, _) = d.ty.peel();
                for idx in self.tuples(&binders)? {
                    out.push((i, idx));
                }
            }
        }
        Ok(out)
    }
}

/// A sort declaration index and the labels of its indices.
pub type Addr = (usize, Vec<String>);

fn check_labels(decl: &Name, labels: &[String]) -> Result<(), ModelError> {
    for (i, l) in labels.iter().enumerate() {
        if !is_valid_label(l) {
            return Err(ModelError::Shape {
                decl: decl.clone(),
                msg: format!("invalid label {l:?}: labels are nonempty, with balanced parentheses and no top-level commas"),
            });
        }
        if i > 0 && labels[i - 1] >= *l {
            return Err(ModelError::Shape {
                decl: decl.clone(),
                msg: "carrier labels must be sorted and distinct".to_string(),
            });
        }
    }
    Ok(())
}

fn check_value(m: &FiniteModel, decl: &Name, ty: &Ty, v: &Value, env: &mut Env) -> Result<(), ModelError> {
    let shape = |msg: String| ModelError::Shape { decl: decl.clone(), msg };
    match (ty, v) {
        (Ty::Set, Value::Set(c)) => check_labels(decl, c),
        (Ty::Small(t), Value::Elem(l)) => {
            let c = m.ev_carrier(t, env)?;
            if c.binary_search(l).is_ok() {
                Ok(())
            } else {
                Err(shape(format!("{l} is not an element of {}", Value::Set(c))))
            }
        }
        (Ty::Pi(x, d, b), Value::Fn(table)) => {
            let c = m.ev_carrier(d, env)?;
            if let Some(missing) = c.iter().find(|l| !table.contains_key(*l)) {
                return Err(ModelError::Totality {
                    decl: decl.clone(),
                    msg: format!("no entry for argument {missing}"),
                });
            }
            if let Some(extra) = table.keys().find(|k| c.binary_search(k).is_err()) {
                return Err(shape(format!("entry for {extra}, which is not in {}", Value::Set(c))));
            }
            for (l, w) in table {
                env.push((x.clone(), Value::Elem(l.clone())));
                let r = check_value(m, decl, b, w, env);
                env.pop();
                r?;
            }
            Ok(())
        }
        (Ty::Eq(l, r, _), Value::Proof) => {
            if m.ev(l, env)? == m.ev(r, env)? {
                Ok(())
            } else {
                Err(ModelError::Equation {
                    decl: decl.clone(),
                    counterexample: env
                        .iter()
                        .map(|(n, v)| (n.clone(), v.to_string()))
                        .collect(),
                })
            }
        }
        (ty, v) => Err(shape(format!("value {v} does not fit type {ty}"))),
    }
}

/// Checks shapes, totality and every equation pointwise.
pub fn check_model(m: &FiniteModel) -> Result<(), ModelError> {
    let decls = m.theory.decls();
    if m.values.len() != decls.len() {
        return Err(ModelError::Shape {
            decl: decls
                .get(m.values.len())
                .map(|d| d.name.clone())
                .unwrap_or_else(|| Name::from("model")),
            msg: format!("{} values for {} declarations", m.values.len(), decls.len()),
        });
    }
    for (d, v) in decls.iter().zip(&m.values) {
        check_value(m, &d.name, &d.ty, v, &mut Vec::new())?;
    }
    Ok(())
}

/// The image of a model under a substitution: evaluates every assignment.
/// `target` is the checked target theory of `s`.
pub fn apply_subst_model(s: &Substitution, target: &CheckedTheory, m: &FiniteModel) -> Result<FiniteModel, ModelError> {
    if !s.source.alpha_eq(m.theory.theory()) {
        return Err(ModelError::Domain("model is not over the source of the substitution".into()));
    }
    let values = s
        .assignments
        .iter()
        .map(|t| m.eval(t, &[]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FiniteModel::new(target.clone(), values))
}

/// Per-declaration data, with binders peeled and types normalised.
#[derive(Clone, Debug)]
struct DeclPlan {
    binders: Vec<(Name, Tm)>,
    cod: Ty,
}

fn plan(th: &CheckedTheory) -> Vec<DeclPlan> {
    th.decls()
        .iter()
        .map(|d| {
            let (binders, cod) = d.ty.peel();
            let binders = binders.into_iter().map(|(x, a)| (x, nf(&a))).collect();
            let cod = match cod {
                Ty::Small(t) => Ty::Small(nf(t)),
                other => other.clone(),
            };
            DeclPlan { binders, cod }
        })
        .collect()
}

pub type Components = BTreeMap<Addr, BTreeMap<String, String>>;

/// A family of functions, one per sort and source index tuple, between the
/// carriers of two models of the same theory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelMorphism {
    source: Arc<FiniteModel>,
    target: Arc<FiniteModel>,
    components: Components,
}

fn env_of(binders: &[(Name, Tm)], labels: &[String]) -> Env {
    binders
        .iter()
        .zip(labels)
        .map(|((x, _), l)| (x.clone(), Value::Elem(l.clone())))
        .collect()
}

fn map_elem<'c>(comps: &'c Components, addr: &Addr, l: &str) -> Option<&'c String> {
    comps.get(addr)?.get(l)
}

/// Translates index labels of `sort` along the components.
fn map_indices(src: &FiniteModel, plans: &[DeclPlan], comps: &Components, sort: usize, idx: &[String]) -> Result<Option<Vec<String>>, ModelError> {
    let binders = &plans[sort].binders;
    let mut out = Vec::with_capacity(idx.len());
    for j in 0..idx.len() {
        let env = env_of(&binders[..j], &idx[..j]);
        let addr = src.address(&binders[j].1, &env)?;
        match map_elem(comps, &addr, &idx[j]) {
            Some(l) => out.push(l.clone()),
            None => return Ok(None),
        }
    }
    Ok(Some(out))
}

/// One instance of a homomorphism condition, precomputed on the source.
#[derive(Clone, Debug)]
enum Obligation {
    /// `h(op(args)) = op'(h(args))`.
    Op {
        decl: usize,
        args: Vec<(Addr, String)>,
        result: (Addr, String),
    },
    /// The components at two equal sorts agree.
    SortEq { decl: usize, left: Addr, right: Addr, tuple: Vec<String> },
}

impl Obligation {
    fn decl(&self) -> usize {
        match self {
            Obligation::Op { decl, .. } | Obligation::SortEq { decl, .. } => *decl,
        }
    }

    fn holds(&self, src: &FiniteModel, tgt: &FiniteModel, comps: &Components) -> Result<bool, ModelError> {
        match self {
            Obligation::Op { decl, args, result } => {
                let mut mapped = Vec::with_capacity(args.len());
                for (addr, l) in args {
                    match map_elem(comps, addr, l) {
                        Some(m) => mapped.push(m.clone()),
                        None => return Ok(false),
                    }
                }
                let lhs = map_elem(comps, &result.0, &result.1);
                let rhs = match tgt.values[*decl].apply(&mapped) {
                    Ok(Value::Elem(e)) => Some(e),
                    _ => None,
                };
                Ok(lhs.is_some() && lhs == rhs)
            }
            Obligation::SortEq { left, right, .. } => {
                if left == right {
                    return Ok(true);
                }
                for x in src.carrier_at(left)? {
                    if map_elem(comps, left, x) != map_elem(comps, right, x) {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }

    fn counterexample(&self) -> Vec<String> {
        match self {
            Obligation::Op { args, .. } => args.iter().map(|(_, l)| l.clone()).collect(),
            Obligation::SortEq { tuple, .. } => tuple.clone(),
        }
    }
}

fn obligations(src: &FiniteModel, plans: &[DeclPlan]) -> Result<Vec<Obligation>, ModelError> {
    let th = src.theory();
    let mut out = Vec::new();
    for (i, p) in plans.iter().enumerate() {
        match th.class(i) {
            DeclClass::Operation => {
                let Ty::Small(cod) = &p.cod else { continue };
                for tuple in src.tuples(&p.binders)? {
                    let env = env_of(&p.binders, &tuple);
                    let mut args = Vec::with_capacity(tuple.len());
                    for j in 0..tuple.len() {
                        args.push((src.address(&p.binders[j].1, &env[..j])?, tuple[j].clone()));
                    }
                    let Value::Elem(r) = src.values[i].apply(&tuple)? else {
                        return Err(ModelError::Domain(format!("operation {} is not element-valued", th.decls()[i].name)));
                    };
                    let result = (src.address(cod, &env)?, r.clone());
                    out.push(Obligation::Op { decl: i, args, result });
                }
            }
            DeclClass::SortEquation => {
                let Ty::Eq(l, r, at) = &p.cod else { continue };
                let (extra, _) = at.peel();
                let mut binders = p.binders.clone();
                binders.extend(extra.iter().map(|(x, a)| (x.clone(), nf(a))));
                let args: Vec<Tm> = extra.iter().map(|(x, _)| Tm::Var(x.clone())).collect();
                let l = Tm::apps(l.clone(), args.clone());
                let r = Tm::apps(r.clone(), args);
                for tuple in src.tuples(&binders)? {
                    let env = env_of(&binders, &tuple);
                    out.push(Obligation::SortEq {
                        decl: i,
                        left: src.address(&l, &env)?,
                        right: src.address(&r, &env)?,
                        tuple,
                    });
                }
            }
            _ => {}
        }
    }
    Ok(out)
}

impl ModelMorphism {
    /// Wraps components without checking them; see [`check_morphism`].
    pub fn new(source: Arc<FiniteModel>, target: Arc<FiniteModel>, components: Components) -> ModelMorphism {
        ModelMorphism {
            source,
            target,
            components,
        }
    }

    pub fn source(&self) -> &FiniteModel {
        &self.source
    }

    pub fn target(&self) -> &FiniteModel {
        &self.target
    }

    pub fn components(&self) -> &Components {
        &self.components
    }

    /// Image of an element of the source carrier at `addr`.
    pub fn map(&self, addr: &Addr, label: &str) -> Option<&str> {
        map_elem(&self.components, addr, label).map(String::as_str)
    }

    /// The target address that the source address `addr` is sent to.
    pub fn map_address(&self, addr: &Addr) -> Result<Option<Addr>, ModelError> {
        let plans = plan(self.source.theory());
        Ok(map_indices(&self.source, &plans, &self.components, addr.0, &addr.1)?.map(|idx| (addr.0, idx)))
    }

    /// Maps a value of a small type: elements are mapped by the component
    /// at the type's address.
    pub fn map_value(&self, ty: &Tm, env: &[(Name, Value)], v: &Value) -> Result<Option<Value>, ModelError> {
        let addr = self.source.address(ty, env)?;
        match v {
            Value::Elem(l) => Ok(self.map(&addr, l).map(Value::elem)),
            _ => Ok(None),
        }
    }
}

pub fn identity_morphism(m: &FiniteModel) -> Result<ModelMorphism, ModelError> {
    let m = Arc::new(m.clone());
    let mut comps = Components::new();
    for addr in m.addresses()? {
        let c = m.carrier_at(&addr)?;
        comps.insert(addr, c.iter().map(|l| (l.clone(), l.clone())).collect());
    }
    Ok(ModelMorphism::new(m.clone(), m, comps))
}

/// `g ∘ f`.
pub fn compose_morphisms(g: &ModelMorphism, f: &ModelMorphism) -> Result<ModelMorphism, ModelError> {
    if *f.target != *g.source {
        return Err(ModelError::Domain("morphisms are not composable".into()));
    }
    let plans = plan(f.source.theory());
    let mut comps = Components::new();
    for (addr, table) in &f.components {
        let Some(idx) = map_indices(&f.source, &plans, &f.components, addr.0, &addr.1)? else {
            return Err(ModelError::Domain("first morphism is not total".into()));
        };
        let mid = (addr.0, idx);
        let mut out = BTreeMap::new();
        for (x, y) in table {
            let z = map_elem(&g.components, &mid, y)
                .ok_or_else(|| ModelError::Domain("second morphism is not total".into()))?;
            out.insert(x.clone(), z.clone());
        }
        comps.insert(addr.clone(), out);
    }
    Ok(ModelMorphism::new(f.source.clone(), g.target.clone(), comps))
}

/// Checks that the components are total functions into the right target
/// carriers, commute with every operation, and agree across sort
/// equations.
pub fn check_morphism(h: &ModelMorphism) -> Result<(), ModelError> {
    let (src, tgt) = (&*h.source, &*h.target);
    if src.theory() != tgt.theory() {
        return Err(ModelError::Domain("source and target are models of different theories".into()));
    }
    let th = src.theory();
    let plans = plan(th);
    let addrs = src.addresses()?;
    let known: BTreeSet<&Addr> = addrs.iter().collect();
    if let Some((addr, _)) = h.components.iter().find(|(a, _)| !known.contains(a)) {
        return Err(ModelError::Hom {
            decl: th.decls()[addr.0].name.clone(),
            tuple: addr.1.clone(),
        });
    }
    for addr in &addrs {
        let name = &th.decls()[addr.0].name;
        let bad = |extra: Option<&String>| {
            let mut tuple = addr.1.clone();
            tuple.extend(extra.cloned());
            ModelError::Hom { decl: name.clone(), tuple }
        };
        let table = h.components.get(addr).ok_or_else(|| bad(None))?;
        let carrier = src.carrier_at(addr)?;
        if table.len() != carrier.len() {
            return Err(bad(None));
        }
        let idx = map_indices(src, &plans, &h.components, addr.0, &addr.1)?.ok_or_else(|| bad(None))?;
        let tcarrier = tgt.carrier_at(&(addr.0, idx))?;
        for x in carrier {
            match table.get(x) {
                Some(y) if tcarrier.binary_search(y).is_ok() => {}
                _ => return Err(bad(Some(x))),
            }
        }
    }
    for ob in obligations(src, &plans)? {
        if !ob.holds(src, tgt, &h.components)? {
            return Err(ModelError::Hom {
                decl: th.decls()[ob.decl()].name.clone(),
                tuple: ob.counterexample(),
            });
        }
    }
    Ok(())
}

pub const DEFAULT_SEARCH_CAP: u128 = 10_000_000;

struct Slot {
    addr: Addr,
    carrier: Vec<String>,
}

struct Search<'a> {
    src: &'a FiniteModel,
    tgt: &'a FiniteModel,
    plans: Vec<DeclPlan>,
    slots: Vec<Slot>,
    /// Obligations that become decidable once the first `k` slots are set.
    ready: Vec<Vec<Obligation>>,
    out: Vec<Components>,
}

impl Search<'_> {
    fn run(&mut self, pos: usize, comps: &mut Components) -> Result<(), ModelError> {
        for ob in &self.ready[pos] {
            if !ob.holds(self.src, self.tgt, comps)? {
                return Ok(());
            }
        }
        if pos == self.slots.len() {
            self.out.push(comps.clone());
            return Ok(());
        }
        let addr = self.slots[pos].addr.clone();
        let Some(idx) = map_indices(self.src, &self.plans, comps, addr.0, &addr.1)? else {
            return Ok(());
        };
        let tcarrier = self.tgt.carrier_at(&(addr.0, idx))?.to_vec();
        let n = self.slots[pos].carrier.len();
        let mut choice = vec![0usize; n];
        if n > 0 && tcarrier.is_empty() {
            return Ok(());
        }
        loop {
            let table: BTreeMap<String, String> = self.slots[pos]
                .carrier
                .iter()
                .zip(&choice)
                .map(|(x, &c)| (x.clone(), tcarrier[c].clone()))
                .collect();
            comps.insert(addr.clone(), table);
            self.run(pos + 1, comps)?;
            comps.remove(&addr);
            // odometer, last element fastest
            let mut k = n;
            loop {
                if k == 0 {
                    return Ok(());
                }
                k -= 1;
                choice[k] += 1;
                if choice[k] < tcarrier.len() {
                    break;
                }
                choice[k] = 0;
            }
        }
    }
}

fn sorts_in(t: &Tm, th: &CheckedTheory, out: &mut BTreeSet<usize>) {
    for n in t.free_vars() {
        if let Some(i) = th.theory().index_of(&n) {
            if th.class(i) == DeclClass::Sort {
                out.insert(i);
            }
        }
    }
}

/// Upper bound on the number of candidate component families.
pub fn candidate_count(src: &FiniteModel, tgt: &FiniteModel) -> Result<u128, ModelError> {
    let mut widest: BTreeMap<usize, u128> = BTreeMap::new();
    for addr in tgt.addresses()? {
        let w = widest.entry(addr.0).or_insert(0);
        *w = (*w).max(tgt.carrier_at(&addr)?.len() as u128);
    }
    let mut total: u128 = 1;
    for addr in src.addresses()? {
        let n = src.carrier_at(&addr)?.len() as u32;
        let w = widest.get(&addr.0).copied().unwrap_or(0);
        total = total.saturating_mul(w.checked_pow(n).unwrap_or(u128::MAX));
    }
    Ok(total)
}

/// All morphisms `src → tgt`, in lexicographic order of their component
/// tables (sorts in declaration order, indices and elements in label order).
pub fn enumerate_morphisms(src: &FiniteModel, tgt: &FiniteModel, cap: u128) -> Result<Vec<ModelMorphism>, ModelError> {
    if src.theory() != tgt.theory() {
        return Err(ModelError::Domain("models of different theories".into()));
    }
    let candidates = candidate_count(src, tgt)?;
    if candidates > cap {
        return Err(ModelError::SearchSpaceExceeded { candidates, cap });
    }
    let th = src.theory();
    let plans = plan(th);
    let slots: Vec<Slot> = src
        .addresses()?
        .into_iter()
        .map(|addr| {
            let carrier = src.carrier_at(&addr).map(<[String]>::to_vec);
            carrier.map(|carrier| Slot { addr, carrier })
        })
        .collect::<Result<_, _>>()?;
    // an obligation is decidable once every slot of every sort it mentions
    // (and, through index types, every earlier sort) is filled
    let mut ready = vec![Vec::new(); slots.len() + 1];
    for ob in obligations(src, &plans)? {
        let p = &plans[ob.decl()];
        let mut mentioned = BTreeSet::new();
        for (_, d) in &p.binders {
            sorts_in(d, th, &mut mentioned);
        }
        match &p.cod {
            Ty::Small(t) => sorts_in(t, th, &mut mentioned),
            Ty::Eq(l, r, _) => {
                sorts_in(l, th, &mut mentioned);
                sorts_in(r, th, &mut mentioned);
            }
            _ => {}
        }
        let last = mentioned.iter().max().copied();
        let pos = match last {
            Some(s) => slots.iter().rposition(|sl| sl.addr.0 <= s).map_or(0, |i| i + 1),
            None => 0,
        };
        ready[pos].push(ob);
    }
    let mut search = Search {
        src,
        tgt,
        plans,
        slots,
        ready,
        out: Vec::new(),
    };
    search.run(0, &mut Components::new())?;
    let (s, t) = (Arc::new(src.clone()), Arc::new(tgt.clone()));
    Ok(search
        .out
        .into_iter()
        .map(|c| ModelMorphism::new(s.clone(), t.clone(), c))
        .collect())
}

/// The image of a morphism `h : m → m'` under a substitution `s`, as a
/// morphism between `s` applied to `m` and to `m'`.
pub fn apply_subst_morphism(s: &Substitution, target: &CheckedTheory, h: &ModelMorphism) -> Result<ModelMorphism, ModelError> {
    let src = apply_subst_model(s, target, &h.source)?;
    let tgt = apply_subst_model(s, target, &h.target)?;
    let mut comps = Components::new();
    for addr in src.addresses()? {
        let (binders, _) = target.decls()[addr.0].ty.peel();
        let vars: Vec<Name> = (0..binders.len()).map(|k| Name::internal(&format!("#a{k}"))).collect();
        let term = Tm::apps(s.assignments[addr.0].clone(), vars.iter().map(|v| Tm::Var(v.clone())));
        let env: Env = vars
            .iter()
            .zip(&addr.1)
            .map(|(v, l)| (v.clone(), Value::Elem(l.clone())))
            .collect();
        let inner = h.source.address(&term, &env)?;
        let table = h
            .components
            .get(&inner)
            .ok_or_else(|| ModelError::Domain("morphism has no component at an image sort".into()))?;
        comps.insert(addr, table.clone());
    }
    Ok(ModelMorphism::new(Arc::new(src), Arc::new(tgt), comps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{check_theory, ConvBudget};
    use crate::parse::{parse_term, parse_theory};

    pub(crate) const TG: &str = "V : Set; E : (x : V) (y : V) Set;
        T : (v1 : V) (v2 : V) (v3 : V) (e1 : E v1 v2) (e2 : E v2 v3) E v1 v3;";
    const MONOID: &str = "M : Set; e : M; mul : (x : M) (y : M) M;
        unit_l : (x : M) mul e x = x : M;
        unit_r : (x : M) mul x e = x : M;
        assoc : (x : M) (y : M) (z : M) mul (mul x y) z = mul x (mul y z) : M;";

    fn checked(src: &str) -> CheckedTheory {
        check_theory(&parse_theory(src).unwrap(), ConvBudget::default()).unwrap()
    }

    fn table<const N: usize>(entries: [(&str, Value); N]) -> Value {
        Value::Fn(entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    fn complete(th: &CheckedTheory, partial: Vec<Value>) -> FiniteModel {
        // fill trailing equation declarations with proofs
        let mut m = FiniteModel::new(th.clone(), partial);
        while m.values().len() < th.decls().len() {
            let ty = th.decls()[m.values().len()].ty.clone();
            let v = m.build_value(&ty, &mut |_, _| None).unwrap().unwrap();
            m.push(v);
        }
        m
    }

    /// Transitive graph with vertices {a, b} and one edge a → b.
    fn g2() -> FiniteModel {
        let th = checked(TG);
        let e = |k: &str| Value::set(if k == "ab" { vec!["f"] } else { vec![] });
        let edges = table([
            ("a", table([("a", e("aa")), ("b", e("ab"))])),
            ("b", table([("a", e("ba")), ("b", e("bb"))])),
        ]);
        // there are no composable pairs, so T is a table with no leaves
        let m0 = FiniteModel::new(th.clone(), vec![Value::set(["a", "b"]), edges]);
        let t = m0.build_value(&th.decls()[2].ty, &mut |_, _| None).unwrap().unwrap();
        let mut m = m0;
        m.push(t);
        m
    }

    fn loop_graph() -> FiniteModel {
        let th = checked(TG);
        let edges = table([("s", table([("s", Value::set(["l"]))]))]);
        let comp = table([(
            "s",
            table([("s", table([("s", table([("l", table([("l", Value::elem("l"))]))]))]))]),
        )]);
        FiniteModel::new(th, vec![Value::set(["s"]), edges, comp])
    }

    fn z2(corrupt: bool) -> FiniteModel {
        let th = checked(MONOID);
        let row = |a: &str, b: &str| table([("0", Value::elem(a)), ("1", Value::elem(b))]);
        let mul = if corrupt {
            table([("0", row("1", "1")), ("1", row("1", "0"))])
        } else {
            table([("0", row("0", "1")), ("1", row("1", "0"))])
        };
        complete(&th, vec![Value::set(["0", "1"]), Value::elem("0"), mul])
    }

    #[test]
    fn graph_models_check() {
        check_model(&g2()).unwrap();
        check_model(&loop_graph()).unwrap();
    }

    #[test]
    fn z2_and_corrupted_unit() {
        check_model(&z2(false)).unwrap();
        match check_model(&z2(true)) {
            Err(ModelError::Equation { decl, counterexample }) => {
                assert_eq!(decl.as_str(), "unit_l");
                assert_eq!(counterexample, vec![(Name::from("x"), "0".to_string())]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn monoid_laws_by_brute_force() {
        // independent oracle: all 2^3 triples by hand-rolled arithmetic
        let m = z2(false);
        let mul = |a: u8, b: u8| (a + b) % 2;
        for x in 0..2u8 {
            for y in 0..2u8 {
                let env = vec![
                    (Name::from("x"), Value::elem(x.to_string())),
                    (Name::from("y"), Value::elem(y.to_string())),
                ];
                let v = m.eval(&parse_term("mul x y").unwrap(), &env).unwrap();
                assert_eq!(v, Value::elem(mul(x, y).to_string()));
            }
        }
    }

    #[test]
    fn evaluation_basics() {
        let m = g2();
        assert_eq!(m.eval(&Tm::var("V"), &[]).unwrap(), Value::set(["a", "b"]));
        assert_eq!(
            m.eval(&parse_term("(\\x : V. x) a").unwrap(), &[(Name::from("a"), Value::elem("b"))]).unwrap(),
            Value::elem("b")
        );
        let lp = loop_graph();
        let env: Env = ["v1", "v2", "v3"]
            .iter()
            .map(|v| (Name::from(*v), Value::elem("s")))
            .chain(["e1", "e2"].iter().map(|e| (Name::from(*e), Value::elem("l"))))
            .collect();
        assert_eq!(lp.eval(&parse_term("T v1 v2 v3 e1 e2").unwrap(), &env).unwrap(), Value::elem("l"));
        assert!(matches!(
            lp.eval(&parse_term("T v1 v2 v3 e1 q").unwrap(), &[(Name::from("q"), Value::elem("zz"))]),
            Err(ModelError::Domain(_))
        ));
    }

    #[test]
    fn collapsing_graph_morphism() {
        let (g, l) = (Arc::new(g2()), Arc::new(loop_graph()));
        let mut comps = Components::new();
        comps.insert((0, vec![]), [("a", "s"), ("b", "s")].iter().map(|(x, y)| (x.to_string(), y.to_string())).collect());
        for (x, y) in [("a", "a"), ("a", "b"), ("b", "a"), ("b", "b")] {
            let t: BTreeMap<String, String> = if (x, y) == ("a", "b") {
                [("f".to_string(), "l".to_string())].into()
            } else {
                BTreeMap::new()
            };
            comps.insert((1, vec![x.into(), y.into()]), t);
        }
        let h = ModelMorphism::new(g.clone(), l.clone(), comps.clone());
        check_morphism(&h).unwrap();
        comps.insert((1, vec!["a".into(), "b".into()]), BTreeMap::new());
        let bad = ModelMorphism::new(g, l, comps);
        assert!(matches!(check_morphism(&bad), Err(ModelError::Hom { .. })));
    }

    /// Naive oracle for transitive graph homomorphisms: every vertex map,
    /// then every edge map per vertex pair, checked for composition.
    fn naive_graph_homs(g: &FiniteModel, h: &FiniteModel) -> usize {
        let gv = g.carrier_at(&(0, vec![])).unwrap().to_vec();
        let hv = h.carrier_at(&(0, vec![])).unwrap().to_vec();
        let mut count = 0;
        let n = gv.len();
        let total = hv.len().pow(n as u32);
        for code in 0..total {
            let mut vmap = BTreeMap::new();
            let mut c = code;
            for x in gv.iter().rev() {
                vmap.insert(x.clone(), hv[c % hv.len()].clone());
                c /= hv.len();
            }
            // edges: all (x, y, e) with targets
            let mut edges = Vec::new();
            for x in &gv {
                for y in &gv {
                    for e in g.carrier_at(&(1, vec![x.clone(), y.clone()])).unwrap() {
                        let tgt = h.carrier_at(&(1, vec![vmap[x].clone(), vmap[y].clone()])).unwrap().to_vec();
                        edges.push(((x.clone(), y.clone(), e.clone()), tgt));
                    }
                }
            }
            let mut idx = vec![0usize; edges.len()];
            if edges.iter().any(|(_, t)| t.is_empty()) {
                continue;
            }
            'outer: loop {
                let emap: BTreeMap<_, _> = edges.iter().zip(&idx).map(|((k, t), &i)| (k.clone(), t[i].clone())).collect();
                let mut ok = true;
                for ((x, y, e1), _) in &edges {
                    for ((y2, z, e2), _) in &edges {
                        if y2 != y {
                            continue;
                        }
                        let args: Vec<String> = vec![x.clone(), y.clone(), z.clone(), e1.clone(), e2.clone()];
                        let Value::Elem(c) = g.values()[2].apply(&args).unwrap() else { panic!() };
                        let lhs = &emap[&(x.clone(), z.clone(), c.clone())];
                        let margs = vec![
                            vmap[x].clone(),
                            vmap[y].clone(),
                            vmap[z].clone(),
                            emap[&(x.clone(), y.clone(), e1.clone())].clone(),
                            emap[&(y.clone(), z.clone(), e2.clone())].clone(),
                        ];
                        let Value::Elem(r) = h.values()[2].apply(&margs).unwrap() else { panic!() };
                        ok &= lhs == r;
                    }
                }
                if ok {
                    count += 1;
                }
                let mut k = idx.len();
                loop {
                    if k == 0 {
                        break 'outer;
                    }
                    k -= 1;
                    idx[k] += 1;
                    if idx[k] < edges[k].1.len() {
                        break;
                    }
                    idx[k] = 0;
                }
            }
        }
        count
    }

    #[test]
    fn hom_counts_match_naive_oracle() {
        let models = [g2(), loop_graph()];
        for a in &models {
            for b in &models {
                let homs = enumerate_morphisms(a, b, DEFAULT_SEARCH_CAP).unwrap();
                assert_eq!(homs.len(), naive_graph_homs(a, b));
                for h in &homs {
                    check_morphism(h).unwrap();
                }
            }
            let homs = enumerate_morphisms(a, a, DEFAULT_SEARCH_CAP).unwrap();
            assert!(homs.contains(&identity_morphism(a).unwrap()));
        }
    }

    #[test]
    fn search_cap_is_enforced() {
        let m = z2(false);
        assert!(matches!(
            enumerate_morphisms(&m, &m, 1),
            Err(ModelError::SearchSpaceExceeded { candidates: 4, cap: 1 })
        ));
        // Z2 → Z2 monoid homs: identity and the constant-0 map
        assert_eq!(enumerate_morphisms(&m, &m, 100).unwrap().len(), 2);
    }

    #[test]
    fn substitution_image_of_models() {
        let b = ConvBudget::default();
        let m = g2();
        let id = Substitution::identity(m.theory().theory());
        assert_eq!(apply_subst_model(&id, m.theory(), &m).unwrap(), m);
        let op = Substitution {
            source: m.theory().theory().clone(),
            target: m.theory().theory().clone(),
            assignments: vec![
                parse_term("V").unwrap(),
                parse_term("\\x : V. \\y : V. E y x").unwrap(),
                parse_term("\\v1 : V. \\v2 : V. \\v3 : V. \\e1 : E v2 v1. \\e2 : E v3 v2. T v3 v2 v1 e2 e1").unwrap(),
            ],
        };
        crate::kernel::check_substitution(&op, b).unwrap();
        let opm = apply_subst_model(&op, m.theory(), &m).unwrap();
        check_model(&opm).unwrap();
        assert_eq!(opm.carrier_at(&(1, vec!["b".into(), "a".into()])).unwrap(), ["f"]);
        let back = apply_subst_model(&op, m.theory(), &opm).unwrap();
        assert_eq!(back, m);
        // and on morphisms: the identity goes to the identity
        let idh = identity_morphism(&m).unwrap();
        let img = apply_subst_morphism(&op, m.theory(), &idh).unwrap();
        assert_eq!(img, identity_morphism(&opm).unwrap());
    }

    #[test]
    fn composition_of_morphisms() {
        let (g, l) = (g2(), loop_graph());
        let f = enumerate_morphisms(&g, &l, DEFAULT_SEARCH_CAP).unwrap();
        let k = enumerate_morphisms(&l, &l, DEFAULT_SEARCH_CAP).unwrap();
        for a in &f {
            for b in &k {
                let c = compose_morphisms(b, a).unwrap();
                assert!(f.contains(&c));
            }
            assert_eq!(&compose_morphisms(&identity_morphism(&l).unwrap(), a).unwrap(), a);
        }
    }

    #[test]
    fn labels_are_validated() {
        let th = checked("A : Set;");
        let m = FiniteModel::new(th.clone(), vec![Value::Set(vec!["a,b".into()])]);
        assert!(matches!(check_model(&m), Err(ModelError::Shape { .. })));
        for bad in ["", "a)", "(a", "x,y"] {
            assert!(!is_valid_label(bad), "{bad}");
        }
        for good in ["a", "mul e e", "E(a,b)", "V()", "El(E(a,b))"] {
            assert!(is_valid_label(good), "{good}");
        }
        assert_eq!(split_key("a,E(b,c),d"), ["a", "E(b,c)", "d"]);
        assert_eq!(split_key(""), Vec::<String>::new());
        let m = FiniteModel::new(th, vec![Value::Set(vec!["b".into(), "a".into()])]);
        assert!(matches!(check_model(&m), Err(ModelError::Shape { .. })));
    }
}
