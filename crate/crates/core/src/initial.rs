//! Bounded construction of the initial (term) model of a theory and of the
//! unique morphism out of it.
//!
//! Closed terms of small types are enumerated by size into one e-graph that
//! carries the theory's equations, so identifications made through sort
//! equations are shared across all types. Each class is named by the Polish
//! print of its smallest member.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::egraph::{EGraph, Id, Rule};
use crate::error::{KernelError, ModelError};
use crate::kernel::{equation_rules, peel_fresh, CheckedTheory, ConvBudget, DeclClass};
use crate::models::{check_model, check_morphism, Components, FiniteModel, Leaf, ModelMorphism, Value};
use crate::syntax::{polish, Name, Tm};

/// Largest accepted term size.
pub const MAX_DEPTH: usize = 32;
/// Largest number of enumerated terms.
pub const MAX_TERMS: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TermClass {
    pub representative: Tm,
    pub label: String,
    /// Every enumerated member, smallest first.
    pub members: Vec<Tm>,
}

#[derive(Clone, Debug)]
pub struct InitialModelResult {
    /// The term model. When the result is not saturated this may be a
    /// prefix, stopping at the first operation whose table is not closed.
    pub model: FiniteModel,
    pub classes: Vec<TermClass>,
    pub depth_used: usize,
    pub saturated: bool,
    pub indeterminate_pairs: Vec<(Tm, Tm)>,
}

impl InitialModelResult {
    pub fn class_of_label(&self, label: &str) -> Option<&TermClass> {
        self.classes.iter().find(|c| c.label == label)
    }

    /// Number of classes in each carrier, keyed by sort tag.
    pub fn class_counts(&self) -> Result<BTreeMap<String, usize>, ModelError> {
        let decls = self.model.theory().decls();
        let mut out = BTreeMap::new();
        if self.model.values().len() < decls.len() {
            return Ok(out);
        }
        for addr in self.model.addresses()? {
            out.insert(crate::models::tag(&decls[addr.0].name, &addr.1), self.model.carrier_at(&addr)?.len());
        }
        Ok(out)
    }
}

fn term_order(a: &Tm, b: &Tm) -> core::cmp::Ordering {
    a.size().cmp(&b.size()).then_with(|| polish(a).cmp(&polish(b)))
}

struct Op {
    head: Name,
    binders: Vec<(Name, Tm)>,
}

struct Enumerator<'g> {
    g: EGraph<'g>,
    rules: Vec<Rule>,
    ops: Vec<Op>,
    terms: Vec<(Tm, usize, Id)>,
    fuel: usize,
}

impl<'g> Enumerator<'g> {
    fn new(omega: &'g CheckedTheory, budget: ConvBudget) -> Self {
        let decls = omega.decls();
        let names = omega.theory().all_names();
        let ops = decls
            .iter()
            .enumerate()
            .filter(|(i, _)| omega.class(*i) == DeclClass::Operation)
            .map(|(_, d)| Op {
                head: d.name.clone(),
                binders: peel_fresh(&d.ty, &names).0,
            })
            .collect();
        Enumerator {
            g: EGraph::new(decls, BTreeMap::new(), budget.fuel),
            rules: equation_rules(decls),
            ops,
            terms: Vec::new(),
            fuel: budget.fuel,
        }
    }

    fn exhausted(&self) -> bool {
        self.g.is_exhausted()
    }

    fn saturate(&mut self) {
        self.g.refuel(self.fuel);
        let _ = self.g.saturate(&self.rules, None);
    }

    /// Adds every term of exactly `size` nodes and saturates.
    fn level(&mut self, size: usize) -> Result<(), ModelError> {
        let mut out = Vec::new();
        for k in 0..self.ops.len() {
            let n = self.ops[k].binders.len();
            if n == 0 {
                if size == 1 {
                    out.push(Tm::Var(self.ops[k].head.clone()));
                }
            } else if size > 1 + n {
                self.gen(k, 0, size - 1 - n, &mut BTreeMap::new(), &mut Vec::new(), &mut out);
            }
        }
        self.g.refuel(self.fuel);
        for t in out {
            if self.terms.len() >= MAX_TERMS {
                return Err(KernelError::Budget(format!("more than {MAX_TERMS} closed terms")).into());
            }
            let id = self.g.add(&t);
            self.terms.push((t, size, id));
        }
        let _ = self.g.saturate(&self.rules, None);
        Ok(())
    }

    fn gen(&mut self, k: usize, i: usize, remaining: usize, sub: &mut BTreeMap<Name, Tm>, args: &mut Vec<Tm>, out: &mut Vec<Tm>) {
        let n = self.ops[k].binders.len();
        if i == n {
            out.push(Tm::apps(Tm::Var(self.ops[k].head.clone()), args.iter().cloned()));
            return;
        }
        let (x, dom) = self.ops[k].binders[i].clone();
        let dom_id = self.g.add(&dom.subst_many(sub));
        let dom_id = self.g.find(dom_id);
        let rest = n - i - 1;
        let candidates: Vec<Tm> = self
            .terms
            .iter()
            .filter(|(_, s, id)| {
                let fits = if rest == 0 { *s == remaining } else { *s + rest <= remaining };
                fits && self.g.small_type(*id) == Some(dom_id)
            })
            .map(|(t, _, _)| t.clone())
            .collect();
        for t in candidates {
            let s = t.size();
            sub.insert(x.clone(), t.clone());
            args.push(t);
            self.gen(k, i + 1, remaining - s, sub, args, out);
            args.pop();
            sub.remove(&x);
        }
    }

    fn partition(&self, max_size: usize) -> BTreeSet<Id> {
        self.terms
            .iter()
            .filter(|(_, s, _)| *s <= max_size)
            .map(|(_, _, id)| self.g.find(*id))
            .collect()
    }

    fn classes(&self, max_size: usize) -> BTreeMap<Id, TermClass> {
        let mut members: BTreeMap<Id, Vec<Tm>> = BTreeMap::new();
        for (t, s, id) in &self.terms {
            if *s <= max_size {
                members.entry(self.g.find(*id)).or_default().push(t.clone());
            }
        }
        members
            .into_iter()
            .map(|(id, mut ms)| {
                ms.sort_by(term_order);
                let label = polish(&ms[0]);
                (id, TermClass {
                    representative: ms[0].clone(),
                    label,
                    members: ms,
                })
            })
            .collect()
    }

    /// Tabulates the model over `classes`. Stops at the first operation
    /// whose table leaves the known classes and reports whether it did.
    fn build(&mut self, omega: &CheckedTheory, classes: &BTreeMap<Id, TermClass>) -> Result<(FiniteModel, bool), ModelError> {
        let by_label: BTreeMap<&str, &Tm> = classes
            .values()
            .map(|c| (c.label.as_str(), &c.representative))
            .collect();
        let mut by_type: BTreeMap<Id, Vec<String>> = BTreeMap::new();
        for (id, c) in classes {
            if let Some(t) = self.g.small_type(*id) {
                by_type.entry(t).or_default().push(c.label.clone());
            }
        }
        for ls in by_type.values_mut() {
            ls.sort();
        }
        let mut m = FiniteModel::new(omega.clone(), Vec::new());
        for (i, d) in omega.decls().iter().enumerate() {
            let g = &mut self.g;
            let head = Tm::Var(d.name.clone());
            let mut leaf = |leaf: Leaf<'_>, env: &[(Name, String)]| {
                let args = env.iter().map(|(_, l)| by_label[l.as_str()].clone());
                let id = g.add(&Tm::apps(head.clone(), args));
                let id = g.find(id);
                match leaf {
                    Leaf::Set => Some(Value::Set(by_type.get(&id).cloned().unwrap_or_default())),
                    Leaf::Elem(_) => classes.get(&id).map(|c| Value::elem(c.label.clone())),
                }
            };
            match m.build_value(&d.ty, &mut leaf)? {
                Some(v) => m.push(v),
                None => {
                    debug_assert_eq!(omega.class(i), DeclClass::Operation);
                    return Ok((m, false));
                }
            }
        }
        Ok((m, true))
    }
}

/// Enumerates closed terms up to `depth` nodes, identifies them up to the
/// theory's equations and tabulates the resulting term model.
///
/// The result is saturated when terms of size `depth + 1` add neither a
/// class nor an identification, every operation table stays within the
/// classes found, and no saturation step ran out of fuel.
pub fn initial_model_bounded(omega: &CheckedTheory, depth: usize, budget: ConvBudget) -> Result<InitialModelResult, ModelError> {
    if depth == 0 {
        return Err(ModelError::Domain("depth must be at least 1".into()));
    }
    if depth > MAX_DEPTH {
        return Err(KernelError::Budget(format!("depth {depth} exceeds the term size cap {MAX_DEPTH}")).into());
    }
    let mut en = Enumerator::new(omega, budget);
    for s in 1..=depth {
        en.level(s)?;
        if en.exhausted() {
            break;
        }
    }
    let before = en.partition(depth).len();
    let mut stable = !en.exhausted();
    if stable {
        en.level(depth + 1)?;
        let known = en.partition(depth);
        let fresh = en
            .terms
            .iter()
            .any(|(_, s, id)| *s == depth + 1 && !known.contains(&en.g.find(*id)));
        stable = !en.exhausted() && known.len() == before && !fresh;
    }
    let mut classes = en.classes(depth);
    let (mut model, mut closed) = en.build(omega, &classes)?;
    if stable && !closed {
        // table entries beyond the enumerated sizes may still be provably
        // equal to known classes
        en.saturate();
        stable = !en.exhausted() && en.partition(depth).len() == before;
        classes = en.classes(depth);
        (model, closed) = en.build(omega, &classes)?;
    }
    let mut indeterminate_pairs = Vec::new();
    if en.exhausted() {
        let cs: Vec<(&Id, &TermClass)> = classes.iter().collect();
        for (a, (ia, ca)) in cs.iter().enumerate() {
            for (ib, cb) in &cs[a + 1..] {
                if en.g.small_type(**ia) == en.g.small_type(**ib) {
                    indeterminate_pairs.push((ca.representative.clone(), cb.representative.clone()));
                }
            }
        }
    }
    let saturated = stable && closed && indeterminate_pairs.is_empty();
    if saturated {
        check_model(&model).map_err(|e| ModelError::Invariant(format!("saturated term model is invalid: {e}")))?;
    }
    let mut classes: Vec<TermClass> = classes.into_values().collect();
    classes.sort_by(|a, b| term_order(&a.representative, &b.representative));
    Ok(InitialModelResult {
        model,
        classes,
        depth_used: depth,
        saturated,
        indeterminate_pairs,
    })
}

/// The morphism from a saturated term model into `target` that evaluates
/// each class representative. Every enumerated member is evaluated too, as
/// a check that no unsound identification was made.
pub fn initial_morphism(r: &InitialModelResult, target: &FiniteModel) -> Result<ModelMorphism, ModelError> {
    if !r.saturated {
        return Err(ModelError::NotSaturated);
    }
    let src = &r.model;
    let eval = |t: &Tm| match target.eval(t, &[])? {
        Value::Elem(l) => Ok(l),
        other => Err(ModelError::Domain(format!("`{t}` evaluates to {other}"))),
    };
    let mut comps = Components::new();
    for addr in src.addresses()? {
        let mut table = BTreeMap::new();
        for l in src.carrier_at(&addr)? {
            let c = r
                .class_of_label(l)
                .ok_or_else(|| ModelError::Invariant(format!("no term class labelled {l}")))?;
            let image = eval(&c.representative)?;
            for t in &c.members[1..] {
                let other = eval(t)?;
                if other != image {
                    return Err(ModelError::WellDefinedness(format!(
                        "`{}` and `{t}` are identified but evaluate to {image} and {other}",
                        c.representative
                    )));
                }
            }
            table.insert(l.clone(), image);
        }
        comps.insert(addr, table);
    }
    let h = ModelMorphism::new(Arc::new(src.clone()), Arc::new(target.clone()), comps);
    check_morphism(&h)?;
    Ok(h)
}
