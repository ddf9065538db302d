//! Typechecking and conversion for theories, terms and substitutions.
//!
//! Conversion is βη plus equality reflection: every equation declared in the
//! context is available as a rewrite, proofs of one equality type are all
//! equal, and functions are compared pointwise (η) at a fresh variable. The
//! equational part runs in a fueled e-graph, so the verdict is three-valued.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::egraph::{EGraph, Rule, Sat};
use crate::error::KernelError;
use crate::normalize::{nf, normalize};
use crate::syntax::{alpha_eq_tm, fresh_name, Decl, Name, Substitution, Theory, Tm, Ty};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Equal,
    Unequal,
    Indeterminate,
}

impl Verdict {
    /// Conjunction: one `Unequal` decides, otherwise any `Indeterminate`
    /// wins over `Equal`.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Unequal, _) | (_, Unequal) => Unequal,
            (Indeterminate, _) | (_, Indeterminate) => Indeterminate,
            _ => Equal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvBudget {
    /// E-graph steps (new classes plus merges) per comparison.
    pub fuel: usize,
    /// β/η steps per comparison.
    pub max_unfold: usize,
}

impl Default for ConvBudget {
    fn default() -> Self {
        ConvBudget {
            fuel: 10_000,
            max_unfold: 1_000,
        }
    }
}

impl ConvBudget {
    pub fn scaled(self, k: usize) -> ConvBudget {
        ConvBudget {
            fuel: self.fuel.saturating_mul(k),
            max_unfold: self.max_unfold.saturating_mul(k),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum DeclClass {
    Sort,
    Operation,
    Equation,
    SortEquation,
}

impl DeclClass {
    pub fn of(ty: &Ty) -> DeclClass {
        match ty.peel().1 {
            Ty::Set => DeclClass::Sort,
            Ty::Eq(_, _, at) => match at.peel().1 {
                Ty::Set => DeclClass::SortEquation,
                _ => DeclClass::Equation,
            },
            _ => DeclClass::Operation,
        }
    }

    pub fn is_equation(self) -> bool {
        matches!(self, DeclClass::Equation | DeclClass::SortEquation)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DeclClass::Sort => "sort",
            DeclClass::Operation => "operation",
            DeclClass::Equation => "equation",
            DeclClass::SortEquation => "sort equation",
        }
    }
}

/// A theory that passed `check_theory`, with its declaration classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckedTheory {
    theory: Theory,
    classes: Vec<DeclClass>,
}

impl CheckedTheory {
    pub fn theory(&self) -> &Theory {
        &self.theory
    }

    pub fn decls(&self) -> &[Decl] {
        &self.theory.decls
    }

    pub fn classes(&self) -> &[DeclClass] {
        &self.classes
    }

    pub fn class(&self, i: usize) -> DeclClass {
        self.classes[i]
    }

    pub fn count(&self, class: DeclClass) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }
}

/// Typing context: a prefix of global declarations and a stack of locals.
/// Local names are kept distinct from each other and from the globals by
/// renaming binders on entry.
pub struct Ctx<'a> {
    globals: &'a [Decl],
    locals: Vec<(Name, Ty)>,
    budget: ConvBudget,
    rules: Option<Vec<Rule>>,
}

impl<'a> Ctx<'a> {
    pub fn new(globals: &'a [Decl], budget: ConvBudget) -> Ctx<'a> {
        Ctx {
            globals,
            locals: Vec::new(),
            budget,
            rules: None,
        }
    }

    fn lookup(&self, n: &Name) -> Option<&Ty> {
        if let Some((_, t)) = self.locals.iter().rev().find(|(m, _)| m == n) {
            return Some(t);
        }
        self.globals.iter().rev().find(|d| &d.name == n).map(|d| &d.ty)
    }

    fn in_scope(&self) -> BTreeSet<Name> {
        self.globals
            .iter()
            .map(|d| d.name.clone())
            .chain(self.locals.iter().map(|(n, _)| n.clone()))
            .collect()
    }

    /// Pushes a local and returns the name it was given, which differs from
    /// `x` when `x` is already in scope or occurs in `avoid`.
    pub fn push(&mut self, x: &Name, ty: Ty, avoid: &BTreeSet<Name>) -> Name {
        let mut taken = self.in_scope();
        taken.extend(avoid.iter().cloned());
        let y = fresh_name(x, &taken);
        self.locals.push((y.clone(), ty));
        y
    }

    pub fn pop(&mut self) {
        self.locals.pop();
    }

    /// Checks a telescope of locals and pushes it, returning the renaming
    /// that was applied to it.
    pub fn push_telescope(&mut self, tele: &[(Name, Ty)]) -> Result<BTreeMap<Name, Tm>, KernelError> {
        let mut ren = BTreeMap::new();
        for (x, t) in tele {
            let t = t.subst_many(&ren);
            self.check_ty(&t)?;
            let y = self.push(x, t, &BTreeSet::new());
            if &y != x {
                ren.insert(x.clone(), Tm::Var(y));
            }
        }
        Ok(ren)
    }

    pub fn check_ty(&mut self, ty: &Ty) -> Result<(), KernelError> {
        match ty {
            Ty::Set => Ok(()),
            Ty::Small(t) => self.check(t, &Ty::Set),
            Ty::Pi(x, d, b) => {
                self.check(d, &Ty::Set)?;
                let y = self.push(x, Ty::Small(d.clone()), &BTreeSet::new());
                let b = b.subst(x, &Tm::Var(y));
                let r = self.check_ty(&b);
                self.pop();
                r
            }
            Ty::Eq(l, r, a) => {
                self.check_ty(a)?;
                self.check(l, a)?;
                self.check(r, a)
            }
        }
    }

    pub fn infer(&mut self, t: &Tm) -> Result<Ty, KernelError> {
        match t {
            Tm::Var(n) => self
                .lookup(n)
                .cloned()
                .ok_or_else(|| KernelError::ty(t, format!("unbound variable {n}"))),
            Tm::App(f, a) => match self.infer(f)? {
                Ty::Pi(x, d, cod) => {
                    self.check(a, &Ty::Small(d))?;
                    Ok(cod.subst(&x, a))
                }
                other => Err(KernelError::ty(t, format!("applying `{f}` of non-function type {other}"))),
            },
            Tm::Lam(x, d, b) => {
                self.check(d, &Ty::Set)?;
                let y = self.push(x, Ty::Small((**d).clone()), &BTreeSet::new());
                let body = b.subst(x, &Tm::Var(y.clone()));
                let bt = self.infer(&body);
                self.pop();
                Ok(Ty::pi(y, (**d).clone(), bt?))
            }
            Tm::Refl(s) => {
                let st = self.infer(s)?;
                Ok(Ty::eq((**s).clone(), (**s).clone(), st))
            }
        }
    }

    pub fn check(&mut self, t: &Tm, expected: &Ty) -> Result<(), KernelError> {
        let found = self.infer(t)?;
        match self.conv_ty(&found, expected) {
            Verdict::Equal => Ok(()),
            Verdict::Unequal => Err(KernelError::ty(t, format!("expected type {expected}, found {found}"))),
            Verdict::Indeterminate => Err(KernelError::Indeterminate {
                decl: None,
                lhs: found.to_string(),
                rhs: expected.to_string(),
            }),
        }
    }

    pub fn conv_ty(&mut self, a: &Ty, b: &Ty) -> Verdict {
        match (a, b) {
            (Ty::Set, Ty::Set) => Verdict::Equal,
            (Ty::Small(s), Ty::Small(t)) => self.conv_tm(s, t, &Ty::Set),
            (Ty::Pi(x, d, s), Ty::Pi(y, e, t)) => {
                let dom = self.conv_tm(d, e, &Ty::Set);
                if dom == Verdict::Unequal {
                    return dom;
                }
                let mut avoid = s.free_vars();
                avoid.extend(t.free_vars());
                let z = self.push(x, Ty::Small(d.clone()), &avoid);
                let zt = Tm::Var(z);
                let cod = self.conv_ty(&s.subst(x, &zt), &t.subst(y, &zt));
                self.pop();
                dom.and(cod)
            }
            (Ty::Eq(l, r, s), Ty::Eq(m, q, t)) => {
                let at = self.conv_ty(s, t);
                if at == Verdict::Unequal {
                    return at;
                }
                let lv = self.conv_tm(l, m, s);
                if lv == Verdict::Unequal {
                    return lv;
                }
                at.and(lv).and(self.conv_tm(r, q, s))
            }
            _ => Verdict::Unequal,
        }
    }

    /// Compares two terms of type `ty`.
    pub fn conv_tm(&mut self, a: &Tm, b: &Tm, ty: &Ty) -> Verdict {
        match ty {
            // proof irrelevance
            Ty::Eq(..) => Verdict::Equal,
            Ty::Pi(x, d, cod) => {
                let mut avoid = a.free_vars();
                avoid.extend(b.free_vars());
                avoid.extend(cod.free_vars());
                let z = self.push(x, Ty::Small(d.clone()), &avoid);
                let zt = Tm::Var(z);
                let v = self.conv_tm(
                    &Tm::app(a.clone(), zt.clone()),
                    &Tm::app(b.clone(), zt.clone()),
                    &cod.subst(x, &zt),
                );
                self.pop();
                v
            }
            _ => self.conv_base(a, b),
        }
    }

    fn conv_base(&mut self, a: &Tm, b: &Tm) -> Verdict {
        let mut steps = self.budget.max_unfold;
        let (na, nb) = match (normalize(a, &mut steps), normalize(b, &mut steps)) {
            (Ok(x), Ok(y)) => (x, y),
            _ => return Verdict::Indeterminate,
        };
        if alpha_eq_tm(&na, &nb) {
            return Verdict::Equal;
        }
        if self.rules.is_none() {
            self.rules = Some(equation_rules(self.globals));
        }
        let rules = self.rules.as_ref().unwrap();
        if rules.is_empty() {
            return Verdict::Unequal;
        }
        let consts: BTreeMap<Name, Ty> = self.locals.iter().cloned().collect();
        let mut g = EGraph::new(self.globals, consts, self.budget.fuel);
        let ia = g.add(&na);
        let ib = g.add(&nb);
        match g.saturate(rules, Some((ia, ib))) {
            Sat::Merged => Verdict::Equal,
            Sat::Saturated => Verdict::Unequal,
            Sat::Exhausted => Verdict::Indeterminate,
        }
    }
}

/// Peels the Π binders of `ty`, renaming them apart from each other and
/// from `avoid`.
pub(crate) fn peel_fresh(ty: &Ty, avoid: &BTreeSet<Name>) -> (Vec<(Name, Tm)>, Ty) {
    let mut taken = avoid.clone();
    ty.all_names(&mut taken);
    let mut binders = Vec::new();
    let mut cur = ty.clone();
    while let Ty::Pi(x, d, b) = cur {
        let y = if avoid.contains(&x) || binders.iter().any(|(n, _): &(Name, Tm)| n == &x) {
            fresh_name(&x, &taken)
        } else {
            x.clone()
        };
        taken.insert(y.clone());
        cur = if y == x { *b } else { b.subst(&x, &Tm::Var(y.clone())) };
        binders.push((y, d));
    }
    (binders, cur)
}

/// Rewrite rules for every equation declared in `globals`. Equations at a
/// function type are taken pointwise.
pub fn equation_rules(globals: &[Decl]) -> Vec<Rule> {
    let names: BTreeSet<Name> = globals.iter().map(|d| d.name.clone()).collect();
    let mut out = Vec::new();
    for d in globals {
        let (mut binders, cod) = peel_fresh(&d.ty, &names);
        let Ty::Eq(l, r, at) = cod else { continue };
        let mut taken = names.clone();
        taken.extend(binders.iter().map(|(n, _)| n.clone()));
        let (extra, base) = peel_fresh(&at, &taken);
        if matches!(base, Ty::Eq(..)) {
            continue;
        }
        let args: Vec<Tm> = extra.iter().map(|(n, _)| Tm::Var(n.clone())).collect();
        let l = nf(&Tm::apps(l, args.clone()));
        let r = nf(&Tm::apps(r, args));
        binders.extend(extra);
        out.push(Rule::from_equation(&d.name, binders, &l, &r));
    }
    out
}

pub fn check_theory(th: &Theory, budget: ConvBudget) -> Result<CheckedTheory, KernelError> {
    let mut classes = Vec::with_capacity(th.len());
    for (i, d) in th.decls.iter().enumerate() {
        if th.decls[..i].iter().any(|e| e.name == d.name) {
            return Err(KernelError::Type {
                decl: Some(d.name.clone()),
                subterm: d.name.to_string(),
                msg: format!("duplicate declaration {}", d.name),
            });
        }
        let mut ctx = Ctx::new(&th.decls[..i], budget);
        ctx.check_ty(&d.ty).map_err(|e| e.in_decl(&d.name))?;
        classes.push(DeclClass::of(&d.ty));
    }
    Ok(CheckedTheory {
        theory: th.clone(),
        classes,
    })
}

/// Infers the type of `t` in the theory extended with the telescope
/// `locals`. The returned type refers to the locals by their given names.
pub fn infer_term(th: &CheckedTheory, locals: &[(Name, Ty)], t: &Tm, budget: ConvBudget) -> Result<Ty, KernelError> {
    let mut ctx = Ctx::new(th.decls(), budget);
    let ren = ctx.push_telescope(locals)?;
    let ty = ctx.infer(&t.subst_many(&ren))?;
    let back: BTreeMap<Name, Tm> = ren
        .iter()
        .filter_map(|(x, y)| match y {
            Tm::Var(y) => Some((y.clone(), Tm::Var(x.clone()))),
            _ => None,
        })
        .collect();
    Ok(ty.subst_many(&back))
}

pub fn conv_tm(th: &CheckedTheory, locals: &[(Name, Ty)], a: &Tm, b: &Tm, ty: &Ty, budget: ConvBudget) -> Result<Verdict, KernelError> {
    let mut ctx = Ctx::new(th.decls(), budget);
    let ren = ctx.push_telescope(locals)?;
    Ok(ctx.conv_tm(&a.subst_many(&ren), &b.subst_many(&ren), &ty.subst_many(&ren)))
}

pub fn conv_ty(th: &CheckedTheory, locals: &[(Name, Ty)], a: &Ty, b: &Ty, budget: ConvBudget) -> Result<Verdict, KernelError> {
    let mut ctx = Ctx::new(th.decls(), budget);
    let ren = ctx.push_telescope(locals)?;
    Ok(ctx.conv_ty(&a.subst_many(&ren), &b.subst_many(&ren)))
}

pub fn check_substitution(s: &Substitution, budget: ConvBudget) -> Result<(), KernelError> {
    if s.assignments.len() != s.target.len() {
        return Err(KernelError::Mismatch(format!(
            "{} assignments for {} target declarations",
            s.assignments.len(),
            s.target.len()
        )));
    }
    let mut ctx = Ctx::new(&s.source.decls, budget);
    for (i, d) in s.target.decls.iter().enumerate() {
        let expected = s.expected_type(i);
        ctx.check(&s.assignments[i], &expected).map_err(|e| e.in_decl(&d.name))?;
    }
    Ok(())
}

/// `s2 ∘ s1`: substitutes the assignments of `s1` into those of `s2`.
pub fn compose_substitutions(s2: &Substitution, s1: &Substitution) -> Result<Substitution, KernelError> {
    if !s1.target.alpha_eq(&s2.source) {
        return Err(KernelError::Mismatch(
            "the target of the inner substitution is not the source of the outer one".into(),
        ));
    }
    let map = s1.as_map();
    Ok(Substitution {
        source: s1.source.clone(),
        target: s2.target.clone(),
        assignments: s2.assignments.iter().map(|t| t.subst_many(&map)).collect(),
    })
}

/// Componentwise conversion of two substitutions with common endpoints.
pub fn conv_substitutions(a: &Substitution, b: &Substitution, budget: ConvBudget) -> Result<Verdict, KernelError> {
    if !a.source.alpha_eq(&b.source) || !a.target.alpha_eq(&b.target) {
        return Err(KernelError::Mismatch("substitutions have different endpoints".into()));
    }
    let mut ctx = Ctx::new(&a.source.decls, budget);
    let mut v = Verdict::Equal;
    for i in 0..a.target.len() {
        let ty = a.expected_type(i);
        v = v.and(ctx.conv_tm(&a.assignments[i], &b.assignments[i], &ty));
        if v == Verdict::Unequal {
            break;
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_term, parse_theory, parse_type};

    const TG: &str = "V : Set; E : (a : V) (b : V) Set;
        T : (v1 : V) (v2 : V) (v3 : V) (e1 : E v1 v2) (e2 : E v2 v3) E v1 v3;";

    fn checked(src: &str) -> CheckedTheory {
        check_theory(&parse_theory(src).unwrap(), ConvBudget::default()).unwrap()
    }

    fn tele(src: &str) -> Vec<(Name, Ty)> {
        parse_theory(src).unwrap().decls.into_iter().map(|d| (d.name, d.ty)).collect()
    }

    #[test]
    fn classifies_transitive_graphs() {
        let th = checked(TG);
        assert_eq!(th.classes(), &[DeclClass::Sort, DeclClass::Sort, DeclClass::Operation]);
        let p = checked("A : Set; a : A;");
        assert_eq!(p.classes(), &[DeclClass::Sort, DeclClass::Operation]);
    }

    #[test]
    fn unbound_variable_is_reported() {
        let err = check_theory(&parse_theory("a : A;").unwrap(), ConvBudget::default()).unwrap_err();
        match err {
            KernelError::Type { decl, msg, .. } => {
                assert_eq!(decl.unwrap().as_str(), "a");
                assert!(msg.contains("unbound variable A"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infers_composition_type() {
        let th = checked(TG);
        let locals = tele("v1 : V; v2 : V; v3 : V; e1 : E v1 v2; e2 : E v2 v3;");
        let ty = infer_term(&th, &locals, &parse_term("T v1 v2 v3 e1 e2").unwrap(), ConvBudget::default()).unwrap();
        assert_eq!(ty, parse_type("E v1 v3").unwrap());
    }

    #[test]
    fn infers_set_and_refl() {
        let a = checked("A : Set;");
        assert_eq!(infer_term(&a, &[], &Tm::var("A"), ConvBudget::default()).unwrap(), Ty::Set);
        let p = checked("A : Set; a : A;");
        let ty = infer_term(&p, &[], &parse_term("refl a").unwrap(), ConvBudget::default()).unwrap();
        assert_eq!(ty, parse_type("a = a : A").unwrap());
    }

    #[test]
    fn eta_reflection_and_distinct_generators() {
        let b = ConvBudget::default();
        let th = checked("A : Set; f : (x : A) A;");
        let fty = parse_type("(x : A) A").unwrap();
        let v = conv_tm(&th, &[], &parse_term("\\x : A. f x").unwrap(), &Tm::var("f"), &fty, b).unwrap();
        assert_eq!(v, Verdict::Equal);

        let th = checked("A : Set; B : Set; e : A = B : Set;");
        assert_eq!(conv_tm(&th, &[], &Tm::var("A"), &Tm::var("B"), &Ty::Set, b).unwrap(), Verdict::Equal);

        let th = checked("A : Set; B : Set;");
        assert_eq!(conv_tm(&th, &[], &Tm::var("A"), &Tm::var("B"), &Ty::Set, b).unwrap(), Verdict::Unequal);
    }

    #[test]
    fn reflection_retypes_terms() {
        // b : B is accepted at A once A = B is declared
        checked("A : Set; B : Set; e : A = B : Set; b : B; c : A; d : b = c : A;");
        let err = check_theory(&parse_theory("A : Set; B : Set; b : B; c : A; d : b = c : A;").unwrap(), ConvBudget::default());
        assert!(matches!(err, Err(KernelError::Type { .. })));
    }

    #[test]
    fn proofs_are_irrelevant() {
        let th = checked("A : Set; a : A; p : a = a : A;");
        let ty = parse_type("a = a : A").unwrap();
        let v = conv_tm(&th, &[], &Tm::var("p"), &parse_term("refl a").unwrap(), &ty, ConvBudget::default()).unwrap();
        assert_eq!(v, Verdict::Equal);
    }

    #[test]
    fn exhausted_fuel_is_indeterminate() {
        let th = checked("A : Set; f : (x : A) A; a : A; b : A; g : (x : A) A; grow : (x : A) f x = f (g x) : A;");
        let tiny = ConvBudget { fuel: 20, max_unfold: 100 };
        let v = conv_tm(&th, &[], &parse_term("f a").unwrap(), &Tm::var("b"), &Ty::Small(Tm::var("A")), tiny).unwrap();
        assert_eq!(v, Verdict::Indeterminate);
    }

    fn subst(src: &Theory, tgt: &Theory, terms: &[&str]) -> Substitution {
        Substitution {
            source: src.clone(),
            target: tgt.clone(),
            assignments: terms.iter().map(|t| parse_term(t).unwrap()).collect(),
        }
    }

    #[test]
    fn substitution_checking() {
        let b = ConvBudget::default();
        let pointed = parse_theory("A : Set; a : A;").unwrap();
        let set = parse_theory("A : Set;").unwrap();
        check_substitution(&subst(&pointed, &set, &["A"]), b).unwrap();
        check_substitution(&Substitution::identity(&pointed), b).unwrap();
        let err = check_substitution(&subst(&set, &pointed, &["A", "A"]), b).unwrap_err();
        match err {
            KernelError::Type { decl, .. } => assert_eq!(decl.unwrap().as_str(), "a"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn composition_with_display_takes_first_component() {
        let b = ConvBudget::default();
        let pointed = parse_theory("A : Set; a : A;").unwrap();
        let set = parse_theory("A : Set;").unwrap();
        let theta = parse_theory("X : Set; Y : Set; y : Y;").unwrap();
        let display = subst(&pointed, &set, &["A"]);
        let sigma = subst(&theta, &pointed, &["Y", "y"]);
        check_substitution(&sigma, b).unwrap();
        let c = compose_substitutions(&display, &sigma).unwrap();
        assert_eq!(c.assignments, vec![Tm::var("Y")]);
        let id = compose_substitutions(&Substitution::identity(&pointed), &sigma).unwrap();
        assert_eq!(conv_substitutions(&id, &sigma, b).unwrap(), Verdict::Equal);
        assert!(matches!(compose_substitutions(&sigma, &display), Err(KernelError::Mismatch(_))));
    }

    #[test]
    fn monoid_laws_convert() {
        let th = checked(
            "M : Set; e : M; mul : (x : M) (y : M) M;
             unit_l : (x : M) mul e x = x : M;
             unit_r : (x : M) mul x e = x : M;
             assoc : (x : M) (y : M) (z : M) mul (mul x y) z = mul x (mul y z) : M;",
        );
        let m = Ty::Small(Tm::var("M"));
        let b = ConvBudget::default();
        let v = conv_tm(&th, &[], &parse_term("mul (mul e e) e").unwrap(), &Tm::var("e"), &m, b).unwrap();
        assert_eq!(v, Verdict::Equal);
        let fty = parse_type("(x : M) M").unwrap();
        let v = conv_tm(&th, &[], &parse_term("\\x : M. mul x e").unwrap(), &parse_term("\\y : M. y").unwrap(), &fty, b).unwrap();
        assert_eq!(v, Verdict::Equal);
    }
}
