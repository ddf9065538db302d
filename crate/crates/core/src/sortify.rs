//! Two-sortification of theories and substitutions, the coreflector
//! substitution back to the original theory, and the pushforward that turns
//! a theory into the theory of its set-indexed families.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::KernelError;
use crate::kernel::{check_substitution, check_theory, peel_fresh, CheckedTheory, ConvBudget, DeclClass};
use crate::normalize::nf;
use crate::syntax::{alpha_eq_ty, fresh_name, Decl, Name, Substitution, Theory, Tm, Ty};

/// Names of the two family sorts `U : Set` and `El : (u : U) Set`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamPrefix {
    pub u: Name,
    pub el: Name,
}

impl Default for FamPrefix {
    fn default() -> Self {
        FamPrefix {
            u: Name::from("U"),
            el: Name::from("El"),
        }
    }
}

impl FamPrefix {
    /// Renames the requested names with numeric suffixes until neither
    /// occurs anywhere in the given theories.
    pub fn fresh_for(&self, theories: &[&Theory]) -> FamPrefix {
        let mut taken = BTreeSet::new();
        for th in theories {
            taken.extend(th.all_names());
        }
        let u = fresh_name(&self.u, &taken);
        taken.insert(u.clone());
        let el = fresh_name(&self.el, &taken);
        FamPrefix { u, el }
    }

    fn el_binder(&self) -> Name {
        if self.u.as_str() == "u" {
            Name::from("u1")
        } else {
            Name::from("u")
        }
    }

    /// The theory `U : Set; El : (u : U) Set;`.
    pub fn fam(&self) -> Theory {
        Theory::new(vec![
            Decl::new(self.u.clone(), Ty::Set),
            Decl::new(
                self.el.clone(),
                Ty::pi(self.el_binder(), Tm::Var(self.u.clone()), Ty::Set),
            ),
        ])
    }

    fn el(&self, t: Tm) -> Tm {
        Tm::app(Tm::Var(self.el.clone()), t)
    }
}

#[derive(Clone, Debug)]
pub struct TranslationResult {
    pub original: CheckedTheory,
    pub prefix: FamPrefix,
    pub translated: CheckedTheory,
    /// From the translated theory to the two-declaration family theory.
    pub projection: Substitution,
    /// From the translated theory back to the original one.
    pub coreflector: Substitution,
}

pub fn translate_tm(t: &Tm, p: &FamPrefix) -> Tm {
    match t {
        Tm::Var(_) => t.clone(),
        Tm::App(f, a) => Tm::app(translate_tm(f, p), translate_tm(a, p)),
        Tm::Lam(x, d, b) => Tm::lam(x.clone(), p.el(translate_tm(d, p)), translate_tm(b, p)),
        Tm::Refl(s) => Tm::refl(translate_tm(s, p)),
    }
}

pub fn translate_ty(t: &Ty, p: &FamPrefix) -> Ty {
    match t {
        Ty::Set => Ty::Small(Tm::Var(p.u.clone())),
        Ty::Small(s) => Ty::Small(p.el(translate_tm(s, p))),
        Ty::Pi(x, d, b) => Ty::pi(x.clone(), p.el(translate_tm(d, p)), translate_ty(b, p)),
        Ty::Eq(l, r, a) => Ty::eq(translate_tm(l, p), translate_tm(r, p), translate_ty(a, p)),
    }
}

/// The translated theory, unchecked. `p` must be fresh for `th`.
pub fn translate_theory(th: &Theory, p: &FamPrefix) -> Theory {
    let mut decls = p.fam().decls;
    decls.extend(th.decls.iter().map(|d| Decl::new(d.name.clone(), translate_ty(&d.ty, p))));
    Theory::new(decls)
}

fn lams(binders: &[(Name, Tm)], body: Tm) -> Tm {
    binders
        .iter()
        .rev()
        .fold(body, |acc, (x, d)| Tm::lam(x.clone(), d.clone(), acc))
}

fn coreflector_terms(th: &CheckedTheory, p: &FamPrefix) -> Vec<Tm> {
    let mut earlier: BTreeMap<Name, Tm> = BTreeMap::new();
    let mut out = Vec::with_capacity(th.decls().len());
    for (i, d) in th.decls().iter().enumerate() {
        let t = match th.class(i) {
            DeclClass::Sort => {
                let avoid: BTreeSet<Name> = [d.name.clone(), p.u.clone(), p.el.clone()].into();
                let (binders, _) = peel_fresh(&d.ty, &avoid);
                let args = binders.iter().map(|(x, _)| Tm::Var(x.clone()));
                let body = p.el(Tm::apps(Tm::Var(d.name.clone()), args));
                let doms: Vec<(Name, Tm)> = binders
                    .into_iter()
                    .map(|(x, a)| (x, p.el(translate_tm(&a, p))))
                    .collect();
                lams(&doms, body)
            }
            DeclClass::SortEquation => {
                let avoid: BTreeSet<Name> = [p.u.clone(), p.el.clone()].into();
                let (binders, cod) = peel_fresh(&d.ty, &avoid);
                let Ty::Eq(l, _, _) = cod else { unreachable!("classified as an equation") };
                let doms: Vec<(Name, Tm)> = binders
                    .into_iter()
                    .map(|(x, a)| (x, p.el(translate_tm(&a, p))))
                    .collect();
                lams(&doms, Tm::refl(nf(&l.subst_many(&earlier))))
            }
            DeclClass::Operation | DeclClass::Equation => Tm::Var(d.name.clone()),
        };
        earlier.insert(d.name.clone(), t.clone());
        out.push(t);
    }
    out
}

/// Translates `th`, using `prefix` renamed apart from the theory's names.
pub fn two_sortify_theory(th: &CheckedTheory, prefix: &FamPrefix, budget: ConvBudget) -> Result<TranslationResult, KernelError> {
    let p = prefix.fresh_for(&[th.theory()]);
    let translated = check_theory(&translate_theory(th.theory(), &p), budget)?;
    let projection = Substitution {
        source: translated.theory().clone(),
        target: p.fam(),
        assignments: vec![Tm::Var(p.u.clone()), Tm::Var(p.el.clone())],
    };
    let coreflector = Substitution {
        source: translated.theory().clone(),
        target: th.theory().clone(),
        assignments: coreflector_terms(th, &p),
    };
    check_substitution(&projection, budget)?;
    check_substitution(&coreflector, budget)?;
    Ok(TranslationResult {
        original: th.clone(),
        prefix: p,
        translated,
        projection,
        coreflector,
    })
}

pub fn coreflector(th: &CheckedTheory, prefix: &FamPrefix, budget: ConvBudget) -> Result<Substitution, KernelError> {
    Ok(two_sortify_theory(th, prefix, budget)?.coreflector)
}

/// Translates a substitution. `prefix` is renamed apart from both
/// endpoints. To combine the result with translated theories, compute the
/// prefix once with [`FamPrefix::fresh_for`] over both endpoints; an
/// already fresh prefix is left unchanged by every operation here.
pub fn two_sortify_subst(s: &Substitution, prefix: &FamPrefix, budget: ConvBudget) -> Result<Substitution, KernelError> {
    let p = prefix.fresh_for(&[&s.source, &s.target]);
    let mut assignments = vec![Tm::Var(p.u.clone()), Tm::Var(p.el.clone())];
    assignments.extend(s.assignments.iter().map(|t| translate_tm(t, &p)));
    let out = Substitution {
        source: translate_theory(&s.source, &p),
        target: translate_theory(&s.target, &p),
        assignments,
    };
    check_substitution(&out, budget)?;
    Ok(out)
}

pub fn is_family_gat(th: &CheckedTheory, prefix: &FamPrefix) -> bool {
    let fam = prefix.fam();
    let decls = th.decls();
    decls.len() >= 2
        && decls[..2]
            .iter()
            .zip(&fam.decls)
            .all(|(d, f)| d.name == f.name && alpha_eq_ty(&d.ty, &f.ty))
        && th.classes()[2..]
            .iter()
            .all(|c| !matches!(c, DeclClass::Sort | DeclClass::SortEquation))
}

/// The theory of `index`-indexed families of models of `th`: prepends
/// `index : Set`, abstracts every declaration over an element of it and
/// applies every earlier declaration to that element.
pub fn pushforward(th: &CheckedTheory, index: &Name, budget: ConvBudget) -> Result<Theory, KernelError> {
    let names = th.theory().all_names();
    if names.contains(index) {
        return Err(KernelError::Freshness(index.clone()));
    }
    let lower = Name::new(&index.as_str().to_lowercase()).unwrap_or_else(|| Name::from("i"));
    let mut taken = names.clone();
    taken.insert(index.clone());
    let a = fresh_name(&lower, &taken);
    let at = Tm::Var(a.clone());
    let mut decls = vec![Decl::new(index.clone(), Ty::Set)];
    let mut applied: BTreeMap<Name, Tm> = BTreeMap::new();
    for d in th.decls() {
        let ty = d.ty.subst_many(&applied);
        decls.push(Decl::new(d.name.clone(), Ty::pi(a.clone(), Tm::Var(index.clone()), ty)));
        applied.insert(d.name.clone(), Tm::app(Tm::Var(d.name.clone()), at.clone()));
    }
    let out = Theory::new(decls);
    check_theory(&out, budget).map_err(|e| match e {
        KernelError::Type { decl, subterm, msg } => KernelError::Type {
            decl,
            subterm,
            msg: format!("pushforward produced an ill-typed declaration: {msg}"),
        },
        other => other,
    })?;
    Ok(out)
}

/// Number of declarations of each class, in declaration-class order.
pub fn class_counts(th: &CheckedTheory) -> [(DeclClass, usize); 4] {
    [DeclClass::Sort, DeclClass::Operation, DeclClass::Equation, DeclClass::SortEquation].map(|c| (c, th.count(c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{compose_substitutions, conv_substitutions, Verdict};
    use crate::parse::{parse_term, parse_theory};

    const TG: &str = "V : Set; E : (x : V) (y : V) Set;
        T : (v1 : V) (v2 : V) (v3 : V) (e1 : E v1 v2) (e2 : E v2 v3) E v1 v3;";
    const RUSSELL: &str = "Con : Set; Ty : (G : Con) Set; Tm : (G : Con) (A : Ty G) Set;
        R : (G : Con) Ty G; e : (G : Con) Tm G (R G) = Ty G : Set;";

    fn checked(src: &str) -> CheckedTheory {
        check_theory(&parse_theory(src).unwrap(), ConvBudget::default()).unwrap()
    }

    fn tr(src: &str) -> TranslationResult {
        two_sortify_theory(&checked(src), &FamPrefix::default(), ConvBudget::default()).unwrap()
    }

    #[test]
    fn translates_transitive_graphs() {
        let r = tr(TG);
        assert_eq!(
            r.translated.theory().to_string(),
            "U : Set;\nEl : (u : U) Set;\nV : U;\nE : (x : El V) (y : El V) U;\n\
             T : (v1 : El V) (v2 : El V) (v3 : El V) (e1 : El (E v1 v2)) (e2 : El (E v2 v3)) El (E v1 v3);\n"
        );
        assert!(is_family_gat(&r.translated, &r.prefix));
        assert!(!is_family_gat(&checked(TG), &r.prefix));
    }

    #[test]
    fn translates_pointed_and_empty() {
        assert_eq!(
            tr("A : Set; a : A;").translated.theory().to_string(),
            "U : Set;\nEl : (u : U) Set;\nA : U;\na : El A;\n"
        );
        let e = tr("");
        assert_eq!(e.translated.theory().to_string(), "U : Set;\nEl : (u : U) Set;\n");
        assert!(e.coreflector.assignments.is_empty());
        assert!(is_family_gat(&e.translated, &e.prefix));
    }

    #[test]
    fn sort_equations_disappear() {
        let th = checked(RUSSELL);
        assert_eq!(th.count(DeclClass::SortEquation), 1);
        let r = tr(RUSSELL);
        assert_eq!(r.translated.count(DeclClass::SortEquation), 0);
        assert_eq!(
            r.translated.decls().last().unwrap().to_string(),
            "e : (G : El Con) Tm G (R G) = Ty G : U;"
        );
        assert_eq!(r.coreflector.assignments[4].to_string(), "\\G : El Con. refl (El (Tm G (R G)))");
        assert!(is_family_gat(&r.translated, &r.prefix));
    }

    #[test]
    fn coreflector_assignments() {
        let r = tr("A : Set; a : A;");
        let printed: Vec<_> = r.coreflector.assignments.iter().map(|t| t.to_string()).collect();
        assert_eq!(printed, ["El A", "a"]);
        let r = tr(TG);
        assert_eq!(r.coreflector.assignments[1].to_string(), "\\x : El V. \\y : El V. El (E x y)");
    }

    #[test]
    fn prefix_is_renamed_on_clash() {
        let r = tr("U : Set; El : (x : U) Set; U1 : Set;");
        assert_eq!(r.prefix.u.as_str(), "U2");
        assert_eq!(r.prefix.el.as_str(), "El1");
        assert!(is_family_gat(&r.translated, &r.prefix));
    }

    #[test]
    fn display_substitution_translates() {
        let b = ConvBudget::default();
        let pointed = parse_theory("A : Set; a : A;").unwrap();
        let set = parse_theory("A : Set;").unwrap();
        let display = Substitution {
            source: pointed.clone(),
            target: set.clone(),
            assignments: vec![Tm::var("A")],
        };
        let t = two_sortify_subst(&display, &FamPrefix::default(), b).unwrap();
        assert_eq!(t.source.to_string(), "U : Set;\nEl : (u : U) Set;\nA : U;\na : El A;\n");
        assert_eq!(t.assignments, vec![Tm::var("U"), Tm::var("El"), Tm::var("A")]);

        // naturality: display ∘ R = R ∘ T(display)
        let p = FamPrefix::default();
        let rp = coreflector(&checked("A : Set; a : A;"), &p, b).unwrap();
        let rs = coreflector(&checked("A : Set;"), &p, b).unwrap();
        let lhs = compose_substitutions(&display, &rp).unwrap();
        let rhs = compose_substitutions(&rs, &t).unwrap();
        assert_eq!(conv_substitutions(&lhs, &rhs, b).unwrap(), Verdict::Equal);
    }

    #[test]
    fn table_one_rows() {
        let b = ConvBudget::default();
        let a = Name::from("A");
        assert_eq!(pushforward(&checked("B : Set;"), &a, b).unwrap().to_string(), "A : Set;\nB : (a : A) Set;\n");
        assert_eq!(
            pushforward(&checked("B : Set; b : B;"), &a, b).unwrap().to_string(),
            "A : Set;\nB : (a : A) Set;\nb : (a : A) B a;\n"
        );
        assert_eq!(
            pushforward(&checked(TG), &a, b).unwrap().to_string(),
            "A : Set;\nV : (a : A) Set;\nE : (a : A) (x : V a) (y : V a) Set;\n\
             T : (a : A) (v1 : V a) (v2 : V a) (v3 : V a) (e1 : E a v1 v2) (e2 : E a v2 v3) E a v1 v3;\n"
        );
        assert_eq!(
            pushforward(&checked("B : Set;"), &Name::from("B"), b),
            Err(KernelError::Freshness(Name::from("B")))
        );
    }

    #[test]
    fn opposite_graph_is_natural() {
        let b = ConvBudget::default();
        let tg = parse_theory(TG).unwrap();
        let op = Substitution {
            source: tg.clone(),
            target: tg.clone(),
            assignments: vec![
                parse_term("V").unwrap(),
                parse_term("\\x : V. \\y : V. E y x").unwrap(),
                parse_term("\\v1 : V. \\v2 : V. \\v3 : V. \\e1 : E v2 v1. \\e2 : E v3 v2. T v3 v2 v1 e2 e1").unwrap(),
            ],
        };
        check_substitution(&op, b).unwrap();
        let p = FamPrefix::default();
        let t = two_sortify_subst(&op, &p, b).unwrap();
        let r = coreflector(&checked(TG), &p, b).unwrap();
        let lhs = compose_substitutions(&op, &r).unwrap();
        let rhs = compose_substitutions(&r, &t).unwrap();
        assert_eq!(conv_substitutions(&lhs, &rhs, b).unwrap(), Verdict::Equal);
        let id = two_sortify_subst(&Substitution::identity(&tg), &p, b).unwrap();
        let tid = Substitution::identity(&translate_theory(&tg, &p));
        assert_eq!(conv_substitutions(&id, &tid, b).unwrap(), Verdict::Equal);
        assert_eq!(conv_substitutions(&t, &tid, b).unwrap(), Verdict::Unequal);
    }
}
