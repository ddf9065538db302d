//! Abstract syntax of the signature language: names, terms, types,
//! theories (telescopes of declarations) and substitutions between them.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

/// An identifier. Surface names are ASCII letters, digits and underscores,
/// not starting with a digit, and not one of the keywords `Set` / `refl`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name(Arc<str>);

pub(crate) const KEYWORDS: [&str; 2] = ["Set", "refl"];

impl Name {
    /// Builds a validated surface name.
    pub fn new(text: &str) -> Option<Name> {
        if is_valid_name(text) {
            Some(Name(Arc::from(text)))
        } else {
            None
        }
    }

    /// Builds a name without validation. Used for internal constants that
    /// must never collide with surface names.
    pub(crate) fn internal(text: &str) -> Name {
        Name(Arc::from(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub fn is_valid_name(text: &str) -> bool {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && !KEYWORDS.contains(&text)
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<&str> for Name {
    /// Panics on an invalid name; intended for literals in code and tests.
    fn from(s: &str) -> Name {
        Name::new(s).unwrap_or_else(|| panic!("invalid name {s:?}"))
    }
}

/// Returns `base` if it is not in `avoid`, otherwise `base` with the
/// smallest numeric suffix that is.
pub fn fresh_name(base: &Name, avoid: &BTreeSet<Name>) -> Name {
    if !avoid.contains(base) {
        return base.clone();
    }
    (1..)
        .map(|i| Name(Arc::from(format!("{}{}", base.as_str(), i).as_str())))
        .find(|n| !avoid.contains(n))
        .unwrap()
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Tm {
    Var(Name),
    App(Box<Tm>, Box<Tm>),
    /// `\x : A. body`, the domain is a term of type `Set`.
    Lam(Name, Box<Tm>, Box<Tm>),
    Refl(Box<Tm>),
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Ty {
    /// The universe `Set`.
    Set,
    /// The type of elements of a small type `t : Set`.
    Small(Tm),
    /// Dependent product over a small domain.
    Pi(Name, Tm, Box<Ty>),
    /// Extensional equality `lhs = rhs : at`.
    Eq(Tm, Tm, Box<Ty>),
}

impl Tm {
    pub fn var(name: impl Into<Name>) -> Tm {
        Tm::Var(name.into())
    }

    pub fn app(f: Tm, a: Tm) -> Tm {
        Tm::App(Box::new(f), Box::new(a))
    }

    pub fn apps(head: Tm, args: impl IntoIterator<Item = Tm>) -> Tm {
        args.into_iter().fold(head, Tm::app)
    }

    pub fn lam(x: impl Into<Name>, dom: Tm, body: Tm) -> Tm {
        Tm::Lam(x.into(), Box::new(dom), Box::new(body))
    }

    pub fn refl(t: Tm) -> Tm {
        Tm::Refl(Box::new(t))
    }

    /// Splits an application spine into its head and arguments.
    pub fn spine(&self) -> (&Tm, Vec<&Tm>) {
        let mut args = Vec::new();
        let mut cur = self;
        while let Tm::App(f, a) = cur {
            args.push(&**a);
            cur = f;
        }
        args.reverse();
        (cur, args)
    }

    pub fn size(&self) -> usize {
        match self {
            Tm::Var(_) => 1,
            Tm::App(f, a) => 1 + f.size() + a.size(),
            Tm::Lam(_, d, b) => 1 + d.size() + b.size(),
            Tm::Refl(t) => 1 + t.size(),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        match self {
            Tm::Var(n) => {
                if !bound.contains(n) {
                    out.insert(n.clone());
                }
            }
            Tm::App(f, a) => {
                f.collect_free(bound, out);
                a.collect_free(bound, out);
            }
            Tm::Lam(x, d, b) => {
                d.collect_free(bound, out);
                bound.push(x.clone());
                b.collect_free(bound, out);
                bound.pop();
            }
            Tm::Refl(t) => t.collect_free(bound, out),
        }
    }

    /// Every name occurring in the term, free or bound.
    pub fn all_names(&self, out: &mut BTreeSet<Name>) {
        match self {
            Tm::Var(n) => {
                out.insert(n.clone());
            }
            Tm::App(f, a) => {
                f.all_names(out);
                a.all_names(out);
            }
            Tm::Lam(x, d, b) => {
                out.insert(x.clone());
                d.all_names(out);
                b.all_names(out);
            }
            Tm::Refl(t) => t.all_names(out),
        }
    }

    pub fn contains_lambda(&self) -> bool {
        match self {
            Tm::Var(_) => false,
            Tm::App(f, a) => f.contains_lambda() || a.contains_lambda(),
            Tm::Lam(..) => true,
            Tm::Refl(t) => t.contains_lambda(),
        }
    }

    pub fn subst(&self, x: &Name, s: &Tm) -> Tm {
        let mut map = BTreeMap::new();
        map.insert(x.clone(), s.clone());
        self.subst_many(&map)
    }

    /// Simultaneous capture-avoiding substitution.
    pub fn subst_many(&self, map: &BTreeMap<Name, Tm>) -> Tm {
        if map.is_empty() {
            return self.clone();
        }
        let mut fv = BTreeSet::new();
        for t in map.values() {
            fv.extend(t.free_vars());
        }
        self.subst_inner(map, &fv)
    }

    fn subst_inner(&self, map: &BTreeMap<Name, Tm>, fv: &BTreeSet<Name>) -> Tm {
        match self {
            Tm::Var(n) => map.get(n).cloned().unwrap_or_else(|| self.clone()),
            Tm::App(f, a) => Tm::app(f.subst_inner(map, fv), a.subst_inner(map, fv)),
            Tm::Lam(x, d, b) => {
                let d = d.subst_inner(map, fv);
                let (x, map) = binder_under(x, map, fv, |avoid| b.all_names(avoid));
                let b = b.subst_inner(&map, fv);
                Tm::Lam(x, Box::new(d), Box::new(b))
            }
            Tm::Refl(t) => Tm::refl(t.subst_inner(map, fv)),
        }
    }
}

/// Prepares the substitution to go under binder `x`: drops `x` from the
/// map and renames the binder if it would capture a free variable of the
/// substituted terms.
fn binder_under(
    x: &Name,
    map: &BTreeMap<Name, Tm>,
    fv: &BTreeSet<Name>,
    body_names: impl FnOnce(&mut BTreeSet<Name>),
) -> (Name, BTreeMap<Name, Tm>) {
    let mut inner = map.clone();
    inner.remove(x);
    if fv.contains(x) && !inner.is_empty() {
        let mut avoid = fv.clone();
        body_names(&mut avoid);
        avoid.extend(inner.keys().cloned());
        let y = fresh_name(x, &avoid);
        inner.insert(x.clone(), Tm::Var(y.clone()));
        (y, inner)
    } else {
        (x.clone(), inner)
    }
}

impl Ty {
    pub fn pi(x: impl Into<Name>, dom: Tm, cod: Ty) -> Ty {
        Ty::Pi(x.into(), dom, Box::new(cod))
    }

    pub fn eq(l: Tm, r: Tm, at: Ty) -> Ty {
        Ty::Eq(l, r, Box::new(at))
    }

    /// Peels the leading Π binders: returns `(binders, codomain)`.
    pub fn peel(&self) -> (Vec<(Name, Tm)>, &Ty) {
        let mut binders = Vec::new();
        let mut cur = self;
        while let Ty::Pi(x, d, b) = cur {
            binders.push((x.clone(), d.clone()));
            cur = b;
        }
        (binders, cur)
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        match self {
            Ty::Set => {}
            Ty::Small(t) => t.collect_free(bound, out),
            Ty::Pi(x, d, b) => {
                d.collect_free(bound, out);
                bound.push(x.clone());
                b.collect_free(bound, out);
                bound.pop();
            }
            Ty::Eq(l, r, a) => {
                l.collect_free(bound, out);
                r.collect_free(bound, out);
                a.collect_free(bound, out);
            }
        }
    }

    pub fn all_names(&self, out: &mut BTreeSet<Name>) {
        match self {
            Ty::Set => {}
            Ty::Small(t) => t.all_names(out),
            Ty::Pi(x, d, b) => {
                out.insert(x.clone());
                d.all_names(out);
                b.all_names(out);
            }
            Ty::Eq(l, r, a) => {
                l.all_names(out);
                r.all_names(out);
                a.all_names(out);
            }
        }
    }

    pub fn subst(&self, x: &Name, s: &Tm) -> Ty {
        let mut map = BTreeMap::new();
        map.insert(x.clone(), s.clone());
        self.subst_many(&map)
    }

    pub fn subst_many(&self, map: &BTreeMap<Name, Tm>) -> Ty {
        if map.is_empty() {
            return self.clone();
        }
        let mut fv = BTreeSet::new();
        for t in map.values() {
            fv.extend(t.free_vars());
        }
        self.subst_inner(map, &fv)
    }

    fn subst_inner(&self, map: &BTreeMap<Name, Tm>, fv: &BTreeSet<Name>) -> Ty {
        match self {
            Ty::Set => Ty::Set,
            Ty::Small(t) => Ty::Small(t.subst_inner(map, fv)),
            Ty::Pi(x, d, b) => {
                let d = d.subst_inner(map, fv);
                let (x, map) = binder_under(x, map, fv, |avoid| b.all_names(avoid));
                Ty::Pi(x, d, Box::new(b.subst_inner(&map, fv)))
            }
            Ty::Eq(l, r, a) => Ty::Eq(
                l.subst_inner(map, fv),
                r.subst_inner(map, fv),
                Box::new(a.subst_inner(map, fv)),
            ),
        }
    }
}

// Alpha-equivalence: bound variables are compared by binding depth.

#[derive(Default)]
struct AlphaEnv {
    left: Vec<Name>,
    right: Vec<Name>,
}

impl AlphaEnv {
    fn lookup(stack: &[Name], n: &Name) -> Option<usize> {
        stack.iter().rposition(|m| m == n)
    }

    fn var_eq(&self, a: &Name, b: &Name) -> bool {
        match (Self::lookup(&self.left, a), Self::lookup(&self.right, b)) {
            (Some(i), Some(j)) => i == j,
            (None, None) => a == b,
            _ => false,
        }
    }

    fn tm(&mut self, a: &Tm, b: &Tm) -> bool {
        match (a, b) {
            (Tm::Var(x), Tm::Var(y)) => self.var_eq(x, y),
            (Tm::App(f, a), Tm::App(g, b)) => self.tm(f, g) && self.tm(a, b),
            (Tm::Lam(x, d, s), Tm::Lam(y, e, t)) => {
                if !self.tm(d, e) {
                    return false;
                }
                self.left.push(x.clone());
                self.right.push(y.clone());
                let r = self.tm(s, t);
                self.left.pop();
                self.right.pop();
                r
            }
            (Tm::Refl(s), Tm::Refl(t)) => self.tm(s, t),
            _ => false,
        }
    }

    fn ty(&mut self, a: &Ty, b: &Ty) -> bool {
        match (a, b) {
            (Ty::Set, Ty::Set) => true,
            (Ty::Small(s), Ty::Small(t)) => self.tm(s, t),
            (Ty::Pi(x, d, s), Ty::Pi(y, e, t)) => {
                if !self.tm(d, e) {
                    return false;
                }
                self.left.push(x.clone());
                self.right.push(y.clone());
                let r = self.ty(s, t);
                self.left.pop();
                self.right.pop();
                r
            }
            (Ty::Eq(l, r, s), Ty::Eq(m, q, t)) => self.tm(l, m) && self.tm(r, q) && self.ty(s, t),
            _ => false,
        }
    }
}

pub fn alpha_eq_tm(a: &Tm, b: &Tm) -> bool {
    AlphaEnv::default().tm(a, b)
}

pub fn alpha_eq_ty(a: &Ty, b: &Ty) -> bool {
    AlphaEnv::default().ty(a, b)
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Decl {
    pub name: Name,
    pub ty: Ty,
}

impl Decl {
    pub fn new(name: impl Into<Name>, ty: Ty) -> Decl {
        Decl { name: name.into(), ty }
    }
}

/// An ordered context of declarations.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Theory {
    pub decls: Vec<Decl>,
}

impl Theory {
    pub fn new(decls: Vec<Decl>) -> Theory {
        Theory { decls }
    }

    pub fn len(&self) -> usize {
        self.decls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decls.is_empty()
    }

    pub fn index_of(&self, name: &Name) -> Option<usize> {
        self.decls.iter().position(|d| &d.name == name)
    }

    pub fn get(&self, name: &Name) -> Option<&Decl> {
        self.decls.iter().find(|d| &d.name == name)
    }

    /// Every name declared or bound anywhere in the theory.
    pub fn all_names(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        for d in &self.decls {
            out.insert(d.name.clone());
            d.ty.all_names(&mut out);
        }
        out
    }

    pub fn alpha_eq(&self, other: &Theory) -> bool {
        self.decls.len() == other.decls.len()
            && self
                .decls
                .iter()
                .zip(&other.decls)
                .all(|(a, b)| a.name == b.name && alpha_eq_ty(&a.ty, &b.ty))
    }
}

/// A morphism of theories: one term of the `source` context for each
/// declaration of `target`, in target order.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Substitution {
    pub source: Theory,
    pub target: Theory,
    pub assignments: Vec<Tm>,
}

impl Substitution {
    pub fn identity(th: &Theory) -> Substitution {
        Substitution {
            source: th.clone(),
            target: th.clone(),
            assignments: th.decls.iter().map(|d| Tm::Var(d.name.clone())).collect(),
        }
    }

    /// Maps each target name to its assignment.
    pub fn as_map(&self) -> BTreeMap<Name, Tm> {
        self.target
            .decls
            .iter()
            .zip(&self.assignments)
            .map(|(d, t)| (d.name.clone(), t.clone()))
            .collect()
    }

    /// The target type of the `i`-th declaration with earlier target
    /// variables replaced by their assignments.
    pub fn expected_type(&self, i: usize) -> Ty {
        let map: BTreeMap<Name, Tm> = self.target.decls[..i]
            .iter()
            .zip(&self.assignments)
            .map(|(d, t)| (d.name.clone(), t.clone()))
            .collect();
        self.target.decls[i].ty.subst_many(&map)
    }
}

// Canonical printing. Whitespace and parenthesisation are fixed so that
// every AST has exactly one printed form.

fn write_atom(t: &Tm, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Tm::Var(n) => write!(f, "{n}"),
        _ => write!(f, "({t})"),
    }
}

impl fmt::Display for Tm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tm::Var(n) => write!(f, "{n}"),
            Tm::App(..) => {
                let (head, args) = self.spine();
                write_atom(head, f)?;
                for a in args {
                    f.write_str(" ")?;
                    write_atom(a, f)?;
                }
                Ok(())
            }
            Tm::Lam(x, d, b) => write!(f, "\\{x} : {d}. {b}"),
            Tm::Refl(t) => {
                f.write_str("refl ")?;
                write_atom(t, f)
            }
        }
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Set => f.write_str("Set"),
            Ty::Small(t) => write!(f, "{t}"),
            Ty::Pi(x, d, b) => write!(f, "({x} : {d}) {b}"),
            Ty::Eq(l, r, a) => write!(f, "{l} = {r} : {a}"),
        }
    }
}

impl fmt::Display for Decl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} : {};", self.name, self.ty)
    }
}

impl fmt::Display for Theory {
    /// One declaration per line, each terminated by a newline.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.decls {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Prints the `NAME := term;` body of a substitution file.
pub fn print_assignments(s: &Substitution) -> String {
    let mut out = String::new();
    for (d, t) in s.target.decls.iter().zip(&s.assignments) {
        out.push_str(&format!("{} := {};\n", d.name, t));
    }
    out
}

/// Prints a term in prefix notation without parentheses, e.g.
/// `mul e mul e e`. Only meaningful for first-order terms; used for labels.
pub fn polish(t: &Tm) -> String {
    match t {
        Tm::Var(n) => n.to_string(),
        _ => {
            let (head, args) = t.spine();
            let mut out = match head {
                Tm::Var(n) => n.to_string(),
                other => format!("{other}"),
            };
            for a in args {
                out.push(' ');
                out.push_str(&polish(a));
            }
            out
        }
    }
}
