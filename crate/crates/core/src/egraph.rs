//! A typed e-graph with fueled equality saturation.
//!
//! Terms are β-normal, η-short and hash-consed as curried applications of
//! constants. Lambda bodies are entered by replacing the bound variable with
//! an internal constant `#k_d` (binding depth `k`, domain class `d`), so
//! alpha-equivalent lambdas share nodes. Every class carries the class of its
//! small type (when it has one) so that equation binders only ever match
//! elements of the right type.
//!
//! Context equations are used as rewrite rules in both directions. A
//! direction is skipped when either side contains a lambda.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::normalize::nf;
use crate::syntax::{Decl, Name, Tm, Ty};

pub type Id = usize;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Node {
    Const(Name),
    App(Id, Id),
    Lam(Name, Id, Id),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum TyKey {
    Set,
    Small(Id),
    Other,
}

#[derive(Clone, Debug)]
struct Class {
    nodes: Vec<Node>,
    ty: TyKey,
    repr: Tm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sat {
    /// The goal classes were merged.
    Merged,
    /// No rule application changes the graph any more.
    Saturated,
    /// Fuel ran out first.
    Exhausted,
}

#[derive(Clone, Debug)]
enum Pat {
    Var(usize),
    Const(Name),
    App(alloc::boxed::Box<Pat>, alloc::boxed::Box<Pat>),
}

/// A universally quantified equation `∀ vars. lhs = rhs` usable as a
/// rewrite in each direction listed in `dirs`.
#[derive(Clone, Debug)]
pub struct Rule {
    pub name: Name,
    vars: Vec<(Name, Tm)>,
    dirs: Vec<(Pat, Tm)>,
}

impl Rule {
    /// Builds the rule for an equation declaration, or `None` if the
    /// declaration is not an equation. Binders must already be distinct and
    /// fresh with respect to the globals.
    pub fn from_equation(name: &Name, binders: Vec<(Name, Tm)>, lhs: &Tm, rhs: &Tm) -> Rule {
        let (l, r) = (nf(lhs), nf(rhs));
        let mut dirs = Vec::new();
        if !l.contains_lambda() && !r.contains_lambda() {
            for (from, to) in [(&l, &r), (&r, &l)] {
                if let Some(p) = to_pat(from, &binders) {
                    dirs.push((p, to.clone()));
                }
            }
        }
        Rule {
            name: name.clone(),
            vars: binders,
            dirs,
        }
    }

    /// True if some direction could not be used.
    pub fn is_partial(&self) -> bool {
        self.dirs.len() < 2
    }
}

fn to_pat(t: &Tm, vars: &[(Name, Tm)]) -> Option<Pat> {
    match t {
        Tm::Var(n) => Some(match vars.iter().rposition(|(v, _)| v == n) {
            Some(i) => Pat::Var(i),
            None => Pat::Const(n.clone()),
        }),
        Tm::App(f, a) => Some(Pat::App(
            alloc::boxed::Box::new(to_pat(f, vars)?),
            alloc::boxed::Box::new(to_pat(a, vars)?),
        )),
        _ => None,
    }
}

pub struct EGraph<'g> {
    globals: &'g [Decl],
    consts: BTreeMap<Name, Ty>,
    parent: Vec<Id>,
    classes: Vec<Class>,
    memo: BTreeMap<Node, Id>,
    fuel: usize,
    exhausted: bool,
    changes: usize,
    pending: Vec<(Id, Id)>,
}

type Binding = Vec<Option<Id>>;

impl<'g> EGraph<'g> {
    /// `consts` gives the types of free local variables.
    pub fn new(globals: &'g [Decl], consts: BTreeMap<Name, Ty>, fuel: usize) -> Self {
        EGraph {
            globals,
            consts,
            parent: Vec::new(),
            classes: Vec::new(),
            memo: BTreeMap::new(),
            fuel,
            exhausted: false,
            changes: 0,
            pending: Vec::new(),
        }
    }

    pub fn find(&self, mut id: Id) -> Id {
        while self.parent[id] != id {
            id = self.parent[id];
        }
        id
    }

    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    /// Resets the remaining fuel. A graph that already ran out stays
    /// marked as exhausted.
    pub fn refuel(&mut self, fuel: usize) {
        self.fuel = fuel;
    }

    pub fn repr(&self, id: Id) -> &Tm {
        &self.classes[self.find(id)].repr
    }

    /// The class of the small type of `id`, if it is an element class.
    pub fn small_type(&self, id: Id) -> Option<Id> {
        match self.classes[self.find(id)].ty {
            TyKey::Small(t) => Some(self.find(t)),
            _ => None,
        }
    }

    pub fn roots(&self) -> impl Iterator<Item = Id> + '_ {
        (0..self.parent.len()).filter(move |&i| self.parent[i] == i)
    }

    pub fn same(&self, a: Id, b: Id) -> bool {
        self.find(a) == self.find(b)
    }

    fn spend(&mut self) {
        if self.fuel == 0 {
            self.exhausted = true;
        } else {
            self.fuel -= 1;
        }
    }

    fn lookup_ty(&self, n: &Name, locals: &[(Name, Ty)]) -> Option<Ty> {
        if let Some((_, t)) = locals.iter().rev().find(|(m, _)| m == n) {
            return Some(t.clone());
        }
        if let Some(t) = self.consts.get(n) {
            return Some(t.clone());
        }
        self.globals
            .iter()
            .rev()
            .find(|d| &d.name == n)
            .map(|d| d.ty.clone())
    }

    /// Type of a well-typed term, without checking.
    fn synth(&self, t: &Tm, locals: &mut Vec<(Name, Ty)>) -> Option<Ty> {
        match t {
            Tm::Var(n) => self.lookup_ty(n, locals),
            Tm::App(f, a) => match self.synth(f, locals)? {
                Ty::Pi(x, _, cod) => Some(cod.subst(&x, a)),
                _ => None,
            },
            Tm::Lam(x, d, b) => {
                locals.push((x.clone(), Ty::Small((**d).clone())));
                let bt = self.synth(b, locals);
                locals.pop();
                Some(Ty::pi(x.clone(), (**d).clone(), bt?))
            }
            Tm::Refl(s) => {
                let st = self.synth(s, locals)?;
                Some(Ty::eq((**s).clone(), (**s).clone(), st))
            }
        }
    }

    /// Inserts a term and returns its class.
    pub fn add(&mut self, t: &Tm) -> Id {
        let t = nf(t);
        self.add_at(&t, 0)
    }

    fn add_at(&mut self, t: &Tm, depth: usize) -> Id {
        match t {
            Tm::Var(n) => self.add_node(Node::Const(n.clone())),
            Tm::App(f, a) => {
                let f = self.add_at(f, depth);
                let a = self.add_at(a, depth);
                self.add_node(Node::App(f, a))
            }
            Tm::Lam(x, d, b) => {
                let d_id = self.add_at(d, depth);
                let d_id = self.find(d_id);
                let bound = Name::internal(&format!("#{depth}_{d_id}"));
                self.consts
                    .insert(bound.clone(), Ty::Small(self.classes[d_id].repr.clone()));
                let body = b.subst(x, &Tm::Var(bound.clone()));
                let b_id = self.add_at(&body, depth + 1);
                self.add_node(Node::Lam(bound, d_id, b_id))
            }
            // proofs are irrelevant: they all share one class
            Tm::Refl(_) => self.add_node(Node::Const(Name::internal("#proof"))),
        }
    }

    fn canon(&self, n: &Node) -> Node {
        match n {
            Node::Const(c) => Node::Const(c.clone()),
            Node::App(f, a) => Node::App(self.find(*f), self.find(*a)),
            Node::Lam(x, d, b) => Node::Lam(x.clone(), self.find(*d), self.find(*b)),
        }
    }

    fn add_node(&mut self, node: Node) -> Id {
        let node = self.canon(&node);
        if let Some(&id) = self.memo.get(&node) {
            return self.find(id);
        }
        let repr = match &node {
            Node::Const(c) => Tm::Var(c.clone()),
            Node::App(f, a) => Tm::app(self.classes[*f].repr.clone(), self.classes[*a].repr.clone()),
            Node::Lam(x, d, b) => Tm::lam(
                x.clone(),
                self.classes[*d].repr.clone(),
                self.classes[*b].repr.clone(),
            ),
        };
        let ty = match self.synth(&repr, &mut Vec::new()) {
            Some(Ty::Set) => TyKey::Set,
            Some(Ty::Small(s)) => {
                let s = nf(&s);
                if s.contains_lambda() {
                    TyKey::Other
                } else {
                    TyKey::Small(self.add_at(&s, 0))
                }
            }
            _ => TyKey::Other,
        };
        // the type insertion may have created this very node already
        let node = self.canon(&node);
        if let Some(&id) = self.memo.get(&node) {
            return self.find(id);
        }
        let id = self.classes.len();
        self.classes.push(Class {
            nodes: vec![node.clone()],
            ty,
            repr,
        });
        self.parent.push(id);
        self.memo.insert(node, id);
        self.changes += 1;
        self.spend();
        id
    }

    /// Records `a ≡ b`; congruence is restored by the next rebuild.
    pub fn union(&mut self, a: Id, b: Id) -> bool {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        self.spend();
        self.changes += 1;
        let (root, child) = if a < b { (a, b) } else { (b, a) };
        self.parent[child] = root;
        let moved = core::mem::take(&mut self.classes[child].nodes);
        self.classes[root].nodes.extend(moved);
        match (self.classes[root].ty, self.classes[child].ty) {
            (TyKey::Small(x), TyKey::Small(y)) => self.pending.push((x, y)),
            (TyKey::Other, other) => self.classes[root].ty = other,
            _ => {}
        }
        true
    }

    /// Restores the congruence invariant.
    pub fn rebuild(&mut self) {
        loop {
            while let Some((x, y)) = self.pending.pop() {
                self.union(x, y);
            }
            let mut memo: BTreeMap<Node, Id> = BTreeMap::new();
            let mut todo = Vec::new();
            for id in 0..self.classes.len() {
                if self.parent[id] != id {
                    continue;
                }
                let mut nodes: Vec<Node> = self.classes[id].nodes.iter().map(|n| self.canon(n)).collect();
                nodes.sort();
                nodes.dedup();
                for n in &nodes {
                    match memo.get(n) {
                        Some(&other) if other != id => todo.push((other, id)),
                        Some(_) => {}
                        None => {
                            memo.insert(n.clone(), id);
                        }
                    }
                }
                self.classes[id].nodes = nodes;
            }
            self.memo = memo;
            if todo.is_empty() && self.pending.is_empty() {
                break;
            }
            for (x, y) in todo {
                self.union(x, y);
            }
        }
    }

    fn ematch(&self, p: &Pat, id: Id, b: Binding, out: &mut Vec<Binding>) {
        let id = self.find(id);
        match p {
            Pat::Var(i) => match b[*i] {
                Some(j) if self.find(j) != id => {}
                Some(_) => out.push(b),
                None => {
                    let mut b = b;
                    b[*i] = Some(id);
                    out.push(b);
                }
            },
            Pat::Const(c) => {
                if self.classes[id].nodes.iter().any(|n| matches!(n, Node::Const(d) if d == c)) {
                    out.push(b);
                }
            }
            Pat::App(pf, pa) => {
                for n in &self.classes[id].nodes {
                    if let Node::App(f, a) = n {
                        let mut heads = Vec::new();
                        self.ematch(pf, *f, b.clone(), &mut heads);
                        for h in heads {
                            self.ematch(pa, *a, h, out);
                        }
                    }
                }
            }
        }
    }

    fn instantiate(&self, t: &Tm, vars: &[(Name, Tm)], b: &[Id]) -> Tm {
        let map: BTreeMap<Name, Tm> = vars
            .iter()
            .zip(b)
            .map(|((x, _), id)| (x.clone(), self.repr(*id).clone()))
            .collect();
        t.subst_many(&map)
    }

    /// Fills unbound variables with every class of the right type and
    /// checks the types of bound ones.
    fn complete(&mut self, vars: &[(Name, Tm)], b: &Binding, i: usize, acc: &mut Vec<Id>, out: &mut Vec<Vec<Id>>) {
        if i == vars.len() {
            out.push(acc.clone());
            return;
        }
        let dom = self.instantiate(&vars[i].1, &vars[..i], acc);
        let dom_id = self.add(&dom);
        let candidates: Vec<Id> = match b[i] {
            Some(id) => vec![id],
            None => self.roots().collect(),
        };
        for c in candidates {
            if self.small_type(c) == Some(self.find(dom_id)) {
                acc.push(self.find(c));
                self.complete(vars, b, i + 1, acc, out);
                acc.pop();
            }
        }
    }

    /// Runs equality saturation until `goal` is merged, nothing changes, or
    /// fuel runs out.
    pub fn saturate(&mut self, rules: &[Rule], goal: Option<(Id, Id)>) -> Sat {
        loop {
            self.rebuild();
            if let Some((a, b)) = goal {
                if self.same(a, b) {
                    return Sat::Merged;
                }
            }
            if self.exhausted {
                return Sat::Exhausted;
            }
            let before = self.changes;
            let mut found = Vec::new();
            for (ri, rule) in rules.iter().enumerate() {
                for (di, (lhs, _)) in rule.dirs.iter().enumerate() {
                    for id in self.roots().collect::<Vec<_>>() {
                        let mut bs = Vec::new();
                        self.ematch(lhs, id, vec![None; rule.vars.len()], &mut bs);
                        for b in bs {
                            found.push((ri, di, id, b));
                        }
                    }
                }
            }
            for (ri, di, id, b) in found {
                let rule = &rules[ri];
                let mut full = Vec::new();
                self.complete(&rule.vars, &b, 0, &mut Vec::new(), &mut full);
                for inst in full {
                    let rhs = self.instantiate(&rule.dirs[di].1, &rule.vars, &inst);
                    let r = self.add(&rhs);
                    self.union(id, r);
                    if self.exhausted {
                        break;
                    }
                }
                if self.exhausted {
                    break;
                }
            }
            self.rebuild();
            if let Some((a, b)) = goal {
                if self.same(a, b) {
                    return Sat::Merged;
                }
            }
            if self.exhausted {
                return Sat::Exhausted;
            }
            if self.changes == before {
                return Sat::Saturated;
            }
        }
    }
}
