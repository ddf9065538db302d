//! The coreflection between models of a theory and models of its
//! two-sortification: the family of carriers of a model, the left adjoint
//! (sortification of models), the right adjoint (the coreflector's image),
//! the description of translated models as cartesian family maps, and a
//! hom-set check of the adjunction.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::ModelError;
use crate::kernel::DeclClass;
use crate::models::{apply_subst_model, apply_subst_morphism, check_model, enumerate_morphisms, tag, FiniteModel, Leaf, Value};
use crate::sortify::TranslationResult;
use crate::syntax::{fresh_name, Name, Tm, Ty};

/// A set-indexed family of finite sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyObject {
    /// Sorted index labels.
    pub u: Vec<String>,
    pub el: BTreeMap<String, Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyMorphism {
    pub base: BTreeMap<String, String>,
    pub fibers: BTreeMap<String, BTreeMap<String, String>>,
    pub cartesian: bool,
}

/// A model together with a cartesian map from its family of carriers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommaObject {
    pub model: FiniteModel,
    pub family: FamilyObject,
    pub map: FamilyMorphism,
}

/// Every carrier of `m`, tagged `S(i1,...,in)` by sort and index labels.
pub fn family_of_model(m: &FiniteModel) -> Result<FamilyObject, ModelError> {
    let decls = m.theory().decls();
    let mut el = BTreeMap::new();
    for addr in m.addresses()? {
        el.insert(tag(&decls[addr.0].name, &addr.1), m.carrier_at(&addr)?.to_vec());
    }
    Ok(FamilyObject {
        u: el.keys().cloned().collect(),
        el,
    })
}

/// Sends every carrier tag of `m` to the least tag it is identified with by
/// the sort equations of the theory.
pub fn sort_classes(m: &FiniteModel) -> Result<BTreeMap<String, String>, ModelError> {
    let th = m.theory();
    let decls = th.decls();
    let tags: Vec<String> = m.addresses()?.iter().map(|a| tag(&decls[a.0].name, &a.1)).collect();
    let index: BTreeMap<&str, usize> = tags.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut parent: Vec<usize> = (0..tags.len()).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for (i, d) in decls.iter().enumerate() {
        if th.class(i) != DeclClass::SortEquation {
            continue;
        }
        let (mut binders, cod) = d.ty.peel();
        let Ty::Eq(l, r, at) = cod else { continue };
        // `l = r : (x : A) ... Set` compares `l x ...` with `r x ...`; rename
        // the inner binders apart from everything in the declaration.
        let mut avoid = BTreeSet::new();
        d.ty.all_names(&mut avoid);
        let (inner, _) = at.peel();
        let mut ren = BTreeMap::new();
        let mut args = Vec::new();
        for (x, a) in inner {
            let y = fresh_name(&x, &avoid);
            avoid.insert(y.clone());
            binders.push((y.clone(), a.subst_many(&ren)));
            ren.insert(x, Tm::Var(y.clone()));
            args.push(Tm::Var(y));
        }
        let l = Tm::apps(l.clone(), args.iter().cloned());
        let r = Tm::apps(r.clone(), args);
        let names: Vec<Name> = binders.iter().map(|(x, _)| x.clone()).collect();
        for labels in m.tuples(&binders)? {
            let env: Vec<(Name, Value)> = names.iter().cloned().zip(labels.into_iter().map(Value::Elem)).collect();
            let (la, ra) = (m.address(&l, &env)?, m.address(&r, &env)?);
            let (lt, rt) = (tag(&decls[la.0].name, &la.1), tag(&decls[ra.0].name, &ra.1));
            let (a, b) = (find(&mut parent, index[lt.as_str()]), find(&mut parent, index[rt.as_str()]));
            // The least tag is the root.
            let (lo, hi) = if tags[a] <= tags[b] { (a, b) } else { (b, a) };
            parent[hi] = lo;
        }
    }
    Ok((0..tags.len()).map(|i| (tags[i].clone(), tags[find(&mut parent, i)].clone())).collect())
}

fn family_values(f: &FamilyObject) -> (Value, Value) {
    let el = f
        .u
        .iter()
        .map(|u| (u.clone(), Value::Set(f.el.get(u).cloned().unwrap_or_default())))
        .collect();
    (Value::Set(f.u.clone()), Value::Fn(el))
}

fn family_of_values(u: &Value, el: &Value) -> Result<FamilyObject, ModelError> {
    let (Value::Set(u), Value::Fn(table)) = (u, el) else {
        return Err(ModelError::Invariant("U and El do not have family shape".into()));
    };
    let mut out = BTreeMap::new();
    for (k, v) in table {
        let Value::Set(c) = v else {
            return Err(ModelError::Invariant(format!("El at {k} is not a carrier")));
        };
        out.insert(k.clone(), c.clone());
    }
    Ok(FamilyObject { u: u.clone(), el: out })
}

/// Builds the translated model whose sorts are sent along `base`.
fn assemble(tr: &TranslationResult, model: &FiniteModel, family: &FamilyObject, base: &BTreeMap<String, String>) -> Result<FiniteModel, ModelError> {
    let (u, el) = family_values(family);
    let mut values = Vec::with_capacity(model.values().len() + 2);
    values.push(u);
    values.push(el);
    let decls = tr.original.decls();
    for (i, d) in decls.iter().enumerate() {
        if tr.original.class(i) == DeclClass::Sort {
            let prefix = FiniteModel::new(tr.original.clone(), model.values()[..i].to_vec());
            let mut missing = None;
            let v = prefix.build_value(&d.ty, &mut |leaf, env| match leaf {
                Leaf::Set => {
                    let labels: Vec<String> = env.iter().map(|(_, l)| l.clone()).collect();
                    let t = tag(&d.name, &labels);
                    match base.get(&t) {
                        Some(u) => Some(Value::Elem(u.clone())),
                        None => {
                            missing = Some(t);
                            None
                        }
                    }
                }
                Leaf::Elem(_) => None,
            })?;
            match v {
                Some(v) => values.push(v),
                None => {
                    return Err(ModelError::Invariant(format!(
                        "map has no image for {}",
                        missing.unwrap_or_default()
                    )))
                }
            }
        } else {
            values.push(model.values()[i].clone());
        }
    }
    Ok(FiniteModel::new(tr.translated.clone(), values))
}

/// The left adjoint: a model of the translated theory whose family is the
/// family of carriers of `m`, with carriers identified by a sort equation
/// sharing one element of `U` (the least tag).
pub fn sortify_model(tr: &TranslationResult, m: &FiniteModel) -> Result<FiniteModel, ModelError> {
    let all = family_of_model(m)?;
    let base = sort_classes(m)?;
    let u: Vec<String> = base.values().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let el = u.iter().map(|t| (t.clone(), all.el[t].clone())).collect();
    let family = FamilyObject { u, el };
    let out = assemble(tr, m, &family, &base)?;
    check_model(&out)?;
    Ok(out)
}

/// The right adjoint: evaluates the coreflector substitution.
pub fn desortify_model(tr: &TranslationResult, n: &FiniteModel) -> Result<FiniteModel, ModelError> {
    apply_subst_model(&tr.coreflector, &tr.original, n)
}

fn cartesian_check(c: &CommaObject) -> Result<(), ModelError> {
    let own = family_of_model(&c.model)?;
    if !c.map.cartesian {
        return Err(ModelError::Invariant("map is not flagged cartesian".into()));
    }
    if c.map.base.keys().ne(own.u.iter()) {
        return Err(ModelError::Invariant("map is not defined on exactly the model's carriers".into()));
    }
    for (t, u) in &c.map.base {
        let fiber = c
            .family
            .el
            .get(u)
            .filter(|_| c.family.u.binary_search(u).is_ok())
            .ok_or_else(|| ModelError::Invariant(format!("{t} is sent to {u}, which is not in the family")))?;
        if fiber != &own.el[t] {
            return Err(ModelError::Invariant(format!("the fiber over {u} differs from the carrier at {t}")));
        }
        let id = c.map.fibers.get(t);
        let identity = id.is_some_and(|f| f.len() == fiber.len() && f.iter().all(|(x, y)| x == y && fiber.binary_search(x).is_ok()));
        if !identity {
            return Err(ModelError::Invariant(format!("fiber map at {t} is not the identity")));
        }
    }
    if c.map.fibers.len() != c.map.base.len() {
        return Err(ModelError::Invariant("fiber maps do not match the base map".into()));
    }
    Ok(())
}

/// Describes a translated model as its right-adjoint image together with a
/// cartesian map into its own family.
pub fn comma_of_model(tr: &TranslationResult, n: &FiniteModel) -> Result<CommaObject, ModelError> {
    let model = desortify_model(tr, n)?;
    let family = family_of_values(&n.values()[0], &n.values()[1])?;
    let mut base = BTreeMap::new();
    let mut fibers = BTreeMap::new();
    let decls = tr.original.decls();
    for addr in model.addresses()? {
        let t = tag(&decls[addr.0].name, &addr.1);
        let Value::Elem(u) = n.values()[addr.0 + 2].apply(&addr.1)? else {
            return Err(ModelError::Invariant(format!("sort {} is not U-valued", decls[addr.0].name)));
        };
        let id = model.carrier_at(&addr)?.iter().map(|x| (x.clone(), x.clone())).collect();
        base.insert(t.clone(), u.clone());
        fibers.insert(t, id);
    }
    let c = CommaObject {
        model,
        family,
        map: FamilyMorphism {
            base,
            fibers,
            cartesian: true,
        },
    };
    cartesian_check(&c)?;
    Ok(c)
}

/// Inverse of [`comma_of_model`].
pub fn model_of_comma(tr: &TranslationResult, c: &CommaObject) -> Result<FiniteModel, ModelError> {
    cartesian_check(c)?;
    let out = assemble(tr, &c.model, &c.family, &c.map.base)?;
    check_model(&out).map_err(|e| ModelError::Invariant(format!("assembled model is invalid: {e}")))?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjunctionReport {
    /// Morphisms from the sortified model to `n`.
    pub left: usize,
    /// Morphisms from `m` to the desortified `n`.
    pub right: usize,
    /// For each left morphism, the index of its image among the right ones.
    pub image: Vec<Option<usize>>,
    pub injective: bool,
    pub surjective: bool,
    /// Whether desortifying the sortified `m` gives back `m` exactly.
    pub unit_is_identity: bool,
}

impl AdjunctionReport {
    pub fn is_bijection(&self) -> bool {
        self.injective && self.surjective
    }
}

/// Enumerates both hom-sets of the adjunction and checks that the image of
/// morphisms under the coreflector is a bijection between them.
pub fn adjunction_check(tr: &TranslationResult, m: &FiniteModel, n: &FiniteModel, cap: u128) -> Result<AdjunctionReport, ModelError> {
    let lm = sortify_model(tr, m)?;
    let rn = desortify_model(tr, n)?;
    let unit_is_identity = desortify_model(tr, &lm)? == *m;
    let left = enumerate_morphisms(&lm, n, cap)?;
    let right = enumerate_morphisms(m, &rn, cap)?;
    let mut image = Vec::with_capacity(left.len());
    for g in &left {
        let h = apply_subst_morphism(&tr.coreflector, &tr.original, g)?;
        image.push(right.iter().position(|r| r.components() == h.components() && r.source() == h.source()));
    }
    let mut hit = alloc::vec![0usize; right.len()];
    for i in image.iter().flatten() {
        hit[*i] += 1;
    }
    let injective = image.iter().all(Option::is_some) && hit.iter().all(|&k| k <= 1);
    let surjective = hit.iter().all(|&k| k >= 1);
    Ok(AdjunctionReport {
        left: left.len(),
        right: right.len(),
        image,
        injective,
        surjective,
        unit_is_identity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{check_theory, ConvBudget};
    use crate::models::DEFAULT_SEARCH_CAP;
    use crate::parse::parse_theory;
    use crate::sortify::{two_sortify_theory, FamPrefix};
    use alloc::string::ToString;
    use alloc::vec;

    const TG: &str = "V : Set; E : (x : V) (y : V) Set;
        T : (v1 : V) (v2 : V) (v3 : V) (e1 : E v1 v2) (e2 : E v2 v3) E v1 v3;";

    fn tr(src: &str) -> TranslationResult {
        let th = check_theory(&parse_theory(src).unwrap(), ConvBudget::default()).unwrap();
        two_sortify_theory(&th, &FamPrefix::default(), ConvBudget::default()).unwrap()
    }

    fn fnv<const N: usize>(entries: [(&str, Value); N]) -> Value {
        Value::Fn(entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    /// Vertices {a, b}, edge f : a → b.
    fn g2(t: &TranslationResult) -> FiniteModel {
        let th = t.original.clone();
        let edges = fnv([
            ("a", fnv([("a", Value::set(Vec::<String>::new())), ("b", Value::set(["f"]))])),
            ("b", fnv([("a", Value::set(Vec::<String>::new())), ("b", Value::set(Vec::<String>::new()))])),
        ]);
        let mut m = FiniteModel::new(th.clone(), vec![Value::set(["a", "b"]), edges]);
        let v = m.build_value(&th.decls()[2].ty, &mut |_, _| None).unwrap().unwrap();
        m.push(v);
        check_model(&m).unwrap();
        m
    }

    #[test]
    fn family_of_graph() {
        let t = tr(TG);
        let f = family_of_model(&g2(&t)).unwrap();
        assert_eq!(f.u, ["E(a,a)", "E(a,b)", "E(b,a)", "E(b,b)", "V()"]);
        assert_eq!(f.el["V()"], ["a", "b"]);
        assert_eq!(f.el["E(a,b)"], ["f"]);
    }

    #[test]
    fn strict_unit_and_comma_roundtrip() {
        let t = tr(TG);
        let m = g2(&t);
        let n = sortify_model(&t, &m).unwrap();
        assert_eq!(n.values()[2], Value::elem("V()"));
        assert_eq!(desortify_model(&t, &n).unwrap(), m);
        let c = comma_of_model(&t, &n).unwrap();
        assert!(c.map.base.iter().all(|(k, v)| k == v));
        assert_eq!(c.family, family_of_model(&m).unwrap());
        assert_eq!(model_of_comma(&t, &c).unwrap(), n);
    }

    #[test]
    fn set_and_pointed_set() {
        let t = tr("A : Set; a : A;");
        let m = FiniteModel::new(t.original.clone(), vec![Value::set(["x", "y"]), Value::elem("y")]);
        let n = sortify_model(&t, &m).unwrap();
        assert_eq!(n.values()[0], Value::set(["A()"]));
        assert_eq!(n.values()[2], Value::elem("A()"));
        assert_eq!(n.values()[3], Value::elem("y"));
        assert_eq!(desortify_model(&t, &n).unwrap(), m);
    }

    #[test]
    fn non_cartesian_maps_are_rejected() {
        let t = tr(TG);
        let n = sortify_model(&t, &g2(&t)).unwrap();
        let mut c = comma_of_model(&t, &n).unwrap();
        c.map.fibers.get_mut("V()").unwrap().insert("a".into(), "b".into());
        assert!(matches!(model_of_comma(&t, &c), Err(ModelError::Invariant(_))));
        let mut c = comma_of_model(&t, &n).unwrap();
        c.map.base.insert("V()".into(), "E(a,b)".into());
        assert!(matches!(model_of_comma(&t, &c), Err(ModelError::Invariant(_))));
    }

    #[test]
    fn hom_bijection_on_graph() {
        let t = tr(TG);
        let m = g2(&t);
        let n = sortify_model(&t, &m).unwrap();
        let r = adjunction_check(&t, &m, &n, DEFAULT_SEARCH_CAP).unwrap();
        assert!(r.unit_is_identity);
        assert_eq!(r.left, r.right);
        assert!(r.is_bijection());
        assert!(r.left >= 1);
    }

    #[test]
    fn sort_equations_share_an_element_of_u() {
        let t = tr("Con : Set; Ty : (G : Con) Set; Tm : (G : Con) (A : Ty G) Set;
            R : (G : Con) Ty G; e : (G : Con) Tm G (R G) = Ty G : Set;");
        let th = t.original.clone();
        let m = FiniteModel::new(
            th,
            vec![
                Value::set(["c"]),
                fnv([("c", Value::set(["n", "u"]))]),
                fnv([("c", fnv([("n", Value::set(["t"])), ("u", Value::set(["n", "u"]))]))]),
                fnv([("c", Value::elem("u"))]),
                fnv([("c", Value::Proof)]),
            ],
        );
        check_model(&m).unwrap();
        let classes = sort_classes(&m).unwrap();
        assert_eq!(classes["Ty(c)"], "Tm(c,u)");
        assert_eq!(classes["Tm(c,n)"], "Tm(c,n)");
        let n = sortify_model(&t, &m).unwrap();
        assert_eq!(n.values()[0], Value::set(["Con()", "Tm(c,n)", "Tm(c,u)"]));
        assert_eq!(desortify_model(&t, &n).unwrap(), m);
        let c = comma_of_model(&t, &n).unwrap();
        assert_eq!(model_of_comma(&t, &c).unwrap(), n);
        let r = adjunction_check(&t, &m, &n, DEFAULT_SEARCH_CAP).unwrap();
        assert!(r.unit_is_identity && r.is_bijection());
    }

    #[test]
    fn empty_theory() {
        let t = tr("");
        let m = FiniteModel::new(t.original.clone(), vec![]);
        let n = sortify_model(&t, &m).unwrap();
        assert_eq!(n.values(), [Value::Set(vec![]), Value::Fn(BTreeMap::new())]);
        let r = adjunction_check(&t, &m, &n, DEFAULT_SEARCH_CAP).unwrap();
        assert_eq!((r.left, r.right), (1, 1));
        assert!(r.is_bijection());
    }
}
