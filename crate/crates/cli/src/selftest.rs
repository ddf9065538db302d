//! The acceptance checks, run over the bundled corpus.

use std::path::Path;

use twosort_core::coreflect::{adjunction_check, comma_of_model, desortify_model, model_of_comma, sortify_model};
use twosort_core::initial::{initial_model_bounded, initial_morphism};
use twosort_core::kernel::Verdict;
use twosort_core::models::{enumerate_morphisms, FiniteModel, Value, DEFAULT_SEARCH_CAP};
use twosort_core::sortify::{class_counts, is_family_gat, pushforward, two_sortify_subst, two_sortify_theory, FamPrefix, TranslationResult};
use twosort_core::{
    check_substitution, compose_substitutions, conv_substitutions, conv_tm, conv_ty, infer_term, CheckedTheory, ConvBudget, DeclClass, ModelError, Name, Substitution, Tm, Ty,
};

use crate::corpus::Corpus;
use crate::error::CliError;
use crate::files::{comma_to_json, load_comma, load_theory, print_json, read_text, write_model};
use crate::random::random_models;

pub const TITLES: [&str; 10] = [
    "translation golden test",
    "sort-equation elimination",
    "coreflector well-typedness",
    "strict coreflection roundtrip",
    "comma isomorphism",
    "adjunction hom-bijection",
    "pushforward rows",
    "initial models",
    "naturality of the coreflector",
    "semantic soundness",
];

#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{verdict}] criterion {:>2}: {} ({})", self.id, self.title, self.detail)
    }
}

pub struct Ctx {
    pub corpus: Corpus,
    pub budget: ConvBudget,
    pub cap: u128,
    /// Random models per theory for the roundtrip check.
    pub random: usize,
}

impl Ctx {
    pub fn new(dir: &Path) -> Result<Ctx, CliError> {
        let budget = ConvBudget::default();
        Ok(Ctx {
            corpus: Corpus::load(dir, budget)?,
            budget,
            cap: DEFAULT_SEARCH_CAP,
            random: 50,
        })
    }
}

type Check = Result<String, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

pub fn translate(th: &CheckedTheory, budget: ConvBudget) -> Result<TranslationResult, CliError> {
    let prefix = FamPrefix::default().fresh_for(&[th.theory()]);
    two_sortify_theory(th, &prefix, budget).map_err(|e| CliError::kernel("translation", e))
}

fn translated_ref(tr: &TranslationResult) -> String {
    tr.translated.theory().to_string()
}

fn golden(ctx: &Ctx, rel: &str, got: &str) -> Result<(), String> {
    let want = read_text(&ctx.corpus.path(rel)).map_err(err)?;
    if want == got {
        Ok(())
    } else {
        Err(format!("{rel} differs:\n--- expected\n{want}--- got\n{got}"))
    }
}

fn c1(ctx: &Ctx) -> Check {
    for name in ["transitive_graphs", "pointed_set", "empty"] {
        let tr = translate(&ctx.corpus.theory(name).theory, ctx.budget).map_err(err)?;
        golden(ctx, &format!("expected/translated/{name}.gat"), &translated_ref(&tr))?;
    }
    let empty = translate(&ctx.corpus.theory("empty").theory, ctx.budget).map_err(err)?;
    if translated_ref(&empty) != FamPrefix::default().fam().to_string() {
        return Err("the translation of the empty theory is not the theory of families".into());
    }
    Ok("3 translations byte-identical".into())
}

fn c2(ctx: &Ctx) -> Check {
    let th = &ctx.corpus.theory("russell").theory;
    let before = th.count(DeclClass::SortEquation);
    if before == 0 {
        return Err("the bundled theory has no sort equation".into());
    }
    let tr = translate(th, ctx.budget).map_err(err)?;
    let after = class_counts(&tr.translated)
        .iter()
        .find(|(c, _)| *c == DeclClass::SortEquation)
        .map_or(0, |(_, n)| *n);
    if after != 0 {
        return Err(format!("{after} sort equations remain"));
    }
    if !is_family_gat(&tr.translated, &tr.prefix) {
        return Err("translation is not a family theory".into());
    }
    Ok(format!("{before} sort equation eliminated, family theory"))
}

fn c3(ctx: &Ctx) -> Check {
    for t in &ctx.corpus.theories {
        let tr = translate(&t.theory, ctx.budget).map_err(err)?;
        check_substitution(&tr.coreflector, ctx.budget).map_err(|e| format!("{}: {e}", t.name))?;
    }
    Ok(format!("{} coreflectors check", ctx.corpus.theories.len()))
}

fn c4(ctx: &Ctx) -> Check {
    let mut n = 0;
    for (k, t) in ctx.corpus.theories.iter().enumerate() {
        let tr = translate(&t.theory, ctx.budget).map_err(err)?;
        let random = random_models(&t.theory, 1000 + k as u64, ctx.random, 3);
        if random.len() < ctx.random {
            return Err(format!("{}: only {} random models could be generated", t.name, random.len()));
        }
        let models = t.models.iter().map(|(_, m)| m).chain(random.iter());
        for m in models {
            let back = sortify_model(&tr, m)
                .and_then(|l| desortify_model(&tr, &l))
                .map_err(|e| format!("{}: {e}", t.name))?;
            if write_model(&back, "") != write_model(m, "") || back != *m {
                return Err(format!("{}: roundtrip changed\n{}", t.name, write_model(m, "")));
            }
            n += 1;
        }
    }
    Ok(format!("{n} models roundtrip byte-exactly"))
}

fn c5(ctx: &Ctx) -> Check {
    let mut n = 0;
    for t in &ctx.corpus.theories {
        let tr = translate(&t.theory, ctx.budget).map_err(err)?;
        let tref = translated_ref(&tr);
        for (name, m) in &t.models {
            let tm = sortify_model(&tr, m).map_err(err)?;
            let c = comma_of_model(&tr, &tm).map_err(err)?;
            let back = model_of_comma(&tr, &c).map_err(err)?;
            if write_model(&back, &tref) != write_model(&tm, &tref) {
                return Err(format!("{}/{name}: model -> comma -> model changed", t.name));
            }
            let again = comma_of_model(&tr, &back).map_err(err)?;
            if print_json(&comma_to_json(&again, "")) != print_json(&comma_to_json(&c, "")) {
                return Err(format!("{}/{name}: comma -> model -> comma changed", t.name));
            }
            n += 1;
        }
    }
    let tg = ctx.corpus.theory("transitive_graphs");
    let tr = translate(&tg.theory, ctx.budget).map_err(err)?;
    let c = load_comma(&ctx.corpus.path("comma/example12.comma"), Some(&tg.theory), ctx.budget).map_err(err)?;
    let m = model_of_comma(&tr, &c).map_err(err)?;
    golden(ctx, "expected/example12.model", &write_model(&m, &translated_ref(&tr)))?;
    let c2 = comma_of_model(&tr, &m).map_err(err)?;
    if c2 != c {
        return Err("example comma object does not come back from its model".into());
    }
    Ok(format!("{n} corpus models both ways, hand-built comma object matches"))
}

fn c6(ctx: &Ctx) -> Check {
    let (mut pairs, mut skipped, mut homs) = (0, 0, 0);
    for t in &ctx.corpus.theories {
        let tr = translate(&t.theory, ctx.budget).map_err(err)?;
        let mut targets = Vec::new();
        for (_, m) in &t.models {
            targets.push(sortify_model(&tr, m).map_err(err)?);
        }
        if t.name == "transitive_graphs" {
            let c = load_comma(&ctx.corpus.path("comma/example12.comma"), Some(&t.theory), ctx.budget).map_err(err)?;
            targets.push(model_of_comma(&tr, &c).map_err(err)?);
        }
        for (name, m) in &t.models {
            for (j, n) in targets.iter().enumerate() {
                match adjunction_check(&tr, m, n, ctx.cap) {
                    Ok(r) => {
                        if !r.unit_is_identity {
                            return Err(format!("{}/{name}: unit is not the identity", t.name));
                        }
                        if r.left != r.right || !r.is_bijection() {
                            return Err(format!(
                                "{}/{name} against target {j}: |Hom(L m, n)| = {}, |Hom(m, R n)| = {}, bijective = {}",
                                t.name,
                                r.left,
                                r.right,
                                r.is_bijection()
                            ));
                        }
                        pairs += 1;
                        homs += r.left;
                    }
                    Err(ModelError::SearchSpaceExceeded { .. }) => skipped += 1,
                    Err(e) => return Err(format!("{}/{name}: {e}", t.name)),
                }
            }
        }
    }
    if pairs == 0 {
        return Err("no pair fits under the search cap".into());
    }
    Ok(format!("{pairs} pairs, {homs} morphisms matched, {skipped} pairs above the cap"))
}

fn c7(ctx: &Ctx) -> Check {
    let a = Name::new("A").expect("valid name");
    for (src, want) in [
        ("table1/b.gat", "expected/pushforward/b.gat"),
        ("table1/pointed_b.gat", "expected/pushforward/pointed_b.gat"),
        ("theories/transitive_graphs.gat", "expected/pushforward/transitive_graphs.gat"),
    ] {
        let th = load_theory(&ctx.corpus.path(src), ctx.budget).map_err(err)?;
        let p = pushforward(&th, &a, ctx.budget).map_err(err)?;
        golden(ctx, want, &p.to_string())?;
    }
    Ok("3 rows byte-identical".into())
}

fn c8(ctx: &Ctx) -> Check {
    let mut homs = 0;
    for (name, depth, classes) in [("pointed_set", 3, 1), ("set", 3, 0), ("monoid", 5, 1)] {
        let t = ctx.corpus.theory(name);
        let r = initial_model_bounded(&t.theory, depth, ctx.budget).map_err(err)?;
        if !r.saturated {
            return Err(format!("{name}: not saturated at depth {depth}"));
        }
        if r.classes.len() != classes {
            return Err(format!("{name}: {} classes, expected {classes}", r.classes.len()));
        }
        if t.models.len() < 3 {
            return Err(format!("{name}: fewer than 3 bundled target models"));
        }
        for (mname, m) in &t.models {
            let h = initial_morphism(&r, m).map_err(|e| format!("{name}/{mname}: {e}"))?;
            let all = enumerate_morphisms(&r.model, m, ctx.cap).map_err(err)?;
            if all.len() != 1 || all[0].components() != h.components() {
                return Err(format!("{name}/{mname}: {} morphisms out of the initial model", all.len()));
            }
            homs += 1;
        }
    }
    Ok(format!("3 initial models, {homs} unique morphisms"))
}

fn same(a: &Substitution, b: &Substitution, budget: ConvBudget) -> Result<bool, String> {
    Ok(conv_substitutions(a, b, budget).map_err(err)? == Verdict::Equal)
}

fn c9(ctx: &Ctx) -> Check {
    let b = ctx.budget;
    let p = FamPrefix::default();
    let checked = |th: &twosort_core::Theory| {
        ctx.corpus
            .theories
            .iter()
            .find(|t| t.theory.theory().alpha_eq(th))
            .map(|t| t.theory.clone())
            .ok_or_else(|| "substitution endpoint is not a corpus theory".to_string())
    };
    let mut natural = 0;
    for (name, s) in &ctx.corpus.substitutions {
        let ts = two_sortify_subst(s, &p, b).map_err(err)?;
        let rd = translate(&checked(&s.source)?, b).map_err(err)?.coreflector;
        let rg = translate(&checked(&s.target)?, b).map_err(err)?.coreflector;
        let lhs = compose_substitutions(s, &rd).map_err(err)?;
        let rhs = compose_substitutions(&rg, &ts).map_err(err)?;
        if !same(&lhs, &rhs, b)? {
            return Err(format!("{name}: R after T(s) differs from s after R"));
        }
        natural += 1;
    }
    for t in &ctx.corpus.theories {
        let id = Substitution::identity(t.theory.theory());
        let tid = two_sortify_subst(&id, &p, b).map_err(err)?;
        let want = Substitution::identity(&tid.source);
        if !same(&tid, &want, b)? {
            return Err(format!("{}: T(id) is not the identity", t.name));
        }
    }
    let mut composites = 0;
    for (n1, s) in &ctx.corpus.substitutions {
        for (n2, u) in &ctx.corpus.substitutions {
            if !u.target.alpha_eq(&s.source) {
                continue;
            }
            let whole = two_sortify_subst(&compose_substitutions(s, u).map_err(err)?, &p, b).map_err(err)?;
            let parts = compose_substitutions(&two_sortify_subst(s, &p, b).map_err(err)?, &two_sortify_subst(u, &p, b).map_err(err)?).map_err(err)?;
            if !same(&whole, &parts, b)? {
                return Err(format!("T({n1} after {n2}) differs from T({n1}) after T({n2})"));
            }
            composites += 1;
        }
    }
    Ok(format!("{natural} substitutions natural, {} identities, {composites} composites", ctx.corpus.theories.len()))
}

fn small_type(th: &CheckedTheory, t: &Tm, b: ConvBudget) -> Result<Tm, String> {
    match infer_term(th, &[], t, b).map_err(err)? {
        Ty::Small(a) => Ok(a),
        other => Err(format!("`{t}` has type {other}")),
    }
}

fn label(m: &FiniteModel, t: &Tm) -> Result<String, String> {
    match m.eval(t, &[]).map_err(err)? {
        Value::Elem(l) => Ok(l),
        other => Err(format!("`{t}` evaluates to {other}")),
    }
}

fn c10(ctx: &Ctx) -> Check {
    let b = ctx.budget;
    let (mut squares, mut equal_pairs, mut unequal_pairs, mut undecided) = (0, 0, 0, 0);
    for t in &ctx.corpus.theories {
        let th = &t.theory;
        // evaluation commutes with every morphism between corpus models
        let r = initial_model_bounded(th, 4, b).map_err(err)?;
        let terms: Vec<&Tm> = r.classes.iter().flat_map(|c| c.members.iter()).collect();
        for (_, src) in &t.models {
            for (_, tgt) in &t.models {
                let homs = match enumerate_morphisms(src, tgt, ctx.cap) {
                    Ok(h) => h,
                    Err(ModelError::SearchSpaceExceeded { .. }) => continue,
                    Err(e) => return Err(err(e)),
                };
                for h in &homs {
                    for term in &terms {
                        let a = small_type(th, term, b)?;
                        let addr = src.address(&a, &[]).map_err(err)?;
                        let x = label(src, term)?;
                        if h.map(&addr, &x) != Some(label(tgt, term)?.as_str()) {
                            return Err(format!("{}: evaluation of `{term}` does not commute with a morphism", t.name));
                        }
                        squares += 1;
                    }
                }
            }
        }
        // verdicts against the semantics
        let r = initial_model_bounded(th, 7, b).map_err(err)?;
        let terms: Vec<&Tm> = r.classes.iter().flat_map(|c| c.members.iter()).collect();
        for (i, x) in terms.iter().enumerate() {
            for y in &terms[i + 1..] {
                let (ax, ay) = (small_type(th, x, b)?, small_type(th, y, b)?);
                if conv_ty(th, &[], &Ty::Small(ax.clone()), &Ty::Small(ay), b).map_err(err)? != Verdict::Equal {
                    continue;
                }
                match conv_tm(th, &[], x, y, &Ty::Small(ax), b).map_err(err)? {
                    Verdict::Equal => {
                        for (mname, m) in &t.models {
                            if label(m, x)? != label(m, y)? {
                                return Err(format!("{}/{mname}: `{x}` and `{y}` are convertible but evaluate apart", t.name));
                            }
                        }
                        equal_pairs += 1;
                    }
                    Verdict::Unequal => {
                        let a = small_type(th, x, b)?;
                        if conv_tm(th, &[], x, y, &Ty::Small(a), b.scaled(10)).map_err(err)? == Verdict::Equal {
                            return Err(format!("{}: `{x}` and `{y}` judged unequal, but equal with more fuel", t.name));
                        }
                        unequal_pairs += 1;
                    }
                    Verdict::Indeterminate => undecided += 1,
                }
            }
        }
    }
    Ok(format!(
        "{squares} naturality squares, {equal_pairs} equal and {unequal_pairs} unequal pairs confirmed, {undecided} indeterminate"
    ))
}

pub fn run_criterion(ctx: &Ctx, id: usize) -> Outcome {
    let f = [c1, c2, c3, c4, c5, c6, c7, c8, c9, c10][id - 1];
    let (passed, detail) = match f(ctx) {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    Outcome {
        id,
        title: TITLES[id - 1],
        passed,
        detail,
    }
}

pub fn run_all(ctx: &Ctx) -> Vec<Outcome> {
    (1..=TITLES.len()).map(|i| run_criterion(ctx, i)).collect()
}
