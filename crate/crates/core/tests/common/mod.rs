//! Random small theories and models, driven by a byte string so proptest can
//! shrink them.

#![allow(dead_code)]

use std::collections::BTreeMap;

use proptest::prelude::*;
use twosort_core::models::{check_model, FiniteModel, Leaf, Value};
use twosort_core::{check_theory, parse_theory, CheckedTheory, ConvBudget};

pub struct Choices<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Choices<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Choices { bytes, pos: 0 }
    }

    /// A number below `n` (0 once the bytes run out).
    pub fn below(&mut self, n: usize) -> usize {
        let b = self.bytes.get(self.pos).copied().unwrap_or(0);
        self.pos += 1;
        if n == 0 {
            0
        } else {
            b as usize % n
        }
    }

    pub fn flip(&mut self) -> bool {
        self.below(2) == 1
    }
}

pub fn bytes(len: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(any::<u8>(), len)
}

/// Source text of a small well-typed theory: one to three base sorts, up to
/// two sorts indexed over the first, operations between them, projection and
/// idempotence equations, and possibly a sort equation between the indexed
/// sorts.
pub fn theory_source(c: &mut Choices) -> String {
    let mut out = String::new();
    let nbase = 1 + c.below(3);
    for i in 0..nbase {
        out += &format!("S{i} : Set;\n");
    }
    let nfam = c.below(3);
    for j in 0..nfam {
        out += &format!("P{j} : (i : S0) Set;\n");
    }
    if nfam == 2 && c.below(3) == 0 {
        out += "se : (i : S0) P0 i = P1 i : Set;\n";
    }
    // (name, argument sorts, result sort) for non-dependent operations
    let mut plain: Vec<(String, Vec<usize>, usize)> = Vec::new();
    let nops = c.below(5);
    for k in 0..nops {
        let name = format!("f{k}");
        if nfam > 0 && c.below(3) == 0 {
            // a dependent operation: an element of some fibre
            let j = c.below(nfam);
            if c.flip() {
                out += &format!("{name} : (i : S0) P{j} i;\n");
            } else {
                out += &format!("{name} : (i : S0) (p : P{j} i) P{} i;\n", c.below(nfam));
            }
            continue;
        }
        let arity = c.below(3);
        let args: Vec<usize> = (0..arity).map(|_| c.below(nbase)).collect();
        let res = c.below(nbase);
        let binders: String = args.iter().enumerate().map(|(a, s)| format!("(x{a} : S{s}) ")).collect();
        out += &format!("{name} : {binders}S{res};\n");
        plain.push((name, args, res));
    }
    let neqs = c.below(3);
    for e in 0..neqs {
        if plain.is_empty() {
            break;
        }
        let (name, args, res) = plain[c.below(plain.len())].clone();
        let binders: String = args.iter().enumerate().map(|(a, s)| format!("(x{a} : S{s}) ")).collect();
        let app = if args.is_empty() {
            name.clone()
        } else {
            let vars: Vec<String> = (0..args.len()).map(|a| format!("x{a}")).collect();
            format!("{name} {}", vars.join(" "))
        };
        if let Some(a) = args.iter().position(|&s| s == res) {
            if args.len() == 1 && c.flip() {
                out += &format!("e{e} : {binders}{name} ({app}) = {app} : S{res};\n");
            } else {
                out += &format!("e{e} : {binders}{app} = x{a} : S{res};\n");
            }
        }
    }
    out
}

pub fn random_theory(c: &mut Choices) -> CheckedTheory {
    let src = theory_source(c);
    let th = parse_theory(&src).unwrap_or_else(|e| panic!("generated theory does not parse: {e}\n{src}"));
    check_theory(&th, ConvBudget::default()).unwrap_or_else(|e| panic!("generated theory does not check: {e}\n{src}"))
}

const LABELS: [&str; 3] = ["a", "b", "c"];

/// A model whose carriers and tables are read off `c`. `None` if some table
/// needs an element of an empty carrier or an equation fails.
pub fn random_model(th: &CheckedTheory, c: &mut Choices) -> Option<FiniteModel> {
    let mut m = FiniteModel::new(th.clone(), Vec::new());
    for d in th.decls() {
        let v = m
            .build_value(&d.ty, &mut |leaf, _| match leaf {
                Leaf::Set => {
                    let n = c.below(LABELS.len() + 1);
                    Some(Value::set(LABELS[..n].iter().copied()))
                }
                Leaf::Elem([]) => None,
                Leaf::Elem(carrier) => Some(Value::elem(carrier[c.below(carrier.len())].clone())),
            })
            .ok()??;
        m.push(v);
    }
    check_model(&m).is_ok().then_some(m)
}

/// The first valid model found among a few attempts.
pub fn some_model(th: &CheckedTheory, bytes: &[u8]) -> Option<FiniteModel> {
    bytes.chunks(64).find_map(|chunk| random_model(th, &mut Choices::new(chunk)))
}

pub fn corpus_sources() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([
        ("set", "A : Set;"),
        ("pointed_set", "A : Set; a : A;"),
        (
            "transitive_graphs",
            "V : Set; E : (x : V) (y : V) Set;
             T : (v1 : V) (v2 : V) (v3 : V) (e1 : E v1 v2) (e2 : E v2 v3) E v1 v3;",
        ),
        (
            "monoid",
            "M : Set; e : M; mul : (x : M) (y : M) M;
             unit_l : (x : M) mul e x = x : M; unit_r : (x : M) mul x e = x : M;
             assoc : (x : M) (y : M) (z : M) mul (mul x y) z = mul x (mul y z) : M;",
        ),
        (
            "russell",
            "Con : Set; Ty : (G : Con) Set; Tm : (G : Con) (A : Ty G) Set;
             R : (G : Con) Ty G; e : (G : Con) Tm G (R G) = Ty G : Set; emp : Con;",
        ),
        (
            "involution",
            "B : Set; t : B; f : B; not : (x : B) B; nn : (x : B) not (not x) = x : B;",
        ),
    ])
}

pub fn checked(src: &str) -> CheckedTheory {
    check_theory(&parse_theory(src).unwrap(), ConvBudget::default()).unwrap()
}
