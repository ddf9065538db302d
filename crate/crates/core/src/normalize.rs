//! β-normalisation with η-contraction, bounded by a step budget.

use alloc::boxed::Box;

use crate::syntax::{Tm, Ty};

/// The step budget ran out before a normal form was reached.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Exhausted;

/// Computes the β-normal, η-short form of `t`, charging one unit of
/// `steps` per β or η step.
pub fn normalize(t: &Tm, steps: &mut usize) -> Result<Tm, Exhausted> {
    match t {
        Tm::Var(_) => Ok(t.clone()),
        Tm::App(f, a) => {
            let f = normalize(f, steps)?;
            let a = normalize(a, steps)?;
            match f {
                Tm::Lam(x, _, body) => {
                    tick(steps)?;
                    normalize(&body.subst(&x, &a), steps)
                }
                f => Ok(Tm::app(f, a)),
            }
        }
        Tm::Lam(x, d, b) => {
            let d = normalize(d, steps)?;
            let b = normalize(b, steps)?;
            if let Tm::App(f, arg) = &b {
                if matches!(&**arg, Tm::Var(y) if y == x) && !f.free_vars().contains(x) {
                    tick(steps)?;
                    return Ok((**f).clone());
                }
            }
            Ok(Tm::Lam(x.clone(), Box::new(d), Box::new(b)))
        }
        Tm::Refl(s) => Ok(Tm::refl(normalize(s, steps)?)),
    }
}

pub fn normalize_ty(t: &Ty, steps: &mut usize) -> Result<Ty, Exhausted> {
    Ok(match t {
        Ty::Set => Ty::Set,
        Ty::Small(s) => Ty::Small(normalize(s, steps)?),
        Ty::Pi(x, d, b) => Ty::Pi(x.clone(), normalize(d, steps)?, Box::new(normalize_ty(b, steps)?)),
        Ty::Eq(l, r, a) => Ty::Eq(
            normalize(l, steps)?,
            normalize(r, steps)?,
            Box::new(normalize_ty(a, steps)?),
        ),
    })
}

fn tick(steps: &mut usize) -> Result<(), Exhausted> {
    if *steps == 0 {
        return Err(Exhausted);
    }
    *steps -= 1;
    Ok(())
}

/// Normalises with an effectively unbounded budget. Only for terms already
/// known to be well-typed, where normalisation terminates.
pub fn nf(t: &Tm) -> Tm {
    normalize(t, &mut usize::MAX.clone()).expect("unbounded budget")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_term;

    fn n(s: &str) -> Tm {
        nf(&parse_term(s).unwrap())
    }

    #[test]
    fn beta_and_eta() {
        assert_eq!(n("(\\x : A. f x x) a"), parse_term("f a a").unwrap());
        assert_eq!(n("\\x : A. f x"), parse_term("f").unwrap());
        assert_eq!(n("\\x : A. f x x"), parse_term("\\x : A. f x x").unwrap());
        assert_eq!(n("\\x : A. \\y : B. g x y"), parse_term("g").unwrap());
        assert_eq!(
            n("(\\a : V. \\b : V. El (E a b)) v1 v3"),
            parse_term("El (E v1 v3)").unwrap()
        );
    }

    #[test]
    fn budget_is_enforced() {
        let t = parse_term("(\\x : A. x) ((\\y : A. y) z)").unwrap();
        assert_eq!(normalize(&t, &mut 1), Err(Exhausted));
        assert_eq!(normalize(&t, &mut 2), Ok(Tm::var("z")));
    }
}
