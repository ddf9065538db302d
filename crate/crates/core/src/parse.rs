//! Surface syntax.
//!
//! ```text
//! theory  = { decl } ;
//! decl    = NAME ":" type ";" ;
//! type    = "Set" | eqty | pity | tmty ;
//! pity    = "(" NAME ":" term ")" type ;
//! eqty    = term "=" term ":" type ;
//! tmty    = term ;
//! term    = atom { atom } ;
//! atom    = NAME | "(" term ")" | "\" NAME ":" term "." term | "refl" atom ;
//! ```
//!
//! Whitespace is insignificant and `--` starts a line comment. Substitution
//! files start with `from <path> to <path>;` followed by `NAME := term;`.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::KernelError;
use crate::syntax::{Decl, Name, Theory, Tm, Ty};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Set,
    Refl,
    Colon,
    Assign,
    Semi,
    LParen,
    RParen,
    Backslash,
    Dot,
    Equals,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str, first_line: usize) -> Result<Vec<Spanned>, KernelError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, first_line, 1);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let mut push = |tok, len: usize, i: &mut usize, col: &mut usize| {
            out.push(Spanned { tok, line: tl, col: tc });
            *i += len;
            *col += len;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '-' if chars.get(i + 1) == Some(&'-') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            ':' if chars.get(i + 1) == Some(&'=') => push(Tok::Assign, 2, &mut i, &mut col),
            ':' => push(Tok::Colon, 1, &mut i, &mut col),
            ';' => push(Tok::Semi, 1, &mut i, &mut col),
            '(' => push(Tok::LParen, 1, &mut i, &mut col),
            ')' => push(Tok::RParen, 1, &mut i, &mut col),
            '\\' => push(Tok::Backslash, 1, &mut i, &mut col),
            '.' => push(Tok::Dot, 1, &mut i, &mut col),
            '=' => push(Tok::Equals, 1, &mut i, &mut col),
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                col += i - start;
                if word.starts_with(|c: char| c.is_ascii_digit()) {
                    return Err(KernelError::Parse {
                        line: tl,
                        col: tc,
                        msg: format!("identifier `{word}` starts with a digit"),
                    });
                }
                let tok = match word.as_str() {
                    "Set" => Tok::Set,
                    "refl" => Tok::Refl,
                    _ => Tok::Ident(word),
                };
                out.push(Spanned { tok, line: tl, col: tc });
            }
            other => {
                return Err(KernelError::Parse {
                    line,
                    col,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn new(toks: Vec<Spanned>, text: &str, first_line: usize) -> Parser {
        let lines = text.split('\n').count();
        let last = text.rsplit('\n').next().unwrap_or("");
        Parser {
            toks,
            pos: 0,
            end: (first_line + lines - 1, last.chars().count() + 1),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|s| (s.line, s.col))
            .unwrap_or(self.end)
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, KernelError> {
        let (line, col) = self.here();
        Err(KernelError::Parse {
            line,
            col,
            msg: msg.into(),
        })
    }

    fn describe(&self) -> String {
        match self.peek() {
            None => "end of input".to_string(),
            Some(Tok::Ident(s)) => format!("`{s}`"),
            Some(t) => format!("{t:?}"),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), KernelError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected {what}, found {}", self.describe()))
        }
    }

    fn name(&mut self) -> Result<Name, KernelError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let n = Name::new(s).expect("lexer yields valid identifiers");
                self.pos += 1;
                Ok(n)
            }
            _ => self.error(format!("expected a name, found {}", self.describe())),
        }
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek(),
            Some(Tok::Ident(_) | Tok::LParen | Tok::Backslash | Tok::Refl)
        )
    }

    fn atom(&mut self) -> Result<Tm, KernelError> {
        match self.peek() {
            Some(Tok::Ident(_)) => Ok(Tm::Var(self.name()?)),
            Some(Tok::LParen) => {
                self.pos += 1;
                let t = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            Some(Tok::Backslash) => {
                self.pos += 1;
                let x = self.name()?;
                self.expect(Tok::Colon, "`:`")?;
                let dom = self.term()?;
                self.expect(Tok::Dot, "`.`")?;
                let body = self.term()?;
                Ok(Tm::Lam(x, Box::new(dom), Box::new(body)))
            }
            Some(Tok::Refl) => {
                self.pos += 1;
                Ok(Tm::refl(self.atom()?))
            }
            _ => self.error(format!("expected a term, found {}", self.describe())),
        }
    }

    fn term(&mut self) -> Result<Tm, KernelError> {
        let mut t = self.atom()?;
        while self.starts_atom() {
            // a lambda extends as far right as possible
            let a = self.atom()?;
            t = Tm::app(t, a);
        }
        Ok(t)
    }

    fn ty(&mut self) -> Result<Ty, KernelError> {
        match self.peek() {
            Some(Tok::Set) => {
                self.pos += 1;
                Ok(Ty::Set)
            }
            Some(Tok::LParen)
                if matches!(self.peek_at(1), Some(Tok::Ident(_)))
                    && self.peek_at(2) == Some(&Tok::Colon) =>
            {
                self.pos += 1;
                let x = self.name()?;
                self.expect(Tok::Colon, "`:`")?;
                let dom = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                let cod = self.ty()?;
                Ok(Ty::Pi(x, dom, Box::new(cod)))
            }
            _ => {
                let lhs = self.term()?;
                if self.peek() == Some(&Tok::Equals) {
                    self.pos += 1;
                    let rhs = self.term()?;
                    self.expect(Tok::Colon, "`:` after an equation")?;
                    let at = self.ty()?;
                    Ok(Ty::Eq(lhs, rhs, Box::new(at)))
                } else {
                    Ok(Ty::Small(lhs))
                }
            }
        }
    }

    fn theory(&mut self) -> Result<Theory, KernelError> {
        let mut decls: Vec<Decl> = Vec::new();
        let mut seen = BTreeSet::new();
        while self.peek().is_some() {
            let at = self.pos;
            let name = self.name()?;
            if !seen.insert(name.clone()) {
                self.pos = at;
                return self.error(format!("duplicate declaration `{name}`"));
            }
            self.expect(Tok::Colon, "`:`")?;
            let ty = self.ty()?;
            self.expect(Tok::Semi, "`;`")?;
            decls.push(Decl { name, ty });
        }
        Ok(Theory { decls })
    }
}

/// Parses a theory. Purely syntactic apart from rejecting duplicate names.
pub fn parse_theory(text: &str) -> Result<Theory, KernelError> {
    let toks = lex(text, 1)?;
    Parser::new(toks, text, 1).theory()
}

pub fn parse_term(text: &str) -> Result<Tm, KernelError> {
    let toks = lex(text, 1)?;
    let mut p = Parser::new(toks, text, 1);
    let t = p.term()?;
    if p.peek().is_some() {
        return p.error(format!("trailing input {}", p.describe()));
    }
    Ok(t)
}

pub fn parse_type(text: &str) -> Result<Ty, KernelError> {
    let toks = lex(text, 1)?;
    let mut p = Parser::new(toks, text, 1);
    let t = p.ty()?;
    if p.peek().is_some() {
        return p.error(format!("trailing input {}", p.describe()));
    }
    Ok(t)
}

/// The raw content of a substitution file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubstFile {
    pub from: String,
    pub to: String,
    pub entries: Vec<(Name, Tm)>,
}

fn strip_comment(line: &str) -> &str {
    match line.find("--") {
        Some(i) => &line[..i],
        None => line,
    }
}

pub fn parse_subst_file(text: &str) -> Result<SubstFile, KernelError> {
    // The header may contain paths, so it is split off before lexing.
    let mut header = String::new();
    let mut header_end = None;
    let mut offset = 0;
    for (lineno, line) in text.split('\n').enumerate() {
        let code = strip_comment(line);
        if let Some(i) = code.find(';') {
            header.push_str(&code[..i]);
            header_end = Some((lineno, offset + i + 1));
            break;
        }
        header.push_str(code);
        header.push(' ');
        offset += line.len() + 1;
    }
    let Some((hline, rest_at)) = header_end else {
        return Err(KernelError::Parse {
            line: 1,
            col: 1,
            msg: "missing `from <theory> to <theory>;` header".into(),
        });
    };
    let words: Vec<&str> = header.split_whitespace().collect();
    let (from, to) = match words.as_slice() {
        ["from", a, "to", b] => (a.to_string(), b.to_string()),
        _ => {
            return Err(KernelError::Parse {
                line: 1,
                col: 1,
                msg: "header must read `from <theory> to <theory>;`".into(),
            })
        }
    };
    let rest = &text[rest_at..];
    let toks = lex(rest, hline + 1)?;
    let mut p = Parser::new(toks, rest, hline + 1);
    let mut entries = Vec::new();
    while p.peek().is_some() {
        let name = p.name()?;
        p.expect(Tok::Assign, "`:=`")?;
        let t = p.term()?;
        p.expect(Tok::Semi, "`;`")?;
        entries.push((name, t));
    }
    Ok(SubstFile { from, to, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRANSITIVE: &str = "V : Set; E : (a:V)(b:V) Set; T : (v1:V)(v2:V)(v3:V)(e1: E v1 v2)(e2: E v2 v3) E v1 v3;";

    #[test]
    fn parses_transitive_graphs() {
        let th = parse_theory(TRANSITIVE).unwrap();
        assert_eq!(th.len(), 3);
        assert_eq!(th.decls[0].ty, Ty::Set);
        let (binders, cod) = th.decls[2].ty.peel();
        assert_eq!(binders.len(), 5);
        assert_eq!(
            *cod,
            Ty::Small(Tm::apps(Tm::var("E"), [Tm::var("v1"), Tm::var("v3")]))
        );
    }

    #[test]
    fn empty_source_is_empty_theory() {
        assert!(parse_theory("").unwrap().is_empty());
        assert!(parse_theory("  -- only a comment\n").unwrap().is_empty());
    }

    #[test]
    fn duplicate_names_are_rejected() {
        match parse_theory("A : Set; A : A;") {
            Err(KernelError::Parse { line, col, msg }) => {
                assert_eq!((line, col), (1, 10));
                assert!(msg.contains("duplicate"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reports_positions() {
        match parse_theory("A : Set;\nB : (x : A) ;") {
            Err(KernelError::Parse { line, col, .. }) => assert_eq!((line, col), (2, 13)),
            other => panic!("{other:?}"),
        }
        assert!(parse_theory("A : Set").is_err());
        assert!(parse_theory("1A : Set;").is_err());
        assert!(parse_theory("A : Set; # : A;").is_err());
    }

    #[test]
    fn equations_and_lambdas() {
        let th = parse_theory(
            "M : Set; e : M; l : (x : M) (\\y : M. y) x = x : M; s : e = e : M;",
        )
        .unwrap();
        match &th.decls[2].ty {
            Ty::Pi(_, _, b) => match &**b {
                Ty::Eq(l, _, at) => {
                    assert!(matches!(l, Tm::App(..)));
                    assert_eq!(**at, Ty::Small(Tm::var("M")));
                }
                other => panic!("{other:?}"),
            },
            other => panic!("{other:?}"),
        }
        let ty = parse_type("Tm G (R G) = Ty G : Set").unwrap();
        assert!(matches!(ty, Ty::Eq(_, _, ref at) if **at == Ty::Set));
    }

    #[test]
    fn parenthesised_term_type_is_not_a_binder() {
        let ty = parse_type("(E a) b").unwrap();
        assert_eq!(
            ty,
            Ty::Small(Tm::apps(Tm::var("E"), [Tm::var("a"), Tm::var("b")]))
        );
        let refl = parse_term("refl (f x)").unwrap();
        assert_eq!(refl, Tm::refl(Tm::app(Tm::var("f"), Tm::var("x"))));
    }

    #[test]
    fn printing_round_trips() {
        let th = parse_theory(TRANSITIVE).unwrap();
        let printed = format!("{th}");
        assert_eq!(parse_theory(&printed).unwrap(), th);
        assert_eq!(
            printed.lines().nth(2).unwrap(),
            "T : (v1 : V) (v2 : V) (v3 : V) (e1 : E v1 v2) (e2 : E v2 v3) E v1 v3;"
        );
    }

    #[test]
    fn substitution_files() {
        let f = parse_subst_file(
            "-- display map\nfrom corpus/pointed.gat to set.gat;\nA := A;\nB := \\x : A. A;\n",
        )
        .unwrap();
        assert_eq!(f.from, "corpus/pointed.gat");
        assert_eq!(f.to, "set.gat");
        assert_eq!(f.entries.len(), 2);
        match parse_subst_file("from a.gat to b.gat;\nA = A;") {
            Err(KernelError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_subst_file("A := A;").is_err());
    }
}
