//! Command-line parsing and dispatch.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value as Json};
use twosort_core::coreflect::{adjunction_check, comma_of_model, desortify_model, model_of_comma, sortify_model};
use twosort_core::initial::initial_model_bounded;
use twosort_core::models::{check_model, enumerate_morphisms, FiniteModel, DEFAULT_SEARCH_CAP};
use twosort_core::sortify::{class_counts, is_family_gat, pushforward, two_sortify_theory, FamPrefix, TranslationResult};
use twosort_core::syntax::print_assignments;
use twosort_core::{check_substitution, CheckedTheory, ConvBudget, Name};

use crate::corpus::default_dir;
use crate::error::CliError;
use crate::files::{comma_to_json, load_comma, load_model, load_subst, load_theory, print_json, write_model, write_text};
use crate::selftest::{run_criterion, Ctx, TITLES};

#[derive(Parser, Debug)]
#[command(name = "twosort", version, about = "Check generalised algebraic theories, two-sortify them and compute with their finite models")]
pub struct Cli {
    #[command(flatten)]
    pub opts: Opts,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Args, Debug)]
pub struct Opts {
    /// E-graph steps per conversion check.
    #[arg(long, global = true, default_value_t = ConvBudget::default().fuel)]
    pub fuel: usize,
    /// Beta/eta steps per conversion check.
    #[arg(long, global = true, default_value_t = ConvBudget::default().max_unfold)]
    pub max_unfold: usize,
    /// Largest number of candidate morphisms to search.
    #[arg(long, global = true, default_value_t = DEFAULT_SEARCH_CAP)]
    pub search_cap: u128,
    /// Names of the two family sorts, as `U,El`.
    #[arg(long, global = true)]
    pub prefix: Option<String>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write the artifact here instead of standard output.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Typecheck a theory.
    Check { theory: PathBuf },
    /// Typecheck a substitution file.
    CheckSubst { subst: PathBuf },
    /// Print the two-sortified theory.
    Translate { theory: PathBuf },
    /// Print the coreflector substitution from the translation back to the theory.
    Coreflect { theory: PathBuf },
    /// Print the theory of set-indexed families of models.
    Pushforward {
        theory: PathBuf,
        #[arg(long, default_value = "A")]
        index: String,
    },
    /// Tell whether a theory is a family theory.
    IsFamily { theory: PathBuf },
    /// Operations on model files.
    Model {
        #[command(subcommand)]
        action: ModelCmd,
    },
    /// Convert between translated models and comma objects.
    Comma {
        #[command(subcommand)]
        action: CommaCmd,
    },
    /// Build the initial model by bounded term enumeration.
    Initial {
        theory: PathBuf,
        #[arg(long, default_value_t = 5)]
        depth: usize,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Enumerate the morphisms between two models.
    Homs { theory: PathBuf, source: PathBuf, target: PathBuf },
    /// Compare Hom(L m, n) with Hom(m, R n).
    AdjointCheck { theory: PathBuf, model: PathBuf, translated: PathBuf },
    /// Run every acceptance check over the bundled corpus.
    Selftest {
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum ModelCmd {
    /// Check a model against its theory.
    Check { theory: PathBuf, model: PathBuf },
    /// Send a model to a model of the translated theory.
    Sortify { theory: PathBuf, model: PathBuf },
    /// Send a model of the translated theory back.
    Desortify { theory: PathBuf, model: PathBuf },
    /// Sortify then desortify and compare.
    Roundtrip { theory: PathBuf, model: PathBuf },
}

#[derive(Subcommand, Debug)]
pub enum CommaCmd {
    /// Describe a model of the translated theory as a comma object.
    To { theory: PathBuf, model: PathBuf },
    /// Assemble a model of the translated theory from a comma object.
    From { theory: PathBuf, comma: PathBuf },
}

struct Env<'a> {
    opts: &'a Opts,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Env<'_> {
    fn budget(&self) -> ConvBudget {
        ConvBudget {
            fuel: self.opts.fuel,
            max_unfold: self.opts.max_unfold,
        }
    }

    fn prefix(&self) -> Result<FamPrefix, CliError> {
        let Some(p) = &self.opts.prefix else {
            return Ok(FamPrefix::default());
        };
        let parts: Vec<&str> = p.split(',').map(str::trim).collect();
        match parts.as_slice() {
            [u, el] if u != el => match (Name::new(u), Name::new(el)) {
                (Some(u), Some(el)) => Ok(FamPrefix { u, el }),
                _ => Err(CliError::Usage(format!("invalid names in --prefix {p}"))),
            },
            _ => Err(CliError::Usage("--prefix takes two distinct names, as `U,El`".into())),
        }
    }

    fn theory(&self, path: &Path) -> Result<CheckedTheory, CliError> {
        load_theory(path, self.budget())
    }

    fn translate(&self, th: &CheckedTheory) -> Result<TranslationResult, CliError> {
        two_sortify_theory(th, &self.prefix()?, self.budget()).map_err(|e| CliError::kernel("translation", e))
    }

    /// The artifact goes to `-o` or standard output.
    fn emit(&mut self, text: &str) -> Result<(), CliError> {
        match &self.opts.output {
            Some(p) => write_text(p, text),
            None => self.out.write_all(text.as_bytes()).map_err(|e| CliError::io(Path::new("<stdout>"), e)),
        }
    }

    fn note(&mut self, text: &str) {
        let _ = writeln!(self.err, "{text}");
    }

    fn report(&mut self, text: String, j: Json) -> Result<(), CliError> {
        match self.opts.format {
            Format::Text => self.emit(&format!("{text}\n")),
            Format::Json => self.emit(&print_json(&j)),
        }
    }
}

fn checked_model(m: FiniteModel, ctx: &Path) -> Result<FiniteModel, CliError> {
    check_model(&m).map_err(|e| CliError::model(ctx.display(), e))?;
    Ok(m)
}

fn dispatch(cmd: &Cmd, env: &mut Env<'_>) -> Result<(), CliError> {
    let budget = env.budget();
    match cmd {
        Cmd::Check { theory } => {
            let th = env.theory(theory)?;
            let counts: Vec<String> = class_counts(&th).iter().map(|(c, n)| format!("{n} {}", c.as_str())).collect();
            let j = json!({
                "declarations": th.decls().len(),
                "classes": class_counts(&th).iter().map(|(c, n)| (c.as_str().to_string(), json!(n))).collect::<serde_json::Map<_, _>>(),
            });
            let n = th.decls().len();
            let noun = if n == 1 { "declaration" } else { "declarations" };
            env.report(format!("ok: {n} {noun} ({})", counts.join(", ")), j)
        }
        Cmd::CheckSubst { subst } => {
            let s = load_subst(subst, budget)?;
            check_substitution(&s, budget).map_err(|e| CliError::kernel(subst.display(), e))?;
            env.report(format!("ok: {} assignments", s.assignments.len()), json!({ "assignments": s.assignments.len() }))
        }
        Cmd::Translate { theory } => {
            let tr = env.translate(&env.theory(theory)?)?;
            env.emit(&tr.translated.theory().to_string())
        }
        Cmd::Coreflect { theory } => {
            let tr = env.translate(&env.theory(theory)?)?;
            env.emit(&print_assignments(&tr.coreflector))
        }
        Cmd::Pushforward { theory, index } => {
            let index = Name::new(index).ok_or_else(|| CliError::Usage(format!("invalid index name {index}")))?;
            let p = pushforward(&env.theory(theory)?, &index, budget).map_err(|e| CliError::kernel(theory.display(), e))?;
            env.emit(&p.to_string())
        }
        Cmd::IsFamily { theory } => {
            let th = env.theory(theory)?;
            let prefix = env.prefix()?;
            let yes = is_family_gat(&th, &prefix);
            env.report(yes.to_string(), json!({ "family": yes }))
        }
        Cmd::Model { action } => model_cmd(action, env),
        Cmd::Comma { action } => match action {
            CommaCmd::To { theory, model } => {
                let th = env.theory(theory)?;
                let tr = env.translate(&th)?;
                let n = checked_model(load_model(model, Some(&tr.translated), budget)?, model)?;
                let c = comma_of_model(&tr, &n).map_err(|e| CliError::model(model.display(), e))?;
                env.emit(&print_json(&comma_to_json(&c, &th.theory().to_string())))
            }
            CommaCmd::From { theory, comma } => {
                let th = env.theory(theory)?;
                let tr = env.translate(&th)?;
                let c = load_comma(comma, Some(&th), budget)?;
                let n = model_of_comma(&tr, &c).map_err(|e| CliError::model(comma.display(), e))?;
                env.emit(&write_model(&n, &tr.translated.theory().to_string()))
            }
        },
        Cmd::Initial { theory, depth, report } => {
            let th = env.theory(theory)?;
            let r = initial_model_bounded(&th, *depth, budget).map_err(|e| CliError::model(theory.display(), e))?;
            env.emit(&write_model(&r.model, &th.theory().to_string()))?;
            let counts = r.class_counts().map_err(|e| CliError::model(theory.display(), e))?;
            let j = json!({
                "depth_used": r.depth_used,
                "saturated": r.saturated,
                "class_counts": counts,
                "indeterminate_pairs": r.indeterminate_pairs.len(),
            });
            match report {
                Some(p) => write_text(p, &print_json(&j))?,
                None => {
                    let counts: Vec<String> = counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
                    env.note(&format!(
                        "depth {}, saturated: {}, classes: [{}], indeterminate pairs: {}",
                        r.depth_used,
                        r.saturated,
                        counts.join(" "),
                        r.indeterminate_pairs.len()
                    ));
                }
            }
            if r.saturated {
                Ok(())
            } else {
                Err(CliError::Indeterminate(format!("not saturated at depth {depth}; the model above is partial")))
            }
        }
        Cmd::Homs { theory, source, target } => {
            let th = env.theory(theory)?;
            let a = checked_model(load_model(source, Some(&th), budget)?, source)?;
            let b = checked_model(load_model(target, Some(&th), budget)?, target)?;
            let homs = enumerate_morphisms(&a, &b, env.opts.search_cap).map_err(|e| CliError::model("homs", e))?;
            let list: Vec<Json> = homs
                .iter()
                .map(|h| {
                    let comps: serde_json::Map<String, Json> = h
                        .components()
                        .iter()
                        .filter(|(_, t)| !t.is_empty())
                        .map(|(addr, t)| {
                            let tag = twosort_core::models::tag(&th.decls()[addr.0].name, &addr.1);
                            (tag, json!(t))
                        })
                        .collect();
                    Json::Object(comps)
                })
                .collect();
            env.report(format!("{} morphisms", homs.len()), json!({ "count": homs.len(), "morphisms": list }))
        }
        Cmd::AdjointCheck { theory, model, translated } => {
            let th = env.theory(theory)?;
            let tr = env.translate(&th)?;
            let m = checked_model(load_model(model, Some(&th), budget)?, model)?;
            let n = checked_model(load_model(translated, Some(&tr.translated), budget)?, translated)?;
            let r = adjunction_check(&tr, &m, &n, env.opts.search_cap).map_err(|e| CliError::model("adjoint-check", e))?;
            let text = format!(
                "|Hom(L m, n)| = {}\n|Hom(m, R n)| = {}\nbijective: {}\nunit is identity: {}",
                r.left,
                r.right,
                r.is_bijection(),
                r.unit_is_identity
            );
            let j = json!({
                "left": r.left,
                "right": r.right,
                "image": r.image,
                "bijective": r.is_bijection(),
                "unit_is_identity": r.unit_is_identity,
            });
            env.report(text, j)?;
            if r.is_bijection() && r.unit_is_identity {
                Ok(())
            } else {
                Err(CliError::Failed("the canonical map between the hom-sets is not a bijection".into()))
            }
        }
        Cmd::Selftest { corpus } => {
            let dir = corpus.clone().unwrap_or_else(default_dir);
            let ctx = Ctx::new(&dir)?;
            for id in 1..=TITLES.len() {
                let o = run_criterion(&ctx, id);
                let _ = writeln!(env.out, "{o}");
                if !o.passed {
                    return Err(CliError::Failed(format!("criterion {id} failed")));
                }
            }
            Ok(())
        }
    }
}

fn model_cmd(action: &ModelCmd, env: &mut Env<'_>) -> Result<(), CliError> {
    let budget = env.budget();
    match action {
        ModelCmd::Check { theory, model } => {
            let th = env.theory(theory)?;
            checked_model(load_model(model, Some(&th), budget)?, model)?;
            env.report("ok".into(), json!({ "ok": true }))
        }
        ModelCmd::Sortify { theory, model } => {
            let th = env.theory(theory)?;
            let tr = env.translate(&th)?;
            let m = checked_model(load_model(model, Some(&th), budget)?, model)?;
            let n = sortify_model(&tr, &m).map_err(|e| CliError::model(model.display(), e))?;
            env.emit(&write_model(&n, &tr.translated.theory().to_string()))
        }
        ModelCmd::Desortify { theory, model } => {
            let th = env.theory(theory)?;
            let tr = env.translate(&th)?;
            let n = checked_model(load_model(model, Some(&tr.translated), budget)?, model)?;
            let m = desortify_model(&tr, &n).map_err(|e| CliError::model(model.display(), e))?;
            env.emit(&write_model(&m, &th.theory().to_string()))
        }
        ModelCmd::Roundtrip { theory, model } => {
            let th = env.theory(theory)?;
            let tr = env.translate(&th)?;
            let m = checked_model(load_model(model, Some(&th), budget)?, model)?;
            let back = sortify_model(&tr, &m)
                .and_then(|n| desortify_model(&tr, &n))
                .map_err(|e| CliError::model(model.display(), e))?;
            let r = th.theory().to_string();
            if write_model(&back, &r) == write_model(&m, &r) {
                env.report("roundtrip: identity".into(), json!({ "identity": true }))
            } else {
                env.report("roundtrip: differs".into(), json!({ "identity": false }))?;
                Err(CliError::Failed("desortify(sortify(m)) differs from m".into()))
            }
        }
    }
}

/// Runs the driver on `args` (including the program name) and returns the
/// exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(text.as_bytes());
            } else {
                let _ = err.write_all(text.as_bytes());
            }
            return code;
        }
    };
    let mut env = Env {
        opts: &cli.opts,
        out,
        err,
    };
    match dispatch(&cli.cmd, &mut env) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(env.err, "error: {e}");
            e.exit_code()
        }
    }
}
