//! The bundled corpus: theories, models, substitutions, a comma object and
//! expected outputs, all under `corpus/` in this crate.

use std::fs;
use std::path::{Path, PathBuf};

use twosort_core::models::FiniteModel;
use twosort_core::{CheckedTheory, ConvBudget, Substitution};

use crate::error::CliError;
use crate::files::{load_model, load_subst, load_theory};

pub const THEORIES: [&str; 8] = ["empty", "set", "pointed_set", "transitive_graphs", "monoid", "russell", "pointed_family", "involution"];

pub fn default_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/corpus"))
}

pub struct CorpusTheory {
    pub name: String,
    pub theory: CheckedTheory,
    pub models: Vec<(String, FiniteModel)>,
}

pub struct Corpus {
    pub dir: PathBuf,
    pub theories: Vec<CorpusTheory>,
    pub substitutions: Vec<(String, Substitution)>,
}

/// Files in `dir` with the given extension, sorted by name.
fn files_with(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(CliError::io(dir, e)),
    };
    for e in entries {
        let p = e.map_err(|e| CliError::io(dir, e))?.path();
        if p.extension().is_some_and(|x| x == ext) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

impl Corpus {
    pub fn load(dir: &Path, budget: ConvBudget) -> Result<Corpus, CliError> {
        let mut theories = Vec::new();
        for name in THEORIES {
            let theory = load_theory(&dir.join("theories").join(format!("{name}.gat")), budget)?;
            let mut models = Vec::new();
            for p in files_with(&dir.join("models").join(name), "model")? {
                models.push((stem(&p), load_model(&p, Some(&theory), budget)?));
            }
            theories.push(CorpusTheory {
                name: name.to_string(),
                theory,
                models,
            });
        }
        let mut substitutions = Vec::new();
        for p in files_with(&dir.join("substitutions"), "subst")? {
            substitutions.push((stem(&p), load_subst(&p, budget)?));
        }
        Ok(Corpus {
            dir: dir.to_path_buf(),
            theories,
            substitutions,
        })
    }

    pub fn theory(&self, name: &str) -> &CorpusTheory {
        self.theories
            .iter()
            .find(|t| t.name == name)
            .unwrap_or_else(|| panic!("no corpus theory {name}"))
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }
}
