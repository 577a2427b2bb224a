use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use thiserror::Error;

const BUILTIN_CATALOG: &str = include_str!("../../data/functions.csv");

/// Permitted argument counts of a built-in function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arity {
    pub min: usize,
    /// `None` means unbounded.
    pub max: Option<usize>,
}

impl Arity {
    pub fn new(min: usize, max: Option<usize>) -> Self {
        Self { min, max }
    }

    pub fn accepts(&self, argc: usize) -> bool {
        argc >= self.min && self.max.is_none_or(|max| argc <= max)
    }

    /// Functions with an upper bound on their argument count.
    pub fn is_bounded(&self) -> bool {
        self.max.is_some()
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.max {
            Some(max) if max == self.min => write!(f, "{}", self.min),
            Some(max) => write!(f, "{}..={}", self.min, max),
            None => write!(f, "{}..", self.min),
        }
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("failed to read catalog {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Lower-cased function name to arity map.
///
/// The text format is one `name,min_arity,max_arity` entry per line, `*` for
/// an unbounded maximum. Blank lines and lines starting with `#` are ignored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FunctionCatalog {
    entries: BTreeMap<String, Arity>,
}

impl FunctionCatalog {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The catalog shipped with the crate (~120 common Excel functions).
    pub fn builtin() -> &'static FunctionCatalog {
        static CATALOG: OnceLock<FunctionCatalog> = OnceLock::new();
        CATALOG
            .get_or_init(|| FunctionCatalog::parse(BUILTIN_CATALOG).expect("bundled function catalog is well-formed"))
    }

    pub fn parse(text: &str) -> Result<Self, CatalogError> {
        let mut catalog = Self::empty();
        catalog.extend_from_str(text)?;
        Ok(catalog)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CatalogError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| CatalogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Adds (or overrides) entries from catalog text.
    pub fn extend_from_str(&mut self, text: &str) -> Result<(), CatalogError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| CatalogError::Parse { line: idx + 1, message };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let [name, min, max] = fields[..] else {
                return Err(err(format!("expected 3 fields, found {}", fields.len())));
            };
            if name.is_empty() {
                return Err(err("empty function name".into()));
            }
            let min: usize = min.parse().map_err(|_| err(format!("invalid min arity `{min}`")))?;
            let max = match max {
                "*" => None,
                other => Some(
                    other
                        .parse::<usize>()
                        .map_err(|_| err(format!("invalid max arity `{other}`")))?,
                ),
            };
            if max.is_some_and(|max| max < min) {
                return Err(err(format!("max arity below min arity for `{name}`")));
            }
            self.insert(name, Arity::new(min, max));
        }
        Ok(())
    }

    pub fn insert(&mut self, name: &str, arity: Arity) {
        self.entries.insert(name.to_lowercase(), arity);
    }

    pub fn get(&self, name: &str) -> Option<Arity> {
        if name.bytes().any(|b| b.is_ascii_uppercase()) || !name.is_ascii() {
            self.entries.get(&name.to_lowercase()).copied()
        } else {
            self.entries.get(name).copied()
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    /// Lower-cased names in lexicographic order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
