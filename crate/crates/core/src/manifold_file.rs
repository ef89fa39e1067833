//! Line-oriented text format describing a manifold.
//!
//! ```text
//! # unit circle
//! vars: x y
//! dim: 1
//! degree: 2
//! box: x in [-1.5, 1.5]; y in [-1.5, 1.5]
//! projective: false
//! shift: 0 0
//! eq: x^2 + y^2 - 1
//! def: r2 = x^2 + y^2
//! ```
//!
//! `vars`, `dim` and at least one `eq` are required. `degree` defaults to
//! [`ManifoldSpec::default_degree_bound`]. Variables missing from `box` are
//! unbounded. `def` lines introduce named scalar expressions that later
//! definitions and integrands may reference. Everything after `#` is a
//! comment.

use std::path::Path;

use thiserror::Error;

use crate::expressions::{
    parse_polynomial, parse_scalar_expression_with, Definitions, ExprError, PolynomialSystem,
    ScalarExpression,
};
use crate::slicing::{BoxRegion, ManifoldSpec, SliceError};

#[derive(Debug, Error)]
pub enum ManifoldFileError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    Expr {
        line: usize,
        #[source]
        source: ExprError,
    },
    #[error("{0}")]
    Missing(String),
    #[error("command-line override: {0}")]
    Override(String),
    #[error("invalid manifold: {0}")]
    Manifold(#[from] SliceError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Settings given outside the file that take precedence over it.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    /// Treat the manifold as projective.
    pub projective: bool,
    /// A `box` line, replacing any box in the file.
    pub region: Option<String>,
}

/// A parsed manifold file.
#[derive(Clone, Debug)]
pub struct ManifoldFile {
    pub manifold: ManifoldSpec,
    pub definitions: Definitions,
    /// Definition names in file order.
    pub definition_names: Vec<String>,
}

fn parse_error(line: usize, message: impl Into<String>) -> ManifoldFileError {
    ManifoldFileError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_number(line: usize, text: &str) -> Result<f64, ManifoldFileError> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| !v.is_nan())
        .ok_or_else(|| parse_error(line, format!("expected a number, found `{}`", text.trim())))
}

fn parse_count(line: usize, key: &str, text: &str) -> Result<usize, ManifoldFileError> {
    text.trim()
        .parse::<usize>()
        .map_err(|_| parse_error(line, format!("`{key}` expects a nonnegative integer")))
}

fn parse_box(
    line: usize,
    text: &str,
    variables: &[String],
    bounds: &mut [(f64, f64)],
) -> Result<(), ManifoldFileError> {
    for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, interval) = part
            .split_once(" in ")
            .ok_or_else(|| parse_error(line, format!("expected `var in [lo, hi]`, found `{part}`")))?;
        let name = name.trim();
        let index = variables
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| parse_error(line, format!("unknown variable `{name}` in box")))?;
        let inner = interval
            .trim()
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| parse_error(line, format!("expected `[lo, hi]` for `{name}`")))?;
        let (lo, hi) = inner
            .split_once(',')
            .ok_or_else(|| parse_error(line, format!("expected `[lo, hi]` for `{name}`")))?;
        let (lo, hi) = (parse_number(line, lo)?, parse_number(line, hi)?);
        if lo > hi {
            return Err(parse_error(line, format!("empty interval for `{name}`")));
        }
        bounds[index] = (lo, hi);
    }
    Ok(())
}

impl ManifoldFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ManifoldFileError> {
        Self::load_with(path, &Overrides::default())
    }

    pub fn load_with(
        path: impl AsRef<Path>,
        overrides: &Overrides,
    ) -> Result<Self, ManifoldFileError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ManifoldFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_with(&text, overrides)
    }

    pub fn parse(text: &str) -> Result<Self, ManifoldFileError> {
        Self::parse_with(text, &Overrides::default())
    }

    pub fn parse_with(text: &str, overrides: &Overrides) -> Result<Self, ManifoldFileError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once(':')
                .ok_or_else(|| parse_error(line, "expected `key: value`"))?;
            entries.push((line, key.trim().to_ascii_lowercase(), value.trim().to_string()));
        }

        let mut variables: Option<Vec<String>> = None;
        for (line, key, value) in &entries {
            if key == "vars" {
                if variables.is_some() {
                    return Err(parse_error(*line, "duplicate `vars`"));
                }
                let names: Vec<String> = value
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect();
                variables = Some(names);
            }
        }
        let variables = variables.ok_or_else(|| ManifoldFileError::Missing("missing `vars`".into()))?;

        let mut dim = None;
        let mut degree = None;
        let mut projective = false;
        let mut shift = None;
        let mut bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); variables.len()];
        let mut has_box = false;
        let mut polys = Vec::new();
        let mut definitions = Definitions::new();
        let mut definition_names = Vec::new();

        for (line, key, value) in &entries {
            let line = *line;
            match key.as_str() {
                "vars" => {}
                "dim" => dim = Some(parse_count(line, key, value)?),
                "degree" => degree = Some(parse_count(line, key, value)?),
                "projective" => {
                    projective = match value.as_str() {
                        "true" => true,
                        "false" => false,
                        _ => return Err(parse_error(line, "`projective` expects true or false")),
                    }
                }
                "shift" => {
                    let v = value
                        .split(|c: char| c.is_whitespace() || c == ',')
                        .filter(|s| !s.is_empty())
                        .map(|s| parse_number(line, s))
                        .collect::<Result<Vec<_>, _>>()?;
                    if v.len() != variables.len() {
                        return Err(parse_error(
                            line,
                            format!("shift has {} entries for {} variables", v.len(), variables.len()),
                        ));
                    }
                    shift = Some(v);
                }
                "box" => {
                    has_box = true;
                    parse_box(line, value, &variables, &mut bounds)?;
                }
                "eq" => polys.push(
                    parse_polynomial(value, &variables)
                        .map_err(|source| ManifoldFileError::Expr { line, source })?,
                ),
                "def" => {
                    let (name, body) = value
                        .split_once('=')
                        .ok_or_else(|| parse_error(line, "expected `def: name = expression`"))?;
                    let name = name.trim().to_string();
                    let valid = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
                    if !valid {
                        return Err(parse_error(line, format!("invalid definition name `{name}`")));
                    }
                    if variables.contains(&name) || definitions.contains_key(&name) {
                        return Err(parse_error(line, format!("`{name}` is already defined")));
                    }
                    let expr = parse_scalar_expression_with(body, &variables, &definitions)
                        .map_err(|source| ManifoldFileError::Expr { line, source })?;
                    definitions.insert(name.clone(), expr);
                    definition_names.push(name);
                }
                other => return Err(parse_error(line, format!("unknown key `{other}`"))),
            }
        }

        projective |= overrides.projective;
        if let Some(spec) = &overrides.region {
            bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); variables.len()];
            parse_box(0, spec, &variables, &mut bounds).map_err(|e| match e {
                ManifoldFileError::Parse { message, .. } => ManifoldFileError::Override(message),
                other => other,
            })?;
            has_box = true;
        }
        let dim = dim.ok_or_else(|| ManifoldFileError::Missing("missing `dim`".into()))?;
        if polys.is_empty() {
            return Err(ManifoldFileError::Missing("no `eq` lines".into()));
        }
        let system = PolynomialSystem::new(&variables, polys).map_err(|source| {
            ManifoldFileError::Expr {
                line: entries[0].0,
                source,
            }
        })?;
        let degree = degree
            .unwrap_or_else(|| ManifoldSpec::default_degree_bound(&system, dim, projective));
        let mut manifold = if projective {
            ManifoldSpec::new_projective(system, dim, degree)?
        } else {
            ManifoldSpec::new(system, dim, degree)?
        };
        if has_box {
            manifold = manifold.with_region(BoxRegion::new(bounds)?)?;
        }
        if let Some(s) = shift {
            manifold = manifold.with_shift(s)?;
        }
        Ok(Self {
            manifold,
            definitions,
            definition_names,
        })
    }

    /// Parses an integrand or density, which may reference definitions.
    pub fn expression(&self, text: &str) -> Result<ScalarExpression, ExprError> {
        parse_scalar_expression_with(text, self.manifold.variables(), &self.definitions)
    }
}
