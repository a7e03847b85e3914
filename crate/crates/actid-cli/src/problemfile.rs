//! Line-based problem files.
//!
//! ```text
//! # two-circle feasibility problem
//! [problem]
//! n = 2
//! h = nlp(s=0, t=2)
//! c1 = -x1
//! c2 = x1^2 + x2^2 - 1
//! c3 = (x1+1)^2 + x2^2 - 4
//!
//! [reference]
//! x = 1 0
//!
//! [schedule]
//! eps0 = 0.1
//! shrink = 0.5
//! steps = 16
//! mu = 1
//! dir = -1 0
//! ```
//!
//! Sections may appear in any order; `[reference]` and `[schedule]` are
//! optional. Every parse error carries a 1-based line and column.

use std::collections::BTreeMap;
use std::fmt;

use actid_core::outer::OuterFunction;
use actid_core::prox::{MuSchedule, Schedule};
use actid_core::{CompositeProblem, ExprMap};

#[derive(Clone, Debug, PartialEq)]
pub struct FileError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for FileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for FileError {}

fn err(line: usize, col: usize, message: impl Into<String>) -> FileError {
    FileError {
        line,
        col,
        message: message.into(),
    }
}

#[derive(Clone, Debug)]
pub struct ScheduleSpec {
    pub eps0: f64,
    pub shrink: f64,
    pub steps: usize,
    pub mu: f64,
    pub dir: Option<Vec<f64>>,
    pub base: Option<Vec<f64>>,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec {
            eps0: 0.1,
            shrink: 0.5,
            steps: 16,
            mu: 1.0,
            dir: None,
            base: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProblemFile {
    pub n: usize,
    pub outer: OuterFunction,
    pub component_sources: Vec<(usize, String)>, // (line, text)
    pub reference: Option<Vec<f64>>,
    pub schedule: Option<ScheduleSpec>,
}

pub fn parse_problem_file(text: &str) -> Result<ProblemFile, FileError> {
    #[derive(PartialEq, Clone, Copy)]
    enum Section {
        None,
        Problem,
        Reference,
        Schedule,
    }

    let mut section = Section::None;
    let mut n: Option<usize> = None;
    let mut h_spec: Option<(usize, String)> = None;
    let mut components: BTreeMap<usize, (usize, String)> = BTreeMap::new();
    let mut reference: Option<Vec<f64>> = None;
    let mut schedule: Option<ScheduleSpec> = None;
    let mut saw_problem = false;

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }

        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| {
                err(lineno, raw.len(), "unterminated section header, expected `]`")
            })?;
            section = match name.trim() {
                "problem" => {
                    saw_problem = true;
                    Section::Problem
                }
                "reference" => Section::Reference,
                "schedule" => {
                    if schedule.is_none() {
                        schedule = Some(ScheduleSpec::default());
                    }
                    Section::Schedule
                }
                other => {
                    return Err(err(
                        lineno,
                        col_of(raw, other),
                        format!("unknown section `[{other}]`"),
                    ))
                }
            };
            continue;
        }

        let (key, value, value_col) = split_kv(raw, lineno)?;
        match section {
            Section::None => {
                return Err(err(lineno, 1, "content before any section header"));
            }
            Section::Problem => match key.as_str() {
                "n" => {
                    n = Some(value.parse().map_err(|_| {
                        err(lineno, value_col, format!("invalid dimension `{value}`"))
                    })?);
                }
                "h" => h_spec = Some((lineno, value)),
                _ if key.starts_with('c') && key[1..].bytes().all(|b| b.is_ascii_digit()) => {
                    let idx: usize = key[1..].parse().map_err(|_| {
                        err(lineno, 1, format!("invalid component key `{key}`"))
                    })?;
                    if idx == 0 {
                        return Err(err(lineno, 1, "component indices start at c1"));
                    }
                    if components.insert(idx, (lineno, value)).is_some() {
                        return Err(err(lineno, 1, format!("duplicate component `{key}`")));
                    }
                }
                _ => {
                    return Err(err(
                        lineno,
                        1,
                        format!("unknown key `{key}` in [problem] (expected n, h, c1..cm)"),
                    ))
                }
            },
            Section::Reference => match key.as_str() {
                "x" => reference = Some(parse_floats(&value, lineno, value_col)?),
                _ => {
                    return Err(err(
                        lineno,
                        1,
                        format!("unknown key `{key}` in [reference] (expected x)"),
                    ))
                }
            },
            Section::Schedule => {
                let spec = schedule.as_mut().expect("initialized at section header");
                match key.as_str() {
                    "eps0" => spec.eps0 = parse_float(&value, lineno, value_col)?,
                    "shrink" => spec.shrink = parse_float(&value, lineno, value_col)?,
                    "mu" => spec.mu = parse_float(&value, lineno, value_col)?,
                    "steps" => {
                        spec.steps = value.parse().map_err(|_| {
                            err(lineno, value_col, format!("invalid step count `{value}`"))
                        })?;
                    }
                    "dir" => spec.dir = Some(parse_floats(&value, lineno, value_col)?),
                    "x0" => spec.base = Some(parse_floats(&value, lineno, value_col)?),
                    _ => {
                        return Err(err(
                            lineno,
                            1,
                            format!(
                                "unknown key `{key}` in [schedule] (expected eps0, shrink, steps, mu, dir, x0)"
                            ),
                        ))
                    }
                }
            }
        }
    }

    if !saw_problem {
        return Err(err(1, 1, "missing [problem] section"));
    }
    let n = n.ok_or_else(|| err(1, 1, "missing `n` in [problem]"))?;
    if n == 0 {
        return Err(err(1, 1, "dimension n must be at least 1"));
    }
    let (h_line, h_text) = h_spec.ok_or_else(|| err(1, 1, "missing `h` in [problem]"))?;
    let outer = parse_h_spec(&h_text, h_line)?;

    // components must be contiguous c1..cm and match the outer dimension
    let m = outer.dim();
    let mut component_sources = Vec::with_capacity(m);
    for i in 1..=m {
        match components.remove(&i) {
            Some(src) => component_sources.push(src),
            None => {
                return Err(err(
                    h_line,
                    1,
                    format!("missing component c{i}: h = {} needs {m} components", outer.name()),
                ))
            }
        }
    }
    if let Some((&idx, &(lineno, _))) = components.iter().next() {
        return Err(err(
            lineno,
            1,
            format!("component c{idx} exceeds the outer dimension {m}"),
        ));
    }
    if let Some(r) = &reference {
        if r.len() != n {
            return Err(err(1, 1, format!("reference point must have {n} coordinates")));
        }
    }

    Ok(ProblemFile {
        n,
        outer,
        component_sources,
        reference,
        schedule,
    })
}

impl ProblemFile {
    /// Build the composite problem (parsing each component expression) and
    /// the run schedule when one is specified.
    pub fn build(&self) -> Result<(CompositeProblem, Option<(Schedule, MuSchedule)>), FileError> {
        let sources: Vec<&str> = self
            .component_sources
            .iter()
            .map(|(_, s)| s.as_str())
            .collect();
        let map = ExprMap::parse(&sources, self.n).map_err(|e| {
            // attribute the error to the component line it came from
            let (line, src) = self
                .component_sources
                .iter()
                .find(|(_, s)| actid_core::parse_expression(s, self.n).is_err())
                .cloned()
                .unwrap_or((1, String::new()));
            let col = src
                .char_indices()
                .take_while(|(b, _)| *b < e.offset)
                .count()
                + 1;
            err(line, col, format!("{e}"))
        })?;
        let problem = CompositeProblem::new(
            Box::new(map),
            self.outer.clone(),
            self.reference.clone(),
        )
        .map_err(|e| err(1, 1, format!("{e}")))?;

        let schedule = match &self.schedule {
            None => None,
            Some(spec) => {
                let base = spec
                    .base
                    .clone()
                    .or_else(|| self.reference.clone())
                    .ok_or_else(|| {
                        err(1, 1, "[schedule] needs `x0` when no [reference] is given")
                    })?;
                if base.len() != self.n {
                    return Err(err(1, 1, format!("schedule base must have {} coordinates", self.n)));
                }
                let mut dir = spec.dir.clone().unwrap_or_else(|| {
                    let mut d = vec![0.0; self.n];
                    d[0] = 1.0;
                    d
                });
                if dir.len() != self.n {
                    return Err(err(1, 1, format!("schedule dir must have {} coordinates", self.n)));
                }
                if dir.iter().all(|&d| d == 0.0) {
                    dir[0] = 1.0;
                }
                if !(spec.eps0 > 0.0) || !(spec.shrink > 0.0 && spec.shrink < 1.0) {
                    return Err(err(1, 1, "schedule needs eps0 > 0 and 0 < shrink < 1"));
                }
                if !(spec.mu > 0.0) {
                    return Err(err(1, 1, "schedule needs mu > 0"));
                }
                Some((
                    Schedule::Radial {
                        base,
                        direction: dir,
                        eps0: spec.eps0,
                        shrink: spec.shrink,
                        steps: spec.steps,
                    },
                    MuSchedule::Constant(spec.mu),
                ))
            }
        };
        Ok((problem, schedule))
    }
}

fn col_of(raw: &str, needle: &str) -> usize {
    raw.find(needle).map_or(1, |b| b + 1)
}

fn split_kv(raw: &str, lineno: usize) -> Result<(String, String, usize), FileError> {
    let line = match raw.find('#') {
        Some(pos) => &raw[..pos],
        None => raw,
    };
    match line.find('=') {
        None => Err(err(lineno, 1, "expected `key = value`")),
        Some(eq) => {
            let key = line[..eq].trim().to_string();
            if key.is_empty() {
                return Err(err(lineno, 1, "empty key before `=`"));
            }
            let value_part = &line[eq + 1..];
            let value = value_part.trim().to_string();
            if value.is_empty() {
                return Err(err(lineno, eq + 2, "empty value after `=`"));
            }
            let value_col = eq + 2 + (value_part.len() - value_part.trim_start().len());
            Ok((key, value, value_col))
        }
    }
}

fn parse_float(s: &str, lineno: usize, col: usize) -> Result<f64, FileError> {
    s.parse()
        .map_err(|_| err(lineno, col, format!("invalid number `{s}`")))
}

fn parse_floats(s: &str, lineno: usize, col: usize) -> Result<Vec<f64>, FileError> {
    s.split_whitespace()
        .map(|tok| {
            tok.parse()
                .map_err(|_| err(lineno, col, format!("invalid number `{tok}`")))
        })
        .collect()
}

/// Parse an outer-function spec such as `nlp(s=0, t=2)` or `abs`.
pub fn parse_h_spec(text: &str, lineno: usize) -> Result<OuterFunction, FileError> {
    let text = text.trim();
    let (name, args) = match text.find('(') {
        None => (text, BTreeMap::new()),
        Some(paren) => {
            let name = text[..paren].trim();
            let inner = text[paren + 1..]
                .strip_suffix(')')
                .ok_or_else(|| err(lineno, paren + 1, "expected closing `)` in h spec"))?;
            let mut args = BTreeMap::new();
            for part in inner.split(',') {
                let part = part.trim();
                if part.is_empty() {
                    continue;
                }
                let eq = part
                    .find('=')
                    .ok_or_else(|| err(lineno, 1, format!("expected key=value in `{part}`")))?;
                let key = part[..eq].trim().to_string();
                let value = part[eq + 1..].trim().to_string();
                args.insert(key, value);
            }
            (name, args)
        }
    };

    let get_usize = |args: &BTreeMap<String, String>, key: &str| -> Result<usize, FileError> {
        let v = args
            .get(key)
            .ok_or_else(|| err(lineno, 1, format!("h = {name} needs `{key}=`")))?;
        v.parse()
            .map_err(|_| err(lineno, 1, format!("invalid `{key}={v}` in h spec")))
    };
    let get_f64 = |args: &BTreeMap<String, String>, key: &str| -> Result<f64, FileError> {
        let v = args
            .get(key)
            .ok_or_else(|| err(lineno, 1, format!("h = {name} needs `{key}=`")))?;
        v.parse()
            .map_err(|_| err(lineno, 1, format!("invalid `{key}={v}` in h spec")))
    };

    match name {
        "indicator" => Ok(OuterFunction::indicator_nonneg()),
        "abs" => Ok(OuterFunction::abs()),
        "pos" => Ok(OuterFunction::pos()),
        "l1_two" => Ok(OuterFunction::l1_two()),
        "exp_penalty" => Ok(OuterFunction::exp_penalty(get_f64(&args, "alpha")?)),
        "euclid_norm" => Ok(OuterFunction::euclid_norm(get_usize(&args, "n")?)),
        "max_eig" => Ok(OuterFunction::max_eig(get_usize(&args, "k")?)),
        "nlp" => Ok(OuterFunction::nlp(
            get_usize(&args, "s")?,
            get_usize(&args, "t")?,
        )),
        "l1_exact_penalty" => Ok(OuterFunction::l1_exact_penalty(
            get_usize(&args, "s")?,
            get_usize(&args, "t")?,
            get_f64(&args, "nu")?,
        )),
        other => Err(err(
            lineno,
            1,
            format!(
                "unknown outer function `{other}` (expected indicator, abs, pos, exp_penalty, \
                 l1_two, euclid_norm, max_eig, nlp, l1_exact_penalty)"
            ),
        )),
    }
}
