//! INI-style definition files.
//!
//! ```text
//! # comment
//! [structure]
//! kind = heisenberg          # heisenberg | cylinder | graph_F | custom
//! n = 1
//!
//! [function phi]
//! expr = "r2 - z"
//! box = -1:1, -1:1, -1:1
//!
//! [scenario]
//! operator = generic
//! u = "0"
//! v = "0"
//! ```

use std::collections::BTreeMap;
use std::fmt;

use subcurv::calculus::{parse_constant, parse_expr_with, CoordSystem, Expr, Macros, Rational};
use subcurv::heisenberg::{
    cylinder_structure, default_f, graph_parameter_coords, numbered_coords, radial_coords, standard_structure,
    theorem_f_structure,
};
use subcurv::smp::{ComparisonScenario, GraphOperator, Tolerances};
use subcurv::{DomainBox, GridSpec, SubriemannianStructure, VectorFieldExpr};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self { line: Some(line), message: message.into() }
    }

    pub fn new(message: impl Into<String>) -> Self {
        Self { line: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

type CResult<T> = Result<T, ConfigError>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Section {
    pub kind: String,
    pub arg: Option<String>,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    fn required(&self, key: &str) -> CResult<&Entry> {
        self.get(key).ok_or_else(|| ConfigError::at(self.line, format!("[{}] needs '{key}'", self.kind)))
    }
}

/// Raw sections and key/value pairs, in file order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfigDocument {
    pub sections: Vec<Section>,
}

/// Drops a `#` comment that is not inside a quoted string.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

impl ConfigDocument {
    pub fn parse(text: &str) -> CResult<Self> {
        let mut sections: Vec<Section> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = strip_comment(raw).trim();
            if s.is_empty() {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let inner = rest.strip_suffix(']').ok_or_else(|| ConfigError::at(line, "unterminated section header"))?;
                let mut parts = inner.split_whitespace();
                let kind = parts.next().ok_or_else(|| ConfigError::at(line, "empty section header"))?.to_string();
                let arg = parts.next().map(str::to_string);
                if parts.next().is_some() {
                    return Err(ConfigError::at(line, "section header has too many words"));
                }
                if sections.iter().any(|x| x.kind == kind && x.arg == arg) {
                    return Err(ConfigError::at(line, format!("duplicate section [{inner}]")));
                }
                sections.push(Section { kind, arg, line, entries: Vec::new() });
                continue;
            }
            let (key, value) = s.split_once('=').ok_or_else(|| ConfigError::at(line, "expected 'key = value'"))?;
            let section = sections.last_mut().ok_or_else(|| ConfigError::at(line, "key outside of a section"))?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::at(line, "empty key"));
            }
            if section.get(&key).is_some() {
                return Err(ConfigError::at(line, format!("duplicate key '{key}'")));
            }
            section.entries.push(Entry { key, value: value.trim().to_string(), line });
        }
        Ok(Self { sections })
    }

    pub fn section(&self, kind: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.kind == kind)
    }

    pub fn sections_of<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Section> + 'a {
        self.sections.iter().filter(move |s| s.kind == kind)
    }
}

/// Splits a value into comma-separated items, honoring double quotes and
/// removing them.
pub fn split_list(value: &str, line: usize) -> CResult<Vec<String>> {
    let mut items = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut was_quoted = false;
    for c in value.chars() {
        match c {
            '"' => {
                quoted = !quoted;
                was_quoted = true;
            }
            ',' if !quoted => {
                items.push(std::mem::take(&mut cur).trim().to_string());
            }
            _ => cur.push(c),
        }
    }
    if quoted {
        return Err(ConfigError::at(line, "unterminated string"));
    }
    let last = cur.trim().to_string();
    if !last.is_empty() || was_quoted || !items.is_empty() {
        items.push(last);
    }
    if items.iter().any(String::is_empty) && !(items.len() == 1 && was_quoted) {
        return Err(ConfigError::at(line, "empty list item"));
    }
    Ok(items)
}

fn single(e: &Entry) -> CResult<String> {
    let items = split_list(&e.value, e.line)?;
    match items.as_slice() {
        [one] => Ok(one.clone()),
        _ => Err(ConfigError::at(e.line, format!("'{}' expects a single value", e.key))),
    }
}

fn number(e: &Entry) -> CResult<f64> {
    let s = single(e)?;
    parse_constant(&s).map_err(|err| ConfigError::at(e.line, format!("'{}': {err}", e.key)))
}

fn count(e: &Entry) -> CResult<usize> {
    single(e)?.parse().map_err(|_| ConfigError::at(e.line, format!("'{}' expects a non-negative integer", e.key)))
}

pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (i64, i64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
            (b != 0).then(|| Rational::new(a, b))
        }
        None => s.parse::<i64>().ok().map(Rational::from_integer),
    }
}

fn expr(e: &Entry, coords: &CoordSystem, macros: &Macros) -> CResult<Expr> {
    let s = single(e)?;
    parse_expr_with(&s, coords, macros).map_err(|err| ConfigError::at(e.line, format!("'{}': {err}", e.key)))
}

/// `lo:hi, lo:hi, ...`
pub fn parse_box(value: &str, line: usize) -> CResult<DomainBox> {
    let bounds = split_list(value, line)?
        .iter()
        .map(|item| {
            let (a, b) = item.split_once(':').ok_or_else(|| ConfigError::at(line, format!("box item '{item}' is not lo:hi")))?;
            let lo = parse_constant(a.trim()).map_err(|e| ConfigError::at(line, e.to_string()))?;
            let hi = parse_constant(b.trim()).map_err(|e| ConfigError::at(line, e.to_string()))?;
            Ok((lo, hi))
        })
        .collect::<CResult<Vec<_>>>()?;
    DomainBox::new(bounds).map_err(|e| ConfigError::at(line, e.to_string()))
}

/// Comma-separated coordinates of a point.
pub fn parse_point(value: &str) -> CResult<Vec<f64>> {
    split_list(value, 0)
        .map_err(|e| ConfigError::new(e.message))?
        .iter()
        .map(|s| parse_constant(s).map_err(|e| ConfigError::new(format!("point: {e}"))))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum StructureKind {
    Heisenberg(usize),
    Cylinder(usize),
    GraphF(Vec<Expr>),
    Custom,
}

#[derive(Clone, Debug)]
pub struct FunctionDef {
    pub name: String,
    pub source: String,
    pub expr: Expr,
    pub domain: Option<DomainBox>,
}

/// A checked configuration: every name resolves and every expression parses.
#[derive(Clone, Debug, Default)]
pub struct Config {
    pub structure: Option<(StructureKind, SubriemannianStructure)>,
    pub functions: BTreeMap<String, FunctionDef>,
    pub fields: BTreeMap<String, VectorFieldExpr>,
    pub scenario: Option<ComparisonScenario>,
}

/// `heisenberg`, `heisenberg(2)`, `graph_F(4)` → (name, optional argument).
fn split_kind(kind: &str, line: usize) -> CResult<(String, Option<usize>)> {
    match kind.split_once('(') {
        Some((name, rest)) => {
            let inner = rest.strip_suffix(')').ok_or_else(|| ConfigError::at(line, "malformed structure kind"))?;
            let first = inner.split(',').next().unwrap_or("").trim();
            let n = first.parse().map_err(|_| ConfigError::at(line, format!("bad size '{first}'")))?;
            Ok((name.trim().to_string(), Some(n)))
        }
        None => Ok((kind.trim().to_string(), None)),
    }
}

fn build_structure(sec: &Section) -> CResult<(StructureKind, SubriemannianStructure)> {
    let kind_entry = sec.required("kind")?;
    let (kind, inline) = split_kind(&single(kind_entry)?, kind_entry.line)?;
    let size = |key: &str| -> CResult<usize> {
        match (inline, sec.get(key)) {
            (Some(n), None) => Ok(n),
            (_, Some(e)) => count(e),
            (None, None) => Err(ConfigError::at(sec.line, format!("structure '{kind}' needs '{key}'"))),
        }
    };
    let err = |e: subcurv::Error| ConfigError::at(kind_entry.line, e.to_string());
    match kind.as_str() {
        "heisenberg" => {
            let n = size("n")?;
            Ok((StructureKind::Heisenberg(n), standard_structure(n).map_err(err)?))
        }
        "cylinder" => {
            let n = size("n")?;
            Ok((StructureKind::Cylinder(n), cylinder_structure(n).map_err(err)?))
        }
        "graph_F" => {
            let m = size("m")?;
            let f = match sec.get("F") {
                Some(e) => {
                    let coords = numbered_coords(m).map_err(err)?;
                    let items = split_list(&e.value, e.line)?;
                    items
                        .iter()
                        .map(|s| parse_expr_with(s, &coords, &Macros::new()).map_err(|x| ConfigError::at(e.line, format!("F: {x}"))))
                        .collect::<CResult<Vec<_>>>()?
                }
                None => default_f(m).map_err(err)?,
            };
            let s = theorem_f_structure(&f, m).map_err(err)?;
            Ok((StructureKind::GraphF(f), s))
        }
        "custom" => {
            let ce = sec.required("coords")?;
            let names = split_list(&ce.value, ce.line)?;
            let coords = CoordSystem::new(names).map_err(|e| ConfigError::at(ce.line, e.to_string()))?;
            let dim = coords.len();
            let none = Macros::new();
            let mut g = vec![vec![Expr::zero(); dim]; dim];
            for e in &sec.entries {
                let Some(rest) = e.key.strip_prefix("cometric.") else { continue };
                let (l, k) = rest.split_once('.').ok_or_else(|| ConfigError::at(e.line, "expected cometric.l.k"))?;
                let (l, k): (usize, usize) = match (l.parse(), k.parse()) {
                    (Ok(l), Ok(k)) if (1..=dim).contains(&l) && (1..=dim).contains(&k) => (l, k),
                    _ => return Err(ConfigError::at(e.line, format!("cometric index out of 1..{dim}"))),
                };
                let value = expr(e, &coords, &none)?;
                if l != k && sec.get(&format!("cometric.{k}.{l}")).is_some() {
                    return Err(ConfigError::at(e.line, "give each off-diagonal cometric entry once"));
                }
                g[l - 1][k - 1] = value.clone();
                g[k - 1][l - 1] = value;
            }
            let density = match sec.get("density") {
                Some(e) => expr(e, &coords, &none)?,
                None => Expr::one(),
            };
            let degeneracy = match sec.get("degeneracy") {
                Some(e) => count(e)?,
                None => 0,
            };
            let s = SubriemannianStructure::new("custom", coords, g, density, degeneracy).map_err(err)?;
            Ok((StructureKind::Custom, s))
        }
        other => Err(ConfigError::at(kind_entry.line, format!("unknown structure kind '{other}'"))),
    }
}

fn build_scenario(sec: &Section, structure: &(StructureKind, SubriemannianStructure)) -> CResult<ComparisonScenario> {
    let (kind, s) = structure;
    let op_entry = sec.required("operator")?;
    let op_name = single(op_entry)?;
    let p = match sec.get("p") {
        Some(e) => parse_rational(&single(e)?).ok_or_else(|| ConfigError::at(e.line, "p must be a rational number"))?,
        None => Rational::from_integer(0),
    };
    let wrong = |what: &str| ConfigError::at(op_entry.line, format!("operator '{op_name}' needs a {what} structure"));
    let (operator, chart, macros) = match op_name.as_str() {
        "generic" => {
            let m = s.dim() - 1;
            let chart = s.coords.prefix(m).map_err(|e| ConfigError::at(op_entry.line, e.to_string()))?;
            (GraphOperator::Generic { structure: std::sync::Arc::new(s.clone()), p }, chart, s.macros.clone())
        }
        "graph_HF" => {
            let StructureKind::GraphF(f) = kind else { return Err(wrong("graph_F")) };
            let chart = numbered_coords(f.len()).map_err(|e| ConfigError::at(op_entry.line, e.to_string()))?;
            (GraphOperator::GraphHF { f: f.clone() }, chart, Macros::new())
        }
        "intrinsic" | "la_graph" => {
            let StructureKind::Heisenberg(n) = *kind else { return Err(wrong("heisenberg")) };
            let chart = graph_parameter_coords(n).map_err(|e| ConfigError::at(op_entry.line, e.to_string()))?;
            let op = if op_name == "intrinsic" { GraphOperator::Intrinsic { n } } else { GraphOperator::LaGraph { n } };
            (op, chart, Macros::new())
        }
        "radial_cylinder" => {
            let StructureKind::Cylinder(n) = *kind else { return Err(wrong("cylinder")) };
            (GraphOperator::RadialCylinder { n }, radial_coords(), Macros::new())
        }
        other => return Err(ConfigError::at(op_entry.line, format!("unknown operator '{other}'"))),
    };
    if p != Rational::from_integer(0) && !matches!(operator, GraphOperator::Generic { .. }) {
        return Err(ConfigError::at(op_entry.line, "p is only supported by the generic operator"));
    }
    let u = expr(sec.required("u")?, &chart, &macros)?;
    let v = expr(sec.required("v")?, &chart, &macros)?;
    let be = sec.required("box")?;
    let domain = parse_box(&be.value, be.line)?;
    if domain.dim() != chart.len() {
        return Err(ConfigError::at(be.line, format!("box has {} axes, chart has {}", domain.dim(), chart.len())));
    }
    let counts = match sec.get("grid") {
        Some(e) => {
            let items = split_list(&e.value, e.line)?;
            let parsed = items
                .iter()
                .map(|i| i.parse::<usize>().map_err(|_| ConfigError::at(e.line, "grid expects integers")))
                .collect::<CResult<Vec<_>>>()?;
            match parsed.len() {
                1 => vec![parsed[0]; chart.len()],
                l if l == chart.len() => parsed,
                _ => return Err(ConfigError::at(e.line, "grid needs one count or one per axis")),
            }
        }
        None => vec![subcurv::smp::DEFAULT_GRID; chart.len()],
    };
    let grid = GridSpec::new(domain, counts).map_err(|e| ConfigError::at(be.line, e.to_string()))?;
    let name = match sec.get("name") {
        Some(e) => single(e)?,
        None => "custom".to_string(),
    };
    let mut sc = ComparisonScenario::new(name, operator, chart, u, v, grid);
    if let Some(e) = sec.get("description") {
        sc.description = single(e)?;
    }
    let mut tol = Tolerances::default();
    for (key, slot) in [
        ("eps_touch", &mut tol.eps_touch),
        ("eps_order", &mut tol.eps_order),
        ("eps_H", &mut tol.eps_h),
        ("eps_sing", &mut tol.eps_sing),
    ] {
        if let Some(e) = sec.get(key) {
            *slot = number(e)?;
        }
    }
    sc.tolerances = tol;
    if let Some(e) = sec.get("T") {
        sc.horizon = number(e)?;
    }
    if let Some(e) = sec.get("step") {
        sc.step = number(e)?;
    }
    if let Some(e) = sec.get("max_depth") {
        sc.max_depth = count(e)?;
    }
    if let Some(e) = sec.get("brackets") {
        sc.propagate_brackets = match single(e)?.as_str() {
            "true" | "yes" => true,
            "false" | "no" => false,
            _ => return Err(ConfigError::at(e.line, "brackets expects true or false")),
        };
    }
    const KNOWN: &[&str] = &[
        "name", "description", "operator", "p", "u", "v", "box", "grid", "eps_touch", "eps_order", "eps_H", "eps_sing",
        "T", "step", "max_depth", "brackets",
    ];
    if let Some(e) = sec.entries.iter().find(|e| !KNOWN.contains(&e.key.as_str())) {
        return Err(ConfigError::at(e.line, format!("unknown scenario key '{}'", e.key)));
    }
    sc.validate().map_err(|e| ConfigError::at(sec.line, e.to_string()))?;
    Ok(sc)
}

impl Config {
    pub fn parse(text: &str) -> CResult<Self> {
        let doc = ConfigDocument::parse(text)?;
        let mut cfg = Config::default();
        for sec in &doc.sections {
            if !matches!(sec.kind.as_str(), "structure" | "function" | "field" | "scenario") {
                return Err(ConfigError::at(sec.line, format!("unknown section [{}]", sec.kind)));
            }
            let named = matches!(sec.kind.as_str(), "function" | "field");
            if named != sec.arg.is_some() {
                return Err(ConfigError::at(sec.line, format!("section [{}] has the wrong number of names", sec.kind)));
            }
        }
        let structures: Vec<&Section> = doc.sections_of("structure").collect();
        if structures.len() > 1 {
            return Err(ConfigError::at(structures[1].line, "only one [structure] allowed"));
        }
        if let Some(sec) = structures.first() {
            cfg.structure = Some(build_structure(sec)?);
        }
        let need_structure = |sec: &Section| {
            cfg.structure.clone().ok_or_else(|| ConfigError::at(sec.line, format!("[{}] needs a [structure] section", sec.kind)))
        };
        for sec in doc.sections_of("function") {
            let (_, s) = need_structure(sec)?;
            let name = sec.arg.clone().unwrap_or_default();
            let e = sec.required("expr")?;
            let source = single(e)?;
            let ex = expr(e, &s.coords, &s.macros)?;
            let domain = match sec.get("box") {
                Some(b) => {
                    let d = parse_box(&b.value, b.line)?;
                    if d.dim() != s.dim() {
                        return Err(ConfigError::at(b.line, format!("box has {} axes, structure has {}", d.dim(), s.dim())));
                    }
                    Some(d)
                }
                None => None,
            };
            cfg.functions.insert(name.clone(), FunctionDef { name, source, expr: ex, domain });
        }
        for sec in doc.sections_of("field") {
            let (_, s) = need_structure(sec)?;
            let e = sec.required("components")?;
            let comps = split_list(&e.value, e.line)?
                .iter()
                .map(|c| parse_expr_with(c, &s.coords, &s.macros).map_err(|x| ConfigError::at(e.line, x.to_string())))
                .collect::<CResult<Vec<_>>>()?;
            if comps.len() != s.dim() {
                return Err(ConfigError::at(e.line, format!("field needs {} components", s.dim())));
            }
            cfg.fields.insert(sec.arg.clone().unwrap_or_default(), VectorFieldExpr::new(comps));
        }
        if let Some(sec) = doc.section("scenario") {
            let st = need_structure(sec)?;
            cfg.scenario = Some(build_scenario(sec, &st)?);
        }
        Ok(cfg)
    }

    pub fn structure(&self) -> CResult<&SubriemannianStructure> {
        self.structure.as_ref().map(|(_, s)| s).ok_or_else(|| ConfigError::new("no [structure] section"))
    }

    pub fn function(&self, name: &str) -> CResult<&FunctionDef> {
        self.functions.get(name).ok_or_else(|| ConfigError::new(format!("no [function {name}] section")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn document_sections_and_comments() {
        let d = ConfigDocument::parse("# top\n[structure]\nkind = heisenberg # trailing\nn=1\n[function phi]\nexpr = \"x # y\"\n").unwrap();
        assert_eq!(d.sections.len(), 2);
        assert_eq!(d.sections[0].get("kind").unwrap().value, "heisenberg");
        assert_eq!(d.sections[1].arg.as_deref(), Some("phi"));
        assert_eq!(d.sections[1].get("expr").unwrap().value, "\"x # y\"");
    }

    #[test]
    fn document_errors_carry_lines() {
        let e = ConfigDocument::parse("[a]\nnokey\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        assert!(ConfigDocument::parse("x = 1\n").is_err());
        assert!(ConfigDocument::parse("[a]\nx=1\nx=2\n").is_err());
    }

    #[test]
    fn lists() {
        assert_eq!(split_list("\"-x2\", \"x1\"", 1).unwrap(), vec!["-x2", "x1"]);
        assert_eq!(split_list("\"f(a, b)\"", 1).unwrap(), vec!["f(a, b)"]);
        assert!(split_list("\"open", 1).is_err());
        assert!(split_list("a,,b", 1).is_err());
    }

    #[test]
    fn builtin_structures() {
        let c = Config::parse("[structure]\nkind = cylinder(2)\n[function phi]\nexpr = \"rho^4 - 1\"\n").unwrap();
        assert_eq!(c.structure().unwrap().dim(), 5);
        let c = Config::parse("[structure]\nkind = graph_F\nm = 2\nF = \"-x2\", \"x1\"\n").unwrap();
        assert!(matches!(c.structure, Some((StructureKind::GraphF(ref f), _)) if f.len() == 2));
    }

    #[test]
    fn custom_structure() {
        let text = "[structure]\nkind = custom\ncoords = a, b\ncometric.1.1 = \"1\"\ncometric.2.2 = \"1\"\n[function f]\nexpr = \"a\"\n";
        let c = Config::parse(text).unwrap();
        assert_eq!(c.structure().unwrap().cometric_at(&[0.0, 0.0]).unwrap(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(c.function("f").is_ok() && c.function("g").is_err());
    }

    #[test]
    fn scenario_section() {
        let text = "[structure]\nkind = graph_F\nm = 2\n[scenario]\nname = s\noperator = graph_HF\nu = \"x1*x2\"\nv = \"x1*x2\"\nbox = 0:1, 0:1\ngrid = 5\neps_H = 1e-6\n";
        let sc = Config::parse(text).unwrap().scenario.unwrap();
        assert_eq!(sc.grid.len(), 25);
        assert_eq!(sc.tolerances.eps_h, 1e-6);
        let bad = text.replace("graph_HF", "la_graph");
        assert!(Config::parse(&bad).is_err());
        let bad = text.replace("grid = 5", "grid = 5\nbogus = 1");
        assert!(Config::parse(&bad).is_err());
    }

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("1/2"), Some(Rational::new(1, 2)));
        assert_eq!(parse_rational("3"), Some(Rational::from_integer(3)));
        assert_eq!(parse_rational("1/0"), None);
    }
}
