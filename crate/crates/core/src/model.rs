//! Model intermediate representation and its file format.
//!
//! A [`ModelIR`] is a single-objective math program: sense, objective
//! tree, variable list (bounds, domain, optional family role) and
//! normalized constraints (`body ⊴ 0` with ⊴ ∈ {≤, =}). Scalable models
//! carry their `y`/`z` members as ordinary variables plus `P`/`Q` counts;
//! [`ModelIR::expand_families`] lowers indexed sums and quantified
//! constraints to flat form for the solvers.
//!
//! The on-disk format is a TOML document written by a canonical
//! serializer, so `serialize(parse(serialize(m))) == serialize(m)`
//! byte-for-byte.

use crate::error::{EvalError, FormatError};
use crate::expr::{add_chain, Binding, Expr, Family, FamilyLayout};
use crate::textexpr::{self, PowStyle};
use std::collections::HashSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

impl Sense {
    pub fn keyword(self) -> &'static str {
        match self {
            Sense::Min => "min",
            Sense::Max => "max",
        }
    }

    /// +1 for minimization, −1 for maximization: solvers minimize
    /// `factor · objective` internally.
    pub fn factor(self) -> f64 {
        match self {
            Sense::Min => 1.0,
            Sense::Max => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Continuous,
    Integer,
    Binary,
}

impl Domain {
    pub fn keyword(self) -> &'static str {
        match self {
            Domain::Continuous => "continuous",
            Domain::Integer => "integer",
            Domain::Binary => "binary",
        }
    }
}

/// Canonical constraint relation; `≥` inputs are negated at parse time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Eq,
}

impl Rel {
    pub fn keyword(self) -> &'static str {
        match self {
            Rel::Le => "<=",
            Rel::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantifier {
    None,
    ForAllP,
    ForAllQ,
}

impl Quantifier {
    pub fn keyword(self) -> &'static str {
        match self {
            Quantifier::None => "",
            Quantifier::ForAllP => "p",
            Quantifier::ForAllQ => "q",
        }
    }

    pub fn family(self) -> Option<Family> {
        match self {
            Quantifier::None => None,
            Quantifier::ForAllP => Some(Family::Y),
            Quantifier::ForAllQ => Some(Family::Z),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableDef {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
    pub domain: Domain,
    /// `None` for scalars; members of a family carry contiguous indices.
    pub family: Option<Family>,
}

impl VariableDef {
    pub fn continuous(name: &str, lb: f64, ub: f64) -> Self {
        VariableDef { name: name.to_string(), lb, ub, domain: Domain::Continuous, family: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintDef {
    /// Normalized body: the constraint reads `body rel 0`.
    pub body: Expr,
    pub rel: Rel,
    pub quantifier: Quantifier,
}

impl ConstraintDef {
    pub fn le(body: Expr) -> Self {
        ConstraintDef { body, rel: Rel::Le, quantifier: Quantifier::None }
    }

    pub fn eq(body: Expr) -> Self {
        ConstraintDef { body, rel: Rel::Eq, quantifier: Quantifier::None }
    }

    pub fn forall(mut self, q: Quantifier) -> Self {
        self.quantifier = q;
        self
    }
}

#[derive(Debug, Clone)]
pub struct ModelIR {
    pub name: String,
    pub sense: Sense,
    pub p: usize,
    pub q: usize,
    /// FNV-1a hash of the source text this model was parsed from, if any.
    pub source_hash: Option<String>,
    pub variables: Vec<VariableDef>,
    pub objective: Expr,
    pub constraints: Vec<ConstraintDef>,
}

impl ModelIR {
    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn var_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Member block positions derived from the variable list.
    pub fn layout(&self) -> FamilyLayout {
        let mut l = FamilyLayout::default();
        for (i, v) in self.variables.iter().enumerate() {
            match v.family {
                Some(Family::Y) => {
                    if l.y_count == 0 {
                        l.y_start = i;
                    }
                    l.y_count += 1;
                }
                Some(Family::Z) => {
                    if l.z_count == 0 {
                        l.z_start = i;
                    }
                    l.z_count += 1;
                }
                None => {}
            }
        }
        l
    }

    /// Structural sanity checks shared by every constructor path.
    pub fn validate(&self) -> Result<(), FormatError> {
        let mut seen = HashSet::new();
        for v in &self.variables {
            if !seen.insert(v.name.as_str()) {
                return Err(FormatError(format!("duplicate variable `{}`", v.name)));
            }
            if v.name == "y_p" || v.name == "z_q" {
                return Err(FormatError(format!("`{}` is a reserved placeholder", v.name)));
            }
            if v.lb > v.ub {
                return Err(FormatError(format!(
                    "variable `{}`: lower bound {} exceeds upper bound {}",
                    v.name, v.lb, v.ub
                )));
            }
            if v.lb.is_nan() || v.ub.is_nan() {
                return Err(FormatError(format!("variable `{}`: NaN bound", v.name)));
            }
            if v.domain == Domain::Binary && (v.lb != 0.0 || v.ub != 1.0) {
                return Err(FormatError(format!(
                    "binary variable `{}` must have bounds 0 and 1",
                    v.name
                )));
            }
        }
        // family blocks: contiguous, counts match P/Q
        let mut runs: Vec<(Option<Family>, usize)> = Vec::new();
        for v in &self.variables {
            match runs.last_mut() {
                Some((f, n)) if *f == v.family => *n += 1,
                _ => runs.push((v.family, 1)),
            }
        }
        let y_total: usize = runs.iter().filter(|(f, _)| *f == Some(Family::Y)).map(|(_, n)| n).sum();
        let z_total: usize = runs.iter().filter(|(f, _)| *f == Some(Family::Z)).map(|(_, n)| n).sum();
        if runs.iter().filter(|(f, _)| *f == Some(Family::Y)).count() > 1
            || runs.iter().filter(|(f, _)| *f == Some(Family::Z)).count() > 1
        {
            return Err(FormatError("family members must be contiguous".to_string()));
        }
        if y_total != self.p || z_total != self.q {
            return Err(FormatError(format!(
                "family sizes disagree: P={} but {} y-members, Q={} but {} z-members",
                self.p, y_total, self.q, z_total
            )));
        }
        // expression references
        let n = self.variables.len();
        let check_refs = |e: &Expr, what: &str| -> Result<(), FormatError> {
            if let Some(m) = e.max_var_index() {
                if m >= n {
                    return Err(FormatError(format!(
                        "{} references variable index {} but only {} exist",
                        what, m, n
                    )));
                }
            }
            Ok(())
        };
        check_refs(&self.objective, "objective")?;
        let mut free = MemberScan::default();
        free.scan(&self.objective, false, false);
        if free.free_y || free.free_z {
            return Err(FormatError(
                "objective contains a family placeholder outside a sum".to_string(),
            ));
        }
        for (k, c) in self.constraints.iter().enumerate() {
            check_refs(&c.body, &format!("constraint {}", k + 1))?;
            let mut scan = MemberScan::default();
            scan.scan(&c.body, false, false);
            let bad = match c.quantifier {
                Quantifier::None => scan.free_y || scan.free_z,
                Quantifier::ForAllP => scan.free_z,
                Quantifier::ForAllQ => scan.free_y,
            };
            if bad {
                return Err(FormatError(format!(
                    "constraint {}: family placeholder does not match its quantifier",
                    k + 1
                )));
            }
        }
        Ok(())
    }

    // -------------------------------------------------------------------
    // evaluation
    // -------------------------------------------------------------------

    pub fn eval_objective(&self, point: &[f64]) -> Result<f64, EvalError> {
        self.objective.eval(point, &self.layout(), None)
    }

    /// Exact objective gradient (family sums expanded on the fly).
    pub fn objective_gradient(&self, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.objective.gradient(point, &self.layout())
    }

    /// Max over constraints of `max(0, body)` for ≤ / `|body|` for =,
    /// plus bound violations. Zero means feasible at zero tolerance.
    pub fn max_violation(&self, point: &[f64]) -> Result<f64, EvalError> {
        let layout = self.layout();
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let bindings: Vec<Binding> = match c.quantifier.family() {
                None => vec![None],
                Some(f) => (0..layout.count(f)).map(|ord| Some((f, ord))).collect(),
            };
            for b in bindings {
                let v = c.body.eval(point, &layout, b)?;
                let viol = match c.rel {
                    Rel::Le => v.max(0.0),
                    Rel::Eq => v.abs(),
                };
                worst = worst.max(viol);
            }
        }
        for (i, v) in self.variables.iter().enumerate() {
            let x = point[i];
            worst = worst.max(v.lb - x).max(x - v.ub);
        }
        Ok(worst.max(0.0))
    }

    /// Like [`max_violation`](Self::max_violation) but total: a domain
    /// fault counts as infinite violation.
    pub fn violation_or_inf(&self, point: &[f64]) -> f64 {
        match self.max_violation(point) {
            Ok(v) => v,
            Err(EvalError::Domain(_)) => f64::INFINITY,
            Err(e) => panic!("malformed model/point: {}", e),
        }
    }

    /// Objective helper with the same totalization convention (+∞ in the
    /// minimization direction on faults).
    pub fn objective_or_inf(&self, point: &[f64]) -> f64 {
        match self.eval_objective(point) {
            Ok(v) => v,
            Err(EvalError::Domain(_)) => match self.sense {
                Sense::Min => f64::INFINITY,
                Sense::Max => f64::NEG_INFINITY,
            },
            Err(e) => panic!("malformed model/point: {}", e),
        }
    }

    // -------------------------------------------------------------------
    // transforms
    // -------------------------------------------------------------------

    /// True when no expression contains a sum or member placeholder.
    pub fn is_expanded(&self) -> bool {
        !self.objective.has_family_constructs()
            && self
                .constraints
                .iter()
                .all(|c| c.quantifier == Quantifier::None && !c.body.has_family_constructs())
    }

    /// Lower indexed sums and quantified constraints to flat expressions
    /// over the member variables. Variables, bounds and family roles are
    /// unchanged.
    pub fn expand_families(&self) -> ModelIR {
        let layout = self.layout();
        let expand = |e: &Expr| expand_expr(e, &layout).fold();
        let mut constraints = Vec::new();
        for c in &self.constraints {
            match c.quantifier.family() {
                None => constraints.push(ConstraintDef {
                    body: expand(&c.body),
                    rel: c.rel,
                    quantifier: Quantifier::None,
                }),
                Some(f) => {
                    for ord in 0..layout.count(f) {
                        let bound =
                            c.body.bind_member(f, &Expr::Var(layout.member_index(f, ord)));
                        constraints.push(ConstraintDef {
                            body: expand(&bound),
                            rel: c.rel,
                            quantifier: Quantifier::None,
                        });
                    }
                }
            }
        }
        ModelIR {
            name: self.name.clone(),
            sense: self.sense,
            p: self.p,
            q: self.q,
            source_hash: self.source_hash.clone(),
            variables: self.variables.clone(),
            objective: expand(&self.objective),
            constraints,
        }
    }

    /// Fix a subset of variables and return the model over the rest.
    /// Out-of-bound values are clamped (with a warning); constraints that
    /// become variable-free are checked and dropped, their worst residual
    /// reported as `fixed_violation`.
    pub fn substitute_fixed(&self, fixed: &[(usize, f64)]) -> ReducedModel {
        let base = if self.is_expanded() { self.clone() } else { self.expand_families() };
        let mut warnings = Vec::new();
        let mut fixed_clamped: Vec<(usize, f64)> = Vec::with_capacity(fixed.len());
        let mut is_fixed = vec![false; base.variables.len()];
        for &(i, raw) in fixed {
            let v = &base.variables[i];
            let clamped = raw.clamp(v.lb, v.ub);
            if clamped != raw {
                warnings.push(format!("{} clamped from {} to {}", v.name, raw, clamped));
            }
            is_fixed[i] = true;
            fixed_clamped.push((i, clamped));
        }

        let keep: Vec<usize> =
            (0..base.variables.len()).filter(|&i| !is_fixed[i]).collect();
        let mut old_to_new = vec![usize::MAX; base.variables.len()];
        for (new, &old) in keep.iter().enumerate() {
            old_to_new[old] = new;
        }
        let value_of = |i: usize| -> f64 {
            fixed_clamped.iter().find(|(j, _)| *j == i).map(|(_, v)| *v).unwrap()
        };
        let rewrite = |e: &Expr| -> Expr {
            e.map_vars(&mut |i| {
                if is_fixed[i] {
                    Expr::Const(value_of(i))
                } else {
                    Expr::Var(old_to_new[i])
                }
            })
            .fold()
        };

        let variables: Vec<VariableDef> =
            keep.iter().map(|&i| base.variables[i].clone()).collect();
        let p = variables.iter().filter(|v| v.family == Some(Family::Y)).count();
        let q = variables.iter().filter(|v| v.family == Some(Family::Z)).count();

        let mut fixed_violation: f64 = 0.0;
        let mut constraints = Vec::new();
        for c in &base.constraints {
            let body = rewrite(&c.body);
            if body.is_constant() {
                let resid = match body.eval_flat(&[]) {
                    Ok(v) => match c.rel {
                        Rel::Le => v.max(0.0),
                        Rel::Eq => v.abs(),
                    },
                    Err(_) => f64::INFINITY,
                };
                fixed_violation = fixed_violation.max(resid);
            } else {
                constraints.push(ConstraintDef { body, rel: c.rel, quantifier: Quantifier::None });
            }
        }

        let model = ModelIR {
            name: base.name.clone(),
            sense: base.sense,
            p,
            q,
            source_hash: None,
            variables,
            objective: rewrite(&base.objective),
            constraints,
        };
        ReducedModel { model, keep, fixed: fixed_clamped, fixed_violation, warnings }
    }

    /// Equality up to metadata (name and source hash are ignored).
    pub fn same_structure(&self, other: &ModelIR) -> bool {
        self.sense == other.sense
            && self.p == other.p
            && self.q == other.q
            && self.variables == other.variables
            && self.objective == other.objective
            && self.constraints.len() == other.constraints.len()
            && self
                .constraints
                .iter()
                .zip(&other.constraints)
                .all(|(a, b)| a == b)
    }
}

fn expand_expr(e: &Expr, layout: &FamilyLayout) -> Expr {
    match e {
        Expr::Const(_) | Expr::Var(_) | Expr::Member(_) => e.clone(),
        Expr::Unary(op, a) => Expr::Unary(*op, Box::new(expand_expr(a, layout))),
        Expr::Binary(op, a, b) => Expr::Binary(
            *op,
            Box::new(expand_expr(a, layout)),
            Box::new(expand_expr(b, layout)),
        ),
        Expr::Sum(f, body) => {
            let inner = expand_expr(body, layout);
            add_chain((0..layout.count(*f)).map(|ord| {
                inner.bind_member(*f, &Expr::Var(layout.member_index(*f, ord)))
            }))
        }
    }
}

/// Result of [`ModelIR::substitute_fixed`].
#[derive(Debug, Clone)]
pub struct ReducedModel {
    /// Model over the unfixed variables only.
    pub model: ModelIR,
    /// `keep[new] = old`: index of each reduced variable in the parent.
    pub keep: Vec<usize>,
    /// The (clamped) assignment that produced this reduction.
    pub fixed: Vec<(usize, f64)>,
    /// Worst residual among constraints that became variable-free
    /// (0 when none were violated; infeasibility is data, not an error).
    pub fixed_violation: f64,
    pub warnings: Vec<String>,
}

impl ReducedModel {
    /// Merge a reduced-space point with the fixed assignment back into a
    /// full-length point.
    pub fn lift(&self, reduced_point: &[f64]) -> Vec<f64> {
        let n = self.keep.len() + self.fixed.len();
        let mut full = vec![0.0; n];
        for (new, &old) in self.keep.iter().enumerate() {
            full[old] = reduced_point[new];
        }
        for &(old, v) in &self.fixed {
            full[old] = v;
        }
        full
    }
}

#[derive(Default)]
struct MemberScan {
    free_y: bool,
    free_z: bool,
}

impl MemberScan {
    fn scan(&mut self, e: &Expr, bound_y: bool, bound_z: bool) {
        match e {
            Expr::Const(_) | Expr::Var(_) => {}
            Expr::Member(Family::Y) => self.free_y |= !bound_y,
            Expr::Member(Family::Z) => self.free_z |= !bound_z,
            Expr::Unary(_, a) => self.scan(a, bound_y, bound_z),
            Expr::Binary(_, a, b) => {
                self.scan(a, bound_y, bound_z);
                self.scan(b, bound_y, bound_z);
            }
            Expr::Sum(Family::Y, a) => self.scan(a, true, bound_z),
            Expr::Sum(Family::Z, a) => self.scan(a, bound_y, true),
        }
    }
}

// -------------------------------------------------------------------------
// file format
// -------------------------------------------------------------------------

fn fmt_bound(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        let v = if v == 0.0 { 0.0 } else { v };
        if v == v.trunc() && v.abs() < 1e15 {
            format!("{:.1}", v)
        } else {
            format!("{}", v)
        }
    }
}

fn toml_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Canonical, deterministic text form (TOML).
pub fn serialize_model(m: &ModelIR) -> String {
    let names = m.var_names();
    let mut out = String::new();
    out.push_str(&format!("name = {}\n", toml_string(&m.name)));
    out.push_str(&format!("sense = \"{}\"\n", m.sense.keyword()));
    out.push_str(&format!("P = {}\n", m.p));
    out.push_str(&format!("Q = {}\n", m.q));
    if let Some(h) = &m.source_hash {
        out.push_str(&format!("source_hash = {}\n", toml_string(h)));
    }
    out.push_str(&format!(
        "objective = {}\n",
        toml_string(&textexpr::render_expr(&m.objective, &names, PowStyle::Caret))
    ));
    for v in &m.variables {
        out.push_str("\n[[variables]]\n");
        out.push_str(&format!("name = {}\n", toml_string(&v.name)));
        out.push_str(&format!("lb = {}\n", fmt_bound(v.lb)));
        out.push_str(&format!("ub = {}\n", fmt_bound(v.ub)));
        out.push_str(&format!("domain = \"{}\"\n", v.domain.keyword()));
        out.push_str(&format!(
            "family = \"{}\"\n",
            match v.family {
                None => "",
                Some(Family::Y) => "y",
                Some(Family::Z) => "z",
            }
        ));
    }
    for c in &m.constraints {
        out.push_str("\n[[constraints]]\n");
        out.push_str(&format!(
            "expr = {}\n",
            toml_string(&textexpr::render_expr(&c.body, &names, PowStyle::Caret))
        ));
        out.push_str(&format!("rel = \"{}\"\n", c.rel.keyword()));
        out.push_str(&format!("forall = \"{}\"\n", c.quantifier.keyword()));
    }
    out
}

fn want_str(v: &toml::Value, ctx: &str) -> Result<String, FormatError> {
    v.as_str()
        .map(str::to_string)
        .ok_or_else(|| FormatError(format!("{}: expected a string", ctx)))
}

fn want_f64(v: &toml::Value, ctx: &str) -> Result<f64, FormatError> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(FormatError(format!("{}: expected a number", ctx))),
    }
}

fn want_usize(v: &toml::Value, ctx: &str) -> Result<usize, FormatError> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(FormatError(format!("{}: expected a non-negative integer", ctx))),
    }
}

fn get<'v>(t: &'v toml::Table, key: &str, ctx: &str) -> Result<&'v toml::Value, FormatError> {
    t.get(key)
        .ok_or_else(|| FormatError(format!("{}: missing field `{}`", ctx, key)))
}

/// Parse the canonical text form back into a validated [`ModelIR`].
pub fn parse_model_file(text: &str) -> Result<ModelIR, FormatError> {
    let doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| FormatError(format!("TOML syntax: {}", e.message())))?;

    let name = want_str(get(&doc, "name", "document")?, "name")?;
    let sense = match want_str(get(&doc, "sense", "document")?, "sense")?.as_str() {
        "min" => Sense::Min,
        "max" => Sense::Max,
        other => return Err(FormatError(format!("sense: `{}` is not \"min\"/\"max\"", other))),
    };
    let p = want_usize(get(&doc, "P", "document")?, "P")?;
    let q = want_usize(get(&doc, "Q", "document")?, "Q")?;
    let source_hash = match doc.get("source_hash") {
        Some(v) => Some(want_str(v, "source_hash")?),
        None => None,
    };

    let mut variables = Vec::new();
    if let Some(v) = doc.get("variables") {
        let arr = v
            .as_array()
            .ok_or_else(|| FormatError("variables: expected an array of tables".to_string()))?;
        for (k, item) in arr.iter().enumerate() {
            let ctx = format!("variables[{}]", k);
            let t = item
                .as_table()
                .ok_or_else(|| FormatError(format!("{}: expected a table", ctx)))?;
            let vname = want_str(get(t, "name", &ctx)?, &format!("{}.name", ctx))?;
            let lb = want_f64(get(t, "lb", &ctx)?, &format!("{}.lb", ctx))?;
            let ub = want_f64(get(t, "ub", &ctx)?, &format!("{}.ub", ctx))?;
            let domain = match want_str(get(t, "domain", &ctx)?, &format!("{}.domain", ctx))?.as_str()
            {
                "continuous" => Domain::Continuous,
                "integer" => Domain::Integer,
                "binary" => Domain::Binary,
                other => {
                    return Err(FormatError(format!(
                        "{}.domain: `{}` is not continuous/integer/binary",
                        ctx, other
                    )))
                }
            };
            let family = match want_str(get(t, "family", &ctx)?, &format!("{}.family", ctx))?
                .as_str()
            {
                "" => None,
                "y" => Some(Family::Y),
                "z" => Some(Family::Z),
                other => {
                    return Err(FormatError(format!(
                        "{}.family: `{}` is not \"\"/\"y\"/\"z\"",
                        ctx, other
                    )))
                }
            };
            variables.push(VariableDef { name: vname, lb, ub, domain, family });
        }
    }

    let names: Vec<String> = variables.iter().map(|v| v.name.clone()).collect();
    let parse_expr = |src: &str, ctx: &str| -> Result<Expr, FormatError> {
        let mut resolver = textexpr::table_resolver(&names);
        textexpr::parse_expression(src, &mut resolver)
            .map(Expr::fold)
            .map_err(|e| FormatError(format!("{}: {}", ctx, e.0)))
    };

    let objective = parse_expr(
        &want_str(get(&doc, "objective", "document")?, "objective")?,
        "objective",
    )?;

    let mut constraints = Vec::new();
    if let Some(v) = doc.get("constraints") {
        let arr = v
            .as_array()
            .ok_or_else(|| FormatError("constraints: expected an array of tables".to_string()))?;
        for (k, item) in arr.iter().enumerate() {
            let ctx = format!("constraints[{}]", k);
            let t = item
                .as_table()
                .ok_or_else(|| FormatError(format!("{}: expected a table", ctx)))?;
            let body = parse_expr(
                &want_str(get(t, "expr", &ctx)?, &format!("{}.expr", ctx))?,
                &format!("{}.expr", ctx),
            )?;
            let rel_raw = want_str(get(t, "rel", &ctx)?, &format!("{}.rel", ctx))?;
            let forall = match want_str(get(t, "forall", &ctx)?, &format!("{}.forall", ctx))?
                .as_str()
            {
                "" => Quantifier::None,
                "p" => Quantifier::ForAllP,
                "q" => Quantifier::ForAllQ,
                other => {
                    return Err(FormatError(format!(
                        "{}.forall: `{}` is not \"\"/\"p\"/\"q\"",
                        ctx, other
                    )))
                }
            };
            let (body, rel) = match rel_raw.as_str() {
                "<=" => (body, Rel::Le),
                "=" => (body, Rel::Eq),
                // ≥ is accepted on input and stored negated
                ">=" => (crate::expr::neg(body).fold(), Rel::Le),
                other => {
                    return Err(FormatError(format!(
                        "{}.rel: `{}` is not \"<=\"/\"=\"/\">=\"",
                        ctx, other
                    )))
                }
            };
            constraints.push(ConstraintDef { body, rel, quantifier: forall });
        }
    }

    let model = ModelIR { name, sense, p, q, source_hash, variables, objective, constraints };
    model.validate()?;
    Ok(model)
}

/// FNV-1a 64-bit hash, hex-encoded; used to stamp models with the source
/// text they were parsed from.
pub fn fnv1a64_hex(text: &str) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{:016x}", h)
}
