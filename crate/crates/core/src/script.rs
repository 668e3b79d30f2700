//! Modeling-script backend.
//!
//! [`emit_script`] writes a model as a PYOMO-flavored statement list: one
//! `Var` declaration per variable, an objective rule block, and one
//! `Constraint` statement per constraint.  Emission is canonical -- the same
//! model always produces byte-identical text.
//!
//! [`parse_script`] reads the same dialect back, tolerating the formatting
//! spread found in hand-written scripts (stray spaces after `model.`,
//! `expr=` without spaces, `>=` relations, `PositiveReals` domains, literal
//! `\n` statement separators with physical line wraps inside statements).
//! [`normalize_script`] composes the two, which gives a canonical form for
//! comparing scripts that differ only in those superficial ways.

use crate::error::{EmitError, FormatError};
use crate::expr::{self, Expr};
use crate::model::{ConstraintDef, Domain, ModelIR, Quantifier, Rel, Sense, VariableDef};
use crate::textexpr::{self, fmt_num, PowStyle};

/// Render one expression in script syntax (`**` powers, explicit `*`).
pub fn emit_expression(e: &Expr, names: &[String]) -> String {
    textexpr::render_expr(e, names, PowStyle::DoubleStar)
}

fn var_declaration(v: &VariableDef) -> String {
    if v.domain == Domain::Binary {
        return "Var(domain=Binary)".to_string();
    }
    let mut args: Vec<String> = Vec::new();
    match (v.lb.is_finite(), v.ub.is_finite()) {
        (true, true) => args.push(format!("bounds=({},{})", fmt_num(v.lb), fmt_num(v.ub))),
        (true, false) if v.lb == 0.0 => args.push("within=NonNegativeReals".to_string()),
        (true, false) => args.push(format!("bounds=({},None)", fmt_num(v.lb))),
        (false, true) => args.push(format!("bounds=(None,{})", fmt_num(v.ub))),
        (false, false) => {}
    }
    if v.domain == Domain::Integer {
        args.push("domain=Integers".to_string());
    }
    format!("Var({})", args.join(", "))
}

/// Emit the whole model as a script.  Requires an expanded model: family
/// placeholders have no script spelling.
pub fn emit_script(model: &ModelIR) -> Result<String, EmitError> {
    if !model.is_expanded() {
        return Err(EmitError(
            "script emission needs an expanded model (family constructs present)".to_string(),
        ));
    }
    let names: Vec<String> = model.variables.iter().map(|v| v.name.clone()).collect();
    let mut out = String::new();
    for v in &model.variables {
        out.push_str(&format!("model.{} = {}\n", v.name, var_declaration(v)));
    }
    out.push_str("def objective_function(model):\n");
    out.push_str(&format!(
        "    return {}\n",
        emit_expression(&model.objective, &names)
    ));
    let sense = match model.sense {
        Sense::Min => "minimize",
        Sense::Max => "maximize",
    };
    out.push_str(&format!(
        "model.obj = Objective(rule=objective_function, sense={sense})\n"
    ));
    for (k, c) in model.constraints.iter().enumerate() {
        let rel = match c.rel {
            Rel::Le => "<=",
            Rel::Eq => "==",
        };
        // A trailing constant moves to the right-hand side: x1 + 2*x2 - 13
        // prints as `x1 + 2*x2 <= 13`.
        let (lhs, rhs) = match &c.body {
            Expr::Binary(expr::BinaryOp::Sub, a, b) => match **b {
                Expr::Const(v) => (emit_expression(a, &names), fmt_num(v)),
                _ => (emit_expression(&c.body, &names), "0".to_string()),
            },
            _ => (emit_expression(&c.body, &names), "0".to_string()),
        };
        out.push_str(&format!(
            "model.Constraint{} = Constraint(expr = {lhs} {rel} {rhs})\n",
            k + 1
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// reader
// ---------------------------------------------------------------------------

/// Split script text into statements.  Hand-written labels separate
/// statements with a literal `\n` (sometimes `\\n`) and wrap long statements
/// across physical lines, so when literal separators are present the real
/// newlines are just wrapping and turn into spaces.
fn split_statements(text: &str) -> Vec<String> {
    let has_literal = text.contains("\\n");
    let joined: String;
    let canon: &str = if has_literal {
        joined = text.replace(['\n', '\r'], " ");
        &joined
    } else {
        text
    };
    let mut pieces: Vec<String> = Vec::new();
    for a in canon.split("\\\\n") {
        for b in a.split("\\n") {
            if has_literal {
                pieces.push(b.to_string());
            } else {
                for c in b.split('\n') {
                    pieces.push(c.to_string());
                }
            }
        }
    }
    pieces
        .into_iter()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn err(msg: impl Into<String>) -> FormatError {
    FormatError(msg.into())
}

/// Split `name=value` argument lists at top-level commas.
fn split_args(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur = String::new();
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

/// The inside of a call written as `Head( ... )`; `None` when `s` is not
/// that call.
fn call_body<'a>(s: &'a str, head: &str) -> Option<&'a str> {
    let rest = s.strip_prefix(head)?.trim_start();
    let rest = rest.strip_prefix('(')?;
    let rest = rest.trim_end();
    let rest = rest.strip_suffix(')')?;
    Some(rest)
}

fn parse_bound_token(s: &str) -> Result<Option<f64>, FormatError> {
    let t = s.trim();
    if t.is_empty() || t == "None" {
        return Ok(None);
    }
    t.parse::<f64>()
        .map(Some)
        .map_err(|_| err(format!("bad bound value {t:?}")))
}

struct VarDecl {
    name: String,
    lb: f64,
    ub: f64,
    domain: Domain,
}

fn parse_var_decl(name: &str, body: &str) -> Result<VarDecl, FormatError> {
    let mut decl = VarDecl {
        name: name.to_string(),
        lb: f64::NEG_INFINITY,
        ub: f64::INFINITY,
        domain: Domain::Continuous,
    };
    for arg in split_args(body) {
        let (key, value) = match arg.split_once('=') {
            Some((k, v)) => (k.trim(), v.trim()),
            None => (arg.as_str(), ""),
        };
        match key {
            "within" | "domain" => match value {
                "NonNegativeReals" | "PositiveReals" => decl.lb = 0.0,
                "Reals" => {}
                "Integers" => decl.domain = Domain::Integer,
                "NonNegativeIntegers" => {
                    decl.lb = 0.0;
                    decl.domain = Domain::Integer;
                }
                "Binary" => {
                    decl.domain = Domain::Binary;
                    decl.lb = 0.0;
                    decl.ub = 1.0;
                }
                other => return Err(err(format!("unknown variable domain {other:?}"))),
            },
            "bounds" => {
                let inner = value
                    .trim()
                    .strip_prefix('(')
                    .and_then(|v| v.strip_suffix(')'))
                    .ok_or_else(|| err(format!("bad bounds {value:?}")))?;
                let parts: Vec<&str> = inner.split(',').collect();
                if parts.len() != 2 {
                    return Err(err(format!("bad bounds {value:?}")));
                }
                if let Some(lb) = parse_bound_token(parts[0])? {
                    decl.lb = lb;
                }
                if let Some(ub) = parse_bound_token(parts[1])? {
                    decl.ub = ub;
                }
            }
            "initialize" => {} // harmless, ignored
            _ => return Err(err(format!("unknown Var argument {key:?}"))),
        }
    }
    Ok(decl)
}

/// Find the (one) top-level relation in a constraint expression.
fn split_relation(s: &str) -> Result<(&str, RelTok, &str), FormatError> {
    let bytes = s.as_bytes();
    let mut depth = 0i32;
    let mut i = 0usize;
    while i < bytes.len() {
        match bytes[i] {
            b'(' | b'[' => depth += 1,
            b')' | b']' => depth -= 1,
            b'<' | b'>' | b'=' if depth == 0 => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                    let rel = match bytes[i] {
                        b'<' => RelTok::Le,
                        b'>' => RelTok::Ge,
                        _ => RelTok::Eq,
                    };
                    return Ok((&s[..i], rel, &s[i + 2..]));
                }
            }
            _ => {}
        }
        i += 1;
    }
    Err(err(format!("no relation found in constraint {s:?}")))
}

#[derive(Clone, Copy)]
enum RelTok {
    Le,
    Ge,
    Eq,
}

/// Read a script back into a model.  Variables appear in declaration order;
/// names used without a declaration (right-hand-side data like `b1`) are
/// appended as free variables in order of first use.
pub fn parse_script(text: &str) -> Result<ModelIR, FormatError> {
    let statements = split_statements(text);
    let mut decls: Vec<VarDecl> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut sense: Option<Sense> = None;
    let mut objective: Option<Expr> = None;
    let mut constraints: Vec<ConstraintDef> = Vec::new();
    let mut in_def = false;

    fn parse_expr_interning(
        src: &str,
        names: &mut Vec<String>,
    ) -> Result<Expr, FormatError> {
        let mut resolve = |s: &str| {
            let idx = match names.iter().position(|n| n == s) {
                Some(i) => i,
                None => {
                    names.push(s.to_string());
                    names.len() - 1
                }
            };
            Some(expr::var(idx))
        };
        textexpr::parse_expression(src, &mut resolve)
    }

    for stmt in &statements {
        let stmt = stmt.trim();
        if let Some(rest) = stmt.strip_prefix("def ") {
            if !rest.trim_end().ends_with("(model):") {
                return Err(err(format!("unsupported def statement {stmt:?}")));
            }
            in_def = true;
            continue;
        }
        if in_def {
            if let Some(rest) = stmt.strip_prefix("return") {
                objective = Some(parse_expr_interning(rest.trim(), &mut names)?.fold());
                in_def = false;
                continue;
            }
            return Err(err(format!("expected a return statement, found {stmt:?}")));
        }
        // assignment statements: model.<attr> = <value>
        let rest = stmt
            .strip_prefix("model.")
            .or_else(|| stmt.strip_prefix("model ."))
            .ok_or_else(|| err(format!("unsupported statement {stmt:?}")))?;
        let rest = rest.trim_start();
        let (attr, value) = rest
            .split_once('=')
            .ok_or_else(|| err(format!("expected an assignment in {stmt:?}")))?;
        let attr = attr.trim();
        let value = value.trim();

        if let Some(body) = call_body(value, "Var") {
            let decl = parse_var_decl(attr, body)?;
            if names.iter().any(|n| n == attr) {
                return Err(err(format!("variable {attr:?} declared twice")));
            }
            names.push(attr.to_string());
            decls.push(decl);
        } else if let Some(body) = call_body(value, "Objective") {
            for arg in split_args(body) {
                if let Some((k, v)) = arg.split_once('=') {
                    if k.trim() == "sense" {
                        sense = Some(match v.trim() {
                            "minimize" => Sense::Min,
                            "maximize" => Sense::Max,
                            other => return Err(err(format!("unknown sense {other:?}"))),
                        });
                    }
                }
            }
        } else if let Some(body) = call_body(value, "Constraint") {
            // body reads `expr = <lhs> <rel> <rhs>`
            let inner = body
                .trim_start()
                .strip_prefix("expr")
                .ok_or_else(|| err(format!("constraint without expr= in {stmt:?}")))?
                .trim_start()
                .strip_prefix('=')
                .ok_or_else(|| err(format!("constraint without expr= in {stmt:?}")))?;
            let (lhs_text, rel, rhs_text) = split_relation(inner)?;
            let lhs = parse_expr_interning(lhs_text.trim(), &mut names)?.fold();
            let rhs = parse_expr_interning(rhs_text.trim(), &mut names)?.fold();
            let zero = |e: &Expr| matches!(e, Expr::Const(c) if *c == 0.0);
            let (body, out_rel) = match rel {
                RelTok::Le => (
                    if zero(&rhs) {
                        lhs
                    } else {
                        expr::sub(lhs, rhs)
                    },
                    Rel::Le,
                ),
                RelTok::Ge => (
                    if zero(&lhs) {
                        rhs
                    } else {
                        expr::sub(rhs, lhs)
                    },
                    Rel::Le,
                ),
                RelTok::Eq => (
                    if zero(&rhs) {
                        lhs
                    } else {
                        expr::sub(lhs, rhs)
                    },
                    Rel::Eq,
                ),
            };
            constraints.push(ConstraintDef {
                body: body.fold(),
                rel: out_rel,
                quantifier: Quantifier::None,
            });
        } else {
            return Err(err(format!("unsupported statement {stmt:?}")));
        }
    }

    let objective = objective.ok_or_else(|| err("script has no objective rule"))?;
    let sense = sense.ok_or_else(|| err("script has no Objective statement"))?;
    let mut variables: Vec<VariableDef> = decls
        .iter()
        .map(|d| VariableDef {
            name: d.name.clone(),
            lb: d.lb,
            ub: d.ub,
            domain: d.domain,
            family: None,
        })
        .collect();
    for name in names.iter().skip(decls.len()) {
        variables.push(VariableDef {
            name: name.clone(),
            lb: f64::NEG_INFINITY,
            ub: f64::INFINITY,
            domain: Domain::Continuous,
            family: None,
        });
    }
    let ir = ModelIR {
        name: "script".to_string(),
        sense,
        p: 0,
        q: 0,
        source_hash: None,
        variables,
        objective,
        constraints,
    };
    ir.validate().map_err(|e| err(e.to_string()))?;
    Ok(ir)
}

/// Canonical form of a script: parse it and emit it back.  Scripts that
/// differ only in whitespace, statement separators, attribute naming, or
/// relation direction normalize to the same text.
pub fn normalize_script(text: &str) -> Result<String, FormatError> {
    let model = parse_script(text)?;
    emit_script(&model).map_err(|e| err(e.to_string()))
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(src: &str) -> ModelIR {
        latex::parse_model(src, "m", 0, 0).unwrap().0
    }

    #[test]
    fn minimal_model_is_three_statements() {
        let m = model(r"\min \quad x_1 \\");
        let s = emit_script(&m).unwrap();
        assert_eq!(
            s,
            "model.x1 = Var()\n\
             def objective_function(model):\n    return x1\n\
             model.obj = Objective(rule=objective_function, sense=minimize)\n"
        );
    }

    #[test]
    fn trailing_constant_moves_to_the_right_hand_side() {
        let m = model(
            r"\min \quad \sqrt{x_1} + \sqrt{x_2} \\ \text{s.t.} \quad x_1 + 2 x_2 \leq 13 \\
              1 \leq x_i \leq 9, \quad i = 1, 2",
        );
        let s = emit_script(&m).unwrap();
        assert!(
            s.contains("model.Constraint1 = Constraint(expr = x1 + 2*x2 <= 13)"),
            "{s}"
        );
        assert!(s.contains("model.x1 = Var(bounds=(1,9))"), "{s}");
    }

    #[test]
    fn variable_declaration_forms() {
        let cases = [
            (f64::NEG_INFINITY, f64::INFINITY, Domain::Continuous, "Var()"),
            (0.0, f64::INFINITY, Domain::Continuous, "Var(within=NonNegativeReals)"),
            (1.0, 9.0, Domain::Continuous, "Var(bounds=(1,9))"),
            (2.5, f64::INFINITY, Domain::Continuous, "Var(bounds=(2.5,None))"),
            (f64::NEG_INFINITY, 4.0, Domain::Continuous, "Var(bounds=(None,4))"),
            (
                0.0,
                f64::INFINITY,
                Domain::Integer,
                "Var(within=NonNegativeReals, domain=Integers)",
            ),
            (f64::NEG_INFINITY, f64::INFINITY, Domain::Integer, "Var(domain=Integers)"),
            (0.0, 1.0, Domain::Binary, "Var(domain=Binary)"),
        ];
        for (lb, ub, domain, want) in cases {
            let v = VariableDef {
                name: "x1".into(),
                lb,
                ub,
                domain,
                family: None,
            };
            assert_eq!(var_declaration(&v), want);
        }
    }

    #[test]
    fn expression_pins() {
        let names = vec!["x1".to_string(), "x2".to_string()];
        assert_eq!(
            emit_expression(&expr::pow(expr::var(0), expr::con(0.6)), &names),
            "x1**0.6"
        );
        assert_eq!(emit_expression(&expr::con(5.0), &names), "5");
        assert_eq!(
            emit_expression(&expr::sqrt(expr::mul(expr::var(0), expr::var(1))), &names),
            "sqrt(x1*x2)"
        );
    }

    #[test]
    fn emission_is_deterministic() {
        let m = model(
            r"\max \quad \log(x_1 + 1) + 5 \cos(x_2) + 4 x_3 \\ \text{st} \quad
              x_1^2 + \sin(x_2) + e^{x_3} \leq 20 \\ x_1, x_2, x_3 \geq 0",
        );
        assert_eq!(emit_script(&m).unwrap(), emit_script(&m).unwrap());
    }

    #[test]
    fn unexpanded_families_cannot_be_emitted() {
        let (m, _) = latex::parse_model(
            r"\min \quad x_1 + \sum_{p=1}^P y_p \\ \text{s.t.} \quad x_1 - y_p \leq 0, \forall p",
            "m",
            2,
            0,
        )
        .unwrap();
        assert!(emit_script(&m).is_err());
        assert!(emit_script(&m.expand_families()).is_ok());
    }

    #[test]
    fn emitted_expressions_reparse_and_evaluate_identically() {
        let m = model(
            r"\min \quad x_1^{0.6} + \frac{x_2^2}{16} - 2 \cos(2 \pi x_2) + e^{x_1} \\
              \text{s.t.} \quad \sqrt{x_1 + x_2} - \log(x_2 + 1) \leq 4",
        );
        let names: Vec<String> = m.variables.iter().map(|v| v.name.clone()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for e in [m.objective.clone(), m.constraints[0].body.clone()] {
            let text = emit_expression(&e, &names);
            let mut resolve = textexpr::table_resolver(&names);
            let back = textexpr::parse_expression(&text, &mut resolve).unwrap();
            for _ in 0..100 {
                let x: Vec<f64> = (0..names.len()).map(|_| rng.gen_range(0.1..4.0)).collect();
                let a = e.eval_flat(&x).unwrap();
                let b = back.eval_flat(&x).unwrap();
                assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{text}");
            }
        }
    }

    #[test]
    fn round_trip_through_the_reader() {
        let m = model(
            r"\min \quad x_1^2 + x_2 + y \\ \text{s.t.} \quad x_1 + x_2 \geq 2 \\
              4 x_1 - x_2 = 0 \\ 0 \leq x_1 \leq 14 \\ x_1 \quad \text{integer} \\
              x_2 \geq 0 \\ y \in \{0, 1\}",
        );
        let s = emit_script(&m).unwrap();
        let back = parse_script(&s).unwrap();
        assert_eq!(m.variables, back.variables);
        assert_eq!(m.constraints.len(), back.constraints.len());
        assert_eq!(emit_script(&back).unwrap(), s);
    }

    #[test]
    fn reader_tolerates_label_dialect() {
        let label = "model.p1 = Var()\\nmodel.p2 = Var()\\ndef objective_rule(model):\\n \
                     return p1**3 + exp(p1 + p2)/(p1**2 + 1)\\n model.objective = \
                     Objective(rule=objective_rule, sense=maximize)\\nmodel. Constraint1 = \
                     Constraint(expr = (p1*p2)/(p1 + p2) == 3)";
        let m = parse_script(label).unwrap();
        assert_eq!(m.sense, Sense::Max);
        assert_eq!(m.variables.len(), 2);
        assert_eq!(m.constraints.len(), 1);
        assert_eq!(m.constraints[0].rel, Rel::Eq);
        // (p1*p2)/(p1+p2) - 3 at p1=p2=6 -> 0
        assert_eq!(m.constraints[0].body.eval_flat(&[6.0, 6.0]).unwrap(), 0.0);
    }

    #[test]
    fn reader_handles_wraps_and_double_escapes() {
        // physical newlines inside statements are wrapping artifacts when
        // literal \n separators are present
        let label = "model.x1 = Var(within=\nNonNegativeReals)\\ndef objective_function(model):\\n\
                     return x1\\nmodel.obj = Objective(rule=\nobjective_function, sense=minimize)";
        let m = parse_script(label).unwrap();
        assert_eq!(m.variables[0].lb, 0.0);
        // and some labels escape the separator twice
        let label2 = "model.x1 = Var()\\\\ndef objective_function(model):\\\\n    return x1\\\\n\
                      model.obj = Objective(rule=objective_function, sense=minimize)";
        assert!(parse_script(label2).is_ok());
    }

    #[test]
    fn reader_negates_ge_and_maps_positive_reals() {
        let label = "model.x1 = Var(within=PositiveReals)\n\
                     def objective_function(model):\n    return log(x1)\n\
                     model.obj = Objective(rule=objective_function, sense=minimize)\n\
                     model.Constraint1 = Constraint(expr = x1**2 >= 5)\n";
        let m = parse_script(label).unwrap();
        assert_eq!(m.variables[0].lb, 0.0);
        assert_eq!(m.constraints[0].rel, Rel::Le);
        // stored as 5 - x1^2 <= 0
        assert_eq!(m.constraints[0].body.eval_flat(&[1.0]).unwrap(), 4.0);
    }

    #[test]
    fn undeclared_names_become_trailing_free_variables() {
        let label = "model.x1 = Var()\ndef objective_function(model):\n    return x1\n\
                     model.obj = Objective(rule=objective_function, sense=minimize)\n\
                     model.Constraint1 = Constraint(expr = 2*x1 + x2 == b1)\n";
        let m = parse_script(label).unwrap();
        let names: Vec<&str> = m.variables.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(names, ["x1", "x2", "b1"]);
        for v in &m.variables[1..] {
            assert!(v.lb.is_infinite() && v.ub.is_infinite());
        }
    }

    #[test]
    fn normalization_is_idempotent_and_merges_dialects() {
        let a = "model.x1 = Var(within=PositiveReals)\\nmodel.x2 = Var(within=PositiveReals)\\n\
                 def objective_function(model):\\n return log(x1) + log(x2)\\n\
                 model.obj = Objective(rule=objective_function, sense=minimize)\\n\
                 model.Constraint1 = Constraint(expr = x1 + x2**2 <= 7)";
        let b = "model.x1 = Var(within=NonNegativeReals)\n\
                 model.x2 = Var(within=NonNegativeReals)\n\
                 def objective_rule(model):\n    return log(x1) + log(x2)\n\
                 model.OF = Objective(rule=objective_rule, sense=minimize)\n\
                 model. Constraint1 = Constraint(expr= x1 + x2**2 - 7 <= 0)";
        let na = normalize_script(a).unwrap();
        let nb = normalize_script(b).unwrap();
        assert_eq!(na, nb);
        assert_eq!(normalize_script(&na).unwrap(), na);
    }

    #[test]
    fn reader_rejects_garbage() {
        assert!(parse_script("nonsense here").is_err());
        assert!(parse_script("model.x1 = Var()\n").is_err()); // no objective
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise: String = (0..40)
            .map(|_| (b'a' + rng.gen_range(0..26)) as char)
            .collect();
        assert!(parse_script(&noise).is_err());
    }
}
