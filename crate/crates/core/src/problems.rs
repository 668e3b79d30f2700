//! The TP1-TP10 test suite, built directly as IR.
//!
//! Every problem here also exists as a LaTeX fixture under `fixtures/`; the
//! builders in this module are written independently of the parser so the two
//! can be checked against each other.  Variables are declared in first-use
//! order (objective first, then constraints), which is the order the parser
//! discovers them in, and constraint bodies are normalized to `body <= 0` /
//! `body = 0` with the same left-folded tree shape the parser produces.

use crate::error::SpecError;
use crate::expr::{add, con, cos, div, exp, log, mul, neg, pow, sin, sqrt, sub, sum, tan, var, Expr, Family};
use crate::model::{ConstraintDef, Domain, ModelIR, Quantifier, Sense, VariableDef};

// sin is pulled in for parity with the other constructors even though the
// current suite never uses it directly.
#[allow(unused_imports)]
use sin as _sin_unused;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const PI: f64 = std::f64::consts::PI;
const INF: f64 = f64::INFINITY;

/// Number of problems in the suite.
pub const SUITE_SIZE: u8 = 10;

/// LaTeX source for a problem, as shipped in `fixtures/`.
pub fn fixture_latex(tp: u8) -> Result<&'static str, SpecError> {
    Ok(match tp {
        1 => include_str!("../fixtures/tp1.tex"),
        2 => include_str!("../fixtures/tp2.tex"),
        3 => include_str!("../fixtures/tp3.tex"),
        4 => include_str!("../fixtures/tp4.tex"),
        5 => include_str!("../fixtures/tp5.tex"),
        6 => include_str!("../fixtures/tp6.tex"),
        7 => include_str!("../fixtures/tp7.tex"),
        8 => include_str!("../fixtures/tp8.tex"),
        9 => include_str!("../fixtures/tp9.tex"),
        10 => include_str!("../fixtures/tp10.tex"),
        _ => return Err(SpecError(format!("unknown test problem TP{tp}"))),
    })
}

/// How a scale `S = |y| + |z|` is split across the two families.
///
/// Problems that only use `y` put everything there.  Problems with both
/// families split as evenly as possible, with the odd member going to `y`.
/// TP1-TP3 have no scalable part at all, so any nonzero scale is an error
/// rather than something to silently ignore.
pub fn family_sizes(tp: u8, scale: usize) -> Result<(usize, usize), SpecError> {
    match tp {
        1..=3 => {
            if scale == 0 {
                Ok((0, 0))
            } else {
                Err(SpecError(format!(
                    "TP{tp} is not scalable; requested scale {scale}"
                )))
            }
        }
        4 | 5 | 8 | 9 => Ok((scale, 0)),
        6 | 7 | 10 => Ok((scale - scale / 2, scale / 2)),
        _ => Err(SpecError(format!("unknown test problem TP{tp}"))),
    }
}

/// Build `TP{tp}` with explicit family sizes.
pub fn build(tp: u8, p: usize, q: usize) -> Result<ModelIR, SpecError> {
    let m = match tp {
        1 => tp1(),
        2 => tp2(),
        3 => tp3(),
        4 => tp4(p),
        5 => tp5(p),
        6 => tp6(p, q),
        7 => tp7(p, q),
        8 => tp8(p),
        9 => tp9(p),
        10 => tp10(p, q),
        _ => return Err(SpecError(format!("unknown test problem TP{tp}"))),
    };
    if m.q > 0 && q != m.q || m.p > 0 && p != m.p {
        return Err(SpecError(format!(
            "TP{tp} cannot host the requested family sizes P={p}, Q={q}"
        )));
    }
    if (p > 0 && m.p == 0) || (q > 0 && m.q == 0) {
        return Err(SpecError(format!(
            "TP{tp} has no use for the requested family sizes P={p}, Q={q}"
        )));
    }
    m.validate()
        .map_err(|e| SpecError(format!("TP{tp} failed validation: {e}")))?;
    Ok(m)
}

/// Build `TP{tp}` at benchmark scale `S = |y| + |z|`.
pub fn instance(tp: u8, scale: usize) -> Result<ModelIR, SpecError> {
    let (p, q) = family_sizes(tp, scale)?;
    build(tp, p, q)
}

fn x(i: usize) -> Expr {
    var(i)
}

fn yp() -> Expr {
    Expr::Member(Family::Y)
}

fn zq() -> Expr {
    Expr::Member(Family::Z)
}

fn scalar(name: &str, lb: f64, ub: f64) -> VariableDef {
    VariableDef::continuous(name, lb, ub)
}

fn member(fam: Family, ord: usize, lb: f64, ub: f64) -> VariableDef {
    VariableDef {
        name: format!("{}{}", fam.base(), ord + 1),
        lb,
        ub,
        domain: Domain::Continuous,
        family: Some(fam),
    }
}

fn members(fam: Family, count: usize, lb: f64, ub: f64) -> Vec<VariableDef> {
    (0..count).map(|ord| member(fam, ord, lb, ub)).collect()
}

fn shell(name: &str, sense: Sense, p: usize, q: usize) -> ModelIR {
    ModelIR {
        name: name.to_string(),
        sense,
        p,
        q,
        source_hash: None,
        variables: Vec::new(),
        objective: con(0.0),
        constraints: Vec::new(),
    }
}

/// `x_1^{0.6}+x_2^{0.6}+x_3^{0.4}-4x_3+2x_4+5x_5-x_6`, the shared TP1/TP3/TP4
/// objective head.  Variable indices are the natural 0..6 order.
fn tp1_objective_head() -> Expr {
    sub(
        add(
            add(
                sub(
                    add(
                        add(pow(x(0), con(0.6)), pow(x(1), con(0.6))),
                        pow(x(2), con(0.4)),
                    ),
                    mul(con(4.0), x(2)),
                ),
                mul(con(2.0), x(3)),
            ),
            mul(con(5.0), x(4)),
        ),
        x(5),
    )
}

/// The three equalities and three inequalities that TP1 and TP3 share.
fn tp1_constraints() -> Vec<ConstraintDef> {
    vec![
        ConstraintDef::eq(sub(sub(x(1), mul(con(3.0), x(0))), mul(con(3.0), x(3)))),
        ConstraintDef::eq(sub(sub(x(2), mul(con(2.0), x(1))), mul(con(2.0), x(4)))),
        ConstraintDef::eq(sub(mul(con(4.0), x(3)), x(5))),
        ConstraintDef::le(sub(add(x(0), mul(con(2.0), x(3))), con(4.0))),
        ConstraintDef::le(sub(add(x(1), x(4)), con(4.0))),
        ConstraintDef::le(sub(add(x(2), x(5)), con(6.0))),
    ]
}

fn tp1() -> ModelIR {
    let mut m = shell("tp1", Sense::Min, 0, 0);
    m.variables = vec![
        scalar("x1", 0.0, 3.0),
        scalar("x2", 0.0, INF),
        scalar("x3", 0.0, 4.0),
        scalar("x4", 0.0, INF),
        scalar("x5", 0.0, 2.0),
        scalar("x6", 0.0, INF),
    ];
    m.objective = tp1_objective_head();
    m.constraints = tp1_constraints();
    m
}

/// The six TP2 constraints, shared verbatim by TP5.  The two problems
/// discover the variables in different orders (TP5's objective already
/// mentions x4), so the caller passes the slot of each of x1..x7.
fn tp2_constraints(ix: [usize; 7]) -> Vec<ConstraintDef> {
    let [x1, x2, x3, x4, x5, x6, x7] = ix;
    vec![
        ConstraintDef::le(sub(
            add(
                mul(con(35.0), pow(x(x2), con(0.6))),
                mul(con(35.0), pow(x(x3), con(0.6))),
            ),
            x(x1),
        )),
        ConstraintDef::eq(add(
            add(
                sub(
                    sub(
                        add(neg(mul(con(300.0), x(x3))), mul(con(7500.0), x(x5))),
                        mul(con(7500.0), x(x6)),
                    ),
                    mul(mul(con(25.0), x(x4)), x(x5)),
                ),
                mul(mul(con(25.0), x(x4)), x(x6)),
            ),
            mul(x(x3), x(x4)),
        )),
        ConstraintDef::eq(sub(
            sub(
                sub(
                    add(
                        add(mul(con(100.0), x(x2)), mul(con(155.365), x(x4))),
                        mul(con(2500.0), x(x7)),
                    ),
                    mul(x(x2), x(x4)),
                ),
                mul(mul(con(25.0), x(x4)), x(x7)),
            ),
            con(15536.5),
        )),
        ConstraintDef::eq(add(neg(x(x5)), log(add(neg(x(x4)), con(900.0))))),
        ConstraintDef::eq(add(neg(x(x6)), log(add(x(x4), con(300.0))))),
        ConstraintDef::eq(add(
            neg(x(x7)),
            log(add(neg(mul(con(2.0), x(x4))), con(700.0))),
        )),
    ]
}

fn tp2() -> ModelIR {
    let mut m = shell("tp2", Sense::Min, 0, 0);
    // First-use order: x1 (objective), x2, x3, then x5 and x6 ahead of x4
    // in the heat-balance equality, and finally x7.
    m.variables = vec![
        scalar("x1", 0.0, 1000.0),
        scalar("x2", 0.0, 40.0),
        scalar("x3", 0.0, 40.0),
        scalar("x5", 6.3, 6.7),
        scalar("x6", 5.9, 6.4),
        scalar("x4", 100.0, 300.0),
        scalar("x7", 4.5, 6.25),
    ];
    m.objective = x(0);
    m.constraints = tp2_constraints([0, 1, 2, 5, 3, 4, 6]);
    m
}

fn tp3() -> ModelIR {
    let mut m = tp1();
    m.name = "tp3".to_string();
    m.objective = sub(
        add(tp1_objective_head(), div(pow(x(2), con(2.0)), con(16.0))),
        mul(con(2.0), cos(mul(con(TWO_PI), x(1)))),
    );
    m
}

fn tp4(p: usize) -> ModelIR {
    let mut m = shell("tp4", Sense::Min, p, 0);
    m.variables = vec![
        scalar("x1", 0.0, 3.0),
        scalar("x2", 0.0, INF),
        scalar("x3", 0.0, 4.0),
        scalar("x4", 0.0, INF),
        scalar("x5", 0.0, 2.0),
        scalar("x6", 0.0, INF),
    ];
    m.variables.extend(members(Family::Y, p, 1.0, 5.0));
    m.objective = add(
        sub(
            sub(
                sub(
                    add(tp1_objective_head(), div(pow(x(2), con(2.0)), con(16.0))),
                    div(pow(x(1), con(2.0)), con(16.0)),
                ),
                mul(con(2.0), cos(mul(con(TWO_PI), x(2)))),
            ),
            mul(con(2.0), cos(mul(con(TWO_PI), x(1)))),
        ),
        sum(Family::Y, mul(yp(), pow(x(0), con(0.6)))),
    );
    m.constraints = vec![
        ConstraintDef::eq(sub(sub(x(1), mul(con(3.0), x(0))), mul(con(3.0), x(3)))),
        ConstraintDef::eq(sub(sub(x(2), mul(con(2.0), x(1))), mul(con(2.0), x(4)))),
        ConstraintDef::le(sub(add(x(0), mul(con(2.0), x(3))), con(4.0))),
        ConstraintDef::le(sub(add(x(1), x(4)), con(4.0))),
        ConstraintDef::le(sub(add(x(2), x(5)), con(6.0))),
        ConstraintDef::le(sub(sqrt(add(add(x(0), x(1)), x(2))), yp()))
            .forall(Quantifier::ForAllP),
    ];
    m
}

fn tp5(p: usize) -> ModelIR {
    let mut m = shell("tp5", Sense::Min, p, 0);
    // Unlike TP2, the objective already mentions x4, so it lands in slot 1.
    let (x4, x5, x6) = (1, 4, 5);
    m.variables = vec![
        scalar("x1", 0.0, 1000.0),
        scalar("x4", 100.0, 300.0),
        scalar("x2", 0.0, 40.0),
        scalar("x3", 0.0, 40.0),
        scalar("x5", 6.3, 6.7),
        scalar("x6", 5.9, 6.4),
        scalar("x7", 4.5, 6.25),
    ];
    m.variables.extend(members(Family::Y, p, 10.0, 30.0));
    m.objective = add(
        sub(x(0), mul(con(50.0), cos(mul(con(TWO_PI), x(x4))))),
        sum(Family::Y, div(pow(yp(), con(2.0)), x(x4))),
    );
    m.constraints = tp2_constraints([0, 2, 3, 1, 4, 5, 6]);
    m.constraints.push(
        ConstraintDef::le(sub(add(add(pow(x(x4), con(0.2)), x(x5)), x(x6)), yp()))
            .forall(Quantifier::ForAllP),
    );
    m
}

fn tp6(p: usize, q: usize) -> ModelIR {
    let mut m = shell("tp6", Sense::Min, p, q);
    m.variables = vec![
        scalar("x1", 0.0, INF),
        scalar("x2", 0.0, INF),
        scalar("x3", 1.0, 5.0),
        scalar("x4", 0.0, 6.0),
        scalar("x5", 1.0, 5.0),
        scalar("x6", 0.0, 10.0),
    ];
    m.variables.extend(members(Family::Y, p, 0.0, 5.0));
    m.variables.extend(members(Family::Z, q, 0.0, 5.0));
    let sq = |e: Expr, c: f64| pow(sub(e, con(c)), con(2.0));
    m.objective = sub(
        add(
            sub(
                sub(
                    sub(
                        sub(
                            sub(
                                neg(mul(con(25.0), sq(x(0), 2.0))),
                                sq(x(1), 2.0),
                            ),
                            sq(x(2), 1.0),
                        ),
                        sq(x(3), 4.0),
                    ),
                    sq(x(4), 1.0),
                ),
                sq(x(5), 4.0),
            ),
            sum(Family::Y, pow(sub(x(2), yp()), con(2.0))),
        ),
        sum(Family::Z, pow(sub(x(4), zq()), con(2.0))),
    );
    m.constraints = vec![
        ConstraintDef::le(add(sub(neg(sq(x(2), 3.0)), x(3)), con(4.0))),
        ConstraintDef::le(add(sub(neg(sq(x(4), 3.0)), x(5)), con(4.0))),
        ConstraintDef::le(add(sub(neg(x(0)), x(1)), con(2.0))),
        ConstraintDef::le(sub(sub(x(0), mul(con(3.0), x(1))), con(2.0))),
        ConstraintDef::le(sub(sub(x(1), x(0)), con(2.0))),
        ConstraintDef::le(sub(add(x(0), x(1)), con(6.0))),
        ConstraintDef::le(add(sub(yp(), x(2)), con(1.0))).forall(Quantifier::ForAllP),
        ConstraintDef::le(sub(
            sub(pow(zq(), con(2.0)), pow(x(2), con(2.0))),
            pow(x(4), con(2.0)),
        ))
        .forall(Quantifier::ForAllQ),
    ];
    m
}

fn tp7(p: usize, q: usize) -> ModelIR {
    let mut m = shell("tp7", Sense::Min, p, q);
    // First-use order: the objective touches x1,x2,x5,x6,x7,x8,x9 and the
    // mass balances bring in x3,x4 afterwards.
    let (x1, x2, x5, x6, x7, x8, x9, x3, x4) = (0, 1, 2, 3, 4, 5, 6, 7, 8);
    m.variables = vec![
        scalar("x1", 0.0, 300.0),
        scalar("x2", 0.0, 300.0),
        scalar("x5", 0.0, 100.0),
        scalar("x6", 0.0, 300.0),
        scalar("x7", 0.0, 100.0),
        scalar("x8", 0.0, 200.0),
        scalar("x9", 0.01, 0.03),
        scalar("x3", 0.0, 100.0),
        scalar("x4", 0.0, 200.0),
    ];
    m.variables.extend(members(Family::Y, p, 0.0, 1.0));
    m.variables.extend(members(Family::Z, q, 1.0, 200.0));
    let head = add(
        add(
            sub(
                add(
                    sub(
                        add(mul(con(6.0), x(x1)), mul(con(16.0), x(x2))),
                        mul(con(9.0), x(x5)),
                    ),
                    mul(con(10.0), add(x(x6), x(x7))),
                ),
                mul(con(15.0), x(x8)),
            ),
            pow(x(x9), con(2.0)),
        ),
        mul(con(50.0), cos(mul(con(PI), x(x9)))),
    );
    m.objective = add(
        sub(
            sub(
                sub(head, mul(con(25.0), cos(mul(con(PI), x(x8))))),
                log(sub(x(x8), x(x9))),
            ),
            sum(Family::Y, pow(sub(yp(), x(x9)), con(2.0))),
        ),
        sum(Family::Z, pow(sub(zq(), x(x8)), con(2.0))),
    );
    m.constraints = vec![
        ConstraintDef::eq(sub(sub(add(x(x1), x(x2)), x(x3)), x(x4))),
        ConstraintDef::eq(sub(add(x(x3), x(x6)), x(x5))),
        ConstraintDef::eq(sub(add(x(x4), x(x7)), x(x8))),
        ConstraintDef::eq(sub(
            sub(
                add(mul(con(0.03), x(x1)), mul(con(0.01), x(x2))),
                mul(x(x3), x(x9)),
            ),
            mul(x(x4), x(x9)),
        )),
        ConstraintDef::le(sub(
            add(mul(x(x3), x(x9)), mul(con(0.02), x(x6))),
            mul(con(0.025), x(x5)),
        )),
        ConstraintDef::le(sub(
            add(mul(x(x4), x(x9)), mul(con(0.02), x(x7))),
            mul(con(0.015), x(x8)),
        )),
        ConstraintDef::le(sub(pow(x(x9), con(2.0)), pow(yp(), con(2.0))))
            .forall(Quantifier::ForAllP),
        ConstraintDef::le(sub(pow(x(x8), con(2.0)), pow(zq(), con(2.0))))
            .forall(Quantifier::ForAllQ),
    ];
    m
}

fn tp8(p: usize) -> ModelIR {
    let mut m = shell("tp8", Sense::Min, p, 0);
    m.variables = (1..=13)
        .map(|i| {
            let (lb, ub) = match i {
                1..=4 => (0.0, 3.0),
                5..=9 => (0.0, 1.0),
                10..=12 => (0.0, 100.0),
                _ => (0.0, 1.0),
            };
            scalar(&format!("x{i}"), lb, ub)
        })
        .collect();
    m.variables.extend(members(Family::Y, p, -5.0, 5.0));
    // Concrete sums over i expand to left-folded chains at parse time;
    // mirror that exactly.
    let chain4 = |f: &dyn Fn(usize) -> Expr| {
        add(add(add(f(0), f(1)), f(2)), f(3))
    };
    let head = chain4(&|i| x(i));
    let squares = chain4(&|i| pow(x(i), con(2.0)));
    let squares2 = chain4(&|i| pow(x(i), con(2.0)));
    let cosines = || chain4(&|i| cos(mul(con(TWO_PI), x(i))));
    let tail: Expr = (5..=13).map(|i| x(i - 1)).reduce(add).unwrap();
    m.objective = add(
        sub(
            sub(
                sub(
                    sub(mul(con(5.0), head), mul(con(5.0), squares)),
                    tail,
                ),
                mul(con(20.0), exp(neg(mul(con(0.1), sqrt(squares2))))),
            ),
            exp(mul(con(0.25), cosines())),
        ),
        sum(Family::Y, add(pow(yp(), con(2.0)), cosines())),
    );
    let x_ = |i: usize| x(i - 1);
    m.constraints = vec![
        ConstraintDef::le(sub(
            add(
                add(add(mul(con(2.0), x_(1)), mul(con(2.0), x_(2))), x_(10)),
                x_(11),
            ),
            con(10.0),
        )),
        ConstraintDef::le(sub(
            add(
                add(add(mul(con(2.0), x_(1)), mul(con(2.0), x_(3))), x_(10)),
                x_(12),
            ),
            con(10.0),
        )),
        ConstraintDef::le(sub(
            add(
                add(add(mul(con(2.0), x_(2)), mul(con(2.0), x_(3))), x_(11)),
                x_(12),
            ),
            con(10.0),
        )),
        ConstraintDef::le(sub(x_(10), mul(con(8.0), x_(1)))),
        ConstraintDef::le(sub(x_(11), mul(con(8.0), x_(2)))),
        ConstraintDef::le(sub(x_(12), mul(con(8.0), x_(3)))),
        ConstraintDef::le(sub(sub(x_(10), x_(5)), mul(con(2.0), x_(4)))),
        ConstraintDef::le(sub(sub(x_(11), x_(7)), mul(con(2.0), x_(6)))),
        ConstraintDef::le(sub(sub(x_(12), x_(9)), mul(con(2.0), x_(8)))),
        ConstraintDef::le(sub(cosines(), yp())).forall(Quantifier::ForAllP),
    ];
    m
}

fn tp9(p: usize) -> ModelIR {
    let mut m = shell("tp9", Sense::Min, p, 0);
    // x4 and x6 appear (in that order) in the first constraint, before x5,
    // x7 and x8 do, so the declaration order interleaves.
    let (x1, x2, x3, x4, x6, x5, x7, x8) = (0, 1, 2, 3, 4, 5, 6, 7);
    m.variables = vec![
        scalar("x1", 100.0, 10000.0),
        scalar("x2", 1000.0, 10000.0),
        scalar("x3", 1000.0, 10000.0),
        scalar("x4", 10.0, 1000.0),
        scalar("x6", 10.0, 1000.0),
        scalar("x5", 10.0, 1000.0),
        scalar("x7", 10.0, 1000.0),
        scalar("x8", 10.0, 1000.0),
    ];
    m.variables.extend(members(
        Family::Y,
        p,
        -std::f64::consts::FRAC_PI_2,
        std::f64::consts::FRAC_PI_2,
    ));
    let x123 = || add(add(x(x1), x(x2)), x(x3));
    m.objective = add(
        x123(),
        sum(
            Family::Y,
            pow(
                sub(tan(yp()), mul(con(15.0), cos(mul(con(TWO_PI), x123())))),
                con(2.0),
            ),
        ),
    );
    m.constraints = vec![
        ConstraintDef::le(sub(
            add(mul(con(0.0025), x(x4)), mul(con(0.0025), x(x6))),
            con(1.0),
        )),
        ConstraintDef::le(sub(
            sub(
                add(mul(con(0.0025), x(x5)), mul(con(0.0025), x(x7))),
                mul(con(0.0025), x(x4)),
            ),
            con(1.0),
        )),
        ConstraintDef::le(sub(
            sub(mul(con(0.01), x(x8)), mul(con(0.01), x(x5))),
            con(1.0),
        )),
        ConstraintDef::le(sub(
            add(
                add(neg(mul(x(x1), x(x6))), mul(con(100.0), x(x1))),
                mul(con(833.33), x(x4)),
            ),
            con(83333.33),
        )),
        ConstraintDef::le(add(
            sub(
                add(neg(mul(x(x2), x(x7))), mul(con(1250.0), x(x5))),
                mul(con(1250.0), x(x4)),
            ),
            mul(x(x2), x(x4)),
        )),
        ConstraintDef::le(add(
            add(
                sub(neg(mul(x(x3), x(x8))), mul(con(2500.0), x(x5))),
                mul(x(x3), x(x5)),
            ),
            con(1250000.0),
        )),
        ConstraintDef::le(sub(tan(yp()), log(x123()))).forall(Quantifier::ForAllP),
        ConstraintDef::le(sub(neg(tan(yp())), log(x123()))).forall(Quantifier::ForAllP),
    ];
    m
}

fn tp10(p: usize, q: usize) -> ModelIR {
    let mut m = shell("tp10", Sense::Min, p, q);
    // Objective first-use order: x1, x5, x3; the side constraints add x2, x4.
    let (x1, x5, x3, x2, x4) = (0, 1, 2, 3, 4);
    m.variables = vec![
        scalar("x1", 78.0, 102.0),
        scalar("x5", 27.0, 45.0),
        scalar("x3", 27.0, 45.0),
        scalar("x2", 33.0, 45.0),
        scalar("x4", 27.0, 45.0),
    ];
    m.variables.extend(members(Family::Y, p, 0.0, 5.0));
    m.variables.extend(members(Family::Z, q, -5.0, 5.0));
    m.objective = sub(
        add(
            sub(
                add(
                    add(
                        mul(con(37.293239), x(x1)),
                        mul(mul(con(0.8356891), x(x1)), x(x5)),
                    ),
                    mul(con(5.3578547), pow(x(x3), con(2.0))),
                ),
                con(40792.14),
            ),
            sum(Family::Y, pow(sub(sub(yp(), x(x1)), x(x3)), con(2.0))),
        ),
        mul(
            con(150.0),
            sum(Family::Z, cos(mul(con(TWO_PI), zq()))),
        ),
    );
    let t = |c: f64, a: usize, b: usize| mul(mul(con(c), x(a)), x(b));
    m.constraints = vec![
        ConstraintDef::le(sub(
            add(
                sub(t(0.0056858, x2, x5), t(0.0022053, x3, x5)),
                t(0.0006262, x1, x4),
            ),
            con(6.665593),
        )),
        ConstraintDef::le(sub(
            sub(
                add(neg(t(0.0056858, x2, x5)), t(0.0022053, x3, x5)),
                t(0.0006262, x1, x4),
            ),
            con(85.334407),
        )),
        ConstraintDef::le(sub(
            add(
                add(
                    t(0.0071317, x2, x5),
                    mul(con(0.0021813), pow(x(x3), con(2.0))),
                ),
                t(0.0029955, x1, x2),
            ),
            con(29.48751),
        )),
        ConstraintDef::le(add(
            sub(
                sub(
                    neg(t(0.0071317, x2, x5)),
                    mul(con(0.0021813), pow(x(x3), con(2.0))),
                ),
                t(0.0029955, x1, x2),
            ),
            con(9.48751),
        )),
        ConstraintDef::le(sub(
            add(
                add(t(0.0047026, x3, x5), t(0.0019085, x3, x4)),
                t(0.0012547, x1, x3),
            ),
            con(15.699039),
        )),
        ConstraintDef::le(add(
            sub(
                sub(neg(t(0.0047026, x3, x5)), t(0.0019085, x3, x4)),
                t(0.0012547, x1, x3),
            ),
            con(10.699039),
        )),
        ConstraintDef::le(sub(yp(), log(add(add(x(x1), x(x3)), con(1.0)))))
            .forall(Quantifier::ForAllP),
        ConstraintDef::le(sub(
            sub(
                sub(pow(zq(), con(3.0)), pow(x(x1), con(3.0))),
                pow(x(x3), con(3.0)),
            ),
            pow(x(x5), con(3.0)),
        ))
        .forall(Quantifier::ForAllQ),
    ];
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latex::parse_model;

    /// Every builder output passes model validation at a spread of scales.
    #[test]
    fn builders_validate() {
        for tp in 1..=SUITE_SIZE {
            for scale in [0usize, 1, 2, 5, 20] {
                match instance(tp, scale) {
                    Ok(m) => {
                        let (p, q) = family_sizes(tp, scale).unwrap();
                        assert_eq!(m.p, p, "TP{tp} scale {scale}");
                        assert_eq!(m.q, q, "TP{tp} scale {scale}");
                        assert_eq!(
                            m.n_vars(),
                            m.variables.len(),
                            "TP{tp} scale {scale}"
                        );
                    }
                    Err(e) => {
                        assert!(
                            (1..=3).contains(&tp) && scale > 0,
                            "TP{tp} scale {scale} unexpectedly failed: {e}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn scale_split_puts_odd_member_in_y() {
        assert_eq!(family_sizes(6, 5).unwrap(), (3, 2));
        assert_eq!(family_sizes(7, 20).unwrap(), (10, 10));
        assert_eq!(family_sizes(10, 1).unwrap(), (1, 0));
        assert_eq!(family_sizes(4, 50).unwrap(), (50, 0));
        assert_eq!(family_sizes(9, 20).unwrap(), (20, 0));
    }

    #[test]
    fn unscalable_problems_reject_scale() {
        for tp in 1..=3 {
            assert!(family_sizes(tp, 20).is_err());
            assert!(instance(tp, 20).is_err());
        }
    }

    /// The parser and the hand-built IRs must agree on every fixture.  This
    /// is the core cross-check between the two independent constructions.
    #[test]
    fn fixtures_match_builders() {
        for tp in 1..=SUITE_SIZE {
            let (p, q) = match tp {
                1..=3 => (0, 0),
                4 | 5 | 8 | 9 => (3, 0),
                _ => (2, 2),
            };
            let src = fixture_latex(tp).unwrap();
            let (parsed, diag) = parse_model(src, &format!("tp{tp}"), p, q)
                .unwrap_or_else(|e| panic!("TP{tp} fixture failed to parse: {e}"));
            let built = build(tp, p, q).unwrap();
            assert!(
                parsed.same_structure(&built),
                "TP{tp} structural mismatch\nparsed:\n{}\nbuilt:\n{}\nwarnings: {:?}",
                crate::model::serialize_model(&parsed),
                crate::model::serialize_model(&built),
                diag.warnings,
            );
        }
    }

    /// Cheap smoke check that objective evaluation agrees between the two
    /// constructions at a non-trivial point.
    #[test]
    fn parsed_and_built_evaluate_identically() {
        for tp in 1..=SUITE_SIZE {
            let (p, q) = if tp <= 3 { (0, 0) } else { (2, 1) };
            let src = fixture_latex(tp).unwrap();
            let (parsed, _) = parse_model(src, &format!("tp{tp}"), p, q).unwrap();
            let built = build(tp, parsed.p, parsed.q).unwrap();
            let n = built.n_vars();
            let point: Vec<f64> = (0..n).map(|i| 1.25 + 0.37 * i as f64).collect();
            let a = parsed.eval_objective(&point);
            let b = built.eval_objective(&point);
            match (a, b) {
                (Ok(a), Ok(b)) => assert_eq!(a, b, "TP{tp}"),
                (Err(_), Err(_)) => {}
                (a, b) => panic!("TP{tp} eval mismatch: {a:?} vs {b:?}"),
            }
        }
    }
}
