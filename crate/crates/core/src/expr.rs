//! Expression trees: evaluation, differentiation, linearity analysis and
//! constant folding.
//!
//! An [`Expr`] is the common currency of the LaTeX frontend, the script
//! emitter, the evaluator and the solvers. Trees are immutable after
//! construction and cheap to clone at the sizes that occur here.

use crate::error::{DomainFault, EvalError, IndexError};
use serde::{Deserialize, Serialize};

/// Scalable variable families. Members of the `y` family are indexed by
/// `p = 1..P`, members of the `z` family by `q = 1..Q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Y,
    Z,
}

impl Family {
    /// The conventional index symbol (`p` or `q`).
    pub fn index_symbol(self) -> char {
        match self {
            Family::Y => 'p',
            Family::Z => 'q',
        }
    }

    /// The base letter of member names (`y` or `z`).
    pub fn base(self) -> char {
        match self {
            Family::Y => 'y',
            Family::Z => 'z',
        }
    }

    /// Placeholder spelling used in the text grammar (`y_p` / `z_q`).
    pub fn placeholder(self) -> &'static str {
        match self {
            Family::Y => "y_p",
            Family::Z => "z_q",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    /// Natural logarithm (both `\log` and `\ln` map here).
    Log,
    Exp,
    Sin,
    Cos,
    Tan,
    Sqrt,
    Abs,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "neg",
            UnaryOp::Log => "log",
            UnaryOp::Exp => "exp",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Where the members of each family live inside the flat variable vector.
/// Members are contiguous: the `y` block first, then the `z` block.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FamilyLayout {
    pub y_start: usize,
    pub y_count: usize,
    pub z_start: usize,
    pub z_count: usize,
}

impl FamilyLayout {
    pub fn count(&self, family: Family) -> usize {
        match family {
            Family::Y => self.y_count,
            Family::Z => self.z_count,
        }
    }

    /// Flat variable index of member `ordinal` (0-based) of `family`.
    pub fn member_index(&self, family: Family, ordinal: usize) -> usize {
        match family {
            Family::Y => self.y_start + ordinal,
            Family::Z => self.z_start + ordinal,
        }
    }
}

/// Expression tree node.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// Finite real constant.
    Const(f64),
    /// Reference to a variable by index into the owning model's list.
    Var(usize),
    /// Placeholder for the iterated member inside an indexed sum or a
    /// quantified constraint (`y_p` / `z_q`).
    Member(Family),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    /// Sum of the body over every member of the family.
    Sum(Family, Box<Expr>),
}

// -------------------------------------------------------------------------
// construction helpers
// -------------------------------------------------------------------------

pub fn con(v: f64) -> Expr {
    Expr::Const(v)
}

pub fn var(i: usize) -> Expr {
    Expr::Var(i)
}

pub fn add(a: Expr, b: Expr) -> Expr {
    Expr::Binary(BinaryOp::Add, Box::new(a), Box::new(b))
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    Expr::Binary(BinaryOp::Sub, Box::new(a), Box::new(b))
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    Expr::Binary(BinaryOp::Mul, Box::new(a), Box::new(b))
}

pub fn div(a: Expr, b: Expr) -> Expr {
    Expr::Binary(BinaryOp::Div, Box::new(a), Box::new(b))
}

pub fn pow(a: Expr, b: Expr) -> Expr {
    Expr::Binary(BinaryOp::Pow, Box::new(a), Box::new(b))
}

pub fn neg(a: Expr) -> Expr {
    Expr::Unary(UnaryOp::Neg, Box::new(a))
}

pub fn unary(op: UnaryOp, a: Expr) -> Expr {
    Expr::Unary(op, Box::new(a))
}

pub fn log(a: Expr) -> Expr {
    unary(UnaryOp::Log, a)
}

pub fn exp(a: Expr) -> Expr {
    unary(UnaryOp::Exp, a)
}

pub fn sin(a: Expr) -> Expr {
    unary(UnaryOp::Sin, a)
}

pub fn cos(a: Expr) -> Expr {
    unary(UnaryOp::Cos, a)
}

pub fn tan(a: Expr) -> Expr {
    unary(UnaryOp::Tan, a)
}

pub fn sqrt(a: Expr) -> Expr {
    unary(UnaryOp::Sqrt, a)
}

pub fn sum(family: Family, body: Expr) -> Expr {
    Expr::Sum(family, Box::new(body))
}

/// Left-associated sum of the terms (`((t1 + t2) + t3) ...`), the shape
/// every parser in this crate produces. Empty input folds to `0`.
pub fn add_chain<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
    let mut it = terms.into_iter();
    let first = match it.next() {
        Some(e) => e,
        None => return con(0.0),
    };
    it.fold(first, add)
}

// -------------------------------------------------------------------------
// evaluation
// -------------------------------------------------------------------------

/// Active quantifier binding: which concrete member the `Member`
/// placeholder of a family currently refers to.
pub type Binding = Option<(Family, usize)>;

fn apply_unary(op: UnaryOp, v: f64) -> Result<f64, DomainFault> {
    let out = match op {
        UnaryOp::Neg => -v,
        UnaryOp::Log => {
            if v <= 0.0 {
                return Err(DomainFault { op: "log", operand: v });
            }
            v.ln()
        }
        UnaryOp::Exp => v.exp(),
        UnaryOp::Sin => v.sin(),
        UnaryOp::Cos => v.cos(),
        UnaryOp::Tan => v.tan(),
        UnaryOp::Sqrt => {
            if v < 0.0 {
                return Err(DomainFault { op: "sqrt", operand: v });
            }
            v.sqrt()
        }
        UnaryOp::Abs => v.abs(),
    };
    if out.is_finite() {
        Ok(out)
    } else {
        Err(DomainFault { op: op.name(), operand: v })
    }
}

fn apply_pow(base: f64, expo: f64) -> Result<f64, DomainFault> {
    // 0^0 = 1 and 0^positive = 0 by convention; everything else that
    // would leave the reals (or blow up) is a fault.
    let out = if base == 0.0 {
        if expo == 0.0 {
            1.0
        } else if expo > 0.0 {
            0.0
        } else {
            return Err(DomainFault { op: "pow", operand: expo });
        }
    } else if base < 0.0 && expo.fract() != 0.0 {
        return Err(DomainFault { op: "pow", operand: base });
    } else {
        base.powf(expo)
    };
    if out.is_finite() {
        Ok(out)
    } else {
        Err(DomainFault { op: "pow", operand: base })
    }
}

fn apply_binary(op: BinaryOp, a: f64, b: f64) -> Result<f64, DomainFault> {
    let out = match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => {
            if b == 0.0 {
                return Err(DomainFault { op: "div", operand: b });
            }
            a / b
        }
        BinaryOp::Pow => return apply_pow(a, b),
    };
    if out.is_finite() {
        Ok(out)
    } else {
        Err(DomainFault { op: "binary", operand: a })
    }
}

impl Expr {
    /// Evaluate at `point`, expanding indexed sums over `layout`.
    /// `binding` supplies the member a free placeholder refers to (used
    /// when evaluating a quantified constraint for one member).
    pub fn eval(
        &self,
        point: &[f64],
        layout: &FamilyLayout,
        binding: Binding,
    ) -> Result<f64, EvalError> {
        match self {
            Expr::Const(v) => Ok(*v),
            Expr::Var(i) => point
                .get(*i)
                .copied()
                .ok_or_else(|| IndexError::Variable(*i, point.len()).into()),
            Expr::Member(f) => match binding {
                Some((bf, ord)) if bf == *f => {
                    let idx = layout.member_index(*f, ord);
                    point
                        .get(idx)
                        .copied()
                        .ok_or_else(|| IndexError::Variable(idx, point.len()).into())
                }
                _ => Err(IndexError::UnboundMember(f.placeholder()).into()),
            },
            Expr::Unary(op, a) => {
                let v = a.eval(point, layout, binding)?;
                Ok(apply_unary(*op, v)?)
            }
            Expr::Binary(op, a, b) => {
                let va = a.eval(point, layout, binding)?;
                let vb = b.eval(point, layout, binding)?;
                Ok(apply_binary(*op, va, vb)?)
            }
            Expr::Sum(f, body) => {
                let mut total = 0.0;
                for ord in 0..layout.count(*f) {
                    total += body.eval(point, layout, Some((*f, ord)))?;
                }
                Ok(total)
            }
        }
    }

    /// Evaluate an expression that contains no family constructs.
    pub fn eval_flat(&self, point: &[f64]) -> Result<f64, EvalError> {
        self.eval(point, &FamilyLayout::default(), None)
    }

    /// Value and exact gradient with respect to every variable.
    ///
    /// Reverse accumulation over the tree; children are re-evaluated on
    /// the way down, which is quadratic in depth in the worst case but
    /// the trees here are shallow.
    pub fn value_and_grad(
        &self,
        point: &[f64],
        layout: &FamilyLayout,
        binding: Binding,
    ) -> Result<(f64, Vec<f64>), EvalError> {
        let mut grad = vec![0.0; point.len()];
        let v = self.backprop(point, layout, binding, 1.0, &mut grad)?;
        for g in &grad {
            if !g.is_finite() {
                return Err(DomainFault { op: "grad", operand: *g }.into());
            }
        }
        Ok((v, grad))
    }

    pub fn gradient(&self, point: &[f64], layout: &FamilyLayout) -> Result<Vec<f64>, EvalError> {
        Ok(self.value_and_grad(point, layout, None)?.1)
    }

    fn backprop(
        &self,
        x: &[f64],
        layout: &FamilyLayout,
        binding: Binding,
        seed: f64,
        grad: &mut [f64],
    ) -> Result<f64, EvalError> {
        match self {
            Expr::Const(v) => Ok(*v),
            Expr::Var(i) => {
                let v = x
                    .get(*i)
                    .copied()
                    .ok_or(IndexError::Variable(*i, x.len()))?;
                grad[*i] += seed;
                Ok(v)
            }
            Expr::Member(f) => match binding {
                Some((bf, ord)) if bf == *f => {
                    let idx = layout.member_index(*f, ord);
                    let v = x
                        .get(idx)
                        .copied()
                        .ok_or(IndexError::Variable(idx, x.len()))?;
                    grad[idx] += seed;
                    Ok(v)
                }
                _ => Err(IndexError::UnboundMember(f.placeholder()).into()),
            },
            Expr::Unary(op, a) => {
                let va = a.eval(x, layout, binding)?;
                let out = apply_unary(*op, va)?;
                let dv = match op {
                    UnaryOp::Neg => -1.0,
                    UnaryOp::Log => 1.0 / va,
                    UnaryOp::Exp => out,
                    UnaryOp::Sin => va.cos(),
                    UnaryOp::Cos => -va.sin(),
                    UnaryOp::Tan => {
                        let c = va.cos();
                        1.0 / (c * c)
                    }
                    UnaryOp::Sqrt => {
                        if va == 0.0 {
                            return Err(DomainFault { op: "sqrt'", operand: va }.into());
                        }
                        0.5 / out
                    }
                    UnaryOp::Abs => {
                        if va == 0.0 {
                            return Err(DomainFault { op: "abs'", operand: va }.into());
                        }
                        va.signum()
                    }
                };
                a.backprop(x, layout, binding, seed * dv, grad)?;
                Ok(out)
            }
            Expr::Binary(op, a, b) => {
                let va = a.eval(x, layout, binding)?;
                let vb = b.eval(x, layout, binding)?;
                let out = apply_binary(*op, va, vb)?;
                match op {
                    BinaryOp::Add => {
                        a.backprop(x, layout, binding, seed, grad)?;
                        b.backprop(x, layout, binding, seed, grad)?;
                    }
                    BinaryOp::Sub => {
                        a.backprop(x, layout, binding, seed, grad)?;
                        b.backprop(x, layout, binding, -seed, grad)?;
                    }
                    BinaryOp::Mul => {
                        a.backprop(x, layout, binding, seed * vb, grad)?;
                        b.backprop(x, layout, binding, seed * va, grad)?;
                    }
                    BinaryOp::Div => {
                        a.backprop(x, layout, binding, seed / vb, grad)?;
                        b.backprop(x, layout, binding, -seed * va / (vb * vb), grad)?;
                    }
                    BinaryOp::Pow => {
                        // d/da a^b = b a^(b-1); d/db a^b = a^b ln a.
                        // The ln-term is skipped when the exponent is a
                        // constant subtree, which keeps x^0.6 and friends
                        // differentiable at the usual domain edge.
                        let da = if vb == 0.0 {
                            0.0
                        } else {
                            vb * apply_pow(va, vb - 1.0)?
                        };
                        a.backprop(x, layout, binding, seed * da, grad)?;
                        if !b.is_constant() {
                            if va <= 0.0 {
                                return Err(DomainFault { op: "pow'", operand: va }.into());
                            }
                            b.backprop(x, layout, binding, seed * out * va.ln(), grad)?;
                        }
                    }
                }
                Ok(out)
            }
            Expr::Sum(f, body) => {
                let mut total = 0.0;
                for ord in 0..layout.count(*f) {
                    total += body.backprop(x, layout, Some((*f, ord)), seed, grad)?;
                }
                Ok(total)
            }
        }
    }

    // ---------------------------------------------------------------------
    // analysis
    // ---------------------------------------------------------------------

    /// True if no variable or member occurs anywhere in the tree.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var(_) | Expr::Member(_) => false,
            Expr::Unary(_, a) => a.is_constant(),
            Expr::Binary(_, a, b) => a.is_constant() && b.is_constant(),
            Expr::Sum(_, body) => body.is_constant(),
        }
    }

    /// The value of a fully folded constant expression, if it is one.
    pub fn const_value(&self) -> Option<f64> {
        match self {
            Expr::Const(v) => Some(*v),
            _ => None,
        }
    }

    /// Affinity of the expression in the variables of `over` (index set as
    /// a boolean mask); all other variables are treated as constants.
    pub fn is_linear(&self, over: &[bool]) -> bool {
        self.linearity(over) != Linearity::Nonlinear
    }

    fn linearity(&self, over: &[bool]) -> Linearity {
        match self {
            Expr::Const(_) => Linearity::Free,
            Expr::Var(i) => {
                if over.get(*i).copied().unwrap_or(false) {
                    Linearity::Affine
                } else {
                    Linearity::Free
                }
            }
            // A member stands for some variable of its family block; be
            // conservative and treat it as participating whenever any
            // member of the family could be in the set. Callers working
            // with expanded models never hit this arm.
            Expr::Member(_) => Linearity::Affine,
            Expr::Unary(op, a) => {
                let la = a.linearity(over);
                match op {
                    UnaryOp::Neg => la,
                    _ => {
                        if la == Linearity::Free {
                            Linearity::Free
                        } else {
                            Linearity::Nonlinear
                        }
                    }
                }
            }
            Expr::Binary(op, a, b) => {
                let la = a.linearity(over);
                let lb = b.linearity(over);
                match op {
                    BinaryOp::Add | BinaryOp::Sub => la.max(lb),
                    BinaryOp::Mul => match (la, lb) {
                        (Linearity::Free, x) | (x, Linearity::Free) => x,
                        _ => Linearity::Nonlinear,
                    },
                    BinaryOp::Div => match (la, lb) {
                        (x, Linearity::Free) => x,
                        _ => Linearity::Nonlinear,
                    },
                    BinaryOp::Pow => match (la, lb) {
                        (Linearity::Free, Linearity::Free) => Linearity::Free,
                        (Linearity::Affine, Linearity::Free) => match b.const_value() {
                            Some(e) if e == 1.0 => Linearity::Affine,
                            Some(e) if e == 0.0 => Linearity::Free,
                            _ => Linearity::Nonlinear,
                        },
                        _ => Linearity::Nonlinear,
                    },
                }
            }
            Expr::Sum(_, body) => body.linearity(over),
        }
    }

    /// Fold constant subtrees to `Const` nodes (`Neg(Const c)` included).
    /// No other rewriting happens; a fold that would fault (e.g. log(-1))
    /// is left in place so evaluation reports it.
    pub fn fold(self) -> Expr {
        match self {
            Expr::Const(v) => Expr::Const(if v == 0.0 { 0.0 } else { v }),
            Expr::Var(_) | Expr::Member(_) => self,
            Expr::Unary(op, a) => {
                let a = a.fold();
                if let Expr::Const(v) = a {
                    if let Ok(out) = apply_unary(op, v) {
                        return Expr::Const(if out == 0.0 { 0.0 } else { out });
                    }
                }
                Expr::Unary(op, Box::new(a))
            }
            Expr::Binary(op, a, b) => {
                let a = a.fold();
                let b = b.fold();
                if let (Expr::Const(va), Expr::Const(vb)) = (&a, &b) {
                    if let Ok(out) = apply_binary(op, *va, *vb) {
                        return Expr::Const(if out == 0.0 { 0.0 } else { out });
                    }
                }
                Expr::Binary(op, Box::new(a), Box::new(b))
            }
            Expr::Sum(f, body) => Expr::Sum(f, Box::new(body.fold())),
        }
    }

    /// Apply `f` to every variable index (used by substitution and
    /// expansion passes).
    pub fn map_vars(&self, f: &mut impl FnMut(usize) -> Expr) -> Expr {
        match self {
            Expr::Const(v) => Expr::Const(*v),
            Expr::Var(i) => f(*i),
            Expr::Member(fam) => Expr::Member(*fam),
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(a.map_vars(f))),
            Expr::Binary(op, a, b) => {
                Expr::Binary(*op, Box::new(a.map_vars(f)), Box::new(b.map_vars(f)))
            }
            Expr::Sum(fam, body) => Expr::Sum(*fam, Box::new(body.map_vars(f))),
        }
    }

    /// Replace member placeholders of `family` with a concrete expression.
    pub fn bind_member(&self, family: Family, replacement: &Expr) -> Expr {
        match self {
            Expr::Const(v) => Expr::Const(*v),
            Expr::Var(i) => Expr::Var(*i),
            Expr::Member(f) if *f == family => replacement.clone(),
            Expr::Member(f) => Expr::Member(*f),
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(a.bind_member(family, replacement))),
            Expr::Binary(op, a, b) => Expr::Binary(
                *op,
                Box::new(a.bind_member(family, replacement)),
                Box::new(b.bind_member(family, replacement)),
            ),
            Expr::Sum(f, body) => Expr::Sum(*f, Box::new(body.bind_member(family, replacement))),
        }
    }

    /// True if the tree contains a `Sum` or `Member` node.
    pub fn has_family_constructs(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) => false,
            Expr::Member(_) | Expr::Sum(_, _) => true,
            Expr::Unary(_, a) => a.has_family_constructs(),
            Expr::Binary(_, a, b) => a.has_family_constructs() || b.has_family_constructs(),
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var_index(&self) -> Option<usize> {
        match self {
            Expr::Const(_) | Expr::Member(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Unary(_, a) | Expr::Sum(_, a) => a.max_var_index(),
            Expr::Binary(_, a, b) => match (a.max_var_index(), b.max_var_index()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Linearity {
    /// No variable from the tracked set occurs.
    Free,
    /// Affine in the tracked set.
    Affine,
    Nonlinear,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn evaluates_arithmetic() {
        // x0^2 + 3*x1
        let e = add(pow(var(0), con(2.0)), mul(con(3.0), var(1)));
        let v = e.eval_flat(&[2.0, 5.0]).unwrap();
        assert_eq!(v, 19.0);
    }

    #[test]
    fn zero_to_fractional_power_is_zero() {
        let e = pow(var(0), con(0.6));
        assert_eq!(e.eval_flat(&[0.0]).unwrap(), 0.0);
        assert_eq!(pow(con(0.0), con(0.0)).eval_flat(&[]).unwrap(), 1.0);
    }

    #[test]
    fn domain_faults() {
        assert!(log(var(0)).eval_flat(&[0.0]).is_err());
        assert!(log(var(0)).eval_flat(&[-1.0]).is_err());
        assert!(sqrt(var(0)).eval_flat(&[-0.5]).is_err());
        assert!(div(con(1.0), var(0)).eval_flat(&[0.0]).is_err());
        assert!(pow(var(0), con(0.6)).eval_flat(&[-1.0]).is_err());
        assert!(exp(var(0)).eval_flat(&[1e6]).is_err());
    }

    #[test]
    fn gradient_of_square() {
        let e = pow(var(0), con(2.0));
        let g = e.gradient(&[3.0], &FamilyLayout::default()).unwrap();
        assert_eq!(g[0], 6.0);
    }

    #[test]
    fn gradient_of_cos_term() {
        // 5*cos(x1) at x1 = 0 has zero derivative there.
        let e = mul(con(5.0), cos(var(1)));
        let g = e.gradient(&[0.0, 0.0], &FamilyLayout::default()).unwrap();
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn gradient_matches_symbolic_for_cosine_well() {
        // d/dx of -2*cos(2*pi*x) = 4*pi*sin(2*pi*x); at x = 0.25 this is
        // 4*pi (sin(pi/2) = 1).
        let two_pi = 2.0 * std::f64::consts::PI;
        let e = sub(con(0.0), mul(con(2.0), cos(mul(con(two_pi), var(0)))));
        let g = e.gradient(&[0.25], &FamilyLayout::default()).unwrap();
        assert_relative_eq!(g[0], 4.0 * std::f64::consts::PI, max_relative = 1e-12);
    }

    #[test]
    fn gradient_of_fractional_power() {
        let e = pow(var(0), con(0.6));
        let g = e.gradient(&[2.0], &FamilyLayout::default()).unwrap();
        assert_relative_eq!(g[0], 0.6 * 2.0_f64.powf(-0.4), max_relative = 1e-12);
    }

    #[test]
    fn sum_over_family() {
        let layout = FamilyLayout { y_start: 1, y_count: 3, z_start: 4, z_count: 0 };
        // sum(p, y_p * x0)
        let e = sum(Family::Y, mul(Expr::Member(Family::Y), var(0)));
        let x = [2.0, 1.0, 10.0, 100.0];
        assert_eq!(e.eval(&x, &layout, None).unwrap(), 222.0);
        let g = e.gradient(&x, &layout).unwrap();
        assert_eq!(g[0], 111.0);
        assert_eq!(&g[1..], &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn empty_family_sum_is_zero() {
        let e = sum(Family::Y, log(Expr::Member(Family::Y)));
        assert_eq!(e.eval(&[], &FamilyLayout::default(), None).unwrap(), 0.0);
    }

    #[test]
    fn unbound_member_errors() {
        let e = Expr::Member(Family::Y);
        assert!(e.eval_flat(&[1.0]).is_err());
    }

    #[test]
    fn linearity_rules() {
        let over = &[true, true, false];
        // x0 + 2*x1 is affine
        assert!(add(var(0), mul(con(2.0), var(1))).is_linear(over));
        // x0^0.6 is not
        assert!(!pow(var(0), con(0.6)).is_linear(over));
        // x2*(x0 + x1) with x2 outside the set is affine
        assert!(mul(var(2), add(var(0), var(1))).is_linear(over));
        // x0*x1 is not
        assert!(!mul(var(0), var(1)).is_linear(over));
        // log(x2) is a constant as far as {x0, x1} are concerned
        assert!(log(var(2)).is_linear(over));
        // x0^1 stays affine
        assert!(pow(var(0), con(1.0)).is_linear(over));
    }

    #[test]
    fn folding_collapses_constants() {
        let e = mul(con(2.0), con(std::f64::consts::PI)).fold();
        assert_eq!(e, con(2.0 * std::f64::consts::PI));
        let e = neg(con(6.0)).fold();
        assert_eq!(e, con(-6.0));
        // variables block folding
        let e = mul(con(2.0), var(0)).fold();
        assert_eq!(e, mul(con(2.0), var(0)));
        // faulting folds are left alone
        let e = log(con(-1.0)).fold();
        assert_eq!(e, log(con(-1.0)));
    }

    #[test]
    fn fold_normalizes_negative_zero() {
        let e = neg(con(0.0)).fold();
        assert_eq!(format!("{:?}", e), "Const(0.0)");
    }

    #[test]
    fn linear_expressions_are_actually_affine() {
        // e(ax + by) = a e(x) + b e(y) + (1 - a - b) e(0) for affine e.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let e = add(sub(mul(con(3.0), var(0)), var(1)), con(4.0));
        for _ in 0..100 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let y: Vec<f64> = (0..2).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let mix: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| a * xi + b * yi).collect();
            let lhs = e.eval_flat(&mix).unwrap();
            let rhs = a * e.eval_flat(&x).unwrap()
                + b * e.eval_flat(&y).unwrap()
                + (1.0 - a - b) * e.eval_flat(&[0.0, 0.0]).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-9, epsilon = 1e-9);
        }
    }
}
