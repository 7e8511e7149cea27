//! Reverse-mode differentiation over scalar nodes.
//!
//! A [`Tape`] is an arena of [`DiffNode`]s appended in evaluation order, so
//! every operand index is strictly lower than the index of the node that uses
//! it. A backward pass therefore walks the arena once, from the root down.
//!
//! Besides the usual unary and binary nodes the tape has two fused nodes,
//! [`Tape::dot`] and [`Tape::sum`], which keep dense layers cheap: they
//! reference contiguous operand spans instead of allocating one node per
//! product.
//!
//! ```
//! use scope_lab_core::autodiff::Tape;
//!
//! let mut tape = Tape::<f64>::new();
//! let x = tape.var(3.0);
//! let y = tape.mul(x, x);
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.get(x), 6.0);
//! ```

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("node {index} does not belong to this tape (len {len})")]
    ForeignVar { index: usize, len: usize },
    #[error("node {node} references operand {operand} that is not evaluated before it")]
    Cycle { node: usize, operand: usize },
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug)]
enum Op<T> {
    Leaf,
    Unary { x: usize, dx: T },
    Binary { a: usize, da: T, b: usize, db: T },
    /// `Σ_k v[a + k] * v[b + k]`
    Dot { a: usize, b: usize, len: usize },
    /// `Σ_k v[start + k]`
    Sum { start: usize, len: usize },
}

/// One value on the tape together with its accumulated adjoint.
#[derive(Clone, Debug)]
pub struct DiffNode<T> {
    pub value: T,
    pub grad: T,
    op: Op<T>,
}

impl<T: Scalar> DiffNode<T> {
    fn new(value: T, op: Op<T>) -> Self {
        Self {
            value,
            grad: T::zero(),
            op,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<DiffNode<T>>,
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients<'a, T> {
    tape: &'a Tape<T>,
}

impl<T: Scalar> Gradients<'_, T> {
    pub fn get(&self, v: Var) -> T {
        self.tape.nodes[v.0].grad
    }

    pub fn collect(&self, vars: &[Var]) -> Vec<T> {
        vars.iter().map(|&v| self.get(v)).collect()
    }
}

fn contiguous(vars: &[Var]) -> bool {
    vars.windows(2).all(|w| w[1].0 == w[0].0 + 1)
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            nodes: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every node but keeps the allocation.
    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn node(&self, v: Var) -> &DiffNode<T> {
        &self.nodes[v.0]
    }

    pub fn value(&self, v: Var) -> T {
        self.nodes[v.0].value
    }

    pub fn values(&self, vars: &[Var]) -> Vec<T> {
        vars.iter().map(|&v| self.value(v)).collect()
    }

    pub fn grad(&self, v: Var) -> T {
        self.nodes[v.0].grad
    }

    fn push(&mut self, value: T, op: Op<T>) -> Var {
        self.nodes.push(DiffNode::new(value, op));
        Var(self.nodes.len() - 1)
    }

    /// A leaf: either a parameter or a constant input.
    pub fn var(&mut self, value: T) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Leaves for every value, allocated contiguously.
    pub fn vars(&mut self, values: &[T]) -> Vec<Var> {
        values.iter().map(|&x| self.var(x)).collect()
    }

    /// A leaf holding the current value of `x`; no gradient flows back to `x`.
    pub fn detach(&mut self, x: Var) -> Var {
        let v = self.value(x);
        self.var(v)
    }

    fn unary(&mut self, x: Var, value: T, dx: T) -> Var {
        self.push(value, Op::Unary { x: x.0, dx })
    }

    fn binary(&mut self, a: Var, b: Var, value: T, da: T, db: T) -> Var {
        self.push(
            value,
            Op::Binary {
                a: a.0,
                da,
                b: b.0,
                db,
            },
        )
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.binary(a, b, v, T::one(), T::one())
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.binary(a, b, v, T::one(), -T::one())
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        self.binary(a, b, va * vb, vb, va)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        self.binary(a, b, va / vb, T::one() / vb, -va / (vb * vb))
    }

    pub fn neg(&mut self, x: Var) -> Var {
        let v = -self.value(x);
        self.unary(x, v, -T::one())
    }

    /// `c * x` for a constant `c`.
    pub fn scale(&mut self, x: Var, c: T) -> Var {
        let v = self.value(x) * c;
        self.unary(x, v, c)
    }

    /// `x + c` for a constant `c`.
    pub fn add_const(&mut self, x: Var, c: T) -> Var {
        let v = self.value(x) + c;
        self.unary(x, v, T::one())
    }

    /// `x / c` for a constant `c`; uses a true division so `x / x` rounds to 1.
    pub fn div_const(&mut self, x: Var, c: T) -> Var {
        let v = self.value(x) / c;
        self.unary(x, v, T::one() / c)
    }

    /// `c - x` for a constant `c`.
    pub fn rsub_const(&mut self, c: T, x: Var) -> Var {
        let v = c - self.value(x);
        self.unary(x, v, -T::one())
    }

    pub fn ln(&mut self, x: Var) -> Var {
        let vx = self.value(x);
        self.unary(x, vx.ln(), T::one() / vx)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let e = self.value(x).exp();
        self.unary(x, e, e)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let t = self.value(x).tanh();
        self.unary(x, t, T::one() - t * t)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let vx = self.value(x);
        if vx > T::zero() {
            self.unary(x, vx, T::one())
        } else {
            self.unary(x, T::zero(), T::zero())
        }
    }

    pub fn square(&mut self, x: Var) -> Var {
        let vx = self.value(x);
        self.unary(x, vx * vx, vx + vx)
    }

    pub fn powi(&mut self, x: Var, n: i32) -> Var {
        let vx = self.value(x);
        let d = if n == 0 {
            T::zero()
        } else {
            T::lit(f64::from(n)) * vx.powi(n - 1)
        };
        self.unary(x, vx.powi(n), d)
    }

    /// `sign(x) * |x|^p`, the odd extension of the real power.
    ///
    /// Integer exponents keep their ordinary meaning (`(-2)^2 = 4`); only a
    /// non-integer exponent on a negative base uses the odd extension.
    pub fn signed_pow(&mut self, x: Var, p: T) -> Var {
        if p.fract() == T::zero() {
            if let Some(n) = p.to_i32() {
                return self.powi(x, n);
            }
        }
        let vx = self.value(x);
        let mag = vx.abs();
        let value = vx.signum() * mag.powf(p);
        let d = if mag == T::zero() {
            if p > T::one() {
                T::zero()
            } else {
                T::infinity()
            }
        } else {
            p * mag.powf(p - T::one())
        };
        self.unary(x, value, d)
    }

    /// Clamps into `[lo, hi]`; the derivative is 1 inside the interval and 0 outside.
    pub fn clamp(&mut self, x: Var, lo: T, hi: T) -> Var {
        let vx = self.value(x);
        if vx < lo {
            self.unary(x, lo, T::zero())
        } else if vx > hi {
            self.unary(x, hi, T::zero())
        } else {
            self.unary(x, vx, T::one())
        }
    }

    /// `min(x, c)` for a constant `c`. Ties resolve to the constant, so the
    /// gradient w.r.t. `x` is nonzero only when `x < c` strictly.
    pub fn min_const(&mut self, x: Var, c: T) -> Var {
        let vx = self.value(x);
        if vx < c {
            self.unary(x, vx, T::one())
        } else {
            self.unary(x, c, T::zero())
        }
    }

    pub fn sum(&mut self, xs: &[Var]) -> Var {
        match xs {
            [] => self.var(T::zero()),
            [x] => self.unary(*x, self.value(*x), T::one()),
            _ if contiguous(xs) => {
                let start = xs[0].0;
                let v = self.nodes[start..start + xs.len()]
                    .iter()
                    .fold(T::zero(), |acc, n| acc + n.value);
                self.push(
                    v,
                    Op::Sum {
                        start,
                        len: xs.len(),
                    },
                )
            }
            _ => {
                let mut acc = xs[0];
                for &x in &xs[1..] {
                    acc = self.add(acc, x);
                }
                acc
            }
        }
    }

    /// `Σ_k a[k] * b[k]`.
    ///
    /// # Panics
    /// If the slices differ in length.
    pub fn dot(&mut self, a: &[Var], b: &[Var]) -> Var {
        assert_eq!(a.len(), b.len(), "dot operands differ in length");
        if a.is_empty() {
            return self.var(T::zero());
        }
        if contiguous(a) && contiguous(b) {
            let (sa, sb, len) = (a[0].0, b[0].0, a.len());
            let mut v = T::zero();
            for k in 0..len {
                v += self.nodes[sa + k].value * self.nodes[sb + k].value;
            }
            self.push(v, Op::Dot { a: sa, b: sb, len })
        } else {
            let prods: Vec<Var> = a.iter().zip(b).map(|(&x, &y)| self.mul(x, y)).collect();
            self.sum(&prods)
        }
    }

    /// Arithmetic mean of `xs`.
    pub fn mean(&mut self, xs: &[Var]) -> Var {
        let s = self.sum(xs);
        self.scale(s, T::one() / T::lit(xs.len().max(1) as f64))
    }

    /// Runs a backward pass from `root`.
    ///
    /// All adjoints are zeroed first, so calling this repeatedly on the same
    /// tape never accumulates stale gradients.
    pub fn backward(&mut self, root: Var) -> Result<Gradients<'_, T>, AutodiffError> {
        let len = self.nodes.len();
        if root.0 >= len {
            return Err(AutodiffError::ForeignVar {
                index: root.0,
                len,
            });
        }
        for n in &mut self.nodes {
            n.grad = T::zero();
        }
        self.nodes[root.0].grad = T::one();
        for i in (0..=root.0).rev() {
            let g = self.nodes[i].grad;
            let op = self.nodes[i].op;
            if g == T::zero() {
                continue;
            }
            match op {
                Op::Leaf => {}
                Op::Unary { x, dx } => {
                    check_order(i, x)?;
                    self.nodes[x].grad += g * dx;
                }
                Op::Binary { a, da, b, db } => {
                    check_order(i, a)?;
                    check_order(i, b)?;
                    self.nodes[a].grad += g * da;
                    self.nodes[b].grad += g * db;
                }
                Op::Dot { a, b, len } => {
                    check_order(i, a + len - 1)?;
                    check_order(i, b + len - 1)?;
                    for k in 0..len {
                        let va = self.nodes[a + k].value;
                        let vb = self.nodes[b + k].value;
                        self.nodes[a + k].grad += g * vb;
                        self.nodes[b + k].grad += g * va;
                    }
                }
                Op::Sum { start, len } => {
                    check_order(i, start + len - 1)?;
                    for n in &mut self.nodes[start..start + len] {
                        n.grad += g;
                    }
                }
            }
        }
        Ok(Gradients { tape: self })
    }
}

fn check_order(node: usize, operand: usize) -> Result<(), AutodiffError> {
    if operand >= node {
        Err(AutodiffError::Cycle { node, operand })
    } else {
        Ok(())
    }
}
