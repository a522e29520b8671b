//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! Operations are recorded into a [`Tape`] arena in execution order, which is
//! also a valid topological order: every node's parents precede it, so the
//! graph is acyclic by construction. [`Tape::backward`] walks the arena in
//! reverse from a scalar root, accumulating adjoints additively into
//! zero-initialized buffers. Each backward rule is a closure capturing the
//! (cheaply cloned) tensors it needs.
//!
//! A tape is single-threaded; independent tapes may run in parallel.

use crate::error::{HokemError, Result};
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    id: usize,
}

/// Elementwise activation kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Hardswish,
}

type BackwardRule = Box<dyn Fn(&Tensor) -> Vec<Tensor>>;

struct Node {
    value: Tensor,
    parents: Vec<usize>,
    /// Computes one adjoint contribution per parent from this node's adjoint.
    backward: Option<BackwardRule>,
    /// True if a requires-grad leaf is reachable through this node.
    needs_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by a backward pass, indexed by [`Var`].
pub struct Gradients {
    adjoints: Vec<Option<Tensor>>,
}

impl Gradients {
    /// The adjoint of `v`, if one was produced. Leaves without requires-grad
    /// receive none.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.adjoints.get(v.id).and_then(Option::as_ref)
    }
}

fn hardswish_value(x: f64) -> f64 {
    x * (x + 3.0).clamp(0.0, 6.0) / 6.0
}

/// Piecewise derivative; at the kinks x = -3 and x = 3 the one-sided
/// derivative from the right is used.
fn hardswish_derivative(x: f64) -> f64 {
    if x < -3.0 {
        0.0
    } else if x < 3.0 {
        (2.0 * x + 3.0) / 6.0
    } else {
        1.0
    }
}

fn sigmoid_value(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.id].value
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.id].value.shape()
    }

    fn push(&mut self, value: Tensor, parents: Vec<usize>, backward: Option<BackwardRule>) -> Var {
        let needs_grad = parents.iter().any(|&p| self.nodes[p].needs_grad);
        let id = self.nodes.len();
        self.nodes.push(Node {
            value,
            parents,
            backward,
            needs_grad,
        });
        Var { id }
    }

    /// Introduces a leaf value. Only requires-grad leaves receive adjoints.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        let id = self.nodes.len();
        self.nodes.push(Node {
            value,
            parents: Vec::new(),
            backward: None,
            needs_grad: requires_grad,
        });
        Var { id }
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Matrix product `a (m x k) * b (k x n)`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, ka) = self.shape(a);
        let (kb, n) = self.shape(b);
        if ka != kb {
            return Err(HokemError::ShapeMismatch {
                op: "matmul",
                lhs: (m, ka),
                rhs: (kb, n),
            });
        }
        let av = self.value(a).clone();
        let bv = self.value(b).clone();
        let value = av.matmul(&bv);
        Ok(self.push(
            value,
            vec![a.id, b.id],
            Some(Box::new(move |adj| {
                // dA = dOut * B^T, dB = A^T * dOut
                vec![adj.matmul_nt(&bv), av.matmul_tn(adj)]
            })),
        ))
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(HokemError::ShapeMismatch {
                op: "add",
                lhs: sa,
                rhs: sb,
            });
        }
        let value = self.value(a).add(self.value(b));
        Ok(self.push(
            value,
            vec![a.id, b.id],
            Some(Box::new(|adj| vec![adj.clone(), adj.clone()])),
        ))
    }

    /// Elementwise product of two same-shape tensors.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(HokemError::ShapeMismatch {
                op: "mul",
                lhs: sa,
                rhs: sb,
            });
        }
        let av = self.value(a).clone();
        let bv = self.value(b).clone();
        let value = av.hadamard(&bv);
        Ok(self.push(
            value,
            vec![a.id, b.id],
            Some(Box::new(move |adj| {
                vec![adj.hadamard(&bv), adj.hadamard(&av)]
            })),
        ))
    }

    /// Elementwise `mul * x + add`.
    pub fn affine(&mut self, a: Var, mul: f64, add: f64) -> Var {
        let value = self.value(a).map(|v| mul * v + add);
        self.push(
            value,
            vec![a.id],
            Some(Box::new(move |adj| vec![adj.scale(mul)])),
        )
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.affine(a, c, 0.0)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transposed();
        self.push(
            value,
            vec![a.id],
            Some(Box::new(|adj| vec![adj.transposed()])),
        )
    }

    /// Row-wise softmax, stabilized by row-max subtraction.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let out = self.value(a).softmax_rows();
        let captured = out.clone();
        self.push(
            out,
            vec![a.id],
            Some(Box::new(move |adj| {
                // dX_i = s_i .* (dY_i - <dY_i, s_i>)
                let (m, n) = captured.shape();
                let mut grad = vec![0.0; m * n];
                for i in 0..m {
                    let s = captured.row(i);
                    let d = adj.row(i);
                    let dot: f64 = s.iter().zip(d).map(|(&sv, &dv)| sv * dv).sum();
                    for j in 0..n {
                        grad[i * n + j] = s[j] * (d[j] - dot);
                    }
                }
                vec![Tensor::new(m, n, grad)]
            })),
        )
    }

    /// Elementwise activation; see [`Activation`].
    pub fn activation(&mut self, a: Var, kind: Activation) -> Var {
        let input = self.value(a).clone();
        match kind {
            Activation::Relu => {
                let value = input.map(|x| x.max(0.0));
                self.push(
                    value,
                    vec![a.id],
                    Some(Box::new(move |adj| {
                        vec![adj.zip(&input, |g, x| if x > 0.0 { g } else { 0.0 })]
                    })),
                )
            }
            Activation::Sigmoid => {
                let value = input.map(sigmoid_value);
                let out = value.clone();
                self.push(
                    value,
                    vec![a.id],
                    Some(Box::new(move |adj| {
                        vec![adj.zip(&out, |g, s| g * s * (1.0 - s))]
                    })),
                )
            }
            Activation::Hardswish => {
                let value = input.map(hardswish_value);
                self.push(
                    value,
                    vec![a.id],
                    Some(Box::new(move |adj| {
                        vec![adj.zip(&input, |g, x| g * hardswish_derivative(x))]
                    })),
                )
            }
        }
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Relu)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Sigmoid)
    }

    pub fn hardswish(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Hardswish)
    }

    /// Elementwise clamp; gradient passes through on the closed interval.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let input = self.value(a).clone();
        let value = input.map(|x| x.clamp(lo, hi));
        self.push(
            value,
            vec![a.id],
            Some(Box::new(move |adj| {
                vec![adj.zip(&input, |g, x| if (lo..=hi).contains(&x) { g } else { 0.0 })]
            })),
        )
    }

    /// Natural logarithm; caller guarantees strictly positive input.
    pub fn ln(&mut self, a: Var) -> Var {
        let input = self.value(a).clone();
        let value = input.map(f64::ln);
        self.push(
            value,
            vec![a.id],
            Some(Box::new(move |adj| vec![adj.zip(&input, |g, x| g / x)])),
        )
    }

    /// Mean over the row axis: `(m x n) -> (1 x n)`.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let (m, n) = self.shape(a);
        let value = self.value(a).mean_rows();
        self.push(
            value,
            vec![a.id],
            Some(Box::new(move |adj| {
                let inv = 1.0 / m as f64;
                let mut grad = vec![0.0; m * n];
                for i in 0..m {
                    for j in 0..n {
                        grad[i * n + j] = adj.at(0, j) * inv;
                    }
                }
                vec![Tensor::new(m, n, grad)]
            })),
        )
    }

    /// Sum of all entries, as a `1x1` scalar.
    pub fn sum_all(&mut self, a: Var) -> Var {
        let (m, n) = self.shape(a);
        let value = Tensor::scalar(self.value(a).sum());
        self.push(
            value,
            vec![a.id],
            Some(Box::new(move |adj| {
                vec![Tensor::filled(m, n, adj.at(0, 0))]
            })),
        )
    }

    /// Broadcast a `1 x n` row across `a (m x n)` as an elementwise product.
    pub fn mul_row_broadcast(&mut self, a: Var, row: Var) -> Result<Var> {
        let (m, n) = self.shape(a);
        let (rr, rn) = self.shape(row);
        if rr != 1 || rn != n {
            return Err(HokemError::ShapeMismatch {
                op: "mul_row_broadcast",
                lhs: (m, n),
                rhs: (rr, rn),
            });
        }
        let av = self.value(a).clone();
        let rv = self.value(row).clone();
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[i * n + j] = av.at(i, j) * rv.at(0, j);
            }
        }
        Ok(self.push(
            Tensor::new(m, n, data),
            vec![a.id, row.id],
            Some(Box::new(move |adj| {
                let mut da = vec![0.0; m * n];
                let mut dr = vec![0.0; n];
                for i in 0..m {
                    for j in 0..n {
                        da[i * n + j] = adj.at(i, j) * rv.at(0, j);
                        dr[j] += adj.at(i, j) * av.at(i, j);
                    }
                }
                vec![Tensor::new(m, n, da), Tensor::new(1, n, dr)]
            })),
        ))
    }

    /// Reverse pass from a scalar (`1x1`) root. Adjoints accumulate
    /// additively across fan-out; each call starts from fresh zero-initialized
    /// buffers, so repeating it on the same tape yields identical results.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        if self.shape(root) != (1, 1) {
            return Err(HokemError::Contract(format!(
                "backward root must be scalar-shaped (1x1), got {:?}",
                self.shape(root)
            )));
        }
        let mut adjoints: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        adjoints[root.id] = Some(Tensor::scalar(1.0));
        for id in (0..=root.id).rev() {
            let node = &self.nodes[id];
            if !node.needs_grad {
                adjoints[id] = None;
                continue;
            }
            let Some(adj) = adjoints[id].clone() else {
                continue;
            };
            let Some(backward) = &node.backward else {
                continue;
            };
            let contributions = backward(&adj);
            debug_assert_eq!(contributions.len(), node.parents.len());
            for (&parent, grad) in node.parents.iter().zip(contributions) {
                if !self.nodes[parent].needs_grad {
                    continue;
                }
                match &mut adjoints[parent] {
                    Some(existing) => *existing = existing.add(&grad),
                    slot @ None => *slot = Some(grad),
                }
            }
        }
        // Requires-grad leaves untouched by the traversal still get a
        // zero adjoint of their value's shape.
        for (id, node) in self.nodes.iter().enumerate() {
            if node.backward.is_none() && node.needs_grad && adjoints[id].is_none() {
                let (m, n) = node.value.shape();
                adjoints[id] = Some(Tensor::zeros(m, n));
            }
        }
        Ok(Gradients { adjoints })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central finite differences of a scalar function of one tensor entry.
    fn central_diff(mut f: impl FnMut(&Tensor) -> f64, at: &Tensor, i: usize, j: usize) -> f64 {
        let eps = 1e-5;
        let mut plus = at.clone();
        plus.make_mut()[i * at.cols() + j] += eps;
        let mut minus = at.clone();
        minus.make_mut()[i * at.cols() + j] -= eps;
        (f(&plus) - f(&minus)) / (2.0 * eps)
    }

    fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
        let denom = a.abs().max(b.abs()).max(1e-6);
        assert!(
            (a - b).abs() / denom < tol,
            "{what}: {a} vs {b} (rel {})",
            (a - b).abs() / denom
        );
    }

    /// Deterministic pseudo-random fill for tests.
    fn pseudo_random(rows: usize, cols: usize, seed: u64) -> Tensor {
        let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).max(1);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        Tensor::new(rows, cols, (0..rows * cols).map(|_| next()).collect())
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(2, 3));
        let b = tape.constant(Tensor::zeros(2, 3));
        let err = tape.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(2, 3)"), "unexpected message: {msg}");
    }

    #[test]
    fn softmax_uniform_and_analytic() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::zeros(2, 2));
        let s = tape.softmax_rows(z);
        for &v in tape.value(s).data() {
            assert!((v - 0.5).abs() < 1e-12);
        }
        let x = tape.constant(Tensor::from_rows(&[vec![0.0, 3f64.ln()]]));
        let s = tape.softmax_rows(x);
        assert!((tape.value(s).at(0, 0) - 0.25).abs() < 1e-12);
        assert!((tape.value(s).at(0, 1) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn activation_analytic_values() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_rows(&[vec![0.0, -3.0, 3.0, 6.0]]));
        let s = tape.sigmoid(x);
        assert!((tape.value(s).at(0, 0) - 0.5).abs() < 1e-12);
        let h = tape.hardswish(x);
        assert_eq!(tape.value(h).at(0, 1), 0.0);
        assert_eq!(tape.value(h).at(0, 2), 3.0);
        assert_eq!(tape.value(h).at(0, 3), 6.0);
    }

    #[test]
    fn backward_square_and_fanout() {
        // d(x^2)/dx = 2x at x = 3
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(3.0), true);
        let y = tape.mul(x, x).unwrap();
        let grads = tape.backward(y).unwrap();
        assert_eq!(grads.wrt(x).unwrap().at(0, 0), 6.0);

        // y = x + x used twice: adjoint accumulates to 2 * ones
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::filled(2, 2, 1.5), true);
        let y = tape.add(x, x).unwrap();
        let s = tape.sum_all(y);
        let grads = tape.backward(s).unwrap();
        for &v in grads.wrt(x).unwrap().data() {
            assert_eq!(v, 2.0);
        }
    }

    #[test]
    fn backward_requires_scalar_root() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(2, 2), true);
        assert!(matches!(tape.backward(x), Err(HokemError::Contract(_))));
    }

    #[test]
    fn leaf_without_requires_grad_receives_none() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(2.0), true);
        let c = tape.constant(Tensor::scalar(5.0));
        let y = tape.mul(x, c).unwrap();
        let grads = tape.backward(y).unwrap();
        assert!(grads.wrt(c).is_none());
        assert_eq!(grads.wrt(x).unwrap().at(0, 0), 5.0);
    }

    #[test]
    fn unused_requires_grad_leaf_gets_zero_adjoint() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(2.0), true);
        let unused = tape.leaf(Tensor::zeros(3, 2), true);
        let y = tape.mul(x, x).unwrap();
        let grads = tape.backward(y).unwrap();
        let g = grads.wrt(unused).unwrap();
        assert_eq!(g.shape(), (3, 2));
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_twice_yields_identical_adjoints() {
        let mut tape = Tape::new();
        let x = tape.leaf(pseudo_random(3, 3, 11), true);
        let w = tape.leaf(pseudo_random(3, 3, 12), true);
        let p = tape.matmul(x, w).unwrap();
        let s = tape.softmax_rows(p);
        let l = tape.sum_all(s);
        let l2 = tape.mul(l, l).unwrap();
        let g1 = tape.backward(l2).unwrap();
        let g2 = tape.backward(l2).unwrap();
        assert_eq!(g1.wrt(x).unwrap(), g2.wrt(x).unwrap());
        assert_eq!(g1.wrt(w).unwrap(), g2.wrt(w).unwrap());
    }

    #[test]
    fn matmul_gradient_matches_finite_differences() {
        let a0 = pseudo_random(3, 4, 1);
        let b0 = pseudo_random(4, 2, 2);
        let loss = |a: &Tensor, b: &Tensor| {
            let mut tape = Tape::new();
            let av = tape.leaf(a.clone(), true);
            let bv = tape.leaf(b.clone(), true);
            let p = tape.matmul(av, bv).unwrap();
            let s = tape.sum_all(p);
            tape.value(s).at(0, 0)
        };
        let mut tape = Tape::new();
        let av = tape.leaf(a0.clone(), true);
        let bv = tape.leaf(b0.clone(), true);
        let p = tape.matmul(av, bv).unwrap();
        let s = tape.sum_all(p);
        let grads = tape.backward(s).unwrap();
        let ga = grads.wrt(av).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                let fd = central_diff(|a| loss(a, &b0), &a0, i, j);
                assert_close(ga.at(i, j), fd, 1e-4, "dA");
            }
        }
        let gb = grads.wrt(bv).unwrap();
        for i in 0..4 {
            for j in 0..2 {
                let fd = central_diff(|b| loss(&a0, b), &b0, i, j);
                assert_close(gb.at(i, j), fd, 1e-4, "dB");
            }
        }
    }

    #[test]
    fn softmax_jvp_matches_finite_differences() {
        let x0 = pseudo_random(3, 5, 7);
        // Project through a fixed random cotangent so the loss is scalar.
        let cotangent = pseudo_random(3, 5, 8);
        let loss = |x: &Tensor| {
            let mut tape = Tape::new();
            let xv = tape.leaf(x.clone(), true);
            let s = tape.softmax_rows(xv);
            let c = tape.constant(cotangent.clone());
            let m = tape.mul(s, c).unwrap();
            let l = tape.sum_all(m);
            tape.value(l).at(0, 0)
        };
        let mut tape = Tape::new();
        let xv = tape.leaf(x0.clone(), true);
        let s = tape.softmax_rows(xv);
        let c = tape.constant(cotangent.clone());
        let m = tape.mul(s, c).unwrap();
        let l = tape.sum_all(m);
        let grads = tape.backward(l).unwrap();
        let g = grads.wrt(xv).unwrap();
        for i in 0..3 {
            for j in 0..5 {
                let fd = central_diff(loss, &x0, i, j);
                assert_close(g.at(i, j), fd, 1e-4, "softmax grad");
            }
        }
    }

    #[test]
    fn activation_gradients_match_finite_differences_away_from_kinks() {
        // Values keep clear of the relu kink at 0 and hardswish kinks at +/-3.
        let x0 = Tensor::from_rows(&[vec![-4.5, -2.0, -0.5, 0.5, 2.0, 4.5]]);
        for kind in [Activation::Relu, Activation::Sigmoid, Activation::Hardswish] {
            let loss = |x: &Tensor| {
                let mut tape = Tape::new();
                let xv = tape.leaf(x.clone(), true);
                let a = tape.activation(xv, kind);
                let l = tape.sum_all(a);
                tape.value(l).at(0, 0)
            };
            let mut tape = Tape::new();
            let xv = tape.leaf(x0.clone(), true);
            let a = tape.activation(xv, kind);
            let l = tape.sum_all(a);
            let grads = tape.backward(l).unwrap();
            let g = grads.wrt(xv).unwrap();
            for j in 0..x0.cols() {
                let fd = central_diff(loss, &x0, 0, j);
                assert_close(g.at(0, j), fd, 1e-4, &format!("{kind:?} grad"));
            }
        }
    }

    #[test]
    fn composed_graph_gradient_matches_finite_differences() {
        // A small composition exercising several rules at once.
        let w0 = pseudo_random(4, 3, 21);
        let x = pseudo_random(5, 4, 22);
        let loss = |w: &Tensor| {
            let mut tape = Tape::new();
            let xv = tape.constant(x.clone());
            let wv = tape.leaf(w.clone(), true);
            let h = tape.matmul(xv, wv).unwrap();
            let a = tape.hardswish(h);
            let s = tape.softmax_rows(a);
            let p = tape.mean_rows(s);
            let q = tape.sigmoid(p);
            let l = tape.sum_all(q);
            tape.value(l).at(0, 0)
        };
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let wv = tape.leaf(w0.clone(), true);
        let h = tape.matmul(xv, wv).unwrap();
        let a = tape.hardswish(h);
        let s = tape.softmax_rows(a);
        let p = tape.mean_rows(s);
        let q = tape.sigmoid(p);
        let l = tape.sum_all(q);
        let grads = tape.backward(l).unwrap();
        let g = grads.wrt(wv).unwrap();
        for i in 0..4 {
            for j in 0..3 {
                let fd = central_diff(&loss, &w0, i, j);
                assert_close(g.at(i, j), fd, 1e-3, "composed grad");
            }
        }
    }
}
