//! Tape-based reverse-mode autodiff.
//!
//! Every operation appends a node holding its forward value and the ids of
//! its inputs. Node ids are assigned in creation order, which is already a
//! topological order, so the backward sweep walks ids from the output down
//! and touches each node exactly once. Gradients of shared subexpressions
//! accumulate.

use std::cell::{Ref, RefCell};
use std::rc::Rc;

use ndarray::{s, Array2, Axis, Zip};

use super::Tensor;
use crate::error::{Error, Result};

/// Shared row-index list for gather / scatter / segment operations.
pub type Idx = Rc<Vec<usize>>;

enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddRow(usize, usize),
    MulCol(usize, usize),
    MatMul(usize, usize),
    /// Keeps the input's sigmoid for the backward pass.
    Silu(usize, Tensor),
    Relu(usize),
    Abs(usize),
    Exp(usize),
    Sum(usize),
    Mean(usize),
    RowSum(usize),
    RowNorm(usize),
    Gather(usize, Idx),
    ScatterAdd(usize, Idx),
    ConcatCols(Vec<usize>),
    SliceCols(usize, usize),
    SliceRows(usize, usize),
    SegmentSoftmax(usize, Idx),
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{} {:?}", self.id, self.shape())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A differentiable input.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf)
    }

    /// Same as `leaf`; used for inputs whose gradient is never read.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf)
    }

    pub fn scalar(&self, x: f64) -> Var<'_> {
        self.leaf(Array2::from_elem((1, 1), x))
    }

    fn push(&self, value: Tensor, op: Op) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn value(&self, id: usize) -> Ref<'_, Tensor> {
        Ref::map(self.nodes.borrow(), |n| &n[id].value)
    }

    /// Gradients of a scalar `output` with respect to `params`. Parameters the
    /// output does not depend on get zero arrays.
    pub fn grad(&self, output: Var<'_>, params: &[Var<'_>]) -> Result<Vec<Tensor>> {
        let grads = self.backward(output)?;
        Ok(params
            .iter()
            .map(|p| {
                grads[p.id]
                    .clone()
                    .unwrap_or_else(|| Array2::zeros(self.value(p.id).raw_dim()))
            })
            .collect())
    }

    fn backward(&self, output: Var<'_>) -> Result<Vec<Option<Tensor>>> {
        let nodes = self.nodes.borrow();
        if nodes[output.id].value.dim() != (1, 1) {
            return Err(Error::Shape(format!(
                "backward needs a scalar output, got {:?}",
                nodes[output.id].value.dim()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; output.id + 1];
        grads[output.id] = Some(Array2::ones((1, 1)));
        for id in (0..=output.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            let val = |i: usize| &nodes[i].value;
            match &node.op {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, -g);
                }
                Op::Mul(a, b) => {
                    acc(&mut grads, *a, &g * val(*b));
                    acc(&mut grads, *b, g * val(*a));
                }
                Op::Scale(a, c) => acc(&mut grads, *a, g * *c),
                Op::AddRow(a, row) => {
                    acc(&mut grads, *row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *a, g);
                }
                Op::MulCol(a, col) => {
                    let gc = (&g * val(*a)).sum_axis(Axis(1)).insert_axis(Axis(1));
                    acc(&mut grads, *col, gc);
                    acc(&mut grads, *a, g * val(*col));
                }
                Op::MatMul(a, b) => {
                    acc(&mut grads, *a, g.dot(&val(*b).t()));
                    acc(&mut grads, *b, val(*a).t().dot(&g));
                }
                Op::Silu(a, sig) => {
                    let mut d = g;
                    Zip::from(&mut d).and(val(*a)).and(sig).for_each(|d, &x, &s| {
                        *d *= s * (1.0 + x * (1.0 - s));
                    });
                    acc(&mut grads, *a, d);
                }
                Op::Relu(a) => {
                    let mut d = g;
                    Zip::from(&mut d).and(val(*a)).for_each(|d, &x| {
                        if x <= 0.0 {
                            *d = 0.0;
                        }
                    });
                    acc(&mut grads, *a, d);
                }
                Op::Abs(a) => {
                    let mut d = g;
                    Zip::from(&mut d)
                        .and(val(*a))
                        .for_each(|d, &x| *d *= if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 });
                    acc(&mut grads, *a, d);
                }
                Op::Exp(a) => acc(&mut grads, *a, g * &node.value),
                Op::Sum(a) => {
                    let d = Array2::from_elem(val(*a).raw_dim(), g[[0, 0]]);
                    acc(&mut grads, *a, d);
                }
                Op::Mean(a) => {
                    let n = val(*a).len() as f64;
                    let d = Array2::from_elem(val(*a).raw_dim(), g[[0, 0]] / n);
                    acc(&mut grads, *a, d);
                }
                Op::RowSum(a) => {
                    let d = g.broadcast(val(*a).raw_dim()).expect("n x 1 broadcast").to_owned();
                    acc(&mut grads, *a, d);
                }
                Op::RowNorm(a) => {
                    let x = val(*a);
                    let mut d = Array2::zeros(x.raw_dim());
                    for r in 0..x.nrows() {
                        let nrm = node.value[[r, 0]];
                        if nrm > 0.0 {
                            let f = g[[r, 0]] / nrm;
                            for c in 0..x.ncols() {
                                d[[r, c]] = f * x[[r, c]];
                            }
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::Gather(a, idx) => {
                    let mut d = Array2::zeros(val(*a).raw_dim());
                    for (r, &src) in idx.iter().enumerate() {
                        let mut row = d.row_mut(src);
                        row += &g.row(r);
                    }
                    acc(&mut grads, *a, d);
                }
                Op::ScatterAdd(a, idx) => {
                    let mut d = Array2::zeros(val(*a).raw_dim());
                    for (r, &dst) in idx.iter().enumerate() {
                        d.row_mut(r).assign(&g.row(dst));
                    }
                    acc(&mut grads, *a, d);
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = val(p).ncols();
                        acc(&mut grads, p, g.slice(s![.., start..start + w]).to_owned());
                        start += w;
                    }
                }
                Op::SliceCols(a, start) => {
                    let mut d = Array2::zeros(val(*a).raw_dim());
                    let w = g.ncols();
                    d.slice_mut(s![.., *start..*start + w]).assign(&g);
                    acc(&mut grads, *a, d);
                }
                Op::SliceRows(a, start) => {
                    let mut d = Array2::zeros(val(*a).raw_dim());
                    let h = g.nrows();
                    d.slice_mut(s![*start..*start + h, ..]).assign(&g);
                    acc(&mut grads, *a, d);
                }
                Op::SegmentSoftmax(a, seg) => {
                    let y = &node.value;
                    let nseg = seg.iter().copied().max().map_or(0, |m| m + 1);
                    let mut dots = Array2::<f64>::zeros((nseg, y.ncols()));
                    for (r, &sgi) in seg.iter().enumerate() {
                        for c in 0..y.ncols() {
                            dots[[sgi, c]] += y[[r, c]] * g[[r, c]];
                        }
                    }
                    let mut d = Array2::zeros(y.raw_dim());
                    for (r, &sgi) in seg.iter().enumerate() {
                        for c in 0..y.ncols() {
                            d[[r, c]] = y[[r, c]] * (g[[r, c]] - dots[[sgi, c]]);
                        }
                    }
                    acc(&mut grads, *a, d);
                }
            }
        }
        Ok(grads)
    }
}

fn acc(grads: &mut [Option<Tensor>], id: usize, g: Tensor) {
    match &mut grads[id] {
        Some(existing) => *existing += &g,
        slot @ None => *slot = Some(g),
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + fast_exp(-x))
}

/// Branch-free `exp` accurate to a few ulp. Arguments are clamped to
/// `[-708, 709]`, so the result never overflows to infinity or underflows
/// to a subnormal.
#[inline]
pub(crate) fn fast_exp(x: f64) -> f64 {
    const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
    const INV_LN2: f64 = std::f64::consts::LOG2_E;
    // adding 1.5 * 2^52 rounds to the nearest integer
    const SHIFTER: f64 = 6_755_399_441_055_744.0;
    let x = x.clamp(-708.0, 709.0);
    let t = x * INV_LN2 + SHIFTER;
    let k = t - SHIFTER;
    let r = x - k * LN2_HI - k * LN2_LO;
    let mut p = 1.0 / 6_227_020_800.0;
    for c in [
        1.0 / 479_001_600.0,
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ] {
        p = p * r + c;
    }
    let ki = (t.to_bits() as i64).wrapping_sub(SHIFTER.to_bits() as i64);
    p * f64::from_bits(((ki + 1023) as u64) << 52)
}

#[inline]
pub(crate) fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Ref<'t, Tensor> {
        self.tape.value(self.id)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value().dim()
    }

    /// The single element of a `1 x 1` value.
    pub fn item(&self) -> f64 {
        self.value()[[0, 0]]
    }

    fn unary(self, op: Op, f: impl FnOnce(&Tensor) -> Tensor) -> Var<'t> {
        let v = f(&self.value());
        self.tape.push(v, op)
    }

    fn binary(self, other: Var<'t>, op: Op, f: impl FnOnce(&Tensor, &Tensor) -> Tensor) -> Var<'t> {
        let v = {
            let a = self.value();
            let b = other.value();
            f(&a, &b)
        };
        self.tape.push(v, op)
    }

    fn same_shape(&self, other: &Var<'t>, what: &str) {
        assert_eq!(self.shape(), other.shape(), "{what}: shape mismatch");
    }

    pub fn add(self, other: Var<'t>) -> Var<'t> {
        self.same_shape(&other, "add");
        self.binary(other, Op::Add(self.id, other.id), |a, b| a + b)
    }

    pub fn sub(self, other: Var<'t>) -> Var<'t> {
        self.same_shape(&other, "sub");
        self.binary(other, Op::Sub(self.id, other.id), |a, b| a - b)
    }

    /// Elementwise product.
    pub fn mul(self, other: Var<'t>) -> Var<'t> {
        self.same_shape(&other, "mul");
        self.binary(other, Op::Mul(self.id, other.id), |a, b| a * b)
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        self.unary(Op::Scale(self.id, c), |a| a * c)
    }

    /// `self (n x m) + row (1 x m)` broadcast over rows.
    pub fn add_row(self, row: Var<'t>) -> Var<'t> {
        let (_, m) = self.shape();
        assert_eq!(row.shape(), (1, m), "add_row: bias shape");
        self.binary(row, Op::AddRow(self.id, row.id), |a, r| a + r)
    }

    /// `self (n x m) * col (n x 1)` broadcast over columns.
    pub fn mul_col(self, col: Var<'t>) -> Var<'t> {
        let (n, _) = self.shape();
        assert_eq!(col.shape(), (n, 1), "mul_col: column shape");
        self.binary(col, Op::MulCol(self.id, col.id), |a, c| a * c)
    }

    pub fn matmul(self, other: Var<'t>) -> Var<'t> {
        assert_eq!(self.shape().1, other.shape().0, "matmul: inner dims");
        self.binary(other, Op::MatMul(self.id, other.id), |a, b| a.dot(b))
    }

    pub fn silu(self) -> Var<'t> {
        let (sig, v) = {
            let a = self.value();
            let sig = a.mapv(sigmoid);
            let v = &*a * &sig;
            (sig, v)
        };
        self.tape.push(v, Op::Silu(self.id, sig))
    }

    pub fn relu(self) -> Var<'t> {
        self.unary(Op::Relu(self.id), |a| a.mapv(|x| x.max(0.0)))
    }

    pub fn abs(self) -> Var<'t> {
        self.unary(Op::Abs(self.id), |a| a.mapv(f64::abs))
    }

    pub fn exp(self) -> Var<'t> {
        self.unary(Op::Exp(self.id), |a| a.mapv(f64::exp))
    }

    pub fn sum(self) -> Var<'t> {
        self.unary(Op::Sum(self.id), |a| Array2::from_elem((1, 1), a.sum()))
    }

    pub fn mean(self) -> Var<'t> {
        self.unary(Op::Mean(self.id), |a| {
            Array2::from_elem((1, 1), a.sum() / a.len() as f64)
        })
    }

    /// Sum of each row, `n x 1`.
    pub fn row_sum(self) -> Var<'t> {
        self.unary(Op::RowSum(self.id), |a| a.sum_axis(Axis(1)).insert_axis(Axis(1)))
    }

    /// Euclidean norm of each row, `n x 1`.
    pub fn row_norm(self) -> Var<'t> {
        self.unary(Op::RowNorm(self.id), |a| {
            a.map_axis(Axis(1), |r| r.dot(&r).sqrt()).insert_axis(Axis(1))
        })
    }

    /// `out[r] = self[idx[r]]`.
    pub fn gather(self, idx: &Idx) -> Var<'t> {
        let v = {
            let a = self.value();
            let mut out = Array2::zeros((idx.len(), a.ncols()));
            for (r, &src) in idx.iter().enumerate() {
                out.row_mut(r).assign(&a.row(src));
            }
            out
        };
        self.tape.push(v, Op::Gather(self.id, idx.clone()))
    }

    /// `out[idx[r]] += self[r]` into `rows` output rows.
    pub fn scatter_add(self, idx: &Idx, rows: usize) -> Var<'t> {
        let v = {
            let a = self.value();
            assert_eq!(a.nrows(), idx.len(), "scatter_add: index length");
            let mut out = Array2::zeros((rows, a.ncols()));
            for (r, &dst) in idx.iter().enumerate() {
                let mut row = out.row_mut(dst);
                row += &a.row(r);
            }
            out
        };
        self.tape.push(v, Op::ScatterAdd(self.id, idx.clone()))
    }

    pub fn concat_cols(parts: &[Var<'t>]) -> Var<'t> {
        let tape = parts[0].tape;
        let v = {
            let vals: Vec<_> = parts.iter().map(|p| p.value()).collect();
            let views: Vec<_> = vals.iter().map(|v| v.view()).collect();
            ndarray::concatenate(Axis(1), &views).expect("concat_cols: row counts")
        };
        tape.push(v, Op::ConcatCols(parts.iter().map(|p| p.id).collect()))
    }

    pub fn slice_cols(self, start: usize, end: usize) -> Var<'t> {
        self.unary(Op::SliceCols(self.id, start), |a| {
            a.slice(s![.., start..end]).to_owned()
        })
    }

    pub fn slice_rows(self, start: usize, end: usize) -> Var<'t> {
        self.unary(Op::SliceRows(self.id, start), |a| {
            a.slice(s![start..end, ..]).to_owned()
        })
    }

    /// Column-wise softmax within row groups: rows sharing `seg[r]` are
    /// normalized together.
    pub fn segment_softmax(self, seg: &Idx) -> Var<'t> {
        let v = {
            let a = self.value();
            assert_eq!(a.nrows(), seg.len(), "segment_softmax: index length");
            let nseg = seg.iter().copied().max().map_or(0, |m| m + 1);
            let cols = a.ncols();
            let mut max = Array2::from_elem((nseg, cols), f64::NEG_INFINITY);
            for (r, &sgi) in seg.iter().enumerate() {
                for c in 0..cols {
                    max[[sgi, c]] = max[[sgi, c]].max(a[[r, c]]);
                }
            }
            let mut out = Array2::zeros(a.raw_dim());
            let mut denom = Array2::<f64>::zeros((nseg, cols));
            for (r, &sgi) in seg.iter().enumerate() {
                for c in 0..cols {
                    let e = if a[[r, c]] == f64::NEG_INFINITY {
                        0.0
                    } else {
                        (a[[r, c]] - max[[sgi, c]]).exp()
                    };
                    out[[r, c]] = e;
                    denom[[sgi, c]] += e;
                }
            }
            for (r, &sgi) in seg.iter().enumerate() {
                for c in 0..cols {
                    if denom[[sgi, c]] > 0.0 {
                        out[[r, c]] /= denom[[sgi, c]];
                    }
                }
            }
            out
        };
        self.tape.push(v, Op::SegmentSoftmax(self.id, seg.clone()))
    }
}
