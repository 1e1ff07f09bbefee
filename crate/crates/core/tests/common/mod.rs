#![allow(dead_code)]

use nalgebra::{Complex, DMatrix, DVector};
use qkext::pqc::{CircuitTemplate, GateKind};
use qkext::sparsity::SparsityPattern;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex<f64>;

/// Largest gap between the empirical CDF of `samples` and `cdf`.
pub fn ks_distance(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn single_qubit(kind: GateKind, theta: f64) -> DMatrix<C64> {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let z = C64::new(0.0, 0.0);
    let r = |x: f64| C64::new(x, 0.0);
    let i = |x: f64| C64::new(0.0, x);
    let entries = match kind {
        GateKind::Rx | GateKind::Crx => [r(c), i(-s), i(-s), r(c)],
        GateKind::Ry | GateKind::Cry => [r(c), r(-s), r(s), r(c)],
        GateKind::Rz | GateKind::Crz => [
            C64::from_polar(1.0, -theta / 2.0),
            z,
            z,
            C64::from_polar(1.0, theta / 2.0),
        ],
        GateKind::H => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            [r(h), r(h), r(h), r(-h)]
        }
        GateKind::Cx => [z, r(1.0), r(1.0), z],
        GateKind::Cz => [r(1.0), z, z, r(-1.0)],
    };
    DMatrix::from_row_slice(2, 2, &entries)
}

/// `op` on qubit `q` of a `width`-qubit register, qubit q being bit q of the
/// basis index (so the highest qubit is the leftmost Kronecker factor).
fn embed(op: &DMatrix<C64>, q: usize, width: usize) -> DMatrix<C64> {
    let mut full = DMatrix::<C64>::identity(1, 1);
    for k in (0..width).rev() {
        let f = if k == q {
            op.clone()
        } else {
            DMatrix::identity(2, 2)
        };
        full = full.kronecker(&f);
    }
    full
}

/// Dense circuit unitary built from Kronecker products, independent of the
/// statevector kernel.
pub fn dense_unitary(template: &CircuitTemplate, params: &[f64]) -> DMatrix<C64> {
    let w = template.width();
    let dim = 1 << w;
    let mut u = DMatrix::<C64>::identity(dim, dim);
    let p0 = DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ],
    );
    let p1 = DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
        ],
    );
    for g in template.unrolled() {
        let theta = g.param_slot.map_or(0.0, |s| params[s]);
        let op = single_qubit(g.kind, theta);
        let m = match g.control {
            None => embed(&op, g.target, w),
            Some(c) => {
                // |0><0|_c + |1><1|_c (x) op_t
                embed(&p0, c, w) + embed(&p1, c, w) * embed(&op, g.target, w)
            }
        };
        u = m * u;
    }
    u
}

/// Kernel matrix from explicitly materialised states.
pub fn gram_oracle(template: &CircuitTemplate, data: &DMatrix<f64>) -> DMatrix<f64> {
    let p = template.param_count();
    let states: Vec<DVector<C64>> = (0..data.nrows())
        .map(|i| {
            let params: Vec<f64> = (0..p).map(|j| data[(i, j)]).collect();
            dense_unitary(template, &params).column(0).into_owned()
        })
        .collect();
    let n = states.len();
    DMatrix::from_fn(n, n, |l, m| states[l].dotc(&states[m]).norm_sqr())
}

/// Random correlation-scaled Wishart matrix, PD with high probability.
pub fn random_pd<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let k = n + 3;
    let a = DMatrix::<f64>::from_fn(n, k, |_, _| rng.sample(StandardNormal));
    let s = &a * a.transpose();
    let d: Vec<f64> = (0..n).map(|i| s[(i, i)].sqrt()).collect();
    DMatrix::from_fn(n, n, |l, m| {
        if l == m {
            1.0
        } else {
            s[(l, m)] / (d[l] * d[m])
        }
    })
}

fn inverse_if_pd(x: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    Some(x.clone().cholesky()?.inverse())
}

/// Maximises log det over the unknown entries of `pattern` by gradient
/// ascent, starting from the PD matrix `start` whose known entries define the
/// problem. The gradient in the (l, m) pair is `2 (X^-1)_lm`. Each step is an
/// exact line search: log det is concave along the ray, so the step is found
/// by bisection on the sign of the directional derivative. Returns the final
/// iterate and its largest gradient entry.
pub fn max_det_by_gradient(
    start: &DMatrix<f64>,
    pattern: &SparsityPattern,
    grad_tol: f64,
) -> (DMatrix<f64>, f64) {
    let n = start.nrows();
    let unknown: Vec<(usize, usize)> = (0..n)
        .flat_map(|l| (0..l).map(move |m| (l, m)))
        .filter(|&(l, m)| !pattern.is_known(l, m))
        .collect();
    let moved = |x: &DMatrix<f64>, g: &[f64], t: f64| {
        let mut y = x.clone();
        for (&(l, m), gi) in unknown.iter().zip(g) {
            y[(l, m)] += t * gi;
            y[(m, l)] = y[(l, m)];
        }
        y
    };
    // slope of log det along g at x + t g, None outside the PD cone
    let slope = |x: &DMatrix<f64>, g: &[f64], t: f64| {
        let inv = inverse_if_pd(&moved(x, g, t))?;
        Some(
            unknown
                .iter()
                .zip(g)
                .map(|(&(l, m), gi)| 2.0 * inv[(l, m)] * gi)
                .sum::<f64>(),
        )
    };
    let mut x = start.clone();
    let mut step = 1.0f64;
    let mut gmax = f64::INFINITY;
    for _ in 0..100_000 {
        let inv = inverse_if_pd(&x).expect("iterate left the PD cone");
        let g: Vec<f64> = unknown.iter().map(|&(l, m)| 2.0 * inv[(l, m)]).collect();
        gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if gmax < grad_tol {
            break;
        }
        let (mut lo, mut hi) = (0.0, step);
        while matches!(slope(&x, &g, hi), Some(v) if v > 0.0) {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            match slope(&x, &g, mid) {
                Some(v) if v > 0.0 => lo = mid,
                _ => hi = mid,
            }
        }
        if lo == 0.0 {
            break;
        }
        step = lo;
        x = moved(&x, &g, lo);
    }
    (x, gmax)
}

/// Random band or two-block pattern on `n` rows.
pub fn random_pattern<R: Rng>(n: usize, rng: &mut R) -> SparsityPattern {
    if n >= 2 && rng.random_bool(0.5) {
        let n_new = rng.random_range(1..n);
        let n_old = n - n_new;
        let u = rng.random_range(0..=n_old);
        SparsityPattern::two_block(n_old, n_new, u).unwrap()
    } else {
        SparsityPattern::band(n, rng.random_range(0..n)).unwrap()
    }
}
