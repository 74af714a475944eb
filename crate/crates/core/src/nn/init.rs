//! Weight initializers.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

/// Glorot-uniform over `fan_in × fan_out`.
pub fn glorot_uniform<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize) -> Array2<f64> {
    glorot_uniform_shaped(rng, fan_in, fan_out, fan_in, fan_out)
}

pub fn glorot_uniform_shaped<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    fan_in: usize,
    fan_out: usize,
) -> Array2<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit);
    Array2::from_shape_fn((rows, cols), |_| dist.sample(rng))
}

/// Random orthogonal matrix: orthonormal rows when `rows <= cols`,
/// orthonormal columns otherwise (modified Gram-Schmidt on a Gaussian draw).
pub fn orthogonal<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    let mut a: Array2<f64> = Array2::from_shape_fn((n, m), |_| StandardNormal.sample(rng));
    for i in 0..n {
        for j in 0..i {
            let proj = a.row(i).dot(&a.row(j));
            let rj = a.row(j).to_owned();
            a.row_mut(i).scaled_add(-proj, &rj);
        }
        let norm = a.row(i).dot(&a.row(i)).sqrt();
        if norm > 1e-12 {
            a.row_mut(i).mapv_inplace(|v| v / norm);
        }
    }
    if transpose {
        a.reversed_axes().as_standard_layout().to_owned()
    } else {
        a
    }
}
