use nalgebra::DMatrix;

/// Block matrices of a chain of `r` integrators, each of width `n_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainMatrices {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub r: usize,
    pub n_y: usize,
}

pub fn build_chain_matrices(r: usize, n_y: usize) -> ChainMatrices {
    assert!(r >= 1 && n_y >= 1, "chain needs r >= 1 and n_y >= 1");
    let n = r * n_y;
    let mut a = DMatrix::zeros(n, n);
    for i in 0..(r - 1) * n_y {
        a[(i, i + n_y)] = 1.0;
    }
    let mut b = DMatrix::zeros(n, n_y);
    let mut c = DMatrix::zeros(n_y, n);
    for k in 0..n_y {
        b[((r - 1) * n_y + k, k)] = 1.0;
        c[(k, k)] = 1.0;
    }
    ChainMatrices { a, b, c, r, n_y }
}

impl ChainMatrices {
    pub fn dim(&self) -> usize {
        self.r * self.n_y
    }

    pub fn is_controllable(&self) -> bool {
        kalman_rank(&self.a, &self.b) == self.dim()
    }

    pub fn is_observable(&self) -> bool {
        kalman_rank(&self.a.transpose(), &self.c.transpose()) == self.dim()
    }
}

/// `[B, AB, ..., A^{n-1}B]`.
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = b.ncols();
    let mut out = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        out.columns_mut(k * m, m).copy_from(&block);
        block = a * block;
    }
    out
}

pub fn kalman_rank(a: &DMatrix<f64>, b: &DMatrix<f64>) -> usize {
    let k = controllability_matrix(a, b);
    let scale = k.amax().max(1.0);
    k.svd(false, false).rank(1e-9 * scale)
}
