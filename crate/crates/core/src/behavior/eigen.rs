/// Eigen-decomposition of a symmetric 2×2 matrix `[[a, b], [b, c]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymEigen2 {
    /// Larger eigenvalue first.
    pub values: [f64; 2],
    /// Unit eigenvector of `values[0]`, in matrix coordinates.
    pub principal: [f64; 2],
}

/// Closed form via trace and discriminant. The principal vector is built from
/// whichever matrix row gives the better-conditioned direction.
pub fn sym_eigen2(a: f64, b: f64, c: f64) -> SymEigen2 {
    let mean = 0.5 * (a + c);
    let r = (0.5 * (a - c)).hypot(b);
    let l1 = mean + r;
    let l2 = mean - r;
    // (A - l1 I) v = 0 from either row.
    let u = [b, l1 - a];
    let w = [l1 - c, b];
    let (nu, nw) = (u[0].hypot(u[1]), w[0].hypot(w[1]));
    let principal = if nu.max(nw) <= f64::EPSILON * l1.abs().max(f64::MIN_POSITIVE) {
        if a >= c {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        }
    } else if nu >= nw {
        [u[0] / nu, u[1] / nu]
    } else {
        [w[0] / nw, w[1] / nw]
    };
    SymEigen2 {
        values: [l1, l2],
        principal,
    }
}
