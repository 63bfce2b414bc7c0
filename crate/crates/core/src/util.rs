//! Small dense helpers shared by several modules.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Gaussian elimination with partial pivoting on a small dense system.
pub(crate) fn solve_dense<T: Real, const N: usize>(mut m: [[T; N]; N], mut b: [T; N], what: &str) -> Result<[T; N]> {
    let scale = m.iter().flatten().fold(T::zero(), |acc, v| acc.max(v.abs()));
    for col in 0..N {
        let mut piv = col;
        for i in col + 1..N {
            if m[i][col].abs() > m[piv][col].abs() {
                piv = i;
            }
        }
        if !(m[piv][col].abs() > T::epsilon() * scale) {
            return Err(Error::Singular(what.to_string()));
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..N {
            let f = m[row][col] / m[col][col];
            for k in col..N {
                let v = m[col][k];
                m[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = [T::zero(); N];
    for row in (0..N).rev() {
        let mut acc = b[row];
        for k in row + 1..N {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Ok(x)
}
