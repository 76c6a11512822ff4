use super::Scalar;

/// Strided read-only matrix view into a slice.
#[derive(Clone, Copy)]
pub(crate) struct MatRef<'a, T> {
    pub data: &'a [T],
    pub offset: usize,
    pub row_stride: usize,
    pub col_stride: usize,
}

pub(crate) struct MatMut<'a, T> {
    pub data: &'a mut [T],
    pub offset: usize,
    pub row_stride: usize,
    pub col_stride: usize,
}

fn last_index(offset: usize, rows: usize, cols: usize, rs: usize, cs: usize) -> usize {
    offset + (rows - 1) * rs + (cols - 1) * cs
}

/// `C = A·B + beta·C` with `A: m×k`, `B: k×n`, `C: m×n`.
pub(crate) fn gemm<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: MatRef<'_, T>,
    b: MatRef<'_, T>,
    beta: T,
    c: MatMut<'_, T>,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(last_index(c.offset, m, n, c.row_stride, c.col_stride) < c.data.len());
    if k > 0 {
        assert!(last_index(a.offset, m, k, a.row_stride, a.col_stride) < a.data.len());
        assert!(last_index(b.offset, k, n, b.row_stride, b.col_stride) < b.data.len());
    }
    // SAFETY: the asserts above bound every address the kernel touches, and
    // `c` is a unique borrow so it cannot alias `a` or `b`.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            T::one(),
            a.data.as_ptr().add(a.offset),
            a.row_stride as isize,
            a.col_stride as isize,
            b.data.as_ptr().add(b.offset),
            b.row_stride as isize,
            b.col_stride as isize,
            beta,
            c.data.as_mut_ptr().add(c.offset),
            c.row_stride as isize,
            c.col_stride as isize,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_product_and_accumulate() {
        // [[1,2],[3,4]] · [[5,6],[7,8]] = [[19,22],[43,50]]
        let a = [1.0f64, 2.0, 3.0, 4.0];
        let b = [5.0f64, 6.0, 7.0, 8.0];
        let mut c = [1.0f64; 4];
        gemm(
            2,
            2,
            2,
            MatRef { data: &a, offset: 0, row_stride: 2, col_stride: 1 },
            MatRef { data: &b, offset: 0, row_stride: 2, col_stride: 1 },
            1.0,
            MatMut { data: &mut c, offset: 0, row_stride: 2, col_stride: 1 },
        );
        assert_eq!(c, [20.0, 23.0, 44.0, 51.0]);
    }

    #[test]
    fn transposed_view() {
        // Aᵀ·B with A stored row-major 2x2.
        let a = [1.0f32, 2.0, 3.0, 4.0];
        let b = [1.0f32, 0.0, 0.0, 1.0];
        let mut c = [0.0f32; 4];
        gemm(
            2,
            2,
            2,
            MatRef { data: &a, offset: 0, row_stride: 1, col_stride: 2 },
            MatRef { data: &b, offset: 0, row_stride: 2, col_stride: 1 },
            0.0,
            MatMut { data: &mut c, offset: 0, row_stride: 2, col_stride: 1 },
        );
        assert_eq!(c, [1.0, 3.0, 2.0, 4.0]);
    }
}
