//! Composite quadrature weights shared by the time integrals.

/// Composite Simpson weights for `intervals >= 2` equal subintervals (to be
/// multiplied by the spacing).  Odd interval counts use Simpson on the head
/// and the 3/8 rule on the last three subintervals, keeping the rule fourth
/// order accurate throughout.
pub(crate) fn simpson_weights(intervals: usize) -> Vec<f64> {
    assert!(intervals >= 2, "need at least two subintervals");
    let mut w = vec![0.0; intervals + 1];
    let head = if intervals % 2 == 0 { intervals } else { intervals - 3 };
    if head > 0 {
        w[0] = 1.0 / 3.0;
        w[head] = 1.0 / 3.0;
        for (i, item) in w.iter_mut().enumerate().take(head).skip(1) {
            *item = if i % 2 == 1 { 4.0 / 3.0 } else { 2.0 / 3.0 };
        }
    }
    if intervals % 2 == 1 {
        w[head] += 3.0 / 8.0;
        w[head + 1] += 9.0 / 8.0;
        w[head + 2] += 9.0 / 8.0;
        w[head + 3] += 3.0 / 8.0;
    }
    w
}
