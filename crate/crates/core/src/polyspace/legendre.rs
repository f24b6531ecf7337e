/// Writes `L_0(y), ..., L_{n}(y)` into `out` (length `n + 1`), where `L_m`
/// is the degree-`m` Legendre polynomial scaled to unit norm under the
/// uniform probability measure on `[-1, 1]`, i.e. `sqrt(2m + 1) P_m`.
///
/// The unscaled values come from Bonnet's three-term recurrence.
pub fn legendre_normalized(y: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let mut prev = 1.0;
    out[0] = 1.0;
    if out.len() == 1 {
        return;
    }
    let mut cur = y;
    out[1] = 3f64.sqrt() * y;
    for m in 1..out.len() - 1 {
        let mf = m as f64;
        let next = ((2.0 * mf + 1.0) * y * cur - mf * prev) / (mf + 1.0);
        prev = cur;
        cur = next;
        out[m + 1] = (2.0 * mf + 3.0).sqrt() * next;
    }
}

/// Single normalized Legendre value; see [`legendre_normalized`].
pub fn legendre(degree: usize, y: f64) -> f64 {
    let mut buf = vec![0.0; degree + 1];
    legendre_normalized(y, &mut buf);
    buf[degree]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_degrees() {
        assert_eq!(legendre(0, 0.3), 1.0);
        assert!((legendre(1, 0.5) - 3f64.sqrt() * 0.5).abs() < 1e-15);
    }

    #[test]
    fn unit_norm_by_midpoint_rule() {
        let n = 200_000;
        for deg in 0..6 {
            let h = 2.0 / n as f64;
            let s: f64 = (0..n)
                .map(|i| {
                    let y = -1.0 + (i as f64 + 0.5) * h;
                    legendre(deg, y).powi(2)
                })
                .sum::<f64>()
                * h
                / 2.0;
            assert!((s - 1.0).abs() < 1e-6, "degree {deg}: {s}");
        }
    }
}
