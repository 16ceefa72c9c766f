//! Brute-force projection onto 2-D sets by dense grid search.

/// Closest grid point to `y` among those accepted by `inside`, searching the
/// square `[lo, hi]²` with `n × n` samples.
pub fn project_2d(y: [f64; 2], lo: f64, hi: f64, n: usize, inside: impl Fn([f64; 2]) -> bool) -> Option<[f64; 2]> {
    let step = (hi - lo) / (n - 1) as f64;
    let mut best: Option<([f64; 2], f64)> = None;
    for i in 0..n {
        for j in 0..n {
            let p = [lo + i as f64 * step, lo + j as f64 * step];
            if !inside(p) {
                continue;
            }
            let d = (p[0] - y[0]).powi(2) + (p[1] - y[1]).powi(2);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((p, d));
            }
        }
    }
    best.map(|(p, _)| p)
}
