#![allow(dead_code)]

//! Independent reference implementations shared by the integration tests.

/// Radius of the smallest ball through all of `pts` (centre in their affine
/// hull), or `None` when the points are affinely dependent.
fn circumradius(pts: &[&Vec<f64>]) -> Option<(Vec<f64>, f64)> {
    let p0 = pts[0];
    let m = pts.len() - 1;
    if m == 0 {
        return Some((p0.clone(), 0.0));
    }
    let d = p0.len();
    let v: Vec<Vec<f64>> = pts[1..].iter().map(|p| (0..d).map(|i| p[i] - p0[i]).collect()).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    // 2 G λ = |v_j|², plain Gaussian elimination with partial pivoting
    let mut a: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row: Vec<f64> = (0..m).map(|j| 2.0 * dot(&v[i], &v[j])).collect();
            row.push(dot(&v[i], &v[i]));
            row
        })
        .collect();
    let scale = a.iter().map(|r| r[..m].iter().fold(0.0_f64, |s, x| s.max(x.abs()))).fold(0.0, f64::max);
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        if a[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, piv);
        for r in 0..m {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=m {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let lambda: Vec<f64> = (0..m).map(|i| a[i][m] / a[i][i]).collect();
    let center: Vec<f64> = (0..d).map(|i| p0[i] + (0..m).map(|j| lambda[j] * v[j][i]).sum::<f64>()).collect();
    let r = dot(
        &center.iter().zip(p0).map(|(c, p)| c - p).collect::<Vec<_>>(),
        &center.iter().zip(p0).map(|(c, p)| c - p).collect::<Vec<_>>(),
    )
    .sqrt();
    Some((center, r))
}

/// Minimal enclosing radius by brute force over all support sets of at most
/// `d + 1` points (Euclidean coordinates).
pub fn support_set_radius(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    let d = points[0].len();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << n) {
        let size = mask.count_ones() as usize;
        if size > d + 1 {
            continue;
        }
        let subset: Vec<&Vec<f64>> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| &points[i]).collect();
        let Some((c, r)) = circumradius(&subset) else { continue };
        if r >= best {
            continue;
        }
        let contains_all = points.iter().all(|p| {
            let dist = p.iter().zip(&c).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            dist <= r * (1.0 + 1e-12) + 1e-15
        });
        if contains_all {
            best = r;
        }
    }
    best
}

/// Uniform draws from a tiny xorshift generator, so test-side data do not
/// depend on the library's RNG plumbing.
pub struct XorShift(pub u64);

impl XorShift {
    pub fn next_f64(&mut self) -> f64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        (x >> 11) as f64 / (1u64 << 53) as f64
    }
}
