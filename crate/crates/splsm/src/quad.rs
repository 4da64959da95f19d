//! Gauss-Legendre quadrature and a collapsed (Duffy) rule on the reference
//! triangle, exact for polynomials up to the requested degree.

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // initial guess on [-1, 1]
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((x + 1.0) / 2.0, w / 2.0));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Legendre polynomial P_n and derivative at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Quadrature on the reference triangle {(u,v): u,v >= 0, u+v <= 1} returned
/// as barycentric coordinates (1-u-v, u, v) with weights summing to 1/2
/// (the reference area). Exact for total degree <= `degree`.
pub fn triangle_rule(degree: usize) -> Vec<([f64; 3], f64)> {
    let n = degree / 2 + 2; // Duffy map raises the u-degree by one
    let gl = gauss_legendre_unit(n);
    let mut out = Vec::with_capacity(n * n);
    for &(u, wu) in &gl {
        for &(v, wv) in &gl {
            let x = u;
            let y = v * (1.0 - u);
            let w = wu * wv * (1.0 - u);
            out.push(([1.0 - x - y, x, y], w));
        }
    }
    out
}
