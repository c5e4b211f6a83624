//! Symmetric quadrature rules on the reference triangle, in barycentric form.
//! Weights sum to one and are multiplied by the triangle area by the caller.

/// One quadrature node: barycentric coordinates and weight.
pub type QuadPoint = ([f64; 3], f64);

/// Three interior points, exact for polynomials of degree 2.
pub fn degree2() -> [QuadPoint; 3] {
    let a = 2.0 / 3.0;
    let b = 1.0 / 6.0;
    let w = 1.0 / 3.0;
    [([a, b, b], w), ([b, a, b], w), ([b, b, a], w)]
}

/// Six-point Dunavant rule, exact for polynomials of degree 4.
pub fn degree4() -> [QuadPoint; 6] {
    let a = 0.445_948_490_915_965;
    let b = 1.0 - 2.0 * a;
    let wa = 0.223_381_589_678_011;
    let c = 0.091_576_213_509_771;
    let d = 1.0 - 2.0 * c;
    let wc = 0.109_951_743_655_322;
    [
        ([b, a, a], wa),
        ([a, b, a], wa),
        ([a, a, b], wa),
        ([d, c, c], wc),
        ([c, d, c], wc),
        ([c, c, d], wc),
    ]
}

/// Barycentric subdivision rule: the degree-4 rule applied on `4^levels`
/// congruent sub-triangles. Used for non-polynomial integrands.
pub fn composite_degree4(levels: u32) -> Vec<QuadPoint> {
    let mut tris = vec![[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]];
    for _ in 0..levels {
        let mut next = Vec::with_capacity(tris.len() * 4);
        for [p, q, r] in tris {
            let mid = |a: [f64; 3], b: [f64; 3]| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])];
            let (pq, qr, rp) = (mid(p, q), mid(q, r), mid(r, p));
            next.extend([[p, pq, rp], [pq, q, qr], [rp, qr, r], [qr, rp, pq]]);
        }
        tris = next;
    }
    let scale = 1.0 / tris.len() as f64;
    let mut out = Vec::with_capacity(tris.len() * 6);
    for [p, q, r] in &tris {
        for (l, w) in degree4() {
            let b = [0, 1, 2].map(|i| l[0] * p[i] + l[1] * q[i] + l[2] * r[i]);
            out.push((b, w * scale));
        }
    }
    out
}
