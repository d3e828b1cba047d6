//! Planar polygon utilities: areas, containment, distances, simplicity and
//! ear-clipping triangulation of polygons with holes.

pub type P2 = [f64; 2];

pub fn signed_area(poly: &[P2]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s
}

pub fn orient(a: P2, b: P2, c: P2) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Even-odd containment; points exactly on an edge may go either way.
pub fn contains(poly: &[P2], p: P2) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let a = poly[i];
        let b = poly[j];
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn seg_dist2(p: P2, a: P2, b: P2) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let d = [ap[0] - t * ab[0], ap[1] - t * ab[1]];
    d[0] * d[0] + d[1] * d[1]
}

/// Squared distance from `p` to the closed polyline `poly`.
pub fn boundary_dist2(poly: &[P2], p: P2) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| seg_dist2(p, poly[i], poly[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

fn on_segment(a: P2, b: P2, p: P2) -> bool {
    p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(a: P2, b: P2, c: P2, d: P2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// True when no two non-adjacent edges touch and no adjacent edges fold back.
pub fn is_simple(poly: &[P2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            let c = poly[j];
            let d = poly[(j + 1) % n];
            if adjacent {
                // Shared vertex is fine; a collinear overlap is not.
                let (shared, other_a, other_b) = if j == i + 1 { (b, a, d) } else { (a, b, c) };
                let u = [other_a[0] - shared[0], other_a[1] - shared[1]];
                let v = [other_b[0] - shared[0], other_b[1] - shared[1]];
                let crs = u[0] * v[1] - u[1] * v[0];
                let dt = u[0] * v[0] + u[1] * v[1];
                if crs == 0.0 && dt > 0.0 {
                    return false;
                }
                continue;
            }
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// True when the two closed polygons share no boundary point.
pub fn boundaries_disjoint(p: &[P2], q: &[P2]) -> bool {
    let (n, m) = (p.len(), q.len());
    for i in 0..n {
        for j in 0..m {
            if segments_intersect(p[i], p[(i + 1) % n], q[j], q[(j + 1) % m]) {
                return false;
            }
        }
    }
    true
}

/// Triangulates a CCW outer polygon with CW holes. Output triangles are CCW.
pub fn triangulate(outer: &[P2], holes: &[Vec<P2>]) -> Vec<[P2; 3]> {
    let merged = merge_holes(outer.to_vec(), holes);
    ear_clip(&merged)
}

fn merge_holes(mut poly: Vec<P2>, holes: &[Vec<P2>]) -> Vec<P2> {
    let mut order: Vec<(usize, usize)> = holes
        .iter()
        .enumerate()
        .filter(|(_, h)| h.len() >= 3)
        .map(|(hi, h)| {
            let mi = (0..h.len())
                .max_by(|&a, &b| h[a][0].total_cmp(&h[b][0]))
                .unwrap_or(0);
            (hi, mi)
        })
        .collect();
    order.sort_by(|a, b| holes[b.0][b.1][0].total_cmp(&holes[a.0][a.1][0]));

    for (hi, mi) in order {
        let hole = &holes[hi];
        let m = hole[mi];
        let Some(pi) = bridge_vertex(&poly, m) else {
            continue;
        };
        let mut merged = Vec::with_capacity(poly.len() + hole.len() + 2);
        merged.extend_from_slice(&poly[..=pi]);
        merged.extend(hole[mi..].iter().chain(hole[..=mi].iter()).copied());
        merged.extend_from_slice(&poly[pi..]);
        poly = merged;
    }
    poly
}

/// Index of a polygon vertex visible from `m` (a hole's rightmost vertex).
fn bridge_vertex(poly: &[P2], m: P2) -> Option<usize> {
    let n = poly.len();
    let mut best_x = f64::INFINITY;
    let mut best = None;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if a[1] == b[1] || (a[1] - m[1]) * (b[1] - m[1]) > 0.0 {
            continue;
        }
        let t = (m[1] - a[1]) / (b[1] - a[1]);
        let x = a[0] + t * (b[0] - a[0]);
        if x >= m[0] && x < best_x {
            best_x = x;
            best = Some(if a[0] >= b[0] { i } else { (i + 1) % n });
        }
    }
    let pi = best?;
    let hit = [best_x, m[1]];
    let p = poly[pi];
    if p == hit {
        return Some(pi);
    }
    // Any vertex inside triangle (m, hit, p) blocks the view; take the one
    // closest in angle to the ray.
    let (t0, t1, t2) = if orient(m, hit, p) >= 0.0 {
        (m, hit, p)
    } else {
        (m, p, hit)
    };
    let mut chosen = pi;
    let mut best_key = (f64::INFINITY, f64::INFINITY);
    for (j, &v) in poly.iter().enumerate() {
        if j == pi || v == m {
            continue;
        }
        if orient(t0, t1, v) >= 0.0
            && orient(t1, t2, v) >= 0.0
            && orient(t2, t0, v) >= 0.0
            && v[0] >= m[0]
        {
            let dx = v[0] - m[0];
            let dy = v[1] - m[1];
            let key = (dy.atan2(dx).abs(), dx * dx + dy * dy);
            if key < best_key {
                best_key = key;
                chosen = j;
            }
        }
    }
    Some(chosen)
}

fn ear_clip(poly: &[P2]) -> Vec<[P2; 3]> {
    let n = poly.len();
    if n < 3 {
        return Vec::new();
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in poly {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let diag2 = (hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2);
    let eps = 1e-14 * diag2;

    let mut idx: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n.saturating_sub(2));
    let mut start = 0;
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for step in 0..m {
            let k = (start + step) % m;
            let (ia, ib, ic) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let (a, b, c) = (poly[ia], poly[ib], poly[ic]);
            if orient(a, b, c) <= eps {
                continue;
            }
            let blocked = idx.iter().any(|&j| {
                let p = poly[j];
                j != ia
                    && j != ib
                    && j != ic
                    && p != a
                    && p != b
                    && p != c
                    && orient(a, b, p) >= 0.0
                    && orient(b, c, p) >= 0.0
                    && orient(c, a, p) >= 0.0
            });
            if !blocked {
                out.push([a, b, c]);
                idx.remove(k);
                start = k % idx.len();
                clipped = true;
                break;
            }
        }
        if !clipped {
            // Drop a degenerate vertex if there is one, otherwise give up.
            let m = idx.len();
            let degenerate = (0..m).find(|&k| {
                let (a, b, c) = (
                    poly[idx[(k + m - 1) % m]],
                    poly[idx[k]],
                    poly[idx[(k + 1) % m]],
                );
                orient(a, b, c).abs() <= eps
            });
            match degenerate {
                Some(k) => {
                    idx.remove(k);
                }
                None => break,
            }
        }
    }
    if idx.len() == 3 {
        let (a, b, c) = (poly[idx[0]], poly[idx[1]], poly[idx[2]]);
        if orient(a, b, c) > eps {
            out.push([a, b, c]);
        }
    }
    out
}
