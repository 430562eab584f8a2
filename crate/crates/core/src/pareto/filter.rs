//! Dominance filtering and the Pareto-relevant arc of the convex hull in the
//! (TP, GEE) plane.

/// Relative tolerance under which two coordinates count as tied.
pub const TIE_TOL: f64 = 1e-9;

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL * a.abs().max(b.abs())
}

fn at_least(a: f64, b: f64) -> bool {
    a >= b || tied(a, b)
}

/// True when `(gee_a, tp_a)` weakly dominates `(gee_b, tp_b)` and the two are
/// not tied in both coordinates.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    at_least(a.0, b.0) && at_least(a.1, b.1) && !(tied(a.0, b.0) && tied(a.1, b.1))
}

/// Indices of the nondominated `(gee, tp)` pairs, ordered by ascending TP.
/// Of several tied points only the first in input order survives.
pub fn pareto_filter_indices(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len())
        .filter(|&i| points[i].0.is_finite() && points[i].1.is_finite())
        .collect();
    order.sort_by(|&a, &b| {
        points[b]
            .1
            .total_cmp(&points[a].1)
            .then(points[b].0.total_cmp(&points[a].0))
            .then(a.cmp(&b))
    });
    // Sweep by descending TP: a point survives if its GEE beats everything
    // with at least its TP.
    let mut kept: Vec<usize> = Vec::new();
    let mut best_gee = f64::NEG_INFINITY;
    for &i in &order {
        let g = points[i].0;
        if let Some(last) = kept.last_mut() {
            if tied(points[*last].0, g) && tied(points[*last].1, points[i].1) {
                *last = (*last).min(i);
                best_gee = best_gee.max(g);
                continue;
            }
        }
        if best_gee == f64::NEG_INFINITY || !at_least(best_gee, g) {
            kept.push(i);
        }
        best_gee = best_gee.max(g);
    }
    // Tolerant ties in TP can hide dominance across the sweep order.
    let survivors: Vec<usize> = kept
        .iter()
        .enumerate()
        .filter(|&(pos, &i)| {
            let beaten_by = |&j: &usize| j != i && dominates(points[j], points[i]);
            let tp_close = |&&j: &&usize| at_least(points[j].1, points[i].1);
            !kept[..pos].iter().any(|j| beaten_by(j)) && !kept[pos + 1..].iter().take_while(tp_close).any(beaten_by)
        })
        .map(|(_, &i)| i)
        .collect();
    survivors.into_iter().rev().collect()
}

/// Vertices of the upper convex hull between the maximum-GEE and the
/// maximum-TP point, as indices ordered by ascending TP. Collinear interior
/// points are dropped.
pub fn convex_hull_upper_indices(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len())
        .filter(|&i| points[i].0.is_finite() && points[i].1.is_finite())
        .collect();
    order.sort_by(|&a, &b| {
        points[a]
            .1
            .total_cmp(&points[b].1)
            .then(points[a].0.total_cmp(&points[b].0))
            .then(a.cmp(&b))
    });
    order.dedup_by(|a, b| points[*a] == points[*b]);
    // x = tp, y = gee
    let cross = |o: usize, a: usize, b: usize| {
        let (oy, ox) = points[o];
        let (ay, ax) = points[a];
        let (by, bx) = points[b];
        (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)
    };
    let mut hull: Vec<usize> = Vec::new();
    for &i in &order {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], i) >= 0.0 {
            hull.pop();
        }
        hull.push(i);
    }
    // keep the arc from the (rightmost) maximum-GEE vertex onward
    let mut start = 0;
    for (pos, &i) in hull.iter().enumerate() {
        if points[i].0 >= points[hull[start]].0 {
            start = pos;
        }
    }
    hull.split_off(start)
}

/// Euclidean distance from `p` to the polyline through `hull`, after scaling
/// GEE by `scale.0` and TP by `scale.1`.
pub fn distance_to_polyline(hull: &[(f64, f64)], p: (f64, f64), scale: (f64, f64)) -> f64 {
    let norm = |q: (f64, f64)| (q.0 / scale.0, q.1 / scale.1);
    let p = norm(p);
    match hull {
        [] => f64::INFINITY,
        [only] => {
            let q = norm(*only);
            (p.0 - q.0).hypot(p.1 - q.1)
        }
        _ => hull
            .windows(2)
            .map(|w| {
                let a = norm(w[0]);
                let b = norm(w[1]);
                let d = (b.0 - a.0, b.1 - a.1);
                let len2 = d.0 * d.0 + d.1 * d.1;
                let s = if len2 > 0.0 {
                    (((p.0 - a.0) * d.0 + (p.1 - a.1) * d.1) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                (p.0 - a.0 - s * d.0).hypot(p.1 - a.1 - s * d.1)
            })
            .fold(f64::INFINITY, f64::min),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force_filter(points: &[(f64, f64)]) -> Vec<usize> {
        let mut out: Vec<usize> = (0..points.len())
            .filter(|&i| {
                !(0..points.len()).any(|j| {
                    j != i
                        && (dominates(points[j], points[i])
                            || (j < i && tied(points[j].0, points[i].0) && tied(points[j].1, points[i].1)))
                })
            })
            .collect();
        out.sort_by(|&a, &b| points[a].1.total_cmp(&points[b].1));
        out
    }

    #[test]
    fn small_cases() {
        assert_eq!(pareto_filter_indices(&[(1.0, 1.0), (2.0, 2.0)]), vec![1]);
        assert_eq!(pareto_filter_indices(&[(1.0, 2.0), (2.0, 1.0)]), vec![1, 0]);
        assert_eq!(pareto_filter_indices(&[(1.0, 2.0), (1.0, 2.0)]), vec![0]);
        assert_eq!(pareto_filter_indices(&[(1.0, 2.0), (1.0 + 1e-12, 2.0)]), vec![0]);
        // equal TP, higher GEE wins
        assert_eq!(pareto_filter_indices(&[(1.0, 2.0), (3.0, 2.0)]), vec![1]);
        // TP tie within tolerance and higher GEE
        assert_eq!(pareto_filter_indices(&[(1.0, 1.0), (2.0, 1.0 - 1e-12)]), vec![1]);
        assert!(pareto_filter_indices(&[]).is_empty());
    }

    #[test]
    fn hull_small_cases() {
        // (gee, tp) on a line: endpoints only
        let line = [(3.0, 1.0), (2.0, 2.0), (1.0, 3.0)];
        assert_eq!(convex_hull_upper_indices(&line), vec![0, 2]);
        assert_eq!(convex_hull_upper_indices(&[(5.0, 4.0)]), vec![0]);
        let dented = [(3.0, 1.0), (1.5, 2.0), (1.0, 3.0), (0.5, 0.5)];
        assert_eq!(convex_hull_upper_indices(&dented), vec![0, 2]);
        let bulged = [(3.0, 1.0), (2.5, 2.5), (1.0, 3.0)];
        assert_eq!(convex_hull_upper_indices(&bulged), vec![0, 1, 2]);
    }

    #[test]
    fn polyline_distance() {
        let hull = [(1.0, 0.0), (0.0, 1.0)];
        let d = distance_to_polyline(&hull, (1.0, 1.0), (1.0, 1.0));
        assert!((d - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(distance_to_polyline(&hull, (0.5, 0.5), (1.0, 1.0)), 0.0);
        assert_eq!(distance_to_polyline(&hull, (0.0, 3.0), (1.0, 2.0)), 1.0);
    }

    fn cloud() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.0f64..100.0, 0.0f64..100.0), 1..100)
    }

    fn lattice() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0u8..6, 0u8..6).prop_map(|(g, t)| (g as f64, t as f64)), 1..40)
    }

    proptest! {
        #[test]
        fn filter_matches_brute_force(points in cloud()) {
            prop_assert_eq!(pareto_filter_indices(&points), brute_force_filter(&points));
        }

        #[test]
        fn filter_matches_brute_force_with_ties(points in lattice()) {
            prop_assert_eq!(pareto_filter_indices(&points), brute_force_filter(&points));
        }

        #[test]
        fn filter_is_idempotent_and_monotone(points in cloud()) {
            let kept: Vec<(f64, f64)> = pareto_filter_indices(&points).into_iter().map(|i| points[i]).collect();
            let again: Vec<(f64, f64)> = pareto_filter_indices(&kept).into_iter().map(|i| kept[i]).collect();
            prop_assert_eq!(&kept, &again);
            for w in kept.windows(2) {
                prop_assert!(w[0].1 < w[1].1 && w[0].0 > w[1].0);
            }
        }

        #[test]
        fn hull_contains_every_point(points in cloud()) {
            let hull = convex_hull_upper_indices(&points);
            prop_assert!(!hull.is_empty());
            for w in hull.windows(2) {
                let (ay, ax) = points[w[0]];
                let (by, bx) = points[w[1]];
                prop_assert!(bx > ax && by < ay);
                for &(py, px) in &points {
                    let c = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
                    prop_assert!(c <= 1e-12 * (1.0 + (bx - ax).abs() * 100.0), "point above edge: {}", c);
                }
            }
            let max_gee = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            let max_tp = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(points[hull[0]].0, max_gee);
            prop_assert_eq!(points[*hull.last().unwrap()].1, max_tp);
            // hull vertices are nondominated
            let front = pareto_filter_indices(&points);
            for i in &hull {
                prop_assert!(front.iter().any(|j| points[*j] == points[*i]));
            }
        }
    }
}
