use cadreward::judge::{
    build_binary_dataset, build_paired_dataset, judge_text, CjmConfig, JudgeItem, PairGroup,
};
use cadreward::metrics::f1_primitives;
use cadreward::seq::{
    BooleanOp, CadSequence, Curve, ExtrudeOp, Loop, QuantLevel, Sketch, SketchPlane, GOLDEN_SQUARE,
};
use proptest::prelude::*;

const PLATE: &str = "SKETCH\nLOOP 0 0\nLINE 255 0\nLINE 255 255\nLINE 0 255\nLINE 0 0\nENDLOOP\nENDSKETCH\nEXTRUDE 0 128 128 128 0 0 0 40 0 255 NEW\nEND\n";
const BAR: &str = "SKETCH\nLOOP 0 96\nLINE 255 96\nLINE 255 160\nLINE 0 160\nLINE 0 96\nENDLOOP\nENDSKETCH\nEXTRUDE 0 128 128 128 0 0 0 255 255 255 NEW\nEND\n";
const CYLINDER: &str = "SKETCH\nLOOP 128 128\nCIRCLE 128 128 255\nENDLOOP\nENDSKETCH\nEXTRUDE 0 128 128 128 0 0 0 255 255 255 NEW\nEND\n";
const BROKEN: &str = "SKETCH\nLOOP 0 0\n";

fn cfg() -> CjmConfig {
    CjmConfig {
        n_points: 256,
        ..CjmConfig::default()
    }
}

#[test]
fn paired_records_match_a_full_sort() {
    let candidates = [PLATE, GOLDEN_SQUARE, BROKEN, BAR, CYLINDER];
    let gt = GOLDEN_SQUARE;
    let cfg = cfg();
    // Oracle: sort every candidate by (fails to compile, Chamfer) and take both ends.
    let mut keyed: Vec<(bool, f64, usize)> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let v = judge_text(c, gt, &cfg).unwrap();
            (!v.compiled, v.chamfer.unwrap_or(f64::INFINITY), i)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (best, worst) = (keyed[0].2, keyed[keyed.len() - 1].2);
    assert_eq!(candidates[best], GOLDEN_SQUARE);
    assert_eq!(candidates[worst], BROKEN);

    let group = PairGroup {
        prompt: "p".into(),
        candidates: candidates.iter().map(|c| c.to_string()).collect(),
        gt: gt.into(),
    };
    let records = build_paired_dataset(&[group], &cfg).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].chosen.trim(), candidates[best].trim());
    assert_eq!(records[0].rejected.trim(), candidates[worst].trim());
    assert_eq!(records[0].cd_chosen, 0.0);
    assert_eq!(records[0].cd_rejected, None);
}

#[test]
fn desirable_count_grows_with_threshold() {
    let items: Vec<JudgeItem> = [GOLDEN_SQUARE, PLATE, BAR, CYLINDER, BROKEN]
        .iter()
        .map(|p| JudgeItem {
            prompt: "p".into(),
            pred: p.to_string(),
            gt: GOLDEN_SQUARE.into(),
        })
        .collect();
    let mut last = 0;
    for tau in [1e-6, 0.01, 0.05, 0.2, 1.0, 10.0] {
        let cfg = CjmConfig {
            cd_threshold: tau,
            alpha: 1.0,
            ..cfg()
        };
        let records = build_binary_dataset(&items, &cfg).unwrap();
        assert_eq!(records.len(), items.len());
        let n = records.iter().filter(|r| r.label).count();
        assert!(n >= last, "tau {tau}: {n} < {last}");
        for r in &records {
            assert_eq!(r.label, r.chamfer.is_some_and(|c| c < tau));
        }
        last = n;
    }
    assert_eq!(last, 4);
}

type Seg = [i32; 4];

fn segments(seq: &CadSequence) -> Vec<Seg> {
    let lv = |q: QuantLevel| i32::from(q.get());
    let mut out = Vec::new();
    for sk in &seq.sketches {
        for lp in &sk.loops {
            let mut prev = lp.start;
            for c in &lp.curves {
                if let Curve::Line { end } = *c {
                    out.push([lv(prev[0]), lv(prev[1]), lv(end[0]), lv(end[1])]);
                    prev = end;
                }
            }
        }
    }
    out
}

/// Maximum one-to-one matching by exhaustive search.
fn optimal_matches(pred: &[Seg], gt: &[Seg], tol: i32, used: &mut Vec<bool>) -> usize {
    let Some((first, rest)) = pred.split_first() else {
        return 0;
    };
    let mut best = optimal_matches(rest, gt, tol, used);
    for j in 0..gt.len() {
        if !used[j] && first.iter().zip(&gt[j]).all(|(a, b)| (a - b).abs() <= tol) {
            used[j] = true;
            best = best.max(1 + optimal_matches(rest, gt, tol, used));
            used[j] = false;
        }
    }
    best
}

fn polygon_seq(points: &[(u8, u8)]) -> CadSequence {
    let q = QuantLevel::new;
    let start = [q(points[0].0), q(points[0].1)];
    let mut curves: Vec<Curve> = points[1..]
        .iter()
        .map(|&(x, y)| Curve::Line { end: [q(x), q(y)] })
        .collect();
    curves.push(Curve::Line { end: start });
    CadSequence {
        sketches: vec![Sketch {
            loops: vec![Loop { start, curves }],
        }],
        extrudes: vec![ExtrudeOp {
            sketch_index: 0,
            plane: SketchPlane {
                origin: [q(128); 3],
                orientation: [q(0); 3],
            },
            extent_pos: q(255),
            extent_neg: q(0),
            sketch_scale: q(255),
            boolean: BooleanOp::NewBody,
        }],
        terminated: true,
    }
}

proptest! {
    #[test]
    fn greedy_matching_never_beats_optimal(
        gt in prop::collection::vec((0u8..12, 0u8..12), 2..6),
        jitter in prop::collection::vec((0u8..8, 0u8..8), 2..6),
    ) {
        // Coordinates in a small range so many pairs are admissible at once.
        let pred_pts: Vec<(u8, u8)> = jitter.iter().zip(gt.iter().cycle()).map(|(j, g)| (g.0 + j.0, g.1 + j.1)).collect();
        let (pred, gt) = (polygon_seq(&pred_pts), polygon_seq(&gt));
        let (ps, gs) = (segments(&pred), segments(&gt));
        let f1 = f1_primitives(&pred, &gt, 3).line;
        let greedy_tp = (f1 * (ps.len() + gs.len()) as f64 / 2.0).round() as usize;
        let opt = optimal_matches(&ps, &gs, 3, &mut vec![false; gs.len()]);
        prop_assert!(greedy_tp <= opt, "greedy {greedy_tp} > optimal {opt}");
        prop_assert!((0.0..=1.0).contains(&f1));
        prop_assert_eq!(f1_primitives(&gt, &gt, 3).line, 1.0);
    }
}
