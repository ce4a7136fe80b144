//! Pipeline invariants on the synthetic fixtures.

use hcocluster::hierarchy::encoding_to_cut;
use hcocluster::metrics::labels_within;
use hcocluster::pipeline::{multiresolution, prepare, video_segment, Schedule};
use hcocluster::synth::{fixture_config, static_sequence, two_rectangles};

#[test]
fn labelings_are_tree_cuts_and_objectives_match() {
    let seq = two_rectangles(1).unwrap();
    let config = fixture_config();
    let refs: Vec<_> = seq.frames.iter().collect();
    let prepared = prepare(&refs, &config).unwrap();
    let vars = &prepared.vars;
    let schedule = Schedule::linear(4, 0.40, 0.10, 0.1).unwrap();
    let levels = multiresolution(&seq.frames, &schedule, &config).unwrap();
    let mut solved = 0;
    for s in levels.iter().filter_map(|o| o.solution()) {
        solved += 1;
        for (i, frame) in seq.frames.iter().enumerate() {
            let intra: Vec<u8> = vars
                .intra(i)
                .map(|id| {
                    let v = vars.var(id);
                    u8::from(s.clusters[i][v.a.region] != s.clusters[i][v.b.region])
                })
                .collect();
            assert!(encoding_to_cut(&frame.hierarchy, vars, i, &intra).unwrap().is_ok());
        }
        let recomputed: f64 = s
            .assignment
            .iter()
            .zip(prepared.affinity.coefficients())
            .map(|(&b, q)| b as f64 * q)
            .sum();
        assert!((recomputed - s.objective).abs() <= 1e-9 * (1.0 + recomputed.abs()));
    }
    assert!(solved > 0);
}

#[test]
fn static_video_keeps_objects_fixed() {
    let seq = static_sequence(5, 3).unwrap();
    let schedule = Schedule::linear(3, 0.40, 0.20, 0.1).unwrap();
    let bundle = video_segment(&seq.frames, &schedule, &fixture_config()).unwrap();
    let mut solved = 0;
    for r in 0..schedule.len() {
        let Some(labels) = (0..3).map(|f| bundle.pixel_labels(f, r)).collect::<Option<Vec<_>>>() else {
            continue;
        };
        solved += 1;
        let mask = &seq.objects[0][0];
        let ids = labels_within(&labels[0], mask);
        let pixels = |l: &[u32]| -> Vec<bool> { l.iter().map(|x| ids.contains(x)).collect() };
        for l in &labels[1..] {
            assert_eq!(labels_within(l, mask), ids);
            assert_eq!(pixels(l), pixels(&labels[0]));
        }
    }
    assert!(solved > 0);
}
