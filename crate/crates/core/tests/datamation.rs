use std::collections::HashSet;

use datamate_core::corpus::{bundled, desk_students, PipelineGenerator};
use datamate_core::datamation::layout::{bands, cell_rects, grid_in, layout_cells};
use datamate_core::datamation::{
    compile_actions, format_number, generate, layout_grid, layout_grouped, layout_pack, render_svg,
    ActionFamily, ActionKind, Anchor, Axis, Canvas, DatamationDoc, DatamationError, SCHEMA_JSON,
};
use datamate_core::{execute, parse, Dataset, Op};
use proptest::prelude::*;

const RUNNING: &str = "SELECT['students']; PROJECT['birth_year', #1]; FILTER[#2, 'birth_year' = 2000]; AGGREGATE[count, #3]";

fn doc(text: &str, data: &Dataset) -> DatamationDoc {
    generate(&parse(text).unwrap(), data).unwrap()
}

fn stage_kinds(d: &DatamationDoc) -> Vec<Vec<&'static str>> {
    d.stages
        .iter()
        .map(|s| s.actions.iter().map(|a| a.kind.name()).collect())
        .collect()
}

fn schema() -> jsonschema::JSONSchema {
    let v: serde_json::Value = serde_json::from_str(SCHEMA_JSON).unwrap();
    jsonschema::JSONSchema::compile(&v).unwrap()
}

fn assert_schema_valid(s: &jsonschema::JSONSchema, d: &DatamationDoc) {
    let inst: serde_json::Value = serde_json::from_str(&d.to_json()).unwrap();
    let msgs: Vec<String> = match s.validate(&inst) {
        Ok(()) => Vec::new(),
        Err(errs) => errs
            .map(|e| format!("{} at {}", e, e.instance_path))
            .collect(),
    };
    assert!(msgs.is_empty(), "{}: {:?}", d.pipeline, msgs);
}

/// Pairwise overlap, containment, constancy and highlight ordering checks.
fn check_invariants(d: &DatamationDoc) {
    assert_eq!(d.keyframes.len(), d.stages.len() + 1);
    let c = d.canvas;
    let ids0: Vec<u32> = d.keyframes[0].units.iter().map(|u| u.id).collect();
    for f in &d.keyframes {
        let ids: Vec<u32> = f.units.iter().map(|u| u.id).collect();
        assert_eq!(ids, ids0, "unit ids persist");
        let vis: Vec<_> = f.visible().collect();
        for u in &vis {
            assert!(
                u.x - u.radius >= -1e-6 && u.x + u.radius <= c.width + 1e-6,
                "{u:?}"
            );
            assert!(
                u.y - u.radius >= -1e-6 && u.y + u.radius <= c.height + 1e-6,
                "{u:?}"
            );
        }
        for (i, a) in vis.iter().enumerate() {
            for b in &vis[i + 1..] {
                let dist = (a.x - b.x).hypot(a.y - b.y);
                assert!(
                    dist >= a.radius + b.radius - 0.5,
                    "overlap {a:?} {b:?} in {}",
                    d.pipeline
                );
            }
        }
        for axis in [&f.axes.x, &f.axes.y].into_iter().flatten() {
            for w in axis.bands.windows(2) {
                assert!((w[0].end - w[1].start).abs() < 1e-9);
            }
        }
    }
    for (i, s) in d.stages.iter().enumerate() {
        if s.actions.iter().any(|a| a.kind == ActionKind::Highlight) {
            assert_eq!(d.stages[i + 1].kinds(), [ActionKind::Hide]);
        }
        for a in &s.actions {
            assert_eq!(a.family, a.kind.family());
        }
        assert!(s.duration_ms > 0);
    }
}

#[test]
fn running_example_stage_sequence() {
    let d = doc(RUNNING, &desk_students());
    assert_eq!(
        stage_kinds(&d),
        vec![
            vec!["select", "layout"],
            vec!["x-axis"],
            vec!["filter", "highlight"],
            vec!["hide"],
            vec!["aggregate", "annotate"],
        ]
    );
    assert_eq!(d.keyframes.len(), 6);
    let last = d.keyframes.last().unwrap();
    assert_eq!(last.annotations.len(), 1);
    assert_eq!(last.annotations[0].text, "2");
    assert_eq!(last.visible().count(), 2);
    assert_eq!(d.stages[0].caption, "select all 4 records from students");
    assert_eq!(
        d.stages[2].caption,
        "keep the students whose birth_year is 2000"
    );
    assert_eq!(
        d.stages[4].caption,
        "the total count of the following students is 2"
    );
    let durations: Vec<u32> = d.stages.iter().map(|s| s.duration_ms).collect();
    assert_eq!(durations, [1000, 1000, 1000, 400, 1000]);
    check_invariants(&d);
}

#[test]
fn running_example_frames_follow_the_story() {
    let d = doc(RUNNING, &desk_students());
    let f = &d.keyframes;
    // frame 0 is the grid with nothing shown yet
    assert!(f[0].units.iter().all(|u| u.opacity == 0.0));
    assert_eq!(
        f[0].units.iter().map(|u| (u.x, u.y)).collect::<Vec<_>>(),
        f[1].units.iter().map(|u| (u.x, u.y)).collect::<Vec<_>>()
    );
    // birth years become x bands in chronological order
    let x = f[2].axes.x.as_ref().unwrap();
    assert_eq!(x.column, "birth_year");
    assert_eq!(
        x.bands.iter().map(|b| b.label.as_str()).collect::<Vec<_>>(),
        ["1999", "2000", "2001"]
    );
    // Amy and Cal (rows 0 and 2) are highlighted, then the others fade in place
    let accent = d.accent;
    let lit: Vec<u32> = f[3]
        .units
        .iter()
        .filter(|u| u.color == accent)
        .map(|u| u.id)
        .collect();
    assert_eq!(lit, [0, 2]);
    for id in [1usize, 3] {
        assert_eq!(f[4].units[id].opacity, 0.0);
        assert_eq!(
            (f[4].units[id].x, f[4].units[id].y),
            (f[3].units[id].x, f[3].units[id].y)
        );
    }
}

#[test]
fn select_only_is_one_stage() {
    let d = doc("SELECT['students']", &desk_students());
    assert_eq!(stage_kinds(&d), vec![vec!["select", "layout"]]);
    assert_eq!(d.keyframes.len(), 2);
    assert!(d.keyframes[1].units.iter().all(|u| u.opacity == 1.0));
}

#[test]
fn empty_filter_hides_everything() {
    let d = doc(
        "SELECT['students']; FILTER[#1, 'birth_year' = 1990]; AGGREGATE[count, #2]",
        &desk_students(),
    );
    let hide = &d.stages[2].actions[0];
    assert_eq!(hide.kind, ActionKind::Hide);
    assert_eq!(hide.params.units.as_deref(), Some(&[0, 1, 2, 3][..]));
    let last = d.keyframes.last().unwrap();
    assert_eq!(last.visible().count(), 0);
    assert_eq!(last.annotations[0].text, "0");
    check_invariants(&d);
}

#[test]
fn numerical_projection_switches_to_packing() {
    let d = doc("SELECT['students']; PROJECT['id', #1]", &desk_students());
    assert_eq!(
        stage_kinds(&d),
        vec![vec!["select", "layout"], vec!["size"]]
    );
    let radii: Vec<f64> = d.keyframes[2].units.iter().map(|u| u.radius).collect();
    assert!(radii.windows(2).all(|w| w[0] < w[1]), "{radii:?}");
    check_invariants(&d);
}

#[test]
fn channel_policy_and_conflicts() {
    let s = desk_students();
    // categorical goes to x, then the next categorical to color
    let d = doc(
        "SELECT['students']; PROJECT['dept', #1]; PROJECT['name', #1]",
        &s,
    );
    assert_eq!(stage_kinds(&d)[1..], [vec!["x-axis"], vec!["color"]]);
    // temporal after a categorical on x falls back to y
    let d = doc(
        "SELECT['students']; PROJECT['dept', #1]; PROJECT['birth_year', #1]",
        &s,
    );
    assert_eq!(stage_kinds(&d)[2], vec!["y-axis"]);
    // a second numerical column has nowhere to go
    let v = bundled("vehicles").unwrap();
    let err = generate(
        &parse("SELECT['vehicles']; PROJECT['mpg', #1]; FILTER[#2, 'mpg' > 20]; PROJECT['horsepower', #3]; AGGREGATE[max, #4]")
            .unwrap(),
        &v,
    )
    .unwrap_err();
    assert!(
        matches!(err, DatamationError::ChannelConflict { step: 4, .. }),
        "{err:?}"
    );
}

#[test]
fn group_axis_follows_key_type() {
    let s = desk_students();
    let d = doc(
        "SELECT['students']; PROJECT['dept', #1]; GROUP[count, #1, #2]",
        &s,
    );
    // dept was bound to x by the projection, so the group reuses that axis
    assert_eq!(stage_kinds(&d)[2], vec!["x-axis", "annotate"]);
    let d = doc(
        "SELECT['students']; PROJECT['id', #1]; PROJECT['dept', #1]; GROUP[avg, #2, #3]",
        &s,
    );
    let last = d.keyframes.last().unwrap();
    let texts: Vec<(String, String)> = last
        .annotations
        .iter()
        .map(|a| match &a.anchor {
            Anchor::Group(k) => (k.clone(), a.text.clone()),
            other => panic!("{other:?}"),
        })
        .collect();
    assert_eq!(
        texts,
        [
            ("CS".into(), "2".into()),
            ("EE".into(), "2".into()),
            ("ME".into(), "4".into())
        ]
    );
    check_invariants(&d);
}

#[test]
fn mapping_fidelity_per_op() {
    use ActionFamily::*;
    let cases: [(Op, &str, &[ActionFamily]); 7] = [
        (Op::Select, "SELECT['students']", &[Data, Visual]),
        (
            Op::Project,
            "SELECT['students']; PROJECT['dept', #1]",
            &[Visual],
        ),
        (
            Op::Filter,
            "SELECT['students']; FILTER[#1, 'dept' = 'CS']",
            &[Data, Annotation],
        ),
        (
            Op::Superlative,
            "SELECT['students']; SUPERLATIVE[#1, 'id', max]",
            &[Data, Annotation],
        ),
        (
            Op::Aggregate,
            "SELECT['students']; AGGREGATE[count, #1]",
            &[Data, Annotation],
        ),
        (
            Op::Group,
            "SELECT['students']; PROJECT['dept', #1]; GROUP[count, #1, #2]",
            &[Visual, Annotation],
        ),
        (
            Op::Sort,
            "SELECT['students']; SORT[#1, 'id', desc]",
            &[Data],
        ),
    ];
    let s = desk_students();
    for (op, text, expected) in cases {
        let p = parse(text).unwrap();
        let t = execute(&p, &s).unwrap();
        let stages = compile_actions(&p, &t, s.schema()).unwrap();
        let last = p.len();
        let fams: HashSet<ActionFamily> = stages
            .iter()
            .filter(|st| st.source_step == last)
            .flat_map(|st| st.actions.iter().map(|a| a.family))
            .collect();
        assert_eq!(fams, expected.iter().copied().collect(), "{op}");
    }
}

#[test]
fn generation_is_deterministic() {
    let v = bundled("vehicles").unwrap();
    let text = "SELECT['vehicles']; PROJECT['mpg', #1]; PROJECT['origin', #1]; GROUP[avg, #2, #3]";
    assert_eq!(doc(text, &v).to_json(), doc(text, &v).to_json());
    let a = doc(RUNNING, &desk_students()).to_json();
    let b = doc(RUNNING, &desk_students()).to_json();
    assert_eq!(a, b);
}

#[test]
fn generated_docs_validate_and_keep_invariants() {
    let s = schema();
    for name in ["students", "vehicles", "flights"] {
        let data = bundled(name).unwrap();
        let mut gen = PipelineGenerator::new(&data, 3, 5);
        let mut made = 0;
        for _ in 0..60 {
            let p = gen.next_pipeline();
            match generate(&p, &data) {
                Ok(d) => {
                    assert_schema_valid(&s, &d);
                    check_invariants(&d);
                    made += 1;
                }
                Err(DatamationError::ChannelConflict { .. } | DatamationError::Exec(_)) => {}
                Err(e) => panic!("{e}"),
            }
        }
        assert!(made >= 30, "{name}: {made}");
    }
}

#[test]
fn svg_frames_render() {
    let d = doc(RUNNING, &desk_students());
    let svg = render_svg(&d, 5).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<circle").count(), 2);
    assert!(svg.contains(">2</text>"));
    assert!(render_svg(&d, 6).is_none());
}

#[test]
fn grid_examples() {
    let c = Canvas::default();
    let one = layout_grid(1, &c, 10.0);
    assert_eq!((one.positions[0].x, one.positions[0].y), (400.0, 250.0));
    let ten = layout_grid(10, &c, 10.0);
    // 4 columns at pitch 25 => first column at 400 - 47.5 + 10
    let cols: Vec<f64> = ten.positions[..4].iter().map(|p| p.x).collect();
    assert_eq!(cols, [362.5, 387.5, 412.5, 437.5]);
    assert_eq!(ten.positions[8].x, 362.5);
    assert_eq!(ten.positions[9].x, 387.5);
    // rows at 250 - 35 + 10 + 25k
    assert_eq!(ten.positions[0].y, 225.0);
    assert_eq!(ten.positions[9].y, 275.0);
    // a thousand units still fit by shrinking
    let many = layout_grid(1000, &c, 10.0);
    assert!(many.radius < 10.0);
    for p in &many.positions {
        assert!(
            p.x - many.radius >= c.padding - 1e-9
                && p.x + many.radius <= c.width - c.padding + 1e-9
        );
        assert!(
            p.y - many.radius >= c.padding - 1e-9
                && p.y + many.radius <= c.height - c.padding + 1e-9
        );
    }
}

#[test]
fn grouped_bands() {
    let c = Canvas::default();
    let g = layout_grouped(
        &[
            ("CS".into(), vec![1, 3]),
            ("EE".into(), vec![2]),
            ("ME".into(), vec![4]),
        ],
        Axis::X,
        &c,
        10.0,
    );
    assert_eq!(g.x_bands.len(), 3);
    assert_eq!(g.x_bands[0].start, c.padding);
    assert_eq!(g.x_bands[2].end, c.width - c.padding);
    for (id, p) in &g.positions {
        let band = match id {
            1 | 3 => &g.x_bands[0],
            2 => &g.x_bands[1],
            _ => &g.x_bands[2],
        };
        assert!(p.x > band.start && p.x < band.end);
    }
    // CS holds a one-row grid of two
    let cs: Vec<_> = g
        .positions
        .iter()
        .filter(|(i, _)| *i == 1 || *i == 3)
        .map(|(_, p)| *p)
        .collect();
    assert_eq!(cs[0].y, cs[1].y);
    assert!((cs[1].x - cs[0].x - 2.5 * g.radius).abs() < 1e-9);

    // one group is a plain grid inside its band
    let single = layout_grouped(&[("all".into(), (0..9).collect())], Axis::Y, &c, 10.0);
    let (_, _, cells) = cell_rects(None, Some(&["all".to_string()]), &c);
    let plain = grid_in(9, cells[0], 10.0);
    let got: Vec<_> = single.positions.iter().map(|(_, p)| *p).collect();
    assert_eq!(got, plain.positions);

    // two keys on each axis make four cells
    let labels = ["a".to_string(), "b".to_string()];
    let (xb, yb, cells) = cell_rects(Some(&labels), Some(&labels), &c);
    assert_eq!((xb.len(), yb.len(), cells.len()), (2, 2, 4));
    let (pos, _) = layout_cells(&[0, 1, 2, 3], &|u| u as usize, &cells, 10.0);
    for (u, p) in pos {
        let r = cells[u as usize];
        assert!(p.x > r.x0 && p.x < r.x1 && p.y > r.y0 && p.y < r.y1);
    }
    let b = bands(&vec!["x".to_string(); 7], 20.0, 780.0);
    let widths: Vec<f64> = b.iter().map(|b| b.end - b.start).collect();
    assert!(widths.iter().all(|w| (w - widths[0]).abs() < 1.0));
}

#[test]
fn caption_numbers() {
    assert_eq!(format_number(1234.5678), "1,234.57");
    assert_eq!(format_number(0.5), "0.5");
}

fn no_overlaps(pos: &[datamate_core::datamation::Point], radii: &[f64]) -> bool {
    for i in 0..pos.len() {
        for j in i + 1..pos.len() {
            let d = (pos[i].x - pos[j].x).hypot(pos[i].y - pos[j].y);
            if d < radii[i] + radii[j] - 0.5 {
                return false;
            }
        }
    }
    true
}

#[test]
fn pack_examples() {
    let c = Canvas::default();
    let (p, _) = layout_pack(&[7.0], &[0], &c);
    assert_eq!((p[0].x, p[0].y), (400.0, 250.0));
    let (p, r) = layout_pack(&[3.0, 3.0], &[0, 1], &c);
    assert!(((p[0].x - p[1].x).hypot(p[0].y - p[1].y) - 6.0).abs() < 1e-6);
    assert_eq!(r, [3.0, 3.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn packed_circles_never_overlap(radii in prop::collection::vec(1.0f64..20.0, 1..40)) {
        let ids: Vec<u32> = (0..radii.len() as u32).collect();
        let c = Canvas::default();
        let (pos, r) = layout_pack(&radii, &ids, &c);
        prop_assert!(no_overlaps(&pos, &r));
        for (p, r) in pos.iter().zip(&r) {
            prop_assert!(p.x - r >= c.padding - 1e-6 && p.x + r <= c.width - c.padding + 1e-6);
            prop_assert!(p.y - r >= c.padding - 1e-6 && p.y + r <= c.height - c.padding + 1e-6);
        }
    }
}
