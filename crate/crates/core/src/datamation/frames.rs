//! Replays compiled stages over the unit layout and records key frames.

use std::collections::HashMap;

use super::caption::format_value;
use super::compile::{channel_slot, AnnotationPlan, Compiled};
use super::layout::{bounds, cell_rects, layout_cells, pack_raw, place, Band, Rect};
use super::{
    ActionKind, Anchor, Annotation, Axes, AxisBands, DatamationOptions, KeyFrame, Unit, ACCENT,
};
use crate::model::{ColumnType, Dataset, RowId, Value};

/// Hashable identity of a value for band and color lookups.
fn value_key(v: &Value) -> String {
    format!("{v:?}")
}

struct Sim<'a> {
    dataset: &'a Dataset,
    table: usize,
    opts: &'a DatamationOptions,
    units: Vec<Unit>,
    base_color: Vec<u8>,
    channels: [Option<usize>; 4],
    visible: Vec<u32>,
    axes: Axes,
}

impl Sim<'_> {
    fn cell(&self, id: u32, column: usize) -> &Value {
        self.dataset.cell(self.table, RowId(id), column)
    }

    fn column_name(&self, column: usize) -> String {
        self.dataset.schema().table(self.table).columns[column]
            .name
            .clone()
    }

    /// Distinct values of `column` among visible units in band order:
    /// first appearance for categorical columns, ascending otherwise, with
    /// null last.
    fn band_keys(&self, column: usize) -> Vec<Value> {
        let mut seen = HashMap::new();
        let mut keys = Vec::new();
        for &u in &self.visible {
            let v = self.cell(u, column);
            if seen.insert(value_key(v), ()).is_none() {
                keys.push(v.clone());
            }
        }
        let kind = self.dataset.schema().table(self.table).columns[column].kind;
        if kind != ColumnType::Categorical {
            keys.sort_by(|a, b| a.total_cmp(b));
        }
        let (mut keys, nulls): (Vec<_>, Vec<_>) = keys.into_iter().partition(|v| !v.is_null());
        keys.extend(nulls);
        keys
    }

    fn axis_spec(&self, slot: usize) -> Option<(usize, Vec<String>, HashMap<String, usize>)> {
        let column = self.channels[slot]?;
        let keys = self.band_keys(column);
        let index = keys
            .iter()
            .enumerate()
            .map(|(i, k)| (value_key(k), i))
            .collect();
        let labels = keys.iter().map(format_value).collect();
        Some((column, labels, index))
    }

    fn bind_color(&mut self, column: usize) {
        let mut index: HashMap<String, u8> = HashMap::new();
        for (i, row) in self.dataset.rows(self.table).iter().enumerate() {
            let key = value_key(&row[column]);
            let next = (index.len() % 8) as u8;
            let c = *index.entry(key).or_insert(next);
            self.base_color[i] = c;
        }
    }

    fn size_radii(&self, column: usize, ids: &[u32], area: Rect) -> Vec<f64> {
        let vals: Vec<Option<f64>> = ids.iter().map(|&u| self.cell(u, column).as_f64()).collect();
        let (lo, hi) = vals
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                (l.min(v), h.max(v))
            });
        let n = ids.len().max(1) as f64;
        let base = (self.opts.unit_radius * 1.6)
            .min((0.3 * area.width() * area.height() / (n * std::f64::consts::PI)).sqrt());
        vals.iter()
            .map(|v| match v {
                None => base * 0.45,
                Some(_) if hi <= lo => base * 0.9,
                Some(v) => base * (0.45 + 0.9 * ((v - lo) / (hi - lo)).sqrt()),
            })
            .collect()
    }

    fn relayout(&mut self) {
        let x = self.axis_spec(channel_slot(ActionKind::XAxis));
        let y = self.axis_spec(channel_slot(ActionKind::YAxis));
        let (x_bands, y_bands, cells) = cell_rects(
            x.as_ref().map(|(_, l, _)| l.as_slice()),
            y.as_ref().map(|(_, l, _)| l.as_slice()),
            &self.opts.canvas,
        );
        let nx = x_bands.len().max(1);
        let band = |spec: &Option<(usize, Vec<String>, HashMap<String, usize>)>, u: u32| {
            spec.as_ref()
                .map(|(c, _, idx)| idx[&value_key(self.cell(u, *c))])
                .unwrap_or(0)
        };
        let cell_of = |u: u32| band(&y, u) * nx + band(&x, u);
        let mut placed: Vec<(u32, f64, f64, f64)> = Vec::new();
        match self.channels[channel_slot(ActionKind::Size)] {
            None => {
                let (pos, r) = layout_cells(&self.visible, &cell_of, &cells, self.opts.unit_radius);
                placed.extend(pos.into_iter().map(|(u, p)| (u, p.x, p.y, r)));
            }
            Some(size_col) => {
                let mut members: Vec<Vec<u32>> = vec![Vec::new(); cells.len()];
                for &u in &self.visible {
                    members[cell_of(u)].push(u);
                }
                let area = cells.iter().map(|c| c.width() * c.height()).sum::<f64>();
                let whole = Rect {
                    x0: 0.0,
                    y0: 0.0,
                    x1: area.sqrt(),
                    y1: area.sqrt(),
                };
                let mut packs = Vec::new();
                let mut scale = 1.0f64;
                for (m, rect) in members.iter().zip(&cells) {
                    if m.is_empty() {
                        continue;
                    }
                    let radii = self.size_radii(size_col, m, whole);
                    let pos = pack_raw(&radii, m);
                    let b = bounds(&pos, &radii);
                    scale = scale
                        .min(rect.width() / b.width())
                        .min(rect.height() / b.height());
                    packs.push((m, *rect, pos, radii, b));
                }
                for (m, rect, pos, radii, b) in packs {
                    let (pos, radii) = place(&pos, &radii, b, rect, scale);
                    for ((u, p), r) in m.iter().zip(pos).zip(radii) {
                        placed.push((*u, p.x, p.y, r));
                    }
                }
            }
        }
        for (u, x, y, r) in placed {
            let unit = &mut self.units[u as usize];
            unit.x = x;
            unit.y = y;
            unit.radius = r;
        }
        let axis = |spec: Option<(usize, Vec<String>, HashMap<String, usize>)>,
                    bands: Vec<Band>| {
            spec.map(|(c, _, _)| AxisBands {
                column: self.column_name(c),
                bands,
            })
        };
        self.axes = Axes {
            x: axis(x, x_bands),
            y: axis(y, y_bands),
        };
    }

    fn annotate(&self, plan: &AnnotationPlan) -> Vec<Annotation> {
        let canvas = self.opts.canvas;
        let top_of = |ids: &mut dyn Iterator<Item = u32>| {
            ids.map(|u| &self.units[u as usize]).fold(
                None,
                |acc: Option<(f64, f64, f64, f64)>, u| {
                    let (x0, y0, x1, y1) = acc.unwrap_or((
                        f64::INFINITY,
                        f64::INFINITY,
                        f64::NEG_INFINITY,
                        f64::NEG_INFINITY,
                    ));
                    Some((
                        x0.min(u.x - u.radius),
                        y0.min(u.y - u.radius),
                        x1.max(u.x + u.radius),
                        y1.max(u.y + u.radius),
                    ))
                },
            )
        };
        match plan {
            AnnotationPlan::Scalar { text, units } => {
                let (x, y) = match top_of(&mut units.iter().copied()) {
                    Some((x0, y0, x1, _)) => {
                        ((x0 + x1) / 2.0, (y0 - 14.0).max(canvas.padding + 10.0))
                    }
                    None => (canvas.width / 2.0, canvas.height / 2.0),
                };
                vec![Annotation {
                    anchor: Anchor::Units(units.clone()),
                    text: text.clone(),
                    x,
                    y,
                }]
            }
            AnnotationPlan::Groups { axis, items } => {
                let bands = match axis {
                    ActionKind::XAxis => self.axes.x.as_ref(),
                    _ => self.axes.y.as_ref(),
                };
                let column = self.channels[channel_slot(*axis)];
                items
                    .iter()
                    .map(|g| {
                        let band = bands.and_then(|b| b.bands.iter().find(|b| b.label == g.key));
                        let mut members = self.visible.iter().copied().filter(|&u| {
                            column.is_some_and(|c| format_value(self.cell(u, c)) == g.key)
                        });
                        let extent = top_of(&mut members);
                        let mid = band.map(|b| (b.start + b.end) / 2.0);
                        let (x, y) = match (axis, extent) {
                            (ActionKind::XAxis, Some((_, y0, _, _))) => (
                                mid.unwrap_or(canvas.width / 2.0),
                                (y0 - 12.0).max(canvas.padding + 10.0),
                            ),
                            (_, Some((_, _, x1, _))) => (
                                (x1 + 16.0).min(canvas.width - canvas.padding),
                                mid.unwrap_or(canvas.height / 2.0),
                            ),
                            (_, None) => (canvas.width / 2.0, canvas.height / 2.0),
                        };
                        Annotation {
                            anchor: Anchor::Group(g.key.clone()),
                            text: g.text.clone(),
                            x,
                            y,
                        }
                    })
                    .collect()
            }
        }
    }
}

pub(crate) fn simulate(c: &Compiled, dataset: &Dataset, opts: &DatamationOptions) -> Vec<KeyFrame> {
    let n = dataset.row_count(c.table);
    let center = opts.canvas.inner().center();
    let mut sim = Sim {
        dataset,
        table: c.table,
        opts,
        units: (0..n as u32)
            .map(|id| Unit {
                id,
                x: center.x,
                y: center.y,
                radius: opts.unit_radius,
                color: 0,
                opacity: 0.0,
            })
            .collect(),
        base_color: vec![0; n],
        channels: [None; 4],
        visible: Vec::new(),
        axes: Axes::default(),
    };
    let mut frames = Vec::with_capacity(c.stages.len() + 1);
    for (i, (stage, plan)) in c.stages.iter().zip(&c.plans).enumerate() {
        if let Some((ch, column)) = plan.bind {
            for slot in sim.channels.iter_mut() {
                if *slot == Some(column) {
                    *slot = None;
                }
            }
            sim.channels[channel_slot(ch)] = Some(column);
            if ch == ActionKind::Color {
                sim.bind_color(column);
            }
        }
        sim.visible = plan.visible.clone();
        if plan.relayout {
            sim.relayout();
        }
        let shown: std::collections::HashSet<u32> = plan.visible.iter().copied().collect();
        for u in sim.units.iter_mut() {
            u.opacity = if shown.contains(&u.id) { 1.0 } else { 0.0 };
            u.color = sim.base_color[u.id as usize];
        }
        for &h in &plan.highlight {
            sim.units[h as usize].color = ACCENT;
        }
        let annotations = plan
            .annotation
            .as_ref()
            .map(|a| sim.annotate(a))
            .unwrap_or_default();
        let frame = KeyFrame {
            units: sim.units.clone(),
            axes: sim.axes.clone(),
            annotations,
            caption: stage.caption.clone(),
        };
        if i == 0 {
            // the opening frame: post-SELECT geometry, nothing shown yet
            let mut empty = frame.clone();
            empty.units.iter_mut().for_each(|u| u.opacity = 0.0);
            empty.annotations.clear();
            empty.axes = Axes::default();
            empty.caption = String::new();
            frames.push(empty);
        }
        frames.push(frame);
    }
    frames
}
