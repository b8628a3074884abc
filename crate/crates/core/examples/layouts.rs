//! The three unit layouts on a small canvas: grid, circle packing and
//! grouped bands.
//!
//!     cargo run -p datamate-core --example layouts

use datamate_core::datamation::{layout_grid, layout_grouped, layout_pack, Axis, Canvas};

fn main() {
    let canvas = Canvas::default();

    let grid = layout_grid(12, &canvas, 10.0);
    println!("grid of 12, radius {:.1}", grid.radius);
    for p in grid.positions.iter().take(4) {
        println!("  ({:.1}, {:.1})", p.x, p.y);
    }

    let radii = [30.0, 20.0, 20.0, 10.0, 5.0, 5.0];
    let ids: Vec<u32> = (0..radii.len() as u32).collect();
    let (pos, r) = layout_pack(&radii, &ids, &canvas);
    println!("packed circles");
    for ((p, r), id) in pos.iter().zip(&r).zip(&ids) {
        println!("  #{id} at ({:.1}, {:.1}) r={r:.1}", p.x, p.y);
    }

    let groups = vec![
        ("CS".to_string(), vec![0, 2]),
        ("EE".to_string(), vec![1]),
        ("ME".to_string(), vec![3]),
    ];
    let g = layout_grouped(&groups, Axis::X, &canvas, 10.0);
    println!("grouped along x");
    for b in &g.x_bands {
        println!("  {:<3} {:.1}..{:.1}", b.label, b.start, b.end);
    }
}
