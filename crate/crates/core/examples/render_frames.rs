//! Render every key frame of a grouped pipeline to SVG files.
//!
//!     cargo run -p datamate-core --example render_frames -- out_dir

use std::path::PathBuf;

use datamate_core::corpus::bundled;
use datamate_core::datamation::render_svg;
use datamate_core::{generate, parse};

fn main() {
    let dir: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("datamate_frames"));
    std::fs::create_dir_all(&dir).unwrap();
    let vehicles = bundled("vehicles").unwrap();
    let p =
        parse("SELECT['vehicles']; PROJECT['mpg', #1]; PROJECT['origin', #1]; GROUP[avg, #2, #3]")
            .unwrap();
    let doc = generate(&p, &vehicles).unwrap();
    for i in 0..doc.keyframes.len() {
        let path = dir.join(format!("frame_{i:02}.svg"));
        std::fs::write(&path, render_svg(&doc, i).unwrap()).unwrap();
        println!("{}  {}", path.display(), doc.keyframes[i].caption);
    }
}
