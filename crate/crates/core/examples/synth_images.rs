//! Writes seeded synthetic grayscale images as PGM files.
//!
//! `cargo run --release --example synth_images -- DIR [COUNT] [SIZE] [SEED]`

use std::path::PathBuf;

use signret::{pgm, synthetic};

fn main() -> signret::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "images".into()));
    let mut num = |default: u64| {
        args.next()
            .map_or(default, |s| s.parse().expect("numeric argument"))
    };
    let (count, size, seed) = (num(16), num(256) as usize, num(0));
    std::fs::create_dir_all(&dir)?;
    for i in 0..count {
        let img = synthetic::natural(size, size, seed + i)?;
        pgm::write_plane(dir.join(format!("synth_{i:04}.pgm")), &img)?;
    }
    println!("wrote {count} {size}x{size} images to {}", dir.display());
    Ok(())
}
