#![allow(dead_code)]

use std::path::Path;

use ascribe_core::mesh_io::{parse_obj, write_stl_binary};

pub const CUBE_OBJ: &str = "\
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
";

pub const PAIR_OBJ: &str = "\
v 0 0 0
v 1 0 0
v 0 1 0
v 3 0 0
v 4 0 0
v 3 1 0
g left
f 1 2 3
g right
f 4 5 6
";

pub fn cube_stl() -> Vec<u8> {
    write_stl_binary(&parse_obj(CUBE_OBJ).unwrap())
}

/// Writes 8-bit grayscale PNG slices `s000.png`, ... into `dir`.
pub fn write_stack(dir: &Path, dims: [usize; 3], f: impl Fn(usize, usize, usize) -> u8) {
    std::fs::create_dir_all(dir).unwrap();
    for z in 0..dims[2] {
        let img = image::GrayImage::from_fn(dims[0] as u32, dims[1] as u32, |x, y| {
            image::Luma([f(x as usize, y as usize, z)])
        });
        img.save(dir.join(format!("s{z:03}.png"))).unwrap();
    }
}

/// Binary ball of radius `r` centered in an `n`-cube stack.
pub fn write_ball_stack(dir: &Path, n: usize, r: f64) {
    let c = (n as f64 - 1.0) / 2.0;
    write_stack(dir, [n, n, n], |x, y, z| {
        let d2 = (x as f64 - c).powi(2) + (y as f64 - c).powi(2) + (z as f64 - c).powi(2);
        if d2 <= r * r {
            255
        } else {
            0
        }
    });
}

/// An asset tree with a cube (STL and OBJ), a two-part OBJ, a corrupted
/// STL and a small image stack.
pub fn asset_tree(root: &Path) {
    std::fs::write(root.join("cube.stl"), cube_stl()).unwrap();
    std::fs::write(root.join("cube.obj"), CUBE_OBJ).unwrap();
    std::fs::write(root.join("pair.obj"), PAIR_OBJ).unwrap();
    let mut bad = cube_stl();
    bad.truncate(bad.len() - 7);
    std::fs::write(root.join("broken.stl"), bad).unwrap();
    write_stack(&root.join("stack"), [6, 5, 4], |x, y, z| (x * 40 + y * 3 + z) as u8);
}
