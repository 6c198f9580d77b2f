use std::fmt::Write;

use crate::fusion::FeaturedPointCloud;

/// ASCII PLY with `x y z`, the first `channel_limit` feature channels and the
/// frame-of-origin tag per vertex.
pub fn write_ply(cloud: &FeaturedPointCloud, channel_limit: usize) -> Vec<u8> {
    let k = channel_limit.min(cloud.channels);
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    writeln!(s, "element vertex {}", cloud.len()).unwrap();
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    for c in 0..k {
        writeln!(s, "property float f{c}").unwrap();
    }
    s.push_str("property uint origin\nend_header\n");
    for i in 0..cloud.len() {
        let [x, y, z] = cloud.positions[i];
        write!(s, "{x} {y} {z}").unwrap();
        for v in &cloud.feature(i)[..k] {
            write!(s, " {v}").unwrap();
        }
        writeln!(s, " {}", cloud.origin[i]).unwrap();
    }
    s.into_bytes()
}
