//! Fixtures shared by the benchmarks.

use std::path::Path;

use facademap_core::synth::SceneSpec;

/// A 40 m street with one facade on each side, a tree and a camera.
pub const STREET: &str = "
traj_length = 40
laser_sides = both
[facade]
id = 1
p1 = 0 8
p2 = 40 8
top = 10
texture = window-grid
[facade]
id = 2
p1 = 40 -8
p2 = 0 -8
top = 8
[occluder]
kind = sphere
center = 20 4 5
radius = 2
[camera]
position = 20 0 2.5
target = 20 8 4
";

pub fn street() -> SceneSpec {
    SceneSpec::parse(STREET, Path::new("bench")).expect("bench scene parses")
}
