//! Generates the three built-in domains, prints their statistics and
//! round-trips one of them through the ASCII mesh format.

use cbcflow::mesh::{
    generate_bifurcation, generate_cylinder_channel_graded, generate_unit_square, parse_mesh, write_mesh, BoundaryTag,
    Mesh,
};

fn describe(name: &str, m: &Mesh) {
    let s = m.stats();
    println!(
        "{name:<12} nodes {:>6}  triangles {:>6}  area {:.5}  min angle {:.1}  h {:.3}..{:.3}",
        s.n_nodes, s.n_triangles, s.area, s.min_angle_deg, s.h_min, s.h_max
    );
    for tag in BoundaryTag::ALL {
        println!("             {:<4} {} edges", tag.token(), m.edges_with_tag(tag).count());
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let square = generate_unit_square(16)?;
    let bif = generate_bifurcation(0.1)?;
    let cyl = generate_cylinder_channel_graded(0.05, 0.15)?;
    describe("unit square", &square);
    describe("bifurcation", &bif);
    describe("cylinder", &cyl);

    let text = write_mesh(&bif);
    let back = parse_mesh(&text)?;
    assert_eq!(back.nodes(), bif.nodes());
    println!("bifurcation mesh round-trips through {} bytes of text", text.len());
    Ok(())
}
