//! Newest vertex bisection towards a corner, then a round trip through
//! the plain-text mesh format.

use mpet_adapt::mesh::{unit_square_mesh, Mesh};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut mesh = unit_square_mesh(2)?;
    for level in 0..8 {
        // refine every cell touching the origin
        let marked: Vec<usize> = (0..mesh.num_cells())
            .filter(|&k| mesh.cells()[k].iter().any(|&v| mesh.vertices()[v] == [0.0, 0.0]))
            .collect();
        mesh = mesh.bisect(&marked);
        mesh.check_invariants()?;
        println!(
            "level {level}: {} cells, {} vertices, h_max {:.4}",
            mesh.num_cells(),
            mesh.num_vertices(),
            mesh.max_diameter()
        );
    }
    let mut buf = Vec::new();
    mesh.write_ascii(&mut buf)?;
    let back = Mesh::read_ascii(buf.as_slice())?;
    assert_eq!(back.cells(), mesh.cells());
    println!("round trip ok ({} bytes)", buf.len());
    Ok(())
}
