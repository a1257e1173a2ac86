use prodnormal::tables::{compute_table, format_cell, Reference, TableKind};
use std::time::Instant;

fn main() {
    for n in 1..=4 {
        let t0 = Instant::now();
        let kind = TableKind::from_number(n).unwrap();
        let rows = compute_table(kind, &Reference::Quadrature).unwrap();
        println!("table {n} ({:.1}s)", t0.elapsed().as_secs_f64());
        for r in rows {
            let cells: Vec<String> = r.cells.iter().map(|c| format_cell(*c)).collect();
            println!("({},{},{}) {}", r.mu_x, r.mu_y, r.rho, cells.join(" "));
        }
    }
}
