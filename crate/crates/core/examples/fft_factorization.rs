//! Builds the 4-point factorization and prints each factor densely.

use butterfly_stft::butterfly::{build_butterfly_stack, DenseMatrix};

fn show(title: &str, m: &DenseMatrix) {
    println!("{title}");
    for r in 0..m.n {
        let row: Vec<String> = (0..m.n)
            .map(|c| {
                let (re, im) = m.get(r, c);
                format!("{:>5.1}{:+.1}j", re + 0.0, im + 0.0)
            })
            .collect();
        println!("  [{}]", row.join(", "));
    }
}

pub fn main() -> butterfly_stft::Result<()> {
    let stack = build_butterfly_stack(4)?;
    println!("bit reversal: {:?}", stack.permutation());
    show("P_4", &DenseMatrix::permutation(stack.permutation()));
    for f in &stack.factors {
        show(&format!("W_{}", f.stage()), &f.to_dense());
    }
    let product = stack.to_dense()?;
    show("W_2 · W_1 · P_4", &product);
    println!("max |product − DFT| = {:.1e}", product.max_abs_diff(&DenseMatrix::dft(4)));
    println!("\nCSV form:\n{}", product.to_csv());
    Ok(())
}
