//! Parameter and multiply-add counts of the butterfly stack vs a dense DFT.

use butterfly_stft::cli::{bench_size, BenchRow};

pub fn main() -> butterfly_stft::Result<()> {
    println!("{}", BenchRow::CSV_HEADER);
    for k in [4, 6, 8, 9, 10] {
        let row = bench_size(1 << k, 50)?;
        println!("{}", row.csv());
    }
    let row = bench_size(512, 1)?;
    println!(
        "\nn=512: {} dense vs {} butterfly parameters ({:.1}x fewer)",
        row.dense_params,
        row.butterfly_params,
        row.dense_params as f64 / row.butterfly_params as f64
    );
    Ok(())
}
