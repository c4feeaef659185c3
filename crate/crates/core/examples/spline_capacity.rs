//! How well can an Akima spline with a given node count represent
//! band-limited motion? Fits splines by least squares to curves below and
//! above the node grid's Nyquist limit and prints the relative residuals.

use splinemoco::geometry::ScanGeometry;
use splinemoco::motion::{fit_spline_least_squares, nyquist_limit, sample_motion_curve, CutoffFrequency};

fn main() -> splinemoco::Result<()> {
    let n_proj = 180;
    let geom = ScanGeometry::desk_scale(n_proj);
    let seeds = 0..5u64;
    println!("{:>6} {:>10} {:>8} {:>12}", "nodes", "f_c", "x limit", "rms / amp");
    for n_nodes in [10, 30] {
        let limit = nyquist_limit(n_nodes, n_proj);
        for multiple in [0.25, 0.5, 0.8, 1.5, 3.0] {
            let fc = (multiple * limit).min(0.5);
            let mut total = 0.0;
            for seed in seeds.clone() {
                let curve = sample_motion_curve(seed, &geom, CutoffFrequency::new(fc)?, 5.0, 5.0)?;
                let fit = fit_spline_least_squares(&curve, n_nodes)?;
                total += fit.rms_residual.iter().sum::<f64>() / 6.0 / 5.0;
            }
            let mean = total / seeds.clone().count() as f64;
            println!("{n_nodes:>6} {fc:>10.4} {multiple:>8.2} {:>11.2}%", 100.0 * mean);
        }
    }
    Ok(())
}
