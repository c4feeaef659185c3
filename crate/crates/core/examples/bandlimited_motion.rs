//! Samples band-limited rigid motion curves at several cutoff frequencies,
//! checks their spectra and writes one as CSV.

use rustfft::{num_complex::Complex, FftPlanner};
use splinemoco::geometry::ScanGeometry;
use splinemoco::motion::{sample_motion_curve, CutoffFrequency, AXIS_NAMES};

fn main() -> splinemoco::Result<()> {
    let geom = ScanGeometry::desk_scale(120);
    let n = geom.n_projections;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    for fc in [0.01, 0.05, 0.2, 0.5] {
        let curve = sample_motion_curve(7, &geom, CutoffFrequency::new(fc)?, 5.0, 5.0)?;
        let mut worst_leak = 0.0_f64;
        for axis in 0..6 {
            let mut buf: Vec<Complex<f64>> = curve.axis(axis).iter().map(|&v| Complex::new(v, 0.0)).collect();
            fft.process(&mut buf);
            for (k, c) in buf.iter().enumerate() {
                if k.min(n - k) as f64 / n as f64 > fc {
                    worst_leak = worst_leak.max(c.norm());
                }
            }
        }
        let amps: Vec<String> = (0..6).map(|a| format!("{}={:.2}", AXIS_NAMES[a], curve.max_abs(a))).collect();
        println!("f_c={fc:<5} max-abs [{}], largest bin above f_c {worst_leak:.1e}", amps.join(", "));
    }

    let out = std::env::temp_dir().join("splinemoco_motion.csv");
    sample_motion_curve(7, &geom, CutoffFrequency::new(0.02)?, 5.0, 5.0)?.to_csv_file(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}
