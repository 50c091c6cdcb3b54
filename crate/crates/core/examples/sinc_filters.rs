//! Builds the mel-initialised sinc filterbank and prints the band edges
//! and the peak of each kernel's magnitude response.

use sincfuse::sinc::{SincConfig, SincLayer};

fn magnitude(kernel: &[f32], hz: f64, rate: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (n, &k) in kernel.iter().enumerate() {
        let phase = 2.0 * std::f64::consts::PI * hz * n as f64 / rate;
        re += k as f64 * phase.cos();
        im -= k as f64 * phase.sin();
    }
    re.hypot(im)
}

fn main() -> sincfuse::Result<()> {
    let config = SincConfig::default();
    let layer = SincLayer::<f32>::new("sinc", config.clone())?;
    let kernels = layer.kernels();
    let len = config.length;
    println!("{} filters of {} taps", layer.filters(), len);
    for (i, (row, (f1, f2))) in kernels
        .data()
        .chunks(len)
        .zip(layer.cutoffs())
        .enumerate()
        .step_by(10)
    {
        let peak = (0..=160)
            .map(|k| k as f64 * 50.0)
            .max_by(|a, b| magnitude(row, *a, 16000.0).total_cmp(&magnitude(row, *b, 16000.0)))
            .unwrap();
        println!("filter {i:2}: {f1:7.1} - {f2:7.1} Hz, response peaks near {peak:6.0} Hz");
    }
    Ok(())
}
