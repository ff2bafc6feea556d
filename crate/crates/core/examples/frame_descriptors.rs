//! Frame-level descriptors of a short vowel-like signal: spectrum, pitch,
//! MFCC, LPC and formants for a single 12.5 ms frame.

use std::f64::consts::PI;

use emofuse::cepstral::{self, FormantConfig, MelFilterbank, LPC_ORDER};
use emofuse::dsp::{self, PitchConfig};

fn main() -> emofuse::Result<()> {
    let rate = 16_000u32;
    // glottal pulse train at 125 Hz through two resonators (700 Hz, 1200 Hz)
    let mut x = vec![0.0f64; 2000];
    for i in (0..x.len()).step_by(128) {
        x[i] = 1.0;
    }
    for (f, bw) in [(700.0, 80.0), (1200.0, 100.0)] {
        let r = (-PI * bw / rate as f64).exp();
        let a1 = 2.0 * r * (2.0 * PI * f / rate as f64).cos();
        let a2 = -r * r;
        let mut y = vec![0.0; x.len()];
        for n in 0..x.len() {
            y[n] = x[n] + if n >= 1 { a1 * y[n - 1] } else { 0.0 } + if n >= 2 { a2 * y[n - 2] } else { 0.0 };
        }
        x = y;
    }
    let frame = &x[1000..1200];

    let spec = dsp::spectrum(frame, rate)?;
    println!("spectral centroid   {:.1} Hz", dsp::spectral_centroid(&spec));
    println!("band energy ratio   {:.4}", dsp::band_energy_ratio(&spec, 2000.0)?);
    println!("zero crossing rate  {:.4}", dsp::zero_crossing_rate(frame));
    println!("energy              {:.4}", dsp::short_time_energy(frame));
    println!("pitch               {:.1} Hz", dsp::pitch(frame, rate, &PitchConfig::default()));

    let fb = MelFilterbank::standard(rate);
    let c = cepstral::mfcc(&spec, &fb)?;
    println!("mfcc                {:.3?}", c);

    let model = cepstral::lpc(frame, LPC_ORDER)?;
    println!("lpcc                {:.3?}", cepstral::lpcc(&model, 11));
    let f = cepstral::formants(&model, rate, &FormantConfig::default());
    println!("formants            {:.0?}", f);
    Ok(())
}
