use super::{Complex, Dft};

/// Full linear convolution (`signal.len() + kernel.len() - 1` samples) via FFT.
pub fn convolve(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    if signal.is_empty() || kernel.is_empty() {
        return Vec::new();
    }
    let out_len = signal.len() + kernel.len() - 1;
    // overlap-add with blocks sized to the kernel
    let fft_len = (2 * kernel.len()).next_power_of_two().max(64);
    let hop = fft_len - kernel.len() + 1;
    let dft = Dft::new(fft_len);
    let mut kspec = vec![Complex::default(); fft_len];
    for (d, &k) in kspec.iter_mut().zip(kernel) {
        d.re = k;
    }
    dft.forward_in_place(&mut kspec);

    let mut out = vec![0.0; out_len];
    let mut buf = vec![Complex::default(); fft_len];
    for start in (0..signal.len()).step_by(hop) {
        let chunk = &signal[start..(start + hop).min(signal.len())];
        buf.fill(Complex::default());
        for (d, &x) in buf.iter_mut().zip(chunk) {
            d.re = x;
        }
        dft.forward_in_place(&mut buf);
        for (b, k) in buf.iter_mut().zip(&kspec) {
            *b *= k;
        }
        dft.inverse_in_place(&mut buf);
        let valid = (chunk.len() + kernel.len() - 1).min(out_len - start);
        for (o, b) in out[start..start + valid].iter_mut().zip(&buf) {
            *o += b.re;
        }
    }
    out
}

/// Causal convolution truncated to the signal length.
pub fn convolve_causal(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    let mut out = convolve(signal, kernel);
    out.resize(signal.len(), 0.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn direct(x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len() + h.len() - 1];
        for (i, &xv) in x.iter().enumerate() {
            for (j, &hv) in h.iter().enumerate() {
                y[i + j] += xv * hv;
            }
        }
        y
    }

    #[test]
    fn matches_direct_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (n, k) in [(1, 1), (10, 3), (1000, 37), (517, 300), (5, 64)] {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = convolve(&x, &h);
            let slow = direct(&x, &h);
            assert_eq!(fast.len(), slow.len());
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-10, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn empty_inputs() {
        assert!(convolve(&[], &[1.0]).is_empty());
        let y = convolve_causal(&[1.0, 2.0], &[0.0, 1.0]);
        assert_eq!(y.len(), 2);
        assert!(y[0].abs() < 1e-15 && (y[1] - 1.0).abs() < 1e-15);
    }
}
