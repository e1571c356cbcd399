use std::collections::VecDeque;

use super::{BlockSpec, Complex, Dft};
use crate::error::{check_len, Error, Result};

/// Delay line of far-end samples and the DFTs of every partition's
/// length-`M` input block.
///
/// Partition `b` holds the spectrum of the block ending `b·R` samples before
/// the newest sample, so one [`advance`](Self::advance) shifts partition `b`
/// into `b + 1`.
#[derive(Clone, Debug)]
pub struct FarEndBuffer {
    spec: BlockSpec,
    history: VecDeque<f64>,
    spectra: VecDeque<Vec<Complex>>,
}

impl FarEndBuffer {
    pub fn new(spec: BlockSpec) -> Self {
        let m = spec.dft_len();
        Self {
            spec,
            history: std::iter::repeat_n(0.0, spec.history_len()).collect(),
            spectra: (0..spec.partitions())
                .map(|_| vec![Complex::default(); m])
                .collect(),
        }
    }

    pub fn spec(&self) -> BlockSpec {
        self.spec
    }

    /// Pushes `R` new far-end samples and recomputes partition 0.
    pub fn advance(&mut self, dft: &Dft, new_samples: &[f64]) -> Result<()> {
        check_len("far-end block", self.spec.shift(), new_samples.len())?;
        check_len("far-end dft", self.spec.dft_len(), dft.len())?;
        if new_samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric {
                context: "far-end block",
                block: 0,
            });
        }
        for &x in new_samples {
            self.history.pop_front();
            self.history.push_back(x);
        }
        let mut newest = self.spectra.pop_back().expect("at least one partition");
        let m = self.spec.dft_len();
        let start = self.history.len() - m;
        for (dst, &x) in newest.iter_mut().zip(self.history.range(start..)) {
            *dst = Complex::new(x, 0.0);
        }
        dft.forward_in_place(&mut newest);
        self.spectra.push_front(newest);
        Ok(())
    }

    /// Spectrum `X_b` of partition `b`.
    pub fn partition(&self, b: usize) -> &[Complex] {
        &self.spectra[b]
    }

    pub fn partitions(&self) -> impl Iterator<Item = &[Complex]> {
        self.spectra.iter().map(Vec::as_slice)
    }

    /// Time-domain input block of partition `b` (length `M`), oldest sample first.
    pub fn delayed_block(&self, b: usize) -> Vec<f64> {
        let m = self.spec.dft_len();
        let end = self.history.len() - b * self.spec.shift();
        self.history.range(end - m..end).copied().collect()
    }

    /// The newest `M` far-end samples (partition 0's block).
    pub fn newest_block(&self) -> Vec<f64> {
        self.delayed_block(0)
    }
}

/// Early-echo estimate in both domains.
#[derive(Clone, Debug)]
pub struct EchoEstimate {
    /// The `R` valid overlap-save output samples.
    pub time: Vec<f64>,
    /// DFT of `[0_R; time]`, the overlap-save constrained spectrum.
    pub spectrum: Vec<Complex>,
}

/// Overlap-save spectrum of a time block: DFT of the block prefixed by `R` zeros.
pub fn os_spectrum(dft: &Dft, block: &[f64]) -> Result<Vec<Complex>> {
    let r = dft.len() / 2;
    check_len("overlap-save block", r, block.len())?;
    let mut buf = vec![Complex::default(); dft.len()];
    for (dst, &x) in buf[r..].iter_mut().zip(block) {
        *dst = Complex::new(x, 0.0);
    }
    dft.forward_in_place(&mut buf);
    Ok(buf)
}

/// Partitioned-block convolution of the far-end delay line with the
/// per-partition filter spectra.
pub fn pbc_early_echo(
    filters: &[Vec<Complex>],
    buffer: &FarEndBuffer,
    dft: &Dft,
) -> Result<EchoEstimate> {
    let spec = buffer.spec();
    check_len("filter partitions", spec.partitions(), filters.len())?;
    let m = spec.dft_len();
    let r = spec.shift();
    let mut acc = vec![Complex::default(); m];
    for (w, x) in filters.iter().zip(buffer.partitions()) {
        check_len("filter partition length", m, w.len())?;
        for ((a, &wv), &xv) in acc.iter_mut().zip(w).zip(x) {
            *a += wv * xv;
        }
    }
    dft.inverse_in_place(&mut acc);
    let time: Vec<f64> = acc[r..].iter().map(|c| c.re).collect();
    acc[..r].fill(Complex::default());
    for v in &mut acc[r..] {
        v.im = 0.0;
    }
    dft.forward_in_place(&mut acc);
    Ok(EchoEstimate {
        time,
        spectrum: acc,
    })
}

/// Projects a spectrum onto filters whose time response occupies only the
/// first `R` samples.
pub fn apply_gradient_constraint(dft: &Dft, spectrum: &[Complex]) -> Result<Vec<Complex>> {
    check_len("gradient constraint input", dft.len(), spectrum.len())?;
    let mut buf = spectrum.to_vec();
    gradient_constrain_in_place(dft, &mut buf);
    Ok(buf)
}

pub fn gradient_constrain_in_place(dft: &Dft, buf: &mut [Complex]) {
    let r = dft.len() / 2;
    dft.inverse_in_place(buf);
    buf[r..].fill(Complex::default());
    dft.forward_in_place(buf);
}
