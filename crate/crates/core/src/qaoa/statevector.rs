use super::QaoaError;
use num_complex::Complex64;
use rayon::prelude::*;

/// Amplitudes per cache block. Qubits below `BLOCK_BITS` are mixed inside a
/// block right after the cost phase; higher qubits get strided passes.
const BLOCK_BITS: usize = 12;
/// Pair-slice length for parallel strided passes.
const PAIR_CHUNK: usize = 1 << 12;

/// Dense `2^n` amplitude vector, qubit `k` = bit `k` of the basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

#[inline(always)]
fn phase(a: Complex64, gamma: f64, cost: f64) -> Complex64 {
    let (s, c) = (gamma * cost).sin_cos();
    a * Complex64::new(c, -s)
}

/// `(cos b I - i sin b X)` on the pair `(a, b)`.
#[inline(always)]
fn rotate(a: &mut Complex64, b: &mut Complex64, c: f64, s: f64) {
    let (x, y) = (*a, *b);
    *a = Complex64::new(c * x.re + s * y.im, c * x.im - s * y.re);
    *b = Complex64::new(c * y.re + s * x.im, c * y.im - s * x.re);
}

fn mix_qubit_serial(block: &mut [Complex64], q: usize, c: f64, s: f64) {
    let stride = 1 << q;
    for pair in block.chunks_exact_mut(2 * stride) {
        let (lo, hi) = pair.split_at_mut(stride);
        for (a, b) in lo.iter_mut().zip(hi) {
            rotate(a, b, c, s);
        }
    }
}

fn mix_qubit_parallel(amps: &mut [Complex64], q: usize, c: f64, s: f64) {
    let stride = 1 << q;
    amps.par_chunks_mut(2 * stride).for_each(|pair| {
        let (lo, hi) = pair.split_at_mut(stride);
        lo.par_chunks_mut(PAIR_CHUNK)
            .zip(hi.par_chunks_mut(PAIR_CHUNK))
            .for_each(|(l, h)| {
                for (a, b) in l.iter_mut().zip(h) {
                    rotate(a, b, c, s);
                }
            });
    });
}

impl Statevector {
    /// `|+>^n`: every amplitude `2^(-n/2)`.
    pub fn uniform(num_qubits: usize) -> Self {
        let n = 1usize << num_qubits;
        let a = Complex64::new((n as f64).sqrt().recip(), 0.0);
        Statevector {
            num_qubits,
            amps: vec![a; n],
        }
    }

    pub fn basis(num_qubits: usize, index: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        Statevector { num_qubits, amps }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self, QaoaError> {
        if amps.is_empty() || !amps.len().is_power_of_two() {
            return Err(QaoaError::SizeMismatch {
                state: amps.len(),
                table: 0,
            });
        }
        Ok(Statevector {
            num_qubits: amps.len().trailing_zeros() as usize,
            amps,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.par_iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.par_iter().map(|a| a.norm_sqr()).collect()
    }

    fn check(&self, costs: &[f64]) -> Result<(), QaoaError> {
        if costs.len() != self.amps.len() {
            return Err(QaoaError::SizeMismatch {
                state: self.amps.len(),
                table: costs.len(),
            });
        }
        Ok(())
    }

    /// `a_i <- a_i exp(-i gamma cost_i)`.
    pub fn apply_cost_phase(&mut self, costs: &[f64], gamma: f64) -> Result<(), QaoaError> {
        self.check(costs)?;
        if gamma == 0.0 {
            return Ok(());
        }
        self.amps
            .par_chunks_mut(PAIR_CHUNK)
            .zip(costs.par_chunks(PAIR_CHUNK))
            .for_each(|(a, c)| {
                for (a, &c) in a.iter_mut().zip(c) {
                    *a = phase(*a, gamma, c);
                }
            });
        Ok(())
    }

    /// `exp(-i beta X)` on every qubit.
    pub fn apply_mixer(&mut self, beta: f64) {
        if beta == 0.0 {
            return;
        }
        let (s, c) = beta.sin_cos();
        for q in 0..self.num_qubits {
            mix_qubit_parallel(&mut self.amps, q, c, s);
        }
    }

    /// Cost phase followed by the mixer, blocked for cache reuse. Produces
    /// exactly the same floating-point results as the two separate calls.
    pub fn apply_layer(&mut self, costs: &[f64], gamma: f64, beta: f64) -> Result<(), QaoaError> {
        self.check(costs)?;
        if gamma == 0.0 || beta == 0.0 {
            self.apply_cost_phase(costs, gamma)?;
            self.apply_mixer(beta);
            return Ok(());
        }
        let (s, c) = beta.sin_cos();
        let low = self.num_qubits.min(BLOCK_BITS);
        let block = 1usize << low;
        self.amps
            .par_chunks_mut(block)
            .zip(costs.par_chunks(block))
            .for_each(|(amps, costs)| {
                for (a, &cost) in amps.iter_mut().zip(costs) {
                    *a = phase(*a, gamma, cost);
                }
                for q in 0..low {
                    mix_qubit_serial(amps, q, c, s);
                }
            });
        for q in low..self.num_qubits {
            mix_qubit_parallel(&mut self.amps, q, c, s);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn zero_gamma_is_bit_exact_identity() {
        let mut s = Statevector::uniform(3);
        s.apply_mixer(0.3);
        let before = s.clone();
        s.apply_cost_phase(&[0.1, 0.9, 0.3, 0.0, 1.0, 0.5, 0.2, 0.7], 0.0)
            .unwrap();
        assert_eq!(s, before);
        s.apply_mixer(0.0);
        assert_eq!(s, before);
    }

    #[test]
    fn phase_keeps_moduli() {
        let mut s = Statevector::uniform(2);
        s.apply_mixer(0.4);
        let before: Vec<f64> = s.amplitudes().iter().map(|a| a.norm()).collect();
        s.apply_cost_phase(&[0.0, 0.3, 0.77, 1.0], 2.9).unwrap();
        for (a, m) in s.amplitudes().iter().zip(before) {
            assert!((a.norm() - m).abs() < 1e-15);
        }
    }

    #[test]
    fn phase_pi_flips_sign() {
        let mut s = Statevector::uniform(1);
        s.apply_cost_phase(&[0.0, 1.0], PI).unwrap();
        assert!(close(s.amplitudes()[0], Complex64::new(FRAC_1_SQRT_2, 0.0), 1e-15));
        assert!(close(s.amplitudes()[1], Complex64::new(-FRAC_1_SQRT_2, 0.0), 1e-15));
    }

    #[test]
    fn mixer_closed_forms() {
        let mut s = Statevector::basis(1, 0);
        s.apply_mixer(FRAC_PI_2);
        assert!(close(s.amplitudes()[0], Complex64::new(0.0, 0.0), 1e-15));
        assert!(close(s.amplitudes()[1], Complex64::new(0.0, -1.0), 1e-15));

        let mut s = Statevector::basis(1, 0);
        s.apply_mixer(-1.0);
        assert!(close(s.amplitudes()[0], Complex64::new(1f64.cos(), 0.0), 1e-15));
        assert!(close(s.amplitudes()[1], Complex64::new(0.0, 1f64.sin()), 1e-15));
    }

    #[test]
    fn size_mismatch_is_reported() {
        let mut s = Statevector::uniform(2);
        assert!(matches!(
            s.apply_cost_phase(&[0.0; 3], 1.0),
            Err(QaoaError::SizeMismatch { state: 4, table: 3 })
        ));
    }

    #[test]
    fn fused_layer_equals_separate_calls_bitwise() {
        for n in [3, 13, 14] {
            let costs: Vec<f64> = (0..1usize << n)
                .map(|i| ((i * 2654435761) % 1000) as f64 / 999.0)
                .collect();
            let mut a = Statevector::uniform(n);
            let mut b = a.clone();
            for (g, be) in [(0.3, -0.9), (0.7, -0.2)] {
                a.apply_cost_phase(&costs, g).unwrap();
                a.apply_mixer(be);
                b.apply_layer(&costs, g, be).unwrap();
            }
            assert_eq!(a, b, "n = {n}");
        }
    }
}
