//! Dense symmetric diagonalization, spectrum normalization, ensemble-averaged
//! eigenvalue densities, and sample moments of pooled spectra.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::ensemble::{assemble_h, draw_coefficients, member_stream, EnsembleConfig};
use crate::error::{EgoeError, Result};
use crate::fock::{build_h0_matrix, build_v_matrix, ManyBodyMatrix};

/// Full eigendecomposition of one ensemble member.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors; column i pairs with eigenvalues[i].
    pub eigenvectors: DMatrix<f64>,
    /// Spectral mean.
    pub centroid: f64,
    /// Population standard deviation (divide by d, not d-1).
    pub sigma: f64,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Diagonalizes a symmetric many-body matrix. Eigenvalues come back
/// ascending with eigenvector columns permuted to match. Non-convergence is
/// an error; the member must be reported, never silently dropped.
pub fn eigendecompose(h: &ManyBodyMatrix) -> Result<Spectrum> {
    let dim = h.dim();
    let eig = h
        .as_matrix()
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or(EgoeError::EigenFailure { dim })?;

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::<f64>::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    let (centroid, sigma) = centroid_sigma(&eigenvalues);
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
        centroid,
        sigma,
    })
}

/// Eigenvalues only (ascending); cheaper when eigenvectors are not needed.
pub fn eigenvalues_only(h: &ManyBodyMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = h
        .as_matrix()
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn centroid_sigma(eigenvalues: &[f64]) -> (f64, f64) {
    let d = eigenvalues.len() as f64;
    let centroid = eigenvalues.iter().sum::<f64>() / d;
    let var = eigenvalues
        .iter()
        .map(|&e| (e - centroid) * (e - centroid))
        .sum::<f64>()
        / d;
    (centroid, var.sqrt())
}

/// Normalized energies (E - centroid)/sigma using the member's own spectral
/// centroid and population sigma. Affine transforms of the input spectrum
/// leave the output unchanged.
pub fn normalize_spectrum(s: &Spectrum) -> Result<Vec<f64>> {
    normalize_values(&s.eigenvalues)
}

/// Normalization of a raw eigenvalue list (same convention as
/// `normalize_spectrum`). A spectrum with zero width (including d = 1)
/// cannot be normalized.
pub fn normalize_values(eigenvalues: &[f64]) -> Result<Vec<f64>> {
    let (centroid, sigma) = centroid_sigma(eigenvalues);
    if sigma == 0.0 {
        return Err(EgoeError::DegenerateSpectrum);
    }
    Ok(eigenvalues.iter().map(|&e| (e - centroid) / sigma).collect())
}

/// Histogram normalization conventions for the density output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizationMode {
    /// Integral of the density over the in-range bins is 1 minus the
    /// overflow fraction.
    UnitArea,
    /// Unit-area density scaled by the basis dimension d(N, m).
    Dimension,
}

/// Uniform-bin histogram spec for normalized energies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramSpec {
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
    pub mode: NormalizationMode,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        // matches the density plots' visual range
        Self {
            bins: 50,
            lo: -3.5,
            hi: 3.5,
            mode: NormalizationMode::UnitArea,
        }
    }
}

/// Accumulating eigenvalue-density histogram over normalized energies.
/// Out-of-range energies are tallied, reported, and never dropped silently.
#[derive(Debug, Clone)]
pub struct DensityHistogram {
    spec: HistogramSpec,
    counts: Vec<u64>,
    underflow: u64,
    overflow: u64,
    members: u32,
    total: u64,
}

impl DensityHistogram {
    pub fn new(spec: HistogramSpec) -> Self {
        Self {
            spec,
            counts: vec![0; spec.bins],
            underflow: 0,
            overflow: 0,
            members: 0,
            total: 0,
        }
    }

    /// Adds one member's normalized spectrum.
    pub fn accumulate(&mut self, energies: &[f64]) {
        let width = (self.spec.hi - self.spec.lo) / self.spec.bins as f64;
        for &e in energies {
            if e < self.spec.lo {
                self.underflow += 1;
            } else {
                let b = ((e - self.spec.lo) / width) as usize;
                if b >= self.spec.bins {
                    self.overflow += 1;
                } else {
                    self.counts[b] += 1;
                }
            }
            self.total += 1;
        }
        self.members += 1;
    }

    /// Merges another histogram with the same spec (parallel partials).
    pub fn merge(&mut self, other: &DensityHistogram) -> Result<()> {
        if other.spec != self.spec {
            return Err(EgoeError::InvalidParams(
                "cannot merge histograms with different specs".into(),
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        self.members += other.members;
        self.total += other.total;
        Ok(())
    }

    pub fn members(&self) -> u32 {
        self.members
    }

    pub fn bin_width(&self) -> f64 {
        (self.spec.hi - self.spec.lo) / self.spec.bins as f64
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.spec.bins)
            .map(|b| self.spec.lo + (b as f64 + 0.5) * w)
            .collect()
    }

    /// Fraction of accumulated energies outside [lo, hi].
    pub fn out_of_range_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            (self.underflow + self.overflow) as f64 / self.total as f64
        }
    }

    /// Density values per bin under the spec's normalization mode. For
    /// UnitArea the in-range integral is 1 minus the out-of-range fraction;
    /// Dimension multiplies by states-per-member (d = total/members).
    pub fn density(&self) -> Vec<f64> {
        if self.total == 0 {
            return vec![0.0; self.spec.bins];
        }
        let w = self.bin_width();
        let unit = 1.0 / (self.total as f64 * w);
        let scale = match self.spec.mode {
            NormalizationMode::UnitArea => unit,
            NormalizationMode::Dimension => unit * self.total as f64 / self.members as f64,
        };
        self.counts.iter().map(|&c| c as f64 * scale).collect()
    }
}

/// Central sample moments of pooled normalized eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMoments {
    pub count: u64,
    pub mean: f64,
    pub variance: f64,
    /// Skewness m3 / m2^(3/2).
    pub gamma1: f64,
    /// Excess kurtosis m4 / m2^2 - 3.
    pub gamma2: f64,
}

/// Mergeable power-sum accumulator behind `sample_moments`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MomentAccumulator {
    n: u64,
    s1: f64,
    s2: f64,
    s3: f64,
    s4: f64,
}

impl MomentAccumulator {
    pub fn add_slice(&mut self, xs: &[f64]) {
        for &x in xs {
            self.n += 1;
            self.s1 += x;
            let x2 = x * x;
            self.s2 += x2;
            self.s3 += x2 * x;
            self.s4 += x2 * x2;
        }
    }

    pub fn merge(&mut self, o: &MomentAccumulator) {
        self.n += o.n;
        self.s1 += o.s1;
        self.s2 += o.s2;
        self.s3 += o.s3;
        self.s4 += o.s4;
    }

    pub fn moments(&self) -> SampleMoments {
        let n = self.n as f64;
        let mean = self.s1 / n;
        let m2 = self.s2 / n - mean * mean;
        let m3 = self.s3 / n - 3.0 * mean * self.s2 / n + 2.0 * mean.powi(3);
        let m4 = self.s4 / n - 4.0 * mean * self.s3 / n + 6.0 * mean * mean * self.s2 / n
            - 3.0 * mean.powi(4);
        SampleMoments {
            count: self.n,
            mean,
            variance: m2,
            gamma1: m3 / m2.powf(1.5),
            gamma2: m4 / (m2 * m2) - 3.0,
        }
    }
}

/// Variance, skewness, and excess kurtosis of a pooled sample.
pub fn sample_moments(values: &[f64]) -> SampleMoments {
    debug_assert!(values.len() >= 100, "sample_moments wants >= 100 values");
    let mut acc = MomentAccumulator::default();
    acc.add_slice(values);
    acc.moments()
}

/// Mean with its standard error over ensemble members.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanWithError {
    pub mean: f64,
    pub std_error: f64,
    pub count: u64,
}

fn mean_with_error(values: &[f64]) -> MeanWithError {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    MeanWithError {
        mean,
        std_error: (var / n).sqrt(),
        count: values.len() as u64,
    }
}

/// A member that could not be processed, with the reason; carried into the
/// run manifest.
#[derive(Debug, Clone)]
pub struct MemberFailure {
    pub member: u32,
    pub reason: String,
}

/// Output of the ensemble density pipeline.
#[derive(Debug, Clone)]
pub struct DensityRun {
    pub histogram: DensityHistogram,
    /// Moments of the pooled normalized eigenvalues.
    pub moments: SampleMoments,
    /// Per-member (1/d) tr((lambda V)^2), the Monte Carlo side of the
    /// variance closed form.
    pub trace_variance: MeanWithError,
    /// Member-to-member spread of the single-member excess kurtosis; its
    /// std_error is the statistical error bar on the pooled gamma2.
    pub member_gamma2: MeanWithError,
    pub failures: Vec<MemberFailure>,
}

/// Ensemble-averaged eigenvalue density: per member draw coefficients, build
/// V(k), assemble H (pure lambda*V when `eps` is None), diagonalize,
/// normalize with the member's own centroid/sigma, and pool.
///
/// Members are independent; the reduction runs in a fixed member order so
/// results are identical for any thread count.
pub fn ensemble_density(
    cfg: &EnsembleConfig,
    eps: Option<&[f64]>,
    hist: &HistogramSpec,
) -> Result<DensityRun> {
    let p = cfg.params;
    let h0 = match eps {
        Some(e) => Some(build_h0_matrix(p.levels, p.fermions, e)?),
        None => None,
    };

    struct Partial {
        energies_hist: DensityHistogram,
        acc: MomentAccumulator,
        trace_var: f64,
    }

    let results: Vec<std::result::Result<Partial, String>> = (0..cfg.members)
        .into_par_iter()
        .map(|member| {
            let mut rng = member_stream(cfg.base_seed, member as u64);
            let coeffs = draw_coefficients(p.levels, p.rank, &mut rng);
            let v = build_v_matrix(p.levels, p.fermions, p.rank, &coeffs)
                .map_err(|e| e.to_string())?;
            let h = match &h0 {
                Some(h0) => assemble_h(h0, &v, p.lambda).map_err(|e| e.to_string())?,
                None => ManyBodyMatrix::from_dmatrix(v.as_matrix() * p.lambda),
            };
            let trace_var = p.lambda * p.lambda * v.trace_second_moment();
            let ev = eigenvalues_only(&h);
            let en = normalize_values(&ev).map_err(|e| e.to_string())?;
            let mut energies_hist = DensityHistogram::new(*hist);
            energies_hist.accumulate(&en);
            let mut acc = MomentAccumulator::default();
            acc.add_slice(&en);
            Ok(Partial {
                energies_hist,
                acc,
                trace_var,
            })
        })
        .collect();

    let mut histogram = DensityHistogram::new(*hist);
    let mut acc = MomentAccumulator::default();
    let mut trace_vars = Vec::with_capacity(cfg.members as usize);
    let mut member_gamma2s = Vec::with_capacity(cfg.members as usize);
    let mut failures = Vec::new();
    for (member, res) in results.into_iter().enumerate() {
        match res {
            Ok(part) => {
                histogram.merge(&part.energies_hist)?;
                acc.merge(&part.acc);
                trace_vars.push(part.trace_var);
                member_gamma2s.push(part.acc.moments().gamma2);
            }
            Err(reason) => failures.push(MemberFailure {
                member: member as u32,
                reason,
            }),
        }
    }
    if trace_vars.is_empty() {
        let first = failures
            .first()
            .map(|f| f.reason.clone())
            .unwrap_or_default();
        return Err(EgoeError::InvalidParams(format!(
            "all ensemble members failed (member 0: {first})"
        )));
    }
    Ok(DensityRun {
        histogram,
        moments: acc.moments(),
        trace_variance: mean_with_error(&trace_vars),
        member_gamma2: mean_with_error(&member_gamma2s),
        failures,
    })
}

/// Monte Carlo mean of (1/d) tr((lambda V)^2) over the ensemble, without any
/// diagonalization. The cheap side of the variance cross-check.
pub fn ensemble_trace_variance(cfg: &EnsembleConfig) -> Result<MeanWithError> {
    let p = cfg.params;
    let values: Vec<Result<f64>> = (0..cfg.members)
        .into_par_iter()
        .map(|member| {
            let mut rng = member_stream(cfg.base_seed, member as u64);
            let coeffs = draw_coefficients(p.levels, p.rank, &mut rng);
            let v = build_v_matrix(p.levels, p.fermions, p.rank, &coeffs)?;
            Ok(p.lambda * p.lambda * v.trace_second_moment())
        })
        .collect();
    let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(mean_with_error(&values))
}

/// Sum-of-squared-differences distance between a binned density and a model
/// density evaluated at the bin centers; the discriminator behind the
/// Gaussian-vs-semicircle classification.
pub fn density_distance(centers: &[f64], density: &[f64], model: impl Fn(f64) -> f64) -> f64 {
    centers
        .iter()
        .zip(density)
        .map(|(&c, &d)| {
            let diff = d - model(c);
            diff * diff
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::SystemParams;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::DMatrix;

    fn from_dense(rows: usize, data: &[f64]) -> ManyBodyMatrix {
        ManyBodyMatrix::from_dmatrix(DMatrix::from_row_slice(rows, rows, data))
    }

    #[test]
    fn diagonal_matrix_eigendecomposition() {
        let h = from_dense(3, &[3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        let s = eigendecompose(&h).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, 2.0, 3.0]);
        // eigenvectors are a permuted identity
        for (col, row) in [(0usize, 1usize), (1, 2), (2, 0)] {
            assert_abs_diff_eq!(s.eigenvectors[(row, col)].abs(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_by_two_offdiagonal() {
        let h = from_dense(2, &[0.0, 1.0, 1.0, 0.0]);
        let s = eigendecompose(&h).unwrap();
        assert_abs_diff_eq!(s.eigenvalues[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.eigenvalues[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn residual_orthonormality_trace() {
        // random symmetric member; residual, orthonormality and trace bounds
        let mut rng = crate::ensemble::member_stream(11, 0);
        let coeffs = crate::ensemble::draw_coefficients(8, 2, &mut rng);
        let v = crate::fock::build_v_matrix(8, 4, 2, &coeffs).unwrap();
        let s = eigendecompose(&v).unwrap();
        let m = v.as_matrix();
        let norm = m.norm();
        for i in 0..s.dim() {
            let x = s.eigenvectors.column(i);
            let res = (m * x - x * s.eigenvalues[i]).norm();
            assert!(res <= 1e-8 * norm, "residual {res} vs {norm}");
        }
        let gram = s.eigenvectors.transpose() * &s.eigenvectors;
        for i in 0..s.dim() {
            for j in 0..s.dim() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(gram[(i, j)], want, epsilon = 1e-10);
            }
        }
        let trace: f64 = (0..v.dim()).map(|i| v.get(i, i)).sum();
        let sum: f64 = s.eigenvalues.iter().sum();
        assert_abs_diff_eq!(sum, trace, epsilon = 1e-8 * norm.max(1.0));
    }

    #[test]
    fn normalization_mean_zero_var_one() {
        let vals = vec![3.0, -1.0, 7.5, 0.25, 2.0, -4.0];
        let en = normalize_values(&vals).unwrap();
        let d = en.len() as f64;
        let mean = en.iter().sum::<f64>() / d;
        let var = en.iter().map(|e| e * e).sum::<f64>() / d - mean * mean;
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(var, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn normalization_affine_invariant() {
        let vals = vec![3.0, -1.0, 7.5, 0.25, 2.0, -4.0];
        let mapped: Vec<f64> = vals.iter().map(|&v| 2.75 * v - 12.0).collect();
        let a = normalize_values(&vals).unwrap();
        let b = normalize_values(&mapped).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalization_two_point_and_degenerate() {
        let en = normalize_values(&[0.0, 2.0]).unwrap();
        assert_eq!(en, vec![-1.0, 1.0]);
        assert!(normalize_values(&[5.0, 5.0, 5.0]).is_err());
    }

    #[test]
    fn histogram_uniform_input_flat() {
        let spec = HistogramSpec {
            bins: 10,
            lo: 0.0,
            hi: 1.0,
            mode: NormalizationMode::UnitArea,
        };
        let mut h = DensityHistogram::new(spec);
        let vals: Vec<f64> = (0..10_000).map(|i| (i as f64 + 0.5) / 10_000.0).collect();
        h.accumulate(&vals);
        let d = h.density();
        for &x in &d {
            assert_abs_diff_eq!(x, 1.0, epsilon = 1e-9);
        }
        assert_eq!(h.out_of_range_fraction(), 0.0);
    }

    #[test]
    fn histogram_unit_area_and_dimension_modes() {
        let mut spec = HistogramSpec {
            bins: 20,
            ..Default::default()
        };
        let mut h = DensityHistogram::new(spec);
        // two members of 50 synthetic energies each, some out of range
        let member: Vec<f64> = (0..50).map(|i| -4.0 + i as f64 * 0.16).collect();
        h.accumulate(&member);
        h.accumulate(&member);
        let total_area: f64 = h.density().iter().sum::<f64>() * h.bin_width();
        assert_abs_diff_eq!(total_area, 1.0 - h.out_of_range_fraction(), epsilon = 1e-12);
        assert!(h.out_of_range_fraction() > 0.0);

        spec.mode = NormalizationMode::Dimension;
        let mut hd = DensityHistogram::new(spec);
        hd.accumulate(&member);
        hd.accumulate(&member);
        let area_dim: f64 = hd.density().iter().sum::<f64>() * hd.bin_width();
        let d = 50.0;
        assert_abs_diff_eq!(
            area_dim,
            d * (1.0 - hd.out_of_range_fraction()),
            epsilon = 1e-9
        );
    }

    #[test]
    fn moments_of_synthetic_normal() {
        // deterministic standard normal sample via the ensemble stream
        use rand_distr::Distribution;
        let mut rng = crate::ensemble::member_stream(99, 0);
        let sample: Vec<f64> = (0..1_000_000)
            .map(|_| rand_distr::StandardNormal.sample(&mut rng))
            .collect();
        let m = sample_moments(&sample);
        assert_abs_diff_eq!(m.variance, 1.0, epsilon = 0.01);
        assert_abs_diff_eq!(m.gamma1, 0.0, epsilon = 0.01);
        assert_abs_diff_eq!(m.gamma2, 0.0, epsilon = 0.01);
    }

    #[test]
    fn moments_of_synthetic_semicircle() {
        // inverse-CDF sampling of the unit-variance semicircle on a fine grid
        let n = 500_000;
        let mut sample = Vec::with_capacity(n);
        // integrate the density to invert numerically
        let mut x = -2.0;
        let dx = 4.0 / 4_000_000.0;
        let mut cum = 0.0;
        let mut next = 0.5 / n as f64;
        while x < 2.0 && sample.len() < n {
            cum += crate::analytics::semicircle_density(x) * dx;
            while cum >= next && sample.len() < n {
                sample.push(x);
                next += 1.0 / n as f64;
            }
            x += dx;
        }
        assert_eq!(sample.len(), n);
        let m = sample_moments(&sample);
        assert_abs_diff_eq!(m.gamma2, -1.0, epsilon = 0.02);
        assert_abs_diff_eq!(m.gamma1, 0.0, epsilon = 0.01);
    }

    #[test]
    fn merge_equals_single_pass() {
        let mut a = MomentAccumulator::default();
        let mut b = MomentAccumulator::default();
        let mut whole = MomentAccumulator::default();
        let xs: Vec<f64> = (0..500).map(|i| (i as f64 * 0.71).sin()).collect();
        a.add_slice(&xs[..200]);
        b.add_slice(&xs[200..]);
        whole.add_slice(&xs);
        a.merge(&b);
        let ma = a.moments();
        let mw = whole.moments();
        assert_relative_eq!(ma.variance, mw.variance, max_relative = 1e-12);
        assert_relative_eq!(ma.gamma2, mw.gamma2, max_relative = 1e-10);
    }

    #[test]
    fn egoe_k_equals_m_pooled_kurtosis_near_goe() {
        // pooled gamma2 of a small EGOE(k=m) ensemble sits near the GOE value
        let cfg = EnsembleConfig {
            params: SystemParams::new(10, 5, 5, 1.0).unwrap(),
            members: 40,
            base_seed: 20260810,
        };
        let run = ensemble_density(&cfg, None, &HistogramSpec::default()).unwrap();
        assert!(run.failures.is_empty());
        assert_abs_diff_eq!(run.moments.gamma2, -1.0, epsilon = 0.05);
        assert_abs_diff_eq!(run.moments.variance, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn trace_variance_matches_closed_form_small() {
        let params = SystemParams::new(8, 4, 3, 1.0).unwrap();
        let cfg = EnsembleConfig {
            params,
            members: 150,
            base_seed: 7,
        };
        let got = ensemble_trace_variance(&cfg).unwrap();
        let want = crate::analytics::variance_v(&params);
        assert!(
            (got.mean - want).abs() <= 3.0 * got.std_error,
            "MC {} +- {} vs closed form {}",
            got.mean,
            got.std_error,
            want
        );
    }
}
