//! Post-quench survival probability F(t): initial basis states from an
//! energy window around the spectrum center, overlap rows from the
//! eigenvectors, Fourier sums over normalized eigenvalues, and the ensemble
//! average with Gaussian / Bessel comparison laws.

use rayon::prelude::*;

use crate::analytics::{bessel_survival, gaussian_survival, sigma0_sq};
use crate::ensemble::{assemble_h, draw_coefficients, member_stream, EnsembleConfig};
use crate::error::{EgoeError, Result};
use crate::fock::{build_h0_matrix, build_v_matrix, ManyBodyMatrix};
use crate::spectral::{
    eigendecompose, normalize_spectrum, HistogramSpec, MeanWithError, MemberFailure, Spectrum,
};

/// Basis states chosen as post-quench initial states for one member.
#[derive(Debug, Clone)]
pub struct InitialStateSelection {
    /// Basis indices inside the window.
    pub indices: Vec<usize>,
    /// Their normalized energies (H diagonal, member centroid/sigma).
    pub energies: Vec<f64>,
    /// True if the window was empty and the nearest state was used instead.
    pub fallback: bool,
}

/// Squared overlaps |C_0^E|^2 of one basis state with every eigenstate.
#[derive(Debug, Clone)]
pub struct OverlapRow {
    pub probabilities: Vec<f64>,
}

impl OverlapRow {
    pub fn sum(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}

/// Selects the basis states whose normalized diagonal energy
/// (H_ii - centroid)/sigma lies in the closed window |E| <= delta/2. An
/// empty window falls back to the single nearest state, flagged, so no
/// member silently drops out of the average.
pub fn select_initial_states(
    spectrum: &Spectrum,
    h_diag: &[f64],
    delta: f64,
) -> InitialStateSelection {
    debug_assert!(delta > 0.0);
    debug_assert_eq!(h_diag.len(), spectrum.dim());
    let mut indices = Vec::new();
    let mut energies = Vec::new();
    for (i, &e) in h_diag.iter().enumerate() {
        let en = (e - spectrum.centroid) / spectrum.sigma;
        if en.abs() <= 0.5 * delta {
            indices.push(i);
            energies.push(en);
        }
    }
    if !indices.is_empty() {
        return InitialStateSelection {
            indices,
            energies,
            fallback: false,
        };
    }
    let (best, best_en) = h_diag
        .iter()
        .enumerate()
        .map(|(i, &e)| (i, (e - spectrum.centroid) / spectrum.sigma))
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .expect("non-empty diagonal");
    InitialStateSelection {
        indices: vec![best],
        energies: vec![best_en],
        fallback: true,
    }
}

/// Squared eigenvector components along one basis row; sums to 1 by
/// orthonormality.
pub fn overlaps(spectrum: &Spectrum, basis_index: usize) -> OverlapRow {
    let d = spectrum.dim();
    let mut probabilities = Vec::with_capacity(d);
    for e in 0..d {
        let c = spectrum.eigenvectors[(basis_index, e)];
        probabilities.push(c * c);
    }
    OverlapRow { probabilities }
}

/// Survival probability of one (member, initial state) pair on the given
/// time grid: F(t) = (sum p cos Et)^2 + (sum p sin Et)^2 over normalized
/// eigenvalues. F(0) is exactly 1 (the state overlaps itself).
pub fn survival_curve(row: &OverlapRow, energies: &[f64], times: &[f64]) -> Vec<f64> {
    debug_assert_eq!(row.probabilities.len(), energies.len());
    times
        .iter()
        .map(|&t| {
            if t == 0.0 {
                return 1.0;
            }
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for (&p, &e) in row.probabilities.iter().zip(energies) {
                let (s, c) = (e * t).sin_cos();
                re += p * c;
                im += p * s;
            }
            re * re + im * im
        })
        .collect()
}

/// Uniform time grid of `points` samples on [0, t_max], first point exactly 0.
pub fn time_grid(t_max: f64, points: usize) -> Vec<f64> {
    debug_assert!(points >= 2);
    (0..points)
        .map(|i| t_max * i as f64 / (points - 1) as f64)
        .collect()
}

/// Strength-function diagnostic: |C_0^E|^2-weighted histogram over
/// normalized eigenvalues, averaged over pairs.
#[derive(Debug, Clone)]
pub struct StrengthHistogram {
    spec: HistogramSpec,
    weights: Vec<f64>,
    out_of_range: f64,
    pairs: u64,
}

impl StrengthHistogram {
    fn new(spec: HistogramSpec) -> Self {
        Self {
            spec,
            weights: vec![0.0; spec.bins],
            out_of_range: 0.0,
            pairs: 0,
        }
    }

    fn accumulate(&mut self, row: &OverlapRow, energies: &[f64]) {
        let width = (self.spec.hi - self.spec.lo) / self.spec.bins as f64;
        for (&p, &e) in row.probabilities.iter().zip(energies) {
            if e < self.spec.lo || e >= self.spec.hi {
                self.out_of_range += p;
            } else {
                let b = ((e - self.spec.lo) / width) as usize;
                self.weights[b.min(self.spec.bins - 1)] += p;
            }
        }
        self.pairs += 1;
    }

    fn merge(&mut self, other: &StrengthHistogram) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        self.out_of_range += other.out_of_range;
        self.pairs += other.pairs;
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        let w = (self.spec.hi - self.spec.lo) / self.spec.bins as f64;
        (0..self.spec.bins)
            .map(|b| self.spec.lo + (b as f64 + 0.5) * w)
            .collect()
    }

    /// Unit-area strength function (up to the out-of-range weight).
    pub fn density(&self) -> Vec<f64> {
        if self.pairs == 0 {
            return vec![0.0; self.spec.bins];
        }
        let w = (self.spec.hi - self.spec.lo) / self.spec.bins as f64;
        let scale = 1.0 / (self.pairs as f64 * w);
        self.weights.iter().map(|&x| x * scale).collect()
    }

    pub fn out_of_range_fraction(&self) -> f64 {
        if self.pairs == 0 {
            0.0
        } else {
            self.out_of_range / self.pairs as f64
        }
    }
}

/// Ensemble- and initial-state-averaged survival probability with the two
/// comparison laws attached.
#[derive(Debug, Clone)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    /// Equal-weight mean of F(t) over all (member, initial state) pairs.
    pub f_numeric: Vec<f64>,
    /// Standard error of the mean per time point.
    pub std_error: Vec<f64>,
    /// Gaussian law exp(-sigma_0^2 t^2) at the analytic sigma_0^2.
    pub f_gauss: Vec<f64>,
    /// Bessel law [J1(2 sigma_0 t)]^2/(sigma_0 t)^2 at the analytic sigma_0^2.
    pub f_bessel: Vec<f64>,
    /// Analytic sigma_0^2 driving the law columns (1 when H0 is absent).
    pub sigma0_sq: f64,
    /// Ensemble-averaged measured variance of the selected initial states.
    pub sigma0_sq_measured: MeanWithError,
    pub pair_count: u64,
    /// Members whose window was empty (nearest-state fallback used).
    pub fallback_members: u32,
    pub failures: Vec<MemberFailure>,
}

/// Full survival run output: the averaged curve plus the strength-function
/// diagnostic.
#[derive(Debug, Clone)]
pub struct SurvivalRun {
    pub curve: SurvivalCurve,
    pub strength: StrengthHistogram,
}

/// Runs the quench pipeline over the ensemble: per member build H = H0 +
/// lambda V (or pure lambda V when `eps` is None), diagonalize, select
/// initial states in the delta window, accumulate per-pair survival curves,
/// and average with equal weight per pair.
///
/// Members are processed independently and reduced in member order, so the
/// result is identical for any thread count.
pub fn averaged_survival(
    cfg: &EnsembleConfig,
    eps: Option<&[f64]>,
    delta: f64,
    times: &[f64],
    strength_spec: &HistogramSpec,
) -> Result<SurvivalRun> {
    if delta <= 0.0 {
        return Err(EgoeError::InvalidParams(format!(
            "delta must be > 0, got {delta}"
        )));
    }
    let p = cfg.params;
    let h0 = match eps {
        Some(e) => Some(build_h0_matrix(p.levels, p.fermions, e)?),
        None => None,
    };
    let sigma0 = match eps {
        Some(e) => sigma0_sq(&p, e)?,
        None => 1.0,
    };

    struct Partial {
        f_sum: Vec<f64>,
        f_sq_sum: Vec<f64>,
        pairs: u64,
        fallback: bool,
        var_sum: f64,
        var_sq_sum: f64,
        strength: StrengthHistogram,
    }

    let nt = times.len();
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
            let h_diag = h.diagonal();
            let spectrum = eigendecompose(&h).map_err(|e| e.to_string())?;
            let energies = normalize_spectrum(&spectrum).map_err(|e| e.to_string())?;
            let selection = select_initial_states(&spectrum, &h_diag, delta);

            let mut part = Partial {
                f_sum: vec![0.0; nt],
                f_sq_sum: vec![0.0; nt],
                pairs: 0,
                fallback: selection.fallback,
                var_sum: 0.0,
                var_sq_sum: 0.0,
                strength: StrengthHistogram::new(*strength_spec),
            };
            for &b in &selection.indices {
                let row = overlaps(&spectrum, b);
                let f = survival_curve(&row, &energies, times);
                for (i, &x) in f.iter().enumerate() {
                    part.f_sum[i] += x;
                    part.f_sq_sum[i] += x * x;
                }
                let mean: f64 = row
                    .probabilities
                    .iter()
                    .zip(&energies)
                    .map(|(&p, &e)| p * e)
                    .sum();
                let second: f64 = row
                    .probabilities
                    .iter()
                    .zip(&energies)
                    .map(|(&p, &e)| p * e * e)
                    .sum();
                let var = second - mean * mean;
                part.var_sum += var;
                part.var_sq_sum += var * var;
                part.strength.accumulate(&row, &energies);
                part.pairs += 1;
            }
            Ok(part)
        })
        .collect();

    let mut f_sum = vec![0.0; nt];
    let mut f_sq_sum = vec![0.0; nt];
    let mut pair_count = 0u64;
    let mut fallback_members = 0u32;
    let mut var_sum = 0.0;
    let mut var_sq_sum = 0.0;
    let mut strength = StrengthHistogram::new(*strength_spec);
    let mut failures = Vec::new();
    for (member, res) in results.into_iter().enumerate() {
        match res {
            Ok(part) => {
                for i in 0..nt {
                    f_sum[i] += part.f_sum[i];
                    f_sq_sum[i] += part.f_sq_sum[i];
                }
                pair_count += part.pairs;
                fallback_members += part.fallback as u32;
                var_sum += part.var_sum;
                var_sq_sum += part.var_sq_sum;
                strength.merge(&part.strength);
            }
            Err(reason) => failures.push(MemberFailure {
                member: member as u32,
                reason,
            }),
        }
    }
    if pair_count == 0 {
        let first = failures
            .first()
            .map(|f| f.reason.clone())
            .unwrap_or_default();
        return Err(EgoeError::InvalidParams(format!(
            "all ensemble members failed (member 0: {first})"
        )));
    }

    let n = pair_count as f64;
    let f_numeric: Vec<f64> = f_sum.iter().map(|&s| s / n).collect();
    let std_error: Vec<f64> = f_sq_sum
        .iter()
        .zip(&f_numeric)
        .map(|(&sq, &mean)| {
            let var = (sq / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
            (var / n).sqrt()
        })
        .collect();
    let var_mean = var_sum / n;
    let var_var = (var_sq_sum / n - var_mean * var_mean).max(0.0) * n / (n - 1.0).max(1.0);
    let sigma0_sq_measured = MeanWithError {
        mean: var_mean,
        std_error: (var_var / n).sqrt(),
        count: pair_count,
    };

    let f_gauss: Vec<f64> = times.iter().map(|&t| gaussian_survival(t, sigma0)).collect();
    let f_bessel: Vec<f64> = times.iter().map(|&t| bessel_survival(t, sigma0)).collect();

    Ok(SurvivalRun {
        curve: SurvivalCurve {
            times: times.to_vec(),
            f_numeric,
            std_error,
            f_gauss,
            f_bessel,
            sigma0_sq: sigma0,
            sigma0_sq_measured,
            pair_count,
            fallback_members,
            failures,
        },
        strength,
    })
}
