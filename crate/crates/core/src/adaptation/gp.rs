//! Value domains of parameters and properties: DP atoms over the observed
//! values, each smoothed by a 1-D Gaussian process with constant mean and
//! squared-exponential kernel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dpmm::{collapsed_gibbs, GibbsSchedule, Item, MixtureSpec, Nig};
use crate::dsl::{ParamSpec, ParamValue};
use crate::scalar::{self, Scalar};

/// GP hyperparameters. `None` fields are filled from the data: the mean
/// with the empirical mean, the variance with the empirical variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpConfig<T> {
    pub mean: Option<T>,
    /// Length scale as a fraction of the observed value range.
    pub length_scale_frac: T,
    pub variance: Option<T>,
}

impl<T: Scalar> Default for GpConfig<T> {
    fn default() -> Self {
        GpConfig {
            mean: None,
            length_scale_frac: T::lit(0.1),
            variance: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gp<T> {
    pub mean: T,
    pub length_scale: T,
    pub variance: T,
}

impl<T: Scalar> Gp<T> {
    pub fn kernel(&self, a: T, b: T) -> T {
        let d = (a - b) / self.length_scale;
        self.variance * (-d * d / T::lit(2.0)).exp()
    }

    /// Posterior mean and latent variance at `x` given observations `ys` at
    /// `xs` with per-point noise variances.
    pub fn posterior(&self, xs: &[T], ys: &[T], noise: &[T], x: T) -> (T, T) {
        let n = xs.len();
        if n == 0 {
            return (self.mean, self.variance);
        }
        let mut k = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                k[i * n + j] = self.kernel(xs[i], xs[j]);
            }
            k[i * n + i] = k[i * n + i] + noise[i] + self.variance * T::lit(1e-10);
        }
        let l = cholesky(&k, n);
        let resid: Vec<T> = ys.iter().map(|&y| y - self.mean).collect();
        let alpha = chol_solve(&l, n, &resid);
        let ks: Vec<T> = xs.iter().map(|&xi| self.kernel(xi, x)).collect();
        let mean = self.mean + ks.iter().zip(&alpha).map(|(&a, &b)| a * b).sum::<T>();
        let v = forward(&l, n, &ks);
        let var = (self.kernel(x, x) - v.iter().map(|&a| a * a).sum::<T>()).max(T::zero());
        (mean, var)
    }
}

fn cholesky<T: Scalar>(a: &[T], n: usize) -> Vec<T> {
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s = s - l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = if i == j {
                s.max(T::min_positive_value()).sqrt()
            } else {
                s / l[j * n + j]
            };
        }
    }
    l
}

fn forward<T: Scalar>(l: &[T], n: usize, b: &[T]) -> Vec<T> {
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    y
}

fn chol_solve<T: Scalar>(l: &[T], n: usize, b: &[T]) -> Vec<T> {
    let y = forward(l, n, b);
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s = s - l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

/// One DP atom with its GP band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom<T> {
    pub count: usize,
    pub mean: T,
    pub sd: T,
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Atom<T> {
    /// A repeated exact value, or an atom whose band has no width.
    fn is_point(&self) -> bool {
        let eps = T::lit(1e-9) * T::one().max(self.mean.abs());
        (self.count > 1 && self.sd <= eps) || self.hi - self.lo <= eps
    }
}

/// Rounds `x` to the decade of the band half-width `2·sd`; exact when
/// `sd` is zero.
fn round_to_spread<T: Scalar>(x: T, sd: T) -> f64 {
    let x = x.to_f64_lossy();
    let sd = sd.to_f64_lossy();
    if !(sd > 0.0) {
        return x;
    }
    let res = 10f64.powf((2.0 * sd).log10().ceil());
    (x / res).round() * res
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecSettings<T> {
    pub alpha: T,
    pub gp: GpConfig<T>,
    pub schedule: GibbsSchedule,
    pub conv_tol: T,
    pub seed: u64,
}

/// GP length scale: a fraction of the observed range.
fn length_scale<T: Scalar>(values: &[T], s: &SpecSettings<T>) -> T {
    let lo = values.iter().copied().fold(T::infinity(), T::min);
    let hi = values.iter().copied().fold(T::neg_infinity(), T::max);
    if hi > lo {
        (hi - lo) * s.gp.length_scale_frac
    } else {
        T::one().max(lo.abs()) * s.gp.length_scale_frac
    }
}

/// Groups numeric values into DP atoms and attaches GP bands
/// `mean ± 2·sd`, where sd combines the GP posterior variance at the atom
/// with the atom's own spread.
pub fn atoms<T: Scalar>(values: &[T], s: &SpecSettings<T>) -> Vec<Atom<T>> {
    if values.is_empty() {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(T::infinity(), T::min);
    let hi = values.iter().copied().fold(T::neg_infinity(), T::max);
    let range = hi - lo;
    let ell = length_scale(values, s);
    let items: Vec<Item<T>> = values
        .iter()
        .map(|&v| Item {
            cats: vec![],
            nums: vec![Some(v)],
        })
        .collect();
    let spec = MixtureSpec {
        cat_sizes: vec![],
        nums: vec![Nig::weak(values, ell)],
        alpha: s.alpha,
        beta: T::one(),
    };
    let out = if range > T::zero() {
        collapsed_gibbs(
            &items,
            &spec,
            &s.schedule,
            s.conv_tol,
            &mut ChaCha8Rng::seed_from_u64(s.seed),
        )
        .assignments
    } else {
        vec![0; values.len()]
    };
    let k = out.iter().copied().max().map_or(0, |m| m + 1);
    let mut groups: Vec<Vec<T>> = vec![Vec::new(); k];
    for (&z, &v) in out.iter().zip(values) {
        groups[z].push(v);
    }
    let stats: Vec<(usize, T, T)> = groups
        .iter()
        .map(|g| {
            let m = scalar::mean(g).unwrap();
            let n = g.len();
            let ss: T = g.iter().map(|&x| (x - m) * (x - m)).sum();
            let sd = if n > 1 {
                (ss / T::from_usize_lossy(n - 1)).sqrt()
            } else {
                T::zero()
            };
            (n, m, sd)
        })
        .collect();
    let dof: usize = stats.iter().map(|s| s.0.saturating_sub(1)).sum();
    let pooled = if dof > 0 {
        stats
            .iter()
            .map(|&(n, _, sd)| T::from_usize_lossy(n.saturating_sub(1)) * sd * sd)
            .sum::<T>()
            / T::from_usize_lossy(dof)
    } else {
        T::zero()
    };
    let gp = Gp {
        mean: s.gp.mean.unwrap_or_else(|| scalar::mean(values).unwrap()),
        length_scale: ell,
        variance: s
            .gp
            .variance
            .unwrap_or_else(|| scalar::variance(values).unwrap())
            .max(T::lit(1e-12) * T::one().max(lo.abs())),
    };
    let xs: Vec<T> = stats.iter().map(|s| s.1).collect();
    let noise: Vec<T> = stats
        .iter()
        .map(|&(n, _, _)| pooled / T::from_usize_lossy(n))
        .collect();
    let mut atoms: Vec<Atom<T>> = stats
        .iter()
        .map(|&(count, mean, sd)| {
            let (mu, var) = if pooled > T::zero() {
                gp.posterior(&xs, &xs, &noise, mean)
            } else {
                (mean, T::zero())
            };
            let w = T::lit(2.0) * (var + sd * sd).sqrt();
            Atom {
                count,
                mean,
                sd,
                lo: mu - w,
                hi: mu + w,
            }
        })
        .collect();
    atoms.sort_by(|a, b| {
        a.mean
            .partial_cmp(&b.mean)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    atoms
}

/// Domain of one field from its observed values. Text anywhere gives a
/// discrete set. Numeric values: all atoms exact points give a discrete
/// set; spread atoms whose bands chain, with gaps of at most one length
/// scale, give a continuous interval; anything else gives a mixed domain
/// of rounded atom centres inside the hull of all bands. Intervals always
/// cover every observation.
pub fn induce_param_spec<T: Scalar>(
    values: &[ParamValue],
    unit: &str,
    s: &SpecSettings<T>,
) -> ParamSpec {
    let nums: Option<Vec<f64>> = values.iter().map(ParamValue::as_f64).collect();
    let Some(nums) = nums.filter(|n| !n.is_empty()) else {
        return ParamSpec::discrete(values.iter().cloned(), unit);
    };
    let vals: Vec<T> = nums.iter().map(|&x| T::lit(x)).collect();
    let atoms = atoms(&vals, s);
    if atoms.iter().all(Atom::is_point) {
        return ParamSpec::discrete(values.iter().cloned(), unit);
    }
    let obs_lo = nums.iter().copied().fold(f64::INFINITY, f64::min);
    let obs_hi = nums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let band_lo = atoms
        .iter()
        .map(|a| a.lo.to_f64_lossy())
        .fold(obs_lo, f64::min);
    let band_hi = atoms
        .iter()
        .map(|a| a.hi.to_f64_lossy())
        .fold(obs_hi, f64::max);
    // bands closer than one length scale are correlated under the kernel
    let ell = length_scale(&vals, s);
    let chained =
        atoms.iter().all(|a| !a.is_point()) && atoms.windows(2).all(|w| w[1].lo - w[0].hi <= ell);
    if chained {
        return ParamSpec::continuous(band_lo, band_hi, unit);
    }
    let centres = atoms
        .iter()
        .map(|a| ParamValue::number(round_to_spread(a.mean, a.sd)));
    ParamSpec::mixed(centres, band_lo, band_hi, unit)
}
