//! Phase vectors on the torus `𝕋ⁿ`, distances modulo a global phase, entrywise
//! normalization, and the quadratic objective `f(z) = z^H C z`.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::matrix::HermitianMatrix;
use crate::scalar::{dot_h, unit, Cx, Scalar};

/// Modulus tolerance enforced by [`PhaseVector::new`] (for `f64`).
pub const UNIT_MODULUS_TOL: f64 = 1e-12;

fn modulus_tol<T: Scalar>() -> T {
    T::of(UNIT_MODULUS_TOL).max(T::epsilon() * T::of(16.0))
}

/// Complex vector whose entries all have unit modulus.
///
/// Serialized as a list of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[T; 2]>", into = "Vec<[T; 2]>")]
#[serde(bound = "T: Scalar")]
pub struct PhaseVector<T: Scalar> {
    entries: Vec<Cx<T>>,
}

impl<T: Scalar> PhaseVector<T> {
    /// Validates `n >= 1` and `| |z_j| - 1 | <= 1e-12` for every entry.
    pub fn new(entries: Vec<Cx<T>>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty);
        }
        let tol = modulus_tol::<T>();
        for (index, e) in entries.iter().enumerate() {
            let m = e.norm();
            if !((m - T::one()).abs() <= tol) {
                return Err(Error::NotUnitModulus {
                    index,
                    modulus: m.to_f64_lossy(),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn ones(n: usize) -> Self {
        assert!(n >= 1, "phase vector needs n >= 1");
        Self {
            entries: vec![Complex::new(T::one(), T::zero()); n],
        }
    }

    pub fn from_angles(angles: &[T]) -> Result<Self> {
        Self::new(angles.iter().map(|&a| unit(a)).collect())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_slice(&self) -> &[Cx<T>] {
        &self.entries
    }

    pub fn into_inner(self) -> Vec<Cx<T>> {
        self.entries
    }

    /// `e^{iθ} z`
    pub fn rotated(&self, theta: T) -> Self {
        let r = unit(theta);
        Self {
            entries: self.entries.iter().map(|e| e * r).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> PhaseVector<U> {
        let entries: Vec<Cx<U>> = self
            .entries
            .iter()
            .map(|e| Complex::new(U::of(e.re.to_f64_lossy()), U::of(e.im.to_f64_lossy())))
            .collect();
        // re-normalize so the narrower type still meets its own modulus tolerance
        PhaseVector {
            entries: entries.iter().map(|e| e / e.norm()).collect(),
        }
    }
}

impl<T: Scalar> TryFrom<Vec<[T; 2]>> for PhaseVector<T> {
    type Error = Error;

    fn try_from(v: Vec<[T; 2]>) -> Result<Self> {
        Self::new(v.into_iter().map(|[re, im]| Complex::new(re, im)).collect())
    }
}

impl<T: Scalar> From<PhaseVector<T>> for Vec<[T; 2]> {
    fn from(p: PhaseVector<T>) -> Self {
        p.entries.into_iter().map(|e| [e.re, e.im]).collect()
    }
}

impl<T: Scalar> std::ops::Index<usize> for PhaseVector<T> {
    type Output = Cx<T>;

    fn index(&self, j: usize) -> &Cx<T> {
        &self.entries[j]
    }
}

/// Result of minimizing `‖w − e^{iθ}z‖_q` over the global phase θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuotientDistance<T> {
    pub value: T,
    /// Minimizer in `[0, 2π)`.
    pub minimizing_theta: T,
}

fn wrap_angle<T: Scalar>(theta: T) -> T {
    let tau = T::TAU();
    let r = theta % tau;
    let r = if r < T::zero() { r + tau } else { r };
    if r >= tau {
        T::zero()
    } else {
        r
    }
}

fn check_pair<T: Scalar>(w: &[Cx<T>], z: &[Cx<T>]) -> Result<()> {
    if z.is_empty() {
        return Err(Error::Empty);
    }
    check_dims(z.len(), w.len())
}

/// `‖w − e^{iθ}z‖₂` at a fixed angle.
pub fn phase_residual_l2<T: Scalar>(w: &[Cx<T>], z: &[Cx<T>], theta: T) -> T {
    let r = unit(theta);
    w.iter()
        .zip(z)
        .map(|(a, b)| (a - r * b).norm_sqr())
        .sum::<T>()
        .sqrt()
}

/// `max_j |w_j − e^{iθ}z_j|` at a fixed angle.
pub fn phase_residual_linf<T: Scalar>(w: &[Cx<T>], z: &[Cx<T>], theta: T) -> T {
    linf_at(w, z, unit(theta))
}

#[inline]
fn linf_at<T: Scalar>(w: &[Cx<T>], z: &[Cx<T>], r: Cx<T>) -> T {
    w.iter()
        .zip(z)
        .map(|(a, b)| (a - r * b).norm_sqr())
        .fold(T::zero(), T::max)
        .sqrt()
}

/// `d₂(w, z) = min_θ ‖w − e^{iθ}z‖₂`.
///
/// The minimizer is `θ = arg(z^H w)` (0 when `z^H w = 0`). The value is the
/// residual evaluated at that angle, which equals
/// `√(‖w‖² + ‖z‖² − 2|z^H w|)` but does not cancel catastrophically when the
/// two vectors are close.
pub fn dist_l2<T: Scalar>(w: &[Cx<T>], z: &[Cx<T>]) -> Result<QuotientDistance<T>> {
    check_pair(w, z)?;
    let ip = dot_h(z, w);
    let theta = if ip.norm_sqr() == T::zero() {
        T::zero()
    } else {
        wrap_angle(ip.arg())
    };
    Ok(QuotientDistance {
        value: phase_residual_l2(w, z, theta),
        minimizing_theta: theta,
    })
}

/// Search parameters for [`dist_linf_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinfSearch<T> {
    /// Number of equispaced angles in the coarse scan.
    pub grid: usize,
    /// Golden-section refinement stops once the bracket is this narrow.
    pub interval_tol: T,
}

impl<T: Scalar> Default for LinfSearch<T> {
    fn default() -> Self {
        Self {
            grid: 4096,
            interval_tol: T::of(1e-12),
        }
    }
}

/// `d∞(w, z)` with the default search parameters.
pub fn dist_linf<T: Scalar>(w: &[Cx<T>], z: &[Cx<T>]) -> Result<QuotientDistance<T>> {
    dist_linf_with(w, z, &LinfSearch::default())
}

/// `d∞(w, z) = min_θ max_j |w_j − e^{iθ}z_j|`.
///
/// The objective is Lipschitz in θ with constant `L = max_j |z_j|`, so after
/// the coarse scan (spacing `h`) the global minimizer is bracketed by some
/// grid point whose value is within `L·h` of the best grid value. Every such
/// grid-local minimum is refined by golden-section search on `[θ_i − h, θ_i + h]`.
pub fn dist_linf_with<T: Scalar>(
    w: &[Cx<T>],
    z: &[Cx<T>],
    search: &LinfSearch<T>,
) -> Result<QuotientDistance<T>> {
    check_pair(w, z)?;
    if search.grid < 3 {
        return Err(Error::InvalidConfig(
            "d∞ grid needs at least 3 points".into(),
        ));
    }
    let g = search.grid;
    let h = T::TAU() / T::of_usize(g);
    let vals: Vec<T> = (0..g)
        .map(|i| linf_at(w, z, unit(h * T::of_usize(i))))
        .collect();
    let best = vals.iter().copied().fold(T::infinity(), T::min);
    let lip = z.iter().map(|b| b.norm()).fold(T::zero(), T::max);
    let cutoff = best + lip * h;

    let mut candidates: Vec<usize> = (0..g)
        .filter(|&i| {
            let prev = vals[(i + g - 1) % g];
            let next = vals[(i + 1) % g];
            vals[i] <= cutoff && vals[i] <= prev && vals[i] <= next
        })
        .collect();
    candidates.sort_by(|&a, &b| {
        vals[a]
            .partial_cmp(&vals[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    // a flat objective makes every grid point a candidate; any of them is optimal
    candidates.truncate(16);

    let mut out = QuotientDistance {
        value: best,
        minimizing_theta: h * T::of_usize(vals.iter().position(|&v| v == best).unwrap_or(0)),
    };
    let f = |t: T| linf_at(w, z, unit(t));
    for i in candidates {
        let centre = h * T::of_usize(i);
        let (t, v) = golden_section(f, centre - h, centre + h, search.interval_tol);
        if v < out.value {
            out = QuotientDistance {
                value: v,
                minimizing_theta: wrap_angle(t),
            };
        }
    }
    Ok(out)
}

fn golden_section<T: Scalar>(f: impl Fn(T) -> T, mut a: T, mut b: T, tol: T) -> (T, T) {
    let inv_phi = T::of((5f64.sqrt() - 1.0) / 2.0);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = f(c);
    let mut fd = f(d);
    let mut guard = 0;
    while (b - a) > tol && guard < 200 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
        guard += 1;
    }
    let m = (a + b) / T::two();
    let fm = f(m);
    [(c, fc), (d, fd), (m, fm)]
        .into_iter()
        .fold((m, fm), |acc, p| if p.1 < acc.1 { p } else { acc })
}

/// Plain vector norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    L1,
    L2,
    Linf,
}

pub fn norm<T: Scalar>(v: &[Cx<T>], q: Norm) -> T {
    match q {
        Norm::L1 => v.iter().map(|x| x.norm()).sum(),
        Norm::L2 => v.iter().map(|x| x.norm_sqr()).sum::<T>().sqrt(),
        Norm::Linf => v.iter().map(|x| x.norm()).fold(T::zero(), T::max),
    }
}

/// `‖a − b‖_q`
pub fn diff_norm<T: Scalar>(a: &[Cx<T>], b: &[Cx<T>], q: Norm) -> T {
    let d: Vec<Cx<T>> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d, q)
}

/// How zero entries are mapped back onto the unit circle by
/// [`normalize_entrywise`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "policy")]
pub enum ZeroPolicy {
    /// `0 → 1`
    #[default]
    UnitOne,
    /// Reuse the corresponding entry of the previous phase vector.
    PreviousIterate,
    /// A seeded pseudo-random phase, fixed per (seed, index).
    RandomUnit { seed: u64 },
}

/// A [`ZeroPolicy`] bound to the data it needs.
#[derive(Debug, Clone, Copy)]
pub enum ZeroFill<'a, T: Scalar> {
    UnitOne,
    Previous(&'a PhaseVector<T>),
    RandomUnit(u64),
}

impl<'a, T: Scalar> ZeroFill<'a, T> {
    /// Binds `policy`; `PreviousIterate` without a previous vector degrades to `UnitOne`.
    pub fn bind(policy: ZeroPolicy, previous: Option<&'a PhaseVector<T>>) -> Self {
        match (policy, previous) {
            (ZeroPolicy::PreviousIterate, Some(p)) => ZeroFill::Previous(p),
            (ZeroPolicy::PreviousIterate, None) | (ZeroPolicy::UnitOne, _) => ZeroFill::UnitOne,
            (ZeroPolicy::RandomUnit { seed }, _) => ZeroFill::RandomUnit(seed),
        }
    }

    fn value(&self, j: usize) -> Cx<T> {
        match self {
            ZeroFill::UnitOne => Complex::new(T::one(), T::zero()),
            ZeroFill::Previous(p) => p[j],
            ZeroFill::RandomUnit(seed) => {
                let mut rng = SplitMix64::seed_from_u64(
                    seed ^ (j as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                );
                let phi: f64 = rng.random::<f64>() * std::f64::consts::TAU;
                unit(T::of(phi))
            }
        }
    }
}

/// `(w/|w|)_j = w_j/|w_j|`, with zero entries supplied by `fill`.
pub fn normalize_entrywise<T: Scalar>(
    w: &[Cx<T>],
    fill: ZeroFill<'_, T>,
) -> Result<PhaseVector<T>> {
    if w.is_empty() {
        return Err(Error::Empty);
    }
    if let ZeroFill::Previous(p) = fill {
        check_dims(w.len(), p.len())?;
    }
    let entries = w
        .iter()
        .enumerate()
        .map(|(j, x)| {
            let m = x.norm();
            if m > T::zero() {
                x / m
            } else {
                fill.value(j)
            }
        })
        .collect();
    Ok(PhaseVector { entries })
}

/// Imaginary-part tolerance for a Hermitian quadratic form of size `n`.
fn imag_tol<T: Scalar>(n: usize) -> T {
    let nn = T::of_usize(n);
    nn * T::of(1e-9).max(nn * T::epsilon())
}

/// `f(z) = z^H C z`, which is real for Hermitian `C`.
pub fn objective<T: Scalar>(c: &HermitianMatrix<T>, z: &PhaseVector<T>) -> Result<T> {
    quadratic_form(c, z.as_slice())
}

/// `Re(x^H C x)` for any complex `x`; errors if the imaginary part is not negligible.
pub fn quadratic_form<T: Scalar>(c: &HermitianMatrix<T>, x: &[Cx<T>]) -> Result<T> {
    let cx = c.matvec(x)?;
    let v = dot_h(x, &cx);
    if v.im.abs()
        > imag_tol::<T>(x.len()) * (T::one() + v.re.abs() / T::of_usize(x.len() * x.len()))
    {
        return Err(Error::NonRealObjective {
            imag: v.im.to_f64_lossy(),
        });
    }
    Ok(v.re)
}

/// `f(a) − f(b)` evaluated as `Re((a − b)^H C (a + b))`, accurate even when
/// `a ≈ b`, where subtracting two separately rounded objective values is not.
pub fn objective_gain<T: Scalar>(c: &HermitianMatrix<T>, a: &[Cx<T>], b: &[Cx<T>]) -> Result<T> {
    check_dims(a.len(), b.len())?;
    let diff: Vec<Cx<T>> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let sum: Vec<Cx<T>> = a.iter().zip(b).map(|(x, y)| x + y).collect();
    let cs = c.matvec(&sum)?;
    Ok(dot_h(&diff, &cs).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2, TAU};

    fn c(re: f64, im: f64) -> Cx<f64> {
        Complex::new(re, im)
    }

    fn grid_oracle_l2(w: &[Cx<f64>], z: &[Cx<f64>], points: usize) -> f64 {
        (0..points)
            .map(|i| phase_residual_l2(w, z, TAU * i as f64 / points as f64))
            .fold(f64::INFINITY, f64::min)
    }

    fn grid_oracle_linf(w: &[Cx<f64>], z: &[Cx<f64>], points: usize) -> f64 {
        (0..points)
            .map(|i| phase_residual_linf(w, z, TAU * i as f64 / points as f64))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn phase_vector_validates_modulus_and_length() {
        assert!(matches!(PhaseVector::<f64>::new(vec![]), Err(Error::Empty)));
        assert!(matches!(
            PhaseVector::new(vec![c(1.0, 0.0), c(0.5, 0.0)]),
            Err(Error::NotUnitModulus { index: 1, .. })
        ));
        assert!(PhaseVector::new(vec![c(0.0, 1.0), c(-1.0, 0.0)]).is_ok());
    }

    #[test]
    fn dist_l2_of_orthogonal_pair() {
        // the 1e6-point grid oracle gives 2.0 to within its resolution
        let w = [c(1.0, 0.0), c(1.0, 0.0)];
        let z = [c(1.0, 0.0), c(-1.0, 0.0)];
        let oracle = grid_oracle_l2(&w, &z, 1_000_000);
        assert!((oracle - 2.0).abs() < 1e-10);
        let d = dist_l2(&w, &z).unwrap();
        assert!((d.value - 2.0).abs() < 1e-14);
        assert_eq!(d.minimizing_theta, 0.0);
    }

    #[test]
    fn dist_l2_identity_and_global_phase() {
        let z = PhaseVector::<f64>::from_angles(&[0.3, -1.2, 2.9, 0.0]).unwrap();
        assert_eq!(dist_l2(z.as_slice(), z.as_slice()).unwrap().value, 0.0);
        for theta in [0.1, 1.0, PI, 5.5] {
            let d = dist_l2(z.rotated(theta).as_slice(), z.as_slice()).unwrap();
            assert!(d.value < 1e-14);
            assert!((d.minimizing_theta - theta).abs() < 1e-12);
        }
    }

    #[test]
    fn dist_errors() {
        let a = [c(1.0, 0.0)];
        let b = [c(1.0, 0.0), c(1.0, 0.0)];
        assert!(matches!(
            dist_l2(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            dist_linf(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(dist_l2::<f64>(&[], &[]), Err(Error::Empty)));
    }

    #[test]
    fn dist_linf_of_orthogonal_pair() {
        let w = [c(1.0, 0.0), c(1.0, 0.0)];
        let z = [c(1.0, 0.0), c(-1.0, 0.0)];
        let oracle = grid_oracle_linf(&w, &z, 1_000_000);
        assert!((oracle - SQRT_2).abs() < 1e-10);
        let d = dist_linf(&w, &z).unwrap();
        assert!((d.value - SQRT_2).abs() < 1e-10);
    }

    #[test]
    fn dist_linf_identity_and_global_phase() {
        let z = PhaseVector::<f64>::from_angles(&[0.3, -1.2, 2.9, 0.0, 1.7]).unwrap();
        assert!(dist_linf(z.as_slice(), z.as_slice()).unwrap().value < 1e-10);
        for theta in [0.05, 2.0, 4.4] {
            assert!(
                dist_linf(z.rotated(theta).as_slice(), z.as_slice())
                    .unwrap()
                    .value
                    < 1e-10
            );
        }
    }

    #[test]
    fn normalize_examples() {
        let v = normalize_entrywise(&[c(2.0, 0.0), c(0.0, -3.0)], ZeroFill::UnitOne).unwrap();
        assert_eq!(v.as_slice(), &[c(1.0, 0.0), c(0.0, -1.0)]);

        let prev = PhaseVector::new(vec![c(0.0, 1.0), c(1.0, 0.0)]).unwrap();
        let v =
            normalize_entrywise(&[c(0.0, 0.0), c(5.0, 0.0)], ZeroFill::Previous(&prev)).unwrap();
        assert_eq!(v.as_slice(), &[c(0.0, 1.0), c(1.0, 0.0)]);

        let v = normalize_entrywise(&[c(0.0, 0.0), c(5.0, 0.0)], ZeroFill::UnitOne).unwrap();
        assert_eq!(v[0], c(1.0, 0.0));

        let a = normalize_entrywise(&[c(0.0, 0.0); 3], ZeroFill::RandomUnit(7)).unwrap();
        let b = normalize_entrywise(&[c(0.0, 0.0); 3], ZeroFill::RandomUnit(7)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn normalize_rejects_mismatched_previous() {
        let prev = PhaseVector::<f64>::ones(3);
        assert!(normalize_entrywise(&[c(1.0, 0.0); 2], ZeroFill::Previous(&prev)).is_err());
    }

    #[test]
    fn objective_examples() {
        let z = PhaseVector::<f64>::from_angles(&[0.4, 1.1, -2.0, 3.0, 0.2]).unwrap();
        let rank_one = HermitianMatrix::outer(z.as_slice());
        assert!((objective(&rank_one, &z).unwrap() - 25.0).abs() < 1e-12);
        let id = HermitianMatrix::<f64>::identity(5);
        assert!((objective(&id, &z).unwrap() - 5.0).abs() < 1e-12);
        let z4 = PhaseVector::<f64>::ones(4);
        assert!(objective(&id, &z4).is_err());
    }

    #[test]
    fn objective_matches_naive_double_sum() {
        let cm = HermitianMatrix::<f64>::from_upper(4, |j, l| {
            c(
                (j as f64 * 0.7 - l as f64).sin(),
                if j == l {
                    0.0
                } else {
                    (j + 3 * l) as f64 * 0.31
                },
            )
        });
        let z = PhaseVector::<f64>::from_angles(&[0.9, -0.4, 2.2, 1.3]).unwrap();
        let mut naive = c(0.0, 0.0);
        for j in 0..4 {
            for l in 0..4 {
                naive += z[j].conj() * cm[(j, l)] * z[l];
            }
        }
        assert!(naive.im.abs() < 1e-12);
        assert!((objective(&cm, &z).unwrap() - naive.re).abs() < 1e-12);
    }

    #[test]
    fn objective_gain_agrees_with_difference() {
        let cm = HermitianMatrix::<f64>::from_upper(3, |j, l| {
            c(1.0 + (j * l) as f64, (l as f64 - j as f64) * 0.5)
        });
        let a = PhaseVector::<f64>::from_angles(&[0.1, 0.2, 0.3]).unwrap();
        let b = PhaseVector::<f64>::from_angles(&[0.5, -0.2, 1.3]).unwrap();
        let gain = objective_gain(&cm, a.as_slice(), b.as_slice()).unwrap();
        let diff = objective(&cm, &a).unwrap() - objective(&cm, &b).unwrap();
        assert!((gain - diff).abs() < 1e-12);
    }

    #[test]
    fn single_precision_works() {
        let z = PhaseVector::<f32>::from_angles(&[0.3, 1.0, 2.0]).unwrap();
        let d = dist_l2(z.rotated(0.7).as_slice(), z.as_slice()).unwrap();
        assert!(d.value < 1e-5);
        let d = dist_linf(z.rotated(0.7).as_slice(), z.as_slice()).unwrap();
        assert!(d.value < 1e-5);
    }
}
