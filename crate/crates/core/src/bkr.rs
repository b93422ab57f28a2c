//! The dependency decomposition of `W = Σ X_j` for subgraph counts, the
//! process `H_t`, and the quantities `A`, `B` and `ε` built from it.
//!
//! For copy `j` let `N̄_j` be the copies sharing an edge with `j`, `j`
//! included. Then `Z_j = Σ_{k∈N̄_j} X_k`, `Z_jk = X_k`,
//! `V_jk = Σ_{l∈N̄_k∖N̄_j} X_l`, `W_j = W − Z_j`, `W_jk = W_j − V_jk`.
//! `U_jk = Z_j + V_jk` is the sum over `N̄_j ∪ N̄_k`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copies::{sorted_union, CopyIndex, EdgeConfiguration};
use crate::error::{Error, Result};
use crate::exact::{ExactModel, OracleOptions};
use crate::model::SubgraphModel;
use crate::numeric::{CompensatedSum, ComplexSum, DoubleDouble};
use crate::rng::{replicate_rng, GnpSampler};
use crate::stein::ode_range;

const I: Complex64 = Complex64::new(0.0, 1.0);

const INV_FACT: [f64; 4] = [1.0, 1.0, 0.5, 1.0 / 6.0];

/// `R_l(z) = Σ_{m≥0} (iz)^m / (m + l)!` for `l ∈ {1, 2, 3}`.
pub fn r_l(z: f64, l: u32) -> Result<Complex64> {
    if !(1..=3).contains(&l) {
        return Err(Error::InvalidArgument(format!("R_l needs l in 1..=3, got {l}")));
    }
    Ok(r_l_unchecked(z, l))
}

#[inline]
fn r_l_unchecked(z: f64, l: u32) -> Complex64 {
    if z == 0.0 {
        return Complex64::new(INV_FACT[l as usize], 0.0);
    }
    if z.abs() < 0.5 {
        // 24 terms: the tail is below 0.5^24 / 24! < 1e-30
        let iz = I * z;
        let mut term = Complex64::new(1.0, 0.0);
        let mut fact = (1..=l).product::<u32>() as f64;
        let mut sum = Complex64::new(0.0, 0.0);
        for m in 0..24u32 {
            sum += term / fact;
            term *= iz;
            fact *= (m + l + 1) as f64;
        }
        return sum;
    }
    let iz = I * z;
    let e = Complex64::from_polar(1.0, z);
    match l {
        1 => (e - 1.0) / iz,
        2 => (1.0 + iz - e) / (z * z),
        _ => r3_closed(z),
    }
}

#[inline]
fn r1(z: f64) -> Complex64 {
    r_l_unchecked(z, 1)
}

#[inline]
fn r2(z: f64) -> Complex64 {
    r_l_unchecked(z, 2)
}

/// `|e^{iz} − Σ_{m<l} (iz)^m/m! − (iz)^l R_l(z)|`.
///
/// The polynomial and the product are formed in double-double arithmetic so
/// the residual reflects the accuracy of `R_l` rather than cancellation
/// among terms of size `|z|^l`.
pub fn taylor_residual(z: f64, l: u32) -> Result<f64> {
    let r = r_l(z, l)?;
    let zd = DoubleDouble::new(z);
    // (iz)^m = i^m z^m; accumulate real and imaginary parts separately
    let mut re = DoubleDouble::new(z.cos()).sub(DoubleDouble::new(1.0));
    let mut im = DoubleDouble::new(z.sin());
    let mut zpow = DoubleDouble::new(1.0);
    for m in 1..=l {
        zpow = zpow.mul(zd);
        let (c_re, c_im) = match m % 4 {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
        if m < l {
            let term = zpow.mul(DoubleDouble::new(INV_FACT[m as usize]));
            re = re.sub(term.mul(DoubleDouble::new(c_re)));
            im = im.sub(term.mul(DoubleDouble::new(c_im)));
        } else {
            // (c_re + i c_im) z^l (r.re + i r.im)
            let a = zpow.mul(DoubleDouble::new(r.re));
            let b = zpow.mul(DoubleDouble::new(r.im));
            re = re.sub(a.mul(DoubleDouble::new(c_re)).sub(b.mul(DoubleDouble::new(c_im))));
            im = im.sub(a.mul(DoubleDouble::new(c_im)).add(b.mul(DoubleDouble::new(c_re))));
        }
    }
    Ok(re.value().hypot(im.value()))
}

/// `R_3` away from the origin with the numerator and `z³` in double-double.
fn r3_closed(z: f64) -> Complex64 {
    let zd = DoubleDouble::new(z);
    let z2 = zd.mul(zd);
    let z3 = z2.mul(zd);
    // numerator e^{iz} − 1 − iz + z²/2
    let num_re = DoubleDouble::new(z.cos())
        .sub(DoubleDouble::new(1.0))
        .add(z2.mul(DoubleDouble::new(0.5)));
    let num_im = DoubleDouble::new(z.sin()).sub(zd);
    // divide by (iz)³ = −i z³: (a + ib) / (−i z³) = (−b + ia) / z³
    Complex64::new(num_im.neg().div(z3).value(), num_re.div(z3).value())
}

/// The decomposition of one model, with every `E[X_j X_k]` precomputed.
#[derive(Debug, Clone)]
pub struct Decomposition<'a> {
    index: &'a CopyIndex,
    q: f64,
    sigma: f64,
    closed_offsets: Vec<usize>,
    closed: Vec<u32>,
    /// slot -> (j, k) for k ∈ N̄_j, slots grouped by j
    slot_j: Vec<u32>,
    slot_k: Vec<u32>,
    slot_c: Vec<f64>,
    slot_abs_c: Vec<f64>,
    inter_offsets: Vec<usize>,
    inter: Vec<u32>,
}

/// All decomposition variables for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    /// `U_jk = Z_j + V_jk` per slot
    pub u: Vec<f64>,
    pub w: f64,
}

/// The three sums whose variances make up `B(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BTerms {
    /// `Σ_j X_j Z_j² R₂(−t Z_j)`
    pub first: Complex64,
    /// `Σ_j Σ_{k∈N̄_j} X_j X_k U_jk R₁(−t U_jk)`
    pub second: Complex64,
    /// `Σ_j Σ_{k∈N̄_j} E[X_j X_k] U_jk R₁(−t U_jk)`
    pub third: Complex64,
}

impl BTerms {
    /// `H_t = i (first − second + third)`.
    pub fn h(&self) -> Complex64 {
        I * (self.first - self.second + self.third)
    }
}

impl<'a> Decomposition<'a> {
    pub fn new(index: &'a CopyIndex, model: &SubgraphModel) -> Result<Self> {
        model.require_variance()?;
        if index.n() != model.n || index.pattern() != &model.pattern {
            return Err(Error::InvalidArgument("copy index and model disagree".into()));
        }
        let nj = index.len();
        let p = model.p;
        let e = model.edges() as i32;
        let q = p.powi(e);
        let var = model.variance;

        let closed_lists: Vec<Vec<u32>> = (0..nj).map(|j| index.closed_neighbors(j)).collect();
        let mut closed_offsets = Vec::with_capacity(nj + 1);
        closed_offsets.push(0);
        let mut closed = Vec::new();
        for l in &closed_lists {
            closed.extend_from_slice(l);
            closed_offsets.push(closed.len());
        }

        let mut slot_j = Vec::with_capacity(closed.len());
        let mut slot_k = Vec::with_capacity(closed.len());
        let mut slot_c = Vec::with_capacity(closed.len());
        let mut slot_abs_c = Vec::with_capacity(closed.len());
        let mut inter_offsets = vec![0];
        let mut inter = Vec::new();
        for j in 0..nj {
            for &k in &closed_lists[j] {
                let s = index.overlap(j, k as usize) as i32;
                let p11 = p.powi(2 * e - s);
                slot_j.push(j as u32);
                slot_k.push(k);
                slot_c.push((p11 - q * q) / var);
                let abs = if j == k as usize {
                    q * (1.0 - q)
                } else {
                    let p10 = q - p11;
                    let p00 = 1.0 - 2.0 * q + p11;
                    p11 * (1.0 - q).powi(2) + 2.0 * p10 * q * (1.0 - q) + p00 * q * q
                };
                slot_abs_c.push(abs / var);
                inter.extend(intersect(&closed_lists[j], &closed_lists[k as usize]));
                inter_offsets.push(inter.len());
            }
        }
        Ok(Self {
            index,
            q,
            sigma: model.sigma,
            closed_offsets,
            closed,
            slot_j,
            slot_k,
            slot_c,
            slot_abs_c,
            inter_offsets,
            inter,
        })
    }

    pub fn index(&self) -> &CopyIndex {
        self.index
    }

    pub fn copies(&self) -> usize {
        self.index.len()
    }

    pub fn slots(&self) -> usize {
        self.slot_k.len()
    }

    /// `N̄_j`.
    pub fn closed_neighbors(&self, j: usize) -> &[u32] {
        &self.closed[self.closed_offsets[j]..self.closed_offsets[j + 1]]
    }

    /// Slot range belonging to copy `j`.
    pub fn slots_of(&self, j: usize) -> std::ops::Range<usize> {
        self.closed_offsets[j]..self.closed_offsets[j + 1]
    }

    pub fn slot_pair(&self, slot: usize) -> (usize, usize) {
        (self.slot_j[slot] as usize, self.slot_k[slot] as usize)
    }

    /// `E[X_j X_k]` for a slot.
    pub fn pair_covariance(&self, slot: usize) -> f64 {
        self.slot_c[slot]
    }

    /// `E|X_j X_k|` for a slot.
    pub fn pair_abs_moment(&self, slot: usize) -> f64 {
        self.slot_abs_c[slot]
    }

    /// Copies summed in `V_jk`: `N̄_k ∖ N̄_j`.
    pub fn v_members(&self, slot: usize) -> Vec<u32> {
        let (j, k) = self.slot_pair(slot);
        let nj = self.closed_neighbors(j);
        self.closed_neighbors(k)
            .iter()
            .copied()
            .filter(|l| nj.binary_search(l).is_err())
            .collect()
    }

    /// Copies summed in `U_jk`: `N̄_j ∪ N̄_k`.
    pub fn u_members(&self, slot: usize) -> Vec<u32> {
        let (j, k) = self.slot_pair(slot);
        sorted_union(self.closed_neighbors(j), self.closed_neighbors(k))
    }

    /// State from the indicator values `Y_j`.
    pub fn state_from_y(&self, y: impl Fn(usize) -> bool) -> DecompState {
        let nj = self.copies();
        let x: Vec<f64> = (0..nj)
            .map(|j| (f64::from(u8::from(y(j))) - self.q) / self.sigma)
            .collect();
        self.state_from_x(x)
    }

    pub fn state_from_config(&self, config: &EdgeConfiguration) -> DecompState {
        self.state_from_y(|j| config.contains_all(self.index.copy(j)))
    }

    fn state_from_x(&self, x: Vec<f64>) -> DecompState {
        let nj = self.copies();
        let w = x.iter().copied().collect::<CompensatedSum>().value();
        let z: Vec<f64> = (0..nj)
            .map(|j| self.closed_neighbors(j).iter().map(|&k| x[k as usize]).sum())
            .collect();
        let u = (0..self.slots())
            .map(|s| {
                let (j, k) = self.slot_pair(s);
                let shared: f64 = self.inter[self.inter_offsets[s]..self.inter_offsets[s + 1]]
                    .iter()
                    .map(|&l| x[l as usize])
                    .sum();
                z[j] + z[k] - shared
            })
            .collect();
        DecompState { x, z, u, w }
    }

    pub fn b_terms(&self, st: &DecompState, t: f64) -> BTerms {
        let mut first = Complex64::new(0.0, 0.0);
        for j in 0..self.copies() {
            let z = st.z[j];
            first += st.x[j] * z * z * r2(-t * z);
        }
        let mut second = Complex64::new(0.0, 0.0);
        let mut third = Complex64::new(0.0, 0.0);
        for s in 0..self.slots() {
            let (j, k) = self.slot_pair(s);
            let u = st.u[s];
            let ur = u * r1(-t * u);
            second += st.x[j] * st.x[k] * ur;
            third += self.slot_c[s] * ur;
        }
        BTerms {
            first,
            second,
            third,
        }
    }

    /// `H_t` for one configuration.
    pub fn h_t(&self, st: &DecompState, t: f64) -> Complex64 {
        self.b_terms(st, t).h()
    }

    /// The three sums with `R₂ ↦ 1/2`, `R₁ ↦ 1`.
    pub fn majorant_terms(&self, st: &DecompState) -> [f64; 3] {
        let first: f64 = (0..self.copies())
            .map(|j| 0.5 * st.x[j] * st.z[j] * st.z[j])
            .sum();
        let mut second = 0.0;
        let mut third = 0.0;
        for s in 0..self.slots() {
            let (j, k) = self.slot_pair(s);
            second += st.x[j] * st.x[k] * st.u[s];
            third += self.slot_c[s] * st.u[s];
        }
        [first, second, third]
    }

    /// Integrand of `A`:
    /// `½ Σ |X_j| Z_j² + Σ_{j,k} (|X_j X_k U_jk| + E|X_j X_k| |U_jk|)`.
    pub fn a_integrand(&self, st: &DecompState) -> f64 {
        let mut s = CompensatedSum::new();
        for j in 0..self.copies() {
            s.add(0.5 * st.x[j].abs() * st.z[j] * st.z[j]);
        }
        for slot in 0..self.slots() {
            let (j, k) = self.slot_pair(slot);
            let u = st.u[slot].abs();
            s.add((st.x[j] * st.x[k]).abs() * u + self.slot_abs_c[slot] * u);
        }
        s.value()
    }

    /// Integrand of `ε`: as [`Decomposition::a_integrand`] with `|X_j X_k V_jk|`
    /// in place of `|X_j X_k U_jk|`.
    pub fn epsilon_integrand(&self, st: &DecompState) -> f64 {
        let mut s = CompensatedSum::new();
        for j in 0..self.copies() {
            s.add(0.5 * st.x[j].abs() * st.z[j] * st.z[j]);
        }
        for slot in 0..self.slots() {
            let (j, k) = self.slot_pair(slot);
            let v = st.u[slot] - st.z[j];
            s.add((st.x[j] * st.x[k] * v).abs() + self.slot_abs_c[slot] * st.u[slot].abs());
        }
        s.value()
    }

    /// Residual of `½W³ − W = iH₀ + ½ Σ X_j W_j² + Σ_{j,k} (X_j X_k − E[X_j X_k]) W_jk`.
    pub fn w3_identity_residual(&self, st: &DecompState) -> f64 {
        let w = st.w;
        let lhs = 0.5 * w * w * w - w;
        let i_h0 = I * self.h_t(st, 0.0);
        let mut rhs = CompensatedSum::new();
        rhs.add(i_h0.re);
        for j in 0..self.copies() {
            let wj = w - st.z[j];
            rhs.add(0.5 * st.x[j] * wj * wj);
        }
        for s in 0..self.slots() {
            let (j, k) = self.slot_pair(s);
            rhs.add((st.x[j] * st.x[k] - self.slot_c[s]) * (w - st.u[s]));
        }
        (lhs - rhs.value()).abs().max(i_h0.im.abs())
    }
}

fn intersect(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Exact `H_t` moments at one `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HtMoments {
    pub t: f64,
    /// `E[H_t]`
    pub mean_h: Complex64,
    /// `E|H_t|`
    pub mean_abs_h: f64,
    /// `E[H_t e^{itW}]`
    pub h_cf: Complex64,
    /// `φ(t)`
    pub phi: Complex64,
    /// `E[(iW + t) e^{itW}]`
    pub lhs: Complex64,
    /// variances of the three [`BTerms`] sums
    pub b_variances: [f64; 3],
}

impl HtMoments {
    pub fn identity_residual(&self) -> f64 {
        (self.lhs - self.t * self.t * self.h_cf).norm()
    }

    /// `Cov(H_t, e^{−itW}) = E[H_t e^{itW}] − E[H_t] φ(t)`.
    pub fn covariance(&self) -> Complex64 {
        self.h_cf - self.mean_h * self.phi
    }

    /// `B(t)`: sum of the three standard deviations.
    pub fn b(&self) -> f64 {
        self.b_variances.iter().map(|v| v.max(0.0).sqrt()).sum()
    }
}

/// Everything the oracle computes about the decomposition in one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleAnalysis {
    pub a: f64,
    pub epsilon: f64,
    /// `E[W³]`, finite for every configuration space
    pub third_moment: f64,
    pub max_w3_residual: f64,
    pub majorant_variances: [f64; 3],
    pub per_t: Vec<HtMoments>,
}

impl OracleAnalysis {
    pub fn b_majorant(&self) -> f64 {
        self.majorant_variances.iter().map(|v| v.max(0.0).sqrt()).sum()
    }
}

#[derive(Clone, Copy)]
struct PerTAcc {
    mean_h: ComplexSum,
    abs_h: CompensatedSum,
    h_cf: ComplexSum,
    phi: ComplexSum,
    lhs: ComplexSum,
    b_mean: [ComplexSum; 3],
    b_sq: [CompensatedSum; 3],
}

impl PerTAcc {
    fn new() -> Self {
        Self {
            mean_h: ComplexSum::new(),
            abs_h: CompensatedSum::new(),
            h_cf: ComplexSum::new(),
            phi: ComplexSum::new(),
            lhs: ComplexSum::new(),
            b_mean: [ComplexSum::new(); 3],
            b_sq: [CompensatedSum::new(); 3],
        }
    }

    fn merge(&mut self, o: &PerTAcc) {
        self.mean_h.merge(&o.mean_h);
        self.abs_h.merge(&o.abs_h);
        self.h_cf.merge(&o.h_cf);
        self.phi.merge(&o.phi);
        self.lhs.merge(&o.lhs);
        for i in 0..3 {
            self.b_mean[i].merge(&o.b_mean[i]);
            self.b_sq[i].merge(&o.b_sq[i]);
        }
    }

    /// `w` is a probability weight or `1/m`.
    fn add(&mut self, dec: &Decomposition<'_>, st: &DecompState, t: f64, w: f64) {
        let terms = dec.b_terms(st, t);
        let h = terms.h();
        let e = Complex64::from_polar(1.0, t * st.w);
        self.mean_h.add(h * w);
        self.abs_h.add(h.norm() * w);
        self.h_cf.add(h * e * w);
        self.phi.add(e * w);
        self.lhs.add((I * st.w + t) * e * w);
        for (i, b) in [terms.first, terms.second, terms.third].into_iter().enumerate() {
            self.b_mean[i].add(b * w);
            self.b_sq[i].add(b.norm_sqr() * w);
        }
    }

    fn finish(&self, t: f64) -> HtMoments {
        let b_variances = [0, 1, 2].map(|i| {
            (self.b_sq[i].value() - self.b_mean[i].value().norm_sqr()).max(0.0)
        });
        HtMoments {
            t,
            mean_h: self.mean_h.value(),
            mean_abs_h: self.abs_h.value(),
            h_cf: self.h_cf.value(),
            phi: self.phi.value(),
            lhs: self.lhs.value(),
            b_variances,
        }
    }
}

#[derive(Clone)]
struct SweepAcc {
    a: CompensatedSum,
    eps: CompensatedSum,
    w3: CompensatedSum,
    max_res: f64,
    maj_mean: [CompensatedSum; 3],
    maj_sq: [CompensatedSum; 3],
    per_t: Vec<PerTAcc>,
}

impl SweepAcc {
    fn new(nt: usize) -> Self {
        Self {
            a: CompensatedSum::new(),
            eps: CompensatedSum::new(),
            w3: CompensatedSum::new(),
            max_res: 0.0,
            maj_mean: [CompensatedSum::new(); 3],
            maj_sq: [CompensatedSum::new(); 3],
            per_t: vec![PerTAcc::new(); nt],
        }
    }

    fn add(&mut self, dec: &Decomposition<'_>, st: &DecompState, ts: &[f64], w: f64) {
        self.a.add(dec.a_integrand(st) * w);
        self.eps.add(dec.epsilon_integrand(st) * w);
        self.w3.add(st.w.powi(3) * w);
        self.max_res = self.max_res.max(dec.w3_identity_residual(st));
        for (i, m) in dec.majorant_terms(st).into_iter().enumerate() {
            self.maj_mean[i].add(m * w);
            self.maj_sq[i].add(m * m * w);
        }
        for (acc, &t) in self.per_t.iter_mut().zip(ts) {
            acc.add(dec, st, t, w);
        }
    }

    fn merge(&mut self, o: &SweepAcc) {
        self.a.merge(&o.a);
        self.eps.merge(&o.eps);
        self.w3.merge(&o.w3);
        self.max_res = self.max_res.max(o.max_res);
        for i in 0..3 {
            self.maj_mean[i].merge(&o.maj_mean[i]);
            self.maj_sq[i].merge(&o.maj_sq[i]);
        }
        for (a, b) in self.per_t.iter_mut().zip(&o.per_t) {
            a.merge(b);
        }
    }

    fn finish(&self, ts: &[f64]) -> OracleAnalysis {
        OracleAnalysis {
            a: self.a.value(),
            epsilon: self.eps.value(),
            third_moment: self.w3.value(),
            max_w3_residual: self.max_res,
            majorant_variances: [0, 1, 2]
                .map(|i| (self.maj_sq[i].value() - self.maj_mean[i].value().powi(2)).max(0.0)),
            per_t: self.per_t.iter().zip(ts).map(|(a, &t)| a.finish(t)).collect(),
        }
    }
}

/// Exact decomposition statistics at the given `t` values.
pub fn oracle_analysis(model: &ExactModel, ts: &[f64]) -> Result<OracleAnalysis> {
    crate::error::check_open_probability(model.p())?;
    let dec = Decomposition::new(model.index(), model.model())?;
    let parts = model.fold_configs(
        || SweepAcc::new(ts.len()),
        |acc, view, w| {
            let st = dec.state_from_y(|j| view.y(j));
            acc.add(&dec, &st, ts, w);
        },
    );
    let mut total = SweepAcc::new(ts.len());
    for p in &parts {
        total.merge(p);
    }
    Ok(total.finish(ts))
}

/// Exact `H_t` moments at the given `t` values.
pub fn oracle_ht_moments(model: &ExactModel, ts: &[f64]) -> Result<Vec<HtMoments>> {
    Ok(oracle_analysis(model, ts)?.per_t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum EstimationMethod {
    ExactOracle { options: OracleOptions },
    MonteCarlo { samples: usize, seed: u64 },
}

impl EstimationMethod {
    pub fn oracle() -> Self {
        Self::ExactOracle {
            options: OracleOptions::default(),
        }
    }
}

/// Monte Carlo analogue of [`OracleAnalysis`]; standard errors attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McAnalysis {
    pub samples: usize,
    pub seed: u64,
    pub a: f64,
    pub a_std_error: f64,
    pub epsilon: f64,
    pub epsilon_std_error: f64,
    pub majorant_variances: [f64; 3],
    pub per_t: Vec<HtMoments>,
}

/// The same statistics from `samples` seeded draws of `G(n, p)`.
pub fn mc_analysis(
    index: &CopyIndex,
    model: &SubgraphModel,
    ts: &[f64],
    samples: usize,
    seed: u64,
) -> Result<McAnalysis> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let dec = Decomposition::new(index, model)?;
    let sampler = GnpSampler::new(index.universe(), model.p)?;
    const CHUNK: usize = 4096;
    let chunks = samples.div_ceil(CHUNK);
    let w = 1.0 / samples as f64;
    let parts: Vec<(SweepAcc, CompensatedSum, CompensatedSum)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = SweepAcc::new(ts.len());
            let mut a_sq = CompensatedSum::new();
            let mut e_sq = CompensatedSum::new();
            let mut config = EdgeConfiguration::empty(index.universe());
            for r in c * CHUNK..((c + 1) * CHUNK).min(samples) {
                let mut rng = replicate_rng(seed, r as u64);
                sampler.sample_into(&mut config, &mut rng);
                let st = dec.state_from_config(&config);
                acc.add(&dec, &st, ts, w);
                a_sq.add(dec.a_integrand(&st).powi(2) * w);
                e_sq.add(dec.epsilon_integrand(&st).powi(2) * w);
            }
            (acc, a_sq, e_sq)
        })
        .collect();
    let mut total = SweepAcc::new(ts.len());
    let mut a_sq = CompensatedSum::new();
    let mut e_sq = CompensatedSum::new();
    for (acc, a2, e2) in &parts {
        total.merge(acc);
        a_sq.merge(a2);
        e_sq.merge(e2);
    }
    let fin = total.finish(ts);
    let m = samples as f64;
    let se = |mean: f64, sq: f64| ((sq - mean * mean).max(0.0) * m / (m - 1.0) / m).sqrt();
    Ok(McAnalysis {
        samples,
        seed,
        a_std_error: se(fin.a, a_sq.value()),
        epsilon_std_error: se(fin.epsilon, e_sq.value()),
        a: fin.a,
        epsilon: fin.epsilon,
        majorant_variances: fin.majorant_variances,
        per_t: fin.per_t,
    })
}

/// `ε` and its standard error (zero for the oracle).
pub fn epsilon_bkr(
    index: &CopyIndex,
    model: &SubgraphModel,
    method: EstimationMethod,
) -> Result<(f64, f64)> {
    match method {
        EstimationMethod::ExactOracle { options } => {
            let exact = ExactModel::with_options(model.n, model.p, &model.pattern, options)?;
            let r = oracle_analysis(&exact, &[])?;
            Ok((r.epsilon, 0.0))
        }
        EstimationMethod::MonteCarlo { samples, seed } => {
            let r = mc_analysis(index, model, &[], samples, seed)?;
            Ok((r.epsilon, r.epsilon_std_error))
        }
    }
}

/// Default `t` grid: `0`, `±k·step` below `1/(2A)`, and `±1/(2A)`, where
/// `step = min(0.25, T/4)` widened so each side has at most 64 points.
pub fn default_t_grid(a: f64) -> Vec<f64> {
    let t_max = ode_range(a);
    let step = (0.25f64).min(t_max / 4.0).max(t_max / 64.0);
    let mut pos = Vec::new();
    let mut k = 1;
    while (k as f64) * step < t_max * (1.0 - 1e-12) {
        pos.push(k as f64 * step);
        k += 1;
    }
    pos.push(t_max);
    let mut grid: Vec<f64> = pos.iter().rev().map(|t| -t).collect();
    grid.push(0.0);
    grid.extend(pos);
    grid
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty t grid".into()));
    }
    for &t in grid {
        if !t.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite t = {t}")));
        }
        if !grid.iter().any(|&s| (s + t).abs() <= 1e-12 * t.abs().max(1.0)) {
            return Err(Error::InvalidArgument(format!(
                "t grid is not symmetric about 0: {t} has no mirror"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub t: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ABEstimate {
    pub a: f64,
    /// zero for the oracle
    pub a_std_error: f64,
    pub b_grid_max: f64,
    pub b_per_t: Vec<GridPoint>,
    /// `B` with `R₂ ↦ 1/2`, `R₁ ↦ 1`; heuristic, not a proven bound
    pub b_majorant: f64,
    pub t_max: f64,
    pub method: EstimationMethod,
}

impl ABEstimate {
    pub fn grid(&self) -> Vec<f64> {
        self.b_per_t.iter().map(|g| g.t).collect()
    }

    /// `B(0)`.
    pub fn b_at_zero(&self) -> Option<f64> {
        self.b_per_t.iter().find(|g| g.t == 0.0).map(|g| g.b)
    }
}

/// `A` (t-free) and `B` over a symmetric grid; the default grid is derived
/// from `A` via [`default_t_grid`].
pub fn estimate_ab(
    index: &CopyIndex,
    model: &SubgraphModel,
    t_grid: Option<&[f64]>,
    method: EstimationMethod,
) -> Result<ABEstimate> {
    crate::error::check_open_probability(model.p)?;
    model.require_variance()?;
    if let Some(g) = t_grid {
        check_grid(g)?;
    }
    let (a, a_se, analysis_per_t, maj) = match method {
        EstimationMethod::ExactOracle { options } => {
            let exact = ExactModel::with_options(model.n, model.p, &model.pattern, options)?;
            let grid = match t_grid {
                Some(g) => g.to_vec(),
                None => default_t_grid(oracle_analysis(&exact, &[])?.a),
            };
            let r = oracle_analysis(&exact, &grid)?;
            let maj = r.b_majorant();
            (r.a, 0.0, r.per_t, maj)
        }
        EstimationMethod::MonteCarlo { samples, seed } => {
            let grid = match t_grid {
                Some(g) => g.to_vec(),
                None => default_t_grid(mc_analysis(index, model, &[], samples, seed)?.a),
            };
            let r = mc_analysis(index, model, &grid, samples, seed)?;
            let maj = r.majorant_variances.iter().map(|v| v.sqrt()).sum();
            (r.a, r.a_std_error, r.per_t, maj)
        }
    };
    let b_per_t: Vec<GridPoint> = analysis_per_t
        .iter()
        .map(|m| GridPoint { t: m.t, b: m.b() })
        .collect();
    let b_grid_max = b_per_t.iter().map(|g| g.b).fold(0.0, f64::max);
    Ok(ABEstimate {
        a,
        a_std_error: a_se,
        b_grid_max,
        b_per_t,
        b_majorant: maj,
        t_max: ode_range(a),
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copies::{enumerate_copies, EdgeUniverse};
    use crate::pattern::PatternGraph;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tri() -> PatternGraph {
        PatternGraph::preset("triangle").unwrap()
    }

    #[test]
    fn r_l_at_zero_and_pi() {
        assert_eq!(r_l(0.0, 1).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(r_l(0.0, 2).unwrap(), Complex64::new(0.5, 0.0));
        assert_eq!(r_l(0.0, 3).unwrap(), Complex64::new(1.0 / 6.0, 0.0));
        assert_abs_diff_eq!(r_l(PI, 1).unwrap().norm(), 2.0 / PI, epsilon = 1e-15);
        assert!(r_l(1.0, 4).is_err());
    }

    #[test]
    fn r_l_series_and_closed_form_meet() {
        for l in 1..=3 {
            for &z in &[0.4999999, -0.4999999] {
                let series = r_l(z, l).unwrap();
                let above = r_l(0.5000001 * z.signum(), l).unwrap();
                assert!((series - above).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn r_l_remark_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let z = rng.random_range(-100.0..100.0);
            for l in 1..=3u32 {
                let r = r_l(z, l).unwrap();
                assert!(r.norm() <= INV_FACT[l as usize] + 1e-12);
                assert!(taylor_residual(z, l).unwrap() <= 1e-12, "z={z} l={l}");
            }
            // (ii) and (iii)
            let e = Complex64::from_polar(1.0, z);
            assert!((e - I * z * r_l(z, 1).unwrap() - 1.0).norm() < 1e-12);
            assert!((e - I * z + z * z * r_l(z, 2).unwrap() - 1.0).norm() < 1e-10);
        }
    }

    #[test]
    fn decomposition_identities_pointwise() {
        let idx = enumerate_copies(6, &tri()).unwrap();
        let model = SubgraphModel::new(6, 0.4, &tri()).unwrap();
        let dec = Decomposition::new(&idx, &model).unwrap();
        let sampler = GnpSampler::new(idx.universe(), 0.4).unwrap();
        for r in 0..1000 {
            let c = sampler.sample(&mut replicate_rng(2, r));
            let st = dec.state_from_config(&c);
            for j in 0..idx.len() {
                let wj: f64 = (0..idx.len())
                    .filter(|l| dec.closed_neighbors(j).binary_search(&(*l as u32)).is_err())
                    .map(|l| st.x[l])
                    .sum();
                assert!((st.w - (wj + st.z[j])).abs() < 1e-12);
                for s in dec.slots_of(j) {
                    let v: f64 = dec.v_members(s).iter().map(|&l| st.x[l as usize]).sum();
                    let u: f64 = dec.u_members(s).iter().map(|&l| st.x[l as usize]).sum();
                    assert!((st.u[s] - u).abs() < 1e-12);
                    assert!((st.u[s] - (st.z[j] + v)).abs() < 1e-12);
                    let wjk = st.w - st.u[s];
                    assert!((wj - (wjk + v)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn independence_by_edge_support() {
        for n in 4..=6 {
            let idx = enumerate_copies(n, &tri()).unwrap();
            let model = SubgraphModel::new(n, 0.5, &tri()).unwrap();
            let dec = Decomposition::new(&idx, &model).unwrap();
            let edges_of = |ls: &[u32]| -> std::collections::BTreeSet<u32> {
                ls.iter().flat_map(|&l| idx.copy(l as usize).iter().copied()).collect()
            };
            for j in 0..idx.len() {
                let wj: Vec<u32> = (0..idx.len() as u32)
                    .filter(|l| dec.closed_neighbors(j).binary_search(l).is_err())
                    .collect();
                let xj = edges_of(&[j as u32]);
                assert!(xj.is_disjoint(&edges_of(&wj)));
                for s in dec.slots_of(j) {
                    let (_, k) = dec.slot_pair(s);
                    let u = dec.u_members(s);
                    let wjk: Vec<u32> = (0..idx.len() as u32)
                        .filter(|l| u.binary_search(l).is_err())
                        .collect();
                    let xjk = edges_of(&[j as u32, k as u32]);
                    assert!(xjk.is_disjoint(&edges_of(&wjk)));
                }
            }
        }
    }

    #[test]
    fn pair_covariances_sum_to_one() {
        let idx = enumerate_copies(6, &tri()).unwrap();
        let model = SubgraphModel::new(6, 0.3, &tri()).unwrap();
        let dec = Decomposition::new(&idx, &model).unwrap();
        let total: f64 = (0..dec.slots()).map(|s| dec.pair_covariance(s)).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn abs_moments_match_oracle() {
        let exact = ExactModel::new(5, 0.3, &tri()).unwrap();
        let dec = Decomposition::new(exact.index(), exact.model()).unwrap();
        for s in [0, 1, 5, 17] {
            let (j, k) = dec.slot_pair(s);
            let [m, c] = exact
                .exact_expectations(|v| {
                    let st = dec.state_from_y(|i| v.y(i));
                    [(st.x[j] * st.x[k]).abs(), st.x[j] * st.x[k]]
                })
                .unwrap();
            assert_abs_diff_eq!(m, dec.pair_abs_moment(s), epsilon = 1e-13);
            assert_abs_diff_eq!(c, dec.pair_covariance(s), epsilon = 1e-13);
        }
        // E|X_j| closed form
        let [m] = exact
            .exact_expectations(|v| [dec.state_from_y(|i| v.y(i)).x[0].abs()])
            .unwrap();
        assert_abs_diff_eq!(m, exact.model().abs_x_mean(), epsilon = 1e-14);
    }

    #[test]
    fn ht_identity_n4() {
        let exact = ExactModel::new(4, 0.5, &tri()).unwrap();
        let ts = [-2.0, 0.0, 0.5, 1.0, 3.0];
        let res = exact.verify_ht_identity(&ts).unwrap();
        assert_eq!(res[1], 0.0f64.max(res[1]));
        for r in res {
            assert!(r <= 1e-9, "{r}");
        }
    }

    #[test]
    fn w3_identity_on_full_and_empty_graph() {
        let idx = enumerate_copies(4, &tri()).unwrap();
        let model = SubgraphModel::new(4, 0.5, &tri()).unwrap();
        let dec = Decomposition::new(&idx, &model).unwrap();
        let u = EdgeUniverse::new(4);
        for c in [EdgeConfiguration::full(u), EdgeConfiguration::empty(u)] {
            assert!(dec.w3_identity_residual(&dec.state_from_config(&c)) <= 1e-10);
        }
    }

    #[test]
    fn default_grid_shape() {
        let g = default_t_grid(0.5);
        assert_eq!(g, vec![-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = default_t_grid(2.0);
        assert_eq!(g.first(), Some(&-0.25));
        assert_eq!(g.len(), 9);
        assert!(check_grid(&[0.0, 0.5]).is_err());
        assert!(check_grid(&[]).is_err());
    }

    #[test]
    fn estimate_ab_oracle_basics() {
        let exact = ExactModel::new(4, 0.5, &tri()).unwrap();
        let ab = estimate_ab(exact.index(), exact.model(), None, EstimationMethod::oracle()).unwrap();
        assert!(ab.a > 0.0);
        assert!(ab.b_grid_max >= ab.b_at_zero().unwrap());
        assert!(ab.b_at_zero().unwrap().is_finite());
        assert_abs_diff_eq!(ab.t_max, 1.0 / (2.0 * ab.a), epsilon = 1e-15);
    }
}
