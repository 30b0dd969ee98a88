use crate::energy::{dot, CMElement, GramContext};
use crate::error::Result;
use crate::gaussian::{Method, ObservablePlan};

use super::derivative::{conditional_gradient, observables};
use super::divergence::VectorField;
use super::functional::{CylindricalFunctional, FD_STEP};

#[derive(Debug, Clone)]
struct Slot {
    time: usize,
    /// Coordinates observed before this slot's grid time.
    prefix: usize,
    innovation: CMElement,
    /// Coefficients of `P_prefix e_k` (the regression part of the innovation).
    regression: Vec<f64>,
    variance: f64,
    /// `<k_{t_i}, d~_k> / |d~_k|^2` for each index `t_i` of the functional.
    weights: Vec<f64>,
    /// Entries of `Σ d~_k` on the prefix that are not negligible.
    coupling: Vec<(usize, f64)>,
}

/// Discrete Clark–Ocone integrand of a cylindrical functional.
///
/// Slot `k` is attached to coordinate `k`. Its direction is the innovation
/// `d~_k = (Id - P) e_k`, where `P` projects onto the coordinates observed
/// strictly before the slot's grid time, and its coefficient is
/// `a_k = <E[DF | prefix], d~_k> / |d~_k|^2`. The slot fields add up to
/// `Σ_j (P_{j+1} - P_j) E[DF | F_j]`, the predictable projection of `DF`
/// evaluated slot by slot, and `δ` of the field is `Σ_k a_k I(d~_k)`.
#[derive(Debug, Clone)]
pub struct ClarkIntegrand {
    functional: CylindricalFunctional,
    method: Method,
    plans: Vec<ObservablePlan>,
    slots: Vec<Slot>,
}

/// Relative size below which `Σ d~_k` on the prefix counts as zero.
const COUPLING_TOL: f64 = 1e-9;

impl ClarkIntegrand {
    pub fn new(ctx: &GramContext, f: &CylindricalFunctional, method: Method) -> Result<Self> {
        let n_times = ctx.grid().len();
        let obs = observables(ctx, f)?;
        let plans = (0..n_times)
            .map(|j| ObservablePlan::new(ctx, &obs, ctx.time_prefix(j)))
            .collect::<Result<Vec<_>>>()?;
        let sigma_obs: Vec<Vec<f64>> = obs.iter().map(|h| ctx.apply_sigma(h)).collect();
        let scale = (0..ctx.dim()).map(|i| ctx.sigma()[(i, i)]).fold(0.0, f64::max).sqrt();
        let mut slots = Vec::with_capacity(ctx.dim());
        for k in 0..ctx.dim() {
            let time = ctx.coordinate(k).time_index;
            let prefix = ctx.time_prefix(time);
            let e = ctx.representer(k)?;
            let proj = ctx.project_adapted(&e, prefix)?;
            let innovation = e.sub(&proj);
            let sd = ctx.apply_sigma(&innovation);
            let variance = dot(innovation.coeffs(), &sd);
            let weights = sigma_obs
                .iter()
                .map(|s| dot(innovation.coeffs(), s) / variance)
                .collect();
            let tol = COUPLING_TOL * scale * variance.sqrt();
            let coupling = sd[..prefix.get()]
                .iter()
                .enumerate()
                .filter(|(_, v)| v.abs() > tol)
                .map(|(i, &v)| (i, v))
                .collect();
            slots.push(Slot {
                time,
                prefix: prefix.get(),
                regression: proj.coeffs()[..prefix.get()].to_vec(),
                innovation,
                variance,
                weights,
                coupling,
            });
        }
        Ok(ClarkIntegrand {
            functional: f.clone(),
            method,
            plans,
            slots,
        })
    }

    pub fn set_method(&mut self, method: Method) {
        self.method = method;
    }

    pub fn functional(&self) -> &CylindricalFunctional {
        &self.functional
    }

    /// Largest conditional dimension met by any slot; quadrature needs ≤ 4.
    pub fn max_rank(&self) -> usize {
        self.plans.iter().map(ObservablePlan::rank).max().unwrap_or(0)
    }

    pub fn innovation(&self, k: usize) -> &CMElement {
        &self.slots[k].innovation
    }

    pub fn innovation_variance(&self, k: usize) -> f64 {
        self.slots[k].variance
    }

    /// Number of slots whose innovation is not orthogonal to the past within
    /// tolerance; these get an explicit correction term.
    pub fn coupled_slots(&self) -> usize {
        self.slots.iter().filter(|s| !s.coupling.is_empty()).count()
    }

    fn conditional_gradients(&self, time: usize, path: &[f64], key: u64) -> Result<Vec<f64>> {
        let method = self.method.keyed(key).keyed(time as u64);
        conditional_gradient(&self.plans[time], &self.functional, path, &method)
    }

    /// All slot coefficients on one coordinate path. `key` selects the Monte
    /// Carlo streams and is ignored by quadrature.
    pub fn coefficients_keyed(&self, path: &[f64], key: u64) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.slots.len());
        let mut cache: Option<(usize, Vec<f64>)> = None;
        for s in &self.slots {
            if cache.as_ref().map(|c| c.0) != Some(s.time) {
                cache = Some((s.time, self.conditional_gradients(s.time, path, key)?));
            }
            let cond = &cache.as_ref().expect("filled").1;
            out.push(dot(cond, &s.weights));
        }
        Ok(out)
    }

    /// `I(d~_k) = x_k - Σ_{i<prefix} (P e_k)_i x_i`.
    pub fn innovation_value(&self, k: usize, path: &[f64]) -> f64 {
        let s = &self.slots[k];
        path[k] - dot(&s.regression, &path[..s.prefix])
    }

    /// `δ` of the integrand on one path.
    pub fn divergence_keyed(&self, path: &[f64], key: u64) -> Result<f64> {
        let a = self.coefficients_keyed(path, key)?;
        let mut acc = 0.0;
        for (k, ak) in a.iter().enumerate() {
            acc += ak * self.innovation_value(k, path);
        }
        for k in 0..self.slots.len() {
            if !self.slots[k].coupling.is_empty() {
                acc -= self.coupling_correction(k, path, key)?;
            }
        }
        Ok(acc)
    }

    fn coupling_correction(&self, k: usize, path: &[f64], key: u64) -> Result<f64> {
        let s = &self.slots[k];
        let mut work = path.to_vec();
        let mut acc = 0.0;
        for &(i, v) in &s.coupling {
            work[i] = path[i] + FD_STEP;
            let up = dot(&self.conditional_gradients(s.time, &work, key)?, &s.weights);
            work[i] = path[i] - FD_STEP;
            let down = dot(&self.conditional_gradients(s.time, &work, key)?, &s.weights);
            work[i] = path[i];
            acc += (up - down) / (2.0 * FD_STEP) * v;
        }
        Ok(acc)
    }

    /// Scalar field `Σ_k a_k d~_k` on one path.
    pub fn field_element(&self, path: &[f64]) -> Result<CMElement> {
        let a = self.coefficients_keyed(path, 0)?;
        let mut out = CMElement::zeros(path.len());
        for (k, ak) in a.iter().enumerate() {
            out.axpy(*ak, &self.slots[k].innovation);
        }
        Ok(out)
    }
}

impl VectorField for ClarkIntegrand {
    fn slots(&self) -> usize {
        self.slots.len()
    }

    fn direction(&self, j: usize) -> &CMElement {
        &self.slots[j].innovation
    }

    fn coefficient(&self, j: usize, path: &[f64]) -> Result<f64> {
        let s = &self.slots[j];
        Ok(dot(&self.conditional_gradients(s.time, path, 0)?, &s.weights))
    }

    fn derivative_pairing(&self, j: usize, path: &[f64], sigma_h: &[f64]) -> Result<f64> {
        // D a_j lives on the prefix; pair by central differences there.
        let s = &self.slots[j];
        let mut work = path.to_vec();
        let mut acc = 0.0;
        for i in 0..s.prefix {
            if sigma_h[i] == 0.0 {
                continue;
            }
            work[i] = path[i] + FD_STEP;
            let up = self.coefficient(j, &work)?;
            work[i] = path[i] - FD_STEP;
            let down = self.coefficient(j, &work)?;
            work[i] = path[i];
            acc += (up - down) / (2.0 * FD_STEP) * sigma_h[i];
        }
        Ok(acc)
    }
}
