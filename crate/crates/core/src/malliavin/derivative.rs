use crate::energy::{AdaptedIndex, CMElement, GramContext};
use crate::error::{Error, Result};
use crate::gaussian::{Estimate, Method, ObservablePlan};

use super::functional::CylindricalFunctional;

/// Representers of the observed values the functional reads.
pub fn observables(ctx: &GramContext, f: &CylindricalFunctional) -> Result<Vec<CMElement>> {
    f.indices()
        .iter()
        .map(|&i| ctx.observable_representer(i))
        .collect()
}

fn check_observed(ctx: &GramContext, observed: &[f64]) -> Result<()> {
    if observed.len() != ctx.grid().len() {
        return Err(Error::Dimension {
            expected: ctx.grid().len(),
            got: observed.len(),
        });
    }
    Ok(())
}

/// `DF = Σ_i ∂_i f · k_{t_i}` for one path, given the observed grid values.
/// In a direct-sum context each `k_{t_i}` is the weighted sum of the
/// component representers.
pub fn derivative(ctx: &GramContext, f: &CylindricalFunctional, observed: &[f64]) -> Result<CMElement> {
    check_observed(ctx, observed)?;
    let mut x = vec![0.0; f.arity()];
    f.gather(observed, &mut x);
    let mut g = vec![0.0; f.arity()];
    f.gradient(&x, &mut g);
    Ok(derivative_from_gradient(ctx, f, &g))
}

pub(crate) fn derivative_from_gradient(ctx: &GramContext, f: &CylindricalFunctional, g: &[f64]) -> CMElement {
    let mut out = CMElement::zeros(ctx.dim());
    let c = out.coeffs_mut();
    for (&i, &gi) in f.indices().iter().zip(g) {
        for (comp, &w) in ctx.weights().iter().enumerate() {
            c[ctx.coordinate_index(comp, i)] += w * gi;
        }
    }
    out
}

/// `(Π DF)_j = Σ_i E[∂_i f | first j coordinates] · P_j k_{t_i}` for one path.
pub fn predictable_projection(
    ctx: &GramContext,
    f: &CylindricalFunctional,
    j: AdaptedIndex,
    path: &[f64],
    method: &Method,
) -> Result<CMElement> {
    if path.len() != ctx.dim() {
        return Err(Error::Dimension {
            expected: ctx.dim(),
            got: path.len(),
        });
    }
    let obs = observables(ctx, f)?;
    let plan = ObservablePlan::new(ctx, &obs, j)?;
    let cond = conditional_gradient(&plan, f, path, method)?;
    Ok(assemble_projection(ctx, &plan, &cond))
}

/// `E[∇f | prefix]` through a prepared plan over the functional's observables.
pub(crate) fn conditional_gradient(
    plan: &ObservablePlan,
    f: &CylindricalFunctional,
    path: &[f64],
    method: &Method,
) -> Result<Vec<f64>> {
    if f.is_affine() {
        let mut g = vec![0.0; f.arity()];
        f.gradient(&plan.means(path), &mut g);
        return Ok(g);
    }
    let est = plan.expect(path, f.arity(), method, |y, out| f.gradient(y, out))?;
    Ok(est.into_iter().map(|e| e.value).collect())
}

pub(crate) fn assemble_projection(ctx: &GramContext, plan: &ObservablePlan, cond: &[f64]) -> CMElement {
    let mut out = CMElement::zeros(ctx.dim());
    let p = plan.observed();
    let c = out.coeffs_mut();
    for (k, &e) in cond.iter().enumerate() {
        for (ci, &m) in c[..p].iter_mut().zip(plan.mean_coeffs(k)) {
            *ci += e * m;
        }
    }
    out
}

/// `E[F]` by quadrature (or Monte Carlo) over the unconditional law of the
/// functional's observables.
pub fn expectation(ctx: &GramContext, f: &CylindricalFunctional, method: &Method) -> Result<Estimate> {
    let obs = observables(ctx, f)?;
    let plan = ObservablePlan::new(ctx, &obs, AdaptedIndex::TRIVIAL)?;
    if f.is_affine() {
        return Ok(Estimate {
            value: f.value(&plan.means(&[])),
            se: 0.0,
        });
    }
    let est = plan.expect(&[], 1, method, |y, out| out[0] = f.value(y))?;
    Ok(est[0])
}
