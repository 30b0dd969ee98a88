//! Built-in functionals, addressable by name.

use crate::error::{Error, Result};
use crate::model::TimeGrid;

use super::functional::{CylindricalFunctional, IntegralFunctional};

/// Names and one-line descriptions of the built-in functionals.
pub const CATALOG: &[(&str, &str)] = &[
    ("quadratic", "X_T^2"),
    ("two_time", "sin(X_{T/2}) + cos(X_T)"),
    ("integral_sin", "∫_0^T sin(X_s) ds (trapezoid on the grid)"),
    ("integral_square", "∫_0^T X_s^2 ds (trapezoid on the grid)"),
    ("linear", "2 X_{T/2} - X_T"),
    ("terminal_exp", "exp(X_T)"),
];

/// Grid index for time `t`, snapping off-grid times to the nearest point.
pub fn snap(grid: &TimeGrid, t: f64) -> usize {
    let (i, exact) = grid.nearest_index(t);
    if !exact {
        log::warn!("time {t} is not a grid point; using t = {}", grid.time(i));
    }
    i
}

fn distinct(grid: &TimeGrid, name: &str, a: usize, b: usize) -> Result<()> {
    if a >= b {
        return Err(Error::Config(format!(
            "functional {name} needs two distinct grid times, grid {grid} has too few points"
        )));
    }
    Ok(())
}

/// Instantiate catalog entry `name` on `grid`.
pub fn functional(name: &str, grid: &TimeGrid) -> Result<CylindricalFunctional> {
    let horizon = grid.horizon();
    let last = snap(grid, horizon);
    let mid = snap(grid, horizon / 2.0);
    let f = match name {
        "quadratic" => CylindricalFunctional::new(
            name,
            vec![last],
            |x| x[0] * x[0],
            |x, g| g[0] = 2.0 * x[0],
        )?,
        "two_time" => {
            distinct(grid, name, mid, last)?;
            CylindricalFunctional::new(
                name,
                vec![mid, last],
                |x| x[0].sin() + x[1].cos(),
                |x, g| {
                    g[0] = x[0].cos();
                    g[1] = -x[1].sin();
                },
            )?
        }
        "integral_sin" => IntegralFunctional::new(name, |_, x| x.sin(), |_, x| x.cos()).discretize(grid),
        "integral_square" => IntegralFunctional::new(name, |_, x| x * x, |_, x| 2.0 * x).discretize(grid),
        "linear" => {
            distinct(grid, name, mid, last)?;
            CylindricalFunctional::linear(vec![mid, last], vec![2.0, -1.0])?
        }
        "terminal_exp" => CylindricalFunctional::new(
            name,
            vec![last],
            |x| x[0].exp(),
            |x, g| g[0] = x[0].exp(),
        )?,
        other => {
            return Err(Error::Config(format!(
                "unknown functional {other:?}; known: {}",
                CATALOG.iter().map(|c| c.0).collect::<Vec<_>>().join(", ")
            )))
        }
    };
    Ok(f)
}
