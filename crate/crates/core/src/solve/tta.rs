use rayon::prelude::*;

use super::{solve_variational, Problem, ReconState, SolveSettings};
use crate::error::{dim, Result};
use crate::grid::{DihedralElement, RasterGrid};

/// Runs `solve` on all eight rotated/reflected copies of the problem, maps
/// each answer back and averages them. The sum is a fixed pairwise tree, so
/// eight identical answers average to that answer exactly.
pub fn tta_with<F>(problem: &Problem, solve: F) -> Result<RasterGrid>
where
    F: Fn(&Problem) -> Result<RasterGrid> + Sync,
{
    let geom = *problem.geometry();
    if geom.height != geom.width {
        return Err(dim(format!("test-time augmentation needs a square grid, got {}x{}", geom.height, geom.width)));
    }
    let outs: Vec<Result<RasterGrid>> = DihedralElement::all()
        .par_iter()
        .map(|&g| {
            let p = problem.transform(g)?;
            let r = solve(&p)?;
            g.inverse().apply_grid(&r)
        })
        .collect();
    let outs: Vec<RasterGrid> = outs.into_iter().collect::<Result<_>>()?;
    let mut vals = vec![0.0; geom.len()];
    for (i, v) in vals.iter_mut().enumerate() {
        let x: Vec<f64> = outs.iter().map(|o| o.values()[i]).collect();
        let sum = ((x[0] + x[1]) + (x[2] + x[3])) + ((x[4] + x[5]) + (x[6] + x[7]));
        *v = sum / 8.0;
    }
    RasterGrid::new(geom, vals)
}

/// Dihedral average of independent variational solves.
pub fn tta_solve(problem: &Problem, settings: &SolveSettings) -> Result<ReconState> {
    let r_hat = tta_with(problem, |p| Ok(solve_variational(p, settings)?.0.r_hat))?;
    Ok(ReconState { r_hat, norm: problem.norm })
}
