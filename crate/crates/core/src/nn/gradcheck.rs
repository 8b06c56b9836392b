//! Central finite-difference gradient checking.

use rand::seq::SliceRandom;
use rand::Rng;

use super::param::Parameterized;

/// Gradients smaller than this are compared absolutely instead of relatively.
pub const MAGNITUDE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct Mismatch {
    pub index: usize,
    pub group: String,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst: Option<Mismatch>,
    pub groups_covered: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR)
}

/// Picks `count` flat coordinates covering every parameter group at least once
/// (when `count` allows), the rest uniformly at random.
pub fn sample_coordinates<M: Parameterized + ?Sized, R: Rng>(model: &M, count: usize, rng: &mut R) -> Vec<usize> {
    let groups = model.param_groups();
    let total = model.num_params();
    let mut coords: Vec<usize> = groups
        .iter()
        .filter(|(_, r)| !r.is_empty())
        .map(|(_, r)| rng.gen_range(r.clone()))
        .collect();
    coords.shuffle(rng);
    coords.truncate(count);
    while coords.len() < count {
        coords.push(rng.gen_range(0..total));
    }
    coords
}

/// Compares `analytic` (a flat gradient) against `(L(θ+h) − L(θ−h)) / 2h` at
/// each coordinate. Parameters are restored afterwards.
pub fn check<M, F>(model: &mut M, analytic: &[f64], coords: &[usize], step: f64, mut loss: F) -> GradCheckReport
where
    M: Parameterized + ?Sized,
    F: FnMut(&M) -> f64,
{
    let groups = model.param_groups();
    let mut report = GradCheckReport::default();
    let mut covered = vec![false; groups.len()];
    for &i in coords {
        let orig = model.get_flat(i);
        model.set_flat(i, orig + step);
        let plus = loss(model);
        model.set_flat(i, orig - step);
        let minus = loss(model);
        model.set_flat(i, orig);
        let numeric = (plus - minus) / (2.0 * step);
        let rel = relative_error(analytic[i], numeric);
        let g = groups.iter().position(|(_, r)| r.contains(&i)).unwrap();
        covered[g] = true;
        report.checked += 1;
        if rel > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = rel.max(report.max_rel_error);
            if report.worst.as_ref().map_or(true, |w| rel >= w.rel_error) {
                report.worst = Some(Mismatch {
                    index: i,
                    group: groups[g].0.clone(),
                    analytic: analytic[i],
                    numeric,
                    rel_error: rel,
                });
            }
        }
    }
    report.groups_covered = covered.iter().filter(|&&c| c).count();
    report
}
