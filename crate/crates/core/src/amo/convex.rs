//! Minimization of a convex function over the convex hull of a finite point
//! set that is reachable only through a linear minimization oracle.
//!
//! The iterate is kept as an explicit mixture of oracle answers and moved by
//! away-step Frank-Wolfe with an exact line search. Lower
//! bounds come from two sources: the Frank-Wolfe linearization at the current
//! iterate, and a cutting-plane bound that combines all subgradient cuts
//! gathered so far. The second one certifies optima at points where the
//! function is not differentiable.

use std::collections::BTreeMap;

use crate::error::{contract, Error, Result};
use crate::lp::{LinearProgram, Relation};
use crate::model::MixedPolicy;

pub trait ConvexFunction {
    fn value(&self, y: &[f64]) -> f64;
    fn subgradient(&self, y: &[f64]) -> Vec<f64>;
}

/// Returns an atom minimizing `direction . s` as `(atom id, s)`. An empty
/// direction asks for any atom.
pub trait LinearOracle {
    fn minimize(&mut self, direction: &[f64]) -> Result<(usize, Vec<f64>)>;
}

impl<F> LinearOracle for F
where
    F: FnMut(&[f64]) -> Result<(usize, Vec<f64>)>,
{
    fn minimize(&mut self, direction: &[f64]) -> Result<(usize, Vec<f64>)> {
        self(direction)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexMinimum {
    pub point: Vec<f64>,
    /// Mixture over atom ids whose points average to `point`.
    pub weights: MixedPolicy,
    pub value: f64,
    pub lower_bound: f64,
    pub oracle_calls: u64,
}

impl ConvexMinimum {
    pub fn gap(&self) -> f64 {
        self.value - self.lower_bound
    }
}

const MAX_CUTS: usize = 256;
const KELLEY_EVERY: usize = 8;

struct Cut {
    value: f64,
    grad: Vec<f64>,
    at: Vec<f64>,
}

impl Cut {
    /// Linear minorant evaluated at `s`.
    fn eval(&self, s: &[f64]) -> f64 {
        self.value + dot(&self.grad, s) - dot(&self.grad, &self.at)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn combine(atoms: &BTreeMap<usize, Vec<f64>>, weights: &MixedPolicy, dim: usize) -> Vec<f64> {
    let mut y = vec![0.0; dim];
    for (id, w) in weights.iter() {
        for (yi, si) in y.iter_mut().zip(&atoms[&id]) {
            *yi += w * si;
        }
    }
    y
}

/// Exact line search on `[0, hi]` by bisection on the sign of the
/// directional derivative, which stays informative long after function
/// values stop differing in floating point.
fn line_search(mut slope: impl FnMut(f64) -> f64, hi: f64) -> f64 {
    if slope(0.0) >= 0.0 {
        return 0.0;
    }
    if slope(hi) <= 0.0 {
        return hi;
    }
    let (mut a, mut b) = (0.0, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if slope(mid) < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    a
}

/// Minimizes `g` over the hull of the oracle's atoms until the certified gap
/// is at most `tol`. Errors with [`Error::NonConvergence`] after `iter_cap`
/// iterations.
pub fn convex_min_with_linear_oracle<G, O>(
    g: &G,
    oracle: &mut O,
    tol: f64,
    iter_cap: usize,
) -> Result<ConvexMinimum>
where
    G: ConvexFunction + ?Sized,
    O: LinearOracle + ?Sized,
{
    if !(tol > 0.0) {
        return Err(contract("tolerance must be positive"));
    }
    let mut calls = 0u64;
    let mut atoms: BTreeMap<usize, Vec<f64>> = BTreeMap::new();

    let (first_id, first_point) = oracle.minimize(&[])?;
    calls += 1;
    let dim = first_point.len();
    if dim == 0 {
        return Err(contract("oracle returned an empty point"));
    }
    atoms.insert(first_id, first_point);
    let mut weights = MixedPolicy::point_mass(first_id);
    let mut y = atoms[&first_id].clone();
    let mut value = g.value(&y);
    let mut lower = f64::NEG_INFINITY;
    let mut cuts: Vec<Cut> = Vec::new();
    let mut converged = false;
    let mut probe = 1e-2;

    for iter in 0..iter_cap {
        let grad = g.subgradient(&y);
        let (s_id, s) = oracle.minimize(&grad)?;
        calls += 1;
        atoms.entry(s_id).or_insert_with(|| s.clone());
        let fw_gap = dot(&grad, &y) - dot(&grad, &s);
        lower = lower.max(value - fw_gap);
        cuts.push(Cut {
            value,
            grad: grad.clone(),
            at: y.clone(),
        });
        if cuts.len() > MAX_CUTS {
            cuts.remove(0);
        }
        if value - lower <= tol {
            converged = true;
            break;
        }
        if iter % KELLEY_EVERY == KELLEY_EVERY - 1 {
            if let Some(lb) = kelley_bound(&cuts, &mut atoms, oracle, &mut calls)? {
                lower = lower.max(lb);
                if value - lower <= tol {
                    converged = true;
                    break;
                }
            }
        }

        // Away atom: the active atom with the worst linearized value.
        let away = weights
            .iter()
            .map(|(id, w)| (id, w, dot(&grad, &atoms[&id])))
            .max_by(|a, b| a.2.total_cmp(&b.2));
        let use_away = away.is_some_and(|(_, w, av)| av - dot(&grad, &y) > fw_gap && w < 1.0);
        let (direction, max_step, target) = if use_away {
            let (id, w, _) = away.expect("checked above");
            let dir: Vec<f64> = y.iter().zip(&atoms[&id]).map(|(yi, ai)| yi - ai).collect();
            (dir, w / (1.0 - w), Some(id))
        } else {
            let dir: Vec<f64> = s.iter().zip(&y).map(|(si, yi)| si - yi).collect();
            (dir, 1.0, None)
        };
        let step = line_search(
            |gamma| {
                let z: Vec<f64> = y
                    .iter()
                    .zip(&direction)
                    .map(|(yi, di)| yi + gamma * di)
                    .collect();
                dot(&g.subgradient(&z), &direction)
            },
            max_step,
        );
        let move_size = step * direction.iter().fold(0.0, |m: f64, d| m.max(d.abs()));
        let scale = y.iter().fold(1.0, |m: f64, v| m.max(v.abs()));
        if step <= 0.0 || move_size <= 1e-13 * scale {
            // No descent along the chosen direction, typically at a kink. Cuts
            // taken at nearby points toward every known atom supply the
            // subgradient diversity the cutting-plane bound needs there.
            for a in atoms.values() {
                let z: Vec<f64> = y
                    .iter()
                    .zip(a)
                    .map(|(yi, ai)| yi + probe * (ai - yi))
                    .collect();
                cuts.push(Cut {
                    value: g.value(&z),
                    grad: g.subgradient(&z),
                    at: z,
                });
            }
            probe = (probe * 0.1).max(1e-12);
            if cuts.len() > MAX_CUTS {
                cuts.drain(..cuts.len() - MAX_CUTS);
            }
            if let Some((w, z, v)) = corrective(g, &atoms, &mut cuts, tol)? {
                if v < value {
                    weights = w;
                    y = z;
                    value = v;
                }
            }
            if cuts.len() > MAX_CUTS {
                cuts.drain(..cuts.len() - MAX_CUTS);
            }
            if let Some(lb) = kelley_bound(&cuts, &mut atoms, oracle, &mut calls)? {
                lower = lower.max(lb);
            }
            if value - lower <= tol {
                converged = true;
                break;
            }
            continue;
        }
        let mut next = MixedPolicy::empty();
        match target {
            None => {
                for (p, w) in weights.iter() {
                    next.add(p, (1.0 - step) * w);
                }
                next.add(s_id, step);
            }
            Some(id) => {
                let dropped = step >= max_step * (1.0 - 1e-12);
                for (p, w) in weights.iter() {
                    let w = (1.0 + step) * w - if p == id { step } else { 0.0 };
                    if p == id && dropped {
                        continue;
                    }
                    next.add(p, w);
                }
            }
        }
        let total = next.total();
        weights = MixedPolicy::from_weights(
            next.iter()
                .filter(|(_, w)| *w > 1e-15)
                .map(|(p, w)| (p, w / total)),
        )?;
        y = combine(&atoms, &weights, dim);
        value = g.value(&y);
    }
    if !converged {
        return Err(Error::NonConvergence {
            best: weights,
            value,
            gap: value - lower,
            calls,
        });
    }
    Ok(ConvexMinimum {
        point: y,
        weights,
        value,
        lower_bound: lower.min(value),
        oracle_calls: calls,
    })
}

const CORRECTIVE_ROUNDS: usize = 60;

/// Restricted master problem of the cutting-plane model over the hull of
/// `points`: `max_lambda min_i sum_k lambda_k cut_k(point_i)`. Returns the
/// cut weights, the model's minimum over the hull, and the hull weights
/// attaining it (read from the row duals).
fn master(cuts: &[Cut], points: &[&Vec<f64>]) -> Option<(Vec<f64>, f64, Vec<f64>)> {
    let n = cuts.len();
    // Variables: lambda_1..n, w_plus, w_minus.
    let mut obj = vec![0.0; n];
    obj.push(1.0);
    obj.push(-1.0);
    let mut lp = LinearProgram::maximize(obj);
    for s in points {
        let mut row: Vec<f64> = cuts.iter().map(|c| -c.eval(s)).collect();
        row.push(1.0);
        row.push(-1.0);
        lp.add_constraint(row, Relation::Le, 0.0);
    }
    let mut ones = vec![1.0; n];
    ones.push(0.0);
    ones.push(0.0);
    lp.add_constraint(ones, Relation::Eq, 1.0);
    let sol = lp.solve().ok()?;
    let w: Vec<f64> = sol.duals[..points.len()]
        .iter()
        .map(|y| y.max(0.0))
        .collect();
    Some((sol.x[..n].to_vec(), sol.x[n] - sol.x[n + 1], w))
}

/// Kelley's method restricted to the hull of the known atoms. It can follow
/// a kink of `g` that no single-atom direction descends along. Returns the
/// best point found, which may be no better than the current iterate.
fn corrective<G: ConvexFunction + ?Sized>(
    g: &G,
    atoms: &BTreeMap<usize, Vec<f64>>,
    cuts: &mut Vec<Cut>,
    tol: f64,
) -> Result<Option<(MixedPolicy, Vec<f64>, f64)>> {
    let ids: Vec<usize> = atoms.keys().copied().collect();
    let points: Vec<&Vec<f64>> = ids.iter().map(|id| &atoms[id]).collect();
    let dim = points[0].len();
    let mut best: Option<(MixedPolicy, Vec<f64>, f64)> = None;
    for _ in 0..CORRECTIVE_ROUNDS {
        let Some((_, model, w)) = master(cuts, &points) else {
            break;
        };
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            break;
        }
        let weights = MixedPolicy::from_weights(
            ids.iter()
                .zip(&w)
                .filter(|(_, x)| **x > 1e-15)
                .map(|(id, x)| (*id, x / total)),
        )?;
        let y = combine(atoms, &weights, dim);
        let v = g.value(&y);
        cuts.push(Cut {
            value: v,
            grad: g.subgradient(&y),
            at: y.clone(),
        });
        if best.as_ref().is_none_or(|b| v < b.2) {
            best = Some((weights, y, v));
        }
        if best.as_ref().is_some_and(|b| b.2 - model <= 0.1 * tol) {
            break;
        }
    }
    Ok(best)
}

/// Cutting-plane lower bound: picks cut weights that are best against the
/// known atoms, then evaluates the averaged cut exactly with one oracle call.
fn kelley_bound<O: LinearOracle + ?Sized>(
    cuts: &[Cut],
    atoms: &mut BTreeMap<usize, Vec<f64>>,
    oracle: &mut O,
    calls: &mut u64,
) -> Result<Option<f64>> {
    let points: Vec<&Vec<f64>> = atoms.values().collect();
    let Some((lambda, _, _)) = master(cuts, &points) else {
        return Ok(None);
    };
    let dim = cuts[0].grad.len();
    let mut avg_grad = vec![0.0; dim];
    let mut offset = 0.0;
    for (l, c) in lambda.iter().zip(cuts) {
        if *l == 0.0 {
            continue;
        }
        offset += l * (c.value - dot(&c.grad, &c.at));
        for (a, gi) in avg_grad.iter_mut().zip(&c.grad) {
            *a += l * gi;
        }
    }
    let (id, s) = oracle.minimize(&avg_grad)?;
    *calls += 1;
    let bound = offset + dot(&avg_grad, &s);
    atoms.entry(id).or_insert(s);
    Ok(Some(bound))
}
