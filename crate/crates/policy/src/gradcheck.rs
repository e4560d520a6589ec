//! Central finite-difference checks of reverse-mode gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::graph::{Graph, NodeId, Tensor};
use crate::params::{ParamId, ParamStore};

/// Relative error `|a - n| / (|a| + |n|)` of one parameter array over the
/// checked coordinates.
#[derive(Debug, Clone)]
pub struct GroupCheck {
    pub name: String,
    pub coords: usize,
    pub analytic_norm: f64,
    pub rel_error: f64,
}

/// A fixed random linear functional of a node: `sum(x * R)`. Turns any
/// intermediate output into a scalar with a generic gradient.
pub fn random_projection(g: &mut Graph, x: NodeId, seed: u64) -> Result<NodeId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = Tensor::from_shape_simple_fn(g.value(x).dim(), || rng.random::<f64>() * 2.0 - 1.0);
    let r = g.input(r);
    let y = g.mul(x, r)?;
    Ok(g.sum(y))
}

/// Compares analytic and central-difference gradients for the parameters
/// in `ids`, checking at most `max_coords` coordinates per array (the
/// largest analytic entries first).
pub fn check<F>(store: &ParamStore, ids: &[ParamId], max_coords: usize, h: f64, loss: F) -> Result<Vec<GroupCheck>>
where
    F: Fn(&ParamStore, &mut Graph) -> Result<NodeId>,
{
    let mut g = Graph::new();
    let root = loss(store, &mut g)?;
    let grads = g.backward(root)?.for_params(&g, store);
    let eval = |s: &ParamStore| -> Result<f64> {
        let mut g = Graph::new();
        let r = loss(s, &mut g)?;
        Ok(g.scalar(r))
    };

    let mut work = store.clone();
    let mut out = Vec::with_capacity(ids.len());
    for &id in ids {
        let analytic = &grads[id.index()];
        let mut order: Vec<usize> = (0..analytic.len()).collect();
        let flat: Vec<f64> = analytic.iter().copied().collect();
        order.sort_by(|&a, &b| flat[b].abs().total_cmp(&flat[a].abs()).then(a.cmp(&b)));
        order.truncate(max_coords);

        let (mut diff2, mut a2, mut n2) = (0.0, 0.0, 0.0);
        let cols = analytic.ncols();
        for &k in &order {
            let (r, c) = (k / cols, k % cols);
            let orig = work.get(id)[[r, c]];
            work.get_mut(id)[[r, c]] = orig + h;
            let up = eval(&work)?;
            work.get_mut(id)[[r, c]] = orig - h;
            let down = eval(&work)?;
            work.get_mut(id)[[r, c]] = orig;
            let numeric = (up - down) / (2.0 * h);
            diff2 += (flat[k] - numeric).powi(2);
            a2 += flat[k].powi(2);
            n2 += numeric.powi(2);
        }
        let denom = a2.sqrt() + n2.sqrt();
        out.push(GroupCheck {
            name: store.name(id).to_string(),
            coords: order.len(),
            analytic_norm: a2.sqrt(),
            rel_error: if denom > 0.0 { diff2.sqrt() / denom } else { 0.0 },
        });
    }
    Ok(out)
}
