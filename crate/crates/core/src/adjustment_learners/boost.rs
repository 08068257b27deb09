//! Gradient boosting with shallow second-order regression trees.

use serde::{Deserialize, Serialize};

use super::{check_finite, log_loss_one, LearnerError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Squared,
    Logistic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub rounds: usize,
    pub shrinkage: f64,
    pub depth: usize,
    /// Share of training rows held out for early stopping (0 disables it).
    pub validation_share: f64,
    /// Rounds without validation improvement before stopping.
    pub patience: usize,
    /// L2 penalty on leaf values.
    pub leaf_l2: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams { rounds: 200, shrinkage: 0.1, depth: 2, validation_share: 0.2, patience: 20, leaf_l2: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(v) => return *v,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoostModel {
    pub loss: Loss,
    base: f64,
    trees: Vec<Tree>,
}

impl BoostModel {
    /// Raw score (logit for logistic loss).
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.base + self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    /// Mean prediction (probability for logistic loss).
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.loss {
            Loss::Squared => self.margin(row),
            Loss::Logistic => sigmoid(self.margin(row)),
        }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Model truncated to its first `k` trees.
    pub fn truncated(&self, k: usize) -> Self {
        BoostModel { loss: self.loss, base: self.base, trees: self.trees[..k.min(self.trees.len())].to_vec() }
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn row_loss(loss: Loss, y: f64, margin: f64) -> f64 {
    match loss {
        Loss::Squared => 0.5 * (y - margin).powi(2),
        Loss::Logistic => log_loss_one(y, sigmoid(margin)),
    }
}

/// Mean training loss of `model` on `(x, y)`.
pub fn mean_loss(model: &BoostModel, x: &[Vec<f64>], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(r, &y)| row_loss(model.loss, y, model.margin(r))).sum::<f64>() / y.len().max(1) as f64
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    /// Row indices sorted by each feature.
    sorted: Vec<Vec<usize>>,
    leaf_l2: f64,
}

impl Grower<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.leaf_l2)
    }

    /// Grows a tree level by level; `node_of[i]` tracks the current node of each row.
    fn grow(&self, rows: &[usize], g: &[f64], h: &[f64], depth: usize, shrink: f64) -> Tree {
        let n = self.x.len();
        let mut node_of = vec![usize::MAX; n];
        for &i in rows {
            node_of[i] = 0;
        }
        let mut nodes = vec![Node::Leaf(0.0)];
        let mut sums = vec![(rows.iter().map(|&i| g[i]).sum::<f64>(), rows.iter().map(|&i| h[i]).sum::<f64>())];
        let mut frontier = vec![0usize];

        for _ in 0..depth {
            // best split per frontier node: (gain, feature, threshold)
            let mut best: Vec<Option<(f64, usize, f64)>> = vec![None; nodes.len()];
            for (f, order) in self.sorted.iter().enumerate() {
                let mut acc = vec![(0.0f64, 0.0f64); nodes.len()];
                let mut last: Vec<Option<f64>> = vec![None; nodes.len()];
                for &i in order {
                    let node = node_of[i];
                    if node == usize::MAX || !frontier.contains(&node) {
                        continue;
                    }
                    let xv = self.x[i][f];
                    if let Some(prev) = last[node] {
                        if xv > prev {
                            let (gl, hl) = acc[node];
                            let (gt, ht) = sums[node];
                            let (gr, hr) = (gt - gl, ht - hl);
                            if hl > 1e-9 && hr > 1e-9 {
                                let gain = self.score(gl, hl) + self.score(gr, hr) - self.score(gt, ht);
                                if gain > 1e-12 && best[node].is_none_or(|b| gain > b.0) {
                                    best[node] = Some((gain, f, 0.5 * (prev + xv)));
                                }
                            }
                        }
                    }
                    acc[node].0 += g[i];
                    acc[node].1 += h[i];
                    last[node] = Some(xv);
                }
            }

            let mut next = Vec::new();
            for &node in &frontier {
                if let Some((_, feature, threshold)) = best[node] {
                    let left = nodes.len();
                    let right = left + 1;
                    nodes.push(Node::Leaf(0.0));
                    nodes.push(Node::Leaf(0.0));
                    sums.push((0.0, 0.0));
                    sums.push((0.0, 0.0));
                    nodes[node] = Node::Split { feature, threshold, left, right };
                    next.push(left);
                    next.push(right);
                }
            }
            if next.is_empty() {
                break;
            }
            for &i in rows {
                if let Node::Split { feature, threshold, left, right } = nodes[node_of[i]] {
                    let child = if self.x[i][feature] <= threshold { left } else { right };
                    node_of[i] = child;
                    sums[child].0 += g[i];
                    sums[child].1 += h[i];
                }
            }
            frontier = next;
        }

        for (k, node) in nodes.iter_mut().enumerate() {
            if let Node::Leaf(v) = node {
                let (gs, hs) = sums[k];
                *v = -shrink * gs / (hs + self.leaf_l2);
            }
        }
        Tree { nodes }
    }
}

/// Fits a boosted model. Rows flagged in `holdout` are used only for early stopping.
pub fn boost_fit(
    x: &[Vec<f64>],
    y: &[f64],
    loss: Loss,
    params: &BoostParams,
    holdout: Option<&[bool]>,
) -> Result<BoostModel, LearnerError> {
    super::lasso::check_inputs(x, y)?;
    check_finite(std::iter::once(params.shrinkage))?;
    if loss == Loss::Logistic && y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(LearnerError::NotBinary);
    }
    let n = y.len();
    let p = x[0].len();
    let (train, valid): (Vec<usize>, Vec<usize>) = match holdout {
        Some(mask) => (0..n).partition(|&i| !mask[i]),
        None => ((0..n).collect(), Vec::new()),
    };
    if train.is_empty() {
        return Err(LearnerError::Empty);
    }
    let ybar = train.iter().map(|&i| y[i]).sum::<f64>() / train.len() as f64;
    let base = match loss {
        Loss::Squared => ybar,
        Loss::Logistic => {
            let q = ybar.clamp(1e-6, 1.0 - 1e-6);
            (q / (1.0 - q)).ln()
        }
    };
    let mut model = BoostModel { loss, base, trees: Vec::new() };
    let sorted = (0..p)
        .map(|f| {
            let mut o = train.clone();
            o.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
            o
        })
        .collect();
    let grower = Grower { x, sorted, leaf_l2: params.leaf_l2 };

    let mut margin = vec![base; n];
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let valid_loss = |m: &[f64]| valid.iter().map(|&i| row_loss(loss, y[i], m[i])).sum::<f64>();
    let mut best = (valid_loss(&margin), 0usize);

    for round in 0..params.rounds {
        for &i in &train {
            match loss {
                Loss::Squared => {
                    g[i] = margin[i] - y[i];
                    h[i] = 1.0;
                }
                Loss::Logistic => {
                    let q = sigmoid(margin[i]);
                    g[i] = q - y[i];
                    h[i] = (q * (1.0 - q)).max(1e-12);
                }
            }
        }
        let tree = grower.grow(&train, &g, &h, params.depth, params.shrinkage);
        for (i, m) in margin.iter_mut().enumerate() {
            *m += tree.predict(&x[i]);
        }
        model.trees.push(tree);
        if !valid.is_empty() {
            let l = valid_loss(&margin);
            if l < best.0 {
                best = (l, round + 1);
            } else if round + 1 - best.1 >= params.patience {
                break;
            }
        }
    }
    if !valid.is_empty() {
        model.trees.truncate(best.1);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn training_loss_is_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<Vec<f64>> = (0..300).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let y: Vec<f64> = x.iter().map(|r| (r[0] * 6.0).sin() + r[1] + rng.random::<f64>() * 0.1).collect();
        let params = BoostParams { rounds: 50, ..Default::default() };
        let m = boost_fit(&x, &y, Loss::Squared, &params, None).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..=m.n_trees() {
            let l = mean_loss(&m.truncated(k), &x, &y);
            assert!(l <= prev + 1e-12);
            prev = l;
        }
        assert!(prev < mean_loss(&m.truncated(0), &x, &y) * 0.2);
    }

    #[test]
    fn separable_labels_get_small_log_loss() {
        let x: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 200.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| (r[0] > 0.37) as u8 as f64).collect();
        let m = boost_fit(&x, &y, Loss::Logistic, &BoostParams::default(), None).unwrap();
        let ll = x.iter().zip(&y).map(|(r, &y)| log_loss_one(y, m.predict_row(r))).sum::<f64>() / 200.0;
        assert!(ll < 0.1, "{ll}");
    }
}
