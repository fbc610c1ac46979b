//! Multi-head attention critic: per-agent Q functions whose view of the
//! other agents is a learned softmax-weighted sum of their embeddings,
//! with per-action outputs so the exact expected-Q baseline is one
//! forward pass.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numcore::{
    affine_backward, affine_forward, entropy, leaky_relu_backward, leaky_relu_forward,
    softmax, softmax_backward_row, DenseMatrix, ParamTensor, LEAKY_SLOPE,
};

/// One-layer embedding: leaky ReLU of an affine map.
#[derive(Clone, Debug)]
pub struct Encoder {
    pub w: ParamTensor,
    pub b: ParamTensor,
}

impl Encoder {
    fn new(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        Encoder {
            w: ParamTensor::uniform_init(in_dim, out_dim, rng),
            b: ParamTensor::zeros(1, out_dim),
        }
    }

    fn forward(&self, x: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
        let pre = affine_forward(x, &self.w, Some(&self.b))?;
        let out = leaky_relu_forward(&pre, LEAKY_SLOPE);
        Ok((pre, out))
    }

    fn backward(
        &mut self,
        x: &DenseMatrix,
        pre: &DenseMatrix,
        dout: &DenseMatrix,
    ) -> Result<DenseMatrix> {
        let dpre = leaky_relu_backward(pre, dout, LEAKY_SLOPE);
        affine_backward(x, &mut self.w, Some(&mut self.b), &dpre)
    }
}

/// Query/key/value projections of one head, shared by every agent.
#[derive(Clone, Debug)]
pub struct AttnHead {
    pub w_q: ParamTensor,
    pub w_k: ParamTensor,
    pub v: ParamTensor,
}

/// Per-agent output network: concat(own embedding, attended context) ->
/// hidden -> one value per own action.
#[derive(Clone, Debug)]
pub struct HeadNet {
    pub w1: ParamTensor,
    pub b1: ParamTensor,
    pub w2: ParamTensor,
    pub b2: ParamTensor,
}

/// Attention weights recorded during a forward pass: `weights[i][h]` is a
/// batch x (N-1) matrix over the other agents in ascending index order.
#[derive(Clone, Debug)]
pub struct AttentionTrace {
    pub weights: Vec<Vec<DenseMatrix>>,
}

impl AttentionTrace {
    pub fn num_agents(&self) -> usize {
        self.weights.len()
    }

    pub fn num_heads(&self) -> usize {
        self.weights.first().map_or(0, |w| w.len())
    }

    /// Shannon entropy of one agent/head/row weight vector, in nats.
    pub fn row_entropy(&self, agent: usize, head: usize, row: usize) -> f64 {
        entropy(self.weights[agent][head].row(row))
    }

    /// Mean entropy over the batch for one agent/head pair.
    pub fn mean_entropy(&self, agent: usize, head: usize) -> f64 {
        let m = &self.weights[agent][head];
        if m.rows() == 0 {
            return 0.0;
        }
        (0..m.rows()).map(|r| entropy(m.row(r))).sum::<f64>() / m.rows() as f64
    }
}

/// Everything the backward pass needs from a forward evaluation.
pub struct CriticCache {
    batch: usize,
    obs_in: Vec<DenseMatrix>,
    obs_pre: Vec<DenseMatrix>,
    e_obs: Vec<DenseMatrix>,
    sa_in: Vec<DenseMatrix>,
    sa_pre: Vec<DenseMatrix>,
    e_sa: Vec<DenseMatrix>,
    /// queries[h][i], keys[h][j]: batch x d_k. Empty in uniform mode.
    queries: Vec<Vec<DenseMatrix>>,
    keys: Vec<Vec<DenseMatrix>>,
    val_pre: Vec<Vec<DenseMatrix>>,
    vals: Vec<Vec<DenseMatrix>>,
    /// alphas[i][h]: batch x (N-1), columns over j != i ascending.
    alphas: Vec<Vec<DenseMatrix>>,
    z: Vec<DenseMatrix>,
    f_pre: Vec<DenseMatrix>,
    f_hidden: Vec<DenseMatrix>,
}

/// The attention critic. `uniform` freezes every attention weight at
/// 1/(N-1), the ablation baseline; queries and keys then go unused.
#[derive(Clone, Debug)]
pub struct AttentionCritic {
    sa_encoders: Vec<Encoder>,
    obs_encoders: Vec<Encoder>,
    heads: Vec<AttnHead>,
    head_nets: Vec<HeadNet>,
    obs_dims: Vec<usize>,
    action_dims: Vec<usize>,
    embed_dim: usize,
    head_dim: usize,
    uniform: bool,
}

pub fn one_hot_rows(indices: &[usize], width: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(indices.len(), width);
    for (r, &k) in indices.iter().enumerate() {
        debug_assert!(k < width);
        *m.at_mut(r, k) = 1.0;
    }
    m
}

impl AttentionCritic {
    pub fn new(
        obs_dims: &[usize],
        action_dims: &[usize],
        embed_dim: usize,
        num_heads: usize,
        uniform: bool,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if obs_dims.is_empty() || obs_dims.len() != action_dims.len() {
            return Err(Error::Config(format!(
                "need matching non-empty dimension lists, got {} obs and {} action entries",
                obs_dims.len(),
                action_dims.len()
            )));
        }
        if num_heads == 0 || embed_dim % num_heads != 0 {
            return Err(Error::Config(format!(
                "head count {num_heads} must divide the embedding dim {embed_dim}"
            )));
        }
        let head_dim = embed_dim / num_heads;
        let n = obs_dims.len();
        let sa_encoders = (0..n)
            .map(|i| Encoder::new(obs_dims[i] + action_dims[i], embed_dim, rng))
            .collect();
        let obs_encoders = (0..n).map(|i| Encoder::new(obs_dims[i], embed_dim, rng)).collect();
        let heads = (0..num_heads)
            .map(|_| AttnHead {
                w_q: ParamTensor::uniform_init(embed_dim, head_dim, rng),
                w_k: ParamTensor::uniform_init(embed_dim, head_dim, rng),
                v: ParamTensor::uniform_init(embed_dim, head_dim, rng),
            })
            .collect();
        let head_nets = (0..n)
            .map(|i| HeadNet {
                w1: ParamTensor::uniform_init(2 * embed_dim, embed_dim, rng),
                b1: ParamTensor::zeros(1, embed_dim),
                w2: ParamTensor::uniform_init(embed_dim, action_dims[i], rng),
                b2: ParamTensor::zeros(1, action_dims[i]),
            })
            .collect();
        Ok(AttentionCritic {
            sa_encoders,
            obs_encoders,
            heads,
            head_nets,
            obs_dims: obs_dims.to_vec(),
            action_dims: action_dims.to_vec(),
            embed_dim,
            head_dim,
            uniform,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.obs_dims.len()
    }

    pub fn num_heads(&self) -> usize {
        self.heads.len()
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn obs_dims(&self) -> &[usize] {
        &self.obs_dims
    }

    pub fn action_dims(&self) -> &[usize] {
        &self.action_dims
    }

    /// Input width of agent i's state-action encoder, the part of the
    /// critic whose size tracks the environment.
    pub fn encoder_input_dim(&self, agent: usize) -> usize {
        self.obs_dims[agent] + self.action_dims[agent]
    }

    /// Input width of the per-agent output network f_i; independent of N.
    pub fn head_net_input_dim(&self) -> usize {
        2 * self.embed_dim
    }

    fn check_inputs(&self, obs: &[DenseMatrix], actions: &[Vec<usize>]) -> Result<usize> {
        let n = self.num_agents();
        if obs.len() != n || actions.len() != n {
            return Err(Error::Dimension(format!(
                "critic built for {n} agents, got {} observation and {} action sets",
                obs.len(),
                actions.len()
            )));
        }
        let batch = obs[0].rows();
        for (i, o) in obs.iter().enumerate() {
            if o.rows() != batch || o.cols() != self.obs_dims[i] {
                return Err(Error::Dimension(format!(
                    "agent {i}: observation block is {}x{}, expected {batch}x{}",
                    o.rows(),
                    o.cols(),
                    self.obs_dims[i]
                )));
            }
            if actions[i].len() != batch {
                return Err(Error::Dimension(format!(
                    "agent {i}: {} actions for a batch of {batch}",
                    actions[i].len()
                )));
            }
            for &a in &actions[i] {
                if a >= self.action_dims[i] {
                    return Err(Error::Action { agent: i, action: a, limit: self.action_dims[i] });
                }
            }
        }
        Ok(batch)
    }

    /// Batched evaluation for every agent at once. Returns, per agent, a
    /// batch x |A_i| matrix holding Q_i(o, (a_i', a_-i)) for every own
    /// action a_i'; agent i's entry in `actions` only feeds the keys and
    /// values the other agents attend to.
    pub fn forward(
        &self,
        obs: &[DenseMatrix],
        actions: &[Vec<usize>],
    ) -> Result<(Vec<DenseMatrix>, CriticCache)> {
        let n = self.num_agents();
        let batch = self.check_inputs(obs, actions)?;
        let d = self.embed_dim;
        let dk = self.head_dim;
        let nh = self.heads.len();
        let inv_sqrt_dk = 1.0 / (dk as f64).sqrt();

        let mut obs_in = Vec::with_capacity(n);
        let mut obs_pre = Vec::with_capacity(n);
        let mut e_obs = Vec::with_capacity(n);
        let mut sa_in = Vec::with_capacity(n);
        let mut sa_pre = Vec::with_capacity(n);
        let mut e_sa = Vec::with_capacity(n);
        for i in 0..n {
            let onehot = one_hot_rows(&actions[i], self.action_dims[i]);
            let sin = DenseMatrix::hconcat(&[&obs[i], &onehot])?;
            let (spre, sout) = self.sa_encoders[i].forward(&sin)?;
            sa_in.push(sin);
            sa_pre.push(spre);
            e_sa.push(sout);
            let (opre, oout) = self.obs_encoders[i].forward(&obs[i])?;
            obs_in.push(obs[i].clone());
            obs_pre.push(opre);
            e_obs.push(oout);
        }

        let mut queries: Vec<Vec<DenseMatrix>> = Vec::with_capacity(nh);
        let mut keys: Vec<Vec<DenseMatrix>> = Vec::with_capacity(nh);
        let mut val_pre: Vec<Vec<DenseMatrix>> = Vec::with_capacity(nh);
        let mut vals: Vec<Vec<DenseMatrix>> = Vec::with_capacity(nh);
        for head in &self.heads {
            let mut q_h = Vec::with_capacity(n);
            let mut k_h = Vec::with_capacity(n);
            let mut vp_h = Vec::with_capacity(n);
            let mut v_h = Vec::with_capacity(n);
            for i in 0..n {
                if self.uniform {
                    q_h.push(DenseMatrix::zeros(0, 0));
                    k_h.push(DenseMatrix::zeros(0, 0));
                } else {
                    q_h.push(e_obs[i].matmul(&head.w_q.value)?);
                    k_h.push(e_sa[i].matmul(&head.w_k.value)?);
                }
                let vp = e_sa[i].matmul(&head.v.value)?;
                v_h.push(leaky_relu_forward(&vp, LEAKY_SLOPE));
                vp_h.push(vp);
            }
            queries.push(q_h);
            keys.push(k_h);
            val_pre.push(vp_h);
            vals.push(v_h);
        }

        let mut alphas: Vec<Vec<DenseMatrix>> = Vec::with_capacity(n);
        let mut z = Vec::with_capacity(n);
        let mut f_pre = Vec::with_capacity(n);
        let mut f_hidden = Vec::with_capacity(n);
        let mut qvals = Vec::with_capacity(n);
        for i in 0..n {
            let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let mut alphas_i = Vec::with_capacity(nh);
            let mut zi = DenseMatrix::zeros(batch, d + nh * dk);
            for r in 0..batch {
                let row = zi.row_mut(r);
                row[..d].copy_from_slice(&e_obs[i].row(r)[..d]);
            }
            for h in 0..nh {
                let alpha = if others.is_empty() {
                    DenseMatrix::zeros(batch, 0)
                } else if self.uniform {
                    let mut a = DenseMatrix::zeros(batch, others.len());
                    a.fill(1.0 / others.len() as f64);
                    a
                } else {
                    let mut logits = DenseMatrix::zeros(batch, others.len());
                    for (jj, &j) in others.iter().enumerate() {
                        let q = &queries[h][i];
                        let k = &keys[h][j];
                        for r in 0..batch {
                            let mut s = 0.0;
                            let qr = q.row(r);
                            let kr = k.row(r);
                            for c in 0..dk {
                                s += qr[c] * kr[c];
                            }
                            *logits.at_mut(r, jj) = s * inv_sqrt_dk;
                        }
                    }
                    let mut a = DenseMatrix::zeros(batch, others.len());
                    for r in 0..batch {
                        let p = softmax(logits.row(r))?;
                        a.row_mut(r).copy_from_slice(&p);
                    }
                    a
                };
                let offset = d + h * dk;
                for r in 0..batch {
                    let arow = alpha.row(r);
                    let zrow = zi.row_mut(r);
                    for (jj, &j) in others.iter().enumerate() {
                        let vrow = vals[h][j].row(r);
                        let w = arow[jj];
                        for c in 0..dk {
                            zrow[offset + c] += w * vrow[c];
                        }
                    }
                }
                alphas_i.push(alpha);
            }
            let net = &self.head_nets[i];
            let pre = affine_forward(&zi, &net.w1, Some(&net.b1))?;
            let hid = leaky_relu_forward(&pre, LEAKY_SLOPE);
            let q = affine_forward(&hid, &net.w2, Some(&net.b2))?;
            alphas.push(alphas_i);
            z.push(zi);
            f_pre.push(pre);
            f_hidden.push(hid);
            qvals.push(q);
        }

        Ok((
            qvals,
            CriticCache {
                batch,
                obs_in,
                obs_pre,
                e_obs,
                sa_in,
                sa_pre,
                e_sa,
                queries,
                keys,
                val_pre,
                vals,
                alphas,
                z,
                f_pre,
                f_hidden,
            },
        ))
    }

    /// Accumulates parameter gradients given dL/dQ per agent (batch x |A_i|).
    pub fn backward(&mut self, cache: &CriticCache, dq: &[DenseMatrix]) -> Result<()> {
        let n = self.num_agents();
        if dq.len() != n {
            return Err(Error::Dimension(format!(
                "{} upstream gradients for {n} agents",
                dq.len()
            )));
        }
        let d = self.embed_dim;
        let dk = self.head_dim;
        let nh = self.heads.len();
        let batch = cache.batch;
        let inv_sqrt_dk = 1.0 / (dk as f64).sqrt();

        let mut de_obs: Vec<DenseMatrix> = (0..n).map(|_| DenseMatrix::zeros(batch, d)).collect();
        let mut de_sa: Vec<DenseMatrix> = (0..n).map(|_| DenseMatrix::zeros(batch, d)).collect();
        let mut dqueries: Vec<Vec<DenseMatrix>> =
            (0..nh).map(|_| (0..n).map(|_| DenseMatrix::zeros(batch, dk)).collect()).collect();
        let mut dkeys = dqueries.clone();
        let mut dvals = dqueries.clone();

        for i in 0..n {
            let net = &mut self.head_nets[i];
            let dhid = affine_backward(&cache.f_hidden[i], &mut net.w2, Some(&mut net.b2), &dq[i])?;
            let dpre = leaky_relu_backward(&cache.f_pre[i], &dhid, LEAKY_SLOPE);
            let dz = affine_backward(&cache.z[i], &mut net.w1, Some(&mut net.b1), &dpre)?;

            for r in 0..batch {
                let dzr = dz.row(r);
                let der = de_obs[i].row_mut(r);
                for c in 0..d {
                    der[c] += dzr[c];
                }
            }

            let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            if others.is_empty() {
                continue;
            }
            for h in 0..nh {
                let alpha = &cache.alphas[i][h];
                let offset = d + h * dk;
                let mut dalpha = DenseMatrix::zeros(batch, others.len());
                for r in 0..batch {
                    let dxr = &dz.row(r)[offset..offset + dk];
                    for (jj, &j) in others.iter().enumerate() {
                        let vrow = cache.vals[h][j].row(r);
                        let mut dot = 0.0;
                        for c in 0..dk {
                            dot += dxr[c] * vrow[c];
                        }
                        *dalpha.at_mut(r, jj) = dot;
                        let a = alpha.at(r, jj);
                        let dvrow = dvals[h][j].row_mut(r);
                        for c in 0..dk {
                            dvrow[c] += a * dxr[c];
                        }
                    }
                }
                if self.uniform {
                    // alpha is a constant here, nothing flows to queries/keys.
                    continue;
                }
                let mut ds = vec![0.0; others.len()];
                for r in 0..batch {
                    softmax_backward_row(alpha.row(r), dalpha.row(r), &mut ds);
                    let qrow = cache.queries[h][i].row(r).to_vec();
                    let dqrow = dqueries[h][i].row_mut(r);
                    for (jj, &j) in others.iter().enumerate() {
                        let coeff = ds[jj] * inv_sqrt_dk;
                        let krow = cache.keys[h][j].row(r);
                        for c in 0..dk {
                            dqrow[c] += coeff * krow[c];
                        }
                    }
                    for (jj, &j) in others.iter().enumerate() {
                        let coeff = ds[jj] * inv_sqrt_dk;
                        let dkrow = dkeys[h][j].row_mut(r);
                        for c in 0..dk {
                            dkrow[c] += coeff * qrow[c];
                        }
                    }
                }
            }
        }

        for h in 0..nh {
            let head = &mut self.heads[h];
            for i in 0..n {
                if !self.uniform && n > 1 {
                    let dwq = cache.e_obs[i].transpose_matmul(&dqueries[h][i])?;
                    head.w_q.grad.add_scaled(&dwq, 1.0);
                    de_obs[i].add_scaled(&dqueries[h][i].matmul_transpose(&head.w_q.value)?, 1.0);
                    let dwk = cache.e_sa[i].transpose_matmul(&dkeys[h][i])?;
                    head.w_k.grad.add_scaled(&dwk, 1.0);
                    de_sa[i].add_scaled(&dkeys[h][i].matmul_transpose(&head.w_k.value)?, 1.0);
                }
                let dvp = leaky_relu_backward(&cache.val_pre[h][i], &dvals[h][i], LEAKY_SLOPE);
                let dv = cache.e_sa[i].transpose_matmul(&dvp)?;
                head.v.grad.add_scaled(&dv, 1.0);
                de_sa[i].add_scaled(&dvp.matmul_transpose(&head.v.value)?, 1.0);
            }
        }

        for i in 0..n {
            self.obs_encoders[i].backward(&cache.obs_in[i], &cache.obs_pre[i], &de_obs[i])?;
            self.sa_encoders[i].backward(&cache.sa_in[i], &cache.sa_pre[i], &de_sa[i])?;
        }
        Ok(())
    }

    /// Copies the attention weights out of a forward cache.
    pub fn trace(&self, cache: &CriticCache) -> AttentionTrace {
        AttentionTrace { weights: cache.alphas.clone() }
    }

    /// Per-action values for one agent at a single joint observation.
    /// Every other agent's action must be present; the queried agent's own
    /// entry is ignored (its per-action outputs cover all choices).
    pub fn q_values(
        &self,
        agent: usize,
        obs: &[Vec<f64>],
        actions: &[Option<usize>],
    ) -> Result<(Vec<f64>, AttentionTrace)> {
        let n = self.num_agents();
        if agent >= n {
            return Err(Error::Dimension(format!("agent {agent} out of range for {n}")));
        }
        if obs.len() != n || actions.len() != n {
            return Err(Error::Dimension(format!(
                "expected {n} observations and actions, got {} and {}",
                obs.len(),
                actions.len()
            )));
        }
        for (j, a) in actions.iter().enumerate() {
            if j != agent && a.is_none() {
                return Err(Error::Contract(format!(
                    "per-action values for agent {agent} need every other agent's action; \
                     agent {j} has none"
                )));
            }
        }
        let obs_mats: Vec<DenseMatrix> = obs.iter().map(|o| DenseMatrix::from_row(o)).collect();
        let acts: Vec<Vec<usize>> = actions.iter().map(|a| vec![a.unwrap_or(0)]).collect();
        let (qvals, cache) = self.forward(&obs_mats, &acts)?;
        Ok((qvals[agent].row(0).to_vec(), self.trace(&cache)))
    }

    /// Tensors in a fixed order shared with `named_params`.
    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out = Vec::new();
        for enc in &mut self.sa_encoders {
            out.push(&mut enc.w);
            out.push(&mut enc.b);
        }
        for enc in &mut self.obs_encoders {
            out.push(&mut enc.w);
            out.push(&mut enc.b);
        }
        for head in &mut self.heads {
            out.push(&mut head.w_q);
            out.push(&mut head.w_k);
            out.push(&mut head.v);
        }
        for net in &mut self.head_nets {
            out.push(&mut net.w1);
            out.push(&mut net.b1);
            out.push(&mut net.w2);
            out.push(&mut net.b2);
        }
        out
    }

    pub fn named_params(&self) -> Vec<(String, &ParamTensor)> {
        let mut out = Vec::new();
        for (i, enc) in self.sa_encoders.iter().enumerate() {
            out.push((format!("sa_encoder.{i}.w"), &enc.w));
            out.push((format!("sa_encoder.{i}.b"), &enc.b));
        }
        for (i, enc) in self.obs_encoders.iter().enumerate() {
            out.push((format!("obs_encoder.{i}.w"), &enc.w));
            out.push((format!("obs_encoder.{i}.b"), &enc.b));
        }
        for (h, head) in self.heads.iter().enumerate() {
            out.push((format!("head.{h}.w_q"), &head.w_q));
            out.push((format!("head.{h}.w_k"), &head.w_k));
            out.push((format!("head.{h}.v"), &head.v));
        }
        for (i, net) in self.head_nets.iter().enumerate() {
            out.push((format!("f.{i}.w1"), &net.w1));
            out.push((format!("f.{i}.b1"), &net.b1));
            out.push((format!("f.{i}.w2"), &net.w2));
            out.push((format!("f.{i}.b2"), &net.b2));
        }
        out
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn adam_step(&mut self, lr: f64) {
        for p in self.params_mut() {
            p.adam_step_default(lr);
        }
    }

    pub fn soft_update_from(&mut self, live: &AttentionCritic, tau: f64) {
        let live_params: Vec<&ParamTensor> = live.named_params().into_iter().map(|(_, p)| p).collect();
        for (target, source) in self.params_mut().into_iter().zip(live_params) {
            target.soft_update_from(source, tau);
        }
    }
}
