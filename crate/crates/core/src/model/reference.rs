use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DynModel, EventCtx, ModelConfig, ModelError, ModelKind};
use crate::graph::Direction;
use crate::tensor::{ParamSet, ParamTensor, Var};
use crate::{NodeId, Real};

const W_AGG: usize = 0;
const W_SELF: usize = 1;
const W_PEER: usize = 2;
const W_TIME: usize = 3;
const B: usize = 4;
const W_PRED: usize = 5;
const B_PRED: usize = 6;
const W_PROP: usize = 7;

fn init_params(dim: usize, with_prop: bool, zero: bool, seed: u64) -> ParamSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensor = |name: &str, rows: usize, cols: usize, random: bool| {
        let data = if random && !zero {
            let std = 1.0 / (cols as Real).sqrt();
            let normal = Normal::new(0.0, std).expect("finite std");
            (0..rows * cols).map(|_| normal.sample(&mut rng)).collect()
        } else {
            vec![0.0; rows * cols]
        };
        ParamTensor::new(name, rows, cols, data).expect("sizes agree")
    };
    let mut ps = ParamSet::new();
    ps.push(tensor("w_agg", dim, dim, true));
    ps.push(tensor("w_self", dim, dim, true));
    ps.push(tensor("w_peer", dim, dim, true));
    ps.push(tensor("w_time", dim, 1, true));
    ps.push(tensor("b", dim, 1, false));
    ps.push(tensor("w_pred", 1, 2 * dim, true));
    ps.push(tensor("b_pred", 1, 1, false));
    if with_prop {
        ps.push(tensor("w_prop", dim, dim, true));
    }
    ps
}

fn check_event_node(cx: &EventCtx<'_>, n: NodeId) -> Result<(), ModelError> {
    let e = &cx.sub.event;
    if n == e.u || n == e.v {
        Ok(())
    } else {
        Err(ModelError::NotEventNode { node: n, seq: e.seq })
    }
}

fn aggregate(cx: &mut EventCtx<'_>, n: NodeId, dir: Direction) -> crate::Result<Var> {
    check_event_node(cx, n)?;
    let nbrs = match dir {
        Direction::In => cx.sub.in_neighbors(n),
        Direction::Out => cx.sub.out_neighbors(n),
        Direction::Both => cx.sub.neighbors(n),
    };
    if nbrs.is_empty() {
        return Ok(cx.tape.zeros(cx.dim()));
    }
    let zs = nbrs.into_iter().map(|w| cx.emb(w)).collect::<crate::Result<Vec<_>>>()?;
    let mean = cx.tape.mean_vectors(&zs)?;
    let w = cx.param(W_AGG);
    let lin = cx.tape.matvec(w, mean)?;
    Ok(cx.tape.tanh(lin))
}

fn update_emb(cx: &mut EventCtx<'_>, n: NodeId, h_peer: Var, dt: Real) -> crate::Result<Var> {
    check_event_node(cx, n)?;
    if dt < 0.0 || dt.is_nan() {
        return Err(ModelError::NegativeDelta(dt).into());
    }
    let z_old = cx.emb(n)?;
    let (w_peer, w_self, w_time, b) = (cx.param(W_PEER), cx.param(W_SELF), cx.param(W_TIME), cx.param(B));
    let peer = cx.tape.matvec(w_peer, h_peer)?;
    let own = cx.tape.matvec(w_self, z_old)?;
    let time = cx.tape.scale(w_time, dt.ln_1p());
    let pre = cx.tape.sum(&[peer, own, time, b])?;
    Ok(cx.tape.tanh(pre))
}

fn predict(cx: &mut EventCtx<'_>, z_u: Var, z_v: Var) -> crate::Result<Var> {
    let pair = cx.tape.concat(&[z_u, z_v])?;
    let (w, b) = (cx.param(W_PRED), cx.param(B_PRED));
    let s = cx.tape.matvec(w, pair)?;
    Ok(cx.tape.add(s, b)?)
}

/// Endpoint-only model: `U_e = {u, v}`.
#[derive(Clone, Debug)]
pub struct DyRepLite {
    dim: usize,
    aggregation: Direction,
    params: ParamSet,
}

impl DyRepLite {
    pub fn new(cfg: &ModelConfig) -> Self {
        DyRepLite {
            dim: cfg.dim,
            aggregation: cfg.aggregation(),
            params: init_params(cfg.dim, false, cfg.zero_init, cfg.seed),
        }
    }
}

impl DynModel for DyRepLite {
    fn kind(&self) -> ModelKind {
        ModelKind::DyrepLite
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn update_radius(&self) -> usize {
        0
    }

    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn aggregate(&self, cx: &mut EventCtx<'_>, n: NodeId) -> crate::Result<Var> {
        aggregate(cx, n, self.aggregation)
    }

    fn update_emb(&self, cx: &mut EventCtx<'_>, n: NodeId, _h_self: Var, h_peer: Var, dt: Real) -> crate::Result<Var> {
        update_emb(cx, n, h_peer, dt)
    }

    fn prop_update(&self, _cx: &mut EventCtx<'_>, _n: NodeId, _z_old: Var, _z_new: Var) -> crate::Result<Var> {
        Err(ModelError::NoPropagation.into())
    }

    fn predict(&self, cx: &mut EventCtx<'_>, z_u: Var, z_v: Var) -> crate::Result<Var> {
        predict(cx, z_u, z_v)
    }
}

/// Diffusion model: event updates also flow to the endpoints' neighbours,
/// damped by `exp(-decay * Δt)`.
#[derive(Clone, Debug)]
pub struct DiffusionLite {
    dim: usize,
    aggregation: Direction,
    decay: Real,
    params: ParamSet,
}

impl DiffusionLite {
    pub fn new(cfg: &ModelConfig) -> Result<Self, ModelError> {
        if !(cfg.decay >= 0.0 && cfg.decay.is_finite()) {
            return Err(ModelError::BadDecay(cfg.decay));
        }
        Ok(DiffusionLite {
            dim: cfg.dim,
            aggregation: cfg.aggregation(),
            decay: cfg.decay,
            params: init_params(cfg.dim, true, cfg.zero_init, cfg.seed),
        })
    }
}

impl DynModel for DiffusionLite {
    fn kind(&self) -> ModelKind {
        ModelKind::DiffusionLite
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn update_radius(&self) -> usize {
        1
    }

    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn decay(&self) -> Option<Real> {
        Some(self.decay)
    }

    fn aggregate(&self, cx: &mut EventCtx<'_>, n: NodeId) -> crate::Result<Var> {
        aggregate(cx, n, self.aggregation)
    }

    fn update_emb(&self, cx: &mut EventCtx<'_>, n: NodeId, _h_self: Var, h_peer: Var, dt: Real) -> crate::Result<Var> {
        update_emb(cx, n, h_peer, dt)
    }

    fn prop_update(&self, cx: &mut EventCtx<'_>, n: NodeId, z_old: Var, z_new: Var) -> crate::Result<Var> {
        check_event_node(cx, n)?;
        let dt = cx.sub.delta_for(n);
        let delta = cx.tape.sub(z_new, z_old)?;
        let w = cx.param(W_PROP);
        let lin = cx.tape.matvec(w, delta)?;
        let act = cx.tape.tanh(lin);
        Ok(cx.tape.scale(act, (-self.decay * dt).exp()))
    }

    fn predict(&self, cx: &mut EventCtx<'_>, z_u: Var, z_v: Var) -> crate::Result<Var> {
        predict(cx, z_u, z_v)
    }
}
