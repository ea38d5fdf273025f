use rand::Rng;

use crate::diffgraph::{sigmoid, Graph, Tensor, Var};
use crate::dynamics::{squash, squash_graph, DynamicsModel};
use crate::seeding::{task_rng, STREAM_INIT};
use crate::stl::Trajectory;

use super::PolicyError;

/// Stacked LSTM with a bounded linear read-out.
///
/// Each layer holds `w_x` (`4H x in`), `w_h` (`4H x H`) and `b` (`4H x 1`),
/// gate blocks ordered input, forget, cell candidate, output. The read-out
/// `w_out` (`m x H`) has no bias; `u_i = lo_i + (hi_i - lo_i)/2 (tanh([w_out h]_i) + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmPolicy {
    state_dim: usize,
    enc_dim: usize,
    hidden: usize,
    layers: usize,
    u_lo: Vec<f64>,
    u_hi: Vec<f64>,
    params: Vec<Tensor>,
}

/// Recurrent state of every layer: `(h, c)` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    pub h: Vec<Tensor>,
    pub c: Vec<Tensor>,
}

impl LstmPolicy {
    /// Weights uniform in `[-1/sqrt(H), 1/sqrt(H)]`, biases zero except the
    /// forget gate at 1.
    pub fn new(
        state_dim: usize,
        enc_dim: usize,
        hidden: usize,
        layers: usize,
        u_lo: Vec<f64>,
        u_hi: Vec<f64>,
        seed: u64,
    ) -> Result<Self, PolicyError> {
        let mut p = Self::zeros(state_dim, enc_dim, hidden, layers, u_lo, u_hi)?;
        let mut rng = task_rng(seed, &[STREAM_INIT]);
        let k = 1.0 / (hidden as f64).sqrt();
        for (idx, t) in p.params.iter_mut().enumerate() {
            let is_bias = idx < 3 * layers && idx % 3 == 2;
            if is_bias {
                for r in hidden..2 * hidden {
                    t.set(r, 0, 1.0);
                }
            } else {
                for v in t.data_mut() {
                    *v = rng.random_range(-k..=k);
                }
            }
        }
        Ok(p)
    }

    /// All parameters zero.
    pub fn zeros(
        state_dim: usize,
        enc_dim: usize,
        hidden: usize,
        layers: usize,
        u_lo: Vec<f64>,
        u_hi: Vec<f64>,
    ) -> Result<Self, PolicyError> {
        if hidden == 0 || layers == 0 || state_dim == 0 {
            return Err(PolicyError::Architecture);
        }
        crate::dynamics::check_bounds(&u_lo, &u_hi)?;
        let m = u_lo.len();
        let mut params = Vec::with_capacity(3 * layers + 1);
        for l in 0..layers {
            let input = if l == 0 { state_dim + enc_dim } else { hidden };
            params.push(Tensor::zeros(4 * hidden, input));
            params.push(Tensor::zeros(4 * hidden, hidden));
            params.push(Tensor::zeros(4 * hidden, 1));
        }
        params.push(Tensor::zeros(m, hidden));
        Ok(LstmPolicy {
            state_dim,
            enc_dim,
            hidden,
            layers,
            u_lo,
            u_hi,
            params,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn enc_dim(&self) -> usize {
        self.enc_dim
    }

    pub fn input_dim(&self) -> usize {
        self.state_dim + self.enc_dim
    }

    pub fn output_dim(&self) -> usize {
        self.u_lo.len()
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn lower(&self) -> &[f64] {
        &self.u_lo
    }

    pub fn upper(&self) -> &[f64] {
        &self.u_hi
    }

    /// Parameters in checkpoint order: per layer `w_x, w_h, b`, then `w_out`.
    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.params.len());
        for l in 0..self.layers {
            for n in ["w_x", "w_h", "b"] {
                names.push(format!("layer{l}.{n}"));
            }
        }
        names.push("w_out".into());
        names
    }

    pub fn set_params(&mut self, params: Vec<Tensor>) -> Result<(), PolicyError> {
        if params.len() != self.params.len() || params.iter().zip(&self.params).any(|(a, b)| a.shape() != b.shape()) {
            return Err(PolicyError::ParamShape);
        }
        self.params = params;
        Ok(())
    }

    /// Total scalar parameter count.
    pub fn num_params(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn initial_state(&self) -> HiddenState {
        HiddenState {
            h: vec![Tensor::zeros(self.hidden, 1); self.layers],
            c: vec![Tensor::zeros(self.hidden, 1); self.layers],
        }
    }

    fn check_input(&self, len: usize) -> Result<(), PolicyError> {
        if len != self.input_dim() {
            return Err(PolicyError::Dimension {
                expected: self.input_dim(),
                found: len,
            });
        }
        Ok(())
    }

    /// One control step on plain tensors. Uses the same operation order as
    /// the tape version, so values agree bitwise.
    pub fn step(&self, hs: &HiddenState, s: &[f64]) -> Result<(Vec<f64>, HiddenState), PolicyError> {
        self.check_input(s.len())?;
        let hn = self.hidden;
        let mut x = Tensor::column(s.to_vec());
        let mut next = HiddenState {
            h: Vec::with_capacity(self.layers),
            c: Vec::with_capacity(self.layers),
        };
        for l in 0..self.layers {
            let (wx, wh, b) = (&self.params[3 * l], &self.params[3 * l + 1], &self.params[3 * l + 2]);
            let a = wx.matmul(&x);
            let r = wh.matmul(&hs.h[l]);
            let pre = a.zip_map(&r, |p, q| p + q).zip_map(b, |p, q| p + q);
            let gate = |k: usize, f: fn(f64) -> f64| {
                Tensor::from_vec(hn, 1, pre.data()[k * hn..(k + 1) * hn].iter().map(|&v| f(v)).collect())
            };
            let (i, f, g, o) = (gate(0, sigmoid), gate(1, sigmoid), gate(2, f64::tanh), gate(3, sigmoid));
            let fc = f.zip_map(&hs.c[l], |p, q| p * q);
            let ig = i.zip_map(&g, |p, q| p * q);
            let c = fc.zip_map(&ig, |p, q| p + q);
            let h = o.zip_map(&c.map(f64::tanh), |p, q| p * q);
            x = h.clone();
            next.h.push(h);
            next.c.push(c);
        }
        let y = self.params[3 * self.layers].matmul(&x);
        let u = y
            .data()
            .iter()
            .enumerate()
            .map(|(k, &v)| squash(v, self.u_lo[k], self.u_hi[k]))
            .collect();
        Ok((u, next))
    }

    /// One control step on the tape. `params` are the graph nodes of
    /// [`Self::params`] in order; `h` and `c` are per-layer columns.
    pub fn step_graph(&self, g: &mut Graph, params: &[Var], h: &mut [Var], c: &mut [Var], s: Var) -> Var {
        let hn = self.hidden;
        let mut x = s;
        for l in 0..self.layers {
            let a = g.matmul(params[3 * l], x);
            let r = g.matmul(params[3 * l + 1], h[l]);
            let pre = g.add(a, r);
            let pre = g.add(pre, params[3 * l + 2]);
            let i = g.slice_rows(pre, 0, hn);
            let f = g.slice_rows(pre, hn, hn);
            let gg = g.slice_rows(pre, 2 * hn, hn);
            let o = g.slice_rows(pre, 3 * hn, hn);
            let (i, f, gg, o) = (g.sigmoid(i), g.sigmoid(f), g.tanh(gg), g.sigmoid(o));
            let fc = g.mul(f, c[l]);
            let ig = g.mul(i, gg);
            let cn = g.add(fc, ig);
            let tc = g.tanh(cn);
            let hnode = g.mul(o, tc);
            h[l] = hnode;
            c[l] = cn;
            x = hnode;
        }
        let y = g.matmul(params[3 * self.layers], x);
        squash_graph(g, y, &self.u_lo, &self.u_hi)
    }

    fn check_system<D: DynamicsModel + ?Sized>(&self, dyn_: &D, x0: &[f64], z: &[f64]) -> Result<(), PolicyError> {
        if dyn_.state_dim() != self.state_dim || x0.len() != self.state_dim {
            return Err(PolicyError::Dimension {
                expected: self.state_dim,
                found: x0.len().min(dyn_.state_dim()),
            });
        }
        if dyn_.input_dim() != self.output_dim() {
            return Err(PolicyError::Dimension {
                expected: self.output_dim(),
                found: dyn_.input_dim(),
            });
        }
        if z.len() != self.enc_dim {
            return Err(PolicyError::Dimension {
                expected: self.enc_dim,
                found: z.len(),
            });
        }
        Ok(())
    }

    /// Closed-loop rollout of `t_final` steps; returns the states and the
    /// applied inputs.
    pub fn rollout<D: DynamicsModel + ?Sized>(
        &self,
        dyn_: &D,
        x0: &[f64],
        z: &[f64],
        t_final: usize,
    ) -> Result<(Trajectory, Vec<Vec<f64>>), PolicyError> {
        self.check_system(dyn_, x0, z)?;
        let mut hs = self.initial_state();
        let mut states = vec![x0.to_vec()];
        let mut inputs = Vec::with_capacity(t_final);
        let mut s = Vec::with_capacity(self.input_dim());
        for _ in 0..t_final {
            s.clear();
            s.extend_from_slice(states.last().unwrap());
            s.extend_from_slice(z);
            let (u, next) = self.step(&hs, &s)?;
            hs = next;
            states.push(dyn_.step(states.last().unwrap(), &u));
            inputs.push(u);
        }
        let traj = Trajectory::new(states).expect("state dimension is preserved");
        Ok((traj, inputs))
    }

    /// Rollout on the tape; returns the `t_final + 1` state nodes.
    pub fn rollout_graph<D: DynamicsModel + ?Sized>(
        &self,
        g: &mut Graph,
        params: &[Var],
        dyn_: &D,
        x0: &[f64],
        z: &[f64],
        t_final: usize,
    ) -> Result<Vec<Var>, PolicyError> {
        self.check_system(dyn_, x0, z)?;
        let mut h: Vec<Var> = (0..self.layers)
            .map(|_| g.constant(Tensor::zeros(self.hidden, 1)))
            .collect();
        let mut c = h.clone();
        let enc = (!z.is_empty()).then(|| g.constant(Tensor::column(z.to_vec())));
        let mut states = vec![g.constant(Tensor::column(x0.to_vec()))];
        for _ in 0..t_final {
            let x = *states.last().unwrap();
            let s = match enc {
                Some(e) => g.concat(&[x, e]).expect("two parts"),
                None => x,
            };
            let u = self.step_graph(g, params, &mut h, &mut c, s);
            states.push(dyn_.step_graph(g, x, u));
        }
        Ok(states)
    }
}
