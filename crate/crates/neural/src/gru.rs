//! Gated recurrent cell.
//!
//! With zero weights and biases both gates sit at 0.5 and the candidate at 0,
//! so a step maps a state h to 0.5·h; tests lean on that anchor.

use rand::Rng;

use crate::store::{ParamBinding, ParamStore};
use crate::tape::{Tape, Val};
use crate::Error;

/// Parameter names and dimensions of one gated recurrent cell. The tensors
/// themselves live in a [`ParamStore`] under `<prefix>.{wxr,whr,br,...}`.
#[derive(Debug, Clone)]
pub struct GruCell {
    pub prefix: String,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

const GATES: [(&str, &str, &str); 3] = [
    ("wxr", "whr", "br"),
    ("wxz", "whz", "bz"),
    ("wxh", "whh", "bh"),
];

impl GruCell {
    pub fn new(prefix: &str, input_dim: usize, hidden_dim: usize) -> GruCell {
        GruCell {
            prefix: prefix.to_string(),
            input_dim,
            hidden_dim,
        }
    }

    fn name(&self, part: &str) -> String {
        format!("{}.{part}", self.prefix)
    }

    /// Register weight matrices (uniform fan-based init) and zero biases.
    pub fn register(&self, store: &mut ParamStore, seed: u64) -> Result<(), Error> {
        for (wx, wh, b) in GATES {
            store.register_uniform(&self.name(wx), self.input_dim, self.hidden_dim, seed)?;
            store.register_uniform(&self.name(wh), self.hidden_dim, self.hidden_dim, seed)?;
            store.register_zeros(&self.name(b), &[1, self.hidden_dim])?;
        }
        Ok(())
    }

    /// Register with every tensor zero, for tests that want the 0.5·h anchor.
    pub fn register_zeroed(&self, store: &mut ParamStore) -> Result<(), Error> {
        for (wx, wh, b) in GATES {
            store.register_zeros(&self.name(wx), &[self.input_dim, self.hidden_dim])?;
            store.register_zeros(&self.name(wh), &[self.hidden_dim, self.hidden_dim])?;
            store.register_zeros(&self.name(b), &[1, self.hidden_dim])?;
        }
        Ok(())
    }

    fn gate(
        &self,
        tape: &mut Tape,
        binding: &ParamBinding,
        names: (&str, &str, &str),
        x: Val,
        h: Val,
    ) -> Result<Val, Error> {
        let wx = binding[&self.name(names.0)];
        let wh = binding[&self.name(names.1)];
        let b = binding[&self.name(names.2)];
        let xm = tape.matmul(x, wx)?;
        let hm = tape.matmul(h, wh)?;
        let s = tape.add(xm, hm)?;
        tape.add(s, b)
    }

    /// One recurrent update: reset gate r, update gate z, candidate h̃,
    /// output (1−z)⊙h + z⊙h̃.
    pub fn step(
        &self,
        tape: &mut Tape,
        binding: &ParamBinding,
        input: Val,
        state: Val,
    ) -> Result<Val, Error> {
        let (ir, ic) = tape.value(input).dims2();
        let (hr, hc) = tape.value(state).dims2();
        if (ir, ic) != (1, self.input_dim) || (hr, hc) != (1, self.hidden_dim) {
            return Err(Error::ShapeMismatch {
                op: "gru_step".into(),
                detail: format!(
                    "input [{ir},{ic}] state [{hr},{hc}] for cell {}x{}",
                    self.input_dim, self.hidden_dim
                ),
            });
        }
        let pre_r = self.gate(tape, binding, GATES[0], input, state)?;
        let r = tape.sigmoid(pre_r)?;
        let pre_z = self.gate(tape, binding, GATES[1], input, state)?;
        let z = tape.sigmoid(pre_z)?;

        let rh = tape.mul(r, state)?;
        let wxh = binding[&self.name("wxh")];
        let whh = binding[&self.name("whh")];
        let bh = binding[&self.name("bh")];
        let xm = tape.matmul(input, wxh)?;
        let hm = tape.matmul(rh, whh)?;
        let s = tape.add(xm, hm)?;
        let pre_c = tape.add(s, bh)?;
        let candidate = tape.tanh(pre_c)?;

        let neg_z = tape.scale(z, -1.0)?;
        let one_minus_z = tape.add_scalar(neg_z, 1.0)?;
        let keep = tape.mul(one_minus_z, state)?;
        let take = tape.mul(z, candidate)?;
        tape.add(keep, take)
    }
}

/// Plain-scalar reference of the same update, kept deliberately independent
/// of the tape for use as a test oracle.
pub fn scalar_reference_step(
    wxr: &[Vec<f64>],
    whr: &[Vec<f64>],
    br: &[f64],
    wxz: &[Vec<f64>],
    whz: &[Vec<f64>],
    bz: &[f64],
    wxh: &[Vec<f64>],
    whh: &[Vec<f64>],
    bh: &[f64],
    x: &[f64],
    h: &[f64],
) -> Vec<f64> {
    let dim = h.len();
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let lin = |wx: &[Vec<f64>], wh: &[Vec<f64>], b: &[f64], j: usize| {
        let mut s = b[j];
        for (i, xi) in x.iter().enumerate() {
            s += xi * wx[i][j];
        }
        for (i, hi) in h.iter().enumerate() {
            s += hi * wh[i][j];
        }
        s
    };
    let mut out = vec![0.0; dim];
    for j in 0..dim {
        let r: Vec<f64> = (0..dim).map(|k| sig(lin(wxr, whr, br, k))).collect();
        let z = sig(lin(wxz, whz, bz, j));
        let mut c = bh[j];
        for (i, xi) in x.iter().enumerate() {
            c += xi * wxh[i][j];
        }
        for k in 0..dim {
            c += r[k] * h[k] * whh[k][j];
        }
        let c = c.tanh();
        out[j] = (1.0 - z) * h[j] + z * c;
    }
    out
}
