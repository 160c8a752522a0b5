//! Versioned checkpoint files: a JSON map from parameter name to shape and
//! values. f64 round-trips exactly through the serializer's shortest-form
//! encoding.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::store::ParamStore;
use crate::tensor::Tensor;
use crate::Error;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub tensors: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn from_store(store: &ParamStore) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            tensors: store.tensors(),
        }
    }

    pub fn into_store(self) -> Result<ParamStore, Error> {
        let mut store = ParamStore::new();
        store.load_tensors(self.tensors)?;
        Ok(store)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Checkpoint, Error> {
        let cp: Checkpoint =
            serde_json::from_str(s).map_err(|e| Error::BadCheckpoint(e.to_string()))?;
        if cp.version != CHECKPOINT_VERSION {
            return Err(Error::BadCheckpoint(format!(
                "version {} (expected {})",
                cp.version, CHECKPOINT_VERSION
            )));
        }
        for (name, t) in &cp.tensors {
            let want: usize = t.shape.iter().product();
            if want != t.data.len() {
                return Err(Error::BadCheckpoint(format!(
                    "tensor {name}: shape {:?} vs {} values",
                    t.shape,
                    t.data.len()
                )));
            }
        }
        Ok(cp)
    }
}

#[allow(dead_code)]
fn assert_tensor_used(_: &Tensor) {}
