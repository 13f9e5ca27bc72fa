//! Named parameter tensors as plain data, so they can cross threads and be
//! serialized.

use rand::Rng;

use crate::config::HpnetConfig;
use crate::error::{HpnetError, Result};

pub const GATES: [&str; 4] = ["input", "forget", "output", "cell"];

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Param {
    fn zeros(name: String, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Param {
            name,
            shape,
            data: vec![0.0; n],
        }
    }
}

/// Every trainable tensor of a network, in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    pub(crate) params: Vec<Param>,
}

pub(crate) fn level_name(level: usize, part: &str) -> String {
    format!("level{}.{part}", level + 1)
}

impl ParamStore {
    /// All-zero parameters laid out for `config`.
    pub fn zeros(config: &HpnetConfig) -> Self {
        let (kt, kh, kw) = config.kernel_extent();
        let mut params = Vec::new();
        for l in 0..config.levels() {
            let c = config.channels[l];
            let c_in = config.input_channels(l);
            let gate_in = config.lstm_input_channels(l) + c;
            params.push(Param::zeros(
                level_name(l, "feedforward.weight"),
                vec![c, c_in, kt, kh, kw],
            ));
            params.push(Param::zeros(level_name(l, "error.weight"), vec![c, c_in, kt, kh, kw]));
            for gate in GATES {
                params.push(Param::zeros(
                    level_name(l, &format!("lstm.{gate}.weight")),
                    vec![c, gate_in, kt, kh, kw],
                ));
                params.push(Param::zeros(level_name(l, &format!("lstm.{gate}.bias")), vec![c]));
            }
            params.push(Param::zeros(
                level_name(l, "prediction.weight"),
                vec![c_in, c, kt, kh, kw],
            ));
            params.push(Param::zeros(level_name(l, "prediction.bias"), vec![c_in]));
        }
        ParamStore { params }
    }

    /// Weights uniform in `±sqrt(1 / fan_in)`, forget-gate biases 1, other
    /// biases 0.
    pub fn init<R: Rng>(config: &HpnetConfig, rng: &mut R) -> Self {
        let mut store = Self::zeros(config);
        for p in &mut store.params {
            if p.name.ends_with(".weight") {
                let fan_in: usize = p.shape[1..].iter().product();
                let bound = (1.0 / fan_in as f64).sqrt();
                for v in &mut p.data {
                    *v = rng.random_range(-bound..bound);
                }
            } else if p.name.ends_with("lstm.forget.bias") {
                p.data.fill(1.0);
            }
        }
        store
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.params.iter_mut().find(|p| p.name == name)
    }

    pub fn element_count(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    /// Builds a store from loaded tensors, checking names and shapes against
    /// the layout `config` implies.
    pub fn from_params(config: &HpnetConfig, params: Vec<Param>) -> Result<Self> {
        let expected = Self::zeros(config);
        if params.len() != expected.len() {
            return Err(HpnetError::contract(format!(
                "expected {} parameter tensors, found {}",
                expected.len(),
                params.len()
            )));
        }
        for (want, got) in expected.params.iter().zip(&params) {
            if want.name != got.name || want.shape != got.shape {
                return Err(HpnetError::contract(format!(
                    "parameter `{}` {:?} does not match expected `{}` {:?}",
                    got.name, got.shape, want.name, want.shape
                )));
            }
            if got.data.len() != want.data.len() {
                return Err(HpnetError::contract(format!(
                    "parameter `{}` has wrong length",
                    got.name
                )));
            }
        }
        Ok(ParamStore { params })
    }
}
