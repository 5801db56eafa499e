use super::{matvec, matvec_t, outer_acc};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    None,
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::None => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn slope(self, y: f64) -> f64 {
        match self {
            Activation::None => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(Activation::None),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            _ => Err(format!("unknown activation '{s}'")),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Activation::None => "none",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        })
    }
}

/// `y = act(W x + b)` with `W` row-major `b.len() × x.len()`.
pub fn dense(x: &[f64], w: &[f64], b: &[f64], act: Activation) -> Result<Vec<f64>> {
    if w.len() != b.len() * x.len() {
        return Err(Error::shape(format!(
            "dense: W has {} entries, expected {}×{}",
            w.len(),
            b.len(),
            x.len()
        )));
    }
    let mut y = matvec(w, x, b.len());
    for (yi, bi) in y.iter_mut().zip(b) {
        *yi = act.apply(*yi + bi);
    }
    Ok(y)
}

/// Accumulates `dW`, `db` and returns `dx`. `y` is the forward output.
pub fn dense_backward(
    x: &[f64],
    w: &[f64],
    y: &[f64],
    dy: &[f64],
    act: Activation,
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let dpre: Vec<f64> = dy.iter().zip(y).map(|(d, y)| d * act.slope(*y)).collect();
    outer_acc(dw, &dpre, x);
    for (g, d) in db.iter_mut().zip(&dpre) {
        *g += d;
    }
    matvec_t(w, &dpre, x.len())
}
