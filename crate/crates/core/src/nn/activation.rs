use serde::{Deserialize, Serialize};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// `x` for positive inputs, `alpha * x` otherwise.
pub fn leaky_relu(x: f64, alpha: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        alpha * x
    }
}

/// Element-wise nonlinearity. Derivatives are taken from the pre-activation;
/// at exactly 0 the rectifiers use their negative-branch slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Sigmoid,
    Relu,
    LeakyRelu(f64),
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Self::Identity => z,
            Self::Sigmoid => sigmoid(z),
            Self::Relu => relu(z),
            Self::LeakyRelu(a) => leaky_relu(z, a),
        }
    }

    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Self::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::LeakyRelu(a) => {
                if z > 0.0 {
                    1.0
                } else {
                    a
                }
            }
        }
    }

    /// Input points where the derivative jumps.
    pub fn has_kink_near(self, z: f64, tol: f64) -> bool {
        matches!(self, Self::Relu | Self::LeakyRelu(_)) && z.abs() < tol
    }
}

/// Channel-gate nonlinearity of a squeeze-and-excitation block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GateKind {
    Sigmoid,
    /// Leaky ReLU clamped to `[0, 1]`.
    ClampedLeaky(f64),
}

impl GateKind {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Self::Sigmoid => sigmoid(z),
            Self::ClampedLeaky(a) => leaky_relu(z, a).clamp(0.0, 1.0),
        }
    }

    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Self::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Self::ClampedLeaky(_) => {
                if z > 0.0 && z < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn has_kink_near(self, z: f64, tol: f64) -> bool {
        matches!(self, Self::ClampedLeaky(_)) && (z.abs() < tol || (z - 1.0).abs() < tol)
    }

    /// Bias that opens a fresh gate to 0.9, so untrained SE blocks pass most of
    /// the signal through.
    pub fn neutral_bias(self) -> f64 {
        match self {
            Self::Sigmoid => 9f64.ln(),
            Self::ClampedLeaky(_) => 0.9,
        }
    }
}
