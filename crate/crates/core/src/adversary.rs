//! Byzantine message forgery.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamVector;
use crate::protocol::UploadMessage;
use crate::rng::{purpose, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Gaussian,
    SignFlip,
    SameValue,
    LargeConstant,
    Zero,
}

impl AttackKind {
    pub const ALL: [AttackKind; 5] = [
        AttackKind::Gaussian,
        AttackKind::SignFlip,
        AttackKind::SameValue,
        AttackKind::LargeConstant,
        AttackKind::Zero,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Gaussian => "gaussian",
            AttackKind::SignFlip => "sign_flip",
            AttackKind::SameValue => "same_value",
            AttackKind::LargeConstant => "large_constant",
            AttackKind::Zero => "zero",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttackKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid("attack.kind", alloc::format!("unrecognized attack `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub scale: f64,
    /// Seed of the stream shared by colluding senders.
    pub collusion_seed: u64,
}

impl AttackSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.scale.is_finite() {
            return Err(Error::invalid("attack.scale", "must be finite"));
        }
        Ok(())
    }
}

fn gaussian_vec<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Replaces an honest upload with a forged one.
///
/// `z` and `t` are the sender's view of the global model and the server
/// iteration. Only the `same_value` attack draws from the shared collusion
/// stream, keyed by `t`, so every colluder sending at the same iteration
/// emits the same vector. `rng` is the sender's own stream.
pub fn attack_message<R: Rng + ?Sized>(
    spec: &AttackSpec,
    honest: &UploadMessage,
    z: &ParamVector,
    t: u64,
    rng: &mut R,
) -> Result<UploadMessage> {
    spec.validate()?;
    let dim = honest.omega.dim();
    let forged = match spec.kind {
        AttackKind::Gaussian => gaussian_vec(dim, spec.scale, rng),
        AttackKind::SignFlip => z
            .values()
            .iter()
            .zip(honest.omega.values())
            .map(|(zk, wk)| 2.0 * zk - wk)
            .collect(),
        AttackKind::SameValue => {
            let mut shared = stream(spec.collusion_seed, purpose::COLLUSION, t);
            gaussian_vec(dim, spec.scale, &mut shared)
        }
        AttackKind::LargeConstant => vec![spec.scale; dim],
        AttackKind::Zero => vec![0.0; dim],
    };
    Ok(UploadMessage {
        client_id: honest.client_id,
        omega: honest.omega.with_values(forged)?,
        eps: spec.scale,
        phi: vec![spec.scale; dim],
        sent_at: honest.sent_at,
    })
}
