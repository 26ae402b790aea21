//! Versioned JSON instance files and their validated in-memory form.
//!
//! Numbers round-trip bit for bit: serialization uses the shortest
//! representation that parses back to the same float, and loading never
//! mutates the stored tensors.

use confmdp::mdp::{ConfMdp, Configuration, Policy};
use confmdp::metric::{Distribution, MetricSpace};
use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const INSTANCE_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub n: usize,
    pub dist: Vec<Vec<f64>>,
}

/// The on-disk schema. Optional `*_new` fields carry the candidate pair
/// needed by the bound tabulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub version: u32,
    pub states: SpaceSpec,
    pub actions: SpaceSpec,
    pub gamma: f64,
    pub reward: Vec<Vec<Vec<f64>>>,
    pub policy: Vec<Vec<f64>>,
    pub configuration: Vec<Vec<Vec<f64>>>,
    pub initial: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_new: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub configuration_new: Option<Vec<Vec<Vec<f64>>>>,
}

/// A fully validated instance with its content digest.
pub struct LoadedInstance {
    pub mdp: ConfMdp,
    pub policy: Policy,
    pub configuration: Configuration,
    pub initial: Distribution,
    pub candidate: Option<(Policy, Configuration)>,
    pub digest: String,
}

fn matrix(data: &[Vec<f64>], rows: usize, cols: usize, what: &str) -> Result<Array2<f64>, CliError> {
    if data.len() != rows || data.iter().any(|row| row.len() != cols) {
        return Err(CliError::schema(format!(
            "{what} must be a {rows}x{cols} matrix"
        )));
    }
    Ok(Array2::from_shape_fn((rows, cols), |(i, j)| data[i][j]))
}

fn tensor(
    data: &[Vec<Vec<f64>>],
    s: usize,
    a: usize,
    next: usize,
    what: &str,
) -> Result<Array3<f64>, CliError> {
    let shape_ok = data.len() == s
        && data
            .iter()
            .all(|mid| mid.len() == a && mid.iter().all(|row| row.len() == next));
    if !shape_ok {
        return Err(CliError::schema(format!(
            "{what} must be a {s}x{a}x{next} tensor"
        )));
    }
    Ok(Array3::from_shape_fn((s, a, next), |(i, j, k)| data[i][j][k]))
}

fn to_nested2(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.outer_iter().map(|row| row.to_vec()).collect()
}

fn to_nested3(t: &Array3<f64>) -> Vec<Vec<Vec<f64>>> {
    t.outer_iter()
        .map(|mid| mid.outer_iter().map(|row| row.to_vec()).collect())
        .collect()
}

impl InstanceFile {
    /// Assembles a file from validated core objects.
    pub fn from_parts(
        mdp: &ConfMdp,
        policy: &Policy,
        configuration: &Configuration,
        initial: &Distribution,
        candidate: Option<(&Policy, &Configuration)>,
    ) -> Self {
        InstanceFile {
            version: INSTANCE_VERSION,
            states: SpaceSpec {
                n: mdp.n_states(),
                dist: to_nested2(&mdp.states().dist_matrix().to_owned()),
            },
            actions: SpaceSpec {
                n: mdp.n_actions(),
                dist: to_nested2(&mdp.actions().dist_matrix().to_owned()),
            },
            gamma: mdp.gamma(),
            reward: to_nested3(&mdp.reward().to_owned()),
            policy: to_nested2(&policy.probs().to_owned()),
            configuration: to_nested3(&configuration.probs().to_owned()),
            initial: initial.as_slice().to_vec(),
            policy_new: candidate.map(|(pi, _)| to_nested2(&pi.probs().to_owned())),
            configuration_new: candidate.map(|(_, p)| to_nested3(&p.probs().to_owned())),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::schema(format!("invalid instance JSON: {e}")))
    }

    /// SHA-256 of the compact canonical serialization.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("instance serialization cannot fail");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hex::encode(hasher.finalize())
    }

    /// Re-validates every invariant and produces core objects. The stored
    /// tensors are never modified.
    pub fn validate(&self) -> Result<LoadedInstance, CliError> {
        if self.version != INSTANCE_VERSION {
            return Err(CliError::schema(format!(
                "unsupported instance version {} (expected {INSTANCE_VERSION})",
                self.version
            )));
        }
        let s = self.states.n;
        let a = self.actions.n;
        let states = MetricSpace::new(matrix(&self.states.dist, s, s, "states.dist")?)
            .map_err(CliError::from_core_schema)?;
        let actions = MetricSpace::new(matrix(&self.actions.dist, a, a, "actions.dist")?)
            .map_err(CliError::from_core_schema)?;
        let reward = tensor(&self.reward, s, a, s, "reward")?;
        let mdp = ConfMdp::new(states, actions, reward, self.gamma)
            .map_err(CliError::from_core_schema)?;
        let policy = Policy::new(matrix(&self.policy, s, a, "policy")?)
            .map_err(CliError::from_core_schema)?;
        let configuration = Configuration::new(tensor(&self.configuration, s, a, s, "configuration")?)
            .map_err(CliError::from_core_schema)?;
        if self.initial.len() != s {
            return Err(CliError::schema(format!("initial must have length {s}")));
        }
        let initial = Distribution::new(Array1::from_vec(self.initial.clone()))
            .map_err(CliError::from_core_schema)?;

        let candidate = match (&self.policy_new, &self.configuration_new) {
            (Some(pi), Some(p)) => {
                let pi = Policy::new(matrix(pi, s, a, "policy_new")?)
                    .map_err(CliError::from_core_schema)?;
                let p = Configuration::new(tensor(p, s, a, s, "configuration_new")?)
                    .map_err(CliError::from_core_schema)?;
                Some((pi, p))
            }
            (None, None) => None,
            _ => {
                return Err(CliError::schema(
                    "policy_new and configuration_new must be present together".into(),
                ))
            }
        };

        Ok(LoadedInstance {
            digest: self.digest(),
            mdp,
            policy,
            configuration,
            initial,
            candidate,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use confmdp::generators::{random_instance, random_pair, GeneratorSpec, MetricKind};

    fn sample() -> InstanceFile {
        let spec = GeneratorSpec {
            n_states: 3,
            n_actions: 2,
            gamma: 0.7,
            smoothing: 0.5,
            metric_kind: MetricKind::Line,
            seed: 5,
        };
        let (c, pi, p, mu) = random_instance(&spec).unwrap();
        let (pi2, p2) = random_pair(&c, 0.5, 99).unwrap();
        InstanceFile::from_parts(&c, &pi, &p, &mu, Some((&pi2, &p2)))
    }

    #[test]
    fn round_trip_is_bitwise() {
        let file = sample();
        let json = file.to_json();
        let reparsed = InstanceFile::from_json(&json).unwrap();
        assert_eq!(json, reparsed.to_json());
        assert_eq!(file.digest(), reparsed.digest());
        // a second save of the revalidated instance also matches
        let loaded = reparsed.validate().unwrap();
        let again = InstanceFile::from_parts(
            &loaded.mdp,
            &loaded.policy,
            &loaded.configuration,
            &loaded.initial,
            loaded
                .candidate
                .as_ref()
                .map(|(pi, p)| (pi, p)),
        );
        assert_eq!(json, again.to_json());
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let mut file = sample();
        file.version = 2;
        assert!(file.validate().is_err());
    }

    #[test]
    fn ragged_tensors_are_rejected() {
        let mut file = sample();
        file.reward[0][0].pop();
        assert!(file.validate().is_err());
    }

    #[test]
    fn lone_candidate_policy_is_rejected() {
        let mut file = sample();
        file.configuration_new = None;
        assert!(file.validate().is_err());
    }
}
