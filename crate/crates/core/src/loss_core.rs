//! The tilted objective and the quantities derived from it.
//!
//! For a loss profile `l_1..l_n` and tilt `lambda > 0` the tilted value is
//!
//! ```text
//! L(lambda) = (1/lambda) * ln( (1/n) * sum_i exp(lambda * l_i) )
//! ```
//!
//! which moves from the mean loss (`lambda -> 0`) to the maximum loss
//! (`lambda -> inf`). Every exponential is taken after subtracting the
//! maximum loss, so `lambda * l` may be arbitrarily large.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed-order compensated (Neumaier) summation.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Per-observation losses for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LossProfile {
    losses: Vec<f64>,
    max: f64,
    min: f64,
}

impl LossProfile {
    pub fn new(losses: Vec<f64>) -> Result<Self> {
        if losses.is_empty() {
            return Err(Error::InvalidInput("loss profile is empty".into()));
        }
        let mut max = f64::NEG_INFINITY;
        let mut min = f64::INFINITY;
        for (i, &l) in losses.iter().enumerate() {
            if !l.is_finite() {
                return Err(Error::InvalidInput(format!("loss {i} is not finite ({l})")));
            }
            if l < 0.0 {
                return Err(Error::InvalidInput(format!("loss {i} is negative ({l})")));
            }
            max = max.max(l);
            min = min.min(l);
        }
        Ok(Self { losses, max, min })
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn is_constant(&self) -> bool {
        self.max == self.min
    }

    pub fn mean(&self) -> f64 {
        if self.is_constant() {
            return self.max;
        }
        let mean = compensated_sum(self.losses.iter().copied()) / self.losses.len() as f64;
        mean.clamp(self.min, self.max)
    }

    /// Adds `shift` to every entry.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        Self::new(self.losses.iter().map(|l| l + shift).collect())
    }

    /// Multiplies every entry by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.losses.iter().map(|l| l * factor).collect())
    }
}

impl TryFrom<Vec<f64>> for LossProfile {
    type Error = Error;

    fn try_from(losses: Vec<f64>) -> Result<Self> {
        Self::new(losses)
    }
}

impl TryFrom<&[f64]> for LossProfile {
    type Error = Error;

    fn try_from(losses: &[f64]) -> Result<Self> {
        Self::new(losses.to_vec())
    }
}

/// Tilt strength, `0 < lambda < inf`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TiltParam(f64);

impl TiltParam {
    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "tilt must be finite and strictly positive, got {lambda}"
            )));
        }
        Ok(Self(lambda))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for TiltParam {
    type Error = Error;

    fn try_from(lambda: f64) -> Result<Self> {
        Self::new(lambda)
    }
}

impl From<TiltParam> for f64 {
    fn from(t: TiltParam) -> f64 {
        t.0
    }
}

/// Assignment of observations to (possibly overlapping) groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPartition {
    assignment: Vec<Vec<usize>>,
    members: Vec<Vec<usize>>,
}

impl GroupPartition {
    /// `assignment[i]` lists the groups observation `i` belongs to.
    pub fn new(assignment: Vec<Vec<usize>>, group_count: usize) -> Result<Self> {
        if group_count == 0 {
            return Err(Error::InvalidPartition(
                "group count must be at least 1".into(),
            ));
        }
        let mut members = vec![Vec::new(); group_count];
        for (i, groups) in assignment.iter().enumerate() {
            if groups.is_empty() {
                return Err(Error::InvalidPartition(format!(
                    "observation {i} belongs to no group"
                )));
            }
            for &g in groups {
                if g >= group_count {
                    return Err(Error::InvalidPartition(format!(
                        "observation {i} assigned to group {g}, but only {group_count} groups exist"
                    )));
                }
                if members[g].last() != Some(&i) {
                    members[g].push(i);
                }
            }
        }
        if let Some(empty) = members.iter().position(Vec::is_empty) {
            return Err(Error::InvalidPartition(format!("group {empty} is empty")));
        }
        Ok(Self {
            assignment,
            members,
        })
    }

    /// Builds a non-overlapping partition from categorical labels. Group `j`
    /// collects the observations whose label equals `names[j]`.
    pub fn from_labels<S: AsRef<str>>(labels: &[S], names: &[String]) -> Result<Self> {
        let assignment = labels
            .iter()
            .enumerate()
            .map(|(i, label)| {
                names
                    .iter()
                    .position(|n| n == label.as_ref())
                    .map(|g| vec![g])
                    .ok_or_else(|| {
                        Error::InvalidPartition(format!(
                            "observation {i} has unknown group label `{}`",
                            label.as_ref()
                        ))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(assignment, names.len())
    }

    /// One group per observation.
    pub fn singletons(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| vec![i]).collect(), n)
    }

    pub fn group_count(&self) -> usize {
        self.members.len()
    }

    pub fn observation_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn members(&self, group: usize) -> &[usize] {
        &self.members[group]
    }

    pub fn assignment(&self) -> &[Vec<usize>] {
        &self.assignment
    }

    /// Within-group average loss for every group.
    pub fn group_averages(&self, profile: &LossProfile) -> Result<Vec<f64>> {
        if profile.len() != self.observation_count() {
            return Err(Error::DimensionMismatch {
                expected: self.observation_count(),
                found: profile.len(),
            });
        }
        let losses = profile.losses();
        Ok(self
            .members
            .iter()
            .map(|m| compensated_sum(m.iter().map(|&i| losses[i])) / m.len() as f64)
            .collect())
    }
}

/// `value = gamma * mean + (1 - gamma) * max`; `gamma` is `None` for a
/// constant profile, where any gamma satisfies the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltDecomposition {
    pub value: f64,
    pub mean_loss: f64,
    pub max_loss: f64,
    pub gamma: Option<f64>,
}

/// Mean loss.
pub fn utilitarian_value(profile: &LossProfile) -> f64 {
    profile.mean()
}

/// Worst-case loss.
pub fn rawlsian_value(profile: &LossProfile) -> f64 {
    profile.max()
}

/// `(1/lambda) ln((1/n) sum exp(lambda l_i))`, evaluated as
/// `max + ln1p(mean(expm1(lambda (l_i - max)))) / lambda`.
///
/// The result is clamped to `[mean, max]`, which holds exactly in real
/// arithmetic but can be missed by an ulp after rounding.
pub fn tilted_value(profile: &LossProfile, tilt: TiltParam) -> f64 {
    if profile.is_constant() {
        return profile.max();
    }
    let lambda = tilt.value();
    let max = profile.max();
    let n = profile.len() as f64;
    let shifted = compensated_sum(
        profile
            .losses()
            .iter()
            .map(|&l| (lambda * (l - max)).exp_m1()),
    ) / n;
    let value = max + shifted.ln_1p() / lambda;
    value.clamp(profile.mean(), max)
}

/// Softmax of `lambda * losses`; the gradient of the tilted value with
/// respect to the losses.
pub fn tilt_weights(profile: &LossProfile, tilt: TiltParam) -> Vec<f64> {
    let lambda = tilt.value();
    let max = profile.max();
    let unnormalized: Vec<f64> = profile
        .losses()
        .iter()
        .map(|&l| (lambda * (l - max)).exp())
        .collect();
    let total = compensated_sum(unnormalized.iter().copied());
    unnormalized.into_iter().map(|u| u / total).collect()
}

/// Tilted value of the within-group average losses.
pub fn group_tilted_value(
    profile: &LossProfile,
    groups: &GroupPartition,
    tilt: TiltParam,
) -> Result<f64> {
    let averages = LossProfile::new(groups.group_averages(profile)?)?;
    Ok(tilted_value(&averages, tilt))
}

pub fn decompose(profile: &LossProfile, tilt: TiltParam) -> TiltDecomposition {
    let value = tilted_value(profile, tilt);
    let mean_loss = profile.mean();
    let max_loss = profile.max();
    let gamma = if profile.is_constant() || max_loss <= mean_loss {
        None
    } else {
        Some((max_loss - value) / (max_loss - mean_loss))
    };
    TiltDecomposition {
        value,
        mean_loss,
        max_loss,
        gamma,
    }
}

/// `mean + ((1 - gamma) / gamma) * max`.
pub fn penalized_value(profile: &LossProfile, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )));
    }
    Ok(profile.mean() + (1.0 - gamma) / gamma * profile.max())
}
