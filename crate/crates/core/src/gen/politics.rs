use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{check_distribution, generate_name, pick, stratified_counts, Weights};
use crate::domain::{AttributeSpec, DataPoint, Dataset, Task, Value};
use crate::{Error, Result};

pub const GENDER: &str = "Gender";
pub const PARTY: &str = "Party";
pub const OCCUPATION: &str = "Occupation";
pub const AGE: &str = "Age";
pub const EXPERIENCE: &str = "Experience";

/// Normal distribution restricted to `[min, max]` by rejection, rounded to
/// whole units (years).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampedNormal {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl ClampedNormal {
    fn sample<R: Rng + ?Sized>(&self, normal: &Normal<f64>, rng: &mut R) -> f64 {
        loop {
            let v = libm::round(normal.sample(rng));
            if v >= self.min && v <= self.max {
                return v;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySpec {
    pub name: String,
    /// Party whose members tend to be in favor (positive values).
    pub favored_by: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyModel {
    pub cross_party_prob: f64,
    pub neutral_prob: f64,
    /// Probabilities of |v| = 1, 2, 3 for non-neutral positions.
    pub strength_dist: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoliticsGenSpec {
    pub n: usize,
    pub party_split: Weights,
    /// Probability of Female per party label.
    pub female_given_party: Weights,
    pub age: ClampedNormal,
    pub experience: ClampedNormal,
    pub occupation_dist: Weights,
    pub policies: Vec<PolicySpec>,
    pub policy_model: PolicyModel,
}

fn weights(items: &[(&str, f64)]) -> Weights {
    items.iter().map(|(l, p)| (l.to_string(), *p)).collect()
}

impl Default for PoliticsGenSpec {
    fn default() -> Self {
        let policy = |name: &str, party: &str| PolicySpec {
            name: name.to_string(),
            favored_by: party.to_string(),
        };
        Self {
            n: 180,
            party_split: weights(&[("Republican", 0.59), ("Democrat", 0.41)]),
            female_given_party: weights(&[("Republican", 0.14), ("Democrat", 0.57)]),
            age: ClampedNormal {
                mean: 58.0,
                sd: 10.0,
                min: 32.0,
                max: 87.0,
            },
            // Upper bound sits 7 sd above the mean; it only exists so the
            // column has a finite declared range.
            experience: ClampedNormal {
                mean: 9.0,
                sd: 3.0,
                min: 0.0,
                max: 30.0,
            },
            occupation_dist: weights(&[
                ("Career Politician", 0.23),
                ("Business Person", 0.21),
                ("Lawyer", 0.38),
                ("Educator", 0.09),
                ("Doctor", 0.04),
                ("Scientist", 0.05),
            ]),
            policies: vec![
                policy("Ban Abortion After 6 Weeks", "Republican"),
                policy("Legalize Medical Marijuana", "Democrat"),
                policy("Increase Medicare Funding", "Democrat"),
                policy("Ban Alcohol Sales on Sundays", "Republican"),
            ],
            policy_model: PolicyModel {
                cross_party_prob: 0.01,
                neutral_prob: 0.05,
                strength_dist: [0.30, 0.50, 0.20],
            },
        }
    }
}

impl PoliticsGenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        check_distribution("party_split", &self.party_split)?;
        if self.party_split.len() != 2 {
            return Err(Error::Config("party_split must name exactly two parties".into()));
        }
        check_distribution("occupation_dist", &self.occupation_dist)?;
        for (party, _) in &self.party_split {
            match self.female_given_party.iter().find(|(p, _)| p == party) {
                Some((_, f)) if (0.0..=1.0).contains(f) => {}
                Some((_, f)) => {
                    return Err(Error::Config(format!(
                        "female_given_party[{party}] = {f} outside [0, 1]"
                    )))
                }
                None => return Err(Error::Config(format!("female_given_party lacks {party:?}"))),
            }
        }
        for (what, g) in [("age", &self.age), ("experience", &self.experience)] {
            if !(g.sd > 0.0 && g.min < g.max && g.mean.is_finite()) {
                return Err(Error::Config(format!("{what}: need sd > 0 and min < max")));
            }
        }
        for p in &self.policies {
            if !self.party_split.iter().any(|(party, _)| *party == p.favored_by) {
                return Err(Error::Config(format!("policy {:?} favored by unknown party", p.name)));
            }
        }
        let m = &self.policy_model;
        let strength: Weights = ["1", "2", "3"]
            .iter()
            .zip(m.strength_dist)
            .map(|(l, p)| (l.to_string(), p))
            .collect();
        check_distribution("strength_dist", &strength)?;
        let with_party = 1.0 - m.cross_party_prob - m.neutral_prob;
        check_distribution(
            "policy_model",
            &weights(&[
                ("neutral", m.neutral_prob),
                ("cross", m.cross_party_prob),
                ("party", with_party),
            ]),
        )?;
        Ok(())
    }

    /// The attribute schema of generated datasets, in column order.
    pub fn attributes(&self) -> Vec<AttributeSpec> {
        let mut attrs = vec![
            AttributeSpec::categorical(GENDER, ["Female", "Male"]),
            AttributeSpec::categorical(PARTY, self.party_split.iter().map(|(p, _)| p.clone())),
            AttributeSpec::categorical(OCCUPATION, self.occupation_dist.iter().map(|(o, _)| o.clone())),
            AttributeSpec::numeric(AGE, self.age.min, self.age.max),
            AttributeSpec::numeric(EXPERIENCE, self.experience.min, self.experience.max),
        ];
        attrs.extend(
            self.policies
                .iter()
                .map(|p| AttributeSpec::ordinal_int(p.name.clone(), -3, 3)),
        );
        attrs
    }
}

/// Generates the fictitious politicians dataset.
///
/// Party counts and female counts within each party are fixed by
/// [`stratified_counts`]; everything else is drawn per politician.
pub fn generate_politicians(spec: &PoliticsGenSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let age = Normal::new(spec.age.mean, spec.age.sd).map_err(|e| Error::Config(format!("age: {e}")))?;
    let experience =
        Normal::new(spec.experience.mean, spec.experience.sd).map_err(|e| Error::Config(format!("experience: {e}")))?;

    let party_probs: Vec<f64> = spec.party_split.iter().map(|(_, p)| *p).collect();
    let party_counts = stratified_counts(spec.n, &party_probs);
    let mut slots: Vec<(usize, &'static str)> = Vec::with_capacity(spec.n);
    for (party_idx, &count) in party_counts.iter().enumerate() {
        let party = &spec.party_split[party_idx].0;
        let p_female = spec
            .female_given_party
            .iter()
            .find(|(p, _)| p == party)
            .map(|(_, f)| *f)
            .unwrap_or(0.0);
        let females = (libm::round(count as f64 * p_female) as usize).min(count);
        slots.extend((0..count).map(|i| (party_idx, if i < females { "Female" } else { "Male" })));
    }
    slots.shuffle(&mut rng);

    let occupation_probs: Vec<f64> = spec.occupation_dist.iter().map(|(_, p)| *p).collect();
    let model = spec.policy_model;
    let points = slots
        .into_iter()
        .enumerate()
        .map(|(i, (party_idx, gender))| {
            let party = &spec.party_split[party_idx].0;
            let mut values = BTreeMap::new();
            values.insert(GENDER.to_string(), Value::Category(gender.to_string()));
            values.insert(PARTY.to_string(), Value::Category(party.clone()));
            let occ = pick(occupation_probs.iter().copied(), rng.random::<f64>());
            values.insert(
                OCCUPATION.to_string(),
                Value::Category(spec.occupation_dist[occ].0.clone()),
            );
            values.insert(AGE.to_string(), Value::Number(spec.age.sample(&age, &mut rng)));
            values.insert(
                EXPERIENCE.to_string(),
                Value::Number(spec.experience.sample(&experience, &mut rng)),
            );
            for policy in &spec.policies {
                let trend = if policy.favored_by == *party { 1.0 } else { -1.0 };
                let outcome = pick(
                    [
                        model.neutral_prob,
                        model.cross_party_prob,
                        1.0 - model.neutral_prob - model.cross_party_prob,
                    ],
                    rng.random::<f64>(),
                );
                let v = match outcome {
                    0 => 0.0,
                    side => {
                        let strength = (pick(model.strength_dist, rng.random::<f64>()) + 1) as f64;
                        let sign = if side == 1 { -trend } else { trend };
                        sign * strength
                    }
                };
                values.insert(policy.name.clone(), Value::Number(v));
            }
            let label = generate_name(gender, &mut rng);
            DataPoint {
                id: format!("pol-{i:03}"),
                label,
                values,
            }
        })
        .collect();

    Ok(Dataset {
        id: format!("politics-s{seed}"),
        task: Task::Politics,
        attributes: spec.attributes(),
        points,
        seed,
    })
}
