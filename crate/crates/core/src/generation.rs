//! Seeded random instance generation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::ConfigError;
use crate::instance::{Instance, Metadata, Time};

/// Configuration for [`InstanceGenerator`]. Ranges are inclusive.
#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub num_jobs_range: (usize, usize),
    pub num_machines_range: (usize, usize),
    pub duration_range: (Time, Time),
    /// When false every job visits each machine exactly once (its machine
    /// row is a random permutation); ops per job then equals the machine
    /// count.
    pub allow_recirculation: bool,
    pub allow_less_jobs_than_machines: bool,
    pub seed: u64,
    pub iteration_limit: Option<usize>,
    pub name_suffix: String,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            num_jobs_range: (10, 20),
            num_machines_range: (5, 10),
            duration_range: (1, 99),
            allow_recirculation: false,
            allow_less_jobs_than_machines: true,
            seed: 0,
            iteration_limit: None,
            name_suffix: "generated_instance_".into(),
        }
    }
}

impl GeneratorConfig {
    pub fn fixed_size(num_jobs: usize, num_machines: usize) -> Self {
        Self {
            num_jobs_range: (num_jobs, num_jobs),
            num_machines_range: (num_machines, num_machines),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        for &(lo, hi) in [&self.num_jobs_range, &self.num_machines_range] {
            if lo < 1 || lo > hi {
                return Err(ConfigError::InvalidRange { lo, hi });
            }
        }
        let (lo, hi) = self.duration_range;
        if lo < 1 || lo > hi {
            return Err(ConfigError::InvalidRange {
                lo: lo as usize,
                hi: hi as usize,
            });
        }
        Ok(())
    }
}

/// Deterministic random instance source.
///
/// The stream is a fixed function of the seed: the generator draws from a
/// ChaCha8 keystream in a pinned order (job count, then machine count, then
/// the duration matrix row-major, then machine rows), so a config and seed
/// reproduce the same instances on every build.
pub struct InstanceGenerator {
    config: GeneratorConfig,
    rng: ChaCha8Rng,
    generated: usize,
}

impl InstanceGenerator {
    pub fn new(config: GeneratorConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Self {
            config,
            rng,
            generated: 0,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    /// Largest instance the configuration can produce, as (jobs, machines,
    /// operations); used by environments to size padded observations.
    pub fn max_dimensions(&self) -> (usize, usize, usize) {
        let jobs = self.config.num_jobs_range.1;
        let machines = self.config.num_machines_range.1;
        let ops_per_job = machines; // with or without recirculation
        (jobs, machines, jobs * ops_per_job)
    }

    pub fn generate(&mut self) -> Result<Instance, ConfigError> {
        let (jlo, jhi) = self.config.num_jobs_range;
        let num_jobs = self.rng.random_range(jlo..=jhi);
        let (mlo, mhi) = self.config.num_machines_range;
        let mut num_machines = self.rng.random_range(mlo..=mhi);
        if !self.config.allow_less_jobs_than_machines {
            if mlo > num_jobs {
                return Err(ConfigError::Invalid(format!(
                    "machine range starts at {mlo} but only {num_jobs} jobs were drawn"
                )));
            }
            // resample the machine count until it does not exceed the jobs
            while num_machines > num_jobs {
                num_machines = self.rng.random_range(mlo..=mhi);
            }
        }
        let ops_per_job = num_machines;
        let (dlo, dhi) = self.config.duration_range;
        let mut durations = Vec::with_capacity(num_jobs);
        for _ in 0..num_jobs {
            let row: Vec<Time> = (0..ops_per_job)
                .map(|_| self.rng.random_range(dlo..=dhi))
                .collect();
            durations.push(row);
        }
        let mut machines = Vec::with_capacity(num_jobs);
        for _ in 0..num_jobs {
            let row = if self.config.allow_recirculation {
                (0..ops_per_job)
                    .map(|_| self.rng.random_range(0..num_machines))
                    .collect()
            } else {
                // Fisher-Yates over the identity permutation
                let mut row: Vec<usize> = (0..num_machines).collect();
                for i in 0..num_machines {
                    let j = self.rng.random_range(i..num_machines);
                    row.swap(i, j);
                }
                row
            };
            machines.push(row);
        }
        self.generated += 1;
        let name = format!("{}{}", self.config.name_suffix, self.generated);
        Instance::from_matrices(name, &durations, &machines, Metadata::new())
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

impl Iterator for InstanceGenerator {
    type Item = Instance;

    fn next(&mut self) -> Option<Instance> {
        if let Some(limit) = self.config.iteration_limit {
            if self.generated >= limit {
                return None;
            }
        }
        self.generate().ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config_3x3(seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            duration_range: (1, 10),
            seed,
            ..GeneratorConfig::fixed_size(3, 3)
        }
    }

    #[test]
    fn machine_rows_are_permutations_without_recirculation() {
        let mut generator = InstanceGenerator::new(config_3x3(5)).unwrap();
        for _ in 0..20 {
            let inst = generator.generate().unwrap();
            for row in inst.machines_matrix() {
                let mut sorted = row.clone();
                sorted.sort_unstable();
                assert_eq!(sorted, vec![0, 1, 2]);
            }
        }
    }

    #[test]
    fn durations_stay_in_range() {
        let config = GeneratorConfig {
            duration_range: (1, 99),
            ..GeneratorConfig::fixed_size(4, 3)
        };
        let mut generator = InstanceGenerator::new(config).unwrap();
        for _ in 0..50 {
            let inst = generator.generate().unwrap();
            for row in inst.duration_matrix() {
                assert!(row.iter().all(|&d| (1..=99).contains(&d)));
            }
        }
    }

    #[test]
    fn same_seed_same_instances() {
        let a: Vec<_> = InstanceGenerator::new(GeneratorConfig {
            iteration_limit: Some(3),
            ..config_3x3(42)
        })
        .unwrap()
        .collect();
        let b: Vec<_> = InstanceGenerator::new(GeneratorConfig {
            iteration_limit: Some(3),
            ..config_3x3(42)
        })
        .unwrap()
        .collect();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert_eq!(a[0].name(), "generated_instance_1");
    }

    #[test]
    fn iteration_limit_bounds_the_stream() {
        let gen = InstanceGenerator::new(GeneratorConfig {
            iteration_limit: Some(10),
            ..config_3x3(1)
        })
        .unwrap();
        assert_eq!(gen.count(), 10);
        let empty = InstanceGenerator::new(GeneratorConfig {
            iteration_limit: Some(0),
            ..config_3x3(1)
        })
        .unwrap();
        assert_eq!(empty.count(), 0);
    }

    #[test]
    fn invalid_range_is_rejected() {
        let config = GeneratorConfig {
            num_jobs_range: (3, 2),
            ..GeneratorConfig::default()
        };
        assert!(InstanceGenerator::new(config).is_err());
    }

    #[test]
    fn jobs_at_least_machines_when_required() {
        let config = GeneratorConfig {
            num_jobs_range: (3, 6),
            num_machines_range: (2, 6),
            allow_less_jobs_than_machines: false,
            seed: 9,
            ..GeneratorConfig::default()
        };
        let mut generator = InstanceGenerator::new(config).unwrap();
        for _ in 0..30 {
            let inst = generator.generate().unwrap();
            assert!(inst.num_jobs() >= inst.num_machines());
        }
    }
}
