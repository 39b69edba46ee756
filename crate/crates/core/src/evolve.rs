//! Genetic algorithm over flat parameter vectors.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub tournament_size: usize,
    /// Chance that a tournament returns its fittest member rather than a
    /// uniformly chosen one.
    pub selection_pressure: f64,
    pub crossover_prob: f64,
    /// Per-gene mutation chance.
    pub mutation_prob: f64,
    pub mutation_sigma: f64,
    pub max_generations: usize,
    /// Individuals copied unchanged into the next generation.
    pub elitism: usize,
    pub episodes_per_eval: usize,
    pub rng_seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 50,
            tournament_size: 5,
            selection_pressure: 0.8,
            crossover_prob: 0.8,
            mutation_prob: 0.05,
            mutation_sigma: 0.1,
            max_generations: 100,
            elitism: 1,
            episodes_per_eval: 3,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("GA config: {0}")]
    Config(String),
    #[error("fitness evaluation of genome {genome} in generation {generation} failed: {message}")]
    Fitness {
        generation: usize,
        genome: usize,
        message: String,
    },
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), EvolveError> {
        let bad = |m: String| Err(EvolveError::Config(m));
        for (name, p) in [
            ("selection_pressure", self.selection_pressure),
            ("crossover_prob", self.crossover_prob),
            ("mutation_prob", self.mutation_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if self.population < 2 || self.population % 2 != 0 {
            return bad(format!("population {} must be even and at least 2", self.population));
        }
        if self.tournament_size == 0 || self.tournament_size > self.population {
            return bad(format!(
                "tournament size {} must lie in 1..={}",
                self.tournament_size, self.population
            ));
        }
        if self.elitism >= self.population {
            return bad("elitism must leave room for offspring".into());
        }
        if !(self.mutation_sigma >= 0.0) {
            return bad("mutation_sigma must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub genes: Vec<f64>,
    /// `None` until evaluated.
    pub fitness: Option<f64>,
}

impl Genome {
    pub fn new(genes: Vec<f64>) -> Self {
        Self { genes, fitness: None }
    }

    fn score(&self) -> f64 {
        self.fitness.unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolveResult {
    pub best: Genome,
    pub history: Vec<GenerationStats>,
}

impl EvolveResult {
    /// `gen,best,mean,std` with a header row.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("gen,best,mean,std\n");
        for g in &self.history {
            s.push_str(&format!("{},{},{},{}\n", g.generation, g.best, g.mean, g.std));
        }
        s
    }
}

/// Index of a tournament winner.
pub fn tournament_select<R: Rng + ?Sized>(population: &[Genome], cfg: &GaConfig, rng: &mut R) -> usize {
    let entrants = sample(rng, population.len(), cfg.tournament_size.min(population.len())).into_vec();
    if rng.random::<f64>() < cfg.selection_pressure {
        let mut best = entrants[0];
        for &i in &entrants[1..] {
            if population[i].score() > population[best].score() {
                best = i;
            }
        }
        best
    } else {
        entrants[rng.random_range(0..entrants.len())]
    }
}

/// Swap suffixes from gene `k` on.
pub fn crossover_at(a: &[f64], b: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), b.len(), "parents of different length");
    let mut ca = a[..k].to_vec();
    ca.extend_from_slice(&b[k..]);
    let mut cb = b[..k].to_vec();
    cb.extend_from_slice(&a[k..]);
    (ca, cb)
}

/// Single-point crossover with probability `crossover_prob`, cut in
/// `1..len`; otherwise copies of the parents.
pub fn crossover<R: Rng + ?Sized>(a: &[f64], b: &[f64], cfg: &GaConfig, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    if a.len() >= 2 && rng.random::<f64>() < cfg.crossover_prob {
        let k = rng.random_range(1..a.len());
        crossover_at(a, b, k)
    } else {
        (a.to_vec(), b.to_vec())
    }
}

/// Perturb each gene with probability `mutation_prob` by `N(0, σ²)`.
/// Returns how many genes changed.
pub fn mutate<R: Rng + ?Sized>(genes: &mut [f64], cfg: &GaConfig, rng: &mut R) -> usize {
    if cfg.mutation_prob == 0.0 {
        return 0;
    }
    let noise = Normal::new(0.0, cfg.mutation_sigma).expect("validated sigma");
    let mut n = 0;
    for g in genes.iter_mut() {
        if rng.random::<f64>() < cfg.mutation_prob {
            *g += noise.sample(rng);
            n += 1;
        }
    }
    n
}

fn stats(generation: usize, pop: &[Genome]) -> GenerationStats {
    let f: Vec<f64> = pop.iter().map(Genome::score).collect();
    let n = f.len() as f64;
    let mean = f.iter().sum::<f64>() / n;
    let var = f.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    GenerationStats {
        generation,
        best: f.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean,
        std: var.sqrt(),
    }
}

fn evaluate<F, E>(generation: usize, pop: &mut [Genome], fitness: &F) -> Result<(), EvolveError>
where
    F: Fn(&[f64]) -> Result<f64, E> + Sync,
    E: std::fmt::Display + Send,
{
    let pending: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].fitness.is_none()).collect();
    let snapshot: &[Genome] = pop;
    let results = par::map_slice(&pending, |_, &i| fitness(&snapshot[i].genes));
    for (&i, r) in pending.iter().zip(results) {
        match r {
            Ok(f) if f.is_finite() => pop[i].fitness = Some(f),
            Ok(f) => {
                return Err(EvolveError::Fitness {
                    generation,
                    genome: i,
                    message: format!("non-finite fitness {f}"),
                })
            }
            Err(e) => {
                return Err(EvolveError::Fitness {
                    generation,
                    genome: i,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(())
}

/// Evolve `initial` for `max_generations`. Fitness is evaluated in parallel
/// and must be a deterministic function of the genes; elites keep their
/// score. Generation 0 is the evaluated initial population.
pub fn evolve<F, E>(cfg: &GaConfig, initial: Vec<Vec<f64>>, fitness: F) -> Result<EvolveResult, EvolveError>
where
    F: Fn(&[f64]) -> Result<f64, E> + Sync,
    E: std::fmt::Display + Send,
{
    cfg.validate()?;
    if initial.len() != cfg.population {
        return Err(EvolveError::Config(format!(
            "initial population has {} genomes, expected {}",
            initial.len(),
            cfg.population
        )));
    }
    let len = initial[0].len();
    if initial.iter().any(|g| g.len() != len || g.iter().any(|v| !v.is_finite())) {
        return Err(EvolveError::Config("genomes must share one length and be finite".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut pop: Vec<Genome> = initial.into_iter().map(Genome::new).collect();
    evaluate(0, &mut pop, &fitness)?;
    let mut history = vec![stats(0, &pop)];
    for generation in 1..=cfg.max_generations {
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| pop[b].score().total_cmp(&pop[a].score()).then(a.cmp(&b)));
        let mut next: Vec<Genome> = order[..cfg.elitism].iter().map(|&i| pop[i].clone()).collect();
        while next.len() < cfg.population {
            let a = tournament_select(&pop, cfg, &mut rng);
            let b = tournament_select(&pop, cfg, &mut rng);
            let (mut ca, mut cb) = crossover(&pop[a].genes, &pop[b].genes, cfg, &mut rng);
            mutate(&mut ca, cfg, &mut rng);
            mutate(&mut cb, cfg, &mut rng);
            next.push(Genome::new(ca));
            if next.len() < cfg.population {
                next.push(Genome::new(cb));
            }
        }
        pop = next;
        evaluate(generation, &mut pop, &fitness)?;
        history.push(stats(generation, &pop));
    }
    let best = pop
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.score().total_cmp(&b.score()).then(j.cmp(i)))
        .map(|(_, g)| g.clone())
        .expect("non-empty population");
    Ok(EvolveResult { best, history })
}
